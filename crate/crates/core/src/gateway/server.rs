use std::collections::HashMap;
use std::future::Future;
use std::io;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};
use tokio::sync::oneshot;

use super::action::{handle_action, ActionRequest};
use super::log::{LogError, VisualLog};
use crate::control::{CommandQueue, ControlError, Recognizer};

/// Where the gateway listens. Loopback only unless widened explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GatewayConfig {
    pub bind: IpAddr,
    pub port: u16,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: 8765,
        }
    }
}

pub struct GatewayState {
    queue: CommandQueue,
    log: Arc<VisualLog>,
    recognizer: Arc<dyn Recognizer>,
    accessible: Mutex<Option<Value>>,
}

impl GatewayState {
    pub fn new(queue: CommandQueue, log: Arc<VisualLog>, recognizer: Arc<dyn Recognizer>) -> Arc<Self> {
        Arc::new(GatewayState {
            queue,
            log,
            recognizer,
            accessible: Mutex::new(None),
        })
    }
}

type Shared = Arc<GatewayState>;

fn status_for(e: &ControlError) -> StatusCode {
    match e.kind() {
        "InvalidCalibration" => StatusCode::CONFLICT,
        "RangeError" | "InvalidField" | "UnknownKey" | "LineTooLong" => StatusCode::UNPROCESSABLE_ENTITY,
        "DeviceError" | "MalformedResponse" => StatusCode::BAD_GATEWAY,
        "Timeout" => StatusCode::GATEWAY_TIMEOUT,
        "ChannelClosed" | "SourceUnavailable" | "AllBlackFrame" | "ServiceUnavailable" => {
            StatusCode::SERVICE_UNAVAILABLE
        }
        "StorageFull" => StatusCode::INSUFFICIENT_STORAGE,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

fn error_body(status: StatusCode, kind: &str, message: String) -> Response {
    (status, Json(json!({"v": 1, "error": kind, "message": message}))).into_response()
}

fn control_error(e: ControlError) -> Response {
    error_body(status_for(&e), e.kind(), e.to_string())
}

fn log_error(e: LogError) -> Response {
    match e {
        LogError::UnknownFrame(id) => error_body(StatusCode::NOT_FOUND, "UnknownFrame", format!("no frame {id}")),
        other => control_error(other.into()),
    }
}

/// Runs blocking controller work off the async executor.
async fn on_controller<R, F>(state: &Shared, f: F) -> R
where
    R: Send + 'static,
    F: FnOnce(&mut crate::control::Controller) -> R + Send + 'static,
{
    let queue = state.queue.clone();
    tokio::task::spawn_blocking(move || queue.run(f))
        .await
        .expect("controller job panicked")
}

async fn get_log(State(state): State<Shared>, Query(q): Query<HashMap<String, String>>) -> Response {
    let since = match q.get("since").map(|s| s.parse::<u64>()) {
        None => 0,
        Some(Ok(v)) => v,
        Some(Err(_)) => {
            return error_body(
                StatusCode::UNPROCESSABLE_ENTITY,
                "RangeError",
                "since must be a non-negative integer".into(),
            )
        }
    };
    let entries = state.log.entries_since(since);
    Json(json!({"v": 1, "entries": entries})).into_response()
}

fn png_response(bytes: Vec<u8>, extra: HeaderMap) -> Response {
    let mut resp = (StatusCode::OK, Bytes::from(bytes)).into_response();
    resp.headers_mut()
        .insert(header::CONTENT_TYPE, HeaderValue::from_static("image/png"));
    resp.headers_mut().extend(extra);
    resp
}

async fn get_frame(State(state): State<Shared>, Path(id): Path<String>) -> Response {
    match state.log.frame_png(&id) {
        Ok(bytes) => png_response(bytes, HeaderMap::new()),
        Err(e) => log_error(e),
    }
}

async fn get_latest_frame(State(state): State<Shared>) -> Response {
    let shot = on_controller(&state, |c| c.get_screenshot().map(|f| (f, c.content_geometry()))).await;
    let (frame, geometry) = match shot {
        Ok(v) => v,
        Err(e) => return control_error(e),
    };
    let png = frame.to_png();
    let id = match state.log.store_png(&png) {
        Ok(id) => id,
        Err(e) => return log_error(e),
    };
    let mut headers = HeaderMap::new();
    let mut put = |name: &'static str, value: String| {
        headers.insert(name, HeaderValue::from_str(&value).expect("ascii header"));
    };
    put("x-frame-id", id);
    if let Some(g) = geometry {
        put("x-content-offset", format!("{},{}", g.offset_x, g.offset_y));
        put("x-content-size", format!("{},{}", g.content_width, g.content_height));
    }
    png_response(png, headers)
}

async fn get_accessible(State(state): State<Shared>) -> Response {
    let frame = match on_controller(&state, |c| c.get_screenshot()).await {
        Ok(f) => f,
        Err(e) => return stale_or(&state, e),
    };
    let frame_id = match state.log.store_frame(&frame) {
        Ok(id) => id,
        Err(e) => return log_error(e),
    };
    let recognizer = state.recognizer.clone();
    let recognized = tokio::task::spawn_blocking(move || recognizer.recognize(&frame))
        .await
        .expect("recognizer panicked");
    match recognized {
        Ok(elements) => {
            let items: Vec<Value> = elements
                .iter()
                .map(|e| {
                    let (x, y) = e.center();
                    json!({
                        "id": e.id,
                        "kind": e.kind,
                        "bbox": e.bbox,
                        "content": e.content,
                        "action": {"kind": "click", "x": x, "y": y, "source": "ui"},
                    })
                })
                .collect();
            let view = json!({"v": 1, "frame_id": frame_id, "stale": false, "elements": items});
            *state.accessible.lock().unwrap() = Some(view.clone());
            Json(view).into_response()
        }
        Err(e) => stale_or(&state, e),
    }
}

/// Serves the last good accessible view flagged stale, or the error.
fn stale_or(state: &Shared, e: ControlError) -> Response {
    match state.accessible.lock().unwrap().clone() {
        Some(mut view) => {
            view["stale"] = Value::Bool(true);
            view["error"] = Value::String(e.kind().into());
            Json(view).into_response()
        }
        None => {
            let status = status_for(&e);
            (
                status,
                Json(json!({"v": 1, "stale": true, "error": e.kind(), "message": e.to_string()})),
            )
                .into_response()
        }
    }
}

async fn post_action(State(state): State<Shared>, body: Bytes) -> Response {
    let value: Value = match serde_json::from_slice(&body) {
        Ok(v) => v,
        Err(e) => return error_body(StatusCode::UNPROCESSABLE_ENTITY, "SchemaViolation", e.to_string()),
    };
    let req = match ActionRequest::from_json(&value) {
        Ok(r) => r,
        Err(m) => return error_body(StatusCode::UNPROCESSABLE_ENTITY, "SchemaViolation", m),
    };
    let outcome = on_controller(&state, move |c| handle_action(c, &req).map(|_| c.last_log_seq())).await;
    match outcome {
        Ok(seq) => Json(json!({"v": 1, "result": "success", "log_seq": seq})).into_response(),
        Err(e) => control_error(e),
    }
}

async fn get_status(State(state): State<Shared>) -> Response {
    let (calibrated, connected, geometry) =
        on_controller(&state, |c| (c.is_calibrated(), c.is_connected(), c.content_geometry())).await;
    Json(json!({
        "v": 1,
        "calibrated": calibrated,
        "target_connected": connected,
        "content_geometry": geometry,
    }))
    .into_response()
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/log", get(get_log))
        .route("/frame/latest", get(get_latest_frame))
        .route("/frame/:id", get(get_frame))
        .route("/accessible", get(get_accessible))
        .route("/action", post(post_action))
        .route("/status", get(get_status))
        .with_state(state)
}

/// Serves on an already bound listener until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Shared,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

/// A gateway running on a background thread with its own runtime.
pub struct GatewayHandle {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<io::Result<()>>>,
}

impl GatewayHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    pub fn shutdown(mut self) -> io::Result<()> {
        self.stop_now()
    }

    fn stop_now(&mut self) -> io::Result<()> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(io::Error::other("gateway thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for GatewayHandle {
    fn drop(&mut self) {
        let _ = self.stop_now();
    }
}

fn runtime() -> io::Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
}

/// Binds and starts the gateway in the background. Port 0 picks a free port.
pub fn spawn(state: Shared, config: GatewayConfig) -> io::Result<GatewayHandle> {
    let rt = runtime()?;
    let listener = rt.block_on(tokio::net::TcpListener::bind((config.bind, config.port)))?;
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let thread = thread::Builder::new().name("gateway".into()).spawn(move || {
        rt.block_on(serve(listener, state, async {
            let _ = rx.await;
        }))
    })?;
    Ok(GatewayHandle {
        addr,
        stop: Some(tx),
        thread: Some(thread),
    })
}

/// Runs the gateway in the foreground until Ctrl-C. `on_ready` receives
/// the bound address.
pub fn run_until_interrupted(
    state: Shared,
    config: GatewayConfig,
    on_ready: impl FnOnce(SocketAddr),
) -> io::Result<()> {
    let rt = runtime()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((config.bind, config.port)).await?;
        on_ready(listener.local_addr()?);
        serve(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    })
}
