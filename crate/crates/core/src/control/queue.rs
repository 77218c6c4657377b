use std::sync::mpsc::{self, Sender};
use std::thread::{self, JoinHandle};

use super::Controller;

type Job = Box<dyn FnOnce(&mut Controller) + Send>;

/// Serializes access to a [`Controller`] living on its own thread.
///
/// Any number of clones may submit work; jobs run one at a time in the
/// order they were queued, so device commands never interleave.
#[derive(Clone)]
pub struct CommandQueue {
    tx: Sender<Job>,
}

impl CommandQueue {
    pub fn spawn(mut controller: Controller) -> (CommandQueue, JoinHandle<Controller>) {
        let (tx, rx) = mpsc::channel::<Job>();
        let worker = thread::Builder::new()
            .name("controller".into())
            .spawn(move || {
                for job in rx {
                    job(&mut controller);
                }
                controller
            })
            .expect("spawn controller thread");
        (CommandQueue { tx }, worker)
    }

    /// Runs `f` on the controller thread and waits for its result.
    ///
    /// Panics if the controller thread has died.
    pub fn run<R, F>(&self, f: F) -> R
    where
        R: Send + 'static,
        F: FnOnce(&mut Controller) -> R + Send + 'static,
    {
        let (tx, rx) = mpsc::sync_channel(1);
        self.tx
            .send(Box::new(move |c| {
                let _ = tx.send(f(c));
            }))
            .expect("controller thread is running");
        rx.recv().expect("controller job completed")
    }
}
