//! Control-computer toolkit for operating a device through a USB HID bridge
//! and an HDMI capture dongle.
//!
//! The pieces, bottom-up:
//!
//! - [`protocol`]: newline-delimited JSON commands to the HID bridge.
//! - [`capture`]: raw frames and letterbox cropping.
//! - [`vision`]: change detection, template search, cursor tracking.
//! - [`calibration`]: homing and the pixel to HID mapping.
//! - [`control`]: the pixel-space facade, recognizers, crawler, observer.
//! - [`gateway`]: visual log and the localhost HTTP service.
//! - [`simulator`]: a virtual target device for running all of the above
//!   without hardware.

pub mod calibration;
pub mod capture;
pub mod control;
pub mod element;
pub mod gateway;
pub mod geometry;
pub mod protocol;
pub mod simulator;
pub mod vision;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/protocol.md")]
    pub struct Protocol;
    #[doc = include_str!("../../../book/src/simulator.md")]
    pub struct Simulator;
    #[doc = include_str!("../../../book/src/vision.md")]
    pub struct Vision;
    #[doc = include_str!("../../../book/src/calibration.md")]
    pub struct Calibration;
    #[doc = include_str!("../../../book/src/control.md")]
    pub struct Control;
    #[doc = include_str!("../../../book/src/crawling.md")]
    pub struct Crawling;
    #[doc = include_str!("../../../book/src/gateway.md")]
    pub struct Gateway;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
