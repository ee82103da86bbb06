//! Sample-level simulator of a visible-light downlink feeding an ambient
//! backscatter device, with the receiver chain and the sweep harness.

pub mod ambd;
pub mod analysis;
pub mod bc_link;
pub mod energy;
pub mod error;
pub mod harness;
pub mod rx_demod;
pub mod sigcore;
pub mod vlc_channel;
pub mod vlc_tx;

pub use error::{Error, Result};
