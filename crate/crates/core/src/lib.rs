pub mod analysis;
pub mod baseline;
pub mod core;
pub mod error;
pub mod experiment;
mod frame;
pub mod io;
pub mod sdp;
pub mod slcp;
pub mod sll1;
pub mod slnn;

pub use error::{Error, Result};
