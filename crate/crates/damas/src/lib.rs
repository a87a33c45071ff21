//! File formats, time-series processing, rendering and the run pipeline
//! around [`damas_core`]. The `damas` binary is a thin command line over
//! [`pipeline`].

pub mod atomic;
pub mod config;
pub mod error;
pub mod formats;
pub mod pipeline;
pub mod render;
pub mod report;
pub mod timeseries;

pub use error::{Error, Result};
