//! Library surface of the experiment pipeline; the `pme-lab` binary is a
//! thin wrapper over these modules.

pub mod config;
pub mod pipeline;
pub mod svg;
