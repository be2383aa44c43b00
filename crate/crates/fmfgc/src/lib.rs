//! Run orchestration for the `fmfgc-core` solver: TOML run manifests, the
//! binary field format, CSV traces, and the acceptance suite behind
//! `fmfgc validate`.

pub mod artifacts;
pub mod error;
pub mod format;
pub mod manifest;
pub mod run;
pub mod validate;

pub use error::{Error, Result};
pub use manifest::{parse_config, RunManifest};
