//! Experiment runner for the nonlocal convection-diffusion laboratory:
//! TOML experiment specs, CSV formats, study execution, run manifests
//! and plot series.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub use nlcd_core as core;

pub mod error;
pub mod io;
pub mod manifest;
pub mod plot;
pub mod spec;
pub mod study;

pub use error::{NlcdError, Result};
pub use manifest::{Criterion, RunManifest, Status};
pub use spec::{load_spec, parse_spec, ExperimentSpec, Study};
pub use study::execute;
