//! Functional-connectivity analysis of multichannel EEG-style recordings and
//! classification of pre/post-intervention performance change.
//!
//! The pipeline runs in five stages, each usable on its own:
//!
//! 1. [`recording`] / [`synth`] — the recording data model, CSV+sidecar i/o,
//!    and synthetic fixtures (stable VAR processes, coupled sinusoids) with
//!    known ground-truth connectivity.
//! 2. [`preprocess`] — zero-phase band-pass / notch filtering, average
//!    re-referencing, baseline correction.
//! 3. [`spectral`] — Welch cross-spectral density and the analytic Morlet
//!    continuous wavelet transform.
//! 4. [`connectivity`] — magnitude-squared coherence, wavelet coherence, and
//!    partial directed coherence from a fitted multivariate autoregressive
//!    model, each reduced to a band-aggregated channel x channel matrix.
//! 5. [`features`] / [`ml`] — performance scoring and three-level binning,
//!    pre/post connectivity deltas, feature selection (forward selection and
//!    recursive elimination), four classifier families, repeated stratified
//!    cross-validation and grid search.

pub mod error;
pub mod linalg;
pub mod recording;
pub mod rng;
pub mod synth;

pub mod connectivity;
pub mod features;
pub mod ml;
pub mod preprocess;
pub mod spectral;

pub use error::{Error, Result};
pub use recording::{load_recording, save_recording, Recording, Session};
pub use synth::{
    check_var_stability, generate_coupled_sinusoids, generate_var, VarGroundTruth,
};
