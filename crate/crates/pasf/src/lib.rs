//! Phase-aligned spectral filtering (PASF).
//!
//! Decomposes a real-valued field observed on a regular spatial grid over
//! time into a small number of dynamic components. Each component is the
//! output of a linear filter bank built from eigenvectors of the estimated
//! spectral density matrices, grouped by the spatial shape of their unwrapped
//! phases — so one component captures one coherent traveling or rotating
//! structure, at whatever mix of frequencies it occupies.
//!
//! Pipeline: demean → smoothed-periodogram spectral stack → per-frequency
//! top-r Hermitian eigendecomposition → pooled-eigenvalue shrinkage →
//! gauge fixing and 2D phase unwrapping → correlation-distance Ward
//! clustering → paired filter construction → component reconstruction and
//! variance accounting. [`pipeline::run_decompose`] orchestrates all stages;
//! the modules expose each stage for direct use.

pub mod baseline;
pub mod eigensel;
pub mod error;
pub mod filterbank;
pub mod io;
pub mod numerics;
pub mod phasegeom;
pub mod pipeline;
pub mod simkit;
pub mod spectral;

pub use error::{PasfError, Result};
