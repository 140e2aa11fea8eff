//! Training and dynamical-systems analysis of recurrent sentiment classifiers.
//!
//! The crate trains small recurrent networks (vanilla, GRU, LSTM, UGRNN and a
//! purely linear cell) on binary sentiment data, then reverse-engineers them:
//! approximate fixed points of the zero-input dynamics are located by
//! minimizing `q(h) = ‖h − F(h, 0)‖² / N`, the dynamics are linearized and
//! eigendecomposed at each fixed point, and the geometry of the fixed-point
//! set is summarized with PCA and locally linear embedding.

pub mod cells;
pub mod error;
pub mod fixedpoints;
pub mod linearize;
pub mod manifold;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
