//! Numerical core for adaptive beamforming on a multibeam GEO direct-radiating
//! array (DRA).
//!
//! The crate is `no_std` (it needs `alloc`) and covers the whole chain from
//! array geometry to matrix selection:
//!
//! * [`geometry`]: array dimensioning and the subarrayed planar geometry.
//! * [`weights`], [`pattern`], [`directivity`], [`engine`]: weight matrices,
//!   array factor, pattern cuts, beamwidth / SLL measurement, directivity and
//!   EIRP.
//! * [`synthesis`]: steering phases, Dolph-Chebyshev tapers, null injection.
//! * [`cost`], [`optimizer`]: the three-term beam cost and the reference
//!   ("oracle") matrix search.
//! * [`clustering`]: z-scored k-means over beam requirements.
//! * [`classifier`]: a small feedforward network trained with categorical
//!   cross-entropy that picks one of the cluster matrices.
//!
//! File formats, timing and the command-line pipeline live in the companion
//! `beamsel` crate.
#![no_std]
// Validation uses `!(x > 0.0)` style checks on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod classifier;
pub mod clustering;
pub mod cost;
pub mod directivity;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod optimizer;
pub mod pattern;
pub mod synthesis;
pub mod weights;

pub(crate) mod quadrature;

pub use cost::{BeamRequirement, CostBreakdown, CostWeights, EirpMode};
pub use engine::{PatternEngine, PatternMetrics};
pub use error::{Error, Result};
pub use geometry::ArrayGeometry;
pub use pattern::{CutKind, Direction, PatternCut};
pub use synthesis::SynthesisParams;
pub use weights::WeightMatrix;
