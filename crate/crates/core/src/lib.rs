//! Riemannian-geometry classification of event-related potentials.
//!
//! Trials are summarized by the covariance of a "super trial" (an averaged
//! target response stacked on top of the trial), and classified by their
//! affine-invariant distance to the Fréchet mean of each class. A generic
//! model can be adapted to a new subject by sliding each class mean along
//! the geodesic toward the subject's own running mean.

pub mod classifier;
pub mod cli;
pub mod config;
pub mod erp_cov;
pub mod eval;
pub mod error;
pub mod preprocess;
pub mod spd;
pub mod storage;

pub use classifier::{AdaptationState, AlphaSchedule, MdmModel};
pub use erp_cov::{EstimatorConfig, Label, Trial};
pub use error::{Error, Result};
pub use spd::{MeanConfig, SpdMatrix, SymmetricMatrix};
pub use storage::{EpochArchive, ModelFile};
