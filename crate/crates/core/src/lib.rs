//! Differentiable max-trees.
//!
//! Builds the max-tree of an image, measures its maxima (altitude, dynamics,
//! volume extinction), evaluates a ranked maxima-selection loss, and
//! back-propagates gradients from node altitudes to pixels so images can be
//! optimised by gradient descent.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the precision for the common cases.

// `!(x > 0)` style checks are deliberate: they reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backprop;
pub mod error;
pub mod grid;
pub mod image;
pub mod imageio;
pub mod losses;
pub mod maxtree;
pub mod measures;
pub mod optimizer;
pub mod oracles;
pub mod run;
pub mod scalar;
pub mod synth;

pub use error::{Error, Result};
pub use grid::{Connectivity, Grid};
pub use image::Image;
pub use losses::{LossBreakdown, LossConfig};
pub use maxtree::{MaxTree, NodeAttributes};
pub use measures::{MeasureKind, MeasureVector};
pub use optimizer::{OptimConfig, StopReason, Trajectory};
pub use scalar::Scalar;

pub type Image64 = Image<f64>;
pub type Image32 = Image<f32>;
pub type MaxTree64 = MaxTree<f64>;
pub type MaxTree32 = MaxTree<f32>;
pub type MeasureVector64 = MeasureVector<f64>;
pub type MeasureVector32 = MeasureVector<f32>;
pub type LossConfig64 = LossConfig<f64>;
pub type OptimConfig64 = OptimConfig<f64>;
pub type Trajectory64 = Trajectory<f64>;
