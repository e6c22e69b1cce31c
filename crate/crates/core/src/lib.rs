//! Exact twisted dyadic Haar systems, martingale filtrations and Heisenberg shard geometry
//! on finite dyadic tori.

pub mod dyadic;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod haar;
pub mod martingale;
pub mod nilpotent;
pub mod shear;
pub mod tensor;

pub use dyadic::{Dyadic, RootDyadic, Scalar};
pub use error::{Error, Result};
pub use haar::{DyadicCube, Euclid, FrameResult, HaarCoefficients, HaarIndex};
pub use martingale::{LpReport, ScalePair};
pub use grid::{AnySignal, AxisSpec, ExactSignal, FloatSignal, GridSignal, Law, TorusGrid};
pub use shear::{PullbackOperator, ShearKind, ShearMap};
pub use nilpotent::{AnalyticShard, Comparability, NilCoefficients, NilShape, NilSystem, NilpotentHaarIndex, ParabolicBlock};
