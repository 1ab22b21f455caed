//! Differential operators on polynomial spaces, truncated moment sequences
//! and positivity-preserver checks.

pub mod diffop;
pub mod error;
pub mod eventual;
pub mod fmt;
pub mod io;
pub mod levygen;
pub mod linalg;
pub mod momseq;
pub mod multiindex;
pub mod poly;
pub mod preserver;
pub mod scalar;
pub mod univariate;

pub use diffop::{DiffOp, OpMatrix, Truncation};
pub use error::{Error, Result};
pub use levygen::{LevyField, LevyTriple};
pub use linalg::Matrix;
pub use momseq::{DiscreteMeasure, MomentSeq};
pub use multiindex::{BasisMap, MultiIndex};
pub use poly::Poly;
pub use preserver::{KDescriptor, PreserverVerdict, Status, Witness};
pub use scalar::Scalar;

pub type Poly64 = Poly<f64>;
pub type Poly32 = Poly<f32>;
pub type Matrix64 = Matrix<f64>;
pub type DiffOp64 = DiffOp<f64>;
pub type DiffOp32 = DiffOp<f32>;
pub type MomentSeq64 = MomentSeq<f64>;
pub type DiscreteMeasure64 = DiscreteMeasure<f64>;
pub type LevyTriple64 = LevyTriple<f64>;
pub type KDescriptor64 = KDescriptor<f64>;
pub type PreserverVerdict64 = PreserverVerdict<f64>;
pub type ThresholdResult64 = eventual::ThresholdResult<f64>;
