//! Optimized bilinear quadrature rules.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod affine;
pub mod basis;
pub mod bench;
pub mod error;
pub mod linalg;
pub mod objective;
pub mod optimizer;
pub mod refquad;
pub mod rules;

pub use affine::AffineMap;
pub use basis::{BasisSet, Domain, PointSet};
pub use error::{Error, Result};
pub use objective::ObjectiveContext;
pub use optimizer::{minimize, OptConfig, OptResult};
pub use refquad::{Coefficient, InnerProductSpec};
pub use rules::{build_rule, BilinearRule};
