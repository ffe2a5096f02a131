//! Verification and simulation toolkit for integrable type-II defects in the Liouville and
//! N=1 super-Liouville field theories, with fields valued in a finite Grassmann algebra.

pub mod algebra;
pub mod characteristics;
pub mod defect_sim;
pub mod graded_linalg;
pub mod grassmann;
pub mod grid;
pub mod jet;
pub mod liouville;
pub mod report;
pub mod super_liouville;

pub use algebra::{Algebra, AnalyticFn};
pub use grassmann::{GrassmannContext, GrassmannElement, GrassmannError, Parity};
pub use grid::{DerivativeMode, Field, FieldError, LightConeGrid};
pub use jet::Jet;
pub use report::ResidualReport;
