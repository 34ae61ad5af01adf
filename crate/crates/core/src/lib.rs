//! Numerical core for verifying first- and second-order necessary optimality
//! conditions of elliptic control problems whose leading coefficient depends
//! on the control.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the `*64` aliases
//! below fix the double-precision instantiation used by the command line tool.

pub mod catalog;
pub mod error;
pub mod fem;
pub mod homogenization;
pub mod mesh;
pub mod optimality;
pub mod problem;
pub mod relaxation;
pub mod scalar;
pub mod semilinear;
pub mod sparse;
pub mod tensor;

pub use error::{Error, Result};
pub use catalog::{Instance, ProblemSpec};
pub use fem::{ElementMatrixField, LinearSystem, StateField};
pub use homogenization::{Laminate, RationalDirection};
pub use mesh::Mesh;
pub use optimality::OptimalityContext;
pub use problem::{ControlField, DirectionField, Problem};
pub use scalar::Scalar;
pub use tensor::{Mat, SpdMatrix, TensorError, UnitVector, Vector};

pub type Mat64 = Mat<f64>;
pub type SpdMatrix64 = SpdMatrix<f64>;
pub type Vector64 = Vector<f64>;
pub type UnitVector64 = UnitVector<f64>;
pub type Mesh64 = Mesh<f64>;
pub type StateField64 = StateField<f64>;
pub type Problem64 = Problem<f64>;
pub type DirectionField64 = DirectionField<f64>;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
