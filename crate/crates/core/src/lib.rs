//! Desk-scale numerics for density Ramsey problems in the plane.
//!
//! Sets and test functions live on square grids ([`planar_fields`]). On top of
//! that sit the Gaussian kernel family ([`kernels`]), convex curves and their
//! arclength measures ([`convex_curves`]), Gowers norms ([`gowers`]), truncated
//! density estimators ([`density`]), counting forms ([`counting`]), singular
//! Brascamp-Lieb forms ([`sbl`]) and VC dimension of curve-translate families
//! ([`vc_family`]).
//!
//! Asymptotic quantities (sup over `M`, limsup over `R`) are never computed;
//! every estimator takes its truncation explicitly.

pub mod convex_curves;
pub mod counting;
pub mod density;
pub mod error;
pub mod exec;
pub mod fft;
pub mod geom;
pub mod gowers;
pub mod kernels;
pub mod planar_fields;
pub mod sbl;
pub mod vc_family;

pub use error::{Error, Result};
pub use geom::P2;
