//! Dirichlet-type spaces on the unit ball of `C²`.
//!
//! This crate computes the coefficient norms of `D_α(B₂)` and the numerical
//! evidence around cyclicity of polynomials in those spaces:
//!
//! * [`poly2`]: exact and truncated bivariate series arithmetic,
//! * [`dalpha`]: the weighted coefficient norms,
//! * [`ballquad`]: quadrature of the integral seminorm on the ball,
//! * [`opa`]: optimal polynomial approximants of `1/p`,
//! * [`dilation`]: norms of `p/p_r` under radial dilation,
//! * [`boundary`]: zero sets of `p` on the sphere,
//! * [`capacity`]: discrete Riesz energies on sphere subsets,
//! * [`verdict`]: the cyclicity decision table.

pub mod ballquad;
pub mod boundary;
pub mod capacity;
pub mod dalpha;
pub mod dilation;
pub mod error;
pub mod opa;
pub mod parse;
pub mod poly2;
pub mod report;
mod sampling;
pub mod sphere;
pub mod verdict;

pub use dalpha::AlphaWeight;
pub use error::{Error, Result};
pub use poly2::{Monomial, Poly2, TruncatedSeries2, UnitarySpec, C64};
pub use sphere::SpherePoint;
