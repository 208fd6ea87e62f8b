//! Points of the unit sphere `S₂ = {|ζ|² + |η|² = 1}` in `C²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly2::C64;

/// Sphere points must satisfy `||ζ|² + |η|² - 1| < SPHERE_TOL`.
pub const SPHERE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    pub zeta: C64,
    pub eta: C64,
    pub residual: f64,
}

impl SpherePoint {
    pub fn new(zeta: C64, eta: C64) -> Result<Self> {
        let residual = (zeta.norm_sqr() + eta.norm_sqr() - 1.0).abs();
        if residual >= SPHERE_TOL {
            return Err(Error::ParameterOutOfRange(format!(
                "point is off the unit sphere by {residual:.3e}"
            )));
        }
        Ok(Self { zeta, eta, residual })
    }

    /// Radial projection of a nonzero point onto the sphere.
    pub fn normalized(zeta: C64, eta: C64) -> Self {
        let n = (zeta.norm_sqr() + eta.norm_sqr()).sqrt();
        let (zeta, eta) = (zeta / n, eta / n);
        Self {
            zeta,
            eta,
            residual: (zeta.norm_sqr() + eta.norm_sqr() - 1.0).abs(),
        }
    }

    /// `(cos θ e^{iφ}, sin θ e^{iψ})`.
    pub fn from_angles(theta: f64, phi: f64, psi: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::normalized(C64::from_polar(c, phi), C64::from_polar(s, psi))
    }

    /// Inverse of [`SpherePoint::from_angles`], with `θ ∈ [0, π/2]`.
    pub fn angles(&self) -> (f64, f64, f64) {
        (
            self.eta.norm().atan2(self.zeta.norm()),
            self.zeta.arg(),
            self.eta.arg(),
        )
    }

    pub fn from_real4(x: [f64; 4]) -> Self {
        Self::normalized(C64::new(x[0], x[1]), C64::new(x[2], x[3]))
    }

    pub fn to_real4(&self) -> [f64; 4] {
        [self.zeta.re, self.zeta.im, self.eta.re, self.eta.im]
    }

    /// Hermitian product `⟨x, y⟩ = ζ₁ conj(ζ₂) + η₁ conj(η₂)`.
    pub fn inner(&self, other: &SpherePoint) -> C64 {
        self.zeta * other.zeta.conj() + self.eta * other.eta.conj()
    }

    /// Euclidean distance in `C² = R⁴`.
    pub fn distance(&self, other: &SpherePoint) -> f64 {
        ((self.zeta - other.zeta).norm_sqr() + (self.eta - other.eta).norm_sqr()).sqrt()
    }

    /// `ω(θ) = (e^{iθ}/√2, e^{-iθ}/√2)`, the zero curve of `1 - 2zw`.
    pub fn model_curve(theta: f64) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::normalized(C64::from_polar(s, theta), C64::from_polar(s, -theta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles_round_trip() {
        let p = SpherePoint::from_angles(0.4, -1.2, 2.5);
        let (t, a, b) = p.angles();
        let q = SpherePoint::from_angles(t, a, b);
        assert!(p.distance(&q) < 1e-14);
        assert!(p.residual < 1e-15);
    }

    #[test]
    fn rejects_points_off_sphere() {
        assert!(SpherePoint::new(C64::new(0.5, 0.0), C64::new(0.0, 0.0)).is_err());
        assert!(SpherePoint::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0)).is_ok());
    }
}
