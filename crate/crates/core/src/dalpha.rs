//! Coefficient-side norms of the Dirichlet-type spaces `D_α(B₂)`.
//!
//! For `f = Σ a_{k,l} z^k w^l`,
//!
//! ```text
//! ‖f‖²_α = Σ ω_α(k,l) |a_{k,l}|²,   ω_α(k,l) = (2+k+l)^α · k! l! / (1+k+l)!
//! ```
//!
//! Monomials are mutually orthogonal, so inner products pair equal
//! exponents only. `α = 0` is the Hardy space, `α = -1` Bergman, `α = 1`
//! Drury–Arveson and `α = 2` the Dirichlet space.

use statrs::function::factorial::ln_factorial;

use crate::poly2::{shell_offset, triangular_len, CoefficientSource, C64};

const DEFAULT_TABLE_DEGREE: u32 = 64;

/// `ln ω_α(k, l)`.
pub fn ln_weight(alpha: f64, k: u32, l: u32) -> f64 {
    let s = (k + l) as u64;
    alpha * (2.0 + s as f64).ln() + (ln_factorial(k as u64) + ln_factorial(l as u64))
        - ln_factorial(s + 1)
}

/// `α` together with a memoized table of `ω_α(k, l)` for `k + l <= degree`.
///
/// The table is filled at construction and read-only afterwards; weights
/// beyond it are computed on demand.
#[derive(Clone, Debug)]
pub struct AlphaWeight {
    alpha: f64,
    degree: u32,
    table: Vec<f64>,
}

impl AlphaWeight {
    pub fn new(alpha: f64) -> Self {
        Self::with_degree(alpha, DEFAULT_TABLE_DEGREE)
    }

    pub fn with_degree(alpha: f64, degree: u32) -> Self {
        let mut table = Vec::with_capacity(triangular_len(degree as usize));
        for s in 0..=degree {
            for k in 0..=s {
                table.push(ln_weight(alpha, k, s - k).exp());
            }
        }
        Self {
            alpha,
            degree,
            table,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `ω_α(k, l)`.
    pub fn weight(&self, k: u32, l: u32) -> f64 {
        if k + l <= self.degree {
            self.table[shell_offset((k + l) as usize) + k as usize]
        } else {
            ln_weight(self.alpha, k, l).exp()
        }
    }

    /// `(2+s)^α / (1+s)`: the weight of shell `s` in the basis
    /// `√(s!/(k! l!)) z^k w^l`, which is the same for every `k`.
    pub fn shell_factor(&self, s: usize) -> f64 {
        (2.0 + s as f64).powf(self.alpha) / (1.0 + s as f64)
    }

    pub fn norm_sq(&self, f: &dyn CoefficientSource) -> f64 {
        let mut acc = 0.0;
        f.for_each_term(&mut |k, l, c| acc += self.weight(k, l) * c.norm_sqr());
        acc
    }

    /// Norm together with the source's truncation hint.
    pub fn norm_sq_with_tail(&self, f: &dyn CoefficientSource) -> NormEstimate {
        NormEstimate {
            value: self.norm_sq(f),
            tail_hint: f.tail_hint(),
        }
    }

    /// `⟨f, g⟩_α = Σ ω_α(k,l) a_{k,l} conj(b_{k,l})`.
    pub fn inner(&self, f: &dyn CoefficientSource, g: &dyn CoefficientSource) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        f.for_each_term(&mut |k, l, c| acc += c * g.coeff(k, l).conj() * self.weight(k, l));
        acc
    }
}

/// A norm value with the truncation hint of the series it came from.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct NormEstimate {
    pub value: f64,
    pub tail_hint: f64,
}

/// Free-function form of [`AlphaWeight::norm_sq`].
pub fn norm_sq(f: &dyn CoefficientSource, aw: &AlphaWeight) -> f64 {
    aw.norm_sq(f)
}

/// Free-function form of [`AlphaWeight::inner`].
pub fn inner(f: &dyn CoefficientSource, g: &dyn CoefficientSource, aw: &AlphaWeight) -> C64 {
    aw.inner(f, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly2::{Monomial, Poly2};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn weights_match_direct_evaluation() {
        assert!(rel(AlphaWeight::new(0.0).weight(0, 0), 1.0) < 1e-15);
        assert!(rel(AlphaWeight::new(0.0).weight(1, 1), 1.0 / 6.0) < 1e-13);
        assert!(rel(AlphaWeight::new(2.0).weight(1, 1), 16.0 / 6.0) < 1e-13);
        // 5^1.5 * 2! 1! / 4!
        assert!(rel(AlphaWeight::new(1.5).weight(2, 1), 5f64.powf(1.5) * 2.0 / 24.0) < 1e-13);
    }

    #[test]
    fn table_and_on_demand_weights_agree() {
        let aw = AlphaWeight::with_degree(0.7, 10);
        let wide = AlphaWeight::with_degree(0.7, 40);
        for m in Monomial::up_to_degree(30) {
            assert!(rel(aw.weight(m.k, m.l), wide.weight(m.k, m.l)) < 1e-15);
        }
    }

    #[test]
    fn weight_invariants() {
        for alpha in [-1.0, 0.0, 0.5, 1.5, 3.0] {
            let aw = AlphaWeight::new(alpha);
            assert!(rel(aw.weight(0, 0), 2f64.powf(alpha)) < 1e-15);
            for m in Monomial::up_to_degree(80) {
                let w = aw.weight(m.k, m.l);
                assert!(w > 0.0);
                assert_eq!(w, aw.weight(m.l, m.k));
            }
        }
    }

    #[test]
    fn large_degree_weights_stay_finite() {
        let aw = AlphaWeight::new(2.0);
        let w = aw.weight(300, 300);
        assert!(w > 0.0 && w.is_finite());
    }

    #[test]
    fn norm_examples() {
        let one = Poly2::constant(1.0);
        for alpha in [-1.0, 0.0, 2.5] {
            assert!(rel(AlphaWeight::new(alpha).norm_sq(&one), 2f64.powf(alpha)) < 1e-15);
            let z = Poly2::z();
            assert!(rel(AlphaWeight::new(alpha).norm_sq(&z), 3f64.powf(alpha) / 2.0) < 1e-14);
        }
        let p = Poly2::from_terms([
            (Monomial::new(0, 0), C64::new(1.0, 0.0)),
            (Monomial::new(1, 1), C64::new(-2.0, 0.0)),
        ]);
        assert!(rel(AlphaWeight::new(0.0).norm_sq(&p), 5.0 / 3.0) < 1e-14);
    }

    #[test]
    fn inner_examples() {
        let aw = AlphaWeight::new(0.3);
        assert_eq!(aw.inner(&Poly2::z(), &Poly2::w()), C64::new(0.0, 0.0));
        let one = Poly2::constant(1.0);
        let one_minus_z = &one - &Poly2::z();
        let v = AlphaWeight::new(0.0).inner(&one, &one_minus_z);
        assert!((v - C64::new(1.0, 0.0)).norm() < 1e-15);
        let f = Poly2::from_terms([
            (Monomial::new(2, 1), C64::new(0.3, -1.0)),
            (Monomial::new(0, 0), C64::new(2.0, 0.5)),
        ]);
        assert!((aw.inner(&f, &f).re - aw.norm_sq(&f)).abs() < 1e-14);
    }
}
