//! Quadrature of the integral seminorm on the ball and of the one-disk
//! Forelli–Rudin model integral.
//!
//! Points of the ball are written `z = √s e^{iφ}`, `w = √t e^{iψ}`, and the
//! simplex `{s, t ≥ 0, s + t < 1}` is mapped to the unit square by
//! `s = u v`, `t = u (1 - v)`. Area measure is normalized to total mass 1,
//! which makes `dA = 2 ds dt` times the average over both phases.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::poly2::{CoefficientSource, Monomial, Poly2, C64};

/// Gauss rule on `[0, 1]` for the weight `(1-u)^a u^b`, `a, b > -1`.
///
/// Golub–Welsch on the shifted Jacobi recurrence. Nodes are ascending.
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0 && a > -1.0 && b > -1.0);
    let ab = a + b;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let k = i as f64;
        let diag = if i == 0 {
            (b - a) / (ab + 2.0)
        } else {
            (b * b - a * a) / ((2.0 * k + ab) * (2.0 * k + ab + 2.0))
        };
        jac[(i, i)] = 0.5 * (1.0 + diag);
        if i + 1 < n {
            let m = k + 1.0;
            let beta = if i == 0 {
                4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                4.0 * m * (m + a) * (m + b) * (m + ab)
                    / ((2.0 * m + ab).powi(2) * (2.0 * m + ab + 1.0) * (2.0 * m + ab - 1.0))
            };
            jac[(i, i + 1)] = 0.5 * beta.sqrt();
            jac[(i + 1, i)] = jac[(i, i + 1)];
        }
    }
    let mu0 = (ln_gamma(a + 1.0) + ln_gamma(b + 1.0) - ln_gamma(ab + 2.0)).exp();
    let eig = SymmetricEigen::new(jac);
    let mut rule: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    rule.sort_by(|x, y| x.0.total_cmp(&y.0));
    rule.into_iter().unzip()
}

/// Gauss–Legendre on `[lo, hi]`.
pub fn gauss_legendre(n: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_jacobi(n, 0.0, 0.0);
    let h = hi - lo;
    (x.iter().map(|u| lo + h * u).collect(), w.iter().map(|v| h * v).collect())
}

/// Fixed-order pairwise sum.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Node counts of a tensor rule on the ball.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct QuadratureGrid {
    /// Gauss–Jacobi nodes in `u = s + t`.
    pub n_radial: usize,
    /// Gauss–Legendre nodes in `v = s / (s + t)`.
    pub n_split: usize,
    /// Trapezoid nodes in each of the two phases.
    pub n_phase: usize,
}

/// Simplex part of a [`QuadratureGrid`] at a fixed `α`: nodes `(s, t)` and
/// weights that already contain `2 (1-s-t)^{-α}` and the Jacobian.
#[derive(Clone, Debug)]
pub struct SimplexRule {
    pub nodes: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

impl QuadratureGrid {
    /// Grid that integrates the seminorm of a degree-`degree` polynomial
    /// exactly up to rounding.
    pub fn for_degree(degree: u32) -> Self {
        let d = degree as usize;
        Self {
            n_radial: d / 2 + 2,
            n_split: d / 2 + 2,
            n_phase: 2 * d + 1,
        }
    }

    pub fn refined(&self) -> Self {
        Self {
            n_radial: 2 * self.n_radial,
            n_split: 2 * self.n_split,
            n_phase: 2 * self.n_phase,
        }
    }

    pub fn node_count(&self) -> usize {
        self.n_radial * self.n_split * self.n_phase * self.n_phase
    }

    pub fn simplex_rule(&self, alpha: f64) -> Result<SimplexRule> {
        check_alpha(alpha)?;
        let (us, uw) = gauss_jacobi(self.n_radial, -alpha, 1.0);
        let (vs, vw) = gauss_legendre(self.n_split, 0.0, 1.0);
        let mut nodes = Vec::with_capacity(us.len() * vs.len());
        let mut weights = Vec::with_capacity(nodes.capacity());
        for (u, a) in us.iter().zip(&uw) {
            for (v, b) in vs.iter().zip(&vw) {
                nodes.push((u * v, u * (1.0 - v)));
                weights.push(2.0 * a * b);
            }
        }
        Ok(SimplexRule { nodes, weights })
    }
}

/// `∫ (1-|z|²-|w|²)^{-α} dA`, the total mass of every [`SimplexRule`].
pub fn weighted_ball_measure(alpha: f64) -> f64 {
    2.0 / ((1.0 - alpha) * (2.0 - alpha))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > -1.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::AlphaOutOfRange {
            alpha,
            range: "(-1, 1)",
        })
    }
}

fn collect_poly(f: &dyn CoefficientSource) -> Poly2 {
    let mut terms = Vec::new();
    f.for_each_term(&mut |k, l, c| terms.push((Monomial::new(k, l), c)));
    Poly2::from_terms(terms)
}

fn expanded(z: C64, w: C64, gz: C64, gw: C64) -> f64 {
    let rest = 1.0 - z.norm_sqr() - w.norm_sqr();
    (gz.norm_sqr() + gw.norm_sqr()) * rest + (z.conj() * gw - w.conj() * gz).norm_sqr()
}

/// `‖∇f‖² - |Rf|²` at an interior point, in the expanded form
/// `‖∇f‖² (1-|z|²-|w|²) + |z̄ ∂_w f - w̄ ∂_z f|²`.
pub fn integrand(f: &dyn CoefficientSource, z: C64, w: C64) -> Result<f64> {
    let radius_sq = z.norm_sqr() + w.norm_sqr();
    if radius_sq >= 1.0 {
        return Err(Error::OutsideBall { radius_sq });
    }
    let p = collect_poly(f);
    Ok(expanded(z, w, p.dz().evaluate(z, w), p.dw().evaluate(z, w)))
}

/// `‖∇f‖² - |Rf|²` evaluated literally.
pub fn integrand_direct(f: &dyn CoefficientSource, z: C64, w: C64) -> f64 {
    let p = collect_poly(f);
    let (gz, gw) = (p.dz().evaluate(z, w), p.dw().evaluate(z, w));
    gz.norm_sqr() + gw.norm_sqr() - (z * gz + w * gw).norm_sqr()
}

/// Quadrature value with the difference to the refined grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeminormEstimate {
    pub value: f64,
    pub error: f64,
}

fn seminorm_on(p: &Poly2, alpha: f64, grid: &QuadratureGrid) -> Result<f64> {
    let rule = grid.simplex_rule(alpha)?;
    let (dz, dw) = (p.dz(), p.dw());
    let m = grid.n_phase;
    let phases: Vec<C64> = (0..m)
        .map(|j| C64::from_polar(1.0, std::f64::consts::TAU * j as f64 / m as f64))
        .collect();
    let parts: Vec<f64> = rule
        .nodes
        .par_iter()
        .zip(rule.weights.par_iter())
        .map(|(&(s, t), &wt)| {
            let (rs, rt) = (s.sqrt(), t.sqrt());
            let mut acc = Vec::with_capacity(m * m);
            for ep in &phases {
                for eq in &phases {
                    let (z, w) = (ep * rs, eq * rt);
                    acc.push(expanded(z, w, dz.evaluate(z, w), dw.evaluate(z, w)));
                }
            }
            wt * pairwise_sum(&acc) / (m * m) as f64
        })
        .collect();
    Ok(pairwise_sum(&parts))
}

/// `∫ (‖∇f‖² - |Rf|²)(1-|z|²-|w|²)^{-α} dA` for `α ∈ (-1, 1)`.
///
/// The error estimate is the change when every node count is doubled.
pub fn seminorm(
    f: &dyn CoefficientSource,
    alpha: f64,
    grid: &QuadratureGrid,
) -> Result<SeminormEstimate> {
    check_alpha(alpha)?;
    let p = collect_poly(f);
    let value = seminorm_on(&p, alpha, grid)?;
    let fine = seminorm_on(&p, alpha, &grid.refined())?;
    Ok(SeminormEstimate {
        value,
        error: (fine - value).abs(),
    })
}

/// The seminorm on `grid` alone, without the refinement estimate.
pub fn seminorm_value(f: &dyn CoefficientSource, alpha: f64, grid: &QuadratureGrid) -> Result<f64> {
    seminorm_on(&collect_poly(f), alpha, grid)
}

/// One row of a grid-convergence table.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConvergenceRow {
    pub grid_size: usize,
    pub value: f64,
    pub error_estimate: f64,
}

/// Seminorm on `levels` successively doubled grids starting at `grid`.
pub fn convergence_table(
    f: &dyn CoefficientSource,
    alpha: f64,
    grid: &QuadratureGrid,
    levels: usize,
) -> Result<Vec<ConvergenceRow>> {
    let p = collect_poly(f);
    let mut g = *grid;
    let mut value = seminorm_on(&p, alpha, &g)?;
    let mut rows = Vec::with_capacity(levels);
    for _ in 0..levels {
        let next = g.refined();
        let fine = seminorm_on(&p, alpha, &next)?;
        rows.push(ConvergenceRow {
            grid_size: g.node_count(),
            value,
            error_estimate: (fine - value).abs(),
        });
        g = next;
        value = fine;
    }
    Ok(rows)
}

const DEFAULT_PANEL_NODES: usize = 16;

/// `(1-|z|²)^b ∫_𝔻 (1-|w|)^a / |1-z̄w|^{2+a+b} dA(w)` for each `|z|` in
/// `radii`, normalized area measure.
pub fn forelli_rudin_ratio(a: f64, b: f64, radii: &[f64]) -> Result<Vec<f64>> {
    forelli_rudin_ratio_with(a, b, radii, DEFAULT_PANEL_NODES)
}

/// [`forelli_rudin_ratio`] with `nodes` Gauss points per mesh panel.
pub fn forelli_rudin_ratio_with(a: f64, b: f64, radii: &[f64], nodes: usize) -> Result<Vec<f64>> {
    if !(a > -1.0) {
        return Err(Error::ParameterOutOfRange(format!("a = {a} must exceed -1")));
    }
    if !(b > 0.0) {
        return Err(Error::ParameterOutOfRange(format!("b = {b} must be positive")));
    }
    if let Some(r) = radii.iter().find(|r| !(**r >= 0.0 && **r < 1.0)) {
        return Err(Error::ParameterOutOfRange(format!("radius {r} not in [0, 1)")));
    }
    if nodes == 0 {
        return Err(Error::ParameterOutOfRange("zero nodes per panel".into()));
    }
    Ok(radii
        .par_iter()
        .map(|&x| forelli_rudin_one(a, b, x, nodes))
        .collect())
}

/// Panels on `[0, 1]` refined geometrically towards 1 down to `scale`.
fn radial_panels(scale: f64) -> Vec<(f64, f64)> {
    let floor = (scale * 1e-3).max(1e-14);
    let mut panels = Vec::new();
    let mut lo = 0.0;
    let mut gap = 0.5;
    while gap > floor {
        panels.push((lo, 1.0 - gap));
        lo = 1.0 - gap;
        gap *= 0.5;
    }
    panels.push((lo, 1.0));
    panels
}

/// Panels on `[0, π]` refined geometrically towards 0 down to `scale`.
fn angular_panels(scale: f64) -> Vec<(f64, f64)> {
    let floor = (scale * 1e-2).max(1e-14);
    let mut edges = vec![std::f64::consts::PI];
    let mut x = std::f64::consts::PI / 2.0;
    while x > floor {
        edges.push(x);
        x *= 0.5;
    }
    edges.push(0.0);
    edges.reverse();
    edges.windows(2).map(|e| (e[0], e[1])).collect()
}

fn forelli_rudin_one(a: f64, b: f64, x: f64, nodes: usize) -> f64 {
    let gap = (1.0 - x).max(1e-12);
    let power = 1.0 + 0.5 * (a + b);
    let rpanels = radial_panels(gap);
    let apanels = angular_panels(gap);

    let mut thetas = Vec::new();
    for &(lo, hi) in &apanels {
        let (t, w) = gauss_legendre(nodes, lo, hi);
        thetas.extend(t.into_iter().zip(w));
    }
    let angular = |rho: f64| -> f64 {
        // |1 - x ρ e^{iθ}|² with the cancellation near θ = 0 kept explicit
        let parts: Vec<f64> = thetas
            .iter()
            .map(|&(th, wt)| {
                let half = (0.5 * th).sin();
                let d = (1.0 - x * rho).powi(2) + 4.0 * x * rho * half * half;
                wt * d.powf(-power)
            })
            .collect();
        // symmetric in θ, normalized by 2π
        pairwise_sum(&parts) / std::f64::consts::PI
    };

    let mut parts = Vec::new();
    let last = rpanels.len() - 1;
    for (i, &(lo, hi)) in rpanels.iter().enumerate() {
        if i == last {
            // (1-ρ)^a is singular at ρ = 1 for a < 0; absorb it in the rule
            let h = hi - lo;
            let (us, uw) = gauss_jacobi(nodes, a, 0.0);
            for (u, wt) in us.iter().zip(&uw) {
                let rho = lo + h * u;
                parts.push(h.powf(a + 1.0) * wt * 2.0 * rho * angular(rho));
            }
        } else {
            let (rs, rw) = gauss_legendre(nodes, lo, hi);
            for (rho, wt) in rs.iter().zip(&rw) {
                parts.push(wt * (1.0 - rho).powf(a) * 2.0 * rho * angular(*rho));
            }
        }
    }
    pairwise_sum(&parts) * (1.0 - x * x).powf(b)
}
