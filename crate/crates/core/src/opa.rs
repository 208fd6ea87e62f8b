//! Optimal polynomial approximants: `dist²_α(1, p·P_n) = min_q ‖qp - 1‖²_α`
//! over polynomials `q` of total degree at most `n`.
//!
//! The weighted coefficient matrix is factored once with Householder QR.
//! Because its columns are ordered by degree, every leading block of
//! columns spans `p·P_n` for some `n`, so a single factorization at `n_max`
//! yields the whole distance curve.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::dalpha::AlphaWeight;
use crate::error::{Error, Result};
use crate::poly2::{triangular_len, Monomial, Poly2, C64};

/// Condition estimates above this flag a solve as ill-conditioned.
pub const ILL_CONDITIONED: f64 = 1e12;

/// Weighted least-squares system `min ‖A x - b‖`.
///
/// Column `i` holds the `ω_α^{1/2}`-scaled coefficients of `m_i·p` where
/// `m_i` runs over [`Monomial::up_to_degree`]; row `j` corresponds to the
/// monomial of dense index `j`.
#[derive(Clone, Debug)]
pub struct LeastSquaresSystem {
    pub basis: Vec<Monomial>,
    pub a: DMatrix<C64>,
    pub b: DVector<C64>,
}

pub fn build_system(p: &Poly2, n: u32, aw: &AlphaWeight) -> Result<LeastSquaresSystem> {
    if p.is_zero() {
        return Err(Error::ParameterOutOfRange("zero polynomial".into()));
    }
    let basis: Vec<Monomial> = Monomial::up_to_degree(n).collect();
    let rows = triangular_len((n + p.degree()) as usize);
    let mut a = DMatrix::<C64>::zeros(rows, basis.len());
    for (i, m) in basis.iter().enumerate() {
        for (t, c) in p.terms() {
            let img = Monomial::new(m.k + t.k, m.l + t.l);
            a[(img.dense_index(), i)] = c * aw.weight(img.k, img.l).sqrt();
        }
    }
    let mut b = DVector::<C64>::zeros(rows);
    b[0] = C64::new(aw.weight(0, 0).sqrt(), 0.0);
    Ok(LeastSquaresSystem { basis, a, b })
}

/// Householder QR of a column-equilibrated system, kept column-major.
struct Factored {
    /// Upper triangle of `R` (column `j` holds rows `0..=j`).
    r: Vec<Vec<C64>>,
    /// `Qᴴ b`.
    qtb: Vec<C64>,
    /// Column scaling: the solution of the original system is `scale ⊙ y`.
    scale: Vec<f64>,
}

fn factor(sys: &LeastSquaresSystem) -> Factored {
    let (m, ncols) = sys.a.shape();
    let mut cols: Vec<Vec<C64>> = (0..ncols)
        .map(|j| sys.a.column(j).iter().copied().collect())
        .collect();
    let scale: Vec<f64> = cols
        .iter_mut()
        .map(|c| {
            let norm = c.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            let s = if norm > 0.0 { 1.0 / norm } else { 1.0 };
            c.iter_mut().for_each(|x| *x *= s);
            s
        })
        .collect();
    let mut qtb: Vec<C64> = sys.b.iter().copied().collect();
    let mut r = Vec::with_capacity(ncols);

    for j in 0..ncols.min(m) {
        let (head, tail) = cols.split_at_mut(j + 1);
        let x = &mut head[j];
        let norm = x[j..].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let diag;
        if norm == 0.0 {
            diag = C64::new(0.0, 0.0);
        } else {
            let phase = if x[j].norm() > 0.0 { x[j] / x[j].norm() } else { C64::new(1.0, 0.0) };
            diag = -phase * norm;
            x[j] -= diag;
            let vnorm = x[j..].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            x[j..].iter_mut().for_each(|v| *v /= vnorm);
            let v = &x[j..];
            let reflect = |y: &mut [C64]| {
                let dot: C64 = v.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum();
                let f = dot * 2.0;
                y.iter_mut().zip(v).for_each(|(yi, vi)| *yi -= f * vi);
            };
            tail.par_iter_mut().for_each(|c| reflect(&mut c[j..]));
            reflect(&mut qtb[j..]);
        }
        let mut col: Vec<C64> = x[..j].to_vec();
        col.push(diag);
        r.push(col);
    }
    for j in m..ncols {
        r.push(cols[j][..m].to_vec());
    }
    Factored { r, qtb, scale }
}

impl Factored {
    /// Back-substitution on the leading `n × n` block.
    fn solve(&self, n: usize) -> Vec<C64> {
        let mut y = self.qtb[..n].to_vec();
        for i in (0..n).rev() {
            let mut acc = y[i];
            for j in i + 1..n {
                acc -= self.r[j][i] * y[j];
            }
            y[i] = acc / self.r[i][i];
        }
        y.iter().zip(&self.scale).map(|(v, s)| v * *s).collect()
    }

    /// `‖R_n‖₁ ‖R_n⁻¹‖₁` for every leading block, from one triangular
    /// inverse (the inverse of a leading block is the leading block of the
    /// inverse).
    fn prefix_conditions(&self) -> Vec<f64> {
        let n = self.r.len();
        let mut inv: Vec<Vec<C64>> = Vec::with_capacity(n);
        for j in 0..n {
            let mut col = vec![C64::new(0.0, 0.0); j + 1];
            col[j] = 1.0 / self.r[j][j];
            for i in (0..j).rev() {
                let mut acc = C64::new(0.0, 0.0);
                for k in i + 1..=j {
                    acc += self.r[k][i] * col[k];
                }
                col[i] = -acc / self.r[i][i];
            }
            inv.push(col);
        }
        let mut out = Vec::with_capacity(n);
        let (mut rn, mut invn) = (0.0f64, 0.0f64);
        for j in 0..n {
            rn = rn.max(self.r[j].iter().map(|v| v.norm()).sum());
            invn = invn.max(inv[j].iter().map(|v| v.norm()).sum());
            out.push(rn * invn);
        }
        out
    }

    fn tail_sq(&self, n: usize) -> f64 {
        self.qtb[n..].iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Result of one approximant solve.
#[derive(Clone, Debug, Serialize)]
pub struct OpaSolution {
    pub q: Poly2,
    /// `‖qp - 1‖²_α` evaluated directly on the coefficients of `qp - 1`.
    pub dist_sq: f64,
    /// `κ₁` of the equilibrated triangular factor.
    pub condition: f64,
    pub ill_conditioned: bool,
    /// `max_i |⟨qp - 1, m_i p⟩_α| / ‖p‖²_α`.
    pub orthogonality_residual: f64,
}

fn assemble(basis: &[Monomial], x: &[C64]) -> Poly2 {
    Poly2::from_terms(basis.iter().copied().zip(x.iter().copied()))
}

fn orthogonality(sys: &LeastSquaresSystem, x: &[C64], p: &Poly2, aw: &AlphaWeight) -> f64 {
    let xv = DVector::from_column_slice(&x[..sys.a.ncols()]);
    let resid = &sys.a * xv - &sys.b;
    let g = sys.a.adjoint() * resid;
    g.iter().map(|v| v.norm()).fold(0.0, f64::max) / aw.norm_sq(p)
}

fn finish(p: &Poly2, aw: &AlphaWeight, sys: &LeastSquaresSystem, x: Vec<C64>, condition: f64) -> OpaSolution {
    let q = assemble(&sys.basis, &x);
    let dist_sq = aw.norm_sq(&(&(&q * p) - &Poly2::constant(1.0)));
    OpaSolution {
        orthogonality_residual: orthogonality(sys, &x, p, aw),
        q,
        dist_sq,
        condition,
        ill_conditioned: !(condition <= ILL_CONDITIONED),
    }
}

/// Optimal approximant of degree `n` by QR.
pub fn solve_opa(p: &Poly2, n: u32, aw: &AlphaWeight) -> Result<OpaSolution> {
    let sys = build_system(p, n, aw)?;
    let fac = factor(&sys);
    let k = sys.basis.len();
    let condition = *fac.prefix_conditions().last().unwrap();
    let x = fac.solve(k);
    Ok(finish(p, aw, &sys, x, condition))
}

/// Optimal approximant of degree `n` from the normal equations.
///
/// Squares the condition number; kept as an independent cross-check of
/// [`solve_opa`].
pub fn solve_opa_cholesky(p: &Poly2, n: u32, aw: &AlphaWeight) -> Result<OpaSolution> {
    let sys = build_system(p, n, aw)?;
    let gram = sys.a.adjoint() * &sys.a;
    let rhs = sys.a.adjoint() * &sys.b;
    let chol = nalgebra::Cholesky::new(gram)
        .ok_or_else(|| Error::ParameterOutOfRange("Gram matrix not positive definite".into()))?;
    let x = chol.solve(&rhs);
    // (max L_ii / min L_ii)², a lower bound for the Gram condition number
    let diag: Vec<f64> = chol.l_dirty().diagonal().iter().map(|v| v.norm()).collect();
    let diag_ratio = (diag.iter().cloned().fold(0.0, f64::max)
        / diag.iter().cloned().fold(f64::INFINITY, f64::min))
    .powi(2);
    Ok(finish(p, aw, &sys, x.iter().copied().collect(), diag_ratio))
}

/// Trend of a distance curve. The thresholds are report metadata.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    /// `dist²(n_max) < ½ dist²(max(1, n_max/8))`.
    Decaying,
    /// Relative change below 10% from `n_max/2` to `n_max`.
    Plateau,
    Undetermined,
}

impl Trend {
    pub fn classify(dist_sq: &[f64]) -> Self {
        let n_max = dist_sq.len().saturating_sub(1);
        if n_max == 0 {
            return Trend::Undetermined;
        }
        let last = dist_sq[n_max];
        if last < 0.5 * dist_sq[(n_max / 8).max(1)] {
            return Trend::Decaying;
        }
        let mid = dist_sq[n_max / 2];
        if mid > 0.0 && ((mid - last) / mid).abs() < 0.1 {
            return Trend::Plateau;
        }
        Trend::Undetermined
    }
}

/// Distances `dist²(n)` for `n = 0..=n_max`.
#[derive(Clone, Debug, Serialize)]
pub struct OpaCurve {
    pub alpha: f64,
    pub p: Poly2,
    pub degrees: Vec<u32>,
    pub dist_sq: Vec<f64>,
    pub condition: Vec<f64>,
    pub q_best: Poly2,
    pub trend: Trend,
    /// Some solve exceeded [`ILL_CONDITIONED`].
    pub ill_conditioned: bool,
}

/// One CSV row of an [`OpaCurve`].
#[derive(Clone, Copy, Debug, Serialize)]
pub struct OpaRow {
    pub n: u32,
    pub dist_sq: f64,
    pub condition: f64,
}

impl OpaCurve {
    pub fn rows(&self) -> Vec<OpaRow> {
        self.degrees
            .iter()
            .zip(&self.dist_sq)
            .zip(&self.condition)
            .map(|((&n, &dist_sq), &condition)| OpaRow { n, dist_sq, condition })
            .collect()
    }
}

pub fn opa_curve(p: &Poly2, aw: &AlphaWeight, n_max: u32) -> Result<OpaCurve> {
    let sys = build_system(p, n_max, aw)?;
    let fac = factor(&sys);
    let conds = fac.prefix_conditions();
    let norm_one = aw.weight(0, 0);
    let mut dist_sq = Vec::with_capacity(n_max as usize + 1);
    let mut condition = Vec::with_capacity(n_max as usize + 1);
    let mut prev = norm_one;
    for n in 0..=n_max {
        let cols = triangular_len(n as usize);
        // clamp the rounding-level noise so the curve stays monotone
        let d = fac.tail_sq(cols).clamp(0.0, prev);
        dist_sq.push(d);
        condition.push(conds[cols - 1]);
        prev = d;
    }
    let best = finish(p, aw, &sys, fac.solve(sys.basis.len()), *conds.last().unwrap());
    Ok(OpaCurve {
        alpha: aw.alpha(),
        p: p.clone(),
        degrees: (0..=n_max).collect(),
        trend: Trend::classify(&dist_sq),
        ill_conditioned: condition.iter().any(|c| !(*c <= ILL_CONDITIONED)),
        dist_sq,
        condition,
        q_best: best.q,
    })
}
