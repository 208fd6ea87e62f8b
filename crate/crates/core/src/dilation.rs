//! The quotients `q_r = p / p_r` and the growth of `‖q_r‖²_α` as `r → 1⁻`.
//!
//! Raw coefficients of `1/p_r` grow geometrically (for `1 - 2zw` they are
//! `(2r²)^m`), so the norm is accumulated in the rescaled basis
//! `b_{k,l} = a_{k,l} √(k! l! / s!)`, `s = k + l`, in which
//! `‖f‖²_α = Σ_s (2+s)^α/(1+s) Σ_k |b_{k,s-k}|²` and every coefficient of
//! `q_r` stays bounded. Shells are produced one at a time and only the last
//! `deg p + 1` of them are kept.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::Serialize;

use crate::dalpha::AlphaWeight;
use crate::error::{Error, Result};
use crate::poly2::{reciprocal, Monomial, Poly2, TruncatedSeries2, C64};

/// Order cap of the dense [`quotient_series`].
pub const DENSE_ORDER_CAP: u32 = 4096;
/// Default order cap of the streaming [`dilation_norm`].
pub const STREAM_ORDER_CAP: u32 = 1 << 15;
pub const DEFAULT_TOL: f64 = 1e-10;

/// `p / p_r` truncated at total degree `order`.
///
/// Trusts that `p_r` has no zeros on the closed ball; see
/// [`quotient_series_checked`].
pub fn quotient_series(p: &Poly2, r: f64, order: u32) -> Result<TruncatedSeries2> {
    check_r(r)?;
    if p.constant_term().norm() == 0.0 {
        return Err(Error::ZeroConstantTerm);
    }
    if order > DENSE_ORDER_CAP {
        return Err(Error::TruncationFailure {
            order,
            cap: DENSE_ORDER_CAP,
        });
    }
    if r == 1.0 || p.degree() == 0 {
        return Ok(TruncatedSeries2::one(order));
    }
    let g = reciprocal(&p.dilate(r), order)?;
    Ok(g.multiply_poly(p))
}

/// [`quotient_series`] after confirming `min |p|` over the closed ball of
/// radius `r` is at least `tol`.
pub fn quotient_series_checked(p: &Poly2, r: f64, order: u32, tol: f64) -> Result<TruncatedSeries2> {
    check_r(r)?;
    let m = crate::boundary::interior_min(&p.dilate(r), tol);
    if m.min_modulus < tol {
        return Err(Error::InteriorZero {
            radius: r * m.radius,
            min_modulus: m.min_modulus,
        });
    }
    quotient_series(p, r, order)
}

fn check_r(r: f64) -> Result<()> {
    if r > 0.0 && r <= 1.0 {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange(format!("dilation radius {r} not in (0, 1]")))
    }
}

/// `‖q_r‖²_α` together with its truncation certificate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DilationNorm {
    pub norm_sq: f64,
    /// Last shell included.
    pub order_used: u32,
    /// Weighted norm of the last shell.
    pub tail_hint: f64,
    /// `‖2q_r + R q_r‖²_{α-2}`, accumulated with the `α - 2` weights.
    pub shifted_norm_sq: f64,
}

impl DilationNorm {
    pub fn shift_mismatch(&self) -> f64 {
        (self.norm_sq - self.shifted_norm_sq).abs() / self.norm_sq
    }
}

/// One product term `c z^i w^j` of a polynomial, with `i + j = d`.
#[derive(Clone, Copy)]
struct Term {
    i: usize,
    j: usize,
    c: C64,
}

impl Term {
    fn d(&self) -> usize {
        self.i + self.j
    }

    /// `√( k!/(k-i)! · l!/(l-j)! · (s-d)!/s! )`.
    fn factor(&self, k: usize, l: usize) -> f64 {
        let s = k + l;
        let mut num = 1.0;
        for t in 0..self.i {
            num *= (k - t) as f64;
        }
        for t in 0..self.j {
            num *= (l - t) as f64;
        }
        let mut den = 1.0;
        for t in 0..self.d() {
            den *= (s - t) as f64;
        }
        (num / den).sqrt()
    }
}

/// Streams the shells of `p / p_r` in the rescaled basis.
struct ScaledQuotient {
    c0: C64,
    /// Non-constant terms of `p`.
    terms: Vec<Term>,
    r: f64,
    /// Recent shells of `1/p_r`, most recent last.
    g: VecDeque<Vec<C64>>,
    next: usize,
}

impl ScaledQuotient {
    fn new(p: &Poly2, r: f64) -> Self {
        let terms = p
            .terms()
            .filter(|(m, _)| m.degree() > 0)
            .map(|(m, c)| Term {
                i: m.k as usize,
                j: m.l as usize,
                c,
            })
            .collect();
        Self {
            c0: p.constant_term(),
            terms,
            r,
            g: VecDeque::new(),
            next: 0,
        }
    }

    fn depth(&self) -> usize {
        self.terms.iter().map(Term::d).max().unwrap_or(0)
    }

    fn g_at(&self, s: usize, k: usize) -> C64 {
        // shell s sits `next - 1 - s` places from the back
        let back = self.next - 1 - s;
        let shell = &self.g[self.g.len() - 1 - back];
        shell[k]
    }

    /// Next shell of `q_r`.
    fn next_shell(&mut self) -> Vec<C64> {
        let s = self.next;
        let mut gs = vec![C64::new(0.0, 0.0); s + 1];
        if s == 0 {
            gs[0] = 1.0 / self.c0;
        } else {
            for k in 0..=s {
                let l = s - k;
                let mut acc = C64::new(0.0, 0.0);
                for t in &self.terms {
                    let d = t.d();
                    if t.i <= k && t.j <= l && d <= s {
                        let prev = self.g_at_pending(d, k - t.i);
                        acc += t.c * self.r.powi(d as i32) * prev * t.factor(k, l);
                    }
                }
                gs[k] = -acc / self.c0;
            }
        }
        self.g.push_back(gs);
        self.next += 1;
        if self.g.len() > self.depth() + 1 {
            self.g.pop_front();
        }
        let mut qs = vec![C64::new(0.0, 0.0); s + 1];
        for k in 0..=s {
            let l = s - k;
            let mut acc = self.c0 * self.g_at(s, k);
            for t in &self.terms {
                if t.i <= k && t.j <= l {
                    acc += t.c * self.g_at(s - t.d(), k - t.i) * t.factor(k, l);
                }
            }
            qs[k] = acc;
        }
        qs
    }

    /// Shell `s - d` of `1/p_r` while shell `s` is being built.
    fn g_at_pending(&self, d: usize, k: usize) -> C64 {
        self.g[self.g.len() - d][k]
    }
}

/// `‖p/p_r‖²_α`, summing shells until `window` consecutive shells each
/// contribute less than `tol` times the running total.
///
/// `window = max(3, deg p + 1)`: sparse polynomials leave runs of empty
/// shells up to their degree.
pub fn dilation_norm(p: &Poly2, r: f64, aw: &AlphaWeight, tol: f64) -> Result<DilationNorm> {
    dilation_norm_capped(p, r, aw, tol, STREAM_ORDER_CAP)
}

pub fn dilation_norm_capped(
    p: &Poly2,
    r: f64,
    aw: &AlphaWeight,
    tol: f64,
    cap: u32,
) -> Result<DilationNorm> {
    check_r(r)?;
    if p.constant_term().norm() == 0.0 {
        return Err(Error::ZeroConstantTerm);
    }
    let one = 2f64.powf(aw.alpha());
    if r == 1.0 || p.degree() == 0 {
        return Ok(DilationNorm {
            norm_sq: one,
            order_used: 0,
            tail_hint: 0.0,
            shifted_norm_sq: one,
        });
    }
    let shifted = AlphaWeight::new(aw.alpha() - 2.0);
    let window = 3.max(p.degree() as usize + 1);
    let mut stream = ScaledQuotient::new(p, r);
    let (mut acc, mut acc_shift) = (0.0, 0.0);
    let mut quiet = 0;
    for s in 0..=cap as usize {
        let shell = stream.next_shell();
        let mass: f64 = shell.iter().map(|c| c.norm_sqr()).sum();
        let contrib = aw.shell_factor(s) * mass;
        acc += contrib;
        acc_shift += shifted.shell_factor(s) * (2.0 + s as f64).powi(2) * mass;
        if s > 0 && contrib < tol * acc {
            quiet += 1;
        } else {
            quiet = 0;
        }
        if quiet >= window {
            return Ok(DilationNorm {
                norm_sq: acc,
                order_used: s as u32,
                tail_hint: contrib,
                shifted_norm_sq: acc_shift,
            });
        }
    }
    Err(Error::TruncationFailure { order: cap, cap })
}

/// `r_k = 1 - 2^{-k}` for `k = 1..=k_max`.
pub fn default_r_grid(k_max: u32) -> Vec<f64> {
    (1..=k_max).map(|k| 1.0 - 0.5f64.powi(k as i32)).collect()
}

/// Growth exponent `e` in `‖q_r‖² ≈ C (1-r)^{-e}`.
///
/// Taken from the increments `N_{k+1} - N_k` over the upper half of the
/// grid: for `N = B + C (1-r)^{-e}` the constant `B` cancels and the
/// increments scale with the same exponent. Increments that are not all
/// positive, or decay, mean the curve is bounded and give `e = 0`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GrowthFit {
    pub exponent: f64,
    /// RMS residual of the increment regression (0 when bounded).
    pub residual: f64,
    /// Plain least-squares slope of `log N` against `-log(1-r)`.
    pub loglog_slope: f64,
    pub loglog_residual: f64,
    pub points_used: usize,
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let rms = (x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - my - slope * (a - mx)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, rms)
}

impl GrowthFit {
    pub fn fit(r: &[f64], values: &[f64]) -> Self {
        let x: Vec<f64> = r.iter().map(|r| -(1.0 - r).ln()).collect();
        let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        let (loglog_slope, loglog_residual) = if x.len() >= 2 {
            least_squares(&x, &logs)
        } else {
            (0.0, 0.0)
        };
        let mut out = Self {
            exponent: 0.0,
            residual: 0.0,
            loglog_slope,
            loglog_residual,
            points_used: 0,
        };
        if values.len() < 3 {
            return out;
        }
        let inc: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
        let start = inc.len() / 2;
        let (xs, ds) = (&x[start..inc.len()], &inc[start..]);
        out.points_used = ds.len();
        if ds.len() >= 2 && ds.iter().all(|&d| d > 0.0) {
            let ld: Vec<f64> = ds.iter().map(|d| d.ln()).collect();
            let (slope, rms) = least_squares(xs, &ld);
            if slope > 0.0 {
                out.exponent = slope;
                out.residual = rms;
            }
        }
        out
    }
}

/// `‖p/p_r‖²_α` over an `r` grid.
#[derive(Clone, Debug, Serialize)]
pub struct DilationCurve {
    pub alpha: f64,
    pub p: Poly2,
    pub r_grid: Vec<f64>,
    pub norm_sq_values: Vec<f64>,
    pub truncation_orders: Vec<u32>,
    pub tail_hints: Vec<f64>,
    /// `tail_hint < 0.01 · norm_sq` and no truncation failure.
    pub usable: Vec<bool>,
    /// Error message of points whose truncation failed.
    pub failures: Vec<Option<String>>,
    pub fit: GrowthFit,
}

/// One CSV row of a [`DilationCurve`].
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DilationRow {
    pub r: f64,
    pub one_minus_r: f64,
    pub norm_sq: f64,
    pub order: u32,
    pub tail_hint: f64,
}

impl DilationCurve {
    pub fn rows(&self) -> Vec<DilationRow> {
        (0..self.r_grid.len())
            .map(|i| DilationRow {
                r: self.r_grid[i],
                one_minus_r: 1.0 - self.r_grid[i],
                norm_sq: self.norm_sq_values[i],
                order: self.truncation_orders[i],
                tail_hint: self.tail_hints[i],
            })
            .collect()
    }
}

pub fn dilation_sweep(p: &Poly2, aw: &AlphaWeight, r_grid: &[f64]) -> Result<DilationCurve> {
    dilation_sweep_with(p, aw, r_grid, DEFAULT_TOL)
}

pub fn dilation_sweep_with(p: &Poly2, aw: &AlphaWeight, r_grid: &[f64], tol: f64) -> Result<DilationCurve> {
    if p.constant_term().norm() == 0.0 {
        return Err(Error::ZeroConstantTerm);
    }
    let points: Vec<Result<DilationNorm>> =
        r_grid.par_iter().map(|&r| dilation_norm(p, r, aw, tol)).collect();
    let mut curve = DilationCurve {
        alpha: aw.alpha(),
        p: p.clone(),
        r_grid: r_grid.to_vec(),
        norm_sq_values: Vec::new(),
        truncation_orders: Vec::new(),
        tail_hints: Vec::new(),
        usable: Vec::new(),
        failures: Vec::new(),
        fit: GrowthFit::fit(&[], &[]),
    };
    for pt in points {
        match pt {
            Ok(d) => {
                curve.norm_sq_values.push(d.norm_sq);
                curve.truncation_orders.push(d.order_used);
                curve.tail_hints.push(d.tail_hint);
                curve.usable.push(d.tail_hint < 0.01 * d.norm_sq);
                curve.failures.push(None);
            }
            Err(Error::TruncationFailure { order, cap }) => {
                curve.norm_sq_values.push(f64::NAN);
                curve.truncation_orders.push(order);
                curve.tail_hints.push(f64::INFINITY);
                curve.usable.push(false);
                curve
                    .failures
                    .push(Some(Error::TruncationFailure { order, cap }.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    let (rs, vs): (Vec<f64>, Vec<f64>) = curve
        .r_grid
        .iter()
        .zip(&curve.norm_sq_values)
        .zip(&curve.usable)
        .filter(|(_, ok)| **ok)
        .map(|((r, v), _)| (*r, *v))
        .unzip();
    curve.fit = GrowthFit::fit(&rs, &vs);
    Ok(curve)
}

/// Scaled-basis coefficients of `q_r` through `order`, for cross-checks.
pub fn scaled_quotient_shells(p: &Poly2, r: f64, order: u32) -> Vec<Vec<C64>> {
    let mut stream = ScaledQuotient::new(p, r);
    (0..=order).map(|_| stream.next_shell()).collect()
}

/// `√(k! l! / s!)`, the scaling between raw and rescaled coefficients.
pub fn basis_scale(m: Monomial) -> f64 {
    use statrs::function::factorial::ln_factorial;
    (0.5 * (ln_factorial(m.k as u64) + ln_factorial(m.l as u64) - ln_factorial(m.degree() as u64)))
        .exp()
}
