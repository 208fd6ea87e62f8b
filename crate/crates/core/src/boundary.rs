//! Zeros of a polynomial on the closed ball and on the sphere `S₂`.
//!
//! [`classify_zero_set`] decides between an interior zero, no boundary
//! zeros, finitely many, or a curve. Finite versus curve is decided by
//! continuation: from each boundary zero the system
//! `{Re p = 0, Im p = 0, |x|² = 1}` in `R⁴` is traced with a secant
//! predictor and a corrector confined to the hyperplane orthogonal to the
//! step. At a boundary zero of a polynomial that is zero-free in the ball
//! the zero variety is tangent to the sphere, so the Jacobian has rank two
//! and the initial direction is searched over its two-dimensional kernel.

use nalgebra::{Matrix3x4, Matrix4, SymmetricEigen, Vector3, Vector4, SVD};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::poly2::{Poly2, UnitarySpec, C64};
use crate::sampling::{ball_points, sphere_points};
use crate::sphere::SpherePoint;

/// Interior zeros are looked for at radius at most this.
pub const INNER_RADIUS: f64 = 1.0 - 1e-4;
/// `|p|` below this strictly inside [`INNER_RADIUS`] is an interior zero.
pub const INTERIOR_ZERO_TOL: f64 = 1e-8;
/// Newton on the sphere accepts points with `|p|` below this.
pub const ZERO_ACCEPT: f64 = 1e-12;
pub const CLUSTER_RADIUS: f64 = 1e-6;

const MULTISTART: usize = 512;
const BOUNDARY_SAMPLES: usize = 4096;
const BOUNDARY_REFINE: usize = 16;

/// `p` with its two partial derivatives.
#[derive(Clone, Debug)]
struct Evaluator {
    p: Poly2,
    dz: Poly2,
    dw: Poly2,
}

impl Evaluator {
    fn new(p: &Poly2) -> Self {
        Self {
            p: p.clone(),
            dz: p.dz(),
            dw: p.dw(),
        }
    }

    fn value(&self, z: C64, w: C64) -> C64 {
        self.p.evaluate(z, w)
    }

    fn grad(&self, z: C64, w: C64) -> (C64, C64) {
        (self.dz.evaluate(z, w), self.dw.evaluate(z, w))
    }

    fn at4(&self, x: &Vector4<f64>) -> C64 {
        self.value(C64::new(x[0], x[1]), C64::new(x[2], x[3]))
    }

    /// `(Re p, Im p, |x|² - 1)`.
    fn residual(&self, x: &Vector4<f64>) -> Vector3<f64> {
        let v = self.at4(x);
        Vector3::new(v.re, v.im, x.norm_squared() - 1.0)
    }

    fn jacobian(&self, x: &Vector4<f64>) -> Matrix3x4<f64> {
        let (gz, gw) = self.grad(C64::new(x[0], x[1]), C64::new(x[2], x[3]));
        Matrix3x4::new(
            gz.re, -gz.im, gw.re, -gw.im, //
            gz.im, gz.re, gw.im, gw.re, //
            2.0 * x[0], 2.0 * x[1], 2.0 * x[2], 2.0 * x[3],
        )
    }
}

fn to4(z: C64, w: C64) -> Vector4<f64> {
    Vector4::new(z.re, z.im, w.re, w.im)
}

fn point_of(x: &Vector4<f64>) -> SpherePoint {
    SpherePoint::normalized(C64::new(x[0], x[1]), C64::new(x[2], x[3]))
}

/// Minimum of `|p|` over the closed ball and over the ball of radius
/// [`INNER_RADIUS`].
#[derive(Clone, Copy, Debug, Serialize)]
pub struct InteriorMin {
    pub min_modulus: f64,
    pub argmin: [C64; 2],
    pub radius: f64,
    pub inner_min_modulus: f64,
    pub inner_argmin: [C64; 2],
    pub inner_radius: f64,
    pub starts: usize,
}

/// Steepest descent of `|p|²` from `x`, with the Gauss–Newton step length
/// `|p| / ‖∇p‖`, backtracking, and projection onto the ball of radius
/// `cap` (tangential steps once on its boundary).
fn descend(ev: &Evaluator, mut x: [C64; 2], cap: f64, tol: f64) -> (f64, [C64; 2]) {
    let norm = |x: &[C64; 2]| (x[0].norm_sqr() + x[1].norm_sqr()).sqrt();
    let project = |mut y: [C64; 2]| {
        let n = norm(&y);
        if n > cap {
            y[0] *= cap / n;
            y[1] *= cap / n;
        }
        y
    };
    x = project(x);
    let mut f = ev.value(x[0], x[1]).norm();
    let mut scale = 1.0;
    for _ in 0..400 {
        if f < tol {
            break;
        }
        let v = ev.value(x[0], x[1]);
        let (gz, gw) = ev.grad(x[0], x[1]);
        let gn = gz.norm_sqr() + gw.norm_sqr();
        if gn == 0.0 {
            break;
        }
        let mut d = [-v * gz.conj() / gn, -v * gw.conj() / gn];
        let r = norm(&x);
        if r >= cap * (1.0 - 1e-14) {
            let out = (d[0] * x[0].conj() + d[1] * x[1].conj()).re / (r * r);
            if out > 0.0 {
                d[0] -= x[0] * out;
                d[1] -= x[1] * out;
            }
        }
        let mut s = scale;
        let mut moved = false;
        for _ in 0..60 {
            let y = project([x[0] + d[0] * s, x[1] + d[1] * s]);
            let fy = ev.value(y[0], y[1]).norm();
            if fy < f {
                x = y;
                f = fy;
                scale = (2.0 * s).min(1.0);
                moved = true;
                break;
            }
            s *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (f, x)
}

fn minimize(ev: &Evaluator, cap: f64, tol: f64, seed: u64) -> (f64, [C64; 2], usize) {
    let mut starts: Vec<[C64; 2]> = ball_points(MULTISTART, seed)
        .into_iter()
        .map(|x| [C64::new(x[0] * cap, x[1] * cap), C64::new(x[2] * cap, x[3] * cap)])
        .collect();
    let mut shell: Vec<(f64, [C64; 2])> = sphere_points(BOUNDARY_SAMPLES, seed ^ 0x5eed)
        .into_iter()
        .map(|q| {
            let x = [q.zeta * cap, q.eta * cap];
            (ev.value(x[0], x[1]).norm(), x)
        })
        .collect();
    shell.sort_by(|a, b| a.0.total_cmp(&b.0));
    starts.extend(shell.iter().take(BOUNDARY_REFINE).map(|s| s.1));
    let n = starts.len();
    let mut found: Vec<(f64, [C64; 2])> = starts
        .par_iter()
        .map(|&x| descend(ev, x, cap, tol))
        .collect();
    // descent crawls towards tangential boundary minima; finish the best
    // candidates with Newton in sphere angles
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    let polish: Vec<SpherePoint> = found
        .iter()
        .take(BOUNDARY_REFINE)
        .map(|x| x.1)
        .chain(shell.iter().take(BOUNDARY_REFINE).map(|s| s.1))
        .filter(|x| x[0].norm_sqr() + x[1].norm_sqr() > 0.0)
        .map(|x| SpherePoint::normalized(x[0], x[1]))
        .collect();
    let polished: Vec<(f64, [C64; 2])> = polish
        .par_iter()
        .map(|s| {
            let (q, f) = newton_on_shell(ev, s, cap);
            (f, [q.zeta * cap, q.eta * cap])
        })
        .collect();
    let best = found
        .into_iter()
        .chain(polished)
        .chain(shell.first().copied())
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    (best.0, best.1, n)
}

/// Multistart minimization of `|p|` over the closed ball, plus the same
/// over the ball of radius [`INNER_RADIUS`]. Descent stops once `|p| < tol`.
pub fn interior_min(p: &Poly2, tol: f64) -> InteriorMin {
    interior_min_seeded(p, tol, 0)
}

pub fn interior_min_seeded(p: &Poly2, tol: f64, seed: u64) -> InteriorMin {
    let ev = Evaluator::new(p);
    let (m, x, n) = minimize(&ev, 1.0, tol, seed);
    let (mi, xi, _) = minimize(&ev, INNER_RADIUS, tol, seed);
    let r = |x: &[C64; 2]| (x[0].norm_sqr() + x[1].norm_sqr()).sqrt();
    InteriorMin {
        min_modulus: m,
        argmin: x,
        radius: r(&x),
        inner_min_modulus: mi,
        inner_argmin: xi,
        inner_radius: r(&xi),
        starts: n,
    }
}

/// Gauss–Newton on `(Re p, Im p)` in the angles of
/// [`SpherePoint::from_angles`], with minimum-norm steps.
fn newton_on_sphere(ev: &Evaluator, start: &SpherePoint) -> (SpherePoint, f64) {
    newton_on_shell(ev, start, 1.0)
}

/// [`newton_on_sphere`] on the sphere of radius `cap`; `start` and the
/// result are unit points.
fn newton_on_shell(ev: &Evaluator, start: &SpherePoint, cap: f64) -> (SpherePoint, f64) {
    let ev = if cap == 1.0 {
        std::borrow::Cow::Borrowed(ev)
    } else {
        std::borrow::Cow::Owned(Evaluator::new(&ev.p.dilate(cap)))
    };
    let (mut th, mut ph, mut ps) = start.angles();
    let mut pt = *start;
    let mut f = ev.value(pt.zeta, pt.eta).norm();
    for _ in 0..200 {
        if f < 1e-15 {
            break;
        }
        let v = ev.value(pt.zeta, pt.eta);
        let (gz, gw) = ev.grad(pt.zeta, pt.eta);
        let (s, c) = th.sin_cos();
        let d_th = gz * C64::from_polar(-s, ph) + gw * C64::from_polar(c, ps);
        let d_ph = gz * C64::i() * pt.zeta;
        let d_ps = gw * C64::i() * pt.eta;
        let j = nalgebra::Matrix2x3::new(d_th.re, d_ph.re, d_ps.re, d_th.im, d_ph.im, d_ps.im);
        let step = match SVD::new(j, true, true).solve(&nalgebra::Vector2::new(v.re, v.im), 1e-14) {
            Ok(s) => s,
            Err(_) => break,
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let q = SpherePoint::from_angles(th - t * step[0], ph - t * step[1], ps - t * step[2]);
            let fq = ev.value(q.zeta, q.eta).norm();
            if fq < f {
                th -= t * step[0];
                ph -= t * step[1];
                ps -= t * step[2];
                pt = q;
                f = fq;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (pt, f)
}

/// A group of converged Newton points within [`CLUSTER_RADIUS`] of its
/// first member.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ZeroCluster {
    pub point: SpherePoint,
    pub modulus: f64,
    /// Largest distance of a member from `point`.
    pub radius: f64,
    pub members: usize,
}

/// Converged zeros from `n_samples` quasi-random starts, clustered.
pub fn sphere_zero_clusters(p: &Poly2, n_samples: usize, seed: u64) -> Vec<ZeroCluster> {
    let ev = Evaluator::new(p);
    let hits: Vec<(SpherePoint, f64)> = sphere_points(n_samples, seed)
        .par_iter()
        .map(|s| newton_on_sphere(&ev, s))
        .filter(|(_, f)| *f < ZERO_ACCEPT)
        .collect();
    let mut clusters: Vec<ZeroCluster> = Vec::new();
    for (pt, f) in hits {
        match clusters
            .iter_mut()
            .find(|c| c.point.distance(&pt) < CLUSTER_RADIUS)
        {
            Some(c) => {
                c.radius = c.radius.max(c.point.distance(&pt));
                c.members += 1;
            }
            None => clusters.push(ZeroCluster {
                point: pt,
                modulus: f,
                radius: 0.0,
                members: 1,
            }),
        }
    }
    clusters
}

/// Representatives of the zeros of `p` on the sphere found from
/// `n_samples` starts.
pub fn sphere_zeros(p: &Poly2, n_samples: usize) -> Vec<SpherePoint> {
    sphere_zero_clusters(p, n_samples, 0)
        .into_iter()
        .map(|c| c.point)
        .collect()
}

const H0: f64 = 0.01;
const H_MAX: f64 = 0.02;
const H_MIN: f64 = 1e-7;
pub const MIN_CURVE_ARC: f64 = 0.1;

/// Residual tolerance of the corrector at step `h`. Below `h ≈ 3e-7` it
/// tightens with `h²` so that the quadratic growth of `|p|` away from an
/// isolated tangential zero cannot pass as convergence.
fn corrector_tol(h: f64) -> f64 {
    (1e-3 * h * h).min(1e-13)
}

/// Gauss–Newton for `F = 0` inside `{y : t·(y - pred) = 0}`.
fn correct(ev: &Evaluator, pred: &Vector4<f64>, t: &Vector4<f64>, h: f64) -> Option<Vector4<f64>> {
    let tol = corrector_tol(h);
    let mut y = *pred;
    let mut best = f64::INFINITY;
    let mut stalls = 0;
    for _ in 0..100 {
        let f = ev.residual(&y);
        let c = t.dot(&(y - pred));
        if f.norm() < tol && c.abs() < 1e-14 {
            return ((y - pred).norm() < h).then_some(y);
        }
        let g = f.norm() + c.abs();
        if g < 0.9 * best {
            best = g;
            stalls = 0;
        } else {
            stalls += 1;
            if stalls > 6 {
                return None;
            }
        }
        let j = ev.jacobian(&y);
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<3, 4>(0, 0).copy_from(&j);
        m.set_row(3, &t.transpose());
        let rhs = Vector4::new(f[0], f[1], f[2], c);
        let svd = SVD::new(m, true, true);
        let eps = 1e-12 * svd.singular_values.max();
        let step = svd.solve(&rhs, eps).ok()?;
        y -= step;
        if (y - pred).norm() > h {
            return None;
        }
    }
    None
}

/// First step from `x0`: search the kernel plane of the Jacobian for a
/// direction whose corrector converges.
fn first_step(ev: &Evaluator, x0: &Vector4<f64>, h: f64) -> Option<Vector4<f64>> {
    let j = ev.jacobian(x0);
    let eig = SymmetricEigen::new(j.transpose() * j);
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
    let (v1, v2) = (eig.eigenvectors.column(order[0]), eig.eigenvectors.column(order[1]));
    (0..72)
        .filter_map(|k| {
            let b = k as f64 * std::f64::consts::PI / 36.0;
            let d: Vector4<f64> = v1 * b.cos() + v2 * b.sin();
            let pred = x0 + d * h;
            correct(ev, &pred, &d, h).map(|y| ((y - pred).norm(), y))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, y)| y)
}

/// How one continuation ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceOutcome {
    /// Steps were rejected down to the minimum step before reaching the
    /// minimum arc length.
    Collapsed,
    /// Arc length reached [`MIN_CURVE_ARC`].
    Curve,
    /// Neither within the step budget.
    Budget,
}

/// Record of one continuation run.
#[derive(Clone, Debug, Serialize)]
pub struct Trace {
    pub outcome: TraceOutcome,
    pub arc_length: f64,
    pub closed: bool,
    pub steps: usize,
    pub max_modulus: f64,
    #[serde(skip)]
    pub points: Vec<SpherePoint>,
}

fn trace(ev: &Evaluator, start: &SpherePoint, budget: usize) -> Trace {
    let x0 = to4(start.zeta, start.eta);
    let mut h = H0;
    let x1 = loop {
        if let Some(y) = first_step(ev, &x0, h) {
            break y;
        }
        h *= 0.5;
        if h < H_MIN {
            return Trace {
                outcome: TraceOutcome::Collapsed,
                arc_length: 0.0,
                closed: false,
                steps: 0,
                max_modulus: ev.at4(&x0).norm(),
                points: vec![*start],
            };
        }
    };
    let mut pts = vec![x0, x1];
    let mut arc = (x1 - x0).norm();
    let (mut prev, mut cur) = (x0, x1);
    let mut closed = false;
    let mut steps = 1;
    let outcome = loop {
        if steps >= budget {
            break if arc >= MIN_CURVE_ARC {
                TraceOutcome::Curve
            } else {
                TraceOutcome::Budget
            };
        }
        steps += 1;
        let t = (cur - prev).normalize();
        let pred = cur + t * h;
        match correct(ev, &pred, &t, h) {
            Some(y) => {
                arc += (y - cur).norm();
                prev = cur;
                cur = y;
                h = (1.5 * h).min(H_MAX);
                if arc > 4.0 * H_MAX && segment_distance(&x0, &prev, &cur) < 0.5 * h {
                    closed = true;
                    break TraceOutcome::Curve;
                }
                pts.push(cur);
                if arc > 100.0 {
                    break TraceOutcome::Curve;
                }
            }
            None => {
                h *= 0.5;
                if h < H_MIN {
                    break if arc >= MIN_CURVE_ARC {
                        TraceOutcome::Curve
                    } else {
                        TraceOutcome::Collapsed
                    };
                }
            }
        }
    };
    let max_modulus = pts.iter().map(|x| ev.at4(x).norm()).fold(0.0, f64::max);
    Trace {
        outcome,
        arc_length: arc,
        closed,
        steps,
        max_modulus,
        points: pts.iter().map(point_of).collect(),
    }
}

fn segment_distance(x: &Vector4<f64>, a: &Vector4<f64>, b: &Vector4<f64>) -> f64 {
    let ab = b - a;
    let len = ab.norm_squared();
    let t = if len > 0.0 { ((x - a).dot(&ab) / len).clamp(0.0, 1.0) } else { 0.0 };
    (x - (a + ab * t)).norm()
}

/// Distance from `x` to the closed polyline through `pts`.
pub(crate) fn polyline_distance(x: &SpherePoint, pts: &[SpherePoint], closed: bool) -> f64 {
    let xv = to4(x.zeta, x.eta);
    let v: Vec<Vector4<f64>> = pts.iter().map(|p| to4(p.zeta, p.eta)).collect();
    if v.len() == 1 {
        return (xv - v[0]).norm();
    }
    let mut best = f64::INFINITY;
    for w in v.windows(2) {
        best = best.min(segment_distance(&xv, &w[0], &w[1]));
    }
    if closed {
        best = best.min(segment_distance(&xv, &v[v.len() - 1], &v[0]));
    }
    best
}

/// Class of `Z(p)` relative to the closed ball.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroSetClass {
    Empty,
    Finite,
    Curve,
    InteriorZero,
}

impl ZeroSetClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            ZeroSetClass::Empty => "empty",
            ZeroSetClass::Finite => "finite",
            ZeroSetClass::Curve => "curve",
            ZeroSetClass::InteriorZero => "interior_zero",
        }
    }
}

/// A point strictly inside the ball where `|p|` is below
/// [`INTERIOR_ZERO_TOL`].
#[derive(Clone, Copy, Debug, Serialize)]
pub struct InteriorWitness {
    pub z: C64,
    pub w: C64,
    pub modulus: f64,
    pub radius: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ZeroSetDiagnostics {
    pub seed: u64,
    pub starts: usize,
    pub clusters: usize,
    pub cluster_radii: Vec<f64>,
    /// Smallest distance between cluster representatives.
    pub min_separation: f64,
    pub interior_min: f64,
    pub inner_min: f64,
    pub arc_length: f64,
    pub max_modulus_on_curve: f64,
    pub traces: Vec<Trace>,
}

/// Classification of `Z(p) ∩ S₂` with the evidence behind it.
#[derive(Clone, Debug, Serialize)]
pub struct ZeroSetReport {
    pub class: ZeroSetClass,
    /// Cluster representatives (finite) or samples along the traced curve.
    pub points: Vec<SpherePoint>,
    /// Whether the curve samples close up.
    pub closed: bool,
    pub interior_witness: Option<InteriorWitness>,
    pub diagnostics: ZeroSetDiagnostics,
}

/// A CSV row of sphere points.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SampleRow {
    pub theta: f64,
    pub phi: f64,
    pub psi: f64,
    pub re_zeta: f64,
    pub im_zeta: f64,
    pub re_eta: f64,
    pub im_eta: f64,
}

impl ZeroSetReport {
    pub fn sample_rows(&self) -> Vec<SampleRow> {
        self.points
            .iter()
            .map(|p| {
                let (theta, phi, psi) = p.angles();
                SampleRow {
                    theta,
                    phi,
                    psi,
                    re_zeta: p.zeta.re,
                    im_zeta: p.zeta.im,
                    re_eta: p.eta.re,
                    im_eta: p.eta.im,
                }
            })
            .collect()
    }
}

/// Tuning of [`classify_zero_set_with`].
#[derive(Clone, Copy, Debug)]
pub struct ClassifyOptions {
    pub seed: u64,
    /// Newton starts on the sphere.
    pub n_samples: usize,
    /// Continuation steps per trace.
    pub step_budget: usize,
    /// Clusters not explained by earlier traces that are traced.
    pub max_traces: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            n_samples: 1024,
            step_budget: 20_000,
            max_traces: 64,
        }
    }
}

pub fn classify_zero_set(p: &Poly2) -> Result<ZeroSetReport> {
    classify_zero_set_with(p, &ClassifyOptions::default())
}

pub fn classify_zero_set_with(p: &Poly2, opts: &ClassifyOptions) -> Result<ZeroSetReport> {
    let im = interior_min_seeded(p, 1e-14, opts.seed);
    let mut diag = ZeroSetDiagnostics {
        seed: opts.seed,
        starts: opts.n_samples,
        clusters: 0,
        cluster_radii: Vec::new(),
        min_separation: f64::INFINITY,
        interior_min: im.min_modulus,
        inner_min: im.inner_min_modulus,
        arc_length: 0.0,
        max_modulus_on_curve: 0.0,
        traces: Vec::new(),
    };
    if im.inner_min_modulus < INTERIOR_ZERO_TOL {
        return Ok(ZeroSetReport {
            class: ZeroSetClass::InteriorZero,
            points: Vec::new(),
            closed: false,
            interior_witness: Some(InteriorWitness {
                z: im.inner_argmin[0],
                w: im.inner_argmin[1],
                modulus: im.inner_min_modulus,
                radius: im.inner_radius,
            }),
            diagnostics: diag,
        });
    }
    let clusters = sphere_zero_clusters(p, opts.n_samples, opts.seed);
    diag.clusters = clusters.len();
    diag.cluster_radii = clusters.iter().map(|c| c.radius).collect();
    for (i, a) in clusters.iter().enumerate() {
        for b in &clusters[i + 1..] {
            diag.min_separation = diag.min_separation.min(a.point.distance(&b.point));
        }
    }
    if clusters.is_empty() {
        return Ok(ZeroSetReport {
            class: ZeroSetClass::Empty,
            points: Vec::new(),
            closed: false,
            interior_witness: None,
            diagnostics: diag,
        });
    }

    let ev = Evaluator::new(p);
    let mut curve: Option<Trace> = None;
    let mut pending: Vec<&ZeroCluster> = clusters.iter().collect();
    let mut inconclusive = false;
    while let Some(c) = pending.first().copied() {
        if diag.traces.len() >= opts.max_traces {
            inconclusive = true;
            break;
        }
        let t = trace(&ev, &c.point, opts.step_budget);
        pending.remove(0);
        match t.outcome {
            TraceOutcome::Curve => {
                pending.retain(|o| polyline_distance(&o.point, &t.points, t.closed) > 1e-3);
                if curve.as_ref().is_none_or(|b| t.arc_length > b.arc_length) {
                    curve = Some(t.clone());
                }
            }
            TraceOutcome::Budget => inconclusive = true,
            TraceOutcome::Collapsed => {}
        }
        diag.traces.push(t);
    }

    if let Some(t) = curve {
        diag.arc_length = t.arc_length;
        diag.max_modulus_on_curve = t.max_modulus;
        return Ok(ZeroSetReport {
            class: ZeroSetClass::Curve,
            closed: t.closed,
            points: t.points,
            interior_witness: None,
            diagnostics: diag,
        });
    }
    if inconclusive {
        return Err(Error::Inconclusive(format!(
            "continuation from {} boundary zero clusters neither collapsed nor advanced",
            clusters.len()
        )));
    }
    Ok(ZeroSetReport {
        class: ZeroSetClass::Finite,
        points: clusters.iter().map(|c| c.point).collect(),
        closed: false,
        interior_witness: None,
        diagnostics: diag,
    })
}

/// Local expansion `h(z) = 1 + γ z² + o(z²)` of the branch through a
/// boundary zero, after rotating it to `(0, 1)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BranchFit {
    pub base_point: SpherePoint,
    pub rotation: UnitarySpec,
    pub gamma: C64,
    /// Coefficient of `z` in `h`.
    pub first_order: C64,
    /// `|γ(ε) - γ(2ε)|`, the disagreement between the two circles.
    pub residual: f64,
}

const BRANCH_EPS: f64 = 1e-3;
const BRANCH_ANGLES: usize = 16;

/// Root `w` of `q(z, ·)` by Newton from `w0`.
fn branch_root(q: &Poly2, dq: &Poly2, z: C64, mut w: C64) -> Option<C64> {
    for _ in 0..60 {
        let v = q.evaluate(z, w);
        let d = dq.evaluate(z, w);
        if d.norm() == 0.0 {
            return None;
        }
        let step = v / d;
        w -= step;
        if step.norm() < 1e-16 * (1.0 + w.norm()) {
            return Some(w);
        }
    }
    (q.evaluate(z, w).norm() < 1e-13).then_some(w)
}

struct Branch {
    rotation: UnitarySpec,
    q: Poly2,
    dq: Poly2,
}

impl Branch {
    fn new(p: &Poly2, at: &SpherePoint) -> Result<Self> {
        let rotation = UnitarySpec::with_second_row(at.zeta, at.eta)?;
        let q = p.compose_unitary(&rotation);
        let scale: f64 = q.terms().map(|(_, c)| c.norm()).sum::<f64>().max(1.0);
        let v = q.evaluate(C64::new(0.0, 0.0), C64::new(1.0, 0.0));
        if v.norm() > 1e-8 * scale {
            return Err(Error::ParameterOutOfRange(format!(
                "base point is not a zero: |p| = {:.3e}",
                v.norm()
            )));
        }
        let dq = q.dw();
        let derivative = dq.evaluate(C64::new(0.0, 0.0), C64::new(1.0, 0.0));
        if derivative.norm() < 1e-8 * scale {
            return Err(Error::MultipleBranch {
                derivative: derivative.norm(),
            });
        }
        Ok(Self { rotation, q, dq })
    }

    /// `h(z) = 1 / w(z)` with `w(0) = 1`.
    fn h(&self, z: C64, guess: C64) -> Result<(C64, C64)> {
        let w = branch_root(&self.q, &self.dq, z, guess).ok_or(Error::FitResidualTooLarge {
            residual: f64::INFINITY,
        })?;
        Ok((1.0 / w, w))
    }

    /// Fourier coefficients of `h - 1` at orders 1 and 2 on `|z| = rho`.
    fn circle_coeffs(&self, rho: f64) -> Result<(C64, C64)> {
        let mut c1 = C64::new(0.0, 0.0);
        let mut c2 = C64::new(0.0, 0.0);
        for j in 0..BRANCH_ANGLES {
            let e = C64::from_polar(1.0, std::f64::consts::TAU * j as f64 / BRANCH_ANGLES as f64);
            let (h, _) = self.h(e * rho, C64::new(1.0, 0.0))?;
            c1 += (h - 1.0) * e.conj();
            c2 += (h - 1.0) * e.conj() * e.conj();
        }
        let n = BRANCH_ANGLES as f64;
        Ok((c1 / (n * rho), c2 / (n * rho * rho)))
    }
}

pub fn branch_gamma(p: &Poly2, at: &SpherePoint) -> Result<BranchFit> {
    let b = Branch::new(p, at)?;
    let (a1, g1) = b.circle_coeffs(BRANCH_EPS)?;
    let (_, g2) = b.circle_coeffs(2.0 * BRANCH_EPS)?;
    let residual = (g1 - g2).norm();
    if a1.norm() > 1e-6 {
        return Err(Error::FitResidualTooLarge { residual: a1.norm() });
    }
    if residual > 1e-4 {
        return Err(Error::FitResidualTooLarge { residual });
    }
    Ok(BranchFit {
        base_point: *at,
        rotation: b.rotation,
        gamma: g1,
        first_order: a1,
        residual,
    })
}

/// `E(t) = |h(z)|² (1 - |z|²) - 1` along `z = t · direction/|direction|`.
///
/// `E ≡ 0` means the branch stays on the sphere; `E < 0` means it leaves
/// the closed ball.
pub fn sphere_on_branch_defect(
    p: &Poly2,
    at: &SpherePoint,
    direction: C64,
    radii: &[f64],
) -> Result<Vec<f64>> {
    if direction.norm() == 0.0 {
        return Err(Error::ParameterOutOfRange("zero direction".into()));
    }
    let b = Branch::new(p, at)?;
    let u = direction / direction.norm();
    let mut order: Vec<usize> = (0..radii.len()).collect();
    order.sort_by(|i, j| radii[*i].abs().total_cmp(&radii[*j].abs()));
    let mut out = vec![0.0; radii.len()];
    for sign in [1.0, -1.0] {
        let mut w = C64::new(1.0, 0.0);
        let mut t_prev = 0.0;
        for &i in &order {
            let t = radii[i];
            if (sign > 0.0) != (t >= 0.0) {
                continue;
            }
            // walk from the previous radius in small steps to stay on the branch
            let steps = (((t - t_prev).abs() / 0.01).ceil() as usize).max(1);
            for k in 1..=steps {
                let s = t_prev + (t - t_prev) * k as f64 / steps as f64;
                w = b.h(u * s, w)?.1;
            }
            t_prev = t;
            out[i] = (1.0 - t * t) / w.norm_sqr() - 1.0;
        }
    }
    Ok(out)
}

/// Fit of `|p| ≥ C · dist(·, Z(p) ∩ S₂)^q` on sphere samples.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LojasiewiczFit {
    pub exponent: f64,
    pub constant: f64,
    /// RMS residual of the envelope regression in log space.
    pub residual: f64,
    pub samples: usize,
    pub bins_used: usize,
}

pub const LOJASIEWICZ_SAMPLES: usize = 100_000;
const LOJ_BINS: usize = 50;
const LOJ_MIN_BIN: usize = 20;

/// Lower-envelope fit of `log |p|` against `log dist` over quasi-random
/// sphere samples: the minimum per logarithmic distance bin is regressed.
pub fn lojasiewicz_fit(p: &Poly2, zeros: &ZeroSetReport) -> Result<LojasiewiczFit> {
    lojasiewicz_fit_with(p, zeros, LOJASIEWICZ_SAMPLES, zeros.diagnostics.seed)
}

pub fn lojasiewicz_fit_with(
    p: &Poly2,
    zeros: &ZeroSetReport,
    n_samples: usize,
    seed: u64,
) -> Result<LojasiewiczFit> {
    let samples = sphere_points(n_samples, seed ^ 0x10_a5);
    let ev = Evaluator::new(p);
    match zeros.class {
        ZeroSetClass::Empty => {
            let m = samples
                .par_iter()
                .map(|s| ev.value(s.zeta, s.eta).norm())
                .reduce(|| f64::INFINITY, f64::min);
            return Err(Error::DegenerateFit {
                min_modulus: m.min(zeros.diagnostics.interior_min),
            });
        }
        ZeroSetClass::InteriorZero => {
            return Err(Error::ParameterOutOfRange(
                "the inequality needs a polynomial without interior zeros".into(),
            ))
        }
        _ => {}
    }
    let closed = zeros.closed;
    let finite = zeros.class == ZeroSetClass::Finite;
    let pairs: Vec<(f64, f64)> = samples
        .par_iter()
        .map(|s| {
            let d = if finite {
                zeros.points.iter().map(|z| z.distance(s)).fold(f64::INFINITY, f64::min)
            } else {
                polyline_distance(s, &zeros.points, closed)
            };
            (d, ev.value(s.zeta, s.eta).norm())
        })
        .filter(|(d, v)| *d > 0.0 && *v > 0.0)
        .collect();
    if pairs.is_empty() {
        return Err(Error::DegenerateFit { min_modulus: 0.0 });
    }
    let lo = pairs.iter().map(|x| x.0.ln()).fold(f64::INFINITY, f64::min);
    let hi = pairs.iter().map(|x| x.0.ln()).fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / LOJ_BINS as f64;
    let mut bins: Vec<(usize, f64, f64)> = vec![(0, 0.0, f64::INFINITY); LOJ_BINS];
    for &(d, v) in &pairs {
        let ld = d.ln();
        let b = (((ld - lo) / width) as usize).min(LOJ_BINS - 1);
        let e = &mut bins[b];
        e.0 += 1;
        if v.ln() < e.2 {
            e.1 = ld;
            e.2 = v.ln();
        }
    }
    let env: Vec<(f64, f64)> = bins
        .iter()
        .filter(|b| b.0 >= LOJ_MIN_BIN)
        .map(|b| (b.1, b.2))
        .collect();
    if env.len() < 2 {
        return Err(Error::DegenerateFit {
            min_modulus: pairs.iter().map(|x| x.1).fold(f64::INFINITY, f64::min),
        });
    }
    let n = env.len() as f64;
    let mx = env.iter().map(|e| e.0).sum::<f64>() / n;
    let my = env.iter().map(|e| e.1).sum::<f64>() / n;
    let sxx: f64 = env.iter().map(|e| (e.0 - mx).powi(2)).sum();
    let sxy: f64 = env.iter().map(|e| (e.0 - mx) * (e.1 - my)).sum();
    let q = sxy / sxx;
    let residual = (env
        .iter()
        .map(|e| (e.1 - my - q * (e.0 - mx)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let constant = pairs
        .iter()
        .map(|&(d, v)| v / d.powf(q))
        .fold(f64::INFINITY, f64::min);
    Ok(LojasiewiczFit {
        exponent: q,
        constant,
        residual,
        samples: pairs.len(),
        bins_used: env.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn one_minus_z() -> Poly2 {
        &Poly2::constant(1.0) - &Poly2::z()
    }

    fn one_minus_2zw() -> Poly2 {
        &Poly2::constant(1.0) - &Poly2::monomial(1, 1, 2.0)
    }

    #[test]
    fn interior_min_examples() {
        let m = interior_min(&one_minus_z(), 1e-14);
        assert!(m.min_modulus < 1e-8);
        assert!((m.argmin[0] - c(1.0)).norm() < 1e-4);
        assert!(m.inner_min_modulus > 0.9e-4);

        let m = interior_min(&(&Poly2::constant(2.0) - &Poly2::z()), 1e-14);
        assert!((m.min_modulus - 1.0).abs() < 1e-8, "{}", m.min_modulus);
        assert!((m.argmin[0] - c(1.0)).norm() < 1e-4);

        let m = interior_min(&Poly2::z(), 1e-14);
        assert!(m.inner_min_modulus < 1e-12 && m.inner_radius < 1.0);
    }

    #[test]
    fn sphere_zero_examples() {
        let z = sphere_zeros(&one_minus_z(), 256);
        assert_eq!(z.len(), 1);
        assert!((z[0].zeta - c(1.0)).norm() < 1e-6);

        let z = sphere_zeros(&one_minus_2zw(), 256);
        assert!(z.len() > 100);
        for p in &z {
            assert!((p.zeta.norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
            assert!((p.zeta * p.eta - c(0.5)).norm() < 1e-10);
        }

        let one_minus_zw = &Poly2::constant(1.0) - &Poly2::monomial(1, 1, 1.0);
        assert!(sphere_zeros(&one_minus_zw, 256).is_empty());
    }

    #[test]
    fn cluster_counts_follow_dimension() {
        let count = |p: &Poly2, n| sphere_zero_clusters(p, n, 3).len();
        let fin = &one_minus_z() * &(&Poly2::constant(1.0) - &Poly2::w());
        assert_eq!(count(&one_minus_z(), 128), count(&one_minus_z(), 512));
        assert_eq!(count(&fin, 128), 2);
        assert_eq!(count(&fin, 512), 2);
        let (a, b) = (count(&one_minus_2zw(), 128), count(&one_minus_2zw(), 512));
        assert!(b as f64 > 3.0 * a as f64, "{a} {b}");
    }

    #[test]
    fn classification_examples() {
        let r = classify_zero_set(&(&Poly2::constant(2.0) - &Poly2::z())).unwrap();
        assert_eq!(r.class, ZeroSetClass::Empty);

        let r = classify_zero_set(&one_minus_z()).unwrap();
        assert_eq!(r.class, ZeroSetClass::Finite);
        assert_eq!(r.points.len(), 1);

        let r = classify_zero_set(&one_minus_2zw()).unwrap();
        assert_eq!(r.class, ZeroSetClass::Curve);
        assert!(r.diagnostics.arc_length >= MIN_CURVE_ARC);
        assert!(r.diagnostics.max_modulus_on_curve < 1e-8);
        assert!(r.closed);
        assert!((r.diagnostics.arc_length - std::f64::consts::TAU).abs() < 0.01);

        let r = classify_zero_set(&Poly2::z()).unwrap();
        assert_eq!(r.class, ZeroSetClass::InteriorZero);
        assert!(r.interior_witness.unwrap().modulus < 1e-8);
    }

    #[test]
    fn branch_coefficients() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let at = SpherePoint::new(c(s), c(s)).unwrap();
        let fit = branch_gamma(&one_minus_2zw(), &at).unwrap();
        assert!((fit.gamma - c(-0.5)).norm() < 1e-6, "{}", fit.gamma);
        assert!(fit.rotation.unitarity_defect() < 1e-12);
        let (a, b) = fit.rotation.apply_row(c(0.0), c(1.0));
        assert!((a - at.zeta).norm() < 1e-12 && (b - at.eta).norm() < 1e-12);

        let fit = branch_gamma(&one_minus_z(), &SpherePoint::new(c(1.0), c(0.0)).unwrap()).unwrap();
        assert!(fit.gamma.norm() < 1e-6);

        let double = one_minus_z().pow(2);
        let err = branch_gamma(&double, &SpherePoint::new(c(1.0), c(0.0)).unwrap());
        assert!(matches!(err, Err(Error::MultipleBranch { .. })));
    }

    #[test]
    fn defect_examples() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let at = SpherePoint::new(c(s), c(s)).unwrap();
        let radii = [0.05, 0.1, 0.2, 0.4, -0.3];
        let e = sphere_on_branch_defect(&one_minus_2zw(), &at, C64::i(), &radii).unwrap();
        assert!(e.iter().all(|v| v.abs() < 1e-10), "{e:?}");
        let e = sphere_on_branch_defect(&one_minus_2zw(), &at, c(1.0), &radii).unwrap();
        for (t, v) in radii.iter().zip(&e) {
            let want = (1.0 - t * t) / (1.0 + t * t) - 1.0;
            assert!((v - want).abs() < 1e-12);
        }
        let one = SpherePoint::new(c(1.0), c(0.0)).unwrap();
        let e = sphere_on_branch_defect(&one_minus_z(), &one, c(1.0), &radii).unwrap();
        for (t, v) in radii.iter().zip(&e) {
            assert!((v + t * t).abs() < 1e-14);
        }
    }

    #[test]
    fn lojasiewicz_of_empty_set_is_degenerate() {
        let p = &Poly2::constant(2.0) - &Poly2::z();
        let r = classify_zero_set(&p).unwrap();
        match lojasiewicz_fit_with(&p, &r, 20_000, 0) {
            Err(Error::DegenerateFit { min_modulus }) => assert!((min_modulus - 1.0).abs() < 1e-6),
            other => panic!("{other:?}"),
        }
    }
}
