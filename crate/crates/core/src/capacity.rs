//! Discrete Riesz energies on subsets of the sphere.
//!
//! The kernel is applied to `|1 - ⟨x, y⟩|`, the square of the anisotropic
//! distance. Energies exclude the diagonal, so a measure on `n` atoms has
//! finite energy for every `α`. Whether the capacity of a continuum is
//! positive is read off from how minimal energies behave as `n` doubles.

use rayon::prelude::*;
use serde::Serialize;

use crate::ballquad::pairwise_sum;
use crate::error::{Error, Result};
use crate::sphere::SpherePoint;

/// Support points closer than this count as duplicates.
pub const DUPLICATE_TOL: f64 = 1e-12;
const MAX_ITERS: usize = 10_000;
const GRADIENT_TOL: f64 = 1e-9;

/// `|1 - ⟨x, y⟩|^{1/2}`.
pub fn aniso_dist(x: &SpherePoint, y: &SpherePoint) -> f64 {
    gap(x, y).sqrt()
}

/// `|1 - ⟨x, y⟩|`, with the real part taken as `|x - y|²/2` to avoid
/// cancellation between nearby points.
fn gap(x: &SpherePoint, y: &SpherePoint) -> f64 {
    let re = 0.5 * ((x.zeta - y.zeta).norm_sqr() + (x.eta - y.eta).norm_sqr());
    re.hypot(x.inner(y).im)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(Error::AlphaOutOfRange {
            alpha,
            range: "(0, 2]",
        })
    }
}

/// `t^{α-2}` for `α ∈ (0, 2)` and `log(e/t)` for `α = 2`.
pub fn kernel(alpha: f64, t: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(t > 0.0) {
        return Err(Error::NonpositiveArgument(t));
    }
    Ok(kernel_unchecked(alpha, t))
}

fn kernel_unchecked(alpha: f64, t: f64) -> f64 {
    if alpha == 2.0 {
        1.0 - t.ln()
    } else {
        t.powf(alpha - 2.0)
    }
}

/// Probability measure on finitely many sphere points.
#[derive(Clone, Debug, Serialize)]
pub struct DiscreteMeasure {
    pub support: Vec<SpherePoint>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(support: Vec<SpherePoint>, weights: Vec<f64>) -> Result<Self> {
        if support.len() != weights.len() || support.is_empty() {
            return Err(Error::ParameterOutOfRange(format!(
                "{} support points with {} weights",
                support.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
            return Err(Error::ParameterOutOfRange(format!("negative weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::ParameterOutOfRange(format!("weights sum to {total}")));
        }
        Ok(Self { support, weights })
    }

    pub fn uniform(support: Vec<SpherePoint>) -> Result<Self> {
        let n = support.len();
        Self::new(support, vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Shannon entropy `-Σ w log w`.
    pub fn entropy(&self) -> f64 {
        -self
            .weights
            .iter()
            .filter(|w| **w > 0.0)
            .map(|w| w * w.ln())
            .sum::<f64>()
    }
}

fn check_distinct(support: &[SpherePoint]) -> Result<()> {
    let dup = (0..support.len()).into_par_iter().find_map_first(|i| {
        (i + 1..support.len())
            .find(|&j| support[i].distance(&support[j]) < DUPLICATE_TOL)
            .map(|j| (i, j))
    });
    match dup {
        Some((first, second)) => Err(Error::DuplicateSupportPoints { first, second }),
        None => Ok(()),
    }
}

/// Kernel matrix with zero diagonal, row-major.
fn kernel_matrix(support: &[SpherePoint], alpha: f64) -> Vec<Vec<f64>> {
    support
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            support
                .iter()
                .enumerate()
                .map(|(j, y)| {
                    if i == j {
                        0.0
                    } else {
                        kernel_unchecked(alpha, gap(x, y))
                    }
                })
                .collect()
        })
        .collect()
}

fn quadratic_form(k: &[Vec<f64>], w: &[f64]) -> f64 {
    let rows: Vec<f64> = k
        .par_iter()
        .zip(w.par_iter())
        .map(|(row, wi)| {
            let prod: Vec<f64> = row.iter().zip(w).map(|(a, b)| a * b).collect();
            wi * pairwise_sum(&prod)
        })
        .collect();
    pairwise_sum(&rows)
}

/// `Σ_{i≠j} w_i w_j K_α(|1 - ⟨x_i, x_j⟩|)`.
pub fn energy(mu: &DiscreteMeasure, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_distinct(&mu.support)?;
    Ok(quadratic_form(&kernel_matrix(&mu.support, alpha), &mu.weights))
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Minimizer of the discrete energy over probability weights on `support`.
///
/// Projected gradient from the uniform measure with step
/// `1 / (2 max_i Σ_j K_ij)`, stopped after 10⁴ iterations or once the
/// projected-gradient step falls below `1e-9`.
pub fn minimize_energy(support: &[SpherePoint], alpha: f64) -> Result<DiscreteMeasure> {
    check_alpha(alpha)?;
    if support.len() < 2 {
        return Err(Error::ParameterOutOfRange(
            "energy minimization needs at least two points".into(),
        ));
    }
    check_distinct(support)?;
    let k = kernel_matrix(support, alpha);
    let n = support.len();
    let max_row = k.iter().map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max);
    let step = 1.0 / (2.0 * max_row);
    let mut w = vec![1.0 / n as f64; n];
    for _ in 0..MAX_ITERS {
        let grad: Vec<f64> = k
            .par_iter()
            .map(|row| 2.0 * row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let trial: Vec<f64> = w.iter().zip(&grad).map(|(x, g)| x - step * g).collect();
        let next = project_simplex(&trial);
        let moved = next
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / step;
        w = next;
        if moved < GRADIENT_TOL {
            break;
        }
    }
    // renormalize away the rounding left by the projection
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    DiscreteMeasure::new(support.to_vec(), w)
}

/// Where support points of a capacity scan come from.
#[derive(Clone, Debug)]
pub enum SupportSet {
    /// `ω(θ) = (e^{iθ}/√2, e^{-iθ}/√2)`, sampled at `θ = 2πj/n`.
    ModelCurve,
    /// Samples of a closed curve, resampled equispaced in arc length.
    Curve(Vec<SpherePoint>),
    /// A finite set, used as is for every `n`.
    Points(Vec<SpherePoint>),
}

impl SupportSet {
    pub fn sample(&self, n: usize) -> Vec<SpherePoint> {
        match self {
            SupportSet::ModelCurve => (0..n)
                .map(|j| SpherePoint::model_curve(std::f64::consts::TAU * j as f64 / n as f64))
                .collect(),
            SupportSet::Curve(pts) => resample_closed(pts, n),
            SupportSet::Points(pts) => pts.clone(),
        }
    }
}

fn resample_closed(pts: &[SpherePoint], n: usize) -> Vec<SpherePoint> {
    if pts.len() < 2 {
        return pts.to_vec();
    }
    let m = pts.len();
    let seg: Vec<f64> = (0..m).map(|i| pts[i].distance(&pts[(i + 1) % m])).collect();
    let total: f64 = seg.iter().sum();
    let mut out = Vec::with_capacity(n);
    let (mut i, mut start) = (0, 0.0);
    for j in 0..n {
        let target = total * j as f64 / n as f64;
        while i < m - 1 && start + seg[i] < target {
            start += seg[i];
            i += 1;
        }
        let t = if seg[i] > 0.0 { (target - start) / seg[i] } else { 0.0 };
        let (a, b) = (&pts[i], &pts[(i + 1) % m]);
        out.push(SpherePoint::normalized(
            a.zeta + (b.zeta - a.zeta) * t,
            a.eta + (b.eta - a.eta) * t,
        ));
    }
    out
}

/// Evidence about `cap_α(E)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityClass {
    /// Minimal energies settle: positive-capacity evidence.
    Convergent,
    /// Minimal energies keep growing: zero-capacity evidence.
    Divergent,
}

/// How the minimal energies grow along the `n` grid.
#[derive(Clone, Debug, Serialize)]
pub struct ScalingFit {
    /// `E_{n'} / E_n` for consecutive grid entries.
    pub ratios: Vec<f64>,
    /// `E_{n'} - E_n` for consecutive grid entries.
    pub increments: Vec<f64>,
    /// Slope of `log E` against `log n` over the last two entries.
    pub power_exponent: f64,
    /// Relative change at the last step.
    pub last_relative_change: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CapacityReport {
    pub alpha: f64,
    pub n_values: Vec<usize>,
    pub energies: Vec<f64>,
    /// Entropies of the minimizing weights.
    pub entropies: Vec<f64>,
    pub class: CapacityClass,
    pub fit: ScalingFit,
    pub caveat: Option<String>,
}

/// One CSV row of a [`CapacityReport`].
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CapacityRow {
    pub n: usize,
    pub energy: f64,
    pub entropy: f64,
}

impl CapacityReport {
    pub fn rows(&self) -> Vec<CapacityRow> {
        (0..self.n_values.len())
            .map(|i| CapacityRow {
                n: self.n_values[i],
                energy: self.energies[i],
                entropy: self.entropies[i],
            })
            .collect()
    }
}

/// Minimal energies on `n` points of `set` for each `n` in `n_grid`.
///
/// The scan is convergent when the relative change between the last two
/// grid entries is below 5%.
pub fn capacity_scan(set: &SupportSet, alpha: f64, n_grid: &[usize]) -> Result<CapacityReport> {
    check_alpha(alpha)?;
    if n_grid.is_empty() {
        return Err(Error::ParameterOutOfRange("empty n grid".into()));
    }
    let mut energies = Vec::with_capacity(n_grid.len());
    let mut entropies = Vec::with_capacity(n_grid.len());
    let mut n_values = Vec::with_capacity(n_grid.len());
    let mut caveat = None;
    for &n in n_grid {
        let support = set.sample(n);
        n_values.push(support.len());
        if support.len() < 2 {
            caveat = Some(
                "single-atom measures have zero discrete energy; the continuum energy of an atom is infinite"
                    .to_string(),
            );
            energies.push(0.0);
            entropies.push(0.0);
            continue;
        }
        let mu = minimize_energy(&support, alpha)?;
        energies.push(energy(&mu, alpha)?);
        entropies.push(mu.entropy());
    }
    let ratios: Vec<f64> = energies.windows(2).map(|e| e[1] / e[0]).collect();
    let increments: Vec<f64> = energies.windows(2).map(|e| e[1] - e[0]).collect();
    let k = energies.len();
    let (power_exponent, last_relative_change) = if k >= 2 {
        let (e0, e1) = (energies[k - 2], energies[k - 1]);
        let (n0, n1) = (n_values[k - 2] as f64, n_values[k - 1] as f64);
        let slope = if n1 != n0 { (e1 / e0).ln() / (n1 / n0).ln() } else { 0.0 };
        (slope, ((e1 - e0) / e0).abs())
    } else {
        (0.0, 0.0)
    };
    let class = if last_relative_change < 0.05 {
        CapacityClass::Convergent
    } else {
        CapacityClass::Divergent
    };
    Ok(CapacityReport {
        alpha,
        n_values,
        energies,
        entropies,
        class,
        fit: ScalingFit {
            ratios,
            increments,
            power_exponent,
            last_relative_change,
        },
        caveat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;

    fn pt(z: f64, w: f64) -> SpherePoint {
        SpherePoint::new(C64::new(z, 0.0), C64::new(w, 0.0)).unwrap()
    }

    #[test]
    fn distance_examples() {
        let x = SpherePoint::from_angles(0.3, 1.0, -2.0);
        assert_eq!(aniso_dist(&x, &x), 0.0);
        assert!((aniso_dist(&pt(1.0, 0.0), &pt(0.0, 1.0)) - 1.0).abs() < 1e-15);
        for (a, b) in [(0.0, 0.5), (1.0, -2.0), (0.3, 3.0)] {
            let d = aniso_dist(&SpherePoint::model_curve(a), &SpherePoint::model_curve(b));
            assert!((d * d - (1.0 - (a - b).cos()).abs()).abs() < 1e-15);
        }
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(kernel(2.0, 1.0).unwrap(), 1.0);
        assert!((kernel(1.0, 0.25).unwrap() - 4.0).abs() < 1e-15);
        assert!((kernel(1.5, 4.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(kernel(1.0, 0.0), Err(Error::NonpositiveArgument(_))));
        assert!(matches!(kernel(2.5, 1.0), Err(Error::AlphaOutOfRange { .. })));
    }

    #[test]
    fn energy_examples() {
        let mu = DiscreteMeasure::uniform(vec![pt(1.0, 0.0), pt(0.0, 1.0)]).unwrap();
        assert!((energy(&mu, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let one = DiscreteMeasure::uniform(vec![pt(1.0, 0.0)]).unwrap();
        assert_eq!(energy(&one, 1.0).unwrap(), 0.0);
        let dup = DiscreteMeasure::uniform(vec![pt(1.0, 0.0), pt(0.0, 1.0), pt(1.0, 0.0)]).unwrap();
        assert!(matches!(
            energy(&dup, 1.0),
            Err(Error::DuplicateSupportPoints { first: 0, second: 2 })
        ));
        assert!(DiscreteMeasure::new(vec![pt(1.0, 0.0)], vec![0.9]).is_err());
    }

    #[test]
    fn energy_is_permutation_invariant() {
        let pts: Vec<SpherePoint> = (0..7).map(|j| SpherePoint::from_angles(0.2 * j as f64, j as f64, 0.5)).collect();
        let w: Vec<f64> = (1..=7).map(|j| j as f64 / 28.0).collect();
        let a = energy(&DiscreteMeasure::new(pts.clone(), w.clone()).unwrap(), 1.3).unwrap();
        let perm = [3, 0, 6, 1, 5, 2, 4];
        let b = energy(
            &DiscreteMeasure::new(perm.iter().map(|&i| pts[i]).collect(), perm.iter().map(|&i| w[i]).collect())
                .unwrap(),
            1.3,
        )
        .unwrap();
        assert!((a - b).abs() < 1e-13 * a);
    }

    #[test]
    fn energy_decreases_in_alpha_for_close_points() {
        let pts: Vec<SpherePoint> = (0..6).map(|j| SpherePoint::model_curve(0.1 * j as f64)).collect();
        let mu = DiscreteMeasure::uniform(pts).unwrap();
        let es: Vec<f64> = [0.25, 0.5, 1.0, 1.5, 1.9].iter().map(|a| energy(&mu, *a).unwrap()).collect();
        assert!(es.windows(2).all(|e| e[1] <= e[0]));
    }

    #[test]
    fn minimizer_examples() {
        let mu = minimize_energy(&[pt(1.0, 0.0), pt(0.0, 1.0)], 1.0).unwrap();
        assert!(mu.weights.iter().all(|w| (w - 0.5).abs() < 1e-12));

        let pts = SupportSet::ModelCurve.sample(64);
        let mu = minimize_energy(&pts, 1.25).unwrap();
        assert!(mu.weights.iter().all(|w| (w - 1.0 / 64.0).abs() < 1e-6));

        assert!(minimize_energy(&[pt(1.0, 0.0)], 1.0).is_err());
    }

    #[test]
    fn minimizer_matches_grid_search_with_outlier() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let pts = vec![
            SpherePoint::model_curve(0.0),
            SpherePoint::model_curve(0.05),
            SpherePoint::new(C64::new(0.0, s), C64::new(s, 0.0)).unwrap(),
        ];
        let alpha = 1.0;
        let mu = minimize_energy(&pts, alpha).unwrap();
        assert!(mu.weights[2] > 0.0);
        let mut best = f64::INFINITY;
        let steps = 400;
        for a in 0..=steps {
            for b in 0..=steps - a {
                let w = vec![a as f64 / steps as f64, b as f64 / steps as f64, (steps - a - b) as f64 / steps as f64];
                let e = energy(&DiscreteMeasure::new(pts.clone(), w).unwrap(), alpha).unwrap();
                best = best.min(e);
            }
        }
        let got = energy(&mu, alpha).unwrap();
        assert!(got <= best + 1e-9, "{got} vs {best}");
    }

    #[test]
    fn minimizer_beats_uniform() {
        let pts: Vec<SpherePoint> = (0..12)
            .map(|j| SpherePoint::from_angles(0.1 + 0.07 * j as f64, 0.4 * (j * j) as f64, 0.3 * j as f64))
            .collect();
        for alpha in [0.5, 1.2, 2.0] {
            let mu = minimize_energy(&pts, alpha).unwrap();
            let uni = DiscreteMeasure::uniform(pts.clone()).unwrap();
            assert!(energy(&mu, alpha).unwrap() <= energy(&uni, alpha).unwrap() + 1e-9);
        }
    }

    #[test]
    fn scan_rejects_alpha_above_two() {
        assert!(matches!(
            capacity_scan(&SupportSet::ModelCurve, 2.5, &[8, 16]),
            Err(Error::AlphaOutOfRange { .. })
        ));
    }

    #[test]
    fn finite_sets_are_convergent() {
        let set = SupportSet::Points(vec![pt(1.0, 0.0), pt(0.0, 1.0)]);
        let r = capacity_scan(&set, 1.9, &[8, 16, 32]).unwrap();
        assert_eq!(r.class, CapacityClass::Convergent);
        let r = capacity_scan(&SupportSet::Points(vec![pt(1.0, 0.0)]), 1.0, &[4]).unwrap();
        assert!(r.caveat.is_some());
    }

    #[test]
    fn resampled_curve_matches_model_curve() {
        let dense = SupportSet::ModelCurve.sample(4000);
        let pts = SupportSet::Curve(dense).sample(16);
        for (j, p) in pts.iter().enumerate() {
            let want = SpherePoint::model_curve(std::f64::consts::TAU * j as f64 / 16.0);
            assert!(p.distance(&want) < 1e-5);
        }
    }
}
