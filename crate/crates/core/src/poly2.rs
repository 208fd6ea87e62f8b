//! Bivariate complex polynomials and truncated power series.
//!
//! [`Poly2`] is an exact sparse polynomial in `z, w`; [`TruncatedSeries2`] is a
//! dense triangular coefficient array holding every monomial of total degree
//! at most its order. Coefficients are grouped in *shells* of equal total
//! degree `s = k + l`, ordered by `k` inside a shell, which is also the
//! canonical ordering used for JSON output.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dalpha::AlphaWeight;
use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Coefficients with modulus below this are treated as exact zeros.
pub const ZERO_CUTOFF: f64 = 1e-300;

const UNITARY_TOL: f64 = 1e-12;

/// Exponent pair `(k, l)` of the monomial `z^k w^l`, ordered by `(k + l, k)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Monomial {
    pub k: u32,
    pub l: u32,
}

impl Monomial {
    pub const ONE: Monomial = Monomial { k: 0, l: 0 };

    pub const fn new(k: u32, l: u32) -> Self {
        Self { k, l }
    }

    pub const fn degree(self) -> u32 {
        self.k + self.l
    }

    /// Position in the shell-major triangular layout.
    pub fn dense_index(self) -> usize {
        shell_offset(self.degree() as usize) + self.k as usize
    }

    /// All monomials of total degree at most `n`, in canonical order.
    pub fn up_to_degree(n: u32) -> impl Iterator<Item = Monomial> {
        (0..=n).flat_map(|s| (0..=s).map(move |k| Monomial::new(k, s - k)))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.degree(), self.k).cmp(&(other.degree(), other.k))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Offset of shell `s` in the triangular layout.
#[inline]
pub fn shell_offset(s: usize) -> usize {
    s * (s + 1) / 2
}

/// Number of coefficients stored for total degree `<= order`.
#[inline]
pub fn triangular_len(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

/// Which derivative [`Poly2::differentiate`] computes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiffMode {
    Dz,
    Dw,
    /// `R f = z ∂_z f + w ∂_w f`.
    Radial,
    /// Holomorphic gradient `(∂_z f, ∂_w f)`.
    Gradient,
}

/// Result of [`DiffMode`] dispatch: one object, or the two gradient components.
#[derive(Clone, Debug, PartialEq)]
pub enum Derivative<T> {
    One(T),
    Two(T, T),
}

impl<T> Derivative<T> {
    pub fn into_one(self) -> Option<T> {
        match self {
            Derivative::One(t) => Some(t),
            Derivative::Two(..) => None,
        }
    }

    pub fn into_pair(self) -> Option<(T, T)> {
        match self {
            Derivative::Two(a, b) => Some((a, b)),
            Derivative::One(_) => None,
        }
    }
}

/// Read access to the coefficients of a (possibly truncated) expansion.
pub trait CoefficientSource {
    fn for_each_term(&self, f: &mut dyn FnMut(u32, u32, C64));
    fn coeff(&self, k: u32, l: u32) -> C64;
    /// Truncation-error hint; zero for exact objects.
    fn tail_hint(&self) -> f64 {
        0.0
    }
}

fn binomial_row(n: u32) -> Vec<f64> {
    let mut row = vec![1.0; n as usize + 1];
    for i in 1..n as usize {
        row[i] = row[i - 1] * (n as usize + 1 - i) as f64 / i as f64;
    }
    row
}

/// A 2x2 unitary matrix acting on `(z, w)`.
///
/// Composition uses the row-vector convention: `(f∘U)(z, w) = f((z, w)·U)`,
/// so the point `(z, w)` in new coordinates corresponds to
/// `(u11 z + u21 w, u12 z + u22 w)` in the old ones.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitarySpec {
    entries: [[C64; 2]; 2],
}

impl UnitarySpec {
    pub fn new(entries: [[C64; 2]; 2]) -> Result<Self> {
        let u = Self { entries };
        let deviation = u.unitarity_defect();
        if deviation > UNITARY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(u)
    }

    pub fn identity() -> Self {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        Self {
            entries: [[one, zero], [zero, one]],
        }
    }

    /// Coordinate swap `z <-> w`.
    pub fn swap() -> Self {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        Self {
            entries: [[zero, one], [one, zero]],
        }
    }

    /// The general element of U(2):
    /// `e^{iδ} [[e^{ia} cos t, e^{ib} sin t], [-e^{-ib} sin t, e^{-ia} cos t]]`.
    pub fn from_angles(a: f64, b: f64, t: f64, delta: f64) -> Self {
        let g = C64::from_polar(1.0, delta);
        let (s, c) = t.sin_cos();
        Self {
            entries: [
                [g * C64::from_polar(c, a), g * C64::from_polar(s, b)],
                [-g * C64::from_polar(s, -b), g * C64::from_polar(c, -a)],
            ],
        }
    }

    /// A unitary whose second row is the unit vector `(zeta, eta)`, so that
    /// `(0, 1)·U = (zeta, eta)`; composing with it moves that point to `(0, 1)`.
    pub fn with_second_row(zeta: C64, eta: C64) -> Result<Self> {
        let n = (zeta.norm_sqr() + eta.norm_sqr()).sqrt();
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::ParameterOutOfRange(format!(
                "point is not on the unit sphere (norm {n})"
            )));
        }
        let (zeta, eta) = (zeta / n, eta / n);
        Self::new([[-eta.conj(), zeta.conj()], [zeta, eta]])
    }

    pub fn entries(&self) -> [[C64; 2]; 2] {
        self.entries
    }

    pub fn adjoint(&self) -> Self {
        let e = self.entries;
        Self {
            entries: [[e[0][0].conj(), e[1][0].conj()], [e[0][1].conj(), e[1][1].conj()]],
        }
    }

    /// `max |(U*U - I)_{ij}|`.
    pub fn unitarity_defect(&self) -> f64 {
        let e = self.entries;
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = C64::new(0.0, 0.0);
                for r in 0..2 {
                    acc += e[r][i].conj() * e[r][j];
                }
                if i == j {
                    acc -= 1.0;
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }

    /// Row-vector action `(z, w)·U`.
    pub fn apply_row(&self, z: C64, w: C64) -> (C64, C64) {
        let e = self.entries;
        (z * e[0][0] + w * e[1][0], z * e[0][1] + w * e[1][1])
    }

    /// Expansion of `(z, w)·U` raised to `z^k w^l`, as a dense shell of
    /// length `k + l + 1` indexed by the new `z` exponent.
    fn monomial_image(&self, k: u32, l: u32) -> Vec<C64> {
        let e = self.entries;
        // (u11 z + u21 w)^k
        let bk = binomial_row(k);
        let a: Vec<C64> = (0..=k)
            .map(|i| e[0][0].powu(i) * e[1][0].powu(k - i) * bk[i as usize])
            .collect();
        // (u12 z + u22 w)^l
        let bl = binomial_row(l);
        let b: Vec<C64> = (0..=l)
            .map(|j| e[0][1].powu(j) * e[1][1].powu(l - j) * bl[j as usize])
            .collect();
        let mut out = vec![C64::new(0.0, 0.0); (k + l + 1) as usize];
        for (i, ai) in a.iter().enumerate() {
            for (j, bj) in b.iter().enumerate() {
                out[i + j] += ai * bj;
            }
        }
        out
    }
}

/// Serialized coefficient record `{"k", "l", "re", "im"}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRecord {
    pub k: u32,
    pub l: u32,
    pub re: f64,
    pub im: f64,
}

/// Exact sparse bivariate polynomial `Σ a_{k,l} z^k w^l`.
///
/// Canonical form: no stored coefficient has modulus below [`ZERO_CUTOFF`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly2 {
    coeffs: BTreeMap<Monomial, C64>,
}

impl Poly2 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: impl Into<C64>) -> Self {
        Self::monomial(0, 0, c)
    }

    pub fn monomial(k: u32, l: u32, c: impl Into<C64>) -> Self {
        Self::from_terms([(Monomial::new(k, l), c.into())])
    }

    /// Variable `z`.
    pub fn z() -> Self {
        Self::monomial(1, 0, 1.0)
    }

    /// Variable `w`.
    pub fn w() -> Self {
        Self::monomial(0, 1, 1.0)
    }

    /// Builds a canonical polynomial, summing repeated monomials.
    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (Monomial, C64)>,
    {
        let mut coeffs = BTreeMap::new();
        for (m, c) in terms {
            *coeffs.entry(m).or_insert(C64::new(0.0, 0.0)) += c;
        }
        coeffs.retain(|_, c: &mut C64| c.norm() >= ZERO_CUTOFF);
        Self { coeffs }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Number of stored (nonzero) coefficients.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Maximal total degree; 0 for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.coeffs.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn coeff(&self, k: u32, l: u32) -> C64 {
        self.coeffs
            .get(&Monomial::new(k, l))
            .copied()
            .unwrap_or_default()
    }

    pub fn constant_term(&self) -> C64 {
        self.coeff(0, 0)
    }

    /// Terms in canonical `(k + l, k)` order.
    pub fn terms(&self) -> impl Iterator<Item = (Monomial, C64)> + '_ {
        self.coeffs.iter().map(|(m, c)| (*m, *c))
    }

    pub fn map_coeffs(&self, mut f: impl FnMut(Monomial, C64) -> C64) -> Self {
        Self::from_terms(self.terms().map(|(m, c)| (m, f(m, c))))
    }

    pub fn scale(&self, s: impl Into<C64>) -> Self {
        let s = s.into();
        self.map_coeffs(|_, c| c * s)
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Poly2::constant(1.0);
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Cauchy product.
    pub fn multiply(&self, other: &Poly2) -> Poly2 {
        let mut out: BTreeMap<Monomial, C64> = BTreeMap::new();
        for (a, ca) in self.terms() {
            for (b, cb) in other.terms() {
                *out.entry(Monomial::new(a.k + b.k, a.l + b.l)).or_default() += ca * cb;
            }
        }
        Self::from_terms(out)
    }

    pub fn evaluate(&self, z: C64, w: C64) -> C64 {
        if self.is_zero() {
            return C64::new(0.0, 0.0);
        }
        // Horner in w over rows that are themselves Horner polynomials in z.
        let max_l = self.coeffs.keys().map(|m| m.l).max().unwrap_or(0);
        let mut rows: Vec<Vec<(u32, C64)>> = vec![Vec::new(); max_l as usize + 1];
        for (m, c) in self.terms() {
            rows[m.l as usize].push((m.k, c));
        }
        let mut acc = C64::new(0.0, 0.0);
        for row in rows.iter_mut().rev() {
            row.sort_by_key(|(k, _)| *k);
            let mut inner = C64::new(0.0, 0.0);
            let mut prev_k = row.last().map(|(k, _)| *k).unwrap_or(0);
            for &(k, c) in row.iter().rev() {
                inner = inner * z.powu(prev_k - k) + c;
                prev_k = k;
            }
            inner *= z.powu(prev_k);
            acc = acc * w + inner;
        }
        acc
    }

    /// Radial dilation `f_r(z, w) = f(r z, r w)`.
    pub fn dilate(&self, r: f64) -> Poly2 {
        self.map_coeffs(|m, c| c * r.powi(m.degree() as i32))
    }

    pub fn dz(&self) -> Poly2 {
        Self::from_terms(
            self.terms()
                .filter(|(m, _)| m.k > 0)
                .map(|(m, c)| (Monomial::new(m.k - 1, m.l), c * m.k as f64)),
        )
    }

    pub fn dw(&self) -> Poly2 {
        Self::from_terms(
            self.terms()
                .filter(|(m, _)| m.l > 0)
                .map(|(m, c)| (Monomial::new(m.k, m.l - 1), c * m.l as f64)),
        )
    }

    /// `R f = z ∂_z f + w ∂_w f`: coefficient `(k, l)` scaled by `k + l`.
    pub fn radial(&self) -> Poly2 {
        self.map_coeffs(|m, c| c * m.degree() as f64)
    }

    pub fn gradient(&self) -> (Poly2, Poly2) {
        (self.dz(), self.dw())
    }

    pub fn differentiate(&self, mode: DiffMode) -> Derivative<Poly2> {
        match mode {
            DiffMode::Dz => Derivative::One(self.dz()),
            DiffMode::Dw => Derivative::One(self.dw()),
            DiffMode::Radial => Derivative::One(self.radial()),
            DiffMode::Gradient => {
                let (a, b) = self.gradient();
                Derivative::Two(a, b)
            }
        }
    }

    /// `f∘U`, expanded exactly shell by shell.
    pub fn compose_unitary(&self, u: &UnitarySpec) -> Poly2 {
        let mut out: BTreeMap<Monomial, C64> = BTreeMap::new();
        for (m, c) in self.terms() {
            let s = m.degree();
            for (i, v) in u.monomial_image(m.k, m.l).into_iter().enumerate() {
                *out.entry(Monomial::new(i as u32, s - i as u32)).or_default() += c * v;
            }
        }
        Self::from_terms(out)
    }

    pub fn to_records(&self) -> Vec<CoefficientRecord> {
        self.terms()
            .map(|(m, c)| CoefficientRecord {
                k: m.k,
                l: m.l,
                re: c.re,
                im: c.im,
            })
            .collect()
    }

    pub fn from_records(records: &[CoefficientRecord]) -> Self {
        Self::from_terms(
            records
                .iter()
                .map(|r| (Monomial::new(r.k, r.l), C64::new(r.re, r.im))),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_records())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let records: Vec<CoefficientRecord> = serde_json::from_str(text)?;
        Ok(Self::from_records(&records))
    }

    /// Max coefficient difference against `other`.
    pub fn max_coeff_diff(&self, other: &Poly2) -> f64 {
        let diff = self - other;
        diff.terms().map(|(_, c)| c.norm()).fold(0.0, f64::max)
    }
}

impl Serialize for Poly2 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_records().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Poly2 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let records = Vec::<CoefficientRecord>::deserialize(d)?;
        Ok(Self::from_records(&records))
    }
}

impl fmt::Display for Poly2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in self.terms() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if c.im == 0.0 {
                write!(f, "{}", c.re)?;
            } else {
                write!(f, "({}{:+}i)", c.re, c.im)?;
            }
            match m.k {
                0 => {}
                1 => write!(f, "*z")?,
                k => write!(f, "*z^{k}")?,
            }
            match m.l {
                0 => {}
                1 => write!(f, "*w")?,
                l => write!(f, "*w^{l}")?,
            }
        }
        Ok(())
    }
}

impl CoefficientSource for Poly2 {
    fn for_each_term(&self, f: &mut dyn FnMut(u32, u32, C64)) {
        for (m, c) in self.terms() {
            f(m.k, m.l, c);
        }
    }

    fn coeff(&self, k: u32, l: u32) -> C64 {
        Poly2::coeff(self, k, l)
    }
}

impl Add for &Poly2 {
    type Output = Poly2;
    fn add(self, rhs: &Poly2) -> Poly2 {
        Poly2::from_terms(self.terms().chain(rhs.terms()))
    }
}

impl Sub for &Poly2 {
    type Output = Poly2;
    fn sub(self, rhs: &Poly2) -> Poly2 {
        Poly2::from_terms(self.terms().chain(rhs.terms().map(|(m, c)| (m, -c))))
    }
}

impl Mul for &Poly2 {
    type Output = Poly2;
    fn mul(self, rhs: &Poly2) -> Poly2 {
        self.multiply(rhs)
    }
}

impl Neg for &Poly2 {
    type Output = Poly2;
    fn neg(self) -> Poly2 {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned_binop {
    ($tr:ident, $m:ident) => {
        impl $tr for Poly2 {
            type Output = Poly2;
            fn $m(self, rhs: Poly2) -> Poly2 {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned_binop!(Add, add);
forward_owned_binop!(Sub, sub);
forward_owned_binop!(Mul, mul);

/// Dense triangular truncation `Σ_{k+l<=N} a_{k,l} z^k w^l`.
///
/// `tail_hint` is the weighted norm of the last computed shell, measured with
/// the weights of `tail_alpha`; it is zero when the series is exact.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSeries2 {
    order: u32,
    coeffs: Vec<C64>,
    exact: bool,
    tail_hint: f64,
    tail_alpha: f64,
}

impl TruncatedSeries2 {
    /// Series with the given dense shell-major coefficients. `coeffs` must
    /// have length `triangular_len(order)`.
    pub fn from_dense(order: u32, coeffs: Vec<C64>, exact: bool, tail_alpha: f64) -> Self {
        assert_eq!(coeffs.len(), triangular_len(order as usize));
        let mut s = Self {
            order,
            coeffs,
            exact,
            tail_hint: 0.0,
            tail_alpha,
        };
        s.refresh_tail();
        s
    }

    /// Truncates `p` at total degree `order`; exact iff nothing was dropped.
    pub fn from_poly(p: &Poly2, order: u32) -> Self {
        let mut coeffs = vec![C64::new(0.0, 0.0); triangular_len(order as usize)];
        for (m, c) in p.terms().filter(|(m, _)| m.degree() <= order) {
            coeffs[m.dense_index()] = c;
        }
        Self::from_dense(order, coeffs, p.degree() <= order, 0.0)
    }

    pub fn one(order: u32) -> Self {
        Self::from_poly(&Poly2::constant(1.0), order)
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn tail_hint(&self) -> f64 {
        self.tail_hint
    }

    pub fn tail_alpha(&self) -> f64 {
        self.tail_alpha
    }

    /// Recomputes the tail hint with the weights of `aw`.
    pub fn with_tail_alpha(mut self, aw: &AlphaWeight) -> Self {
        self.tail_alpha = aw.alpha();
        self.refresh_tail();
        self
    }

    fn refresh_tail(&mut self) {
        if self.exact {
            self.tail_hint = 0.0;
            return;
        }
        let aw = AlphaWeight::new(self.tail_alpha);
        let s = self.order;
        self.tail_hint = self
            .shell(s)
            .iter()
            .enumerate()
            .map(|(k, c)| aw.weight(k as u32, s - k as u32) * c.norm_sqr())
            .sum();
    }

    pub fn coeff(&self, k: u32, l: u32) -> C64 {
        if k + l > self.order {
            return C64::new(0.0, 0.0);
        }
        self.coeffs[Monomial::new(k, l).dense_index()]
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// Coefficients of shell `s`, indexed by the `z` exponent.
    pub fn shell(&self, s: u32) -> &[C64] {
        let start = shell_offset(s as usize);
        &self.coeffs[start..start + s as usize + 1]
    }

    /// Highest shell holding a nonzero coefficient.
    pub fn effective_degree(&self) -> u32 {
        (0..=self.order)
            .rev()
            .find(|&s| self.shell(s).iter().any(|c| c.norm() >= ZERO_CUTOFF))
            .unwrap_or(0)
    }

    pub fn to_poly(&self) -> Poly2 {
        Poly2::from_terms(
            Monomial::up_to_degree(self.order).map(|m| (m, self.coeffs[m.dense_index()])),
        )
    }

    fn map_same_shape(&self, mut f: impl FnMut(u32, u32, C64) -> C64) -> Self {
        let coeffs = Monomial::up_to_degree(self.order)
            .map(|m| f(m.k, m.l, self.coeffs[m.dense_index()]))
            .collect();
        Self::from_dense(self.order, coeffs, self.exact, self.tail_alpha)
    }

    pub fn evaluate(&self, z: C64, w: C64) -> C64 {
        // Horner in w outside, Horner in z along each row of fixed l.
        let n = self.order;
        let mut acc = C64::new(0.0, 0.0);
        for l in (0..=n).rev() {
            let mut row = C64::new(0.0, 0.0);
            for k in (0..=n - l).rev() {
                row = row * z + self.coeffs[Monomial::new(k, l).dense_index()];
            }
            acc = acc * w + row;
        }
        acc
    }

    pub fn dilate(&self, r: f64) -> Self {
        self.map_same_shape(|k, l, c| c * r.powi((k + l) as i32))
    }

    pub fn dz(&self) -> Self {
        // ∂_z lowers the order by one; the last shell becomes unknown.
        self.derivative_impl(|k, l| (k > 0).then(|| (k - 1, l, k as f64)))
    }

    pub fn dw(&self) -> Self {
        self.derivative_impl(|k, l| (l > 0).then(|| (k, l - 1, l as f64)))
    }

    fn derivative_impl(&self, f: impl Fn(u32, u32) -> Option<(u32, u32, f64)>) -> Self {
        let order = self.order.saturating_sub(if self.exact { 0 } else { 1 });
        let mut coeffs = vec![C64::new(0.0, 0.0); triangular_len(order as usize)];
        for m in Monomial::up_to_degree(self.order) {
            if let Some((k, l, factor)) = f(m.k, m.l) {
                if k + l <= order {
                    coeffs[Monomial::new(k, l).dense_index()] += self.coeffs[m.dense_index()] * factor;
                }
            }
        }
        Self::from_dense(order, coeffs, self.exact, self.tail_alpha)
    }

    pub fn radial(&self) -> Self {
        self.map_same_shape(|k, l, c| c * (k + l) as f64)
    }

    pub fn differentiate(&self, mode: DiffMode) -> Derivative<Self> {
        match mode {
            DiffMode::Dz => Derivative::One(self.dz()),
            DiffMode::Dw => Derivative::One(self.dw()),
            DiffMode::Radial => Derivative::One(self.radial()),
            DiffMode::Gradient => Derivative::Two(self.dz(), self.dw()),
        }
    }

    /// `f∘U`; every shell maps to itself, so the order is preserved.
    pub fn compose_unitary(&self, u: &UnitarySpec) -> Self {
        let mut coeffs = vec![C64::new(0.0, 0.0); self.coeffs.len()];
        for m in Monomial::up_to_degree(self.order) {
            let c = self.coeffs[m.dense_index()];
            if c.norm() < ZERO_CUTOFF {
                continue;
            }
            let s = m.degree() as usize;
            let base = shell_offset(s);
            for (i, v) in u.monomial_image(m.k, m.l).into_iter().enumerate() {
                coeffs[base + i] += c * v;
            }
        }
        Self::from_dense(self.order, coeffs, self.exact, self.tail_alpha)
    }

    /// Cauchy product truncated at the smaller order.
    pub fn multiply(&self, other: &Self) -> Self {
        let order = self.order.min(other.order);
        let mut coeffs = vec![C64::new(0.0, 0.0); triangular_len(order as usize)];
        for a in Monomial::up_to_degree(order) {
            let ca = self.coeffs[a.dense_index()];
            if ca.norm() < ZERO_CUTOFF {
                continue;
            }
            for b in Monomial::up_to_degree(order - a.degree()) {
                coeffs[Monomial::new(a.k + b.k, a.l + b.l).dense_index()] +=
                    ca * other.coeffs[b.dense_index()];
            }
        }
        let exact = self.exact
            && other.exact
            && self.effective_degree() + other.effective_degree() <= order;
        Self::from_dense(order, coeffs, exact, self.tail_alpha)
    }

    /// Product with an exact polynomial, truncated at this series' order.
    pub fn multiply_poly(&self, p: &Poly2) -> Self {
        let other = TruncatedSeries2::from_poly(p, self.order);
        let mut out = self.multiply(&other);
        out.exact = self.exact && self.effective_degree() + p.degree() <= self.order;
        out.refresh_tail();
        out
    }
}

impl CoefficientSource for TruncatedSeries2 {
    fn for_each_term(&self, f: &mut dyn FnMut(u32, u32, C64)) {
        for m in Monomial::up_to_degree(self.order) {
            let c = self.coeffs[m.dense_index()];
            if c.norm() >= ZERO_CUTOFF {
                f(m.k, m.l, c);
            }
        }
    }

    fn coeff(&self, k: u32, l: u32) -> C64 {
        TruncatedSeries2::coeff(self, k, l)
    }

    fn tail_hint(&self) -> f64 {
        self.tail_hint
    }
}

/// Shell-by-shell reciprocal of a polynomial with nonzero constant term.
///
/// Yields shell `s` of `1/f` (length `s + 1`, indexed by the `z` exponent)
/// keeping only the `deg f` most recent shells in memory.
pub struct ReciprocalShells {
    terms: Vec<(u32, u32, C64)>,
    inv_const: C64,
    history: std::collections::VecDeque<Vec<C64>>,
    depth: usize,
    next: u32,
}

impl ReciprocalShells {
    pub fn new(f: &Poly2) -> Result<Self> {
        let c0 = f.constant_term();
        if c0.norm() < ZERO_CUTOFF {
            return Err(Error::ZeroConstantTerm);
        }
        let terms = f
            .terms()
            .filter(|(m, _)| m.degree() > 0)
            .map(|(m, c)| (m.k, m.l, c))
            .collect();
        let depth = f.degree().max(1) as usize;
        Ok(Self {
            terms,
            inv_const: c0.inv(),
            history: std::collections::VecDeque::with_capacity(depth + 1),
            depth,
            next: 0,
        })
    }

    /// Shell `s - d` from history, for `1 <= d <= depth`.
    fn past(&self, d: u32) -> &[C64] {
        &self.history[self.history.len() - d as usize]
    }
}

impl Iterator for ReciprocalShells {
    type Item = Vec<C64>;

    fn next(&mut self) -> Option<Vec<C64>> {
        let s = self.next;
        let mut shell = vec![C64::new(0.0, 0.0); s as usize + 1];
        if s == 0 {
            shell[0] = self.inv_const;
        } else {
            // f0 g_{k,l} = -Σ_{(i,j) != 0} f_{ij} g_{k-i, l-j}
            for &(i, j, c) in &self.terms {
                let d = i + j;
                if d > s {
                    continue;
                }
                let prev = self.past(d);
                for (k, slot) in shell.iter_mut().enumerate() {
                    let k = k as u32;
                    let l = s - k;
                    if k >= i && l >= j {
                        *slot -= c * prev[(k - i) as usize];
                    }
                }
            }
            for slot in shell.iter_mut() {
                *slot *= self.inv_const;
            }
        }
        if self.history.len() == self.depth {
            self.history.pop_front();
        }
        self.history.push_back(shell.clone());
        self.next += 1;
        Some(shell)
    }
}

/// `1/f` up to total degree `order`, computed shell by shell.
pub fn reciprocal(f: &Poly2, order: u32) -> Result<TruncatedSeries2> {
    reciprocal_with_tail(f, order, &AlphaWeight::new(0.0))
}

/// [`reciprocal`] with the tail hint measured in the weights of `aw`.
pub fn reciprocal_with_tail(f: &Poly2, order: u32, aw: &AlphaWeight) -> Result<TruncatedSeries2> {
    let shells = ReciprocalShells::new(f)?;
    let mut coeffs = Vec::with_capacity(triangular_len(order as usize));
    for shell in shells.take(order as usize + 1) {
        coeffs.extend(shell);
    }
    let exact = f.degree() == 0;
    Ok(TruncatedSeries2::from_dense(order, coeffs, exact, aw.alpha()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn poly(terms: &[(u32, u32, f64)]) -> Poly2 {
        Poly2::from_terms(terms.iter().map(|&(k, l, v)| (Monomial::new(k, l), c(v))))
    }

    fn one_minus_2zw() -> Poly2 {
        poly(&[(0, 0, 1.0), (1, 1, -2.0)])
    }

    #[test]
    fn monomial_order_is_degree_then_k() {
        let mut ms = vec![Monomial::new(0, 2), Monomial::new(1, 0), Monomial::new(2, 0), Monomial::new(0, 0)];
        ms.sort();
        assert_eq!(ms, vec![Monomial::new(0, 0), Monomial::new(1, 0), Monomial::new(0, 2), Monomial::new(2, 0)]);
        for (i, m) in Monomial::up_to_degree(6).enumerate() {
            assert_eq!(m.dense_index(), i);
        }
    }

    #[test]
    fn multiply_examples() {
        let a = poly(&[(0, 0, 1.0), (1, 0, -1.0)]);
        let b = poly(&[(0, 0, 1.0), (1, 0, 1.0)]);
        assert_eq!(&a * &b, poly(&[(0, 0, 1.0), (2, 0, -1.0)]));
        assert_eq!(&one_minus_2zw() * &Poly2::constant(1.0), one_minus_2zw());
        let s = poly(&[(0, 0, 1.0), (1, 0, 1.0), (0, 1, 1.0)]);
        assert_eq!(
            s.pow(2),
            poly(&[(0, 0, 1.0), (1, 0, 2.0), (0, 1, 2.0), (2, 0, 1.0), (1, 1, 2.0), (0, 2, 1.0)])
        );
    }

    #[test]
    fn canonical_form_drops_cancelled_terms() {
        let p = &poly(&[(1, 0, 1.0)]) - &poly(&[(1, 0, 1.0)]);
        assert!(p.is_zero());
        assert_eq!(p.degree(), 0);
        assert_eq!(poly(&[(3, 1, 1.0), (0, 0, 2.0)]).degree(), 4);
    }

    #[test]
    fn evaluate_examples() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(one_minus_2zw().evaluate(c(h), c(h)).norm() < 1e-15);
        assert_eq!(poly(&[(0, 0, 1.0), (1, 0, -1.0)]).evaluate(c(1.0), c(0.0)), c(0.0));
        let s = poly(&[(0, 0, 1.0), (1, 0, 1.0), (0, 1, 1.0)]);
        assert!((s.evaluate(c(0.5), C64::new(0.0, 0.25)) - C64::new(1.5, 0.25)).norm() < 1e-15);
    }

    #[test]
    fn dilate_examples() {
        let r = 0.7;
        assert_eq!(poly(&[(0, 0, 1.0), (1, 0, -1.0)]).dilate(r), poly(&[(0, 0, 1.0), (1, 0, -r)]));
        let d = one_minus_2zw().dilate(r);
        assert!((d.coeff(1, 1) - c(-2.0 * r * r)).norm() < 1e-15);
        assert_eq!(one_minus_2zw().dilate(1.0), one_minus_2zw());
    }

    #[test]
    fn reciprocal_examples() {
        let g = reciprocal(&poly(&[(0, 0, 1.0), (1, 0, -1.0)]), 3).unwrap();
        assert_eq!(g.to_poly(), poly(&[(0, 0, 1.0), (1, 0, 1.0), (2, 0, 1.0), (3, 0, 1.0)]));
        assert!(!g.is_exact());

        let r: f64 = 0.8;
        let m = 5;
        let g = reciprocal(&one_minus_2zw().dilate(r), 2 * m).unwrap();
        for j in 0..=m {
            let want = (2.0 * r * r).powi(j as i32);
            assert!((g.coeff(j, j) - c(want)).norm() < 1e-13 * want);
        }
        assert_eq!(g.to_poly().len(), m as usize + 1);

        let g = reciprocal(&Poly2::constant(2.0), 5).unwrap();
        assert_eq!(g.to_poly(), Poly2::constant(0.5));
        assert!(g.is_exact());
        assert_eq!(g.tail_hint(), 0.0);

        assert!(matches!(reciprocal(&Poly2::z(), 4), Err(Error::ZeroConstantTerm)));
    }

    #[test]
    fn reciprocal_tail_hint_is_last_shell_norm() {
        let aw = AlphaWeight::new(1.0);
        let g = reciprocal_with_tail(&poly(&[(0, 0, 1.0), (1, 0, -0.5)]), 6, &aw).unwrap();
        assert!((g.tail_hint() - aw.weight(6, 0) * 0.5f64.powi(12)).abs() < 1e-18);
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(poly(&[(2, 1, 1.0)]).radial(), poly(&[(2, 1, 3.0)]));
        assert_eq!(one_minus_2zw().dz(), poly(&[(0, 1, -2.0)]));
        assert!(Poly2::constant(4.0).radial().is_zero());
        let (gz, gw) = one_minus_2zw().differentiate(DiffMode::Gradient).into_pair().unwrap();
        assert_eq!(gz, poly(&[(0, 1, -2.0)]));
        assert_eq!(gw, poly(&[(1, 0, -2.0)]));
    }

    #[test]
    fn compose_unitary_examples() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let u = UnitarySpec::new([[c(h), c(-h)], [c(h), c(h)]]).unwrap();
        let got = one_minus_2zw().compose_unitary(&u);
        let want = poly(&[(0, 0, 1.0), (2, 0, 1.0), (0, 2, -1.0)]);
        assert!(got.max_coeff_diff(&want) < 1e-15);

        let f = poly(&[(0, 0, 1.0), (2, 1, -3.0), (0, 3, 0.5)]);
        assert!(f.compose_unitary(&UnitarySpec::identity()).max_coeff_diff(&f) < 1e-15);

        let one_minus_w = poly(&[(0, 0, 1.0), (0, 1, -1.0)]);
        assert_eq!(
            one_minus_w.compose_unitary(&UnitarySpec::swap()),
            poly(&[(0, 0, 1.0), (1, 0, -1.0)])
        );
    }

    #[test]
    fn non_unitary_matrix_is_rejected() {
        let err = UnitarySpec::new([[c(1.0), c(0.1)], [c(0.0), c(1.0)]]).unwrap_err();
        assert!(matches!(err, Error::NotUnitary { .. }));
    }

    #[test]
    fn with_second_row_moves_point_to_north_pole() {
        let (z, w) = (C64::new(0.6, 0.0), C64::new(0.0, 0.8));
        let u = UnitarySpec::with_second_row(z, w).unwrap();
        let (a, b) = u.apply_row(c(0.0), c(1.0));
        assert!((a - z).norm() < 1e-15 && (b - w).norm() < 1e-15);
        assert!(u.unitarity_defect() < 1e-15);
    }

    #[test]
    fn truncated_series_matches_polynomial() {
        let p = poly(&[(0, 0, 1.0), (1, 2, -0.5), (3, 0, 2.0)]);
        let t = TruncatedSeries2::from_poly(&p, 5);
        assert!(t.is_exact());
        let (z, w) = (C64::new(0.3, -0.2), C64::new(-0.1, 0.4));
        assert!((t.evaluate(z, w) - p.evaluate(z, w)).norm() < 1e-15);
        assert_eq!(t.radial().to_poly(), p.radial());
        assert_eq!(t.dz().to_poly(), p.dz());
        let cut = TruncatedSeries2::from_poly(&p, 2);
        assert!(!cut.is_exact());
        assert_eq!(cut.order(), 2);
    }

    #[test]
    fn truncated_multiply_takes_min_order() {
        let a = TruncatedSeries2::from_poly(&poly(&[(0, 0, 1.0), (1, 0, 1.0)]), 4);
        let b = reciprocal(&poly(&[(0, 0, 1.0), (1, 0, 1.0)]), 3).unwrap();
        let prod = a.multiply(&b);
        assert_eq!(prod.order(), 3);
        assert!(!prod.is_exact());
        assert_eq!(prod.to_poly(), Poly2::constant(1.0));
        let e = a.multiply(&a);
        assert!(e.is_exact());
        assert_eq!(e.tail_hint(), 0.0);
    }

    #[test]
    fn json_format_is_canonical() {
        let p = poly(&[(1, 1, -2.0), (0, 0, 1.0), (2, 0, 0.5)]);
        let text = p.to_json().unwrap();
        assert_eq!(
            text,
            r#"[{"k":0,"l":0,"re":1.0,"im":0.0},{"k":1,"l":1,"re":-2.0,"im":0.0},{"k":2,"l":0,"re":0.5,"im":0.0}]"#
        );
        assert_eq!(Poly2::from_json(&text).unwrap(), p);
    }

    fn arb_poly(max_deg: u32) -> impl Strategy<Value = Poly2> {
        prop::collection::vec((0..=max_deg, 0..=max_deg, -1.0..1.0f64, -1.0..1.0f64), 1..12).prop_map(
            move |ts| {
                Poly2::from_terms(ts.into_iter().filter(|t| t.0 + t.1 <= max_deg).map(|(k, l, a, b)| {
                    (Monomial::new(k, l), C64::new(a, b))
                }))
            },
        )
    }

    fn arb_unitary() -> impl Strategy<Value = UnitarySpec> {
        (0.0..6.3f64, 0.0..6.3f64, 0.0..1.6f64, 0.0..6.3f64)
            .prop_map(|(a, b, t, d)| UnitarySpec::from_angles(a, b, t, d))
    }

    fn arb_ball_point() -> impl Strategy<Value = (C64, C64)> {
        (-0.5..0.5f64, -0.5..0.5f64, -0.5..0.5f64, -0.5..0.5f64)
            .prop_map(|(a, b, x, y)| (C64::new(a, b), C64::new(x, y)))
    }

    proptest! {
        #[test]
        fn dilation_commutes_with_unitaries(f in arb_poly(8), u in arb_unitary(), pick in 0..2usize) {
            let r = [0.3, 0.9][pick];
            let a = f.dilate(r).compose_unitary(&u);
            let b = f.compose_unitary(&u).dilate(r);
            prop_assert!(a.max_coeff_diff(&b) < 1e-12);
        }

        #[test]
        fn reciprocal_inverts_through_order(f in arb_poly(4), c0 in 0.5..2.0f64, n in 0u32..12) {
            let f = &f.map_coeffs(|m, c| if m.degree() == 0 { C64::new(0.0, 0.0) } else { c }) + &Poly2::constant(c0);
            let g = reciprocal(&f, n).unwrap();
            let prod = TruncatedSeries2::from_poly(&f, n).multiply(&g).to_poly();
            let scale: f64 = g.coeffs().iter().map(|c| c.norm()).fold(1.0, f64::max)
                * f.terms().map(|(_, c)| c.norm()).sum::<f64>();
            prop_assert!(prod.max_coeff_diff(&Poly2::constant(1.0)) < 1e-13 * scale);
        }

        #[test]
        fn radial_scales_by_degree(f in arb_poly(8)) {
            let r = f.radial();
            for (m, c) in f.terms() {
                prop_assert_eq!(r.coeff(m.k, m.l), c * m.degree() as f64);
            }
        }

        #[test]
        fn evaluation_is_multiplicative(f in arb_poly(5), g in arb_poly(5), (z, w) in arb_ball_point()) {
            let lhs = (&f * &g).evaluate(z, w);
            let rhs = f.evaluate(z, w) * g.evaluate(z, w);
            prop_assert!((lhs - rhs).norm() < 1e-12 * (1.0 + rhs.norm()));
        }

        #[test]
        fn composition_evaluates_pointwise(f in arb_poly(6), u in arb_unitary(), (z, w) in arb_ball_point()) {
            let (x, y) = u.apply_row(z, w);
            let lhs = f.compose_unitary(&u).evaluate(z, w);
            prop_assert!((lhs - f.evaluate(x, y)).norm() < 1e-12);
        }
    }
}
