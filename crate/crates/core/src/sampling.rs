//! Seeded low-discrepancy sequences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::poly2::C64;
use crate::sphere::SpherePoint;

const PRIMES: [u32; 6] = [2, 3, 5, 7, 11, 13];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    out
}

/// Halton sequence in `[0,1)^D` with a seeded Cranley–Patterson shift.
#[derive(Clone, Debug)]
pub(crate) struct Halton<const D: usize> {
    shift: [f64; D],
    index: u64,
}

impl<const D: usize> Halton<D> {
    pub fn new(seed: u64) -> Self {
        assert!(D <= PRIMES.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shift = [0.0; D];
        for s in shift.iter_mut() {
            *s = rng.random::<f64>();
        }
        // index 0 is the all-zero point; skip it
        Self { shift, index: 1 }
    }

    pub fn next_point(&mut self) -> [f64; D] {
        let mut out = [0.0; D];
        for (d, o) in out.iter_mut().enumerate() {
            *o = (radical_inverse(self.index, PRIMES[d]) + self.shift[d]).fract();
        }
        self.index += 1;
        out
    }
}

/// `n` quasi-uniform points on the sphere via Hopf coordinates: `|ζ|²` is
/// uniform on `[0,1]` and both phases are uniform.
pub(crate) fn sphere_points(n: usize, seed: u64) -> Vec<SpherePoint> {
    let mut h = Halton::<3>::new(seed);
    (0..n)
        .map(|_| {
            let [u, a, b] = h.next_point();
            let tau = std::f64::consts::TAU;
            SpherePoint::normalized(
                C64::from_polar(u.sqrt(), tau * a),
                C64::from_polar((1.0 - u).sqrt(), tau * b),
            )
        })
        .collect()
}

/// `n` quasi-uniform points of the closed ball in `R⁴`, by rejection from
/// the cube.
pub(crate) fn ball_points(n: usize, seed: u64) -> Vec<[f64; 4]> {
    let mut h = Halton::<4>::new(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let p = h.next_point().map(|x| 2.0 * x - 1.0);
        if p.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
            out.push(p);
        }
    }
    out
}
