//! Fixtures shared by the criterion benches in `benches/`.

use dirichlet_ball::parse::parse_poly;
use dirichlet_ball::Poly2;

/// `1 - 2zw`, which vanishes on a circle of the sphere.
pub fn model_curve_poly() -> Poly2 {
    parse_poly("1 - 2*z*w").expect("valid literal")
}

/// `1 - z`, with a single boundary zero.
pub fn single_zero_poly() -> Poly2 {
    parse_poly("1 - z").expect("valid literal")
}

/// A dense polynomial of the given degree with deterministic coefficients.
pub fn dense_poly(degree: u32) -> Poly2 {
    Poly2::from_terms(dirichlet_ball::Monomial::up_to_degree(degree).map(|m| {
        let t = (m.k * 7 + m.l * 3) as f64;
        (m, dirichlet_ball::C64::new(t.sin(), (0.5 * t).cos()) / (1.0 + m.degree() as f64))
    }))
}
