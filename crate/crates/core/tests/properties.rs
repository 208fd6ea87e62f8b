use proptest::prelude::*;

use dirichlet_ball::boundary::{sphere_zeros, ZERO_ACCEPT};
use dirichlet_ball::dilation::{default_r_grid, dilation_sweep};
use dirichlet_ball::parse::parse_poly;
use dirichlet_ball::{AlphaWeight, Monomial, Poly2, UnitarySpec, C64};

fn arb_poly(max_deg: u32) -> impl Strategy<Value = Poly2> {
    prop::collection::vec((0..=max_deg, 0..=max_deg, -1.0..1.0f64, -1.0..1.0f64), 1..12).prop_map(
        move |ts| {
            Poly2::from_terms(
                ts.into_iter()
                    .filter(|t| t.0 + t.1 <= max_deg)
                    .map(|(k, l, a, b)| (Monomial::new(k, l), C64::new(a, b))),
            )
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn shift_identity_holds_for_any_alpha(f in arb_poly(10), alpha in -4.0..4.0f64) {
        let g = &f.scale(2.0) + &f.radial();
        let lhs = AlphaWeight::new(alpha - 2.0).norm_sq(&g);
        let rhs = AlphaWeight::new(alpha).norm_sq(&f);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn norms_increase_with_alpha(f in arb_poly(8), beta in -3.0..3.0f64, gap in 0.0..2.0f64) {
        let small = AlphaWeight::new(beta).norm_sq(&f);
        let large = AlphaWeight::new(beta + gap).norm_sq(&f);
        prop_assert!(small <= large * (1.0 + 1e-14));
    }

    #[test]
    fn disjoint_supports_add(f in arb_poly(6), g in arb_poly(6), alpha in -2.0..3.0f64) {
        // keep the monomials of f with even k and those of g with odd k
        let fe = f.map_coeffs(|m, c| if m.k % 2 == 0 { c } else { C64::new(0.0, 0.0) });
        let go = g.map_coeffs(|m, c| if m.k % 2 == 1 { c } else { C64::new(0.0, 0.0) });
        let aw = AlphaWeight::new(alpha);
        let sum = aw.norm_sq(&(&fe + &go));
        prop_assert!((sum - aw.norm_sq(&fe) - aw.norm_sq(&go)).abs() <= 1e-13 * sum.max(1.0));
    }

    #[test]
    fn rotated_curve_zeros_are_zeros(a in 0.0..6.3f64, b in 0.0..6.3f64, t in 0.0..1.6f64, d in 0.0..6.3f64) {
        let p = parse_poly("1-2*z*w").unwrap().compose_unitary(&UnitarySpec::from_angles(a, b, t, d));
        let zeros = sphere_zeros(&p, 128);
        prop_assert!(!zeros.is_empty());
        for x in zeros {
            prop_assert!(p.evaluate(x.zeta, x.eta).norm() < ZERO_ACCEPT);
            prop_assert!((x.zeta.norm_sqr() + x.eta.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn dilation_norms_grow_once_the_blow_up_sets_in() {
    // below k = 4 the quotient first drops from its r = 1/2 value, so the
    // trend is checked on the tail of the grid
    let p = parse_poly("1-2*z*w").unwrap();
    for alpha in [1.75, 2.0] {
        let c = dilation_sweep(&p, &AlphaWeight::new(alpha), &default_r_grid(10)).unwrap();
        let tail = &c.norm_sq_values[3..];
        assert!(tail.windows(2).all(|v| v[1] >= 0.99 * v[0]), "{alpha}: {tail:?}");
    }
}

#[test]
fn dilation_shift_check_holds_along_the_sweep() {
    let p = parse_poly("(1-z)*(1-w)").unwrap();
    for alpha in [1.0, 2.0] {
        let aw = AlphaWeight::new(alpha);
        for r in default_r_grid(6) {
            let d = dirichlet_ball::dilation::dilation_norm(&p, r, &aw, 1e-10).unwrap();
            assert!(d.shift_mismatch() < 1e-9, "alpha {alpha}, r {r}: {}", d.shift_mismatch());
        }
    }
}
