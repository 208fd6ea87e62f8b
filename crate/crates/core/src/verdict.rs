//! Cyclicity of a polynomial in `D_α(B₂)` from its zero set.
//!
//! | zero set          | α ≤ 3/2 | 3/2 < α ≤ 2 | α > 2 |
//! |-------------------|---------|-------------|-------|
//! | meets open ball   | no      | no          | no    |
//! | empty on sphere   | yes     | yes         | yes   |
//! | finite on sphere  | yes     | yes         | no    |
//! | curve on sphere   | yes     | no          | no    |
//!
//! Numerical evidence can be attached to a verdict but never changes it.

use serde::Serialize;

use crate::boundary::{classify_zero_set_with, ClassifyOptions, ZeroSetClass, ZeroSetReport};
use crate::capacity::{capacity_scan, CapacityReport, SupportSet};
use crate::dalpha::AlphaWeight;
use crate::dilation::{default_r_grid, dilation_sweep, DilationCurve};
use crate::error::{Error, Result};
use crate::opa::{opa_curve, OpaCurve};
use crate::poly2::Poly2;

pub const REDUCIBILITY_NOTE: &str = "reducibility not verified";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Cyclicity {
    Yes,
    No,
    NotApplicable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    #[serde(rename = "alpha_le_3_2")]
    AlphaLe32,
    FiniteBoundaryZeros,
    EmptyBoundaryZeros,
    #[serde(rename = "curve_and_alpha_gt_3_2")]
    CurveAndAlphaGt32,
    BoundaryZerosAndAlphaGt2,
    VanishesInBall,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::AlphaLe32 => "alpha_le_3_2",
            Rule::FiniteBoundaryZeros => "finite_boundary_zeros",
            Rule::EmptyBoundaryZeros => "empty_boundary_zeros",
            Rule::CurveAndAlphaGt32 => "curve_and_alpha_gt_3_2",
            Rule::BoundaryZerosAndAlphaGt2 => "boundary_zeros_and_alpha_gt_2",
            Rule::VanishesInBall => "vanishes_in_ball",
        }
    }
}

/// The decision table. Thresholds are inclusive on the `≤` side.
pub fn decide(class: ZeroSetClass, alpha: f64) -> (Cyclicity, Rule) {
    use Cyclicity::*;
    match class {
        ZeroSetClass::InteriorZero => (No, Rule::VanishesInBall),
        _ if alpha <= 1.5 => (Yes, Rule::AlphaLe32),
        ZeroSetClass::Empty => (Yes, Rule::EmptyBoundaryZeros),
        ZeroSetClass::Finite if alpha <= 2.0 => (Yes, Rule::FiniteBoundaryZeros),
        ZeroSetClass::Curve if alpha <= 2.0 => (No, Rule::CurveAndAlphaGt32),
        ZeroSetClass::Finite | ZeroSetClass::Curve => (No, Rule::BoundaryZerosAndAlphaGt2),
    }
}

/// Optional numerical cross-checks attached to a verdict.
#[derive(Clone, Debug, Default)]
pub struct Advisory {
    /// Largest OPA degree; `None` skips the OPA curve.
    pub opa_degree: Option<u32>,
    /// Dilation sweep over `r = 1 - 2^{-k}`, `k = 1..=k_max`.
    pub dilation_k_max: Option<u32>,
    /// Capacity scan grid, used only for curves and `α ∈ (0, 2]`.
    pub capacity_grid: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Evidence {
    pub zero_set: Option<ZeroSetReport>,
    pub opa: Option<OpaCurve>,
    pub dilation: Option<DilationCurve>,
    pub capacity: Option<CapacityReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub p: Poly2,
    pub alpha: f64,
    pub cyclic: Cyclicity,
    pub rule: Rule,
    pub notes: Vec<String>,
    pub evidence: Evidence,
}

pub fn classify(p: &Poly2, alpha: f64) -> Result<Verdict> {
    classify_with(p, alpha, &ClassifyOptions::default(), &Advisory::default())
}

/// Classifies `p` and attaches whatever `advisory` asks for.
///
/// Errors in advisory computations become notes; only zero-set failures,
/// including [`Error::Inconclusive`], are returned.
pub fn classify_with(p: &Poly2, alpha: f64, opts: &ClassifyOptions, advisory: &Advisory) -> Result<Verdict> {
    if !alpha.is_finite() {
        return Err(Error::ParameterOutOfRange(format!("alpha = {alpha}")));
    }
    let mut notes = vec![REDUCIBILITY_NOTE.to_string()];
    if p.is_zero() {
        notes.push("the zero polynomial is not a candidate for cyclicity".into());
        return Ok(Verdict {
            p: p.clone(),
            alpha,
            cyclic: Cyclicity::NotApplicable,
            rule: Rule::VanishesInBall,
            notes,
            evidence: Evidence::default(),
        });
    }
    let zeros = classify_zero_set_with(p, opts)?;
    let (cyclic, rule) = decide(zeros.class, alpha);
    let mut evidence = Evidence::default();
    let aw = AlphaWeight::new(alpha);
    if let Some(n) = advisory.opa_degree {
        match opa_curve(p, &aw, n) {
            Ok(c) => evidence.opa = Some(c),
            Err(e) => notes.push(format!("opa: {e}")),
        }
    }
    if let Some(k) = advisory.dilation_k_max {
        match dilation_sweep(p, &aw, &default_r_grid(k)) {
            Ok(c) => evidence.dilation = Some(c),
            Err(e) => notes.push(format!("dilation: {e}")),
        }
    }
    if let Some(grid) = &advisory.capacity_grid {
        if zeros.class == ZeroSetClass::Curve && alpha > 0.0 && alpha <= 2.0 {
            match capacity_scan(&SupportSet::Curve(zeros.points.clone()), alpha, grid) {
                Ok(c) => evidence.capacity = Some(c),
                Err(e) => notes.push(format!("capacity: {e}")),
            }
        }
    }
    evidence.zero_set = Some(zeros);
    Ok(Verdict {
        p: p.clone(),
        alpha,
        cyclic,
        rule,
        notes,
        evidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_poly;

    const CLASSES: [ZeroSetClass; 4] = [
        ZeroSetClass::Empty,
        ZeroSetClass::Finite,
        ZeroSetClass::Curve,
        ZeroSetClass::InteriorZero,
    ];

    #[test]
    fn table_rules_match_their_conditions() {
        let alphas = [-3.0, 0.0, 1.0, 1.5, 1.5000001, 1.75, 2.0, 2.0000001, 3.0, 10.0];
        for class in CLASSES {
            for alpha in alphas {
                let (cyclic, rule) = decide(class, alpha);
                let consistent = match rule {
                    Rule::VanishesInBall => class == ZeroSetClass::InteriorZero && cyclic == Cyclicity::No,
                    Rule::AlphaLe32 => alpha <= 1.5 && cyclic == Cyclicity::Yes,
                    Rule::EmptyBoundaryZeros => class == ZeroSetClass::Empty && cyclic == Cyclicity::Yes,
                    Rule::FiniteBoundaryZeros => {
                        class == ZeroSetClass::Finite && alpha <= 2.0 && cyclic == Cyclicity::Yes
                    }
                    Rule::CurveAndAlphaGt32 => {
                        class == ZeroSetClass::Curve && alpha > 1.5 && alpha <= 2.0 && cyclic == Cyclicity::No
                    }
                    Rule::BoundaryZerosAndAlphaGt2 => {
                        matches!(class, ZeroSetClass::Finite | ZeroSetClass::Curve)
                            && alpha > 2.0
                            && cyclic == Cyclicity::No
                    }
                };
                assert!(consistent, "{class:?} {alpha} -> {rule:?}");
            }
        }
    }

    #[test]
    fn every_rule_is_reachable() {
        let mut seen = std::collections::HashSet::new();
        for class in CLASSES {
            for alpha in [1.0, 1.75, 2.5] {
                seen.insert(decide(class, alpha).1);
            }
        }
        assert_eq!(seen.len(), 6);
    }

    #[test]
    fn examples() {
        let p = parse_poly("1-2*z*w").unwrap();
        let v = classify(&p, 1.5).unwrap();
        assert_eq!((v.cyclic, v.rule), (Cyclicity::Yes, Rule::AlphaLe32));
        assert!(v.notes.iter().any(|n| n == REDUCIBILITY_NOTE));
        let v = classify(&p, 1.6).unwrap();
        assert_eq!((v.cyclic, v.rule), (Cyclicity::No, Rule::CurveAndAlphaGt32));

        let p = parse_poly("1-z").unwrap();
        assert_eq!(classify(&p, 2.0).unwrap().cyclic, Cyclicity::Yes);
        assert_eq!(classify(&p, 2.1).unwrap().rule, Rule::BoundaryZerosAndAlphaGt2);

        let v = classify(&parse_poly("z").unwrap(), 0.5).unwrap();
        assert_eq!((v.cyclic, v.rule), (Cyclicity::No, Rule::VanishesInBall));

        let v = classify(&Poly2::zero(), 1.0).unwrap();
        assert_eq!(v.cyclic, Cyclicity::NotApplicable);
        assert!(classify(&Poly2::constant(1.0), f64::NAN).is_err());
    }

    #[test]
    fn advisory_never_changes_the_verdict() {
        let p = parse_poly("1-z").unwrap();
        let advisory = Advisory {
            opa_degree: Some(8),
            dilation_k_max: Some(4),
            capacity_grid: Some(vec![16, 32]),
        };
        let v = classify_with(&p, 2.0, &ClassifyOptions::default(), &advisory).unwrap();
        assert_eq!(v.cyclic, Cyclicity::Yes);
        assert!(v.evidence.opa.is_some() && v.evidence.dilation.is_some());
        assert!(v.evidence.capacity.is_none());
        let json = serde_json::to_value(&v).unwrap();
        assert_eq!(json["rule"], "finite_boundary_zeros");
        assert_eq!(json["cyclic"], "yes");
    }
}
