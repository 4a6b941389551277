//! Hinge-sum implausibility over prior predictive p-values.

use alloc::format;
use alloc::vec::Vec;

use crate::domain::{CheckKind, CheckOutcome, ConstraintSet, HyperPoint, ImplausibilityResult, PValueEstimate};
use crate::error::{Error, Result};

/// Scores `lambda` from one p-value per constraint.
///
/// `I = sum max(0, p_I - alpha) + sum max(0, alpha - p_P)`. P-values are matched
/// to checks by `(summary, kind, index)`, so their order does not matter.
pub fn implausibility(
    lambda: HyperPoint,
    pvalues: &[PValueEstimate],
    constraints: &ConstraintSet,
) -> Result<ImplausibilityResult> {
    let checks = constraints.checks();
    if checks.len() != pvalues.len() {
        return Err(Error::Structural(format!(
            "{} constraints but {} p-values",
            checks.len(),
            pvalues.len()
        )));
    }
    let mut outcomes = Vec::with_capacity(checks.len());
    let mut total = 0.0;
    let mut boundary = false;
    for check in &checks {
        let mut matching = pvalues
            .iter()
            .filter(|p| p.summary == check.summary && p.kind == check.kind && p.index == check.index);
        let p = match (matching.next(), matching.next()) {
            (Some(p), None) => *p,
            (None, _) => {
                return Err(Error::Structural(format!(
                    "no p-value for summary {} {:?} #{}",
                    check.summary, check.kind, check.index
                )))
            }
            (Some(_), Some(_)) => {
                return Err(Error::Structural(format!(
                    "duplicate p-values for summary {} {:?} #{}",
                    check.summary, check.kind, check.index
                )))
            }
        };
        if !(0.0..=1.0).contains(&p.estimate) {
            return Err(Error::Structural(format!("p-value {} outside [0, 1]", p.estimate)));
        }
        let (penalty, holds) = match check.kind {
            CheckKind::Implausible => ((p.estimate - check.alpha).max(0.0), p.estimate < check.alpha),
            CheckKind::Plausible => ((check.alpha - p.estimate).max(0.0), p.estimate >= check.alpha),
        };
        boundary |= check.kind == CheckKind::Implausible && p.estimate == check.alpha;
        total += penalty;
        outcomes.push(CheckOutcome { pvalue: p, alpha: check.alpha, penalty, holds });
    }
    Ok(ImplausibilityResult { lambda, outcomes, implausibility: total, boundary })
}

/// Every check holds, with the strict inequality for implausible values.
pub fn satisfies(result: &ImplausibilityResult) -> bool {
    result.outcomes.iter().all(|o| o.holds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::SummaryConstraint;
    use alloc::vec;
    use proptest::prelude::*;

    fn pv(summary: usize, kind: CheckKind, index: usize, estimate: f64) -> PValueEstimate {
        PValueEstimate { summary, kind, index, value: 0.0, estimate, samples: 1000 }
    }

    fn point() -> HyperPoint {
        HyperPoint::new(vec![1.0]).unwrap()
    }

    fn set(implausible: usize, plausible: usize, alpha: f64) -> ConstraintSet {
        ConstraintSet::new(vec![SummaryConstraint {
            summary: 0,
            implausible: vec![0.0; implausible],
            plausible: vec![1.0; plausible],
            alpha,
        }])
        .unwrap()
    }

    #[test]
    fn maximally_satisfied_is_zero() {
        let c = set(2, 2, 0.05);
        let p = [
            pv(0, CheckKind::Implausible, 0, 0.0),
            pv(0, CheckKind::Implausible, 1, 0.0),
            pv(0, CheckKind::Plausible, 0, 1.0),
            pv(0, CheckKind::Plausible, 1, 1.0),
        ];
        let r = implausibility(point(), &p, &c).unwrap();
        assert_eq!(r.implausibility, 0.0);
        assert!(satisfies(&r));
    }

    #[test]
    fn single_implausible_excess() {
        let r = implausibility(point(), &[pv(0, CheckKind::Implausible, 0, 0.25)], &set(1, 0, 0.05)).unwrap();
        assert!((r.implausibility - 0.20).abs() < 1e-15);
        assert!(!satisfies(&r));
    }

    #[test]
    fn both_hinges_add() {
        let p = [pv(0, CheckKind::Implausible, 0, 0.10), pv(0, CheckKind::Plausible, 0, 0.01)];
        let r = implausibility(point(), &p, &set(1, 1, 0.05)).unwrap();
        assert!((r.implausibility - 0.09).abs() < 1e-15);
    }

    #[test]
    fn implausible_at_cutoff_fails_without_penalty() {
        let r = implausibility(point(), &[pv(0, CheckKind::Implausible, 0, 0.05)], &set(1, 0, 0.05)).unwrap();
        assert_eq!(r.implausibility, 0.0);
        assert!(r.boundary);
        assert!(!satisfies(&r));
    }

    #[test]
    fn plausible_at_cutoff_holds() {
        let r = implausibility(point(), &[pv(0, CheckKind::Plausible, 0, 0.05)], &set(0, 1, 0.05)).unwrap();
        assert_eq!(r.implausibility, 0.0);
        assert!(!r.boundary);
        assert!(satisfies(&r));
    }

    #[test]
    fn count_mismatch_is_structural() {
        let err = implausibility(point(), &[], &set(1, 0, 0.05)).unwrap_err();
        assert!(matches!(err, Error::Structural(_)));
        let wrong_key = [pv(0, CheckKind::Plausible, 0, 0.5)];
        assert!(matches!(
            implausibility(point(), &wrong_key, &set(1, 0, 0.05)).unwrap_err(),
            Error::Structural(_)
        ));
    }

    fn arb_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
        (
            prop::collection::vec(0.0..=1.0f64, 0..4),
            prop::collection::vec(0.0..=1.0f64, 0..4),
            0.01..0.5f64,
        )
            .prop_filter("at least one check", |(a, b, _)| a.len() + b.len() > 0)
    }

    fn evaluate(imp: &[f64], pla: &[f64], alpha: f64) -> ImplausibilityResult {
        let c = set(imp.len(), pla.len(), alpha);
        let mut p: Vec<_> = imp.iter().enumerate().map(|(i, &e)| pv(0, CheckKind::Implausible, i, e)).collect();
        p.extend(pla.iter().enumerate().map(|(i, &e)| pv(0, CheckKind::Plausible, i, e)));
        implausibility(point(), &p, &c).unwrap()
    }

    proptest! {
        #[test]
        fn monotone_in_each_pvalue((imp, pla, alpha) in arb_case(), bump in 0.0..0.5f64, which in 0usize..8) {
            let base = evaluate(&imp, &pla, alpha).implausibility;
            let total = imp.len() + pla.len();
            let k = which % total;
            let (mut imp2, mut pla2) = (imp.clone(), pla.clone());
            if k < imp.len() {
                imp2[k] = (imp2[k] + bump).min(1.0);
                prop_assert!(evaluate(&imp2, &pla2, alpha).implausibility >= base);
            } else {
                let j = k - imp.len();
                pla2[j] = (pla2[j] + bump).min(1.0);
                prop_assert!(evaluate(&imp2, &pla2, alpha).implausibility <= base);
            }
        }

        #[test]
        fn order_of_pvalues_is_irrelevant((imp, pla, alpha) in arb_case(), seed in any::<u64>()) {
            let c = set(imp.len(), pla.len(), alpha);
            let mut p: Vec<_> = imp.iter().enumerate().map(|(i, &e)| pv(0, CheckKind::Implausible, i, e)).collect();
            p.extend(pla.iter().enumerate().map(|(i, &e)| pv(0, CheckKind::Plausible, i, e)));
            let a = implausibility(point(), &p, &c).unwrap().implausibility;
            let n = p.len();
            p.rotate_left((seed as usize) % n);
            p.reverse();
            let b = implausibility(point(), &p, &c).unwrap().implausibility;
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn bounded_and_zero_iff_satisfied_off_boundary((imp, pla, alpha) in arb_case()) {
            let r = evaluate(&imp, &pla, alpha);
            let c = set(imp.len(), pla.len(), alpha);
            prop_assert!(r.implausibility >= 0.0);
            prop_assert!(r.implausibility <= c.max_implausibility() + 1e-12);
            if !r.boundary {
                prop_assert_eq!(r.implausibility == 0.0, satisfies(&r));
            }
        }
    }
}
