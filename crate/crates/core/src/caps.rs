//! Per-plan transfer caps under the zero-sum identity.
//!
//! A plan's transfer of size `x` must be offset by the other plans:
//! `s_i x = -sum_{j != i} s_j T_j`, and the most the others can offset is
//! `sum_{j != i} s_j c_j` with every one of them at its cap. So the largest
//! reachable `|T_i|` is `min(c_i, sum_{j != i} s_j c_j / s_i)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{validate_caps, MarketShares};
use crate::simulation::TransferDraw;

/// Absolute gap below which an effective cap counts as equal to its nominal cap.
pub const BINDING_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapReport {
    pub nominal_caps: Vec<f64>,
    pub effective_caps: Vec<f64>,
    pub binding: Vec<bool>,
}

pub fn effective_caps(shares: &MarketShares, nominal_caps: &[f64]) -> Result<CapReport> {
    let caps = validate_caps(nominal_caps, shares.len())?;
    let s = shares.shares();
    let effective: Vec<f64> = (0..s.len())
        .map(|i| {
            let others: f64 = (0..s.len()).filter(|&j| j != i).map(|j| s[j] * caps[j]).sum();
            caps[i].min(others / s[i])
        })
        .collect();
    let binding = effective
        .iter()
        .zip(&caps)
        .map(|(e, c)| *e < c - BINDING_TOLERANCE)
        .collect();
    Ok(CapReport {
        nominal_caps: caps,
        effective_caps: effective,
        binding,
    })
}

/// Builds a transfer vector showing that magnitudes are unbounded once three
/// or more plans are present: `fixed_plan` is held at `fixed_transfer`,
/// `free_plan` is set to `magnitude` (any sign), other non-focal plans are 0
/// and the focal plan balances.
pub fn unboundedness_demo(
    shares: &MarketShares,
    fixed_plan: usize,
    fixed_transfer: f64,
    free_plan: usize,
    magnitude: f64,
) -> Result<TransferDraw> {
    let n = shares.len();
    let focal = shares.focal_index();
    if n < 3 {
        return Err(Error::Index(format!("need at least 3 plans, got {n}")));
    }
    if fixed_plan >= n || free_plan >= n {
        return Err(Error::Index(format!(
            "plan indices {fixed_plan}, {free_plan} out of range for {n} plans"
        )));
    }
    if fixed_plan == free_plan || fixed_plan == focal || free_plan == focal {
        return Err(Error::Index(format!(
            "fixed ({fixed_plan}), free ({free_plan}) and focal ({focal}) plans must be distinct"
        )));
    }
    if !fixed_transfer.is_finite() || !magnitude.is_finite() {
        return Err(Error::Value("transfers must be finite".into()));
    }
    let s = shares.shares();
    let mut t = vec![0.0; n];
    t[fixed_plan] = fixed_transfer;
    t[free_plan] = magnitude;
    t[focal] = -(s[fixed_plan] * fixed_transfer + s[free_plan] * magnitude) / s[focal];
    Ok(TransferDraw { transfers: t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn shares(v: &[f64]) -> MarketShares {
        MarketShares::new(v.to_vec(), None).unwrap()
    }

    #[test]
    fn two_plan_cap_example() {
        let r = effective_caps(&shares(&[0.2, 0.8]), &[0.5, 0.5]).unwrap();
        assert!((r.effective_caps[0] - 0.5).abs() <= 1e-12);
        assert!((r.effective_caps[1] - 0.125).abs() <= 1e-12);
        assert_eq!(r.binding, vec![false, true]);
    }

    #[test]
    fn symmetric_caps_do_not_bind() {
        let r = effective_caps(&shares(&[0.5, 0.5]), &[0.5, 0.5]).unwrap();
        assert_eq!(r.effective_caps, vec![0.5, 0.5]);
        assert_eq!(r.binding, vec![false, false]);
    }

    #[test]
    fn three_plan_caps() {
        let r = effective_caps(&shares(&[0.90, 0.06, 0.04]), &[0.5, 0.5, 0.5]).unwrap();
        assert!((r.effective_caps[0] - 0.5 * 0.1 / 0.9).abs() < 1e-12);
        assert_eq!(&r.effective_caps[1..], &[0.5, 0.5]);
        assert_eq!(r.binding, vec![true, false, false]);
    }

    #[test]
    fn cap_errors() {
        let s = shares(&[0.5, 0.5]);
        assert_eq!(effective_caps(&s, &[0.5, -0.1]).unwrap_err().code(), "value");
        assert_eq!(effective_caps(&s, &[0.5]).unwrap_err().code(), "dimension");
    }

    #[test]
    fn zero_caps_elsewhere_force_zero() {
        let r = effective_caps(&shares(&[0.3, 0.3, 0.4]), &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(r.effective_caps, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn demo_equal_shares() {
        let s = shares(&[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        for m in [1.0, -7.5, 1e9] {
            let d = unboundedness_demo(&s, 0, 0.0, 1, m).unwrap();
            assert_eq!(d.transfers, vec![0.0, m, -m]);
            assert!(d.zero_sum_violation(&s) <= 1e-10);
        }
    }

    #[test]
    fn demo_paper_shares() {
        let s = shares(&[0.9, 0.06, 0.04]);
        let d = unboundedness_demo(&s, 0, 0.1, 1, 100.0).unwrap();
        assert!((d.transfers[2] - -152.25).abs() < 1e-9);
        let d2 = unboundedness_demo(&s, 0, 0.1, 1, 200.0).unwrap();
        // affine in the magnitude: the focal shift doubles
        let base = unboundedness_demo(&s, 0, 0.1, 1, 0.0).unwrap().transfers[2];
        let shift1 = d.transfers[2] - base;
        let shift2 = d2.transfers[2] - base;
        assert!((shift2 - 2.0 * shift1).abs() < 1e-9);
    }

    #[test]
    fn demo_index_errors() {
        let s = shares(&[0.9, 0.06, 0.04]);
        assert_eq!(unboundedness_demo(&s, 0, 0.0, 0, 1.0).unwrap_err().code(), "index");
        assert_eq!(unboundedness_demo(&s, 2, 0.0, 1, 1.0).unwrap_err().code(), "index");
        assert_eq!(unboundedness_demo(&s, 0, 0.0, 5, 1.0).unwrap_err().code(), "index");
        assert_eq!(unboundedness_demo(&shares(&[0.5, 0.5]), 0, 0.0, 1, 1.0).unwrap_err().code(), "index");
    }

    proptest! {
        #[test]
        fn positively_homogeneous(w in prop::collection::vec(0.05f64..1.0, 2..6),
                                  c in prop::collection::vec(0.0f64..1.0, 6),
                                  k in 0.1f64..10.0) {
            let t: f64 = w.iter().sum();
            let s = MarketShares::new(w.iter().map(|x| x / t).collect(), None).unwrap();
            let caps = &c[..s.len()];
            let scaled: Vec<f64> = caps.iter().map(|x| x * k).collect();
            let a = effective_caps(&s, caps).unwrap();
            let b = effective_caps(&s, &scaled).unwrap();
            for (x, y) in a.effective_caps.iter().zip(&b.effective_caps) {
                prop_assert!((x * k - y).abs() <= 1e-12 * y.abs().max(1.0));
            }
            for (e, n) in a.effective_caps.iter().zip(caps) {
                prop_assert!(*e >= 0.0 && e <= n);
            }
        }

        #[test]
        fn two_plan_reduces_to_ratio(s1 in 0.01f64..0.99, c1 in 0.0f64..1.0, c2 in 0.0f64..1.0) {
            let s = MarketShares::new(vec![s1, 1.0 - s1], None).unwrap();
            let r = effective_caps(&s, &[c1, c2]).unwrap();
            let sh = s.shares();
            prop_assert_eq!(r.effective_caps[1], c2.min(sh[0] * c1 / sh[1]));
        }

        #[test]
        fn demo_always_balances(m in -1e6f64..1e6, t1 in -10.0f64..10.0) {
            let s = MarketShares::new(vec![0.5, 0.3, 0.15, 0.05], None).unwrap();
            let d = unboundedness_demo(&s, 0, t1, 2, m).unwrap();
            prop_assert!(d.zero_sum_violation(&s) <= 1e-10);
        }
    }
}
