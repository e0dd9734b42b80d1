//! Randomized checks that cut across modules.

use proptest::prelude::*;

use crate::baseline::solve_state0;
use crate::coalition::{distribute, pcp_weights, synthesize_uniform_traffic};
use crate::cooperation::{nash_bargaining_split, transfer};
use crate::model::{AccelerationFit, FunctionFamily, MarketParameters, TrafficProfile};
use crate::scenario::Range;
use crate::spne::evaluate_transitions;
use crate::states::{solve_state1, solve_state2, P2PContext, StateOutcome};
use crate::sweep::{read_table, run_sweep, COOPERATION};
use crate::{run_pipeline, Scenario, UtilityPair};

fn states(family: &FunctionFamily, alpha: f64, beta: f64) -> [StateOutcome; 3] {
    let params = MarketParameters::reference();
    let eq = solve_state0(&params, family).unwrap();
    let profile = TrafficProfile::new(alpha, beta).unwrap();
    let ctx = P2PContext::new(params, family.clone(), eq, profile, &AccelerationFit::default()).unwrap();
    [
        StateOutcome::baseline(&eq),
        solve_state1(&ctx).unwrap(),
        solve_state2(&ctx).unwrap(),
    ]
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn scaling_keeps_volumes_and_profile(k in 0.2f64..5.0, alpha in 0.3f64..0.9, beta in 0.05f64..0.5) {
        let base = FunctionFamily::reference(100.0);
        let a = states(&base, alpha, beta);
        let b = states(&base.scaled(k), alpha, beta);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(close(x.v_p2p, y.v_p2p, 1e-6));
            prop_assert!(close(k * x.utilities.isp, y.utilities.isp, 1e-6));
            prop_assert!(close(k * x.utilities.cp, y.utilities.cp, 1e-6));
            prop_assert!(close(k * x.utilities.user, y.utilities.user, 1e-6));
        }
        let ta = evaluate_transitions(&a[0], &a[1], &a[2]);
        let tb = evaluate_transitions(&b[0], &b[1], &b[2]);
        prop_assert_eq!(ta.spne.profile, tb.spne.profile);
        prop_assert_eq!(ta.final_state, tb.final_state);
    }

    #[test]
    fn flat_pricing_stops_at_the_kink(alpha in 0.3f64..0.9, beta in 0.05f64..0.5) {
        let [s0, s1, s2] = states(&FunctionFamily::reference(100.0), alpha, beta);
        let params = MarketParameters::reference();
        let eq = solve_state0(&params, &FunctionFamily::reference(100.0)).unwrap();
        let profile = TrafficProfile::new(alpha, beta).unwrap();
        let ctx = P2PContext::new(params, FunctionFamily::reference(100.0), eq, profile, &AccelerationFit::default()).unwrap();
        prop_assert!(close(s1.v_p2p, ctx.v_tilde, 1e-9));
        prop_assert!(s1.v_p2p > s0.v_p2p.max(eq.v_star));
        prop_assert!(s2.v_p2p < s1.v_p2p);
    }
}

proptest! {
    #[test]
    fn bargaining_sits_on_the_frontier(isp in -5.0f64..20.0, cp in -5.0f64..20.0, surplus in 0.0f64..30.0) {
        let start = UtilityPair::new(isp, cp);
        let total = start.total() + surplus;
        let split = nash_bargaining_split(total, start).unwrap();
        prop_assert!(close(split.total(), total, 1e-12));
        prop_assert!(close(split.isp - isp, split.cp - cp, 1e-12));
        let r = transfer(UtilityPair::new(total / 3.0, 2.0 * total / 3.0), split).unwrap();
        prop_assert!(close(r, split.isp - total / 3.0, 1e-12));
    }

    #[test]
    fn identical_pcps_pay_alike(counts in prop::collection::vec(0.5f64..20.0, 1..5), sigma in 0.01f64..5.0, beta in 0.0f64..1.0, r in -10.0f64..10.0) {
        let traffic = synthesize_uniform_traffic(&counts, &[sigma, sigma, 0.0], beta).unwrap();
        let v: f64 = traffic.iter().map(|t| t.total()).sum();
        let phi = pcp_weights(&traffic, v).unwrap();
        prop_assert!(phi.warnings.is_empty());
        let m = counts.len();
        let psi = vec![1.0 / m as f64; m];
        let l = distribute(r, &phi.value, &psi).unwrap();
        prop_assert!(close(l.pcp_payments[0], l.pcp_payments[1], 1e-12));
        prop_assert_eq!(l.pcp_payments[2], 0.0);
        prop_assert!(close(l.pcp_payments.iter().sum::<f64>(), r, 1e-12));
        prop_assert!(close(l.isp_receipts.iter().sum::<f64>(), r, 1e-12));
    }
}

fn small_sweep() -> Scenario {
    let mut s = Scenario::default();
    s.sweep.alpha = Range::new(0.4, 0.8, 2).unwrap();
    s.sweep.beta = Range::new(0.1, 0.4, 2).unwrap();
    s.sweep.gamma_steps = 6;
    s
}

#[test]
fn sweep_files_are_deterministic() {
    let s = small_sweep();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let fa = run_sweep(&s).write_all(a.path()).unwrap();
    let fb = run_sweep(&s).write_all(b.path()).unwrap();
    assert_eq!(fa.len(), fb.len());
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{}", x.display());
    }
}

#[test]
fn sweep_rows_recompute() {
    let s = small_sweep();
    let dir = tempfile::tempdir().unwrap();
    run_sweep(&s).write_all(dir.path()).unwrap();
    let (header, rows) = read_table(&dir.path().join(COOPERATION)).unwrap();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    for row in rows.iter().step_by(3) {
        let alpha: f64 = row[col("alpha")].parse().unwrap();
        let beta: f64 = row[col("beta")].parse().unwrap();
        let cell = Scenario {
            profile: TrafficProfile::new(alpha, beta).unwrap(),
            ..s.clone()
        };
        let co = run_pipeline(&cell).unwrap().cooperation.unwrap();
        assert_eq!(row[col("gamma_pcp")], format!("{:.6}", co.discounts.gamma_pcp));
        assert_eq!(row[col("u_total")], format!("{:.6}", co.u_total_s3));
        assert_eq!(row[col("transfer_r")], format!("{:.6}", co.transfer_r));
    }
}
