use super::*;
use crate::election::ElectorConfig;
use crate::sim::config::ExecutionConfig;
use crate::sim::run;
use crate::types::PartyId;

fn happy(n: usize, horizon: u64) -> Trace {
    run(&ExecutionConfig::new(n, ElectorConfig::carousel(), horizon, 3)).unwrap()
}

#[test]
fn happy_path_passes_everything() {
    let t = happy(4, 40);
    let report = verify(&t);
    assert!(report.passed(), "{:?}", report.failures().collect::<Vec<_>>());
    assert_eq!(report.metrics.skipped_round_count, 0);
    assert_eq!(report.metrics.commits_per_round, 1.0);
    assert_eq!(report.metrics.honest_block_ratio, 1.0);
    assert_eq!(report.metrics.chain_quality_worst_window, 1);
    for (k, v) in &report.verdicts {
        assert!(v.is_pass(), "{k}: {v:?}");
    }
}

#[test]
fn forged_endorser_fails_reputation() {
    let mut c = ExecutionConfig::new(4, ElectorConfig::carousel(), 10, 3);
    c.faults.crash(PartyId(3), crate::types::RoundNumber(2)).unwrap();
    let t = run(&c).unwrap();
    assert!(check_lbr_properties(&t)["lbr_reputation"].is_pass());
    let forged = fixtures::forge_endorser(&t).expect("a certificate without party 3");
    let v = &check_lbr_properties(&forged)["lbr_reputation"];
    assert!(v.is_fail(), "{v:?}");
}

#[test]
fn out_of_order_notification_fails_pacemaker() {
    let t = happy(4, 10);
    let forged = fixtures::swap_notifications(&t, PartyId(1)).unwrap();
    assert!(check_pacemaker(&forged)["pacemaker_order"].is_fail());
}

#[test]
fn late_return_fails_termination() {
    let t = happy(4, 10);
    let forged = fixtures::delay_return(&t).unwrap();
    assert!(check_lbr_properties(&forged)["lbr_termination"].is_fail());
}

#[test]
fn fork_fails_agreement_with_both_commits() {
    let t = happy(4, 10);
    let forged = fixtures::forge_fork(&t).unwrap();
    match check_agreement(&forged) {
        Verdict::Fail { events, .. } => {
            assert_eq!(events.len(), 2);
            for i in events {
                assert_eq!(forged.events[i].kind(), "commit");
            }
        }
        other => panic!("expected failure, got {other:?}"),
    }
}

#[test]
fn byzantine_trace_skips_utilization() {
    let mut c = ExecutionConfig::new(4, ElectorConfig::carousel(), 20, 1);
    c.faults.byzantine.insert(PartyId(2));
    let t = run(&c).unwrap();
    assert!(matches!(check_leader_utilization(&t), Verdict::NotApplicable { .. }));
    assert!(verify(&t).passed());
}

#[test]
fn fail_verdicts_always_point_somewhere() {
    assert!(matches!(Verdict::fail(vec![], 7, "x"), Verdict::Fail { ref events, .. } if events == &vec![7]));
}
