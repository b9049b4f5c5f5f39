use super::*;
use crate::metrics::{audit_trace, replay_totals};
use crate::policy::PolicySpec;
use crate::units::{NodeId, Topology};

fn seven_node() -> Topology {
    Topology::from_db(&[-15.0, -15.0, -15.0, -33.0, -33.0, -40.0, -40.0], 5.0, -45.0).unwrap()
}

fn audit(out: &RunOutput) {
    for (trace, stats) in out.traces.iter().zip(&out.stats) {
        if !trace.ages.is_empty() {
            audit_trace(trace, out.horizon).unwrap();
        }
        assert_eq!(replay_totals(&trace.deliveries, out.horizon, out.warmup).unwrap(), stats.age);
    }
}

#[test]
fn lone_node_delivers_every_slot() {
    let t = Topology::from_db(&[-20.0], 5.0, -45.0).unwrap();
    let out = run(SimConfig::saturated(t, PolicySpec::WiFairPf { cws: vec![0] }, 1000, 1)).unwrap();
    audit(&out);
    assert_eq!(out.stats[0].deliveries, 1000);
    assert!(out.traces[0].ages.iter().all(|&a| a == 1));
}

#[test]
fn zero_horizon_is_empty() {
    let out = run(SimConfig::saturated(seven_node(), PolicySpec::Dcf80211 { initial_cw: 16 }, 0, 1)).unwrap();
    assert!(out.traces.iter().all(|t| t.ages.is_empty() && t.deliveries.is_empty()));
    assert!(out.summary.is_none());
}

#[test]
fn runs_are_deterministic() {
    let mk = || {
        let mut cfg = SimConfig::saturated(seven_node(), PolicySpec::Dcf80211 { initial_cw: 8 }, 20_000, 77);
        cfg.sampler = SamplerKind::Fpga;
        run(cfg).unwrap()
    };
    let (a, b) = (mk(), mk());
    assert_eq!(a.traces, b.traces);
    assert_eq!(a.events, b.events);
    assert_eq!(a.summary, b.summary);
}

#[test]
fn symmetric_bernoulli_pair_matches_closed_form() {
    let t = Topology::from_db(&[-20.0, -20.0], 0.0, -45.0).unwrap();
    let mut cfg = SimConfig::saturated(t, PolicySpec::FixedBernoulli { p: vec![0.5, 0.5] }, 1_000_000, 3);
    cfg.record = RecordLevel::Summary;
    let out = run(cfg).unwrap();
    audit(&out);
    for node in &out.summary.unwrap().nodes {
        assert!((node.mean_age - 8.0 / 3.0).abs() < 0.01 * 8.0 / 3.0, "{}", node.mean_age);
    }
}

#[test]
fn saturated_backoff_spacing() {
    for cw in [0u16, 2, 7] {
        let t = Topology::from_db(&[-20.0], 5.0, -45.0).unwrap();
        let mut cfg = SimConfig::saturated(t, PolicySpec::WiFairTa { cws: vec![cw] }, 400_000, 8);
        cfg.record = RecordLevel::Summary;
        let out = run(cfg).unwrap();
        let log = &out.traces[0].deliveries;
        let gaps = (log.last().unwrap().slot - log[0].slot) as f64 / (log.len() - 1) as f64;
        let expected = cw as f64 / 2.0 + 1.0;
        assert!((gaps - expected).abs() < 0.01 * expected, "cw {cw}: {gaps}");
    }
}

#[test]
fn baseline_starves_far_ring() {
    let mut cfg = SimConfig::saturated(seven_node(), PolicySpec::Dcf80211 { initial_cw: 8 }, 200_000, 21);
    cfg.record = RecordLevel::Summary;
    let s = run(cfg).unwrap().summary.unwrap();
    let near = (s.nodes[0].mean_age + s.nodes[1].mean_age + s.nodes[2].mean_age) / 3.0;
    let far = (s.nodes[5].mean_age + s.nodes[6].mean_age) / 2.0;
    assert!(far >= 2.0 * near, "near {near} far {far}");
}

#[test]
fn fcfs_conserves_packets() {
    let n = 4;
    let t = Topology::from_db(&[-15.0, -20.0, -30.0, -40.0], 5.0, -45.0).unwrap();
    let cfg = SimConfig {
        queue: QueueDiscipline::Fcfs { capacity: None },
        arrivals: vec![ArrivalProcess::Poisson { rate: 0.08 }; n],
        retry_limit: 2,
        ..SimConfig::saturated(t, PolicySpec::Dcf80211 { initial_cw: 4 }, 50_000, 5)
    };
    let out = run(cfg).unwrap();
    audit(&out);
    for (s, backlog) in out.stats.iter().zip(&out.backlog) {
        assert!(s.arrivals > 0);
        assert_eq!(s.overflow_drops, 0);
        assert_eq!(s.arrivals, s.deliveries + s.retry_drops + backlog);
    }
    assert!(out.stats.iter().any(|s| s.retry_drops > 0));
}

#[test]
fn lcfs_holds_one_and_at_will_is_fresh() {
    let cfg = SimConfig::saturated(seven_node(), PolicySpec::Dcf80211 { initial_cw: 8 }, 5_000, 2);
    let mut sim = Simulation::new(cfg).unwrap();
    while !sim.is_finished() {
        sim.step_slot();
        for i in 0..7 {
            assert!(sim.node(i).queue.len() <= 1);
        }
    }
    let out = sim.finish();
    for trace in &out.traces {
        assert!(trace.deliveries.iter().all(|d| d.gen_time == d.slot));
    }

    // periodic LCFS arrivals replace stale packets
    let cfg = SimConfig {
        arrivals: vec![ArrivalProcess::Periodic { rate: 0.5 }; 7],
        ..SimConfig::saturated(seven_node(), PolicySpec::Dcf80211 { initial_cw: 8 }, 5_000, 2)
    };
    let mut sim = Simulation::new(cfg).unwrap();
    while !sim.is_finished() {
        sim.step_slot();
        assert!((0..7).all(|i| sim.node(i).queue.len() <= 1));
    }
    let out = sim.finish();
    audit(&out);
    assert!(out.stats.iter().all(|s| s.replaced > 0));
}

#[test]
fn dcf_windows_double_and_reset() {
    let initial = 8u16;
    let allowed: Vec<u16> = (0..10).map(|k| (initial << k).min(1023)).collect();
    let cfg = SimConfig { retry_limit: 1, ..SimConfig::saturated(seven_node(), PolicySpec::Dcf80211 { initial_cw: initial }, 30_000, 9) };
    let mut sim = Simulation::new(cfg).unwrap();
    let mut prev: Vec<u16> = (0..7).map(|i| sim.node(i).cw_current).collect();
    let mut saw_cap = false;
    while !sim.is_finished() {
        let ev = sim.step_slot().clone();
        for i in 0..7 {
            let cw = sim.node(i).cw_current;
            assert!(allowed.contains(&cw), "{cw}");
            saw_cap |= cw == 1023;
            if ev.decoded.contains(&NodeId(i)) {
                assert_eq!(cw, initial);
            } else if cw != prev[i] {
                assert_eq!(cw, (prev[i] * 2).min(1023));
                assert!(ev.transmitters.contains(&NodeId(i)));
            }
            assert!(sim.node(i).backoff <= cw || !ev.transmitters.contains(&NodeId(i)));
        }
        prev = (0..7).map(|i| sim.node(i).cw_current).collect();
    }
    assert!(saw_cap);
}

#[test]
fn wifair_windows_stay_fixed() {
    let cws = vec![10, 10, 10, 9, 9, 7, 7];
    let cfg = SimConfig::saturated(seven_node(), PolicySpec::WiFairTa { cws: cws.clone() }, 10_000, 4);
    let mut sim = Simulation::new(cfg).unwrap();
    while !sim.is_finished() {
        sim.step_slot();
        for (i, &cw) in cws.iter().enumerate() {
            assert_eq!(sim.node(i).cw_current, cw);
            assert!(sim.node(i).backoff <= cw);
        }
    }
}

#[test]
fn policies_share_fading() {
    let horizon = 200_000;
    let collect = |policy: PolicySpec| {
        let mut sim = Simulation::new(SimConfig::saturated(seven_node(), policy, horizon, 1234)).unwrap();
        let mut slots = Vec::new();
        while !sim.is_finished() {
            slots.push(sim.step_slot().clone());
        }
        slots
    };
    let a = collect(PolicySpec::Dcf80211 { initial_cw: 8 });
    let b = collect(PolicySpec::WiFairTa { cws: vec![10, 10, 10, 9, 9, 7, 7] });
    let shared: Vec<_> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x.transmitters.len() > 1 && x.transmitters == y.transmitters)
        .collect();
    assert!(shared.len() > 20, "{}", shared.len());
    for (x, y) in shared {
        assert_eq!(x.gains, y.gains);
        assert_eq!(x.decoded, y.decoded);
    }
}

#[test]
fn rejects_bad_configs() {
    let base = SimConfig::saturated(seven_node(), PolicySpec::Dcf80211 { initial_cw: 8 }, 100, 1);
    let fcfs_at_will = SimConfig { queue: QueueDiscipline::Fcfs { capacity: None }, ..base.clone() };
    assert!(matches!(Simulation::new(fcfs_at_will), Err(SimError::AtWillNeedsLcfs)));
    let short = SimConfig { arrivals: vec![ArrivalProcess::SampleAtWill; 3], ..base.clone() };
    assert!(matches!(Simulation::new(short), Err(SimError::ArrivalCount { .. })));
    let warm = SimConfig { warmup: 100, ..base.clone() };
    assert!(matches!(Simulation::new(warm), Err(SimError::Warmup { .. })));
    let bad_policy = SimConfig { policy: PolicySpec::WiFairPf { cws: vec![3; 2] }, ..base };
    assert!(matches!(Simulation::new(bad_policy), Err(SimError::Policy(_))));
}

#[test]
fn warmup_is_excluded_from_summary() {
    let cfg = SimConfig { warmup: 500, ..SimConfig::saturated(seven_node(), PolicySpec::Dcf80211 { initial_cw: 8 }, 3_000, 6) };
    let out = run(cfg).unwrap();
    audit(&out);
    let direct = crate::metrics::summarize(&out.traces, 500).unwrap();
    let engine = out.summary.unwrap();
    assert_eq!(direct.means(), engine.means());
    assert_eq!(direct.network_peak, engine.network_peak);
    assert!(out.stats.iter().all(|s| s.age.count == 2_500));
}
