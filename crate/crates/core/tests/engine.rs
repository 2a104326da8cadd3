use catm::mac::{derive_timeline, RepetitionConfig};
use catm::sim::{mixed_scenario, run, run_many, Engine, InterferenceMode, Scenario};
use catm::ue::RrcState;
use catm::Direction;

fn quiet_ue(cl: f64) -> Scenario {
    Scenario::from_toml_str(&format!(
        r#"
        name = "quiet"
        seed = 3
        duration_ms = 400
        [layout]
        rings = 0
        sectors = 1
        [[ue_groups]]
        count = 1
        fixed_coupling_loss_db = {cl:?}
        start_connected = true
        traffic = {{ kind = "bursty", direction = "dl", min_interval_ms = 1e9, mean_interval_ms = 2e9 }}
        repetitions = {{ mpdcch = 2, data = 4, pucch = 4 }}
        "#
    ))
    .unwrap()
}

#[test]
fn lone_downlink_packet_takes_one_timeline() {
    let mut e = Engine::new(quiet_ue(100.0)).unwrap();
    assert_eq!(e.rrc_state(0), RrcState::Connected);
    // clear of the first periodic CQI report
    while e.tti() < 10 {
        e.step().unwrap();
    }
    e.inject(0, Direction::Dl, 200).unwrap();
    e.run_to_end().unwrap();
    let tl = derive_timeline(Direction::Dl, RepetitionConfig::new(2, 4, 4), 0).unwrap();
    assert_eq!(e.latencies(0), &[tl.data_latency()]);
    let r = e.report().unwrap();
    assert_eq!((r.aggregate.offered_packets, r.aggregate.delivered_packets), (1, 1));
}

#[test]
fn uplink_packet_waits_for_a_scheduling_request() {
    let mut e = Engine::new(quiet_ue(100.0)).unwrap();
    while e.tti() < 10 {
        e.step().unwrap();
    }
    e.inject(0, Direction::Ul, 200).unwrap();
    e.run_to_end().unwrap();
    let tl = derive_timeline(Direction::Ul, RepetitionConfig::new(2, 4, 4), 0).unwrap();
    let lat = e.latencies(0);
    assert_eq!(lat.len(), 1);
    // SR on PUCCH, then a full grant cycle
    assert!(lat[0] > tl.data_latency() + 4, "{lat:?}");
}

#[test]
fn inject_rejects_unknown_ue() {
    let mut e = Engine::new(quiet_ue(100.0)).unwrap();
    assert!(e.inject(5, Direction::Dl, 100).is_err());
    assert!(e.inject(0, Direction::Dl, 0).is_err());
}

#[test]
fn zero_duration_gives_empty_report() {
    let mut sc = mixed_scenario(1, 0);
    sc.duration_ms = 0;
    let r = run(&sc, false).unwrap().report;
    assert_eq!(r.aggregate.offered_packets, 0);
    assert_eq!(r.ues.len(), 50);
    assert!(r.aggregate.latency_p50_ms.is_none());
}

#[test]
fn same_seed_same_bytes() {
    let sc = mixed_scenario(9, 5_000);
    let a = run(&sc, true).unwrap();
    let b = run(&sc, true).unwrap();
    assert_eq!(a.report.kpi_csv_string(), b.report.kpi_csv_string());
    assert_eq!(a.trace, b.trace);
}

#[test]
fn different_seeds_differ() {
    let a = run(&mixed_scenario(1, 5_000), false).unwrap().report;
    let b = run(&mixed_scenario(2, 5_000), false).unwrap().report;
    assert_ne!(a.kpi_csv_string(), b.kpi_csv_string());
}

#[test]
fn parallel_sweep_matches_serial() {
    let sc = mixed_scenario(0, 3_000);
    let seeds = [4, 5, 6];
    let par = run_many(&sc, &seeds, false);
    for (s, p) in seeds.iter().zip(par) {
        let mut one = sc.clone();
        one.seed = *s;
        assert_eq!(p.unwrap().report.kpi_csv_string(), run(&one, false).unwrap().report.kpi_csv_string());
    }
}

#[test]
fn shared_mode_sees_legacy_interference() {
    let mut reserved = mixed_scenario(5, 10_000);
    reserved.radio.interference = InterferenceMode::Reserved;
    let mut shared = reserved.clone();
    shared.radio.interference = InterferenceMode::Shared;
    shared.radio.legacy_load = 1.0;
    let a = run(&reserved, false).unwrap().report.aggregate;
    let b = run(&shared, false).unwrap().report.aggregate;
    assert!(b.mean_dl_sinr_db.unwrap() < a.mean_dl_sinr_db.unwrap());
    assert!(b.mean_ul_sinr_db.unwrap() < a.mean_ul_sinr_db.unwrap());
}

#[test]
fn audits_run_and_stay_clean() {
    let r = run(&mixed_scenario(2, 10_000), false).unwrap().report;
    assert_eq!(r.audits.ttis_audited, 10_000);
    assert!(r.audits.conservation_checks >= 10);
    assert_eq!(r.audits.half_duplex_violations + r.audits.capacity_violations + r.audits.conservation_violations, 0);
    for c in &r.cells {
        assert!((0.0..=1.0).contains(&c.prb_utilization));
        assert!((0.0..=1.0).contains(&c.mpdcch_utilization));
    }
}

#[test]
fn deep_coverage_ue_is_slower() {
    let near = run(&quiet_with_traffic(110.0), false).unwrap().report.aggregate;
    let far = run(&quiet_with_traffic(150.0), false).unwrap().report.aggregate;
    assert!(far.latency_mean_ms.unwrap() > near.latency_mean_ms.unwrap());
}

fn quiet_with_traffic(cl: f64) -> Scenario {
    let mut sc = catm::sim::fig3_scenario(cl, 8, 1, 60_000);
    sc.ue_groups[0].count = 3;
    sc
}

#[test]
fn closed_loop_acts_on_long_connections() {
    // full buffer keeps the connection up, so TPC gets its measurements
    let mk = |mode: &str| {
        Scenario::from_toml_str(&format!(
            r#"
            name = "long"
            seed = 2
            duration_ms = 4000
            [layout]
            rings = 0
            sectors = 1
            [power]
            mode = "{mode}"
            [power.tpc]
            target_sinr_db = 0.0
            [[ue_groups]]
            count = 2
            fixed_coupling_loss_db = 120.0
            start_connected = true
            traffic = {{ kind = "full_buffer", direction = "ul" }}
            "#
        ))
        .unwrap()
    };
    let ol = run(&mk("olpc"), true).unwrap();
    let cl = run(&mk("clpc"), true).unwrap();
    let power = |o: &catm::sim::RunOutput| -> Vec<f64> {
        o.trace.as_ref().unwrap().iter().filter_map(|r| r.tx_power_dbm).collect()
    };
    let (a, b) = (power(&ol), power(&cl));
    assert!(!a.is_empty() && !b.is_empty());
    assert_ne!(a, b);
}
