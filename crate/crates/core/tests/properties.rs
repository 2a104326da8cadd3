use std::collections::BTreeMap;

use catm::sim::{fig3_scenario, run, Scenario};
use proptest::prelude::*;

fn small_world(seed: u64, bursty: u32, voip: u32, full: u32, sectors: u32, duration_ms: u64, shared: bool) -> Scenario {
    let mut s = format!(
        r#"
        name = "prop"
        seed = {seed}
        duration_ms = {duration_ms}
        [layout]
        rings = 1
        sectors = {sectors}
        kpi_scope = "all"
        [radio]
        interference = "{}"
        "#,
        if shared { "shared" } else { "reserved" }
    );
    for (n, t) in [
        (bursty, r#"{ kind = "bursty", direction = "ul", response_bits = 200 }"#),
        (voip, r#"{ kind = "voip" }"#),
        (full, r#"{ kind = "full_buffer", direction = "dl" }"#),
    ] {
        if n > 0 {
            s += &format!("[[ue_groups]]\ncount = {n}\ntraffic = {t}\n");
        }
    }
    Scenario::from_toml_str(&s).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn runs_stay_consistent(
        seed in 0u64..1000,
        bursty in 0u32..8,
        voip in 0u32..6,
        full in 0u32..2,
        three in any::<bool>(),
        shared in any::<bool>(),
        dur in 500u64..6000,
    ) {
        prop_assume!(bursty + voip + full > 0);
        let sc = small_world(seed, bursty, voip, full, if three { 3 } else { 1 }, dur, shared);
        let out = run(&sc, true).unwrap();
        let r = &out.report;
        prop_assert_eq!(r.audits.half_duplex_violations + r.audits.capacity_violations + r.audits.conservation_violations, 0);
        for k in r.ues.iter().chain([&r.aggregate]) {
            prop_assert_eq!(k.accounted_packets(), k.offered_packets);
            prop_assert!(k.delivered_bits <= k.offered_bits);
            if let (Some(a), Some(b), Some(c)) = (k.latency_p50_ms, k.latency_p95_ms, k.latency_p99_ms) {
                prop_assert!(a <= b && b <= c);
            }
        }
        let p_max = sc.power.p_max_dbm;
        // per UE: TTIs spent transmitting and receiving data
        let mut by_ue: BTreeMap<u32, (Vec<u64>, Vec<u64>)> = BTreeMap::new();
        for row in out.trace.as_ref().unwrap() {
            let e = by_ue.entry(row.ue).or_default();
            if row.direction == "ul" {
                prop_assert!(row.tx_power_dbm.unwrap() <= p_max + 1e-9);
                e.0.push(row.tti);
            } else {
                e.1.push(row.tti);
            }
        }
        for (tx, rx) in by_ue.values() {
            for t in tx {
                // same TTI or a missing guard TTI on either side
                prop_assert!(!rx.contains(t) && !rx.contains(&(t + 1)) && !rx.contains(&t.wrapping_sub(1)));
            }
        }
        let again = run(&sc, true).unwrap();
        prop_assert_eq!(again.report.kpi_csv_string(), r.kpi_csv_string());
        prop_assert_eq!(again.trace, out.trace);
    }
}

#[test]
fn more_data_repetitions_never_hurt_at_the_cell_edge() {
    for cl in [140.0, 150.0, 155.0] {
        for seed in 1..=3 {
            let mut last = 0.0;
            for rl in [1, 2, 4, 8, 16, 32] {
                let a = run(&fig3_scenario(cl, rl, seed, 200_000), false).unwrap().report.aggregate;
                let done = a.delivered_packets + a.dropped_residual;
                let rate = if done == 0 { 0.0 } else { a.delivered_packets as f64 / done as f64 };
                assert!(rate >= last, "CL {cl} seed {seed} RL {rl}: {rate} < {last}");
                last = rate;
            }
        }
    }
}
