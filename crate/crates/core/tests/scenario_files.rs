use std::path::Path;

use catm::sim::{run, Scenario};

#[test]
fn shipped_scenarios_load_and_run() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            let mut sc = Scenario::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            sc.duration_ms = sc.duration_ms.min(3000);
            let r = run(&sc, false).unwrap().report;
            assert_eq!(r.aggregate.accounted_packets(), r.aggregate.offered_packets);
            n += 1;
        }
    }
    assert!(n >= 3);
}

#[test]
fn scenario_round_trips_through_toml() {
    let sc = catm::sim::mixed_scenario(4, 1000);
    let back = Scenario::from_toml_str(&sc.to_toml()).unwrap();
    assert_eq!(back, sc);
}

#[test]
fn validation_names_the_field() {
    let base = "name = \"v\"\nseed = 1\nduration_ms = 100\n";
    let groups = "[[ue_groups]]\ncount = 1\ntraffic = { kind = \"voip\" }\n";
    let bad = |extra: &str, g: &str| Scenario::from_toml_str(&format!("{base}{extra}{g}")).unwrap_err();
    let e = bad("[scheduler]\nibler_target = 1.5\n", groups);
    assert!(e.is_config() && e.to_string().contains("ibler_target"), "{e}");
    let e = bad("", "[[ue_groups]]\ncount = 1\ntraffic = { kind = \"teleport\" }\n");
    assert!(e.to_string().contains("teleport"), "{e}");
    let e = bad("[layout]\nsectors = 2\n", groups);
    assert!(e.to_string().contains("sectors"), "{e}");
    assert!(Scenario::from_toml_str(&format!("{base}{groups}")).is_ok());
}
