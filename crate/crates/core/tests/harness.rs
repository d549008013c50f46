use std::io::Cursor;

use gaitguide::harness::{
    emit_artifacts, metrics_from_trace, rasterize, rope_asymmetry, run_batch, run_scenario, turn_window, HarnessError,
    RunOutcome, ScenarioConfig, ScenarioKind, Trace, WalkerKind, TRACE_COLUMNS,
};
use gaitguide::world_sense::NavMode;
use proptest::prelude::*;

fn outcome(cfg: &ScenarioConfig) -> RunOutcome {
    match run_scenario(cfg) {
        Ok(o) => o,
        Err(HarnessError::TimedOut(o)) => *o,
        Err(e) => panic!("{e}"),
    }
}

/// Default config cut short so that slow kinds stay cheap.
fn short(kind: ScenarioKind, cap: f64) -> ScenarioConfig {
    let mut c = ScenarioConfig::default_for(kind);
    c.duration_cap = c.duration_cap.min(cap);
    c.horizon = c.horizon.map(|h| h.min(c.duration_cap));
    c
}

#[test]
fn same_config_gives_byte_identical_trace() {
    for kind in ScenarioKind::ALL {
        let cfg = short(kind, 4.0).with_seed(11);
        assert_eq!(outcome(&cfg).trace.to_csv(), outcome(&cfg).trace.to_csv(), "{}", kind.name());
    }
}

#[test]
fn csv_header_is_fixed_for_every_kind() {
    let header = TRACE_COLUMNS.join(",");
    for kind in ScenarioKind::ALL {
        for walker in [WalkerKind::Guided, WalkerKind::AudioOnly, WalkerKind::CaneContact] {
            let csv = outcome(&short(kind, 2.0).with_walker(walker)).trace.to_csv();
            let body: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
            assert_eq!(body[0], header);
            assert!(body[1..].iter().all(|l| l.split(',').count() == TRACE_COLUMNS.len()));
        }
    }
}

#[test]
fn metrics_are_recomputable_from_the_csv_alone() {
    for kind in ScenarioKind::ALL {
        let o = outcome(&short(kind, 6.0).with_seed(2));
        let parsed = Trace::from_csv(Cursor::new(o.trace.to_csv())).unwrap();
        assert_eq!(parsed, o.trace, "{}", kind.name());
        assert_eq!(metrics_from_trace(&parsed), o.metrics, "{}", kind.name());
    }
}

#[test]
fn batch_of_one_equals_single_run() {
    let cfg = ScenarioConfig::default_for(ScenarioKind::ObstacleCourse).with_seed(5);
    let report = run_batch(std::slice::from_ref(&cfg));
    assert_eq!(report.runs.len(), 1);
    assert_eq!(report.runs[0].result.as_ref().unwrap(), &outcome(&cfg).metrics);
}

#[test]
fn cap_and_validity_errors() {
    let mut cfg = ScenarioConfig::default_for(ScenarioKind::Hallway);
    cfg.duration_cap = 1.0;
    match run_scenario(&cfg) {
        Err(HarnessError::TimedOut(o)) => {
            assert!(!o.metrics.arrived);
            assert!(o.trace.rows.last().unwrap().t <= 1.0 + 1e-9);
        }
        other => panic!("expected a timeout, got {other:?}"),
    }
    cfg.duration_cap = 0.0;
    assert!(matches!(run_scenario(&cfg), Err(HarnessError::ScenarioInvalid(_))));
}

#[test]
fn turn_shows_rope_asymmetry_only_inside_the_turn_window() {
    let mut cfg = ScenarioConfig::default_for(ScenarioKind::Turn90);
    cfg.settle = 3.0;
    cfg.duration_cap = 8.0;
    let trace = outcome(&cfg).trace;
    let (t1, t2) = turn_window(&trace).expect("a turn was commanded");
    let end = trace.rows.last().unwrap().t;
    assert!(end - t2 > 1.5, "too little trace after the turn");
    let inside = rope_asymmetry(&trace, t1, t2).unwrap();
    let after = rope_asymmetry(&trace, t2 + 0.3, end).unwrap();
    assert!(inside >= 0.10, "inside {inside}");
    assert!(after < 0.10, "after {after}");
}

#[test]
fn hallway_map_marks_the_walls() {
    let o = outcome(&ScenarioConfig::default_for(ScenarioKind::Hallway));
    assert!(o.metrics.arrived);
    let map = o.grid.expect("hallway builds a map");
    let truth = rasterize(&o.world, map.resolution);
    assert_eq!((truth.width, truth.height), (map.width, map.height));
    let (mut walls, mut marked) = (0, 0);
    for row in 0..truth.height {
        for col in 0..truth.width {
            if !truth.is_occupied(col, row) {
                continue;
            }
            walls += 1;
            marked += usize::from(map.get(col, row) > 0.0);
        }
    }
    let frac = marked as f64 / walls as f64;
    assert!(frac >= 0.90, "{marked}/{walls} wall cells marked");
}

#[test]
fn leaving_the_building_switches_mode_once() {
    let o = outcome(&ScenarioConfig::default_for(ScenarioKind::OutdoorRoute));
    let modes: Vec<&str> = o.trace.rows.iter().map(|r| r.mode.as_str()).collect();
    let switches = modes.windows(2).filter(|w| w[0] != w[1]).count();
    let indoor_to_outdoor = modes
        .windows(2)
        .filter(|w| w[0] == NavMode::IndoorSlam.name() && w[1] == NavMode::OutdoorGps.name())
        .count();
    assert_eq!(modes[0], NavMode::IndoorSlam.name());
    assert_eq!(indoor_to_outdoor, 1);
    assert_eq!(switches, 1);
}

#[test]
fn artifacts_fail_cleanly_on_unwritable_target() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, b"x").unwrap();
    let o = outcome(&ScenarioConfig::default_for(ScenarioKind::Turn90));
    let err = emit_artifacts(&o, &blocker.join("run")).unwrap_err();
    assert!(matches!(err, HarnessError::IoFailure(_)));
    assert_eq!(std::fs::read_dir(tmp.path()).unwrap().count(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn metrics_are_sane(seed in 0u64..1_000_000, target in -180.0f64..180.0, audio in any::<bool>()) {
        let mut cfg = ScenarioConfig::default_for(ScenarioKind::SteerToAngle).with_seed(seed);
        cfg.target_angle = target.to_radians();
        if audio {
            cfg.walker = WalkerKind::AudioOnly;
        }
        let m = outcome(&cfg).metrics;
        for v in [m.completion_time, m.path_length, m.lateral_rmse, m.final_heading_error] {
            prop_assert!(v >= 0.0 && v.is_finite());
        }
        if m.arrived {
            prop_assert!(m.completion_time <= cfg.duration_cap);
        }
    }

    #[test]
    fn seed_alone_fixes_the_run(seed in 0u64..1_000_000) {
        let cfg = short(ScenarioKind::ObstacleCourse, 3.0).with_seed(seed);
        prop_assert_eq!(outcome(&cfg).trace, outcome(&cfg).trace);
    }
}
