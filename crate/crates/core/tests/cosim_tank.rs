mod common;

use treeforge_core::baselang::AccessKind;
use treeforge_core::cosim::{cosimulate, parse_scenario};
use treeforge_core::Value;

use common::{fixture, tank_reference};

#[test]
fn tank_matches_monolithic_loop() {
    let scenario = parse_scenario(&fixture("tank.cosim")).unwrap();
    let timeline = cosimulate(&scenario).unwrap();
    assert_eq!(timeline.rows.len(), 201);
    let reference = tank_reference(200);
    for (row, (level, valve)) in timeline.rows[1..].iter().zip(&reference) {
        let shared: Vec<_> = row.shared.iter().map(|(_, v)| *v).collect();
        let Value::Real(de_level) = shared[0] else { panic!("level is real") };
        assert!((de_level - level).abs() <= 1e-9, "t={}: {de_level} vs {level}", row.t);
        assert!((row.plant[0].1 - level).abs() <= 1e-9);
        assert_eq!(shared[1], Value::Int(*valve), "t={}", row.t);
        assert!((row.de_clock - row.t).abs() <= 1e-9);
        if row.t >= 1.0 - 1e-9 {
            assert!((1.95..=3.05).contains(&row.plant[0].1), "t={}: {}", row.t, row.plant[0].1);
        }
    }
}

#[test]
fn access_log_counts_reads_and_writes() {
    let scenario = parse_scenario(&fixture("tank.cosim")).unwrap();
    let timeline = cosimulate(&scenario).unwrap();
    let writes = timeline.access_log.iter().filter(|a| a.kind == AccessKind::Write).count();
    let reads = timeline.access_log.iter().filter(|a| a.kind == AccessKind::Read).count();
    let invocations: usize = timeline.rows.iter().map(|r| r.events.len()).sum();
    let reference = tank_reference(200);
    let mut changes = 0;
    let mut prev = 0;
    for (_, v) in &reference {
        if *v != prev {
            changes += 1;
        }
        prev = *v;
    }
    assert_eq!(invocations, 200);
    assert_eq!(writes, changes);
    assert_eq!(reads, invocations);
}

#[test]
fn bad_scenarios_are_rejected() {
    let tank = fixture("tank.cosim");
    for (from, to) in [("H := 0.1", "H := 0"), ("agenda ctrl", "agenda nope"), ("output level <- level", "output nope <- level")] {
        let text = tank.replace(from, to);
        assert!(parse_scenario(&text).is_err(), "{to}");
    }
}
