//! Harness-level tests: schema validation, report shape, empty runs, the
//! bound observed by the bundled threat scenarios, and the replay attacker's
//! interaction with the lockout.

use safehouse_core::UsdValue;
use safehouse_sim::{bundled, replay_attacker, run_scenario, Scenario, SimError};

fn minimal_scenario_json(events: &str) -> String {
    format!(
        r#"{{
        "name": "minimal",
        "seed": 7,
        "world_config": {{
            "stable_asset": "USDC",
            "fund_token": "FUND",
            "owners": ["o1", "o2"],
            "threshold": 2,
            "managers": ["m"],
            "extra_actors": ["oracle"],
            "balances": [{{"actor": "safehouse", "asset": "USDC", "amount": "100"}}],
            "params": {{
                "max_out": "10.00",
                "tolerance_bp": 0,
                "cd_time_blocks": 5,
                "criterion_mode": "one"
            }},
            "feeds": ["f1"]
        }},
        "events": [{events}]
    }}"#
    )
}

#[test]
fn empty_event_list_yields_stable_initial_report() {
    let scenario = Scenario::from_json(&minimal_scenario_json("")).unwrap();
    let (first, world) = run_scenario(&scenario).unwrap();
    let (second, _) = run_scenario(&scenario).unwrap();
    assert_eq!(first.final_status, "open");
    assert_eq!(first.final_block, 0);
    assert!(first.event_outcomes.is_empty());
    assert_eq!(first.totals.extracted_value, "0.00000000");
    assert_eq!(first.to_bytes(), second.to_bytes());
    assert!(world.public_log().is_empty());
}

#[test]
fn unsorted_events_rejected() {
    let events = r#"
        {"block": 5, "actor": "m", "op": {"type": "sweep_to_safehouse"}},
        {"block": 2, "actor": "m", "op": {"type": "sweep_to_safehouse"}}
    "#;
    let err = Scenario::from_json(&minimal_scenario_json(events)).unwrap_err();
    assert!(matches!(err, SimError::Schema(_)), "got {err}");
}

#[test]
fn undeclared_actor_rejected() {
    let events = r#"{"block": 0, "actor": "ghost", "op": {"type": "sweep_to_safehouse"}}"#;
    let err = Scenario::from_json(&minimal_scenario_json(events)).unwrap_err();
    assert!(matches!(err, SimError::UnknownActor(name) if name == "ghost"));
}

#[test]
fn malformed_payload_rejected() {
    let events =
        r#"{"block": 0, "actor": "m", "op": {"type": "investor_deposit", "amount": "not-a-number"}}"#;
    let scenario = Scenario::from_json(&minimal_scenario_json(events)).unwrap();
    assert!(run_scenario(&scenario).is_err());
}

#[test]
fn rogue_manager_extraction_capped_at_max_out() {
    let scenario = bundled::load("rogue_manager").unwrap();
    let (report, world) = run_scenario(&scenario).unwrap();
    let max_out = world.params.max_out;
    let extracted = UsdValue::parse(&report.totals.extracted_value).unwrap();
    assert!(extracted <= max_out, "rogue extracted more than the one-shot cap");
    assert_eq!(report.final_status, "locked:window_expired");
}

#[test]
fn replay_attack_trips_the_lockout() {
    // an honest multi-rotation run leaves 5 public plaintexts; replaying
    // them yields nothing and burns the failure budget
    let scenario = bundled::load("replay_from_log").unwrap();
    let (_, world) = run_scenario(&scenario).unwrap();
    let replay = replay_attacker(&world);
    assert_eq!(replay.attempted, 5);
    assert_eq!(replay.successes, 0);
    assert_eq!(replay.final_status, "locked:auth_failures");
}

#[test]
fn scenario_files_round_trip_through_serde() {
    for name in bundled::names() {
        let scenario = bundled::load(name).unwrap();
        let text = serde_json::to_string(&scenario).unwrap();
        let reparsed = Scenario::from_json(&text).unwrap();
        let (a, _) = run_scenario(&scenario).unwrap();
        let (b, _) = run_scenario(&reparsed).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes(), "{name} changed across serde round trip");
    }
}
