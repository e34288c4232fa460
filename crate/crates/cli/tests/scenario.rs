use std::path::PathBuf;

use plant_cli::scenario::{parse_scenario, parse_scenario_str, to_toml, ScenarioError};
use plant_core::instances;
use plant_core::model::ConfigError;
use plant_core::processes::StateProcess;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}

fn i1_text() -> String {
    std::fs::read_to_string(fixture("i1.scenario")).unwrap()
}

#[test]
fn bundled_fixture_is_the_reference_plant() {
    let s = parse_scenario(fixture("i1.scenario")).unwrap();
    assert_eq!(s.model, instances::single_product());
    assert_eq!(s.process_x, StateProcess::constant());
    assert_eq!(s.process_y, StateProcess::constant());
    assert_eq!(s.controller.v, Some(10.0));
    assert_eq!(
        (s.episode.horizon, s.episode.seed, s.episode.replications),
        (200_000, 42, 1)
    );
}

#[test]
fn unknown_key_is_named() {
    let text = i1_text().replace("c_max = 2", "c_max = 2\nfoo = 1");
    match parse_scenario_str(&text) {
        Err(e @ ScenarioError::Parse(_)) => {
            assert!(e.to_string().contains("foo"), "{e}");
            assert!(!e.is_validation());
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn unknown_key_inside_a_process_table_is_rejected() {
    let text = i1_text().replacen("probs = [1.0]", "probs = [1.0]\nfoo = 2", 1);
    let err = parse_scenario_str(&text).unwrap_err();
    assert!(err.to_string().contains("foo"), "{err}");
}

#[test]
fn demand_above_cap_is_a_validation_error() {
    let text = i1_text().replace("F = [[2.0, 1.0]]", "F = [[3.0, 1.0]]");
    match parse_scenario_str(&text) {
        Err(e @ ScenarioError::Validation(ConfigError::DemandExceedsCap { .. })) => {
            assert!(e.is_validation())
        }
        other => panic!("expected DemandExceedsCap, got {other:?}"),
    }
}

#[test]
fn unknown_state_id_is_rejected() {
    let text = std::fs::read_to_string(fixture("markov_demand.scenario"))
        .unwrap()
        .replace("initial = \"high\"", "initial = \"medium\"");
    let err = parse_scenario_str(&text).unwrap_err();
    assert!(matches!(err, ScenarioError::Reference(_)), "{err:?}");
}

#[test]
fn unsafe_threshold_needs_opt_in() {
    let text = i1_text().replace("V = 10.0", "V = 10.0\ntheta = [5.0]");
    assert!(matches!(
        parse_scenario_str(&text),
        Err(ScenarioError::Controller(_))
    ));
    let text = text.replace("theta = [5.0]", "theta = [5.0]\nunsafe_theta = true");
    let s = parse_scenario_str(&text).unwrap();
    assert!(!s.controller.params(&s.model).unwrap().strict_bounds);
}

#[test]
fn missing_processes_default_to_uniform() {
    let text = std::fs::read_to_string(fixture("markov_demand.scenario")).unwrap();
    let cut = text.find("[process_y]").unwrap();
    let end = text.find("[controller]").unwrap();
    let text = format!("{}{}", &text[..cut], &text[end..]);
    let s = parse_scenario_str(&text).unwrap();
    assert_eq!(
        s.process_y,
        StateProcess::Iid {
            probs: vec![0.5, 0.5]
        }
    );
}

#[test]
fn round_trip_preserves_every_fixture() {
    for name in [
        "i1.scenario",
        "markov_demand.scenario",
        "two_products.scenario",
    ] {
        let s = parse_scenario(fixture(name)).unwrap();
        let again = parse_scenario_str(&to_toml(&s)).unwrap();
        assert_eq!(again, s, "{name}");
        assert_eq!(to_toml(&again), to_toml(&s), "{name}");
    }
}

#[test]
fn round_trip_keeps_factorization_and_traces() {
    let mut s = parse_scenario(fixture("two_products.scenario")).unwrap();
    assert!(s.model.is_demand_factorized());
    s.process_x = StateProcess::Trace {
        states: vec![0, 1, 1, 0],
    };
    s.process_y = StateProcess::Markov {
        transition: vec![vec![0.5, 0.25, 0.25]; 3],
        initial: 2,
    };
    let again = parse_scenario_str(&to_toml(&s)).unwrap();
    assert_eq!(again, s);
}
