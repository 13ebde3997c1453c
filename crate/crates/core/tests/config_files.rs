use std::io::Write;
use std::path::Path;

use anoncloud_core::scenario::{run, ConfigError, ScenarioConfig};

const MINIMAL: &str = r#"
schema_version = 1
seed = 3

[nodes]
slaves = 3

[[catalog]]
service_number = 1
service_type = "web-compute"
unit_price = 4

[[events]]
kind = "session"
customer = "carol"
service = 1
job = "max[3,9,1]"
"#;

fn write(text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

fn invalid_field(text: &str) -> String {
    match ScenarioConfig::load(write(text).path()) {
        Err(ConfigError::Invalid { field, reason }) => format!("{field}: {reason}"),
        other => panic!("expected an invalid field, got {other:?}"),
    }
}

#[test]
fn minimal_file_loads_and_runs() {
    let config = ScenarioConfig::load(write(MINIMAL).path()).unwrap();
    assert_eq!(config.circuit_length, 3);
    assert_eq!(config.nodes.masters, 1);
    let out = run(&config).unwrap();
    assert!(out.report.passed(), "{}", out.report.render());
    assert_eq!(out.report.billing.total_amount, 4);
}

#[test]
fn two_hop_circuit_names_the_layer_rule() {
    let text = MINIMAL.replace("seed = 3", "seed = 3\ncircuit_length = 2");
    let msg = invalid_field(&text);
    assert!(
        msg.starts_with("circuit_length") && msg.contains("at least 3"),
        "{msg}"
    );
}

#[test]
fn too_few_slaves_names_the_capacity_rule() {
    let text = MINIMAL
        .replace("seed = 3", "seed = 3\ncircuit_length = 4")
        .replace("slaves = 3", "slaves = 2");
    let msg = invalid_field(&text);
    assert!(
        msg.contains("nodes.slaves") && msg.contains("capacity"),
        "{msg}"
    );
}

#[test]
fn second_master_is_refused() {
    let text = MINIMAL.replace("slaves = 3", "slaves = 3\nmasters = 2");
    assert!(invalid_field(&text).starts_with("nodes.masters"));
}

#[test]
fn syntax_error_reports_its_line() {
    let text = MINIMAL.replace("unit_price = 4", "unit_price = = 4");
    match ScenarioConfig::load(write(&text).path()) {
        Err(ConfigError::Parse {
            line: Some(line), ..
        }) => assert_eq!(line, 11),
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_fields_are_refused() {
    let text = MINIMAL.replace("seed = 3", "seed = 3\nsneaky = true");
    assert!(matches!(
        ScenarioConfig::load(write(&text).path()),
        Err(ConfigError::Parse { .. })
    ));
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(
        ScenarioConfig::load(Path::new("/nonexistent/scenario.toml")),
        Err(ConfigError::Io { .. })
    ));
}

#[test]
fn canonical_config_survives_a_file_round_trip() {
    let config = ScenarioConfig::canonical(5, 10);
    let loaded = ScenarioConfig::load(write(&config.to_toml()).path()).unwrap();
    assert_eq!(loaded, config);
}
