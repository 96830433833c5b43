//! The example configs shipped in configs/ must stay loadable and valid.

use std::path::PathBuf;

use spacelink_core::scenario::ScenarioConfig;

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn shipped_configs_parse_and_round_trip() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        seen += 1;
        let cfg = ScenarioConfig::load(&path)
            .unwrap_or_else(|e| panic!("{} failed to load: {e}", path.display()));
        let again = ScenarioConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, again, "{} does not round-trip", path.display());
    }
    assert!(seen >= 4, "expected the shipped example configs, found {seen}");
}
