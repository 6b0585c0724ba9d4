//! Canonical emission: shipped bundles are fixed points of `emit ∘ parse`,
//! and generated data survives a trip through JSON unchanged.

mod common;

use std::path::Path;

use ainfty_core::bundle::{parse_bundle, parse_bundle_str, Bundle};
use ainfty_core::generator::GeneratorOptions;
use ainfty_core::qops::CorrelatorData;

fn assert_same_data(a: &CorrelatorData, b: &CorrelatorData) {
    assert_eq!(a.disks, b.disks);
    assert_eq!(a.spheres, b.spheres);
    assert_eq!(a.bounds.energy, b.bounds.energy);
    assert_eq!((a.bounds.kmax, a.bounds.lmax), (b.bounds.kmax, b.bounds.lmax));
    assert_eq!(a.gw_sign, b.gw_sign);
}

#[test]
fn shipped_bundles_are_canonical() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../bundles");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let b = parse_bundle(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let emitted = b.emit();
        assert_eq!(emitted, text, "{} is not in canonical form", path.display());
        let again = parse_bundle_str(&emitted).unwrap();
        assert_same_data(&b.data, &again.data);
        assert_eq!(again.emit(), emitted);
        seen += 1;
    }
    assert!(seen >= 4, "only {seen} bundles found in {}", dir.display());
}

#[test]
fn generated_data_round_trips() {
    for (seed, sphere) in [(1, true), (5, false)] {
        let opts = GeneratorOptions { seed, sphere, ..GeneratorOptions::default() };
        let g = common::t2_generate(2, &opts);
        let b = Bundle::from_data(g.data, Vec::new());
        let text = b.emit();
        let back = parse_bundle_str(&text).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert_same_data(&b.data, &back.data);
        assert_eq!(back.emit(), text);
        assert_eq!(common::nonzero(&common::data_reports(&back.data)), 0);
    }
}

#[test]
fn reordered_input_emits_identically() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../bundles/torus_isotopy.json");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for slot in v["correlators"]["disks"].as_array_mut().unwrap() {
        slot["entries"].as_array_mut().unwrap().reverse();
    }
    v["correlators"]["disks"].as_array_mut().unwrap().reverse();
    let shuffled = serde_json::to_string(&v).unwrap();
    assert_ne!(shuffled, text);
    assert_eq!(parse_bundle_str(&shuffled).unwrap().emit(), text);
}
