//! End-to-end runs of the `ainfty` binary on the shipped bundles.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bundles() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../bundles")
}

fn ainfty(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ainfty")).args(args).output().expect("run ainfty")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn last_line(o: &Output) -> String {
    stdout(o).lines().last().unwrap_or_default().to_string()
}

fn bundle(name: &str) -> String {
    bundles().join(name).to_str().unwrap().to_string()
}

fn temp_path(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("ainfty-cli-{}-{name}", std::process::id()))
}

#[test]
fn energy_zero_check_ainfty_is_clean() {
    let o = ainfty(&["check-ainfty", &bundle("circle_energy_zero.json")]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let last = last_line(&o);
    assert!(last.starts_with("residuals: 0 of ") && last.ends_with(" nonzero"), "{last}");
    assert_ne!(last, "residuals: 0 of 0 nonzero");
}

#[test]
fn mutated_bundle_exits_one_and_names_the_tuple() {
    let mut b: Value = serde_json::from_str(&std::fs::read_to_string(bundles().join("torus_isotopy.json")).unwrap()).unwrap();
    // First entry of the (β=1, k=2, l=1) tensor: add 1 to its first output coefficient.
    let slot = b["correlators"]["disks"]
        .as_array_mut()
        .unwrap()
        .iter_mut()
        .find(|s| s["k"] == 2 && s["l"] == 1)
        .expect("a k=2, l=1 slot");
    let entry = &mut slot["entries"][0];
    let alpha: Vec<String> = entry["alpha"].as_array().unwrap().iter().map(|x| x.as_str().unwrap().to_string()).collect();
    let value = entry["value"].as_object_mut().unwrap();
    let key = value.keys().next().unwrap().clone();
    let old = value[&key].as_str().unwrap().to_string();
    let new = ainfty_core::rational::parse_q(&old).unwrap() + ainfty_core::rational::q(1);
    value.insert(key, Value::String(ainfty_core::rational::fmt_q(&new)));
    let path = temp_path("mutated.json");
    std::fs::write(&path, serde_json::to_string_pretty(&b).unwrap()).unwrap();
    let o = ainfty(&["check-ainfty", path.to_str().unwrap()]);
    std::fs::remove_file(&path).ok();
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(1), "{out}");
    assert!(!last_line(&o).starts_with("residuals: 0 of"), "{out}");
    let tuple = format!("({}", alpha.join(","));
    assert!(out.lines().any(|l| l.contains("[q-relation]") && l.contains(&tuple)), "no residual mentions {tuple}:\n{out}");
}

#[test]
fn dump_signs_epsilon_matches_hand_evaluation() {
    // k = 2, n = 1, l = 0: ε = (|α1|+1) + 2(|α2|+1) + 2 + 1 ≡ |α1|.
    let o = ainfty(&["dump-signs", "--epsilon", "k=2", "--n", "1", "--max-deg", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    for (a1, a2, s) in [(0, 0, "+1"), (0, 1, "+1"), (1, 0, "-1"), (1, 1, "-1")] {
        let row = format!("α=[{a1}, {a2}] γ=[] {s}");
        assert!(out.lines().any(|l| l.trim() == row), "missing {row}:\n{out}");
    }
    assert_eq!(last_line(&o), "residuals: 0 of 0 nonzero");
}

#[test]
fn reports_are_identical_across_job_counts() {
    let b = bundle("torus_isotopy.json");
    let one = ainfty(&["check-correlators", &b, "--jobs", "1"]);
    let four = ainfty(&["check-correlators", &b, "--jobs", "4"]);
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(stdout(&one), stdout(&four));
    assert_eq!(stdout(&one), stdout(&ainfty(&["check-correlators", &b, "--jobs", "4"])));
}

#[test]
fn shipped_bundles_pass_their_checks() {
    let runs: [(&str, &[&str]); 6] = [
        ("torus_isotopy.json", &["check-model"]),
        ("torus_isotopy.json", &["check-axioms"]),
        ("torus_isotopy.json", &["check-ainfty"]),
        ("torus_isotopy.json", &["isotopy-check"]),
        ("torus_properties.json", &["check-properties"]),
        ("torus_energy_zero.json", &["check-correlators"]),
    ];
    for (file, cmd) in runs {
        let mut args: Vec<String> = cmd.iter().map(|s| s.to_string()).collect();
        args.push(bundle(file));
        let a: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = ainfty(&a);
        assert_eq!(o.status.code(), Some(0), "{cmd:?} {file}:\n{}", stdout(&o));
        assert!(last_line(&o).starts_with("residuals: 0 of "), "{}", last_line(&o));
    }
}

#[test]
fn generate_then_check() {
    let out = temp_path("generated.json");
    let o = ainfty(&["generate", &bundle("torus_generator_input.json"), "-o", out.to_str().unwrap(), "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let c = ainfty(&["check-correlators", out.to_str().unwrap()]);
    let a = ainfty(&["check-axioms", out.to_str().unwrap()]);
    std::fs::remove_file(&out).ok();
    assert_eq!(c.status.code(), Some(0), "{}", stdout(&c));
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
}

#[test]
fn input_errors_exit_two() {
    let o = ainfty(&["check-model", "/nonexistent/bundle.json"]);
    assert_eq!(o.status.code(), Some(2));
    let bad = temp_path("float.json");
    let mut b: Value = serde_json::from_str(&std::fs::read_to_string(bundles().join("circle_energy_zero.json")).unwrap()).unwrap();
    b["truncation"]["E"] = serde_json::json!(2.0);
    std::fs::write(&bad, b.to_string()).unwrap();
    let o = ainfty(&["check-model", bad.to_str().unwrap()]);
    std::fs::remove_file(&bad).ok();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("floating point"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unknown_command_is_rejected() {
    let o = ainfty(&["frobnicate"]);
    assert_ne!(o.status.code(), Some(0));
}
