use std::fs;
use std::path::Path;
use std::process::Command;

fn idd(dir: &Path, cmd: &str, config: &str, extra: &[&str]) -> (i32, String) {
    let cfg = dir.join(format!("{cmd}.json.in"));
    fs::write(&cfg, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_idd"))
        .arg(cmd)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir)
        .args(extra)
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn classify_gamma_holds_everywhere() {
    let d = tempfile::tempdir().unwrap();
    let (code, err) = idd(d.path(), "classify", r#"{"law": {"catalog": "gamma_2_1"}}"#, &[]);
    assert_eq!(code, 0, "{err}");
    let v = json(&d.path().join("classify.json"));
    for c in ["condition_i", "condition_ii", "condition_iii"] {
        assert_eq!(v["result"][c]["state"], "holds", "{c}");
    }
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["config"]["law"]["catalog"], "gamma_2_1");
}

#[test]
fn malformed_config_points_at_the_error() {
    let d = tempfile::tempdir().unwrap();
    let (code, err) = idd(d.path(), "classify", "{\"law\": {\"catalog\": \"gamma_2_1\"},\n  \"seed\": }", &[]);
    assert_eq!(code, 4);
    assert!(err.contains("line 2"), "{err}");
    let (code, _) = idd(d.path(), "cf", r#"{"law": {"catalog": "no_such_law"}}"#, &[]);
    assert_eq!(code, 4);
    let (code, _) = idd(d.path(), "bogus", r#"{}"#, &[]);
    assert_eq!(code, 4);
}

#[test]
fn gaussian_decay_misses_the_lower_bound() {
    let d = tempfile::tempdir().unwrap();
    let (code, err) = idd(d.path(), "decay", r#"{"law": {"catalog": "gaussian_1"}}"#, &[]);
    assert_eq!(code, 0, "{err}");
    let v = json(&d.path().join("decay.json"));
    assert_eq!(v["result"]["bounds"]["lower_ok"], false);
    let csv = fs::read_to_string(d.path().join("decay.csv")).unwrap();
    assert!(csv.lines().nth(2).unwrap().starts_with("u,log_abs_phi,lower_bound,upper_bound,sharp_bound"));
}

#[test]
fn stochastic_commands_need_a_seed() {
    let d = tempfile::tempdir().unwrap();
    let (code, err) = idd(d.path(), "deconvolve", r#"{"law": {"catalog": "gamma_2_1"}}"#, &[]);
    assert_eq!(code, 4);
    assert!(err.contains("seed"), "{err}");
}

const SMALL_DECONV: &str = r#"{
  "law": {"catalog": "gamma_2_1"},
  "deconvolve": {"n": 2000, "h": 0.4, "n_ladder": [200, 2000], "h_grid": [0.3, 0.5], "replications": 3,
                 "grid": {"center": 0.0, "width": 40.0, "n": 512}}
}"#;

#[test]
fn deconvolve_artifacts_from_file_and_seed() {
    let d = tempfile::tempdir().unwrap();
    let (code, err) = idd(d.path(), "deconvolve", SMALL_DECONV, &["--seed", "11"]);
    assert_eq!(code, 0, "{err}");
    let mise = fs::read_to_string(d.path().join("mise.csv")).unwrap();
    assert_eq!(mise.lines().filter(|l| !l.starts_with('#')).count(), 1 + 4);
    let sample = d.path().join("y.txt");
    fs::write(&sample, "0.5\n1.25\n\n2.0\n").unwrap();
    let cfg = SMALL_DECONV.replace("\"n\": 2000,", &format!("\"sample_path\": {:?},", sample.to_str().unwrap()));
    let (code, err) = idd(d.path(), "deconvolve", &cfg, &["--seed", "11"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(json(&d.path().join("deconvolve.json"))["result"]["n"], 3);
}

#[test]
fn invert_writes_density_columns() {
    let d = tempfile::tempdir().unwrap();
    let (code, err) = idd(d.path(), "invert", r#"{"law": {"catalog": "gamma_3.5_1"}, "invert": {"n_points": 4096, "width": 64.0, "center": 3.5}}"#, &[]);
    assert_eq!(code, 0, "{err}");
    let csv = fs::read_to_string(d.path().join("density.csv")).unwrap();
    assert!(csv.contains("\nx,f,f_sanitized\n"));
    let v = json(&d.path().join("invert.json"));
    assert_eq!(v["result"]["spectral_order"]["n_max"], 2);
}
