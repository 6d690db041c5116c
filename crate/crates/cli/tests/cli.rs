use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn thetareg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thetareg"))
        .args(args)
        .env_remove("THETA_PRECISION_GUARD")
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn out_dir(dir: &tempfile::TempDir) -> &str {
    dir.path().to_str().unwrap()
}

#[test]
fn cf_tables() {
    let out = thetareg(&["cf", "--t", "rat:5/3", "--json"]);
    assert!(out.status.success());
    assert_eq!(json_of(&out)["quotients"], serde_json::json!(["1", "1", "2"]));

    let out = thetareg(&["cf", "--t", "quad:(1+1*sqrt(5))/2", "--json", "--depth", "16"]);
    let v = json_of(&out);
    let q = v["quotients"].as_array().unwrap();
    assert_eq!(q.len(), 16);
    assert!(q.iter().all(|a| a == "1"));

    let out = thetareg(&["cf", "--t", "class:sigma=1,seed=0,2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("verdict Exactly(1.0)"), "{text}");
}

#[test]
fn cf_parse_error_has_position() {
    let out = thetareg(&["cf", "--t", "quad:(1+1*sqrt(5)/2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("position"));
}

#[test]
fn empty_time_list_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("results");
    let out = thetareg(&["blocks", "--out", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert!(!target.exists());
}

#[test]
fn rational_blocks_grow_toward_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = thetareg(&["blocks", "--t", "rat:1/3", "--jmin", "4", "--jmax", "12", "--out", out_dir(&dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("rat_1_3.csv"));
    assert_eq!(rows.len(), 9);
    let ratios: Vec<f64> = rows.iter().map(|r| r[6].parse().unwrap()).collect();
    assert!(ratios.iter().all(|&r| r > 0.9 && r < 1.3), "{ratios:?}");
    // log₂(c·2^j)/j = 1 + log₂(c)/j tends to 1 from the side of log₂(c)
    let last = ratios.last().unwrap();
    assert!((last - 1.0).abs() < (ratios[0] - 1.0).abs(), "{ratios:?}");
}

#[test]
fn golden_blocks_decay_at_half() {
    let dir = tempfile::tempdir().unwrap();
    let out = thetareg(&[
        "blocks", "--t", "quad:(-1+1*sqrt(5))/2", "--jmin", "4", "--jmax", "16", "--out", out_dir(&dir),
    ]);
    assert!(out.status.success());
    let rows = csv_rows(&dir.path().join("quad___1_1_sqrt_5___2.csv"));
    assert_eq!(rows.len(), 13);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r[0].parse::<u32>().unwrap() >= 10)
        .map(|r| (r[0].parse().unwrap(), r[1].parse::<f64>().unwrap().log2()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope - 0.5).abs() < 0.05, "tail slope {slope}");
}

#[test]
fn csv_and_json_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out = thetareg(&[
        "blocks", "--t", "rat:7/13", "--jmin", "3", "--jmax", "9", "--mode", "both", "--out", out_dir(&dir),
    ]);
    assert!(out.status.success());
    let rows = csv_rows(&dir.path().join("rat_7_13.csv"));
    let json: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("rat_7_13.json")).unwrap()).unwrap();
    let records = json["records"].as_array().unwrap();
    assert_eq!(rows.len(), records.len());
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-15 * a.abs().max(b.abs());
    for (row, rec) in rows.iter().zip(records) {
        assert_eq!(row[0], rec["j"].to_string());
        for (col, key) in [(1, "rough_sup"), (2, "smooth_sup"), (3, "l2_exact"), (5, "upper_bound_pred")] {
            let a: f64 = row[col].parse().unwrap();
            assert!(close(a, rec[key].as_f64().unwrap()), "{key}: {a} vs {}", rec[key]);
        }
        assert_eq!(row[4], rec["q_used"].as_str().unwrap());
    }
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scan.cfg");
    let out_path = dir.path().join("res");
    fs::write(
        &cfg,
        format!(
            "jmin = 3\njmax = 8\nformat = csv\nout = {}\n[times]\nrat:1/3\nrat:3/5\n",
            out_path.display()
        ),
    )
    .unwrap();
    let out = thetareg(&["--config", cfg.to_str().unwrap(), "blocks", "--jmax", "7"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(csv_rows(&out_path.join("rat_1_3.csv")).len(), 5);
    assert_eq!(csv_rows(&out_path.join("rat_3_5.csv")).len(), 5);
    assert!(!out_path.join("rat_1_3.json").exists());

    fs::write(&cfg, "jmin = three\n").unwrap();
    let out = thetareg(&["--config", cfg.to_str().unwrap(), "blocks"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn budget_overrun_is_partial() {
    let dir = tempfile::tempdir().unwrap();
    let out = thetareg(&["blocks", "--t", "rat:1/3", "--jmin", "19", "--jmax", "21", "--out", out_dir(&dir)]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(csv_rows(&dir.path().join("rat_1_3.csv")).len(), 2);
    assert!(dir.path().join("rat_1_3.warnings.txt").exists());
    let json: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("rat_1_3.json")).unwrap()).unwrap();
    assert_eq!(json["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn exponent_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let out = thetareg(&[
        "exponent", "--t", "rat:3/5", "--t", "quad:(0+1*sqrt(2))/1", "--t", "class:sigma=2,seed=0,2",
        "--jmin", "4", "--jmax", "10", "--out", out_dir(&dir), "--svg",
    ]);
    assert!(out.status.success());
    let read = |name: &str| -> Value {
        serde_json::from_str(&fs::read_to_string(dir.path().join(name)).unwrap()).unwrap()
    };
    assert_eq!(read("rat_3_5.report.json")["alpha_pred"]["lo"], 1.0);
    assert_eq!(read("quad__0_1_sqrt_2___1.report.json")["alpha_pred"]["lo"], 0.5);
    assert_eq!(read("class_sigma_2_seed_0_2.report.json")["alpha_pred"]["lo"], 0.75);
    let svg = fs::read_to_string(dir.path().join("rat_3_5.svg")).unwrap();
    assert!(svg.contains("fitted slope") && svg.contains("predicted slope"));
}

#[test]
fn exponent_needs_five_scales() {
    let dir = tempfile::tempdir().unwrap();
    let out = thetareg(&["exponent", "--t", "rat:1/3", "--jmin", "4", "--jmax", "6", "--out", out_dir(&dir)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn collapse_examples() {
    let v = json_of(&thetareg(&["collapse", "--p", "1", "--q", "1", "--check"]));
    assert!(v["max_residual"].as_f64().unwrap() < 1e-8);
    let (re, im) = (v["kappa_re"].as_f64().unwrap(), v["kappa_im"].as_f64().unwrap());
    let k8 = num_complex_pow8(re, im);
    assert!((k8.0 - 1.0).abs() < 1e-8 && k8.1.abs() < 1e-8);

    let points = |p: &str, q: &str| -> Vec<f64> {
        let v = json_of(&thetareg(&["collapse", "--p", p, "--q", q]));
        v["points"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
    };
    let expect = |got: Vec<f64>, want: [f64; 3]| {
        assert!(got.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-15), "{got:?}");
    };
    expect(points("1", "3"), [1.0 / 6.0, 0.5, 5.0 / 6.0]);
    expect(points("2", "3"), [0.0, 1.0 / 3.0, 2.0 / 3.0]);

    let out = thetareg(&["collapse", "--p", "2", "--q", "4"]);
    assert_eq!(out.status.code(), Some(2));
}

fn num_complex_pow8(re: f64, im: f64) -> (f64, f64) {
    let (mut a, mut b) = (re, im);
    for _ in 0..3 {
        (a, b) = (a * a - b * b, 2.0 * a * b);
    }
    (a, b)
}

#[test]
fn probe_examples() {
    let v = json_of(&thetareg(&["probe", "--p", "1", "--q", "17", "--m", "1", "--n", "16", "--check"]));
    assert!(v["value"].as_f64().unwrap() >= 2f64.sqrt() * 15f64.sqrt());
    assert_eq!(v["all_hold"], true);
    let v = json_of(&thetareg(&["probe", "--p", "1", "--q", "3", "--m", "4", "--n", "64", "--weights", "smooth"]));
    assert_eq!(v["all_hold"], true);
    let v = json_of(&thetareg(&["probe", "--p", "1", "--q", "3", "--m", "4", "--n", "64"]));
    assert!(v["value"].as_f64().unwrap() >= 2f64.sqrt() * 60.0 / 3f64.sqrt());

    let out = thetareg(&["probe", "--p", "1", "--q", "20001", "--m", "1", "--n", "16"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn stability_identity_and_hypothesis() {
    let g = "quad:(-1+1*sqrt(5))/2";
    let v = json_of(&thetareg(&["stability", "--t", g, "--t1", g, "--m", "1", "--n", "64"]));
    assert_eq!(v["ratio"], 1.0);
    let out = thetareg(&["stability", "--t", g, "--t1", "rat:1/2", "--m", "1", "--n", "64"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn guard_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_thetareg"))
        .args(["blocks", "--t", "quad:(0+1*sqrt(2))/1", "--jmin", "3", "--jmax", "4", "--out"])
        .arg(tempfile::tempdir().unwrap().path())
        .env("THETA_PRECISION_GUARD", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_thetareg"))
        .args(["blocks", "--t", "quad:(0+1*sqrt(2))/1", "--jmin", "3", "--jmax", "4", "--out", out_dir(&dir)])
        .env("THETA_PRECISION_GUARD", "40")
        .output()
        .unwrap();
    assert!(out.status.success());
}
