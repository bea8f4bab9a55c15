use std::path::Path;
use std::process::{Command, Output};

fn nfca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nfca")).args(args).output().unwrap()
}

fn scenario(dir: &Path) -> String {
    let p = dir.join("s.json");
    std::fs::write(
        &p,
        r#"{"M":3,"N":4,"freq_ghz":30,"targets":[{"theta_deg":-20,"range_m":0.12},{"theta_deg":25,"range_m":0.25}],"T":40,"snr_db":20,"seed":3}"#,
    )
    .unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn geometry_table_and_json() {
    let out = nfca(&["geometry", "--m", "2", "--n", "3", "--d-mm", "2.5"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("U = 7"));
    assert!(text.contains("[-4, -3, -2, 0, 2, 3, 4]"));

    let out = nfca(&["geometry", "--m", "11", "--n", "9", "--freq-ghz", "30", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["U"], 37);
    assert_eq!(v["M"], 9);
    assert_eq!(v["k_virtual"], 13);
    assert_eq!(v["k_physical"], 9);
    assert_eq!(v["segment_length"], 199);
    assert!((v["rayleigh_distance_m"].as_f64().unwrap() - 40.5).abs() < 0.1);
}

#[test]
fn geometry_rejects_bad_input() {
    assert!(!nfca(&["geometry", "--m", "4", "--n", "6", "--d-mm", "1"]).status.success());
    assert!(!nfca(&["geometry", "--m", "2", "--n", "3"]).status.success());
}

#[test]
fn simulate_writes_one_row_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(dir.path());
    let out = dir.path().join("y.csv");
    assert!(nfca(&["simulate", "--scenario", &s, "--out", out.to_str().unwrap()]).status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("sensor,t,re,im"));
    assert_eq!(lines.count(), 11 * 40);
}

#[test]
fn spectrum_writes_spectra_result_and_covariances() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(dir.path());
    let out = dir.path().join("spec");
    let o = nfca(&["spectrum", "--scenario", &s, "--out", out.to_str().unwrap(), "--dump-covariance"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let angle = std::fs::read_to_string(out.join("angle_spectrum.csv")).unwrap();
    assert!(angle.starts_with("theta_deg,p_db\n"));
    let result: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    let cands = result["candidate_angles"].as_array().unwrap().len();
    assert!(cands >= 2);
    for i in 0..cands {
        let r = std::fs::read_to_string(out.join(format!("range_spectrum_{i:02}.csv"))).unwrap();
        assert!(r.starts_with("range_m,p_db\n"));
    }
    let trues = result["classified"].as_array().unwrap().iter().filter(|c| c["label"] == "true").count();
    assert_eq!(trues, 2);
    let r_v = std::fs::read_to_string(out.join("r_v.csv")).unwrap();
    assert_eq!(r_v.lines().count(), 13 * 13 + 1);
    assert!(out.join("r_hat.csv").exists() && out.join("r_d.csv").exists());
}

#[test]
fn montecarlo_report_and_trial_dump() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(dir.path());
    let csv = dir.path().join("r.csv");
    let jl = dir.path().join("t.jsonl");
    let run = |seq: bool, csv: &Path| {
        let mut args = vec![
            "montecarlo", "--scenario", &s, "--snr", "-10:10:10", "--q", "3", "--methods", "proposed,farfield",
            "--out", csv.to_str().unwrap(), "--trials-out", jl.to_str().unwrap(),
        ];
        if seq {
            args.push("--sequential");
        }
        assert!(nfca(&args).status.success());
        std::fs::read(csv).unwrap()
    };
    let par = run(false, &csv);
    let seq = run(true, &dir.path().join("r2.csv"));
    assert_eq!(par, seq);
    let text = String::from_utf8(par).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("method,snr_db,theta_rmse_deg,r_rmse_m,detection_rate,mean_candidates"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2 * 3);
    assert!(rows.iter().filter(|r| r.starts_with("farfield")).all(|r| r.split(',').nth(3) == Some("")));
    let trials = std::fs::read_to_string(&jl).unwrap();
    assert_eq!(trials.lines().count(), 2 * 3 * 3);
    for line in trials.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["seed"].as_u64().unwrap() >= 3);
    }
}

#[test]
fn montecarlo_rejects_unknown_method() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(dir.path());
    let o = nfca(&["montecarlo", "--scenario", &s, "--methods", "root-music", "--out", "/dev/null"]);
    assert!(!o.status.success());
}
