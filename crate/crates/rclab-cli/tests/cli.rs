use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rclab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rclab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = rclab(args);
    assert_eq!(o.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let h = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (h, rows)
}

fn col<'a>(h: &[String], row: &'a [String], name: &str) -> &'a str {
    &row[h.iter().position(|x| x == name).unwrap_or_else(|| panic!("no column {name}"))]
}

fn record(path: &Path) -> Value {
    let mut p = path.as_os_str().to_owned();
    p.push(".run.json");
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn unknown_or_missing_subcommand_prints_usage() {
    for args in [&["frobnicate"][..], &[]] {
        let o = rclab(args);
        assert_eq!(o.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    }
    assert_eq!(rclab(&["--help"]).status.code(), Some(0));
}

#[test]
fn invalid_parameters_exit_with_two() {
    for args in [
        &["measure", "--obs", "pi1"][..],
        &["measure", "--R", "4", "--p", "1.5"],
        &["measure", "--R", "4", "--obs", "pi7"],
        &["measure", "--R", "four"],
        &["measure", "--R", "4", "--algo", "metropolis"],
        &["oracle", "--event", "edge:99"],
        &["oracle", "--domain", "box:3"],
        &["oracle", "--bc", "periodic"],
        &["couple", "--bc-low", "wired", "--bc-high", "free"],
        &["sample", "--domain", "/nonexistent/domain.txt"],
        &["parafermion", "--root", "0,0"],
        &["length", "--delta", "0.7"],
        &["verify", "--tier", "quick"],
        &["exponents"],
        &["measure", "--R", "4", "--config", "/nonexistent.cfg"],
        &["measure", "--unknown", "1"],
    ] {
        let o = rclab(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn measure_gives_one_row_per_scale() {
    let out = ok(&["measure", "--q", "2", "--p", "pc", "--obs", "pi1", "--R", "4,8,16,32", "--seed", "7", "--sweeps", "300"]);
    let (h, rows) = csv_rows(&out);
    assert_eq!(h[..7], ["quantity", "q", "p", "h", "r", "R", "box"]);
    assert_eq!(rows.len(), 4);
    let pc = 2f64.sqrt() / (1.0 + 2f64.sqrt());
    for (row, big_r) in rows.iter().zip(["4", "8", "16", "32"]) {
        assert_eq!(col(&h, row, "R"), big_r);
        assert_eq!(col(&h, row, "seed"), "7");
        assert_eq!(col(&h, row, "algo"), "heatbath");
        assert!((col(&h, row, "p").parse::<f64>().unwrap() - pc).abs() < 1e-12);
        let m: f64 = col(&h, row, "mean").parse().unwrap();
        assert!((0.0..=1.0).contains(&m));
    }
}

#[test]
fn replay_is_byte_identical_and_independent_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 3] = [
        &["measure", "--q", "1,2", "--obs", "pi1,crossing", "--R", "2,4", "--sweeps", "300"],
        &["sample", "--domain", "box:3", "--seed", "3,1", "--sweeps", "20", "--algo", "cm"],
        &["couple", "--domain", "box:3", "--runs", "4"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let outs: Vec<Vec<u8>> = ["1", "1", "3"]
            .iter()
            .enumerate()
            .map(|(k, jobs)| {
                let path = dir.path().join(format!("{i}-{k}.out"));
                let mut a = args.to_vec();
                a.extend(["--jobs", jobs, "--out", path.to_str().unwrap()]);
                ok(&a);
                let rec = record(&path);
                assert!(rec["started"].as_str().unwrap() <= rec["finished"].as_str().unwrap());
                assert_eq!(rec["outputs"][0], path.to_str().unwrap());
                std::fs::read(&path).unwrap()
            })
            .collect();
        assert!(!outs[0].is_empty());
        assert_eq!(outs[0], outs[1], "{args:?}");
        assert_eq!(outs[0], outs[2], "{args:?} with 3 jobs");
    }
}

#[test]
fn every_row_references_its_run_record() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("o.csv");
    ok(&["oracle", "--q", "1,2", "--bc", "free,wired", "--out", path.to_str().unwrap()]);
    let rec = record(&path);
    let id = rec["id"].as_str().unwrap();
    assert!(rec["input_hash"].as_str().unwrap().starts_with(id));
    assert_eq!(rec["params"]["domain"], "box:1");
    let (h, rows) = csv_rows(&std::fs::read_to_string(&path).unwrap());
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| col(&h, r, "run_id") == id));

    // Different data, different id.
    let other = dir.path().join("o2.csv");
    ok(&["oracle", "--q", "1,3", "--out", other.to_str().unwrap()]);
    assert_ne!(record(&other)["id"], rec["id"]);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# measurement\nq = 1\np = 0.3\nR = 2,4\nsweeps = 300\nseed = 5\n").unwrap();
    let from_cfg = ok(&["measure", "--config", cfg.to_str().unwrap(), "--p", "pc"]);
    let from_flags = ok(&["measure", "--q", "1", "--p", "pc", "--R", "2,4", "--sweeps", "300", "--seed", "5"]);
    assert_eq!(from_cfg, from_flags);
    let (h, rows) = csv_rows(&from_cfg);
    assert_eq!(col(&h, &rows[0], "p"), "0.5");

    std::fs::write(&cfg, "q=1\nbogus=2\n").unwrap();
    assert_eq!(rclab(&["measure", "--config", cfg.to_str().unwrap(), "--R", "4"]).status.code(), Some(2));
}

#[test]
fn oracle_boundary_edge_is_open_with_probability_p_under_wiring() {
    // Both endpoints are wired, so the edge sees no cluster weight.
    let out = ok(&["oracle", "--q", "1,2,3", "--p", "pc,0.3", "--bc", "wired", "--event", "edge:0"]);
    let (h, rows) = csv_rows(&out);
    assert_eq!(h[..7], ["domain_id", "p", "q", "h", "bc_id", "event_id", "probability"]);
    assert_eq!(rows.len(), 6);
    for r in &rows {
        let p: f64 = col(&h, r, "p").parse().unwrap();
        let pr: f64 = col(&h, r, "probability").parse().unwrap();
        assert!((p - pr).abs() < 1e-12, "{r:?}");
    }
    // Rows are sorted by (q, p).
    let keys: Vec<(f64, f64)> = rows.iter().map(|r| (col(&h, r, "q").parse().unwrap(), col(&h, r, "p").parse().unwrap())).collect();
    assert!(keys.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn sample_emits_one_line_per_sweep_and_observable() {
    let out = ok(&["sample", "--domain", "rect:4x3", "--sweeps", "6", "--every", "2", "--burn-in", "3", "--obs", "open-fraction,crossing"]);
    let lines: Vec<Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3 * 2);
    assert_eq!(lines[0]["sweep"], 5);
    assert_eq!(lines[0]["observable"], "open-fraction");
    assert_eq!(lines[1]["observable"], "crossing");
    assert!(lines.iter().all(|l| l["seed"] == 1 && l["algo"] == "heatbath"));
}

#[test]
fn couple_reports_order_stop_and_petals() {
    let out = ok(&["couple", "--domain", "box:4", "--runs", "3", "--seed", "10", "--p-low", "0.5", "--p-high", "0.6"]);
    let lines: Vec<Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    for (i, l) in lines.iter().enumerate() {
        assert_eq!(l["seed"], 10 + i as u64);
        assert_eq!(l["algo"], "boundary-cluster");
        assert_eq!(l["monotonicity_violations"], 0);
        let mut order: Vec<u64> = l["revealed"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
        assert!(l["stop_time"].as_u64().unwrap() <= order.len() as u64);
        order.sort();
        assert_eq!(order, (0..144).collect::<Vec<_>>());
        assert!(l["lower_open"].as_u64() <= l["upper_open"].as_u64());
        assert!(l.get("flower").is_some());
    }
}

#[test]
fn length_scan_emits_its_result() {
    let out = ok(&["length", "--q", "1", "--p", "0.40", "--delta", "0.05", "--sweeps", "800"]);
    let v: Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(v["p"], 0.4);
    assert_eq!(v["delta_threshold"], 0.05);
    assert_eq!(v["seed"], 1);
    assert_eq!(v["algo"], "heatbath");
    let l = v["l_hat"].as_u64().expect("subcritical scan leaves the window below the cap");
    assert!((2..=64).contains(&l));
}

#[test]
fn parafermion_reports_residuals_and_boundary_sum() {
    let out = ok(&["parafermion", "--domain", "box:1", "--root", "0,-1"]);
    let v: Value = serde_json::from_str(out.trim()).unwrap();
    assert!(v["max_vertex_residual"].as_f64().unwrap() < 1e-10);
    assert!((v["boundary_winding_sum"].as_f64().unwrap() - 1.5 * PI).abs() < 1e-10);
    assert!(!v["vertex_residuals"].as_array().unwrap().is_empty());
    let off = ok(&["parafermion", "--root", "0,-1", "--p", "0.5"]);
    let v: Value = serde_json::from_str(off.trim()).unwrap();
    assert!(v["max_vertex_residual"].as_f64().unwrap() > 1e-3);
}

#[test]
fn exponents_recover_a_planted_power_law() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("m.csv");
    let mut text = String::from("quantity,q,p,h,r,R,box,mean,stderr,n,seed,algo,run_id\n");
    for big_r in [4.0f64, 8.0, 16.0, 32.0, 64.0] {
        let m = 0.9 * big_r.powf(-0.125) * if big_r == 4.0 { 1.5 } else { 1.0 };
        text.push_str(&format!("pi1,2,0.5857864376269051,0,0,{big_r},{big_r},{m},{},100,1,cm,x\n", m * 0.01));
        text.push_str(&format!("crossing,2,0.5857864376269051,0,0,{big_r},{big_r},0.5,0.01,100,1,cm,x\n"));
    }
    std::fs::write(&input, text).unwrap();
    let o = rclab(&["exponents", "--input", input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let (h, rows) = csv_rows(&stdout(&o));
    assert_eq!(h[..6], ["exponent", "q", "predicted", "measured", "stderr", "n_scales"]);
    assert_eq!(rows.len(), 1, "crossing has no exponent");
    let r = &rows[0];
    assert_eq!(col(&h, r, "exponent"), "xi1");
    assert_eq!(col(&h, r, "n_scales"), "4");
    assert!((col(&h, r, "measured").parse::<f64>().unwrap() - 0.125).abs() < 1e-9);
    assert!((col(&h, r, "predicted").parse::<f64>().unwrap() - 0.125).abs() < 1e-12);
    // Keeping the perturbed smallest scale moves the fit.
    let (h, rows) = csv_rows(&ok(&["exponents", "--input", input.to_str().unwrap(), "--exclude", "none"]));
    assert_eq!(col(&h, &rows[0], "n_scales"), "5");
    assert!((col(&h, &rows[0], "measured").parse::<f64>().unwrap() - 0.125).abs() > 1e-3);
}

#[test]
fn verify_exact_tier_passes() {
    let o = rclab(&["verify", "--tier", "exact"]);
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}");
    for id in [1, 4, 8] {
        assert!(text.lines().any(|l| l.starts_with(&format!("criterion {id} PASS"))), "{text}");
    }
}
