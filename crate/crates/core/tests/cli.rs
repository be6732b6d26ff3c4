use warplab::cli::{load_config, run, RunConfig};

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("warplab").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn selftest_passes() {
    let (code, out, _) = invoke(&["selftest", "--no-timestamp"]);
    assert_eq!(code, 0);
    assert!(!out.contains("FAIL"));
    assert!(data_rows(&out).len() >= 10);
}

#[test]
fn curvature_scan_reports_positive_verdict() {
    let (code, out, _) = invoke(&["curvature-scan", "--warp", "theorem-b", "--k", "15", "--no-timestamp"]);
    assert_eq!(code, 0);
    assert!(out.contains("# verdict = positive"));
    let rows = data_rows(&out);
    assert_eq!(rows.len(), 1001);
    assert_eq!(rows[0].len(), 6);
    assert_eq!(rows[0][4], "theorem-b");
    for r in &rows {
        for v in &r[1..4] {
            assert!(v.parse::<f64>().unwrap() > 0.0);
        }
    }
}

#[test]
fn headers_embed_version_and_config() {
    let (_, out, _) = invoke(&["curvature-scan", "--scan-end", "1", "--integrator-tol", "1e-11"]);
    let header: Vec<&str> = out.lines().take_while(|l| l.starts_with('#')).collect();
    assert!(header[0].starts_with("# warplab "));
    assert!(header[1].starts_with("# generated_at_unix = "));
    assert!(header.contains(&"# family = theorem-b"));
    assert!(header.contains(&"# integrator_tol = 1e-11"));
    assert!(header.contains(&"# k = 15"));
}

#[test]
fn no_timestamp_makes_outputs_identical() {
    let args = ["distance-table", "--lmax", "4", "--no-timestamp"];
    let (_, a, _) = invoke(&args);
    let (_, b, _) = invoke(&[&args[..], &["--threads", "1"]].concat());
    // the thread count is echoed; everything else must match
    let strip = |s: &str| {
        s.lines()
            .filter(|l| !l.starts_with("# threads"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&a), strip(&b));
    let (_, c, _) = invoke(&args);
    assert_eq!(a, c);
}

#[test]
fn nonproper_certificate_json() {
    let (code, out, _) = invoke(&[
        "nonproper-certify",
        "--warp",
        "theorem-b",
        "--lmax",
        "32",
        "--tmax",
        "1000",
        "--no-timestamp",
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["result"]["verdict"], "non-proper evidence");
    assert_eq!(v["result"]["rows"].as_array().unwrap().len(), 6);
    assert_eq!(v["meta"]["config"]["l_max"], "32");
    assert!(v["meta"].get("generated_at_unix").is_none());
}

#[test]
fn distance_json_carries_bounds_and_grid_check() {
    let (code, out, _) = invoke(&["distance", "--l", "1", "--t", "3", "--no-timestamp"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let d = &v["result"]["distance"];
    let value = d["value"].as_f64().unwrap();
    assert!(d["lower_bound"].as_f64().unwrap() <= value && value <= d["upper_bound"].as_f64().unwrap());
    let grid = v["result"]["grid_oracle"].as_f64().unwrap();
    assert!((grid - value).abs() / value < 0.02);
}

#[test]
fn trace_and_clairaut_outputs() {
    let (code, out, _) = invoke(&["geodesic-trace", "--length", "30", "--no-timestamp"]);
    assert_eq!(code, 0);
    let rows = data_rows(&out);
    assert_eq!(rows[0].len(), 6);
    assert!(out.contains("class = oscillating"));
    let (code, out, _) = invoke(&[
        "clairaut-check",
        "--length",
        "100",
        "--launch-count",
        "5",
        "--no-timestamp",
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["result"]["launches"].as_array().unwrap().len(), 5);
    assert_eq!(v["ok"], true);
}

#[test]
fn busemann_and_cone_probe_columns() {
    let (code, out, _) = invoke(&[
        "busemann",
        "--lmin",
        "1",
        "--lmax",
        "2",
        "--t-list",
        "10,100",
        "--no-timestamp",
    ]);
    assert_eq!(code, 0);
    let rows = data_rows(&out);
    assert_eq!(rows.len(), 4);
    assert!(out.contains("l,T,b_hat_low,b_hat_high,bound_low"));
    let (code, out, _) = invoke(&["cone-probe", "--lmax", "4", "--no-timestamp"]);
    assert_eq!(code, 0);
    assert!(out.contains("l,L,R,R_over_L,A\n"));
    assert_eq!(data_rows(&out).len(), 3);
}

#[test]
fn invalid_input_exits_with_one() {
    for args in [
        &["curvature-scan", "--k", "1"][..],
        &["curvature-scan", "--bogus"],
        &["no-such-command"],
        &["nonproper-certify", "--warp", "flat:1"],
        &["distance", "--warp", "sphere"],
        &["distance", "--set", "colour=blue"],
        &["distance", "--config", "/nonexistent/warplab.cfg"],
    ] {
        let (code, _, err) = invoke(args);
        assert_eq!(code, 1, "{args:?}");
        let v: serde_json::Value = serde_json::from_str(err.lines().next().unwrap()).unwrap();
        assert!(v["error"].is_string());
    }
}

#[test]
fn vacuous_certificate_scale_is_rejected() {
    let (code, _, err) = invoke(&["nonproper-certify", "--lmax", "32", "--tmax", "10"]);
    assert_eq!(code, 1);
    assert!(err.contains("t_max_too_small"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    std::fs::write(&path, "# test run\nk = 4\nintegrator_tol = 1e-10\nscan_end = 1\n").unwrap();
    let cfg = load_config(&path).unwrap();
    assert_eq!(cfg.k, 4);
    assert_eq!(cfg.integrator_tol, 1e-10);
    let out_path = dir.path().join("scan.csv");
    let (code, out, _) = invoke(&[
        "curvature-scan",
        "--config",
        path.to_str().unwrap(),
        "--k",
        "5",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(out.is_empty());
    let written = std::fs::read_to_string(&out_path).unwrap();
    assert!(written.contains("# k = 5"));
    assert!(written.contains("# integrator_tol = 1e-10"));
    assert_eq!(data_rows(&written).len(), 11);
}

#[test]
fn echoed_config_parses_back() {
    let cfg = RunConfig::parse_str("family = theorem-a\nr_max = 500\nradii = 0.25,3\nquad_tol = 3e-10").unwrap();
    let text: String = cfg.echo().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    assert_eq!(RunConfig::parse_str(&text).unwrap(), cfg);
}
