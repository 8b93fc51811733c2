use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn lzs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lzs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("small.json");
    let text = format!(
        r#"{{"spectrum":{{"slope":2.0,"gaps":[2.0]}},
"grid":{{"phi_f":{{"min":6.0,"max":9.0,"count":4}},"tau":{{"min":0.5,"max":1.5,"count":5}},"phi_i":-5.0}},
"outputs":{{"stem":"small"{extra}}}}}"#
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn sweep_output_independent_of_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let mut files = Vec::new();
    for w in ["1", "3"] {
        let out = tmp.path().join(format!("w{w}"));
        let o = lzs(&["--config", arg(&cfg), "--out", arg(&out), "--workers", w, "sweep"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        files.push(std::fs::read(out.join("small.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let text = String::from_utf8(files.remove(0)).unwrap();
    assert!(text.contains("#   \"spectrum\""));
    assert!(!text.contains("workers"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 20);
}

#[test]
fn pgm_written_on_request() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let o = lzs(&["--config", arg(&cfg), "--out", arg(tmp.path()), "--pgm", "sweep"]);
    assert!(o.status.success());
    let pgm = std::fs::read_to_string(tmp.path().join("small.pgm")).unwrap();
    assert!(pgm.starts_with("P2\n"));
    assert!(pgm.contains("\n4 5\n65535\n"));
}

#[test]
fn trace_ends_on_the_map_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    assert!(lzs(&["--config", arg(&cfg), "--out", arg(tmp.path()), "sweep"]).status.success());
    let o = lzs(&["--config", arg(&cfg), "--out", arg(tmp.path()), "trace", "--phi-f", "8", "--tau", "1.0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let map = std::fs::read_to_string(tmp.path().join("small.csv")).unwrap();
    let cell = map
        .lines()
        .find_map(|l| l.strip_prefix("8,1,"))
        .expect("cell present")
        .to_string();
    let trace = std::fs::read_to_string(tmp.path().join("small_trace.csv")).unwrap();
    let mut rows = trace.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(rows.next().unwrap(), "t_ns,W_11,W_22,re_W_12,im_W_12,trace");
    let rows: Vec<Vec<&str>> = rows.map(|l| l.split(',').collect()).collect();
    assert!(rows.len() > 10);
    assert_eq!(rows[0][0], "0");
    assert_eq!(rows[0][1], "1");
    let last = rows.last().unwrap();
    assert_eq!(last[0], "1");
    assert_eq!(last[1], cell);
    for r in &rows {
        assert_eq!(r[5], "1", "trace drifted at t = {}", r[0]);
    }
}

#[test]
fn three_level_trace_has_both_coherences() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("t.csv");
    let o = lzs(&["--preset", "fig4b", "trace", "--phi-f", "10", "--tau", "0.5", "--output", arg(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out).unwrap();
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "t_ns,W_11,W_22,W_33,re_W_12,im_W_12,re_W_13,im_W_13,trace");
}

#[test]
fn malformed_csv_names_row_and_column() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.csv");
    std::fs::write(&bad, "# phi_i_mPhi0=-5\nphi_f_mPhi0,tau_ns,population\n1,0.5,0.2\n1,oops,0.3\n").unwrap();
    let o = lzs(&["fft", arg(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4") && err.contains("tau_ns"), "{err}");
}

#[test]
fn invalid_inputs_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("empty.json");
    std::fs::write(
        &cfg,
        r#"{"spectrum":{"slope":2.0,"gaps":[2.0]},"grid":{"phi_f":{"min":0,"max":1,"count":0},"tau":{"min":0.1,"max":1,"count":3},"phi_i":-5}}"#,
    )
    .unwrap();
    let o = lzs(&["--config", arg(&cfg), "--out", arg(tmp.path()), "sweep"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));

    let o = lzs(&["--config", arg(&cfg), "sweep", "--tolerance", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(lzs(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(lzs(&["sweep"]).status.code(), Some(2));
    let o = lzs(&["fit-gap", "--point", "1,2", "--slope", "2", "--phi-i", "-5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_file_exits_with_four() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lzs(&["fft", arg(&tmp.path().join("absent.csv"))]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn fit_gap_on_measured_points() {
    let o = lzs(&[
        "fit-gap", "--point", "1,3.85,0.0", "--point", "2,3.85,0.93", "--slope", "2", "--phi-i", "-5",
    ]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    let gap: f64 = text.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((gap - 2.0).abs() < 0.25, "{text}");
}

#[test]
fn fft_and_analyze_on_a_synthetic_map() {
    let tmp = tempfile::tempdir().unwrap();
    let map = tmp.path().join("syn.csv");
    // fringes at the large-amplitude frequency of slope 2 beyond a crossing at 0
    let mut text = String::from("# phi_i_mPhi0=-5\nphi_f_mPhi0,tau_ns,population\n");
    for j in 0..13 {
        let pf = -2.0 + j as f64;
        for i in 0..200 {
            let tau = 0.02 * (i + 1) as f64;
            let w = if pf <= 0.0 { 1.0 } else { 0.5 * (1.0 + (2.0 * pf * pf / (pf + 5.0) * tau).cos()) };
            text.push_str(&format!("{pf},{tau},{w}\n"));
        }
    }
    std::fs::write(&map, text).unwrap();

    let o = lzs(&["fft", arg(&map), "--phi-f", "10"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = String::from_utf8_lossy(&o.stdout);
    let omega: f64 = out.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((omega - 200.0 / 15.0).abs() < 0.1, "{out}");

    let o = lzs(&["analyze", arg(&map), "--out", arg(tmp.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = std::fs::read_to_string(tmp.path().join("syn_analysis.txt")).unwrap();
    let slope: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("slope_estimate="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((slope - 2.0).abs() < 0.05, "{report}");
    assert!(report.contains("anticrossing_locations.count="));
}
