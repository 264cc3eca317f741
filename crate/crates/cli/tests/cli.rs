use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;

fn doping(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_doping"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Planted-band trips and the 300-sample synthetic cycle.
fn emissions_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let trips = dir.join("trips");
    std::fs::create_dir_all(&trips).unwrap();
    let mut csv = String::from("t_s,speed_kmh,accel_ms2,nox_mg\n");
    let mut t = 0;
    for v in 0..=140 {
        for k in -20..=20 {
            let v = v as f64;
            let nox = 0.02 * v
                + if (58.0..=62.0).contains(&v) {
                    100.0
                } else {
                    0.0
                };
            writeln!(csv, "{t},{v},{},{nox}", k as f64 * 0.5).unwrap();
            t += 1;
        }
    }
    std::fs::write(trips.join("grid.csv"), csv).unwrap();
    let cycle = dir.join("cycle.txt");
    let speeds: String = (0..300)
        .map(|t| {
            let t = t as f64;
            format!(
                "{}\n",
                (t * 50.0 / 30.0).min((299.0 - t) * 50.0 / 30.0).min(50.0)
            )
        })
        .collect();
    std::fs::write(&cycle, speeds).unwrap();
    (trips, cycle)
}

fn pair_trace(f: impl Fn(f64) -> (f64, f64)) -> String {
    let mut out = String::from("t,kind,value\n");
    for k in 0..8 {
        let (i, o) = f(k as f64);
        writeln!(out, "{k},pair,{i};{o}").unwrap();
    }
    out
}

/// The two-standard robust example; `with_bad` adds the trace breaking the upper clause.
fn cleanness_fixture(dir: &Path, with_bad: bool) -> (PathBuf, PathBuf) {
    let traces = dir.join("traces");
    std::fs::create_dir_all(&traces).unwrap();
    std::fs::write(traces.join("w0.csv"), pair_trace(|k| (k + 1.0, 0.0))).unwrap();
    std::fs::write(traces.join("w1.csv"), pair_trace(|k| (k + 1.0, k + 1.0))).unwrap();
    std::fs::write(
        traces.join("wa.csv"),
        pair_trace(|k| (1.3 * (k + 1.0), 0.0)),
    )
    .unwrap();
    std::fs::write(
        traces.join("wb.csv"),
        pair_trace(|k| (1.3 * (k + 1.0), 1.3 * (k + 1.0))),
    )
    .unwrap();
    if with_bad {
        std::fs::write(
            traces.join("wx.csv"),
            pair_trace(|k| (1.5 + k, 1.5 + 1.7 * k)),
        )
        .unwrap();
    }
    let contract = dir.join("contract.toml");
    std::fs::write(
        &contract,
        r#"kind = "robust"
kappa_in = 1.0
kappa_out = 2.0
std = ["traces/w0.csv", "traces/w1.csv"]

[d_in]
kind = "abs-scalar"

[d_out]
kind = "abs-scalar"
"#,
    )
    .unwrap();
    (contract, traces)
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(doping(&["--help"]).0, 0);
    assert_eq!(doping(&["fairness", "monitor", "--help"]).0, 0);
    assert_eq!(doping(&[]).0, 2);
    assert_eq!(doping(&["falsify", "--bogus"]).0, 2);
    let dir = tempfile::tempdir().unwrap();
    let (trips, cycle) = emissions_fixture(dir.path());
    let (code, _, err) = doping(&[
        "emissions",
        "falsify",
        "--trips",
        s(&trips),
        "--cycle",
        s(&cycle),
        "--beta",
        "-1",
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn bad_contract_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let (contract, traces) = cleanness_fixture(dir.path(), false);
    std::fs::write(&contract, "kind = \"robust\"\nnonsense = [").unwrap();
    let (code, _, err) = doping(&["oracle", "--contract", s(&contract), "--traces", s(&traces)]);
    assert_eq!(code, 3, "{err}");
    let (code, _, _) = doping(&[
        "oracle",
        "--contract",
        "/nonexistent.toml",
        "--traces",
        s(&traces),
    ]);
    assert_eq!(code, 3);
}

#[test]
fn oracle_and_trace_falsification() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let (contract, traces) = cleanness_fixture(dir.path(), false);
    let base = [
        "--contract",
        s(&contract),
        "--traces",
        s(&traces),
        "--out-dir",
        s(&out),
    ];
    let (code, stdout, err) = doping(&[&["oracle"], &base[..]].concat());
    assert_eq!(code, 0, "{stdout}{err}");
    let (code, _, _) = doping(&[&["falsify", "--max-iter", "50"], &base[..]].concat());
    assert_eq!(code, 0);

    let (contract, traces) = cleanness_fixture(dir.path(), true);
    let base = [
        "--contract",
        s(&contract),
        "--traces",
        s(&traces),
        "--out-dir",
        s(&out),
    ];
    let (code, _, _) = doping(&[&["oracle"], &base[..]].concat());
    assert_eq!(code, 1);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("oracle.json")).unwrap()).unwrap();
    assert_eq!(report["upper"]["other"], "wx.csv");
    assert_eq!(report["upper"]["time"], 3);
    assert_eq!(report["psi_upper"]["holds"], false);

    let (code, stdout, _) = doping(
        &[
            &["falsify", "--max-iter", "200", "--restarts", "3"],
            &base[..],
        ]
        .concat(),
    );
    assert_eq!(code, 1);
    assert!(stdout.contains("\"witness\": \"wx.csv\""), "{stdout}");
    assert!(out.join("report.manifest.json").exists());
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(csv.starts_with("iteration,robustness,accepted\n"));
}

#[test]
fn emissions_falsify_finds_planted_band_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let (trips, cycle) = emissions_fixture(dir.path());
    let out = dir.path().join("run1");
    let (code, stdout, err) = doping(&[
        "--seed",
        "42",
        "emissions",
        "falsify",
        "--trips",
        s(&trips),
        "--cycle",
        s(&cycle),
        "--kappa-in",
        "15",
        "--kappa-out",
        "88",
        "--out-dir",
        s(&out),
    ]);
    assert_eq!(code, 1, "{stdout}{err}");
    assert!(stdout.contains("\"membership_violations\": 0"), "{stdout}");
    let plot = std::fs::read_to_string(out.join("plot.csv")).unwrap();
    assert!(plot.starts_with("t_s,std_speed,candidate_speed\n"));
    assert_eq!(plot.lines().count(), 301);

    let replayed = dir.path().join("run2");
    let manifest = out.join("report.manifest.json");
    let (code, _, _) = doping(&[
        "replay",
        "--manifest",
        s(&manifest),
        "--out-dir",
        s(&replayed),
        "--quiet",
    ]);
    assert_eq!(code, 1);
    for f in ["report.csv", "plot.csv"] {
        assert_eq!(
            std::fs::read(out.join(f)).unwrap(),
            std::fs::read(replayed.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn emissions_predict_reports_rate() {
    let dir = tempfile::tempdir().unwrap();
    let trips = dir.path().join("trips");
    std::fs::create_dir_all(&trips).unwrap();
    std::fs::write(
        trips.join("a.csv"),
        "t_s,speed_kmh,nox_mg\n0,100,5\n1,100,7\n",
    )
    .unwrap();
    let cycle = dir.path().join("c.txt");
    std::fs::write(&cycle, "100\n100\n100\n").unwrap();
    let (code, stdout, err) = doping(&[
        "emissions",
        "predict",
        "--trips",
        s(&trips),
        "--cycle",
        s(&cycle),
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("prediction.json")).unwrap())
            .unwrap();
    // 6 mg/s at 100 km/h is 216 mg/km
    assert!(
        (v["mg_per_km"].as_f64().unwrap() - 216.0).abs() < 1e-9,
        "{stdout}"
    );
}

#[test]
fn fairness_monitor_flags_john_under_p_prime() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = dir.path().join("applicants.csv");
    std::fs::write(
        &inputs,
        "case_id,ed,ex,pe,in,sk\njohn,0.5,0.5,0.5,0.5,0.2\nhigh,0.5,0.5,0.5,0.5,0.9\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let run = |system: &str| {
        doping(&[
            "--seed",
            "3",
            "fairness",
            "monitor",
            "--system",
            system,
            "--inputs",
            s(&inputs),
            "--out-dir",
            s(&out),
            "--quiet",
        ])
    };
    assert_eq!(run("p-prime").0, 1);
    let first = std::fs::read_to_string(out.join("fairness.csv")).unwrap();
    let mut rows = csv::Reader::from_reader(first.as_bytes());
    let headers = rows.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        ["case_id", "score", "normalized", "counterpart_json"]
    );
    let recs: Vec<_> = rows.records().map(|r| r.unwrap()).collect();
    assert_eq!(&recs[0][0], "john");
    assert!(recs[0][2].parse::<f64>().unwrap() < 0.0);
    assert!(recs[1][2].parse::<f64>().unwrap() >= 0.0);
    let counterpart: Vec<f64> = serde_json::from_str(&recs[0][3]).unwrap();
    assert_eq!(counterpart.len(), 5);

    assert_eq!(run("p-prime").0, 1);
    assert_eq!(
        first,
        std::fs::read_to_string(out.join("fairness.csv")).unwrap()
    );
    assert_eq!(run("p").0, 0);
}

#[test]
fn table_system_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("table.csv");
    std::fs::write(&table, "x,out\n0,0\n0.5,0\n1,1\n").unwrap();
    let inputs = dir.path().join("in.csv");
    std::fs::write(&inputs, "x\n0.74\n").unwrap();
    let contract = dir.path().join("fair.toml");
    std::fs::write(
        &contract,
        "kind = \"fairness\"\nf = [[0.0, inf, 1.0, 0.0]]\n\n[d_in]\nkind = \"abs-scalar\"\n\n[d_out]\nkind = \"abs-scalar\"\n",
    )
    .unwrap();
    let (code, stdout, err) = doping(&[
        "fairness",
        "monitor",
        "--system",
        s(&table),
        "--contract",
        s(&contract),
        "--inputs",
        s(&inputs),
        "--max-iter",
        "2000",
        "--step-bound",
        "0.05",
        "--out-dir",
        s(dir.path()),
    ]);
    // 0.74 ↦ 0 and 0.76 ↦ 1 are 0.02 apart
    assert_eq!(code, 1, "{stdout}{err}");
}
