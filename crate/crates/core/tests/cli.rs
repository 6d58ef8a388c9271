use std::path::Path;
use std::process::{Command, Output};

fn kklab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kklab")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const LINE: &str = "name = \"line\"\nchecks = [\"deficiency\"]\n\n[operator]\nexpr = \"i_d_dx + x\"\n";

#[test]
fn deficiency_exit_codes() {
    assert_eq!(code(&kklab(&["deficiency", "i_d_dx + x", "--interval", "-inf,inf"])), 0);
    let half = kklab(&["deficiency", "i_d_dx + x", "--interval", "0,inf"]);
    assert_eq!(code(&half), 1);
    assert!(String::from_utf8_lossy(&half.stdout).contains("indices (0, 1)"));
    let sl = kklab(&["deficiency", "-d2_dx2 + x^2"]);
    assert_eq!(code(&sl), 0);
    let bad = kklab(&["deficiency", "i_d_dx + x +"]);
    assert_eq!(code(&bad), 2);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("column"));
    assert_eq!(code(&kklab(&["deficiency", "i_d_dx", "--interval", "0"])), 2);
    assert_eq!(code(&kklab(&["deficiency", "i_d_dx", "--interval", "2,1"])), 2);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&kklab(&[])), 2);
    assert_eq!(code(&kklab(&["frobnicate"])), 2);
    assert_eq!(code(&kklab(&["run", "/nonexistent/scenario.toml"])), 2);
    assert_eq!(code(&kklab(&["--grid-n", "many", "run", "x.toml"])), 2);
}

#[test]
fn run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "osc.toml",
        &format!("{LINE}\n[grid]\nhalf_width = 8.0\nn_points = 401\n\n[output]\ndir = \"out\"\n"),
    );
    let o = kklab(&["run", &cfg]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS deficiency"));
    let out = dir.path().join("out");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["verdict"], true);
    assert_eq!(report["provenance"]["config_sha256"].as_str().unwrap().len(), 64);
    assert!(report["checks"][0]["tolerances"]["ode_tolerance"].is_number());
    let csv = std::fs::read_to_string(out.join("spectra.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("index,eigenvalue,domain_tag"));
    assert_eq!(lines.count(), 802);
    let svg = std::fs::read_to_string(out.join("plots.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    // missing sections are reported, not fatal
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

#[test]
fn run_failures_and_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let half = write(dir.path(), "half.toml", &format!("{LINE}interval = [0.0, inf]\n"));
    let json = dir.path().join("half.json");
    let o = kklab(&["--json-out", json.to_str().unwrap(), "run", &half]);
    assert_eq!(code(&o), 1);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["checks"][0]["result"]["esa"], false);
    let bad = write(dir.path(), "bad.toml", &LINE.replace("i_d_dx + x", "i_d_dx + x +"));
    let o = kklab(&["run", &bad]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 5"), "{}", String::from_utf8_lossy(&o.stderr));
    let broken = write(dir.path(), "broken.toml", "name = \"x\"\nchecks = [\n");
    assert_eq!(code(&kklab(&["run", &broken])), 2);
    let missing = write(dir.path(), "missing.toml", "name = \"x\"\nchecks = [\"kasparov\"]\n");
    let o = kklab(&["run", &missing]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn spectrum_subcommand_ladder() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", &format!("{LINE}\n[grid]\nhalf_width = 20.0\nn_points = 2001\n"));
    let csv = dir.path().join("s.csv");
    let o = kklab(&["spectrum", &cfg, "--csv-out", csv.to_str().unwrap(), "--refine", "1"]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let fine: Vec<f64> = text
        .lines()
        .skip(1)
        .filter(|l| l.ends_with(",n=4001"))
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(fine.len(), 8002);
    let pos: Vec<f64> = fine.iter().copied().filter(|&v| v > 1e-3).take(5).collect();
    for (n, v) in pos.iter().enumerate() {
        let want = (2.0 * (n + 1) as f64).sqrt();
        assert!(((v - want) / want).abs() < 1e-2, "{v} vs {want}");
    }
    let stdout = kklab(&["spectrum", &cfg, "--grid-n", "101"]);
    assert_eq!(code(&stdout), 0);
    assert_eq!(String::from_utf8_lossy(&stdout.stdout).lines().count(), 203);
    let no_grid = write(dir.path(), "n.toml", LINE);
    assert_eq!(code(&kklab(&["spectrum", &no_grid])), 2);
}

#[test]
fn plots_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "p.toml",
        &format!("{LINE}\n[grid]\nhalf_width = 8.0\nn_points = 201\n\n[output]\ndir = \"o\"\n"),
    );
    let a = dir.path().join("a.svg");
    let b = dir.path().join("b.svg");
    assert_eq!(code(&kklab(&["--svg-out", a.to_str().unwrap(), "--jobs", "1", "run", &cfg])), 0);
    assert_eq!(code(&kklab(&["--svg-out", b.to_str().unwrap(), "run", &cfg])), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}
