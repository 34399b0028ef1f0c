use std::path::Path;
use std::process::{Command, Output};

fn qdecoh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdecoh")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(out)).unwrap()
}

fn term<'a>(doc: &'a serde_json::Value, id: &str) -> &'a serde_json::Value {
    doc["report"]["terms"].as_array().unwrap().iter().find(|t| t["id"] == id).unwrap()
}

#[test]
fn one_qubit_dominant_line() {
    let doc = json(&qdecoh(&["run", "--scenario", "one_qubit_i"]));
    assert_eq!(doc["report_version"], 1);
    assert_eq!(doc["scenario"], "one_qubit_i");
    let t2 = term(&doc, "2");
    assert_eq!(t2["effect"], "LD-gating");
    let c = t2["contribution"].as_f64().unwrap();
    assert!((c - 0.54).abs() < 1e-6, "{c}");
    let others = doc["report"]["terms"].as_array().unwrap().iter().filter(|t| t["id"] != "2");
    for t in others {
        assert!(t["contribution"].as_f64().unwrap() < c);
    }
}

#[test]
fn ghz_notes_carry_boltzmann_factor() {
    let doc = json(&qdecoh(&["run", "--scenario", "no_gating", "--state", "ghz", "--n", "10000"]));
    let notes: Vec<&str> = doc["report"]["notes"].as_array().unwrap().iter().map(|n| n.as_str().unwrap()).collect();
    assert!(notes.iter().any(|n| n.contains("Boltzmann factor")), "{notes:?}");
    assert!(doc["report"]["tau_d"].as_f64().unwrap() > 0.0);
    assert_eq!(doc["report"]["n_qubits"], 10000);
}

#[test]
fn two_qubit_sweep_is_flat() {
    let text = stdout(&qdecoh(&[
        "run", "--scenario", "two_qubit", "--sweep", "n_qubits", "2..10000", "--points", "5", "--format", "csv",
    ]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n_qubits,total_rate,exact_rate,tau_d,gate_time,delta_f,dominant");
    assert_eq!(lines.len(), 6);
    let rates: Vec<&str> = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap()).collect();
    assert!(rates.iter().all(|r| *r == rates[0]));
    assert!(lines[1].starts_with("2.000000e0,") && lines[5].starts_with("1.000000e4,"));
}

#[test]
fn sweep_subcommand_rejects_unknown_parameter() {
    let out = qdecoh(&["sweep", "--scenario", "one_qubit_i", "--param", "spin", "--from", "1", "--to", "2"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("spin"));
}

#[test]
fn sweep_subcommand_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let p = path.to_str().unwrap();
    stdout(&qdecoh(&[
        "sweep", "--scenario", "one_qubit_i", "--param", "n_qubits", "--from", "1", "--to", "1000", "--points", "4",
        "--format", "csv", "--output", p,
    ]));
    let text = std::fs::read_to_string(&path).unwrap();
    let rates: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(rates.len(), 4);
    assert!(rates.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, format: &str| {
        let path = dir.path().join(name);
        stdout(&qdecoh(&["run", "--scenario", "one_qubit_ii", "--n", "50", "--format", format, "--output", path.to_str().unwrap()]));
        (std::fs::read(&path).unwrap(), std::fs::read(path.with_file_name(format!("{}.relaxation.csv", name.split('.').next().unwrap()))).unwrap())
    };
    assert_eq!(run("a.json", "json"), run("b.json", "json"));
    let (csv, rel) = run("c.csv", "csv");
    let csv = String::from_utf8(csv).unwrap();
    assert!(csv.starts_with("term,family,symbol,multiplicity,relaxation,state_factor,contribution,exact\n"));
    assert!(String::from_utf8(rel).unwrap().starts_with("family,label_a,label_b,re,im\n"));
}

#[test]
fn lattice_frequencies() {
    let text = stdout(&qdecoh(&["lattice"]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "index,nu_rad_per_s");
    // 4x4x4 ions, three modes each, plus header and nu_max rows
    assert_eq!(lines.len(), 3 * 64 + 2);
    let nu_max: f64 = lines.last().unwrap().strip_prefix("nu_max,").unwrap().parse().unwrap();
    assert!((nu_max / 8e7 - 1.0).abs() < 0.01);
}

#[test]
fn oracle_check_passes() {
    let text = stdout(&qdecoh(&["oracle-check", "--trials", "4", "--seed", "3"]));
    assert_eq!(text.lines().filter(|l| l.starts_with("trial")).count(), 4);
    assert!(text.lines().last().unwrap().starts_with("max gap"));
}

#[test]
fn dump_couplings_writes_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("relax.csv");
    stdout(&qdecoh(&["dump-couplings", "--scenario", "two_qubit", "--output", path.to_str().unwrap()]));
    let rel = std::fs::read_to_string(&path).unwrap();
    assert!(rel.lines().any(|l| l.starts_with("C+;C+,")));
    let cpl = std::fs::read_to_string(dir.path().join("relax.couplings.csv")).unwrap();
    assert!(cpl.starts_with("family,mode,ion,transition,re,im\n"));
    assert!(cpl.lines().any(|l| l.starts_with("ld_gating_theta,")));
}

#[test]
fn unknown_scenario_fails() {
    let out = qdecoh(&["run", "--scenario", "three_qubit"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown scenario name"));
}

#[test]
fn missing_scenario_fails() {
    let out = qdecoh(&["run"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("scenario required"));
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn config_file_and_custom_state() {
    let dir = tempfile::tempdir().unwrap();
    let moments = dir.path().join("moments.csv");
    write(&moments, "label,re,im\nbdb,1,0\n");
    let cfg = dir.path().join("run.toml");
    write(
        &cfg,
        &format!(
            "[params]\nn_qubits = 20\n\n[scenario]\nkind = \"two_qubit\"\nstate = {{ custom = \"{}\" }}\n",
            moments.display()
        ),
    );
    let doc = json(&qdecoh(&["run", "--config", cfg.to_str().unwrap()]));
    assert_eq!(doc["scenario"], "two_qubit");
    assert_eq!(doc["report"]["n_qubits"], 20);
    // 2 Gamma_C+ (n - |b|^2) with Gamma_C+ = 1.5e8 and n = 1
    assert_eq!(term(&doc, "120")["contribution"].as_f64().unwrap(), 3e8);

    // command-line flags override the file
    let doc = json(&qdecoh(&["run", "--config", cfg.to_str().unwrap(), "--scenario", "one_qubit_i", "--state", "gated"]));
    assert_eq!(doc["scenario"], "one_qubit_i");
}

#[test]
fn incompatible_state_fails() {
    let out = qdecoh(&["run", "--scenario", "two_qubit", "--state", "hadamard"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not available"));
}
