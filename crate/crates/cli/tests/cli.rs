use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn aqc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aqc")).current_dir(dir).env_remove("AQC_OUT").args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "status {:?}\nstderr: {}", o.status, String::from_utf8_lossy(&o.stderr));
}

const GAP: &str = "command = \"gap\"\n[instance]\nfamily = \"grover\"\nn = 6\n[gap]\ngrid = 201\nrefine = true\n";
const SK_GAP: &str = "[instance]\nfamily = \"sk\"\nn = 5\n[gap]\ngrid = 21\nrefine = false\n";

#[test]
fn gap_reports_grover_minimum() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "g.toml", GAP);
    ok(&aqc(t.path(), &["gap", "--config", "g.toml", "--out", "o"]));
    let summary = &json(&t.path().join("o/gap.json"))["summary"];
    assert!((summary["min_gap"].as_f64().unwrap() - 0.125).abs() < 1e-9);
    assert!((summary["s_min"].as_f64().unwrap() - 0.5).abs() < 1e-6);
    let csv = fs::read_to_string(t.path().join("o/gap.csv")).unwrap();
    assert!(csv.starts_with("s,e0,e1,e2,e3,gap\n"));
    assert!(!csv.contains('\r'));
    let rec = json(&t.path().join("o/run_record.json"));
    assert_eq!(rec["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(rec["files"].as_array().unwrap().len(), 2);
    assert!(rec["timing"]["elapsed_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn malformed_config_exits_2_without_files() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "bad.toml", "[instance]\nfamily = \"grover\"\nn = 6\nunknown = 1\n");
    let o = aqc(t.path(), &["gap", "--config", "bad.toml", "--out", "o"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!t.path().join("o").exists());
    let err: Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"], "schema");

    write(t.path(), "bad2.toml", "[instance]\nfamily = \"grover\"\nn = 0\n");
    let o = aqc(t.path(), &["gap", "--config", "bad2.toml", "--out", "o"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!t.path().join("o").exists());
}

#[test]
fn command_mismatch_is_a_schema_error() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "g.toml", GAP);
    assert_eq!(aqc(t.path(), &["schedule", "--config", "g.toml", "--out", "o"]).status.code(), Some(2));
}

#[test]
fn replay_identical_and_after_seed_change() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "sk.toml", SK_GAP);
    ok(&aqc(t.path(), &["gap", "--config", "sk.toml", "--out", "a", "--seed", "1"]));
    let o = aqc(t.path(), &["replay", "--record", "a/run_record.json"]);
    ok(&o);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(r["differing"].as_array().unwrap().is_empty());
    assert_eq!(r["identical"][0], "gap.csv");

    write(t.path(), "sk2.toml", &format!("seed = 2\n{SK_GAP}"));
    let o = aqc(t.path(), &["replay", "--record", "a/run_record.json", "--config", "sk2.toml"]);
    assert_eq!(o.status.code(), Some(1));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["differing"].as_array().unwrap().len(), 1);
    assert_ne!(r["prior_config_hash"], r["rerun_config_hash"]);
}

#[test]
fn tolerance_change_keeps_payloads() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "g.toml", GAP);
    ok(&aqc(t.path(), &["gap", "--config", "g.toml", "--out", "a"]));
    write(t.path(), "g2.toml", &format!("{GAP}[tolerances]\nsmall_gap = 0.5\n"));
    let o = aqc(t.path(), &["replay", "--record", "a/run_record.json", "--config", "g2.toml"]);
    ok(&o);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(r["differing"].as_array().unwrap().is_empty());
    assert_eq!(r["rerun_warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn replay_reports_missing_artifacts() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "g.toml", GAP);
    ok(&aqc(t.path(), &["gap", "--config", "g.toml", "--out", "a"]));
    fs::remove_file(t.path().join("a/gap.csv")).unwrap();
    let o = aqc(t.path(), &["replay", "--record", "a/run_record.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing artifact"));
}

#[test]
fn reruns_are_byte_identical() {
    let t = tempfile::tempdir().unwrap();
    write(
        t.path(),
        "e.toml",
        "t_f = [2.0, 5.0]\n[instance]\nfamily = \"sk\"\nn = 4\n[evolve]\ntrack = 2\nshots = 100\n",
    );
    ok(&aqc(t.path(), &["evolve", "--config", "e.toml", "--out", "a"]));
    ok(&aqc(t.path(), &["evolve", "--config", "e.toml", "--out", "b"]));
    for f in ["evolve.csv", "trace_0.csv", "trace_1.csv", "counts_0.csv", "counts_1.csv"] {
        assert_eq!(fs::read(t.path().join("a").join(f)).unwrap(), fs::read(t.path().join("b").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn output_directory_from_environment() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "g.toml", "[instance]\nfamily = \"grover\"\nn = 2\n[gap]\ngrid = 11\n");
    let o = Command::new(env!("CARGO_BIN_EXE_aqc"))
        .current_dir(t.path())
        .env("AQC_OUT", "from-env")
        .env("AQC_THREADS", "1")
        .args(["schedule", "--config", "g.toml"])
        .output()
        .unwrap();
    ok(&o);
    assert!(t.path().join("from-env/schedule.csv").exists());
}

#[test]
fn every_subcommand_produces_payloads() {
    let t = tempfile::tempdir().unwrap();
    let cases: &[(&str, &str, &[&str])] = &[
        ("schedule", "schedule = { kind = \"roland_cerf\" }\n[instance]\nfamily = \"grover\"\nn = 4\n", &["schedule.csv"]),
        ("bounds", "[instance]\nfamily = \"grover\"\nn = 3\n[bounds]\ngrid = 11\n", &["bounds.csv", "bounds.json"]),
        (
            "compile",
            "[compile]\ntext = \"qubits 1\\ngate h 0\\n\"\nt_f = 400.0\n",
            &["compile.csv", "compile.json", "circuit.txt"],
        ),
        (
            "gadget",
            "[gadget]\nn = 3\nlambda = 0.05\nlambdas = [0.01, 0.02, 0.03, 0.04]\n[[gadget.terms]]\ncoeff = 1.0\nqubits = [0, 1, 2]\npaulis = \"ZZZ\"\n",
            &["gadget.csv", "levels.csv"],
        ),
        (
            "transform",
            "[transform]\nkind = \"amplify\"\nn = 2\n[[transform.terms]]\nweight = 1.0\nqubits = [0]\nstates = [1]\n[[transform.terms]]\nweight = 0.5\nqubits = [1]\nstates = [1]\n",
            &["spectrum.csv", "transform.json"],
        ),
        ("pagerank", "[pagerank]\ngraph = { kind = \"preferential_attachment\", n = 12, m = 2 }\n", &["pagerank.csv"]),
        (
            "bench",
            "[instance]\nfamily = \"plain_hw\"\nn = 4\n[bench]\nsizes = [4, 6]\n[[bench.solvers]]\nsolver = \"sa\"\nname = \"sa\"\nsweeps = [5, 20]\nrepetitions = 50\nschedule = { kind = \"linear_t\", t_init = 2.0, t_final = 0.1 }\n",
            &["bench.csv", "bench.json"],
        ),
    ];
    for (cmd, cfg, files) in cases {
        let name = format!("{cmd}.toml");
        write(t.path(), &name, cfg);
        let out = format!("out-{cmd}");
        ok(&aqc(t.path(), &[cmd, "--config", &name, "--out", &out]));
        for f in *files {
            assert!(t.path().join(&out).join(f).exists(), "{cmd}: {f}");
        }
    }
    let compile = json(&t.path().join("out-compile/compile.json"));
    assert_eq!(compile["passed"], true, "{compile}");
    let bench = fs::read_to_string(t.path().join("out-bench/bench.csv")).unwrap();
    assert!(bench.starts_with("family,n,solver,knob,success,tts\n"));
    assert_eq!(bench.lines().count(), 5);
}

#[test]
fn destoquasticized_xxzz_is_stoquastic() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "d.toml", "[transform]\nkind = \"destoquasticize\"\nrandom_xxzz = 3\n");
    ok(&aqc(t.path(), &["transform", "--config", "d.toml", "--out", "o"]));
    let j = json(&t.path().join("o/transform.json"));
    assert_eq!(j["output"]["stoquastic"], true);
    assert!(j["minus_sector_deviation"].as_f64().unwrap() < 1e-10);
}
