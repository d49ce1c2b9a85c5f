use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
dimension = 2
epsilon = 0.02
horizon = 0.2
runs = 4
seed = 11

[expansion]
quantity = "aggregate"
sizes = [1, 1]
samples = 2000

[dsmc]
particles = 2000
cell_size = 0.1
dt = 0.02

[coagulation]
particles = 2000
cell_size = 0.1
dt = 0.01
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cluster-gas"));
    c.env("SOURCE_DATE_EPOCH", "0").env_remove("CLUSTER_GAS_WORKERS");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    if !cfg.exists() {
        std::fs::write(&cfg, CONFIG).unwrap();
    }
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

#[test]
fn validate_exits_zero() {
    let out = bin().arg("validate").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().all(|l| !l.starts_with("FAIL")));
}

#[test]
fn simulate_is_reproducible_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(dir.path(), &["simulate", "--config", "run.toml", "--out", "a", "--workers", "1", "--dump-trajectories"]);
    let b = run(dir.path(), &["simulate", "--config", "run.toml", "--out", "a2", "--workers", "3", "--dump-trajectories"]);
    assert!(a.status.success() && b.status.success());
    for table in ["collisions.csv", "clusters.csv", "trajectories.csv"] {
        let x = std::fs::read_to_string(dir.path().join("a").join(table)).unwrap();
        let y = std::fs::read_to_string(dir.path().join("a2").join(table)).unwrap();
        // headers differ only in the output directory, which enters the config hash
        let body = |s: &str| s.lines().filter(|l| !l.starts_with("# config_hash")).collect::<Vec<_>>().join("\n");
        assert_eq!(body(&x), body(&y), "{table}");
        assert!(x.starts_with("# table: "));
        assert!(x.contains("# seed: 11"));
        assert!(x.contains("# wall_clock: 0"));
    }
}

#[test]
fn simulate_twice_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for _ in 0..2 {
        assert!(run(dir.path(), &["simulate", "--config", "run.toml", "--out", "o"]).status.success());
        let o = dir.path().join("o");
        outputs.push((std::fs::read(o.join("collisions.csv")).unwrap(), std::fs::read(o.join("clusters.csv")).unwrap()));
        std::fs::remove_dir_all(o).unwrap();
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn jsonl_output_has_header_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["simulate", "--config", "run.toml", "--out", "j", "--format", "jsonl", "--seed", "3"]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("j/collisions.jsonl")).unwrap();
    let first = text.lines().next().unwrap();
    assert!(first.contains("\"config_hash\"") && first.contains("\"seed\":3"), "{first}");
}

#[test]
fn limit_models_and_expansion_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, table) in [
        ("dsmc", "modes.csv"),
        ("coagulate", "size_law.csv"),
        ("expansion", "aggregate.csv"),
        ("clusters", "sweep.csv"),
    ] {
        let out = run(dir.path(), &[cmd, "--config", "run.toml", "--out", cmd]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(dir.path().join(cmd).join(table).exists(), "{cmd}");
    }
}

#[test]
fn compare_writes_acceptance_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .current_dir(dir.path())
        .args(["compare", "--quick", "--criteria", "2,4", "--out", "cmp"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let table = std::fs::read_to_string(dir.path().join("cmp/acceptance.csv")).unwrap();
    assert!(table.contains("criterion,title,metric,value,stderr,reference,passed"));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().filter(|l| l.starts_with("PASS")).count(), 2);
}

#[test]
fn config_errors_name_the_key_and_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "dimension = 2\nepsilon = -1.0\nhorizon = 0.2\n").unwrap();
    let out = bin().current_dir(dir.path()).args(["simulate", "--config", "bad.toml"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));

    std::fs::write(dir.path().join("typo.toml"), "dimension = 2\nepsilon = 0.1\nhorizon = 0.2\n[dsmc]\nparticle = 3\n").unwrap();
    let out = bin().current_dir(dir.path()).args(["dsmc", "--config", "typo.toml"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("particle"));
}

#[test]
fn missing_section_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("plain.toml"), "dimension = 2\nepsilon = 0.1\nhorizon = 0.2\n").unwrap();
    let out = bin().current_dir(dir.path()).args(["dsmc", "--config", "plain.toml"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("[dsmc]"));
}
