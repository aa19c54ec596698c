use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robustbf")).args(args).output().expect("binary runs")
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = r#"
seed = 11

[network]
num_cells = 2
users_per_cell = 2
antennas = 4
power_db = 5.0

[uncertainty]
rho = 0.2

[bisection]
eps = 0.05
"#;

#[test]
fn nonrobust_solve_prints_one_row() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "a.toml", &format!("method = \"nonrobust\"\n{SMALL}"));
    let out = run(&["solve", "--config", path(&cfg)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("method,norm,rho"));
    assert!(lines[1].starts_with("nonrobust,l2,0.2,0,5,2,4,4,0,"));
    assert!(lines[1].ends_with(",ok,11"));
}

#[test]
fn zf_needs_enough_antennas() {
    let dir = TempDir::new().unwrap();
    let text = SMALL.replace("antennas = 4", "antennas = 3");
    let cfg = write_config(&dir, "zf.toml", &format!("method = \"zf\"\n{text}"));
    let out = run(&["solve", "--config", path(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("zf infeasible: T < K"), "{err}");
}

#[test]
fn sdp_rejects_linf() {
    let dir = TempDir::new().unwrap();
    let text = SMALL.replace("rho = 0.2", "rho = 0.2\nnorm = \"linf\"");
    let cfg = write_config(&dir, "sdp.toml", &format!("method = \"sdp\"\n{text}"));
    let out = run(&["solve", "--config", path(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unsupported"));
}

#[test]
fn empty_sweep_values_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "s.toml", &format!("{SMALL}\n[sweep]\nvalues = []\n"));
    let out = run(&["sweep", "--config", path(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_key_is_named() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "u.toml", &format!("{SMALL}\nbogus_key = 3\n"));
    let out = run(&["solve", "--config", path(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus_key"));
}

#[test]
fn sweep_output_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "sw.toml",
        &format!(
            "{SMALL}\n[sweep]\nparameter = \"rho\"\nvalues = [0.1, 0.3]\nmethods = [\"nonrobust\", \"socp\"]\ntrials = 2\npe_samples = 200\n"
        ),
    );
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let r = run(&["sweep", "--config", path(&cfg), "--out", path(out)]);
        assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    }
    let (a, b) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 1 + 2 * 2 * 2);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "a.toml", &format!("method = \"nonrobust\"\n{SMALL}"));
    let a = run(&["solve", "--config", path(&cfg), "--seed", "5"]);
    let b = run(&["solve", "--config", path(&cfg)]);
    let a = String::from_utf8(a.stdout).unwrap();
    let b = String::from_utf8(b.stdout).unwrap();
    assert!(a.lines().nth(1).unwrap().ends_with(",5"));
    assert_ne!(a, b);
}

#[test]
fn pe_and_bench_run() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "p.toml",
        &format!(
            "{SMALL}\n[pe]\nmethods = [\"nonrobust\", \"socp\"]\ntrials = 2\nsamples = 300\n\n[bench]\nmethods = [\"socp\"]\nantennas = [4]\ntrials = 1\n"
        ),
    );
    let pe_out = dir.path().join("pe.csv");
    let r = run(&["pe", "--config", path(&cfg), "--out", path(&pe_out)]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let text = fs::read_to_string(&pe_out).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2);
    for line in text.lines().skip(1) {
        let pe: f64 = line.split(',').nth(11).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&pe));
    }

    let r = run(&["bench", "--config", path(&cfg)]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(String::from_utf8_lossy(&r.stderr).contains("T=4 socp"));
}
