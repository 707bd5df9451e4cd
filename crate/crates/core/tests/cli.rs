use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_si-age"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn rows(out: &Output) -> Vec<Vec<String>> {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut r = csv::Reader::from_reader(out.stdout.as_slice());
    r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect()
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("si-age-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn equilibria_two_endemic_states() {
    let r = rows(&run(&["equilibria", "--preset", "choices"]));
    assert_eq!(r.len(), 3);
    assert_eq!(r[0][1], "disease-free");
    assert!(r[1..].iter().all(|x| x[1] == "endemic"));
}

#[test]
fn equilibria_without_contact() {
    let cfg = tmp("k0.toml");
    std::fs::write(&cfg, "preset = \"choices\"\n[model]\nk = \"0\"\n").unwrap();
    let r = rows(&run(&["equilibria", "--config", cfg.to_str().unwrap()]));
    assert_eq!(r.len(), 1);
    assert_eq!(r[0][5].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn equilibria_stab_preset() {
    let r = rows(&run(&["equilibria", "--preset", "choices-stab2", "--alpha", "0"]));
    let w: f64 = r[1][2].parse().unwrap();
    assert!((w - 5.04512).abs() < 5e-4, "{w}");
}

#[test]
fn spectrum_verdicts() {
    let cfg = tmp("dfe.toml");
    std::fs::write(&cfg, "[spectrum]\nequilibrium = \"disease-free\"\n").unwrap();
    let c = cfg.to_str().unwrap();
    let stable = rows(&run(&["spectrum", "--preset", "plus(34)", "--alpha", "24", "--config", c]));
    assert!(!stable.is_empty());
    assert!(stable.iter().all(|x| x[0].parse::<f64>().unwrap() < 0.0));
    let unstable = rows(&run(&["spectrum", "--preset", "plus(34)", "--alpha", "10", "--config", c]));
    assert!(unstable
        .iter()
        .any(|x| x[0].parse::<f64>().unwrap() > 0.0 && x[1].parse::<f64>().unwrap() == 0.0));
    let stab = rows(&run(&["spectrum", "--preset", "choices-stab", "--alpha", "0"]));
    for sign in [1.0, -1.0] {
        assert!(stab.iter().any(|x| {
            let (re, im): (f64, f64) = (x[0].parse().unwrap(), x[1].parse().unwrap());
            re.abs() < 1e-4 && (im - 5.0 * sign).abs() < 1e-4
        }));
    }
    assert_eq!(stab.iter().filter(|x| x[4] == "true").count(), 2);
}

#[test]
fn branch_writes_csv_and_svg() {
    let svg = tmp("b.svg");
    let out = run(&["branch", "--preset", "plus(34)", "--alpha-range", "19:23:0.25", "--svg", svg.to_str().unwrap()]);
    let r = rows(&out);
    assert!(r.iter().any(|x| x[0] == "transcritical"));
    assert!(r.iter().any(|x| x[0] == "fold"));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.contains("stroke-dasharray"));
    assert!(text.starts_with("<svg"));
}

#[test]
fn simulate_converges_and_reports() {
    let out = run(&["simulate", "--preset", "choices2", "--alpha", "0.9"]);
    let r = rows(&out);
    assert_eq!(r[0].len(), 6);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("outcome=converged"), "{err}");
}

#[test]
fn simulate_from_exact_dfe_stays_put() {
    let cfg = tmp("dfe_sim.toml");
    std::fs::write(&cfg, "[simulate]\nstart = \"disease-free\"\nperturbation = 0.0\nt_end = 5.0\ncells = 128\n").unwrap();
    let r = rows(&run(&["simulate", "--preset", "choices", "--config", cfg.to_str().unwrap()]));
    let b0: f64 = r[0][1].parse().unwrap();
    for x in &r {
        assert_eq!(x[2].parse::<f64>().unwrap(), 0.0);
        let b: f64 = x[1].parse().unwrap();
        assert!((b - b0).abs() < 1e-3 * b0, "{b} vs {b0}");
    }
}

#[test]
fn output_is_deterministic_across_thread_counts() {
    let a = run(&["branch", "--preset", "choices", "--alpha-range", "8:12:0.5", "--threads", "1"]);
    let b = run(&["branch", "--preset", "choices", "--alpha-range", "8:12:0.5", "--threads", "4"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn dumped_config_reproduces_run() {
    let dumped = run(&["dump-config", "--preset", "plus(26)", "--alpha", "15"]);
    assert!(dumped.status.success());
    let cfg = tmp("dump.toml");
    std::fs::write(&cfg, &dumped.stdout).unwrap();
    let direct = run(&["equilibria", "--preset", "plus(26)", "--alpha", "15"]);
    let reloaded = run(&["equilibria", "--config", cfg.to_str().unwrap()]);
    assert_eq!(direct.stdout, reloaded.stdout);
    let again = run(&["dump-config", "--config", cfg.to_str().unwrap()]);
    assert_eq!(again.stdout, dumped.stdout);
}

#[test]
fn exit_codes() {
    let cfg = tmp("bad.toml");
    std::fs::write(&cfg, "[model]\nalpah = 3\n").unwrap();
    let out = run(&["equilibria", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpah"));
    assert_eq!(run(&["branch", "--preset", "choices"]).status.code(), Some(2));
    assert_eq!(run(&["spectrum", "--preset", "choices", "--alpha", "40"]).status.code(), Some(3));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
