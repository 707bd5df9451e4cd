//! Command-line front end: configuration, subcommands and output files.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::continuation::{trace_diagram, Branch};
use crate::equilibria::{disease_free, find_endemic, EquilibriumPoint};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::ratefn::parse_rate;
use crate::simulate::{perturbed_initial, run, Probe, SimReport};
use crate::spectrum::spectrum_at;
use crate::tabulated::TabulatedFn;

pub use config::{RawConfig, RunConfig, Selector, Start};
use output::{num, opt_num, write_csv};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaRange {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl AlphaRange {
    /// `lo, lo + step, ...`, ending exactly at `hi`.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step - 1e-9).ceil().max(0.0) as usize;
        (0..=n).map(|k| (self.lo + k as f64 * self.step).min(self.hi)).collect()
    }
}

fn parse_alpha_range(s: &str) -> std::result::Result<AlphaRange, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err("expected LO:HI:STEP".into());
    }
    let v: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{}`: {}", p, e)))
        .collect::<std::result::Result<_, _>>()?;
    let r = AlphaRange { lo: v[0], hi: v[1], step: v[2] };
    if !(r.lo >= 0.0 && r.hi >= r.lo && r.step > 0.0 && r.hi.is_finite()) {
        return Err("need 0 <= LO <= HI and STEP > 0".into());
    }
    Ok(r)
}

#[derive(Debug, Parser)]
#[command(name = "si-age", version, about = "Equilibria, spectra, bifurcation diagrams and simulations of an age-structured S-I model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Built-in parameter set, e.g. `choices` or `plus(34)`.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Output file (standard output when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// SVG diagram path (branch only).
    #[arg(long, global = true)]
    pub svg: Option<PathBuf>,
    /// Disease-induced mortality, overriding the configuration.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// `LO:HI:STEP` for branch tracing or an equilibria sweep.
    #[arg(long, global = true, value_parser = parse_alpha_range)]
    pub alpha_range: Option<AlphaRange>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Disease-free and endemic equilibria with R0e.
    Equilibria,
    /// Characteristic roots at one equilibrium.
    Spectrum,
    /// Bifurcation diagram in alpha, with an optional SVG.
    Branch,
    /// Time integration from a perturbed equilibrium or given profiles.
    Simulate,
    /// Print the effective configuration.
    DumpConfig,
}

/// Loads the configuration named by the flags and applies `--alpha`.
pub fn load(cli: &Cli) -> Result<RunConfig> {
    let raw = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Config {
                path: p.display().to_string(),
                message: e.to_string(),
            })?;
            RawConfig::parse(&text)?
        }
        None => RawConfig::default(),
    };
    if raw.preset.is_none() && cli.preset.is_none() && cli.config.is_none() {
        return Err(Error::Config { path: "preset".into(), message: "give --config or --preset".into() });
    }
    let mut run = raw.resolve(cli.preset.as_deref())?;
    if let Some(a) = cli.alpha {
        run.spec.alpha = a;
    }
    Ok(run)
}

fn selected(model: &Model, alpha: f64, sel: Selector, index: usize) -> Result<EquilibriumPoint> {
    match sel {
        Selector::DiseaseFree => disease_free(model, alpha),
        Selector::Endemic => {
            let mut all = find_endemic(model, alpha)?;
            let n = all.len();
            if index >= n {
                return Err(Error::EquilibriumNotFound(format!(
                    "endemic state {} requested at alpha = {}, {} found",
                    index, alpha, n
                )));
            }
            Ok(all.swap_remove(index))
        }
    }
}

pub fn equilibria_rows(model: &Model, alphas: &[f64]) -> Result<Vec<Vec<String>>> {
    let mut rows = Vec::new();
    for &a in alphas {
        let mut eqs = vec![disease_free(model, a)?];
        eqs.extend(find_endemic(model, a)?);
        for e in eqs {
            rows.push(vec![
                num(e.alpha),
                e.kind.label().to_string(),
                num(e.w_star),
                num(e.b_star),
                num(e.q_star),
                num(e.r0e),
                num(e.phi_slope),
            ]);
        }
    }
    Ok(rows)
}

pub const EQUILIBRIA_HEADER: [&str; 7] = ["alpha", "kind", "W_star", "B_star", "Q_star", "R0e", "phi_slope"];
pub const SPECTRUM_HEADER: [&str; 5] = ["re", "im", "residual", "multiplicity", "rightmost"];
pub const BRANCH_HEADER: [&str; 10] =
    ["record", "branch", "alpha", "W_star", "kind", "stable", "rightmost_re", "rightmost_im", "omega", "refined"];
pub const TRACE_HEADER: [&str; 6] = ["t", "B", "W", "Q", "totalS", "totalI"];

pub fn spectrum_rows(model: &Model, eq: &EquilibriumPoint) -> Result<Vec<Vec<String>>> {
    let res = spectrum_at(model, eq)?;
    if res.partial {
        log::warn!("root list truncated at {} roots", res.roots.len());
    }
    let right = res.rightmost().map(|r| r.lambda);
    Ok(res
        .roots
        .iter()
        .map(|r| {
            let is_right = right.is_some_and(|x| x.re == r.lambda.re && x.im.abs() == r.lambda.im.abs());
            vec![
                num(r.lambda.re),
                num(r.lambda.im),
                num(r.residual),
                r.multiplicity.to_string(),
                is_right.to_string(),
            ]
        })
        .collect())
}

pub fn branch_rows(branches: &[Branch]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (k, b) in branches.iter().enumerate() {
        for p in &b.points {
            rows.push(vec![
                "point".into(),
                k.to_string(),
                num(p.alpha),
                num(p.w_star),
                p.kind.label().into(),
                p.stable.to_string(),
                opt_num(p.rightmost.map(|z| z.re)),
                opt_num(p.rightmost.map(|z| z.im)),
                String::new(),
                String::new(),
            ]);
        }
    }
    for (k, b) in branches.iter().enumerate() {
        for e in &b.bifurcations {
            rows.push(vec![
                e.kind.label().into(),
                k.to_string(),
                num(e.alpha),
                num(e.w_star),
                b.kind().map(|x| x.label()).unwrap_or("").into(),
                String::new(),
                String::new(),
                String::new(),
                num(e.omega),
                e.refined.to_string(),
            ]);
        }
    }
    rows
}

/// Initial data and reference state for a simulation run.
pub fn initial_data(model: &Model, run: &RunConfig) -> Result<(TabulatedFn, TabulatedFn, Option<Probe>)> {
    let sim = &run.simulate;
    let alpha = run.spec.alpha;
    match sim.start {
        Start::Endemic | Start::DiseaseFree => {
            let sel = if sim.start == Start::Endemic { Selector::Endemic } else { Selector::DiseaseFree };
            let eq = selected(model, alpha, sel, sim.index)?;
            let (s0, i0) = perturbed_initial(&eq, sim.perturbation);
            Ok((s0, i0, Some((&eq).into())))
        }
        Start::Expressions => {
            let n = run.spec.numerics.table_nodes;
            let ad = run.spec.a_dagger;
            let tab = |key: &str, src: &Option<String>| -> Result<TabulatedFn> {
                let path = format!("simulate.{}", key);
                let text = src.as_ref().ok_or_else(|| Error::Config {
                    path: path.clone(),
                    message: "required when start = \"expressions\"".into(),
                })?;
                let f = parse_rate(text).map_err(|e| Error::Config { path, message: e.to_string() })?;
                Ok(TabulatedFn::uniform(ad, n, |a| f.eval(a)))
            };
            Ok((tab("s0", &sim.s0)?, tab("i0", &sim.i0)?, None))
        }
    }
}

pub fn summary_line(r: &SimReport) -> String {
    let mut s = format!("outcome={} final_W={} final_B={}", r.outcome.label(), num(r.final_w), num(r.final_b));
    if let (Some(p), Some(a)) = (r.period, r.amplitude) {
        s.push_str(&format!(" period={} amplitude={}", num(p), num(a)));
    }
    if let Some(d) = r.distance.last() {
        s.push_str(&format!(" final_distance={}", num(d.1)));
    }
    s
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(fs::File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

/// Runs one parsed command.
pub fn execute(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config { path: "--threads".into(), message: "must be at least 1".into() });
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cfg = load(cli)?;
    if cli.command == Command::DumpConfig {
        let text = cfg.dump()?;
        sink(&cli.out)?.write_all(text.as_bytes())?;
        return Ok(());
    }
    let model = Model::new(cfg.spec.clone())?;
    let alpha = cfg.spec.alpha;
    match cli.command {
        Command::Equilibria => {
            let e = &cfg.equilibria;
            let alphas = match (cli.alpha_range, e.alpha_lo, e.alpha_hi) {
                (Some(r), _, _) => r.values(),
                (None, Some(lo), Some(hi)) => AlphaRange { lo, hi, step: e.step.unwrap_or(1.0) }.values(),
                _ => vec![alpha],
            };
            write_csv(sink(&cli.out)?, &EQUILIBRIA_HEADER, &equilibria_rows(&model, &alphas)?)
        }
        Command::Spectrum => {
            let eq = selected(&model, alpha, cfg.spectrum.equilibrium, cfg.spectrum.index)?;
            write_csv(sink(&cli.out)?, &SPECTRUM_HEADER, &spectrum_rows(&model, &eq)?)
        }
        Command::Branch => {
            let b = &cfg.branch;
            let range = match (cli.alpha_range, b.alpha_lo, b.alpha_hi) {
                (Some(r), _, _) => r,
                (None, Some(lo), Some(hi)) => AlphaRange { lo, hi, step: b.step },
                _ => {
                    return Err(Error::Config {
                        path: "branch.alpha_lo".into(),
                        message: "give branch.alpha_lo and branch.alpha_hi or --alpha-range".into(),
                    })
                }
            };
            let branches = trace_diagram(&model, range.lo, range.hi, range.step)?;
            write_csv(sink(&cli.out)?, &BRANCH_HEADER, &branch_rows(&branches))?;
            if let Some(p) = &cli.svg {
                fs::write(p, output::branch_svg(&branches, range.lo, range.hi))?;
            }
            Ok(())
        }
        Command::Simulate => {
            let sim = &cfg.simulate;
            if sim.cells < 4 || sim.record_every == 0 {
                return Err(Error::Config {
                    path: "simulate".into(),
                    message: "cells >= 4 and record_every >= 1 required".into(),
                });
            }
            let (s0, i0, probe) = initial_data(&model, &cfg)?;
            let delta = cfg.spec.a_dagger / sim.cells as f64;
            let report = run(&model, &s0, &i0, delta, sim.t_end, probe)?;
            let rows: Vec<Vec<String>> = report
                .trace
                .iter()
                .step_by(sim.record_every)
                .map(|p| vec![num(p.t), num(p.b), num(p.w), num(p.q), num(p.total_s), num(p.total_i)])
                .collect();
            write_csv(sink(&cli.out)?, &TRACE_HEADER, &rows)?;
            eprintln!("{}", summary_line(&report));
            Ok(())
        }
        Command::DumpConfig => unreachable!(),
    }
}

/// Parses `args` and runs, returning the process exit code.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e);
            if e.is_config_error() {
                EXIT_CONFIG
            } else {
                EXIT_NUMERIC
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_range_parsing() {
        let r = parse_alpha_range("0:1:0.3").unwrap();
        assert_eq!(r.values(), vec![0.0, 0.3, 0.6, 0.8999999999999999, 1.0]);
        assert_eq!(parse_alpha_range("0:1:0.5").unwrap().values(), vec![0.0, 0.5, 1.0]);
        assert!(parse_alpha_range("1:0:0.1").is_err());
        assert!(parse_alpha_range("0:1").is_err());
        assert!(parse_alpha_range("0:1:0").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(main_from(["si-age", "equilibria", "--preset", "nope"]), EXIT_CONFIG);
        assert_eq!(main_from(["si-age", "frobnicate"]), EXIT_CONFIG);
        assert_eq!(main_from(["si-age", "equilibria"]), EXIT_CONFIG);
        assert_eq!(
            main_from(["si-age", "spectrum", "--preset", "choices", "--alpha", "30", "--out", "/dev/null"]),
            EXIT_NUMERIC
        );
    }
}
