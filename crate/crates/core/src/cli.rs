//! Command-line driver. Every subcommand is a pure function of its
//! arguments and seed; artifacts embed a [`RunManifest`] and are written
//! atomically.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical
//! adequacy failure, 3 property-check failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::load_simulation_spec;
use crate::error::{Error, Result};
use crate::idcode::{binning_study, simulate, DEFAULT_POOL_CAP};
use crate::rates::{convergence_study, rate_region_sweep, DiscretizationScheme};
use crate::states::{
    displaced_thermal, gentle_operator_trials, truncation_channel, truncation_mass_bound_check, CoherentAmplitude,
    TruncationSpec,
};
use crate::typicality::verify_typicality_bounds;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_PROPERTY: i32 = 3;

/// Default output directory when `--out` is absent.
pub const OUT_DIR_ENV: &str = "BOSONIC_ID_OUT";

#[derive(Debug, Parser)]
#[command(name = "bosonic-id", version, about = "Identification over noisy bosonic broadcast channels")]
struct Cli {
    /// Output directory (default: $BOSONIC_ID_OUT, else the current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sweep the identification rate region over the beam splitter transmissivity.
    RateRegion(RateRegionArgs),
    /// Holevo quantities of Gaussian discretizations against the Gaussian limit.
    HolevoConverge(HolevoArgs),
    /// Numerically verify one of the supporting bounds.
    LemmaCheck(LemmaArgs),
    /// Monte Carlo simulation of the identification code from a spec file.
    SimulateId(SimulateArgs),
}

#[derive(Debug, Args, Serialize)]
struct RateRegionArgs {
    #[arg(long)]
    n1: f64,
    #[arg(long)]
    n2: f64,
    /// Mean photon number per channel use; repeat for several curves.
    #[arg(long = "e", required = true)]
    energies: Vec<f64>,
    #[arg(long, default_value_t = 101)]
    steps: usize,
}

#[derive(Debug, Args, Serialize)]
struct HolevoArgs {
    #[arg(long = "e")]
    energy: f64,
    #[arg(long)]
    tau: f64,
    /// Thermal noise photon number.
    #[arg(long = "n")]
    noise: f64,
    #[arg(long, value_delimiter = ',', default_value = "16,64,256")]
    sizes: Vec<usize>,
    #[arg(long, value_enum, default_value_t = SchemeArg::Grid)]
    scheme: SchemeArg,
    /// Initial Fock cutoff; doubled until the Holevo quantity is stable.
    #[arg(long, default_value_t = 30)]
    cutoff: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SchemeArg {
    Grid,
    Rings,
}

impl From<SchemeArg> for DiscretizationScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Grid => DiscretizationScheme::SquareGrid,
            SchemeArg::Rings => DiscretizationScheme::Rings,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Lemma {
    Gentle,
    Truncation,
    Typicality,
    Binning,
}

#[derive(Debug, Args)]
struct LemmaArgs {
    #[arg(long, value_enum)]
    lemma: Lemma,
    /// Required for the stochastic checks (gentle, binning).
    #[arg(long)]
    seed: Option<u64>,
    /// truncation: real amplitudes `start:stop:step`.
    #[arg(long, default_value = "0:2:0.25")]
    alpha_grid: String,
    /// truncation: cutoffs `start:stop`, inclusive.
    #[arg(long, default_value = "3:20")]
    l_grid: String,
    /// gentle: number of random (state, POVM element) pairs.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// gentle: POVM element eigenvalue range.
    #[arg(long, default_value_t = 0.0)]
    povm_min: f64,
    #[arg(long, default_value_t = 1.0)]
    povm_max: f64,
    /// typicality and binning: block lengths (defaults 8,12 and 20,40,80).
    #[arg(long = "n", value_delimiter = ',')]
    ns: Vec<usize>,
    /// typicality: windows in bits (default 0.2,0.3).
    #[arg(long = "delta", value_delimiter = ',')]
    deltas: Vec<f64>,
    /// typicality: real displacement of the thermal state.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// typicality: thermal photon number.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    /// typicality: truncation level `L`.
    #[arg(long, default_value_t = 3)]
    cutoff: usize,
    /// binning: pool rate in nats.
    #[arg(long, default_value_t = 0.12)]
    pool_rate: f64,
    /// binning: bin rate in nats.
    #[arg(long, default_value_t = 0.08)]
    bin_rate: f64,
    #[arg(long, default_value_t = 0.035)]
    mu: f64,
    #[arg(long, default_value_t = 8)]
    messages: usize,
    #[arg(long, default_value_t = 200)]
    assignments: usize,
    #[arg(long, default_value_t = DEFAULT_POOL_CAP)]
    pool_cap: usize,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    seed: u64,
}

/// Provenance record embedded in every artifact.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub params: Value,
    pub seed: Option<u64>,
    pub version: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    fn new(subcommand: &str, params: Value, seed: Option<u64>, output: &Path) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            params,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: vec![output.display().to_string()],
        }
    }
}

/// Process exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidParameter { .. } | Error::Io(_) => EXIT_USAGE,
        _ => EXIT_NUMERICAL,
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let out_dir = cli
        .out
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let result = match cli.command {
        Command::RateRegion(a) => cmd_rate_region(&a, &out_dir),
        Command::HolevoConverge(a) => cmd_holevo_converge(&a, &out_dir),
        Command::LemmaCheck(a) => cmd_lemma_check(&a, &out_dir),
        Command::SimulateId(a) => cmd_simulate_id(&a, &out_dir),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Writes `contents` to `dir/name` through a temporary file in `dir`.
fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(&path).map_err(|e| Error::Io(e.error))?;
    println!("wrote {}", path.display());
    Ok(path)
}

fn json_document(manifest: &RunManifest, result: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&json!({ "manifest": manifest, "result": result }))?;
    s.push('\n');
    Ok(s)
}

fn csv_preamble(manifest: &RunManifest) -> Result<String> {
    Ok(format!("# manifest: {}\n", serde_json::to_string(manifest)?))
}

fn cmd_rate_region(a: &RateRegionArgs, out: &Path) -> Result<i32> {
    let name = "rate_region.csv";
    let manifest = RunManifest::new("rate-region", serde_json::to_value(a)?, None, &out.join(name));
    let mut csv = csv_preamble(&manifest)?;
    csv.push_str("# units: R1 and R2 in bits per channel use; tau1 dimensionless; tau2 = 1 - tau1\n");
    for (i, &e) in a.energies.iter().enumerate() {
        let points = rate_region_sweep(a.n1, a.n2, e, a.steps)?;
        if i > 0 {
            csv.push('\n');
        }
        csv.push_str(&format!("# curve: E={e} N1={} N2={}\ntau1,R1,R2\n", a.n1, a.n2));
        for p in points {
            csv.push_str(&format!("{},{},{}\n", p.tau1, p.r1, p.r2));
        }
    }
    write_atomic(out, name, &csv)?;
    Ok(EXIT_OK)
}

fn cmd_holevo_converge(a: &HolevoArgs, out: &Path) -> Result<i32> {
    let name = "holevo_converge.csv";
    let spec = TruncationSpec::new(a.cutoff)?;
    let table = convergence_study(a.energy, a.tau, a.noise, &a.sizes, a.scheme.into(), &spec)?;
    let manifest = RunManifest::new("holevo-converge", serde_json::to_value(a)?, None, &out.join(name));
    let mut csv = csv_preamble(&manifest)?;
    csv.push_str("# units: chi_bits and epsilon_bits in bits per channel use; cutoff in Fock levels\n");
    csv.push_str(&format!("# target_bits: {}\n", table.target_bits));
    csv.push_str(&format!("# monotone_tail: {}\n", table.monotone_tail));
    csv.push_str(&format!("# cutoff_inadequate: {}\n", table.cutoff_inadequate));
    csv.push_str("x,points,chi_bits,epsilon_bits,cutoff,cutoff_change,thermal_trace_distance\n");
    for r in &table.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.x, r.points, r.chi_bits, r.epsilon_bits, r.cutoff, r.cutoff_change, r.thermal_trace_distance
        ));
    }
    write_atomic(out, name, &csv)?;
    if table.cutoff_inadequate {
        eprintln!("error: Holevo quantity did not stabilize under cutoff doubling");
        return Ok(EXIT_NUMERICAL);
    }
    if !table.monotone_tail {
        eprintln!("property failure: epsilon is not nonincreasing in the constellation size");
        return Ok(EXIT_PROPERTY);
    }
    Ok(EXIT_OK)
}

/// `start:stop:step`, inclusive of `stop` up to rounding.
fn parse_float_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::param("alpha-grid", format!("expected start:stop:step, got `{s}`"));
    let parts: Vec<f64> = s.split(':').map(|p| p.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
    let [start, stop, step] = parts[..] else { return Err(bad()) };
    if !(step > 0.0 && start.is_finite() && stop.is_finite() && stop >= start) {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| start + k as f64 * step).collect())
}

/// `start:stop`, inclusive.
fn parse_int_range(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::param("l-grid", format!("expected start:stop, got `{s}`"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if a == 0 || b < a {
        return Err(bad());
    }
    Ok((a..=b).collect())
}

fn require_seed(seed: Option<u64>, what: &str) -> Result<u64> {
    seed.ok_or_else(|| Error::param("seed", format!("--seed is required for {what}")))
}

fn cmd_lemma_check(a: &LemmaArgs, out: &Path) -> Result<i32> {
    let (params, seed, result, all_pass) = match a.lemma {
        Lemma::Truncation => {
            let alphas = parse_float_grid(&a.alpha_grid)?;
            let levels = parse_int_range(&a.l_grid)?;
            let mut checks = Vec::with_capacity(alphas.len() * levels.len());
            for &x in &alphas {
                for &l in &levels {
                    checks.push(truncation_mass_bound_check(CoherentAmplitude::real(x), l)?);
                }
            }
            let failures = checks.iter().filter(|c| !c.pass).count();
            let params = json!({ "lemma": a.lemma, "alpha_grid": alphas, "l_grid": levels });
            (params, None, json!({ "checks": checks, "failures": failures }), failures == 0)
        }
        Lemma::Gentle => {
            let seed = require_seed(a.seed, "the gentle operator check")?;
            let s = gentle_operator_trials(a.trials, a.povm_min, a.povm_max, seed)?;
            let params = json!({ "lemma": a.lemma, "trials": a.trials, "povm_min": a.povm_min, "povm_max": a.povm_max });
            let pass = s.failures == 0;
            (params, Some(seed), serde_json::to_value(&s)?, pass)
        }
        Lemma::Typicality => {
            let ns = if a.ns.is_empty() { vec![8, 12] } else { a.ns.clone() };
            let deltas = if a.deltas.is_empty() { vec![0.2, 0.3] } else { a.deltas.clone() };
            let physical = displaced_thermal(CoherentAmplitude::real(a.alpha), a.noise, &TruncationSpec::new(40)?)?;
            let rho = truncation_channel(&physical, a.cutoff)?;
            let mut reports = Vec::new();
            for &n in &ns {
                for &d in &deltas {
                    reports.push(verify_typicality_bounds(&rho, n, d)?);
                }
            }
            let pass = reports.iter().all(|r| r.all_pass);
            let params = json!({ "lemma": a.lemma, "n": ns, "delta": deltas, "alpha": a.alpha, "noise": a.noise, "L": a.cutoff });
            (params, None, json!({ "reports": reports }), pass)
        }
        Lemma::Binning => {
            let seed = require_seed(a.seed, "the binning check")?;
            let ns = if a.ns.is_empty() { vec![20, 40, 80] } else { a.ns.clone() };
            let rows =
                binning_study(&ns, a.pool_rate, a.bin_rate, a.mu, a.messages, a.assignments, a.pool_cap, seed)?;
            let decreasing = rows.windows(2).all(|w| w[1].failure_fraction < w[0].failure_fraction);
            let params = json!({
                "lemma": a.lemma, "n": ns, "R_P": a.pool_rate, "Rt": a.bin_rate, "mu": a.mu,
                "messages": a.messages, "assignments": a.assignments, "pool_cap": a.pool_cap,
            });
            (params, Some(seed), json!({ "rows": rows, "strictly_decreasing": decreasing }), decreasing)
        }
    };
    let name = format!("lemma_{}.json", serde_json::to_value(a.lemma)?.as_str().unwrap_or("check"));
    let manifest = RunManifest::new("lemma-check", params, seed, &out.join(&name));
    let mut body = result;
    body["all_pass"] = Value::Bool(all_pass);
    write_atomic(out, &name, &json_document(&manifest, &body)?)?;
    if all_pass {
        Ok(EXIT_OK)
    } else {
        eprintln!("property failure: {name} reports failing checks");
        Ok(EXIT_PROPERTY)
    }
}

fn cmd_simulate_id(a: &SimulateArgs, out: &Path) -> Result<i32> {
    let setup = load_simulation_spec(&a.spec)?;
    let report = simulate(&setup, a.seed)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let name = "simulate_id.json";
    let params = json!({ "spec": a.spec.display().to_string(), "setup": setup });
    let manifest = RunManifest::new("simulate-id", params, Some(a.seed), &out.join(name));
    write_atomic(out, name, &json_document(&manifest, &report)?)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_grid_includes_endpoint() {
        let g = parse_float_grid("0:2:0.25").unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g[8], 2.0);
        assert!(parse_float_grid("0:2").is_err());
        assert!(parse_float_grid("2:0:0.5").is_err());
        assert!(parse_float_grid("0:1:0").is_err());
    }

    #[test]
    fn int_range_is_inclusive() {
        assert_eq!(parse_int_range("3:20").unwrap().len(), 18);
        assert!(parse_int_range("0:3").is_err());
        assert!(parse_int_range("5:3").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["bosonic-id", "no-such-command"]), EXIT_USAGE);
        assert_eq!(run(["bosonic-id", "simulate-id", "--spec", "x.conf"]), EXIT_USAGE);
        assert_eq!(run(["bosonic-id", "lemma-check", "--lemma", "nonsense"]), EXIT_USAGE);
    }

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(exit_code(&Error::Config(vec![])), EXIT_USAGE);
        assert_eq!(exit_code(&Error::TruncationLoss { trace: 0.9, cutoff: 3 }), EXIT_NUMERICAL);
        assert_eq!(exit_code(&Error::UnitarityDefect { defect: 0.1, construction_dim: 10 }), EXIT_NUMERICAL);
    }
}
