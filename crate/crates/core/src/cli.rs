//! Command-line front end.
//!
//! Every subcommand reads a flat set of `key = value` settings. Values come
//! from built-in defaults, then an optional config file (`--config`, either a
//! flat text file or a `manifest.json` written by an earlier run), then the
//! command-line flags. The resolved settings are stored in `manifest.json`
//! next to the outputs, so feeding that manifest back reproduces the run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Arg, ArgAction, ArgMatches, Command};
use serde::Serialize;

use crate::critical::{
    averaged_coeffs_dissipative, critical_compare, critical_kappa0, extract_z_constants,
    generator_consistency, radial_params, state_grid, CriticalCompareConfig, Quadratic,
};
use crate::error::{Error, Result};
use crate::fluct::{
    kappa_ensemble, simulate_linear_fluctuation, DriftForm, KappaScheme, LinearFluctuation,
    SdeConfig, StationaryDensity,
};
use crate::io::{fmt_f64, write_atomic};
use crate::limit::{field_dissipative, integrate, phase_scan, phase_scan_csv, PhaseScanConfig};
use crate::micro::{ensemble, InitialCondition, MicroRun, TimeGrid};
use crate::model::{DissipativeParams, ModelParams, TwoPopParams};
use crate::rng::{stream, Domain, DEFAULT_MASTER_SEED};

pub const SUBCOMMANDS: [&str; 6] = [
    "phase-scan",
    "simulate-micro",
    "simulate-limit",
    "averaging-check",
    "generator-check",
    "critical-compare",
];

struct Key {
    name: &'static str,
    default: String,
    help: &'static str,
}

fn key(name: &'static str, default: impl ToString, help: &'static str) -> Key {
    Key { name, default: default.to_string(), help }
}

fn common_keys() -> Vec<Key> {
    vec![
        key("out", "out", "output directory"),
        key("seed", DEFAULT_MASTER_SEED, "master seed of all random streams"),
    ]
}

fn model_keys(beta: &str) -> Vec<Key> {
    vec![
        key("model", "dissipative", "dissipative | two-pop"),
        key("alpha", "1", "dissipation rate α"),
        key("beta", beta, "interaction strength β"),
        key("gamma", "0.5", "fraction γ of spins in population 1"),
        key("j11", "2", "coupling J11"),
        key("j12", "1", "coupling J12"),
        key("j21", "-1", "coupling J21"),
        key("j22", "balanced", "coupling J22, or `balanced` to solve the trace condition"),
    ]
}

fn keys_for(sub: &str) -> Vec<Key> {
    let mut keys = common_keys();
    match sub {
        "phase-scan" => keys.extend([
            key("alpha", "1", "dissipation rate α"),
            key("beta-min", "1.2", "first β of the scan"),
            key("beta-max", "1.8", "last β of the scan"),
            key("beta-steps", "13", "number of β values"),
            key("m0", "0.1", "initial magnetization of each ODE run"),
            key("lambda0", "0.1", "initial λ of each ODE run"),
            key("horizon", "400", "ODE horizon"),
            key("step", "auto", "RK4 step, `auto` for 1e-3 characteristic periods"),
            key("tail", "0.25", "fraction of the run used for cycle detection"),
        ]),
        "simulate-micro" => {
            keys.extend(model_keys("1.2"));
            keys.extend([
                key("n", "1000", "number of spins"),
                key("replicas", "1", "number of trajectories"),
                key("horizon", "10", "simulated time"),
                key("step", "0.01", "output grid step"),
                key("init", "plain", "plain | critical"),
                key("lambda0", "0.5", "initial λ (dissipative, plain)"),
                key("lambda-bar", "0.5", "λ̄ of the critical start λ = λ̄N^{-1/4}"),
                key("p1", "0.5", "spin-up probability in population 1 (plain)"),
                key("p2", "0.5", "spin-up probability in population 2 (plain)"),
                key("epsilon", "0.5", "ε of the critical start P(+1) = 1/2 + εN^{-1/4}"),
            ]);
        }
        "simulate-limit" => {
            keys.extend(model_keys("1.5"));
            keys.extend([
                key("kind", "kappa-xy", "kappa-xy | kappa-direct | fluctuation"),
                key("kappa0", "auto", "initial amplitude, `auto` for the critical start"),
                key("lambda-bar", "0.5", "λ̄ used by kappa0 = auto"),
                key("epsilon", "0.5", "ε used by kappa0 = auto"),
                key("m0", "0", "initial magnetization of the deterministic path (fluctuation)"),
                key("lambda0", "0.5", "initial λ of the deterministic path (fluctuation)"),
                key("drift-form", "jacobian", "jacobian | printed (fluctuation)"),
                key("horizon", "1", "simulated time"),
                key("dt", "1e-4", "Euler step"),
                key("sample-step", "0.01", "output grid step"),
                key("replicas", "1", "number of paths"),
                key("density-points", "200", "rows of density.csv, 0 to skip it"),
                key("density-max", "auto", "largest κ of density.csv"),
                key("n-quad", "64", "phase quadrature nodes"),
            ]);
        }
        "averaging-check" => {
            keys.extend(model_keys("2"));
            keys.extend([
                key("kappa", "1", "amplitude at which coefficients are averaged"),
                key("n-quad", "64", "phase quadrature nodes"),
            ]);
        }
        "generator-check" => {
            keys.extend(model_keys("1.5"));
            keys.extend([
                key("n-list", "100,1000,10000", "population sizes"),
                key(
                    "function",
                    "first-squared",
                    "const | first | second | first-squared | second-squared | product",
                ),
                key("grid", "11", "state grid points per axis"),
            ]);
        }
        "critical-compare" => {
            keys.extend(model_keys("1.5"));
            keys.extend([
                key("lambda-bar", "0.5", "λ̄ of the critical start"),
                key("epsilon", "0.5", "ε of the critical start"),
                key("n-list", "400,2500,10000", "population sizes"),
                key("replicas", "1000", "micro replicas per N"),
                key("limit-replicas", "auto", "limit paths, `auto` for ten times replicas"),
                key("horizon", "1", "rescaled horizon"),
                key("output-step", "0.01", "rescaled output step"),
                key("sde-dt", "1e-4", "Euler step of the limit SDE"),
                key("checkpoints", "0,0.5,1", "comparison times"),
                key("eta-lags", "0.01,0.1", "lags of the phase increment diagnostic"),
                key("kappa-floor", "1e-4", "smallest amplitude with a defined phase"),
                key("n-quad", "64", "phase quadrature nodes"),
            ]);
        }
        _ => {}
    }
    let mut seen = std::collections::HashSet::new();
    keys.retain(|k| seen.insert(k.name));
    keys
}

fn about(sub: &str) -> &'static str {
    match sub {
        "phase-scan" => "eigenvalues at the origin and long-run ODE behaviour over a β range",
        "simulate-micro" => "trajectories of the microscopic spin system",
        "simulate-limit" => "paths of the critical radial SDE or of the Gaussian fluctuation SDE",
        "averaging-check" => "phase-averaged generator coefficients against their closed forms",
        "generator-check" => "discrete generator against its first-order limit",
        "critical-compare" => "finite-N critical amplitudes against the limit SDE",
        _ => "",
    }
}

fn command() -> Command {
    let mut cmd = Command::new("hopf-cw")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Mean-field spin systems near a Hopf bifurcation")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for sub in SUBCOMMANDS {
        let mut sc = Command::new(sub).about(about(sub)).arg(
            Arg::new("config")
                .long("config")
                .value_name("PATH")
                .help("flat key = value file or a manifest.json of an earlier run"),
        );
        sc = sc.arg(
            Arg::new("workers")
                .long("workers")
                .value_name("N")
                .help("worker threads, 0 for one per logical core [default: 0]"),
        );
        for k in keys_for(sub) {
            sc = sc.arg(
                Arg::new(k.name)
                    .long(k.name)
                    .value_name("VALUE")
                    .action(ArgAction::Set)
                    .allow_negative_numbers(true)
                    .help(format!("{} [default: {}]", k.help, k.default)),
            );
        }
        cmd = cmd.subcommand(sc);
    }
    cmd
}

/// Resolved settings of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub subcommand: String,
    pub values: BTreeMap<String, String>,
}

fn parse_flat(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}", i + 1), "expected `key = value`"))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn parse_manifest(text: &str) -> Result<BTreeMap<String, String>> {
    let json: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::config("config", format!("bad JSON: {e}")))?;
    let obj = json
        .get("config")
        .and_then(|c| c.as_object())
        .ok_or_else(|| Error::config("config", "manifest has no `config` object"))?;
    obj.iter()
        .map(|(k, v)| match v {
            serde_json::Value::String(s) => Ok((k.clone(), s.clone())),
            other => Ok((k.clone(), other.to_string())),
        })
        .collect()
}

fn load_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        parse_manifest(&text)
    } else {
        parse_flat(&text)
    }
}

impl Settings {
    fn resolve(sub: &str, m: &ArgMatches) -> Result<Self> {
        let keys = keys_for(sub);
        let mut values: BTreeMap<String, String> =
            keys.iter().map(|k| (k.name.to_string(), k.default.clone())).collect();
        if let Some(path) = m.get_one::<String>("config") {
            for (k, v) in load_config_file(Path::new(path))? {
                if !values.contains_key(&k) {
                    return Err(Error::config(k, format!("unknown setting for {sub}")));
                }
                values.insert(k, v);
            }
        }
        for k in &keys {
            if let Some(v) = m.get_one::<String>(k.name) {
                values.insert(k.name.to_string(), v.clone());
            }
        }
        Ok(Self { subcommand: sub.to_string(), values })
    }

    fn raw(&self, k: &str) -> Result<&str> {
        self.values
            .get(k)
            .map(String::as_str)
            .ok_or_else(|| Error::config(k, "missing setting"))
    }

    fn parse<T: std::str::FromStr>(&self, k: &str, what: &str) -> Result<T> {
        let v = self.raw(k)?;
        v.parse().map_err(|_| Error::config(k, format!("expected {what}, got `{v}`")))
    }

    fn f64(&self, k: &str) -> Result<f64> {
        let x: f64 = self.parse(k, "a number")?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(Error::config(k, "must be finite"))
        }
    }

    fn auto_f64(&self, k: &str) -> Result<Option<f64>> {
        if self.raw(k)? == "auto" {
            Ok(None)
        } else {
            self.f64(k).map(Some)
        }
    }

    fn u64(&self, k: &str) -> Result<u64> {
        self.parse(k, "a nonnegative integer")
    }

    fn usize(&self, k: &str) -> Result<usize> {
        self.parse(k, "a nonnegative integer")
    }

    fn list<T: std::str::FromStr>(&self, k: &str, what: &str) -> Result<Vec<T>> {
        self.raw(k)?
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::config(k, format!("expected a comma-separated list of {what}")))
            })
            .collect()
    }

    fn model(&self) -> Result<ModelParams> {
        match self.raw("model")? {
            "dissipative" => Ok(ModelParams::Dissipative(DissipativeParams::new(
                self.f64("alpha")?,
                self.f64("beta")?,
            )?)),
            "two-pop" => {
                let (g, j11, j12, j21) =
                    (self.f64("gamma")?, self.f64("j11")?, self.f64("j12")?, self.f64("j21")?);
                let p = match self.raw("j22")? {
                    "balanced" => TwoPopParams::with_balanced_j22(g, j11, j12, j21)?,
                    _ => TwoPopParams::new(g, j11, j12, j21, self.f64("j22")?)?,
                };
                Ok(ModelParams::TwoPop(p))
            }
            other => Err(Error::config("model", format!("unknown model `{other}`"))),
        }
    }

    fn critical_init(&self, params: &ModelParams) -> Result<InitialCondition> {
        Ok(match params {
            ModelParams::Dissipative(_) => {
                InitialCondition::DissipativeCritical { lambda_bar: self.f64("lambda-bar")? }
            }
            ModelParams::TwoPop(_) => InitialCondition::TwoPopCritical { epsilon: self.f64("epsilon")? },
        })
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    version: &'static str,
    seed: u64,
    config: &'a BTreeMap<String, String>,
    outputs: Vec<String>,
}

/// Collects output files and writes them atomically.
struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        write_atomic(&self.dir.join(name), contents.as_bytes())?;
        self.written.push(name.to_string());
        Ok(())
    }
}

fn phase_scan_cmd(s: &Settings, out: &mut Outputs) -> Result<()> {
    let cfg = PhaseScanConfig {
        alpha: s.f64("alpha")?,
        beta_min: s.f64("beta-min")?,
        beta_max: s.f64("beta-max")?,
        beta_steps: s.usize("beta-steps")?,
        x0: [s.f64("m0")?, s.f64("lambda0")?],
        horizon: s.f64("horizon")?,
        step: s.auto_f64("step")?,
        tail_fraction: s.f64("tail")?,
    };
    if !(0.0..=1.0).contains(&cfg.tail_fraction) || cfg.tail_fraction == 0.0 {
        return Err(Error::config("tail", "must lie in (0, 1]"));
    }
    let rows = phase_scan(&cfg)?;
    for r in &rows {
        println!(
            "beta {:<8} re {:>+.6e} im {:>+.6e} cycle {}",
            fmt_f64(r.beta),
            r.re_eig,
            r.im_eig,
            r.cycle.as_str()
        );
    }
    out.write("phase_scan.csv", &phase_scan_csv(&rows))
}

fn simulate_micro_cmd(s: &Settings, out: &mut Outputs, seed: u64) -> Result<()> {
    let params = s.model()?;
    let init = match (s.raw("init")?, &params) {
        ("plain", ModelParams::Dissipative(_)) => InitialCondition::Dissipative { lambda0: s.f64("lambda0")? },
        ("plain", ModelParams::TwoPop(_)) => InitialCondition::TwoPop { p1: s.f64("p1")?, p2: s.f64("p2")? },
        ("critical", p) => s.critical_init(p)?,
        (other, _) => return Err(Error::config("init", format!("unknown initial law `{other}`"))),
    };
    let run = MicroRun {
        params,
        n: s.u64("n")?,
        init,
        grid: TimeGrid::new(s.f64("horizon")?, s.f64("step")?)?,
    };
    let trajs = ensemble(&run, s.usize("replicas")?, seed)?;
    for t in &trajs {
        out.write(&format!("trajectory_{:04}.csv", t.replica), &t.to_csv())?;
    }
    let events: u64 = trajs.iter().map(|t| t.events).sum();
    println!("{} trajectories, {events} spin flips", trajs.len());
    Ok(())
}

fn simulate_limit_cmd(s: &Settings, out: &mut Outputs, seed: u64) -> Result<()> {
    let params = s.model()?;
    let cfg = SdeConfig::new(s.f64("horizon")?, s.f64("dt")?, s.f64("sample-step")?)?;
    let replicas = s.usize("replicas")?;
    if replicas == 0 {
        return Err(Error::config("replicas", "need at least one replica"));
    }
    let kind = s.raw("kind")?;
    if kind == "fluctuation" {
        let ModelParams::Dissipative(p) = params else {
            return Err(Error::config("kind", "fluctuation paths exist for the dissipative model only"));
        };
        let form = match s.raw("drift-form")? {
            "jacobian" => DriftForm::Jacobian,
            "printed" => DriftForm::Printed,
            other => return Err(Error::config("drift-form", format!("unknown form `{other}`"))),
        };
        let x0 = [s.f64("m0")?, s.f64("lambda0")?];
        let ode = integrate(|x| field_dissipative(&p, x), x0, cfg.horizon, cfg.dt)?;
        let opts = LinearFluctuation { form, ..Default::default() };
        for k in 0..replicas as u64 {
            let mut rng = stream(seed, Domain::LinearFluctuation, k);
            let path = simulate_linear_fluctuation(&p, &ode, &opts, &cfg, &mut rng)?;
            out.write(&format!("fluctuation_{k:04}.csv"), &path.to_csv())?;
        }
        println!("{replicas} fluctuation paths");
        return Ok(());
    }
    let scheme = match kind {
        "kappa-xy" => KappaScheme::Xy,
        "kappa-direct" => KappaScheme::Direct,
        other => return Err(Error::config("kind", format!("unknown kind `{other}`"))),
    };
    let radial = radial_params(&params, s.usize("n-quad")?)?;
    let kappa0 = match s.auto_f64("kappa0")? {
        Some(k) => k,
        None => critical_kappa0(&params, &s.critical_init(&params)?)?,
    };
    let paths = kappa_ensemble(scheme, &radial, kappa0, &cfg, replicas, seed, Domain::LimitSde)?;
    for p in &paths {
        out.write(&format!("kappa_{:04}.csv", p.replica), &p.to_csv())?;
    }
    let points = s.usize("density-points")?;
    if points > 0 {
        let density = StationaryDensity::new(radial)?;
        let kmax = s.auto_f64("density-max")?.unwrap_or_else(|| density.quantile(1.0 - 1e-6));
        out.write("density.csv", &density.table(kmax, points))?;
    }
    println!(
        "{replicas} amplitude paths, c1 = {}, c2 = {}, c3 = {}, kappa0 = {}",
        fmt_f64(radial.c1),
        fmt_f64(radial.c2),
        fmt_f64(radial.c3),
        fmt_f64(kappa0)
    );
    Ok(())
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn averaging_check_cmd(s: &Settings, out: &mut Outputs) -> Result<()> {
    let n_quad = s.usize("n-quad")?;
    let json = match s.model()? {
        ModelParams::Dissipative(p) => {
            let kappa = s.f64("kappa")?;
            let avg = averaged_coeffs_dissipative(p.beta, kappa, n_quad);
            let drift = 4.0 * p.beta * p.beta - p.beta * kappa * kappa / 2.0;
            let diffusion = 4.0 * p.beta * p.beta * kappa;
            let ok = (avg.drift - drift).abs() <= 1e-10 && (avg.diffusion - diffusion).abs() <= 1e-10;
            println!("drift {} diffusion coeff {}", fmt_f64(avg.drift), fmt_f64(avg.diffusion));
            println!("closed form drift {} diffusion coeff {}", fmt_f64(drift), fmt_f64(diffusion));
            println!("closed-form match {}", verdict(ok));
            serde_json::json!({
                "model": "dissipative",
                "beta": p.beta,
                "kappa": kappa,
                "n_quad": n_quad,
                "averaged": avg,
                "closed_form": { "drift": drift, "diffusion": diffusion },
                "match": ok,
            })
        }
        ModelParams::TwoPop(p) => {
            let z = extract_z_constants(&p, n_quad)?;
            let ok = (z.z1_numeric - z.z1_printed).abs() <= 1e-8 * z.z1_printed.abs().max(1.0);
            println!("Z1 quadrature {} closed form {}", fmt_f64(z.z1_numeric), fmt_f64(z.z1_printed));
            println!("Z1 match {}", verdict(ok));
            println!("Z2 quadrature {} printed {}", fmt_f64(z.z2_numeric), fmt_f64(z.z2_printed));
            if z.z2_discrepancy {
                println!("Z2 quadrature and printed forms disagree; simulations use the quadrature value");
            }
            if z.z2_nonnegative {
                println!("Z2 >= 0: no confining drift, parameter set invalid for the critical limit");
            }
            serde_json::json!({
                "model": "two-pop",
                "params": p,
                "n_quad": n_quad,
                "z": z,
                "z1_match": ok,
            })
        }
    };
    out.write("averaging.json", &serde_json::to_string_pretty(&json).expect("plain data"))
}

fn generator_check_cmd(s: &Settings, out: &mut Outputs) -> Result<()> {
    let params = s.model()?;
    let f = match s.raw("function")? {
        "const" => Quadratic::constant(1.0),
        "first" => Quadratic::first(),
        "second" => Quadratic { b: 1.0, ..Default::default() },
        "first-squared" => Quadratic::first_squared(),
        "second-squared" => Quadratic { r: 1.0, ..Default::default() },
        "product" => Quadratic { q: 1.0, ..Default::default() },
        other => return Err(Error::config("function", format!("unknown test function `{other}`"))),
    };
    let grid = state_grid(&params, s.usize("grid")?);
    let ns: Vec<u64> = s.list("n-list", "integers")?;
    let mut csv = String::from("n,sup_error\n");
    for &n in &ns {
        let e = generator_consistency(&params, n, &f, &grid)?;
        println!("N {n:<8} sup error {e:.6e}");
        csv.push_str(&format!("{n},{}\n", fmt_f64(e)));
    }
    out.write("generator_check.csv", &csv)
}

fn critical_compare_cmd(s: &Settings, out: &mut Outputs, seed: u64) -> Result<()> {
    let params = s.model()?;
    let replicas = s.usize("replicas")?;
    let cfg = CriticalCompareConfig {
        params,
        init: s.critical_init(&params)?,
        n_list: s.list("n-list", "integers")?,
        replicas,
        limit_replicas: match s.raw("limit-replicas")? {
            "auto" => 10 * replicas,
            _ => s.usize("limit-replicas")?,
        },
        horizon: s.f64("horizon")?,
        output_step: s.f64("output-step")?,
        sde_dt: s.f64("sde-dt")?,
        checkpoints: s.list("checkpoints", "numbers")?,
        eta_lags: s.list("eta-lags", "numbers")?,
        kappa_floor: s.f64("kappa-floor")?,
        n_quad: s.usize("n-quad")?,
        seed,
    };
    let report = critical_compare(&cfg)?;
    for p in &report.populations {
        for c in &p.checkpoints {
            println!(
                "N {:<7} t {:<5} KS {:.4} (threshold {:.4})",
                p.n,
                fmt_f64(c.t),
                c.ks,
                c.ks_threshold
            );
        }
    }
    out.write("comparison.json", &report.to_json())
}

fn dispatch(s: &Settings) -> Result<Vec<String>> {
    let seed = s.u64("seed")?;
    let mut out = Outputs { dir: PathBuf::from(s.raw("out")?), written: Vec::new() };
    match s.subcommand.as_str() {
        "phase-scan" => phase_scan_cmd(s, &mut out)?,
        "simulate-micro" => simulate_micro_cmd(s, &mut out, seed)?,
        "simulate-limit" => simulate_limit_cmd(s, &mut out, seed)?,
        "averaging-check" => averaging_check_cmd(s, &mut out)?,
        "generator-check" => generator_check_cmd(s, &mut out)?,
        "critical-compare" => critical_compare_cmd(s, &mut out, seed)?,
        other => return Err(Error::config("subcommand", format!("unknown subcommand `{other}`"))),
    }
    let manifest = Manifest {
        subcommand: &s.subcommand,
        version: env!("CARGO_PKG_VERSION"),
        seed,
        config: &s.values,
        outputs: out.written.clone(),
    };
    out.write("manifest.json", &serde_json::to_string_pretty(&manifest).expect("plain data"))?;
    Ok(out.written)
}

fn exit_code(e: &Error) -> i32 {
    if e.is_validation() {
        1
    } else {
        2
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code: 0 on success, 1 for invalid input, 2 when the run
/// itself fails.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = match command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (sub, m) = matches.subcommand().expect("subcommand is required");
    let settings = match Settings::resolve(sub, m) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let workers = match m.get_one::<String>("workers").map(|w| w.parse::<usize>()) {
        None => 0,
        Some(Ok(w)) => w,
        Some(Err(_)) => {
            eprintln!("error: {}", Error::config("workers", "expected a nonnegative integer"));
            return 1;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return 2;
        }
    };
    match pool.install(|| dispatch(&settings)) {
        Ok(files) => {
            println!("wrote {} files to {}", files.len(), settings.values["out"]);
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_subcommand_has_help() {
        for sub in SUBCOMMANDS {
            assert_eq!(run(["hopf-cw", sub, "--help"]), 0);
        }
        assert_eq!(run(["hopf-cw", "--help"]), 0);
    }

    #[test]
    fn unknown_subcommand_and_flag_fail_validation() {
        assert_eq!(run(["hopf-cw", "fly"]), 1);
        assert_eq!(run(["hopf-cw", "phase-scan", "--gamma", "0.3"]), 1);
    }

    #[test]
    fn flat_config_parsing() {
        let m = parse_flat("# comment\n alpha = 1.5 \n\nbeta=2\n").unwrap();
        assert_eq!(m["alpha"], "1.5");
        assert_eq!(m["beta"], "2");
        assert!(parse_flat("alpha 1").is_err());
    }

    #[test]
    fn manifest_config_parsing() {
        let m = parse_manifest(r#"{"config": {"alpha": "1", "beta-steps": 13}}"#).unwrap();
        assert_eq!(m["alpha"], "1");
        assert_eq!(m["beta-steps"], "13");
        assert!(parse_manifest("{}").is_err());
    }

    #[test]
    fn validation_and_runtime_exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        assert_eq!(run(["hopf-cw", "phase-scan", "--out", out, "--alpha", "-1"]), 1);
        assert_eq!(run(["hopf-cw", "phase-scan", "--out", out, "--beta-steps", "x"]), 1);
        // a subcritical β has no critical limit
        assert_eq!(run(["hopf-cw", "critical-compare", "--out", out, "--beta", "1.2"]), 1);
        // the output directory cannot be created under a regular file
        let file = dir.path().join("f");
        std::fs::write(&file, "x").unwrap();
        let bad = file.join("sub");
        assert_eq!(
            run(["hopf-cw", "averaging-check", "--out", bad.to_str().unwrap()]),
            2
        );
    }

    #[test]
    fn config_file_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "colour = blue\n").unwrap();
        let out = dir.path().join("o");
        assert_eq!(
            run([
                "hopf-cw",
                "averaging-check",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap()
            ]),
            1
        );
    }
}
