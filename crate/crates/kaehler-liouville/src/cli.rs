//! Command dispatch for the `klm` binary.
//!
//! Exit codes: 0 all checks pass, 1 validation failure, 2 numerical
//! failure (drift or brackets beyond threshold, failed geometry), 3 I/O,
//! usage or schema error.  Diagnostics go to standard error, one JSON
//! object per line.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::block::{block_report, default_tolerance, validate_seed, BlockGeometry, BlockSeed};
use crate::config::{parse_config, Config, ConfigError, SimulateSpec};
use crate::constants::{validate_compatibility, ConstantBundle};
use crate::fan::{build_fan, build_lattice, fan_report, verify_fan};
use crate::flow::{fmt17, integrate, poisson_check, FlowError, FlowModel, IntegrateOptions, Mode};
use crate::fubini_study::{bracket_check, geodesic_drift, unitary_check, FsModel, Geodesic};
use crate::invariants::{cell_counts, chern_pairing, invariants_report, kahler_class};
use crate::poset::Poset;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "klm", version, about = "Kähler-Liouville manifolds from poset and constant data")]
pub struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for artifacts (reports, CSV).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Compact single-line JSON on standard output.
    #[arg(long, global = true)]
    pub json: bool,
    /// ChaCha8 seed for sampled checks and random initial states.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Pass threshold for drift or bracket checks.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Number of samples for sampled checks.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Real,
    Complex,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Real => Mode::Real,
            ModeArg::Complex => Mode::Complex,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check poset, constants and seeds.
    Validate,
    /// Emit the fan.
    Fan,
    /// Picard basis, Chern pairing, Kähler class and cells.
    Invariants,
    /// Branch times, periods and residuals of one block.
    Block {
        #[arg(long)]
        alpha: String,
    },
    /// Integrate a geodesic of a one-block manifold.
    Simulate {
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long = "t-final")]
        t_final: Option<f64>,
    },
    /// Finite-difference Poisson brackets of the first integrals.
    CheckInvolution {
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// The Fubini-Study reference model on CP^n.
    Cpn {
        #[arg(long)]
        n: usize,
        /// Fail with exit code 2 when a check misses its threshold.
        #[arg(long)]
        check: bool,
    },
}

/// A failure with its exit code.
struct Failure {
    code: i32,
    kind: &'static str,
    messages: Vec<String>,
}

impl Failure {
    fn new(code: i32, kind: &'static str, message: impl ToString) -> Failure {
        Failure { code, kind, messages: vec![message.to_string()] }
    }

    fn many<E: std::fmt::Debug + std::fmt::Display>(code: i32, kind: &'static str, errs: &[E]) -> Failure {
        Failure { code, kind, messages: errs.iter().map(|e| format!("{e} ({e:?})")).collect() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Failure {
        let kind = match e {
            ConfigError::Io { .. } => "io",
            ConfigError::Parse { .. } => "parse",
            ConfigError::Schema { .. } => "schema",
        };
        Failure::new(EXIT_IO, kind, e)
    }
}

struct Ctx<'a> {
    cli: &'a Cli,
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn emit(&mut self, v: &Value) -> Result<(), Failure> {
        let text = if self.cli.json { serde_json::to_string(v) } else { serde_json::to_string_pretty(v) }
            .expect("JSON values serialize");
        writeln!(self.stdout, "{text}").map_err(|e| Failure::new(EXIT_IO, "io", e))
    }

    fn diag(&mut self, level: &str, kind: &str, message: &str) {
        let line = json!({ "level": level, "kind": kind, "message": message });
        let _ = writeln!(self.stderr, "{line}");
    }

    fn write_artifact(&mut self, name: &str, text: &str) -> Result<Option<PathBuf>, Failure> {
        let Some(dir) = &self.cli.out else { return Ok(None) };
        std::fs::create_dir_all(dir).map_err(|e| Failure::new(EXIT_IO, "io", format!("{}: {e}", dir.display())))?;
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Failure::new(EXIT_IO, "io", format!("{}: {e}", path.display())))?;
        Ok(Some(path))
    }

    fn config(&self) -> Result<Config, Failure> {
        let path = self.cli.config.as_deref().ok_or_else(|| Failure::new(EXIT_IO, "usage", "--config is required"))?;
        Ok(parse_config(path)?)
    }

    fn rng(&self, fallback: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.cli.seed.unwrap_or(fallback))
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_IO } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(stdout, "{text}");
            } else {
                let line = json!({ "level": "error", "kind": "usage", "message": text.trim() });
                let _ = writeln!(stderr, "{line}");
            }
            return code;
        }
    };
    let mut ctx = Ctx { cli: &cli, stdout, stderr };
    match dispatch(&mut ctx) {
        Ok(code) => code,
        Err(f) => {
            for m in &f.messages {
                ctx.diag("error", f.kind, m);
            }
            f.code
        }
    }
}

fn dispatch(ctx: &mut Ctx) -> Result<i32, Failure> {
    match &ctx.cli.command {
        Command::Validate => validate(ctx),
        Command::Fan => fan(ctx),
        Command::Invariants => invariants(ctx),
        Command::Block { alpha } => block(ctx, alpha),
        Command::Simulate { mode, t_final } => simulate(ctx, *mode, *t_final),
        Command::CheckInvolution { mode } => check_involution(ctx, *mode),
        Command::Cpn { n, check } => cpn(ctx, *n, *check),
    }
}

fn poset_and_bundle(cfg: &Config) -> Result<(Poset, ConstantBundle), Failure> {
    let poset = cfg.build_poset().map_err(|e| Failure::many(EXIT_VALIDATION, "poset", &e))?;
    let bundle = cfg.build_bundle(&poset).map_err(|e| Failure::many(EXIT_VALIDATION, "constants", &e))?;
    Ok((poset, bundle))
}

fn validate(ctx: &mut Ctx) -> Result<i32, Failure> {
    let cfg = ctx.config()?;
    let poset = match cfg.build_poset() {
        Ok(p) => p,
        Err(errs) => {
            ctx.emit(&json!({ "poset": { "ok": false, "errors": errs } }))?;
            return Err(Failure::many(EXIT_VALIDATION, "poset", &errs));
        }
    };
    let bundle = match cfg.build_bundle(&poset) {
        Ok(b) => b,
        Err(errs) => {
            ctx.emit(&json!({ "poset": { "ok": true }, "constants": { "ok": false, "errors": errs } }))?;
            return Err(Failure::many(EXIT_VALIDATION, "constants", &errs));
        }
    };
    let compat = validate_compatibility(&poset, &bundle);
    let mut seeds = serde_json::Map::new();
    let mut seeds_ok = true;
    for a in 0..poset.len() {
        let name = poset.name(a);
        let entry = match cfg.build_seed(&poset, &bundle, name) {
            Ok(seed) => {
                let rep = validate_seed(&seed, default_tolerance(&seed));
                seeds_ok &= rep.ok();
                json!({ "ok": rep.ok(), "residuals": rep })
            }
            Err(e) => {
                seeds_ok = false;
                json!({ "ok": false, "error": e.to_string() })
            }
        };
        seeds.insert(name.to_string(), entry);
    }
    let ok = compat.ok() && seeds_ok;
    ctx.emit(&json!({
        "ok": ok,
        "poset": { "ok": true, "elements": poset.names(), "dimension": poset.dim() },
        "constants": { "ok": compat.ok(), "report": compat },
        "seeds": seeds,
    }))?;
    if !compat.ok() {
        for c in compat.failures() {
            let msg = format!("{} at {}: {}", c.rule, c.location, c.detail);
            ctx.diag("error", "constants", &msg);
        }
    }
    Ok(if ok { EXIT_OK } else { EXIT_VALIDATION })
}

fn fan(ctx: &mut Ctx) -> Result<i32, Failure> {
    let cfg = ctx.config()?;
    let (poset, bundle) = poset_and_bundle(&cfg)?;
    let lat = build_lattice(&poset, &bundle).map_err(|e| Failure::new(EXIT_VALIDATION, "fan", e))?;
    let fan = build_fan(&lat);
    let check = verify_fan(&lat, &fan, cfg_seed(ctx));
    let report = fan_report(&lat, &fan, &check);
    ctx.write_artifact("fan.json", &pretty(&report))?;
    ctx.emit(&report)?;
    Ok(if check.ok() { EXIT_OK } else { EXIT_VALIDATION })
}

fn cfg_seed(ctx: &Ctx) -> u64 {
    ctx.cli.seed.unwrap_or(0)
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values serialize") + "\n"
}

fn invariants(ctx: &mut Ctx) -> Result<i32, Failure> {
    let cfg = ctx.config()?;
    let (poset, bundle) = poset_and_bundle(&cfg)?;
    let lat = build_lattice(&poset, &bundle).map_err(|e| Failure::new(EXIT_VALIDATION, "fan", e))?;
    let fan = build_fan(&lat);
    let pairing = chern_pairing(&lat, &fan).map_err(|e| Failure::new(EXIT_VALIDATION, "invariants", e))?;
    let kc = kahler_class(&poset, &bundle);
    let report = invariants_report(&lat, &pairing, Some(&kc), &cell_counts(&poset));
    ctx.write_artifact("invariants.json", &pretty(&report))?;
    ctx.emit(&report)?;
    let consistent = report["chern_pairing_identity"] == json!(true)
        && report["kahler"]["pairing_matches_periods"] == json!(true);
    Ok(if consistent { EXIT_OK } else { EXIT_VALIDATION })
}

fn seed_for(cfg: &Config, poset: &Poset, bundle: &ConstantBundle, alpha: &str) -> Result<BlockSeed, Failure> {
    if poset.index_of(alpha).is_none() {
        return Err(Failure::new(EXIT_VALIDATION, "block", format!("unknown block `{alpha}`")));
    }
    cfg.build_seed(poset, bundle, alpha).map_err(|e| Failure::new(EXIT_VALIDATION, "seed", e))
}

fn block(ctx: &mut Ctx, alpha: &str) -> Result<i32, Failure> {
    let cfg = ctx.config()?;
    let (poset, bundle) = poset_and_bundle(&cfg)?;
    let seed = seed_for(&cfg, &poset, &bundle, alpha)?;
    let rep = validate_seed(&seed, ctx.cli.tol.unwrap_or_else(|| default_tolerance(&seed)));
    let geom = match BlockGeometry::build(&seed) {
        Ok(g) => Some(g),
        Err(e) => {
            ctx.emit(&block_report(&seed, &rep, None))?;
            return Err(Failure::new(EXIT_NUMERICAL, "block", e));
        }
    };
    let report = block_report(&seed, &rep, geom.as_ref());
    if let Some(g) = &geom {
        ctx.write_artifact(&format!("profile_{alpha}.csv"), &profile_csv(g, ctx.cli.samples.unwrap_or(200)))?;
    }
    ctx.write_artifact(&format!("block_{alpha}.json"), &pretty(&report))?;
    ctx.emit(&report)?;
    Ok(if rep.ok() { EXIT_OK } else { EXIT_VALIDATION })
}

/// `nu,x,h,dh,d2h` over one period of each coordinate.
pub fn profile_csv(g: &BlockGeometry, samples: usize) -> String {
    let mut out = String::from("nu,x,h,dh,d2h\n");
    for nu in 1..=g.n() {
        let p = g.periods()[nu - 1];
        for k in 0..samples {
            let x = p * k as f64 / samples as f64;
            let v = g.profile(nu, x);
            out.push_str(&format!("{nu},{},{},{},{}\n", fmt17(x), fmt17(v.h), fmt17(v.dh), fmt17(v.d2h)));
        }
    }
    out
}

fn single_block_model(cfg: &Config) -> Result<FlowModel, Failure> {
    let (poset, bundle) = poset_and_bundle(cfg)?;
    if poset.len() != 1 {
        return Err(Failure::new(EXIT_VALIDATION, "flow", FlowError::MultiBlock(poset.len())));
    }
    let seed = seed_for(cfg, &poset, &bundle, poset.name(0))?;
    let geom = BlockGeometry::build(&seed).map_err(|e| Failure::new(EXIT_NUMERICAL, "block", e))?;
    Ok(FlowModel::new(geom))
}

fn simulate(ctx: &mut Ctx, mode: Option<ModeArg>, t_final: Option<f64>) -> Result<i32, Failure> {
    let cfg = ctx.config()?;
    let model = single_block_model(&cfg)?;
    let sim = cfg.simulate.clone().unwrap_or_else(SimulateSpec::default);
    let mode: Mode = mode.map(Mode::from).unwrap_or(sim.mode.into());
    let mut rng = ctx.rng(sim.seed);
    let s0 = match Config::initial_state(&sim) {
        Some(s) => s,
        None => model.random_state(mode, &mut rng),
    };
    let mut opts = IntegrateOptions::new(t_final.unwrap_or(sim.t_final), Config::stepper(&sim));
    opts.record_every = sim.record_every;
    let (traj, report) = integrate(&model, &s0, mode, &opts).map_err(|e| Failure::new(EXIT_VALIDATION, "flow", e))?;
    let threshold = ctx.cli.tol.unwrap_or(sim.drift_threshold);
    let ok = report.truncated.is_none() && report.max_drift() <= threshold;
    let summary = json!({
        "ok": ok,
        "mode": mode,
        "threshold": threshold,
        "initial": s0,
        "report": report,
    });
    let csv = traj.to_csv(model.n());
    let wrote = ctx.write_artifact("trajectory.csv", &csv)?;
    ctx.write_artifact("drift.json", &pretty(&summary))?;
    if wrote.is_some() || ctx.cli.json {
        ctx.emit(&summary)?;
    } else {
        write!(ctx.stdout, "{csv}").map_err(|e| Failure::new(EXIT_IO, "io", e))?;
    }
    if let Some(t) = &report.truncated {
        ctx.diag("error", "flow", &t.to_string());
    }
    if !ok {
        ctx.diag("error", "drift", &format!("max relative drift {:e} exceeds {threshold:e}", report.max_drift()));
    }
    Ok(if ok { EXIT_OK } else { EXIT_NUMERICAL })
}

fn check_involution(ctx: &mut Ctx, mode: Option<ModeArg>) -> Result<i32, Failure> {
    let cfg = ctx.config()?;
    let model = single_block_model(&cfg)?;
    let mode = mode.map(Mode::from).unwrap_or(Mode::Real);
    let samples = ctx.cli.samples.unwrap_or(cfg.check.samples);
    let threshold = ctx.cli.tol.unwrap_or(cfg.check.threshold);
    let mut rng = ctx.rng(0);
    let rep = poisson_check(&model, mode, samples, cfg.check.fd_step, &mut rng);
    let ok = rep.max() <= threshold && rep.ee == 0.0;
    let v = json!({ "ok": ok, "mode": mode, "threshold": threshold, "report": rep });
    ctx.write_artifact("involution.json", &pretty(&v))?;
    ctx.emit(&v)?;
    Ok(if ok { EXIT_OK } else { EXIT_NUMERICAL })
}

/// Thresholds of the reference-model checks.
pub const CPN_DRIFT: f64 = 1e-10;
pub const CPN_BRACKET: f64 = 1e-6;
pub const CPN_UNITARY: f64 = 1e-12;

fn cpn(ctx: &mut Ctx, n: usize, check: bool) -> Result<i32, Failure> {
    if n == 0 {
        return Err(Failure::new(EXIT_VALIDATION, "cpn", "n must be at least 1"));
    }
    let model = FsModel::uniform(n);
    let samples = ctx.cli.samples.unwrap_or(100);
    let mut rng = ctx.rng(0);
    let drift = (0..samples)
        .map(|_| geodesic_drift(&model, &Geodesic::random(n, &mut rng), 64))
        .fold(0.0, f64::max);
    let brackets = bracket_check(&model, samples, 1e-3, &mut rng);
    let unitary = unitary_check(&model, samples, &mut rng);
    let ok = drift < CPN_DRIFT && brackets < CPN_BRACKET && unitary < CPN_UNITARY;
    let v = json!({
        "n": n,
        "c": model.c(),
        "samples": samples,
        "geodesic_drift": drift,
        "max_bracket": brackets,
        "casimir_unitary_deviation": unitary,
        "thresholds": { "drift": CPN_DRIFT, "bracket": CPN_BRACKET, "unitary": CPN_UNITARY },
        "ok": ok,
    });
    ctx.write_artifact(&format!("cp{n}.json"), &pretty(&v))?;
    ctx.emit(&v)?;
    Ok(if check && !ok { EXIT_NUMERICAL } else { EXIT_OK })
}

/// Runs the binary's command line against a config file; convenience for
/// examples and tests.
pub fn run_captured(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut full = vec!["klm"];
    full.extend_from_slice(args);
    let code = run(full, &mut out, &mut err);
    (code, String::from_utf8_lossy(&out).into_owned(), String::from_utf8_lossy(&err).into_owned())
}
