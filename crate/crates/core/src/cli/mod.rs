//! Command-line front end.
//!
//! | command    | exit codes                                                   |
//! |------------|--------------------------------------------------------------|
//! | `validate` | 0 all assumptions hold, 2 a violation, 1 I/O or schema error |
//! | `simulate` | 0 done, 2 failed validation or non-finite state, 1 error     |
//! | `certify`  | 0 certified, 3 feasible but not certified, 4 infeasible, 1 error |
//! | `scenario` | 0 done, 2 non-finite state, 1 error                          |
//! | `spectrum` | 0 done, 1 error                                              |
//!
//! Every command that writes a file writes its [`RunManifest`] first, so a
//! partial run can still be traced back to its inputs.

mod model;
mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::dynamics::{equilibrium, Equilibrium, ShiftedState, ShiftedSystem};
use crate::error::Error;
use crate::integrator::{integrate_with, Component, ConvergenceTracker};
use crate::network::{check_assumptions, AgentParams, Network};
use crate::scenarios::{initial_excess, Preset, ScenarioConfig, Society, DEFAULT_EXCESS};
use crate::stability::{gram_matrix, spectral_certificate, LyapunovFunction};
use crate::sustainability::{
    certify, equality_residual, minimal_window, BoxMonitor, BoxVerdict, SustainabilityBox,
    SustainabilityCertificate,
};

pub use model::{LoadError, Model};
pub use output::{fmt_f64, manifest_path, RunManifest, TOOL_VERSION};

use output::{display, to_json, write_json, CsvSink};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;
pub const EXIT_NOT_CERTIFIED: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

/// Relative slack when certifying a minimal window at equality.
pub const WINDOW_TOL: f64 = 1e-9;

/// Environment variable supplying the default seed.
pub const SEED_ENV: &str = "COMMONS_DYN_SEED";

#[derive(Debug, Parser)]
#[command(name = "commons-dyn", version, about = "Networked commons dynamics: equilibria, simulation and certificates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the structural assumptions and print the report as JSON.
    Validate {
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the shifted dynamics and write a trajectory CSV.
    Simulate(SimulateArgs),
    /// Evaluate the sustainability certificate for a box or compute the
    /// minimal window.
    Certify(CertifyArgs),
    /// Run the pro-social, equal and pro-ecological presets on one seeded
    /// random society.
    Scenario(ScenarioArgs),
    /// Spectrum of TᵀΘ + ΘT as JSON.
    Spectrum {
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Initial deviation from equilibrium.
#[derive(Debug, Args)]
pub struct InitialArgs {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub v0: f64,
    /// Comma-separated consumption deviations; one value is broadcast.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, conflicts_with = "excess")]
    pub w0: Option<Vec<f64>>,
    /// Draw each w0 uniformly from [0, EXCESS) using the seed.
    #[arg(long)]
    pub excess: Option<f64>,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = crate::integrator::DEFAULT_STEP)]
    pub step: f64,
    /// Write every k-th step (the final sample is always written).
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Override every sensitivity b_i.
    #[arg(long)]
    pub b: Option<f64>,
    /// Simulate even if the assumptions fail.
    #[arg(long)]
    pub force: bool,
    #[command(flatten)]
    pub init: InitialArgs,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    pub model: PathBuf,
    /// Box bounds: v_min v_max d_min d_max t_max.
    #[arg(
        long = "box",
        num_args = 5,
        value_names = ["V_MIN", "V_MAX", "D_MIN", "D_MAX", "T_MAX"],
        allow_negative_numbers = true,
        required_unless_present = "minimal_window",
        conflicts_with = "minimal_window"
    )]
    pub bounds: Option<Vec<f64>>,
    /// Compute the minimal sustainability window for this horizon.
    #[arg(long, value_name = "T_MAX")]
    pub minimal_window: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    /// Also simulate over [0, t_max] and check the box sample by sample.
    #[arg(long)]
    pub simulate: bool,
    #[arg(long, default_value_t = crate::integrator::DEFAULT_STEP)]
    pub step: f64,
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub init: InitialArgs,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = crate::scenarios::STANDARD_AGENTS)]
    pub agents: usize,
    #[arg(long, default_value_t = crate::scenarios::STANDARD_EDGES)]
    pub edges: usize,
    /// Uniform sensitivity instead of the seeded draws.
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long, default_value_t = 3000.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = crate::integrator::DEFAULT_STEP)]
    pub step: f64,
    #[arg(long, default_value_t = DEFAULT_EXCESS)]
    pub excess: f64,
    /// Convergence threshold on max_i |w_i|.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[arg(long, default_value_t = 100)]
    pub stride: usize,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

/// A failed command: exit code and message for stderr.
#[derive(Debug)]
struct Failure {
    code: i32,
    msg: String,
}

impl Failure {
    fn error(msg: impl Into<String>) -> Self {
        Failure {
            code: EXIT_ERROR,
            msg: msg.into(),
        }
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        Failure::error(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::error(format!("I/O error: {e}"))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InfeasibleEquilibrium(_) | Error::NonFiniteState { .. } => EXIT_VIOLATION,
            Error::WindowInfeasible(_) => EXIT_INFEASIBLE,
            _ => EXIT_ERROR,
        };
        Failure {
            code,
            msg: e.to_string(),
        }
    }
}

type Outcome = Result<i32, Failure>;

/// Parse `args` (including the program name) and run the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{e}");
                return EXIT_ERROR;
            }
            let _ = write!(stdout, "{e}");
            return EXIT_OK;
        }
    };
    let recorded: Vec<String> = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let result = match cli.command {
        Command::Validate { model, out } => validate(&model, out.as_deref(), &recorded, stdout),
        Command::Simulate(a) => simulate(&a, &recorded),
        Command::Certify(a) => certify_cmd(&a, &recorded, stdout),
        Command::Scenario(a) => scenario(&a, &recorded),
        Command::Spectrum { model, out } => spectrum(&model, out.as_deref(), &recorded, stdout),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.msg);
            f.code
        }
    }
}

/// Write `value` to `out` (manifest first) or to stdout.
fn emit<T: Serialize>(
    value: &T,
    out: Option<&Path>,
    mut manifest: RunManifest,
    stdout: &mut dyn Write,
) -> Result<(), Failure> {
    match out {
        Some(path) => {
            manifest.outputs.push(display(path));
            manifest.write(&manifest_path(path))?;
            write_json(path, value)?;
        }
        None => stdout.write_all(to_json(value).as_bytes())?,
    }
    Ok(())
}

fn load(path: &Path, b: Option<f64>) -> Result<Model, Failure> {
    let model = Model::load(path)?;
    Ok(match b {
        Some(b) => model.with_uniform_b(b)?,
        None => model,
    })
}

/// Equilibrium after checking the assumptions, unless forced.
fn prepare(model: &Model, force: bool) -> Result<Equilibrium, Failure> {
    let report = check_assumptions(&model.net, &model.params)?;
    if !report.all_pass() && !force {
        return Err(Failure {
            code: EXIT_VIOLATION,
            msg: format!(
                "model fails its assumptions (use --force to override):\n{}",
                to_json(&report)
            ),
        });
    }
    Ok(equilibrium(&model.params, &model.net)?)
}

fn initial_state(init: &InitialArgs, n: usize) -> Result<ShiftedState, Failure> {
    let mut s = match (&init.w0, init.excess) {
        (Some(w), _) if w.len() == 1 => ShiftedState::new(0.0, vec![w[0]; n]),
        (Some(w), _) if w.len() == n => ShiftedState::new(0.0, w.clone()),
        (Some(w), _) => {
            return Err(Failure::error(format!(
                "--w0 has {} values, expected 1 or {n}",
                w.len()
            )))
        }
        (None, Some(e)) if e > 0.0 && e.is_finite() => initial_excess(init.seed, n, e),
        (None, Some(e)) => return Err(Failure::error(format!("--excess must be positive, got {e}"))),
        (None, None) => ShiftedState::origin(n),
    };
    s.v = init.v0;
    Ok(s)
}

fn validate(path: &Path, out: Option<&Path>, args: &[String], stdout: &mut dyn Write) -> Outcome {
    let model = Model::load(path)?;
    let report = check_assumptions(&model.net, &model.params)?;
    let mut manifest = RunManifest::new("validate", args);
    manifest.inputs.push(display(path));
    emit(&report, out, manifest, stdout)?;
    Ok(if report.all_pass() { EXIT_OK } else { EXIT_VIOLATION })
}

fn spectrum(path: &Path, out: Option<&Path>, args: &[String], stdout: &mut dyn Write) -> Outcome {
    let model = Model::load(path)?;
    let report = spectral_certificate(&gram_matrix(&model.net, &model.params)?)?;
    let mut manifest = RunManifest::new("spectrum", args);
    manifest.inputs.push(display(path));
    emit(&report, out, manifest, stdout)?;
    Ok(EXIT_OK)
}

/// Writes every `stride`-th sample plus the last one.
struct Recorder {
    sink: CsvSink,
    lyap: LyapunovFunction,
    stride: usize,
    count: usize,
    pending: Option<(f64, ShiftedState, crate::dynamics::ShiftedRate)>,
}

impl Recorder {
    fn new(path: &Path, params: &AgentParams, eq: &Equilibrium, stride: usize) -> std::io::Result<Self> {
        Ok(Recorder {
            sink: CsvSink::create(path, eq)?,
            lyap: LyapunovFunction::new(params, eq),
            stride: stride.max(1),
            count: 0,
            pending: None,
        })
    }

    fn push(&mut self, t: f64, s: &ShiftedState, r: &crate::dynamics::ShiftedRate) {
        if self.count % self.stride == 0 {
            self.sink.row(t, s, r, self.lyap.value(s));
            self.pending = None;
        } else {
            self.pending = Some((t, s.clone(), r.clone()));
        }
        self.count += 1;
    }

    fn finish(mut self) -> std::io::Result<()> {
        if let Some((t, s, r)) = self.pending.take() {
            self.sink.row(t, &s, &r, self.lyap.value(&s));
        }
        self.sink.finish()
    }
}

fn simulate(a: &SimulateArgs, args: &[String]) -> Outcome {
    let model = load(&a.model, a.b)?;
    let eq = prepare(&model, a.force)?;
    let state0 = initial_state(&a.init, model.params.n())?;
    let system = ShiftedSystem::new(&model.params, &model.net, &eq)?;

    let mut manifest = RunManifest::new("simulate", args);
    manifest.inputs.push(display(&a.model));
    manifest.seed = Some(a.init.seed);
    manifest.step = Some(a.step);
    manifest.horizon = Some(a.t_end);
    manifest.outputs.push(display(&a.out));
    manifest.write(&manifest_path(&a.out))?;

    let mut rec = Recorder::new(&a.out, &model.params, &eq, a.stride)?;
    let outcome = integrate_with(&system, &state0, a.t_end, a.step, |t, s, r| rec.push(t, s, r));
    rec.finish()?;
    outcome?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct CertifyReport {
    #[serde(rename = "box")]
    bx: SustainabilityBox,
    v0: f64,
    w0: Vec<f64>,
    certificate: SustainabilityCertificate,
    /// Largest relative gap `|ξ_i - e^{β‖T‖₁t_max}C₁| / ξ_i`; only for
    /// minimal windows.
    #[serde(skip_serializing_if = "Option::is_none")]
    equality_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    box_check: Option<BoxVerdict>,
}

fn certify_cmd(a: &CertifyArgs, args: &[String], stdout: &mut dyn Write) -> Outcome {
    let model = load(&a.model, a.b)?;
    let eq = prepare(&model, a.force)?;
    let state0 = initial_state(&a.init, model.params.n())?;
    let w0: Vec<f64> = state0.w.iter().copied().collect();
    let (p, net) = (&model.params, &model.net);

    let (bx, residual) = match (&a.bounds, a.minimal_window) {
        (Some(v), _) => (
            SustainabilityBox::new(v[0], v[1], v[2], v[3], v[4]).map_err(Failure::from)?,
            None,
        ),
        (None, Some(t_max)) => {
            let bx = minimal_window(p, net, &eq, t_max, state0.v, &w0)?;
            let r = equality_residual(p, net, &eq, &bx, state0.v, &w0)?;
            (bx, Some(r))
        }
        (None, None) => return Err(Failure::error("need --box or --minimal-window")),
    };
    let certificate = certify(p, net, &eq, &bx, state0.v, &w0)?;
    let box_check = if a.simulate {
        Some(check_box(p, net, &eq, &bx, &state0, a.step)?)
    } else {
        None
    };
    // a minimal window meets the bound with equality, so judge it with the
    // same relative tolerance as the back-substitution
    let at_equality = residual.is_some()
        && certificate
            .t_norm_bound
            .is_some_and(|bound| certificate.t_norm <= bound * (1.0 + WINDOW_TOL));
    let code = if certificate.certified || at_equality {
        EXIT_OK
    } else if certificate.feasible {
        EXIT_NOT_CERTIFIED
    } else {
        EXIT_INFEASIBLE
    };
    let report = CertifyReport {
        bx,
        v0: state0.v,
        w0,
        certificate,
        equality_residual: residual,
        box_check,
    };
    let mut manifest = RunManifest::new("certify", args);
    manifest.inputs.push(display(&a.model));
    manifest.seed = Some(a.init.seed);
    manifest.horizon = Some(bx.t_max);
    if a.simulate {
        manifest.step = Some(a.step);
    }
    emit(&report, a.out.as_deref(), manifest, stdout)?;
    Ok(code)
}

fn check_box(
    params: &AgentParams,
    net: &Network,
    eq: &Equilibrium,
    bx: &SustainabilityBox,
    state0: &ShiftedState,
    step: f64,
) -> Result<BoxVerdict, Failure> {
    let system = ShiftedSystem::new(params, net, eq)?;
    let mut monitor = BoxMonitor::new(*bx);
    integrate_with(&system, state0, bx.t_max, step, |t, s, r| monitor.push(t, s, r))?;
    Ok(monitor.finish()?)
}

/// Per-preset results of a scenario run.
#[derive(Debug, Clone, Serialize)]
pub struct PresetSummary {
    pub label: Preset,
    pub delta: f64,
    pub mean_alpha: f64,
    pub mean_nu: f64,
    pub x0: f64,
    /// First time after which `max_i |w_i|` stays below the tolerance;
    /// `null` if it never settles within the horizon.
    pub convergence_time: Option<f64>,
    pub v_min: f64,
    pub v_max: f64,
    /// Largest `|v|` over the run.
    pub v_amplitude: f64,
    /// Largest `max_i |w_i|` over the run.
    pub w_amplitude: f64,
    pub final_sup_norm: f64,
    pub csv: String,
    pub config: String,
}

#[derive(Debug, Serialize)]
struct ScenarioSummary {
    seed: u64,
    agents: usize,
    edges: usize,
    t_end: f64,
    step: f64,
    excess: f64,
    tolerance: f64,
    presets: Vec<PresetSummary>,
}

fn mean(v: &nalgebra::DVector<f64>) -> f64 {
    v.sum() / v.len() as f64
}

fn run_preset(
    cfg: &ScenarioConfig,
    state0: &ShiftedState,
    a: &ScenarioArgs,
) -> Result<PresetSummary, Failure> {
    let name = cfg.label.name();
    let csv = format!("{name}.csv");
    let config = format!("{name}.json");
    write_json(&a.out_dir.join(&config), cfg)?;

    let params = cfg.params()?;
    let eq = equilibrium(&params, &cfg.network)?;
    let system = ShiftedSystem::new(&params, &cfg.network, &eq)?;
    let mut rec = Recorder::new(&a.out_dir.join(&csv), &params, &eq, a.stride)?;
    let mut tracker = ConvergenceTracker::new(a.tol, Component::Consumption);
    let (mut v_min, mut v_max, mut w_amp, mut last) = (0.0f64, 0.0f64, 0.0f64, 0.0);
    let outcome = integrate_with(&system, state0, a.t_end, a.step, |t, s, r| {
        rec.push(t, s, r);
        tracker.push(t, s);
        v_min = v_min.min(s.v);
        v_max = v_max.max(s.v);
        w_amp = w_amp.max(s.w.amax());
        last = s.sup_norm();
    });
    rec.finish()?;
    outcome?;
    Ok(PresetSummary {
        label: cfg.label,
        delta: cfg.delta,
        mean_alpha: mean(params.alpha()),
        mean_nu: mean(params.nu()),
        x0: eq.x0,
        convergence_time: tracker.finish(),
        v_min,
        v_max,
        v_amplitude: v_max.max(-v_min),
        w_amplitude: w_amp,
        final_sup_norm: last,
        csv,
        config,
    })
}

fn scenario(a: &ScenarioArgs, args: &[String]) -> Outcome {
    std::fs::create_dir_all(&a.out_dir)?;
    let society = Society::random(a.agents, a.edges, a.seed)?;
    let configs = Preset::STANDARD
        .iter()
        .map(|&k| {
            let cfg = society.config(k)?;
            Ok(match a.b {
                Some(b) => {
                    cfg.params()?.with_uniform_b(b)?;
                    cfg.with_uniform_b(b)
                }
                None => cfg,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let state0 = society.initial_state(a.excess);

    let mut manifest = RunManifest::new("scenario", args);
    manifest.seed = Some(a.seed);
    manifest.step = Some(a.step);
    manifest.horizon = Some(a.t_end);
    for cfg in &configs {
        let name = cfg.label.name();
        manifest.outputs.push(display(&a.out_dir.join(format!("{name}.json"))));
        manifest.outputs.push(display(&a.out_dir.join(format!("{name}.csv"))));
    }
    let summary_path = a.out_dir.join("summary.json");
    manifest.outputs.push(display(&summary_path));
    manifest.write(&a.out_dir.join("manifest.json"))?;

    let results: Vec<Mutex<Option<Result<PresetSummary, Failure>>>> =
        configs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let work = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(cfg) = configs.get(i) else { break };
        let r = run_preset(cfg, &state0, a);
        *results[i].lock().unwrap() = Some(r);
    };
    std::thread::scope(|scope| {
        for _ in 1..a.jobs.clamp(1, configs.len()) {
            scope.spawn(work);
        }
        work();
    });

    let mut presets = Vec::with_capacity(configs.len());
    for slot in results {
        presets.push(slot.into_inner().unwrap().expect("every preset ran")?);
    }
    let summary = ScenarioSummary {
        seed: a.seed,
        agents: a.agents,
        edges: a.edges,
        t_end: a.t_end,
        step: a.step,
        excess: a.excess,
        tolerance: a.tol,
        presets,
    };
    write_json(&summary_path, &summary)?;
    Ok(EXIT_OK)
}
