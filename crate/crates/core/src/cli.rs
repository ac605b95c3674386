//! `collapse-lab` command line front end.
//!
//! Results go to stdout (or `--out`) as JSON with a fixed field order and
//! every float written with 17 significant digits; sidereal series go to a
//! CSV file. Exit code 2 marks configuration errors, 1 runtime errors.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::collapse::{self, BobObservable, CollapseModel, JointModel};
use crate::ether::{DriftConfig, Interferometer};
use crate::experiment::{self, CountTally, Probabilities, RunConfig, SiderealPoint};
use crate::spacetime::{self, IntervalClass, SpacetimeEvent};
use crate::stats::{self, BootstrapInterval, FitResult, ProportionEstimate};
use crate::{Constants, Error};

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "COLLAPSE_LAB_SEED";

const ROUNDED_NOTE: &str = "c = 3e8 m/s; with these constants a pi/6 rotation shift at \
v = 30 km/s needs L = 6.25 m for 1500 nm photons, while 1550 nm photons need L = 6.458 m \
(6.25 m at 1550 nm gives 0.5067 rad)";

#[derive(Debug, Parser)]
#[command(name = "collapse-lab", version, about = "Single-photon two-detector ether-drift test: simulation and analysis")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct GlobalArgs {
    /// Experiment description (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Use c = 3e8 m/s.
    #[arg(long, global = true)]
    pub paper_mode: bool,
    /// Worker threads for the Monte Carlo.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides run.seed and COLLAPSE_LAB_SEED.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides run.nHeralds.
    #[arg(long, global = true)]
    pub n_heralds: Option<u64>,
    /// Overrides the collapse model.
    #[arg(long, global = true)]
    pub model: Option<ModelName>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One heralded run: tallies, estimates, Wilson intervals.
    Simulate,
    /// Runs before and after a 90° rotation and tests the change in P_A.
    Rotate,
    /// Scans the day, fits the sidereal modulation and bootstraps its amplitude.
    Sidereal(SiderealArgs),
    /// Heralds per arm needed to tell two detection probabilities apart.
    Power(PowerArgs),
    /// No-signaling audit of a two-party joint model.
    Audit(AuditArgs),
    /// Classifies the separation of two detection events.
    Interval(IntervalArgs),
}

#[derive(Debug, Args)]
pub struct SiderealArgs {
    #[arg(long)]
    pub hours: f64,
    #[arg(long = "step-s")]
    pub step_s: f64,
    /// Destination of the time series.
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub resamples: usize,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    #[arg(long, default_value_t = 0.5)]
    pub p0: f64,
    #[arg(long, default_value_t = 0.25)]
    pub p1: f64,
    #[arg(long, default_value_t = 5.0)]
    pub sigmas: f64,
    #[arg(long, default_value_t = 0.99)]
    pub power: f64,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long)]
    pub model_file: PathBuf,
}

#[derive(Debug, Args)]
pub struct IntervalArgs {
    #[arg(long = "dt-s", allow_hyphen_values = true)]
    pub dt_s: f64,
    #[arg(long = "dx-m", allow_hyphen_values = true)]
    pub dx_m: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    Covariant,
    PreferredFrame,
    /// Multisimultaneity with the detectors in before-before timing.
    MsDetectors,
}

/// Error carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } | Error::Unnormalized { .. } | Error::Superluminal { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

// ---------------------------------------------------------------------------
// configuration file

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub model: Option<ModelName>,
    #[serde(default)]
    pub interferometer: InterferometerSpec,
    #[serde(default)]
    pub drift: DriftSpec,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default)]
    pub constants: ConstantsSpec,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct InterferometerSpec {
    pub arm_length_m: f64,
    pub wavelength_m: f64,
    pub device_phase_rad: Option<f64>,
    /// Sets the device phase so that the effective phase at the start
    /// orientation and time equals this value.
    pub operating_point_rad: Option<f64>,
    pub arm_azimuth_rad: f64,
}

impl Default for InterferometerSpec {
    fn default() -> Self {
        InterferometerSpec {
            arm_length_m: 6.25,
            wavelength_m: 1550e-9,
            device_phase_rad: None,
            operating_point_rad: None,
            arm_azimuth_rad: 0.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct DriftSpec {
    pub speed_mps: f64,
    pub right_ascension_rad: f64,
    pub declination_rad: f64,
    pub lab_latitude_rad: f64,
    pub lab_longitude_rad: f64,
}

impl Default for DriftSpec {
    /// 30 km/s lying in the lab plane along azimuth 0.
    fn default() -> Self {
        DriftSpec {
            speed_mps: 3.0e4,
            right_ascension_rad: 0.0,
            declination_rad: std::f64::consts::FRAC_PI_2,
            lab_latitude_rad: 0.0,
            lab_longitude_rad: 0.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct RunSpec {
    pub n_heralds: u64,
    pub seed: u64,
    pub efficiency: f64,
    pub dark_count_prob: f64,
    pub visibility: f64,
    pub separate_runs: bool,
    pub start_time_s: f64,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            n_heralds: 1_000_000,
            seed: 0,
            efficiency: experiment::DEFAULT_EFFICIENCY,
            dark_count_prob: experiment::DEFAULT_DARK_COUNT_PROB,
            visibility: 1.0,
            separate_runs: false,
            start_time_s: 0.0,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct ConstantsSpec {
    pub paper_mode: bool,
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

pub fn load_spec(path: Option<&Path>) -> Result<ExperimentSpec, CliError> {
    match path {
        None => Ok(ExperimentSpec::default()),
        Some(p) => serde_json::from_str(&read_file(p)?)
            .map_err(|e| CliError::Config(format!("{}: {e}", p.display()))),
    }
}

fn keyed(key: &'static str) -> impl Fn(Error) -> CliError {
    move |e| CliError::Config(format!("{key}: {e}"))
}

/// Resolved settings for the simulation commands.
#[derive(Clone, Copy, Debug)]
pub struct Resolved {
    pub run: RunConfig,
    pub model: ModelName,
    pub rounded_constants: bool,
}

/// Applies flag and environment overrides and validates the result.
pub fn resolve(spec: &ExperimentSpec, g: &GlobalArgs, env_seed: Option<&str>) -> Result<Resolved, CliError> {
    let rounded = g.paper_mode || spec.constants.paper_mode;
    let constants = Constants::from_mode(rounded);
    let model_name = g.model.or(spec.model).unwrap_or(ModelName::Covariant);
    let v = spec.run.visibility;
    let model = match model_name {
        ModelName::Covariant => CollapseModel::covariant(v),
        ModelName::PreferredFrame => CollapseModel::preferred_frame(v),
        ModelName::MsDetectors => CollapseModel::ms_detectors(v, true),
    }
    .map_err(keyed("run.visibility"))?;

    let i = &spec.interferometer;
    if i.device_phase_rad.is_some() && i.operating_point_rad.is_some() {
        return Err(CliError::Config(
            "interferometer: devicePhaseRad and operatingPointRad are mutually exclusive".into(),
        ));
    }
    let device_phase = i.device_phase_rad.unwrap_or(std::f64::consts::FRAC_PI_2);
    let ifo = Interferometer::new(i.arm_length_m, i.wavelength_m, device_phase, i.arm_azimuth_rad)
        .map_err(keyed("interferometer"))?;
    let d = &spec.drift;
    let drift = DriftConfig::new(
        d.speed_mps,
        d.right_ascension_rad,
        d.declination_rad,
        d.lab_latitude_rad,
        d.lab_longitude_rad,
    )
    .map_err(keyed("drift"))?;

    let seed = match (g.seed, env_seed) {
        (Some(s), _) => s,
        (None, Some(s)) => s
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{SEED_ENV}: '{s}' is not an unsigned 64-bit integer")))?,
        (None, None) => spec.run.seed,
    };
    let mut run = RunConfig::new(model, ifo, drift);
    run.n_heralds = g.n_heralds.unwrap_or(spec.run.n_heralds);
    run.seed = seed;
    run.efficiency = spec.run.efficiency;
    run.dark_count_prob = spec.run.dark_count_prob;
    run.separate_runs = spec.run.separate_runs;
    run.time = spec.run.start_time_s;
    run.constants = constants;
    run.validate().map_err(keyed("run"))?;
    if let Some(target) = i.operating_point_rad {
        run = run.calibrated(target).map_err(keyed("interferometer.operatingPointRad"))?;
    }
    Ok(Resolved {
        run,
        model: model_name,
        rounded_constants: rounded,
    })
}

// ---------------------------------------------------------------------------
// output

/// JSON formatter writing every float with 17 significant digits.
struct SigFigs;

impl serde_json::ser::Formatter for SigFigs {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }
}

/// Serializes with [`SigFigs`], newline-terminated.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFigs);
    value.serialize(&mut ser).expect("result types serialize");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}

fn csv_float(out: &mut String, x: f64) {
    let _ = write!(out, "{x:.16e}");
}

/// `t_s,theta_eff_rad,v_eff_mps,P_A,P_B` rows.
pub fn sidereal_csv(points: &[SiderealPoint]) -> String {
    let mut out = String::from("t_s,theta_eff_rad,v_eff_mps,P_A,P_B\n");
    for p in points {
        for (i, x) in [p.t, p.theta_eff, p.v_eff, p.p_a, p.p_b].into_iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            csv_float(&mut out, x);
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Metadata {
    paper_mode: bool,
    speed_of_light_mps: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<ModelName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<&'static str>,
}

impl Metadata {
    fn of(r: &Resolved) -> Self {
        Metadata {
            paper_mode: r.rounded_constants,
            speed_of_light_mps: r.run.constants.c,
            seed: Some(r.run.seed),
            model: Some(r.model),
            note: r.rounded_constants.then_some(ROUNDED_NOTE),
        }
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SimulateOutput {
    command: &'static str,
    metadata: Metadata,
    effective_phase_rad: f64,
    tally: CountTally,
    #[serde(rename = "P_A")]
    p_a: f64,
    #[serde(rename = "P_B")]
    p_b: f64,
    wilson_a: ProportionEstimate,
    wilson_b: ProportionEstimate,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ProbPair {
    #[serde(rename = "P_A")]
    p_a: f64,
    #[serde(rename = "P_B")]
    p_b: f64,
}

impl From<Probabilities> for ProbPair {
    fn from(p: Probabilities) -> Self {
        ProbPair { p_a: p.p_a, p_b: p.p_b }
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct RotateOutput {
    command: &'static str,
    metadata: Metadata,
    before: ProbPair,
    after: ProbPair,
    #[serde(rename = "deltaP")]
    delta_p: f64,
    z: f64,
    p_value: f64,
    tally_before: CountTally,
    tally_after: CountTally,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SiderealOutput {
    command: &'static str,
    metadata: Metadata,
    rows: usize,
    duration_s: f64,
    step_s: f64,
    fit: FitResult,
    bootstrap: BootstrapInterval,
    csv: String,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct PowerOutput {
    command: &'static str,
    p0: f64,
    p1: f64,
    sigmas: f64,
    power: f64,
    n_required: u64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AuditFile {
    #[serde(default)]
    pub observable: BobObservable,
    pub model: JointModel,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct AuditOutput {
    command: &'static str,
    observable: BobObservable,
    max_shift: f64,
    argmax: Option<collapse::AuditArgmax>,
    signaling: bool,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct IntervalOutput {
    command: &'static str,
    dt_s: f64,
    dx_m: f64,
    class: IntervalClass,
    interval_squared_m2: f64,
}

/// Everything a command produces.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub json: String,
    /// `(path, contents)` of a CSV side output.
    pub csv: Option<(PathBuf, String)>,
}

fn json_only(json: String) -> CommandOutput {
    CommandOutput { json, csv: None }
}

pub fn cmd_simulate(r: &Resolved) -> Result<CommandOutput, CliError> {
    let tally = experiment::simulate_run(&r.run)?;
    let p = experiment::tally_to_probabilities(&tally)?;
    let out = SimulateOutput {
        command: "simulate",
        metadata: Metadata::of(r),
        effective_phase_rad: r.run.phase()?,
        tally,
        p_a: p.p_a,
        p_b: p.p_b,
        wilson_a: stats::wilson_interval(tally.coincidences_a, tally.heralds_a, 0.95)?,
        wilson_b: stats::wilson_interval(tally.coincidences_b, tally.heralds_b, 0.95)?,
    };
    Ok(json_only(to_json(&out)))
}

pub fn cmd_rotate(r: &Resolved) -> Result<CommandOutput, CliError> {
    let rot = experiment::rotation_protocol(&r.run)?;
    let t = stats::two_proportion_test(&rot.tally_before, &rot.tally_after)?;
    let out = RotateOutput {
        command: "rotate",
        metadata: Metadata::of(r),
        before: rot.before.into(),
        after: rot.after.into(),
        delta_p: rot.delta_p,
        z: t.z,
        p_value: t.p_value,
        tally_before: rot.tally_before,
        tally_after: rot.tally_after,
    };
    Ok(json_only(to_json(&out)))
}

/// Seed of the bootstrap stage, derived from the run seed.
fn bootstrap_seed(run_seed: u64) -> u64 {
    crate::rng::SeedSequence::new(run_seed).child(0xB007).key()
}

pub fn cmd_sidereal(r: &Resolved, a: &SiderealArgs) -> Result<CommandOutput, CliError> {
    if !(a.hours > 0.0 && a.hours.is_finite()) {
        return Err(CliError::Config(format!("--hours: {} must be positive", a.hours)));
    }
    let duration = a.hours * 3600.0;
    let series = experiment::sidereal_scan(&r.run, duration, a.step_s)?;
    let fit = stats::fit_sidereal(&series)?;
    if a.resamples < stats::MIN_RESAMPLES {
        return Err(CliError::Config(format!("--resamples: must be at least {}", stats::MIN_RESAMPLES)));
    }
    let bootstrap = stats::bootstrap_ci(&series, a.resamples, bootstrap_seed(r.run.seed))?;
    let out = SiderealOutput {
        command: "sidereal",
        metadata: Metadata::of(r),
        rows: series.len(),
        duration_s: duration,
        step_s: a.step_s,
        fit,
        bootstrap,
        csv: a.csv.display().to_string(),
    };
    Ok(CommandOutput {
        json: to_json(&out),
        csv: Some((a.csv.clone(), sidereal_csv(&series))),
    })
}

pub fn cmd_power(a: &PowerArgs) -> Result<CommandOutput, CliError> {
    let n = stats::required_heralds(a.p0, a.p1, a.sigmas, a.power)?;
    Ok(json_only(to_json(&PowerOutput {
        command: "power",
        p0: a.p0,
        p1: a.p1,
        sigmas: a.sigmas,
        power: a.power,
        n_required: n,
    })))
}

pub fn cmd_audit(a: &AuditArgs) -> Result<CommandOutput, CliError> {
    let text = read_file(&a.model_file)?;
    let file: AuditFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", a.model_file.display())))?;
    let report = collapse::audit_observable(&file.model, file.observable)?;
    Ok(json_only(to_json(&AuditOutput {
        command: "audit",
        observable: file.observable,
        max_shift: report.max_shift,
        argmax: report.argmax,
        signaling: report.max_shift > 0.0,
    })))
}

pub fn cmd_interval(a: &IntervalArgs) -> Result<CommandOutput, CliError> {
    let origin = SpacetimeEvent::on_axis(0.0, 0.0)?;
    let e = SpacetimeEvent::on_axis(a.dt_s, a.dx_m).map_err(keyed("--dt-s/--dx-m"))?;
    Ok(json_only(to_json(&IntervalOutput {
        command: "interval",
        dt_s: a.dt_s,
        dx_m: a.dx_m,
        class: spacetime::classify_interval(&origin, &e),
        interval_squared_m2: spacetime::interval_squared(&origin, &e),
    })))
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli, env_seed: Option<&str>) -> Result<CommandOutput, CliError> {
    if cli.global.threads == 0 {
        return Err(CliError::Config("--threads: must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.threads)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    pool.install(|| {
        let resolved = || -> Result<Resolved, CliError> {
            let spec = load_spec(cli.global.config.as_deref())?;
            resolve(&spec, &cli.global, env_seed)
        };
        match &cli.command {
            Command::Simulate => cmd_simulate(&resolved()?),
            Command::Rotate => cmd_rotate(&resolved()?),
            Command::Sidereal(a) => cmd_sidereal(&resolved()?, a),
            Command::Power(a) => cmd_power(a),
            Command::Audit(a) => cmd_audit(a),
            Command::Interval(a) => cmd_interval(a),
        }
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    let result = execute(&cli, env_seed.as_deref()).and_then(|out| {
        if let Some((path, csv)) = &out.csv {
            write_file(path, csv)?;
        }
        match &cli.global.out {
            Some(path) => write_file(path, &out.json),
            None => {
                print!("{}", out.json);
                Ok(())
            }
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
