//! `hdbell` command line.
//!
//! Output layout under the output directory (`--out`, `HDBELL_OUT`, or `out`):
//!
//! ```text
//! basis/psi_m_n.json  basis/gram.csv
//! states/psi_m_n.json  states/manifest.json
//! counts/psi_m_n.csv
//! tomo/rho_m_n.json  tomo/rho_m_n.diagnostics.json
//! certify/report.json  certify/overlaps.csv  certify/overlaps.svg
//! report/summary.txt  report/fidelity.svg
//! ```
//!
//! Exit codes: 0 success, 2 usage error, 3 data or validation error, 4 solver
//! did not converge (results are still written).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bellbasis::{bell_state_minus, bell_state_with, BellIndex, Convention, ModeWindow};
use crate::certify::{certify_fidelity, fidelity, mutual_information, CertificationReport};
use crate::error::{Error, Result};
use crate::formats::{self, DensityRecord, LabeledMatrix, StateRecord};
use crate::gates::{apply_local, dove_angle, dove_prism, Party};
use crate::hilbert::{DensityMatrix, PureState};
use crate::measurement::{crosstalk_channel, expected_counts, joint_settings, simulate_counts, EdgeMode};
use crate::spdc::{group_state_with_pump, pump_recipe, PumpTerm, SchmidtProfile, SpdcModel};
use crate::svg;
use crate::tomography::{reconstruct, MeasurementMap, SolverOptions, TomographyProblem};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

pub const OUT_ENV: &str = "HDBELL_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub epsilon: f64,
    pub edge: EdgeMode,
    pub shots: u64,
    pub seed: u64,
    /// Use `round(shots·p)` instead of Poisson draws.
    pub noiseless: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            epsilon: 0.0,
            edge: EdgeMode::Reflect,
            shots: 10_000,
            seed: 1,
            noiseless: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateConfig {
    /// Arm carrying the Dove prism.
    pub party: Party,
    /// Explicit prism angle; overrides the per-`n` angle when set.
    pub alpha: Option<f64>,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            party: Party::A,
            alpha: None,
        }
    }
}

/// Everything a full run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub d: usize,
    pub window: Option<ModeWindow>,
    pub ell_range: (i64, i64),
    pub profile: SchmidtProfile,
    /// Extra phase (radians) on the pump component with OAM `L`.
    pub pump_phases: BTreeMap<i64, f64>,
    pub gate: GateConfig,
    /// Correlation classes to generate; all when empty.
    pub m: Vec<usize>,
    /// Phase classes to generate; all when empty.
    pub n: Vec<usize>,
    pub noise: NoiseConfig,
    pub solver: SolverOptions,
    pub out_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            d: 4,
            window: None,
            ell_range: SpdcModel::DEFAULT_ELL_RANGE,
            profile: SchmidtProfile::Flat,
            pump_phases: BTreeMap::new(),
            gate: GateConfig::default(),
            m: Vec::new(),
            n: Vec::new(),
            noise: NoiseConfig::default(),
            solver: SolverOptions::default(),
            out_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn window(&self) -> Result<ModeWindow> {
        let w = match &self.window {
            Some(w) => w.clone(),
            None => ModeWindow::centered(self.d)?,
        };
        if w.d() != self.d {
            return Err(Error::InvalidArgument(format!(
                "window has {} labels but d = {}",
                w.d(),
                self.d
            )));
        }
        Ok(w)
    }

    pub fn model(&self) -> Result<SpdcModel> {
        SpdcModel::new(self.window()?, self.ell_range, self.profile.clone())
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidArgument(format!("d = {} < 2", self.d)));
        }
        self.model()?;
        if let Some(k) = self.m.iter().chain(&self.n).find(|&&k| k >= self.d) {
            return Err(Error::InvalidArgument(format!(
                "class index {k} out of range for d = {}",
                self.d
            )));
        }
        if !(0.0..1.0).contains(&self.noise.epsilon) {
            return Err(Error::InvalidArgument(format!(
                "crosstalk ε = {} outside [0, 1)",
                self.noise.epsilon
            )));
        }
        if self.noise.shots == 0 {
            return Err(Error::InvalidArgument("shots must be ≥ 1".into()));
        }
        if self.pump_phases.values().any(|p| !p.is_finite()) || self.gate.alpha.is_some_and(|a| !a.is_finite()) {
            return Err(Error::NonFinite("config angles"));
        }
        Ok(())
    }

    /// Selected `(m, n)` pairs, `m` outer.
    pub fn indices(&self) -> Result<Vec<BellIndex>> {
        let pick = |v: &[usize]| {
            if v.is_empty() {
                (0..self.d).collect()
            } else {
                v.to_vec()
            }
        };
        let (ms, ns) = (pick(&self.m), pick(&self.n));
        ms.iter()
            .flat_map(|&m| ns.iter().map(move |&n| (m, n)))
            .map(|(m, n)| BellIndex::new(self.d, m, n))
            .collect()
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(Error),
    NotConverged(Vec<String>),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::NotConverged(_) => EXIT_NOT_CONVERGED,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(e) => write!(f, "{e}"),
            CliError::NotConverged(names) => write!(f, "solver did not converge for: {}", names.join(", ")),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "hdbell", version, about = "High-dimensional OAM Bell-state toolkit")]
pub struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = OUT_ENV, default_value = "out")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ConventionArg {
    Plus,
    Minus,
}

impl From<ConventionArg> for Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Plus => Convention::Plus,
            ConventionArg::Minus => Convention::Minus,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProfileArg {
    Flat,
    Gaussian,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EdgeArg {
    Reflect,
    Leak,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PartyArg {
    A,
    B,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// χ² denominator floor (default 1/(10·shots)).
    #[arg(long)]
    pub floor: Option<f64>,
    #[arg(long)]
    pub inner_steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_enum)]
    pub edge: Option<EdgeArg>,
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Expected counts instead of Poisson draws.
    #[arg(long)]
    pub noiseless: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the ideal Bell basis and its Gram matrix.
    Basis {
        #[arg(long, default_value_t = 4)]
        d: usize,
        #[arg(long, value_enum, default_value = "minus")]
        convention: ConventionArg,
    },
    /// Prepare Bell states through pump shaping, filtering and the Dove prism.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        profile: Option<ProfileArg>,
        #[arg(long)]
        sigma: Option<f64>,
        /// Restrict to these correlation classes.
        #[arg(long, value_delimiter = ',')]
        m: Vec<usize>,
        /// Restrict to these phase classes.
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long, value_enum)]
        party: Option<PartyArg>,
    },
    /// Emulate coincidence counts over all joint settings.
    Simulate {
        /// State JSON, density JSON, or a directory of `psi_*.json`.
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        noise: NoiseArgs,
    },
    /// Reconstruct density matrices from counts.
    Tomo {
        /// Counts CSV or a directory of them.
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Fidelities, witness verdicts, overlaps and mutual information.
    Certify {
        /// Density JSON or a directory of `rho_m_n.json`.
        input: Option<PathBuf>,
        /// Certify a labeled overlap CSV instead of density matrices.
        #[arg(long, conflicts_with_all = ["input", "table1"])]
        overlaps: Option<PathBuf>,
        /// Certify the bundled experimental overlap table.
        #[arg(long, conflicts_with = "input")]
        table1: bool,
        /// Target `m,n` for a single density file whose name carries no index.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        target: Option<Vec<usize>>,
    },
    /// Summarize a certified run directory.
    Report { dir: PathBuf },
    /// generate → simulate → tomo → certify → report.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("hdbell: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult<Vec<String>> {
    let out = cli.out.as_path();
    match &cli.command {
        Command::Basis { d, convention } => cmd_basis(*d, (*convention).into(), out),
        Command::Generate {
            config,
            profile,
            sigma,
            m,
            n,
            party,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            match (profile, sigma) {
                (Some(ProfileArg::Flat), _) => cfg.profile = SchmidtProfile::Flat,
                (Some(ProfileArg::Gaussian), Some(s)) => cfg.profile = SchmidtProfile::Gaussian { sigma: *s },
                (Some(ProfileArg::Gaussian), None) => {
                    return Err(CliError::Usage("--profile gaussian needs --sigma".into()))
                }
                (None, Some(_)) => return Err(CliError::Usage("--sigma needs --profile gaussian".into())),
                (None, None) => {}
            }
            if !m.is_empty() {
                cfg.m = m.clone();
            }
            if !n.is_empty() {
                cfg.n = n.clone();
            }
            if let Some(p) = party {
                cfg.gate.party = match p {
                    PartyArg::A => Party::A,
                    PartyArg::B => Party::B,
                };
            }
            check_config(&cfg)?;
            cmd_generate(&cfg, &out_dir(&cfg, out))
        }
        Command::Simulate { input, config, noise } => {
            let mut cfg = load_config(config.as_deref())?;
            apply_noise_args(&mut cfg, noise);
            check_config(&cfg)?;
            cmd_simulate(&cfg, input, &out_dir(&cfg, out))
        }
        Command::Tomo { input, config, solver } => {
            let mut cfg = load_config(config.as_deref())?;
            apply_solver_args(&mut cfg, solver)?;
            check_config(&cfg)?;
            cmd_tomo(&cfg, input, &out_dir(&cfg, out))
        }
        Command::Certify {
            input,
            overlaps,
            table1,
            target,
        } => {
            let source = match (input, overlaps, table1) {
                (Some(p), None, false) => {
                    let target = match target.as_deref() {
                        Some(&[m, n]) => Some((m, n)),
                        Some(_) => return Err(CliError::Usage("--target takes m,n".into())),
                        None => None,
                    };
                    CertifySource::Density(p.clone(), target)
                }
                (None, Some(p), false) => CertifySource::Overlaps(formats::read_matrix(p)?),
                (None, None, true) => CertifySource::Overlaps(formats::table1()),
                _ => return Err(CliError::Usage("give one of INPUT, --overlaps or --table1".into())),
            };
            cmd_certify(source, out)
        }
        Command::Report { dir } => cmd_report(dir),
        Command::Run { config } => {
            let cfg = load_config(config.as_deref())?;
            check_config(&cfg)?;
            cmd_run(&cfg, &out_dir(&cfg, out))
        }
    }
}

fn load_config(path: Option<&Path>) -> CliResult<PipelineConfig> {
    match path {
        Some(p) => Ok(formats::read_json(p, "config")?),
        None => Ok(PipelineConfig::default()),
    }
}

fn check_config(cfg: &PipelineConfig) -> CliResult<()> {
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))
}

fn out_dir(cfg: &PipelineConfig, cli_out: &Path) -> PathBuf {
    cfg.out_dir.clone().unwrap_or_else(|| cli_out.to_path_buf())
}

fn apply_noise_args(cfg: &mut PipelineConfig, a: &NoiseArgs) {
    if let Some(e) = a.epsilon {
        cfg.noise.epsilon = e;
    }
    if let Some(e) = a.edge {
        cfg.noise.edge = match e {
            EdgeArg::Reflect => EdgeMode::Reflect,
            EdgeArg::Leak => EdgeMode::Leak,
        };
    }
    if let Some(s) = a.shots {
        cfg.noise.shots = s;
    }
    if let Some(s) = a.seed {
        cfg.noise.seed = s;
    }
    cfg.noise.noiseless |= a.noiseless;
}

fn apply_solver_args(cfg: &mut PipelineConfig, a: &SolverArgs) -> CliResult<()> {
    if let Some(v) = a.max_iters {
        cfg.solver.max_iters = v;
    }
    if let Some(v) = a.tol {
        cfg.solver.tol = v;
    }
    if let Some(v) = a.floor {
        if v.is_nan() || v <= 0.0 {
            return Err(CliError::Usage(format!("--floor must be positive, got {v}")));
        }
        cfg.solver.floor = Some(v);
    }
    if let Some(v) = a.inner_steps {
        if v == 0 {
            return Err(CliError::Usage("--inner-steps must be ≥ 1".into()));
        }
        cfg.solver.inner_steps = v;
    }
    Ok(())
}

fn label(idx: BellIndex) -> String {
    format!("{}_{}", idx.m, idx.n)
}

/// `(0,0), (1,0), …, (d−1,0), (0,1), …`: the column order of the overlap table.
pub fn table_order(d: usize) -> Result<Vec<BellIndex>> {
    (0..d)
        .flat_map(|n| (0..d).map(move |m| (m, n)))
        .map(|(m, n)| BellIndex::new(d, m, n))
        .collect()
}

/// Parses the trailing `m_n` of names like `psi_1_2` or `rho_1_2.json`.
pub fn parse_index(name: &str, d: usize) -> Option<BellIndex> {
    let stem = name
        .strip_suffix(".json")
        .or_else(|| name.strip_suffix(".csv"))
        .unwrap_or(name);
    let mut parts = stem.rsplitn(3, '_');
    let n = parts.next()?.parse().ok()?;
    let m = parts.next()?.parse().ok()?;
    BellIndex::new(d, m, n).ok()
}

fn list_files(dir: &Path, prefix: &str, ext: &str) -> Result<Vec<PathBuf>> {
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in rd {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = p.file_name().and_then(|s| s.to_str()).unwrap_or("");
        if p.is_file() && name.starts_with(prefix) && name.ends_with(ext) && !name.ends_with(".diagnostics.json") {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn stem(p: &Path) -> String {
    p.file_stem().and_then(|s| s.to_str()).unwrap_or("state").to_string()
}

pub fn cmd_basis(d: usize, convention: Convention, out: &Path) -> CliResult<Vec<String>> {
    if d < 2 {
        return Err(CliError::Usage(format!("--d must be ≥ 2, got {d}")));
    }
    let window = ModeWindow::centered(d)?;
    let dir = out.join("basis");
    let indices = BellIndex::all(d)?;
    let states: Vec<PureState> = indices.iter().map(|&i| bell_state_with(i, convention)).collect();
    for (idx, s) in indices.iter().zip(&states) {
        formats::write_state(dir.join(format!("psi_{}.json", label(*idx))), s, &window)?;
    }
    let n = states.len();
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            gram[(i, j)] = states[i].inner(&states[j])?.norm_sqr();
        }
    }
    let labels: Vec<String> = indices.iter().map(|i| i.to_string()).collect();
    formats::write_matrix(dir.join("gram.csv"), &LabeledMatrix::new(labels.clone(), labels, gram)?)?;
    Ok(vec![format!(
        "wrote {n} basis states and gram.csv to {}",
        dir.display()
    )])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedEntry {
    pub state: String,
    pub m: usize,
    pub n: usize,
    pub pump: Vec<PumpTerm>,
    pub discarded: f64,
    pub filter_efficiency: f64,
    pub party: Party,
    pub dove_angle: f64,
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: PipelineConfig,
    pub states: Vec<GeneratedEntry>,
}

/// Prepares one state: recipe pump (with configured phases), SPDC, window,
/// filter, then the Dove prism.
pub fn generate_state(cfg: &PipelineConfig, idx: BellIndex) -> Result<(PureState, GeneratedEntry)> {
    let model = cfg.model()?;
    let pump = pump_recipe(idx.m, &model)?.with_phases(&cfg.pump_phases);
    let group = group_state_with_pump(idx.m, pump, &model)?;
    let alpha = cfg
        .gate
        .alpha
        .unwrap_or_else(|| dove_angle(idx.n, cfg.d, cfg.gate.party));
    let state = apply_local(&dove_prism(alpha, model.window()), cfg.gate.party, &group.state)?;
    let f = state.inner(&bell_state_minus(idx))?.norm_sqr();
    let entry = GeneratedEntry {
        state: format!("psi_{}", label(idx)),
        m: idx.m,
        n: idx.n,
        pump: group.pump.terms().to_vec(),
        discarded: group.discarded,
        filter_efficiency: group.filter_efficiency,
        party: cfg.gate.party,
        dove_angle: alpha,
        fidelity: f,
    };
    Ok((state, entry))
}

pub fn cmd_generate(cfg: &PipelineConfig, out: &Path) -> CliResult<Vec<String>> {
    let window = cfg.window()?;
    let dir = out.join("states");
    let results: Vec<Result<(PureState, GeneratedEntry)>> =
        cfg.indices()?.par_iter().map(|&idx| generate_state(cfg, idx)).collect();
    let mut entries = Vec::new();
    let mut lines = Vec::new();
    for r in results {
        let (state, entry) = r?;
        formats::write_state(dir.join(format!("{}.json", entry.state)), &state, &window)?;
        lines.push(format!(
            "{}  F = {:.12}  filter efficiency = {:.6}",
            entry.state, entry.fidelity, entry.filter_efficiency
        ));
        entries.push(entry);
    }
    formats::write_json(
        dir.join("manifest.json"),
        &Manifest {
            config: cfg.clone(),
            states: entries,
        },
    )?;
    Ok(lines)
}

/// Reads a state JSON as a projector, or a density JSON as is.
fn read_any_state(path: &Path, cfg: &PipelineConfig) -> Result<(DensityMatrix, ModeWindow)> {
    let text = formats::read_text(path)?;
    if let Ok(rec) = formats::from_json::<StateRecord>(&text, "state") {
        let (s, w) = rec.into_parts()?;
        return Ok((DensityMatrix::from_pure(&s), w));
    }
    let rho = formats::from_json::<DensityRecord>(&text, "state or density matrix")?.into_density()?;
    Ok((rho, cfg.window()?))
}

pub fn cmd_simulate(cfg: &PipelineConfig, input: &Path, out: &Path) -> CliResult<Vec<String>> {
    let inputs = if input.is_dir() {
        list_files(input, "psi_", ".json")?
    } else {
        vec![input.to_path_buf()]
    };
    if inputs.is_empty() {
        return Err(Error::InvalidArgument(format!("no psi_*.json in {}", input.display())).into());
    }
    let dir = out.join("counts");
    let mut lines = Vec::new();
    for path in inputs {
        let (rho, window) = read_any_state(&path, cfg)?;
        let d = window.d();
        if rho.dim() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: rho.dim(),
            }
            .into());
        }
        let noisy = crosstalk_channel(&rho, cfg.noise.epsilon, &window, cfg.noise.edge)?;
        let settings = joint_settings(d)?;
        let records = if cfg.noise.noiseless {
            expected_counts(&noisy, &settings, d, cfg.noise.shots)?
        } else {
            simulate_counts(&noisy, &settings, d, cfg.noise.shots, cfg.noise.seed)?
        };
        let target = dir.join(format!("{}.csv", stem(&path)));
        formats::write_counts(&target, &records)?;
        lines.push(format!(
            "{}: {} settings -> {}",
            path.display(),
            records.len(),
            target.display()
        ));
    }
    Ok(lines)
}

fn rho_name(counts_stem: &str) -> String {
    match counts_stem.strip_prefix("psi_") {
        Some(rest) => format!("rho_{rest}"),
        None => format!("rho_{counts_stem}"),
    }
}

pub fn cmd_tomo(cfg: &PipelineConfig, input: &Path, out: &Path) -> CliResult<Vec<String>> {
    let inputs = if input.is_dir() {
        list_files(input, "", ".csv")?
    } else {
        vec![input.to_path_buf()]
    };
    if inputs.is_empty() {
        return Err(Error::InvalidArgument(format!("no counts CSV in {}", input.display())).into());
    }
    let mut problems = Vec::new();
    let mut map: Option<MeasurementMap> = None;
    for path in &inputs {
        let records = formats::read_counts(path)?;
        let dim = records
            .iter()
            .map(|r| r.setting.a.max_mode().max(r.setting.b.max_mode()))
            .max()
            .unwrap_or(0)
            + 1;
        let d = dim.max(cfg.d);
        let settings: Vec<_> = records.iter().map(|r| r.setting).collect();
        let reuse = map
            .as_ref()
            .is_some_and(|m| m.d() == d && m.settings() == settings.as_slice());
        if !reuse {
            map = Some(MeasurementMap::new(d, settings)?);
        }
        let p = records.iter().map(|r| r.frequency().min(1.0)).collect();
        let mut problem = TomographyProblem::with_map(map.clone().expect("map set above"), p)?;
        let shots = records[0].shots;
        if records.iter().all(|r| r.shots == shots) {
            problem = problem.with_shots(shots);
        }
        problems.push((rho_name(&stem(path)), problem));
    }
    let opts = cfg.solver;
    let results: Vec<Result<_>> = problems.par_iter().map(|(_, p)| reconstruct(p, &opts)).collect();
    let dir = out.join("tomo");
    let mut lines = Vec::new();
    let mut stalled = Vec::new();
    for ((name, _), r) in problems.iter().zip(results) {
        let r = r?;
        formats::write_density(dir.join(format!("{name}.json")), &r.rho)?;
        formats::write_diagnostics(dir.join(format!("{name}.diagnostics.json")), &r.diagnostics)?;
        lines.push(format!(
            "{name}: chi2 = {:.6e}  iterations = {}  converged = {}",
            r.diagnostics.chi_square, r.diagnostics.iterations, r.diagnostics.converged
        ));
        if !r.diagnostics.converged {
            stalled.push(name.clone());
        }
    }
    if !stalled.is_empty() {
        for l in &lines {
            println!("{l}");
        }
        return Err(CliError::NotConverged(stalled));
    }
    Ok(lines)
}

pub enum CertifySource {
    Density(PathBuf, Option<(usize, usize)>),
    Overlaps(LabeledMatrix),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifySummary {
    pub d: usize,
    pub witness_bound: f64,
    pub states: Vec<CertificationReport>,
    pub mean_fidelity: f64,
    pub std_fidelity: f64,
    pub all_pass: bool,
    pub mutual_information_bits: f64,
}

/// Certification of an overlap table whose row and column labels are `psi_m_n`.
pub fn certify_overlaps(table: &LabeledMatrix) -> Result<CertifySummary> {
    let n = table.values.nrows();
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n || table.values.ncols() != n {
        return Err(Error::InvalidArgument(format!(
            "overlap table must be d²×d², got {:?}",
            table.values.shape()
        )));
    }
    let overlap =
        crate::certify::OverlapMatrix::new(table.values.clone(), table.row_labels.clone(), table.col_labels.clone())?;
    let diag = overlap.diagonal();
    let mut states = Vec::new();
    for (label, f) in table.row_labels.iter().zip(&diag) {
        let idx =
            parse_index(label, d).ok_or_else(|| Error::format("overlap table", format!("bad row label '{label}'")))?;
        states.push(certify_fidelity(*f, idx));
    }
    Ok(CertifySummary {
        d,
        witness_bound: (d - 1) as f64 / d as f64,
        all_pass: states.iter().all(|s| s.passes_witness),
        states,
        mean_fidelity: overlap.mean_diagonal(),
        std_fidelity: overlap.std_diagonal(),
        mutual_information_bits: mutual_information(&table.values)?,
    })
}

fn density_inputs(path: &Path, target: Option<(usize, usize)>) -> Result<Vec<(BellIndex, DensityMatrix)>> {
    if path.is_dir() {
        let files = list_files(path, "rho_", ".json")?;
        if files.is_empty() {
            return Err(Error::InvalidArgument(format!("no rho_m_n.json in {}", path.display())));
        }
        let mut out = Vec::new();
        for f in files {
            let rho = formats::read_density(&f)?;
            let d = (rho.dim() as f64).sqrt().round() as usize;
            let name = f.file_name().and_then(|s| s.to_str()).unwrap_or("");
            let idx = parse_index(name, d)
                .ok_or_else(|| Error::InvalidArgument(format!("cannot read index from '{name}'")))?;
            out.push((idx, rho));
        }
        return Ok(out);
    }
    let rho = formats::read_density(path)?;
    let d = (rho.dim() as f64).sqrt().round() as usize;
    if d * d != rho.dim() {
        return Err(Error::InvalidArgument(format!(
            "dimension {} is not a square",
            rho.dim()
        )));
    }
    let idx = match target {
        Some((m, n)) => BellIndex::new(d, m, n)?,
        None => {
            let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("");
            parse_index(name, d)
                .ok_or_else(|| Error::InvalidArgument(format!("no index in '{name}'; pass --target m,n")))?
        }
    };
    Ok(vec![(idx, rho)])
}

pub fn cmd_certify(source: CertifySource, out: &Path) -> CliResult<Vec<String>> {
    let table = match source {
        CertifySource::Overlaps(t) => t,
        CertifySource::Density(path, target) => {
            let mut inputs = density_inputs(&path, target)?;
            let d = inputs[0].0.d;
            if inputs.iter().any(|(i, _)| i.d != d) {
                return Err(Error::InvalidArgument("density matrices of mixed dimension".into()).into());
            }
            let order = table_order(d)?;
            inputs.sort_by_key(|(i, _)| order.iter().position(|o| o == i));
            let basis: Vec<PureState> = order.iter().map(|&i| bell_state_minus(i)).collect();
            let mut values = DMatrix::zeros(inputs.len(), basis.len());
            for (r, (_, rho)) in inputs.iter().enumerate() {
                for (c, b) in basis.iter().enumerate() {
                    // round-off can leave orthogonal overlaps a hair below zero
                    values[(r, c)] = fidelity(rho, b)?.max(0.0);
                }
            }
            let rows = inputs.iter().map(|(i, _)| i.to_string()).collect();
            let cols = order.iter().map(|i| i.to_string()).collect();
            LabeledMatrix::new(rows, cols, values)?
        }
    };
    let summary = if table.values.nrows() == table.values.ncols() {
        certify_overlaps(&table)?
    } else {
        partial_summary(&table)?
    };
    let dir = out.join("certify");
    formats::write_json(dir.join("report.json"), &summary)?;
    formats::write_matrix(dir.join("overlaps.csv"), &table)?;
    formats::write_text(
        dir.join("overlaps.svg"),
        &svg::heatmap(&table, "Overlap with ideal Bell basis"),
    )?;
    let mut lines: Vec<String> = summary
        .states
        .iter()
        .map(|s| {
            format!(
                "{}  F = {:.4}  pass = {}  d_ent = {}",
                s.target, s.fidelity, s.passes_witness, s.d_ent
            )
        })
        .collect();
    lines.push(format!(
        "mean F = {:.5} ± {:.5}  all pass = {}  MI = {:.4} bits",
        summary.mean_fidelity, summary.std_fidelity, summary.all_pass, summary.mutual_information_bits
    ));
    Ok(lines)
}

/// Fewer rows than basis states: no confusion matrix, so MI covers the rows given.
fn partial_summary(table: &LabeledMatrix) -> Result<CertifySummary> {
    let n = table.values.ncols();
    let d = (n as f64).sqrt().round() as usize;
    let mut states = Vec::new();
    for (r, label) in table.row_labels.iter().enumerate() {
        let c = table
            .col_labels
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| Error::format("overlaps", label.clone()))?;
        let idx = parse_index(label, d).ok_or_else(|| Error::format("overlaps", label.clone()))?;
        states.push(certify_fidelity(table.values[(r, c)], idx));
    }
    let f: Vec<f64> = states.iter().map(|s| s.fidelity).collect();
    let mean = f.iter().sum::<f64>() / f.len() as f64;
    let var = f.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (f.len() as f64 - 1.0).max(1.0);
    Ok(CertifySummary {
        d,
        witness_bound: (d - 1) as f64 / d as f64,
        all_pass: states.iter().all(|s| s.passes_witness),
        states,
        mean_fidelity: mean,
        std_fidelity: var.sqrt(),
        mutual_information_bits: mutual_information(&table.values)?,
    })
}

pub fn cmd_report(dir: &Path) -> CliResult<Vec<String>> {
    let report_path = dir.join("certify").join("report.json");
    if !report_path.is_file() {
        return Err(Error::InvalidArgument(format!("{} not found; run certify first", report_path.display())).into());
    }
    let summary: CertifySummary = formats::read_json(&report_path, "certification report")?;
    let manifest: Option<Manifest> = {
        let p = dir.join("states").join("manifest.json");
        if p.is_file() {
            Some(formats::read_json(&p, "manifest")?)
        } else {
            None
        }
    };
    let mut text = String::new();
    let _ = writeln!(text, "hdbell summary");
    let _ = writeln!(text, "dimension d = {}", summary.d);
    let _ = writeln!(text, "witness bound (d-1)/d = {:.4}", summary.witness_bound);
    let _ = writeln!(text);
    let _ = writeln!(text, "{:<10} {:>10} {:>6} {:>6}", "state", "fidelity", "pass", "d_ent");
    for s in &summary.states {
        let _ = writeln!(
            text,
            "{:<10} {:>10.5} {:>6} {:>6}",
            s.target.to_string(),
            s.fidelity,
            s.passes_witness,
            s.d_ent
        );
    }
    let _ = writeln!(text);
    let _ = writeln!(
        text,
        "mean fidelity = {:.5} +/- {:.5}",
        summary.mean_fidelity, summary.std_fidelity
    );
    let _ = writeln!(text, "all pass = {}", summary.all_pass);
    let _ = writeln!(text, "mutual information = {:.4} bits", summary.mutual_information_bits);
    if let Some(m) = manifest {
        let eff = m
            .states
            .iter()
            .map(|s| s.filter_efficiency)
            .fold(f64::INFINITY, f64::min);
        let _ = writeln!(
            text,
            "generated states = {}  lowest filter efficiency = {:.6}",
            m.states.len(),
            eff
        );
    }
    let out = dir.join("report");
    formats::write_text(out.join("summary.txt"), &text)?;
    let labels: Vec<String> = summary.states.iter().map(|s| s.target.to_string()).collect();
    let values: Vec<f64> = summary.states.iter().map(|s| s.fidelity).collect();
    formats::write_text(
        out.join("fidelity.svg"),
        &svg::bar_chart(&labels, &values, summary.witness_bound, "Fidelity per state"),
    )?;
    Ok(text.lines().map(str::to_string).collect())
}

pub fn cmd_run(cfg: &PipelineConfig, out: &Path) -> CliResult<Vec<String>> {
    let mut lines = cmd_generate(cfg, out)?;
    lines.extend(cmd_simulate(cfg, &out.join("states"), out)?);
    lines.extend(cmd_tomo(cfg, &out.join("counts"), out)?);
    lines.extend(cmd_certify(CertifySource::Density(out.join("tomo"), None), out)?);
    lines.extend(cmd_report(out)?);
    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_parsing() {
        assert_eq!(parse_index("rho_1_2.json", 4), Some(BellIndex::new(4, 1, 2).unwrap()));
        assert_eq!(parse_index("psi_3_0", 4), Some(BellIndex::new(4, 3, 0).unwrap()));
        assert_eq!(parse_index("psi_3_4", 4), None);
        assert_eq!(parse_index("rho.json", 4), None);
    }

    #[test]
    fn table_order_runs_m_fastest() {
        let o = table_order(4).unwrap();
        assert_eq!((o[1].m, o[1].n), (1, 0));
        assert_eq!((o[4].m, o[4].n), (0, 1));
    }

    #[test]
    fn config_round_trip_and_defaults() {
        let cfg: PipelineConfig = formats::from_json("{}", "config").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!(cfg.window().unwrap(), ModeWindow::default_d4());
        assert_eq!(cfg.indices().unwrap().len(), 16);
        let text = formats::to_json(&cfg).unwrap();
        let back: PipelineConfig = formats::from_json(&text, "config").unwrap();
        assert_eq!(formats::to_json(&back).unwrap(), text);
        assert!(formats::from_json::<PipelineConfig>(r#"{"bogus": 1}"#, "config").is_err());
    }

    #[test]
    fn config_validation() {
        let cfg = PipelineConfig {
            n: vec![4],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let mut cfg = PipelineConfig::default();
        cfg.noise.epsilon = 1.0;
        assert!(cfg.validate().is_err());
        let cfg = PipelineConfig {
            window: Some(ModeWindow::new(vec![0, 1, 2]).unwrap()),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn generated_states_match_ideal() {
        let cfg = PipelineConfig::default();
        for idx in cfg.indices().unwrap() {
            let (_, e) = generate_state(&cfg, idx).unwrap();
            assert!(e.fidelity > 1.0 - 1e-10, "{idx}: {}", e.fidelity);
        }
    }

    #[test]
    fn table1_certifies() {
        let s = certify_overlaps(&formats::table1()).unwrap();
        assert!((s.mean_fidelity - 0.821).abs() < 1e-3);
        assert!(s.all_pass);
        assert!(s.states.iter().all(|r| r.d_ent == 4));
    }
}
