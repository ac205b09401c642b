//! Batch runner behind the `envsteer` binary: config parsing, the
//! `spectrum`, `simulate`, `stats` and `sweep` commands, and output files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::channel::{cptp_report, ChannelAnalysis, CptpReport, MetastableWindow, SteeringClass};
use crate::error::{Error, Result};
use crate::linalg::{eig_general, eigh, Operator};
use crate::model::{FrequencyConvention, MatrixSpec, ModelSpec, RimModel};
use crate::noise::{noisy_rim_instrument, NoiseSpec, NoisyInstrument, SpinRates};
use crate::stats::{analytic_expectation_f1, coherence, commuting_peak_distribution, peak_report, ExpectationF1, PeakReport};
use crate::trajectory::{run_ensemble, BinEdges, EnsembleConfig, HistogramSpec, MeasurementInstrument, TrajectoryEnsemble};

#[derive(Debug, Parser)]
#[command(name = "envsteer", version, about = "Sequential-measurement steering of a spin bath")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Channel spectrum, fixed points and steering class.
    Spectrum(CommonArgs),
    /// Monte Carlo trajectories: histograms and conditional fidelities.
    Simulate(CommonArgs),
    /// Analytic peak report.
    Stats(CommonArgs),
    /// Repeat the configured commands over one config key.
    Sweep(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; falls back to `outputs.directory` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, env = "ENVSTEER_THREADS")]
    pub threads: Option<usize>,
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub units: Units,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseConfig {
    Uniform(SpinRates),
    PerSpin(Vec<SpinRates>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Single trajectory length; exclusive with `m_list`.
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub m_list: Option<Vec<usize>>,
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    /// Interior `X` edges of the fidelity bins.
    #[serde(default)]
    pub fidelity_edges: Option<Vec<f64>>,
    #[serde(default)]
    pub initial_state: InitialState,
    #[serde(default)]
    pub targets: TargetChoice,
    /// Cycle count of the analytic report; defaults to the largest `m`.
    #[serde(default)]
    pub stats_m: Option<u64>,
    #[serde(default)]
    pub validate_every_step: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            m: None,
            m_list: None,
            samples: default_samples(),
            seed: 0,
            histogram_bins: default_bins(),
            fidelity_edges: None,
            initial_state: InitialState::default(),
            targets: TargetChoice::default(),
            stats_m: None,
            validate_every_step: false,
        }
    }
}

fn default_samples() -> u64 {
    20_000
}

fn default_bins() -> usize {
    101
}

/// Snapshot lengths used when neither `m` nor `m_list` is given.
pub const DEFAULT_M_LIST: [usize; 4] = [1, 10, 100, 1000];

impl RunConfig {
    pub fn snapshots(&self) -> Result<Vec<usize>> {
        let list = match (&self.m, &self.m_list) {
            (Some(_), Some(_)) => return Err(Error::Config("run: give either m or m_list, not both".into())),
            (Some(m), None) => vec![*m],
            (None, Some(l)) => l.clone(),
            (None, None) => DEFAULT_M_LIST.to_vec(),
        };
        if list.is_empty() || list.contains(&0) {
            return Err(Error::Config("run: snapshot lengths must be at least 1".into()));
        }
        let mut list = list;
        list.sort_unstable();
        list.dedup();
        Ok(list)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    #[default]
    MaximallyMixed,
    /// Computational basis state `|k⟩⟨k|`.
    Basis(usize),
    /// `ρ_fix^j` of the ideal channel.
    FixedPoint(usize),
    Matrix(MatrixSpec),
    /// JSON matrix file, relative to the config file.
    MatrixFile(PathBuf),
}

/// States the conditional states are compared against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetChoice {
    /// Normalized eigenprojectors of `B`.
    #[default]
    BEigenstates,
    FixedPoints,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    #[serde(default)]
    pub frequency_convention: FrequencyConvention,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub directory: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepCommand {
    Spectrum,
    Simulate,
    Stats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// JSON pointer to a scalar config key, e.g. `/model/larmor_ratio`.
    pub key: String,
    pub values: Vec<Value>,
    #[serde(default = "default_sweep_commands")]
    pub commands: Vec<SweepCommand>,
}

fn default_sweep_commands() -> Vec<SweepCommand> {
    vec![SweepCommand::Spectrum, SweepCommand::Simulate, SweepCommand::Stats]
}

/// Parses a config document, reporting the offending key path.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig =
        serde_path_to_error::deserialize(de).map_err(|e| Error::Config(format!("{}: {}", e.path(), e.inner())))?;
    cfg.run.snapshots()?;
    if cfg.run.samples == 0 {
        return Err(Error::Config("run.samples must be at least 1".into()));
    }
    if cfg.run.histogram_bins == 0 {
        return Err(Error::Config("run.histogram_bins must be at least 1".into()));
    }
    if let Some(edges) = &cfg.run.fidelity_edges {
        if edges.windows(2).any(|w| !(w[0] < w[1])) || edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::Config("run.fidelity_edges must be finite and increasing".into()));
        }
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Config copies with the sweep key set to each value.
pub fn expand_sweep(text: &str) -> Result<Vec<(Value, ExperimentConfig)>> {
    let cfg = parse_config(text)?;
    let sweep = cfg
        .sweep
        .clone()
        .ok_or_else(|| Error::Config("sweep: missing `sweep` section".into()))?;
    if sweep.values.is_empty() {
        return Err(Error::Config("sweep.values must not be empty".into()));
    }
    let base: Value =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config is not valid JSON: {e}")))?;
    let mut out = Vec::with_capacity(sweep.values.len());
    for value in &sweep.values {
        let mut doc = base.clone();
        if let Value::Object(map) = &mut doc {
            map.remove("sweep");
        }
        set_pointer(&mut doc, &sweep.key, value.clone())?;
        let text = serde_json::to_string(&doc).map_err(|e| Error::Config(e.to_string()))?;
        let point = parse_config(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("sweep value {value}: {msg}")),
            other => other,
        })?;
        out.push((value.clone(), point));
    }
    Ok(out)
}

fn set_pointer(doc: &mut Value, pointer: &str, value: Value) -> Result<()> {
    if !pointer.starts_with('/') {
        return Err(Error::Config(format!("sweep.key `{pointer}` must be a JSON pointer")));
    }
    if let Some(slot) = doc.pointer_mut(pointer) {
        if slot.is_object() || slot.is_array() {
            return Err(Error::Config(format!("sweep.key `{pointer}` is not a scalar")));
        }
        *slot = value;
        return Ok(());
    }
    let (parent, last) = pointer.rsplit_once('/').expect("starts with '/'");
    match doc.pointer_mut(parent) {
        Some(Value::Object(map)) => {
            map.insert(last.replace("~1", "/").replace("~0", "~"), value);
            Ok(())
        }
        _ => Err(Error::Config(format!("sweep.key `{pointer}` has no parent object"))),
    }
}

// ---------------------------------------------------------------------------
// Prepared experiment
// ---------------------------------------------------------------------------

/// A config resolved into operators.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub model: RimModel,
    pub analysis: ChannelAnalysis,
    pub noisy: Option<NoisyInstrument>,
    pub instrument: MeasurementInstrument,
    pub rho0: Operator,
    pub targets: Vec<Operator>,
    pub edges: BinEdges,
}

impl Experiment {
    pub fn new(config: ExperimentConfig, base_dir: &Path) -> Result<Self> {
        let model = config.model.build(config.units.frequency_convention)?;
        let analysis = ChannelAnalysis::new(&model)?;
        let noisy = match &config.noise {
            None => None,
            Some(n) => {
                let spec = match n {
                    NoiseConfig::Uniform(r) => {
                        let spins = model.ops.num_spins().unwrap_or(model.ops.dim().trailing_zeros() as usize);
                        NoiseSpec::uniform(*r, spins)
                    }
                    NoiseConfig::PerSpin(v) => NoiseSpec { per_spin: v.clone() },
                };
                Some(noisy_rim_instrument(&model.ops, &spec, model.t, model.delta_phi)?)
            }
        };
        let instrument = match &noisy {
            Some(n) => n.measurement()?,
            None => MeasurementInstrument::from_kraus(&analysis.kraus),
        };
        let d = model.ops.dim();
        let rho0 = match &config.run.initial_state {
            InitialState::MaximallyMixed => Operator::maximally_mixed(d),
            InitialState::Basis(k) => {
                if *k >= d {
                    return Err(Error::Config(format!("run.initial_state.basis: {k} is outside dimension {d}")));
                }
                Operator::basis_projector(d, *k)
            }
            InitialState::FixedPoint(j) => {
                let states = analysis.fixed_states();
                states.get(*j).cloned().ok_or_else(|| {
                    Error::Config(format!("run.initial_state.fixed_point: {j} of {} fixed points", states.len()))
                })?
            }
            InitialState::Matrix(m) => m.to_operator()?,
            InitialState::MatrixFile(p) => {
                let path = base_dir.join(p);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                let m: MatrixSpec = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                m.to_operator()?
            }
        };
        if rho0.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: rho0.dim(),
            });
        }
        crate::linalg::validate_density(&rho0, 1e-10)?;
        let targets = match config.run.targets {
            TargetChoice::FixedPoints => analysis.fixed_states(),
            TargetChoice::BEigenstates => b_eigenstates(&model, &analysis)?,
        };
        let edges = match &config.run.fidelity_edges {
            Some(e) => BinEdges(e.clone()),
            None => default_edges(&model, &analysis, &targets),
        };
        Ok(Self {
            config,
            model,
            analysis,
            noisy,
            instrument,
            rho0,
            targets,
            edges,
        })
    }

    pub fn ensemble_config(&self, threads: Option<usize>) -> Result<EnsembleConfig> {
        let mut cfg = EnsembleConfig::new(self.config.run.snapshots()?, self.config.run.samples, self.config.run.seed);
        cfg.histogram = HistogramSpec {
            bins: self.config.run.histogram_bins,
            ..HistogramSpec::default()
        };
        cfg.fidelity_bins = self.edges.clone();
        cfg.targets = self.targets.clone();
        cfg.threads = threads;
        cfg.validate_every_step = self.config.run.validate_every_step;
        Ok(cfg)
    }
}

/// Eigenprojectors of `B` (degenerate eigenvalues grouped), normalized and
/// ordered by the outcome-1 probability of the ideal instrument.
pub fn b_eigenstates(model: &RimModel, analysis: &ChannelAnalysis) -> Result<Vec<Operator>> {
    let e = eigh(&model.ops.b)?;
    let d = model.ops.dim();
    let scale = e.values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for k in 0..d {
        match groups.last_mut() {
            Some(g) if (e.values[k] - e.values[g[0]]).abs() < 1e-9 * scale => g.push(k),
            _ => groups.push(vec![k]),
        }
    }
    let mut states: Vec<(f64, Operator)> = groups
        .iter()
        .map(|g| {
            let mut p = Operator::zeros(d);
            for &k in g {
                let v = e.vector(k);
                p += &Operator::outer(&v, &v);
            }
            let s = p.scale_real(1.0 / g.len() as f64);
            (analysis.kraus.m1.sandwich(&s).trace().re, s)
        })
        .collect();
    states.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(states.into_iter().map(|(_, s)| s).collect())
}

fn default_edges(model: &RimModel, analysis: &ChannelAnalysis, targets: &[Operator]) -> BinEdges {
    match model.ops.num_spins() {
        Some(1) => BinEdges::two_branch(),
        Some(2) => BinEdges::four_branch(),
        _ if model.ops.dim() == 2 => BinEdges::two_branch(),
        _ => {
            let centers: Vec<f64> = targets
                .iter()
                .map(|s| analysis.kraus.m1.sandwich(s).trace().re - 0.5)
                .collect();
            BinEdges::between(&centers)
        }
    }
}

// ---------------------------------------------------------------------------
// Outputs
// ---------------------------------------------------------------------------

/// Named output files held in memory until the command succeeds.
#[derive(Clone, Debug, Default)]
pub struct Bundle {
    pub files: BTreeMap<String, Vec<u8>>,
}

impl Bundle {
    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.insert(name.to_string(), bytes);
    }

    fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        s.push('\n');
        self.add(name, s.into_bytes());
        Ok(())
    }

    fn extend_prefixed(&mut self, prefix: &str, other: Bundle) {
        for (k, v) in other.files {
            self.files.insert(format!("{prefix}/{k}"), v);
        }
    }
}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Serialize)]
struct EigenRecord {
    re: f64,
    im: f64,
    modulus: f64,
    argument: f64,
}

#[derive(Serialize)]
struct FixedPointRecord {
    rank: usize,
    outcome_one_probability: f64,
    projector: MatrixSpec,
}

#[derive(Serialize)]
struct SpectrumReport {
    dimension: usize,
    eta: f64,
    classification: SteeringClass,
    window: Option<MetastableWindow>,
    rotating_points: bool,
    eigenvalues: Vec<EigenRecord>,
    fixed_points: Vec<FixedPointRecord>,
    fixed_points_abelian: bool,
    cptp: CptpReport,
    eigen_min_gap: f64,
    eigen_condition_number: f64,
    eigen_defective: bool,
    noisy_eigenvalues: Option<Vec<EigenRecord>>,
    noisy_cptp: Option<CptpReport>,
}

fn eigen_records(values: &[num_complex::Complex64]) -> Vec<EigenRecord> {
    values
        .iter()
        .map(|l| EigenRecord {
            re: l.re,
            im: l.im,
            modulus: l.norm(),
            argument: l.arg(),
        })
        .collect()
}

pub fn cmd_spectrum(exp: &Experiment) -> Result<Bundle> {
    let a = &exp.analysis;
    let kraus = &a.kraus;
    let fixed_points = a
        .fixed
        .projectors
        .iter()
        .zip(&a.fixed.ranks)
        .map(|(p, &r)| FixedPointRecord {
            rank: r,
            outcome_one_probability: kraus.m1.sandwich(&p.scale_real(1.0 / r as f64)).trace().re,
            projector: MatrixSpec::from_operator(p),
        })
        .collect();
    let (noisy_eigenvalues, noisy_cptp) = match &exp.noisy {
        Some(n) => {
            let ch = n.channel();
            (Some(eigen_records(&eig_general(ch.matrix())?.values)), Some(cptp_report(&ch)?))
        }
        None => (None, None),
    };
    let report = SpectrumReport {
        dimension: exp.model.ops.dim(),
        eta: a.eta,
        classification: a.classification,
        window: a.window,
        rotating_points: a.asymptotic.rotating_points,
        eigenvalues: eigen_records(a.spectrum()),
        fixed_points,
        fixed_points_abelian: a.fixed.abelian,
        cptp: cptp_report(&a.phi_hat)?,
        eigen_min_gap: a.eigen.diagnostics.min_gap,
        eigen_condition_number: a.eigen.diagnostics.condition_number,
        eigen_defective: a.eigen.diagnostics.defective,
        noisy_eigenvalues,
        noisy_cptp,
    };
    let mut b = Bundle::default();
    b.add_json("spectrum.json", &report)?;
    Ok(b)
}

/// `histogram.csv`, `fidelity.csv` and `frequency.csv` of an ensemble.
pub fn ensemble_bundle(ens: &TrajectoryEnsemble) -> Bundle {
    let mut hist = String::from("m,bin_center,count,frequency,density\n");
    let n = ens.samples as f64;
    let width = ens.histogram.width();
    for s in &ens.snapshots {
        for (i, &c) in s.histogram.iter().enumerate() {
            let f = c as f64 / n;
            let _ = writeln!(
                hist,
                "{},{},{},{},{}",
                s.m,
                fmt_f64(ens.histogram.center(i)),
                c,
                fmt_f64(f),
                fmt_f64(f / width)
            );
        }
    }
    let mut fid = String::from("m,bin_label,target,count,sample_ratio,mean_fidelity,stderr\n");
    for s in &ens.snapshots {
        for b in &s.bins {
            for (t, w) in b.fidelity.iter().enumerate() {
                let _ = writeln!(
                    fid,
                    "{},\"{}\",{},{},{},{},{}",
                    s.m,
                    b.label,
                    t,
                    b.count,
                    fmt_f64(b.count as f64 / n),
                    fmt_f64(w.mean),
                    fmt_f64(w.stderr())
                );
            }
        }
    }
    let mut freq = String::from("m,ones,f1,x,count\n");
    for s in &ens.snapshots {
        for (k, &c) in s.ones_counts.iter().enumerate() {
            if c > 0 {
                let f1 = k as f64 / s.m as f64;
                let _ = writeln!(freq, "{},{},{},{},{}", s.m, k, fmt_f64(f1), fmt_f64(f1 - 0.5), c);
            }
        }
    }
    let mut b = Bundle::default();
    b.add("histogram.csv", hist.into_bytes());
    b.add("fidelity.csv", fid.into_bytes());
    b.add("frequency.csv", freq.into_bytes());
    b
}

pub fn cmd_simulate(exp: &Experiment, threads: Option<usize>) -> Result<Bundle> {
    let cfg = exp.ensemble_config(threads)?;
    let ens = run_ensemble(&exp.rho0, &exp.instrument, &cfg)?;
    Ok(ensemble_bundle(&ens))
}

#[derive(Serialize)]
struct StatsReport {
    #[serde(flatten)]
    peaks: PeakReport,
    expectation: ExpectationF1,
    initial_coherence: f64,
    peak_distribution: Option<Vec<f64>>,
    notes: Vec<String>,
}

pub fn cmd_stats(exp: &Experiment) -> Result<Bundle> {
    let snaps = exp.config.run.snapshots()?;
    let m = exp.config.run.stats_m.unwrap_or(*snaps.last().expect("non-empty") as u64);
    let peaks = peak_report(&exp.analysis, &exp.rho0, m)?;
    let [_, m1_hat] = exp.instrument.maps();
    let expectation = analytic_expectation_f1(&exp.rho0, &exp.instrument.channel(), &m1_hat, m)?;
    let initial_coherence = coherence(&exp.rho0, &exp.model.ops, exp.model.t, exp.model.delta_phi)?;
    let mut notes = Vec::new();
    if exp.noisy.is_some() {
        notes.push("peaks and variances describe the noiseless channel; the expectation uses the noisy instrument".into());
    }
    let peak_distribution = match commuting_peak_distribution(
        &exp.rho0,
        &exp.model.ops,
        exp.model.t,
        exp.model.delta_phi,
        m as usize,
    ) {
        Ok(p) => Some(p),
        Err(Error::NotCommuting { residual }) => {
            notes.push(format!("peak distribution skipped: B and H_e do not commute (residual {residual:.3e})"));
            None
        }
        Err(e) => return Err(e),
    };
    let mut b = Bundle::default();
    if let Some(p) = &peak_distribution {
        let mut csv = String::from("m,ones,f1,x,probability\n");
        for (k, v) in p.iter().enumerate() {
            let f1 = k as f64 / m as f64;
            let _ = writeln!(csv, "{},{},{},{},{}", m, k, fmt_f64(f1), fmt_f64(f1 - 0.5), fmt_f64(*v));
        }
        b.add("peak_distribution.csv", csv.into_bytes());
    }
    b.add_json(
        "peaks.json",
        &StatsReport {
            peaks,
            expectation,
            initial_coherence,
            peak_distribution,
            notes,
        },
    )?;
    Ok(b)
}

#[derive(Serialize)]
struct SweepPoint {
    index: usize,
    value: Value,
    directory: String,
    classification: SteeringClass,
    eta: f64,
    window: Option<MetastableWindow>,
}

/// Runs the sweep, keeping every bundle in memory so a failing point leaves
/// no partial output.
pub fn cmd_sweep(text: &str, base_dir: &Path, seed: Option<u64>, threads: Option<usize>) -> Result<Bundle> {
    let points = expand_sweep(text)?;
    let commands = parse_config(text)?.sweep.expect("checked by expand_sweep").commands;
    let mut experiments = Vec::with_capacity(points.len());
    for (value, mut cfg) in points {
        if let Some(s) = seed {
            cfg.run.seed = s;
        }
        experiments.push((value, Experiment::new(cfg, base_dir)?));
    }
    let mut bundle = Bundle::default();
    let mut index = Vec::new();
    let mut summary = String::from("index,value,classification,eta,window_lo,window_hi,window_ratio\n");
    for (i, (value, exp)) in experiments.iter().enumerate() {
        let dir = format!("point_{i:03}");
        let mut b = Bundle::default();
        for c in &commands {
            let part = match c {
                SweepCommand::Spectrum => cmd_spectrum(exp)?,
                SweepCommand::Simulate => cmd_simulate(exp, threads)?,
                SweepCommand::Stats => cmd_stats(exp)?,
            };
            b.files.extend(part.files);
        }
        let a = &exp.analysis;
        let (lo, hi, ratio) = match &a.window {
            Some(w) => (fmt_f64(w.m_lo), fmt_f64(w.m_hi), fmt_f64(w.ratio)),
            None => (String::new(), String::new(), String::new()),
        };
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},{}",
            i,
            value,
            serde_json::to_string(&a.classification).unwrap_or_default().trim_matches('"'),
            fmt_f64(a.eta),
            lo,
            hi,
            ratio
        );
        index.push(SweepPoint {
            index: i,
            value: value.clone(),
            directory: dir.clone(),
            classification: a.classification,
            eta: a.eta,
            window: a.window,
        });
        bundle.extend_prefixed(&dir, b);
    }
    bundle.add_json("index.json", &index)?;
    bundle.add("sweep.csv", summary.into_bytes());
    Ok(bundle)
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: String,
    seed: u64,
    samples: u64,
    config_sha256: String,
    files: BTreeMap<String, String>,
    /// Hash over command, config and output hashes; excludes `created_unix_s`.
    reproducibility_hash: String,
    created_unix_s: u64,
}

/// Writes the bundle plus `manifest.json` into `out`.
pub fn write_bundle(out: &Path, command: &str, config: &ExperimentConfig, bundle: &Bundle) -> Result<()> {
    let config_json = serde_json::to_string(config).map_err(|e| Error::Config(e.to_string()))?;
    let config_sha256 = sha256_hex(config_json.as_bytes());
    let files: BTreeMap<String, String> = bundle.files.iter().map(|(k, v)| (k.clone(), sha256_hex(v))).collect();
    let mut h = String::new();
    let _ = writeln!(h, "{command}\n{config_sha256}");
    for (k, v) in &files {
        let _ = writeln!(h, "{k} {v}");
    }
    let manifest = Manifest {
        tool: "envsteer",
        version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        seed: config.run.seed,
        samples: config.run.samples,
        config_sha256,
        reproducibility_hash: sha256_hex(h.as_bytes()),
        files,
        created_unix_s: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    for (name, bytes) in &bundle.files {
        let path = out.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, bytes)?;
    }
    std::fs::create_dir_all(out)?;
    let mut m = serde_json::to_string_pretty(&manifest).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    m.push('\n');
    std::fs::write(out.join("manifest.json"), m)?;
    Ok(())
}

/// Executes one CLI invocation.
pub fn run(cli: Cli) -> Result<()> {
    let (name, args) = match &cli.command {
        Command::Spectrum(a) => ("spectrum", a),
        Command::Simulate(a) => ("simulate", a),
        Command::Stats(a) => ("stats", a),
        Command::Sweep(a) => ("sweep", a),
    };
    if args.threads == Some(0) {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut config = parse_config(&text)?;
    if let Some(s) = args.seed {
        config.run.seed = s;
    }
    let out = args
        .out
        .clone()
        .or_else(|| config.outputs.directory.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --out or set outputs.directory".into()))?;
    let base_dir = args.config.parent().unwrap_or(Path::new(".")).to_path_buf();
    let bundle = match &cli.command {
        Command::Sweep(_) => cmd_sweep(&text, &base_dir, args.seed, args.threads)?,
        _ => {
            let exp = Experiment::new(config.clone(), &base_dir)?;
            match &cli.command {
                Command::Spectrum(_) => cmd_spectrum(&exp)?,
                Command::Simulate(_) => cmd_simulate(&exp, args.threads)?,
                Command::Stats(_) => cmd_stats(&exp)?,
                Command::Sweep(_) => unreachable!(),
            }
        }
    };
    write_bundle(&out, name, &config, &bundle)
}
