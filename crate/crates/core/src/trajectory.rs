//! Sequential measurement trajectories: conditional-state sampling, ensembles
//! with deterministic parallel reduction, and exact enumeration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::KrausPair;
use crate::error::{Error, Result};
use crate::linalg::{eigh, fidelity, Operator, SuperOperator, Tolerances, ZERO};

/// Largest `m` accepted by [`brute_force_distribution`].
pub const BRUTE_FORCE_CAP: usize = 16;

#[derive(Clone, Debug)]
enum Maps {
    Kraus([Operator; 2]),
    Super([SuperOperator; 2]),
}

/// A two-outcome instrument `{Ê_0, Ê_1}` on the bath.
#[derive(Clone, Debug)]
pub struct MeasurementInstrument {
    maps: Maps,
    /// Heisenberg-picture effect of outcome 1, `Ê_1†(I)`.
    effect1: Operator,
    d: usize,
}

impl MeasurementInstrument {
    pub fn from_kraus(k: &KrausPair) -> Self {
        let effect1 = k.m1.adjoint().matmul(&k.m1);
        Self {
            d: k.dim(),
            maps: Maps::Kraus([k.m0.clone(), k.m1.clone()]),
            effect1,
        }
    }

    /// General CP maps; their sum must preserve the trace to within `1e-8`.
    pub fn from_maps(maps: [SuperOperator; 2]) -> Result<Self> {
        let d = maps[0].d();
        if maps[1].d() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: maps[1].d(),
            });
        }
        let sum = maps[0].add(&maps[1]);
        let tp = sum.trace_preservation_residual();
        if tp > 1e-8 {
            return Err(Error::NotAChannel(format!(
                "instrument sum has trace-preservation residual {tp:.3e}"
            )));
        }
        let effect1 = maps[1].adjoint_apply(&Operator::identity(d)).hermitian_part();
        Ok(Self {
            d,
            maps: Maps::Super(maps),
            effect1,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn maps(&self) -> [SuperOperator; 2] {
        match &self.maps {
            Maps::Kraus([a, b]) => [SuperOperator::conjugation(a), SuperOperator::conjugation(b)],
            Maps::Super([a, b]) => [a.clone(), b.clone()],
        }
    }

    pub fn channel(&self) -> SuperOperator {
        let [a, b] = self.maps();
        a.add(&b)
    }

    /// `Ê_1†(I)`
    pub fn effect_one(&self) -> &Operator {
        &self.effect1
    }

    /// `p_1 = Tr(Ê_1(ρ))`
    pub fn probability_one(&self, rho: &Operator) -> f64 {
        let d = self.d;
        let e = self.effect1.data();
        let r = rho.data();
        let mut s = ZERO;
        for i in 0..d {
            for j in 0..d {
                s += e[i * d + j] * r[j * d + i];
            }
        }
        s.re
    }

    /// Unnormalized `Ê_α(ρ)`.
    pub fn branch(&self, rho: &Operator, alpha: usize) -> Operator {
        match &self.maps {
            Maps::Kraus(k) => k[alpha].sandwich(rho),
            Maps::Super(s) => s[alpha].apply(rho),
        }
    }
}

/// Result of one measurement cycle.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub alpha: u8,
    pub rho: Operator,
    pub probability: f64,
}

/// One cycle: outcome 0 iff `u < p_0`, then the normalized conditional update.
pub fn step(rho: &Operator, inst: &MeasurementInstrument, u: f64) -> Result<StepOutcome> {
    step_at(rho, inst, u, 0, 0)
}

fn step_at(rho: &Operator, inst: &MeasurementInstrument, u: f64, trajectory: u64, index: usize) -> Result<StepOutcome> {
    let p1 = inst.probability_one(rho).clamp(0.0, 1.0);
    let p0 = 1.0 - p1;
    let (alpha, p) = if u < p0 { (0u8, p0) } else { (1u8, p1) };
    if p < Tolerances::DEFAULT.branch_probability {
        return Err(Error::ZeroProbabilityBranch {
            trajectory,
            step: index,
            probability: p,
        });
    }
    let mut next = inst.branch(rho, alpha as usize);
    normalize_state(&mut next);
    Ok(StepOutcome {
        alpha,
        rho: next,
        probability: p,
    })
}

/// `(ρ + ρ†)/2` divided by its trace.
fn normalize_state(rho: &mut Operator) {
    let d = rho.dim();
    let data = rho.data_mut();
    for i in 0..d {
        for j in i..d {
            let a = data[i * d + j];
            let b = data[j * d + i];
            let h = (a + b.conj()) * 0.5;
            data[i * d + j] = h;
            data[j * d + i] = h.conj();
        }
    }
    let tr: f64 = (0..d).map(|i| data[i * d + i].re).sum();
    for z in data.iter_mut() {
        *z /= tr;
    }
}

fn check_state(rho: &Operator, tol: f64, trajectory: u64, index: usize) -> Result<()> {
    let e = eigh(rho)?;
    if e.values[0] < -tol {
        return Err(Error::InvalidState {
            trajectory,
            step: index,
            detail: format!("eigenvalue {:.3e}", e.values[0]),
        });
    }
    Ok(())
}

/// One realized outcome sequence.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    /// Outcome bits in measurement order.
    pub outcomes: Vec<u8>,
    pub f1: f64,
    /// `X = f_1 − ½`
    pub x: f64,
    pub final_state: Operator,
    /// `Σ ln p_{α_n}` over the realized steps.
    pub log_probability: f64,
}

impl TrajectoryRecord {
    pub fn ones(&self) -> usize {
        self.outcomes.iter().filter(|&&a| a == 1).count()
    }
}

/// `X = m_1/m − ½`
pub fn x_statistic(ones: usize, m: usize) -> f64 {
    (2.0 * ones as f64 - m as f64) / (2.0 * m as f64)
}

/// Stream `index` of the keyed generator for `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn run_trajectory<R: Rng + ?Sized>(
    rho0: &Operator,
    inst: &MeasurementInstrument,
    m: usize,
    rng: &mut R,
) -> Result<TrajectoryRecord> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let mut rho = rho0.clone();
    let mut outcomes = Vec::with_capacity(m);
    let mut log_probability = 0.0;
    for n in 0..m {
        let s = step_at(&rho, inst, rng.random::<f64>(), 0, n)?;
        outcomes.push(s.alpha);
        log_probability += s.probability.ln();
        rho = s.rho;
    }
    check_state(&rho, Tolerances::DEFAULT.state, 0, m)?;
    let ones = outcomes.iter().filter(|&&a| a == 1).count();
    Ok(TrajectoryRecord {
        outcomes,
        f1: ones as f64 / m as f64,
        x: x_statistic(ones, m),
        final_state: rho,
        log_probability,
    })
}

/// Running mean and sum of squared deviations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Welford {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        let nf = n as f64;
        self.mean += delta * other.count as f64 / nf;
        self.m2 += other.m2 + delta * delta * (self.count as f64) * (other.count as f64) / nf;
        self.count = n;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Uniform histogram over `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub bins: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        Self {
            bins: 101,
            lo: -0.5,
            hi: 0.5,
        }
    }
}

impl HistogramSpec {
    pub fn index(&self, x: f64) -> usize {
        let f = (x - self.lo) / (self.hi - self.lo) * self.bins as f64;
        (f.floor().max(0.0) as usize).min(self.bins - 1)
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.width()
    }
}

/// Interior edges splitting the `X` axis into fidelity bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinEdges(pub Vec<f64>);

impl BinEdges {
    /// Two bins split at `X = 0`.
    pub fn two_branch() -> Self {
        Self(vec![0.0])
    }

    /// Four bins with edges `{−0.2, 0, 0.2}`.
    pub fn four_branch() -> Self {
        Self(vec![-0.2, 0.0, 0.2])
    }

    /// Midpoints between sorted peak centers.
    pub fn between(centers: &[f64]) -> Self {
        let mut c = centers.to_vec();
        c.sort_by(f64::total_cmp);
        Self(c.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect())
    }

    pub fn count(&self) -> usize {
        self.0.len() + 1
    }

    pub fn index(&self, x: f64) -> usize {
        self.0.iter().take_while(|&&e| x >= e).count()
    }

    pub fn label(&self, b: usize) -> String {
        let lo = if b == 0 { -0.5 } else { self.0[b - 1] };
        let hi = if b == self.0.len() { 0.5 } else { self.0[b] };
        let close = if b == self.0.len() { "]" } else { ")" };
        format!("[{lo},{hi}{close}")
    }
}

/// Configuration of an ensemble run.
#[derive(Clone, Debug)]
pub struct EnsembleConfig {
    /// Snapshot lengths; the longest one is the trajectory length.
    pub m_list: Vec<usize>,
    pub samples: u64,
    pub seed: u64,
    pub histogram: HistogramSpec,
    pub fidelity_bins: BinEdges,
    /// States the conditional states are compared against at each snapshot.
    pub targets: Vec<Operator>,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    pub keep_records: bool,
    /// Check positivity after every step instead of only at snapshots.
    pub validate_every_step: bool,
}

impl EnsembleConfig {
    pub fn new(m_list: Vec<usize>, samples: u64, seed: u64) -> Self {
        Self {
            m_list,
            samples,
            seed,
            histogram: HistogramSpec::default(),
            fidelity_bins: BinEdges::two_branch(),
            targets: Vec::new(),
            threads: None,
            keep_records: false,
            validate_every_step: false,
        }
    }
}

/// Per-bin conditional statistics at one snapshot.
#[derive(Clone, Debug)]
pub struct BinStats {
    pub label: String,
    pub count: u64,
    /// Fidelity of the conditional state to each target.
    pub fidelity: Vec<Welford>,
    state_sum: Operator,
}

impl BinStats {
    pub fn mean_state(&self) -> Option<Operator> {
        (self.count > 0).then(|| self.state_sum.scale_real(1.0 / self.count as f64))
    }
}

/// Ensemble statistics after `m` measurements.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub m: usize,
    /// `ones_counts[k]`: trajectories with exactly `k` outcomes equal to 1.
    pub ones_counts: Vec<u64>,
    pub histogram: Vec<u64>,
    pub bins: Vec<BinStats>,
    pub f1: Welford,
    state_sum: Operator,
}

impl Snapshot {
    fn empty(m: usize, d: usize, cfg: &EnsembleConfig) -> Self {
        Self {
            m,
            ones_counts: vec![0; m + 1],
            histogram: vec![0; cfg.histogram.bins],
            bins: (0..cfg.fidelity_bins.count())
                .map(|b| BinStats {
                    label: cfg.fidelity_bins.label(b),
                    count: 0,
                    fidelity: vec![Welford::default(); cfg.targets.len()],
                    state_sum: Operator::zeros(d),
                })
                .collect(),
            f1: Welford::default(),
            state_sum: Operator::zeros(d),
        }
    }

    fn merge(&mut self, other: &Snapshot) {
        for (a, b) in self.ones_counts.iter_mut().zip(&other.ones_counts) {
            *a += b;
        }
        for (a, b) in self.histogram.iter_mut().zip(&other.histogram) {
            *a += b;
        }
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            a.count += b.count;
            for (fa, fb) in a.fidelity.iter_mut().zip(&b.fidelity) {
                fa.merge(fb);
            }
            a.state_sum += &b.state_sum;
        }
        self.f1.merge(&other.f1);
        self.state_sum += &other.state_sum;
    }

    pub fn samples(&self) -> u64 {
        self.ones_counts.iter().sum()
    }

    /// Ensemble average of the conditional states.
    pub fn mean_state(&self) -> Operator {
        self.state_sum.scale_real(1.0 / self.samples().max(1) as f64)
    }

    /// Empirical distribution of `f_1 = k/m`.
    pub fn f1_distribution(&self) -> Vec<f64> {
        let n = self.samples() as f64;
        self.ones_counts.iter().map(|&c| c as f64 / n).collect()
    }

    /// Fraction of trajectories per fidelity bin.
    pub fn sample_ratios(&self) -> Vec<f64> {
        let n = self.samples() as f64;
        self.bins.iter().map(|b| b.count as f64 / n).collect()
    }

    /// For each bin `b`, the mean fidelity to target `b` (when there are as
    /// many targets as bins).
    pub fn branch_fidelities(&self) -> Option<Vec<Welford>> {
        let nt = self.bins.first()?.fidelity.len();
        (nt == self.bins.len()).then(|| self.bins.iter().enumerate().map(|(b, s)| s.fidelity[b]).collect())
    }

    /// Fidelity of each trajectory to the target of its own bin, pooled over
    /// all bins.
    pub fn pooled_branch_fidelity(&self) -> Option<Welford> {
        let per = self.branch_fidelities()?;
        let mut acc = Welford::default();
        for w in &per {
            acc.merge(w);
        }
        Some(acc)
    }
}

/// Statistics of an ensemble run.
#[derive(Clone, Debug)]
pub struct TrajectoryEnsemble {
    pub samples: u64,
    pub seed: u64,
    pub histogram: HistogramSpec,
    pub fidelity_bins: BinEdges,
    pub snapshots: Vec<Snapshot>,
    pub records: Option<Vec<TrajectoryRecord>>,
}

impl TrajectoryEnsemble {
    pub fn snapshot(&self, m: usize) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.m == m)
    }
}

const CHUNK: u64 = 256;

struct ChunkResult {
    snapshots: Vec<Snapshot>,
    records: Vec<TrajectoryRecord>,
}

fn simulate_chunk(
    rho0: &Operator,
    inst: &MeasurementInstrument,
    cfg: &EnsembleConfig,
    m_list: &[usize],
    range: std::ops::Range<u64>,
) -> Result<ChunkResult> {
    let d = rho0.dim();
    let m_max = *m_list.last().expect("non-empty");
    let tol = Tolerances::DEFAULT.state;
    let mut snaps: Vec<Snapshot> = m_list.iter().map(|&m| Snapshot::empty(m, d, cfg)).collect();
    let mut records = Vec::new();
    for index in range {
        let mut rng = trajectory_rng(cfg.seed, index);
        let mut rho = rho0.clone();
        let mut ones = 0usize;
        let mut next = 0usize;
        let mut outcomes = if cfg.keep_records { Vec::with_capacity(m_max) } else { Vec::new() };
        let mut log_probability = 0.0;
        for n in 0..m_max {
            let s = step_at(&rho, inst, rng.random::<f64>(), index, n)?;
            ones += s.alpha as usize;
            rho = s.rho;
            if cfg.keep_records {
                outcomes.push(s.alpha);
                log_probability += s.probability.ln();
            }
            if cfg.validate_every_step {
                check_state(&rho, tol, index, n + 1)?;
            }
            if n + 1 == m_list[next] {
                if !cfg.validate_every_step {
                    check_state(&rho, tol, index, n + 1)?;
                }
                let snap = &mut snaps[next];
                let m = n + 1;
                let x = x_statistic(ones, m);
                snap.ones_counts[ones] += 1;
                snap.histogram[cfg.histogram.index(x)] += 1;
                snap.f1.push(ones as f64 / m as f64);
                snap.state_sum += &rho;
                let bin = &mut snap.bins[cfg.fidelity_bins.index(x)];
                bin.count += 1;
                bin.state_sum += &rho;
                for (w, target) in bin.fidelity.iter_mut().zip(&cfg.targets) {
                    w.push(fidelity(target, &rho)?);
                }
                next += 1;
            }
        }
        if cfg.keep_records {
            records.push(TrajectoryRecord {
                f1: ones as f64 / m_max as f64,
                x: x_statistic(ones, m_max),
                outcomes,
                final_state: rho,
                log_probability,
            });
        }
    }
    Ok(ChunkResult {
        snapshots: snaps,
        records,
    })
}

/// Runs `samples` independent trajectories and reduces them chunk by chunk in
/// trajectory order, so the result does not depend on the worker count.
pub fn run_ensemble(rho0: &Operator, inst: &MeasurementInstrument, cfg: &EnsembleConfig) -> Result<TrajectoryEnsemble> {
    if cfg.samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    let mut m_list = cfg.m_list.clone();
    m_list.sort_unstable();
    m_list.dedup();
    if m_list.is_empty() || m_list[0] == 0 {
        return Err(Error::InvalidArgument("m_list must contain positive lengths".into()));
    }
    if rho0.dim() != inst.dim() {
        return Err(Error::DimensionMismatch {
            expected: inst.dim(),
            found: rho0.dim(),
        });
    }
    if cfg.histogram.bins == 0 || !(cfg.histogram.hi > cfg.histogram.lo) {
        return Err(Error::InvalidArgument("histogram needs at least one bin over a non-empty range".into()));
    }
    for t in &cfg.targets {
        if t.dim() != rho0.dim() {
            return Err(Error::DimensionMismatch {
                expected: rho0.dim(),
                found: t.dim(),
            });
        }
    }
    let chunks: Vec<std::ops::Range<u64>> = (0..cfg.samples.div_ceil(CHUNK))
        .map(|c| c * CHUNK..((c + 1) * CHUNK).min(cfg.samples))
        .collect();
    let work = || -> Vec<Result<ChunkResult>> {
        chunks
            .par_iter()
            .map(|r| simulate_chunk(rho0, inst, cfg, &m_list, r.clone()))
            .collect()
    };
    let results = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let d = rho0.dim();
    let mut snapshots: Vec<Snapshot> = m_list.iter().map(|&m| Snapshot::empty(m, d, cfg)).collect();
    let mut records = cfg.keep_records.then(Vec::new);
    for r in results {
        let r = r?;
        for (a, b) in snapshots.iter_mut().zip(&r.snapshots) {
            a.merge(b);
        }
        if let Some(rec) = records.as_mut() {
            rec.extend(r.records);
        }
    }
    Ok(TrajectoryEnsemble {
        samples: cfg.samples,
        seed: cfg.seed,
        histogram: cfg.histogram.clone(),
        fidelity_bins: cfg.fidelity_bins.clone(),
        snapshots,
        records,
    })
}

/// Unconditional state `Φ̂^m |ρ⟩⟩`.
pub fn channel_power_state(rho0: &Operator, phi_hat: &SuperOperator, m: u64) -> Operator {
    phi_hat.pow(m).apply(rho0)
}

/// Exact outcome statistics of `m` cycles.
#[derive(Clone, Debug)]
pub struct BruteForce {
    pub m: usize,
    /// Probability of each outcome sequence; bit `m − 1 − n` of the index is outcome `n`.
    pub sequences: Vec<f64>,
    /// `P(f_1 = k/m)` for `k = 0..=m`.
    pub ones: Vec<f64>,
}

impl BruteForce {
    pub fn expectation_f1(&self) -> f64 {
        self.ones
            .iter()
            .enumerate()
            .map(|(k, p)| p * k as f64 / self.m as f64)
            .sum()
    }

    pub fn variance_f1(&self) -> f64 {
        let mean = self.expectation_f1();
        self.ones
            .iter()
            .enumerate()
            .map(|(k, p)| p * (k as f64 / self.m as f64 - mean).powi(2))
            .sum()
    }
}

/// Enumerates all `2^m` outcome sequences.
pub fn brute_force_distribution(rho0: &Operator, inst: &MeasurementInstrument, m: usize) -> Result<BruteForce> {
    if m > BRUTE_FORCE_CAP {
        return Err(Error::TooLarge {
            m,
            cap: BRUTE_FORCE_CAP,
        });
    }
    let mut sequences = vec![0.0; 1 << m];
    let mut ones = vec![0.0; m + 1];
    fn recurse(
        rho: &Operator,
        inst: &MeasurementInstrument,
        depth: usize,
        m: usize,
        prefix: usize,
        count: usize,
        seq: &mut [f64],
        ones: &mut [f64],
    ) {
        if depth == m {
            let p = rho.trace().re;
            seq[prefix] = p;
            ones[count] += p;
            return;
        }
        for alpha in 0..2 {
            let next = inst.branch(rho, alpha);
            recurse(&next, inst, depth + 1, m, prefix << 1 | alpha, count + alpha, seq, ones);
        }
    }
    recurse(rho0, inst, 0, m, 0, 0, &mut sequences, &mut ones);
    Ok(BruteForce { m, sequences, ones })
}

/// `Σ |p − q| / 2`
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Probability of a given sequence from products of the outcome maps.
pub fn sequence_probability(rho0: &Operator, inst: &MeasurementInstrument, outcomes: &[u8]) -> f64 {
    let maps = inst.maps();
    let mut v = rho0.clone();
    for &a in outcomes {
        v = maps[a as usize].apply(&v);
    }
    v.trace().re
}
