//! The environment channel induced by one Ramsey measurement cycle of the
//! qubit: Kraus pair, natural representation, spectrum, fixed points and
//! steering classification.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    eig_general_with, eigh, expm, kron, stacked_svd, GeneralEigen, Operator, SuperOperator,
    Tolerances, I, ONE, ZERO,
};
use crate::model::{noncommutativity_eta, ModelOperators, RimModel};

/// Kraus operators `M_0, M_1` of one measurement cycle.
#[derive(Clone, Debug)]
pub struct KrausPair {
    pub m0: Operator,
    pub m1: Operator,
    pub t: f64,
    pub delta_phi: f64,
}

impl KrausPair {
    pub fn dim(&self) -> usize {
        self.m0.dim()
    }

    pub fn get(&self, alpha: usize) -> &Operator {
        if alpha == 0 {
            &self.m0
        } else {
            &self.m1
        }
    }

    /// `‖M_0†M_0 + M_1†M_1 − I‖_F`
    pub fn completeness_residual(&self) -> f64 {
        let s = &self.m0.adjoint().matmul(&self.m0) + &self.m1.adjoint().matmul(&self.m1);
        s.distance(&Operator::identity(self.dim()))
    }

    /// The per-outcome maps `M̂_α = M_α ⊗ M_α*`.
    pub fn outcome_maps(&self) -> [SuperOperator; 2] {
        [
            SuperOperator::conjugation(&self.m0),
            SuperOperator::conjugation(&self.m1),
        ]
    }
}

/// `M_{0,1} = ½[e^{−i(H_e+B)t} ∓ e^{iΔφ} e^{−i(H_e−B)t}]`
pub fn kraus_from_model(ops: &ModelOperators, t: f64, delta_phi: f64) -> Result<KrausPair> {
    let (hp, hm) = ops.branch_hamiltonians();
    let u0 = expm(&hp, t)?;
    let u1 = expm(&hm, t)?;
    let e = C64::from_polar(1.0, delta_phi);
    let eu1 = u1.scale(e);
    Ok(KrausPair {
        m0: (&u0 - &eu1).scale_real(0.5),
        m1: (&u0 + &eu1).scale_real(0.5),
        t,
        delta_phi,
    })
}

pub fn kraus_for(model: &RimModel) -> Result<KrausPair> {
    kraus_from_model(&model.ops, model.t, model.delta_phi)
}

/// `Φ̂ = M_0 ⊗ M_0* + M_1 ⊗ M_1*`
pub fn natural_representation(k: &KrausPair) -> SuperOperator {
    let [a, b] = k.outcome_maps();
    a.add(&b)
}

/// `(Û_0 + Û_1)/2` with `Û_α = U_α ⊗ U_α*`, built from the two branch unitaries.
pub fn unitary_mixture(ops: &ModelOperators, t: f64) -> Result<SuperOperator> {
    let (hp, hm) = ops.branch_hamiltonians();
    let u0 = SuperOperator::conjugation(&expm(&hp, t)?);
    let u1 = SuperOperator::conjugation(&expm(&hm, t)?);
    Ok(u0.add(&u1).scale(C64::new(0.5, 0.0)))
}

/// Qubit rotation by π/2 about the equatorial axis at azimuth `φ`.
pub fn half_pi_rotation(phi: f64) -> Operator {
    let s = 1.0 / 2f64.sqrt();
    Operator::from_rows(&[
        [C64::new(s, 0.0), -I * C64::from_polar(s, -phi)],
        [-I * C64::from_polar(s, phi), C64::new(s, 0.0)],
    ])
}

/// Per-outcome bath maps obtained by dilation: the qubit is prepared by a
/// rotation at azimuth `Δφ`, the composite evolves under
/// `σ_z ⊗ B + I ⊗ H_e`, a second rotation at azimuth 0 is applied and the
/// qubit is read out and traced away.
pub fn stinespring_instrument(ops: &ModelOperators, t: f64, delta_phi: f64) -> Result<[SuperOperator; 2]> {
    let d = ops.dim();
    let sz = Operator::real_diag(&[1.0, -1.0]);
    let h = &kron(&sz, &ops.b) + &kron(&Operator::identity(2), &ops.h_e);
    let u = expm(&h, t)?;
    let r1 = half_pi_rotation(delta_phi);
    let r2 = half_pi_rotation(0.0);
    let psi = r1.column(0);
    let v = kron(&r2, &Operator::identity(d)).matmul(&u);
    let composite_state = |rho: &Operator| -> Operator {
        let psi_op = Operator::outer(&psi, &psi);
        kron(&psi_op, rho)
    };
    let mut maps = [SuperOperator::zeros(d), SuperOperator::zeros(d)];
    let mut cols: [Vec<Vec<C64>>; 2] = [Vec::new(), Vec::new()];
    for i in 0..d {
        for j in 0..d {
            let mut e = Operator::zeros(d);
            e[(i, j)] = ONE;
            let x = v.matmul(&composite_state(&e)).matmul(&v.adjoint());
            for (alpha, c) in cols.iter_mut().enumerate() {
                let y = Operator::from_fn(d, |p, q| x[(alpha * d + p, alpha * d + q)]);
                c.push(y.into_data());
            }
        }
    }
    for (alpha, map) in maps.iter_mut().enumerate() {
        let n = d * d;
        let m = Operator::from_fn(n, |r, c| cols[alpha][c][r]);
        *map = SuperOperator::from_matrix(d, m)?;
    }
    Ok(maps)
}

/// `Φ̂` assembled from the dilation, a cross-check of [`natural_representation`].
pub fn stinespring_channel(ops: &ModelOperators, t: f64, delta_phi: f64) -> Result<SuperOperator> {
    let [a, b] = stinespring_instrument(ops, t, delta_phi)?;
    Ok(a.add(&b))
}

/// Residuals of the channel conditions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CptpReport {
    pub trace_preservation_residual: f64,
    pub unitality_residual: f64,
    pub min_choi_eigenvalue: f64,
}

pub fn cptp_report(phi: &SuperOperator) -> Result<CptpReport> {
    let choi = phi.choi();
    let e = eigh(&choi)?;
    Ok(CptpReport {
        trace_preservation_residual: phi.trace_preservation_residual(),
        unitality_residual: phi.unitality_residual(),
        min_choi_eigenvalue: e.values[0],
    })
}

/// Fails with `NotAChannel` if the Choi matrix has an eigenvalue below
/// `−1e-8` or the trace-preservation residual exceeds `1e-8`.
pub fn validate_cptp(phi: &SuperOperator) -> Result<CptpReport> {
    validate_cptp_with(phi, 1e-8, 1e-8)
}

pub fn validate_cptp_with(phi: &SuperOperator, tp_tol: f64, psd_tol: f64) -> Result<CptpReport> {
    if phi.matrix().hermitian_residual().is_nan() {
        return Err(Error::NotAChannel("non-finite entries".into()));
    }
    let r = cptp_report(phi)?;
    if r.min_choi_eigenvalue < -psd_tol {
        return Err(Error::NotAChannel(format!(
            "Choi matrix has eigenvalue {:.3e}",
            r.min_choi_eigenvalue
        )));
    }
    if r.trace_preservation_residual > tp_tol {
        return Err(Error::NotAChannel(format!(
            "trace-preservation residual {:.3e}",
            r.trace_preservation_residual
        )));
    }
    Ok(r)
}

/// Minimal projectors of the commutant of the Kraus operators.
#[derive(Clone, Debug)]
pub struct FixedPoints {
    /// `Π_j`, ordered by increasing single-shot probability of outcome 1.
    pub projectors: Vec<Operator>,
    pub ranks: Vec<usize>,
    /// Orthonormal (Hilbert-Schmidt) basis of the commutant.
    pub commutant_basis: Vec<Operator>,
    /// Smallest singular value counted as nonzero, relative to the largest.
    pub degeneracy_gap: f64,
    /// The commutant is spanned by the `Π_j` themselves.
    pub abelian: bool,
    /// All random draws produced the same rank pattern.
    pub draws_agree: bool,
}

impl FixedPoints {
    /// `ρ_fix^j = Π_j / d_j`
    pub fn states(&self) -> Vec<Operator> {
        self.projectors
            .iter()
            .zip(&self.ranks)
            .map(|(p, &r)| p.scale_real(1.0 / r as f64))
            .collect()
    }

    /// `P_fix^j = Π_j`
    pub fn observables(&self) -> &[Operator] {
        &self.projectors
    }

    /// `c_j = Tr(Π_j ρ)`
    pub fn weights(&self, rho: &Operator) -> Vec<f64> {
        self.projectors
            .iter()
            .map(|p| p.matmul(rho).trace().re)
            .collect()
    }
}

const NULL_THRESHOLD: f64 = 1e-9;
const AMBIGUOUS_THRESHOLD: f64 = 1e-6;
const FIXED_POINT_DRAWS: usize = 3;
const FIXED_POINT_SEED: u64 = 0x5eed_f1c5;

/// `[X, M] = 0` in vectorized form: `(I ⊗ Mᵀ − M ⊗ I) vec X`.
fn commutator_matrix(m: &Operator) -> Operator {
    let id = Operator::identity(m.dim());
    &kron(&id, &m.transpose()) - &kron(m, &id)
}

pub fn fixed_points(k: &KrausPair) -> Result<FixedPoints> {
    let d = k.dim();
    let blocks = [
        commutator_matrix(&k.m0),
        commutator_matrix(&k.m1),
        commutator_matrix(&k.m0.adjoint()),
        commutator_matrix(&k.m1.adjoint()),
    ];
    let refs: Vec<&Operator> = blocks.iter().collect();
    let svd = stacked_svd(&refs)?;
    let scale = svd.singular_values[0].max(1.0);
    let mut null = Vec::new();
    let mut gap = f64::INFINITY;
    for (s, v) in svd.singular_values.iter().zip(&svd.right_vectors) {
        let rel = s / scale;
        if rel < NULL_THRESHOLD {
            null.push(Operator::from_row_major(d, v.clone())?);
        } else {
            gap = gap.min(rel);
        }
    }
    if gap < AMBIGUOUS_THRESHOLD {
        return Err(Error::NumericalDegeneracy { gap });
    }
    if null.is_empty() {
        return Err(Error::Decomposition("commutant is empty; the identity should always be present".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(FIXED_POINT_SEED);
    let mut draws: Vec<Vec<Operator>> = Vec::with_capacity(FIXED_POINT_DRAWS);
    for _ in 0..FIXED_POINT_DRAWS {
        let mut x = Operator::zeros(d);
        for c in &null {
            let g = C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
            x += &c.scale(g);
        }
        draws.push(eigenprojector_clusters(&x.hermitian_part())?);
    }
    let patterns: Vec<Vec<usize>> = draws.iter().map(|p| rank_pattern(p)).collect();
    let draws_agree = patterns.windows(2).all(|w| w[0] == w[1]);
    let chosen = (0..draws.len())
        .find(|&i| patterns.iter().filter(|p| **p == patterns[i]).count() * 2 > draws.len())
        .unwrap_or_else(|| {
            (0..draws.len())
                .max_by_key(|&i| (draws[i].len(), std::cmp::Reverse(i)))
                .unwrap_or(0)
        });
    let mut projectors = draws.swap_remove(chosen);

    let m1 = &k.m1;
    let key = |p: &Operator| -> (f64, Vec<f64>) {
        let r = p.trace().re;
        let p1 = m1.matmul(p).matmul(&m1.adjoint()).trace().re / r;
        let diag: Vec<f64> = (0..d).map(|i| -p[(i, i)].re).collect();
        (p1, diag)
    };
    projectors.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        let c = (ka.0 * 1e9).round().total_cmp(&(kb.0 * 1e9).round());
        c.then_with(|| {
            ka.1.iter()
                .zip(&kb.1)
                .map(|(x, y)| ((x * 1e9).round()).total_cmp(&(y * 1e9).round()))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let ranks: Vec<usize> = projectors.iter().map(|p| p.trace().re.round() as usize).collect();

    let commutant_basis = orthonormalize(&null);
    let abelian = commutant_basis.len() == projectors.len();
    Ok(FixedPoints {
        projectors,
        ranks,
        commutant_basis,
        degeneracy_gap: gap,
        abelian,
        draws_agree,
    })
}

fn rank_pattern(p: &[Operator]) -> Vec<usize> {
    let mut r: Vec<usize> = p.iter().map(|x| x.trace().re.round() as usize).collect();
    r.sort_unstable();
    r
}

/// Groups the eigenvectors of a Hermitian operator by (numerically) equal eigenvalue.
fn eigenprojector_clusters(x: &Operator) -> Result<Vec<Operator>> {
    let d = x.dim();
    let e = eigh(x)?;
    let spread = (e.values[d - 1] - e.values[0]).abs().max(1.0);
    let tol = 1e-7 * spread;
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=d {
        if i == d || e.values[i] - e.values[i - 1] > tol {
            let mut p = Operator::zeros(d);
            for k in start..i {
                let v = e.vector(k);
                p += &Operator::outer(&v, &v);
            }
            out.push(p.hermitian_part());
            start = i;
        }
    }
    Ok(out)
}

/// Gram-Schmidt in the Hilbert-Schmidt inner product (twice, for stability).
fn orthonormalize(ops: &[Operator]) -> Vec<Operator> {
    let mut basis: Vec<Operator> = Vec::new();
    for op in ops {
        let mut v = op.clone();
        for _ in 0..2 {
            for b in &basis {
                let c: C64 = b.data().iter().zip(v.data()).map(|(x, y)| x.conj() * y).sum();
                v -= &b.scale(c);
            }
        }
        let n = v.frobenius_norm();
        if n > 1e-8 {
            basis.push(v.scale_real(1.0 / n));
        }
    }
    basis
}

/// Asymptotic projector together with the peripheral-spectrum diagnostics.
#[derive(Clone, Debug)]
pub struct AsymptoticProjector {
    /// Projector onto the fixed-point space along the decaying eigenspaces.
    pub projector: SuperOperator,
    /// Unit-modulus eigenvalues other than 1 are present, so `Φ̂^m` has no
    /// limit and `projector` is its time average.
    pub rotating_points: bool,
}

/// `Σ |C_i⟩⟩⟨⟨C_i|` over an orthonormal basis of the commutant. For a unital
/// channel the fixed points of `Φ̂` and `Φ̂†` coincide with the commutant, so
/// this equals `Σ_j |ρ_fix^j⟩⟩⟨⟨P_fix^j|` whenever the commutant is abelian.
pub fn asymptotic_projector(fixed: &FixedPoints, spectrum: &[C64], tol: &Tolerances) -> AsymptoticProjector {
    let d = fixed.projectors[0].dim();
    let n = d * d;
    let mut p = Operator::zeros(n);
    for c in &fixed.commutant_basis {
        let v = c.data();
        for i in 0..n {
            if v[i] == ZERO {
                continue;
            }
            for j in 0..n {
                p[(i, j)] += v[i] * v[j].conj();
            }
        }
    }
    let rotating_points = spectrum
        .iter()
        .any(|l| (l.norm() - 1.0).abs() < tol.structural.sqrt() && (l - ONE).norm() > tol.structural.sqrt());
    AsymptoticProjector {
        projector: SuperOperator::from_matrix(d, p).expect("d² × d² by construction"),
        rotating_points,
    }
}

/// Repetition range `1/|ln|λ_{q+1}|| ≪ m ≪ 1/|ln|λ_q||`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetastableWindow {
    /// Index `q` into the sorted spectrum.
    pub q: usize,
    pub m_lo: f64,
    /// `f64::INFINITY` when `|λ_q| = 1`.
    pub m_hi: f64,
    pub ratio: f64,
    /// `m_hi / m_lo ≥` the separation factor.
    pub separated: bool,
}

pub const WINDOW_SEPARATION: f64 = 10.0;

fn decay_time(modulus: f64) -> f64 {
    if modulus >= 1.0 {
        f64::INFINITY
    } else if modulus <= 0.0 {
        0.0
    } else {
        1.0 / modulus.ln().abs()
    }
}

pub fn metastable_window(spectrum: &[C64], q: usize) -> Result<MetastableWindow> {
    metastable_window_with(spectrum, q, WINDOW_SEPARATION)
}

pub fn metastable_window_with(spectrum: &[C64], q: usize, separation: f64) -> Result<MetastableWindow> {
    if q + 1 >= spectrum.len() {
        return Err(Error::IndexOutOfRange {
            index: q + 1,
            len: spectrum.len(),
        });
    }
    let m_hi = decay_time(spectrum[q].norm());
    let m_lo = decay_time(spectrum[q + 1].norm());
    let ratio = if m_lo == 0.0 { f64::INFINITY } else { m_hi / m_lo };
    Ok(MetastableWindow {
        q,
        m_lo,
        m_hi,
        ratio,
        separated: ratio >= separation,
    })
}

/// The most separated window among decaying eigenvalues (`|λ_q| < 1`).
pub fn best_metastable_window(spectrum: &[C64], tol: &Tolerances, separation: f64) -> Option<MetastableWindow> {
    let mut best: Option<MetastableWindow> = None;
    for q in 0..spectrum.len().saturating_sub(1) {
        if spectrum[q].norm() >= 1.0 - tol.structural.sqrt() {
            continue;
        }
        let w = metastable_window_with(spectrum, q, separation).ok()?;
        if best.is_none_or(|b| w.ratio > b.ratio) {
            best = Some(w);
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteeringClass {
    Polarization,
    Depolarization,
    MetastablePolarization,
}

/// Knobs of the analysis.
#[derive(Clone, Copy, Debug)]
pub struct AnalysisOptions {
    pub tol: Tolerances,
    pub window_separation: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances::DEFAULT,
            window_separation: WINDOW_SEPARATION,
        }
    }
}

/// Everything derived from one channel.
#[derive(Clone, Debug)]
pub struct ChannelAnalysis {
    pub kraus: KrausPair,
    pub phi_hat: SuperOperator,
    /// Eigenvalues sorted by modulus, descending, with eigenvectors and diagnostics.
    pub eigen: GeneralEigen,
    pub fixed: FixedPoints,
    pub asymptotic: AsymptoticProjector,
    pub eta: f64,
    pub classification: SteeringClass,
    pub window: Option<MetastableWindow>,
}

impl ChannelAnalysis {
    pub fn new(model: &RimModel) -> Result<Self> {
        Self::with_options(model, &AnalysisOptions::default())
    }

    pub fn with_options(model: &RimModel, opts: &AnalysisOptions) -> Result<Self> {
        let kraus = kraus_for(model)?;
        let phi_hat = natural_representation(&kraus);
        let eigen = eig_general_with(phi_hat.matrix(), &opts.tol)?;
        let fixed = fixed_points(&kraus)?;
        let asymptotic = asymptotic_projector(&fixed, &eigen.values, &opts.tol);
        let eta = noncommutativity_eta(&model.ops).unwrap_or(0.0);
        let window = best_metastable_window(&eigen.values, &opts.tol, opts.window_separation);
        let classification = classify_steering(eta, window.as_ref(), &opts.tol);
        Ok(Self {
            kraus,
            phi_hat,
            eigen,
            fixed,
            asymptotic,
            eta,
            classification,
            window,
        })
    }

    pub fn spectrum(&self) -> &[C64] {
        &self.eigen.values
    }

    pub fn fixed_states(&self) -> Vec<Operator> {
        self.fixed.states()
    }
}

/// Polarization when `η` is below the commutation tolerance; otherwise
/// metastable polarization if a separated window exists, else depolarization.
pub fn classify_steering(eta: f64, window: Option<&MetastableWindow>, tol: &Tolerances) -> SteeringClass {
    if eta < tol.commute {
        SteeringClass::Polarization
    } else if window.is_some_and(|w| w.separated) {
        SteeringClass::MetastablePolarization
    } else {
        SteeringClass::Depolarization
    }
}

/// Joint eigenbasis of a commuting pair: `B v_k = b_k v_k`, `H_e v_k = ε_k v_k`.
#[derive(Clone, Debug)]
pub struct CommutingStructure {
    pub vectors: Vec<Vec<C64>>,
    pub b: Vec<f64>,
    pub eps: Vec<f64>,
}

impl CommutingStructure {
    pub fn projector(&self, k: usize) -> Operator {
        Operator::outer(&self.vectors[k], &self.vectors[k])
    }

    /// `λ̃_{αk} = e^{−iε_k t}[e^{−ib_k t} − (−1)^α e^{i(Δφ + b_k t)}]/2`
    pub fn lambda_tilde(&self, alpha: usize, k: usize, t: f64, delta_phi: f64) -> C64 {
        let sign = if alpha == 0 { 1.0 } else { -1.0 };
        let (b, e) = (self.b[k], self.eps[k]);
        C64::from_polar(1.0, -e * t)
            * (C64::from_polar(1.0, -b * t) - C64::from_polar(sign, delta_phi + b * t))
            * 0.5
    }

    /// `⟨λ̃_l, λ̃_k⟩ = Σ_α λ̃_{αl}* λ̃_{αk}`, the eigenvalue of `Φ̂` on `|k⟩⟨l|`.
    pub fn channel_eigenvalue(&self, k: usize, l: usize, t: f64, delta_phi: f64) -> C64 {
        (0..2)
            .map(|a| self.lambda_tilde(a, l, t, delta_phi).conj() * self.lambda_tilde(a, k, t, delta_phi))
            .sum()
    }

    /// `p_{1k} = ½[1 + cos(2 b_k t + Δφ)]`
    pub fn outcome_one_probability(&self, k: usize, t: f64, delta_phi: f64) -> f64 {
        0.5 * (1.0 + (2.0 * self.b[k] * t + delta_phi).cos())
    }
}

pub fn commuting_structure(ops: &ModelOperators, tol: &Tolerances) -> Result<CommutingStructure> {
    let residual = ops.relative_commutator();
    if residual >= tol.commute {
        return Err(Error::NotCommuting { residual });
    }
    // a generic combination separates every joint eigenspace
    let mix = &ops.b + &ops.h_e.scale_real(0.377_964_473);
    let e = eigh(&mix)?;
    let d = ops.dim();
    let mut vectors = Vec::with_capacity(d);
    let mut b = Vec::with_capacity(d);
    let mut eps = Vec::with_capacity(d);
    for k in 0..d {
        let v = e.vector(k);
        let expect = |op: &Operator| -> f64 {
            (0..d)
                .map(|i| (0..d).map(|j| v[i].conj() * op[(i, j)] * v[j]).sum::<C64>())
                .sum::<C64>()
                .re
        };
        b.push(expect(&ops.b));
        eps.push(expect(&ops.h_e));
        vectors.push(v);
    }
    Ok(CommutingStructure { vectors, b, eps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{devec, vec as hs_vec};
    use crate::model::{build_single_spin, illustrative_model};
    use crate::random::{random_density, random_hermitian};
    use std::f64::consts::PI;

    fn random_model(d: usize, seed: u64) -> (ModelOperators, f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ops = ModelOperators::new(random_hermitian(d, &mut rng), random_hermitian(d, &mut rng)).unwrap();
        (ops, 0.7, 1.1)
    }

    #[test]
    fn t_zero_kraus_and_channel() {
        let (ops, _, dphi) = random_model(3, 1);
        let k = kraus_from_model(&ops, 0.0, dphi).unwrap();
        let e = C64::from_polar(1.0, dphi);
        assert!(k.m0.distance(&Operator::identity(3).scale((ONE - e) * 0.5)) < 1e-14);
        assert!(k.m1.distance(&Operator::identity(3).scale((ONE + e) * 0.5)) < 1e-14);
        let phi = natural_representation(&k);
        assert!(phi.distance(&SuperOperator::identity(3)) < 1e-14);
        assert!(stinespring_channel(&ops, 0.0, dphi).unwrap().distance(&SuperOperator::identity(3)) < 1e-14);
        let k = kraus_from_model(&ops, 0.0, PI / 2.0).unwrap();
        let p1 = k.m1.sandwich(&random_density(3, &mut ChaCha8Rng::seed_from_u64(2))).trace().re;
        assert!((p1 - 0.5).abs() < 1e-14);
        let spectrum = eig_general_with(phi.matrix(), &Tolerances::DEFAULT).unwrap().values;
        assert!(spectrum.iter().all(|l| (l - ONE).norm() < 1e-12));
    }

    #[test]
    fn natural_representation_paths_agree() {
        for seed in 0..5 {
            let (ops, t, dphi) = random_model(4, seed);
            let k = kraus_from_model(&ops, t, dphi).unwrap();
            assert!(k.completeness_residual() < 1e-12);
            let phi = natural_representation(&k);
            assert!(phi.distance(&unitary_mixture(&ops, t).unwrap()) < 1e-13);
            assert!(phi.distance(&stinespring_channel(&ops, t, dphi).unwrap()) < 1e-12);
            assert!(phi.trace_preservation_residual() < 1e-12);
            assert!(phi.unitality_residual() < 1e-12);
            let rho = random_density(4, &mut ChaCha8Rng::seed_from_u64(seed + 100));
            let direct = &k.m0.sandwich(&rho) + &k.m1.sandwich(&rho);
            assert!(devec(&crate::linalg::HsVector::from_entries(4, phi.apply_vec(hs_vec(&rho).entries())).unwrap()).distance(&direct) < 1e-13);
        }
    }

    #[test]
    fn stinespring_outcome_maps_match_kraus_maps() {
        let (ops, t, dphi) = random_model(2, 7);
        let k = kraus_from_model(&ops, t, dphi).unwrap();
        let ideal = k.outcome_maps();
        let dil = stinespring_instrument(&ops, t, dphi).unwrap();
        for a in 0..2 {
            assert!(ideal[a].distance(&dil[a]) < 1e-12);
        }
    }

    #[test]
    fn cptp_validation() {
        let (ops, t, dphi) = random_model(3, 4);
        let phi = natural_representation(&kraus_from_model(&ops, t, dphi).unwrap());
        let r = validate_cptp(&phi).unwrap();
        assert!(r.min_choi_eigenvalue > -1e-12);
        let scaled = phi.scale(C64::new(1.01, 0.0));
        assert!(matches!(validate_cptp(&scaled), Err(Error::NotAChannel(_))));
        // completely positive but not trace preserving
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = crate::random::random_operator(3, &mut rng);
        let b = crate::random::random_operator(3, &mut rng);
        let cp = SuperOperator::conjugation(&a).add(&SuperOperator::conjugation(&b));
        let rep = cptp_report(&cp).unwrap();
        assert!(rep.min_choi_eigenvalue > -1e-10);
        assert!(rep.trace_preservation_residual > 1e-3);
        assert!(matches!(validate_cptp(&cp), Err(Error::NotAChannel(_))));
        // transpose map is positive but not completely positive
        let transpose = SuperOperator::from_matrix(
            2,
            Operator::from_fn(4, |r, c| if r == (c % 2) * 2 + c / 2 { ONE } else { ZERO }),
        )
        .unwrap();
        assert!(matches!(validate_cptp(&transpose), Err(Error::NotAChannel(_))));
    }

    #[test]
    fn commuting_fixed_points_are_eigenprojectors() {
        let ops = build_single_spin([0.0, 0.0, 2.0], 0.0);
        let k = kraus_from_model(&ops, 0.4, PI / 2.0).unwrap();
        let fp = fixed_points(&k).unwrap();
        assert_eq!(fp.ranks, vec![1, 1]);
        assert!(fp.abelian);
        let total = &fp.projectors[0] + &fp.projectors[1];
        assert!(total.distance(&Operator::identity(2)) < 1e-12);
        for p in &fp.projectors {
            assert!(p.commutator(&ops.b).frobenius_norm() < 1e-10);
        }
    }

    #[test]
    fn noncommuting_single_fixed_point() {
        let k = kraus_from_model(&illustrative_model(0.1), 0.3, PI / 2.0).unwrap();
        let fp = fixed_points(&k).unwrap();
        assert_eq!(fp.ranks, vec![2]);
        assert!(fp.states()[0].distance(&Operator::maximally_mixed(2)) < 1e-12);
    }

    #[test]
    fn asymptotic_projector_examples() {
        let id = KrausPair {
            m0: Operator::zeros(2),
            m1: Operator::identity(2),
            t: 0.0,
            delta_phi: 0.0,
        };
        let fp = fixed_points(&id).unwrap();
        let ap = asymptotic_projector(&fp, &[ONE; 4], &Tolerances::DEFAULT);
        assert!(ap.projector.distance(&SuperOperator::identity(2)) < 1e-12);

        let model = RimModel {
            ops: illustrative_model(0.1),
            t: 0.3,
            delta_phi: PI / 2.0,
        };
        let a = ChannelAnalysis::new(&model).unwrap();
        let i = Operator::identity(2);
        let expected = Operator::from_fn(4, |r, c| i.data()[r] * 0.5 * i.data()[c]);
        assert!(a.asymptotic.projector.matrix().distance(&expected) < 1e-12);
        let p = &a.asymptotic.projector;
        assert!(p.compose(p).distance(p) < 1e-9);
        assert!(p.compose(&a.phi_hat).distance(p) < 1e-9);
        assert!(a.phi_hat.compose(p).distance(p) < 1e-9);
        let mut last = f64::INFINITY;
        for k in 1..=12 {
            let dist = a.phi_hat.pow(1 << k).distance(p);
            if k > 6 {
                assert!(dist <= last + 1e-12);
            }
            last = dist;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn window_examples() {
        let w = metastable_window(&[ONE, C64::new(0.999, 0.0), C64::new(0.5, 0.0)], 1).unwrap();
        assert!((w.m_lo - 1.0 / 2f64.ln()).abs() < 1e-12);
        assert!((w.m_hi - 999.499_916_625).abs() < 1e-6);
        assert!(w.separated);
        let w = metastable_window(&[ONE, C64::new(0.5, 0.0)], 0).unwrap();
        assert!(w.m_hi.is_infinite());
        assert!(matches!(metastable_window(&[ONE], 0), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn illustrative_classification() {
        let class = |g: f64| {
            let m = RimModel {
                ops: illustrative_model(g),
                t: 0.3,
                delta_phi: PI / 2.0,
            };
            ChannelAnalysis::new(&m).unwrap().classification
        };
        assert_eq!(class(0.0), SteeringClass::Polarization);
        assert_eq!(class(0.1), SteeringClass::Depolarization);
        assert_eq!(class(0.025), SteeringClass::MetastablePolarization);
    }

    #[test]
    fn commuting_spectrum_matches_inner_products() {
        let ops = build_single_spin([0.0, 0.0, 2.3], 0.0);
        let (t, dphi) = (0.5, 0.8);
        let cs = commuting_structure(&ops, &Tolerances::DEFAULT).unwrap();
        let k = kraus_from_model(&ops, t, dphi).unwrap();
        for a in 0..2 {
            for n in 0..2 {
                let v = &cs.vectors[n];
                let mv: Vec<C64> = (0..2).map(|i| (0..2).map(|j| k.get(a)[(i, j)] * v[j]).sum()).collect();
                let lt = cs.lambda_tilde(a, n, t, dphi);
                for i in 0..2 {
                    assert!((mv[i] - lt * v[i]).norm() < 1e-13);
                }
            }
        }
        assert!(matches!(
            commuting_structure(&illustrative_model(0.2), &Tolerances::DEFAULT),
            Err(Error::NotCommuting { .. })
        ));
    }
}
