//! Central-spin models: noise operator `B` and bath Hamiltonian `H_e` for a
//! qubit coupled through `σ_z ⊗ B`.
//!
//! Internally every frequency is an angular frequency in rad/s and every time
//! is in seconds. Configs use kHz and μs; the conversion is controlled by
//! [`FrequencyConvention`].

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kron_all, Operator, Tolerances, I, ZERO};

/// Largest supported number of bath spins.
pub const MAX_SPINS: usize = 4;

/// Vacuum permeability over 4π, T²·m³/J.
pub const MU0_OVER_4PI: f64 = 1e-7;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// ¹³C gyromagnetic ratio, rad/s/T.
pub const GAMMA_C13: f64 = 6.728_284e7;

/// First cosine harmonic of the CPMG sign modulation.
pub const CPMG_FOURIER_C1: f64 = 4.0 / PI;

/// How config frequencies in kHz map to rad/s.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyConvention {
    /// `ω = 2π·f`
    #[default]
    Angular,
    /// `ω = f` (the kHz number is taken as krad/s)
    Linear,
}

impl FrequencyConvention {
    pub fn khz_to_rad_per_s(self, khz: f64) -> f64 {
        match self {
            FrequencyConvention::Angular => 2.0 * PI * 1e3 * khz,
            FrequencyConvention::Linear => 1e3 * khz,
        }
    }
}

pub fn us_to_s(us: f64) -> f64 {
    us * 1e-6
}

/// The pair `(B, H_e)`.
#[derive(Clone, Debug)]
pub struct ModelOperators {
    pub b: Operator,
    pub h_e: Operator,
    /// Quantization axis of each bath spin, used to orient `σ±` dissipators.
    /// `None` for user-supplied operators without a spin structure.
    pub local_axes: Option<Vec<[f64; 3]>>,
}

impl ModelOperators {
    pub fn new(b: Operator, h_e: Operator) -> Result<Self> {
        if b.dim() != h_e.dim() {
            return Err(Error::DimensionMismatch {
                expected: b.dim(),
                found: h_e.dim(),
            });
        }
        let tol = Tolerances::DEFAULT.structural;
        b.require_hermitian(tol)?;
        h_e.require_hermitian(tol)?;
        Ok(Self {
            b,
            h_e,
            local_axes: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.b.dim()
    }

    pub fn num_spins(&self) -> Option<usize> {
        self.local_axes.as_ref().map(|a| a.len())
    }

    /// `‖[B, H_e]‖_F / (‖B‖_F ‖H_e‖_F + ε)`; zero when either operator vanishes.
    pub fn relative_commutator(&self) -> f64 {
        let c = self.b.commutator(&self.h_e).frobenius_norm();
        let scale = self.b.frobenius_norm() * self.h_e.frobenius_norm();
        if c == 0.0 {
            0.0
        } else {
            c / (scale + f64::MIN_POSITIVE)
        }
    }

    pub fn is_commuting(&self, tol: f64) -> bool {
        self.relative_commutator() < tol
    }

    /// `H_e + B` and `H_e − B`, the environment Hamiltonians for qubit states 0 and 1.
    pub fn branch_hamiltonians(&self) -> (Operator, Operator) {
        (&self.h_e + &self.b, &self.h_e - &self.b)
    }
}

/// Model plus the RIM cycle parameters.
#[derive(Clone, Debug)]
pub struct RimModel {
    pub ops: ModelOperators,
    /// Free evolution time per cycle (seconds, or dimensionless for custom models).
    pub t: f64,
    /// Phase difference `Δφ` between the two qubit rotations, rad.
    pub delta_phi: f64,
}

/// Spin-½ operators `(I_x, I_y, I_z) = σ/2`.
pub fn spin_half() -> [Operator; 3] {
    let h = C64::new(0.5, 0.0);
    [
        Operator::from_rows(&[[ZERO, h], [h, ZERO]]),
        Operator::from_rows(&[[ZERO, -I * 0.5], [I * 0.5, ZERO]]),
        Operator::from_rows(&[[h, ZERO], [ZERO, -h]]),
    ]
}

pub fn pauli() -> [Operator; 3] {
    let [x, y, z] = spin_half();
    [x.scale_real(2.0), y.scale_real(2.0), z.scale_real(2.0)]
}

/// `op` acting on spin `k` of `n` (spin 0 is the most significant factor).
pub fn embed(op: &Operator, k: usize, n: usize) -> Operator {
    let id = Operator::identity(2);
    let factors: Vec<&Operator> = (0..n).map(|j| if j == k { op } else { &id }).collect();
    kron_all(&factors)
}

/// `v · I` on a single spin.
pub fn spin_dot(v: [f64; 3]) -> Operator {
    let s = spin_half();
    let mut out = Operator::zeros(2);
    for (c, op) in v.iter().zip(&s) {
        out += &op.scale_real(*c);
    }
    out
}

/// `B = A·I`, `H_e = ω_L I_z`.
pub fn build_single_spin(a_vec: [f64; 3], larmor: f64) -> ModelOperators {
    let b = spin_dot(a_vec);
    let h_e = spin_half()[2].scale_real(larmor);
    ModelOperators {
        b,
        h_e,
        local_axes: Some(vec![default_axis(a_vec, larmor)]),
    }
}

/// Effective first-harmonic model under CPMG decoupling in the frame rotating
/// at the filter frequency: `B′ = (2/π) A⊥ I⊥`, `H′_e = Δω I_z`.
pub fn build_dd_effective(a_vec: [f64; 3], delta_omega: f64) -> ModelOperators {
    let a_perp = a_vec[0].hypot(a_vec[1]);
    let xi = a_vec[1].atan2(a_vec[0]);
    let coeff = 0.5 * CPMG_FOURIER_C1 * a_perp;
    let b = spin_dot([coeff * xi.cos(), coeff * xi.sin(), 0.0]);
    let h_e = spin_half()[2].scale_real(delta_omega);
    ModelOperators {
        b,
        h_e,
        local_axes: Some(vec![[0.0, 0.0, 1.0]]),
    }
}

/// Filter frequency `ω_T = 2π / (4τ)` of a CPMG sequence with pulse spacing `2τ`.
pub fn cpmg_filter_frequency(tau: f64) -> f64 {
    2.0 * PI / (4.0 * tau)
}

/// Total evolution time `4τ · N/2` of an `N`-pulse CPMG sequence.
pub fn cpmg_evolution_time(tau: f64, pulses: u32) -> f64 {
    4.0 * tau * (pulses as f64 / 2.0)
}

/// Sign modulation `f(t)` of one CPMG unit `τ – π – 2τ – π – τ`.
pub fn cpmg_modulation(t: f64, tau: f64) -> f64 {
    let phase = t.rem_euclid(4.0 * tau);
    if phase < tau || phase >= 3.0 * tau {
        1.0
    } else {
        -1.0
    }
}

/// Effective perpendicular coupling `A⊥′ = (2/π) A⊥`.
pub fn effective_perpendicular_coupling(a_vec: [f64; 3]) -> f64 {
    0.5 * CPMG_FOURIER_C1 * a_vec[0].hypot(a_vec[1])
}

fn default_axis(a_vec: [f64; 3], larmor: f64) -> [f64; 3] {
    let n = (a_vec[0] * a_vec[0] + a_vec[1] * a_vec[1] + a_vec[2] * a_vec[2]).sqrt();
    if larmor == 0.0 && n > 0.0 {
        [a_vec[0] / n, a_vec[1] / n, a_vec[2] / n]
    } else {
        [0.0, 0.0, 1.0]
    }
}

/// Dipolar tensor `D (1 − 3 r̂ r̂ᵀ)` with `D = μ₀ γ² ħ / (4π r³)` in rad/s.
pub fn dipolar_tensor(r: [f64; 3], gamma_n: f64) -> Result<[[f64; 3]; 3]> {
    let norm = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroDisplacement);
    }
    let d = dipolar_coupling(norm, gamma_n);
    Ok(tensor_from_coupling(d, [r[0] / norm, r[1] / norm, r[2] / norm]))
}

/// `μ₀ γ² ħ / (4π r³)`
pub fn dipolar_coupling(r: f64, gamma_n: f64) -> f64 {
    MU0_OVER_4PI * gamma_n * gamma_n * HBAR / (r * r * r)
}

pub fn tensor_from_coupling(d: f64, unit: [f64; 3]) -> [[f64; 3]; 3] {
    let mut t = [[0.0; 3]; 3];
    for (i, row) in t.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            let delta = if i == j { 1.0 } else { 0.0 };
            *x = d * (delta - 3.0 * unit[i] * unit[j]);
        }
    }
    t
}

/// One dipolar pair in the bath Hamiltonian.
#[derive(Clone, Debug)]
pub struct DipolarPair {
    pub i: usize,
    pub j: usize,
    pub tensor: [[f64; 3]; 3],
}

/// Description of a `K`-spin bath in SI units.
#[derive(Clone, Debug, Default)]
pub struct BathDescription {
    /// Hyperfine vectors, rad/s.
    pub hyperfine: Vec<[f64; 3]>,
    /// Larmor frequency, rad/s.
    pub larmor: f64,
    pub dipolar: Vec<DipolarPair>,
    /// Keep only terms of `H_e` that conserve `Σ I_z`.
    pub secular: bool,
}

/// `B = Σ A_k·I_k`, `H_e = ω_L Σ I_z^k + Σ_{j<k} I_j·𝔻_jk·I_k`, optionally
/// projected onto its `Σ I_z`-conserving part.
pub fn build_multi_spin(bath: &BathDescription) -> Result<ModelOperators> {
    let k = bath.hyperfine.len();
    if k > MAX_SPINS {
        return Err(Error::TooManySpins {
            count: k,
            cap: MAX_SPINS,
        });
    }
    if k == 0 {
        return Err(Error::InvalidArgument("bath has no spins".into()));
    }
    let s = spin_half();
    let ops: Vec<[Operator; 3]> = (0..k)
        .map(|n| [embed(&s[0], n, k), embed(&s[1], n, k), embed(&s[2], n, k)])
        .collect();
    let d = 1usize << k;
    let mut b = Operator::zeros(d);
    let mut h_e = Operator::zeros(d);
    for (n, a) in bath.hyperfine.iter().enumerate() {
        for c in 0..3 {
            b += &ops[n][c].scale_real(a[c]);
        }
        h_e += &ops[n][2].scale_real(bath.larmor);
    }
    for pair in &bath.dipolar {
        if pair.i >= k || pair.j >= k || pair.i == pair.j {
            return Err(Error::InvalidArgument(format!(
                "dipolar pair ({}, {}) is not a pair of distinct spins among {k}",
                pair.i, pair.j
            )));
        }
        for a in 0..3 {
            for c in 0..3 {
                let x = pair.tensor[a][c];
                if x != 0.0 {
                    h_e += &ops[pair.i][a].matmul(&ops[pair.j][c]).scale_real(x);
                }
            }
        }
    }
    if bath.secular {
        h_e = secular_part(&h_e, k);
    }
    let axes = bath
        .hyperfine
        .iter()
        .map(|&a| default_axis(a, bath.larmor))
        .collect();
    Ok(ModelOperators {
        b: b.hermitian_part(),
        h_e: h_e.hermitian_part(),
        local_axes: Some(axes),
    })
}

/// Total magnetization `Σ I_z` of each computational basis state.
pub fn basis_magnetization(k: usize) -> Vec<i32> {
    (0..1usize << k)
        .map(|idx| {
            (0..k)
                .map(|n| if idx >> (k - 1 - n) & 1 == 0 { 1 } else { -1 })
                .sum()
        })
        .collect()
}

/// Drops every matrix element that connects different `Σ I_z` sectors.
pub fn secular_part(h: &Operator, k: usize) -> Operator {
    let m = basis_magnetization(k);
    Operator::from_fn(h.dim(), |a, b| if m[a] == m[b] { h[(a, b)] } else { ZERO })
}

pub fn total_iz(k: usize) -> Operator {
    let s = spin_half();
    let mut out = Operator::zeros(1 << k);
    for n in 0..k {
        out += &embed(&s[2], n, k);
    }
    out
}

/// `η = ‖[H₊, H₋]‖ / (‖H₊‖ ‖H₋‖)` with `H± = H_e ± B`.
pub fn noncommutativity_eta(ops: &ModelOperators) -> Result<f64> {
    let (hp, hm) = ops.branch_hamiltonians();
    let np = hp.frobenius_norm();
    let nm = hm.frobenius_norm();
    if np == 0.0 {
        return Err(Error::ZeroOperator { which: "H_e + B" });
    }
    if nm == 0.0 {
        return Err(Error::ZeroOperator { which: "H_e - B" });
    }
    Ok(hp.commutator(&hm).frobenius_norm() / (np * nm))
}

/// Dimensionless qubit-bath toy model `B = σ_z`, `H_e = γ σ_x`.
pub fn illustrative_model(gamma: f64) -> ModelOperators {
    let [x, _, z] = pauli();
    ModelOperators {
        b: z,
        h_e: x.scale_real(gamma),
        local_axes: None,
    }
}

// ---------------------------------------------------------------------------
// Config-facing description
// ---------------------------------------------------------------------------

/// Complex matrix in JSON: rows of entries, each a real number or `[re, im]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixSpec(pub Vec<Vec<Entry>>);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    pub fn value(self) -> C64 {
        match self {
            Entry::Real(x) => C64::new(x, 0.0),
            Entry::Complex([re, im]) => C64::new(re, im),
        }
    }
}

impl MatrixSpec {
    pub fn to_operator(&self) -> Result<Operator> {
        let d = self.0.len();
        let mut data = Vec::with_capacity(d * d);
        for row in &self.0 {
            if row.len() != d {
                return Err(Error::Config(format!(
                    "matrix rows must have {d} entries, found {}",
                    row.len()
                )));
            }
            data.extend(row.iter().map(|e| e.value()));
        }
        Operator::from_row_major(d, data)
    }

    pub fn from_operator(op: &Operator) -> Self {
        let d = op.dim();
        Self(
            (0..d)
                .map(|i| {
                    (0..d)
                        .map(|j| {
                            let z = op[(i, j)];
                            if z.im == 0.0 {
                                Entry::Real(z.re)
                            } else {
                                Entry::Complex([z.re, z.im])
                            }
                        })
                        .collect()
                })
                .collect(),
        )
    }
}

fn default_phase() -> f64 {
    PI / 2.0
}

/// A bath spin's hyperfine coupling, as a vector or as magnitude plus orientation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum BathSpinSpec {
    Vector {
        hyperfine_khz: [f64; 3],
    },
    Magnitude {
        hyperfine_magnitude_khz: f64,
        /// Polar angle from `ẑ`, degrees.
        #[serde(default)]
        tilt_deg: f64,
        /// Azimuth from `x̂`, degrees.
        #[serde(default)]
        azimuth_deg: f64,
    },
}

impl BathSpinSpec {
    pub fn hyperfine_khz(&self) -> [f64; 3] {
        match *self {
            BathSpinSpec::Vector { hyperfine_khz } => hyperfine_khz,
            BathSpinSpec::Magnitude {
                hyperfine_magnitude_khz: a,
                tilt_deg,
                azimuth_deg,
            } => {
                let (th, ph) = (tilt_deg.to_radians(), azimuth_deg.to_radians());
                [a * th.sin() * ph.cos(), a * th.sin() * ph.sin(), a * th.cos()]
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DipolarCouplingSpec {
    pub i: usize,
    pub j: usize,
    pub coupling_khz: f64,
    /// Unit displacement direction; defaults to `ẑ`.
    #[serde(default = "z_axis")]
    pub direction: [f64; 3],
}

fn z_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

fn gamma_c13() -> f64 {
    GAMMA_C13
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DipolarSpec {
    Couplings {
        couplings: Vec<DipolarCouplingSpec>,
    },
    Positions {
        positions_nm: Vec<[f64; 3]>,
        #[serde(default = "gamma_c13")]
        gyromagnetic_ratio_rad_per_s_per_t: f64,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SequenceSpec {
    #[default]
    Rim,
    Cpmg {
        tau_us: f64,
        pulses: u32,
        /// `Δω / A⊥′`; overrides the detuning implied by `larmor_khz`.
        #[serde(default)]
        detuning_ratio: Option<f64>,
    },
}

/// Central-spin model as written in a config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CentralSpinSpec {
    pub bath_spins: Vec<BathSpinSpec>,
    #[serde(default)]
    pub larmor_khz: f64,
    /// `ω_L / |A_1|`; overrides `larmor_khz`.
    #[serde(default)]
    pub larmor_ratio: Option<f64>,
    #[serde(default)]
    pub dipolar: Option<DipolarSpec>,
    #[serde(default)]
    pub sequence: SequenceSpec,
    /// Free evolution time; required for RIM, derived from the sequence for CPMG.
    #[serde(default)]
    pub t_us: Option<f64>,
    /// `ω_L t / π`; overrides `t_us` for RIM.
    #[serde(default)]
    pub larmor_phase_over_pi: Option<f64>,
    #[serde(default = "default_phase")]
    pub phase_difference_rad: f64,
    #[serde(default)]
    pub secular: bool,
}

/// Every model a config can describe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    CentralSpin(CentralSpinSpec),
    /// `B = σ_z`, `H_e = γ σ_x` in dimensionless units.
    Illustrative {
        gamma: f64,
        t: f64,
        #[serde(default = "default_phase")]
        phase_difference_rad: f64,
    },
    /// Explicit operators in dimensionless units.
    Custom {
        b: MatrixSpec,
        h_e: MatrixSpec,
        t: f64,
        #[serde(default = "default_phase")]
        phase_difference_rad: f64,
    },
}

fn finite(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Config(format!("{name} must be finite, found {x}")))
    }
}

impl ModelSpec {
    pub fn build(&self, convention: FrequencyConvention) -> Result<RimModel> {
        match self {
            ModelSpec::Illustrative {
                gamma,
                t,
                phase_difference_rad,
            } => Ok(RimModel {
                ops: illustrative_model(finite("gamma", *gamma)?),
                t: finite("t", *t)?,
                delta_phi: finite("phase_difference_rad", *phase_difference_rad)?,
            }),
            ModelSpec::Custom {
                b,
                h_e,
                t,
                phase_difference_rad,
            } => Ok(RimModel {
                ops: ModelOperators::new(b.to_operator()?, h_e.to_operator()?)?,
                t: finite("t", *t)?,
                delta_phi: finite("phase_difference_rad", *phase_difference_rad)?,
            }),
            ModelSpec::CentralSpin(spec) => spec.build(convention),
        }
    }
}

impl CentralSpinSpec {
    pub fn build(&self, convention: FrequencyConvention) -> Result<RimModel> {
        let k = self.bath_spins.len();
        if k == 0 {
            return Err(Error::Config("bath_spins must not be empty".into()));
        }
        if k > MAX_SPINS {
            return Err(Error::TooManySpins {
                count: k,
                cap: MAX_SPINS,
            });
        }
        let w = |khz: f64| convention.khz_to_rad_per_s(khz);
        let mut hyperfine = Vec::with_capacity(k);
        for s in &self.bath_spins {
            let a = s.hyperfine_khz();
            for &c in &a {
                finite("hyperfine", c)?;
            }
            hyperfine.push([w(a[0]), w(a[1]), w(a[2])]);
        }
        let a1 = {
            let a = hyperfine[0];
            (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
        };
        let larmor = match self.larmor_ratio {
            Some(r) => finite("larmor_ratio", r)? * a1,
            None => w(finite("larmor_khz", self.larmor_khz)?),
        };
        let delta_phi = finite("phase_difference_rad", self.phase_difference_rad)?;

        match &self.sequence {
            SequenceSpec::Rim => {
                let t = match (self.larmor_phase_over_pi, self.t_us) {
                    (Some(p), _) => {
                        if larmor == 0.0 {
                            return Err(Error::Config(
                                "larmor_phase_over_pi needs a nonzero Larmor frequency".into(),
                            ));
                        }
                        finite("larmor_phase_over_pi", p)? * PI / larmor.abs()
                    }
                    (None, Some(t)) => us_to_s(finite("t_us", t)?),
                    (None, None) => {
                        return Err(Error::Config("t_us is required for a RIM sequence".into()))
                    }
                };
                if t < 0.0 {
                    return Err(Error::Config(format!("evolution time must be non-negative, found {t}")));
                }
                let dipolar = self.dipolar_pairs(k, convention)?;
                let ops = build_multi_spin(&BathDescription {
                    hyperfine,
                    larmor,
                    dipolar,
                    secular: self.secular,
                })?;
                Ok(RimModel { ops, t, delta_phi })
            }
            SequenceSpec::Cpmg {
                tau_us,
                pulses,
                detuning_ratio,
            } => {
                if pulses % 2 != 0 || *pulses == 0 {
                    return Err(Error::Config(format!(
                        "CPMG pulse count must be a positive even integer, found {pulses}"
                    )));
                }
                if self.dipolar.is_some() {
                    return Err(Error::Config(
                        "dipolar couplings are not supported under the decoupling model".into(),
                    ));
                }
                let tau = us_to_s(finite("tau_us", *tau_us)?);
                if tau <= 0.0 {
                    return Err(Error::Config("tau_us must be positive".into()));
                }
                let t = match self.t_us {
                    Some(t) => us_to_s(finite("t_us", t)?),
                    None => cpmg_evolution_time(tau, *pulses),
                };
                let a_eff = effective_perpendicular_coupling(hyperfine[0]);
                let delta_omega = match detuning_ratio {
                    Some(r) => finite("detuning_ratio", *r)? * a_eff,
                    None => larmor - cpmg_filter_frequency(tau),
                };
                let ops = if k == 1 {
                    build_dd_effective(hyperfine[0], delta_omega)
                } else {
                    dd_effective_multi(&hyperfine, delta_omega)
                };
                Ok(RimModel { ops, t, delta_phi })
            }
        }
    }

    fn dipolar_pairs(&self, k: usize, convention: FrequencyConvention) -> Result<Vec<DipolarPair>> {
        let Some(spec) = &self.dipolar else {
            return Ok(Vec::new());
        };
        match spec {
            DipolarSpec::Couplings { couplings } => couplings
                .iter()
                .map(|c| {
                    let dir = c.direction;
                    let n = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
                    if n == 0.0 || !n.is_finite() {
                        return Err(Error::ZeroDisplacement);
                    }
                    let d = convention.khz_to_rad_per_s(finite("coupling_khz", c.coupling_khz)?);
                    Ok(DipolarPair {
                        i: c.i,
                        j: c.j,
                        tensor: tensor_from_coupling(d, [dir[0] / n, dir[1] / n, dir[2] / n]),
                    })
                })
                .collect(),
            DipolarSpec::Positions {
                positions_nm,
                gyromagnetic_ratio_rad_per_s_per_t,
            } => {
                if positions_nm.len() != k {
                    return Err(Error::Config(format!(
                        "expected {k} positions, found {}",
                        positions_nm.len()
                    )));
                }
                let mut out = Vec::new();
                for i in 0..k {
                    for j in i + 1..k {
                        let r = [
                            (positions_nm[j][0] - positions_nm[i][0]) * 1e-9,
                            (positions_nm[j][1] - positions_nm[i][1]) * 1e-9,
                            (positions_nm[j][2] - positions_nm[i][2]) * 1e-9,
                        ];
                        out.push(DipolarPair {
                            i,
                            j,
                            tensor: dipolar_tensor(r, *gyromagnetic_ratio_rad_per_s_per_t)?,
                        });
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Independent spins under the same first-harmonic decoupling model.
fn dd_effective_multi(hyperfine: &[[f64; 3]], delta_omega: f64) -> ModelOperators {
    let k = hyperfine.len();
    let d = 1usize << k;
    let mut b = Operator::zeros(d);
    let mut h_e = Operator::zeros(d);
    for (n, &a) in hyperfine.iter().enumerate() {
        let single = build_dd_effective(a, delta_omega);
        b += &embed(&single.b, n, k);
        h_e += &embed(&single.h_e, n, k);
    }
    ModelOperators {
        b,
        h_e,
        local_axes: Some(vec![[0.0, 0.0, 1.0]; k]),
    }
}

/// Ready-made parameter sets for the scenarios the library ships examples for.
pub mod presets {
    use super::*;

    /// Hyperfine strength of the single-spin scenarios, kHz.
    pub const SINGLE_SPIN_HYPERFINE_KHZ: f64 = 37.7;
    /// Polar tilt of that hyperfine vector from `ẑ`, degrees.
    pub const SINGLE_SPIN_TILT_DEG: f64 = 30.0;
    /// Cycle length of the illustrative model.
    pub const ILLUSTRATIVE_T: f64 = 0.3;

    pub fn illustrative(gamma: f64) -> ModelSpec {
        ModelSpec::Illustrative {
            gamma,
            t: ILLUSTRATIVE_T,
            phase_difference_rad: PI / 2.0,
        }
    }

    /// One nuclear spin with a tilted hyperfine vector and `ω_L = ratio·A`,
    /// `t = 1 μs`.
    pub fn single_spin(larmor_ratio: f64) -> ModelSpec {
        ModelSpec::CentralSpin(CentralSpinSpec {
            bath_spins: vec![BathSpinSpec::Magnitude {
                hyperfine_magnitude_khz: SINGLE_SPIN_HYPERFINE_KHZ,
                tilt_deg: SINGLE_SPIN_TILT_DEG,
                azimuth_deg: 0.0,
            }],
            larmor_khz: 0.0,
            larmor_ratio: Some(larmor_ratio),
            dipolar: None,
            sequence: SequenceSpec::Rim,
            t_us: Some(1.0),
            larmor_phase_over_pi: None,
            phase_difference_rad: PI / 2.0,
            secular: false,
        })
    }

    /// One transverse nuclear spin under `N = 8` CPMG with `τ = 0.47 μs` and
    /// detuning `Δω = ratio·A⊥′`.
    pub fn decoupled_spin(detuning_ratio: f64) -> ModelSpec {
        ModelSpec::CentralSpin(CentralSpinSpec {
            bath_spins: vec![BathSpinSpec::Vector {
                hyperfine_khz: [SINGLE_SPIN_HYPERFINE_KHZ, 0.0, 0.0],
            }],
            larmor_khz: 0.0,
            larmor_ratio: None,
            dipolar: None,
            sequence: SequenceSpec::Cpmg {
                tau_us: 0.47,
                pulses: 8,
                detuning_ratio: Some(detuning_ratio),
            },
            t_us: None,
            larmor_phase_over_pi: None,
            phase_difference_rad: PI / 2.0,
            secular: false,
        })
    }

    /// Two `ẑ`-coupled spins (37.7 and 29.9 kHz) with a 4.1 kHz dipolar
    /// coupling, `t = 2 μs`.
    pub fn two_spin_bath(larmor_khz: f64, secular: bool) -> ModelSpec {
        ModelSpec::CentralSpin(CentralSpinSpec {
            bath_spins: vec![
                BathSpinSpec::Vector {
                    hyperfine_khz: [0.0, 0.0, 37.7],
                },
                BathSpinSpec::Vector {
                    hyperfine_khz: [0.0, 0.0, 29.9],
                },
            ],
            larmor_khz,
            larmor_ratio: None,
            dipolar: Some(DipolarSpec::Couplings {
                couplings: vec![DipolarCouplingSpec {
                    i: 0,
                    j: 1,
                    coupling_khz: 4.1,
                    direction: [0.0, 0.0, 1.0],
                }],
            }),
            sequence: SequenceSpec::Rim,
            t_us: Some(2.0),
            larmor_phase_over_pi: None,
            phase_difference_rad: PI / 2.0,
            secular,
        })
    }

    /// Three `ẑ`-coupled spins in the secular regime with `ω_L t = phase·π`.
    pub fn three_spin_bath(larmor_khz: f64, larmor_phase_over_pi: f64) -> ModelSpec {
        let pair = |i, j, d| DipolarCouplingSpec {
            i,
            j,
            coupling_khz: d,
            direction: [0.0, 0.0, 1.0],
        };
        ModelSpec::CentralSpin(CentralSpinSpec {
            bath_spins: [24.45, 22.28, 21.67]
                .iter()
                .map(|&a| BathSpinSpec::Vector {
                    hyperfine_khz: [0.0, 0.0, a],
                })
                .collect(),
            larmor_khz,
            larmor_ratio: None,
            dipolar: Some(DipolarSpec::Couplings {
                couplings: vec![pair(0, 1, 0.95), pair(0, 2, 0.33), pair(1, 2, 0.86)],
            }),
            sequence: SequenceSpec::Rim,
            t_us: None,
            larmor_phase_over_pi: Some(larmor_phase_over_pi),
            phase_difference_rad: PI / 2.0,
            secular: true,
        })
    }
}
