//! Closed-form statistics of the outcome frequency `f_1` and i.i.d. baselines.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::channel::{commuting_structure, ChannelAnalysis, KrausPair};
use crate::error::{Error, Result};
use crate::linalg::{
    expm, inverse, singular_values, stacked_svd, vec, Operator, SuperOperator, Tolerances, ZERO,
};
use crate::model::ModelOperators;

/// Singular values of `Φ̂ − Î` below this count as exact unit eigenvalues.
const UNIT_EIGEN_THRESHOLD: f64 = 1e-8;
/// Smallest admissible singular value of `Î − Φ̂ + P̂`.
const RESOLVENT_THRESHOLD: f64 = 1e-10;

/// Spectral projector of `Φ̂` onto its eigenvalue-1 eigenspace, built from
/// the right and left null spaces of `Φ̂ − Î`.
pub fn fixed_point_projector(phi_hat: &SuperOperator) -> Result<SuperOperator> {
    let n = phi_hat.matrix().dim();
    let a = phi_hat.matrix() - &Operator::identity(n);
    let null = |m: &Operator| -> Result<Vec<Vec<C64>>> {
        let s = stacked_svd(&[m])?;
        Ok(s
            .singular_values
            .iter()
            .zip(s.right_vectors)
            .filter(|(sv, _)| **sv < UNIT_EIGEN_THRESHOLD)
            .map(|(_, v)| v)
            .collect())
    };
    let right = null(&a)?;
    let left = null(&a.adjoint())?;
    if right.len() != left.len() {
        return Err(Error::NumericalDegeneracy { gap: UNIT_EIGEN_THRESHOLD });
    }
    let r = right.len();
    if r == 0 {
        return Ok(SuperOperator::zeros(phi_hat.d()));
    }
    // P = N (Y†N)⁻¹ Y†
    let g = Operator::from_fn(r, |i, j| (0..n).map(|k| left[i][k].conj() * right[j][k]).sum());
    let g_inv = inverse(&g);
    let p = Operator::from_fn(n, |a_, b_| {
        let mut s = ZERO;
        for i in 0..r {
            for j in 0..r {
                s += right[i][a_] * g_inv[(i, j)] * left[j][b_].conj();
            }
        }
        s
    });
    SuperOperator::from_matrix(phi_hat.d(), p)
}

fn trace_vec(d: usize, v: &[C64]) -> C64 {
    (0..d).map(|i| v[i * d + i]).sum()
}

/// `⟨f_1⟩` after `m` cycles, split into the fixed-point value and the
/// remainder that decays as `1/m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectationF1 {
    pub m: u64,
    pub total: f64,
    /// `⟨⟨I|M̂_1 P̂|ρ⟩⟩ = Σ_j c_j ⟨f_{1j}⟩*`
    pub fixed_point: f64,
    /// `(1/m) Σ_n ⟨⟨I|M̂_1 Φ̂^{n−1} Q̂|ρ⟩⟩`
    pub tail: f64,
}

/// `⟨f_1⟩ = (1/m) Σ_{n=1}^m ⟨⟨I|M̂_1 Φ̂^{n−1}|ρ⟩⟩`, evaluated exactly.
pub fn analytic_expectation_f1(
    rho0: &Operator,
    phi_hat: &SuperOperator,
    m1_hat: &SuperOperator,
    m: u64,
) -> Result<ExpectationF1> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let p = fixed_point_projector(phi_hat)?;
    let d = phi_hat.d();
    let v = vec(rho0);
    let fixed_vec = p.apply_vec(v.entries());
    let fixed_point = trace_vec(d, &m1_hat.apply_vec(&fixed_vec)).re;
    let mut q: Vec<C64> = v.entries().iter().zip(&fixed_vec).map(|(a, b)| a - b).collect();
    let mut tail_sum = 0.0;
    for _ in 0..m {
        tail_sum += trace_vec(d, &m1_hat.apply_vec(&q)).re;
        q = phi_hat.apply_vec(&q);
    }
    let tail = tail_sum / m as f64;
    Ok(ExpectationF1 {
        m,
        total: fixed_point + tail,
        fixed_point,
        tail,
    })
}

/// `r(m) = |tail|` of [`analytic_expectation_f1`] for each `m`.
pub fn asymptotic_tail_vanishing(
    phi_hat: &SuperOperator,
    m1_hat: &SuperOperator,
    rho0: &Operator,
    m_list: &[u64],
) -> Result<Vec<(u64, f64)>> {
    let p = fixed_point_projector(phi_hat)?;
    let d = phi_hat.d();
    let v = vec(rho0);
    let fixed_vec = p.apply_vec(v.entries());
    let mut q: Vec<C64> = v.entries().iter().zip(&fixed_vec).map(|(a, b)| a - b).collect();
    let mut sorted: Vec<u64> = m_list.to_vec();
    sorted.sort_unstable();
    let mut out = Vec::with_capacity(sorted.len());
    let mut sum = 0.0;
    let mut n = 0u64;
    for &m in &sorted {
        while n < m {
            sum += trace_vec(d, &m1_hat.apply_vec(&q)).re;
            q = phi_hat.apply_vec(&q);
            n += 1;
        }
        if m > 0 {
            out.push((m, (sum / m as f64).abs()));
        }
    }
    Ok(out)
}

/// `⟨f_{1j}⟩* = Tr(M_1 ρ_fix^j M_1†)` for each fixed point, in the order of
/// the analysis.
pub fn fixed_point_peak_centers(analysis: &ChannelAnalysis) -> Vec<f64> {
    analysis
        .fixed
        .states()
        .iter()
        .map(|s| analysis.kraus.m1.sandwich(s).trace().re)
        .collect()
}

/// Leading and correction terms of `Var[f_1]` started from a fixed point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedVariance {
    pub m: u64,
    /// `σ_j² = ⟨⟨I|Ê^{(2)}|ρ⟩⟩ + 2⟨⟨I|Ê^{(1)} Z Q̂ Ê^{(1)}|ρ⟩⟩`
    pub sigma2: f64,
    /// `(2/m²)⟨⟨I|Ê^{(1)} (Î − Φ̂^m) Z² Q̂ Ê^{(1)}|ρ⟩⟩`
    pub correction: f64,
    /// `σ_j²/m − correction`
    pub variance: f64,
}

/// Exact `Var[f_1]` for `m` cycles started in `ρ_fix^j`, using the resolvent
/// `Z = (Î − Φ̂ + P̂)⁻¹`, which equals `(Î − Φ̂_D)⁻¹` on the range of `Q̂`.
pub fn analytic_variance_fixed(analysis: &ChannelAnalysis, j: usize, m: u64) -> Result<FixedVariance> {
    let states = analysis.fixed.states();
    if j >= states.len() {
        return Err(Error::IndexOutOfRange {
            index: j,
            len: states.len(),
        });
    }
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    variance_from_parts(
        &analysis.kraus,
        &analysis.phi_hat,
        &analysis.asymptotic.projector,
        &states[j],
        m,
    )
}

fn variance_from_parts(
    kraus: &KrausPair,
    phi: &SuperOperator,
    p: &SuperOperator,
    rho: &Operator,
    m: u64,
) -> Result<FixedVariance> {
    let [m0_hat, m1_hat] = kraus.outcome_maps();
    let d = phi.d();
    let n = d * d;
    let center = m1_hat.apply(rho).trace().re;
    // Ê^{(k)} = Σ_r (a_r − c)^k M̂_r with a_0 = 0, a_1 = 1
    let e1 = m1_hat.scale(C64::from(1.0 - center)).add(&m0_hat.scale(C64::from(-center)));
    let e2 = m1_hat
        .scale(C64::from((1.0 - center).powi(2)))
        .add(&m0_hat.scale(C64::from(center * center)));
    let shifted = &(&Operator::identity(n) - phi.matrix()) + p.matrix();
    let smin = singular_values(&shifted)?.last().copied().unwrap_or(0.0);
    if smin < RESOLVENT_THRESHOLD {
        return Err(Error::SingularResolvent {
            min_singular_value: smin,
        });
    }
    let z = SuperOperator::from_matrix(d, inverse(&shifted))?;
    let v = vec(rho);
    let e1v = e1.apply_vec(v.entries());
    let pe1v = p.apply_vec(&e1v);
    let w: Vec<C64> = e1v.iter().zip(&pe1v).map(|(a, b)| a - b).collect();
    let z1 = z.apply_vec(&w);
    let z2 = z.apply_vec(&z1);
    let phim_z2 = phi.pow(m).apply_vec(&z2);
    let diff: Vec<C64> = z2.iter().zip(&phim_z2).map(|(a, b)| a - b).collect();
    let first = trace_vec(d, &e2.apply_vec(v.entries())).re;
    let second = trace_vec(d, &e1.apply_vec(&z1)).re;
    let sigma2 = first + 2.0 * second;
    let mf = m as f64;
    let correction = 2.0 / (mf * mf) * trace_vec(d, &e1.apply_vec(&diff)).re;
    Ok(FixedVariance {
        m,
        sigma2,
        correction,
        variance: sigma2 / mf - correction,
    })
}

/// Bernoulli relative entropy `S(F‖F_k)`; infinite when `F_k` is 0 or 1 and
/// `F` differs from it.
pub fn relative_entropy(f: f64, fk: f64) -> f64 {
    let term = |a: f64, b: f64| -> f64 {
        if a == 0.0 {
            0.0
        } else if b == 0.0 {
            f64::INFINITY
        } else {
            a * (a / b).ln()
        }
    };
    term(f, fk) + term(1.0 - f, 1.0 - fk)
}

/// The admissible grid `{k/m : k = 0..=m}`.
pub fn frequency_grid(m: usize) -> Vec<f64> {
    (0..=m).map(|k| k as f64 / m as f64).collect()
}

/// Peak shape `Σ_k Tr(P_k ρ) e^{−m S(F‖F_k)}` on the admissible grid, with
/// each sector's Gaussian-like peak normalized to its weight.
pub fn commuting_peak_distribution(
    rho0: &Operator,
    ops: &ModelOperators,
    t: f64,
    delta_phi: f64,
    m: usize,
) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let cs = commuting_structure(ops, &Tolerances::DEFAULT)?;
    let grid = frequency_grid(m);
    let mut out = vec![0.0; m + 1];
    for k in 0..ops.dim() {
        let weight = cs.projector(k).matmul(rho0).trace().re;
        let fk = cs.outcome_one_probability(k, t, delta_phi);
        let shape: Vec<f64> = grid.iter().map(|&f| (-(m as f64) * relative_entropy(f, fk)).exp()).collect();
        let z: f64 = shape.iter().sum();
        for (o, s) in out.iter_mut().zip(&shape) {
            *o += weight * s / z;
        }
    }
    Ok(out)
}

/// `⟨σ_q^z⟩ = −Re{Tr[U_1 ρ U_0†] e^{iΔφ}}` with `U_{0,1} = e^{−i(H_e ± B)t}`.
pub fn coherence(rho: &Operator, ops: &ModelOperators, t: f64, delta_phi: f64) -> Result<f64> {
    let (h0, h1) = ops.branch_hamiltonians();
    let u0 = expm(&h0, t)?;
    let u1 = expm(&h1, t)?;
    let tr = u1.matmul(rho).matmul(&u0.adjoint()).trace();
    Ok(-(tr * C64::from_polar(1.0, delta_phi)).re)
}

/// Binomial mass function of `f_1 = k/m` for i.i.d. outcomes.
pub fn iid_binomial_baseline(p1: f64, m: usize) -> Vec<f64> {
    if p1 <= 0.0 {
        let mut v = vec![0.0; m + 1];
        v[0] = 1.0;
        return v;
    }
    if p1 >= 1.0 {
        let mut v = vec![0.0; m + 1];
        v[m] = 1.0;
        return v;
    }
    let (lp, lq) = (p1.ln(), (1.0 - p1).ln());
    let mut ln_choose = 0.0;
    (0..=m)
        .map(|k| {
            if k > 0 {
                ln_choose += ((m - k + 1) as f64).ln() - (k as f64).ln();
            }
            (ln_choose + k as f64 * lp + (m - k) as f64 * lq).exp()
        })
        .collect()
}

/// One fixed-point peak.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub index: usize,
    pub rank: usize,
    /// `c_j = Tr(P_fix^j ρ_0)`
    pub weight: f64,
    pub center_f1: f64,
    /// `⟨f_{1j}⟩* − ½`
    pub center_x: f64,
    /// `⟨σ_q^z⟩_{j*} = 1 − 2⟨f_{1j}⟩*`
    pub coherence: f64,
    /// Analytic variance at `m`; absent when the resolvent is singular.
    pub variance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub m: u64,
    pub peaks: Vec<Peak>,
}

pub fn peak_report(analysis: &ChannelAnalysis, rho0: &Operator, m: u64) -> Result<PeakReport> {
    let centers = fixed_point_peak_centers(analysis);
    let weights = analysis.fixed.weights(rho0);
    let peaks = centers
        .iter()
        .zip(&weights)
        .enumerate()
        .map(|(j, (&c, &w))| {
            let variance = match analytic_variance_fixed(analysis, j, m) {
                Ok(v) => Some(v.variance),
                Err(Error::SingularResolvent { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok(Peak {
                index: j,
                rank: analysis.fixed.ranks[j],
                weight: w,
                center_f1: c,
                center_x: c - 0.5,
                coherence: 1.0 - 2.0 * c,
                variance,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PeakReport { m, peaks })
}

/// Mean and variance of `f_1` under a mass function on the `k/m` grid.
pub fn grid_moments(p: &[f64]) -> (f64, f64) {
    let m = (p.len() - 1) as f64;
    let mean: f64 = p.iter().enumerate().map(|(k, w)| w * k as f64 / m).sum();
    let var = p
        .iter()
        .enumerate()
        .map(|(k, w)| w * (k as f64 / m - mean).powi(2))
        .sum();
    (mean, var)
}
