//! Markovian bath noise during free evolution and the resulting noisy
//! measurement instrument.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::channel::{half_pi_rotation, validate_cptp_with};
use crate::error::{Error, Result};
use crate::linalg::{eigh, expm_general, kron, Operator, SuperOperator, Tolerances, I, ZERO};
use crate::model::{embed, pauli, spin_dot, ModelOperators};
use crate::trajectory::{run_ensemble, EnsembleConfig, MeasurementInstrument, TrajectoryEnsemble};

/// Largest composite Liouville-space dimension `(2d)²` accepted.
pub const LIOUVILLE_DIM_CAP: usize = 1024;

/// Trace-preservation tolerance of the noisy instrument.
pub const NOISY_TP_TOL: f64 = 1e-8;
/// Choi positivity tolerance of each noisy outcome map.
pub const NOISY_PSD_TOL: f64 = 1e-7;

/// Rates of one bath spin, in 1/s. Dephasing uses `L = σ_n`, so coherences in
/// the local basis decay at twice the rate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinRates {
    #[serde(default)]
    pub dephasing_per_s: f64,
    /// `σ^−` jumps.
    #[serde(default)]
    pub lower_per_s: f64,
    /// `σ^+` jumps.
    #[serde(default)]
    pub raise_per_s: f64,
}

impl SpinRates {
    fn check(&self) -> Result<()> {
        for rate in [self.dephasing_per_s, self.lower_per_s, self.raise_per_s] {
            if !(rate >= 0.0) || !rate.is_finite() {
                return Err(Error::NegativeRate { rate });
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.dephasing_per_s == 0.0 && self.lower_per_s == 0.0 && self.raise_per_s == 0.0
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dephasing_per_s: self.dephasing_per_s * s,
            lower_per_s: self.lower_per_s * s,
            raise_per_s: self.raise_per_s * s,
        }
    }
}

/// Independent noise on each bath spin.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub per_spin: Vec<SpinRates>,
}

impl NoiseSpec {
    pub fn uniform(rates: SpinRates, spins: usize) -> Self {
        Self {
            per_spin: vec![rates; spins],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.per_spin.iter().all(SpinRates::is_zero)
    }
}

/// `L̂ = −i(H⊗I − I⊗Hᵀ) + Σ Γ[L⊗L* − ½(L†L⊗I + I⊗(L†L)ᵀ)]`
pub fn liouvillian(h: &Operator, dissipators: &[(Operator, f64)]) -> Result<SuperOperator> {
    h.require_hermitian(Tolerances::DEFAULT.structural)?;
    let d = h.dim();
    let id = Operator::identity(d);
    let mut l = (&kron(h, &id) - &kron(&id, &h.transpose())).scale(-I);
    for (op, rate) in dissipators {
        if !(*rate >= 0.0) || !rate.is_finite() {
            return Err(Error::NegativeRate { rate: *rate });
        }
        if op.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: op.dim(),
            });
        }
        if *rate == 0.0 {
            continue;
        }
        let ldl = op.adjoint().matmul(op);
        let jump = kron(op, &op.conj());
        let anti = &kron(&ldl, &id) + &kron(&id, &ldl.transpose());
        l += &(&jump - &anti.scale_real(0.5)).scale_real(*rate);
    }
    SuperOperator::from_matrix(d, l)
}

/// `(σ_n, σ^−, σ^+)` in the eigenbasis of `n̂·σ`.
pub fn local_spin_operators(axis: [f64; 3]) -> Result<[Operator; 3]> {
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidArgument("quantization axis must be nonzero".into()));
    }
    let sn = spin_dot([2.0 * axis[0] / norm, 2.0 * axis[1] / norm, 2.0 * axis[2] / norm]);
    let e = eigh(&sn)?;
    let down = e.vector(0);
    let up = e.vector(1);
    Ok([sn, Operator::outer(&down, &up), Operator::outer(&up, &down)])
}

/// Bath-level dissipators `(L, Γ)` for every spin.
pub fn bath_dissipators(ops: &ModelOperators, noise: &NoiseSpec) -> Result<Vec<(Operator, f64)>> {
    let d = ops.dim();
    let n = match ops.num_spins() {
        Some(n) => n,
        None if d.is_power_of_two() => d.trailing_zeros() as usize,
        None => {
            return Err(Error::InvalidArgument(format!(
                "noise needs a spin-1/2 bath; dimension {d} is not a power of two"
            )))
        }
    };
    if noise.per_spin.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: noise.per_spin.len(),
        });
    }
    let default_axes = vec![[0.0, 0.0, 1.0]; n];
    let axes = ops.local_axes.as_ref().unwrap_or(&default_axes);
    let mut out = Vec::new();
    for (k, rates) in noise.per_spin.iter().enumerate() {
        rates.check()?;
        let [sn, lower, raise] = local_spin_operators(axes[k])?;
        for (op, rate) in [
            (sn, rates.dephasing_per_s),
            (lower, rates.lower_per_s),
            (raise, rates.raise_per_s),
        ] {
            if rate > 0.0 {
                out.push((embed(&op, k, n), rate));
            }
        }
    }
    Ok(out)
}

/// Outcome maps of one noisy cycle.
#[derive(Clone, Debug)]
pub struct NoisyInstrument {
    pub maps: [SuperOperator; 2],
}

impl NoisyInstrument {
    pub fn measurement(&self) -> Result<MeasurementInstrument> {
        MeasurementInstrument::from_maps(self.maps.clone())
    }

    pub fn channel(&self) -> SuperOperator {
        self.maps[0].add(&self.maps[1])
    }

    /// `max_α ‖Ê_α − Ê′_α‖_F`
    pub fn distance(&self, other: &[SuperOperator; 2]) -> f64 {
        self.maps[0].distance(&other[0]).max(self.maps[1].distance(&other[1]))
    }
}

/// Propagates qubit ⊗ bath under `σ_z⊗B + I⊗H_e` plus bath dissipators for
/// `t`, between ideal `π/2` rotations, and contracts with each readout
/// projector.
pub fn noisy_rim_instrument(ops: &ModelOperators, noise: &NoiseSpec, t: f64, delta_phi: f64) -> Result<NoisyInstrument> {
    let d = ops.dim();
    let dc = 2 * d;
    if dc * dc > LIOUVILLE_DIM_CAP {
        return Err(Error::DimensionCap {
            dim: dc * dc,
            cap: LIOUVILLE_DIM_CAP,
        });
    }
    let bath = bath_dissipators(ops, noise)?;
    let id2 = Operator::identity(2);
    let sz = pauli()[2].clone();
    let h = &kron(&sz, &ops.b) + &kron(&id2, &ops.h_e);
    let dissipators: Vec<(Operator, f64)> = bath.into_iter().map(|(l, g)| (kron(&id2, &l), g)).collect();
    let lv = liouvillian(&h, &dissipators)?;
    let prop = SuperOperator::from_matrix(dc, expm_general(&lv.matrix().scale_real(t)))?;
    let psi = half_pi_rotation(delta_phi).column(0);
    let r = half_pi_rotation(0.0);
    // φ_α = R†|α⟩, so ⟨α|R X R†|α⟩ = Σ_ab φ_α[a]* X_ab φ_α[b]
    let phi: [Vec<C64>; 2] = [0, 1].map(|a| (0..2).map(|q| r[(a, q)].conj()).collect());
    let n = d * d;
    let nc = dc * dc;
    let mut mats = [Operator::zeros(n), Operator::zeros(n)];
    let mut input = vec![ZERO; nc];
    for i in 0..d {
        for j in 0..d {
            input.iter_mut().for_each(|z| *z = ZERO);
            for a in 0..2 {
                for b in 0..2 {
                    input[(a * d + i) * dc + (b * d + j)] = psi[a] * psi[b].conj();
                }
            }
            let out = prop.apply_vec(&input);
            for (alpha, mat) in mats.iter_mut().enumerate() {
                let f = &phi[alpha];
                for p in 0..d {
                    for q in 0..d {
                        let mut s = ZERO;
                        for a in 0..2 {
                            for b in 0..2 {
                                s += f[a].conj() * out[(a * d + p) * dc + (b * d + q)] * f[b];
                            }
                        }
                        mat[(p * d + q, i * d + j)] = s;
                    }
                }
            }
        }
    }
    let [m0, m1] = mats;
    let maps = [SuperOperator::from_matrix(d, m0)?, SuperOperator::from_matrix(d, m1)?];
    for m in &maps {
        let min = eigh(&m.choi().hermitian_part())?.values[0];
        if min < -NOISY_PSD_TOL {
            return Err(Error::NotAChannel(format!("outcome map Choi eigenvalue {min:.3e}")));
        }
    }
    validate_cptp_with(&maps[0].add(&maps[1]), NOISY_TP_TOL, NOISY_PSD_TOL)?;
    Ok(NoisyInstrument { maps })
}

/// Ensemble run with the noisy instrument.
pub fn run_noisy_ensemble(rho0: &Operator, instrument: &NoisyInstrument, cfg: &EnsembleConfig) -> Result<TrajectoryEnsemble> {
    run_ensemble(rho0, &instrument.measurement()?, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{kraus_from_model, stinespring_instrument};
    use crate::linalg::{vec, ONE};
    use crate::model::{build_single_spin, illustrative_model};
    use crate::random::{random_density, random_hermitian};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn closed_liouvillian_is_unitary_conjugation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_hermitian(3, &mut rng);
        let l = liouvillian(&h, &[]).unwrap();
        let prop = expm_general(&l.matrix().scale_real(0.7));
        let u = crate::linalg::expm(&h, 0.7).unwrap();
        let conj = SuperOperator::conjugation(&u);
        assert!((&prop - conj.matrix()).frobenius_norm() < 1e-10);
    }

    #[test]
    fn amplitude_damping_population() {
        let [_, lower, _] = local_spin_operators([0.0, 0.0, 1.0]).unwrap();
        let gamma = 2.0;
        let l = liouvillian(&Operator::zeros(2), &[(lower, gamma)]).unwrap();
        for t in [0.1, 0.5, 2.0] {
            let prop = SuperOperator::from_matrix(2, expm_general(&l.matrix().scale_real(t))).unwrap();
            let rho = prop.apply(&Operator::basis_projector(2, 0));
            assert!((rho[(0, 0)].re - (-gamma * t).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn liouvillian_preserves_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_hermitian(2, &mut rng);
        let [sz, lo, hi] = local_spin_operators([0.3, -0.2, 0.9]).unwrap();
        let l = liouvillian(&h, &[(sz, 0.4), (lo, 1.3), (hi, 0.2)]).unwrap();
        let left = l.left_apply_vec(vec(&Operator::identity(2)).entries());
        assert!(left.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-10);
        for t in [0.1, 1.0, 10.0] {
            let prop = SuperOperator::from_matrix(2, expm_general(&l.matrix().scale_real(t))).unwrap();
            assert!(prop.trace_preservation_residual() < 1e-10);
            let rho = random_density(2, &mut rng);
            assert!((prop.apply(&rho).trace().re - 1.0).abs() < 1e-12);
        }
        assert!(matches!(
            liouvillian(&h, &[(Operator::identity(2), -1.0)]),
            Err(Error::NegativeRate { .. })
        ));
    }

    #[test]
    fn local_operators_follow_axis() {
        let [sn, lower, raise] = local_spin_operators([1.0, 0.0, 0.0]).unwrap();
        assert!(sn.distance(&pauli()[0]) < 1e-14);
        // σ^− σ^+ projects on the +1 eigenstate of n̂·σ
        let p = raise.adjoint().matmul(&raise);
        let up = lower.matmul(&raise).trace();
        assert!((up - ONE).norm() < 1e-14);
        assert!((sn.matmul(&lower.adjoint().matmul(&lower)).trace() - ONE).norm() < 1e-14);
        assert!((sn.matmul(&p).trace() + ONE).norm() < 1e-14);
    }

    #[test]
    fn noiseless_limit_is_ideal_instrument() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ops = ModelOperators::new(random_hermitian(4, &mut rng), random_hermitian(4, &mut rng)).unwrap();
        let noisy = noisy_rim_instrument(&ops, &NoiseSpec::uniform(SpinRates::default(), 2), 0.8, 1.1).unwrap();
        let ideal = kraus_from_model(&ops, 0.8, 1.1).unwrap().outcome_maps();
        assert!(noisy.distance(&ideal) < 1e-8);
        let dil = stinespring_instrument(&ops, 0.8, 1.1).unwrap();
        assert!(noisy.distance(&dil) < 1e-8);
    }

    #[test]
    fn weak_noise_distance_is_linear() {
        let ops = build_single_spin([1.0, 0.0, 2.0], 0.7);
        let t = 0.6;
        let ideal = kraus_from_model(&ops, t, PI / 2.0).unwrap().outcome_maps();
        let rates = SpinRates {
            dephasing_per_s: 1.0,
            lower_per_s: 1.0,
            raise_per_s: 1.0,
        };
        let dist: Vec<f64> = [1e-3, 1e-2, 1e-1]
            .iter()
            .map(|e| {
                let noise = NoiseSpec::uniform(rates.scaled(e / t), 1);
                noisy_rim_instrument(&ops, &noise, t, PI / 2.0).unwrap().distance(&ideal)
            })
            .collect();
        assert!((dist[1] / dist[0] - 10.0).abs() < 0.5);
        assert!((dist[2] / dist[1] - 10.0).abs() < 1.5);
    }

    #[test]
    fn dephasing_keeps_commuting_fixed_points() {
        // commuting single spin at zero field, quantized along Â
        let ops = build_single_spin([1.0, 0.0, 1.0], 0.0);
        let noise = NoiseSpec::uniform(
            SpinRates {
                dephasing_per_s: 0.8,
                ..Default::default()
            },
            1,
        );
        let noisy = noisy_rim_instrument(&ops, &noise, 0.9, PI / 2.0).unwrap();
        let phi = noisy.channel();
        let e = eigh(&ops.b).unwrap();
        for k in 0..2 {
            let p = Operator::outer(&e.vector(k), &e.vector(k));
            assert!(phi.apply(&p).distance(&p) < 1e-6);
            // outcome probabilities in each sector are unchanged
            let p1_noisy = noisy.maps[1].apply(&p).trace().re;
            let k_ideal = kraus_from_model(&ops, 0.9, PI / 2.0).unwrap();
            let p1_ideal = k_ideal.m1.sandwich(&p).trace().re;
            assert!((p1_noisy - p1_ideal).abs() < 1e-10);
        }
    }

    #[test]
    fn noisy_instrument_is_valid() {
        let ops = illustrative_model(0.2);
        let noise = NoiseSpec::uniform(
            SpinRates {
                dephasing_per_s: 0.5,
                lower_per_s: 2.0,
                raise_per_s: 0.1,
            },
            1,
        );
        let inst = noisy_rim_instrument(&ops, &noise, 0.5, 0.3).unwrap();
        assert!(inst.channel().trace_preservation_residual() < 1e-10);
        let m = inst.measurement().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rho = random_density(2, &mut rng);
        let p1 = m.probability_one(&rho);
        assert!((p1 - inst.maps[1].apply(&rho).trace().re).abs() < 1e-12);
    }

    #[test]
    fn dimension_cap_and_rate_checks() {
        let big = ModelOperators::new(Operator::identity(32), Operator::zeros(32)).unwrap();
        let r = noisy_rim_instrument(&big, &NoiseSpec::uniform(SpinRates::default(), 5), 0.1, 0.0);
        assert!(matches!(r, Err(Error::DimensionCap { .. })));
        let ops = illustrative_model(0.1);
        let bad = NoiseSpec::uniform(
            SpinRates {
                lower_per_s: -1.0,
                ..Default::default()
            },
            1,
        );
        assert!(matches!(noisy_rim_instrument(&ops, &bad, 0.1, 0.0), Err(Error::NegativeRate { .. })));
        let wrong = NoiseSpec::uniform(SpinRates::default(), 2);
        assert!(matches!(
            noisy_rim_instrument(&ops, &wrong, 0.1, 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
