//! Bath noise during free evolution: dephasing leaves polarization intact,
//! balanced relaxation washes it out.

use envsteer::channel::{kraus_from_model, ChannelAnalysis};
use envsteer::cli::b_eigenstates;
use envsteer::linalg::Operator;
use envsteer::model::{presets, FrequencyConvention};
use envsteer::noise::{noisy_rim_instrument, NoiseSpec, SpinRates};
use envsteer::trajectory::{run_ensemble, EnsembleConfig};
use envsteer::Result;

fn main() -> Result<()> {
    let model = presets::single_spin(0.0).build(FrequencyConvention::Angular)?;
    let ideal = kraus_from_model(&model.ops, model.t, model.delta_phi)?.outcome_maps();
    let targets = b_eigenstates(&model, &ChannelAnalysis::new(&model)?)?;

    println!("noise              Γt      ‖E − E_ideal‖   fidelity(m=1000)");
    for (label, gt) in [("dephasing", 0.1), ("dephasing", 1.0), ("relaxation σ±", 0.001), ("relaxation σ±", 0.01)] {
        let r = gt / model.t;
        let rates = if label == "dephasing" {
            SpinRates { dephasing_per_s: r, ..Default::default() }
        } else {
            SpinRates { lower_per_s: r, raise_per_s: r, ..Default::default() }
        };
        let noisy = noisy_rim_instrument(&model.ops, &NoiseSpec::uniform(rates, 1), model.t, model.delta_phi)?;
        let mut cfg = EnsembleConfig::new(vec![1000], 5000, 4);
        cfg.targets = targets.clone();
        let ens = run_ensemble(&Operator::maximally_mixed(2), &noisy.measurement()?, &cfg)?;
        let f = ens.snapshots[0].pooled_branch_fidelity().map(|w| w.mean).unwrap_or(f64::NAN);
        println!("{label:<18} {gt:<7} {:<15.3e} {f:.4}", noisy.distance(&ideal));
    }
    Ok(())
}
