//! Monte Carlo ensemble of the metastable illustrative model: outcome
//! histograms and branch fidelities as the repetition count grows.

use envsteer::channel::ChannelAnalysis;
use envsteer::cli::b_eigenstates;
use envsteer::linalg::Operator;
use envsteer::model::{presets, FrequencyConvention};
use envsteer::trajectory::{run_ensemble, EnsembleConfig, MeasurementInstrument};
use envsteer::Result;

fn main() -> Result<()> {
    let model = presets::illustrative(0.025).build(FrequencyConvention::Angular)?;
    let a = ChannelAnalysis::new(&model)?;
    let inst = MeasurementInstrument::from_kraus(&a.kraus);

    let mut cfg = EnsembleConfig::new(vec![1, 10, 100, 1000, 8000], 20_000, 1);
    cfg.targets = b_eigenstates(&model, &a)?;
    let ens = run_ensemble(&Operator::maximally_mixed(2), &inst, &cfg)?;

    for s in &ens.snapshots {
        let fid = s.pooled_branch_fidelity().map(|w| w.mean).unwrap_or(f64::NAN);
        println!("m = {:>5}  branch fidelity {fid:.4}  sample ratios {:?}", s.m, s.sample_ratios());
        let coarse: Vec<u64> = s.histogram.chunks(5).map(|c| c.iter().sum()).collect();
        let peak = *coarse.iter().max().unwrap() as f64;
        for (i, c) in coarse.iter().enumerate() {
            let first = 5 * i;
            let last = (first + 4).min(ens.histogram.bins - 1);
            let x = 0.5 * (ens.histogram.center(first) + ens.histogram.center(last));
            println!("   {x:>6.3} {}", "#".repeat((40.0 * *c as f64 / peak).round() as usize));
        }
    }
    Ok(())
}
