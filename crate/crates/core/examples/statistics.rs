//! Closed-form measurement statistics: expectation, fixed-point variance and
//! the peak report, checked against exact enumeration.

use envsteer::channel::ChannelAnalysis;
use envsteer::linalg::Operator;
use envsteer::model::{presets, FrequencyConvention};
use envsteer::stats::{analytic_expectation_f1, analytic_variance_fixed, peak_report};
use envsteer::trajectory::{brute_force_distribution, MeasurementInstrument};
use envsteer::Result;

fn main() -> Result<()> {
    let model = presets::two_spin_bath(1000.0, true).build(FrequencyConvention::Angular)?;
    let a = ChannelAnalysis::new(&model)?;
    let rho0 = Operator::maximally_mixed(4);
    let [_, m1] = a.kraus.outcome_maps();
    let inst = MeasurementInstrument::from_kraus(&a.kraus);

    println!("  m   ⟨f₁⟩ analytic     ⟨f₁⟩ enumerated");
    for m in [1, 4, 8, 12] {
        let e = analytic_expectation_f1(&rho0, &a.phi_hat, &m1, m)?;
        let bf = brute_force_distribution(&rho0, &inst, m as usize)?;
        println!("{m:>3}   {:.15}  {:.15}", e.total, bf.expectation_f1());
    }

    println!("\nVar[f₁] from the middle fixed point");
    for m in [32, 128, 512, 2048] {
        let v = analytic_variance_fixed(&a, 1, m)?;
        println!("m = {m:>4}  σ²/m = {:.4e}  correction {:+.2e}  total {:.4e}", v.sigma2 / m as f64, v.correction, v.variance);
    }

    let report = peak_report(&a, &rho0, 1000)?;
    println!("\npeaks at m = 1000");
    for p in &report.peaks {
        println!(
            "  rank {}  weight {:.3}  X* = {:+.4}  sd {:.4}",
            p.rank,
            p.weight,
            p.center_x,
            p.variance.map(f64::sqrt).unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
