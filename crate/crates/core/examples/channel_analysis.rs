//! Spectrum, fixed points and steering class of the single-spin field scan.

use envsteer::channel::ChannelAnalysis;
use envsteer::model::{presets, FrequencyConvention};
use envsteer::Result;

fn main() -> Result<()> {
    println!("ω_L/A   class                    top |λ|                      window");
    for step in 0..=20 {
        let ratio = step as f64 * 0.05;
        let model = presets::single_spin(ratio).build(FrequencyConvention::Angular)?;
        let a = ChannelAnalysis::new(&model)?;
        let top: Vec<String> = a.spectrum().iter().take(3).map(|l| format!("{:.5}", l.norm())).collect();
        let window = a
            .window
            .map(|w| format!("m ∈ ({:.1}, {:.1}), ratio {:.1}", w.m_lo, w.m_hi, w.ratio))
            .unwrap_or_default();
        println!("{ratio:<7.2} {:<24} {:<28} {window}", format!("{:?}", a.classification), top.join(" "));
    }

    let pair = presets::two_spin_bath(1000.0, true).build(FrequencyConvention::Angular)?;
    let a = ChannelAnalysis::new(&pair)?;
    println!("\nsecular spin pair: {} fixed points, ranks {:?}", a.fixed.projectors.len(), a.fixed.ranks);
    for (j, w) in a.fixed.weights(&envsteer::linalg::Operator::maximally_mixed(4)).iter().enumerate() {
        println!("  sector {j}: weight from I/4 = {w:.3}");
    }
    Ok(())
}
