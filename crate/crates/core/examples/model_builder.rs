//! Bath models: single spin, decoupled spin, interacting pairs and triples.

use envsteer::model::{noncommutativity_eta, presets, FrequencyConvention, ModelSpec};
use envsteer::Result;

fn describe(name: &str, spec: ModelSpec) -> Result<()> {
    let model = spec.build(FrequencyConvention::Angular)?;
    println!(
        "{name:<32} d={:<2} t={:>8.3e} s  ‖B‖={:>9.3e}  ‖H_e‖={:>9.3e}  η={:.4}",
        model.ops.dim(),
        model.t,
        model.ops.b.frobenius_norm(),
        model.ops.h_e.frobenius_norm(),
        noncommutativity_eta(&model.ops)?,
    );
    Ok(())
}

fn main() -> Result<()> {
    for g in [0.0, 0.025, 0.1] {
        describe(&format!("illustrative γ={g}"), presets::illustrative(g))?;
    }
    for r in [0.0, 0.06, 0.71] {
        describe(&format!("single spin ω_L/A={r}"), presets::single_spin(r))?;
    }
    for r in [0.0, 0.25, 2.92] {
        describe(&format!("CPMG spin Δω/A⊥′={r}"), presets::decoupled_spin(r))?;
    }
    describe("spin pair, zero field", presets::two_spin_bath(0.0, false))?;
    describe("spin pair, secular 1 MHz", presets::two_spin_bath(1000.0, true))?;
    describe("spin triple, secular", presets::three_spin_bath(1000.0, 7.0))?;

    // Same model from JSON, with the linear reading of the kHz figures.
    let spec: ModelSpec = serde_json::from_str(
        r#"{"kind": "central_spin", "t_us": 1.0,
            "bath_spins": [{"hyperfine_magnitude_khz": 37.7, "tilt_deg": 30}]}"#,
    )
    .expect("valid json");
    let model = spec.build(FrequencyConvention::Linear)?;
    println!("linear convention: ‖B‖ = {:.3e} rad/s", model.ops.b.frobenius_norm());
    Ok(())
}
