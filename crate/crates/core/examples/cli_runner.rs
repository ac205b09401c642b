//! Library-level use of the experiment runner: parse a config, run the three
//! commands and write one bundle with its manifest.

use std::path::Path;

use envsteer::cli::{cmd_simulate, cmd_spectrum, cmd_stats, parse_config, write_bundle, Experiment};
use envsteer::Result;

fn main() -> Result<()> {
    let text = r#"{
        "model": {"kind": "central_spin", "t_us": 1.0, "larmor_ratio": 0.06,
                  "bath_spins": [{"hyperfine_magnitude_khz": 37.7, "tilt_deg": 30}]},
        "run": {"m_list": [1, 10, 100, 1000], "samples": 4000, "seed": 42}
    }"#;
    let exp = Experiment::new(parse_config(text)?, Path::new("."))?;
    let mut bundle = cmd_spectrum(&exp)?;
    bundle.files.extend(cmd_simulate(&exp, None)?.files);
    bundle.files.extend(cmd_stats(&exp)?.files);

    let out = std::env::temp_dir().join("envsteer-example");
    write_bundle(&out, "simulate", &parse_config(text)?, &bundle)?;
    println!("wrote {}", out.display());
    for (name, body) in &bundle.files {
        println!("  {name:<24} {:>8} bytes", body.len());
    }
    let manifest = std::fs::read_to_string(out.join("manifest.json"))?;
    println!("{manifest}");
    Ok(())
}
