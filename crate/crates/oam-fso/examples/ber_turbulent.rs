//! Strong-turbulence BER with and without space-time coding on the
//! optimal (-10, +10) pair: a desk-scale version of the coding-gain
//! experiment.
//!
//! ```bash
//! cargo run --release --example ber_turbulent [-- realizations]
//! ```

use oam_fso::field::{BeamParams, GridSpec, ModeIndex};
use oam_fso::propagate::{gen_channel_ensemble, ChannelSynth, LinkParams};
use oam_fso::sim::{normalize_ensemble, run_sweep, SimConfig};
use oam_fso::stcode::CodeSpec;
use oam_fso::turbulence::TurbulenceParams;

fn main() {
    let realizations: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(150);
    let grid = GridSpec::new(256, 5e-3).unwrap();
    let link = LinkParams::new(1000.0, BeamParams::paper(), grid).unwrap();
    let modes = [ModeIndex::oam(-10), ModeIndex::oam(10)];
    let synth = ChannelSynth::new(&modes, link).unwrap();

    eprintln!("generating {realizations} strong-turbulence 2x2 realizations...");
    let raw = gen_channel_ensemble(&synth, TurbulenceParams::paper_strong(), 20, 0, realizations, 21)
        .unwrap();
    let (channels, scale) = normalize_ensemble(&raw).unwrap();
    eprintln!("ensemble normalization scale: {scale:.4}");

    let grid_db: Vec<f64> = (0..=14).map(|i| 2.0 * i as f64).collect();
    for code in [CodeSpec::Uncoded { modes: 2 }, CodeSpec::Golden, CodeSpec::Silver] {
        let cfg = SimConfig::new(code, grid_db.clone(), 33)
            .unwrap()
            .with_min_errors(200)
            .with_max_codewords(200_000);
        println!("--- {}", code.name());
        for p in run_sweep(&cfg, &channels).unwrap() {
            println!(
                "  snr {:>5.1} dB: ber {:.3e}  ({} errors / {} bits){}",
                p.snr_db,
                p.ber,
                p.errors,
                p.bits,
                if p.capped { " [capped]" } else { "" }
            );
        }
    }
}
