//! Turbulence-free baseline: Monte Carlo QPSK over the 2x2 identity
//! channel against the closed-form Gaussian-tail curve.
//!
//! ```bash
//! cargo run --release --example ber_awgn
//! ```

use oam_fso::field::ModeIndex;
use oam_fso::propagate::ChannelMatrix;
use oam_fso::sim::{qpsk_awgn_ber, run_sweep, SimConfig};
use oam_fso::stcode::CodeSpec;

fn main() {
    let modes: Vec<ModeIndex> = vec![ModeIndex::oam(-1), ModeIndex::oam(1)];
    let channel = vec![ChannelMatrix::identity(modes)];
    let grid: Vec<f64> = (0..=10).map(|i| i as f64).collect();
    let cfg = SimConfig::new(CodeSpec::Uncoded { modes: 2 }, grid, 2024)
        .unwrap()
        .with_min_errors(300);

    println!("snr_db   measured     closed-form   rel.err  codewords");
    for p in run_sweep(&cfg, &channel).unwrap() {
        let oracle = qpsk_awgn_ber(p.snr_db);
        println!(
            "{:>5.1}   {:.4e}   {:.4e}   {:+.2}%   {}",
            p.snr_db,
            p.ber,
            oracle,
            (p.ber - oracle) / oracle * 100.0,
            p.codewords
        );
    }
}
