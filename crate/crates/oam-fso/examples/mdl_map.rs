//! The pairwise MDL map over the 21-charge candidate set: a small
//! ensemble version of the published weak/strong maps. Prints the map,
//! the opposite-charge diagonal, and where each row attains its minimum.
//!
//! Takes a couple of minutes; realizations can be overridden:
//!
//! ```bash
//! cargo run --release --example mdl_map [-- realizations]
//! ```

use oam_fso::field::{BeamParams, GridSpec, ModeIndex};
use oam_fso::mdl::{pairwise_mdl_map, ChannelEnsemble};
use oam_fso::propagate::{gen_channel_ensemble, ChannelSynth, LinkParams};
use oam_fso::turbulence::TurbulenceParams;

fn main() {
    let realizations: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(60);
    let grid = GridSpec::new(256, 5e-3).unwrap();
    let link = LinkParams::new(1000.0, BeamParams::paper(), grid).unwrap();
    let charges: Vec<i32> = (-10..=10).collect();
    let modes: Vec<ModeIndex> = charges.iter().map(|&c| ModeIndex::oam(c)).collect();
    let synth = ChannelSynth::new(&modes, link).unwrap();

    eprintln!("generating {realizations} strong-turbulence realizations (about 1 s each)...");
    let ens = gen_channel_ensemble(&synth, TurbulenceParams::paper_strong(), 20, 0, realizations, 5)
        .unwrap();
    let ensemble = ChannelEnsemble::new(ens).unwrap();
    let map = pairwise_mdl_map(&ensemble).unwrap();

    println!("pairwise MDL map (dB), rows p / cols q:");
    print!("      ");
    for c in &charges {
        print!("{c:>6}");
    }
    println!();
    for (i, ci) in charges.iter().enumerate() {
        print!("{ci:>+5} ");
        for j in 0..charges.len() {
            if i == j {
                print!("     -");
            } else {
                print!("{:>6.2}", map[(i, j)]);
            }
        }
        println!();
    }

    println!("\nopposite-charge pairs (-p, +p):");
    for p in 1..=10 {
        let i = charges.iter().position(|&c| c == -p).unwrap();
        let j = charges.iter().position(|&c| c == p).unwrap();
        println!("  (-{p:2}, +{p:2}): {:.3} dB", map[(i, j)]);
    }

    println!("\nrow minima (column of min per row; anti-diagonal = -p):");
    for (i, ci) in charges.iter().enumerate() {
        let (jmin, vmin) = (0..charges.len())
            .filter(|&j| j != i)
            .map(|j| (j, map[(i, j)]))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        println!("  row {ci:+3}: min at q = {:+3} ({vmin:.3} dB)", charges[jmin]);
    }
}
