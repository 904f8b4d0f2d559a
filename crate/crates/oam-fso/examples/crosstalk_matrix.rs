//! Single-realization channel matrices: mode purity and crosstalk under
//! weak and strong turbulence, next to the turbulence-free identity.
//!
//! ```bash
//! cargo run --release --example crosstalk_matrix
//! ```

use oam_fso::field::{BeamParams, GridSpec, ModeIndex};
use oam_fso::propagate::{channel_matrix, LinkParams};
use oam_fso::turbulence::{gen_screen_stack, ScreenStack, TurbulenceParams};

fn main() {
    let grid = GridSpec::new(256, 5e-3).unwrap();
    let link = LinkParams::new(1000.0, BeamParams::paper(), grid).unwrap();
    let charges = [-10i32, -5, -1, 0, 1, 5, 10];
    let modes: Vec<ModeIndex> = charges.iter().map(|&c| ModeIndex::oam(c)).collect();

    let mut show = |label: &str, stack: &ScreenStack| {
        let h = channel_matrix(&modes, stack, &link).unwrap();
        println!("--- {label}: |h_pq|^2 (rows = received p, cols = launched q)");
        print!("        ");
        for c in &charges {
            print!(" q={c:+3}  ");
        }
        println!();
        for (p, cp) in charges.iter().enumerate() {
            print!("p={cp:+3} ");
            for q in 0..charges.len() {
                print!("  {:.3} ", h.entry(p, q).norm_sqr());
            }
            println!();
        }
        let purity: Vec<String> = (0..charges.len())
            .map(|i| format!("{:+}:{:.3}", charges[i], h.entry(i, i).norm_sqr()))
            .collect();
        println!("   mode purity: {}", purity.join("  "));
    };

    show("turbulence-free", &ScreenStack::empty());
    for (label, params, seed) in [
        ("weak (Cn2 = 1e-14)", TurbulenceParams::paper_weak(), 11),
        ("strong (Cn2 = 1e-13)", TurbulenceParams::paper_strong(), 12),
    ] {
        let stack =
            gen_screen_stack(grid, params, link.beam.lambda(), 1000.0, 20, seed).unwrap();
        show(label, &stack);
    }
}
