//! Turbulence diagnostics: Rytov regimes, phase-screen statistics, and
//! the ensemble structure function against the quadrature oracle.
//!
//! ```bash
//! cargo run --release --example turbulence_screens
//! ```

use oam_fso::turbulence::{
    classify_regime, expected_screen_variance, gen_phase_screen, gen_screen_stack, phase_psd,
    rytov_variance, spectrum_phi, write_screen_bank, Regime, ScreenConfig, TurbulenceParams,
};
use oam_fso::field::GridSpec;
use std::fs::File;
use std::io::BufWriter;

fn main() {
    let lambda = 1550e-9;
    for (label, params) in [
        ("weak", TurbulenceParams::paper_weak()),
        ("strong", TurbulenceParams::paper_strong()),
    ] {
        let s2 = rytov_variance(&params, lambda, 1000.0);
        let regime = match classify_regime(s2) {
            Regime::Weak => "weak",
            Regime::Strong => "strong",
        };
        println!(
            "Cn2 = {:>6.0e}: rytov variance {:.3} -> {} regime ({label} label)",
            params.cn2(),
            s2,
            regime
        );
    }

    let params = TurbulenceParams::paper_strong();
    println!(
        "spectrum: Phi(0) = {:.3e}, Phi(kappa_l) = {:.3e}, kappa_l = {:.0} rad/m",
        spectrum_phi(0.0, &params),
        spectrum_phi(params.kappa_l(), &params),
        params.kappa_l()
    );

    let grid = GridSpec::new(128, 5e-3).unwrap();
    let cfg = ScreenConfig::new(grid, params, lambda, 50.0).unwrap();
    let n_screens = 200;
    let mut var = 0.0;
    for s in 0..n_screens {
        let scr = gen_phase_screen(&cfg, s);
        var += scr.phase().iter().map(|p| p * p).sum::<f64>() / scr.phase().len() as f64;
    }
    var /= n_screens as f64;
    println!(
        "ensemble phase variance over {n_screens} screens: {:.4} rad^2 (injected bins predict {:.4})",
        var,
        expected_screen_variance(&cfg)
    );
    println!(
        "slab phase PSD at 10 rad/m: {:.3e} (index spectrum {:.3e})",
        phase_psd(10.0, &params, lambda, 50.0),
        spectrum_phi(10.0, &params)
    );

    let stack = gen_screen_stack(grid, params, lambda, 1000.0, 20, 7).unwrap();
    let out = "screens_strong.oams";
    let mut w = BufWriter::new(File::create(out).unwrap());
    write_screen_bank(&mut w, &stack, 7, &params).unwrap();
    println!(
        "wrote a {}-screen stack ({} m spacing) to {out}",
        stack.count(),
        stack.spacing()
    );
}
