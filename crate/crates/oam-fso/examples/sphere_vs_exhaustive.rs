//! Sphere decoder exactness and complexity: metric agreement with the
//! exhaustive ML reference, and node counts shrinking with SNR.
//!
//! ```bash
//! cargo run --release --example sphere_vs_exhaustive
//! ```

use nalgebra::DMatrix;
use num_complex::Complex64;
use oam_fso::decode::{ml_exhaustive, sphere_decode};
use oam_fso::seeds;
use oam_fso::stcode::{CodeSpec, Constellation};
use rand::Rng;

fn main() {
    let cst = Constellation::qpsk();
    for (spec, trials) in [
        (CodeSpec::Uncoded { modes: 2 }, 3000usize),
        (CodeSpec::Golden, 1000),
        (CodeSpec::Tast3, 100),
    ] {
        let mut rng = seeds::rng_for(1, &[spec.symbols_per_codeword() as u64]);
        let mut mismatches = 0u64;
        let mut nodes_by_snr = [0u64; 3];
        let mut count_by_snr = [0u64; 3];
        let mut exhaustive_nodes = 0u64;
        for t in 0..trials {
            let m = spec.modes();
            let h = DMatrix::from_fn(m, m, |_, _| {
                let (a, b) = seeds::normal_pair(&mut rng);
                Complex64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
            });
            let symbols: Vec<Complex64> = (0..spec.symbols_per_codeword())
                .map(|_| cst.points()[rng.gen_range(0..4)])
                .collect();
            let snr_db = [0.0, 10.0, 20.0][t % 3];
            let n0 = 10f64.powf(-snr_db / 10.0);
            let x = spec.encode(&symbols).unwrap();
            let mut y = &h * x.matrix();
            for v in y.iter_mut() {
                let (a, b) = seeds::normal_pair(&mut rng);
                *v += Complex64::new(a, b) * (n0 / 2.0).sqrt();
            }
            let ml = ml_exhaustive(&y, &h, &spec, &cst).unwrap();
            let sd = sphere_decode(&y, &h, &spec, &cst).unwrap();
            if (ml.metric - sd.metric).abs() > 1e-9 * (1.0 + ml.metric) {
                mismatches += 1;
            }
            nodes_by_snr[t % 3] += sd.nodes;
            count_by_snr[t % 3] += 1;
            exhaustive_nodes = ml.nodes;
        }
        println!(
            "{:>8} ({} real dims): {} trials, {} metric mismatches",
            spec.name(),
            2 * spec.symbols_per_codeword(),
            trials,
            mismatches
        );
        for (i, snr) in [0.0, 10.0, 20.0].iter().enumerate() {
            println!(
                "        {snr:>4} dB: mean sphere nodes {:>8.1}   (exhaustive visits {})",
                nodes_by_snr[i] as f64 / count_by_snr[i] as f64,
                exhaustive_nodes
            );
        }
    }
}
