//! Monte Carlo bit-error-rate engine: noise injection, SNR sweeps,
//! stopping rules, and deterministic parallel aggregation.
//!
//! SNR is Es/N0 with a unit-energy constellation over a Frobenius-
//! normalized channel ensemble (see [`normalize_ensemble`]): the ensemble
//! mean of ||H||_F^2 / M is pinned to one, preserving per-realization
//! fading and every MDL value. Codewords are transmitted at an amplitude
//! that makes each code radiate M energy units per channel use (the
//! Silver code as published radiates 2M; see `stcode`), so coded and
//! uncoded sweeps compare at equal radiated power.
//!
//! Everything is seeded per (point, codeword) through the counter scheme
//! in `seeds`, trials are committed in fixed-size batches, and error/bit
//! tallies are integer sums, so the results are identical for any worker
//! count.

use crate::decode::{ml_exhaustive, sphere_decode, DecodeError};
use crate::propagate::ChannelMatrix;
use crate::seeds::{self, tag};
use crate::stcode::{energy_normalization, CodeSpec, Constellation};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::Write;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("empty ensemble")]
    EmptyEnsemble,
    #[error("empty SNR grid")]
    EmptySnrGrid,
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Transmit-power handling for codes whose published form does not
/// radiate M units per channel use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormalizationPolicy {
    /// Scale codewords so every code radiates M per use (default; makes
    /// Golden-vs-Silver comparisons an equal-power contest).
    #[default]
    CodebookEnergy,
    /// Transmit exactly the published codeword matrices.
    AsPrinted,
}

/// Monte Carlo configuration for one sweep.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub snr_grid_db: Vec<f64>,
    /// Stop a point once this many bit errors are recorded (paper: 100).
    pub min_bit_errors: u64,
    /// Hard cap on codewords per point; a point that hits it is flagged.
    pub max_codewords: u64,
    pub code: CodeSpec,
    pub master_seed: u64,
    pub normalization: NormalizationPolicy,
    /// Trials are committed in batches of this size; the stopping rule is
    /// evaluated only at batch boundaries so worker count cannot change
    /// the result.
    pub batch: u64,
}

impl SimConfig {
    pub fn new(code: CodeSpec, snr_grid_db: Vec<f64>, master_seed: u64) -> Result<Self, SimError> {
        if snr_grid_db.is_empty() {
            return Err(SimError::EmptySnrGrid);
        }
        let bits = code.bits_per_codeword() as u64;
        Ok(SimConfig {
            snr_grid_db,
            min_bit_errors: 100,
            max_codewords: (10_000_000 / bits).max(1),
            code,
            master_seed,
            normalization: NormalizationPolicy::CodebookEnergy,
            batch: 256,
        })
    }

    pub fn with_min_errors(mut self, n: u64) -> Self {
        self.min_bit_errors = n.max(1);
        self
    }

    pub fn with_max_codewords(mut self, n: u64) -> Self {
        self.max_codewords = n.max(1);
        self
    }
}

/// One measured point of a BER sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub snr_db: f64,
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    pub codewords: u64,
    /// The codeword cap stopped the point before `min_bit_errors`.
    pub capped: bool,
    /// Trials whose lattice was rank-deficient (decoded by the exhaustive
    /// fallback).
    pub rank_deficient: u64,
    pub wall: Duration,
}

/// Scale every realization by one global scalar c so the ensemble mean of
/// ||H||_F^2 / M equals 1. Per-realization fading and MDL are unchanged.
/// Returns the scaled ensemble and c.
pub fn normalize_ensemble(
    realizations: &[ChannelMatrix],
) -> Result<(Vec<ChannelMatrix>, f64), SimError> {
    if realizations.is_empty() {
        return Err(SimError::EmptyEnsemble);
    }
    let m = realizations[0].dim() as f64;
    let mean: f64 =
        realizations.iter().map(|h| h.frob_sq() / m).sum::<f64>() / realizations.len() as f64;
    let c = 1.0 / mean.sqrt();
    Ok((realizations.iter().map(|h| h.scaled(c)).collect(), c))
}

/// Add circular complex Gaussian noise of variance `n0` per complex
/// dimension (n0/2 per real dimension), deterministically from `rng`.
pub fn awgn(samples: &mut [Complex64], n0: f64, rng: &mut ChaCha8Rng) {
    debug_assert!(n0 >= 0.0);
    if n0 == 0.0 {
        return;
    }
    let sigma = (n0 / 2.0).sqrt();
    for s in samples {
        let (a, b) = seeds::normal_pair(rng);
        *s += Complex64::new(a * sigma, b * sigma);
    }
}

struct TrialOutcome {
    errors: u64,
    rank_deficient: bool,
}

fn run_trial(
    cfg: &SimConfig,
    constellation: &Constellation,
    channels: &[DMatrix<Complex64>],
    n0: f64,
    point_index: u64,
    cw_index: u64,
) -> TrialOutcome {
    let code = &cfg.code;
    let h = &channels[(cw_index % channels.len() as u64) as usize];

    let mut bit_rng = seeds::rng_for(cfg.master_seed, &[tag::BITS, point_index, cw_index]);
    let bits: Vec<bool> = (0..code.bits_per_codeword()).map(|_| bit_rng.gen()).collect();
    let symbols = constellation.modulate(&bits).expect("even bit count");
    let x = code.encode(&symbols).expect("symbol count");

    let mut y = h * x.matrix();
    let mut noise_rng = seeds::rng_for(cfg.master_seed, &[tag::NOISE, point_index, cw_index]);
    {
        let slice = y.as_mut_slice();
        awgn(slice, n0, &mut noise_rng);
    }

    let (decoded, rank_deficient) = match sphere_decode(&y, h, code, constellation) {
        Ok(res) => (res, false),
        Err(DecodeError::RankDeficient { .. }) => (
            ml_exhaustive(&y, h, code, constellation).expect("fallback decode"),
            true,
        ),
        Err(e) => panic!("decode failed: {e}"),
    };
    let decided = constellation.demap(&decoded.symbols);
    let errors = bits
        .iter()
        .zip(decided.iter())
        .filter(|(a, b)| a != b)
        .count() as u64;
    TrialOutcome {
        errors,
        rank_deficient,
    }
}

/// Measure one BER point: cycle channel realizations round-robin, send
/// random codewords, sphere-decode, and accumulate bit errors until the
/// stopping rule fires.
pub fn run_ber_point(
    cfg: &SimConfig,
    channels: &[ChannelMatrix],
    snr_db: f64,
    point_index: u64,
) -> Result<BerPoint, SimError> {
    if channels.is_empty() {
        return Err(SimError::EmptyEnsemble);
    }
    let start = Instant::now();
    let constellation = Constellation::qpsk();
    let n0 = 10f64.powf(-snr_db / 10.0);
    let tx_scale = match cfg.normalization {
        NormalizationPolicy::CodebookEnergy => energy_normalization(&cfg.code),
        NormalizationPolicy::AsPrinted => 1.0,
    };
    // Fold the transmit amplitude into the channel: y = (c H) X + n.
    let scaled: Vec<DMatrix<Complex64>> = channels
        .iter()
        .map(|h| h.matrix().map(|v| v * tx_scale))
        .collect();

    let bits_per_cw = cfg.code.bits_per_codeword() as u64;
    let mut errors = 0u64;
    let mut codewords = 0u64;
    let mut rank_deficient = 0u64;

    while errors < cfg.min_bit_errors && codewords < cfg.max_codewords {
        let batch = cfg.batch.min(cfg.max_codewords - codewords);
        let (batch_errors, batch_rank) = (codewords..codewords + batch)
            .into_par_iter()
            .map(|cw| {
                let out = run_trial(cfg, &constellation, &scaled, n0, point_index, cw);
                (out.errors, out.rank_deficient as u64)
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        errors += batch_errors;
        rank_deficient += batch_rank;
        codewords += batch;
    }

    let bits = codewords * bits_per_cw;
    Ok(BerPoint {
        snr_db,
        bits,
        errors,
        ber: errors as f64 / bits as f64,
        codewords,
        capped: errors < cfg.min_bit_errors,
        rank_deficient,
        wall: start.elapsed(),
    })
}

/// One BerPoint per grid SNR, seeded by grid position.
pub fn run_sweep(cfg: &SimConfig, channels: &[ChannelMatrix]) -> Result<Vec<BerPoint>, SimError> {
    cfg.snr_grid_db
        .iter()
        .enumerate()
        .map(|(i, &snr)| run_ber_point(cfg, channels, snr, i as u64))
        .collect()
}

/// Write sweep results as CSV: snr_db, bits, errors, ber, codewords,
/// capped. Formatting is fixed so identical runs are byte-identical.
pub fn write_ber_csv<W: Write>(w: &mut W, points: &[BerPoint]) -> Result<(), SimError> {
    writeln!(w, "snr_db,bits,errors,ber,codewords,capped")?;
    for p in points {
        writeln!(
            w,
            "{:.3},{},{},{:.9e},{},{}",
            p.snr_db, p.bits, p.errors, p.ber, p.codewords, p.capped as u8
        )?;
    }
    Ok(())
}

/// Closed-form QPSK bit error rate over an AWGN channel at Es/N0 = snr:
/// Q(sqrt(snr)) = erfc(sqrt(snr/2))/2. Test oracle and reference curve.
pub fn qpsk_awgn_ber(snr_db: f64) -> f64 {
    let snr = 10f64.powf(snr_db / 10.0);
    0.5 * erfc((snr / 2.0).sqrt())
}

/// Complementary error function (Abramowitz & Stegun 7.1.26, max error
/// 1.5e-7).
pub fn erfc(x: f64) -> f64 {
    let sign_neg = x < 0.0;
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.327_591_1 * x);
    let poly = t
        * (0.254_829_592
            + t * (-0.284_496_736 + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    let v = poly * (-x * x).exp();
    if sign_neg {
        2.0 - v
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ModeIndex;

    fn identity_channel(m: usize) -> Vec<ChannelMatrix> {
        let modes: Vec<ModeIndex> = (0..m as i32).map(ModeIndex::oam).collect();
        vec![ChannelMatrix::identity(modes)]
    }

    #[test]
    fn normalize_identity_and_scaled() {
        let (norm, c) = normalize_ensemble(&identity_channel(2)).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
        assert!((norm[0].frob_sq() - 2.0).abs() < 1e-12);

        let double = vec![identity_channel(2)[0].scaled(2.0)];
        let (_, c2) = normalize_ensemble(&double).unwrap();
        assert!((c2 - 0.5).abs() < 1e-12, "c = {c2}");
    }

    #[test]
    fn normalization_preserves_mdl() {
        let modes: Vec<ModeIndex> = vec![ModeIndex::oam(-1), ModeIndex::oam(1)];
        let h = ChannelMatrix::new(
            modes,
            DMatrix::from_row_slice(
                2,
                2,
                &[
                    Complex64::new(0.9, 0.1),
                    Complex64::new(0.1, -0.2),
                    Complex64::new(-0.05, 0.02),
                    Complex64::new(0.4, 0.3),
                ],
            ),
        )
        .unwrap();
        let before = crate::mdl::mdl_db(&h);
        let (norm, _) = normalize_ensemble(&[h]).unwrap();
        let after = crate::mdl::mdl_db(&norm[0]);
        assert!((before - after).abs() < 1e-10);
    }

    #[test]
    fn awgn_statistics() {
        let mut rng = seeds::rng_for(9, &[tag::NOISE, 0, 0]);
        let n = 1_000_000;
        let n0 = 0.37;
        let mut samples = vec![Complex64::default(); n];
        awgn(&mut samples, n0, &mut rng);
        let var: f64 = samples.iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64;
        assert!((var - n0).abs() < 0.01 * n0, "var {var}");
        // Re/Im uncorrelated within 3 standard errors.
        let cross: f64 = samples.iter().map(|c| c.re * c.im).sum::<f64>() / n as f64;
        let se = n0 / 2.0 / (n as f64).sqrt();
        assert!(cross.abs() < 3.0 * se, "cross {cross}, se {se}");

        let mut untouched = vec![Complex64::new(1.0, -2.0); 4];
        awgn(&mut untouched, 0.0, &mut rng);
        assert!(untouched.iter().all(|&c| c == Complex64::new(1.0, -2.0)));
    }

    #[test]
    fn qpsk_identity_matches_q_function() {
        // At the SNR where the closed form gives ~1e-3, the estimate with
        // 1000 recorded errors lands within a few percent.
        let snr = 9.8;
        let cfg = SimConfig::new(CodeSpec::Uncoded { modes: 2 }, vec![snr], 4242)
            .unwrap()
            .with_min_errors(1000);
        let point = run_ber_point(&cfg, &identity_channel(2), snr, 0).unwrap();
        let oracle = qpsk_awgn_ber(snr);
        let rel = (point.ber - oracle).abs() / oracle;
        assert!(
            rel < 0.10,
            "ber {} vs oracle {} (rel {:.3})",
            point.ber,
            oracle,
            rel
        );
        assert!(!point.capped);
    }

    #[test]
    fn noiseless_limit_is_error_free() {
        let cfg = SimConfig::new(CodeSpec::Uncoded { modes: 2 }, vec![70.0], 7)
            .unwrap()
            .with_max_codewords(500);
        let point = run_ber_point(&cfg, &identity_channel(2), 70.0, 0).unwrap();
        assert_eq!(point.errors, 0);
        assert!(point.capped);
        assert_eq!(point.codewords, 500);
    }

    #[test]
    fn deterministic_across_worker_counts() {
        let cfg = SimConfig::new(CodeSpec::Golden, vec![6.0], 99)
            .unwrap()
            .with_min_errors(50);
        let channels = identity_channel(2);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| run_ber_point(&cfg, &channels, 6.0, 0).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.bits, b.bits);
        assert_eq!(a.errors, b.errors);
        assert_eq!(a.codewords, b.codewords);
    }

    #[test]
    fn sweep_is_monotone_on_identity_channel() {
        let grid = vec![2.0, 5.0, 8.0];
        let cfg = SimConfig::new(CodeSpec::Uncoded { modes: 2 }, grid, 11)
            .unwrap()
            .with_min_errors(400);
        let points = run_sweep(&cfg, &identity_channel(2)).unwrap();
        assert_eq!(points.len(), 3);
        for w in points.windows(2) {
            assert!(w[1].ber < w[0].ber, "{} !< {}", w[1].ber, w[0].ber);
        }
    }

    #[test]
    fn csv_format_is_stable() {
        let p = BerPoint {
            snr_db: 10.0,
            bits: 2000,
            errors: 17,
            ber: 17.0 / 2000.0,
            codewords: 500,
            capped: false,
            rank_deficient: 0,
            wall: Duration::from_millis(1),
        };
        let mut buf = Vec::new();
        write_ber_csv(&mut buf, &[p]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(
            s,
            "snr_db,bits,errors,ber,codewords,capped\n10.000,2000,17,8.500000000e-3,500,0\n"
        );
    }

    #[test]
    fn erfc_reference_values() {
        assert!((erfc(0.0) - 1.0).abs() < 2e-7);
        assert!((erfc(1.0) - 0.157_299_2).abs() < 1e-6);
        assert!((erfc(-1.0) - 1.842_700_8).abs() < 1e-6);
        assert!(erfc(5.0) < 1e-10);
    }

    #[test]
    fn energy_policy_scales() {
        let a = energy_normalization(&CodeSpec::Golden);
        assert!((a - 1.0).abs() < 1e-9);
        let s = energy_normalization(&CodeSpec::Silver);
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
    }
}
