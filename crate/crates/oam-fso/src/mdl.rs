//! Mode-dependent loss statistics and the MDL-minimizing subset search.
//!
//! MDL of a channel matrix is the decibel ratio of the extreme eigenvalues
//! of H^H H (squared singular values of H, i.e. power gains). It is
//! invariant under global complex scaling and under unitary factors on
//! either side.
//!
//! Two ensemble statistics are provided. [`average_mdl`] is the
//! arithmetic mean of per-realization MDL; it is dominated by diffraction
//! -induced fade asymmetries and does not resolve the structure mode
//! selection needs at desk-scale ensembles. [`mean_power_matrix`] feeds
//! the subset search instead: the entrywise root of the ensemble-mean
//! power coupling, exactly symmetrized under charge negation (reflecting
//! every screen realization in y maps h_pq to h_{-p,-q} with equal
//! probability, so the symmetrized estimator is unbiased with strictly
//! smaller variance). The MDL of that matrix recovers the published
//! selection structure: anti-diagonal minima and MDL falling as the
//! opposite-charge pair's order grows.

use crate::propagate::ChannelMatrix;
use itertools::Itertools;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MdlError {
    #[error("charge {0} is not in the ensemble mode set")]
    UnknownCharge(i32),
    #[error("empty ensemble")]
    EmptyEnsemble,
    #[error("subset size {m} exceeds candidate set size {s}")]
    SubsetTooLarge { m: usize, s: usize },
    #[error("inconsistent mode ordering across realizations")]
    InconsistentModes,
}

/// Relative floor under which the smallest singular value marks the
/// matrix rank-deficient.
const RANK_TOL: f64 = 1e-12;

/// MDL in dB: `10 log10(lambda_max / lambda_min)` over eigenvalues of
/// H^H H. Returns `f64::INFINITY` when H is numerically rank-deficient
/// (smallest singular value below 1e-12 of the largest); callers treat
/// the infinity as a flag, not an error.
pub fn mdl_db(h: &ChannelMatrix) -> f64 {
    mdl_db_matrix(h.matrix())
}

pub fn mdl_db_matrix(h: &DMatrix<Complex64>) -> f64 {
    let svals = h.clone().singular_values();
    let max = svals.iter().cloned().fold(f64::MIN, f64::max);
    let min = svals.iter().cloned().fold(f64::MAX, f64::min);
    if !(min > RANK_TOL * max) {
        return f64::INFINITY;
    }
    20.0 * (max / min).log10()
}

/// A sorted set of distinct topological charges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeSet {
    charges: Vec<i32>,
}

impl ModeSet {
    pub fn new(mut charges: Vec<i32>) -> Self {
        charges.sort_unstable();
        charges.dedup();
        ModeSet { charges }
    }

    pub fn charges(&self) -> &[i32] {
        &self.charges
    }

    pub fn len(&self) -> usize {
        self.charges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charges.is_empty()
    }
}

impl std::fmt::Display for ModeSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{{}}}", self.charges.iter().map(|c| format!("{c:+}")).join(","))
    }
}

/// A set of channel realizations over one fixed candidate mode set.
#[derive(Debug, Clone)]
pub struct ChannelEnsemble {
    charges: Vec<i32>,
    realizations: Vec<ChannelMatrix>,
}

impl ChannelEnsemble {
    pub fn new(realizations: Vec<ChannelMatrix>) -> Result<Self, MdlError> {
        let first = realizations.first().ok_or(MdlError::EmptyEnsemble)?;
        let charges = first.charges();
        if realizations.iter().any(|h| h.charges() != charges) {
            return Err(MdlError::InconsistentModes);
        }
        Ok(ChannelEnsemble {
            charges,
            realizations,
        })
    }

    pub fn charges(&self) -> &[i32] {
        &self.charges
    }

    pub fn len(&self) -> usize {
        self.realizations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.realizations.is_empty()
    }

    pub fn realizations(&self) -> &[ChannelMatrix] {
        &self.realizations
    }

    fn indices_of(&self, subset: &ModeSet) -> Result<Vec<usize>, MdlError> {
        subset
            .charges()
            .iter()
            .map(|c| {
                self.charges
                    .iter()
                    .position(|x| x == c)
                    .ok_or(MdlError::UnknownCharge(*c))
            })
            .collect()
    }
}

/// Restrict a channel matrix to the rows and columns of `subset`,
/// preserving order.
pub fn submatrix(h: &ChannelMatrix, subset: &ModeSet) -> Result<ChannelMatrix, MdlError> {
    let charges = h.charges();
    let idx: Vec<usize> = subset
        .charges()
        .iter()
        .map(|c| {
            charges
                .iter()
                .position(|x| x == c)
                .ok_or(MdlError::UnknownCharge(*c))
        })
        .collect::<Result<_, _>>()?;
    let m = idx.len();
    let sub = DMatrix::from_fn(m, m, |p, q| h.entry(idx[p], idx[q]));
    let modes = idx.iter().map(|&i| h.modes()[i]).collect();
    Ok(ChannelMatrix::new(modes, sub).expect("square by construction"))
}

/// Ensemble statistics of per-realization MDL restricted to a subset.
#[derive(Debug, Clone, PartialEq)]
pub struct MdlStats {
    pub mean_db: f64,
    pub stderr_db: f64,
    /// Realizations whose submatrix was rank-deficient; excluded from the
    /// mean.
    pub excluded: usize,
    pub used: usize,
}

/// Arithmetic mean (and standard error) of per-realization MDL in dB over
/// the ensemble, restricted to `subset`. Rank-deficient realizations are
/// counted and excluded.
pub fn average_mdl(ensemble: &ChannelEnsemble, subset: &ModeSet) -> Result<MdlStats, MdlError> {
    if ensemble.is_empty() {
        return Err(MdlError::EmptyEnsemble);
    }
    let idx = ensemble.indices_of(subset)?;
    let m = idx.len();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut used = 0usize;
    let mut excluded = 0usize;
    let mut sub = DMatrix::<Complex64>::zeros(m, m);
    for h in &ensemble.realizations {
        for (p, &ip) in idx.iter().enumerate() {
            for (q, &iq) in idx.iter().enumerate() {
                sub[(p, q)] = h.entry(ip, iq);
            }
        }
        let v = mdl_db_matrix(&sub);
        if v.is_finite() {
            sum += v;
            sum_sq += v * v;
            used += 1;
        } else {
            excluded += 1;
        }
    }
    if used == 0 {
        return Ok(MdlStats {
            mean_db: f64::INFINITY,
            stderr_db: f64::INFINITY,
            excluded,
            used,
        });
    }
    let mean = sum / used as f64;
    let var = (sum_sq / used as f64 - mean * mean).max(0.0);
    let stderr = if used > 1 {
        (var / (used - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(MdlStats {
        mean_db: mean,
        stderr_db: stderr,
        excluded,
        used,
    })
}

/// Ensemble-mean crosstalk fraction of a subset: off-diagonal power over
/// total power of the restricted matrix. Used as the first tie-breaker in
/// the subset search.
pub fn average_crosstalk(ensemble: &ChannelEnsemble, subset: &ModeSet) -> Result<f64, MdlError> {
    if ensemble.is_empty() {
        return Err(MdlError::EmptyEnsemble);
    }
    let idx = ensemble.indices_of(subset)?;
    let mut acc = 0.0;
    for h in &ensemble.realizations {
        let mut off = 0.0;
        let mut tot = 0.0;
        for (p, &ip) in idx.iter().enumerate() {
            for (q, &iq) in idx.iter().enumerate() {
                let pw = h.entry(ip, iq).norm_sqr();
                tot += pw;
                if p != q {
                    off += pw;
                }
            }
        }
        if tot > 0.0 {
            acc += off / tot;
        }
    }
    Ok(acc / ensemble.len() as f64)
}

/// Entrywise root of the ensemble-mean power coupling,
/// `sqrt(mean |h_pq|^2)`, symmetrized under (p, q) -> (-p, -q) whenever
/// the candidate charge set is closed under negation. The symmetrization
/// exploits an exact distributional symmetry of the screen ensemble
/// (reflection in y), so it reduces estimator variance without bias; in
/// particular opposite-charge diagonal gains come out exactly equal, as
/// they are in the infinite ensemble.
pub fn mean_power_matrix(ensemble: &ChannelEnsemble) -> DMatrix<f64> {
    let charges = ensemble.charges();
    let n = charges.len();
    let mut p2 = DMatrix::<f64>::zeros(n, n);
    for h in ensemble.realizations() {
        for q in 0..n {
            for p in 0..n {
                p2[(p, q)] += h.entry(p, q).norm_sqr();
            }
        }
    }
    p2 /= ensemble.len() as f64;

    let neg_index: Option<Vec<usize>> = charges
        .iter()
        .map(|c| charges.iter().position(|x| *x == -c))
        .collect();
    if let Some(neg) = neg_index {
        let sym = DMatrix::from_fn(n, n, |p, q| 0.5 * (p2[(p, q)] + p2[(neg[p], neg[q])]));
        p2 = sym;
    }
    p2.map(f64::sqrt)
}

/// MDL of the mean-power matrix restricted to `subset`: the statistic the
/// subset search minimizes.
pub fn ensemble_mdl(
    ensemble: &ChannelEnsemble,
    pbar: &DMatrix<f64>,
    subset: &ModeSet,
) -> Result<f64, MdlError> {
    let idx = ensemble.indices_of(subset)?;
    Ok(submatrix_mdl(pbar, &idx))
}

fn submatrix_mdl(pbar: &DMatrix<f64>, idx: &[usize]) -> f64 {
    let m = idx.len();
    let sub = DMatrix::from_fn(m, m, |p, q| pbar[(idx[p], idx[q])]);
    let svals = sub.singular_values();
    let max = svals.iter().cloned().fold(f64::MIN, f64::max);
    let min = svals.iter().cloned().fold(f64::MAX, f64::min);
    if !(min > RANK_TOL * max) {
        return f64::INFINITY;
    }
    20.0 * (max / min).log10()
}

/// Bootstrap standard error of [`ensemble_mdl`] for one subset:
/// `resamples` draws of the realization index set with replacement.
pub fn ensemble_mdl_stderr(
    ensemble: &ChannelEnsemble,
    subset: &ModeSet,
    resamples: usize,
    seed: u64,
) -> Result<f64, MdlError> {
    use rand::Rng;
    let idx = ensemble.indices_of(subset)?;
    let n_real = ensemble.len();
    let charges = ensemble.charges();
    let n = charges.len();
    let neg: Option<Vec<usize>> = charges
        .iter()
        .map(|c| charges.iter().position(|x| *x == -c))
        .collect();
    let mut rng = crate::seeds::rng_for(seed, &[0x424f_4f54]);
    let mut vals = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut p2 = DMatrix::<f64>::zeros(n, n);
        for _ in 0..n_real {
            let h = &ensemble.realizations()[rng.gen_range(0..n_real)];
            for q in 0..n {
                for p in 0..n {
                    p2[(p, q)] += h.entry(p, q).norm_sqr();
                }
            }
        }
        p2 /= n_real as f64;
        if let Some(neg) = &neg {
            p2 = DMatrix::from_fn(n, n, |p, q| 0.5 * (p2[(p, q)] + p2[(neg[p], neg[q])]));
        }
        let pbar = p2.map(f64::sqrt);
        vals.push(submatrix_mdl(&pbar, &idx));
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
    Ok(var.sqrt())
}

/// Result of the exhaustive subset search.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub modes: ModeSet,
    /// The minimized statistic: MDL of the symmetrized mean-power matrix
    /// restricted to the winning subset.
    pub mdl_db: f64,
    /// Per-realization MDL statistics of the winning subset, for
    /// reporting alongside the objective.
    pub stats: MdlStats,
    /// Ensemble-mean crosstalk fraction of the winning subset.
    pub crosstalk: f64,
    /// Number of subsets examined, C(|S|, M).
    pub subsets_searched: usize,
}

/// Exhaustive search over all C(|S|, M) subsets for the one minimizing
/// the mean-power-matrix MDL. Ties break on (1) smaller ensemble-mean
/// crosstalk, then (2) lexicographic charge order; the total order makes
/// the result independent of enumeration schedule.
pub fn select_modes(ensemble: &ChannelEnsemble, m: usize) -> Result<Selection, MdlError> {
    let s = ensemble.charges().to_vec();
    if m > s.len() {
        return Err(MdlError::SubsetTooLarge { m, s: s.len() });
    }
    let pbar = mean_power_matrix(ensemble);
    let index_combos: Vec<Vec<usize>> = (0..s.len()).combinations(m).collect();
    let evaluated: Vec<(Vec<usize>, f64)> = index_combos
        .into_par_iter()
        .map(|idx| {
            let v = submatrix_mdl(&pbar, &idx);
            (idx, v)
        })
        .collect();
    // Total order: objective, then crosstalk, then charges. Crosstalk is
    // only computed for candidates tied on the objective.
    let min_val = evaluated
        .iter()
        .map(|(_, v)| *v)
        .fold(f64::INFINITY, f64::min);
    let best = evaluated
        .into_iter()
        .filter(|(_, v)| *v <= min_val)
        .map(|(idx, v)| {
            let charges: Vec<i32> = idx.iter().map(|&i| s[i]).collect();
            let subset = ModeSet::new(charges);
            let xt = average_crosstalk(ensemble, &subset).expect("subset from candidate set");
            (subset, v, xt)
        })
        .min_by(|a, b| {
            (a.1, a.2, a.0.charges())
                .partial_cmp(&(b.1, b.2, b.0.charges()))
                .expect("comparable")
        })
        .expect("at least one subset");
    let stats = average_mdl(ensemble, &best.0)?;
    let searched = binomial(s.len(), m);
    Ok(Selection {
        modes: best.0,
        mdl_db: best.1,
        stats,
        crosstalk: best.2,
        subsets_searched: searched,
    })
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// The 21x21-style pairwise MDL map over the candidate set: entry (i, j)
/// is the mean-power-matrix MDL of the pair {charges[i], charges[j]}; the
/// diagonal is NaN.
pub fn pairwise_mdl_map(ensemble: &ChannelEnsemble) -> Result<DMatrix<f64>, MdlError> {
    let n = ensemble.charges().len();
    let pbar = mean_power_matrix(ensemble);
    let mut map = DMatrix::from_element(n, n, f64::NAN);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = submatrix_mdl(&pbar, &[i, j]);
            map[(i, j)] = v;
            map[(j, i)] = v;
        }
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ModeIndex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cm(charges: &[i32], entries: &[Complex64]) -> ChannelMatrix {
        let m = charges.len();
        let modes = charges.iter().map(|&c| ModeIndex::oam(c)).collect();
        ChannelMatrix::new(modes, DMatrix::from_row_slice(m, m, entries)).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_has_zero_mdl() {
        let h = ChannelMatrix::identity(vec![ModeIndex::oam(-1), ModeIndex::oam(1)]);
        assert!(mdl_db(&h).abs() < 1e-12);
    }

    #[test]
    fn diag_2_1_is_about_6db() {
        let h = cm(
            &[-1, 1],
            &[c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        );
        // Eigenvalues of H^H H are 4 and 1.
        assert!((mdl_db(&h) - 10.0 * 4f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn scale_invariance() {
        let h = cm(
            &[-1, 1],
            &[c(0.3, 0.1), c(-0.2, 0.4), c(0.05, -0.3), c(0.8, 0.2)],
        );
        let scaled = h.scaled(3.7);
        assert!((mdl_db(&h) - mdl_db(&scaled)).abs() < 1e-10);
    }

    #[test]
    fn unitary_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut rnd = || c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        let h = DMatrix::from_fn(3, 3, |_, _| rnd());
        // Householder-ish unitary from QR of a random matrix.
        let q = DMatrix::from_fn(3, 3, |_, _| rnd()).qr().q();
        let a = mdl_db_matrix(&h);
        let b = mdl_db_matrix(&(q.clone() * &h));
        let d = mdl_db_matrix(&(&h * q));
        assert!((a - b).abs() < 1e-8, "{a} {b}");
        assert!((a - d).abs() < 1e-8, "{a} {d}");
    }

    #[test]
    fn rank_deficient_is_infinite_flag() {
        let h = cm(
            &[-1, 1],
            &[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)],
        );
        assert!(mdl_db(&h).is_infinite());
    }

    #[test]
    fn submatrix_selection_semantics() {
        let h = cm(
            &[-1, 0, 1],
            &[
                c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0),
                c(4.0, 0.0), c(5.0, 0.0), c(6.0, 0.0),
                c(7.0, 0.0), c(8.0, 0.0), c(9.0, 0.0),
            ],
        );
        let sub = submatrix(&h, &ModeSet::new(vec![-1, 1])).unwrap();
        assert_eq!(sub.entry(0, 0), c(1.0, 0.0));
        assert_eq!(sub.entry(0, 1), c(3.0, 0.0));
        assert_eq!(sub.entry(1, 0), c(7.0, 0.0));
        assert_eq!(sub.entry(1, 1), c(9.0, 0.0));

        let full = submatrix(&h, &ModeSet::new(vec![-1, 0, 1])).unwrap();
        assert_eq!(full, h);

        assert!(matches!(
            submatrix(&h, &ModeSet::new(vec![5])),
            Err(MdlError::UnknownCharge(5))
        ));
    }

    #[test]
    fn submatrix_mdl_has_no_ordering_vs_parent() {
        // Random search for both directions: some submatrices beat the
        // parent, some lose.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut saw_less = false;
        let mut saw_more = false;
        for _ in 0..200 {
            let h = DMatrix::from_fn(3, 3, |_, _| {
                c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            let modes = vec![ModeIndex::oam(-1), ModeIndex::oam(0), ModeIndex::oam(1)];
            let parent = ChannelMatrix::new(modes, h).unwrap();
            let sub = submatrix(&parent, &ModeSet::new(vec![-1, 1])).unwrap();
            let (a, b) = (mdl_db(&sub), mdl_db(&parent));
            if a < b {
                saw_less = true;
            }
            if a > b {
                saw_more = true;
            }
        }
        assert!(saw_less && saw_more);
    }

    #[test]
    fn average_mdl_of_identical_matrices() {
        let h = cm(
            &[-1, 1],
            &[c(0.9, 0.1), c(0.1, 0.0), c(0.0, 0.1), c(0.7, -0.2)],
        );
        let ens = ChannelEnsemble::new(vec![h.clone(); 5]).unwrap();
        let stats = average_mdl(&ens, &ModeSet::new(vec![-1, 1])).unwrap();
        assert!((stats.mean_db - mdl_db(&h)).abs() < 1e-12);
        assert_eq!(stats.stderr_db, 0.0);
        assert_eq!(stats.used, 5);
        assert_eq!(stats.excluded, 0);
    }

    #[test]
    fn average_mdl_excludes_rank_deficient() {
        let good = cm(
            &[-1, 1],
            &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.5, 0.0)],
        );
        let bad = cm(
            &[-1, 1],
            &[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)],
        );
        let ens = ChannelEnsemble::new(vec![good.clone(), bad, good.clone()]).unwrap();
        let stats = average_mdl(&ens, &ModeSet::new(vec![-1, 1])).unwrap();
        assert_eq!(stats.excluded, 1);
        assert_eq!(stats.used, 2);
        assert!((stats.mean_db - mdl_db(&good)).abs() < 1e-12);
    }

    #[test]
    fn select_modes_finds_planted_optimum() {
        // Plant an ensemble where the {-2, 2} pair is perfectly balanced
        // and everything else is lopsided.
        let charges = vec![-2, -1, 0, 1, 2];
        let modes: Vec<ModeIndex> = charges.iter().map(|&c| ModeIndex::oam(c)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut reals = Vec::new();
        for _ in 0..50 {
            let mut h = DMatrix::<Complex64>::zeros(5, 5);
            for i in 0..5 {
                let gain = match charges[i] {
                    -2 | 2 => 0.8,
                    -1 | 1 => 0.5 + 0.4 * rng.gen::<f64>(),
                    _ => 0.3 + 0.2 * rng.gen::<f64>(),
                };
                h[(i, i)] = c(gain, 0.0);
            }
            reals.push(ChannelMatrix::new(modes.clone(), h).unwrap());
        }
        let ens = ChannelEnsemble::new(reals).unwrap();
        let sel = select_modes(&ens, 2).unwrap();
        assert_eq!(sel.modes.charges(), &[-2, 2]);
        assert_eq!(sel.subsets_searched, 10);
        assert!(sel.stats.mean_db < 1e-9);
    }

    #[test]
    fn pairwise_map_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let charges = vec![-1, 0, 1];
        let modes: Vec<ModeIndex> = charges.iter().map(|&c| ModeIndex::oam(c)).collect();
        let reals: Vec<ChannelMatrix> = (0..20)
            .map(|_| {
                let h = DMatrix::from_fn(3, 3, |_, _| {
                    c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
                });
                ChannelMatrix::new(modes.clone(), h).unwrap()
            })
            .collect();
        let ens = ChannelEnsemble::new(reals).unwrap();
        let map = pairwise_mdl_map(&ens).unwrap();
        for i in 0..3 {
            assert!(map[(i, i)].is_nan());
            for j in 0..3 {
                if i != j {
                    assert_eq!(map[(i, j)], map[(j, i)]);
                }
            }
        }
    }

    #[test]
    fn binomial_counts() {
        assert_eq!(binomial(21, 2), 210);
        assert_eq!(binomial(21, 3), 1330);
        assert_eq!(binomial(21, 5), 20349);
    }
}
