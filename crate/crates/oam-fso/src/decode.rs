//! Exact maximum-likelihood detection: complex-to-real reduction, an
//! exhaustive reference decoder, and a Schnorr-Euchner sphere decoder.
//!
//! The two decoders take deliberately independent routes to the same
//! minimum. The exhaustive decoder enumerates symbol tuples and scores
//! `||Y - H X(s)||_F^2` in the complex codeword domain; the sphere
//! decoder works on the real lattice `y_R = G s_R` after a sorted QR.
//! Their metric agreement on random instances is the module's central
//! contract.

use crate::stcode::{
    equivalent_channel, stack_received, unstack_symbols, CodeError, CodeSpec, Constellation,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("search space 4^{symbols} exceeds the exhaustive guard (2^24 candidates)")]
    SearchSpaceTooLarge { symbols: usize },
    #[error("lattice generator is rank-deficient (|r_{level},{level}| = {pivot:.3e})")]
    RankDeficient { level: usize, pivot: f64 },
    #[error("received block is {rows}x{cols}, code expects {m}x{t}")]
    BlockShape {
        rows: usize,
        cols: usize,
        m: usize,
        t: usize,
    },
    #[error(transparent)]
    Code(#[from] CodeError),
}

/// Real lattice view of a decoding instance: generator of size
/// 2MT x 2K and the two per-coordinate alphabet levels.
#[derive(Debug, Clone)]
pub struct RealLattice {
    pub generator: DMatrix<f64>,
    pub levels: [f64; 2],
}

impl RealLattice {
    pub fn for_instance(
        h: &DMatrix<Complex64>,
        spec: &CodeSpec,
        constellation: &Constellation,
    ) -> Result<Self, DecodeError> {
        Ok(RealLattice {
            generator: equivalent_channel(h, spec)?,
            levels: constellation.real_levels(),
        })
    }
}

/// Decoder output: estimated symbols, achieved squared distance, and the
/// number of search nodes expanded.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub symbols: Vec<Complex64>,
    pub metric: f64,
    pub nodes: u64,
}

/// Eq.-(7) style complex-to-real reduction of an M x M system:
/// `H_eq = [Re(H) -Im(H); Im(H) Re(H)]`, `y_R = [Re(y); Im(y)]`.
pub fn complex_to_real(h: &DMatrix<Complex64>, y: &[Complex64]) -> (DMatrix<f64>, Vec<f64>) {
    let (m, n) = (h.nrows(), h.ncols());
    let mut heq = DMatrix::<f64>::zeros(2 * m, 2 * n);
    for r in 0..m {
        for c in 0..n {
            let v = h[(r, c)];
            heq[(r, c)] = v.re;
            heq[(r, n + c)] = -v.im;
            heq[(m + r, c)] = v.im;
            heq[(m + r, n + c)] = v.re;
        }
    }
    let mut yr = Vec::with_capacity(2 * y.len());
    yr.extend(y.iter().map(|c| c.re));
    yr.extend(y.iter().map(|c| c.im));
    (heq, yr)
}

fn check_block(
    y: &DMatrix<Complex64>,
    h: &DMatrix<Complex64>,
    spec: &CodeSpec,
) -> Result<(), DecodeError> {
    let (m, t) = (spec.modes(), spec.uses());
    if y.nrows() != m || y.ncols() != t || h.nrows() != m || h.ncols() != m {
        return Err(DecodeError::BlockShape {
            rows: y.nrows(),
            cols: y.ncols(),
            m,
            t,
        });
    }
    Ok(())
}

/// Globally optimal decode by depth-first enumeration of every symbol
/// tuple, scoring in the complex codeword domain. Ties resolve to the
/// first candidate in lexicographic symbol order (constellation point 0
/// first), so the all-ties case returns the all-`(+1+i)/sqrt(2)` vector.
pub fn ml_exhaustive(
    y: &DMatrix<Complex64>,
    h: &DMatrix<Complex64>,
    spec: &CodeSpec,
    constellation: &Constellation,
) -> Result<DecodeResult, DecodeError> {
    check_block(y, h, spec)?;
    let k = spec.symbols_per_codeword();
    if 2 * k > 24 {
        return Err(DecodeError::SearchSpaceTooLarge { symbols: k });
    }
    let points = constellation.points();

    // Real dispersion images of each symbol: H * encode(e_j) for the real
    // part and H * encode(i e_j) for the imaginary part. Codes with
    // conjugations (Silver) are only R-linear, so the complex parts must
    // be dispersed separately. Residuals build incrementally during the
    // DFS; this path uses only the encoder, staying independent of the
    // real-lattice machinery the sphere decoder rests on.
    let mut basis_re = Vec::with_capacity(k);
    let mut basis_im = Vec::with_capacity(k);
    let mut symbols = vec![Complex64::default(); k];
    for j in 0..k {
        for s in symbols.iter_mut() {
            *s = Complex64::default();
        }
        symbols[j] = Complex64::new(1.0, 0.0);
        basis_re.push(h * spec.encode(&symbols)?.matrix());
        symbols[j] = Complex64::i();
        basis_im.push(h * spec.encode(&symbols)?.matrix());
        symbols[j] = Complex64::default();
    }

    let mut residual: Vec<Complex64> = y.iter().cloned().collect();
    let mut best_metric = f64::INFINITY;
    let mut best_idx = vec![0usize; k];
    let mut idx = vec![0usize; k];
    let mut nodes = 0u64;

    // Iterative DFS in lexicographic order: depth j tries points 0..3.
    fn descend(
        depth: usize,
        k: usize,
        points: &[Complex64; 4],
        basis_re: &[DMatrix<Complex64>],
        basis_im: &[DMatrix<Complex64>],
        residual: &mut [Complex64],
        idx: &mut [usize],
        best_metric: &mut f64,
        best_idx: &mut [usize],
        nodes: &mut u64,
    ) {
        for p in 0..4usize {
            *nodes += 1;
            idx[depth] = p;
            let s = points[p];
            let bre = &basis_re[depth];
            let bim = &basis_im[depth];
            for ((r, re_v), im_v) in residual.iter_mut().zip(bre.iter()).zip(bim.iter()) {
                *r -= s.re * re_v + s.im * im_v;
            }
            if depth + 1 == k {
                let metric: f64 = residual.iter().map(|c| c.norm_sqr()).sum();
                if metric < *best_metric {
                    *best_metric = metric;
                    best_idx.copy_from_slice(idx);
                }
            } else {
                descend(
                    depth + 1,
                    k,
                    points,
                    basis_re,
                    basis_im,
                    residual,
                    idx,
                    best_metric,
                    best_idx,
                    nodes,
                );
            }
            for ((r, re_v), im_v) in residual.iter_mut().zip(bre.iter()).zip(bim.iter()) {
                *r += s.re * re_v + s.im * im_v;
            }
        }
    }

    descend(
        0,
        k,
        points,
        &basis_re,
        &basis_im,
        &mut residual,
        &mut idx,
        &mut best_metric,
        &mut best_idx,
        &mut nodes,
    );

    Ok(DecodeResult {
        symbols: best_idx.iter().map(|&p| points[p]).collect(),
        metric: best_metric,
        nodes,
    })
}

/// QR with greedy column pivoting (smallest residual norm first), the
/// sorted-QR preprocessing that keeps sphere-decoder node counts down.
/// Returns (q, r, perm) with `g * P = Q R`, `perm[level] = original
/// column`.
fn sorted_qr(g: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, Vec<usize>) {
    let rows = g.nrows();
    let cols = g.ncols();
    let mut q = g.clone_owned();
    let mut r = DMatrix::<f64>::zeros(cols, cols);
    let mut perm: Vec<usize> = (0..cols).collect();

    for k in 0..cols {
        // Pick the remaining column with the smallest residual norm.
        let mut best = k;
        let mut best_norm = f64::INFINITY;
        for j in k..cols {
            let norm: f64 = (0..rows).map(|i| q[(i, j)] * q[(i, j)]).sum();
            if norm < best_norm {
                best_norm = norm;
                best = j;
            }
        }
        if best != k {
            q.swap_columns(k, best);
            r.swap_columns(k, best);
            perm.swap(k, best);
        }
        let norm = best_norm.sqrt();
        r[(k, k)] = norm;
        if norm > 0.0 {
            for i in 0..rows {
                q[(i, k)] /= norm;
            }
        }
        for j in (k + 1)..cols {
            let dot: f64 = (0..rows).map(|i| q[(i, k)] * q[(i, j)]).sum();
            r[(k, j)] = dot;
            for i in 0..rows {
                let qk = q[(i, k)];
                q[(i, j)] -= dot * qk;
            }
        }
    }
    (q, r, perm)
}

/// Exact-ML sphere decoder on the real lattice: sorted QR preprocessing,
/// depth-first search with per-level Schnorr-Euchner ordering (nearest
/// level first), and radius shrink on every improved leaf. The first
/// depth-first descent is the Babai successive-nearest-plane point, which
/// sets the initial radius.
pub fn sphere_decode(
    y: &DMatrix<Complex64>,
    h: &DMatrix<Complex64>,
    spec: &CodeSpec,
    constellation: &Constellation,
) -> Result<DecodeResult, DecodeError> {
    check_block(y, h, spec)?;
    let lattice = RealLattice::for_instance(h, spec, constellation)?;
    let y_r = stack_received(y);
    let (best_real, metric, nodes) = sphere_decode_real(&lattice, &y_r)?;
    Ok(DecodeResult {
        symbols: unstack_symbols(&best_real),
        metric,
        nodes,
    })
}

/// Sphere decoder on a prepared real lattice; returns the real symbol
/// vector in generator column order.
pub fn sphere_decode_real(
    lattice: &RealLattice,
    y_r: &[f64],
) -> Result<(Vec<f64>, f64, u64), DecodeError> {
    let g = &lattice.generator;
    let n = g.ncols();
    assert_eq!(y_r.len(), g.nrows(), "observation length mismatch");

    let (q, r, perm) = sorted_qr(g);
    let max_pivot = (0..n).map(|i| r[(i, i)].abs()).fold(0.0f64, f64::max);
    for level in 0..n {
        let pivot = r[(level, level)].abs();
        if !(pivot > 1e-12 * max_pivot.max(1e-300)) {
            return Err(DecodeError::RankDeficient { level, pivot });
        }
    }

    // z = Q^T y; for tall generators the out-of-range residual is a
    // constant added back into reported metrics.
    let mut z = vec![0.0f64; n];
    for (j, zj) in z.iter_mut().enumerate() {
        *zj = (0..g.nrows()).map(|i| q[(i, j)] * y_r[i]).sum();
    }
    let y_norm_sq: f64 = y_r.iter().map(|v| v * v).sum();
    let z_norm_sq: f64 = z.iter().map(|v| v * v).sum();
    let offset = (y_norm_sq - z_norm_sq).max(0.0);

    let levels = lattice.levels;
    let mut best_metric = f64::INFINITY;
    let mut best = vec![0.0f64; n];
    let mut current = vec![0.0f64; n];
    let mut nodes = 0u64;

    // Iterative DFS over levels n-1 .. 0. choice[i] in {0, 1} indexes the
    // SE-ordered candidates at level i; order[i] caches that ordering.
    let mut depth = n - 1;
    let mut choice = vec![0usize; n];
    let mut order = vec![[0.0f64; 2]; n];
    let mut partial = vec![0.0f64; n + 1]; // partial[i] = distance above level i

    'outer: loop {
        // Entering `depth` with choice[depth] already set; compute its
        // candidate ordering lazily on first entry.
        if choice[depth] == 0 {
            let mut interf = z[depth];
            for j in (depth + 1)..n {
                interf -= r[(depth, j)] * current[j];
            }
            let center = interf / r[(depth, depth)];
            let (near, far) = if (levels[0] - center).abs() <= (levels[1] - center).abs() {
                (levels[0], levels[1])
            } else {
                (levels[1], levels[0])
            };
            order[depth] = [near, far];
        }

        while choice[depth] < 2 {
            let cand = order[depth][choice[depth]];
            choice[depth] += 1;
            nodes += 1;
            let mut seg = z[depth];
            for j in (depth + 1)..n {
                seg -= r[(depth, j)] * current[j];
            }
            seg -= r[(depth, depth)] * cand;
            let dist = partial[depth + 1] + seg * seg;
            if dist > best_metric {
                continue; // prune: no point below can improve
            }
            current[depth] = cand;
            if depth == 0 {
                if dist < best_metric {
                    best_metric = dist;
                    best.copy_from_slice(&current);
                }
                continue;
            }
            partial[depth] = dist;
            depth -= 1;
            choice[depth] = 0;
            continue 'outer;
        }

        // Both candidates exhausted at this level: backtrack.
        if depth == n - 1 {
            break;
        }
        depth += 1;
    }

    // Undo the column permutation.
    let mut s_real = vec![0.0f64; n];
    for (level, &col) in perm.iter().enumerate() {
        s_real[col] = best[level];
    }
    Ok((s_real, best_metric + offset, nodes))
}
