//! Operator 2-norms of sparse matrices.
//!
//! [`power_norm`] is plain power iteration on `A*A`. [`op_norm`] adds exact
//! shortcuts (generalized permutations, small dense Grams) and certifies
//! large results by Cholesky tests on the banded Gram matrix, which also
//! rescues the clustered-top-singular-value case where power iteration
//! stalls.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::banded::interleave;
use super::dense;
use super::lapack;
use super::sparse::Csr;
use crate::error::{Error, Result};

/// Largest dimension handled by a dense Gram eigensolve.
pub const DENSE_LIMIT: usize = 256;

/// Largest Gram bandwidth accepted by the banded certificate.
const BAND_LIMIT: usize = 96;

#[derive(Debug, Clone, Copy)]
pub struct PowerOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
            seed: 0x5eed,
        }
    }
}

/// Power iteration on `A*A`. Stops when the relative change of the
/// estimate falls below `tol`; errors with the last change otherwise.
pub fn power_norm(a: &Csr, opts: PowerOptions) -> Result<f64> {
    let (est, conv, it, change) = power_core(a, opts);
    if conv {
        Ok(est)
    } else {
        Err(Error::NoConvergence {
            iterations: it,
            residual: change,
        })
    }
}

fn power_core(a: &Csr, opts: PowerOptions) -> (f64, bool, usize, f64) {
    let n = a.cols();
    if n == 0 || a.rows() == 0 {
        return (0.0, true, 0, 0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: Vec<C64> = (0..n)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let mut est = 0.0;
    let mut change = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let nv = super::banded::norm(&v);
        if nv == 0.0 {
            return (0.0, true, it, 0.0);
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let av = a.matvec(&v);
        let w = a.adjoint_matvec(&av);
        let s = super::banded::norm(&av);
        change = if s > 0.0 { (s - est).abs() / s } else { 0.0 };
        est = s;
        v = w;
        if change < opts.tol {
            return (est, true, it, change);
        }
    }
    (est, false, opts.max_iter, change)
}

/// Largest singular value of `a`.
pub fn op_norm(a: &Csr) -> Result<f64> {
    let a = a.prune();
    if a.nnz() == 0 {
        return Ok(0.0);
    }
    if let Some(v) = generalized_permutation_norm(&a) {
        return Ok(v);
    }
    let rows = a.nonempty_rows();
    let cols = a.nonempty_cols();
    if rows.len().min(cols.len()) <= DENSE_LIMIT {
        let sub = a.submatrix(&rows, &cols);
        return dense_norm(&sub);
    }
    let (est, conv, it, change) = power_core(&a, PowerOptions::default());
    match banded_gram(&a) {
        Some(g) => certify_band(&g, est * est, &a).map(|l| l.sqrt()),
        None if conv => Ok(est),
        None => Err(Error::NoConvergence {
            iterations: it,
            residual: change,
        }),
    }
}

fn generalized_permutation_norm(a: &Csr) -> Option<f64> {
    let mut col_seen = vec![false; a.cols()];
    let mut best: f64 = 0.0;
    for r in 0..a.rows() {
        let (idx, val) = a.row(r);
        if idx.len() > 1 {
            return None;
        }
        if let (Some(&c), Some(v)) = (idx.first(), val.first()) {
            if col_seen[c] {
                return None;
            }
            col_seen[c] = true;
            best = best.max(v.norm());
        }
    }
    Some(best)
}

fn dense_norm(a: &Csr) -> Result<f64> {
    let (m, n) = (a.rows(), a.cols());
    let mut buf = vec![C64::new(0.0, 0.0); m * n];
    for (r, c, v) in a.iter() {
        buf[r + c * m] = v;
    }
    let (k, mut g) = dense::gram_colmajor(m, n, &buf)?;
    let w = lapack::heevd(k, &mut g, false)?;
    Ok(w.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// Lower band of the Gram matrix `A*A` restricted to nonempty columns,
/// in an interleaved ordering that keeps it narrow. `None` when no tried
/// ordering is narrow enough.
fn banded_gram(a: &Csr) -> Option<(usize, usize, Vec<C64>)> {
    let g = a.adjoint().matmul(a).ok()?;
    let n = g.rows();
    let mut best: Option<(usize, Vec<usize>)> = None;
    for blocks in [1usize, 2, 4] {
        if n % blocks != 0 {
            continue;
        }
        let p = interleave(n / blocks, blocks);
        let bw = g.iter().map(|(r, c, _)| p[r].abs_diff(p[c])).max().unwrap_or(0);
        if best.as_ref().is_none_or(|(b, _)| bw < *b) {
            best = Some((bw, p));
        }
    }
    let (_, p) = best?;
    let gp = g.permute(&p);
    let keep = gp.nonempty_rows();
    let gs = gp.submatrix(&keep, &keep);
    let kd = gs.bandwidth();
    if kd > BAND_LIMIT {
        return None;
    }
    let m = gs.rows();
    let ldab = kd + 1;
    let mut ab = vec![C64::new(0.0, 0.0); ldab * m];
    for (r, c, v) in gs.iter() {
        if r >= c {
            ab[(r - c) + c * ldab] = v;
        }
    }
    Some((m, kd, ab))
}

/// True when `sigma·I − G` is positive definite (band Cholesky).
fn dominates(g: &(usize, usize, Vec<C64>), sigma: f64) -> bool {
    let (n, kd, ab) = g;
    let (n, kd) = (*n, *kd);
    let ldab = kd + 1;
    // l[(i - j) + j * ldab] holds L[i, j]
    let mut l = vec![C64::new(0.0, 0.0); ldab * n];
    for j in 0..n {
        let lo = j.saturating_sub(kd);
        let mut d = sigma - ab[j * ldab].re;
        for k in lo..j {
            d -= l[(j - k) + k * ldab].norm_sqr();
        }
        if d.is_nan() || d <= 0.0 {
            return false;
        }
        let ljj = d.sqrt();
        l[j * ldab] = C64::new(ljj, 0.0);
        for i in j + 1..(j + kd + 1).min(n) {
            let mut s = -ab[(i - j) + j * ldab];
            for k in i.saturating_sub(kd).max(lo)..j {
                s -= l[(i - k) + k * ldab] * l[(j - k) + k * ldab].conj();
            }
            l[(i - j) + j * ldab] = s / ljj;
        }
    }
    true
}

/// Brackets `λ_max(G)` between a Rayleigh lower bound and the Schur bound,
/// then bisects on Cholesky feasibility to relative width `1e-12`.
fn certify_band(g: &(usize, usize, Vec<C64>), lower: f64, a: &Csr) -> Result<f64> {
    let (rmax, cmax) = a.abs_row_col_max();
    let mut hi = rmax * cmax * (1.0 + 1e-12) + f64::MIN_POSITIVE;
    let mut lo = lower.min(hi);
    // a converged power estimate is usually already tight
    let probe = lo * (1.0 + 1e-11);
    if lo > 0.0 && dominates(g, probe) {
        return Ok(lo);
    }
    if !dominates(g, hi) {
        return Err(Error::NoConvergence {
            iterations: 0,
            residual: f64::NAN,
        });
    }
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if dominates(g, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn diagonal_and_nilpotent() {
        assert_eq!(op_norm(&Csr::from_real_diag(&[3.0, -1.0])).unwrap(), 3.0);
        let nil = Csr::from_triplets(2, 2, &[(0, 1, c(1.0, 0.0))]).unwrap();
        assert_eq!(op_norm(&nil).unwrap(), 1.0);
        assert!((power_norm(&nil, PowerOptions::default()).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(op_norm(&Csr::zeros(3, 3)).unwrap(), 0.0);
    }

    fn laplacian(n: usize) -> Csr {
        let mut t = Vec::new();
        for j in 0..n {
            t.push((j, j, c(2.0, 0.0)));
            if j + 1 < n {
                t.push((j, j + 1, c(-1.0, 0.0)));
                t.push((j + 1, j, c(-1.0, 0.0)));
            }
        }
        Csr::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn large_banded_matches_closed_form() {
        let n = 1500;
        let exact = 2.0 - 2.0 * (n as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
        let v = op_norm(&laplacian(n)).unwrap();
        assert!((v - exact).abs() < 1e-9 * exact, "{v} vs {exact}");
    }

    #[test]
    fn dense_and_power_agree() {
        let a = laplacian(200);
        let d = op_norm(&a).unwrap();
        let p = power_norm(&a, PowerOptions { tol: 1e-13, max_iter: 200_000, seed: 1 }).unwrap();
        assert!((d - p).abs() < 1e-6);
    }

    #[test]
    fn power_reports_non_convergence() {
        let a = laplacian(400);
        match power_norm(&a, PowerOptions { tol: 1e-15, max_iter: 3, seed: 1 }) {
            Err(Error::NoConvergence { iterations, .. }) => assert_eq!(iterations, 3),
            other => panic!("{other:?}"),
        }
    }
}
