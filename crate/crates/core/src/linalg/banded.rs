//! Hermitian band and tridiagonal eigen-kernels.
//!
//! Grid operators on `b` blocks have bandwidth `O(b)` once the unknowns are
//! interleaved site by site, so every spectral question reduces to a band
//! problem: eigenvalues from `zhbev`, eigenvectors by shifted inverse
//! iteration on a pivoted band LU.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lapack::{self, BandLu};
use super::sparse::Csr;
use crate::error::{Error, Result};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Permutation sending block-major index `b * sites + s` to the
/// interleaved index `s * blocks + b`.
pub fn interleave(sites: usize, blocks: usize) -> Vec<usize> {
    let mut p = vec![0; sites * blocks];
    for b in 0..blocks {
        for s in 0..sites {
            p[b * sites + s] = s * blocks + b;
        }
    }
    p
}

/// Inverse of a permutation.
pub fn invert(p: &[usize]) -> Vec<usize> {
    let mut q = vec![0; p.len()];
    for (i, &pi) in p.iter().enumerate() {
        q[pi] = i;
    }
    q
}

/// Hermitian band matrix in LAPACK lower storage.
#[derive(Debug, Clone)]
pub struct HermBand {
    n: usize,
    kd: usize,
    ab: Vec<C64>,
}

impl HermBand {
    /// Copies the lower band of a Hermitian sparse matrix.
    pub fn from_csr(a: &Csr) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::DimensionMismatch {
                expected: a.rows(),
                found: a.cols(),
            });
        }
        let n = a.rows();
        let kd = a.bandwidth();
        let ldab = kd + 1;
        let mut ab = vec![ZERO; ldab * n];
        for (r, c, v) in a.iter() {
            if r >= c {
                ab[(r - c) + c * ldab] = v;
            }
        }
        Ok(Self { n, kd, ab })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.kd
    }

    /// Full Hermitian entry `A[i, j]`.
    pub fn entry(&self, i: usize, j: usize) -> C64 {
        if i >= j {
            if i - j > self.kd {
                ZERO
            } else {
                self.ab[(i - j) + j * (self.kd + 1)]
            }
        } else {
            self.entry(j, i).conj()
        }
    }

    /// Frobenius-type scale used for tolerances.
    pub fn scale(&self) -> f64 {
        self.ab.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE)
    }

    /// All eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let mut ab = self.ab.clone();
        lapack::hbev_values(self.n, self.kd, &mut ab)
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.n];
        for j in 0..self.n {
            for i in j..(j + self.kd + 1).min(self.n) {
                let v = self.ab[(i - j) + j * (self.kd + 1)];
                y[i] += v * x[j];
                if i != j {
                    y[j] += v.conj() * x[i];
                }
            }
        }
        y
    }

    fn shifted_lu(&self, shift: f64) -> Result<BandLu> {
        let kd = self.kd;
        BandLu::factor(self.n, kd, kd, |i, j| {
            let v = self.entry(i, j);
            if i == j {
                v - shift
            } else {
                v
            }
        })
    }

    /// Eigenvectors for the given ascending eigenvalues by inverse
    /// iteration. Members of a cluster (relative gap below `1e-8`) are
    /// orthogonalized against each other.
    pub fn eigenvectors(&self, lambdas: &[f64]) -> Result<Vec<Vec<C64>>> {
        if self.ab.iter().all(|v| *v == ZERO) {
            // every vector is an eigenvector of the zero matrix
            return Ok((0..lambdas.len())
                .map(|k| {
                    let mut v = vec![ZERO; self.n];
                    v[k % self.n.max(1)] = C64::new(1.0, 0.0);
                    v
                })
                .collect());
        }
        let scale = self.scale();
        let eps = f64::EPSILON * scale;
        let cluster_tol = 1e-8 * scale;
        let mut out: Vec<Vec<C64>> = Vec::with_capacity(lambdas.len());
        let mut cluster_start = 0;
        for (idx, &lam) in lambdas.iter().enumerate() {
            if idx > 0 && (lam - lambdas[idx - 1]).abs() > cluster_tol {
                cluster_start = idx;
            }
            let mut shift = lam + (idx - cluster_start) as f64 * 10.0 * eps;
            let lu = match self.shifted_lu(shift) {
                Ok(lu) => lu,
                Err(Error::Lapack { .. }) => {
                    shift += 100.0 * eps;
                    self.shifted_lu(shift)?
                }
                Err(e) => return Err(e),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(0x9e37_79b9 ^ idx as u64);
            let mut v: Vec<C64> = (0..self.n)
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            normalize(&mut v);
            let mut converged = false;
            for _ in 0..8 {
                lu.solve(&mut v, 1)?;
                for prev in &out[cluster_start..idx] {
                    project_out(&mut v, prev);
                }
                let growth = norm(&v);
                if !growth.is_finite() || growth == 0.0 {
                    return Err(Error::NoConvergence {
                        iterations: 0,
                        residual: f64::NAN,
                    });
                }
                v.iter_mut().for_each(|x| *x /= growth);
                let r = self.residual(&v, lam);
                if r <= 1e3 * eps * (self.n as f64).sqrt() {
                    converged = true;
                    break;
                }
            }
            if !converged {
                let r = self.residual(&v, lam);
                if r > 1e-6 * scale {
                    return Err(Error::NoConvergence {
                        iterations: 8,
                        residual: r,
                    });
                }
            }
            out.push(v);
        }
        Ok(out)
    }

    /// `‖A v − λ v‖` for unit `v`.
    pub fn residual(&self, v: &[C64], lam: f64) -> f64 {
        let av = self.matvec(v);
        av.iter().zip(v).map(|(a, x)| (a - lam * x).norm_sqr()).sum::<f64>().sqrt()
    }
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalize(v: &mut [C64]) {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn project_out(v: &mut [C64], q: &[C64]) {
    let dot: C64 = q.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
    v.iter_mut().zip(q).for_each(|(x, a)| *x -= dot * a);
}

/// Hermitian tridiagonal matrix: real diagonal, complex subdiagonal.
#[derive(Debug, Clone)]
pub struct HermTridiag {
    pub diag: Vec<f64>,
    pub sub: Vec<C64>,
}

/// Eigen-decomposition of a [`HermTridiag`]: eigenvector `k` is
/// `phase[j] * real_vectors[j + k n]`.
#[derive(Debug, Clone)]
pub struct TridiagEigen {
    pub values: Vec<f64>,
    pub real_vectors: Vec<f64>,
    pub phase: Vec<C64>,
}

impl HermTridiag {
    /// Recognizes a tridiagonal Hermitian matrix with exactly real diagonal.
    pub fn from_csr(a: &Csr) -> Option<Self> {
        if a.rows() != a.cols() || a.bandwidth() > 1 {
            return None;
        }
        let n = a.rows();
        let mut diag = vec![0.0; n];
        for (j, d) in diag.iter_mut().enumerate() {
            let v = a.get(j, j);
            if v.im != 0.0 {
                return None;
            }
            *d = v.re;
        }
        let sub: Vec<C64> = (0..n.saturating_sub(1)).map(|j| a.get(j + 1, j)).collect();
        for (j, s) in sub.iter().enumerate() {
            if a.get(j, j + 1) != s.conj() {
                return None;
            }
        }
        Some(Self { diag, sub })
    }

    /// Diagonal unitary gauge making the off-diagonal real and non-negative.
    pub fn gauge(&self) -> (Vec<f64>, Vec<C64>) {
        let n = self.diag.len();
        let mut phase = vec![C64::new(1.0, 0.0); n];
        let mut off = vec![0.0; n.saturating_sub(1)];
        for j in 0..n.saturating_sub(1) {
            let b = self.sub[j];
            let m = b.norm();
            off[j] = m;
            phase[j + 1] = if m > 0.0 { phase[j] * (b / m) } else { phase[j] };
        }
        (off, phase)
    }

    pub fn eigen(&self, vectors: bool) -> Result<TridiagEigen> {
        let (off, phase) = self.gauge();
        let (values, real_vectors) = lapack::stemr(&self.diag, &off, None, vectors)?;
        Ok(TridiagEigen {
            values,
            real_vectors,
            phase,
        })
    }

    /// Eigenvalues with zero-based indices `lo..=hi`.
    pub fn eigenvalues_range(&self, lo: usize, hi: usize) -> Result<Vec<f64>> {
        let (off, _) = self.gauge();
        Ok(lapack::stemr(&self.diag, &off, Some((lo, hi)), false)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn skew_stencil(n: usize) -> Csr {
        let mut t = Vec::new();
        for j in 0..n - 1 {
            t.push((j, j + 1, c(0.0, 0.5)));
            t.push((j + 1, j, c(0.0, -0.5)));
        }
        for j in 0..n {
            t.push((j, j, c(j as f64 * 0.01, 0.0)));
        }
        Csr::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn interleave_round_trip() {
        let p = interleave(3, 2);
        assert_eq!(p, vec![0, 2, 4, 1, 3, 5]);
        assert_eq!(invert(&invert(&p)), p);
    }

    #[test]
    fn gauge_preserves_spectrum() {
        let a = skew_stencil(40);
        let t = HermTridiag::from_csr(&a).unwrap();
        let e = t.eigen(true).unwrap();
        let mut dense = a.to_dense().reversed_axes().as_standard_layout().to_owned();
        let w = lapack::heevd(40, dense.as_slice_mut().unwrap(), false).unwrap();
        for (u, v) in e.values.iter().zip(&w) {
            assert!((u - v).abs() < 1e-12);
        }
        // first eigenvector satisfies A v = λ v
        let v: Vec<C64> = (0..40).map(|j| e.phase[j] * e.real_vectors[j]).collect();
        let av = a.matvec(&v);
        let r: f64 = av.iter().zip(&v).map(|(x, y)| (x - e.values[0] * y).norm_sqr()).sum();
        assert!(r.sqrt() < 1e-12);
    }

    #[test]
    fn band_eigenvectors_have_small_residual() {
        let a = skew_stencil(60).matmul(&skew_stencil(60)).unwrap();
        let b = HermBand::from_csr(&a).unwrap();
        assert_eq!(b.bandwidth(), 2);
        let w = b.eigenvalues().unwrap();
        let vs = b.eigenvectors(&w[..10]).unwrap();
        for (v, &l) in vs.iter().zip(&w) {
            assert!(b.residual(v, l) < 1e-10);
        }
        for i in 0..10 {
            for j in 0..i {
                let d: C64 = vs[i].iter().zip(&vs[j]).map(|(x, y)| x.conj() * y).sum();
                assert!(d.norm() < 1e-6, "overlap {i} {j}: {}", d.norm());
            }
        }
    }

    #[test]
    fn degenerate_cluster_is_orthogonalized() {
        // two identical decoupled blocks give exact double eigenvalues
        let s = skew_stencil(20);
        let a = Csr::blocks(20, &[vec![Some(&s), None], vec![None, Some(&s)]]);
        let a = a.permute(&interleave(20, 2));
        let b = HermBand::from_csr(&a).unwrap();
        let w = b.eigenvalues().unwrap();
        assert!((w[0] - w[1]).abs() < 1e-12);
        let vs = b.eigenvectors(&w[..2]).unwrap();
        let d: C64 = vs[0].iter().zip(&vs[1]).map(|(x, y)| x.conj() * y).sum();
        assert!(d.norm() < 1e-8);
        assert!(b.residual(&vs[1], w[1]) < 1e-10);
    }
}
