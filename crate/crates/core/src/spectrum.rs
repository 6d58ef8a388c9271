//! Eigenvalues and eigenvectors of [`SymOp`] truncations.
//!
//! Three paths, chosen by structure:
//! * single-block tridiagonal: phase gauge to a real tridiagonal, `dstemr`;
//! * odd graded operators with square off-diagonal part `B`: eigenvalues
//!   `±σ(B)` from the band matrix `B*B`, eigenvectors `(v, ±Bv/σ)/√2`;
//! * everything else: interleaved band storage, `zhbev` plus inverse iteration.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::banded::{interleave, HermBand, HermTridiag};
use crate::linalg::sparse::Csr;
use crate::operators::SymOp;

/// Eigenvalue with its unit eigenvector in block-major ordering.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<C64>,
}

/// Off-diagonal part of an odd graded operator.
#[derive(Debug, Clone)]
pub struct Chiral {
    /// `B = T[neg, pos]`.
    pub b: Csr,
    pub pos: Vec<usize>,
    pub neg: Vec<usize>,
    sites: usize,
    pos_blocks: usize,
    neg_blocks: usize,
}

impl Chiral {
    pub fn of(op: &SymOp) -> Option<Self> {
        let g = op.grading()?;
        if !op.is_odd() {
            return None;
        }
        let n = op.grid().n_points();
        let idx = |sign: i8| -> Vec<usize> {
            g.iter()
                .enumerate()
                .filter(|(_, &s)| s == sign)
                .flat_map(|(b, _)| b * n..(b + 1) * n)
                .collect()
        };
        let pos = idx(1);
        let neg = idx(-1);
        if pos.len() != neg.len() || pos.is_empty() {
            return None;
        }
        let b = op.matrix().submatrix(&neg, &pos);
        Some(Self {
            b,
            pos_blocks: pos.len() / n,
            neg_blocks: neg.len() / n,
            pos,
            neg,
            sites: n,
        })
    }

    fn gram_band(&self, right: bool) -> Result<(HermBand, Vec<usize>)> {
        let (g, blocks) = if right {
            (self.b.adjoint().matmul(&self.b)?, self.pos_blocks)
        } else {
            (self.b.matmul(&self.b.adjoint())?, self.neg_blocks)
        };
        let p = interleave(self.sites, blocks);
        Ok((HermBand::from_csr(&g.permute(&p))?, p))
    }

    /// Singular values of `B` in ascending order.
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        let (band, _) = self.gram_band(true)?;
        Ok(band.eigenvalues()?.into_iter().map(|v| v.max(0.0).sqrt()).collect())
    }
}

fn band_of(op: &SymOp) -> Result<(HermBand, Vec<usize>)> {
    let p = interleave(op.grid().n_points(), op.blocks());
    Ok((HermBand::from_csr(&op.matrix().permute(&p))?, p))
}

/// All eigenvalues in ascending order.
pub fn eigenvalues(op: &SymOp) -> Result<Vec<f64>> {
    if op.blocks() == 1 {
        if let Some(t) = HermTridiag::from_csr(op.matrix()) {
            return Ok(t.eigen(false)?.values);
        }
    }
    if let Some(ch) = Chiral::of(op) {
        let s = ch.singular_values()?;
        let mut w: Vec<f64> = s.iter().map(|v| -v).collect();
        w.extend(s.iter().copied());
        w.sort_by(f64::total_cmp);
        return Ok(w);
    }
    band_of(op)?.0.eigenvalues()
}

/// Number of eigenvalues with `|λ| ≤ lam` in an ascending list.
pub fn count_abs_le(values: &[f64], lam: f64) -> usize {
    values.iter().filter(|v| v.abs() <= lam).count()
}

/// Eigenpairs with `|λ| ≤ lam`, sorted by eigenvalue.
pub fn eigenpairs_abs_le(op: &SymOp, lam: f64) -> Result<Vec<EigenPair>> {
    if let Some(ch) = Chiral::of(op) {
        return chiral_pairs(&ch, lam, op.dim());
    }
    let (band, p) = band_of(op)?;
    let w = band.eigenvalues()?;
    let sel: Vec<f64> = w.into_iter().filter(|v| v.abs() <= lam).collect();
    let vecs = band.eigenvectors(&sel)?;
    // p sends an original index to its banded position
    Ok(sel
        .into_iter()
        .zip(vecs)
        .map(|(value, v)| EigenPair {
            value,
            vector: (0..v.len()).map(|i| v[p[i]]).collect(),
        })
        .collect())
}

fn chiral_pairs(ch: &Chiral, lam: f64, dim: usize) -> Result<Vec<EigenPair>> {
    let (band, p) = ch.gram_band(true)?;
    let w = band.eigenvalues()?;
    let scale = band.scale();
    let zero_tol = 1e-9 * scale.sqrt();
    let sel: Vec<f64> = w.into_iter().filter(|v| v.max(0.0).sqrt() <= lam).collect();
    let vecs = band.eigenvectors(&sel)?;
    let mut out = Vec::with_capacity(2 * sel.len());
    let mut n_zero = 0;
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    for (&mu, vp) in sel.iter().zip(&vecs) {
        let v: Vec<C64> = (0..vp.len()).map(|i| vp[p[i]]).collect();
        let sigma = mu.max(0.0).sqrt();
        if sigma <= zero_tol {
            n_zero += 1;
            let mut full = vec![C64::new(0.0, 0.0); dim];
            for (k, &i) in ch.pos.iter().enumerate() {
                full[i] = v[k];
            }
            out.push(EigenPair { value: 0.0, vector: full });
            continue;
        }
        let u: Vec<C64> = ch.b.matvec(&v).into_iter().map(|x| x / sigma).collect();
        for sign in [1.0, -1.0] {
            let mut full = vec![C64::new(0.0, 0.0); dim];
            for (k, &i) in ch.pos.iter().enumerate() {
                full[i] = v[k] * inv_sqrt2;
            }
            for (k, &i) in ch.neg.iter().enumerate() {
                full[i] = u[k] * (sign * inv_sqrt2);
            }
            out.push(EigenPair {
                value: sign * sigma,
                vector: full,
            });
        }
    }
    if n_zero > 0 {
        // kernel vectors supported on the negative side come from B B*
        let (band2, p2) = ch.gram_band(false)?;
        let w2 = band2.eigenvalues()?;
        let vecs2 = band2.eigenvectors(&w2[..n_zero.min(w2.len())])?;
        for vp in vecs2 {
            let mut full = vec![C64::new(0.0, 0.0); dim];
            for (k, &i) in ch.neg.iter().enumerate() {
                full[i] = vp[p2[k]];
            }
            out.push(EigenPair { value: 0.0, vector: full });
        }
    }
    out.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(out)
}

/// Weighted mass of the eigenvectors with `|λ| ≤ lam`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassScan {
    /// Number of eigenpairs inspected.
    pub count: usize,
    /// Largest `Σ_i w_i |v_i|²` over those unit eigenvectors.
    pub max_mass: f64,
}

/// Scans the eigenvectors with `|λ| ≤ lam` in batches without keeping
/// them, recording the largest mass under the weight `w` (one entry per
/// unknown, block-major). Only odd graded operators are supported.
pub fn max_mass_abs_le(op: &SymOp, lam: f64, w: &[f64]) -> Result<MassScan> {
    if w.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            found: w.len(),
        });
    }
    let ch = Chiral::of(op)
        .ok_or_else(|| Error::InvalidArgument("mass scan needs an odd graded operator".into()))?;
    let (band, p) = ch.gram_band(true)?;
    let mu = band.eigenvalues()?;
    let zero_tol = 1e-9 * band.scale().sqrt();
    let sel: Vec<f64> = mu.into_iter().filter(|v| v.max(0.0).sqrt() <= lam).collect();
    let wp: Vec<f64> = ch.pos.iter().map(|&i| w[i]).collect();
    let wn: Vec<f64> = ch.neg.iter().map(|&i| w[i]).collect();
    let mut scan = MassScan {
        count: 0,
        max_mass: 0.0,
    };
    let mut n_zero = 0;
    for chunk in sel.chunks(256) {
        let vecs = band.eigenvectors(chunk)?;
        for (&m, vp) in chunk.iter().zip(&vecs) {
            let v: Vec<C64> = (0..vp.len()).map(|i| vp[p[i]]).collect();
            let mass_p: f64 = v.iter().zip(&wp).map(|(x, w)| w * x.norm_sqr()).sum();
            let sigma = m.max(0.0).sqrt();
            if sigma <= zero_tol {
                n_zero += 1;
                scan.count += 1;
                scan.max_mass = scan.max_mass.max(mass_p);
                continue;
            }
            let u = ch.b.matvec(&v);
            let mass_n: f64 = u.iter().zip(&wn).map(|(x, w)| w * x.norm_sqr()).sum::<f64>() / (sigma * sigma);
            scan.count += 2;
            scan.max_mass = scan.max_mass.max(0.5 * (mass_p + mass_n));
        }
    }
    if n_zero > 0 {
        let (band2, p2) = ch.gram_band(false)?;
        let w2 = band2.eigenvalues()?;
        for vp in band2.eigenvectors(&w2[..n_zero.min(w2.len())])? {
            let mass: f64 = (0..vp.len()).map(|k| wn[k] * vp[p2[k]].norm_sqr()).sum();
            scan.count += 1;
            scan.max_mass = scan.max_mass.max(mass);
        }
    }
    Ok(scan)
}

/// `‖T v − λ v‖` for an eigenpair.
pub fn residual(op: &SymOp, pair: &EigenPair) -> f64 {
    let tv = op.matrix().matvec(&pair.vector);
    tv.iter()
        .zip(&pair.vector)
        .map(|(a, b)| (a - pair.value * b).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Smallest `k` eigenvalues of a single-block tridiagonal operator.
pub fn lowest_tridiagonal(op: &SymOp, k: usize) -> Result<Vec<f64>> {
    let t = HermTridiag::from_csr(op.matrix())
        .ok_or_else(|| Error::InvalidArgument("operator is not a single-block tridiagonal".into()))?;
    if k == 0 {
        return Ok(Vec::new());
    }
    t.eigenvalues_range(0, k.min(op.dim()) - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::{make_grid, RealFn};
    use crate::linalg::dense;
    use crate::operators::*;

    #[test]
    fn free_first_order_closed_form() {
        let g = make_grid(20.0, 4001).unwrap();
        let d = first_order(&g, &RealFn::zero()).unwrap();
        let w = eigenvalues(&d).unwrap();
        let n = 4001;
        let h = g.spacing();
        let mut exact: Vec<f64> = (1..=n)
            .map(|k| (k as f64 * std::f64::consts::PI / (n + 1) as f64).cos() / h)
            .collect();
        exact.sort_by(f64::total_cmp);
        let err = w.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "max error {err}");
        assert!((w[0] + 100.0).abs() < 1e-2 && (w[n - 1] - 100.0).abs() < 1e-2);
        for k in 0..n {
            assert!((w[k] + w[n - 1 - k]).abs() < 1e-9);
        }
    }

    #[test]
    fn oscillator_levels() {
        let g = make_grid(20.0, 4001).unwrap();
        let s = schrodinger(&g, &RealFn::new("x^2", |x| x * x)).unwrap();
        let w = lowest_tridiagonal(&s, 5).unwrap();
        for (k, v) in w.iter().enumerate() {
            let exact = 2.0 * k as f64 + 1.0;
            assert!(((v - exact) / exact).abs() < 1e-2, "{v} vs {exact}");
        }
        let free = schrodinger(&make_grid(3.0, 61).unwrap(), &RealFn::zero()).unwrap();
        assert!(eigenvalues(&free).unwrap()[0] >= 0.0);
    }

    #[test]
    fn chiral_and_band_paths_agree_with_dense() {
        let g = make_grid(4.0, 81).unwrap();
        let t = even_dirac(&g, &RealFn::identity(), Stencil::Forward).unwrap();
        let dense_w = dense::herm_eigvals(&t.matrix().to_dense()).unwrap();
        let chiral_w = eigenvalues(&t).unwrap();
        for (a, b) in dense_w.iter().zip(&chiral_w) {
            assert!((a - b).abs() < 1e-9);
        }
        let pairs = eigenpairs_abs_le(&t, 3.0).unwrap();
        assert_eq!(pairs.len(), count_abs_le(&dense_w, 3.0));
        for p in &pairs {
            assert!(residual(&t, p) < 1e-8, "residual {}", residual(&t, p));
        }
        let gt = graded_tensor_double(&t, &multiplication(&g, &RealFn::new("1", |_| 1.0)).unwrap()).unwrap();
        let w1 = eigenvalues(&gt).unwrap();
        let w2 = dense::herm_eigvals(&gt.matrix().to_dense()).unwrap();
        for (a, b) in w1.iter().zip(&w2) {
            assert!((a - b).abs() < 1e-9);
        }
        // ungraded banded path
        let s = first_order(&g, &RealFn::identity()).unwrap().add(&multiplication(&g, &RealFn::identity()).unwrap()).unwrap();
        let pairs = eigenpairs_abs_le(&s, 2.0).unwrap();
        assert!(!pairs.is_empty());
        for p in &pairs {
            assert!(residual(&s, p) < 1e-8);
        }
    }

    #[test]
    fn mass_scan_matches_pairs() {
        let g = make_grid(4.0, 81).unwrap();
        let t = even_dirac(&g, &RealFn::identity(), Stencil::Forward).unwrap();
        let w: Vec<f64> = (0..t.dim()).map(|i| if (i % 81) < 10 { 1.0 } else { 0.0 }).collect();
        let pairs = eigenpairs_abs_le(&t, 3.0).unwrap();
        let expect = pairs
            .iter()
            .map(|p| p.vector.iter().zip(&w).map(|(x, w)| w * x.norm_sqr()).sum::<f64>())
            .fold(0.0, f64::max);
        let scan = max_mass_abs_le(&t, 3.0, &w).unwrap();
        assert_eq!(scan.count, pairs.len());
        assert!((scan.max_mass - expect).abs() < 1e-10);
        assert!(max_mass_abs_le(&first_order(&g, &RealFn::zero()).unwrap(), 1.0, &w[..81]).is_err());
    }

    #[test]
    fn chiral_kernel_vectors() {
        // D = 0 doubled: every eigenvalue is zero, kernel splits across both sides
        let g = make_grid(1.0, 5).unwrap();
        let t = double_odd(&zero(&g, 1)).unwrap();
        let pairs = eigenpairs_abs_le(&t, 1.0).unwrap();
        assert_eq!(pairs.len(), 10);
    }
}
