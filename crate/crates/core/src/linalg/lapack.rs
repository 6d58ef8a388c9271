//! Thin safe wrappers over the LAPACK and BLAS routines the kernels use.
//!
//! All buffers are column-major. Complex pointers are passed as the
//! layout-compatible `Complex64`.

use std::os::raw::{c_char, c_int};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

extern "C" {
    fn dgemm_(
        transa: *const c_char,
        transb: *const c_char,
        m: *const c_int,
        n: *const c_int,
        k: *const c_int,
        alpha: *const f64,
        a: *const f64,
        lda: *const c_int,
        b: *const f64,
        ldb: *const c_int,
        beta: *const f64,
        c: *mut f64,
        ldc: *const c_int,
    );
    fn zgemm_(
        transa: *const c_char,
        transb: *const c_char,
        m: *const c_int,
        n: *const c_int,
        k: *const c_int,
        alpha: *const C64,
        a: *const C64,
        lda: *const c_int,
        b: *const C64,
        ldb: *const c_int,
        beta: *const C64,
        c: *mut C64,
        ldc: *const c_int,
    );
}

fn to_int(v: usize) -> Result<c_int> {
    c_int::try_from(v).map_err(|_| Error::InvalidArgument(format!("dimension {v} exceeds LAPACK range")))
}

fn check(routine: &'static str, info: c_int) -> Result<()> {
    if info == 0 {
        Ok(())
    } else {
        Err(Error::Lapack { routine, info })
    }
}

/// Transpose flag for the gemm wrappers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trans {
    No,
    T,
    H,
}

impl Trans {
    fn flag(self) -> c_char {
        (match self {
            Trans::No => b'N',
            Trans::T => b'T',
            Trans::H => b'C',
        }) as c_char
    }
}

/// `C = alpha·op(A)·op(B) + beta·C` for real column-major matrices.
#[allow(clippy::too_many_arguments)]
pub fn dgemm(
    ta: Trans,
    tb: Trans,
    m: usize,
    n: usize,
    k: usize,
    alpha: f64,
    a: &[f64],
    lda: usize,
    b: &[f64],
    ldb: usize,
    beta: f64,
    c: &mut [f64],
    ldc: usize,
) -> Result<()> {
    if m == 0 || n == 0 {
        return Ok(());
    }
    let (m_, n_, k_) = (to_int(m)?, to_int(n)?, to_int(k.max(1))?);
    let (lda_, ldb_, ldc_) = (to_int(lda.max(1))?, to_int(ldb.max(1))?, to_int(ldc.max(1))?);
    if k == 0 {
        c.iter_mut().for_each(|v| *v *= beta);
        return Ok(());
    }
    unsafe {
        dgemm_(
            &ta.flag(),
            &tb.flag(),
            &m_,
            &n_,
            &k_,
            &alpha,
            a.as_ptr(),
            &lda_,
            b.as_ptr(),
            &ldb_,
            &beta,
            c.as_mut_ptr(),
            &ldc_,
        );
    }
    Ok(())
}

/// `C = alpha·op(A)·op(B) + beta·C` for complex column-major matrices.
#[allow(clippy::too_many_arguments)]
pub fn zgemm(
    ta: Trans,
    tb: Trans,
    m: usize,
    n: usize,
    k: usize,
    alpha: C64,
    a: &[C64],
    lda: usize,
    b: &[C64],
    ldb: usize,
    beta: C64,
    c: &mut [C64],
    ldc: usize,
) -> Result<()> {
    if m == 0 || n == 0 {
        return Ok(());
    }
    let (m_, n_, k_) = (to_int(m)?, to_int(n)?, to_int(k.max(1))?);
    let (lda_, ldb_, ldc_) = (to_int(lda.max(1))?, to_int(ldb.max(1))?, to_int(ldc.max(1))?);
    if k == 0 {
        c.iter_mut().for_each(|v| *v *= beta);
        return Ok(());
    }
    unsafe {
        zgemm_(
            &ta.flag(),
            &tb.flag(),
            &m_,
            &n_,
            &k_,
            &alpha,
            a.as_ptr(),
            &lda_,
            b.as_ptr(),
            &ldb_,
            &beta,
            c.as_mut_ptr(),
            &ldc_,
        );
    }
    Ok(())
}

/// Eigenvalues (ascending) of a dense Hermitian matrix; with `vectors`
/// the buffer is overwritten by the orthonormal eigenvectors.
pub fn heevd(n: usize, a: &mut [C64], vectors: bool) -> Result<Vec<f64>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    assert_eq!(a.len(), n * n, "heevd buffer");
    let ni = to_int(n)?;
    let jobz = if vectors { b'V' } else { b'N' } as c_char;
    let (lwork, lrwork, liwork) = if vectors {
        (2 * n + n * n, 1 + 5 * n + 2 * n * n, 3 + 5 * n)
    } else {
        (n + 1, n, 1)
    };
    let mut w = vec![0.0; n];
    let mut work = vec![C64::new(0.0, 0.0); lwork];
    let mut rwork = vec![0.0; lrwork];
    let mut iwork = vec![0 as c_int; liwork];
    let mut info = 0;
    unsafe {
        lapack_sys::zheevd_(
            &jobz,
            &(b'L' as c_char),
            &ni,
            a.as_mut_ptr() as *mut _,
            &ni,
            w.as_mut_ptr(),
            work.as_mut_ptr() as *mut _,
            &to_int(lwork)?,
            rwork.as_mut_ptr(),
            &to_int(lrwork)?,
            iwork.as_mut_ptr(),
            &to_int(liwork)?,
            &mut info,
        );
    }
    check("zheevd", info)?;
    Ok(w)
}

/// Eigen-decomposition of a real symmetric tridiagonal matrix with
/// diagonal `d` and off-diagonal `e`. `range` selects eigenvalues by
/// zero-based inclusive index. Returns the eigenvalues and, with
/// `vectors`, the column-major `n × m` eigenvector block.
pub fn stemr(
    d: &[f64],
    e: &[f64],
    range: Option<(usize, usize)>,
    vectors: bool,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = d.len();
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    assert_eq!(e.len() + 1, n, "stemr off-diagonal length");
    let mut dd = d.to_vec();
    let mut ee = e.to_vec();
    ee.push(0.0);
    let (rng, il, iu, m_max) = match range {
        None => (b'A', 1, n, n),
        Some((lo, hi)) => {
            if lo > hi || hi >= n {
                return Err(Error::OutOfRange(format!("eigenvalue index range {lo}..={hi} for n = {n}")));
            }
            (b'I', lo + 1, hi + 1, hi - lo + 1)
        }
    };
    let ni = to_int(n)?;
    let jobz = if vectors { b'V' } else { b'N' } as c_char;
    let ldz = if vectors { n } else { 1 };
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; if vectors { n * m_max } else { 1 }];
    let mut isuppz = vec![0 as c_int; 2 * m_max.max(1)];
    let lwork = 18 * n;
    let liwork = 10 * n;
    let mut work = vec![0.0; lwork];
    let mut iwork = vec![0 as c_int; liwork];
    let mut m: c_int = 0;
    let mut tryrac: c_int = 1;
    let mut info = 0;
    let nzc = to_int(m_max)?;
    unsafe {
        lapack_sys::dstemr_(
            &jobz,
            &(rng as c_char),
            &ni,
            dd.as_mut_ptr(),
            ee.as_mut_ptr(),
            &0.0,
            &0.0,
            &to_int(il)?,
            &to_int(iu)?,
            &mut m,
            w.as_mut_ptr(),
            z.as_mut_ptr(),
            &to_int(ldz)?,
            &nzc,
            isuppz.as_mut_ptr(),
            &mut tryrac,
            work.as_mut_ptr(),
            &to_int(lwork)?,
            iwork.as_mut_ptr(),
            &to_int(liwork)?,
            &mut info,
        );
    }
    check("dstemr", info)?;
    let m = m as usize;
    w.truncate(m);
    if vectors {
        z.truncate(n * m);
    } else {
        z.clear();
    }
    Ok((w, z))
}

/// All eigenvalues (ascending) of a Hermitian band matrix in LAPACK
/// lower band storage: `ab[(i - j) + j * (kd + 1)] = A[i, j]` for
/// `j <= i <= j + kd`. The buffer is destroyed.
pub fn hbev_values(n: usize, kd: usize, ab: &mut [C64]) -> Result<Vec<f64>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let ldab = kd + 1;
    assert_eq!(ab.len(), ldab * n, "hbev band buffer");
    let mut w = vec![0.0; n];
    let mut z = [C64::new(0.0, 0.0); 1];
    let mut work = vec![C64::new(0.0, 0.0); n];
    let mut rwork = vec![0.0; (3 * n).saturating_sub(2).max(1)];
    let mut info = 0;
    unsafe {
        lapack_sys::zhbev_(
            &(b'N' as c_char),
            &(b'L' as c_char),
            &to_int(n)?,
            &to_int(kd)?,
            ab.as_mut_ptr() as *mut _,
            &to_int(ldab)?,
            w.as_mut_ptr(),
            z.as_mut_ptr() as *mut _,
            &1,
            work.as_mut_ptr() as *mut _,
            rwork.as_mut_ptr(),
            &mut info,
        );
    }
    check("zhbev", info)?;
    Ok(w)
}

/// LU factorization of a general complex band matrix with partial pivoting.
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<C64>,
    ipiv: Vec<c_int>,
}

impl BandLu {
    /// Factors the `n × n` matrix with `kl` sub- and `ku` super-diagonals.
    /// `entry(i, j)` is called for every in-band position.
    pub fn factor(n: usize, kl: usize, ku: usize, entry: impl Fn(usize, usize) -> C64) -> Result<Self> {
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![C64::new(0.0, 0.0); ldab * n.max(1)];
        for j in 0..n {
            let lo = j.saturating_sub(ku);
            let hi = (j + kl).min(n.saturating_sub(1));
            for i in lo..=hi {
                ab[(kl + ku + i - j) + j * ldab] = entry(i, j);
            }
        }
        let mut ipiv = vec![0 as c_int; n.max(1)];
        let mut info = 0;
        if n > 0 {
            let ni = to_int(n)?;
            unsafe {
                lapack_sys::zgbtrf_(
                    &ni,
                    &ni,
                    &to_int(kl)?,
                    &to_int(ku)?,
                    ab.as_mut_ptr() as *mut _,
                    &to_int(ldab)?,
                    ipiv.as_mut_ptr(),
                    &mut info,
                );
            }
        }
        if info > 0 {
            return Err(Error::Lapack { routine: "zgbtrf (singular)", info });
        }
        check("zgbtrf", info)?;
        Ok(Self { n, kl, ku, ab, ipiv })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A X = B` in place; `b` holds `nrhs` column-major columns.
    pub fn solve(&self, b: &mut [C64], nrhs: usize) -> Result<()> {
        if self.n == 0 || nrhs == 0 {
            return Ok(());
        }
        assert_eq!(b.len(), self.n * nrhs, "band solve rhs");
        let ni = to_int(self.n)?;
        let mut info = 0;
        unsafe {
            lapack_sys::zgbtrs_(
                &(b'N' as c_char),
                &ni,
                &to_int(self.kl)?,
                &to_int(self.ku)?,
                &to_int(nrhs)?,
                self.ab.as_ptr() as *const _,
                &to_int(2 * self.kl + self.ku + 1)?,
                self.ipiv.as_ptr(),
                b.as_mut_ptr() as *mut _,
                &ni,
                &mut info,
            );
        }
        check("zgbtrs", info)
    }
}
