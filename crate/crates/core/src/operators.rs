//! Hermitian discretizations of the model operators and their graded and
//! Clifford compositions.
//!
//! Conventions. A [`SymOp`] on `b` blocks acts on `ℂ^{b n}` in block-major
//! order (`index = block * n + site`). The grading is a sign per block; the
//! Clifford generator `e` is an explicit matrix. Doubling uses
//! `γ = diag(1, −1)` and `e = [[0, 1], [1, 0]]`, and
//!
//! ```text
//! double_odd(D)       = [[0, −iD], [iD, 0]]
//! assemble_even(P, Q) = [[0, Q], [P, 0]]        (Q = P*)
//! split_even(T)       = (−(i/2)(P − Q), (P + Q)/2)
//! ```
//!
//! so `double_odd(D) = assemble_even(iD, −iD)` and splitting a doubled
//! operator returns `(D, 0)`.

use std::fmt;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::funcspace::{sample, Grid, GridFunction, RealFn};
use crate::linalg::sparse::Csr;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Difference stencil used for the even Dirac blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    /// `(ψ_{j+1} − ψ_{j−1}) / 2h`; its adjoint is its negative.
    Central,
    /// `(ψ_{j+1} − ψ_j) / h`; its adjoint is the negated backward difference.
    Forward,
}

/// Record of the continuum operator a matrix truncates, precise enough to
/// rebuild it on another grid.
#[derive(Debug, Clone)]
pub enum Descriptor {
    Zero { blocks: usize },
    FirstOrder { potential: RealFn },
    Schrodinger { potential: RealFn },
    Multiplication { potential: RealFn },
    /// `assemble_even(∂ + f, −∂* + f)` for the chosen stencil.
    EvenDirac { potential: RealFn, stencil: Stencil },
    DoubledOdd(Box<Descriptor>),
    /// `[[0, −iD + M], [iD + M, 0]]`.
    OddPerturbed { d: Box<Descriptor>, m: Box<Descriptor> },
    GradedTensor { d: Box<Descriptor>, m: Box<Descriptor> },
    Sum(Box<Descriptor>, Box<Descriptor>),
    /// Built from raw matrices; cannot be re-sampled.
    Opaque { label: String },
}

impl Descriptor {
    pub fn kind(&self) -> &'static str {
        match self {
            Descriptor::Zero { .. } => "zero",
            Descriptor::FirstOrder { .. } => "first_order",
            Descriptor::Schrodinger { .. } => "schrodinger",
            Descriptor::Multiplication { .. } => "multiplication",
            _ => "block",
        }
    }

    /// Re-samples the operator on `grid`.
    pub fn rebuild(&self, grid: &Grid) -> Result<SymOp> {
        match self {
            Descriptor::Zero { blocks } => Ok(zero(grid, *blocks)),
            Descriptor::FirstOrder { potential } => first_order(grid, potential),
            Descriptor::Schrodinger { potential } => schrodinger(grid, potential),
            Descriptor::Multiplication { potential } => multiplication(grid, potential),
            Descriptor::EvenDirac { potential, stencil } => even_dirac(grid, potential, *stencil),
            Descriptor::DoubledOdd(d) => double_odd(&d.rebuild(grid)?),
            Descriptor::OddPerturbed { d, m } => odd_perturbed(&d.rebuild(grid)?, &m.rebuild(grid)?),
            Descriptor::GradedTensor { d, m } => graded_tensor_double(&d.rebuild(grid)?, &m.rebuild(grid)?),
            Descriptor::Sum(a, b) => a.rebuild(grid)?.add(&b.rebuild(grid)?),
            Descriptor::Opaque { label } => Err(Error::InvalidArgument(format!(
                "operator '{label}' was assembled from raw matrices and cannot be re-sampled"
            ))),
        }
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Descriptor::Zero { .. } => write!(f, "0"),
            Descriptor::FirstOrder { potential } => write!(f, "i d/dx + {}", potential.label()),
            Descriptor::Schrodinger { potential } => write!(f, "-d2/dx2 + {}", potential.label()),
            Descriptor::Multiplication { potential } => write!(f, "{}", potential.label()),
            Descriptor::EvenDirac { potential, stencil } => {
                write!(f, "even(d/dx + {}, {:?})", potential.label(), stencil)
            }
            Descriptor::DoubledOdd(d) => write!(f, "double({d})"),
            Descriptor::OddPerturbed { d, m } => write!(f, "odd_perturbed({d}; {m})"),
            Descriptor::GradedTensor { d, m } => write!(f, "graded_tensor({d}; {m})"),
            Descriptor::Sum(a, b) => write!(f, "({a}) + ({b})"),
            Descriptor::Opaque { label } => write!(f, "{label}"),
        }
    }
}

/// Finite Hermitian truncation of a continuum operator.
#[derive(Debug, Clone)]
pub struct SymOp {
    grid: Grid,
    blocks: usize,
    matrix: Csr,
    grading: Option<Vec<i8>>,
    clifford: Option<Csr>,
    descriptor: Descriptor,
}

impl SymOp {
    /// Validates and wraps a matrix. The matrix must be exactly Hermitian;
    /// a grading must be one sign per block; `e` must be a Hermitian
    /// involution commuting with multiplication operators.
    pub fn from_parts(
        grid: Grid,
        blocks: usize,
        matrix: Csr,
        grading: Option<Vec<i8>>,
        clifford: Option<Csr>,
        descriptor: Descriptor,
    ) -> Result<Self> {
        let dim = blocks * grid.n_points();
        if blocks == 0 || matrix.rows() != dim || matrix.cols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: matrix.rows(),
            });
        }
        if !matrix.is_hermitian_exact() {
            return Err(Error::InvalidArgument(format!(
                "matrix is not Hermitian (defect {:e})",
                matrix.hermitian_defect()
            )));
        }
        if let Some(g) = &grading {
            if g.len() != blocks || g.iter().any(|&s| s != 1 && s != -1) {
                return Err(Error::InvalidArgument("grading needs one sign ±1 per block".into()));
            }
        }
        if let Some(e) = &clifford {
            if e.rows() != dim || !e.is_hermitian_exact() {
                return Err(Error::InvalidArgument("Clifford action must be Hermitian of full size".into()));
            }
            let sq = e.matmul(e)?;
            if sq.max_abs_diff(&Csr::identity(dim)) != 0.0 {
                return Err(Error::InvalidArgument("Clifford action must square to 1".into()));
            }
        }
        Ok(Self {
            grid,
            blocks,
            matrix: matrix.prune(),
            grading,
            clifford,
            descriptor,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn dim(&self) -> usize {
        self.blocks * self.grid.n_points()
    }

    pub fn matrix(&self) -> &Csr {
        &self.matrix
    }

    pub fn grading(&self) -> Option<&[i8]> {
        self.grading.as_deref()
    }

    pub fn is_graded(&self) -> bool {
        self.grading.is_some()
    }

    pub fn clifford(&self) -> Option<&Csr> {
        self.clifford.as_ref()
    }

    pub fn descriptor(&self) -> &Descriptor {
        &self.descriptor
    }

    /// Re-samples the same continuum operator on another grid.
    pub fn rebuild_on(&self, grid: &Grid) -> Result<SymOp> {
        self.descriptor.rebuild(grid)
    }

    /// Grading operator γ as a diagonal matrix.
    pub fn gamma(&self) -> Option<Csr> {
        let n = self.grid.n_points();
        self.grading.as_ref().map(|g| {
            let d: Vec<f64> = g.iter().flat_map(|&s| std::iter::repeat_n(s as f64, n)).collect();
            Csr::from_real_diag(&d)
        })
    }

    /// True when `γ T γ = −T` exactly.
    pub fn is_odd(&self) -> bool {
        let n = self.grid.n_points();
        match &self.grading {
            None => false,
            Some(g) => self.matrix.iter().all(|(r, c, v)| v == ZERO || g[r / n] != g[c / n]),
        }
    }

    /// Block `(bi, bj)` as an `n × n` matrix.
    pub fn block(&self, bi: usize, bj: usize) -> Csr {
        self.matrix.block(self.grid.n_points(), bi, bj)
    }

    /// `self + other` with matching layout; grading and `e` are kept
    /// when they agree.
    pub fn add(&self, other: &SymOp) -> Result<SymOp> {
        self.grid.check_same(&other.grid)?;
        if self.blocks != other.blocks {
            return Err(Error::DimensionMismatch {
                expected: self.blocks,
                found: other.blocks,
            });
        }
        let grading = if self.grading == other.grading { self.grading.clone() } else { None };
        let clifford = match (&self.clifford, &other.clifford) {
            (Some(a), Some(b)) if a == b => Some(a.clone()),
            _ => None,
        };
        SymOp::from_parts(
            self.grid,
            self.blocks,
            self.matrix.add(&other.matrix)?,
            grading,
            clifford,
            Descriptor::Sum(Box::new(self.descriptor.clone()), Box::new(other.descriptor.clone())),
        )
    }
}

fn check_real(f: &GridFunction) -> Result<Vec<f64>> {
    f.real_values()
}

fn sample_potential(grid: &Grid, f: &RealFn) -> Result<Vec<f64>> {
    sample(|x| f.eval(x), grid)?.real_values()
}

/// The zero operator on `blocks` copies of the grid.
pub fn zero(grid: &Grid, blocks: usize) -> SymOp {
    let dim = blocks * grid.n_points();
    SymOp {
        grid: *grid,
        blocks,
        matrix: Csr::zeros(dim, dim),
        grading: None,
        clifford: None,
        descriptor: Descriptor::Zero { blocks },
    }
}

/// Central difference `∂_c` (real, antisymmetric) with Dirichlet truncation.
pub fn central_diff(grid: &Grid) -> Csr {
    let n = grid.n_points();
    let s = 1.0 / (2.0 * grid.spacing());
    let mut t = Vec::with_capacity(2 * n);
    for j in 0..n - 1 {
        t.push((j, j + 1, C64::new(s, 0.0)));
        t.push((j + 1, j, C64::new(-s, 0.0)));
    }
    Csr::from_triplets(n, n, &t).expect("stencil in range")
}

/// Forward difference `∂_f` with Dirichlet truncation.
pub fn forward_diff(grid: &Grid) -> Csr {
    let n = grid.n_points();
    let s = 1.0 / grid.spacing();
    let mut t = Vec::with_capacity(2 * n);
    for j in 0..n {
        t.push((j, j, C64::new(-s, 0.0)));
        if j + 1 < n {
            t.push((j, j + 1, C64::new(s, 0.0)));
        }
    }
    Csr::from_triplets(n, n, &t).expect("stencil in range")
}

fn first_order_matrix(grid: &Grid, f: &[f64]) -> Csr {
    let n = grid.n_points();
    let s = 1.0 / (2.0 * grid.spacing());
    let mut t = Vec::with_capacity(3 * n);
    for j in 0..n {
        if j > 0 {
            t.push((j, j - 1, C64::new(0.0, -s)));
        }
        t.push((j, j, C64::new(f[j], 0.0)));
        if j + 1 < n {
            t.push((j, j + 1, C64::new(0.0, s)));
        }
    }
    Csr::from_triplets(n, n, &t).expect("stencil in range")
}

/// `i d/dx + f` with the central stencil `(i/2h)(ψ_{j+1} − ψ_{j−1})`.
pub fn first_order(grid: &Grid, f: &RealFn) -> Result<SymOp> {
    let fv = sample_potential(grid, f)?;
    SymOp::from_parts(
        *grid,
        1,
        first_order_matrix(grid, &fv),
        None,
        None,
        Descriptor::FirstOrder { potential: f.clone() },
    )
}

/// As [`first_order`] from sampled values; complex potentials are rejected.
pub fn first_order_sampled(grid: &Grid, f: &GridFunction) -> Result<SymOp> {
    grid.check_same(f.grid())?;
    let fv = check_real(f)?;
    SymOp::from_parts(
        *grid,
        1,
        first_order_matrix(grid, &fv),
        None,
        None,
        Descriptor::Opaque {
            label: "i d/dx + sampled potential".into(),
        },
    )
}

fn schrodinger_matrix(grid: &Grid, v: &[f64]) -> Csr {
    let n = grid.n_points();
    let s = 1.0 / (grid.spacing() * grid.spacing());
    let mut t = Vec::with_capacity(3 * n);
    for j in 0..n {
        if j > 0 {
            t.push((j, j - 1, C64::new(-s, 0.0)));
        }
        t.push((j, j, C64::new(2.0 * s + v[j], 0.0)));
        if j + 1 < n {
            t.push((j, j + 1, C64::new(-s, 0.0)));
        }
    }
    Csr::from_triplets(n, n, &t).expect("stencil in range")
}

/// `−d²/dx² + V` with the 3-point Laplacian.
pub fn schrodinger(grid: &Grid, v: &RealFn) -> Result<SymOp> {
    let vv = sample_potential(grid, v)?;
    SymOp::from_parts(
        *grid,
        1,
        schrodinger_matrix(grid, &vv),
        None,
        None,
        Descriptor::Schrodinger { potential: v.clone() },
    )
}

/// As [`schrodinger`] from sampled values; complex potentials are rejected.
pub fn schrodinger_sampled(grid: &Grid, v: &GridFunction) -> Result<SymOp> {
    grid.check_same(v.grid())?;
    let vv = check_real(v)?;
    SymOp::from_parts(
        *grid,
        1,
        schrodinger_matrix(grid, &vv),
        None,
        None,
        Descriptor::Opaque {
            label: "-d2/dx2 + sampled potential".into(),
        },
    )
}

/// Pointwise multiplication by a real function.
pub fn multiplication(grid: &Grid, f: &RealFn) -> Result<SymOp> {
    let fv = sample_potential(grid, f)?;
    SymOp::from_parts(
        *grid,
        1,
        Csr::from_real_diag(&fv),
        None,
        None,
        Descriptor::Multiplication { potential: f.clone() },
    )
}

fn pauli_x(n: usize) -> Csr {
    let x = Csr::from_triplets(2, 2, &[(0, 1, ONE), (1, 0, ONE)]).expect("2x2");
    x.kron(&Csr::identity(n))
}

/// Clifford doubling `[[0, −iD], [iD, 0]]` with `γ = diag(1, −1)` and
/// `e = [[0, 1], [1, 0]]`.
pub fn double_odd(d: &SymOp) -> Result<SymOp> {
    if d.is_graded() || d.blocks != 1 {
        return Err(Error::InvalidArgument("double_odd expects an ungraded single-block operator".into()));
    }
    let n = d.grid.n_points();
    let lower = d.matrix.scale(I);
    let upper = d.matrix.scale(-I);
    let m = Csr::blocks(n, &[vec![None, Some(&upper)], vec![Some(&lower), None]]);
    SymOp::from_parts(
        d.grid,
        2,
        m,
        Some(vec![1, -1]),
        Some(pauli_x(n)),
        Descriptor::DoubledOdd(Box::new(d.descriptor.clone())),
    )
}

fn assemble_even_with(grid: &Grid, dplus: &Csr, dminus: &Csr, descriptor: Descriptor) -> Result<SymOp> {
    let n = grid.n_points();
    if dplus.rows() != n || dplus.cols() != n || dminus.rows() != n || dminus.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: dplus.rows(),
        });
    }
    let adj = dplus.adjoint();
    let defect = adj.max_abs_diff(dminus);
    if defect > 1e-12 {
        return Err(Error::Precondition(format!(
            "D- must equal the adjoint of D+ (mismatch {defect:e})"
        )));
    }
    let m = Csr::blocks(n, &[vec![None, Some(&adj)], vec![Some(dplus), None]]);
    SymOp::from_parts(*grid, 2, m, Some(vec![1, -1]), Some(pauli_x(n)), descriptor)
}

/// Graded operator `[[0, D−], [D+, 0]]`; requires `D− = D+*` to `1e-12`.
/// The upper block is stored as the exact adjoint of `D+`.
pub fn assemble_even(grid: &Grid, dplus: &Csr, dminus: &Csr) -> Result<SymOp> {
    assemble_even_with(
        grid,
        dplus,
        dminus,
        Descriptor::Opaque {
            label: "assembled even operator".into(),
        },
    )
}

/// Even Dirac module `[[0, −∂* + f], [∂ + f, 0]]` for the given stencil.
pub fn even_dirac(grid: &Grid, f: &RealFn, stencil: Stencil) -> Result<SymOp> {
    let fv = sample_potential(grid, f)?;
    let d = match stencil {
        Stencil::Central => central_diff(grid),
        Stencil::Forward => forward_diff(grid),
    };
    let fm = Csr::from_real_diag(&fv);
    let plus = d.add(&fm)?;
    let minus = d.adjoint().add(&fm)?;
    assemble_even_with(
        grid,
        &plus,
        &minus,
        Descriptor::EvenDirac {
            potential: f.clone(),
            stencil,
        },
    )
}

/// Recovers `(D, M)` from a graded 2-block operator:
/// `D = −(i/2)(D+ − D−)`, `M = (D+ + D−)/2` with `D+` the lower-left block.
pub fn split_even(t: &SymOp) -> Result<(SymOp, SymOp)> {
    if !t.is_graded() || t.blocks != 2 {
        return Err(Error::InvalidArgument("split_even expects a graded 2-block operator".into()));
    }
    let plus = t.block(1, 0);
    let minus = t.block(0, 1);
    let diff = plus.sub(&minus)?;
    let d = diff.scale(C64::new(0.0, -0.5));
    let m = plus.add(&minus)?.scale(C64::new(0.5, 0.0));
    let label = t.descriptor.to_string();
    let dop = SymOp::from_parts(
        t.grid,
        1,
        d,
        None,
        None,
        Descriptor::Opaque {
            label: format!("split D of {label}"),
        },
    )?;
    let mop = SymOp::from_parts(
        t.grid,
        1,
        m,
        None,
        None,
        Descriptor::Opaque {
            label: format!("split M of {label}"),
        },
    )?;
    Ok((dop, mop))
}

/// `[[0, −iD + M], [iD + M, 0]] = assemble_even(iD + M, −iD + M)`.
pub fn odd_perturbed(d: &SymOp, m: &SymOp) -> Result<SymOp> {
    d.grid.check_same(&m.grid)?;
    if d.blocks != 1 || m.blocks != 1 || d.is_graded() {
        return Err(Error::InvalidArgument("odd_perturbed expects ungraded single-block operators".into()));
    }
    let plus = d.matrix.scale(I).add(&m.matrix)?;
    let minus = d.matrix.scale(-I).add(&m.matrix)?;
    assemble_even_with(
        &d.grid,
        &plus,
        &minus,
        Descriptor::OddPerturbed {
            d: Box::new(d.descriptor.clone()),
            m: Box::new(m.descriptor.clone()),
        },
    )
}

/// Graded tensor doubling `D ⊗̂ 1 + M ⊗̂ e` on `E ⊗ ℂ²`.
///
/// With the outer factor first, `a ⊗̂ b` acts as `a γ₀^{|b|} ⊗ b`, so
///
/// ```text
/// D ⊗̂ 1 + M ⊗̂ e = [[D, Mγ₀], [Mγ₀, D]]
/// ```
///
/// graded by `γ₀ ⊗ diag(1, −1)`. Since `D` is odd and `M` even,
/// `{D ⊗ 1, Mγ₀ ⊗ e} = [D, M]γ₀ ⊗ e`, hence the square is
/// `D² ⊗ 1 + M² ⊗ 1 + [D, M]γ₀ ⊗ e`. Worked 4×4 case: `D = [[0, 1], [1, 0]]`,
/// `γ₀ = diag(1, −1)`, `M = 1` gives `[[D, γ₀], [γ₀, D]]`, whose square is
/// `2·1` because `Dγ₀ + γ₀D = 0`.
///
/// A single-block `M` is lifted to act diagonally on every block of `D`.
pub fn graded_tensor_double(d: &SymOp, m: &SymOp) -> Result<SymOp> {
    d.grid.check_same(&m.grid)?;
    let g0 = d
        .grading
        .clone()
        .ok_or_else(|| Error::InvalidArgument("graded_tensor_double needs a graded D".into()))?;
    let n = d.grid.n_points();
    let mm = if m.blocks == d.blocks {
        m.matrix.clone()
    } else if m.blocks == 1 {
        Csr::identity(d.blocks).kron(&m.matrix)
    } else {
        return Err(Error::DimensionMismatch {
            expected: d.blocks,
            found: m.blocks,
        });
    };
    let gdiag: Vec<C64> = g0
        .iter()
        .flat_map(|&s| std::iter::repeat_n(C64::new(s as f64, 0.0), n))
        .collect();
    let mg = mm.right_diag(&gdiag);
    if mg.max_abs_diff(&mm.left_diag(&gdiag)) != 0.0 {
        return Err(Error::InvalidArgument("M must commute with the grading of D".into()));
    }
    let dim = d.dim();
    let big = Csr::blocks(dim, &[vec![Some(&d.matrix), Some(&mg)], vec![Some(&mg), Some(&d.matrix)]]);
    let mut grading = g0.clone();
    grading.extend(g0.iter().map(|s| -s));
    SymOp::from_parts(
        d.grid,
        2 * d.blocks,
        big,
        Some(grading),
        None,
        Descriptor::GradedTensor {
            d: Box::new(d.descriptor.clone()),
            m: Box::new(m.descriptor.clone()),
        },
    )
}

/// Pointwise multiplication operator by a sampled (possibly complex) function.
#[derive(Debug, Clone)]
pub struct AlgebraElement {
    values: GridFunction,
    label: String,
    source: Option<RealFn>,
    support_radius: Option<f64>,
}

impl AlgebraElement {
    /// Samples `f`; `support_radius` declares `f = 0` for `|x| ≥ radius`.
    pub fn from_fn(grid: &Grid, f: &RealFn, support_radius: Option<f64>) -> Result<Self> {
        Ok(Self {
            values: sample(|x| f.eval(x), grid)?,
            label: f.label().to_string(),
            source: Some(f.clone()),
            support_radius,
        })
    }

    pub fn from_values(values: GridFunction, label: impl Into<String>, support_radius: Option<f64>) -> Self {
        Self {
            values,
            label: label.into(),
            source: None,
            support_radius,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.values.grid()
    }

    pub fn values(&self) -> &[C64] {
        self.values.values()
    }

    pub fn function(&self) -> &GridFunction {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn support_radius(&self) -> Option<f64> {
        self.support_radius
    }

    pub fn rebuild_on(&self, grid: &Grid) -> Result<Self> {
        match &self.source {
            Some(f) => Self::from_fn(grid, f, self.support_radius),
            None => Err(Error::InvalidArgument(format!(
                "algebra element '{}' has no source function to re-sample",
                self.label
            ))),
        }
    }

    /// Adjoint (pointwise conjugate).
    pub fn adjoint(&self) -> Self {
        let vals: Vec<C64> = self.values().iter().map(|v| v.conj()).collect();
        Self {
            values: GridFunction::new(*self.grid(), vals).expect("same length"),
            label: format!("({})*", self.label),
            source: None,
            support_radius: self.support_radius,
        }
    }

    /// Diagonal of the action on `blocks` copies of the grid.
    pub fn diag(&self, blocks: usize) -> Vec<C64> {
        let v = self.values();
        (0..blocks).flat_map(|_| v.iter().copied()).collect()
    }

    /// Diagonal matrix of the action on `blocks` copies of the grid.
    pub fn matrix(&self, blocks: usize) -> Csr {
        Csr::from_diag(&self.diag(blocks))
    }
}

fn action_diag(t: &SymOp, a: &AlgebraElement) -> Result<Vec<C64>> {
    t.grid.check_same(a.grid())?;
    Ok(a.diag(t.blocks))
}

/// `T a − a T`, pruned of exact zeros.
pub fn commutator(t: &SymOp, a: &AlgebraElement) -> Result<Csr> {
    let d = action_diag(t, a)?;
    Ok(t.matrix.right_diag(&d).sub(&t.matrix.left_diag(&d))?.prune())
}

/// `T a + a T`, pruned of exact zeros.
pub fn anticommutator(t: &SymOp, a: &AlgebraElement) -> Result<Csr> {
    let d = action_diag(t, a)?;
    Ok(t.matrix.right_diag(&d).add(&t.matrix.left_diag(&d))?.prune())
}

/// `A B − B A` for plain matrices.
pub fn commutator_matrices(a: &Csr, b: &Csr) -> Result<Csr> {
    Ok(a.matmul(b)?.sub(&b.matmul(a)?)?.prune())
}

/// `A B + B A` for plain matrices.
pub fn anticommutator_matrices(a: &Csr, b: &Csr) -> Result<Csr> {
    Ok(a.matmul(b)?.add(&b.matmul(a)?)?.prune())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::make_grid;
    use crate::linalg::{dense, op_norm};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn first_order_stencil_rows() {
        let g = make_grid(1.0, 3).unwrap();
        let d = first_order(&g, &RealFn::zero()).unwrap();
        let a = d.matrix().to_dense();
        assert_eq!(a[[0, 1]], c(0.0, 0.5));
        assert_eq!(a[[1, 0]], c(0.0, -0.5));
        assert_eq!(a[[1, 2]], c(0.0, 0.5));
        assert_eq!(a[[0, 2]], c(0.0, 0.0));
        let dx = first_order(&g, &RealFn::identity()).unwrap();
        let diff = dx.matrix().sub(d.matrix()).unwrap().prune();
        assert_eq!(diff, Csr::from_real_diag(&[-1.0, 0.0, 1.0]).prune());
        let complex = GridFunction::new(g, vec![c(0.0, 1.0); 3]).unwrap();
        assert!(first_order_sampled(&g, &complex).is_err());
    }

    #[test]
    fn schrodinger_stencil_rows() {
        let g = make_grid(1.0, 3).unwrap();
        let s = schrodinger(&g, &RealFn::zero()).unwrap();
        let a = s.matrix().to_dense();
        assert_eq!(a[[0, 0]], c(2.0, 0.0));
        assert_eq!(a[[0, 1]], c(-1.0, 0.0));
        assert_eq!(a[[1, 2]], c(-1.0, 0.0));
        assert_eq!(a[[0, 2]], c(0.0, 0.0));
        let complex = GridFunction::new(g, vec![c(1.0, 1.0); 3]).unwrap();
        assert!(schrodinger_sampled(&g, &complex).is_err());
    }

    #[test]
    fn double_odd_small_cases() {
        let g = make_grid(1.0, 3).unwrap();
        let z = double_odd(&zero(&g, 1)).unwrap();
        assert_eq!(z.matrix().nnz(), 0);
        assert!(z.is_graded());
        assert!(double_odd(&z).is_err());
        // D = 1 on a 1-point "space" is modelled by the identity multiplication
        let one = multiplication(&g, &RealFn::new("1", |_| 1.0)).unwrap();
        let t = double_odd(&one).unwrap();
        assert_eq!(t.matrix().get(0, 3), c(0.0, -1.0));
        assert_eq!(t.matrix().get(3, 0), c(0.0, 1.0));
        let w = dense::herm_eigvals(&t.matrix().to_dense()).unwrap();
        assert!(w.iter().all(|v| (v.abs() - 1.0).abs() < 1e-14));
        assert!(t.is_odd());
        let e = t.clifford().unwrap();
        assert_eq!(anticommutator_matrices(t.matrix(), e).unwrap().nnz(), 0);
    }

    #[test]
    fn doubled_spectrum_is_absolute_values() {
        let g = make_grid(5.0, 101).unwrap();
        let d = first_order(&g, &RealFn::new("sin x", f64::sin)).unwrap();
        let t = double_odd(&d).unwrap();
        let mut want: Vec<f64> = dense::herm_eigvals(&d.matrix().to_dense())
            .unwrap()
            .into_iter()
            .flat_map(|l| [l.abs(), -l.abs()])
            .collect();
        want.sort_by(f64::total_cmp);
        let got = dense::herm_eigvals(&t.matrix().to_dense()).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn even_round_trips() {
        let g = make_grid(5.0, 101).unwrap();
        let d = first_order(&g, &RealFn::zero()).unwrap();
        let (d2, m2) = split_even(&double_odd(&d).unwrap()).unwrap();
        assert_eq!(d2.matrix(), d.matrix());
        assert_eq!(m2.matrix().nnz(), 0);
        // ∂ + x, −∂ + x: D = −i∂ (central), M = x
        let t = even_dirac(&g, &RealFn::identity(), Stencil::Central).unwrap();
        let (dd, mm) = split_even(&t).unwrap();
        let minus_i_partial = central_diff(&g).scale(c(0.0, -1.0));
        assert_eq!(dd.matrix(), &minus_i_partial.prune());
        assert_eq!(mm.matrix(), multiplication(&g, &RealFn::identity()).unwrap().matrix());
        let zero_plus = Csr::zeros(101, 101);
        assert_eq!(assemble_even(&g, &zero_plus, &zero_plus).unwrap().matrix().nnz(), 0);
        let bad = central_diff(&g);
        assert!(matches!(assemble_even(&g, &bad, &bad), Err(Error::Precondition(_))));
    }

    #[test]
    fn graded_tensor_toy_square() {
        let g = make_grid(1.0, 3).unwrap();
        // D odd: [[0, 1], [1, 0]] blocks; M = 1
        let plus = Csr::identity(3);
        let d = assemble_even(&g, &plus, &plus).unwrap();
        let m = multiplication(&g, &RealFn::new("1", |_| 1.0)).unwrap();
        let t = graded_tensor_double(&d, &m).unwrap();
        assert_eq!(t.grading().unwrap(), &[1, -1, -1, 1]);
        assert!(t.is_odd());
        let sq = t.matrix().matmul(t.matrix()).unwrap();
        let d2 = d.matrix().matmul(d.matrix()).unwrap();
        let want = Csr::identity(2).kron(&d2).add(&Csr::identity(12)).unwrap();
        assert_eq!(sq.max_abs_diff(&want), 0.0);
        // M = 0 gives diag(D, D)
        let t0 = graded_tensor_double(&d, &zero(&g, 1)).unwrap();
        assert_eq!(t0.matrix(), &Csr::identity(2).kron(d.matrix()).prune());
    }

    #[test]
    fn commutators() {
        let g = make_grid(5.0, 201).unwrap();
        let f = multiplication(&g, &RealFn::new("x^2", |x| x * x)).unwrap();
        let a = AlgebraElement::from_fn(&g, &RealFn::new("cos", f64::cos), None).unwrap();
        assert_eq!(commutator(&f, &a).unwrap().nnz(), 0);
        // [i∂, x] = i on interior nodes to O(h²), in the sense of the averaging stencil
        let d = first_order(&g, &RealFn::zero()).unwrap();
        let x = AlgebraElement::from_fn(&g, &RealFn::identity(), None).unwrap();
        let cm = commutator(&d, &x).unwrap();
        let ones = vec![c(1.0, 0.0); 201];
        let y = cm.matvec(&ones);
        for v in &y[1..200] {
            assert!((v - c(0.0, 1.0)).norm() < 1e-12);
        }
        let t = double_odd(&d).unwrap();
        let e = t.clifford().unwrap();
        assert_eq!(anticommutator_matrices(t.matrix(), e).unwrap().nnz(), 0);
        // smooth bump: ‖[i∂, φ]‖ ≈ sup|φ'|
        let phi = AlgebraElement::from_fn(&g, &RealFn::new("gauss", |x| (-x * x).exp()), None).unwrap();
        let n1 = op_norm(&commutator(&d, &phi).unwrap()).unwrap();
        let sup = (2.0f64).sqrt() * (-0.5f64).exp();
        assert!((n1 - sup).abs() < 5e-2 * sup, "{n1} vs {sup}");
    }

    #[test]
    fn rebuild_from_descriptor() {
        let g = make_grid(2.0, 21).unwrap();
        let t = even_dirac(&g, &RealFn::identity(), Stencil::Forward).unwrap();
        let g2 = g.refine();
        let t2 = t.rebuild_on(&g2).unwrap();
        assert_eq!(t2.dim(), 2 * 41);
        assert_eq!(t2.matrix(), even_dirac(&g2, &RealFn::identity(), Stencil::Forward).unwrap().matrix());
        let opaque = assemble_even(&g, &Csr::identity(21), &Csr::identity(21)).unwrap();
        assert!(opaque.rebuild_on(&g2).is_err());
    }
}
