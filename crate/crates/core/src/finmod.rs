//! Finite-dimensional Hilbert modules `E = B^n` over `B = ⊕ M_{d_i}(ℂ)`.
//!
//! An element of `E` is stored through its block components: component `i`
//! stacks the `n` blocks `u_j^{(i)} ∈ M_{d_i}` into an `(n d_i) × d_i`
//! matrix, vectorized column-major. Module operators are plain complex
//! matrices on this underlying space; right-`B`-linearity is checked on a
//! basis.

use ndarray::{s, Array2};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::dense::{adjoint, herm_eigvals, max_abs_diff as max_diff};

/// Equality gate for every identity in this module.
pub const EXACT_TOL: f64 = 1e-12;
/// Instances per identity in the battery.
pub const BATTERY_INSTANCES: usize = 100;
/// Flag attached to every report of this module.
pub const REGULARITY_NOTE: &str = "finite-dimensional: regularity automatic";

/// `B = ⊕ M_{d_i}(ℂ)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FiniteAlgebra {
    block_dims: Vec<usize>,
}

impl FiniteAlgebra {
    pub fn new(block_dims: &[usize]) -> Result<Self> {
        if block_dims.is_empty() || block_dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("block dimensions {block_dims:?} must be positive")));
        }
        Ok(Self {
            block_dims: block_dims.to_vec(),
        })
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    /// Matrix units `e_{rc}` of every block, as per-block matrices.
    fn basis(&self) -> Vec<Vec<Array2<C64>>> {
        (0..self.block_dims.len())
            .flat_map(|i| {
                let d = self.block_dims[i];
                (0..d * d).map(move |rc| {
                    self.block_dims
                        .iter()
                        .enumerate()
                        .map(|(b, &db)| {
                            let mut m = Array2::zeros((db, db));
                            if b == i {
                                m[[rc / d, rc % d]] = C64::new(1.0, 0.0);
                            }
                            m
                        })
                        .collect()
                })
            })
            .collect()
    }
}

/// `E = B^n` with `⟨u|v⟩ = Σ u_j* v_j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FiniteModule {
    algebra: FiniteAlgebra,
    rank: usize,
}

/// Builds `B^rank` over `⊕ M_{d}(ℂ)`.
pub fn make_module(block_dims: &[usize], rank: usize) -> Result<FiniteModule> {
    if rank == 0 {
        return Err(Error::InvalidArgument("module rank must be at least 1".into()));
    }
    Ok(FiniteModule {
        algebra: FiniteAlgebra::new(block_dims)?,
        rank,
    })
}

impl FiniteModule {
    pub fn algebra(&self) -> &FiniteAlgebra {
        &self.algebra
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Dimension `n d_i` of the `i`-th localization.
    pub fn localization_dim(&self, i: usize) -> usize {
        self.rank * self.algebra.block_dims[i]
    }

    /// Complex dimension `Σ n d_i²` of the underlying space.
    pub fn dim(&self) -> usize {
        self.algebra.block_dims.iter().map(|d| self.rank * d * d).sum()
    }

    fn offset(&self, i: usize) -> usize {
        self.algebra.block_dims[..i].iter().map(|d| self.rank * d * d).sum()
    }

    /// Component `i` of `u` as an `(n d_i) × d_i` matrix.
    pub fn component(&self, u: &[C64], i: usize) -> Array2<C64> {
        let (nd, d, o) = (self.localization_dim(i), self.algebra.block_dims[i], self.offset(i));
        Array2::from_shape_fn((nd, d), |(r, c)| u[o + c * nd + r])
    }

    fn assemble(&self, comps: &[Array2<C64>]) -> Vec<C64> {
        let mut u = vec![C64::new(0.0, 0.0); self.dim()];
        for (i, x) in comps.iter().enumerate() {
            let (nd, o) = (self.localization_dim(i), self.offset(i));
            for ((r, c), v) in x.indexed_iter() {
                u[o + c * nd + r] = *v;
            }
        }
        u
    }

    /// `u · b` for `b ∈ B` given blockwise.
    pub fn right_mul(&self, u: &[C64], b: &[Array2<C64>]) -> Vec<C64> {
        let comps: Vec<Array2<C64>> = (0..b.len()).map(|i| self.component(u, i).dot(&b[i])).collect();
        self.assemble(&comps)
    }

    /// `⟨u|v⟩ ∈ B`, blockwise.
    pub fn inner(&self, u: &[C64], v: &[C64]) -> Vec<Array2<C64>> {
        (0..self.algebra.block_dims.len())
            .map(|i| adjoint(&self.component(u, i)).dot(&self.component(v, i)))
            .collect()
    }
}

fn max_abs(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// A right-`B`-linear operator on `E`, stored on the underlying space.
#[derive(Debug, Clone)]
pub struct ModuleOp {
    module: FiniteModule,
    matrix: Array2<C64>,
}

impl ModuleOp {
    /// Wraps a matrix on the underlying space after checking
    /// `T(u b) = T(u) b` on basis vectors `u` and matrix units `b`.
    pub fn from_matrix(module: &FiniteModule, matrix: Array2<C64>) -> Result<Self> {
        let n = module.dim();
        if matrix.dim() != (n, n) {
            return Err(Error::InvalidArgument(format!(
                "operator is {:?}, module space has dimension {n}",
                matrix.dim()
            )));
        }
        let basis = module.algebra.basis();
        let scale = max_abs(&matrix).max(1.0);
        for col in 0..n {
            let mut u = vec![C64::new(0.0, 0.0); n];
            u[col] = C64::new(1.0, 0.0);
            let tu = matrix.dot(&ndarray::Array1::from(u.clone())).to_vec();
            for b in &basis {
                let lhs = matrix.dot(&ndarray::Array1::from(module.right_mul(&u, b))).to_vec();
                let rhs = module.right_mul(&tu, b);
                let d = lhs.iter().zip(&rhs).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
                if d > EXACT_TOL * scale {
                    return Err(Error::Precondition(format!(
                        "operator is not right-B-linear: defect {d:e} on basis vector {col}"
                    )));
                }
            }
        }
        Ok(Self {
            module: module.clone(),
            matrix,
        })
    }

    /// `⊕_i T_i` acting by left multiplication on each component.
    pub fn from_blocks(module: &FiniteModule, blocks: &[Array2<C64>]) -> Result<Self> {
        let k = module.algebra.block_dims.len();
        if blocks.len() != k {
            return Err(Error::InvalidArgument(format!("expected {k} blocks, got {}", blocks.len())));
        }
        let n = module.dim();
        let mut m = Array2::zeros((n, n));
        for (i, t) in blocks.iter().enumerate() {
            let (nd, d, o) = (module.localization_dim(i), module.algebra.block_dims[i], module.offset(i));
            if t.dim() != (nd, nd) {
                return Err(Error::InvalidArgument(format!("block {i} is {:?}, expected {nd}×{nd}", t.dim())));
            }
            for c in 0..d {
                let at = o + c * nd;
                m.slice_mut(s![at..at + nd, at..at + nd]).assign(t);
            }
        }
        Ok(Self {
            module: module.clone(),
            matrix: m,
        })
    }

    pub fn identity(module: &FiniteModule) -> Self {
        Self {
            module: module.clone(),
            matrix: Array2::eye(module.dim()),
        }
    }

    pub fn zero(module: &FiniteModule) -> Self {
        Self {
            module: module.clone(),
            matrix: Array2::zeros((module.dim(), module.dim())),
        }
    }

    pub fn module(&self) -> &FiniteModule {
        &self.module
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    /// Module adjoint; equals the conjugate transpose on the underlying space.
    pub fn adjoint(&self) -> Self {
        Self {
            module: self.module.clone(),
            matrix: adjoint(&self.matrix),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            module: self.module.clone(),
            matrix: &self.matrix + &other.matrix,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            module: self.module.clone(),
            matrix: &self.matrix - &other.matrix,
        }
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self {
            module: self.module.clone(),
            matrix: self.matrix.dot(&other.matrix),
        }
    }

    pub fn apply(&self, u: &[C64]) -> Vec<C64> {
        self.matrix.dot(&ndarray::Array1::from(u.to_vec())).to_vec()
    }

    /// Induced matrix on `E ⊗_B ℂ^{d_i} = ℂ^{n d_i}`.
    pub fn localize(&self, i: usize) -> Result<Array2<C64>> {
        let k = self.module.algebra.block_dims.len();
        if i >= k {
            return Err(Error::OutOfRange(format!("block {i} of {k}")));
        }
        let (nd, o) = (self.module.localization_dim(i), self.module.offset(i));
        // first column of component i carries ℂ^{n d_i}
        Ok(self.matrix.slice(s![o..o + nd, o..o + nd]).to_owned())
    }
}

/// `[A, B] = AB − BA`.
pub fn commutator(a: &ModuleOp, b: &ModuleOp) -> ModuleOp {
    a.compose(b).sub(&b.compose(a))
}

/// Per-localization Hermiticity of a module operator.
#[derive(Debug, Clone, Serialize)]
pub struct LocalGlobalReport {
    /// `max |T^π − (T^π)*|` for each block.
    pub defects: Vec<f64>,
    pub tolerance: f64,
    /// Every localization is Hermitian.
    pub verdict: bool,
    /// `T + i·1` was rejected.
    pub perturbation_detected: bool,
    pub note: &'static str,
}

fn local_defects(t: &ModuleOp) -> Result<Vec<f64>> {
    (0..t.module.algebra.block_dims.len())
        .map(|i| {
            let l = t.localize(i)?;
            Ok(max_diff(&l, &adjoint(&l)))
        })
        .collect()
}

/// Local-global check: `T` is symmetric iff all localizations are Hermitian.
pub fn check_local_global(t: &ModuleOp) -> Result<LocalGlobalReport> {
    let defects = local_defects(t)?;
    let verdict = defects.iter().all(|&d| d <= EXACT_TOL);
    let shifted = t.add(&ModuleOp {
        module: t.module.clone(),
        matrix: Array2::eye(t.module.dim()).mapv(|v: C64| v * C64::new(0.0, 1.0)),
    });
    let perturbation_detected = local_defects(&shifted)?.iter().any(|&d| d > EXACT_TOL);
    Ok(LocalGlobalReport {
        defects,
        tolerance: EXACT_TOL,
        verdict,
        perturbation_detected,
        note: REGULARITY_NOTE,
    })
}

/// Outcome of one identity over all instances.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityResult {
    pub name: String,
    pub instances: usize,
    pub passed: usize,
    pub max_residual: f64,
    pub tolerance: f64,
}

/// Outcome of one injected violation over all instances.
#[derive(Debug, Clone, Serialize)]
pub struct InjectionResult {
    pub name: String,
    pub instances: usize,
    pub detected: usize,
    /// Smallest defect among the injected instances.
    pub min_defect: f64,
    pub tolerance: f64,
}

/// Battery of finite-dimensional module identities.
#[derive(Debug, Clone, Serialize)]
pub struct BatteryReport {
    pub seed: u64,
    pub identities: Vec<IdentityResult>,
    pub injections: Vec<InjectionResult>,
    pub note: &'static str,
    pub verdict: bool,
}

/// One randomly drawn battery instance, kept for counterexample reports.
#[derive(Debug, Clone, Serialize)]
pub struct Instance {
    pub identity: String,
    pub index: usize,
    pub block_dims: Vec<usize>,
    pub rank: usize,
    /// Operators as `[re, im]` row-major matrices on the underlying space.
    pub operators: Vec<Vec<[f64; 2]>>,
    pub residual: f64,
}

fn random_module(rng: &mut ChaCha8Rng) -> FiniteModule {
    let k = rng.gen_range(1..=3);
    let dims: Vec<usize> = (0..k).map(|_| rng.gen_range(1..=3)).collect();
    make_module(&dims, rng.gen_range(1..=3)).expect("positive dims")
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> Array2<C64> {
    Array2::from_shape_fn((n, n), |_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn random_op(rng: &mut ChaCha8Rng, m: &FiniteModule, hermitian: bool) -> ModuleOp {
    let blocks: Vec<Array2<C64>> = (0..m.algebra.block_dims.len())
        .map(|i| {
            let a = random_matrix(rng, m.localization_dim(i));
            if hermitian {
                (&a + &adjoint(&a)).mapv(|z| z * 0.5)
            } else {
                a
            }
        })
        .collect();
    ModuleOp::from_blocks(m, &blocks).expect("block shapes match")
}

/// Random non-Hermitian module operator with `‖N − N*‖ ≥ 1/2` in a block.
fn random_asymmetric(rng: &mut ChaCha8Rng, m: &FiniteModule) -> ModuleOp {
    let i = rng.gen_range(0..m.algebra.block_dims.len());
    let nd = m.localization_dim(i);
    let blocks: Vec<Array2<C64>> = (0..m.algebra.block_dims.len())
        .map(|b| {
            let d = m.localization_dim(b);
            let mut a = Array2::zeros((d, d));
            if b == i {
                if nd == 1 {
                    a[[0, 0]] = C64::new(0.0, rng.gen_range(0.5..1.0));
                } else {
                    // nilpotent upper corner
                    a[[0, nd - 1]] = C64::new(rng.gen_range(0.5..1.0), rng.gen_range(-1.0..1.0));
                }
            }
            a
        })
        .collect();
    ModuleOp::from_blocks(m, &blocks).expect("block shapes match")
}

fn serialize_op(t: &ModuleOp) -> Vec<[f64; 2]> {
    t.matrix.iter().map(|z| [z.re, z.im]).collect()
}

fn instance_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

type Trial = fn(&mut ChaCha8Rng) -> (FiniteModule, Vec<ModuleOp>, f64);

fn trial_homomorphism(rng: &mut ChaCha8Rng) -> (FiniteModule, Vec<ModuleOp>, f64) {
    let m = random_module(rng);
    let (s, t) = (random_op(rng, &m, false), random_op(rng, &m, false));
    let mut r: f64 = 0.0;
    for i in 0..m.algebra.block_dims.len() {
        let (ls, lt) = (s.localize(i).unwrap(), t.localize(i).unwrap());
        r = r.max(max_diff(&s.add(&t).localize(i).unwrap(), &(&ls + &lt)));
        r = r.max(max_diff(&s.compose(&t).localize(i).unwrap(), &ls.dot(&lt)));
        r = r.max(max_diff(&s.adjoint().localize(i).unwrap(), &adjoint(&ls)));
    }
    // ⟨Tu|v⟩ = ⟨u|T*v⟩ and positivity of ⟨u|u⟩
    let u: Vec<C64> = (0..m.dim()).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let v: Vec<C64> = (0..m.dim()).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let lhs = m.inner(&s.apply(&u), &v);
    let rhs = m.inner(&u, &s.adjoint().apply(&v));
    for (a, b) in lhs.iter().zip(&rhs) {
        r = r.max(max_diff(a, b));
    }
    for g in m.inner(&u, &u) {
        r = r.max((-min_eig(&g)).max(0.0));
    }
    (m, vec![s, t], r)
}

fn trial_commutator(rng: &mut ChaCha8Rng) -> (FiniteModule, Vec<ModuleOp>, f64) {
    let m = random_module(rng);
    let (mm, phi) = (random_op(rng, &m, true), random_op(rng, &m, true));
    (m, vec![mm.clone(), phi.clone()], commutator_identity_residual(&mm, &phi))
}

fn trial_local_global(rng: &mut ChaCha8Rng) -> (FiniteModule, Vec<ModuleOp>, f64) {
    let m = random_module(rng);
    let t = random_op(rng, &m, true);
    let rep = check_local_global(&t).unwrap();
    let global = max_diff(&t.matrix, &adjoint(&t.matrix));
    // agreement of the global and local verdicts, and the residual itself
    let ok = rep.verdict == (global <= EXACT_TOL) && rep.verdict && rep.perturbation_detected;
    let r = if ok { rep.defects.iter().copied().fold(global, f64::max) } else { f64::INFINITY };
    (m, vec![t], r)
}

/// `max |[M, φ] − (Mφ − (Mφ)*)|`.
pub fn commutator_identity_residual(m: &ModuleOp, phi: &ModuleOp) -> f64 {
    let mphi = m.compose(phi);
    max_diff(&commutator(m, phi).matrix, &mphi.sub(&mphi.adjoint()).matrix)
}

fn min_eig(g: &Array2<C64>) -> f64 {
    herm_eigvals(g).map(|w| w.into_iter().fold(f64::INFINITY, f64::min)).unwrap_or(f64::NEG_INFINITY)
}

fn injection_local_global(rng: &mut ChaCha8Rng) -> (FiniteModule, Vec<ModuleOp>, f64) {
    let m = random_module(rng);
    let t = random_op(rng, &m, true).add(&random_asymmetric(rng, &m));
    let rep = check_local_global(&t).unwrap();
    let d = rep.defects.iter().copied().fold(0.0, f64::max);
    (m, vec![t], if rep.verdict { 0.0 } else { d })
}

fn injection_commutator(rng: &mut ChaCha8Rng) -> (FiniteModule, Vec<ModuleOp>, f64) {
    let m = random_module(rng);
    let mm = random_op(rng, &m, true).add(&random_asymmetric(rng, &m));
    let phi = random_op(rng, &m, true);
    // the identity must break for a non-symmetric M against φ = 1
    let id = ModuleOp::identity(&m);
    let r = commutator_identity_residual(&mm, &id).max(commutator_identity_residual(&mm, &phi));
    (m, vec![mm, phi], r)
}

fn run_identity(seed: u64, stream: u64, name: &str, f: Trial) -> Result<IdentityResult> {
    let results: Vec<(usize, FiniteModule, Vec<ModuleOp>, f64)> = (0..BATTERY_INSTANCES)
        .into_par_iter()
        .map(|k| {
            let mut rng = instance_rng(seed, stream * 1_000_000 + k as u64);
            let (m, ops, r) = f(&mut rng);
            (k, m, ops, r)
        })
        .collect();
    let max_residual = results.iter().map(|r| r.3).fold(0.0, f64::max);
    if let Some((k, m, ops, r)) = results.into_iter().find(|r| !(r.3 <= EXACT_TOL)) {
        let inst = Instance {
            identity: name.to_string(),
            index: k,
            block_dims: m.algebra.block_dims.clone(),
            rank: m.rank,
            operators: ops.iter().map(serialize_op).collect(),
            residual: r,
        };
        return Err(Error::BatteryFailure(serde_json::to_string(&inst)?));
    }
    Ok(IdentityResult {
        name: name.to_string(),
        instances: BATTERY_INSTANCES,
        passed: BATTERY_INSTANCES,
        max_residual,
        tolerance: EXACT_TOL,
    })
}

fn run_injection(seed: u64, stream: u64, name: &str, f: Trial) -> InjectionResult {
    let defects: Vec<f64> = (0..BATTERY_INSTANCES)
        .into_par_iter()
        .map(|k| f(&mut instance_rng(seed, stream * 1_000_000 + k as u64)).2)
        .collect();
    InjectionResult {
        name: name.to_string(),
        instances: BATTERY_INSTANCES,
        detected: defects.iter().filter(|&&d| d > EXACT_TOL).count(),
        min_defect: defects.iter().copied().fold(f64::INFINITY, f64::min),
        tolerance: EXACT_TOL,
    }
}

/// Runs every identity on [`BATTERY_INSTANCES`] seeded instances.
/// A failing identity aborts with the serialized counterexample.
pub fn check_lemma_battery(seed: u64) -> Result<BatteryReport> {
    let identities = vec![
        run_identity(seed, 0, "localization_homomorphism", trial_homomorphism)?,
        run_identity(seed, 1, "commutator_closure", trial_commutator)?,
        run_identity(seed, 2, "local_global", trial_local_global)?,
    ];
    let injections = vec![
        run_injection(seed, 3, "asymmetric_local_global", injection_local_global),
        run_injection(seed, 4, "asymmetric_commutator", injection_commutator),
    ];
    let verdict = injections.iter().all(|i| i.detected == i.instances);
    Ok(BatteryReport {
        seed,
        identities,
        injections,
        note: REGULARITY_NOTE,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn module_shapes() {
        let m = make_module(&[1], 1).unwrap();
        assert_eq!((m.dim(), m.localization_dim(0)), (1, 1));
        let m = make_module(&[2], 3).unwrap();
        assert_eq!(m.localization_dim(0), 6);
        let m = make_module(&[1, 2], 2).unwrap();
        assert_eq!((m.localization_dim(0), m.localization_dim(1)), (2, 4));
        assert!(make_module(&[], 1).is_err());
        assert!(make_module(&[2, 0], 1).is_err());
        assert!(make_module(&[2], 0).is_err());
    }

    #[test]
    fn identity_localizes_to_identity() {
        let m = make_module(&[2, 3], 2).unwrap();
        let id = ModuleOp::identity(&m);
        for i in 0..2 {
            assert_eq!(id.localize(i).unwrap(), Array2::<C64>::eye(m.localization_dim(i)));
        }
        assert!(id.localize(2).is_err());
    }

    #[test]
    fn right_linearity_is_enforced() {
        let m = make_module(&[2], 1).unwrap();
        let mut rng = instance_rng(7, 0);
        let t = random_op(&mut rng, &m, false);
        assert!(ModuleOp::from_matrix(&m, t.matrix().clone()).is_ok());
        // a map mixing the columns of a component is ℂ-linear only
        let mut bad = Array2::<C64>::zeros((4, 4));
        bad[[0, 2]] = C64::new(1.0, 0.0);
        assert!(matches!(ModuleOp::from_matrix(&m, bad), Err(Error::Precondition(_))));
        assert!(ModuleOp::from_matrix(&m, Array2::zeros((3, 3))).is_err());
    }

    #[test]
    fn local_global_examples() {
        let m = make_module(&[2, 3], 2).unwrap();
        let mut rng = instance_rng(11, 0);
        let t = random_op(&mut rng, &m, true);
        let r = check_local_global(&t).unwrap();
        assert!(r.verdict && r.perturbation_detected);
        let mut nil = Array2::<C64>::zeros((4, 4));
        nil[[0, 3]] = C64::new(1.0, 0.0);
        let n = ModuleOp::from_blocks(&m, &[nil, Array2::zeros((6, 6))]).unwrap();
        assert!(!check_local_global(&t.add(&n)).unwrap().verdict);
        assert!(check_local_global(&ModuleOp::zero(&m)).unwrap().verdict);
    }

    #[test]
    fn battery_passes_and_is_seeded() {
        let a = check_lemma_battery(42).unwrap();
        assert!(a.verdict);
        assert!(a.identities.iter().all(|i| i.passed == BATTERY_INSTANCES && i.max_residual <= EXACT_TOL));
        assert!(a.injections.iter().all(|i| i.detected == BATTERY_INSTANCES));
        let b = check_lemma_battery(42).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn failure_serializes_counterexample() {
        let bad: Trial = |rng| {
            let (m, ops, _) = trial_commutator(rng);
            (m, ops, 1.0)
        };
        match run_identity(1, 9, "broken", bad) {
            Err(Error::BatteryFailure(json)) => {
                let v: serde_json::Value = serde_json::from_str(&json).unwrap();
                assert_eq!(v["identity"], "broken");
                assert_eq!(v["index"], 0);
                assert!(v["operators"].as_array().unwrap().len() == 2);
            }
            other => panic!("expected a battery failure, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn inner_product_is_hermitian_and_positive(seed in any::<u64>()) {
            let mut rng = instance_rng(seed, 0);
            let m = random_module(&mut rng);
            let u: Vec<C64> = (0..m.dim()).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let v: Vec<C64> = (0..m.dim()).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            for (a, b) in m.inner(&u, &v).iter().zip(m.inner(&v, &u)) {
                prop_assert!(max_diff(&adjoint(a), &b) <= EXACT_TOL);
            }
            for g in m.inner(&u, &u) {
                prop_assert!(min_eig(&g) >= -1e-12);
            }
        }

        #[test]
        fn local_global_equivalence(seed in any::<u64>(), symmetric in any::<bool>()) {
            let mut rng = instance_rng(seed, 1);
            let m = random_module(&mut rng);
            let mut t = random_op(&mut rng, &m, true);
            if !symmetric {
                t = t.add(&random_asymmetric(&mut rng, &m));
            }
            prop_assert_eq!(check_local_global(&t).unwrap().verdict, symmetric);
        }
    }
}
