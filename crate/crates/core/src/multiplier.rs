//! Unbounded multipliers `m = Σ 2^k (φ_{k+1} − φ_k)` built from a selected
//! cutoff subsequence, and the compact-resolvent surrogate for the doubled
//! perturbed operator.
//!
//! Compact resolvent is operationalized as: the eigenvalue counting function
//! is identical on two nested domains below a frontier, and the counted
//! eigenvectors carry at most `1e-6` of their mass in the outer 10% shell.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::approxid::{cutoff_family, CutoffFamily, Profile, ProperFn};
use crate::error::{Error, Result};
use crate::funcspace::{sample, Grid, RealFn};
use crate::kasparov::bump;
use crate::linalg::{op_norm, Csr};
use crate::operators::{commutator, first_order, graded_tensor_double, multiplication, odd_perturbed, AlgebraElement, SymOp};
use crate::spectrum::{count_abs_le, eigenvalues, max_mass_abs_le};

/// Largest allowed eigenvector mass in the boundary shell.
pub const BOUNDARY_MASS_LIMIT: f64 = 1e-6;
/// Fraction of the half-width forming the boundary shell.
pub const BOUNDARY_SHELL: f64 = 0.1;
/// Ratio between the outer and inner nested domains.
pub const DOMAIN_GROWTH: f64 = 1.25;

fn four_pow_neg(k: usize) -> f64 {
    0.25f64.powi(k as i32)
}

/// Witnessed bounds for one selected cutoff.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionStep {
    /// One-based position in the selected sequence.
    pub k: usize,
    /// Scale of the chosen raw cutoff.
    pub scale: f64,
    pub raw_position: usize,
    /// `‖[D, φ_k]‖`, required below `4^{-k}`.
    pub commutator_norm: f64,
    pub bound: f64,
    /// `‖(φ_{k+1} − φ_k) a_j‖` for `j < k`, required below `4^{-k}`;
    /// empty for the last step.
    pub total_norms: Vec<f64>,
}

/// Per-step witnesses of a greedy selection.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionCertificate {
    pub steps: Vec<SelectionStep>,
}

impl SelectionCertificate {
    /// Every stored bound holds strictly.
    pub fn holds(&self) -> bool {
        self.steps
            .iter()
            .all(|s| s.commutator_norm < s.bound && s.total_norms.iter().all(|&t| t < s.bound))
    }

    /// Recomputes every norm from scratch and checks the bounds again.
    pub fn reverify(&self, selected: &CutoffFamily, totals: &[AlgebraElement], d: &SymOp) -> Result<bool> {
        if selected.len() != self.steps.len() {
            return Ok(false);
        }
        for (i, s) in self.steps.iter().enumerate() {
            let c = op_norm(&commutator(d, selected.element(i))?)?;
            if c != s.commutator_norm || !(c < s.bound) {
                return Ok(false);
            }
            if i + 1 < self.steps.len() {
                let t = total_norms(selected.element(i + 1), selected.element(i), totals, s.k);
                if t != s.total_norms || t.iter().any(|&v| !(v < s.bound)) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// `‖(φ_b − φ_a) a_j‖` for `j < k` (one-based `j`), exact for diagonals.
fn total_norms(phi_b: &AlgebraElement, phi_a: &AlgebraElement, totals: &[AlgebraElement], k: usize) -> Vec<f64> {
    totals
        .iter()
        .take(k.saturating_sub(1))
        .map(|a| {
            phi_b
                .values()
                .iter()
                .zip(phi_a.values())
                .zip(a.values())
                .map(|((b, x), v)| ((b - x) * v).norm())
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Largest column 2-norm, a lower bound for the operator norm.
fn column_lower_bound(c: &Csr) -> f64 {
    let mut cols = vec![0.0; c.cols()];
    for (_, j, v) in c.iter() {
        cols[j] += v.norm_sqr();
    }
    cols.into_iter().fold(0.0, f64::max).sqrt()
}

/// Greedy selection of `count` cutoffs: `K(k)` is the first unused raw
/// member after `K(k−1)` with `‖[D, φ_K]‖ < 4^{-k}` and
/// `‖(φ_K − φ_{K(k−1)}) a_j‖ < 4^{-(k−1)}` for `j < k − 1`.
pub fn select_subsequence(
    raw: &CutoffFamily,
    totals: &[AlgebraElement],
    d: &SymOp,
    count: usize,
) -> Result<(CutoffFamily, SelectionCertificate)> {
    d.grid().check_same(raw.grid())?;
    for a in totals {
        raw.grid().check_same(a.grid())?;
        if a.support_radius().is_none() {
            return Err(Error::Precondition(format!("total '{}' is not compactly supported", a.label())));
        }
    }
    let mut chosen: Vec<usize> = Vec::with_capacity(count);
    let mut steps: Vec<SelectionStep> = Vec::with_capacity(count);
    let mut next = 0;
    for k in 1..=count {
        let bound = four_pow_neg(k);
        let mut accepted = None;
        let mut last_failure = String::from("no raw members left");
        for pos in next..raw.len() {
            let pair = match chosen.last() {
                Some(&prev) => {
                    let t = total_norms(raw.element(pos), raw.element(prev), totals, k - 1);
                    if let Some(v) = t.iter().find(|&&v| !(v < four_pow_neg(k - 1))) {
                        last_failure = format!("‖(φ_K − φ_prev) a_j‖ = {v:e} at scale {}", raw.scales()[pos]);
                        continue;
                    }
                    Some(t)
                }
                None => None,
            };
            let c = commutator(d, raw.element(pos))?;
            if column_lower_bound(&c) >= bound {
                last_failure = format!("‖[D, φ_K]‖ ≥ {bound:e} at scale {}", raw.scales()[pos]);
                continue;
            }
            let norm = op_norm(&c)?;
            if norm < bound {
                accepted = Some((pos, norm, pair));
                break;
            }
            last_failure = format!("‖[D, φ_K]‖ = {norm:e} ≥ {bound:e} at scale {}", raw.scales()[pos]);
        }
        let (pos, norm, pair) = accepted.ok_or_else(|| {
            Error::SelectionExhausted(format!("step {k} (bound {bound:e}): {last_failure}"))
        })?;
        if let (Some(prev), Some(t)) = (steps.last_mut(), pair) {
            prev.total_norms = t;
        }
        steps.push(SelectionStep {
            k,
            scale: raw.scales()[pos],
            raw_position: pos,
            commutator_norm: norm,
            bound,
            total_norms: Vec::new(),
        });
        chosen.push(pos);
        next = pos + 1;
    }
    Ok((raw.select(&chosen), SelectionCertificate { steps }))
}

/// Truncations `m_n = Σ_{k ≤ n} 2^k (φ_{k+1} − φ_k)` of the multiplier.
#[derive(Debug, Clone, Serialize)]
pub struct MultiplierSeries {
    pub selected_scales: Vec<f64>,
    pub n_trunc: usize,
    #[serde(skip)]
    pub selected: CutoffFamily,
    /// `m_0, …, m_{n_trunc}`.
    #[serde(skip)]
    pub truncations: Vec<AlgebraElement>,
    pub selection_certificate: SelectionCertificate,
    /// `(x, m_{n_trunc}(x))` samples on `[0, L]`.
    pub growth_profile: Vec<(f64, f64)>,
}

impl MultiplierSeries {
    /// Deepest truncation.
    pub fn deepest(&self) -> &AlgebraElement {
        &self.truncations[self.n_trunc]
    }

    /// `m_n` as a function of `x`.
    pub fn function(&self, n: usize) -> RealFn {
        let phis: Vec<RealFn> = (0..=n.min(self.selected.len() - 1)).map(|i| self.selected.function(i)).collect();
        RealFn::new(format!("m_{n}"), move |x| {
            let mut acc = 0.0;
            for k in 1..=n {
                acc += 2f64.powi(k as i32) * (phis[k].eval(x) - phis[k - 1].eval(x));
            }
            acc
        })
    }
}

/// Builds `m_0, …, m_n` from a certified selection.
pub fn build_multiplier(
    selected: &CutoffFamily,
    certificate: &SelectionCertificate,
    n_trunc: usize,
) -> Result<MultiplierSeries> {
    if certificate.steps.len() != selected.len() || !certificate.holds() {
        return Err(Error::Precondition("selection certificate missing or violated".into()));
    }
    if n_trunc + 1 > selected.len() {
        return Err(Error::OutOfRange(format!(
            "truncation depth {n_trunc} needs {} selected cutoffs, have {}",
            n_trunc + 1,
            selected.len()
        )));
    }
    let grid = *selected.grid();
    let mut series = MultiplierSeries {
        selected_scales: selected.scales().to_vec(),
        n_trunc,
        selected: selected.clone(),
        truncations: Vec::with_capacity(n_trunc + 1),
        selection_certificate: certificate.clone(),
        growth_profile: Vec::new(),
    };
    for n in 0..=n_trunc {
        // m_n vanishes outside the support of φ_{n+1}
        let radius = if n == 0 { Some(0.0) } else { selected.element(n).support_radius() };
        let m = AlgebraElement::from_fn(&grid, &series.function(n), radius)?;
        series.truncations.push(m);
    }
    let f = series.function(n_trunc);
    let l = grid.half_width();
    series.growth_profile = (0..=256).map(|i| l * i as f64 / 256.0).map(|x| (x, f.eval(x))).collect();
    Ok(series)
}

/// Tail bound for one annulus.
#[derive(Debug, Clone, Serialize)]
pub struct TailRow {
    pub k: usize,
    /// Outer radius of `{φ_k ≥ 1/2}`.
    pub radius: f64,
    /// `sup |(m_n ± i)^{-1}|` over `{φ_k < 1/2} ∩ {φ_{n+1} = 1}`.
    pub tail_sup: f64,
    /// `2^{-k+1}`.
    pub bound: f64,
    pub ok: bool,
}

/// Vanishing-at-infinity evidence for `(m ± i)^{-1}`.
#[derive(Debug, Clone, Serialize)]
pub struct ResolventTailReport {
    pub rows: Vec<TailRow>,
    pub monotone: bool,
    pub verdict: bool,
}

/// Checks `|(m_n ± i)^{-1}| ≤ 1/((1 − t) 2^k)` with `t = 1/2` beyond the
/// `t`-level set of `φ_k`, inside the plateau of `φ_{n+1}`.
pub fn resolvent_in_a(series: &MultiplierSeries) -> Result<ResolventTailReport> {
    let fam = &series.selected;
    let grid = fam.grid();
    let n = series.n_trunc;
    let m: Vec<f64> = series.deepest().values().iter().map(|v| v.re).collect();
    let outer = if n >= 1 { n } else { fam.len() - 1 };
    let plateau = fam.values(outer);
    let ks: Vec<usize> = if n >= 1 { (1..=n).collect() } else { vec![1] };
    let mut rows = Vec::with_capacity(ks.len());
    for &k in &ks {
        let phi = fam.values(k - 1);
        let radius = (0..grid.n_points())
            .filter(|&j| phi[j] >= 0.5)
            .map(|j| grid.node(j).abs())
            .fold(0.0, f64::max);
        let region: Vec<usize> = (0..grid.n_points()).filter(|&j| phi[j] < 0.5 && plateau[j] == 1.0).collect();
        if region.is_empty() {
            return Err(Error::Precondition(format!(
                "grid of half-width {} does not contain the tail region of annulus {k}",
                grid.half_width()
            )));
        }
        let tail_sup = region.iter().map(|&j| 1.0 / (m[j] * m[j] + 1.0).sqrt()).fold(0.0, f64::max);
        let bound = 2f64.powi(1 - k as i32);
        rows.push(TailRow {
            k,
            radius,
            tail_sup,
            bound,
            ok: n >= 1 && tail_sup <= bound,
        });
    }
    let monotone = rows.windows(2).all(|w| w[1].tail_sup <= w[0].tail_sup);
    let verdict = n >= 1 && monotone && rows.iter().all(|r| r.ok);
    Ok(ResolventTailReport { rows, monotone, verdict })
}

/// Counting functions on two nested domains.
#[derive(Debug, Clone, Serialize)]
pub struct CompactResolventReport {
    pub lambdas: Vec<f64>,
    /// `(Λ, #{|λ| ≤ Λ})` on the inner domain.
    pub counting_function: Vec<(f64, usize)>,
    pub counts_outer: Vec<usize>,
    pub inner_half_width: f64,
    pub outer_half_width: f64,
    pub spacing: f64,
    /// Counts agree on both domains for every `Λ`.
    pub refinement_stable: bool,
    /// Least `|λ|` at which the two counting functions differ.
    pub smallest_escaping: Option<f64>,
    /// Largest shell mass of a counted eigenvector over both domains.
    pub boundary_mass: Option<f64>,
    /// `max |λ_i + λ_{N+1−i}|` on the inner domain.
    pub pairing_defect: f64,
    pub verdict: bool,
}

fn shell_weight(op: &SymOp) -> Vec<f64> {
    let g = op.grid();
    let edge = (1.0 - BOUNDARY_SHELL) * g.half_width();
    let w: Vec<f64> = g.nodes().iter().map(|x| if x.abs() >= edge { 1.0 } else { 0.0 }).collect();
    (0..op.blocks()).flat_map(|_| w.iter().copied()).collect()
}

fn abs_sorted(w: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = w.iter().map(|v| v.abs()).collect();
    a.sort_by(f64::total_cmp);
    a
}

/// Nested-domain certification for an operator family `build(grid)`.
pub fn nested_domain_certify(
    build: impl Fn(&Grid) -> Result<SymOp> + Sync,
    inner_half_width: f64,
    spacing: f64,
    lambdas: &[f64],
) -> Result<CompactResolventReport> {
    let g_in = Grid::with_spacing(inner_half_width, spacing)?;
    let g_out = Grid::with_spacing(DOMAIN_GROWTH * inner_half_width, spacing)?;
    let (a, b) = rayon::join(
        || build(&g_in).and_then(|op| Ok((eigenvalues(&op)?, op))),
        || build(&g_out).and_then(|op| Ok((eigenvalues(&op)?, op))),
    );
    let ((w_in, op_in), (w_out, op_out)) = (a?, b?);
    let counts_in: Vec<usize> = lambdas.iter().map(|&l| count_abs_le(&w_in, l)).collect();
    let counts_out: Vec<usize> = lambdas.iter().map(|&l| count_abs_le(&w_out, l)).collect();
    let (ai, ao) = (abs_sorted(&w_in), abs_sorted(&w_out));
    let smallest_escaping = (0..ai.len().max(ao.len())).find_map(|i| match (ai.get(i), ao.get(i)) {
        (Some(&x), Some(&y)) if (x - y).abs() <= 1e-8 * (1.0 + x.abs()) => None,
        (x, y) => Some(x.copied().unwrap_or(f64::INFINITY).min(y.copied().unwrap_or(f64::INFINITY))),
    });
    let nw = w_in.len();
    let pairing_defect = (0..nw).map(|i| (w_in[i] + w_in[nw - 1 - i]).abs()).fold(0.0, f64::max);
    let refinement_stable = counts_in == counts_out;
    let lam_max = lambdas.iter().copied().fold(0.0, f64::max);
    let below_frontier = smallest_escaping.is_none_or(|e| e > lam_max);
    let boundary_mass = if refinement_stable && below_frontier {
        let (x, y) = rayon::join(
            || max_mass_abs_le(&op_in, lam_max, &shell_weight(&op_in)),
            || max_mass_abs_le(&op_out, lam_max, &shell_weight(&op_out)),
        );
        Some(x?.max_mass.max(y?.max_mass))
    } else {
        None
    };
    let verdict = refinement_stable && below_frontier && boundary_mass.is_some_and(|m| m <= BOUNDARY_MASS_LIMIT);
    Ok(CompactResolventReport {
        lambdas: lambdas.to_vec(),
        counting_function: lambdas.iter().copied().zip(counts_in).collect(),
        counts_outer: counts_out,
        inner_half_width: g_in.half_width(),
        outer_half_width: g_out.half_width(),
        spacing,
        refinement_stable,
        smallest_escaping,
        boundary_mass,
        pairing_defect,
        verdict,
    })
}

/// `[[0, −iD + m], [iD + m, 0]]` on nested domains for an explicit `m`.
pub fn compact_resolvent_certify_with(
    d: &SymOp,
    m: &RealFn,
    inner_half_width: f64,
    spacing: f64,
    lambdas: &[f64],
) -> Result<CompactResolventReport> {
    if d.is_graded() || d.blocks() != 1 {
        return Err(Error::Precondition("compact resolvent certification expects an ungraded D".into()));
    }
    nested_domain_certify(
        |g| odd_perturbed(&d.rebuild_on(g)?, &multiplication(g, m)?),
        inner_half_width,
        spacing,
        lambdas,
    )
}

/// Inner half-width and `Λ` grid derived from the annulus geometry: both
/// domains end inside the plateau `m_n = 2^n` and `Λ` runs over `2^j < 2^n`.
pub fn nested_geometry(series: &MultiplierSeries) -> Result<(f64, Vec<f64>)> {
    let n = series.n_trunc;
    if n == 0 {
        return Err(Error::Precondition("series has no annuli".into()));
    }
    let fam = &series.selected;
    let r_in = fam.element(n - 1).support_radius().unwrap_or(0.0);
    let r_out = fam.plateau_radius(n);
    let lo = DOMAIN_GROWTH * r_in;
    let hi = r_out / DOMAIN_GROWTH;
    if !(lo < hi) || hi * DOMAIN_GROWTH > fam.grid().half_width() {
        return Err(Error::Precondition(format!(
            "plateau of m_{n} between {r_in} and {r_out} cannot hold nested domains"
        )));
    }
    let lambdas = (0..n).map(|j| 2f64.powi(j as i32)).collect();
    Ok((0.5 * (lo + hi), lambdas))
}

/// [`compact_resolvent_certify_with`] for the deepest truncation of a series.
pub fn compact_resolvent_certify(d: &SymOp, series: &MultiplierSeries) -> Result<CompactResolventReport> {
    let (l, lambdas) = nested_geometry(series)?;
    let m = series.function(series.n_trunc);
    compact_resolvent_certify_with(d, &m, l, series.selected.grid().spacing(), &lambdas)
}

/// `D ⊗ 1 + M ⊗ e` on nested domains for a graded `D` and an explicit `m`.
pub fn even_variant_certify_with(
    d_graded: &SymOp,
    m: &RealFn,
    inner_half_width: f64,
    spacing: f64,
    lambdas: &[f64],
) -> Result<CompactResolventReport> {
    if !d_graded.is_graded() {
        return Err(Error::Precondition("even variant needs a graded D".into()));
    }
    nested_domain_certify(
        |g| graded_tensor_double(&d_graded.rebuild_on(g)?, &multiplication(g, m)?),
        inner_half_width,
        spacing,
        lambdas,
    )
}

/// [`even_variant_certify_with`] for the deepest truncation of a series.
pub fn even_variant_certify(d_graded: &SymOp, series: &MultiplierSeries) -> Result<CompactResolventReport> {
    let (l, lambdas) = nested_geometry(series)?;
    let m = series.function(series.n_trunc);
    even_variant_certify_with(d_graded, &m, l, series.selected.grid().spacing(), &lambdas)
}

/// Norm of `[m̃, φ̃_k]` with its closed form.
#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleRow {
    pub k: f64,
    pub norm: f64,
    /// `(2/k) sup |m φ_k|`.
    pub closed_form: f64,
}

/// `m̃ = [[0, i m], [−i m, 0]]` against `φ̃_k = [[1, 1/k], [1/k, 1]] φ_k`.
pub fn counterexample_commutator(m: &RealFn, family: &CutoffFamily) -> Result<Vec<CounterexampleRow>> {
    let grid = family.grid();
    let n = grid.n_points();
    let mv = sample(|x| m.eval(x), grid)?.real_values()?;
    let i = C64::new(0.0, 1.0);
    let upper: Vec<C64> = mv.iter().map(|&v| i * v).collect();
    let lower: Vec<C64> = mv.iter().map(|&v| -i * v).collect();
    let (mu, ml) = (Csr::from_diag(&upper), Csr::from_diag(&lower));
    let mt = Csr::blocks(n, &[vec![None, Some(&mu)], vec![Some(&ml), None]]);
    family
        .scales()
        .par_iter()
        .enumerate()
        .map(|(idx, &k)| {
            let phi = family.values(idx);
            let p = Csr::from_real_diag(&phi);
            let q = Csr::from_real_diag(&phi.iter().map(|v| v / k).collect::<Vec<_>>());
            let pt = Csr::blocks(n, &[vec![Some(&p), Some(&q)], vec![Some(&q), Some(&p)]]);
            let c = mt.matmul(&pt)?.sub(&pt.matmul(&mt)?)?.prune();
            let sup = mv.iter().zip(&phi).map(|(a, b)| (a * b).abs()).fold(0.0, f64::max);
            Ok(CounterexampleRow {
                k,
                norm: op_norm(&c)?,
                closed_form: 2.0 / k * sup,
            })
        })
        .collect()
}

/// Settings of the standard multiplier pipeline.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PipelineConfig {
    pub spacing: f64,
    /// Raw scales are `2^0, …, 2^raw_max_power`.
    pub raw_max_power: u32,
    /// Number of selected cutoffs.
    pub count: usize,
    pub n_trunc: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            spacing: 2.0,
            raw_max_power: 14,
            count: 7,
            n_trunc: 6,
        }
    }
}

/// Outputs of [`standard_pipeline`].
#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub config: PipelineConfig,
    pub grid_points: usize,
    pub series: MultiplierSeries,
    pub certificate_reverified: bool,
    pub resolvent_tail: ResolventTailReport,
    pub compact_resolvent: CompactResolventReport,
}

/// Raw plateau family with scales `2^j`, totals `bump(1..3)`, `D = i d/dx`,
/// greedy selection, series, tail test and nested-domain certification.
pub fn standard_pipeline(cfg: PipelineConfig) -> Result<PipelineReport> {
    let kmax = 2f64.powi(cfg.raw_max_power as i32);
    let grid = Grid::with_spacing(2.0 * kmax + 4.0 * cfg.spacing, cfg.spacing)?;
    let scales: Vec<f64> = (0..=cfg.raw_max_power).map(|j| 2f64.powi(j as i32)).collect();
    let raw = cutoff_family(Profile::Plateau, ProperFn::SmoothDistance, &scales, &grid)?;
    let totals = (1..=3)
        .map(|r| AlgebraElement::from_fn(&grid, &bump(r as f64), Some(r as f64)))
        .collect::<Result<Vec<_>>>()?;
    let d = first_order(&grid, &RealFn::zero())?;
    let (selected, cert) = select_subsequence(&raw, &totals, &d, cfg.count)?;
    let certificate_reverified = cert.reverify(&selected, &totals, &d)?;
    let series = build_multiplier(&selected, &cert, cfg.n_trunc)?;
    let resolvent_tail = resolvent_in_a(&series)?;
    let compact_resolvent = compact_resolvent_certify(&d, &series)?;
    Ok(PipelineReport {
        config: cfg,
        grid_points: grid.n_points(),
        series,
        certificate_reverified,
        resolvent_tail,
        compact_resolvent,
    })
}
