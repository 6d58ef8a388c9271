//! Deficiency indices of 1D differential operators, computed on the continuum.
//!
//! Every truncated Hermitian matrix is self-adjoint, so indices read off a
//! matrix are always `(0, 0)`. Here the equations `(τ ∓ i)u = 0` are
//! integrated outward from an interior point and each solution is classified
//! as square-integrable near an endpoint from the decay of its windowed
//! tail masses.
//!
//! * `τ = i d/dx + f`: the solution space is one-dimensional. The equation is
//!   integrated for `w = log u`, `w' = ±1 + i f`, which avoids resolving the
//!   phase rotation at rate `f`.
//! * `τ = −d²/dx² + V`: two basis solutions are integrated as `(u, u')` and
//!   renormalized at every window boundary. An infinite endpoint is limit
//!   circle iff both are square-integrable; `n± = #`limit-circle or regular
//!   endpoints.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{DiffPart, OperatorExpr};
use crate::funcspace::RealFn;
use crate::ode::{integrate, OdeOptions};

/// Operator kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    /// `i d/dx + f`.
    FirstOrderIddxPlusF,
    /// `−d²/dx² + V`.
    SturmLiouvilleMinusDxxPlusV,
}

impl From<DiffPart> for OpKind {
    fn from(d: DiffPart) -> Self {
        match d {
            DiffPart::FirstOrder => OpKind::FirstOrderIddxPlusF,
            DiffPart::SecondOrder => OpKind::SturmLiouvilleMinusDxxPlusV,
        }
    }
}

/// Differential expression with a real potential on an open interval.
#[derive(Debug, Clone)]
pub struct ContinuumOp {
    pub kind: OpKind,
    pub potential: RealFn,
    /// Left endpoint, possibly `-inf`.
    pub a: f64,
    /// Right endpoint, possibly `+inf`.
    pub b: f64,
}

impl ContinuumOp {
    pub fn new(kind: OpKind, potential: RealFn, a: f64, b: f64) -> Result<Self> {
        if a.is_nan() || b.is_nan() || a >= b || a == f64::INFINITY || b == f64::NEG_INFINITY {
            return Err(Error::InvalidArgument(format!("invalid interval ({a}, {b})")));
        }
        Ok(Self { kind, potential, a, b })
    }

    pub fn first_order(f: RealFn, a: f64, b: f64) -> Result<Self> {
        Self::new(OpKind::FirstOrderIddxPlusF, f, a, b)
    }

    pub fn sturm_liouville(v: RealFn, a: f64, b: f64) -> Result<Self> {
        Self::new(OpKind::SturmLiouvilleMinusDxxPlusV, v, a, b)
    }

    /// From a parsed operator expression.
    pub fn from_expr(e: &OperatorExpr, a: f64, b: f64) -> Result<Self> {
        Self::new(e.diff.into(), e.potential.clone(), a, b)
    }

    /// Same operator with `p` added to the potential.
    pub fn perturbed(&self, p: &RealFn) -> Self {
        let (v, w) = (self.potential.clone(), p.clone());
        let label = format!("{} + {}", v.label(), w.label());
        Self {
            kind: self.kind,
            potential: RealFn::new(label, move |x| v.eval(x) + w.eval(x)),
            a: self.a,
            b: self.b,
        }
    }

    fn interior_point(&self) -> f64 {
        match (self.a.is_finite(), self.b.is_finite()) {
            (false, false) => 0.0,
            (true, false) => self.a + 1.0,
            (false, true) => self.b - 1.0,
            (true, true) => 0.5 * (self.a + self.b),
        }
    }
}

/// Integration settings.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DeficiencyOptions {
    /// Integration length towards each infinite endpoint.
    pub r_max: f64,
    pub ode_tolerance: f64,
}

impl Default for DeficiencyOptions {
    fn default() -> Self {
        Self {
            r_max: 30.0,
            ode_tolerance: 1e-10,
        }
    }
}

impl DeficiencyOptions {
    /// Window width `min(5, r_max/4)`, so at least three ratios exist.
    pub fn window(&self) -> f64 {
        (self.r_max / 4.0).min(5.0)
    }

    fn validate(&self) -> Result<()> {
        if !(self.r_max >= 10.0 && self.r_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("r_max must be at least 10, got {}", self.r_max)));
        }
        if !(self.ode_tolerance > 0.0 && self.ode_tolerance < 1e-3) {
            return Err(Error::InvalidArgument(format!(
                "ode tolerance must lie in (0, 1e-3), got {}",
                self.ode_tolerance
            )));
        }
        Ok(())
    }
}

/// Weyl classification of an endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointClass {
    LimitPoint,
    LimitCircle,
    Regular,
}

impl EndpointClass {
    fn all_l2(self) -> bool {
        !matches!(self, EndpointClass::LimitPoint)
    }
}

/// Tail data of one integrated solution.
#[derive(Debug, Clone, Serialize)]
pub struct TailDiagnostic {
    /// `+1` for `τ − i`, `−1` for `τ + i`.
    pub sign: i8,
    /// Basis index (always 0 for first order).
    pub basis: usize,
    /// Natural log of `∫|u|²` over successive windows.
    pub log_window_mass: Vec<f64>,
    /// Consecutive window-mass ratios.
    pub ratios: Vec<f64>,
    pub square_integrable: bool,
}

/// Classification of one endpoint.
#[derive(Debug, Clone, Serialize)]
pub struct EndpointReport {
    /// Endpoint position as text (`-inf`, `+inf` or a number).
    pub position: String,
    pub class: EndpointClass,
    pub tails: Vec<TailDiagnostic>,
}

/// Deficiency indices with endpoint diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct DeficiencyReport {
    pub kind: OpKind,
    pub potential: String,
    pub n_plus: usize,
    pub n_minus: usize,
    pub endpoints: Vec<EndpointReport>,
    pub esa: bool,
}

fn fmt_endpoint(x: f64) -> String {
    if x == f64::INFINITY {
        "+inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

/// Geometric-decay verdict on window masses.
fn classify_tail(log_mass: &[f64]) -> Result<(Vec<f64>, bool)> {
    let ratios: Vec<f64> = log_mass.windows(2).map(|w| (w[1] - w[0]).exp()).collect();
    if ratios.len() < 3 {
        return Err(Error::Inconclusive("fewer than three window ratios".into()));
    }
    let last = &ratios[ratios.len() - 3..];
    if last.iter().all(|&r| r <= 0.9) {
        Ok((ratios, true))
    } else if last.iter().all(|&r| r >= 1.02) {
        Ok((ratios, false))
    } else {
        Err(Error::Inconclusive(format!("tail ratios {last:?} neither decay nor grow")))
    }
}

/// `true` when `V` stays bounded on dyadic points approaching `end`.
fn bounded_near(v: &RealFn, end: f64, inward: f64, scale: f64) -> bool {
    let samples: Vec<f64> = (0..48).map(|j| v.eval(end + inward * scale * 0.5f64.powi(j))).collect();
    if samples.iter().any(|s| !s.is_finite()) {
        return false;
    }
    let reference = samples[..4].iter().fold(0.0f64, |m, s| m.max(s.abs()));
    samples.iter().all(|s| s.abs() <= 1e3 * (1.0 + reference))
}

struct Job {
    sign: i8,
    basis: usize,
    dir: f64,
}

fn window_masses(op: &ContinuumOp, x0: f64, job: &Job, opts: &DeficiencyOptions) -> Result<Vec<f64>> {
    let w = opts.window();
    let windows = (opts.r_max / w).round() as usize;
    let ode = OdeOptions {
        rtol: opts.ode_tolerance,
        atol: opts.ode_tolerance,
        ..Default::default()
    };
    let s = job.sign as f64;
    let dir = job.dir;
    let pot = &op.potential;
    let mut out = Vec::with_capacity(windows);
    match op.kind {
        OpKind::FirstOrderIddxPlusF => {
            // state: Re w (relative to window start), Im w, window mass
            let mut y = [0.0, 0.0, 0.0];
            let mut log_scale = 0.0;
            for k in 0..windows {
                let t0 = k as f64 * w;
                y[2] = 0.0;
                integrate(
                    |t, y, d| {
                        let x = x0 + dir * t;
                        d[0] = dir * s;
                        d[1] = dir * pot.eval(x);
                        d[2] = (2.0 * y[0]).exp();
                    },
                    t0,
                    t0 + w,
                    &mut y,
                    ode,
                )?;
                out.push(2.0 * log_scale + y[2].ln());
                log_scale += y[0];
                y[0] = 0.0;
            }
        }
        OpKind::SturmLiouvilleMinusDxxPlusV => {
            // state: u, u' (real, imaginary parts), window mass
            let mut y = [0.0; 5];
            if job.basis == 0 {
                y[0] = 1.0;
            } else {
                y[2] = 1.0;
            }
            let mut log_scale = 0.0;
            for k in 0..windows {
                let t0 = k as f64 * w;
                y[4] = 0.0;
                integrate(
                    |t, y, d| {
                        let x = x0 + dir * t;
                        let v = pot.eval(x);
                        // u'' = (V − i s) u, in the outward variable t
                        d[0] = dir * y[2];
                        d[1] = dir * y[3];
                        d[2] = dir * (v * y[0] + s * y[1]);
                        d[3] = dir * (v * y[1] - s * y[0]);
                        d[4] = y[0] * y[0] + y[1] * y[1];
                    },
                    t0,
                    t0 + w,
                    &mut y,
                    ode,
                )?;
                if !(y[4] > 0.0) {
                    return Err(Error::Ode(format!("vanishing window mass at window {k}")));
                }
                out.push(2.0 * log_scale + y[4].ln());
                let norm = y[..4].iter().map(|v| v * v).sum::<f64>().sqrt();
                log_scale += norm.ln();
                for v in &mut y[..4] {
                    *v /= norm;
                }
            }
        }
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Ode("non-finite window mass".into()));
    }
    Ok(out)
}

fn check_potential(op: &ContinuumOp, x0: f64, opts: &DeficiencyOptions) -> Result<()> {
    let lo = if op.a.is_finite() { op.a } else { x0 - opts.r_max };
    let hi = if op.b.is_finite() { op.b } else { x0 + opts.r_max };
    let m = 4001;
    for j in 1..m - 1 {
        let x = lo + (hi - lo) * j as f64 / (m - 1) as f64;
        let v = op.potential.eval(x);
        if !v.is_finite() {
            return Err(Error::NonFinite { x, value: v });
        }
    }
    Ok(())
}

/// Deficiency indices `(n₊, n₋) = (dim ker(τ* − i), dim ker(τ* + i))`.
pub fn deficiency_indices(op: &ContinuumOp, opts: &DeficiencyOptions) -> Result<DeficiencyReport> {
    opts.validate()?;
    let x0 = op.interior_point();
    check_potential(op, x0, opts)?;
    let n_basis = match op.kind {
        OpKind::FirstOrderIddxPlusF => 1,
        OpKind::SturmLiouvilleMinusDxxPlusV => 2,
    };
    let mut endpoints = Vec::new();
    for (end, dir) in [(op.a, -1.0), (op.b, 1.0)] {
        if end.is_finite() {
            let bounded = bounded_near(&op.potential, end, -dir, (end - x0).abs().min(1.0));
            let class = match (bounded, op.kind) {
                (true, _) => EndpointClass::Regular,
                // |u| does not depend on f, so solutions stay bounded
                (false, OpKind::FirstOrderIddxPlusF) => EndpointClass::LimitCircle,
                (false, OpKind::SturmLiouvilleMinusDxxPlusV) => {
                    return Err(Error::Inconclusive(format!(
                        "potential is unbounded near the finite endpoint {end}"
                    )))
                }
            };
            endpoints.push(EndpointReport {
                position: fmt_endpoint(end),
                class,
                tails: Vec::new(),
            });
            continue;
        }
        let jobs: Vec<Job> = [1i8, -1]
            .into_iter()
            .flat_map(|sign| (0..n_basis).map(move |basis| Job { sign, basis, dir }))
            .collect();
        let tails = jobs
            .par_iter()
            .map(|job| {
                let m = window_masses(op, x0, job, opts)?;
                let (ratios, l2) = classify_tail(&m)?;
                Ok(TailDiagnostic {
                    sign: job.sign,
                    basis: job.basis,
                    log_window_mass: m,
                    ratios,
                    square_integrable: l2,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let class = if tails.iter().all(|t| t.square_integrable) {
            EndpointClass::LimitCircle
        } else {
            EndpointClass::LimitPoint
        };
        endpoints.push(EndpointReport {
            position: fmt_endpoint(end),
            class,
            tails,
        });
    }
    let (n_plus, n_minus) = match op.kind {
        OpKind::FirstOrderIddxPlusF => {
            let l2_at = |e: &EndpointReport, sign: i8| {
                e.class.all_l2() || e.tails.iter().any(|t| t.sign == sign && t.square_integrable)
            };
            let n = |sign: i8| usize::from(endpoints.iter().all(|e| l2_at(e, sign)));
            (n(1), n(-1))
        }
        OpKind::SturmLiouvilleMinusDxxPlusV => {
            for e in &endpoints {
                let l2 = |sign: i8| e.tails.iter().filter(|t| t.sign == sign && t.square_integrable).count();
                if l2(1) != l2(-1) {
                    return Err(Error::Inconclusive(format!(
                        "conjugate equations disagree at endpoint {}",
                        e.position
                    )));
                }
            }
            let n = endpoints.iter().filter(|e| e.class.all_l2()).count();
            (n, n)
        }
    };
    Ok(DeficiencyReport {
        kind: op.kind,
        potential: op.potential.label().to_string(),
        n_plus,
        n_minus,
        endpoints,
        esa: n_plus == 0 && n_minus == 0,
    })
}

/// `true` iff the deficiency indices are `(0, 0)`.
pub fn esa_verdict(op: &ContinuumOp, opts: &DeficiencyOptions) -> Result<bool> {
    Ok(deficiency_indices(op, opts)?.esa)
}

/// One row of a perturbation sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub potential: String,
    pub report: Option<DeficiencyReport>,
    /// Set when the row could not be classified.
    pub error: Option<String>,
}

impl SweepRow {
    pub fn esa(&self) -> Option<bool> {
        self.report.as_ref().map(|r| r.esa)
    }

    pub fn indices(&self) -> Option<(usize, usize)> {
        self.report.as_ref().map(|r| (r.n_plus, r.n_minus))
    }
}

/// Deficiency reports of `base + p` for every `p`, in input order.
pub fn perturbation_sweep(base: &ContinuumOp, potentials: &[RealFn], opts: &DeficiencyOptions) -> Vec<SweepRow> {
    potentials
        .par_iter()
        .map(|p| {
            let op = base.perturbed(p);
            match deficiency_indices(&op, opts) {
                Ok(r) => SweepRow {
                    potential: p.label().to_string(),
                    report: Some(r),
                    error: None,
                },
                Err(e) => SweepRow {
                    potential: p.label().to_string(),
                    report: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const INF: f64 = f64::INFINITY;

    fn fo(f: RealFn, a: f64, b: f64) -> (usize, usize) {
        let r = deficiency_indices(&ContinuumOp::first_order(f, a, b).unwrap(), &DeficiencyOptions::default()).unwrap();
        assert_eq!(r.esa, (r.n_plus, r.n_minus) == (0, 0));
        (r.n_plus, r.n_minus)
    }

    fn sl(v: RealFn, a: f64, b: f64) -> (usize, usize) {
        let r =
            deficiency_indices(&ContinuumOp::sturm_liouville(v, a, b).unwrap(), &DeficiencyOptions::default()).unwrap();
        (r.n_plus, r.n_minus)
    }

    #[test]
    fn first_order_closed_forms() {
        assert_eq!(fo(RealFn::zero(), -INF, INF), (0, 0));
        assert_eq!(fo(RealFn::zero(), 0.0, INF), (0, 1));
        assert_eq!(fo(RealFn::zero(), -INF, 0.0), (1, 0));
        assert_eq!(fo(RealFn::identity(), -INF, INF), (0, 0));
        assert_eq!(fo(RealFn::zero(), 0.0, 1.0), (1, 1));
        // unbounded potential at a finite endpoint leaves |u| unchanged
        assert_eq!(fo(RealFn::new("1/x", |x| 1.0 / x), 0.0, 1.0), (1, 1));
    }

    #[test]
    fn sturm_liouville_cases() {
        assert_eq!(sl(RealFn::zero(), 0.0, INF), (1, 1));
        assert_eq!(sl(RealFn::new("x^2", |x| x * x), -INF, INF), (0, 0));
        assert_eq!(sl(RealFn::zero(), -INF, INF), (0, 0));
        assert_eq!(sl(RealFn::zero(), -1.0, 1.0), (2, 2));
        let singular = ContinuumOp::sturm_liouville(RealFn::new("1/x^2", |x| 1.0 / (x * x)), 0.0, INF).unwrap();
        assert!(matches!(
            deficiency_indices(&singular, &DeficiencyOptions::default()),
            Err(Error::Inconclusive(_))
        ));
    }

    #[test]
    fn stable_under_tolerance_and_range() {
        let ops = [
            ContinuumOp::first_order(RealFn::new("x^3", |x| x * x * x), 0.0, INF).unwrap(),
            ContinuumOp::sturm_liouville(RealFn::new("x^2", |x| x * x), -INF, INF).unwrap(),
        ];
        let base = DeficiencyOptions::default();
        let alt = DeficiencyOptions {
            r_max: 45.0,
            ode_tolerance: 5e-11,
        };
        for op in &ops {
            let a = deficiency_indices(op, &base).unwrap();
            let b = deficiency_indices(op, &alt).unwrap();
            assert_eq!((a.n_plus, a.n_minus), (b.n_plus, b.n_minus));
        }
    }

    #[test]
    fn sweep_is_potential_independent() {
        let base = ContinuumOp::first_order(RealFn::zero(), -INF, INF).unwrap();
        let pots = vec![
            RealFn::zero(),
            RealFn::identity(),
            RealFn::new("-x^5", |x| -x.powi(5)),
            RealFn::new("exp(x)", f64::exp),
            RealFn::new("x sin x", |x| x * x.sin()),
        ];
        let rows = perturbation_sweep(&base, &pots, &DeficiencyOptions::default());
        assert_eq!(rows.len(), 5);
        assert!(rows.iter().all(|r| r.esa() == Some(true)));
        let half = ContinuumOp::first_order(RealFn::zero(), 0.0, INF).unwrap();
        let rows = perturbation_sweep(&half, &pots[..2], &DeficiencyOptions::default());
        assert!(rows.iter().all(|r| r.indices() == Some((0, 1))));
        assert!(perturbation_sweep(&base, &[], &DeficiencyOptions::default()).is_empty());
    }

    #[test]
    fn invalid_inputs() {
        assert!(ContinuumOp::first_order(RealFn::zero(), 1.0, 0.0).is_err());
        let op = ContinuumOp::first_order(RealFn::zero(), -INF, INF).unwrap();
        let bad = DeficiencyOptions {
            r_max: 5.0,
            ..Default::default()
        };
        assert!(deficiency_indices(&op, &bad).is_err());
        let nan = ContinuumOp::first_order(RealFn::new("log x", f64::ln), -INF, INF).unwrap();
        assert!(deficiency_indices(&nan, &DeficiencyOptions::default()).is_err());
        let rows = perturbation_sweep(&op, &[RealFn::new("log x", f64::ln)], &DeficiencyOptions::default());
        assert!(rows[0].error.is_some());
    }

    #[test]
    fn tail_classifier() {
        let dec: Vec<f64> = (0..6).map(|k| -2.0 * k as f64).collect();
        assert!(classify_tail(&dec).unwrap().1);
        let inc: Vec<f64> = (0..6).map(|k| 2.0 * k as f64).collect();
        assert!(!classify_tail(&inc).unwrap().1);
        let flat = vec![0.0; 6];
        assert!(classify_tail(&flat).is_err());
    }
}
