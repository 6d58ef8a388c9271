//! Executes the checks of a scenario and collects report, spectra and plot.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::approxid::{certify_adequate, cutoff_family};
use crate::deficiency::{deficiency_indices, ContinuumOp, DeficiencyOptions};
use crate::error::{Error, Result};
use crate::expr::DiffPart;
use crate::finmod::{check_lemma_battery, EXACT_TOL};
use crate::funcspace::Grid;
use crate::kasparov::{
    bump, certify_module_with, perturbation_class_check_with, ModuleOptions, MAX_DRIFT, PERTURBATION_THRESHOLD,
    RESOLVENT_THRESHOLD,
};
use crate::multiplier::{standard_pipeline, BOUNDARY_MASS_LIMIT};
use crate::operators::{even_dirac, first_order, multiplication, schrodinger, AlgebraElement, Stencil, SymOp};
use crate::scenario::config::{Check, GridSpec, OperatorSpec, Scenario};
use crate::scenario::plot::emit_plot;
use crate::scenario::report::{
    to_csv, to_json, write_atomic, CheckResult, Provenance, Report, SpectrumLevel, SpectrumRow, SpectrumSection,
    SCHEMA_VERSION,
};
use crate::spectrum::eigenvalues;

/// Command-line overrides of config values.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub grid_n: Option<usize>,
    pub half_width: Option<f64>,
    pub refine: Option<u32>,
    pub seed: Option<u64>,
}

/// Applies overrides; grid flags create a grid section when none exists.
pub fn apply_overrides(s: &mut Scenario, o: &Overrides) -> Result<()> {
    if let Some(seed) = o.seed {
        s.seed = seed;
    }
    if o.grid_n.is_some() || o.half_width.is_some() || o.refine.is_some() {
        let base = s.grid.unwrap_or(GridSpec {
            half_width: 20.0,
            n_points: 2001,
            refine: 0,
        });
        let g = GridSpec {
            half_width: o.half_width.unwrap_or(base.half_width),
            n_points: o.grid_n.unwrap_or(base.n_points),
            refine: o.refine.unwrap_or(base.refine),
        };
        g.grid()?;
        s.grid = Some(g);
    }
    Ok(())
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Report,
    pub spectra: Vec<SpectrumRow>,
    pub svg: String,
    pub warnings: Vec<String>,
}

/// The symmetric operator of a scenario on `grid`: `i d/dx + f` or `−d²/dx² + V`.
pub fn discretize(op: &OperatorSpec, grid: &Grid) -> Result<SymOp> {
    match op.expr.diff {
        DiffPart::FirstOrder => first_order(grid, &op.expr.potential),
        DiffPart::SecondOrder => schrodinger(grid, &op.expr.potential),
    }
}

/// Operator whose spectrum is reported: the doubled `∂ + f` for first order,
/// `−d²/dx² + V` otherwise.
pub fn spectrum_operator(op: &OperatorSpec, grid: &Grid) -> Result<(SymOp, &'static str)> {
    match op.expr.diff {
        DiffPart::FirstOrder => Ok((
            even_dirac(grid, &op.expr.potential, Stencil::Forward)?,
            "doubled [[0, -d* + f], [d + f, 0]], forward differences",
        )),
        DiffPart::SecondOrder => Ok((schrodinger(grid, &op.expr.potential)?, "three-point -d2/dx2 + V")),
    }
}

const CENTRAL_LEN: usize = 40;

/// Eigenvalues at every refinement level of the grid.
pub fn compute_spectra(op: &OperatorSpec, grid: &GridSpec) -> Result<(SpectrumSection, Vec<SpectrumRow>)> {
    let mut levels = Vec::new();
    let mut rows = Vec::new();
    let mut discretization = "";
    for g in grid.levels()? {
        let (t, label) = spectrum_operator(op, &g)?;
        discretization = label;
        let w = eigenvalues(&t)?;
        let tag = format!("n={}", g.n_points());
        let mut by_abs: Vec<f64> = w.clone();
        by_abs.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
        let mut central: Vec<f64> = by_abs.into_iter().take(CENTRAL_LEN).collect();
        central.sort_by(f64::total_cmp);
        rows.extend(w.iter().enumerate().map(|(i, &v)| SpectrumRow {
            index: i,
            eigenvalue: v,
            domain_tag: tag.clone(),
        }));
        levels.push(SpectrumLevel {
            domain_tag: tag,
            n_points: g.n_points(),
            dimension: t.dim(),
            central,
        });
    }
    Ok((
        SpectrumSection {
            operator: op.source.clone(),
            discretization: discretization.to_string(),
            levels,
        },
        rows,
    ))
}

fn tol(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn outcome<T: Serialize>(
    check: Check,
    tolerances: BTreeMap<String, f64>,
    r: Result<(bool, T)>,
) -> CheckResult {
    match r.and_then(|(v, t)| Ok((v, serde_json::to_value(t)?))) {
        Ok((verdict, result)) => CheckResult {
            check: check.name().into(),
            verdict,
            tolerances,
            error: None,
            result,
        },
        Err(e) => {
            let result = match &e {
                Error::BatteryFailure(json) => serde_json::from_str(json)
                    .map(|v: serde_json::Value| serde_json::json!({ "counterexample": v }))
                    .unwrap_or(serde_json::Value::Null),
                _ => serde_json::Value::Null,
            };
            CheckResult {
                check: check.name().into(),
                verdict: false,
                tolerances,
                error: Some(e.to_string()),
                result,
            }
        }
    }
}

fn need<T>(x: &Option<T>, what: &str) -> Result<T>
where
    T: Clone,
{
    x.clone().ok_or_else(|| Error::Precondition(format!("scenario has no {what} section")))
}

fn run_check(s: &Scenario, check: Check) -> CheckResult {
    match check {
        Check::Deficiency => {
            let opts = DeficiencyOptions::default();
            let t = tol(&[("ode_tolerance", opts.ode_tolerance), ("r_max", opts.r_max)]);
            outcome(
                check,
                t,
                need(&s.operator, "[operator]").and_then(|op| {
                    let c = ContinuumOp::from_expr(&op.expr, op.a, op.b)?;
                    let r = deficiency_indices(&c, &opts)?;
                    Ok((r.esa, r))
                }),
            )
        }
        Check::Adequacy => {
            #[derive(Serialize)]
            struct Adequacy {
                n_points: usize,
                report: crate::approxid::AdequacyReport,
                scaled_norms: Vec<f64>,
            }
            let t = tol(&[("decay_exponent_min", 0.8)]);
            outcome(
                check,
                t,
                (|| {
                    let (op, gs, cs) = (need(&s.operator, "[operator]")?, need(&s.grid, "[grid]")?, need(&s.cutoffs, "[cutoffs]")?);
                    let g = *gs.levels()?.last().expect("at least the base grid");
                    let d = discretize(&op, &g)?;
                    let fam = cutoff_family(cs.profile.clone(), cs.proper.clone(), &cs.scales, &g)?;
                    let report = certify_adequate(&d, &fam)?;
                    let scaled_norms = report.commutator_norms.iter().zip(&report.scales).map(|(c, k)| c * k).collect();
                    let v = report.decay_verdict;
                    Ok((
                        v,
                        Adequacy {
                            n_points: g.n_points(),
                            report,
                            scaled_norms,
                        },
                    ))
                })(),
            )
        }
        Check::Kasparov => {
            #[derive(Serialize)]
            struct Kasparov {
                perturbation: crate::kasparov::CompactnessProfile,
                module: crate::kasparov::KasparovCertificate,
            }
            let t = tol(&[
                ("perturbation_ratio_max", PERTURBATION_THRESHOLD),
                ("resolvent_ratio_max", RESOLVENT_THRESHOLD),
                ("ratio_drift_max", MAX_DRIFT),
            ]);
            outcome(
                check,
                t,
                (|| {
                    let (op, gs) = (need(&s.operator, "[operator]")?, need(&s.grid, "[grid]")?);
                    let g = gs.grid()?;
                    let refine = gs.refine > 0;
                    let d = discretize(&op, &g)?;
                    let m = multiplication(&g, &s.kasparov.perturbation)?;
                    let r = s.kasparov.bump_radius;
                    let a = AlgebraElement::from_fn(&g, &bump(r), Some(r))?;
                    let perturbation = perturbation_class_check_with(&d, &m, &a, refine)?;
                    let gens = s
                        .kasparov
                        .generators
                        .iter()
                        .map(|&r| AlgebraElement::from_fn(&g, &bump(r), Some(r)))
                        .collect::<Result<Vec<_>>>()?;
                    let module = certify_module_with(
                        &d,
                        &gens,
                        ModuleOptions {
                            refine,
                            ..Default::default()
                        },
                    )?;
                    let v = perturbation.passes() && module.overall;
                    Ok((v, Kasparov { perturbation, module }))
                })(),
            )
        }
        Check::Multiplier => {
            let t = tol(&[("boundary_mass_max", BOUNDARY_MASS_LIMIT)]);
            outcome(
                check,
                t,
                standard_pipeline(s.multiplier).map(|r| {
                    let v = r.series.selection_certificate.holds()
                        && r.certificate_reverified
                        && r.resolvent_tail.verdict
                        && r.compact_resolvent.verdict;
                    (v, r)
                }),
            )
        }
        Check::FinmodBattery => outcome(
            check,
            tol(&[("exact", EXACT_TOL)]),
            check_lemma_battery(s.seed).map(|r| (r.verdict, r)),
        ),
    }
}

/// Runs all requested checks in dependency order.
pub fn run_scenario(s: &Scenario) -> Result<RunOutput> {
    let start = Instant::now();
    let checks: Vec<CheckResult> = s.checks.iter().map(|&c| run_check(s, c)).collect();
    let (spectrum, spectra) = match (&s.operator, &s.grid) {
        (Some(op), Some(g)) => {
            let (sec, rows) = compute_spectra(op, g)?;
            (Some(sec), rows)
        }
        _ => (None, Vec::new()),
    };
    let mut tolerances = BTreeMap::new();
    for c in &checks {
        for (k, v) in &c.tolerances {
            tolerances.insert(format!("{}.{k}", c.check), *v);
        }
    }
    let verdict = checks.iter().all(|c| c.verdict);
    let report = Report {
        schema_version: SCHEMA_VERSION,
        scenario: s.name.clone(),
        verdict,
        checks,
        spectrum,
        provenance: Provenance {
            config_sha256: s.config_sha256.clone(),
            seed: s.seed,
            grid: s.grid,
            tolerances,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_seconds: start.elapsed().as_secs_f64(),
        },
    };
    let (svg, warnings) = emit_plot(&report);
    Ok(RunOutput {
        report,
        spectra,
        svg,
        warnings,
    })
}

/// Destinations of the three output files.
#[derive(Debug, Clone)]
pub struct OutputPaths {
    pub json: PathBuf,
    pub csv: PathBuf,
    pub svg: PathBuf,
}

impl OutputPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            json: dir.join("report.json"),
            csv: dir.join("spectra.csv"),
            svg: dir.join("plots.svg"),
        }
    }
}

/// Writes report, spectra and plot atomically.
pub fn write_outputs(out: &RunOutput, paths: &OutputPaths) -> Result<()> {
    write_atomic(&paths.json, to_json(&out.report)?.as_bytes())?;
    write_atomic(&paths.csv, to_csv(&out.spectra).as_bytes())?;
    write_atomic(&paths.svg, out.svg.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::config::parse_scenario;

    #[test]
    fn deficiency_scenarios() {
        let line = "name = \"line\"\nchecks = [\"deficiency\"]\n[operator]\nexpr = \"i_d_dx + x\"\n";
        let s = parse_scenario(line, Path::new(".")).unwrap();
        let out = run_scenario(&s).unwrap();
        assert!(out.report.verdict);
        assert_eq!(out.report.checks[0].result["n_plus"], 0);
        assert!(out.spectra.is_empty());
        assert_eq!(out.warnings.len(), 3);
        let half = format!("{line}interval = [0.0, inf]\n");
        let out = run_scenario(&parse_scenario(&half, Path::new(".")).unwrap()).unwrap();
        assert!(!out.report.verdict);
        assert_eq!(out.report.checks[0].result["n_minus"], 1);
    }

    #[test]
    fn spectra_and_overrides() {
        let src = "name = \"osc\"\nchecks = []\n[operator]\nexpr = \"i_d_dx + x\"\n[grid]\nhalf_width = 8.0\nn_points = 401\n";
        let mut s = parse_scenario(src, Path::new(".")).unwrap();
        apply_overrides(
            &mut s,
            &Overrides {
                refine: Some(1),
                ..Default::default()
            },
        )
        .unwrap();
        let out = run_scenario(&s).unwrap();
        let levels = &out.report.spectrum.as_ref().unwrap().levels;
        assert_eq!(levels.len(), 2);
        assert_eq!(levels[1].n_points, 801);
        assert_eq!(out.spectra.len(), 2 * 401 + 2 * 801);
        let pos: Vec<f64> = levels[1].central.iter().copied().filter(|v| *v > 0.5).collect();
        assert!((pos[0] - 2f64.sqrt()).abs() < 2e-2, "{pos:?}");
        assert!(apply_overrides(
            &mut s,
            &Overrides {
                grid_n: Some(4),
                ..Default::default()
            }
        )
        .is_err());
    }
}
