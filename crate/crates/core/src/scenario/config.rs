//! Scenario files: TOML with a fixed set of sections.
//!
//! ```toml
//! name = "oscillator"
//! seed = 7
//! checks = ["deficiency", "adequacy", "kasparov", "multiplier", "finmod-battery"]
//!
//! [operator]
//! expr = "i_d_dx + x"
//! interval = [-inf, inf]
//!
//! [grid]
//! half_width = 20.0
//! n_points = 2001
//! refine = 1
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::approxid::{Profile, ProperFn};
use crate::error::{Error, Result};
use crate::expr::{parse_fn, parse_operator, OperatorExpr};
use crate::funcspace::{Grid, RealFn};
use crate::multiplier::PipelineConfig;

/// Checks a scenario can request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    Deficiency,
    Adequacy,
    Kasparov,
    Multiplier,
    FinmodBattery,
}

impl Check {
    pub const ALL: [Check; 5] = [
        Check::Deficiency,
        Check::Adequacy,
        Check::Kasparov,
        Check::Multiplier,
        Check::FinmodBattery,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Deficiency => "deficiency",
            Check::Adequacy => "adequacy",
            Check::Kasparov => "kasparov",
            Check::Multiplier => "multiplier",
            Check::FinmodBattery => "finmod-battery",
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown check '{s}'"))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    #[serde(default)]
    seed: u64,
    checks: Vec<Spanned<String>>,
    operator: Option<Spanned<RawOperator>>,
    grid: Option<RawGrid>,
    cutoffs: Option<Spanned<RawCutoffs>>,
    kasparov: Option<RawKasparov>,
    multiplier: Option<RawMultiplier>,
    output: Option<RawOutput>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOperator {
    expr: Spanned<String>,
    interval: Option<Spanned<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    half_width: f64,
    n_points: usize,
    #[serde(default)]
    refine: u32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCutoffs {
    profile: Option<Spanned<String>>,
    proper: Option<Spanned<String>>,
    scales: Option<Vec<f64>>,
    max_index: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKasparov {
    perturbation: Option<Spanned<String>>,
    bump_radius: Option<f64>,
    generators: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMultiplier {
    spacing: Option<f64>,
    raw_max_power: Option<u32>,
    count: Option<usize>,
    n_trunc: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
}

/// Parsed operator section.
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    pub source: String,
    pub expr: OperatorExpr,
    pub a: f64,
    pub b: f64,
}

/// Grid section; refinement levels halve the spacing.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub n_points: usize,
    pub refine: u32,
}

impl GridSpec {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.half_width, self.n_points)
    }

    /// Base grid followed by `refine` refinements.
    pub fn levels(&self) -> Result<Vec<Grid>> {
        let mut g = self.grid()?;
        let mut out = vec![g];
        for _ in 0..self.refine {
            g = g.refine();
            out.push(g);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct CutoffSpec {
    pub profile: Profile,
    pub proper: ProperFn,
    pub scales: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct KasparovSpec {
    pub perturbation: RealFn,
    pub bump_radius: f64,
    /// Bump radii of the algebra generators.
    pub generators: Vec<f64>,
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    /// Requested checks in dependency order.
    pub checks: Vec<Check>,
    pub operator: Option<OperatorSpec>,
    pub grid: Option<GridSpec>,
    pub cutoffs: Option<CutoffSpec>,
    pub kasparov: KasparovSpec,
    pub multiplier: PipelineConfig,
    /// Output directory, resolved against the config location.
    pub output_dir: PathBuf,
    /// SHA-256 of the config text.
    pub config_sha256: String,
}

/// One-based line of a byte offset.
pub fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

fn config_err(src: &str, span: std::ops::Range<usize>, message: impl Into<String>) -> Error {
    Error::Config {
        line: line_of(src, span.start),
        message: message.into(),
    }
}

fn profile_of(name: &str) -> Option<Profile> {
    match name {
        "plateau" => Some(Profile::Plateau),
        "mollified_plateau" => Some(Profile::MollifiedPlateau),
        _ => None,
    }
}

fn proper_of(name: &str) -> Option<ProperFn> {
    match name {
        "abs" => Some(ProperFn::Abs),
        "smooth_distance" => Some(ProperFn::SmoothDistance),
        _ => None,
    }
}

/// Parses and validates a scenario; `base` anchors relative output paths.
pub fn parse_scenario(src: &str, base: &Path) -> Result<Scenario> {
    let raw: RawScenario = toml::from_str(src).map_err(|e| Error::Config {
        line: e.span().map(|s| line_of(src, s.start)).unwrap_or(1),
        message: e.message().to_string(),
    })?;
    let mut checks = Vec::new();
    for c in &raw.checks {
        let check: Check = c.get_ref().parse().map_err(|m: String| config_err(src, c.span(), m))?;
        if !checks.contains(&check) {
            checks.push(check);
        }
    }
    checks.sort();

    let operator = match &raw.operator {
        None => None,
        Some(op) => {
            let o = op.get_ref();
            let expr = parse_operator(o.expr.get_ref()).map_err(|e| config_err(src, o.expr.span(), e.to_string()))?;
            let (a, b) = match &o.interval {
                None => (f64::NEG_INFINITY, f64::INFINITY),
                Some(iv) => match iv.get_ref().as_slice() {
                    &[a, b] if a < b => (a, b),
                    _ => return Err(config_err(src, iv.span(), "interval must be [a, b] with a < b")),
                },
            };
            Some(OperatorSpec {
                source: o.expr.get_ref().clone(),
                expr,
                a,
                b,
            })
        }
    };

    let grid = raw.grid.as_ref().map(|g| GridSpec {
        half_width: g.half_width,
        n_points: g.n_points,
        refine: g.refine,
    });
    if let Some(g) = &grid {
        g.grid().map_err(|e| Error::Config {
            line: src.find("[grid]").map(|o| line_of(src, o)).unwrap_or(1),
            message: e.to_string(),
        })?;
    }

    let cutoffs = match &raw.cutoffs {
        None => None,
        Some(c) => {
            let r = c.get_ref();
            let profile = match &r.profile {
                None => Profile::Plateau,
                Some(p) => profile_of(p.get_ref())
                    .ok_or_else(|| config_err(src, p.span(), format!("unknown profile '{}'", p.get_ref())))?,
            };
            let proper = match &r.proper {
                None => ProperFn::Abs,
                Some(p) => proper_of(p.get_ref())
                    .ok_or_else(|| config_err(src, p.span(), format!("unknown proper function '{}'", p.get_ref())))?,
            };
            let scales = match (&r.scales, r.max_index) {
                (Some(s), None) if !s.is_empty() => s.clone(),
                (None, Some(n)) if n >= 1 => (1..=n).map(|k| k as f64).collect(),
                _ => return Err(config_err(src, c.span(), "cutoffs need exactly one of 'scales' or 'max_index'")),
            };
            Some(CutoffSpec { profile, proper, scales })
        }
    };

    let kasparov = {
        let k = raw.kasparov.as_ref();
        let perturbation = match k.and_then(|k| k.perturbation.as_ref()) {
            None => RealFn::identity(),
            Some(p) => parse_fn(p.get_ref()).map_err(|e| config_err(src, p.span(), e.to_string()))?,
        };
        KasparovSpec {
            perturbation,
            bump_radius: k.and_then(|k| k.bump_radius).unwrap_or(5.0),
            generators: k.and_then(|k| k.generators.clone()).unwrap_or_else(|| vec![2.0, 5.0]),
        }
    };

    let multiplier = {
        let d = PipelineConfig::default();
        let m = raw.multiplier.as_ref();
        PipelineConfig {
            spacing: m.and_then(|m| m.spacing).unwrap_or(d.spacing),
            raw_max_power: m.and_then(|m| m.raw_max_power).unwrap_or(d.raw_max_power),
            count: m.and_then(|m| m.count).unwrap_or(d.count),
            n_trunc: m.and_then(|m| m.n_trunc).unwrap_or(d.n_trunc),
        }
    };

    let checks_span = |c: Check| {
        raw.checks
            .iter()
            .find(|s| s.get_ref() == c.name())
            .map(|s| s.span())
            .unwrap_or(0..0)
    };
    for &c in &checks {
        let missing = match c {
            Check::Deficiency if operator.is_none() => Some("[operator]"),
            Check::Adequacy if operator.is_none() => Some("[operator]"),
            Check::Adequacy if grid.is_none() => Some("[grid]"),
            Check::Adequacy if cutoffs.is_none() => Some("[cutoffs]"),
            Check::Kasparov if operator.is_none() => Some("[operator]"),
            Check::Kasparov if grid.is_none() => Some("[grid]"),
            _ => None,
        };
        if let Some(section) = missing {
            return Err(config_err(src, checks_span(c), format!("check '{c}' needs a {section} section")));
        }
    }

    let dir = raw.output.and_then(|o| o.dir).unwrap_or_else(|| format!("{}-out", raw.name));
    Ok(Scenario {
        name: raw.name,
        seed: raw.seed,
        checks,
        operator,
        grid,
        cutoffs,
        kasparov,
        multiplier,
        output_dir: base.join(dir),
        config_sha256: crate::scenario::report::sha256_hex(src.as_bytes()),
    })
}

/// Reads and parses a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let src = std::fs::read_to_string(path)?;
    parse_scenario(&src, path.parent().unwrap_or(Path::new(".")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"name = "basic"
checks = ["kasparov", "deficiency"]

[operator]
expr = "i_d_dx + x"
interval = [0.0, inf]

[grid]
half_width = 10.0
n_points = 201
"#;

    #[test]
    fn parses_and_orders_checks() {
        let s = parse_scenario(BASIC, Path::new("/tmp")).unwrap();
        assert_eq!(s.checks, vec![Check::Deficiency, Check::Kasparov]);
        let op = s.operator.unwrap();
        assert_eq!((op.a, op.b), (0.0, f64::INFINITY));
        assert_eq!(s.output_dir, Path::new("/tmp/basic-out"));
        assert_eq!(s.kasparov.bump_radius, 5.0);
        assert_eq!(s.config_sha256.len(), 64);
    }

    #[test]
    fn reports_line_numbers() {
        let bad_expr = BASIC.replace("i_d_dx + x\"", "i_d_dx + x +\"");
        match parse_scenario(&bad_expr, Path::new(".")) {
            Err(Error::Config { line, message }) => {
                assert_eq!(line, 5);
                assert!(message.contains("column"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let bad_check = BASIC.replace("\"deficiency\"", "\"nonsense\"");
        assert!(matches!(parse_scenario(&bad_check, Path::new(".")), Err(Error::Config { line: 2, .. })));
        let bad_key = BASIC.replace("n_points", "points");
        assert!(matches!(parse_scenario(&bad_key, Path::new(".")), Err(Error::Config { .. })));
        let bad_grid = BASIC.replace("n_points = 201", "n_points = 200");
        assert!(matches!(parse_scenario(&bad_grid, Path::new(".")), Err(Error::Config { line: 8, .. })));
        let bad_iv = BASIC.replace("[0.0, inf]", "[1.0, 0.0]");
        assert!(matches!(parse_scenario(&bad_iv, Path::new(".")), Err(Error::Config { line: 6, .. })));
    }

    #[test]
    fn missing_sections_are_rejected() {
        let src = "name = \"x\"\nchecks = [\"adequacy\"]\n";
        match parse_scenario(src, Path::new(".")) {
            Err(Error::Config { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("[operator]"));
            }
            other => panic!("{other:?}"),
        }
        let ok = "name = \"x\"\nchecks = [\"finmod-battery\", \"multiplier\"]\n";
        assert!(parse_scenario(ok, Path::new(".")).is_ok());
    }

    #[test]
    fn cutoff_scales() {
        let src = format!("{BASIC}\n[cutoffs]\nprofile = \"mollified_plateau\"\nproper = \"smooth_distance\"\nmax_index = 4\n");
        let c = parse_scenario(&src, Path::new(".")).unwrap().cutoffs.unwrap();
        assert_eq!(c.scales, vec![1.0, 2.0, 3.0, 4.0]);
        let both = format!("{BASIC}\n[cutoffs]\nscales = [1.0]\nmax_index = 4\n");
        assert!(parse_scenario(&both, Path::new(".")).is_err());
    }
}
