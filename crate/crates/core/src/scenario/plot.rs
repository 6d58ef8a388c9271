//! Deterministic SVG rendering of report data: eigenvalue ladders,
//! singular-value decay and counting functions in three fixed panels.

use std::fmt::Write;

use crate::scenario::report::Report;

const WIDTH: f64 = 960.0;
const PANEL_H: f64 = 240.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    /// Short horizontal ticks, one per value.
    Ladder,
    Markers,
    Steps,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn draw_panel(out: &mut String, p: &Panel, top: f64) {
    let (x0, x1) = (MARGIN, WIDTH - MARGIN / 2.0);
    let (y0, y1) = (top + MARGIN / 2.0, top + PANEL_H - MARGIN);
    let (xl, xh) = range(p.series.iter().flat_map(|s| s.points.iter().map(|q| q.0)));
    let (yl, yh) = range(p.series.iter().flat_map(|s| s.points.iter().map(|q| q.1)));
    let sx = |x: f64| x0 + (x - xl) / (xh - xl) * (x1 - x0);
    let sy = |y: f64| y1 - (y - yl) / (yh - yl) * (y1 - y0);
    let _ = writeln!(
        out,
        r##"<g><text x="{:.2}" y="{:.2}" font-size="13">{}</text>"##,
        x0,
        top + 16.0,
        escape(&p.title)
    );
    let _ = writeln!(
        out,
        r##"<line x1="{x0:.2}" y1="{y1:.2}" x2="{x1:.2}" y2="{y1:.2}" stroke="#000"/><line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}" stroke="#000"/>"##
    );
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="{:.2}" font-size="10">{:.3e}</text><text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{:.3e}</text>"##,
        x0,
        y1 + 14.0,
        xl,
        x1,
        y1 + 14.0,
        xh
    );
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{:.3e}</text><text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{:.3e}</text>"##,
        x0 - 4.0,
        y1,
        yl,
        x0 - 4.0,
        y0 + 8.0,
        yh
    );
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text><text x="{:.2}" y="{:.2}" font-size="11">{}</text>"##,
        0.5 * (x0 + x1),
        y1 + 28.0,
        escape(&p.x_label),
        x0 + 4.0,
        y0 + 4.0,
        escape(&p.y_label)
    );
    if p.series.is_empty() {
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" font-size="12" fill="#888" text-anchor="middle">no data</text>"##,
            0.5 * (x0 + x1),
            0.5 * (y0 + y1)
        );
    }
    for (i, s) in p.series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let pts: Vec<(f64, f64)> = s.points.iter().filter(|q| q.0.is_finite() && q.1.is_finite()).copied().collect();
        match s.style {
            Style::Ladder => {
                for &(x, y) in &pts {
                    let _ = writeln!(
                        out,
                        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{c}"/>"##,
                        sx(x) - 6.0,
                        sy(y),
                        sx(x) + 6.0,
                        sy(y)
                    );
                }
            }
            Style::Markers => {
                for &(x, y) in &pts {
                    let _ = writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{c}"/>"##, sx(x), sy(y));
                }
            }
            Style::Steps => {
                let mut d = String::new();
                for (j, &(x, y)) in pts.iter().enumerate() {
                    if j == 0 {
                        let _ = write!(d, "M{:.2} {:.2}", sx(x), sy(y));
                    } else {
                        let _ = write!(d, " H{:.2} V{:.2}", sx(x), sy(y));
                    }
                }
                let _ = writeln!(out, r##"<path d="{d}" fill="none" stroke="{c}"/>"##);
            }
        }
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" font-size="10" fill="{c}" text-anchor="end">{}</text>"##,
            x1,
            y0 + 12.0 * (i as f64 + 1.0),
            escape(&s.label)
        );
    }
    out.push_str("</g>\n");
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders panels stacked in a fixed viewport.
pub fn render_panels(panels: &[Panel]) -> String {
    let h = PANEL_H * panels.len().max(1) as f64;
    let mut out = format!(
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{h}" viewBox="0 0 {WIDTH} {h}" font-family="monospace">
<rect width="100%" height="100%" fill="#fff"/>
"##
    );
    for (i, p) in panels.iter().enumerate() {
        draw_panel(&mut out, p, i as f64 * PANEL_H);
    }
    out.push_str("</svg>\n");
    out
}

fn check<'a>(r: &'a Report, name: &str) -> Option<&'a serde_json::Value> {
    r.checks.iter().find(|c| c.check == name).map(|c| &c.result)
}

/// The three standard panels; sections missing from the report give empty
/// panels and a warning each.
pub fn report_panels(r: &Report) -> (Vec<Panel>, Vec<String>) {
    let mut warnings = Vec::new();
    let ladder: Vec<Series> = match &r.spectrum {
        Some(s) => s
            .levels
            .iter()
            .enumerate()
            .map(|(i, l)| Series {
                label: l.domain_tag.clone(),
                points: l.central.iter().map(|&v| (i as f64, v)).collect(),
                style: Style::Ladder,
            })
            .collect(),
        None => {
            warnings.push("no spectrum section; eigenvalue ladder left empty".to_string());
            Vec::new()
        }
    };
    let mut decay = Vec::new();
    match check(r, "kasparov").and_then(|v| v.pointer("/perturbation/levels")).and_then(|v| v.as_array()) {
        Some(levels) => {
            for l in levels {
                let n = l.get("n_points").and_then(|v| v.as_u64()).unwrap_or(0);
                let pts = l
                    .get("singular_values")
                    .and_then(|v| v.as_array())
                    .map(|a| {
                        a.iter()
                            .enumerate()
                            .filter_map(|(k, v)| v.as_f64().filter(|&s| s > 0.0).map(|s| ((k + 1) as f64, s.log10())))
                            .collect()
                    })
                    .unwrap_or_default();
                decay.push(Series {
                    label: format!("n={n}"),
                    points: pts,
                    style: Style::Markers,
                });
            }
        }
        None => warnings.push("no singular-value profile; decay panel left empty".to_string()),
    }
    let mut counting = Vec::new();
    match check(r, "multiplier")
        .and_then(|v| v.pointer("/compact_resolvent/counting_function"))
        .and_then(|v| v.as_array())
    {
        Some(cf) => counting.push(Series {
            label: "inner domain".into(),
            points: cf
                .iter()
                .filter_map(|p| Some((p.get(0)?.as_f64()?, p.get(1)?.as_f64()?)))
                .collect(),
            style: Style::Steps,
        }),
        None => warnings.push("no counting function; counting panel left empty".to_string()),
    }
    let panels = vec![
        Panel {
            title: "eigenvalue ladder".into(),
            x_label: "refinement level".into(),
            y_label: "eigenvalue".into(),
            series: ladder,
        },
        Panel {
            title: "singular values of a(F_{D+M} - F_D)".into(),
            x_label: "index".into(),
            y_label: "log10 sigma".into(),
            series: decay,
        },
        Panel {
            title: "eigenvalue counting function".into(),
            x_label: "Lambda".into(),
            y_label: "#{|lambda| <= Lambda}".into(),
            series: counting,
        },
    ];
    (panels, warnings)
}

/// SVG for a report plus warnings for skipped sections.
pub fn emit_plot(r: &Report) -> (String, Vec<String>) {
    let (panels, warnings) = report_panels(r);
    (render_panels(&panels), warnings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_panel_has_axes_only() {
        let p = Panel {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![],
        };
        let s = render_panels(&[p]);
        assert!(s.starts_with("<svg"));
        assert_eq!(s.matches("<line").count(), 2);
        assert!(s.contains("no data"));
        assert!(!s.contains("<circle") && !s.contains("<path"));
    }

    #[test]
    fn rendering_is_deterministic() {
        let p = Panel {
            title: "a<b".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![Series {
                label: "s".into(),
                points: vec![(0.0, 1.0), (1.0, 2.0), (2.0, f64::NAN)],
                style: Style::Steps,
            }],
        };
        let a = render_panels(std::slice::from_ref(&p));
        assert_eq!(a, render_panels(&[p]));
        assert!(a.contains("a&lt;b"));
        assert!(!a.contains("NaN"));
    }
}
