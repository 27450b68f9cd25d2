//! Minimal deterministic SVG line plots.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::observables::ObservableRecord;
use crate::output::BASE_COLUMNS;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("no series has at least two plottable points")]
    EmptySeries,
    #[error("unknown column '{0}'")]
    UnknownColumn(String),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ColorRole {
    /// Without the superconductor.
    Bare,
    /// With the superconductor.
    Coupled,
    /// Extra series, coloured from a fixed palette.
    Indexed(usize),
    Guide,
}

impl ColorRole {
    fn color(self) -> &'static str {
        const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#e377c2"];
        match self {
            ColorRole::Bare => "#2ca02c",
            ColorRole::Coupled => "#d62728",
            ColorRole::Indexed(k) => PALETTE[k % PALETTE.len()],
            ColorRole::Guide => "#555555",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeriesSpec {
    pub x: String,
    pub y: String,
    pub label: String,
    pub role: ColorRole,
    /// Keep only records whose column equals the value.
    pub filter: Option<(String, f64)>,
}

impl SeriesSpec {
    pub fn new(x: &str, y: &str, label: &str, role: ColorRole) -> Self {
        Self {
            x: x.into(),
            y: y.into(),
            label: label.into(),
            role,
            filter: None,
        }
    }

    pub fn filtered(self, column: &str, value: f64) -> Self {
        Self {
            filter: Some((column.into(), value)),
            ..self
        }
    }
}

/// Dashed `y = A x^exponent` line through the first point of the first
/// series.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Guide {
    pub exponent: f64,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub width: u32,
    pub height: u32,
    pub series: Vec<SeriesSpec>,
    pub guide: Option<Guide>,
}

impl PlotSpec {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_x: false,
            log_y: false,
            width: 720,
            height: 440,
            series: Vec::new(),
            guide: None,
        }
    }
}

/// Already-extracted data for one polyline.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub role: ColorRole,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rendered {
    pub svg: String,
    /// Points left out because they were non-finite or not positive on a
    /// log axis.
    pub dropped: usize,
}

impl Rendered {
    pub fn write(&self, path: &Path) -> Result<(), PlotError> {
        fs::write(path, &self.svg).map_err(|source| PlotError::Write {
            path: path.display().to_string(),
            source,
        })
    }
}

fn column_known(name: &str, records: &[ObservableRecord]) -> bool {
    if name != "error_flag" && BASE_COLUMNS.contains(&name) {
        return true;
    }
    match records.first() {
        Some(r) => r.column(name).is_some(),
        None => false,
    }
}

/// Pulls each series out of the records and renders them.
pub fn render_line_plot(records: &[ObservableRecord], spec: &PlotSpec) -> Result<Rendered, PlotError> {
    let mut series = Vec::with_capacity(spec.series.len());
    for s in &spec.series {
        let mut names = vec![s.x.as_str(), s.y.as_str()];
        if let Some((c, _)) = &s.filter {
            names.push(c);
        }
        if let Some(bad) = names.iter().find(|n| !column_known(n, records)) {
            return Err(PlotError::UnknownColumn(bad.to_string()));
        }
        let points = records
            .iter()
            .filter(|r| match &s.filter {
                Some((c, v)) => r.column(c) == Some(*v),
                None => true,
            })
            .map(|r| {
                (
                    r.column(&s.x).unwrap_or(f64::NAN),
                    r.column(&s.y).unwrap_or(f64::NAN),
                )
            })
            .collect();
        series.push(Series {
            label: s.label.clone(),
            role: s.role,
            points,
        });
    }
    render_series(&series, spec)
}

const MARGIN_L: f64 = 78.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 56.0;

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn from_values(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi - lo < 1e-12 * hi.abs().max(1.0) {
            let pad = if log { 0.5 } else { 0.5 * hi.abs().max(1.0) };
            lo -= pad;
            hi += pad;
        } else if !log {
            let pad = 0.04 * (hi - lo);
            lo -= pad;
            hi += pad;
        }
        Self { lo, hi, log }
    }

    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let (a, b) = (self.lo.ceil() as i32, self.hi.floor() as i32);
            let mut t: Vec<f64> = (a..=b).map(|k| 10f64.powi(k)).collect();
            if t.len() < 3 {
                let mults = [2.0, 5.0];
                for k in (self.lo.floor() as i32)..=(self.hi.ceil() as i32) {
                    for m in mults {
                        let v = m * 10f64.powi(k);
                        let lv = v.log10();
                        if lv >= self.lo && lv <= self.hi {
                            t.push(v);
                        }
                    }
                }
                t.sort_by(f64::total_cmp);
            }
            return t;
        }
        let span = self.hi - self.lo;
        let raw = span / 6.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let first = (self.lo / step).ceil() as i64;
        let last = (self.hi / step).floor() as i64;
        (first..=last).map(|k| k as f64 * step).collect()
    }
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e4).contains(&a) {
        let s = format!("{v:.1e}");
        return s.replace(".0e", "e");
    }
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders already-extracted series. Identical input gives identical bytes.
pub fn render_series(series: &[Series], spec: &PlotSpec) -> Result<Rendered, PlotError> {
    let keep = |&(x, y): &(f64, f64)| {
        x.is_finite() && y.is_finite() && (!spec.log_x || x > 0.0) && (!spec.log_y || y > 0.0)
    };
    let mut dropped = 0;
    let cleaned: Vec<Series> = series
        .iter()
        .map(|s| {
            let pts: Vec<(f64, f64)> = s.points.iter().copied().filter(keep).collect();
            dropped += s.points.len() - pts.len();
            Series {
                points: pts,
                ..s.clone()
            }
        })
        .collect();
    if dropped > 0 {
        log::warn!("plot '{}': dropped {dropped} unplottable points", spec.title);
    }
    if !cleaned.iter().any(|s| s.points.len() >= 2) {
        return Err(PlotError::EmptySeries);
    }
    let all = || cleaned.iter().flat_map(|s| s.points.iter());
    let xa = Axis::from_values(all().map(|p| p.0), spec.log_x);
    let ya = Axis::from_values(all().map(|p| p.1), spec.log_y);

    let (w, h) = (spec.width as f64, spec.height as f64);
    let pw = w - MARGIN_L - MARGIN_R;
    let ph = h - MARGIN_T - MARGIN_B;
    let px = |x: f64| MARGIN_L + xa.frac(x) * pw;
    let py = |y: f64| MARGIN_T + (1.0 - ya.frac(y)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        MARGIN_L + pw / 2.0,
        escape(&spec.title)
    );
    let _ = writeln!(s, r##"<g id="axes" stroke="#000" fill="none">"##);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN_L:.2}" y="{MARGIN_T:.2}" width="{pw:.2}" height="{ph:.2}"/>"#
    );
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g id="ticks">"#);
    for t in xa.ticks() {
        let x = px(t);
        let yb = MARGIN_T + ph;
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{yb:.2}" x2="{x:.2}" y2="{:.2}" stroke="#000"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            yb + 5.0,
            yb + 19.0,
            tick_label(t)
        );
    }
    for t in ya.ticks() {
        let y = py(t);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{MARGIN_L:.2}" y2="{y:.2}" stroke="#000"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            MARGIN_L - 5.0,
            MARGIN_L - 8.0,
            y + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        MARGIN_L + pw / 2.0,
        h - 14.0,
        escape(&spec.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        MARGIN_T + ph / 2.0,
        MARGIN_T + ph / 2.0,
        escape(&spec.y_label)
    );

    let mut legend: Vec<(String, ColorRole, bool)> = Vec::new();
    let _ = writeln!(s, r#"<g id="series" fill="none" stroke-width="1.5">"#);
    for ser in cleaned.iter().filter(|c| !c.points.is_empty()) {
        let pts: Vec<String> = ser
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline stroke="{}" points="{}"/>"#,
            ser.role.color(),
            pts.join(" ")
        );
        legend.push((ser.label.clone(), ser.role, false));
    }
    if let Some(g) = &spec.guide {
        let anchor = cleaned.iter().find_map(|c| c.points.first().copied());
        if let Some((x0, y0)) = anchor {
            let (xl, xr) = if xa.log {
                (10f64.powf(xa.lo), 10f64.powf(xa.hi))
            } else {
                (xa.lo, xa.hi)
            };
            let n = 64;
            let pts: Vec<String> = (0..=n)
                .map(|k| {
                    let x = if xa.log {
                        10f64.powf(xl.log10() + (xr.log10() - xl.log10()) * k as f64 / n as f64)
                    } else {
                        xl + (xr - xl) * k as f64 / n as f64
                    };
                    (x, y0 * (x / x0).powf(g.exponent))
                })
                .filter(|&(x, y)| x > 0.0 && keep(&(x, y)) && (0.0..=1.0).contains(&ya.frac(y)))
                .map(|(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            if pts.len() >= 2 {
                let _ = writeln!(
                    s,
                    r#"<polyline stroke="{}" stroke-dasharray="6 4" points="{}"/>"#,
                    ColorRole::Guide.color(),
                    pts.join(" ")
                );
                legend.push((g.label.clone(), ColorRole::Guide, true));
            }
        }
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g id="legend">"#);
    let lx = MARGIN_L + pw - 150.0;
    for (k, (label, role, dashed)) in legend.iter().enumerate() {
        let y = MARGIN_T + 16.0 + 18.0 * k as f64;
        let dash = if *dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 24.0,
            role.color(),
            lx + 30.0,
            y + 4.0,
            escape(label)
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    Ok(Rendered { svg: s, dropped })
}
