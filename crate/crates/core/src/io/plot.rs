//! Self-contained SVG charts: scatter, paired histograms, line panels.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::emit::write_atomic;

const WIDTH: f64 = 800.0;
const PANEL_HEIGHT: f64 = 320.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 50.0;
const PANEL_GAP: f64 = 40.0;

pub const COLOR_GOOD: &str = "#1f77b4";
pub const COLOR_BAD: &str = "#d62728";
pub const COLOR_A_PRIORI: &str = "#2ca02c";
pub const COLOR_POST_HOC: &str = "#ff7f0e";
const COLOR_AXIS: &str = "#333333";
const COLOR_GRID: &str = "#e5e5e5";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Marker {
    Circle,
    Star,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointSeries {
    pub label: String,
    pub color: String,
    pub marker: Marker,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bars {
    pub label: String,
    pub color: String,
    pub counts: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeanLine {
    pub label: String,
    pub color: String,
    pub x: f64,
}

/// Stacked histogram over shared bin edges.
#[derive(Clone, Debug, PartialEq)]
pub struct HistogramPanel {
    pub title: String,
    pub bin_edges: Vec<f64>,
    pub stacks: Vec<Bars>,
    pub mean_lines: Vec<MeanLine>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineSeries {
    pub label: String,
    pub color: String,
    pub ys: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinePanel {
    pub y_label: String,
    pub series: Vec<LineSeries>,
    pub zero_line: bool,
    /// Vertical marker at an interpolated zero crossing.
    pub crossing: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PlotKind {
    Scatter {
        series: Vec<PointSeries>,
        /// 45-degree reference line.
        diagonal: bool,
    },
    HistogramPair {
        panels: Vec<HistogramPanel>,
    },
    Line {
        xs: Vec<f64>,
        panels: Vec<LinePanel>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub kind: PlotKind,
}

fn nonempty(label: &str, what: &str) -> Result<()> {
    if label.trim().is_empty() {
        Err(Error::Precondition(format!("{what} label is empty")))
    } else {
        Ok(())
    }
}

impl PlotSpec {
    pub fn validate(&self) -> Result<()> {
        nonempty(&self.title, "plot title")?;
        nonempty(&self.x_label, "x axis")?;
        match &self.kind {
            PlotKind::Scatter { series, .. } => {
                nonempty(&self.y_label, "y axis")?;
                for s in series {
                    nonempty(&s.label, "series")?;
                }
            }
            PlotKind::HistogramPair { panels } => {
                for p in panels {
                    nonempty(&p.title, "panel")?;
                    if p.bin_edges.len() < 2 {
                        return Err(Error::Precondition("histogram needs at least one bin".into()));
                    }
                    for b in &p.stacks {
                        nonempty(&b.label, "bar")?;
                        if b.counts.len() + 1 != p.bin_edges.len() {
                            return Err(Error::Precondition(format!(
                                "series {} has {} counts for {} bins",
                                b.label,
                                b.counts.len(),
                                p.bin_edges.len() - 1
                            )));
                        }
                    }
                }
            }
            PlotKind::Line { xs, panels } => {
                for p in panels {
                    nonempty(&p.y_label, "panel y axis")?;
                    for s in &p.series {
                        nonempty(&s.label, "series")?;
                        if s.ys.len() != xs.len() {
                            return Err(Error::Precondition(format!(
                                "series {} has {} values for {} grid points",
                                s.label,
                                s.ys.len(),
                                xs.len()
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Range covering `values`, widened when empty or degenerate.
fn range(values: impl Iterator<Item = f64>, what: &str, warnings: &mut Vec<String>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        warnings.push(format!("{what}: no finite data, axis set to [0, 1]"));
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
        let pad = (lo.abs() * 0.1).max(0.5);
        warnings.push(format!("{what}: degenerate range at {lo}, expanded by {pad}"));
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let raw = (hi - lo) / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

struct Frame {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x.0) / (self.x.1 - self.x.0) * self.width
    }

    fn py(&self, y: f64) -> f64 {
        self.top + self.height - (y - self.y.0) / (self.y.1 - self.y.0) * self.height
    }

    fn axes(&self, svg: &mut String, x_label: &str, y_label: &str) {
        for t in nice_ticks(self.y.0, self.y.1, 5) {
            let y = self.py(t);
            let _ = writeln!(
                svg,
                r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{COLOR_GRID}"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
                self.left,
                self.left + self.width,
                self.left - 6.0,
                y + 4.0,
                tick_label(t)
            );
        }
        for t in nice_ticks(self.x.0, self.x.1, 8) {
            let x = self.px(t);
            let _ = writeln!(
                svg,
                r#"<text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
                self.top + self.height + 16.0,
                tick_label(t)
            );
        }
        let _ = writeln!(
            svg,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="{COLOR_AXIS}"/>"#,
            self.left, self.top, self.width, self.height
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{}</text>"#,
            self.left + self.width / 2.0,
            self.top + self.height + 36.0,
            esc(x_label)
        );
        let (cx, cy) = (self.left - 50.0, self.top + self.height / 2.0);
        let _ = writeln!(
            svg,
            r#"<text x="{cx:.2}" y="{cy:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 {cx:.2} {cy:.2})">{}</text>"#,
            esc(y_label)
        );
    }
}

fn tick_label(t: f64) -> String {
    let s = format!("{t:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn legend(svg: &mut String, x: f64, y: f64, entries: &[(&str, &str)]) {
    for (i, (label, color)) in entries.iter().enumerate() {
        let yy = y + i as f64 * 16.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{x:.2}" y="{:.2}" width="10" height="10" fill="{color}"/><text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
            yy - 9.0,
            x + 14.0,
            yy,
            esc(label)
        );
    }
}

fn star_points(cx: f64, cy: f64, r: f64) -> String {
    (0..10)
        .map(|k| {
            let rad = if k % 2 == 0 { r } else { r * 0.45 };
            let a = std::f64::consts::PI * (k as f64) / 5.0 - std::f64::consts::FRAC_PI_2;
            format!("{:.2},{:.2}", cx + rad * a.cos(), cy + rad * a.sin())
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn header(height: f64, title: &str) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="28" font-size="16" text-anchor="middle" font-weight="bold">{}</text>"#,
        WIDTH / 2.0,
        esc(title)
    );
    svg
}

fn render_scatter(spec: &PlotSpec, series: &[PointSeries], diagonal: bool, warnings: &mut Vec<String>) -> String {
    let height = PANEL_HEIGHT + 180.0;
    let mut svg = header(height, &spec.title);
    let all = || series.iter().flat_map(|s| s.points.iter());
    let mut x = range(all().map(|p| p.0), "x axis", warnings);
    let mut y = range(all().map(|p| p.1), "y axis", warnings);
    if diagonal {
        let lo = x.0.min(y.0);
        let hi = x.1.max(y.1);
        x = (lo, hi);
        y = (lo, hi);
    }
    let frame = Frame {
        left: MARGIN_LEFT,
        top: MARGIN_TOP,
        width: WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
        height: height - MARGIN_TOP - MARGIN_BOTTOM,
        x,
        y,
    };
    frame.axes(&mut svg, &spec.x_label, &spec.y_label);
    if diagonal {
        let _ = writeln!(
            svg,
            r#"<line class="reference" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{COLOR_AXIS}" stroke-dasharray="6,4"/>"#,
            frame.px(x.0),
            frame.py(x.0),
            frame.px(x.1),
            frame.py(x.1)
        );
    }
    for s in series {
        for &(px, py) in &s.points {
            let (cx, cy) = (frame.px(px), frame.py(py));
            match s.marker {
                Marker::Circle => {
                    let _ = writeln!(
                        svg,
                        r#"<circle class="mark" cx="{cx:.2}" cy="{cy:.2}" r="3.5" fill="{}" fill-opacity="0.7"/>"#,
                        s.color
                    );
                }
                Marker::Star => {
                    let _ = writeln!(
                        svg,
                        r#"<polygon class="mark" points="{}" fill="{}" fill-opacity="0.8"/>"#,
                        star_points(cx, cy, 6.0),
                        s.color
                    );
                }
            }
        }
    }
    let entries: Vec<(&str, &str)> = series.iter().map(|s| (s.label.as_str(), s.color.as_str())).collect();
    legend(&mut svg, frame.left + 12.0, frame.top + 18.0, &entries);
    svg
}

fn render_histograms(spec: &PlotSpec, panels: &[HistogramPanel], warnings: &mut Vec<String>) -> String {
    let cols = 2usize;
    let rows = panels.len().div_ceil(cols).max(1);
    let cell_w = (WIDTH - MARGIN_RIGHT) / cols as f64;
    let height = MARGIN_TOP + rows as f64 * (PANEL_HEIGHT + PANEL_GAP) + 20.0;
    let mut svg = header(height, &spec.title);
    for (k, p) in panels.iter().enumerate() {
        let (row, col) = (k / cols, k % cols);
        let totals: Vec<u64> = (0..p.bin_edges.len() - 1)
            .map(|b| p.stacks.iter().map(|s| s.counts[b]).sum())
            .collect();
        let ymax = totals.iter().copied().max().unwrap_or(0) as f64;
        let y = if ymax > 0.0 { (0.0, ymax * 1.08) } else { (0.0, 1.0) };
        let x = (p.bin_edges[0], *p.bin_edges.last().unwrap());
        let frame = Frame {
            left: col as f64 * cell_w + MARGIN_LEFT,
            top: MARGIN_TOP + row as f64 * (PANEL_HEIGHT + PANEL_GAP) + 20.0,
            width: cell_w - MARGIN_LEFT - 10.0,
            height: PANEL_HEIGHT - MARGIN_BOTTOM - 20.0,
            x,
            y,
        };
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{}</text>"#,
            frame.left + frame.width / 2.0,
            frame.top - 8.0,
            esc(&p.title)
        );
        frame.axes(&mut svg, &spec.x_label, &spec.y_label);
        let mut base = vec![0u64; totals.len()];
        for s in &p.stacks {
            for (b, &c) in s.counts.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let (x0, x1) = (frame.px(p.bin_edges[b]), frame.px(p.bin_edges[b + 1]));
                let (y0, y1) = (frame.py(base[b] as f64), frame.py((base[b] + c) as f64));
                let _ = writeln!(
                    svg,
                    r#"<rect class="bar" x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="{}" fill-opacity="0.75"/>"#,
                    (x1 - x0).max(0.5),
                    y0 - y1,
                    s.color
                );
                base[b] += c;
            }
        }
        if ymax == 0.0 {
            warnings.push(format!("panel \"{}\": no trials to plot", p.title));
            let _ = writeln!(
                svg,
                r#"<text class="empty-note" x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">no published trials</text>"#,
                frame.left + frame.width / 2.0,
                frame.top + frame.height / 2.0
            );
        }
        for m in &p.mean_lines {
            if !(m.x.is_finite() && m.x >= x.0 && m.x <= x.1) {
                continue;
            }
            let px = frame.px(m.x);
            let _ = writeln!(
                svg,
                r#"<line class="mean" x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="{}" stroke-width="2" stroke-dasharray="6,4"/>"#,
                frame.top,
                frame.top + frame.height,
                m.color
            );
        }
        let mut entries: Vec<(&str, &str)> = p.stacks.iter().map(|s| (s.label.as_str(), s.color.as_str())).collect();
        entries.extend(p.mean_lines.iter().map(|m| (m.label.as_str(), m.color.as_str())));
        legend(&mut svg, frame.left + frame.width - 130.0, frame.top + 16.0, &entries);
        if let Some(note) = &p.note {
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" font-size="11" fill="dimgray">{}</text>"#,
                frame.left + 6.0,
                frame.top + frame.height - 6.0,
                esc(note)
            );
        }
    }
    svg
}

fn render_lines(spec: &PlotSpec, xs: &[f64], panels: &[LinePanel], warnings: &mut Vec<String>) -> String {
    let height = MARGIN_TOP + panels.len() as f64 * (PANEL_HEIGHT + PANEL_GAP);
    let mut svg = header(height, &spec.title);
    let x = range(xs.iter().copied(), "x axis", warnings);
    for (k, p) in panels.iter().enumerate() {
        let values = p.series.iter().flat_map(|s| s.ys.iter().flatten().copied());
        let zero = p.zero_line.then_some(0.0);
        let y = range(values.chain(zero), &format!("panel {}", p.y_label), warnings);
        let frame = Frame {
            left: MARGIN_LEFT,
            top: MARGIN_TOP + k as f64 * (PANEL_HEIGHT + PANEL_GAP),
            width: WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
            height: PANEL_HEIGHT - MARGIN_BOTTOM,
            x,
            y,
        };
        frame.axes(&mut svg, &spec.x_label, &p.y_label);
        if p.zero_line {
            let py = frame.py(0.0);
            let _ = writeln!(
                svg,
                r#"<line class="zero" x1="{:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="{COLOR_AXIS}" stroke-dasharray="4,3"/>"#,
                frame.left,
                frame.left + frame.width
            );
        }
        for s in &p.series {
            let mut path = String::new();
            let mut pen_up = true;
            for (&gx, gy) in xs.iter().zip(&s.ys) {
                match gy {
                    Some(v) => {
                        let _ = write!(path, "{}{:.2},{:.2} ", if pen_up { "M" } else { "L" }, frame.px(gx), frame.py(*v));
                        pen_up = false;
                    }
                    None => pen_up = true,
                }
            }
            let _ = writeln!(
                svg,
                r#"<path d="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
                path.trim_end(),
                s.color
            );
            for (&gx, gy) in xs.iter().zip(&s.ys) {
                if let Some(v) = gy {
                    let _ = writeln!(
                        svg,
                        r#"<circle class="mark" cx="{:.2}" cy="{:.2}" r="4" fill="{}"/>"#,
                        frame.px(gx),
                        frame.py(*v),
                        s.color
                    );
                }
            }
        }
        if let Some(c) = p.crossing {
            let px = frame.px(c);
            let _ = writeln!(
                svg,
                r#"<line class="crossing" x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="{COLOR_AXIS}" stroke-width="1.5"/><text x="{:.2}" y="{:.2}" font-size="11">zero at {}</text>"#,
                frame.top,
                frame.top + frame.height,
                px + 4.0,
                frame.top + frame.height - 6.0,
                tick_label(c)
            );
        }
        let entries: Vec<(&str, &str)> = p.series.iter().map(|s| (s.label.as_str(), s.color.as_str())).collect();
        legend(&mut svg, frame.left + frame.width - 170.0, frame.top + 18.0, &entries);
    }
    svg
}

/// Renders the SVG document; returns it with any axis warnings.
pub fn render_svg(spec: &PlotSpec) -> Result<(String, Vec<String>)> {
    spec.validate()?;
    let mut warnings = Vec::new();
    let mut svg = match &spec.kind {
        PlotKind::Scatter { series, diagonal } => render_scatter(spec, series, *diagonal, &mut warnings),
        PlotKind::HistogramPair { panels } => render_histograms(spec, panels, &mut warnings),
        PlotKind::Line { xs, panels } => render_lines(spec, xs, panels, &mut warnings),
    };
    svg.push_str("</svg>\n");
    Ok((svg, warnings))
}

pub fn emit_plot(spec: &PlotSpec, path: &Path) -> Result<Vec<String>> {
    let (svg, warnings) = render_svg(spec)?;
    write_atomic(path, svg.as_bytes())?;
    Ok(warnings)
}
