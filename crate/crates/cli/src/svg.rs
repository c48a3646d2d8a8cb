//! Minimal self-contained SVG line and scatter charts.

use std::fmt::Write;

const PANEL_W: f64 = 520.0;
const PANEL_H: f64 = 340.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 34.0;
const MARGIN_B: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dash {
    Solid,
    Dashed,
    DashDot,
}

impl Dash {
    fn attr(self) -> &'static str {
        match self {
            Dash::Solid => "",
            Dash::Dashed => " stroke-dasharray=\"8 5\"",
            Dash::DashDot => " stroke-dasharray=\"9 4 2 4\"",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line(Dash),
    LineMarkers(Dash),
    Markers,
    /// Large outlined markers drawn over other series.
    Symbols,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
    /// Palette slot; series sharing a slot share a colour.
    pub color: usize,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>, style: Style, color: usize) -> Self {
        Self { label: label.into(), points, style, color }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub log_x: bool,
    /// Explicit x tick positions; `None` picks round numbers.
    pub x_ticks: Option<Vec<f64>>,
    pub vlines: Vec<(f64, String)>,
    /// Same scale on both axes, centred on the origin.
    pub square: bool,
}

impl Panel {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub title: String,
    pub panels: Vec<Panel>,
    pub columns: usize,
}

impl Figure {
    pub fn new(title: impl Into<String>, panels: Vec<Panel>, columns: usize) -> Self {
        Self { title: title.into(), panels, columns: columns.max(1) }
    }

    pub fn render(&self) -> String {
        let cols = self.columns.min(self.panels.len().max(1));
        let rows = self.panels.len().div_ceil(cols).max(1);
        let head = 30.0;
        let (w, h) = (cols as f64 * PANEL_W, head + rows as f64 * PANEL_H);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\" font-family=\"sans-serif\" font-size=\"12\">"
        );
        let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
            w / 2.0,
            esc(&self.title)
        );
        for (k, p) in self.panels.iter().enumerate() {
            let ox = (k % cols) as f64 * PANEL_W;
            let oy = head + (k / cols) as f64 * PANEL_H;
            let _ = writeln!(s, "<g transform=\"translate({ox:.0},{oy:.0})\">");
            render_panel(&mut s, p);
            s.push_str("</g>\n");
        }
        s.push_str("</svg>\n");
        s
    }
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
    px0: f64,
    px1: f64,
}

impl Axis {
    fn map(&self, v: f64) -> f64 {
        let (v, lo, hi) = if self.log { (v.log10(), self.lo.log10(), self.hi.log10()) } else { (v, self.lo, self.hi) };
        self.px0 + (v - lo) / (hi - lo) * (self.px1 - self.px0)
    }
}

fn finite_points(p: &Panel) -> impl Iterator<Item = (f64, f64)> + '_ {
    p.series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(move |(x, y)| x.is_finite() && y.is_finite() && (!p.log_x || *x > 0.0))
}

fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

fn pad(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let d = 0.05 * (hi - lo);
        (lo - d, hi + d)
    } else {
        let d = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - d, hi + d)
    }
}

fn render_panel(s: &mut String, p: &Panel) {
    let (x0, x1, y0, y1) = (MARGIN_L, PANEL_W - MARGIN_R, PANEL_H - MARGIN_B, MARGIN_T);
    let xr = range(finite_points(p).map(|v| v.0).chain(p.vlines.iter().map(|v| v.0)));
    let yr = range(finite_points(p).map(|v| v.1));
    let (xr, yr) = match (xr, yr) {
        (Some(x), Some(y)) => (x, y),
        _ => ((0.0, 1.0), (0.0, 1.0)),
    };
    let (xr, yr) = if p.square {
        let m = [xr.0, xr.1, yr.0, yr.1].iter().fold(0.0f64, |a, v| a.max(v.abs())) * 1.1;
        let m = if m > 0.0 { m } else { 1.0 };
        ((-m, m), (-m, m))
    } else if p.log_x {
        ((xr.0 / 1.2, xr.1 * 1.2), pad(yr.0, yr.1))
    } else {
        (pad(xr.0, xr.1), pad(yr.0, yr.1))
    };
    let xa = Axis { lo: xr.0, hi: xr.1, log: p.log_x, px0: x0, px1: x1 };
    let ya = Axis { lo: yr.0, hi: yr.1, log: false, px0: y0, px1: y1 };

    let _ = writeln!(
        s,
        "<rect x=\"{x0:.1}\" y=\"{y1:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"#444\"/>",
        x1 - x0,
        y0 - y1
    );
    let xt = match &p.x_ticks {
        Some(t) => t.clone(),
        None => nice_ticks(xa.lo, xa.hi),
    };
    for t in xt.iter().filter(|t| **t >= xa.lo && **t <= xa.hi) {
        let px = xa.map(*t);
        let _ = writeln!(s, "<line x1=\"{px:.1}\" y1=\"{y1:.1}\" x2=\"{px:.1}\" y2=\"{y0:.1}\" stroke=\"#e4e4e4\"/>");
        let _ = writeln!(s, "<text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>", y0 + 16.0, tick_label(*t));
    }
    for t in nice_ticks(ya.lo, ya.hi) {
        let py = ya.map(t);
        let _ = writeln!(s, "<line x1=\"{x0:.1}\" y1=\"{py:.1}\" x2=\"{x1:.1}\" y2=\"{py:.1}\" stroke=\"#e4e4e4\"/>");
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>", x0 - 6.0, py + 4.0, tick_label(t));
    }
    let _ = writeln!(s, "<text x=\"{:.1}\" y=\"22\" text-anchor=\"middle\" font-size=\"13\">{}</text>", (x0 + x1) / 2.0, esc(&p.title));
    let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>", (x0 + x1) / 2.0, PANEL_H - 12.0, esc(&p.x_label));
    let _ = writeln!(
        s,
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        esc(&p.y_label)
    );
    for (k, (x, label)) in p.vlines.iter().enumerate() {
        let px = xa.map(*x);
        let _ = writeln!(
            s,
            "<line x1=\"{px:.1}\" y1=\"{y1:.1}\" x2=\"{px:.1}\" y2=\"{y0:.1}\" stroke=\"#555\" stroke-dasharray=\"3 3\"/>"
        );
        let ly = y0 - 8.0 - 12.0 * k as f64;
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{ly:.1}\" font-size=\"10\">{}</text>", px + 3.0, esc(label));
    }

    for ser in &p.series {
        let color = PALETTE[ser.color % PALETTE.len()];
        let pts: Vec<(f64, f64)> = ser
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite() && (!p.log_x || *x > 0.0))
            .map(|&(x, y)| (xa.map(x), ya.map(y)))
            .collect();
        let line = match ser.style {
            Style::Line(d) | Style::LineMarkers(d) => Some(d),
            Style::Markers | Style::Symbols => None,
        };
        if let Some(d) = line {
            if pts.len() > 1 {
                let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
                let _ = writeln!(
                    s,
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"{}/>",
                    path.join(" "),
                    d.attr()
                );
            }
        }
        let (r, outline) = match ser.style {
            Style::Markers => (1.6, ""),
            Style::LineMarkers(_) => (3.0, ""),
            Style::Symbols => (4.5, " stroke=\"black\""),
            Style::Line(_) => (0.0, ""),
        };
        if r > 0.0 {
            for (x, y) in &pts {
                let _ = writeln!(s, "<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"{r}\" fill=\"{color}\"{outline}/>");
            }
        }
    }

    let labelled: Vec<&Series> = p.series.iter().filter(|s| !s.label.is_empty()).collect();
    let lx = x1 - 170.0;
    if !labelled.is_empty() {
        let _ = writeln!(
            s,
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"166\" height=\"{:.1}\" fill=\"white\" fill-opacity=\"0.85\" stroke=\"#bbb\"/>",
            lx - 6.0,
            y1 + 4.0,
            15.0 * labelled.len() as f64 + 6.0
        );
    }
    for (k, ser) in labelled.iter().enumerate() {
        let color = PALETTE[ser.color % PALETTE.len()];
        let ly = y1 + 14.0 + 15.0 * k as f64;
        match ser.style {
            Style::Line(d) | Style::LineMarkers(d) => {
                let _ = writeln!(
                    s,
                    "<line x1=\"{lx:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"1.6\"{}/>",
                    lx + 24.0,
                    d.attr()
                );
            }
            Style::Markers | Style::Symbols => {
                let _ = writeln!(s, "<circle cx=\"{:.1}\" cy=\"{ly:.1}\" r=\"3\" fill=\"{color}\"/>", lx + 12.0);
            }
        }
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\">{}</text>", lx + 30.0, ly + 4.0, esc(&ser.label));
    }
}

/// About six round-numbered ticks spanning [lo, hi].
pub fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return vec![lo];
    }
    let raw = (hi - lo) / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        return format!("{v:.1e}");
    }
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

fn esc(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
