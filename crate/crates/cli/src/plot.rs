//! Minimal self-contained SVG line plots. Output depends only on the input
//! data, so identical series give byte-identical documents.

use std::fmt::Write as _;

use crate::error::CliError;

const WIDTH: f64 = 760.0;
const PANEL_HEIGHT: f64 = 300.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 210.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 46.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stroke {
    Solid,
    Dashed,
}

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub color: &'static str,
    pub stroke: Stroke,
    pub width: f64,
}

impl Series {
    pub fn line(label: impl Into<String>, x: Vec<f64>, y: Vec<f64>, color: &'static str) -> Self {
        Self {
            label: label.into(),
            x,
            y,
            color,
            stroke: Stroke::Solid,
            width: 1.6,
        }
    }

    pub fn dashed(mut self) -> Self {
        self.stroke = Stroke::Dashed;
        self
    }

    pub fn thick(mut self) -> Self {
        self.width = 2.4;
        self
    }
}

/// Shaded region between two curves on a common abscissa.
#[derive(Clone, Debug)]
pub struct Band {
    pub label: String,
    pub x: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub color: &'static str,
}

#[derive(Clone, Debug, Default)]
pub struct Panel {
    /// `_{…}` renders as a subscript.
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
    pub bands: Vec<Band>,
    /// Extra legend lines, e.g. σ and h.
    pub notes: Vec<String>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Text with `_{…}` groups turned into subscript spans.
fn rich(s: &str) -> String {
    let mut out = String::new();
    let mut rest = s;
    while let Some(i) = rest.find("_{") {
        out.push_str(&escape(&rest[..i]));
        let tail = &rest[i + 2..];
        let j = tail.find('}').unwrap_or(tail.len());
        write!(out, "<tspan baseline-shift=\"sub\" font-size=\"75%\">{}</tspan>", escape(&tail[..j])).unwrap();
        rest = tail.get(j + 1..).unwrap_or("");
    }
    out.push_str(&escape(rest));
    out
}

fn check(label: &str, x: &[f64], ys: &[&[f64]]) -> Result<(), CliError> {
    if x.len() < 2 {
        return Err(CliError::Plot(format!("series `{label}` is degenerate ({} point(s))", x.len())));
    }
    if ys.iter().any(|y| y.len() != x.len()) {
        return Err(CliError::Plot(format!("series `{label}` has mismatched lengths")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Plot(format!("series `{label}` has non-finite abscissae")));
    }
    Ok(())
}

/// Decimal tick step giving roughly five intervals.
fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let m = if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.0e}")
    }
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn map(&self, v: f64, a: f64, b: f64) -> Option<f64> {
        let u = if self.log {
            if !(v > 0.0 && v.is_finite()) {
                return None;
            }
            v.log10()
        } else {
            if !v.is_finite() {
                return None;
            }
            v
        };
        Some(a + (u - self.lo) / (self.hi - self.lo) * (b - a))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (lo, hi) = (self.lo.ceil() as i32, self.hi.floor() as i32);
            let every = ((hi - lo) / 8 + 1).max(1);
            (lo..=hi)
                .filter(|e| e.rem_euclid(every) == 0)
                .map(|e| (e as f64, format!("1e{e}")))
                .collect()
        } else {
            let step = nice_step(self.hi - self.lo);
            let first = (self.lo / step).ceil() as i64;
            let last = (self.hi / step).floor() as i64;
            (first..=last)
                .map(|i| {
                    let v = i as f64 * step;
                    (v, fmt_tick(v))
                })
                .collect()
        }
    }
}

fn y_axis(panel: &Panel) -> Result<Axis, CliError> {
    let vals = panel
        .series
        .iter()
        .flat_map(|s| s.y.iter())
        .chain(panel.bands.iter().flat_map(|b| b.lo.iter().chain(&b.hi)))
        .copied()
        .filter(|v| v.is_finite() && (!panel.log_y || *v > 0.0));
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vals {
        let u = if panel.log_y { v.log10() } else { v };
        lo = lo.min(u);
        hi = hi.max(u);
    }
    if !lo.is_finite() {
        return Err(CliError::Plot(format!("panel `{}` has nothing to draw", panel.title)));
    }
    if panel.log_y {
        lo = lo.floor();
        hi = hi.ceil();
        if hi <= lo {
            hi = lo + 1.0;
        }
    } else {
        let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 * lo.abs().max(1.0) };
        lo -= pad;
        hi += pad;
    }
    Ok(Axis {
        lo,
        hi,
        log: panel.log_y,
    })
}

fn dash(stroke: Stroke) -> &'static str {
    match stroke {
        Stroke::Solid => "",
        Stroke::Dashed => " stroke-dasharray=\"6 4\"",
    }
}

fn polyline_paths(xa: &Axis, ya: &Axis, x: &[f64], y: &[f64], frame: [f64; 4]) -> Vec<String> {
    let [x0, x1, y0, y1] = frame;
    let mut paths = Vec::new();
    let mut cur = String::new();
    for (&xv, &yv) in x.iter().zip(y) {
        match (xa.map(xv, x0, x1), ya.map(yv, y1, y0)) {
            (Some(px), Some(py)) => {
                let _ = write!(cur, "{}{px:.2},{py:.2}", if cur.is_empty() { "" } else { " " });
            }
            _ => {
                if !cur.is_empty() {
                    paths.push(std::mem::take(&mut cur));
                }
            }
        }
    }
    if !cur.is_empty() {
        paths.push(cur);
    }
    paths
}

fn render_panel(out: &mut String, panel: &Panel, top: f64) -> Result<(), CliError> {
    for s in &panel.series {
        check(&s.label, &s.x, &[&s.y])?;
    }
    for b in &panel.bands {
        check(&b.label, &b.x, &[&b.lo, &b.hi])?;
    }
    if panel.series.is_empty() && panel.bands.is_empty() {
        return Err(CliError::Plot(format!("panel `{}` has no series", panel.title)));
    }
    let xs = panel.series.iter().flat_map(|s| s.x.iter()).chain(panel.bands.iter().flat_map(|b| b.x.iter()));
    let (xlo, xhi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(xhi > xlo) {
        return Err(CliError::Plot(format!("panel `{}` has an empty x range", panel.title)));
    }
    let xa = Axis {
        lo: xlo,
        hi: xhi,
        log: false,
    };
    let ya = y_axis(panel)?;
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (top + TOP, top + PANEL_HEIGHT - BOTTOM);
    let frame = [x0, x1, y0, y1];

    writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"15\" text-anchor=\"middle\">{}</text>",
        0.5 * (x0 + x1),
        top + 22.0,
        rich(&panel.title)
    )
    .unwrap();
    writeln!(
        out,
        "<rect x=\"{x0:.2}\" y=\"{y0:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#444\"/>",
        x1 - x0,
        y1 - y0
    )
    .unwrap();
    for (v, label) in xa.ticks() {
        let px = xa.map(v, x0, x1).expect("finite tick");
        writeln!(out, "<line x1=\"{px:.2}\" y1=\"{y1:.2}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"#444\"/>", y1 + 5.0).unwrap();
        writeln!(
            out,
            "<text x=\"{px:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{label}</text>",
            y1 + 18.0
        )
        .unwrap();
    }
    for (u, label) in ya.ticks() {
        let py = y1 - (u - ya.lo) / (ya.hi - ya.lo) * (y1 - y0);
        writeln!(out, "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{x0:.2}\" y2=\"{py:.2}\" stroke=\"#444\"/>", x0 - 5.0).unwrap();
        writeln!(
            out,
            "<line x1=\"{x0:.2}\" y1=\"{py:.2}\" x2=\"{x1:.2}\" y2=\"{py:.2}\" stroke=\"#ddd\"/>"
        )
        .unwrap();
        writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\">{label}</text>",
            x0 - 8.0,
            py + 4.0
        )
        .unwrap();
    }
    writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
        0.5 * (x0 + x1),
        y1 + 36.0,
        rich(&panel.x_label)
    )
    .unwrap();
    writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 {:.2} {:.2})\">{}</text>",
        x0 - 56.0,
        0.5 * (y0 + y1),
        x0 - 56.0,
        0.5 * (y0 + y1),
        rich(&panel.y_label)
    )
    .unwrap();

    for b in &panel.bands {
        let upper = polyline_paths(&xa, &ya, &b.x, &b.hi, frame);
        let lower = polyline_paths(&xa, &ya, &b.x, &b.lo, frame);
        if let (Some(u), Some(l)) = (upper.first(), lower.first()) {
            let rev: Vec<&str> = l.split(' ').rev().collect();
            writeln!(
                out,
                "<polygon points=\"{u} {}\" fill=\"{}\" fill-opacity=\"0.18\" stroke=\"none\"/>",
                rev.join(" "),
                b.color
            )
            .unwrap();
        }
    }
    for s in &panel.series {
        for p in polyline_paths(&xa, &ya, &s.x, &s.y, frame) {
            writeln!(
                out,
                "<polyline points=\"{p}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{:.1}\"{}/>",
                s.color,
                s.width,
                dash(s.stroke)
            )
            .unwrap();
        }
    }

    let lx = x1 + 14.0;
    let mut ly = y0 + 10.0;
    for b in &panel.bands {
        writeln!(
            out,
            "<rect x=\"{lx:.2}\" y=\"{:.2}\" width=\"24\" height=\"10\" fill=\"{}\" fill-opacity=\"0.18\"/>",
            ly - 5.0,
            b.color
        )
        .unwrap();
        writeln!(out, "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\">{}</text>", lx + 30.0, ly + 4.0, rich(&b.label)).unwrap();
        ly += 18.0;
    }
    for s in &panel.series {
        writeln!(
            out,
            "<line x1=\"{lx:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{}\" stroke-width=\"{:.1}\"{}/>",
            lx + 24.0,
            s.color,
            s.width,
            dash(s.stroke)
        )
        .unwrap();
        writeln!(out, "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\">{}</text>", lx + 30.0, ly + 4.0, rich(&s.label)).unwrap();
        ly += 18.0;
    }
    for n in &panel.notes {
        writeln!(out, "<text x=\"{lx:.2}\" y=\"{:.2}\" font-size=\"11\">{}</text>", ly + 4.0, rich(n)).unwrap();
        ly += 16.0;
    }
    Ok(())
}

/// Stacks the panels vertically into one SVG document.
pub fn render(panels: &[Panel]) -> Result<String, CliError> {
    if panels.is_empty() {
        return Err(CliError::Plot("no panels to draw".into()));
    }
    let height = PANEL_HEIGHT * panels.len() as f64;
    let mut out = String::new();
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {WIDTH:.0} {height:.0}\" font-family=\"sans-serif\">"
    )
    .unwrap();
    writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>").unwrap();
    for (i, p) in panels.iter().enumerate() {
        writeln!(out, "<g>").unwrap();
        render_panel(&mut out, p, PANEL_HEIGHT * i as f64)?;
        writeln!(out, "</g>").unwrap();
    }
    out.push_str("</svg>\n");
    Ok(out)
}
