//! Minimal SVG plots: line and scatter series, reference lines and heatmaps
//! laid out as a grid of panels. Coordinates are printed with fixed
//! precision so output is byte-stable.

use std::fmt::Write;

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 62.0;
const MARGIN_R: f64 = 18.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 46.0;

pub const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Style {
    Line,
    Dashed,
    Points,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub color: String,
    pub style: Style,
}

impl Series {
    pub fn new(label: impl Into<String>, xs: Vec<f64>, ys: Vec<f64>, color: &str, style: Style) -> Self {
        Self {
            label: label.into(),
            xs,
            ys,
            color: color.to_string(),
            style,
        }
    }
}

/// Values on a grid; `z[row][col]` sits at `(x[col], y[row])`.
#[derive(Debug, Clone)]
pub struct Heatmap {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<Vec<f64>>,
    /// Symmetric color limit; values beyond it saturate.
    pub limit: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub hlines: Vec<(f64, String)>,
    pub vlines: Vec<(f64, String)>,
    pub heatmap: Option<Heatmap>,
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
    pub legend: bool,
}

impl Panel {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            legend: true,
            ..Default::default()
        }
    }

    fn data_range(&self) -> ((f64, f64), (f64, f64)) {
        let mut xr = (f64::INFINITY, f64::NEG_INFINITY);
        let mut yr = xr;
        let take = |r: &mut (f64, f64), v: f64| {
            if v.is_finite() {
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
            }
        };
        for s in &self.series {
            for (x, y) in s.xs.iter().zip(&s.ys) {
                if x.is_finite() && y.is_finite() {
                    take(&mut xr, *x);
                    take(&mut yr, *y);
                }
            }
        }
        if let Some(h) = &self.heatmap {
            h.x.iter().for_each(|v| take(&mut xr, *v));
            h.y.iter().for_each(|v| take(&mut yr, *v));
        }
        for (v, _) in &self.hlines {
            take(&mut yr, *v);
        }
        for (v, _) in &self.vlines {
            take(&mut xr, *v);
        }
        let fix = |r: (f64, f64)| {
            if !r.0.is_finite() {
                (0.0, 1.0)
            } else if r.0 == r.1 {
                let pad = if r.0 == 0.0 { 1.0 } else { 0.05 * r.0.abs() };
                (r.0 - pad, r.1 + pad)
            } else {
                r
            }
        };
        let xr = self.x_range.unwrap_or_else(|| fix(xr));
        let yr = self.y_range.unwrap_or_else(|| {
            let r = fix(yr);
            let pad = 0.04 * (r.1 - r.0);
            (r.0 - pad, r.1 + pad)
        });
        (xr, yr)
    }
}

pub struct Figure {
    pub title: String,
    pub panels: Vec<Panel>,
    pub cols: usize,
    /// Emitted as an XML comment; used for the config hash.
    pub comment: String,
}

/// Round tick positions covering `[lo, hi]`.
pub fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) || !span.is_finite() {
        return vec![lo];
    }
    let raw = span / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        return format!("{v:.1e}");
    }
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Blue-white-red map for a value scaled to `[-1, 1]`.
fn diverging(u: f64) -> String {
    let u = u.clamp(-1.0, 1.0);
    let (r, g, b) = if u >= 0.0 {
        (1.0, 1.0 - u, 1.0 - u)
    } else {
        (1.0 + u, 1.0 + u, 1.0)
    };
    let c = |x: f64| (255.0 * (0.15 + 0.85 * x)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", c(r), c(g), c(b))
}

/// Sequential map from dark blue to yellow for `u` in `[0, 1]`.
pub fn sequential(u: f64) -> String {
    let stops = [
        (0.267, 0.005, 0.329),
        (0.229, 0.322, 0.546),
        (0.128, 0.567, 0.551),
        (0.369, 0.789, 0.383),
        (0.993, 0.906, 0.144),
    ];
    let u = u.clamp(0.0, 1.0) * (stops.len() - 1) as f64;
    let i = (u.floor() as usize).min(stops.len() - 2);
    let f = u - i as f64;
    let mix = |a: f64, b: f64| ((a + f * (b - a)) * 255.0).round() as u8;
    let (a, b) = (stops[i], stops[i + 1]);
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

impl Figure {
    pub fn new(title: &str, comment: &str) -> Self {
        Self {
            title: title.into(),
            panels: Vec::new(),
            cols: 1,
            comment: comment.into(),
        }
    }

    pub fn render(&self) -> String {
        let cols = self.cols.max(1);
        let rows = self.panels.len().div_ceil(cols).max(1);
        let top = 28.0;
        let width = cols as f64 * PANEL_W;
        let height = top + rows as f64 * PANEL_H;
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(out, "<!-- {} -->", escape(&self.comment).replace("--", "- -"));
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="19" text-anchor="middle" font-size="14">{}</text>"#,
            width / 2.0,
            escape(&self.title)
        );
        for (k, p) in self.panels.iter().enumerate() {
            let ox = (k % cols) as f64 * PANEL_W;
            let oy = top + (k / cols) as f64 * PANEL_H;
            render_panel(&mut out, p, ox, oy, k);
        }
        out.push_str("</svg>\n");
        out
    }
}

fn render_panel(out: &mut String, p: &Panel, ox: f64, oy: f64, id: usize) {
    let ((x0, x1), (y0, y1)) = p.data_range();
    let (l, t) = (ox + MARGIN_L, oy + MARGIN_T);
    let (w, h) = (PANEL_W - MARGIN_L - MARGIN_R, PANEL_H - MARGIN_T - MARGIN_B);
    let sx = move |x: f64| l + (x - x0) / (x1 - x0) * w;
    let sy = move |y: f64| t + h - (y - y0) / (y1 - y0) * h;

    let _ = writeln!(out, r#"<g id="panel{id}">"#);
    let _ = writeln!(
        out,
        r#"<clipPath id="clip{id}"><rect x="{l:.2}" y="{t:.2}" width="{w:.2}" height="{h:.2}"/></clipPath>"#
    );
    if let Some(hm) = &p.heatmap {
        let _ = writeln!(out, r#"<g clip-path="url(#clip{id})">"#);
        let half = |v: &[f64], i: usize| {
            let n = v.len();
            if n < 2 {
                return (v[i] - 0.5, v[i] + 0.5);
            }
            let lo = if i == 0 { v[0] - 0.5 * (v[1] - v[0]) } else { 0.5 * (v[i - 1] + v[i]) };
            let hi = if i + 1 == n { v[n - 1] + 0.5 * (v[n - 1] - v[n - 2]) } else { 0.5 * (v[i] + v[i + 1]) };
            (lo, hi)
        };
        for (r, row) in hm.z.iter().enumerate() {
            let (ya, yb) = half(&hm.y, r);
            for (c, z) in row.iter().enumerate() {
                let (xa, xb) = half(&hm.x, c);
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                    sx(xa),
                    sy(yb),
                    sx(xb) - sx(xa),
                    sy(ya) - sy(yb),
                    diverging(z / hm.limit)
                );
            }
        }
        out.push_str("</g>\n");
    }
    let _ = writeln!(
        out,
        r#"<rect x="{l:.2}" y="{t:.2}" width="{w:.2}" height="{h:.2}" fill="none" stroke="black"/>"#
    );
    for v in ticks(x0, x1, 5) {
        let x = sx(v);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            t + h,
            t + h + 4.0,
            t + h + 16.0,
            label(v)
        );
    }
    for v in ticks(y0, y1, 5) {
        let y = sy(v);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{l:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            l - 4.0,
            l - 6.0,
            y + 4.0,
            label(v)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        l + w / 2.0,
        oy + PANEL_H - 10.0,
        escape(&p.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate({:.2},{:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        ox + 14.0,
        t + h / 2.0,
        escape(&p.y_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#,
        l + w / 2.0,
        oy + 20.0,
        escape(&p.title)
    );

    let _ = writeln!(out, r#"<g clip-path="url(#clip{id})">"#);
    for (v, name) in &p.hlines {
        let y = sy(*v);
        let _ = writeln!(
            out,
            r##"<line x1="{l:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#555" stroke-dasharray="4 3"><title>{}</title></line>"##,
            l + w,
            escape(name)
        );
    }
    for (v, name) in &p.vlines {
        let x = sx(*v);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{t:.2}" x2="{x:.2}" y2="{:.2}" stroke="#555" stroke-dasharray="4 3"><title>{}</title></line>"##,
            t + h,
            escape(name)
        );
    }
    for s in &p.series {
        match s.style {
            Style::Points => {
                for (x, y) in s.xs.iter().zip(&s.ys) {
                    if x.is_finite() && y.is_finite() {
                        let _ = writeln!(
                            out,
                            r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{}"/>"#,
                            sx(*x),
                            sy(*y),
                            s.color
                        );
                    }
                }
            }
            Style::Line | Style::Dashed => {
                // break the polyline at non-finite values
                let mut segments: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
                for (x, y) in s.xs.iter().zip(&s.ys) {
                    if x.is_finite() && y.is_finite() {
                        segments.last_mut().unwrap().push((sx(*x), sy(*y)));
                    } else if !segments.last().unwrap().is_empty() {
                        segments.push(Vec::new());
                    }
                }
                let dash = if s.style == Style::Dashed { r#" stroke-dasharray="6 4""# } else { "" };
                for seg in segments.iter().filter(|s| s.len() > 1) {
                    let pts: Vec<String> = seg.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                    let _ = writeln!(
                        out,
                        r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
                        pts.join(" "),
                        s.color
                    );
                }
            }
        }
    }
    out.push_str("</g>\n");

    if p.legend {
        let named: Vec<&Series> = p.series.iter().filter(|s| !s.label.is_empty()).collect();
        for (i, s) in named.iter().enumerate() {
            let y = t + 12.0 + 13.0 * i as f64;
            let x = l + w - 110.0;
            let _ = writeln!(
                out,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="2"/><text x="{:.2}" y="{y:.2}">{}</text>"#,
                y - 4.0,
                x + 16.0,
                y - 4.0,
                s.color,
                x + 20.0,
                escape(&s.label)
            );
        }
    }
    out.push_str("</g>\n");
}
