//! Minimal SVG line plots. Each plot is written together with a sidecar
//! CSV (`series,x,y`) holding the exact numbers drawn.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::Result;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 72.0;
const MARGIN_R: f64 = 160.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 52.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Dashed,
    Points,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub style: Style,
}

impl Series {
    pub fn new(name: impl Into<String>, x: Vec<f64>, y: Vec<f64>, style: Style) -> Self {
        Series { name: name.into(), x, y, style }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Draw x decreasing to the right (NMR ppm convention).
    pub reverse_x: bool,
    pub series: Vec<Series>,
}

fn nice_step(range: f64) -> f64 {
    let raw = range / 5.0;
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

fn extent(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

impl Plot {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Plot { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), reverse_x: false, series: Vec::new() }
    }

    pub fn reversed_x(mut self) -> Self {
        self.reverse_x = true;
        self
    }

    pub fn push(&mut self, s: Series) {
        self.series.push(s);
    }

    pub fn to_svg(&self) -> String {
        let (x0, x1) = extent(self.series.iter().flat_map(|s| s.x.iter().copied()));
        let (y0, y1) = extent(self.series.iter().flat_map(|s| s.y.iter().copied()));
        let pw = WIDTH - MARGIN_L - MARGIN_R;
        let ph = HEIGHT - MARGIN_T - MARGIN_B;
        let sx = |x: f64| {
            let u = (x - x0) / (x1 - x0);
            MARGIN_L + pw * if self.reverse_x { 1.0 - u } else { u }
        };
        let sy = |y: f64| MARGIN_T + ph * (1.0 - (y - y0) / (y1 - y0));

        let mut o = String::new();
        let _ = writeln!(
            o,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(o, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(o, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, MARGIN_L + pw / 2.0, escape(&self.title));
        let _ = writeln!(
            o,
            r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );

        let xs = nice_step(x1 - x0);
        let mut t = (x0 / xs).ceil() * xs;
        while t <= x1 + 1e-9 * xs {
            let px = sx(t);
            let _ = writeln!(o, r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#, MARGIN_T + ph, MARGIN_T + ph + 5.0);
            let _ = writeln!(o, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, MARGIN_T + ph + 18.0, tick_label(t, xs));
            t += xs;
        }
        let ys = nice_step(y1 - y0);
        let mut t = (y0 / ys).ceil() * ys;
        while t <= y1 + 1e-9 * ys {
            let py = sy(t);
            let _ = writeln!(o, r#"<line x1="{:.2}" y1="{py:.2}" x2="{MARGIN_L}" y2="{py:.2}" stroke="black"/>"#, MARGIN_L - 5.0);
            let _ = writeln!(o, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, MARGIN_L - 8.0, py + 4.0, tick_label(t, ys));
            t += ys;
        }
        let _ = writeln!(o, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, MARGIN_L + pw / 2.0, HEIGHT - 12.0, escape(&self.x_label));
        let _ = writeln!(
            o,
            r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
            MARGIN_T + ph / 2.0,
            escape(&self.y_label)
        );

        for (k, s) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let pts: Vec<(f64, f64)> =
                s.x.iter().zip(&s.y).filter(|(x, y)| x.is_finite() && y.is_finite()).map(|(&x, &y)| (sx(x), sy(y))).collect();
            match s.style {
                Style::Points => {
                    for (px, py) in &pts {
                        let _ = writeln!(o, r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="{color}"/>"#);
                    }
                }
                Style::Line | Style::Dashed => {
                    let dash = if s.style == Style::Dashed { r#" stroke-dasharray="6 4""# } else { "" };
                    let mut d = String::new();
                    for (i, (px, py)) in pts.iter().enumerate() {
                        let _ = write!(d, "{}{px:.2},{py:.2}", if i == 0 { "M" } else { " L" });
                    }
                    let _ = writeln!(o, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#);
                }
            }
            let ly = MARGIN_T + 14.0 + 18.0 * k as f64;
            let lx = WIDTH - MARGIN_R + 12.0;
            let _ = writeln!(o, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 18.0);
            let _ = writeln!(o, r#"<text x="{}" y="{}">{}</text>"#, lx + 24.0, ly + 4.0, escape(&s.name));
        }
        o.push_str("</svg>\n");
        o
    }

    pub fn sidecar_csv(&self) -> String {
        let mut o = String::from("series,x,y\n");
        for s in &self.series {
            let name = if s.name.contains([',', '"']) { format!("\"{}\"", s.name.replace('"', "\"\"")) } else { s.name.clone() };
            for (x, y) in s.x.iter().zip(&s.y) {
                let _ = writeln!(o, "{name},{x},{y}");
            }
        }
        o
    }

    /// Writes `<stem>.svg` and `<stem>.plot.csv` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        let svg = dir.join(format!("{stem}.svg"));
        let csv = dir.join(format!("{stem}.plot.csv"));
        fs::write(&svg, self.to_svg())?;
        fs::write(&csv, self.sidecar_csv())?;
        Ok(vec![svg, csv])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Plot {
        let mut p = Plot::new("t", "x", "y");
        p.push(Series::new("a", vec![0.0, 1.0, 2.0], vec![1.0, 0.5, 0.25], Style::Line));
        p.push(Series::new("b, fit", vec![0.0, 2.0], vec![1.0, 0.3], Style::Points));
        p
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let svg = sample().to_svg();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<path").count(), 1);
        assert_eq!(svg.matches("<circle").count(), 2);
    }

    #[test]
    fn sidecar_holds_exact_numbers() {
        let csv = sample().sidecar_csv();
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows[0], "series,x,y");
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[3], "a,2,0.25");
        assert_eq!(rows[4], "\"b, fit\",0,1");
    }

    #[test]
    fn ticks() {
        assert_eq!(nice_step(10.0), 2.0);
        assert_eq!(nice_step(0.9), 0.2);
        assert_eq!(tick_label(-0.0, 0.5), "0.0");
    }
}
