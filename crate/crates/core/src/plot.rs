//! Minimal static SVG renderings: line charts with optional bands, and
//! heatmaps of planar grid fields with point markers.

use std::fmt::Write as _;
use std::path::Path;

use crate::domain::SpatialGrid;
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: (f64, f64, f64, f64) = (60.0, 20.0, 30.0, 50.0); // left, right, top, bottom
const PALETTE: [&str; 6] = [
    "#1b6ca8", "#c0392b", "#27ae60", "#8e44ad", "#d35400", "#2c3e50",
];

#[derive(Debug, Clone, Default)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Lower and upper band, drawn shaded behind the line.
    pub band: Option<(Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone, Default)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Draw markers only (scatter).
    pub points: bool,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// About five round tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
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

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN.0 + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - MARGIN.0 - MARGIN.1)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN.3 - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - MARGIN.2 - MARGIN.3)
    }

    fn axes(&self, out: &mut String, x_label: &str, y_label: &str) {
        let (x0, x1) = (MARGIN.0, WIDTH - MARGIN.1);
        let (y0, y1) = (HEIGHT - MARGIN.3, MARGIN.2);
        let _ = writeln!(
            out,
            r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black"/>"#
        );
        for t in ticks(self.x.0, self.x.1) {
            let p = self.px(t);
            let _ = writeln!(
                out,
                r#"<line x1="{p:.2}" y1="{y0}" x2="{p:.2}" y2="{}" stroke="black"/><text x="{p:.2}" y="{}" text-anchor="middle">{}</text>"#,
                y0 + 4.0,
                y0 + 17.0,
                fmt_tick(t)
            );
        }
        for t in ticks(self.y.0, self.y.1) {
            let p = self.py(t);
            let _ = writeln!(
                out,
                r#"<line x1="{}" y1="{p:.2}" x2="{x0}" y2="{p:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
                x0 - 4.0,
                x0 - 6.0,
                p + 4.0,
                fmt_tick(t)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 12.0,
            escape(x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(y_label)
        );
    }
}

fn fmt_tick(t: f64) -> String {
    let s = format!("{t:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

impl LineChart {
    pub fn render(&self) -> String {
        let all_x = self.series.iter().flat_map(|s| s.x.iter().copied());
        let all_y = self.series.iter().flat_map(|s| {
            let band = s
                .band
                .iter()
                .flat_map(|(l, u)| l.iter().chain(u.iter()).copied());
            s.y.iter().copied().chain(band)
        });
        let frame = Frame {
            x: range(all_x),
            y: range(all_y),
        };
        let mut out = String::new();
        header(&mut out, &self.title);
        for (k, s) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            if let Some((lo, hi)) = &s.band {
                let mut d = String::new();
                for (i, (x, y)) in s.x.iter().zip(hi).enumerate() {
                    let _ = write!(
                        d,
                        "{}{:.2},{:.2} ",
                        if i == 0 { 'M' } else { 'L' },
                        frame.px(*x),
                        frame.py(*y)
                    );
                }
                for (x, y) in s.x.iter().zip(lo).rev() {
                    let _ = write!(d, "L{:.2},{:.2} ", frame.px(*x), frame.py(*y));
                }
                let _ = writeln!(
                    out,
                    r#"<path d="{}Z" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                    d
                );
            }
            if self.points {
                for (x, y) in
                    s.x.iter()
                        .zip(&s.y)
                        .filter(|(x, y)| x.is_finite() && y.is_finite())
                {
                    let _ = writeln!(
                        out,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                        frame.px(*x),
                        frame.py(*y)
                    );
                }
            } else {
                let mut d = String::new();
                let mut pen_up = true;
                for (x, y) in s.x.iter().zip(&s.y) {
                    if !(x.is_finite() && y.is_finite()) {
                        pen_up = true;
                        continue;
                    }
                    let _ = write!(
                        d,
                        "{}{:.2},{:.2} ",
                        if pen_up { 'M' } else { 'L' },
                        frame.px(*x),
                        frame.py(*y)
                    );
                    pen_up = false;
                }
                let _ = writeln!(
                    out,
                    r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                    d.trim_end()
                );
            }
            let ly = MARGIN.2 + 14.0 + 16.0 * k as f64;
            let lx = WIDTH - MARGIN.1 - 150.0;
            let _ = writeln!(
                out,
                r#"<rect x="{lx}" y="{}" width="12" height="4" fill="{color}"/><text x="{}" y="{ly}">{}</text>"#,
                ly - 6.0,
                lx + 18.0,
                escape(&s.label)
            );
        }
        frame.axes(&mut out, &self.x_label, &self.y_label);
        out.push_str("</svg>\n");
        out
    }
}

#[derive(Debug, Clone)]
pub struct Heatmap<'a> {
    pub title: String,
    pub grid: &'a SpatialGrid,
    /// One value per grid cell; non-finite values are left blank.
    pub values: &'a [f64],
    /// Marker groups: label, cell indices.
    pub markers: Vec<(String, Vec<usize>)>,
}

/// Light yellow to dark blue.
fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        lerp(255.0, 8.0),
        lerp(247.0, 48.0),
        lerp(188.0, 107.0)
    )
}

impl Heatmap<'_> {
    pub fn render(&self) -> Result<String> {
        if self.grid.dim() != 2 {
            return Err(Error::InvalidGrid("heatmaps need a planar grid".into()));
        }
        if self.values.len() != self.grid.len() {
            return Err(Error::InvalidParameter(
                "one value per cell expected".into(),
            ));
        }
        let h = self.grid.spacing();
        let xs = (0..self.grid.len()).map(|i| self.grid.coords(i)[0]);
        let ys = (0..self.grid.len()).map(|i| self.grid.coords(i)[1]);
        let (x0, x1) = range(xs);
        let (y0, y1) = range(ys);
        let frame = Frame {
            x: (x0 - h / 2.0, x1 + h / 2.0),
            y: (y0 - h / 2.0, y1 + h / 2.0),
        };
        let (vlo, vhi) = range(self.values.iter().copied());
        let mut out = String::new();
        header(&mut out, &self.title);
        let cw = frame.px(x0 + h) - frame.px(x0);
        let ch = frame.py(y0) - frame.py(y0 + h);
        for (i, v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                continue;
            }
            let c = self.grid.coords(i);
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                frame.px(c[0] - h / 2.0),
                frame.py(c[1] + h / 2.0),
                cw + 0.3,
                ch + 0.3,
                ramp((v - vlo) / (vhi - vlo))
            );
        }
        for (k, (label, cells)) in self.markers.iter().enumerate() {
            let color = PALETTE[(k + 1) % PALETTE.len()];
            for (order, &i) in cells.iter().enumerate() {
                let c = self.grid.coords(i);
                let (px, py) = (frame.px(c[0]), frame.py(c[1]));
                let _ = writeln!(
                    out,
                    r#"<circle cx="{px:.2}" cy="{py:.2}" r="4" fill="none" stroke="{color}" stroke-width="2"><title>{} {}</title></circle>"#,
                    escape(label),
                    order + 1
                );
            }
            let ly = MARGIN.2 + 14.0 + 16.0 * k as f64;
            let lx = WIDTH - MARGIN.1 - 120.0;
            let _ = writeln!(
                out,
                r#"<circle cx="{lx}" cy="{}" r="4" fill="none" stroke="{color}" stroke-width="2"/><text x="{}" y="{ly}">{}</text>"#,
                ly - 4.0,
                lx + 10.0,
                escape(label)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">range {} to {}</text>"#,
            WIDTH - MARGIN.1,
            HEIGHT - 28.0,
            fmt_tick(vlo),
            fmt_tick(vhi)
        );
        frame.axes(&mut out, "x", "y");
        out.push_str("</svg>\n");
        Ok(out)
    }
}

pub fn write_svg(path: &Path, svg: &str) -> Result<()> {
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tick_values() {
        let t = ticks(0.0, 1.0);
        assert_eq!(t.len(), 6);
        assert!(t
            .iter()
            .zip([0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
            .all(|(a, b)| (a - b).abs() < 1e-12));
        assert_eq!(ticks(-5.5, 5.5), vec![-5.0, 0.0, 5.0]);
        assert_eq!(fmt_tick(-0.0), "0");
        assert_eq!(fmt_tick(2.50), "2.5");
    }

    #[test]
    fn line_chart_is_well_formed() {
        let chart = LineChart {
            title: "a < b".into(),
            x_label: "h".into(),
            y_label: "p".into(),
            series: vec![Series {
                label: "one".into(),
                x: vec![0.0, 1.0, 2.0],
                y: vec![1.0, f64::NAN, 0.5],
                band: Some((vec![0.9, 0.5, 0.4], vec![1.0, 0.7, 0.6])),
            }],
            points: false,
        };
        let svg = chart.render();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg.matches("<path").count(), 3);
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn heatmap_cells_and_markers() {
        let g = SpatialGrid::regular_2d((0.0, 0.0), 3, 2, 1.0).unwrap();
        let v = [0.0, 1.0, 2.0, 3.0, f64::NAN, 5.0];
        let svg = Heatmap {
            title: "t".into(),
            grid: &g,
            values: &v,
            markers: vec![("sites".into(), vec![0, 5])],
        }
        .render()
        .unwrap();
        assert_eq!(svg.matches("<rect").count(), 1 + 5);
        assert_eq!(svg.matches("<circle").count(), 3);
        let line = SpatialGrid::regular_1d(0.0, 1.0, 0.5).unwrap();
        assert!(Heatmap {
            title: "t".into(),
            grid: &line,
            values: &[0.0; 3],
            markers: vec![]
        }
        .render()
        .is_err());
    }
}
