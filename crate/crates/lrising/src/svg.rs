//! Minimal deterministic SVG plotting: line and scatter panels, heatmaps
//! and colorbars. No timestamps or random ids are ever emitted.

use std::fmt::Write as _;

/// Colormap on `[0, 1]` from a handful of sRGB stops.
#[derive(Debug, Clone, Copy)]
pub enum Colormap {
    /// dark blue to yellow
    Sequential,
    /// blue, white, red; `0.5` is white
    Diverging,
    /// white to red
    Reds,
}

const SEQUENTIAL: [[f64; 3]; 5] =
    [[68.0, 1.0, 84.0], [59.0, 82.0, 139.0], [33.0, 145.0, 140.0], [94.0, 201.0, 98.0], [253.0, 231.0, 37.0]];
const DIVERGING: [[f64; 3]; 3] = [[33.0, 102.0, 172.0], [247.0, 247.0, 247.0], [178.0, 24.0, 43.0]];
const REDS: [[f64; 3]; 3] = [[255.0, 245.0, 240.0], [251.0, 106.0, 74.0], [103.0, 0.0, 13.0]];

impl Colormap {
    pub fn color(self, t: f64) -> String {
        let stops: &[[f64; 3]] = match self {
            Colormap::Sequential => &SEQUENTIAL,
            Colormap::Diverging => &DIVERGING,
            Colormap::Reds => &REDS,
        };
        let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
        let x = t * (stops.len() - 1) as f64;
        let k = (x.floor() as usize).min(stops.len() - 2);
        let f = x - k as f64;
        let c: Vec<u8> = (0..3).map(|i| (stops[k][i] + f * (stops[k + 1][i] - stops[k][i])).round() as u8).collect();
        format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
    }
}

pub const ABSENT: &str = "#bdbdbd";

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Coordinates rounded to two decimals keep files small and stable.
fn c(x: f64) -> String {
    let r = (x * 100.0).round() / 100.0;
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

/// Roughly five round tick values covering `[lo, hi]`.
pub fn ticks(a: f64, b: f64) -> Vec<f64> {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    if !(hi > lo) {
        return vec![lo];
    }
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{:.4}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// Cell boundaries around sorted centers: midpoints inside, half a gap
/// beyond the ends, and a unit cell around a single center.
pub fn edges(centers: &[f64]) -> Vec<f64> {
    match centers.len() {
        0 => Vec::new(),
        1 => vec![centers[0] - 0.5, centers[0] + 0.5],
        n => {
            let mut e = Vec::with_capacity(n + 1);
            e.push(centers[0] - (centers[1] - centers[0]) / 2.0);
            e.extend(centers.windows(2).map(|w| (w[0] + w[1]) / 2.0));
            e.push(centers[n - 1] + (centers[n - 1] - centers[n - 2]) / 2.0);
            e
        }
    }
}

/// Data range padded by 5%, or a unit window around a constant.
pub fn padded_range(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .into_iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

pub struct Figure {
    width: f64,
    height: f64,
    body: String,
}

/// A plotting area with data ranges mapped onto a pixel rectangle.
#[derive(Debug, Clone, Copy)]
pub struct Panel {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Panel {
    pub fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x.0) / (self.x.1 - self.x.0) * self.width
    }

    pub fn py(&self, y: f64) -> f64 {
        self.top + self.height - (y - self.y.0) / (self.y.1 - self.y.0) * self.height
    }
}

impl Figure {
    pub fn new(width: f64, height: f64) -> Self {
        let mut body = String::new();
        let _ = writeln!(body, r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#, c(width), c(height));
        Figure { width, height, body }
    }

    pub fn title(&mut self, text: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{}" y="20" font-size="14" text-anchor="middle">{}</text>"#,
            c(self.width / 2.0),
            esc(text)
        );
    }

    pub fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, text: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{}" y="{}" font-size="{}" text-anchor="{anchor}">{}</text>"#,
            c(x),
            c(y),
            c(size),
            esc(text)
        );
    }

    /// Frame, ticks and axis labels for `p`.
    pub fn axes(&mut self, p: &Panel, xlabel: &str, ylabel: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            c(p.left),
            c(p.top),
            c(p.width),
            c(p.height)
        );
        let bottom = p.top + p.height;
        for t in ticks(p.x.0, p.x.1) {
            let x = p.px(t);
            let _ = writeln!(self.body, r#"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/>"#, c(x), c(bottom), c(bottom + 4.0));
            self.text(x, bottom + 16.0, 10.0, "middle", &tick_label(t));
        }
        for t in ticks(p.y.0, p.y.1) {
            let y = p.py(t);
            let _ = writeln!(self.body, r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="black"/>"#, c(p.left - 4.0), c(y), c(p.left));
            self.text(p.left - 6.0, y + 3.5, 10.0, "end", &tick_label(t));
        }
        self.text(p.left + p.width / 2.0, bottom + 32.0, 12.0, "middle", xlabel);
        let (lx, ly) = (p.left - 42.0, p.top + p.height / 2.0);
        let _ = writeln!(
            self.body,
            r#"<text x="{0}" y="{1}" font-size="12" text-anchor="middle" transform="rotate(-90 {0} {1})">{2}</text>"#,
            c(lx),
            c(ly),
            esc(ylabel)
        );
    }

    pub fn polyline(&mut self, p: &Panel, xs: &[f64], ys: &[f64], color: &str, dashed: bool) {
        let pts: Vec<String> = xs
            .iter()
            .zip(ys)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| format!("{},{}", c(p.px(x)), c(p.py(y))))
            .collect();
        if pts.is_empty() {
            return;
        }
        let dash = if dashed { r#" stroke-dasharray="5,3""# } else { "" };
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
            pts.join(" ")
        );
    }

    /// `marker` is `circle`, `cross` or `star`.
    pub fn points(&mut self, p: &Panel, xs: &[f64], ys: &[f64], color: &str, marker: &str) {
        for (&x, &y) in xs.iter().zip(ys) {
            if !(x.is_finite() && y.is_finite()) {
                continue;
            }
            let (cx, cy) = (p.px(x), p.py(y));
            let _ = match marker {
                "cross" => writeln!(
                    self.body,
                    r#"<path d="M{} {}L{} {}M{} {}L{} {}" stroke="{color}" stroke-width="1.5"/>"#,
                    c(cx - 4.0),
                    c(cy - 4.0),
                    c(cx + 4.0),
                    c(cy + 4.0),
                    c(cx - 4.0),
                    c(cy + 4.0),
                    c(cx + 4.0),
                    c(cy - 4.0)
                ),
                "star" => {
                    let d: Vec<String> = (0..10)
                        .map(|k| {
                            let r = if k % 2 == 0 { 5.5 } else { 2.4 };
                            let a = std::f64::consts::PI * (k as f64 / 5.0 - 0.5);
                            format!("{}{} {}", if k == 0 { "M" } else { "L" }, c(cx + r * a.cos()), c(cy + r * a.sin()))
                        })
                        .collect();
                    writeln!(self.body, r#"<path d="{}Z" fill="{color}"/>"#, d.concat())
                }
                _ => writeln!(self.body, r#"<circle cx="{}" cy="{}" r="3" fill="{color}"/>"#, c(cx), c(cy)),
            };
        }
    }

    /// Cells between consecutive `xedges` and `yedges` in data units, row-major
    /// by y. `None` is drawn gray.
    pub fn heatmap(&mut self, p: &Panel, xedges: &[f64], yedges: &[f64], colors: &[Option<String>]) {
        let cols = xedges.len() - 1;
        for r in 0..yedges.len() - 1 {
            for k in 0..cols {
                let fill = colors[r * cols + k].as_deref().unwrap_or(ABSENT);
                let (x0, x1) = (p.px(xedges[k]), p.px(xedges[k + 1]));
                let (y0, y1) = (p.py(yedges[r + 1]), p.py(yedges[r]));
                let _ = writeln!(
                    self.body,
                    r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{fill}"/>"#,
                    c(x0.min(x1)),
                    c(y0.min(y1)),
                    c((x1 - x0).abs() + 0.01),
                    c((y1 - y0).abs() + 0.01)
                );
            }
        }
    }

    /// Vertical colorbar spanning `range`.
    pub fn colorbar(&mut self, left: f64, top: f64, height: f64, map: Colormap, range: (f64, f64), label: &str) {
        let n = 32;
        for k in 0..n {
            let t = k as f64 / (n - 1) as f64;
            let _ = writeln!(
                self.body,
                r#"<rect x="{}" y="{}" width="12" height="{}" fill="{}"/>"#,
                c(left),
                c(top + height * (1.0 - (k + 1) as f64 / n as f64)),
                c(height / n as f64 + 0.01),
                map.color(t)
            );
        }
        let span = range.1 - range.0;
        for t in ticks(range.0, range.1) {
            let y = top + height * (1.0 - if span > 0.0 { (t - range.0) / span } else { 0.5 });
            self.text(left + 16.0, y + 3.5, 9.0, "start", &tick_label(t));
        }
        self.text(left + 6.0, top - 6.0, 10.0, "middle", label);
    }

    pub fn finish(self) -> Vec<u8> {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n{}</svg>\n",
            self.body,
            w = c(self.width),
            h = c(self.height)
        )
        .into_bytes()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round_and_inside() {
        let t = ticks(0.0, 12.0);
        assert_eq!(t, vec![0.0, 2.5, 5.0, 7.5, 10.0]);
        assert!(ticks(-0.73, -0.01).iter().all(|v| *v >= -0.73 && *v <= -0.01));
        assert_eq!(ticks(1.0, 1.0), vec![1.0]);
        assert_eq!(ticks(6.5, -0.5), ticks(-0.5, 6.5));
    }

    #[test]
    fn cell_edges() {
        assert_eq!(edges(&[1.0]), vec![0.5, 1.5]);
        assert_eq!(edges(&[0.0, 1.0, 3.0]), vec![-0.5, 0.5, 2.0, 4.0]);
    }

    #[test]
    fn colormap_endpoints() {
        assert_eq!(Colormap::Diverging.color(0.5), "#f7f7f7");
        assert_eq!(Colormap::Sequential.color(0.0), "#440154");
        assert_eq!(Colormap::Sequential.color(f64::NAN), "#440154");
    }

    #[test]
    fn text_is_escaped() {
        let mut f = Figure::new(100.0, 100.0);
        f.title("a<b & c");
        let s = String::from_utf8(f.finish()).unwrap();
        assert!(s.contains("a&lt;b &amp; c"));
    }
}
