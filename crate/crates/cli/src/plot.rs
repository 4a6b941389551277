//! Static SVG figures. Nothing downstream reads them back; assertions use the CSV and JSON.

use std::fmt::Write;

const W: f64 = 480.0;
const H: f64 = 400.0;
const PAD_L: f64 = 64.0;
const PAD_R: f64 = 24.0;
const PAD_T: f64 = 36.0;
const PAD_B: f64 = 52.0;

pub struct Svg {
    body: String,
    width: f64,
    height: f64,
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        let mut s = Self { body: String::new(), width, height };
        s.rect(0.0, 0.0, width, height, "#ffffff", None);
        s
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, class: Option<&str>) {
        let class = class.map(|c| format!(" class=\"{c}\"")).unwrap_or_default();
        let _ = writeln!(self.body, r#"<rect{class} x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"/>"#);
    }

    pub fn line(&mut self, a: (f64, f64), b: (f64, f64), stroke: &str, width: f64, class: Option<&str>) {
        let class = class.map(|c| format!(" class=\"{c}\"")).unwrap_or_default();
        let _ = writeln!(
            self.body,
            r#"<line{class} x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{stroke}" stroke-width="{width}"/>"#,
            a.0, a.1, b.0, b.1
        );
    }

    pub fn circle(&mut self, c: (f64, f64), r: f64, fill: &str, class: Option<&str>) {
        let class = class.map(|c| format!(" class=\"{c}\"")).unwrap_or_default();
        let _ = writeln!(self.body, r#"<circle{class} cx="{:.2}" cy="{:.2}" r="{r}" fill="{fill}"/>"#, c.0, c.1);
    }

    pub fn text(&mut self, at: (f64, f64), s: &str, size: f64, anchor: &str) {
        let s = s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
        let _ = writeln!(
            self.body,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="{size}" text-anchor="{anchor}">{s}</text>"#,
            at.0, at.1
        );
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

/// Maps a data rectangle onto a pixel rectangle (y up).
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub x0: f64,
    pub y0: f64,
    pub w: f64,
    pub h: f64,
    pub xr: (f64, f64),
    pub yr: (f64, f64),
}

impl Frame {
    pub fn px(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.x0 + (x - self.xr.0) / (self.xr.1 - self.xr.0) * self.w,
            self.y0 + self.h - (y - self.yr.0) / (self.yr.1 - self.yr.0) * self.h,
        )
    }

    fn axes(&self, svg: &mut Svg, xlabel: &str, ylabel: &str) {
        let (l, t, r, b) = (self.x0, self.y0, self.x0 + self.w, self.y0 + self.h);
        for (a, c) in [((l, t), (r, t)), ((r, t), (r, b)), ((r, b), (l, b)), ((l, b), (l, t))] {
            svg.line(a, c, "#333333", 1.0, None);
        }
        svg.text((l, b + 16.0), &tick(self.xr.0), 11.0, "middle");
        svg.text((r, b + 16.0), &tick(self.xr.1), 11.0, "middle");
        svg.text((l - 6.0, b), &tick(self.yr.0), 11.0, "end");
        svg.text((l - 6.0, t + 10.0), &tick(self.yr.1), 11.0, "end");
        svg.text(((l + r) / 2.0, b + 34.0), xlabel, 13.0, "middle");
        svg.text((l - 10.0, (t + b) / 2.0), ylabel, 13.0, "end");
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        let d = lo.abs().max(1.0) * 0.5;
        (lo - d, hi + d)
    }
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo.is_finite() {
        padded(lo, hi)
    } else {
        (0.0, 1.0)
    }
}

fn main_frame(xr: (f64, f64), yr: (f64, f64)) -> Frame {
    Frame { x0: PAD_L, y0: PAD_T, w: W - PAD_L - PAD_R, h: H - PAD_T - PAD_B, xr, yr }
}

/// Viridis-like ramp over [0, 1].
pub fn color(t: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] =
        [(68.0, 1.0, 84.0), (59.0, 82.0, 139.0), (33.0, 145.0, 140.0), (94.0, 201.0, 98.0), (253.0, 231.0, 37.0)];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 } * (STOPS.len() - 1) as f64;
    let i = (t.floor() as usize).min(STOPS.len() - 2);
    let f = t - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let mix = |u: f64, v: f64| (u + f * (v - u)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Marching-squares segments of `{z = level}` over a grid with `z[i * ys.len() + j]` at `(xs[i], ys[j])`.
pub fn contour_segments(xs: &[f64], ys: &[f64], z: &[f64], level: f64) -> Vec<((f64, f64), (f64, f64))> {
    let ny = ys.len();
    let mut out = Vec::new();
    if xs.len() < 2 || ny < 2 {
        return out;
    }
    let at = |i: usize, j: usize| z[i * ny + j];
    let cross = |p: (f64, f64), q: (f64, f64), zp: f64, zq: f64| {
        let t = if zq != zp { (level - zp) / (zq - zp) } else { 0.5 };
        (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1))
    };
    for i in 0..xs.len() - 1 {
        for j in 0..ny - 1 {
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let v: Vec<f64> = corners.iter().map(|&(a, b)| at(a, b)).collect();
            if v.iter().any(|x| !x.is_finite()) {
                continue;
            }
            let pts: Vec<(f64, f64)> = corners.iter().map(|&(a, b)| (xs[a], ys[b])).collect();
            let mut hits = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (e, (e + 1) % 4);
                if (v[a] < level) != (v[b] < level) {
                    hits.push(cross(pts[a], pts[b], v[a], v[b]));
                }
            }
            match hits.len() {
                2 => out.push((hits[0], hits[1])),
                4 => {
                    out.push((hits[0], hits[1]));
                    out.push((hits[2], hits[3]));
                }
                _ => {}
            }
        }
    }
    out
}

/// Pairwise scatter of one wave's points, survivors drawn darker.
pub fn scatter_matrix(labels: &[String], points: &[Vec<f64>], survivors: &[bool], title: &str) -> String {
    let d = labels.len();
    let cell = 150.0;
    let (off_x, off_y) = (48.0, 40.0);
    let mut svg = Svg::new(off_x + cell * d as f64 + 16.0, off_y + cell * d as f64 + 16.0);
    svg.text((8.0, 22.0), title, 14.0, "start");
    let ranges: Vec<(f64, f64)> = (0..d).map(|c| range(points.iter().map(|p| p[c]))).collect();
    for row in 0..d {
        for col in 0..d {
            let f = Frame {
                x0: off_x + col as f64 * cell + 6.0,
                y0: off_y + row as f64 * cell + 6.0,
                w: cell - 12.0,
                h: cell - 12.0,
                xr: ranges[col],
                yr: ranges[row],
            };
            svg.rect(f.x0, f.y0, f.w, f.h, "#f7f7f7", None);
            if row == col {
                svg.text((f.x0 + f.w / 2.0, f.y0 + f.h / 2.0), &labels[row], 13.0, "middle");
                continue;
            }
            for (p, &s) in points.iter().zip(survivors) {
                let fill = if s { "#c0392b" } else { "#7f8c8d" };
                svg.circle(f.px(p[col], p[row]), if s { 2.2 } else { 1.4 }, fill, Some("point"));
            }
        }
    }
    svg.finish()
}

pub struct Overlay<'a> {
    pub points: &'a [(f64, f64)],
}

/// Heat map of `z` (row-major over `xs` then `ys`) with the `level` contour and optional overlay points.
pub fn heatmap(
    xs: &[f64],
    ys: &[f64],
    z: &[f64],
    level: f64,
    overlay: Option<Overlay<'_>>,
    title: &str,
    xlabel: &str,
    ylabel: &str,
) -> String {
    let step = |v: &[f64]| if v.len() > 1 { (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64 } else { 1.0 };
    let (dx, dy) = (step(xs), step(ys));
    let xr = (xs[0] - dx / 2.0, xs[xs.len() - 1] + dx / 2.0);
    let yr = (ys[0] - dy / 2.0, ys[ys.len() - 1] + dy / 2.0);
    let f = main_frame(xr, yr);
    let mut svg = Svg::new(W, H);
    svg.text((PAD_L, 22.0), title, 14.0, "start");
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            let (a, b) = (f.px(x - dx / 2.0, y + dy / 2.0), f.px(x + dx / 2.0, y - dy / 2.0));
            svg.rect(a.0, a.1, b.0 - a.0 + 0.3, b.1 - a.1 + 0.3, &color(z[i * ys.len() + j]), Some("cell"));
        }
    }
    for (a, b) in contour_segments(xs, ys, z, level) {
        svg.line(f.px(a.0, a.1), f.px(b.0, b.1), "#ffffff", 1.6, Some("contour"));
    }
    if let Some(o) = overlay {
        for &(x, y) in o.points {
            svg.circle(f.px(x, y), 2.0, "#e74c3c", Some("overlay"));
        }
    }
    f.axes(&mut svg, xlabel, ylabel);
    svg.finish()
}

/// Histogram of predictive draws with plausible values in blue and implausible ones in red.
pub fn histogram(samples: &[f64], plausible: &[f64], implausible: &[f64], title: &str, xlabel: &str) -> String {
    let bins = 60;
    let xr = range(samples.iter().chain(plausible).chain(implausible).copied());
    let width = (xr.1 - xr.0) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &s in samples.iter().filter(|s| s.is_finite()) {
        let b = (((s - xr.0) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = samples.len().max(1) as f64;
    let dens: Vec<f64> = counts.iter().map(|&c| c as f64 / (n * width)).collect();
    let top = dens.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE) * 1.05;
    let f = main_frame(xr, (0.0, top));
    let mut svg = Svg::new(W, H);
    svg.text((PAD_L, 22.0), title, 14.0, "start");
    for (b, &v) in dens.iter().enumerate() {
        let lo = xr.0 + b as f64 * width;
        let (a, c) = (f.px(lo, v), f.px(lo + width, 0.0));
        svg.rect(a.0, a.1, c.0 - a.0, c.1 - a.1, "#bdc3c7", Some("bar"));
    }
    for (vals, stroke, class) in [(plausible, "#2e86de", "plausible"), (implausible, "#e74c3c", "implausible")] {
        for &v in vals {
            svg.line(f.px(v, 0.0), f.px(v, top), stroke, 2.0, Some(class));
        }
    }
    f.axes(&mut svg, xlabel, "density");
    svg.finish()
}

/// Contours of a bivariate density on a grid with one point marked.
pub fn density_contours(
    xs: &[f64],
    ys: &[f64],
    z: &[f64],
    point: (f64, f64),
    title: &str,
    xlabel: &str,
    ylabel: &str,
) -> String {
    let xr = (xs[0], xs[xs.len() - 1]);
    let yr = (ys[0], ys[ys.len() - 1]);
    let f = main_frame(xr, yr);
    let mut svg = Svg::new(W, H);
    svg.text((PAD_L, 22.0), title, 14.0, "start");
    let top = z.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    for k in 1..=8 {
        let level = top * k as f64 / 9.0;
        for (a, b) in contour_segments(xs, ys, z, level) {
            svg.line(f.px(a.0, a.1), f.px(b.0, b.1), &color(k as f64 / 9.0), 1.4, Some("contour"));
        }
    }
    let (px, py) = f.px(point.0.clamp(xr.0, xr.1), point.1.clamp(yr.0, yr.1));
    svg.line((px - 6.0, py - 6.0), (px + 6.0, py + 6.0), "#e74c3c", 2.0, Some("marker"));
    svg.line((px - 6.0, py + 6.0), (px + 6.0, py - 6.0), "#e74c3c", 2.0, Some("marker"));
    f.axes(&mut svg, xlabel, ylabel);
    svg.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contour_of_a_plane_is_a_straight_line() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [0.0, 1.0, 2.0];
        let z: Vec<f64> = (0..9).map(|t| (t / 3) as f64).collect();
        let segs = contour_segments(&xs, &ys, &z, 0.5);
        assert_eq!(segs.len(), 2);
        for (a, b) in segs {
            assert!((a.0 - 0.5).abs() < 1e-12 && (b.0 - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn ramp_endpoints() {
        assert_eq!(color(0.0), "#440154");
        assert_eq!(color(1.0), "#fde725");
        assert_eq!(color(f64::NAN), "#440154");
    }

    #[test]
    fn heatmap_draws_every_cell_and_overlay() {
        let xs = [0.0, 1.0];
        let ys = [0.0, 1.0, 2.0];
        let z = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
        let pts = [(0.5, 1.0)];
        let s = heatmap(&xs, &ys, &z, 0.05, Some(Overlay { points: &pts }), "t", "x", "y");
        assert_eq!(s.matches("class=\"cell\"").count(), 6);
        assert_eq!(s.matches("class=\"overlay\"").count(), 1);
        assert!(s.contains("class=\"contour\""));
    }
}
