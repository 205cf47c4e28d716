//! Static SVG pictures of superhedging sets (projected to two coordinates)
//! and of bi-criteria frontiers.

use svg::node::element::{Circle, Group, Line, Polygon, Polyline, Text};
use svg::Document;

const W: f64 = 480.0;
const H: f64 = 360.0;
const MARGIN: f64 = 48.0;

struct Frame {
    lo: [f64; 2],
    hi: [f64; 2],
}

impl Frame {
    fn around(pts: &[[f64; 2]]) -> Frame {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in pts {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        for k in 0..2 {
            let span = (hi[k] - lo[k]).max(1e-9 * (1.0 + hi[k].abs()));
            lo[k] -= 0.25 * span;
            hi[k] += 0.25 * span;
        }
        Frame { lo, hi }
    }

    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        let x = MARGIN + (p[0] - self.lo[0]) / (self.hi[0] - self.lo[0]) * (W - 2.0 * MARGIN);
        let y = H - MARGIN - (p[1] - self.lo[1]) / (self.hi[1] - self.lo[1]) * (H - 2.0 * MARGIN);
        (round(x), round(y))
    }

    fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0].clamp(self.lo[0], self.hi[0]), p[1].clamp(self.lo[1], self.hi[1])]
    }
}

fn round(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Monotone-chain convex hull, counter-clockwise.
fn hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], *p) <= 0.0 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], *p) <= 0.0 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn points_attr(frame: &Frame, pts: &[[f64; 2]]) -> String {
    pts.iter().map(|p| frame.map(frame.clamp(*p))).map(|(x, y)| format!("{x},{y}")).collect::<Vec<_>>().join(" ")
}

fn axes(frame: &Frame, xlabel: &str, ylabel: &str, title: &str) -> Group {
    let (x0, y0) = (MARGIN, H - MARGIN);
    let mut g = Group::new().set("stroke", "#333").set("font-family", "sans-serif").set("font-size", 12);
    g = g.add(Line::new().set("x1", x0).set("y1", y0).set("x2", W - MARGIN).set("y2", y0));
    g = g.add(Line::new().set("x1", x0).set("y1", y0).set("x2", x0).set("y2", MARGIN));
    let label = |x: f64, y: f64, s: String, anchor: &str| Text::new(s).set("x", x).set("y", y).set("text-anchor", anchor).set("stroke", "none");
    g = g.add(label(W / 2.0, H - 12.0, xlabel.to_string(), "middle"));
    g = g.add(label(14.0, H / 2.0, ylabel.to_string(), "middle").set("transform", format!("rotate(-90 14 {})", H / 2.0)));
    g = g.add(label(W / 2.0, 20.0, title.to_string(), "middle"));
    g = g.add(label(x0, y0 + 16.0, format!("{:.4}", frame.lo[0]), "start"));
    g = g.add(label(W - MARGIN, y0 + 16.0, format!("{:.4}", frame.hi[0]), "end"));
    g = g.add(label(x0 - 4.0, y0, format!("{:.4}", frame.lo[1]), "end"));
    g = g.add(label(x0 - 4.0, MARGIN + 4.0, format!("{:.4}", frame.hi[1]), "end"));
    g
}

fn document() -> Document {
    Document::new().set("viewBox", (0, 0, W, H)).set("width", W).set("height", H)
}

/// Set with vertices `points` and recession directions `rays`, projected
/// onto coordinates `axes`.
pub fn set_svg(points: &[Vec<f64>], rays: &[Vec<f64>], ax: [usize; 2], title: &str) -> String {
    let proj = |v: &Vec<f64>| [v[ax[0]], v[ax[1]]];
    let verts: Vec<[f64; 2]> = points.iter().map(proj).collect();
    let frame = Frame::around(&verts);
    let reach = (frame.hi[0] - frame.lo[0]).max(frame.hi[1] - frame.lo[1]) * 4.0;
    let mut cloud = verts.clone();
    for r in rays.iter().map(proj) {
        let n = r[0].abs().max(r[1].abs());
        if n == 0.0 {
            continue;
        }
        for v in &verts {
            cloud.push([v[0] + reach * r[0] / n, v[1] + reach * r[1] / n]);
        }
    }
    let outline = hull(cloud);
    let mut doc = document().add(axes(&frame, &format!("x{}", ax[0]), &format!("x{}", ax[1]), title));
    doc = doc.add(Polygon::new().set("points", points_attr(&frame, &outline)).set("fill", "#9ecae1").set("fill-opacity", 0.6).set("stroke", "#3182bd"));
    for v in &verts {
        let (x, y) = frame.map(*v);
        doc = doc.add(Circle::new().set("cx", x).set("cy", y).set("r", 3).set("fill", "#08519c"));
    }
    doc.to_string()
}

/// Frontier points as (withdrawal, trading cost) with the dominated region
/// shaded.
pub fn frontier_svg(points: &[(f64, f64)], title: &str) -> String {
    let mut pts: Vec<[f64; 2]> = points.iter().map(|(a, c)| [*a, *c]).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let frame = Frame::around(&pts);
    let mut region = vec![[frame.lo[0], frame.hi[1]]];
    region.push([frame.lo[0], pts[0][1]]);
    region.extend(pts.iter().copied());
    region.push([pts[pts.len() - 1][0], frame.hi[1]]);
    let mut doc = document().add(axes(&frame, "withdrawal", "trading cost", title));
    doc = doc.add(Polygon::new().set("points", points_attr(&frame, &region)).set("fill", "#fdd0a2").set("fill-opacity", 0.6).set("stroke", "none"));
    doc = doc.add(Polyline::new().set("points", points_attr(&frame, &pts)).set("fill", "none").set("stroke", "#d94801"));
    for p in &pts {
        let (x, y) = frame.map(*p);
        doc = doc.add(Circle::new().set("cx", x).set("cy", y).set("r", 3).set("fill", "#8c2d04"));
    }
    doc.to_string()
}
