//! Static SVG rendering of the Kano plane.
//!
//! Every affordance is drawn as the segment from `(-1, alpha)` to
//! `(1, beta)`, colored by category. The shaded horizontal band is
//! `|M| < m` at the vertical axis; the wedge between the dashed lines holds
//! slopes in `[0, k]`.

use std::fmt::Write;

use crate::kano::{KanoCategory, KanoPoint, KanoThresholds};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;

pub fn color(c: KanoCategory) -> &'static str {
    match c {
        KanoCategory::MustBe => "#1f77b4",
        KanoCategory::Performance => "#2ca02c",
        KanoCategory::Attractive => "#ff7f0e",
        KanoCategory::Indifferent => "#7f7f7f",
        KanoCategory::Reverse => "#d62728",
        KanoCategory::Questionable => "#9467bd",
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Panel {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    ymax: f64,
}

impl Panel {
    fn px(&self, v: f64) -> f64 {
        self.x + (v + 1.0) / 2.0 * self.w
    }

    fn py(&self, v: f64) -> f64 {
        self.y + (self.ymax - v) / (2.0 * self.ymax) * self.h
    }
}

fn y_extent(points: &[KanoPoint], t: KanoThresholds) -> f64 {
    let m = points
        .iter()
        .flat_map(|p| [p.alpha.abs(), p.beta.abs()])
        .filter(|v| v.is_finite())
        .fold(t.m.max(t.k), f64::max);
    (m * 1.15 * 10.0).ceil() / 10.0
}

fn panel(out: &mut String, p: &Panel, title: &str, points: &[KanoPoint], t: KanoThresholds) {
    let (x0, x1) = (p.px(-1.0), p.px(1.0));
    let (yt, yb) = (p.py(p.ymax), p.py(-p.ymax));
    let xm = p.px(0.0);
    let ym = p.py(0.0);
    writeln!(out, r##"<g class="panel">"##).unwrap();
    writeln!(out, r##"<rect x="{x0:.1}" y="{yt:.1}" width="{:.1}" height="{:.1}" fill="#ffffff" stroke="#444444"/>"##, x1 - x0, yb - yt).unwrap();
    // intercept band
    writeln!(
        out,
        r##"<rect x="{x0:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="#eeeeee"/>"##,
        p.py(t.m),
        x1 - x0,
        p.py(-t.m) - p.py(t.m)
    )
    .unwrap();
    // slope wedge [0, k]
    writeln!(
        out,
        r##"<polygon points="{x0:.1},{ym:.1} {x1:.1},{ym:.1} {x1:.1},{:.1} {x0:.1},{:.1}" fill="#dddddd" fill-opacity="0.5"/>"##,
        p.py(t.k),
        p.py(-t.k)
    )
    .unwrap();
    writeln!(out, r##"<line x1="{x0:.1}" y1="{:.1}" x2="{x1:.1}" y2="{:.1}" stroke="#888888" stroke-dasharray="4 3"/>"##, p.py(-t.k), p.py(t.k)).unwrap();
    writeln!(out, r##"<line x1="{x0:.1}" y1="{ym:.1}" x2="{x1:.1}" y2="{ym:.1}" stroke="#888888" stroke-dasharray="4 3"/>"##).unwrap();
    writeln!(out, r##"<line x1="{xm:.1}" y1="{yt:.1}" x2="{xm:.1}" y2="{yb:.1}" stroke="#444444"/>"##).unwrap();
    for p2 in points {
        if !(p2.alpha.is_finite() && p2.beta.is_finite()) {
            continue;
        }
        writeln!(
            out,
            r##"<line x1="{x0:.1}" y1="{:.1}" x2="{x1:.1}" y2="{:.1}" stroke="{}" stroke-width="1.5"><title>{} ({}) K={:.3} M={:.3}</title></line>"##,
            p.py(p2.alpha),
            p.py(p2.beta),
            color(p2.category),
            esc(&p2.key),
            p2.category.name(),
            p2.k,
            p2.m
        )
        .unwrap();
    }
    let fs = 12.0;
    writeln!(out, r##"<text x="{:.1}" y="{:.1}" font-size="{}" text-anchor="middle" font-weight="bold">{}</text>"##, (x0 + x1) / 2.0, yt - 8.0, fs + 2.0, esc(title)).unwrap();
    writeln!(out, r##"<text x="{:.1}" y="{:.1}" font-size="{fs}" text-anchor="middle">perceived quality (absent → present)</text>"##, (x0 + x1) / 2.0, yb + 32.0).unwrap();
    writeln!(out, r##"<text x="{x0:.1}" y="{:.1}" font-size="{fs}" text-anchor="middle">-1</text>"##, yb + 15.0).unwrap();
    writeln!(out, r##"<text x="{x1:.1}" y="{:.1}" font-size="{fs}" text-anchor="middle">1</text>"##, yb + 15.0).unwrap();
    let lx = x0 - 36.0;
    let ly = (yt + yb) / 2.0;
    writeln!(out, r##"<text x="{lx:.1}" y="{ly:.1}" font-size="{fs}" text-anchor="middle" transform="rotate(-90 {lx:.1} {ly:.1})">weight on rating</text>"##).unwrap();
    writeln!(out, r##"<text x="{:.1}" y="{:.1}" font-size="{fs}" text-anchor="end">{:.1}</text>"##, x0 - 4.0, yt + 4.0, p.ymax).unwrap();
    writeln!(out, r##"<text x="{:.1}" y="{:.1}" font-size="{fs}" text-anchor="end">{:.1}</text>"##, x0 - 4.0, yb, -p.ymax).unwrap();
    writeln!(out, "</g>").unwrap();
}

fn legend(out: &mut String, x: f64, y: f64) {
    for (i, c) in KanoCategory::ALL.iter().enumerate() {
        let lx = x + i as f64 * 118.0;
        writeln!(out, r##"<line x1="{lx:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{}" stroke-width="3"/>"##, lx + 18.0, color(*c)).unwrap();
        writeln!(out, r##"<text x="{:.1}" y="{:.1}" font-size="12">{}</text>"##, lx + 22.0, y + 4.0, c.name()).unwrap();
    }
}

fn document(body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" width=\"{WIDTH}\" height=\"{HEIGHT}\" font-family=\"sans-serif\">\n{body}</svg>\n"
    )
}

/// One Kano plane.
pub fn kano_plane(title: &str, points: &[KanoPoint], t: KanoThresholds) -> String {
    let mut body = String::new();
    let p = Panel {
        x: 90.0,
        y: 50.0,
        w: 660.0,
        h: 450.0,
        ymax: y_extent(points, t),
    };
    panel(&mut body, &p, title, points, t);
    legend(&mut body, 50.0, 575.0);
    document(&body)
}

/// Two planes side by side on a shared vertical scale.
pub fn compare_planes(title_a: &str, a: &[KanoPoint], title_b: &str, b: &[KanoPoint], t: KanoThresholds) -> String {
    let ymax = y_extent(a, t).max(y_extent(b, t));
    let mut body = String::new();
    for (i, (title, pts)) in [(title_a, a), (title_b, b)].into_iter().enumerate() {
        let p = Panel {
            x: 70.0 + i as f64 * 390.0,
            y: 50.0,
            w: 320.0,
            h: 450.0,
            ymax,
        };
        panel(&mut body, &p, title, pts, t);
    }
    legend(&mut body, 50.0, 575.0);
    document(&body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_contains_segments_and_labels() {
        let t = KanoThresholds::default();
        let pts = vec![KanoPoint::new("read/book", "", -1.36, 1.02, t), KanoPoint::new("a<b", "", 0.1, 0.2, t)];
        let svg = kano_plane("KP2", &pts, t);
        assert!(svg.contains("viewBox=\"0 0 800 600\""));
        assert!(svg.contains("perceived quality (absent → present)"));
        assert!(svg.contains("weight on rating"));
        assert!(svg.contains("a&lt;b"));
        assert_eq!(svg.matches("<title>").count(), 2);
        assert!(svg.contains(color(KanoCategory::Performance)));
    }

    #[test]
    fn compare_fits_in_view() {
        let t = KanoThresholds::default();
        let pts = vec![KanoPoint::new("x", "", -3.0, 2.0, t)];
        let svg = compare_planes("A", &pts, "B", &[], t);
        assert_eq!(svg.matches("class=\"panel\"").count(), 2);
        // rightmost panel edge: 70 + 390 + 320
        assert!(70.0 + 390.0 + 320.0 <= WIDTH);
    }
}
