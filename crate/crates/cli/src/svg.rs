//! Static SVG figures. All coordinates are printed with fixed precision so
//! identical inputs give identical files.

use std::fmt::Write;

use groundphase::state::CgSample;
use groundphase::BlochVector;

const LIGHT: [f64; 3] = [198.0, 219.0, 239.0];
const DARK: [f64; 3] = [8.0, 48.0, 107.0];
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn shade(x: f64) -> String {
    let x = x.clamp(0.0, 1.0);
    let c: Vec<u8> = (0..3)
        .map(|i| (LIGHT[i] + x * (DARK[i] - LIGHT[i])).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Doc {
    body: String,
    width: f64,
    height: f64,
}

impl Doc {
    fn new(width: f64, height: f64) -> Doc {
        Doc {
            body: String::new(),
            width,
            height,
        }
    }

    fn raw(&mut self, s: &str) {
        self.body.push_str(s);
        self.body.push('\n');
    }

    fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-size="{size}" text-anchor="{anchor}" font-family="sans-serif">{}</text>"#,
            escape(s)
        );
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

/// Ground amplitude in the complex plane: unit disc, the `|c_g|^2 = 1/2`
/// circle, and the path shaded by the amplitude outside `|g>`.
pub fn render_cg_disc(record: &[CgSample], title: &str) -> String {
    let size = 420.0;
    let (cx, cy, r) = (size / 2.0, size / 2.0 + 10.0, 180.0);
    let map = |s: &CgSample| (cx + r * s.re, cy - r * s.im);
    let mut doc = Doc::new(size, size + 20.0);
    doc.text(cx, 18.0, 14.0, "middle", title);
    let _ = writeln!(
        doc.body,
        r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r:.2}" fill="none" stroke="#333" stroke-width="1.2"/>"##
    );
    let _ = writeln!(
        doc.body,
        r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="{:.2}" fill="none" stroke="#888" stroke-dasharray="6 4"/>"##,
        r / 2f64.sqrt()
    );
    let _ = writeln!(
        doc.body,
        r##"<line x1="{:.2}" y1="{cy:.2}" x2="{:.2}" y2="{cy:.2}" stroke="#bbb"/><line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="#bbb"/>"##,
        cx - r - 8.0,
        cx + r + 8.0,
        cy - r - 8.0,
        cy + r + 8.0
    );
    doc.text(cx + r + 4.0, cy - 4.0, 11.0, "start", "Re");
    doc.text(cx + 4.0, cy - r - 4.0, 11.0, "start", "Im");
    if record.is_empty() {
        return doc.finish();
    }
    for w in record.windows(2) {
        let (a, b) = (map(&w[0]), map(&w[1]));
        let _ = writeln!(
            doc.body,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="2" stroke-linecap="round"/>"#,
            a.0,
            a.1,
            b.0,
            b.1,
            shade(0.5 * (w[0].magnitude + w[1].magnitude))
        );
    }
    let start = map(&record[0]);
    let end = map(&record[record.len() - 1]);
    let _ = writeln!(
        doc.body,
        r##"<circle cx="{:.2}" cy="{:.2}" r="5" fill="#2ca02c" stroke="black"/>"##,
        start.0, start.1
    );
    if record.len() > 1 {
        let _ = writeln!(
            doc.body,
            r##"<rect x="{:.2}" y="{:.2}" width="9" height="9" fill="#d62728" stroke="black"/>"##,
            end.0 - 4.5,
            end.1 - 4.5
        );
    }
    doc.finish()
}

/// Orthographic projection of a Bloch path onto the plane of `axes`
/// (0 = x, 1 = y, 2 = z). Points behind the plane are drawn faded.
pub fn render_bloch(path: &[BlochVector], axes: (usize, usize), title: &str) -> String {
    let names = ["x", "y", "z"];
    let depth = 3 - axes.0 - axes.1;
    let size = 360.0;
    let (cx, cy, r) = (size / 2.0, size / 2.0 + 10.0, 150.0);
    let project = |b: &BlochVector| {
        let v = b.to_array();
        (cx + r * v[axes.0], cy - r * v[axes.1], v[depth])
    };
    let mut doc = Doc::new(size, size + 20.0);
    doc.text(cx, 18.0, 14.0, "middle", title);
    let _ = writeln!(
        doc.body,
        r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r:.2}" fill="#f7f7f7" stroke="#333"/>"##
    );
    doc.text(cx + r + 4.0, cy + 4.0, 12.0, "start", names[axes.0]);
    doc.text(cx, cy - r - 6.0, 12.0, "middle", names[axes.1]);
    for w in path.windows(2) {
        let (a, b) = (project(&w[0]), project(&w[1]));
        let front = a.2 + b.2 >= 0.0;
        let _ = writeln!(
            doc.body,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#1f77b4" stroke-width="2" stroke-opacity="{}"/>"##,
            a.0,
            a.1,
            b.0,
            b.1,
            if front { "1" } else { "0.35" }
        );
    }
    if let Some(first) = path.first() {
        let p = project(first);
        let _ = writeln!(
            doc.body,
            r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#2ca02c"/>"##,
            p.0, p.1
        );
    }
    if path.len() > 1 {
        let p = project(&path[path.len() - 1]);
        let _ = writeln!(
            doc.body,
            r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#d62728"/>"##,
            p.0, p.1
        );
    }
    doc.finish()
}

/// Named series on a shared x axis.
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub log_y: bool,
    pub series: Vec<(String, Vec<(f64, f64)>)>,
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    (0..=4).map(|k| lo + (hi - lo) * k as f64 / 4.0).collect()
}

fn render_panel(doc: &mut Doc, panel: &Panel, x0: f64, y0: f64, w: f64, h: f64) {
    let tf = |y: f64| if panel.log_y { y.max(1e-300).log10() } else { y };
    let points = panel.series.iter().flat_map(|(_, s)| s.iter());
    let (mut xl, mut xh, mut yl, mut yh) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        xl = xl.min(x);
        xh = xh.max(x);
        yl = yl.min(tf(y));
        yh = yh.max(tf(y));
    }
    if !xl.is_finite() {
        return;
    }
    if xh - xl < 1e-12 {
        xh = xl + 1.0;
    }
    if yh - yl < 1e-12 {
        yl -= 0.5;
        yh += 0.5;
    }
    let pad = 0.05 * (yh - yl);
    let (yl, yh) = (yl - pad, yh + pad);
    let sx = |x: f64| x0 + (x - xl) / (xh - xl) * w;
    let sy = |y: f64| y0 + h - (tf(y) - yl) / (yh - yl) * h;
    let _ = writeln!(
        doc.body,
        r##"<rect x="{x0:.2}" y="{y0:.2}" width="{w:.2}" height="{h:.2}" fill="none" stroke="#333"/>"##
    );
    doc.text(x0 + w / 2.0, y0 - 8.0, 13.0, "middle", &panel.title);
    doc.text(x0 + w / 2.0, y0 + h + 32.0, 11.0, "middle", &panel.x_label);
    for x in ticks(xl, xh) {
        doc.text(sx(x), y0 + h + 14.0, 9.0, "middle", &format!("{x:.3}"));
    }
    for y in ticks(yl, yh) {
        let py = y0 + h - (y - yl) / (yh - yl) * h;
        let label = if panel.log_y {
            format!("1e{y:.1}")
        } else {
            format!("{y:.3}")
        };
        doc.text(x0 - 4.0, py + 3.0, 9.0, "end", &label);
    }
    for (k, (name, s)) in panel.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = s.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        if pts.len() == 1 {
            let _ = writeln!(
                doc.body,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                sx(s[0].0),
                sy(s[0].1)
            );
        } else {
            let _ = writeln!(
                doc.body,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#,
                pts.join(" ")
            );
        }
        let ly = y0 + 14.0 + 14.0 * k as f64;
        let _ = writeln!(
            doc.body,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            x0 + 8.0,
            x0 + 24.0
        );
        doc.text(x0 + 28.0, ly + 3.0, 10.0, "start", name);
    }
}

/// Panels laid out side by side.
pub fn render_panels(panels: &[Panel]) -> String {
    let (w, h, margin) = (300.0, 220.0, 60.0);
    let width = margin + panels.len() as f64 * (w + margin);
    let mut doc = Doc::new(width, h + 90.0);
    for (k, p) in panels.iter().enumerate() {
        render_panel(&mut doc, p, margin + k as f64 * (w + margin), 30.0, w, h);
    }
    doc.raw("");
    doc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(re: f64, im: f64, magnitude: f64) -> CgSample {
        CgSample {
            time: 0.0,
            re,
            im,
            magnitude,
        }
    }

    #[test]
    fn single_point_disc_marks_the_edge() {
        let svg = render_cg_disc(&[sample(1.0, 0.0, 0.0)], "ground");
        assert!(svg.contains(r#"<circle cx="390.00" cy="220.00" r="5""#), "{svg}");
        assert!(!svg.contains("<rect x="));
    }

    #[test]
    fn path_through_centre_darkens() {
        let rec = [sample(1.0, 0.0, 0.0), sample(0.0, 0.0, 1.0), sample(0.0, 1.0, 0.0)];
        let svg = render_cg_disc(&rec, "t");
        assert!(svg.contains(&shade(0.5)));
        assert_eq!(shade(0.0), "#c6dbef");
        assert_eq!(shade(1.0), "#08306b");
    }

    #[test]
    fn deterministic_output() {
        let path: Vec<BlochVector> = (0..50)
            .map(|k| {
                let a = k as f64 * 0.1;
                BlochVector::new(0.6 * a.cos(), 0.6 * a.sin(), -0.8).unwrap()
            })
            .collect();
        assert_eq!(render_bloch(&path, (0, 2), "loop"), render_bloch(&path, (0, 2), "loop"));
        let p = render_bloch(&path[..1], (0, 1), "dot");
        assert_eq!(p.matches("<circle").count(), 2);
    }

    #[test]
    fn panels_escape_labels() {
        let p = Panel {
            title: "a < b".into(),
            x_label: "x".into(),
            log_y: true,
            series: vec![("s".into(), vec![(0.0, 1e-3), (1.0, 1e-1)])],
        };
        let svg = render_panels(&[p]);
        assert!(svg.contains("a &lt; b"));
        assert!(svg.contains("<polyline"));
    }
}
