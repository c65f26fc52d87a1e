//! Self-contained SVG plots.

use std::fmt::Write as _;

use crate::adhesive::AdhesiveParams;
use crate::fem::Mesh2D;
use crate::identify::TraceEntry;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    left: f64,
    top: f64,
    width: f64,
    height: f64,
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64), left: f64, top: f64, width: f64, height: f64) -> Self {
        let widen = |(a, b): (f64, f64)| if b > a { (a, b) } else { (a - 0.5, a + 0.5) };
        let (x0, x1) = widen(x);
        let (y0, y1) = widen(y);
        Self { x0, x1, y0, y1, left, top, width, height }
    }
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x0) / (self.x1 - self.x0) * self.width
    }
    fn py(&self, y: f64) -> f64 {
        self.top + self.height - (y - self.y0) / (self.y1 - self.y0) * self.height
    }
}

fn header(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    )
}

fn polyline(s: &mut String, pts: &[(f64, f64)], color: &str) {
    let p: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>", p.join(" "));
}

fn axes(s: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        s,
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        f.left, f.top, f.width, f.height
    );
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{xlabel}</text>", f.left + f.width / 2.0, f.top + f.height + 30.0);
    let _ = writeln!(
        s,
        "<text x=\"12\" y=\"{}\" transform=\"rotate(-90 12 {})\" text-anchor=\"middle\">{ylabel}</text>",
        f.top + f.height / 2.0,
        f.top + f.height / 2.0
    );
    for (v, y) in [(f.y0, f.top + f.height), (f.y1, f.top)] {
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{v:.3}</text>", f.left - 4.0, y + 4.0);
    }
}

/// `log10` objective against iteration; dashed lines separate phases.
pub fn objective_plot(trace: &[TraceEntry]) -> String {
    let mut s = header(W, H);
    let pts: Vec<(f64, f64)> = trace
        .iter()
        .filter(|e| e.objective > 0.0)
        .map(|e| (e.iteration as f64, e.objective.log10()))
        .collect();
    let range = |it: &mut dyn Iterator<Item = f64>| it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let xr = if pts.is_empty() { (0.0, 1.0) } else { range(&mut pts.iter().map(|p| p.0)) };
    let yr = if pts.is_empty() { (0.0, 1.0) } else { range(&mut pts.iter().map(|p| p.1)) };
    let f = Frame::new(xr, yr, PAD + 20.0, 20.0, W - PAD - 40.0, H - PAD - 30.0);
    axes(&mut s, &f, "iteration", "log10 objective");
    for w in trace.windows(2) {
        if w[0].phase != w[1].phase {
            let x = f.px(w[1].iteration as f64);
            let _ = writeln!(
                s,
                "<line x1=\"{x:.2}\" y1=\"{}\" x2=\"{x:.2}\" y2=\"{}\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>",
                f.top,
                f.top + f.height
            );
        }
    }
    let mapped: Vec<(f64, f64)> = pts.iter().map(|(x, y)| (f.px(*x), f.py(*y))).collect();
    polyline(&mut s, &mapped, "steelblue");
    s.push_str("</svg>\n");
    s
}

/// One panel per parameter field along the contact boundary; the planted
/// distribution, if given, is drawn dashed.
pub fn params_plot(params: &AdhesiveParams, planted: Option<&AdhesiveParams>) -> String {
    let mut s = header(W, 3.0 * H / 2.0);
    let fields = |p: &AdhesiveParams| [p.alpha_f.clone(), p.kappa_n.clone(), p.kappa_t.clone()];
    let names = ["alpha_F (J/m^2)", "kappa_N (Pa/m)", "kappa_T (Pa/m)"];
    let mine = fields(params);
    let theirs = planted.map(fields);
    let panel = H / 2.0;
    for (n, values) in mine.iter().enumerate() {
        let mut all: Vec<f64> = values.clone();
        if let Some(t) = &theirs {
            all.extend_from_slice(&t[n]);
        }
        let lo = all.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let m = values.len().max(1);
        let f = Frame::new((0.0, (m - 1).max(1) as f64), (lo, hi), PAD + 40.0, 10.0 + n as f64 * panel, W - PAD - 60.0, panel - 45.0);
        axes(&mut s, &f, "contact node", names[n]);
        let pts: Vec<(f64, f64)> = values.iter().enumerate().map(|(i, v)| (f.px(i as f64), f.py(*v))).collect();
        polyline(&mut s, &pts, "firebrick");
        if let Some(t) = &theirs {
            let pts: Vec<String> = t[n].iter().enumerate().map(|(i, v)| format!("{:.2},{:.2}", f.px(i as f64), f.py(*v))).collect();
            let _ = writeln!(
                s,
                "<polyline fill=\"none\" stroke=\"black\" stroke-dasharray=\"5 3\" points=\"{}\"/>",
                pts.join(" ")
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Deformed mesh with displacements scaled by `magnification`; contact
/// nodes are shaded by their delamination value.
pub fn deformation_frame(mesh: &Mesh2D, u: &[f64], z: &[f64], magnification: f64, step: usize) -> String {
    let pos: Vec<(f64, f64)> = mesh
        .nodes()
        .iter()
        .enumerate()
        .map(|(n, p)| (p[0] + magnification * u[2 * n], p[1] + magnification * u[2 * n + 1]))
        .collect();
    let xs = pos.iter().map(|p| p.0).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let ys = pos.iter().map(|p| p.1).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let span = (xs.1 - xs.0).max(ys.1 - ys.0);
    let width = W - 2.0 * PAD;
    let height = width * (ys.1 - ys.0) / span;
    let mut s = header(W, height + 2.0 * PAD + 20.0);
    let f = Frame::new(xs, ys, PAD, PAD, width * (xs.1 - xs.0) / span, height);
    for t in mesh.triangles() {
        let p: Vec<String> = t.iter().map(|&n| format!("{:.2},{:.2}", f.px(pos[n].0), f.py(pos[n].1))).collect();
        let _ = writeln!(s, "<polygon points=\"{}\" fill=\"#dde6f0\" stroke=\"#567\" stroke-width=\"0.5\"/>", p.join(" "));
    }
    for (i, &n) in mesh.contact_nodes().iter().enumerate() {
        let shade = (255.0 * (1.0 - z[i])).round() as u8;
        let _ = writeln!(
            s,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"rgb(255,{shade},{shade})\" stroke=\"black\"/>",
            f.px(pos[n].0),
            f.py(pos[n].1)
        );
    }
    let _ = writeln!(s, "<text x=\"{PAD}\" y=\"20\">step {step}, displacement x{magnification}</text>");
    s.push_str("</svg>\n");
    s
}
