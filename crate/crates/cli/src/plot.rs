//! Static SVG figures. Every element that carries data has a `class`
//! (`band`, `box`, `scenario`, `observation`, `diagonal`, `reliability`)
//! so the output can be checked structurally.

use std::fmt::Write as _;

use pvmpi::data_io::DayMatrix;
use pvmpi::{MpiSet, QuantileCurve, ScenarioSet};

const LIGHT: (f64, f64, f64) = (222.0, 235.0, 247.0);
const DARK: (f64, f64, f64) = (8.0, 48.0, 107.0);
const OBS: &str = "#d62728";
const PALETTE: [&str; 4] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd"];

/// Plot area in pixels and the data ranges mapped onto it.
struct Frame {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, v: f64) -> f64 {
        self.left + (v - self.x.0) / (self.x.1 - self.x.0) * self.width
    }

    fn py(&self, v: f64) -> f64 {
        self.top + self.height - (v - self.y.0) / (self.y.1 - self.y.0) * self.height
    }

    fn point(&self, x: f64, y: f64) -> String {
        format!("{:.2},{:.2}", self.px(x), self.py(y))
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Shade `k` of `n`: 0 is the lightest, `n - 1` the darkest.
fn shade(k: usize, n: usize) -> String {
    let t = if n > 1 {
        k as f64 / (n - 1) as f64
    } else {
        1.0
    };
    let mix = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(LIGHT.0, DARK.0),
        mix(LIGHT.1, DARK.1),
        mix(LIGHT.2, DARK.2)
    )
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    mag * if r < 1.5 {
        1.0
    } else if r < 3.5 {
        2.0
    } else if r < 7.5 {
        5.0
    } else {
        10.0
    }
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo);
    let mut v = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while v <= hi + 1e-9 * step {
        out.push(if v.abs() < 1e-12 { 0.0 } else { v });
        v += step;
    }
    out
}

struct Svg {
    width: f64,
    height: f64,
    body: String,
}

impl Svg {
    fn new(width: f64, height: f64, title: &str) -> Self {
        let mut body = String::new();
        let _ = writeln!(
            body,
            r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#
        );
        let _ = writeln!(
            body,
            r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            width / 2.0,
            escape(title)
        );
        Svg {
            width,
            height,
            body,
        }
    }

    fn axes(&mut self, f: &Frame, xticks: &[(f64, String)], xlabel: &str, ylabel: &str) {
        let b = &mut self.body;
        let (x0, x1) = (f.left, f.left + f.width);
        let (y0, y1) = (f.top + f.height, f.top);
        let _ = writeln!(
            b,
            r##"<g class="axes" stroke="#333" stroke-width="1"><line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}"/><line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}"/></g>"##
        );
        for (v, label) in xticks {
            let x = f.px(*v);
            let _ = writeln!(
                b,
                r##"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/><text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="11">{}</text>"##,
                y0 + 4.0,
                y0 + 16.0,
                escape(label)
            );
        }
        for v in ticks(f.y.0, f.y.1) {
            let y = f.py(v);
            let _ = writeln!(
                b,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="#333"/><text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11">{}</text>"##,
                x0 - 4.0,
                x0 - 6.0,
                y + 4.0,
                fmt_tick(v)
            );
        }
        let _ = writeln!(
            b,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#,
            f.left + f.width / 2.0,
            y0 + 36.0,
            escape(xlabel)
        );
        let (lx, ly) = (f.left - 44.0, f.top + f.height / 2.0);
        let _ = writeln!(
            b,
            r#"<text x="{lx:.2}" y="{ly:.2}" text-anchor="middle" font-size="12" transform="rotate(-90 {lx:.2} {ly:.2})">{}</text>"#,
            escape(ylabel)
        );
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

/// Frame over the hours of `day` with the given power range.
fn hour_frame(day: &DayMatrix, y: (f64, f64)) -> (Frame, Vec<(f64, String)>) {
    let dim = day.dim();
    let frame = Frame {
        left: 64.0,
        top: 34.0,
        width: 620.0,
        height: 320.0,
        x: (-0.5, dim as f64 - 0.5),
        y,
    };
    let xt = (0..dim)
        .map(|d| (d as f64, format!("{}", day.hour_start as usize + d)))
        .collect();
    (frame, xt)
}

/// Closed band between `lower` and `upper` traced over the hours.
fn band(f: &Frame, lower: &[f64], upper: &[f64], alpha: f64, fill: &str) -> String {
    let pts: Vec<String> = upper
        .iter()
        .enumerate()
        .map(|(d, v)| f.point(d as f64, *v))
        .chain(
            lower
                .iter()
                .enumerate()
                .rev()
                .map(|(d, v)| f.point(d as f64, *v)),
        )
        .collect();
    format!(
        r#"<polygon class="band" data-alpha="{alpha}" fill="{fill}" stroke="none" points="{}"/>"#,
        pts.join(" ")
    )
}

fn observation_line(f: &Frame, day: &DayMatrix) -> String {
    let pts: Vec<String> = day
        .power
        .iter()
        .enumerate()
        .map(|(d, p)| f.point(d as f64, *p))
        .collect();
    let mut s = format!(
        r#"<polyline class="observation" fill="none" stroke="{OBS}" stroke-width="2" points="{}"/>"#,
        pts.join(" ")
    );
    for (d, p) in day.power.iter().enumerate() {
        let _ = write!(
            s,
            r#"<circle class="observation-point" cx="{:.2}" cy="{:.2}" r="3" fill="{OBS}"/>"#,
            f.px(d as f64),
            f.py(*p)
        );
    }
    s
}

/// Central prediction intervals of every level, widest (lightest) first,
/// with the observed trajectory on top.
pub fn fan_chart(day: &DayMatrix, curves: &[QuantileCurve], alphas: &[f64]) -> String {
    let (f, xt) = hour_frame(day, (0.0, 1.0));
    let mut svg = Svg::new(
        720.0,
        400.0,
        &format!("Univariate prediction intervals, {}", day.date),
    );
    let mut order: Vec<f64> = alphas.to_vec();
    order.sort_by(|a, b| b.total_cmp(a));
    let n = order.len();
    for (k, &a) in order.iter().enumerate() {
        let (lo, hi): (Vec<f64>, Vec<f64>) = curves.iter().map(|c| c.central_interval(a)).unzip();
        svg.body.push_str(&band(&f, &lo, &hi, a, &shade(k, n)));
        svg.body.push('\n');
    }
    svg.body.push_str(&observation_line(&f, day));
    svg.body.push('\n');
    svg.axes(&f, &xt, "hour", "normalized power");
    svg.finish()
}

/// Every scenario trajectory in grey with the observation on top.
pub fn spaghetti(day: &DayMatrix, set: &ScenarioSet) -> String {
    let (f, xt) = hour_frame(day, (0.0, 1.0));
    let kind = set.kind.map_or(String::new(), |k| format!(" ({k})"));
    let mut svg = Svg::new(720.0, 400.0, &format!("Scenarios{kind}, {}", day.date));
    let opacity = (20.0 / set.n_scenarios().max(1) as f64).clamp(0.05, 0.8);
    for s in 0..set.n_scenarios() {
        let pts: Vec<String> = set
            .row(s)
            .iter()
            .enumerate()
            .map(|(d, v)| f.point(d as f64, *v))
            .collect();
        let _ = writeln!(
            svg.body,
            r##"<polyline class="scenario" fill="none" stroke="#555" stroke-opacity="{opacity:.3}" points="{}"/>"##,
            pts.join(" ")
        );
    }
    svg.body.push_str(&observation_line(&f, day));
    svg.body.push('\n');
    svg.axes(&f, &xt, "hour", "normalized power");
    svg.finish()
}

/// The day's MPIs drawn as nested bands over the hours.
pub fn mpi_bands(day: &DayMatrix, set: &MpiSet) -> String {
    let (f, xt) = hour_frame(day, (0.0, 1.0));
    let mut svg = Svg::new(
        720.0,
        400.0,
        &format!("Multivariate prediction intervals, {}", day.date),
    );
    let mut boxes: Vec<_> = set.boxes.iter().collect();
    boxes.sort_by(|a, b| b.alpha.total_cmp(&a.alpha));
    let n = boxes.len();
    for (k, b) in boxes.iter().enumerate() {
        svg.body
            .push_str(&band(&f, &b.lower, &b.upper, b.alpha, &shade(k, n)));
        svg.body.push('\n');
    }
    svg.body.push_str(&observation_line(&f, day));
    svg.body.push('\n');
    svg.axes(&f, &xt, "hour", "normalized power");
    svg.finish()
}

/// Nested MPI rectangles for hours `i` and `j` with the observed point
/// and, when given, the scenario cloud.
pub fn bivariate_boxes(
    day: &DayMatrix,
    set: &MpiSet,
    cloud: Option<&ScenarioSet>,
    i: usize,
    j: usize,
) -> String {
    let mut xs = vec![day.power[i]];
    let mut ys = vec![day.power[j]];
    for b in &set.boxes {
        xs.extend([b.lower[i], b.upper[i]]);
        ys.extend([b.lower[j], b.upper[j]]);
    }
    if let Some(c) = cloud {
        xs.extend(c.values.column(i).iter());
        ys.extend(c.values.column(j).iter());
    }
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pad = ((hi - lo) * 0.05).max(0.01);
        (lo - pad, hi + pad)
    };
    let f = Frame {
        left: 70.0,
        top: 34.0,
        width: 400.0,
        height: 400.0,
        x: range(&xs),
        y: range(&ys),
    };
    let (hi_label, hj_label) = (day.hour_start as usize + i, day.hour_start as usize + j);
    let mut svg = Svg::new(
        500.0,
        490.0,
        &format!("MPIs at hours {hi_label} and {hj_label}, {}", day.date),
    );
    let mut boxes: Vec<_> = set.boxes.iter().collect();
    boxes.sort_by(|a, b| b.alpha.total_cmp(&a.alpha));
    let n = boxes.len();
    for (k, b) in boxes.iter().enumerate() {
        let (x0, x1) = (f.px(b.lower[i]), f.px(b.upper[i]));
        let (y0, y1) = (f.py(b.upper[j]), f.py(b.lower[j]));
        let _ = writeln!(
            svg.body,
            r##"<rect class="box" data-alpha="{}" x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{}" stroke="#08306b" stroke-width="0.5"/>"##,
            b.alpha,
            x1 - x0,
            y1 - y0,
            shade(k, n)
        );
    }
    if let Some(c) = cloud {
        for s in 0..c.n_scenarios() {
            let _ = writeln!(
                svg.body,
                r##"<circle class="scenario" cx="{:.2}" cy="{:.2}" r="1.2" fill="#555" fill-opacity="0.35"/>"##,
                f.px(c.values[(s, i)]),
                f.py(c.values[(s, j)])
            );
        }
    }
    let _ = writeln!(
        svg.body,
        r#"<circle class="observation" cx="{:.2}" cy="{:.2}" r="5" fill="{OBS}"/>"#,
        f.px(day.power[i]),
        f.py(day.power[j])
    );
    let xt: Vec<(f64, String)> = ticks(f.x.0, f.x.1)
        .into_iter()
        .map(|v| (v, fmt_tick(v)))
        .collect();
    svg.axes(
        &f,
        &xt,
        &format!("power at hour {hi_label}"),
        &format!("power at hour {hj_label}"),
    );
    svg.finish()
}

/// Empirical against nominal coverage, one curve per named series, with
/// the identity diagonal.
pub fn reliability(series: &[(String, Vec<f64>, Vec<f64>)]) -> String {
    let f = Frame {
        left: 70.0,
        top: 34.0,
        width: 400.0,
        height: 400.0,
        x: (0.0, 1.0),
        y: (0.0, 1.0),
    };
    let mut svg = Svg::new(500.0, 490.0, "Calibration of the MPIs");
    let _ = writeln!(
        svg.body,
        r##"<line class="diagonal" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
        f.px(0.0),
        f.py(0.0),
        f.px(1.0),
        f.py(1.0)
    );
    for (k, (name, alphas, emp)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = alphas
            .iter()
            .zip(emp)
            .map(|(a, e)| f.point(*a, *e))
            .collect();
        let _ = writeln!(
            svg.body,
            r#"<polyline class="reliability" data-model="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            escape(name),
            pts.join(" ")
        );
        for (a, e) in alphas.iter().zip(emp) {
            let _ = write!(
                svg.body,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                f.px(*a),
                f.py(*e)
            );
        }
        svg.body.push('\n');
        let ly = f.top + 16.0 + 18.0 * k as f64;
        let _ = writeln!(
            svg.body,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}" font-size="12">{}</text>"#,
            f.left + 12.0,
            f.left + 36.0,
            f.left + 42.0,
            ly + 4.0,
            escape(name)
        );
    }
    let xt: Vec<(f64, String)> = ticks(0.0, 1.0)
        .into_iter()
        .map(|v| (v, fmt_tick(v)))
        .collect();
    svg.axes(&f, &xt, "nominal coverage", "empirical coverage");
    svg.finish()
}
