//! Hand-emitted SVG plots: the CEP figure (one line plus credible band
//! per conditioning value, a zero reference, and the observed surrogate
//! density along the bottom) and the sensitivity figure (gamma posteriors
//! against the fixed T-outcome correlation). Output is plain deterministic
//! text: identical inputs give identical bytes.

use surrocep::samplers::SensitivityRow;
use surrocep::stats;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 62.0;
const MARGIN_R: f64 = 18.0;
const MARGIN_T: f64 = 26.0;
const MARGIN_B: f64 = 48.0;

const PALETTE: [&str; 6] = ["#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2"];
const DENSITY_COLOR: &str = "#4682b4";

/// One plotted CEP curve: pointwise posterior mean and 95% bounds.
pub struct LabeledCurve {
    pub label: String,
    pub s: Vec<f64>,
    pub mean: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    plot_w: f64,
    plot_h: f64,
}

impl Frame {
    fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Frame {
        Frame {
            x_min,
            x_max,
            y_min,
            y_max,
            plot_w: WIDTH - MARGIN_L - MARGIN_R,
            plot_h: HEIGHT - MARGIN_T - MARGIN_B,
        }
    }

    fn x(&self, v: f64) -> f64 {
        MARGIN_L + (v - self.x_min) / (self.x_max - self.x_min) * self.plot_w
    }

    fn y(&self, v: f64) -> f64 {
        MARGIN_T + (self.y_max - v) / (self.y_max - self.y_min) * self.plot_h
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

fn tick_step(range: f64) -> f64 {
    let raw = range / 6.0;
    let mag = 10f64.powf(raw.abs().log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = tick_step(hi - lo);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        // Snap -0.0 to 0.0 so labels are stable.
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

fn axes(svg: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    let x0 = MARGIN_L;
    let x1 = WIDTH - MARGIN_R;
    let y0 = MARGIN_T;
    let y1 = HEIGHT - MARGIN_B;
    svg.push_str(&format!(
        "<rect x='{}' y='{}' width='{}' height='{}' fill='none' stroke='#333333' stroke-width='1'/>\n",
        fmt(x0), fmt(y0), fmt(x1 - x0), fmt(y1 - y0)
    ));
    for t in ticks(frame.x_min, frame.x_max) {
        let px = frame.x(t);
        svg.push_str(&format!(
            "<line x1='{0}' y1='{1}' x2='{0}' y2='{2}' stroke='#333333' stroke-width='1'/>\n",
            fmt(px), fmt(y1), fmt(y1 + 5.0)
        ));
        svg.push_str(&format!(
            "<text x='{}' y='{}' font-size='11' text-anchor='middle' fill='#333333'>{}</text>\n",
            fmt(px), fmt(y1 + 18.0), trim_label(t)
        ));
    }
    for t in ticks(frame.y_min, frame.y_max) {
        let py = frame.y(t);
        svg.push_str(&format!(
            "<line x1='{1}' y1='{0}' x2='{2}' y2='{0}' stroke='#333333' stroke-width='1'/>\n",
            fmt(py), fmt(x0 - 5.0), fmt(x0)
        ));
        svg.push_str(&format!(
            "<text x='{}' y='{}' font-size='11' text-anchor='end' fill='#333333'>{}</text>\n",
            fmt(x0 - 8.0), fmt(py + 4.0), trim_label(t)
        ));
    }
    svg.push_str(&format!(
        "<text x='{}' y='{}' font-size='12' text-anchor='middle' fill='#111111'>{}</text>\n",
        fmt((x0 + x1) / 2.0), fmt(HEIGHT - 10.0), xml_escape(x_label)
    ));
    svg.push_str(&format!(
        "<text x='14' y='{}' font-size='12' text-anchor='middle' fill='#111111' transform='rotate(-90 14 {})'>{}</text>\n",
        fmt((y0 + y1) / 2.0), fmt((y0 + y1) / 2.0), xml_escape(y_label)
    ));
}

fn trim_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn polyline(svg: &mut String, pts: &[(f64, f64)], color: &str, width: f64, dashed: bool) {
    let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{},{}", fmt(*x), fmt(*y))).collect();
    let dash = if dashed { " stroke-dasharray='6,4'" } else { "" };
    svg.push_str(&format!(
        "<polyline points='{}' fill='none' stroke='{}' stroke-width='{}'{}/>\n",
        coords.join(" "),
        color,
        width,
        dash
    ));
}

/// Gaussian kernel density with Silverman bandwidth, evaluated on a
/// 200-point grid over the data range.
fn kde(values: &[f64], lo: f64, hi: f64) -> Vec<(f64, f64)> {
    if values.len() < 2 {
        return Vec::new();
    }
    let sd = stats::sd(values);
    let iqr = stats::quantile(values, 0.75) - stats::quantile(values, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let bw = (0.9 * spread * (values.len() as f64).powf(-0.2)).max(1e-6);
    let norm = 1.0 / (values.len() as f64 * bw * (2.0 * std::f64::consts::PI).sqrt());
    (0..200)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / 199.0;
            let d: f64 = values
                .iter()
                .map(|v| {
                    let z = (x - v) / bw;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                * norm;
            (x, d)
        })
        .collect()
}

/// The CEP figure.
pub fn cep_svg(curves: &[LabeledCurve], s1_observed: &[f64]) -> String {
    let x_min = curves.iter().flat_map(|c| c.s.iter()).fold(f64::INFINITY, |a, &b| a.min(b));
    let x_max = curves.iter().flat_map(|c| c.s.iter()).fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut y_min: f64 = 0.0;
    let mut y_max: f64 = 0.0;
    for c in curves {
        for v in c.lo.iter().chain(c.hi.iter()).chain(c.mean.iter()) {
            y_min = y_min.min(*v);
            y_max = y_max.max(*v);
        }
    }
    let pad = 0.06 * (y_max - y_min).max(1e-9);
    let frame = Frame::new(x_min, x_max, y_min - pad, y_max + pad);

    let mut svg = svg_open();
    axes(
        &mut svg,
        &frame,
        "surrogate stratum s = S(1) - S(0)",
        "expected effect on T",
    );

    // Zero reference.
    if frame.y_min < 0.0 && frame.y_max > 0.0 {
        let y = frame.y(0.0);
        svg.push_str(&format!(
            "<line x1='{0}' y1='{1}' x2='{2}' y2='{1}' stroke='#888888' stroke-width='1' stroke-dasharray='4,4'/>\n",
            fmt(MARGIN_L), fmt(y), fmt(WIDTH - MARGIN_R)
        ));
    }

    // Observed-surrogate density hugging the bottom quarter.
    let density = kde(s1_observed, x_min, x_max);
    if !density.is_empty() {
        let peak = density.iter().map(|p| p.1).fold(0.0f64, f64::max).max(1e-300);
        let base = HEIGHT - MARGIN_B;
        let scale = 0.22 * frame.plot_h / peak;
        let pts: Vec<(f64, f64)> = density
            .iter()
            .map(|(x, d)| (frame.x(*x), base - d * scale))
            .collect();
        polyline(&mut svg, &pts, DENSITY_COLOR, 1.5, false);
    }

    for (i, curve) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        // Credible band as a closed polygon: upper path then reversed lower.
        let mut pts: Vec<String> = curve
            .s
            .iter()
            .zip(&curve.hi)
            .map(|(s, v)| format!("{},{}", fmt(frame.x(*s)), fmt(frame.y(*v))))
            .collect();
        pts.extend(
            curve
                .s
                .iter()
                .zip(&curve.lo)
                .rev()
                .map(|(s, v)| format!("{},{}", fmt(frame.x(*s)), fmt(frame.y(*v)))),
        );
        svg.push_str(&format!(
            "<polygon points='{}' fill='{}' fill-opacity='0.15' stroke='none'/>\n",
            pts.join(" "),
            color
        ));
        let line: Vec<(f64, f64)> = curve
            .s
            .iter()
            .zip(&curve.mean)
            .map(|(s, v)| (frame.x(*s), frame.y(*v)))
            .collect();
        polyline(&mut svg, &line, color, 2.0, false);
        svg.push_str(&format!(
            "<text x='{}' y='{}' font-size='12' fill='{}'>{}</text>\n",
            fmt(MARGIN_L + 10.0),
            fmt(MARGIN_T + 16.0 + 16.0 * i as f64),
            color,
            xml_escape(&curve.label)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// The sensitivity figure: posterior means and 95% intervals for both
/// gamma quantities across settings of the T-outcome correlation.
pub fn sensitivity_svg(rows: &[SensitivityRow]) -> String {
    let x_min = rows.iter().map(|r| r.theta_t).fold(f64::INFINITY, f64::min) - 0.08;
    let x_max = rows.iter().map(|r| r.theta_t).fold(f64::NEG_INFINITY, f64::max) + 0.08;
    let mut y_min: f64 = 0.0;
    let mut y_max: f64 = 0.0;
    for r in rows {
        for v in [r.gamma0_lo, r.gamma0_hi, r.gamma1_lo, r.gamma1_hi] {
            y_min = y_min.min(v);
            y_max = y_max.max(v);
        }
    }
    let pad = 0.08 * (y_max - y_min).max(1e-9);
    let frame = Frame::new(x_min, x_max, y_min - pad, y_max + pad);

    let mut svg = svg_open();
    axes(&mut svg, &frame, "fixed T-outcome correlation", "posterior gamma");
    if frame.y_min < 0.0 && frame.y_max > 0.0 {
        let y = frame.y(0.0);
        svg.push_str(&format!(
            "<line x1='{0}' y1='{1}' x2='{2}' y2='{1}' stroke='#888888' stroke-width='1' stroke-dasharray='4,4'/>\n",
            fmt(MARGIN_L), fmt(y), fmt(WIDTH - MARGIN_R)
        ));
    }
    let series = [
        ("gamma0", PALETTE[0], -5.0),
        ("gamma1", PALETTE[1], 5.0),
    ];
    for (name, color, offset) in series {
        for r in rows {
            let (mean, lo, hi) = if name == "gamma0" {
                (r.gamma0_mean, r.gamma0_lo, r.gamma0_hi)
            } else {
                (r.gamma1_mean, r.gamma1_lo, r.gamma1_hi)
            };
            let px = frame.x(r.theta_t) + offset;
            svg.push_str(&format!(
                "<line x1='{0}' y1='{1}' x2='{0}' y2='{2}' stroke='{3}' stroke-width='1.5'/>\n",
                fmt(px), fmt(frame.y(lo)), fmt(frame.y(hi)), color
            ));
            svg.push_str(&format!(
                "<circle cx='{}' cy='{}' r='3.5' fill='{}'/>\n",
                fmt(px), fmt(frame.y(mean)), color
            ));
        }
    }
    for (i, (name, color, _)) in series.iter().enumerate() {
        svg.push_str(&format!(
            "<text x='{}' y='{}' font-size='12' fill='{}'>{}</text>\n",
            fmt(MARGIN_L + 10.0),
            fmt(MARGIN_T + 16.0 + 16.0 * i as f64),
            color,
            name
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn svg_open() -> String {
    format!(
        "<svg xmlns='http://www.w3.org/2000/svg' width='{WIDTH}' height='{HEIGHT}' viewBox='0 0 {WIDTH} {HEIGHT}'>\n<rect width='{WIDTH}' height='{HEIGHT}' fill='white'/>\n"
    )
}
