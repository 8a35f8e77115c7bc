//! Error-versus-noise figure as standalone SVG.

use std::fmt::Write;

use compact_tik::experiment::AggregateRow;

use crate::CliError;

pub const WIDTH: f64 = 640.0;
pub const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 60.0;

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Maps `(log10 delta, log10 error)` into pixel coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    pub fn px(&self, log_delta: f64) -> f64 {
        LEFT + (log_delta - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    pub fn py(&self, log_err: f64) -> f64 {
        HEIGHT - BOTTOM - (log_err - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo < 1e-9 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.06 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Intercept `ln c` of `e = c delta^p` fitted by least squares in log space
/// with the exponent held fixed.
pub fn reference_intercept(rows: &[&AggregateRow], exponent: f64) -> f64 {
    rows.iter().map(|r| r.mean_error.ln() - exponent * r.delta.ln()).sum::<f64>() / rows.len() as f64
}

fn method_order(rows: &[AggregateRow]) -> Vec<String> {
    let mut order: Vec<String> = Vec::new();
    for r in rows {
        if !order.contains(&r.method) {
            order.push(r.method.clone());
        }
    }
    order
}

fn class_name(method: &str) -> String {
    method.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' }).collect()
}

/// Log-log chart of mean error against delta with +-1 std error bars, one
/// polyline per method, and for each method a dashed `delta^exponent`
/// reference line through its least-squares intercept.
pub fn emit_plot(rows: &[AggregateRow], reference_exponent: f64) -> Result<String, CliError> {
    if rows.is_empty() {
        return Err(CliError::Invalid("cannot plot an empty table".into()));
    }
    if !reference_exponent.is_finite() {
        return Err(CliError::Invalid("reference exponent must be finite".into()));
    }
    for r in rows {
        if !(r.delta > 0.0 && r.mean_error > 0.0 && r.delta.is_finite() && r.mean_error.is_finite()) {
            return Err(CliError::Invalid(format!(
                "cannot place delta {} / error {} on log axes",
                r.delta, r.mean_error
            )));
        }
    }
    let methods = method_order(rows);
    let intercepts: Vec<f64> = methods
        .iter()
        .map(|m| {
            let sel: Vec<&AggregateRow> = rows.iter().filter(|r| &r.method == m).collect();
            reference_intercept(&sel, reference_exponent)
        })
        .collect();

    let (mut xlo, mut xhi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in rows {
        let lx = r.delta.log10();
        xlo = xlo.min(lx);
        xhi = xhi.max(lx);
        let low = r.mean_error - r.std_error;
        let low = if low > 0.0 { low } else { r.mean_error };
        ylo = ylo.min(low.log10());
        yhi = yhi.max((r.mean_error + r.std_error).log10());
    }
    let (x0, x1) = padded(xlo, xhi);
    for &c in &intercepts {
        for lx in [x0, x1] {
            let ly = (c + reference_exponent * lx * std::f64::consts::LN_10) / std::f64::consts::LN_10;
            ylo = ylo.min(ly);
            yhi = yhi.max(ly);
        }
    }
    let (y0, y1) = padded(ylo, yhi);
    let f = Frame { x0, x1, y0, y1 };

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    s.push_str(
        "<style>\n\
         .axis { stroke: #000; stroke-width: 1; }\n\
         .tick { stroke: #000; stroke-width: 1; }\n\
         .grid { stroke: #ddd; stroke-width: 0.5; }\n\
         text { font-family: sans-serif; font-size: 12px; }\n\
         .reference { fill: none; stroke-width: 1.2; stroke-dasharray: 6 4; }\n\
         .series { fill: none; stroke-width: 1.8; }\n\
         .errorbar { stroke-width: 1.2; }\n\
         </style>\n",
    );
    writeln!(s, r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#fff"/>"##).unwrap();

    let (left, right, top, bottom) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    for k in decade_ticks(x0, x1) {
        let x = f.px(k);
        writeln!(s, r#"<line class="grid" x1="{x:.3}" y1="{top:.3}" x2="{x:.3}" y2="{bottom:.3}"/>"#).unwrap();
        writeln!(s, r#"<line class="tick" x1="{x:.3}" y1="{bottom:.3}" x2="{x:.3}" y2="{:.3}"/>"#, bottom + 5.0)
            .unwrap();
        writeln!(s, r#"<text x="{x:.3}" y="{:.3}" text-anchor="middle">{}</text>"#, bottom + 18.0, tick_label(k))
            .unwrap();
    }
    for k in decade_ticks(y0, y1) {
        let y = f.py(k);
        writeln!(s, r#"<line class="grid" x1="{left:.3}" y1="{y:.3}" x2="{right:.3}" y2="{y:.3}"/>"#).unwrap();
        writeln!(s, r#"<line class="tick" x1="{:.3}" y1="{y:.3}" x2="{left:.3}" y2="{y:.3}"/>"#, left - 5.0).unwrap();
        writeln!(s, r#"<text x="{:.3}" y="{:.3}" text-anchor="end">{}</text>"#, left - 8.0, y + 4.0, tick_label(k))
            .unwrap();
    }
    writeln!(s, r#"<line class="axis" x1="{left:.3}" y1="{bottom:.3}" x2="{right:.3}" y2="{bottom:.3}"/>"#).unwrap();
    writeln!(s, r#"<line class="axis" x1="{left:.3}" y1="{top:.3}" x2="{left:.3}" y2="{bottom:.3}"/>"#).unwrap();
    writeln!(
        s,
        r#"<text class="axis-label" x="{:.3}" y="{:.3}" text-anchor="middle">delta</text>"#,
        (left + right) / 2.0,
        HEIGHT - 15.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text class="axis-label" x="20" y="{:.3}" text-anchor="middle" transform="rotate(-90 20 {:.3})">error</text>"#,
        (top + bottom) / 2.0,
        (top + bottom) / 2.0
    )
    .unwrap();

    for (mi, m) in methods.iter().enumerate() {
        let color = COLORS[mi % COLORS.len()];
        let cls = class_name(m);
        let c = intercepts[mi];
        let ly = |lx: f64| (c + reference_exponent * lx * std::f64::consts::LN_10) / std::f64::consts::LN_10;
        writeln!(
            s,
            r#"<line class="reference reference-{cls}" stroke="{color}" x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/>"#,
            f.px(x0),
            f.py(ly(x0)),
            f.px(x1),
            f.py(ly(x1))
        )
        .unwrap();

        let sel: Vec<&AggregateRow> = rows.iter().filter(|r| &r.method == m).collect();
        for r in &sel {
            let x = f.px(r.delta.log10());
            let lo = r.mean_error - r.std_error;
            let lo = if lo > 0.0 { f.py(lo.log10()) } else { bottom };
            let hi = f.py((r.mean_error + r.std_error).log10());
            writeln!(
                s,
                r#"<line class="errorbar errorbar-{cls}" stroke="{color}" x1="{x:.3}" y1="{lo:.3}" x2="{x:.3}" y2="{hi:.3}"/>"#
            )
            .unwrap();
        }
        let points: Vec<String> =
            sel.iter().map(|r| format!("{:.3},{:.3}", f.px(r.delta.log10()), f.py(r.mean_error.log10()))).collect();
        writeln!(s, r#"<polyline class="series series-{cls}" stroke="{color}" points="{}"/>"#, points.join(" "))
            .unwrap();
        for r in &sel {
            writeln!(
                s,
                r#"<circle class="marker marker-{cls}" fill="{color}" cx="{:.3}" cy="{:.3}" r="3"/>"#,
                f.px(r.delta.log10()),
                f.py(r.mean_error.log10())
            )
            .unwrap();
        }

        let ly0 = TOP + 10.0 + 36.0 * mi as f64;
        let lx0 = WIDTH - RIGHT + 15.0;
        writeln!(
            s,
            r#"<line class="legend-series" stroke="{color}" stroke-width="1.8" x1="{lx0:.3}" y1="{ly0:.3}" x2="{:.3}" y2="{ly0:.3}"/>"#,
            lx0 + 20.0
        )
        .unwrap();
        writeln!(s, r#"<text x="{:.3}" y="{:.3}">{}</text>"#, lx0 + 26.0, ly0 + 4.0, escape(m)).unwrap();
        writeln!(
            s,
            r#"<line class="legend-reference" stroke="{color}" stroke-dasharray="6 4" x1="{lx0:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/>"#,
            ly0 + 16.0,
            lx0 + 20.0,
            ly0 + 16.0
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.3}" y="{:.3}">c delta^{}</text>"#,
            lx0 + 26.0,
            ly0 + 20.0,
            trim_float(reference_exponent)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn decade_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let ticks: Vec<f64> = (lo.ceil() as i64..=hi.floor() as i64).map(|k| k as f64).collect();
    if ticks.len() >= 2 {
        return ticks;
    }
    // less than a decade in view: add 2x and 5x subdivisions
    let mut out = Vec::new();
    for k in (lo.floor() as i64)..=(hi.ceil() as i64) {
        for m in [1.0f64, 2.0, 5.0] {
            let t = k as f64 + m.log10();
            if t >= lo && t <= hi {
                out.push(t);
            }
        }
    }
    out
}

fn tick_label(t: f64) -> String {
    let v = 10f64.powf(t);
    if t.fract().abs() < 1e-9 {
        format!("1e{}", t.round() as i64)
    } else {
        format!("{:.0e}", v)
    }
}

fn trim_float(v: f64) -> String {
    let s = format!("{v:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: &str, delta: f64, err: f64) -> AggregateRow {
        AggregateRow { method: method.into(), delta, mean_error: err, std_error: 0.1 * err, n_ok: 3 }
    }

    #[test]
    fn empty_table_is_an_error() {
        assert!(matches!(emit_plot(&[], 2.0 / 3.0), Err(CliError::Invalid(_))));
    }

    #[test]
    fn nonpositive_values_rejected() {
        assert!(emit_plot(&[row("nn", 0.1, 0.0)], 0.5).is_err());
    }

    #[test]
    fn element_counts() {
        let rows: Vec<AggregateRow> = (0..6).map(|k| row("tikhonov", 0.1 / (k + 1) as f64, 1.0 + k as f64)).collect();
        let svg = emit_plot(&rows, 2.0 / 3.0).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("class=\"errorbar ").count(), 6);
        assert_eq!(svg.matches("class=\"reference ").count(), 1);
        assert!(svg.contains(">delta</text>") && svg.contains(">error</text>"));
    }

    #[test]
    fn tick_labels() {
        assert_eq!(tick_label(-2.0), "1e-2");
        assert_eq!(tick_label(2f64.log10()), "2e0");
        assert_eq!(decade_ticks(-3.2, -0.9), vec![-3.0, -2.0, -1.0]);
        assert_eq!(decade_ticks(0.1, 0.8).len(), 2);
    }
}
