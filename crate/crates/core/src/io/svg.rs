//! Standalone SVG plots: profiles and bands on log-log axes, comparison
//! tables as bar charts.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub dashed: bool,
}

/// Shaded region between `lo` and `hi`.
#[derive(Debug, Clone)]
pub struct Band {
    pub label: String,
    pub x: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct LogPlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub bands: Vec<Band>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
}

/// Decade range covering the positive values.
fn log_range<'a>(values: impl Iterator<Item = &'a f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite() && **v > 0.0)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    if !lo.is_finite() {
        return None;
    }
    let lo = lo.log10().floor();
    let hi = hi.log10().ceil().max(lo + 1.0);
    Some((lo, hi))
}

impl LogPlot {
    pub fn render(&self) -> String {
        let xs = self.series.iter().flat_map(|s| &s.x).chain(self.bands.iter().flat_map(|b| &b.x));
        let ys = self
            .series
            .iter()
            .flat_map(|s| &s.y)
            .chain(self.bands.iter().flat_map(|b| b.lo.iter().chain(&b.hi)));
        let (x0, x1) = log_range(xs).unwrap_or((0.0, 1.0));
        let (y0, y1) = log_range(ys).unwrap_or((0.0, 1.0));
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let px = |x: f64| LEFT + (x.log10() - x0) / (x1 - x0) * pw;
        let py = |y: f64| TOP + ph - (y.log10() - y0) / (y1 - y0) * ph;

        let mut out = String::new();
        header(&mut out, &self.title);
        let _ = writeln!(out, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        for d in x0 as i32..=x1 as i32 {
            let x = px(10f64.powi(d));
            let _ = writeln!(out, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/>"##, TOP + ph);
            let _ = writeln!(out, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{d}</text>"#, TOP + ph + 16.0);
        }
        for d in y0 as i32..=y1 as i32 {
            let y = py(10f64.powi(d));
            let _ = writeln!(out, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, LEFT + pw);
            let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"#, LEFT - 6.0, y + 4.0);
        }
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 14.0, escape(&self.x_label));
        let _ = writeln!(
            out,
            r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        let ok = |x: f64, y: f64| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite();
        let mut legend = Vec::new();
        for (k, b) in self.bands.iter().enumerate() {
            let color = COLORS[(k + 2) % COLORS.len()];
            let idx: Vec<usize> = (0..b.x.len()).filter(|&i| ok(b.x[i], b.lo[i]) && ok(b.x[i], b.hi[i])).collect();
            if idx.is_empty() {
                continue;
            }
            let mut pts: Vec<String> = idx.iter().map(|&i| format!("{:.2},{:.2}", px(b.x[i]), py(b.hi[i]))).collect();
            pts.extend(idx.iter().rev().map(|&i| format!("{:.2},{:.2}", px(b.x[i]), py(b.lo[i]))));
            let _ = writeln!(out, r#"<polygon points="{}" fill="{color}" fill-opacity="0.25" stroke="none"/>"#, pts.join(" "));
            legend.push((b.label.clone(), color, false, true));
        }
        for (k, s) in self.series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let pts: Vec<String> = s
                .x
                .iter()
                .zip(&s.y)
                .filter(|(x, y)| ok(**x, **y))
                .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
                .collect();
            let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#, pts.join(" "));
            legend.push((s.label.clone(), color, s.dashed, false));
        }
        for (k, (label, color, dashed, area)) in legend.iter().enumerate() {
            let y = TOP + 14.0 + 16.0 * k as f64;
            let x = LEFT + pw - 150.0;
            if *area {
                let _ = writeln!(out, r#"<rect x="{x:.2}" y="{:.2}" width="24" height="8" fill="{color}" fill-opacity="0.25"/>"#, y - 4.0);
            } else {
                let dash = if *dashed { r#" stroke-dasharray="6 4""# } else { "" };
                let _ = writeln!(out, r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="1.5"{dash}/>"#, x + 24.0);
            }
            let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, x + 30.0, y + 4.0, escape(label));
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Bars with one-standard-error whiskers.
pub fn bar_chart(title: &str, y_label: &str, bars: &[(String, f64, f64)]) -> String {
    let top = bars.iter().map(|(_, m, e)| m + e.max(0.0)).filter(|v| v.is_finite()).fold(0.0, f64::max);
    let top = if top > 0.0 { top * 1.1 } else { 1.0 };
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let py = |v: f64| TOP + ph - v / top * ph;
    let mut out = String::new();
    header(&mut out, title);
    let _ = writeln!(out, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for k in 0..=4 {
        let v = top * k as f64 / 4.0;
        let y = py(v);
        let _ = writeln!(out, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, LEFT + pw);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.3}</text>"#, LEFT - 6.0, y + 4.0);
    }
    let _ = writeln!(out, r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#, TOP + ph / 2.0, escape(y_label));
    let slot = pw / bars.len().max(1) as f64;
    for (k, (label, mean, se)) in bars.iter().enumerate() {
        let cx = LEFT + slot * (k as f64 + 0.5);
        let color = COLORS[k % COLORS.len()];
        if mean.is_finite() {
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
                cx - slot * 0.3,
                py(*mean),
                slot * 0.6,
                py(0.0) - py(*mean)
            );
            if se.is_finite() && *se > 0.0 {
                let _ = writeln!(
                    out,
                    r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
                    py(mean + se),
                    py((mean - se).max(0.0))
                );
            }
        }
        let _ = writeln!(out, r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 16.0, escape(label));
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_plot_is_wellformed_and_skips_nonpositive() {
        let p = LogPlot {
            title: "a < b".into(),
            x_label: "radius".into(),
            y_label: "emissivity".into(),
            series: vec![Series { label: "fit".into(), x: vec![1.0, 2.0, 4.0], y: vec![1.0, 0.0, 0.01], dashed: false }],
            bands: vec![Band { label: "95%".into(), x: vec![1.0, 2.0], lo: vec![0.5, 0.2], hi: vec![2.0, 1.0] }],
        };
        let svg = p.render();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b"));
        assert!(svg.contains("<polygon"));
        let line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        assert_eq!(line.matches(',').count(), 2);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn bar_chart_has_one_bar_per_row() {
        let svg = bar_chart("t", "mse", &[("qut_lasso".into(), 7.0, 0.5), ("onion".into(), 31.0, 3.0)]);
        assert_eq!(svg.matches("<rect").count(), 2 + 2);
    }
}
