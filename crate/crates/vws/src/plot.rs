//! Minimal SVG line plots written as text.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
            dashed: false,
        }
    }

    /// Reference line `c·x^slope` through the first point of `anchor`.
    pub fn slope(label: impl Into<String>, anchor: &[(f64, f64)], slope: f64) -> Self {
        let points = match anchor.first() {
            Some(&(x0, y0)) => anchor.iter().map(|&(x, _)| (x, y0 * (x / x0).powf(slope))).collect(),
            None => Vec::new(),
        };
        Self {
            label: label.into(),
            points,
            dashed: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

impl Plot {
    pub fn loglog(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_x: true,
            log_y: true,
            series: Vec::new(),
        }
    }

    pub fn linear(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            log_x: false,
            log_y: false,
            ..Self::loglog(title, x_label, y_label)
        }
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    fn usable(&self, (x, y): (f64, f64)) -> bool {
        x.is_finite() && y.is_finite() && (!self.log_x || x > 0.0) && (!self.log_y || y > 0.0)
    }

    pub fn to_svg(&self) -> String {
        let tx = |v: f64| if self.log_x { v.log10() } else { v };
        let ty = |v: f64| if self.log_y { v.log10() } else { v };
        let pts: Vec<(f64, f64)> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().copied())
            .filter(|&p| self.usable(p))
            .map(|(x, y)| (tx(x), ty(y)))
            .collect();
        let (mut x0, mut x1, mut y0, mut y1) = pts.iter().fold(
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
        );
        if pts.is_empty() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        pad(&mut x0, &mut x1, self.log_x);
        pad(&mut y0, &mut y1, self.log_y);
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |v: f64| LEFT + (v - x0) / (x1 - x0) * pw;
        let sy = |v: f64| TOP + ph - (v - y0) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for v in ticks(x0, x1, self.log_x) {
            let px = sx(v);
            let _ = writeln!(
                s,
                r##"<line x1="{px:.1}" y1="{TOP}" x2="{px:.1}" y2="{:.1}" stroke="#ddd"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
                TOP + ph,
                TOP + ph + 16.0,
                tick_label(v, self.log_x)
            );
        }
        for v in ticks(y0, y1, self.log_y) {
            let py = sy(v);
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
                LEFT + pw,
                LEFT - 6.0,
                py + 4.0,
                tick_label(v, self.log_y)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            H - 18.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );
        for (k, series) in self.series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let coords: Vec<String> = series
                .points
                .iter()
                .copied()
                .filter(|&p| self.usable(p))
                .map(|(x, y)| format!("{:.2},{:.2}", sx(tx(x)), sy(ty(y))))
                .collect();
            let dash = if series.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"{dash}/>"#,
                coords.join(" ")
            );
            if !series.dashed {
                for c in &coords {
                    let (cx, cy) = c.split_once(',').unwrap();
                    let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>"#);
                }
            }
            let ly = TOP + 14.0 + 18.0 * k as f64;
            let lx = LEFT + pw + 12.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
                lx + 22.0,
                lx + 28.0,
                ly + 4.0,
                escape(&series.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn pad(lo: &mut f64, hi: &mut f64, log: bool) {
    if (*hi - *lo).abs() < 1e-12 {
        let d = if log { 0.5 } else { lo.abs().max(1.0) * 0.1 };
        *lo -= d;
        *hi += d;
    } else {
        let d = 0.05 * (*hi - *lo);
        *lo -= d;
        *hi += d;
    }
}

/// Tick positions in transformed coordinates.
fn ticks(lo: f64, hi: f64, log: bool) -> Vec<f64> {
    if log {
        let mut t: Vec<f64> = (lo.ceil() as i64..=hi.floor() as i64).map(|e| e as f64).collect();
        if t.len() < 2 {
            // sub-decade range: mark 1-2-5 steps
            t = (lo.floor() as i64..=hi.ceil() as i64)
                .flat_map(|e| [1.0, 2.0, 5.0].map(|m: f64| (m * 10f64.powi(e as i32)).log10()))
                .filter(|v| *v >= lo && *v <= hi)
                .collect();
        }
        t
    } else {
        let raw = (hi - lo) / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(raw);
        let mut v = (lo / step).ceil() * step;
        let mut t = Vec::new();
        while v <= hi + 1e-12 * step {
            t.push(v);
            v += step;
        }
        t
    }
}

fn tick_label(v: f64, log: bool) -> String {
    let x = if log { 10f64.powf(v) } else { v };
    if x != 0.0 && (x.abs() < 1e-2 || x.abs() >= 1e4) {
        format!("{x:.0e}")
    } else {
        let s = format!("{x:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_is_well_formed_and_skips_nonpositive_on_log_axes() {
        let p = Plot::loglog("gap <vs> h", "h", "gap")
            .with(Series::new("a", vec![(0.1, 1.0), (0.05, 0.25), (0.025, 0.0)]))
            .with(Series::slope("slope 2", &[(0.1, 1.0), (0.05, 0.25)], 2.0));
        let svg = p.to_svg();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("gap &lt;vs&gt; h"));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn empty_and_flat_plots_render() {
        assert!(Plot::linear("e", "x", "y").to_svg().contains("</svg>"));
        let flat = Plot::linear("f", "x", "y").with(Series::new("c", vec![(1.0, 2.0), (2.0, 2.0)]));
        assert!(!flat.to_svg().contains("NaN"));
    }

    #[test]
    fn tick_generation() {
        assert_eq!(ticks(-3.2, -0.8, true), vec![-3.0, -2.0, -1.0]);
        let lin = ticks(0.0, 1.0, false);
        assert_eq!(lin.len(), 6);
        assert_eq!(tick_label(-3.0, true), "1e-3");
        assert_eq!(tick_label(-2.0, true), "0.01");
        assert_eq!(tick_label(0.5, false), "0.5");
    }
}
