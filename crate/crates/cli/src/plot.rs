//! Static SVG line charts.

use std::fmt::Write;

use imcf_profile::RadialProfile;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

pub struct Chart<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    /// Plot `log10 x`; nonpositive x are dropped.
    pub log_x: bool,
    pub points: Vec<(f64, f64)>,
    /// Horizontal reference line and its label.
    pub rule: Option<(f64, String)>,
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 {
        "0".into()
    } else if !(1e-2..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= 1e-12 * lo.abs().max(1.0) {
        let pad = 0.5 * lo.abs().max(1.0);
        return (lo - pad, hi + pad);
    }
    let pad = 0.04 * (hi - lo);
    (lo - pad, hi + pad)
}

impl Chart<'_> {
    pub fn render(&self) -> String {
        let pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite() && (!self.log_x || *x > 0.0))
            .map(|&(x, y)| (if self.log_x { x.log10() } else { x }, y))
            .collect();
        let (x0, x1) = span(pts.iter().map(|p| p.0));
        let (y0, y1) = span(pts.iter().map(|p| p.1).chain(self.rule.as_ref().map(|r| r.0)));
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(self.title)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );

        let x_ticks: Vec<f64> = if self.log_x {
            (x0.ceil() as i32..=x1.floor() as i32).map(f64::from).collect()
        } else {
            (0..=5).map(|k| x0 + (x1 - x0) * f64::from(k) / 5.0).collect()
        };
        for xt in x_ticks {
            let px = sx(xt);
            let label = if self.log_x { format!("1e{}", xt as i32) } else { tick_label(xt) };
            let _ = writeln!(
                s,
                r##"<line x1="{px:.2}" y1="{TOP}" x2="{px:.2}" y2="{:.2}" stroke="#ddd"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{label}</text>"##,
                TOP + ph,
                TOP + ph + 18.0
            );
        }
        for k in 0..=5 {
            let yt = y0 + (y1 - y0) * f64::from(k) / 5.0;
            let py = sy(yt);
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                LEFT + pw,
                LEFT - 6.0,
                py + 4.0,
                tick_label(yt)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 16.0,
            escape(self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(self.y_label)
        );

        if let Some((y, label)) = &self.rule {
            let py = sy(*y);
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#c33" stroke-dasharray="6 4"/><text x="{:.2}" y="{:.2}" text-anchor="end" fill="#c33">{}</text>"##,
                LEFT + pw,
                LEFT + pw - 6.0,
                py - 6.0,
                escape(label)
            );
        }
        if !pts.is_empty() {
            let mut path = String::new();
            for (i, (x, y)) in pts.iter().enumerate() {
                let _ = write!(path, "{}{:.2},{:.2}", if i == 0 { "M" } else { " L" }, sx(*x), sy(*y));
            }
            let _ = writeln!(s, r##"<path d="{path}" fill="none" stroke="#1f5fa8" stroke-width="1.5"/>"##);
        }
        s.push_str("</svg>\n");
        s
    }
}

/// `f` against `r` and `q` against `r` (where `f > 0`), both with a log
/// radius axis.
pub fn profile_charts(profile: &RadialProfile, alpha0: Option<f64>) -> (String, String) {
    let p = profile.params();
    let tag = format!("n = {}, lambda = {}, mu = {}", p.n(), p.lambda(), p.mu());
    let f = Chart {
        title: &format!("profile f(r), {tag}"),
        x_label: "r",
        y_label: "f",
        log_x: true,
        points: profile.points().iter().map(|q| (q.r, q.f)).collect(),
        rule: None,
    }
    .render();
    let q = Chart {
        title: &format!("slope ratio q = r f_r / f, {tag}"),
        x_label: "r",
        y_label: "q",
        log_x: true,
        points: profile.points().iter().filter_map(|pt| pt.q().map(|q| (pt.r, q))).collect(),
        rule: alpha0.map(|a| (a, format!("alpha0 = {}", tick_label(a)))),
    }
    .render();
    (f, q)
}
