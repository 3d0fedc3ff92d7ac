//! Minimal SVG charts for size distributions and segregation reports.
//!
//! Styling is cosmetic; the numbers live in the JSON and CSV outputs.

use std::fmt::Write as _;

use crate::graindist::{SectionReport, SegregationReport, SizeDistribution, DistributionMode};

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 56.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 48.0;
const COLORS: [&str; 3] = ["#1f77b4", "#2ca02c", "#d62728"];

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn frac(&self, v: f64) -> f64 {
        let (v, lo, hi) = if self.log {
            (v.max(self.lo).log10(), self.lo.log10(), self.hi.log10())
        } else {
            (v, self.lo, self.hi)
        };
        if hi > lo {
            (v - lo) / (hi - lo)
        } else {
            0.5
        }
    }

    fn x(&self, v: f64) -> f64 {
        LEFT + self.frac(v) * (W - LEFT - RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        H - BOTTOM - self.frac(v) * (H - TOP - BOTTOM)
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let mut t = Vec::new();
            let mut p = 10f64.powf(self.lo.log10().floor());
            while p <= self.hi * 1.0001 {
                if p >= self.lo * 0.9999 {
                    t.push(p);
                }
                p *= 10.0;
            }
            t
        } else {
            (0..=5).map(|i| self.lo + (self.hi - self.lo) * i as f64 / 5.0).collect()
        }
    }
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn frame(s: &mut String, xa: &Axis, ya: &Axis, xlabel: &str, ylabel: &str) {
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
    let _ = writeln!(s, r##"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="#333"/>"##, x1 - x0, y0 - y1);
    for t in xa.ticks() {
        let x = xa.x(t);
        let _ = writeln!(s, r##"<line x1="{x:.1}" y1="{y0}" x2="{x:.1}" y2="{}" stroke="#333"/>"##, y0 + 4.0);
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{}" text-anchor="middle">{}</text>"#, y0 + 16.0, tick_label(t));
    }
    for t in ya.ticks() {
        let y = ya.y(t);
        let _ = writeln!(s, r##"<line x1="{}" y1="{y:.1}" x2="{x0}" y2="{y:.1}" stroke="#333"/>"##, x0 - 4.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, x0 - 6.0, y + 4.0, tick_label(t));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 10.0, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Histogram of bin shares on a log diameter axis with the cumulative curve
/// overlaid (right-hand axis, 0..100 %).
pub fn distribution_svg(dist: &SizeDistribution, title: &str) -> String {
    let mut s = header(title);
    let positive: Vec<f64> = dist.cumulative.iter().map(|p| p.0).filter(|&d| d > 0.0).collect();
    let lo = positive.iter().copied().fold(f64::INFINITY, f64::min).min(dist.bin_width);
    let hi = dist.bin_edges.last().copied().unwrap_or(1.0).max(lo * 10.0);
    let xa = Axis { lo: if lo.is_finite() { lo } else { 0.1 }, hi, log: true };
    let top = dist.bin_shares.iter().copied().fold(0.0, f64::max).max(1e-9) * 100.0;
    let ya = Axis { lo: 0.0, hi: top * 1.1, log: false };
    let ylabel = match dist.mode {
        DistributionMode::Count => "count share (%)",
        DistributionMode::Volume => "volume share (%)",
    };
    frame(&mut s, &xa, &ya, "equivalent diameter d (cm)", ylabel);
    for (i, share) in dist.bin_shares.iter().enumerate() {
        if *share <= 0.0 {
            continue;
        }
        let xl = xa.x(dist.bin_edges[i].max(xa.lo));
        let xr = xa.x(dist.bin_edges[i + 1]);
        let yt = ya.y(share * 100.0);
        let _ = writeln!(
            s,
            r##"<rect x="{xl:.2}" y="{yt:.2}" width="{:.2}" height="{:.2}" fill="#8fb3d9" stroke="#4a7bb0" stroke-width="0.5"/>"##,
            (xr - xl).max(0.5),
            (H - BOTTOM - yt).max(0.0)
        );
    }
    let fa = Axis { lo: 0.0, hi: 100.0, log: false };
    let pts: Vec<String> = dist
        .cumulative
        .iter()
        .map(|&(d, f)| format!("{:.2},{:.2}", xa.x(d.max(xa.lo)), fa.y(f * 100.0)))
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#d62728" stroke-dasharray="4 2" stroke-width="1.5"/>"##,
        pts.join(" ")
    );
    for t in fa.ticks() {
        let y = fa.y(t);
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}">{}</text>"#, W - RIGHT + 6.0, y + 4.0, tick_label(t));
    }
    s.push_str("</svg>\n");
    s
}

/// Section means with 95 % interval bars for d10, d50 and d90.
pub fn sections_svg(sections: &[SectionReport]) -> String {
    let mut s = header("Characteristic diameters by section");
    let hi = sections
        .iter()
        .flat_map(|r| r.ci95.iter().map(|c| c.high).chain(r.mean.as_array()))
        .fold(0.0, f64::max)
        .max(1e-9);
    let xa = Axis { lo: 0.5, hi: sections.len() as f64 + 0.5, log: false };
    let ya = Axis { lo: 0.0, hi: hi * 1.1, log: false };
    frame(&mut s, &xa, &ya, "section", "diameter (cm)");
    for (k, name) in ["d10", "d50", "d90"].iter().enumerate() {
        let off = (k as f64 - 1.0) * 0.12;
        for (i, r) in sections.iter().enumerate() {
            let x = xa.x(i as f64 + 1.0 + off);
            let ci = r.ci95[k];
            let _ = writeln!(
                s,
                r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="{}"/>"#,
                ya.y(ci.low),
                ya.y(ci.high),
                COLORS[k]
            );
            let _ = writeln!(s, r#"<circle cx="{x:.1}" cy="{:.1}" r="3.5" fill="{}"/>"#, ya.y(r.mean.as_array()[k]), COLORS[k]);
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" fill="{}">{name}</text>"#, LEFT + 10.0, TOP + 14.0 + 14.0 * k as f64, COLORS[k]);
    }
    for (i, r) in sections.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
            xa.x(i as f64 + 1.0),
            TOP - 4.0,
            escape(&r.section_id)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Relative characteristic diameters per section with their fitted lines.
pub fn segregation_svg(seg: &SegregationReport) -> String {
    let mut s = header("Relative characteristic diameters");
    let n = seg.sections.len() as f64;
    let hi = seg
        .sections
        .iter()
        .flat_map(|r| r.ratios)
        .fold(1.0, f64::max);
    let xa = Axis { lo: 0.5, hi: n + 0.5, log: false };
    let ya = Axis { lo: 0.0, hi: hi * 1.15, log: false };
    frame(&mut s, &xa, &ya, "section index", "d / d'");
    let _ = writeln!(
        s,
        r##"<line x1="{LEFT}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#999" stroke-dasharray="2 2"/>"##,
        W - RIGHT,
        y = ya.y(1.0)
    );
    for (k, name) in ["d10/d'10", "d50/d'50", "d90/d'90"].iter().enumerate() {
        for r in &seg.sections {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3.5" fill="{}"/>"#,
                xa.x(r.index as f64),
                ya.y(r.ratios[k]),
                COLORS[k]
            );
        }
        let f = seg.fits[k];
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{}"/>"#,
            xa.x(1.0),
            ya.y(f.slope + f.intercept),
            xa.x(n),
            ya.y(f.slope * n + f.intercept),
            COLORS[k]
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{}">{name}: slope {:.3}</text>"#,
            LEFT + 10.0,
            TOP + 14.0 + 14.0 * k as f64,
            COLORS[k],
            f.slope
        );
    }
    s.push_str("</svg>\n");
    s
}
