//! Minimal static SVG plots: scatter and line series, optional log axes, an
//! optional y = x reference, and an optional right-hand [0,1] axis for
//! acceptance overlays. No external plotting dependency; batch outputs only.

use std::fmt::Write as _;
use std::path::Path;

use llc_core::Result;

const W: f64 = 760.0;
const H: f64 = 520.0;
const ML: f64 = 72.0; // margins
const MR: f64 = 64.0;
const MT: f64 = 44.0;
const MB: f64 = 56.0;

const COLORS: [&str; 6] = [
    "#1f6fb2", "#d95f02", "#1b9e77", "#7570b3", "#c02942", "#666666",
];

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum SeriesStyle {
    Points,
    Line,
    /// Rendered against the right-hand [0,1] axis.
    RightAxisPoints,
}

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: SeriesStyle,
    /// Optional vertical error bar half-heights, matched to points.
    pub bars: Option<Vec<f64>>,
}

impl Series {
    pub fn points(label: &str, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            points,
            style: SeriesStyle::Points,
            bars: None,
        }
    }

    pub fn line(label: &str, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            points,
            style: SeriesStyle::Line,
            bars: None,
        }
    }
}

pub struct Plot {
    pub title: String,
    pub xlabel: String,
    pub ylabel: String,
    pub logx: bool,
    pub logy: bool,
    pub identity_line: bool,
    pub right_ylabel: Option<String>,
    pub series: Vec<Series>,
}

impl Plot {
    pub fn new(title: &str, xlabel: &str, ylabel: &str) -> Self {
        Plot {
            title: title.into(),
            xlabel: xlabel.into(),
            ylabel: ylabel.into(),
            logx: false,
            logy: false,
            identity_line: false,
            right_ylabel: None,
            series: Vec::new(),
        }
    }

    fn tx(&self, v: f64) -> f64 {
        if self.logx {
            v.log10()
        } else {
            v
        }
    }

    fn ty(&self, v: f64) -> f64 {
        if self.logy {
            v.log10()
        } else {
            v
        }
    }

    pub fn render_to(&self, path: &Path) -> Result<()> {
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for s in &self.series {
            for &(x, y) in &s.points {
                let (px, py) = (self.tx(x), self.ty(y));
                if px.is_finite() {
                    xs.push(px);
                }
                if py.is_finite() && s.style != SeriesStyle::RightAxisPoints {
                    ys.push(py);
                }
            }
        }
        if xs.is_empty() {
            xs = vec![0.0, 1.0];
        }
        if ys.is_empty() {
            ys = vec![0.0, 1.0];
        }
        let (mut x0, mut x1) = min_max(&xs);
        let (mut y0, mut y1) = min_max(&ys);
        if self.identity_line {
            x0 = x0.min(y0);
            x1 = x1.max(y1);
            y0 = x0;
            y1 = x1;
        }
        pad(&mut x0, &mut x1);
        pad(&mut y0, &mut y1);

        let sx = |v: f64| ML + (self.tx(v) - x0) / (x1 - x0) * (W - ML - MR);
        let sy = |v: f64| H - MB - (self.ty(v) - y0) / (y1 - y0) * (H - MT - MB);
        let sy_right = |v: f64| H - MB - v.clamp(0.0, 1.0) * (H - MT - MB);

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
             viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">"
        );
        let _ = writeln!(svg, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
            W / 2.0,
            esc(&self.title)
        );
        // frame
        let _ = writeln!(
            svg,
            "<rect x=\"{ML}\" y=\"{MT}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>",
            W - ML - MR,
            H - MT - MB
        );
        // ticks
        for i in 0..=4 {
            let fx = x0 + (x1 - x0) * i as f64 / 4.0;
            let px = ML + (W - ML - MR) * i as f64 / 4.0;
            let label = tick_label(fx, self.logx);
            let _ = writeln!(
                svg,
                "<line x1=\"{px}\" y1=\"{}\" x2=\"{px}\" y2=\"{}\" stroke=\"#333\"/>\
                 <text x=\"{px}\" y=\"{}\" text-anchor=\"middle\">{label}</text>",
                H - MB,
                H - MB + 5.0,
                H - MB + 20.0
            );
            let fy = y0 + (y1 - y0) * i as f64 / 4.0;
            let py = H - MB - (H - MT - MB) * i as f64 / 4.0;
            let label = tick_label(fy, self.logy);
            let _ = writeln!(
                svg,
                "<line x1=\"{}\" y1=\"{py}\" x2=\"{ML}\" y2=\"{py}\" stroke=\"#333\"/>\
                 <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{label}</text>",
                ML - 5.0,
                ML - 8.0,
                py + 4.0
            );
        }
        if self.right_ylabel.is_some() {
            for i in 0..=4 {
                let v = i as f64 / 4.0;
                let py = sy_right(v);
                let _ = writeln!(
                    svg,
                    "<text x=\"{}\" y=\"{}\" text-anchor=\"start\" fill=\"#d95f02\">{v:.2}</text>",
                    W - MR + 8.0,
                    py + 4.0
                );
            }
        }
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            W / 2.0,
            H - 12.0,
            esc(&self.xlabel)
        );
        let _ = writeln!(
            svg,
            "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>",
            H / 2.0,
            H / 2.0,
            esc(&self.ylabel)
        );
        if let Some(rl) = &self.right_ylabel {
            let _ = writeln!(
                svg,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"#d95f02\" \
                 transform=\"rotate(90 {} {})\">{}</text>",
                W - 14.0,
                H / 2.0,
                W - 14.0,
                H / 2.0,
                esc(rl)
            );
        }
        if self.identity_line {
            let lo = x0.max(y0);
            let hi = x1.min(y1);
            let inv = |t: f64| if self.logx { 10f64.powf(t) } else { t };
            let _ = writeln!(
                svg,
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#999\" stroke-dasharray=\"5,4\"/>",
                sx(inv(lo)),
                sy(inv(lo)),
                sx(inv(hi)),
                sy(inv(hi))
            );
        }
        for (si, s) in self.series.iter().enumerate() {
            let color = if s.style == SeriesStyle::RightAxisPoints {
                "#d95f02"
            } else {
                COLORS[si % COLORS.len()]
            };
            match s.style {
                SeriesStyle::Line => {
                    let mut d = String::new();
                    for (i, &(x, y)) in s.points.iter().enumerate() {
                        let (px, py) = (sx(x), sy(y));
                        if !px.is_finite() || !py.is_finite() {
                            continue;
                        }
                        let _ = write!(d, "{}{px:.1},{py:.1} ", if i == 0 { "M" } else { "L" });
                    }
                    let _ = writeln!(
                        svg,
                        "<path d=\"{d}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\"/>"
                    );
                }
                SeriesStyle::Points | SeriesStyle::RightAxisPoints => {
                    for (pi, &(x, y)) in s.points.iter().enumerate() {
                        let px = sx(x);
                        let py = if s.style == SeriesStyle::RightAxisPoints {
                            sy_right(y)
                        } else {
                            sy(y)
                        };
                        if !px.is_finite() || !py.is_finite() {
                            continue;
                        }
                        if let Some(bars) = &s.bars {
                            let half = bars[pi];
                            let (b0, b1) = (sy(y - half), sy(y + half));
                            if b0.is_finite() && b1.is_finite() {
                                let _ = writeln!(
                                    svg,
                                    "<line x1=\"{px:.1}\" y1=\"{b0:.1}\" x2=\"{px:.1}\" y2=\"{b1:.1}\" stroke=\"{color}\"/>"
                                );
                            }
                        }
                        let _ = writeln!(
                            svg,
                            "<circle cx=\"{px:.1}\" cy=\"{py:.1}\" r=\"2.6\" fill=\"{color}\" fill-opacity=\"0.75\"/>"
                        );
                    }
                }
            }
            let ly = MT + 16.0 + 16.0 * si as f64;
            let _ = writeln!(
                svg,
                "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{color}\"/>\
                 <text x=\"{}\" y=\"{}\">{}</text>",
                ML + 12.0,
                ly - 4.0,
                ML + 22.0,
                ly,
                esc(&s.label)
            );
        }
        let _ = writeln!(svg, "</svg>");
        std::fs::write(path, svg)?;
        Ok(())
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

fn pad(lo: &mut f64, hi: &mut f64) {
    if !lo.is_finite() || !hi.is_finite() {
        *lo = 0.0;
        *hi = 1.0;
    }
    if *hi - *lo < 1e-12 {
        *lo -= 0.5;
        *hi += 0.5;
    }
    let m = (*hi - *lo) * 0.06;
    *lo -= m;
    *hi += m;
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        format!("1e{v:.1}")
    } else if v == 0.0 || (v.abs() >= 0.01 && v.abs() < 10_000.0) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
