//! Minimal SVG plots: histograms colored by peak and per-peak control
//! overlays.

use std::fmt::Write as _;

use qlandscape_core::{Histogram, ManifoldBundle, SurveySummary};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
/// Lower-center peak first.
const PEAK_COLORS: [&str; 2] = ["#2ca02c", "#d62728"];

fn color(peak: usize) -> &'static str {
    PEAK_COLORS[peak % PEAK_COLORS.len()]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    Objective,
    Frobenius,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    U,
    N,
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(a, b): (f64, f64)| if b > a { (a, b) } else { (a - 0.5, a + 0.5) };
        Self {
            x: widen(x),
            y: widen(y),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn axes(&self, out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
        let (x0, x1) = (self.px(self.x.0), self.px(self.x.1));
        let (y0, y1) = (self.py(self.y.0), self.py(self.y.1));
        let _ = writeln!(
            out,
            r#"<path d="M{x0:.1},{y1:.1} V{y0:.1} H{x1:.1}" fill="none" stroke="black"/>"#
        );
        for (v, anchor, x) in [(self.x.0, "start", x0), (self.x.1, "end", x1)] {
            let _ = writeln!(
                out,
                r#"<text x="{x:.1}" y="{:.1}" font-size="11" text-anchor="{anchor}">{v:.4e}</text>"#,
                y0 + 16.0
            );
        }
        for (v, y) in [(self.y.0, y0), (self.y.1, y1)] {
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{v:.3}</text>"#,
                x0 - 4.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="24" font-size="14" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            escape(title)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 12.0,
            escape(xlabel)
        );
        let _ = writeln!(
            out,
            r#"<text x="14" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(ylabel)
        );
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn document(body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

/// Per-peak counts in the bins of `h`.
fn split_counts(h: &Histogram, values: &[(f64, usize)], peaks: usize) -> Vec<Vec<usize>> {
    let bins = h.counts.len();
    let mut counts = vec![vec![0usize; bins]; peaks.max(1)];
    if bins == 0 {
        return counts;
    }
    let (lo, hi) = (h.edges[0], h.edges[bins]);
    let step = (hi - lo) / bins as f64;
    for &(v, p) in values {
        let i = if step > 0.0 {
            (((v - lo) / step) as usize).min(bins - 1)
        } else {
            0
        };
        counts[p.min(peaks.max(1) - 1)][i] += 1;
    }
    counts
}

/// Histogram with bars stacked and colored by peak membership.
pub fn histogram(summary: &SurveySummary, quantity: Quantity) -> String {
    let (h, title) = match quantity {
        Quantity::Objective => (&summary.objective_histogram, summary.objective.label()),
        Quantity::Frobenius => (
            &summary.frobenius_histogram,
            format!(
                "F_{} on optimized controls of {}",
                summary.objective.gate,
                summary.objective.label()
            ),
        ),
    };
    let values: Vec<(f64, usize)> = summary
        .included()
        .map(|(_, r, p)| {
            let v = match quantity {
                Quantity::Objective => r.objective,
                Quantity::Frobenius => r.frobenius,
            };
            (v, p)
        })
        .collect();
    let stacks = split_counts(h, &values, summary.peak_count());

    let mut body = String::new();
    let bins = h.counts.len();
    if bins == 0 {
        let _ = writeln!(
            body,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">no data</text>"#,
            WIDTH / 2.0,
            HEIGHT / 2.0
        );
        return document(&body);
    }
    let top = h.counts.iter().copied().max().unwrap_or(1).max(1) as f64;
    let frame = Frame::new((h.edges[0], h.edges[bins]), (0.0, top));
    for i in 0..bins {
        let (x0, x1) = (frame.px(h.edges[i]), frame.px(h.edges[i + 1]));
        let mut base = 0usize;
        for (p, stack) in stacks.iter().enumerate() {
            let c = stack[i];
            if c == 0 {
                continue;
            }
            let (ya, yb) = (frame.py((base + c) as f64), frame.py(base as f64));
            let _ = writeln!(
                body,
                r#"<rect x="{x0:.2}" y="{ya:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                (x1 - x0).max(0.5),
                yb - ya,
                color(p)
            );
            base += c;
        }
    }
    frame.axes(&mut body, &title, "value", "count");
    document(&body)
}

/// Every bundle member drawn as a piecewise-constant curve in its peak color.
pub fn controls(bundles: &[ManifoldBundle], control: Control) -> String {
    let series = |b: &ManifoldBundle| match control {
        Control::U => b.u.clone(),
        Control::N => b.n.clone(),
    };
    let mut body = String::new();
    let boundaries = match bundles.iter().find(|b| !b.is_empty()) {
        Some(b) => b.boundaries.clone(),
        None => {
            let _ = writeln!(
                body,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">no data</text>"#,
                WIDTH / 2.0,
                HEIGHT / 2.0
            );
            return document(&body);
        }
    };
    let all: Vec<f64> = bundles
        .iter()
        .flat_map(|b| series(b).into_iter().flatten())
        .collect();
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let frame = Frame::new((boundaries[0], boundaries[boundaries.len() - 1]), (lo, hi));
    for b in bundles {
        for values in series(b) {
            let mut d = String::new();
            for (k, (t, v)) in boundaries.windows(2).zip(&values).enumerate() {
                let cmd = if k == 0 { 'M' } else { 'L' };
                let _ = write!(
                    d,
                    "{cmd}{:.2},{:.2} L{:.2},{:.2} ",
                    frame.px(t[0]),
                    frame.py(*v),
                    frame.px(t[1]),
                    frame.py(*v)
                );
            }
            let _ = writeln!(
                body,
                r#"<path d="{}" fill="none" stroke="{}" stroke-opacity="0.25" stroke-width="1"/>"#,
                d.trim_end(),
                color(b.peak)
            );
        }
    }
    let name = match control {
        Control::U => "u",
        Control::N => "n",
    };
    frame.axes(&mut body, &format!("optimized {name} by peak"), "t", name);
    document(&body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_counts_preserves_totals() {
        let h = Histogram::build(&[0.0, 0.5, 1.0, 1.0], 4);
        let s = split_counts(&h, &[(0.0, 0), (0.5, 0), (1.0, 1), (1.0, 1)], 2);
        assert_eq!(s[0], vec![1, 0, 1, 0]);
        assert_eq!(s[1], vec![0, 0, 0, 2]);
    }

    #[test]
    fn controls_plot_has_one_path_per_member() {
        let b = ManifoldBundle {
            peak: 1,
            boundaries: vec![0.0, 0.5, 1.0],
            run_ids: vec![0, 1],
            u: vec![vec![0.1, -0.2], vec![0.3, 0.0]],
            n: vec![vec![0.0, 1.0], vec![0.5, 0.5]],
        };
        let svg = controls(&[b], Control::U);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("stroke-opacity").count(), 2);
        assert!(svg.contains(PEAK_COLORS[1]));
    }
}
