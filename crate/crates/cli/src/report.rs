//! Table of peak centers and widths, one objective row and one Frobenius row
//! per survey. Missing second peaks print as dashes.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use qlandscape_core::{ObjectiveKind, ObjectiveSpec, PeakStats, SurveySummary};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub objective: String,
    pub c1: f64,
    pub w1: f64,
    pub c2: Option<f64>,
    pub w2: Option<f64>,
}

impl TableRow {
    fn from_peaks(objective: String, peaks: &[PeakStats]) -> Option<Self> {
        let first = peaks.first()?;
        let second = peaks.get(1);
        Some(Self {
            objective,
            c1: first.center,
            w1: first.width,
            c2: second.map(|p| p.center),
            w2: second.map(|p| p.width),
        })
    }

    pub fn cells(&self) -> [String; 5] {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), sci);
        [
            self.objective.clone(),
            sci(self.c1),
            sci(self.w1),
            opt(self.c2),
            opt(self.w2),
        ]
    }
}

fn sci(v: f64) -> String {
    format!("{v:.3e}")
}

/// Objective row followed by the matching Frobenius row.
pub fn rows(summary: &SurveySummary) -> Result<Vec<TableRow>> {
    let objective = TableRow::from_peaks(summary.objective.label(), &summary.objective_peaks)
        .ok_or_else(|| CliError::Usage("summary has no converged runs to report".into()))?;
    let frob_label = ObjectiveSpec::new(summary.objective.gate, ObjectiveKind::Frobenius).label();
    let mut out = vec![objective];
    out.extend(TableRow::from_peaks(frob_label, &summary.frobenius_peaks));
    Ok(out)
}

pub const HEADER: [&str; 5] = ["objective", "C1", "W1", "C2", "W2"];

pub fn render_text(rows: &[TableRow]) -> String {
    let cells: Vec<[String; 5]> = rows.iter().map(TableRow::cells).collect();
    let mut width = HEADER.map(str::len);
    for c in &cells {
        for (w, s) in width.iter_mut().zip(c) {
            *w = (*w).max(s.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |c: [&str; 5]| {
        let _ = writeln!(
            out,
            "{:<w0$}  {:>w1$}  {:>w2$}  {:>w3$}  {:>w4$}",
            c[0],
            c[1],
            c[2],
            c[3],
            c[4],
            w0 = width[0],
            w1 = width[1],
            w2 = width[2],
            w3 = width[3],
            w4 = width[4]
        );
    };
    line(HEADER);
    for c in &cells {
        line([&c[0], &c[1], &c[2], &c[3], &c[4]]);
    }
    out
}

pub fn render_csv(rows: &[TableRow]) -> String {
    let mut out = HEADER.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.cells().join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(c2: Option<f64>) -> TableRow {
        TableRow {
            objective: "F_{T,4}".into(),
            c1: 1.317e-3,
            w1: 1.592e-5,
            c2,
            w2: c2.map(|_| 1.998e-5),
        }
    }

    #[test]
    fn missing_peak_prints_dashes() {
        let csv = render_csv(&[row(None)]);
        assert_eq!(
            csv,
            "objective,C1,W1,C2,W2\nF_{T,4},1.317e-3,1.592e-5,-,-\n"
        );
    }

    #[test]
    fn two_peaks_fill_every_column() {
        let text = render_text(&[row(Some(1.624e-3))]);
        let last = text.lines().nth(1).unwrap();
        assert!(last.contains("1.624e-3") && last.contains("1.998e-5"));
    }
}
