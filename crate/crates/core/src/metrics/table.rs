use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// Signed change of `new` relative to `baseline`, in percent. Negative means
/// a reduction.
pub fn relative_change(baseline: f64, new: f64) -> Option<f64> {
    (baseline != 0.0).then(|| (new - baseline) / baseline * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub n: usize,
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.1} ±{:.1}", self.mean, self.std)
    }
}

pub fn mean_std(values: &[f64]) -> Option<MeanStd> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Some(MeanStd { mean, std, n })
}

fn signed_pct(x: f64) -> String {
    format!("{}{:.1}%", if x > 0.0 { "+" } else if x < 0.0 { "-" } else { "" }, x.abs())
}

/// Renders relative changes keyed by `(row, column)` as a grid with an
/// `Average` row over each column's present cells. Missing cells show `-`.
pub fn render_relative_table(corner: &str, cells: &BTreeMap<(String, String), f64>) -> String {
    let rows: BTreeSet<&str> = cells.keys().map(|(r, _)| r.as_str()).collect();
    let cols: BTreeSet<&str> = cells.keys().map(|(_, c)| c.as_str()).collect();
    let mut grid: Vec<Vec<String>> = vec![std::iter::once(corner.to_owned())
        .chain(cols.iter().map(|c| c.to_string()))
        .collect()];
    for r in &rows {
        let mut line = vec![r.to_string()];
        for c in &cols {
            line.push(
                cells
                    .get(&(r.to_string(), c.to_string()))
                    .map_or("-".to_owned(), |v| signed_pct(*v)),
            );
        }
        grid.push(line);
    }
    let mut avg = vec!["Average".to_owned()];
    for c in &cols {
        let vals: Vec<f64> = cells
            .iter()
            .filter(|((_, cc), _)| cc == c)
            .map(|(_, v)| *v)
            .collect();
        avg.push(mean_std(&vals).map_or("-".to_owned(), |m| signed_pct(m.mean)));
    }
    grid.push(avg);
    let widths: Vec<usize> = (0..grid[0].len())
        .map(|i| grid.iter().map(|r| r[i].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (k, r) in grid.iter().enumerate() {
        let line: Vec<String> = r
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| {
                let pad = w - c.chars().count();
                if i == 0 {
                    format!("{c}{}", " ".repeat(pad))
                } else {
                    format!("{}{c}", " ".repeat(pad))
                }
            })
            .collect();
        out.push_str(line.join(" | ").trim_end());
        out.push('\n');
        if k == 0 || k == grid.len() - 2 {
            out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
            out.push('\n');
        }
    }
    out
}
