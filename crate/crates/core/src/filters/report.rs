use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::FilterVerdict;

/// The verdicts one output received. `None` marks a stage that was not run,
/// usually because an earlier stage rejected the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputTrace {
    pub language: String,
    pub intent: String,
    pub stages: Vec<Option<FilterVerdict>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StageCount {
    pub evaluated: usize,
    pub passed: usize,
}

impl StageCount {
    /// `None` when nothing was evaluated.
    pub fn rate(&self) -> Option<f64> {
        (self.evaluated > 0).then(|| self.passed as f64 / self.evaluated as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroupStats {
    pub stages: Vec<StageCount>,
    /// Outputs that entered the cascade and passed every stage.
    pub cascaded: StageCount,
    /// Rows copied in to balance classes.
    pub copied: usize,
}

impl GroupStats {
    fn new(n: usize) -> Self {
        Self {
            stages: vec![StageCount::default(); n],
            ..Self::default()
        }
    }

    fn add(&mut self, trace: &OutputTrace) {
        for (count, v) in self.stages.iter_mut().zip(&trace.stages) {
            if let Some(v) = v {
                count.evaluated += 1;
                count.passed += usize::from(v.passed);
            }
        }
        self.cascaded.evaluated += 1;
        let all = trace.stages.len() == self.stages.len()
            && trace.stages.iter().all(|v| v.is_some_and(|v| v.passed));
        self.cascaded.passed += usize::from(all);
    }

    pub fn total(&self) -> usize {
        self.cascaded.passed + self.copied
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PassRateReport {
    pub stage_names: Vec<String>,
    pub overall: GroupStats,
    pub by_language: BTreeMap<String, GroupStats>,
    pub by_intent: BTreeMap<String, GroupStats>,
}

/// Tallies per-stage and cascaded pass counts, overall and per language and
/// intent.
pub fn pass_rate_report(stage_names: &[&str], traces: &[OutputTrace]) -> PassRateReport {
    let n = stage_names.len();
    let mut report = PassRateReport {
        stage_names: stage_names.iter().map(|s| s.to_string()).collect(),
        overall: GroupStats::new(n),
        ..PassRateReport::default()
    };
    for t in traces {
        report.overall.add(t);
        report
            .by_language
            .entry(t.language.clone())
            .or_insert_with(|| GroupStats::new(n))
            .add(t);
        report
            .by_intent
            .entry(t.intent.clone())
            .or_insert_with(|| GroupStats::new(n))
            .add(t);
    }
    report
}

fn pct(rate: Option<f64>) -> String {
    rate.map_or("-".to_owned(), |r| format!("{:.1}", r * 100.0))
}

impl PassRateReport {
    /// Records balance copies for a language.
    pub fn record_copies(&mut self, language: &str, copied: usize) {
        let n = self.stage_names.len();
        self.by_language
            .entry(language.to_owned())
            .or_insert_with(|| GroupStats::new(n))
            .copied += copied;
        self.overall.copied += copied;
    }

    /// One row per language plus an average row. Rates are percentages; the
    /// average row averages the per-language rates and counts.
    pub fn to_table(&self) -> String {
        let mut header = vec!["Lang".to_owned()];
        header.extend(self.stage_names.iter().map(|s| format!("{s} Pass Rate")));
        header.extend(
            ["Cascaded Pass Rate", "Num Outputs", "Num Copied", "Total"].map(str::to_owned),
        );
        let mut rows: Vec<Vec<String>> = Vec::new();
        for (lang, g) in &self.by_language {
            let mut row = vec![lang.clone()];
            row.extend(g.stages.iter().map(|s| pct(s.rate())));
            row.push(pct(g.cascaded.rate()));
            row.extend([g.cascaded.passed, g.copied, g.total()].map(|c| c.to_string()));
            rows.push(row);
        }
        if !self.by_language.is_empty() {
            let k = self.by_language.len() as f64;
            let mean_rate = |f: &dyn Fn(&GroupStats) -> Option<f64>| {
                let rates: Vec<f64> = self.by_language.values().filter_map(f).collect();
                (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64)
            };
            let mean_count = |f: &dyn Fn(&GroupStats) -> usize| {
                format!("{:.0}", self.by_language.values().map(f).sum::<usize>() as f64 / k)
            };
            let mut row = vec!["avg".to_owned()];
            for i in 0..self.stage_names.len() {
                row.push(pct(mean_rate(&|g| g.stages[i].rate())));
            }
            row.push(pct(mean_rate(&|g| g.cascaded.rate())));
            row.push(mean_count(&|g| g.cascaded.passed));
            row.push(mean_count(&|g| g.copied));
            row.push(mean_count(&|g| g.total()));
            rows.push(row);
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        let line = |out: &mut String, cells: &[String]| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", padded.join(" | "));
        };
        line(&mut out, &header);
        let _ = writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
        for r in &rows {
            line(&mut out, r);
        }
        out
    }
}
