//! Stage bodies, free of file handling so the CLI subcommands and the runner
//! share them.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::artifacts::{CandidateRecord, FilterLogRecord, PromptRecord};
use crate::augment::{build_inference_prompts, InferenceConfig, InferencePromptError};
use crate::corpus::{bracket_to_spans, AnnotatedUtterance, Provenance};
use crate::filters::{
    heuristic_filter, ngram_verdict, normalize_whitespace, pass_rate_report, select_lowest_perplexity,
    surface_text, valid_filter, FilterVerdict, IntentClassifier, OutputTrace, PassRateReport, Reason,
};
use crate::generation::GenerationOutput;
use crate::metrics::{eval_report, EvalReport, MetricsError, PredictionPair};
use crate::model::{IcStModel, ReferenceModel};
use crate::prompt::Prompt;

pub fn prompt_records(
    starters: &[AnnotatedUtterance],
    cfg: &InferenceConfig,
) -> Result<(Vec<Prompt>, Vec<PromptRecord>), InferencePromptError> {
    let built = build_inference_prompts(starters, cfg, None)?;
    let records = built
        .iter()
        .enumerate()
        .map(|(index, p)| PromptRecord {
            index,
            text: p.prompt.render(),
            starter: p.starter,
            wildcard_label: p.wildcard_label.clone(),
        })
        .collect();
    Ok((built.into_iter().map(|p| p.prompt).collect(), records))
}

/// Parses each output against its prompt's label map. Outputs keep their
/// batch order; `output_index` counts within a prompt.
pub fn parse_outputs(prompts: &[Prompt], outputs: &[GenerationOutput]) -> Vec<CandidateRecord> {
    let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
    outputs
        .iter()
        .map(|o| {
            let n = seen.entry(o.prompt_index).or_insert(0);
            let output_index = *n;
            *n += 1;
            let parsed = match prompts.get(o.prompt_index) {
                Some(p) => bracket_to_spans(&o.text, p.labels())
                    .map(|u| {
                        u.with_intent(p.intent())
                            .with_language(p.language())
                            .with_domain(p.domain().map(str::to_owned))
                            .with_provenance(Provenance::Generated)
                    })
                    .map_err(|e| e.to_string()),
                None => Err(format!("no prompt {}", o.prompt_index)),
            };
            let (utterance, parse_error) = match parsed {
                Ok(u) => (Some(u), None),
                Err(e) => (None, Some(e)),
            };
            CandidateRecord {
                prompt_index: o.prompt_index,
                output_index,
                text: o.text.clone(),
                perplexity: o.perplexity,
                utterance,
                parse_error,
            }
        })
        .collect()
}

/// Which optional cascade stages run. The valid filter always runs, since
/// kept rows must parse against their prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterOptions {
    pub heuristic: bool,
    pub dedup: bool,
    pub blocked_phrases: Vec<String>,
    pub select_lowest_perplexity: bool,
    pub intent: bool,
}

impl Default for FilterOptions {
    fn default() -> Self {
        Self {
            heuristic: true,
            dedup: true,
            blocked_phrases: Vec::new(),
            select_lowest_perplexity: false,
            intent: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Valid,
    Heuristic,
    Dedup,
    Ngram,
    Select,
    Intent,
}

impl Stage {
    fn name(self) -> &'static str {
        match self {
            Stage::Valid => "Valid-Filter",
            Stage::Heuristic => "Heuristic-Filter",
            Stage::Dedup => "Dedup",
            Stage::Ngram => "N-gram-Block",
            Stage::Select => "Selection",
            Stage::Intent => "IC-Filter",
        }
    }
}

impl FilterOptions {
    fn stages(&self) -> Vec<Stage> {
        let mut s = vec![Stage::Valid];
        if self.heuristic {
            s.push(Stage::Heuristic);
        }
        if self.dedup {
            s.push(Stage::Dedup);
        }
        if !self.blocked_phrases.is_empty() {
            s.push(Stage::Ngram);
        }
        if self.select_lowest_perplexity {
            s.push(Stage::Select);
        }
        if self.intent {
            s.push(Stage::Intent);
        }
        s
    }

    pub fn stage_names(&self) -> Vec<&'static str> {
        self.stages().into_iter().map(Stage::name).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeResult {
    pub kept: Vec<AnnotatedUtterance>,
    pub log: Vec<FilterLogRecord>,
    pub report: PassRateReport,
}

/// Runs the enabled stages in order over every candidate. A candidate leaves
/// the cascade at its first failing stage. Selection keeps the
/// lowest-perplexity survivor per prompt.
pub fn filter_cascade(
    prompts: &[Prompt],
    candidates: &[CandidateRecord],
    opts: &FilterOptions,
    classifier: Option<&dyn IntentClassifier>,
) -> CascadeResult {
    let stages = opts.stages();
    let mut verdicts: Vec<Vec<Option<FilterVerdict>>> = vec![vec![None; stages.len()]; candidates.len()];
    let mut alive: Vec<bool> = vec![true; candidates.len()];
    let mut predicted: Vec<Option<String>> = vec![None; candidates.len()];
    let mut seen: HashSet<String> = HashSet::new();

    for (k, stage) in stages.iter().enumerate() {
        if *stage == Stage::Select {
            let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (i, c) in candidates.iter().enumerate() {
                if alive[i] {
                    groups.entry(c.prompt_index).or_default().push(i);
                }
            }
            for (pi, members) in groups {
                let outs: Vec<GenerationOutput> = members
                    .iter()
                    .map(|&i| GenerationOutput {
                        prompt_index: pi,
                        text: candidates[i].text.clone(),
                        perplexity: candidates[i].perplexity,
                    })
                    .collect();
                let best = select_lowest_perplexity(&outs, &prompts[pi]);
                for (j, &i) in members.iter().enumerate() {
                    let v = if Some(j) == best {
                        FilterVerdict::PASS
                    } else {
                        FilterVerdict::fail(Reason::NotSelected)
                    };
                    verdicts[i][k] = Some(v);
                    alive[i] = v.passed;
                }
            }
            continue;
        }
        for (i, c) in candidates.iter().enumerate() {
            if !alive[i] {
                continue;
            }
            let prompt = &prompts[c.prompt_index];
            let v = match stage {
                Stage::Valid => {
                    let v = valid_filter(&c.text, prompt);
                    if v.passed && c.utterance.is_none() {
                        FilterVerdict::fail(Reason::MalformedBrackets)
                    } else {
                        v
                    }
                }
                Stage::Heuristic => heuristic_filter(&c.text, prompt),
                Stage::Dedup => {
                    if seen.insert(normalize_whitespace(&c.text)) {
                        FilterVerdict::PASS
                    } else {
                        FilterVerdict::fail(Reason::Duplicate)
                    }
                }
                Stage::Ngram => ngram_verdict(&c.text, &opts.blocked_phrases),
                Stage::Intent => match classifier {
                    Some(clf) => {
                        let (p, _) = clf.classify(&surface_text(&c.text));
                        let ok = p == prompt.intent();
                        predicted[i] = Some(p);
                        if ok {
                            FilterVerdict::PASS
                        } else {
                            FilterVerdict::fail(Reason::IntentMismatch)
                        }
                    }
                    None => FilterVerdict::PASS,
                },
                Stage::Select => unreachable!("handled above"),
            };
            verdicts[i][k] = Some(v);
            alive[i] = v.passed;
        }
    }

    let mut kept = Vec::new();
    let mut log = Vec::with_capacity(candidates.len());
    let mut traces = Vec::with_capacity(candidates.len());
    for (i, c) in candidates.iter().enumerate() {
        let prompt = &prompts[c.prompt_index];
        let reason = verdicts[i].iter().flatten().find_map(|v| v.reason);
        if reason.is_none() {
            kept.push(c.utterance.clone().expect("valid candidates parsed"));
        }
        log.push(FilterLogRecord {
            prompt_index: c.prompt_index,
            output_index: c.output_index,
            reason,
            predicted_intent: predicted[i].take(),
        });
        traces.push(OutputTrace {
            language: prompt.language().to_owned(),
            intent: prompt.intent().to_owned(),
            stages: std::mem::take(&mut verdicts[i]),
        });
    }
    let report = pass_rate_report(&opts.stage_names(), &traces);
    CascadeResult { kept, log, report }
}

/// Trains the reference model on `train` and scores it on `test`.
pub fn evaluate_model(
    train: &[AnnotatedUtterance],
    test: &[AnnotatedUtterance],
    target_intent: Option<&str>,
) -> Result<(Vec<PredictionPair>, EvalReport), MetricsError> {
    let model = ReferenceModel::train(train);
    let pairs: Vec<PredictionPair> = test
        .iter()
        .map(|r| PredictionPair::new(r.clone(), model.predict_like(r)))
        .collect();
    let report = eval_report(&pairs, target_intent)?;
    Ok((pairs, report))
}
