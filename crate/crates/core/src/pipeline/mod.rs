//! Staged end-to-end runner.
//!
//! A run reads a TOML [`RunConfig`], validates it, then executes
//! ingest, split, build-pairs, build-prompts, generate, parse, filter, mix,
//! evaluate and report in that order. Each stage writes its artifacts into the
//! output directory plus a manifest under `manifests/` with the sha256 of
//! every file it read and wrote, so the chain can be checked with
//! [`verify_chain`] and any stage re-run in isolation.

mod artifacts;
mod stages;

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use artifacts::{
    read_json, read_jsonl, read_manifests, sha256_file, verify_chain, write_json, write_jsonl, write_text,
    ArtifactError, CandidateRecord, ChainError, FileHash, FilterLogRecord, PromptRecord, StageManifest,
    MANIFEST_DIR,
};
pub use stages::{evaluate_model, filter_cascade, parse_outputs, prompt_records, CascadeResult, FilterOptions};

use crate::augment::{
    catalog_resample, nifs_split, read_row_ids, upsample_mix, verify_row_ids, CatalogError, InferenceConfig,
    InferencePromptError, MixError, MixSpec, NifsConfig, NifsError, NifsSplit, PromptStrategy, RowIdFileError,
    SlotCatalog,
};
use crate::corpus::{load_corpus, AnnotatedUtterance, CorpusFormat, LoadError};
use crate::filters::{CentroidClassifier, PassRateReport};
use crate::generation::{
    generate, Backend, CorruptionConfig, GenerationError, GenerationOutput, HttpBackend, HttpConfig, MockBackend,
    SamplingParams, Truncation, DEFAULT_HARD_CAP,
};
use crate::metrics::{relative_change, EvalReport, MetricsError};
use crate::prompt::{build_training_pairs, parse_prompt, FormatConfig, PairRecord, Prompt, PromptError};
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub corpus: PathBuf,
    #[serde(default = "default_format")]
    pub corpus_format: String,
    /// Held-out evaluation data. Without it the target intent's remainder rows
    /// are scored.
    #[serde(default)]
    pub test: Option<PathBuf>,
    /// Fixed starter rows, one id per line with an optional `#md5:` line.
    #[serde(default)]
    pub row_ids: Option<PathBuf>,
    /// Slot catalog JSON for the catalog-resampling comparison.
    #[serde(default)]
    pub catalog: Option<PathBuf>,
    pub output_dir: PathBuf,
}

fn default_format() -> String {
    "jsonl".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NifsSection {
    pub target_intent: String,
    #[serde(default = "ten")]
    pub k_starters: usize,
    /// Defaults to the run seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn ten() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptsSection {
    pub strategy: PromptStrategy,
    pub max_examples: usize,
    pub target_language: Option<String>,
}

impl Default for PromptsSection {
    fn default() -> Self {
        Self {
            strategy: PromptStrategy::SampleEach,
            max_examples: 10,
            target_language: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSection {
    pub backend: BackendKind,
    pub endpoint: String,
    /// Name of an environment variable holding a bearer token.
    pub auth_token_env: Option<String>,
    pub timeout_secs: f64,
    pub retries: u32,
    pub top_k: u32,
    pub temperature: f64,
    pub num_outputs: u32,
    pub max_in_flight: usize,
    /// Mock backend defect probability.
    pub corruption: f64,
}

impl Default for GenerationSection {
    fn default() -> Self {
        let s = SamplingParams::snips();
        Self {
            backend: BackendKind::Mock,
            endpoint: String::new(),
            auth_token_env: None,
            timeout_secs: 60.0,
            retries: 3,
            top_k: s.top_k,
            temperature: s.temperature,
            num_outputs: s.num_outputs,
            max_in_flight: 4,
            corruption: 0.0,
        }
    }
}

impl GenerationSection {
    pub fn sampling(&self) -> SamplingParams {
        SamplingParams {
            top_k: self.top_k,
            temperature: self.temperature,
            num_outputs: self.num_outputs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixSection {
    pub starter_weight: f64,
    /// Defaults to the target intent's full row count.
    pub target_size: Option<usize>,
    /// Variants per starter for the catalog comparison.
    pub catalog_variants: usize,
}

impl Default for MixSection {
    fn default() -> Self {
        Self {
            starter_weight: 0.5,
            target_size: None,
            catalog_variants: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: PathsConfig,
    pub nifs: NifsSection,
    #[serde(default)]
    pub format: FormatConfig,
    #[serde(default)]
    pub prompts: PromptsSection,
    #[serde(default)]
    pub generation: GenerationSection,
    #[serde(default)]
    pub filters: FilterOptions,
    #[serde(default)]
    pub mix: MixSection,
    /// Relative paths resolve against this directory.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Nifs(#[from] NifsError),
    #[error(transparent)]
    RowIds(#[from] RowIdFileError),
    #[error(transparent)]
    Prompts(#[from] InferencePromptError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Mix(#[from] MixError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("stage {stage} failed after [{}]: {source}", completed.join(", "))]
    Stage {
        stage: String,
        /// Manifests of the stages that finished.
        completed: Vec<String>,
        source: StageError,
    },
}

impl PipelineError {
    /// 1 for validation errors, 3 when the backend cannot be reached, 2 for
    /// any other stage failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) => 1,
            PipelineError::Stage {
                source: StageError::Generation(GenerationError::Transport { .. }),
                ..
            } => 3,
            PipelineError::Stage { .. } => 2,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| PipelineError::Validation(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    /// Reads a config file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Validation(format!("{}: {e}", path.display())))?;
        let dir = path.parent().map(Path::to_owned).unwrap_or_default();
        Self::from_toml(&text, dir)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_owned()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.paths.output_dir)
    }

    fn corpus_format(&self) -> Result<CorpusFormat, LoadError> {
        self.paths.corpus_format.parse()
    }

    fn nifs_seed(&self) -> u64 {
        self.nifs.seed.unwrap_or(self.seed)
    }

    /// Checks everything that can be checked without running a stage.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Validation(m));
        let mut inputs = vec![("corpus", &self.paths.corpus)];
        inputs.extend(self.paths.test.iter().map(|p| ("test", p)));
        inputs.extend(self.paths.row_ids.iter().map(|p| ("row_ids", p)));
        inputs.extend(self.paths.catalog.iter().map(|p| ("catalog", p)));
        for (name, p) in inputs {
            if !self.resolve(p).is_file() {
                return bad(format!("{name} path {} does not exist", p.display()));
            }
        }
        if let Err(e) = self.corpus_format() {
            return bad(e.to_string());
        }
        if self.nifs.target_intent.is_empty() {
            return bad("nifs.target_intent is empty".into());
        }
        if self.nifs.k_starters == 0 {
            return bad("nifs.k_starters must be positive".into());
        }
        if let Err(e) = self.format.validate() {
            return bad(e.to_string());
        }
        if let Err(e) = self.generation.sampling().validate(DEFAULT_HARD_CAP) {
            return bad(e.to_string());
        }
        if !(0.0..=1.0).contains(&self.generation.corruption) {
            return bad(format!("generation.corruption must lie in [0, 1], got {}", self.generation.corruption));
        }
        if self.generation.backend == BackendKind::Http && self.generation.endpoint.is_empty() {
            return bad("generation.endpoint is required for the http backend".into());
        }
        if !(0.0..=1.0).contains(&self.mix.starter_weight) {
            return bad(format!("mix.starter_weight must lie in [0, 1], got {}", self.mix.starter_weight));
        }
        if self.mix.target_size == Some(0) {
            return bad("mix.target_size must be positive".into());
        }
        Ok(())
    }

    fn backend(&self) -> Result<Box<dyn Backend>, PipelineError> {
        let g = &self.generation;
        Ok(match g.backend {
            BackendKind::Mock => Box::new(MockBackend {
                seed: self.seed,
                corruption: CorruptionConfig {
                    probability: g.corruption,
                    ..CorruptionConfig::default()
                },
            }),
            BackendKind::Http => {
                let auth_token = match &g.auth_token_env {
                    Some(var) => Some(std::env::var(var).map_err(|_| {
                        PipelineError::Validation(format!("environment variable {var} is not set"))
                    })?),
                    None => None,
                };
                Box::new(HttpBackend::new(HttpConfig {
                    endpoint: g.endpoint.clone(),
                    auth_token,
                    timeout_secs: g.timeout_secs,
                    retries: g.retries,
                    ..HttpConfig::default()
                }))
            }
        })
    }
}

/// Per-system evaluation plus the pass-rate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub target_intent: String,
    pub pass_rates: PassRateReport,
    pub truncations: Vec<Truncation>,
    pub evaluations: BTreeMap<String, EvalReport>,
    /// SemER change of each system against the up-sampling baseline, in
    /// percent.
    pub semer_change: BTreeMap<String, Option<f64>>,
}

pub const BASELINE: &str = "upsample";
pub const AUGMENTED: &str = "augmented";
pub const CATALOG: &str = "catalog";

impl RunReport {
    pub fn to_text(&self) -> String {
        let mut out = format!("Target intent: {}\n\nFilter pass rates\n", self.target_intent);
        out.push_str(&self.pass_rates.to_table());
        if !self.truncations.is_empty() {
            out.push_str(&format!("Truncated prompts: {}\n", self.truncations.len()));
        }
        for (name, r) in &self.evaluations {
            out.push_str(&format!("\nSystem: {name}\n"));
            out.push_str(&r.to_text());
        }
        out.push_str(&format!("\nSemER change vs {BASELINE}\n"));
        for (name, c) in &self.semer_change {
            let v = c.map_or("-".to_owned(), |v| format!("{v:+.1}%"));
            out.push_str(&format!("{name}: {v}\n"));
        }
        out
    }
}

struct Run<'a> {
    cfg: &'a RunConfig,
    dir: PathBuf,
    completed: Vec<String>,
}

struct StageOut {
    inputs: Vec<FileHash>,
    outputs: Vec<String>,
    counts: BTreeMap<String, usize>,
}

impl StageOut {
    fn new() -> Self {
        Self {
            inputs: Vec::new(),
            outputs: Vec::new(),
            counts: BTreeMap::new(),
        }
    }

    fn count(mut self, k: &str, v: usize) -> Self {
        self.counts.insert(k.to_owned(), v);
        self
    }
}

impl Run<'_> {
    fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    fn input(&self, rel: &str) -> Result<FileHash, ArtifactError> {
        Ok(FileHash {
            path: rel.to_owned(),
            sha256: sha256_file(&self.path(rel))?,
        })
    }

    fn external(&self, p: &Path) -> Result<FileHash, ArtifactError> {
        Ok(FileHash {
            path: p.display().to_string(),
            sha256: sha256_file(&self.cfg.resolve(p))?,
        })
    }

    fn inputs(&self, rels: &[&str]) -> Result<Vec<FileHash>, ArtifactError> {
        rels.iter().map(|r| self.input(r)).collect()
    }

    fn stage(
        &mut self,
        name: &str,
        body: impl FnOnce(&Self) -> Result<StageOut, StageError>,
    ) -> Result<(), PipelineError> {
        let fail = |completed: &[String], source| PipelineError::Stage {
            stage: name.to_owned(),
            completed: completed.to_vec(),
            source,
        };
        let out = body(self).map_err(|e| fail(&self.completed, e))?;
        let outputs = out
            .outputs
            .iter()
            .map(|r| self.input(r))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| fail(&self.completed, e.into()))?;
        let manifest = StageManifest {
            stage: name.to_owned(),
            seed: self.cfg.seed,
            inputs: out.inputs,
            outputs,
            counts: out.counts,
        };
        let file = format!("{MANIFEST_DIR}/{:02}-{name}.json", self.completed.len() + 1);
        write_json(&self.path(&file), &manifest).map_err(|e| fail(&self.completed, e.into()))?;
        self.completed.push(name.to_owned());
        Ok(())
    }

    fn utterances(&self, rel: &str) -> Result<Vec<AnnotatedUtterance>, ArtifactError> {
        read_jsonl(&self.path(rel))
    }
}

fn read_prompts(path: &Path) -> Result<Vec<Prompt>, StageError> {
    let records: Vec<PromptRecord> = read_jsonl(path)?;
    Ok(records
        .iter()
        .map(|r| parse_prompt(&r.text))
        .collect::<Result<_, _>>()?)
}

fn train_set(target_rows: Vec<AnnotatedUtterance>, others: &[AnnotatedUtterance]) -> Vec<AnnotatedUtterance> {
    let mut v = target_rows;
    v.extend(others.iter().cloned());
    v
}

/// Runs every stage. Identical configs give byte-identical artifacts with the
/// mock backend.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunReport, PipelineError> {
    cfg.validate()?;
    let backend = cfg.backend()?;
    let dir = cfg.output_dir();
    let manifests = dir.join(MANIFEST_DIR);
    if manifests.exists() {
        fs::remove_dir_all(&manifests)
            .map_err(|e| PipelineError::Validation(format!("{}: {e}", manifests.display())))?;
    }
    let mut run = Run {
        cfg,
        dir,
        completed: Vec::new(),
    };
    let target = cfg.nifs.target_intent.clone();

    run.stage("ingest", |r| {
        let corpus = load_corpus(cfg.resolve(&cfg.paths.corpus), cfg.corpus_format()?)?;
        artifacts::write_utterances(&r.path("corpus.jsonl"), corpus.utterances())?;
        let mut out = StageOut::new()
            .count("rows", corpus.len())
            .count("intents", corpus.intents().len());
        out.inputs.push(r.external(&cfg.paths.corpus)?);
        out.outputs.push("corpus.jsonl".into());
        Ok(out)
    })?;

    run.stage("split", |r| {
        let corpus = crate::corpus::Corpus::new(r.utterances("corpus.jsonl")?);
        let mut nifs = NifsConfig::new(&target, cfg.nifs_seed());
        nifs.k_starters = cfg.nifs.k_starters;
        let mut out = StageOut::new();
        out.inputs.push(r.input("corpus.jsonl")?);
        if let Some(p) = &cfg.paths.row_ids {
            let file = fs::File::open(cfg.resolve(p)).map_err(|e| StageError::Other(format!("{}: {e}", p.display())))?;
            let ids = read_row_ids(BufReader::new(file))?;
            verify_row_ids(&corpus, &ids)?;
            nifs.explicit_row_ids = Some(ids.rows);
            out.inputs.push(r.external(p)?);
        }
        let split: NifsSplit = nifs_split(&corpus, &nifs)?;
        write_json(&r.path("split.json"), &split)?;
        let pick = |rows: &[usize]| -> Vec<AnnotatedUtterance> {
            rows.iter().map(|&i| corpus.utterances()[i].clone()).collect()
        };
        artifacts::write_utterances(&r.path("starters.jsonl"), &pick(&split.starters))?;
        artifacts::write_utterances(&r.path("remainder.jsonl"), &pick(&split.remainder))?;
        artifacts::write_utterances(&r.path("others.jsonl"), &pick(&split.others))?;
        out.outputs
            .extend(["split.json", "starters.jsonl", "remainder.jsonl", "others.jsonl"].map(String::from));
        Ok(out
            .count("starters", split.starters.len())
            .count("remainder", split.remainder.len())
            .count("others", split.others.len())
            .count("uncovered_labels", split.uncovered.len()))
    })?;

    run.stage("build-pairs", |r| {
        let mut training = r.utterances("starters.jsonl")?;
        training.extend(r.utterances("others.jsonl")?);
        let mut fmt = cfg.format.clone();
        fmt.rng_seed = cfg.seed;
        let pairs = build_training_pairs(&crate::corpus::Corpus::new(training), &fmt);
        let records: Vec<PairRecord> = pairs.iter().map(PairRecord::from).collect();
        write_jsonl(&r.path("pairs.jsonl"), &records)?;
        let mut out = StageOut::new().count("pairs", records.len());
        out.inputs = r.inputs(&["starters.jsonl", "others.jsonl"])?;
        out.outputs.push("pairs.jsonl".into());
        Ok(out)
    })?;

    run.stage("build-prompts", |r| {
        let starters = r.utterances("starters.jsonl")?;
        let icfg = InferenceConfig {
            strategy: cfg.prompts.strategy,
            target_language: cfg.prompts.target_language.clone(),
            max_examples: cfg.prompts.max_examples,
            seed: cfg.seed,
        };
        let (_, records) = prompt_records(&starters, &icfg)?;
        write_jsonl(&r.path("prompts.jsonl"), &records)?;
        let mut out = StageOut::new().count("prompts", records.len());
        out.inputs = r.inputs(&["starters.jsonl"])?;
        out.outputs.push("prompts.jsonl".into());
        Ok(out)
    })?;

    let mut truncations = Vec::new();
    run.stage("generate", |r| {
        let records: Vec<PromptRecord> = read_jsonl(&r.path("prompts.jsonl"))?;
        let texts: Vec<String> = records.into_iter().map(|p| p.text).collect();
        let batch = generate(
            &texts,
            &cfg.generation.sampling(),
            backend.as_ref(),
            cfg.generation.max_in_flight,
        )?;
        write_jsonl(&r.path("generations.jsonl"), &batch.outputs)?;
        truncations = batch.truncations;
        let mut out = StageOut::new()
            .count("outputs", batch.outputs.len())
            .count("truncated_prompts", truncations.len());
        out.inputs = r.inputs(&["prompts.jsonl"])?;
        out.outputs.push("generations.jsonl".into());
        Ok(out)
    })?;

    run.stage("parse", |r| {
        let prompts = read_prompts(&r.path("prompts.jsonl"))?;
        let outputs: Vec<GenerationOutput> = read_jsonl(&r.path("generations.jsonl"))?;
        let cands = parse_outputs(&prompts, &outputs);
        write_jsonl(&r.path("candidates.jsonl"), &cands)?;
        let parsed = cands.iter().filter(|c| c.utterance.is_some()).count();
        let mut out = StageOut::new()
            .count("candidates", cands.len())
            .count("parsed", parsed);
        out.inputs = r.inputs(&["prompts.jsonl", "generations.jsonl"])?;
        out.outputs.push("candidates.jsonl".into());
        Ok(out)
    })?;

    let mut pass_rates = PassRateReport::default();
    run.stage("filter", |r| {
        let prompts = read_prompts(&r.path("prompts.jsonl"))?;
        let cands: Vec<CandidateRecord> = read_jsonl(&r.path("candidates.jsonl"))?;
        let starters = r.utterances("starters.jsonl")?;
        let others = r.utterances("others.jsonl")?;
        let clf = CentroidClassifier::fit(starters.iter().chain(&others));
        let res = filter_cascade(&prompts, &cands, &cfg.filters, Some(&clf));
        artifacts::write_utterances(&r.path("kept.jsonl"), &res.kept)?;
        write_jsonl(&r.path("filter_log.jsonl"), &res.log)?;
        write_json(&r.path("pass_rates.json"), &res.report)?;
        write_text(&r.path("pass_rates.txt"), &res.report.to_table())?;
        let mut out = StageOut::new().count("kept", res.kept.len()).count("dropped", cands.len() - res.kept.len());
        for l in &res.log {
            if let Some(reason) = l.reason {
                *out.counts.entry(format!("dropped.{}", reason.code())).or_insert(0) += 1;
            }
        }
        pass_rates = res.report;
        out.inputs = r.inputs(&["prompts.jsonl", "candidates.jsonl", "starters.jsonl", "others.jsonl"])?;
        out.outputs
            .extend(["kept.jsonl", "filter_log.jsonl", "pass_rates.json", "pass_rates.txt"].map(String::from));
        Ok(out)
    })?;

    run.stage("mix", |r| {
        let starters = r.utterances("starters.jsonl")?;
        let remainder = r.utterances("remainder.jsonl")?;
        let others = r.utterances("others.jsonl")?;
        let kept = r.utterances("kept.jsonl")?;
        let size = cfg.mix.target_size.unwrap_or(starters.len() + remainder.len());
        let spec = MixSpec {
            starter_weight: cfg.mix.starter_weight,
            target_size: size,
        };
        let mut out = StageOut::new();
        out.inputs = r.inputs(&["starters.jsonl", "remainder.jsonl", "others.jsonl", "kept.jsonl"])?;

        let base = upsample_mix(&starters, &[], &spec, &mut substream(cfg.seed, 10))?;
        let mixed = upsample_mix(&starters, &kept, &spec, &mut substream(cfg.seed, 11))?;
        let mut systems = vec![(BASELINE, base), (AUGMENTED, mixed)];
        if let Some(p) = &cfg.paths.catalog {
            let catalog: SlotCatalog = serde_json::from_str(
                &fs::read_to_string(cfg.resolve(p)).map_err(|e| StageError::Other(format!("{}: {e}", p.display())))?,
            )
            .map_err(|e| StageError::Other(format!("{}: {e}", p.display())))?;
            let variants = catalog_resample(&starters, &catalog, cfg.mix.catalog_variants, &mut substream(cfg.seed, 12));
            systems.push((CATALOG, upsample_mix(&starters, &variants, &spec, &mut substream(cfg.seed, 13))?));
            out.inputs.push(r.external(p)?);
        }
        for (name, rows) in systems {
            let file = format!("train_{name}.jsonl");
            artifacts::write_utterances(&r.path(&file), &train_set(rows, &others))?;
            out.outputs.push(file);
        }
        Ok(out.count("target_size", size).count("others", others.len()))
    })?;

    let mut evaluations = BTreeMap::new();
    run.stage("evaluate", |r| {
        let mut out = StageOut::new();
        let test = match &cfg.paths.test {
            Some(p) => {
                out.inputs.push(r.external(p)?);
                load_corpus(cfg.resolve(p), cfg.corpus_format()?)?.into_utterances()
            }
            None => {
                out.inputs.push(r.input("remainder.jsonl")?);
                r.utterances("remainder.jsonl")?
            }
        };
        let mut systems = vec![BASELINE, AUGMENTED];
        if cfg.paths.catalog.is_some() {
            systems.push(CATALOG);
        }
        for name in systems {
            let train_file = format!("train_{name}.jsonl");
            out.inputs.push(r.input(&train_file)?);
            let train = r.utterances(&train_file)?;
            let (pairs, report) = evaluate_model(&train, &test, Some(&target))?;
            let pred_file = format!("predictions_{name}.jsonl");
            write_jsonl(&r.path(&pred_file), &pairs)?;
            out.outputs.push(pred_file);
            evaluations.insert(name.to_owned(), report);
        }
        write_json(&r.path("eval.json"), &evaluations)?;
        out.outputs.push("eval.json".into());
        Ok(out.count("test", test.len()))
    })?;

    let semer_change = evaluations
        .iter()
        .filter(|(k, _)| k.as_str() != BASELINE)
        .map(|(k, v)| {
            let base = evaluations[BASELINE].semer.semer;
            let change = base.zip(v.semer.semer).and_then(|(b, n)| relative_change(b, n));
            (k.clone(), change)
        })
        .collect();
    let report = RunReport {
        target_intent: target,
        pass_rates,
        truncations,
        evaluations,
        semer_change,
    };
    run.stage("report", |r| {
        write_text(&r.path("report.txt"), &report.to_text())?;
        write_json(&r.path("report.json"), &report)?;
        let mut out = StageOut::new();
        out.inputs = r.inputs(&["pass_rates.json", "eval.json"])?;
        out.outputs.extend(["report.txt", "report.json"].map(String::from));
        Ok(out)
    })?;
    Ok(report)
}

#[cfg(test)]
mod tests;
