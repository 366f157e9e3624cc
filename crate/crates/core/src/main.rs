use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use slotgen::augment::{
    catalog_resample, nifs_split, read_row_ids, rows_md5, upsample_mix, verify_row_ids, InferenceConfig, MixSpec,
    NifsConfig, PromptStrategy, SlotCatalog, TranslatedValues,
};
use slotgen::corpus::{load_corpus, AnnotatedUtterance, Corpus, CorpusFormat};
use slotgen::filters::{balance_classes, intent_distribution, CentroidClassifier};
use slotgen::generation::{
    generate, Backend, CorruptionConfig, GenerationError, GenerationOutput, HttpBackend, HttpConfig, MockBackend,
    SamplingParams,
};
use slotgen::metrics::{eval_report, relative_change, render_relative_table, PredictionPair};
use slotgen::pipeline::{
    filter_cascade, parse_outputs, read_json, read_jsonl, run_pipeline, verify_chain, write_json, write_jsonl,
    write_text, BackendKind, CandidateRecord, FilterOptions, PromptRecord, RunConfig, RunReport,
    BASELINE,
};
use slotgen::prompt::{build_training_pairs, parse_prompt, FormatConfig, PairRecord, Prompt};
use slotgen::rng::substream;

/// Annotated utterance generation for intent classification and slot tagging.
#[derive(Parser)]
#[command(name = "slotgen", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize a corpus to JSONL.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "jsonl")]
        format: String,
        #[arg(long)]
        output: PathBuf,
    },
    /// Few-shot split of one intent into starters and remainder.
    SplitNifs {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        intent: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use these starter rows instead of sampling.
        #[arg(long)]
        row_ids: Option<PathBuf>,
        #[arg(long)]
        output_dir: PathBuf,
    },
    /// Training pairs for fine-tuning the generator.
    BuildPairs {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        label_dropout: f64,
        #[arg(long, default_value_t = 0.5)]
        wildcard_p: f64,
        #[arg(long, default_value_t = 10)]
        max_examples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Inference prompts from starter utterances.
    BuildPrompts {
        #[arg(long)]
        starters: PathBuf,
        #[arg(long, default_value = "sample-each")]
        strategy: PromptStrategy,
        #[arg(long, default_value_t = 10)]
        max_examples: usize,
        #[arg(long)]
        target_language: Option<String>,
        /// JSON object of label -> {source value: translated value}.
        #[arg(long)]
        translations: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Run prompts through a generation backend.
    Generate {
        #[arg(long)]
        prompts: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Parse generations against their prompts' label maps.
    Parse {
        #[arg(long)]
        prompts: PathBuf,
        #[arg(long)]
        generations: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Filter cascade over parsed candidates.
    Filter {
        #[arg(long)]
        prompts: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        /// Labelled data for the intent classifier; repeatable.
        #[arg(long = "classifier-data")]
        classifier_data: Vec<PathBuf>,
        #[arg(long)]
        no_heuristic: bool,
        #[arg(long)]
        no_dedup: bool,
        #[arg(long = "block")]
        blocked_phrases: Vec<String>,
        #[arg(long)]
        select_lowest_perplexity: bool,
        #[arg(long)]
        output_dir: PathBuf,
    },
    /// Top up each intent to the source distribution with source copies.
    Balance {
        #[arg(long)]
        kept: PathBuf,
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Mix up-sampled starters with generated rows.
    Mix {
        #[arg(long)]
        starters: PathBuf,
        #[arg(long)]
        generated: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        weight: f64,
        #[arg(long)]
        target_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Replace slot values with draws from a catalog.
    ResampleCatalog {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Score {reference, hypothesis} prediction pairs.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        target_intent: Option<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Verify run directories and print their reports.
    Report {
        #[arg(required = true)]
        run_dirs: Vec<PathBuf>,
    },
    /// Run every stage from a config file. Flags override the file.
    RunPipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        target_intent: Option<String>,
        #[arg(long)]
        strategy: Option<PromptStrategy>,
        #[arg(long)]
        backend: Option<String>,
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        num_outputs: Option<u32>,
        #[arg(long)]
        corruption: Option<f64>,
        #[arg(long)]
        starter_weight: Option<f64>,
    },
}

#[derive(Args)]
struct BackendArgs {
    #[arg(long, default_value = "mock")]
    backend: String,
    #[arg(long, default_value = "")]
    endpoint: String,
    /// Environment variable holding a bearer token.
    #[arg(long)]
    auth_token_env: Option<String>,
    #[arg(long, default_value_t = 50)]
    top_k: u32,
    #[arg(long, default_value_t = 0.3)]
    temperature: f64,
    #[arg(long, default_value_t = 100)]
    num_outputs: u32,
    #[arg(long, default_value_t = 4)]
    max_in_flight: usize,
    #[arg(long, default_value_t = 0.0)]
    corruption: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Error with its exit code.
struct Failure(u8, anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let e = e.into();
        let code = match e.downcast_ref::<GenerationError>() {
            Some(GenerationError::Transport { .. }) => 3,
            _ => 2,
        };
        Failure(code, e)
    }
}

fn invalid(e: impl Into<anyhow::Error>) -> Failure {
    Failure(1, e.into())
}

fn load_jsonl_corpus(path: &Path) -> Result<Vec<AnnotatedUtterance>, Failure> {
    Ok(load_corpus(path, CorpusFormat::Jsonl)
        .map_err(invalid)?
        .into_utterances())
}

fn read_prompts(path: &Path) -> Result<Vec<Prompt>, Failure> {
    let recs: Vec<PromptRecord> = read_jsonl(path).map_err(invalid)?;
    recs.iter()
        .map(|r| parse_prompt(&r.text).with_context(|| format!("prompt {}", r.index)).map_err(invalid))
        .collect()
}

fn write_utts(path: &Path, utts: &[AnnotatedUtterance]) -> Result<(), Failure> {
    Ok(write_jsonl(path, utts)?)
}

fn backend(a: &BackendArgs) -> Result<Box<dyn Backend>, Failure> {
    match a.backend.as_str() {
        "mock" => Ok(Box::new(MockBackend {
            seed: a.seed,
            corruption: CorruptionConfig {
                probability: a.corruption,
                ..CorruptionConfig::default()
            },
        })),
        "http" => {
            if a.endpoint.is_empty() {
                return Err(invalid(anyhow!("--endpoint is required for the http backend")));
            }
            let auth_token = match &a.auth_token_env {
                Some(v) => Some(std::env::var(v).map_err(|_| invalid(anyhow!("{v} is not set")))?),
                None => None,
            };
            Ok(Box::new(HttpBackend::new(HttpConfig {
                endpoint: a.endpoint.clone(),
                auth_token,
                ..HttpConfig::default()
            })))
        }
        other => Err(invalid(anyhow!("unknown backend {other:?} (expected mock or http)"))),
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Ingest { input, format, output } => {
            let format: CorpusFormat = format.parse().map_err(invalid)?;
            let corpus = load_corpus(&input, format).map_err(invalid)?;
            write_utts(&output, corpus.utterances())?;
            eprintln!("{} rows, {} intents", corpus.len(), corpus.intents().len());
        }
        Command::SplitNifs {
            corpus,
            intent,
            k,
            seed,
            row_ids,
            output_dir,
        } => {
            let corpus = Corpus::new(load_jsonl_corpus(&corpus)?);
            let mut cfg = NifsConfig::new(intent, seed);
            cfg.k_starters = k;
            if let Some(p) = row_ids {
                let f = fs::File::open(&p).with_context(|| p.display().to_string()).map_err(invalid)?;
                let ids = read_row_ids(BufReader::new(f)).map_err(invalid)?;
                verify_row_ids(&corpus, &ids).map_err(invalid)?;
                cfg.explicit_row_ids = Some(ids.rows);
            }
            let split = nifs_split(&corpus, &cfg)?;
            let pick = |rows: &[usize]| -> Vec<AnnotatedUtterance> {
                rows.iter().map(|&i| corpus.utterances()[i].clone()).collect()
            };
            write_json(&output_dir.join("split.json"), &split)?;
            write_utts(&output_dir.join("starters.jsonl"), &pick(&split.starters))?;
            write_utts(&output_dir.join("remainder.jsonl"), &pick(&split.remainder))?;
            write_utts(&output_dir.join("others.jsonl"), &pick(&split.others))?;
            let mut ids: String = split.starters.iter().map(|r| format!("{r}\n")).collect();
            ids.push_str(&format!("#md5:{}\n", rows_md5(&corpus, &split.starters)?));
            write_text(&output_dir.join("row_ids.txt"), &ids)?;
            if !split.uncovered.is_empty() {
                eprintln!("uncovered slot types: {}", split.uncovered.join(", "));
            }
        }
        Command::BuildPairs {
            corpus,
            output,
            label_dropout,
            wildcard_p,
            max_examples,
            seed,
        } => {
            let cfg = FormatConfig {
                label_dropout_rate: label_dropout,
                wildcard_geom_p: wildcard_p,
                max_examples,
                rng_seed: seed,
            };
            cfg.validate().map_err(invalid)?;
            let pairs = build_training_pairs(&Corpus::new(load_jsonl_corpus(&corpus)?), &cfg);
            let recs: Vec<PairRecord> = pairs.iter().map(PairRecord::from).collect();
            write_jsonl(&output, &recs)?;
        }
        Command::BuildPrompts {
            starters,
            strategy,
            max_examples,
            target_language,
            translations,
            seed,
            output,
        } => {
            let starters = load_jsonl_corpus(&starters)?;
            let translated: Option<TranslatedValues> =
                translations.map(|p| read_json(&p)).transpose().map_err(invalid)?;
            let cfg = InferenceConfig {
                strategy,
                target_language,
                max_examples,
                seed,
            };
            let built = slotgen::augment::build_inference_prompts(&starters, &cfg, translated.as_ref())?;
            let recs: Vec<PromptRecord> = built
                .iter()
                .enumerate()
                .map(|(index, p)| PromptRecord {
                    index,
                    text: p.prompt.render(),
                    starter: p.starter,
                    wildcard_label: p.wildcard_label.clone(),
                })
                .collect();
            write_jsonl(&output, &recs)?;
        }
        Command::Generate {
            prompts,
            output,
            backend: args,
        } => {
            let recs: Vec<PromptRecord> = read_jsonl(&prompts).map_err(invalid)?;
            let texts: Vec<String> = recs.into_iter().map(|r| r.text).collect();
            let params = SamplingParams {
                top_k: args.top_k,
                temperature: args.temperature,
                num_outputs: args.num_outputs,
            };
            params.validate(slotgen::generation::DEFAULT_HARD_CAP).map_err(invalid)?;
            let b = backend(&args)?;
            let batch = generate(&texts, &params, b.as_ref(), args.max_in_flight)?;
            write_jsonl(&output, &batch.outputs)?;
            for t in &batch.truncations {
                eprintln!("prompt {} truncated to {} outputs", t.prompt_index, t.returned);
            }
        }
        Command::Parse {
            prompts,
            generations,
            output,
        } => {
            let prompts = read_prompts(&prompts)?;
            let outs: Vec<GenerationOutput> = read_jsonl(&generations).map_err(invalid)?;
            write_jsonl(&output, &parse_outputs(&prompts, &outs))?;
        }
        Command::Filter {
            prompts,
            candidates,
            classifier_data,
            no_heuristic,
            no_dedup,
            blocked_phrases,
            select_lowest_perplexity,
            output_dir,
        } => {
            let prompts = read_prompts(&prompts)?;
            let cands: Vec<CandidateRecord> = read_jsonl(&candidates).map_err(invalid)?;
            if let Some(c) = cands.iter().find(|c| c.prompt_index >= prompts.len()) {
                return Err(invalid(anyhow!("candidate refers to missing prompt {}", c.prompt_index)));
            }
            let mut data = Vec::new();
            for p in &classifier_data {
                data.extend(load_jsonl_corpus(p)?);
            }
            let clf = (!data.is_empty()).then(|| CentroidClassifier::fit(&data));
            let opts = FilterOptions {
                heuristic: !no_heuristic,
                dedup: !no_dedup,
                blocked_phrases,
                select_lowest_perplexity,
                intent: clf.is_some(),
            };
            let res = filter_cascade(
                &prompts,
                &cands,
                &opts,
                clf.as_ref().map(|c| c as &dyn slotgen::filters::IntentClassifier),
            );
            write_utts(&output_dir.join("kept.jsonl"), &res.kept)?;
            write_jsonl(&output_dir.join("filter_log.jsonl"), &res.log)?;
            write_json(&output_dir.join("pass_rates.json"), &res.report)?;
            let table = res.report.to_table();
            write_text(&output_dir.join("pass_rates.txt"), &table)?;
            print!("{table}");
        }
        Command::Balance { kept, source, output } => {
            let kept = load_jsonl_corpus(&kept)?;
            let source = load_jsonl_corpus(&source)?;
            let target = intent_distribution(&source);
            let n = kept.len();
            let out = balance_classes(kept, &source, &target)?;
            eprintln!("{} kept, {} copied", n, out.len() - n);
            write_utts(&output, &out)?;
        }
        Command::Mix {
            starters,
            generated,
            weight,
            target_size,
            seed,
            output,
        } => {
            let starters = load_jsonl_corpus(&starters)?;
            let generated = match generated {
                Some(p) => load_jsonl_corpus(&p)?,
                None => Vec::new(),
            };
            let spec = MixSpec {
                starter_weight: weight,
                target_size,
            };
            let out = upsample_mix(&starters, &generated, &spec, &mut substream(seed, 0)).map_err(invalid)?;
            write_utts(&output, &out)?;
        }
        Command::ResampleCatalog {
            input,
            catalog,
            n,
            seed,
            output,
        } => {
            let utts = load_jsonl_corpus(&input)?;
            let catalog: SlotCatalog = read_json(&catalog).map_err(invalid)?;
            write_utts(&output, &catalog_resample(&utts, &catalog, n, &mut substream(seed, 0)))?;
        }
        Command::Evaluate {
            predictions,
            target_intent,
            output,
        } => {
            let pairs: Vec<PredictionPair> = read_jsonl(&predictions).map_err(invalid)?;
            let report = eval_report(&pairs, target_intent.as_deref()).map_err(invalid)?;
            if let Some(p) = output {
                write_json(&p, &report)?;
            }
            print!("{}", report.to_text());
        }
        Command::Report { run_dirs } => {
            let mut cells = BTreeMap::new();
            for dir in &run_dirs {
                verify_chain(dir).with_context(|| dir.display().to_string())?;
                let report: RunReport = read_json(&dir.join("report.json"))?;
                let name = dir.file_name().map_or(dir.display().to_string(), |n| n.to_string_lossy().into());
                if run_dirs.len() == 1 {
                    print!("{}", report.to_text());
                }
                let base = report.evaluations.get(BASELINE).and_then(|e| e.semer.semer);
                for (sys, e) in &report.evaluations {
                    if sys == BASELINE {
                        continue;
                    }
                    if let Some(c) = base.zip(e.semer.semer).and_then(|(b, n)| relative_change(b, n)) {
                        cells.insert((name.clone(), sys.clone()), c);
                    }
                }
            }
            if run_dirs.len() > 1 {
                print!("{}", render_relative_table("Run", &cells));
            }
        }
        Command::RunPipeline {
            config,
            seed,
            output_dir,
            target_intent,
            strategy,
            backend,
            endpoint,
            num_outputs,
            corruption,
            starter_weight,
        } => {
            let mut cfg = RunConfig::load(&config).map_err(invalid)?;
            if let Some(v) = seed {
                cfg.seed = v;
            }
            if let Some(v) = output_dir {
                cfg.paths.output_dir = std::path::absolute(v).map_err(invalid)?;
            }
            if let Some(v) = target_intent {
                cfg.nifs.target_intent = v;
            }
            if let Some(v) = strategy {
                cfg.prompts.strategy = v;
            }
            if let Some(v) = backend {
                cfg.generation.backend = match v.as_str() {
                    "mock" => BackendKind::Mock,
                    "http" => BackendKind::Http,
                    other => return Err(invalid(anyhow!("unknown backend {other:?}"))),
                };
            }
            if let Some(v) = endpoint {
                cfg.generation.endpoint = v;
            }
            if let Some(v) = num_outputs {
                cfg.generation.num_outputs = v;
            }
            if let Some(v) = corruption {
                cfg.generation.corruption = v;
            }
            if let Some(v) = starter_weight {
                cfg.mix.starter_weight = v;
            }
            match run_pipeline(&cfg) {
                Ok(report) => print!("{}", report.to_text()),
                Err(e) => {
                    let code = e.exit_code() as u8;
                    return Err(Failure(code, anyhow::Error::new(e)));
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => {
            let _ = std::io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(Failure(code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
