use std::path::PathBuf;

use super::*;
use crate::filters::Reason;

fn toy_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/toy")
}

fn toy_config(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::load(&toy_dir().join("run.toml")).unwrap();
    cfg.paths.output_dir = out.to_owned();
    cfg
}

fn prompt() -> Prompt {
    crate::prompt::tests::weather_prompt()
}

fn cand(prompt_index: usize, output_index: usize, text: &str, ppl: Option<f64>) -> CandidateRecord {
    let p = prompt();
    let utterance = crate::corpus::bracket_to_spans(text, p.labels())
        .ok()
        .map(|u| u.with_intent(p.intent()).with_language(p.language()));
    CandidateRecord {
        prompt_index,
        output_index,
        text: text.into(),
        perplexity: ppl,
        utterance,
        parse_error: None,
    }
}

const GOOD: &str = "is [3 snow ] likely near [1 Central Park ] [5 tomorrow ]";
const GOOD2: &str = "any [3 snow ] at [1 Fenway Park ] [5 tomorrow ] ?";

struct Fixed(&'static str);

impl crate::filters::IntentClassifier for Fixed {
    fn classify(&self, _: &str) -> (String, f64) {
        (self.0.to_owned(), 1.0)
    }
}

#[test]
fn config_parses_and_validates() {
    let cfg = RunConfig::load(&toy_dir().join("run.toml")).unwrap();
    assert_eq!(cfg.nifs.target_intent, "GetWeather");
    assert_eq!(cfg.generation.num_outputs, 20);
    assert_eq!(cfg.prompts.strategy, PromptStrategy::SampleEach);
    assert!(cfg.validate().is_ok());
}

#[test]
fn missing_corpus_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = toy_config(tmp.path());
    cfg.paths.corpus = "nope.jsonl".into();
    let err = run_pipeline(&cfg).unwrap_err();
    assert!(matches!(err, PipelineError::Validation(_)), "{err}");
    assert_eq!(err.exit_code(), 1);
    assert!(!tmp.path().join(MANIFEST_DIR).exists());
}

#[test]
fn unknown_keys_and_bad_values_are_rejected() {
    let base = toy_dir();
    let bad = "seed = 1\n[paths]\ncorpus = \"train.jsonl\"\noutput_dir = \"x\"\nbogus = 1\n[nifs]\ntarget_intent = \"A\"\n";
    assert!(RunConfig::from_toml(bad, &base).is_err());
    let text = "seed = 1\n[paths]\ncorpus = \"train.jsonl\"\noutput_dir = \"x\"\n[nifs]\ntarget_intent = \"A\"\n[generation]\nnum_outputs = 5000\n";
    let cfg = RunConfig::from_toml(text, &base).unwrap();
    assert!(matches!(cfg.validate(), Err(PipelineError::Validation(_))));
    let text = text.replace("5000", "5\nbackend = \"http\"");
    let cfg = RunConfig::from_toml(&text, &base).unwrap();
    assert!(cfg.validate().is_err(), "http without endpoint");
}

#[test]
fn unreachable_backend_maps_to_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = toy_config(tmp.path());
    cfg.generation.backend = BackendKind::Http;
    // a bound-then-dropped port refuses connections
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    cfg.generation.endpoint = format!("http://127.0.0.1:{port}/generate");
    cfg.generation.retries = 0;
    let err = run_pipeline(&cfg).unwrap_err();
    match &err {
        PipelineError::Stage { stage, completed, .. } => {
            assert_eq!(stage, "generate");
            assert_eq!(completed, &["ingest", "split", "build-pairs", "build-prompts"]);
        }
        other => panic!("{other}"),
    }
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn cascade_reports_first_failure_and_keeps_survivors() {
    let prompts = vec![prompt()];
    let cands = vec![
        cand(0, 0, GOOD, Some(3.0)),
        cand(0, 1, "is it [3 snow ] [5 tomorrow ]", None),
        cand(0, 2, &format!("{GOOD} "), None),
        cand(0, 3, "weather weather [3 snow ] near [1 Central Park ] [5 tomorrow ]", None),
        cand(0, 4, GOOD2, Some(1.0)),
    ];
    let opts = FilterOptions {
        blocked_phrases: vec!["weather weather".into()],
        ..FilterOptions::default()
    };
    let res = filter_cascade(&prompts, &cands, &opts, Some(&Fixed("GetWeather")));
    let reasons: Vec<Option<Reason>> = res.log.iter().map(|l| l.reason).collect();
    assert_eq!(
        reasons,
        [None, Some(Reason::MissingSlot), Some(Reason::Duplicate), Some(Reason::BlockedNgram), None]
    );
    assert_eq!(res.kept.len(), 2);
    assert!(res.kept.iter().all(|u| u.intent() == "GetWeather"));
    assert_eq!(res.report.overall.cascaded.passed, 2);
    assert_eq!(res.report.overall.stages[0].evaluated, 5);
    assert_eq!(res.report.overall.stages[0].passed, 4);

    let sel = FilterOptions {
        select_lowest_perplexity: true,
        ..opts.clone()
    };
    let res = filter_cascade(&prompts, &cands, &sel, Some(&Fixed("GetWeather")));
    assert_eq!(res.log[0].reason, Some(Reason::NotSelected));
    assert_eq!(res.log[4].reason, None);
    assert_eq!(res.kept.len(), 1);

    let res = filter_cascade(&prompts, &cands, &opts, Some(&Fixed("PlayMusic")));
    assert!(res.kept.is_empty());
    assert_eq!(res.log[0].predicted_intent.as_deref(), Some("PlayMusic"));
    assert_eq!(res.log[0].reason, Some(Reason::IntentMismatch));
}

#[test]
fn unparseable_candidate_fails_valid_stage() {
    let mut c = cand(0, 0, GOOD, None);
    c.utterance = None;
    let res = filter_cascade(&[prompt()], &[c], &FilterOptions::default(), None);
    assert_eq!(res.log[0].reason, Some(Reason::MalformedBrackets));
}

#[test]
fn parse_numbers_outputs_within_prompt() {
    let p = vec![prompt(), prompt()];
    let outs: Vec<GenerationOutput> = [(0, GOOD), (1, GOOD), (0, "[9 x ]"), (1, GOOD2)]
        .iter()
        .map(|(i, t)| GenerationOutput {
            prompt_index: *i,
            text: t.to_string(),
            perplexity: None,
        })
        .collect();
    let c = parse_outputs(&p, &outs);
    assert_eq!(c.iter().map(|c| c.output_index).collect::<Vec<_>>(), [0, 0, 1, 1]);
    assert!(c[2].utterance.is_none() && c[2].parse_error.is_some());
    let u = c[0].utterance.as_ref().unwrap();
    assert_eq!(u.intent(), "GetWeather");
    assert_eq!(u.provenance(), crate::corpus::Provenance::Generated);
}

#[test]
fn toy_run_completes_and_chain_verifies() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = toy_config(tmp.path());
    let report = run_pipeline(&cfg).unwrap();
    assert!(report.pass_rates.overall.cascaded.evaluated > 0);
    assert!(report.pass_rates.overall.cascaded.passed > 0);
    for sys in [BASELINE, AUGMENTED, CATALOG] {
        assert!(report.evaluations[sys].semer.semer.is_some(), "{sys}");
    }
    let text = fs::read_to_string(tmp.path().join("report.txt")).unwrap();
    assert!(text.contains("Cascaded Pass Rate") && text.contains("SemER"));
    let manifests = verify_chain(tmp.path()).unwrap();
    let names: Vec<&str> = manifests.iter().map(|m| m.stage.as_str()).collect();
    assert_eq!(
        names,
        ["ingest", "split", "build-pairs", "build-prompts", "generate", "parse", "filter", "mix", "evaluate", "report"]
    );
    let mix = &manifests[7];
    assert_eq!(mix.counts["target_size"], 40);

    fs::write(tmp.path().join("kept.jsonl"), "").unwrap();
    assert!(matches!(verify_chain(tmp.path()), Err(ChainError::Modified { .. })));
}

#[test]
fn tampered_input_hash_breaks_chain() {
    let tmp = tempfile::tempdir().unwrap();
    run_pipeline(&toy_config(tmp.path())).unwrap();
    let path = tmp.path().join(MANIFEST_DIR).join("06-parse.json");
    let mut m: StageManifest = read_json(&path).unwrap();
    m.inputs[0].sha256 = "0".repeat(64);
    write_json(&path, &m).unwrap();
    assert!(matches!(verify_chain(tmp.path()), Err(ChainError::Broken { .. })));
}
