use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn toy() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/toy")
}

fn slotgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slotgen")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = slotgen(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = toy().join("run.toml");
    let out = tmp.path().join("run");

    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, fs::read_to_string(&cfg).unwrap().replace("train.jsonl", "missing.jsonl")).unwrap();
    let r = slotgen(&["run-pipeline", "--config", s(&bad), "--output-dir", s(&out)]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("corpus"));

    assert_eq!(slotgen(&["split-nifs", "--bogus"]).status.code(), Some(1));
    assert_eq!(slotgen(&["--help"]).status.code(), Some(0));

    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let endpoint = format!("http://127.0.0.1:{port}/");
    let r = slotgen(&[
        "run-pipeline", "--config", s(&cfg), "--output-dir", s(&out), "--backend", "http", "--endpoint", &endpoint,
    ]);
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(String::from_utf8_lossy(&r.stderr).contains("generate"));

    let r = slotgen(&["run-pipeline", "--config", s(&cfg), "--output-dir", s(&out), "--target-intent", "Nope"]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn stages_one_by_one_match_the_runner() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let run = t.join("run");
    let report = ok(&["run-pipeline", "--config", s(&toy().join("run.toml")), "--output-dir", s(&run)]);
    assert!(report.contains("Cascaded Pass Rate"));
    assert!(report.contains("SemER change vs upsample"));

    let corpus = t.join("corpus.jsonl");
    ok(&["ingest", "--input", s(&toy().join("train.jsonl")), "--output", s(&corpus)]);
    ok(&["split-nifs", "--corpus", s(&corpus), "--intent", "GetWeather", "--seed", "7", "--output-dir", s(t)]);
    ok(&[
        "build-prompts", "--starters", s(&t.join("starters.jsonl")), "--seed", "7", "--output", s(&t.join("prompts.jsonl")),
    ]);
    ok(&[
        "generate", "--prompts", s(&t.join("prompts.jsonl")), "--output", s(&t.join("generations.jsonl")),
        "--num-outputs", "20", "--corruption", "0.2", "--seed", "7",
    ]);
    ok(&[
        "parse", "--prompts", s(&t.join("prompts.jsonl")), "--generations", s(&t.join("generations.jsonl")),
        "--output", s(&t.join("candidates.jsonl")),
    ]);
    let table = ok(&[
        "filter", "--prompts", s(&t.join("prompts.jsonl")), "--candidates", s(&t.join("candidates.jsonl")),
        "--classifier-data", s(&t.join("starters.jsonl")), "--classifier-data", s(&t.join("others.jsonl")),
        "--block", "weather weather", "--output-dir", s(t),
    ]);
    assert!(table.starts_with("Lang"));
    for f in [
        "corpus.jsonl", "split.json", "starters.jsonl", "prompts.jsonl", "generations.jsonl", "candidates.jsonl",
        "kept.jsonl", "filter_log.jsonl", "pass_rates.txt",
    ] {
        assert_eq!(fs::read(t.join(f)).unwrap(), fs::read(run.join(f)).unwrap(), "{f}");
    }

    // row ids written by split-nifs reproduce the split
    let again = t.join("again");
    ok(&[
        "split-nifs", "--corpus", s(&corpus), "--intent", "GetWeather", "--row-ids", s(&t.join("row_ids.txt")),
        "--output-dir", s(&again),
    ]);
    assert_eq!(fs::read(again.join("split.json")).unwrap(), fs::read(t.join("split.json")).unwrap());

    let printed = ok(&["report", s(&run)]);
    assert_eq!(printed, fs::read_to_string(run.join("report.txt")).unwrap());
    let eval = ok(&[
        "evaluate", "--predictions", s(&run.join("predictions_augmented.jsonl")), "--target-intent", "GetWeather",
    ]);
    assert!(eval.contains("SemER:"));
    fs::write(run.join("kept.jsonl"), "").unwrap();
    assert_eq!(slotgen(&["report", s(&run)]).status.code(), Some(2));
}

#[test]
fn data_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let train = toy().join("train.jsonl");
    let pairs = t.join("pairs.jsonl");
    ok(&["build-pairs", "--corpus", s(&train), "--output", s(&pairs), "--seed", "3"]);
    // one pair per distinct row
    let train_text = fs::read_to_string(&train).unwrap();
    let distinct: std::collections::HashSet<&str> = train_text.lines().collect();
    assert_eq!(fs::read_to_string(&pairs).unwrap().lines().count(), distinct.len());

    let mixed = t.join("mixed.jsonl");
    ok(&[
        "mix", "--starters", s(&train), "--generated", s(&train), "--weight", "0.5", "--target-size", "9",
        "--output", s(&mixed),
    ]);
    let text = fs::read_to_string(&mixed).unwrap();
    assert_eq!(text.lines().count(), 9);
    assert_eq!(text.matches("\"upsampled\"").count(), 5);

    let variants = t.join("variants.jsonl");
    ok(&[
        "resample-catalog", "--input", s(&train), "--catalog", s(&toy().join("catalog.json")), "--n", "2",
        "--output", s(&variants),
    ]);
    assert_eq!(fs::read_to_string(&variants).unwrap().lines().count(), 240);

    let kept = t.join("kept.jsonl");
    let first: String = fs::read_to_string(&train).unwrap().lines().take(7).map(|l| format!("{l}\n")).collect();
    fs::write(&kept, first).unwrap();
    let balanced = t.join("balanced.jsonl");
    ok(&["balance", "--kept", s(&kept), "--source", s(&train), "--output", s(&balanced)]);
    assert_eq!(fs::read_to_string(&balanced).unwrap().lines().count(), 120);

    let r = slotgen(&["mix", "--starters", s(&train), "--weight", "1.5", "--target-size", "3", "--output", s(&mixed)]);
    assert_eq!(r.status.code(), Some(1));
}
