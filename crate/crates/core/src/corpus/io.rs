use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;
use thiserror::Error;

use super::{AnnotatedUtterance, Corpus, SlotSpan, UtteranceError, UtteranceRecord};

/// Language recorded for rows read from SNIPS files, which carry none.
pub const SNIPS_LANGUAGE: &str = "English";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    SnipsJson,
}

impl FromStr for CorpusFormat {
    type Err = LoadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "snips-json" | "snips" => Ok(CorpusFormat::SnipsJson),
            other => Err(LoadError::UnknownFormat(other.to_owned())),
        }
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("unknown corpus format {0:?} (expected jsonl or snips-json)")]
    UnknownFormat(String),
    #[error("reading {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("row {row}: {message}")]
    Syntax { row: usize, message: String },
    #[error("row {row}: {source}")]
    Invalid { row: usize, source: UtteranceError },
}

impl LoadError {
    pub fn code(&self) -> &'static str {
        match self {
            LoadError::UnknownFormat(_) => "unknown_format",
            LoadError::Io { .. } => "io",
            LoadError::Syntax { .. } => "syntax",
            LoadError::Invalid { source, .. } => source.code(),
        }
    }

    pub fn row(&self) -> Option<usize> {
        match self {
            LoadError::Syntax { row, .. } | LoadError::Invalid { row, .. } => Some(*row),
            _ => None,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> LoadError + '_ {
    move |source| LoadError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Corpus, LoadError> {
    let path = path.as_ref();
    match format {
        CorpusFormat::Jsonl => {
            let file = fs::File::open(path).map_err(io_err(path))?;
            read_jsonl_utterances(BufReader::new(file)).map(Corpus::new)
        }
        CorpusFormat::SnipsJson => {
            let bytes = fs::read(path).map_err(io_err(path))?;
            parse_snips(&bytes).map(Corpus::new)
        }
    }
}

/// Reads one utterance per non-blank line. Row numbers count records, not
/// blank lines.
pub fn read_jsonl_utterances(reader: impl BufRead) -> Result<Vec<AnnotatedUtterance>, LoadError> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|source| LoadError::Io {
            path: "<stream>".into(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let row = out.len();
        let record: UtteranceRecord = serde_json::from_str(&line).map_err(|e| LoadError::Syntax {
            row,
            message: e.to_string(),
        })?;
        let utt = AnnotatedUtterance::try_from(record).map_err(|source| LoadError::Invalid { row, source })?;
        out.push(utt);
    }
    Ok(out)
}

pub fn write_jsonl_utterances<'a>(
    mut writer: impl Write,
    utts: impl IntoIterator<Item = &'a AnnotatedUtterance>,
) -> io::Result<()> {
    for u in utts {
        serde_json::to_writer(&mut writer, &UtteranceRecord::from(u.clone()))?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct SnipsRow {
    data: Vec<SnipsChunk>,
}

#[derive(Deserialize)]
struct SnipsChunk {
    text: String,
    #[serde(default)]
    entity: Option<String>,
}

/// Reads the upstream SNIPS layout `{"<Intent>": [{"data": [{"text", "entity"?}]}]}`.
///
/// Bytes that are not valid UTF-8 are dropped.
fn parse_snips(bytes: &[u8]) -> Result<Vec<AnnotatedUtterance>, LoadError> {
    let text = String::from_utf8_lossy(bytes).replace(char::REPLACEMENT_CHARACTER, "");
    let root: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(&text).map_err(|e| LoadError::Syntax {
            row: 0,
            message: e.to_string(),
        })?;
    let mut out = Vec::new();
    for (intent, rows) in root {
        let rows: Vec<SnipsRow> = serde_json::from_value(rows).map_err(|e| LoadError::Syntax {
            row: out.len(),
            message: format!("intent {intent}: {e}"),
        })?;
        for r in rows {
            let row = out.len();
            let mut tokens: Vec<String> = Vec::new();
            let mut spans = Vec::new();
            for chunk in r.data {
                let start = tokens.len();
                tokens.extend(chunk.text.split_whitespace().map(str::to_owned));
                if let Some(label) = chunk.entity {
                    if tokens.len() > start {
                        spans.push(SlotSpan::new(label, start, tokens.len()));
                    }
                }
            }
            let utt = AnnotatedUtterance::new(tokens, spans, intent.clone(), SNIPS_LANGUAGE)
                .map_err(|source| LoadError::Invalid { row, source })?;
            out.push(utt);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_names() {
        assert_eq!("jsonl".parse::<CorpusFormat>().unwrap(), CorpusFormat::Jsonl);
        assert_eq!(
            "snips-json".parse::<CorpusFormat>().unwrap(),
            CorpusFormat::SnipsJson
        );
        assert_eq!("csv".parse::<CorpusFormat>().unwrap_err().code(), "unknown_format");
    }

    #[test]
    fn empty_jsonl() {
        let v = read_jsonl_utterances(&b""[..]).unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn overlapping_row_is_rejected_with_index() {
        let data = concat!(
            r#"{"tokens":["a","b"],"spans":[],"intent":"I","language":"English"}"#,
            "\n",
            r#"{"tokens":["a","b","c"],"spans":[{"label":"x","start":0,"end":2},{"label":"y","start":1,"end":3}],"intent":"I","language":"English"}"#,
            "\n"
        );
        let err = read_jsonl_utterances(data.as_bytes()).unwrap_err();
        assert_eq!(err.row(), Some(1));
        assert_eq!(err.code(), "overlapping_spans");
    }

    #[test]
    fn snips_layout() {
        let raw = br#"{"AddToPlaylist": [
            {"data": [{"text": "Add "}, {"text": "Diamonds", "entity": "artist"},
                      {"text": " to my "}, {"text": "roadtrip", "entity": "playlist"},
                      {"text": " playlist"}]},
            {"data": [{"text": "add this "}, {"text": "song", "entity": "music_item"}]}
        ]}"#;
        let v = parse_snips(raw).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].text(), "Add Diamonds to my roadtrip playlist");
        assert_eq!(v[0].spans()[1], SlotSpan::new("playlist", 4, 5));
        assert_eq!(v[1].intent(), "AddToPlaylist");
        assert_eq!(v[1].language(), SNIPS_LANGUAGE);
    }

    #[test]
    fn snips_drops_invalid_utf8() {
        let mut raw = br#"{"PlayMusic": [{"data": [{"text": "play "}, {"text": "Pop Punk Perfection"#.to_vec();
        raw.extend_from_slice(&[0xff, 0xfe]);
        raw.extend_from_slice(br#"", "entity": "playlist"}]}]}"#);
        let v = parse_snips(&raw).unwrap();
        assert_eq!(v[0].text(), "play Pop Punk Perfection");
    }

    #[test]
    fn jsonl_round_trip_preserves_order() {
        let utts = vec![
            AnnotatedUtterance::plain("b", "I", "English"),
            AnnotatedUtterance::plain("a", "J", "English").with_domain(Some("d".into())),
        ];
        let mut buf = Vec::new();
        write_jsonl_utterances(&mut buf, &utts).unwrap();
        let back = read_jsonl_utterances(&buf[..]).unwrap();
        assert_eq!(back, utts);
    }
}
