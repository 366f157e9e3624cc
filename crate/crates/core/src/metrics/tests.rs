use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::corpus::{spans_to_bio, SlotSpan};

fn utt(tokens: &str, spans: &[(&str, usize, usize)], intent: &str) -> AnnotatedUtterance {
    AnnotatedUtterance::new(
        tokens.split_whitespace().map(str::to_owned).collect(),
        spans.iter().map(|(l, s, e)| SlotSpan::new(*l, *s, *e)).collect(),
        intent,
        "English",
    )
    .unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

#[test]
fn intent_examples() {
    let perfect: Vec<PredictionPair> = (0..5)
        .map(|i| PredictionPair::new(utt("a", &[], ["X", "Y"][i % 2]), utt("a", &[], ["X", "Y"][i % 2])))
        .collect();
    let m = intent_metrics(&perfect, Some("X"));
    assert_eq!((m.local_recall, m.global_accuracy), (Some(1.0), Some(1.0)));

    let pairs: Vec<PredictionPair> = (0..10)
        .map(|i| PredictionPair::new(utt("a", &[], "T"), utt("a", &[], if i < 8 { "T" } else { "U" })))
        .collect();
    assert!(close(intent_metrics(&pairs, Some("T")).local_recall.unwrap(), 0.8));
    assert_eq!(intent_metrics(&pairs, Some("Z")).local_recall, None);
    assert_eq!(intent_metrics(&[], None).global_accuracy, None);
}

#[test]
fn intent_matches_confusion_matrix_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let intents = ["A", "B", "C", "D"];
    let pairs: Vec<PredictionPair> = (0..200)
        .map(|_| {
            let r = intents[rng.gen_range(0..4)];
            let h = intents[rng.gen_range(0..4)];
            PredictionPair::new(utt("w", &[], r), utt("w", &[], h))
        })
        .collect();
    let mut confusion = [[0usize; 4]; 4];
    let idx = |s: &str| intents.iter().position(|i| *i == s).unwrap();
    for p in &pairs {
        confusion[idx(p.reference.intent())][idx(p.hypothesis.intent())] += 1;
    }
    let trace: usize = (0..4).map(|i| confusion[i][i]).sum();
    let m = intent_metrics(&pairs, Some("C"));
    assert!(close(m.global_accuracy.unwrap(), trace as f64 / 200.0));
    let row: usize = confusion[2].iter().sum();
    assert!(close(m.local_recall.unwrap(), confusion[2][2] as f64 / row as f64));
}

#[test]
fn slot_f1_examples() {
    let a = utt("a b c", &[("A", 0, 2)], "X");
    let s = slot_f1(&[PredictionPair::new(a.clone(), a.clone())]).unwrap();
    assert_eq!(s.f1, 1.0);
    let miss = utt("a b c", &[("A", 0, 1)], "X");
    assert_eq!(slot_f1(&[PredictionPair::new(a.clone(), miss)]).unwrap().f1, 0.0);
    let empty = utt("a b c", &[], "X");
    let s = slot_f1(&[PredictionPair::new(empty.clone(), empty.clone())]).unwrap();
    assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
    let s = slot_f1(&[PredictionPair::new(a.clone(), empty)]).unwrap();
    assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
    assert!(matches!(
        slot_f1(&[PredictionPair::new(a, utt("a b", &[], "X"))]),
        Err(MetricsError::TokenMismatch { pair: 0, .. })
    ));
}

/// Chunks read back from BIO tags, independent of the span representation.
fn bio_chunks(tags: &[String]) -> Vec<(String, usize, usize)> {
    let mut out = Vec::new();
    let mut cur: Option<(String, usize)> = None;
    for (i, t) in tags.iter().enumerate() {
        let continues = matches!((&cur, t.strip_prefix("I-")), (Some((l, _)), Some(tl)) if l == tl);
        if !continues {
            if let Some((l, s)) = cur.take() {
                out.push((l, s, i));
            }
            if let Some(l) = t.strip_prefix("B-").or_else(|| t.strip_prefix("I-")) {
                cur = Some((l.to_owned(), i));
            }
        }
    }
    if let Some((l, s)) = cur {
        out.push((l, s, tags.len()));
    }
    out
}

fn random_utt(rng: &mut impl Rng, n: usize) -> AnnotatedUtterance {
    let tokens: Vec<String> = (0..n).map(|_| ["x", "y"][rng.gen_range(0..2)].to_owned()).collect();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < n {
        if rng.gen_bool(0.35) {
            let end = rng.gen_range(i + 1..=n.min(i + 3));
            spans.push(SlotSpan::new(["A", "B", "C"][rng.gen_range(0..3)], i, end));
            i = end;
        } else {
            i += 1;
        }
    }
    let intent = ["P", "Q"][rng.gen_range(0..2)];
    AnnotatedUtterance::new(tokens, spans, intent, "English").unwrap()
}

#[test]
fn slot_f1_matches_bio_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pairs: Vec<PredictionPair> = (0..500)
        .map(|_| {
            let n = rng.gen_range(1..9);
            PredictionPair::new(random_utt(&mut rng, n), random_utt(&mut rng, n))
        })
        .collect();
    let (mut tp, mut nr, mut nh) = (0usize, 0usize, 0usize);
    for p in &pairs {
        let tags = |u: &AnnotatedUtterance| spans_to_bio(u).into_iter().map(|(_, t)| t).collect::<Vec<_>>();
        let r = bio_chunks(&tags(&p.reference));
        let h = bio_chunks(&tags(&p.hypothesis));
        tp += h.iter().filter(|c| r.contains(c)).count();
        nr += r.len();
        nh += h.len();
    }
    let s = slot_f1(&pairs).unwrap();
    let (p, r) = (tp as f64 / nh as f64, tp as f64 / nr as f64);
    assert_eq!((s.true_positives, s.reference_chunks, s.hypothesis_chunks), (tp, nr, nh));
    assert!(close(s.precision, p) && close(s.recall, r));
    assert!(close(s.f1, 2.0 * p * r / (p + r)));
}

#[test]
fn semer_examples() {
    let r = utt("a b c d", &[("x", 0, 1), ("y", 1, 2), ("z", 3, 4)], "X");
    let s = semer(&[PredictionPair::new(r.clone(), r.clone())]);
    assert_eq!((s.counts.correct, s.counts.deletions, s.counts.insertions, s.counts.substitutions), (3, 0, 0, 0));
    assert_eq!(s.semer, Some(0.0));

    let r = utt("weather in boston on monday", &[("city", 2, 3)], "X");
    let h = AnnotatedUtterance::new(
        "weather in austin on monday".split(' ').map(str::to_owned).collect(),
        vec![SlotSpan::new("city", 2, 3), SlotSpan::new("date", 4, 5)],
        "X",
        "English",
    )
    .unwrap();
    let s = semer(&[PredictionPair::new(r, h)]);
    assert_eq!((s.counts.correct, s.counts.substitutions, s.counts.insertions, s.counts.deletions), (0, 1, 1, 0));
    assert_eq!(s.semer, Some(2.0));

    let r = utt("a b", &[("x", 0, 1), ("y", 1, 2)], "X");
    let h = utt("a b", &[], "Y");
    let s = semer(&[PredictionPair::new(r, h)]);
    assert_eq!((s.counts.deletions, s.counts.substitutions), (2, 1));
    assert_eq!(s.semer, Some(1.0));

    let none = utt("a", &[], "X");
    assert_eq!(semer(&[PredictionPair::new(none.clone(), none.clone())]).semer, Some(0.0));
    let ins = utt("a", &[("x", 0, 1)], "X");
    assert_eq!(semer(&[PredictionPair::new(none, ins)]).semer, None);
}

/// Lowest-cost alignment by enumerating every partial matching per label.
fn semer_oracle(r: &AnnotatedUtterance, h: &AnnotatedUtterance) -> (usize, usize, usize, usize) {
    fn best(rv: &[Vec<String>], hv: &[Vec<String>], used: &mut Vec<bool>) -> (usize, usize, usize, usize) {
        // (cor, del, ins, sub) minimising del+ins+sub, then maximising cor
        let Some((first, rest)) = rv.split_first() else {
            return (0, 0, used.iter().filter(|u| !**u).count(), 0);
        };
        let (c, d, i, s) = best(rest, hv, used);
        let mut choice = (c, d + 1, i, s);
        for j in 0..hv.len() {
            if used[j] {
                continue;
            }
            used[j] = true;
            let (c, d, i, s) = best(rest, hv, used);
            used[j] = false;
            let cand = if hv[j] == *first { (c + 1, d, i, s) } else { (c, d, i, s + 1) };
            let cost = |t: (usize, usize, usize, usize)| (t.1 + t.2 + t.3, usize::MAX - t.0);
            if cost(cand) < cost(choice) {
                choice = cand;
            }
        }
        choice
    }
    let mut labels: Vec<&str> = r.spans().iter().chain(h.spans()).map(|s| s.label.as_str()).collect();
    labels.sort();
    labels.dedup();
    let mut total = (0, 0, 0, usize::from(r.intent() != h.intent()));
    for l in labels {
        let vals = |u: &AnnotatedUtterance| {
            u.slot_values().filter(|(x, _)| *x == l).map(|(_, v)| v.to_vec()).collect::<Vec<_>>()
        };
        let (rv, hv) = (vals(r), vals(h));
        let (c, d, i, s) = best(&rv, &hv, &mut vec![false; hv.len()]);
        total = (total.0 + c, total.1 + d, total.2 + i, total.3 + s);
    }
    total
}

/// Every annotation of `tokens` with at most two spans over labels A and B.
fn all_annotations(tokens: &[&str]) -> Vec<AnnotatedUtterance> {
    let n = tokens.len();
    let mut span_sets: Vec<Vec<SlotSpan>> = vec![vec![]];
    let mut singles = Vec::new();
    for s in 0..n {
        for e in s + 1..=n {
            for l in ["A", "B"] {
                singles.push(SlotSpan::new(l, s, e));
            }
        }
    }
    for a in &singles {
        span_sets.push(vec![a.clone()]);
        for b in &singles {
            if b.start >= a.end {
                span_sets.push(vec![a.clone(), b.clone()]);
            }
        }
    }
    let toks: Vec<String> = tokens.iter().map(|t| t.to_string()).collect();
    span_sets
        .into_iter()
        .flat_map(|spans| {
            let toks = toks.clone();
            ["P", "Q"]
                .into_iter()
                .map(move |i| AnnotatedUtterance::new(toks.clone(), spans.clone(), i, "English").unwrap())
        })
        .collect()
}

#[test]
fn exhaustive_small_instances_match_oracles() {
    for tokens in [vec!["x"], vec!["x", "x"], vec!["x", "y", "x"], vec!["x", "x", "y", "x"]] {
        let all = all_annotations(&tokens);
        for r in &all {
            for h in &all {
                let c = semer_counts(r, h);
                assert_eq!(
                    (c.correct, c.deletions, c.insertions, c.substitutions),
                    semer_oracle(r, h),
                    "{:?} vs {:?}",
                    r.spans(),
                    h.spans()
                );
                let s = slot_f1(&[PredictionPair::new(r.clone(), h.clone())]).unwrap();
                let tp = h.spans().iter().filter(|x| r.spans().contains(x)).count();
                assert_eq!(s.true_positives, tp);
            }
        }
    }
}

#[test]
fn report_and_text() {
    let r = utt("a b", &[("x", 0, 1)], "T");
    let pairs = vec![
        PredictionPair::new(r.clone(), r.clone()),
        PredictionPair::new(utt("c d", &[], "U"), utt("c d", &[("x", 1, 2)], "T")),
    ];
    let rep = eval_report(&pairs, Some("T")).unwrap();
    assert_eq!(rep.intent.local_recall, Some(1.0));
    assert_eq!(rep.intent.global_accuracy, Some(0.5));
    assert_eq!(rep.local_slot_f1.unwrap().f1, 1.0);
    assert_eq!(rep.semer.semer, Some(1.0));
    let text = rep.to_text();
    assert!(text.contains("Local Intent Recall: 100.00"));
    assert!(text.contains("SemER: 100.00 (Cor 1, Del 0, Ins 1, Sub 1)"), "{text}");
    let json = serde_json::to_string(&rep).unwrap();
    let back: EvalReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, rep);
}

#[test]
fn relative_change_and_tables() {
    assert!(close(relative_change(0.20, 0.15).unwrap(), -25.0));
    assert_eq!(relative_change(0.2, 0.2), Some(0.0));
    assert_eq!(relative_change(0.0, 0.2), None);

    let mut cells = BTreeMap::new();
    cells.insert(("Music".to_string(), "de".to_string()), -36.8);
    cells.insert(("Timers".to_string(), "de".to_string()), -27.5);
    cells.insert(("ClockSettings".to_string(), "fr".to_string()), 1.8);
    let t = render_relative_table("Feature/Lang", &cells);
    let lines: Vec<&str> = t.lines().collect();
    assert!(lines[0].starts_with("Feature/Lang"));
    let clock: Vec<&str> = lines[2].split('|').map(str::trim).collect();
    assert_eq!(clock, ["ClockSettings", "-", "+1.8%"]);
    let avg: Vec<&str> = lines[6].split('|').map(str::trim).collect();
    assert_eq!(avg, ["Average", "-32.1%", "+1.8%"]);

    let m = mean_std(&[95.6, 98.3, 97.5]).unwrap();
    assert!(close(m.mean, 97.13333333333333));
    assert!((m.std - 1.3868).abs() < 1e-4);
    assert_eq!(mean_std(&[2.0]).unwrap().std, 0.0);
    assert_eq!(mean_std(&[]), None);
    assert_eq!(format!("{}", mean_std(&[1.0, 3.0]).unwrap()), "2.0 ±1.4");
}

proptest! {
    #[test]
    fn metric_properties(seed in any::<u64>(), n in 1usize..10, k in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs: Vec<PredictionPair> = (0..k)
            .map(|_| PredictionPair::new(random_utt(&mut rng, n), random_utt(&mut rng, n)))
            .collect();
        let swapped: Vec<PredictionPair> = pairs
            .iter()
            .map(|p| PredictionPair::new(p.hypothesis.clone(), p.reference.clone()))
            .collect();
        let a = slot_f1(&pairs).unwrap();
        let b = slot_f1(&swapped).unwrap();
        prop_assert!(close(a.precision, b.recall));
        prop_assert!(close(a.f1, b.f1));

        let same: Vec<PredictionPair> =
            pairs.iter().map(|p| PredictionPair::new(p.reference.clone(), p.reference.clone())).collect();
        prop_assert_eq!(slot_f1(&same).unwrap().f1, 1.0);
        prop_assert_eq!(semer(&same).semer, Some(0.0));

        for p in &pairs {
            let c = semer_counts(&p.reference, &p.hypothesis);
            prop_assert_eq!(c.correct + c.slot_substitutions() + c.deletions, p.reference.spans().len());
            prop_assert_eq!(c.correct + c.slot_substitutions() + c.insertions, p.hypothesis.spans().len());
        }
    }
}
