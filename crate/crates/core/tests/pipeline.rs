//! Synthetic corpus through every stage: extract, aggregate, fit, classify.

use std::collections::{BTreeMap, BTreeSet};

use kanodrift::aggregator::{build_design_matrix, canonicalize, count_and_filter, pole_labels, assign_polarity};
use kanodrift::extractor::extract_all;
use kanodrift::kano::{classify_all, KanoCategory, KanoThresholds};
use kanodrift::linguistics::{LexiconSet, Pole};
use kanodrift::ologit::{fit, FitOptions, OrdinalData};
use kanodrift::par::Exec;
use kanodrift::synth::{generate_corpus, SynthSpec};

fn spec() -> SynthSpec {
    serde_json::from_value(serde_json::json!({
        "n_reviews": 6000,
        "seed": 21,
        "cutpoints": [-1.5, -0.5, 0.5, 1.5],
        "distractor_prob": 0.2,
        "affordances": [
            {"action": "read", "receiver": "book", "alpha": -1.0, "beta": 1.0, "p_low": 0.2, "p_high": 0.2},
            {"action": "charge", "alpha": -1.2, "beta": 0.0, "p_low": 0.2, "p_high": 0.2},
            {"action": "download", "receiver": "app", "alpha": 1.0, "beta": -1.0, "p_low": 0.2, "p_high": 0.2},
            {"action": "carry", "context": {"preposition": "on", "object": "beach"}, "alpha": 0.0, "beta": 1.2, "p_low": 0.2, "p_high": 0.2}
        ]
    }))
    .unwrap()
}

#[test]
fn planted_mentions_are_all_recovered() {
    let lex = LexiconSet::seed();
    let corpus = generate_corpus(&spec(), &lex, KanoThresholds::default()).unwrap();
    let mentions = extract_all(&corpus.sentences, &lex, Exec::Parallel);
    let found: BTreeMap<(String, usize), Vec<(String, Pole)>> = mentions.iter().fold(BTreeMap::new(), |mut acc, m| {
        acc.entry((m.review_id.clone(), m.sentence_index))
            .or_default()
            .push((canonicalize(m).to_string(), assign_polarity(m, &lex).0));
        acc
    });
    let mut planted = 0;
    for a in &corpus.manifest.affordances {
        for p in &a.planted_mentions {
            planted += 1;
            let got = found.get(&(p.review_id.clone(), p.sentence_index)).cloned().unwrap_or_default();
            assert_eq!(got, vec![(a.key.clone(), p.pole)], "{} {} ({})", p.review_id, p.sentence_index, p.template);
        }
    }
    // distractors yield nothing, so every mention is a planted one
    assert_eq!(planted, mentions.len());
}

#[test]
fn pipeline_recovers_planted_categories() {
    let lex = LexiconSet::seed();
    let t = KanoThresholds::default();
    let corpus = generate_corpus(&spec(), &lex, t).unwrap();
    let mentions = extract_all(&corpus.sentences, &lex, Exec::Parallel);
    let keys: Vec<_> = count_and_filter(&mentions, 10, 50, &BTreeSet::new(), Exec::Parallel)
        .into_iter()
        .map(|k| k.key)
        .collect();
    assert_eq!(keys.len(), 4);
    let (mut dm, diags) = build_design_matrix(&corpus.reviews, &mentions, &keys, &lex, Exec::Parallel).unwrap();
    assert!(diags.is_empty(), "{diags:?}");
    assert!(dm.retain_estimable().is_empty());
    let labels = pole_labels(&mentions, &dm.keys, &lex);
    let (data, dropped) = OrdinalData::from_design(&dm).unwrap();
    assert!(dropped.is_empty());
    let f = fit(&data, &FitOptions::default()).unwrap();
    assert!(f.converged);

    let points = classify_all(&f, &labels, t);
    let truth: BTreeMap<&str, KanoCategory> = corpus
        .manifest
        .affordances
        .iter()
        .map(|a| (a.key.as_str(), a.category))
        .collect();
    for p in &points {
        assert_eq!(Some(&p.category), truth.get(p.key.as_str()), "{}: K={} M={}", p.key, p.k, p.m);
    }
    let expected: BTreeSet<KanoCategory> = [
        KanoCategory::Performance,
        KanoCategory::MustBe,
        KanoCategory::Reverse,
        KanoCategory::Attractive,
    ]
    .into();
    assert_eq!(points.iter().map(|p| p.category).collect::<BTreeSet<_>>(), expected);
}
