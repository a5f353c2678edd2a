//! Hand-annotated extraction corpus. Every sentence's gold parse and the
//! mentions it should yield live under `tests/data`; the extractor has to
//! reproduce the expected file exactly.

use std::fs::File;

use kanodrift::extractor::{extract_all, replay, AffordanceMention};
use kanodrift::linguistics::{parse_conllu, LexiconSet};
use kanodrift::par::Exec;

const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data");

fn dash(v: Option<impl ToString>) -> String {
    v.map_or_else(|| "-".to_string(), |s| s.to_string())
}

fn row(m: &AffordanceMention) -> String {
    let t = &m.tokens;
    [
        m.review_id.clone(),
        m.sentence_index.to_string(),
        m.action_word.clone(),
        dash(m.action_receiver.as_ref()),
        dash(m.perceived_quality.as_ref()),
        m.negated.to_string(),
        dash(m.usage_context.as_ref().map(|c| format!("{} {}", c.preposition, c.object))),
        [Some(t.action), t.receiver, t.quality, t.context_preposition, t.context_object]
            .iter()
            .map(|i| dash(*i))
            .collect::<Vec<_>>()
            .join(","),
        format!("{}-{}", m.char_span.0, m.char_span.1),
    ]
    .join("\t")
}

#[test]
fn golden_corpus_matches_exactly() {
    let rep = parse_conllu(File::open(format!("{DATA}/golden.conllu")).unwrap()).unwrap();
    assert!(rep.diagnostics.is_empty(), "{:?}", rep.diagnostics);
    assert!(rep.sentences.len() >= 20);
    let quoted = [
        "I can read books at night without hurting my eyes.",
        "in the sun",
        "on plane",
        "on the beach",
    ];
    for q in quoted {
        assert!(
            rep.sentences.iter().any(|s| s.source_text().contains(q)),
            "golden corpus lacks {q:?}"
        );
    }

    let lex = LexiconSet::seed();
    let got: Vec<String> = extract_all(&rep.sentences, &lex, Exec::Parallel).iter().map(row).collect();
    let expected_text = std::fs::read_to_string(format!("{DATA}/golden_expected.tsv")).unwrap();
    let expected: Vec<&str> = expected_text.lines().skip(1).filter(|l| !l.is_empty()).collect();

    let mut mismatches = Vec::new();
    for i in 0..got.len().max(expected.len()) {
        let (g, e) = (got.get(i).map(String::as_str), expected.get(i).copied());
        if g != e {
            mismatches.push(format!("#{i}\n  got      {g:?}\n  expected {e:?}"));
        }
    }
    assert!(mismatches.is_empty(), "{}", mismatches.join("\n"));
}

#[test]
fn golden_mentions_replay() {
    let rep = parse_conllu(File::open(format!("{DATA}/golden.conllu")).unwrap()).unwrap();
    let lex = LexiconSet::seed();
    for s in &rep.sentences {
        for m in extract_all(std::slice::from_ref(s), &lex, Exec::Sequential) {
            replay(s, &m, &lex).unwrap();
        }
    }
}
