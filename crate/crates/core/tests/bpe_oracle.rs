mod common;

use std::collections::HashMap;
use std::sync::OnceLock;

use proptest::prelude::*;
use serde::Deserialize;
use skgkit::Tokenizer;

#[derive(Deserialize)]
struct Probe {
    text: String,
    ids: Vec<u32>,
}

#[test]
fn ids_match_reference_gpt2_tokenizer() {
    let tok = common::fixture_bpe();
    let probes: Vec<Probe> =
        serde_json::from_str(&std::fs::read_to_string(common::fixture("bpe/expected.json")).unwrap()).unwrap();
    assert!(probes.len() >= 10);
    for p in probes {
        let ids: Vec<u32> = tok
            .encode(&p.text)
            .iter()
            .map(|t| t.id.expect("byte alphabet covers input"))
            .collect();
        assert_eq!(ids, p.ids, "text {:?}", p.text);
        assert_eq!(tok.count(&p.text), p.ids.len());
    }
}

#[test]
fn spans_tile_the_input() {
    let tok = common::fixture_bpe();
    let text = "col :  | 3/31/2007 row 1 : Zürich 東京 \u{1F600}  end";
    let mut pos = 0;
    for t in tok.encode(text) {
        assert_eq!(t.start, pos);
        assert!(t.end > t.start);
        pos = t.end;
    }
    assert_eq!(pos, text.len());
}

struct Fixture {
    tok: skgkit::BpeTokenizer,
    vocab: HashMap<String, u32>,
    ranks: HashMap<(String, String), usize>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| Fixture {
        tok: common::fixture_bpe(),
        vocab: serde_json::from_str(&std::fs::read_to_string(common::fixture("bpe/vocab.json")).unwrap()).unwrap(),
        ranks: merges().into_iter().enumerate().map(|(i, m)| (m, i)).collect(),
    })
}

fn merges() -> Vec<(String, String)> {
    std::fs::read_to_string(common::fixture("bpe/merges.txt"))
        .unwrap()
        .lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|l| {
            let (a, b) = l.split_once(' ').unwrap();
            (a.to_string(), b.to_string())
        })
        .collect()
}

/// Textbook BPE on one pre-token: rescan for the lowest-ranked adjacent pair
/// and merge all of its occurrences left to right, until no pair has a rank.
fn naive_bpe(symbols: Vec<String>, ranks: &HashMap<(String, String), usize>) -> Vec<String> {
    let mut word = symbols;
    loop {
        let best = word
            .windows(2)
            .filter_map(|w| {
                ranks
                    .get(&(w[0].clone(), w[1].clone()))
                    .map(|&r| (r, w[0].clone(), w[1].clone()))
            })
            .min();
        let Some((_, a, b)) = best else { return word };
        let mut out = Vec::with_capacity(word.len());
        let mut i = 0;
        while i < word.len() {
            if i + 1 < word.len() && word[i] == a && word[i + 1] == b {
                out.push(format!("{a}{b}"));
                i += 2;
            } else {
                out.push(word[i].clone());
                i += 1;
            }
        }
        word = out;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    /// A space followed by letters is a single pre-token, so the whole
    /// encoding must equal the textbook merge loop on its symbols.
    #[test]
    fn heap_merge_matches_textbook_merge(word in "[a-z]{1,24}") {
        let Fixture { tok, vocab, ranks } = fixture();
        let text = format!(" {word}");
        let symbols = std::iter::once("\u{120}".to_string()).chain(word.chars().map(String::from)).collect();
        let expected: Vec<u32> = naive_bpe(symbols, ranks).iter().map(|s| vocab[s]).collect();
        let got: Vec<u32> = tok.encode(&text).iter().map(|t| t.id.unwrap()).collect();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn prefix_fitting_is_a_fitting_prefix(text in "\\PC{0,80}", n in 0usize..40) {
        let tok = &fixture().tok;
        let p = tok.prefix_fitting(&text, n);
        prop_assert!(text.starts_with(p));
        prop_assert!(tok.count(p) <= n);
        if tok.count(&text) <= n {
            prop_assert_eq!(p, text.as_str());
        }
    }
}
