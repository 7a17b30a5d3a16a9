//! Replays the checked-in fuzz corpus, plus byte-level mutations of every
//! seed, through the same checks the fuzz targets make. Runs on stable.

use std::fs;
use std::path::PathBuf;

use hanforge::data::{
    parse_csv, parse_jsonl, parse_pretrained, split_sentences, to_jsonl, tokenize_words, Vocabulary, RESERVED,
};
use hanforge::encoders::model_from_container;
use hanforge::layers::TensorContainer;
use hanforge::viz::{parse_trace, trace_to_json};
use hanforge::RngState;

const MUTATIONS_PER_SEED: usize = 150;

fn seeds(target: &str) -> Vec<Vec<u8>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<PathBuf> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    let out: Vec<Vec<u8>> = files.iter().map(|p| fs::read(p).unwrap()).collect();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn mutate(seed: &[u8], rng: &mut RngState) -> Vec<u8> {
    let mut b = seed.to_vec();
    for _ in 0..1 + rng.below(4) {
        match rng.below(4) {
            0 if !b.is_empty() => {
                let i = rng.below(b.len());
                b[i] = rng.below(256) as u8;
            }
            1 if !b.is_empty() => {
                let cut = rng.below(b.len());
                b.truncate(cut);
            }
            2 => {
                let i = rng.below(b.len() + 1);
                let byte = b"\n\",{}[]:.0-1e\x00 "[rng.below(15)];
                b.insert(i, byte);
            }
            _ if !b.is_empty() => {
                let i = rng.below(b.len());
                let j = rng.below(b.len());
                b.swap(i, j);
            }
            _ => {}
        }
    }
    b
}

/// Every seed and its mutations.
fn inputs(target: &str) -> Vec<Vec<u8>> {
    let mut rng = RngState::new(0xf022);
    let mut out = Vec::new();
    for s in seeds(target) {
        for _ in 0..MUTATIONS_PER_SEED {
            out.push(mutate(&s, &mut rng));
        }
        out.push(s);
    }
    out
}

#[test]
fn dataset_jsonl() {
    let mut accepted = 0;
    for data in inputs("dataset_jsonl") {
        if let Ok(ds) = parse_jsonl(&data) {
            accepted += 1;
            let again = parse_jsonl(to_jsonl(&ds.articles).as_bytes()).unwrap();
            assert_eq!(again.articles, ds.articles);
            assert!(again.rejected.is_empty());
        }
    }
    assert!(accepted > 0);
}

#[test]
fn dataset_csv() {
    for data in inputs("dataset_csv") {
        if let Ok(ds) = parse_csv(&data[..]) {
            assert!(ds.articles.iter().all(|a| !a.uid.is_empty()));
        }
    }
}

#[test]
fn pretrained() {
    for data in inputs("pretrained") {
        let Ok(text) = std::str::from_utf8(&data) else { continue };
        if let Ok(p) = parse_pretrained(text) {
            for v in p.token_to_vector.values() {
                assert_eq!(v.len(), p.dimension);
                assert!(v.iter().all(|x| x.is_finite()));
            }
        }
    }
}

#[test]
fn vocab_file() {
    for data in inputs("vocab_file") {
        let Ok(text) = std::str::from_utf8(&data) else { continue };
        if let Ok(v) = Vocabulary::parse_file(text) {
            assert_eq!(Vocabulary::parse_file(&v.to_file_string()).unwrap(), v);
            for (id, tok) in v.tokens().iter().enumerate() {
                assert_eq!(v.id(tok), Some(id + RESERVED));
            }
        }
    }
}

#[test]
fn container() {
    let mut models = 0;
    for data in inputs("container") {
        let Ok(c) = TensorContainer::from_bytes(&data) else { continue };
        let bytes = c.to_bytes().unwrap();
        assert_eq!(TensorContainer::from_bytes(&bytes).unwrap(), c);
        models += model_from_container(c).is_ok() as usize;
    }
    // The unmutated seeds at least must load.
    assert!(models >= 2);
}

#[test]
fn trace_json() {
    let mut accepted = 0;
    for data in inputs("trace_json") {
        let Ok(text) = std::str::from_utf8(&data) else { continue };
        if let Ok(record) = parse_trace(text) {
            accepted += 1;
            assert_eq!(parse_trace(&trace_to_json(&record).unwrap()).unwrap(), record);
        }
    }
    assert!(accepted >= 2);
}

#[test]
fn tokenize() {
    for data in inputs("tokenize") {
        let text = String::from_utf8_lossy(&data);
        for sentence in split_sentences(&text) {
            let tokens = tokenize_words(&sentence);
            assert!(tokens.iter().all(|t| !t.is_empty()));
            assert_eq!(tokenize_words(&tokens.join(" ")), tokens);
        }
    }
}
