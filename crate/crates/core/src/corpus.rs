//! Token files, vocabularies, fixed-length segments and sub-sequence windows.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const UNK: &str = "<unk>";
pub const EOS: &str = "<eos>";

/// Reads a whitespace-tokenized file, appending an end-of-sentence marker per line.
pub fn load_tokens(path: impl AsRef<Path>, lowercase: bool) -> Result<Vec<String>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes).map_err(|_| Error::Decode { path: path.to_path_buf() })?;
    let mut tokens = Vec::new();
    for line in text.lines() {
        for word in line.split_whitespace() {
            tokens.push(if lowercase { word.to_lowercase() } else { word.to_string() });
        }
        tokens.push(EOS.to_string());
    }
    Ok(tokens)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    word_to_id: HashMap<String, usize>,
    id_to_word: Vec<String>,
    unk_id: usize,
    eos_id: usize,
}

impl Vocab {
    /// Frequency-sorted vocabulary (ties lexicographic); `<unk>` and `<eos>`
    /// come after the regular words. `max_size` caps the regular words only.
    pub fn build(tokens: &[String], max_size: Option<usize>) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in tokens {
            if t != UNK && t != EOS {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        if let Some(cap) = max_size {
            ranked.truncate(cap);
        }
        let mut id_to_word: Vec<String> = ranked.into_iter().map(|(w, _)| w.to_string()).collect();
        let unk_id = id_to_word.len();
        id_to_word.push(UNK.to_string());
        let eos_id = id_to_word.len();
        id_to_word.push(EOS.to_string());
        Self::from_words(id_to_word, unk_id, eos_id)
    }

    fn from_words(id_to_word: Vec<String>, unk_id: usize, eos_id: usize) -> Self {
        let word_to_id = id_to_word.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Self { word_to_id, id_to_word, unk_id, eos_id }
    }

    pub fn len(&self) -> usize {
        self.id_to_word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_word.is_empty()
    }

    pub fn unk_id(&self) -> usize {
        self.unk_id
    }

    pub fn eos_id(&self) -> usize {
        self.eos_id
    }

    pub fn id(&self, word: &str) -> usize {
        self.word_to_id.get(word).copied().unwrap_or(self.unk_id)
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.id_to_word.get(id).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.id_to_word
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.word(i).unwrap_or(UNK).to_string()).collect()
    }

    /// Hex SHA-256 over the id-ordered word list.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for w in &self.id_to_word {
            h.update(w.as_bytes());
            h.update([0u8]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn build_vocab(tokens: &[String], max_size: Option<usize>) -> Vocab {
    Vocab::build(tokens, max_size)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<usize>,
}

impl TokenSequence {
    pub fn new(ids: Vec<usize>) -> Self {
        Self { ids }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Consecutive non-overlapping chunks of exactly `len` ids; the remainder is dropped.
pub fn segment(ids: &[usize], len: usize) -> Vec<TokenSequence> {
    if len == 0 {
        return Vec::new();
    }
    ids.chunks_exact(len).map(|c| TokenSequence::new(c.to_vec())).collect()
}

/// A length-`length` window covering 1-based positions `start ..= start + length - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowSpec {
    pub sequence_index: usize,
    pub start: usize,
    pub length: usize,
}

impl WindowSpec {
    /// Zero-based index range into a sequence.
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start - 1..self.start - 1 + self.length
    }

    /// Zero-based index of the last position.
    pub fn last(&self) -> usize {
        self.start + self.length - 2
    }
}

/// Windows `p = 1 ..= T - W + 1` for one sequence (index 0). Empty when `W > T` or `W == 0`.
pub fn enumerate_windows(seq_len: usize, window: usize) -> Vec<WindowSpec> {
    enumerate_windows_for(0, seq_len, window)
}

pub fn enumerate_windows_for(sequence_index: usize, seq_len: usize, window: usize) -> Vec<WindowSpec> {
    if window == 0 || window > seq_len {
        return Vec::new();
    }
    (1..=seq_len - window + 1).map(|start| WindowSpec { sequence_index, start, length: window }).collect()
}

/// Train/valid/test token streams of one corpus directory.
#[derive(Debug, Clone)]
pub struct CorpusSplits {
    pub vocab: Vocab,
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub path: PathBuf,
    /// Truncate the training stream (desk scale); `None` keeps everything.
    pub max_tokens: Option<usize>,
    /// Truncate validation and test streams.
    pub max_eval_tokens: Option<usize>,
    pub vocab_cap: Option<usize>,
    pub bptt: usize,
    pub lowercase: bool,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            path: PathBuf::from("data/ptb"),
            max_tokens: Some(100_000),
            max_eval_tokens: None,
            vocab_cap: None,
            bptt: 35,
            lowercase: false,
        }
    }
}

const SPLIT_NAMES: [[&str; 3]; 3] = [
    ["ptb.train.txt", "ptb.valid.txt", "ptb.test.txt"],
    ["wiki.train.tokens", "wiki.valid.tokens", "wiki.test.tokens"],
    ["train.txt", "valid.txt", "test.txt"],
];

/// Resolves the three split files inside a corpus directory.
pub fn split_paths(dir: &Path) -> Result<[PathBuf; 3]> {
    for names in SPLIT_NAMES {
        let paths = names.map(|n| dir.join(n));
        if paths.iter().all(|p| p.is_file()) {
            return Ok(paths);
        }
    }
    Err(Error::io(
        dir,
        std::io::Error::new(
            std::io::ErrorKind::NotFound,
            "no train/valid/test split files (expected ptb.*.txt, wiki.*.tokens or {train,valid,test}.txt)",
        ),
    ))
}

impl CorpusSplits {
    /// Vocabulary comes from the full training split; truncation applies afterwards.
    pub fn load(cfg: &CorpusConfig) -> Result<Self> {
        let [train_p, valid_p, test_p] = split_paths(&cfg.path)?;
        let train_tokens = load_tokens(&train_p, cfg.lowercase)?;
        let vocab = Vocab::build(&train_tokens, cfg.vocab_cap);
        let mut train = vocab.encode(&train_tokens);
        let mut valid = vocab.encode(&load_tokens(&valid_p, cfg.lowercase)?);
        let mut test = vocab.encode(&load_tokens(&test_p, cfg.lowercase)?);
        if let Some(n) = cfg.max_tokens {
            train.truncate(n);
        }
        if let Some(n) = cfg.max_eval_tokens {
            valid.truncate(n);
            test.truncate(n);
        }
        Ok(Self { vocab, train, valid, test })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn one_line_gets_an_eos() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "the cat sat").unwrap();
        assert_eq!(load_tokens(f.path(), false).unwrap(), toks(&["the", "cat", "sat", EOS]));
    }

    #[test]
    fn empty_file_has_no_tokens() {
        let f = tempfile::NamedTempFile::new().unwrap();
        assert!(load_tokens(f.path(), false).unwrap().is_empty());
    }

    #[test]
    fn token_count_is_lines_plus_words() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        let text = " aer banknote berlitz \n\n pierre <unk> N years old will join the board \n a b\n";
        f.write_all(text.as_bytes()).unwrap();
        // wc-style: count newline-terminated lines and whitespace-separated words
        let lines = text.matches('\n').count();
        let words = text.split_whitespace().count();
        assert_eq!(load_tokens(f.path(), false).unwrap().len(), lines + words);
    }

    #[test]
    fn lowercase_and_errors() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "The Cat").unwrap();
        assert_eq!(load_tokens(f.path(), true).unwrap(), toks(&["the", "cat", EOS]));

        let missing = load_tokens("/nonexistent/corpus.txt", false).unwrap_err();
        assert!(missing.to_string().contains("/nonexistent/corpus.txt"));

        let mut bad = tempfile::NamedTempFile::new().unwrap();
        bad.write_all(&[0x66, 0xff, 0xfe, 0x0a]).unwrap();
        assert!(matches!(load_tokens(bad.path(), false), Err(Error::Decode { .. })));
    }

    #[test]
    fn vocab_order_and_specials() {
        let v = build_vocab(&toks(&["a", "b", "a"]), None);
        assert_eq!(v.words(), &toks(&["a", "b", UNK, EOS])[..]);
        assert_eq!(v.unk_id(), 2);
        assert_eq!(v.eos_id(), 3);
    }

    #[test]
    fn vocab_ties_are_lexicographic() {
        let v = build_vocab(&toks(&["z", "y", "x", "y", "z"]), None);
        assert_eq!(&v.words()[..3], &toks(&["y", "z", "x"])[..]);
    }

    #[test]
    fn vocab_cap_maps_rare_words_to_unk() {
        let tokens = toks(&["a", "a", "a", "b", "b", "c", "d", "e"]);
        let v = build_vocab(&tokens, Some(2));
        assert_eq!(v.len(), 4);
        let ids = v.encode(&tokens);
        assert_eq!(ids.iter().filter(|&&i| i == v.unk_id()).count(), 3);
        for w in ["c", "d", "e"] {
            assert_eq!(v.id(w), v.unk_id());
        }
    }

    #[test]
    fn unk_in_text_does_not_get_a_second_id() {
        let v = build_vocab(&toks(&["a", UNK, UNK, EOS]), None);
        assert_eq!(v.len(), 3);
        assert_eq!(v.id(UNK), v.unk_id());
    }

    #[test]
    fn segment_counts() {
        let ids: Vec<usize> = (0..70).collect();
        assert_eq!(segment(&ids, 35).len(), 2);
        assert_eq!(segment(&ids[..34], 35).len(), 0);
        let big: Vec<usize> = vec![0; 100_000];
        assert_eq!(segment(&big, 35).len(), 2857);
    }

    #[test]
    fn window_counts() {
        assert_eq!(enumerate_windows(35, 35).len(), 1);
        assert_eq!(enumerate_windows(35, 1).len(), 35);
        assert_eq!(enumerate_windows(35, 15).len(), 21);
        assert!(enumerate_windows(10, 11).is_empty());
        let w = enumerate_windows(35, 15)[20];
        assert_eq!((w.start, w.range(), w.last()), (21, 20..35, 34));
    }

    #[test]
    fn split_files_are_resolved() {
        let dir = tempfile::tempdir().unwrap();
        assert!(split_paths(dir.path()).is_err());
        for (name, body) in [("train.txt", "a b a\nb a\n"), ("valid.txt", "a c\n"), ("test.txt", "b\n")] {
            fs::write(dir.path().join(name), body).unwrap();
        }
        let cfg = CorpusConfig { path: dir.path().into(), max_tokens: Some(4), ..Default::default() };
        let splits = CorpusSplits::load(&cfg).unwrap();
        assert_eq!(splits.vocab.words(), &toks(&["a", "b", UNK, EOS])[..]);
        assert_eq!(splits.train, vec![0, 1, 0, 3]);
        assert_eq!(splits.valid, vec![0, 2, 3]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn encode_decode_round_trip(words in prop::collection::vec("[a-e]{1,2}", 1..60), cap in 1usize..10) {
                let tokens: Vec<String> = words;
                let v = build_vocab(&tokens, Some(cap));
                let decoded = v.decode(&v.encode(&tokens));
                for (orig, back) in tokens.iter().zip(&decoded) {
                    if v.word_to_id.contains_key(orig) {
                        prop_assert_eq!(orig, back);
                    } else {
                        prop_assert_eq!(back, UNK);
                    }
                }
            }

            #[test]
            fn window_count_formula(t in 1usize..80, w in 1usize..80) {
                prop_assume!(w <= t);
                prop_assert_eq!(enumerate_windows(t, w).len(), t - w + 1);
            }

            #[test]
            fn segments_are_a_prefix(ids in prop::collection::vec(0usize..50, 0..300), len in 1usize..40) {
                let flat: Vec<usize> = segment(&ids, len).into_iter().flat_map(|s| s.ids).collect();
                prop_assert_eq!(&ids[..flat.len()], &flat[..]);
                prop_assert!(ids.len() - flat.len() < len);
            }
        }
    }
}
