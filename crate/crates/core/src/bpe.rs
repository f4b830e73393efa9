//! Joint byte-pair-encoding subword model.
//!
//! Words are whitespace-delimited. Every word starts as a character sequence
//! whose first character carries the word-boundary marker (`▁h o l a`), so
//! segmentation is reversible without escaping. Training repeatedly merges
//! the most frequent adjacent symbol pair; ties go to the lexicographically
//! smallest pair, which makes the merge list a pure function of the input.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::{write_atomic, Corpus};
use crate::error::{Error, Result};

pub const MARKER: char = '\u{2581}';
pub const DEFAULT_VOCAB_SIZE: usize = 32_000;
const MODEL_HEADER: &str = "#bpe-v1";

#[derive(Debug, Clone, PartialEq)]
pub struct BpeModel {
    merges: Vec<(String, String)>,
    ranks: HashMap<(String, String), usize>,
    vocab: HashMap<String, u32>,
    pieces: Vec<String>,
    vocab_size: usize,
    marker: char,
}

impl BpeModel {
    fn new(merges: Vec<(String, String)>, pieces: Vec<String>, vocab_size: usize, marker: char) -> Self {
        let ranks = merges
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let vocab = pieces
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i as u32))
            .collect();
        Self {
            merges,
            ranks,
            vocab,
            pieces,
            vocab_size,
            marker,
        }
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    /// Pieces in id order.
    pub fn pieces(&self) -> &[String] {
        &self.pieces
    }

    pub fn id(&self, piece: &str) -> Option<u32> {
        self.vocab.get(piece).copied()
    }

    pub fn contains(&self, piece: &str) -> bool {
        self.vocab.contains_key(piece)
    }

    pub fn vocab_len(&self) -> usize {
        self.pieces.len()
    }

    /// Requested vocabulary size; the trained vocabulary may be smaller.
    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn marker(&self) -> char {
        self.marker
    }

    fn initial_symbols(&self, word: &str) -> Vec<String> {
        let mut chars = word.chars();
        let Some(first) = chars.next() else {
            return Vec::new();
        };
        let mut symbols = Vec::with_capacity(word.len());
        let marked = format!("{}{first}", self.marker);
        if self.contains(&marked) {
            symbols.push(marked);
        } else {
            symbols.push(self.marker.to_string());
            symbols.push(first.to_string());
        }
        symbols.extend(chars.map(String::from));
        symbols
    }

    fn encode_word(&self, word: &str, out: &mut Vec<String>) {
        let mut symbols = self.initial_symbols(word);
        loop {
            let best = symbols
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0].clone(), w[1].clone())))
                .min()
                .copied();
            let Some(rank) = best else { break };
            let (a, b) = &self.merges[rank];
            let mut merged = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && &symbols[i] == a && &symbols[i + 1] == b {
                    merged.push(format!("{a}{b}"));
                    i += 2;
                } else {
                    merged.push(std::mem::take(&mut symbols[i]));
                    i += 1;
                }
            }
            symbols = merged;
        }
        out.extend(symbols);
    }

    /// Segment `text` into pieces. Characters never seen in training pass
    /// through as single-character pieces.
    pub fn encode(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        for word in text.split_whitespace() {
            self.encode_word(word, &mut out);
        }
        out
    }

    pub fn decode<S: AsRef<str>>(&self, pieces: &[S]) -> String {
        let joined: String = pieces.iter().map(AsRef::as_ref).collect();
        let spaced = joined.replace(self.marker, " ");
        match spaced.strip_prefix(' ') {
            Some(rest) => rest.to_string(),
            None => spaced,
        }
    }
}

#[derive(Default)]
struct Symbols {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Symbols {
    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&id) = self.ids.get(s) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(s.to_string());
        self.ids.insert(s.to_string(), id);
        id
    }
}

fn count_words<'a>(lines: &[&'a str]) -> HashMap<&'a str, u64> {
    lines
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<&'a str, u64>, line| {
            for w in line.split_whitespace() {
                *acc.entry(w).or_default() += 1;
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (w, c) in b {
                *a.entry(w).or_default() += c;
            }
            a
        })
}

type Pair = (u32, u32);

fn add_pairs(word: &[u32], freq: i64, counts: &mut HashMap<Pair, i64>) {
    for w in word.windows(2) {
        let e = counts.entry((w[0], w[1])).or_default();
        *e += freq;
    }
}

/// Train on raw lines. Stops at `vocab_size` pieces or when no adjacent pair
/// occurs at least twice.
pub fn train_bpe<'a, I>(lines: I, vocab_size: usize) -> Result<BpeModel>
where
    I: IntoIterator<Item = &'a str>,
{
    let lines: Vec<&str> = lines.into_iter().collect();
    let word_counts = count_words(&lines);
    if word_counts.is_empty() {
        return Err(Error::invalid("BPE training text is empty"));
    }
    let mut words: Vec<(&str, u64)> = word_counts.into_iter().collect();
    words.sort_unstable();

    let mut base: BTreeSet<String> = BTreeSet::new();
    base.insert(MARKER.to_string());
    for (w, _) in &words {
        let mut chars = w.chars();
        if let Some(c) = chars.next() {
            base.insert(c.to_string());
            base.insert(format!("{MARKER}{c}"));
        }
        base.extend(chars.map(String::from));
    }
    if vocab_size < base.len() {
        return Err(Error::invalid(format!(
            "vocab_size {vocab_size} is smaller than the base character inventory of {}",
            base.len()
        )));
    }

    let mut symbols = Symbols::default();
    let mut pieces: Vec<String> = base.iter().cloned().collect();
    let mut in_vocab: HashSet<String> = base.into_iter().collect();

    let mut seqs: Vec<Vec<u32>> = Vec::with_capacity(words.len());
    let freqs: Vec<i64> = words.iter().map(|&(_, c)| c as i64).collect();
    for (w, _) in &words {
        let mut chars = w.chars();
        let first = chars.next().expect("whitespace split yields non-empty words");
        let mut seq = vec![symbols.intern(&format!("{MARKER}{first}"))];
        seq.extend(chars.map(|c| symbols.intern(c.encode_utf8(&mut [0; 4]))));
        seqs.push(seq);
    }

    let mut counts: HashMap<Pair, i64> = HashMap::new();
    let mut where_: HashMap<Pair, HashSet<usize>> = HashMap::new();
    for (i, seq) in seqs.iter().enumerate() {
        add_pairs(seq, freqs[i], &mut counts);
        for w in seq.windows(2) {
            where_.entry((w[0], w[1])).or_default().insert(i);
        }
    }

    let mut merges = Vec::new();
    while pieces.len() < vocab_size {
        let names = &symbols.names;
        let best = counts
            .iter()
            .filter(|(_, &c)| c >= 2)
            .max_by(|(pa, ca), (pb, cb)| {
                ca.cmp(cb).then_with(|| {
                    let a = (&names[pa.0 as usize], &names[pa.1 as usize]);
                    let b = (&names[pb.0 as usize], &names[pb.1 as usize]);
                    b.cmp(&a)
                })
            })
            .map(|(&p, _)| p);
        let Some((a, b)) = best else { break };

        let left = symbols.names[a as usize].clone();
        let right = symbols.names[b as usize].clone();
        let joined = format!("{left}{right}");
        let new_id = symbols.intern(&joined);
        merges.push((left, right));
        if in_vocab.insert(joined.clone()) {
            pieces.push(joined);
        }

        let mut affected: Vec<usize> = where_.remove(&(a, b)).unwrap_or_default().into_iter().collect();
        affected.sort_unstable();
        for i in affected {
            let old = &seqs[i];
            if !old.windows(2).any(|w| w[0] == a && w[1] == b) {
                continue;
            }
            let mut merged = Vec::with_capacity(old.len());
            let mut k = 0;
            while k < old.len() {
                if k + 1 < old.len() && old[k] == a && old[k + 1] == b {
                    merged.push(new_id);
                    k += 2;
                } else {
                    merged.push(old[k]);
                    k += 1;
                }
            }
            add_pairs(old, -freqs[i], &mut counts);
            add_pairs(&merged, freqs[i], &mut counts);
            for w in merged.windows(2) {
                where_.entry((w[0], w[1])).or_default().insert(i);
            }
            seqs[i] = merged;
        }
        counts.retain(|_, c| *c > 0);
    }

    Ok(BpeModel::new(merges, pieces, vocab_size, MARKER))
}

/// One model over both sides of every corpus.
pub fn train_bpe_joint(corpora: &[Corpus], vocab_size: usize) -> Result<BpeModel> {
    let lines = corpora
        .iter()
        .flat_map(|c| c.items.iter())
        .flat_map(|p| [p.source.as_str(), p.target.as_str()]);
    train_bpe(lines, vocab_size)
}

pub fn write_model(model: &BpeModel, path: &Path) -> Result<()> {
    write_atomic(path, |w: &mut dyn Write| {
        writeln!(w, "{MODEL_HEADER}")?;
        writeln!(w, "vocab_size {}", model.vocab_size)?;
        writeln!(w, "marker {}", model.marker)?;
        writeln!(w, "merges {}", model.merges.len())?;
        let mut line = String::new();
        for (a, b) in &model.merges {
            line.clear();
            let _ = write!(line, "{a} {b}");
            writeln!(w, "{line}")?;
        }
        writeln!(w, "vocab {}", model.pieces.len())?;
        for (i, p) in model.pieces.iter().enumerate() {
            writeln!(w, "{p} {i}")?;
        }
        Ok(())
    })
}

pub fn read_model(path: &Path) -> Result<BpeModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: msg,
    };
    let lines: Vec<&str> = text.lines().collect();
    let mut pos = 0;
    let next = |pos: &mut usize| -> Result<(usize, &str)> {
        let l = lines
            .get(*pos)
            .copied()
            .ok_or_else(|| bad(*pos + 1, "unexpected end of file".into()))?;
        *pos += 1;
        Ok((*pos, l))
    };
    let keyed = |(n, line): (usize, &str), key: &str| -> Result<String> {
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| bad(n, format!("expected `{key} ...`")))
    };
    let count = |n: usize, v: String| -> Result<usize> {
        v.parse().map_err(|_| bad(n, format!("invalid count {v:?}")))
    };

    let (n, header) = next(&mut pos)?;
    if header != MODEL_HEADER {
        return Err(bad(n, "missing #bpe-v1 header".into()));
    }
    let l = next(&mut pos)?;
    let vocab_size = count(l.0, keyed(l, "vocab_size")?)?;
    let l = next(&mut pos)?;
    let marker_s = keyed(l, "marker")?;
    let mut mc = marker_s.chars();
    let marker = match (mc.next(), mc.next()) {
        (Some(c), None) => c,
        _ => return Err(bad(l.0, "marker must be one character".into())),
    };
    let l = next(&mut pos)?;
    let n_merges = count(l.0, keyed(l, "merges")?)?;
    let mut merges = Vec::with_capacity(n_merges);
    for _ in 0..n_merges {
        let (n, line) = next(&mut pos)?;
        let (a, b) = line
            .split_once(' ')
            .ok_or_else(|| bad(n, "expected `left right`".into()))?;
        merges.push((a.to_string(), b.to_string()));
    }
    let l = next(&mut pos)?;
    let n_vocab = count(l.0, keyed(l, "vocab")?)?;
    let mut pieces = Vec::with_capacity(n_vocab);
    for i in 0..n_vocab {
        let (n, line) = next(&mut pos)?;
        let (p, id) = line
            .rsplit_once(' ')
            .ok_or_else(|| bad(n, "expected `piece id`".into()))?;
        if id.parse::<usize>().ok() != Some(i) {
            return Err(bad(n, format!("piece ids must be dense; expected {i}")));
        }
        pieces.push(p.to_string());
    }
    Ok(BpeModel::new(merges, pieces, vocab_size, marker))
}
