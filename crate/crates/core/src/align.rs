//! Lexical alignment model with a diagonal prior and a null word, trained by
//! EM, used to score and filter badly aligned sentence pairs.
//!
//! Each target token `f_i` (position `i` of `m`) aligns to source position
//! `j` of `n` or to NULL. The alignment prior is fixed:
//!
//! ```text
//! p(NULL)       = p0
//! p(j | i,m,n)  = (1 - p0) * exp(-tension * |i/m - j/n|) / Z(i,m,n)
//! ```
//!
//! Only the lexical table `t(f | e)` is learned; the tension stays fixed.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{token_count, write_atomic, Corpus, LangCode, SentencePair};
use crate::error::{Error, Result};
use crate::report::StageReport;

/// Token used for the null word in model files.
pub const NULL_TOKEN: &str = "<eps>";
const MODEL_HEADER: &str = "#align-model-v1";
/// Pairs per E-step shard. Count reduction runs in shard order, so results
/// do not depend on the number of worker threads.
const SHARD: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignTrainConfig {
    pub iterations: usize,
    pub p0: f64,
    pub tension: f64,
    pub smoothing_floor: f64,
}

impl Default for AlignTrainConfig {
    fn default() -> Self {
        Self {
            iterations: 5,
            p0: 0.08,
            tension: 4.0,
            smoothing_floor: 1e-9,
        }
    }
}

impl AlignTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::invalid("iterations must be at least 1"));
        }
        if !(self.p0 > 0.0 && self.p0 < 1.0) {
            return Err(Error::invalid("p0 must lie in (0, 1)"));
        }
        if !(self.tension > 0.0 && self.tension.is_finite()) {
            return Err(Error::invalid("tension must be positive"));
        }
        if !(self.smoothing_floor > 0.0 && self.smoothing_floor < 1.0) {
            return Err(Error::invalid("smoothing_floor must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Vocab {
    words: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocab {
    fn intern(&mut self, word: &str) -> u32 {
        if let Some(&id) = self.ids.get(word) {
            return id;
        }
        let id = self.words.len() as u32;
        self.words.push(word.to_string());
        self.ids.insert(word.to_string(), id);
        id
    }

    fn get(&self, word: &str) -> Option<u32> {
        self.ids.get(word).copied()
    }
}

/// Trained lexical translation table plus the fixed prior parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentModel {
    pub src: LangCode,
    pub tgt: LangCode,
    pub p0: f64,
    pub tension: f64,
    pub smoothing_floor: f64,
    source_vocab: Vocab,
    target_vocab: Vocab,
    /// Row 0 is the null word; row `e + 1` is source token `e`.
    rows: Vec<BTreeMap<u32, f64>>,
}

/// Per-iteration corpus log-likelihood. Entry `k` is the likelihood under the
/// parameters after `k` EM updates.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignTrace {
    pub log_likelihood: Vec<f64>,
}

fn prior_weights(i: usize, m: usize, n: usize, p0: f64, tension: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(p0);
    let pos = i as f64 / m as f64;
    let start = out.len();
    let mut z = 0.0;
    for j in 1..=n {
        let w = (-tension * (pos - j as f64 / n as f64).abs()).exp();
        z += w;
        out.push(w);
    }
    let scale = (1.0 - p0) / z;
    for w in &mut out[start..] {
        *w *= scale;
    }
}

struct Encoded {
    source: Vec<u32>,
    target: Vec<u32>,
}

fn tokens(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

impl AlignmentModel {
    /// `t(f | e)`, with `e = None` for the null word. `None` when the pair is
    /// not in the table.
    pub fn prob(&self, e: Option<&str>, f: &str) -> Option<f64> {
        let row = match e {
            None => 0,
            Some(e) => self.source_vocab.get(e)? as usize + 1,
        };
        let f = self.target_vocab.get(f)?;
        self.rows[row].get(&f).copied()
    }

    /// Target token with the highest `t(f | e)`; ties go to the lower token id.
    pub fn best_translation(&self, e: &str) -> Option<&str> {
        let row = &self.rows[self.source_vocab.get(e)? as usize + 1];
        let mut best: Option<(u32, f64)> = None;
        for (&f, &p) in row {
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((f, p));
            }
        }
        best.map(|(f, _)| self.target_vocab.words[f as usize].as_str())
    }

    pub fn source_words(&self) -> impl Iterator<Item = &str> {
        self.source_vocab.words.iter().map(String::as_str)
    }

    /// Sum of each table row, null row first.
    pub fn row_sums(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.values().sum()).collect()
    }

    fn lookup(&self, row: Option<usize>, f: Option<u32>) -> f64 {
        match (row, f) {
            (Some(r), Some(f)) => self.rows[r]
                .get(&f)
                .copied()
                .unwrap_or(self.smoothing_floor),
            _ => self.smoothing_floor,
        }
    }

    /// Mean per-target-token log-probability of `pair` under the model, in
    /// nats. Always `<= 0`.
    pub fn score_pair(&self, pair: &SentencePair) -> Result<f64> {
        let src = tokens(&pair.source);
        let tgt = tokens(&pair.target);
        if src.is_empty() || tgt.is_empty() {
            return Err(Error::invalid("cannot score a pair with an empty side"));
        }
        let rows: Vec<Option<usize>> = std::iter::once(Some(0))
            .chain(
                src.iter()
                    .map(|e| self.source_vocab.get(e).map(|id| id as usize + 1)),
            )
            .collect();
        let (n, m) = (src.len(), tgt.len());
        let mut prior = Vec::with_capacity(n + 1);
        let mut total = 0.0;
        for (i, f) in tgt.iter().enumerate() {
            let f = self.target_vocab.get(f);
            prior_weights(i + 1, m, n, self.p0, self.tension, &mut prior);
            let p: f64 = prior
                .iter()
                .zip(&rows)
                .map(|(w, &r)| w * self.lookup(r, f))
                .sum();
            total += p.ln();
        }
        Ok(total / m as f64)
    }

    fn encode_known(&self, pair: &SentencePair) -> Encoded {
        Encoded {
            source: tokens(&pair.source)
                .iter()
                .filter_map(|e| self.source_vocab.get(e))
                .collect(),
            target: tokens(&pair.target)
                .iter()
                .filter_map(|f| self.target_vocab.get(f))
                .collect(),
        }
    }

    /// E-step over one shard: expected counts keyed by (row, target id) and
    /// the shard log-likelihood.
    fn expected_counts(&self, shard: &[Encoded]) -> (HashMap<(u32, u32), f64>, f64) {
        let mut counts: HashMap<(u32, u32), f64> = HashMap::new();
        let mut ll = 0.0;
        let mut prior = Vec::new();
        let mut post = Vec::new();
        for pair in shard {
            let (n, m) = (pair.source.len(), pair.target.len());
            for (i, &f) in pair.target.iter().enumerate() {
                prior_weights(i + 1, m, n, self.p0, self.tension, &mut prior);
                post.clear();
                post.push(prior[0] * self.rows[0].get(&f).copied().unwrap_or(0.0));
                for (j, &e) in pair.source.iter().enumerate() {
                    let t = self.rows[e as usize + 1].get(&f).copied().unwrap_or(0.0);
                    post.push(prior[j + 1] * t);
                }
                let denom: f64 = post.iter().sum();
                ll += denom.ln();
                *counts.entry((0, f)).or_default() += post[0] / denom;
                for (j, &e) in pair.source.iter().enumerate() {
                    *counts.entry((e + 1, f)).or_default() += post[j + 1] / denom;
                }
            }
        }
        (counts, ll)
    }

    fn e_step(&self, data: &[Encoded]) -> (HashMap<(u32, u32), f64>, f64) {
        let shards: Vec<_> = data
            .par_chunks(SHARD)
            .map(|s| self.expected_counts(s))
            .collect();
        let mut total: HashMap<(u32, u32), f64> = HashMap::new();
        let mut ll = 0.0;
        for (counts, shard_ll) in shards {
            ll += shard_ll;
            for (k, v) in counts {
                *total.entry(k).or_default() += v;
            }
        }
        (total, ll)
    }

    fn m_step(&mut self, counts: HashMap<(u32, u32), f64>) {
        let mut rows = vec![BTreeMap::new(); self.rows.len()];
        for ((r, f), c) in counts {
            rows[r as usize].insert(f, c);
        }
        for row in &mut rows {
            let z: f64 = row.values().sum();
            if z > 0.0 {
                for v in row.values_mut() {
                    *v /= z;
                }
            }
        }
        self.rows = rows;
    }

    /// Corpus log-likelihood (sum over target tokens), skipping tokens the
    /// model has never seen.
    pub fn corpus_log_likelihood(&self, corpus: &Corpus) -> f64 {
        let data: Vec<Encoded> = corpus
            .items
            .iter()
            .map(|p| self.encode_known(p))
            .filter(|e| !e.source.is_empty())
            .collect();
        self.e_step(&data).1
    }
}

fn encode_training(corpus: &Corpus) -> Result<(Vocab, Vocab, Vec<Encoded>)> {
    if corpus.is_empty() {
        return Err(Error::invalid("cannot train an alignment model on an empty corpus"));
    }
    let mut sv = Vocab::default();
    let mut tv = Vocab::default();
    let mut data = Vec::with_capacity(corpus.len());
    for (idx, pair) in corpus.items.iter().enumerate() {
        let src = tokens(&pair.source);
        let tgt = tokens(&pair.target);
        if src.is_empty() || tgt.is_empty() {
            return Err(Error::pair(idx, "zero-token side in alignment training data"));
        }
        data.push(Encoded {
            source: src.iter().map(|w| sv.intern(w)).collect(),
            target: tgt.iter().map(|w| tv.intern(w)).collect(),
        });
    }
    Ok((sv, tv, data))
}

/// Train with EM and return the model together with the likelihood trace.
pub fn train_alignment_traced(
    corpus: &Corpus,
    cfg: &AlignTrainConfig,
) -> Result<(AlignmentModel, AlignTrace)> {
    cfg.validate()?;
    let (source_vocab, target_vocab, data) = encode_training(corpus)?;

    // uniform start over co-occurring target tokens
    let mut rows: Vec<BTreeMap<u32, f64>> = vec![BTreeMap::new(); source_vocab.words.len() + 1];
    for pair in &data {
        for &f in &pair.target {
            rows[0].insert(f, 1.0);
            for &e in &pair.source {
                rows[e as usize + 1].insert(f, 1.0);
            }
        }
    }
    for row in &mut rows {
        let u = 1.0 / row.len() as f64;
        row.values_mut().for_each(|v| *v = u);
    }

    let mut model = AlignmentModel {
        src: corpus.src.clone(),
        tgt: corpus.tgt.clone(),
        p0: cfg.p0,
        tension: cfg.tension,
        smoothing_floor: cfg.smoothing_floor,
        source_vocab,
        target_vocab,
        rows,
    };

    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    for _ in 0..cfg.iterations {
        let (counts, ll) = model.e_step(&data);
        trace.push(ll);
        model.m_step(counts);
    }
    trace.push(model.e_step(&data).1);
    Ok((
        model,
        AlignTrace {
            log_likelihood: trace,
        },
    ))
}

pub fn train_alignment(corpus: &Corpus, cfg: &AlignTrainConfig) -> Result<AlignmentModel> {
    train_alignment_traced(corpus, cfg).map(|(m, _)| m)
}

/// How [`filter_by_alignment`] picks the pairs to drop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", content = "value", rename_all = "lowercase")]
pub enum AlignPolicy {
    /// Drop the lowest-scoring `p` percent, `p` in [0, 100).
    Percentile(f64),
    /// Drop every pair scoring below the threshold.
    Absolute(f64),
}

impl Default for AlignPolicy {
    fn default() -> Self {
        AlignPolicy::Percentile(10.0)
    }
}

impl AlignPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AlignPolicy::Percentile(p) if !(0.0..100.0).contains(&p) => Err(Error::invalid(
                format!("percentile {p} outside [0, 100)"),
            )),
            AlignPolicy::Absolute(t) if !t.is_finite() => {
                Err(Error::invalid("absolute threshold must be finite"))
            }
            _ => Ok(()),
        }
    }
}

/// Symmetrized score: mean of the forward and reverse directional scores.
pub fn symmetric_score(
    fwd: &AlignmentModel,
    rev: &AlignmentModel,
    pair: &SentencePair,
) -> Result<f64> {
    let swapped = SentencePair::new(pair.target.clone(), pair.source.clone());
    Ok((fwd.score_pair(pair)? + rev.score_pair(&swapped)?) / 2.0)
}

/// Pairs with an empty side have no alignment score; remove them up front.
pub fn drop_empty(corpus: &Corpus) -> Corpus {
    corpus.with_items(
        corpus
            .items
            .iter()
            .filter(|p| token_count(&p.source) > 0 && token_count(&p.target) > 0)
            .cloned()
            .collect(),
    )
}

/// Score every pair with both directional models, store the symmetrized
/// score in `align_score`, and drop pairs according to `policy`. Survivors
/// keep their order; among tied scores the earlier pair survives.
pub fn filter_by_alignment(
    corpus: &Corpus,
    fwd: &AlignmentModel,
    rev: &AlignmentModel,
    policy: AlignPolicy,
) -> Result<(Corpus, StageReport)> {
    policy.validate()?;
    let scores: Vec<f64> = corpus
        .items
        .par_iter()
        .enumerate()
        .map(|(i, p)| symmetric_score(fwd, rev, p).map_err(|e| Error::pair(i, e.to_string())))
        .collect::<Result<_>>()?;

    let keep: Vec<bool> = match policy {
        AlignPolicy::Absolute(t) => scores.iter().map(|&s| s >= t).collect(),
        AlignPolicy::Percentile(p) => {
            let n = scores.len();
            let drop = ((n as f64) * p / 100.0).floor() as usize;
            let mut order: Vec<usize> = (0..n).collect();
            // lowest scores first; later index first among ties
            order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(b.cmp(&a)));
            let mut keep = vec![true; n];
            for &i in &order[..drop] {
                keep[i] = false;
            }
            keep
        }
    };

    let items: Vec<SentencePair> = corpus
        .items
        .iter()
        .zip(&scores)
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|((p, &s), _)| SentencePair {
            align_score: Some(s),
            ..p.clone()
        })
        .collect();

    let mut report = StageReport::new("align-filter", corpus.len());
    report.record("alignment", corpus.len(), items.len());
    Ok((corpus.with_items(items), report))
}

/// Serialize as text: a header block then one `e f prob` line per table
/// entry, null row first under the `<eps>` token.
pub fn write_model(model: &AlignmentModel, path: &Path) -> Result<()> {
    if model.source_vocab.get(NULL_TOKEN).is_some() {
        return Err(Error::invalid(format!(
            "source vocabulary contains the reserved token {NULL_TOKEN}"
        )));
    }
    write_atomic(path, |w: &mut dyn Write| {
        writeln!(w, "{MODEL_HEADER}")?;
        writeln!(w, "direction {} {}", model.src, model.tgt)?;
        writeln!(w, "p0 {}", model.p0)?;
        writeln!(w, "tension {}", model.tension)?;
        writeln!(w, "smoothing_floor {}", model.smoothing_floor)?;
        let mut line = String::new();
        for (r, row) in model.rows.iter().enumerate() {
            let e = if r == 0 {
                NULL_TOKEN
            } else {
                &model.source_vocab.words[r - 1]
            };
            for (&f, &p) in row {
                line.clear();
                let _ = write!(line, "{e} {} {p}", model.target_vocab.words[f as usize]);
                writeln!(w, "{line}")?;
            }
        }
        Ok(())
    })
}

pub fn read_model(path: &Path) -> Result<AlignmentModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, msg: &str| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: msg.to_string(),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, MODEL_HEADER)) => {}
        _ => return Err(bad(1, "missing #align-model-v1 header")),
    }

    let mut header = HashMap::new();
    let mut source_vocab = Vocab::default();
    let mut target_vocab = Vocab::default();
    let mut rows: Vec<BTreeMap<u32, f64>> = vec![BTreeMap::new()];
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(' ').collect();
        if header.len() < 4 {
            let key = fields[0];
            if !matches!(key, "direction" | "p0" | "tension" | "smoothing_floor") {
                return Err(bad(i + 1, "incomplete header"));
            }
            header.insert(key.to_string(), fields[1..].join(" "));
            continue;
        }
        let [e, f, p] = fields[..] else {
            return Err(bad(i + 1, "expected `e f prob`"));
        };
        let p: f64 = p
            .parse()
            .ok()
            .filter(|p: &f64| p.is_finite() && *p >= 0.0)
            .ok_or_else(|| bad(i + 1, "invalid probability"))?;
        let row = if e == NULL_TOKEN {
            0
        } else {
            let id = source_vocab.intern(e) as usize + 1;
            if id == rows.len() {
                rows.push(BTreeMap::new());
            }
            id
        };
        let f = target_vocab.intern(f);
        rows[row].insert(f, p);
    }
    if header.len() < 4 {
        return Err(bad(1, "incomplete header"));
    }
    let num = |k: &str| -> Result<f64> {
        header[k]
            .parse()
            .map_err(|_| bad(1, &format!("invalid {k}")))
    };
    let (src, tgt) = header["direction"]
        .split_once(' ')
        .ok_or_else(|| bad(2, "invalid direction"))?;
    Ok(AlignmentModel {
        src: LangCode::new(src)?,
        tgt: LangCode::new(tgt)?,
        p0: num("p0")?,
        tension: num("tension")?,
        smoothing_floor: num("smoothing_floor")?,
        source_vocab,
        target_vocab,
        rows,
    })
}
