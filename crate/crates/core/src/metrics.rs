//! Corpus-level BLEU and chrF++ with single references.
//!
//! Tokenization for BLEU is the `13a` scheme used by mteval and SacreBLEU,
//! preceded by fullwidth-to-ASCII mapping. chrF++ uses character 1..6-grams
//! with whitespace removed plus word 1..2-grams, β = 2.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::sync::LazyLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::clean::to_halfwidth;
use crate::error::{Error, Result};

pub const BLEU_ORDER: usize = 4;
pub const CHAR_ORDER: usize = 6;
pub const WORD_ORDER: usize = 2;
pub const CHRF_BETA: f64 = 2.0;

static PUNCT_SYMBOLS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"([\x7B-\x7E\x5B-\x60\x20-\x26\x28-\x2B\x3A-\x40/])").unwrap());
static PERIOD_COMMA_AFTER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"([^0-9])([.,])").unwrap());
static PERIOD_COMMA_BEFORE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"([.,])([^0-9])").unwrap());
static DASH_AFTER_DIGIT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"([0-9])(-)").unwrap());

/// mteval-v13a tokenization, returned as space-joined tokens.
pub fn tokenize_13a(line: &str) -> String {
    let mut line = line.replace("<skipped>", "").replace("-\n", "").replace('\n', " ");
    if line.contains('&') {
        line = line
            .replace("&quot;", "\"")
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">");
    }
    let padded = format!(" {line} ");
    let s = PUNCT_SYMBOLS.replace_all(&padded, " $1 ");
    let s = PERIOD_COMMA_AFTER.replace_all(&s, "$1 $2 ");
    let s = PERIOD_COMMA_BEFORE.replace_all(&s, " $1 $2");
    let s = DASH_AFTER_DIGIT.replace_all(&s, "$1 $2 ");
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn bleu_tokens(line: &str) -> String {
    let wide: String = line.trim_end().chars().map(to_halfwidth).collect();
    tokenize_13a(&wide)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BleuScore {
    pub score: f64,
    /// Clipped n-gram precisions, in percent.
    pub precisions: [f64; BLEU_ORDER],
    /// 0 only when every hypothesis is empty.
    pub brevity_penalty: f64,
    pub sys_len: usize,
    pub ref_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub bleu: BleuScore,
    pub chrf_pp: f64,
}

fn check_lengths(hyps: &[impl AsRef<str>], refs: &[impl AsRef<str>]) -> Result<()> {
    if hyps.len() != refs.len() {
        return Err(Error::LengthMismatch {
            left_label: "hypotheses".into(),
            left: hyps.len(),
            right_label: "references".into(),
            right: refs.len(),
        });
    }
    if hyps.is_empty() {
        return Err(Error::invalid("at least one segment is required"));
    }
    Ok(())
}

fn counts<K: Eq + Hash, I: IntoIterator<Item = K>>(items: I) -> HashMap<K, usize> {
    let mut m = HashMap::new();
    for k in items {
        *m.entry(k).or_insert(0) += 1;
    }
    m
}

fn add_arrays<const N: usize>(mut a: [usize; N], b: [usize; N]) -> [usize; N] {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

// [sys_len, ref_len, correct_1..4, total_1..4]
const BLEU_STATS: usize = 2 + 2 * BLEU_ORDER;

fn bleu_segment(hyp: &str, reference: &str) -> [usize; BLEU_STATS] {
    let h = bleu_tokens(hyp);
    let r = bleu_tokens(reference);
    let h: Vec<&str> = h.split(' ').filter(|t| !t.is_empty()).collect();
    let r: Vec<&str> = r.split(' ').filter(|t| !t.is_empty()).collect();
    let mut stats = [0; BLEU_STATS];
    stats[0] = h.len();
    stats[1] = r.len();
    for n in 1..=BLEU_ORDER {
        let hc = counts(h.windows(n));
        let rc = counts(r.windows(n));
        let correct: usize = hc
            .iter()
            .map(|(g, &c)| c.min(rc.get(g).copied().unwrap_or(0)))
            .sum();
        stats[1 + n] = correct;
        stats[1 + BLEU_ORDER + n] = h.len().saturating_sub(n - 1);
    }
    stats
}

/// Corpus BLEU without smoothing: any zero n-gram precision gives 0.
pub fn bleu_corpus(hyps: &[impl AsRef<str> + Sync], refs: &[impl AsRef<str> + Sync]) -> Result<BleuScore> {
    check_lengths(hyps, refs)?;
    if let Some(i) = refs.iter().position(|r| r.as_ref().trim().is_empty()) {
        return Err(Error::pair(i, "empty reference line"));
    }
    let stats = hyps
        .par_iter()
        .zip(refs)
        .map(|(h, r)| bleu_segment(h.as_ref(), r.as_ref()))
        .reduce(|| [0; BLEU_STATS], add_arrays);

    let (sys_len, ref_len) = (stats[0], stats[1]);
    let correct = &stats[2..2 + BLEU_ORDER];
    let total = &stats[2 + BLEU_ORDER..];
    let brevity_penalty = if sys_len >= ref_len {
        1.0
    } else if sys_len == 0 {
        0.0
    } else {
        (1.0 - ref_len as f64 / sys_len as f64).exp()
    };
    let mut precisions = [0.0; BLEU_ORDER];
    for n in 0..BLEU_ORDER {
        if total[n] > 0 {
            precisions[n] = 100.0 * correct[n] as f64 / total[n] as f64;
        }
    }
    let score = if precisions.contains(&0.0) {
        0.0
    } else {
        // working on fractions keeps a perfect match at exactly 100
        let mean_log = correct
            .iter()
            .zip(total)
            .map(|(&c, &t)| (c as f64 / t as f64).ln())
            .sum::<f64>()
            / BLEU_ORDER as f64;
        100.0 * brevity_penalty * mean_log.exp()
    };
    Ok(BleuScore {
        score,
        precisions,
        brevity_penalty,
        sys_len,
        ref_len,
    })
}

const PUNCTS: &str = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";

/// Words with one leading or trailing punctuation mark split off.
fn chrf_words(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    for w in line.split_whitespace() {
        let chars: Vec<char> = w.chars().collect();
        if chars.len() == 1 {
            out.push(w.to_string());
        } else if PUNCTS.contains(chars[chars.len() - 1]) {
            out.push(chars[..chars.len() - 1].iter().collect());
            out.push(chars[chars.len() - 1].to_string());
        } else if PUNCTS.contains(chars[0]) {
            out.push(chars[0].to_string());
            out.push(chars[1..].iter().collect());
        } else {
            out.push(w.to_string());
        }
    }
    out
}

const CHRF_ORDERS: usize = CHAR_ORDER + WORD_ORDER;
// per order: [hyp, ref, match]
const CHRF_STATS: usize = 3 * CHRF_ORDERS;

fn match_stats<K: Eq + Hash>(hyp: &HashMap<K, usize>, reference: &HashMap<K, usize>) -> [usize; 3] {
    let mut matched = 0;
    let mut hyp_count = 0;
    for (g, &c) in hyp {
        hyp_count += c;
        if let Some(&rc) = reference.get(g) {
            matched += c.min(rc);
        }
    }
    // hypothesis n-grams only count when the reference has some of that order
    let hyp_count = if reference.is_empty() { 0 } else { hyp_count };
    [hyp_count, reference.values().sum(), matched]
}

fn chrf_segment(hyp: &str, reference: &str) -> [usize; CHRF_STATS] {
    let hc: Vec<char> = hyp.chars().filter(|c| !c.is_whitespace()).collect();
    let rc: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    let hw = chrf_words(hyp);
    let rw = chrf_words(reference);
    let mut stats = [0; CHRF_STATS];
    let mut put = |order: usize, s: [usize; 3]| stats[3 * order..3 * order + 3].copy_from_slice(&s);
    for n in 1..=CHAR_ORDER {
        put(n - 1, match_stats(&counts(hc.windows(n)), &counts(rc.windows(n))));
    }
    for n in 1..=WORD_ORDER {
        put(
            CHAR_ORDER + n - 1,
            match_stats(&counts(hw.windows(n)), &counts(rw.windows(n))),
        );
    }
    stats
}

fn chrf_from_stats(stats: &[usize; CHRF_STATS]) -> f64 {
    let factor = CHRF_BETA * CHRF_BETA;
    let (mut prec, mut rec, mut orders) = (0.0, 0.0, 0usize);
    for s in stats.chunks_exact(3) {
        let (n_hyp, n_ref, n_match) = (s[0], s[1], s[2]);
        if n_hyp > 0 && n_ref > 0 {
            prec += n_match as f64 / n_hyp as f64;
            rec += n_match as f64 / n_ref as f64;
            orders += 1;
        }
    }
    if orders == 0 {
        return 0.0;
    }
    prec /= orders as f64;
    rec /= orders as f64;
    if prec + rec == 0.0 {
        return 0.0;
    }
    100.0 * (1.0 + factor) * prec * rec / (factor * prec + rec)
}

/// Corpus chrF++: statistics summed over segments, precision and recall
/// averaged over the n-gram orders present on both sides.
pub fn chrf_corpus(hyps: &[impl AsRef<str> + Sync], refs: &[impl AsRef<str> + Sync]) -> Result<f64> {
    check_lengths(hyps, refs)?;
    let stats = hyps
        .par_iter()
        .zip(refs)
        .map(|(h, r)| chrf_segment(h.as_ref(), r.as_ref()))
        .reduce(|| [0; CHRF_STATS], add_arrays);
    Ok(chrf_from_stats(&stats))
}

pub fn evaluate(hyps: &[impl AsRef<str> + Sync], refs: &[impl AsRef<str> + Sync]) -> Result<MetricReport> {
    Ok(MetricReport {
        bleu: bleu_corpus(hyps, refs)?,
        chrf_pp: chrf_corpus(hyps, refs)?,
    })
}

impl fmt::Display for BleuScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.precisions;
        write!(
            f,
            "BLEU = {:.4} {:.4}/{:.4}/{:.4}/{:.4} (BP = {:.4} sys_len = {} ref_len = {})",
            self.score, p[0], p[1], p[2], p[3], self.brevity_penalty, self.sys_len, self.ref_len
        )
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.bleu)?;
        write!(f, "chrF++ = {:.4}", self.chrf_pp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_examples() {
        assert_eq!(tokenize_13a("Hello, world!"), "Hello , world !");
        assert_eq!(tokenize_13a("It costs $3,000.50."), "It costs $ 3,000.50 .");
        assert_eq!(tokenize_13a("1990-2000 (approx.)"), "1990 - 2000 ( approx . )");
        assert_eq!(tokenize_13a("a &amp; b &lt;c&gt;"), "a & b < c >");
        assert_eq!(tokenize_13a("don't"), "don't");
    }

    #[test]
    fn fullwidth_normalized_for_bleu() {
        assert_eq!(bleu_tokens("Ｈｏｌａ！  "), "Hola !");
    }

    #[test]
    fn identical_scores_one_hundred() {
        let s = ["el gato duerme.", "¿Dónde está la casa?"];
        let b = bleu_corpus(&s, &s).unwrap();
        assert_eq!(b.score, 100.0);
        assert_eq!(b.brevity_penalty, 1.0);
        assert_eq!(chrf_corpus(&s, &s).unwrap(), 100.0);
    }

    #[test]
    fn empty_hypotheses() {
        let refs = ["a b c d e"];
        let b = bleu_corpus(&[""], &refs).unwrap();
        assert_eq!(b.score, 0.0);
        assert_eq!(b.brevity_penalty, 0.0);
        assert_eq!(chrf_corpus(&[""], &refs).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_characters() {
        assert_eq!(chrf_corpus(&["xyz"], &["abc"]).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        assert!(bleu_corpus(&["a"], &["a", "b"]).is_err());
        assert!(bleu_corpus(&["a"], &["  "]).is_err());
        assert!(chrf_corpus(&Vec::<String>::new(), &Vec::<String>::new()).is_err());
    }

    #[test]
    fn short_hypothesis_gets_brevity_penalty() {
        let b = bleu_corpus(&["a b c d"], &["a b c d e f g h"]).unwrap();
        assert!((b.brevity_penalty - (-1.0f64).exp()).abs() < 1e-12);
        assert!((b.score - 100.0 * (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn chrf_word_split() {
        assert_eq!(chrf_words("(hi) a, b"), vec!["(hi", ")", "a", ",", "b"]);
    }
}
