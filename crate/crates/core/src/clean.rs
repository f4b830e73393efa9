//! Rule-based bitext cleaning: text normalization, exact deduplication,
//! length filtering and degenerate-repetition filtering.

use std::collections::HashSet;
use std::sync::LazyLock;

use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};

use crate::corpus::{token_count, Corpus, MonoCorpus, SentencePair};
use crate::error::{Error, Result};
use crate::report::StageReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleaningConfig {
    pub max_tokens: usize,
    pub max_consecutive_repeats: usize,
    /// Distinct-token ratio floor, checked only on sentences of 10+ tokens.
    pub min_distinct_ratio: f64,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        Self {
            max_tokens: 80,
            max_consecutive_repeats: 3,
            min_distinct_ratio: 0.3,
        }
    }
}

/// Sentences shorter than this are exempt from the distinct-ratio rule.
pub const DISTINCT_RATIO_MIN_TOKENS: usize = 10;

impl CleaningConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_tokens < 1 {
            return Err(Error::invalid("max_tokens must be at least 1"));
        }
        if self.max_consecutive_repeats < 2 {
            return Err(Error::invalid("max_consecutive_repeats must be at least 2"));
        }
        if !(self.min_distinct_ratio > 0.0 && self.min_distinct_ratio <= 1.0) {
            return Err(Error::invalid("min_distinct_ratio must lie in (0, 1]"));
        }
        Ok(())
    }
}

static ENTITY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"&(amp|lt|gt|quot|apos|#[0-9]+|#[xX][0-9a-fA-F]+);").unwrap());
static CONTROL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[\p{Cc}\p{Cf}]").unwrap());

fn decode_entity(caps: &Captures<'_>) -> String {
    let whole = &caps[0];
    let name = &caps[1];
    let decoded = match name {
        "amp" => Some('&'),
        "lt" => Some('<'),
        "gt" => Some('>'),
        "quot" => Some('"'),
        "apos" => Some('\''),
        _ => {
            let num = &name[1..];
            let code = match num.strip_prefix(['x', 'X']) {
                Some(hex) => u32::from_str_radix(hex, 16).ok(),
                None => num.parse::<u32>().ok(),
            };
            code.and_then(char::from_u32)
        }
    };
    decoded.map_or_else(|| whole.to_string(), String::from)
}

pub(crate) fn to_halfwidth(c: char) -> char {
    match c {
        '\u{FF01}'..='\u{FF5E}' => char::from_u32(c as u32 - 0xFF01 + 0x21).unwrap_or(c),
        '\u{3000}' => ' ',
        _ => c,
    }
}

fn normalize_once(text: &str) -> String {
    let tabs = text.replace('\t', " ");
    let stripped = CONTROL.replace_all(&tabs, "");
    let decoded = ENTITY.replace_all(&stripped, decode_entity);
    let halfwidth: String = decoded.chars().map(to_halfwidth).collect();

    let mut out = String::with_capacity(halfwidth.len());
    let mut prev_space = false;
    for c in halfwidth.chars() {
        if c == ' ' {
            if !prev_space {
                out.push(c);
            }
            prev_space = true;
        } else {
            out.push(c);
            prev_space = false;
        }
    }
    out.trim().to_string()
}

/// Strip control/format characters (TAB becomes a space), decode XML
/// entities, map fullwidth forms to ASCII, collapse space runs and trim.
///
/// A single pass can expose new work (a decoded `&#8203;` is a format
/// character, `&amp;lt;` decodes to another entity), so passes repeat until
/// the text stops changing. Every pass that changes anything shortens the
/// text except for the width mapping, which only fires on the first pass.
pub fn normalize_text(text: &str) -> String {
    let mut current = normalize_once(text);
    loop {
        let next = normalize_once(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

/// Keep the first occurrence of each exact (source, target) pair.
pub fn dedup(corpus: &Corpus) -> Corpus {
    let mut seen: HashSet<(&str, &str)> = HashSet::with_capacity(corpus.len());
    let items = corpus
        .items
        .iter()
        .filter(|p| seen.insert((p.source.as_str(), p.target.as_str())))
        .cloned()
        .collect();
    corpus.with_items(items)
}

pub fn dedup_mono(corpus: &MonoCorpus) -> MonoCorpus {
    let mut seen: HashSet<&str> = HashSet::with_capacity(corpus.len());
    let lines = corpus
        .lines
        .iter()
        .filter(|l| seen.insert(l.as_str()))
        .cloned()
        .collect();
    MonoCorpus::new(corpus.lang.clone(), lines)
}

fn within_length(pair: &SentencePair, cfg: &CleaningConfig) -> bool {
    token_count(&pair.source) <= cfg.max_tokens && token_count(&pair.target) <= cfg.max_tokens
}

/// Drop pairs where either side has more than `max_tokens` tokens.
pub fn filter_length(corpus: &Corpus, cfg: &CleaningConfig) -> Corpus {
    corpus.with_items(
        corpus
            .items
            .iter()
            .filter(|p| within_length(p, cfg))
            .cloned()
            .collect(),
    )
}

/// True for sentences made degenerate by token repetition.
pub fn is_repetitive(text: &str, cfg: &CleaningConfig) -> bool {
    let tokens: Vec<&str> = text.split_whitespace().collect();

    let mut run = 0;
    let mut prev: Option<&str> = None;
    for &tok in &tokens {
        run = if prev == Some(tok) { run + 1 } else { 1 };
        if run >= cfg.max_consecutive_repeats {
            return true;
        }
        prev = Some(tok);
    }

    if tokens.len() >= DISTINCT_RATIO_MIN_TOKENS {
        let distinct: HashSet<&str> = tokens.iter().copied().collect();
        let ratio = distinct.len() as f64 / tokens.len() as f64;
        if ratio < cfg.min_distinct_ratio {
            return true;
        }
    }
    false
}

pub fn filter_repeats(corpus: &Corpus, cfg: &CleaningConfig) -> Corpus {
    corpus.with_items(
        corpus
            .items
            .iter()
            .filter(|p| !is_repetitive(&p.source, cfg) && !is_repetitive(&p.target, cfg))
            .cloned()
            .collect(),
    )
}

fn normalize_pairs(corpus: &Corpus) -> Corpus {
    corpus.with_items(
        corpus
            .items
            .iter()
            .map(|p| SentencePair {
                source: normalize_text(&p.source),
                target: normalize_text(&p.target),
                ..p.clone()
            })
            .collect(),
    )
}

/// Normalize both sides, then dedup, length filter and repeat filter.
pub fn clean_corpus(corpus: &Corpus, cfg: &CleaningConfig) -> (Corpus, StageReport) {
    let mut report = StageReport::new("clean", corpus.len());

    let normalized = normalize_pairs(corpus);
    let deduped = dedup(&normalized);
    report.record("dedup", normalized.len(), deduped.len());
    let short = filter_length(&deduped, cfg);
    report.record("length", deduped.len(), short.len());
    let clean = filter_repeats(&short, cfg);
    report.record("repeats", short.len(), clean.len());

    (clean, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LangCode;

    fn corpus(pairs: &[(&str, &str)]) -> Corpus {
        Corpus::from_pairs(
            LangCode::new("es").unwrap(),
            LangCode::new("arg").unwrap(),
            pairs.iter().map(|(s, t)| SentencePair::new(*s, *t)).collect(),
        )
    }

    fn texts(c: &Corpus) -> Vec<(&str, &str)> {
        c.items
            .iter()
            .map(|p| (p.source.as_str(), p.target.as_str()))
            .collect()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_text("Ｔｅｓｔ！"), "Test!");
        assert_eq!(normalize_text("Tom &amp; Jerry"), "Tom & Jerry");
        assert_eq!(normalize_text("a\u{200B}b  c"), "ab c");
        assert_eq!(normalize_text("  a\tb\u{3000}c "), "a b c");
        assert_eq!(normalize_text("&#65;&#x42;&lt;&gt;&quot;&apos;"), "AB<>\"'");
    }

    #[test]
    fn invalid_numeric_entity_left_verbatim() {
        assert_eq!(normalize_text("x &#xD800; y"), "x &#xD800; y");
        assert_eq!(normalize_text("&#99999999999;"), "&#99999999999;");
        assert_eq!(normalize_text("&nbsp;"), "&nbsp;");
    }

    #[test]
    fn nested_entities_reach_fixpoint() {
        assert_eq!(normalize_text("&amp;lt;"), "<");
        assert_eq!(normalize_text("a&#8203;b"), "ab");
    }

    #[test]
    fn dedup_examples() {
        let c = corpus(&[("a", "b"), ("a", "b"), ("c", "d")]);
        assert_eq!(texts(&dedup(&c)), vec![("a", "b"), ("c", "d")]);
        let c = corpus(&[("a", "b"), ("a", "c")]);
        assert_eq!(dedup(&c), c);
        let once = dedup(&corpus(&[("x", "y"), ("x", "y"), ("x", "y")]));
        assert_eq!(dedup(&once), once);
    }

    #[test]
    fn dedup_mono_keeps_first() {
        let m = MonoCorpus::new(
            LangCode::new("es").unwrap(),
            vec!["a".into(), "b".into(), "a".into()],
        );
        assert_eq!(dedup_mono(&m).lines, vec!["a", "b"]);
    }

    #[test]
    fn length_boundary() {
        let cfg = CleaningConfig::default();
        let w80 = vec!["w"; 80].join(" ");
        let w81 = vec!["w"; 81].join(" ");
        let c = corpus(&[(&w81, "x"), (&w80, &w80), ("", "x"), ("x", &w81)]);
        let out = filter_length(&c, &cfg);
        assert_eq!(texts(&out), vec![(w80.as_str(), w80.as_str()), ("", "x")]);
    }

    #[test]
    fn repeat_rules() {
        let cfg = CleaningConfig::default();
        assert!(is_repetitive("no no no fue así", &cfg));
        assert!(!is_repetitive("no no fue así", &cfg));
        assert!(!is_repetitive("the cat saw the cat", &cfg));
        // 12 tokens, 3 distinct, no consecutive runs
        assert!(is_repetitive("a b c a b c a b c a b c", &cfg));
        // 9 tokens with low diversity are exempt from the ratio rule
        assert!(!is_repetitive("a b a b a b a b a", &cfg));
    }

    #[test]
    fn clean_already_clean_is_fixpoint() {
        let c = corpus(&[("hola mundo", "ola mundo"), ("buenos días", "bon día")]);
        let (out, report) = clean_corpus(&c, &CleaningConfig::default());
        assert_eq!(out, c);
        assert_eq!(report.total_removed(), 0);
        assert_eq!((report.input, report.output), (2, 2));
    }

    #[test]
    fn normalization_can_create_duplicates() {
        let c = corpus(&[("Ｈｏｌａ", "ola"), ("Hola", "ola")]);
        let (out, report) = clean_corpus(&c, &CleaningConfig::default());
        assert_eq!(texts(&out), vec![("Hola", "ola")]);
        assert_eq!(report.removed_by("dedup"), 1);
    }

    #[test]
    fn config_validation() {
        assert!(CleaningConfig::default().validate().is_ok());
        let bad = CleaningConfig {
            max_consecutive_repeats: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
