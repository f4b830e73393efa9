//! Temperature-based re-balancing of multilingual training data, language
//! tagging, and seeded mixing.
//!
//! With `p_l = n_l / Σ n` the upsampling ratio of language `l` is
//!
//! ```text
//! λ_l = (1 / p_l) * p_l^(1/T) / Σ_k p_k^(1/T)
//! ```
//!
//! so that after replication the languages follow the tempered distribution
//! `p_l^(1/T) / Σ_k p_k^(1/T)`.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LangCode, SentencePair};
use crate::error::{Error, Result};

pub const DEFAULT_TEMPERATURE: f64 = 2.0;

pub fn compute_ratios(sizes: &[usize], temperature: f64) -> Result<Vec<f64>> {
    if sizes.is_empty() {
        return Err(Error::invalid("at least one language size is required"));
    }
    if let Some(i) = sizes.iter().position(|&n| n == 0) {
        return Err(Error::invalid(format!("size of language {i} is zero")));
    }
    if !(temperature >= 1.0 && temperature.is_finite()) {
        return Err(Error::invalid(format!("temperature {temperature} must be >= 1")));
    }
    let total: f64 = sizes.iter().map(|&n| n as f64).sum();
    let probs: Vec<f64> = sizes.iter().map(|&n| n as f64 / total).collect();
    if temperature == 1.0 {
        return Ok(vec![1.0; sizes.len()]);
    }
    let tempered: Vec<f64> = probs.iter().map(|p| p.powf(1.0 / temperature)).collect();
    let z: f64 = tempered.iter().sum();
    Ok(probs
        .iter()
        .zip(&tempered)
        .map(|(p, q)| q / z / p)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub languages: Vec<LangCode>,
    pub sizes: Vec<usize>,
    pub temperature: f64,
    pub ratios: Vec<f64>,
    pub seed: u64,
}

impl SamplingPlan {
    pub fn new(
        languages: Vec<LangCode>,
        sizes: Vec<usize>,
        temperature: f64,
        seed: u64,
    ) -> Result<Self> {
        if languages.len() != sizes.len() {
            return Err(Error::invalid("one size per language is required"));
        }
        for (i, l) in languages.iter().enumerate() {
            if languages[..i].contains(l) {
                return Err(Error::invalid(format!("language {l} listed twice")));
            }
        }
        let ratios = compute_ratios(&sizes, temperature)?;
        Ok(Self {
            languages,
            sizes,
            temperature,
            ratios,
            seed,
        })
    }

    /// Plan over the corpora keyed by language, sized by their pair counts.
    pub fn for_corpora(
        corpora: &BTreeMap<LangCode, Corpus>,
        temperature: f64,
        seed: u64,
    ) -> Result<Self> {
        let (languages, sizes) = corpora.iter().map(|(l, c)| (l.clone(), c.len())).unzip();
        Self::new(languages, sizes, temperature, seed)
    }

    pub fn ratio(&self, lang: &LangCode) -> Option<f64> {
        let i = self.languages.iter().position(|l| l == lang)?;
        Some(self.ratios[i])
    }
}

/// Stable 64-bit key for a label (FNV-1a), used as the generator stream.
pub(crate) fn stream_key(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Uniform draw in [0, 1) that depends only on (seed, stream, index).
pub(crate) fn keyed_uniform(seed: u64, stream: u64, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(u128::from(index) * 2);
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Replicate `corpus` by a real `ratio`: `⌊ratio⌋` full copies, then each
/// pair once more with probability `frac(ratio)`. The extra draw for pair
/// `i` is keyed by `(seed, label, i)`, so shards can be processed
/// independently.
pub fn upsample_corpus(corpus: &Corpus, ratio: f64, seed: u64, label: &str) -> Result<Corpus> {
    if !(ratio >= 0.0 && ratio.is_finite()) {
        return Err(Error::invalid(format!("invalid upsampling ratio {ratio}")));
    }
    let whole = ratio.floor() as usize;
    let frac = ratio - ratio.floor();
    let stream = stream_key(label);
    let mut items = Vec::with_capacity((corpus.len() as f64 * ratio).ceil() as usize + 1);
    for _ in 0..whole {
        items.extend(corpus.items.iter().cloned());
    }
    if frac > 0.0 {
        items.extend(
            corpus
                .items
                .iter()
                .enumerate()
                .filter(|(i, _)| keyed_uniform(seed, stream, *i as u64) < frac)
                .map(|(_, p)| p.clone()),
        );
    }
    Ok(corpus.with_items(items))
}

pub fn upsample(
    corpora: &BTreeMap<LangCode, Corpus>,
    plan: &SamplingPlan,
) -> Result<BTreeMap<LangCode, Corpus>> {
    corpora
        .iter()
        .map(|(lang, corpus)| {
            let ratio = plan
                .ratio(lang)
                .ok_or_else(|| Error::invalid(format!("language {lang} missing from sampling plan")))?;
            Ok((lang.clone(), upsample_corpus(corpus, ratio, plan.seed, lang.as_str())?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TagScheme {
    pub tags: BTreeMap<LangCode, String>,
}

impl TagScheme {
    /// `<code>` for each language.
    pub fn for_languages<'a>(langs: impl IntoIterator<Item = &'a LangCode>) -> Self {
        Self {
            tags: langs
                .into_iter()
                .map(|l| (l.clone(), format!("<{l}>")))
                .collect(),
        }
    }

    pub fn insert(&mut self, lang: LangCode, tag: String) -> Result<()> {
        if tag.is_empty() || tag.chars().any(char::is_whitespace) {
            return Err(Error::invalid(format!("tag {tag:?} must be a single token")));
        }
        if self.tags.iter().any(|(l, t)| *t == tag && *l != lang) {
            return Err(Error::invalid(format!("tag {tag} already used")));
        }
        self.tags.insert(lang, tag);
        Ok(())
    }

    pub fn tag(&self, lang: &LangCode) -> Option<&str> {
        self.tags.get(lang).map(String::as_str)
    }
}

/// Prefix each source sentence with the target-language tag. Not idempotent.
pub fn tag_language(corpus: &Corpus, scheme: &TagScheme, tgt: &LangCode) -> Result<Corpus> {
    let tag = scheme
        .tag(tgt)
        .ok_or_else(|| Error::invalid(format!("no tag defined for language {tgt}")))?;
    Ok(corpus.with_items(
        corpus
            .items
            .iter()
            .map(|p| SentencePair {
                source: format!("{tag} {}", p.source),
                ..p.clone()
            })
            .collect(),
    ))
}

pub(crate) fn shuffle_items(items: &mut [SentencePair], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    items.shuffle(&mut rng);
}

/// Concatenate in input order and apply a seeded Fisher-Yates shuffle.
///
/// The result keeps the language pair of the first corpus; mixtures of
/// several directions are expected to be distinguished by tags.
pub fn mix_shuffle(corpora: &[Corpus], seed: u64) -> Result<Corpus> {
    let first = corpora
        .first()
        .ok_or_else(|| Error::invalid("mix_shuffle needs at least one corpus"))?;
    let mut items: Vec<SentencePair> = corpora.iter().flat_map(|c| c.items.iter().cloned()).collect();
    shuffle_items(&mut items, seed);
    Ok(first.with_items(items))
}
