//! Synthetic data: forward translation of source monolingual text, back
//! translation of target monolingual text, training-mixture assembly, and
//! transductive finetune sets built from several systems' dev outputs.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LangCode, MonoCorpus, Provenance, SentencePair};
use crate::error::{Error, Result};
use crate::external::LineCommand;
use crate::sampling::{shuffle_items, upsample_corpus};

/// External translation command with a declared direction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Translator {
    pub command: LineCommand,
    pub src: LangCode,
    pub tgt: LangCode,
    #[serde(default)]
    pub batch_size: Option<usize>,
}

impl Translator {
    pub fn new(command: LineCommand, src: LangCode, tgt: LangCode) -> Self {
        Self {
            command,
            src,
            tgt,
            batch_size: None,
        }
    }

    /// Translate every line; the output has exactly one line per input.
    pub fn translate(&self, lines: &[String]) -> Result<Vec<String>> {
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        self.command.run(&refs, self.batch_size)
    }

    fn expect_input(&self, lang: &LangCode) -> Result<()> {
        if *lang != self.src {
            return Err(Error::invalid(format!(
                "translator reads {} but the monolingual corpus is {lang}",
                self.src
            )));
        }
        Ok(())
    }
}

/// `k` distinct lines chosen uniformly without replacement, in their
/// original order.
pub fn sample_monolingual(mono: &MonoCorpus, k: usize, seed: u64) -> Result<MonoCorpus> {
    if k == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    if k > mono.len() {
        return Err(Error::invalid(format!(
            "sample size {k} exceeds corpus size {}",
            mono.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, mono.len(), k).into_vec();
    picked.sort_unstable();
    Ok(MonoCorpus::new(
        mono.lang.clone(),
        picked.into_iter().map(|i| mono.lines[i].clone()).collect(),
    ))
}

/// Pairs of (authentic source line, teacher output).
pub fn forward_translate(mono: &MonoCorpus, teacher: &Translator) -> Result<Corpus> {
    teacher.expect_input(&mono.lang)?;
    let hyps = if mono.is_empty() {
        Vec::new()
    } else {
        teacher.translate(&mono.lines)?
    };
    let items = mono
        .lines
        .iter()
        .zip(hyps)
        .map(|(s, t)| SentencePair::with_provenance(s.clone(), t, Provenance::ForwardSynthetic))
        .collect();
    Ok(Corpus::from_pairs(teacher.src.clone(), teacher.tgt.clone(), items))
}

/// Pairs of (synthetic source, authentic target line). `reverse` translates
/// from the target language back into the source language.
pub fn back_translate(target_mono: &MonoCorpus, reverse: &Translator) -> Result<Corpus> {
    reverse.expect_input(&target_mono.lang)?;
    let hyps = if target_mono.is_empty() {
        Vec::new()
    } else {
        reverse.translate(&target_mono.lines)?
    };
    let items = hyps
        .into_iter()
        .zip(&target_mono.lines)
        .map(|(s, t)| SentencePair::with_provenance(s, t.clone(), Provenance::BackSynthetic))
        .collect();
    Ok(Corpus::from_pairs(reverse.tgt.clone(), reverse.src.clone(), items))
}

/// Per-class replication weights for the training mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixSpec {
    pub authentic: f64,
    pub forward: f64,
    pub back: f64,
    pub seed: u64,
}

impl Default for MixSpec {
    fn default() -> Self {
        Self {
            authentic: 1.0,
            forward: 1.0,
            back: 1.0,
            seed: 0,
        }
    }
}

impl MixSpec {
    pub fn validate(&self) -> Result<()> {
        let w = [self.authentic, self.forward, self.back];
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::invalid("mix weights must be finite and non-negative"));
        }
        if w.iter().all(|&x| x == 0.0) {
            return Err(Error::invalid("at least one mix weight must be positive"));
        }
        Ok(())
    }
}

/// Replicate each class by its weight (same rule as language upsampling),
/// concatenate, and shuffle.
pub fn mix_training_set(
    authentic: &Corpus,
    ft: &Corpus,
    bt: &Corpus,
    spec: &MixSpec,
) -> Result<Corpus> {
    spec.validate()?;
    if !authentic.same_direction(ft) || !authentic.same_direction(bt) {
        return Err(Error::invalid(format!(
            "mixture parts disagree on direction: {}-{}, {}-{}, {}-{}",
            authentic.src, authentic.tgt, ft.src, ft.tgt, bt.src, bt.tgt
        )));
    }
    let mut items = Vec::new();
    for (corpus, weight, label) in [
        (authentic, spec.authentic, "authentic"),
        (ft, spec.forward, "ft"),
        (bt, spec.back, "bt"),
    ] {
        items.extend(upsample_corpus(corpus, weight, spec.seed, label)?.items);
    }
    shuffle_items(&mut items, spec.seed);
    Ok(authentic.with_items(items))
}

/// Pair every dev source line with each system's output for it, dropping
/// exact duplicate pairs (first occurrence wins, system-major order).
pub fn assemble_transductive_set(
    dev_sources: &MonoCorpus,
    model_outputs: &[MonoCorpus],
    tgt: &LangCode,
) -> Result<Corpus> {
    for (m, out) in model_outputs.iter().enumerate() {
        if out.len() != dev_sources.len() {
            return Err(Error::invalid(format!(
                "model {m} has {} lines, dev set has {}",
                out.len(),
                dev_sources.len()
            )));
        }
    }
    let mut seen: HashSet<(&str, &str)> = HashSet::new();
    let mut items = Vec::new();
    for out in model_outputs {
        for (s, h) in dev_sources.lines.iter().zip(&out.lines) {
            if seen.insert((s, h)) {
                items.push(SentencePair::with_provenance(
                    s.clone(),
                    h.clone(),
                    Provenance::Transductive,
                ));
            }
        }
    }
    Ok(Corpus::from_pairs(dev_sources.lang.clone(), tgt.clone(), items))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lang(s: &str) -> LangCode {
        LangCode::new(s).unwrap()
    }

    fn mono(code: &str, lines: &[&str]) -> MonoCorpus {
        MonoCorpus::new(lang(code), lines.iter().map(|s| s.to_string()).collect())
    }

    fn translator(cmd: &str, src: &str, tgt: &str) -> Translator {
        Translator::new(LineCommand::parse(cmd).unwrap(), lang(src), lang(tgt))
    }

    #[test]
    fn sample_whole_and_deterministic() {
        let m = mono("es", &["a", "b", "c", "d", "e"]);
        assert_eq!(sample_monolingual(&m, 5, 1).unwrap(), m);
        let a = sample_monolingual(&m, 3, 42).unwrap();
        assert_eq!(a, sample_monolingual(&m, 3, 42).unwrap());
        assert_eq!(a.len(), 3);
        let pos: Vec<usize> = a.lines.iter().map(|l| m.lines.iter().position(|x| x == l).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert!(sample_monolingual(&m, 0, 1).is_err());
        assert!(sample_monolingual(&m, 6, 1).is_err());
    }

    #[test]
    fn forward_identity() {
        let m = mono("es", &["uno", "dos", "tres"]);
        let c = forward_translate(&m, &translator("cat", "es", "ast")).unwrap();
        assert_eq!(c.len(), 3);
        for (p, l) in c.items.iter().zip(&m.lines) {
            assert_eq!((&p.source, &p.target), (l, l));
            assert_eq!(p.provenance, Provenance::ForwardSynthetic);
        }
        assert_eq!((c.src.as_str(), c.tgt.as_str()), ("es", "ast"));
    }

    #[test]
    fn empty_mono_skips_translator() {
        // the command would fail if it ran
        let t = translator("false", "es", "ast");
        assert!(forward_translate(&mono("es", &[]), &t).unwrap().is_empty());
        assert!(back_translate(&mono("es", &[]), &t).unwrap().is_empty());
    }

    #[test]
    fn translator_contract_violations() {
        let m = mono("es", &["a", "b", "c"]);
        let short = translator("head -n 2", "es", "ast");
        assert!(matches!(
            forward_translate(&m, &short),
            Err(Error::LengthMismatch { left: 3, right: 2, .. })
        ));
        let failing = translator("sh -c 'echo bad input >&2; exit 1'", "es", "ast");
        let err = forward_translate(&m, &failing).unwrap_err().to_string();
        assert!(err.contains("bad input"), "{err}");
        let wrong_dir = translator("cat", "ast", "es");
        assert!(forward_translate(&m, &wrong_dir).is_err());
    }

    #[test]
    fn back_translation_keeps_authentic_target() {
        let m = mono("ast", &["ún", "dos"]);
        let c = back_translate(&m, &translator("tr a-z A-Z", "ast", "es")).unwrap();
        assert_eq!((c.src.as_str(), c.tgt.as_str()), ("es", "ast"));
        assert_eq!(c.items[1].source, "DOS");
        assert_eq!(c.items[1].target, "dos");
        assert!(c.items.iter().all(|p| p.provenance == Provenance::BackSynthetic));
    }

    fn class(n: usize, prov: Provenance) -> Corpus {
        Corpus::from_pairs(
            lang("es"),
            lang("ast"),
            (0..n)
                .map(|i| SentencePair::with_provenance(format!("{prov} {i}"), "t", prov))
                .collect(),
        )
    }

    fn count(c: &Corpus, p: Provenance) -> usize {
        c.items.iter().filter(|x| x.provenance == p).count()
    }

    #[test]
    fn mixing_by_weight() {
        let (a, f, b) = (
            class(10, Provenance::Authentic),
            class(10, Provenance::ForwardSynthetic),
            class(10, Provenance::BackSynthetic),
        );
        let m = mix_training_set(&a, &f, &b, &MixSpec::default()).unwrap();
        assert_eq!(m.len(), 30);
        assert_eq!(count(&m, Provenance::BackSynthetic), 10);

        let no_bt = MixSpec {
            back: 0.0,
            ..Default::default()
        };
        assert_eq!(count(&mix_training_set(&a, &f, &b, &no_bt).unwrap(), Provenance::BackSynthetic), 0);

        let (a5, f5, b5) = (
            class(5, Provenance::Authentic),
            class(5, Provenance::ForwardSynthetic),
            class(5, Provenance::BackSynthetic),
        );
        let double = MixSpec {
            authentic: 2.0,
            ..Default::default()
        };
        let m = mix_training_set(&a5, &f5, &b5, &double).unwrap();
        assert_eq!(m.len(), 20);
        assert_eq!(count(&m, Provenance::Authentic), 10);

        let zero = MixSpec {
            authentic: 0.0,
            forward: 0.0,
            back: 0.0,
            seed: 0,
        };
        assert!(mix_training_set(&a, &f, &b, &zero).is_err());
    }

    #[test]
    fn transductive_set_basics() {
        let dev = mono("es", &["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"]);
        let out = mono("ast", &["A", "B", "C", "D", "E", "F", "G", "H", "I", "J"]);
        let one = assemble_transductive_set(&dev, std::slice::from_ref(&out), &lang("ast")).unwrap();
        assert_eq!(one.len(), 10);
        assert!(one.items.iter().all(|p| p.provenance == Provenance::Transductive));
        assert!(assemble_transductive_set(&dev, &[], &lang("ast")).unwrap().is_empty());
        let short = mono("ast", &["x"]);
        let err = assemble_transductive_set(&dev, &[out, short], &lang("ast")).unwrap_err();
        assert!(err.to_string().contains("model 1"), "{err}");
    }
}
