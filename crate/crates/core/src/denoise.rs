//! Similarity-based denoising. Pairs are scored by a pluggable
//! cross-lingual similarity scorer and pairs below the threshold are dropped.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, SentencePair};
use crate::error::{Error, Result};
use crate::external::LineCommand;
use crate::report::StageReport;

pub const DEFAULT_THRESHOLD: f64 = 0.7;

/// Cosine similarity clamped to [-1, 1].
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::invalid("vectors must have at least one dimension"));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::invalid("cosine similarity of a zero vector"));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub trait SimilarityScorer {
    /// One score per pair, in corpus order.
    fn score(&self, corpus: &Corpus) -> Result<Vec<f64>>;
}

/// Precomputed sentence embeddings: two aligned files with one vector per
/// line (space-separated decimals), source side and target side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingFileScorer {
    pub source: PathBuf,
    pub target: PathBuf,
}

pub fn read_embeddings(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            line.split_whitespace()
                .map(|v| {
                    v.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Error::Parse {
                            path: path.to_path_buf(),
                            line: i + 1,
                            message: format!("invalid embedding value {v:?}"),
                        })
                })
                .collect()
        })
        .collect()
}

impl SimilarityScorer for EmbeddingFileScorer {
    fn score(&self, corpus: &Corpus) -> Result<Vec<f64>> {
        let src = read_embeddings(&self.source)?;
        let tgt = read_embeddings(&self.target)?;
        for (label, side) in [(&self.source, &src), (&self.target, &tgt)] {
            if side.len() != corpus.len() {
                return Err(Error::LengthMismatch {
                    left_label: "corpus".into(),
                    left: corpus.len(),
                    right_label: label.display().to_string(),
                    right: side.len(),
                });
            }
        }
        src.iter()
            .zip(&tgt)
            .enumerate()
            .map(|(i, (a, b))| cosine_similarity(a, b).map_err(|e| Error::pair(i, e.to_string())))
            .collect()
    }
}

/// External scoring service: receives `source<TAB>target` lines on stdin and
/// prints one decimal score per line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalScorer {
    pub command: LineCommand,
    #[serde(default)]
    pub batch_size: Option<usize>,
}

impl SimilarityScorer for ExternalScorer {
    fn score(&self, corpus: &Corpus) -> Result<Vec<f64>> {
        let lines: Vec<String> = corpus
            .items
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if p.source.contains(['\t', '\n']) || p.target.contains(['\t', '\n']) {
                    Err(Error::pair(i, "text contains a tab or line break"))
                } else {
                    Ok(format!("{}\t{}", p.source, p.target))
                }
            })
            .collect::<Result<_>>()?;
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let out = self.command.run(&refs, self.batch_size)?;
        out.iter()
            .enumerate()
            .map(|(i, s)| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite() && (-1.0..=1.0).contains(v))
                    .ok_or_else(|| Error::Parse {
                        path: PathBuf::from("<scorer output>"),
                        line: i + 1,
                        message: format!("expected a score in [-1, 1], got {s:?}"),
                    })
            })
            .collect()
    }
}

/// Annotate every pair with its similarity score. Order and texts are
/// unchanged.
pub fn score_corpus(corpus: &Corpus, scorer: &dyn SimilarityScorer) -> Result<Corpus> {
    let scores = scorer.score(corpus)?;
    if scores.len() != corpus.len() {
        return Err(Error::LengthMismatch {
            left_label: "corpus".into(),
            left: corpus.len(),
            right_label: "scores".into(),
            right: scores.len(),
        });
    }
    Ok(corpus.with_items(
        corpus
            .items
            .iter()
            .zip(scores)
            .map(|(p, s)| SentencePair {
                sim_score: Some(s),
                ..p.clone()
            })
            .collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenoiseConfig {
    /// Pairs scoring at or above the threshold are kept.
    pub threshold: f64,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl DenoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.threshold) {
            return Err(Error::invalid(format!(
                "threshold {} outside [-1, 1]",
                self.threshold
            )));
        }
        Ok(())
    }
}

pub fn filter_by_similarity(corpus: &Corpus, cfg: &DenoiseConfig) -> Result<(Corpus, StageReport)> {
    cfg.validate()?;
    let mut items = Vec::with_capacity(corpus.len());
    for (i, p) in corpus.items.iter().enumerate() {
        let s = p
            .sim_score
            .ok_or_else(|| Error::pair(i, "missing similarity score"))?;
        if s >= cfg.threshold {
            items.push(p.clone());
        }
    }
    let mut report = StageReport::new("denoise", corpus.len());
    report.record("similarity", corpus.len(), items.len());
    Ok((corpus.with_items(items), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LangCode;

    fn corpus(n: usize) -> Corpus {
        Corpus::from_pairs(
            LangCode::new("es").unwrap(),
            LangCode::new("arg").unwrap(),
            (0..n)
                .map(|i| SentencePair::new(format!("s {i}"), format!("t {i}")))
                .collect(),
        )
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine_similarity(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine_similarity(&[1.0, 1.0], &[2.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(cosine_similarity(&[0.0, 0.0], &[1.0, 1.0]).is_err());
        assert!(cosine_similarity(&[1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn embedding_files() {
        let dir = tempfile::tempdir().unwrap();
        let s = dir.path().join("s.vec");
        let t = dir.path().join("t.vec");
        fs::write(&s, "1 2 3\n0.5 -1 2\n").unwrap();
        fs::write(&t, "1 2 3\n0.5 -1 2\n").unwrap();
        let scorer = EmbeddingFileScorer {
            source: s.clone(),
            target: t,
        };
        let out = score_corpus(&corpus(2), &scorer).unwrap();
        for p in &out.items {
            assert!((p.sim_score.unwrap() - 1.0).abs() < 1e-12);
        }
        fs::write(&s, "1 2 3\n").unwrap();
        assert!(matches!(
            score_corpus(&corpus(2), &scorer),
            Err(Error::LengthMismatch { left: 2, right: 1, .. })
        ));
    }

    #[test]
    fn external_constant_scorer() {
        let scorer = ExternalScorer {
            command: LineCommand::parse("sed s/.*/0.5/").unwrap(),
            batch_size: Some(2),
        };
        let out = score_corpus(&corpus(5), &scorer).unwrap();
        assert!(out.items.iter().all(|p| p.sim_score == Some(0.5)));
    }

    #[test]
    fn external_scorer_short_output() {
        let scorer = ExternalScorer {
            command: LineCommand::parse("head -n 2").unwrap(),
            batch_size: None,
        };
        assert!(matches!(
            score_corpus(&corpus(3), &scorer),
            Err(Error::LengthMismatch { left: 3, right: 2, .. })
        ));
    }

    #[test]
    fn external_scorer_garbage_line() {
        let scorer = ExternalScorer {
            command: LineCommand::parse("sh -c 'echo 0.9; echo nope'").unwrap(),
            batch_size: None,
        };
        match score_corpus(&corpus(2), &scorer) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn boundary_and_missing_scores() {
        let mut c = corpus(3);
        c.items[0].sim_score = Some(0.69);
        c.items[1].sim_score = Some(0.70);
        c.items[2].sim_score = Some(0.95);
        let (out, report) = filter_by_similarity(&c, &DenoiseConfig::default()).unwrap();
        assert_eq!(out.items, c.items[1..].to_vec());
        assert_eq!(report.removed_by("similarity"), 1);

        let (all, _) = filter_by_similarity(&c, &DenoiseConfig { threshold: -1.0 }).unwrap();
        assert_eq!(all.len(), 3);

        c.items[2].sim_score = None;
        assert!(matches!(
            filter_by_similarity(&c, &DenoiseConfig::default()),
            Err(Error::Pair { index: 2, .. })
        ));
        assert!(filter_by_similarity(&c, &DenoiseConfig { threshold: 1.5 }).is_err());
    }
}
