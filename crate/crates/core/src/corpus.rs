//! Bitext and monolingual corpus types plus their on-disk formats.
//!
//! The canonical interchange format is UTF-8 TSV, one `source<TAB>target`
//! pair per LF-terminated line. An extended variant, announced by a
//! `#bitext-v1` header line, carries three more columns: provenance,
//! alignment score and similarity score (empty when absent). Aligned
//! two-file corpora (one sentence per line on each side) are also accepted.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::ops::Add;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Header line of the extended TSV variant.
pub const EXTENDED_HEADER: &str = "#bitext-v1";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LangCode(String);

impl LangCode {
    pub fn new(code: &str) -> Result<Self> {
        let ok = (2..=8).contains(&code.len()) && code.bytes().all(|b| b.is_ascii_lowercase());
        if ok {
            Ok(LangCode(code.to_string()))
        } else {
            Err(Error::LangCode(code.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for LangCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LangCode::new(s)
    }
}

impl TryFrom<String> for LangCode {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        LangCode::new(&s)
    }
}

impl From<LangCode> for String {
    fn from(code: LangCode) -> String {
        code.0
    }
}

impl fmt::Display for LangCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Where a pair came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Authentic,
    #[serde(rename = "ft")]
    ForwardSynthetic,
    #[serde(rename = "bt")]
    BackSynthetic,
    #[serde(rename = "tel")]
    Transductive,
}

impl Provenance {
    pub const ALL: [Provenance; 4] = [
        Provenance::Authentic,
        Provenance::ForwardSynthetic,
        Provenance::BackSynthetic,
        Provenance::Transductive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Authentic => "authentic",
            Provenance::ForwardSynthetic => "ft",
            Provenance::BackSynthetic => "bt",
            Provenance::Transductive => "tel",
        }
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Provenance::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown provenance {s:?}")))
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentencePair {
    pub source: String,
    pub target: String,
    pub provenance: Provenance,
    /// Symmetrized mean per-token alignment log-probability, in nats.
    pub align_score: Option<f64>,
    /// Cross-lingual similarity in [-1, 1].
    pub sim_score: Option<f64>,
}

impl SentencePair {
    pub fn new(source: impl Into<String>, target: impl Into<String>) -> Self {
        Self::with_provenance(source, target, Provenance::Authentic)
    }

    pub fn with_provenance(
        source: impl Into<String>,
        target: impl Into<String>,
        provenance: Provenance,
    ) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
            provenance,
            align_score: None,
            sim_score: None,
        }
    }

    /// The pair with both scores cleared.
    pub fn unscored(&self) -> SentencePair {
        SentencePair {
            align_score: None,
            sim_score: None,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub src: LangCode,
    pub tgt: LangCode,
    pub items: Vec<SentencePair>,
}

impl Corpus {
    pub fn new(src: LangCode, tgt: LangCode) -> Self {
        Self::from_pairs(src, tgt, Vec::new())
    }

    pub fn from_pairs(src: LangCode, tgt: LangCode, items: Vec<SentencePair>) -> Self {
        Self { src, tgt, items }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Same language pair, new items.
    pub fn with_items(&self, items: Vec<SentencePair>) -> Corpus {
        Corpus::from_pairs(self.src.clone(), self.tgt.clone(), items)
    }

    pub fn same_direction(&self, other: &Corpus) -> bool {
        self.src == other.src && self.tgt == other.tgt
    }

    /// Swap source and target sides (and the language pair).
    pub fn reversed(&self) -> Corpus {
        let items = self
            .items
            .iter()
            .map(|p| SentencePair {
                source: p.target.clone(),
                target: p.source.clone(),
                ..p.clone()
            })
            .collect();
        Corpus::from_pairs(self.tgt.clone(), self.src.clone(), items)
    }

    pub fn source_side(&self) -> MonoCorpus {
        MonoCorpus::new(
            self.src.clone(),
            self.items.iter().map(|p| p.source.clone()).collect(),
        )
    }

    pub fn target_side(&self) -> MonoCorpus {
        MonoCorpus::new(
            self.tgt.clone(),
            self.items.iter().map(|p| p.target.clone()).collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonoCorpus {
    pub lang: LangCode,
    pub lines: Vec<String>,
}

impl MonoCorpus {
    pub fn new(lang: LangCode, lines: Vec<String>) -> Self {
        Self { lang, lines }
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

/// Location and layout of a parallel corpus on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParallelFile {
    /// Plain TSV when written; extended TSV is detected on read.
    Tsv(PathBuf),
    /// TSV with the `#bitext-v1` header and provenance/score columns.
    ExtendedTsv(PathBuf),
    TwoFile { source: PathBuf, target: PathBuf },
}

pub fn read_parallel(file: &ParallelFile, src: LangCode, tgt: LangCode) -> Result<Corpus> {
    let items = match file {
        ParallelFile::Tsv(path) | ParallelFile::ExtendedTsv(path) => read_tsv_items(path)?,
        ParallelFile::TwoFile { source, target } => read_two_file_items(source, target)?,
    };
    Ok(Corpus::from_pairs(src, tgt, items))
}

pub fn write_parallel(corpus: &Corpus, file: &ParallelFile) -> Result<()> {
    match file {
        ParallelFile::Tsv(path) => write_tsv(corpus, path, false),
        ParallelFile::ExtendedTsv(path) => write_tsv(corpus, path, true),
        ParallelFile::TwoFile { source, target } => write_two_file(corpus, source, target),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Lines of an LF-terminated file; a missing final LF is tolerated.
fn split_lines(text: &str) -> Vec<&str> {
    let mut lines: Vec<&str> = text.split('\n').collect();
    if lines.last() == Some(&"") {
        lines.pop();
    }
    lines
}

fn parse_score(path: &Path, line: usize, field: &str, what: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("invalid {what} {field:?}"),
        }),
    }
}

fn read_tsv_items(path: &Path) -> Result<Vec<SentencePair>> {
    let text = read_text(path)?;
    let lines = split_lines(&text);
    let extended = lines.first() == Some(&EXTENDED_HEADER);
    let expected = if extended { 5 } else { 2 };
    let skip = usize::from(extended);

    let mut items = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate().skip(skip) {
        let lineno = i + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != expected {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!("expected {expected} tab-separated fields, found {}", fields.len()),
            });
        }
        let mut pair = SentencePair::new(fields[0], fields[1]);
        if extended {
            pair.provenance = fields[2].parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!("unknown provenance {:?}", fields[2]),
            })?;
            pair.align_score = parse_score(path, lineno, fields[3], "alignment score")?;
            pair.sim_score = parse_score(path, lineno, fields[4], "similarity score")?;
        }
        items.push(pair);
    }
    Ok(items)
}

fn read_two_file_items(source: &Path, target: &Path) -> Result<Vec<SentencePair>> {
    let src_text = read_text(source)?;
    let tgt_text = read_text(target)?;
    let src_lines = split_lines(&src_text);
    let tgt_lines = split_lines(&tgt_text);
    if src_lines.len() != tgt_lines.len() {
        return Err(Error::LengthMismatch {
            left_label: source.display().to_string(),
            left: src_lines.len(),
            right_label: target.display().to_string(),
            right: tgt_lines.len(),
        });
    }
    Ok(src_lines
        .into_iter()
        .zip(tgt_lines)
        .map(|(s, t)| SentencePair::new(s, t))
        .collect())
}

fn check_field(index: usize, side: &str, text: &str, forbid_tab: bool) -> Result<()> {
    if text.contains(['\n', '\r']) {
        return Err(Error::pair(index, format!("{side} contains a line break")));
    }
    if forbid_tab && text.contains('\t') {
        return Err(Error::pair(
            index,
            format!("{side} contains a tab, which collides with the TSV delimiter"),
        ));
    }
    Ok(())
}

fn fmt_score(score: Option<f64>) -> String {
    score.map(|v| v.to_string()).unwrap_or_default()
}

fn write_tsv(corpus: &Corpus, path: &Path, extended: bool) -> Result<()> {
    for (i, p) in corpus.items.iter().enumerate() {
        check_field(i, "source", &p.source, true)?;
        check_field(i, "target", &p.target, true)?;
    }
    write_atomic(path, |w| {
        if extended {
            writeln!(w, "{EXTENDED_HEADER}")?;
        }
        for p in &corpus.items {
            if extended {
                writeln!(
                    w,
                    "{}\t{}\t{}\t{}\t{}",
                    p.source,
                    p.target,
                    p.provenance,
                    fmt_score(p.align_score),
                    fmt_score(p.sim_score)
                )?;
            } else {
                writeln!(w, "{}\t{}", p.source, p.target)?;
            }
        }
        Ok(())
    })
}

fn write_two_file(corpus: &Corpus, source: &Path, target: &Path) -> Result<()> {
    for (i, p) in corpus.items.iter().enumerate() {
        check_field(i, "source", &p.source, false)?;
        check_field(i, "target", &p.target, false)?;
    }
    write_lines(source, corpus.items.iter().map(|p| p.source.as_str()))?;
    write_lines(target, corpus.items.iter().map(|p| p.target.as_str()))
}

pub fn read_mono(path: &Path, lang: LangCode) -> Result<MonoCorpus> {
    let text = read_text(path)?;
    let lines = split_lines(&text).into_iter().map(str::to_string).collect();
    Ok(MonoCorpus::new(lang, lines))
}

pub fn write_mono(corpus: &MonoCorpus, path: &Path) -> Result<()> {
    for (i, line) in corpus.lines.iter().enumerate() {
        check_field(i, "line", line, false)?;
    }
    write_lines(path, corpus.lines.iter().map(String::as_str))
}

pub(crate) fn write_lines<'a>(path: &Path, lines: impl Iterator<Item = &'a str>) -> Result<()> {
    write_atomic(path, |w| {
        for line in lines {
            writeln!(w, "{line}")?;
        }
        Ok(())
    })
}

/// Write through a temporary file in the destination directory, then rename
/// it into place. Readers never observe a partially written file.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    let mut w = BufWriter::new(tmp);
    fill(&mut w).map_err(|e| Error::io(path, e))?;
    let tmp = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Whitespace tokens: maximal runs of non-whitespace characters.
pub fn token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsReport {
    pub total: usize,
    pub by_provenance: BTreeMap<Provenance, usize>,
    pub source_tokens: usize,
    pub target_tokens: usize,
}

impl Add for StatsReport {
    type Output = StatsReport;

    fn add(mut self, rhs: StatsReport) -> StatsReport {
        self.total += rhs.total;
        self.source_tokens += rhs.source_tokens;
        self.target_tokens += rhs.target_tokens;
        for (k, v) in rhs.by_provenance {
            *self.by_provenance.entry(k).or_default() += v;
        }
        self
    }
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "pairs\t{}", self.total)?;
        for (k, v) in &self.by_provenance {
            writeln!(f, "pairs.{k}\t{v}")?;
        }
        writeln!(f, "source_tokens\t{}", self.source_tokens)?;
        writeln!(f, "target_tokens\t{}", self.target_tokens)
    }
}

pub fn corpus_stats(corpus: &Corpus) -> StatsReport {
    let mut report = StatsReport::default();
    for p in &corpus.items {
        report.total += 1;
        *report.by_provenance.entry(p.provenance).or_default() += 1;
        report.source_tokens += token_count(&p.source);
        report.target_tokens += token_count(&p.target);
    }
    report
}
