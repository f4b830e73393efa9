//! Manifest-driven orchestration. A TOML manifest names input corpora and a
//! list of stages; each stage consumes named inputs or earlier stage outputs
//! and writes `<output_dir>/<stage>.<ext>` atomically.
//!
//! ```toml
//! [global]
//! seed = 1234
//! output_dir = "out"
//!
//! [inputs.es-arg]
//! kind = "parallel"
//! path = "data/es-arg.tsv"
//! src = "es"
//! tgt = "arg"
//!
//! [[stages]]
//! name = "clean-arg"
//! kind = "clean"
//! inputs = ["es-arg"]
//! params = { max_tokens = 80 }
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::align::{self, AlignPolicy, AlignTrainConfig};
use crate::augment::{self, MixSpec, Translator};
use crate::bpe::{self, BpeModel, DEFAULT_VOCAB_SIZE};
use crate::clean::{clean_corpus, CleaningConfig};
use crate::corpus::{read_mono, read_parallel, write_atomic, Corpus, LangCode, MonoCorpus, ParallelFile, SentencePair};
use crate::denoise::{self, DenoiseConfig, EmbeddingFileScorer, ExternalScorer, SimilarityScorer};
use crate::error::{Error, Result};
use crate::external::LineCommand;
use crate::report::{RuleCount, StageReport};
use crate::sampling::{self, SamplingPlan, TagScheme, DEFAULT_TEMPERATURE};

pub const REPORT_TEXT: &str = "run_report.txt";
pub const REPORT_JSON: &str = "run_report.json";

/// Every file a stage may write, by suffix after the stage name.
const OUTPUT_SUFFIXES: [&str; 4] = [".tsv", ".bpe", ".fwd.align", ".rev.align"];

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalSection {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    Parallel,
    Mono,
}

/// A declared corpus. Parallel inputs use either `path` (TSV, plain or
/// extended) or `source` + `target` (two aligned files); mono inputs use
/// `path` and `lang`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub kind: InputKind,
    pub path: Option<PathBuf>,
    pub source: Option<PathBuf>,
    pub target: Option<PathBuf>,
    pub src: Option<String>,
    pub tgt: Option<String>,
    pub lang: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub name: String,
    pub kind: String,
    #[serde(default)]
    pub inputs: Vec<String>,
    #[serde(default)]
    pub params: toml::Table,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineManifest {
    #[serde(default)]
    pub global: GlobalSection,
    #[serde(default)]
    pub inputs: BTreeMap<String, InputSpec>,
    #[serde(default)]
    pub stages: Vec<StageSpec>,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PipelineManifest {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut m: PipelineManifest = toml::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        m.base_dir = base_dir.into();
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base).map_err(|e| match e {
            Error::Manifest(msg) => Error::Manifest(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StageKind {
    Clean,
    AlignFilter,
    Denoise,
    BpeTrain,
    BpeEncode,
    Tag,
    Upsample,
    Mix,
    Ft,
    Bt,
    MixTraining,
    TelAssemble,
}

impl StageKind {
    pub const ALL: [StageKind; 12] = [
        StageKind::Clean,
        StageKind::AlignFilter,
        StageKind::Denoise,
        StageKind::BpeTrain,
        StageKind::BpeEncode,
        StageKind::Tag,
        StageKind::Upsample,
        StageKind::Mix,
        StageKind::Ft,
        StageKind::Bt,
        StageKind::MixTraining,
        StageKind::TelAssemble,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StageKind::Clean => "clean",
            StageKind::AlignFilter => "align-filter",
            StageKind::Denoise => "denoise",
            StageKind::BpeTrain => "bpe-train",
            StageKind::BpeEncode => "bpe-encode",
            StageKind::Tag => "tag",
            StageKind::Upsample => "upsample",
            StageKind::Mix => "mix",
            StageKind::Ft => "ft",
            StageKind::Bt => "bt",
            StageKind::MixTraining => "mix-training",
            StageKind::TelAssemble => "tel-assemble",
        }
    }
}

impl FromStr for StageKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        StageKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = StageKind::ALL.iter().map(|k| k.as_str()).collect();
                format!("unknown stage kind {s:?}, expected one of {}", names.join(", "))
            })
    }
}

impl fmt::Display for StageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AlignFilterParams {
    iterations: usize,
    p0: f64,
    tension: f64,
    smoothing_floor: f64,
    policy: String,
    value: Option<f64>,
}

impl Default for AlignFilterParams {
    fn default() -> Self {
        let cfg = AlignTrainConfig::default();
        Self {
            iterations: cfg.iterations,
            p0: cfg.p0,
            tension: cfg.tension,
            smoothing_floor: cfg.smoothing_floor,
            policy: "percentile".into(),
            value: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct DenoiseParams {
    #[serde(default = "default_threshold")]
    threshold: f64,
    scorer: String,
    command: Option<String>,
    batch_size: Option<usize>,
    source_embeddings: Option<PathBuf>,
    target_embeddings: Option<PathBuf>,
}

fn default_threshold() -> f64 {
    denoise::DEFAULT_THRESHOLD
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BpeTrainParams {
    vocab_size: usize,
}

impl Default for BpeTrainParams {
    fn default() -> Self {
        Self {
            vocab_size: DEFAULT_VOCAB_SIZE,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TagParams {
    tag: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct UpsampleParams {
    temperature: f64,
    /// Which side's language identifies each corpus.
    key: String,
}

impl Default for UpsampleParams {
    fn default() -> Self {
        Self {
            temperature: DEFAULT_TEMPERATURE,
            key: "target".into(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmptyParams {}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FtParams {
    teacher_cmd: String,
    tgt: String,
    sample: Option<usize>,
    batch_size: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct BtParams {
    teacher_cmd: String,
    src: String,
    sample: Option<usize>,
    batch_size: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MixTrainingParams {
    authentic: f64,
    forward: f64,
    back: f64,
}

impl Default for MixTrainingParams {
    fn default() -> Self {
        Self {
            authentic: 1.0,
            forward: 1.0,
            back: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TelParams {
    tgt: String,
    #[serde(default)]
    systems: Vec<String>,
    batch_size: Option<usize>,
}

/// A stage with validated, typed parameters.
#[derive(Debug, Clone)]
enum StageOp {
    Clean(CleaningConfig),
    AlignFilter(AlignTrainConfig, AlignPolicy),
    Denoise(DenoiseConfig, ScorerSpec),
    BpeTrain(usize),
    BpeEncode,
    Tag(Option<String>),
    Upsample { temperature: f64, by_target: bool },
    Mix,
    Ft { teacher: LineCommand, tgt: LangCode, sample: Option<usize>, batch_size: Option<usize> },
    Bt { teacher: LineCommand, src: LangCode, sample: Option<usize>, batch_size: Option<usize> },
    MixTraining(MixTrainingParams),
    TelAssemble { tgt: LangCode, systems: Vec<LineCommand>, batch_size: Option<usize> },
}

#[derive(Debug, Clone)]
enum ScorerSpec {
    Command(ExternalScorer),
    Files(EmbeddingFileScorer),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ArtifactType {
    Parallel,
    Mono,
    Bpe,
}

impl fmt::Display for ArtifactType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArtifactType::Parallel => "parallel corpus",
            ArtifactType::Mono => "monolingual corpus",
            ArtifactType::Bpe => "BPE model",
        })
    }
}

impl StageOp {
    fn output_type(&self) -> ArtifactType {
        match self {
            StageOp::BpeTrain(_) => ArtifactType::Bpe,
            _ => ArtifactType::Parallel,
        }
    }

    /// Check the input types against the stage's signature.
    fn check_inputs(&self, types: &[ArtifactType]) -> std::result::Result<(), String> {
        use ArtifactType::*;
        let all = |t: ArtifactType| types.iter().all(|&x| x == t);
        let ok = match self {
            StageOp::Clean(_) | StageOp::AlignFilter(..) | StageOp::Denoise(..) | StageOp::Tag(_) => {
                types == [Parallel]
            }
            StageOp::BpeTrain(_) | StageOp::Upsample { .. } | StageOp::Mix => !types.is_empty() && all(Parallel),
            StageOp::BpeEncode => types == [Bpe, Parallel],
            StageOp::Ft { .. } | StageOp::Bt { .. } => types == [Mono],
            StageOp::MixTraining(_) => types == [Parallel, Parallel, Parallel],
            StageOp::TelAssemble { systems, .. } => {
                !types.is_empty() && all(Mono) && types.len() - 1 + systems.len() >= 1
            }
        };
        if ok {
            return Ok(());
        }
        let expected = match self {
            StageOp::Clean(_) | StageOp::AlignFilter(..) | StageOp::Denoise(..) | StageOp::Tag(_) => {
                "exactly one parallel corpus"
            }
            StageOp::BpeTrain(_) | StageOp::Upsample { .. } | StageOp::Mix => "one or more parallel corpora",
            StageOp::BpeEncode => "a BPE model followed by a parallel corpus",
            StageOp::Ft { .. } | StageOp::Bt { .. } => "exactly one monolingual corpus",
            StageOp::MixTraining(_) => "three parallel corpora: authentic, forward, back",
            StageOp::TelAssemble { .. } => {
                "monolingual dev sources, then system outputs (at least one output or command)"
            }
        };
        let got: Vec<String> = types.iter().map(ToString::to_string).collect();
        Err(format!("expects {expected}, got [{}]", got.join(", ")))
    }
}

/// A validation problem, located by a dotted path into the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.path, self.message)
    }
}

#[derive(Debug, Clone)]
enum ResolvedInput {
    Parallel { file: ParallelFile, src: LangCode, tgt: LangCode },
    Mono { path: PathBuf, lang: LangCode },
}

impl ResolvedInput {
    fn artifact_type(&self) -> ArtifactType {
        match self {
            ResolvedInput::Parallel { .. } => ArtifactType::Parallel,
            ResolvedInput::Mono { .. } => ArtifactType::Mono,
        }
    }
}

#[derive(Debug, Clone)]
struct PlannedStage {
    name: String,
    kind: StageKind,
    inputs: Vec<String>,
    op: StageOp,
}

#[derive(Debug, Clone)]
struct Plan {
    seed: u64,
    output_dir: PathBuf,
    inputs: BTreeMap<String, ResolvedInput>,
    stages: Vec<PlannedStage>,
    /// Execution order as indices into `stages`.
    order: Vec<usize>,
}

struct Validator<'a> {
    manifest: &'a PipelineManifest,
    diags: Vec<Diagnostic>,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl<'a> Validator<'a> {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.diags.push(Diagnostic {
            path: path.into(),
            message: message.into(),
        });
    }

    fn lang(&mut self, path: String, code: Option<&str>) -> Option<LangCode> {
        match code {
            None => {
                self.push(path, "required");
                None
            }
            Some(c) => match LangCode::new(c) {
                Ok(l) => Some(l),
                Err(e) => {
                    self.push(path, e.to_string());
                    None
                }
            },
        }
    }

    fn existing_file(&mut self, path: String, p: &Path) -> PathBuf {
        let resolved = self.manifest.resolve(p);
        if !resolved.is_file() {
            self.push(path, format!("file not found: {}", resolved.display()));
        }
        resolved
    }

    fn input(&mut self, name: &str, spec: &InputSpec) -> Option<ResolvedInput> {
        let at = format!("inputs.{name}");
        if !valid_name(name) {
            self.push(&at, "name must use only ASCII letters, digits, '-' and '_'");
        }
        match spec.kind {
            InputKind::Parallel => {
                for (field, v) in [("lang", &spec.lang)] {
                    if v.is_some() {
                        self.push(format!("{at}.{field}"), "not used by parallel inputs");
                    }
                }
                let src = self.lang(format!("{at}.src"), spec.src.as_deref());
                let tgt = self.lang(format!("{at}.tgt"), spec.tgt.as_deref());
                let file = match (&spec.path, &spec.source, &spec.target) {
                    (Some(p), None, None) => Some(ParallelFile::Tsv(self.existing_file(format!("{at}.path"), p))),
                    (None, Some(s), Some(t)) => Some(ParallelFile::TwoFile {
                        source: self.existing_file(format!("{at}.source"), s),
                        target: self.existing_file(format!("{at}.target"), t),
                    }),
                    _ => {
                        self.push(&at, "needs either `path` or both `source` and `target`");
                        None
                    }
                };
                Some(ResolvedInput::Parallel {
                    file: file?,
                    src: src?,
                    tgt: tgt?,
                })
            }
            InputKind::Mono => {
                for (field, v) in [("src", &spec.src), ("tgt", &spec.tgt)] {
                    if v.is_some() {
                        self.push(format!("{at}.{field}"), "not used by mono inputs");
                    }
                }
                if spec.source.is_some() || spec.target.is_some() {
                    self.push(&at, "mono inputs take a single `path`");
                }
                let lang = self.lang(format!("{at}.lang"), spec.lang.as_deref());
                let path = match &spec.path {
                    Some(p) => Some(self.existing_file(format!("{at}.path"), p)),
                    None => {
                        self.push(format!("{at}.path"), "required");
                        None
                    }
                };
                Some(ResolvedInput::Mono {
                    path: path?,
                    lang: lang?,
                })
            }
        }
    }

    fn params<T: DeserializeOwned>(&mut self, at: &str, table: &toml::Table) -> Option<T> {
        match toml::Value::Table(table.clone()).try_into::<T>() {
            Ok(v) => Some(v),
            Err(e) => {
                self.push(format!("{at}.params"), e.message().trim().to_string());
                None
            }
        }
    }

    fn check(&mut self, path: String, r: Result<()>) {
        if let Err(e) = r {
            let msg = match e {
                Error::InvalidArgument(m) => m,
                other => other.to_string(),
            };
            self.push(path, msg);
        }
    }

    fn command(&mut self, path: String, cmdline: &str) -> Option<LineCommand> {
        match LineCommand::parse(cmdline) {
            Ok(c) => Some(c),
            Err(e) => {
                self.push(path, e.to_string());
                None
            }
        }
    }

    fn batch(&mut self, path: String, b: Option<usize>) {
        if b == Some(0) {
            self.push(path, "must be positive");
        }
    }

    fn stage_op(&mut self, at: &str, kind: StageKind, params: &toml::Table) -> Option<StageOp> {
        let p = |field: &str| format!("{at}.params.{field}");
        match kind {
            StageKind::Clean => {
                let cfg: CleaningConfig = self.params(at, params)?;
                self.check(format!("{at}.params"), cfg.validate());
                Some(StageOp::Clean(cfg))
            }
            StageKind::AlignFilter => {
                let a: AlignFilterParams = self.params(at, params)?;
                let cfg = AlignTrainConfig {
                    iterations: a.iterations,
                    p0: a.p0,
                    tension: a.tension,
                    smoothing_floor: a.smoothing_floor,
                };
                self.check(format!("{at}.params"), cfg.validate());
                let policy = match (a.policy.as_str(), a.value) {
                    ("percentile", v) => AlignPolicy::Percentile(v.unwrap_or(10.0)),
                    ("absolute", Some(t)) => AlignPolicy::Absolute(t),
                    ("absolute", None) => {
                        self.push(p("value"), "required by the absolute policy");
                        return None;
                    }
                    (other, _) => {
                        self.push(p("policy"), format!("must be \"percentile\" or \"absolute\", got {other:?}"));
                        return None;
                    }
                };
                self.check(p("value"), policy.validate());
                Some(StageOp::AlignFilter(cfg, policy))
            }
            StageKind::Denoise => {
                let d: DenoiseParams = self.params(at, params)?;
                let cfg = DenoiseConfig { threshold: d.threshold };
                if !(-1.0..=1.0).contains(&d.threshold) {
                    self.push(p("threshold"), format!("must lie in [-1, 1], got {}", d.threshold));
                }
                self.batch(p("batch_size"), d.batch_size);
                let scorer = match d.scorer.as_str() {
                    "cmd" => {
                        let Some(cmdline) = d.command.as_deref() else {
                            self.push(p("command"), "required by the cmd scorer");
                            return None;
                        };
                        ScorerSpec::Command(ExternalScorer {
                            command: self.command(p("command"), cmdline)?,
                            batch_size: d.batch_size,
                        })
                    }
                    "files" => {
                        let (Some(s), Some(t)) = (&d.source_embeddings, &d.target_embeddings) else {
                            self.push(
                                format!("{at}.params"),
                                "the files scorer needs source_embeddings and target_embeddings",
                            );
                            return None;
                        };
                        ScorerSpec::Files(EmbeddingFileScorer {
                            source: self.existing_file(p("source_embeddings"), s),
                            target: self.existing_file(p("target_embeddings"), t),
                        })
                    }
                    other => {
                        self.push(p("scorer"), format!("must be \"cmd\" or \"files\", got {other:?}"));
                        return None;
                    }
                };
                Some(StageOp::Denoise(cfg, scorer))
            }
            StageKind::BpeTrain => {
                let b: BpeTrainParams = self.params(at, params)?;
                if b.vocab_size == 0 {
                    self.push(p("vocab_size"), "must be positive");
                }
                Some(StageOp::BpeTrain(b.vocab_size))
            }
            StageKind::BpeEncode => {
                self.params::<EmptyParams>(at, params)?;
                Some(StageOp::BpeEncode)
            }
            StageKind::Tag => {
                let t: TagParams = self.params(at, params)?;
                if let Some(tag) = &t.tag {
                    if tag.is_empty() || tag.chars().any(char::is_whitespace) {
                        self.push(p("tag"), "must be a single non-empty token");
                    }
                }
                Some(StageOp::Tag(t.tag))
            }
            StageKind::Upsample => {
                let u: UpsampleParams = self.params(at, params)?;
                if !(u.temperature.is_finite() && u.temperature > 0.0) {
                    self.push(p("temperature"), format!("must be positive, got {}", u.temperature));
                }
                let by_target = match u.key.as_str() {
                    "target" => true,
                    "source" => false,
                    other => {
                        self.push(p("key"), format!("must be \"source\" or \"target\", got {other:?}"));
                        return None;
                    }
                };
                Some(StageOp::Upsample {
                    temperature: u.temperature,
                    by_target,
                })
            }
            StageKind::Mix => {
                self.params::<EmptyParams>(at, params)?;
                Some(StageOp::Mix)
            }
            StageKind::Ft => {
                let f: FtParams = self.params(at, params)?;
                self.batch(p("batch_size"), f.batch_size);
                if f.sample == Some(0) {
                    self.push(p("sample"), "must be positive");
                }
                let tgt = self.lang(p("tgt"), Some(&f.tgt));
                let teacher = self.command(p("teacher_cmd"), &f.teacher_cmd);
                Some(StageOp::Ft {
                    teacher: teacher?,
                    tgt: tgt?,
                    sample: f.sample,
                    batch_size: f.batch_size,
                })
            }
            StageKind::Bt => {
                let b: BtParams = self.params(at, params)?;
                self.batch(p("batch_size"), b.batch_size);
                if b.sample == Some(0) {
                    self.push(p("sample"), "must be positive");
                }
                let src = self.lang(p("src"), Some(&b.src));
                let teacher = self.command(p("teacher_cmd"), &b.teacher_cmd);
                Some(StageOp::Bt {
                    teacher: teacher?,
                    src: src?,
                    sample: b.sample,
                    batch_size: b.batch_size,
                })
            }
            StageKind::MixTraining => {
                let m: MixTrainingParams = self.params(at, params)?;
                let spec = MixSpec {
                    authentic: m.authentic,
                    forward: m.forward,
                    back: m.back,
                    seed: 0,
                };
                self.check(format!("{at}.params"), spec.validate());
                Some(StageOp::MixTraining(m))
            }
            StageKind::TelAssemble => {
                let t: TelParams = self.params(at, params)?;
                self.batch(p("batch_size"), t.batch_size);
                let tgt = self.lang(p("tgt"), Some(&t.tgt));
                let mut systems = Vec::new();
                for (i, s) in t.systems.iter().enumerate() {
                    systems.extend(self.command(format!("{at}.params.systems[{i}]"), s));
                }
                Some(StageOp::TelAssemble {
                    tgt: tgt?,
                    systems,
                    batch_size: t.batch_size,
                })
            }
        }
    }

    fn run(mut self) -> (Option<Plan>, Vec<Diagnostic>) {
        let m = self.manifest;
        let seed = m.global.seed;
        if seed.is_none() {
            self.push("global.seed", "required");
        }
        let output_dir = match &m.global.output_dir {
            Some(d) => Some(m.resolve(d)),
            None => {
                self.push("global.output_dir", "required");
                None
            }
        };
        if m.stages.is_empty() {
            self.push("stages", "at least one stage is required");
        }

        let mut inputs = BTreeMap::new();
        for (name, spec) in &m.inputs {
            if let Some(r) = self.input(name, spec) {
                inputs.insert(name.clone(), r);
            }
        }

        let mut stage_index: HashMap<&str, usize> = HashMap::new();
        for (i, s) in m.stages.iter().enumerate() {
            let at = format!("stages.{}", s.name);
            if !valid_name(&s.name) {
                self.push(format!("stages[{i}].name"), format!("{:?} must use only ASCII letters, digits, '-' and '_'", s.name));
            }
            if m.inputs.contains_key(&s.name) {
                self.push(&at, "name collides with a declared input");
            }
            if stage_index.insert(&s.name, i).is_some() {
                self.push(&at, "duplicate stage name");
            }
        }

        let mut planned: Vec<Option<PlannedStage>> = Vec::with_capacity(m.stages.len());
        for s in &m.stages {
            let at = format!("stages.{}", s.name);
            let kind = match s.kind.parse::<StageKind>() {
                Ok(k) => Some(k),
                Err(e) => {
                    self.push(format!("{at}.kind"), e);
                    None
                }
            };
            if s.inputs.is_empty() {
                self.push(format!("{at}.inputs"), "at least one input is required");
            }
            for r in &s.inputs {
                if *r == s.name {
                    self.push(format!("{at}.inputs"), "stage refers to itself");
                } else if !m.inputs.contains_key(r) && !stage_index.contains_key(r.as_str()) {
                    self.push(format!("{at}.inputs"), format!("unknown input or stage {r:?}"));
                }
            }
            let op = kind.and_then(|k| self.stage_op(&at, k, &s.params));
            planned.push(op.map(|op| PlannedStage {
                name: s.name.clone(),
                kind: kind.expect("op implies kind"),
                inputs: s.inputs.clone(),
                op,
            }));
        }

        let order = self.topological_order(&stage_index);

        // type signatures, following the execution order so upstream types are known
        if let Some(order) = &order {
            let mut types: HashMap<&str, ArtifactType> =
                inputs.iter().map(|(n, r)| (n.as_str(), r.artifact_type())).collect();
            for &i in order {
                let Some(stage) = &planned[i] else { continue };
                let got: Option<Vec<ArtifactType>> =
                    stage.inputs.iter().map(|r| types.get(r.as_str()).copied()).collect();
                if let Some(got) = got {
                    if let Err(msg) = stage.op.check_inputs(&got) {
                        self.push(format!("stages.{}.inputs", stage.name), msg);
                    }
                }
                types.insert(&m.stages[i].name, stage.op.output_type());
            }
        }

        let diags = self.diags;
        if !diags.is_empty() {
            return (None, diags);
        }
        let plan = Plan {
            seed: seed.expect("checked"),
            output_dir: output_dir.expect("checked"),
            inputs,
            stages: planned.into_iter().map(|s| s.expect("checked")).collect(),
            order: order.expect("checked"),
        };
        (Some(plan), diags)
    }

    /// Kahn's algorithm; among ready stages the earliest declared runs first.
    fn topological_order(&mut self, index: &HashMap<&str, usize>) -> Option<Vec<usize>> {
        let stages = &self.manifest.stages;
        let n = stages.len();
        let mut indegree = vec![0usize; n];
        let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, s) in stages.iter().enumerate() {
            for r in &s.inputs {
                if let Some(&j) = index.get(r.as_str()) {
                    if j != i {
                        indegree[i] += 1;
                        dependents[j].push(i);
                    }
                }
            }
        }
        let mut ready: std::collections::BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &d in &dependents[i] {
                indegree[d] -= 1;
                if indegree[d] == 0 {
                    ready.insert(d);
                }
            }
        }
        if order.len() == n {
            return Some(order);
        }
        let stuck: Vec<&str> = (0..n)
            .filter(|&i| indegree[i] > 0 && stages[i].inputs.iter().all(|r| *r != stages[i].name))
            .map(|i| stages[i].name.as_str())
            .collect();
        if !stuck.is_empty() {
            self.push("stages", format!("inputs form a cycle through {}", stuck.join(", ")));
        }
        None
    }
}

/// All problems with `manifest`; empty iff it can run.
pub fn validate_manifest(manifest: &PipelineManifest) -> Vec<Diagnostic> {
    plan(manifest).1
}

fn plan(manifest: &PipelineManifest) -> (Option<Plan>, Vec<Diagnostic>) {
    Validator {
        manifest,
        diags: Vec::new(),
    }
    .run()
}

/// Seed for one stage, derived from the global seed and the stage name.
pub fn stage_seed(global: u64, stage: &str) -> u64 {
    // splitmix64 finalizer
    let mut z = global ^ sampling::stream_key(stage);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub kind: String,
    pub inputs: Vec<String>,
    pub input: usize,
    pub output: usize,
    pub removed: Vec<RuleCount>,
    pub notes: Vec<String>,
    pub wall_seconds: f64,
    pub outputs: Vec<OutputDigest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    /// Line or pair counts of the declared inputs.
    pub inputs: BTreeMap<String, usize>,
    pub stages: Vec<StageRecord>,
}

impl RunReport {
    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    /// Stages whose input count is not the sum of their upstream counts.
    /// BPE models are not counted as data.
    pub fn chaining_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for s in &self.stages {
            let upstream: usize = s
                .inputs
                .iter()
                .map(|r| match self.stage(r) {
                    Some(u) if u.kind == StageKind::BpeTrain.as_str() => 0,
                    Some(u) => u.output,
                    None => self.inputs.get(r).copied().unwrap_or(0),
                })
                .sum();
            if upstream != s.input {
                out.push(format!("{}: input {} but upstream produced {upstream}", s.name, s.input));
            }
        }
        out
    }

    /// One stage per row with removals, then `sha256sum`-style digests.
    pub fn to_text(&self) -> String {
        let mut t = String::new();
        let removed: Vec<String> = self
            .stages
            .iter()
            .map(|s| {
                let r: Vec<String> = s.removed.iter().map(|r| format!("{}={}", r.rule, r.removed)).collect();
                if r.is_empty() { "-".into() } else { r.join(" ") }
            })
            .collect();
        let w_name = self.stages.iter().map(|s| s.name.len()).chain([5]).max().unwrap_or(5);
        let w_kind = self.stages.iter().map(|s| s.kind.len()).chain([4]).max().unwrap_or(4);
        let w_rem = removed.iter().map(String::len).chain([7]).max().unwrap_or(7);
        t.push_str(&format!("seed {}\n\n", self.seed));
        t.push_str(&format!(
            "{:<w_name$}  {:<w_kind$}  {:>9}  {:>9}  {:<w_rem$}  {:>9}\n",
            "stage", "kind", "input", "output", "removed", "seconds"
        ));
        for (s, r) in self.stages.iter().zip(&removed) {
            t.push_str(&format!(
                "{:<w_name$}  {:<w_kind$}  {:>9}  {:>9}  {:<w_rem$}  {:>9.3}\n",
                s.name, s.kind, s.input, s.output, r, s.wall_seconds
            ));
        }
        let notes: Vec<(&str, &String)> = self
            .stages
            .iter()
            .flat_map(|s| s.notes.iter().map(move |n| (s.name.as_str(), n)))
            .collect();
        if !notes.is_empty() {
            t.push('\n');
            for (stage, n) in notes {
                t.push_str(&format!("{stage}: {n}\n"));
            }
        }
        t.push('\n');
        for s in &self.stages {
            for o in &s.outputs {
                t.push_str(&format!("{}  {}\n", o.sha256, o.file));
            }
        }
        t
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

#[derive(Debug, Clone)]
enum Artifact {
    Parallel(Corpus),
    Mono(MonoCorpus),
    Bpe(BpeModel),
}

impl Artifact {
    fn size(&self) -> usize {
        match self {
            Artifact::Parallel(c) => c.len(),
            Artifact::Mono(m) => m.len(),
            Artifact::Bpe(_) => 0,
        }
    }

    fn parallel(&self) -> &Corpus {
        match self {
            Artifact::Parallel(c) => c,
            _ => unreachable!("input types are checked during validation"),
        }
    }

    fn mono(&self) -> &MonoCorpus {
        match self {
            Artifact::Mono(m) => m,
            _ => unreachable!("input types are checked during validation"),
        }
    }

    fn bpe(&self) -> &BpeModel {
        match self {
            Artifact::Bpe(b) => b,
            _ => unreachable!("input types are checked during validation"),
        }
    }
}

struct StageOutcome {
    artifact: Artifact,
    removed: Vec<RuleCount>,
    notes: Vec<String>,
    /// Side files written by the stage itself.
    extra_files: Vec<PathBuf>,
}

impl StageOutcome {
    fn corpus(c: Corpus) -> Self {
        Self {
            artifact: Artifact::Parallel(c),
            removed: Vec::new(),
            notes: Vec::new(),
            extra_files: Vec::new(),
        }
    }

    fn filtered(c: Corpus, report: StageReport) -> Self {
        Self {
            removed: report.removed,
            ..Self::corpus(c)
        }
    }
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn maybe_sample(mono: &MonoCorpus, sample: Option<usize>, seed: u64) -> Result<MonoCorpus> {
    match sample {
        Some(k) if k < mono.len() => augment::sample_monolingual(mono, k, seed),
        _ => Ok(mono.clone()),
    }
}

fn execute(stage: &PlannedStage, inputs: &[&Artifact], seed: u64, out_dir: &Path) -> Result<StageOutcome> {
    let name = stage.name.as_str();
    Ok(match &stage.op {
        StageOp::Clean(cfg) => {
            let (c, r) = clean_corpus(inputs[0].parallel(), cfg);
            StageOutcome::filtered(c, r)
        }
        StageOp::AlignFilter(cfg, policy) => {
            let input = inputs[0].parallel();
            let mut report = StageReport::new(name, input.len());
            let scorable = align::drop_empty(input);
            report.record("empty", input.len(), scorable.len());
            let fwd = align::train_alignment(&scorable, cfg)?;
            let rev = align::train_alignment(&scorable.reversed(), cfg)?;
            let (kept, r) = align::filter_by_alignment(&scorable, &fwd, &rev, *policy)?;
            report.record("alignment", scorable.len(), kept.len());
            debug_assert_eq!(r.output, kept.len());
            let fwd_path = out_dir.join(format!("{name}.fwd.align"));
            let rev_path = out_dir.join(format!("{name}.rev.align"));
            align::write_model(&fwd, &fwd_path)?;
            align::write_model(&rev, &rev_path)?;
            StageOutcome {
                extra_files: vec![fwd_path, rev_path],
                ..StageOutcome::filtered(kept, report)
            }
        }
        StageOp::Denoise(cfg, scorer) => {
            let input = inputs[0].parallel();
            let scorer: &dyn SimilarityScorer = match scorer {
                ScorerSpec::Command(s) => s,
                ScorerSpec::Files(s) => s,
            };
            let scored = denoise::score_corpus(input, scorer)?;
            let (c, r) = denoise::filter_by_similarity(&scored, cfg)?;
            StageOutcome::filtered(c, r)
        }
        StageOp::BpeTrain(vocab_size) => {
            let corpora: Vec<Corpus> = inputs.iter().map(|a| a.parallel().clone()).collect();
            let model = bpe::train_bpe_joint(&corpora, *vocab_size)?;
            StageOutcome {
                notes: vec![format!(
                    "{} merges, {} pieces (limit {vocab_size})",
                    model.merges().len(),
                    model.vocab_len()
                )],
                artifact: Artifact::Bpe(model),
                removed: Vec::new(),
                extra_files: Vec::new(),
            }
        }
        StageOp::BpeEncode => {
            let model = inputs[0].bpe();
            let c = inputs[1].parallel();
            StageOutcome::corpus(
                c.with_items(
                    c.items
                        .iter()
                        .map(|p| SentencePair {
                            source: model.encode(&p.source).join(" "),
                            target: model.encode(&p.target).join(" "),
                            ..p.clone()
                        })
                        .collect(),
                ),
            )
        }
        StageOp::Tag(tag) => {
            let c = inputs[0].parallel();
            let mut scheme = TagScheme::for_languages([&c.tgt]);
            if let Some(t) = tag {
                scheme.insert(c.tgt.clone(), t.clone())?;
            }
            StageOutcome::corpus(sampling::tag_language(c, &scheme, &c.tgt)?)
        }
        StageOp::Upsample { temperature, by_target } => {
            let mut keyed: BTreeMap<LangCode, Corpus> = BTreeMap::new();
            let mut keys = Vec::with_capacity(inputs.len());
            for (a, input_name) in inputs.iter().zip(&stage.inputs) {
                let c = a.parallel();
                let key = if *by_target { c.tgt.clone() } else { c.src.clone() };
                if keyed.insert(key.clone(), c.clone()).is_some() {
                    return Err(Error::invalid(format!(
                        "language {key} appears in more than one input (second: {input_name})"
                    )));
                }
                keys.push(key);
            }
            let plan = SamplingPlan::for_corpora(&keyed, *temperature, seed)?;
            let mut sampled = sampling::upsample(&keyed, &plan)?;
            let mut items = Vec::new();
            let mut notes = Vec::new();
            for key in &keys {
                let before = keyed[key].len();
                let c = sampled.remove(key).expect("one output per language");
                notes.push(format!(
                    "{key}: {before} -> {} (ratio {:.4})",
                    c.len(),
                    plan.ratio(key).expect("planned")
                ));
                items.extend(c.items);
            }
            StageOutcome {
                notes,
                ..StageOutcome::corpus(inputs[0].parallel().with_items(items))
            }
        }
        StageOp::Mix => {
            let corpora: Vec<Corpus> = inputs.iter().map(|a| a.parallel().clone()).collect();
            StageOutcome::corpus(sampling::mix_shuffle(&corpora, seed)?)
        }
        StageOp::Ft { teacher, tgt, sample, batch_size } => {
            let mono = maybe_sample(inputs[0].mono(), *sample, seed)?;
            let translator = Translator {
                command: teacher.clone(),
                src: mono.lang.clone(),
                tgt: tgt.clone(),
                batch_size: *batch_size,
            };
            StageOutcome::corpus(augment::forward_translate(&mono, &translator)?)
        }
        StageOp::Bt { teacher, src, sample, batch_size } => {
            let mono = maybe_sample(inputs[0].mono(), *sample, seed)?;
            let translator = Translator {
                command: teacher.clone(),
                src: mono.lang.clone(),
                tgt: src.clone(),
                batch_size: *batch_size,
            };
            StageOutcome::corpus(augment::back_translate(&mono, &translator)?)
        }
        StageOp::MixTraining(w) => {
            let spec = MixSpec {
                authentic: w.authentic,
                forward: w.forward,
                back: w.back,
                seed,
            };
            StageOutcome::corpus(augment::mix_training_set(
                inputs[0].parallel(),
                inputs[1].parallel(),
                inputs[2].parallel(),
                &spec,
            )?)
        }
        StageOp::TelAssemble { tgt, systems, batch_size } => {
            let dev = inputs[0].mono();
            let mut outputs: Vec<MonoCorpus> = inputs[1..].iter().map(|a| a.mono().clone()).collect();
            for cmd in systems {
                let t = Translator {
                    command: cmd.clone(),
                    src: dev.lang.clone(),
                    tgt: tgt.clone(),
                    batch_size: *batch_size,
                };
                outputs.push(MonoCorpus::new(tgt.clone(), t.translate(&dev.lines)?));
            }
            let set = augment::assemble_transductive_set(dev, &outputs, tgt)?;
            StageOutcome {
                notes: vec![format!(
                    "{} systems x {} dev lines, {} distinct pairs",
                    outputs.len(),
                    dev.len(),
                    set.len()
                )],
                ..StageOutcome::corpus(set)
            }
        }
    })
}

fn load_input(r: &ResolvedInput) -> Result<Artifact> {
    Ok(match r {
        ResolvedInput::Parallel { file, src, tgt } => Artifact::Parallel(read_parallel(file, src.clone(), tgt.clone())?),
        ResolvedInput::Mono { path, lang } => Artifact::Mono(read_mono(path, lang.clone())?),
    })
}

fn remove_if_present(path: &Path) -> Result<()> {
    match fs::remove_file(path) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
        Err(e) => Err(Error::io(path, e)),
    }
}

/// Validate, then run every stage in dependency order (declaration order
/// among independent stages). Outputs from an earlier run of the same
/// manifest are removed first, so a failed run never leaves stale files
/// next to fresh ones.
pub fn run_manifest(manifest: &PipelineManifest) -> Result<RunReport> {
    let (plan, diags) = plan(manifest);
    let Some(plan) = plan else {
        return Err(Error::InvalidManifest(diags.iter().map(ToString::to_string).collect()));
    };
    let out_dir = &plan.output_dir;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for s in &plan.stages {
        for suffix in OUTPUT_SUFFIXES {
            remove_if_present(&out_dir.join(format!("{}{suffix}", s.name)))?;
        }
    }
    for f in [REPORT_TEXT, REPORT_JSON] {
        remove_if_present(&out_dir.join(f))?;
    }

    let mut artifacts: HashMap<String, Artifact> = HashMap::new();
    let mut input_sizes = BTreeMap::new();
    for (name, r) in &plan.inputs {
        let a = load_input(r)?;
        input_sizes.insert(name.clone(), a.size());
        artifacts.insert(name.clone(), a);
    }

    let mut records = Vec::with_capacity(plan.stages.len());
    for &i in &plan.order {
        let stage = &plan.stages[i];
        let started = Instant::now();
        let wrap = |e: Error| Error::Stage {
            stage: stage.name.clone(),
            source: Box::new(e),
        };
        let ins: Vec<&Artifact> = stage.inputs.iter().map(|r| &artifacts[r]).collect();
        let input = ins.iter().map(|a| a.size()).sum();
        let seed = stage_seed(plan.seed, &stage.name);
        let outcome = execute(stage, &ins, seed, out_dir).map_err(wrap)?;

        let main_file = match &outcome.artifact {
            Artifact::Parallel(c) => {
                let path = out_dir.join(format!("{}.tsv", stage.name));
                crate::corpus::write_parallel(c, &ParallelFile::ExtendedTsv(path.clone())).map_err(wrap)?;
                path
            }
            Artifact::Bpe(m) => {
                let path = out_dir.join(format!("{}.bpe", stage.name));
                bpe::write_model(m, &path).map_err(wrap)?;
                path
            }
            Artifact::Mono(_) => unreachable!("no stage produces a monolingual corpus"),
        };
        let mut outputs = Vec::new();
        for path in std::iter::once(&main_file).chain(&outcome.extra_files) {
            outputs.push(OutputDigest {
                file: path.file_name().expect("stage file").to_string_lossy().into_owned(),
                sha256: sha256_file(path).map_err(wrap)?,
            });
        }
        let output = match &outcome.artifact {
            Artifact::Bpe(m) => m.vocab_len(),
            a => a.size(),
        };
        records.push(StageRecord {
            name: stage.name.clone(),
            kind: stage.kind.as_str().to_string(),
            inputs: stage.inputs.clone(),
            input,
            output,
            removed: outcome.removed,
            notes: outcome.notes,
            wall_seconds: started.elapsed().as_secs_f64(),
            outputs,
        });
        artifacts.insert(stage.name.clone(), outcome.artifact);
    }

    let report = RunReport {
        seed: plan.seed,
        inputs: input_sizes,
        stages: records,
    };
    write_atomic(&out_dir.join(REPORT_TEXT), |w| w.write_all(report.to_text().as_bytes()))?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Manifest(e.to_string()))?;
    write_atomic(&out_dir.join(REPORT_JSON), |w| writeln!(w, "{json}"))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(text: &str, dir: &Path) -> PipelineManifest {
        PipelineManifest::parse(text, dir).unwrap()
    }

    fn setup() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("c.tsv"), "hola mundo\tola mundo\nbuenos días\tbon día\n").unwrap();
        fs::write(dir.path().join("m.txt"), "uno\ndos\n").unwrap();
        dir
    }

    const HEAD: &str = r#"
[global]
seed = 7
output_dir = "out"

[inputs.c]
kind = "parallel"
path = "c.tsv"
src = "es"
tgt = "arg"

[inputs.m]
kind = "mono"
path = "m.txt"
lang = "es"
"#;

    fn messages(d: &[Diagnostic]) -> Vec<String> {
        d.iter().map(ToString::to_string).collect()
    }

    #[test]
    fn missing_seed() {
        let dir = setup();
        let text = HEAD.replace("seed = 7\n", "") + "[[stages]]\nname = \"a\"\nkind = \"clean\"\ninputs = [\"c\"]\n";
        let d = messages(&validate_manifest(&manifest(&text, dir.path())));
        assert_eq!(d, vec!["global.seed required"]);
    }

    #[test]
    fn threshold_out_of_range() {
        let dir = setup();
        let text = format!(
            "{HEAD}[[stages]]\nname = \"dn\"\nkind = \"denoise\"\ninputs = [\"c\"]\nparams = {{ threshold = 1.5, scorer = \"cmd\", command = \"cat\" }}\n"
        );
        let d = messages(&validate_manifest(&manifest(&text, dir.path())));
        assert_eq!(d, vec!["stages.dn.params.threshold must lie in [-1, 1], got 1.5"]);
    }

    #[test]
    fn cycle_detected() {
        let dir = setup();
        let text = format!(
            "{HEAD}[[stages]]\nname = \"a\"\nkind = \"clean\"\ninputs = [\"b\"]\n[[stages]]\nname = \"b\"\nkind = \"clean\"\ninputs = [\"a\"]\n"
        );
        let d = messages(&validate_manifest(&manifest(&text, dir.path())));
        assert_eq!(d, vec!["stages inputs form a cycle through a, b"]);
    }

    #[test]
    fn structural_errors() {
        let dir = setup();
        let text = format!(
            "{HEAD}[[stages]]\nname = \"a\"\nkind = \"scrub\"\ninputs = [\"c\"]\n\
             [[stages]]\nname = \"b\"\nkind = \"clean\"\ninputs = [\"nope\"]\n\
             [[stages]]\nname = \"b\"\nkind = \"tag\"\ninputs = [\"m\"]\n\
             [[stages]]\nname = \"d\"\nkind = \"clean\"\ninputs = [\"c\"]\nparams = {{ max_tokens = 0, colour = 1 }}\n"
        );
        let d = messages(&validate_manifest(&manifest(&text, dir.path())));
        assert!(d.iter().any(|m| m.starts_with("stages.a.kind unknown stage kind")), "{d:?}");
        assert!(d.iter().any(|m| m == "stages.b duplicate stage name"), "{d:?}");
        assert!(d.iter().any(|m| m.contains("unknown input or stage \"nope\"")), "{d:?}");
        assert!(d.iter().any(|m| m.starts_with("stages.d.params unknown field")), "{d:?}");
    }

    #[test]
    fn type_mismatch_and_missing_file() {
        let dir = setup();
        let text = format!(
            "{HEAD}[inputs.gone]\nkind = \"mono\"\npath = \"gone.txt\"\nlang = \"es\"\n\
             [[stages]]\nname = \"t\"\nkind = \"tag\"\ninputs = [\"m\"]\n"
        );
        let d = messages(&validate_manifest(&manifest(&text, dir.path())));
        assert!(d.iter().any(|m| m.starts_with("inputs.gone.path file not found")), "{d:?}");
        assert!(
            d.iter().any(|m| m == "stages.t.inputs expects exactly one parallel corpus, got [monolingual corpus]"),
            "{d:?}"
        );
    }

    #[test]
    fn clean_fixture_is_fixpoint_and_rerun_identical() {
        let dir = setup();
        let text = format!("{HEAD}[[stages]]\nname = \"cl\"\nkind = \"clean\"\ninputs = [\"c\"]\n");
        let m = manifest(&text, dir.path());
        let r1 = run_manifest(&m).unwrap();
        let s = r1.stage("cl").unwrap();
        assert_eq!((s.input, s.output), (2, 2));
        assert!(s.removed.iter().all(|r| r.removed == 0));
        let r2 = run_manifest(&m).unwrap();
        assert_eq!(r1.stages[0].outputs, r2.stages[0].outputs);
        assert!(dir.path().join("out").join(REPORT_JSON).is_file());
        assert!(r1.chaining_violations().is_empty());
    }

    #[test]
    fn failure_names_stage_and_leaves_no_later_outputs() {
        let dir = setup();
        let text = format!(
            "{HEAD}[[stages]]\nname = \"cl\"\nkind = \"clean\"\ninputs = [\"c\"]\n\
             [[stages]]\nname = \"ft\"\nkind = \"ft\"\ninputs = [\"m\"]\nparams = {{ teacher_cmd = \"head -n 1\", tgt = \"arg\" }}\n"
        );
        let m = manifest(&text, dir.path());
        fs::create_dir_all(dir.path().join("out")).unwrap();
        fs::write(dir.path().join("out/ft.tsv"), "stale\tstale\n").unwrap();
        match run_manifest(&m) {
            Err(Error::Stage { stage, .. }) => assert_eq!(stage, "ft"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(dir.path().join("out/cl.tsv").is_file());
        assert!(!dir.path().join("out/ft.tsv").exists());
    }

    #[test]
    fn stage_seeds_differ_by_name() {
        assert_ne!(stage_seed(1, "a"), stage_seed(1, "b"));
        assert_ne!(stage_seed(1, "a"), stage_seed(2, "a"));
        assert_eq!(stage_seed(1, "a"), stage_seed(1, "a"));
    }
}
