//! `lrmt`: corpus refinement, augmentation and scoring stages, one subcommand
//! each, plus manifest-driven runs.
//!
//! Exit status: 0 on success, 1 for invalid arguments or manifests, 2 when a
//! stage fails while running.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lrmt_core::align::{self, AlignPolicy, AlignTrainConfig};
use lrmt_core::augment::{self, Translator};
use lrmt_core::bpe;
use lrmt_core::clean::{clean_corpus, CleaningConfig};
use lrmt_core::corpus::{self, read_mono, read_parallel, write_parallel};
use lrmt_core::denoise::{self, DenoiseConfig, EmbeddingFileScorer, ExternalScorer, SimilarityScorer};
use lrmt_core::external::LineCommand;
use lrmt_core::metrics;
use lrmt_core::pipeline::{self, PipelineManifest};
use lrmt_core::sampling::{self, SamplingPlan, TagScheme};
use lrmt_core::{Corpus, Error, LangCode, MonoCorpus, ParallelFile, SentencePair, StageReport};

#[derive(Parser)]
#[command(name = "lrmt", version, about = "Bitext refinement, augmentation and evaluation stages")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize, deduplicate, and drop over-long or repetitive pairs
    Clean {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        out: OutputArgs,
        #[arg(long, default_value_t = 80)]
        max_tokens: usize,
        #[arg(long, default_value_t = 3)]
        max_repeats: usize,
        #[arg(long, default_value_t = 0.3)]
        min_distinct_ratio: f64,
    },
    /// Train a word-alignment model and write its translation table
    AlignTrain {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Model file to write
        #[arg(short, long)]
        output: PathBuf,
        /// Train target-to-source instead of source-to-target
        #[arg(long)]
        reverse: bool,
        #[command(flatten)]
        train: AlignTrainArgs,
    },
    /// Drop pairs with poor symmetric alignment scores
    AlignFilter {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        out: OutputArgs,
        /// Source-to-target model; trained on the input when omitted
        #[arg(long, requires = "rev")]
        fwd: Option<PathBuf>,
        /// Target-to-source model; trained on the input when omitted
        #[arg(long, requires = "fwd")]
        rev: Option<PathBuf>,
        /// Drop the lowest-scoring percentage of pairs
        #[arg(long, conflicts_with = "threshold")]
        percentile: Option<f64>,
        /// Drop pairs scoring below this mean log-probability
        #[arg(long, allow_negative_numbers = true)]
        threshold: Option<f64>,
        #[command(flatten)]
        train: AlignTrainArgs,
    },
    /// Train a subword model over parallel corpora or plain text
    BpeTrain {
        /// Parallel corpora (`src-tgt=PATH`); both sides are used
        #[arg(long = "corpus", value_name = "PAIR=PATH")]
        corpora: Vec<KeyedPath>,
        /// Plain text files, one sentence per line
        #[arg(long = "text", value_name = "PATH")]
        texts: Vec<PathBuf>,
        #[arg(long, default_value_t = bpe::DEFAULT_VOCAB_SIZE)]
        vocab_size: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Segment text into subword pieces
    BpeEncode(BpeIo),
    /// Join subword pieces back into text
    BpeDecode(BpeIo),
    /// Print per-language upsampling ratios
    Ratios {
        /// Pair counts, in language order
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// Language labels for the table
        #[arg(long, value_delimiter = ',')]
        langs: Vec<String>,
        #[arg(long, default_value_t = sampling::DEFAULT_TEMPERATURE)]
        temperature: f64,
    },
    /// Upsample several corpora with temperature-based ratios, keyed by target language
    Upsample {
        #[arg(long = "input", value_name = "PAIR=PATH", required = true)]
        inputs: Vec<KeyedPath>,
        #[command(flatten)]
        out: OutputArgs,
        #[arg(long, default_value_t = sampling::DEFAULT_TEMPERATURE)]
        temperature: f64,
        /// Key corpora by source language instead
        #[arg(long)]
        by_source: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Prefix every source sentence with the target-language tag
    Tag {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        out: OutputArgs,
        /// Tag token; `<tgt>` by default
        #[arg(long)]
        tag: Option<String>,
    },
    /// Concatenate corpora and shuffle them with a seed
    Mix {
        #[arg(long = "input", value_name = "PAIR=PATH", required = true)]
        inputs: Vec<KeyedPath>,
        #[command(flatten)]
        out: OutputArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Drop pairs whose cross-lingual similarity is below a threshold
    Denoise {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        out: OutputArgs,
        #[arg(long, default_value_t = denoise::DEFAULT_THRESHOLD, allow_negative_numbers = true)]
        threshold: f64,
        #[arg(long, value_enum)]
        scorer: ScorerKind,
        /// Scoring command: reads `source<TAB>target`, prints one score per line
        #[arg(long, required_if_eq("scorer", "cmd"))]
        command: Option<String>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Source-side embeddings, one vector per line
        #[arg(long, required_if_eq("scorer", "files"))]
        source_embeddings: Option<PathBuf>,
        #[arg(long, required_if_eq("scorer", "files"))]
        target_embeddings: Option<PathBuf>,
    },
    /// Forward-translate source monolingual text into synthetic pairs
    Ft(TranslateArgs),
    /// Back-translate target monolingual text into synthetic pairs
    Bt(TranslateArgs),
    /// Pair dev sources with several systems' outputs for transductive finetuning
    TelAssemble {
        /// Dev-set source sentences
        #[arg(long)]
        dev: PathBuf,
        /// Language pair, e.g. `es-arg`
        #[arg(long)]
        pair: LangPair,
        /// Files holding one system's translation of the dev set
        #[arg(long = "outputs", value_name = "PATH")]
        outputs: Vec<PathBuf>,
        /// Translation commands run over the dev set
        #[arg(long = "system", value_name = "CMD")]
        systems: Vec<String>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Score hypotheses against references with BLEU and chrF++
    Score {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long, value_enum, default_value_t = Metric::Both)]
        metric: Metric,
    },
    /// Execute a pipeline manifest
    Run { manifest: PathBuf },
    /// Check a pipeline manifest without running it
    Validate { manifest: PathBuf },
}

#[derive(Args)]
struct CorpusArgs {
    /// Language pair, e.g. `es-arg`
    #[arg(long)]
    pair: LangPair,
    /// TSV corpus, plain or extended
    #[arg(short, long, required_unless_present = "source_file", conflicts_with = "source_file")]
    input: Option<PathBuf>,
    /// Source side of a two-file corpus
    #[arg(long, requires = "target_file")]
    source_file: Option<PathBuf>,
    #[arg(long, requires = "source_file")]
    target_file: Option<PathBuf>,
}

impl CorpusArgs {
    fn load(&self) -> Result<Corpus> {
        let file = match (&self.input, &self.source_file, &self.target_file) {
            (Some(p), _, _) => ParallelFile::Tsv(p.clone()),
            (None, Some(s), Some(t)) => ParallelFile::TwoFile {
                source: s.clone(),
                target: t.clone(),
            },
            _ => unreachable!("clap enforces one layout"),
        };
        Ok(read_parallel(&file, self.pair.src.clone(), self.pair.tgt.clone())?)
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Output corpus; extended TSV keeps provenance and scores
    #[arg(short, long)]
    output: PathBuf,
    /// Write plain two-column TSV
    #[arg(long)]
    plain: bool,
}

impl OutputArgs {
    fn write(&self, corpus: &Corpus) -> Result<()> {
        let file = if self.plain {
            ParallelFile::Tsv(self.output.clone())
        } else {
            ParallelFile::ExtendedTsv(self.output.clone())
        };
        Ok(write_parallel(corpus, &file)?)
    }
}

#[derive(Args)]
struct AlignTrainArgs {
    #[arg(long, default_value_t = 5)]
    iterations: usize,
    #[arg(long, default_value_t = 0.08)]
    p0: f64,
    #[arg(long, default_value_t = 4.0)]
    tension: f64,
}

impl AlignTrainArgs {
    fn config(&self) -> AlignTrainConfig {
        AlignTrainConfig {
            iterations: self.iterations,
            p0: self.p0,
            tension: self.tension,
            ..AlignTrainConfig::default()
        }
    }
}

#[derive(Args)]
struct BpeIo {
    #[arg(short, long)]
    model: PathBuf,
    /// Input lines; stdin when omitted
    #[arg(short, long)]
    input: Option<PathBuf>,
    /// Output lines; stdout when omitted
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Treat input as TSV and process both columns
    #[arg(long)]
    tsv: bool,
}

#[derive(Args)]
struct TranslateArgs {
    /// Monolingual input, one sentence per line
    #[arg(short, long)]
    input: PathBuf,
    /// Direction of the resulting pairs, e.g. `es-arg`
    #[arg(long)]
    pair: LangPair,
    /// Translation command: lines on stdin, one translation per line on stdout
    #[arg(long)]
    teacher_cmd: String,
    /// Translate a seeded random sample of this many lines
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    batch_size: Option<usize>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScorerKind {
    Files,
    Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Metric {
    Bleu,
    #[value(name = "chrf++")]
    Chrf,
    Both,
}

#[derive(Clone, Debug)]
struct LangPair {
    src: LangCode,
    tgt: LangCode,
}

impl FromStr for LangPair {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s
            .split_once('-')
            .ok_or_else(|| format!("expected SRC-TGT, got {s:?}"))?;
        Ok(Self {
            src: LangCode::new(a).map_err(|e| e.to_string())?,
            tgt: LangCode::new(b).map_err(|e| e.to_string())?,
        })
    }
}

impl fmt::Display for LangPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.src, self.tgt)
    }
}

/// `src-tgt=PATH`
#[derive(Clone, Debug)]
struct KeyedPath {
    pair: LangPair,
    path: PathBuf,
}

impl FromStr for KeyedPath {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (pair, path) = s
            .split_once('=')
            .ok_or_else(|| format!("expected SRC-TGT=PATH, got {s:?}"))?;
        Ok(Self {
            pair: pair.parse()?,
            path: PathBuf::from(path),
        })
    }
}

impl KeyedPath {
    fn load(&self) -> Result<Corpus> {
        Ok(read_parallel(
            &ParallelFile::Tsv(self.path.clone()),
            self.pair.src.clone(),
            self.pair.tgt.clone(),
        )?)
    }
}

/// A problem with the request itself rather than with running it.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.is::<Usage>() {
        return 1;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::InvalidArgument(_) | Error::LangCode(_) | Error::Manifest(_) | Error::InvalidManifest(_)) => 1,
        _ => 2,
    }
}

fn print_report(report: &StageReport) {
    eprint!("{report}");
}

fn read_lines(input: Option<&Path>) -> Result<Vec<String>> {
    match input {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(text.lines().map(String::from).collect())
        }
        None => Ok(io::stdin().lock().lines().collect::<io::Result<_>>()?),
    }
}

fn write_lines(output: Option<&Path>, lines: &[String]) -> Result<()> {
    match output {
        Some(p) => Ok(corpus::write_atomic(p, |w| {
            for l in lines {
                writeln!(w, "{l}")?;
            }
            Ok(())
        })?),
        None => {
            let mut out = io::stdout().lock();
            for l in lines {
                writeln!(out, "{l}")?;
            }
            Ok(())
        }
    }
}

fn bpe_map(io: &BpeIo, f: impl Fn(&bpe::BpeModel, &str) -> String) -> Result<()> {
    let model = bpe::read_model(&io.model)?;
    let lines = read_lines(io.input.as_deref())?;
    let mapped: Vec<String> = if io.tsv {
        lines
            .iter()
            .enumerate()
            .map(|(i, l)| match l.split_once('\t') {
                Some((s, t)) => Ok(format!("{}\t{}", f(&model, s), f(&model, t))),
                None => Err(usage(format!("line {}: expected two tab-separated fields", i + 1))),
            })
            .collect::<Result<_>>()?
    } else {
        lines.iter().map(|l| f(&model, l)).collect()
    };
    write_lines(io.output.as_deref(), &mapped)
}

fn align_models(corpus: &Corpus, fwd: &Option<PathBuf>, rev: &Option<PathBuf>, cfg: &AlignTrainConfig) -> Result<(align::AlignmentModel, align::AlignmentModel)> {
    match (fwd, rev) {
        (Some(f), Some(r)) => Ok((align::read_model(f)?, align::read_model(r)?)),
        _ => Ok((
            align::train_alignment(corpus, cfg)?,
            align::train_alignment(&corpus.reversed(), cfg)?,
        )),
    }
}

fn keyed_corpora(inputs: &[KeyedPath], by_source: bool) -> Result<(Vec<LangCode>, BTreeMap<LangCode, Corpus>)> {
    let mut keys = Vec::new();
    let mut keyed = BTreeMap::new();
    for k in inputs {
        let key = if by_source { k.pair.src.clone() } else { k.pair.tgt.clone() };
        if keyed.insert(key.clone(), k.load()?).is_some() {
            return Err(usage(format!("language {key} given twice")));
        }
        keys.push(key);
    }
    Ok((keys, keyed))
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Clean {
            corpus,
            out,
            max_tokens,
            max_repeats,
            min_distinct_ratio,
        } => {
            let cfg = CleaningConfig {
                max_tokens,
                max_consecutive_repeats: max_repeats,
                min_distinct_ratio,
            };
            cfg.validate()?;
            let (c, report) = clean_corpus(&corpus.load()?, &cfg);
            out.write(&c)?;
            print_report(&report);
        }
        Command::AlignTrain {
            corpus,
            output,
            reverse,
            train,
        } => {
            let mut c = corpus.load()?;
            if reverse {
                c = c.reversed();
            }
            let (model, trace) = align::train_alignment_traced(&align::drop_empty(&c), &train.config())?;
            align::write_model(&model, &output)?;
            for (i, ll) in trace.log_likelihood.iter().enumerate() {
                eprintln!("iteration {i}\tlog_likelihood {ll:.4}");
            }
        }
        Command::AlignFilter {
            corpus,
            out,
            fwd,
            rev,
            percentile,
            threshold,
            train,
        } => {
            let policy = match threshold {
                Some(t) => AlignPolicy::Absolute(t),
                None => AlignPolicy::Percentile(percentile.unwrap_or(10.0)),
            };
            policy.validate()?;
            let c = corpus.load()?;
            let scorable = align::drop_empty(&c);
            let (f, r) = align_models(&scorable, &fwd, &rev, &train.config())?;
            let (kept, report) = align::filter_by_alignment(&scorable, &f, &r, policy)?;
            out.write(&kept)?;
            if scorable.len() < c.len() {
                eprintln!("removed.empty\t{}", c.len() - scorable.len());
            }
            print_report(&report);
        }
        Command::BpeTrain {
            corpora,
            texts,
            vocab_size,
            output,
        } => {
            if corpora.is_empty() && texts.is_empty() {
                return Err(usage("give at least one --corpus or --text"));
            }
            let mut lines = Vec::new();
            for k in &corpora {
                for p in k.load()?.items {
                    lines.push(p.source);
                    lines.push(p.target);
                }
            }
            for t in &texts {
                lines.extend(read_lines(Some(t))?);
            }
            let model = bpe::train_bpe(lines.iter().map(String::as_str), vocab_size)?;
            bpe::write_model(&model, &output)?;
            eprintln!("merges\t{}\nvocab\t{}", model.merges().len(), model.vocab_len());
        }
        Command::BpeEncode(io) => bpe_map(&io, |m, s| m.encode(s).join(" "))?,
        Command::BpeDecode(io) => bpe_map(&io, |m, s| m.decode(&s.split_whitespace().collect::<Vec<_>>()))?,
        Command::Ratios {
            sizes,
            langs,
            temperature,
        } => {
            if !langs.is_empty() && langs.len() != sizes.len() {
                return Err(usage(format!("{} languages for {} sizes", langs.len(), sizes.len())));
            }
            let ratios = sampling::compute_ratios(&sizes, temperature)?;
            let total: usize = sizes.iter().sum();
            println!("lang\tsize\tp\tratio\texpected");
            for (i, (n, r)) in sizes.iter().zip(&ratios).enumerate() {
                let label = langs.get(i).cloned().unwrap_or_else(|| format!("#{}", i + 1));
                let p = *n as f64 / total as f64;
                println!("{label}\t{n}\t{p:.6}\t{r:.4}\t{:.1}", r * *n as f64);
            }
        }
        Command::Upsample {
            inputs,
            out,
            temperature,
            by_source,
            seed,
        } => {
            let (keys, keyed) = keyed_corpora(&inputs, by_source)?;
            let plan = SamplingPlan::for_corpora(&keyed, temperature, seed)?;
            let mut sampled = sampling::upsample(&keyed, &plan)?;
            let mut items: Vec<SentencePair> = Vec::new();
            for key in &keys {
                let c = sampled.remove(key).expect("one output per language");
                eprintln!(
                    "{key}\t{} -> {}\tratio {:.4}",
                    keyed[key].len(),
                    c.len(),
                    plan.ratio(key).expect("planned")
                );
                items.extend(c.items);
            }
            out.write(&keyed[&keys[0]].with_items(items))?;
        }
        Command::Tag { corpus, out, tag } => {
            let c = corpus.load()?;
            let mut scheme = TagScheme::for_languages([&c.tgt]);
            if let Some(t) = tag {
                scheme.insert(c.tgt.clone(), t)?;
            }
            out.write(&sampling::tag_language(&c, &scheme, &c.tgt)?)?;
        }
        Command::Mix { inputs, out, seed } => {
            let corpora: Vec<Corpus> = inputs.iter().map(KeyedPath::load).collect::<Result<_>>()?;
            out.write(&sampling::mix_shuffle(&corpora, seed)?)?;
        }
        Command::Denoise {
            corpus,
            out,
            threshold,
            scorer,
            command,
            batch_size,
            source_embeddings,
            target_embeddings,
        } => {
            let cfg = DenoiseConfig { threshold };
            cfg.validate()?;
            let scorer: Box<dyn SimilarityScorer> = match scorer {
                ScorerKind::Cmd => Box::new(ExternalScorer {
                    command: LineCommand::parse(command.as_deref().expect("required by clap"))?,
                    batch_size,
                }),
                ScorerKind::Files => Box::new(EmbeddingFileScorer {
                    source: source_embeddings.expect("required by clap"),
                    target: target_embeddings.expect("required by clap"),
                }),
            };
            let scored = denoise::score_corpus(&corpus.load()?, scorer.as_ref())?;
            let (kept, report) = denoise::filter_by_similarity(&scored, &cfg)?;
            out.write(&kept)?;
            print_report(&report);
        }
        Command::Ft(a) => {
            let mono = sampled_mono(&a, &a.pair.src)?;
            let t = translator(&a, a.pair.src.clone(), a.pair.tgt.clone())?;
            let c = augment::forward_translate(&mono, &t)?;
            a.out.write(&c)?;
            eprintln!("pairs\t{}", c.len());
        }
        Command::Bt(a) => {
            let mono = sampled_mono(&a, &a.pair.tgt)?;
            let t = translator(&a, a.pair.tgt.clone(), a.pair.src.clone())?;
            let c = augment::back_translate(&mono, &t)?;
            a.out.write(&c)?;
            eprintln!("pairs\t{}", c.len());
        }
        Command::TelAssemble {
            dev,
            pair,
            outputs,
            systems,
            batch_size,
            out,
        } => {
            if outputs.is_empty() && systems.is_empty() {
                return Err(usage("give at least one --outputs file or --system command"));
            }
            let dev = read_mono(&dev, pair.src.clone())?;
            let mut hyps: Vec<MonoCorpus> = outputs
                .iter()
                .map(|p| read_mono(p, pair.tgt.clone()))
                .collect::<lrmt_core::Result<_>>()?;
            for cmd in &systems {
                let t = Translator {
                    command: LineCommand::parse(cmd)?,
                    src: pair.src.clone(),
                    tgt: pair.tgt.clone(),
                    batch_size,
                };
                hyps.push(MonoCorpus::new(pair.tgt.clone(), t.translate(&dev.lines)?));
            }
            let set = augment::assemble_transductive_set(&dev, &hyps, &pair.tgt)?;
            out.write(&set)?;
            eprintln!("{} systems x {} dev lines, {} distinct pairs", hyps.len(), dev.len(), set.len());
        }
        Command::Score {
            hyp,
            reference,
            metric,
        } => {
            let hyps = read_lines(Some(&hyp))?;
            let refs = read_lines(Some(&reference))?;
            match metric {
                Metric::Bleu => println!("{}", metrics::bleu_corpus(&hyps, &refs)?),
                Metric::Chrf => println!("chrF++ = {:.4}", metrics::chrf_corpus(&hyps, &refs)?),
                Metric::Both => println!("{}", metrics::evaluate(&hyps, &refs)?),
            }
        }
        Command::Run { manifest } => {
            let m = load_manifest(&manifest)?;
            let report = pipeline::run_manifest(&m)?;
            print!("{}", report.to_text());
        }
        Command::Validate { manifest } => {
            let m = load_manifest(&manifest)?;
            let diags = pipeline::validate_manifest(&m);
            if !diags.is_empty() {
                return Err(Error::InvalidManifest(diags.iter().map(ToString::to_string).collect()).into());
            }
            println!("{}: ok, {} stages", manifest.display(), m.stages.len());
        }
    }
    Ok(())
}

/// An unreadable or malformed manifest is a validation failure.
fn load_manifest(path: &Path) -> Result<PipelineManifest> {
    PipelineManifest::load(path).map_err(|e| usage(e.to_string()))
}

fn sampled_mono(a: &TranslateArgs, lang: &LangCode) -> Result<MonoCorpus> {
    let mono = read_mono(&a.input, lang.clone())?;
    match a.sample {
        Some(k) => Ok(augment::sample_monolingual(&mono, k, a.seed)?),
        None => Ok(mono),
    }
}

fn translator(a: &TranslateArgs, src: LangCode, tgt: LangCode) -> Result<Translator> {
    Ok(Translator {
        command: LineCommand::parse(&a.teacher_cmd)?,
        src,
        tgt,
        batch_size: a.batch_size,
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
