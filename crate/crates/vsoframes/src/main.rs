use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use vsoframes::cli::RunConfig;
use vsoframes::corpus::{
    encode_corpus, read_conllu, read_labels, read_tuple_tsv_raw, write_tuple_tsv, ArgPosition,
    Corpus, RawDoc, Vocabulary,
};
use vsoframes::diagnostics::{correlate_trace, read_trace, TraceField, TraceWriter};
use vsoframes::error::{Error, Result};
use vsoframes::evalx::{
    best_matches, discretize_model, write_lexicon, write_match_report, DiscretizeSource,
    ReferenceLexicon,
};
use vsoframes::fit::{FitEngine, FitOptions, ResamplePolicy};
use vsoframes::hyper::HyperSchedule;
use vsoframes::model::{
    generate_synthetic, Checkpoint, EstimateKind, LabelMask, ModelConfig, ModelVariant, NonePolicy,
    PlantedSpec, SynthOptions,
};

#[derive(Parser)]
#[command(
    name = "vsoframes",
    about = "Frame induction from verb-subject-object tuples via collapsed Gibbs sampling",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract tuples from parsed text into the canonical TSV plus a vocabulary
    Extract(ExtractArgs),
    /// Fit a model; writes a checkpoint, a trace CSV and a provenance config
    Fit(FitArgs),
    /// Continue a fit from a checkpoint for extra iterations
    Resume(ResumeArgs),
    /// Print the frame/class report of a checkpoint
    Report(ReportArgs),
    /// Match the discretized model against a reference lexicon
    Eval(EvalArgs),
    /// Generate a synthetic corpus with ground truth
    Simulate(SimulateArgs),
    /// Summarize a trace CSV (correlations, curves, hyperparameter paths)
    Diagnose(DiagnoseArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputFormat {
    Conllu,
    Tsv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    Placeholder,
    Skip,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SourceArg {
    Classes,
    FrameArg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PositionArg {
    Verb,
    Subj,
    Obj,
}

impl PositionArg {
    fn to_position(self) -> ArgPosition {
        match self {
            PositionArg::Verb => ArgPosition::Verb,
            PositionArg::Subj => ArgPosition::Subject,
            PositionArg::Obj => ArgPosition::Object,
        }
    }
}

#[derive(Args)]
struct ExtractArgs {
    /// CoNLL-U-style file or tuple TSV
    input: PathBuf,
    /// Input format; inferred from the extension when omitted
    #[arg(long)]
    format: Option<InputFormat>,
    #[arg(long, default_value_t = 10_000)]
    vocab_cutoff: usize,
    /// Output tuple TSV
    #[arg(long)]
    out: PathBuf,
    /// Output vocabulary file (default: <out>.vocab.tsv)
    #[arg(long)]
    vocab_out: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    /// Model variant: 0 independent, 1 document-tuple, 2 cross-cutting classes
    #[arg(long, default_value_t = 1)]
    model: u8,
    #[arg(long, default_value_t = 20)]
    frames: usize,
    #[arg(long, default_value_t = 20)]
    classes: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma1: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma2: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma3: f64,
    /// NONE handling override (models 0/1 default to placeholder, 2 to skip)
    #[arg(long)]
    none_policy: Option<PolicyArg>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ModelArgs {
    fn to_config(&self) -> Result<ModelConfig> {
        let mut cfg = ModelConfig::new(ModelVariant::from_code(self.model)?, self.frames);
        cfg.classes = self.classes;
        cfg.alpha = self.alpha;
        cfg.beta = self.beta;
        cfg.gamma = [self.gamma1, self.gamma2, self.gamma3];
        cfg.none_policy = self.none_policy.map(|p| match p {
            PolicyArg::Placeholder => NonePolicy::Placeholder,
            PolicyArg::Skip => NonePolicy::Skip,
        });
        cfg.seed = self.seed;
        Ok(cfg)
    }
}

#[derive(Args)]
struct ScheduleArgs {
    /// Fix every concentration parameter (no resampling)
    #[arg(long)]
    fix_hypers: bool,
    #[arg(long)]
    fix_alpha: bool,
    #[arg(long)]
    fix_beta: bool,
    #[arg(long)]
    fix_gamma: bool,
    /// Sweeps before the first hyperparameter update
    #[arg(long, default_value_t = 100)]
    hyper_burnin: u64,
    /// Sweeps between hyperparameter updates
    #[arg(long, default_value_t = 100)]
    hyper_interval: u64,
    /// Slice updates per parameter per event
    #[arg(long, default_value_t = 10)]
    slice_iters: u32,
    /// Evaluate the exact log joint every N iterations (0 = never)
    #[arg(long, default_value_t = 10)]
    log_joint_every: u64,
}

impl ScheduleArgs {
    fn schedule(&self) -> HyperSchedule {
        HyperSchedule {
            burnin: self.hyper_burnin,
            interval: self.hyper_interval,
            slice_iters: self.slice_iters,
            ..Default::default()
        }
    }

    fn resample(&self) -> ResamplePolicy {
        if self.fix_hypers {
            ResamplePolicy::fixed()
        } else {
            ResamplePolicy {
                alpha: !self.fix_alpha,
                beta: !self.fix_beta,
                gamma: !self.fix_gamma,
            }
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Tuple TSV corpus
    #[arg(long)]
    input: PathBuf,
    /// Vocabulary file; built from the corpus when omitted
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    vocab_cutoff: usize,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    schedule: ScheduleArgs,
    #[arg(long, default_value_t = 1000)]
    iters: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Per-document label vectors (doc_id<TAB>0,1,...)
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Label-to-frame permission matrix (J lines of F comma-separated bits)
    #[arg(long)]
    label_mask: Option<PathBuf>,
    /// Output checkpoint path
    #[arg(long)]
    checkpoint: PathBuf,
    /// Output trace CSV (default: <checkpoint>.trace.csv)
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct ResumeArgs {
    /// Checkpoint to continue from
    checkpoint: PathBuf,
    /// The corpus the checkpoint was fit on
    #[arg(long)]
    input: PathBuf,
    /// The vocabulary the checkpoint was fit with
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    iters: u64,
    /// Must match the checkpoint's worker count when given
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// Per-document label vectors, for checkpoints fit with a mask
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Output checkpoint (default: overwrite the input checkpoint)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// Words (and classes) listed per distribution
    #[arg(long, default_value_t = 10)]
    top: usize,
    /// Per-document label vectors, for checkpoints fit with a mask
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Write to a file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// Reference lexicon file
    #[arg(long)]
    lexicon: PathBuf,
    /// Minimum assignment count for a word to enter a model wordset
    #[arg(long, default_value_t = 5)]
    threshold: u32,
    /// Display filter on best-match Dice
    #[arg(long, default_value_t = 0.15)]
    min_dice: f64,
    /// Reference wordsets smaller than this are dropped
    #[arg(long, default_value_t = 5)]
    min_verbs: usize,
    /// Wordset source (default: classes for model 2, frame-arg otherwise)
    #[arg(long)]
    source: Option<SourceArg>,
    /// Restrict counted tokens to one argument position
    #[arg(long)]
    position: Option<PositionArg>,
    /// Per-document label vectors, for checkpoints fit with a mask
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Output report file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 100)]
    docs: usize,
    #[arg(long, default_value_t = 20)]
    tuples_per_doc: usize,
    /// Planted mode: disjoint word blocks of this size per slot/class
    #[arg(long)]
    planted_words: Option<usize>,
    /// Vocabulary size when sampling distributions from priors
    #[arg(long, default_value_t = 50)]
    vocab_words: usize,
    /// Tuple-shape split "vso,vs,vo"
    #[arg(long, default_value = "0.19,0.43,0.38")]
    missingness: String,
    /// Output tuple TSV
    #[arg(long)]
    out: PathBuf,
    /// Output vocabulary (default: <out>.vocab.tsv)
    #[arg(long)]
    vocab_out: Option<PathBuf>,
    /// Planted lexicon output (default: <out>.lexicon.tsv)
    #[arg(long)]
    lexicon_out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Trace CSV produced by fit
    trace: PathBuf,
    /// Iterations treated as burn-in for the pseudolikelihood correlation
    #[arg(long, default_value_t = 100)]
    burnin: u64,
    /// Machine-readable summary output (default: stdout only)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Plot-ready CSV of the iteration curves
    #[arg(long)]
    curves_out: Option<PathBuf>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Extract(args) => cmd_extract(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Resume(args) => cmd_resume(args),
        Command::Report(args) => cmd_report(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Diagnose(args) => cmd_diagnose(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

fn load_raw_docs(path: &Path, format: Option<InputFormat>) -> Result<Vec<RawDoc>> {
    let format = match format {
        Some(f) => f,
        None => match path.extension().and_then(|e| e.to_str()) {
            Some("conllu") | Some("conll") => InputFormat::Conllu,
            Some("tsv") => InputFormat::Tsv,
            _ => {
                return Err(Error::Config(
                    "cannot infer input format from the extension; pass --format".into(),
                ))
            }
        },
    };
    match format {
        InputFormat::Conllu => Ok(read_conllu(path)?.iter().map(|doc| doc.extract()).collect()),
        InputFormat::Tsv => read_tuple_tsv_raw(path),
    }
}

fn cmd_extract(args: ExtractArgs) -> Result<()> {
    let docs = load_raw_docs(&args.input, args.format)?;
    let vocab = Vocabulary::from_raw_docs(&docs, args.vocab_cutoff);
    let corpus = encode_corpus(&docs, &vocab);
    write_tuple_tsv(&corpus, &vocab, &args.out)?;
    let vocab_out = args
        .vocab_out
        .unwrap_or_else(|| suffixed(&args.out, ".vocab.tsv"));
    vocab.write_file(&vocab_out)?;

    let (vso, vs, vo) = corpus.shape_counts();
    let total = corpus.len();
    println!(
        "docs={} tuples={} vocab={}",
        corpus.doc_count(),
        total,
        vocab.real_len()
    );
    if total > 0 {
        let pct = |n: usize| 100.0 * n as f64 / total as f64;
        println!("vso={:.1}% vs={:.1}% vo={:.1}%", pct(vso), pct(vs), pct(vo));
    }
    Ok(())
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn load_corpus_and_vocab(
    input: &Path,
    vocab_path: Option<&Path>,
    cutoff: usize,
) -> Result<(Corpus, Vocabulary)> {
    let docs = read_tuple_tsv_raw(input)?;
    let vocab = match vocab_path {
        Some(p) => Vocabulary::read_file(p)?,
        None => Vocabulary::from_raw_docs(&docs, cutoff),
    };
    Ok((encode_corpus(&docs, &vocab), vocab))
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let (mut corpus, vocab) =
        load_corpus_and_vocab(&args.input, args.vocab.as_deref(), args.vocab_cutoff)?;
    let mut config = args.model.to_config()?;
    match (&args.labels, &args.label_mask) {
        (Some(labels), Some(mask)) => {
            let rows = read_labels(labels, &corpus.doc_names)?;
            corpus.attach_labels(rows)?;
            config.mask = Some(LabelMask::from_path(mask)?);
        }
        (None, None) => {}
        _ => {
            return Err(Error::Config(
                "--labels and --label-mask must be given together".into(),
            ))
        }
    }

    let trace_path = args
        .trace
        .clone()
        .unwrap_or_else(|| suffixed(&args.checkpoint, ".trace.csv"));
    let opts = FitOptions {
        iters: args.iters,
        schedule: args.schedule.schedule(),
        resample: args.schedule.resample(),
        log_joint_every: args.schedule.log_joint_every,
        workers: args.workers,
    };

    let mut engine = FitEngine::new(&corpus, vocab.real_len(), config.clone(), args.workers)?;
    let mut writer = TraceWriter::create(&trace_path, args.workers > 1)?;
    engine.run(&opts, Some(&mut writer))?;
    engine.to_checkpoint(&vocab).write(&args.checkpoint)?;

    // Persist the vocabulary next to the checkpoint so the run can always be
    // resumed, plus the flat provenance config.
    let vocab_saved = suffixed(&args.checkpoint, ".vocab.tsv");
    vocab.write_file(&vocab_saved)?;
    let run_config = RunConfig {
        model: config,
        schedule: opts.schedule,
        resample: opts.resample,
        iters: args.iters,
        workers: args.workers,
        log_joint_every: opts.log_joint_every,
        vocab_cutoff: args.vocab_cutoff,
        input: args.input.display().to_string(),
        vocab: vocab_saved.display().to_string(),
        labels: args
            .labels
            .map(|p| p.display().to_string())
            .unwrap_or_default(),
        label_mask: args
            .label_mask
            .map(|p| p.display().to_string())
            .unwrap_or_default(),
        checkpoint: args.checkpoint.display().to_string(),
        trace: trace_path.display().to_string(),
    };
    run_config.write(&suffixed(&args.checkpoint, ".config"))?;

    println!(
        "fit complete: iterations={} log_joint={:.4} alpha={:.6} beta={:.6}",
        engine.iteration,
        engine.log_joint(),
        engine.hypers.alpha,
        engine.hypers.beta
    );
    Ok(())
}

/// Load corpus + vocab + checkpoint, re-attaching labels when the checkpoint
/// was fit under a mask, and verify the content hashes.
fn restore(
    checkpoint: &Path,
    input: &Path,
    vocab_path: &Path,
    labels: Option<&Path>,
) -> Result<(Corpus, Vocabulary, Checkpoint)> {
    let vocab = Vocabulary::read_file(vocab_path)?;
    let docs = read_tuple_tsv_raw(input)?;
    let mut corpus = encode_corpus(&docs, &vocab);
    let ckpt = Checkpoint::read(checkpoint)?;
    if ckpt.config.mask.is_some() {
        let labels_path = labels.ok_or_else(|| {
            Error::Mismatch("checkpoint was fit with labels; pass --labels".into())
        })?;
        let rows = read_labels(labels_path, &corpus.doc_names)?;
        corpus.attach_labels(rows)?;
    }
    ckpt.verify_inputs(&corpus, &vocab)?;
    Ok((corpus, vocab, ckpt))
}

fn cmd_resume(args: ResumeArgs) -> Result<()> {
    let (corpus, vocab, ckpt) = restore(
        &args.checkpoint,
        &args.input,
        &args.vocab,
        args.labels.as_deref(),
    )?;
    let mut engine = FitEngine::from_checkpoint(&corpus, &vocab, ckpt, args.workers)?;

    let opts = FitOptions {
        iters: args.iters,
        schedule: args.schedule.schedule(),
        resample: args.schedule.resample(),
        log_joint_every: args.schedule.log_joint_every,
        workers: engine.workers(),
    };
    let mut writer = args
        .trace
        .as_deref()
        .map(|p| TraceWriter::create(p, engine.workers() > 1))
        .transpose()?;
    engine.run(&opts, writer.as_mut())?;

    let out = args.out.unwrap_or(args.checkpoint);
    engine.to_checkpoint(&vocab).write(&out)?;
    println!(
        "resume complete: iterations={} log_joint={:.4}",
        engine.iteration,
        engine.log_joint()
    );
    Ok(())
}

fn top_of(row: &[f64], n: usize) -> (Vec<(usize, f64)>, f64) {
    let mut indexed: Vec<(usize, f64)> = row.iter().copied().enumerate().collect();
    indexed.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    indexed.truncate(n);
    let mass = indexed.iter().map(|(_, p)| p).sum();
    (indexed, mass)
}

fn token_label(vocab: &Vocabulary, wid: usize) -> String {
    use vsoframes::corpus::WordId;
    match WordId(wid as u32) {
        WordId::NONE => "NONE".to_string(),
        other => vocab.token(other).to_string(),
    }
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let (corpus, vocab, ckpt) = restore(
        &args.checkpoint,
        &args.input,
        &args.vocab,
        args.labels.as_deref(),
    )?;
    let config = ckpt.config.clone();
    let engine = FitEngine::from_checkpoint(&corpus, &vocab, ckpt, None)?;
    let estimates = engine.point_estimates();
    let mut out = String::new();
    use std::fmt::Write as _;

    writeln!(
        out,
        "model={} frames={} iteration={} alpha={:.6} beta={:.6}",
        config.variant.code(),
        config.frames,
        engine.iteration,
        engine.hypers.alpha,
        engine.hypers.beta
    )
    .unwrap();
    match &estimates.kind {
        EstimateKind::FrameArg { phi } => {
            for f in 0..config.frames {
                writeln!(out, "\nframe {f}").unwrap();
                for a in ArgPosition::ALL {
                    let row = &phi[f * 3 + a.index()];
                    let (top, mass) = top_of(row, args.top);
                    let words: Vec<String> = top
                        .iter()
                        .map(|(w, p)| format!("{} {:.3}", token_label(&vocab, *w), p))
                        .collect();
                    writeln!(
                        out,
                        "  {}: {} ({:.3} mass)",
                        a.label(),
                        words.join(", "),
                        mass
                    )
                    .unwrap();
                }
            }
        }
        EstimateKind::Classes { phi, linker } => {
            for f in 0..config.frames {
                writeln!(out, "\nframe {f}").unwrap();
                for a in ArgPosition::ALL {
                    let row = &linker[f * 3 + a.index()];
                    let (top, _) = top_of(row, 3.min(args.top.max(1)));
                    let classes: Vec<String> = top
                        .iter()
                        .map(|(c, p)| format!("class {c} (p={p:.3})"))
                        .collect();
                    writeln!(out, "  {}: {}", a.label(), classes.join(", ")).unwrap();
                }
            }
            writeln!(out).unwrap();
            for (c, row) in phi.iter().enumerate() {
                let (top, mass) = top_of(row, args.top);
                let words: Vec<String> = top.iter().map(|(w, _)| token_label(&vocab, *w)).collect();
                writeln!(out, "class {c}: {} ({:.3} mass)", words.join(" "), mass).unwrap();
            }
        }
    }
    match args.out {
        Some(path) => std::fs::write(&path, out).map_err(|e| Error::io(&path, e))?,
        None => print!("{out}"),
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let (corpus, vocab, ckpt) = restore(
        &args.checkpoint,
        &args.input,
        &args.vocab,
        args.labels.as_deref(),
    )?;
    let config = ckpt.config.clone();
    let state = ckpt.state.clone();
    let source = match args.source {
        Some(SourceArg::Classes) => DiscretizeSource::Classes,
        Some(SourceArg::FrameArg) => DiscretizeSource::FrameArg,
        None => match config.variant {
            ModelVariant::DocTupleClass => DiscretizeSource::Classes,
            _ => DiscretizeSource::FrameArg,
        },
    };
    let reference = ReferenceLexicon::load(&args.lexicon, args.min_verbs)?;
    let model_sets = discretize_model(
        &corpus,
        &state,
        &vocab,
        source,
        args.position.map(|p| p.to_position()),
        args.threshold,
    );
    let report = best_matches(&reference, &model_sets, &vocab)?;
    write_match_report(&report, &args.out)?;

    println!(
        "source={source:?} model_sets={} reference_sets={}",
        model_sets.len(),
        reference.sets.len()
    );
    for row in report.rows.iter().filter(|r| r.dice >= args.min_dice) {
        println!(
            "{}\t{}\tdice={:.3}\tB={} M={} X={} O={} N={}",
            row.ref_name,
            row.model_name,
            row.dice,
            row.venn.both,
            row.venn.missed,
            row.venn.oov,
            row.venn.other,
            row.venn.new
        );
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let config = args.model.to_config()?;
    let missingness: Vec<f64> = args
        .missingness
        .split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad missingness component {p:?}")))
        })
        .collect::<Result<_>>()?;
    if missingness.len() != 3 {
        return Err(Error::Config("missingness needs three components".into()));
    }
    let opts = SynthOptions {
        docs: args.docs,
        tuples_per_doc: args.tuples_per_doc,
        missingness: [missingness[0], missingness[1], missingness[2]],
        planted: args
            .planted_words
            .map(|w| PlantedSpec { words_per_slot: w }),
        vocab_words: args.vocab_words,
        seed: args.model.seed,
    };
    let synth = generate_synthetic(&config, &opts)?;
    write_tuple_tsv(&synth.corpus, &synth.vocab, &args.out)?;
    synth.vocab.write_file(
        &args
            .vocab_out
            .unwrap_or_else(|| suffixed(&args.out, ".vocab.tsv")),
    )?;
    if !synth.lexicon.is_empty() {
        write_lexicon(
            &synth.lexicon,
            &args
                .lexicon_out
                .unwrap_or_else(|| suffixed(&args.out, ".lexicon.tsv")),
        )?;
    }
    let (vso, vs, vo) = synth.corpus.shape_counts();
    println!(
        "docs={} tuples={} vocab={} shapes={vso}/{vs}/{vo}",
        synth.corpus.doc_count(),
        synth.corpus.len(),
        synth.vocab.real_len()
    );
    Ok(())
}

fn cmd_diagnose(args: DiagnoseArgs) -> Result<()> {
    let trace = read_trace(&args.trace)?;
    if trace.is_empty() {
        return Err(Error::Config("trace holds no records".into()));
    }
    let fmt_corr = |r: Option<f64>| r.map_or("undefined".to_string(), |v| format!("{v:.4}"));

    let lj_changes = correlate_trace(&trace, TraceField::LogJoint, TraceField::Changes);
    let post: Vec<_> = trace
        .iter()
        .filter(|r| r.iteration > args.burnin)
        .cloned()
        .collect();
    let pseudo_lj = correlate_trace(&post, TraceField::PseudoLl, TraceField::LogJoint);

    let first = trace.first().unwrap();
    let last = trace.last().unwrap();
    let min_changes = trace.iter().map(|r| r.changes).min().unwrap();
    let mut summary = String::new();
    use std::fmt::Write as _;
    writeln!(summary, "iterations = {}", trace.len()).unwrap();
    writeln!(summary, "corr_log_joint_changes = {}", fmt_corr(lj_changes)).unwrap();
    writeln!(
        summary,
        "corr_pseudo_log_joint_post_burnin = {}",
        fmt_corr(pseudo_lj)
    )
    .unwrap();
    writeln!(summary, "changes_first = {}", first.changes).unwrap();
    writeln!(summary, "changes_last = {}", last.changes).unwrap();
    writeln!(summary, "changes_min = {min_changes}").unwrap();
    writeln!(summary, "alpha_first = {}", first.alpha).unwrap();
    writeln!(summary, "alpha_last = {}", last.alpha).unwrap();
    writeln!(summary, "beta_first = {}", first.beta).unwrap();
    writeln!(summary, "beta_last = {}", last.beta).unwrap();
    for (i, g) in ["gamma1", "gamma2", "gamma3"].iter().enumerate() {
        writeln!(summary, "{g}_first = {}", first.gamma[i]).unwrap();
        writeln!(summary, "{g}_last = {}", last.gamma[i]).unwrap();
    }
    if let Some(lj) = trace.iter().rev().find_map(|r| r.log_joint) {
        writeln!(summary, "log_joint_last = {lj}").unwrap();
    }
    print!("{summary}");
    if let Some(path) = args.out {
        std::fs::write(&path, &summary).map_err(|e| Error::io(&path, e))?;
    }
    if let Some(path) = args.curves_out {
        let mut csv = String::from("iter,changes,log_joint,pseudo_ll,alpha,beta\n");
        for r in &trace {
            let lj = r.log_joint.map_or(String::new(), |v| v.to_string());
            writeln!(
                csv,
                "{},{},{},{},{},{}",
                r.iteration, r.changes, lj, r.pseudo_ll, r.alpha, r.beta
            )
            .unwrap();
        }
        std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
