//! `patsim` command-line driver.
//!
//! Exit codes: 0 success, 1 data error, 2 usage error. Data goes to
//! `--output` or standard output; diagnostics go to standard error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use patsim_core::corpus::{load_corpus, load_pairs, Corpus, CorpusStats, Ingest, PairLoad, PatentPair};
use patsim_core::eval::{adjudicate, evaluate, AdjudicatedScore, EvalSummary, Route, ScoreField, SpearmanMode};
use patsim_core::hybrid::{fixed6, write_reports_csv, write_reports_jsonl, Scorer, SimilarityReport};
use patsim_core::semantic::{
    embed_documents, mean_pool, CacheProvider, EmbeddingMatrix, EmbeddingProvider, RemoteProvider, StubProvider,
    VectorCache, MAX_REMOTE_BATCH,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "patsim",
    version,
    about = "Hybrid semantic + technological patent similarity"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score listed pairs (or every pair) and write SD, TD and SDTD.
    Score(ScoreArgs),
    /// Rank the patents most similar to one query patent.
    Topk(TopkArgs),
    /// Adjudicate ratings and correlate SD and SDTD against them.
    Eval(EvalArgs),
    /// Describe per-patent IPC key counts.
    Stats(StatsArgs),
    /// Precompute a binary vector cache for a corpus.
    EmbedCache(EmbedCacheArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderKind {
    Stub,
    Cache,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Jsonl,
    Json,
    Table,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Patent corpus, one JSON object per line.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Write data here instead of standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Treat any ingest or per-item error as fatal.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ProviderArgs {
    #[arg(long, value_enum, default_value = "stub")]
    pub provider: ProviderKind,
    /// Vector cache file, required with `--provider cache`.
    #[arg(long)]
    pub cache_path: Option<PathBuf>,
    /// Embedding service base URL, required with `--provider remote`.
    #[arg(long, env = "PATSIM_REMOTE_URL")]
    pub remote_url: Option<String>,
    /// Seed for the stub provider.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Remote request timeout in seconds.
    #[arg(long, default_value_t = 60)]
    pub timeout_secs: u64,
    /// Bound on parallel workers; output does not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub provider: ProviderArgs,
    /// Pair list CSV (`id_a,id_b[,...]`).
    #[arg(long, conflicts_with = "all_pairs")]
    pub pairs: Option<PathBuf>,
    /// Score every unordered pair of corpus documents.
    #[arg(long)]
    pub all_pairs: bool,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Args)]
pub struct TopkArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub provider: ProviderArgs,
    #[arg(long)]
    pub query: String,
    #[arg(long, short, default_value_t = 10)]
    pub k: usize,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub provider: ProviderArgs,
    /// Rated pairs CSV (`id_a,id_b,r1,r2,r3,expert`).
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long, default_value = "standard", value_parser = parse_spearman)]
    pub spearman: SpearmanMode,
    /// Drop pairs still waiting for a law-expert rating instead of failing.
    #[arg(long)]
    pub skip_pending: bool,
    #[arg(long, value_enum, default_value = "table")]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, default_value = "table")]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Args)]
pub struct EmbedCacheArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub provider: ProviderArgs,
    /// Store one pooled vector per patent instead of token vectors.
    #[arg(long)]
    pub pooled: bool,
}

fn parse_spearman(s: &str) -> Result<SpearmanMode, String> {
    s.parse()
}

/// Resolved, validated provider settings.
#[derive(Debug, Clone, PartialEq)]
pub enum ProviderConfig {
    Stub {
        seed: u64,
    },
    Cache {
        path: PathBuf,
    },
    Remote {
        url: String,
        timeout: Duration,
        pooled: Option<bool>,
    },
}

/// Everything a command needs, after cross-flag validation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus_path: PathBuf,
    pub pairs_path: Option<PathBuf>,
    pub provider: ProviderConfig,
    pub output_path: Option<PathBuf>,
    pub output_format: OutputFormat,
    pub strict: bool,
    pub spearman_mode: SpearmanMode,
    pub jobs: Option<usize>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) => EXIT_DATA,
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(format!("I/O error: {e}"))
    }
}

impl ProviderArgs {
    fn resolve(&self, pooled: Option<bool>) -> Result<ProviderConfig, Failure> {
        if self.jobs == Some(0) {
            return Err(Failure::Usage("--jobs must be at least 1".into()));
        }
        match self.provider {
            ProviderKind::Stub => Ok(ProviderConfig::Stub { seed: self.seed }),
            ProviderKind::Cache => match &self.cache_path {
                Some(path) => Ok(ProviderConfig::Cache { path: path.clone() }),
                None => Err(Failure::Usage("--provider cache requires --cache-path".into())),
            },
            ProviderKind::Remote => match &self.remote_url {
                Some(url) if !url.is_empty() => Ok(ProviderConfig::Remote {
                    url: url.clone(),
                    timeout: Duration::from_secs(self.timeout_secs.max(1)),
                    pooled,
                }),
                _ => Err(Failure::Usage(
                    "--provider remote requires --remote-url or PATSIM_REMOTE_URL".into(),
                )),
            },
        }
    }
}

fn run_config(
    common: &CommonArgs,
    provider: &ProviderArgs,
    pairs_path: Option<PathBuf>,
    format: OutputFormat,
    spearman_mode: SpearmanMode,
) -> Result<RunConfig, Failure> {
    Ok(RunConfig {
        corpus_path: common.corpus.clone(),
        pairs_path,
        provider: provider.resolve(None)?,
        output_path: common.output.clone(),
        output_format: format,
        strict: common.strict,
        spearman_mode,
        jobs: provider.jobs,
    })
}

fn open_provider(config: &ProviderConfig) -> Result<Box<dyn EmbeddingProvider>, Failure> {
    Ok(match config {
        ProviderConfig::Stub { seed } => Box::new(StubProvider::new(*seed)),
        ProviderConfig::Cache { path } => {
            Box::new(CacheProvider::open(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?)
        }
        ProviderConfig::Remote { url, timeout, pooled } => {
            Box::new(RemoteProvider::connect(url, *timeout, *pooled).map_err(|e| Failure::Data(e.to_string()))?)
        }
    })
}

fn open_input(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn read_corpus(path: &Path, strict: bool, err: &mut dyn Write) -> Result<Corpus, Failure> {
    let Ingest { corpus, rejected } =
        load_corpus(open_input(path)?, strict).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    for r in &rejected {
        writeln!(err, "warning: {}: {r}", path.display())?;
    }
    if corpus.is_empty() {
        return Err(Failure::Data(format!("{}: no valid documents", path.display())));
    }
    writeln!(err, "loaded {} documents from {}", corpus.len(), path.display())?;
    Ok(corpus)
}

/// Loads pairs, printing row errors. Returns whether any row was rejected.
fn read_pairs(path: &Path, corpus: &Corpus, err: &mut dyn Write) -> Result<(Vec<PatentPair>, bool), Failure> {
    let PairLoad { pairs, errors } = load_pairs(open_input(path)?, corpus);
    for e in &errors {
        writeln!(err, "error: {}: {e}", path.display())?;
    }
    Ok((pairs, !errors.is_empty()))
}

fn with_output(
    path: Option<&Path>,
    out: &mut dyn Write,
    f: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<(), Failure> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            f(out)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn write_reports(reports: &[SimilarityReport<f64>], format: OutputFormat, w: &mut dyn Write) -> io::Result<()> {
    match format {
        OutputFormat::Jsonl => write_reports_jsonl(reports, w),
        _ => write_reports_csv(reports, w),
    }
}

fn scorer<'a>(
    corpus: &'a Corpus,
    provider: &'a dyn EmbeddingProvider,
    jobs: Option<usize>,
) -> Result<Scorer<'a, f64>, Failure> {
    let s = Scorer::new(corpus, provider);
    match jobs {
        Some(j) => s.with_jobs(j).map_err(|e| Failure::Data(e.to_string())),
        None => Ok(s),
    }
}

pub fn cmd_score(args: &ScoreArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    report_outcome(score_inner(args, out, err), err)
}

fn score_inner(args: &ScoreArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    if args.pairs.is_none() && !args.all_pairs {
        return Err(Failure::Usage("score needs --pairs or --all-pairs".into()));
    }
    if !matches!(args.format, OutputFormat::Csv | OutputFormat::Jsonl) {
        return Err(Failure::Usage("score writes csv or jsonl".into()));
    }
    let config = run_config(
        &args.common,
        &args.provider,
        args.pairs.clone(),
        args.format,
        SpearmanMode::Standard,
    )?;
    let corpus = read_corpus(&config.corpus_path, config.strict, err)?;
    let provider = open_provider(&config.provider)?;
    let scorer = scorer(&corpus, provider.as_ref(), config.jobs)?;

    let (batch, mut failed) = match &config.pairs_path {
        Some(path) => {
            let (pairs, bad_rows) = read_pairs(path, &corpus, err)?;
            if bad_rows && config.strict {
                return Err(Failure::Data("pair file has invalid rows (strict mode)".into()));
            }
            let ids: Vec<(&str, &str)> = pairs.iter().map(PatentPair::ids).collect();
            (scorer.score_corpus(&ids), bad_rows)
        }
        None => (scorer.score_all_pairs(), false),
    };
    let (reports, errors) = batch.split();
    for (i, e) in &errors {
        writeln!(err, "error: pair #{}: {e}", i + 1)?;
    }
    failed |= !errors.is_empty();
    if failed && config.strict {
        return Err(Failure::Data(format!("{} pair(s) failed (strict mode)", errors.len())));
    }
    with_output(config.output_path.as_deref(), out, |w| {
        write_reports(&reports, config.output_format, w)
    })?;
    writeln!(err, "wrote {} reports", reports.len())?;
    Ok(if failed { EXIT_DATA } else { EXIT_OK })
}

pub fn cmd_topk(args: &TopkArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    report_outcome(topk_inner(args, out, err), err)
}

fn topk_inner(args: &TopkArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    if args.k == 0 {
        return Err(Failure::Usage("-k must be at least 1".into()));
    }
    if !matches!(args.format, OutputFormat::Csv | OutputFormat::Jsonl) {
        return Err(Failure::Usage("topk writes csv or jsonl".into()));
    }
    let config = run_config(&args.common, &args.provider, None, args.format, SpearmanMode::Standard)?;
    let corpus = read_corpus(&config.corpus_path, config.strict, err)?;
    let provider = open_provider(&config.provider)?;
    let reports = scorer(&corpus, provider.as_ref(), config.jobs)?
        .topk_neighbors(&args.query, args.k)
        .map_err(|e| Failure::Data(e.to_string()))?;
    with_output(config.output_path.as_deref(), out, |w| {
        write_reports(&reports, config.output_format, w)
    })?;
    Ok(EXIT_OK)
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    report_outcome(eval_inner(args, out, err), err)
}

fn eval_inner(args: &EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let config = run_config(
        &args.common,
        &args.provider,
        Some(args.pairs.clone()),
        args.format,
        args.spearman,
    )?;
    let corpus = read_corpus(&config.corpus_path, config.strict, err)?;
    let (pairs, bad_rows) = read_pairs(&args.pairs, &corpus, err)?;
    if bad_rows {
        return Err(Failure::Data("pair file has invalid rows".into()));
    }

    let mut rated: Vec<(&PatentPair, AdjudicatedScore<f64>)> = Vec::new();
    let mut pending = 0usize;
    for p in &pairs {
        let Some(rating) = &p.rating else {
            return Err(Failure::Data(format!("pair {},{} has no ratings", p.id_a, p.id_b)));
        };
        match adjudicate(rating, p.ids()) {
            Ok(a) => rated.push((p, a)),
            Err(e) => {
                pending += 1;
                writeln!(err, "{}: {e}", if args.skip_pending { "skipped" } else { "pending" })?;
            }
        }
    }
    if pending > 0 && !args.skip_pending {
        return Err(Failure::Data(format!(
            "{pending} pair(s) need a law-expert rating (use --skip-pending to drop them)"
        )));
    }
    let experts = rated.iter().filter(|(_, a)| a.route == Route::LawExpert).count();
    writeln!(
        err,
        "adjudicated {} pairs: {} panel_mean, {experts} law_expert, {pending} skipped",
        rated.len(),
        rated.len() - experts
    )?;

    let provider = open_provider(&config.provider)?;
    let ids: Vec<(&str, &str)> = rated.iter().map(|(p, _)| p.ids()).collect();
    let reports = scorer(&corpus, provider.as_ref(), config.jobs)?
        .score_corpus(&ids)
        .strict()
        .map_err(|(i, e)| Failure::Data(format!("pair #{}: {e}", i + 1)))?;
    let truths: Vec<AdjudicatedScore<f64>> = rated.iter().map(|(_, a)| *a).collect();

    let mut summaries = Vec::new();
    for field in [ScoreField::Sd, ScoreField::Sdtd] {
        summaries
            .push(evaluate(&reports, &truths, field, config.spearman_mode).map_err(|e| Failure::Data(e.to_string()))?);
    }
    with_output(config.output_path.as_deref(), out, |w| {
        write_summaries(&summaries, config.output_format, w)
    })?;
    Ok(EXIT_OK)
}

fn summary_json(s: &EvalSummary<f64>) -> String {
    format!(
        "{{\"n\":{},\"pearson\":{},\"spearman\":{},\"field\":\"{}\",\"truth_mean\":{},\"truth_sd\":{},\"score_mean\":{},\"score_sd\":{},\"spearman_mode\":\"{}\"}}",
        s.n,
        fixed6(s.pearson),
        fixed6(s.spearman),
        s.field,
        fixed6(s.truth_mean),
        fixed6(s.truth_sd),
        fixed6(s.score_mean),
        fixed6(s.score_sd),
        s.spearman_mode
    )
}

fn model_label(field: ScoreField) -> &'static str {
    match field {
        ScoreField::Sd => "semantic only",
        ScoreField::Td => "technological only",
        ScoreField::Sdtd => "hybrid",
    }
}

pub fn write_summaries(summaries: &[EvalSummary<f64>], format: OutputFormat, w: &mut dyn Write) -> io::Result<()> {
    match format {
        OutputFormat::Json => {
            let items: Vec<String> = summaries.iter().map(summary_json).collect();
            writeln!(w, "[{}]", items.join(","))
        }
        OutputFormat::Jsonl => summaries.iter().try_for_each(|s| writeln!(w, "{}", summary_json(s))),
        OutputFormat::Csv => {
            let mut c = csv::Writer::from_writer(w);
            c.write_record([
                "field",
                "n",
                "pearson",
                "spearman",
                "truth_mean",
                "truth_sd",
                "score_mean",
                "score_sd",
            ])?;
            for s in summaries {
                c.write_record([
                    s.field.to_string(),
                    s.n.to_string(),
                    fixed6(s.pearson),
                    fixed6(s.spearman),
                    fixed6(s.truth_mean),
                    fixed6(s.truth_sd),
                    fixed6(s.score_mean),
                    fixed6(s.score_sd),
                ])?;
            }
            c.flush()
        }
        OutputFormat::Table => {
            writeln!(
                w,
                "{:<16} {:<6} {:>5} {:>10} {:>10}",
                "model", "field", "n", "pearson", "spearman"
            )?;
            for s in summaries {
                writeln!(
                    w,
                    "{:<16} {:<6} {:>5} {:>10} {:>10}",
                    model_label(s.field),
                    s.field.to_string(),
                    s.n,
                    fixed6(s.pearson),
                    fixed6(s.spearman)
                )?;
            }
            if let Some(s) = summaries.first() {
                writeln!(
                    w,
                    "truth mean {} sd {} (spearman: {})",
                    fixed6(s.truth_mean),
                    fixed6(s.truth_sd),
                    s.spearman_mode
                )?;
            }
            Ok(())
        }
    }
}

pub fn cmd_stats(args: &StatsArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    report_outcome(stats_inner(args, out, err), err)
}

fn stats_inner(args: &StatsArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let corpus = read_corpus(&args.common.corpus, args.common.strict, err)?;
    let stats = patsim_core::corpus_stats(&corpus).map_err(|e| Failure::Data(e.to_string()))?;
    with_output(args.common.output.as_deref(), out, |w| {
        write_stats(&stats, args.format, w)
    })?;
    Ok(EXIT_OK)
}

pub fn write_stats(stats: &CorpusStats, format: OutputFormat, w: &mut dyn Write) -> io::Result<()> {
    match format {
        OutputFormat::Json | OutputFormat::Jsonl => {
            let hist: Vec<String> = stats.histogram.iter().map(|(k, v)| format!("\"{k}\":{v}")).collect();
            writeln!(
                w,
                "{{\"count\":{},\"mean\":{},\"sd\":{},\"histogram\":{{{}}}}}",
                stats.count,
                fixed6(stats.mean),
                fixed6(stats.sd),
                hist.join(",")
            )
        }
        OutputFormat::Csv => {
            writeln!(w, "ipc_keys,patents")?;
            stats.histogram.iter().try_for_each(|(k, v)| writeln!(w, "{k},{v}"))
        }
        OutputFormat::Table => {
            writeln!(w, "patents        {}", stats.count)?;
            writeln!(w, "mean ipc keys  {}", fixed6(stats.mean))?;
            writeln!(w, "sd ipc keys    {}", fixed6(stats.sd))?;
            writeln!(w, "keys  patents")?;
            let widest = stats.histogram.values().copied().max().unwrap_or(1).max(1);
            for (k, v) in &stats.histogram {
                let bar = "#".repeat((v * 40).div_ceil(widest));
                writeln!(w, "{k:>4}  {v:>7}  {bar}")?;
            }
            Ok(())
        }
    }
}

pub fn cmd_embed_cache(args: &EmbedCacheArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    report_outcome(embed_cache_inner(args, out, err), err)
}

fn embed_cache_inner(args: &EmbedCacheArgs, _out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let pooled = args.pooled.then_some(true);
    let source = match args.provider.provider {
        ProviderKind::Cache => return Err(Failure::Usage("embed-cache needs --provider remote or stub".into())),
        _ => args.provider.resolve(pooled)?,
    };
    let Some(target) = args.provider.cache_path.clone().or_else(|| args.common.output.clone()) else {
        return Err(Failure::Usage("embed-cache requires --cache-path (or --output)".into()));
    };
    let corpus = read_corpus(&args.common.corpus, args.common.strict, err)?;
    let provider = open_provider(&source)?;
    let model_id = provider.model_id().to_string();
    let mut cache =
        VectorCache::new(model_id.clone(), provider.dimension()).map_err(|e| Failure::Data(e.to_string()))?;

    let docs: Vec<_> = corpus.documents().iter().collect();
    let mut failed = 0usize;
    for chunk in docs.chunks(MAX_REMOTE_BATCH) {
        let matrices = match embed_documents(provider.as_ref(), chunk) {
            Ok(ms) => ms.into_iter().map(Ok).collect::<Vec<_>>(),
            Err(_) => chunk
                .iter()
                .map(|d| embed_documents(provider.as_ref(), &[d]).map(|mut v| v.remove(0)))
                .collect(),
        };
        for (doc, m) in chunk.iter().zip(matrices) {
            let m = match m {
                Ok(m) if args.pooled && m.rows() > 1 => {
                    let v = mean_pool(&m.cast::<f64>());
                    EmbeddingMatrix::new(
                        &doc.id,
                        model_id.as_str(),
                        1,
                        m.dim(),
                        v.v.iter().map(|&x| x as f32).collect(),
                    )
                    .map_err(|e| e.to_string())
                }
                Ok(m) => Ok(m),
                Err(e) => Err(e.to_string()),
            };
            match m {
                Ok(m) => cache.insert(m).map_err(|e| Failure::Data(e.to_string()))?,
                Err(e) => {
                    failed += 1;
                    writeln!(err, "error: {}: {e}", doc.id)?;
                }
            }
        }
    }
    if failed > 0 && args.common.strict {
        return Err(Failure::Data(format!(
            "{failed} document(s) failed to embed (strict mode)"
        )));
    }
    let file = File::create(&target).map_err(|e| Failure::Data(format!("{}: {e}", target.display())))?;
    cache
        .write(BufWriter::new(file))
        .map_err(|e| Failure::Data(e.to_string()))?;
    writeln!(
        err,
        "cached {} documents from {model_id} into {}",
        cache.len(),
        target.display()
    )?;
    Ok(if failed > 0 { EXIT_DATA } else { EXIT_OK })
}

fn report_outcome(result: Result<i32, Failure>, err: &mut dyn Write) -> i32 {
    match result {
        Ok(code) => code,
        Err(f) => {
            let (label, msg) = match &f {
                Failure::Usage(m) => ("usage error", m),
                Failure::Data(m) => ("error", m),
            };
            let _ = writeln!(err, "{label}: {msg}");
            f.code()
        }
    }
}

pub fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match &cli.command {
        Command::Score(a) => cmd_score(a, out, err),
        Command::Topk(a) => cmd_topk(a, out, err),
        Command::Eval(a) => cmd_eval(a, out, err),
        Command::Stats(a) => cmd_stats(a, out, err),
        Command::EmbedCache(a) => cmd_embed_cache(a, out, err),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => dispatch(&cli, out, err),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(rendered.as_bytes())
            } else {
                out.write_all(rendered.as_bytes())
            };
            code
        }
    }
}
