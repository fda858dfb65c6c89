//! `tempered` command line.
//!
//! Accepts the script-style invocation
//! `tempered -y 1984 -s "[['A4'],[0.5]]" -mxx 8 -mxl 16 -sql 16`
//! (flags before any subcommand mean `generate`) alongside the
//! `generate | range | train | preprocess | serve | inspect` subcommands.

mod seed;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::climate::{self, ClimateTable, FIRST_YEAR, LAST_YEAR};
use crate::corpus::{prepare_corpus, windowize, CorpusOptions, Event, Vocabulary};
use crate::engine::{self, EngineError, LoadedData, LoadedModel};
use crate::export::{self, DEFAULT_TEMPO_BPM};
use crate::generation::{GenerationError, GenerationQuery, DEFAULT_MXL, DEFAULT_MXX, DEFAULT_SQL, DEFAULT_YEAR};
use crate::training::{self, Checkpoint, OptimizerKind, TrainConfig, TrainError};

pub use seed::{format_seed, parse_seed, SeedError};

pub const DATA_DIR_ENV: &str = "TEMPERED_DATA_DIR";
pub const DEFAULT_SEED_LITERAL: &str = "[['A4'],[1.0]]";

/// Process exit status by error category.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    Usage = 2,
    Data = 3,
    Model = 4,
    Io = 5,
}

#[derive(Debug)]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

impl CliError {
    fn new(code: ExitCode, message: impl std::fmt::Display) -> Self {
        Self { code, message: message.to_string() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        let code = match &e {
            EngineError::MissingSnapshot(_) | EngineError::Climate(_) | EngineError::Corpus(_) => ExitCode::Data,
            EngineError::MissingCheckpoint(_) | EngineError::Checkpoint(_) => ExitCode::Model,
        };
        Self::new(code, e)
    }
}

impl From<GenerationError> for CliError {
    fn from(e: GenerationError) -> Self {
        let code = match &e {
            GenerationError::UnknownYear { .. }
            | GenerationError::InvalidQuery(_)
            | GenerationError::OutOfVocabulary { .. } => ExitCode::Usage,
            GenerationError::SqlMismatch { .. } | GenerationError::Neural(_) => ExitCode::Model,
            GenerationError::Corpus(_) => ExitCode::Data,
        };
        Self::new(code, e)
    }
}

impl From<export::ExportError> for CliError {
    fn from(e: export::ExportError) -> Self {
        let code = match &e {
            export::ExportError::Io { .. } => ExitCode::Io,
            _ => ExitCode::Data,
        };
        Self::new(code, e)
    }
}

#[derive(Debug, Parser)]
#[command(name = "tempered", version, about = "Sonify Tokyo air temperatures through a temperature-sampled melody model")]
pub struct Cli {
    /// Directory holding temperatures.json, vocab.json, model.ckpt and the raw inputs
    #[arg(long, global = true, env = DATA_DIR_ENV, default_value = "data")]
    pub data_dir: PathBuf,
    /// Log progress (repeat for more detail)
    #[arg(short = 'v', long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate one melody for a year
    Generate(GenerateArgs),
    /// Generate one melody per year over a range and concatenate them
    Range(RangeArgs),
    /// Train a checkpoint on the MusicXML corpus
    Train(TrainArgs),
    /// Compute temperatures.json and vocab.json from the raw data
    Preprocess(PreprocessArgs),
    /// Serve the HTTP API (and optionally the explorer's static files)
    Serve(ServeArgs),
    /// Print a checkpoint's tensors, vocabulary sizes and training summary
    Inspect(InspectArgs),
}

fn parse_year(s: &str) -> Result<i32, String> {
    let y: i32 = s.trim().parse().map_err(|_| format!("{s:?} is not a year"))?;
    if !(FIRST_YEAR..=LAST_YEAR).contains(&y) {
        return Err(format!("year must lie in {FIRST_YEAR}-{LAST_YEAR}"));
    }
    Ok(y)
}

/// A parsed seed literal as one clap value.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedArg(pub Vec<Event>);

fn parse_seed_arg(s: &str) -> Result<SeedArg, String> {
    parse_seed(s).map(SeedArg).map_err(|e| e.to_string())
}

fn parse_positive(s: &str) -> Result<usize, String> {
    match s.trim().parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("{s:?} is not a positive integer")),
    }
}

fn parse_unit(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if (0.0..=1.0).contains(&v) => Ok(v),
        _ => Err(format!("{s:?} must be a number in [0, 1]")),
    }
}

/// Query flags shared by `generate` and `range`.
#[derive(Debug, Args, Clone)]
pub struct QueryArgs {
    /// Seed literal: pitch list and quarter-length list, e.g. [['A4'],[0.5]]; [[],[]] for none
    #[arg(short = 's', long, value_parser = parse_seed_arg, default_value = DEFAULT_SEED_LITERAL)]
    pub seed: SeedArg,
    /// Maximum number of new events (-mxx)
    #[arg(long = "max-extra-notes", alias = "mxx", value_parser = parse_positive, default_value_t = DEFAULT_MXX)]
    pub mxx: usize,
    /// Maximum total length including the seed (-mxl)
    #[arg(long = "max-length", alias = "mxl", value_parser = parse_positive, default_value_t = DEFAULT_MXL)]
    pub mxl: usize,
    /// Model window length (-sql); must match the checkpoint
    #[arg(long = "sequence-length", alias = "sql", value_parser = parse_positive, default_value_t = DEFAULT_SQL)]
    pub sql: usize,
    /// Seed of the sampling generator (ChaCha20)
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
    /// Override the year's pitch temperature
    #[arg(long, value_parser = parse_unit)]
    pub pitch_temperature: Option<f64>,
    /// Override the year's duration temperature
    #[arg(long, value_parser = parse_unit)]
    pub duration_temperature: Option<f64>,
    /// Checkpoint file [default: <data-dir>/model.ckpt]
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Output directory for the exported files
    #[arg(short = 'o', long, default_value = "out")]
    pub out_dir: PathBuf,
    /// MIDI tempo in quarter notes per minute
    #[arg(long, default_value_t = DEFAULT_TEMPO_BPM)]
    pub tempo: f64,
}

impl QueryArgs {
    pub fn query(&self, year: i32) -> GenerationQuery {
        GenerationQuery {
            year,
            seed: self.seed.0.clone(),
            mxx: self.mxx,
            mxl: self.mxl,
            sql: self.sql,
            rng_seed: self.rng_seed,
            pitch_temperature: self.pitch_temperature,
            duration_temperature: self.duration_temperature,
        }
    }
}

#[derive(Debug, Args, Clone)]
pub struct GenerateArgs {
    /// Year to sonify
    #[arg(short = 'y', long, value_parser = parse_year, default_value_t = DEFAULT_YEAR)]
    pub year: i32,
    #[command(flatten)]
    pub query: QueryArgs,
}

#[derive(Debug, Args, Clone)]
pub struct RangeArgs {
    /// First year (or use --from-year)
    #[arg(value_parser = parse_year, conflicts_with = "from_year")]
    pub from: Option<i32>,
    /// Last year (or use --to-year)
    #[arg(value_parser = parse_year, conflicts_with = "to_year")]
    pub to: Option<i32>,
    #[arg(long, value_parser = parse_year)]
    pub from_year: Option<i32>,
    #[arg(long, value_parser = parse_year)]
    pub to_year: Option<i32>,
    /// Events per year; sets both max extra notes and max length
    #[arg(long, value_parser = parse_positive)]
    pub per_year_length: Option<usize>,
    #[command(flatten)]
    pub query: QueryArgs,
}

impl RangeArgs {
    pub fn years(&self) -> Result<(i32, i32), CliError> {
        let from = self.from.or(self.from_year);
        let to = self.to.or(self.to_year);
        match (from, to) {
            (Some(a), Some(b)) if a <= b => Ok((a, b)),
            (Some(a), Some(b)) => Err(CliError::new(ExitCode::Usage, format!("range start {a} is after its end {b}; swap them"))),
            _ => Err(CliError::new(ExitCode::Usage, "range needs two years, e.g. `tempered range 1876 1886`")),
        }
    }

    pub fn template(&self, year: i32) -> GenerationQuery {
        let mut q = self.query.query(year);
        if let Some(n) = self.per_year_length {
            q.mxx = n;
            q.mxl = n;
        }
        q
    }
}

#[derive(Debug, Args, Clone)]
pub struct TrainArgs {
    /// Directory of .musicxml files [default: <data-dir>/corpus]
    #[arg(long)]
    pub corpus_dir: Option<PathBuf>,
    #[arg(long, alias = "sequence-length", value_parser = parse_positive, default_value_t = DEFAULT_SQL)]
    pub sql: usize,
    #[arg(long, value_parser = parse_positive, default_value_t = 256)]
    pub hidden: usize,
    #[arg(long, value_parser = parse_positive, default_value_t = 64)]
    pub pitch_embed: usize,
    #[arg(long, value_parser = parse_positive, default_value_t = 16)]
    pub duration_embed: usize,
    /// Maximum epochs
    #[arg(long, value_parser = parse_positive, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, value_parser = parse_positive, default_value_t = 10)]
    pub patience: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub min_delta: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    /// adam or momentum
    #[arg(long, default_value = "adam")]
    pub optimizer: OptimizerKind,
    #[arg(long, value_parser = parse_positive, default_value_t = 1)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.1)]
    pub validation_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Add transpositions to all twelve keys
    #[arg(long)]
    pub augment: bool,
    /// Checkpoint path [default: <data-dir>/model.ckpt]; history.json goes next to it
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl TrainArgs {
    pub fn config(&self) -> TrainConfig {
        TrainConfig {
            hidden: self.hidden,
            pitch_embed: self.pitch_embed,
            duration_embed: self.duration_embed,
            sql: self.sql,
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
            max_epochs: self.epochs,
            patience: self.patience,
            min_delta: self.min_delta,
            validation_fraction: self.validation_fraction,
            batch_size: self.batch_size,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args, Clone)]
pub struct PreprocessArgs {
    /// Monthly mean maximum temperature CSV [default: <data-dir>/tokyo_tmax_monthly.csv]
    #[arg(long)]
    pub climate_csv: Option<PathBuf>,
    /// Directory of .musicxml files [default: <data-dir>/corpus]
    #[arg(long)]
    pub corpus_dir: Option<PathBuf>,
    /// Build the vocabulary over transpositions to all twelve keys
    #[arg(long)]
    pub augment: bool,
    /// Where to write temperatures.json and vocab.json [default: <data-dir>]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Checkpoint file [default: <data-dir>/model.ckpt]
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Directory of static explorer files served at /
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct InspectArgs {
    /// Checkpoint file [default: <data-dir>/model.ckpt]
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

/// Rewrites single-dash long flags (`-mxx 8`, `-sql=16`) to their long forms
/// and inserts `generate` when the first argument is a query flag.
pub fn normalize_args<I, T>(args: I) -> Vec<OsString>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let mut out: Vec<OsString> = Vec::new();
    for (i, arg) in args.into_iter().enumerate() {
        let arg: OsString = arg.into();
        let text = arg.to_string_lossy();
        let mapped = ["mxx", "mxl", "sql"].iter().find_map(|name| {
            let flag = format!("-{name}");
            if text == flag {
                Some(OsString::from(format!("-{flag}")))
            } else {
                text.strip_prefix(&format!("{flag}=")).map(|v| OsString::from(format!("-{flag}={v}")))
            }
        });
        out.push(if i == 0 { arg } else { mapped.unwrap_or(arg) });
    }
    let global_with_value = ["--data-dir"];
    let mut i = 1;
    while i < out.len() {
        let s = out[i].to_string_lossy().into_owned();
        if global_with_value.contains(&s.as_str()) {
            i += 2;
        } else if s.starts_with("--data-dir=") || s == "-v" || s == "--verbose" || s.starts_with("-vv") {
            i += 1;
        } else {
            break;
        }
    }
    if let Some(first) = out.get(i).map(|s| s.to_string_lossy().into_owned()) {
        let meta = ["-h", "--help", "-V", "--version"];
        if first.starts_with('-') && !meta.contains(&first.as_str()) {
            out.insert(i, OsString::from("generate"));
        }
    }
    out
}

/// Parse a full argv (program name first).
pub fn parse_args<I, T>(args: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    Cli::try_parse_from(normalize_args(args))
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let cli = match parse_args(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::Usage as i32 } else { ExitCode::Ok as i32 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(&cli) {
        Ok(()) => ExitCode::Ok as i32,
        Err(e) => {
            eprintln!("error: {e}");
            e.code as i32
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let data_dir = &cli.data_dir;
    match &cli.command {
        Command::Generate(args) => generate(data_dir, args),
        Command::Range(args) => range(data_dir, args),
        Command::Train(args) => train(data_dir, args),
        Command::Preprocess(args) => preprocess(data_dir, args),
        Command::Serve(args) => serve(data_dir, args),
        Command::Inspect(args) => inspect(data_dir, args),
    }
}

fn load(data_dir: &Path, checkpoint: &Option<PathBuf>) -> Result<(LoadedData, LoadedModel), CliError> {
    let data = LoadedData::load(data_dir)?;
    let path = checkpoint.clone().unwrap_or_else(|| engine::default_checkpoint(data_dir));
    let model = LoadedModel::load(&path, Some(&data_dir.join(engine::VOCAB_FILE)))?;
    Ok((data, model))
}

fn generate(data_dir: &Path, args: &GenerateArgs) -> Result<(), CliError> {
    let (data, model) = load(data_dir, &args.query.checkpoint)?;
    let result = engine::run_query(&args.query.query(args.year), &model, &data)?;
    let paths = export::write_bundle(
        &result,
        model.vocab(),
        &model.provenance(&data),
        args.query.tempo,
        &args.query.out_dir,
    )?;
    println!(
        "year {}: T_pitch = {:.6}, T_dur = {:.6}, {} events",
        args.year,
        result.temperatures.pitch,
        result.temperatures.duration,
        result.melody.len()
    );
    for p in paths.all() {
        println!("{}", p.display());
    }
    Ok(())
}

fn range(data_dir: &Path, args: &RangeArgs) -> Result<(), CliError> {
    let (from, to) = args.years()?;
    let (data, model) = load(data_dir, &args.query.checkpoint)?;
    let result = engine::run_range(from, to, &args.template(from), &model, &data)?;
    let (bundles, combined) = export::write_range(
        &result,
        model.vocab(),
        &model.provenance(&data),
        args.query.tempo,
        &args.query.out_dir,
    )?;
    for (r, b) in result.results.iter().zip(&bundles) {
        println!(
            "year {}: T_pitch = {:.6}, T_dur = {:.6}, {} events, {}",
            r.query.year,
            r.temperatures.pitch,
            r.temperatures.duration,
            r.melody.len(),
            b.manifest.display()
        );
    }
    for p in &combined {
        println!("{}", p.display());
    }
    Ok(())
}

fn corpus_dir(data_dir: &Path, given: &Option<PathBuf>) -> PathBuf {
    given.clone().unwrap_or_else(|| data_dir.join(engine::CORPUS_DIR))
}

fn train(data_dir: &Path, args: &TrainArgs) -> Result<(), CliError> {
    let data_err = |e: crate::corpus::CorpusError| CliError::new(ExitCode::Data, e);
    let corpus = prepare_corpus(
        &corpus_dir(data_dir, &args.corpus_dir),
        CorpusOptions { augment: args.augment, ..Default::default() },
    )
    .map_err(data_err)?;
    let vocab = Vocabulary::build(&corpus).map_err(data_err)?;
    let vocab_path = data_dir.join(engine::VOCAB_FILE);
    if vocab_path.exists() {
        if let Ok(existing) = Vocabulary::load(&vocab_path) {
            if existing.content_hash() != vocab.content_hash() {
                log::warn!("{} differs from the training vocabulary; rerun `preprocess`", vocab_path.display());
            }
        }
    }
    let windows = windowize(&corpus, &vocab, args.sql).map_err(data_err)?;
    let config = args.config();
    log::info!("training on {} windows from {} melodies", windows.len(), corpus.len());
    let outcome = training::train(&windows, &vocab, &config).map_err(|e| match e {
        TrainError::InvalidConfig(_) => CliError::new(ExitCode::Usage, e),
        TrainError::TooFewWindows(_) => CliError::new(ExitCode::Data, e),
        _ => CliError::new(ExitCode::Model, e),
    })?;
    let out = args.out.clone().unwrap_or_else(|| engine::default_checkpoint(data_dir));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::new(ExitCode::Io, format!("{}: {e}", parent.display())))?;
    }
    let history_path = out.with_file_name(engine::HISTORY_FILE);
    let checkpoint = Checkpoint { params: outcome.params, config, vocab, history: outcome.history };
    checkpoint.save(&out).map_err(|e| CliError::new(ExitCode::Io, e))?;
    std::fs::write(&history_path, checkpoint.history.to_json())
        .map_err(|e| CliError::new(ExitCode::Io, format!("{}: {e}", history_path.display())))?;
    let h = &checkpoint.history;
    println!(
        "stopped after epoch {} ({:?}); best epoch {} with validation loss {:.6}",
        h.stopped_epoch, h.stop_reason, h.best_epoch, h.best_validation_loss
    );
    println!("{}", out.display());
    println!("{}", history_path.display());
    Ok(())
}

fn preprocess(data_dir: &Path, args: &PreprocessArgs) -> Result<(), CliError> {
    let out_dir = args.out_dir.clone().unwrap_or_else(|| data_dir.to_path_buf());
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::new(ExitCode::Io, format!("{}: {e}", out_dir.display())))?;
    let csv = args.climate_csv.clone().unwrap_or_else(|| data_dir.join(engine::CLIMATE_FILE));
    let table = ClimateTable::load(&csv).map_err(|e| CliError::new(ExitCode::Data, e))?;
    let vectors = climate::build_temperature_vectors(&table).map_err(|e| CliError::new(ExitCode::Data, e))?;
    let corpus = prepare_corpus(
        &corpus_dir(data_dir, &args.corpus_dir),
        CorpusOptions { augment: args.augment, ..Default::default() },
    )
    .map_err(|e| CliError::new(ExitCode::Data, e))?;
    let vocab = Vocabulary::build(&corpus).map_err(|e| CliError::new(ExitCode::Data, e))?;

    let temps_path = out_dir.join(engine::TEMPERATURES_FILE);
    let vocab_path = out_dir.join(engine::VOCAB_FILE);
    vectors.save(&temps_path).map_err(|e| CliError::new(ExitCode::Io, e))?;
    vocab.save(&vocab_path).map_err(|e| CliError::new(ExitCode::Io, e))?;
    println!(
        "{} years ({}-{}), climate sha256 {}",
        vectors.years.len(),
        vectors.first_year().unwrap_or_default(),
        vectors.last_year().unwrap_or_default(),
        table.provenance.sha256
    );
    println!("{} melodies, {} pitch and {} duration tokens", corpus.len(), vocab.pitch_len(), vocab.duration_len());
    println!("{}", temps_path.display());
    println!("{}", vocab_path.display());
    Ok(())
}

fn serve(data_dir: &Path, args: &ServeArgs) -> Result<(), CliError> {
    let checkpoint = args.checkpoint.clone().unwrap_or_else(|| engine::default_checkpoint(data_dir));
    let state = crate::service::AppState::load(data_dir, &checkpoint);
    let addr = format!("{}:{}", args.host, args.port);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::new(ExitCode::Io, e))?;
    runtime
        .block_on(crate::service::serve(state, args.static_dir.clone(), &addr))
        .map_err(|e| CliError::new(ExitCode::Io, format!("{addr}: {e}")))
}

fn inspect(data_dir: &Path, args: &InspectArgs) -> Result<(), CliError> {
    let path = args.checkpoint.clone().unwrap_or_else(|| engine::default_checkpoint(data_dir));
    let model = LoadedModel::load(&path, None)?;
    let c = &model.checkpoint;
    println!("checkpoint {}", path.display());
    println!("sha256 {}", model.checkpoint_hash);
    println!("vocab sha256 {}", c.vocab_hash());
    println!("pitch vocab {} / duration vocab {} (PAD included)", c.vocab.pitch_len(), c.vocab.duration_len());
    println!("hidden {} / sql {} / parameters {}", c.params.dims.hidden, c.config.sql, c.params.parameter_count());
    for t in c.tensor_info() {
        println!("  {:<24} {} x {}", t.name, t.shape[0], t.shape[1]);
    }
    let h = &c.history;
    println!(
        "epochs {} (stopped {:?}), best epoch {}, best validation loss {:.6}",
        h.stopped_epoch, h.stop_reason, h.best_epoch, h.best_validation_loss
    );
    Ok(())
}
