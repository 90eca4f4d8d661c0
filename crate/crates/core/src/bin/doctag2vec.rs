//! Command-line front end: train, update, add-tags, predict, infer and
//! evaluate DocTag2Vec ensembles stored in a single model file.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use doctag2vec::corpus::{read_records, tokenize, Record, DEFAULT_MIN_COUNT};
use doctag2vec::eval::evaluate;
use doctag2vec::inference::infer_document;
use doctag2vec::predictor::{DEFAULT_K_PRIME, DEFAULT_LEARNERS, DEFAULT_SUBSAMPLE};
use doctag2vec::{CombineMode, Dataset, Ensemble, Error, Hyperparameters, LossReport, TrainConfig};

#[derive(Parser, Debug)]
#[command(name = "doctag2vec", version, about = "Train and apply DocTag2Vec tag embeddings", args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a bagged ensemble from a JSONL dataset.
    Train(TrainArgs),
    /// Continue training an existing model on new documents, chunk by chunk.
    Update(UpdateArgs),
    /// Register new tags with an existing model.
    AddTags(AddTagsArgs),
    /// Predict tags for every line of a JSONL file.
    Predict(PredictArgs),
    /// Emit inferred document vectors, one list per learner.
    Infer(InferArgs),
    /// Score predictions against the gold tags of a JSONL file.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug, Serialize)]
struct SeedArg {
    /// Random seed; falls back to DT2V_SEED, then 42.
    #[arg(long, env = "DT2V_SEED", default_value_t = 42)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct TrainArgs {
    /// Training data, one {"id","text","tags"} record per line.
    #[arg(long)]
    input: PathBuf,
    /// Where to write the model.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 100)]
    dim: usize,
    #[arg(long, default_value_t = 8)]
    window: usize,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    /// Weight of the tag term in the objective.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Negative tags drawn per positive tag.
    #[arg(long, default_value_t = 1)]
    negatives: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_COUNT)]
    min_count: u64,
    #[arg(long, default_value_t = DEFAULT_LEARNERS)]
    learners: usize,
    /// Fraction of documents each learner trains on.
    #[arg(long, default_value_t = DEFAULT_SUBSAMPLE)]
    subsample: f64,
    /// Tags each learner contributes to the vote.
    #[arg(long, default_value_t = DEFAULT_K_PRIME)]
    kprime: usize,
    #[command(flatten)]
    seed: SeedArg,
    /// Worker threads per learner; more than one trades reproducibility for speed.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// How context word vectors are combined with the document vector.
    #[arg(long, value_enum, default_value_t = CombineMode::Mean)]
    combine: CombineMode,
}

#[derive(Args, Debug, Serialize)]
struct UpdateArgs {
    /// New documents; every tag must already be known to the model.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Documents per incremental chunk.
    #[arg(long, default_value_t = 100)]
    chunk: usize,
    /// Add words from the new documents that occur at least this often.
    /// Without it, unknown words are ignored.
    #[arg(long)]
    grow_vocab: Option<u64>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Destination of the updated model; defaults to overwriting --model.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct AddTagsArgs {
    #[arg(long)]
    model: PathBuf,
    /// Tags to add.
    #[arg(required = true)]
    tags: Vec<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Documents to tag; only "id" and "text" are read.
    #[arg(long)]
    input: PathBuf,
    /// Tags returned per document.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Overrides the k' stored in the model.
    #[arg(long)]
    kprime: Option<usize>,
    /// Output file; defaults to standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct InferArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Labelled test documents.
    #[arg(long, visible_alias = "test")]
    input: PathBuf,
    /// Largest k for precision@k; also the cutoff for overall recall.
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long)]
    kprime: Option<usize>,
    /// Metrics file; defaults to standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Failure of a subcommand, split by exit status.
enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(msg) => Failure::Usage(msg),
            other => Failure::Data(other),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(Error::Io(e))
    }
}

type CliResult = Result<(), Failure>;

fn log_config(command: &str, config: &impl Serialize) {
    eprintln!("{}", json!({ "command": command, "config": config }));
}

fn log_report(learner: usize, report: &LossReport) {
    eprintln!("{}", json!({ "learner": learner, "report": report }));
}

fn open_output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run_train(args: &TrainArgs) -> CliResult {
    let hyper = Hyperparameters {
        dim: args.dim,
        window: args.window,
        alpha: args.alpha,
        negatives: args.negatives,
        epochs: args.epochs,
        min_count: args.min_count,
        seed: args.seed.seed,
        combine: args.combine,
        ..Hyperparameters::default()
    };
    log_config("train", &json!({ "args": args, "hyperparameters": hyper }));
    hyper.validate()?;
    let dataset = Dataset::from_records(&read_records(&args.input)?, hyper.min_count)?;
    let config = TrainConfig { workers: args.workers, ..TrainConfig::default() };
    let ensemble = Ensemble::train(&dataset, &hyper, args.learners, args.subsample, args.kprime, &config, log_report)?;
    ensemble.save(&args.model)?;
    Ok(())
}

fn run_update(args: &UpdateArgs) -> CliResult {
    if args.chunk == 0 {
        return Err(Failure::Usage("--chunk must be at least 1".into()));
    }
    let mut ensemble = Ensemble::load(&args.model)?;
    log_config("update", &json!({ "args": args, "hyperparameters": ensemble.learners[0].hyper }));
    let records = read_records(&args.input)?;
    let tokens: Vec<Vec<String>> = records.iter().map(|r| tokenize(&r.text)).collect();
    if let Some(min) = args.grow_vocab {
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        for t in tokens.iter().flatten() {
            *counts.entry(t).or_insert(0) += 1;
        }
        let fresh: Vec<(String, u64)> =
            counts.into_iter().filter(|&(_, c)| c >= min.max(1)).map(|(w, c)| (w.to_owned(), c)).collect();
        let added = ensemble.add_words(&fresh)?;
        eprintln!("{}", json!({ "words_added": added }));
    }
    let model = &ensemble.learners[0];
    let docs = records
        .iter()
        .zip(&tokens)
        .enumerate()
        .map(|(i, (r, t))| model.encode_strict(i, t, &r.tags))
        .collect::<doctag2vec::Result<Vec<_>>>()?;
    let config = TrainConfig { workers: args.workers, ..TrainConfig::default() };
    for (c, chunk) in docs.chunks(args.chunk).enumerate() {
        for (j, report) in ensemble.train_incremental(chunk, &config)?.iter().enumerate() {
            eprintln!("{}", json!({ "chunk": c, "learner": j, "report": report }));
        }
    }
    ensemble.save(args.output.as_ref().unwrap_or(&args.model))?;
    Ok(())
}

fn run_add_tags(args: &AddTagsArgs) -> CliResult {
    log_config("add-tags", args);
    let mut ensemble = Ensemble::load(&args.model)?;
    ensemble.add_tags(&args.tags)?;
    ensemble.save(args.output.as_ref().unwrap_or(&args.model))?;
    Ok(())
}

fn load_with_k_prime(model: &Path, k_prime: Option<usize>) -> Result<Ensemble, Failure> {
    let mut ensemble = Ensemble::load(model)?;
    if let Some(kp) = k_prime {
        if kp == 0 {
            return Err(Failure::Usage("--kprime must be at least 1".into()));
        }
        ensemble.k_prime = kp;
    }
    Ok(ensemble)
}

/// Applies `f` to every input line, writing exactly one JSON line per input
/// line. Lines that do not parse or fail in `f` produce an "error" field.
fn map_lines(
    input: &Path,
    output: Option<&Path>,
    f: impl Fn(&Record) -> doctag2vec::Result<serde_json::Value>,
) -> CliResult {
    let reader = BufReader::new(File::open(input)?);
    let mut out = open_output(output)?;
    for line in reader.lines() {
        let line = line?;
        let value = match serde_json::from_str::<Record>(&line) {
            Ok(record) => match f(&record) {
                Ok(v) => v,
                Err(e) => json!({ "id": record.id, "error": e.to_string() }),
            },
            Err(e) => json!({ "id": null, "error": format!("malformed record: {e}") }),
        };
        writeln!(out, "{value}")?;
    }
    out.flush()?;
    Ok(())
}

fn run_predict(args: &PredictArgs) -> CliResult {
    log_config("predict", args);
    if args.k == 0 {
        return Err(Failure::Usage("--k must be at least 1".into()));
    }
    let ensemble = load_with_k_prime(&args.model, args.kprime)?;
    map_lines(&args.input, args.output.as_deref(), |record| {
        let prediction = ensemble.predict(&tokenize(&record.text), args.k)?;
        let tags: Vec<_> = prediction
            .entries
            .iter()
            .map(|&(t, score)| json!({ "tag": ensemble.tag_name(t), "score": score }))
            .collect();
        Ok(json!({ "id": record.id, "tags": tags }))
    })
}

fn run_infer(args: &InferArgs) -> CliResult {
    log_config("infer", args);
    let ensemble = Ensemble::load(&args.model)?;
    map_lines(&args.input, args.output.as_deref(), |record| {
        let tokens = tokenize(&record.text);
        let vectors = ensemble
            .learners
            .iter()
            .map(|m| infer_document(m, &tokens))
            .collect::<doctag2vec::Result<Vec<_>>>()?;
        Ok(json!({ "id": record.id, "vectors": vectors }))
    })
}

fn run_evaluate(args: &EvaluateArgs) -> CliResult {
    log_config("evaluate", args);
    if args.k == 0 {
        return Err(Failure::Usage("--k must be at least 1".into()));
    }
    let ensemble = load_with_k_prime(&args.model, args.kprime)?;
    let metrics = evaluate(&ensemble, &read_records(&args.input)?, args.k, args.k)?;
    let mut out = open_output(args.output.as_deref())?;
    writeln!(out, "{}", serde_json::to_string_pretty(&metrics).expect("metrics serialize"))?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Train(a) => run_train(a),
        Command::Update(a) => run_update(a),
        Command::AddTags(a) => run_add_tags(a),
        Command::Predict(a) => run_predict(a),
        Command::Infer(a) => run_infer(a),
        Command::Evaluate(a) => run_evaluate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
