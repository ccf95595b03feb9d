use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use capeval::embeddings::{EmbeddingFormat, EmbeddingTable};
use capeval::exec::Execution;
use capeval::harness::{
    correlation_report, distraction_accuracy, distraction_corpus, distraction_csv, distraction_json,
    forced_choice_accuracy, forced_choice_csv, forced_choice_json, judgment_column, load_distraction,
    load_judged_dataset, load_triplets, reference_corpus, score_dataset, sha256_hex, DataError, ExternalScores,
    HarnessError, Resources, ScoreTable, Scorer, ScoringConfig,
};
use capeval::metastats::{combine, williams_test, CorrelationKind};
use capeval::meteor::{MeteorParams, SynonymLexicon};
use capeval::metric::MetricId;
use capeval::ngram::IdfTable;
use capeval::report::fmt_sig;
use capeval::textprep::{tokenize_str, StopwordList};
use capeval::wmd::{Aggregation, WmdParams};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "capeval", version, about = "Caption evaluation metrics and meta-evaluation protocols")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a judged dataset with one or more metrics.
    Score(ScoreArgs),
    /// Correlate metric scores with human judgments, with Williams tests.
    Correlate(CorrelateArgs),
    /// Williams test for two dependent correlations.
    Williams(WilliamsArgs),
    /// Forced-choice accuracy on caption triplets.
    Accuracy(ProtocolArgs),
    /// Accuracy at ranking correct captions above distractors.
    Distract(ProtocolArgs),
    /// Add a min-max normalized combination of score columns.
    Combine(CombineArgs),
    /// Restrict an embedding file to the vocabulary of some datasets.
    FilterVocab(FilterArgs),
}

#[derive(Args)]
struct ResourceArgs {
    /// CIDEr document frequencies (TSV); built from the data's references when absent.
    #[arg(long)]
    idf: Option<PathBuf>,
    /// Word embeddings, word2vec text or binary format.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Embedding file format; inferred from the extension (.bin = binary) when absent.
    #[arg(long, value_enum)]
    embeddings_format: Option<FormatArg>,
    /// Stopword list, one word per line (default: built-in English list).
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// METEOR synonym groups, one group of words per line.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// External scores as NAME=PATH (CSV `instance_id,score`), used as metric `external:NAME`.
    #[arg(long = "external", value_name = "NAME=PATH")]
    external: Vec<String>,
    #[arg(long, default_value_t = 4)]
    bleu_n: usize,
    #[arg(long, default_value_t = 1.2)]
    rouge_beta: f64,
    #[arg(long, default_value_t = 0.9)]
    meteor_alpha: f64,
    #[arg(long, default_value_t = 3.0)]
    meteor_beta: f64,
    #[arg(long, default_value_t = 0.5)]
    meteor_gamma: f64,
    /// Similarity is exp(-scale * distance).
    #[arg(long, default_value_t = 1.0)]
    wmd_scale: f64,
    /// How per-reference WMD similarities are aggregated.
    #[arg(long, value_enum, default_value_t = AggregateArg::Max)]
    wmd_aggregate: AggregateArg,
    /// Score instances on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Binary,
}

impl From<FormatArg> for EmbeddingFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Text => EmbeddingFormat::Text,
            FormatArg::Binary => EmbeddingFormat::Binary,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregateArg {
    Max,
    Mean,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Pearson,
    Spearman,
    Kendall,
}

impl From<KindArg> for CorrelationKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Pearson => CorrelationKind::Pearson,
            KindArg::Spearman => CorrelationKind::Spearman,
            KindArg::Kendall => CorrelationKind::Kendall,
        }
    }
}

#[derive(Args)]
struct ScoreArgs {
    /// Judged dataset (JSONL).
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated metrics: bleu, rouge, cider, meteor, wmd, external:NAME.
    #[arg(long, value_delimiter = ',', required = true)]
    metrics: Vec<String>,
    /// Score table CSV; the JSON copy goes next to it.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    resources: ResourceArgs,
}

#[derive(Args)]
struct CorrelateArgs {
    /// Score table CSV written by `score` or `combine`.
    #[arg(long)]
    scores: PathBuf,
    /// Judged dataset (JSONL) holding the judgments.
    #[arg(long)]
    data: PathBuf,
    /// Judgment name; repeat or comma-separate for several, `a+b` averages two.
    #[arg(long, value_delimiter = ',', required = true)]
    judgment: Vec<String>,
    /// Coefficient used for the Williams test.
    #[arg(long, value_enum, default_value_t = KindArg::Pearson)]
    williams_correlation: KindArg,
    /// Directory for the report files.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct WilliamsArgs {
    /// Correlation of metric 1 with the judgments.
    #[arg(long, allow_hyphen_values = true)]
    r13: f64,
    /// Correlation of metric 2 with the judgments.
    #[arg(long, allow_hyphen_values = true)]
    r23: f64,
    /// Correlation between the two metrics.
    #[arg(long, allow_hyphen_values = true)]
    r12: f64,
    /// Number of instances.
    #[arg(long)]
    n: usize,
    /// CSV output (JSON copy alongside); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProtocolArgs {
    /// Triplet or distraction dataset (JSONL).
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated metrics.
    #[arg(long, alias = "metric", value_delimiter = ',', required = true)]
    metrics: Vec<String>,
    /// Report CSV; the JSON copy goes next to it.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    resources: ResourceArgs,
}

#[derive(Args)]
struct CombineArgs {
    /// Score table CSV.
    #[arg(long)]
    scores: PathBuf,
    /// Columns to combine, comma-separated.
    #[arg(long, value_delimiter = ',', required = true)]
    metrics: Vec<String>,
    /// Optional weights, one per metric.
    #[arg(long, value_delimiter = ',')]
    weights: Vec<f64>,
    /// Name of the new column, stored as `combined:NAME`.
    #[arg(long, default_value = "combined")]
    name: String,
    /// Output score table CSV (JSON copy alongside).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FilterArgs {
    /// Source embedding file.
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, value_enum)]
    embeddings_format: Option<FormatArg>,
    /// JSONL datasets whose caption vocabulary is kept (any of the three kinds).
    #[arg(long, required = true)]
    data: Vec<PathBuf>,
    /// Output embedding file.
    #[arg(long)]
    out: PathBuf,
    /// Output format; inferred from the extension when absent.
    #[arg(long, value_enum)]
    out_format: Option<FormatArg>,
}

enum CliError {
    Config(String),
    Data(String),
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Score(a) => run_score(a),
        Command::Correlate(a) => run_correlate(a),
        Command::Williams(a) => run_williams(a),
        Command::Accuracy(a) => run_accuracy(a),
        Command::Distract(a) => run_distract(a),
        Command::Combine(a) => run_combine(a),
        Command::FilterVocab(a) => run_filter(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn parse_metrics(names: &[String]) -> CliResult<Vec<MetricId>> {
    names
        .iter()
        .filter(|n| !n.trim().is_empty())
        .map(|n| n.parse::<MetricId>().map_err(|e| CliError::Config(e.to_string())))
        .collect()
}

fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

fn load_embeddings(path: &Path, format: Option<FormatArg>) -> CliResult<(EmbeddingTable, String)> {
    let bytes = read_file(path)?;
    let format = format.map_or_else(|| EmbeddingFormat::from_path(path), Into::into);
    let table = match format {
        EmbeddingFormat::Text => EmbeddingTable::parse_text(&bytes),
        EmbeddingFormat::Binary => EmbeddingTable::parse_binary(&bytes),
    }
    .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok((table, sha256_hex(&bytes)))
}

/// Validates flags and loads every resource the requested metrics need.
fn build_scorer(
    args: &ResourceArgs,
    metrics: Vec<MetricId>,
    corpus: impl FnOnce() -> Vec<Vec<capeval::textprep::TokenizedCaption>>,
) -> CliResult<Scorer> {
    let wants = |m: MetricId| metrics.contains(&m);
    let config = ScoringConfig {
        metrics: metrics.clone(),
        bleu_max_n: args.bleu_n,
        rouge_beta: args.rouge_beta,
        meteor: MeteorParams { alpha: args.meteor_alpha, beta: args.meteor_beta, gamma: args.meteor_gamma },
        wmd: WmdParams {
            scale: args.wmd_scale,
            aggregation: match args.wmd_aggregate {
                AggregateArg::Max => Aggregation::Max,
                AggregateArg::Mean => Aggregation::Mean,
            },
        },
    };
    if wants(MetricId::Wmd) && args.embeddings.is_none() {
        return Err(CliError::Config("wmd requires --embeddings".into()));
    }

    let mut resources = Resources::default();
    for spec in &args.external {
        let (name, path) = spec
            .split_once('=')
            .filter(|(n, p)| !n.is_empty() && !p.is_empty())
            .ok_or_else(|| CliError::Config(format!("--external expects NAME=PATH, got `{spec}`")))?;
        resources.external.insert(name.to_lowercase(), ExternalScores::from_file(path)?);
    }
    if let Some(path) = &args.stopwords {
        resources.stopwords = StopwordList::from_file(path).map_err(|e| CliError::Data(e.to_string()))?;
    }
    if wants(MetricId::Wmd) {
        if let Some(path) = &args.embeddings {
            let (table, hash) = load_embeddings(path, args.embeddings_format)?;
            resources.embeddings = Some(table);
            resources.embeddings_sha256 = Some(hash);
        }
    }
    if wants(MetricId::Meteor) {
        if let Some(path) = &args.lexicon {
            resources.lexicon = Some(SynonymLexicon::from_file(path).map_err(|e| CliError::Data(e.to_string()))?);
        }
    }
    if wants(MetricId::Cider) {
        match &args.idf {
            Some(path) => {
                let bytes = read_file(path)?;
                let table = IdfTable::read_tsv(bytes.as_slice())
                    .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
                resources.idf = Some(table);
            }
            None => resources.ensure_idf(&corpus())?,
        }
    }
    Ok(Scorer::new(config, resources)?)
}

fn execution(args: &ResourceArgs) -> Execution {
    if args.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &serde_json::Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
    text.push('\n');
    write_text(path, &text)
}

/// The JSON copy of a CSV report: same path with a `.json` extension.
fn json_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn write_table(table: &ScoreTable, out: &Path) -> CliResult<()> {
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    write_text(out, &String::from_utf8(buf).expect("csv is utf-8"))?;
    write_json(&json_path(out), &table.to_json())
}

fn run_score(args: ScoreArgs) -> CliResult<()> {
    let metrics = parse_metrics(&args.metrics)?;
    let instances = load_judged_dataset(&args.data)?;
    let scorer = build_scorer(&args.resources, metrics, || reference_corpus(&instances))?;
    let table = score_dataset(&instances, &scorer, execution(&args.resources))?;
    write_table(&table, &args.out)
}

fn read_table(path: &Path) -> CliResult<ScoreTable> {
    let bytes = read_file(path)?;
    ScoreTable::read_csv(bytes.as_slice()).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn run_correlate(args: CorrelateArgs) -> CliResult<()> {
    let names: Vec<String> = args.judgment.iter().map(|j| j.trim().to_string()).filter(|j| !j.is_empty()).collect();
    if names.is_empty() {
        return Err(CliError::Config("--judgment needs at least one name".into()));
    }
    let table = read_table(&args.scores)?;
    let instances = load_judged_dataset(&args.data)?;
    let ids = table.ids();
    let columns = names.iter().map(|n| judgment_column(&instances, &ids, n)).collect::<Result<Vec<_>, _>>()?;
    let report = correlation_report(&table, &columns, args.williams_correlation.into())?;

    let dir = &args.out_dir;
    write_text(&dir.join("correlations.csv"), &report.correlations_csv())?;
    write_text(&dir.join("metric_spearman.csv"), &report.metric_spearman_csv())?;
    for (i, w) in report.williams.iter().enumerate() {
        let stem = file_stem(&w.judgment);
        write_text(&dir.join(format!("williams_{stem}.csv")), &report.williams_csv(i))?;
        write_text(&dir.join(format!("wins_{stem}.csv")), &report.wins_csv(i))?;
    }
    write_json(&dir.join("report.json"), &report.to_json())
}

fn run_williams(args: WilliamsArgs) -> CliResult<()> {
    let w = williams_test(args.r13, args.r23, args.r12, args.n).map_err(|e| CliError::Config(e.to_string()))?;
    let csv = format!(
        "t,df,p,r12,r13,r23,n\n{},{},{},{},{},{},{}\n",
        fmt_sig(w.t),
        w.df,
        fmt_sig(w.p),
        fmt_sig(w.r12),
        fmt_sig(w.r13),
        fmt_sig(w.r23),
        w.n
    );
    match &args.out {
        Some(path) => {
            write_text(path, &csv)?;
            let json = serde_json::json!({
                "t": fmt_sig(w.t), "df": w.df, "p": fmt_sig(w.p),
                "r12": fmt_sig(w.r12), "r13": fmt_sig(w.r13), "r23": fmt_sig(w.r23), "n": w.n,
            });
            write_json(&json_path(path), &json)
        }
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn run_accuracy(args: ProtocolArgs) -> CliResult<()> {
    let metrics = parse_metrics(&args.metrics)?;
    let triplets = load_triplets(&args.data)?;
    let scorer = build_scorer(&args.resources, metrics.clone(), || capeval::harness::triplet_corpus(&triplets))?;
    let exec = execution(&args.resources);
    let reports =
        metrics.iter().map(|m| forced_choice_accuracy(&triplets, &scorer, m, exec)).collect::<Result<Vec<_>, _>>()?;
    write_text(&args.out, &forced_choice_csv(&reports))?;
    write_json(&json_path(&args.out), &forced_choice_json(&reports))
}

fn run_distract(args: ProtocolArgs) -> CliResult<()> {
    let metrics = parse_metrics(&args.metrics)?;
    let instances = load_distraction(&args.data)?;
    let scorer = build_scorer(&args.resources, metrics.clone(), || distraction_corpus(&instances))?;
    let exec = execution(&args.resources);
    let reports =
        metrics.iter().map(|m| distraction_accuracy(&instances, &scorer, m, exec)).collect::<Result<Vec<_>, _>>()?;
    write_text(&args.out, &distraction_csv(&reports))?;
    write_json(&json_path(&args.out), &distraction_json(&reports))
}

fn run_combine(args: CombineArgs) -> CliResult<()> {
    let metrics = parse_metrics(&args.metrics)?;
    if metrics.is_empty() {
        return Err(CliError::Config("--metrics needs at least one column".into()));
    }
    let name = args.name.trim().to_lowercase();
    if name.is_empty() {
        return Err(CliError::Config("--name must not be empty".into()));
    }
    let weights = (!args.weights.is_empty()).then_some(args.weights.as_slice());
    if let Some(w) = weights {
        if w.len() != metrics.len() {
            return Err(CliError::Config(format!("{} weights given for {} metrics", w.len(), metrics.len())));
        }
    }
    let mut table = read_table(&args.scores)?;
    let columns = metrics
        .iter()
        .map(|m| table.column(m).ok_or_else(|| CliError::Config(format!("score table has no `{m}` column"))))
        .collect::<Result<Vec<_>, _>>()?;
    let combined = combine(&columns, weights).map_err(|e| CliError::Config(e.to_string()))?;
    table.set_column(MetricId::Combined(name), &combined)?;
    write_table(&table, &args.out)
}

/// Caption strings of any supported dataset line.
fn captions_in(value: &serde_json::Value, out: &mut Vec<String>) {
    use serde_json::Value;
    let Value::Object(map) = value else { return };
    for key in ["candidate", "candidate_a", "candidate_b"] {
        if let Some(Value::String(s)) = map.get(key) {
            out.push(s.clone());
        }
    }
    for key in ["references", "correct"] {
        if let Some(Value::Array(items)) = map.get(key) {
            out.extend(items.iter().filter_map(|v| v.as_str().map(str::to_string)));
        }
    }
    if let Some(Value::Array(items)) = map.get("distractors") {
        for d in items {
            if let Some(s) = d.get("caption").and_then(Value::as_str) {
                out.push(s.to_string());
            }
        }
    }
}

fn run_filter(args: FilterArgs) -> CliResult<()> {
    let mut vocab = BTreeSet::new();
    for path in &args.data {
        let text = String::from_utf8(read_file(path)?)
            .map_err(|_| CliError::Data(format!("{} is not valid UTF-8", path.display())))?;
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let value: serde_json::Value = serde_json::from_str(line)
                .map_err(|e| CliError::Data(format!("{}: line {}: {e}", path.display(), idx + 1)))?;
            let mut captions = Vec::new();
            captions_in(&value, &mut captions);
            for c in captions {
                vocab.extend(tokenize_str(&c).tokens().iter().cloned());
            }
        }
    }
    let (table, _) = load_embeddings(&args.embeddings, args.embeddings_format)?;
    let filtered = table.filtered(|w| vocab.contains(w));
    log::info!("kept {} of {} vectors ({} caption tokens)", filtered.len(), table.len(), vocab.len());
    eprintln!("kept {} of {} vectors", filtered.len(), table.len());
    let format = args.out_format.map_or_else(|| EmbeddingFormat::from_path(&args.out), Into::into);
    filtered.save(&args.out, format).map_err(|e| CliError::Data(format!("{}: {e}", args.out.display())))
}
