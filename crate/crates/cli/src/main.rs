use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use structmem::backend::HttpConfig;
use structmem::bundled;
use structmem::schemagen::{generate_schema, SchemaGenError, SchemaGenRequest};
use structmem::{
    AmendmentLog, BuiltinTokenizer, LedgerReport, MemoryMode, OpsPolicy, RunError, RunReport,
};

mod config;

use config::{build_backend, load_schema, BackendSpec, RunFile};

pub const EXIT_IO: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_SCHEMA: u8 = 3;
pub const EXIT_BACKEND: u8 = 4;
pub const EXIT_DOCUMENT: u8 = 5;

const DEFAULT_BUDGETS: [usize; 5] = [2000, 4000, 8000, 16000, 32000];

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Parser)]
#[command(
    name = "structmem",
    version,
    about = "Read long documents chunk by chunk into a schema-typed memory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one document and write its report.
    Run(RunArgs),
    /// Run one document at several chunk budgets and print a TSV table.
    Sweep(SweepArgs),
    /// Generate a memory schema for a new domain.
    Schemagen(SchemaGenArgs),
    /// Resolve a serialized amendment log into canonical JSON.
    Resolve(ResolveArgs),
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ModeArg {
    InPlace,
    Amendments,
    NaturalLanguageBaseline,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum OpsArg {
    AddAndUpdate,
    AddOnly,
}

/// Flags mirroring the config file. A flag wins over the file.
#[derive(Args, Default)]
struct ConfigFlags {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    memory_mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    ops_policy: Option<OpsArg>,
    #[arg(long)]
    chunk_budget: Option<usize>,
    #[arg(long)]
    retry_limit: Option<u32>,
    #[arg(long)]
    top_k: Option<u32>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_output_tokens: Option<u32>,
    #[arg(long)]
    task_instruction: Option<String>,
    #[arg(long)]
    final_instruction: Option<String>,
    #[arg(long)]
    query: Option<String>,
    #[arg(long)]
    context_window: Option<usize>,
    /// Scripted backend fixture (JSON).
    #[arg(long, conflicts_with_all = ["cassette", "endpoint"])]
    fixture: Option<PathBuf>,
    /// Replay responses from a cassette (JSON Lines).
    #[arg(long, conflicts_with = "endpoint")]
    cassette: Option<PathBuf>,
    /// HTTP completion endpoint. The API key comes from STRUCTMEM_API_KEY.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Record live responses to a cassette.
    #[arg(long)]
    record: Option<PathBuf>,
}

impl ConfigFlags {
    fn resolve(&self) -> Result<RunFile, CliError> {
        let mut file = RunFile::load(self.config.as_deref())?;
        let p = &mut file.pipeline;
        if let Some(m) = self.memory_mode {
            p.memory_mode = match m {
                ModeArg::InPlace => MemoryMode::InPlace,
                ModeArg::Amendments => MemoryMode::Amendments,
                ModeArg::NaturalLanguageBaseline => MemoryMode::NaturalLanguageBaseline,
            };
        }
        if let Some(o) = self.ops_policy {
            p.ops_policy = match o {
                OpsArg::AddAndUpdate => OpsPolicy::AddAndUpdate,
                OpsArg::AddOnly => OpsPolicy::AddOnly,
            };
        }
        set(&mut p.chunk_budget, self.chunk_budget);
        set(&mut p.retry_limit, self.retry_limit);
        set(&mut p.decode_params.top_k, self.top_k);
        set(&mut p.decode_params.temperature, self.temperature);
        set(
            &mut p.decode_params.max_output_tokens,
            self.max_output_tokens,
        );
        set(&mut p.task_instruction, self.task_instruction.clone());
        set(&mut p.final_instruction, self.final_instruction.clone());
        set(&mut p.query, self.query.clone());
        if self.context_window.is_some() {
            p.context_window = self.context_window;
        }

        if let Some(fixture) = &self.fixture {
            file.backend = Some(BackendSpec::Scripted {
                fixture: fixture.clone(),
            });
        } else if let Some(cassette) = &self.cassette {
            file.backend = Some(BackendSpec::Replay {
                cassette: cassette.clone(),
            });
        } else if self.endpoint.is_some() || self.model.is_some() {
            let mut http = match file.backend.take() {
                Some(BackendSpec::Http(h)) => h,
                _ => HttpConfig::default(),
            };
            set(&mut http.endpoint, self.endpoint.clone());
            set(&mut http.model, self.model.clone());
            file.backend = Some(BackendSpec::Http(http));
        }
        if self.record.is_some() {
            file.record = self.record.clone();
        }
        Ok(file)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    flags: ConfigFlags,
    /// Schema descriptor (.schema.json).
    #[arg(long)]
    schema: PathBuf,
    /// UTF-8 document to read.
    #[arg(long)]
    document: PathBuf,
    /// Directory for the report files; defaults to the document's directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    flags: ConfigFlags,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    document: PathBuf,
    /// Strictly increasing chunk budgets, comma separated.
    #[arg(long, value_delimiter = ',')]
    budgets: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    repetitions: usize,
    /// Cells run in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// TSV output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SchemaGenArgs {
    #[command(flatten)]
    flags: ConfigFlags,
    /// Short description of the new domain.
    #[arg(long)]
    description: String,
    /// An example question for the domain.
    #[arg(long)]
    example_query: String,
    /// Directory with exemplars.json; the bundled exemplars otherwise.
    #[arg(long)]
    exemplars: Option<PathBuf>,
    /// Where to write the generated .schema.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ResolveArgs {
    /// Serialized amendment log.
    log: PathBuf,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Schemagen(a) => cmd_schemagen(a),
        Command::Resolve(a) => cmd_resolve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

fn read_document(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| {
        CliError::new(
            EXIT_DOCUMENT,
            format!("cannot read document {}: {e}", path.display()),
        )
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::new(EXIT_IO, format!("cannot write {}: {e}", path.display())))
}

fn run_error(e: RunError) -> CliError {
    match e {
        RunError::Config(m) => CliError::new(EXIT_CONFIG, m),
        RunError::Document(d) => CliError::new(EXIT_DOCUMENT, d.to_string()),
        e @ RunError::Backend { .. } => CliError::new(EXIT_BACKEND, e.to_string()),
    }
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let file = args.flags.resolve()?;
    file.pipeline.validate().map_err(run_error)?;
    let schema = load_schema(&args.schema)?;
    let document = read_document(&args.document)?;
    let backend = build_backend(file.backend.as_ref(), file.record.as_deref(), false)?;

    let outcome = structmem::run(
        &file.pipeline,
        &schema,
        &document,
        &backend,
        &BuiltinTokenizer,
    );
    let (report, error) = match outcome {
        Ok(r) => (r, None),
        Err(RunError::Backend {
            stage,
            source,
            partial,
        }) => {
            let err = run_error(RunError::Backend {
                stage,
                source,
                partial: partial.clone(),
            });
            (*partial, Some(err))
        }
        Err(e) => return Err(run_error(e)),
    };

    let dir = match &args.out {
        Some(d) => {
            fs::create_dir_all(d)
                .map_err(|e| CliError::new(EXIT_IO, format!("{}: {e}", d.display())))?;
            d.clone()
        }
        None => args
            .document
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default(),
    };
    let stem = args
        .document
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("document");
    let report_path = dir.join(format!("{stem}.report.json"));
    let tsv_path = dir.join(format!("{stem}.steps.tsv"));
    write_file(&report_path, &report.to_json())?;
    write_file(&tsv_path, &report.steps_tsv())?;
    println!("report: {}", report_path.display());
    println!("steps: {}", tsv_path.display());
    match error {
        None => {
            print_summary(&report);
            Ok(())
        }
        Some(e) => Err(e),
    }
}

fn print_summary(report: &RunReport) {
    let s = &report.summary;
    let hit = s
        .cache_hit_rate
        .map_or("NA".to_string(), |h| format!("{h:.4}"));
    println!(
        "chunks={} total_encoded={} reused={} net_encoded={} decoded={} cache_hit_rate={hit} cost_index={:.4}",
        report.chunk_count, s.total_encoded, s.reused, s.net_encoded, s.decoded, s.cost_index
    );
}

pub const SWEEP_HEADER: &str =
    "budget\ttotal_encoded\treused\tnet_encoded\tdecoded\tcache_hit_rate\tcost_index\n";

fn sweep_row(budget: usize, s: &LedgerReport) -> String {
    let hit = s
        .cache_hit_rate
        .map_or("NA".to_string(), |h| format!("{h:.6}"));
    format!(
        "{budget}\t{}\t{}\t{}\t{}\t{hit}\t{:.6}\n",
        s.total_encoded, s.reused, s.net_encoded, s.decoded, s.cost_index
    )
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let budgets = if args.budgets.is_empty() {
        DEFAULT_BUDGETS.to_vec()
    } else {
        args.budgets.clone()
    };
    if budgets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::new(
            EXIT_CONFIG,
            "budgets must be strictly increasing",
        ));
    }
    if args.repetitions < 1 || args.jobs < 1 {
        return Err(CliError::new(
            EXIT_CONFIG,
            "repetitions and jobs must be at least 1",
        ));
    }
    let file = args.flags.resolve()?;
    for &b in &budgets {
        let mut cfg = file.pipeline.clone();
        cfg.chunk_budget = b;
        cfg.validate().map_err(run_error)?;
    }
    let schema = load_schema(&args.schema)?;
    let document = read_document(&args.document)?;

    let mut out: Box<dyn Write> =
        match &args.out {
            Some(p) => Box::new(fs::File::create(p).map_err(|e| {
                CliError::new(EXIT_IO, format!("cannot write {}: {e}", p.display()))
            })?),
            None => Box::new(io::stdout().lock()),
        };
    let io_err = |e: io::Error| CliError::new(EXIT_IO, e.to_string());
    out.write_all(SWEEP_HEADER.as_bytes()).map_err(io_err)?;
    out.flush().map_err(io_err)?;

    let cells: Vec<usize> = budgets
        .iter()
        .flat_map(|&b| std::iter::repeat(b).take(args.repetitions))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| CliError::new(EXIT_IO, e.to_string()))?;
    let run_cell = |budget: usize| -> Result<String, CliError> {
        let mut cfg = file.pipeline.clone();
        cfg.chunk_budget = budget;
        let backend = build_backend(file.backend.as_ref(), file.record.as_deref(), true)?;
        let report = structmem::run(&cfg, &schema, &document, &backend, &BuiltinTokenizer)
            .map_err(run_error)?;
        Ok(sweep_row(budget, &report.summary))
    };
    for batch in cells.chunks(args.jobs) {
        let rows: Vec<Result<String, CliError>> =
            pool.install(|| batch.par_iter().map(|&b| run_cell(b)).collect());
        for row in rows {
            out.write_all(row?.as_bytes()).map_err(io_err)?;
            out.flush().map_err(io_err)?;
        }
    }
    Ok(())
}

fn cmd_schemagen(args: SchemaGenArgs) -> Result<(), CliError> {
    let file = args.flags.resolve()?;
    file.pipeline
        .decode_params
        .validate()
        .map_err(|m| CliError::new(EXIT_CONFIG, m))?;
    let exemplars = match &args.exemplars {
        Some(dir) => {
            bundled::load_exemplars(dir).map_err(|e| CliError::new(EXIT_SCHEMA, e.to_string()))?
        }
        None => bundled::exemplars(),
    };
    let backend = build_backend(file.backend.as_ref(), file.record.as_deref(), false)?;
    let request = SchemaGenRequest {
        domain_description: args.description,
        example_query: args.example_query,
        exemplars,
    };
    let outcome = generate_schema(
        &request,
        &backend,
        file.pipeline.decode_params,
        file.pipeline.retry_limit,
    )
    .map_err(|e| match e {
        SchemaGenError::InvalidRequest(m) => CliError::new(EXIT_CONFIG, m),
        e @ SchemaGenError::GenerationUnparseable { .. } => {
            CliError::new(EXIT_SCHEMA, e.to_string())
        }
        SchemaGenError::BackendFailure(b) => CliError::new(EXIT_BACKEND, b.to_string()),
    })?;
    write_file(&args.out, &outcome.schema.to_descriptor_string())?;
    println!(
        "schema {} written to {} after {} attempt(s)",
        outcome.schema.name(),
        args.out.display(),
        outcome.attempts
    );
    Ok(())
}

fn cmd_resolve(args: ResolveArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.log).map_err(|e| {
        CliError::new(
            EXIT_DOCUMENT,
            format!("cannot read log {}: {e}", args.log.display()),
        )
    })?;
    let log = AmendmentLog::parse(&text)
        .map_err(|e| CliError::new(EXIT_DOCUMENT, format!("{}: {e}", args.log.display())))?;
    let mut json = log.resolve().to_canonical_json();
    json.push('\n');
    match &args.out {
        Some(p) => write_file(p, &json),
        None => io::stdout()
            .write_all(json.as_bytes())
            .map_err(|e| CliError::new(EXIT_IO, e.to_string())),
    }
}
