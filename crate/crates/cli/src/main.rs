//! `boundary-scan`: fit NMAR log-linear models to incomplete two-way tables
//! and report boundary solutions and the conditions that predict them.
//!
//! Exit codes: 0 success, 1 some batch file failed, 2 invalid input or
//! arguments, 3 numerical failure.

mod render;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use boundary_scan::report::{analyze, check, AnalysisReport, SCHEMA};
use boundary_scan::{
    BoundaryOptions, FitError, Format, IncompleteTable, ModelId, Start, Validation,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

#[derive(Parser)]
#[command(
    name = "boundary-scan",
    version,
    about = "Boundary solutions of NMAR models for incomplete two-way tables"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit models and write an analysis report.
    Fit(FitArgs),
    /// Evaluate the sufficient and necessary conditions without fitting.
    Check(CheckArgs),
    /// Analyse every table in a directory.
    Batch(BatchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    M1,
    M2,
    M3,
    M4,
    M5,
    All,
}

impl ModelArg {
    fn models(self) -> Vec<ModelId> {
        match self {
            ModelArg::M1 => vec![ModelId::M1],
            ModelArg::M2 => vec![ModelId::M2],
            ModelArg::M3 => vec![ModelId::M3],
            ModelArg::M4 => vec![ModelId::M4],
            ModelArg::M5 => vec![ModelId::M5],
            ModelArg::All => ModelId::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    /// Closed-form solution, refit by ECM on a boundary.
    Closed,
    /// ECM throughout.
    Em,
}

#[derive(Args)]
struct InputArgs {
    /// Table file.
    #[arg(long)]
    input: PathBuf,
    /// Input format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<InputFormat>,
    /// The CSV input starts with a header row.
    #[arg(long)]
    csv_header: bool,
}

#[derive(Args)]
struct FitOptions {
    #[arg(long, value_enum, default_value = "all")]
    model: ModelArg,
    /// Also refit every single-level boundary and compare G2.
    #[arg(long)]
    audit_boundaries: bool,
    #[arg(long, value_enum, default_value = "closed")]
    method: MethodArg,
}

impl FitOptions {
    fn boundary(&self) -> BoundaryOptions {
        BoundaryOptions {
            audit: self.audit_boundaries,
            start: match self.method {
                MethodArg::Closed => Start::ClosedForm,
                MethodArg::Em => Start::Em,
            },
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    fit: FitOptions,
    /// Output path, or `-` for standard output.
    #[arg(long, default_value = "-")]
    output: String,
    /// Human-readable text instead of JSON.
    #[arg(long)]
    text: bool,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Odds-interval conditions.
    #[arg(long)]
    sufficient: bool,
    /// Row-dominance conditions.
    #[arg(long)]
    necessary: bool,
    #[arg(long, value_enum, default_value = "all")]
    model: ModelArg,
    /// Accept zero counts.
    #[arg(long)]
    lenient: bool,
    #[arg(long, default_value = "-")]
    output: String,
    #[arg(long)]
    text: bool,
}

#[derive(Args)]
struct BatchArgs {
    /// Directory of `.json` and `.csv` tables.
    #[arg(long)]
    input_dir: PathBuf,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Write one `<name>.report.json` per table here; without it the reports
    /// go to standard output as one JSON document.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[command(flatten)]
    fit: FitOptions,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<FitError> for Failure {
    fn from(e: FitError) -> Self {
        if e.is_validation() {
            Failure::Input(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

fn format_for(path: &Path, explicit: Option<InputFormat>, header: bool) -> Format {
    let csv = match explicit {
        Some(InputFormat::Csv) => true,
        Some(InputFormat::Json) => false,
        None => path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv")),
    };
    if csv {
        Format::Csv { header }
    } else {
        Format::Json
    }
}

fn read_table(
    path: &Path,
    format: Format,
    validation: Validation,
) -> Result<IncompleteTable, Failure> {
    let file =
        fs::File::open(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    IncompleteTable::parse(io::BufReader::new(file), format, validation)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn emit(output: &str, body: &str) -> Result<(), Failure> {
    if output == "-" {
        let mut out = io::stdout().lock();
        out.write_all(body.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| Failure::Input(format!("stdout: {e}")))
    } else {
        fs::write(output, body).map_err(|e| Failure::Input(format!("{output}: {e}")))
    }
}

fn with_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

fn cmd_fit(a: FitArgs) -> Result<(), Failure> {
    let format = format_for(&a.input.input, a.input.format, a.input.csv_header);
    let t = read_table(&a.input.input, format, Validation::Strict)?;
    let report = analyze(&t, &a.fit.model.models(), &a.fit.boundary())?;
    let body = if a.text {
        render::analysis(&report)
    } else {
        report.to_json_string()
    };
    emit(&a.output, &with_newline(body))
}

fn cmd_check(a: CheckArgs) -> Result<(), Failure> {
    let format = format_for(&a.input.input, a.input.format, a.input.csv_header);
    let validation = if a.lenient {
        Validation::Lenient
    } else {
        Validation::Strict
    };
    let t = read_table(&a.input.input, format, validation)?;
    let both = !a.sufficient && !a.necessary;
    let necessary = if a.necessary || both {
        a.model.models()
    } else {
        vec![]
    };
    let report = check(&t, a.sufficient || both, &necessary).map_err(FitError::from)?;
    let body = if a.text {
        render::check(&report)
    } else {
        report.to_json_string()
    };
    emit(&a.output, &with_newline(body))
}

struct BatchItem {
    name: String,
    outcome: Result<AnalysisReport, Failure>,
}

fn table_files(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let entries =
        fs::read_dir(dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("json") || e.eq_ignore_ascii_case("csv"))
        })
        .collect();
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

fn cmd_batch(a: BatchArgs) -> Result<bool, Failure> {
    let files = table_files(&a.input_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.max(1))
        .build()
        .map_err(|e| Failure::Input(format!("thread pool: {e}")))?;
    let models = a.fit.model.models();
    let opts = a.fit.boundary();
    let items: Vec<BatchItem> = pool.install(|| {
        files
            .par_iter()
            .map(|path| {
                let outcome = read_table(path, format_for(path, None, false), Validation::Strict)
                    .and_then(|t| analyze(&t, &models, &opts).map_err(Failure::from));
                BatchItem {
                    name: path
                        .file_name()
                        .unwrap_or_default()
                        .to_string_lossy()
                        .into_owned(),
                    outcome,
                }
            })
            .collect()
    });

    if let Some(dir) = &a.output_dir {
        fs::create_dir_all(dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
        for item in &items {
            if let Ok(r) = &item.outcome {
                let stem = Path::new(&item.name)
                    .file_stem()
                    .unwrap_or_default()
                    .to_string_lossy();
                let path = dir.join(format!("{stem}.report.json"));
                fs::write(&path, with_newline(r.to_json_string()))
                    .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            }
        }
    }

    let summary: String = items
        .iter()
        .map(|i| render::batch_line(&i.name, i.outcome.as_ref().map_err(Failure::message)))
        .collect();
    if a.output_dir.is_some() {
        emit("-", &summary)?;
    } else {
        eprint!("{summary}");
        emit("-", &with_newline(batch_document(&items)))?;
    }
    Ok(items.iter().all(|i| i.outcome.is_ok()))
}

fn batch_document(items: &[BatchItem]) -> String {
    let reports: Vec<serde_json::Value> = items
        .iter()
        .map(|i| match &i.outcome {
            Ok(r) => serde_json::json!({ "file": i.name, "report": r }),
            Err(e) => serde_json::json!({ "file": i.name, "error": e.message() }),
        })
        .collect();
    let doc = serde_json::json!({ "schema": SCHEMA, "reports": reports });
    serde_json::to_string_pretty(&doc).expect("batch document serializes")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a).map(|_| true),
        Command::Check(a) => cmd_check(a).map(|_| true),
        Command::Batch(a) => cmd_batch(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
