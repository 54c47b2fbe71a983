//! The `castcost` command line: argument handling, file loading and
//! report output around the engine.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use castcost::report::{
    bench_report, compute_report, sweep_report, to_json_bytes, whatif_report, BenchRequest,
    ComputeRequest, SweepRequest, WhatIfRequest,
};
use castcost::{parse_model, CostModel, Format, PartSpec, RateTable, Scenario, SeriesSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use thiserror::Error;

/// Directories searched for `--model` names that are not paths.
pub const MODEL_PATH_VAR: &str = "COST_MODEL_PATH";

#[derive(Debug, Parser)]
#[command(
    name = "castcost",
    about = "Sand-casting cost models: validate, price, compare"
)]
pub struct Cli {
    /// Print the tool version to stderr before running.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a model file and list its diagnostics.
    Validate { model: String },
    /// Price a part.
    Compute(ComputeArgs),
    /// Compare scenarios against the unmodified part.
    Whatif {
        #[command(flatten)]
        input: ModelPart,
        /// Scenario file, repeatable.
        #[arg(long = "scenario", required = true)]
        scenarios: Vec<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Recompute the part for each value of one lever.
    Sweep {
        #[command(flatten)]
        input: ModelPart,
        #[arg(long)]
        lever: String,
        /// Comma-separated values.
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_hyphen_values = true
        )]
        values: Vec<f64>,
        #[arg(long)]
        target: Option<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Rank plants by the total under each rate table.
    Bench {
        #[command(flatten)]
        input: ModelPart,
        /// Comma-separated rate table files.
        #[arg(long, value_delimiter = ',', required = true)]
        rates: Vec<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Run the HTTP API over a models directory.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        models: PathBuf,
        /// Interface to bind; loopback unless widened.
        #[arg(long, default_value = castcost_service::DEFAULT_HOST)]
        host: String,
        /// Origin allowed to call the API from a browser.
        #[arg(long)]
        cors: Option<String>,
    },
}

#[derive(Debug, Args)]
struct ModelPart {
    /// Model file, or a name looked up in COST_MODEL_PATH.
    #[arg(long)]
    model: String,
    /// Part spec JSON file.
    #[arg(long)]
    part: PathBuf,
}

#[derive(Debug, Args)]
struct Output {
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ComputeArgs {
    #[command(flatten)]
    input: ModelPart,
    /// Scenario JSON file.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Series as QUANTITY:TOOLING_COST.
    #[arg(long, value_parser = parse_series)]
    series: Option<SeriesSpec>,
    #[arg(long)]
    target: Option<f64>,
    /// Budget for the whole series.
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long, value_enum, default_value_t = OutFormat::Json)]
    format: OutFormat,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Format {
        match f {
            OutFormat::Json => Format::Json,
            OutFormat::Csv => Format::Csv,
        }
    }
}

fn parse_series(s: &str) -> Result<SeriesSpec, String> {
    let (q, t) = s.split_once(':').ok_or("expected QUANTITY:TOOLING_COST")?;
    Ok(SeriesSpec {
        quantity: q
            .trim()
            .parse()
            .map_err(|e| format!("quantity `{q}`: {e}"))?,
        tooling_cost: t
            .trim()
            .parse()
            .map_err(|e| format!("tooling cost `{t}`: {e}"))?,
    })
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Malformed { path: PathBuf, message: String },
    #[error("{}: model has errors", path.display())]
    InvalidModel { path: PathBuf },
    #[error(transparent)]
    Engine(#[from] castcost::Error),
    #[error("writing output: {0}")]
    Write(std::io::Error),
    #[error("server: {0}")]
    Serve(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Read { .. } => 2,
            _ => 1,
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Malformed {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Resolves `--model`: an existing path, else `NAME` or `NAME.cmdl` in
/// the search path directories.
pub fn find_model(name: &str, search_path: Option<&std::ffi::OsStr>) -> Result<PathBuf, CliError> {
    let direct = PathBuf::from(name);
    if direct.is_file() {
        return Ok(direct);
    }
    if let Some(dirs) = search_path {
        for dir in std::env::split_paths(dirs) {
            for candidate in [dir.join(name), dir.join(format!("{name}.cmdl"))] {
                if candidate.is_file() {
                    return Ok(candidate);
                }
            }
        }
    }
    Err(CliError::Usage(format!(
        "model `{name}` not found (also searched {MODEL_PATH_VAR})"
    )))
}

/// Loads and checks a model; diagnostics go to `err`.
fn load_model(name: &str, err: &mut dyn Write) -> Result<CostModel, CliError> {
    let path = find_model(name, std::env::var_os(MODEL_PATH_VAR).as_deref())?;
    let doc = parse_model(&read_text(&path)?).map_err(|e| CliError::Malformed {
        path: path.clone(),
        message: format!("syntax error at {e}"),
    })?;
    for d in doc.diagnostics() {
        let _ = writeln!(err, "{}:{d}", path.display());
    }
    if doc.has_errors() {
        return Err(CliError::InvalidModel { path });
    }
    Ok(doc.model)
}

fn load_inputs(input: &ModelPart, err: &mut dyn Write) -> Result<(CostModel, PartSpec), CliError> {
    Ok((load_model(&input.model, err)?, read_json(&input.part)?))
}

/// A rate table file; the plant id defaults to the file name up to its
/// first dot, so `north.rates.json` is plant `north`.
fn read_rate_table(path: &Path) -> Result<RateTable, CliError> {
    let mut value: serde_json::Value = read_json(path)?;
    if let Some(obj) = value.as_object_mut() {
        if !obj.contains_key("plant_id") {
            let name = path
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let stem = name.split('.').next().unwrap_or_default().to_string();
            obj.insert("plant_id".into(), stem.into());
        }
    }
    serde_json::from_value(value).map_err(|e| CliError::Malformed {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn write_output(bytes: &[u8], output: &Output, out: &mut dyn Write) -> Result<(), CliError> {
    match &output.out {
        Some(path) => std::fs::write(path, bytes).map_err(CliError::Write),
        None => out.write_all(bytes).map_err(CliError::Write),
    }
}

fn run_command(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { model } => {
            let model = load_model(&model, err)?;
            writeln!(out, "{}: ok", model.id).map_err(CliError::Write)
        }
        Command::Compute(args) => {
            let (model, part) = load_inputs(&args.input, err)?;
            let req = ComputeRequest {
                part,
                scenario: args
                    .scenario
                    .as_deref()
                    .map(read_json::<Scenario>)
                    .transpose()?,
                series: args.series,
                target: args.target,
                budget: args.budget,
            };
            let report = compute_report(&model, &req)?;
            write_output(&report.emit(args.format.into()), &args.output, out)
        }
        Command::Whatif {
            input,
            scenarios,
            output,
        } => {
            let (model, part) = load_inputs(&input, err)?;
            let scenarios = scenarios
                .iter()
                .map(|p| read_json(p))
                .collect::<Result<_, _>>()?;
            let report = whatif_report(&model, &WhatIfRequest { part, scenarios })?;
            write_output(&to_json_bytes(&report), &output, out)
        }
        Command::Sweep {
            input,
            lever,
            values,
            target,
            output,
        } => {
            let (model, part) = load_inputs(&input, err)?;
            let report = sweep_report(
                &model,
                &SweepRequest {
                    part,
                    lever,
                    values,
                    target,
                },
            )?;
            write_output(&to_json_bytes(&report), &output, out)
        }
        Command::Bench {
            input,
            rates,
            output,
        } => {
            let (model, part) = load_inputs(&input, err)?;
            let tables = rates
                .iter()
                .map(|p| read_rate_table(p))
                .collect::<Result<_, _>>()?;
            let report = bench_report(&model, &BenchRequest { part, tables })?;
            write_output(&to_json_bytes(&report), &output, out)
        }
        Command::Serve {
            port,
            models,
            host,
            cors,
        } => serve(&host, port, &models, cors.as_deref(), err),
    }
}

fn serve(
    host: &str,
    port: u16,
    models: &Path,
    cors: Option<&str>,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let cors = cors
        .map(|o| {
            castcost_service::cors_origin(o)
                .map_err(|e| CliError::Usage(format!("--cors `{o}`: {e}")))
        })
        .transpose()?;
    let registry = castcost_service::load_models(models).map_err(|source| CliError::Read {
        path: models.to_path_buf(),
        source,
    })?;
    for e in registry.load_errors() {
        let _ = writeln!(err, "skipped {}: {}", e.file.display(), e.message);
    }
    let runtime = tokio::runtime::Runtime::new().map_err(CliError::Serve)?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .map_err(CliError::Serve)?;
        let addr = listener.local_addr().map_err(CliError::Serve)?;
        let _ = writeln!(err, "serving {} model(s) on http://{addr}", registry.len());
        let _ = err.flush();
        castcost_service::serve(listener, Arc::new(registry), cors)
            .await
            .map_err(CliError::Serve)
    })
}

/// Runs the tool on `args` (program name first) and returns the exit
/// code: 0 on success, 1 on diagnostics or engine failures, 2 on usage
/// errors.
pub fn cli_main<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    if cli.verbose {
        let _ = writeln!(err, "castcost {}", env!("CARGO_PKG_VERSION"));
    }
    match run_command(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
