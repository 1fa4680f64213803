//! Command-line front end.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path as FsPath, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use dmm_core::compiler::{check_equivalence, compile};
use dmm_core::network::RunError;
use dmm_core::neuron_lib::builtin_registry;
use dmm_core::{NeuronRegistry, VValue};

use crate::files::{load_events, load_graph, load_network, LoadError, NetworkFile, Overrides};
use crate::json::from_json;
use crate::text::View;
use crate::trace::{JsonlTrace, TraceHeader};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "dmm", version, about = "Run and inspect dataflow matrix machines")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a network file and write a JSON Lines trace.
    Run(RunArgs),
    /// Compile a transformer graph into a network file.
    Compile(CompileArgs),
    /// Check a network, graph, events or value file without running it.
    Validate(ValidateArgs),
    /// Print a V-value in the term-list, prefix-tree and literal views.
    Inspect(InspectArgs),
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    pub network: PathBuf,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub steps: u64,
    /// Overrides the seed stored in the network file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trace destination; standard output when omitted.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Overrides the events file named in the network file.
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Also write the matrix every K ticks (0 writes it only when it changes).
    #[arg(long, default_value_t = 0)]
    pub snapshot_every: u64,
}

#[derive(Debug, clap::Args)]
pub struct CompileArgs {
    pub graph: PathBuf,
    /// Output network file; standard output when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Before writing, run the compiled network against the graph
    /// interpreter for this many ticks and fail on divergence.
    #[arg(long)]
    pub check_steps: Option<u64>,
    /// Events consumed by source nodes during the check.
    #[arg(long)]
    pub events: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FileKind {
    Network,
    Graph,
    Events,
    Value,
}

#[derive(Debug, clap::Args)]
pub struct ValidateArgs {
    pub file: PathBuf,
    #[arg(long, value_enum, default_value_t = FileKind::Network)]
    pub kind: FileKind,
    /// Overrides the events file named in a network file.
    #[arg(long)]
    pub events: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ViewArg {
    All,
    Terms,
    Tree,
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    /// JSON if the file parses as JSON, otherwise any text view.
    Auto,
    Json,
    Terms,
    Tree,
    Literal,
}

#[derive(Debug, clap::Args)]
pub struct InspectArgs {
    pub file: PathBuf,
    #[arg(long, value_enum, default_value_t = ViewArg::All)]
    pub view: ViewArg,
    #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
    pub from: InputFormat,
}

#[derive(Debug)]
pub enum Failure {
    Invalid(String),
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Invalid(_) => EXIT_INVALID,
            Failure::Runtime(_) => EXIT_RUNTIME,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

fn io_failure(path: &FsPath, e: io::Error) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

/// Parses `args` and runs the command, writing to `stdout`/`stderr`.
/// Returns the process exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{rendered}")
            } else {
                write!(stdout, "{rendered}")
            };
            return code;
        }
    };
    match execute(&cli.command, &builtin_registry(), stdout) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message());
            f.exit_code()
        }
    }
}

pub fn execute(command: &Command, registry: &NeuronRegistry, stdout: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Run(args) => cmd_run(args, registry, stdout),
        Command::Compile(args) => cmd_compile(args, registry, stdout),
        Command::Validate(args) => cmd_validate(args, registry, stdout),
        Command::Inspect(args) => cmd_inspect(args, stdout),
    }
}

pub fn cmd_run(args: &RunArgs, registry: &NeuronRegistry, stdout: &mut dyn Write) -> Result<(), Failure> {
    let overrides = Overrides {
        seed: args.seed,
        events: args.events.clone(),
    };
    let spec = load_network(&args.network, registry, &overrides)?;
    let header = TraceHeader {
        seed: spec.seed,
        activity_rule: spec.rule,
        self_referential: spec.self_config.is_some(),
    };
    let mut engine = spec.into_engine(registry.clone());
    match &args.trace {
        Some(path) => {
            let file = File::create(path).map_err(|e| io_failure(path, e))?;
            let mut sink =
                JsonlTrace::new(BufWriter::new(file), &header, args.snapshot_every).map_err(|e| io_failure(path, e))?;
            let result = engine.run(args.steps, &mut sink);
            let flushed = sink.finish().map_err(|e| io_failure(path, e));
            run_result(result, path)?;
            flushed.map(drop)
        }
        None => {
            let path = FsPath::new("<stdout>");
            let mut sink = JsonlTrace::new(BufWriter::new(stdout), &header, args.snapshot_every)
                .map_err(|e| io_failure(path, e))?;
            let result = engine.run(args.steps, &mut sink);
            let flushed = sink.finish().map_err(|e| io_failure(path, e));
            run_result(result, path)?;
            flushed.map(drop)
        }
    }
}

fn run_result(result: Result<(), RunError<io::Error>>, path: &FsPath) -> Result<(), Failure> {
    match result {
        Ok(()) => Ok(()),
        Err(RunError::Engine(e)) => Err(Failure::Runtime(e.to_string())),
        Err(RunError::Sink(e)) => Err(io_failure(path, e)),
    }
}

pub fn cmd_compile(args: &CompileArgs, registry: &NeuronRegistry, stdout: &mut dyn Write) -> Result<(), Failure> {
    let graph = load_graph(&args.graph)?;
    let invalid = |e: &dyn std::fmt::Display| Failure::Invalid(format!("{}: {e}", args.graph.display()));
    let matrix = compile(&graph, registry).map_err(|e| invalid(&e))?;
    if let Some(steps) = args.check_steps {
        let events = match &args.events {
            Some(p) => load_events(p)?,
            None => Vec::new(),
        };
        let report =
            check_equivalence(&graph, registry, &events, steps).map_err(|e| Failure::Runtime(e.to_string()))?;
        if let Some(d) = report.first_divergence {
            return Err(Failure::Runtime(format!(
                "compiled network diverges from the graph at tick {} on node `{}`",
                d.tick, d.node
            )));
        }
    }
    let text = NetworkFile::new(&matrix).to_pretty_json() + "\n";
    match &args.out {
        Some(path) => fs::write(path, text).map_err(|e| io_failure(path, e)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| io_failure(FsPath::new("<stdout>"), e)),
    }
}

pub fn cmd_validate(args: &ValidateArgs, registry: &NeuronRegistry, stdout: &mut dyn Write) -> Result<(), Failure> {
    let summary = match args.kind {
        FileKind::Network => {
            let overrides = Overrides {
                seed: None,
                events: args.events.clone(),
            };
            let spec = load_network(&args.file, registry, &overrides)?;
            format!(
                "network: {} matrix entries, {} initial neurons, {} events",
                spec.matrix.leaf_count(),
                spec.outputs.neuron_count(),
                spec.events.len()
            )
        }
        FileKind::Graph => {
            let graph = load_graph(&args.file)?;
            graph
                .validate(registry)
                .map_err(|e| Failure::Invalid(format!("{}: {e}", args.file.display())))?;
            format!("graph: {} nodes, {} edges", graph.nodes.len(), graph.edges.len())
        }
        FileKind::Events => format!("events: {}", load_events(&args.file)?.len()),
        FileKind::Value => {
            let v = read_value(&args.file, InputFormat::Json)?;
            format!("value: {} leaves, depth {}", v.leaf_count(), v.depth())
        }
    };
    writeln!(stdout, "ok: {}: {summary}", args.file.display()).map_err(|e| io_failure(&args.file, e))
}

fn read_value(path: &FsPath, from: InputFormat) -> Result<VValue, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    let invalid = |msg: String| Failure::Invalid(format!("{}:{msg}", path.display()));
    let json = |text: &str| -> Result<VValue, Failure> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| invalid(format!("{}:{}: {e}", e.line(), e.column())))?;
        from_json(&value).map_err(|e| invalid(format!(" {e}")))
    };
    let view = |v: View| {
        v.parse(&text)
            .map_err(|e| invalid(format!("{}: {}", e.line, e.message)))
    };
    match from {
        InputFormat::Json => json(&text),
        InputFormat::Terms => view(View::Terms),
        InputFormat::Tree => view(View::Tree),
        InputFormat::Literal => view(View::Literal),
        InputFormat::Auto => {
            if serde_json::from_str::<serde_json::Value>(&text).is_ok() {
                return json(&text);
            }
            let trimmed = text.trim_start();
            if trimmed.starts_with('{') {
                view(View::Literal)
            } else if trimmed.starts_with('(') {
                view(View::Terms)
            } else {
                view(View::Tree)
            }
        }
    }
}

pub fn cmd_inspect(args: &InspectArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let v = read_value(&args.file, args.from)?;
    let views: Vec<View> = match args.view {
        ViewArg::All => View::ALL.to_vec(),
        ViewArg::Terms => vec![View::Terms],
        ViewArg::Tree => vec![View::Tree],
        ViewArg::Literal => vec![View::Literal],
    };
    let mut out = String::new();
    for (i, view) in views.iter().enumerate() {
        if views.len() > 1 {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&format!("# {}\n", view.name()));
        }
        out.push_str(&view.print(&v));
        if !out.ends_with('\n') {
            out.push('\n');
        }
    }
    stdout
        .write_all(out.as_bytes())
        .map_err(|e| io_failure(FsPath::new("<stdout>"), e))
}
