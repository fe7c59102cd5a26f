use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hkcenter::harness::{self, BenchSpec, EvalOptions, Generator, HarnessError, HarnessResult, OpsLog, Overrides};
use hkcenter::{Config, Mode};

#[derive(Parser)]
#[command(name = "hkcenter", version, about = "Dynamic hierarchical k-center clustering")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Backend, overriding the log header.
    #[arg(long, global = true)]
    mode: Option<Mode>,
    /// Sampling depth of the high-dimensional backend.
    #[arg(long, global = true)]
    ell: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Skip brute-force optima instead of failing on large checkpoints.
    #[arg(long, global = true)]
    no_oracle: bool,
    /// Abort on deletes of absent points and unanswerable queries.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a log and print one line per query.
    Run { file: PathBuf },
    /// Compare clusterings against exact optima at checkpoints.
    Eval {
        file: PathBuf,
        /// Operation counts after which to evaluate.
        #[arg(long, value_delimiter = ',')]
        checkpoints: Vec<usize>,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Corrupt each snapshot with a close pair before measuring.
        #[arg(long)]
        inject_fault: bool,
    },
    /// Time inserts, queries and deletes on generated data.
    Bench {
        #[arg(long, default_value = "uniform")]
        generator: Generator,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 65536)]
        delta: i64,
        #[arg(long, value_delimiter = ',', default_value = "10000,100000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        queries: usize,
        /// CSV destination; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a log and print the dendrogram export.
    Dump { file: PathBuf },
    /// Replay a log and check the family conditions.
    Validate {
        file: PathBuf,
        /// Check after every operation.
        #[arg(long)]
        each: bool,
    },
}

fn load(path: &Path) -> HarnessResult<OpsLog> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    harness::parse_ops(&text)
}

fn create(path: &Path) -> HarnessResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

fn emit_diagnostics(lines: &[String]) {
    for l in lines {
        eprintln!("warning: {l}");
    }
}

fn execute(cli: Cli) -> HarnessResult<i32> {
    let g = &cli.global;
    let over = Overrides { mode: g.mode, ell: g.ell, seed: g.seed };
    let mut stdout = io::stdout().lock();
    match cli.command {
        Command::Run { file } => {
            let log = load(&file)?;
            let r = harness::run(&log, &log.config(&over), g.strict)?;
            emit_diagnostics(&r.diagnostics);
            for line in &r.output {
                writeln!(stdout, "{line}")?;
            }
        }
        Command::Dump { file } => {
            let log = load(&file)?;
            write!(stdout, "{}", harness::dump(&log, &log.config(&over), g.strict)?)?;
        }
        Command::Validate { file, each } => {
            let log = load(&file)?;
            let out = harness::validate(&log, &log.config(&over), g.strict, each)?;
            for v in &out.violations {
                writeln!(stdout, "{v}")?;
            }
            writeln!(
                stdout,
                "checked {} operations at alpha {}: {} violations",
                out.ops_checked,
                out.alpha,
                out.violations.len()
            )?;
            if !out.violations.is_empty() {
                return Ok(1);
            }
        }
        Command::Eval { file, checkpoints, json, csv, inject_fault } => {
            let log = load(&file)?;
            let opts = EvalOptions { checkpoints, no_oracle: g.no_oracle, inject_fault, strict: g.strict };
            let report = harness::eval(&log, &log.config(&over), &opts)?;
            for c in &report.checkpoints {
                let show = |r: Option<f64>| r.map_or("na".to_string(), |v| format!("{v:.6}"));
                writeln!(
                    stdout,
                    "checkpoint ops={} n={} worst_diam_ratio={} worst_center_ratio={} violations={}",
                    c.ops,
                    c.n_distinct,
                    show(c.worst_diam_ratio),
                    show(c.worst_center_ratio),
                    c.violation_count
                )?;
            }
            if let Some(path) = json {
                let mut w = create(&path)?;
                serde_json::to_writer_pretty(&mut w, &report)?;
                writeln!(w)?;
                w.flush()?;
            }
            if let Some(path) = csv {
                harness::write_eval_csv(&report, create(&path)?)?;
            }
        }
        Command::Bench { generator, d, delta, sizes, queries, out } => {
            let mut config = Config::low_dim(d, delta);
            config.mode = g.mode.unwrap_or(Mode::LowDim);
            config.ell = g.ell.unwrap_or(1);
            config.seed = g.seed.unwrap_or(0);
            config.validate()?;
            let rows = harness::bench(&BenchSpec { generator, config, sizes, queries })?;
            match out {
                Some(path) => harness::write_bench_csv(&rows, create(&path)?)?,
                None => harness::write_bench_csv(&rows, &mut stdout)?,
            }
        }
    }
    stdout.flush()?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
