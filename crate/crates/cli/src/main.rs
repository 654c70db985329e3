use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use deltacolor::generate::{generate, GenKind, GeneratorSpec};
use deltacolor::graph::{check_coloring, coloring_to_text, parse_coloring};
use deltacolor::pipeline::{run, RunConfig};
use deltacolor::report::build_report;
use deltacolor::stats::{self, Suite};
use deltacolor::{Error, Graph};

/// Distributed Delta-coloring on a simulated bandwidth-limited network.
#[derive(Parser)]
#[command(name = "deltacolor", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a generated graph file.
    Generate {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Color a graph; writes the coloring and a JSON report.
    Run {
        /// Graph file; if absent the graph is generated from --gen.
        #[arg(long)]
        graph: Option<PathBuf>,
        #[command(flatten)]
        gen: GenArgs,
        /// Run seed (defaults to --seed).
        #[arg(long)]
        run_seed: Option<u64>,
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        strict_budget: bool,
        /// JSON config overriding defaults (fields of the run configuration).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Report path; the coloring goes next to it with extension .col.
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-check a coloring file against a graph file.
    Verify {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        coloring: PathBuf,
    },
    /// Monte Carlo suites; writes CSV.
    Stats {
        /// slack | pair-success | lll-l3 | lll-slack | non-edge-hitting | matching
        #[arg(long)]
        suite: String,
        #[command(flatten)]
        gen: GenArgs,
        /// Number of seeded repetitions.
        #[arg(long, default_value_t = 20)]
        runs: u64,
        /// Samples per point for the probability suites.
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Clone)]
struct GenArgs {
    #[arg(long = "gen", default_value = "random_regular")]
    kind: String,
    #[arg(long, default_value_t = 16)]
    delta: usize,
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Planted AC count (planted_acd, ordinary_lattice).
    #[arg(long, default_value_t = 10)]
    acs: usize,
    /// External degree of planted ACs.
    #[arg(long, default_value_t = 1)]
    ext: usize,
    #[arg(long, default_value_t = 3)]
    layers: usize,
    #[arg(long, default_value_t = 1.0 / 172.0)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl GenArgs {
    fn spec(&self) -> Result<GeneratorSpec, Error> {
        let kind: GenKind = self.kind.parse()?;
        Ok(GeneratorSpec { kind, delta: self.delta, n: self.n, acs: self.acs, ext: vec![self.ext], layers: self.layers, eps: self.eps, seed: self.seed })
    }
}

/// Exit codes: 0 ok, 1 verification failure, 2 bad input, 3 escalation cap hit.
enum Fail {
    Verify(String),
    Input(anyhow::Error),
    Escalation(String),
}

impl From<anyhow::Error> for Fail {
    fn from(e: anyhow::Error) -> Self {
        Fail::Input(e)
    }
}

fn input_err(e: Error) -> Fail {
    match e {
        Error::Parse { .. } | Error::IllegalSpec(_) | Error::NotColorable(_) => Fail::Input(e.into()),
        other => Fail::Escalation(other.to_string()),
    }
}

fn read_graph(p: &Path) -> Result<Graph, Fail> {
    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    Graph::parse(&text).map_err(|e| Fail::Input(anyhow::Error::from(e).context(format!("parsing {}", p.display()))))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match exec(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Verify(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(1)
        }
        Err(Fail::Input(e)) => {
            eprintln!("bad input: {e:#}");
            ExitCode::from(2)
        }
        Err(Fail::Escalation(m)) => {
            eprintln!("escalation: {m}");
            ExitCode::from(3)
        }
    }
}

fn exec(cmd: Cmd) -> Result<(), Fail> {
    match cmd {
        Cmd::Generate { gen, out } => {
            let g = generate(&gen.spec().map_err(input_err)?).map_err(input_err)?;
            fs::write(&out, g.to_text()).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {} (n={}, m={}, Delta={})", out.display(), g.n(), g.m(), g.delta());
            Ok(())
        }
        Cmd::Run { graph, gen, run_seed, strict_budget, config, out } => {
            let g = match graph {
                Some(p) => read_graph(&p)?,
                None => generate(&gen.spec().map_err(input_err)?).map_err(input_err)?,
            };
            let mut cfg: RunConfig = match config {
                Some(p) => serde_json::from_str(&fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?).context("parsing config")?,
                None => RunConfig { eps: gen.eps, ..Default::default() },
            };
            cfg.seed = run_seed.unwrap_or(gen.seed);
            cfg.strict_budget = strict_budget;
            let outcome = run(&g, &cfg).map_err(input_err)?;
            let report = build_report(&g, &cfg, &outcome);
            fs::write(&out, report.to_json()).with_context(|| format!("writing {}", out.display()))?;
            let col = out.with_extension("col");
            fs::write(&col, coloring_to_text(&outcome.colors)).with_context(|| format!("writing {}", col.display()))?;
            println!("proper={} fallback={} rounds={} max_bits={}/{}", report.verdict.proper, report.fallback, report.bandwidth.total_rounds, report.bandwidth.max_bits, report.bandwidth.budget);
            if !report.verdict.ok() {
                return Err(Fail::Verify(report.verdict.defect.clone().unwrap_or_else(|| "report verdict failed".into())));
            }
            if report.flags.iter().any(|f| f.starts_with("brooks_fallback")) {
                return Err(Fail::Escalation("completed by the Brooks fallback oracle".into()));
            }
            Ok(())
        }
        Cmd::Verify { graph, coloring } => {
            let g = read_graph(&graph)?;
            let text = fs::read_to_string(&coloring).with_context(|| format!("reading {}", coloring.display()))?;
            let colors = parse_coloring(&text, g.n()).map_err(input_err)?;
            check_coloring(&g, &colors).map_err(|d| Fail::Verify(d.to_string()))?;
            println!("ok: proper coloring with at most {} colors", g.delta());
            Ok(())
        }
        Cmd::Stats { suite, gen, runs, trials, out } => {
            let suite: Suite = suite.parse().map_err(input_err)?;
            let spec = gen.spec().map_err(input_err)?;
            let table = stats::run_suite(suite, &spec, runs, trials).map_err(input_err)?;
            let mut w = csv::Writer::from_path(&out).with_context(|| format!("writing {}", out.display()))?;
            w.write_record(&table.header).context("csv")?;
            for row in &table.rows {
                w.write_record(row.iter().map(|x| x.to_string())).context("csv")?;
            }
            w.flush().context("csv")?;
            println!("{}", table.summary);
            Ok(())
        }
    }
}
