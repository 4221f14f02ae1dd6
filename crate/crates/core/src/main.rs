use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use qvrp::geometry::Dataset;
use qvrp::pipeline::{
    emit_report, exact_report, generate_dataset, run_benchmark, solve_hierarchical, PipelineConfig,
    RUNS_FILE,
};

#[derive(Parser)]
#[command(
    name = "qvrp",
    version,
    about = "Hierarchical QAOA routing for clustered VRP instances"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a clustered 12-customer instance.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Output file (.toml or .json).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the three-stage solve once.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        json: bool,
    },
    /// Repeat the solve with run-indexed seeds and write reports.
    Benchmark {
        #[command(flatten)]
        common: Common,
        /// Report directory (overrides `output_dir`).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Exhaustive optima for every stage.
    Exact {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset file; defaults to the built-in 12-customer example.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    otsp_layers: Option<usize>,
    #[arg(long)]
    vrp_layers: Option<usize>,
    /// Shots for both quantum stages.
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long)]
    otsp_penalty: Option<f64>,
    #[arg(long)]
    vrp_penalty: Option<f64>,
    /// SPSA iterations for both quantum stages.
    #[arg(long)]
    iterations: Option<usize>,
    /// Run benchmark repetitions on one thread.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.runs {
            cfg.runs = v;
        }
        if let Some(v) = self.otsp_layers {
            cfg.otsp.layers = v;
        }
        if let Some(v) = self.vrp_layers {
            cfg.vrp.layers = v;
        }
        if let Some(v) = self.shots {
            cfg.otsp.shots = v;
            cfg.vrp.shots = v;
        }
        if let Some(v) = self.otsp_penalty {
            cfg.otsp.penalty = v;
        }
        if let Some(v) = self.vrp_penalty {
            cfg.vrp.penalty = v;
        }
        if let Some(v) = self.iterations {
            cfg.otsp.spsa.max_iterations = v;
            cfg.vrp.spsa.max_iterations = v;
        }
        if self.sequential {
            cfg.parallel = false;
        }
        cfg.validate().context("configuration")?;
        Ok(cfg)
    }

    fn dataset(&self) -> Result<Dataset> {
        match &self.dataset {
            Some(p) => Ok(Dataset::load(p)?),
            None => Ok(Dataset::example()),
        }
    }
}

fn print_routes(report_json: String, json: bool, text: String) {
    if json {
        println!("{report_json}");
    } else {
        print!("{text}");
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { common, out } => {
            let cfg = common.config()?;
            let ds = generate_dataset(cfg.seed, &cfg.generator).context("generate")?;
            ds.save(&out)?;
            println!("wrote {}", out.display());
        }
        Command::Solve { common, json } => {
            let cfg = common.config()?;
            let r = solve_hierarchical(&common.dataset()?, &cfg, cfg.seed)?;
            let mut text = String::new();
            for c in &r.clusters {
                text += &format!(
                    "cluster {}  route {:?}  {:.2} km  (optimum {:.2}){}\n",
                    c.label,
                    c.route,
                    c.distance,
                    c.oracle_distance,
                    if c.repaired { "  [repaired]" } else { "" }
                );
            }
            text += &format!(
                "inter-cluster  {}  routes {:?}  {:.2} km  (optimum {:.2}, ratio {:.4}){}\n",
                r.inter.bitstring,
                r.inter.routes,
                r.inter.distance,
                r.inter.oracle_distance,
                r.approximation_ratio,
                if r.inter.repaired { "  [repaired]" } else { "" }
            );
            text += &format!("total {:.2} km\n", r.total);
            print_routes(serde_json::to_string_pretty(&r)?, json, text);
        }
        Command::Benchmark { common, output } => {
            let cfg = common.config()?;
            let dir = output.unwrap_or_else(|| cfg.output_dir.clone());
            let b = run_benchmark(&common.dataset()?, &cfg)?;
            emit_report(&b.reports, &b.stats, &dir)?;
            let s = &b.stats;
            println!(
                "{} runs: inter-cluster {:.2} +- {:.2} km (optimum {:.2}), ratio {:.4}, repaired {:.0}%",
                s.runs,
                s.inter_distance.mean,
                s.inter_distance.std,
                s.inter_oracle_distance,
                s.approximation_ratio.mean,
                100.0 * s.repair_rate
            );
            println!(
                "modal {} ({} runs, {:.2} km); intra-cluster hit rates {:?}",
                s.modal_bitstring, s.modal_count, s.modal_distance, s.intra_hit_rates
            );
            println!("wrote {}", dir.join(RUNS_FILE).display());
        }
        Command::Exact { common, json } => {
            let cfg = common.config()?;
            let r = exact_report(&common.dataset()?, &cfg)?;
            let mut text = String::new();
            for c in &r.clusters {
                text += &format!(
                    "cluster {}  {}  route {:?}  {:.2} km\n",
                    c.label, c.bitstring, c.route, c.distance
                );
            }
            text += &format!(
                "inter-cluster  {}  routes {:?}  {:.2} km\n",
                r.inter.bitstring, r.inter.routes, r.inter.distance
            );
            text += &format!(
                "intra total {:.2} km, total {:.2} km\n",
                r.intra_total, r.total
            );
            print_routes(serde_json::to_string_pretty(&r)?, json, text);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
