use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use kt1sim::bfscover::BfsTree;
use kt1sim::exec::ExecMode;
use kt1sim::harness::{
    resolve_output, run_experiment, scaling_study, Algo, ExperimentConfig, FamilySpec,
};
use kt1sim::netgraph::{generate_graph, read_edge_list, write_edge_list, GraphGenSpec, IdScheme};

#[derive(Parser)]
#[command(name = "kt1sim", version, about = "Synchronous KT1 network simulator and experiment harness")]
struct Cli {
    /// Run trials one after another instead of on the thread pool.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a graph and write it as an edge list.
    Gen {
        #[arg(long)]
        family: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "sequential")]
        ids: String,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a BFS tree (JSON) against an edge-list graph.
    Verify {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        tree: PathBuf,
    },
    /// Median message and round ratios of one algorithm across sizes.
    Scale {
        /// Graph family; bare `erdos_renyi` uses p = 2 ln n / n.
        #[arg(long)]
        family: String,
        #[arg(long)]
        algo: String,
        #[arg(long, value_delimiter = ',', default_value = "128,256,512,1024")]
        ns: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<bool> {
    let cli = Cli::parse();
    let mode = if cli.sequential {
        ExecMode::Sequential
    } else {
        ExecMode::Parallel
    };
    match cli.cmd {
        Cmd::Run { config, out } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let mut cfg: ExperimentConfig =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", config.display()))?;
            if out.is_some() {
                cfg.output_path = out;
            }
            let record = run_experiment(&cfg, mode)?;
            for t in &record.trials {
                println!(
                    "seed {:>4}  n {:>5}  rounds {:>8}  messages {:>10}  {}",
                    t.seed,
                    t.n,
                    t.metrics.rounds,
                    t.metrics.messages_total,
                    if t.verdict.pass { "PASS" } else { "FAIL" }
                );
                for d in &t.verdict.diagnostics {
                    println!("    {d}");
                }
            }
            println!("{}", serde_json::to_string_pretty(&record.summary)?);
            if let Some(path) = &cfg.output_path {
                println!("wrote {}", resolve_output(path).display());
            }
            Ok(record.summary.passed == record.summary.trials)
        }
        Cmd::Gen {
            family,
            n,
            seed,
            ids,
            out,
        } => {
            let family: FamilySpec = family.parse()?;
            let ids: IdScheme = ids.parse()?;
            let g = generate_graph(&GraphGenSpec::new(family.at(n), n).with_ids(ids).with_seed(seed))?;
            let text = write_edge_list(&g);
            match out {
                Some(path) => {
                    let path = resolve_output(&path);
                    fs::write(&path, text)?;
                    eprintln!("wrote {} (n = {}, m = {})", path.display(), g.n(), g.m());
                }
                None => print!("{text}"),
            }
            Ok(true)
        }
        Cmd::Verify { graph, tree } => {
            let g = read_edge_list(&fs::read_to_string(&graph)?)?;
            let t: BfsTree = serde_json::from_str(&fs::read_to_string(&tree)?)?;
            match t.verify(&g) {
                Ok(()) => {
                    println!("ok: exact BFS tree from {} (depth {})", t.root, t.depth());
                    Ok(true)
                }
                Err(e) => {
                    println!("mismatch: {e}");
                    Ok(false)
                }
            }
        }
        Cmd::Scale {
            family,
            algo,
            ns,
            seeds,
            csv,
        } => {
            let family: FamilySpec = family.parse()?;
            let algo: Algo = algo.parse().map_err(anyhow::Error::msg)?;
            if ns.is_empty() || seeds.is_empty() {
                bail!("need at least one size and one seed");
            }
            let table = scaling_study(family, algo, &ns, &seeds, mode)?;
            println!("{:>6} {:>7} {:>12} {:>10} {:>10} {:>10}", "n", "passed", "messages", "rounds", "msg_ratio", "rnd_ratio");
            for r in &table.rows {
                let ratio = r.median_message_ratio.map_or("-".to_string(), |x| format!("{x:.4}"));
                println!(
                    "{:>6} {:>3}/{:<3} {:>12.0} {:>10.0} {:>10} {:>10.3}",
                    r.n, r.passed, r.trials, r.median_messages, r.median_rounds, ratio, r.median_round_ratio
                );
            }
            let fmt = |g: Option<f64>| g.map_or("-".to_string(), |g| format!("{g:.2}x"));
            println!(
                "growth: messages {}, rounds {}",
                fmt(table.message_growth()),
                fmt(table.round_growth())
            );
            if let Some(path) = csv {
                let path = resolve_output(&path);
                fs::write(&path, table.to_csv()?)?;
                println!("wrote {}", path.display());
            }
            Ok(table.all_passed())
        }
    }
}
