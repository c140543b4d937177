//! `odin` — operator CLI for the discovery engine.
//!
//! Every command is deterministic given its flags and input files; all
//! machine-readable output goes to stdout as UTF-8 JSON embedding the
//! resolved run configuration and input digests, while human-readable
//! summaries go to stderr. Errors exit nonzero with one
//! `error: <message>` line on stderr.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "odin", version, about = "Knowledge-graph discovery engine")]
struct Cli {
    /// key=value config file; flags override its entries
    #[arg(long, global = true)]
    config: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a triples file, write the canonical snapshot
    Ingest {
        /// Input JSONL triples file
        input: String,
        /// Output snapshot path (canonical JSONL)
        output: String,
    },
    /// Detect communities and write the three metadata files
    Communities {
        /// Snapshot file
        snapshot: String,
        /// Output directory for communities/bridges/affinity files
        out_dir: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Mine rules, train the plausibility model, persist its weights
    Train {
        snapshot: String,
        /// Weight blob path
        model: String,
        #[arg(long)]
        epochs: Option<u32>,
        #[arg(long)]
        min_support: Option<u64>,
        #[arg(long)]
        min_confidence: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Rank multi-hop paths from seed entities
    Discover(DiscoverArgs),
    /// Re-print one ranked path's score breakdown as a narrative
    Explain {
        /// Report JSON produced by `odin discover`
        report: String,
        /// 1-based rank of the path to explain
        rank: usize,
    },
    /// Evaluation harness over generated fixtures
    Eval(EvalArgs),
}

#[derive(Args)]
struct DiscoverArgs {
    snapshot: String,
    /// Comma-separated seed entity ids
    #[arg(long, value_delimiter = ',', required = true)]
    seeds: Vec<String>,
    #[arg(long)]
    hops: Option<usize>,
    #[arg(long)]
    beam: Option<usize>,
    #[arg(long)]
    top: Option<usize>,
    /// Temporal decay rate per second
    #[arg(long)]
    lambda: Option<f64>,
    /// Force bridge and affinity signals to 1
    #[arg(long)]
    no_bridge: bool,
    /// Force the edge-plausibility signal to 1
    #[arg(long)]
    no_npll: bool,
    /// Force the temporal signal to 1
    #[arg(long)]
    no_temporal: bool,
    /// Allow paths to revisit entities
    #[arg(long)]
    allow_revisit: bool,
    /// RNG seed for all stochastic components
    #[arg(long)]
    seed: Option<u64>,
    /// Community metadata directory (optional; absent means fallback)
    #[arg(long)]
    metadata: Option<String>,
    /// Weight blob path (optional; absent means fallback scoring)
    #[arg(long)]
    model: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    /// ablation | recall | oracle
    #[arg(long, default_value = "ablation")]
    mode: String,
    #[arg(long)]
    entities: Option<usize>,
    #[arg(long)]
    communities: Option<usize>,
    #[arg(long)]
    bridges: Option<usize>,
    #[arg(long)]
    graphs: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    beam_widths: Option<Vec<usize>>,
    #[arg(long)]
    hops: Option<usize>,
    #[arg(long)]
    top: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() {
    let cli = Cli::parse();
    let cfg_file = match config::load_config_file(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    };
    let result = match cli.command {
        Command::Ingest { input, output } => commands::cmd_ingest(&input, &output),
        Command::Communities {
            snapshot,
            out_dir,
            seed,
        } => commands::cmd_communities(&snapshot, &out_dir, &cfg_file, seed),
        Command::Train {
            snapshot,
            model,
            epochs,
            min_support,
            min_confidence,
            seed,
        } => commands::cmd_train(
            &snapshot,
            &model,
            &cfg_file,
            epochs,
            min_support,
            min_confidence,
            seed,
        ),
        Command::Discover(args) => commands::cmd_discover(&args, &cfg_file),
        Command::Explain { report, rank } => commands::cmd_explain(&report, rank),
        Command::Eval(args) => commands::cmd_eval(&args, &cfg_file),
    };
    if let Err(e) = result {
        // single machine-parsable line
        eprintln!("error: {}", format!("{e}").replace('\n', " "));
        std::process::exit(1);
    }
}
