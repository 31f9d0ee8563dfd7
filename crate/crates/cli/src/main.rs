//! `xguard`: containment, enforcement and fairness checks for XPath
//! write-access policies.
//!
//! Exit codes: 0 for yes, 1 for no, 2 for errors and exhausted budgets.

mod commands;
mod verdict;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use xguard_core::analysis::{AnalysisBudget, DEFAULT_MAX_EXPANSIONS};
use xguard_core::xpath::FragmentId;

#[derive(Parser, Debug)]
#[command(name = "xguard", version, about = "Static analysis for XPath write-access policies")]
struct Cli {
    /// Print the verdict as one JSON object.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads for the fairness search (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_EXPANSIONS)]
    max_expansions: u64,
    /// Largest tree the fairness search may build.
    #[arg(long, global = true)]
    max_nodes: Option<usize>,
    /// Report wall-clock time in the stats.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Fragment {
    Linear,
    Filter,
}

impl Fragment {
    fn id(self) -> FragmentId {
        match self {
            Fragment::Linear => FragmentId::linear(),
            Fragment::Filter => FragmentId::filter_paths(),
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Is every node selected by P1 also selected by P2?
    Contains { p1: String, p2: String },
    /// Do P1 and P2 select a common node in some tree?
    Overlaps { p1: String, p2: String },
    /// Is every dynamically allowed update covered by a statically allowed capability?
    Fairness {
        policy: PathBuf,
        #[arg(long, value_enum, default_value_t = Fragment::Filter)]
        fragment: Fragment,
    },
    /// Is a capability such as `delete //a[b]` allowed on every tree?
    Enforce { policy: PathBuf, capability: String },
    /// List the allowed updates on a concrete tree.
    Dynamic { policy: PathBuf, tree: PathBuf },
    /// Find a statically allowed capability covering one update.
    Cover {
        policy: PathBuf,
        tree: PathBuf,
        update: String,
        #[arg(long, value_enum, default_value_t = Fragment::Filter)]
        fragment: Fragment,
    },
    /// Evaluate a path on a tree and list the selected nodes.
    Eval { path: String, tree: PathBuf },
    /// Bounded containment by evaluating both paths on every small tree.
    OracleContains {
        p1: String,
        p2: String,
        /// Tree size bound.
        #[arg(long, default_value_t = 6)]
        nodes: usize,
        /// Element names (default: the paths' names plus a fresh one).
        #[arg(long, value_delimiter = ',')]
        alphabet: Option<Vec<String>>,
    },
    /// Bounded homomorphism-closure check of a policy's allowed sets.
    OracleFairness {
        policy: PathBuf,
        #[arg(long, default_value_t = 6)]
        nodes: usize,
        #[arg(long, value_delimiter = ',')]
        alphabet: Option<Vec<String>>,
    },
}

fn run(cli: &Cli) -> commands::Outcome {
    let budget = AnalysisBudget {
        max_expansions: cli.max_expansions,
        max_nodes: cli.max_nodes,
    };
    match &cli.command {
        Command::Contains { p1, p2 } => commands::contains(p1, p2, &budget),
        Command::Overlaps { p1, p2 } => commands::overlaps_cmd(p1, p2),
        Command::Fairness { policy, fragment } => {
            commands::fairness(policy, &fragment.id(), &budget)
        }
        Command::Enforce { policy, capability } => commands::enforce(policy, capability, &budget),
        Command::Dynamic { policy, tree } => commands::dynamic(policy, tree),
        Command::Cover {
            policy,
            tree,
            update,
            fragment,
        } => commands::cover(policy, tree, update, &fragment.id(), &budget),
        Command::Eval { path, tree } => commands::eval_cmd(path, tree),
        Command::OracleContains {
            p1,
            p2,
            nodes,
            alphabet,
        } => commands::oracle_contains(p1, p2, alphabet, *nodes),
        Command::OracleFairness {
            policy,
            nodes,
            alphabet,
        } => commands::oracle_fairness(policy, alphabet, *nodes),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let start = Instant::now();
    match run(&cli) {
        Ok(mut v) => {
            if cli.timing {
                v.stats.elapsed_ms = Some(start.elapsed().as_millis());
            }
            let mut out = std::io::stdout().lock();
            if out.write_all(v.render(cli.json).as_bytes()).is_err() {
                return ExitCode::from(2);
            }
            ExitCode::from(v.answer.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
