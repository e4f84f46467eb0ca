use anyhow::Result;
use avscan_cli::commands::{self, DumpWhat, Outcome, EXIT_FATAL};
use avscan_cli::config::{resolve, FileConfig, Format, Overrides};
use avscan_core::rdr::ScanMode;
use avscan_core::vuln::VulnType;
use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "avscan", version, about = "Signature and rule based vulnerability scanner for Solidity")]
struct Cli {
    /// Settings file (default: ./avscan.toml when present)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct MatchArgs {
    /// AVS store directory (default: bundled store)
    #[arg(long)]
    avs_dir: Option<PathBuf>,
    #[arg(long)]
    eta: Option<f64>,
    /// Window step (default: half the signature length)
    #[arg(long)]
    itv: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Scan files or directories and report findings
    Scan {
        #[command(flatten)]
        m: MatchArgs,
        #[arg(long, conflicts_with = "avs_only")]
        rules_only: bool,
        #[arg(long)]
        avs_only: bool,
        /// Defense mechanisms to ignore, e.g. DM3,DM5 or all
        #[arg(long, value_delimiter = ',')]
        disable_dm: Option<Vec<String>>,
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Learn signatures from labeled vulnerable sources
    Learn {
        #[arg(long)]
        vuln_type: VulnType,
        #[arg(long)]
        cutoff: Option<u32>,
        /// Output store directory
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Match functions against the signature store
    Match {
        #[command(flatten)]
        m: MatchArgs,
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// File-similarity histogram of a corpus of per-account directories
    Similarity {
        #[arg(long, value_enum)]
        format: Option<Format>,
        dir: PathBuf,
    },
    /// Print normalized AST, IR or CFG of the functions in a file
    Dump {
        #[arg(long, value_enum, default_value = "ir")]
        what: DumpWhat,
        /// Only this function (`name` or `Contract.name`)
        #[arg(long)]
        function: Option<String>,
        path: PathBuf,
    },
}

fn overrides(m: MatchArgs) -> Overrides {
    Overrides { eta: m.eta, itv: m.itv, avs_dir: m.avs_dir, format: m.format, ..Default::default() }
}

fn run(cli: Cli) -> Result<Outcome> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.cmd {
        Cmd::Scan { m, rules_only, avs_only, disable_dm, paths } => {
            let mode = if rules_only {
                Some(ScanMode::RulesOnly)
            } else if avs_only {
                Some(ScanMode::AvsOnly)
            } else {
                None
            };
            let s = resolve(Overrides { mode, disable_dm, ..overrides(m) }, file);
            commands::cmd_scan(&paths, &s)
        }
        Cmd::Learn { vuln_type, cutoff, out, paths } => {
            let s = resolve(Overrides { cutoff, ..Default::default() }, file);
            commands::cmd_learn(&paths, vuln_type, s.cutoff, &out)
        }
        Cmd::Match { m, paths } => commands::cmd_match(&paths, &resolve(overrides(m), file)),
        Cmd::Similarity { format, dir } => {
            let s = resolve(Overrides { format, ..Default::default() }, file);
            commands::cmd_similarity(&dir, s.format)
        }
        Cmd::Dump { what, function, path } => commands::cmd_dump(&path, what, function.as_deref()),
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(o) => {
            print!("{}", o.stdout);
            o.code
        }
        Err(e) => {
            eprintln!("avscan: {:#}", e);
            EXIT_FATAL
        }
    };
    let _ = std::io::stdout().flush();
    std::process::exit(code);
}
