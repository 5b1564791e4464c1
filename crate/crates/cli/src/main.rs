//! `lilliput-dfa`: encrypt, inspect tables, and run fault attacks and campaigns
//! from the command line.

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use lilliput_dfa::attack::identify_location;
use lilliput_dfa::campaign::{
    emit_results, parse_seed, run_campaign, run_single, write_csv, write_histogram_csv, AttackModel, CampaignConfig,
    CampaignMode, OutputFormat, DEFAULT_SEED, DEFAULT_TRIALS, SEED_ENV_VAR,
};
use lilliput_dfa::cipher::round_encrypt;
use lilliput_dfa::differential::ddt;
use lilliput_dfa::{
    decrypt, encrypt, expand_key, faulty_encrypt, invert_subkeys, Anchor, CipherState, FaultSpec, MasterKey,
    PartialRoundKey, RoundKey, ROUNDS,
};

#[derive(Parser)]
#[command(
    name = "lilliput-dfa",
    version,
    about = "LILLIPUT cipher and differential fault attack workbench"
)]
struct Cli {
    /// Print intermediate values (round states, per-fault trace, timings).
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encrypt one 64-bit block.
    Encrypt {
        /// 80-bit master key, 20 hex digits.
        #[arg(long)]
        key: MasterKey,
        /// 16 hex digits.
        #[arg(long)]
        plaintext: CipherState,
    },
    /// Decrypt one 64-bit block.
    Decrypt {
        #[arg(long)]
        key: MasterKey,
        #[arg(long)]
        ciphertext: CipherState,
    },
    /// Print the 30 round keys of a master key.
    ExpandKey {
        #[arg(long)]
        key: MasterKey,
    },
    /// Print the difference distribution table of the S-box.
    Ddt,
    /// Encrypt with one injected fault and show the ciphertext difference.
    Inject {
        #[arg(long)]
        key: MasterKey,
        #[arg(long)]
        plaintext: CipherState,
        /// Fault as r{round}:b{branch}:v{hex}, e.g. r27:b7:va.
        #[arg(long)]
        fault: FaultSpec,
    },
    /// Run one seeded attack end to end and recover the master key.
    Attack {
        #[arg(long)]
        model: AttackModel,
        /// Maximum number of faults to inject.
        #[arg(long, default_value_t = 64)]
        faults: usize,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Recover the master key from the last two round keys and a known pair.
    RecoverKey {
        /// Last round key, 8 hex digits.
        #[arg(long)]
        rk29: RoundKey,
        /// Second-to-last round key; `x` marks an unknown nibble, e.g. 4c4x4444.
        #[arg(long)]
        rk28: PartialRoundKey,
        #[arg(long)]
        plaintext: CipherState,
        #[arg(long)]
        ciphertext: CipherState,
    },
    /// Run a Monte-Carlo campaign and report the success rate.
    Campaign(CampaignArgs),
}

#[derive(Args)]
struct SeedArg {
    /// RNG seed, decimal or 0x-prefixed hex.
    #[arg(long, env = SEED_ENV_VAR, value_parser = |s: &str| parse_seed(s), default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct CampaignArgs {
    #[arg(long)]
    model: AttackModel,
    /// Fault budget per trial; the cap in distribution mode.
    #[arg(long)]
    faults: usize,
    /// Model 1 only: faults for the last and second-to-last round key.
    #[arg(long, value_parser = parse_alloc)]
    alloc: Option<(usize, usize)>,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: u64,
    #[command(flatten)]
    seed: SeedArg,
    /// `fixed` injects exactly the budget; `distribution` stops at the first
    /// fault that pins the subkeys and records how many were needed.
    #[arg(long, default_value = "fixed")]
    mode: CampaignMode,
    /// Output file. Without it the results go to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
}

fn parse_alloc(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected a,b, got {s:?}"))?;
    let n = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|e| format!("invalid count {v:?}: {e}"))
    };
    Ok((n(a)?, n(b)?))
}

fn run(cli: Cli) -> Result<bool> {
    let mut out = io::stdout().lock();
    match cli.command {
        Command::Encrypt { key, plaintext } => {
            let rks = expand_key(&key);
            if cli.verbose {
                let mut s = plaintext;
                for (r, rk) in rks.iter().enumerate() {
                    s = round_encrypt(&s, rk, r + 1 < ROUNDS);
                    writeln!(out, "round {r:>2}  rk {rk}  state {s}")?;
                }
            }
            writeln!(out, "{}", encrypt(&plaintext, &rks)?)?;
        }
        Command::Decrypt { key, ciphertext } => {
            writeln!(out, "{}", decrypt(&ciphertext, &expand_key(&key))?)?;
        }
        Command::ExpandKey { key } => {
            for (r, rk) in expand_key(&key).iter().enumerate() {
                writeln!(out, "RK{r:<2} {rk}")?;
            }
        }
        Command::Ddt => write!(out, "{}", ddt())?,
        Command::Inject { key, plaintext, fault } => {
            let rks = expand_key(&key);
            let c = encrypt(&plaintext, &rks)?;
            let cf = faulty_encrypt(&plaintext, &rks, &fault)?;
            let dc = c.diff(&cf);
            writeln!(out, "correct    {c}\nfaulty     {cf}\ndifference {dc}")?;
            if fault.round == 27 && !dc.is_zero() {
                writeln!(out, "location   {}", identify_location(&dc)?)?;
            }
        }
        Command::Attack { model, faults, seed } => {
            let run = run_single(model, seed.seed, faults);
            writeln!(out, "master key {}", run.master_key)?;
            writeln!(out, "plaintext  {}  ciphertext {}", run.plaintext, run.ciphertext)?;
            if cli.verbose {
                for line in &run.trace {
                    writeln!(out, "{line}")?;
                }
            }
            writeln!(out, "faults     {}", run.faults.len())?;
            match &run.recovered {
                Ok(o) => writeln!(
                    out,
                    "recovered  {} (rank {}, kernel {}, candidate {} of {})",
                    o.key,
                    o.rank,
                    o.kernel_dim,
                    o.tried,
                    1u64 << o.kernel_dim
                )?,
                Err(e) => writeln!(out, "recovery failed: {e}")?,
            }
            return Ok(run.succeeded());
        }
        Command::RecoverKey {
            rk29,
            rk28,
            plaintext,
            ciphertext,
        } => {
            let o = invert_subkeys(&rk29, &rk28, &Anchor { plaintext, ciphertext })?;
            if cli.verbose {
                writeln!(out, "rank {} kernel {} tried {}", o.rank, o.kernel_dim, o.tried)?;
            }
            writeln!(out, "{}", o.key)?;
        }
        Command::Campaign(a) => campaign(a, cli.verbose, &mut out)?,
    }
    Ok(true)
}

fn campaign(a: CampaignArgs, verbose: bool, out: &mut impl Write) -> Result<()> {
    let cfg = CampaignConfig {
        model: a.model,
        trials: a.trials,
        fault_budget: a.faults,
        allocation: a.alloc,
        seed: a.seed.seed,
        mode: a.mode,
    };
    cfg.validate()?;
    let stats = run_campaign(&cfg)?;
    eprintln!("{stats}");
    if verbose {
        if let Some(m) = stats.mean_faults() {
            eprintln!("mean faults over successful trials: {m:.3}");
        }
    }
    match (&a.out, a.format) {
        (Some(path), format) => {
            for p in emit_results(&stats, format, path).with_context(|| format!("writing {}", path.display()))? {
                eprintln!("wrote {}", p.display());
            }
        }
        (None, OutputFormat::Json) => writeln!(out, "{}", stats.to_json()?)?,
        (None, OutputFormat::Csv) => {
            write_csv(std::slice::from_ref(&stats), &mut *out)?;
            if !stats.histogram.is_empty() {
                writeln!(out)?;
                write_histogram_csv(&stats, &mut *out)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
