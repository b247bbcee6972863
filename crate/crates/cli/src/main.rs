use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use asymparb::cps::{find_arbitrage, find_cps, superreplicate};
use asymparb::halmos_savage::{hs1_find_q0, hs2_find_q0, verify_hs1, verify_hs2};
use asymparb::sde::ExampleSixParams;
use asymparb::sequence::{inf_profile, lemma_l_scan, section6_report, sup_profile, LambdaRule, McConfig};
use asymparb::{io as aio, report, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

/// Consistent price systems, arbitrage and superreplication under
/// proportional costs, with sequence diagnostics.
#[derive(Parser)]
#[command(name = "asymparb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find a consistent price system
    Cps(MarketArgs),
    /// Search for an arbitrage strategy
    Arb(MarketArgs),
    /// Superreplication price of a claim
    Superrep {
        #[command(flatten)]
        market: MarketArgs,
        #[arg(long)]
        claim: PathBuf,
    },
    /// Mixture certificate for a family with large sets
    Hs1(FamilyArgs),
    /// Mixture certificate for a family with small sets
    Hs2(FamilyArgs),
    /// ε–δ profile of a market sequence
    LemmaL(LemmaArgs),
    /// Closed-form and Monte Carlo table for the drifted Brownian market
    Example6(Example6Args),
}

#[derive(Args)]
struct MarketArgs {
    #[arg(long)]
    market: PathBuf,
    /// Overrides the cost level in the market file
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FamilyArgs {
    #[arg(long)]
    family: PathBuf,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Sup,
    Inf,
}

#[derive(Args)]
struct LemmaArgs {
    #[arg(long)]
    sequence: PathBuf,
    /// Comma-separated levels
    #[arg(long, value_delimiter = ',', required = true)]
    epsilon: Vec<f64>,
    #[arg(long, value_enum, default_value = "sup")]
    kind: Kind,
    /// Build payoff certificates where the sup-profile is at or below this
    #[arg(long)]
    certify_below: Option<f64>,
    /// Profile CSV
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary JSON
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct Example6Args {
    /// Comma-separated horizons
    #[arg(long = "T", value_delimiter = ',', required = true)]
    horizons: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    #[arg(long, default_value_t = 0.4)]
    gamma: f64,
    /// zero | threshold_multiple:K | fixed:L
    #[arg(long, default_value = "zero")]
    rule: LambdaRule,
    #[arg(long, default_value_t = 100_000)]
    n_paths: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    grid_points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Full report as JSON
    #[arg(long)]
    summary: Option<PathBuf>,
}

fn emit(out: &Option<PathBuf>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => io::stdout().write_all(text.as_bytes()).context("writing stdout"),
    }
}

fn pretty(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn load(args: &MarketArgs) -> anyhow::Result<(asymparb::market::FiniteMarket, f64)> {
    let market = aio::read_market(&args.market)?;
    let lambda = args.lambda.unwrap_or(market.lambda);
    Ok((market, lambda))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Cps(args) => {
            let (market, lambda) = load(&args)?;
            let cps = find_cps(&market, lambda)?;
            emit(&args.out, &pretty(&json!({ "lambda": lambda, "exists": cps.is_some(), "cps": cps })))
        }
        Command::Arb(args) => {
            let (market, lambda) = load(&args)?;
            let s = find_arbitrage(&market, lambda)?;
            emit(&args.out, &pretty(&json!({ "lambda": lambda, "arbitrage": s.is_some(), "strategy": s })))
        }
        Command::Superrep { market, claim } => {
            let (m, lambda) = load(&market)?;
            let f = aio::read_claim(&claim, &m)?;
            let r = superreplicate(&m, lambda, &f)?;
            emit(
                &market.out,
                &pretty(&json!({
                    "lambda": lambda,
                    "price": r.primal_value,
                    "dual_value": r.dual_value,
                    "duality_gap": r.duality_gap(),
                    "strategy": r.strategy,
                    "witness": r.witness,
                })),
            )
        }
        Command::Hs1(a) => {
            let fam = aio::read_family(&a.family)?;
            let check = verify_hs1(&fam, a.epsilon, a.delta)?;
            let cert = hs1_find_q0(&fam, a.epsilon, a.delta)?;
            emit(&a.out, &pretty(&json!({ "check": check, "certificate": cert })))
        }
        Command::Hs2(a) => {
            let fam = aio::read_family(&a.family)?;
            let check = verify_hs2(&fam, a.epsilon, a.delta)?;
            let cert = hs2_find_q0(&fam, a.epsilon, a.delta)?;
            emit(&a.out, &pretty(&json!({ "check": check, "certificate": cert })))
        }
        Command::LemmaL(a) => {
            let seq = aio::read_sequence(&a.sequence)?;
            let profile = match a.kind {
                Kind::Sup => sup_profile(&seq, &a.epsilon)?,
                Kind::Inf => inf_profile(&seq, &a.epsilon)?,
            };
            let mut summary = report::profile_summary(&profile);
            if let Some(t) = a.certify_below {
                let certs = lemma_l_scan(&seq, &profile, t)?;
                let certs: Vec<_> = certs
                    .into_iter()
                    .map(|(n, eps, c)| json!({ "n": n + 1, "epsilon": eps, "certificate": c }))
                    .collect();
                summary["certificates"] = json!(certs);
            }
            emit(&a.out, &report::profile_csv(&profile))?;
            if let Some(p) = &a.summary {
                fs::write(p, pretty(&summary)).with_context(|| format!("writing {}", p.display()))?;
            }
            Ok(())
        }
        Command::Example6(a) => {
            let params = a
                .horizons
                .iter()
                .map(|&t| ExampleSixParams::new(t, a.eps, a.gamma, 0.0))
                .collect::<Result<Vec<_>, _>>()?;
            let cfg = McConfig {
                n_paths: a.n_paths,
                seed: a.seed,
                grid_points: a.grid_points,
            };
            let rep = section6_report(&params, a.rule, cfg)?;
            emit(&a.out, &report::example6_csv(&rep))?;
            if let Some(p) = &a.summary {
                fs::write(p, pretty(&rep)).with_context(|| format!("writing {}", p.display()))?;
            }
            Ok(())
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("ASYMPARB_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("ASYMPARB_THREADS={v} is not a count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|_| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = match err.downcast_ref::<Error>() {
                Some(Error::InvalidMarket(vs)) => {
                    eprintln!("error: invalid market");
                    for v in vs {
                        eprintln!("  {v}");
                    }
                    2
                }
                Some(e) if e.is_validation() => {
                    eprintln!("error: {e}");
                    2
                }
                _ => {
                    eprintln!("error: {err:#}");
                    1
                }
            };
            ExitCode::from(code)
        }
    }
}
