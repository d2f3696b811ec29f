//! The `optspan` command line: replication runs, arbitrage pricing, and the
//! lattice verification harness.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::lattice::{verify_green_jarrow, verify_order_closed_iff_sequential, SublatticeSpec, VerificationReport, Witness};
use crate::market::{build_market, Claim, FiniteMarket};
use crate::pricing::{no_free_lunch, price_bounds, NflResult, PriceBounds, PricingFunctional};
use crate::replication::{completion_demo, CompletionOutcome};
use crate::span::{z_identity_residual, OptionPortfolio};
use crate::topology::{parse_norm_list, NormSpec, PairingBank, StatePriceDensity};
use crate::tol;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_MEASURABLE: i32 = 2;
pub const EXIT_NOT_UNIQUE: i32 = 3;
pub const EXIT_FREE_LUNCH: i32 = 4;
pub const EXIT_VERIFY_FAILED: i32 = 5;

pub const LEMMAS: [&str; 4] = ["o-closed", "green-jarrow", "z-identity", "mode-agreement"];

#[derive(Debug, Parser)]
#[command(name = "optspan", version, about = "Option spanning, order closure checks and arbitrage pricing on finite markets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Replicate a claim with options and report convergence in every mode.
    Replicate {
        #[arg(long)]
        market: PathBuf,
        /// square, abs-dev:c, indicator:r, call:k, identity, one, or a vector
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 20)]
        n_max: u32,
        #[arg(long, default_value = "L1,L2,Linf")]
        norms: String,
        /// default, strict=S,sparse=Z, or a JSON file with a list of weight vectors
        #[arg(long, default_value = "default")]
        bank: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Arbitrage bounds for a claim given bond and call prices.
    Price {
        #[arg(long)]
        market: PathBuf,
        #[arg(long)]
        pricing: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run one verification harness.
    Verify {
        #[arg(long)]
        market: PathBuf,
        #[arg(long)]
        lemma: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// strikes for z-identity
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-1,0,0.5,1,2")]
        strikes: Vec<f64>,
        /// corrupt computed limits to check that o-closed detects it
        #[arg(long)]
        mutate: bool,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Deserialize)]
struct MarketFile {
    probs: Vec<f64>,
    underlying: Vec<f64>,
    #[serde(default)]
    labels: Option<Vec<String>>,
}

/// A failure that ends a command with a diagnostic and exit code 1.
#[derive(Debug)]
pub struct CliError(pub String);

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        CliError(format!("{}: field `{field}`: {}", path.display(), e.inner()))
    })
}

pub fn load_market(path: &Path) -> CliResult<FiniteMarket> {
    let raw: MarketFile = read_json(path)?;
    let market = build_market(raw.probs, raw.underlying)?;
    Ok(match raw.labels {
        Some(l) => market.with_labels(l)?,
        None => market,
    })
}

/// Parses a claim spec against the market's underlying `f`.
pub fn parse_claim_spec(spec: &str, market: &FiniteMarket) -> CliResult<Claim> {
    let f = market.underlying();
    let s = spec.trim();
    let arg = |rest: &str| -> CliResult<f64> {
        rest.trim().parse::<f64>().map_err(|_| CliError(format!("bad number in claim spec `{spec}`")))
    };
    let claim = match s.split_once(':') {
        None if s == "square" => f.map(|x| x * x),
        None if s == "identity" || s == "f" => f.clone(),
        None if s == "one" || s == "1" || s == "𝟙" => Claim::one(market.len()),
        Some(("abs-dev", c)) => {
            let c = arg(c)?;
            f.map(|x| (x - c).abs())
        }
        Some(("indicator", r)) => {
            let r = arg(r)?;
            f.map(|x| if x > r { 1.0 } else { 0.0 })
        }
        Some(("call", k)) => OptionPortfolio::call(arg(k)?).payoff(market),
        _ => {
            let inner = s.trim_start_matches('[').trim_end_matches(']');
            let v = inner
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| CliError(format!("unknown claim spec `{spec}`")))?;
            Claim::new(v)
        }
    };
    claim.check_len(market.len())?;
    Ok(claim)
}

fn parse_bank(spec: &str, n: usize, seed: u64) -> CliResult<PairingBank> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if spec == "default" {
        return Ok(PairingBank::default_for(n, &mut rng));
    }
    if spec.contains('=') {
        let (mut strict, mut sparse) = (8, 4);
        for part in spec.split(',') {
            let (k, v) = part.split_once('=').ok_or_else(|| CliError(format!("bad bank spec `{spec}`")))?;
            let v: usize = v.trim().parse().map_err(|_| CliError(format!("bad bank count `{v}`")))?;
            match k.trim() {
                "strict" => strict = v,
                "sparse" => sparse = v,
                other => return Err(CliError(format!("unknown bank key `{other}`"))),
            }
        }
        return Ok(PairingBank::random(n, strict, sparse, &mut rng));
    }
    let weights: Vec<Vec<f64>> = read_json(Path::new(spec))?;
    let densities = weights
        .into_iter()
        .map(|w| {
            if w.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: w.len() });
            }
            StatePriceDensity::new(w)
        })
        .collect::<crate::Result<Vec<_>>>()?;
    Ok(PairingBank::new(densities)?)
}

fn write_file(dir: &Option<PathBuf>, name: &str, contents: &str) -> CliResult<()> {
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(|e| CliError(format!("{}: {e}", dir.display())))?;
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable report")
}

fn tolerances() -> Vec<(&'static str, f64)> {
    vec![
        ("level_rel", tol::LEVEL_REL),
        ("converged", tol::CONVERGED),
        ("identity", tol::IDENTITY),
        ("unique_rel", tol::UNIQUE_REL),
        ("density_floor", tol::DENSITY_FLOOR),
    ]
}

#[derive(Serialize)]
struct RunInfo {
    seed: u64,
    version: &'static str,
    tolerances: std::collections::BTreeMap<String, f64>,
}

fn run_info(seed: u64) -> RunInfo {
    RunInfo {
        seed,
        version: crate::VERSION,
        tolerances: tolerances().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
    }
}

#[derive(Serialize)]
struct ReplicateReport<'a> {
    #[serde(flatten)]
    info: RunInfo,
    target: &'a str,
    norms: Vec<String>,
    #[serde(flatten)]
    outcome: &'a CompletionOutcome,
}

#[allow(clippy::too_many_arguments)]
fn cmd_replicate(
    market: &Path,
    target: &str,
    n_max: u32,
    norms: &str,
    bank: &str,
    seed: u64,
    out_dir: &Option<PathBuf>,
    format: Format,
    out: &mut dyn Write,
) -> CliResult<i32> {
    let market = load_market(market)?;
    let claim = parse_claim_spec(target, &market)?;
    let norm_specs: Vec<NormSpec> = parse_norm_list(norms)?;
    let bank = parse_bank(bank, market.len(), seed)?;
    let outcome = completion_demo(&market, &[claim], &norm_specs, &bank, n_max)?.remove(0);
    let report = ReplicateReport {
        info: run_info(seed),
        target,
        norms: norm_specs.iter().map(|s| s.to_string()).collect(),
        outcome: &outcome,
    };
    let csv = outcome.report.to_csv();
    let json = to_json(&report);
    write_file(out_dir, "convergence.csv", &csv)?;
    write_file(out_dir, "portfolio.json", &to_json(&outcome.portfolio))?;
    write_file(out_dir, "report.json", &json)?;
    let _ = match format {
        Format::Csv => write!(out, "{csv}"),
        Format::Json => writeln!(out, "{json}"),
    };
    Ok(if outcome.replicable { EXIT_OK } else { EXIT_NOT_MEASURABLE })
}

#[derive(Serialize)]
struct PriceReport<'a> {
    #[serde(flatten)]
    info: RunInfo,
    target: &'a str,
    #[serde(flatten)]
    bounds: &'a PriceBounds,
}

#[derive(Serialize)]
struct FreeLunchReport<'a> {
    #[serde(flatten)]
    info: RunInfo,
    free_lunch: bool,
    #[serde(flatten)]
    result: &'a NflResult,
}

fn cmd_price(market: &Path, pricing: &Path, target: &str, out_dir: &Option<PathBuf>, out: &mut dyn Write) -> CliResult<i32> {
    let market = load_market(market)?;
    let pi: PricingFunctional = read_json(pricing)?;
    let claim = parse_claim_spec(target, &market)?;
    let nfl = no_free_lunch(&pi, &market)?;
    if !nfl.is_nfl() {
        let json = to_json(&FreeLunchReport { info: run_info(0), free_lunch: true, result: &nfl });
        write_file(out_dir, "price.json", &json)?;
        let _ = writeln!(out, "{json}");
        return Ok(EXIT_FREE_LUNCH);
    }
    let bounds = price_bounds(&claim, &pi, &market)?;
    let json = to_json(&PriceReport { info: run_info(0), target, bounds: &bounds });
    write_file(out_dir, "price.json", &json)?;
    let _ = writeln!(out, "{json}");
    Ok(if bounds.unique { EXIT_OK } else { EXIT_NOT_UNIQUE })
}

fn verify_z_identity(market: &FiniteMarket, strikes: &[f64], seed: u64) -> VerificationReport {
    let mut report = VerificationReport::new("z-identity", strikes.len(), seed, &[("identity", tol::IDENTITY)]);
    for (t, &k) in strikes.iter().enumerate() {
        let residual = z_identity_residual(market, k);
        let form = if k >= 1.0 { "0".to_string() } else { format!("{:?} (f - {:?})^+", 1.0 - k, k / (1.0 - k)) };
        report.witnesses.push(Witness { cell: None, expression: format!("k = {k:?}: (f - k(f + 1))^+ = {form}, residual {residual:e}") });
        if residual.is_nan() || residual > tol::IDENTITY {
            report.fail(crate::lattice::Counterexample {
                trial: t,
                check: "z-identity".into(),
                cell: None,
                states: None,
                detail: format!("k = {k:?}: residual {residual:e}"),
            });
        }
    }
    report
}

/// Random claims, half of them constant on the level sets of `f`: the
/// membership verdict, sup convergence, norm convergence and pairing
/// convergence of the ladder toward each must all agree.
fn verify_mode_agreement(market: &FiniteMarket, trials: usize, seed: u64) -> crate::Result<VerificationReport> {
    use rand::Rng;
    let mut report = VerificationReport::new("mode-agreement", trials, seed, &[("converged", tol::CONVERGED)]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let part = market.sigma_f();
    let targets: Vec<Claim> = (0..trials)
        .map(|t| {
            if t % 2 == 0 {
                let vals: Vec<f64> = (0..part.num_cells()).map(|_| rng.gen_range(-2.0..2.0)).collect();
                part.claim_from_cell_values(&vals)
            } else {
                Claim::new((0..market.len()).map(|_| rng.gen_range(-2.0..2.0)).collect())
            }
        })
        .collect();
    let bank = PairingBank::default_for(market.len(), &mut rng);
    let norms = [NormSpec::Lp(1.0), NormSpec::Lp(2.0), NormSpec::Linf];
    let outcomes = completion_demo(market, &targets, &norms, &bank, 40)?;
    for o in &outcomes {
        let flags = &o.report.converged;
        if !flags.agree() || flags.sup != o.replicable {
            report.fail(crate::lattice::Counterexample {
                trial: o.index,
                check: "mode agreement".into(),
                cell: None,
                states: None,
                detail: format!("replicable={} flags={flags:?}", o.replicable),
            });
        }
    }
    let members = outcomes.iter().filter(|o| o.replicable).count();
    report.witnesses.push(Witness {
        cell: None,
        expression: format!("{members} of {trials} claims replicable; all modes agree on each"),
    });
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    market: &Path,
    lemma: &str,
    seed: u64,
    trials: usize,
    strikes: &[f64],
    mutate: bool,
    out_dir: &Option<PathBuf>,
    out: &mut dyn Write,
) -> CliResult<i32> {
    if !LEMMAS.contains(&lemma) {
        return Err(CliError(format!("unknown lemma `{lemma}`; valid names: {}", LEMMAS.join(", "))));
    }
    let market = load_market(market)?;
    let spec = SublatticeSpec::of_underlying(&market);
    let report = match lemma {
        "o-closed" => verify_order_closed_iff_sequential(&spec, trials, seed, mutate),
        "green-jarrow" => verify_green_jarrow(&spec, trials, seed),
        "z-identity" => verify_z_identity(&market, strikes, seed),
        _ => verify_mode_agreement(&market, trials, seed)?,
    };
    let json = to_json(&report);
    write_file(out_dir, "verify.json", &json)?;
    let _ = writeln!(out, "{json}");
    Ok(if report.passed { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    let result = match &cli.command {
        Command::Replicate { market, target, n_max, norms, bank, seed, out_dir, format } => {
            cmd_replicate(market, target, *n_max, norms, bank, *seed, out_dir, *format, out)
        }
        Command::Price { market, pricing, target, out_dir } => cmd_price(market, pricing, target, out_dir, out),
        Command::Verify { market, lemma, seed, trials, strikes, mutate, out_dir } => {
            cmd_verify(market, lemma, *seed, *trials, strikes, *mutate, out_dir, out)
        }
    };
    match result {
        Ok(code) => code,
        Err(CliError(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn claim_specs() {
        let m = FiniteMarket::uniform(vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(parse_claim_spec("square", &m).unwrap().values(), &[0.0, 1.0, 4.0]);
        assert_eq!(parse_claim_spec("abs-dev:1", &m).unwrap().values(), &[1.0, 0.0, 1.0]);
        assert_eq!(parse_claim_spec("indicator:0.5", &m).unwrap().values(), &[0.0, 1.0, 1.0]);
        assert_eq!(parse_claim_spec("identity", &m).unwrap().values(), &[0.0, 1.0, 2.0]);
        assert_eq!(parse_claim_spec("one", &m).unwrap().values(), &[1.0; 3]);
        assert_eq!(parse_claim_spec("call:1", &m).unwrap().values(), &[0.0, 0.0, 1.0]);
        assert_eq!(parse_claim_spec("[1, 2, 3]", &m).unwrap().values(), &[1.0, 2.0, 3.0]);
        assert!(parse_claim_spec("1,2", &m).is_err());
        assert!(parse_claim_spec("cube", &m).is_err());
    }

    #[test]
    fn bank_specs() {
        assert_eq!(parse_bank("default", 3, 1).unwrap().densities().len(), 13);
        assert_eq!(parse_bank("strict=2,sparse=0", 3, 1).unwrap().densities().len(), 3);
        assert!(parse_bank("strict=x", 3, 1).is_err());
    }

    #[test]
    fn unknown_lemma_lists_names() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(["optspan", "verify", "--market", "m.json", "--lemma", "nope"], &mut out, &mut err);
        assert_eq!(code, EXIT_USAGE);
        let msg = String::from_utf8(err).unwrap();
        for name in LEMMAS {
            assert!(msg.contains(name));
        }
    }
}
