//! Experiment runner: loads circuits and schemes, runs checks and writes
//! deterministic JSON reports.
//!
//! Exit status is 0 when every check passes, 2 on a check failure, 3 on an
//! input error and 4 when a size guard is exceeded.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use noncollapse::checks::{self, Check, CriterionReport};
use noncollapse::dcrpuzz::{
    col_exact, dcr_advantage, dcr_advantage_empirical, ColAdversary, CollisionAdversary,
    DcrScheme, Duplicated, OraclePipeline,
};
use noncollapse::dist::empirical;
use noncollapse::ncmo::{oracle_exact_from, oracle_sample};
use noncollapse::primitives::{
    com_break_via_collision, com_to_dcrpuzz, hiding_and_correctness_audit,
    mac_break_via_collision, mac_to_dcrpuzz, mac_to_dcrpuzz_circuit, naive_forger_exact,
    pair_parity_success, ComVariant, GameReport, OneShotMac, ToyCommitment,
};
use noncollapse::puzzles::{hybrid_report, make_adversary, AdvContext, AdversaryKind};
use noncollapse::qsim::{enumerate_branches, set_max_branches, Circuit};
use noncollapse::{BitString, Error, SimRng};
use rand::SeedableRng;

pub const EXIT_PASS: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 2;
pub const EXIT_INPUT: u8 = 3;
pub const EXIT_CAP: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "noncollapse", version, about = "Non-collapsing oracle experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Seed for every random choice; required whenever sampling.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Include wall-clock time in the report.
    #[arg(long)]
    pub timing: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Sample,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Primitive {
    Mac,
    Commitment,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Col,
    Oracle,
    Duplicated,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Exact or sampled law of the oracle on a circuit file.
    RunOracle {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long, value_enum, default_value = "exact")]
        mode: Mode,
        #[arg(long, default_value_t = 100_000)]
        shots: u64,
        /// TV tolerance for the sampled law against the exact one.
        #[arg(long, default_value_t = 0.01)]
        tol: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Hybrid endpoints, per-step identity and telescoping for one circuit.
    CheckHybrid {
        #[arg(long)]
        circuit: PathBuf,
        /// perfect, oblivious or rejection:<budget>
        #[arg(long, default_value = "perfect")]
        adversary: String,
        /// Instance string carried in the context.
        #[arg(long, default_value = "")]
        x: String,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Break a toy MAC or commitment through collision finding.
    RunReduction {
        #[arg(long, value_enum)]
        primitive: Primitive,
        #[arg(long, value_enum, default_value = "coherent")]
        variant: VariantArg,
        /// Comma separated `key=value`: n, lm for MACs; n, c for commitments.
        #[arg(long, default_value = "")]
        params: String,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, value_enum, default_value = "col")]
        source: Source,
        /// Allowed gap between empirical and exact success.
        #[arg(long, default_value_t = 0.02)]
        tol: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Collision-finding advantage on a scheme file.
    RunDcr {
        #[arg(long)]
        scheme: PathBuf,
        #[arg(long, value_enum, default_value = "oracle")]
        adversary: Source,
        #[arg(long, value_enum, default_value = "exact")]
        mode: Mode,
        #[arg(long, default_value_t = 100_000)]
        shots: u64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Runs a named group of acceptance criteria.
    Suite {
        name: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariantArg {
    Literal,
    Coherent,
}

impl From<VariantArg> for ComVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Literal => ComVariant::Literal,
            VariantArg::Coherent => ComVariant::Coherent,
        }
    }
}

#[derive(Serialize, Debug)]
pub struct Report {
    pub artifact: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: Value,
    pub checks: Vec<Check>,
    pub results: Value,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

/// Failure before a report could be produced.
#[derive(Debug)]
pub struct Failure {
    pub code: &'static str,
    pub message: String,
    pub exit: u8,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let exit = match e {
            Error::InstanceTooLarge { .. } | Error::RetryBudgetExhausted { .. } => EXIT_CAP,
            _ => EXIT_INPUT,
        };
        Failure {
            code: e.code(),
            message: e.to_string(),
            exit,
        }
    }
}

fn input(code: &'static str, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
        exit: EXIT_INPUT,
    }
}

fn need_seed(common: &Common) -> Result<u64, Failure> {
    common
        .seed
        .ok_or_else(|| input("missing-seed", "--seed is required when sampling"))
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| input("io", format!("reading {}: {e}", path.display())))
}

fn load_circuit(path: &Path) -> Result<Circuit, Failure> {
    Ok(Circuit::from_json_str(&read(path)?)?)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

/// Reads `NCMO_MAX_BRANCHES` into the enumeration guard.
pub fn apply_env() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("NCMO_MAX_BRANCHES") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| input("env", format!("NCMO_MAX_BRANCHES={v:?} is not a count")))?;
        set_max_branches(n);
    }
    Ok(())
}

fn params(text: &str) -> Result<Vec<(String, usize)>, Failure> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| input("params", format!("expected key=value, got {kv:?}")))?;
            let v = v
                .trim()
                .parse()
                .map_err(|_| input("params", format!("{k} needs an integer, got {v:?}")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn param(list: &[(String, usize)], key: &str, default: usize) -> usize {
    list.iter()
        .rev()
        .find(|(k, _)| k == key)
        .map_or(default, |(_, v)| *v)
}

fn reject_unknown(list: &[(String, usize)], allowed: &[&str]) -> Result<(), Failure> {
    match list.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        Some((k, _)) => Err(input(
            "params",
            format!("unknown parameter {k:?}; expected {}", allowed.join(", ")),
        )),
        None => Ok(()),
    }
}

fn source(s: Source) -> &'static dyn CollisionAdversary {
    match s {
        Source::Col => &ColAdversary,
        Source::Oracle => &OraclePipeline,
        Source::Duplicated => &Duplicated,
    }
}

fn game_checks(game: &GameReport, tol: f64) -> Vec<Check> {
    if game.trials == 0 {
        return Vec::new();
    }
    vec![Check::at_most(
        "|empirical - exact|",
        game.empirical_gap().unwrap_or(f64::INFINITY),
        tol,
    )]
}

/// Runs one command and returns the report, without writing it.
pub fn execute(cmd: &Command) -> Result<Report, Failure> {
    let start = Instant::now();
    let (name, common, config, checks, results) = match cmd {
        Command::RunOracle {
            circuit,
            mode,
            shots,
            tol,
            common,
        } => {
            let c = load_circuit(circuit)?;
            let tree = enumerate_branches(&c)?;
            let exact = oracle_exact_from(&tree)?;
            let mut checks = vec![Check::at_most(
                "branch sum error",
                (tree.total_leaf_prob() - 1.0).abs().max(tree.max_child_sum_error()),
                1e-9,
            )];
            let mut results = json!({ "exact": exact });
            if *mode == Mode::Sample {
                let seed = need_seed(common)?;
                let mut rng = SimRng::seed_from_u64(seed);
                let draws = (0..*shots)
                    .map(|_| oracle_sample(&c, &mut rng).map(|o| o.concat()))
                    .collect::<noncollapse::Result<Vec<_>>>()?;
                let (counts, law) = empirical(&draws)?;
                let tv = law.sd(&exact)?;
                checks.push(Check::at_most("TV(sample, exact)", tv, *tol));
                results["counts"] = Value::Object(
                    counts.counts().map(|(k, v)| (k.to_string(), json!(v))).collect(),
                );
                results["tv"] = json!(tv);
            }
            let config = json!({
                "circuit": circuit.file_name().map(|f| f.to_string_lossy().into_owned()),
                "mode": mode, "shots": (*mode == Mode::Sample).then_some(*shots),
                "tol": tol, "seed": common.seed,
            });
            ("run-oracle", common, config, checks, results)
        }
        Command::CheckHybrid {
            circuit,
            adversary,
            x,
            tol,
            common,
        } => {
            let c = load_circuit(circuit)?;
            let kind: AdversaryKind = adversary.parse()?;
            let x: BitString = x.parse()?;
            let ctx = AdvContext::new(x, c)?;
            let h = hybrid_report(&ctx, make_adversary(&kind)?.as_ref())?;
            let mut checks = vec![
                Check::at_most("sd(B(T), Q)", h.endpoint_oracle, *tol),
                Check::at_most("sd(B(0), Q*)", h.endpoint_q_star, *tol),
                Check::at_most("per-step gap", h.per_step.max_gap(), *tol),
                Check::at_most("sd(Q*, Q) - sum", -h.telescoping_slack, *tol),
            ];
            if kind == AdversaryKind::Perfect {
                checks.push(Check::at_most("perfect sd(Q*, Q)", h.q_star_sd, *tol));
            }
            let config = json!({
                "circuit": circuit.file_name().map(|f| f.to_string_lossy().into_owned()),
                "adversary": kind.to_string(), "x": x.to_string(), "tol": tol,
            });
            ("check-hybrid", common, config, checks, to_value(&h))
        }
        Command::RunReduction {
            primitive,
            variant,
            params: text,
            trials,
            source: src,
            tol,
            common,
        } => {
            let list = params(text)?;
            let seed = if *trials > 0 { need_seed(common)? } else { common.seed.unwrap_or(0) };
            let mut rng = SimRng::seed_from_u64(seed);
            let (checks, results, shape) = match primitive {
                Primitive::Mac => {
                    reject_unknown(&list, &["n", "lm"])?;
                    let (n, lm) = (param(&list, "n", 4), param(&list, "lm", 4));
                    let mac = OneShotMac::toy(n, lm, &mut rng)?;
                    let scheme = match src {
                        Source::Oracle => mac_to_dcrpuzz_circuit(&mac)?,
                        _ => mac_to_dcrpuzz(&mac)?,
                    };
                    let game = mac_break_via_collision(&mac, &scheme, source(*src), *trials, &mut rng)?;
                    let mut checks = game_checks(&game, *tol);
                    if *src == Source::Col {
                        let want = 1.0 - 0.5f64.powi(lm as i32);
                        checks.push(Check::at_most(
                            "|exact - (1 - 2^-lm)|",
                            (game.exact.unwrap_or(f64::NAN) - want).abs(),
                            1e-9,
                        ));
                    }
                    let results = json!({
                        "game": game,
                        "naive_forger_exact": naive_forger_exact(&mac)?,
                    });
                    (checks, results, json!({ "n": n, "lm": lm }))
                }
                Primitive::Commitment => {
                    reject_unknown(&list, &["n", "c"])?;
                    let (n, c) = (param(&list, "n", 3), param(&list, "c", 1));
                    let com = ToyCommitment::toy(n, c, &mut rng)?;
                    let scheme = com_to_dcrpuzz(&com, (*variant).into())?;
                    let game = com_break_via_collision(&com, &scheme, source(*src), *trials, &mut rng)?;
                    let mut checks = game_checks(&game, *tol);
                    let pair = pair_parity_success(&com);
                    let want = match (variant, src) {
                        (VariantArg::Coherent, Source::Col | Source::Oracle) => pair,
                        (VariantArg::Literal, _) | (_, Source::Duplicated) => 0.0,
                    };
                    checks.push(Check::at_most(
                        "|exact - enumerated|",
                        (game.exact.unwrap_or(f64::NAN) - want).abs(),
                        1e-9,
                    ));
                    let audit = hiding_and_correctness_audit(&com, 0.1)?;
                    let results = json!({
                        "game": game,
                        "pair_parity_success": pair,
                        "half_both_parity_mass": 0.5 * com.both_parity_mass(),
                        "audit": {
                            "correctness": audit.correctness,
                            "hiding_sd": audit.hiding_sd,
                            "algorithm_c_value": audit.algorithm_c_value,
                            "lemma_bound": audit.lemma_bound,
                            "bound_holds": audit.bound_holds,
                        },
                    });
                    (checks, results, json!({ "n": n, "c": c }))
                }
            };
            let config = json!({
                "primitive": primitive, "variant": ComVariant::from(*variant),
                "params": shape, "trials": trials, "source": src, "tol": tol, "seed": common.seed,
            });
            ("run-reduction", common, config, checks, results)
        }
        Command::RunDcr {
            scheme,
            adversary,
            mode,
            shots,
            tol,
            common,
        } => {
            let s = DcrScheme::from_json_str(&read(scheme)?, scheme.parent())?;
            let adv = source(*adversary);
            let exact = dcr_advantage(&s, adv)?;
            let mut checks = Vec::new();
            if *adversary != Source::Duplicated {
                checks.push(Check::at_most("advantage", exact, *tol));
            }
            let mut results = json!({ "advantage": exact });
            let col: Vec<(String, Value)> = s
                .setup
                .iter()
                .map(|(pp, _)| Ok((pp.to_string(), to_value(&col_exact(&s, pp)?))))
                .collect::<noncollapse::Result<_>>()?;
            results["col"] = Value::Object(col.into_iter().collect());
            if *mode == Mode::Sample {
                let mut rng = SimRng::seed_from_u64(need_seed(common)?);
                let emp = dcr_advantage_empirical(&s, adv, *shots, &mut rng)?;
                results["empirical_advantage"] = json!(emp);
            }
            let config = json!({
                "scheme": scheme.file_name().map(|f| f.to_string_lossy().into_owned()),
                "adversary": adversary, "mode": mode,
                "shots": (*mode == Mode::Sample).then_some(*shots), "tol": tol, "seed": common.seed,
            });
            ("run-dcr", common, config, checks, results)
        }
        Command::Suite { name, common } => {
            let seed = common.seed.unwrap_or(checks::DEFAULT_SEED);
            let reports: Vec<CriterionReport> = checks::run_suite(name, seed)?;
            let checks = reports
                .iter()
                .flat_map(|r| {
                    r.checks.iter().map(move |c| Check {
                        name: format!("{}: {}", r.id, c.name),
                        ..c.clone()
                    })
                })
                .collect();
            let config = json!({ "suite": name, "seed": seed });
            ("suite", common, config, checks, to_value(&reports))
        }
    };
    let pass = checks.iter().all(|c: &Check| c.pass);
    Ok(Report {
        artifact: "noncollapse",
        version: env!("CARGO_PKG_VERSION"),
        command: name,
        config,
        checks,
        results,
        pass,
        wall_time_s: common.timing.then(|| start.elapsed().as_secs_f64()),
    })
}

/// Parses arguments, runs, writes the report and returns the exit status.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
        }
    };
    match apply_env().and_then(|()| execute(&cli.command)) {
        Ok(report) => {
            let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
            let out = match &cli.command {
                Command::RunOracle { common, .. }
                | Command::CheckHybrid { common, .. }
                | Command::RunReduction { common, .. }
                | Command::RunDcr { common, .. }
                | Command::Suite { common, .. } => &common.out,
            };
            match out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, text) {
                        eprintln!("{}", json!({"error": "io", "message": e.to_string()}));
                        return EXIT_INPUT;
                    }
                }
                None => print!("{text}"),
            }
            if report.pass {
                EXIT_PASS
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(f) => {
            eprintln!("{}", json!({ "error": f.code, "message": f.message }));
            f.exit
        }
    }
}
