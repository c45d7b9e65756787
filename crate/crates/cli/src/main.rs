//! `cyclectx`: verification reports for n-cycle contextuality and the
//! extended Wigner's-friend circuit.
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 on a
//! usage error.

mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use cyclectx::ewf::{paradox_report, Tolerances};
use cyclectx::format::sig17;
use cyclectx::linalg::{ALGEBRAIC_TOL, PROBABILITY_TOL};
use cyclectx::ncycle::{cycle_behavior, CycleKind};
use cyclectx::quantum::{behavior_from_realization, kcbs_realization, QuantumRealization};
use cyclectx::scenario::{is_logically_contextual, POSSIBILITY_EPS};
use cyclectx::search::{find_quantum_realization, FailureReason, SearchOutcome, SupportTarget, DEFAULT_RESTARTS};
use cyclectx::verify::{verify_all, VerifyConfig, MAX_N};

use report::Output;

const SEED_ENV: &str = "CYCLECTX_SEED";

#[derive(Parser, Debug)]
#[command(name = "cyclectx", version, about = "n-cycle contextuality and extended Wigner's-friend verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Five-friend paradox on the qutrit realization.
    Demo5 {
        /// Realization JSON to use instead of the built-in qutrit one.
        #[arg(long)]
        realization: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Logical contextuality of a cycle behavior.
    Contextuality {
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Kind::Odd)]
        kind: Kind,
        #[command(flatten)]
        common: Common,
    },
    /// Numerical search for a projective realization of a cycle behavior.
    SearchRealization {
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, value_enum, default_value_t = Kind::Unified)]
        kind: Kind,
        /// Number of random restarts.
        #[arg(long, default_value_t = DEFAULT_RESTARTS)]
        budget: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Full verification suite.
    VerifyAll {
        /// Largest n in the cycle sweeps.
        #[arg(long = "n", alias = "n-max", default_value_t = 10)]
        n_max: usize,
        #[arg(long, default_value_t = DEFAULT_RESTARTS)]
        budget: usize,
        /// Realization JSON for the five-cycle criteria.
        #[arg(long)]
        realization: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Search seed; the CYCLECTX_SEED environment variable takes precedence.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = ALGEBRAIC_TOL)]
    tol_alg: f64,
    #[arg(long, default_value_t = PROBABILITY_TOL)]
    tol_prob: f64,
    /// Smallest probability counted as possible.
    #[arg(long, default_value_t = POSSIBILITY_EPS)]
    eps: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Kind {
    Unified,
    Odd,
    Even,
}

impl From<Kind> for CycleKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Unified => CycleKind::Unified,
            Kind::Odd => CycleKind::Odd,
            Kind::Even => CycleKind::Even,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl Common {
    fn seed(&self) -> Result<u64, Failure> {
        match std::env::var(SEED_ENV) {
            Ok(s) => {
                s.trim().parse().map_err(|_| Failure::Usage(format!("{SEED_ENV}={s:?} is not an unsigned integer")))
            }
            Err(_) => Ok(self.seed),
        }
    }

    fn tolerances(&self) -> Result<Tolerances, Failure> {
        for (name, v) in [("--tol-alg", self.tol_alg), ("--tol-prob", self.tol_prob), ("--eps", self.eps)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Failure::Usage(format!("{name} must be a positive number, got {v}")));
            }
        }
        Ok(Tolerances { algebraic: self.tol_alg, probability: self.tol_prob, possibility: self.eps })
    }
}

fn load_realization(path: &Option<PathBuf>) -> Result<QuantumRealization, Failure> {
    let Some(path) = path else { return Ok(kcbs_realization()) };
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let v = v.get("realization").cloned().unwrap_or(v);
    QuantumRealization::from_json(&v).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn demo5(realization: &Option<PathBuf>, common: &Common) -> Result<(Output, bool), Failure> {
    let tol = common.tolerances()?;
    let r = load_realization(realization)?;
    if r.measurements() != 5 {
        return Err(Failure::Usage(format!("demo5 needs five projectors, got {}", r.measurements())));
    }
    match paradox_report(&r, 5, tol) {
        Ok(rep) => Ok((report::paradox(&rep), rep.verdict)),
        Err(e @ cyclectx::Error::CertificateFailure { .. }) => {
            let v = json!({"n": 5, "error": e.to_string(), "verdict": false});
            Ok((Output::failure(v, format!("certificate check failed: {e}")), false))
        }
        Err(e) => Err(Failure::Runtime(e.to_string())),
    }
}

fn contextuality(n: usize, kind: Kind, common: &Common) -> Result<(Output, bool), Failure> {
    common.tolerances()?;
    let b = cycle_behavior(kind.into(), n).map_err(|e| Failure::Usage(e.to_string()))?;
    let verdict = is_logically_contextual(b.support()).map_err(|e| Failure::Runtime(e.to_string()))?;
    Ok((report::contextuality(&b, &verdict), verdict.contextual))
}

fn search(n: usize, dim: usize, kind: Kind, budget: usize, common: &Common) -> Result<(Output, bool), Failure> {
    common.tolerances()?;
    let seed = common.seed()?;
    let b = cycle_behavior(kind.into(), n).map_err(|e| Failure::Usage(e.to_string()))?;
    if dim < 2 {
        return Err(Failure::Usage(format!("--dim must be at least 2, got {dim}")));
    }
    let target = SupportTarget::from_cycle(&b);
    let outcome = find_quantum_realization(&target, dim, seed, budget).map_err(|e| Failure::Runtime(e.to_string()))?;
    let head = json!({"n": n, "kind": b.kind().as_str(), "dim": dim, "seed": seed, "budget": budget});
    match outcome {
        SearchOutcome::Found(f) => {
            let behavior = behavior_from_realization(&f.realization, target.scenario())
                .map_err(|e| Failure::Runtime(e.to_string()))?;
            Ok((report::found(head, &b, &f, &behavior), true))
        }
        SearchOutcome::Failed(f) => {
            let reason = match &f.reason {
                FailureReason::Infeasible(why) => format!("infeasible: {why}"),
                FailureReason::BudgetExhausted => "budget exhausted".to_string(),
            };
            let mut v = head;
            let obj = v.as_object_mut().expect("object");
            obj.insert("status".into(), json!("failed"));
            obj.insert("reason".into(), json!(reason));
            obj.insert("restarts".into(), json!(f.restarts));
            obj.insert("best_objective".into(), cyclectx::format::json_number(f.best_objective));
            let text = format!(
                "search failed for {} n={n} in dim {dim}: {reason} after {} restarts (best objective {})",
                b.kind(),
                f.restarts,
                sig17(f.best_objective)
            );
            Ok((Output::failure(v, text), false))
        }
    }
}

fn verify(
    n_max: usize,
    budget: usize,
    realization: &Option<PathBuf>,
    common: &Common,
) -> Result<(Output, bool), Failure> {
    common.tolerances()?;
    if n_max > MAX_N {
        return Err(Failure::Usage(format!("--n must be at most {MAX_N}, got {n_max}")));
    }
    if n_max < 5 {
        return Err(Failure::Usage(format!("--n must be at least 5, got {n_max}")));
    }
    let mut cfg = VerifyConfig::new(n_max, common.seed()?);
    cfg.budget = budget;
    cfg.realization = load_realization(realization)?;
    if cfg.realization.measurements() != 5 {
        return Err(Failure::Usage("verify-all needs a five-projector realization".into()));
    }
    let rep = verify_all(&cfg);
    Ok((report::verify(&rep), rep.pass()))
}

fn run(cli: Cli) -> Result<(Output, bool, Format, Option<PathBuf>), Failure> {
    let (result, common) = match &cli.command {
        Command::Demo5 { realization, common } => (demo5(realization, common), common),
        Command::Contextuality { n, kind, common } => (contextuality(*n, *kind, common), common),
        Command::SearchRealization { n, dim, kind, budget, common } => {
            (search(*n, *dim, *kind, *budget, common), common)
        }
        Command::VerifyAll { n_max, budget, realization, common } => {
            (verify(*n_max, *budget, realization, common), common)
        }
    };
    let (out, pass) = result?;
    Ok((out, pass, common.format, common.out.clone()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok((out, pass, format, path)) => {
            let body = out.render(format);
            let written = match path {
                Some(p) => std::fs::write(&p, body).map_err(|e| format!("{}: {e}", p.display())),
                None => {
                    print!("{body}");
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
            ExitCode::from(if pass { 0 } else { 1 })
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
