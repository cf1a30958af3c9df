//! `horn`: evaluate, differentiate, ε-expand and verify Horn-type series.
//!
//! Output is JSON on stdout; diagnostics go to stderr. Exit codes: 0 success,
//! 1 unexpected failure, 2 invalid input, 3 numerical failure.

use std::collections::BTreeMap;
use std::io::Read;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use horn_core::catalog::{self, Layout};
use horn_core::derivative::{differentiate_n_with, epsilon_expand};
use horn_core::eval::{evaluate_expansion_with, evaluate_with};
use horn_core::json::{self, Document};
use horn_core::oracle::{self, Status, Tolerances};
use horn_core::{DerivativeExpansion, EvalOptions, EvalResult, Execution, HornError};
use serde_json::{json, Value};

const MAX_ORDER_ENV: &str = "HORN_EVAL_MAX_ORDER";

#[derive(Parser)]
#[command(name = "horn", version, about = "Horn-type hypergeometric series and their parameter derivatives")]
struct Cli {
    /// Indent JSON output.
    #[arg(long, global = true)]
    pretty: bool,

    /// Treat non-convergence (and failed verification) as a numerical failure, exit 3.
    #[arg(long, global = true)]
    strict: bool,

    #[command(flatten)]
    eval: EvalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct EvalArgs {
    /// Highest shell (total degree) summed. Default 60, or $HORN_EVAL_MAX_ORDER.
    #[arg(long, global = true)]
    max_order: Option<u32>,
    #[arg(long, global = true)]
    abs_tol: Option<f64>,
    #[arg(long, global = true)]
    rel_tol: Option<f64>,
    /// Consecutive small shells required for convergence.
    #[arg(long, global = true)]
    min_shells: Option<u32>,
    /// Disable data-parallel evaluation.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a series or expansion document.
    Eval {
        /// File path, inline JSON, or `-` for stdin.
        spec: String,
    },
    /// Differentiate with respect to a parameter and evaluate.
    Diff {
        spec: String,
        #[arg(long)]
        param: String,
        #[arg(long, default_value_t = 1)]
        order: u32,
        /// Include the derivative expansion document in the output.
        #[arg(long)]
        emit_series: bool,
    },
    /// ε-expansion coefficients k = 0..=order from the parameters' epsilon_slope.
    Eps {
        spec: String,
        #[arg(long)]
        order: u32,
        #[arg(long)]
        emit_series: bool,
    },
    /// Catalog of named functions.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
    /// Compare the derivative engine with the digamma and finite-difference oracles.
    Verify {
        spec: String,
        #[arg(long)]
        param: String,
        /// Finite-difference step.
        #[arg(long, default_value_t = 1e-4)]
        h: f64,
        /// Engine vs digamma oracle tolerance, relative to max(1, |value|).
        #[arg(long, default_value_t = 1e-9)]
        oracle_tol: f64,
        /// Engine vs finite difference tolerance, absolute.
        #[arg(long, default_value_t = 1e-6)]
        fd_tol: f64,
    },
}

#[derive(Subcommand)]
enum CatalogAction {
    /// Layouts of the fixed families.
    List,
    /// Parameter names and factor layout of one family.
    Show {
        name: String,
        /// Layout JSON for KdF or GenLauricella.
        #[arg(long)]
        layout: Option<String>,
    },
}

#[derive(Debug)]
enum CliError {
    Horn(HornError),
    Input(String),
    NotConverged(Value),
}

impl From<HornError> for CliError {
    fn from(e: HornError) -> Self {
        CliError::Horn(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Horn(e) if e.is_numerical() => 3,
            CliError::Horn(_) | CliError::Input(_) => 2,
            CliError::NotConverged(_) => 3,
        }
    }
}

fn options(args: &EvalArgs) -> Result<EvalOptions, CliError> {
    let mut opts = EvalOptions::default();
    if let Ok(v) = std::env::var(MAX_ORDER_ENV) {
        opts.max_total_order = v
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("{MAX_ORDER_ENV}={v:?} is not an integer")))?;
    }
    if let Some(v) = args.max_order {
        opts.max_total_order = v;
    }
    if let Some(v) = args.abs_tol {
        opts.abs_tol = v;
    }
    if let Some(v) = args.rel_tol {
        opts.rel_tol = v;
    }
    if let Some(v) = args.min_shells {
        opts.min_shells = v;
    }
    opts.check()?;
    Ok(opts)
}

fn read_spec(spec: &str) -> Result<String, CliError> {
    if spec == "-" {
        let mut text = String::new();
        std::io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| CliError::Input(format!("reading stdin: {e}")))?;
        Ok(text)
    } else if spec.trim_start().starts_with('{') {
        Ok(spec.to_owned())
    } else {
        std::fs::read_to_string(spec).map_err(|e| CliError::Input(format!("{spec}: {e}")))
    }
}

fn load(spec: &str) -> Result<Document, CliError> {
    Ok(json::parse_document(&read_spec(spec)?)?)
}

fn load_series(spec: &str) -> Result<horn_core::HornSeries, CliError> {
    match load(spec)? {
        Document::Series(s) => Ok(s),
        Document::Expansion(_) => Err(CliError::Input(
            "this command needs a single series, not an expansion".into(),
        )),
    }
}

fn result_value(r: &EvalResult) -> Value {
    serde_json::to_value(r).expect("results serialize")
}

struct Ctx {
    opts: EvalOptions,
    exec: Execution,
    strict: bool,
}

impl Ctx {
    fn finish(&self, out: Value, converged: bool) -> Result<Value, CliError> {
        if self.strict && !converged {
            Err(CliError::NotConverged(out))
        } else {
            Ok(out)
        }
    }

    fn evaluate(&self, exp: &DerivativeExpansion) -> Result<EvalResult, CliError> {
        Ok(evaluate_expansion_with(exp, &self.opts, self.exec)?)
    }
}

fn run(cli: Cli) -> Result<Value, CliError> {
    let ctx = Ctx {
        opts: options(&cli.eval)?,
        exec: if cli.eval.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        },
        strict: cli.strict,
    };
    match cli.command {
        Command::Eval { spec } => {
            let r = match load(&spec)? {
                Document::Series(s) => evaluate_with(&s, &ctx.opts, ctx.exec)?,
                Document::Expansion(e) => ctx.evaluate(&e)?,
            };
            ctx.finish(result_value(&r), r.converged)
        }
        Command::Diff {
            spec,
            param,
            order,
            emit_series,
        } => {
            let series = load_series(&spec)?;
            let orders = BTreeMap::from([(param.clone(), order)]);
            let exp = differentiate_n_with(&series, &orders, ctx.exec)?;
            let r = ctx.evaluate(&exp)?;
            let mut out = json!({
                "param": param,
                "order": order,
                "members": exp.len(),
                "result": result_value(&r),
            });
            if emit_series {
                out["expansion"] = json::expansion_to_value(&exp);
            }
            ctx.finish(out, r.converged)
        }
        Command::Eps {
            spec,
            order,
            emit_series,
        } => {
            let series = load_series(&spec)?;
            let coefficients = epsilon_expand(&series, order)?;
            let mut converged = true;
            let mut list = Vec::new();
            for (k, c) in coefficients.iter().enumerate() {
                let r = ctx.evaluate(c)?;
                converged &= r.converged;
                let mut entry = json!({"k": k, "members": c.len(), "result": result_value(&r)});
                if emit_series {
                    entry["expansion"] = json::expansion_to_value(c);
                }
                list.push(entry);
            }
            ctx.finish(json!({"order": order, "coefficients": list}), converged)
        }
        Command::Catalog { action } => match action {
            CatalogAction::List => Ok(serde_json::to_value(catalog::list()).expect("layouts serialize")),
            CatalogAction::Show { name, layout } => {
                let layout: Option<Layout> = layout
                    .map(|text| serde_json::from_str(&text).map_err(HornError::from))
                    .transpose()?;
                let info = catalog::family_layout(&name, layout.as_ref())?;
                Ok(serde_json::to_value(info).expect("layouts serialize"))
            }
        },
        Command::Verify {
            spec,
            param,
            h,
            oracle_tol,
            fd_tol,
        } => {
            let series = load_series(&spec)?;
            let tol = Tolerances {
                oracle_rel: oracle_tol,
                finite_difference_abs: fd_tol,
                h,
            };
            let report = oracle::verify(&series, &param, &tol, &ctx.opts);
            let ok = report.status == Status::Pass;
            let out = serde_json::to_value(&report).expect("reports serialize");
            ctx.finish(out, ok)
        }
    }
}

fn print(value: &Value, pretty: bool) {
    let text = if pretty {
        serde_json::to_string_pretty(value)
    } else {
        serde_json::to_string(value)
    };
    println!("{}", text.expect("values serialize"));
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pretty = cli.pretty;
    match run(cli) {
        Ok(out) => {
            print(&out, pretty);
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = e.exit_code();
            match e {
                CliError::NotConverged(out) => {
                    print(&out, pretty);
                    eprintln!("error: not converged (--strict)");
                }
                CliError::Horn(e) => eprintln!("error: {e}"),
                CliError::Input(msg) => eprintln!("error: {msg}"),
            }
            ExitCode::from(code)
        }
    }
}
