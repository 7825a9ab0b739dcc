//! Command-line front end. `run` takes the argument list and output
//! streams and returns the process exit code:
//! 0 success, 1 verification mismatch, 2 usage or parse error,
//! 3 node budget exhausted.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::format::{emit_protocol, parse_protocol};
use crate::library::{
    build_constant, build_delayed_observation_presence, build_delayed_transmission, build_modulo,
    build_set_union, build_simple_threshold, build_threshold_avg, product, DelayedPredicate, ModuloParams,
    ThresholdParams,
};
use crate::model::ProtocolSpec;
use crate::semilinear::{brute_equivalent, parse_predicate, PredicateExpr, Profile};
use crate::transforms::{
    immediate_to_delayed, io_add_mirrors, io_remove_mirrors, to_abstract, two_way_to_queued,
    two_way_to_queued_tokens,
};
use crate::verifier::{
    fair_run, local_fair_run, minimal_unstable, sweep, ExploreOptions, SweepOptions, TransitCap,
    VerifyError,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Debug, Parser)]
#[command(name = "popverify", version, about = "Build, transform and verify population protocols")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Emit a library protocol in the protocol file format.
    Build {
        #[command(subcommand)]
        which: Build,
        /// Write to this file instead of standard output.
        #[arg(long, global = true)]
        out: Option<PathBuf>,
    },
    /// Compile a protocol into another model.
    Transform {
        #[arg(long, value_enum)]
        kind: TransformKind,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Token symbol (tokens only).
        #[arg(long)]
        token: Option<String>,
        /// Per-agent capacity (tokens only).
        #[arg(long, default_value_t = 2)]
        capacity: usize,
    },
    /// Compare a protocol against a predicate on every input up to a size.
    Verify {
        #[command(flatten)]
        protocol: ProtocolArg,
        #[command(flatten)]
        predicate: PredicateArg,
        #[arg(long)]
        max_n: u64,
        #[arg(long, default_value_t = 1)]
        min_n: u64,
        /// Only inputs satisfying this predicate expression are checked.
        #[arg(long)]
        promise: Option<String>,
        #[command(flatten)]
        explore: ExploreArgs,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Sample a fair execution, or run the set-union protocol.
    Simulate {
        /// Protocol file; omit when using --set-union.
        #[arg(long, required_unless_present = "set_union")]
        protocol: Option<PathBuf>,
        /// Run the set-union protocol over this comma-separated alphabet.
        #[arg(long, value_delimiter = ',')]
        set_union: Option<Vec<String>>,
        /// Input such as `{a:2, b:1}`.
        #[arg(long)]
        input: String,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        max_steps: usize,
        #[command(flatten)]
        explore: ExploreArgs,
    },
    /// Minimal unstable configurations and the implied truncation constant.
    Analyze {
        #[command(flatten)]
        protocol: ProtocolArg,
        #[arg(long, default_value_t = 3)]
        size_bound: u64,
        #[command(flatten)]
        explore: ExploreArgs,
    },
    /// Evaluate or compare predicates.
    Pred {
        #[command(subcommand)]
        which: Pred,
    },
}

#[derive(Debug, Args)]
struct ProtocolArg {
    #[arg(long)]
    protocol: PathBuf,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct PredicateArg {
    /// Predicate file.
    #[arg(long)]
    predicate: Option<PathBuf>,
    /// Inline predicate expression.
    #[arg(long)]
    expr: Option<String>,
}

#[derive(Debug, Args)]
struct ExploreArgs {
    /// `none`, `population`, `N` (total) or `per:N` (per message).
    #[arg(long, default_value = "none", value_parser = parse_cap)]
    transit_cap: TransitCap,
    #[arg(long, default_value_t = 1_000_000)]
    budget: usize,
}

impl ExploreArgs {
    fn options(&self) -> Result<ExploreOptions, CliError> {
        if self.budget == 0 {
            return Err(CliError::Usage("--budget must be positive".into()));
        }
        Ok(ExploreOptions { node_budget: self.budget, transit_cap: self.transit_cap })
    }
}

fn parse_cap(s: &str) -> Result<TransitCap, String> {
    match s {
        "none" => Ok(TransitCap::None),
        "population" => Ok(TransitCap::Population),
        _ => {
            let (per, n) = match s.strip_prefix("per:") {
                Some(n) => (true, n),
                None => (false, s),
            };
            let n: u64 = n.parse().map_err(|_| format!("bad transit cap `{s}`"))?;
            Ok(if per { TransitCap::PerMessage(n) } else { TransitCap::Total(n) })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TransformKind {
    Queued,
    Tokens,
    Mirrors,
    Unmirrors,
    Delayed,
    Abstract,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Combine {
    And,
    Or,
    Xor,
}

#[derive(Debug, Subcommand)]
enum Build {
    /// Tower protocol for `[count(sigma) >= k]`.
    Threshold {
        #[arg(long)]
        sigma: String,
        #[arg(long)]
        k: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        alphabet: Vec<String>,
    },
    /// Modulo protocol for `[x . v == r (mod m)]`.
    Modulo {
        /// Coefficient `symbol=value`; repeat per symbol.
        #[arg(long = "coef", value_parser = parse_coef, required = true)]
        coefficients: Vec<(String, i64)>,
        #[arg(long, allow_hyphen_values = true)]
        residue: i64,
        #[arg(long)]
        modulus: i64,
    },
    /// Averaging protocol for `[x . v >= r]`.
    Average {
        #[arg(long = "coef", value_parser = parse_coef, required = true)]
        coefficients: Vec<(String, i64)>,
        #[arg(long, allow_hyphen_values = true)]
        threshold: i64,
    },
    /// Delayed transmission modulo protocol.
    DelayedModulo {
        #[arg(long = "coef", value_parser = parse_coef, required = true)]
        coefficients: Vec<(String, i64)>,
        #[arg(long, allow_hyphen_values = true)]
        residue: i64,
        #[arg(long)]
        modulus: i64,
    },
    /// Delayed transmission threshold `[count(sigma) >= k]`.
    DelayedThreshold {
        #[arg(long)]
        sigma: String,
        #[arg(long)]
        k: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        alphabet: Vec<String>,
    },
    /// Delayed observation presence detector; the predicate is evaluated on
    /// the 0/1 presence vector.
    Presence {
        #[arg(long, value_delimiter = ',', required = true)]
        alphabet: Vec<String>,
        #[arg(long)]
        expr: String,
    },
    /// Constant-output protocol.
    Constant {
        #[arg(long)]
        value: u8,
        #[arg(long, value_delimiter = ',', required = true)]
        alphabet: Vec<String>,
    },
    /// Product of protocol files combined by a boolean operator.
    Product {
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum)]
        combine: Combine,
    },
}

#[derive(Debug, Subcommand)]
enum Pred {
    /// Print 1 or 0 for the predicate at an input.
    Eval {
        #[command(flatten)]
        predicate: PredicateArg,
        #[arg(long)]
        input: String,
    },
    /// Compare two predicates on a box; exit 1 with a counterexample if they differ.
    Equiv {
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
        #[arg(long, value_delimiter = ',', required = true)]
        symbols: Vec<String>,
        /// Coordinates range over `0..per-axis`.
        #[arg(long, default_value_t = 10)]
        per_axis: u64,
    },
}

fn parse_coef(s: &str) -> Result<(String, i64), String> {
    let (name, v) = s.split_once('=').ok_or_else(|| format!("expected symbol=value, got `{s}`"))?;
    let v = v.trim().parse().map_err(|_| format!("bad coefficient in `{s}`"))?;
    Ok((name.trim().to_owned(), v))
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Budget(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Budget(_) => EXIT_BUDGET,
            _ => EXIT_USAGE,
        }
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
            VerifyError::Model(m) => CliError::Parse(m.to_string()),
        }
    }
}

fn parse_err(e: impl std::fmt::Display) -> CliError {
    CliError::Parse(e.to_string())
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })
}

fn load_protocol(path: &PathBuf) -> Result<ProtocolSpec, CliError> {
    parse_protocol(&read(path)?).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn load_predicate(arg: &PredicateArg) -> Result<PredicateExpr, CliError> {
    let text = match (&arg.predicate, &arg.expr) {
        (Some(path), _) => read(path)?,
        (None, Some(e)) => e.clone(),
        (None, None) => return Err(CliError::Usage("a predicate is required".into())),
    };
    parse_predicate(&text).map_err(parse_err)
}

fn write_or_print(out: &mut dyn Write, path: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Io { path: p.clone(), source }),
        None => out.write_all(text.as_bytes()).map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
    }
}

fn profile_bits(symbols: &[String], bits: &[bool]) -> Profile {
    Profile::from_pairs(symbols.iter().cloned().zip(bits.iter().map(|&b| b as u64)))
}

fn build(which: &Build) -> Result<ProtocolSpec, CliError> {
    let built = match which {
        Build::Threshold { sigma, k, alphabet } => build_simple_threshold(sigma, *k, alphabet),
        Build::Modulo { coefficients, residue, modulus } => {
            ModuloParams::new(coefficients.clone(), *residue, *modulus).and_then(|p| build_modulo(&p))
        }
        Build::Average { coefficients, threshold } => {
            build_threshold_avg(&ThresholdParams::new(coefficients.clone(), *threshold))
        }
        Build::DelayedModulo { coefficients, residue, modulus } => {
            ModuloParams::new(coefficients.clone(), *residue, *modulus)
                .and_then(|p| build_delayed_transmission(&DelayedPredicate::Modulo(p)))
        }
        Build::DelayedThreshold { sigma, k, alphabet } => build_delayed_transmission(
            &DelayedPredicate::SimpleThreshold { sigma: sigma.clone(), k: *k, alphabet: alphabet.clone() },
        ),
        Build::Presence { alphabet, expr } => {
            let f = parse_predicate(expr).map_err(parse_err)?;
            build_delayed_observation_presence(alphabet, |bits| f.eval(&profile_bits(alphabet, bits)))
        }
        Build::Constant { value, alphabet } => build_constant(*value != 0, alphabet),
        Build::Product { inputs, combine } => {
            let protocols = inputs.iter().map(load_protocol).collect::<Result<Vec<_>, _>>()?;
            let combine = *combine;
            product(&protocols, move |o| match combine {
                Combine::And => o.iter().all(|&b| b),
                Combine::Or => o.iter().any(|&b| b),
                Combine::Xor => o.iter().filter(|&&b| b).count() % 2 == 1,
            })
        }
    };
    built.map_err(parse_err)
}

fn transform(p: &ProtocolSpec, kind: TransformKind, token: &Option<String>, capacity: usize) -> Result<ProtocolSpec, CliError> {
    let out = match kind {
        TransformKind::Queued => two_way_to_queued(p).map(|c| c.target),
        TransformKind::Tokens => {
            let token = token.as_deref().ok_or_else(|| CliError::Usage("--token is required for tokens".into()))?;
            two_way_to_queued_tokens(p, token, capacity).map(|c| c.target)
        }
        TransformKind::Mirrors => io_add_mirrors(p),
        TransformKind::Unmirrors => io_remove_mirrors(p),
        TransformKind::Delayed => immediate_to_delayed(p),
        TransformKind::Abstract => to_abstract(p),
    };
    out.map_err(parse_err)
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let io = |source| CliError::Io { path: "<stdout>".into(), source };
    match cli.command {
        Command::Build { which, out: path } => {
            let p = build(&which)?;
            write_or_print(out, &path, &emit_protocol(&p))?;
        }
        Command::Transform { kind, input, out: path, token, capacity } => {
            let p = load_protocol(&input)?;
            let q = transform(&p, kind, &token, capacity)?;
            write_or_print(out, &path, &emit_protocol(&q))?;
        }
        Command::Verify { protocol, predicate, max_n, min_n, promise, explore, format } => {
            let p = load_protocol(&protocol.protocol)?;
            let psi = load_predicate(&predicate)?;
            let mut opts = SweepOptions::up_to(max_n).sizes(min_n, max_n);
            opts.explore = explore.options()?;
            if let Some(pr) = promise {
                opts = opts.promise(parse_predicate(&pr).map_err(parse_err)?);
            }
            let report = sweep(&p, &psi, &opts)?;
            let text = match format {
                Format::Text => report.to_text(),
                Format::Json => report.to_json_lines(),
            };
            out.write_all(text.as_bytes()).map_err(io)?;
            if report.first_mismatch().is_some() {
                return Ok(EXIT_MISMATCH);
            }
            if report.budget_exceeded() > 0 {
                return Ok(EXIT_BUDGET);
            }
        }
        Command::Simulate { protocol, set_union, input, seed, max_steps, explore } => {
            if let Some(symbols) = set_union {
                let su = build_set_union(&symbols, |_| true).map_err(parse_err)?;
                let x = Profile::parse(&input).map_err(parse_err)?;
                if let Some(bad) = x.present().find(|s| su.initial(s).is_none()) {
                    return Err(CliError::Parse(format!("unknown input symbol `{bad}`")));
                }
                let run = local_fair_run(&su, &x, seed, 64);
                for (i, s) in run.states.iter().enumerate() {
                    writeln!(out, "agent {i}: {{{}}}", su.set_names(*s).join(", ")).map_err(io)?;
                }
                writeln!(out, "rounds: {}  converged: {}", run.rounds, run.converged).map_err(io)?;
                return Ok(EXIT_OK);
            }
            let p = load_protocol(protocol.as_ref().expect("clap requires --protocol"))?;
            let r = p.compile().map_err(parse_err)?;
            let x = p.parse_input(&input).map_err(parse_err)?;
            let c0 = r.initial_config(&x).map_err(parse_err)?;
            let trace = fair_run(&r, &c0, seed, max_steps, explore.options()?)?;
            writeln!(out, "0: {}", r.display(&trace.start)).map_err(io)?;
            for (i, (rule, c)) in trace.steps.iter().enumerate() {
                let rl = &r.rules[*rule];
                writeln!(out, "{}: {}   [{} -> {}]", i + 1, r.display(c), r.display(&rl.lhs), r.display(&rl.rhs))
                    .map_err(io)?;
            }
            let status = if trace.converged {
                "converged"
            } else if trace.step_limit_hit {
                "step limit reached"
            } else {
                "stuck"
            };
            writeln!(out, "{status}; output {}", trace.output).map_err(io)?;
        }
        Command::Analyze { protocol, size_bound, explore } => {
            let p = load_protocol(&protocol.protocol)?;
            let r = p.compile().map_err(parse_err)?;
            let m = minimal_unstable(&r, size_bound, explore.options()?)?;
            writeln!(out, "minimal unstable configurations (size <= {size_bound}):").map_err(io)?;
            for c in &m.minimal {
                writeln!(out, "  {}", r.display(c)).map_err(io)?;
            }
            writeln!(out, "truncation constant k = {}", m.k).map_err(io)?;
        }
        Command::Pred { which } => match which {
            Pred::Eval { predicate, input } => {
                let psi = load_predicate(&predicate)?;
                let x = Profile::parse(&input).map_err(parse_err)?;
                writeln!(out, "{}", psi.eval(&x) as u8).map_err(io)?;
            }
            Pred::Equiv { left, right, symbols, per_axis } => {
                let a = parse_predicate(&left).map_err(parse_err)?;
                let b = parse_predicate(&right).map_err(parse_err)?;
                let eq = brute_equivalent(&a, &b, &symbols, per_axis);
                match eq.counterexample {
                    None => writeln!(out, "equivalent on {} points", eq.checked).map_err(io)?,
                    Some(x) => {
                        writeln!(out, "differ at {x}: left {} right {}", a.eval(&x) as u8, b.eval(&x) as u8)
                            .map_err(io)?;
                        return Ok(EXIT_MISMATCH);
                    }
                }
            }
        },
    }
    Ok(EXIT_OK)
}

/// Runs the command line `args` (including the program name).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = out.write_all(text.as_bytes());
                EXIT_OK
            } else {
                let _ = err.write_all(text.as_bytes());
                EXIT_USAGE
            };
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("popverify").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let (code, _, err) = call(&["verify", "--bogus"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("Usage"));
    }

    #[test]
    fn help_succeeds() {
        let (code, out, _) = call(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("verify"));
    }

    #[test]
    fn transit_cap_syntax() {
        assert_eq!(parse_cap("per:2"), Ok(TransitCap::PerMessage(2)));
        assert_eq!(parse_cap("7"), Ok(TransitCap::Total(7)));
        assert!(parse_cap("lots").is_err());
    }

    #[test]
    fn build_prints_protocol() {
        let (code, out, _) = call(&["build", "threshold", "--sigma", "a", "--k", "2", "--alphabet", "a,b"]);
        assert_eq!(code, EXIT_OK);
        let p = parse_protocol(&out).unwrap();
        assert_eq!(p.states.len(), 3);
    }

    #[test]
    fn pred_eval_and_equiv() {
        let (code, out, _) = call(&["pred", "eval", "--expr", "(mod (v (a 1)) 1 2)", "--input", "{a:3}"]);
        assert_eq!((code, out.trim()), (EXIT_OK, "1"));
        let (code, out, _) =
            call(&["pred", "equiv", "--left", "(mod (v (a 1)) 1 2)", "--right", "(pow2 a)", "--symbols", "a"]);
        assert_eq!(code, EXIT_MISMATCH);
        assert!(out.contains("{a:2}"));
    }
}
