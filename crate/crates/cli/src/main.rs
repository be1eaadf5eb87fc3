//! `ttw`: batch front end over the operator kernel and verification suite.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or format error,
//! 3 no solution within the reduction bounds.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ttw_core::catalog::{self, Source, Which};
use ttw_core::expr::print_operator;
use ttw_core::reduction::{
    reduce_deepening, reduce_to_generators, Caps, ReduceError, ReduceOptions, Strategy,
};
use ttw_core::repspace::{self, RepError};
use ttw_core::verify::{self, Suite, VerifyOptions};
use ttw_core::{DiffOp, ParamBinding, Rational};

#[derive(Parser)]
#[command(
    name = "ttw",
    version,
    about = "Exact differential-operator algebra for the TTW system"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum OpName {
    #[value(name = "H", alias = "h")]
    H,
    #[value(name = "I1", alias = "i1")]
    I1,
    #[value(name = "I2", alias = "i2")]
    I2,
    #[value(name = "I12", alias = "i12")]
    I12,
}

#[derive(Clone, Copy, ValueEnum)]
enum I12Source {
    Computed,
    Printed,
}

#[derive(Clone, Copy, ValueEnum)]
enum Relation {
    /// [I1, I12]
    #[value(name = "doubleI1")]
    DoubleI1,
    /// [I2, I12]
    #[value(name = "doubleI2")]
    DoubleI2,
    /// I12 * I12
    #[value(name = "syzygy")]
    Syzygy,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Auto,
    Symbolic,
    Modular,
}

#[derive(Subcommand)]
enum Command {
    /// Print a catalog operator.
    Catalog {
        #[arg(long)]
        k: u32,
        #[arg(long, value_enum)]
        which: OpName,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// For I12: the commutator [I1, I2] or the transcribed table.
        #[arg(long, value_enum, default_value = "computed")]
        source: I12Source,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the commutator [A, B] of two diffop-v1 files.
    Commute {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Run a verification suite.
    Verify {
        #[arg(long)]
        k: u32,
        #[arg(long, default_value = "all")]
        suite: Suite,
        /// Enable the long-running k = 4 reductions.
        #[arg(long)]
        heavy: bool,
        /// Omit timings so output is byte-deterministic.
        #[arg(long)]
        no_timing: bool,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Express an operator as a polynomial in ordered monomials of H, I1, I2, I12.
    Reduce {
        /// Target operator file (diffop-v1).
        #[arg(long, conflicts_with = "relation")]
        target: Option<PathBuf>,
        /// Built-in target for catalog index --k.
        #[arg(long, value_enum)]
        relation: Option<Relation>,
        /// Catalog index supplying the generators when --gens is absent.
        #[arg(long)]
        k: Option<u32>,
        /// Generator files H, I1, I2, I12 in that order.
        #[arg(long, num_args = 4, value_names = ["H", "I1", "I2", "I12"])]
        gens: Option<Vec<PathBuf>>,
        #[arg(long)]
        degree: u32,
        /// Fixed parameter degree; without it the degree is deepened 2, 4, ... up to --ceiling.
        #[arg(long)]
        param_degree: Option<u32>,
        #[arg(long, default_value_t = verify::PARAM_CEILING)]
        ceiling: u32,
        #[arg(long, default_value_t = 1)]
        cap_i12: u32,
        #[arg(long)]
        cap_h: Option<u32>,
        #[arg(long)]
        cap_i1: Option<u32>,
        #[arg(long)]
        cap_i2: Option<u32>,
        #[arg(long, value_enum, default_value = "auto")]
        strategy: StrategyArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the triangular spectrum of h_k on P_N^(s).
    Spectrum {
        #[arg(long)]
        k: u32,
        #[arg(long = "N")]
        n: u32,
        #[arg(long)]
        s: u32,
        /// Bind w to a rational value.
        #[arg(long)]
        omega: Option<Rational>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

enum Failure {
    Usage(String),
    Verification(String),
    NoSolution(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Usage(_) => 2,
            Failure::NoSolution(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Verification(m) | Failure::NoSolution(m) => m,
        }
    }
}

fn usage(e: impl ToString) -> Failure {
    Failure::Usage(e.to_string())
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            let res = stdout.write_all(text.as_bytes()).and_then(|_| {
                if text.ends_with('\n') {
                    Ok(())
                } else {
                    stdout.write_all(b"\n")
                }
            });
            match res {
                Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(usage(e)),
                _ => Ok(()),
            }
        }
    }
}

fn read_op(p: &Path) -> Result<DiffOp, Failure> {
    let text = fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
    DiffOp::from_json_str(&text).map_err(|e| usage(format!("{}: {e}", p.display())))
}

fn render_op(op: &DiffOp, format: Format) -> String {
    match format {
        Format::Json => op.to_json_string(),
        Format::Text => print_operator(op),
    }
}

fn cmd_catalog(
    k: u32,
    which: OpName,
    format: Format,
    source: I12Source,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let op = match (which, source) {
        (OpName::I12, I12Source::Printed) => catalog::commutator_integral(k, Source::Fixture),
        _ => {
            let w = match which {
                OpName::H => Which::H,
                OpName::I1 => Which::I1,
                OpName::I2 => Which::I2,
                OpName::I12 => Which::I12,
            };
            catalog::operator(k, w)
        }
    }
    .map_err(usage)?;
    emit(out, &render_op(&op, format))
}

fn cmd_commute(a: &Path, b: &Path, out: Option<&Path>, format: Format) -> Result<(), Failure> {
    let c = read_op(a)?.commutator(&read_op(b)?).map_err(usage)?;
    emit(out, &render_op(&c, format))
}

fn cmd_verify(
    k: u32,
    suite: Suite,
    heavy: bool,
    no_timing: bool,
    format: Format,
) -> Result<(), Failure> {
    if !(1..=4).contains(&k) {
        return Err(usage(format!("no catalog integral for k={k}")));
    }
    let mut rep = verify::run(k, suite, VerifyOptions { heavy });
    if no_timing {
        rep.strip_timing();
    }
    let text = match format {
        Format::Json => rep.to_json_string(),
        Format::Text => rep.to_text(),
    };
    emit(None, &text)?;
    if rep.passed() {
        Ok(())
    } else {
        Err(Failure::Verification(format!(
            "{} check(s) failed",
            rep.failures().count()
        )))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_reduce(
    target: Option<&Path>,
    relation: Option<Relation>,
    k: Option<u32>,
    gens: Option<&[PathBuf]>,
    degree: u32,
    param_degree: Option<u32>,
    ceiling: u32,
    caps: Caps,
    strategy: Strategy,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let generators: [DiffOp; 4] = match (gens, k) {
        (Some(files), _) => {
            let ops = files
                .iter()
                .map(|p| read_op(p))
                .collect::<Result<Vec<_>, _>>()?;
            ops.try_into()
                .map_err(|_| usage("--gens takes four files"))?
        }
        (None, Some(k)) => catalog::generators(k).map_err(usage)?,
        (None, None) => return Err(usage("either --gens or --k is required")),
    };
    let target = match (target, relation) {
        (Some(p), _) => read_op(p)?,
        (None, Some(r)) => {
            let [_, i1, i2, i12] = &generators;
            match r {
                Relation::DoubleI1 => i1.commutator(i12),
                Relation::DoubleI2 => i2.commutator(i12),
                Relation::Syzygy => i12.compose(i12),
            }
            .map_err(usage)?
        }
        (None, None) => return Err(usage("either --target or --relation is required")),
    };
    let result = match param_degree {
        Some(p) => reduce_to_generators(
            &target,
            &generators,
            &ReduceOptions {
                caps,
                total_degree: degree,
                param_degree: p,
                strategy,
            },
        ),
        None => reduce_deepening(&target, &generators, caps, degree, 2, ceiling, strategy),
    };
    match result {
        Ok(r) => emit(out, &r.poly.to_json_string()),
        Err(e @ ReduceError::NoSolution { .. }) => Err(Failure::NoSolution(e.to_string())),
        Err(e) => Err(Failure::Verification(e.to_string())),
    }
}

fn cmd_spectrum(
    k: u32,
    n: u32,
    s: u32,
    omega: Option<Rational>,
    format: Format,
) -> Result<(), Failure> {
    let mut h = catalog::hamiltonian(k).map_err(usage)?;
    if let Some(w) = omega {
        h = h.eval_params(&ParamBinding {
            w: Some(w),
            ..Default::default()
        });
    }
    let rows = repspace::spectrum(&h, n, s).map_err(|e| match e {
        RepError::NotInvariant { .. } | RepError::NotTriangular { .. } => {
            Failure::Verification(e.to_string())
        }
        other => usage(other),
    })?;
    let text = match format {
        Format::Text => {
            let mut t = String::from("p\tq\teigenvalue\n");
            for ((p, q), v) in &rows {
                t.push_str(&format!("{p}\t{q}\t{v}\n"));
            }
            t
        }
        Format::Json => {
            let arr: Vec<_> = rows
                .iter()
                .map(|((p, q), v)| serde_json::json!({ "p": p, "q": q, "eigenvalue": v.to_json_terms() }))
                .collect();
            serde_json::to_string_pretty(&arr).expect("rows serialize")
        }
    };
    emit(None, &text)
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Catalog {
            k,
            which,
            format,
            source,
            out,
        } => cmd_catalog(k, which, format, source, out.as_deref()),
        Command::Commute { a, b, out, format } => cmd_commute(&a, &b, out.as_deref(), format),
        Command::Verify {
            k,
            suite,
            heavy,
            no_timing,
            format,
        } => cmd_verify(k, suite, heavy, no_timing, format),
        Command::Reduce {
            target,
            relation,
            k,
            gens,
            degree,
            param_degree,
            ceiling,
            cap_i12,
            cap_h,
            cap_i1,
            cap_i2,
            strategy,
            out,
        } => {
            let caps = Caps {
                h: cap_h,
                i1: cap_i1,
                i2: cap_i2,
                i12: Some(cap_i12),
            };
            let strategy = match strategy {
                StrategyArg::Auto => Strategy::Auto,
                StrategyArg::Symbolic => Strategy::Symbolic,
                StrategyArg::Modular => Strategy::Modular,
            };
            cmd_reduce(
                target.as_deref(),
                relation,
                k,
                gens.as_deref(),
                degree,
                param_degree,
                ceiling,
                caps,
                strategy,
                out.as_deref(),
            )
        }
        Command::Spectrum {
            k,
            n,
            s,
            omega,
            format,
        } => cmd_spectrum(k, n, s, omega, format),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
