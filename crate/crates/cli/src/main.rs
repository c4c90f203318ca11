use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use tikhcond_core::cond::cond_exact;
use tikhcond_core::experiment::{
    median_ratios, parse_selector, run_experiment, ExperimentSpec, LSpec, ProblemData, ProblemFile, ProblemSource,
    RatioReport,
};
use tikhcond_core::frechet::operator_for;
use tikhcond_core::golden::{reproduce_table, TableReport, TABLE_IDS};
use tikhcond_core::power::{estimate_all, InitVector};
use tikhcond_core::sce::sce_estimate;
use tikhcond_core::structmat::dense_from_rows;
use tikhcond_core::{
    params_from_dense, solve_tikhonov, ConditionReport, PowerOpts, SceOpts, SolvedProblem, StructureKind,
    StructuredMatrix, TikhonovProblem,
};

#[derive(Parser)]
#[command(name = "tikhcond", version, about = "Condition numbers of Tikhonov regularized solutions")]
struct Cli {
    /// Output encoding.
    #[arg(long, value_enum, default_value_t = Format::Table, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
    Md,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the regularized problem and print x_λ.
    Solve(ProblemArgs),
    /// Condition numbers of x_λ, exact or estimated.
    Cond {
        #[arg(value_enum)]
        method: CondMethod,
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_enum, default_value_t = StructureArg::Auto)]
        structure: StructureArg,
        /// Samples for `sce`.
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// Seed for the `sce` samples and the `power` start vector.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Iteration cap for `power`.
        #[arg(long, default_value_t = 10)]
        max_iters: usize,
        /// Evaluate `sce` samples on one thread.
        #[arg(long)]
        serial: bool,
    },
    /// Recompute the stored reference tables.
    Reproduce {
        /// Table id, or `all`.
        #[arg(long, default_value = "all")]
        table: String,
    },
    /// Perturbation experiment with over-estimation ratios.
    Experiment {
        #[arg(long)]
        spec: String,
    },
}

#[derive(Args)]
struct ProblemArgs {
    /// Example id or a JSON problem file.
    #[arg(long, default_value = "toeplitz5")]
    problem: String,
    /// Regularization parameter; defaults to the file's value or the example's usual one.
    #[arg(long)]
    lambda: Option<f64>,
    /// `identity`, `l1`, or a JSON file of rows.
    #[arg(long = "L")]
    l: Option<String>,
    /// `identity`, `row:<i>` (zero-based), or a JSON file of rows.
    #[arg(long = "M")]
    m: Option<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CondMethod {
    Exact,
    Power,
    Sce,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StructureArg {
    Auto,
    Symtoeplitz,
    Toeplitz,
    Hankel,
    Vandermonde,
    Cauchy,
    None,
}

fn default_lambda(id: &str) -> Option<f64> {
    match id {
        "toeplitz5" => Some(4.9988e-4),
        "hankel6" => Some(7.5918e-4),
        "vandermonde25x10" => Some(5.69),
        "cauchy10x8" => Some(1.72),
        _ => None,
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &str) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {path}"))
}

fn is_file(arg: &str) -> bool {
    Path::new(arg).is_file()
}

fn load(args: &ProblemArgs) -> Result<(ProblemData, f64)> {
    let mut data = if is_file(&args.problem) {
        read_json::<ProblemFile>(&args.problem)?.load()?
    } else {
        ProblemSource::Id(args.problem.clone()).load()?
    };
    let n = data.handle.dims().1;
    if let Some(l) = &args.l {
        data.l = if is_file(l) {
            dense_from_rows(&read_json::<Vec<Vec<f64>>>(l)?)?
        } else {
            LSpec::Named(l.clone()).build(n)?
        };
    }
    if let Some(m) = &args.m {
        data.selector = if is_file(m) {
            dense_from_rows(&read_json::<Vec<Vec<f64>>>(m)?)?
        } else {
            parse_selector(m, n)?
        };
    }
    let lambda = args
        .lambda
        .or(data.lambda)
        .or_else(|| default_lambda(args.problem.trim()))
        .ok_or_else(|| anyhow!("--lambda is required for {}", args.problem))?;
    Ok((data, lambda))
}

fn resolve_structure(arg: StructureArg, handle: &StructuredMatrix) -> Result<Option<StructuredMatrix>> {
    let kind = match arg {
        StructureArg::Auto => return Ok(Some(handle.clone())),
        StructureArg::None => return Ok(None),
        StructureArg::Symtoeplitz => StructureKind::SymToeplitz,
        StructureArg::Toeplitz => StructureKind::Toeplitz,
        StructureArg::Hankel => StructureKind::Hankel,
        StructureArg::Vandermonde => StructureKind::Vandermonde,
        StructureArg::Cauchy => StructureKind::Cauchy,
    };
    if kind == handle.kind() {
        return Ok(Some(handle.clone()));
    }
    let (m, n) = handle.dims();
    let params = params_from_dense(kind, &handle.materialize())
        .with_context(|| format!("A is not {kind}"))?;
    Ok(Some(StructuredMatrix::new(kind, m, n, params)?))
}

/// Headers and string cells for the non-JSON encodings.
struct Grid {
    headers: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Grid {
    fn render(&self, format: Format) -> String {
        let mut out = String::new();
        match format {
            Format::Csv => {
                out.push_str(&self.headers.join(","));
                out.push('\n');
                for r in &self.rows {
                    out.push_str(&r.join(","));
                    out.push('\n');
                }
            }
            Format::Md => {
                let _ = writeln!(out, "| {} |", self.headers.join(" | "));
                let _ = writeln!(out, "|{}", "---|".repeat(self.headers.len()));
                for r in &self.rows {
                    let _ = writeln!(out, "| {} |", r.join(" | "));
                }
            }
            _ => {
                let mut widths: Vec<usize> = self.headers.iter().map(|h| h.chars().count()).collect();
                for r in &self.rows {
                    for (w, c) in widths.iter_mut().zip(r) {
                        *w = (*w).max(c.chars().count());
                    }
                }
                let line = |cells: Vec<&str>| {
                    let padded: Vec<String> = cells
                        .iter()
                        .zip(&widths)
                        .map(|(c, w)| format!("{c:<w$}"))
                        .collect();
                    padded.join("  ").trim_end().to_string()
                };
                out.push_str(&line(self.headers.clone()));
                out.push('\n');
                for r in &self.rows {
                    out.push_str(&line(r.iter().map(String::as_str).collect()));
                    out.push('\n');
                }
            }
        }
        out
    }
}

fn emit<T: Serialize>(format: Format, value: &T, grid: impl FnOnce() -> Grid) -> Result<()> {
    if format == Format::Json {
        println!("{}", serde_json::to_string_pretty(value)?);
    } else {
        print!("{}", grid().render(format));
    }
    Ok(())
}

fn num(v: f64) -> String {
    format!("{v:.5e}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), num)
}

#[derive(Serialize)]
struct SolveOutput {
    lambda: f64,
    x: Vec<f64>,
    residual_norm: f64,
    filters: Vec<f64>,
}

fn cmd_solve(format: Format, args: &ProblemArgs) -> Result<()> {
    let (data, lambda) = load(args)?;
    let p = data.problem(lambda)?;
    let sol = solve_tikhonov(&p)?;
    let out = SolveOutput {
        lambda,
        x: sol.x_lambda.iter().copied().collect(),
        residual_norm: sol.r_lambda.norm(),
        filters: sol.filters.iter().copied().collect(),
    };
    emit(format, &out, || Grid {
        headers: vec!["i", "x", "filter"],
        rows: (0..out.x.len())
            .map(|i| vec![i.to_string(), num(out.x[i]), out.filters.get(i).map_or(String::new(), |f| num(*f))])
            .collect(),
    })
}

#[derive(Serialize)]
struct CondOutput<'a> {
    problem: &'a str,
    lambda: f64,
    #[serde(flatten)]
    report: &'a ConditionReport,
}

fn report_grid(r: &ConditionReport) -> Grid {
    Grid {
        headers: vec!["structure", "method", "normwise", "mixed", "componentwise"],
        rows: vec![vec![
            r.structure.name().to_string(),
            format!("{:?}", r.method).to_lowercase(),
            num(r.normwise),
            num(r.mixed),
            opt(r.componentwise),
        ]],
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_cond(
    format: Format,
    method: CondMethod,
    args: &ProblemArgs,
    structure: StructureArg,
    k: usize,
    seed: u64,
    max_iters: usize,
    serial: bool,
) -> Result<()> {
    let (data, lambda) = load(args)?;
    let handle = resolve_structure(structure, &data.handle)?;
    let p: TikhonovProblem = data.problem(lambda)?;
    let ctx = SolvedProblem::new(p)?;
    match method {
        CondMethod::Exact | CondMethod::Power => {
            let report = if method == CondMethod::Exact {
                cond_exact(&ctx, handle.as_ref())?
            } else {
                let op = operator_for(&ctx, handle.as_ref())?;
                let opts = PowerOpts {
                    max_iters,
                    init: InitVector::Random(seed),
                    ..PowerOpts::default()
                };
                estimate_all(op.as_ref(), &ctx.mx(), &opts)?
            };
            let out = CondOutput {
                problem: &args.problem,
                lambda,
                report: &report,
            };
            emit(format, &out, || report_grid(&report))
        }
        CondMethod::Sce => {
            let opts = SceOpts {
                k,
                seed,
                parallel: !serial,
                ..SceOpts::default()
            };
            let rep = sce_estimate(&ctx, handle.as_ref(), &opts)?;
            emit(format, &rep, || Grid {
                headers: vec!["kappa_sce", "m_sce", "c_sce", "k", "seed"],
                rows: vec![vec![num(rep.kappa_sce), num(rep.m_sce), opt(rep.c_sce), k.to_string(), seed.to_string()]],
            })
        }
    }
}

/// Returns whether every table passed.
fn cmd_reproduce(format: Format, table: &str) -> Result<bool> {
    let ids: Vec<&str> = if table == "all" {
        TABLE_IDS.to_vec()
    } else {
        vec![table]
    };
    let reports: Vec<TableReport> = ids.iter().map(|id| reproduce_table(id)).collect::<tikhcond_core::Result<_>>()?;
    emit(format, &reports, || Grid {
        headers: vec![
            "table", "column", "lambda", "M", "quantity", "expected", "computed", "deviation", "pass",
        ],
        rows: reports
            .iter()
            .flat_map(|t| {
                t.cells.iter().map(move |c| {
                    vec![
                        t.table.clone(),
                        c.column.clone(),
                        num(c.lambda),
                        format!("{:?}", c.selector),
                        format!("{:?}", c.quantity),
                        num(c.expected),
                        opt(c.computed),
                        c.deviation.map_or_else(|| "-".into(), |d| format!("{d:.2e}")),
                        if c.pass { "ok" } else { "FAIL" }.into(),
                    ]
                })
            })
            .collect(),
    })?;
    Ok(reports.iter().all(|r| r.pass))
}

#[derive(Serialize)]
struct Medians {
    r_kappa: Option<f64>,
    r_m: Option<f64>,
    r_c: Option<f64>,
}

#[derive(Serialize)]
struct ExperimentOutput {
    reports: Vec<RatioReport>,
    median: Medians,
}

fn cmd_experiment(format: Format, spec_path: &str) -> Result<()> {
    let spec: ExperimentSpec = read_json(spec_path)?;
    let reports = run_experiment(&spec)?;
    let (r_kappa, r_m, r_c) = median_ratios(&reports);
    let out = ExperimentOutput {
        reports,
        median: Medians { r_kappa, r_m, r_c },
    };
    emit(format, &out, || {
        let mut rows: Vec<Vec<String>> = out
            .reports
            .iter()
            .map(|r| {
                vec![
                    r.seed.to_string(),
                    opt(r.r_kappa),
                    opt(r.r_m),
                    opt(r.r_c),
                    num(r.true_errors.normwise),
                    num(r.true_errors.mixed),
                    num(r.true_errors.componentwise),
                ]
            })
            .collect();
        rows.push(vec![
            "median".into(),
            opt(out.median.r_kappa),
            opt(out.median.r_m),
            opt(out.median.r_c),
            String::new(),
            String::new(),
            String::new(),
        ]);
        Grid {
            headers: vec!["seed", "r_kappa", "r_m", "r_c", "err_norm", "err_mixed", "err_comp"],
            rows,
        }
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    let format = cli.format;
    match cli.command {
        Command::Solve(args) => cmd_solve(format, &args)?,
        Command::Cond {
            method,
            problem,
            structure,
            k,
            seed,
            max_iters,
            serial,
        } => cmd_cond(format, method, &problem, structure, k, seed, max_iters, serial)?,
        Command::Reproduce { table } => {
            if table != "all" && !TABLE_IDS.contains(&table.as_str()) {
                bail!("unknown table `{table}`; expected one of {} or all", TABLE_IDS.join(", "));
            }
            if !cmd_reproduce(format, &table)? {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Experiment { spec } => cmd_experiment(format, &spec)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
