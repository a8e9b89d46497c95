//! Thin command-line front end over the library experiment drivers.
//!
//! Subcommands: `simulate`, `converge`, `drift`, `symmetry`. Every flag can
//! also be given in a `--config` key=value file; explicit flags win.
//! Exit codes: 0 success, 1 usage/config error, 2 numerical failure.

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use lim::config::{normalize_key, parse_config_file};
use lim::error::{Error, Result};
use lim::experiments::{
    cmd_converge, cmd_drift, cmd_symmetry, ConvergeSpec, DriftSpec, MethodSpec, SymmetrySpec,
    REFERENCE_K, REFERENCE_S,
};
use lim::harness::{cmd_simulate, steps_for, Method, RunConfig};
use lim::solver::{SolverConfig, SolverKind};

#[derive(Parser)]
#[command(
    name = "lim",
    version,
    about = "Energy-conserving line-integral integrators for charged-particle dynamics"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate one trajectory and write it as CSV.
    Simulate(CommonArgs),
    /// Convergence study over the nested step sizes h/n.
    Converge(ConvergeArgs),
    /// Energy-error time series with a least-squares drift slope.
    Drift(DriftArgs),
    /// Forward/backward round-trip symmetry check on random states.
    Symmetry(SymmetryArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Built-in problem: ex1, ex2 or ex3.
    #[arg(long)]
    problem: Option<String>,
    /// Integration method: boris or lim.
    #[arg(long)]
    method: Option<String>,
    /// Stage count s >= 2 (lim only).
    #[arg(long)]
    s: Option<usize>,
    /// Outer quadrature size k >= s (lim only, default 2s).
    #[arg(long)]
    k: Option<usize>,
    /// Step size.
    #[arg(long)]
    h: Option<f64>,
    /// Final time; must be a whole number of steps.
    #[arg(long)]
    tfinal: Option<f64>,
    /// Stage solver: fixed-point, blended-magnetic or blended-electric.
    #[arg(long)]
    solver: Option<String>,
    /// Solver increment tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Solver iteration cap.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Record every this many steps.
    #[arg(long)]
    record_every: Option<usize>,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value defaults file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for random trial states.
    #[arg(long)]
    seed: Option<u64>,
    /// Treat the magnetic field as uniform (enables the fast path).
    #[arg(long)]
    constant_b: bool,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Methods to compare, comma-separated (default: boris,lim).
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// LIM stage counts, comma-separated (default: 2,3); k = 2s each.
    #[arg(long, value_delimiter = ',')]
    s_list: Option<Vec<usize>>,
    /// Step refinements n with h = h/n, comma-separated (default: 1,2,4,8,16).
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    /// Reference integrator stage count (default 6).
    #[arg(long)]
    ref_s: Option<usize>,
    /// Reference integrator quadrature size (default 12).
    #[arg(long)]
    ref_k: Option<usize>,
}

#[derive(Args)]
struct DriftArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Recording window in steps (default: about 1000 rows).
    #[arg(long)]
    window: Option<usize>,
}

#[derive(Args)]
struct SymmetryArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of random trial states (default 20).
    #[arg(long)]
    trials: Option<usize>,
}

/// Flag value if set, else config-file value parsed from text.
fn pick<T: Clone + FromStr>(
    flag: &Option<T>,
    file: &HashMap<String, String>,
    key: &str,
) -> Result<Option<T>> {
    if let Some(v) = flag {
        return Ok(Some(v.clone()));
    }
    match file.get(&normalize_key(key)) {
        Some(text) => text
            .parse::<T>()
            .map(Some)
            .map_err(|_| Error::Config(format!("config key `{key}`: cannot parse `{text}`"))),
        None => Ok(None),
    }
}

fn require<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| {
        Error::Config(format!(
            "missing required setting `{key}` (flag or config file)"
        ))
    })
}

struct Settings {
    problem: String,
    method: Method,
    s: usize,
    k: usize,
    h: f64,
    t_final: Option<f64>,
    solver: SolverConfig,
    record_every: usize,
    out: Option<PathBuf>,
    seed: u64,
}

impl Settings {
    fn t_final(&self) -> Result<f64> {
        require(self.t_final, "tfinal")
    }

    fn method_spec(&self) -> MethodSpec {
        match self.method {
            Method::Boris => MethodSpec::Boris,
            Method::Lim => MethodSpec::Lim {
                s: self.s,
                k: self.k,
            },
        }
    }

    fn run_config(&self) -> Result<RunConfig> {
        Ok(RunConfig {
            problem: self.problem.clone(),
            method: self.method,
            s: self.s,
            k: self.k,
            h: self.h,
            t_final: self.t_final()?,
            solver: self.solver,
            record_every: self.record_every,
            out: self.out.clone(),
            seed: self.seed,
        })
    }
}

fn resolve(common: &CommonArgs) -> Result<Settings> {
    let file = match &common.config {
        Some(path) => parse_config_file(path)?,
        None => HashMap::new(),
    };

    let problem = require(pick(&common.problem, &file, "problem")?, "problem")?;
    let method = match pick::<String>(&common.method, &file, "method")? {
        Some(text) => text.parse::<Method>()?,
        None => Method::Lim,
    };
    let s = pick(&common.s, &file, "s")?.unwrap_or(2);
    let k = pick(&common.k, &file, "k")?.unwrap_or(2 * s);
    let h = require(pick(&common.h, &file, "h")?, "h")?;
    let t_final = pick(&common.tfinal, &file, "tfinal")?;

    let kind: SolverKind = pick(&common.solver, &file, "solver")?
        .map(|text: String| text.parse())
        .transpose()?
        .unwrap_or(SolverKind::FixedPoint);
    let constant_b =
        common.constant_b || pick(&None::<bool>, &file, "constant_b")?.unwrap_or(false);
    let solver = SolverConfig {
        kind,
        tol: pick(&common.tol, &file, "tol")?.unwrap_or(1e-14),
        max_iter: pick(&common.max_iter, &file, "max_iter")?.unwrap_or(100),
        constant_b,
    };

    Ok(Settings {
        problem,
        method,
        s,
        k,
        h,
        t_final,
        solver,
        record_every: pick(&common.record_every, &file, "record_every")?.unwrap_or(1),
        out: common
            .out
            .clone()
            .or_else(|| file.get("out").map(PathBuf::from)),
        seed: pick(&common.seed, &file, "seed")?.unwrap_or(0),
    })
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Simulate(common) => {
            let settings = resolve(&common)?;
            cmd_simulate(&settings.run_config()?)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Converge(args) => {
            let settings = resolve(&args.common)?;
            let methods = build_method_list(&args, settings.s)?;
            let spec = ConvergeSpec {
                problem: settings.problem.clone(),
                methods,
                h0: settings.h,
                n_list: args.n_list.unwrap_or_else(|| vec![1, 2, 4, 8, 16]),
                t_final: settings.t_final()?,
                solver: settings.solver,
                ref_s: args.ref_s.unwrap_or(REFERENCE_S),
                ref_k: args.ref_k.unwrap_or(REFERENCE_K),
            };
            let table = cmd_converge(&spec)?;
            table.print_console();
            if let Some(path) = &settings.out {
                let file = std::fs::File::create(path)?;
                table.write_csv(std::io::BufWriter::new(file))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Drift(args) => {
            let settings = resolve(&args.common)?;
            let t_final = settings.t_final()?;
            let n_steps = steps_for(t_final, settings.h)?;
            let spec = DriftSpec {
                problem: settings.problem.clone(),
                method: settings.method_spec(),
                h: settings.h,
                t_final,
                window: args.window.unwrap_or_else(|| (n_steps / 1000).max(1)),
                solver: settings.solver,
            };
            let series = cmd_drift(&spec)?;
            eprintln!(
                "least-squares slope of |H_err| vs t: {:.6e} per unit time",
                series.slope
            );
            match &settings.out {
                Some(path) => {
                    let file = std::fs::File::create(path)?;
                    series.write_csv(std::io::BufWriter::new(file))?;
                }
                None => series.write_csv(std::io::stdout().lock())?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Symmetry(args) => {
            let settings = resolve(&args.common)?;
            let spec = SymmetrySpec {
                problem: settings.problem.clone(),
                method: settings.method_spec(),
                h: settings.h,
                trials: args.trials.unwrap_or(20),
                seed: settings.seed,
                solver: settings.solver,
            };
            let report = cmd_symmetry(&spec)?;
            report.print_console();
            if report.pass {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(2))
            }
        }
    }
}

fn build_method_list(args: &ConvergeArgs, default_s: usize) -> Result<Vec<MethodSpec>> {
    let names = args
        .methods
        .clone()
        .unwrap_or_else(|| vec!["boris".into(), "lim".into()]);
    let s_list = args.s_list.clone().unwrap_or_else(|| {
        if args.common.s.is_some() {
            vec![default_s]
        } else {
            vec![2, 3]
        }
    });
    let mut methods = Vec::new();
    for name in names {
        match name.parse::<Method>()? {
            Method::Boris => methods.push(MethodSpec::Boris),
            Method::Lim => {
                for &s in &s_list {
                    methods.push(MethodSpec::Lim { s, k: 2 * s });
                }
            }
        }
    }
    Ok(methods)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let benign = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if benign {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(e.exit_code())
        }
    }
}
