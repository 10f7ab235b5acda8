//! `crosspoint`: run, sweep and verify the Schwarz solvers from the command line.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crosspoint_core::harness::{
    self, best_line, degenerate_crossvalidate, degenerate_csv, fixed_point_check, parse_pair, report_csv, run_sweep,
    sweep_csv, ConfigMap, DegenerateStart, Range, SweepSpec,
};
use crosspoint_core::{run_osm, solve_mono, Error, Load, Mesh, Method, Rhs};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_VERIFY: u8 = 4;

/// Largest cells-per-subdomain count swept without `--large-grids`.
const DESK_GRID: usize = 20;

#[derive(Parser)]
#[command(name = "crosspoint", version, about = "Optimized Schwarz methods with cross-points")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one iteration history and print it as CSV.
    Solve {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        out: OutArgs,
        /// Leave the elapsed-time column empty (byte-reproducible output).
        #[arg(long)]
        no_timing: bool,
    },
    /// Sweep the Robin parameter and overlump factor, report the best convergence factor.
    Sweep(SweepArgs),
    /// Compare the closed-form 8x8 iteration with the engine on the one-element 2x2 mesh.
    Degenerate {
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        h: f64,
        #[arg(long, default_value_t = 0.0)]
        eta: f64,
        #[arg(long, default_value_t = 100)]
        iters: usize,
        /// random, zero, plus-one or minus-one (the two non-decaying eigenvectors).
        #[arg(long, default_value = "random")]
        init: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Check that traces built from the mono-domain solution are a fixed point.
    FixedPoint {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Solve the mono-domain problem and compare with the closed-form Poisson solution.
    Mono {
        #[arg(long, value_parser = parse_pair::<usize>, default_value = "40x40")]
        cells: (usize, usize),
        #[arg(long, value_parser = parse_pair::<f64>, default_value = "4x4")]
        extent: (f64, f64),
        #[arg(long, default_value_t = 0.0)]
        eta: f64,
        #[arg(long, default_value = "poisson")]
        rhs: String,
        #[command(flatten)]
        out: OutArgs,
    },
}

/// Run configuration: an optional `key = value` file, overridden by flags.
#[derive(Args)]
struct RunArgs {
    /// Configuration file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    /// Total cells, AxB.
    #[arg(long)]
    cells: Option<String>,
    /// Subdomain grid, PxQ.
    #[arg(long)]
    subdomains: Option<String>,
    /// Domain size, AxB (default 2 per subdomain in each direction).
    #[arg(long)]
    extent: Option<String>,
    /// auxiliary or complete.
    #[arg(long)]
    method: Option<String>,
    /// consistent, lumped or overlumped.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    omega: Option<String>,
    #[arg(long)]
    iters: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// zero (error equations) or poisson.
    #[arg(long)]
    rhs: Option<String>,
    /// Start from the mono-domain fixed point with one trace value shifted by this amount.
    #[arg(long)]
    perturb: Option<String>,
}

impl RunArgs {
    fn config_map(&self, defaults: &[(&str, &str)]) -> Result<ConfigMap, Error> {
        let mut map = match &self.config {
            Some(path) => ConfigMap::parse(&read(path)?)?,
            None => ConfigMap::default(),
        };
        for (k, v) in defaults {
            if map.get(k).is_none() {
                map.set(k, *v)?;
            }
        }
        let flags = [
            ("p", &self.p),
            ("eta", &self.eta),
            ("cells", &self.cells),
            ("subdomains", &self.subdomains),
            ("extent", &self.extent),
            ("method", &self.method),
            ("variant", &self.variant),
            ("omega", &self.omega),
            ("iters", &self.iters),
            ("seed", &self.seed),
            ("rhs", &self.rhs),
            ("perturb", &self.perturb),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                map.set(k, v.as_str())?;
            }
        }
        Ok(map)
    }
}

#[derive(Args)]
struct OutArgs {
    /// Write CSV here instead of standard output.
    #[arg(long)]
    csv_out: Option<PathBuf>,
}

impl OutArgs {
    fn emit(&self, csv: &str) -> Result<(), Error> {
        match &self.csv_out {
            Some(path) => fs::write(path, csv)
                .map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", path.display()))),
            None => {
                print!("{csv}");
                Ok(())
            }
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    /// Cells per subdomain in each direction, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "10")]
    grids: Vec<usize>,
    /// Subdomain grids, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_pair::<usize>, default_value = "2x1")]
    subdomains: Vec<(usize, usize)>,
    /// Robin parameter range start:stop:step; repeat to merge ranges.
    #[arg(long = "p-range", default_value = "1:20:0.5")]
    p_range: Vec<Range>,
    #[arg(long = "omega-range", default_value = "0:100:0.25")]
    omega_range: Range,
    #[arg(long, default_value = "auxiliary")]
    method: Method,
    /// Window n0:n1 for the convergence factor (default 0:50 for two subdomains, 30:60 otherwise).
    #[arg(long)]
    window: Option<String>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    /// Allow more than 20x20 cells per subdomain.
    #[arg(long)]
    large_grids: bool,
    #[command(flatten)]
    out: OutArgs,
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::Contract(_) | Error::Unsupported(_) => EXIT_CONFIG,
        Error::Singular { .. } | Error::Numeric(_) | Error::Protocol(_) | Error::UndefinedFactor(_) => EXIT_NUMERIC,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cmd: Command) -> Result<u8, Error> {
    match cmd {
        Command::Solve { run, out, no_timing } => {
            let cfg = run.config_map(&[])?.to_osm_config()?;
            let report = run_osm(&cfg)?;
            out.emit(&report_csv(&cfg, &report, !no_timing))?;
            Ok(0)
        }
        Command::Sweep(args) => sweep(args),
        Command::Degenerate { p, h, eta, iters, init, seed, out } => {
            let start = match init.as_str() {
                "random" => DegenerateStart::Random(seed),
                "zero" => DegenerateStart::Given([0.0; 8]),
                "plus-one" => DegenerateStart::Given([-1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0]),
                "minus-one" => DegenerateStart::Given([1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0]),
                other => return Err(Error::InvalidArgument(format!("unknown init '{other}'"))),
            };
            let rows = degenerate_crossvalidate(p, h, eta, iters, start)?;
            out.emit(&degenerate_csv(p, h, eta, &rows))?;
            let worst = rows.iter().fold(0.0f64, |m, r| m.max(r.max_abs_diff));
            if worst > 1e-10 {
                eprintln!("cross-validation failed: max_abs_diff {worst:e}");
                return Ok(EXIT_VERIFY);
            }
            Ok(0)
        }
        Command::FixedPoint { run } => {
            let cfg = run.config_map(&[("rhs", "poisson")])?.to_osm_config()?;
            let perturbation = match cfg.start {
                crosspoint_core::Start::FixedPoint { perturbation } => perturbation,
                _ => 0.0,
            };
            let r = fixed_point_check(&cfg, perturbation)?;
            println!(
                "method={} variant={} p={} start_deviation={:e} max_rel_change={:e} max_abs_change={:e}",
                cfg.method, cfg.variant, cfg.p, r.start_deviation, r.max_rel_change, r.max_abs_change
            );
            if r.passed(1e-10) {
                println!("fixed point: pass");
                Ok(0)
            } else {
                println!("fixed point: FAIL");
                Ok(EXIT_VERIFY)
            }
        }
        Command::Mono { cells, extent, eta, rhs, out } => {
            let rhs: Rhs = rhs.parse()?;
            let mesh = Mesh::new(cells.0, cells.1, extent.0, extent.1)?;
            let load = match rhs {
                Rhs::Zero => Load::Zero,
                Rhs::Poisson => Load::function(crosspoint_core::assembly::poisson_benchmark_rhs),
            };
            let u = solve_mono(&mesh, eta, &load)?;
            let mut csv = harness::comment_line(&[
                ("cells", format!("{}x{}", cells.0, cells.1)),
                ("eta", eta.to_string()),
                ("rhs", rhs.to_string()),
            ]);
            csv.push_str("node,x,y,u\n");
            let mut err = 0.0f64;
            for (j, v) in u.iter().enumerate() {
                let [x, y] = mesh.coords(j);
                csv.push_str(&format!("{j},{x},{y},{v:e}\n"));
                if rhs == Rhs::Poisson && eta == 0.0 {
                    err = err.max((v - x * (4.0 - x) * y * (4.0 - y)).abs());
                }
            }
            if out.csv_out.is_some() {
                out.emit(&csv)?;
            }
            println!("nodes={} max_u={:e}", u.len(), u.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            if rhs == Rhs::Poisson && eta == 0.0 {
                println!("max_nodal_error={err:e}");
            }
            Ok(0)
        }
    }
}

fn sweep(args: SweepArgs) -> Result<u8, Error> {
    if !args.large_grids {
        if let Some(g) = args.grids.iter().find(|&&g| g > DESK_GRID) {
            return Err(Error::InvalidArgument(format!(
                "grid {g} exceeds {DESK_GRID} cells per subdomain; pass --large-grids"
            )));
        }
    }
    let mut code = 0;
    let mut csv = String::new();
    for &sub in &args.subdomains {
        let window = match &args.window {
            Some(w) => {
                let (a, b) = w
                    .split_once(':')
                    .ok_or_else(|| Error::InvalidArgument(format!("window must be n0:n1, got '{w}'")))?;
                let parse = |s: &str| s.trim().parse().map_err(|_| Error::InvalidArgument(format!("bad window '{w}'")));
                (parse(a)?, parse(b)?)
            }
            None => SweepSpec::standard_grid(1, sub, args.method).window,
        };
        let sweep = SweepSpec {
            p: args.p_range.clone(),
            omega: args.omega_range,
            grids: args.grids.clone(),
            decompositions: vec![sub],
            method: args.method,
            window,
            seed: args.seed,
            eta: args.eta,
        };
        for r in run_sweep(&sweep)? {
            csv.push_str(&sweep_csv(&r));
            eprintln!("{}x{} cells, {}x{} subdomains: {}", r.grid, r.grid, sub.0, sub.1, best_line(&r));
            if r.failures > 0 {
                eprintln!("warning: {} sweep cells failed and were recorded as NaN", r.failures);
            }
            if r.best.is_none() {
                code = EXIT_NUMERIC;
            }
        }
    }
    args.out.emit(&csv)?;
    Ok(code)
}
