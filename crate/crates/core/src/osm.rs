//! Optimized Schwarz iteration driver.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::assembly::{InterfaceMatrix, Load, SubdomainLayout, SubdomainSystem, SystemParams};
use crate::error::{invalid, Error, Result};
use crate::linalg::DenseMatrix;
use crate::mesh::{Decomposition, Mesh};
use crate::transmission::{AuxTraces, CompleteTraces, Interfaces};

/// How cross-points exchange information.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Auxiliary,
    Complete,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Auxiliary => "aux",
            Method::Complete => "complete",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aux" | "auxiliary" => Ok(Method::Auxiliary),
            "complete" | "cc" => Ok(Method::Complete),
            _ => Err(invalid(format!("unknown method '{s}' (aux, complete)"))),
        }
    }
}

/// Trace state of either method.
#[derive(Debug, Clone, PartialEq)]
pub enum Traces {
    Aux(AuxTraces),
    Complete(CompleteTraces),
}

impl Traces {
    pub fn max_abs(&self) -> f64 {
        match self {
            Traces::Aux(t) => t.max_abs(),
            Traces::Complete(t) => t.max_abs(),
        }
    }
}

/// Subdomain solves above this many unknowns in total run in parallel.
const PARALLEL_UNKNOWNS: usize = 4096;

/// Assembled subdomain problems and interface data for one configuration.
pub struct Engine {
    pub decomposition: Decomposition,
    pub systems: Vec<SubdomainSystem>,
    pub interfaces: Interfaces,
    pub method: Method,
    pub params: SystemParams,
    parallel: bool,
}

impl Engine {
    pub fn new(d: Decomposition, params: SystemParams, method: Method, load: &Load) -> Result<Self> {
        params.variant.validate()?;
        if !(params.p > 0.0) || !params.p.is_finite() {
            return Err(invalid(format!("Robin parameter must be positive, got {}", params.p)));
        }
        if !(params.eta >= 0.0) || !params.eta.is_finite() {
            return Err(invalid(format!("reaction coefficient must be >= 0, got {}", params.eta)));
        }
        let edges = d.interface_edges();
        let systems = (0..d.num_subdomains())
            .into_par_iter()
            .map(|i| SubdomainSystem::assemble(&d, &edges, i, params, load))
            .collect::<Result<Vec<_>>>()?;
        let layouts: Vec<&SubdomainLayout> = systems.iter().map(|s| &s.layout).collect();
        let interfaces = Interfaces::new(&d, &edges, &layouts, params.p, params.variant)?;
        let parallel = systems.iter().map(|s| s.len()).sum::<usize>() > PARALLEL_UNKNOWNS;
        Ok(Self { decomposition: d, systems, interfaces, method, params, parallel })
    }

    pub fn zero_traces(&self) -> Traces {
        match self.method {
            Method::Auxiliary => Traces::Aux(AuxTraces::zeros(&self.interfaces)),
            Method::Complete => Traces::Complete(CompleteTraces::zeros(&self.systems)),
        }
    }

    /// Uniform `[-1, 1]` traces from a ChaCha8 stream.
    pub fn random_traces(&self, seed: u64) -> Traces {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match self.method {
            Method::Auxiliary => Traces::Aux(AuxTraces::random(&self.interfaces, &mut rng)),
            Method::Complete => Traces::Complete(CompleteTraces::random(&self.systems, &mut rng)),
        }
    }

    /// Traces for which the mono-domain solution is reproduced by every subdomain.
    pub fn fixed_point_traces(&self, restricted: &[Vec<f64>]) -> Result<Traces> {
        Ok(match self.method {
            Method::Auxiliary => Traces::Aux(AuxTraces::from_monodomain(&self.interfaces, &self.systems, restricted)?),
            Method::Complete => Traces::Complete(CompleteTraces::from_monodomain(&self.systems, restricted)),
        })
    }

    fn robin_data(&self, traces: &Traces, i: usize) -> Result<Vec<f64>> {
        match traces {
            Traces::Aux(t) => t.gather(&self.interfaces, i, self.systems[i].len()),
            Traces::Complete(t) => {
                let g = t.g.get(i).ok_or_else(|| Error::Protocol(format!("no traces for subdomain {i}")))?;
                if g.len() != self.systems[i].len() {
                    return Err(Error::Protocol(format!("trace length mismatch on subdomain {i}")));
                }
                Ok(g.clone())
            }
        }
    }

    /// Solves every subdomain with the given traces.
    pub fn solve_all(&self, traces: &Traces) -> Result<Vec<Vec<f64>>> {
        let solve = |i: usize| self.systems[i].solve(&self.robin_data(traces, i)?);
        if self.parallel {
            (0..self.systems.len()).into_par_iter().map(solve).collect()
        } else {
            (0..self.systems.len()).map(solve).collect()
        }
    }

    /// Traces of the next iteration from the current traces and the solutions they produced.
    pub fn exchange(&self, traces: &Traces, solutions: &[Vec<f64>]) -> Result<Traces> {
        match traces {
            Traces::Aux(t) => Ok(Traces::Aux(t.update(&self.interfaces, solutions)?)),
            Traces::Complete(t) => Ok(Traces::Complete(t.update(&self.interfaces, &self.systems, solutions)?)),
        }
    }

    /// One iteration: solve, then exchange. Returns the solutions and the next traces.
    pub fn step(&self, traces: &Traces) -> Result<(Vec<Vec<f64>>, Traces)> {
        let u = self.solve_all(traces)?;
        let next = self.exchange(traces, &u)?;
        Ok((u, next))
    }

    /// Restriction of a global nodal vector to every subdomain.
    pub fn restrict(&self, global: &[f64]) -> Vec<Vec<f64>> {
        self.systems.iter().map(|s| s.layout.nodes.iter().map(|&j| global[j]).collect()).collect()
    }

    pub fn energy(&self, traces: &Traces) -> Option<f64> {
        match traces {
            Traces::Aux(t) => Some(t.energy(&self.interfaces)),
            Traces::Complete(_) => None,
        }
    }
}

/// Max-norm distance between subdomain solutions and restricted reference values.
pub fn error_linf(solutions: &[Vec<f64>], reference: &[Vec<f64>]) -> f64 {
    solutions.iter().zip(reference).flat_map(|(u, r)| u.iter().zip(r).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max)
}

/// Mono-domain finite-element solution as a global nodal vector (zero on the outer boundary).
pub fn solve_mono(mesh: &Mesh, eta: f64, load: &Load) -> Result<Vec<f64>> {
    let d = Decomposition::new(*mesh, 1, 1)?;
    let params = SystemParams { p: 1.0, eta, variant: InterfaceMatrix::Lumped };
    let sys = SubdomainSystem::assemble(&d, &[], 0, params, load)?;
    let u = sys.solve(&vec![0.0; sys.len()])?;
    let mut out = vec![0.0; mesh.num_nodes()];
    for (&j, v) in sys.layout.nodes.iter().zip(u) {
        out[j] = v;
    }
    Ok(out)
}

/// Right-hand side choice for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rhs {
    /// Homogeneous problem; the iterate is its own error.
    Zero,
    /// `f = 2(y(4-y) + x(4-x))`, error measured against the mono-domain solution.
    Poisson,
}

impl FromStr for Rhs {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zero" | "0" => Ok(Rhs::Zero),
            "poisson" => Ok(Rhs::Poisson),
            _ => Err(invalid(format!("unknown right-hand side '{s}' (zero, poisson)"))),
        }
    }
}

impl fmt::Display for Rhs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rhs::Zero => "zero",
            Rhs::Poisson => "poisson",
        })
    }
}

/// Starting traces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Start {
    /// Uniform `[-1, 1]` traces from the run seed.
    Random,
    /// Zero traces.
    Zero,
    /// Mono-domain fixed point with one trace value shifted by the given amount.
    FixedPoint { perturbation: f64 },
}

/// Full description of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct OsmConfig {
    pub cells: (usize, usize),
    pub extent: (f64, f64),
    pub subdomains: (usize, usize),
    pub p: f64,
    pub eta: f64,
    pub variant: InterfaceMatrix,
    pub method: Method,
    pub iterations: usize,
    pub seed: u64,
    pub rhs: Rhs,
    pub start: Start,
    /// Stop once the error drops below this value.
    pub stop_below: Option<f64>,
}

impl Default for OsmConfig {
    fn default() -> Self {
        Self {
            cells: (20, 20),
            extent: (2.0, 2.0),
            subdomains: (2, 2),
            p: 1.0,
            eta: 0.0,
            variant: InterfaceMatrix::Lumped,
            method: Method::Auxiliary,
            iterations: 100,
            seed: 42,
            rhs: Rhs::Zero,
            start: Start::Random,
            stop_below: None,
        }
    }
}

impl OsmConfig {
    pub fn decomposition(&self) -> Result<Decomposition> {
        let mesh = Mesh::new(self.cells.0, self.cells.1, self.extent.0, self.extent.1)?;
        Decomposition::new(mesh, self.subdomains.0, self.subdomains.1)
    }

    pub fn params(&self) -> SystemParams {
        SystemParams { p: self.p, eta: self.eta, variant: self.variant }
    }

    pub fn load(&self) -> Load {
        match self.rhs {
            Rhs::Zero => Load::Zero,
            Rhs::Poisson => Load::function(crate::assembly::poisson_benchmark_rhs),
        }
    }
}

/// Per-iteration history of a run. Index `n` refers to the solutions computed
/// from the `n`-th traces, the first being the starting traces.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    pub method: Method,
    pub seed: u64,
    /// Max-norm error of the subdomain solutions.
    pub errors: Vec<f64>,
    /// Interface energy of the traces (auxiliary method only).
    pub energy: Vec<Option<f64>>,
    /// Seconds since the start of the iteration.
    pub elapsed: Vec<f64>,
}

impl IterationReport {
    pub fn len(&self) -> usize {
        self.errors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn convergence_factor(&self, n0: usize, n1: usize) -> Result<f64> {
        convergence_factor(&self.errors, n0, n1)
    }
}

/// Runs the configured iteration and records the error history.
pub fn run_osm(cfg: &OsmConfig) -> Result<IterationReport> {
    let d = cfg.decomposition()?;
    let load = cfg.load();
    let engine = Engine::new(d, cfg.params(), cfg.method, &load)?;
    let reference = match cfg.rhs {
        Rhs::Zero => engine.systems.iter().map(|s| vec![0.0; s.len()]).collect(),
        Rhs::Poisson => engine.restrict(&solve_mono(&engine.decomposition.mesh, cfg.eta, &load)?),
    };
    let traces = match cfg.start {
        Start::Random => engine.random_traces(cfg.seed),
        Start::Zero => engine.zero_traces(),
        Start::FixedPoint { perturbation } => {
            let mut fp = engine.fixed_point_traces(&reference)?;
            crate::harness::perturb_first(&mut fp, perturbation);
            fp
        }
    };
    run_engine(&engine, traces, &reference, cfg.iterations, cfg.stop_below, cfg.seed)
}

/// Iterates from the given traces, recording `iterations + 1` solutions
/// (fewer if the error falls below `stop_below`).
pub fn run_engine(
    engine: &Engine,
    mut traces: Traces,
    reference: &[Vec<f64>],
    iterations: usize,
    stop_below: Option<f64>,
    seed: u64,
) -> Result<IterationReport> {
    let start = Instant::now();
    let mut report = IterationReport {
        method: engine.method,
        seed,
        errors: Vec::with_capacity(iterations + 1),
        energy: Vec::with_capacity(iterations + 1),
        elapsed: Vec::with_capacity(iterations + 1),
    };
    for n in 0..=iterations {
        report.energy.push(engine.energy(&traces));
        let (u, next) = engine.step(&traces)?;
        let err = error_linf(&u, reference);
        if !err.is_finite() {
            return Err(Error::Numeric(format!("non-finite error at iteration {n}")));
        }
        report.errors.push(err);
        report.elapsed.push(start.elapsed().as_secs_f64());
        if stop_below.is_some_and(|t| err < t) {
            break;
        }
        traces = next;
    }
    Ok(report)
}

/// Geometric mean contraction `(e_{n1} / e_{n0})^{1 / (n1 - n0)}`.
pub fn convergence_factor(errors: &[f64], n0: usize, n1: usize) -> Result<f64> {
    if n1 <= n0 {
        return Err(invalid(format!("window ({n0}, {n1}) is empty")));
    }
    if n1 >= errors.len() {
        return Err(invalid(format!("window end {n1} beyond {} recorded iterations", errors.len())));
    }
    let (a, b) = (errors[n0], errors[n1]);
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::UndefinedFactor(format!("error norm is zero in window ({n0}, {n1})")));
    }
    Ok(((b / a).ln() / (n1 - n0) as f64).exp())
}

/// Energy history of an auxiliary-variable run.
pub fn energy_series(report: &IterationReport) -> Result<Vec<f64>> {
    if report.method != Method::Auxiliary {
        return Err(Error::Unsupported("energy is only defined for the auxiliary variable method".into()));
    }
    report.energy.iter().map(|e| e.ok_or_else(|| Error::Unsupported("missing energy".into()))).collect()
}

/// First iteration `n` such that the error changes by less than `rel` over
/// `[n, n + window]` and stays that way until the end of the record.
pub fn detect_plateau(errors: &[f64], window: usize, rel: f64) -> Option<usize> {
    if errors.len() <= window {
        return None;
    }
    let flat = |n: usize| {
        let (a, b) = (errors[n], errors[n + window]);
        a > 0.0 && ((b - a) / a).abs() < rel
    };
    let last = errors.len() - 1 - window;
    let mut first = None;
    for n in (0..=last).rev() {
        if flat(n) {
            first = Some(n);
        } else {
            break;
        }
    }
    first
}

/// Closed-form auxiliary-variable iteration for the 2x2 decomposition with one
/// cell per subdomain and lumped interface matrix: only the cross-point is an
/// unknown and its eight directed traces evolve by `g <- M g`.
#[derive(Debug, Clone)]
pub struct DegenerateModel {
    pub alpha: f64,
    pub matrix: DenseMatrix,
}

/// Directed traces `(target, source)` of the closed-form model, in model order.
/// Subdomains are numbered counterclockwise from the upper-right one.
pub const DEGENERATE_ORDER: [(usize, usize); 8] = [(3, 2), (2, 3), (2, 0), (0, 2), (0, 1), (1, 0), (1, 3), (3, 1)];

pub fn degenerate_model(p: f64, h: f64, eta: f64) -> Result<DegenerateModel> {
    if !(p > 0.0) || !(h > 0.0) || !(eta >= 0.0) {
        return Err(invalid(format!("degenerate model needs p > 0, h > 0, eta >= 0 (got {p}, {h}, {eta})")));
    }
    let alpha = p * h / (eta * h * h / 9.0 + 2.0 / 3.0 + p * h);
    // g_{i,i'} <- (alpha - 1) g_{i',i} + alpha g_{i',k} with k the other neighbour of i'
    let mut m = DenseMatrix::zeros(8, 8);
    let idx = |t: (usize, usize)| DEGENERATE_ORDER.iter().position(|&x| x == t).unwrap();
    for (row, &(i, ip)) in DEGENERATE_ORDER.iter().enumerate() {
        m[(row, idx((ip, i)))] = alpha - 1.0;
        let k = DEGENERATE_ORDER.iter().find(|&&(t, s)| t == ip && s != i).unwrap().1;
        m[(row, idx((ip, k)))] = alpha;
    }
    Ok(DegenerateModel { alpha, matrix: m })
}
