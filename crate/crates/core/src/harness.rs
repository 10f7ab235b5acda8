//! Experiment plumbing shared by the command-line front end and the tests:
//! `key = value` configuration, parameter sweeps, CSV output and the two
//! verification runs (closed-form 2x2 model, mono-domain fixed point).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::assembly::{InterfaceMatrix, Load, SystemParams};
use crate::error::{invalid, Error, Result};
use crate::mesh::{Decomposition, Mesh};
use crate::osm::{
    degenerate_model, error_linf, run_osm, solve_mono, Engine, IterationReport, Method, OsmConfig, Rhs, Start, Traces,
    DEGENERATE_ORDER,
};

/// Parses `AxB` into two values.
pub fn parse_pair<T: FromStr>(s: &str) -> Result<(T, T)> {
    let bad = || invalid(format!("expected AxB, got '{s}'"));
    let (a, b) = s.trim().split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| invalid(format!("{key}: cannot parse '{v}'")))
}

/// Keys accepted in run configurations.
pub const CONFIG_KEYS: &[&str] =
    &["p", "eta", "cells", "subdomains", "extent", "method", "variant", "omega", "iters", "seed", "rhs", "perturb"];

/// Ordered `key = value` entries, remembering the source line of each.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigMap {
    entries: BTreeMap<String, (String, Option<usize>)>,
}

impl ConfigMap {
    /// Parses `key = value` lines; `#` starts a comment. Unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = Self::default();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let body = raw.split('#').next().unwrap().trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) =
                body.split_once('=').ok_or_else(|| invalid(format!("line {line}: expected 'key = value'")))?;
            let key = key.trim().to_ascii_lowercase();
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(invalid(format!("line {line}: unknown key '{key}'")));
            }
            if map.entries.contains_key(&key) {
                return Err(invalid(format!("line {line}: duplicate key '{key}'")));
            }
            map.entries.insert(key, (value.trim().to_string(), Some(line)));
        }
        Ok(map)
    }

    /// Sets or overrides an entry (command-line flags).
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !CONFIG_KEYS.contains(&key) {
            return Err(invalid(format!("unknown key '{key}'")));
        }
        self.entries.insert(key.to_string(), (value.into(), None));
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    fn field<T>(&self, key: &str, f: impl FnOnce(&str) -> Result<T>) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => f(v).map(Some).map_err(|e| match (e, line) {
                (Error::InvalidArgument(m), Some(l)) => invalid(format!("line {l}: {m}")),
                (e, _) => e,
            }),
        }
    }

    fn required<T>(&self, key: &str, f: impl FnOnce(&str) -> Result<T>) -> Result<T> {
        self.field(key, f)?.ok_or_else(|| invalid(format!("missing required key '{key}'")))
    }

    /// Builds and validates a run configuration. `p`, `cells` and `subdomains`
    /// are required; the extent defaults to a 2x2 square per subdomain.
    pub fn to_osm_config(&self) -> Result<OsmConfig> {
        let d = OsmConfig::default();
        let p: f64 = self.required("p", |v| parse_num("p", v))?;
        let cells: (usize, usize) = self.required("cells", parse_pair)?;
        let subdomains: (usize, usize) = self.required("subdomains", parse_pair)?;
        let extent =
            self.field("extent", parse_pair)?.unwrap_or((2.0 * subdomains.0 as f64, 2.0 * subdomains.1 as f64));
        let eta = self.field("eta", |v| parse_num("eta", v))?.unwrap_or(d.eta);
        let method = self.field("method", Method::from_str)?.unwrap_or(d.method);
        let omega: Option<f64> = self.field("omega", |v| parse_num("omega", v))?;
        let variant = match (self.get("variant").map(|s| s.to_ascii_lowercase()), omega) {
            (None, None) => d.variant,
            (None, Some(w)) => InterfaceMatrix::Overlumped(w),
            (Some(v), w) => self.required("variant", |_| parse_variant(&v, w))?,
        };
        let iterations = self.field("iters", |v| parse_num("iters", v))?.unwrap_or(d.iterations);
        let seed = self.field("seed", |v| parse_num("seed", v))?.unwrap_or(d.seed);
        let rhs = self.field("rhs", Rhs::from_str)?.unwrap_or(d.rhs);
        let start = match self.field("perturb", |v| parse_num::<f64>("perturb", v))? {
            Some(a) => Start::FixedPoint { perturbation: a },
            None => Start::Random,
        };
        let cfg = OsmConfig {
            cells,
            extent,
            subdomains,
            p,
            eta,
            variant,
            method,
            iterations,
            seed,
            rhs,
            start,
            stop_below: None,
        };
        validate_config(&cfg)?;
        Ok(cfg)
    }
}

/// `consistent`, `lumped` or `overlumped` (with `omega`, default 1).
pub fn parse_variant(name: &str, omega: Option<f64>) -> Result<InterfaceMatrix> {
    let v = match (name.trim().to_ascii_lowercase().as_str(), omega) {
        ("consistent", None) => InterfaceMatrix::Consistent,
        ("lumped", None) => InterfaceMatrix::Lumped,
        ("overlumped", w) => InterfaceMatrix::Overlumped(w.unwrap_or(1.0)),
        ("consistent" | "lumped", Some(_)) => {
            return Err(invalid(format!("omega only applies to the overlumped variant, not '{name}'")))
        }
        (other, _) => return Err(invalid(format!("unknown variant '{other}' (consistent, lumped, overlumped)"))),
    };
    v.validate()?;
    Ok(v)
}

pub fn validate_config(cfg: &OsmConfig) -> Result<()> {
    cfg.variant.validate()?;
    if !(cfg.p > 0.0) || !cfg.p.is_finite() {
        return Err(invalid(format!("p must be positive, got {}", cfg.p)));
    }
    if !(cfg.eta >= 0.0) || !cfg.eta.is_finite() {
        return Err(invalid(format!("eta must be >= 0, got {}", cfg.eta)));
    }
    if let Start::FixedPoint { perturbation } = cfg.start {
        if !perturbation.is_finite() {
            return Err(invalid("perturbation must be finite"));
        }
    }
    cfg.decomposition().map(|_| ())
}

/// Inclusive arithmetic range `start, start + step, ..., <= stop`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Range {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(start <= stop) || !start.is_finite() || !stop.is_finite() {
            return Err(invalid(format!("bad range {start}:{stop}:{step} (need step > 0, start <= stop)")));
        }
        Ok(Self { start, stop, step })
    }

    pub fn single(v: f64) -> Self {
        Self { start: v, stop: v, step: 1.0 }
    }

    /// Grid values, rounded to 1e-9 so that decimal steps stay exact.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| ((self.start + k as f64 * self.step) * 1e9).round() / 1e9).collect()
    }
}

impl FromStr for Range {
    type Err = Error;
    /// `start:stop:step` or a single value.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |v: &str| parse_num::<f64>("range", v);
        match parts.as_slice() {
            [v] => Ok(Self::single(num(v)?)),
            [a, b, c] => Self::new(num(a)?, num(b)?, num(c)?),
            _ => Err(invalid(format!("expected start:stop:step, got '{s}'"))),
        }
    }
}

/// Parameter sweep over `p` and `omega` for every grid size and decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Union of ranges, deduplicated.
    pub p: Vec<Range>,
    pub omega: Range,
    /// Cells per subdomain in each direction.
    pub grids: Vec<usize>,
    pub decompositions: Vec<(usize, usize)>,
    pub method: Method,
    pub window: (usize, usize),
    pub seed: u64,
    pub eta: f64,
}

impl SweepSpec {
    /// Robin parameter and overlump grids from the experiments: `p` in
    /// `1..=20` step 0.5, `omega` in `0..=100` step 0.25, window by decomposition.
    pub fn standard_grid(grid: usize, subdomains: (usize, usize), method: Method) -> Self {
        let window = if subdomains.0 * subdomains.1 == 2 { (0, 50) } else { (30, 60) };
        Self {
            p: vec![Range { start: 1.0, stop: 20.0, step: 0.5 }],
            omega: Range { start: 0.0, stop: 100.0, step: 0.25 },
            grids: vec![grid],
            decompositions: vec![subdomains],
            method,
            window,
            seed: 42,
            eta: 0.0,
        }
    }

    pub fn p_values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.p.iter().flat_map(|r| r.values()).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.dedup();
        v
    }

    pub fn validate(&self) -> Result<()> {
        if self.window.1 <= self.window.0 {
            return Err(invalid(format!("empty window ({}, {})", self.window.0, self.window.1)));
        }
        if self.p.is_empty() || self.grids.is_empty() || self.decompositions.is_empty() {
            return Err(invalid("sweep needs at least one p range, grid and decomposition"));
        }
        if self.p_values().iter().any(|p| !(*p > 0.0)) {
            return Err(invalid("p values must be positive"));
        }
        if self.omega.start < 0.0 {
            return Err(invalid("omega must be >= 0"));
        }
        if self.grids.contains(&0) {
            return Err(invalid("grid sizes must be positive"));
        }
        Ok(())
    }
}

/// One sweep cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub p: f64,
    pub omega: f64,
    pub kappa: f64,
}

/// Sweep over one grid size and decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub grid: usize,
    pub subdomains: (usize, usize),
    pub method: Method,
    pub seed: u64,
    pub window: (usize, usize),
    pub points: Vec<SweepPoint>,
    pub best: Option<SweepPoint>,
    /// Cells whose run failed (recorded as NaN).
    pub failures: usize,
}

impl SweepResult {
    /// Best point restricted to one `omega` value.
    pub fn best_at_omega(&self, omega: f64) -> Option<SweepPoint> {
        argmin(self.points.iter().filter(|pt| (pt.omega - omega).abs() < 1e-9))
    }
}

/// Smallest finite `kappa`; ties go to the smaller `omega`, then the smaller `p`.
pub fn argmin<'a>(points: impl IntoIterator<Item = &'a SweepPoint>) -> Option<SweepPoint> {
    points.into_iter().filter(|pt| pt.kappa.is_finite()).copied().min_by(|a, b| {
        a.kappa
            .partial_cmp(&b.kappa)
            .unwrap()
            .then(a.omega.partial_cmp(&b.omega).unwrap())
            .then(a.p.partial_cmp(&b.p).unwrap())
    })
}

/// Configuration of one sweep cell: each subdomain is `(0, 2)^2` with
/// `grid x grid` cells, error equations, uniform random start from `seed`.
#[allow(clippy::too_many_arguments)]
pub fn sweep_cell_config(
    grid: usize,
    subdomains: (usize, usize),
    p: f64,
    omega: f64,
    method: Method,
    window: (usize, usize),
    seed: u64,
    eta: f64,
) -> OsmConfig {
    OsmConfig {
        cells: (grid * subdomains.0, grid * subdomains.1),
        extent: (2.0 * subdomains.0 as f64, 2.0 * subdomains.1 as f64),
        subdomains,
        p,
        eta,
        variant: InterfaceMatrix::Overlumped(omega),
        method,
        iterations: window.1,
        seed,
        rhs: Rhs::Zero,
        start: Start::Random,
        stop_below: None,
    }
}

/// Runs every cell of the sweep. All cells share the same seed, so the
/// comparison between cells is not blurred by different random starts.
pub fn run_sweep(sweep: &SweepSpec) -> Result<Vec<SweepResult>> {
    sweep.validate()?;
    let ps = sweep.p_values();
    let ws = sweep.omega.values();
    let mut out = Vec::new();
    for &grid in &sweep.grids {
        for &sub in &sweep.decompositions {
            let jobs: Vec<(f64, f64)> = ws.iter().flat_map(|&w| ps.iter().map(move |&p| (p, w))).collect();
            let points: Vec<SweepPoint> = jobs
                .par_iter()
                .map(|&(p, omega)| {
                    let cfg = sweep_cell_config(grid, sub, p, omega, sweep.method, sweep.window, sweep.seed, sweep.eta);
                    let kappa = run_osm(&cfg)
                        .and_then(|r| r.convergence_factor(sweep.window.0, sweep.window.1))
                        .unwrap_or(f64::NAN);
                    SweepPoint { p, omega, kappa }
                })
                .collect();
            let failures = points.iter().filter(|pt| !pt.kappa.is_finite()).count();
            let best = argmin(&points);
            out.push(SweepResult {
                grid,
                subdomains: sub,
                method: sweep.method,
                seed: sweep.seed,
                window: sweep.window,
                points,
                best,
                failures,
            });
        }
    }
    Ok(out)
}

/// Header line `# key=value ...`.
pub fn comment_line(fields: &[(&str, String)]) -> String {
    let mut s = String::from("#");
    for (k, v) in fields {
        let _ = write!(s, " {k}={v}");
    }
    s.push('\n');
    s
}

/// `iteration,error_linf,energy,elapsed_seconds`. Energy is empty for the
/// complete method; elapsed time is empty when `timing` is off.
pub fn report_csv(cfg: &OsmConfig, report: &IterationReport, timing: bool) -> String {
    let mut s = comment_line(&[
        ("seed", cfg.seed.to_string()),
        ("method", cfg.method.to_string()),
        ("variant", cfg.variant.to_string()),
        ("p", cfg.p.to_string()),
        ("eta", cfg.eta.to_string()),
        ("cells", format!("{}x{}", cfg.cells.0, cfg.cells.1)),
        ("subdomains", format!("{}x{}", cfg.subdomains.0, cfg.subdomains.1)),
        ("rhs", cfg.rhs.to_string()),
    ]);
    s.push_str("iteration,error_linf,energy,elapsed_seconds\n");
    for n in 0..report.len() {
        let energy = report.energy[n].map(|e| format!("{e:e}")).unwrap_or_default();
        let elapsed = if timing { format!("{:.6}", report.elapsed[n]) } else { String::new() };
        let _ = writeln!(s, "{n},{:e},{energy},{elapsed}", report.errors[n]);
    }
    s
}

pub fn sweep_csv(r: &SweepResult) -> String {
    let mut s = comment_line(&[
        ("seed", r.seed.to_string()),
        ("method", r.method.to_string()),
        ("grid", format!("{0}x{0}", r.grid)),
        ("subdomains", format!("{}x{}", r.subdomains.0, r.subdomains.1)),
        ("window", format!("{}:{}", r.window.0, r.window.1)),
    ]);
    s.push_str("p,omega,kappa\n");
    for pt in &r.points {
        let _ = writeln!(s, "{},{},{:.7}", pt.p, pt.omega, pt.kappa);
    }
    s.push_str(&best_line(r));
    s.push('\n');
    s
}

pub fn best_line(r: &SweepResult) -> String {
    match r.best {
        Some(b) => format!("best: p={} omega={} kappa={:.7}", b.p, b.omega, b.kappa),
        None => "best: none".to_string(),
    }
}

/// One iteration of the closed-form versus engine comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct DegenerateRow {
    pub iteration: usize,
    pub closed_form: [f64; 8],
    pub engine: [f64; 8],
    pub max_abs_diff: f64,
    /// Largest cross-point value over the four subdomains, from the engine.
    pub u_max: f64,
}

/// Starting traces for the 2x2 one-element comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DegenerateStart {
    Random(u64),
    Given([f64; 8]),
}

/// Iterates the 8x8 closed-form model and the general engine side by side on
/// the 2x2 mesh with one cell per subdomain. Row `n` holds the traces after
/// `n` iterations.
pub fn degenerate_crossvalidate(
    p: f64,
    h: f64,
    eta: f64,
    iterations: usize,
    start: DegenerateStart,
) -> Result<Vec<DegenerateRow>> {
    let model = degenerate_model(p, h, eta)?;
    let d = Decomposition::new(Mesh::new(2, 2, 2.0 * h, 2.0 * h)?, 2, 2)?;
    let params = SystemParams { p, eta, variant: InterfaceMatrix::Lumped };
    let engine = Engine::new(d, params, Method::Auxiliary, &Load::Zero)?;
    let center = engine.decomposition.mesh.node(1, 1);

    let g0 = match start {
        DegenerateStart::Given(v) => v,
        DegenerateStart::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            std::array::from_fn(|_| rng.random_range(-1.0..=1.0))
        }
    };
    let Traces::Aux(mut traces) = engine.zero_traces() else { unreachable!() };
    for (k, &(t, s)) in DEGENERATE_ORDER.iter().enumerate() {
        traces.set_directed(&engine.interfaces, t, s, center, g0[k])?;
    }
    let read = |t: &crate::transmission::AuxTraces| -> Result<[f64; 8]> {
        let mut v = [0.0; 8];
        for (k, &(a, b)) in DEGENERATE_ORDER.iter().enumerate() {
            v[k] = t
                .directed(&engine.interfaces, a, b, center)
                .ok_or_else(|| Error::Contract(format!("no trace g({a},{b})")))?;
        }
        Ok(v)
    };

    let mut closed = nalgebra::DVector::from_column_slice(&g0);
    let mut traces = Traces::Aux(traces);
    let mut rows = Vec::with_capacity(iterations + 1);
    for n in 0..=iterations {
        let Traces::Aux(t) = &traces else { unreachable!() };
        let eng = read(t)?;
        let (u, next) = engine.step(&traces)?;
        let cf: [f64; 8] = std::array::from_fn(|k| closed[k]);
        let max_abs_diff = cf.iter().zip(&eng).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let u_max = u.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        rows.push(DegenerateRow { iteration: n, closed_form: cf, engine: eng, max_abs_diff, u_max });
        traces = next;
        closed = &model.matrix * closed;
    }
    Ok(rows)
}

pub fn degenerate_csv(p: f64, h: f64, eta: f64, rows: &[DegenerateRow]) -> String {
    let mut s = comment_line(&[("p", p.to_string()), ("h", h.to_string()), ("eta", eta.to_string())]);
    s.push_str("iteration");
    for name in ["g12", "g21", "g23", "g32", "g34", "g43", "g41", "g14"] {
        let _ = write!(s, ",{name}");
    }
    s.push_str(",u_max,max_abs_diff\n");
    for r in rows {
        let _ = write!(s, "{}", r.iteration);
        for v in r.engine {
            let _ = write!(s, ",{v:e}");
        }
        let _ = writeln!(s, ",{:e},{:e}", r.u_max, r.max_abs_diff);
    }
    s
}

/// Outcome of one sweep started from mono-domain-derived traces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointReport {
    /// Distance of the first solutions to the mono-domain solution, relative.
    pub start_deviation: f64,
    /// Relative change of solutions and traces over one iteration.
    pub max_rel_change: f64,
    /// Same change without scaling.
    pub max_abs_change: f64,
}

impl FixedPointReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.start_deviation < tol && self.max_rel_change < tol
    }
}

fn rel(diff: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

fn traces_diff(a: &Traces, b: &Traces) -> f64 {
    match (a, b) {
        (Traces::Aux(x), Traces::Aux(y)) => x
            .values
            .iter()
            .flat_map(|pv| pv.iter().flatten())
            .zip(y.values.iter().flat_map(|pv| pv.iter().flatten()))
            .fold(0.0, |m, (u, v)| m.max((u - v).abs())),
        (Traces::Complete(x), Traces::Complete(y)) => {
            x.g.iter().flatten().zip(y.g.iter().flatten()).fold(0.0, |m, (u, v)| m.max((u - v).abs()))
        }
        _ => f64::INFINITY,
    }
}

/// Adds `delta` to the first stored trace value.
pub fn perturb_first(traces: &mut Traces, delta: f64) {
    match traces {
        Traces::Aux(t) => {
            if let Some(v) = t.values.iter_mut().flat_map(|pv| pv.iter_mut().flatten()).next() {
                *v += delta;
            }
        }
        Traces::Complete(t) => {
            if let Some(v) = t.g.iter_mut().flatten().find(|v| **v != 0.0) {
                *v += delta;
            }
        }
    }
}

/// Builds the mono-domain solution, derives fixed-point traces, and measures
/// how much one iteration moves the solutions and traces.
pub fn fixed_point_check(cfg: &OsmConfig, perturbation: f64) -> Result<FixedPointReport> {
    let d = cfg.decomposition()?;
    let load = cfg.load();
    let mono = solve_mono(&d.mesh, cfg.eta, &load)?;
    let engine = Engine::new(d, cfg.params(), cfg.method, &load)?;
    let reference = engine.restrict(&mono);
    let mut g0 = engine.fixed_point_traces(&reference)?;
    perturb_first(&mut g0, perturbation);
    let (u0, g1) = engine.step(&g0)?;
    let (u1, _) = engine.step(&g1)?;
    let u_scale = reference.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let g_scale = g0.max_abs();
    let start_deviation = rel(error_linf(&u0, &reference), u_scale);
    let (du, dg) = (error_linf(&u1, &u0), traces_diff(&g1, &g0));
    let max_rel_change = rel(du, u_scale).max(rel(dg, g_scale));
    Ok(FixedPointReport { start_deviation, max_rel_change, max_abs_change: du.max(dg) })
}
