//! Run configuration, execution driver, convergence studies and CSV output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::advdiff::{run_advdiff, AdvDiffAlgorithm, AdvDiffProblem};
use crate::catalog::{scalar_case, swe_case, TestCase};
use crate::error::{Result, SimError};
use crate::gridfields::ScalarField;
use crate::oracles::{self, diagnostics};
use crate::relax::{low_froude_step, slimex_ap_step, slimexh_ap_step, RelaxOptions};
use crate::swe::{slimex_step, slimexh_step, PressureRule, StepInfo, SweOptions, SWEState};
use crate::tableaux::{make_tableau, SchemeId};

/// Time integrator selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Alg0,
    Alg1,
    Alg2,
    Slimexh,
    Slimex,
    SlimexhAp,
    SlimexAp,
    LowFroude,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 8] = [
        SchemeKind::Alg0,
        SchemeKind::Alg1,
        SchemeKind::Alg2,
        SchemeKind::Slimexh,
        SchemeKind::Slimex,
        SchemeKind::SlimexhAp,
        SchemeKind::SlimexAp,
        SchemeKind::LowFroude,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::Alg0 => "alg0",
            SchemeKind::Alg1 => "alg1",
            SchemeKind::Alg2 => "alg2",
            SchemeKind::Slimexh => "slimexh",
            SchemeKind::Slimex => "slimex",
            SchemeKind::SlimexhAp => "slimexh_ap",
            SchemeKind::SlimexAp => "slimex_ap",
            SchemeKind::LowFroude => "lowfroude",
        }
    }

    pub fn parse(s: &str) -> Result<SchemeKind> {
        SchemeKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| SimError::Config(format!("unknown scheme `{s}`")))
    }

    pub fn is_scalar(self) -> bool {
        matches!(self, SchemeKind::Alg0 | SchemeKind::Alg1 | SchemeKind::Alg2)
    }

    fn algorithm(self) -> Option<AdvDiffAlgorithm> {
        match self {
            SchemeKind::Alg0 => Some(AdvDiffAlgorithm::Alg0),
            SchemeKind::Alg1 => Some(AdvDiffAlgorithm::Alg1),
            SchemeKind::Alg2 => Some(AdvDiffAlgorithm::Alg2),
            _ => None,
        }
    }

    fn needs_epsilon(self) -> bool {
        matches!(
            self,
            SchemeKind::SlimexhAp | SchemeKind::SlimexAp | SchemeKind::LowFroude
        )
    }
}

/// Exactly one way of choosing the step size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stepping {
    /// Fixed number of uniform steps to the final time.
    Steps(usize),
    /// Courant number against the initial wave speed; the count rounds up so
    /// uniform steps land exactly on the final time.
    Cfl(f64),
}

/// Full description of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub test_case: TestCase,
    pub scheme: SchemeKind,
    pub tableau: SchemeId,
    pub n_cells: usize,
    pub stepping: Stepping,
    pub epsilon: Option<f64>,
    pub pressure: Option<PressureRule>,
    pub viscosity: Option<bool>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scheme.is_scalar() != self.test_case.is_scalar() {
            return Err(SimError::Config(format!(
                "scheme {} cannot run test {}",
                self.scheme.as_str(),
                self.test_case.as_str()
            )));
        }
        if (self.scheme == SchemeKind::LowFroude) != (self.test_case == TestCase::LowFroude) {
            return Err(SimError::Config(
                "the low-froude scheme pairs only with the lowfroude case".into(),
            ));
        }
        match self.stepping {
            Stepping::Steps(0) => {
                return Err(SimError::Config("need at least one step".into()));
            }
            Stepping::Cfl(c) if !(c > 0.0) => {
                return Err(SimError::Config(format!("courant number must be positive, got {c}")));
            }
            _ => {}
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) {
                return Err(SimError::Config(format!(
                    "relaxation parameter must be positive, got {e}"
                )));
            }
        }
        Ok(())
    }

    /// Relaxation parameter after catalog defaults.
    fn effective_epsilon(&self) -> Result<Option<f64>> {
        if let Some(e) = self.epsilon {
            return Ok(Some(e));
        }
        if self.test_case.is_scalar() {
            return Ok(None);
        }
        Ok(swe_case(self.test_case)?.epsilon)
    }

    fn run_label(&self) -> String {
        let step = match self.stepping {
            Stepping::Steps(n) => format!("nt{n}"),
            Stepping::Cfl(c) => format!("cfl{c}"),
        };
        format!(
            "{}_{}_{}_nx{}_{}",
            self.test_case.as_str(),
            self.scheme.as_str(),
            self.tableau.as_str(),
            self.n_cells,
            step
        )
    }
}

/// Per-step diagnostics of a shallow water run.
#[derive(Debug, Clone, Copy)]
pub struct SweRow {
    pub step: usize,
    pub time: f64,
    pub mass: f64,
    pub momentum: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub total_energy: f64,
    pub cfl: f64,
    /// Max-norm of `u - h/2`, reported for relaxation runs.
    pub eq_defect: Option<f64>,
}

/// Final payload of a run.
pub enum Solution {
    Scalar(ScalarField),
    Swe(SWEState),
}

pub struct RunReport {
    pub config_label: String,
    pub n_steps: usize,
    pub dt: f64,
    /// `(L1, L2, Linf)` of the case's primary error quantity, when the case
    /// has an oracle.
    pub errors: Option<(f64, f64, f64)>,
    pub scalar_rows: Vec<crate::advdiff::AdvDiffRow>,
    pub swe_rows: Vec<SweRow>,
    pub solution: Solution,
    pub solver_info: StepInfo,
    pub files: Vec<PathBuf>,
}

fn resolve_steps(stepping: Stepping, t_final: f64, dx: f64, wave_speed: f64) -> Result<(usize, f64)> {
    match stepping {
        Stepping::Steps(n) => Ok((n, t_final / n as f64)),
        Stepping::Cfl(c) => {
            if wave_speed <= 0.0 {
                return Err(SimError::Config(
                    "cannot size steps by courant number: zero wave speed".into(),
                ));
            }
            let dt_raw = c * dx / wave_speed;
            let n = (t_final / dt_raw).ceil().max(1.0) as usize;
            Ok((n, t_final / n as f64))
        }
    }
}

/// Executes a configured run: advances the scheme, gathers diagnostics and
/// error norms, and writes per-run CSV files when an output directory is set.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    if config.test_case.is_scalar() {
        run_scalar(config)
    } else {
        run_swe(config)
    }
}

fn run_scalar(config: &RunConfig) -> Result<RunReport> {
    let case = scalar_case(config.test_case)?;
    let grid = case.grid(config.n_cells)?;
    let u_max = {
        let sampler = case.velocity.clone();
        sampler.max_abs_on(&grid)
    };
    let (n_steps, dt) = resolve_steps(config.stepping, case.t_final, grid.dx, u_max)?;
    let problem = AdvDiffProblem {
        grid,
        tableau: make_tableau(config.tableau),
        alpha: case.alpha,
        velocity: case.velocity.clone(),
        q0: case.initial_field(grid),
        t0: 0.0,
        t_final: case.t_final,
        n_steps,
        algorithm: config.scheme.algorithm().expect("validated scalar scheme"),
    };
    let oracle = &case.oracle;
    let report = run_advdiff(&problem, Some(&|x, t| oracle(x, t)))?;

    let mut files = Vec::new();
    if let Some(dir) = &config.output_dir {
        let run_dir = dir.join(config.run_label());
        std::fs::create_dir_all(&run_dir)?;
        let mut solution = String::from("x,value\n");
        for i in 0..grid.n_cells {
            writeln!(
                solution,
                "{},{}",
                fmt17(grid.cell_center(i)),
                fmt17(report.field.values[i])
            )
            .unwrap();
        }
        files.push(write_file(&run_dir, "solution_final.csv", &solution)?);
        let mut diag = String::from("step,time,L2,Linf,mass\n");
        for row in &report.rows {
            writeln!(
                diag,
                "{},{},{},{},{}",
                row.step,
                fmt17(row.time),
                fmt17(row.l2),
                fmt17(row.linf),
                fmt17(row.mass)
            )
            .unwrap();
        }
        files.push(write_file(&run_dir, "diagnostics.csv", &diag)?);
    }

    Ok(RunReport {
        config_label: config.run_label(),
        n_steps,
        dt,
        errors: Some((report.l1, report.l2, report.linf)),
        scalar_rows: report.rows,
        swe_rows: Vec::new(),
        solution: Solution::Scalar(report.field),
        solver_info: StepInfo::default(),
        files,
    })
}

fn swe_row(state: &SWEState, step: usize, time: f64, dt: f64, relax: bool) -> SweRow {
    let d = diagnostics(state);
    let eq_defect = relax.then(|| {
        state
            .h
            .values
            .iter()
            .zip(&state.v.values)
            .map(|(&h, &v)| (v / h - h / 2.0).abs())
            .fold(0.0, f64::max)
    });
    SweRow {
        step,
        time,
        mass: d.mass,
        momentum: d.momentum,
        kinetic: d.kinetic,
        potential: d.potential,
        total_energy: d.total_energy,
        cfl: oracles::cfl_of(state, dt),
        eq_defect,
    }
}

fn run_swe(config: &RunConfig) -> Result<RunReport> {
    let case = swe_case(config.test_case)?;
    let grid = case.grid(config.n_cells)?;
    let mut state = case.initial_state(grid)?;
    let (n_steps, dt) = resolve_steps(
        config.stepping,
        case.t_final,
        grid.dx,
        state.max_wave_speed(),
    )?;

    let tb = make_tableau(config.tableau);
    let mut options = SweOptions::for_tableau(&tb);
    options.viscosity = config.viscosity.unwrap_or(case.default_viscosity);
    options.steady_source = case.steady_source;
    if let Some(rule) = config.pressure {
        options.pressure = rule;
    }
    let epsilon = config.effective_epsilon()?;
    if config.scheme.needs_epsilon() && epsilon.is_none() {
        return Err(SimError::Config(format!(
            "scheme {} needs a relaxation parameter",
            config.scheme.as_str()
        )));
    }
    let relax = epsilon.map(|e| RelaxOptions {
        epsilon: e,
        froude_scaling: config.scheme == SchemeKind::LowFroude,
    });
    let is_relax_run = config.scheme.needs_epsilon();

    let mut info = StepInfo::default();
    let mut rows = Vec::with_capacity(n_steps + 1);
    rows.push(swe_row(&state, 0, 0.0, dt, is_relax_run));
    for step_idx in 0..n_steps {
        let (next, step_info) = match config.scheme {
            SchemeKind::Slimexh => slimexh_step(&state, dt, &tb, &options),
            SchemeKind::Slimex => slimex_step(&state, dt, &tb, &options),
            SchemeKind::SlimexhAp => {
                slimexh_ap_step(&state, dt, &tb, relax.as_ref().unwrap(), &options)
            }
            SchemeKind::SlimexAp => {
                slimex_ap_step(&state, dt, &tb, relax.as_ref().unwrap(), &options)
            }
            SchemeKind::LowFroude => low_froude_step(&state, dt, relax.as_ref().unwrap()),
            _ => unreachable!("validated swe scheme"),
        }
        .map_err(|e| match e {
            SimError::Numerical(msg) => {
                SimError::Numerical(format!("{msg} (step {})", step_idx + 1))
            }
            other => other,
        })?;
        state = next;
        info.solver_iterations += step_info.solver_iterations;
        info.solver_fallbacks += step_info.solver_fallbacks;
        rows.push(swe_row(
            &state,
            step_idx + 1,
            (step_idx + 1) as f64 * dt,
            dt,
            is_relax_run,
        ));
    }

    let errors = swe_errors(config, &case, &state)?;

    let mut files = Vec::new();
    if let Some(dir) = &config.output_dir {
        let run_dir = dir.join(config.run_label());
        std::fs::create_dir_all(&run_dir)?;
        let mut solution = String::from("x,h,u,V\n");
        for i in 0..grid.n_cells {
            let h = state.h.values[i];
            let v = state.v.values[i];
            writeln!(
                solution,
                "{},{},{},{}",
                fmt17(grid.cell_center(i)),
                fmt17(h),
                fmt17(v / h),
                fmt17(v)
            )
            .unwrap();
        }
        files.push(write_file(&run_dir, "solution_final.csv", &solution)?);
        let mut diag = String::from(if is_relax_run {
            "time,mass,kinetic,potential,total_energy,CFL,u_minus_h_over_2_Linf\n"
        } else {
            "time,mass,kinetic,potential,total_energy,CFL\n"
        });
        for row in &rows {
            if is_relax_run {
                writeln!(
                    diag,
                    "{},{},{},{},{},{},{}",
                    fmt17(row.time),
                    fmt17(row.mass),
                    fmt17(row.kinetic),
                    fmt17(row.potential),
                    fmt17(row.total_energy),
                    fmt17(row.cfl),
                    fmt17(row.eq_defect.unwrap_or(f64::NAN))
                )
                .unwrap();
            } else {
                writeln!(
                    diag,
                    "{},{},{},{},{},{}",
                    fmt17(row.time),
                    fmt17(row.mass),
                    fmt17(row.kinetic),
                    fmt17(row.potential),
                    fmt17(row.total_energy),
                    fmt17(row.cfl)
                )
                .unwrap();
            }
        }
        files.push(write_file(&run_dir, "diagnostics.csv", &diag)?);
    }

    Ok(RunReport {
        config_label: config.run_label(),
        n_steps,
        dt,
        errors,
        scalar_rows: Vec::new(),
        swe_rows: rows,
        solution: Solution::Swe(state),
        solver_info: info,
        files,
    })
}

/// Error norms of the case's primary quantity against its oracle.
fn swe_errors(
    config: &RunConfig,
    case: &crate::catalog::SweCase,
    state: &SWEState,
) -> Result<Option<(f64, f64, f64)>> {
    let grid = state.grid();
    let norms = |err: &dyn Fn(usize) -> f64| {
        let mut l1 = 0.0;
        let mut l2 = 0.0;
        let mut linf: f64 = 0.0;
        for i in 0..grid.n_cells {
            let e = err(i).abs();
            l1 += e * grid.dx;
            l2 += e * e * grid.dx;
            linf = linf.max(e);
        }
        (l1, l2.sqrt(), linf)
    };
    match config.test_case {
        TestCase::SweSteady => {
            // momentum against the balanced profile
            Ok(Some(norms(&|i| {
                let (h, u) = oracles::steady_swe(grid.cell_center(i));
                state.v.values[i] - h * u
            })))
        }
        TestCase::Rp1 | TestCase::Rp2 => {
            let ic = case.riemann.as_ref().unwrap();
            Ok(Some(norms(&|i| {
                let (h, _) = oracles::swe_exact_riemann(ic, grid.cell_center(i), case.t_final)
                    .expect("riemann oracle");
                state.h.values[i] - h
            })))
        }
        TestCase::B1 | TestCase::B2 => {
            let ic = case.riemann.as_ref().unwrap();
            Ok(Some(norms(&|i| {
                let h =
                    oracles::burgers_exact_riemann(ic.h_l, ic.h_r, grid.cell_center(i), case.t_final);
                state.h.values[i] - h
            })))
        }
        TestCase::SweGaussian | TestCase::LowFroude | TestCase::ApSmooth => Ok(None),
        _ => Ok(None),
    }
}

/// Refinement protocols for convergence studies.
#[derive(Debug, Clone)]
pub enum Refinement {
    /// Doubles the step count per level, starting from the base config.
    HalveDt { levels: usize },
    /// Doubles the cell count per level; with Courant stepping the step
    /// follows the mesh.
    HalveDx { levels: usize },
    /// One level per Courant number.
    CflList(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct OrderRow {
    pub label: String,
    /// Refinement parameter the order is measured against (dt or dx).
    pub param: f64,
    pub error: f64,
    pub order: Option<f64>,
}

pub struct OrderTable {
    pub metric: &'static str,
    pub rows: Vec<OrderRow>,
    pub files: Vec<PathBuf>,
}

/// Error component the study tracks, per case.
fn study_metric(case: TestCase) -> &'static str {
    match case {
        TestCase::Test1 | TestCase::Test2 | TestCase::Test3 => "L2",
        TestCase::SweSteady => "Linf(V)",
        TestCase::ApSmooth => "Linf(h)",
        TestCase::B1 | TestCase::B2 => "L1(h)",
        _ => "L2",
    }
}

fn metric_error(case: TestCase, report: &RunReport) -> Result<f64> {
    let errs = report.errors.ok_or_else(|| {
        SimError::Config(format!(
            "case {} has no oracle to measure convergence against",
            case.as_str()
        ))
    })?;
    Ok(match study_metric(case) {
        "L1(h)" => errs.0,
        "L2" => errs.1,
        _ => errs.2,
    })
}

/// Error of the smooth relaxation sweep: depth against a fine-step reference
/// computed with the same scheme and mesh.
fn ap_smooth_reference(config: &RunConfig) -> Result<Vec<f64>> {
    let mut fine = config.clone();
    fine.output_dir = None;
    fine.stepping = Stepping::Cfl(0.25);
    let report = run(&fine)?;
    match report.solution {
        Solution::Swe(state) => Ok(state.h.values),
        _ => unreachable!(),
    }
}

/// Runs a refinement sequence and reports observed orders between
/// consecutive levels.
pub fn converge(base: &RunConfig, refinement: &Refinement) -> Result<OrderTable> {
    base.validate()?;
    let mut level_configs: Vec<(String, RunConfig)> = Vec::new();
    match refinement {
        Refinement::HalveDt { levels } => {
            let n0 = match base.stepping {
                Stepping::Steps(n) => n,
                Stepping::Cfl(_) => {
                    return Err(SimError::Config(
                        "time refinement needs a step-count base config".into(),
                    ))
                }
            };
            for k in 0..*levels {
                let mut cfg = base.clone();
                let n = n0 << k;
                cfg.stepping = Stepping::Steps(n);
                cfg.output_dir = None;
                level_configs.push((format!("nt={n}"), cfg));
            }
        }
        Refinement::HalveDx { levels } => {
            for k in 0..*levels {
                let mut cfg = base.clone();
                cfg.n_cells = base.n_cells << k;
                cfg.output_dir = None;
                level_configs.push((format!("nx={}", cfg.n_cells), cfg));
            }
        }
        Refinement::CflList(list) => {
            for &c in list {
                let mut cfg = base.clone();
                cfg.stepping = Stepping::Cfl(c);
                cfg.output_dir = None;
                level_configs.push((format!("cfl={c}"), cfg));
            }
        }
    }

    // The smooth relaxation sweep has no closed-form solution; measure
    // against a fine-step self reference per mesh.
    let reference: Option<Vec<f64>> = if base.test_case == TestCase::ApSmooth {
        match refinement {
            Refinement::HalveDx { .. } => {
                return Err(SimError::Config(
                    "the relaxation sweep refines in time, not space".into(),
                ))
            }
            _ => Some(ap_smooth_reference(&level_configs[0].1)?),
        }
    } else {
        None
    };

    let runs = run_levels(&level_configs, reference.as_deref())?;

    let mut rows: Vec<OrderRow> = Vec::with_capacity(runs.len());
    for (idx, (label, error, param)) in runs.into_iter().enumerate() {
        let order = if idx > 0 {
            let prev = &rows[idx - 1];
            let ratio = prev.param / param;
            if ratio > 1.0 && error > 0.0 && prev.error > 0.0 {
                Some((prev.error / error).ln() / ratio.ln())
            } else {
                None
            }
        } else {
            None
        };
        rows.push(OrderRow {
            label,
            param,
            error,
            order,
        });
    }

    let mut files = Vec::new();
    if let Some(dir) = &base.output_dir {
        std::fs::create_dir_all(dir)?;
        let mut csv = String::from("level,param,error,order\n");
        for row in &rows {
            writeln!(
                csv,
                "{},{},{},{}",
                row.label,
                fmt17(row.param),
                fmt17(row.error),
                row.order.map(|o| format!("{o:.2}")).unwrap_or_default()
            )
            .unwrap();
        }
        let name = format!("orders_{}.csv", base.run_label());
        files.push(write_file(dir, &name, &csv)?);
    }

    Ok(OrderTable {
        metric: study_metric(base.test_case),
        rows,
        files,
    })
}

type LevelOutcome = (String, f64, f64);

fn run_level(
    label: &str,
    cfg: &RunConfig,
    reference: Option<&[f64]>,
) -> Result<LevelOutcome> {
    let report = run(cfg)?;
    // Refinement parameter: the step size, except for pure mesh refinement.
    let param = report.dt;
    let error = match reference {
        Some(r) => match &report.solution {
            Solution::Swe(state) => state
                .h
                .values
                .iter()
                .zip(r)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max),
            _ => unreachable!(),
        },
        None => metric_error(cfg.test_case, &report)?,
    };
    Ok((label.to_string(), error, param))
}

#[cfg(feature = "parallel")]
fn run_levels(
    configs: &[(String, RunConfig)],
    reference: Option<&[f64]>,
) -> Result<Vec<LevelOutcome>> {
    use rayon::prelude::*;
    configs
        .par_iter()
        .map(|(label, cfg)| run_level(label, cfg, reference))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn run_levels(
    configs: &[(String, RunConfig)],
    reference: Option<&[f64]>,
) -> Result<Vec<LevelOutcome>> {
    configs
        .iter()
        .map(|(label, cfg)| run_level(label, cfg, reference))
        .collect()
}

/// Sequential twin of the convergence driver, kept for benchmarking the
/// parallel speedup.
pub fn run_levels_sequential(
    configs: &[(String, RunConfig)],
) -> Result<Vec<(String, f64, f64)>> {
    configs
        .iter()
        .map(|(label, cfg)| run_level(label, cfg, None))
        .collect()
}

/// Parallel (or, without the feature, sequential) twin of
/// [`run_levels_sequential`].
pub fn run_levels_parallel(
    configs: &[(String, RunConfig)],
) -> Result<Vec<(String, f64, f64)>> {
    run_levels(configs, None)
}

/// 17 significant digits, enough to reproduce the binary value exactly.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

/// Parses a flat `key = value` configuration file; `#` starts a comment.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(SimError::Config(format!(
                "config line {} is not `key = value`: {raw}",
                lineno + 1
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Builds a run configuration from string keys (config file plus overrides).
pub fn config_from_kv(map: &BTreeMap<String, String>) -> Result<RunConfig> {
    let get = |k: &str| map.get(k).map(|s| s.as_str());
    let test = get("test").ok_or_else(|| SimError::Config("missing key `test`".into()))?;
    let scheme = get("scheme").ok_or_else(|| SimError::Config("missing key `scheme`".into()))?;
    let test_case = TestCase::parse(test)?;
    let scheme = SchemeKind::parse(scheme)?;
    let tableau = match get("tableau") {
        Some(t) => SchemeId::parse(t)?,
        None => SchemeId::Sassp332,
    };
    let n_cells = match get("nx") {
        Some(s) => s
            .parse()
            .map_err(|_| SimError::Config(format!("bad nx `{s}`")))?,
        None => 400,
    };
    let stepping = match (get("nt"), get("cfl")) {
        (Some(_), Some(_)) => {
            return Err(SimError::Config("set exactly one of nt and cfl".into()))
        }
        (Some(s), None) => Stepping::Steps(
            s.parse()
                .map_err(|_| SimError::Config(format!("bad nt `{s}`")))?,
        ),
        (None, Some(s)) => Stepping::Cfl(
            s.parse()
                .map_err(|_| SimError::Config(format!("bad cfl `{s}`")))?,
        ),
        (None, None) => {
            if test_case.is_scalar() {
                Stepping::Steps(16)
            } else {
                Stepping::Cfl(swe_case(test_case)?.default_cfl)
            }
        }
    };
    let epsilon = match get("eps") {
        Some(s) => Some(
            s.parse()
                .map_err(|_| SimError::Config(format!("bad eps `{s}`")))?,
        ),
        None => None,
    };
    let pressure = match get("pressure") {
        Some("midpoint") => Some(PressureRule::Midpoint),
        Some("kepler") => Some(PressureRule::Kepler),
        Some("off") => Some(PressureRule::Off),
        Some(other) => {
            return Err(SimError::Config(format!(
                "pressure must be midpoint, kepler or off, got `{other}`"
            )))
        }
        None => None,
    };
    let viscosity = match get("viscosity") {
        Some(s) => Some(match s {
            "on" | "true" | "1" => true,
            "off" | "false" | "0" => false,
            other => {
                return Err(SimError::Config(format!(
                    "viscosity must be on or off, got `{other}`"
                )))
            }
        }),
        None => None,
    };
    let output_dir = get("out").map(PathBuf::from);
    let cfg = RunConfig {
        test_case,
        scheme,
        tableau,
        n_cells,
        stepping,
        epsilon,
        pressure,
        viscosity,
        output_dir,
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(test: TestCase, scheme: SchemeKind) -> RunConfig {
        RunConfig {
            test_case: test,
            scheme,
            tableau: SchemeId::Sassp332,
            n_cells: 100,
            stepping: Stepping::Steps(4),
            epsilon: None,
            pressure: None,
            viscosity: None,
            output_dir: None,
        }
    }

    #[test]
    fn pairing_rules_enforced() {
        assert!(cfg(TestCase::Test1, SchemeKind::Slimexh).validate().is_err());
        assert!(cfg(TestCase::Rp1, SchemeKind::Alg1).validate().is_err());
        assert!(cfg(TestCase::Test1, SchemeKind::Alg1).validate().is_ok());
        assert!(cfg(TestCase::Rp1, SchemeKind::Slimexh).validate().is_ok());
        assert!(cfg(TestCase::Rp1, SchemeKind::LowFroude).validate().is_err());
        assert!(cfg(TestCase::LowFroude, SchemeKind::LowFroude).validate().is_ok());
    }

    #[test]
    fn order_arithmetic() {
        // error sequence (4e-2, 1e-2, 2.5e-3) at ratio 2 gives orders (2, 2)
        let mut base = cfg(TestCase::Test1, SchemeKind::Alg1);
        base.stepping = Stepping::Steps(1);
        let errors = [4e-2, 1e-2, 2.5e-3];
        let mut rows: Vec<OrderRow> = Vec::new();
        for (k, e) in errors.iter().enumerate() {
            let param = 1.0 / (1 << k) as f64;
            let order = if k > 0 {
                Some((rows[k - 1].error / e).ln() / (rows[k - 1].param / param).ln())
            } else {
                None
            };
            rows.push(OrderRow {
                label: String::new(),
                param,
                error: *e,
                order,
            });
        }
        assert!((rows[1].order.unwrap() - 2.0).abs() < 1e-12);
        assert!((rows[2].order.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn small_scalar_run_executes_and_reports() {
        let mut c = cfg(TestCase::Test1, SchemeKind::Alg2);
        c.n_cells = 200;
        c.stepping = Stepping::Steps(2);
        let report = run(&c).unwrap();
        assert_eq!(report.n_steps, 2);
        let (l1, l2, linf) = report.errors.unwrap();
        assert!(l1 > 0.0 && l2 > 0.0 && linf > 0.0);
        assert!(l2 < 1.0);
        assert_eq!(report.scalar_rows.len(), 2);
    }

    #[test]
    fn config_parsing_and_overrides() {
        let text = "
# comment
test = rp2
scheme = slimexh
tableau = ssp3433
nx = 100
cfl = 2.0
viscosity = on
";
        let map = parse_config_file(text).unwrap();
        let c = config_from_kv(&map).unwrap();
        assert_eq!(c.test_case, TestCase::Rp2);
        assert_eq!(c.scheme, SchemeKind::Slimexh);
        assert_eq!(c.tableau, SchemeId::Ssp3433);
        assert_eq!(c.stepping, Stepping::Cfl(2.0));
        assert_eq!(c.viscosity, Some(true));

        let mut bad = map.clone();
        bad.insert("nt".into(), "4".into());
        assert!(config_from_kv(&bad).is_err(), "nt and cfl together");

        let mut unknown = map.clone();
        unknown.insert("scheme".into(), "alg1".into());
        assert!(config_from_kv(&unknown).is_err(), "scalar scheme on swe test");
    }

    #[test]
    fn csv_output_written_and_deterministic() {
        let dir = std::env::temp_dir().join(format!("slimex_test_{}", std::process::id()));
        let mut c = cfg(TestCase::Test1, SchemeKind::Alg1);
        c.n_cells = 120;
        c.stepping = Stepping::Steps(2);
        c.output_dir = Some(dir.clone());
        let r1 = run(&c).unwrap();
        let bytes1 = std::fs::read(&r1.files[0]).unwrap();
        let r2 = run(&c).unwrap();
        let bytes2 = std::fs::read(&r2.files[0]).unwrap();
        assert_eq!(bytes1, bytes2);
        assert!(String::from_utf8(bytes1).unwrap().starts_with("x,value\n"));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn converge_halve_dt_on_scalar() {
        let mut base = cfg(TestCase::Test3, SchemeKind::Alg1);
        base.n_cells = 300;
        base.stepping = Stepping::Steps(2);
        let table = converge(&base, &Refinement::HalveDt { levels: 3 }).unwrap();
        assert_eq!(table.rows.len(), 3);
        let last = table.rows.last().unwrap();
        assert!(last.order.unwrap() > 1.5, "{:?}", table.rows);
    }
}
