//! The `run`, `study`, `compare` and `dump-basis` commands.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use super::config::{ReferenceKind, ScenarioConfig, ScenarioKind};
use super::CliError;
use crate::assembly::Assembler;
use crate::mra::{full_index_set, BasisFamily};
use crate::problem::{DirichletEdges, ProblemDefinition};
use crate::reference::{
    analytic_fgm_steady, analytic_slab_steady, error_norms, fd_solve_transient, interface_flux_jump, sample_solution,
    ErrorReport, FgmProfile, Profile, Reference, SlabProfile, UniformGridField,
};
use crate::timestepper::{run_transient, RunOptions, StepRecord, TransientSolution};

/// Abscissae averaged along horizontal lines.
const LINE_SAMPLES: usize = 129;

/// Oracle the wavelet solution is measured against.
enum Oracle {
    Slab(SlabProfile),
    Fgm(FgmProfile),
    Grid(UniformGridField),
}

impl Oracle {
    fn as_reference(&self) -> Reference<'_> {
        match self {
            Oracle::Slab(p) => Reference::Profile(p),
            Oracle::Fgm(p) => Reference::Profile(p),
            Oracle::Grid(g) => Reference::Grid(g),
        }
    }

    fn sampled(&self, n: usize) -> Result<UniformGridField, CliError> {
        Ok(match self {
            Oracle::Slab(p) => UniformGridField::from_fn(n, |q| p.value(q[1]))?,
            Oracle::Fgm(p) => UniformGridField::from_fn(n, |q| p.value(q[1]))?,
            Oracle::Grid(g) => g.clone(),
        })
    }
}

/// Closed-form steady profile, when the scenario has one.
fn analytic_profile(cfg: &ScenarioConfig) -> Option<Oracle> {
    let b = &cfg.boundary;
    let default_data =
        b.bottom.is_none() && b.right.is_none() && b.top.is_none() && b.left.is_none() && cfg.scenario.source.is_zero();
    if !default_data {
        return None;
    }
    let m = &cfg.material;
    match cfg.scenario.kind {
        ScenarioKind::Slab => Some(Oracle::Slab(analytic_slab_steady(m.k1, m.k2, m.interface_y))),
        ScenarioKind::Homogeneous => Some(Oracle::Slab(analytic_slab_steady(m.k1, m.k1, 0.5))),
        ScenarioKind::Fgm if m.y0 > 0.0 && m.y0 < 1.0 => Some(Oracle::Fgm(analytic_fgm_steady(m.k1, m.alpha, m.y0))),
        _ => None,
    }
}

fn build_oracle(cfg: &ScenarioConfig, problem: &ProblemDefinition) -> Result<Option<Oracle>, CliError> {
    let fd = || -> Result<Oracle, CliError> {
        let n = cfg.reference.n;
        log::info!("finite-difference reference on a {n}x{n} grid");
        Ok(Oracle::Grid(fd_solve_transient(
            problem,
            n,
            cfg.time.dt,
            cfg.time.t_final,
        )?))
    };
    Ok(match cfg.reference.kind {
        ReferenceKind::None => None,
        ReferenceKind::Fd => Some(fd()?),
        ReferenceKind::Analytic => Some(analytic_profile(cfg).ok_or_else(|| {
            CliError::Config(format!(
                "reference.kind: no closed form for the {} scenario with these data",
                cfg.scenario.kind.name()
            ))
        })?),
        ReferenceKind::Auto => match analytic_profile(cfg) {
            Some(o) => Some(o),
            None => Some(fd()?),
        },
    })
}

/// Everything `run` reports; `to_text` is `report.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    /// Scenario-specific quantities, in output order.
    pub metrics: Vec<(String, f64)>,
    pub error: Option<ErrorReport>,
    pub records: Vec<StepRecord>,
    pub final_time: f64,
    pub full_dofs: usize,
    pub final_active_dofs: usize,
    pub active_set_changes: usize,
    /// Zero unless `output.timing` is set.
    pub wall_ms: f64,
    pub config_echo: String,
}

impl RunReport {
    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn max_active_dofs(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.active_dofs)
            .max()
            .unwrap_or(self.final_active_dofs)
    }

    pub fn total_pcg_iterations(&self) -> usize {
        self.records.iter().map(|r| r.pcg_iters).sum()
    }

    /// Everything but the configuration echo.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario={}", self.scenario);
        for (k, v) in &self.metrics {
            let _ = writeln!(s, "{k}={v:e}");
        }
        if let Some(e) = &self.error {
            s.push_str(&e.to_kv());
            s.push_str("error_normalization=raw\n");
        }
        let mean = if self.records.is_empty() {
            0.0
        } else {
            self.records.iter().map(|r| r.active_dofs as f64).sum::<f64>() / self.records.len() as f64
        };
        let _ = writeln!(s, "steps={}", self.records.len());
        let _ = writeln!(s, "final_time={}", self.final_time);
        let _ = writeln!(s, "full_dofs={}", self.full_dofs);
        let _ = writeln!(s, "final_active_dofs={}", self.final_active_dofs);
        let _ = writeln!(s, "max_active_dofs={}", self.max_active_dofs());
        let _ = writeln!(s, "mean_active_dofs={mean:e}");
        let _ = writeln!(s, "active_set_changes={}", self.active_set_changes);
        let _ = writeln!(s, "total_pcg_iterations={}", self.total_pcg_iterations());
        let _ = writeln!(s, "wall_ms={:.3}", self.wall_ms);
        s
    }

    pub fn to_text(&self) -> String {
        self.summary() + &self.config_echo
    }
}

struct Executed {
    solution: TransientSolution,
    report: RunReport,
}

fn line_mean(sol: &TransientSolution, y: f64) -> f64 {
    let pts: Vec<[f64; 2]> = (0..LINE_SAMPLES)
        .map(|i| [i as f64 / (LINE_SAMPLES - 1) as f64, y])
        .collect();
    let t = sol.temperature_field(sol.last(), &pts);
    let inner: f64 = t[1..LINE_SAMPLES - 1].iter().sum();
    (inner + 0.5 * (t[0] + t[LINE_SAMPLES - 1])) / (LINE_SAMPLES - 1) as f64
}

fn scenario_metrics(cfg: &ScenarioConfig, sol: &TransientSolution) -> Vec<(String, f64)> {
    let m = &cfg.material;
    let mut out = Vec::new();
    let analytic = analytic_profile(cfg);
    match cfg.scenario.kind {
        ScenarioKind::Slab => {
            let t_i = line_mean(sol, m.interface_y);
            out.push(("interface_temperature".into(), t_i));
            if let Some(Oracle::Slab(p)) = &analytic {
                out.push(("interface_temperature_analytic".into(), p.interface_value()));
                out.push(("interface_temperature_error".into(), (t_i - p.interface_value()).abs()));
            }
            let jump = interface_flux_jump(sol, sol.last(), m.interface_y, 1.0 / 64.0, 64);
            out.push(("interface_flux_jump_rms".into(), jump));
        }
        ScenarioKind::Fgm | ScenarioKind::Homogeneous => {
            let mean = line_mean(sol, 0.5);
            out.push(("midline_mean".into(), mean));
            if let Some(o) = &analytic {
                let exact = match o {
                    Oracle::Slab(p) => p.value(0.5),
                    Oracle::Fgm(p) => p.value(0.5),
                    Oracle::Grid(_) => unreachable!("analytic oracles are profiles"),
                };
                out.push(("midline_mean_analytic".into(), exact));
                out.push(("midline_mean_error".into(), (mean - exact).abs()));
            }
        }
        ScenarioKind::Inclusion => {
            out.push(("center_temperature".into(), sol.temperature(sol.last(), [m.cx, m.cy])));
            out.push(("midline_mean".into(), line_mean(sol, m.cy)));
        }
        ScenarioKind::Custom => {
            out.push(("center_temperature".into(), sol.temperature(sol.last(), [0.5, 0.5])));
        }
    }
    out
}

fn execute(cfg: &ScenarioConfig, oracle: Option<&Oracle>) -> Result<Executed, CliError> {
    let problem = cfg.problem()?;
    let disc = cfg.discretization();
    let policy = cfg.policy();
    let grid = cfg.time_grid()?;
    let opts = RunOptions {
        store_every: cfg.output.snapshot_every,
        timing: cfg.output.timing,
        steady_tol: None,
    };
    let clock = cfg.output.timing.then(Instant::now);
    let solution = run_transient(&problem, &disc, policy.as_ref(), grid, opts)?;
    let error = match oracle {
        Some(o) => Some(error_norms(
            &solution,
            solution.last(),
            &o.as_reference(),
            Some(cfg.reference.n),
        )?),
        None => None,
    };
    let report = RunReport {
        scenario: cfg.scenario.kind.name().to_string(),
        metrics: scenario_metrics(cfg, &solution),
        error,
        records: solution.records.clone(),
        final_time: solution.last().t,
        full_dofs: solution.full.len(),
        final_active_dofs: solution.final_set().len(),
        active_set_changes: solution.sets.len() - 1,
        wall_ms: clock.map_or(0.0, |c| c.elapsed().as_secs_f64() * 1e3),
        config_echo: cfg.echo(),
    };
    Ok(Executed { solution, report })
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_run_outputs(cfg: &ScenarioConfig, ex: &Executed, dir: &Path) -> Result<(), CliError> {
    ensure_dir(dir)?;
    let sol = &ex.solution;
    let field = sample_solution(sol, sol.last(), cfg.reference.n)?;
    write(dir, "field.csv", &field.to_csv())?;
    write(dir, "active_set.csv", &sol.active_sets_csv())?;
    write(dir, "diagnostics.csv", &sol.diagnostics_csv())?;
    write(dir, "report.txt", &ex.report.to_text())?;
    if cfg.output.dump_matrix {
        let problem = cfg.problem()?;
        let k = Assembler::new(&sol.basis, sol.final_set().set(), &problem, cfg.quadrature_rule())
            .and_then(|a| a.stiffness())
            .map_err(|e| CliError::Solver(format!("stiffness for K.mtx: {e}")))?;
        let path = dir.join("K.mtx");
        let file = std::fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        k.write_matrix_market(std::io::BufWriter::new(file))
            .map_err(|e| CliError::io(&path, e))?;
    }
    Ok(())
}

/// Runs one scenario and writes `field.csv`, `active_set.csv`,
/// `diagnostics.csv`, `report.txt` and optionally `K.mtx` into `dir`.
pub fn run(cfg: &ScenarioConfig, dir: &Path) -> Result<RunReport, CliError> {
    cfg.validate()?;
    let oracle = build_oracle(cfg, &cfg.problem()?)?;
    let ex = execute(cfg, oracle.as_ref())?;
    write_run_outputs(cfg, &ex, dir)?;
    Ok(ex.report)
}

/// Runs the scenario and its reference; writes `error_report.txt`,
/// `field.csv` and `reference_field.csv` into `dir`.
pub fn compare(cfg: &ScenarioConfig, dir: &Path) -> Result<ErrorReport, CliError> {
    cfg.validate()?;
    let oracle = build_oracle(cfg, &cfg.problem()?)?
        .ok_or_else(|| CliError::Config("reference.kind: compare needs a reference".into()))?;
    let ex = execute(cfg, Some(&oracle))?;
    let report = ex.report.error.clone().expect("an oracle yields an error report");
    ensure_dir(dir)?;
    let n = cfg.reference.n;
    let field = sample_solution(&ex.solution, ex.solution.last(), n)?;
    write(dir, "field.csv", &field.to_csv())?;
    write(dir, "reference_field.csv", &oracle.sampled(n)?.to_csv())?;
    let mut text = report.to_kv();
    text.push_str("error_normalization=raw\n");
    for (k, v) in &ex.report.metrics {
        let _ = writeln!(text, "{k}={v:e}");
    }
    write(dir, "error_report.txt", &text)?;
    Ok(report)
}

/// Parameter swept by a study.
#[derive(Debug, Clone, PartialEq)]
pub enum StudyParam {
    /// Thresholds with their spelling on the command line.
    Epsilon(Vec<(String, f64)>),
    Level(Vec<u32>),
}

impl FromStr for StudyParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, list) = s
            .split_once('=')
            .ok_or_else(|| format!("expected `eps=...` or `J=...`, got `{s}`"))?;
        let items: Vec<&str> = list.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
        if items.is_empty() {
            return Err("the value list is empty".into());
        }
        match name.trim() {
            "eps" | "epsilon" => items
                .iter()
                .map(|t| match t.parse::<f64>() {
                    Ok(v) if v > 0.0 && v.is_finite() => Ok((t.to_string(), v)),
                    _ => Err(format!("threshold `{t}` is not a positive number")),
                })
                .collect::<Result<_, _>>()
                .map(StudyParam::Epsilon),
            "J" | "j" => items
                .iter()
                .map(|t| t.parse::<u32>().map_err(|_| format!("level `{t}` is not an integer")))
                .collect::<Result<_, _>>()
                .map(StudyParam::Level),
            other => Err(format!("unknown study parameter `{other}`; use eps or J")),
        }
    }
}

/// One line of `study.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub param: String,
    pub outcome: Result<StudyStats, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyStats {
    pub active_dofs: usize,
    pub l2_error: f64,
    pub h1_semi_error: f64,
    pub wall_ms: f64,
}

impl StudyRow {
    /// Failed rows keep the parameter and leave the other columns empty.
    pub fn csv_line(&self) -> String {
        match &self.outcome {
            Ok(s) => format!(
                "{},{},{:e},{:e},{:.3}",
                self.param, s.active_dofs, s.l2_error, s.h1_semi_error, s.wall_ms
            ),
            Err(_) => format!("{},,,,", self.param),
        }
    }
}

pub const STUDY_HEADER: &str = "param,active_dofs,l2_error,h1_semi_error,wall_ms";

/// Repeats the scenario for every parameter value, each in its own
/// subdirectory of `dir`, against one shared reference. Writes `study.csv`
/// and, when rows failed, `study_failures.txt`.
pub fn study(
    cfg: &ScenarioConfig,
    param: &StudyParam,
    uniform_baseline: bool,
    dir: &Path,
) -> Result<Vec<StudyRow>, CliError> {
    cfg.validate()?;
    let oracle = build_oracle(cfg, &cfg.problem()?)?
        .ok_or_else(|| CliError::Config("reference.kind: a study needs a reference".into()))?;
    let mut runs: Vec<(String, ScenarioConfig)> = Vec::new();
    let mut levels: Vec<u32> = Vec::new();
    match param {
        StudyParam::Epsilon(list) => {
            for (label, eps) in list {
                let mut c = cfg.clone();
                c.adaptivity.enabled = true;
                c.adaptivity.epsilon = *eps;
                runs.push((label.clone(), c));
            }
            levels.push(cfg.basis.j_max);
        }
        StudyParam::Level(list) => {
            for &j in list {
                let mut c = cfg.clone();
                c.basis.j_max = j;
                runs.push((j.to_string(), c));
                if !levels.contains(&j) {
                    levels.push(j);
                }
            }
        }
    }
    if uniform_baseline {
        for &j in &levels {
            let mut c = cfg.clone();
            c.basis.j_max = j;
            c.adaptivity.enabled = false;
            let label = match param {
                StudyParam::Epsilon(_) => "uniform".to_string(),
                StudyParam::Level(_) => format!("uniform_J{j}"),
            };
            runs.push((label, c));
        }
    }

    ensure_dir(dir)?;
    let mut rows = Vec::with_capacity(runs.len());
    for (label, c) in runs {
        let clock = Instant::now();
        let sub = dir.join(format!("run_{label}"));
        let outcome = c
            .validate()
            .and_then(|_| execute(&c, Some(&oracle)))
            .and_then(|ex| write_run_outputs(&c, &ex, &sub).map(|_| ex))
            .map(|ex| {
                let e = ex.report.error.as_ref().expect("an oracle yields an error report");
                StudyStats {
                    active_dofs: ex.report.final_active_dofs,
                    l2_error: e.l2_error,
                    h1_semi_error: e.h1_semi_error,
                    wall_ms: clock.elapsed().as_secs_f64() * 1e3,
                }
            })
            .map_err(|e| e.to_string());
        if let Err(e) = &outcome {
            log::warn!("study run {label} failed: {e}");
        }
        rows.push(StudyRow { param: label, outcome });
    }

    let mut csv = format!("{STUDY_HEADER}\n");
    let mut failures = String::new();
    for r in &rows {
        csv.push_str(&r.csv_line());
        csv.push('\n');
        if let Err(e) = &r.outcome {
            let _ = writeln!(failures, "{}: {e}", r.param);
        }
    }
    write(dir, "study.csv", &csv)?;
    if !failures.is_empty() {
        write(dir, "study_failures.txt", &failures)?;
    }
    Ok(rows)
}

/// `ordinal,level,kind,orientation,kx,ky` for the unrestricted index set.
pub fn dump_basis(family: BasisFamily, j: u32) -> Result<String, CliError> {
    full_index_set(j, family, DirichletEdges::NONE)
        .map(|s| s.to_csv())
        .map_err(|e| CliError::Config(format!("J: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn study_param_parsing() {
        assert_eq!(
            "eps=1e-2,1e-3".parse::<StudyParam>().unwrap(),
            StudyParam::Epsilon(vec![("1e-2".into(), 1e-2), ("1e-3".into(), 1e-3)])
        );
        assert_eq!("J=4,5".parse::<StudyParam>().unwrap(), StudyParam::Level(vec![4, 5]));
        for bad in ["eps=", "eps=-1", "J=4.5", "q=3", "1e-3"] {
            assert!(bad.parse::<StudyParam>().is_err(), "{bad}");
        }
    }

    #[test]
    fn failed_row_keeps_the_schema() {
        let r = StudyRow {
            param: "1e-3".into(),
            outcome: Err("boom".into()),
        };
        assert_eq!(r.csv_line().split(',').count(), STUDY_HEADER.split(',').count());
    }
}
