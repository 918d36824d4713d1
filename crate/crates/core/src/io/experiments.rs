//! Single runs, τ-refinement studies, truncation sweeps and offline audits.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{load_config, RunConfig};
use super::output::{
    read_snapshots, snapshot_path, write_json, write_report, write_snapshot, write_table, write_timeseries,
    TimeseriesRow,
};
use crate::diagnostics::{audit_snapshots, audit_trajectory, free_energy, DiagnosticsReport, NormTable};
use crate::discretization::FieldState;
use crate::error::{Error, Result};
use crate::stepper::{Problem, Simulation, Trajectory};

/// A finished run with its audit and time series.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub report: DiagnosticsReport,
    pub rows: Vec<TimeseriesRow>,
    pub reference: Option<Vec<ReferenceRow>>,
}

/// Error of the decoupled heat instance against the analytic cosine mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReferenceRow {
    pub t: f64,
    pub l2_error: f64,
    pub linf_error: f64,
}

fn row(problem: &Problem, s: &FieldState) -> TimeseriesRow {
    let f = free_energy(problem, s);
    let mesh = &problem.mesh;
    let w_abs: Vec<f64> = mesh.interpolate_qp(&s.w).iter().map(|w| w.abs()).collect();
    TimeseriesRow {
        t: s.t,
        energy_total: f.total(),
        energy_gradchi: f.gradient,
        energy_elastic: f.elastic,
        enthalpy_l1: mesh.integrate(&w_abs),
        w_min: s.w.iter().fold(f64::INFINITY, |a, b| a.min(*b)),
        chi_min: s.chi.iter().fold(f64::INFINITY, |a, b| a.min(*b)),
        chi_max: s.chi.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b)),
        ..TimeseriesRow::default()
    }
}

pub fn timeseries(problem: &Problem, traj: &Trajectory) -> Vec<TimeseriesRow> {
    let mut rows = vec![row(problem, &traj.states[0])];
    for (s, r) in traj.states[1..].iter().zip(&traj.reports) {
        rows.push(TimeseriesRow {
            tau: r.tau,
            r1: r.remainders.r1,
            r2: r.remainders.r2,
            r3: r.remainders.r3,
            cancel_resid: r.cancel_resid,
            outer_iters: r.outer_iterations,
            ..row(problem, s)
        });
    }
    rows
}

pub fn reference_errors(cfg: &RunConfig, traj: &Trajectory) -> Option<Vec<ReferenceRow>> {
    let reference = cfg.file.reference.as_ref()?;
    let mesh = &cfg.problem.mesh;
    let rows = traj
        .states
        .iter()
        .map(|s| {
            let exact: Vec<f64> = mesh.quad_points().iter().map(|p| reference.value(p[0], s.t)).collect();
            let num = mesh.interpolate_qp(&s.w);
            let sq: Vec<f64> = num.iter().zip(&exact).map(|(a, b)| (a - b) * (a - b)).collect();
            let linf = mesh
                .coords()
                .iter()
                .zip(&s.w)
                .fold(0.0f64, |m, (c, w)| m.max((w - reference.value(c[0], s.t)).abs()));
            ReferenceRow {
                t: s.t,
                l2_error: mesh.integrate(&sq).sqrt(),
                linf_error: linf,
            }
        })
        .collect();
    Some(rows)
}

pub fn integrate(cfg: &RunConfig) -> Result<Trajectory> {
    crate::stepper::run(
        cfg.problem.clone(),
        cfg.controls.clone(),
        cfg.initial.clone(),
        cfg.final_time,
    )
}

/// Runs and audits a configuration without touching the file system.
pub fn simulate(cfg: &RunConfig) -> Result<RunOutput> {
    let trajectory = integrate(cfg)?;
    let report = audit_trajectory(&cfg.problem, &trajectory, &cfg.tolerances)?;
    Ok(RunOutput {
        rows: timeseries(&cfg.problem, &trajectory),
        reference: reference_errors(cfg, &trajectory),
        trajectory,
        report,
    })
}

/// Runs a configuration and writes `timeseries.csv`, the snapshots,
/// `diagnostics.json`, a copy of the configuration and, for instances with
/// an analytic reference, `reference_error.csv`.
pub fn run_single(cfg: &RunConfig, out: &Path) -> Result<RunOutput> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let config_path = out.join("config.toml");
    std::fs::write(&config_path, cfg.to_toml()?).map_err(|e| Error::io(&config_path, e))?;

    let cadence = cfg.file.output.cadence;
    let mesh = cfg.problem.mesh.clone();
    let mut sim = Simulation::new(
        cfg.problem.clone(),
        cfg.controls.clone(),
        cfg.initial.clone(),
        cfg.final_time,
    )?;
    write_snapshot(&snapshot_path(out, 0), &mesh, 0, &cfg.initial, None)?;
    let mut traj = Trajectory {
        states: vec![cfg.initial.clone()],
        reports: Vec::new(),
        xi: Vec::new(),
    };
    while !sim.is_finished() {
        let o = sim.advance()?;
        let k = o.report.step;
        if k % cadence == 0 || sim.is_finished() {
            write_snapshot(&snapshot_path(out, k), &mesh, k, &o.state, Some(&o.xi))?;
        }
        traj.states.push(o.state);
        traj.reports.push(o.report);
        traj.xi.push(o.xi);
    }

    let report = audit_trajectory(&cfg.problem, &traj, &cfg.tolerances)?;
    let rows = timeseries(&cfg.problem, &traj);
    write_timeseries(&out.join("timeseries.csv"), &rows)?;
    write_report(&out.join("diagnostics.json"), &report)?;
    let reference = reference_errors(cfg, &traj);
    if let Some(r) = &reference {
        let table: Vec<Vec<f64>> = r.iter().map(|r| vec![r.t, r.l2_error, r.linf_error]).collect();
        write_table(
            &out.join("reference_error.csv"),
            &["t", "l2_error", "linf_error"],
            &table,
        )?;
    }
    Ok(RunOutput {
        trajectory: traj,
        report,
        rows,
        reference,
    })
}

/// Re-audits the snapshots in a directory written by [`run_single`].
pub fn audit_directory(dir: &Path) -> Result<DiagnosticsReport> {
    let cfg = load_config(dir.join("config.toml"))?;
    let snaps = read_snapshots(dir, cfg.problem.mesh.dim())?;
    audit_snapshots(&cfg.problem, &snaps, &cfg.tolerances)
}

/// State at time `t` by linear interpolation between stored states.
pub fn interpolate_state(states: &[FieldState], t: f64) -> FieldState {
    let j = states.partition_point(|s| s.t < t);
    if j == 0 {
        return states[0].clone();
    }
    if j >= states.len() {
        return states[states.len() - 1].clone();
    }
    let (a, b) = (&states[j - 1], &states[j]);
    let theta = if b.t > a.t { (t - a.t) / (b.t - a.t) } else { 1.0 };
    let mix = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p + theta * (q - p)).collect() };
    FieldState {
        t,
        u: mix(&a.u, &b.u),
        v: mix(&a.v, &b.v),
        w: mix(&a.w, &b.w),
        chi: mix(&a.chi, &b.chi),
    }
}

/// `L²(Ω_T)` distances of `u`, `w`, `χ` between two trajectories, sampled
/// at the times of `grid`, each sample weighted by the step ending there.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct FieldDistance {
    pub u: f64,
    pub w: f64,
    pub chi: f64,
}

impl FieldDistance {
    pub fn combined(&self) -> f64 {
        (self.u * self.u + self.w * self.w + self.chi * self.chi).sqrt()
    }
}

pub fn l2_distance(problem: &Problem, grid: &[FieldState], a: &[FieldState], b: &[FieldState]) -> FieldDistance {
    let mesh = &problem.mesh;
    let d = mesh.dim();
    let sq = |x: &[f64], y: &[f64]| -> f64 {
        let diff: Vec<f64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
        let qp = mesh.interpolate_qp(&diff);
        mesh.integrate(&qp.iter().map(|v| v * v).collect::<Vec<_>>())
    };
    let mut acc = FieldDistance::default();
    for k in 1..grid.len() {
        let tau = grid[k].t - grid[k - 1].t;
        let (sa, sb) = (interpolate_state(a, grid[k].t), interpolate_state(b, grid[k].t));
        for c in 0..d {
            let ua: Vec<f64> = sa.u.iter().skip(c).step_by(d).cloned().collect();
            let ub: Vec<f64> = sb.u.iter().skip(c).step_by(d).cloned().collect();
            acc.u += tau * sq(&ua, &ub);
        }
        acc.w += tau * sq(&sa.w, &sb.w);
        acc.chi += tau * sq(&sa.chi, &sb.chi);
    }
    FieldDistance {
        u: acc.u.sqrt(),
        w: acc.w.sqrt(),
        chi: acc.chi.sqrt(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RefinementLevel {
    pub tau: f64,
    pub steps: usize,
    pub all_verdicts_pass: bool,
    pub norms: NormTable,
}

#[derive(Clone, Debug, Serialize)]
pub struct RefinementTable {
    pub levels: Vec<RefinementLevel>,
    /// `differences[j]` compares level `j` with level `j + 1`.
    pub differences: Vec<FieldDistance>,
    /// `combined(differences[j]) / combined(differences[j + 1])`.
    pub ratios: Vec<f64>,
    /// Every field's difference decreases strictly, or stays zero.
    pub cauchy: bool,
    /// Largest relative spread of any norm across levels.
    pub norm_spread: f64,
    pub norms_bounded: bool,
    /// `false` when a level failed; the failures are listed in `errors`.
    pub complete: bool,
    pub errors: Vec<String>,
}

impl RefinementTable {
    pub fn passes(&self) -> bool {
        self.complete && self.cauchy && self.norms_bounded && self.levels.iter().all(|l| l.all_verdicts_pass)
    }
}

/// Allowed relative variation of the a priori norms across a study.
pub const NORM_SPREAD_TOL: f64 = 0.05;

fn decreasing(a: f64, b: f64) -> bool {
    b < a || (a == 0.0 && b == 0.0)
}

/// Runs at `τ, τ/2, …, τ/2^{levels−1}` and compares successive levels at
/// the coarsest grid's times.
pub fn run_tau_refinement(cfg: &RunConfig, levels: usize) -> Result<RefinementTable> {
    if levels < 2 {
        return Err(Error::domain("a refinement study needs at least two levels"));
    }
    let runs: Vec<(f64, Result<(Trajectory, DiagnosticsReport)>)> = (0..levels)
        .into_par_iter()
        .map(|j| {
            let tau = cfg.controls.tau / f64::powi(2.0, j as i32);
            let c = cfg.with_tau(tau);
            let res = integrate(&c).and_then(|t| {
                let r = audit_trajectory(&c.problem, &t, &c.tolerances)?;
                Ok((t, r))
            });
            (tau, res)
        })
        .collect();
    let mut errors = Vec::new();
    let mut ok = Vec::new();
    for (tau, r) in runs {
        match r {
            Ok(v) => ok.push((tau, v)),
            Err(e) => errors.push(format!("τ = {tau:e}: {e}")),
        }
    }
    let complete = errors.is_empty();
    let levels_out: Vec<RefinementLevel> = ok
        .iter()
        .map(|(tau, (t, r))| RefinementLevel {
            tau: *tau,
            steps: t.reports.len(),
            all_verdicts_pass: r.all_pass(),
            norms: r.norms,
        })
        .collect();
    let mut differences = Vec::new();
    if complete {
        let grid = &ok[0].1 .0.states;
        for j in 0..ok.len() - 1 {
            differences.push(l2_distance(
                &cfg.problem,
                grid,
                &ok[j].1 .0.states,
                &ok[j + 1].1 .0.states,
            ));
        }
    }
    let ratios = differences
        .windows(2)
        .map(|p| p[0].combined() / p[1].combined())
        .collect();
    let cauchy = complete
        && differences
            .windows(2)
            .all(|p| decreasing(p[0].u, p[1].u) && decreasing(p[0].w, p[1].w) && decreasing(p[0].chi, p[1].chi));
    let norms: Vec<NormTable> = levels_out.iter().map(|l| l.norms).collect();
    let norm_spread = NormTable::max_relative_spread(&norms);
    Ok(RefinementTable {
        levels: levels_out,
        differences,
        ratios,
        cauchy,
        norm_spread,
        norms_bounded: norm_spread <= NORM_SPREAD_TOL,
        complete,
        errors,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRun {
    pub m: f64,
    pub max_w: f64,
    pub norms: NormTable,
    pub all_verdicts_pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepPair {
    pub m_low: f64,
    pub m_high: f64,
    /// Largest `‖Δ‖∞ / max(‖state‖∞, 1)` over fields and times.
    pub distance: f64,
    /// Both runs stay below the smaller level.
    pub inactive: bool,
    /// `distance ≤ tol` when inactive; always `true` for active pairs.
    pub consistent: bool,
    /// Truncation changed the trajectory by more than the tolerance.
    pub truncation_active: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepTable {
    pub runs: Vec<SweepRun>,
    pub pairs: Vec<SweepPair>,
    pub tolerance: f64,
    /// Relative spread of `‖K̂_M(w)‖` and `‖Θ_M(w)‖` across `M`.
    pub norm_spread: f64,
    pub norms_bounded: bool,
}

impl SweepTable {
    pub fn passes(&self) -> bool {
        self.pairs.iter().all(|p| p.consistent) && self.runs.iter().all(|r| r.all_verdicts_pass)
    }
}

fn relative_state_distance(a: &[FieldState], b: &[FieldState]) -> f64 {
    let inf = |x: &[f64]| x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst: f64 = 0.0;
    for sa in a {
        let sb = interpolate_state(b, sa.t);
        for (x, y) in [(&sa.u, &sb.u), (&sa.v, &sb.v), (&sa.w, &sb.w), (&sa.chi, &sb.chi)] {
            let diff: Vec<f64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
            worst = worst.max(inf(&diff) / inf(x).max(inf(y)).max(1.0));
        }
    }
    worst
}

/// Runs the configuration at every truncation level in `ms`.
pub fn run_m_sweep(cfg: &RunConfig, ms: &[f64]) -> Result<SweepTable> {
    let mut ms = ms.to_vec();
    ms.sort_by(f64::total_cmp);
    let runs: Vec<(Trajectory, DiagnosticsReport)> = ms
        .par_iter()
        .map(|&m| {
            let c = cfg.with_truncation(m)?;
            let t = integrate(&c)?;
            let r = audit_trajectory(&c.problem, &t, &c.tolerances)?;
            Ok((t, r))
        })
        .collect::<Result<_>>()?;
    let tol = cfg.controls.fixed_point_tol;
    let out_runs: Vec<SweepRun> = ms
        .iter()
        .zip(&runs)
        .map(|(m, (_, r))| SweepRun {
            m: *m,
            max_w: r.w_max,
            norms: r.norms,
            all_verdicts_pass: r.all_pass(),
        })
        .collect();
    let mut pairs = Vec::new();
    for i in 0..ms.len() {
        for j in i + 1..ms.len() {
            let distance = relative_state_distance(&runs[i].0.states, &runs[j].0.states);
            let inactive = out_runs[i].max_w.max(out_runs[j].max_w) < ms[i];
            pairs.push(SweepPair {
                m_low: ms[i],
                m_high: ms[j],
                distance,
                inactive,
                consistent: !inactive || distance <= tol,
                truncation_active: distance > tol,
            });
        }
    }
    let spread = |f: fn(&NormTable) -> f64| {
        let v: Vec<f64> = out_runs.iter().map(|r| f(&r.norms)).collect();
        let hi = v.iter().cloned().fold(f64::MIN, f64::max);
        let lo = v.iter().cloned().fold(f64::MAX, f64::min);
        if hi > 0.0 {
            (hi - lo) / hi
        } else {
            0.0
        }
    };
    let norm_spread = spread(|n| n.k_hat_m).max(spread(|n| n.theta_m));
    Ok(SweepTable {
        runs: out_runs,
        pairs,
        tolerance: tol,
        norm_spread,
        norms_bounded: norm_spread <= NORM_SPREAD_TOL,
    })
}

/// Writes a serializable table next to other outputs.
pub fn write_study<T: Serialize>(path: &Path, table: &T) -> Result<()> {
    write_json(path, table)
}
