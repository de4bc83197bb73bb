//! Continuation in ε: solves along a geometric schedule `ε_k = ε₀ q^k`,
//! each solve started from the previous solution, measures the geometry
//! at every ε and compares the solutions with the last one, which stands
//! in for the limit `u₀`.

use crate::csv::Table;
use crate::error::{Error, Result};
use crate::geometry::{distance_to_points, measure, GeometryConfig, GeometryReport};
use crate::grid::{ScalarField, Subdomain};
use crate::solver::{bounds_violation, solve_singular, DirichletProblem, Rhs, SolveOptions, SolveReport};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub eps0: f64,
    pub factor: f64,
    pub count: usize,
}

impl EpsilonSchedule {
    pub fn new(eps0: f64, factor: f64, count: usize) -> Result<EpsilonSchedule> {
        if !(eps0 > 0.0 && eps0.is_finite()) {
            return Err(Error::Parameter(format!("eps0 must be positive, got {eps0}")));
        }
        if !(factor > 0.0 && factor < 1.0) {
            return Err(Error::Parameter(format!("schedule factor must lie in (0, 1), got {factor}")));
        }
        if count == 0 {
            return Err(Error::Parameter("schedule needs at least one eps".into()));
        }
        Ok(EpsilonSchedule { eps0, factor, count })
    }

    /// `ε₀ · q^first, …` for `count` terms.
    pub fn starting_at(eps0: f64, factor: f64, first: i32, count: usize) -> Result<EpsilonSchedule> {
        EpsilonSchedule::new(eps0 * factor.powi(first), factor, count)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.eps0 * self.factor.powi(k as i32)).collect()
    }

    pub fn last(&self) -> f64 {
        self.eps0 * self.factor.powi(self.count as i32 - 1)
    }

    /// Every ε must be at least `2h`.
    pub fn check_resolvable(&self, h: f64) -> Result<()> {
        let last = self.last();
        if last < 2.0 * h * (1.0 - 1e-12) {
            return Err(Error::Parameter(format!("eps = {last:e} is below 2h = {:e}", 2.0 * h)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationConfig {
    /// `C₁ > 1` in the level `{u^ε > C₁ε}`.
    pub c1: f64,
    /// Inclusion tolerance `δ = delta_factor · ε`.
    pub delta_factor: f64,
    /// Number of trailing schedule entries the limit checks apply to.
    pub tail: usize,
    /// Allowed max/min ratio of a measurement across the schedule.
    pub stability_factor: f64,
    /// Each sup-norm difference after `burn_in` must be at most this
    /// multiple of the previous one.
    pub cauchy_ratio: f64,
    pub burn_in: usize,
    pub geometry: GeometryConfig,
    pub solve: SolveOptions,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        ContinuationConfig {
            c1: 2.0,
            delta_factor: 4.0,
            tail: 3,
            stability_factor: 2.0,
            cauchy_ratio: 0.8,
            burn_in: 1,
            geometry: GeometryConfig::default(),
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InclusionDefect {
    /// `max dist(x, {u^ε > C₁ε})` over `x ∈ {u₀ > 0} ∩ Ω′`.
    pub defect_a: f64,
    /// `max dist(x, {u₀ > 0})` over `x ∈ {u^ε > C₁ε} ∩ Ω′`.
    pub defect_b: f64,
    pub delta: f64,
    pub vacuous: bool,
}

impl InclusionDefect {
    pub fn pass(&self) -> bool {
        !self.vacuous && self.defect_a <= self.delta && self.defect_b <= self.delta
    }
}

/// Distances between the positivity sets `{u₀ > u0_level}` and
/// `{u^ε > C₁ε}` on `Ω′`, in both directions.
pub fn inclusion_defect(
    u_eps: &ScalarField,
    u0: &ScalarField,
    u0_level: f64,
    eps: f64,
    c1: f64,
    delta: f64,
    sub: &Subdomain,
) -> Result<InclusionDefect> {
    if !(c1 > 1.0) {
        return Err(Error::Parameter(format!("C1 must exceed 1, got {c1}")));
    }
    if !(delta >= eps) {
        return Err(Error::Parameter(format!("delta = {delta} must be at least eps = {eps}")));
    }
    let g = *u0.grid();
    if u_eps.grid() != &g {
        return Err(Error::Grid("fields live on different grids".into()));
    }
    let pos0: Vec<usize> = (0..g.len()).filter(|&k| u0.get(k) > u0_level).collect();
    let pos_e: Vec<usize> = (0..g.len()).filter(|&k| u_eps.get(k) > c1 * eps).collect();
    if pos0.is_empty() || pos_e.is_empty() {
        return Ok(InclusionDefect { defect_a: 0.0, defect_b: 0.0, delta, vacuous: true });
    }
    let points = |s: &[usize]| s.iter().map(|&k| g.point(k)).collect::<Vec<_>>();
    let to_e = distance_to_points(&g, &points(&pos_e));
    let to_0 = distance_to_points(&g, &points(&pos0));
    let worst = |set: &[usize], dist: &[f64]| {
        set.iter().filter(|&&k| sub.contains(k)).map(|&k| dist[k]).fold(0.0, f64::max)
    };
    Ok(InclusionDefect { defect_a: worst(&pos0, &to_e), defect_b: worst(&pos_e, &to_0), delta, vacuous: false })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsStep {
    pub eps: f64,
    pub solve: SolveReport,
    /// `‖u^{ε_k} − u^{ε_{k−1}}‖∞`, absent for the first entry.
    pub sup_diff: Option<f64>,
    pub geometry: GeometryReport,
    pub defect: InclusionDefect,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stability {
    pub name: &'static str,
    pub min: f64,
    pub max: f64,
    pub samples: usize,
}

impl Stability {
    pub fn ratio(&self) -> f64 {
        if self.min > 0.0 {
            self.max / self.min
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitReport {
    pub steps: Vec<EpsStep>,
    pub solutions: Vec<ScalarField>,
    /// The final solution.
    pub u0: ScalarField,
    /// Positivity level of `u₀`: the last ε.
    pub u0_level: f64,
    pub c1: f64,
    /// `max((−u₀)₊, (u₀ − sup φ)₊)`.
    pub bounds_violation: f64,
    /// `max |Δ∞u₀ − g|` on interior nodes with `u₀ > 2 u0_level`.
    pub limit_residual: f64,
    pub residual_tol: f64,
    /// Set when a solve failed; the report holds the entries before it.
    pub aborted: Option<String>,
}

impl LimitReport {
    pub fn eps(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.eps).collect()
    }

    pub fn sup_diffs(&self) -> Vec<f64> {
        self.steps.iter().filter_map(|s| s.sup_diff).collect()
    }

    pub fn lipschitz(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.geometry.lipschitz_const).collect()
    }

    /// Whether the sup-norm differences strictly decrease.
    pub fn diffs_decreasing(&self) -> bool {
        let d = self.sup_diffs();
        d.len() >= 2 && d.windows(2).all(|w| w[1] < w[0])
    }

    /// Each difference after `burn_in` is at most `ratio` times the
    /// previous one.
    pub fn cauchy_like(&self, ratio: f64, burn_in: usize) -> bool {
        let d = self.sup_diffs();
        d.len() > burn_in + 1 && d.windows(2).skip(burn_in).all(|w| w[1] <= ratio * w[0])
    }

    /// Whether both inclusion defects stay below `δ` on the last `tail`
    /// entries.
    pub fn defects_pass(&self, tail: usize) -> bool {
        let n = self.steps.len();
        n > 0 && self.steps[n.saturating_sub(tail)..].iter().all(|s| s.defect.pass())
    }

    /// Spread of each measurement across the schedule; vacuous entries are
    /// skipped.
    pub fn stability(&self) -> Vec<Stability> {
        let pick = |name: &'static str, f: &dyn Fn(&GeometryReport) -> Option<f64>| {
            let v: Vec<f64> = self.steps.iter().filter_map(|s| f(&s.geometry)).collect();
            Stability {
                name,
                min: v.iter().copied().fold(f64::INFINITY, f64::min),
                max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                samples: v.len(),
            }
        };
        vec![
            pick("lipschitz", &|g| Some(g.lipschitz_const)),
            pick("c_min", &|g| (!g.growth.vacuous).then_some(g.growth.c_min)),
            pick("C_max", &|g| (!g.growth.vacuous).then_some(g.growth.c_max)),
            pick("nondeg", &|g| (!g.nondeg.vacuous).then_some(g.nondeg.min_ratio)),
            pick("harnack", &|g| (!g.harnack.vacuous && !g.harnack.degenerate).then_some(g.harnack.ratio)),
            pick("density", &|g| (!g.density.vacuous).then_some(g.density.c0)),
            pick("porosity", &|g| (!g.porosity.vacuous).then_some(g.porosity.delta)),
        ]
    }

    /// Rows `eps, sup_diff, lipschitz, c_min, C_max, harnack, density,
    /// porosity, defect_a, defect_b`.
    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            "eps", "sup_diff", "lipschitz", "c_min", "C_max", "harnack", "density", "porosity", "defect_a",
            "defect_b",
        ]);
        for s in &self.steps {
            let g = &s.geometry;
            t.push(vec![
                s.eps.into(),
                s.sup_diff.unwrap_or(f64::NAN).into(),
                g.lipschitz_const.into(),
                g.growth.c_min.into(),
                g.growth.c_max.into(),
                g.harnack.ratio.into(),
                g.density.c0.into(),
                g.porosity.delta.into(),
                s.defect.defect_a.into(),
                s.defect.defect_b.into(),
            ]);
        }
        t
    }
}

/// Runs the schedule on `template`, whose right-hand side must be a
/// reaction; its ε is replaced by each `ε_k`.
pub fn run_continuation(
    template: &DirichletProblem,
    schedule: &EpsilonSchedule,
    cfg: &ContinuationConfig,
) -> Result<LimitReport> {
    let Rhs::Reaction(rt) = &template.rhs else {
        return Err(Error::Parameter("continuation needs a reaction right-hand side".into()));
    };
    let g = template.grid;
    schedule.check_resolvable(g.h())?;
    if !(cfg.c1 > 1.0) || !(cfg.delta_factor >= 1.0) {
        return Err(Error::Parameter(format!(
            "need C1 > 1 and delta_factor >= 1, got {} and {}",
            cfg.c1, cfg.delta_factor
        )));
    }
    let mut solutions: Vec<ScalarField> = Vec::new();
    let mut reports = Vec::new();
    let mut aborted = None;
    for eps in schedule.values() {
        let p = template.with_rhs(Rhs::Reaction(rt.with_eps(eps)));
        match solve_singular(&p, &cfg.solve, solutions.last()) {
            Ok((u, rep)) if rep.converged => {
                solutions.push(u);
                reports.push((eps, rep));
            }
            Ok((_, rep)) => {
                aborted = Some(format!(
                    "eps = {eps:e}: no convergence after {} iterations (residual {:e})",
                    rep.iterations, rep.final_residual
                ));
                break;
            }
            Err(e) => {
                aborted = Some(format!("eps = {eps:e}: {e}"));
                break;
            }
        }
    }
    let Some(u0) = solutions.last().cloned() else {
        return Err(Error::Parameter(format!(
            "continuation failed at the first eps: {}",
            aborted.unwrap_or_default()
        )));
    };
    let u0_level = reports.last().map(|r| r.0).unwrap_or(schedule.eps0);
    let sub = Subdomain::new(g, cfg.geometry.margin)?;
    let mut steps = Vec::with_capacity(solutions.len());
    for (k, (u, (eps, rep))) in solutions.iter().zip(reports).enumerate() {
        let geometry = measure(u, eps, &cfg.geometry)?;
        let defect = inclusion_defect(u, &u0, u0_level, eps, cfg.c1, cfg.delta_factor * eps, &sub)?;
        let sup_diff = (k > 0).then(|| u.sup_diff(&solutions[k - 1]));
        steps.push(EpsStep { eps, solve: rep, sup_diff, geometry, defect });
    }
    let sup_phi = template.boundary_sup();
    let final_rt = rt.with_eps(u0_level);
    let vals = u0.values();
    let limit_residual = (0..g.len())
        .filter(|&k| !g.is_boundary(k) && vals[k] > 2.0 * u0_level)
        .map(|k| (template.op.apply(vals, k) - final_rt.g.value(g.point(k))).abs())
        .fold(0.0, f64::max);
    Ok(LimitReport {
        bounds_violation: bounds_violation(&u0, sup_phi),
        residual_tol: steps.last().map(|s| s.solve.tol).unwrap_or(0.0),
        steps,
        solutions,
        u0,
        u0_level,
        c1: cfg.c1,
        limit_residual,
        aborted,
    })
}

/// The geometry of `u₀`, with `{u₀ > level}` as positivity set and the
/// fraction of nodes on the interface.
pub fn limit_geometry(u0: &ScalarField, level: f64, cfg: &GeometryConfig) -> Result<(GeometryReport, f64)> {
    let rep = measure(u0, level, cfg)?;
    let g = u0.grid();
    let v = u0.values();
    let interface = (0..g.len())
        .filter(|&k| v[k] > level && g.edge_neighbors(k).any(|m| v[m] <= level))
        .count();
    Ok((rep, interface as f64 / g.len() as f64))
}
