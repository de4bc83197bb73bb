//! Subcommand pipelines. Each writes its artifacts into the output
//! directory and returns the failed assertions.

use std::fs;
use std::path::{Path, PathBuf};

use inflap_core::barrier::{discrete_mismatch, growth_check, verify_supersolution, BarrierParams};
use inflap_core::continuation::run_continuation;
use inflap_core::csv::{fmt_num, Table};
use inflap_core::geometry::measure;
use inflap_core::one_dim::{fb_slope, first_integral_drift, predicted_slope, OneDProblem};
use inflap_core::solver::{initial_guess, solve_singular, DirichletProblem, Rhs};
use inflap_core::{selftest, ScalarField, StencilOperator};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    /// `(assertion, detail)` for every failed check.
    pub failures: Vec<(String, String)>,
    pub artifacts: Vec<PathBuf>,
    /// Lines for standard output.
    pub summary: Vec<String>,
}

impl Outcome {
    fn require(&mut self, name: &str, ok: bool, detail: String) {
        if !ok {
            self.failures.push((name.to_string(), detail));
        }
    }

    fn write(&mut self, dir: &Path, name: &str, table: &Table) -> inflap_core::Result<()> {
        let path = dir.join(name);
        table.write(&path)?;
        self.artifacts.push(path);
        Ok(())
    }

    pub fn failure_table(&self) -> String {
        let mut s = String::from("assertion,detail\n");
        for (name, detail) in &self.failures {
            s.push_str(&format!("{name},{detail}\n"));
        }
        s
    }
}

pub fn problem(cfg: &ExperimentConfig) -> inflap_core::Result<DirichletProblem> {
    let op = StencilOperator::new(&cfg.grid, cfg.operator)?;
    let boundary = ScalarField::from_fn(cfg.grid, |x| cfg.boundary.eval(x));
    DirichletProblem::new(boundary, Rhs::Reaction(cfg.reaction), op)
}

pub fn solve(cfg: &ExperimentConfig, dir: &Path) -> inflap_core::Result<Outcome> {
    let mut out = Outcome::default();
    let p = problem(cfg)?;
    let init = initial_guess(&p, cfg.init, &cfg.solve)?;
    let (u, rep) = solve_singular(&p, &cfg.solve, Some(&init))?;
    let path = dir.join("solution.field");
    u.save_snapshot(&path)?;
    out.artifacts.push(path);
    let mut hist = Table::new(&["iter", "residual", "tau_max"]);
    for e in &rep.history {
        hist.push(vec![e.iter.into(), e.residual.into(), e.tau_max.into()]);
    }
    out.write(dir, "residual.csv", &hist)?;
    let bracket = rep.bracket_violation.unwrap_or(0.0);
    out.summary.push(format!(
        "iterations={} residual={} tol={} converged={} bracket_violation={} bounds_violation={}",
        rep.iterations,
        fmt_num(rep.final_residual),
        fmt_num(rep.tol),
        rep.converged,
        fmt_num(bracket),
        fmt_num(rep.bounds_violation)
    ));
    out.require("converged", rep.converged, format!("residual {:e} after {} iterations", rep.final_residual, rep.iterations));
    out.require("perron_bracket", bracket <= rep.tol, format!("violation {bracket:e}"));
    // `0 <= u <= sup φ` only holds when the reaction has a layer and the
    // data are nonnegative.
    if !cfg.reaction.beta.is_zero() && p.grid.boundary_nodes().iter().all(|&k| p.boundary.get(k) >= 0.0) {
        out.require("bounds", rep.bounds_violation <= rep.tol, format!("violation {:e}", rep.bounds_violation));
    }
    Ok(out)
}

pub fn continuation(cfg: &ExperimentConfig, dir: &Path) -> inflap_core::Result<Outcome> {
    let mut out = Outcome::default();
    let p = problem(cfg)?;
    let rep = run_continuation(&p, &cfg.schedule, &cfg.continuation)?;
    out.write(dir, "continuation.csv", &rep.table())?;
    let mut stab = Table::new(&["measurement", "min", "max", "ratio", "samples"]);
    for s in rep.stability() {
        stab.push(vec![s.name.into(), s.min.into(), s.max.into(), s.ratio().into(), s.samples.into()]);
    }
    out.write(dir, "stability.csv", &stab)?;
    let cc = &cfg.continuation;
    out.summary.push(format!(
        "steps={} diffs_decreasing={} cauchy_like={} defects_pass={} limit_residual={} bounds_violation={}",
        rep.steps.len(),
        rep.diffs_decreasing(),
        rep.cauchy_like(cc.cauchy_ratio, cc.burn_in),
        rep.defects_pass(cc.tail),
        fmt_num(rep.limit_residual),
        fmt_num(rep.bounds_violation)
    ));
    out.require("schedule_complete", rep.aborted.is_none(), rep.aborted.clone().unwrap_or_default());
    out.require("bounds", rep.bounds_violation <= rep.residual_tol, format!("violation {:e}", rep.bounds_violation));
    for s in rep.stability() {
        out.require(
            &format!("stable_{}", s.name),
            s.samples == 0 || s.ratio() <= cc.stability_factor,
            format!("ratio {} over {} values", s.ratio(), s.samples),
        );
    }
    out.require("defects", rep.defects_pass(cc.tail), format!("tail {}", cc.tail));
    out.require("diffs_decreasing", rep.diffs_decreasing(), format!("{:?}", rep.sup_diffs()));
    Ok(out)
}

pub fn geometry(cfg: &ExperimentConfig, dir: &Path, snapshot: &Path) -> inflap_core::Result<Outcome> {
    let mut out = Outcome::default();
    let u = ScalarField::load_snapshot(snapshot)?;
    let rep = measure(&u, cfg.geometry_eps, &cfg.continuation.geometry)?;
    let mut t = Table::new(&["measurement", "value", "samples"]);
    for (name, v, n) in rep.rows() {
        t.push(vec![name.into(), v.into(), n.into()]);
    }
    out.write(dir, "geometry.csv", &t)?;
    out.summary.push(format!("eps={} interface_points={}", fmt_num(rep.eps), rep.interface_points));
    Ok(out)
}

pub fn barrier_check(cfg: &ExperimentConfig, dir: &Path) -> inflap_core::Result<Outcome> {
    let mut out = Outcome::default();
    let b = &cfg.barrier;
    let bp = BarrierParams::new(b.a, b.b, b.a0, b.alpha, b.l, b.kappa0)?;
    let op = StencilOperator::new(&cfg.grid, cfg.operator)?;
    let field = bp.sample(cfg.grid);
    let top = (cfg.grid.hi()[0]).max(0.0);
    let radii: Vec<f64> = (1..=b.radii).map(|k| top * k as f64 / b.radii as f64).collect();
    let rep = verify_supersolution(&bp, &cfg.reaction, &radii, Some((&op, &field)));
    let mut t = Table::new(&["radius", "theta", "closed_form", "discrete", "zeta", "ok"]);
    for s in &rep.samples {
        t.push(vec![
            s.radius.into(),
            s.theta.into(),
            s.closed_form.into(),
            s.discrete.unwrap_or(f64::NAN).into(),
            s.zeta.into(),
            s.ok.into(),
        ]);
    }
    out.write(dir, "barrier.csv", &t)?;
    let growth = growth_check(&bp);
    let mismatch = discrete_mismatch(&bp, &op, 2.0 * op.width() as f64 * cfg.grid.h());
    out.summary.push(format!(
        "smallness_lhs={} inf_zeta={} worst_margin={} kappa0_effective={} monotone={} discrete_mismatch={}",
        fmt_num(rep.smallness_lhs),
        fmt_num(rep.inf_zeta),
        fmt_num(rep.worst_margin),
        fmt_num(growth.kappa0_effective),
        growth.monotone,
        fmt_num(mismatch.max_error)
    ));
    out.require("supersolution", rep.pass, format!("worst margin {:e} at radius {}", rep.worst_margin, rep.worst_radius));
    out.require("growth", growth.pass, format!("kappa0_effective {} vs {}", growth.kappa0_effective, bp.kappa0));
    Ok(out)
}

pub fn oned(cfg: &ExperimentConfig, dir: &Path) -> inflap_core::Result<Outcome> {
    let mut out = Outcome::default();
    let rt = cfg.reaction;
    let tr = OneDProblem::new(rt, cfg.oned.left, cfg.oned.right)?.with_step(cfg.oned.step)?.integrate()?;
    let mut t = Table::new(&["x", "u", "du", "first_integral"]);
    for (s, fi) in tr.samples.iter().zip(&tr.first_integral) {
        t.push(vec![s.x.into(), s.u.into(), s.du.into(), (*fi).into()]);
    }
    out.write(dir, "trajectory.csv", &t)?;
    let predicted = predicted_slope(&rt);
    let measured = fb_slope(&tr, 2.0 * rt.eps).and_then(|s| s.into_iter().reduce(f64::max)).unwrap_or(f64::NAN);
    let rel_err = (measured - predicted).abs() / predicted;
    let mass = rt.beta_integral();
    let mut s = Table::new(&["eps", "M", "predicted", "measured", "rel_err"]);
    s.push(vec![rt.eps.into(), mass.into(), predicted.into(), measured.into(), rel_err.into()]);
    out.write(dir, "oned_summary.csv", &s)?;
    out.summary.push(format!(
        "eps={} M={} predicted={} measured={} rel_err={}",
        fmt_num(rt.eps),
        fmt_num(mass),
        fmt_num(predicted),
        fmt_num(measured),
        fmt_num(rel_err)
    ));
    out.require("boundary_mismatch", tr.boundary_mismatch <= 1e-8, format!("{:e}", tr.boundary_mismatch));
    out.require("first_integral_drift", first_integral_drift(&tr) <= 1e-6, format!("{:e}", first_integral_drift(&tr)));
    Ok(out)
}

pub fn selftest(dir: &Path) -> inflap_core::Result<Outcome> {
    let mut out = Outcome::default();
    let checks = selftest::run();
    let mut t = Table::new(&["module", "check", "pass", "detail"]);
    for c in &checks {
        t.push(vec![c.module.into(), c.name.into(), c.pass.into(), c.detail.replace(',', ";").into()]);
        out.require(&format!("{}/{}", c.module, c.name), c.pass, c.detail.clone());
    }
    out.write(dir, "selftest.csv", &t)?;
    let passed = checks.iter().filter(|c| c.pass).count();
    out.summary.push(format!("{passed}/{} checks passed", checks.len()));
    Ok(out)
}

pub fn ensure_dir(dir: &Path) -> inflap_core::Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}
