//! Small executable checks with exactly known answers, one per trivial
//! example of every module. `run` never panics; each failure is reported.

use crate::barrier::{growth_check, verify_supersolution, BarrierParams, ClosedForm};
use crate::continuation::{
    inclusion_defect, limit_geometry, run_continuation, ContinuationConfig, EpsilonSchedule,
};
use crate::error::Result;
use crate::geometry::{
    density, distance_to_points, growth_constants, harnack_ratio, lipschitz_constant, mean_boundary_value,
    minkowski_content, nondegeneracy, porosity, DistanceField, GeometryConfig, LevelDecomposition,
};
use crate::grid::{Grid, ScalarField, Subdomain};
use crate::one_dim::{directional_bound_check, fb_slope, first_integral_drift, predicted_slope, OneDProblem};
use crate::operator::StencilOperator;
use crate::reaction::{Bump, BumpKind, GProfile, ReactionTerm};
use crate::solver::{
    comparison_check, initial_guess, perron_bracket, solve, solve_singular, DirichletProblem, InitKind, Rhs,
    SolveOptions,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub module: &'static str,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    fn record(&mut self, module: &'static str, name: &'static str, outcome: Result<(bool, String)>) {
        let (pass, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        self.checks.push(Check { module, name, pass, detail });
    }
}

fn square(n: usize) -> Result<Grid> {
    Grid::new(2, &[-1.0, -1.0], &[1.0, 1.0], n)
}

fn bump6(eps: f64) -> Result<ReactionTerm> {
    ReactionTerm::new(eps, Bump::new(BumpKind::Bump6), GProfile::Constant(0.0))
}

fn problem(g: Grid, phi: impl Fn([f64; 2]) -> f64, rhs: Rhs) -> Result<DirichletProblem> {
    let op = StencilOperator::with_defaults(&g)?;
    DirichletProblem::new(ScalarField::from_fn(g, phi), rhs, op)
}

/// Runs every check.
pub fn run() -> Vec<Check> {
    let mut s = Suite { checks: Vec::new() };
    grid_checks(&mut s);
    reaction_checks(&mut s);
    operator_checks(&mut s);
    solver_checks(&mut s);
    barrier_checks(&mut s);
    geometry_checks(&mut s);
    continuation_checks(&mut s);
    one_dim_checks(&mut s);
    s.checks
}

fn grid_checks(s: &mut Suite) {
    s.record("grid", "1d spacing", (|| {
        let g = Grid::new(1, &[-1.0], &[1.0], 5)?;
        let b = g.boundary_nodes();
        let ok = g.h() == 0.5 && b.len() == 2 && g.point(b[0])[0] == -1.0 && g.point(b[1])[0] == 1.0;
        Ok((ok, format!("h = {}", g.h())))
    })());
    s.record("grid", "3x3 lattice", (|| {
        let g = Grid::new(2, &[0.0, 0.0], &[1.0, 1.0], 3)?;
        let (b, i) = (g.boundary_nodes().len(), g.interior_nodes().len());
        Ok((g.len() == 9 && b == 8 && i == 1, format!("{} nodes, {b} boundary, {i} interior", g.len())))
    })());
    s.record("grid", "unequal spacing rejected", Ok((Grid::new(2, &[0.0, 0.0], &[2.0, 1.0], 3).is_err(), String::new())));
    s.record("grid", "snapshot round trip", (|| {
        let g = square(9)?;
        let zero = ScalarField::constant(g, 0.0);
        let lin = ScalarField::from_fn(g, |x| 0.1 * x[0] + std::f64::consts::PI * x[1]);
        let ok = [zero, lin].iter().all(|f| {
            ScalarField::parse_snapshot(&f.to_snapshot_string()).map(|back| back == *f).unwrap_or(false)
        });
        Ok((ok, String::new()))
    })());
    s.record("grid", "wrong node count rejected", (|| {
        let g = square(5)?;
        let text = ScalarField::constant(g, 1.0).to_snapshot_string();
        let cut: String = text.lines().take(text.lines().count() - 1).map(|l| format!("{l}\n")).collect();
        Ok((ScalarField::parse_snapshot(&cut).is_err(), String::new()))
    })());
}

fn reaction_checks(s: &mut Suite) {
    s.record("reaction", "outside the support", (|| {
        let z = bump6(0.1)?.eval_zeta([0.0; 2], 0.2)?;
        Ok((z == 0.0, format!("{z}")))
    })());
    s.record("reaction", "zero bump leaves g", (|| {
        let rt = ReactionTerm::new(0.1, Bump::zero(), GProfile::Constant(0.3))?;
        let ok = [0.0, 0.05, 0.5, 3.0].iter().all(|&t| rt.eval_zeta([0.2, -0.4], t).map(|z| z == 0.3).unwrap_or(false));
        Ok((ok, String::new()))
    })());
    s.record("reaction", "zero envelope", Ok((ReactionTerm::zero(0.1).verify_envelope(&[[0.0; 2]], 64).pass, String::new())));
    s.record("reaction", "zero reaction is degenerate", (|| {
        let r = ReactionTerm::zero(0.1).verify_nondegeneracy(&[[0.0; 2]], 64)?;
        Ok((r.value == 0.0 && !r.pass, format!("{}", r.value)))
    })());
    s.record("reaction", "bump vanishes at the band ends", (|| {
        let mut rt = bump6(0.1)?;
        rt.band = (0.0, 1.0);
        let r = rt.verify_nondegeneracy(&[[0.0; 2]], 64)?;
        Ok((r.value == 0.0 && !r.pass, format!("{}", r.value)))
    })());
    s.record("reaction", "zero mass", Ok((ReactionTerm::zero(0.1).beta_integral() == 0.0, String::new())));
}

fn operator_checks(s: &mut Suite) {
    s.record("operator", "affine", (|| {
        let g = square(33)?;
        let op = StencilOperator::with_defaults(&g)?;
        let u = ScalarField::from_fn(g, |x| 0.25 * x[0] - 0.5 * x[1] + 0.125);
        let v = op.apply_field(&u)?;
        let e = v.values().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        Ok((e <= 1e-12, format!("{e:e}")))
    })());
    s.record("operator", "constant field", (|| {
        let g = square(17)?;
        let op = StencilOperator::with_defaults(&g)?;
        let v = op.apply_field(&ScalarField::constant(g, 2.5))?;
        Ok((v.values().iter().all(|&x| x == 0.0), String::new()))
    })());
    s.record("operator", "quadratic", (|| {
        let g = square(65)?;
        let op = StencilOperator::with_defaults(&g)?;
        let u = ScalarField::from_fn(g, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        let k = g.index(48, 48);
        let p = g.point(k);
        let e = (op.apply(u.values(), k) - (p[0] * p[0] + p[1] * p[1])).abs();
        Ok((e <= 0.05, format!("{e:e}")))
    })());
}

fn solver_checks(s: &mut Suite) {
    let opts = SolveOptions::default();
    s.record("solver", "affine data", (|| {
        let g = square(17)?;
        let aff = |x: [f64; 2]| 0.3 * x[0] - 0.2 * x[1] + 1.0;
        let p = problem(g, aff, Rhs::zero(g))?;
        let (u, rep) = solve(&p, &opts, &initial_guess(&p, InitKind::BoundaryExtend, &opts)?)?;
        let e = (0..g.len()).map(|k| (u.get(k) - aff(g.point(k))).abs()).fold(0.0, f64::max);
        Ok((rep.converged && e <= 1e-6, format!("{e:e}")))
    })());
    s.record("solver", "zero reaction is the harmonic solve", (|| {
        let g = square(17)?;
        let phi = |x: [f64; 2]| 1.0 + 0.5 * x[0] * x[1];
        let a = problem(g, phi, Rhs::Reaction(ReactionTerm::zero(0.1)))?;
        let b = problem(g, phi, Rhs::zero(g))?;
        let init = initial_guess(&b, InitKind::BoundaryExtend, &opts)?;
        let (ua, _) = solve(&a, &opts, &init)?;
        let (ub, _) = solve(&b, &opts, &init)?;
        Ok((ua == ub, String::new()))
    })());
    s.record("solver", "large eps keeps bounds", (|| {
        let g = Grid::new(1, &[0.0], &[1.0], 21)?;
        let p = problem(g, |x| 0.3 + 0.2 * x[0], Rhs::Reaction(bump6(1.0)?))?;
        let (_, rep) = solve_singular(&p, &SolveOptions { max_iter: 1_000_000, ..opts }, None)?;
        Ok((rep.converged && rep.bounds_violation <= rep.tol, format!("{:e}", rep.bounds_violation)))
    })());
    s.record("solver", "zero reaction closes the bracket", (|| {
        let g = square(17)?;
        let p = problem(g, |x| 1.0 + 0.2 * x[0], Rhs::Reaction(ReactionTerm::zero(0.1)))?;
        let (lo, hi) = perron_bracket(&p, &opts)?;
        Ok((lo.sup_diff(&hi) <= opts.tol_for(&p), String::new()))
    })());
    s.record("solver", "constant data", (|| {
        let g = square(17)?;
        let p = problem(g, |_| 0.7, Rhs::Reaction(bump6(0.1)?))?;
        let (_, hi) = perron_bracket(&p, &opts)?;
        Ok((hi.values().iter().all(|&v| v == 0.7), String::new()))
    })());
    s.record("solver", "comparison with equal data", (|| {
        let g = square(17)?;
        let p = problem(g, |x| 1.0 + 0.3 * x[1], Rhs::constant(g, 1.0))?;
        let (u, rep) = solve(&p, &opts, &initial_guess(&p, InitKind::BoundaryExtend, &opts)?)?;
        let v = comparison_check(&u, &u.clone());
        Ok((rep.converged && v <= 2.0 * rep.tol, format!("{v:e}")))
    })());
}

fn barrier_checks(s: &mut Suite) {
    s.record("barrier", "continuity at L + L0", (|| {
        let bp = BarrierParams::new(0.25, 0.75, 0.5, 2.0, 1.0, 0.01)?;
        let v = bp.value_radial(bp.l + bp.l0());
        Ok(((v - 0.75).abs() <= 1e-14, format!("{v}")))
    })());
    s.record("barrier", "inner region", (|| {
        let bp = BarrierParams::new(0.25, 0.75, 0.5, 2.0, 1.0, 0.01)?;
        Ok((bp.closed_form_radial(0.5) == ClosedForm::Value(0.0), String::new()))
    })());
    s.record("barrier", "outer region", (|| {
        let bp = BarrierParams::new(0.25, 0.75, 0.5, 2.0, 1.0, 0.01)?;
        let radii: Vec<f64> = (0..32).map(|k| bp.l + bp.l0() + 0.1 + 0.2 * k as f64).collect();
        let rep = verify_supersolution(&bp, &ReactionTerm::zero(0.1), &radii, None);
        Ok((rep.samples.iter().all(|x| x.ok), String::new()))
    })());
    s.record("barrier", "monotone", (|| {
        let bp = BarrierParams::new(0.1, 0.9, 2.0, 3.0, 1.0, 0.01)?;
        Ok((growth_check(&bp).monotone, String::new()))
    })());
    s.record("barrier", "kappa0 above the effective value", (|| {
        let bp = BarrierParams::new(0.25, 0.75, 0.5, 2.0, 1.0, 0.01)?;
        let eff = growth_check(&bp).kappa0_effective;
        let bp = BarrierParams { kappa0: 2.0 * eff, ..bp };
        Ok((!growth_check(&bp).pass, format!("{eff}")))
    })());
}

fn geometry_checks(s: &mut Suite) {
    s.record("geometry", "affine lipschitz", (|| {
        let g = square(33)?;
        let sub = Subdomain::new(g, 0.2)?;
        let u = ScalarField::from_fn(g, |x| 0.3 * x[0] - 0.4 * x[1]);
        let l = lipschitz_constant(&u, &sub)?;
        Ok(((l - 0.5).abs() <= 1e-12, format!("{l}")))
    })());
    s.record("geometry", "constant lipschitz", (|| {
        let g = square(17)?;
        let l = lipschitz_constant(&ScalarField::constant(g, 3.0), &Subdomain::new(g, 0.25)?)?;
        Ok((l == 0.0, String::new()))
    })());
    s.record("geometry", "cone growth", (|| {
        let g = square(33)?;
        let u = ScalarField::from_fn(g, |x| x[0].hypot(x[1]));
        let levels = LevelDecomposition::new(&u, 1e-12);
        let d = DistanceField::new(&g, &levels);
        let r = growth_constants(&u, &d, 1e-12, &Subdomain::new(g, 0.1)?);
        Ok(((r.c_min - 1.0).abs() < 1e-9 && (r.c_max - 1.0).abs() < 1e-9, format!("{} {}", r.c_min, r.c_max)))
    })());
    s.record("geometry", "twice the distance", (|| {
        let g = square(33)?;
        let u = ScalarField::from_fn(g, |x| 2.0 * x[0].max(0.0));
        let levels = LevelDecomposition::new(&u, 1e-9);
        let d = DistanceField::new(&g, &levels);
        let r = growth_constants(&u, &d, 1e-9, &Subdomain::new(g, 0.1)?);
        Ok(((r.c_min - 2.0).abs() < 1e-6 && (r.c_max - 2.0).abs() < 1e-6, format!("{} {}", r.c_min, r.c_max)))
    })());
    s.record("geometry", "cone non-degeneracy", (|| {
        let g = square(33)?;
        let u = ScalarField::from_fn(g, |x| x[0].hypot(x[1]));
        let levels = LevelDecomposition::new(&u, 1e-12);
        let d = DistanceField::new(&g, &levels);
        let r = nondegeneracy(&u, &levels, &d, &Subdomain::new(g, 0.1)?, &[0.25, 0.5], 16, 0);
        Ok((!r.vacuous && r.min_ratio >= 1.0, format!("{}", r.min_ratio)))
    })());
    s.record("geometry", "no positivity set", (|| {
        let g = square(17)?;
        let u = ScalarField::constant(g, 0.05);
        let levels = LevelDecomposition::new(&u, 0.1);
        let d = DistanceField::new(&g, &levels);
        let sub = Subdomain::new(g, 0.1)?;
        let ok = nondegeneracy(&u, &levels, &d, &sub, &[0.2], 4, 0).vacuous
            && growth_constants(&u, &d, 0.1, &sub).vacuous
            && harnack_ratio(&u, &d, 0.1, &sub, 4, 0).vacuous;
        Ok((ok, String::new()))
    })());
    s.record("geometry", "affine harnack", (|| {
        let g = square(33)?;
        let u = ScalarField::from_fn(g, |x| (x[0] + 0.5).max(0.0));
        let levels = LevelDecomposition::new(&u, 1e-9);
        let d = DistanceField::new(&g, &levels);
        let r = harnack_ratio(&u, &d, 1e-9, &Subdomain::new(g, 0.1)?, 10_000, 0);
        Ok((!r.degenerate && r.ratio >= 1.0 && r.ratio <= 3.0 + 1e-9, format!("{}", r.ratio)))
    })());
    s.record("geometry", "full density", (|| {
        let g = square(33)?;
        let v = density(&ScalarField::constant(g, 1.0), 0.1, [0.0; 2], 0.5)?;
        Ok((v == 1.0, String::new()))
    })());
    s.record("geometry", "half-space density", (|| {
        let g = square(65)?;
        let v = density(&ScalarField::from_fn(g, |x| x[0]), 1e-12, [0.0; 2], 0.5)?;
        Ok(((v - 0.5).abs() <= 2.0 * g.h() / 0.5, format!("{v}")))
    })());
    s.record("geometry", "line porosity", (|| {
        let g = square(65)?;
        let h = g.h();
        let line: Vec<[f64; 2]> = (0..=1024).map(|k| [0.0, -1.0 + k as f64 / 512.0]).collect();
        let d = distance_to_points(&g, &line);
        let centers: Vec<[f64; 2]> = line.iter().copied().filter(|p| p[1].abs() < 0.4).collect();
        let r = porosity(&g, &centers, &d, 32.0 * h, &[8.0 * h, 16.0 * h], 16, 0)?;
        Ok(((r.delta - 0.5).abs() <= 2.0 * h / (8.0 * h), format!("{}", r.delta)))
    })());
    s.record("geometry", "point porosity", (|| {
        let g = square(65)?;
        let h = g.h();
        let d = distance_to_points(&g, &[[0.0, 0.0]]);
        let r = porosity(&g, &[[0.0, 0.0]], &d, 32.0 * h, &[8.0 * h, 16.0 * h], 4, 0)?;
        Ok(((r.delta - 0.5).abs() <= 2.0 * h / (8.0 * h), format!("{}", r.delta)))
    })());
    s.record("geometry", "segment content", (|| {
        let g = square(129)?;
        let h = g.h();
        let line: Vec<[f64; 2]> = (0..=2048).map(|k| [-1.0 + k as f64 / 1024.0, 0.0]).collect();
        let d = distance_to_points(&g, &line);
        let (ratios, _) = minkowski_content(&g, &d, &[4.0 * h, 8.0 * h], [0.0; 2], 0.8)?;
        let ok = ratios.iter().all(|&(delta, r)| (r / 1.6 - 1.0).abs() <= h / delta);
        Ok((ok, format!("{ratios:?}")))
    })());
    s.record("geometry", "empty interface content", (|| {
        let g = square(33)?;
        let d = distance_to_points(&g, &[]);
        let (ratios, _) = minkowski_content(&g, &d, &[4.0 * g.h()], [0.0; 2], 0.5)?;
        Ok((ratios[0].1 == 0.0, String::new()))
    })());
    s.record("geometry", "cone sphere mean", (|| {
        let g = square(65)?;
        let u = ScalarField::from_fn(g, |x| x[0].hypot(x[1]));
        let m = mean_boundary_value(&u, [0.0; 2], 0.5)?;
        Ok(((m - 0.5).abs() <= g.h() * g.h() / 4.0, format!("{m}")))
    })());
    s.record("geometry", "zero sphere mean", (|| {
        let g = square(17)?;
        Ok((mean_boundary_value(&ScalarField::constant(g, 0.0), [0.0; 2], 0.5)? == 0.0, String::new()))
    })());
}

fn continuation_checks(s: &mut Suite) {
    s.record("continuation", "zero reaction", (|| {
        let g = square(33)?;
        let p = problem(g, |x| 1.0 + 0.2 * x[0], Rhs::Reaction(ReactionTerm::zero(0.1)))?;
        let cfg = ContinuationConfig {
            geometry: GeometryConfig { margin: 0.25, ..Default::default() },
            ..Default::default()
        };
        let rep = run_continuation(&p, &EpsilonSchedule::new(0.5, 0.5, 3)?, &cfg)?;
        Ok((rep.sup_diffs().iter().all(|&d| d == 0.0), format!("{:?}", rep.sup_diffs())))
    })());
    s.record("continuation", "unresolvable schedule", (|| {
        let g = square(17)?;
        let p = problem(g, |_| 1.0, Rhs::Reaction(ReactionTerm::zero(0.1)))?;
        let sched = EpsilonSchedule::new(0.2, 0.5, 3)?;
        Ok((run_continuation(&p, &sched, &ContinuationConfig::default()).is_err(), String::new()))
    })());
    s.record("continuation", "identical fields", (|| {
        let g = square(33)?;
        let u = ScalarField::from_fn(g, |x| (x[0].hypot(x[1]) - 0.5).max(0.0));
        let d = inclusion_defect(&u, &u, 0.0, 1e-12, 2.0, 1e-3, &Subdomain::new(g, 0.1)?)?;
        Ok((d.defect_a == 0.0 && d.defect_b == 0.0, String::new()))
    })());
    s.record("continuation", "shifted ring", (|| {
        let g = square(65)?;
        let u0 = ScalarField::from_fn(g, |x| (x[0].hypot(x[1]) - 0.5).max(0.0));
        let ue = ScalarField::from_fn(g, |x| (x[0].hypot(x[1]) - 0.6).max(0.0));
        let d = inclusion_defect(&ue, &u0, 0.0, 1e-12, 2.0, 0.2, &Subdomain::new(g, 0.1)?)?;
        Ok(((d.defect_a - 0.1).abs() <= g.h(), format!("{}", d.defect_a)))
    })());
    s.record("continuation", "cone limit", (|| {
        let g = square(65)?;
        let u = ScalarField::from_fn(g, |x| x[0].hypot(x[1]));
        let (r, _) = limit_geometry(&u, 1e-12, &GeometryConfig::default())?;
        let ok = (r.growth.c_min - 1.0).abs() <= g.h() && (r.growth.c_max - 1.0).abs() <= g.h();
        Ok((ok, String::new()))
    })());
    s.record("continuation", "zero limit", (|| {
        let g = square(65)?;
        let (r, _) = limit_geometry(&ScalarField::constant(g, 0.0), 0.0, &GeometryConfig::default())?;
        Ok((r.growth.vacuous && r.nondeg.vacuous, String::new()))
    })());
}

fn one_dim_checks(s: &mut Suite) {
    s.record("one_dim", "straight line", (|| {
        let tr = OneDProblem::new(ReactionTerm::zero(0.01), 0.0, 1.0)?.integrate()?;
        let e = [-0.5, 0.0, 0.5].iter().map(|&x| (tr.value_at(x) - 0.5 * (x + 1.0)).abs()).fold(0.0, f64::max);
        Ok((e <= 1e-9, format!("{e:e}")))
    })());
    s.record("one_dim", "affine drift", (|| {
        let tr = OneDProblem::new(ReactionTerm::zero(0.01), 0.0, 1.0)?.integrate()?;
        let d = first_integral_drift(&tr);
        Ok((d <= 1e-12, format!("{d:e}")))
    })());
    s.record("one_dim", "raw slope without a law", (|| {
        let tr = OneDProblem::new(ReactionTerm::zero(0.01), 0.0, 1.0)?.integrate()?;
        let slopes = fb_slope(&tr, 0.02).unwrap_or_default();
        let ok = slopes.len() == 1 && (slopes[0] - 0.5).abs() <= 1e-9;
        Ok((ok, format!("{slopes:?}")))
    })());
    s.record("one_dim", "zero mass", Ok((predicted_slope(&ReactionTerm::zero(0.1)) == 0.0, String::new())));
    s.record("one_dim", "cylinder embedding", (|| {
        let rt = bump6(0.02)?;
        let tr = OneDProblem::new(rt, 0.5, 0.5)?.integrate()?;
        let g = square(65)?;
        let u = ScalarField::from_fn(g, |x| tr.value_at(x[0]));
        let a = directional_bound_check(&u, 0, &rt, 2.0 * rt.eps)?;
        let b = directional_bound_check(&u, 1, &rt, 2.0 * rt.eps)?;
        Ok((a.pass && b.pass && b.max_measured <= 1e-12, format!("{} {}", a.max_measured, b.max_measured)))
    })());
}
