use inflap_core::solver::{
    bracket_violation, comparison_check, initial_guess, perron_bracket, residual, solve, solve_singular,
    DirichletProblem, InitKind, Rhs, SolveOptions,
};
use inflap_core::{Bump, BumpKind, GProfile, Grid, ReactionTerm, ScalarField, StencilOperator};
use std::time::Instant;

fn square(lo: f64, hi: f64, n: usize) -> Grid {
    Grid::new(2, &[lo, lo], &[hi, hi], n).unwrap()
}

fn problem(g: Grid, phi: impl Fn([f64; 2]) -> f64, rhs: Rhs) -> DirichletProblem {
    let op = StencilOperator::with_defaults(&g).unwrap();
    DirichletProblem::new(ScalarField::from_fn(g, phi), rhs, op).unwrap()
}

fn max_err(u: &ScalarField, exact: impl Fn([f64; 2]) -> f64) -> f64 {
    let g = u.grid();
    g.interior_nodes().into_iter().map(|k| (u.get(k) - exact(g.point(k))).abs()).fold(0.0, f64::max)
}

#[test]
fn affine_data_is_reproduced() {
    let g = square(0.0, 1.0, 33);
    let aff = |p: [f64; 2]| 0.3 * p[0] - 0.6 * p[1] + 1.0;
    let p = problem(g, aff, Rhs::zero(g));
    let init = initial_guess(&p, InitKind::BoundaryExtend, &SolveOptions::default()).unwrap();
    let (u, rep) = solve(&p, &SolveOptions::default(), &init).unwrap();
    assert!(rep.converged, "{rep:?}");
    assert!(max_err(&u, aff) < 1e-6, "{}", max_err(&u, aff));
}

#[test]
fn radial_inhomogeneous_solve() {
    let t = Instant::now();
    let g = square(1.0, 2.0, 65);
    let exact = |p: [f64; 2]| (p[0] * p[0] + p[1] * p[1]).powf(2.0 / 3.0);
    let p = problem(g, exact, Rhs::constant(g, 64.0 / 81.0));
    let opts = SolveOptions::default();
    let init = initial_guess(&p, InitKind::BoundaryExtend, &opts).unwrap();
    let (u, rep) = solve(&p, &opts, &init).unwrap();
    let e = max_err(&u, exact);
    println!("radial: iters {} res {:.3e} err {e:.4e} in {:?}", rep.iterations, rep.final_residual, t.elapsed());
    assert!(rep.converged);
    assert!(e <= 5e-2);
}

#[test]
fn aronsson_solve() {
    let t = Instant::now();
    let exact = |p: [f64; 2]| p[0].powf(4.0 / 3.0) - p[1].powf(4.0 / 3.0);
    let mut errs = Vec::new();
    for n in [17, 33, 65] {
        let g = square(1.0, 2.0, n);
        let p = problem(g, exact, Rhs::zero(g));
        let opts = SolveOptions::default();
        let init = initial_guess(&p, InitKind::BoundaryExtend, &opts).unwrap();
        let (u, rep) = solve(&p, &opts, &init).unwrap();
        assert!(rep.converged);
        errs.push(max_err(&u, exact));
        println!("aronsson n={n}: iters {} err {:.4e} {:?}", rep.iterations, errs.last().unwrap(), t.elapsed());
    }
    assert!(errs[2] <= 5e-2);
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}


fn bump6(eps: f64) -> ReactionTerm {
    ReactionTerm::new(eps, Bump::new(BumpKind::Bump6), GProfile::Constant(0.0)).unwrap()
}

fn solved(p: &DirichletProblem) -> ScalarField {
    let opts = SolveOptions::default();
    let init = initial_guess(p, InitKind::BoundaryExtend, &opts).unwrap();
    let (u, rep) = solve(p, &opts, &init).unwrap();
    assert!(rep.converged, "{rep:?}");
    u
}

#[test]
fn comparison_in_the_right_hand_side() {
    let g = square(0.0, 1.0, 33);
    let phi = |p: [f64; 2]| 1.0 + 0.5 * p[0] * p[1];
    let tol = SolveOptions::default().tol_for(&problem(g, phi, Rhs::zero(g)));
    let sols: Vec<ScalarField> = [2.0, 1.0, 0.0].iter().map(|&c| solved(&problem(g, phi, Rhs::constant(g, c)))).collect();
    assert!(comparison_check(&sols[0], &sols[1]) <= 2.0 * tol);
    assert!(comparison_check(&sols[1], &sols[2]) <= 2.0 * tol);
    assert!(comparison_check(&sols[1], &sols[1]) <= 2.0 * tol);
    // The larger right-hand side gives the strictly smaller solution.
    assert!(comparison_check(&sols[2], &sols[0]) > 0.01);
}

#[test]
fn constant_data_is_a_fixed_point() {
    let g = square(0.0, 1.0, 33);
    let p = problem(g, |_| 0.7, Rhs::Reaction(bump6(0.05)));
    let (_, upper) = perron_bracket(&p, &SolveOptions::default()).unwrap();
    assert!(upper.values().iter().all(|&v| v == 0.7));
}

#[test]
fn bracket_is_strict_in_one_dimension() {
    let g = Grid::new(1, &[-1.0], &[1.0], 101).unwrap();
    let p = problem(g, |_| 0.5, Rhs::Reaction(bump6(0.05)));
    let opts = SolveOptions { max_iter: 1_000_000, ..Default::default() };
    let (lower, upper) = perron_bracket(&p, &opts).unwrap();
    for k in g.interior_nodes() {
        assert!(lower.get(k) < upper.get(k), "node {k}");
    }
    let (u, rep) = solve_singular(&p, &opts, None).unwrap();
    assert!(rep.converged);
    let tol = rep.tol;
    assert!(rep.bracket_violation.unwrap() <= tol);
    assert!(rep.bounds_violation <= tol);
    assert!(bracket_violation(&u, &lower, &upper) <= tol);
}

#[test]
fn zero_reaction_matches_the_harmonic_solve() {
    let g = square(0.0, 1.0, 33);
    let phi = |p: [f64; 2]| 0.2 + p[0] * p[0];
    let rt = ReactionTerm::zero(0.05);
    let p = problem(g, phi, Rhs::Reaction(rt));
    let opts = SolveOptions::default();
    let init = initial_guess(&p, InitKind::BoundaryExtend, &opts).unwrap();
    let (a, _) = solve(&p, &opts, &init).unwrap();
    let (b, _) = solve(&p.harmonic(), &opts, &init).unwrap();
    assert_eq!(a.values(), b.values());
    let (lower, upper) = perron_bracket(&p, &opts).unwrap();
    assert!(lower.sup_diff(&upper) <= opts.tol_for(&p));
}

#[test]
fn singular_solution_in_two_dimensions() {
    let g = square(-1.0, 1.0, 33);
    let p = problem(g, |x| 0.8 + 0.2 * x[0], Rhs::Reaction(bump6(0.0625)));
    let opts = SolveOptions::default();
    let (u, rep) = solve_singular(&p, &opts, None).unwrap();
    assert!(rep.converged);
    assert!(rep.bracket_violation.unwrap() <= rep.tol);
    assert!(rep.bounds_violation <= rep.tol);
    assert!(residual(&p, &u) <= rep.tol);
    // A dead core forms in the middle.
    assert!(u.get(g.index(16, 16)) < 0.0625);
}

#[test]
fn large_eps_keeps_bounds() {
    let g = Grid::new(1, &[0.0], &[1.0], 41).unwrap();
    let p = problem(g, |x| 0.3 + 0.2 * x[0], Rhs::Reaction(bump6(1.0)));
    let opts = SolveOptions { max_iter: 1_000_000, ..Default::default() };
    let (_, rep) = solve_singular(&p, &opts, None).unwrap();
    assert!(rep.converged);
    assert!(rep.bounds_violation <= rep.tol);
}

#[test]
fn residual_decreases_after_burn_in() {
    let g = square(1.0, 2.0, 33);
    let exact = |p: [f64; 2]| p[0].powf(4.0 / 3.0) - p[1].powf(4.0 / 3.0);
    let p = problem(g, exact, Rhs::zero(g));
    let opts = SolveOptions::default();
    let init = initial_guess(&p, InitKind::BoundaryExtend, &opts).unwrap();
    let (_, rep) = solve(&p, &opts, &init).unwrap();
    assert!(rep.residual_monotone_after(rep.iterations / 4), "{:?}", rep.history.iter().map(|e| e.residual).collect::<Vec<_>>());
}

#[test]
fn solves_are_deterministic() {
    let g = square(-1.0, 1.0, 65);
    let p = problem(g, |x| 0.8 + 0.2 * x[0], Rhs::Reaction(bump6(0.125)));
    let opts = SolveOptions::default();
    let (a, _) = solve_singular(&p, &opts, None).unwrap();
    let (b, _) = solve_singular(&p, &opts, None).unwrap();
    assert_eq!(a.values(), b.values());
}
