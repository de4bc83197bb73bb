//! Damped pseudo-time relaxation for `Δ∞u = f(x, u)` in Ω, `u = φ` on ∂Ω,
//! with the Perron bracket and a comparison-principle harness.
//!
//! One Jacobi sweep is
//!
//! ```text
//!     u ← u + τ_eff(x) [s² q − f(x, u)],
//!     τ(x) = γ r² / (max(s², σ²) + r² + s |q| r² Σ_y |∂s/∂u(y)|),
//!     τ_eff = τ / (1 + τ Λ(x)),
//! ```
//!
//! where `s`, `q`, `r` come from the stencil at `x`, the last term in the
//! denominator accounts for the dependence of the slope on the iterate,
//! `σ = (|f| D)^{1/3}` (`D` the diameter of Ω) is the slope a profile with
//! curvature `f/s²` builds across Ω and keeps flat regions with `f ≠ 0`
//! from running ahead of the rest of the grid, and `Λ(x)` bounds the growth
//! of `t ↦ ζ_ε(x, t)` near the layer `{0 < t < ε}` (zero for a fixed
//! right-hand side).
//!
//! The Perron bracket is solved on a hierarchy of coarser grids first.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::operator::StencilOperator;
use crate::reaction::ReactionTerm;

pub const DEFAULT_GAMMA: f64 = 0.4;
pub const DEFAULT_MAX_ITER: usize = 200_000;

/// Below this many nodes a sweep runs on the calling thread.
const PAR_THRESHOLD: usize = 4096;

#[derive(Debug, Clone)]
pub enum Rhs {
    Fixed(ScalarField),
    Reaction(ReactionTerm),
}

impl Rhs {
    pub fn zero(grid: Grid) -> Rhs {
        Rhs::Fixed(ScalarField::constant(grid, 0.0))
    }

    pub fn constant(grid: Grid, c: f64) -> Rhs {
        Rhs::Fixed(ScalarField::constant(grid, c))
    }
}

#[derive(Debug, Clone)]
pub struct DirichletProblem {
    pub grid: Grid,
    /// Boundary data; only boundary nodes are read.
    pub boundary: ScalarField,
    pub rhs: Rhs,
    pub op: StencilOperator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    /// The ∞-harmonic extension `ū` of the boundary data.
    Super,
    /// The bracket's lower end `u̲` (raised to `max(u̲, 0)` when zero is a
    /// subsolution of the singular problem).
    Sub,
    /// Each node takes the value of its nearest boundary node.
    BoundaryExtend,
    /// Zero in the interior.
    Zero,
}

impl InitKind {
    pub fn parse(s: &str) -> Option<InitKind> {
        match s {
            "super" => Some(InitKind::Super),
            "sub" => Some(InitKind::Sub),
            "boundary-extend" => Some(InitKind::BoundaryExtend),
            "zero" => Some(InitKind::Zero),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Residual tolerance; `None` means `1e-8 (1 + sup |φ|)`.
    pub tol: Option<f64>,
    pub max_iter: usize,
    pub gamma: f64,
    /// Record every `history_stride`-th iteration.
    pub history_stride: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: None, max_iter: DEFAULT_MAX_ITER, gamma: DEFAULT_GAMMA, history_stride: 1 }
    }
}

impl SolveOptions {
    pub fn tol_for(&self, p: &DirichletProblem) -> f64 {
        self.tol.unwrap_or_else(|| 1e-8 * (1.0 + boundary_abs_sup(p)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub iter: usize,
    pub residual: f64,
    pub tau_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub tol: f64,
    pub converged: bool,
    pub history: Vec<HistoryEntry>,
    /// `max((u̲ − u)₊, (u − ū)₊)` when a bracket was computed.
    pub bracket_violation: Option<f64>,
    /// `max((−u)₊, (u − sup φ)₊)`.
    pub bounds_violation: f64,
    /// A fixed right-hand side took both signs.
    pub sign_changing: bool,
}

impl SolveReport {
    pub fn tau_max(&self) -> f64 {
        self.history.iter().map(|e| e.tau_max).fold(0.0, f64::max)
    }

    /// Whether the recorded residuals never increase from `burn_in` on.
    pub fn residual_monotone_after(&self, burn_in: usize) -> bool {
        let tail: Vec<f64> = self.history.iter().filter(|e| e.iter >= burn_in).map(|e| e.residual).collect();
        tail.windows(2).all(|w| w[1] <= w[0])
    }
}

fn boundary_abs_sup(p: &DirichletProblem) -> f64 {
    p.grid.boundary_nodes().into_iter().map(|k| p.boundary.get(k).abs()).fold(0.0, f64::max)
}

impl DirichletProblem {
    pub fn new(boundary: ScalarField, rhs: Rhs, op: StencilOperator) -> Result<DirichletProblem> {
        let grid = *boundary.grid();
        if op.grid() != &grid {
            return Err(Error::Grid("operator grid differs from boundary grid".into()));
        }
        if let Rhs::Fixed(f) = &rhs {
            if f.grid() != &grid {
                return Err(Error::Grid("right-hand side grid differs from boundary grid".into()));
            }
            if !f.is_finite() {
                return Err(Error::Parameter("right-hand side is not finite".into()));
            }
        }
        if !boundary.is_finite() {
            return Err(Error::Parameter("boundary data is not finite".into()));
        }
        Ok(DirichletProblem { grid, boundary, rhs, op })
    }

    pub fn with_rhs(&self, rhs: Rhs) -> DirichletProblem {
        DirichletProblem { rhs, ..self.clone() }
    }

    /// The homogeneous problem with the same boundary data.
    pub fn harmonic(&self) -> DirichletProblem {
        self.with_rhs(Rhs::zero(self.grid))
    }

    pub fn boundary_sup(&self) -> f64 {
        self.boundary.boundary_sup()
    }

    /// `sup ζ` over `Ω × [0, ∞)`, or `sup f` for a fixed right-hand side.
    pub fn rhs_sup(&self) -> f64 {
        match &self.rhs {
            Rhs::Fixed(f) => f.max(),
            Rhs::Reaction(rt) => rt.sup(),
        }
    }

    pub fn boundary_extend(&self) -> ScalarField {
        let g = self.grid;
        let last = g.n() - 1;
        let vals = (0..g.len())
            .map(|k| {
                if g.is_boundary(k) {
                    return self.boundary.get(k);
                }
                let (i, j) = g.coords(k);
                if g.dim() == 1 {
                    let b = if i <= last - i { 0 } else { last };
                    return self.boundary.get(b);
                }
                let cands = [(j, (i, 0)), (last - j, (i, last)), (i, (0, j)), (last - i, (last, j))];
                let (mut best, mut at) = cands[0];
                for &(d, node) in &cands[1..] {
                    if d < best {
                        best = d;
                        at = node;
                    }
                }
                let (bi, bj) = at;
                self.boundary.get(g.index(bi, bj))
            })
            .collect();
        ScalarField::new(g, vals).expect("grid length")
    }

    fn with_boundary(&self, init: &ScalarField) -> Result<Vec<f64>> {
        if init.grid() != &self.grid {
            return Err(Error::Grid("initial guess lives on a different grid".into()));
        }
        let mut u = init.values().to_vec();
        for k in self.grid.boundary_nodes() {
            u[k] = self.boundary.get(k);
        }
        Ok(u)
    }
}

/// Per-node evaluation of `f(x, u)` and its stiffness bound.
struct RhsEval<'a> {
    fixed: Option<&'a [f64]>,
    rt: Option<ReactionTerm>,
    g: Vec<f64>,
    lambda: f64,
    layer_width: Option<usize>,
}

impl<'a> RhsEval<'a> {
    fn new(p: &'a DirichletProblem) -> RhsEval<'a> {
        match &p.rhs {
            Rhs::Fixed(f) => {
                RhsEval { fixed: Some(f.values()), rt: None, g: Vec::new(), lambda: 0.0, layer_width: None }
            }
            Rhs::Reaction(rt) => {
                let g = (0..p.grid.len()).map(|k| rt.g.value(p.grid.point(k))).collect();
                let layer_width = if rt.beta.is_zero() { None } else { p.op.config().layer_width };
                RhsEval { fixed: None, rt: Some(*rt), g, lambda: rt.layer_lipschitz(), layer_width }
            }
        }
    }

    /// `(f(x_k, t), Λ(x_k, t))`.
    #[inline]
    fn eval(&self, k: usize, t: f64) -> (f64, f64) {
        if let Some(f) = self.fixed {
            return (f[k], 0.0);
        }
        let rt = self.rt.as_ref().expect("reaction");
        let eps = rt.eps;
        let lam = if t > -eps && t < 2.0 * eps { self.lambda } else { 0.0 };
        (rt.beta.value(t / eps) / eps + self.g[k], lam)
    }

    /// Stencil radius cap at a node with value `t`.
    #[inline]
    fn cap(&self, t: f64) -> usize {
        match (self.layer_width, &self.rt) {
            (Some(w), Some(rt)) if t < 2.0 * rt.eps => w,
            _ => usize::MAX,
        }
    }
}

/// One Jacobi sweep from `u` into `out`; returns `(max |F|, max τ_eff)`
/// over interior nodes, where `F` is evaluated at `u`.
fn sweep(
    p: &DirichletProblem,
    rhs: &RhsEval,
    gamma: f64,
    u: &[f64],
    out: &mut [f64],
) -> (f64, f64) {
    let grid = &p.grid;
    let op = &p.op;
    let diam = grid.diameter();
    let node = |k: usize, o: &mut f64| -> (f64, f64) {
        if grid.is_boundary(k) {
            *o = u[k];
            return (0.0, 0.0);
        }
        let parts = op.parts_capped(u, k, rhs.cap(u[k]));
        let s2 = parts.slope * parts.slope;
        let r2 = parts.radius * parts.radius;
        let (f, lam) = rhs.eval(k, u[k]);
        let res = parts.value() - f;
        let sigma2 = if f == 0.0 { 0.0 } else { (f.abs() * diam).cbrt().powi(2) };
        let stiff = parts.slope * (parts.q + parts.visc).abs() * parts.slope_gain * r2;
        let visc = 0.5 * s2.max(sigma2) * parts.visc_diag * r2;
        let tau = gamma * r2 / (s2.max(sigma2) + r2 + stiff + visc);
        let tau_eff = tau / (1.0 + tau * lam);
        *o = u[k] + tau_eff * res;
        (res.abs(), tau_eff)
    };
    let fold = |a: (f64, f64), b: (f64, f64)| (max_nan(a.0, b.0), a.1.max(b.1));
    if u.len() < PAR_THRESHOLD {
        out.iter_mut().enumerate().map(|(k, o)| node(k, o)).fold((0.0, 0.0), fold)
    } else {
        out.par_iter_mut().enumerate().map(|(k, o)| node(k, o)).reduce(|| (0.0, 0.0), fold)
    }
}

/// `max` that propagates NaN so divergence is never masked.
#[inline]
fn max_nan(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

/// Relaxes from `init` (boundary nodes are reset to the data) until the
/// max-norm residual drops to the tolerance. Exhausting the iteration
/// budget returns the best iterate with `converged = false`.
pub fn solve(p: &DirichletProblem, opts: &SolveOptions, init: &ScalarField) -> Result<(ScalarField, SolveReport)> {
    let tol = opts.tol_for(p);
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("tolerance must be positive, got {tol}")));
    }
    if !(opts.gamma > 0.0 && opts.gamma <= 0.5) {
        return Err(Error::Parameter(format!("gamma must lie in (0, 1/2], got {}", opts.gamma)));
    }
    let rhs = RhsEval::new(p);
    let mut u = p.with_boundary(init)?;
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("initial guess is not finite".into()));
    }
    let mut next = u.clone();
    let stride = opts.history_stride.max(1);
    let mut history = Vec::new();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut iterations = 0;
    let mut final_residual = f64::INFINITY;
    let mut converged = false;
    for it in 0..=opts.max_iter {
        let (res, tau_max) = sweep(p, &rhs, opts.gamma, &u, &mut next);
        if res.is_nan() || next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { iteration: it, msg: "non-finite value in iterate".into() });
        }
        if it % stride == 0 {
            history.push(HistoryEntry { iter: it, residual: res, tau_max });
        }
        iterations = it;
        final_residual = res;
        if res <= tol {
            converged = true;
            break;
        }
        if it == opts.max_iter {
            break;
        }
        if best.as_ref().is_none_or(|(r, _)| res < *r) {
            match &mut best {
                Some((r, v)) => {
                    *r = res;
                    v.copy_from_slice(&u);
                }
                None => best = Some((res, u.clone())),
            }
        }
        std::mem::swap(&mut u, &mut next);
    }
    if !converged {
        if let Some((r, v)) = best {
            if r < final_residual {
                u = v;
                final_residual = r;
            }
        }
    }
    let field = ScalarField::new(p.grid, u)?;
    let sign_changing = match &p.rhs {
        Rhs::Fixed(f) => f.min() < 0.0 && f.max() > 0.0,
        Rhs::Reaction(_) => false,
    };
    let report = SolveReport {
        iterations,
        final_residual,
        tol,
        converged,
        history,
        bracket_violation: None,
        bounds_violation: bounds_violation(&field, p.boundary_sup()),
        sign_changing,
    };
    Ok((field, report))
}

/// `max((−u)₊, (u − sup φ)₊)`.
pub fn bounds_violation(u: &ScalarField, sup_phi: f64) -> f64 {
    u.values().iter().map(|&v| (-v).max(v - sup_phi)).fold(0.0, f64::max)
}

/// Builds the requested initial guess.
pub fn initial_guess(p: &DirichletProblem, kind: InitKind, opts: &SolveOptions) -> Result<ScalarField> {
    match kind {
        InitKind::BoundaryExtend => Ok(p.boundary_extend()),
        InitKind::Zero => {
            let mut z = ScalarField::constant(p.grid, 0.0);
            for k in p.grid.boundary_nodes() {
                z.values_mut()[k] = p.boundary.get(k);
            }
            Ok(z)
        }
        InitKind::Super => Ok(perron_upper(p, opts)?.0),
        InitKind::Sub => {
            let (lower, _) = perron_bracket(p, opts)?;
            Ok(raise_to_zero(p, lower))
        }
    }
}

fn raise_to_zero(p: &DirichletProblem, lower: ScalarField) -> ScalarField {
    match &p.rhs {
        Rhs::Reaction(rt) if rt.g.bounds().1 == 0.0 => lower.map(|v| v.max(0.0)),
        _ => lower,
    }
}

/// Smallest grid side a coarse level may have.
const MIN_COARSE_NODES: usize = 17;

/// The same problem sampled on every other node, if that grid is still
/// large enough.
fn coarsen(p: &DirichletProblem) -> Option<DirichletProblem> {
    let g = p.grid;
    let n = g.n();
    if n % 2 == 0 || (n + 1) / 2 < MIN_COARSE_NODES {
        return None;
    }
    let dim = g.dim();
    let gc = Grid::new(dim, &g.lo()[..dim], &g.hi()[..dim], (n + 1) / 2).ok()?;
    let restrict = |f: &ScalarField| {
        let vals = (0..gc.len())
            .map(|k| {
                let (i, j) = gc.coords(k);
                f.get(g.index(2 * i, 2 * j))
            })
            .collect();
        ScalarField::new(gc, vals).expect("coarse length")
    };
    let rhs = match &p.rhs {
        Rhs::Fixed(f) => Rhs::Fixed(restrict(f)),
        Rhs::Reaction(rt) => Rhs::Reaction(*rt),
    };
    let op = StencilOperator::new(&gc, p.op.config()).ok()?;
    DirichletProblem::new(restrict(&p.boundary), rhs, op).ok()
}

/// Solves on a hierarchy of coarser grids first and starts each level from
/// the interpolated solution of the level below. Only the finest solve has
/// to converge.
fn solve_cascade(p: &DirichletProblem, opts: &SolveOptions) -> Result<(ScalarField, SolveReport)> {
    let init = match coarsen(p) {
        Some(c) => {
            let (uc, _) = solve_cascade(&c, opts)?;
            ScalarField::from_fn(p.grid, |x| uc.interpolate(x))
        }
        None => p.boundary_extend(),
    };
    solve(p, opts, &init)
}

fn perron_upper(p: &DirichletProblem, opts: &SolveOptions) -> Result<(ScalarField, SolveReport)> {
    let tol = opts.tol_for(p);
    let (u, rep) = solve_cascade(&p.harmonic(), &SolveOptions { tol: Some(tol), ..*opts })?;
    require_converged(&rep)?;
    Ok((u, rep))
}

/// `(u̲, ū)`: `u̲` solves `Δ∞u̲ = sup ζ`, `ū` solves `Δ∞ū = 0`, both with
/// the boundary data of `p`.
pub fn perron_bracket(p: &DirichletProblem, opts: &SolveOptions) -> Result<(ScalarField, ScalarField)> {
    let (upper, _) = perron_upper(p, opts)?;
    let sup = p.rhs_sup().max(0.0);
    if sup == 0.0 {
        return Ok((upper.clone(), upper));
    }
    let tol = opts.tol_for(p);
    let lower_problem = p.with_rhs(Rhs::constant(p.grid, sup));
    let (lower, rep) = solve_cascade(&lower_problem, &SolveOptions { tol: Some(tol), ..*opts })?;
    require_converged(&rep)?;
    Ok((lower, upper))
}

fn require_converged(rep: &SolveReport) -> Result<()> {
    if rep.converged {
        Ok(())
    } else {
        Err(Error::NotConverged { iterations: rep.iterations, residual: rep.final_residual })
    }
}

/// `max((u̲ − u)₊, (u − ū)₊)`.
pub fn bracket_violation(u: &ScalarField, lower: &ScalarField, upper: &ScalarField) -> f64 {
    u.values()
        .iter()
        .zip(lower.values().iter().zip(upper.values()))
        .map(|(&v, (&lo, &hi))| (lo - v).max(v - hi).max(0.0))
        .fold(0.0, f64::max)
}

/// Solves the singular problem. Without an explicit `init` the iteration
/// starts from the lower end of the Perron bracket and increases to the
/// minimal solution; the bracket violation is always reported.
pub fn solve_singular(
    p: &DirichletProblem,
    opts: &SolveOptions,
    init: Option<&ScalarField>,
) -> Result<(ScalarField, SolveReport)> {
    if !matches!(p.rhs, Rhs::Reaction(_)) {
        return Err(Error::Parameter("solve_singular needs a reaction right-hand side".into()));
    }
    let (lower, upper) = perron_bracket(p, opts)?;
    let start = match init {
        Some(u) => u.clone(),
        None => raise_to_zero(p, lower.clone()),
    };
    let (u, mut rep) = solve(p, opts, &start)?;
    rep.bracket_violation = Some(bracket_violation(&u, &lower, &upper));
    Ok((u, rep))
}

/// `max_interior(u − v) − max_boundary(u − v)`; non-positive up to the
/// solver tolerance when `u` solves with the larger right-hand side.
pub fn comparison_check(u: &ScalarField, v: &ScalarField) -> f64 {
    let g = u.grid();
    let mut inner = f64::NEG_INFINITY;
    let mut outer = f64::NEG_INFINITY;
    for k in 0..g.len() {
        let d = u.get(k) - v.get(k);
        if g.is_boundary(k) {
            outer = outer.max(d);
        } else {
            inner = inner.max(d);
        }
    }
    inner - outer
}

/// Max-norm residual of `u` on interior nodes.
pub fn residual(p: &DirichletProblem, u: &ScalarField) -> f64 {
    let rhs = RhsEval::new(p);
    let vals = u.values();
    (0..p.grid.len())
        .filter(|&k| !p.grid.is_boundary(k))
        .map(|k| (p.op.parts_capped(vals, k, rhs.cap(vals[k])).value() - rhs.eval(k, vals[k]).0).abs())
        .fold(0.0, max_nan)
}
