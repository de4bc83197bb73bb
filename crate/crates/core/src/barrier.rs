//! The radial barrier
//!
//! ```text
//!     Θ_L(x) = a                          |x| < L
//!            = A₀ (|x| − L)² + a          L ≤ |x| < L + L₀
//!            = ψ(L) − φ(L) |x|^{−α}       |x| ≥ L + L₀
//! ```
//!
//! with `L₀ = √((b − a)/A₀)`, `φ(L) = (2/α) √((b − a)A₀) (L + L₀)^{1+α}` and
//! `ψ(L) = b + φ(L)(L + L₀)^{−α}`, its infinity Laplacian in closed form,
//! and the checks that make it a supersolution with linear growth.

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::operator::StencilOperator;
use crate::reaction::ReactionTerm;

pub const DEFAULT_ALPHA: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierParams {
    pub a: f64,
    pub b: f64,
    pub a0: f64,
    pub alpha: f64,
    pub l: f64,
    /// Growth constant the barrier is checked against.
    pub kappa0: f64,
}

/// Closed-form `Δ∞Θ_L` at a point; on an interface radius both one-sided
/// values are reported.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedForm {
    Value(f64),
    Kink { inside: f64, outside: f64 },
}

impl ClosedForm {
    /// The larger one-sided value at a kink.
    pub fn upper(&self) -> f64 {
        match *self {
            ClosedForm::Value(v) => v,
            ClosedForm::Kink { inside, outside } => inside.max(outside),
        }
    }
}

impl BarrierParams {
    pub fn new(a: f64, b: f64, a0: f64, alpha: f64, l: f64, kappa0: f64) -> Result<BarrierParams> {
        if !(0.0 < a && a < b && b < 1.0) {
            return Err(Error::Parameter(format!("need 0 < a < b < 1, got a = {a}, b = {b}")));
        }
        if !(a0 > 0.0 && a0.is_finite()) {
            return Err(Error::Parameter(format!("A0 must be positive, got {a0}")));
        }
        if !(alpha > 1.0 && alpha.is_finite()) {
            return Err(Error::Parameter(format!("alpha must exceed 1, got {alpha}")));
        }
        if !(kappa0 > 0.0) {
            return Err(Error::Parameter(format!("kappa0 must be positive, got {kappa0}")));
        }
        let bp = BarrierParams { a, b, a0, alpha, l, kappa0 };
        if !(l >= bp.l0() && l.is_finite()) {
            return Err(Error::Parameter(format!("L = {l} is below L0 = {}", bp.l0())));
        }
        Ok(bp)
    }

    /// The same barrier with a different `L`.
    pub fn with_l(&self, l: f64) -> Result<BarrierParams> {
        BarrierParams::new(self.a, self.b, self.a0, self.alpha, l, self.kappa0)
    }

    pub fn l0(&self) -> f64 {
        ((self.b - self.a) / self.a0).sqrt()
    }

    pub fn phi_l(&self) -> f64 {
        2.0 / self.alpha * ((self.b - self.a) * self.a0).sqrt() * (self.l + self.l0()).powf(1.0 + self.alpha)
    }

    pub fn psi_l(&self) -> f64 {
        self.b + self.phi_l() * (self.l + self.l0()).powf(-self.alpha)
    }

    /// `Θ_L` as a function of the radius.
    pub fn value_radial(&self, rho: f64) -> f64 {
        let outer = self.l + self.l0();
        if rho < self.l {
            self.a
        } else if rho < outer {
            self.a0 * (rho - self.l).powi(2) + self.a
        } else {
            self.psi_l() - self.phi_l() * rho.powf(-self.alpha)
        }
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        self.value_radial(x[0].hypot(x[1]))
    }

    /// Radial derivative of `Θ_L`.
    pub fn slope_radial(&self, rho: f64) -> f64 {
        if rho < self.l {
            0.0
        } else if rho < self.l + self.l0() {
            2.0 * self.a0 * (rho - self.l)
        } else {
            self.alpha * self.phi_l() * rho.powf(-self.alpha - 1.0)
        }
    }

    fn closed_form_piece(&self, piece: usize, rho: f64) -> f64 {
        match piece {
            0 => 0.0,
            // (Θ')² Θ'' with Θ' = 2A₀(ρ − L), Θ'' = 2A₀.
            1 => 8.0 * self.a0.powi(3) * (rho - self.l).powi(2),
            _ => {
                -self.alpha.powi(3) * (self.alpha + 1.0) * self.phi_l().powi(3) * rho.powf(-(3.0 * self.alpha + 4.0))
            }
        }
    }

    /// `Δ∞Θ_L` in closed form.
    pub fn closed_form_radial(&self, rho: f64) -> ClosedForm {
        let outer = self.l + self.l0();
        if rho == self.l {
            ClosedForm::Kink { inside: 0.0, outside: self.closed_form_piece(1, rho) }
        } else if rho == outer {
            ClosedForm::Kink { inside: self.closed_form_piece(1, rho), outside: self.closed_form_piece(2, rho) }
        } else if rho < self.l {
            ClosedForm::Value(0.0)
        } else if rho < outer {
            ClosedForm::Value(self.closed_form_piece(1, rho))
        } else {
            ClosedForm::Value(self.closed_form_piece(2, rho))
        }
    }

    pub fn closed_form(&self, x: [f64; 2]) -> ClosedForm {
        self.closed_form_radial(x[0].hypot(x[1]))
    }

    /// `(2 √(A₀(b − a)))³`, the bound on `Δ∞Θ_L` the explicit smallness
    /// condition on `A₀` compares with `inf ζ`.
    pub fn smallness_lhs(&self) -> f64 {
        (2.0 * (self.a0 * (self.b - self.a)).sqrt()).powi(3)
    }

    /// `Θ_ε(x) = ε Θ_{η/(4ε)}(x/ε)`.
    pub fn eval_scaled(&self, eps: f64, eta: f64, x: [f64; 2]) -> Result<f64> {
        if !(eps > 0.0 && eta > 0.0) {
            return Err(Error::Parameter(format!("need eps > 0 and eta > 0, got {eps}, {eta}")));
        }
        let l = eta / (4.0 * eps);
        if l < self.l0() {
            return Err(Error::Parameter(format!(
                "eta = {eta} is below 4 L0 eps = {}",
                4.0 * self.l0() * eps
            )));
        }
        let bp = self.with_l(l)?;
        Ok(eps * bp.value([x[0] / eps, x[1] / eps]))
    }

    /// Sampled `Θ_L` on a grid.
    pub fn sample(&self, grid: Grid) -> ScalarField {
        ScalarField::from_fn(grid, |x| self.value(x))
    }
}

/// `inf ζ(x, t)` over `t ∈ [a, b]` and the lower bound of `g`, by dense
/// sampling.
pub fn inf_zeta_on_band(rt: &ReactionTerm, a: f64, b: f64) -> f64 {
    const N: usize = 2000;
    let g_lo = rt.g.bounds().0;
    (0..=N)
        .map(|i| {
            let t = a + (b - a) * i as f64 / N as f64;
            rt.beta.value(t / rt.eps) / rt.eps + g_lo
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSample {
    pub radius: f64,
    pub theta: f64,
    pub closed_form: f64,
    /// Discrete operator at the nearest node, when a grid was supplied.
    pub discrete: Option<f64>,
    pub zeta: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupersolutionReport {
    pub pass: bool,
    /// `(2 √(A₀(b − a)))³`.
    pub smallness_lhs: f64,
    pub inf_zeta: f64,
    /// `min (ζ − Δ∞Θ_L)` over the samples.
    pub worst_margin: f64,
    pub worst_radius: f64,
    pub samples: Vec<BarrierSample>,
}

/// Checks `Δ∞Θ_L ≤ ζ(x, Θ_L)` at the sampled radii along the first axis and
/// the explicit smallness condition `(2 √(A₀(b − a)))³ ≤ inf_{[a,b]} ζ`.
/// With `discrete`, the stencil value at the node nearest each sample is
/// recorded too.
pub fn verify_supersolution(
    bp: &BarrierParams,
    rt: &ReactionTerm,
    radii: &[f64],
    discrete: Option<(&StencilOperator, &ScalarField)>,
) -> SupersolutionReport {
    let inf_zeta = inf_zeta_on_band(rt, bp.a, bp.b);
    let lhs = bp.smallness_lhs();
    let mut pass = lhs <= inf_zeta;
    let mut worst_margin = f64::INFINITY;
    let mut worst_radius = f64::NAN;
    let mut samples = Vec::with_capacity(radii.len());
    for &rho in radii {
        let x = [rho, 0.0];
        let theta = bp.value_radial(rho);
        let cf = bp.closed_form_radial(rho).upper();
        let zeta = rt.eval_extended(x, theta);
        let ok = cf <= zeta;
        pass &= ok;
        if zeta - cf < worst_margin {
            worst_margin = zeta - cf;
            worst_radius = rho;
        }
        let discrete = discrete.and_then(|(op, field)| {
            let g = op.grid();
            if !g.contains(x) {
                return None;
            }
            let k = nearest_node(g, x);
            (!g.is_boundary(k)).then(|| op.apply(field.values(), k))
        });
        samples.push(BarrierSample { radius: rho, theta, closed_form: cf, discrete, zeta, ok });
    }
    SupersolutionReport { pass, smallness_lhs: lhs, inf_zeta, worst_margin, worst_radius, samples }
}

fn nearest_node(g: &Grid, x: [f64; 2]) -> usize {
    let last = (g.n() - 1) as f64;
    let lo = g.lo();
    let i = ((x[0] - lo[0]) / g.h()).round().clamp(0.0, last) as usize;
    if g.dim() == 1 {
        return i;
    }
    let j = ((x[1] - lo[1]) / g.h()).round().clamp(0.0, last) as usize;
    g.index(i, j)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthReport {
    /// `Θ_L(4L)/(4L)`.
    pub kappa0_effective: f64,
    /// `Θ_L` is nondecreasing in the radius on a sweep out to `8L`.
    pub monotone: bool,
    pub pass: bool,
}

/// Measures the growth constant in `Θ_L(x) ≥ 4κ₀L` for `|x| ≥ 4L` and
/// compares it with the configured `κ₀`.
pub fn growth_check(bp: &BarrierParams) -> GrowthReport {
    const N: usize = 4000;
    let top = 8.0 * bp.l.max(bp.l + bp.l0());
    let mut prev = f64::NEG_INFINITY;
    let mut monotone = true;
    for i in 0..=N {
        let v = bp.value_radial(top * i as f64 / N as f64);
        monotone &= v >= prev;
        prev = v;
    }
    let kappa0_effective = bp.value_radial(4.0 * bp.l) / (4.0 * bp.l);
    GrowthReport { kappa0_effective, monotone, pass: monotone && kappa0_effective >= bp.kappa0 }
}

/// `min_L Θ_L(4L)/(4L)` over the given admissible values of `L`.
pub fn calibrate_kappa0(bp: &BarrierParams, ls: &[f64]) -> Result<f64> {
    if ls.is_empty() {
        return Err(Error::Empty("no values of L to calibrate over".into()));
    }
    let mut k = f64::INFINITY;
    for &l in ls {
        let b = bp.with_l(l)?;
        k = k.min(b.value_radial(4.0 * l) / (4.0 * l));
    }
    Ok(k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteMismatch {
    pub max_error: f64,
    pub nodes: usize,
}

/// Max `|Δ∞^h Θ_L − Δ∞Θ_L|` over interior nodes whose distance to both
/// kink radii is at least `margin` and that carry the full stencil.
pub fn discrete_mismatch(bp: &BarrierParams, op: &StencilOperator, margin: f64) -> DiscreteMismatch {
    let g = *op.grid();
    let field = bp.sample(g);
    let outer = bp.l + bp.l0();
    let mut max_error = 0.0f64;
    let mut nodes = 0;
    for k in g.interior_nodes() {
        if g.depth(k) < op.width() {
            continue;
        }
        let x = g.point(k);
        let rho = x[0].hypot(x[1]);
        if (rho - bp.l).abs() < margin || (rho - outer).abs() < margin {
            continue;
        }
        let exact = bp.closed_form_radial(rho).upper();
        max_error = max_error.max((op.apply(field.values(), k) - exact).abs());
        nodes += 1;
    }
    DiscreteMismatch { max_error, nodes }
}
