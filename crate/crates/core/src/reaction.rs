//! The singular reaction term `ζ_ε(x, t) = β(t/ε)/ε + g(x)` and sampled
//! checks of its structural assumptions (upper envelope, non-degeneracy on
//! a band, total mass of the bump).

use crate::error::{Error, Result};

/// Catalogue of bump profiles supported on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BumpKind {
    /// `6 t (1 - t)`, unit mass, maximum 1.5.
    Bump6,
    /// `30 t² (1 - t)²`, unit mass, C¹ on the real line.
    Bump30,
    Zero,
}

impl BumpKind {
    pub fn parse(s: &str) -> Option<BumpKind> {
        match s {
            "bump6" => Some(BumpKind::Bump6),
            "bump30" => Some(BumpKind::Bump30),
            "zero" => Some(BumpKind::Zero),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BumpKind::Bump6 => "bump6",
            BumpKind::Bump30 => "bump30",
            BumpKind::Zero => "zero",
        }
    }
}

/// A catalogue bump multiplied by a nonnegative mass factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub kind: BumpKind,
    pub scale: f64,
}

impl Bump {
    pub fn new(kind: BumpKind) -> Bump {
        Bump { kind, scale: 1.0 }
    }

    pub fn scaled(kind: BumpKind, scale: f64) -> Bump {
        Bump { kind, scale }
    }

    pub fn zero() -> Bump {
        Bump { kind: BumpKind::Zero, scale: 0.0 }
    }

    pub fn is_zero(&self) -> bool {
        self.kind == BumpKind::Zero || self.scale == 0.0
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        if !(0.0..=1.0).contains(&t) {
            return 0.0;
        }
        let s = 1.0 - t;
        let base = match self.kind {
            BumpKind::Bump6 => 6.0 * t * s,
            BumpKind::Bump30 => 30.0 * t * t * s * s,
            BumpKind::Zero => 0.0,
        };
        self.scale * base
    }

    #[inline]
    pub fn derivative(&self, t: f64) -> f64 {
        if !(0.0..=1.0).contains(&t) {
            return 0.0;
        }
        let base = match self.kind {
            BumpKind::Bump6 => 6.0 - 12.0 * t,
            BumpKind::Bump30 => 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t),
            BumpKind::Zero => 0.0,
        };
        self.scale * base
    }

    /// Closed-form `∫₀^τ β(s) ds`, constant for `τ ≥ 1`.
    #[inline]
    pub fn antiderivative(&self, tau: f64) -> f64 {
        let t = tau.clamp(0.0, 1.0);
        let base = match self.kind {
            BumpKind::Bump6 => t * t * (3.0 - 2.0 * t),
            BumpKind::Bump30 => t * t * t * (10.0 - 15.0 * t + 6.0 * t * t),
            BumpKind::Zero => 0.0,
        };
        self.scale * base
    }

    /// Largest value of β, from a dense scan.
    pub fn sup(&self) -> f64 {
        dense_scan(0.0, 1.0, 10_001, |t| self.value(t)).1
    }

    /// Largest positive slope of β, from a dense scan.
    pub fn max_slope(&self) -> f64 {
        dense_scan(0.0, 1.0, 10_001, |t| self.derivative(t)).1.max(0.0)
    }
}

/// The spatial noise `g(x)` with bounds `c0 <= g <= c1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GProfile {
    Constant(f64),
    /// `c0 + (c1 - c0) * clamp((x₁ + 1)/2, 0, 1)`: increases across
    /// `[-1, 1]` in the first coordinate.
    Affine { c0: f64, c1: f64 },
}

impl GProfile {
    #[inline]
    pub fn value(&self, x: [f64; 2]) -> f64 {
        match *self {
            GProfile::Constant(c) => c,
            GProfile::Affine { c0, c1 } => c0 + (c1 - c0) * ((x[0] + 1.0) * 0.5).clamp(0.0, 1.0),
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            GProfile::Constant(c) => (c, c),
            GProfile::Affine { c0, c1 } => (c0.min(c1), c0.max(c1)),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.bounds() == (0.0, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactionTerm {
    pub eps: f64,
    pub beta: Bump,
    pub g: GProfile,
    /// Envelope constant `𝓑` multiplying `χ_(0,ε)/ε`.
    pub b_const: f64,
    /// Envelope constant `𝓒`.
    pub c_const: f64,
    /// Band `(a, b)` on which `ε ζ_ε(x, ε t)` must stay positive.
    pub band: (f64, f64),
}

impl ReactionTerm {
    /// A reaction with envelope constants set to the tightest values the
    /// catalogue allows (`𝓑 = max β`, `𝓒 = c₁`) and band `(0.25, 0.75)`.
    pub fn new(eps: f64, beta: Bump, g: GProfile) -> Result<ReactionTerm> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Parameter(format!("eps must be positive, got {eps}")));
        }
        if beta.scale < 0.0 || !beta.scale.is_finite() {
            return Err(Error::Parameter(format!("bump scale must be nonnegative, got {}", beta.scale)));
        }
        let (c0, c1) = g.bounds();
        if c0 < 0.0 {
            return Err(Error::Parameter(format!("g must be nonnegative, lower bound {c0}")));
        }
        Ok(ReactionTerm { eps, beta, g, b_const: beta.sup(), c_const: c1, band: (0.25, 0.75) })
    }

    pub fn zero(eps: f64) -> ReactionTerm {
        ReactionTerm {
            eps,
            beta: Bump::zero(),
            g: GProfile::Constant(0.0),
            b_const: 0.0,
            c_const: 0.0,
            band: (0.25, 0.75),
        }
    }

    pub fn with_eps(&self, eps: f64) -> ReactionTerm {
        ReactionTerm { eps, ..*self }
    }

    pub fn is_zero(&self) -> bool {
        self.beta.is_zero() && self.g.is_zero()
    }

    /// `ζ_ε(x, t)` for `t >= 0`.
    pub fn eval_zeta(&self, x: [f64; 2], t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("reaction evaluated at t = {t} < 0")));
        }
        Ok(self.eval_extended(x, t))
    }

    /// `ζ_ε` extended by `g(x)` to negative arguments (the bump vanishes
    /// there); used inside the iterative solver where transient iterates
    /// may dip below zero.
    #[inline]
    pub fn eval_extended(&self, x: [f64; 2], t: f64) -> f64 {
        self.beta.value(t / self.eps) / self.eps + self.g.value(x)
    }

    /// An upper bound for `∂ζ/∂t` on the layer `0 < t < ε`.
    pub fn layer_lipschitz(&self) -> f64 {
        self.beta.max_slope() / (self.eps * self.eps)
    }

    /// `sup ζ_ε` over `Ω × [0, ∞)`.
    pub fn sup(&self) -> f64 {
        self.beta.sup() / self.eps + self.g.bounds().1
    }

    /// Total mass `M = ∫₀¹ β(s) ds`, by adaptive Simpson quadrature.
    pub fn beta_integral(&self) -> f64 {
        adaptive_simpson(&|t| self.beta.value(t), 0.0, 1.0, 1e-12, 50)
    }

    /// `Ξ_ε(t) = ∫₀^{t/ε} β(s) ds`.
    #[inline]
    pub fn xi(&self, t: f64) -> f64 {
        self.beta.antiderivative(t / self.eps)
    }

    /// Samples `0 <= ζ_ε(x, t) <= 𝓑/ε χ_(0,ε)(t) + 𝓒` on `t/ε ∈ [0, 1.5]`.
    pub fn verify_envelope(&self, xs: &[[f64; 2]], t_samples: usize) -> EnvelopeReport {
        let n = t_samples.max(2);
        let mut worst = EnvelopeReport { pass: true, worst_violation: f64::NEG_INFINITY, worst_x: [0.0; 2], worst_t: 0.0 };
        for &x in xs {
            for k in 0..n {
                let t = self.eps * 1.5 * k as f64 / (n - 1) as f64;
                let z = self.eval_extended(x, t);
                let chi = if t > 0.0 && t < self.eps { 1.0 } else { 0.0 };
                let bound = self.b_const / self.eps * chi + self.c_const;
                // Either side of the envelope can be violated.
                let violation = (z - bound).max(-z);
                if violation > worst.worst_violation {
                    worst.worst_violation = violation;
                    worst.worst_x = x;
                    worst.worst_t = t;
                }
            }
        }
        // Relative slack for rounding in β(t/ε)/ε.
        let slack = 1e-12 * (1.0 + self.b_const / self.eps + self.c_const);
        worst.pass = worst.worst_violation <= slack;
        worst
    }

    /// `ℜ = min ε ζ_ε(x, ε t) = β(t) + ε g(x)` over `t ∈ [a, b]` and the
    /// given points.
    pub fn verify_nondegeneracy(&self, xs: &[[f64; 2]], t_samples: usize) -> Result<NondegeneracyReport> {
        let (a, b) = self.band;
        if !(a < b) || a < 0.0 {
            return Err(Error::Parameter(format!("band needs 0 <= a < b, got ({a}, {b})")));
        }
        let mut value = f64::INFINITY;
        for &x in xs {
            let (_, m) = dense_scan(a, b, t_samples.max(2), |t| -(self.eps * self.eval_extended(x, self.eps * t)));
            value = value.min(-m);
        }
        Ok(NondegeneracyReport { value, pass: value > 0.0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeReport {
    pub pass: bool,
    pub worst_violation: f64,
    pub worst_x: [f64; 2],
    pub worst_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NondegeneracyReport {
    pub value: f64,
    pub pass: bool,
}

/// Returns `(argmax, max)` of `f` over `n` equispaced samples of `[a, b]`.
fn dense_scan(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut best = (a, f64::NEG_INFINITY);
    for k in 0..n {
        let t = a + (b - a) * k as f64 / (n - 1) as f64;
        let v = f(t);
        if v > best.1 {
            best = (t, v);
        }
    }
    best
}

pub(crate) fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, tol: f64, depth: u32, level: u32) -> f64 {
        let m = 0.5 * (a + b);
        let flm = f(0.5 * (a + m));
        let frm = f(0.5 * (m + b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if level >= depth || (level >= 3 && delta.abs() <= 15.0 * tol) {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, 0.5 * tol, depth, level + 1)
                + recurse(f, m, b, fm, frm, fb, 0.5 * tol, depth, level + 1)
        }
    }
    recurse(f, a, b, f(a), f(0.5 * (a + b)), f(b), tol, depth, 0)
}
