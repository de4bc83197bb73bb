//! The one-dimensional problem `u″(u′)² = ζ_ε(u)` on `(−1, 1)` with
//! `u(±1)` prescribed, solved as the first-order system
//! `u′ = w, w′ = ζ_ε(u)/w²` with classical RK4, plus the first integral
//!
//! ```text
//!     (u′)⁴/4 − Ξ_ε(u) − g u = const
//! ```
//!
//! on monotone arcs, which gives the limit slope `(4M)^{1/4}`,
//! `M = ∫₀¹ β`, at the free boundary.
//!
//! When both E = 0 arcs reach zero before meeting, the minimal solution
//! has a dead core `{u = 0}` between them; otherwise the slope `u′(−1)`
//! is found by bisection. Near a turning point `w = 0` the arc is
//! continued with the first integral instead of the ODE.

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::reaction::{adaptive_simpson, GProfile, ReactionTerm};

pub const DEFAULT_STEP: f64 = 1e-4;
/// Bracket for the shooting slope `u′(−1)`.
pub const SHOOT_RANGE: (f64, f64) = (-10.0, 10.0);
const SHOOT_SCAN: usize = 400;
const SHOOT_TOL: f64 = 1e-13;
const QUAD_TOL: f64 = 1e-14;
/// Half width in `x` below which a turning arc is reconstructed from the
/// first integral.
const TURN_WINDOW: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneDProblem {
    pub rt: ReactionTerm,
    pub left: f64,
    pub right: f64,
    pub step: f64,
    /// `w²` is clamped below by `w_reg²` in `ζ/w²`.
    pub w_reg: f64,
}

impl OneDProblem {
    pub fn new(rt: ReactionTerm, left: f64, right: f64) -> Result<OneDProblem> {
        if !matches!(rt.g, GProfile::Constant(_)) {
            return Err(Error::Parameter("1D profile needs a constant g".into()));
        }
        if !(left >= 0.0 && right >= 0.0 && left.is_finite() && right.is_finite()) {
            return Err(Error::Parameter(format!("boundary values must be >= 0, got {left}, {right}")));
        }
        if left.max(right) <= rt.eps {
            return Err(Error::Parameter(format!(
                "some boundary value must exceed eps = {}, got {left}, {right}",
                rt.eps
            )));
        }
        Ok(OneDProblem { rt, left, right, step: DEFAULT_STEP, w_reg: 1e-12 })
    }

    pub fn with_step(self, step: f64) -> Result<OneDProblem> {
        if !(step > 0.0 && step < 1.0) {
            return Err(Error::Parameter(format!("step must lie in (0, 1), got {step}")));
        }
        Ok(OneDProblem { step, ..self })
    }

    fn g(&self) -> f64 {
        self.rt.g.bounds().0
    }

    /// `P(u) = Ξ_ε(u) + g u`, so that `(u′)⁴/4 − P(u)` is conserved.
    pub fn potential(&self, u: f64) -> f64 {
        self.rt.xi(u) + self.g() * u
    }

    #[inline]
    fn zeta(&self, u: f64) -> f64 {
        self.rt.eval_extended([0.0; 2], u)
    }

    #[inline]
    fn rhs(&self, u: f64, w: f64) -> (f64, f64) {
        (w, self.zeta(u) / (w * w).max(self.w_reg * self.w_reg))
    }

    fn rk4(&self, u: f64, w: f64, dx: f64) -> (f64, f64) {
        let (k1u, k1w) = self.rhs(u, w);
        let (k2u, k2w) = self.rhs(u + 0.5 * dx * k1u, w + 0.5 * dx * k1w);
        let (k3u, k3w) = self.rhs(u + 0.5 * dx * k2u, w + 0.5 * dx * k2w);
        let (k4u, k4w) = self.rhs(u + dx * k3u, w + dx * k3w);
        (u + dx / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u), w + dx / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w))
    }

    /// One step of signed length at most `|dx|`: sub-steps inside the layer
    /// `u < 2ε`, keeps the relative change of `u` small near rest, and lands exactly on `u = ε` where `β` has a kink.
    fn advance(&self, u: f64, w: f64, dx: f64) -> (f64, f64, f64) {
        let eps = self.rt.eps;
        let mut dx = dx;
        if u < 2.0 * eps && w != 0.0 {
            let cap = (eps / 64.0).min(0.25 * u.abs().max(0.01 * eps)) / w.abs();
            dx = dx.signum() * dx.abs().min(cap);
        }
        let (nu, nw) = self.rk4(u, w, dx);
        if (u - eps) * (nu - eps) < 0.0 {
            let (mut a, mut fa) = (0.0, u - eps);
            let (mut b, mut fb) = (dx, nu - eps);
            for _ in 0..4 {
                let c = b - fb * (b - a) / (fb - fa);
                let fc = self.rk4(u, w, c).0 - eps;
                (a, fa, b, fb) = (b, fb, c, fc);
                if fc.abs() <= 1e-15 * eps {
                    break;
                }
            }
            if b != 0.0 && b.abs() < dx.abs() && b.signum() == dx.signum() {
                let (cu, cw) = self.rk4(u, w, b);
                return (b, cu, cw);
            }
        }
        (dx, nu, nw)
    }

    /// Distance covered by the arc with first integral `e` between the
    /// turning value `m` (where `e + P(m) = 0`) and `top`:
    /// `∫_m^top du / (4(e + P(u)))^{1/4}`, substituting `u = m + τ⁴`.
    fn arc_length(&self, m: f64, top: f64, e: f64) -> f64 {
        if top <= m {
            return 0.0;
        }
        let f = |tau: f64| {
            let t3 = tau * tau * tau;
            let q = 4.0 * (e + self.potential(m + t3 * tau));
            if q <= 0.0 {
                0.0
            } else {
                4.0 * t3 / q.sqrt().sqrt()
            }
        };
        adaptive_simpson(&f, 0.0, (top - m).sqrt().sqrt(), QUAD_TOL, 40)
    }

    /// Length of the E = 0 arc from level `top` down to 0, infinite if the
    /// potential vanishes on it.
    fn core_arc_length(&self, top: f64) -> f64 {
        if top <= 0.0 {
            return 0.0;
        }
        if self.potential(top) <= 0.0 || self.potential(0.5 * top.min(self.rt.eps)) <= 0.0 {
            return f64::INFINITY;
        }
        self.arc_length(0.0, top, 0.0)
    }

    /// Turning value `m ∈ [lo, hi]` with `P(m) = −e`.
    fn turning_value(&self, e: f64, lo: f64, hi: f64) -> f64 {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if self.potential(mid) + e < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
            if b - a <= 1e-16 * b.abs().max(1e-300) {
                break;
            }
        }
        b
    }

    /// RK4 from `(x, u, w)` towards `x_end` until the arc reaches zero
    /// while flattening; the remainder is closed with the first integral.
    /// Returns the samples including the final rest point `(x, 0, 0)`.
    fn arc_to_rest(&self, x0: f64, u0: f64, w0: f64, dir: f64) -> Vec<Sample> {
        let mut out = vec![Sample { x: x0, u: u0, du: w0 }];
        let (mut x, mut u, mut w) = (x0, u0, w0);
        let stop = self.rt.eps * 1e-2;
        while (x - x0).abs() < 2.0 {
            let (dx, nu, nw) = self.advance(u, w, dir * self.step);
            // Flattening: w moves towards zero as u decreases to 0.
            if nu <= stop || nw * w <= 0.0 {
                break;
            }
            x += dx;
            u = nu;
            w = nw;
            out.push(Sample { x, u, du: w });
        }
        let rest = x + dir * self.arc_length(0.0, u, 0.0);
        out.push(Sample { x: rest, u: 0.0, du: 0.0 });
        out
    }

    /// `u(1)` and its samples for the shooting slope `s = u′(−1)`.
    fn shoot(&self, s: f64, keep: bool) -> (f64, Vec<Sample>, Vec<usize>) {
        let (mut x, mut u, mut w) = (-1.0, self.left, s);
        let mut out = Vec::new();
        let mut breaks = Vec::new();
        if keep {
            out.push(Sample { x, u, du: w });
        }
        while x < 1.0 - 1e-15 {
            let mut dx_max = self.step.min(1.0 - x);
            if w < 0.0 {
                let e = w.powi(4) / 4.0 - self.potential(u);
                // The turning point is about |w|³/(3ζ) away.
                let near = w.abs().powi(3) <= 12.0 * (TURN_WINDOW + self.step) * self.zeta(u).abs();
                let lo = if self.g() > 0.0 { (-e / self.g()).min(0.0) } else { 0.0 };
                if near && self.potential(lo) + e <= 0.0 {
                    let m = self.turning_value(e, lo, u);
                    let half = self.arc_length(m, u, e);
                    if half <= TURN_WINDOW {
                        let x_end = (x + 2.0 * half).min(1.0);
                        if keep {
                            let mut t = x + self.step;
                            let mut turned = false;
                            while t < x_end {
                                if !turned && t >= x + half {
                                    turned = true;
                                    breaks.push(out.len());
                                    out.push(Sample { x: x + half, u: m, du: 0.0 });
                                }
                                let v = self.arc_point(m, u, e, x, half, t);
                                let dv = (4.0 * (e + self.potential(v))).max(0.0).sqrt().sqrt();
                                out.push(Sample { x: t, u: v, du: if turned { dv } else { -dv } });
                                t += self.step;
                            }
                            if !turned && x + half <= 1.0 {
                                breaks.push(out.len());
                                out.push(Sample { x: x + half, u: m, du: 0.0 });
                            }
                        }
                        if x + 2.0 * half >= 1.0 {
                            let u_end = self.arc_point(m, u, e, x, half, 1.0);
                            if keep {
                                let dv = (4.0 * (e + self.potential(u_end))).max(0.0).sqrt().sqrt();
                                let du = if 1.0 < x + half { -dv } else { dv };
                                out.push(Sample { x: 1.0, u: u_end, du });
                            }
                            return (u_end, out, breaks);
                        }
                        x += 2.0 * half;
                        w = -w;
                        if keep {
                            out.push(Sample { x, u, du: w });
                        }
                        continue;
                    }
                    if half < TURN_WINDOW + dx_max {
                        dx_max = half - 0.5 * TURN_WINDOW;
                    }
                }
            }
            let (dx, nu, nw) = self.advance(u, w, dx_max);
            x += dx;
            u = nu;
            w = nw;
            if keep {
                out.push(Sample { x, u, du: w });
            }
        }
        (u, out, breaks)
    }

    /// Value at `target` on a turning arc entered at `(x, u)` with half
    /// width `half` around the turning value `m`.
    fn arc_point(&self, m: f64, u: f64, e: f64, x: f64, half: f64, target: f64) -> f64 {
        let descending = target - x <= half;
        // Distance from the turning point to the target.
        let want = if descending { half - (target - x) } else { target - x - half };
        let (mut a, mut b) = (m, u);
        for _ in 0..80 {
            let mid = 0.5 * (a + b);
            if self.arc_length(m, mid, e) < want {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    /// Minimal solution of the boundary value problem.
    pub fn integrate(&self) -> Result<Trajectory> {
        let la = self.core_arc_length(self.left);
        let lb = self.core_arc_length(self.right);
        if self.g() == 0.0 && la + lb <= 2.0 {
            return Ok(self.dead_core());
        }
        self.shooting()
    }

    fn dead_core(&self) -> Trajectory {
        let slope = |v: f64| (4.0 * self.potential(v)).sqrt().sqrt();
        let left = if self.left > 0.0 {
            self.arc_to_rest(-1.0, self.left, -slope(self.left), 1.0)
        } else {
            vec![Sample { x: -1.0, u: 0.0, du: 0.0 }]
        };
        let mut right = if self.right > 0.0 {
            self.arc_to_rest(1.0, self.right, slope(self.right), -1.0)
        } else {
            vec![Sample { x: 1.0, u: 0.0, du: 0.0 }]
        };
        right.reverse();
        let xl = left.last().map(|s| s.x).unwrap_or(-1.0);
        let xr = right[0].x;
        let mut samples = left;
        let a_end = samples.len();
        let core_steps = ((xr - xl) / self.step).floor() as usize;
        for k in 1..core_steps {
            samples.push(Sample { x: xl + k as f64 * self.step, u: 0.0, du: 0.0 });
        }
        let b_start = samples.len();
        samples.extend(right);
        let arcs = vec![(0, a_end), (b_start, samples.len())];
        Trajectory::new(self, samples, arcs, vec![xl, xr], 0.0)
    }

    fn shooting(&self) -> Result<Trajectory> {
        let f = |s: f64| self.shoot(s, false).0 - self.right;
        let (lo, hi) = SHOOT_RANGE;
        let mut prev = (lo, f(lo));
        let mut bracket = None;
        let mut scan = vec![prev];
        for k in 1..=SHOOT_SCAN {
            let s = lo + (hi - lo) * k as f64 / SHOOT_SCAN as f64;
            let v = f(s);
            scan.push((s, v));
            if prev.1 <= 0.0 && v >= 0.0 {
                bracket = Some((prev.0, s));
                break;
            }
            prev = (s, v);
        }
        let Some((mut a, mut b)) = bracket else {
            let lo_v = scan.first().map(|p| p.1).unwrap_or(f64::NAN);
            let hi_v = scan.last().map(|p| p.1).unwrap_or(f64::NAN);
            return Err(Error::Shooting(format!(
                "no sign change of u(1) - target over u'(-1) in [{lo}, {hi}]: mismatch {lo_v:e} .. {hi_v:e}"
            )));
        };
        let mut s = 0.5 * (a + b);
        for _ in 0..200 {
            s = 0.5 * (a + b);
            let v = f(s);
            if v.abs() <= SHOOT_TOL || b - a <= 1e-15 {
                break;
            }
            if v < 0.0 {
                a = s;
            } else {
                b = s;
            }
        }
        let (u_end, samples, breaks) = self.shoot(s, true);
        let mut arcs = Vec::new();
        let mut start = 0;
        for &b in &breaks {
            arcs.push((start, b));
            start = b + 1;
        }
        arcs.push((start, samples.len()));
        let fb = breaks.iter().map(|&b| samples[b].x).collect();
        Ok(Trajectory::new(self, samples, arcs, fb, (u_end - self.right).abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub x: f64,
    pub u: f64,
    pub du: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Samples in increasing `x`.
    pub samples: Vec<Sample>,
    /// `(start, end)` sample ranges of the monotone arcs.
    pub arcs: Vec<(usize, usize)>,
    /// Rest or turning points of the arcs.
    pub fb_locations: Vec<f64>,
    pub boundary_mismatch: f64,
    /// `(u′)⁴/4 − P(u)` per sample.
    pub first_integral: Vec<f64>,
}

impl Trajectory {
    fn new(
        p: &OneDProblem,
        samples: Vec<Sample>,
        arcs: Vec<(usize, usize)>,
        fb_locations: Vec<f64>,
        boundary_mismatch: f64,
    ) -> Trajectory {
        let first_integral = samples.iter().map(|s| s.du.powi(4) / 4.0 - p.potential(s.u)).collect();
        Trajectory { samples, arcs, fb_locations, boundary_mismatch, first_integral }
    }

    /// Linear interpolation of `u` at `x`.
    pub fn value_at(&self, x: f64) -> f64 {
        let s = &self.samples;
        let k = s.partition_point(|p| p.x < x);
        if k == 0 {
            return s[0].u;
        }
        if k >= s.len() {
            return s[s.len() - 1].u;
        }
        let (a, b) = (s[k - 1], s[k]);
        if b.x == a.x {
            return b.u;
        }
        a.u + (b.u - a.u) * (x - a.x) / (b.x - a.x)
    }

    pub fn min_u(&self) -> f64 {
        self.samples.iter().map(|s| s.u).fold(f64::INFINITY, f64::min)
    }
}

/// Largest oscillation of the first integral over a monotone arc.
pub fn first_integral_drift(tr: &Trajectory) -> f64 {
    tr.arcs
        .iter()
        .filter(|(a, b)| b > a)
        .map(|&(a, b)| {
            let v = &tr.first_integral[a..b];
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            hi - lo
        })
        .fold(0.0, f64::max)
}

/// `|u′|` where `u` crosses `threshold`, one value per crossing, or `None`
/// when there is no crossing.
pub fn fb_slope(tr: &Trajectory, threshold: f64) -> Option<Vec<f64>> {
    let s = &tr.samples;
    let mut out = Vec::new();
    for k in 1..s.len() {
        let (a, b) = (s[k - 1], s[k]);
        if (a.u - threshold) * (b.u - threshold) < 0.0 || (b.u == threshold && a.u != threshold) {
            let t = (threshold - a.u) / (b.u - a.u);
            out.push((a.du + t * (b.du - a.du)).abs());
        }
    }
    (!out.is_empty()).then_some(out)
}

/// `(4M)^{1/4}` with `M = ∫₀¹ β`.
pub fn predicted_slope(rt: &ReactionTerm) -> f64 {
    (4.0 * rt.beta_integral()).sqrt().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalReport {
    pub pass: bool,
    pub predicted: f64,
    pub tolerance: f64,
    pub max_measured: f64,
    pub points: usize,
    /// `(point, |∂u/∂x_i|)` above the bound.
    pub violations: Vec<([f64; 2], f64)>,
    pub vacuous: bool,
}

/// Checks `|∂u/∂x_axis| ≤ (4M)^{1/4} + √h` at the free-boundary nodes of a
/// 2D field: nodes with `u > threshold` that have an edge neighbour with
/// `u ≤ threshold`, at least two cells from `∂Ω`. The derivative is the
/// one-sided difference into the positivity set.
pub fn directional_bound_check(u: &ScalarField, axis: usize, rt: &ReactionTerm, threshold: f64) -> Result<DirectionalReport> {
    let g = *u.grid();
    if g.dim() != 2 || axis > 1 {
        return Err(Error::Parameter("directional check needs a 2D field and axis 0 or 1".into()));
    }
    let h = g.h();
    let predicted = predicted_slope(rt);
    let tolerance = h.sqrt();
    let stride = if axis == 0 { 1 } else { g.n() };
    let v = u.values();
    let mut max_measured = 0.0f64;
    let mut points = 0;
    let mut violations = Vec::new();
    for k in 0..g.len() {
        if g.depth(k) < 2 || v[k] <= threshold || !g.edge_neighbors(k).any(|m| v[m] <= threshold) {
            continue;
        }
        let fwd = v[k + stride];
        let bwd = v[k - stride];
        // Step away from the zero phase.
        let d = if fwd >= bwd { (fwd - v[k]) / h } else { (v[k] - bwd) / h };
        let d = d.abs();
        max_measured = max_measured.max(d);
        points += 1;
        if d > predicted + tolerance {
            violations.push((g.point(k), d));
        }
    }
    Ok(DirectionalReport {
        pass: points > 0 && violations.is_empty(),
        predicted,
        tolerance,
        max_measured,
        points,
        violations,
        vacuous: points == 0,
    })
}
