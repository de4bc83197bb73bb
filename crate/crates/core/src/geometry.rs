//! Geometric measurements on a computed field: the level decomposition at
//! height ε, distances to the ε-level region, and the constants of the
//! regularity theory (Lipschitz bound, linear growth, non-degeneracy,
//! Harnack ratio, density, porosity, Minkowski content).
//!
//! Ball measures count nodes; distances are exact against point clouds.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, Subdomain};

/// Split of the nodes at height `ε` and the interpolated interface.
#[derive(Debug, Clone)]
pub struct LevelDecomposition {
    pub eps: f64,
    /// Nodes with `u <= ε`.
    pub omega_eps: Vec<usize>,
    /// Nodes with `u > ε`.
    pub positivity: Vec<usize>,
    /// Points where `u − ε` changes sign along a grid edge.
    pub gamma_eps: Vec<[f64; 2]>,
    in_omega: Vec<bool>,
}

impl LevelDecomposition {
    pub fn new(u: &ScalarField, eps: f64) -> LevelDecomposition {
        let g = *u.grid();
        let v = u.values();
        let in_omega: Vec<bool> = v.iter().map(|&t| t <= eps).collect();
        let omega_eps = (0..g.len()).filter(|&k| in_omega[k]).collect();
        let positivity = (0..g.len()).filter(|&k| !in_omega[k]).collect();
        let mut gamma_eps = Vec::new();
        for k in 0..g.len() {
            let a = v[k] - eps;
            if a == 0.0 {
                gamma_eps.push(g.point(k));
            }
            // Forward edges only, so every edge is visited once.
            for m in g.edge_neighbors(k).filter(|&m| m > k) {
                let b = v[m] - eps;
                if a * b < 0.0 {
                    let t = a / (a - b);
                    let p = g.point(k);
                    let q = g.point(m);
                    gamma_eps.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
                }
            }
        }
        LevelDecomposition { eps, omega_eps, positivity, gamma_eps, in_omega }
    }

    #[inline]
    pub fn in_omega(&self, idx: usize) -> bool {
        self.in_omega[idx]
    }

    /// Both phases are present.
    pub fn has_interface(&self) -> bool {
        !self.omega_eps.is_empty() && !self.positivity.is_empty()
    }
}

fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

/// Exact distance from every node to a point cloud (infinite for an
/// empty cloud).
pub fn distance_to_points(grid: &Grid, points: &[[f64; 2]]) -> Vec<f64> {
    (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let x = grid.point(k);
            points.iter().map(|&p| dist(x, p)).fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// `d_ε = dist(·, Ω_ε)` on every node.
#[derive(Debug, Clone)]
pub struct DistanceField {
    pub d_eps: Vec<f64>,
}

impl DistanceField {
    /// Distances to the interface points and to the nodes of `Ω_ε` that
    /// touch the positivity set; zero on `Ω_ε`.
    pub fn new(grid: &Grid, levels: &LevelDecomposition) -> DistanceField {
        let mut cloud = levels.gamma_eps.clone();
        for &k in &levels.omega_eps {
            if grid.edge_neighbors(k).any(|m| !levels.in_omega(m)) {
                cloud.push(grid.point(k));
            }
        }
        let mut d_eps = distance_to_points(grid, &cloud);
        for &k in &levels.omega_eps {
            d_eps[k] = 0.0;
        }
        DistanceField { d_eps }
    }
}

/// Pick at most `max` items, deterministically for a given seed.
fn subsample<T: Copy>(items: &[T], max: usize, seed: u64) -> Vec<T> {
    if items.len() <= max {
        return items.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, items.len(), max).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| items[i]).collect()
}

/// Largest discrete slope over the subdomain: the central-difference
/// gradient and the difference quotients to the eight neighbours.
pub fn lipschitz_constant(u: &ScalarField, sub: &Subdomain) -> Result<f64> {
    let g = *u.grid();
    let h = g.h();
    if sub.margin() + 1e-9 * h < 2.0 * h {
        return Err(Error::Parameter(format!("subdomain margin {} is below 2h", sub.margin())));
    }
    let v = u.values();
    let members: Vec<usize> = sub.members().collect();
    if members.is_empty() {
        return Err(Error::Empty("subdomain has no nodes".into()));
    }
    let n = g.n() as isize;
    let offsets: Vec<(isize, isize)> = if g.dim() == 1 {
        vec![(-1, 0), (1, 0)]
    } else {
        (-1..=1).flat_map(|dj| (-1..=1).map(move |di| (di, dj))).filter(|&o| o != (0, 0)).collect()
    };
    let best = members
        .iter()
        .map(|&k| {
            let (i, j) = g.coords(k);
            let at = |di: isize, dj: isize| v[((j as isize + dj) * n + i as isize + di) as usize];
            let at1 = |di: isize| v[(k as isize + di) as usize];
            let mut s = if g.dim() == 1 {
                ((at1(1) - at1(-1)) / (2.0 * h)).abs()
            } else {
                let gx = (at(1, 0) - at(-1, 0)) / (2.0 * h);
                let gy = (at(0, 1) - at(0, -1)) / (2.0 * h);
                gx.hypot(gy)
            };
            for &(di, dj) in &offsets {
                let w = if g.dim() == 1 { at1(di) } else { at(di, dj) };
                let len = h * ((di * di + dj * dj) as f64).sqrt();
                s = s.max((w - v[k]).abs() / len);
            }
            s
        })
        .fold(0.0, f64::max);
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthReport {
    pub c_min: f64,
    pub c_max: f64,
    pub samples: usize,
    /// No node qualified.
    pub vacuous: bool,
}

/// `min` and `max` of `u/d_ε` over subdomain nodes with
/// `d_ε >= max(ε, 2h)`.
pub fn growth_constants(u: &ScalarField, d: &DistanceField, eps: f64, sub: &Subdomain) -> GrowthReport {
    let floor = eps.max(2.0 * u.grid().h());
    let mut c_min = f64::INFINITY;
    let mut c_max = 0.0f64;
    let mut samples = 0;
    for k in sub.members() {
        let dk = d.d_eps[k];
        if dk >= floor && dk.is_finite() {
            let r = u.get(k) / dk;
            c_min = c_min.min(r);
            c_max = c_max.max(r);
            samples += 1;
        }
    }
    if samples == 0 {
        return GrowthReport { c_min: f64::NAN, c_max: f64::NAN, samples, vacuous: true };
    }
    GrowthReport { c_min, c_max, samples, vacuous: false }
}

fn ball_sup(u: &ScalarField, x0: [f64; 2], rho: f64) -> f64 {
    u.grid().nodes_in_ball(x0, rho).into_iter().map(|k| u.get(k)).fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NondegeneracyReport {
    /// `min sup_{B_ρ(x₀)} u / ρ`.
    pub min_ratio: f64,
    /// `max sup_{B_ρ(x₀)} u / (ρ + u(x₀))`.
    pub max_upper_ratio: f64,
    pub samples: usize,
    /// Balls that left the subdomain or had `ρ < ε`.
    pub skipped: usize,
    pub vacuous: bool,
}

/// Ball suprema around positivity nodes next to the interface (within
/// `√dim · h` of `Ω_ε`), for each `ρ` in `rhos`.
pub fn nondegeneracy(
    u: &ScalarField,
    levels: &LevelDecomposition,
    d: &DistanceField,
    sub: &Subdomain,
    rhos: &[f64],
    max_samples: usize,
    seed: u64,
) -> NondegeneracyReport {
    let g = *u.grid();
    let reach = g.h() * (g.dim() as f64).sqrt() * (1.0 + 1e-9);
    let cands: Vec<usize> =
        levels.positivity.iter().copied().filter(|&k| sub.contains(k) && d.d_eps[k] <= reach).collect();
    let centers = subsample(&cands, max_samples, seed);
    let mut min_ratio = f64::INFINITY;
    let mut max_upper_ratio = 0.0f64;
    let mut samples = 0;
    let mut skipped = 0;
    for &k in &centers {
        let x0 = g.point(k);
        for &rho in rhos {
            if rho < levels.eps || !sub.contains_ball(x0, rho) {
                skipped += 1;
                continue;
            }
            let s = ball_sup(u, x0, rho);
            min_ratio = min_ratio.min(s / rho);
            max_upper_ratio = max_upper_ratio.max(s / (rho + u.get(k)));
            samples += 1;
        }
    }
    let vacuous = samples == 0;
    if vacuous {
        min_ratio = f64::NAN;
        max_upper_ratio = f64::NAN;
    }
    NondegeneracyReport { min_ratio, max_upper_ratio, samples, skipped, vacuous }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarnackReport {
    /// `max sup/inf` over `B_{d/2}(x₀)`.
    pub ratio: f64,
    pub samples: usize,
    /// Some ball had a nonpositive infimum.
    pub degenerate: bool,
    pub vacuous: bool,
}

/// Touching-ball Harnack ratio over subdomain nodes with
/// `d_ε >= max(ε, 4h)`; the ball is `B_{d_ε/2}(x₀)`.
pub fn harnack_ratio(
    u: &ScalarField,
    d: &DistanceField,
    eps: f64,
    sub: &Subdomain,
    max_samples: usize,
    seed: u64,
) -> HarnackReport {
    let g = *u.grid();
    let floor = eps.max(4.0 * g.h());
    let cands: Vec<usize> = sub.members().filter(|&k| d.d_eps[k] >= floor && d.d_eps[k].is_finite()).collect();
    let centers = subsample(&cands, max_samples, seed);
    let mut ratio = 0.0f64;
    let mut degenerate = false;
    for &k in &centers {
        let nodes = g.nodes_in_ball(g.point(k), 0.5 * d.d_eps[k]);
        let (lo, hi) = nodes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &m| {
            let v = u.get(m);
            (lo.min(v), hi.max(v))
        });
        if lo <= 0.0 {
            degenerate = true;
            ratio = f64::INFINITY;
        } else {
            ratio = ratio.max(hi / lo);
        }
    }
    let vacuous = centers.is_empty();
    HarnackReport { ratio: if vacuous { f64::NAN } else { ratio }, samples: centers.len(), degenerate, vacuous }
}

fn check_ball(g: &Grid, x0: [f64; 2], rho: f64) -> Result<()> {
    if !g.contains(x0) || g.point_dist_to_boundary(x0) + 1e-9 * g.h() < rho {
        return Err(Error::Domain(format!("ball of radius {rho} at {x0:?} leaves the domain")));
    }
    Ok(())
}

/// Fraction of the nodes of `B_ρ(x₀)` where `u > ε`.
pub fn density(u: &ScalarField, eps: f64, x0: [f64; 2], rho: f64) -> Result<f64> {
    let g = u.grid();
    if rho < g.h() {
        return Err(Error::Parameter(format!("ball radius {rho} is below one cell")));
    }
    check_ball(g, x0, rho)?;
    let nodes = g.nodes_in_ball(x0, rho);
    let pos = nodes.iter().filter(|&&k| u.get(k) > eps).count();
    Ok(pos as f64 / nodes.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityReport {
    pub c0: f64,
    pub samples: usize,
    pub vacuous: bool,
}

/// `min density(u, ε, x₀, ρ)` over interface points `x₀` and `ρ ∈ rhos`,
/// keeping only balls inside the subdomain.
pub fn interface_density(
    u: &ScalarField,
    levels: &LevelDecomposition,
    sub: &Subdomain,
    rhos: &[f64],
    max_samples: usize,
    seed: u64,
) -> Result<DensityReport> {
    let centers = subsample(&levels.gamma_eps, max_samples, seed);
    let mut c0 = f64::INFINITY;
    let mut samples = 0;
    for &x0 in &centers {
        for &rho in rhos {
            if !sub.contains_ball(x0, rho) {
                continue;
            }
            c0 = c0.min(density(u, levels.eps, x0, rho)?);
            samples += 1;
        }
    }
    Ok(DensityReport { c0: if samples == 0 { f64::NAN } else { c0 }, samples, vacuous: samples == 0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PorosityReport {
    pub delta: f64,
    pub samples: usize,
    pub vacuous: bool,
}

/// Porosity of the point set `E` (with node distances `dist_e`): for each
/// sampled `x ∈ E` and `r`, the largest `δ` with a node `y` such that
/// `B_{δr}(y) ⊂ B_r(x) \ E`; the minimum over samples.
pub fn porosity(
    grid: &Grid,
    e: &[[f64; 2]],
    dist_e: &[f64],
    big_r: f64,
    rs: &[f64],
    max_samples: usize,
    seed: u64,
) -> Result<PorosityReport> {
    if let Some(&r) = rs.iter().find(|&&r| !(r > 0.0 && r < big_r)) {
        return Err(Error::Parameter(format!("porosity radius {r} outside (0, {big_r})")));
    }
    let centers = subsample(e, max_samples, seed);
    let mut delta = f64::INFINITY;
    let mut samples = 0;
    for &x in &centers {
        for &r in rs {
            if !grid.contains(x) || grid.point_dist_to_boundary(x) < r {
                continue;
            }
            let best = grid
                .nodes_in_ball(x, r)
                .into_iter()
                .map(|k| (r - dist(grid.point(k), x)).min(dist_e[k]))
                .fold(0.0, f64::max);
            delta = delta.min(best / r);
            samples += 1;
        }
    }
    Ok(PorosityReport { delta: if samples == 0 { f64::NAN } else { delta }, samples, vacuous: samples == 0 })
}

/// `(δ, |𝒩_δ(E) ∩ B_ρ(x₀)| / (2δ))` with node-counted volume, for the `δ`
/// in `deltas` that are at least `2h`; the skipped ones are returned
/// separately.
pub fn minkowski_content(
    grid: &Grid,
    dist_e: &[f64],
    deltas: &[f64],
    x0: [f64; 2],
    rho: f64,
) -> Result<(Vec<(f64, f64)>, Vec<f64>)> {
    check_ball(grid, x0, rho)?;
    let cell = grid.h().powi(grid.dim() as i32);
    let nodes = grid.nodes_in_ball(x0, rho);
    let mut out = Vec::new();
    let mut skipped = Vec::new();
    for &delta in deltas {
        if delta < 2.0 * grid.h() * (1.0 - 1e-12) {
            skipped.push(delta);
            continue;
        }
        let count = nodes.iter().filter(|&&k| dist_e[k] <= delta).count();
        out.push((delta, count as f64 * cell / (2.0 * delta)));
    }
    Ok((out, skipped))
}

/// Average of `u` over the sphere `∂B_ρ(x₀)` by equispaced angles and
/// bilinear interpolation.
pub fn mean_boundary_value(u: &ScalarField, x0: [f64; 2], rho: f64) -> Result<f64> {
    let g = u.grid();
    if !(rho > 0.0) {
        return Err(Error::Parameter(format!("sphere radius must be positive, got {rho}")));
    }
    check_ball(g, x0, rho)?;
    if g.dim() == 1 {
        return Ok(0.5 * (u.interpolate([x0[0] - rho, 0.0]) + u.interpolate([x0[0] + rho, 0.0])));
    }
    let m = ((std::f64::consts::TAU * rho / g.h()).ceil() as usize * 4).max(64);
    let sum: f64 = (0..m)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / m as f64;
            u.interpolate([x0[0] + rho * t.cos(), x0[1] + rho * t.sin()])
        })
        .sum();
    Ok(sum / m as f64)
}

/// Parameters of a full geometry pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    /// Distance of the inner subdomain from `∂Ω`.
    pub margin: f64,
    /// Ball radii for non-degeneracy and density, in cells.
    pub rho_cells: Vec<f64>,
    /// Porosity radii in cells and the outer radius `R` in cells.
    pub porosity_cells: Vec<f64>,
    pub porosity_big_r_cells: f64,
    /// Neighbourhood widths for the Minkowski ratios, in cells.
    pub minkowski_cells: Vec<f64>,
    /// Ball for the Minkowski ratios; `None` uses the largest ball centred
    /// in the box that fits in the subdomain.
    pub minkowski_ball: Option<([f64; 2], f64)>,
    pub max_samples: usize,
    pub seed: u64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            margin: 0.1,
            rho_cells: vec![8.0, 16.0],
            porosity_cells: vec![8.0, 16.0],
            porosity_big_r_cells: 32.0,
            minkowski_cells: vec![4.0, 8.0, 16.0],
            minkowski_ball: None,
            max_samples: 256,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryReport {
    pub eps: f64,
    pub lipschitz_const: f64,
    pub growth: GrowthReport,
    pub nondeg: NondegeneracyReport,
    pub harnack: HarnackReport,
    pub density: DensityReport,
    pub porosity: PorosityReport,
    pub minkowski: Vec<(f64, f64)>,
    pub interface_points: usize,
}

impl GeometryReport {
    /// `(name, value, sample count)` rows.
    pub fn rows(&self) -> Vec<(String, f64, usize)> {
        let mut rows = vec![
            ("lipschitz_const".to_string(), self.lipschitz_const, 0),
            ("growth_c_min".into(), self.growth.c_min, self.growth.samples),
            ("growth_C_max".into(), self.growth.c_max, self.growth.samples),
            ("nondeg_c".into(), self.nondeg.min_ratio, self.nondeg.samples),
            ("nondeg_upper".into(), self.nondeg.max_upper_ratio, self.nondeg.samples),
            ("harnack_C".into(), self.harnack.ratio, self.harnack.samples),
            ("density_c0".into(), self.density.c0, self.density.samples),
            ("porosity_delta".into(), self.porosity.delta, self.porosity.samples),
        ];
        for &(d, r) in &self.minkowski {
            rows.push((format!("minkowski_{d:e}"), r, self.interface_points));
        }
        rows
    }
}

/// Runs every measurement on `u` at height `eps`.
pub fn measure(u: &ScalarField, eps: f64, cfg: &GeometryConfig) -> Result<GeometryReport> {
    let g = *u.grid();
    let h = g.h();
    let sub = Subdomain::new(g, cfg.margin)?;
    let levels = LevelDecomposition::new(u, eps);
    let d = DistanceField::new(&g, &levels);
    let rhos: Vec<f64> = cfg.rho_cells.iter().map(|c| c * h).collect();
    let lipschitz_const = lipschitz_constant(u, &sub)?;
    let growth = growth_constants(u, &d, eps, &sub);
    let nondeg = nondegeneracy(u, &levels, &d, &sub, &rhos, cfg.max_samples, cfg.seed);
    let harnack = harnack_ratio(u, &d, eps, &sub, cfg.max_samples, cfg.seed);
    let density = interface_density(u, &levels, &sub, &rhos, cfg.max_samples, cfg.seed)?;
    let dist_e = distance_to_points(&g, &levels.gamma_eps);
    let rs: Vec<f64> = cfg.porosity_cells.iter().map(|c| c * h).collect();
    let inner: Vec<[f64; 2]> =
        levels.gamma_eps.iter().copied().filter(|&p| g.point_dist_to_boundary(p) >= cfg.margin).collect();
    let porosity = porosity(&g, &inner, &dist_e, cfg.porosity_big_r_cells * h, &rs, cfg.max_samples, cfg.seed)?;
    let (x0, rho) = cfg.minkowski_ball.unwrap_or_else(|| {
        let lo = g.lo();
        let hi = g.hi();
        let mut c = [0.0; 2];
        for k in 0..g.dim() {
            c[k] = 0.5 * (lo[k] + hi[k]);
        }
        (c, g.point_dist_to_boundary(c) - cfg.margin)
    });
    let deltas: Vec<f64> = cfg.minkowski_cells.iter().map(|c| c * h).collect();
    let (minkowski, _) = minkowski_content(&g, &dist_e, &deltas, x0, rho)?;
    Ok(GeometryReport {
        eps,
        lipschitz_const,
        growth,
        nondeg,
        harnack,
        density,
        porosity,
        minkowski,
        interface_points: levels.gamma_eps.len(),
    })
}
