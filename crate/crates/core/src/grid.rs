//! Uniform Cartesian grids on axis-aligned intervals and rectangles, scalar
//! fields sampled on their nodes, interior subdomains and the text snapshot
//! format.
//!
//! Nodes are ordered row-major: in 2D the node `(i, j)` (i along x, j along
//! y) has index `j * n + i`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const SNAPSHOT_MAGIC: &str = "INFLAP-FIELD v1";

/// Relative tolerance used when comparing per-axis spacings.
const SPACING_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    lo: [f64; 2],
    h: f64,
    n: usize,
}

impl Grid {
    /// Builds a grid with `n` nodes per axis spanning the box `[lo, hi]`.
    /// The spacing must come out equal on every axis.
    pub fn new(dim: usize, lo: &[f64], hi: &[f64], n: usize) -> Result<Grid> {
        if dim != 1 && dim != 2 {
            return Err(Error::Grid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if lo.len() != dim || hi.len() != dim {
            return Err(Error::Grid(format!(
                "corners must have {dim} components (got {} and {})",
                lo.len(),
                hi.len()
            )));
        }
        if n < 3 {
            return Err(Error::Grid(format!("need at least 3 nodes per axis, got {n}")));
        }
        let mut spacing = [0.0; 2];
        for k in 0..dim {
            if !(lo[k].is_finite() && hi[k].is_finite()) || hi[k] <= lo[k] {
                return Err(Error::Grid(format!(
                    "corners not ordered on axis {k}: {} .. {}",
                    lo[k], hi[k]
                )));
            }
            spacing[k] = (hi[k] - lo[k]) / (n - 1) as f64;
        }
        if dim == 2 && (spacing[0] - spacing[1]).abs() > SPACING_RTOL * spacing[0].max(spacing[1]) {
            return Err(Error::Grid(format!(
                "unequal spacing across axes: h_x = {}, h_y = {}",
                spacing[0], spacing[1]
            )));
        }
        let mut lo2 = [0.0; 2];
        lo2[..dim].copy_from_slice(&lo[..dim]);
        Ok(Grid { dim, lo: lo2, h: spacing[0], n })
    }

    /// Builds a grid from its lower corner and spacing (the snapshot header
    /// stores exactly these numbers).
    pub fn from_spacing(dim: usize, lo: &[f64], h: f64, n: usize) -> Result<Grid> {
        if dim != 1 && dim != 2 {
            return Err(Error::Grid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if lo.len() != dim {
            return Err(Error::Grid(format!("lower corner must have {dim} components")));
        }
        if n < 3 {
            return Err(Error::Grid(format!("need at least 3 nodes per axis, got {n}")));
        }
        if !(h.is_finite() && h > 0.0) || lo.iter().any(|v| !v.is_finite()) {
            return Err(Error::Grid(format!("bad spacing {h} or corner {lo:?}")));
        }
        let mut lo2 = [0.0; 2];
        lo2[..dim].copy_from_slice(lo);
        Ok(Grid { dim, lo: lo2, h, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nodes per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn lo(&self) -> [f64; 2] {
        self.lo
    }

    pub fn hi(&self) -> [f64; 2] {
        let span = self.h * (self.n - 1) as f64;
        let mut hi = [0.0; 2];
        for k in 0..self.dim {
            hi[k] = self.lo[k] + span;
        }
        hi
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        if self.dim == 1 {
            (idx, 0)
        } else {
            (idx % self.n, idx / self.n)
        }
    }

    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.coords(idx);
        if self.dim == 1 {
            [self.lo[0] + i as f64 * self.h, 0.0]
        } else {
            [self.lo[0] + i as f64 * self.h, self.lo[1] + j as f64 * self.h]
        }
    }

    /// Number of cells between the node and the nearest side of the box.
    #[inline]
    pub fn depth(&self, idx: usize) -> usize {
        let (i, j) = self.coords(idx);
        let last = self.n - 1;
        let dx = i.min(last - i);
        if self.dim == 1 {
            dx
        } else {
            dx.min(j.min(last - j))
        }
    }

    pub fn dist_to_boundary(&self, idx: usize) -> f64 {
        self.depth(idx) as f64 * self.h
    }

    #[inline]
    pub fn is_boundary(&self, idx: usize) -> bool {
        self.depth(idx) == 0
    }

    pub fn node_class(&self, idx: usize) -> NodeClass {
        if self.is_boundary(idx) {
            NodeClass::Boundary
        } else {
            NodeClass::Interior
        }
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| !self.is_boundary(k)).collect()
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.is_boundary(k)).collect()
    }

    /// Euclidean distance from a point to the boundary of the box, for
    /// points inside it.
    pub fn point_dist_to_boundary(&self, p: [f64; 2]) -> f64 {
        let hi = self.hi();
        (0..self.dim)
            .map(|k| (p[k] - self.lo[k]).min(hi[k] - p[k]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Length of the box diagonal.
    pub fn diameter(&self) -> f64 {
        self.h * (self.n - 1) as f64 * (self.dim as f64).sqrt()
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let hi = self.hi();
        (0..self.dim).all(|k| p[k] >= self.lo[k] && p[k] <= hi[k])
    }

    /// Nodes `x` with `|x - center| <= radius`.
    pub fn nodes_in_ball(&self, center: [f64; 2], radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        let h = self.h;
        let last = (self.n - 1) as isize;
        let lo_i = (((center[0] - radius - self.lo[0]) / h).floor() as isize).clamp(0, last);
        let hi_i = (((center[0] + radius - self.lo[0]) / h).ceil() as isize).clamp(0, last);
        let r2 = radius * radius;
        if self.dim == 1 {
            for i in lo_i..=hi_i {
                let x = self.lo[0] + i as f64 * h;
                if (x - center[0]) * (x - center[0]) <= r2 {
                    out.push(i as usize);
                }
            }
            return out;
        }
        let lo_j = (((center[1] - radius - self.lo[1]) / h).floor() as isize).clamp(0, last);
        let hi_j = (((center[1] + radius - self.lo[1]) / h).ceil() as isize).clamp(0, last);
        for j in lo_j..=hi_j {
            let y = self.lo[1] + j as f64 * h;
            for i in lo_i..=hi_i {
                let x = self.lo[0] + i as f64 * h;
                let d2 = (x - center[0]).powi(2) + (y - center[1]).powi(2);
                if d2 <= r2 {
                    out.push(self.index(i as usize, j as usize));
                }
            }
        }
        out
    }

    /// Piecewise (bi)linear interpolation of nodal values at `p`; points
    /// outside the box are clamped onto it.
    pub fn interpolate(&self, values: &[f64], p: [f64; 2]) -> f64 {
        let last = (self.n - 1) as f64;
        let gx = ((p[0] - self.lo[0]) / self.h).clamp(0.0, last);
        let i0 = (gx.floor() as usize).min(self.n - 2);
        let tx = gx - i0 as f64;
        if self.dim == 1 {
            return values[i0] * (1.0 - tx) + values[i0 + 1] * tx;
        }
        let gy = ((p[1] - self.lo[1]) / self.h).clamp(0.0, last);
        let j0 = (gy.floor() as usize).min(self.n - 2);
        let ty = gy - j0 as f64;
        let k = self.index(i0, j0);
        let n = self.n;
        (values[k] * (1.0 - tx) + values[k + 1] * tx) * (1.0 - ty)
            + (values[k + n] * (1.0 - tx) + values[k + n + 1] * tx) * ty
    }

    /// Grid neighbours sharing an edge with `idx`.
    pub fn edge_neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = self.coords(idx);
        let n = self.n;
        let dim = self.dim;
        let mut buf = [usize::MAX; 4];
        if i > 0 {
            buf[0] = idx - 1;
        }
        if i + 1 < n {
            buf[1] = idx + 1;
        }
        if dim == 2 {
            if j > 0 {
                buf[2] = idx - n;
            }
            if j + 1 < n {
                buf[3] = idx + n;
            }
        }
        buf.into_iter().filter(|&k| k != usize::MAX)
    }
}

/// Node-indexed real values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> ScalarField {
        ScalarField { grid, values: vec![c; grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> ScalarField {
        let values = (0..grid.len()).map(|k| f(grid.point(k))).collect();
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn interpolate(&self, p: [f64; 2]) -> f64 {
        self.grid.interpolate(&self.values, p)
    }

    /// Largest absolute difference to another field on the same grid.
    pub fn sup_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest boundary value (the constant `𝓐` bounding the data).
    pub fn boundary_sup(&self) -> f64 {
        self.grid
            .boundary_nodes()
            .into_iter()
            .map(|k| self.values[k])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Writes the snapshot text format: a magic line, a header line
    /// `dim n h lo...`, then one value per line with 17 significant digits.
    pub fn save_snapshot(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_snapshot_string())?;
        Ok(())
    }

    pub fn to_snapshot_string(&self) -> String {
        let g = &self.grid;
        let mut s = String::with_capacity(24 * (self.values.len() + 2));
        s.push_str(SNAPSHOT_MAGIC);
        s.push('\n');
        let _ = write!(s, "{} {} {:.16e}", g.dim, g.n, g.h);
        for k in 0..g.dim {
            let _ = write!(s, " {:.16e}", g.lo[k]);
        }
        s.push('\n');
        for v in &self.values {
            let _ = writeln!(s, "{v:.16e}");
        }
        s
    }

    pub fn load_snapshot(path: impl AsRef<Path>) -> Result<ScalarField> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::parse_snapshot(&text).map_err(|msg| Error::Snapshot {
            path: path.display().to_string(),
            msg,
        })
    }

    pub fn parse_snapshot(text: &str) -> std::result::Result<ScalarField, String> {
        let mut lines = text.lines();
        match lines.next() {
            Some(l) if l.trim() == SNAPSHOT_MAGIC => {}
            Some(l) => return Err(format!("line 1: expected `{SNAPSHOT_MAGIC}`, found `{l}`")),
            None => return Err("empty file".into()),
        }
        let header = lines.next().ok_or("line 2: missing header")?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() < 3 {
            return Err(format!("line 2: malformed header `{header}`"));
        }
        let dim: usize = fields[0].parse().map_err(|_| format!("line 2: bad dim `{}`", fields[0]))?;
        let n: usize = fields[1].parse().map_err(|_| format!("line 2: bad n `{}`", fields[1]))?;
        let h: f64 = fields[2].parse().map_err(|_| format!("line 2: bad h `{}`", fields[2]))?;
        if fields.len() != 3 + dim {
            return Err(format!("line 2: expected {} entries for dim {dim}, found {}", 3 + dim, fields.len()));
        }
        let lo: Vec<f64> = fields[3..]
            .iter()
            .map(|t| t.parse::<f64>().map_err(|_| format!("line 2: bad corner `{t}`")))
            .collect::<std::result::Result<_, _>>()?;
        let grid = Grid::from_spacing(dim, &lo, h, n).map_err(|e| format!("line 2: {e}"))?;
        let mut values = Vec::with_capacity(grid.len());
        for (k, line) in lines.enumerate() {
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let v: f64 = t.parse().map_err(|_| format!("line {}: bad value `{t}`", k + 3))?;
            values.push(v);
        }
        if values.len() != grid.len() {
            return Err(format!(
                "node count mismatch: header implies {} values, file has {}",
                grid.len(),
                values.len()
            ));
        }
        Ok(ScalarField { grid, values })
    }
}

/// Nodes at distance at least `margin` from the boundary of the box.
#[derive(Debug, Clone)]
pub struct Subdomain {
    grid: Grid,
    margin: f64,
    members: Vec<bool>,
}

impl Subdomain {
    pub fn new(grid: Grid, margin: f64) -> Result<Subdomain> {
        if !(margin >= 0.0) {
            return Err(Error::Parameter(format!("margin must be nonnegative, got {margin}")));
        }
        let slack = 1e-9 * grid.h();
        let members = (0..grid.len()).map(|k| grid.dist_to_boundary(k) + slack >= margin).collect();
        Ok(Subdomain { grid, margin, members })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    #[inline]
    pub fn contains(&self, idx: usize) -> bool {
        self.members[idx]
    }

    /// True when the closed ball lies at distance `>= margin` from `∂Ω`.
    pub fn contains_ball(&self, center: [f64; 2], radius: f64) -> bool {
        self.grid.contains(center)
            && self.grid.point_dist_to_boundary(center) - radius + 1e-9 * self.grid.h() >= self.margin
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().enumerate().filter(|(_, &m)| m).map(|(k, _)| k)
    }

    pub fn count(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dim_spacing() {
        let g = Grid::new(1, &[-1.0], &[1.0], 5).unwrap();
        assert_eq!(g.h(), 0.5);
        assert!(g.is_boundary(0) && g.is_boundary(4));
        assert_eq!(g.point(0)[0], -1.0);
        assert_eq!(g.point(4)[0], 1.0);
        assert_eq!(g.interior_nodes(), vec![1, 2, 3]);
    }

    #[test]
    fn three_by_three_has_one_interior_node() {
        let g = Grid::new(2, &[0.0, 0.0], &[1.0, 1.0], 3).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.boundary_nodes().len(), 8);
        assert_eq!(g.interior_nodes(), vec![4]);
        assert_eq!(g.node_class(4), NodeClass::Interior);
    }

    #[test]
    fn unequal_spacing_rejected() {
        assert!(Grid::new(2, &[0.0, 0.0], &[2.0, 1.0], 3).is_err());
        assert!(Grid::new(3, &[0.0; 3], &[1.0; 3], 3).is_err());
        assert!(Grid::new(1, &[0.0], &[1.0], 2).is_err());
        assert!(Grid::new(1, &[1.0], &[0.0], 4).is_err());
    }

    #[test]
    fn classification_is_partition() {
        let g = Grid::new(2, &[0.0, 0.0], &[1.0, 1.0], 7).unwrap();
        let inner = g.interior_nodes();
        let outer = g.boundary_nodes();
        assert_eq!(inner.len() + outer.len(), g.len());
        assert!(inner.iter().all(|k| !outer.contains(k)));
        assert_eq!(inner.len(), 25);
    }

    #[test]
    fn row_major_order() {
        let g = Grid::new(2, &[0.0, 0.0], &[1.0, 1.0], 3).unwrap();
        assert_eq!(g.point(1), [0.5, 0.0]);
        assert_eq!(g.point(3), [0.0, 0.5]);
    }

    #[test]
    fn interpolation_reproduces_affine() {
        let g = Grid::new(2, &[0.0, 0.0], &[1.0, 1.0], 9).unwrap();
        let f = ScalarField::from_fn(g, |p| 2.0 * p[0] - 3.0 * p[1] + 0.5);
        let v = f.interpolate([0.3, 0.77]);
        assert!((v - (0.6 - 2.31 + 0.5)).abs() < 1e-14);
    }

    #[test]
    fn snapshot_round_trip_constant_and_linspace() {
        let g = Grid::new(1, &[-1.0], &[1.0], 11).unwrap();
        let zero = ScalarField::constant(g, 0.0);
        let text = zero.to_snapshot_string();
        assert!(text.starts_with("INFLAP-FIELD v1\n1 11 "));
        assert_eq!(ScalarField::parse_snapshot(&text).unwrap(), zero);

        let g2 = Grid::new(2, &[0.0, 0.0], &[1.0, 1.0], 5).unwrap();
        let lin = ScalarField::new(g2, (0..25).map(|k| k as f64 / 7.0).collect()).unwrap();
        let back = ScalarField::parse_snapshot(&lin.to_snapshot_string()).unwrap();
        assert_eq!(back.values(), lin.values());
        assert_eq!(back.grid(), lin.grid());
    }

    #[test]
    fn snapshot_errors() {
        let g = Grid::new(1, &[0.0], &[1.0], 4).unwrap();
        let text = ScalarField::constant(g, 1.0).to_snapshot_string();
        let truncated: String = text.lines().take(4).map(|l| format!("{l}\n")).collect();
        let err = ScalarField::parse_snapshot(&truncated).unwrap_err();
        assert!(err.contains("node count mismatch"), "{err}");
        assert!(ScalarField::parse_snapshot("INFLAP-FIELD v2\n").is_err());
        assert!(ScalarField::parse_snapshot("INFLAP-FIELD v1\n1 x 0.1 0\n").is_err());
    }

    #[test]
    fn subdomain_margin() {
        let g = Grid::new(2, &[0.0, 0.0], &[1.0, 1.0], 11).unwrap();
        let sub = Subdomain::new(g, 0.2).unwrap();
        assert!(sub.members().all(|k| g.dist_to_boundary(k) >= 0.2 - 1e-12));
        assert_eq!(sub.count(), 49);
    }

    #[test]
    fn ball_query() {
        let g = Grid::new(2, &[0.0, 0.0], &[1.0, 1.0], 11).unwrap();
        let ball = g.nodes_in_ball([0.5, 0.5], 0.1 + 1e-12);
        assert_eq!(ball.len(), 5);
    }
}
