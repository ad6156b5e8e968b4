//! Brute-force oracles and property checks: exhaustive grid capacity,
//! random perturbation around Kuhn-Tucker points, connectivity of the
//! level sets `D(a) = {p : I(p) >= a}` on a lattice, and the boundary
//! determinants whose zero set traces the edges of a chain-rule region.

use std::collections::{HashMap, VecDeque};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::elementary::binomial;
use crate::error::{Error, Result};
use crate::info::{self, check_order, log_average_partials};
use crate::model::{ChannelMatrix, FaceProduct, IpdProduct, MacType};
use crate::optimize::{kt_check, POSITIVE_MASS};

/// Point limit for [`grid_capacity`].
pub const GRID_GUARD: u128 = 100_000_000;
/// Point limit for lattices whose nodes are all kept in memory.
pub const LEVEL_SET_GUARD: u128 = 10_000_000;
/// Slack allowed above `I(p*)` before a perturbed point counts as better.
pub const LOCAL_MAX_SLACK: f64 = 1e-9;

/// Barycentric lattice on a product of simplices: user `k` takes the
/// points `c / (resolution - 1)` for compositions `c` of `resolution - 1`
/// into `parts[k]` nonnegative parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSpec {
    resolution: usize,
    parts: Vec<usize>,
    total: u128,
}

impl GridSpec {
    pub fn new(resolution: usize, parts: Vec<usize>) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid resolution must be >= 2, got {resolution}"
            )));
        }
        if parts.is_empty() || parts.contains(&0) {
            return Err(Error::InvalidArgument("every user needs at least one grid part".into()));
        }
        let total = lattice_total(resolution, &parts);
        Ok(Self {
            resolution,
            parts,
            total,
        })
    }

    /// Grid over every user's full simplex.
    pub fn for_type(resolution: usize, mac_type: &MacType) -> Result<Self> {
        Self::new(resolution, mac_type.inputs().to_vec())
    }

    /// Grid over the sub-simplices of `face`.
    pub fn for_face(resolution: usize, face: &FaceProduct) -> Result<Self> {
        Self::new(resolution, face.sizes())
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    /// Number of product points, saturating at `u128::MAX`.
    pub fn total(&self) -> u128 {
        self.total
    }

    /// Lattice spacing `1 / (resolution - 1)`.
    pub fn step(&self) -> f64 {
        1.0 / (self.resolution - 1) as f64
    }

    fn guard(&self, limit: u128) -> Result<()> {
        if self.total <= limit {
            return Ok(());
        }
        let mut lo = 2;
        if lattice_total(lo, &self.parts) > limit {
            return Err(Error::GuardExceeded {
                points: self.total,
                limit,
                diagnostic: "even resolution 2 exceeds the limit".into(),
            });
        }
        let mut hi = self.resolution;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if lattice_total(mid, &self.parts) <= limit {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Err(Error::GuardExceeded {
            points: self.total,
            limit,
            diagnostic: format!("largest admissible resolution is {lo}"),
        })
    }
}

fn lattice_total(resolution: usize, parts: &[usize]) -> u128 {
    parts
        .iter()
        .map(|&f| binomial(resolution + f - 2, f - 1))
        .fold(1u128, |a, b| a.saturating_mul(b))
}

/// Compositions of `total` into `parts` parts, first part varying slowest.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(left: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in (0..=left).rev() {
            prefix.push(c);
            rec(left - c, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(total, parts, &mut Vec::new(), &mut out);
    out
}

/// The materialized lattice: per-user composition lists mapped into the
/// full alphabet through the face supports.
struct Lattice {
    step: f64,
    supports: Vec<Vec<usize>>,
    sizes: Vec<usize>,
    points: Vec<Vec<Vec<usize>>>,
}

impl Lattice {
    fn new(channel: &ChannelMatrix, grid: &GridSpec, face: Option<&FaceProduct>) -> Result<Self> {
        let t = channel.mac_type();
        let full;
        let face = match face {
            Some(f) => {
                f.check_type(t)?;
                f
            }
            None => {
                full = FaceProduct::full(t);
                &full
            }
        };
        if grid.parts() != face.sizes().as_slice() {
            return Err(Error::SizeMismatch {
                expected: format!("grid parts {:?}", face.sizes()),
                found: format!("{:?}", grid.parts()),
            });
        }
        let points = grid
            .parts()
            .iter()
            .map(|&f| compositions(grid.resolution() - 1, f))
            .collect();
        Ok(Self {
            step: grid.step(),
            supports: face.supports().to_vec(),
            sizes: t.inputs().to_vec(),
            points,
        })
    }

    fn len(&self) -> usize {
        self.points.iter().map(Vec::len).product()
    }

    /// Per-user composition indices of point `idx`, user 1 slowest.
    fn coords(&self, mut idx: usize) -> Vec<usize> {
        let mut c = vec![0; self.points.len()];
        for k in (0..self.points.len()).rev() {
            let n = self.points[k].len();
            c[k] = idx % n;
            idx /= n;
        }
        c
    }

    fn index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.points)
            .fold(0, |acc, (&c, pts)| acc * pts.len() + c)
    }

    fn ipd(&self, idx: usize) -> IpdProduct {
        let parts = self
            .coords(idx)
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let mut v = vec![0.0; self.sizes[k]];
                for (&i, &units) in self.supports[k].iter().zip(&self.points[k][c]) {
                    v[i] = units as f64 * self.step;
                }
                v
            })
            .collect();
        IpdProduct::from_unnormalized(parts)
    }
}

/// Best grid point and its error bar.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOptimum {
    pub value: f64,
    pub argmax: IpdProduct,
    /// `value + bound` bounds the maximum over the gridded domain.
    pub bound: f64,
    /// Largest finite `|J| + 1` over the grid.
    pub lipschitz: f64,
    pub points: u128,
}

/// Exhaustive maximum of `I` over the lattice, on `face` when given.
///
/// Every lattice point lies within `step * (f_k - 1)` in l1 of any point of
/// user `k`'s simplex cell, so the true maximum exceeds the grid maximum by
/// at most `L * step * Σ_k (f_k - 1)` with `L` the gradient bound.
pub fn grid_capacity(
    channel: &ChannelMatrix,
    grid: &GridSpec,
    face: Option<&FaceProduct>,
) -> Result<GridOptimum> {
    grid.guard(GRID_GUARD)?;
    let lattice = Lattice::new(channel, grid, face)?;
    let evals: Vec<(f64, f64)> = (0..lattice.len())
        .into_par_iter()
        .map(|idx| {
            let p = lattice.ipd(idx);
            let value = info::mutual_information(channel, &p).unwrap_or(f64::NAN);
            let grad = info::scores(channel, &p)
                .map(|js| {
                    js.iter()
                        .flatten()
                        .filter(|j| j.is_finite())
                        .fold(0.0f64, |a, j| a.max(j.abs()))
                })
                .unwrap_or(0.0);
            (value, grad + 1.0)
        })
        .collect();
    let mut best = 0;
    for (idx, (v, _)) in evals.iter().enumerate() {
        if *v > evals[best].0 {
            best = idx;
        }
    }
    let lipschitz = evals.iter().fold(0.0f64, |a, e| a.max(e.1));
    let spread: usize = grid.parts().iter().map(|f| f - 1).sum();
    Ok(GridOptimum {
        value: evals[best].0,
        argmax: lattice.ipd(best),
        bound: lipschitz * grid.step() * spread as f64,
        lipschitz,
        points: grid.total(),
    })
}

/// Outcome of a random perturbation test.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMaxReport {
    pub passed: bool,
    pub value: f64,
    /// Largest `I(perturbed) - I(p*)` seen; negative when every sample lost.
    pub worst_gain: f64,
    pub worst_ipd: IpdProduct,
    pub samples: usize,
    /// Realized max-norm distance bound; clamping and renormalizing can
    /// stretch the nominal radius by up to a factor of two.
    pub radius_bound: f64,
}

/// Draws `samples` perturbations of `p_star` (each entry moved uniformly in
/// `[-radius, radius]`, then clamped at zero and renormalized) and checks
/// that none improves `I` by more than [`LOCAL_MAX_SLACK`].
pub fn check_local_max(
    channel: &ChannelMatrix,
    p_star: &IpdProduct,
    radius: f64,
    samples: usize,
    seed: u64,
    kt_tol: f64,
) -> Result<LocalMaxReport> {
    if !(radius > 0.0) || samples == 0 {
        return Err(Error::InvalidArgument(
            "radius must be positive and samples nonzero".into(),
        ));
    }
    let kt = kt_check(channel, p_star, kt_tol)?;
    if !kt.satisfied {
        return Err(Error::Precondition(format!(
            "point does not satisfy the Kuhn-Tucker conditions at {kt_tol:e} \
             (equality residual {:e}, inequality violation {:e})",
            kt.max_equality_residual, kt.max_inequality_violation
        )));
    }
    let value = kt.capacity_estimate;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<IpdProduct> = (0..samples)
        .map(|_| perturb(p_star, radius, &mut rng))
        .collect();
    let gains: Vec<f64> = draws
        .par_iter()
        .map(|q| info::mutual_information(channel, q).map(|v| v - value))
        .collect::<Result<_>>()?;
    let mut worst = 0;
    for (s, g) in gains.iter().enumerate() {
        if *g > gains[worst] {
            worst = s;
        }
    }
    Ok(LocalMaxReport {
        passed: gains.iter().all(|&g| g <= LOCAL_MAX_SLACK),
        value,
        worst_gain: gains[worst],
        worst_ipd: draws[worst].clone(),
        samples,
        radius_bound: 2.0 * radius,
    })
}

fn perturb<R: Rng + ?Sized>(p: &IpdProduct, radius: f64, rng: &mut R) -> IpdProduct {
    let parts = p
        .parts()
        .iter()
        .map(|part| {
            let moved: Vec<f64> = part
                .iter()
                .map(|&x| (x + rng.random_range(-radius..=radius)).max(0.0))
                .collect();
            if moved.iter().sum::<f64>() > 0.0 {
                moved
            } else {
                part.clone()
            }
        })
        .collect();
    IpdProduct::from_unnormalized(parts)
}

/// Connectivity of the lattice level set `{p : I(p) >= threshold}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetReport {
    pub threshold: f64,
    pub grid: GridSpec,
    pub nodes: usize,
    pub component_count: usize,
    pub connected: bool,
    /// No lattice point reaches the threshold.
    pub empty: bool,
}

/// Counts connected components of the level set on the full-domain lattice.
/// Two nodes are adjacent when one user moves a single lattice unit between
/// two of its symbols and everyone else stays put.
pub fn level_set_connected(channel: &ChannelMatrix, a: f64, grid: &GridSpec) -> Result<LevelSetReport> {
    grid.guard(LEVEL_SET_GUARD)?;
    let lattice = Lattice::new(channel, grid, None)?;
    let inside: Vec<bool> = (0..lattice.len())
        .into_par_iter()
        .map(|idx| {
            info::mutual_information(channel, &lattice.ipd(idx))
                .map(|v| v >= a)
                .unwrap_or(false)
        })
        .collect();
    let rank: Vec<HashMap<&[usize], usize>> = lattice
        .points
        .iter()
        .map(|pts| pts.iter().enumerate().map(|(i, c)| (c.as_slice(), i)).collect())
        .collect();
    let mut seen = vec![false; inside.len()];
    let mut components = 0;
    let mut queue = VecDeque::new();
    let mut moved = Vec::new();
    for start in 0..inside.len() {
        if !inside[start] || seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(node) = queue.pop_front() {
            let coords = lattice.coords(node);
            for k in 0..coords.len() {
                let comp = &lattice.points[k][coords[k]];
                for from in 0..comp.len() {
                    if comp[from] == 0 {
                        continue;
                    }
                    for to in 0..comp.len() {
                        if to == from {
                            continue;
                        }
                        moved.clear();
                        moved.extend_from_slice(comp);
                        moved[from] -= 1;
                        moved[to] += 1;
                        let mut next = coords.clone();
                        next[k] = rank[k][moved.as_slice()];
                        let n = lattice.index(&next);
                        if inside[n] && !seen[n] {
                            seen[n] = true;
                            queue.push_back(n);
                        }
                    }
                }
            }
        }
    }
    let nodes = inside.iter().filter(|&&b| b).count();
    Ok(LevelSetReport {
        threshold: a,
        grid: grid.clone(),
        nodes,
        component_count: components,
        connected: components <= 1,
        empty: nodes == 0,
    })
}

/// Masks of the averaged user sets whose differences give the columns of
/// the boundary matrix: `(keep, drop)` pairs with column = T(keep) - T(drop).
fn boundary_columns(order: &[usize]) -> Vec<(Vec<bool>, Vec<bool>)> {
    let n = order.len();
    let prefix = |len: usize| {
        let mut mask = vec![false; n];
        for &u in &order[..len] {
            mask[u] = true;
        }
        mask
    };
    let mut cols = vec![(prefix(0), prefix(1)), (vec![false; n], vec![true; n])];
    for t in 1..n - 1 {
        cols.push((prefix(t), prefix(t + 1)));
    }
    cols
}

/// Reduced partials `∂̃C/∂̃p_k(i) = ∂C/∂p_k(i) - ∂C/∂p_k(n_k - 1)` of every
/// boundary column `C`: `out[c][k][i]` for `i < n_k - 1`.
pub fn boundary_partials(
    channel: &ChannelMatrix,
    p: &IpdProduct,
    order: &[usize],
) -> Result<Vec<Vec<Vec<f64>>>> {
    channel.check_ipd(p)?;
    let users = channel.mac_type().users();
    if users < 2 {
        return Err(Error::InvalidArgument("boundary equations need at least two users".into()));
    }
    check_order(order, users)?;
    let mut cache: HashMap<Vec<bool>, Vec<Vec<f64>>> = HashMap::new();
    let mut partials = |mask: &Vec<bool>| {
        cache
            .entry(mask.clone())
            .or_insert_with(|| log_average_partials(channel, p, mask))
            .clone()
    };
    Ok(boundary_columns(order)
        .iter()
        .map(|(keep, drop)| {
            let a = partials(keep);
            let b = partials(drop);
            a.iter()
                .zip(&b)
                .map(|(ak, bk)| {
                    let last = ak.len() - 1;
                    let base = ak[last] - bk[last];
                    (0..last).map(|i| ak[i] - bk[i] - base).collect()
                })
                .collect()
        })
        .collect())
}

fn determinant_at(partials: &[Vec<Vec<f64>>], indices: &[usize]) -> f64 {
    let n = indices.len();
    DMatrix::from_fn(n, n, |k, c| partials[c][k][indices[k]]).determinant()
}

/// Determinant of the boundary matrix: row `k` holds the reduced partials
/// at `p_k(indices[k])` of the first chain term of `order`, the full mutual
/// information, then the remaining chain terms except the last.
pub fn boundary_determinant(
    channel: &ChannelMatrix,
    p: &IpdProduct,
    order: &[usize],
    indices: &[usize],
) -> Result<f64> {
    let t = channel.mac_type();
    if indices.len() != t.users() {
        return Err(Error::SizeMismatch {
            expected: format!("{} indices", t.users()),
            found: format!("{}", indices.len()),
        });
    }
    for (k, &i) in indices.iter().enumerate() {
        if i + 1 >= t.input_size(k) {
            return Err(Error::InvalidArgument(format!(
                "index {i} for user {} must be <= {}",
                k + 1,
                t.input_size(k) - 2
            )));
        }
    }
    let partials = boundary_partials(channel, p, order)?;
    Ok(determinant_at(&partials, indices))
}

/// Max over all multi-indices of `|boundary_determinant|`; non-finite
/// determinants count as infinite.
pub fn boundary_residual(channel: &ChannelMatrix, p: &IpdProduct, order: &[usize]) -> Result<f64> {
    let partials = boundary_partials(channel, p, order)?;
    let ranges: Vec<usize> = channel.mac_type().inputs().iter().map(|n| n - 1).collect();
    let total: usize = ranges.iter().product();
    let mut worst: f64 = 0.0;
    let mut indices = vec![0; ranges.len()];
    for mut idx in 0..total {
        for k in (0..ranges.len()).rev() {
            indices[k] = idx % ranges[k];
            idx /= ranges[k];
        }
        let d = determinant_at(&partials, &indices).abs();
        worst = if d.is_finite() { worst.max(d) } else { f64::INFINITY };
    }
    Ok(worst)
}

/// Every lattice point of `grid` as an IPD product, user 1 slowest.
pub fn grid_points(channel: &ChannelMatrix, grid: &GridSpec, limit: u128) -> Result<Vec<IpdProduct>> {
    grid.guard(limit)?;
    let lattice = Lattice::new(channel, grid, None)?;
    Ok((0..lattice.len()).map(|idx| lattice.ipd(idx)).collect())
}

/// True when every coordinate of `p` carries positive mass.
pub fn is_interior(p: &IpdProduct) -> bool {
    p.parts().iter().flatten().all(|&x| x > POSITIVE_MASS)
}
