//! Sampled capacity regions. Every user order splits `I(p)` into one
//! chain term per user; sweeping `p` over a lattice traces the rate set of
//! that order, and the region is the convex hull of all orders together.
//! The hull is an inner approximation that grows with the resolution.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hull::{convex_hull, Hull};
use crate::info::{all_orders, chain_decomposition, check_order};
use crate::model::{ChannelMatrix, IpdProduct};
use crate::verify::{boundary_residual, grid_points, GridSpec, LEVEL_SET_GUARD};

/// One achievable rate tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSample {
    pub order: Vec<usize>,
    /// `rates[t]` belongs to user `order[t]`; rounding negatives are clamped.
    pub rates: Vec<f64>,
    pub source_ipd: IpdProduct,
}

impl RateSample {
    /// Rates indexed by user.
    pub fn user_rates(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.order.len()];
        for (&u, &r) in self.order.iter().zip(&self.rates) {
            out[u] = r;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionEstimate {
    pub samples: Vec<RateSample>,
    /// Hull of the user-indexed rate tuples; `None` for more than 3 users.
    pub hull: Option<Hull>,
    pub diagnostics: Vec<String>,
}

/// Rate tuples of `order` at every lattice point of `grid`.
pub fn sample_subregion(channel: &ChannelMatrix, order: &[usize], grid: &GridSpec) -> Result<Vec<RateSample>> {
    check_order(order, channel.mac_type().users())?;
    let points = grid_points(channel, grid, LEVEL_SET_GUARD)?;
    points
        .into_par_iter()
        .map(|p| {
            let d = chain_decomposition(channel, &p, order)?;
            Ok(RateSample {
                order: order.to_vec(),
                rates: d.clamped(),
                source_ipd: p,
            })
        })
        .collect()
}

/// Region from all `N!` orders.
pub fn capacity_region(channel: &ChannelMatrix, grid: &GridSpec) -> Result<RegionEstimate> {
    region_from_orders(channel, grid, &all_orders(channel.mac_type().users()))
}

/// Region from the given orders only.
pub fn region_from_orders(
    channel: &ChannelMatrix,
    grid: &GridSpec,
    orders: &[Vec<usize>],
) -> Result<RegionEstimate> {
    if orders.is_empty() {
        return Err(Error::InvalidArgument("at least one user order is required".into()));
    }
    let mut samples = Vec::new();
    for order in orders {
        samples.extend(sample_subregion(channel, order, grid)?);
    }
    let users = channel.mac_type().users();
    let mut diagnostics = Vec::new();
    let hull = if users > 3 {
        diagnostics.push(format!("hull not built for {users} users; samples only"));
        None
    } else {
        let cloud: Vec<Vec<f64>> = samples.iter().map(RateSample::user_rates).collect();
        let h = convex_hull(&cloud)?;
        if h.affine_dim < users {
            diagnostics.push(format!(
                "rate cloud spans only {} of {users} dimensions",
                h.affine_dim
            ));
        }
        Some(h)
    };
    Ok(RegionEstimate {
        samples,
        hull,
        diagnostics,
    })
}

/// Max boundary-determinant residual of `order` at every lattice point;
/// points where a determinant is not finite report infinity.
pub fn boundary_residual_map(
    channel: &ChannelMatrix,
    order: &[usize],
    grid: &GridSpec,
) -> Result<Vec<(IpdProduct, f64)>> {
    if channel.mac_type().users() < 2 {
        return Err(Error::InvalidArgument("boundary equations need at least two users".into()));
    }
    check_order(order, channel.mac_type().users())?;
    let points = grid_points(channel, grid, LEVEL_SET_GUARD)?;
    points
        .into_par_iter()
        .map(|p| {
            let r = boundary_residual(channel, &p, order)?;
            Ok((p, if r.is_finite() { r } else { f64::INFINITY }))
        })
        .collect()
}
