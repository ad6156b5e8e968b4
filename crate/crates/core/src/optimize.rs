//! Maximization of the mutual information on faces, the face-by-face
//! capacity computation, and Kuhn-Tucker reports.
//!
//! The mutual information is concave in each user's vector when the others
//! are held fixed, so a face is optimized by cyclic block ascent: each user
//! in turn solves its concave sub-problem on its own face. The default
//! sub-problem solver is the multiplicative fixed point
//! `p_k(i) <- p_k(i) exp(J(p; i)) / Z`, which never decreases the objective.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::elementary::{enumerate_master_faces, is_elementary};
use crate::error::{Error, Result};
use crate::info::{self, UserSlice};
use crate::model::{ChannelMatrix, FaceProduct, IpdProduct};

/// Mass above which a symbol counts as used in the Kuhn-Tucker split.
pub const POSITIVE_MASS: f64 = 1e-9;

const INNER_MAX_ITERS: usize = 500;
const INNER_STEP_TOL: f64 = 1e-15;
/// A start has converged only once a sweep also moves no coordinate by
/// more than this; value gains alone stall long before the scores settle.
const SWEEP_STEP_TOL: f64 = 1e-11;
/// Upper bound on the deterministic vertex starts per face.
const VERTEX_START_CAP: usize = 64;
/// Stand-in for infinite scores in the projected-gradient step.
const SCORE_CLAMP: f64 = 1e6;

/// Per-user sub-problem solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerSolver {
    FixedPoint,
    ProjectedGradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOptions {
    pub max_sweeps: usize,
    /// Stop when a full sweep improves the value by less than this fraction.
    pub rel_tol: f64,
    pub kt_tol: f64,
    /// Number of starts: the barycenter plus `starts - 1` random ones.
    pub starts: usize,
    /// Also start from every point where all users but one sit at a vertex
    /// of their face (free user at its barycenter), up to a cap.
    pub vertex_starts: bool,
    pub seed: u64,
    pub inner: InnerSolver,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 10_000,
            rel_tol: 1e-12,
            kt_tol: 1e-6,
            starts: 8,
            vertex_starts: true,
            seed: 0,
            inner: InnerSolver::FixedPoint,
        }
    }
}

impl OptimizeOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_sweeps < 1 {
            return Err(Error::InvalidArgument("max_sweeps must be >= 1".into()));
        }
        if !(self.rel_tol > 0.0) || !(self.kt_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if self.starts < 1 {
            return Err(Error::InvalidArgument("starts must be >= 1".into()));
        }
        Ok(())
    }
}

/// Kuhn-Tucker status of an input distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct KtReport {
    /// `scores[k][i_k] = J(p; i_k)`.
    pub scores: Vec<Vec<f64>>,
    /// `I(p)`, the value the scores are compared against.
    pub capacity_estimate: f64,
    /// Max of `|J - I|` over used symbols.
    pub max_equality_residual: f64,
    /// Max of `(J - I)^+` over unused symbols.
    pub max_inequality_violation: f64,
    pub satisfied: bool,
    pub diagnostics: Vec<String>,
}

/// Kuhn-Tucker report on the whole domain.
pub fn kt_check(channel: &ChannelMatrix, p: &IpdProduct, kt_tol: f64) -> Result<KtReport> {
    kt_check_on_face(channel, p, &FaceProduct::full(channel.mac_type()), kt_tol)
}

/// Kuhn-Tucker report for the sub-channel on `face`; symbols outside the
/// face are not constrained.
pub fn kt_check_on_face(
    channel: &ChannelMatrix,
    p: &IpdProduct,
    face: &FaceProduct,
    kt_tol: f64,
) -> Result<KtReport> {
    face.check_type(channel.mac_type())?;
    let scores = info::scores(channel, p)?;
    let value = info::mutual_information(channel, p)?;
    let mut eq: f64 = 0.0;
    let mut ineq: f64 = 0.0;
    for (k, js) in scores.iter().enumerate() {
        for &i in face.support(k) {
            let gap = js[i] - value;
            if p.part(k)[i] > POSITIVE_MASS {
                eq = eq.max(gap.abs());
            } else {
                ineq = ineq.max(gap.max(0.0));
            }
        }
    }
    // NaN never compares as satisfied.
    let satisfied = eq <= kt_tol && ineq <= kt_tol;
    Ok(KtReport {
        scores,
        capacity_estimate: value,
        max_equality_residual: eq,
        max_inequality_violation: ineq,
        satisfied,
        diagnostics: Vec::new(),
    })
}

/// One start of the block ascent.
#[derive(Debug, Clone, PartialEq)]
pub struct StartOutcome {
    pub ipd: IpdProduct,
    pub value: f64,
    pub sweeps: usize,
    pub converged: bool,
    /// Value at the end of each sweep; nondecreasing.
    pub trace: Vec<f64>,
    pub kt: KtReport,
}

/// Best start on one face.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceOptimum {
    pub face: FaceProduct,
    pub ipd: IpdProduct,
    pub value: f64,
    /// Kuhn-Tucker report on the face.
    pub kt: KtReport,
    pub converged: bool,
    pub starts: Vec<StartOutcome>,
}

/// Maximizes the mutual information over IPDs supported on `face`.
pub fn maximize_on_face(
    channel: &ChannelMatrix,
    face: &FaceProduct,
    opts: &OptimizeOptions,
) -> Result<FaceOptimum> {
    maximize_on_face_seeded(channel, face, opts, opts.seed)
}

fn maximize_on_face_seeded(
    channel: &ChannelMatrix,
    face: &FaceProduct,
    opts: &OptimizeOptions,
    seed: u64,
) -> Result<FaceOptimum> {
    opts.validate()?;
    face.check_type(channel.mac_type())?;
    let t = channel.mac_type();
    let mut starts = Vec::with_capacity(opts.starts);
    for s in 0..opts.starts {
        let init = if s == 0 {
            IpdProduct::barycenter(face, t)
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, s as u64));
            IpdProduct::random_on_face(face, t, &mut rng)
        };
        starts.push(run_start(channel, face, init, opts)?);
    }
    if opts.vertex_starts {
        for init in vertex_inits(face, t) {
            starts.push(run_start(channel, face, init, opts)?);
        }
    }
    let best = best_index(starts.iter().map(|s| s.value));
    let b = &starts[best];
    let mut kt = b.kt.clone();
    if !b.converged {
        kt.diagnostics
            .push(format!("not converged after {} sweeps", b.sweeps));
    }
    Ok(FaceOptimum {
        face: face.clone(),
        ipd: b.ipd.clone(),
        value: b.value,
        kt,
        converged: b.converged,
        starts,
    })
}

/// Starts with every user except one at a vertex of its face, enumerated
/// by free user, then by the others' vertices with user 1 slowest.
fn vertex_inits(face: &FaceProduct, t: &crate::model::MacType) -> Vec<IpdProduct> {
    let users = t.users();
    let mut out = Vec::new();
    if users < 2 {
        return out;
    }
    let bary = IpdProduct::barycenter(face, t);
    for free in 0..users {
        let others: Vec<usize> = (0..users).filter(|&u| u != free).collect();
        let total: usize = others.iter().map(|&u| face.support(u).len()).product();
        for mut idx in 0..total {
            if out.len() >= VERTEX_START_CAP {
                return out;
            }
            let mut p = bary.clone();
            for &u in others.iter().rev() {
                let sup = face.support(u);
                let mut v = vec![0.0; t.input_size(u)];
                v[sup[idx % sup.len()]] = 1.0;
                idx /= sup.len();
                p = p.with_part(u, v);
            }
            out.push(p);
        }
    }
    out
}

fn run_start(
    channel: &ChannelMatrix,
    face: &FaceProduct,
    init: IpdProduct,
    opts: &OptimizeOptions,
) -> Result<StartOutcome> {
    let mut parts = init.into_parts();
    let mut value = info::mutual_information(channel, &IpdProduct::from_unnormalized(parts.clone()))?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut moved: f64 = 0.0;
        for k in 0..parts.len() {
            let current = IpdProduct::from_unnormalized(parts.clone());
            let slice = UserSlice::new(channel, &current, k);
            let next = match opts.inner {
                InnerSolver::FixedPoint => fixed_point(&slice, &parts[k], face.support(k)),
                InnerSolver::ProjectedGradient => {
                    projected_gradient(&slice, &parts[k], face.support(k))
                }
            };
            moved = next
                .iter()
                .zip(&parts[k])
                .fold(moved, |m, (a, b)| m.max((a - b).abs()));
            parts[k] = next;
        }
        let new_value =
            info::mutual_information(channel, &IpdProduct::from_unnormalized(parts.clone()))?;
        let gain = new_value - value;
        value = value.max(new_value);
        trace.push(value);
        if gain <= opts.rel_tol * value.abs() && moved <= SWEEP_STEP_TOL {
            converged = true;
            break;
        }
    }
    let ipd = IpdProduct::from_unnormalized(parts);
    let kt = kt_check_on_face(channel, &ipd, face, opts.kt_tol)?;
    let value = info::mutual_information(channel, &ipd)?;
    Ok(StartOutcome {
        ipd,
        value,
        sweeps,
        converged,
        trace,
        kt,
    })
}

/// Multiplicative fixed point for one user.
fn fixed_point(slice: &UserSlice, part: &[f64], support: &[usize]) -> Vec<f64> {
    let mut x = part.to_vec();
    for _ in 0..INNER_MAX_ITERS {
        let scores = slice.scores(&x);
        let top = support
            .iter()
            .filter(|&&i| x[i] > 0.0)
            .map(|&i| scores[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut next = vec![0.0; x.len()];
        for &i in support {
            if x[i] > 0.0 {
                next[i] = x[i] * (scores[i] - top).exp();
            }
        }
        let z: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= z);
        let step = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = next;
        if step < INNER_STEP_TOL {
            break;
        }
    }
    x
}

/// Projected gradient ascent with Armijo backtracking for one user.
fn projected_gradient(slice: &UserSlice, part: &[f64], support: &[usize]) -> Vec<f64> {
    let mut x = part.to_vec();
    let mut value = slice.value(&x);
    let mut step: f64 = 1.0;
    for _ in 0..INNER_MAX_ITERS {
        let grad: Vec<f64> = slice
            .scores(&x)
            .iter()
            .map(|g| if g.is_finite() { *g } else { SCORE_CLAMP })
            .collect();
        let mut accepted = None;
        let mut s = (2.0 * step).min(1e3);
        while s > 1e-16 {
            let moved: Vec<f64> = support.iter().map(|&i| x[i] + s * grad[i]).collect();
            let proj = project_simplex(&moved);
            let mut cand = vec![0.0; x.len()];
            for (&i, v) in support.iter().zip(proj) {
                cand[i] = v;
            }
            let dir: f64 = support.iter().map(|&i| grad[i] * (cand[i] - x[i])).sum();
            let cv = slice.value(&cand);
            if cv >= value + 1e-4 * dir && cv >= value {
                accepted = Some((cand, cv));
                break;
            }
            s *= 0.5;
        }
        let Some((cand, cv)) = accepted else { break };
        step = s;
        let moved = cand
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = cand;
        value = cv;
        if moved < INNER_STEP_TOL {
            break;
        }
    }
    x
}

/// Euclidean projection onto the probability simplex.
pub(crate) fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (r, &ur) in u.iter().enumerate() {
        cum += ur;
        let t = (cum - 1.0) / (r as f64 + 1.0);
        if ur - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Index of the maximum; the first one wins ties.
fn best_index(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// splitmix64 of `a` combined with `b`.
pub(crate) fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Capacity computed face by face over the master face set.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityResult {
    pub capacity_nats: f64,
    pub optimal_ipd: IpdProduct,
    pub achieving_face: FaceProduct,
    pub per_face: Vec<FaceOptimum>,
    /// Indices into `per_face` of faces within `kt_tol` of the maximum.
    pub co_achievers: Vec<usize>,
    /// Kuhn-Tucker report of `optimal_ipd` on the whole domain.
    pub full_kt: KtReport,
    pub elementary: bool,
    /// The face enumeration was capped; the value is a lower bound.
    pub truncated: bool,
}

impl CapacityResult {
    pub fn capacity_bits(&self) -> f64 {
        self.capacity_nats / std::f64::consts::LN_2
    }
}

/// Channel capacity as the best value over the master faces.
///
/// Faces are optimized in parallel on the current rayon pool; results are
/// reduced in face order so the outcome does not depend on the pool size.
pub fn capacity(channel: &ChannelMatrix, opts: &OptimizeOptions, cap: usize) -> Result<CapacityResult> {
    opts.validate()?;
    let set = enumerate_master_faces(channel.mac_type(), cap);
    let per_face = set
        .faces
        .par_iter()
        .enumerate()
        .map(|(f, face)| maximize_on_face_seeded(channel, face, opts, mix_seed(opts.seed, 1 << 32 | f as u64)))
        .collect::<Result<Vec<_>>>()?;
    let best = best_index(per_face.iter().map(|r| r.value));
    let top = per_face[best].value;
    let co_achievers = per_face
        .iter()
        .enumerate()
        .filter(|(_, r)| r.value >= top - opts.kt_tol)
        .map(|(i, _)| i)
        .collect();
    let optimal_ipd = per_face[best].ipd.clone();
    let mut full_kt = kt_check(channel, &optimal_ipd, opts.kt_tol)?;
    if set.truncated {
        full_kt
            .diagnostics
            .push("face enumeration truncated; capacity is a lower bound".into());
    }
    Ok(CapacityResult {
        capacity_nats: top,
        achieving_face: per_face[best].face.clone(),
        optimal_ipd,
        per_face,
        co_achievers,
        full_kt,
        elementary: is_elementary(channel.mac_type()),
        truncated: set.truncated,
    })
}

/// Maximum of the mutual information over a product of segments.
#[derive(Debug, Clone, PartialEq)]
pub struct LineOptimum {
    /// `theta[k]` weights `rho1[k]`; `1 - theta[k]` weights `rho2[k]`.
    pub theta: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    /// Max Kuhn-Tucker residual of the returned point in theta space.
    pub kt_residual: f64,
    /// Best value of every start.
    pub start_values: Vec<f64>,
}

/// The IPD product at `theta` on the segments between `rho1` and `rho2`.
pub fn segment_point(rho1: &IpdProduct, rho2: &IpdProduct, theta: &[f64]) -> IpdProduct {
    let parts = rho1
        .parts()
        .iter()
        .zip(rho2.parts())
        .zip(theta)
        .map(|((a, b), &t)| a.iter().zip(b).map(|(x, y)| t * x + (1.0 - t) * y).collect())
        .collect();
    IpdProduct::from_unnormalized(parts)
}

fn segment_derivative(slice: &UserSlice, rho1: &[f64], rho2: &[f64], theta: f64) -> f64 {
    let part: Vec<f64> = rho1.iter().zip(rho2).map(|(x, y)| theta * x + (1.0 - theta) * y).collect();
    let scores = slice.scores(&part);
    rho1.iter()
        .zip(rho2)
        .zip(&scores)
        .filter(|((x, y), _)| x != y)
        .map(|((x, y), j)| (x - y) * j)
        .sum()
}

/// Maximizes `I(⊗_k (θ_k ρ1_k + (1 - θ_k) ρ2_k))` over `[0,1]^N` by
/// cyclic coordinate ascent, each coordinate solved by bisection on its
/// derivative.
pub fn line_restricted_optimize(
    channel: &ChannelMatrix,
    rho1: &IpdProduct,
    rho2: &IpdProduct,
    opts: &OptimizeOptions,
) -> Result<LineOptimum> {
    opts.validate()?;
    channel.check_ipd(rho1)?;
    channel.check_ipd(rho2)?;
    let users = channel.mac_type().users();
    let mut outcomes = Vec::with_capacity(opts.starts);
    for s in 0..opts.starts {
        let mut theta = if s == 0 {
            vec![0.5; users]
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(opts.seed ^ 0x11e, s as u64));
            (0..users).map(|_| rng.random::<f64>()).collect()
        };
        let mut value = info::mutual_information(channel, &segment_point(rho1, rho2, &theta))?;
        let mut converged = false;
        for _ in 0..opts.max_sweeps {
            for k in 0..users {
                let here = segment_point(rho1, rho2, &theta);
                let slice = UserSlice::new(channel, &here, k);
                let (a, b) = (rho1.part(k), rho2.part(k));
                let mut lo = 0.0;
                let mut hi = 1.0;
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if segment_derivative(&slice, a, b, mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let at = |t: f64| {
                    let part: Vec<f64> = a.iter().zip(b).map(|(x, y)| t * x + (1.0 - t) * y).collect();
                    slice.value(&part)
                };
                let mut best = (theta[k], at(theta[k]));
                for cand in [0.5 * (lo + hi), 0.0, 1.0] {
                    let v = at(cand);
                    if v > best.1 {
                        best = (cand, v);
                    }
                }
                theta[k] = best.0;
            }
            let new_value = info::mutual_information(channel, &segment_point(rho1, rho2, &theta))?;
            let gain = new_value - value;
            value = value.max(new_value);
            if gain <= opts.rel_tol * value.abs() {
                converged = true;
                break;
            }
        }
        outcomes.push((theta, value, converged));
    }
    let best = best_index(outcomes.iter().map(|o| o.1));
    let start_values = outcomes.iter().map(|o| o.1).collect();
    let (theta, value, converged) = outcomes.swap_remove(best);
    let here = segment_point(rho1, rho2, &theta);
    let mut kt_residual: f64 = 0.0;
    for k in 0..users {
        let slice = UserSlice::new(channel, &here, k);
        let d = segment_derivative(&slice, rho1.part(k), rho2.part(k), theta[k]);
        let r = if theta[k] <= 0.0 {
            d.max(0.0)
        } else if theta[k] >= 1.0 {
            (-d).max(0.0)
        } else {
            d.abs()
        };
        kt_residual = kt_residual.max(r);
    }
    Ok(LineOptimum {
        theta,
        value,
        converged,
        kt_residual,
        start_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MacType;
    use std::f64::consts::LN_2;

    fn adder() -> ChannelMatrix {
        ChannelMatrix::from_fn(MacType::new(vec![2, 2], 3).unwrap(), |t| {
            let mut c = vec![0.0; 3];
            c[t[0] + t[1]] = 1.0;
            c
        })
        .unwrap()
    }

    fn bsc(eps: f64) -> ChannelMatrix {
        ChannelMatrix::new(
            MacType::new(vec![2], 2).unwrap(),
            vec![vec![1.0 - eps, eps], vec![eps, 1.0 - eps]],
        )
        .unwrap()
    }

    fn random_channel(inputs: &[usize], m: usize, seed: u64) -> ChannelMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ChannelMatrix::random(MacType::new(inputs.to_vec(), m).unwrap(), &mut rng)
    }

    #[test]
    fn identity_channel_is_one_bit() {
        let ch = bsc(0.0);
        let r = maximize_on_face(&ch, &FaceProduct::full(ch.mac_type()), &OptimizeOptions::default()).unwrap();
        assert!((r.value - LN_2).abs() < 1e-12);
        assert!((r.ipd.part(0)[0] - 0.5).abs() < 1e-9);
        assert!(r.kt.satisfied);
    }

    #[test]
    fn adder_capacity() {
        let r = capacity(&adder(), &OptimizeOptions::default(), 10).unwrap();
        assert!((r.capacity_nats - 1.5 * LN_2).abs() < 1e-10);
        assert_eq!(r.per_face.len(), 1);
        assert!(r.full_kt.satisfied);
        assert!(r.elementary);
    }

    #[test]
    fn bsc_closed_form() {
        for eps in [0.05, 0.1, 0.25] {
            let r = capacity(&bsc(eps), &OptimizeOptions::default(), 10).unwrap();
            let closed = LN_2 + eps * eps.ln() + (1.0 - eps) * (1.0 - eps).ln();
            assert!((r.capacity_nats - closed).abs() < 1e-12);
        }
    }

    #[test]
    fn kt_examples() {
        let ch = adder();
        let rep = kt_check(&ch, &IpdProduct::uniform(ch.mac_type()), 1e-12).unwrap();
        assert!(rep.satisfied);
        assert!(rep.max_equality_residual < 1e-12);

        let id = bsc(0.0);
        let p = IpdProduct::new(vec![vec![0.9, 0.1]]).unwrap();
        let rep = kt_check(&id, &p, 1e-6).unwrap();
        assert!(!rep.satisfied);
        assert!((rep.scores[0][0] - rep.scores[0][1]).abs() > 1e-3);

        let v = IpdProduct::vertex(ch.mac_type(), &[0, 1]).unwrap();
        let rep = kt_check(&ch, &v, 1e-6).unwrap();
        assert_eq!(rep.capacity_estimate, 0.0);
        assert!(rep.scores[0][0].abs() < 1e-15);
        assert!(rep.max_inequality_violation > 0.0);
        assert!(!rep.satisfied);
    }

    #[test]
    fn sweeps_are_monotone() {
        for seed in 0..10 {
            let ch = random_channel(&[3, 3], 3, seed);
            for inner in [InnerSolver::FixedPoint, InnerSolver::ProjectedGradient] {
                let opts = OptimizeOptions { inner, ..Default::default() };
                let r = maximize_on_face(&ch, &FaceProduct::full(ch.mac_type()), &opts).unwrap();
                for s in &r.starts {
                    for w in s.trace.windows(2) {
                        assert!(w[1] >= w[0] - 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn solvers_agree() {
        for seed in 0..10 {
            let ch = random_channel(&[2, 3], 3, 50 + seed);
            let face = FaceProduct::full(ch.mac_type());
            let a = maximize_on_face(&ch, &face, &OptimizeOptions::default()).unwrap();
            let opts = OptimizeOptions { inner: InnerSolver::ProjectedGradient, ..Default::default() };
            let b = maximize_on_face(&ch, &face, &opts).unwrap();
            assert!((a.value - b.value).abs() < 1e-8, "seed {seed}: {} vs {}", a.value, b.value);
        }
    }

    #[test]
    fn fixed_point_is_stationary_at_interior_optimum() {
        let ch = adder();
        let p = IpdProduct::uniform(ch.mac_type());
        for k in 0..2 {
            let slice = UserSlice::new(&ch, &p, k);
            let next = fixed_point(&slice, p.part(k), &[0, 1]);
            assert!(next.iter().zip(p.part(k)).all(|(a, b)| (a - b).abs() < 1e-9));
        }
    }

    #[test]
    fn theorem_one_consistency() {
        for seed in 0..5 {
            let ch = random_channel(&[3, 2], 2, 200 + seed);
            let r = capacity(&ch, &OptimizeOptions::default(), 100).unwrap();
            assert_eq!(r.per_face.len(), 3);
            for f in &r.per_face {
                assert!(r.capacity_nats >= f.value);
            }
            let top = r.per_face.iter().map(|f| f.value).fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(r.capacity_nats, top);
            assert!(r.capacity_nats <= 2f64.ln() + 1e-12);
            assert!(r.full_kt.satisfied, "seed {seed}: {:?}", r.full_kt);
        }
    }

    #[test]
    fn line_restriction_examples() {
        let ch = adder();
        let t = ch.mac_type().clone();
        let opts = OptimizeOptions::default();
        let rho = IpdProduct::new(vec![vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap();
        let r = line_restricted_optimize(&ch, &rho, &rho, &opts).unwrap();
        assert!((r.value - info::mutual_information(&ch, &rho).unwrap()).abs() < 1e-15);

        let r1 = IpdProduct::vertex(&t, &[0, 0]).unwrap();
        let r2 = IpdProduct::vertex(&t, &[1, 1]).unwrap();
        let r = line_restricted_optimize(&ch, &r1, &r2, &opts).unwrap();
        assert!((r.value - 1.5 * LN_2).abs() < 1e-12);
        assert!(r.theta.iter().all(|x| (x - 0.5).abs() < 1e-6));
    }

    #[test]
    fn line_restriction_starts_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let t = MacType::new(vec![2, 2], 4).unwrap();
        let ch = ChannelMatrix::random(t.clone(), &mut rng);
        let full = FaceProduct::full(&t);
        let r1 = IpdProduct::random_on_face(&full, &t, &mut rng);
        let r2 = IpdProduct::random_on_face(&full, &t, &mut rng);
        let opts = OptimizeOptions { starts: 20, ..Default::default() };
        let r = line_restricted_optimize(&ch, &r1, &r2, &opts).unwrap();
        let lo = r.start_values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = r.start_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(hi - lo < 1e-8);
    }

    #[test]
    fn simplex_projection() {
        let p = project_simplex(&[0.5, 0.5]);
        assert_eq!(p, vec![0.5, 0.5]);
        let p = project_simplex(&[2.0, 0.0, 0.0]);
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
        let p = project_simplex(&[0.4, 0.4, 0.4]);
        assert!(p.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn options_validation() {
        let ch = adder();
        let face = FaceProduct::full(ch.mac_type());
        for bad in [
            OptimizeOptions { starts: 0, ..Default::default() },
            OptimizeOptions { max_sweeps: 0, ..Default::default() },
            OptimizeOptions { rel_tol: 0.0, ..Default::default() },
        ] {
            assert!(maximize_on_face(&ch, &face, &bad).is_err());
        }
    }

    #[test]
    fn parallel_and_serial_agree() {
        let ch = random_channel(&[4, 3], 2, 9);
        let opts = OptimizeOptions::default();
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = serial.install(|| capacity(&ch, &opts, 100).unwrap());
        let b = wide.install(|| capacity(&ch, &opts, 100).unwrap());
        assert_eq!(a, b);
    }
}
