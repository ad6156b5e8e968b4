//! Elementary sub-channels: the elementary test, enumeration of the master
//! face set, and degenerate-property witnesses for oversized supports.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::info::{self, UserSlice};
use crate::model::{ChannelMatrix, FaceProduct, IpdProduct, MacType, ZERO_TOL};

/// Default enumeration cap.
pub const DEFAULT_FACE_CAP: usize = 1_000_000;
/// Singular values below this fraction of the largest count as zero.
pub const KERNEL_RTOL: f64 = 1e-10;

/// The master faces of a MAC type, each user's face of size `min(n_k, m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementarySet {
    pub faces: Vec<FaceProduct>,
    pub mac_type: MacType,
    /// Set when the enumeration stopped at the cap.
    pub truncated: bool,
}

/// Every user's input alphabet is no larger than the output alphabet.
pub fn is_elementary(mac_type: &MacType) -> bool {
    mac_type.inputs().iter().all(|&n| n <= mac_type.outputs())
}

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// `Π_k C(n_k, min(n_k, m))`.
pub fn master_face_count(mac_type: &MacType) -> u128 {
    let m = mac_type.outputs();
    mac_type
        .inputs()
        .iter()
        .map(|&n| binomial(n, n.min(m)))
        .fold(1u128, |a, b| a.saturating_mul(b))
}

/// Size-`size` subsets of `0..n` in lexicographic order.
pub(crate) fn combinations(n: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..size).collect();
    loop {
        out.push(cur.clone());
        // Rightmost position that can still advance.
        let Some(pos) = (0..size).rev().find(|&p| cur[p] < n - size + p) else {
            return out;
        };
        cur[pos] += 1;
        for q in pos + 1..size {
            cur[q] = cur[q - 1] + 1;
        }
    }
}

/// Enumerates the master face set, user 1's subset varying slowest.
pub fn enumerate_master_faces(mac_type: &MacType, cap: usize) -> ElementarySet {
    let cap = cap.max(1);
    let m = mac_type.outputs();
    let per_user: Vec<Vec<Vec<usize>>> = mac_type
        .inputs()
        .iter()
        .map(|&n| combinations(n, n.min(m)))
        .collect();
    let total = master_face_count(mac_type);
    let take = if total > cap as u128 { cap } else { total as usize };
    let mut faces = Vec::with_capacity(take);
    let mut counters = vec![0usize; per_user.len()];
    while faces.len() < take {
        let supports = counters
            .iter()
            .zip(&per_user)
            .map(|(&c, subsets)| subsets[c].clone())
            .collect();
        faces.push(FaceProduct::new(supports).expect("combinations are sorted and nonempty"));
        for k in (0..counters.len()).rev() {
            counters[k] += 1;
            if counters[k] < per_user[k].len() {
                break;
            }
            counters[k] = 0;
        }
    }
    ElementarySet {
        faces,
        mac_type: mac_type.clone(),
        truncated: total > cap as u128,
    }
}

/// A replacement for one user's vector that leaves the output distribution
/// unchanged while using strictly fewer symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct DegenerateWitness {
    pub user: usize,
    pub original: Vec<f64>,
    pub replacement: Vec<f64>,
    /// Max-norm of `P p - P p'`.
    pub output_gap: f64,
    /// `|I(p') - I(p)|`.
    pub information_gap: f64,
    /// The kernel direction was also orthogonal to the conditional-entropy
    /// vector, so the mutual information is constant along the segment.
    pub preserves_information: bool,
    /// Numerical rank of the effective channel on the support.
    pub rank: usize,
}

/// Result of a witness search.
#[derive(Debug, Clone, PartialEq)]
pub enum WitnessOutcome {
    Found(DegenerateWitness),
    /// The support is no larger than the output alphabet.
    NotApplicable { support: usize, outputs: usize },
    /// Numerical trouble; no valid witness could be formed.
    Unavailable { diagnostic: String },
}

impl WitnessOutcome {
    pub fn witness(&self) -> Option<&DegenerateWitness> {
        match self {
            WitnessOutcome::Found(w) => Some(w),
            _ => None,
        }
    }
}

/// Null space of `rows x cols` matrix `a` via SVD, as unit columns ordered
/// by increasing singular value. Returns the numerical rank as well.
fn null_space(a: &DMatrix<f64>) -> (Vec<Vec<f64>>, usize) {
    let cols = a.ncols();
    // Pad to a square matrix so the SVD returns a full right basis.
    let size = a.nrows().max(cols);
    let mut sq = DMatrix::<f64>::zeros(size, cols);
    sq.view_mut((0, 0), (a.nrows(), cols)).copy_from(a);
    let svd = sq.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let sv = &svd.singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let mut idx: Vec<usize> = (0..sv.len()).collect();
    idx.sort_by(|&x, &y| sv[x].total_cmp(&sv[y]).then(x.cmp(&y)));
    let thresh = KERNEL_RTOL * smax.max(f64::MIN_POSITIVE);
    let kernel: Vec<Vec<f64>> = idx
        .iter()
        .filter(|&&r| sv[r] <= thresh)
        .map(|&r| v_t.row(r).iter().cloned().collect())
        .collect();
    let rank = sv.len() - kernel.len();
    (kernel, rank)
}

/// Searches for a degenerate replacement of user `k`'s vector.
///
/// The effective matrix `A` has the conditional output distributions of
/// user `k`'s support symbols as columns. A kernel vector `v` of `A` moves
/// `p_k` without changing `q`; `p_k` is pushed along `v` until the first
/// coordinate hits zero. Kernel vectors that are also orthogonal to the
/// conditional-entropy terms are preferred, since along them the mutual
/// information stays constant.
pub fn degenerate_witness(
    channel: &ChannelMatrix,
    p: &IpdProduct,
    k: usize,
) -> Result<WitnessOutcome> {
    channel.check_ipd(p)?;
    channel.mac_type().check_user(k)?;
    let m = channel.outputs();
    let part = p.part(k);
    let support: Vec<usize> = (0..part.len()).filter(|&i| part[i] > ZERO_TOL).collect();
    let f = support.len();
    if f <= m {
        return Ok(WitnessOutcome::NotApplicable {
            support: f,
            outputs: m,
        });
    }
    let slice = UserSlice::new(channel, p, k);
    let build = |with_entropy: bool| {
        let rows = m + 1 + usize::from(with_entropy);
        let mut a = DMatrix::<f64>::zeros(rows, f);
        for (c, &i) in support.iter().enumerate() {
            for (j, &v) in slice.column(i).iter().enumerate() {
                a[(j, c)] = v;
            }
            a[(m, c)] = 1.0;
            if with_entropy {
                a[(m + 1, c)] = slice.neg_entropy(i);
            }
        }
        a
    };
    let (_, rank) = null_space(&build(false).rows(0, m).into_owned());
    let mut diagnostics = Vec::new();
    for with_entropy in [true, false] {
        let (kernel, _) = null_space(&build(with_entropy));
        let Some(v) = kernel.into_iter().next() else {
            diagnostics.push(format!(
                "{} kernel empty",
                if with_entropy { "entropy-augmented" } else { "output" }
            ));
            continue;
        };
        match step_to_boundary(p, k, &support, &v) {
            Ok(replacement) => {
                let p2 = p.with_part(k, replacement.clone());
                let q = info::output_distribution(channel, p)?.q;
                let q2 = info::output_distribution(channel, &p2)?.q;
                let output_gap = q.iter().zip(&q2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if output_gap > 1e-9 {
                    diagnostics.push(format!("output gap {output_gap:e} exceeds 1e-9"));
                    continue;
                }
                let information_gap = (info::mutual_information(channel, &p2)?
                    - info::mutual_information(channel, p)?)
                .abs();
                return Ok(WitnessOutcome::Found(DegenerateWitness {
                    user: k,
                    original: part.to_vec(),
                    replacement,
                    output_gap,
                    information_gap,
                    preserves_information: with_entropy,
                    rank,
                }));
            }
            Err(msg) => diagnostics.push(msg),
        }
    }
    Ok(WitnessOutcome::Unavailable {
        diagnostic: format!("rank {rank} on {f} support symbols: {}", diagnostics.join("; ")),
    })
}

/// Moves `p_k` along the kernel direction `v` (given on `support`) by the
/// smallest positive step that zeroes a coordinate, lowest index first on
/// ties.
fn step_to_boundary(
    p: &IpdProduct,
    k: usize,
    support: &[usize],
    v: &[f64],
) -> std::result::Result<Vec<f64>, String> {
    let part = p.part(k);
    let scale = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err("zero kernel vector".into());
    }
    // Fix the sign so the largest-magnitude entry is positive.
    let lead = v
        .iter()
        .enumerate()
        .fold(0, |best, (c, x)| if x.abs() > v[best].abs() { c } else { best });
    let sign = if v[lead] < 0.0 { -1.0 } else { 1.0 };
    let dir: Vec<f64> = v.iter().map(|x| sign * x / scale).collect();
    let sum: f64 = dir.iter().sum();
    if sum.abs() > 1e-8 {
        return Err(format!("kernel vector sum {sum:e} is not zero"));
    }
    let mut best: Option<(f64, usize)> = None;
    for (c, &d) in dir.iter().enumerate() {
        if d < -1e-14 {
            let step = part[support[c]] / -d;
            if best.is_none_or(|(s, _)| step < s) {
                best = Some((step, c));
            }
        }
    }
    let (step, hit) = best.ok_or("kernel vector has no negative entry")?;
    let mut out = vec![0.0; part.len()];
    for (c, &i) in support.iter().enumerate() {
        out[i] = if c == hit {
            0.0
        } else {
            (part[i] + step * dir[c]).max(0.0)
        };
    }
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= total);
    Ok(out)
}
