//! Information functionals of a MAC: output distribution, mutual
//! information, per-symbol scores `J(p; i_k)`, conditional terms and
//! chain-rule decompositions. All values are in nats.
//!
//! The conditional terms are built from averaged channels
//! `<σ_S · P>(j | i_{-S}) = Σ_{h_S} Π_{l∈S} p_l(h_l) P(j | ..., h_S, ...)`.
//! Writing `T(S) = Σ_t p(t) Σ_j P(j|t) log <σ_S · P>(j | t_{-S})`, the
//! mutual information is `T(∅) - T(all)` and the term for `target` with
//! `averaged_out` removed is `T(A) - T(A ∪ target)`; chain decompositions
//! telescope over prefixes of the user order.

use crate::error::{Error, Result};
use crate::model::{ChannelMatrix, IpdProduct};

/// Output probabilities `q(j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputDistribution {
    pub q: Vec<f64>,
}

/// Chain-rule split of `I(p)` into one term per user.
///
/// `components[t]` belongs to user `order[t]`: the information carried by
/// that user given users `order[t+1..]`, with users `order[..t]` averaged
/// out as noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDecomposition {
    pub order: Vec<usize>,
    pub components: Vec<f64>,
}

impl ChainDecomposition {
    pub fn total(&self) -> f64 {
        self.components.iter().sum()
    }

    /// Components with rounding negatives clamped to zero.
    pub fn clamped(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.max(0.0)).collect()
    }

    /// Rates indexed by user rather than by position in the order.
    pub fn user_rates(&self) -> Vec<f64> {
        let mut rates = vec![0.0; self.order.len()];
        for (&user, c) in self.order.iter().zip(self.clamped()) {
            rates[user] = c;
        }
        rates
    }
}

pub fn output_distribution(channel: &ChannelMatrix, p: &IpdProduct) -> Result<OutputDistribution> {
    channel.check_ipd(p)?;
    Ok(OutputDistribution {
        q: output_of_weights(channel, &p.kronecker()),
    })
}

fn output_of_weights(channel: &ChannelMatrix, weights: &[f64]) -> Vec<f64> {
    let m = channel.outputs();
    let mut q = vec![0.0; m];
    for (idx, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (qj, &pj) in q.iter_mut().zip(channel.column(idx)) {
            *qj += w * pj;
        }
    }
    q
}

pub fn mutual_information(channel: &ChannelMatrix, p: &IpdProduct) -> Result<f64> {
    channel.check_ipd(p)?;
    let weights = p.kronecker();
    let q = output_of_weights(channel, &weights);
    let mut total = 0.0;
    for (idx, &w) in weights.iter().enumerate() {
        for (j, &pj) in channel.column(idx).iter().enumerate() {
            let coeff = w * pj;
            if coeff > 0.0 {
                total += coeff * (pj / q[j]).ln();
            }
        }
    }
    Ok(total)
}

/// `J(p; i_k) = ∂I/∂p_k(i_k) + 1`.
pub fn score(channel: &ChannelMatrix, p: &IpdProduct, k: usize, i_k: usize) -> Result<f64> {
    channel.check_ipd(p)?;
    channel.mac_type().check_user(k)?;
    let n = channel.mac_type().input_size(k);
    if i_k >= n {
        return Err(Error::InvalidArgument(format!(
            "symbol {i_k} out of range 0..{n} for user {}",
            k + 1
        )));
    }
    let users = channel.mac_type().users();
    let none = vec![false; users];
    let all = vec![true; users];
    let a = log_average_partial(channel, p, &none, k, i_k);
    let b = log_average_partial(channel, p, &all, k, i_k);
    Ok(a - b)
}

/// All scores, `scores[k][i_k]`.
pub fn scores(channel: &ChannelMatrix, p: &IpdProduct) -> Result<Vec<Vec<f64>>> {
    channel.check_ipd(p)?;
    Ok((0..p.users())
        .map(|k| {
            let slice = UserSlice::new(channel, p, k);
            slice.scores(p.part(k))
        })
        .collect())
}

/// The term `I(p_target | p_rest / p_averaged_out)`.
pub fn conditional_mi(
    channel: &ChannelMatrix,
    p: &IpdProduct,
    target: &[usize],
    averaged_out: &[usize],
) -> Result<f64> {
    channel.check_ipd(p)?;
    let users = channel.mac_type().users();
    let mut outer = vec![false; users];
    for &u in averaged_out {
        channel.mac_type().check_user(u)?;
        outer[u] = true;
    }
    let mut inner = outer.clone();
    for &u in target {
        channel.mac_type().check_user(u)?;
        if outer[u] {
            return Err(Error::InvalidArgument(format!(
                "user {} is both a target and averaged out",
                u + 1
            )));
        }
        inner[u] = true;
    }
    if inner == outer {
        return Ok(0.0);
    }
    Ok(log_average_term(channel, p, &outer) - log_average_term(channel, p, &inner))
}

pub fn chain_decomposition(
    channel: &ChannelMatrix,
    p: &IpdProduct,
    order: &[usize],
) -> Result<ChainDecomposition> {
    check_order(order, channel.mac_type().users())?;
    let mut components = Vec::with_capacity(order.len());
    for t in 0..order.len() {
        components.push(conditional_mi(channel, p, &order[t..t + 1], &order[..t])?);
    }
    Ok(ChainDecomposition {
        order: order.to_vec(),
        components,
    })
}

pub fn check_order(order: &[usize], users: usize) -> Result<()> {
    let mut seen = vec![false; users];
    if order.len() != users {
        return Err(Error::InvalidArgument(format!(
            "order {order:?} is not a permutation of {users} users"
        )));
    }
    for &u in order {
        if u >= users || seen[u] {
            return Err(Error::InvalidArgument(format!(
                "order {order:?} is not a permutation of {users} users"
            )));
        }
        seen[u] = true;
    }
    Ok(())
}

/// All user permutations in lexicographic order.
pub fn all_orders(users: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for u in 0..used.len() {
            if !used[u] {
                used[u] = true;
                prefix.push(u);
                rec(prefix, used, out);
                prefix.pop();
                used[u] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; users], &mut out);
    out
}

/// `<σ_S · P>` materialized as an `m x Π_{l∉S} n_l` table, together with
/// the map from full canonical index to reduced index.
struct AveragedMatrix {
    table: Vec<f64>,
    reduce: Vec<usize>,
    m: usize,
}

impl AveragedMatrix {
    fn new(channel: &ChannelMatrix, p: &IpdProduct, averaged: &[bool]) -> Self {
        let t = channel.mac_type();
        let m = t.outputs();
        let reduced_len: usize = (0..t.users())
            .filter(|&k| !averaged[k])
            .map(|k| t.input_size(k))
            .product();
        let mut table = vec![0.0; m * reduced_len];
        let mut reduce = Vec::with_capacity(t.tuple_count());
        for idx in 0..t.tuple_count() {
            let tuple = t.tuple_of(idx);
            let mut r = 0;
            let mut w = 1.0;
            for (k, &i) in tuple.iter().enumerate() {
                if averaged[k] {
                    w *= p.part(k)[i];
                } else {
                    r = r * t.input_size(k) + i;
                }
            }
            reduce.push(r);
            if w != 0.0 {
                for (cell, &pj) in table[r * m..(r + 1) * m].iter_mut().zip(channel.column(idx)) {
                    *cell += w * pj;
                }
            }
        }
        Self { table, reduce, m }
    }

    fn at(&self, j: usize, idx: usize) -> f64 {
        self.table[self.reduce[idx] * self.m + j]
    }
}

/// `T(S)` for the user mask `averaged`.
pub(crate) fn log_average_term(channel: &ChannelMatrix, p: &IpdProduct, averaged: &[bool]) -> f64 {
    let avg = AveragedMatrix::new(channel, p, averaged);
    let weights = p.kronecker();
    let mut total = 0.0;
    for (idx, &w) in weights.iter().enumerate() {
        for (j, &pj) in channel.column(idx).iter().enumerate() {
            let coeff = w * pj;
            if coeff > 0.0 {
                total += coeff * avg.at(j, idx).ln();
            }
        }
    }
    total
}

/// `∂T(S)/∂p_k(i_k)` up to an additive constant that does not depend on
/// `i_k`, for every user and symbol: `partials[k][i_k]`.
pub(crate) fn log_average_partials(
    channel: &ChannelMatrix,
    p: &IpdProduct,
    averaged: &[bool],
) -> Vec<Vec<f64>> {
    let avg = AveragedMatrix::new(channel, p, averaged);
    let t = channel.mac_type();
    let mut out: Vec<Vec<f64>> = t.inputs().iter().map(|&n| vec![0.0; n]).collect();
    for idx in 0..t.tuple_count() {
        let tuple = t.tuple_of(idx);
        let col = channel.column(idx);
        // Σ_j P log <σ_S·P> for this tuple, skipping P = 0.
        let mut inner = 0.0;
        for (j, &pj) in col.iter().enumerate() {
            if pj > 0.0 {
                inner += pj * avg.at(j, idx).ln();
            }
        }
        for k in 0..t.users() {
            let w: f64 = tuple
                .iter()
                .enumerate()
                .filter(|&(l, _)| l != k)
                .map(|(l, &i)| p.part(l)[i])
                .product();
            if w != 0.0 {
                out[k][tuple[k]] += w * inner;
            }
        }
    }
    out
}

fn log_average_partial(
    channel: &ChannelMatrix,
    p: &IpdProduct,
    averaged: &[bool],
    k: usize,
    i_k: usize,
) -> f64 {
    let avg = AveragedMatrix::new(channel, p, averaged);
    let t = channel.mac_type();
    let mut total = 0.0;
    for idx in 0..t.tuple_count() {
        let tuple = t.tuple_of(idx);
        if tuple[k] != i_k {
            continue;
        }
        let w: f64 = tuple
            .iter()
            .enumerate()
            .filter(|&(l, _)| l != k)
            .map(|(l, &i)| p.part(l)[i])
            .product();
        if w == 0.0 {
            continue;
        }
        for (j, &pj) in channel.column(idx).iter().enumerate() {
            if pj > 0.0 {
                total += w * pj * avg.at(j, idx).ln();
            }
        }
    }
    total
}

/// The channel seen by one user while the others keep their vectors fixed.
///
/// With `A(j|i) = Σ_{t: t_k = i} Π_{l≠k} p_l(t_l) P(j|t)` and
/// `h(i) = Σ_{t: t_k = i} Π_{l≠k} p_l(t_l) Σ_j P(j|t) log P(j|t)`, the
/// mutual information as a function of `p_k` alone is
/// `Σ_i p_k(i) h(i) + H(A p_k)`, concave in `p_k`.
#[derive(Debug, Clone)]
pub struct UserSlice {
    /// `a[i * m + j] = A(j | i)`.
    a: Vec<f64>,
    /// `h(i)`, minus the conditional output entropy given symbol `i`.
    h: Vec<f64>,
    m: usize,
}

impl UserSlice {
    pub fn new(channel: &ChannelMatrix, p: &IpdProduct, k: usize) -> Self {
        let t = channel.mac_type();
        let m = t.outputs();
        let n = t.input_size(k);
        let mut a = vec![0.0; n * m];
        let mut h = vec![0.0; n];
        for idx in 0..t.tuple_count() {
            let tuple = t.tuple_of(idx);
            let w: f64 = tuple
                .iter()
                .enumerate()
                .filter(|&(l, _)| l != k)
                .map(|(l, &i)| p.part(l)[i])
                .product();
            if w == 0.0 {
                continue;
            }
            let i = tuple[k];
            for (j, &pj) in channel.column(idx).iter().enumerate() {
                a[i * m + j] += w * pj;
                if pj > 0.0 {
                    h[i] += w * pj * pj.ln();
                }
            }
        }
        Self { a, h, m }
    }

    pub fn symbols(&self) -> usize {
        self.h.len()
    }

    /// Conditional output distribution of symbol `i`.
    pub fn column(&self, i: usize) -> &[f64] {
        &self.a[i * self.m..(i + 1) * self.m]
    }

    pub fn neg_entropy(&self, i: usize) -> f64 {
        self.h[i]
    }

    pub fn output(&self, part: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; self.m];
        for (i, &w) in part.iter().enumerate() {
            if w != 0.0 {
                for (qj, &aj) in q.iter_mut().zip(self.column(i)) {
                    *qj += w * aj;
                }
            }
        }
        q
    }

    fn output_term(&self, i: usize, q: &[f64]) -> f64 {
        self.column(i)
            .iter()
            .zip(q)
            .filter(|(&aj, _)| aj > 0.0)
            .map(|(&aj, &qj)| aj * qj.ln())
            .sum()
    }

    /// `J(p; i)` for every symbol of this user.
    pub fn scores(&self, part: &[f64]) -> Vec<f64> {
        let q = self.output(part);
        (0..self.symbols())
            .map(|i| self.h[i] - self.output_term(i, &q))
            .collect()
    }

    /// Mutual information with this user's vector set to `part`.
    pub fn value(&self, part: &[f64]) -> f64 {
        let q = self.output(part);
        let cond: f64 = part
            .iter()
            .zip(&self.h)
            .filter(|(&w, _)| w > 0.0)
            .map(|(&w, &h)| w * h)
            .sum();
        let out: f64 = q.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum();
        cond - out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FaceProduct, MacType};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    pub(crate) fn adder() -> ChannelMatrix {
        ChannelMatrix::from_fn(MacType::new(vec![2, 2], 3).unwrap(), |t| {
            let mut c = vec![0.0; 3];
            c[t[0] + t[1]] = 1.0;
            c
        })
        .unwrap()
    }

    fn identity2() -> ChannelMatrix {
        ChannelMatrix::new(
            MacType::new(vec![2], 2).unwrap(),
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap()
    }

    fn random_pair(inputs: &[usize], m: usize, seed: u64) -> (ChannelMatrix, IpdProduct) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = MacType::new(inputs.to_vec(), m).unwrap();
        let ch = ChannelMatrix::random(t.clone(), &mut rng);
        let p = IpdProduct::random_on_face(&FaceProduct::full(&t), &t, &mut rng);
        (ch, p)
    }

    #[test]
    fn adder_output_and_information() {
        let ch = adder();
        let p = IpdProduct::uniform(ch.mac_type());
        let q = output_distribution(&ch, &p).unwrap().q;
        assert_eq!(q, vec![0.25, 0.5, 0.25]);
        let i = mutual_information(&ch, &p).unwrap();
        assert!((i - 1.5 * LN_2).abs() < 1e-15);
    }

    #[test]
    fn vertex_output_is_column() {
        let (ch, _) = random_pair(&[2, 3], 3, 1);
        let p = IpdProduct::vertex(ch.mac_type(), &[1, 2]).unwrap();
        let q = output_distribution(&ch, &p).unwrap().q;
        assert_eq!(q, ch.column(5));
        assert_eq!(mutual_information(&ch, &p).unwrap(), 0.0);
    }

    #[test]
    fn output_matches_loop_order_oracle() {
        let (ch, p) = random_pair(&[2, 3], 3, 2);
        let q = output_distribution(&ch, &p).unwrap().q;
        // j outermost, explicit double loop over (i_1, i_2).
        for j in 0..3 {
            let mut s = 0.0;
            for i1 in 0..2 {
                for i2 in 0..3 {
                    s += p.part(0)[i1] * p.part(1)[i2] * ch.get(j, i1 * 3 + i2);
                }
            }
            assert!((q[j] - s).abs() < 1e-14);
        }
    }

    #[test]
    fn identity_channel() {
        let ch = identity2();
        let p = IpdProduct::uniform(ch.mac_type());
        assert!((mutual_information(&ch, &p).unwrap() - LN_2).abs() < 1e-15);
        assert!((score(&ch, &p, 0, 0).unwrap() - LN_2).abs() < 1e-15);
    }

    #[test]
    fn type_mismatch_is_rejected() {
        let ch = adder();
        let p = IpdProduct::new(vec![vec![0.5, 0.5]]).unwrap();
        assert!(matches!(mutual_information(&ch, &p), Err(Error::TypeMismatch(_))));
        let p = IpdProduct::uniform(ch.mac_type());
        assert!(score(&ch, &p, 0, 2).is_err());
        assert!(score(&ch, &p, 2, 0).is_err());
    }

    #[test]
    fn score_average_is_information() {
        for seed in 0..20 {
            let (ch, p) = random_pair(&[3, 2, 2], 3, seed);
            let info = mutual_information(&ch, &p).unwrap();
            let all = scores(&ch, &p).unwrap();
            for k in 0..3 {
                let avg: f64 = p.part(k).iter().zip(&all[k]).map(|(w, j)| w * j).sum();
                assert!((avg - info).abs() < 1e-12, "seed {seed} user {k}");
            }
        }
    }

    #[test]
    fn score_routes_agree() {
        let (ch, p) = random_pair(&[3, 2], 4, 9);
        let all = scores(&ch, &p).unwrap();
        for k in 0..2 {
            for i in 0..ch.mac_type().input_size(k) {
                let single = score(&ch, &p, k, i).unwrap();
                assert!((single - all[k][i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn score_matches_finite_difference() {
        // Directional derivative along e_i - p_k equals J(i) - I.
        let step = 1e-5;
        for seed in 0..10 {
            let (ch, p) = random_pair(&[2, 3], 3, 100 + seed);
            let info = mutual_information(&ch, &p).unwrap();
            for k in 0..2 {
                for i in 0..ch.mac_type().input_size(k) {
                    let shifted = |s: f64| {
                        let part: Vec<f64> = p
                            .part(k)
                            .iter()
                            .enumerate()
                            .map(|(l, &v)| v + s * (if l == i { 1.0 } else { 0.0 } - v))
                            .collect();
                        mutual_information(&ch, &p.with_part(k, part)).unwrap()
                    };
                    let fd = (shifted(step) - shifted(-step)) / (2.0 * step);
                    let analytic = score(&ch, &p, k, i).unwrap() - info;
                    assert!((fd - analytic).abs() < 1e-6, "seed {seed} k {k} i {i}");
                }
            }
        }
    }

    #[test]
    fn chain_examples() {
        let ch = identity2();
        let p = IpdProduct::new(vec![vec![0.3, 0.7]]).unwrap();
        let d = chain_decomposition(&ch, &p, &[0]).unwrap();
        assert!((d.components[0] - mutual_information(&ch, &p).unwrap()).abs() < 1e-15);

        let ch = adder();
        let p = IpdProduct::uniform(ch.mac_type());
        let d = chain_decomposition(&ch, &p, &[0, 1]).unwrap();
        assert!((d.total() - 1.5 * LN_2).abs() < 1e-12);
        // User 1 decoded knowing user 2 carries a full bit.
        assert!((d.components[0] - LN_2).abs() < 1e-12);
        assert!((d.components[1] - 0.5 * LN_2).abs() < 1e-12);
        assert_eq!(d.user_rates().len(), 2);
    }

    #[test]
    fn chain_rejects_bad_orders() {
        let ch = adder();
        let p = IpdProduct::uniform(ch.mac_type());
        assert!(chain_decomposition(&ch, &p, &[0, 0]).is_err());
        assert!(chain_decomposition(&ch, &p, &[0]).is_err());
        assert!(chain_decomposition(&ch, &p, &[0, 2]).is_err());
    }

    #[test]
    fn conditional_mi_edge_cases() {
        let (ch, p) = random_pair(&[2, 2, 2], 3, 5);
        let info = mutual_information(&ch, &p).unwrap();
        let all = conditional_mi(&ch, &p, &[0, 1, 2], &[]).unwrap();
        assert!((all - info).abs() < 1e-13);
        assert_eq!(conditional_mi(&ch, &p, &[], &[0]).unwrap(), 0.0);
        assert!(conditional_mi(&ch, &p, &[0], &[0]).is_err());
        let three = conditional_mi(&ch, &p, &[0], &[]).unwrap()
            + conditional_mi(&ch, &p, &[1], &[0]).unwrap()
            + conditional_mi(&ch, &p, &[2], &[0, 1]).unwrap();
        assert!((three - info).abs() < 1e-10);
    }

    #[test]
    fn orders_enumerated() {
        assert_eq!(all_orders(1), vec![vec![0]]);
        assert_eq!(all_orders(3).len(), 6);
        assert_eq!(all_orders(3)[1], vec![0, 2, 1]);
    }

    #[test]
    fn user_slice_value_matches_information() {
        let (ch, p) = random_pair(&[3, 2], 3, 11);
        for k in 0..2 {
            let slice = UserSlice::new(&ch, &p, k);
            let direct = mutual_information(&ch, &p).unwrap();
            assert!((slice.value(p.part(k)) - direct).abs() < 1e-13);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn instance() -> impl Strategy<Value = (Vec<usize>, usize, u64)> {
            (proptest::collection::vec(2usize..4, 1..4), 2usize..5, any::<u64>())
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn information_bounds((inputs, m, seed) in instance()) {
                let (ch, p) = random_pair(&inputs, m, seed);
                let i = mutual_information(&ch, &p).unwrap();
                prop_assert!(i >= -1e-12);
                prop_assert!(i <= (m as f64).ln() + 1e-12);
            }

            #[test]
            fn concave_along_one_user((inputs, m, seed) in instance(), k_raw in 0usize..3) {
                let (ch, p) = random_pair(&inputs, m, seed);
                let k = k_raw % inputs.len();
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
                let t = ch.mac_type().clone();
                let other = IpdProduct::random_on_face(&FaceProduct::full(&t), &t, &mut rng);
                let p2 = p.with_part(k, other.part(k).to_vec());
                let mid: Vec<f64> = p.part(k).iter().zip(p2.part(k)).map(|(a, b)| 0.5 * (a + b)).collect();
                let pm = p.with_part(k, mid);
                let lhs = mutual_information(&ch, &pm).unwrap();
                let rhs = 0.5 * (mutual_information(&ch, &p).unwrap() + mutual_information(&ch, &p2).unwrap());
                prop_assert!(lhs >= rhs - 1e-12);
            }

            #[test]
            fn every_order_telescopes((inputs, m, seed) in instance()) {
                let (ch, p) = random_pair(&inputs, m, seed);
                let info = mutual_information(&ch, &p).unwrap();
                for order in all_orders(inputs.len()) {
                    let d = chain_decomposition(&ch, &p, &order).unwrap();
                    prop_assert!((d.total() - info).abs() < 1e-10);
                    for c in &d.components {
                        prop_assert!(*c >= -1e-12);
                    }
                }
            }
        }
    }
}
