//! Channel, input-distribution and face types.
//!
//! Input tuples `(i_1, ..., i_N)` are laid out in Kronecker order: user 1
//! varies slowest and user N fastest, so the canonical index is
//! `((i_1 * n_2 + i_2) * n_3 + ...) * n_N + i_N`. Every table in the crate
//! indexed by input tuples follows this layout.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};

/// Tolerance for probability sums on constructed values.
pub const SUM_TOL: f64 = 1e-12;
/// Tolerance for column sums read from channel files. Columns inside this
/// tolerance are renormalized.
pub const FILE_SUM_TOL: f64 = 1e-9;
/// Default threshold for "strictly positive" when computing supports.
pub const ZERO_TOL: f64 = 1e-12;

/// Alphabet sizes `(n_1, ..., n_N; m)` of a multiple-access channel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MacType {
    inputs: Vec<usize>,
    outputs: usize,
}

impl MacType {
    pub fn new(inputs: Vec<usize>, outputs: usize) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidArgument("a MAC needs at least one user".into()));
        }
        if let Some(k) = inputs.iter().position(|&n| n < 2) {
            return Err(Error::InvalidArgument(format!(
                "user {} has input alphabet size {} (< 2)",
                k + 1,
                inputs[k]
            )));
        }
        if outputs < 2 {
            return Err(Error::InvalidArgument(format!(
                "output alphabet size {outputs} (< 2)"
            )));
        }
        Ok(Self { inputs, outputs })
    }

    /// Number of users N.
    pub fn users(&self) -> usize {
        self.inputs.len()
    }

    pub fn inputs(&self) -> &[usize] {
        &self.inputs
    }

    pub fn input_size(&self, k: usize) -> usize {
        self.inputs[k]
    }

    /// Output alphabet size m.
    pub fn outputs(&self) -> usize {
        self.outputs
    }

    /// Number of input tuples, `n_1 * ... * n_N`.
    pub fn tuple_count(&self) -> usize {
        self.inputs.iter().product()
    }

    /// Stride of user `k` in the canonical index.
    pub fn stride(&self, k: usize) -> usize {
        self.inputs[k + 1..].iter().product()
    }

    pub fn canonical_index(&self, tuple: &[usize]) -> Result<usize> {
        canonical_index(tuple, self)
    }

    /// Inverse of [`canonical_index`].
    pub fn tuple_of(&self, mut idx: usize) -> Vec<usize> {
        let mut tuple = vec![0; self.users()];
        for k in (0..self.users()).rev() {
            tuple[k] = idx % self.inputs[k];
            idx /= self.inputs[k];
        }
        tuple
    }

    pub fn check_user(&self, k: usize) -> Result<()> {
        if k >= self.users() {
            return Err(Error::InvalidArgument(format!(
                "user index {k} out of range for {} users",
                self.users()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for MacType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, n) in self.inputs.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, ";{})", self.outputs)
    }
}

/// Parses `n_1,n_2,...,n_N:m` (a `;` separator is accepted as well).
impl FromStr for MacType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().trim_start_matches('(').trim_end_matches(')');
        let (ins, out) = s
            .split_once([':', ';'])
            .ok_or_else(|| Error::InvalidArgument(format!("type `{s}` lacks `:m`")))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("bad alphabet size `{t}`")))
        };
        let inputs = ins.split(',').map(parse).collect::<Result<Vec<_>>>()?;
        MacType::new(inputs, parse(out)?)
    }
}

/// Canonical index of an input tuple; user N varies fastest.
pub fn canonical_index(tuple: &[usize], mac_type: &MacType) -> Result<usize> {
    if tuple.len() != mac_type.users() {
        return Err(Error::InvalidArgument(format!(
            "tuple has {} symbols, type has {} users",
            tuple.len(),
            mac_type.users()
        )));
    }
    let mut idx = 0;
    for (k, (&i, &n)) in tuple.iter().zip(mac_type.inputs()).enumerate() {
        if i >= n {
            return Err(Error::InvalidArgument(format!(
                "symbol {i} of user {} out of range 0..{n}",
                k + 1
            )));
        }
        idx = idx * n + i;
    }
    Ok(idx)
}

/// Transition probabilities `P(j | i_1, ..., i_N)`.
///
/// Stored column-major: the `m` output probabilities of one input tuple are
/// contiguous, and columns follow the canonical index.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    mac_type: MacType,
    probs: Vec<f64>,
}

impl ChannelMatrix {
    /// Builds a channel from columns in canonical order, validating at
    /// [`SUM_TOL`].
    pub fn new(mac_type: MacType, columns: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(mac_type, columns, SUM_TOL, false)
    }

    /// Builds a channel from a column function `f(tuple) -> column`.
    pub fn from_fn(mac_type: MacType, mut f: impl FnMut(&[usize]) -> Vec<f64>) -> Result<Self> {
        let columns = (0..mac_type.tuple_count())
            .map(|idx| f(&mac_type.tuple_of(idx)))
            .collect();
        Self::new(mac_type, columns)
    }

    fn build(
        mac_type: MacType,
        columns: Vec<Vec<f64>>,
        tol: f64,
        renormalize: bool,
    ) -> Result<Self> {
        let m = mac_type.outputs();
        if columns.len() != mac_type.tuple_count() {
            return Err(Error::SizeMismatch {
                expected: format!("{} input tuples", mac_type.tuple_count()),
                found: format!("{}", columns.len()),
            });
        }
        let mut probs = Vec::with_capacity(m * columns.len());
        let mut worst: Option<(usize, f64)> = None;
        for (idx, col) in columns.iter().enumerate() {
            if col.len() != m {
                return Err(Error::SizeMismatch {
                    expected: format!("{m} output probabilities"),
                    found: format!("{} for tuple {:?}", col.len(), mac_type.tuple_of(idx)),
                });
            }
            if let Some(&bad) = col.iter().find(|&&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::InvalidArgument(format!(
                    "probability {bad} outside [0,1] for tuple {:?}",
                    mac_type.tuple_of(idx)
                )));
            }
            let sum: f64 = col.iter().sum();
            let dev = (sum - 1.0).abs();
            if dev > tol && worst.is_none_or(|(_, s)| dev > (s - 1.0).abs()) {
                worst = Some((idx, sum));
            }
            if renormalize && dev > SUM_TOL {
                probs.extend(col.iter().map(|v| v / sum));
            } else {
                probs.extend_from_slice(col);
            }
        }
        if let Some((idx, sum)) = worst {
            return Err(Error::ColumnSum {
                tuple: mac_type.tuple_of(idx),
                sum,
            });
        }
        let tuples = mac_type.tuple_count();
        if let Some(row) = (0..m).find(|&j| (0..tuples).all(|t| probs[t * m + j] == 0.0)) {
            return Err(Error::ZeroRow { row });
        }
        Ok(Self { mac_type, probs })
    }

    /// Random channel with every column drawn from a flat Dirichlet.
    pub fn random<R: Rng + ?Sized>(mac_type: MacType, rng: &mut R) -> Self {
        let m = mac_type.outputs();
        let columns = (0..mac_type.tuple_count())
            .map(|_| dirichlet_flat(m, rng))
            .collect();
        Self::build(mac_type, columns, 1e-9, true).expect("flat Dirichlet columns are valid")
    }

    pub fn mac_type(&self) -> &MacType {
        &self.mac_type
    }

    pub fn outputs(&self) -> usize {
        self.mac_type.outputs()
    }

    /// Output distribution for the input tuple with canonical index `idx`.
    pub fn column(&self, idx: usize) -> &[f64] {
        let m = self.outputs();
        &self.probs[idx * m..(idx + 1) * m]
    }

    pub fn get(&self, j: usize, idx: usize) -> f64 {
        self.probs[idx * self.outputs() + j]
    }

    pub fn check_ipd(&self, p: &IpdProduct) -> Result<()> {
        let sizes: Vec<usize> = p.parts().iter().map(Vec::len).collect();
        if sizes != self.mac_type.inputs() {
            return Err(Error::TypeMismatch(format!(
                "IPD sizes {sizes:?} do not match channel type {}",
                self.mac_type
            )));
        }
        Ok(())
    }
}

/// Parses and validates a channel file.
///
/// ```text
/// # comment
/// type 2 2 : 3
/// 0 0 : 1 0 0
/// 0 1 : 0 1 0
/// 1 0 : 0 1 0
/// 1 1 : 0 0 1
/// ```
pub fn load_channel(source: &str) -> Result<ChannelMatrix> {
    let mut lines = source
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 0,
        message: "empty channel file".into(),
    })?;
    let parse_err = |line: usize, message: String| Error::Parse { line, message };
    let rest = header
        .strip_prefix("type")
        .ok_or_else(|| parse_err(hline, "expected `type n_1 ... n_N : m`".into()))?;
    let (ins, out) = rest
        .split_once(':')
        .ok_or_else(|| parse_err(hline, "missing `:` in type line".into()))?;
    let inputs = ins
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| parse_err(hline, format!("bad input alphabet size: {e}")))?;
    let outputs = out
        .trim()
        .parse::<usize>()
        .map_err(|e| parse_err(hline, format!("bad output alphabet size: {e}")))?;
    let mac_type = MacType::new(inputs, outputs)?;

    let mut columns = Vec::with_capacity(mac_type.tuple_count());
    for (line, text) in lines {
        let idx = columns.len();
        if idx >= mac_type.tuple_count() {
            return Err(Error::SizeMismatch {
                expected: format!("{} input-tuple lines", mac_type.tuple_count()),
                found: format!("extra data at line {line}"),
            });
        }
        let (prefix, values) = text
            .split_once(':')
            .ok_or_else(|| parse_err(line, "missing `:` after input tuple".into()))?;
        let tuple = prefix
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(line, format!("bad input symbol: {e}")))?;
        let expected = mac_type.tuple_of(idx);
        if tuple != expected {
            return Err(parse_err(
                line,
                format!("input tuple {tuple:?} found where {expected:?} was expected"),
            ));
        }
        let col = values
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(line, format!("bad probability: {e}")))?;
        if col.len() != mac_type.outputs() {
            return Err(Error::SizeMismatch {
                expected: format!("{} probabilities", mac_type.outputs()),
                found: format!("{} at line {line}", col.len()),
            });
        }
        columns.push(col);
    }
    if columns.len() != mac_type.tuple_count() {
        return Err(Error::SizeMismatch {
            expected: format!("{} input-tuple lines", mac_type.tuple_count()),
            found: format!("{}", columns.len()),
        });
    }
    ChannelMatrix::build(mac_type, columns, FILE_SUM_TOL, true)
}

/// Writes a channel in the text format read by [`load_channel`], with 17
/// significant digits per probability.
pub fn save_channel(channel: &ChannelMatrix) -> String {
    let t = channel.mac_type();
    let mut out = String::from("type");
    for n in t.inputs() {
        out.push_str(&format!(" {n}"));
    }
    out.push_str(&format!(" : {}\n", t.outputs()));
    for idx in 0..t.tuple_count() {
        let tuple = t.tuple_of(idx);
        let syms: Vec<String> = tuple.iter().map(usize::to_string).collect();
        let vals: Vec<String> = channel
            .column(idx)
            .iter()
            .map(|v| format!("{v:.16e}"))
            .collect();
        out.push_str(&format!("{} : {}\n", syms.join(" "), vals.join(" ")));
    }
    out
}

/// Product input distribution `p_1 x ... x p_N`, one probability vector per
/// user, always stored at full alphabet length.
#[derive(Debug, Clone, PartialEq)]
pub struct IpdProduct {
    parts: Vec<Vec<f64>>,
}

impl IpdProduct {
    pub fn new(parts: Vec<Vec<f64>>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidArgument("IPD needs at least one user".into()));
        }
        for (k, part) in parts.iter().enumerate() {
            if part.is_empty() {
                return Err(Error::InvalidArgument(format!("user {} has empty IPD", k + 1)));
            }
            if part.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "user {} has a negative or non-finite probability",
                    k + 1
                )));
            }
            let sum: f64 = part.iter().sum();
            if (sum - 1.0).abs() > SUM_TOL {
                return Err(Error::InvalidArgument(format!(
                    "user {} probabilities sum to {sum}",
                    k + 1
                )));
            }
        }
        Ok(Self { parts })
    }

    /// Normalizes each part and clamps negatives to zero. Used for iterates
    /// that are probability vectors up to rounding.
    pub(crate) fn from_unnormalized(mut parts: Vec<Vec<f64>>) -> Self {
        for part in &mut parts {
            for v in part.iter_mut() {
                if !(*v > 0.0) {
                    *v = 0.0;
                }
            }
            let sum: f64 = part.iter().sum();
            for v in part.iter_mut() {
                *v /= sum;
            }
        }
        Self { parts }
    }

    pub fn uniform(mac_type: &MacType) -> Self {
        Self::barycenter(&FaceProduct::full(mac_type), mac_type)
    }

    /// Uniform distribution over each user's face support.
    pub fn barycenter(face: &FaceProduct, mac_type: &MacType) -> Self {
        let parts = face
            .supports()
            .iter()
            .zip(mac_type.inputs())
            .map(|(s, &n)| {
                let mut v = vec![0.0; n];
                for &i in s {
                    v[i] = 1.0 / s.len() as f64;
                }
                v
            })
            .collect();
        Self { parts }
    }

    /// Deterministic inputs: user k always sends `symbols[k]`.
    pub fn vertex(mac_type: &MacType, symbols: &[usize]) -> Result<Self> {
        canonical_index(symbols, mac_type)?;
        let parts = symbols
            .iter()
            .zip(mac_type.inputs())
            .map(|(&i, &n)| {
                let mut v = vec![0.0; n];
                v[i] = 1.0;
                v
            })
            .collect();
        Ok(Self { parts })
    }

    /// Random IPD with each user's part drawn from a flat Dirichlet on its
    /// face support.
    pub fn random_on_face<R: Rng + ?Sized>(
        face: &FaceProduct,
        mac_type: &MacType,
        rng: &mut R,
    ) -> Self {
        let parts = face
            .supports()
            .iter()
            .zip(mac_type.inputs())
            .map(|(s, &n)| {
                let w = dirichlet_flat(s.len(), rng);
                let mut v = vec![0.0; n];
                for (&i, x) in s.iter().zip(w) {
                    v[i] = x;
                }
                v
            })
            .collect();
        Self { parts }
    }

    pub fn users(&self) -> usize {
        self.parts.len()
    }

    pub fn parts(&self) -> &[Vec<f64>] {
        &self.parts
    }

    pub fn part(&self, k: usize) -> &[f64] {
        &self.parts[k]
    }

    pub fn into_parts(self) -> Vec<Vec<f64>> {
        self.parts
    }

    /// Copy with user `k`'s vector replaced.
    pub fn with_part(&self, k: usize, part: Vec<f64>) -> Self {
        let mut parts = self.parts.clone();
        parts[k] = part;
        Self { parts }
    }

    /// Kronecker product `p_1 x ... x p_N` in canonical order.
    pub fn kronecker(&self) -> Vec<f64> {
        let mut acc = vec![1.0];
        for part in &self.parts {
            acc = acc
                .iter()
                .flat_map(|&a| part.iter().map(move |&b| a * b))
                .collect();
        }
        acc
    }

    /// Largest coordinate-wise difference to `other`.
    pub fn max_abs_diff(&self, other: &IpdProduct) -> f64 {
        self.parts
            .iter()
            .zip(&other.parts)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// Product of faces `F_1 x ... x F_N`, given by each user's index set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FaceProduct {
    supports: Vec<Vec<usize>>,
}

impl FaceProduct {
    pub fn new(supports: Vec<Vec<usize>>) -> Result<Self> {
        for (k, s) in supports.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::InvalidArgument(format!("user {} has an empty face", k + 1)));
            }
            if s.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "user {} face indices {s:?} are not strictly increasing",
                    k + 1
                )));
            }
        }
        Ok(Self { supports })
    }

    /// The whole domain X.
    pub fn full(mac_type: &MacType) -> Self {
        Self {
            supports: mac_type.inputs().iter().map(|&n| (0..n).collect()).collect(),
        }
    }

    pub fn supports(&self) -> &[Vec<usize>] {
        &self.supports
    }

    pub fn support(&self, k: usize) -> &[usize] {
        &self.supports[k]
    }

    pub fn contains(&self, k: usize, i: usize) -> bool {
        self.supports[k].binary_search(&i).is_ok()
    }

    /// Face dimensions plus one, `f_k = |Λ(F_k)|`.
    pub fn sizes(&self) -> Vec<usize> {
        self.supports.iter().map(Vec::len).collect()
    }

    /// Every user's face is a subset of `other`'s.
    pub fn is_subface_of(&self, other: &FaceProduct) -> bool {
        self.supports.len() == other.supports.len()
            && self
                .supports
                .iter()
                .enumerate()
                .all(|(k, s)| s.iter().all(|&i| other.contains(k, i)))
    }

    pub fn check_type(&self, mac_type: &MacType) -> Result<()> {
        if self.supports.len() != mac_type.users() {
            return Err(Error::TypeMismatch(format!(
                "face has {} users, channel has {}",
                self.supports.len(),
                mac_type.users()
            )));
        }
        for (k, (s, &n)) in self.supports.iter().zip(mac_type.inputs()).enumerate() {
            if s.last().is_some_and(|&i| i >= n) {
                return Err(Error::InvalidArgument(format!(
                    "face of user {} uses index {} >= {n}",
                    k + 1,
                    s.last().unwrap()
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for FaceProduct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, s) in self.supports.iter().enumerate() {
            if k > 0 {
                write!(f, " x ")?;
            }
            let items: Vec<String> = s.iter().map(usize::to_string).collect();
            write!(f, "{{{}}}", items.join(","))?;
        }
        Ok(())
    }
}

/// Checks that `p` lives on `face` and returns it unchanged; faces never
/// re-index vectors.
pub fn restrict(p: &IpdProduct, face: &FaceProduct) -> Result<IpdProduct> {
    if p.users() != face.supports().len() {
        return Err(Error::TypeMismatch(format!(
            "IPD has {} users, face has {}",
            p.users(),
            face.supports().len()
        )));
    }
    for (k, part) in p.parts().iter().enumerate() {
        if face.support(k).last().is_some_and(|&i| i >= part.len()) {
            return Err(Error::InvalidArgument(format!(
                "face of user {} exceeds alphabet size {}",
                k + 1,
                part.len()
            )));
        }
        let outside: f64 = part
            .iter()
            .enumerate()
            .filter(|(i, _)| !face.contains(k, *i))
            .map(|(_, v)| v)
            .sum();
        if outside > SUM_TOL {
            return Err(Error::InvalidArgument(format!(
                "user {} puts mass {outside} outside its face",
                k + 1
            )));
        }
    }
    Ok(p.clone())
}

/// Smallest face containing `p` in its relative interior.
pub fn minimum_face(p: &IpdProduct, zero_tol: f64) -> Result<FaceProduct> {
    let supports = p
        .parts()
        .iter()
        .enumerate()
        .map(|(k, part)| {
            let s: Vec<usize> = (0..part.len()).filter(|&i| part[i] > zero_tol).collect();
            if s.is_empty() {
                Err(Error::DegenerateInput(format!(
                    "user {} has no entry above {zero_tol}",
                    k + 1
                )))
            } else {
                Ok(s)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FaceProduct { supports })
}

pub(crate) fn dirichlet_flat<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..len)
        .map(|_| {
            let x: f64 = Exp1.sample(rng);
            x.max(f64::MIN_POSITIVE)
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}
