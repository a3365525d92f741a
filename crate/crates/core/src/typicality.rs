//! Entropy-typical projectors on products of finite-dimensional states.
//!
//! A projector is kept in implicit form: one eigenbasis per position plus
//! the set of eigenvalue-index sequences whose mean surprisal lies within
//! `delta` of the mean per-position entropy. Nothing of size `L^n` is ever
//! materialized.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{hermitian_eig, spectrum_entropy, DensityOperator, C64, EIGENVALUE_FLOOR};
use crate::states::ln_factorial;

/// Largest typical set (in sequences) that will be enumerated.
pub const DEFAULT_SEQUENCE_CAP: usize = 10_000_000;

/// Fixed verification constant for the sandwich and rank bounds.
pub const DEFAULT_C_PRIME: f64 = 3.0;

/// Slack on the typicality window to absorb rounding in surprisal sums.
const WINDOW_SLACK: f64 = 1e-12;

/// Eigenbasis of one position's state with its surprisals `-log2 lambda_k`.
#[derive(Clone, Debug)]
pub struct PositionBasis {
    values: Vec<f64>,
    vectors: DMatrix<C64>,
    surprisal: Vec<f64>,
    entropy: f64,
}

impl PositionBasis {
    pub fn new(rho: &DensityOperator) -> Result<Self> {
        if rho.dim() > u8::MAX as usize + 1 {
            return Err(Error::param("dim", format!("position dimension {} exceeds 256", rho.dim())));
        }
        let eig = hermitian_eig(rho.op())?;
        let values: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
        let surprisal = values
            .iter()
            .map(|&l| if l > EIGENVALUE_FLOOR { -l.log2() } else { f64::INFINITY })
            .collect();
        Ok(Self { entropy: spectrum_entropy(&values), values, vectors: eig.vectors, surprisal })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> &DMatrix<C64> {
        &self.vectors
    }

    pub fn vector(&self, k: usize) -> DVector<C64> {
        self.vectors.column(k).into_owned()
    }

    /// Entropy in bits.
    pub fn entropy(&self) -> f64 {
        self.entropy
    }

    pub fn surprisal(&self, k: usize) -> f64 {
        self.surprisal[k]
    }

    /// `<e_k|rho|e_k>` for every basis vector.
    pub fn diagonal_in_basis(&self, rho: &DensityOperator) -> Result<Vec<f64>> {
        if rho.dim() != self.dim() {
            return Err(Error::DimensionMismatch { left: self.dim(), right: rho.dim() });
        }
        let m = rho.matrix() * &self.vectors;
        Ok((0..self.dim())
            .map(|k| self.vectors.column(k).dotc(&m.column(k)).re.max(0.0))
            .collect())
    }

    fn same_as(&self, other: &PositionBasis) -> bool {
        self.values == other.values && self.vectors == other.vectors
    }
}

/// Typical index sequences, stored as type classes when every position
/// shares one basis.
#[derive(Clone, Debug, PartialEq)]
pub enum TypicalSet {
    /// Count vectors `c` with `sum_k c_k = n`.
    Types(Vec<Vec<usize>>),
    Sequences(Vec<Vec<u8>>),
}

#[derive(Clone, Debug)]
pub struct TypicalProjector {
    n: usize,
    delta: f64,
    positions: Vec<Arc<PositionBasis>>,
    mean_entropy: f64,
    set: TypicalSet,
    size: f64,
}

/// Typical projector of `rho_1 (x) ... (x) rho_n`.
pub fn typical_projector(rhos: &[DensityOperator], delta: f64) -> Result<TypicalProjector> {
    typical_projector_with_cap(rhos, delta, DEFAULT_SEQUENCE_CAP)
}

pub fn typical_projector_with_cap(rhos: &[DensityOperator], delta: f64, cap: usize) -> Result<TypicalProjector> {
    let mut distinct: Vec<(&DensityOperator, Arc<PositionBasis>)> = Vec::new();
    let mut positions = Vec::with_capacity(rhos.len());
    for rho in rhos {
        let basis = match distinct.iter().find(|(r, _)| r.matrix() == rho.matrix()) {
            Some((_, b)) => b.clone(),
            None => {
                let b = Arc::new(PositionBasis::new(rho)?);
                distinct.push((rho, b.clone()));
                b
            }
        };
        positions.push(basis);
    }
    TypicalProjector::from_bases(positions, delta, cap)
}

impl TypicalProjector {
    /// Builds the projector from precomputed per-position bases. Positions
    /// holding the same `Arc` (or equal bases) count as identical.
    pub fn from_bases(positions: Vec<Arc<PositionBasis>>, delta: f64, cap: usize) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::param("delta", format!("must be > 0, got {delta}")));
        }
        let n = positions.len();
        if n == 0 {
            return Err(Error::param("n", "block length must be at least 1"));
        }
        let mean_entropy = positions.iter().map(|p| p.entropy()).sum::<f64>() / n as f64;
        let lo = n as f64 * (mean_entropy - delta) - WINDOW_SLACK;
        let hi = n as f64 * (mean_entropy + delta) + WINDOW_SLACK;
        let identical = positions.iter().all(|p| Arc::ptr_eq(p, &positions[0]) || p.same_as(&positions[0]));
        let (set, size) = if identical {
            enumerate_types(&positions[0], n, lo, hi, cap)?
        } else {
            enumerate_sequences(&positions, lo, hi, cap)?
        };
        Ok(Self { n, delta, positions, mean_entropy, set, size })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Mean per-position entropy in bits.
    pub fn mean_entropy(&self) -> f64 {
        self.mean_entropy
    }

    pub fn positions(&self) -> &[Arc<PositionBasis>] {
        &self.positions
    }

    pub fn set(&self) -> &TypicalSet {
        &self.set
    }

    /// Number of typical sequences, i.e. the rank of the projector.
    pub fn size(&self) -> f64 {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0.0
    }

    /// Membership test for one index sequence.
    pub fn is_typical(&self, seq: &[u8]) -> bool {
        if seq.len() != self.n {
            return false;
        }
        let mut s = 0.0;
        for (t, &k) in seq.iter().enumerate() {
            let basis = &self.positions[t];
            if k as usize >= basis.dim() {
                return false;
            }
            s += basis.surprisal(k as usize);
        }
        (s / self.n as f64 - self.mean_entropy).abs() <= self.delta + WINDOW_SLACK / self.n as f64
    }

    /// Visits every typical sequence.
    pub fn for_each_sequence<F: FnMut(&[u8])>(&self, mut f: F) {
        match &self.set {
            TypicalSet::Sequences(seqs) => seqs.iter().for_each(|s| f(s)),
            TypicalSet::Types(types) => {
                let mut buf = Vec::with_capacity(self.n);
                for counts in types {
                    let mut counts = counts.clone();
                    expand_type(&mut counts, self.n, &mut buf, &mut f);
                }
            }
        }
    }

    pub fn sequences(&self) -> Vec<Vec<u8>> {
        let mut out = Vec::with_capacity(self.size as usize);
        self.for_each_sequence(|s| out.push(s.to_vec()));
        out
    }
}

fn expand_type<F: FnMut(&[u8])>(counts: &mut [usize], n: usize, buf: &mut Vec<u8>, f: &mut F) {
    if buf.len() == n {
        f(buf);
        return;
    }
    for k in 0..counts.len() {
        if counts[k] > 0 {
            counts[k] -= 1;
            buf.push(k as u8);
            expand_type(counts, n, buf, f);
            buf.pop();
            counts[k] += 1;
        }
    }
}

fn ln_multinomial(n: usize, counts: &[usize]) -> f64 {
    ln_factorial(n) - counts.iter().map(|&c| ln_factorial(c)).sum::<f64>()
}

fn enumerate_types(basis: &PositionBasis, n: usize, lo: f64, hi: f64, cap: usize) -> Result<(TypicalSet, f64)> {
    let d = basis.dim();
    let usable: Vec<usize> = (0..d).filter(|&k| basis.surprisal(k).is_finite()).collect();
    let mut types = Vec::new();
    let mut size = 0.0;
    let mut counts = vec![0usize; d];
    fn rec(
        i: usize,
        left: usize,
        usable: &[usize],
        basis: &PositionBasis,
        counts: &mut Vec<usize>,
        partial: f64,
        ctx: (usize, f64, f64, usize),
        types: &mut Vec<Vec<usize>>,
        size: &mut f64,
    ) -> Result<()> {
        let (n, lo, hi, cap) = ctx;
        let k = usable[i];
        if i + 1 == usable.len() {
            counts[k] = left;
            let s = partial + left as f64 * basis.surprisal(k);
            if s >= lo && s <= hi {
                *size += ln_multinomial(n, counts).exp().round();
                if *size > cap as f64 {
                    return Err(Error::TypicalSetCap { cap });
                }
                types.push(counts.clone());
            }
            counts[k] = 0;
            return Ok(());
        }
        for c in 0..=left {
            counts[k] = c;
            rec(i + 1, left - c, usable, basis, counts, partial + c as f64 * basis.surprisal(k), ctx, types, size)?;
        }
        counts[k] = 0;
        Ok(())
    }
    if !usable.is_empty() {
        rec(0, n, &usable, basis, &mut counts, 0.0, (n, lo, hi, cap), &mut types, &mut size)?;
    }
    Ok((TypicalSet::Types(types), size))
}

fn enumerate_sequences(positions: &[Arc<PositionBasis>], lo: f64, hi: f64, cap: usize) -> Result<(TypicalSet, f64)> {
    let n = positions.len();
    let symbols: Vec<Vec<(u8, f64)>> = positions
        .iter()
        .map(|b| {
            (0..b.dim())
                .filter(|&k| b.surprisal(k).is_finite())
                .map(|k| (k as u8, b.surprisal(k)))
                .collect()
        })
        .collect();
    if symbols.iter().any(|s| s.is_empty()) {
        return Ok((TypicalSet::Sequences(Vec::new()), 0.0));
    }
    // suffix extremes for pruning
    let mut min_suffix = vec![0.0; n + 1];
    let mut max_suffix = vec![0.0; n + 1];
    for t in (0..n).rev() {
        let (mn, mx) = symbols[t]
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(_, s)| (a.min(s), b.max(s)));
        min_suffix[t] = min_suffix[t + 1] + mn;
        max_suffix[t] = max_suffix[t + 1] + mx;
    }
    let mut out = Vec::new();
    let mut buf = Vec::with_capacity(n);
    let mut stack: Vec<(usize, usize, f64)> = vec![(0, 0, 0.0)];
    // iterative DFS: (depth, next symbol index, partial sum)
    while let Some((t, j, partial)) = stack.pop() {
        buf.truncate(t);
        if t == n {
            if partial >= lo && partial <= hi {
                if out.len() >= cap {
                    return Err(Error::TypicalSetCap { cap });
                }
                out.push(buf.clone());
            }
            continue;
        }
        if j >= symbols[t].len() {
            continue;
        }
        stack.push((t, j + 1, partial));
        let (k, s) = symbols[t][j];
        let p = partial + s;
        if p + min_suffix[t + 1] <= hi && p + max_suffix[t + 1] >= lo {
            buf.push(k);
            stack.push((t + 1, 0, p));
        }
    }
    out.sort();
    let size = out.len() as f64;
    Ok((TypicalSet::Sequences(out), size))
}

/// `tr(Pi (rho_1 (x) ... (x) rho_n))`, summed over the typical set using the
/// diagonal of each `rho_t` in the projector's basis.
pub fn detection_probability(pi: &TypicalProjector, rhos: &[DensityOperator]) -> Result<f64> {
    if rhos.len() != pi.n {
        return Err(Error::DimensionMismatch { left: pi.n, right: rhos.len() });
    }
    let q: Vec<Vec<f64>> = pi
        .positions
        .iter()
        .zip(rhos)
        .map(|(b, r)| b.diagonal_in_basis(r))
        .collect::<Result<_>>()?;
    let p = match &pi.set {
        TypicalSet::Types(types) if q.iter().all(|x| *x == q[0]) => types
            .iter()
            .map(|c| {
                let mut ln = ln_multinomial(pi.n, c);
                for (k, &ck) in c.iter().enumerate() {
                    if ck > 0 {
                        if q[0][k] == 0.0 {
                            return 0.0;
                        }
                        ln += ck as f64 * q[0][k].ln();
                    }
                }
                ln.exp()
            })
            .sum(),
        _ => {
            let mut total = 0.0;
            pi.for_each_sequence(|s| total += s.iter().enumerate().map(|(t, &k)| q[t][k as usize]).product::<f64>());
            total
        }
    };
    Ok(p.clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl BoundCheck {
    fn at_least(lhs: f64, rhs: f64) -> Self {
        Self { lhs, rhs, pass: lhs >= rhs - 1e-12 }
    }

    fn at_most(lhs: f64, rhs: f64) -> Self {
        Self { lhs, rhs, pass: lhs <= rhs + 1e-12 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TypicalityReport {
    pub n: usize,
    pub delta: f64,
    pub dim: usize,
    pub entropy_bits: f64,
    pub c_prime: f64,
    /// `log2 log2 n`, when positive.
    pub c_prime_loglog: Option<f64>,
    pub typical_set_size: f64,
    pub log2_typical_set_size: f64,
    /// `tr(Pi rho^n) >= 1 - 2 log2(n) exp(-2 n delta^2)`.
    pub detection: BoundCheck,
    /// Largest `b'` with `tr(Pi rho^n) >= 1 - 2^(-b' n delta^2)`.
    pub b_prime_empirical: Option<f64>,
    /// `max_s |log2 lambda_s + n H|` over typical `s` against `n c' delta`.
    pub sandwich: BoundCheck,
    /// `log2 |typical set|` against `n (H + c' delta)`.
    pub rank: BoundCheck,
    /// Rank bound evaluated with `c' = log2 log2 n` (informational).
    pub rank_loglog: Option<BoundCheck>,
    pub all_pass: bool,
}

pub fn verify_typicality_bounds(rho: &DensityOperator, n: usize, delta: f64) -> Result<TypicalityReport> {
    verify_typicality_bounds_with(rho, n, delta, DEFAULT_C_PRIME)
}

pub fn verify_typicality_bounds_with(
    rho: &DensityOperator,
    n: usize,
    delta: f64,
    c_prime: f64,
) -> Result<TypicalityReport> {
    let states = vec![rho.clone(); n];
    let pi = typical_projector(&states, delta)?;
    let h = pi.mean_entropy();
    let basis = pi.positions()[0].clone();
    let nf = n as f64;

    let lhs = detection_probability(&pi, &states)?;
    let rhs = 1.0 - 2.0 * nf.log2() * (-2.0 * nf * delta * delta).exp();
    let detection = BoundCheck::at_least(lhs, rhs);
    let b_prime_empirical = (lhs < 1.0).then(|| -(1.0 - lhs).log2() / (nf * delta * delta));

    let mut worst = 0.0f64;
    if let TypicalSet::Types(types) = pi.set() {
        for c in types {
            let s: f64 = c.iter().enumerate().map(|(k, &ck)| ck as f64 * basis.surprisal(k)).sum();
            worst = worst.max((s - nf * h).abs());
        }
    }
    let sandwich = BoundCheck::at_most(worst, nf * c_prime * delta);

    let log2_size = if pi.is_empty() { f64::NEG_INFINITY } else { pi.size().log2() };
    let rank = BoundCheck::at_most(log2_size, nf * (h + c_prime * delta));
    let loglog = (nf.log2() > 1.0).then(|| nf.log2().log2());
    let rank_loglog = loglog.map(|c| BoundCheck::at_most(log2_size, nf * (h + c * delta)));

    Ok(TypicalityReport {
        n,
        delta,
        dim: rho.dim(),
        entropy_bits: h,
        c_prime,
        c_prime_loglog: loglog,
        typical_set_size: pi.size(),
        log2_typical_set_size: log2_size,
        all_pass: detection.pass && sandwich.pass && rank.pass,
        detection,
        b_prime_empirical,
        sandwich,
        rank,
        rank_loglog,
    })
}
