//! Random-binning identification code over the broadcast channel: codeword
//! pool, per-receiver bins, binning-property checks, intersection-based
//! transmission, union-span typical decoders and Monte Carlo error
//! estimation.
//!
//! Rates and binning exponents are in nats; Holevo quantities arrive in bits
//! and are converted once via [`NATS_PER_BIT`].

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{energy_check, marginal, BroadcastParams, Codeword, EnergyMode, Receiver};
use crate::error::{Error, Result};
use crate::fock::{hermitian_eig_matrix, DensityOperator, C64, NATS_PER_BIT};
use crate::rates::{holevo_of_ensemble, Constellation};
use crate::states::{has_mass_loss, truncation_channel, TruncationSpec};
use crate::typicality::{PositionBasis, TypicalProjector, DEFAULT_SEQUENCE_CAP};

pub const DEFAULT_POOL_CAP: usize = 100_000;
pub const DEFAULT_GENERATOR_CAP: usize = 2_000;
pub const DEFAULT_ETA: f64 = 0.05;
pub const DEFAULT_DELTA: f64 = 0.25;

/// Redraw budget per codeword under the energy constraint.
pub const MAX_ENERGY_ATTEMPTS: usize = 1_000;

/// Cutoff used to build the physical channel outputs before they are cut to
/// the receiver's `L` levels.
const MODEL_CUTOFF: usize = 40;

/// Gram eigenvalues below this fraction of the largest are treated as zero.
const GRAM_RANK_TOL: f64 = 1e-10;

const POOL_STREAM: u64 = 0;
const BIN_STREAM: u64 = 1;
const TRIAL_STREAM_BASE: u64 = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdCodeParams {
    pub n: usize,
    /// `R_P`, nats.
    pub pool_rate: f64,
    /// `R~_1, R~_2`, nats.
    pub bin_rates: [f64; 2],
    /// `R_1, R_2`, nats.
    pub id_rates: [f64; 2],
    pub mu: f64,
    /// Typicality window, bits.
    pub delta: f64,
    /// Typical-projector failure allowance entering `lambda`.
    pub eta: f64,
    /// Acceptance threshold used to classify false positives.
    pub eta_detect: f64,
    /// Receiver Fock cutoff `L`: outcomes `>= L` reject.
    pub cutoff: usize,
    pub messages: [usize; 2],
}

impl IdCodeParams {
    pub fn new(n: usize, pool_rate: f64, bin_rates: [f64; 2], id_rates: [f64; 2], mu: f64, messages: [usize; 2]) -> Self {
        Self {
            n,
            pool_rate,
            bin_rates,
            id_rates,
            mu,
            delta: DEFAULT_DELTA,
            eta: DEFAULT_ETA,
            eta_detect: DEFAULT_ETA,
            cutoff: Self::default_cutoff(n),
            messages,
        }
    }

    /// `ceil(log2 n)`, at least 1.
    pub fn default_cutoff(n: usize) -> usize {
        ((n.max(2) as f64).log2().ceil() as usize).max(1)
    }

    /// Every violated constraint, one line each.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n == 0 {
            out.push("n must be at least 1".to_string());
        }
        let finite = |x: f64| x.is_finite() && x >= 0.0;
        if !finite(self.pool_rate) {
            out.push(format!("R_P = {} must be finite and >= 0", self.pool_rate));
        }
        let [t1, t2] = self.bin_rates;
        if !(t1.max(t2) < self.pool_rate && self.pool_rate < t1 + t2) {
            out.push(format!(
                "pool rate must satisfy max(Rt1, Rt2) < R_P < Rt1 + Rt2, got R_P = {}, Rt = ({t1}, {t2})",
                self.pool_rate
            ));
        }
        for i in 0..2 {
            let limit = (self.pool_rate - self.bin_rates[i]).min(self.bin_rates[i] - self.id_rates[i]);
            if !(self.mu > 0.0 && self.mu < limit) {
                out.push(format!(
                    "mu = {} must lie in (0, min(R_P - Rt{}, Rt{} - R{})) = (0, {limit})",
                    self.mu,
                    i + 1,
                    i + 1,
                    i + 1
                ));
            }
            if !finite(self.id_rates[i]) {
                out.push(format!("R{} = {} must be finite and >= 0", i + 1, self.id_rates[i]));
            }
            if self.messages[i] == 0 {
                out.push(format!("M{} must be at least 1", i + 1));
            }
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            out.push(format!("delta = {} must be > 0", self.delta));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            out.push(format!("eta = {} must lie in (0, 1)", self.eta));
        }
        if !(self.eta_detect > 0.0 && self.eta_detect < 1.0) {
            out.push(format!("eta_detect = {} must lie in (0, 1)", self.eta_detect));
        }
        if self.cutoff == 0 {
            out.push("L must be at least 1".to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }

    /// `round(e^(n R_P))`, at least 1.
    pub fn pool_size(&self) -> usize {
        (self.n as f64 * self.pool_rate).exp().round().max(1.0) as usize
    }

    /// `e^(-n (R_P - R~_i))`, clamped to `[0, 1]`.
    pub fn inclusion_probability(&self, receiver: Receiver) -> f64 {
        (-(self.n as f64) * (self.pool_rate - self.bin_rates[receiver.slot()])).exp().clamp(0.0, 1.0)
    }

    /// `delta_n = e^(-n mu / 2)`.
    pub fn delta_n(&self) -> f64 {
        (-(self.n as f64) * self.mu / 2.0).exp()
    }

    /// `(1/n) ln ln M_i`, the identification rate realized by `M_i` messages.
    pub fn realized_id_rate(&self, receiver: Receiver) -> Option<f64> {
        let m = self.messages[receiver.slot()] as f64;
        (m > 1.0 && m.ln() > 1.0).then(|| m.ln().ln() / self.n as f64)
    }
}

/// Codeword pool as constellation indices, `pool[v][t]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pool {
    pub codewords: Vec<Vec<u8>>,
    /// Codewords redrawn because they broke the energy constraint.
    pub redraws: usize,
}

impl Pool {
    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn codeword(&self, v: usize, constellation: &Constellation) -> Codeword {
        let pts = constellation.points();
        Codeword { symbols: self.codewords[v].iter().map(|&c| pts[c as usize].amplitude).collect() }
    }
}

/// Draws `round(e^(n R_P))` codewords with i.i.d. symbols from the
/// constellation, redrawing any codeword that fails the energy check.
pub fn generate_pool<R: Rng + ?Sized>(
    params: &IdCodeParams,
    constellation: &Constellation,
    channel: &BroadcastParams,
    mode: EnergyMode,
    cap: usize,
    rng: &mut R,
) -> Result<Pool> {
    let size = params.pool_size();
    if size > cap {
        return Err(Error::PoolCap { size, cap, max_rate: (cap as f64).ln() / params.n as f64 });
    }
    if constellation.len() > u8::MAX as usize + 1 {
        return Err(Error::param("constellation", "at most 256 points are supported"));
    }
    let dist = WeightedIndex::new(constellation.probabilities())
        .map_err(|e| Error::param("constellation", e.to_string()))?;
    let mut codewords = Vec::with_capacity(size);
    let mut redraws = 0;
    for _ in 0..size {
        let mut attempts = 0;
        loop {
            let cw: Vec<u8> = (0..params.n).map(|_| dist.sample(rng) as u8).collect();
            let pts = constellation.points();
            let word = Codeword { symbols: cw.iter().map(|&c| pts[c as usize].amplitude).collect() };
            attempts += 1;
            if energy_check(&word, channel, mode).pass {
                codewords.push(cw);
                break;
            }
            redraws += 1;
            if attempts >= MAX_ENERGY_ATTEMPTS {
                return Err(Error::EnergyConstraint { attempts });
            }
        }
    }
    Ok(Pool { codewords, redraws })
}

/// Sorted member lists of each message's bin.
pub type Bins = Vec<Vec<usize>>;

/// Independent inclusion of each `(v, m_i, i)` with probability
/// `e^(-n (R_P - R~_i))`.
pub fn assign_bins<R: Rng + ?Sized>(pool_size: usize, params: &IdCodeParams, rng: &mut R) -> [Bins; 2] {
    Receiver::BOTH.map(|r| {
        let p = params.inclusion_probability(r);
        (0..params.messages[r.slot()])
            .map(|_| (0..pool_size).filter(|_| rng.random::<f64>() < p).collect())
            .collect()
    })
}

fn intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut k) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                k += 1;
                i += 1;
                j += 1;
            }
        }
    }
    k
}

fn intersection(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinCheck {
    pub message: usize,
    pub size: usize,
    pub lower_ok: bool,
    pub upper_ok: bool,
    /// Largest `|V_m ∩ V_m'|` over `m' != m`.
    pub max_overlap: usize,
    pub overlap_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapChain {
    /// `delta_n < 1/3`.
    pub precondition: bool,
    /// `max |V_m ∩ V_m'| / |V_m|`.
    pub max_ratio: f64,
    /// `2 delta_n / (1 - delta_n)`.
    pub bound: f64,
    pub pass: bool,
    /// Whether the ratio also stays below `delta_n` itself.
    pub below_delta_n: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinningReport {
    pub n: usize,
    pub bin_rate: f64,
    pub mu: f64,
    pub delta_n: f64,
    pub expected_size: f64,
    pub lower: f64,
    pub upper: f64,
    pub overlap_limit: f64,
    pub messages: Vec<BinCheck>,
    /// All three properties hold for every message.
    pub good: bool,
    /// Present only for good assignments.
    pub overlap_chain: Option<OverlapChain>,
}

/// Checks `(1 - d) e^(n R~) < |V_m| < (1 + d) e^(n R~)` and
/// `|V_m ∩ V_m'| < 2 d e^(n R~)` with `d = e^(-n mu / 2)`.
pub fn verify_binning(bins: &[Vec<usize>], n: usize, bin_rate: f64, mu: f64) -> BinningReport {
    let delta_n = (-(n as f64) * mu / 2.0).exp();
    let expected = (n as f64 * bin_rate).exp();
    let (lower, upper, overlap_limit) = ((1.0 - delta_n) * expected, (1.0 + delta_n) * expected, 2.0 * delta_n * expected);
    let mut max_ratio = 0.0f64;
    let messages: Vec<BinCheck> = bins
        .iter()
        .enumerate()
        .map(|(m, bin)| {
            let max_overlap = bins
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != m)
                .map(|(_, other)| intersection_len(bin, other))
                .max()
                .unwrap_or(0);
            if !bin.is_empty() {
                max_ratio = max_ratio.max(max_overlap as f64 / bin.len() as f64);
            }
            let size = bin.len();
            BinCheck {
                message: m,
                size,
                lower_ok: size as f64 > lower,
                upper_ok: (size as f64) < upper,
                max_overlap,
                overlap_ok: bins.len() < 2 || (max_overlap as f64) < overlap_limit,
            }
        })
        .collect();
    let good = messages.iter().all(|c| c.lower_ok && c.upper_ok && c.overlap_ok);
    let overlap_chain = good.then(|| {
        let bound = 2.0 * delta_n / (1.0 - delta_n);
        OverlapChain {
            precondition: delta_n < 1.0 / 3.0,
            max_ratio,
            bound,
            pass: max_ratio < bound,
            below_delta_n: max_ratio < delta_n,
        }
    });
    BinningReport {
        n,
        bin_rate,
        mu,
        delta_n,
        expected_size: expected,
        lower,
        upper,
        overlap_limit,
        messages,
        good,
        overlap_chain,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdCodebook {
    pub pool: Pool,
    pub bins: [Bins; 2],
    pub seed: u64,
}

impl IdCodebook {
    /// Pool and bins from independent streams of one seed.
    pub fn generate(
        params: &IdCodeParams,
        constellation: &Constellation,
        channel: &BroadcastParams,
        mode: EnergyMode,
        pool_cap: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(POOL_STREAM);
        let pool = generate_pool(params, constellation, channel, mode, pool_cap, &mut rng)?;
        rng.set_stream(BIN_STREAM);
        rng.set_word_pos(0);
        let bins = assign_bins(pool.len(), params, &mut rng);
        Ok(Self { pool, bins, seed })
    }
}

/// Uniform choice from `V_m1 ∩ V_m2`; pool index 0 with `true` when the
/// intersection is empty.
pub fn select_transmit<R: Rng + ?Sized>(codebook: &IdCodebook, m1: usize, m2: usize, rng: &mut R) -> (usize, bool) {
    let common = intersection(&codebook.bins[0][m1], &codebook.bins[1][m2]);
    if common.is_empty() {
        (0, true)
    } else {
        (common[rng.random_range(0..common.len())], false)
    }
}

/// One receiver's view of the constellation: the outputs restricted to the
/// first `L` levels and the eigenbases of their truncation-channel images.
#[derive(Clone, Debug)]
pub struct ReceiverModel {
    receiver: Receiver,
    cutoff: usize,
    passed: Vec<DensityOperator>,
    truncated: Vec<DensityOperator>,
    bases: Vec<Arc<PositionBasis>>,
    holevo_bits: f64,
    /// `<e_{c,k}|e_{c',k'}>` indexed by `c * L + k`.
    overlap: DMatrix<C64>,
    /// `<e_{c,k}|sigma_w|e_{c',k'}>` per symbol `w`.
    sandwich: Vec<DMatrix<C64>>,
}

impl ReceiverModel {
    pub fn new(receiver: Receiver, constellation: &Constellation, channel: &BroadcastParams, cutoff: usize) -> Result<Self> {
        if cutoff == 0 {
            return Err(Error::param("L", "receiver cutoff must be at least 1"));
        }
        let spec = TruncationSpec::new(MODEL_CUTOFF.max(2 * cutoff))?;
        let mut passed = Vec::with_capacity(constellation.len());
        let mut truncated = Vec::with_capacity(constellation.len());
        for p in constellation.points() {
            let rho = marginal(receiver, p.amplitude, channel, &spec)?;
            if has_mass_loss(&rho) {
                return Err(Error::TruncationLoss { trace: rho.trace(), cutoff: spec.cutoff() });
            }
            passed.push(rho.crop(cutoff));
            truncated.push(truncation_channel(&rho, cutoff)?);
        }
        let bases: Vec<Arc<PositionBasis>> =
            truncated.iter().map(|r| PositionBasis::new(r).map(Arc::new)).collect::<Result<_>>()?;
        let (holevo_bits, _) = holevo_of_ensemble(&constellation.probabilities(), &truncated)?;

        let k = constellation.len();
        let dim = k * cutoff;
        let vec_of = |idx: usize| bases[idx / cutoff].vectors().column(idx % cutoff).into_owned();
        let vecs: Vec<_> = (0..dim).map(vec_of).collect();
        let overlap = DMatrix::from_fn(dim, dim, |a, b| vecs[a].dotc(&vecs[b]));
        let sandwich = passed
            .iter()
            .map(|s| {
                let sv: Vec<_> = vecs.iter().map(|v| s.matrix() * v).collect();
                DMatrix::from_fn(dim, dim, |a, b| vecs[a].dotc(&sv[b]))
            })
            .collect();
        Ok(Self { receiver, cutoff, passed, truncated, bases, holevo_bits, overlap, sandwich })
    }

    pub fn receiver(&self) -> Receiver {
        self.receiver
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// `T_L rho_c T_L` per constellation point.
    pub fn passed_states(&self) -> &[DensityOperator] {
        &self.passed
    }

    /// Truncation-channel outputs per constellation point.
    pub fn truncated_states(&self) -> &[DensityOperator] {
        &self.truncated
    }

    pub fn bases(&self) -> &[Arc<PositionBasis>] {
        &self.bases
    }

    /// Holevo information of the truncated outputs, bits.
    pub fn holevo_bits(&self) -> f64 {
        self.holevo_bits
    }

    /// Typical projector of one codeword's truncated output states.
    pub fn codeword_projector(&self, codeword: &[u8], delta: f64) -> Result<TypicalProjector> {
        let positions = codeword.iter().map(|&c| self.bases[c as usize].clone()).collect();
        TypicalProjector::from_bases(positions, delta, DEFAULT_SEQUENCE_CAP)
    }

    /// `T_L rho_{w_t} T_L` for every position of a codeword.
    pub fn codeword_states(&self, codeword: &[u8]) -> Vec<DensityOperator> {
        codeword.iter().map(|&c| self.passed[c as usize].clone()).collect()
    }
}

/// Projector onto the span of the typical subspaces of a bin's codewords,
/// held as generator labels plus the pseudo-inverse of their Gram matrix.
#[derive(Clone, Debug)]
pub struct BinDecoder {
    pub message: usize,
    /// Per generator, `c * L + k` at each position.
    generators: Vec<Vec<u16>>,
    kernel: DMatrix<C64>,
    rank: usize,
}

impl BinDecoder {
    pub fn generator_count(&self) -> usize {
        self.generators.len()
    }

    /// Dimension of the decoder's range.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `tr(Pi_m (sigma_{w_1} (x) ... (x) sigma_{w_n}))` for the states that pass
    /// the photon-number stage.
    pub fn acceptance(&self, model: &ReceiverModel, codeword: &[u8]) -> f64 {
        let g = self.generators.len();
        let mut total = C64::new(0.0, 0.0);
        for a in 0..g {
            for b in 0..g {
                let kab = self.kernel[(a, b)];
                if kab == C64::new(0.0, 0.0) {
                    continue;
                }
                let mut prod = C64::new(1.0, 0.0);
                for (t, &w) in codeword.iter().enumerate() {
                    prod *= model.sandwich[w as usize][(self.generators[b][t] as usize, self.generators[a][t] as usize)];
                }
                total += kab * prod;
            }
        }
        total.re.clamp(0.0, 1.0)
    }
}

/// Decoder for receiver `model.receiver()` and message `message`.
pub fn build_decoder(
    codebook: &IdCodebook,
    model: &ReceiverModel,
    message: usize,
    delta: f64,
    cap: usize,
) -> Result<BinDecoder> {
    let bin = &codebook.bins[model.receiver.slot()][message];
    if bin.is_empty() {
        return Err(Error::EmptyBin { message });
    }
    let l = model.cutoff;
    let mut generators: Vec<Vec<u16>> = Vec::new();
    for &v in bin {
        let cw = &codebook.pool.codewords[v];
        let pi = model.codeword_projector(cw, delta)?;
        if generators.len() as f64 + pi.size() > cap as f64 {
            let total = generators.len() + pi.size() as usize;
            return Err(Error::SubspaceCap { message, generators: total, cap });
        }
        pi.for_each_sequence(|s| {
            generators.push(s.iter().zip(cw).map(|(&k, &c)| (c as usize * l + k as usize) as u16).collect());
        });
    }
    generators.sort();
    generators.dedup();
    let g = generators.len();
    if g == 0 {
        return Ok(BinDecoder { message, generators, kernel: DMatrix::zeros(0, 0), rank: 0 });
    }
    let gram = DMatrix::from_fn(g, g, |a, b| {
        generators[a]
            .iter()
            .zip(&generators[b])
            .map(|(&x, &y)| model.overlap[(x as usize, y as usize)])
            .product::<C64>()
    });
    let eig = hermitian_eig_matrix((&gram + gram.adjoint()).scale(0.5));
    let top = eig.values.first().copied().unwrap_or(0.0);
    let mut kernel = DMatrix::<C64>::zeros(g, g);
    let mut rank = 0;
    for (j, &lam) in eig.values.iter().enumerate() {
        if lam > GRAM_RANK_TOL * top {
            let u = eig.vectors.column(j);
            kernel += (u * u.adjoint()).unscale(lam);
            rank += 1;
        }
    }
    Ok(BinDecoder { message, generators, kernel, rank })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FallbackAccounting {
    /// Fallback transmissions are decoded like any other codeword.
    Operational,
    /// Fallback transmissions count as missed and false errors at both receivers.
    Pessimistic,
}

impl std::str::FromStr for FallbackAccounting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "operational" => Ok(Self::Operational),
            "pessimistic" => Ok(Self::Pessimistic),
            other => Err(Error::param("accounting", format!("unknown mode `{other}`"))),
        }
    }
}

/// Empirical frequency with its 95% Wilson interval and the mean of the
/// underlying acceptance probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub errors: u64,
    pub trials: u64,
    pub rate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub expected: f64,
}

impl ErrorEstimate {
    fn new(errors: u64, trials: u64, expected_sum: f64) -> Self {
        let (lo, hi) = wilson_interval(errors, trials);
        let nf = trials.max(1) as f64;
        Self { errors, trials, rate: errors as f64 / nf, wilson_low: lo, wilson_high: hi, expected: expected_sum / nf }
    }
}

/// 95% Wilson score interval.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalBounds {
    pub information_nats: f64,
    /// `eta + 2^(1 - L/2)`.
    pub lambda_cutoff: f64,
    /// `eta + 2 / sqrt(n)`.
    pub lambda_sqrt_n: f64,
    /// `e^(-n mu / 2)`.
    pub overlap_term: f64,
    /// `e^(-n (I - R~ - delta))`.
    pub hypothesis_term: f64,
    pub false_bound: f64,
}

/// Missed and false identification bounds for one receiver. Fails when the
/// binning rate is not below the mutual information.
pub fn theoretical_error_bounds(params: &IdCodeParams, receiver: Receiver, holevo_bits: f64) -> Result<TheoreticalBounds> {
    let info = holevo_bits * NATS_PER_BIT;
    let rt = params.bin_rates[receiver.slot()];
    if rt >= info {
        return Err(Error::DesignCondition { receiver: receiver.slot() + 1, bin_rate: rt, information: info });
    }
    let n = params.n as f64;
    let overlap_term = (-n * params.mu / 2.0).exp();
    let hypothesis_term = (-n * (info - rt - params.delta)).exp();
    Ok(TheoreticalBounds {
        information_nats: info,
        lambda_cutoff: params.eta + 2f64.powf(1.0 - params.cutoff as f64 / 2.0),
        lambda_sqrt_n: params.eta + 2.0 / n.sqrt(),
        overlap_term,
        hypothesis_term,
        false_bound: overlap_term + hypothesis_term,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReceiverReport {
    pub holevo_bits: f64,
    pub information_nats: f64,
    /// Worst message.
    pub missed: ErrorEstimate,
    pub missed_per_message: Vec<ErrorEstimate>,
    /// Worst `(m, m')` pair; absent with a single message.
    pub false_id: Option<ErrorEstimate>,
    pub generator_counts: Vec<usize>,
    pub decoder_ranks: Vec<usize>,
    pub empty_bins: Vec<usize>,
    /// `(v, m')` with `v` outside bin `m'` yet accepted with probability
    /// above `eta_detect`.
    pub false_positive_pairs: usize,
    pub bounds: Option<TheoreticalBounds>,
    pub binning: BinningReport,
}

/// Everything a simulation run needs besides the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSetup {
    pub params: IdCodeParams,
    pub channel: BroadcastParams,
    pub constellation: Constellation,
    pub energy_mode: EnergyMode,
    pub accounting: FallbackAccounting,
    pub trials: usize,
    pub pool_cap: usize,
    pub generator_cap: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub pool_size: usize,
    pub energy_redraws: usize,
    /// Message pairs whose bins do not intersect.
    pub empty_intersections: usize,
    /// Fraction of trials that fell back to the default codeword.
    pub fallback: ErrorEstimate,
    pub receivers: [ReceiverReport; 2],
    pub warnings: Vec<String>,
}

struct TrialOutcome {
    messages: [usize; 2],
    fallback: bool,
    detected: [bool; 2],
    detect_prob: [f64; 2],
    /// Per receiver, per other message: accepted and acceptance probability.
    false_hits: [Vec<(bool, f64)>; 2],
}

/// Builds the codebook and decoders, then runs `trials` identification
/// rounds. Trial `t` sends the message pair `(t mod M1, (t / M1) mod M2)`
/// using its own random stream.
pub fn simulate(setup: &SimulationSetup, seed: u64) -> Result<SimulationReport> {
    let p = &setup.params;
    p.validate()?;
    setup.channel.validate()?;
    if setup.trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    let mut warnings = Vec::new();
    let codebook = IdCodebook::generate(p, &setup.constellation, &setup.channel, setup.energy_mode, setup.pool_cap, seed)?;
    let models: Vec<ReceiverModel> = Receiver::BOTH
        .iter()
        .map(|&r| ReceiverModel::new(r, &setup.constellation, &setup.channel, p.cutoff))
        .collect::<Result<_>>()?;

    let pool = &codebook.pool;
    // acceptance[i][m][v]
    let mut acceptance: Vec<Vec<Vec<f64>>> = Vec::with_capacity(2);
    let mut decoder_meta = Vec::with_capacity(2);
    for model in &models {
        let i = model.receiver.slot();
        let mut table = Vec::with_capacity(p.messages[i]);
        let (mut counts, mut ranks, mut empty) = (Vec::new(), Vec::new(), Vec::new());
        for m in 0..p.messages[i] {
            match build_decoder(&codebook, model, m, p.delta, setup.generator_cap) {
                Ok(dec) => {
                    counts.push(dec.generator_count());
                    ranks.push(dec.rank());
                    table.push(pool.codewords.par_iter().map(|cw| dec.acceptance(model, cw)).collect::<Vec<f64>>());
                }
                Err(Error::EmptyBin { .. }) => {
                    counts.push(0);
                    ranks.push(0);
                    empty.push(m);
                    table.push(vec![0.0; pool.len()]);
                }
                Err(e) => return Err(e),
            }
        }
        if !empty.is_empty() {
            warnings.push(format!("receiver {}: empty bins {:?} reject every output", i + 1, empty));
        }
        acceptance.push(table);
        decoder_meta.push((counts, ranks, empty));
    }

    let empty_intersections = (0..p.messages[0])
        .flat_map(|a| (0..p.messages[1]).map(move |b| (a, b)))
        .filter(|&(a, b)| intersection_len(&codebook.bins[0][a], &codebook.bins[1][b]) == 0)
        .count();

    let pessimistic = setup.accounting == FallbackAccounting::Pessimistic;
    let outcomes: Vec<TrialOutcome> = (0..setup.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(TRIAL_STREAM_BASE + t as u64);
            let m1 = t % p.messages[0];
            let m2 = (t / p.messages[0]) % p.messages[1];
            let (v, fallback) = select_transmit(&codebook, m1, m2, &mut rng);
            let messages = [m1, m2];
            let mut detected = [false; 2];
            let mut detect_prob = [0.0; 2];
            let mut false_hits: [Vec<(bool, f64)>; 2] = [Vec::new(), Vec::new()];
            for i in 0..2 {
                let a = acceptance[i][messages[i]][v];
                let hit = rng.random::<f64>() < a;
                (detected[i], detect_prob[i]) = if fallback && pessimistic { (false, 0.0) } else { (hit, a) };
                for (m, row) in acceptance[i].iter().enumerate() {
                    if m == messages[i] {
                        continue;
                    }
                    let a = row[v];
                    let hit = rng.random::<f64>() < a;
                    false_hits[i].push(if fallback && pessimistic { (true, 1.0) } else { (hit, a) });
                }
            }
            TrialOutcome { messages, fallback, detected, detect_prob, false_hits }
        })
        .collect();

    let fallbacks = outcomes.iter().filter(|o| o.fallback).count() as u64;
    let fallback = ErrorEstimate::new(fallbacks, setup.trials as u64, fallbacks as f64);
    if fallbacks > 0 {
        warnings.push(format!("{fallbacks} of {} trials used the default codeword", setup.trials));
    }

    let mut receivers = Vec::with_capacity(2);
    for (model, (counts, ranks, empty)) in models.iter().zip(decoder_meta) {
        let i = model.receiver.slot();
        let mi = p.messages[i];
        let mut missed_per_message = Vec::with_capacity(mi);
        let mut false_id: Option<ErrorEstimate> = None;
        for m in 0..mi {
            let mine: Vec<&TrialOutcome> = outcomes.iter().filter(|o| o.messages[i] == m).collect();
            let misses = mine.iter().filter(|o| !o.detected[i]).count() as u64;
            let exp: f64 = mine.iter().map(|o| 1.0 - o.detect_prob[i]).sum();
            missed_per_message.push(ErrorEstimate::new(misses, mine.len() as u64, exp));
            for slot in 0..mi.saturating_sub(1) {
                let hits = mine.iter().filter(|o| o.false_hits[i][slot].0).count() as u64;
                let exp: f64 = mine.iter().map(|o| o.false_hits[i][slot].1).sum();
                let est = ErrorEstimate::new(hits, mine.len() as u64, exp);
                if false_id.is_none_or(|f| est.rate > f.rate) {
                    false_id = Some(est);
                }
            }
        }
        let missed = missed_per_message
            .iter()
            .copied()
            .max_by(|a, b| a.rate.total_cmp(&b.rate))
            .expect("at least one message");

        let mut false_positive_pairs = 0;
        for (m, row) in acceptance[i].iter().enumerate() {
            for (v, &a) in row.iter().enumerate() {
                if a > p.eta_detect && codebook.bins[i][m].binary_search(&v).is_err() {
                    false_positive_pairs += 1;
                }
            }
        }
        let bounds = match theoretical_error_bounds(p, model.receiver, model.holevo_bits) {
            Ok(b) => Some(b),
            Err(e @ Error::DesignCondition { .. }) => {
                warnings.push(e.to_string());
                None
            }
            Err(e) => return Err(e),
        };
        receivers.push(ReceiverReport {
            holevo_bits: model.holevo_bits,
            information_nats: model.holevo_bits * NATS_PER_BIT,
            missed,
            missed_per_message,
            false_id,
            generator_counts: counts,
            decoder_ranks: ranks,
            empty_bins: empty,
            false_positive_pairs,
            bounds,
            binning: verify_binning(&codebook.bins[i], p.n, p.bin_rates[i], p.mu),
        });
    }
    let receivers: [ReceiverReport; 2] = receivers.try_into().map_err(|_| Error::param("receivers", "expected two"))?;
    Ok(SimulationReport {
        seed,
        pool_size: pool.len(),
        energy_redraws: pool.redraws,
        empty_intersections,
        fallback,
        receivers,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinningStudyRow {
    pub n: usize,
    pub pool_size: usize,
    pub assignments: usize,
    pub failures: usize,
    pub failure_fraction: f64,
    pub chain_checked: usize,
    pub chain_failures: usize,
}

/// Fraction of seeded assignments of `messages` bins that leave the good
/// set, for each block length.
pub fn binning_study(
    ns: &[usize],
    pool_rate: f64,
    bin_rate: f64,
    mu: f64,
    messages: usize,
    assignments: usize,
    pool_cap: usize,
    seed: u64,
) -> Result<Vec<BinningStudyRow>> {
    ns.iter()
        .map(|&n| {
            let params = IdCodeParams::new(n, pool_rate, [bin_rate, bin_rate], [0.0, 0.0], mu, [messages, 1]);
            let pool_size = params.pool_size();
            if pool_size > pool_cap {
                return Err(Error::PoolCap { size: pool_size, cap: pool_cap, max_rate: (pool_cap as f64).ln() / n as f64 });
            }
            let reports: Vec<BinningReport> = (0..assignments)
                .into_par_iter()
                .map(|a| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(((n as u64) << 32) | a as u64);
                    let [bins, _] = assign_bins(pool_size, &params, &mut rng);
                    verify_binning(&bins, n, bin_rate, mu)
                })
                .collect();
            let failures = reports.iter().filter(|r| !r.good).count();
            let chains: Vec<&OverlapChain> = reports.iter().filter_map(|r| r.overlap_chain.as_ref()).collect();
            Ok(BinningStudyRow {
                n,
                pool_size,
                assignments,
                failures,
                failure_fraction: failures as f64 / assignments.max(1) as f64,
                chain_checked: chains.iter().filter(|c| c.precondition).count(),
                chain_failures: chains.iter().filter(|c| c.precondition && !c.pass).count(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::tensor;
    use crate::rates::ConstellationPoint;
    use crate::states::CoherentAmplitude;
    use crate::typicality::detection_probability;
    use nalgebra::DVector;

    fn qpsk(energy: f64) -> Constellation {
        let r = energy.sqrt();
        Constellation::new(
            (0..4)
                .map(|k| ConstellationPoint {
                    probability: 0.25,
                    amplitude: CoherentAmplitude::from(C64::from_polar(r, std::f64::consts::FRAC_PI_2 * k as f64)),
                })
                .collect(),
        )
        .unwrap()
    }

    fn channel() -> BroadcastParams {
        BroadcastParams::new(0.8, 0.6, 0.05, 0.05, 1.0).unwrap()
    }

    fn params(n: usize) -> IdCodeParams {
        IdCodeParams::new(n, 0.12, [0.08, 0.08], [0.02, 0.02], 0.035, [4, 4])
    }

    #[test]
    fn params_validation_lists_every_problem() {
        assert!(params(8).validate().is_ok());
        let mut p = params(8);
        p.pool_rate = 0.5;
        p.mu = -1.0;
        p.messages = [0, 0];
        match p.validate() {
            Err(Error::Config(list)) => assert!(list.len() >= 5, "{list:?}"),
            other => panic!("{other:?}"),
        }
        assert_eq!(IdCodeParams::default_cutoff(8), 3);
        assert_eq!(IdCodeParams::default_cutoff(16), 4);
    }

    #[test]
    fn pool_of_one_and_determinism() {
        let mut p = params(4);
        p.pool_rate = 0.0;
        let c = qpsk(0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pool = generate_pool(&p, &c, &channel(), EnergyMode::PerSymbol, DEFAULT_POOL_CAP, &mut rng).unwrap();
        assert_eq!(pool.len(), 1);
        let a = IdCodebook::generate(&params(10), &c, &channel(), EnergyMode::PerSymbol, DEFAULT_POOL_CAP, 7).unwrap();
        let b = IdCodebook::generate(&params(10), &c, &channel(), EnergyMode::PerSymbol, DEFAULT_POOL_CAP, 7).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn pool_cap_reports_rate() {
        let mut p = params(40);
        p.pool_rate = 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = generate_pool(&p, &qpsk(0.5), &channel(), EnergyMode::PerSymbol, 1000, &mut rng).unwrap_err();
        assert!(matches!(err, Error::PoolCap { cap: 1000, .. }));
    }

    #[test]
    fn literal_energy_mode_rejects_multi_symbol_qpsk() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = generate_pool(&params(4), &qpsk(0.5), &channel(), EnergyMode::Literal, DEFAULT_POOL_CAP, &mut rng);
        assert!(matches!(err, Err(Error::EnergyConstraint { .. })));
    }

    #[test]
    fn pool_symbol_energy_statistics() {
        // unequal-energy constellation with mean energy 0.5
        let c = Constellation::new(vec![
            ConstellationPoint { probability: 0.5, amplitude: CoherentAmplitude::real(0.0) },
            ConstellationPoint { probability: 0.5, amplitude: CoherentAmplitude::real(1.0) },
        ])
        .unwrap();
        let mut p = params(8);
        p.pool_rate = (10_000f64).ln() / 8.0;
        let big = BroadcastParams::new(1.0, 0.0, 0.0, 0.0, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pool = generate_pool(&p, &c, &big, EnergyMode::PerSymbol, DEFAULT_POOL_CAP, &mut rng).unwrap();
        assert_eq!(pool.len(), 10_000);
        let symbols = (pool.len() * 8) as f64;
        let mean = pool.codewords.iter().flatten().map(|&s| c.points()[s as usize].amplitude.energy()).sum::<f64>() / symbols;
        // Bernoulli(1/2) energies: sd 0.5 per symbol
        assert!((mean - 0.5).abs() <= 3.0 * 0.5 / symbols.sqrt(), "{mean}");
    }

    #[test]
    fn full_inclusion_when_bin_rate_equals_pool_rate() {
        let mut p = params(6);
        p.bin_rates = [p.pool_rate, p.pool_rate];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bins = assign_bins(5, &p, &mut rng);
        for b in bins.iter().flatten() {
            assert_eq!(b, &vec![0, 1, 2, 3, 4]);
        }
    }

    #[test]
    fn bin_sizes_match_binomial_mean() {
        let p = IdCodeParams::new(20, 0.14, [0.09, 0.09], [0.02, 0.02], 0.04, [1, 1]);
        let pool = p.pool_size();
        let q = p.inclusion_probability(Receiver::One);
        let mut sizes = Vec::new();
        for s in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            sizes.push(assign_bins(pool, &p, &mut rng)[0][0].len() as f64);
        }
        let mean = sizes.iter().sum::<f64>() / 200.0;
        let expect = pool as f64 * q;
        let sd = (pool as f64 * q * (1.0 - q) / 200.0).sqrt();
        assert!((mean - expect).abs() <= 3.0 * sd, "{mean} vs {expect}");
        assert!((expect - (20.0f64 * 0.09).exp()).abs() / expect < 0.1);
    }

    #[test]
    fn joint_membership_is_independent() {
        // chi-square on the 2x2 table of (v in bin from seed a, v in bin from seed b)
        let p = IdCodeParams::new(20, 0.14, [0.09, 0.09], [0.02, 0.02], 0.04, [1, 1]);
        let pool = p.pool_size();
        let mut table = [[0f64; 2]; 2];
        for s in 0..200u64 {
            let a = assign_bins(pool, &p, &mut ChaCha8Rng::seed_from_u64(2 * s))[0][0].clone();
            let b = assign_bins(pool, &p, &mut ChaCha8Rng::seed_from_u64(2 * s + 1))[0][0].clone();
            for v in 0..pool {
                table[a.contains(&v) as usize][b.contains(&v) as usize] += 1.0;
            }
        }
        let total: f64 = table.iter().flatten().sum();
        let rows = [table[0][0] + table[0][1], table[1][0] + table[1][1]];
        let cols = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
        let chi2: f64 = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| {
                let e = rows[i] * cols[j] / total;
                (table[i][j] - e).powi(2) / e
            })
            .sum();
        // 99.9% quantile of chi-square with one degree of freedom
        assert!(chi2 < 10.83, "{chi2}");
    }

    #[test]
    fn binning_report_cases() {
        let single = verify_binning(&[vec![0, 1, 2]], 10, (3f64).ln() / 10.0, 0.05);
        assert!(single.messages[0].overlap_ok);
        assert!(single.good);
        let same = vec![(0..50).collect::<Vec<_>>(); 3];
        let r = verify_binning(&same, 40, (50f64).ln() / 40.0, 0.1);
        assert!(r.messages.iter().all(|m| !m.overlap_ok));
        assert!(!r.good);
        assert!(r.overlap_chain.is_none());
    }

    #[test]
    fn binning_failures_decrease_with_n() {
        let rows = binning_study(&[20, 40, 80], 0.12, 0.08, 0.035, 8, 200, DEFAULT_POOL_CAP, 11).unwrap();
        let f: Vec<f64> = rows.iter().map(|r| r.failure_fraction).collect();
        assert!(f[0] > f[1] && f[1] > f[2], "{f:?}");
        assert!(rows.iter().all(|r| r.chain_failures == 0));
    }

    #[test]
    fn transmit_selection() {
        let pool = Pool { codewords: vec![vec![0]; 6], redraws: 0 };
        let full: Bins = vec![(0..6).collect()];
        let cb = IdCodebook { pool: pool.clone(), bins: [full.clone(), full], seed: 0 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let (v, fb) = select_transmit(&cb, 0, 0, &mut rng);
            assert!(v < 6 && !fb);
        }
        let cb = IdCodebook { pool, bins: [vec![vec![1, 2]], vec![vec![3, 4]]], seed: 0 };
        assert_eq!(select_transmit(&cb, 0, 0, &mut rng), (0, true));
    }

    #[test]
    fn empty_intersection_rate_decreases() {
        let rates: Vec<f64> = [20usize, 40]
            .iter()
            .map(|&n| {
                let p = IdCodeParams::new(n, 0.12, [0.09, 0.09], [0.02, 0.02], 0.025, [4, 4]);
                let mut empty = 0;
                for s in 0..100 {
                    let mut rng = ChaCha8Rng::seed_from_u64(s);
                    let [b1, b2] = assign_bins(p.pool_size(), &p, &mut rng);
                    for a in &b1 {
                        for b in &b2 {
                            empty += (intersection_len(a, b) == 0) as usize;
                        }
                    }
                }
                empty as f64 / 1600.0
            })
            .collect();
        assert!(rates[0] < 0.05 && rates[1] <= rates[0], "{rates:?}");
    }

    fn explicit(model: &ReceiverModel, gens: &[Vec<u16>]) -> Vec<DVector<C64>> {
        let l = model.cutoff();
        gens.iter()
            .map(|g| {
                let mut v = DVector::from_element(1, C64::new(1.0, 0.0));
                for &idx in g {
                    let e = model.bases()[idx as usize / l].vector(idx as usize % l);
                    v = DVector::from_fn(v.len() * l, |i, _| v[i / l] * e[i % l]);
                }
                v
            })
            .collect()
    }

    fn dense_state(model: &ReceiverModel, cw: &[u8]) -> DMatrix<C64> {
        let states = model.codeword_states(cw);
        let mut big = states[0].op().clone();
        for s in &states[1..] {
            big = tensor(&big, s.op()).unwrap();
        }
        big.into_matrix()
    }

    /// Orthonormal basis of the span via SVD, independent of the Gram route.
    fn dense_projector(vectors: &[DVector<C64>]) -> DMatrix<C64> {
        let dim = vectors[0].len();
        let m = DMatrix::from_fn(dim, vectors.len(), |r, c| vectors[c][r]);
        let svd = m.svd(true, false);
        let u = svd.u.unwrap();
        let top = svd.singular_values[0];
        let mut p = DMatrix::<C64>::zeros(dim, dim);
        for (j, &s) in svd.singular_values.iter().enumerate() {
            if s > 1e-7 * top {
                let c = u.column(j);
                p += c * c.adjoint();
            }
        }
        p
    }

    #[test]
    fn decoder_matches_dense_and_dominates_members() {
        let n = 6;
        let mut p = params(n);
        p.cutoff = 2;
        let c = qpsk(0.5);
        let ch = channel();
        let model = ReceiverModel::new(Receiver::One, &c, &ch, 2).unwrap();
        let pool = Pool { codewords: vec![vec![0, 1, 2, 3, 0, 1], vec![2, 2, 1, 0, 3, 3], vec![1, 1, 1, 1, 1, 1]], redraws: 0 };
        let cb = IdCodebook { pool, bins: [vec![vec![0, 1], vec![2]], vec![vec![0]]], seed: 0 };
        let dec = build_decoder(&cb, &model, 0, p.delta, DEFAULT_GENERATOR_CAP).unwrap();
        let proj = dense_projector(&explicit(&model, &dec.generators));
        for cw in &cb.pool.codewords {
            let dense = (&proj * dense_state(&model, cw)).trace().re;
            assert!((dec.acceptance(&model, cw) - dense).abs() < 1e-9);
        }
        for &v in &cb.bins[0][0] {
            let cw = &cb.pool.codewords[v];
            let pv = model.codeword_projector(cw, p.delta).unwrap();
            let member = detection_probability(&pv, &model.codeword_states(cw)).unwrap();
            assert!(dec.acceptance(&model, cw) >= member - 1e-12);
            // exact containment: Pi g = g for every generator of P_v
            let own: Vec<Vec<u16>> = pv
                .sequences()
                .iter()
                .map(|s| s.iter().zip(cw).map(|(&k, &c)| (c as usize * 2 + k as usize) as u16).collect())
                .collect();
            for g in explicit(&model, &own) {
                assert!((&proj * &g - &g).norm() < 1e-9);
            }
        }
        // single-codeword bin reduces to that codeword's typical projector
        let one = build_decoder(&cb, &model, 1, p.delta, DEFAULT_GENERATOR_CAP).unwrap();
        let cw = &cb.pool.codewords[2];
        let pv = model.codeword_projector(cw, p.delta).unwrap();
        let direct = detection_probability(&pv, &model.codeword_states(cw)).unwrap();
        assert!((one.acceptance(&model, cw) - direct).abs() < 1e-10);
    }

    #[test]
    fn own_codeword_detection_at_n8() {
        let n = 8;
        let c = qpsk(0.5);
        let model = ReceiverModel::new(Receiver::One, &c, &channel(), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let dist = WeightedIndex::new(c.probabilities()).unwrap();
        let bound = 1.0 - DEFAULT_ETA - 2f64.powf(1.0 - 3.0 / 2.0);
        for _ in 0..10 {
            let cw: Vec<u8> = (0..n).map(|_| dist.sample(&mut rng) as u8).collect();
            let cb = IdCodebook {
                pool: Pool { codewords: vec![cw.clone()], redraws: 0 },
                bins: [vec![vec![0]], vec![vec![0]]],
                seed: 0,
            };
            let dec = build_decoder(&cb, &model, 0, 0.25, DEFAULT_GENERATOR_CAP).unwrap();
            assert!(dec.acceptance(&model, &cw) >= bound);
        }
    }

    #[test]
    fn generator_cap_and_empty_bin() {
        let c = qpsk(0.5);
        let model = ReceiverModel::new(Receiver::One, &c, &channel(), 2).unwrap();
        let cb = IdCodebook {
            pool: Pool { codewords: vec![vec![0; 8], vec![1; 8]], redraws: 0 },
            bins: [vec![vec![0, 1], vec![]], vec![vec![0]]],
            seed: 0,
        };
        assert!(matches!(build_decoder(&cb, &model, 0, 0.25, 1), Err(Error::SubspaceCap { .. })));
        assert!(matches!(build_decoder(&cb, &model, 1, 0.25, 100), Err(Error::EmptyBin { message: 1 })));
    }

    #[test]
    fn bound_arithmetic() {
        let mut p = params(8);
        p.mu = 0.2;
        p.delta = 0.25;
        p.bin_rates = [0.1, 0.1];
        let info_bits = 0.45 / NATS_PER_BIT;
        let b = theoretical_error_bounds(&p, Receiver::One, info_bits).unwrap();
        assert!((b.false_bound - 0.898_657_928_234_443_2).abs() < 1e-4);
        assert!((b.lambda_sqrt_n - (0.05 + 2.0 / 8f64.sqrt())).abs() < 1e-15);
        p.mu = 1e6;
        assert_eq!(theoretical_error_bounds(&p, Receiver::One, info_bits).unwrap().overlap_term, 0.0);
        assert!(matches!(
            theoretical_error_bounds(&p, Receiver::One, 0.05 / NATS_PER_BIT),
            Err(Error::DesignCondition { .. })
        ));
    }

    #[test]
    fn wilson_cases() {
        let (lo, hi) = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.036_994_5).abs() < 1e-5);
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.403_831).abs() < 1e-5 && (hi - 0.596_169).abs() < 1e-5);
    }

    fn setup(n: usize, messages: [usize; 2], trials: usize) -> SimulationSetup {
        let mut p = params(n);
        p.messages = messages;
        p.cutoff = 2;
        SimulationSetup {
            params: p,
            channel: channel(),
            constellation: qpsk(0.5),
            energy_mode: EnergyMode::PerSymbol,
            accounting: FallbackAccounting::Operational,
            trials,
            pool_cap: DEFAULT_POOL_CAP,
            generator_cap: DEFAULT_GENERATOR_CAP,
        }
    }

    #[test]
    fn single_message_has_no_false_error() {
        let r = simulate(&setup(6, [1, 1], 50), 3).unwrap();
        assert!(r.receivers.iter().all(|x| x.false_id.is_none()));
    }

    #[test]
    fn simulation_is_deterministic() {
        let s = setup(6, [4, 4], 200);
        let a = serde_json::to_string(&simulate(&s, 9).unwrap()).unwrap();
        let b = serde_json::to_string(&simulate(&s, 9).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
