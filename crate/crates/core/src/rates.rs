//! Thermal entropy function, capacity formulas, identification rate regions
//! and Holevo quantities of discrete coherent-state constellations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{marginal, BroadcastParams, Receiver};
use crate::error::{Error, Result};
use crate::fock::{trace_distance, von_neumann_entropy, DensityOperator, C64};
use crate::states::{thermal_state, CoherentAmplitude, TruncationSpec, MASS_LOSS_TOL};

/// Entropy in bits of a thermal state with mean photon number `x`:
/// `g(x) = (x+1) log2(x+1) - x log2 x`.
pub fn gordon_g(x: f64) -> Result<f64> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::param("x", format!("g is defined for finite x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok((x + 1.0) * x.ln_1p() / std::f64::consts::LN_2 - x * x.log2())
}

fn g(x: f64) -> f64 {
    gordon_g(x).expect("non-negative argument")
}

/// Point-to-point capacity `g(tau E + (1 - tau) N) - g((1 - tau) N)` in bits.
pub fn capacity_p2p(tau: f64, energy: f64, noise: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&tau) || !(energy >= 0.0) || !(noise >= 0.0) {
        return Err(Error::param("tau/E/N", "tau must lie in [0, 1] and E, N must be >= 0"));
    }
    let env = (1.0 - tau) * noise;
    Ok(gordon_g(tau * energy + env)? - gordon_g(env)?)
}

/// Corner `(R1max, R2max)` of the identification rate region, in bits:
/// `R_i <= g(tau_i E + N_i) - g(N_i)`.
pub fn id_rate_corner(params: &BroadcastParams) -> Result<(f64, f64)> {
    params.validate()?;
    let r = |tau: f64, n: f64| g(tau * params.energy + n) - g(n);
    Ok((r(params.tau1, params.n1), r(params.tau2, params.n2)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRegionPoint {
    pub tau1: f64,
    pub r1: f64,
    pub r2: f64,
}

/// Region corners along the beam splitter line `tau2 = 1 - tau1`, with
/// `tau1` stepping uniformly over `[0, 1]`.
pub fn rate_region_sweep(n1: f64, n2: f64, energy: f64, steps: usize) -> Result<Vec<RateRegionPoint>> {
    if steps < 2 {
        return Err(Error::param("steps", format!("need at least 2, got {steps}")));
    }
    (0..steps)
        .map(|k| {
            let tau1 = k as f64 / (steps - 1) as f64;
            let params = BroadcastParams::beam_splitter(tau1, n1, n2, energy)?;
            let (r1, r2) = id_rate_corner(&params)?;
            Ok(RateRegionPoint { tau1, r1: r1.max(0.0), r2: r2.max(0.0) })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstellationPoint {
    pub probability: f64,
    pub amplitude: CoherentAmplitude,
}

/// Discrete input ensemble `{(p_k, alpha_k)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constellation {
    points: Vec<ConstellationPoint>,
}

impl Constellation {
    pub fn new(points: Vec<ConstellationPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::param("constellation", "needs at least one point"));
        }
        if points.iter().any(|p| !(p.probability >= 0.0)) {
            return Err(Error::param("constellation", "probabilities must be >= 0"));
        }
        let total: f64 = points.iter().map(|p| p.probability).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::param("constellation", format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[ConstellationPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.probability).collect()
    }

    /// `sum_k p_k |alpha_k|^2`.
    pub fn mean_energy(&self) -> f64 {
        self.points.iter().map(|p| p.probability * p.amplitude.energy()).sum()
    }

    /// `sum_k p_k alpha_k`.
    pub fn mean_amplitude(&self) -> C64 {
        self.points.iter().map(|p| p.amplitude.value() * p.probability).sum()
    }

    pub fn satisfies_energy(&self, energy: f64) -> bool {
        self.mean_energy() <= energy * (1.0 + 1e-9)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscretizationScheme {
    /// Uniform square grid with Gaussian weights clipped to the grid.
    SquareGrid,
    /// Equal-probability rings with uniformly spaced phases.
    Rings,
}

impl std::str::FromStr for DiscretizationScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" | "square-grid" => Ok(Self::SquareGrid),
            "rings" => Ok(Self::Rings),
            other => Err(Error::param("scheme", format!("unknown scheme `{other}`"))),
        }
    }
}

fn isqrt(x: usize) -> usize {
    let mut s = (x as f64).sqrt() as usize;
    while (s + 1) * (s + 1) <= x {
        s += 1;
    }
    while s * s > x {
        s -= 1;
    }
    s
}

/// Discrete approximation of the circular Gaussian ensemble with density
/// `exp(-|alpha|^2 / E) / (pi E)` using at most `x` points.
///
/// The square grid uses `floor(sqrt(x))^2` points with spacing chosen so
/// that truncation of the tails and aliasing of the lattice sum decay at the
/// same rate in the side length. The ring scheme places the radii at the
/// conditional mean energy of equal-probability shells, which keeps the
/// mean energy exact. Amplitudes are scaled down if the discretized mean
/// energy would exceed `E`.
pub fn discretize_gaussian(energy: f64, x: usize, scheme: DiscretizationScheme) -> Result<Constellation> {
    if x == 0 {
        return Err(Error::param("x", "constellation size must be at least 1"));
    }
    if !(energy >= 0.0 && energy.is_finite()) {
        return Err(Error::param("E", "must be finite and >= 0"));
    }
    let origin = || {
        Constellation::new(vec![ConstellationPoint { probability: 1.0, amplitude: CoherentAmplitude::real(0.0) }])
    };
    if x == 1 || energy == 0.0 {
        return origin();
    }
    let raw: Vec<(f64, C64)> = match scheme {
        DiscretizationScheme::SquareGrid => {
            let side = isqrt(x);
            if side == 1 {
                return origin();
            }
            let sigma = (energy / 2.0).sqrt();
            let h = sigma * (4.0 * std::f64::consts::PI / side as f64).sqrt();
            let coord = |j: usize| (j as f64 - (side - 1) as f64 / 2.0) * h;
            let mut pts = Vec::with_capacity(side * side);
            for i in 0..side {
                for j in 0..side {
                    let a = C64::new(coord(i), coord(j));
                    pts.push(((-a.norm_sqr() / energy).exp(), a));
                }
            }
            pts
        }
        DiscretizationScheme::Rings => {
            let (rings, phases) = if x < 8 { (1, x) } else {
                let p = isqrt(x).max(8);
                ((x / p).max(1), p)
            };
            let mut pts = Vec::with_capacity(rings * phases);
            for k in 0..rings {
                // shell [a, b) in energy holding probability 1/rings
                let a = -energy * (1.0 - k as f64 / rings as f64).ln();
                let r2 = if k + 1 == rings {
                    a + energy
                } else {
                    let b = -energy * (1.0 - (k + 1) as f64 / rings as f64).ln();
                    let (ea, eb) = ((-a / energy).exp(), (-b / energy).exp());
                    ((a + energy) * ea - (b + energy) * eb) / (ea - eb)
                };
                let offset = if k % 2 == 1 { 0.5 } else { 0.0 };
                for j in 0..phases {
                    let theta = 2.0 * std::f64::consts::PI * (j as f64 + offset) / phases as f64;
                    pts.push((1.0, C64::from_polar(r2.sqrt(), theta)));
                }
            }
            pts
        }
    };
    let total: f64 = raw.iter().map(|(w, _)| w).sum();
    let mut points: Vec<ConstellationPoint> = raw
        .into_iter()
        .map(|(w, a)| ConstellationPoint { probability: w / total, amplitude: CoherentAmplitude::from(a) })
        .collect();
    let mean: f64 = points.iter().map(|p| p.probability * p.amplitude.energy()).sum();
    if mean > energy {
        let s = (energy / mean).sqrt();
        for p in points.iter_mut() {
            p.amplitude = p.amplitude.scaled(s);
        }
    }
    // exact normalization
    let total: f64 = points.iter().map(|p| p.probability).sum();
    for p in points.iter_mut() {
        p.probability /= total;
    }
    Constellation::new(points)
}

/// `k` equiprobable points of energy `E` with phases `2 pi j / k`.
pub fn phase_shift_keying(energy: f64, k: usize) -> Result<Constellation> {
    if k == 0 {
        return Err(Error::param("k", "constellation size must be at least 1"));
    }
    if !(energy >= 0.0 && energy.is_finite()) {
        return Err(Error::param("E", "must be finite and >= 0"));
    }
    let r = energy.sqrt();
    Constellation::new(
        (0..k)
            .map(|j| ConstellationPoint {
                probability: 1.0 / k as f64,
                amplitude: CoherentAmplitude::from(C64::from_polar(r, 2.0 * std::f64::consts::PI * j as f64 / k as f64)),
            })
            .collect(),
    )
}

/// `chi = H(sum_k p_k rho_k) - sum_k p_k H(rho_k)` in bits, together with
/// the ensemble average state.
pub fn holevo_of_ensemble(probs: &[f64], states: &[DensityOperator]) -> Result<(f64, DensityOperator)> {
    if probs.len() != states.len() {
        return Err(Error::DimensionMismatch { left: probs.len(), right: states.len() });
    }
    let avg = DensityOperator::mixture(probs, states)?;
    let mean_entropy: f64 = probs
        .iter()
        .zip(states)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, s)| Ok(p * von_neumann_entropy(s)?))
        .sum::<Result<f64>>()?;
    let chi = (von_neumann_entropy(&avg)? - mean_entropy).max(0.0);
    Ok((chi, avg))
}

#[derive(Clone, Debug)]
pub struct HolevoResult {
    pub chi_bits: f64,
    pub average_state: DensityOperator,
    pub cutoff: usize,
}

/// Holevo quantity of the constellation as seen by one receiver.
pub fn holevo_quantity(
    c: &Constellation,
    receiver: Receiver,
    params: &BroadcastParams,
    spec: &TruncationSpec,
) -> Result<HolevoResult> {
    let states: Vec<DensityOperator> = c
        .points()
        .par_iter()
        .map(|p| marginal(receiver, p.amplitude, params, spec))
        .collect::<Result<_>>()?;
    let (chi, avg) = holevo_of_ensemble(&c.probabilities(), &states)?;
    if avg.trace() < 1.0 - MASS_LOSS_TOL {
        return Err(Error::TruncationLoss { trace: avg.trace(), cutoff: spec.cutoff() });
    }
    Ok(HolevoResult { chi_bits: chi, average_state: avg, cutoff: spec.cutoff() })
}

/// Largest cutoff tried by [`holevo_quantity_adaptive`].
pub const MAX_HOLEVO_CUTOFF: usize = 160;

/// Tolerance on the change of `chi` between successive cutoff doublings.
pub const CUTOFF_STABILITY_TOL: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct AdaptiveHolevo {
    pub result: HolevoResult,
    /// Change in `chi` at the last doubling.
    pub last_change: f64,
    pub converged: bool,
}

/// Doubles the cutoff from `spec` until `chi` moves by less than
/// [`CUTOFF_STABILITY_TOL`] (or [`MAX_HOLEVO_CUTOFF`] is reached). Cutoffs at
/// which the average state loses mass count as unconverged.
pub fn holevo_quantity_adaptive(
    c: &Constellation,
    receiver: Receiver,
    params: &BroadcastParams,
    spec: &TruncationSpec,
) -> Result<AdaptiveHolevo> {
    let mut spec = *spec;
    let mut prev = match holevo_quantity(c, receiver, params, &spec) {
        Ok(r) => Some(r),
        Err(Error::TruncationLoss { .. }) => None,
        Err(e) => return Err(e),
    };
    loop {
        let next = spec.doubled();
        if next.cutoff() > MAX_HOLEVO_CUTOFF {
            let result = prev.ok_or(Error::TruncationLoss { trace: f64::NAN, cutoff: spec.cutoff() })?;
            return Ok(AdaptiveHolevo { result, last_change: f64::INFINITY, converged: false });
        }
        let cur = match holevo_quantity(c, receiver, params, &next) {
            Ok(r) => Some(r),
            Err(Error::TruncationLoss { .. }) => None,
            Err(e) => return Err(e),
        };
        if let (Some(p), Some(q)) = (&prev, &cur) {
            let change = (q.chi_bits - p.chi_bits).abs();
            if change < CUTOFF_STABILITY_TOL {
                return Ok(AdaptiveHolevo { result: cur.unwrap(), last_change: change, converged: true });
            }
        }
        prev = cur;
        spec = next;
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub x: usize,
    /// Number of points actually used by the scheme (at most `x`).
    pub points: usize,
    pub chi_bits: f64,
    pub epsilon_bits: f64,
    pub cutoff: usize,
    pub cutoff_change: f64,
    /// `(1/2) ||avg - thermal(tau E + N)||_1` at the final cutoff.
    pub thermal_trace_distance: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub energy: f64,
    pub tau: f64,
    pub noise: f64,
    pub scheme: DiscretizationScheme,
    /// `g(tau E + N) - g(N)`.
    pub target_bits: f64,
    pub rows: Vec<ConvergenceRow>,
    /// `epsilon` is nonincreasing over the last three sizes.
    pub monotone_tail: bool,
    /// Some size never stabilized under cutoff doubling.
    pub cutoff_inadequate: bool,
}

/// Holevo quantities of successively finer Gaussian discretizations for a
/// single-mode thermal-noise channel, against the target
/// `g(tau E + N) - g(N)`.
pub fn convergence_study(
    energy: f64,
    tau: f64,
    noise: f64,
    sizes: &[usize],
    scheme: DiscretizationScheme,
    spec: &TruncationSpec,
) -> Result<ConvergenceTable> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("sizes", "must be non-empty and strictly ascending"));
    }
    let params = BroadcastParams::new(tau, 0.0, noise, 0.0, energy)?;
    let target = g(tau * energy + noise) - g(noise);
    let mut rows = Vec::with_capacity(sizes.len());
    let mut cutoff_inadequate = false;
    for &x in sizes {
        let c = discretize_gaussian(energy, x, scheme)?;
        let h = holevo_quantity_adaptive(&c, Receiver::One, &params, spec)?;
        cutoff_inadequate |= !h.converged;
        let cutoff = h.result.cutoff;
        let thermal = thermal_state(tau * energy + noise, cutoff)?;
        rows.push(ConvergenceRow {
            x,
            points: c.len(),
            chi_bits: h.result.chi_bits,
            epsilon_bits: (h.result.chi_bits - target).abs(),
            cutoff,
            cutoff_change: h.last_change,
            thermal_trace_distance: trace_distance(&h.result.average_state, &thermal),
        });
    }
    let tail = &rows[rows.len().saturating_sub(3)..];
    let monotone_tail = tail.windows(2).all(|w| w[1].epsilon_bits <= w[0].epsilon_bits);
    Ok(ConvergenceTable {
        energy,
        tau,
        noise,
        scheme,
        target_bits: target,
        rows,
        monotone_tail,
        cutoff_inadequate,
    })
}
