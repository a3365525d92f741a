//! Noisy bosonic broadcast channel acting on coherent-state inputs.
//!
//! Each receiver sees a displaced thermal state `S_{N_i}(sqrt(tau_i) alpha)`.
//! The joint output is a product and is only ever handled as the pair of
//! marginals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::DensityOperator;
use crate::states::{displaced_thermal, CoherentAmplitude, TruncationSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BroadcastParams {
    pub tau1: f64,
    pub tau2: f64,
    pub n1: f64,
    pub n2: f64,
    /// Mean input photon number per channel use.
    pub energy: f64,
    /// Enforces the passive beam splitter coupling `tau2 = 1 - tau1`.
    #[serde(default)]
    pub beam_splitter: bool,
}

impl BroadcastParams {
    pub fn new(tau1: f64, tau2: f64, n1: f64, n2: f64, energy: f64) -> Result<Self> {
        let p = Self { tau1, tau2, n1, n2, energy, beam_splitter: false };
        p.validate()?;
        Ok(p)
    }

    pub fn beam_splitter(tau1: f64, n1: f64, n2: f64, energy: f64) -> Result<Self> {
        let p = Self { tau1, tau2: 1.0 - tau1, n1, n2, energy, beam_splitter: true };
        p.validate()?;
        Ok(p)
    }

    /// Every violated constraint, one message per field.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v) in [("tau1", self.tau1), ("tau2", self.tau2)] {
            if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                out.push(format!("{name} = {v} must lie in [0, 1]"));
            }
        }
        for (name, v) in [("N1", self.n1), ("N2", self.n2), ("E", self.energy)] {
            if !(v.is_finite() && v >= 0.0) {
                out.push(format!("{name} = {v} must be finite and >= 0"));
            }
        }
        if self.beam_splitter && (self.tau1 + self.tau2 - 1.0).abs() > 1e-12 {
            out.push(format!(
                "beam_splitter requires tau2 = 1 - tau1, got tau1 = {} and tau2 = {}",
                self.tau1, self.tau2
            ));
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

    pub fn transmissivity(&self, receiver: Receiver) -> f64 {
        match receiver {
            Receiver::One => self.tau1,
            Receiver::Two => self.tau2,
        }
    }

    pub fn noise(&self, receiver: Receiver) -> f64 {
        match receiver {
            Receiver::One => self.n1,
            Receiver::Two => self.n2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Receiver {
    One,
    Two,
}

impl Receiver {
    pub const BOTH: [Receiver; 2] = [Receiver::One, Receiver::Two];

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            1 => Ok(Receiver::One),
            2 => Ok(Receiver::Two),
            _ => Err(Error::param("receiver", format!("index {i} is not 1 or 2"))),
        }
    }

    /// Zero-based slot for per-receiver arrays.
    pub fn slot(self) -> usize {
        match self {
            Receiver::One => 0,
            Receiver::Two => 1,
        }
    }
}

/// Sequence of coherent amplitudes sent over `n` channel uses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Codeword {
    pub symbols: Vec<CoherentAmplitude>,
}

impl Codeword {
    pub fn new(symbols: Vec<CoherentAmplitude>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::param("codeword", "block length must be at least 1"));
        }
        Ok(Self { symbols })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// `sum_i |alpha_i|^2`.
    pub fn total_energy(&self) -> f64 {
        self.symbols.iter().map(|a| a.energy()).sum()
    }
}

/// Output state pair for one channel use.
pub fn broadcast_output(
    alpha: CoherentAmplitude,
    params: &BroadcastParams,
    spec: &TruncationSpec,
) -> Result<(DensityOperator, DensityOperator)> {
    Ok((
        marginal(Receiver::One, alpha, params, spec)?,
        marginal(Receiver::Two, alpha, params, spec)?,
    ))
}

pub fn marginal(
    receiver: Receiver,
    alpha: CoherentAmplitude,
    params: &BroadcastParams,
    spec: &TruncationSpec,
) -> Result<DensityOperator> {
    params.validate()?;
    let tau = params.transmissivity(receiver);
    displaced_thermal(alpha.scaled(tau.sqrt()), params.noise(receiver), spec)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyMode {
    /// Total codeword energy at most `E`.
    Literal,
    /// Total codeword energy at most `n E`.
    PerSymbol,
}

impl std::str::FromStr for EnergyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(EnergyMode::Literal),
            "per-symbol" => Ok(EnergyMode::PerSymbol),
            other => Err(Error::param("energy_mode", format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnergyReport {
    pub mode: EnergyMode,
    pub total_energy: f64,
    pub literal_budget: f64,
    pub per_symbol_budget: f64,
    pub literal_pass: bool,
    pub per_symbol_pass: bool,
    /// Verdict for `mode`.
    pub pass: bool,
}

const ENERGY_REL_TOL: f64 = 1e-12;

pub fn energy_check(cw: &Codeword, params: &BroadcastParams, mode: EnergyMode) -> EnergyReport {
    let total = cw.total_energy();
    let literal_budget = params.energy;
    let per_symbol_budget = cw.len() as f64 * params.energy;
    let within = |budget: f64| total <= budget * (1.0 + ENERGY_REL_TOL) + f64::MIN_POSITIVE;
    let literal_pass = within(literal_budget);
    let per_symbol_pass = within(per_symbol_budget);
    EnergyReport {
        mode,
        total_energy: total,
        literal_budget,
        per_symbol_budget,
        literal_pass,
        per_symbol_pass,
        pass: match mode {
            EnergyMode::Literal => literal_pass,
            EnergyMode::PerSymbol => per_symbol_pass,
        },
    }
}
