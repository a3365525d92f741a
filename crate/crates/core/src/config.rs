//! Plain-text `key = value` configuration files for channels and
//! identification simulations.
//!
//! Blank lines and `#` comments are ignored. Unknown or repeated keys are
//! errors, and every problem in a file is reported at once.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{BroadcastParams, EnergyMode};
use crate::error::{Error, Result};
use crate::idcode::{
    FallbackAccounting, IdCodeParams, SimulationSetup, DEFAULT_DELTA, DEFAULT_ETA, DEFAULT_GENERATOR_CAP,
    DEFAULT_POOL_CAP,
};
use crate::rates::{discretize_gaussian, phase_shift_keying, Constellation, DiscretizationScheme};

/// Default Fock cutoff for channel studies.
pub const DEFAULT_CHANNEL_CUTOFF: usize = 40;

const CHANNEL_KEYS: [&str; 7] = ["tau1", "tau2", "N1", "N2", "E", "L", "beam_splitter"];

const SIMULATION_KEYS: [&str; 20] = [
    "n",
    "R_P",
    "Rt1",
    "Rt2",
    "R1",
    "R2",
    "mu",
    "delta",
    "eta",
    "eta_detect",
    "L",
    "M1",
    "M2",
    "trials",
    "channel",
    "constellation",
    "energy_mode",
    "accounting",
    "pool_cap",
    "generator_cap",
];

/// Parsed `key = value` pairs with the line each came from.
#[derive(Clone, Debug, Default)]
struct Entries {
    values: BTreeMap<String, (usize, String)>,
    problems: Vec<String>,
}

impl Entries {
    fn parse(text: &str, allowed: &[&str]) -> Self {
        let mut out = Entries::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                out.problems.push(format!("line {line_no}: expected `key = value`, got `{line}`"));
                continue;
            };
            let (k, v) = (k.trim(), v.trim());
            if !allowed.contains(&k) {
                out.problems.push(format!("line {line_no}: unknown key `{k}`"));
                continue;
            }
            if v.is_empty() {
                out.problems.push(format!("line {line_no}: key `{k}` has no value"));
                continue;
            }
            if let Some((first, _)) = out.values.get(k) {
                out.problems.push(format!("line {line_no}: key `{k}` repeated (first on line {first})"));
                continue;
            }
            out.values.insert(k.to_string(), (line_no, v.to_string()));
        }
        out
    }

    fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|(_, v)| v.as_str())
    }

    fn get<T: FromStr>(&mut self, key: &str) -> Option<T> {
        let (line, v) = self.values.get(key)?.clone();
        match v.parse::<T>() {
            Ok(x) => Some(x),
            Err(_) => {
                self.problems.push(format!("line {line}: cannot parse `{key} = {v}`"));
                None
            }
        }
    }

    fn require<T: FromStr>(&mut self, key: &str) -> Option<T> {
        if !self.has(key) {
            self.problems.push(format!("missing required key `{key}`"));
            return None;
        }
        self.get(key)
    }

    fn get_or<T: FromStr>(&mut self, key: &str, default: T) -> Option<T> {
        if self.has(key) {
            self.get(key)
        } else {
            Some(default)
        }
    }

    fn flag(&mut self, key: &str) -> Option<bool> {
        let (line, v) = match self.values.get(key) {
            None => return Some(false),
            Some(x) => x.clone(),
        };
        match v.to_ascii_lowercase().as_str() {
            "true" | "yes" | "1" => Some(true),
            "false" | "no" | "0" => Some(false),
            _ => {
                self.problems.push(format!("line {line}: `{key}` must be a boolean, got `{v}`"));
                None
            }
        }
    }

    fn with_parsed<T: FromStr<Err = Error>>(&mut self, key: &str, default: T) -> Option<T> {
        let Some((line, v)) = self.values.get(key).cloned() else {
            return Some(default);
        };
        match v.parse::<T>() {
            Ok(x) => Some(x),
            Err(e) => {
                self.problems.push(format!("line {line}: {e}"));
                None
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub params: BroadcastParams,
    /// Fock cutoff `L`; `None` when the file leaves it unset.
    pub cutoff: Option<usize>,
}

impl ChannelConfig {
    pub fn cutoff_or_default(&self) -> usize {
        self.cutoff.unwrap_or(DEFAULT_CHANNEL_CUTOFF)
    }
}

fn channel_from_entries(e: &mut Entries) -> Option<ChannelConfig> {
    let beam = e.flag("beam_splitter");
    let tau1 = e.require::<f64>("tau1");
    let tau2 = if beam == Some(true) {
        let given = e.get::<f64>("tau2");
        match (tau1, given) {
            (Some(t1), Some(t2)) if (t1 + t2 - 1.0).abs() > 1e-12 => {
                e.problems.push(format!("beam_splitter = true requires tau2 = 1 - tau1, got tau1 = {t1}, tau2 = {t2}"));
                None
            }
            (Some(t1), _) => Some(1.0 - t1),
            _ => None,
        }
    } else {
        e.require::<f64>("tau2")
    };
    let n1 = e.require::<f64>("N1");
    let n2 = e.require::<f64>("N2");
    let energy = e.require::<f64>("E");
    let cutoff = if e.has("L") { e.get::<usize>("L").map(Some) } else { Some(None) };
    if cutoff == Some(Some(0)) {
        e.problems.push("L must be at least 1".to_string());
    }
    let (Some(tau1), Some(tau2), Some(n1), Some(n2), Some(energy), Some(beam), Some(cutoff)) =
        (tau1, tau2, n1, n2, energy, beam, cutoff)
    else {
        return None;
    };
    let params = BroadcastParams { tau1, tau2, n1, n2, energy, beam_splitter: beam };
    let bad = params.problems();
    if !bad.is_empty() {
        e.problems.extend(bad);
        return None;
    }
    Some(ChannelConfig { params, cutoff })
}

pub fn parse_channel_config(text: &str) -> Result<ChannelConfig> {
    let mut e = Entries::parse(text, &CHANNEL_KEYS);
    let cfg = channel_from_entries(&mut e);
    match cfg {
        Some(c) if e.problems.is_empty() => Ok(c),
        _ => Err(Error::Config(e.problems)),
    }
}

pub fn load_channel_config(path: &Path) -> Result<ChannelConfig> {
    parse_channel_config(&std::fs::read_to_string(path)?)
}

/// Constellation families selectable by name: `qpsk`, `psk:K`, `grid:X`,
/// `rings:X`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstellationSpec {
    Psk(usize),
    Gaussian(DiscretizationScheme, usize),
}

impl FromStr for ConstellationSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::param("constellation", format!("expected qpsk, psk:K, grid:X or rings:X, got `{s}`"));
        if s == "qpsk" {
            return Ok(Self::Psk(4));
        }
        let (kind, size) = s.split_once(':').ok_or_else(bad)?;
        let size: usize = size.trim().parse().map_err(|_| bad())?;
        if size == 0 {
            return Err(bad());
        }
        match kind.trim() {
            "psk" => Ok(Self::Psk(size)),
            "grid" => Ok(Self::Gaussian(DiscretizationScheme::SquareGrid, size)),
            "rings" => Ok(Self::Gaussian(DiscretizationScheme::Rings, size)),
            _ => Err(bad()),
        }
    }
}

impl ConstellationSpec {
    pub fn build(self, energy: f64) -> Result<Constellation> {
        match self {
            Self::Psk(k) => phase_shift_keying(energy, k),
            Self::Gaussian(scheme, x) => discretize_gaussian(energy, x, scheme),
        }
    }
}

/// Parses a simulation spec. The channel comes either from `channel = PATH`
/// (relative to `base_dir`) or from inline channel keys. `L` defaults to the
/// channel file's `L`, then to `ceil(log2 n)`.
pub fn parse_simulation_spec(text: &str, base_dir: &Path) -> Result<SimulationSetup> {
    let mut allowed: Vec<&str> = SIMULATION_KEYS.to_vec();
    allowed.extend(CHANNEL_KEYS.iter().filter(|k| **k != "L"));
    let mut e = Entries::parse(text, &allowed);

    let inline = CHANNEL_KEYS.iter().any(|k| *k != "L" && e.has(k));
    let channel = match (e.raw("channel").map(str::to_string), inline) {
        (Some(_), true) => {
            e.problems.push("give either `channel = PATH` or inline channel keys, not both".to_string());
            None
        }
        (Some(path), false) => {
            let full = base_dir.join(&path);
            match load_channel_config(&full) {
                Ok(c) => Some(c),
                Err(Error::Config(p)) => {
                    e.problems.extend(p.into_iter().map(|m| format!("{}: {m}", full.display())));
                    None
                }
                Err(err) => {
                    e.problems.push(format!("{}: {err}", full.display()));
                    None
                }
            }
        }
        (None, _) => channel_from_entries(&mut e),
    };

    let n = e.require::<usize>("n");
    let pool_rate = e.require::<f64>("R_P");
    let rt1 = e.require::<f64>("Rt1");
    let rt2 = e.require::<f64>("Rt2");
    let r1 = e.get_or::<f64>("R1", 0.0);
    let r2 = e.get_or::<f64>("R2", 0.0);
    let mu = e.require::<f64>("mu");
    let delta = e.get_or::<f64>("delta", DEFAULT_DELTA);
    let eta = e.get_or::<f64>("eta", DEFAULT_ETA);
    let eta_detect = e.get_or::<f64>("eta_detect", DEFAULT_ETA);
    let cutoff = if e.has("L") { e.get::<usize>("L").map(Some) } else { Some(None) };
    let m1 = e.require::<usize>("M1");
    let m2 = e.require::<usize>("M2");
    let trials = e.require::<usize>("trials");
    let constellation = e.with_parsed::<ConstellationSpec>("constellation", ConstellationSpec::Psk(4));
    let energy_mode = e.with_parsed::<EnergyMode>("energy_mode", EnergyMode::PerSymbol);
    let accounting = e.with_parsed::<FallbackAccounting>("accounting", FallbackAccounting::Operational);
    let pool_cap = e.get_or::<usize>("pool_cap", DEFAULT_POOL_CAP);
    let generator_cap = e.get_or::<usize>("generator_cap", DEFAULT_GENERATOR_CAP);
    if trials == Some(0) {
        e.problems.push("trials must be at least 1".to_string());
    }

    let (
        Some(channel),
        Some(n),
        Some(pool_rate),
        Some(rt1),
        Some(rt2),
        Some(r1),
        Some(r2),
        Some(mu),
        Some(delta),
        Some(eta),
        Some(eta_detect),
        Some(cutoff),
        Some(m1),
        Some(m2),
        Some(trials),
        Some(constellation),
        Some(energy_mode),
        Some(accounting),
        Some(pool_cap),
        Some(generator_cap),
    ) = (
        channel,
        n,
        pool_rate,
        rt1,
        rt2,
        r1,
        r2,
        mu,
        delta,
        eta,
        eta_detect,
        cutoff,
        m1,
        m2,
        trials,
        constellation,
        energy_mode,
        accounting,
        pool_cap,
        generator_cap,
    )
    else {
        return Err(Error::Config(e.problems));
    };

    let mut params = IdCodeParams::new(n, pool_rate, [rt1, rt2], [r1, r2], mu, [m1, m2]);
    params.delta = delta;
    params.eta = eta;
    params.eta_detect = eta_detect;
    params.cutoff = cutoff.or(channel.cutoff).unwrap_or(params.cutoff);
    e.problems.extend(params.problems());
    let constellation = match constellation.build(channel.params.energy) {
        Ok(c) => Some(c),
        Err(err) => {
            e.problems.push(err.to_string());
            None
        }
    };
    match constellation {
        Some(constellation) if e.problems.is_empty() => Ok(SimulationSetup {
            params,
            channel: channel.params,
            constellation,
            energy_mode,
            accounting,
            trials,
            pool_cap,
            generator_cap,
        }),
        _ => Err(Error::Config(e.problems)),
    }
}

/// Reads a simulation file; a `channel` path resolves against the file's
/// directory.
pub fn load_simulation_spec(path: &Path) -> Result<SimulationSetup> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_simulation_spec(&text, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CHANNEL: &str = "# beam splitter\ntau1 = 0.5\nN1 = 0.1\nN2 = 0.1 # noise\nE = 0.5\nbeam_splitter = true\n";

    #[test]
    fn channel_beam_splitter_fills_tau2() {
        let c = parse_channel_config(CHANNEL).unwrap();
        assert_eq!(c.params.tau2, 0.5);
        assert!(c.params.beam_splitter);
        assert_eq!(c.cutoff, None);
        assert_eq!(c.cutoff_or_default(), DEFAULT_CHANNEL_CUTOFF);
    }

    #[test]
    fn channel_independent_transmissivities() {
        let c = parse_channel_config("tau1=1\ntau2=0.25\nN1=0\nN2=0.2\nE=1\nL=12").unwrap();
        assert_eq!((c.params.tau1, c.params.tau2, c.cutoff), (1.0, 0.25, Some(12)));
        assert!(!c.params.beam_splitter);
    }

    #[test]
    fn channel_errors_are_all_reported() {
        let err = parse_channel_config("tau1 = 2\nN1 = x\nfoo = 1\nE = 0.5\nE = 0.6\n").unwrap_err();
        let Error::Config(p) = err else { panic!("expected config error") };
        let text = p.join("\n");
        for needle in ["unknown key `foo`", "repeated", "cannot parse `N1 = x`", "`tau2`", "`N2`"] {
            assert!(text.contains(needle), "missing `{needle}` in:\n{text}");
        }
    }

    #[test]
    fn channel_beam_splitter_rejects_inconsistent_tau2() {
        let err = parse_channel_config("tau1=0.3\ntau2=0.3\nN1=0\nN2=0\nE=1\nbeam_splitter=yes").unwrap_err();
        assert!(err.to_string().contains("tau2 = 1 - tau1"));
    }

    #[test]
    fn channel_range_violations_surface() {
        let err = parse_channel_config("tau1=1.5\ntau2=0.3\nN1=-1\nN2=0\nE=1").unwrap_err();
        let Error::Config(p) = err else { panic!() };
        assert!(p.len() >= 2, "{p:?}");
    }

    #[test]
    fn constellation_names() {
        assert_eq!("qpsk".parse::<ConstellationSpec>().unwrap(), ConstellationSpec::Psk(4));
        assert_eq!("psk:8".parse::<ConstellationSpec>().unwrap(), ConstellationSpec::Psk(8));
        assert_eq!(
            "rings:64".parse::<ConstellationSpec>().unwrap(),
            ConstellationSpec::Gaussian(DiscretizationScheme::Rings, 64)
        );
        assert!("grid:0".parse::<ConstellationSpec>().is_err());
        assert!("hex:7".parse::<ConstellationSpec>().is_err());
        let c = ConstellationSpec::Psk(4).build(0.5).unwrap();
        assert_eq!(c.len(), 4);
        assert!((c.mean_energy() - 0.5).abs() < 1e-12);
        assert!(c.mean_amplitude().norm() < 1e-12);
    }

    const SIM: &str = "n = 6\nR_P = 0.5\nRt1 = 0.33\nRt2 = 0.33\nmu = 0.1\nM1 = 4\nM2 = 4\ntrials = 200\n\
                       L = 2\ntau1 = 0.5\nN1 = 0.05\nN2 = 0.05\nE = 1\nbeam_splitter = true\n";

    #[test]
    fn simulation_spec_inline_channel() {
        let s = parse_simulation_spec(SIM, Path::new(".")).unwrap();
        assert_eq!(s.params.n, 6);
        assert_eq!(s.params.cutoff, 2);
        assert_eq!(s.params.messages, [4, 4]);
        assert_eq!(s.params.delta, DEFAULT_DELTA);
        assert_eq!(s.trials, 200);
        assert_eq!(s.channel.tau2, 0.5);
        assert_eq!(s.constellation.len(), 4);
        assert_eq!(s.energy_mode, EnergyMode::PerSymbol);
        assert_eq!(s.accounting, FallbackAccounting::Operational);
    }

    #[test]
    fn simulation_spec_channel_file_and_cutoff_fallback() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("ch.conf"), "tau1=0.5\nN1=0.05\nN2=0.05\nE=1\nL=3\nbeam_splitter=true\n").unwrap();
        let spec = "n=6\nR_P=0.5\nRt1=0.33\nRt2=0.33\nmu=0.1\nM1=4\nM2=4\ntrials=10\nchannel=ch.conf\nconstellation=psk:8\n";
        let path = dir.path().join("sim.conf");
        std::fs::write(&path, spec).unwrap();
        let s = load_simulation_spec(&path).unwrap();
        assert_eq!(s.params.cutoff, 3);
        assert_eq!(s.constellation.len(), 8);
    }

    #[test]
    fn simulation_spec_enumerates_every_bad_field() {
        let spec = "n = 0\nR_P = 0.1\nRt1 = 0.33\nRt2 = abc\nmu = 0.1\nM1 = 4\ntrials = 0\n\
                    tau1 = 0.5\nN1 = 0.05\nN2 = 0.05\nE = 1\nbeam_splitter = true\nenergy_mode = total\n";
        let Error::Config(p) = parse_simulation_spec(spec, Path::new(".")).unwrap_err() else { panic!() };
        let text = p.join("\n");
        for needle in ["Rt2 = abc", "`M2`", "trials must be", "unknown mode `total`"] {
            assert!(text.contains(needle), "missing `{needle}` in:\n{text}");
        }
    }

    #[test]
    fn simulation_spec_reports_parameter_constraints() {
        let spec = SIM.replace("R_P = 0.5", "R_P = 0.9");
        let Error::Config(p) = parse_simulation_spec(&spec, Path::new(".")).unwrap_err() else { panic!() };
        assert!(p.iter().any(|m| m.contains("max(Rt1, Rt2) < R_P < Rt1 + Rt2")), "{p:?}");
    }

    #[test]
    fn simulation_spec_rejects_both_channel_sources() {
        let spec = format!("{SIM}channel = other.conf\n");
        let err = parse_simulation_spec(&spec, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("not both"));
    }
}
