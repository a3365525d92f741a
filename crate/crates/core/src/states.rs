//! Coherent, thermal and displaced thermal states in a truncated Fock space,
//! the photon-number truncation channel, and numerical checks of the
//! truncation and gentle-measurement bounds.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    hermitian_eig_matrix, povm_probability, trace_norm, BinaryPovm, DensityOperator, FockOperator, C64,
};
use crate::sampling::{random_density, random_povm};

/// States whose trace drops below `1 - MASS_LOSS_TOL` carry a mass-loss flag.
pub const MASS_LOSS_TOL: f64 = 1e-6;

/// Extra Fock levels used when building displaced states.
pub const DEFAULT_CONSTRUCTION_MARGIN: usize = 20;

const UNITARITY_DEFECT_LIMIT: f64 = 0.01;

/// Complex amplitude of a coherent state; `|alpha|^2` is its mean photon number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherentAmplitude(C64);

impl CoherentAmplitude {
    pub fn new(value: C64) -> Result<Self> {
        if !value.re.is_finite() || !value.im.is_finite() {
            return Err(Error::param("alpha", "amplitude must be finite"));
        }
        Ok(Self(value))
    }

    pub fn with_energy_cap(value: C64, cap: f64) -> Result<Self> {
        let a = Self::new(value)?;
        if a.energy() > cap {
            return Err(Error::param("alpha", format!("|alpha|^2 = {} exceeds cap {cap}", a.energy())));
        }
        Ok(a)
    }

    pub fn real(re: f64) -> Self {
        Self(C64::new(re, 0.0))
    }

    pub fn value(self) -> C64 {
        self.0
    }

    pub fn energy(self) -> f64 {
        self.0.norm_sqr()
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self(self.0 * factor)
    }
}

impl From<C64> for CoherentAmplitude {
    fn from(value: C64) -> Self {
        Self(value)
    }
}

/// Output cutoff `cutoff` (levels `0..cutoff`) together with the larger
/// dimension in which displacements are computed before cropping.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationSpec {
    cutoff: usize,
    construction_dim: usize,
}

impl TruncationSpec {
    pub fn new(cutoff: usize) -> Result<Self> {
        Self::with_construction_dim(cutoff, cutoff + DEFAULT_CONSTRUCTION_MARGIN)
    }

    pub fn with_construction_dim(cutoff: usize, construction_dim: usize) -> Result<Self> {
        if cutoff == 0 {
            return Err(Error::param("L", "cutoff must be at least 1"));
        }
        if construction_dim < cutoff {
            return Err(Error::param(
                "construction_dim",
                format!("{construction_dim} is smaller than the cutoff {cutoff}"),
            ));
        }
        Ok(Self { cutoff, construction_dim })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn construction_dim(&self) -> usize {
        self.construction_dim
    }

    /// Same margin ratio at twice the cutoff.
    pub fn doubled(&self) -> Self {
        Self {
            cutoff: 2 * self.cutoff,
            construction_dim: 2 * self.cutoff + (self.construction_dim - self.cutoff),
        }
    }
}

/// Truncated coherent state vector.
#[derive(Clone, Debug)]
pub struct CoherentVector {
    pub amplitudes: DVector<C64>,
    /// More than half of the photon-number distribution lies above the cutoff.
    pub low_mass: bool,
}

impl CoherentVector {
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }
}

/// Components `e^{-|alpha|^2/2} alpha^r / sqrt(r!)` for `r < dim`.
pub fn coherent_state(alpha: CoherentAmplitude, dim: usize) -> CoherentVector {
    let a = alpha.value();
    let mut v = DVector::zeros(dim);
    let mut c = C64::new((-0.5 * a.norm_sqr()).exp(), 0.0);
    for r in 0..dim {
        if r > 0 {
            c = c * a / (r as f64).sqrt();
        }
        v[r] = c;
    }
    let low_mass = v.norm_squared() < 0.5;
    CoherentVector { amplitudes: v, low_mass }
}

/// `exp(alpha a^dagger - conj(alpha) a)` in dimension `dim`, computed through
/// the spectral decomposition of the Hermitian generator.
fn displacement_exp(alpha: C64, dim: usize) -> DMatrix<C64> {
    let i = C64::new(0.0, 1.0);
    // H = -i (alpha a^dagger - conj(alpha) a), so D = exp(i H)
    let mut h = DMatrix::<C64>::zeros(dim, dim);
    for n in 0..dim.saturating_sub(1) {
        let s = ((n + 1) as f64).sqrt();
        h[(n + 1, n)] = -i * alpha * s;
        h[(n, n + 1)] = i * alpha.conj() * s;
    }
    let eig = hermitian_eig_matrix(h);
    let phases = DVector::from_iterator(dim, eig.values.iter().map(|&l| (i * l).exp()));
    let scaled = DMatrix::from_fn(dim, dim, |r, c| eig.vectors[(r, c)] * phases[c]);
    scaled * eig.vectors.adjoint()
}

/// Squared weight of each column that reaches the boundary strip of the
/// construction space, where the truncated generator misrepresents the true
/// displacement.
fn boundary_leakage(d: &DMatrix<C64>, columns: usize, cutoff: usize) -> Vec<f64> {
    let dim = d.nrows();
    let guard = ((dim - cutoff) / 2).max(1);
    (0..columns.min(dim))
        .map(|k| (dim - guard..dim).map(|r| d[(r, k)].norm_sqr()).sum())
        .collect()
}

/// Displacement operator on the construction space. The kept block is the
/// first `cutoff` columns; their leakage into the boundary strip is the
/// unitarity defect `||C^dagger C - 1||_1` of the block `C` restricted to the
/// interior rows.
pub fn displacement_matrix(alpha: CoherentAmplitude, spec: &TruncationSpec) -> Result<FockOperator> {
    let d = displacement_exp(alpha.value(), spec.construction_dim());
    let defect: f64 = boundary_leakage(&d, spec.cutoff(), spec.cutoff()).iter().sum();
    if defect > UNITARITY_DEFECT_LIMIT {
        return Err(Error::UnitarityDefect { defect, construction_dim: spec.construction_dim() });
    }
    Ok(FockOperator::from_matrix(d))
}

/// Thermal populations `N^n / (N+1)^{n+1}` for `n < dim`.
pub fn thermal_populations(mean_photons: f64, dim: usize) -> Vec<f64> {
    let q = mean_photons / (mean_photons + 1.0);
    let mut p = Vec::with_capacity(dim);
    let mut cur = 1.0 / (mean_photons + 1.0);
    for _ in 0..dim {
        p.push(cur);
        cur *= q;
    }
    p
}

/// Probability mass of the thermal distribution at levels `>= dim`.
pub fn thermal_tail_mass(mean_photons: f64, dim: usize) -> f64 {
    (mean_photons / (mean_photons + 1.0)).powi(dim as i32)
}

/// Diagonal thermal state with mean photon number `N`, truncated (not
/// renormalized) to `dim` levels.
pub fn thermal_state(mean_photons: f64, dim: usize) -> Result<DensityOperator> {
    if !(mean_photons >= 0.0 && mean_photons.is_finite()) {
        return Err(Error::param("N", format!("mean photon number {mean_photons} must be finite and >= 0")));
    }
    if dim == 0 {
        return Err(Error::param("L", "cutoff must be at least 1"));
    }
    Ok(DensityOperator::from_parts(FockOperator::diagonal(&thermal_populations(mean_photons, dim))))
}

/// `D(alpha) thermal(N) D(alpha)^dagger`, built in the construction space and
/// cropped to the cutoff.
pub fn displaced_thermal(alpha: CoherentAmplitude, mean_photons: f64, spec: &TruncationSpec) -> Result<DensityOperator> {
    if !(mean_photons >= 0.0 && mean_photons.is_finite()) {
        return Err(Error::param("N", format!("mean photon number {mean_photons} must be finite and >= 0")));
    }
    let big = spec.construction_dim();
    let cutoff = spec.cutoff();
    let pops = thermal_populations(mean_photons, big);
    if alpha.value().norm() == 0.0 {
        return Ok(DensityOperator::from_parts(FockOperator::diagonal(&pops[..cutoff])));
    }
    let d = displacement_exp(alpha.value(), big);
    let leak = boundary_leakage(&d, big, cutoff);
    let weighted: f64 = leak.iter().zip(&pops).map(|(l, p)| l * p).sum();
    if weighted > UNITARITY_DEFECT_LIMIT {
        return Err(Error::UnitarityDefect { defect: weighted, construction_dim: big });
    }
    // rows of D sqrt(p) restricted to the kept levels
    let w = DMatrix::from_fn(cutoff, big, |r, c| d[(r, c)] * pops[c].sqrt());
    let m = &w * w.adjoint();
    let m = (&m + m.adjoint()).scale(0.5);
    Ok(DensityOperator::from_parts(FockOperator::from_matrix(m)))
}

/// True when the state lost more than [`MASS_LOSS_TOL`] of its trace.
pub fn has_mass_loss(rho: &DensityOperator) -> bool {
    rho.trace() < 1.0 - MASS_LOSS_TOL
}

/// `T rho T + (1 - tr(T rho)) |0><0|` with `T` the projector onto levels
/// `0..cutoff`. The output lives on the first `cutoff` levels.
pub fn truncation_channel(rho: &DensityOperator, cutoff: usize) -> Result<DensityOperator> {
    if cutoff == 0 || cutoff > rho.dim() {
        return Err(Error::param("L_cut", format!("cutoff {cutoff} must lie in 1..={}", rho.dim())));
    }
    let mut m = rho.op().crop(cutoff).into_matrix();
    let kept = m.trace().re;
    m[(0, 0)] += C64::new(1.0 - kept, 0.0);
    Ok(DensityOperator::from_parts(FockOperator::from_matrix(m)))
}

/// `T_L rho T_L` cropped to levels `0..cutoff` (the state conditioned on a
/// passing photon-number threshold, left unnormalized).
pub fn project_below(rho: &DensityOperator, cutoff: usize) -> Result<DensityOperator> {
    if cutoff == 0 || cutoff > rho.dim() {
        return Err(Error::param("L_cut", format!("cutoff {cutoff} must lie in 1..={}", rho.dim())));
    }
    Ok(rho.crop(cutoff))
}

pub(crate) fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TruncationBoundReport {
    pub alpha: [f64; 2],
    pub max_level: usize,
    /// `tr(T_L |alpha><alpha|)` with `T_L` projecting onto levels `0..=L`.
    pub lhs: f64,
    /// `1 - max{2, |alpha|^2}^L / L!`.
    pub rhs: f64,
    pub pass: bool,
}

/// Checks `tr(T_L |alpha><alpha|) >= 1 - max{2,|alpha|^2}^L / L!`.
pub fn truncation_mass_bound_check(alpha: CoherentAmplitude, max_level: usize) -> Result<TruncationBoundReport> {
    if max_level == 0 {
        return Err(Error::param("L", "must be at least 1"));
    }
    let lhs = coherent_state(alpha, max_level + 1).norm_sqr();
    let base = alpha.energy().max(2.0);
    let rhs = 1.0 - (max_level as f64 * base.ln() - ln_factorial(max_level)).exp();
    Ok(TruncationBoundReport {
        alpha: [alpha.value().re, alpha.value().im],
        max_level,
        lhs,
        rhs,
        pass: lhs >= rhs - 1e-12,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaussianTruncationReport {
    pub energy: f64,
    pub max_level: usize,
    /// Mass of the Gaussian coherent-state mixture (a thermal state of mean
    /// `E`) on levels `0..=L`.
    pub lhs: f64,
    /// `1 - 2^{-L}`.
    pub rhs: f64,
    pub pass: bool,
    /// `2 * 50^2 * E * log2(e^{-1})`, the threshold read literally.
    pub literal_threshold: f64,
    pub literal_condition_met: bool,
    /// `2 * 50^2 * E * log2(1/eps)` with `eps = 2^{-L}`.
    pub inverse_eps_threshold: f64,
    pub inverse_eps_condition_met: bool,
}

/// Checks the averaged bound `tr(T_L G_E) >= 1 - 2^{-L}` for the Gaussian
/// ensemble of mean photon number `E`, reporting both readings of the
/// sufficient condition on `L`.
pub fn gaussian_truncation_check(energy: f64, max_level: usize) -> Result<GaussianTruncationReport> {
    if !(energy > 0.0 && energy.is_finite()) {
        return Err(Error::param("E", "must be positive"));
    }
    let lhs = thermal_state(energy, max_level + 1)?.trace();
    let rhs = 1.0 - 2f64.powi(-(max_level as i32));
    let literal_threshold = 2.0 * 2500.0 * energy * (-1.0f64).exp().log2();
    let inverse_eps_threshold = 2.0 * 2500.0 * energy * max_level as f64;
    Ok(GaussianTruncationReport {
        energy,
        max_level,
        lhs,
        rhs,
        pass: lhs >= rhs - 1e-12,
        literal_threshold,
        literal_condition_met: max_level as f64 >= literal_threshold,
        inverse_eps_threshold,
        inverse_eps_condition_met: max_level as f64 >= inverse_eps_threshold,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GentleReport {
    /// `1 - tr(Pi rho)`, floored at zero.
    pub epsilon: f64,
    /// `||sqrt(Pi) rho sqrt(Pi) - rho||_1`.
    pub lhs: f64,
    /// `2 sqrt(epsilon)`.
    pub rhs: f64,
    pub pass: bool,
}

/// Gentle measurement check: `||sqrt(Pi) rho sqrt(Pi) - rho||_1 <= 2 sqrt(eps)`
/// where `tr(Pi rho) = 1 - eps`.
pub fn gentle_operator_check(rho: &DensityOperator, povm: &BinaryPovm) -> Result<GentleReport> {
    let p = povm_probability(povm, rho)?;
    let epsilon = (rho.trace() - p).max(0.0);
    let s = povm.sqrt_accept();
    let post = rho.op().conjugate_by(&s)?;
    let lhs = trace_norm(&post.difference(rho.op()));
    let rhs = 2.0 * epsilon.sqrt();
    Ok(GentleReport { epsilon, lhs, rhs, pass: lhs <= rhs + 1e-10 })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GentleTrialsSummary {
    pub trials: usize,
    pub failures: usize,
    /// Smallest `rhs - lhs` observed.
    pub min_slack: f64,
    pub seed: u64,
}

/// Runs [`gentle_operator_check`] on seeded random full-rank states and POVM
/// elements with eigenvalues drawn from `[lo, hi]`; dimensions cycle through
/// `2..=6`.
pub fn gentle_operator_trials(trials: usize, lo: f64, hi: f64, seed: u64) -> Result<GentleTrialsSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut min_slack = f64::INFINITY;
    for t in 0..trials {
        let dim = 2 + t % 5;
        let rho = random_density(dim, &mut rng);
        let povm = random_povm(dim, lo, hi, &mut rng);
        let r = gentle_operator_check(&rho, &povm)?;
        if !r.pass {
            failures += 1;
        }
        min_slack = min_slack.min(r.rhs - r.lhs);
    }
    Ok(GentleTrialsSummary { trials, failures, min_slack, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{trace_distance, von_neumann_entropy};

    fn amp(re: f64, im: f64) -> CoherentAmplitude {
        CoherentAmplitude::new(C64::new(re, im)).unwrap()
    }

    #[test]
    fn vacuum_is_exact() {
        let v = coherent_state(amp(0.0, 0.0), 5);
        assert_eq!(v.amplitudes[0], C64::new(1.0, 0.0));
        assert!(v.amplitudes.iter().skip(1).all(|z| *z == C64::new(0.0, 0.0)));
    }

    #[test]
    fn coherent_norm_matches_poisson_tail() {
        let v = coherent_state(amp(1.0, 0.0), 40);
        // Poisson(1) mass above 39 is ~ e^-1 / 40! ~ 5e-49
        assert!((v.norm_sqr() - 1.0).abs() < 1e-12);
        assert!(!v.low_mass);
        assert!(coherent_state(amp(3.0, 0.0), 3).low_mass);
    }

    #[test]
    fn coherent_overlap_closed_form() {
        let (a, b) = (C64::new(1.0, 0.0), C64::new(0.0, 0.5));
        let va = coherent_state(a.into(), 60).amplitudes;
        let vb = coherent_state(b.into(), 60).amplitudes;
        let overlap = va.dotc(&vb);
        let expect = (-(a.norm_sqr() + b.norm_sqr()) / 2.0 + a.conj() * b).exp();
        assert!((overlap - expect).norm() < 1e-10);
    }

    #[test]
    fn displacement_of_zero_is_identity() {
        let spec = TruncationSpec::new(10).unwrap();
        let d = displacement_matrix(amp(0.0, 0.0), &spec).unwrap();
        assert!(trace_norm(&d.difference(&FockOperator::identity(30))) < 1e-12);
    }

    #[test]
    fn displacement_first_column_is_coherent_state() {
        let alpha = amp(0.7, 0.2);
        let spec = TruncationSpec::new(20).unwrap();
        let d = displacement_matrix(alpha, &spec).unwrap();
        let col = d.matrix().column(0).into_owned();
        let expect = coherent_state(alpha, spec.construction_dim()).amplitudes;
        assert!((col - expect).camax() < 1e-9);
    }

    #[test]
    fn displacement_group_inverse() {
        let alpha = amp(0.7, 0.2);
        let spec = TruncationSpec::new(20).unwrap();
        let d = displacement_matrix(alpha, &spec).unwrap();
        let dm = displacement_matrix(amp(-0.7, -0.2), &spec).unwrap();
        let prod = d.mul(&dm).unwrap().crop(spec.cutoff());
        assert!(trace_norm(&prod.difference(&FockOperator::identity(spec.cutoff()))) <= 1e-8);
    }

    #[test]
    fn displacement_defect_is_reported() {
        let spec = TruncationSpec::with_construction_dim(10, 12).unwrap();
        let err = displacement_matrix(amp(2.0, 0.0), &spec).unwrap_err();
        assert!(matches!(err, Error::UnitarityDefect { construction_dim: 12, .. }));
    }

    #[test]
    fn thermal_cases() {
        let vac = thermal_state(0.0, 4).unwrap();
        assert_eq!(vac, DensityOperator::basis_state(0, 4));
        let t = thermal_state(0.1, 60).unwrap();
        assert!((t.mean_photon_number() - 0.1).abs() < 1e-8);
        assert!(!t.is_subnormalized());
        let h = von_neumann_entropy(&t).unwrap();
        assert!((h - 0.483_446_685_613_664_6).abs() < 1e-6);
        assert!(thermal_state(2.0, 5).unwrap().is_subnormalized());
        assert!(thermal_state(-0.1, 5).is_err());
    }

    #[test]
    fn thermal_eigenvalues_are_geometric() {
        let t = thermal_state(0.1, 40).unwrap();
        let e = crate::fock::hermitian_eig(t.op()).unwrap();
        for (n, v) in e.values.iter().enumerate() {
            let expect = (1.0 / 1.1) * (0.1f64 / 1.1).powi(n as i32);
            assert!((v - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn displaced_thermal_limits() {
        let spec = TruncationSpec::new(30).unwrap();
        let t = displaced_thermal(amp(0.0, 0.0), 0.2, &spec).unwrap();
        assert_eq!(t, thermal_state(0.2, 30).unwrap());

        let alpha = amp(0.5, 0.0);
        let coh = displaced_thermal(alpha, 0.0, &spec).unwrap();
        let pure = DensityOperator::pure(&coherent_state(alpha, 30).amplitudes).unwrap();
        assert!(trace_distance(&coh, &pure) < 1e-8);
    }

    #[test]
    fn displaced_thermal_entropy_matches_thermal() {
        let spec = TruncationSpec::new(60).unwrap();
        let rho = displaced_thermal(amp(1.0, 0.0), 0.1, &spec).unwrap();
        let h = von_neumann_entropy(&rho).unwrap();
        assert!((h - 0.483_446_685_613_664_6).abs() < 5e-4, "{h}");
        assert!((rho.mean_photon_number() - 1.1).abs() < 1e-4);
        assert!(!has_mass_loss(&rho));
    }

    #[test]
    fn displaced_thermal_grid_invariants() {
        let spec = TruncationSpec::new(40).unwrap();
        for n in [0.05, 0.1, 0.5] {
            let h0 = crate::rates::gordon_g(n).unwrap();
            for a in [amp(0.0, 0.0), amp(0.5, 0.0), amp(1.0, 0.0), amp(1.0, 1.0)] {
                let rho = displaced_thermal(a, n, &spec).unwrap();
                let h = von_neumann_entropy(&rho).unwrap();
                assert!((h - h0).abs() < 5e-4, "alpha {a:?} N {n}: {h} vs {h0}");
                assert!((rho.mean_photon_number() - a.energy() - n).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn truncation_channel_properties() {
        // already supported below the cutoff
        let rho = DensityOperator::maximally_mixed(3).embed(6);
        let out = truncation_channel(&rho, 3).unwrap();
        assert!(trace_norm(&out.op().difference(&DensityOperator::maximally_mixed(3).op().clone())) < 1e-15);

        let spec = TruncationSpec::new(40).unwrap();
        let r = displaced_thermal(amp(1.0, 0.0), 0.1, &spec).unwrap();
        let cut = truncation_channel(&r, 12).unwrap();
        assert!((cut.trace() - 1.0).abs() < 1e-10);
        let dist = trace_norm(&cut.op().difference(r.op()));
        assert!(dist <= 2f64.powf(2.0 - 12.0 / 2.0), "{dist}");

        let r10 = truncation_channel(&r, 10).unwrap();
        assert!(trace_norm(&r10.op().difference(r.op())) <= 0.25);
        assert!(truncation_channel(&r, 41).is_err());
    }

    #[test]
    fn truncation_vacuum_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let rho = random_density(6, &mut rng);
            let kept: f64 = (0..4).map(|k| rho.matrix()[(k, k)].re).sum();
            let out = truncation_channel(&rho, 4).unwrap();
            assert!((out.matrix()[(0, 0)].re - rho.matrix()[(0, 0)].re - (1.0 - kept)).abs() < 1e-10);
            assert!((out.trace() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn povm_probability_poisson_cdf() {
        // accept = T_5 (levels 0..=5), rho = |1><1| coherent with L=40
        let rho = DensityOperator::pure(&coherent_state(amp(1.0, 0.0), 40).amplitudes).unwrap();
        let povm = BinaryPovm::number_cutoff(5, 40);
        let p = povm_probability(&povm, &rho).unwrap();
        assert!((p - 0.999_405_815_182_418_3).abs() < 1e-6);
    }

    #[test]
    fn truncation_bound_examples() {
        let r = truncation_mass_bound_check(amp(0.0, 0.0), 7).unwrap();
        assert!(r.pass && (r.lhs - 1.0).abs() < 1e-15);
        let r = truncation_mass_bound_check(amp(1.0, 0.0), 5).unwrap();
        assert!((r.lhs - 0.999_405_815_182_418_3).abs() < 1e-12);
        assert!((r.rhs - (1.0 - 32.0 / 120.0)).abs() < 1e-12);
        assert!(r.pass);
        // Poisson(4) CDF at 10 oracle
        let r = truncation_mass_bound_check(amp(2.0, 0.0), 10).unwrap();
        let mut term = (-4.0f64).exp();
        let mut cdf = term;
        for k in 1..=10 {
            term *= 4.0 / k as f64;
            cdf += term;
        }
        assert!((r.lhs - cdf).abs() < 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn truncation_bound_grid() {
        for ai in 0..=8 {
            for l in 3..=20 {
                let r = truncation_mass_bound_check(CoherentAmplitude::real(0.25 * ai as f64), l).unwrap();
                assert!(r.pass, "{r:?}");
            }
        }
    }

    #[test]
    fn gaussian_truncation_report() {
        let r = gaussian_truncation_check(0.5, 6).unwrap();
        let expect = 1.0 - (0.5f64 / 1.5).powi(7);
        assert!((r.lhs - expect).abs() < 1e-14);
        assert!(r.pass);
        assert!(r.literal_threshold < 0.0 && r.literal_condition_met);
        assert!(!r.inverse_eps_condition_met);
    }

    #[test]
    fn gentle_identity_is_trivial() {
        let rho = DensityOperator::maximally_mixed(3);
        let povm = BinaryPovm::new(FockOperator::identity(3)).unwrap();
        let r = gentle_operator_check(&rho, &povm).unwrap();
        assert!(r.lhs < 1e-14 && r.rhs < 1e-7 && r.pass);
    }

    #[test]
    fn gentle_truncation_projector() {
        let spec = TruncationSpec::new(60).unwrap();
        let rho = displaced_thermal(amp(1.0, 0.0), 0.1, &spec).unwrap();
        let povm = BinaryPovm::number_cutoff(10, 60);
        let r = gentle_operator_check(&rho, &povm).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.epsilon > 0.0);
    }

    #[test]
    fn gentle_random_near_identity() {
        let s = gentle_operator_trials(100, 0.9, 1.0, 17).unwrap();
        assert_eq!(s.failures, 0);
        assert!(s.min_slack > -1e-10);
    }
}
