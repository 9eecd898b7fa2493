//! Seeded Monte-Carlo BER engine.
//!
//! Every trial draws its frame, channel and noise from a random stream keyed
//! by `(base_seed, snr index, trial id)`, and every configured detector sees
//! the same `(y, H)`. Per-point aggregation is an integer sum, so results do
//! not depend on how trials are scheduled across threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detectors::{
    detect, residual, DetectionStats, DetectorConfig, DetectorError, DetectorKind,
};
use crate::numerics::ComplexVector;
use crate::signal::{
    build_qam, count_bit_errors, generate_channel, generate_noise, random_frame, snr_to_sigma2,
    transmit, Constellation, NoiseModel, RngStream, SignalError, SystemDims,
};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Default cap on `M^Nt` for ML inside a sweep.
pub const DEFAULT_ML_BUDGET: u64 = 1 << 24;

const TRIAL_BITS: u32 = 40;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid sweep configuration: {0}")]
    InvalidConfig(String),
    #[error("{kind} failed at {snr_db} dB, trial {trial}: {source}")]
    Detector {
        kind: DetectorKind,
        snr_db: f64,
        trial: u64,
        #[source]
        source: DetectorError,
    },
    #[error("curve never crosses BER {target:e} inside the SNR grid ({detector})")]
    NoCrossing { detector: String, target: f64 },
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

fn default_ml_budget() -> u64 {
    DEFAULT_ML_BUDGET
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub nt: usize,
    pub nr: usize,
    /// Constellation size M.
    pub m: usize,
    pub detectors: Vec<DetectorConfig>,
    pub snr_grid_db: Vec<f64>,
    /// Trials per SNR point.
    pub trials: u64,
    pub base_seed: u64,
    /// Replace the noise vector by zeros (filters still use the point's σ²).
    #[serde(default)]
    pub noiseless: bool,
    #[serde(default = "default_ml_budget")]
    pub ml_budget: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(HarnessError::InvalidConfig(msg));
        SystemDims::new(self.nt, self.nr)?;
        let c = build_qam(self.m)?;
        if self.trials == 0 {
            return invalid("trials must be >= 1".into());
        }
        if self.trials >= 1 << TRIAL_BITS {
            return invalid(format!("trials must be below 2^{TRIAL_BITS}"));
        }
        if self.snr_grid_db.is_empty() {
            return invalid("SNR grid is empty".into());
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return invalid("SNR grid contains a non-finite value".into());
        }
        if self.snr_grid_db.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("SNR grid must be strictly increasing".into());
        }
        if self.detectors.is_empty() {
            return invalid("no detectors configured".into());
        }
        let mut kinds: Vec<DetectorKind> = self.detectors.iter().map(|d| d.kind).collect();
        kinds.sort();
        if let Some(w) = kinds.windows(2).find(|w| w[0] == w[1]) {
            return invalid(format!("detector {} configured more than once", w[0]));
        }
        for d in &self.detectors {
            d.validate(&c)
                .map_err(|e| HarnessError::InvalidConfig(format!("{}: {e}", d.kind)))?;
        }
        Ok(())
    }

    pub fn dims(&self) -> SystemDims {
        SystemDims {
            nt: self.nt,
            nr: self.nr,
        }
    }

    pub fn bits_per_trial(&self) -> u64 {
        (self.nt * self.m.trailing_zeros() as usize) as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorOutcome {
    pub kind: DetectorKind,
    pub bit_errors: u64,
    /// `‖y − H·ŝ‖²` of the detector's output.
    pub residual: f64,
    pub stats: DetectionStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial_id: u64,
    pub snr_index: usize,
    pub results: Vec<DetectorOutcome>,
}

impl TrialOutcome {
    pub fn get(&self, kind: DetectorKind) -> Option<&DetectorOutcome> {
        self.results.iter().find(|r| r.kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub snr_db: f64,
    pub trials: u64,
    pub total_bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl BerPoint {
    pub fn new(snr_db: f64, trials: u64, total_bits: u64, bit_errors: u64) -> Self {
        let ber = if total_bits == 0 {
            0.0
        } else {
            bit_errors as f64 / total_bits as f64
        };
        let (ci_low, ci_high) = wilson_interval(bit_errors, total_bits, Z95);
        Self {
            snr_db,
            trials,
            total_bits,
            bit_errors,
            ber,
            ci_low,
            ci_high,
        }
    }

    /// Wilson interval at `z` standard deviations.
    pub fn interval(&self, z: f64) -> (f64, f64) {
        wilson_interval(self.bit_errors, self.total_bits, z)
    }

    /// Binomial standard error of the BER estimate.
    pub fn std_err(&self) -> f64 {
        if self.total_bits == 0 {
            return 0.0;
        }
        (self.ber * (1.0 - self.ber) / self.total_bits as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerCurve {
    pub detector: DetectorKind,
    pub points: Vec<BerPoint>,
}

impl BerCurve {
    pub fn label(&self) -> &'static str {
        self.detector.label()
    }
}

/// Diagnostic counters for one detector at one SNR point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointDiagnostics {
    pub detector: DetectorKind,
    pub snr_db: f64,
    pub stats: DetectionStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub curves: Vec<BerCurve>,
    pub diagnostics: Vec<PointDiagnostics>,
    pub warnings: Vec<String>,
}

impl SweepReport {
    pub fn curve(&self, kind: DetectorKind) -> Option<&BerCurve> {
        self.curves.iter().find(|c| c.detector == kind)
    }
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let low = if k == 0 {
        0.0
    } else {
        (center - half).clamp(0.0, p)
    };
    let high = if k == n {
        1.0
    } else {
        (center + half).clamp(p, 1.0)
    };
    (low, high)
}

/// A validated sweep with its constellation built and its active detectors
/// resolved.
#[derive(Debug, Clone)]
pub struct Sweep {
    cfg: SweepConfig,
    constellation: Constellation,
    active: Vec<DetectorConfig>,
    warnings: Vec<String>,
}

impl Sweep {
    pub fn new(cfg: SweepConfig) -> Result<Self> {
        cfg.validate()?;
        let constellation = build_qam(cfg.m)?;
        let mut warnings = Vec::new();
        let ml_space = (cfg.m as u128).checked_pow(cfg.nt as u32);
        let active = cfg
            .detectors
            .iter()
            .copied()
            .filter(|d| {
                let keep = d.kind != DetectorKind::Ml
                    || ml_space.is_some_and(|n| n <= u128::from(cfg.ml_budget));
                if !keep {
                    warnings.push(format!(
                        "ML excluded: search space {}^{} exceeds the enumeration budget {}",
                        cfg.m, cfg.nt, cfg.ml_budget
                    ));
                }
                keep
            })
            .collect::<Vec<_>>();
        if active.is_empty() {
            return Err(HarnessError::InvalidConfig(warnings.join("; ")));
        }
        Ok(Self {
            cfg,
            constellation,
            active,
            warnings,
        })
    }

    pub fn config(&self) -> &SweepConfig {
        &self.cfg
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn active_detectors(&self) -> &[DetectorConfig] {
        &self.active
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn stream(&self, snr_index: usize, trial_id: u64) -> RngStream {
        RngStream::new(
            self.cfg.base_seed,
            ((snr_index as u64) << TRIAL_BITS) | trial_id,
        )
    }

    pub fn noise_model(&self, snr_index: usize) -> NoiseModel {
        snr_to_sigma2(
            self.cfg.snr_grid_db[snr_index],
            self.cfg.dims(),
            &self.constellation,
        )
    }

    /// One channel, frame and noise realization, run through every active
    /// detector.
    pub fn trial(&self, snr_index: usize, trial_id: u64) -> Result<TrialOutcome> {
        let dims = self.cfg.dims();
        let c = &self.constellation;
        let nm = self.noise_model(snr_index);
        let mut rng = self.stream(snr_index, trial_id).rng();
        let frame = random_frame(dims, c, &mut rng);
        let h = generate_channel(dims, &mut rng);
        let noise = if self.cfg.noiseless {
            ComplexVector::zeros(dims.nr)
        } else {
            generate_noise(dims, nm, &mut rng)
        };
        let y = transmit(&h, &frame.symbols, &noise)?;
        let mut results = Vec::with_capacity(self.active.len());
        for cfg in &self.active {
            let out = detect(&y, &h, c, nm, cfg).map_err(|source| HarnessError::Detector {
                kind: cfg.kind,
                snr_db: self.cfg.snr_grid_db[snr_index],
                trial: trial_id,
                source,
            })?;
            results.push(DetectorOutcome {
                kind: cfg.kind,
                bit_errors: count_bit_errors(&frame, &out.symbols, c)? as u64,
                residual: residual(&y, &h, &out.symbols),
                stats: out.stats,
            });
        }
        Ok(TrialOutcome {
            trial_id,
            snr_index,
            results,
        })
    }

    /// Aggregated error counts and stats for one SNR point.
    fn point(&self, snr_index: usize) -> Result<Vec<(u64, DetectionStats)>> {
        let n = self.active.len();
        let zero = || vec![(0u64, DetectionStats::default()); n];
        (0..self.cfg.trials)
            .into_par_iter()
            .map(|t| self.trial(snr_index, t))
            .try_fold(zero, |mut acc, outcome| {
                for (slot, r) in acc.iter_mut().zip(outcome?.results) {
                    slot.0 += r.bit_errors;
                    slot.1.merge(&r.stats);
                }
                Ok(acc)
            })
            .try_reduce(zero, |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    x.0 += y.0;
                    x.1.merge(&y.1);
                }
                Ok(a)
            })
    }

    pub fn run(&self) -> Result<SweepReport> {
        let bits = self.cfg.bits_per_trial() * self.cfg.trials;
        let mut curves: Vec<BerCurve> = self
            .active
            .iter()
            .map(|d| BerCurve {
                detector: d.kind,
                points: Vec::with_capacity(self.cfg.snr_grid_db.len()),
            })
            .collect();
        let mut diagnostics = Vec::new();
        for (si, &snr_db) in self.cfg.snr_grid_db.iter().enumerate() {
            let totals = self.point(si)?;
            for (curve, (errors, stats)) in curves.iter_mut().zip(totals) {
                curve
                    .points
                    .push(BerPoint::new(snr_db, self.cfg.trials, bits, errors));
                diagnostics.push(PointDiagnostics {
                    detector: curve.detector,
                    snr_db,
                    stats,
                });
            }
        }
        Ok(SweepReport {
            curves,
            diagnostics,
            warnings: self.warnings.clone(),
        })
    }
}

pub fn run_trial(cfg: &SweepConfig, snr_index: usize, trial_id: u64) -> Result<TrialOutcome> {
    let sweep = Sweep::new(cfg.clone())?;
    if snr_index >= cfg.snr_grid_db.len() {
        return Err(HarnessError::InvalidConfig(format!(
            "SNR index {snr_index} out of range"
        )));
    }
    sweep.trial(snr_index, trial_id)
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    Sweep::new(cfg.clone())?.run()
}

/// Runs a sweep on a dedicated pool; `threads == 0` lets rayon decide.
pub fn run_sweep_with_threads(cfg: &SweepConfig, threads: usize) -> Result<SweepReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::ThreadPool(e.to_string()))?;
    pool.install(|| run_sweep(cfg))
}

/// SNR at which `curve` first falls to `target`, by linear interpolation of
/// `log10(BER)` between the bracketing grid points. A zero-error point is
/// taken at half an error so the logarithm stays finite.
pub fn snr_at_ber(curve: &BerCurve, target: f64) -> Result<f64> {
    let no_crossing = || HarnessError::NoCrossing {
        detector: curve.label().to_string(),
        target,
    };
    let floor = |p: &BerPoint| {
        if p.bit_errors == 0 {
            0.5 / p.total_bits.max(1) as f64
        } else {
            p.ber
        }
    };
    let pts = &curve.points;
    let j = pts
        .iter()
        .position(|p| p.ber <= target)
        .ok_or_else(no_crossing)?;
    if j == 0 {
        return Err(no_crossing());
    }
    let (a, b) = (&pts[j - 1], &pts[j]);
    let (la, lb) = (floor(a).log10(), floor(b).log10().min(target.log10()));
    let frac = (la - target.log10()) / (la - lb);
    Ok(a.snr_db + frac * (b.snr_db - a.snr_db))
}

/// SNR advantage of `curve_a` over `curve_b` at `target`, in dB:
/// `SNR_b(target) − SNR_a(target)`.
pub fn snr_gain_at_ber(curve_a: &BerCurve, curve_b: &BerCurve, target: f64) -> Result<f64> {
    Ok(snr_at_ber(curve_b, target)? - snr_at_ber(curve_a, target)?)
}

/// True when no later point's lower `z`-sigma Wilson bound sits above an
/// earlier point's upper bound.
pub fn is_monotone_within(curve: &BerCurve, z: f64) -> bool {
    let bounds: Vec<(f64, f64)> = curve.points.iter().map(|p| p.interval(z)).collect();
    bounds
        .iter()
        .enumerate()
        .all(|(i, (_, hi))| bounds[i + 1..].iter().all(|(lo, _)| lo <= hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(kind: DetectorKind, pts: &[(f64, f64)]) -> BerCurve {
        let total = 1_000_000;
        BerCurve {
            detector: kind,
            points: pts
                .iter()
                .map(|&(snr, ber)| {
                    BerPoint::new(snr, 1000, total, (ber * total as f64).round() as u64)
                })
                .collect(),
        }
    }

    #[test]
    fn wilson_basics() {
        let (lo, hi) = wilson_interval(0, 100, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
        let (lo, hi) = wilson_interval(50, 100, Z95);
        assert!(lo < 0.5 && hi > 0.5);
        assert!((0.5 - lo - (hi - 0.5)).abs() < 1e-12);
        assert_eq!(wilson_interval(100, 100, Z95).1, 1.0);
    }

    #[test]
    fn gain_of_identical_curves_is_zero() {
        let a = curve(
            DetectorKind::Sic,
            &[(0.0, 0.1), (2.0, 0.01), (4.0, 0.001), (6.0, 0.0001)],
        );
        assert_eq!(snr_gain_at_ber(&a, &a, 1e-3).unwrap(), 0.0);
        assert!((snr_at_ber(&a, 1e-3).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn gain_of_shifted_curve() {
        let bers = [0.1, 0.03, 0.01, 0.002, 0.0004, 0.0001];
        let a: Vec<_> = bers
            .iter()
            .enumerate()
            .map(|(i, &b)| (i as f64 * 2.0, b))
            .collect();
        let b: Vec<_> = bers
            .iter()
            .enumerate()
            .map(|(i, &b)| (i as f64 * 2.0 + 2.0, b))
            .collect();
        let ca = curve(DetectorKind::ImfSic, &a);
        let cb = curve(DetectorKind::MfSic, &b);
        assert!((snr_gain_at_ber(&ca, &cb, 1e-3).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn no_crossing_is_an_error() {
        let a = curve(DetectorKind::Zf, &[(0.0, 0.2), (2.0, 0.1)]);
        assert!(matches!(
            snr_at_ber(&a, 1e-3),
            Err(HarnessError::NoCrossing { .. })
        ));
        let below = curve(DetectorKind::Zf, &[(0.0, 1e-4), (2.0, 1e-5)]);
        assert!(snr_at_ber(&below, 1e-3).is_err());
    }

    #[test]
    fn zero_error_point_interpolates_finitely() {
        let a = curve(DetectorKind::Ml, &[(0.0, 0.01), (2.0, 0.0)]);
        let snr = snr_at_ber(&a, 1e-3).unwrap();
        assert!(snr > 0.0 && snr < 2.0);
    }

    #[test]
    fn monotone_check() {
        let good = curve(DetectorKind::Sic, &[(0.0, 0.1), (2.0, 0.05), (4.0, 0.01)]);
        assert!(is_monotone_within(&good, 3.0));
        let bad = curve(DetectorKind::Sic, &[(0.0, 0.01), (2.0, 0.05)]);
        assert!(!is_monotone_within(&bad, 3.0));
    }

    fn base() -> SweepConfig {
        SweepConfig {
            nt: 2,
            nr: 2,
            m: 4,
            detectors: vec![DetectorConfig::new(DetectorKind::Sic)],
            snr_grid_db: vec![0.0, 5.0],
            trials: 10,
            base_seed: 1,
            noiseless: false,
            ml_budget: DEFAULT_ML_BUDGET,
        }
    }

    #[test]
    fn config_validation() {
        assert!(base().validate().is_ok());
        let mut c = base();
        c.trials = 0;
        assert!(c.validate().is_err());
        let mut c = base();
        c.snr_grid_db = vec![5.0, 5.0];
        assert!(c.validate().is_err());
        let mut c = base();
        c.detectors.push(DetectorConfig::new(DetectorKind::Sic));
        assert!(c.validate().is_err());
        let mut c = base();
        c.m = 8;
        assert!(c.validate().is_err());
        let mut c = base();
        c.detectors = vec![DetectorConfig::with_params(DetectorKind::MfSic, 0.2, 5, 1)];
        assert!(c.validate().is_err());
    }

    #[test]
    fn ml_is_excluded_over_budget() {
        let mut c = base();
        c.nt = 8;
        c.nr = 8;
        c.m = 16;
        c.detectors.push(DetectorConfig::new(DetectorKind::Ml));
        let sweep = Sweep::new(c).unwrap();
        assert_eq!(sweep.active_detectors().len(), 1);
        assert_eq!(sweep.warnings().len(), 1);
    }
}
