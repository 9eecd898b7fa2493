//! Figure setups.

use clap::ValueEnum;
use mimo_sic::detectors::{DetectorConfig, DetectorKind};
use mimo_sic::harness::{SweepConfig, DEFAULT_ML_BUDGET};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 2014;
pub const FIGURE_TRIALS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

/// Inclusive grid `start, start + step, …` up to `stop`.
pub fn grid(start: f64, step: f64, stop: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..n)
        .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
        .collect()
}

fn all_kinds(d_th: f64, s: usize, l: usize) -> Vec<DetectorConfig> {
    DetectorKind::ALL
        .iter()
        .map(|&k| DetectorConfig::with_params(k, d_th, s, l))
        .collect()
}

impl Figure {
    /// Sweep configuration of the figure. ML is listed everywhere and the
    /// harness drops it, with a warning, where enumeration is out of budget.
    pub fn config(self) -> SweepConfig {
        let (n, m, snr_grid_db, detectors) = match self {
            Figure::Fig2 => (4, 4, grid(0.0, 1.0, 18.0), all_kinds(0.2, 4, 2)),
            Figure::Fig3 => (8, 4, grid(0.0, 2.0, 20.0), all_kinds(0.2, 4, 2)),
            Figure::Fig4 => {
                let mut d = all_kinds(0.2, 4, 2);
                for c in &mut d {
                    if c.kind == DetectorKind::OimfSic {
                        c.l = 3;
                        c.d_th = 0.5;
                    }
                }
                (16, 4, grid(0.0, 2.0, 16.0), d)
            }
            Figure::Fig5 => (4, 16, grid(4.0, 2.0, 28.0), all_kinds(0.2, 8, 2)),
            Figure::Fig6 => {
                let mut d = all_kinds(0.2, 8, 2);
                for c in &mut d {
                    if c.kind == DetectorKind::OimfSic {
                        c.l = 3;
                    }
                }
                (8, 16, grid(4.0, 2.0, 28.0), d)
            }
        };
        SweepConfig {
            nt: n,
            nr: n,
            m,
            detectors,
            snr_grid_db,
            trials: FIGURE_TRIALS,
            base_seed: DEFAULT_SEED,
            noiseless: false,
            ml_budget: DEFAULT_ML_BUDGET,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_inclusive_and_clean() {
        assert_eq!(grid(0.0, 2.0, 14.0).len(), 8);
        assert_eq!(grid(0.0, 0.1, 0.3), vec![0.0, 0.1, 0.2, 0.3]);
        assert_eq!(grid(5.0, 1.0, 5.0), vec![5.0]);
    }

    #[test]
    fn fig4_oimf_variant() {
        let cfg = Figure::Fig4.config();
        let o = cfg
            .detectors
            .iter()
            .find(|d| d.kind == DetectorKind::OimfSic)
            .unwrap();
        assert_eq!((o.l, o.d_th), (3, 0.5));
        let i = cfg
            .detectors
            .iter()
            .find(|d| d.kind == DetectorKind::ImfSic)
            .unwrap();
        assert_eq!((i.l, i.d_th), (2, 0.2));
    }

    #[test]
    fn fig2_matches_caption() {
        let cfg = Figure::Fig2.config();
        assert_eq!((cfg.nt, cfg.nr, cfg.m, cfg.trials), (4, 4, 4, 10_000));
        for d in &cfg.detectors {
            assert_eq!((d.d_th, d.s, d.l), (0.2, 4, 2));
        }
    }
}
