//! Successive-interference-cancellation MIMO detectors with multiple
//! feedback, recursive shadow-area checking and LLR-based dynamic ordering,
//! plus linear and ML baselines and a seeded Monte-Carlo BER harness.
//!
//! ```
//! use mimo_sic::detectors::{detect, DetectorConfig, DetectorKind};
//! use mimo_sic::signal::{build_qam, generate_channel, random_frame, snr_to_sigma2, transmit, RngStream, SystemDims};
//!
//! let c = build_qam(4).unwrap();
//! let dims = SystemDims::square(4).unwrap();
//! let mut rng = RngStream::new(42, 0).rng();
//! let frame = random_frame(dims, &c, &mut rng);
//! let h = generate_channel(dims, &mut rng);
//! let y = transmit(&h, &frame.symbols, &[num_complex::Complex64::new(0.0, 0.0); 4]).unwrap();
//! let nm = snr_to_sigma2(30.0, dims, &c);
//! let out = detect(&y, &h, &c, nm, &DetectorConfig::new(DetectorKind::ImfSic)).unwrap();
//! assert_eq!(out.symbols.len(), 4);
//! ```

pub mod detectors;
pub mod harness;
pub mod numerics;
pub mod signal;

pub use detectors::{DetectionResult, DetectorConfig, DetectorError, DetectorKind, LlrReference};
pub use harness::{BerCurve, BerPoint, SweepConfig, SweepReport};
pub use num_complex::Complex64;
