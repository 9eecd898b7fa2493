//! Physical-layer substrate: square QAM alphabets with Gray labels, Rayleigh
//! channels, AWGN, SNR bookkeeping and the `y = H·s + n` link.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{ComplexMatrix, ComplexVector, NumericsError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("unsupported constellation size {0} (expected a square QAM order such as 4 or 16)")]
    UnsupportedModulation(usize),
    #[error("neighbor count {s} out of range 1..={m}")]
    NeighborCount { s: usize, m: usize },
    #[error("invalid antenna configuration nt={nt}, nr={nr} (need nr >= nt >= 1)")]
    InvalidDims { nt: usize, nr: usize },
    #[error("invalid noise variance {0}")]
    InvalidNoise(f64),
    #[error("symbol {0} is not in the constellation")]
    NotInAlphabet(Complex64),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Square QAM alphabet on the odd-integer grid.
///
/// Points are ordered with the in-phase level as the major key and the
/// quadrature level as the minor key, both ascending. For 4-QAM this gives
/// `{-1-1i, -1+1i, 1-1i, 1+1i}`. Each point carries a Gray label built from
/// one Gray code per axis, in-phase bits first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constellation {
    points: Vec<Complex64>,
    labels: Vec<u32>,
    label_to_index: Vec<usize>,
    bits_per_symbol: usize,
    side: usize,
    es: f64,
}

impl Constellation {
    #[inline]
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    /// Average symbol energy under a uniform prior.
    #[inline]
    pub fn es(&self) -> f64 {
        self.es
    }

    #[inline]
    pub fn label(&self, index: usize) -> u32 {
        self.labels[index]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn index_of_label(&self, label: u32) -> usize {
        self.label_to_index[label as usize]
    }

    /// Index of an exact alphabet member.
    pub fn index_of(&self, z: Complex64) -> Option<usize> {
        let ai = self.axis_level_exact(z.re)?;
        let aq = self.axis_level_exact(z.im)?;
        Some(ai * self.side + aq)
    }

    fn axis_level_exact(&self, v: f64) -> Option<usize> {
        let level = (v + (self.side as f64 - 1.0)) / 2.0;
        if level.fract() != 0.0 || level < 0.0 || level >= self.side as f64 {
            return None;
        }
        Some(level as usize)
    }

    /// Nearest grid level on one axis; an exact midpoint goes to the lower level.
    #[inline]
    fn axis_level_nearest(&self, v: f64) -> usize {
        let max = self.side - 1;
        let t = (v + max as f64) / 2.0;
        if t <= 0.0 {
            return 0;
        }
        if t >= max as f64 {
            return max;
        }
        let lo = t.floor();
        if t - lo > 0.5 {
            lo as usize + 1
        } else {
            lo as usize
        }
    }

    /// Index of the nearest point; ties go to the lowest index.
    #[inline]
    pub fn nearest_index(&self, z: Complex64) -> usize {
        self.axis_level_nearest(z.re) * self.side + self.axis_level_nearest(z.im)
    }
}

pub fn build_qam(m: usize) -> Result<Constellation, SignalError> {
    let side = (m as f64).sqrt().round() as usize;
    if m < 4 || side * side != m || !side.is_power_of_two() || m > 1 << 20 {
        return Err(SignalError::UnsupportedModulation(m));
    }
    let axis_bits = side.trailing_zeros() as usize;
    let bits_per_symbol = 2 * axis_bits;
    let level = |a: usize| (2 * a) as f64 - (side as f64 - 1.0);
    let gray = |a: usize| (a ^ (a >> 1)) as u32;

    let mut points = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for ai in 0..side {
        for aq in 0..side {
            points.push(Complex64::new(level(ai), level(aq)));
            labels.push((gray(ai) << axis_bits) | gray(aq));
        }
    }
    let mut label_to_index = vec![0; m];
    for (idx, &lab) in labels.iter().enumerate() {
        label_to_index[lab as usize] = idx;
    }
    let es = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / m as f64;
    Ok(Constellation {
        points,
        labels,
        label_to_index,
        bits_per_symbol,
        side,
        es,
    })
}

/// Nearest constellation point (ties: lowest alphabet index).
#[inline]
pub fn quantize(z: Complex64, c: &Constellation) -> Complex64 {
    c.points[c.nearest_index(z)]
}

/// The `s` points nearest to `z`, ascending by distance, ties by index.
pub fn neighbor_order(
    z: Complex64,
    c: &Constellation,
    s: usize,
) -> Result<Vec<Complex64>, SignalError> {
    if s == 0 || s > c.size() {
        return Err(SignalError::NeighborCount { s, m: c.size() });
    }
    if s == 1 {
        return Ok(vec![quantize(z, c)]);
    }
    let mut ranked: Vec<(f64, usize)> = c
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| ((z - p).norm_sqr(), i))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(ranked[..s].iter().map(|&(_, i)| c.points[i]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemDims {
    pub nt: usize,
    pub nr: usize,
}

impl SystemDims {
    pub fn new(nt: usize, nr: usize) -> Result<Self, SignalError> {
        if nt == 0 || nr < nt {
            return Err(SignalError::InvalidDims { nt, nr });
        }
        Ok(Self { nt, nr })
    }

    pub fn square(n: usize) -> Result<Self, SignalError> {
        Self::new(n, n)
    }
}

/// Per-complex-dimension noise variance σ².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    sigma2: f64,
}

impl NoiseModel {
    /// `sigma2 == 0` is accepted and stands for the noiseless limit.
    pub fn new(sigma2: f64) -> Result<Self, SignalError> {
        if !(sigma2.is_finite() && sigma2 >= 0.0) {
            return Err(SignalError::InvalidNoise(sigma2));
        }
        Ok(Self { sigma2 })
    }

    #[inline]
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
}

/// `σ² = Nt·Es / 10^(snr/10)`.
pub fn snr_to_sigma2(snr_db: f64, dims: SystemDims, c: &Constellation) -> NoiseModel {
    let sigma2 = dims.nt as f64 * c.es() / 10f64.powf(snr_db / 10.0);
    NoiseModel { sigma2 }
}

/// Inverse of [`snr_to_sigma2`].
pub fn sigma2_to_snr(nm: NoiseModel, dims: SystemDims, c: &Constellation) -> f64 {
    10.0 * (dims.nt as f64 * c.es() / nm.sigma2).log10()
}

/// Identifies one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// One CN(0, variance) draw.
#[inline]
fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// Nr×Nt matrix of i.i.d. CN(0, 1) entries.
pub fn generate_channel<R: Rng + ?Sized>(dims: SystemDims, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(dims.nr, dims.nt, |_, _| complex_normal(rng, 1.0))
}

/// Length-Nr vector of i.i.d. CN(0, σ²) entries.
pub fn generate_noise<R: Rng + ?Sized>(
    dims: SystemDims,
    nm: NoiseModel,
    rng: &mut R,
) -> ComplexVector {
    (0..dims.nr)
        .map(|_| complex_normal(rng, nm.sigma2))
        .collect()
}

/// A transmitted symbol vector together with the bits it carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxFrame {
    /// Bits, most significant bit of each symbol label first.
    pub bits: Vec<u8>,
    pub indices: Vec<usize>,
    pub symbols: ComplexVector,
}

impl TxFrame {
    pub fn from_bits(bits: Vec<u8>, c: &Constellation) -> Result<Self, SignalError> {
        let k = c.bits_per_symbol();
        if !bits.len().is_multiple_of(k) {
            return Err(SignalError::LengthMismatch {
                expected: bits.len().next_multiple_of(k),
                got: bits.len(),
            });
        }
        let indices: Vec<usize> = bits
            .chunks_exact(k)
            .map(|chunk| {
                let label = chunk
                    .iter()
                    .fold(0u32, |acc, &b| (acc << 1) | u32::from(b & 1));
                c.index_of_label(label)
            })
            .collect();
        let symbols = indices.iter().map(|&i| c.points()[i]).collect();
        Ok(Self {
            bits,
            indices,
            symbols,
        })
    }

    pub fn from_symbols(symbols: &[Complex64], c: &Constellation) -> Result<Self, SignalError> {
        let bits = symbols_to_bits(symbols, c)?;
        Self::from_bits(bits, c)
    }
}

pub fn symbols_to_bits(symbols: &[Complex64], c: &Constellation) -> Result<Vec<u8>, SignalError> {
    let k = c.bits_per_symbol();
    let mut bits = Vec::with_capacity(symbols.len() * k);
    for &z in symbols {
        let idx = c.index_of(z).ok_or(SignalError::NotInAlphabet(z))?;
        let label = c.label(idx);
        bits.extend((0..k).rev().map(|b| ((label >> b) & 1) as u8));
    }
    Ok(bits)
}

/// Nt·log₂M uniform bits mapped through the Gray labels.
pub fn random_frame<R: Rng + ?Sized>(dims: SystemDims, c: &Constellation, rng: &mut R) -> TxFrame {
    let bits: Vec<u8> = (0..dims.nt * c.bits_per_symbol())
        .map(|_| u8::from(rng.random::<bool>()))
        .collect();
    TxFrame::from_bits(bits, c).expect("bit count is a multiple of bits per symbol")
}

/// `y = H·s + n`.
pub fn transmit(
    h: &ComplexMatrix,
    s: &[Complex64],
    n: &[Complex64],
) -> Result<ComplexVector, SignalError> {
    if n.len() != h.rows() {
        return Err(SignalError::LengthMismatch {
            expected: h.rows(),
            got: n.len(),
        });
    }
    let mut y = h.mul_vec(s)?;
    for (yi, ni) in y.iter_mut().zip(n) {
        *yi += ni;
    }
    Ok(y)
}

/// Hamming distance between the transmitted bits and the labels of `detected`.
pub fn count_bit_errors(
    truth: &TxFrame,
    detected: &[Complex64],
    c: &Constellation,
) -> Result<usize, SignalError> {
    if detected.len() != truth.indices.len() {
        return Err(SignalError::LengthMismatch {
            expected: truth.indices.len(),
            got: detected.len(),
        });
    }
    let mut errors = 0;
    for (&tx, &z) in truth.indices.iter().zip(detected) {
        let rx = c.index_of(z).ok_or(SignalError::NotInAlphabet(z))?;
        errors += (c.label(tx) ^ c.label(rx)).count_ones() as usize;
    }
    Ok(errors)
}
