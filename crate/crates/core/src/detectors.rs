//! MIMO symbol-vector detectors.
//!
//! Linear (ZF, MMSE), exhaustive ML, and the successive-interference
//! cancellation family: plain SIC, multiple-feedback SIC, its recursive
//! variant and the LLR-ordered recursive variant.
//!
//! The SIC family shares a single layered engine. A detection walks the
//! undetected columns one at a time; the next column comes from an ordering
//! policy (natural, fixed, or LLR), its soft estimate from an MMSE filter
//! built over the still-undetected columns, and an unreliable estimate opens
//! `S` candidate branches when the remaining recursion budget allows it.
//! SIC, MF-SIC and IMF-SIC differ only in that budget (0, 1 and `L`).

use std::collections::HashMap;
use std::fmt;
use std::hash::{BuildHasherDefault, Hasher};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{
    conj_transpose, dotc, hermitian_solve, matmul, norm_sq, outer_gram, sub_scaled, Cholesky,
    ComplexMatrix, ComplexVector, NumericsError,
};
use crate::signal::{neighbor_order, quantize, Constellation, NoiseModel, SignalError};

/// Largest ML search space accepted by [`detect_ml`].
pub const ML_HARD_LIMIT: u128 = 1 << 32;

/// Widest system the layered engine handles (column sets are bitmasks).
pub const MAX_TX_ANTENNAS: usize = 64;

/// Leverage terms below this are treated as degenerate by [`llr_metric`].
pub const LEVERAGE_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectorError {
    #[error("invalid detector configuration: {0}")]
    InvalidConfig(String),
    #[error("ML search space {m}^{nt} exceeds the enumeration limit")]
    SearchSpaceTooLarge { m: usize, nt: usize },
    #[error("channel matrix is rank deficient: {0}")]
    RankDeficient(NumericsError),
    #[error("invalid detection order {0:?}")]
    InvalidOrder(Vec<usize>),
    #[error("degenerate leverage term 1 - hᴴR⁻¹h = {0:e}")]
    DegenerateLeverage(f64),
    #[error("dimension mismatch: y has {y} entries, H is {rows}x{cols}")]
    DimensionMismatch { y: usize, rows: usize, cols: usize },
    #[error("{0} requires a strictly positive noise variance")]
    NeedsNoise(DetectorKind),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

pub type Result<T> = std::result::Result<T, DetectorError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DetectorKind {
    #[serde(rename = "ZF")]
    Zf,
    #[serde(rename = "MMSE")]
    Mmse,
    #[serde(rename = "SIC")]
    Sic,
    #[serde(rename = "MF-SIC")]
    MfSic,
    #[serde(rename = "IMF-SIC")]
    ImfSic,
    #[serde(rename = "OIMF-SIC")]
    OimfSic,
    #[serde(rename = "ML")]
    Ml,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 7] = [
        DetectorKind::Zf,
        DetectorKind::Mmse,
        DetectorKind::Sic,
        DetectorKind::MfSic,
        DetectorKind::ImfSic,
        DetectorKind::OimfSic,
        DetectorKind::Ml,
    ];

    pub fn label(self) -> &'static str {
        match self {
            DetectorKind::Zf => "ZF",
            DetectorKind::Mmse => "MMSE",
            DetectorKind::Sic => "SIC",
            DetectorKind::MfSic => "MF-SIC",
            DetectorKind::ImfSic => "IMF-SIC",
            DetectorKind::OimfSic => "OIMF-SIC",
            DetectorKind::Ml => "ML",
        }
    }

    /// Whether `d_th`, `S` and `L` mean anything for this kind.
    pub fn uses_feedback_params(self) -> bool {
        matches!(
            self,
            DetectorKind::MfSic | DetectorKind::ImfSic | DetectorKind::OimfSic
        )
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DetectorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .chars()
            .filter(|c| *c != '-' && *c != '_')
            .collect::<String>()
            .to_ascii_uppercase();
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.label().replace('-', "") == norm)
            .ok_or_else(|| format!("unknown detector '{s}'"))
    }
}

/// Which covariance the LLR leverage term is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LlrReference {
    /// `R` rebuilt from the still-undetected columns at every update.
    #[default]
    Remaining,
    /// `R` built once from the full channel.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub kind: DetectorKind,
    /// Shadow-area radius.
    pub d_th: f64,
    /// Candidate count per unreliable layer.
    pub s: usize,
    /// Recursion budget.
    pub l: usize,
    #[serde(default)]
    pub llr_reference: LlrReference,
}

impl DetectorConfig {
    pub fn new(kind: DetectorKind) -> Self {
        Self {
            kind,
            d_th: 0.2,
            s: 4,
            l: 2,
            llr_reference: LlrReference::Remaining,
        }
    }

    pub fn with_params(kind: DetectorKind, d_th: f64, s: usize, l: usize) -> Self {
        Self {
            d_th,
            s,
            l,
            ..Self::new(kind)
        }
    }

    pub fn validate(&self, c: &Constellation) -> Result<()> {
        if !self.kind.uses_feedback_params() {
            return Ok(());
        }
        if !(self.d_th.is_finite() && self.d_th >= 0.0) {
            return Err(DetectorError::InvalidConfig(format!(
                "d_th must be finite and >= 0, got {}",
                self.d_th
            )));
        }
        if self.s == 0 || self.s > c.size() {
            return Err(DetectorError::InvalidConfig(format!(
                "S must lie in 1..={}, got {}",
                c.size(),
                self.s
            )));
        }
        if self.l == 0 {
            return Err(DetectorError::InvalidConfig("L must be >= 1".into()));
        }
        Ok(())
    }

    /// Nesting levels of candidate branching available at the outer loop.
    fn levels(&self) -> usize {
        match self.kind {
            DetectorKind::MfSic => 1,
            DetectorKind::ImfSic | DetectorKind::OimfSic => self.l,
            _ => 0,
        }
    }
}

/// Column filter or full filter matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum LinearFilter {
    Column(ComplexVector),
    Matrix(ComplexMatrix),
}

impl LinearFilter {
    pub fn as_column(&self) -> Option<&ComplexVector> {
        match self {
            LinearFilter::Column(w) => Some(w),
            LinearFilter::Matrix(_) => None,
        }
    }
}

/// Soft estimate plus its shadow-area verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftDecision {
    pub z: Complex64,
    pub nearest: Complex64,
    pub d: f64,
    pub reliable: bool,
}

/// Branches evaluated for one unreliable layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub seeds: Vec<Complex64>,
    /// Full reconstructed symbol vectors, one per seed.
    pub candidates: Vec<ComplexVector>,
    /// `‖y − H·x‖²` against the original `y` and full `H`.
    pub residuals: Vec<f64>,
}

impl CandidateSet {
    pub fn best(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (j, r) in self.residuals.iter().enumerate() {
            if best.is_none_or(|b| *r < self.residuals[b]) {
                best = Some(j);
            }
        }
        best
    }
}

/// One outer-loop decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerTrace {
    pub index: usize,
    pub soft: SoftDecision,
    pub candidates: Option<CandidateSet>,
    pub chosen: Complex64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionStats {
    /// Unreliable decisions that opened candidate branches.
    pub sac_triggers: u64,
    /// Deepest nesting of candidate branching reached (outer branch = 1).
    pub max_depth: u64,
    /// Full candidate vectors scored.
    pub candidate_evaluations: u64,
}

impl DetectionStats {
    pub fn merge(&mut self, other: &DetectionStats) {
        self.sac_triggers += other.sac_triggers;
        self.max_depth = self.max_depth.max(other.max_depth);
        self.candidate_evaluations += other.candidate_evaluations;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub symbols: ComplexVector,
    pub stats: DetectionStats,
    /// Outer-loop decisions in detection order (SIC family only).
    pub trace: Vec<LayerTrace>,
}

impl DetectionResult {
    fn plain(symbols: ComplexVector) -> Self {
        Self {
            symbols,
            stats: DetectionStats::default(),
            trace: Vec::new(),
        }
    }
}

/// Undetected indices and their current detection order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderingState {
    /// Undetected indices, ascending.
    pub b: Vec<usize>,
    /// The same indices in detection order.
    pub t: Vec<usize>,
}

impl OrderingState {
    pub fn new(nt: usize) -> Self {
        Self {
            b: (0..nt).collect(),
            t: (0..nt).collect(),
        }
    }

    pub fn from_indices(mut b: Vec<usize>) -> Self {
        b.sort_unstable();
        b.dedup();
        Self { t: b.clone(), b }
    }

    pub fn remove(&mut self, index: usize) {
        self.b.retain(|&i| i != index);
        self.t.retain(|&i| i != index);
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }
}

/// `‖y − H·x‖²`.
pub fn residual(y: &[Complex64], h: &ComplexMatrix, x: &[Complex64]) -> f64 {
    let mut r = y.to_vec();
    for j in 0..h.cols() {
        let xj = x[j];
        for (i, ri) in r.iter_mut().enumerate() {
            *ri -= h[(i, j)] * xj;
        }
    }
    norm_sq(&r)
}

fn check_dims(y: &[Complex64], h: &ComplexMatrix) -> Result<()> {
    if y.len() != h.rows() || h.cols() == 0 || h.cols() > h.rows() {
        return Err(DetectorError::DimensionMismatch {
            y: y.len(),
            rows: h.rows(),
            cols: h.cols(),
        });
    }
    Ok(())
}

fn check_noise(kind: DetectorKind, nm: NoiseModel) -> Result<()> {
    if nm.sigma2() > 0.0 {
        Ok(())
    } else {
        Err(DetectorError::NeedsNoise(kind))
    }
}

/// Exhaustive minimum-distance search over all `M^Nt` vectors.
///
/// Enumeration is lexicographic over symbol indices with the first antenna
/// most significant, and a strict comparison keeps the earliest minimizer.
pub fn detect_ml(y: &[Complex64], h: &ComplexMatrix, c: &Constellation) -> Result<DetectionResult> {
    check_dims(y, h)?;
    let m = c.size();
    let nt = h.cols();
    if (m as u128)
        .checked_pow(nt as u32)
        .is_none_or(|n| n > ML_HARD_LIMIT)
    {
        return Err(DetectorError::SearchSpaceTooLarge { m, nt });
    }
    let cols = h.columns();
    let last_norm = cols[nt - 1].norm_sq();
    let energies: Vec<f64> = c.points().iter().map(|p| p.norm_sqr()).collect();

    struct Search<'a> {
        cols: &'a [ComplexVector],
        points: &'a [Complex64],
        energies: &'a [f64],
        last_norm: f64,
        // residual before deciding column k
        stack: Vec<Vec<Complex64>>,
        current: Vec<usize>,
        best: Vec<usize>,
        best_cost: f64,
    }

    impl Search<'_> {
        fn run(&mut self, k: usize) {
            let nt = self.cols.len();
            if k + 1 == nt {
                let r = &self.stack[k];
                let rr = norm_sq(r);
                let hr = dotc(&self.cols[k], r);
                for (idx, p) in self.points.iter().enumerate() {
                    let cost = rr - 2.0 * (p.conj() * hr).re + self.energies[idx] * self.last_norm;
                    if cost < self.best_cost {
                        self.best_cost = cost;
                        self.current[k] = idx;
                        self.best.copy_from_slice(&self.current);
                    }
                }
                return;
            }
            for (idx, &p) in self.points.iter().enumerate() {
                let (head, tail) = self.stack.split_at_mut(k + 1);
                let next = &mut tail[0];
                next.copy_from_slice(&head[k]);
                sub_scaled(next, p, &self.cols[k]);
                self.current[k] = idx;
                self.run(k + 1);
            }
        }
    }

    let mut stack = vec![vec![Complex64::new(0.0, 0.0); y.len()]; nt];
    stack[0].copy_from_slice(y);
    let mut search = Search {
        cols: &cols,
        points: c.points(),
        energies: &energies,
        last_norm,
        stack,
        current: vec![0; nt],
        best: vec![0; nt],
        best_cost: f64::INFINITY,
    };
    search.run(0);
    let symbols = search.best.iter().map(|&i| c.points()[i]).collect();
    let mut out = DetectionResult::plain(symbols);
    out.stats.candidate_evaluations = (m as u64).pow(nt as u32);
    Ok(out)
}

/// `(HᴴH)⁻¹Hᴴy`, via a Cholesky solve of the normal equations.
pub fn zf_soft(y: &[Complex64], h: &ComplexMatrix) -> Result<ComplexVector> {
    check_dims(y, h)?;
    let hh = conj_transpose(h);
    let gram = matmul(&hh, h)?;
    let rhs = hh.mul_vec(y)?;
    hermitian_solve(&gram, &rhs).map_err(DetectorError::RankDeficient)
}

/// `(HᴴH + σ²/Es·I)⁻¹Hᴴy`.
pub fn mmse_soft(
    y: &[Complex64],
    h: &ComplexMatrix,
    c: &Constellation,
    nm: NoiseModel,
) -> Result<ComplexVector> {
    check_dims(y, h)?;
    check_noise(DetectorKind::Mmse, nm)?;
    let hh = conj_transpose(h);
    let gram = matmul(&hh, h)?.add_scaled_identity(nm.sigma2() / c.es());
    let rhs = hh.mul_vec(y)?;
    Ok(hermitian_solve(&gram, &rhs)?)
}

pub fn detect_zf(
    y: &[Complex64],
    h: &ComplexMatrix,
    c: &Constellation,
    _nm: NoiseModel,
) -> Result<DetectionResult> {
    let soft = zf_soft(y, h)?;
    Ok(DetectionResult::plain(
        soft.iter().map(|&z| quantize(z, c)).collect(),
    ))
}

pub fn detect_mmse(
    y: &[Complex64],
    h: &ComplexMatrix,
    c: &Constellation,
    nm: NoiseModel,
) -> Result<DetectionResult> {
    let soft = mmse_soft(y, h, c, nm)?;
    Ok(DetectionResult::plain(
        soft.iter().map(|&z| quantize(z, c)).collect(),
    ))
}

/// MMSE nulling vector for one column of `h_remaining`:
/// solves `(H_rem·H_remᴴ + σ²/Es·I)·w = h_target`.
pub fn mmse_filter_column(
    h_remaining: &ComplexMatrix,
    target_col: usize,
    nm: NoiseModel,
    c: &Constellation,
) -> Result<LinearFilter> {
    if h_remaining.cols() == 0 || target_col >= h_remaining.cols() {
        return Err(DetectorError::InvalidConfig(format!(
            "target column {target_col} outside {} remaining columns",
            h_remaining.cols()
        )));
    }
    let cols = h_remaining.columns();
    let refs: Vec<&[Complex64]> = cols.iter().map(|v| &v[..]).collect();
    let g = outer_gram(&refs, h_remaining.rows(), nm.sigma2() / c.es());
    Ok(LinearFilter::Column(hermitian_solve(
        &g,
        &cols[target_col],
    )?))
}

/// Shadow-area test: reliable iff `|z − Q[z]| ≤ d_th`.
pub fn sac_check(z: Complex64, c: &Constellation, d_th: f64) -> SoftDecision {
    let nearest = quantize(z, c);
    let d = (z - nearest).norm();
    SoftDecision {
        z,
        nearest,
        d,
        reliable: d <= d_th,
    }
}

/// LLR reliability `|z| / (1 − hᴴR⁻¹h)` with `R⁻¹h` obtained by a solve.
pub fn llr_metric(z: Complex64, h_col: &[Complex64], r: &ComplexMatrix) -> Result<f64> {
    let x = hermitian_solve(r, h_col)?;
    let leverage = 1.0 - dotc(h_col, &x).re;
    if leverage < LEVERAGE_FLOOR {
        return Err(DetectorError::DegenerateLeverage(leverage));
    }
    Ok(z.norm() / leverage)
}

/// Ranks the undetected indices of `state` by LLR, largest first.
///
/// Every quantity is built directly from its definition: per-index MMSE
/// filters over the undetected columns, then `R = H_B·H_Bᴴ + σ²I` (or the
/// full-channel `R`) and [`llr_metric`]. Ties keep the lower index first.
pub fn llr_order(
    y_current: &[Complex64],
    h: &ComplexMatrix,
    state: &OrderingState,
    nm: NoiseModel,
    c: &Constellation,
    reference: LlrReference,
) -> Result<OrderingState> {
    if state.b.is_empty() {
        return Ok(state.clone());
    }
    let h_rem = h.select_columns(&state.b);
    let r_cols = match reference {
        LlrReference::Remaining => h_rem.columns(),
        LlrReference::Full => h.columns(),
    };
    let refs: Vec<&[Complex64]> = r_cols.iter().map(|v| &v[..]).collect();
    let r = outer_gram(&refs, h.rows(), nm.sigma2());
    let mut scored = Vec::with_capacity(state.b.len());
    for (pos, &idx) in state.b.iter().enumerate() {
        let w = match mmse_filter_column(&h_rem, pos, nm, c)? {
            LinearFilter::Column(w) => w,
            LinearFilter::Matrix(_) => unreachable!("column filter requested"),
        };
        let z = w.dot(y_current);
        scored.push((llr_metric(z, &h.column(idx), &r)?, idx));
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(OrderingState {
        b: state.b.clone(),
        t: scored.into_iter().map(|(_, i)| i).collect(),
    })
}

// ---------------------------------------------------------------------------
// Layered engine
// ---------------------------------------------------------------------------

#[derive(Default)]
struct MaskHasher(u64);

impl Hasher for MaskHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = (self.0 << 8 | u64::from(b)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        }
    }

    fn write_u64(&mut self, v: u64) {
        self.0 = v.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    }
}

type MaskMap<V> = HashMap<u64, V, BuildHasherDefault<MaskHasher>>;

#[derive(Debug, Clone)]
enum Ordering {
    Natural,
    Fixed(Vec<usize>),
    Llr(LlrReference),
}

/// Per-column-set data shared by every branch that reaches that set.
struct Subset {
    members: Vec<usize>,
    mmse: Cholesky,
    filters: Vec<Option<ComplexVector>>,
    leverage: Option<Vec<f64>>,
}

impl Subset {
    /// MMSE filter for the member at `pos`.
    ///
    /// Uses `(H_B·H_Bᴴ + λI)⁻¹h_k = H_B·(H_BᴴH_B + λI)⁻¹e_k`, which needs a
    /// factorization of the smaller and better conditioned |B|×|B| system.
    fn filter(&mut self, pos: usize, cols: &[ComplexVector]) -> &ComplexVector {
        if self.filters[pos].is_none() {
            let n = self.members.len();
            let mut e = vec![Complex64::new(0.0, 0.0); n];
            e[pos] = Complex64::new(1.0, 0.0);
            self.mmse.solve_in_place(&mut e);
            let mut w = ComplexVector::zeros(cols[0].len());
            for (coef, &j) in e.iter().zip(&self.members) {
                for (wi, hij) in w.iter_mut().zip(cols[j].iter()) {
                    *wi += hij * coef;
                }
            }
            self.filters[pos] = Some(w);
        }
        self.filters[pos].as_ref().expect("filled above")
    }
}

struct Engine<'a> {
    y: &'a [Complex64],
    cols: Vec<ComplexVector>,
    // HᴴH, used to assemble per-subset normal matrices
    gram: ComplexMatrix,
    c: &'a Constellation,
    lambda: f64,
    sigma2: f64,
    d_th: f64,
    s: usize,
    ordering: Ordering,
    subsets: MaskMap<Subset>,
    stats: DetectionStats,
    trace: Vec<LayerTrace>,
}

#[inline]
fn position_in(mask: u64, k: usize) -> usize {
    (mask & ((1u64 << k) - 1)).count_ones() as usize
}

fn members_of(mask: u64) -> Vec<usize> {
    (0..64).filter(|k| mask >> k & 1 == 1).collect()
}

impl<'a> Engine<'a> {
    fn new(
        y: &'a [Complex64],
        h: &'a ComplexMatrix,
        c: &'a Constellation,
        nm: NoiseModel,
        d_th: f64,
        s: usize,
        ordering: Ordering,
    ) -> Result<Self> {
        check_dims(y, h)?;
        if h.cols() > MAX_TX_ANTENNAS {
            return Err(DetectorError::InvalidConfig(format!(
                "at most {MAX_TX_ANTENNAS} transmit antennas supported"
            )));
        }
        let gram = matmul(&conj_transpose(h), h)?;
        Ok(Self {
            y,
            cols: h.columns(),
            gram,
            c,
            lambda: nm.sigma2() / c.es(),
            sigma2: nm.sigma2(),
            d_th,
            s,
            ordering,
            subsets: MaskMap::default(),
            stats: DetectionStats::default(),
            trace: Vec::new(),
        })
    }

    fn full_mask(&self) -> u64 {
        let nt = self.cols.len();
        if nt == 64 {
            u64::MAX
        } else {
            (1u64 << nt) - 1
        }
    }

    fn normal_matrix(&self, members: &[usize], alpha: f64) -> ComplexMatrix {
        ComplexMatrix::from_fn(members.len(), members.len(), |i, j| {
            let g = self.gram[(members[i], members[j])];
            if i == j {
                g + alpha
            } else {
                g
            }
        })
    }

    fn ensure_subset(&mut self, mask: u64) -> Result<()> {
        if !self.subsets.contains_key(&mask) {
            let members = members_of(mask);
            let mmse = Cholesky::factor(&self.normal_matrix(&members, self.lambda))?;
            let n = members.len();
            self.subsets.insert(
                mask,
                Subset {
                    members,
                    mmse,
                    filters: vec![None; n],
                    leverage: None,
                },
            );
        }
        Ok(())
    }

    /// `1 − h_kᴴR⁻¹h_k` for every member of `mask`, with `R` built from
    /// those members.
    ///
    /// Evaluated as `σ²·[(H_BᴴH_B + σ²I)⁻¹]_kk`, the same quantity without the
    /// cancellation of subtracting a number close to one.
    fn ensure_leverage(&mut self, mask: u64) -> Result<()> {
        self.ensure_subset(mask)?;
        if self.subsets[&mask].leverage.is_none() {
            let members = &self.subsets[&mask].members;
            let ch = Cholesky::factor(&self.normal_matrix(members, self.sigma2))?;
            let lev = (0..members.len())
                .map(|p| self.sigma2 * ch.inverse_diagonal(p))
                .collect();
            self.subsets.get_mut(&mask).expect("exists").leverage = Some(lev);
        }
        Ok(())
    }

    fn soft(&mut self, mask: u64, k: usize, y_cur: &[Complex64]) -> Result<Complex64> {
        self.ensure_subset(mask)?;
        let sub = self.subsets.get_mut(&mask).expect("built above");
        Ok(sub.filter(position_in(mask, k), &self.cols).dot(y_cur))
    }

    /// Next column to detect and its soft estimate.
    fn next_layer(&mut self, mask: u64, y_cur: &[Complex64]) -> Result<(usize, Complex64)> {
        match &self.ordering {
            Ordering::Natural => {
                let k = mask.trailing_zeros() as usize;
                Ok((k, self.soft(mask, k, y_cur)?))
            }
            Ordering::Fixed(order) => {
                let done = self.cols.len() - mask.count_ones() as usize;
                let k = order[done];
                Ok((k, self.soft(mask, k, y_cur)?))
            }
            &Ordering::Llr(reference) => {
                let ref_mask = match reference {
                    LlrReference::Remaining => mask,
                    LlrReference::Full => self.full_mask(),
                };
                self.ensure_leverage(ref_mask)?;
                self.ensure_subset(mask)?;
                let cols = &self.cols;
                let (sub, lev) = if ref_mask == mask {
                    let sub = self.subsets.get_mut(&mask).expect("built above");
                    let lev = sub.leverage.clone().expect("built above");
                    (sub, lev)
                } else {
                    let lev = self.subsets[&ref_mask]
                        .leverage
                        .clone()
                        .expect("built above");
                    (self.subsets.get_mut(&mask).expect("built above"), lev)
                };
                let mut best: Option<(f64, usize, Complex64)> = None;
                for pos in 0..sub.members.len() {
                    let k = sub.members[pos];
                    let z = sub.filter(pos, cols).dot(y_cur);
                    let llr = z.norm() / lev[position_in(ref_mask, k)];
                    if best.is_none_or(|(b, _, _)| llr > b) {
                        best = Some((llr, k, z));
                    }
                }
                let (_, k, z) = best.expect("mask is nonempty");
                Ok((k, z))
            }
        }
    }

    /// Detects every column in `mask`, writing decisions into `x` and
    /// cancelling them from `y_cur`. `levels` is how many nested rounds of
    /// candidate branching are still allowed.
    fn run_layers(
        &mut self,
        mut mask: u64,
        y_cur: &mut [Complex64],
        x: &mut [Complex64],
        levels: usize,
        depth: u64,
    ) -> Result<()> {
        while mask != 0 {
            let (k, z) = self.next_layer(mask, y_cur)?;
            let soft = sac_check(z, self.c, self.d_th);
            let (sym, candidates) = if levels == 0 || soft.reliable {
                (soft.nearest, None)
            } else {
                self.stats.sac_triggers += 1;
                self.branch(mask, y_cur, x, k, z, levels, depth + 1, depth == 0)?
            };
            if depth == 0 {
                self.trace.push(LayerTrace {
                    index: k,
                    soft,
                    candidates,
                    chosen: sym,
                });
            }
            x[k] = sym;
            sub_scaled(y_cur, sym, &self.cols[k]);
            mask &= !(1u64 << k);
        }
        Ok(())
    }

    /// Opens one branch per neighbor of `z`, completes each branch and returns
    /// the seed whose full candidate vector fits `y` best.
    #[allow(clippy::too_many_arguments)]
    fn branch(
        &mut self,
        mask: u64,
        y_cur: &[Complex64],
        x: &[Complex64],
        k: usize,
        z: Complex64,
        levels: usize,
        depth: u64,
        record: bool,
    ) -> Result<(Complex64, Option<CandidateSet>)> {
        self.stats.max_depth = self.stats.max_depth.max(depth);
        let seeds = neighbor_order(z, self.c, self.s)?;
        let rest = mask & !(1u64 << k);
        let mut best: Option<(f64, Complex64)> = None;
        let mut set = record.then(|| CandidateSet {
            seeds: seeds.clone(),
            candidates: Vec::with_capacity(seeds.len()),
            residuals: Vec::with_capacity(seeds.len()),
        });
        for &seed in &seeds {
            let mut xb = x.to_vec();
            let mut yb = y_cur.to_vec();
            xb[k] = seed;
            sub_scaled(&mut yb, seed, &self.cols[k]);
            self.run_layers(rest, &mut yb, &mut xb, levels - 1, depth)?;
            // every decision of xb has been cancelled from yb, so yb = y − H·xb
            let cost = norm_sq(&yb);
            self.stats.candidate_evaluations += 1;
            if best.is_none_or(|(b, _)| cost < b) {
                best = Some((cost, seed));
            }
            if let Some(set) = set.as_mut() {
                set.candidates.push(xb.into());
                set.residuals.push(cost);
            }
        }
        Ok((best.expect("at least one seed").1, set))
    }

    fn detect(mut self, levels: usize) -> Result<DetectionResult> {
        let mut y_cur = self.y.to_vec();
        let mut x = vec![Complex64::new(0.0, 0.0); self.cols.len()];
        let mask = self.full_mask();
        self.run_layers(mask, &mut y_cur, &mut x, levels, 0)?;
        Ok(DetectionResult {
            symbols: x.into(),
            stats: self.stats,
            trace: self.trace,
        })
    }
}

/// SIC in a caller-supplied order (a permutation of `0..Nt`).
pub fn sic_pass(
    y: &[Complex64],
    h: &ComplexMatrix,
    c: &Constellation,
    nm: NoiseModel,
    order: &[usize],
) -> Result<DetectionResult> {
    let mut seen = vec![false; h.cols()];
    let valid = order.len() == h.cols()
        && order
            .iter()
            .all(|&k| k < seen.len() && !std::mem::replace(&mut seen[k], true));
    if !valid {
        return Err(DetectorError::InvalidOrder(order.to_vec()));
    }
    check_noise(DetectorKind::Sic, nm)?;
    Engine::new(y, h, c, nm, 0.0, 1, Ordering::Fixed(order.to_vec()))?.detect(0)
}

/// SIC in natural order.
pub fn detect_sic(
    y: &[Complex64],
    h: &ComplexMatrix,
    c: &Constellation,
    nm: NoiseModel,
) -> Result<DetectionResult> {
    check_noise(DetectorKind::Sic, nm)?;
    Engine::new(y, h, c, nm, 0.0, 1, Ordering::Natural)?.detect(0)
}

fn feedback_detect(
    y: &[Complex64],
    h: &ComplexMatrix,
    c: &Constellation,
    nm: NoiseModel,
    cfg: &DetectorConfig,
    ordering: Ordering,
) -> Result<DetectionResult> {
    cfg.validate(c)?;
    check_noise(cfg.kind, nm)?;
    Engine::new(y, h, c, nm, cfg.d_th, cfg.s, ordering)?.detect(cfg.levels())
}

/// Multiple-feedback SIC: unreliable layers try `S` neighbors, each completed
/// by plain SIC, and keep the one with the smallest full residual.
pub fn detect_mf_sic(
    y: &[Complex64],
    h: &ComplexMatrix,
    c: &Constellation,
    nm: NoiseModel,
    cfg: &DetectorConfig,
) -> Result<DetectionResult> {
    let cfg = DetectorConfig {
        kind: DetectorKind::MfSic,
        ..*cfg
    };
    feedback_detect(y, h, c, nm, &cfg, Ordering::Natural)
}

/// Multiple-feedback SIC with the shadow-area test repeated inside candidate
/// branches, nested up to `cfg.l` levels.
pub fn detect_imf_sic(
    y: &[Complex64],
    h: &ComplexMatrix,
    c: &Constellation,
    nm: NoiseModel,
    cfg: &DetectorConfig,
) -> Result<DetectionResult> {
    let cfg = DetectorConfig {
        kind: DetectorKind::ImfSic,
        ..*cfg
    };
    feedback_detect(y, h, c, nm, &cfg, Ordering::Natural)
}

/// Recursive multiple-feedback SIC with the detection order recomputed by
/// LLR after every decision, in the outer loop and inside every branch.
pub fn detect_oimf_sic(
    y: &[Complex64],
    h: &ComplexMatrix,
    c: &Constellation,
    nm: NoiseModel,
    cfg: &DetectorConfig,
) -> Result<DetectionResult> {
    let cfg = DetectorConfig {
        kind: DetectorKind::OimfSic,
        ..*cfg
    };
    feedback_detect(y, h, c, nm, &cfg, Ordering::Llr(cfg.llr_reference))
}

/// Candidate search for one unreliable layer.
///
/// `h_partial` holds the still-undetected columns and `y_partial` the
/// received vector with every earlier decision cancelled; `layer` indexes the
/// column being decided. `depth` is the number of further nested branching
/// rounds allowed inside the candidate branches: 0 completes every branch
/// with plain quantization, as MF-SIC does. Branch completion follows the
/// ordering of `cfg.kind` (LLR for OIMF-SIC, natural otherwise).
#[allow(clippy::too_many_arguments)]
pub fn imf_subroutine(
    y_partial: &[Complex64],
    h_partial: &ComplexMatrix,
    c: &Constellation,
    nm: NoiseModel,
    layer: usize,
    z_soft: Complex64,
    cfg: &DetectorConfig,
    depth: usize,
) -> Result<(Complex64, DetectionStats)> {
    if layer >= h_partial.cols() {
        return Err(DetectorError::InvalidConfig(format!(
            "layer {layer} outside {} columns",
            h_partial.cols()
        )));
    }
    let mut check = *cfg;
    check.kind = DetectorKind::ImfSic;
    check.validate(c)?;
    check_noise(cfg.kind, nm)?;
    let ordering = match cfg.kind {
        DetectorKind::OimfSic => Ordering::Llr(cfg.llr_reference),
        _ => Ordering::Natural,
    };
    let mut engine = Engine::new(y_partial, h_partial, c, nm, cfg.d_th, cfg.s, ordering)?;
    let mask = engine.full_mask();
    let x = vec![Complex64::new(0.0, 0.0); h_partial.cols()];
    let (sym, _) = engine.branch(mask, y_partial, &x, layer, z_soft, depth + 1, 1, false)?;
    Ok((sym, engine.stats))
}

/// Runs the detector named by `cfg.kind`.
pub fn detect(
    y: &[Complex64],
    h: &ComplexMatrix,
    c: &Constellation,
    nm: NoiseModel,
    cfg: &DetectorConfig,
) -> Result<DetectionResult> {
    match cfg.kind {
        DetectorKind::Ml => detect_ml(y, h, c),
        DetectorKind::Zf => detect_zf(y, h, c, nm),
        DetectorKind::Mmse => detect_mmse(y, h, c, nm),
        DetectorKind::Sic => detect_sic(y, h, c, nm),
        DetectorKind::MfSic => detect_mf_sic(y, h, c, nm, cfg),
        DetectorKind::ImfSic => detect_imf_sic(y, h, c, nm, cfg),
        DetectorKind::OimfSic => detect_oimf_sic(y, h, c, nm, cfg),
    }
}
