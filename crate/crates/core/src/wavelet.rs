//! Periodized orthonormal DWT with the 8-tap Daubechies filter pair and the
//! mapping from dyadic sub-bands onto the five EEG rhythm bands.
//!
//! One analysis step computes
//!
//! ```text
//! approx[n] = Σ_k x̃[k]·g[2n−k]      detail[n] = Σ_k x̃[k]·h[2n−k]
//! ```
//!
//! where `x̃` is the periodic extension of `x`. Level 1 is the finest detail.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Daubechies wavelet with four vanishing moments (8 taps), low-pass `g`.
const DB4_LOW: [f64; 8] = [
    0.230_377_813_308_855_23,
    0.714_846_570_552_541_5,
    0.630_880_767_929_590_4,
    -0.027_983_769_416_983_85,
    -0.187_034_811_718_881_14,
    0.030_841_381_835_986_965,
    0.032_883_011_666_982_945,
    -0.010_597_401_784_997_278,
];

/// Tolerance the filter identities are checked against at construction.
pub const FILTER_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletFilterPair {
    low_pass: Vec<f64>,
    high_pass: Vec<f64>,
}

impl WaveletFilterPair {
    /// Builds the pair from its low-pass filter; the high-pass filter is the
    /// quadrature mirror `h[k] = (−1)^k·g[L−1−k]`.
    pub fn from_low_pass(low_pass: Vec<f64>) -> Result<Self> {
        let len = low_pass.len();
        if len < 2 || !len.is_multiple_of(2) {
            return Err(Error::Wavelet(format!(
                "filter length {len} must be even and ≥ 2"
            )));
        }
        let high_pass = (0..len)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * low_pass[len - 1 - k]
            })
            .collect();
        let pair = WaveletFilterPair {
            low_pass,
            high_pass,
        };
        pair.check(FILTER_TOLERANCE)?;
        Ok(pair)
    }

    pub fn low_pass(&self) -> &[f64] {
        &self.low_pass
    }

    pub fn high_pass(&self) -> &[f64] {
        &self.high_pass
    }

    pub fn len(&self) -> usize {
        self.low_pass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.low_pass.is_empty()
    }

    /// Verify the orthonormal QMF identities within `tol`.
    pub fn check(&self, tol: f64) -> Result<()> {
        let g = &self.low_pass;
        let h = &self.high_pass;
        let len = g.len();
        let fail = |what: &str, v: f64| Err(Error::Wavelet(format!("{what} violated: {v:e}")));

        let sum: f64 = g.iter().sum();
        if (sum - std::f64::consts::SQRT_2).abs() > tol {
            return fail("Σg = √2", sum - std::f64::consts::SQRT_2);
        }
        for (name, f) in [("Σg² = 1", g), ("Σh² = 1", h)] {
            let e: f64 = f.iter().map(|v| v * v).sum();
            if (e - 1.0).abs() > tol {
                return fail(name, e - 1.0);
            }
        }
        for k in 0..len {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            if (h[k] - sign * g[len - 1 - k]).abs() > tol {
                return fail("quadrature mirror", h[k] - sign * g[len - 1 - k]);
            }
        }
        for m in 1..len / 2 {
            let dot: f64 = (0..len - 2 * m).map(|k| g[k] * g[k + 2 * m]).sum();
            if dot.abs() > tol {
                return fail("even-shift orthogonality", dot);
            }
        }
        Ok(())
    }
}

pub fn db4_pair() -> WaveletFilterPair {
    WaveletFilterPair::from_low_pass(DB4_LOW.to_vec()).expect("db4 table satisfies QMF identities")
}

fn analysis_step(x: &[f64], pair: &WaveletFilterPair) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let half = n / 2;
    let mut approx = vec![0.0; half];
    let mut detail = vec![0.0; half];
    for i in 0..half {
        let (mut a, mut d) = (0.0, 0.0);
        for (m, (&g, &h)) in pair.low_pass.iter().zip(&pair.high_pass).enumerate() {
            // k = 2i − m taken mod n
            let k = (2 * i + n * m - m) % n;
            a += g * x[k];
            d += h * x[k];
        }
        approx[i] = a;
        detail[i] = d;
    }
    (approx, detail)
}

fn synthesis_step(approx: &[f64], detail: &[f64], pair: &WaveletFilterPair) -> Vec<f64> {
    let half = approx.len();
    let n = 2 * half;
    let mut x = vec![0.0; n];
    for i in 0..half {
        for (m, (&g, &h)) in pair.low_pass.iter().zip(&pair.high_pass).enumerate() {
            let k = (2 * i + n * m - m) % n;
            x[k] += g * approx[i] + h * detail[i];
        }
    }
    x
}

/// One analysis level over the periodic extension of `x`.
pub fn dwt_level(x: &[f64], pair: &WaveletFilterPair) -> Result<(Vec<f64>, Vec<f64>)> {
    if !x.len().is_multiple_of(2) || x.len() < pair.len() {
        return Err(Error::Wavelet(format!(
            "single-level input length {} must be even and ≥ {}",
            x.len(),
            pair.len()
        )));
    }
    Ok(analysis_step(x, pair))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletDecomposition {
    pub approximation: Vec<f64>,
    /// `details[j - 1]` holds D_j; D_1 is the finest.
    pub details: Vec<Vec<f64>>,
    pub original_length: usize,
    pub levels: usize,
    pub sample_rate_hz: f64,
}

impl WaveletDecomposition {
    /// Length of the (possibly padded) signal the coefficients describe.
    pub fn padded_length(&self) -> usize {
        self.approximation.len() << self.levels
    }

    pub fn subband(&self, sb: SubBand) -> Option<&[f64]> {
        match sb {
            SubBand::Approximation(l) if l == self.levels => Some(&self.approximation),
            SubBand::Detail(j) if (1..=self.levels).contains(&j) => Some(&self.details[j - 1]),
            _ => None,
        }
    }

    pub fn subbands(&self) -> Vec<SubBand> {
        (1..=self.levels)
            .map(SubBand::Detail)
            .chain(std::iter::once(SubBand::Approximation(self.levels)))
            .collect()
    }

    fn keep_only(&self, keep: &[SubBand]) -> WaveletDecomposition {
        let mut d = self.clone();
        if !keep.contains(&SubBand::Approximation(self.levels)) {
            d.approximation.iter_mut().for_each(|v| *v = 0.0);
        }
        for (j, det) in d.details.iter_mut().enumerate() {
            if !keep.contains(&SubBand::Detail(j + 1)) {
                det.iter_mut().for_each(|v| *v = 0.0);
            }
        }
        d
    }
}

pub fn dwt_multilevel(
    x: &[f64],
    sample_rate_hz: f64,
    levels: usize,
    pair: &WaveletFilterPair,
) -> Result<WaveletDecomposition> {
    if levels == 0 {
        return Err(Error::Wavelet("levels must be ≥ 1".into()));
    }
    let block = 1usize
        .checked_shl(levels as u32)
        .ok_or_else(|| Error::Wavelet(format!("{levels} levels is too deep")))?;
    if x.is_empty() || !x.len().is_multiple_of(block) {
        return Err(Error::Wavelet(format!(
            "length {} is not a positive multiple of 2^{levels} = {block}; pad first",
            x.len()
        )));
    }
    if levels == 1 && x.len() < pair.len() {
        // same minimum length as a single dwt_level call
        return Err(Error::Wavelet(format!(
            "single-level input length {} must be ≥ {}",
            x.len(),
            pair.len()
        )));
    }
    let mut details = Vec::with_capacity(levels);
    let mut approx = x.to_vec();
    for _ in 0..levels {
        let (a, d) = analysis_step(&approx, pair);
        details.push(d);
        approx = a;
    }
    Ok(WaveletDecomposition {
        approximation: approx,
        details,
        original_length: x.len(),
        levels,
        sample_rate_hz,
    })
}

/// Extend `x` at its end by mirror reflection (edge sample repeated) up to
/// the next multiple of `multiple`.
pub fn pad_symmetric(x: &[f64], multiple: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 || multiple == 0 {
        return x.to_vec();
    }
    let target = n.div_ceil(multiple) * multiple;
    let period = 2 * n;
    (0..target)
        .map(|i| {
            let r = i % period;
            if r < n {
                x[r]
            } else {
                x[period - 1 - r]
            }
        })
        .collect()
}

/// Pad to a multiple of `2^levels`, decompose, and remember the unpadded
/// length so reconstructions come back truncated.
pub fn decompose(
    x: &[f64],
    sample_rate_hz: f64,
    levels: usize,
    pair: &WaveletFilterPair,
) -> Result<WaveletDecomposition> {
    if levels == 0 || levels >= usize::BITS as usize {
        return Err(Error::Wavelet(format!("unsupported level count {levels}")));
    }
    let padded = pad_symmetric(x, 1 << levels);
    let mut d = dwt_multilevel(&padded, sample_rate_hz, levels, pair)?;
    d.original_length = x.len();
    Ok(d)
}

pub fn idwt(d: &WaveletDecomposition, pair: &WaveletFilterPair) -> Result<Vec<f64>> {
    if d.levels == 0 || d.details.len() != d.levels || d.approximation.is_empty() {
        return Err(Error::Wavelet(format!(
            "malformed decomposition: {} levels, {} detail bands, {} approximation coefficients",
            d.levels,
            d.details.len(),
            d.approximation.len()
        )));
    }
    let a_len = d.approximation.len();
    for (j, det) in d.details.iter().enumerate() {
        let want = a_len << (d.levels - 1 - j);
        if det.len() != want {
            return Err(Error::Wavelet(format!(
                "malformed decomposition: D{} has {} coefficients, expected {want}",
                j + 1,
                det.len()
            )));
        }
    }
    if d.original_length > d.padded_length() {
        return Err(Error::Wavelet(format!(
            "original length {} exceeds coefficient span {}",
            d.original_length,
            d.padded_length()
        )));
    }
    let mut x = d.approximation.clone();
    for det in d.details.iter().rev() {
        x = synthesis_step(&x, det, pair);
    }
    x.truncate(d.original_length);
    Ok(x)
}

// ---------------------------------------------------------------------------
// Rhythm bands

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandName {
    Delta,
    Theta,
    Alpha,
    Beta,
    Gamma,
}

impl BandName {
    pub const ALL: [BandName; 5] = [
        BandName::Delta,
        BandName::Theta,
        BandName::Alpha,
        BandName::Beta,
        BandName::Gamma,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BandName::Delta => "delta",
            BandName::Theta => "theta",
            BandName::Alpha => "alpha",
            BandName::Beta => "beta",
            BandName::Gamma => "gamma",
        }
    }

    /// Clinical edges in Hz; gamma has no upper edge.
    pub fn nominal_range(self) -> (f64, Option<f64>) {
        match self {
            BandName::Delta => (0.5, Some(4.0)),
            BandName::Theta => (4.0, Some(8.0)),
            BandName::Alpha => (8.0, Some(13.0)),
            BandName::Beta => (14.0, Some(30.0)),
            BandName::Gamma => (30.0, None),
        }
    }
}

impl fmt::Display for BandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BandName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        BandName::ALL
            .into_iter()
            .find(|b| b.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown band '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum SubBand {
    /// A_L, carried with its level.
    Approximation(usize),
    /// D_j.
    Detail(usize),
}

impl SubBand {
    /// Nominal dyadic pass band `(low, high)` in Hz.
    pub fn frequency_range(self, sample_rate_hz: f64) -> (f64, f64) {
        match self {
            SubBand::Approximation(l) => (0.0, sample_rate_hz / 2f64.powi(l as i32 + 1)),
            SubBand::Detail(j) => (
                sample_rate_hz / 2f64.powi(j as i32 + 1),
                sample_rate_hz / 2f64.powi(j as i32),
            ),
        }
    }
}

impl fmt::Display for SubBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubBand::Approximation(l) => write!(f, "A{l}"),
            SubBand::Detail(j) => write!(f, "D{j}"),
        }
    }
}

impl From<SubBand> for String {
    fn from(s: SubBand) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for SubBand {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("bad sub-band '{s}'"));
        let (kind, level) = s.split_at_checked(1).ok_or_else(bad)?;
        let level: usize = level.parse().map_err(|_| bad())?;
        match kind {
            "A" => Ok(SubBand::Approximation(level)),
            "D" => Ok(SubBand::Detail(level)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhythmBand {
    pub name: BandName,
    pub nominal_low_hz: f64,
    pub nominal_high_hz: Option<f64>,
    pub dyadic_low_hz: f64,
    pub dyadic_high_hz: f64,
    pub subbands: Vec<SubBand>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandMap {
    pub sample_rate_hz: f64,
    pub levels: usize,
    /// In delta, theta, alpha, beta, gamma order.
    pub bands: Vec<RhythmBand>,
    /// Sub-bands not assigned to any rhythm.
    pub discarded: Vec<SubBand>,
}

impl BandMap {
    pub fn get(&self, name: BandName) -> Option<&RhythmBand> {
        self.bands.iter().find(|b| b.name == name)
    }
}

/// Assign dyadic sub-bands to rhythms.
///
/// Delta through beta take the sub-band containing the midpoint of their
/// clinical range; gamma takes the sub-band directly above beta's. Anything
/// finer than gamma is discarded.
pub fn band_map(sample_rate_hz: f64, levels: usize) -> Result<BandMap> {
    let unsupported = |why: String| {
        Err(Error::Wavelet(format!(
            "cannot map five rhythm bands at {sample_rate_hz} Hz with {levels} levels: {why}"
        )))
    };
    if !(sample_rate_hz > 0.0) || levels == 0 || levels > 30 {
        return unsupported("invalid configuration".into());
    }
    // lowest frequency first: A_L, D_L, ..., D_1
    let ordered: Vec<SubBand> = std::iter::once(SubBand::Approximation(levels))
        .chain((1..=levels).rev().map(SubBand::Detail))
        .collect();

    let mut chosen: Vec<(BandName, usize)> = Vec::with_capacity(5);
    for name in &BandName::ALL[..4] {
        let (lo, hi) = name.nominal_range();
        let mid = 0.5 * (lo + hi.unwrap_or(lo));
        let pos = ordered.iter().position(|sb| {
            let (a, b) = sb.frequency_range(sample_rate_hz);
            a <= mid && mid < b
        });
        match pos {
            Some(p) => chosen.push((*name, p)),
            None => return unsupported(format!("{name} lies above Nyquist")),
        }
    }
    let beta_pos = chosen[3].1;
    if beta_pos + 1 >= ordered.len() {
        return unsupported("no sub-band above beta for gamma".into());
    }
    chosen.push((BandName::Gamma, beta_pos + 1));

    for w in chosen.windows(2) {
        if w[0].1 == w[1].1 {
            return unsupported(format!(
                "{} and {} share {}",
                w[0].0, w[1].0, ordered[w[0].1]
            ));
        }
    }

    let bands = chosen
        .iter()
        .map(|&(name, p)| {
            let sb = ordered[p];
            let (dlo, dhi) = sb.frequency_range(sample_rate_hz);
            let (nlo, nhi) = name.nominal_range();
            RhythmBand {
                name,
                nominal_low_hz: nlo,
                nominal_high_hz: nhi,
                dyadic_low_hz: dlo,
                dyadic_high_hz: dhi,
                subbands: vec![sb],
            }
        })
        .collect();
    let discarded = ordered
        .iter()
        .enumerate()
        .filter(|(p, _)| !chosen.iter().any(|&(_, c)| c == *p))
        .map(|(_, &sb)| sb)
        .collect();
    Ok(BandMap {
        sample_rate_hz,
        levels,
        bands,
        discarded,
    })
}

pub fn reconstruct_subbands(
    d: &WaveletDecomposition,
    keep: &[SubBand],
    pair: &WaveletFilterPair,
) -> Result<Vec<f64>> {
    if let Some(sb) = keep.iter().find(|sb| d.subband(**sb).is_none()) {
        return Err(Error::BandNotMapped(sb.to_string()));
    }
    idwt(&d.keep_only(keep), pair)
}

pub fn reconstruct_band(
    d: &WaveletDecomposition,
    band: &RhythmBand,
    pair: &WaveletFilterPair,
) -> Result<Vec<f64>> {
    if band.subbands.is_empty() || band.subbands.iter().any(|sb| d.subband(*sb).is_none()) {
        return Err(Error::BandNotMapped(band.name.to_string()));
    }
    reconstruct_subbands(d, &band.subbands, pair)
}
