//! Array layouts, field-region boundaries and the difference coarray.
//!
//! Sensor positions are kept as signed integer multiples of the unit spacing
//! `d`, so coarray lags are exact integers and set operations never depend on
//! floating-point equality.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Wavelength in meters for a carrier frequency in GHz.
pub fn wavelength_from_ghz(freq_ghz: f64) -> f64 {
    SPEED_OF_LIGHT / (freq_ghz * 1e9)
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Parameters of a symmetric coprime array.
///
/// `m < n` always holds after construction; reversed inputs are swapped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoprimeParams {
    pub m: usize,
    pub n: usize,
    /// Unit spacing in meters.
    pub d: f64,
    /// Carrier wavelength in meters.
    pub lambda: f64,
}

impl CoprimeParams {
    pub fn new(m: usize, n: usize, d: f64, lambda: f64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidParameter("M and N must be positive".into()));
        }
        if !(d > 0.0 && d.is_finite()) || !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "d={d} and lambda={lambda} must be positive and finite"
            )));
        }
        if gcd(m, n) != 1 || m == n {
            return Err(Error::NotCoprime { m, n });
        }
        let (m, n) = if m < n { (m, n) } else { (n, m) };
        let params = CoprimeParams { m, n, d, lambda };
        if let Some(quarter) = params.spacing_excess() {
            log::warn!(
                "unit spacing d={d} m exceeds lambda/4={quarter} m; angle estimates may alias"
            );
        }
        Ok(params)
    }

    /// Coprime pair with `d = lambda / 4`.
    pub fn quarter_wavelength(m: usize, n: usize, lambda: f64) -> Result<Self> {
        Self::new(m, n, lambda / 4.0, lambda)
    }

    /// Returns `lambda / 4` when `d` exceeds it.
    pub fn spacing_excess(&self) -> Option<f64> {
        let quarter = self.lambda / 4.0;
        (self.d > quarter * (1.0 + 1e-12)).then_some(quarter)
    }

    /// Hard variant of the spacing check.
    pub fn require_unambiguous(&self) -> Result<()> {
        match self.spacing_excess() {
            Some(quarter) => Err(Error::AmbiguousSpacing { d: self.d, quarter }),
            None => Ok(()),
        }
    }

    /// Sensor count of the basic (one-sided) coprime array, `M + N - 1`.
    pub fn basic_count(&self) -> usize {
        self.m + self.n - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayoutKind {
    Coprime,
    Dense,
    SparseSubarray,
}

/// Ordered sensor positions of a linear array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorLayout {
    indices: Vec<i64>,
    d: f64,
    lambda: f64,
    kind: LayoutKind,
    coprime: Option<(usize, usize)>,
}

impl SensorLayout {
    fn from_indices(
        mut indices: Vec<i64>,
        d: f64,
        lambda: f64,
        kind: LayoutKind,
        coprime: Option<(usize, usize)>,
    ) -> Self {
        indices.sort_unstable();
        indices.dedup();
        SensorLayout { indices, d, lambda, kind, coprime }
    }

    /// Builds a layout from metric positions, snapping each to the `d` grid.
    pub fn from_positions(positions: &[f64], d: f64, lambda: f64) -> Result<Self> {
        let mut indices = Vec::with_capacity(positions.len());
        for &p in positions {
            let k = (p / d).round();
            if (p - k * d).abs() > 1e-9 * d {
                return Err(Error::OffGrid { position: p, d });
            }
            indices.push(k as i64);
        }
        let before = indices.len();
        let layout = Self::from_indices(indices, d, lambda, LayoutKind::SparseSubarray, None);
        if layout.indices.len() != before {
            return Err(Error::InvalidParameter("duplicate sensor positions".into()));
        }
        Ok(layout)
    }

    /// Positions in units of `d`, ascending.
    pub fn indices(&self) -> &[i64] {
        &self.indices
    }

    /// Positions in meters, ascending (the sensor location vector).
    pub fn positions(&self) -> Vec<f64> {
        self.indices.iter().map(|&k| k as f64 * self.d).collect()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn kind(&self) -> LayoutKind {
        self.kind
    }

    /// `(M, N)` for coprime layouts.
    pub fn coprime_pair(&self) -> Option<(usize, usize)> {
        self.coprime
    }

    /// Basic-array sensor count `V = M + N - 1` for coprime layouts.
    pub fn basic_count(&self) -> Option<usize> {
        self.coprime.map(|(m, n)| m + n - 1)
    }

    /// Aperture `D` in meters, the span between the outermost sensors.
    pub fn aperture(&self) -> f64 {
        match (self.indices.first(), self.indices.last()) {
            (Some(a), Some(b)) => (b - a) as f64 * self.d,
            _ => 0.0,
        }
    }

    /// Fresnel distance `1.2 D`.
    pub fn fresnel_distance(&self) -> f64 {
        1.2 * self.aperture()
    }

    /// Rayleigh distance `2 D^2 / lambda`.
    pub fn rayleigh_distance(&self) -> f64 {
        let d = self.aperture();
        2.0 * d * d / self.lambda
    }

    /// True when `positions[i] == -positions[U-1-i]` for every sensor.
    pub fn is_symmetric(&self) -> bool {
        let u = self.indices.len();
        (0..u).all(|i| self.indices[i] == -self.indices[u - 1 - i])
    }

    /// Zero-based index of the sensor mirrored through the origin.
    pub fn mirror(&self, i: usize) -> usize {
        self.indices.len() - 1 - i
    }

    pub fn contains_index(&self, k: i64) -> bool {
        self.indices.binary_search(&k).is_ok()
    }
}

/// Symmetric coprime array: the union of `{M n d}` for `|n| < N` and
/// `{N m d}` for `|m| < M`.
pub fn build_coprime_layout(params: &CoprimeParams) -> SensorLayout {
    let (m, n) = (params.m as i64, params.n as i64);
    let first = (-n + 1..n).map(|k| m * k);
    let second = (-m + 1..m).map(|k| n * k);
    SensorLayout::from_indices(
        first.chain(second).collect(),
        params.d,
        params.lambda,
        LayoutKind::Coprime,
        Some((params.m, params.n)),
    )
}

/// Uniform symmetric array of `u` sensors at spacing `d`.
pub fn build_dense_layout(u: usize, d: f64, lambda: f64) -> Result<SensorLayout> {
    if u == 0 || u.is_multiple_of(2) {
        return Err(Error::EvenSensorCount(u));
    }
    if !(d > 0.0) || !(lambda > 0.0) {
        return Err(Error::InvalidParameter("d and lambda must be positive".into()));
    }
    let h = (u as i64 - 1) / 2;
    Ok(SensorLayout::from_indices(
        (-h..=h).collect(),
        d,
        lambda,
        LayoutKind::Dense,
        None,
    ))
}

/// The two sparse uniform subarrays of a symmetric coprime array:
/// `2M - 1` sensors at spacing `N d` and `2N - 1` sensors at spacing `M d`.
pub fn build_subarrays(params: &CoprimeParams) -> (SensorLayout, SensorLayout) {
    let (m, n) = (params.m as i64, params.n as i64);
    let sub1 = (-m + 1..m).map(|k| n * k).collect();
    let sub2 = (-n + 1..n).map(|k| m * k).collect();
    (
        SensorLayout::from_indices(sub1, params.d, params.lambda, LayoutKind::SparseSubarray, None),
        SensorLayout::from_indices(sub2, params.d, params.lambda, LayoutKind::SparseSubarray, None),
    )
}

/// How much of the consecutive coarray run is used for smoothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentPolicy {
    /// Central `2MN + 1` lags for coprime layouts, the full run otherwise.
    #[default]
    Nominal,
    /// The whole zero-centred consecutive run.
    FullRun,
}

/// Difference coarray of a layout, in units of the layout's `d` (or of the
/// layout's common grid step for sparse subarrays, see [`CoarrayLayout::step`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarrayLayout {
    /// Sorted unique differences `s_m - s_n` in units of `d`.
    pub lags: Vec<i64>,
    /// Number of ordered sensor pairs producing each lag.
    pub multiplicity: Vec<usize>,
    /// Grid step of the consecutive run in units of `d` (1 for coprime and
    /// dense layouts, the subarray spacing for sparse uniform layouts).
    pub step: i64,
    /// Half-width of the maximal zero-centred consecutive run, in steps.
    pub run_half_width: usize,
    /// Half-width of the segment used for smoothing, in steps.
    pub segment_half_width: usize,
}

impl CoarrayLayout {
    /// Length of the consecutive run, `2 h + 1`.
    pub fn run_length(&self) -> usize {
        2 * self.run_half_width + 1
    }

    /// Length of the smoothing segment.
    pub fn segment_length(&self) -> usize {
        2 * self.segment_half_width + 1
    }

    /// Segment lags in units of `d`, ascending.
    pub fn segment_lags(&self) -> Vec<i64> {
        let h = self.segment_half_width as i64;
        (-h..=h).map(|k| k * self.step).collect()
    }

    pub fn multiplicity_of(&self, lag: i64) -> usize {
        self.lags
            .binary_search(&lag)
            .map(|i| self.multiplicity[i])
            .unwrap_or(0)
    }
}

/// Computes the difference set of `layout` and its zero-centred consecutive run.
pub fn difference_coarray(layout: &SensorLayout, policy: SegmentPolicy) -> CoarrayLayout {
    let idx = layout.indices();
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for &a in idx {
        for &b in idx {
            *counts.entry(a - b).or_default() += 1;
        }
    }
    let step = idx
        .iter()
        .filter(|&&k| k != 0)
        .fold(0u64, |g, &k| gcd_u64(g, k.unsigned_abs()))
        .max(1) as i64;
    let set: BTreeSet<i64> = counts.keys().copied().collect();
    let mut h = 0usize;
    while set.contains(&((h as i64 + 1) * step)) && set.contains(&(-(h as i64 + 1) * step)) {
        h += 1;
    }
    let segment = match (policy, layout.coprime_pair()) {
        (SegmentPolicy::Nominal, Some((m, n))) => (m * n).min(h),
        _ => h,
    };
    let (lags, multiplicity) = counts.into_iter().unzip();
    CoarrayLayout {
        lags,
        multiplicity,
        step,
        run_half_width: h,
        segment_half_width: segment,
    }
}

fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Target capacities `(K_v, K_p)`: the decoupled virtual-array method resolves
/// up to the largest `K` with `K + K(K-1)/2 <= MN + 1`, the subarray method up
/// to `min(M, N)`.
pub fn max_targets(m: usize, n: usize) -> (usize, usize) {
    let budget = m * n + 1;
    let mut kv = ((2.0 * (m * n) as f64 + 2.25).sqrt() - 0.5).floor() as usize;
    // float guard
    while kv * (kv + 1) / 2 > budget {
        kv -= 1;
    }
    while (kv + 1) * (kv + 2) / 2 <= budget {
        kv += 1;
    }
    (kv, m.min(n))
}
