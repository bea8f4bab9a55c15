//! Two-phase MUSIC: angle search on the smoothed virtual covariance, then a
//! per-angle range search on the initial covariance that separates true
//! targets from cross angles.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{fresnel_phases, SnapshotSet, SteeringModel, Target};
use crate::covariance::{CovarianceBundle, EstimatorKind, LagReduction};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{difference_coarray, SegmentPolicy, SensorLayout};

/// Eigenpairs of a Hermitian matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Column `i` pairs with `values[i]`.
    pub vectors: DMatrix<Complex64>,
}

/// Eigendecomposition of `(A + A^H) / 2`.
pub fn eig_hermitian(a: &DMatrix<Complex64>) -> Result<Eigen> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("{}x{} is not square", a.nrows(), a.ncols())));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let h = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(a.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Eigen { values, vectors })
}

/// Rule for splitting eigenpairs into signal and noise subspaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubspaceRule {
    /// Exactly this many signal dimensions.
    Fixed(usize),
    /// Signal dimension at the largest ratio `lambda_k / lambda_{k+1}` for
    /// `k` in `min_signal..=max_signal`; falls back to `fallback` when no
    /// ratio reaches `min_ratio`.
    EigGap {
        min_signal: usize,
        max_signal: usize,
        min_ratio: f64,
        fallback: usize,
    },
}

#[derive(Debug, Clone)]
pub struct NoiseSubspace {
    /// Orthonormal columns spanning the noise subspace.
    pub basis: DMatrix<Complex64>,
    pub signal_dim: usize,
}

impl NoiseSubspace {
    /// `a^H U_n U_n^H a`.
    pub fn projection(&self, a: &DVector<Complex64>) -> f64 {
        self.basis.ad_mul(a).norm_squared()
    }
}

/// Signal dimension selected by `rule` for the given eigenvalues.
pub fn signal_dimension(values: &[f64], rule: &SubspaceRule) -> Result<usize> {
    let n = values.len();
    match *rule {
        SubspaceRule::Fixed(k) => {
            if k >= n {
                return Err(Error::InvalidParameter(format!(
                    "signal dimension {k} leaves no noise subspace in size {n}"
                )));
            }
            Ok(k)
        }
        SubspaceRule::EigGap { min_signal, max_signal, min_ratio, fallback } => {
            let top = values.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
            let floor = top * 1e-15;
            let lo = min_signal.max(1);
            let hi = max_signal.min(n.saturating_sub(1));
            let mut best: Option<(usize, f64)> = None;
            for k in lo..=hi {
                let ratio = values[k - 1].max(floor) / values[k].max(floor);
                if best.is_none_or(|(_, r)| ratio > r) {
                    best = Some((k, ratio));
                }
            }
            match best {
                Some((k, r)) if r >= min_ratio => Ok(k),
                _ => signal_dimension(values, &SubspaceRule::Fixed(fallback.min(n - 1))),
            }
        }
    }
}

pub fn noise_subspace(eig: &Eigen, rule: &SubspaceRule) -> Result<NoiseSubspace> {
    let k = signal_dimension(&eig.values, rule)?;
    let n = eig.values.len();
    Ok(NoiseSubspace { basis: eig.vectors.columns(k, n - k).into_owned(), signal_dim: k })
}

/// Search grids. Angles in degrees, ranges in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumGrid {
    pub angles_deg: Vec<f64>,
    pub ranges_m: Vec<f64>,
}

impl SpectrumGrid {
    /// Angles `-90 + step .. 90 - step`, ranges `lo..=hi` at `range_step`.
    pub fn uniform(angle_step_deg: f64, range_lo: f64, range_hi: f64, range_step: f64) -> Result<Self> {
        if !(angle_step_deg > 0.0) || !(range_step > 0.0) || !(range_hi > range_lo) || !(range_lo > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bad grid: angle step {angle_step_deg}, ranges [{range_lo}, {range_hi}] step {range_step}"
            )));
        }
        let na = (180.0 / angle_step_deg).round() as usize;
        let angles_deg: Vec<f64> = (1..na).map(|i| -90.0 + i as f64 * angle_step_deg).collect();
        let nr = ((range_hi - range_lo) / range_step + 1e-9).floor() as usize;
        let ranges_m: Vec<f64> = (0..=nr).map(|i| range_lo + i as f64 * range_step).collect();
        let grid = SpectrumGrid { angles_deg, ranges_m };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        let increasing = |v: &[f64]| !v.is_empty() && v.windows(2).all(|w| w[1] > w[0]);
        if !increasing(&self.angles_deg) || !increasing(&self.ranges_m) {
            return Err(Error::InvalidParameter("grids must be non-empty and increasing".into()));
        }
        if self.angles_deg[0] <= -90.0 || *self.angles_deg.last().unwrap() >= 90.0 {
            return Err(Error::InvalidParameter("angle grid must lie inside (-90, 90)".into()));
        }
        Ok(())
    }
}

/// MUSIC pseudospectrum sampled on an axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoSpectrum {
    pub axis: Vec<f64>,
    pub values: Vec<f64>,
}

impl PseudoSpectrum {
    /// Values in dB relative to the maximum.
    pub fn to_db(&self) -> Vec<f64> {
        let max = self.values.iter().copied().fold(f64::MIN_POSITIVE, f64::max);
        self.values.iter().map(|v| 10.0 * (v / max).log10()).collect()
    }

    pub fn median(&self) -> f64 {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n == 0 {
            0.0
        } else if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }

    /// Index of the global maximum (first on ties).
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, v) in self.values.iter().enumerate() {
            if best.is_none_or(|b| *v > self.values[b]) {
                best = Some(i);
            }
        }
        best
    }
}

fn music_value(noise: &NoiseSubspace, a: &DVector<Complex64>) -> f64 {
    let den = noise.projection(a);
    1.0 / den.max(1e-30 * a.norm_squared())
}

/// Evaluates `1 / (a^H U_n U_n^H a)` for `steer(x)` over `axis`.
pub fn music_spectrum<F>(noise: &NoiseSubspace, axis: &[f64], exec: Execution, steer: F) -> PseudoSpectrum
where
    F: Fn(f64) -> DVector<Complex64> + Sync + Send,
{
    let values = exec.map(axis, |&x| music_value(noise, &steer(x)));
    PseudoSpectrum { axis: axis.to_vec(), values }
}

/// Uniform virtual-array steering vector: element `n` is
/// `exp(-j k factor n spacing sin(theta))`.
///
/// `factor = 2` for the decoupled (self-spectrum) coarray, `1` for classic
/// far-field coarray processing.
pub fn virtual_steering(theta: f64, len: usize, spacing: f64, lambda: f64, factor: f64) -> DVector<Complex64> {
    let phase = -2.0 * PI / lambda * factor * spacing * theta.sin();
    DVector::from_iterator(len, (0..len).map(|n| Complex64::from_polar(1.0, phase * n as f64)))
}

/// Phase-1 spectrum over `angles_deg` for a smoothed virtual covariance whose
/// adjacent virtual sensors are `spacing` meters apart.
#[allow(clippy::too_many_arguments)]
pub fn angle_spectrum(
    r_v: &DMatrix<Complex64>,
    angles_deg: &[f64],
    spacing: f64,
    lambda: f64,
    factor: f64,
    rule: &SubspaceRule,
    exec: Execution,
) -> Result<(PseudoSpectrum, Eigen, usize)> {
    let eig = eig_hermitian(r_v)?;
    let noise = noise_subspace(&eig, rule)?;
    let len = r_v.nrows();
    let spec = music_spectrum(&noise, angles_deg, exec, |deg| {
        virtual_steering(deg.to_radians(), len, spacing, lambda, factor)
    });
    let k = noise.signal_dim;
    Ok((spec, eig, k))
}

/// Near-field steering for the range search.
pub fn nearfield_steering(positions: &[f64], lambda: f64, target: &Target, model: SteeringModel) -> DVector<Complex64> {
    match model {
        SteeringModel::Fresnel => DVector::from_iterator(
            positions.len(),
            positions.iter().map(|&s| {
                let (p, q) = fresnel_phases(s, lambda, target);
                Complex64::from_polar(1.0, p + q)
            }),
        ),
        SteeringModel::Exact => crate::channel::steering_exact_at(positions, lambda, target),
    }
}

/// Phase-2 spectrum over `ranges` at a fixed angle.
pub fn range_spectrum(
    noise: &NoiseSubspace,
    layout: &SensorLayout,
    theta_deg: f64,
    ranges: &[f64],
    model: SteeringModel,
    exec: Execution,
) -> PseudoSpectrum {
    let positions = layout.positions();
    let theta = theta_deg.to_radians();
    music_spectrum(noise, ranges, exec, |r| {
        nearfield_steering(&positions, layout.lambda(), &Target::new(theta, r), model)
    })
}

/// A local maximum of a pseudospectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub index: usize,
    /// Axis value after parabolic refinement.
    pub position: f64,
    /// Spectrum value at the grid maximum.
    pub value: f64,
    /// Topographic prominence in dB.
    pub prominence_db: f64,
}

/// Interior local maxima with prominence at least `min_prominence_db`,
/// highest first (ties by ascending axis), truncated to `max_count`.
///
/// Each position is refined by a 3-point parabola fitted to the dB values.
pub fn detect_peaks(spec: &PseudoSpectrum, max_count: usize, min_prominence_db: f64) -> Vec<Peak> {
    let n = spec.values.len();
    if n < 3 || max_count == 0 {
        return Vec::new();
    }
    let db: Vec<f64> = spec.values.iter().map(|v| 10.0 * v.max(1e-300).log10()).collect();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i < n - 1 {
        if db[i] > db[i - 1] {
            // walk across a plateau
            let mut j = i;
            while j + 1 < n && db[j + 1] == db[i] {
                j += 1;
            }
            if j + 1 < n && db[j + 1] < db[i] {
                let centre = (i + j) / 2;
                let prominence = prominence_db(&db, centre);
                if prominence >= min_prominence_db {
                    peaks.push(Peak {
                        index: centre,
                        position: refine(&spec.axis, &db, centre),
                        value: spec.values[centre],
                        prominence_db: prominence,
                    });
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.position.total_cmp(&b.position)));
    peaks.truncate(max_count);
    peaks
}

fn prominence_db(db: &[f64], i: usize) -> f64 {
    let h = db[i];
    let mut left_min = h;
    for k in (0..i).rev() {
        if db[k] > h {
            break;
        }
        left_min = left_min.min(db[k]);
    }
    let mut right_min = h;
    for &v in &db[i + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

fn refine(axis: &[f64], db: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= db.len() {
        return axis[i];
    }
    let (a, b, c) = (db[i - 1], db[i], db[i + 1]);
    let den = a - 2.0 * b + c;
    if den >= 0.0 || !den.is_finite() {
        return axis[i];
    }
    let delta = (0.5 * (a - c) / den).clamp(-0.5, 0.5);
    if delta >= 0.0 {
        axis[i] + delta * (axis[i + 1] - axis[i])
    } else {
        axis[i] + delta * (axis[i] - axis[i - 1])
    }
}

/// Level a range peak is compared against when deciding true vs cross.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignificanceReference {
    /// Spectrum value of a steering vector spread evenly over all
    /// eigendirections, `size / (|b|^2 * noise_dim)`. Cross angles sit at
    /// about 0 dB on this scale.
    #[default]
    NoiseFloor,
    /// Median of the range spectrum over the search grid.
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    True,
    Cross,
}

/// Outcome of the range search at one candidate angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classified {
    pub theta_deg: f64,
    /// Range estimate; for cross angles the location of the spectrum maximum.
    pub r_m: f64,
    pub label: Label,
    /// Range-spectrum value at the estimate.
    pub peak_value: f64,
    /// Peak height over the significance reference, dB.
    pub significance_db: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalizationResult {
    /// Phase-1 candidate angles in degrees, strongest first.
    pub candidate_angles: Vec<f64>,
    pub classified: Vec<Classified>,
    #[serde(skip)]
    pub angle_spectrum: Option<PseudoSpectrum>,
    /// One range spectrum per candidate angle, same order.
    #[serde(skip)]
    pub range_spectra: Vec<PseudoSpectrum>,
    pub phase1_eigenvalues: Vec<f64>,
    pub phase1_signal_dim: usize,
    pub phase2_eigenvalues: Vec<f64>,
    pub phase2_signal_dim: usize,
}

impl LocalizationResult {
    #[cfg(test)]
    fn empty() -> Self {
        LocalizationResult {
            candidate_angles: Vec::new(),
            classified: Vec::new(),
            angle_spectrum: None,
            range_spectra: Vec::new(),
            phase1_eigenvalues: Vec::new(),
            phase1_signal_dim: 0,
            phase2_eigenvalues: Vec::new(),
            phase2_signal_dim: 0,
        }
    }

    /// True-labelled targets as `(theta_deg, r_m)`.
    pub fn targets(&self) -> Vec<(f64, f64)> {
        self.classified
            .iter()
            .filter(|c| c.label == Label::True)
            .map(|c| (c.theta_deg, c.r_m))
            .collect()
    }

    /// Exactly `k` estimates when enough candidates exist: the true-labelled
    /// targets, topped up with the strongest cross-labelled ones.
    pub fn top_estimates(&self, k: usize) -> Vec<(f64, f64)> {
        let mut out = self.targets();
        out.truncate(k);
        let mut rest: Vec<&Classified> =
            self.classified.iter().filter(|c| c.label == Label::Cross).collect();
        rest.sort_by(|a, b| b.significance_db.total_cmp(&a.significance_db));
        out.extend(rest.into_iter().take(k.saturating_sub(out.len())).map(|c| (c.theta_deg, c.r_m)));
        out
    }

    pub fn cross_angles(&self) -> Vec<f64> {
        self.classified
            .iter()
            .filter(|c| c.label == Label::Cross)
            .map(|c| c.theta_deg)
            .collect()
    }
}

/// Tunables of the two-phase localizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalizerConfig {
    /// Declared target count; `None` lets the eigen-gap rules decide.
    pub num_targets: Option<usize>,
    pub angle_step_deg: f64,
    pub range_step_m: f64,
    /// Range search bounds; defaults to the layout's `[Z_F, Z_R]`.
    pub range_bounds: Option<(f64, f64)>,
    /// Phase-1 candidate cap; defaults to `K(K+1)/2` or half the virtual size.
    pub max_candidates: Option<usize>,
    /// Minimum prominence of Phase-1 angle peaks.
    pub prominence_db: f64,
    /// Minimum prominence of Phase-2 range peaks. Range peaks are broad and
    /// often sit close to the grid edge, so this is kept small and the
    /// significance test does the real work.
    pub range_prominence_db: f64,
    /// Minimum range-peak height over the significance reference, dB.
    pub significance_db: f64,
    pub significance_reference: SignificanceReference,
    pub phase1_rule: Option<SubspaceRule>,
    pub phase2_rule: Option<SubspaceRule>,
    pub estimator: EstimatorKind,
    pub reduction: LagReduction,
    pub segment: SegmentPolicy,
    pub range_model: SteeringModel,
    /// True detections closer than this in angle (and 10 % in range) to a
    /// stronger one are dropped.
    pub merge_theta_deg: f64,
    pub execution: Execution,
}

impl Default for LocalizerConfig {
    fn default() -> Self {
        LocalizerConfig {
            num_targets: None,
            angle_step_deg: 0.05,
            range_step_m: 0.1,
            range_bounds: None,
            max_candidates: None,
            prominence_db: 3.0,
            range_prominence_db: 0.0,
            significance_db: 10.0,
            significance_reference: SignificanceReference::NoiseFloor,
            phase1_rule: None,
            phase2_rule: None,
            estimator: EstimatorKind::LsBlock,
            reduction: LagReduction::Average,
            segment: SegmentPolicy::Nominal,
            range_model: SteeringModel::Fresnel,
            merge_theta_deg: 0.5,
            execution: Execution::Parallel,
        }
    }
}

impl LocalizerConfig {
    pub fn with_targets(k: usize) -> Self {
        LocalizerConfig { num_targets: Some(k), ..Default::default() }
    }

    pub fn grid_for(&self, layout: &SensorLayout) -> Result<SpectrumGrid> {
        let (lo, hi) = self
            .range_bounds
            .unwrap_or((layout.fresnel_distance(), layout.rayleigh_distance()));
        SpectrumGrid::uniform(self.angle_step_deg, lo, hi, self.range_step_m)
    }

    /// Phase-1 rule for a virtual covariance of size `size`.
    pub fn phase1_rule_for(&self, size: usize) -> SubspaceRule {
        if let Some(rule) = self.phase1_rule {
            return rule;
        }
        match self.num_targets {
            Some(k) => {
                let components = k * (k + 1) / 2;
                SubspaceRule::EigGap {
                    min_signal: k.min(size - 1),
                    max_signal: (2 * components).min(size - 1),
                    min_ratio: 10.0,
                    fallback: components.min(size - 1),
                }
            }
            None => SubspaceRule::EigGap {
                min_signal: 1,
                max_signal: size / 2,
                min_ratio: 10.0,
                fallback: (size / 4).max(1),
            },
        }
    }

    pub fn phase2_rule_for(&self, size: usize) -> SubspaceRule {
        if let Some(rule) = self.phase2_rule {
            return rule;
        }
        match self.num_targets {
            Some(k) => SubspaceRule::Fixed(k.min(size - 1)),
            None => SubspaceRule::EigGap {
                min_signal: 1,
                max_signal: size - 1,
                min_ratio: 10.0,
                fallback: 1,
            },
        }
    }

    pub fn max_candidates_for(&self, size: usize) -> usize {
        self.max_candidates.unwrap_or(match self.num_targets {
            Some(k) => k * (k + 1) / 2,
            None => size / 2,
        })
    }
}

/// Source of Phase-2 range spectra for a candidate angle.
pub trait RangeSearch: Sync {
    fn spectrum(&self, theta_deg: f64, ranges: &[f64], exec: Execution) -> PseudoSpectrum;

    /// Spectrum level of a steering vector with no preference for the
    /// signal subspace.
    fn noise_floor(&self) -> f64;
}

/// Range MUSIC on one array's noise subspace.
pub struct SubspaceRangeSearch<'a> {
    pub noise: &'a NoiseSubspace,
    pub layout: &'a SensorLayout,
    pub model: SteeringModel,
}

impl RangeSearch for SubspaceRangeSearch<'_> {
    fn spectrum(&self, theta_deg: f64, ranges: &[f64], exec: Execution) -> PseudoSpectrum {
        range_spectrum(self.noise, self.layout, theta_deg, ranges, self.model, exec)
    }

    fn noise_floor(&self) -> f64 {
        let size = self.noise.basis.nrows() as f64;
        size / (self.layout.len() as f64 * self.noise.basis.ncols() as f64)
    }
}

/// Phase 2 on the initial covariance of a single array.
pub fn classify_and_estimate(
    candidates: &[f64],
    r_hat: &DMatrix<Complex64>,
    layout: &SensorLayout,
    grid: &SpectrumGrid,
    cfg: &LocalizerConfig,
) -> Result<(Vec<Classified>, Vec<PseudoSpectrum>)> {
    let eig = eig_hermitian(r_hat)?;
    let noise = noise_subspace(&eig, &cfg.phase2_rule_for(layout.len()))?;
    let search = SubspaceRangeSearch { noise: &noise, layout, model: cfg.range_model };
    Ok(classify_with(candidates, &search, grid, cfg))
}

/// Phase 2: range search at each candidate and true/cross labelling.
///
/// A candidate yields one true target per range-spectrum peak that rises at
/// least `significance_db` over the significance reference and lies inside
/// the range grid; a candidate with no such peak is a cross angle. Near
/// duplicates are merged and, with a declared target count, only the `K`
/// most significant true detections are kept.
pub fn classify_with(
    candidates: &[f64],
    search: &dyn RangeSearch,
    grid: &SpectrumGrid,
    cfg: &LocalizerConfig,
) -> (Vec<Classified>, Vec<PseudoSpectrum>) {
    let (lo, hi) = (grid.ranges_m[0], *grid.ranges_m.last().unwrap());
    let mut spectra = Vec::with_capacity(candidates.len());
    let mut trues: Vec<Classified> = Vec::new();
    let mut crosses: Vec<Classified> = Vec::new();
    for &theta in candidates {
        let spec = search.spectrum(theta, &grid.ranges_m, cfg.execution);
        let reference = match cfg.significance_reference {
            SignificanceReference::Median => spec.median(),
            SignificanceReference::NoiseFloor => search.noise_floor(),
        }
        .max(f64::MIN_POSITIVE);
        let db = |v: f64| 10.0 * (v / reference).log10();
        let peaks = detect_peaks(&spec, usize::MAX, cfg.range_prominence_db);
        let mut found = false;
        for p in &peaks {
            if db(p.value) >= cfg.significance_db && p.position >= lo && p.position <= hi {
                found = true;
                trues.push(Classified {
                    theta_deg: theta,
                    r_m: p.position,
                    label: Label::True,
                    peak_value: p.value,
                    significance_db: db(p.value),
                });
            }
        }
        if !found {
            let (r_m, peak_value) = match peaks.first() {
                Some(p) => (p.position, p.value),
                None => {
                    let i = spec.argmax().unwrap_or(0);
                    (spec.axis[i], spec.values[i])
                }
            };
            crosses.push(Classified {
                theta_deg: theta,
                r_m,
                label: Label::Cross,
                peak_value,
                significance_db: db(peak_value),
            });
        }
        spectra.push(spec);
    }

    trues.sort_by(|a, b| {
        b.significance_db
            .total_cmp(&a.significance_db)
            .then(a.theta_deg.total_cmp(&b.theta_deg))
    });
    let mut kept: Vec<Classified> = Vec::new();
    for c in trues {
        let duplicate = kept.iter().any(|k| {
            (k.theta_deg - c.theta_deg).abs() <= cfg.merge_theta_deg
                && (k.r_m - c.r_m).abs() <= 0.1 * k.r_m.max(c.r_m)
        });
        if duplicate {
            continue;
        }
        match cfg.num_targets {
            Some(k) if kept.len() >= k => crosses.push(Classified { label: Label::Cross, ..c }),
            _ => kept.push(c),
        }
    }
    kept.extend(crosses);
    (kept, spectra)
}

/// The full pipeline: covariance, decoupling, coarray smoothing, angle
/// search and range classification.
pub fn localize(
    snapshots: &SnapshotSet,
    layout: &SensorLayout,
    cfg: &LocalizerConfig,
) -> Result<LocalizationResult> {
    let coarray = difference_coarray(layout, cfg.segment);
    let bundle = CovarianceBundle::build(snapshots, layout, &coarray, cfg.estimator, cfg.reduction)?;
    let grid = cfg.grid_for(layout)?;
    let spacing = coarray.step as f64 * layout.d();
    localize_from_bundle(&bundle, layout, spacing, &grid, cfg)
}

/// Runs both phases on a prepared covariance bundle. `spacing` is the
/// distance between adjacent virtual sensors in meters.
pub fn localize_from_bundle(
    bundle: &CovarianceBundle,
    layout: &SensorLayout,
    spacing: f64,
    grid: &SpectrumGrid,
    cfg: &LocalizerConfig,
) -> Result<LocalizationResult> {
    let size = bundle.r_v.nrows();
    let rule1 = cfg.phase1_rule_for(size);
    let (aspec, eig1, k1) = angle_spectrum(
        &bundle.r_v,
        &grid.angles_deg,
        spacing,
        layout.lambda(),
        2.0,
        &rule1,
        cfg.execution,
    )?;
    let peaks = detect_peaks(&aspec, cfg.max_candidates_for(size), cfg.prominence_db);
    let candidates: Vec<f64> = peaks.iter().map(|p| p.position).collect();

    let eig2 = eig_hermitian(&bundle.r_hat)?;
    let noise2 = noise_subspace(&eig2, &cfg.phase2_rule_for(layout.len()))?;
    let search = SubspaceRangeSearch { noise: &noise2, layout, model: cfg.range_model };
    let (classified, range_spectra) = classify_with(&candidates, &search, grid, cfg);
    Ok(LocalizationResult {
        candidate_angles: candidates,
        classified,
        angle_spectrum: Some(aspec),
        range_spectra,
        phase1_eigenvalues: eig1.values,
        phase1_signal_dim: k1,
        phase2_eigenvalues: eig2.values,
        phase2_signal_dim: noise2.signal_dim,
    })
}
