//! Comparison localizers: a dense uniform array running the same decoupled
//! pipeline, classic far-field coarray MUSIC, and per-subarray processing
//! with common-peak fusion.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::SnapshotSet;
use crate::covariance::{
    covariance_sample, decouple, estimate_covariance, spatial_smooth, vectorize_to_coarray,
    LagReduction,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{build_subarrays, difference_coarray, CoprimeParams, LayoutKind, SensorLayout};
use crate::music::{
    angle_spectrum, classify_with, detect_peaks, eig_hermitian, localize, noise_subspace,
    LocalizationResult, LocalizerConfig, NoiseSubspace, PseudoSpectrum, RangeSearch,
    SubspaceRangeSearch, SubspaceRule,
};

/// Localization schemes compared by the Monte Carlo harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Decoupled covariance and two-phase MUSIC on the coprime array.
    Proposed,
    /// The same pipeline on a dense array with as many sensors.
    Dense,
    /// Far-field coarray MUSIC on the coprime array; angles only.
    Farfield,
    /// Two-phase pipeline per sparse subarray with fused spectra.
    Subarray,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Proposed, Method::Dense, Method::Farfield, Method::Subarray];

    pub fn name(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Dense => "dense",
            Method::Farfield => "farfield",
            Method::Subarray => "subarray",
        }
    }

    pub fn estimates_range(self) -> bool {
        self != Method::Farfield
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "proposed" => Ok(Method::Proposed),
            "dense" => Ok(Method::Dense),
            "farfield" => Ok(Method::Farfield),
            "subarray" => Ok(Method::Subarray),
            other => Err(Error::InvalidParameter(format!("unknown method '{other}'"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Dense-array localization. The pipeline only needs a symmetric layout, so
/// this is [`localize`] on the dense geometry; set `cfg.range_bounds` to
/// search the same region as the array it is compared against.
pub fn localize_dense(
    snapshots: &SnapshotSet,
    layout: &SensorLayout,
    cfg: &LocalizerConfig,
) -> Result<LocalizationResult> {
    if layout.kind() != LayoutKind::Dense {
        return Err(Error::InvalidParameter("dense baseline needs a dense layout".into()));
    }
    localize(snapshots, layout, cfg)
}

/// Angles from classic far-field coarray processing.
#[derive(Debug, Clone)]
pub struct FarFieldResult {
    /// Detected angles in degrees, strongest first.
    pub angles_deg: Vec<f64>,
    pub spectrum: PseudoSpectrum,
    pub signal_dim: usize,
}

/// Far-field coarray MUSIC: the sample covariance itself is collapsed onto
/// the difference coarray with the single-position phase `exp(-j k l d sin)`,
/// spatially smoothed and searched in angle. No range is estimated.
pub fn localize_farfield_virtual(
    snapshots: &SnapshotSet,
    layout: &SensorLayout,
    cfg: &LocalizerConfig,
) -> Result<FarFieldResult> {
    let r = covariance_sample(snapshots)?;
    let coarray = difference_coarray(layout, cfg.segment);
    let r_tilde = vectorize_to_coarray(&r, layout, &coarray, cfg.reduction)?;
    let r_v = spatial_smooth(&r_tilde)?;
    let size = r_v.nrows();
    let rule = cfg.phase1_rule.unwrap_or(match cfg.num_targets {
        Some(k) => SubspaceRule::Fixed(k.min(size - 1)),
        None => SubspaceRule::EigGap { min_signal: 1, max_signal: size / 2, min_ratio: 10.0, fallback: 1 },
    });
    let grid = cfg.grid_for(layout)?;
    let spacing = coarray.step as f64 * layout.d();
    let (spectrum, _, k) =
        angle_spectrum(&r_v, &grid.angles_deg, spacing, layout.lambda(), 1.0, &rule, cfg.execution)?;
    let cap = cfg.num_targets.unwrap_or(k.max(1));
    let peaks = detect_peaks(&spectrum, cap, cfg.prominence_db);
    Ok(FarFieldResult { angles_deg: peaks.iter().map(|p| p.position).collect(), spectrum, signal_dim: k })
}

fn submatrix(r: &DMatrix<Complex64>, rows: &[usize]) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows.len(), rows.len(), |i, j| r[(rows[i], rows[j])])
}

fn member_rows(full: &SensorLayout, sub: &SensorLayout) -> Result<Vec<usize>> {
    sub.indices()
        .iter()
        .map(|k| {
            full.indices()
                .binary_search(k)
                .map_err(|_| Error::InvalidParameter(format!("subarray sensor {k} not in the array")))
        })
        .collect()
}

/// Product of per-subarray range spectra.
struct FusedRangeSearch<'a> {
    parts: Vec<SubspaceRangeSearch<'a>>,
}

impl RangeSearch for FusedRangeSearch<'_> {
    fn spectrum(&self, theta_deg: f64, ranges: &[f64], exec: Execution) -> PseudoSpectrum {
        let mut iter = self.parts.iter();
        let mut acc = iter.next().expect("at least one subarray").spectrum(theta_deg, ranges, exec);
        for part in iter {
            let s = part.spectrum(theta_deg, ranges, exec);
            acc.values.iter_mut().zip(s.values).for_each(|(a, b)| *a *= b);
        }
        acc
    }

    fn noise_floor(&self) -> f64 {
        self.parts.iter().map(|p| p.noise_floor()).product()
    }
}

/// Subarray-based localization on a symmetric coprime array.
///
/// Each sparse uniform subarray runs the decoupled angle search on its own
/// coarray; its grating lobes differ between the two spacings, so the
/// element-wise minimum of the two normalized spectra keeps only the common
/// peaks. Ranges come from the product of the per-subarray range spectra.
pub fn localize_subarray(
    snapshots: &SnapshotSet,
    layout: &SensorLayout,
    cfg: &LocalizerConfig,
) -> Result<LocalizationResult> {
    let (m, n) = layout
        .coprime_pair()
        .ok_or_else(|| Error::InvalidParameter("subarray baseline needs a coprime layout".into()))?;
    let params = CoprimeParams { m, n, d: layout.d(), lambda: layout.lambda() };
    let (sub1, sub2) = build_subarrays(&params);
    let r_hat = estimate_covariance(snapshots, cfg.estimator)?;
    let grid = cfg.grid_for(layout)?;

    let mut fused: Option<PseudoSpectrum> = None;
    let mut noises: Vec<NoiseSubspace> = Vec::new();
    let mut eigenvalues = Vec::new();
    let mut signal_dims = Vec::new();
    let subs = [sub1, sub2];
    for sub in &subs {
        let rows = member_rows(layout, sub)?;
        let r_sub = submatrix(&r_hat, &rows);
        let coarray = difference_coarray(sub, cfg.segment);
        let (_, r_d) = decouple(&r_sub, sub)?;
        let r_tilde = vectorize_to_coarray(&r_d, sub, &coarray, LagReduction::Average)?;
        let r_v = spatial_smooth(&r_tilde)?;
        let spacing = coarray.step as f64 * sub.d();
        let rule = cfg.phase1_rule_for(r_v.nrows());
        let (mut spec, eig, k) =
            angle_spectrum(&r_v, &grid.angles_deg, spacing, sub.lambda(), 2.0, &rule, cfg.execution)?;
        let max = spec.values.iter().copied().fold(f64::MIN_POSITIVE, f64::max);
        spec.values.iter_mut().for_each(|v| *v /= max);
        fused = Some(match fused {
            None => spec,
            Some(mut acc) => {
                acc.values.iter_mut().zip(&spec.values).for_each(|(a, b)| *a = a.min(*b));
                acc
            }
        });
        eigenvalues.extend(eig.values);
        signal_dims.push(k);

        let eig2 = eig_hermitian(&r_sub)?;
        noises.push(noise_subspace(&eig2, &cfg.phase2_rule_for(sub.len()))?);
    }
    let fused = fused.expect("two subarrays");
    let peaks = detect_peaks(&fused, cfg.max_candidates_for(layout.len()), cfg.prominence_db);
    let candidates: Vec<f64> = peaks.iter().map(|p| p.position).collect();

    let search = FusedRangeSearch {
        parts: subs
            .iter()
            .zip(&noises)
            .map(|(sub, noise)| SubspaceRangeSearch { noise, layout: sub, model: cfg.range_model })
            .collect(),
    };
    let (classified, range_spectra) = classify_with(&candidates, &search, &grid, cfg);
    Ok(LocalizationResult {
        candidate_angles: candidates,
        classified,
        angle_spectrum: Some(fused),
        range_spectra,
        phase1_eigenvalues: eigenvalues,
        phase1_signal_dim: signal_dims.iter().sum(),
        phase2_eigenvalues: Vec::new(),
        phase2_signal_dim: noises.iter().map(|n| n.signal_dim).sum(),
    })
}
