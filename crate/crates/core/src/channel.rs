//! Near-field steering vectors and synthetic snapshot generation.
//!
//! Phase convention: the exact response of sensor `u` to a source at
//! `(theta, r)` is `exp(j k (d_u - r))` with `k = 2 pi / lambda` and
//! `d_u = sqrt(r^2 + s_u^2 - 2 r s_u sin(theta))`. Its Fresnel expansion is
//! `exp(j (p_u + q_u))` with
//!
//! * `p_u(theta)    = -k s_u sin(theta)` (odd in `s_u`, angle only)
//! * `q_u(theta, r) =  k s_u^2 cos^2(theta) / (2 r)` (even in `s_u`)
//!
//! so the two forms agree to third order in `s_u / r`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SensorLayout;

/// A point source. Angles are from broadside, in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub theta: f64,
    pub r: f64,
}

impl Target {
    pub fn new(theta: f64, r: f64) -> Self {
        Target { theta, r }
    }

    pub fn from_degrees(theta_deg: f64, r: f64) -> Self {
        Target { theta: theta_deg.to_radians(), r }
    }

    pub fn theta_deg(&self) -> f64 {
        self.theta.to_degrees()
    }
}

/// Where a target sits relative to the layout's Fresnel region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionDiagnostic {
    InsideFresnelDistance,
    BeyondRayleighDistance,
}

/// Checks `Z_F <= r <= Z_R`; violations are reported, not rejected.
pub fn region_check(layout: &SensorLayout, target: &Target) -> Option<RegionDiagnostic> {
    if target.r < layout.fresnel_distance() {
        Some(RegionDiagnostic::InsideFresnelDistance)
    } else if target.r > layout.rayleigh_distance() {
        Some(RegionDiagnostic::BeyondRayleighDistance)
    } else {
        None
    }
}

/// Forward model used for synthesis or range search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SteeringModel {
    #[default]
    Exact,
    Fresnel,
}

/// First- and second-order Fresnel phase terms `(p_u, q_u)` of one sensor.
pub fn fresnel_phases(s: f64, lambda: f64, target: &Target) -> (f64, f64) {
    let k = 2.0 * PI / lambda;
    let (sin, cos) = target.theta.sin_cos();
    (-k * s * sin, k * s * s * cos * cos / (2.0 * target.r))
}

fn exact_phase(s: f64, lambda: f64, target: &Target) -> f64 {
    let k = 2.0 * PI / lambda;
    let r = target.r;
    let dist = (r * r + s * s - 2.0 * r * s * target.theta.sin()).sqrt();
    k * (dist - r)
}

pub fn steering_exact_at(positions: &[f64], lambda: f64, target: &Target) -> DVector<Complex64> {
    DVector::from_iterator(
        positions.len(),
        positions
            .iter()
            .map(|&s| Complex64::from_polar(1.0, exact_phase(s, lambda, target))),
    )
}

pub fn steering_fresnel_at(positions: &[f64], lambda: f64, target: &Target) -> DVector<Complex64> {
    DVector::from_iterator(
        positions.len(),
        positions.iter().map(|&s| {
            let (p, q) = fresnel_phases(s, lambda, target);
            Complex64::from_polar(1.0, p + q)
        }),
    )
}

/// Exact spherical-wavefront steering vector.
pub fn steering_exact(layout: &SensorLayout, target: &Target) -> DVector<Complex64> {
    steering_exact_at(&layout.positions(), layout.lambda(), target)
}

/// Fresnel-approximated steering vector.
pub fn steering_fresnel(layout: &SensorLayout, target: &Target) -> DVector<Complex64> {
    steering_fresnel_at(&layout.positions(), layout.lambda(), target)
}

pub fn steering(layout: &SensorLayout, target: &Target, model: SteeringModel) -> DVector<Complex64> {
    match model {
        SteeringModel::Exact => steering_exact(layout, target),
        SteeringModel::Fresnel => steering_fresnel(layout, target),
    }
}

/// Self-spectrum steering: element `u` is `exp(-j k 2 s_u sin(theta))`,
/// i.e. the far-field response of an array with doubled positions.
pub fn steering_selfspectrum(layout: &SensorLayout, theta: f64) -> DVector<Complex64> {
    let k = 2.0 * PI / layout.lambda();
    let sin = theta.sin();
    DVector::from_iterator(
        layout.len(),
        layout
            .positions()
            .into_iter()
            .map(|s| Complex64::from_polar(1.0, -k * 2.0 * s * sin)),
    )
}

/// Steering matrix with one column per target.
pub fn steering_matrix(
    layout: &SensorLayout,
    targets: &[Target],
    model: SteeringModel,
) -> DMatrix<Complex64> {
    let positions = layout.positions();
    let mut b = DMatrix::zeros(layout.len(), targets.len());
    for (k, t) in targets.iter().enumerate() {
        let col = match model {
            SteeringModel::Exact => steering_exact_at(&positions, layout.lambda(), t),
            SteeringModel::Fresnel => steering_fresnel_at(&positions, layout.lambda(), t),
        };
        b.set_column(k, &col);
    }
    b
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub snapshots: usize,
    /// Per-source SNR in dB; `None` disables noise.
    pub snr_db: Option<f64>,
    pub seed: u64,
    pub model: SteeringModel,
}

/// Received snapshots together with the source waveforms that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    /// `U x T`, one column per snapshot.
    pub y: DMatrix<Complex64>,
    /// `K x T` source waveforms.
    pub x: DMatrix<Complex64>,
    /// Noise variance; zero when noise is disabled.
    pub sigma2: f64,
    pub snr_db: Option<f64>,
    pub seed: u64,
}

impl SnapshotSet {
    pub fn snapshots(&self) -> usize {
        self.y.ncols()
    }

    pub fn sensors(&self) -> usize {
        self.y.nrows()
    }
}

/// Draws one circularly-symmetric complex Gaussian sample of unit variance.
pub(crate) fn cscg<R: rand::Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Generates `y(t) = B x(t) + z(t)` for uncorrelated unit-power sources.
pub fn synthesize(
    layout: &SensorLayout,
    targets: &[Target],
    cfg: &SynthesisConfig,
) -> Result<SnapshotSet> {
    if targets.is_empty() {
        return Err(Error::NoTargets);
    }
    if cfg.snapshots == 0 {
        return Err(Error::InvalidParameter("snapshot count must be positive".into()));
    }
    for t in targets {
        if let Some(diag) = region_check(layout, t) {
            log::debug!("target ({:.2} deg, {} m): {diag:?}", t.theta_deg(), t.r);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (u, k, t) = (layout.len(), targets.len(), cfg.snapshots);
    let x = DMatrix::from_fn(k, t, |_, _| cscg(&mut rng));
    let b = steering_matrix(layout, targets, cfg.model);
    let mut y = &b * &x;
    let sigma2 = match cfg.snr_db {
        Some(snr) => {
            let sigma2 = 10f64.powf(-snr / 10.0);
            let scale = sigma2.sqrt();
            // column-major fill keeps the noise stream independent of U
            for col in 0..t {
                for row in 0..u {
                    y[(row, col)] += cscg(&mut rng) * scale;
                }
            }
            sigma2
        }
        None => 0.0,
    };
    Ok(SnapshotSet { y, x, sigma2, snr_db: cfg.snr_db, seed: cfg.seed })
}
