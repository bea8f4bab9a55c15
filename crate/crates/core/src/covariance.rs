//! Covariance construction: initial estimate, anti-diagonal mirror,
//! decoupled covariance, coarray vectorization and spatial smoothing.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::SnapshotSet;
use crate::error::{Error, Result};
use crate::geometry::{CoarrayLayout, SensorLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Least-squares channel estimate per snapshot using the known waveforms.
    #[default]
    LsKnownWaveform,
    /// Joint least-squares channel estimate over all snapshots,
    /// `B = Y X^H (X X^H)^-1`, then `R = B B^H`.
    LsBlock,
    /// Plain sample covariance of the received snapshots.
    Sample,
}

/// How redundant coarray lags are collapsed into one virtual sensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LagReduction {
    /// Mean over every `(i, j)` pair producing the lag.
    #[default]
    Average,
    /// Keep the first pair in column-major `vec` order, drop the rest.
    FirstOccurrence,
}

/// `R = (1/T) sum_t B_t B_t^H` with the rank-one LS estimate
/// `B_t = y(t) x(t)^H / (x(t)^H x(t))`.
pub fn covariance_ls(snapshots: &SnapshotSet) -> Result<DMatrix<Complex64>> {
    let (u, t) = (snapshots.y.nrows(), snapshots.y.ncols());
    if snapshots.x.ncols() != t {
        return Err(Error::Dimension(format!(
            "{} waveform columns for {t} snapshots",
            snapshots.x.ncols()
        )));
    }
    if t == 0 {
        return Err(Error::InvalidParameter("no snapshots".into()));
    }
    let mut r = DMatrix::<Complex64>::zeros(u, u);
    for col in 0..t {
        let energy = snapshots.x.column(col).norm_squared();
        if energy <= 0.0 {
            return Err(Error::ZeroSourceEnergy(col));
        }
        let y = snapshots.y.column(col);
        // B_t B_t^H = y x^H x y^H / |x|^4 = y y^H / |x|^2
        r.ger(Complex64::new(1.0 / energy, 0.0), &y, &y.conjugate(), Complex64::new(1.0, 0.0));
    }
    Ok(r / Complex64::new(t as f64, 0.0))
}

/// `R = B B^H` with the joint LS channel estimate `B = Y X^H (X X^H)^-1`.
pub fn covariance_ls_block(snapshots: &SnapshotSet) -> Result<DMatrix<Complex64>> {
    let (y, x) = (&snapshots.y, &snapshots.x);
    if x.ncols() != y.ncols() {
        return Err(Error::Dimension(format!(
            "{} waveform columns for {} snapshots",
            x.ncols(),
            y.ncols()
        )));
    }
    let gram = x * x.adjoint();
    let inv = gram
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("source waveforms are rank deficient".into()))?;
    let b = y * x.adjoint() * inv;
    let r = &b * b.adjoint();
    Ok((&r + r.adjoint()) * Complex64::new(0.5, 0.0))
}

/// `R = (1/T) sum_t y(t) y(t)^H`.
pub fn covariance_sample(snapshots: &SnapshotSet) -> Result<DMatrix<Complex64>> {
    let t = snapshots.y.ncols();
    if t == 0 {
        return Err(Error::InvalidParameter("no snapshots".into()));
    }
    let y = &snapshots.y;
    let r = y * y.adjoint() / Complex64::new(t as f64, 0.0);
    // exact Hermitian symmetry
    Ok((&r + r.adjoint()) * Complex64::new(0.5, 0.0))
}

pub fn estimate_covariance(snapshots: &SnapshotSet, kind: EstimatorKind) -> Result<DMatrix<Complex64>> {
    match kind {
        EstimatorKind::LsKnownWaveform => covariance_ls(snapshots),
        EstimatorKind::LsBlock => covariance_ls_block(snapshots),
        EstimatorKind::Sample => covariance_sample(snapshots),
    }
}

/// Reflection about the anti-diagonal: `out[i, j] = r[U-1-j, U-1-i]`.
pub fn anti_diagonal_mirror(r: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let u = r.nrows();
    DMatrix::from_fn(u, u, |i, j| r[(u - 1 - j, u - 1 - i)])
}

/// Returns `(R_a, R_d)` where `R_d = R (Hadamard) R_a`.
///
/// The identity that cancels the range-dependent phase needs mirrored sensor
/// pairs, so asymmetric layouts are rejected.
pub fn decouple(
    r: &DMatrix<Complex64>,
    layout: &SensorLayout,
) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
    if !r.is_square() || r.nrows() != layout.len() {
        return Err(Error::Dimension(format!(
            "{}x{} covariance for {} sensors",
            r.nrows(),
            r.ncols(),
            layout.len()
        )));
    }
    if !layout.is_symmetric() {
        return Err(Error::AsymmetricLayout);
    }
    let ra = anti_diagonal_mirror(r);
    let rd = r.component_mul(&ra);
    Ok((ra, rd))
}

/// Collapses `m` onto the consecutive lag segment of `coarray`, ascending
/// in lag. Entry `(i, j)` belongs to lag `(s_i - s_j) / d`.
pub fn vectorize_to_coarray(
    m: &DMatrix<Complex64>,
    layout: &SensorLayout,
    coarray: &CoarrayLayout,
    reduction: LagReduction,
) -> Result<DVector<Complex64>> {
    let u = layout.len();
    if m.nrows() != u || m.ncols() != u {
        return Err(Error::Dimension("matrix does not match layout".into()));
    }
    let h = coarray.segment_half_width as i64;
    let step = coarray.step;
    let len = coarray.segment_length();
    let mut sum = vec![Complex64::new(0.0, 0.0); len];
    let mut count = vec![0usize; len];
    let idx = layout.indices();
    // column-major walk matches vec() ordering
    for j in 0..u {
        for i in 0..u {
            let diff = idx[i] - idx[j];
            if diff % step != 0 {
                continue;
            }
            let lag = diff / step;
            if lag.abs() > h {
                continue;
            }
            let slot = (lag + h) as usize;
            match reduction {
                LagReduction::Average => {
                    sum[slot] += m[(i, j)];
                    count[slot] += 1;
                }
                LagReduction::FirstOccurrence => {
                    if count[slot] == 0 {
                        sum[slot] = m[(i, j)];
                        count[slot] = 1;
                    }
                }
            }
        }
    }
    if let Some(slot) = count.iter().position(|&c| c == 0) {
        return Err(Error::MissingLag((slot as i64 - h) * step));
    }
    Ok(DVector::from_iterator(
        len,
        sum.into_iter().zip(count).map(|(s, c)| s / c as f64),
    ))
}

/// Averages the outer products of the `h + 1` overlapping length-`h + 1`
/// windows of a length-`2h + 1` virtual snapshot.
pub fn spatial_smooth(r_tilde: &DVector<Complex64>) -> Result<DMatrix<Complex64>> {
    let len = r_tilde.len();
    if len == 0 || len.is_multiple_of(2) {
        return Err(Error::Dimension(format!(
            "smoothing needs an odd-length coarray vector, got {len}"
        )));
    }
    let w = len / 2 + 1;
    let mut rv = DMatrix::<Complex64>::zeros(w, w);
    for start in 0..w {
        let win = r_tilde.rows(start, w);
        rv.ger(Complex64::new(1.0, 0.0), &win, &win.conjugate(), Complex64::new(1.0, 0.0));
    }
    Ok(rv / Complex64::new(w as f64, 0.0))
}

/// Every intermediate covariance of the decoupling pipeline.
#[derive(Debug, Clone)]
pub struct CovarianceBundle {
    pub r_hat: DMatrix<Complex64>,
    pub r_a: DMatrix<Complex64>,
    pub r_d: DMatrix<Complex64>,
    pub r_tilde: DVector<Complex64>,
    pub r_v: DMatrix<Complex64>,
    pub estimator: EstimatorKind,
}

impl CovarianceBundle {
    pub fn build(
        snapshots: &SnapshotSet,
        layout: &SensorLayout,
        coarray: &CoarrayLayout,
        estimator: EstimatorKind,
        reduction: LagReduction,
    ) -> Result<Self> {
        let r_hat = estimate_covariance(snapshots, estimator)?;
        Self::from_covariance(r_hat, layout, coarray, estimator, reduction)
    }

    pub fn from_covariance(
        r_hat: DMatrix<Complex64>,
        layout: &SensorLayout,
        coarray: &CoarrayLayout,
        estimator: EstimatorKind,
        reduction: LagReduction,
    ) -> Result<Self> {
        let (r_a, r_d) = decouple(&r_hat, layout)?;
        let r_tilde = vectorize_to_coarray(&r_d, layout, coarray, reduction)?;
        let r_v = spatial_smooth(&r_tilde)?;
        Ok(CovarianceBundle { r_hat, r_a, r_d, r_tilde, r_v, estimator })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{
        steering_fresnel, synthesize, SteeringModel, SynthesisConfig, Target,
    };
    use crate::geometry::{
        build_coprime_layout, build_dense_layout, difference_coarray, CoprimeParams, SegmentPolicy,
    };
    use std::f64::consts::PI;

    fn layout(m: usize, n: usize) -> SensorLayout {
        build_coprime_layout(&CoprimeParams::quarter_wavelength(m, n, 0.01).unwrap())
    }

    #[test]
    fn ls_single_target_recovers_outer_product() {
        let l = layout(3, 4);
        let t = Target::from_degrees(12.0, 0.2);
        let cfg = SynthesisConfig { snapshots: 20, snr_db: None, seed: 5, model: SteeringModel::Fresnel };
        let s = synthesize(&l, &[t], &cfg).unwrap();
        let r = covariance_ls(&s).unwrap();
        let b = steering_fresnel(&l, &t);
        let bb = &b * b.adjoint();
        assert!((&r - &bb).norm() < 1e-12);
        assert!(r.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn ls_diagonal_real_positive() {
        let l = layout(2, 3);
        let targets = [Target::from_degrees(-20.0, 0.1), Target::from_degrees(25.0, 0.15)];
        let cfg = SynthesisConfig { snapshots: 30, snr_db: None, seed: 8, model: SteeringModel::Exact };
        let r = covariance_ls(&synthesize(&l, &targets, &cfg).unwrap()).unwrap();
        for i in 0..l.len() {
            assert!(r[(i, i)].re > 0.0 && r[(i, i)].im.abs() < 1e-12);
        }
    }

    #[test]
    fn ls_rejects_zero_energy_snapshot() {
        let l = layout(2, 3);
        let cfg = SynthesisConfig { snapshots: 3, snr_db: None, seed: 1, model: SteeringModel::Exact };
        let mut s = synthesize(&l, &[Target::from_degrees(0.0, 0.1)], &cfg).unwrap();
        s.x.column_mut(1).fill(Complex64::new(0.0, 0.0));
        assert!(matches!(covariance_ls(&s), Err(Error::ZeroSourceEnergy(1))));
    }

    #[test]
    fn sample_covariance_is_exactly_hermitian() {
        let l = layout(2, 5);
        let cfg = SynthesisConfig { snapshots: 17, snr_db: Some(0.0), seed: 2, model: SteeringModel::Exact };
        let r = covariance_sample(&synthesize(&l, &[Target::from_degrees(5.0, 0.3)], &cfg).unwrap())
            .unwrap();
        assert_eq!(r, r.adjoint());
    }

    #[test]
    fn mirror_indexing() {
        let r = DMatrix::from_fn(3, 3, |i, j| Complex64::new((3 * i + j) as f64, 0.0));
        let ra = anti_diagonal_mirror(&r);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(ra[(i, j)], r[(2 - j, 2 - i)]);
            }
        }
    }

    #[test]
    fn single_target_decoupling_leaves_pure_first_order_phase() {
        let l = layout(3, 5);
        let t = Target::from_degrees(23.0, 0.2);
        let b = steering_fresnel(&l, &t);
        let r = &b * b.adjoint();
        let (_, rd) = decouple(&r, &l).unwrap();
        let pos = l.positions();
        let k = 2.0 * PI / l.lambda();
        for i in 0..l.len() {
            for j in 0..l.len() {
                let expected = Complex64::from_polar(1.0, -2.0 * k * (pos[i] - pos[j]) * t.theta.sin());
                assert!((rd[(i, j)] - expected).norm() < 1e-9);
            }
            // anti-diagonal carries the first-order term only
            let anti = r[(i, l.mirror(i))];
            let expected = Complex64::from_polar(1.0, -k * 2.0 * pos[i] * t.theta.sin());
            assert!((anti - expected).norm() < 1e-9);
        }
    }

    #[test]
    fn decouple_rejects_asymmetric_layouts() {
        let l = SensorLayout::from_positions(&[0.0, 0.01, 0.03], 0.01, 0.04).unwrap();
        let r = DMatrix::<Complex64>::identity(3, 3);
        assert!(matches!(decouple(&r, &l), Err(Error::AsymmetricLayout)));
        assert!(matches!(decouple(&DMatrix::identity(2, 2), &layout(2, 3)), Err(Error::Dimension(_))));
    }

    #[test]
    fn single_target_virtual_snapshot_is_a_pure_exponential() {
        let l = layout(2, 3);
        let coarray = difference_coarray(&l, SegmentPolicy::Nominal);
        let t = Target::from_degrees(-14.0, 0.06);
        let b = steering_fresnel(&l, &t);
        let (_, rd) = decouple(&(&b * b.adjoint()), &l).unwrap();
        let k = 2.0 * PI / l.lambda();
        for reduction in [LagReduction::Average, LagReduction::FirstOccurrence] {
            let rt = vectorize_to_coarray(&rd, &l, &coarray, reduction).unwrap();
            assert_eq!(rt.len(), 13);
            for (slot, lag) in coarray.segment_lags().into_iter().enumerate() {
                let expected = Complex64::from_polar(1.0, -k * 2.0 * lag as f64 * l.d() * t.theta.sin());
                assert!((rt[slot] - expected).norm() < 1e-9);
                let mirrored = rt[rt.len() - 1 - slot];
                assert!((mirrored - rt[slot].conj()).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn lag_zero_is_mean_of_diagonal() {
        let l = layout(2, 3);
        let coarray = difference_coarray(&l, SegmentPolicy::Nominal);
        let m = DMatrix::from_fn(7, 7, |i, j| Complex64::new(i as f64, j as f64 * 0.5));
        let rt = vectorize_to_coarray(&m, &l, &coarray, LagReduction::Average).unwrap();
        let mean = m.diagonal().sum() / 7.0;
        assert!((rt[6] - mean).norm() < 1e-12);
    }

    #[test]
    fn smoothing_shapes_and_errors() {
        let rt = DVector::from_element(13, Complex64::new(1.0, 0.0));
        let rv = spatial_smooth(&rt).unwrap();
        assert_eq!(rv.shape(), (7, 7));
        assert!(spatial_smooth(&DVector::from_element(12, Complex64::new(1.0, 0.0))).is_err());
    }

    #[test]
    fn dense_layout_pipeline_shapes() {
        let l = build_dense_layout(9, 0.0025, 0.01).unwrap();
        let coarray = difference_coarray(&l, SegmentPolicy::Nominal);
        assert_eq!(coarray.segment_length(), 17);
        let cfg = SynthesisConfig { snapshots: 10, snr_db: Some(10.0), seed: 4, model: SteeringModel::Exact };
        let s = synthesize(&l, &[Target::from_degrees(3.0, 0.05)], &cfg).unwrap();
        let bundle = CovarianceBundle::build(&s, &l, &coarray, EstimatorKind::LsKnownWaveform, LagReduction::Average)
            .unwrap();
        assert_eq!(bundle.r_v.shape(), (9, 9));
    }
}
