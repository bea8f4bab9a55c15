mod common;

use nearfield_ca::geometry::*;
use nearfield_ca::Error;

#[test]
fn coprime_layouts_match_definition() {
    for (m, n) in common::coprime_pairs(20) {
        let p = CoprimeParams::quarter_wavelength(m, n, 0.01).unwrap();
        let l = build_coprime_layout(&p);
        assert_eq!(l.indices(), common::coprime_indices(m as i64, n as i64).as_slice(), "M={m} N={n}");
        assert_eq!(l.len(), 2 * (m + n - 1) - 1);
        assert!(l.is_symmetric());
        let idx = l.indices();
        for i in 0..idx.len() {
            assert_eq!(idx[i], -idx[idx.len() - 1 - i]);
        }
        let d = 2.0 * (m * (n - 1)) as f64 * p.d;
        assert!((l.aperture() - d).abs() < 1e-12);
        assert!((l.fresnel_distance() - 1.2 * d).abs() < 1e-12);
        assert!((l.rayleigh_distance() - 2.0 * d * d / p.lambda).abs() < 1e-9);
    }
}

#[test]
fn coarray_matches_brute_force() {
    for (m, n) in common::coprime_pairs(20) {
        let p = CoprimeParams::quarter_wavelength(m, n, 0.01).unwrap();
        let l = build_coprime_layout(&p);
        let c = difference_coarray(&l, SegmentPolicy::FullRun);
        let h = common::consecutive_half_width(l.indices());
        assert_eq!(c.run_half_width, h, "M={m} N={n}");
        assert!(c.run_length() > 2 * m * n);
        assert_eq!(c.multiplicity_of(0), l.len());
        for (&lag, &mult) in c.lags.iter().zip(&c.multiplicity) {
            assert_eq!(c.multiplicity_of(-lag), mult);
        }
        let nominal = difference_coarray(&l, SegmentPolicy::Nominal);
        assert_eq!(nominal.segment_length(), 2 * m * n + 1);
    }
}

#[test]
fn capacities_match_enumeration() {
    for (m, n) in common::coprime_pairs(20) {
        assert_eq!(max_targets(m, n), common::capacity(m, n), "M={m} N={n}");
    }
    assert_eq!(max_targets(9, 11), (13, 9));
}

#[test]
fn subarray_union_is_the_coprime_layout() {
    for (m, n) in common::coprime_pairs(12) {
        let p = CoprimeParams::quarter_wavelength(m, n, 0.01).unwrap();
        let (a, b) = build_subarrays(&p);
        assert_eq!(a.len(), 2 * m - 1);
        assert_eq!(b.len(), 2 * n - 1);
        let mut union: Vec<i64> = a.indices().iter().chain(b.indices()).copied().collect();
        union.sort_unstable();
        union.dedup();
        assert_eq!(union, build_coprime_layout(&p).indices());
    }
}

#[test]
fn dense_layout_examples() {
    let l = build_dense_layout(7, 1.0, 4.0).unwrap();
    assert_eq!(l.indices(), &[-3, -2, -1, 0, 1, 2, 3]);
    let l = build_dense_layout(37, 2.5e-3, 0.01).unwrap();
    assert!((l.aperture() - 0.09).abs() < 1e-12);
    assert!(matches!(build_dense_layout(2, 1.0, 4.0), Err(Error::EvenSensorCount(2))));
}

#[test]
fn rejects_non_coprime_pairs() {
    assert!(matches!(CoprimeParams::new(4, 6, 1e-3, 4e-3), Err(Error::NotCoprime { .. })));
}
