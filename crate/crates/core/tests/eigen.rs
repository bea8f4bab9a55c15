mod common;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nearfield_ca::music::{eig_hermitian, noise_subspace, SubspaceRule};

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<Complex64> {
    let a = DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    (&a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

#[test]
fn eigenvalues_match_jacobi() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let h = random_hermitian(&mut rng, 8);
        let rows: Vec<Vec<Complex64>> = (0..8).map(|i| (0..8).map(|j| h[(i, j)]).collect()).collect();
        let mut expect = common::jacobi_eigenvalues(&rows);
        expect.reverse();
        let got = eig_hermitian(&h).unwrap();
        for (g, e) in got.values.iter().zip(&expect) {
            assert!((g - e).abs() < 1e-10, "{g} vs {e}");
        }
    }
}

#[test]
fn eigenpairs_reconstruct_the_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in [1, 2, 5, 8, 16] {
        let h = random_hermitian(&mut rng, n);
        let e = eig_hermitian(&h).unwrap();
        let v = &e.vectors;
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, e.values.iter().map(|&x| Complex64::new(x, 0.0))));
        assert!((v * d * v.adjoint() - &h).norm() < 1e-10);
        assert!((v.adjoint() * v - DMatrix::identity(n, n)).norm() < 1e-10);
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn noise_basis_spans_the_smallest_eigenvalues() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = random_hermitian(&mut rng, 8);
    let e = eig_hermitian(&h).unwrap();
    let ns = noise_subspace(&e, &SubspaceRule::Fixed(3)).unwrap();
    assert_eq!(ns.basis.ncols(), 5);
    let hu = &h * &ns.basis;
    let rayleigh = (ns.basis.adjoint() * hu).trace().re;
    let expect: f64 = e.values[3..].iter().sum();
    assert!((rayleigh - expect).abs() < 1e-10);
}
