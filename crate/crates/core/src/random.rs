//! Seeded random matrices, states and channels.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::channels::{Channel, DensityMatrix};
use crate::choi;
use crate::qmat::{c, nearest_unitary, CMatrix, SystemDims};

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, nrows: usize, ncols: usize) -> CMatrix {
    CMatrix::from_fn(nrows, ncols, |_, _| {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        c(a, b) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Haar-distributed unitary: the polar factor of a Ginibre matrix.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    nearest_unitary(&ginibre(rng, d, d))
}

/// Random isometry `C^cols -> C^rows` with `rows >= cols`.
pub fn random_isometry<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    assert!(rows >= cols, "an isometry cannot shrink the dimension");
    nearest_unitary(&ginibre(rng, rows, cols))
}

/// Random Hermitian matrix drawn from the Gaussian unitary ensemble.
pub fn gue<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    ginibre(rng, d, d).hermitian_part()
}

/// Full-rank random state `G G^dag / Tr` with `G` Ginibre.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, dims: SystemDims) -> DensityMatrix {
    let d = dims.total();
    let g = ginibre(rng, d, d);
    let m = g.matmul(&g.adjoint());
    let tr = m.trace().re;
    DensityMatrix::new(m.scale_re(1.0 / tr).hermitian_part(), dims).expect("Wishart state is valid")
}

/// Random pure state.
pub fn random_pure_state<R: Rng + ?Sized>(rng: &mut R, dims: SystemDims) -> DensityMatrix {
    let psi = random_isometry(rng, dims.total(), 1).column(0);
    DensityMatrix::pure(&psi, dims).expect("unit vector")
}

/// Random channel with `kraus_count` Kraus operators via a random Stinespring isometry.
pub fn random_channel<R: Rng + ?Sized>(
    rng: &mut R,
    in_dims: SystemDims,
    out_dims: SystemDims,
    kraus_count: usize,
) -> Channel {
    let (din, dout) = (in_dims.total(), out_dims.total());
    let iso = random_isometry(rng, dout * kraus_count, din);
    let kraus: Vec<CMatrix> =
        (0..kraus_count).map(|k| CMatrix::from_fn(dout, din, |o, i| iso[(k * dout + o, i)])).collect();
    Channel::from_choi_unchecked(choi::from_kraus(&kraus), in_dims, out_dims).expect("shapes agree")
}
