//! Random operators for property tests, examples and structural sweeps.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::Operator;

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

/// Matrix with i.i.d. complex Gaussian entries.
pub fn random_operator<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Operator {
    let data = (0..d * d).map(|_| gaussian(rng)).collect();
    Operator::from_row_major(d, data).expect("length is d*d")
}

/// Hermitian matrix from the Gaussian unitary ensemble (unit entry scale).
pub fn random_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Operator {
    random_operator(d, rng).hermitian_part()
}

/// Full-rank density matrix `G G† / Tr(G G†)`.
pub fn random_density<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Operator {
    let g = random_operator(d, rng);
    let rho = g.matmul(&g.adjoint());
    let tr = rho.trace().re;
    rho.scale_real(1.0 / tr).hermitian_part()
}

/// Haar-random pure state as a density matrix.
pub fn random_pure_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Operator {
    let v: Vec<C64> = (0..d).map(|_| gaussian(rng)).collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let v: Vec<C64> = v.iter().map(|z| z / n).collect();
    Operator::outer(&v, &v)
}
