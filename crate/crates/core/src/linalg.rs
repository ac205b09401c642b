//! Dense complex matrix kernel.
//!
//! Operators are stored row-major. Vectorization stacks rows, so the
//! Hilbert-Schmidt index of entry `(i, j)` is `i * d + j` and the sandwich
//! `X rho Y` corresponds to the superoperator `X ⊗ Yᵀ`.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::MatRef;
use faer::{Mat, Side};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Repo-wide numerical thresholds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Hermiticity, unitarity, trace preservation, unit-disk checks.
    pub structural: f64,
    /// Identities that hold up to rounding (trace, Kraus completeness).
    pub algebraic: f64,
    /// Most negative eigenvalue accepted before a matrix counts as not PSD.
    pub psd: f64,
    /// Pairwise eigenvalue gap below which a cluster is reported.
    pub eig_gap: f64,
    /// Eigenvector condition number above which a spectrum is reported defective.
    pub eig_condition: f64,
    /// Relative commutator norm below which B and H_e count as commuting.
    pub commute: f64,
    /// Branch probability below which a sampled outcome is rejected.
    pub branch_probability: f64,
    /// Conditional-state drift accepted during trajectories.
    pub state: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        structural: 1e-10,
        algebraic: 1e-12,
        psd: 1e-8,
        eig_gap: 1e-8,
        eig_condition: 1e10,
        commute: 1e-10,
        branch_probability: 1e-14,
        state: 1e-9,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Square complex matrix acting on a Hilbert space.
#[derive(Clone, PartialEq)]
pub struct Operator {
    dim: usize,
    data: Vec<C64>,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Operator({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|j| {
                    let z = self[(i, j)];
                    format!("{:+.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            out.data[i * dim + i] = ONE;
        }
        out
    }

    pub fn from_row_major(dim: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    /// Builds from nested rows. Panics on ragged input; meant for literals.
    pub fn from_rows<R: AsRef<[C64]>>(rows: &[R]) -> Self {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), dim, "row length must equal the number of rows");
            data.extend_from_slice(r);
        }
        Self { dim, data }
    }

    pub fn from_real_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let c: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.as_ref().iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&c)
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    pub fn diag(values: &[C64]) -> Self {
        let mut out = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            out[(i, i)] = v;
        }
        out
    }

    pub fn real_diag(values: &[f64]) -> Self {
        let c: Vec<C64> = values.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::diag(&c)
    }

    /// `|v⟩⟨w|`
    pub fn outer(v: &[C64], w: &[C64]) -> Self {
        assert_eq!(v.len(), w.len());
        Self::from_fn(v.len(), |i, j| v[i] * w[j].conj())
    }

    /// Projector onto a single computational basis state.
    pub fn basis_projector(dim: usize, k: usize) -> Self {
        let mut out = Self::zeros(dim);
        out[(k, k)] = ONE;
        out
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::identity(dim).scale_real(1.0 / dim as f64)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest absolute column sum.
    pub fn one_norm(&self) -> f64 {
        (0..self.dim)
            .map(|j| (0..self.dim).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let d = self.dim;
        if d >= 48 {
            return Self::from_faer((self.to_faer() * other.to_faer()).as_ref());
        }
        let mut out = vec![ZERO; d * d];
        for i in 0..d {
            let row = &mut out[i * d..(i + 1) * d];
            for k in 0..d {
                let a = self.data[i * d + k];
                if a == ZERO {
                    continue;
                }
                let brow = &other.data[k * d..(k + 1) * d];
                for (o, &b) in row.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Self { dim: d, data: out }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &self.matmul(other) - &other.matmul(self)
    }

    pub fn anticommutator(&self, other: &Self) -> Self {
        &self.matmul(other) + &other.matmul(self)
    }

    /// `A B A†`
    pub fn sandwich(&self, inner: &Self) -> Self {
        self.matmul(inner).matmul(&self.adjoint())
    }

    /// `‖A − A†‖_F`
    pub fn hermitian_residual(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        s.sqrt()
    }

    /// Hermiticity test relative to the operator scale: `‖A − A†‖ ≤ tol·max(1, ‖A‖)`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_residual() <= tol * self.frobenius_norm().max(1.0)
    }

    pub fn require_hermitian(&self, tol: f64) -> Result<()> {
        if self.is_hermitian(tol) {
            Ok(())
        } else {
            Err(Error::NonHermitianInput {
                residual: self.hermitian_residual(),
            })
        }
    }

    /// `(A + A†)/2`
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.dim, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn distance(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn to_faer(&self) -> Mat<C64> {
        Mat::from_fn(self.dim, self.dim, |i, j| self[(i, j)])
    }

    pub fn from_faer(m: MatRef<'_, C64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        Self::from_fn(m.nrows(), |i, j| m[(i, j)])
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.dim).map(|i| self[(i, j)]).collect()
    }
}

impl Index<(usize, usize)> for Operator {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for Operator {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim);
        Operator {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim);
        Operator {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Add for Operator {
    type Output = Operator;
    fn add(self, rhs: Operator) -> Operator {
        &self + &rhs
    }
}

impl Sub for Operator {
    type Output = Operator;
    fn sub(self, rhs: Operator) -> Operator {
        &self - &rhs
    }
}

impl AddAssign<&Operator> for Operator {
    fn add_assign(&mut self, rhs: &Operator) {
        assert_eq!(self.dim, rhs.dim);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&Operator> for Operator {
    fn sub_assign(&mut self, rhs: &Operator) {
        assert_eq!(self.dim, rhs.dim);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.matmul(rhs)
    }
}

impl Mul for Operator {
    type Output = Operator;
    fn mul(self, rhs: Operator) -> Operator {
        self.matmul(&rhs)
    }
}

impl Mul<C64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: C64) -> Operator {
        self.scale(rhs)
    }
}

impl Mul<f64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: f64) -> Operator {
        self.scale_real(rhs)
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale_real(-1.0)
    }
}

/// Standard Kronecker product `a ⊗ b`.
pub fn kron(a: &Operator, b: &Operator) -> Operator {
    let (da, db) = (a.dim, b.dim);
    let d = da * db;
    let mut out = Operator::zeros(d);
    for i in 0..da {
        for j in 0..da {
            let x = a[(i, j)];
            if x == ZERO {
                continue;
            }
            for k in 0..db {
                let row = (i * db + k) * d + j * db;
                for l in 0..db {
                    out.data[row + l] = x * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Kronecker product of a list, left to right.
pub fn kron_all(ops: &[&Operator]) -> Operator {
    let mut acc = Operator::identity(1);
    for op in ops {
        acc = kron(&acc, op);
    }
    acc
}

/// Eigendecomposition of a Hermitian operator. Eigenvalues ascend; the
/// eigenvectors are the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: Operator,
}

impl HermitianEigen {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.column(k)
    }

    /// Rebuilds `V f(Λ) V†`.
    pub fn map(&self, f: impl Fn(f64) -> C64) -> Operator {
        let d = self.values.len();
        let fv: Vec<C64> = self.values.iter().map(|&x| f(x)).collect();
        let v = &self.vectors;
        Operator::from_fn(d, |i, j| {
            (0..d).map(|k| v[(i, k)] * fv[k] * v[(j, k)].conj()).sum()
        })
    }
}

/// Hermitian eigendecomposition; the input is symmetrized first.
pub fn eigh(h: &Operator) -> Result<HermitianEigen> {
    let m = h.hermitian_part().to_faer();
    let e = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Decomposition(format!("{e:?}")))?;
    let values: Vec<f64> = e.S().column_vector().iter().map(|z| z.re).collect();
    Ok(HermitianEigen {
        values,
        vectors: Operator::from_faer(e.U()),
    })
}

/// `e^{−iht}` for Hermitian `h`.
pub fn expm(h: &Operator, t: f64) -> Result<Operator> {
    expm_with(h, t, &Tolerances::DEFAULT)
}

pub fn expm_with(h: &Operator, t: f64, tol: &Tolerances) -> Result<Operator> {
    h.require_hermitian(tol.structural)?;
    let e = eigh(h)?;
    Ok(e.map(|x| C64::from_polar(1.0, -x * t)))
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// `e^{a}` for a general square matrix, by scaling and squaring with a
/// degree-13 Padé approximant.
pub fn expm_general(a: &Operator) -> Operator {
    let d = a.dim;
    let norm = a.one_norm();
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a.scale_real(0.5f64.powi(s));
    let id = Operator::identity(d);
    let a2 = a.matmul(&a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);
    let b = &PADE13;
    let lin = |c6: f64, c4: f64, c2: f64, c0: f64| -> Operator {
        let mut out = a6.scale_real(c6);
        out += &a4.scale_real(c4);
        out += &a2.scale_real(c2);
        out += &id.scale_real(c0);
        out
    };
    let u = a.matmul(&(&a6.matmul(&lin(b[13], b[11], b[9], 0.0)) + &lin(b[7], b[5], b[3], b[1])));
    let v = &a6.matmul(&lin(b[12], b[10], b[8], 0.0)) + &lin(b[6], b[4], b[2], b[0]);
    let p = &v + &u;
    let q = &v - &u;
    let lu = q.to_faer().partial_piv_lu();
    let mut r = Operator::from_faer(lu.solve(p.to_faer()).as_ref());
    for _ in 0..s {
        r = r.matmul(&r);
    }
    r
}

/// Inverse through partial-pivot LU.
pub fn inverse(a: &Operator) -> Operator {
    Operator::from_faer(a.to_faer().partial_piv_lu().inverse().as_ref())
}

/// Singular values in non-increasing order.
pub fn singular_values(a: &Operator) -> Result<Vec<f64>> {
    a.to_faer()
        .singular_values()
        .map_err(|e| Error::Decomposition(format!("{e:?}")))
}

/// Right singular structure of the vertically stacked matrix `[a_1; a_2; …]`.
#[derive(Clone, Debug)]
pub struct StackedSvd {
    /// Singular values in non-increasing order, padded with zeros to the column count.
    pub singular_values: Vec<f64>,
    /// Right singular vectors, one per entry of `singular_values`.
    pub right_vectors: Vec<Vec<C64>>,
}

pub fn stacked_svd(blocks: &[&Operator]) -> Result<StackedSvd> {
    assert!(!blocks.is_empty());
    let n = blocks[0].dim;
    let rows = n * blocks.len();
    let m = Mat::from_fn(rows, n, |r, c| blocks[r / n][(r % n, c)]);
    let svd = m.svd().map_err(|e| Error::Decomposition(format!("{e:?}")))?;
    let s = svd.S().column_vector();
    let mut singular_values: Vec<f64> = s.iter().map(|z| z.re).collect();
    singular_values.resize(n, 0.0);
    let v = svd.V();
    let right_vectors = (0..n)
        .map(|k| (0..n).map(|i| v[(i, k)]).collect())
        .collect();
    Ok(StackedSvd {
        singular_values,
        right_vectors,
    })
}

/// Spectral diagnostics returned alongside a general eigendecomposition.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EigDiagnostics {
    /// Smallest pairwise eigenvalue distance.
    pub min_gap: f64,
    /// 2-norm condition number of the right eigenvector matrix.
    pub condition_number: f64,
    /// Some pair of eigenvalues is closer than the gap tolerance.
    pub clustered: bool,
    /// The eigenvector matrix is numerically singular.
    pub defective: bool,
    /// `max |⟨⟨L_i|R_j⟩⟩ − δ_ij|`
    pub biorthogonality_residual: f64,
}

/// General eigendecomposition. Eigenvalues are sorted by modulus
/// (descending), ties by real then imaginary part (descending). Left vectors
/// are scaled so that `⟨⟨L_i|R_i⟩⟩ = 1`.
#[derive(Clone, Debug)]
pub struct GeneralEigen {
    pub values: Vec<C64>,
    pub right: Vec<Vec<C64>>,
    pub left: Vec<Vec<C64>>,
    pub diagnostics: EigDiagnostics,
}

fn quantized_modulus(z: C64) -> i64 {
    (z.norm() * 1e10).round() as i64
}

/// Deterministic spectral order: modulus on a 1e-10 grid, then real, then imaginary part.
pub fn spectral_order(a: C64, b: C64) -> std::cmp::Ordering {
    quantized_modulus(b)
        .cmp(&quantized_modulus(a))
        .then(b.re.total_cmp(&a.re))
        .then(b.im.total_cmp(&a.im))
}

pub fn eig_general(m: &Operator) -> Result<GeneralEigen> {
    eig_general_with(m, &Tolerances::DEFAULT)
}

pub fn eig_general_with(m: &Operator, tol: &Tolerances) -> Result<GeneralEigen> {
    let n = m.dim;
    let fm = m.to_faer();
    let e = fm
        .eigen()
        .map_err(|e| Error::Decomposition(format!("{e:?}")))?;
    let vals: Vec<C64> = e.S().column_vector().iter().copied().collect();
    let u = e.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| spectral_order(vals[a], vals[b]).then(a.cmp(&b)));

    let r = Mat::from_fn(n, n, |i, j| u[(i, order[j])]);
    let values: Vec<C64> = order.iter().map(|&k| vals[k]).collect();

    let sv = r
        .singular_values()
        .map_err(|e| Error::Decomposition(format!("{e:?}")))?;
    let smax = sv.first().copied().unwrap_or(0.0);
    let smin = sv.last().copied().unwrap_or(0.0);
    let condition_number = if smin > 0.0 { smax / smin } else { f64::INFINITY };

    let rinv = r.partial_piv_lu().inverse();
    let right: Vec<Vec<C64>> = (0..n).map(|j| (0..n).map(|i| r[(i, j)]).collect()).collect();
    let left: Vec<Vec<C64>> = (0..n)
        .map(|k| (0..n).map(|i| rinv[(k, i)].conj()).collect())
        .collect();

    let mut min_gap = f64::INFINITY;
    for a in 0..n {
        for b in a + 1..n {
            min_gap = min_gap.min((values[a] - values[b]).norm());
        }
    }
    let mut biorth = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            let ip: C64 = left[a].iter().zip(&right[b]).map(|(l, r)| l.conj() * r).sum();
            let target = if a == b { ONE } else { ZERO };
            let res = (ip - target).norm();
            biorth = if res.is_finite() { biorth.max(res) } else { f64::INFINITY };
        }
    }
    let diagnostics = EigDiagnostics {
        min_gap,
        condition_number,
        clustered: min_gap < tol.eig_gap,
        defective: !(condition_number <= tol.eig_condition),
        biorthogonality_residual: biorth,
    };
    Ok(GeneralEigen {
        values,
        right,
        left,
        diagnostics,
    })
}

/// Principal square root of a positive semidefinite operator.
pub fn psd_sqrt(rho: &Operator) -> Result<Operator> {
    psd_sqrt_with(rho, &Tolerances::DEFAULT)
}

pub fn psd_sqrt_with(rho: &Operator, tol: &Tolerances) -> Result<Operator> {
    rho.require_hermitian(tol.structural)?;
    let e = eigh(rho)?;
    let min = e.values.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -tol.psd {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    Ok(e.map(|x| C64::new(x.max(0.0).sqrt(), 0.0)))
}

/// `F(σ, ρ) = Tr √(√ρ σ √ρ)`, clamped to `[0, 1]`.
pub fn fidelity(rho_fix: &Operator, rho: &Operator) -> Result<f64> {
    let s = psd_sqrt(rho)?;
    let inner = s.matmul(rho_fix).matmul(&s);
    let e = eigh(&inner)?;
    let f: f64 = e.values.iter().map(|&x| x.max(0.0).sqrt()).sum();
    Ok(f.clamp(0.0, 1.0))
}

/// `½ ‖a − b‖₁` for Hermitian arguments.
pub fn trace_distance(a: &Operator, b: &Operator) -> Result<f64> {
    let e = eigh(&(a - b))?;
    Ok(0.5 * e.values.iter().map(|x| x.abs()).sum::<f64>())
}

/// Checks the density-matrix invariants: Hermitian, unit trace, eigenvalues above `−tol`.
pub fn validate_density(rho: &Operator, tol: f64) -> Result<()> {
    rho.require_hermitian(tol)?;
    let tr = rho.trace();
    if (tr - ONE).norm() > tol.max(1e-12) {
        return Err(Error::InvalidArgument(format!(
            "density matrix trace is {tr} (expected 1)"
        )));
    }
    let e = eigh(rho)?;
    let min = e.values[0];
    if min < -tol {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    Ok(())
}

/// Vectorized operator `|A⟩⟩` in row-stacking order.
#[derive(Clone, Debug, PartialEq)]
pub struct HsVector {
    dim: usize,
    entries: Vec<C64>,
}

impl HsVector {
    pub fn from_entries(dim: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Ok(Self { dim, entries })
    }

    /// Hilbert-space dimension `d` (the vector has `d²` entries).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn inner(&self, other: &Self) -> C64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

pub fn vec(a: &Operator) -> HsVector {
    HsVector {
        dim: a.dim,
        entries: a.data.clone(),
    }
}

pub fn devec(v: &HsVector) -> Operator {
    Operator {
        dim: v.dim,
        data: v.entries.clone(),
    }
}

/// `⟨⟨A|B⟩⟩ = Tr(A†B)`
pub fn hs_inner(a: &Operator, b: &Operator) -> Result<C64> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            found: b.dim,
        });
    }
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| x.conj() * y).sum())
}

/// Linear map on operators, stored as a `d² × d²` matrix acting on `vec`.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperOperator {
    d: usize,
    mat: Operator,
}

impl SuperOperator {
    pub fn from_matrix(d: usize, mat: Operator) -> Result<Self> {
        if mat.dim != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: mat.dim,
            });
        }
        Ok(Self { d, mat })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            d,
            mat: Operator::identity(d * d),
        }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            d,
            mat: Operator::zeros(d * d),
        }
    }

    /// `ρ ↦ X ρ Y`, i.e. `X ⊗ Yᵀ`.
    pub fn sandwich(x: &Operator, y: &Operator) -> Self {
        Self {
            d: x.dim,
            mat: kron(x, &y.transpose()),
        }
    }

    /// `ρ ↦ M ρ M†`, i.e. `M ⊗ M*`.
    pub fn conjugation(m: &Operator) -> Self {
        Self {
            d: m.dim,
            mat: kron(m, &m.conj()),
        }
    }

    /// Hilbert-space dimension `d`.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &Operator {
        &self.mat
    }

    pub fn into_matrix(self) -> Operator {
        self.mat
    }

    pub fn apply_vec(&self, v: &[C64]) -> Vec<C64> {
        let n = self.mat.dim;
        assert_eq!(v.len(), n);
        let mut out = vec![ZERO; n];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.mat.data[i * n..(i + 1) * n];
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        out
    }

    pub fn apply(&self, rho: &Operator) -> Operator {
        assert_eq!(rho.dim, self.d);
        Operator {
            dim: self.d,
            data: self.apply_vec(&rho.data),
        }
    }

    /// `⟨⟨v| Φ` as the entries of `Φ† |v⟩⟩`.
    pub fn left_apply_vec(&self, v: &[C64]) -> Vec<C64> {
        let n = self.mat.dim;
        let mut out = vec![ZERO; n];
        for i in 0..n {
            let vi = v[i].conj();
            if vi == ZERO {
                continue;
            }
            let row = &self.mat.data[i * n..(i + 1) * n];
            for (o, a) in out.iter_mut().zip(row) {
                *o += vi * a;
            }
        }
        out.iter().map(|z| z.conj()).collect()
    }

    /// Heisenberg-picture action `Φ†(A)`.
    pub fn adjoint_apply(&self, a: &Operator) -> Operator {
        Operator {
            dim: self.d,
            data: self.left_apply_vec(&a.data),
        }
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.d, other.d);
        Self {
            d: self.d,
            mat: self.mat.matmul(&other.mat),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            d: self.d,
            mat: &self.mat + &other.mat,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            d: self.d,
            mat: &self.mat - &other.mat,
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            d: self.d,
            mat: self.mat.scale(s),
        }
    }

    /// `Φ^m` by repeated squaring.
    pub fn pow(&self, mut m: u64) -> Self {
        let mut result = Self::identity(self.d);
        let mut base = self.clone();
        while m > 0 {
            if m & 1 == 1 {
                result = result.compose(&base);
            }
            m >>= 1;
            if m > 0 {
                base = base.compose(&base);
            }
        }
        result
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.mat.distance(&other.mat)
    }

    /// `‖⟨⟨I|Φ − ⟨⟨I|‖`
    pub fn trace_preservation_residual(&self) -> f64 {
        let id = Operator::identity(self.d);
        let row = self.left_apply_vec(&id.data);
        row.iter()
            .zip(&id.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `‖Φ|I⟩⟩ − |I⟩⟩‖`
    pub fn unitality_residual(&self) -> f64 {
        let id = Operator::identity(self.d);
        self.apply(&id).distance(&id)
    }

    /// Choi matrix `Σ_{ij} |i⟩⟨j| ⊗ Φ(|i⟩⟨j|)` obtained by reshuffling.
    pub fn choi(&self) -> Operator {
        let d = self.d;
        let n = d * d;
        let mut out = Operator::zeros(n);
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        out[(i * d + k, j * d + l)] = self.mat[(k * d + l, i * d + j)];
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_density, random_hermitian, random_operator};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn sigma_x() -> Operator {
        Operator::from_real_rows(&[[0.0, 1.0], [1.0, 0.0]])
    }
    fn sigma_y() -> Operator {
        Operator::from_rows(&[[ZERO, -I], [I, ZERO]])
    }
    fn sigma_z() -> Operator {
        Operator::real_diag(&[1.0, -1.0])
    }

    #[test]
    fn kron_identity_and_diagonal() {
        let i2 = Operator::identity(2);
        assert_eq!(kron(&i2, &i2), Operator::identity(4));
        assert_eq!(
            kron(&sigma_z(), &sigma_z()),
            Operator::real_diag(&[1.0, -1.0, -1.0, 1.0])
        );
    }

    #[test]
    fn kron_matches_elementwise_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let a = random_operator(2, &mut rng);
            let b = random_operator(3, &mut rng);
            let k = kron(&a, &b);
            for i in 0..2 {
                for j in 0..2 {
                    for p in 0..3 {
                        for q in 0..3 {
                            assert_eq!(k[(i * 3 + p, j * 3 + q)], a[(i, j)] * b[(p, q)]);
                        }
                    }
                }
            }
        }
        let xy = kron(&sigma_x(), &sigma_y());
        assert_eq!(xy[(0, 3)], -I);
        assert_eq!(xy[(1, 2)], I);
    }

    #[test]
    fn expm_trivial_cases() {
        let u = expm(&Operator::zeros(3), 1.7).unwrap();
        assert!(u.distance(&Operator::identity(3)) < 1e-15);
        let u = expm(&sigma_z(), PI / 2.0).unwrap();
        let expected = Operator::diag(&[C64::from_polar(1.0, -PI / 2.0), C64::from_polar(1.0, PI / 2.0)]);
        assert!(u.distance(&expected) < 1e-14);
    }

    #[test]
    fn expm_matches_taylor_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = random_hermitian(4, &mut rng);
        let t = 0.37;
        let a = h.scale(C64::new(0.0, -t));
        let mut term = Operator::identity(4);
        let mut sum = Operator::identity(4);
        for n in 1..30 {
            term = term.matmul(&a).scale_real(1.0 / n as f64);
            sum += &term;
        }
        assert!(expm(&h, t).unwrap().distance(&sum) < 1e-9);
        assert!(expm_general(&a).distance(&sum) < 1e-9);
    }

    #[test]
    fn expm_rejects_non_hermitian() {
        let a = Operator::from_real_rows(&[[0.0, 1.0], [0.0, 0.0]]);
        assert!(matches!(expm(&a, 1.0), Err(Error::NonHermitianInput { .. })));
    }

    #[test]
    fn expm_general_large_norm() {
        // a nilpotent-plus-diagonal matrix with a closed-form exponential
        let a = Operator::from_real_rows(&[[-20.0, 50.0], [0.0, -20.0]]);
        let e = expm_general(&a);
        let x = (-20.0f64).exp();
        assert!((e[(0, 0)].re - x).abs() < 1e-20);
        assert!((e[(0, 1)].re - 50.0 * x).abs() < 1e-18);
        assert!(e[(1, 0)].norm() < 1e-20);
    }

    #[test]
    fn eig_identity_is_clustered() {
        let e = eig_general(&Operator::identity(4)).unwrap();
        assert!(e.values.iter().all(|v| (v - ONE).norm() < 1e-14));
        assert!(e.diagnostics.clustered);
    }

    #[test]
    fn eig_diagonal_reads_off_entries() {
        let w = C64::from_polar(0.5, PI / 3.0);
        let m = Operator::diag(&[ONE, C64::new(0.5, 0.0), w, ZERO]);
        let e = eig_general(&m).unwrap();
        assert!((e.values[0] - ONE).norm() < 1e-14);
        // equal modulus: ties broken by descending real part
        assert!((e.values[1] - 0.5).norm() < 1e-14);
        assert!((e.values[2] - w).norm() < 1e-14);
        assert!(e.values[3].norm() < 1e-14);
        assert!(!e.diagnostics.clustered);
        assert!(e.diagnostics.biorthogonality_residual < 1e-12);
    }

    #[test]
    fn eig_general_biorthonormal_on_random_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_operator(6, &mut rng);
        let e = eig_general(&m).unwrap();
        assert!(e.diagnostics.biorthogonality_residual < 1e-10);
        for k in 0..6 {
            let mv: Vec<C64> = (0..6)
                .map(|i| (0..6).map(|j| m[(i, j)] * e.right[k][j]).sum())
                .collect();
            for i in 0..6 {
                assert!((mv[i] - e.values[k] * e.right[k][i]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn eig_flags_jordan_block() {
        let m = Operator::from_real_rows(&[[1.0, 1.0], [0.0, 1.0]]);
        let e = eig_general(&m).unwrap();
        assert!(e.diagnostics.clustered);
        assert!(e.diagnostics.defective);
    }

    #[test]
    fn fidelity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_density(3, &mut rng);
        assert!((fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-7);
        let up = Operator::basis_projector(2, 0);
        let down = Operator::basis_projector(2, 1);
        assert!(fidelity(&up, &down).unwrap().abs() < 1e-12);
        let mixed = Operator::maximally_mixed(2);
        assert!((fidelity(&up, &mixed).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((fidelity(&mixed, &up).unwrap() - 0.5f64.sqrt()).abs() < 1e-7);
    }

    #[test]
    fn psd_sqrt_rejects_negative() {
        let a = Operator::real_diag(&[1.0, -0.1]);
        assert!(matches!(psd_sqrt(&a), Err(Error::NotPsd { .. })));
        let b = Operator::real_diag(&[4.0, 0.25]);
        assert!(psd_sqrt(&b).unwrap().distance(&Operator::real_diag(&[2.0, 0.5])) < 1e-14);
    }

    #[test]
    fn vec_conventions() {
        let v = vec(&Operator::identity(2));
        assert_eq!(v.entries(), &[ONE, ZERO, ZERO, ONE]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random_density(4, &mut rng);
        assert!((hs_inner(&Operator::identity(4), &rho).unwrap() - ONE).norm() < 1e-13);
        let a = random_operator(3, &mut rng);
        let b = random_operator(3, &mut rng);
        let oracle = a.adjoint().matmul(&b).trace();
        assert!((hs_inner(&a, &b).unwrap() - oracle).norm() < 1e-13);
        assert_eq!(devec(&vec(&a)), a);
        assert!(matches!(
            hs_inner(&a, &rho),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn choi_of_identity_is_unnormalized_bell_projector() {
        let c = SuperOperator::identity(2).choi();
        let mut expected = Operator::zeros(4);
        for &(r, s) in &[(0, 0), (0, 3), (3, 0), (3, 3)] {
            expected[(r, s)] = ONE;
        }
        assert_eq!(c, expected);
    }

    #[test]
    fn pow_matches_repeated_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_operator(2, &mut rng).scale_real(0.5);
        let s = SuperOperator::conjugation(&x);
        let mut acc = SuperOperator::identity(2);
        for _ in 0..13 {
            acc = acc.compose(&s);
        }
        assert!(acc.distance(&s.pow(13)) < 1e-12 * acc.matrix().frobenius_norm().max(1.0));
    }

    #[test]
    fn large_matmul_path_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_operator(50, &mut rng);
        let b = random_operator(50, &mut rng);
        let fast = a.matmul(&b);
        let slow = Operator::from_fn(50, |i, j| (0..50).map(|k| a[(i, k)] * b[(k, j)]).sum());
        assert!(fast.distance(&slow) < 1e-10);
    }
}
