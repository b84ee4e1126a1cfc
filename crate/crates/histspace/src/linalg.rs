//! Dense complex linear algebra and subspace calculus.
//!
//! Projectors are Hermitian idempotent matrices; subspaces are carried as
//! `d × k` matrices with orthonormal columns, with `k = 0` encoding the zero
//! subspace. The meet of two projectors is computed from the kernel of
//! `(I-p) + (I-q)`, whose null eigenvectors span the intersection of the
//! ranges; Hermitian evolution `U_t = exp(-itH)` goes through the
//! eigendecomposition of `H`. No sparse formats, no iteration-count tuning.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};
use crate::tol;

/// Complex double-precision scalar.
pub type C64 = Complex<f64>;
/// Dense complex vector.
pub type CVector = DVector<C64>;
/// Dense complex square matrix.
pub type CMatrix = DMatrix<C64>;

/// Largest singular value of `m`.
pub fn operator_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    SVD::new(m.clone(), false, false).singular_values.max()
}

fn sym_eigen(m: CMatrix) -> Result<SymmetricEigen<C64, nalgebra::Dyn>> {
    SymmetricEigen::try_new(m, f64::EPSILON, 0).ok_or(Error::EigenFailure)
}

/// Hermitian idempotent operator together with its integer rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    mat: CMatrix,
    rank: usize,
}

impl Projector {
    /// Validates Hermitian symmetry, idempotency and integer trace, then
    /// wraps the matrix.
    pub fn new(mat: CMatrix) -> Result<Self> {
        let d = mat.nrows();
        if mat.ncols() != d {
            return Err(Error::DimensionMismatch(d, mat.ncols()));
        }
        let t = tol::op(d);
        let herm = (&mat - mat.adjoint()).norm();
        if herm > t {
            return Err(Error::NotHermitian {
                residual: herm,
                tol: t,
            });
        }
        let idem = (&mat * &mat - &mat).norm();
        if idem > t {
            return Err(Error::NotIdempotent {
                residual: idem,
                tol: t,
            });
        }
        let trace = mat.trace().re;
        let rank = trace.round();
        if (trace - rank).abs() > 1e-7 || rank < 0.0 {
            return Err(Error::NonIntegerRank { trace });
        }
        Ok(Self {
            mat,
            rank: rank as usize,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: CMatrix::identity(dim, dim),
            rank: dim,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            mat: CMatrix::zeros(dim, dim),
            rank: 0,
        }
    }

    /// Diagonal indicator projector onto the given coordinates.
    pub fn coordinates(dim: usize, indices: &[usize]) -> Result<Self> {
        let mut mat = CMatrix::zeros(dim, dim);
        for &i in indices {
            if i >= dim {
                return Err(Error::DimensionMismatch(i, dim));
            }
            mat[(i, i)] = C64::new(1.0, 0.0);
        }
        Self::new(mat)
    }

    /// Rank-1 projector onto the line spanned by `v`.
    pub fn onto_vector(v: &CVector) -> Result<Self> {
        let n = v.norm();
        if n == 0.0 {
            return Err(Error::ZeroState);
        }
        let u = v / C64::new(n, 0.0);
        Self::new(&u * u.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_zero(&self) -> bool {
        self.rank == 0
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        &self.mat * v
    }

    /// Orthonormal basis of the range, from the eigenvectors with
    /// eigenvalue near 1.
    pub fn range(&self) -> Result<Subspace> {
        self.eigen_split(true)
    }

    /// Orthonormal basis of the kernel, from the eigenvectors with
    /// eigenvalue near 0.
    pub fn kernel(&self) -> Result<Subspace> {
        self.eigen_split(false)
    }

    fn eigen_split(&self, keep_ones: bool) -> Result<Subspace> {
        let d = self.dim();
        let eig = sym_eigen(self.mat.clone())?;
        let mut cols = Vec::new();
        for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
            if (lambda > 0.5) == keep_ones {
                cols.push(eig.eigenvectors.column(i).into_owned());
            }
        }
        Subspace::from_orthonormal_columns(d, cols)
    }
}

/// A subspace of `C^d`, represented by an orthonormal basis.
///
/// `k = 0` (no columns) encodes the zero subspace; a zero matrix of
/// positive width is never used.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    /// `d × k` with orthonormal columns.
    basis: CMatrix,
}

impl Subspace {
    /// Wraps a basis matrix, validating orthonormality of the columns.
    pub fn new(basis: CMatrix) -> Result<Self> {
        let k = basis.ncols();
        if k > 0 {
            let gram = basis.adjoint() * &basis;
            let residual = (&gram - CMatrix::identity(k, k)).norm();
            if residual > tol::op(basis.nrows().max(1)) {
                return Err(Error::NotOrthonormal { residual });
            }
        }
        Ok(Self { basis })
    }

    fn from_orthonormal_columns(dim: usize, cols: Vec<CVector>) -> Result<Self> {
        if cols.is_empty() {
            return Ok(Self::zero(dim));
        }
        Self::new(CMatrix::from_columns(&cols))
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            basis: CMatrix::zeros(dim, 0),
        }
    }

    pub fn full(dim: usize) -> Self {
        Self {
            basis: CMatrix::identity(dim, dim),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Dimension `k` of the subspace itself.
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn projector(&self) -> Projector {
        let d = self.ambient_dim();
        if self.dim() == 0 {
            return Projector::zero(d);
        }
        Projector {
            mat: &self.basis * self.basis.adjoint(),
            rank: self.dim(),
        }
    }

    /// Residual of `v` against this subspace, `||v - P v||`.
    pub fn residual(&self, v: &CVector) -> f64 {
        (v - self.projector().apply(v)).norm()
    }

    pub fn contains_vector(&self, v: &CVector, tolerance: f64) -> bool {
        self.residual(v) <= tolerance
    }

    /// Containment test `self ⊆ other` via `||P_o P_s - P_s||`.
    pub fn is_contained_in(&self, other: &Subspace) -> bool {
        let ps = self.projector();
        let po = other.projector();
        (po.matrix() * ps.matrix() - ps.matrix()).norm() <= tol::containment(self.ambient_dim())
    }
}

/// Orthonormal basis of the span of `vectors`; linearly dependent inputs
/// are dropped by a rank decision at `tol_rank` (default
/// `dim · eps · σ_max`).
pub fn orthonormalize(vectors: &[CVector], tol_rank: Option<f64>) -> Result<Subspace> {
    let Some(first) = vectors.first() else {
        return Err(Error::ZeroState);
    };
    let d = first.len();
    for v in vectors {
        if v.len() != d {
            return Err(Error::DimensionMismatch(d, v.len()));
        }
    }
    let m = CMatrix::from_columns(vectors);
    let svd = SVD::new(m, true, false);
    let u = svd.u.ok_or(Error::EigenFailure)?;
    let sigma_max = svd.singular_values.max();
    let cut = tol_rank.unwrap_or_else(|| tol::rank(d.max(vectors.len()), sigma_max));
    let cols: Vec<CVector> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > cut)
        .map(|(i, _)| u.column(i).into_owned())
        .collect();
    Subspace::from_orthonormal_columns(d, cols)
}

/// Projector onto `Range(p) ∩ Range(q)`.
///
/// The intersection is the kernel of the positive semidefinite operator
/// `(I-p) + (I-q)`; one Hermitian eigensolve extracts it.
pub fn meet(p: &Projector, q: &Projector) -> Result<Projector> {
    let d = p.dim();
    if q.dim() != d {
        return Err(Error::DimensionMismatch(d, q.dim()));
    }
    let id = CMatrix::identity(d, d);
    let gap = (&id - p.matrix()) + (&id - q.matrix());
    let eig = sym_eigen(gap)?;
    let mut cols = Vec::new();
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() < tol::MEET_EIGEN {
            cols.push(eig.eigenvectors.column(i).into_owned());
        }
    }
    Ok(Subspace::from_orthonormal_columns(d, cols)?.projector())
}

/// Iterated meet over a slice of projectors, with early exit on rank 0.
pub fn meet_all(ps: &[&Projector]) -> Result<Projector> {
    let Some(first) = ps.first() else {
        return Err(Error::ZeroState);
    };
    let mut acc = (*first).clone();
    for p in &ps[1..] {
        if acc.is_zero() {
            break;
        }
        acc = meet(&acc, p)?;
    }
    Ok(acc)
}

/// Orthogonal complement.
pub fn complement(s: &Subspace) -> Result<Subspace> {
    s.projector().kernel()
}

/// Operator-norm distance between the projectors of two subspaces.
///
/// Equals the sine of the largest principal angle; 1 for orthogonal lines,
/// 0 exactly when the subspaces coincide.
pub fn subspace_distance(s1: &Subspace, s2: &Subspace) -> f64 {
    let diff = s1.projector().matrix() - s2.projector().matrix();
    operator_norm(&diff)
}

/// Unitary `U_t = exp(-itH)` for Hermitian `H`, via `H = V Λ V†`.
pub fn hermitian_evolution(h: &CMatrix, t: f64) -> Result<CMatrix> {
    let d = h.nrows();
    if h.ncols() != d {
        return Err(Error::DimensionMismatch(d, h.ncols()));
    }
    let scale = 1.0 + h.norm();
    let herm = (h - h.adjoint()).norm();
    if herm > tol::op(d) * scale {
        return Err(Error::NotHermitian {
            residual: herm,
            tol: tol::op(d) * scale,
        });
    }
    let eig = sym_eigen(h.clone())?;
    let phases = CMatrix::from_diagonal(&eig.eigenvalues.map(|lambda| {
        let angle = -t * lambda;
        C64::new(angle.cos(), angle.sin())
    }));
    Ok(&eig.eigenvectors * phases * eig.eigenvectors.adjoint())
}

/// Applies each projector of a nested chain to `φ`, returning the sequence
/// `p_i φ`.
///
/// The chain must be monotone (increasing or decreasing under containment);
/// the limits of the sequence are then governed by the projector onto the
/// union span or the intersection.
pub fn monotone_projector_limit(chain: &[Subspace], phi: &CVector) -> Result<Vec<CVector>> {
    if chain.is_empty() {
        return Ok(Vec::new());
    }
    let d = chain[0].ambient_dim();
    if phi.len() != d {
        return Err(Error::DimensionMismatch(d, phi.len()));
    }
    for s in chain {
        if s.ambient_dim() != d {
            return Err(Error::DimensionMismatch(d, s.ambient_dim()));
        }
    }
    let increasing = chain.windows(2).all(|w| w[0].is_contained_in(&w[1]));
    let decreasing = chain.windows(2).all(|w| w[1].is_contained_in(&w[0]));
    if !(increasing || decreasing) {
        return Err(Error::NonNestedChain);
    }
    Ok(chain.iter().map(|s| s.projector().apply(phi)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn cv(entries: &[(f64, f64)]) -> CVector {
        CVector::from_iterator(
            entries.len(),
            entries.iter().map(|&(re, im)| C64::new(re, im)),
        )
    }

    fn e(dim: usize, i: usize) -> CVector {
        let mut v = CVector::zeros(dim);
        v[i] = C64::new(1.0, 0.0);
        v
    }

    pub(crate) fn random_unitary(dim: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let g = CMatrix::from_fn(dim, dim, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        g.qr().q()
    }

    fn random_subspace(dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Subspace {
        let u = random_unitary(dim, rng);
        Subspace::new(u.columns(0, k).into_owned()).unwrap()
    }

    // Independent rank oracle: count singular values above threshold.
    fn svd_rank(m: &CMatrix) -> usize {
        let sv = SVD::new(m.clone(), false, false).singular_values;
        let cut = tol::rank(m.nrows().max(m.ncols()), sv.max());
        sv.iter().filter(|&&s| s > cut).count()
    }

    #[test]
    fn orthonormalize_identity_basis() {
        let s = orthonormalize(&[e(2, 0), e(2, 1)], None).unwrap();
        assert_eq!(s.dim(), 2);
        let p = s.projector();
        assert!((p.matrix() - CMatrix::identity(2, 2)).norm() < tol::op(2));
    }

    #[test]
    fn orthonormalize_drops_duplicates() {
        let s = orthonormalize(&[e(2, 0), e(2, 0)], None).unwrap();
        assert_eq!(s.dim(), 1);
        assert!(s.contains_vector(&e(2, 0), 1e-12));
    }

    #[test]
    fn orthonormalize_spans_full_plane() {
        let r = 1.0 / 2.0_f64.sqrt();
        let s = orthonormalize(&[cv(&[(r, 0.0), (r, 0.0)]), e(2, 0)], None).unwrap();
        assert_eq!(s.dim(), 2);
        // direct assembly: the span projector must be the identity
        assert!((s.projector().matrix() - CMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn orthonormalize_rejects_dim_mismatch() {
        assert!(matches!(
            orthonormalize(&[e(2, 0), e(3, 0)], None),
            Err(Error::DimensionMismatch(_, _))
        ));
    }

    #[test]
    fn meet_with_identity_absorbs() {
        let q = Projector::coordinates(3, &[0, 2]).unwrap();
        let m = meet(&Projector::identity(3), &q).unwrap();
        assert!((m.matrix() - q.matrix()).norm() < 1e-12);
    }

    #[test]
    fn meet_of_commuting_diagonals() {
        let p = Projector::coordinates(4, &[0, 1]).unwrap();
        let q = Projector::coordinates(4, &[0, 2]).unwrap();
        let m = meet(&p, &q).unwrap();
        let expected = Projector::coordinates(4, &[0]).unwrap();
        assert!((m.matrix() - expected.matrix()).norm() < 1e-12);
    }

    #[test]
    fn meet_of_distinct_lines_is_zero() {
        // two distinct lines in C^2 intersect only at the origin; the
        // stacked system [I-p; I-q] must have full column rank
        let r = 1.0 / 2.0_f64.sqrt();
        let p = Projector::onto_vector(&e(2, 0)).unwrap();
        let q = Projector::onto_vector(&cv(&[(r, 0.0), (r, 0.0)])).unwrap();
        let id = CMatrix::identity(2, 2);
        let mut stacked = CMatrix::zeros(4, 2);
        stacked
            .view_mut((0, 0), (2, 2))
            .copy_from(&(&id - p.matrix()));
        stacked
            .view_mut((2, 0), (2, 2))
            .copy_from(&(&id - q.matrix()));
        assert_eq!(svd_rank(&stacked), 2);
        let m = meet(&p, &q).unwrap();
        assert_eq!(m.rank(), 0);
    }

    #[test]
    fn complement_of_zero_is_full() {
        let c = complement(&Subspace::zero(3)).unwrap();
        assert_eq!(c.dim(), 3);
    }

    #[test]
    fn complement_of_first_axis() {
        let s = orthonormalize(&[e(2, 0)], None).unwrap();
        let c = complement(&s).unwrap();
        assert_eq!(c.dim(), 1);
        assert!(c.contains_vector(&e(2, 1), 1e-12));
    }

    #[test]
    fn distance_examples() {
        let s0 = orthonormalize(&[e(2, 0)], None).unwrap();
        let s1 = orthonormalize(&[e(2, 1)], None).unwrap();
        assert_relative_eq!(subspace_distance(&s0, &s0), 0.0, epsilon = 1e-12);
        assert_relative_eq!(subspace_distance(&s0, &s1), 1.0, epsilon = 1e-12);
        let r = 1.0 / 2.0_f64.sqrt();
        let diag = orthonormalize(&[cv(&[(r, 0.0), (r, 0.0)])], None).unwrap();
        // sine of the principal angle between the axis and the diagonal
        assert_relative_eq!(
            subspace_distance(&s0, &diag),
            std::f64::consts::FRAC_PI_4.sin(),
            epsilon = 1e-12
        );
    }

    // Series oracle for exp(-itH), independent of the eigensolve path.
    fn expm_series(h: &CMatrix, t: f64) -> CMatrix {
        let d = h.nrows();
        let a = h * C64::new(0.0, -t);
        let mut term = CMatrix::identity(d, d);
        let mut acc = CMatrix::identity(d, d);
        for k in 1..60 {
            term = &term * &a / C64::new(k as f64, 0.0);
            acc += &term;
        }
        acc
    }

    #[test]
    fn evolution_at_zero_time_is_identity() {
        let h = CMatrix::from_fn(3, 3, |i, j| C64::new((i + j) as f64, 0.0));
        let u = hermitian_evolution(&h, 0.0).unwrap();
        assert!((u - CMatrix::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn evolution_of_diagonal_phases() {
        let h = CMatrix::from_diagonal(&cv(&[(0.0, 0.0), (std::f64::consts::PI, 0.0)]));
        let u = hermitian_evolution(&h, 1.0).unwrap();
        let expected = CMatrix::from_diagonal(&cv(&[(1.0, 0.0), (-1.0, 0.0)]));
        assert!((u - expected).norm() < 1e-12);
    }

    #[test]
    fn evolution_of_pauli_x_quarter_period() {
        let sx = CMatrix::from_fn(2, 2, |i, j| {
            if i != j {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let t = std::f64::consts::FRAC_PI_2;
        let u = hermitian_evolution(&sx, t).unwrap();
        assert!((&u - expm_series(&sx, t)).norm() < 1e-12);
        // closed form: exp(-i π/2 σx) = -i σx
        let expected = &sx * C64::new(0.0, -1.0);
        assert!((&u - expected).norm() < 1e-12);
    }

    #[test]
    fn evolution_rejects_non_hermitian() {
        let mut h = CMatrix::zeros(2, 2);
        h[(0, 1)] = C64::new(1.0, 0.0);
        assert!(matches!(
            hermitian_evolution(&h, 1.0),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn evolution_group_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = CMatrix::from_fn(4, 4, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let h = (&g + g.adjoint()) * C64::new(0.5, 0.0);
        let (s, t) = (0.3, 1.1);
        let u_st = hermitian_evolution(&h, s + t).unwrap();
        let u_s = hermitian_evolution(&h, s).unwrap();
        let u_t = hermitian_evolution(&h, t).unwrap();
        assert!((&u_st - &u_s * &u_t).norm() < tol::op(4));
        for u in [u_st, u_s, u_t] {
            assert!((u.adjoint() * &u - CMatrix::identity(4, 4)).norm() < tol::op(4));
        }
    }

    #[test]
    fn monotone_limit_increasing_norms() {
        let chain = vec![
            orthonormalize(&[e(3, 0)], None).unwrap(),
            orthonormalize(&[e(3, 0), e(3, 1)], None).unwrap(),
            Subspace::full(3),
        ];
        let phi = cv(&[(1.0, 0.0), (1.0, 0.0), (1.0, 0.0)]) / C64::new(3.0_f64.sqrt(), 0.0);
        let seq = monotone_projector_limit(&chain, &phi).unwrap();
        let norms: Vec<f64> = seq.iter().map(|v| v.norm()).collect();
        assert!(norms.windows(2).all(|w| w[0] <= w[1] + 1e-12));
        assert_relative_eq!(norms[2], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn monotone_limit_decreasing_hits_intersection() {
        let chain = vec![
            Subspace::full(3),
            orthonormalize(&[e(3, 0), e(3, 1)], None).unwrap(),
            orthonormalize(&[e(3, 0)], None).unwrap(),
        ];
        let phi = cv(&[(1.0, 0.0), (1.0, 0.0), (1.0, 0.0)]) / C64::new(3.0_f64.sqrt(), 0.0);
        let seq = monotone_projector_limit(&chain, &phi).unwrap();
        let expected = cv(&[(1.0 / 3.0_f64.sqrt(), 0.0), (0.0, 0.0), (0.0, 0.0)]);
        assert!((&seq[2] - expected).norm() < 1e-12);
    }

    #[test]
    fn monotone_limit_random_nested_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dim = 16;
        let u = random_unitary(dim, &mut rng);
        let dims = [2usize, 5, 9, 12, 16];
        let chain: Vec<Subspace> = dims
            .iter()
            .map(|&k| Subspace::new(u.columns(0, k).into_owned()).unwrap())
            .collect();
        let phi = CVector::from_fn(dim, |i, _| C64::new(1.0 + i as f64, -(i as f64)));
        let seq = monotone_projector_limit(&chain, &phi).unwrap();
        // the limit projector is built directly from the final subspace
        let p = chain.last().unwrap().projector();
        assert!((seq.last().unwrap() - p.apply(&phi)).norm() < 1e-9);
    }

    #[test]
    fn monotone_limit_rejects_non_nested() {
        let chain = vec![
            orthonormalize(&[e(3, 0)], None).unwrap(),
            orthonormalize(&[e(3, 1)], None).unwrap(),
        ];
        assert!(matches!(
            monotone_projector_limit(&chain, &e(3, 0)),
            Err(Error::NonNestedChain)
        ));
    }

    #[test]
    fn projector_constructor_rejects_bad_input() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = C64::new(0.5, 0.0);
        assert!(matches!(
            Projector::new(m),
            Err(Error::NotIdempotent { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        // every projector out of meet/complement/range passes validation
        #[test]
        fn meet_output_is_projector(seed in 0u64..1000, dim in 2usize..8, k1 in 1usize..4, k2 in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k1 = k1.min(dim);
            let k2 = k2.min(dim);
            let p = random_subspace(dim, k1, &mut rng).projector();
            let q = random_subspace(dim, k2, &mut rng).projector();
            let m = meet(&p, &q).unwrap();
            prop_assert!(Projector::new(m.matrix().clone()).is_ok());
            // Range(meet) ⊆ Range(p) and ⊆ Range(q)
            prop_assert!((p.matrix() * m.matrix() - m.matrix()).norm() < tol::op(dim).max(1e-9));
            prop_assert!((q.matrix() * m.matrix() - m.matrix()).norm() < tol::op(dim).max(1e-9));
        }

        // meet is commutative and associative on commuting triples
        #[test]
        fn meet_commutative_associative_on_commuting(seed in 0u64..1000, dim in 3usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_unitary(dim, &mut rng);
            let pick = |rng: &mut ChaCha8Rng| {
                let idx: Vec<usize> = (0..dim).filter(|_| rng.random::<f64>() < 0.5).collect();
                let diag = Projector::coordinates(dim, &idx).unwrap();
                Projector::new(&u * diag.matrix() * u.adjoint()).unwrap()
            };
            let (p, q, r) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
            let pq = meet(&p, &q).unwrap();
            let qp = meet(&q, &p).unwrap();
            prop_assert!((pq.matrix() - qp.matrix()).norm() < 1e-9);
            let pq_r = meet(&pq, &r).unwrap();
            let qr = meet(&q, &r).unwrap();
            let p_qr = meet(&p, &qr).unwrap();
            prop_assert!((pq_r.matrix() - p_qr.matrix()).norm() < 1e-9);
        }

        // complement is an involution
        #[test]
        fn complement_involution(seed in 0u64..1000, dim in 2usize..8, k in 0usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = k.min(dim);
            let s = random_subspace(dim, k, &mut rng);
            let cc = complement(&complement(&s).unwrap()).unwrap();
            prop_assert!(subspace_distance(&s, &cc) < tol::op(dim).max(1e-9));
        }

        // subspace_distance is a metric: symmetry and triangle inequality
        #[test]
        fn distance_is_metric(seed in 0u64..1000, dim in 2usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_subspace(dim, 1 + (seed as usize % dim.saturating_sub(1).max(1)), &mut rng);
            let b = random_subspace(dim, 1, &mut rng);
            let c = random_subspace(dim, dim.min(2), &mut rng);
            let (dab, dba) = (subspace_distance(&a, &b), subspace_distance(&b, &a));
            prop_assert!((dab - dba).abs() < 1e-12);
            prop_assert!(subspace_distance(&a, &c) <= dab + subspace_distance(&b, &c) + 1e-12);
        }

        // a projector commutes with q exactly when it maps Range(q) and
        // its complement into themselves, and symmetrically for q
        #[test]
        fn commutation_equals_subspace_invariance(seed in 0u64..500, dim in 3usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_unitary(dim, &mut rng);
            let coord = |idx: &[usize]| Projector::coordinates(dim, idx).unwrap();
            let conj = |p: &Projector, w: &CMatrix| Projector::new(w * p.matrix() * w.adjoint()).unwrap();
            let p = conj(&coord(&[0, 1]), &u);
            let commuting = seed % 2 == 0;
            let q = if commuting {
                conj(&coord(&[1, 2]), &u)
            } else {
                let v = random_unitary(dim, &mut rng);
                conj(&coord(&[1, 2]), &v)
            };
            let commutator = operator_norm(&(p.matrix() * q.matrix() - q.matrix() * p.matrix()));
            let invariant = |a: &Projector, b: &Projector| {
                // a maps Range(b) into itself
                (b.matrix() * a.matrix() * b.matrix() - a.matrix() * b.matrix()).norm() < 1e-9
            };
            let q_perp = Projector::new(CMatrix::identity(dim, dim) - q.matrix()).unwrap();
            let p_perp = Projector::new(CMatrix::identity(dim, dim) - p.matrix()).unwrap();
            let conditions = [
                invariant(&p, &q),
                invariant(&p, &q_perp),
                invariant(&q, &p),
                invariant(&q, &p_perp),
            ];
            if commutator < 1e-9 {
                prop_assert!(conditions.iter().all(|&c| c));
            } else {
                // the equivalence forces all conditions to fail together
                prop_assert!(conditions.iter().all(|&c| !c));
            }
        }

        // infimum-norm identity on a nested (downward directed) chain:
        // the projection onto the intersection attains the minimum norm
        #[test]
        fn infimum_norm_on_nested_chain(seed in 0u64..1000, dim in 4usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_unitary(dim, &mut rng);
            let dims = [dim, dim - 1, dim - 2, dim - 3];
            let chain: Vec<Subspace> = dims
                .iter()
                .map(|&k| Subspace::new(u.columns(0, k).into_owned()).unwrap())
                .collect();
            let phi = CVector::from_fn(dim, |i, _| {
                C64::new(rng.random::<f64>() - 0.5, (i as f64).cos())
            });
            let norms: Vec<f64> = chain.iter().map(|s| s.projector().apply(&phi).norm()).collect();
            let p_min = chain.last().unwrap().projector().apply(&phi).norm();
            let inf = norms.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert!((p_min - inf).abs() < 1e-9);
        }
    }
}
