//! Operations on the manifold of symmetric positive-definite matrices.
//!
//! Every matrix function (power, logarithm, exponential) goes through the
//! spectral decomposition of a symmetric matrix. The distance is the
//! affine-invariant one, `sqrt(sum_c log^2 lambda_c)` where `lambda_c` are the
//! eigenvalues of `A^{-1/2} B A^{-1/2}`; it is invariant under congruence
//! `S -> V^T S V` and under inversion.
//!
//! [`SpdMatrix`] caches its eigendecomposition, so repeated square roots and
//! logarithms of the same point cost one decomposition.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative tolerance for the symmetry check on construction.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Eigenvalues at or below `PD_FLOOR * lambda_max` make a matrix non-PD.
pub const PD_FLOOR: f64 = 1e-12;

/// A real symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    /// Validates squareness and symmetry up to [`SYMMETRY_TOL`] relative to
    /// the largest absolute entry. The stored matrix is re-symmetrized.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dims("square matrix", format!("{}x{}", m.nrows(), m.ncols())));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("matrix has non-finite entries".into()));
        }
        let scale = m.amax();
        let asymmetry = (&m - m.transpose()).amax();
        if asymmetry > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric { asymmetry, scale });
        }
        Ok(Self::symmetrized(m))
    }

    /// `(A + A^T) / 2`, for products that are symmetric analytically.
    pub fn symmetrized(m: DMatrix<f64>) -> Self {
        assert!(m.is_square(), "symmetrized: matrix must be square");
        let t = m.transpose();
        SymmetricMatrix((m + t) * 0.5)
    }

    pub fn zeros(dim: usize) -> Self {
        SymmetricMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymmetricMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }
}

/// Spectral decomposition `V diag(lambda) V^T` with eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: DVector<f64>,
    /// Column `k` pairs with `eigenvalues[k]`.
    pub eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    /// `V diag(f(lambda)) V^T`, re-symmetrized.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.eigenvalues[k]);
        }
        let m = scaled * v.transpose();
        SymmetricMatrix::symmetrized(m).0
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.map(|l| l)
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }
}

/// Full symmetric eigendecomposition (Householder tridiagonalization followed
/// by implicit symmetric QR), sorted ascending.
pub fn sym_eig(m: &SymmetricMatrix) -> EigenDecomposition {
    let n = m.dim();
    if n == 0 {
        return EigenDecomposition {
            eigenvalues: DVector::zeros(0),
            eigenvectors: DMatrix::zeros(0, 0),
        };
    }
    let se = SymmetricEigen::new(m.0.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| se.eigenvalues[k]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &se.eigenvectors.column(src));
    }
    EigenDecomposition {
        eigenvalues,
        eigenvectors,
    }
}

fn check_pd(eig: &EigenDecomposition) -> Result<()> {
    if eig.eigenvalues.is_empty() {
        return Err(Error::Domain("empty matrix".into()));
    }
    let (lo, hi) = (eig.min(), eig.max());
    if !(hi > 0.0) || !(lo > PD_FLOOR * hi) || !hi.is_finite() {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: lo,
            max_eigenvalue: hi,
        });
    }
    Ok(())
}

/// A symmetric positive-definite matrix: a point on the manifold.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    mat: DMatrix<f64>,
    eig: EigenDecomposition,
}

impl PartialEq for SpdMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.mat == other.mat
    }
}

impl SpdMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        Self::from_symmetric(SymmetricMatrix::new(m)?)
    }

    pub fn from_symmetric(s: SymmetricMatrix) -> Result<Self> {
        let eig = sym_eig(&s);
        check_pd(&eig)?;
        Ok(SpdMatrix { mat: s.0, eig })
    }

    pub fn identity(dim: usize) -> Self {
        SpdMatrix {
            mat: DMatrix::identity(dim, dim),
            eig: EigenDecomposition {
                eigenvalues: DVector::from_element(dim, 1.0),
                eigenvectors: DMatrix::identity(dim, dim),
            },
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::from_symmetric(SymmetricMatrix::from_diagonal(diag))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn eigen(&self) -> &EigenDecomposition {
        &self.eig
    }

    pub fn to_symmetric(&self) -> SymmetricMatrix {
        SymmetricMatrix(self.mat.clone())
    }

    pub fn powf(&self, t: f64) -> Result<SpdMatrix> {
        spd_power(self, t)
    }

    pub fn sqrt(&self) -> DMatrix<f64> {
        self.eig.map(f64::sqrt)
    }

    pub fn inv_sqrt(&self) -> DMatrix<f64> {
        self.eig.map(|l| 1.0 / l.sqrt())
    }

    pub fn inverse(&self) -> Result<SpdMatrix> {
        spd_power(self, -1.0)
    }

    pub fn log(&self) -> SymmetricMatrix {
        spd_log(self)
    }

    /// `V^T S V`. Fails if `V` is singular (result not PD).
    pub fn congruence(&self, v: &DMatrix<f64>) -> Result<SpdMatrix> {
        if v.nrows() != self.dim() {
            return Err(Error::dims(self.dim(), v.nrows()));
        }
        let m = v.transpose() * &self.mat * v;
        SpdMatrix::from_symmetric(SymmetricMatrix::symmetrized(m))
    }

    fn check_same_dim(&self, other: &SpdMatrix) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::dims(
                format!("{0}x{0}", self.dim()),
                format!("{0}x{0}", other.dim()),
            ));
        }
        Ok(())
    }

    /// `A^{-1/2} B A^{-1/2}` given `A^{-1/2}`.
    fn whiten(inv_sqrt: &DMatrix<f64>, b: &DMatrix<f64>) -> SymmetricMatrix {
        SymmetricMatrix::symmetrized(inv_sqrt * b * inv_sqrt)
    }
}

/// `V diag(lambda^t) V^T`. `t = -1` is the inverse, `t = 1/2` the principal root.
pub fn spd_power(s: &SpdMatrix, t: f64) -> Result<SpdMatrix> {
    if !t.is_finite() {
        return Err(Error::Domain(format!("non-finite exponent {t}")));
    }
    let m = s.eig.map(|l| l.powf(t));
    SpdMatrix::from_symmetric(SymmetricMatrix(m))
}

pub fn spd_log(s: &SpdMatrix) -> SymmetricMatrix {
    SymmetricMatrix(s.eig.map(f64::ln))
}

pub fn spd_exp(m: &SymmetricMatrix) -> Result<SpdMatrix> {
    let eig = sym_eig(m);
    SpdMatrix::from_symmetric(SymmetricMatrix(eig.map(f64::exp)))
}

/// Affine-invariant Riemannian distance.
pub fn riemannian_distance(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    a.check_same_dim(b)?;
    let w = SpdMatrix::whiten(&a.inv_sqrt(), &b.mat);
    let eig = sym_eig(&w);
    check_pd(&eig)?;
    Ok(eig.eigenvalues.iter().map(|l| l.ln().powi(2)).sum::<f64>().sqrt())
}

/// Point at parameter `t` on the geodesic from `a` (t = 0) to `b` (t = 1):
/// `A^{1/2} (A^{-1/2} B A^{-1/2})^t A^{1/2}`. The endpoints are returned
/// as exact copies of the inputs.
pub fn geodesic(a: &SpdMatrix, b: &SpdMatrix, t: f64) -> Result<SpdMatrix> {
    a.check_same_dim(b)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("geodesic parameter {t} outside [0, 1]")));
    }
    if t == 0.0 {
        return Ok(a.clone());
    }
    if t == 1.0 {
        return Ok(b.clone());
    }
    let sqrt = a.sqrt();
    let w = SpdMatrix::whiten(&a.inv_sqrt(), &b.mat);
    let eig = sym_eig(&w);
    check_pd(&eig)?;
    let wt = eig.map(|l| l.powf(t));
    SpdMatrix::from_symmetric(SymmetricMatrix::symmetrized(&sqrt * wt * &sqrt))
}

/// Stopping rule for [`frechet_mean`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanConfig {
    /// Threshold on the Frobenius norm of the mean tangent vector.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MeanConfig {
    fn default() -> Self {
        MeanConfig {
            tol: 1e-9,
            max_iter: 50,
        }
    }
}

impl MeanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::InvalidConfig(format!("mean tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("mean max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FrechetMean {
    pub mean: SpdMatrix,
    /// Number of update steps taken (accepted or rejected).
    pub iterations: usize,
    pub gradient_norm: f64,
}

/// Tangent mean and cost at a candidate point.
struct MeanState {
    point: SpdMatrix,
    tangent: DMatrix<f64>,
    cost: f64,
    gradient_norm: f64,
}

fn mean_state(point: SpdMatrix, matrices: &[SpdMatrix]) -> Result<MeanState> {
    let inv_sqrt = point.inv_sqrt();
    let n = point.dim();
    let mut tangent = DMatrix::zeros(n, n);
    let mut cost = 0.0;
    for m in matrices {
        let w = SpdMatrix::whiten(&inv_sqrt, &m.mat);
        let eig = sym_eig(&w);
        check_pd(&eig)?;
        cost += eig.eigenvalues.iter().map(|l| l.ln().powi(2)).sum::<f64>();
        tangent += eig.map(f64::ln);
    }
    let count = matrices.len() as f64;
    tangent /= count;
    cost /= count;
    let gradient_norm = tangent.norm();
    Ok(MeanState {
        point,
        tangent,
        cost,
        gradient_norm,
    })
}

/// Fréchet (geometric) mean: the minimizer of summed squared Riemannian
/// distances.
///
/// Starts from the arithmetic mean and iterates
/// `M <- M^{1/2} exp(step * T) M^{1/2}` where `T` is the mean of
/// `log(M^{-1/2} S_i M^{-1/2})`. The step starts at 1 and is halved whenever
/// a proposal fails to decrease the cost.
pub fn frechet_mean(matrices: &[SpdMatrix], cfg: &MeanConfig) -> Result<FrechetMean> {
    cfg.validate()?;
    let first = matrices
        .first()
        .ok_or_else(|| Error::Domain("Fréchet mean of an empty set".into()))?;
    for m in &matrices[1..] {
        first.check_same_dim(m)?;
    }
    if matrices.len() == 1 {
        return Ok(FrechetMean {
            mean: first.clone(),
            iterations: 0,
            gradient_norm: 0.0,
        });
    }

    let mut sum = DMatrix::zeros(first.dim(), first.dim());
    for m in matrices {
        sum += &m.mat;
    }
    let start = SpdMatrix::from_symmetric(SymmetricMatrix::symmetrized(sum / matrices.len() as f64))?;
    let mut state = mean_state(start, matrices)?;
    let mut step = 1.0;
    let mut iterations = 0;

    while state.gradient_norm >= cfg.tol {
        if iterations == cfg.max_iter {
            return Err(Error::NoConvergence {
                iterations,
                gradient_norm: state.gradient_norm,
            });
        }
        iterations += 1;
        let sqrt = state.point.sqrt();
        let tangent = SymmetricMatrix::symmetrized(&state.tangent * step);
        let exp = sym_eig(&tangent).map(f64::exp);
        let proposal = SpdMatrix::from_symmetric(SymmetricMatrix::symmetrized(&sqrt * exp * &sqrt))?;
        let next = mean_state(proposal, matrices)?;
        // Near the optimum the cost change drops below round-off, so a
        // stalled cost with a shrinking gradient still counts as progress.
        let slack = 1e-12 * state.cost.max(f64::MIN_POSITIVE);
        if next.cost < state.cost || (next.cost <= state.cost + slack && next.gradient_norm < state.gradient_norm) {
            state = next;
        } else {
            step *= 0.5;
        }
    }

    Ok(FrechetMean {
        mean: state.point,
        iterations,
        gradient_norm: state.gradient_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> SpdMatrix {
        let a = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(rng));
        let m: DMatrix<f64> = &a * a.transpose() / n as f64 + DMatrix::identity(n, n) * 0.1;
        SpdMatrix::from_symmetric(SymmetricMatrix::symmetrized(m)).unwrap()
    }

    fn rel_frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn eig_identity_and_diagonal() {
        let e = sym_eig(&SymmetricMatrix::from_diagonal(&[1.0, 1.0, 1.0]));
        assert_eq!(e.eigenvalues.as_slice(), &[1.0, 1.0, 1.0]);
        let vtv = e.eigenvectors.transpose() * &e.eigenvectors;
        assert!((vtv - DMatrix::identity(3, 3)).norm() < 1e-12);

        let e = sym_eig(&SymmetricMatrix::from_diagonal(&[4.0, 1.0]));
        assert_abs_diff_eq!(e.eigenvalues[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.eigenvalues[1], 4.0, epsilon = 1e-14);
    }

    #[test]
    fn eig_two_by_two_closed_form() {
        // (a + c +- sqrt((a - c)^2 + 4 b^2)) / 2
        let (a, b, c) = (2.0_f64, 1.0_f64, 2.0_f64);
        let disc = ((a - c).powi(2) + 4.0 * b * b).sqrt();
        let expected = [(a + c - disc) / 2.0, (a + c + disc) / 2.0];
        let m = SymmetricMatrix::new(DMatrix::from_row_slice(2, 2, &[a, b, b, c])).unwrap();
        let e = sym_eig(&m);
        assert_abs_diff_eq!(e.eigenvalues[0], expected[0], epsilon = 1e-14);
        assert_abs_diff_eq!(e.eigenvalues[1], expected[1], epsilon = 1e-14);
        assert_abs_diff_eq!(expected[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(expected[1], 3.0, epsilon = 1e-15);
    }

    #[test]
    fn eig_reconstruction_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1, 2, 5, 16] {
            let s = random_spd(&mut rng, n).to_symmetric();
            let e = sym_eig(&s);
            assert!(e.eigenvalues.as_slice().windows(2).all(|w| w[0] <= w[1]));
            assert!(rel_frob(&e.reconstruct(), s.as_matrix()) < 1e-10);
            let vtv = e.eigenvectors.transpose() * &e.eigenvectors;
            assert!((vtv - DMatrix::identity(n, n)).norm() < 1e-10);
        }
    }

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(SymmetricMatrix::new(m), Err(Error::NotSymmetric { .. })));
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(SpdMatrix::new(m), Err(Error::NotPositiveDefinite { .. })));
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-13]);
        assert!(matches!(SpdMatrix::new(m), Err(Error::NotPositiveDefinite { .. })));
        assert!(SpdMatrix::new(DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn power_examples() {
        let id = SpdMatrix::identity(3);
        for t in [-2.0, -0.5, 0.3, 1.0, 7.0] {
            assert_eq!(spd_power(&id, t).unwrap().as_matrix(), id.as_matrix());
        }
        let d = SpdMatrix::from_diagonal(&[4.0, 9.0]).unwrap();
        let r = spd_power(&d, 0.5).unwrap();
        assert!((r.as_matrix() - DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]))).norm() < 1e-14);
        let inv = spd_power(&d, -1.0).unwrap();
        assert_abs_diff_eq!(inv.as_matrix()[(0, 0)], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(inv.as_matrix()[(1, 1)], 1.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn log_exp_examples() {
        let l = spd_log(&SpdMatrix::identity(4));
        assert_eq!(l.frobenius_norm(), 0.0);
        let e = std::f64::consts::E;
        let l = spd_log(&SpdMatrix::from_diagonal(&[e, e * e]).unwrap());
        assert_abs_diff_eq!(l.as_matrix()[(0, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(l.as_matrix()[(1, 1)], 2.0, epsilon = 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let s = random_spd(&mut rng, 6);
            let back = spd_exp(&spd_log(&s)).unwrap();
            assert!(rel_frob(back.as_matrix(), s.as_matrix()) < 1e-9);
        }
    }

    #[test]
    fn distance_examples() {
        let id = SpdMatrix::identity(2);
        assert_eq!(riemannian_distance(&id, &id).unwrap(), 0.0);
        let d = SpdMatrix::from_diagonal(&[4.0, 1.0]).unwrap();
        // commuting diagonals: sqrt(sum log^2(b_i / a_i))
        assert_abs_diff_eq!(riemannian_distance(&id, &d).unwrap(), 4f64.ln(), epsilon = 1e-14);
        assert!(riemannian_distance(&id, &SpdMatrix::identity(3)).is_err());
    }

    #[test]
    fn geodesic_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_spd(&mut rng, 4);
        let b = random_spd(&mut rng, 4);
        assert_eq!(geodesic(&a, &b, 0.0).unwrap(), a);
        assert_eq!(geodesic(&a, &b, 1.0).unwrap(), b);
        assert!(matches!(geodesic(&a, &b, 1.5), Err(Error::Domain(_))));
        assert!(matches!(geodesic(&a, &b, -0.1), Err(Error::Domain(_))));
        assert!(geodesic(&a, &b, f64::NAN).is_err());

        let one = SpdMatrix::from_diagonal(&[1.0]).unwrap();
        let four = SpdMatrix::from_diagonal(&[4.0]).unwrap();
        assert_abs_diff_eq!(geodesic(&one, &four, 0.5).unwrap().as_matrix()[(0, 0)], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn mean_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = random_spd(&mut rng, 5);
        let m = frechet_mean(std::slice::from_ref(&s), &MeanConfig::default()).unwrap();
        assert_eq!(m.mean, s);

        let a = SpdMatrix::from_diagonal(&[1.0, 8.0]).unwrap();
        let b = SpdMatrix::from_diagonal(&[4.0, 2.0]).unwrap();
        let m = frechet_mean(&[a, b], &MeanConfig::default()).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0]));
        assert!((m.mean.as_matrix() - expected).norm() < 1e-8);
        assert!(m.gradient_norm < 1e-9);

        assert!(matches!(frechet_mean(&[], &MeanConfig::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn mean_reports_non_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let set: Vec<_> = (0..6).map(|_| random_spd(&mut rng, 6)).collect();
        let cfg = MeanConfig { tol: 1e-300, max_iter: 3 };
        match frechet_mean(&set, &cfg) {
            Err(Error::NoConvergence { iterations, gradient_norm }) => {
                assert_eq!(iterations, 3);
                assert!(gradient_norm > 0.0);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }
}
