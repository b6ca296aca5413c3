//! Dense complex linear-algebra helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
pub use num_complex::Complex64 as C64;

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);

/// `e^{iθ}`.
#[inline]
pub fn cis(theta: f64) -> C64 {
    let (s, c) = theta.sin_cos();
    C64::new(c, s)
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `max |A - A†|`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Makes `(A + A†)/2`; the result is bitwise Hermitian.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    CMatrix::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

/// Eigen-decomposition of a Hermitian matrix with ascending eigenvalues.
///
/// Ties keep the solver's output order (stable sort). Returns `None` when
/// the iteration does not converge.
pub fn eigh(m: &CMatrix) -> Option<(Vec<f64>, CMatrix)> {
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 100_000)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Some((values, vectors))
}

/// Singular values (descending) with thin left/right factors.
pub fn svd(m: &CMatrix) -> (Vec<f64>, CMatrix, CMatrix) {
    let svd = SVD::new(m.clone(), true, true);
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u_sorted = CMatrix::from_fn(u.nrows(), k, |r, c| u[(r, order[c])]);
    let vt_sorted = CMatrix::from_fn(k, v_t.ncols(), |r, c| v_t[(order[r], c)]);
    (sigma, u_sorted, vt_sorted)
}

/// Unitary polar factor `U W†` of `A = U Σ W†`.
pub fn polar_unitary(m: &CMatrix) -> CMatrix {
    let (_, u, v_t) = svd(m);
    u * v_t
}

/// Eigenphases and eigenvectors of a unitary matrix, `U = Q diag(e^{iθ}) Q†`.
///
/// A unitary matrix is normal, so its complex Schur form is diagonal up to
/// rounding. The Schur iteration can stall on degenerate or permutation-like
/// inputs; those go through the eigenvectors of `Re U + c Im U` instead,
/// which commutes with `U` and separates its eigenphases for generic `c`.
pub fn unitary_log(u: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = u.nrows();
    if n == 1 {
        return (vec![u[(0, 0)].arg()], CMatrix::identity(1, 1));
    }
    if let Some(schur) = nalgebra::Schur::try_new(u.clone(), f64::EPSILON, 200 * n) {
        let (q, t) = schur.unpack();
        if off_diagonal_max(&t) <= UNITARY_LOG_TOL {
            return ((0..n).map(|i| t[(i, i)].arg()).collect(), q);
        }
    }
    let re = (u + u.adjoint()) * C64::new(0.5, 0.0);
    let im = (u - u.adjoint()) * C64::new(0.0, -0.5);
    let mut best: Option<(f64, Vec<f64>, CMatrix)> = None;
    for c in [0.618_033_988_749_895, std::f64::consts::SQRT_2, std::f64::consts::FRAC_1_PI, std::f64::consts::E] {
        let Some((_, q)) = eigh(&hermitize(&(&re + &im * C64::new(c, 0.0)))) else {
            continue;
        };
        let t = q.adjoint() * u * &q;
        let defect = off_diagonal_max(&t);
        let phases = (0..n).map(|i| t[(i, i)].arg()).collect();
        if defect <= UNITARY_LOG_TOL {
            return (phases, q);
        }
        if best.as_ref().is_none_or(|b| defect < b.0) {
            best = Some((defect, phases, q));
        }
    }
    let (_, phases, q) = best.expect("Hermitian eigensolver failed for every pencil");
    (phases, q)
}

const UNITARY_LOG_TOL: f64 = 1e-10;

fn off_diagonal_max(t: &CMatrix) -> f64 {
    let n = t.nrows();
    (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|ij| t[ij].norm())
        .fold(0.0, f64::max)
}

/// `Q diag(e^{i s θ}) Q†`.
pub fn unitary_power(phases: &[f64], q: &CMatrix, s: f64) -> CMatrix {
    let d = DVector::from_iterator(phases.len(), phases.iter().map(|&t| cis(s * t)));
    q * CMatrix::from_diagonal(&d) * q.adjoint()
}

/// Frobenius-norm of the difference `A - B`.
pub fn frobenius_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm()
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    svd(m).0.first().copied().unwrap_or(0.0)
}

/// Random Haar-like unitary of size `n` from a Gaussian matrix.
pub fn random_unitary<R: rand::Rng>(n: usize, rng: &mut R) -> CMatrix {
    let g = random_gaussian_matrix(n, n, rng);
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    // Fix column phases so the distribution does not depend on QR sign conventions.
    let mut q = q;
    for c in 0..n {
        let d = r[(c, c)];
        if d.norm() > 0.0 {
            let ph = d / d.norm();
            for row in 0..n {
                q[(row, c)] *= ph;
            }
        }
    }
    q
}

/// Matrix with independent standard complex Gaussian entries.
pub fn random_gaussian_matrix<R: rand::Rng>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    use rand_distr::{Distribution, StandardNormal};
    let mut out = CMatrix::zeros(rows, cols);
    // Column-major fill order keeps the draw sequence independent of layout changes.
    for c in 0..cols {
        for r in 0..rows {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            out[(r, c)] = C64::new(re, im);
        }
    }
    out
}

/// Orthonormal columns spanning the same space as `m` (thin QR).
pub fn orthonormal_columns(m: &CMatrix) -> CMatrix {
    let cols = m.ncols();
    let q = m.clone().qr().q();
    q.columns(0, cols).into_owned()
}
