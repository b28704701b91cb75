//! Dense symmetric eigensolvers and singular value decomposition.
//!
//! Everything in this module is built on Jacobi rotations: `sym_eig` runs the
//! cyclic (row-by-row) Jacobi iteration, `svd` runs the one-sided Hestenes
//! variant on the columns of the input, and `gen_sym_eig` reduces the pencil
//! `(A, B)` to an ordinary symmetric problem through a Cholesky whitening of
//! `B`. Jacobi is slower than Householder tridiagonalization but it is simple,
//! accurate for the small dense matrices this crate deals in (covariance
//! matrices up to a few hundred rows), and — important for reproducible
//! experiments — fully deterministic: the sweep order is fixed and nothing is
//! pivoted on runtime data, so identical input bytes give identical output
//! bytes on every platform we target.

use ndarray::{Array1, Array2, ArrayView2};
use thiserror::Error;

/// Hard cap on Jacobi sweeps. Quadratic convergence means well-conditioned
/// inputs finish in well under ten; hitting the cap signals a malformed input.
pub const MAX_SWEEPS: usize = 64;

/// Off-diagonal Frobenius norm target for `sym_eig`, relative to `‖A‖_F`.
pub const OFF_DIAG_TOL: f64 = 1e-12;

/// Relative symmetry tolerance accepted by the symmetric solvers.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Column-orthogonality target for the one-sided SVD iteration, relative to
/// the norms of the column pair under test.
pub const SVD_ORTH_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix must be non-empty")]
    Empty,
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: A is {a}x{a}, B is {b}x{b}")]
    DimensionMismatch { a: usize, b: usize },
    #[error("matrix is not symmetric: asymmetry {asymmetry:.3e} exceeds {tolerance:.3e}")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },
    #[error("Jacobi iteration did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error("matrix is not positive definite: pivot {pivot:.3e} at row {index}")]
    NotPositiveDefinite { pivot: f64, index: usize },
}

/// Eigendecomposition of a symmetric matrix (or a symmetric-definite pencil).
///
/// `values` are sorted in descending order and `vectors` stores the matching
/// eigenvectors as columns. For the ordinary problem the columns are
/// orthonormal; for the generalized problem they are B-orthonormal
/// (`vᵀ B v = 1`).
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

/// Thin singular value decomposition `X ≈ U · diag(σ) · Vᵀ`.
///
/// With `X` of shape `m×n` and `k = min(m, n)`: `u` is `m×k` with orthonormal
/// columns, `sigma` holds the `k` singular values sorted descending (all
/// non-negative), and `v` is `n×k` with orthonormal columns.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Array2<f64>,
    pub sigma: Array1<f64>,
    pub v: Array2<f64>,
}

fn check_finite(a: &ArrayView2<f64>) -> Result<(), NumericsError> {
    if a.is_empty() {
        return Err(NumericsError::Empty);
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(NumericsError::NonFinite);
    }
    Ok(())
}

fn frobenius(a: &ArrayView2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_symmetric(a: &ArrayView2<f64>) -> Result<(), NumericsError> {
    let (rows, cols) = a.dim();
    if rows != cols {
        return Err(NumericsError::NotSquare { rows, cols });
    }
    let mut asym = 0.0;
    for i in 0..rows {
        for j in (i + 1)..cols {
            let d = a[[i, j]] - a[[j, i]];
            asym += 2.0 * d * d;
        }
    }
    let asym = asym.sqrt();
    let tolerance = SYMMETRY_TOL * frobenius(a).max(f64::MIN_POSITIVE);
    if asym > tolerance {
        return Err(NumericsError::NotSymmetric {
            asymmetry: asym,
            tolerance,
        });
    }
    Ok(())
}

/// Flip each column of `m` so that its entry of largest absolute value is
/// positive. Ties are broken by the first index attaining the maximum, which
/// keeps the convention deterministic.
fn fix_column_signs(m: &mut Array2<f64>) {
    let (rows, cols) = m.dim();
    for j in 0..cols {
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for i in 0..rows {
            let a = m[[i, j]].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if m[[best, j]] < 0.0 {
            for i in 0..rows {
                m[[i, j] ] = -m[[i, j]];
            }
        }
    }
}

fn off_diagonal_norm(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[[i, j]] * a[[i, j]];
            }
        }
    }
    s.sqrt()
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// The iteration zeroes off-diagonal entries pair by pair in a fixed
/// row-major sweep order until the off-diagonal Frobenius norm falls below
/// `OFF_DIAG_TOL · ‖A‖_F`, then sorts the eigenpairs by descending eigenvalue
/// and normalizes each eigenvector's sign (largest-magnitude entry positive).
pub fn sym_eig(a: ArrayView2<f64>) -> Result<EigenResult, NumericsError> {
    check_finite(&a)?;
    check_symmetric(&a)?;
    let n = a.nrows();
    let norm = frobenius(&a);
    let target = OFF_DIAG_TOL * norm;
    // Rotating pairs below this threshold cannot push the off-diagonal norm
    // over the target, so they are skipped to save sweeps near convergence.
    let skip_below = if n > 1 {
        target / ((n * (n - 1)) as f64).sqrt()
    } else {
        0.0
    };

    // Standard layout is forced so the sweep below can run on the raw slice
    // (a transposed input view would otherwise copy into F-order).
    let mut b = a.as_standard_layout().into_owned();
    // Eigenvectors are accumulated transposed (one per ROW) so that each
    // rotation touches two contiguous rows instead of two strided columns.
    let mut vt = Array2::<f64>::eye(n);
    if norm == 0.0 {
        // The zero matrix: eigenvalues all zero, vectors the canonical basis.
        return Ok(EigenResult {
            values: Array1::zeros(n),
            vectors: vt,
        });
    }

    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        {
            let bs = b.as_slice_mut().unwrap();
            let vs = vt.as_slice_mut().unwrap();
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = bs[p * n + q];
                    if apq.abs() <= skip_below {
                        continue;
                    }
                    rotated = true;
                    let app = bs[p * n + p];
                    let aqq = bs[q * n + q];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;

                    // B <- Jᵀ B J where J rotates the (p, q) plane. Because B
                    // stays symmetric, rotating rows p and q gives the new
                    // off-diagonal entries; the 2×2 block has closed forms and
                    // the rows are then mirrored back into columns p and q.
                    {
                        let (head, tail) = bs.split_at_mut(q * n);
                        rotate_pair(&mut head[p * n..p * n + n], &mut tail[..n], c, s);
                    }
                    bs[p * n + p] = app - t * apq;
                    bs[p * n + q] = 0.0;
                    bs[q * n + p] = 0.0;
                    bs[q * n + q] = aqq + t * apq;
                    for k in 0..n {
                        if k != p && k != q {
                            bs[k * n + p] = bs[p * n + k];
                            bs[k * n + q] = bs[q * n + k];
                        }
                    }
                    let (head, tail) = vs.split_at_mut(q * n);
                    rotate_pair(&mut head[p * n..p * n + n], &mut tail[..n], c, s);
                }
            }
        }
        if !rotated || off_diagonal_norm(&b) <= target {
            converged = true;
            break;
        }
    }
    if !converged && off_diagonal_norm(&b) > target {
        return Err(NumericsError::NoConvergence(MAX_SWEEPS));
    }

    // Sort descending by eigenvalue; ties keep their sweep order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| b[[j, j]].partial_cmp(&b[[i, i]]).unwrap().then(i.cmp(&j)));

    let values = Array1::from_iter(order.iter().map(|&i| b[[i, i]]));
    let mut vectors = Array2::<f64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vectors.column_mut(dst).assign(&vt.row(src));
    }
    fix_column_signs(&mut vectors);
    Ok(EigenResult { values, vectors })
}

/// Singular value decomposition by the one-sided (Hestenes) Jacobi method.
///
/// Columns of `X` are rotated in a fixed cyclic order until every pair is
/// orthogonal to within `SVD_ORTH_TOL`; singular values are the final column
/// norms. The column Gram matrix is refreshed from the data once per sweep
/// with a single matrix product and updated incrementally inside the sweep,
/// which keeps the per-pair test O(1) instead of O(rows). Inputs with more
/// columns than rows are factored through their transpose.
pub fn svd(x: ArrayView2<f64>) -> Result<SvdResult, NumericsError> {
    check_finite(&x)?;
    let (m, n) = x.dim();
    if m < n {
        let flipped = svd(x.t())?;
        return Ok(SvdResult {
            u: flipped.v,
            sigma: flipped.sigma,
            v: flipped.u,
        });
    }

    // Work on the transpose so that each column of X is a contiguous row.
    // Right-singular vectors are likewise accumulated transposed (one per
    // row) so every rotation below touches contiguous memory only.
    let mut at = x.t().as_standard_layout().to_owned(); // n x m
    let mut vt = Array2::<f64>::eye(n);

    let total: f64 = frobenius(&x);
    if total == 0.0 {
        let k = n;
        let mut u = Array2::<f64>::zeros((m, k));
        for j in 0..k {
            u[[j, j]] = 1.0;
        }
        return Ok(SvdResult {
            u,
            sigma: Array1::zeros(k),
            v: vt,
        });
    }

    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        // Gram matrix of the current columns (rows of `at`).
        let mut g = at.dot(&at.t());
        let mut rotated = false;
        {
            let gs = g.as_slice_mut().unwrap();
            let ats = at.as_slice_mut().unwrap();
            let vs = vt.as_slice_mut().unwrap();
            for p in 0..n {
                for q in (p + 1)..n {
                    let gpp = gs[p * n + p];
                    let gqq = gs[q * n + q];
                    let gpq = gs[p * n + q];
                    let scale = (gpp * gqq).sqrt();
                    if scale == 0.0 || gpq.abs() <= SVD_ORTH_TOL * scale {
                        continue;
                    }
                    rotated = true;
                    let theta = (gqq - gpp) / (2.0 * gpq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;

                    // Rotate the column pair (rows p and q of `at`).
                    {
                        let (head, tail) = ats.split_at_mut(q * m);
                        rotate_pair(&mut head[p * m..p * m + m], &mut tail[..m], c, s);
                    }
                    {
                        let (head, tail) = vs.split_at_mut(q * n);
                        rotate_pair(&mut head[p * n..p * n + n], &mut tail[..n], c, s);
                    }
                    // Keep the Gram matrix consistent: rotate its rows p and
                    // q, restore the 2×2 block in closed form, then mirror
                    // the rows back into columns p and q (G is symmetric).
                    {
                        let (head, tail) = gs.split_at_mut(q * n);
                        rotate_pair(&mut head[p * n..p * n + n], &mut tail[..n], c, s);
                    }
                    gs[p * n + p] = gpp - t * gpq;
                    gs[p * n + q] = 0.0;
                    gs[q * n + p] = 0.0;
                    gs[q * n + q] = gqq + t * gpq;
                    for k in 0..n {
                        if k != p && k != q {
                            gs[k * n + p] = gs[p * n + k];
                            gs[k * n + q] = gs[q * n + k];
                        }
                    }
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        // One extra orthogonality audit: accept if the final Gram matrix is
        // within tolerance even though the last sweep still rotated.
        let g = at.dot(&at.t());
        for p in 0..n {
            for q in (p + 1)..n {
                let scale = (g[[p, p]] * g[[q, q]]).sqrt();
                if scale > 0.0 && g[[p, q]].abs() > 64.0 * SVD_ORTH_TOL * scale {
                    return Err(NumericsError::NoConvergence(MAX_SWEEPS));
                }
            }
        }
    }

    // Column norms are the singular values; sort descending, stable on ties.
    let mut norms: Vec<f64> = (0..n)
        .map(|j| at.row(j).iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap().then(i.cmp(&j)));
    norms.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let sigma = Array1::from(norms);
    let sigma_max = sigma[0];
    let zero_cut = sigma_max * 1e-12;

    let mut u = Array2::<f64>::zeros((m, n));
    let mut v_sorted = Array2::<f64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        v_sorted.column_mut(dst).assign(&vt.row(src));
        if sigma[dst] > zero_cut {
            let inv = 1.0 / sigma[dst];
            for i in 0..m {
                u[[i, dst]] = at[[src, i]] * inv;
            }
        }
    }
    // Columns whose singular value vanished get deterministic orthonormal
    // fill-ins so that U stays column-orthonormal even for rank-deficient
    // inputs: walk the canonical basis and Gram-Schmidt against what exists.
    let mut candidate = 0usize;
    for dst in 0..n {
        if sigma[dst] > zero_cut {
            continue;
        }
        loop {
            assert!(candidate < m, "ran out of basis candidates completing U");
            let mut col = Array1::<f64>::zeros(m);
            col[candidate] = 1.0;
            candidate += 1;
            // Orthogonalize against every column already in place: the
            // non-null ones and the null columns filled on earlier passes.
            for j in 0..n {
                if sigma[j] <= zero_cut && j >= dst {
                    continue;
                }
                let proj: f64 = (0..m).map(|i| u[[i, j]] * col[i]).sum();
                for i in 0..m {
                    col[i] -= proj * u[[i, j]];
                }
            }
            let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.5 {
                for i in 0..m {
                    u[[i, dst]] = col[i] / norm;
                }
                break;
            }
        }
    }

    // Couple the sign convention: largest-magnitude entry of each left vector
    // positive, with the matching right vector flipped alongside.
    for j in 0..n {
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for i in 0..m {
            let a = u[[i, j]].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if u[[best, j]] < 0.0 {
            for i in 0..m {
                u[[i, j]] = -u[[i, j]];
            }
            for i in 0..n {
                v_sorted[[i, j]] = -v_sorted[[i, j]];
            }
        }
    }

    Ok(SvdResult {
        u,
        sigma,
        v: v_sorted,
    })
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix,
/// `B = L Lᵀ`. Fails with the offending pivot when `B` is not (numerically)
/// positive definite.
pub fn cholesky(b: ArrayView2<f64>) -> Result<Array2<f64>, NumericsError> {
    check_finite(&b)?;
    check_symmetric(&b)?;
    let n = b.nrows();
    let max_diag = (0..n).map(|i| b[[i, i]].abs()).fold(0.0f64, f64::max);
    let pivot_floor = max_diag * 1e-13;
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = b[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if !(s > pivot_floor) {
                    return Err(NumericsError::NotPositiveDefinite { pivot: s, index: i });
                }
                l[[i, j]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// Solve `(L Lᵀ) x = rhs` given the lower Cholesky factor `L`.
pub fn cholesky_solve(l: &Array2<f64>, rhs: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = rhs.clone();
    for i in 0..n {
        for k in 0..i {
            let t = l[[i, k]] * y[k];
            y[i] -= t;
        }
        y[i] /= l[[i, i]];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let t = l[[k, i]] * y[k];
            y[i] -= t;
        }
        y[i] /= l[[i, i]];
    }
    y
}

/// Generalized symmetric-definite eigenproblem `A v = λ B v`.
///
/// `B` is whitened through its Cholesky factor (`B = L Lᵀ`), the equivalent
/// ordinary problem `L⁻¹ A L⁻ᵀ y = λ y` is handed to [`sym_eig`], and the
/// eigenvectors are mapped back as `v = L⁻ᵀ y`. Returned vectors are
/// B-orthonormal (`vᵀ B v = 1`), sorted by descending eigenvalue, with the
/// same sign convention as [`sym_eig`].
pub fn gen_sym_eig(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<EigenResult, NumericsError> {
    check_finite(&a)?;
    check_symmetric(&a)?;
    check_finite(&b)?;
    if a.nrows() != b.nrows() {
        return Err(NumericsError::DimensionMismatch {
            a: a.nrows(),
            b: b.nrows(),
        });
    }
    let l = cholesky(b)?;
    let n = a.nrows();

    // M = L⁻¹ A L⁻ᵀ, formed by two triangular solves.
    let mut y = a.to_owned();
    // Forward-substitute L Y = A, column by column.
    for col in 0..n {
        for i in 0..n {
            let mut s = y[[i, col]];
            for k in 0..i {
                s -= l[[i, k]] * y[[k, col]];
            }
            y[[i, col]] = s / l[[i, i]];
        }
    }
    // Forward-substitute L M = Yᵀ (valid because A is symmetric).
    let mut m = y.t().to_owned();
    for col in 0..n {
        for i in 0..n {
            let mut s = m[[i, col]];
            for k in 0..i {
                s -= l[[i, k]] * m[[k, col]];
            }
            m[[i, col]] = s / l[[i, i]];
        }
    }
    // Kill the rounding asymmetry before the symmetric solver sees it.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[[i, j]] + m[[j, i]]);
            m[[i, j]] = avg;
            m[[j, i]] = avg;
        }
    }

    let eig = sym_eig(m.view())?;

    // Map the whitened eigenvectors back: v = L⁻ᵀ y (back-substitution).
    let mut vectors = eig.vectors;
    for col in 0..n {
        for i in (0..n).rev() {
            let mut s = vectors[[i, col]];
            for k in (i + 1)..n {
                s -= l[[k, i]] * vectors[[k, col]];
            }
            vectors[[i, col]] = s / l[[i, i]];
        }
    }
    fix_column_signs(&mut vectors);
    Ok(EigenResult {
        values: eig.values,
        vectors,
    })
}

fn rotate_pair(a: &mut [f64], b: &mut [f64], c: f64, s: f64) {
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let xp = c * *x - s * *y;
        let yq = s * *x + c * *y;
        *x = xp;
        *y = yq;
    }
}
