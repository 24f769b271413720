use super::Matrix;
use crate::error::{Error, Result};

/// Eigendecomposition of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymEigen {
    /// Sorted in descending order.
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector for `values[i]`.
    pub vectors: Matrix,
}

const SYMMETRY_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn sym_eig(s: &Matrix) -> Result<SymEigen> {
    let n = s.rows();
    let asym = s
        .asymmetry()
        .ok_or_else(|| Error::validation(format!("sym_eig needs a square matrix, got {:?}", s.shape())))?;
    let scale = s.max_abs().max(1.0);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::validation(format!(
            "sym_eig needs a symmetric matrix (asymmetry {asym:e})"
        )));
    }
    if !s.is_finite() {
        return Err(Error::validation("sym_eig input has non-finite entries"));
    }

    let mut a = s.clone();
    let mut v = Matrix::identity(n);
    let total = s.sum_squares();

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off <= f64::EPSILON * f64::EPSILON * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps index order among equal eigenvalues.
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = v.select_columns(&order);
    Ok(SymEigen { values, vectors })
}

/// Largest singular value, from the eigenvalues of the smaller Gram matrix.
pub fn top_singular_value(a: &Matrix) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::validation("top_singular_value of an empty matrix"));
    }
    let gram = if a.cols() <= a.rows() {
        a.t_matmul(a)?
    } else {
        a.matmul_t(a)?
    };
    let eig = sym_eig(&gram)?;
    Ok(eig.values[0].max(0.0).sqrt())
}

/// Thin singular value decomposition `a = u · diag(s) · vᵀ` with
/// `r = min(rows, cols)` components, singular values descending.
#[derive(Clone, Debug)]
pub struct ThinSvd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

pub fn thin_svd(a: &Matrix) -> Result<ThinSvd> {
    if a.is_empty() {
        return Err(Error::validation("thin_svd of an empty matrix"));
    }
    if a.cols() > a.rows() {
        let t = thin_svd(&a.transpose())?;
        return Ok(ThinSvd {
            u: t.v,
            s: t.s,
            v: t.u,
        });
    }
    // rows >= cols: eigenvectors of aᵀa give v.
    let eig = sym_eig(&a.t_matmul(a)?)?;
    let v = eig.vectors;
    let s: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let av = a.matmul(&v)?;
    let r = a.cols();
    let mut u = Matrix::zeros(a.rows(), r);
    let tiny = s[0].max(1.0) * 1e-12;
    for k in 0..r {
        let orthogonalize = |mut col: Vec<f64>, u: &Matrix| {
            // Modified Gram–Schmidt, two passes.
            for _ in 0..2 {
                for j in 0..k {
                    let proj: f64 = (0..a.rows()).map(|i| u[(i, j)] * col[i]).sum();
                    for (i, c) in col.iter_mut().enumerate() {
                        *c -= proj * u[(i, j)];
                    }
                }
            }
            col
        };
        let mut col = if s[k] > tiny {
            orthogonalize(av.column(k).into_iter().map(|x| x / s[k]).collect(), &u)
        } else {
            // Any unit direction orthogonal to the previous columns works for a
            // null singular value.
            let mut best = vec![0.0; a.rows()];
            for t in 0..a.rows() {
                let mut e = vec![0.0; a.rows()];
                e[(k + t) % a.rows()] = 1.0;
                best = orthogonalize(e, &u);
                if super::norm(&best) > 0.5 {
                    break;
                }
            }
            best
        };
        if super::norm(&col) == 0.0 {
            col[k % a.rows()] = 1.0;
        }
        let nrm = super::norm(&col);
        for (i, c) in col.iter().enumerate() {
            u[(i, k)] = c / nrm;
        }
    }
    Ok(ThinSvd { u, s, v })
}
