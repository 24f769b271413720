use crate::datasets::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::{sym_eig, top_singular_value, Matrix};
use crate::modes::MdlNetwork;
use crate::training::Model;

/// Which pattern matrix of a layer to measure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatternSide {
    /// `ξ`, living in the layer's output space.
    Downstream,
    /// `ξ̂`, living in the layer's input space.
    Upstream,
}

/// Mean Euclidean distance of the columns of `patterns` from their centroid.
pub fn pattern_dispersion(patterns: &Matrix) -> f64 {
    let (n, p) = patterns.shape();
    if p == 0 {
        return 0.0;
    }
    let centroid: Vec<f64> = (0..n).map(|i| patterns.row(i).iter().sum::<f64>() / p as f64).collect();
    (0..p)
        .map(|a| {
            (0..n)
                .map(|i| (patterns[(i, a)] - centroid[i]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .sum::<f64>()
        / p as f64
}

/// Pattern-cloud dispersion of every mode layer.
pub fn dispersion_profile(net: &MdlNetwork, side: PatternSide) -> Vec<f64> {
    (0..net.num_layers())
        .map(|l| {
            let layer = net.layer(l);
            pattern_dispersion(match side {
                PatternSide::Downstream => layer.xi,
                PatternSide::Upstream => layer.xi_hat,
            })
        })
        .collect()
}

/// Principal subspace of one class's activations.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassSubspace {
    /// `N × K`, orthonormal columns.
    pub basis: Matrix,
    pub k: usize,
    /// Set when the activations have no variance; the basis is then `e_1`.
    pub degenerate: bool,
}

/// Leading eigenvectors of the activation covariance whose eigenvalues
/// account for at least `threshold` of the total variance.
pub fn class_subspace(activations: &Matrix, threshold: f64) -> Result<ClassSubspace> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::validation(format!("variance threshold must be in (0, 1), got {threshold}")));
    }
    if activations.rows() < 2 {
        return Err(Error::validation("class_subspace needs at least two samples"));
    }
    let n = activations.cols();
    let cov = activations.row_covariance()?;
    let total = cov.trace();
    if !(total > 0.0) {
        let mut basis = Matrix::zeros(n, 1);
        basis[(0, 0)] = 1.0;
        return Ok(ClassSubspace {
            basis,
            k: 1,
            degenerate: true,
        });
    }
    let eig = sym_eig(&cov)?;
    // Relative slack keeps exactly-equal spectra from tipping over by rounding.
    let target = threshold * total * (1.0 - 1e-12);
    let mut cum = 0.0;
    let mut k = n;
    for (i, &v) in eig.values.iter().enumerate() {
        cum += v.max(0.0);
        if cum >= target {
            k = i + 1;
            break;
        }
    }
    let cols: Vec<usize> = (0..k).collect();
    Ok(ClassSubspace {
        basis: eig.vectors.select_columns(&cols),
        k,
        degenerate: false,
    })
}

/// Cosine of the smallest principal angle: `σ_max(Q₁ᵀ Q₂)`, clamped to `[0, 1]`.
pub fn subspace_overlap(q1: &Matrix, q2: &Matrix) -> Result<f64> {
    if q1.rows() != q2.rows() {
        return Err(Error::Shape {
            op: "subspace_overlap",
            left: q1.shape(),
            right: q2.shape(),
        });
    }
    Ok(top_singular_value(&q1.t_matmul(q2)?)?.clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerOverlap {
    /// Activation index: 0 is the input, `1..L-1` the hidden layers.
    pub layer: usize,
    pub mean: f64,
    /// `(class a, class b, overlap)` for every unordered pair.
    pub pairs: Vec<(usize, usize, f64)>,
    /// `K` per present class.
    pub dims: Vec<(usize, usize)>,
}

pub struct OverlapOptions {
    pub threshold: f64,
    /// Also analyze the raw input layer (slow for wide inputs).
    pub include_input: bool,
}

impl Default for OverlapOptions {
    fn default() -> Self {
        OverlapOptions {
            threshold: 0.8,
            include_input: false,
        }
    }
}

/// Mean pairwise class-subspace overlap at each hidden layer.
pub fn overlap_profile<M: Model + ?Sized>(model: &M, ds: &LabeledDataset, opts: &OverlapOptions) -> Result<Vec<LayerOverlap>> {
    let acts = model.activations(ds.inputs())?;
    let first = if opts.include_input { 0 } else { 1 };
    let last_hidden = acts.len() - 2;
    let classes: Vec<(usize, Vec<usize>)> = (0..ds.class_count())
        .filter_map(|c| {
            let idx = ds.indices_of_class(c);
            if idx.len() < 2 {
                log::warn!("class {c} has {} samples; skipped in overlap profile", idx.len());
                None
            } else {
                Some((c, idx))
            }
        })
        .collect();
    let mut out = Vec::new();
    for layer in first..=last_hidden {
        let bases = classes
            .iter()
            .map(|(c, idx)| Ok((*c, class_subspace(&acts[layer].select_rows(idx), opts.threshold)?)))
            .collect::<Result<Vec<_>>>()?;
        let mut pairs = Vec::new();
        for i in 0..bases.len() {
            for j in i + 1..bases.len() {
                let o = subspace_overlap(&bases[i].1.basis, &bases[j].1.basis)?;
                pairs.push((bases[i].0, bases[j].0, o));
            }
        }
        if pairs.is_empty() {
            continue;
        }
        let mean = pairs.iter().map(|p| p.2).sum::<f64>() / pairs.len() as f64;
        out.push(LayerOverlap {
            layer,
            mean,
            pairs,
            dims: bases.iter().map(|(c, b)| (*c, b.k)).collect(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dot, gaussian_matrix, RngState};

    #[test]
    fn dispersion_cases() {
        assert_eq!(pattern_dispersion(&Matrix::filled(3, 4, 0.7)), 0.0);
        let antipodal = Matrix::from_rows(&[vec![1.0, -1.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(pattern_dispersion(&antipodal), 1.0);
    }

    #[test]
    fn line_cloud_has_one_direction() {
        let mut rng = RngState::new(1);
        let dir = [0.6, 0.8, 0.0];
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                let t = rng.normal();
                dir.iter().map(|d| d * t + 1e-4 * rng.normal()).collect()
            })
            .collect();
        let s = class_subspace(&Matrix::from_rows(&rows).unwrap(), 0.8).unwrap();
        assert_eq!(s.k, 1);
        assert!((dot(&s.basis.column(0), &dir).abs() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn isotropic_cloud_threshold() {
        // Rows ±e_i give an exactly isotropic covariance.
        let mut rows = Vec::new();
        for i in 0..5 {
            for sign in [1.0, -1.0] {
                let mut r = vec![0.0; 5];
                r[i] = sign;
                rows.push(r);
            }
        }
        let s = class_subspace(&Matrix::from_rows(&rows).unwrap(), 0.8).unwrap();
        assert_eq!(s.k, 4);
        let gram = s.basis.t_matmul(&s.basis).unwrap();
        assert!(gram.sub(&Matrix::identity(4)).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn zero_variance_is_flagged() {
        let s = class_subspace(&Matrix::filled(4, 3, 2.0), 0.8).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.k, 1);
        assert!(class_subspace(&Matrix::filled(1, 3, 2.0), 0.8).is_err());
    }

    #[test]
    fn overlap_cases() {
        let e = Matrix::identity(3);
        let q1 = e.select_columns(&[0, 1]);
        let q2 = e.select_columns(&[2]);
        assert!((subspace_overlap(&q1, &q1).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(subspace_overlap(&q1, &q2).unwrap(), 0.0);
        let mut rng = RngState::new(2);
        let a = gaussian_matrix(3, 1, &mut rng).unwrap();
        let b = gaussian_matrix(3, 1, &mut rng).unwrap();
        let (ua, ub) = (a.scaled(1.0 / a.frobenius_norm()), b.scaled(1.0 / b.frobenius_norm()));
        let cos = dot(ua.as_slice(), ub.as_slice()).abs();
        assert!((subspace_overlap(&ua, &ub).unwrap() - cos).abs() < 1e-12);
        assert!(subspace_overlap(&q1, &Matrix::identity(2)).is_err());
    }
}
