//! Online learning of a two-layer committee machine whose hidden weights are
//! mode-factorized: a fixed teacher labels Gaussian inputs, a student of the
//! same form learns its upstream patterns by one-pass SGD, and the order
//! parameters of the local fields obey closed ODEs in the large-`d` limit.

mod integrals;
mod ode;
mod simulate;
mod specialization;

pub use integrals::{i2, i3, i4, sigma, sigma_prime};
pub use ode::{integrate, mse_from_order_params, ode_rhs, OdeConfig, Trajectory, TrajectoryPoint};
pub use simulate::{empirical_mse, simulate_online, time_to_threshold, SimConfig, SimPoint, SimTrajectory};
pub use specialization::{specialization_report, SpecializationReport};

use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, Matrix, RngState};

/// Mode count `max(1, round(α ln d))`.
pub fn mode_count(alpha: f64, d: usize) -> usize {
    ((alpha * (d as f64).ln()).round() as usize).max(1)
}

/// Factors of one committee machine: local fields `λ = ξ Σ ξ̂ᵀ x / √d`.
#[derive(Clone, Debug, PartialEq)]
pub struct CommitteeFactors {
    /// Hidden-unit patterns `ξ`, `hidden × p`.
    pub xi: Matrix,
    pub sigma: Vec<f64>,
    /// Input patterns `ξ̂`, `d × p`.
    pub xi_hat: Matrix,
}

impl CommitteeFactors {
    pub fn hidden(&self) -> usize {
        self.xi.rows()
    }

    /// `ξ Σ ξ̂ᵀ`, `hidden × d`.
    pub fn composed(&self) -> Matrix {
        self.xi
            .scale_columns(&self.sigma)
            .and_then(|m| m.matmul_t(&self.xi_hat))
            .expect("factor shapes are consistent")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TeacherStudent {
    pub d: usize,
    pub p: usize,
    pub teacher: CommitteeFactors,
    /// Only `xi_hat` is ever trained.
    pub student: CommitteeFactors,
}

/// Draws the teacher (`ξ*`, `Σ*/√p`, `ξ̂*`) and a fresh student `ξ̂`; the
/// student copies `ξ*` and `Σ*` when `m = k`, otherwise it draws its own.
pub fn init_teacher_student(d: usize, k: usize, m: usize, alpha: f64, rng: &mut RngState) -> Result<TeacherStudent> {
    if d < 2 || k == 0 || m == 0 {
        return Err(Error::Config(format!("teacher-student needs d >= 2 and k, m >= 1 (d={d}, k={k}, m={m})")));
    }
    if !(alpha > 0.0) {
        return Err(Error::Config(format!("mode load must be > 0, got {alpha}")));
    }
    let p = mode_count(alpha, d);
    let scale = 1.0 / (p as f64).sqrt();
    let draw_outer = |rows: usize, rng: &mut RngState| -> Result<(Matrix, Vec<f64>)> {
        let xi = gaussian_matrix(rows, p, rng)?;
        let sigma = (0..p).map(|_| rng.normal() * scale).collect();
        Ok((xi, sigma))
    };
    let (xi_t, sigma_t) = draw_outer(k, rng)?;
    let xi_hat_t = gaussian_matrix(d, p, rng)?;
    let xi_hat_s = gaussian_matrix(d, p, rng)?;
    let (xi_s, sigma_s) = if m == k {
        (xi_t.clone(), sigma_t.clone())
    } else {
        draw_outer(m, rng)?
    };
    Ok(TeacherStudent {
        d,
        p,
        teacher: CommitteeFactors {
            xi: xi_t,
            sigma: sigma_t,
            xi_hat: xi_hat_t,
        },
        student: CommitteeFactors {
            xi: xi_s,
            sigma: sigma_s,
            xi_hat: xi_hat_s,
        },
    })
}

/// Second moments of the local fields: `Q = E[λλᵀ]`, `M = E[λλ*ᵀ]`, `P = E[λ*λ*ᵀ]`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderParams {
    pub q: Matrix,
    pub m: Matrix,
    pub p: Matrix,
}

impl OrderParams {
    pub fn student_units(&self) -> usize {
        self.q.rows()
    }

    pub fn teacher_units(&self) -> usize {
        self.p.rows()
    }

    /// `[[Q, M], [Mᵀ, P]]`: student fields first, then teacher fields.
    pub fn omega(&self) -> Matrix {
        let (m, k) = (self.student_units(), self.teacher_units());
        let mut o = Matrix::zeros(m + k, m + k);
        for i in 0..m {
            for j in 0..m {
                o[(i, j)] = self.q[(i, j)];
            }
            for r in 0..k {
                o[(i, m + r)] = self.m[(i, r)];
                o[(m + r, i)] = self.m[(i, r)];
            }
        }
        for r in 0..k {
            for s in 0..k {
                o[(m + r, m + s)] = self.p[(r, s)];
            }
        }
        o
    }
}

pub fn order_params(ts: &TeacherStudent) -> OrderParams {
    let d = ts.d as f64;
    let ws = ts.student.composed();
    let wt = ts.teacher.composed();
    OrderParams {
        q: ws.matmul_t(&ws).expect("shapes").scaled(1.0 / d),
        m: ws.matmul_t(&wt).expect("shapes").scaled(1.0 / d),
        p: wt.matmul_t(&wt).expect("shapes").scaled(1.0 / d),
    }
}

/// `C = ξ Σ² ξᵀ` of the student, the fixed metric of the update.
pub fn mode_metric(ts: &TeacherStudent) -> Matrix {
    let sq: Vec<f64> = ts.student.sigma.iter().map(|s| s * s).collect();
    ts.student
        .xi
        .scale_columns(&sq)
        .and_then(|m| m.matmul_t(&ts.student.xi))
        .expect("shapes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_count_rule() {
        assert_eq!(mode_count(1.0, 100), 5);
        assert_eq!(mode_count(0.01, 100), 1);
        assert_eq!(mode_count(2.0, 100), 9);
    }

    #[test]
    fn student_copies_teacher_outer_factors() {
        let ts = init_teacher_student(50, 3, 3, 1.0, &mut RngState::new(1)).unwrap();
        assert_eq!(ts.student.xi, ts.teacher.xi);
        assert_eq!(ts.student.sigma, ts.teacher.sigma);
        assert_ne!(ts.student.xi_hat, ts.teacher.xi_hat);
        assert_eq!(ts, init_teacher_student(50, 3, 3, 1.0, &mut RngState::new(1)).unwrap());
    }

    #[test]
    fn teacher_weights_are_order_one() {
        // Averaged over draws; a single draw's variance is dominated by the p draws of Σ.
        let mut total = 0.0;
        let draws = 40;
        for seed in 0..draws {
            let ts = init_teacher_student(1000, 2, 2, 1.0, &mut RngState::new(seed)).unwrap();
            let w = ts.teacher.composed();
            total += w.sum_squares() / (w.rows() * w.cols()) as f64;
        }
        let var = total / draws as f64;
        assert!((var - 1.0).abs() < 0.2, "{var}");
    }

    #[test]
    fn order_parameter_identities() {
        let mut ts = init_teacher_student(40, 2, 2, 1.0, &mut RngState::new(2)).unwrap();
        ts.student.xi_hat = ts.teacher.xi_hat.clone();
        let op = order_params(&ts);
        assert_eq!(op.q, op.m);
        assert_eq!(op.m, op.p);
        ts.student.xi_hat = Matrix::zeros(40, ts.p);
        let op = order_params(&ts);
        assert_eq!(op.q.max_abs(), 0.0);
        assert_eq!(op.m.max_abs(), 0.0);
        let o = op.omega();
        assert_eq!(o.shape(), (4, 4));
        assert_eq!(o.asymmetry(), Some(0.0));
    }

    #[test]
    fn q_matches_empirical_field_covariance() {
        let ts = init_teacher_student(30, 2, 2, 1.0, &mut RngState::new(3)).unwrap();
        let op = order_params(&ts);
        let w = ts.student.composed();
        let mut rng = RngState::new(4);
        let n = 200_000;
        let mut sum = [[0.0; 2]; 2];
        let mut sq = [[0.0; 2]; 2];
        let mut x = vec![0.0; 30];
        for _ in 0..n {
            rng.fill_normal(&mut x);
            let l: Vec<f64> = (0..2).map(|i| crate::linalg::dot(w.row(i), &x) / 30f64.sqrt()).collect();
            for i in 0..2 {
                for j in 0..2 {
                    let v = l[i] * l[j];
                    sum[i][j] += v;
                    sq[i][j] += v * v;
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                let mean = sum[i][j] / n as f64;
                let se = ((sq[i][j] / n as f64 - mean * mean) / n as f64).sqrt();
                assert!((mean - op.q[(i, j)]).abs() < 3.0 * se, "{i}{j}: {mean} vs {}", op.q[(i, j)]);
            }
        }
    }
}
