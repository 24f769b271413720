use super::{mse_from_order_params, order_params, sigma, sigma_prime, CommitteeFactors, TeacherStudent};
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix, RngState};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    pub eta: f64,
    /// Length in `τ = steps / d`.
    pub horizon: f64,
    /// Recording interval in `τ`.
    pub record_every: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            eta: 1.0,
            horizon: 100.0,
            record_every: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimPoint {
    pub tau: f64,
    pub q: Matrix,
    /// Student-teacher overlaps, also the snapshot used for specialization.
    pub m: Matrix,
    pub mse: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimTrajectory {
    pub points: Vec<SimPoint>,
}

impl SimTrajectory {
    pub fn taus(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.tau).collect()
    }

    pub fn mse(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mse).collect()
    }
}

/// Local fields `λ` of one network.
fn fields(f: &CommitteeFactors, x: &[f64], inv_sqrt_d: f64) -> Vec<f64> {
    let p = f.sigma.len();
    let mut h = vec![0.0; p];
    for (n, &xn) in x.iter().enumerate() {
        for (a, &v) in f.xi_hat.row(n).iter().enumerate() {
            h[a] += v * xn;
        }
    }
    for (a, ha) in h.iter_mut().enumerate() {
        *ha *= inv_sqrt_d * f.sigma[a];
    }
    (0..f.hidden()).map(|i| dot(f.xi.row(i), &h)).collect()
}

fn committee_output(lambda: &[f64]) -> f64 {
    lambda.iter().map(|&l| sigma(l)).sum::<f64>() / lambda.len() as f64
}

fn record(ts: &TeacherStudent, tau: f64) -> Result<SimPoint> {
    let op = order_params(ts);
    let mse = mse_from_order_params(&op)?;
    Ok(SimPoint {
        tau,
        q: op.q,
        m: op.m,
        mse,
    })
}

/// One-pass SGD on the student's upstream patterns, one fresh standard
/// Gaussian input per step. Order parameters and the error are recorded
/// from their definitions at every interval.
pub fn simulate_online(ts: &mut TeacherStudent, cfg: &SimConfig, rng: &mut RngState) -> Result<SimTrajectory> {
    if !(cfg.horizon >= 0.0) || !(cfg.record_every > 0.0) {
        return Err(Error::Config(format!("simulation needs horizon >= 0 and record interval > 0, got {cfg:?}")));
    }
    let d = ts.d;
    let df = d as f64;
    let total = (cfg.horizon * df).round() as usize;
    let stride = ((cfg.record_every * df).round() as usize).max(1);
    let inv_sqrt_d = 1.0 / df.sqrt();
    let m = ts.student.hidden() as f64;
    let p = ts.p;

    let mut points = vec![record(ts, 0.0)?];
    let mut x = vec![0.0; d];
    let mut g = vec![0.0; p];
    for step in 1..=total {
        rng.fill_normal(&mut x);
        let lambda_t = fields(&ts.teacher, &x, inv_sqrt_d);
        let lambda_s = fields(&ts.student, &x, inv_sqrt_d);
        let delta = committee_output(&lambda_t) - committee_output(&lambda_s);
        let s = &ts.student;
        for (a, ga) in g.iter_mut().enumerate() {
            *ga = s.sigma[a] * (0..s.hidden()).map(|i| sigma_prime(lambda_s[i]) * s.xi[(i, a)]).sum::<f64>();
        }
        let scale = cfg.eta * delta / (m * df.sqrt());
        for (n, &xn) in x.iter().enumerate() {
            let c = scale * xn;
            for (v, &ga) in ts.student.xi_hat.row_mut(n).iter_mut().zip(&g) {
                *v += c * ga;
            }
        }
        if step % stride == 0 {
            points.push(record(ts, step as f64 / df)?);
        }
    }
    Ok(SimTrajectory { points })
}

/// Monte Carlo estimate of `½ E[(f̂ − f)²]` and its standard error.
pub fn empirical_mse(ts: &TeacherStudent, samples: usize, rng: &mut RngState) -> (f64, f64) {
    let inv_sqrt_d = 1.0 / (ts.d as f64).sqrt();
    let mut x = vec![0.0; ts.d];
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..samples {
        rng.fill_normal(&mut x);
        let lt = fields(&ts.teacher, &x, inv_sqrt_d);
        let ls = fields(&ts.student, &x, inv_sqrt_d);
        let e = 0.5 * (committee_output(&ls) - committee_output(&lt)).powi(2);
        sum += e;
        sq += e * e;
    }
    let n = samples.max(1) as f64;
    let mean = sum / n;
    let var = (sq / n - mean * mean).max(0.0);
    (mean, (var / n).sqrt())
}

/// First `τ` at which `values` drops below `threshold`.
pub fn time_to_threshold(taus: &[f64], values: &[f64], threshold: f64) -> Option<f64> {
    taus.iter().zip(values).find(|(_, &v)| v < threshold).map(|(&t, _)| t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eig;
    use crate::online::init_teacher_student;

    #[test]
    fn zero_rate_keeps_order_parameters() {
        let mut ts = init_teacher_student(40, 2, 2, 1.0, &mut RngState::new(1)).unwrap();
        let traj = simulate_online(&mut ts, &SimConfig { eta: 0.0, horizon: 2.0, record_every: 0.5 }, &mut RngState::new(2))
            .unwrap();
        assert_eq!(traj.points.len(), 5);
        for p in &traj.points {
            assert_eq!(p.q, traj.points[0].q);
            assert_eq!(p.m, traj.points[0].m);
        }
    }

    #[test]
    fn teacher_initialized_student_stays_exact() {
        let mut ts = init_teacher_student(50, 3, 3, 1.0, &mut RngState::new(3)).unwrap();
        ts.student.xi_hat = ts.teacher.xi_hat.clone();
        let traj = simulate_online(&mut ts, &SimConfig { eta: 1.0, horizon: 5.0, record_every: 1.0 }, &mut RngState::new(4))
            .unwrap();
        assert!(traj.points.iter().all(|p| p.mse < 1e-6));
    }

    #[test]
    fn omega_stays_positive_semidefinite() {
        let mut ts = init_teacher_student(30, 2, 3, 1.0, &mut RngState::new(5)).unwrap();
        let traj = simulate_online(&mut ts, &SimConfig { eta: 1.0, horizon: 3.0, record_every: 1.0 }, &mut RngState::new(6))
            .unwrap();
        let p = order_params(&ts).p;
        for pt in &traj.points {
            let op = crate::online::OrderParams { q: pt.q.clone(), m: pt.m.clone(), p: p.clone() };
            let vals = sym_eig(&op.omega()).unwrap().values;
            assert!(vals.iter().all(|&v| v > -1e-8), "{vals:?}");
        }
    }

    #[test]
    fn empirical_mse_matches_closed_form() {
        let ts = init_teacher_student(40, 3, 3, 1.0, &mut RngState::new(7)).unwrap();
        let exact = mse_from_order_params(&order_params(&ts)).unwrap();
        let (mean, se) = empirical_mse(&ts, 200_000, &mut RngState::new(8));
        assert!((mean - exact).abs() < 3.0 * se, "{mean} vs {exact} (se {se})");
    }

    #[test]
    fn threshold_crossing() {
        assert_eq!(time_to_threshold(&[0.0, 1.0, 2.0], &[0.5, 0.2, 0.005], 0.01), Some(2.0));
        assert_eq!(time_to_threshold(&[0.0, 1.0], &[0.5, 0.2], 0.01), None);
    }
}
