use super::integrals::{i2, i3, i4};
use super::OrderParams;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

fn sub2(o: &Matrix, a: usize, b: usize) -> [[f64; 2]; 2] {
    let idx = [a, b];
    std::array::from_fn(|i| std::array::from_fn(|j| o[(idx[i], idx[j])]))
}

fn sub3(o: &Matrix, idx: [usize; 3]) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| o[(idx[i], idx[j])]))
}

fn sub4(o: &Matrix, idx: [usize; 4]) -> [[f64; 4]; 4] {
    std::array::from_fn(|i| std::array::from_fn(|j| o[(idx[i], idx[j])]))
}

fn in_term<T>(r: Result<T>, term: &str) -> Result<T> {
    r.map_err(|e| match e {
        Error::NumericalDomain { what, value } => Error::NumericalDomain {
            what: format!("{what} ({term})"),
            value,
        },
        other => other,
    })
}

/// Generalization error `½ E[(f̂ − f)²]` with `f̂ = (1/m) Σ σ(λ_j)` and
/// `f = (1/k) Σ σ(λ*_r)`.
pub fn mse_from_order_params(op: &OrderParams) -> Result<f64> {
    let (m, k) = (op.student_units(), op.teacher_units());
    let o = op.omega();
    let mut teacher = 0.0;
    for r in 0..k {
        for s in 0..k {
            teacher += i2(&sub2(&o, m + r, m + s))?;
        }
    }
    let mut student = 0.0;
    for j in 0..m {
        for l in 0..m {
            student += i2(&sub2(&o, j, l))?;
        }
    }
    let mut cross = 0.0;
    for j in 0..m {
        for r in 0..k {
            cross += i2(&sub2(&o, j, m + r))?;
        }
    }
    let (mf, kf) = (m as f64, k as f64);
    Ok(0.5 * (teacher / (kf * kf) + student / (mf * mf) - 2.0 * cross / (mf * kf)))
}

/// `dQ/dτ` and `dM/dτ` for learning the student's upstream patterns with
/// step `η`, given the fixed metric `C = ξ Σ² ξᵀ`.
///
/// With `δ = f − f̂` and `T3(i, b) = E[δ σ′(λ_i) λ_b]`,
/// `T4(i, a) = E[δ² σ′(λ_i) σ′(λ_a)]`:
///
/// ```text
/// dq_jl/dτ = (η/m) Σ_i [C_li T3(i, j) + C_ji T3(i, l)] + (η²/m²) Σ_ia C_ji C_la T4(i, a)
/// dm_jr/dτ = (η/m) Σ_i C_ji T3(i, r*)
/// ```
pub fn ode_rhs(op: &OrderParams, metric: &Matrix, eta: f64) -> Result<(Matrix, Matrix)> {
    let (m, k) = (op.student_units(), op.teacher_units());
    if metric.shape() != (m, m) {
        return Err(Error::Shape {
            op: "ode_rhs",
            left: metric.shape(),
            right: (m, m),
        });
    }
    let o = op.omega();
    let n = m + k;
    let (mf, kf) = (m as f64, k as f64);

    // T3(i, b) for every student i and every field b (student or teacher).
    let mut t3 = Matrix::zeros(m, n);
    for i in 0..m {
        for b in 0..n {
            let mut teacher = 0.0;
            for r in 0..k {
                teacher += in_term(i3(&sub3(&o, [i, b, m + r])), "first-order teacher term")?;
            }
            let mut student = 0.0;
            for s in 0..m {
                student += in_term(i3(&sub3(&o, [i, b, s])), "first-order student term")?;
            }
            t3[(i, b)] = teacher / kf - student / mf;
        }
    }

    let mut t4 = Matrix::zeros(m, m);
    if eta != 0.0 {
        for i in 0..m {
            for a in i..m {
                let (mut tt, mut ss, mut ts) = (0.0, 0.0, 0.0);
                for r in 0..k {
                    for s in 0..k {
                        tt += in_term(i4(&sub4(&o, [i, a, m + r, m + s])), "teacher-teacher noise term")?;
                    }
                }
                for r in 0..m {
                    for s in 0..m {
                        ss += in_term(i4(&sub4(&o, [i, a, r, s])), "student-student noise term")?;
                    }
                }
                for r in 0..k {
                    for s in 0..m {
                        ts += in_term(i4(&sub4(&o, [i, a, m + r, s])), "teacher-student noise term")?;
                    }
                }
                let v = tt / (kf * kf) + ss / (mf * mf) - 2.0 * ts / (kf * mf);
                t4[(i, a)] = v;
                t4[(a, i)] = v;
            }
        }
    }

    // Σ_i C_ji T3(i, b) for all j, b.
    let ct3 = metric.matmul(&t3)?;
    let ct4c = metric.matmul(&t4)?.matmul_t(metric)?;
    let mut dq = Matrix::zeros(m, m);
    for j in 0..m {
        for l in 0..m {
            dq[(j, l)] = eta / mf * (ct3[(l, j)] + ct3[(j, l)]) + eta * eta / (mf * mf) * ct4c[(j, l)];
        }
    }
    let mut dm = Matrix::zeros(m, k);
    for j in 0..m {
        for r in 0..k {
            dm[(j, r)] = eta / mf * ct3[(j, m + r)];
        }
    }
    Ok((dq, dm))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeConfig {
    pub eta: f64,
    /// Euler step `dτ`.
    pub dt: f64,
    pub horizon: f64,
    /// Recording interval in `τ`.
    pub record_every: f64,
}

impl Default for OdeConfig {
    fn default() -> Self {
        OdeConfig {
            eta: 1.0,
            dt: 0.01,
            horizon: 100.0,
            record_every: 1.0,
        }
    }
}

impl OdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.horizon >= 0.0) || !(self.record_every > 0.0) {
            return Err(Error::Config(format!(
                "ODE needs dt > 0, horizon >= 0 and record interval > 0, got {self:?}"
            )));
        }
        Ok(())
    }

    fn steps(&self) -> (usize, usize) {
        let total = (self.horizon / self.dt).round() as usize;
        let stride = ((self.record_every / self.dt).round() as usize).max(1);
        (total, stride)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryPoint {
    pub tau: f64,
    pub q: Matrix,
    pub m: Matrix,
    pub mse: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    /// Why integration stopped early, if it did.
    pub diagnostic: Option<String>,
}

/// Explicit Euler integration of the order-parameter ODEs. `P` stays fixed.
/// A numerical-domain failure truncates the trajectory and is reported in
/// [`Trajectory::diagnostic`].
pub fn integrate(initial: &OrderParams, metric: &Matrix, cfg: &OdeConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let (total, stride) = cfg.steps();
    let mut state = initial.clone();
    let mut points = vec![TrajectoryPoint {
        tau: 0.0,
        q: state.q.clone(),
        m: state.m.clone(),
        mse: mse_from_order_params(&state)?,
    }];
    for step in 1..=total {
        let tau = step as f64 * cfg.dt;
        let advanced = ode_rhs(&state, metric, cfg.eta).and_then(|(dq, dm)| {
            state.q.axpy(cfg.dt, &dq)?;
            state.m.axpy(cfg.dt, &dm)?;
            Ok(())
        });
        if let Err(e) = advanced {
            return Ok(Trajectory {
                points,
                diagnostic: Some(format!("stopped at tau {tau}: {e}")),
            });
        }
        if step % stride == 0 {
            match mse_from_order_params(&state) {
                Ok(mse) if mse.is_finite() => points.push(TrajectoryPoint {
                    tau,
                    q: state.q.clone(),
                    m: state.m.clone(),
                    mse,
                }),
                Ok(mse) => {
                    return Ok(Trajectory {
                        points,
                        diagnostic: Some(format!("non-finite error {mse} at tau {tau}")),
                    })
                }
                Err(e) => {
                    return Ok(Trajectory {
                        points,
                        diagnostic: Some(format!("stopped at tau {tau}: {e}")),
                    })
                }
            }
        }
    }
    Ok(Trajectory {
        points,
        diagnostic: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::RngState;
    use crate::online::{init_teacher_student, mode_metric, order_params};

    #[test]
    fn mse_at_agreement_and_without_correlation() {
        let ts = init_teacher_student(60, 3, 3, 1.0, &mut RngState::new(1)).unwrap();
        let p = order_params(&ts).p;
        let same = OrderParams { q: p.clone(), m: p.clone(), p: p.clone() };
        assert!(mse_from_order_params(&same).unwrap().abs() < 1e-15);
        let uncorrelated = OrderParams { q: p.clone(), m: Matrix::zeros(3, 3), p: p.clone() };
        let teacher_power = mse_from_order_params(&OrderParams {
            q: Matrix::zeros(3, 3),
            m: Matrix::zeros(3, 3),
            p: p.clone(),
        })
        .unwrap();
        assert!((mse_from_order_params(&uncorrelated).unwrap() - 2.0 * teacher_power).abs() < 1e-14);
    }

    #[test]
    fn fixed_point_and_zero_rate() {
        let mut ts = init_teacher_student(60, 2, 2, 1.0, &mut RngState::new(2)).unwrap();
        let c = mode_metric(&ts);
        let op = order_params(&ts);
        let (dq, dm) = ode_rhs(&op, &c, 0.0).unwrap();
        assert_eq!(dq.max_abs(), 0.0);
        assert_eq!(dm.max_abs(), 0.0);

        ts.student.xi_hat = ts.teacher.xi_hat.clone();
        let op = order_params(&ts);
        let (dq, dm) = ode_rhs(&op, &c, 1.0).unwrap();
        assert!(dq.max_abs() < 1e-10 && dm.max_abs() < 1e-10);
        let traj = integrate(&op, &c, &OdeConfig { horizon: 5.0, ..Default::default() }).unwrap();
        assert!(traj.points.iter().all(|p| p.mse < 1e-8));
    }

    #[test]
    fn zero_horizon_keeps_initial_state() {
        let ts = init_teacher_student(60, 2, 2, 1.0, &mut RngState::new(3)).unwrap();
        let op = order_params(&ts);
        let traj = integrate(&op, &mode_metric(&ts), &OdeConfig { horizon: 0.0, ..Default::default() }).unwrap();
        assert_eq!(traj.points.len(), 1);
        assert_eq!(traj.points[0].q, op.q);
        assert!(traj.diagnostic.is_none());
    }

    /// Averages the one-step change of `Q` and `M` (times `d`) over fresh inputs.
    fn one_step_drift(ts: &crate::online::TeacherStudent, eta: f64, samples: usize) -> (Matrix, Matrix, Matrix, Matrix) {
        use crate::online::{sigma, sigma_prime};
        let d = ts.d as f64;
        let (m, k) = (ts.student.hidden(), ts.teacher.hidden());
        let ws = ts.student.composed();
        let wt = ts.teacher.composed();
        let c = mode_metric(ts);
        let mut rng = RngState::new(99);
        let mut x = vec![0.0; ts.d];
        let (mut sq, mut sq2) = (Matrix::zeros(m, m), Matrix::zeros(m, m));
        let (mut sm, mut sm2) = (Matrix::zeros(m, k), Matrix::zeros(m, k));
        for _ in 0..samples {
            rng.fill_normal(&mut x);
            let ls: Vec<f64> = (0..m).map(|i| crate::linalg::dot(ws.row(i), &x) / d.sqrt()).collect();
            let lt: Vec<f64> = (0..k).map(|i| crate::linalg::dot(wt.row(i), &x) / d.sqrt()).collect();
            let f = lt.iter().map(|&l| sigma(l)).sum::<f64>() / k as f64;
            let fh = ls.iter().map(|&l| sigma(l)).sum::<f64>() / m as f64;
            let delta = f - fh;
            // ΔW_j = (η δ / (m √d)) Σ_i C_ji σ′(λ_i) x
            let coef: Vec<f64> = (0..m)
                .map(|j| eta * delta / m as f64 * (0..m).map(|i| c[(j, i)] * sigma_prime(ls[i])).sum::<f64>())
                .collect();
            let xx = crate::linalg::dot(&x, &x) / d;
            for j in 0..m {
                for l in 0..m {
                    let v = coef[j] * ls[l] + coef[l] * ls[j] + coef[j] * coef[l] * xx;
                    sq[(j, l)] += v;
                    sq2[(j, l)] += v * v;
                }
                for r in 0..k {
                    let v = coef[j] * lt[r];
                    sm[(j, r)] += v;
                    sm2[(j, r)] += v * v;
                }
            }
        }
        let n = samples as f64;
        let se = |s: &Matrix, s2: &Matrix| {
            let mean = s.scaled(1.0 / n);
            let err = s2.scaled(1.0 / n).sub(&mean.map(|v| v * v)).unwrap().map(|v| (v.max(0.0) / n).sqrt());
            (mean, err)
        };
        let (mq, eq) = se(&sq, &sq2);
        let (mm, em) = se(&sm, &sm2);
        (mq, eq, mm, em)
    }

    #[test]
    fn drift_matches_single_step_monte_carlo() {
        let ts = init_teacher_student(400, 3, 2, 1.0, &mut RngState::new(5)).unwrap();
        let (dq, dm) = ode_rhs(&order_params(&ts), &mode_metric(&ts), 1.0).unwrap();
        let (mq, eq, mm, em) = one_step_drift(&ts, 1.0, 200_000);
        for (exact, (mc, se)) in [(&dq, (&mq, &eq)), (&dm, (&mm, &em))] {
            for r in 0..exact.rows() {
                for c in 0..exact.cols() {
                    let tol = 4.0 * se[(r, c)] + 0.02 * exact[(r, c)].abs();
                    assert!((exact[(r, c)] - mc[(r, c)]).abs() < tol, "({r},{c}) {} vs {}", exact[(r, c)], mc[(r, c)]);
                }
            }
        }
    }

    #[test]
    fn step_halving_changes_little() {
        let ts = init_teacher_student(100, 2, 2, 1.0, &mut RngState::new(6)).unwrap();
        let op = order_params(&ts);
        let c = mode_metric(&ts);
        let cfg = OdeConfig { horizon: 20.0, ..Default::default() };
        let coarse = integrate(&op, &c, &cfg).unwrap();
        let fine = integrate(&op, &c, &OdeConfig { dt: cfg.dt / 2.0, ..cfg }).unwrap();
        assert!(coarse.diagnostic.is_none() && fine.diagnostic.is_none());
        let a = coarse.points.last().unwrap();
        let b = fine.points.last().unwrap();
        assert_eq!(a.tau, b.tau);
        assert!((a.mse - b.mse).abs() < 1e-3);
        assert!(coarse.points.iter().all(|p| p.mse.is_finite() && p.mse >= 0.0));
    }
}
