use std::path::Path;

use mdl_core::analysis::mean_std;
use mdl_core::linalg::{Matrix, RngState};
use mdl_core::online::{
    init_teacher_student, integrate, mode_metric, order_params, simulate_online, specialization_report,
    time_to_threshold, OdeConfig, SimConfig, SimTrajectory,
};

use super::{for_each_seed, run_dir};
use crate::config::{ExperimentConfig, Task};
use crate::error::CliError;
use crate::output::{write_csv, write_text};

pub const SUMMARY_HEADER: [&str; 10] = [
    "d",
    "alpha",
    "p",
    "final_mse_theory",
    "final_mse_sim",
    "time_to_threshold_theory",
    "time_to_threshold_sim",
    "specialization_theory",
    "specialization_sim",
    "ode_note",
];

fn overlap_rows(source: &str, tau: f64, m: &Matrix, rows: &mut Vec<Vec<String>>) {
    for i in 0..m.rows() {
        for r in 0..m.cols() {
            rows.push(vec![source.to_string(), tau.to_string(), i.to_string(), r.to_string(), m[(i, r)].to_string()]);
        }
    }
}

fn mean_matrix(ms: &[&Matrix]) -> Matrix {
    let mut acc = Matrix::zeros(ms[0].rows(), ms[0].cols());
    for m in ms {
        acc.axpy(1.0 / ms.len() as f64, m).expect("same shape");
    }
    acc
}

fn label(t: Option<f64>) -> String {
    t.map_or_else(|| "none".to_string(), |v| v.to_string())
}

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    if cfg.task != Task::TeacherStudent {
        return Err(CliError::Usage("config key `task`: theory needs task = teacher_student".into()));
    }
    let th = &cfg.theory;
    let dir = run_dir(out, cfg)?;
    let mut summary = Vec::new();
    for &d in &th.d {
        for &alpha in &th.alpha {
            let tag = format!("d{d}_alpha{alpha}");
            let ts = init_teacher_student(d, th.k, th.m, alpha, &mut RngState::new(th.init_seed))?;
            let ode = integrate(
                &order_params(&ts),
                &mode_metric(&ts),
                &OdeConfig {
                    eta: th.eta,
                    dt: th.dt,
                    horizon: th.horizon,
                    record_every: th.record_every,
                },
            )?;
            if let Some(note) = &ode.diagnostic {
                log::warn!("{tag}: {note}");
            }
            let sim_cfg = SimConfig {
                eta: th.eta,
                horizon: th.horizon,
                record_every: th.record_every,
            };
            let sims: Vec<SimTrajectory> = for_each_seed(&cfg.seeds, |seed| {
                let mut student = ts.clone();
                Ok(simulate_online(&mut student, &sim_cfg, &mut RngState::new(seed))?)
            })?;
            log::info!("{tag}: p = {}, {} simulation seeds", ts.p, sims.len());

            let theory_rows: Vec<Vec<String>> =
                ode.points.iter().map(|p| vec![p.tau.to_string(), p.mse.to_string()]).collect();
            write_csv(&dir.join(format!("theory_{tag}.csv")), &["tau", "mse_theory"], &theory_rows)?;

            let len = sims[0].points.len();
            let mut sim_rows = Vec::with_capacity(len);
            let mut sim_mean = Vec::with_capacity(len);
            let mut overlaps = Vec::new();
            for p in &ode.points {
                overlap_rows("theory", p.tau, &p.m, &mut overlaps);
            }
            for i in 0..len {
                let mses: Vec<f64> = sims.iter().map(|s| s.points[i].mse).collect();
                let (mean, std) = mean_std(&mses);
                let tau = sims[0].points[i].tau;
                sim_rows.push(vec![tau.to_string(), mean.to_string(), std.to_string()]);
                sim_mean.push(mean);
                let ms: Vec<&Matrix> = sims.iter().map(|s| &s.points[i].m).collect();
                overlap_rows("simulation", tau, &mean_matrix(&ms), &mut overlaps);
            }
            write_csv(
                &dir.join(format!("simulation_{tag}.csv")),
                &["tau", "mse_sim_mean", "mse_sim_std"],
                &sim_rows,
            )?;
            write_csv(
                &dir.join(format!("overlaps_{tag}.csv")),
                &["source", "tau", "student", "teacher", "m"],
                &overlaps,
            )?;

            let ode_taus: Vec<f64> = ode.points.iter().map(|p| p.tau).collect();
            let ode_mse: Vec<f64> = ode.points.iter().map(|p| p.mse).collect();
            let ode_final = ode.points.last().expect("initial point");
            let sim_finals: Vec<Matrix> = sims.iter().map(|s| s.points[len - 1].m.clone()).collect();
            summary.push(vec![
                d.to_string(),
                alpha.to_string(),
                ts.p.to_string(),
                ode_final.mse.to_string(),
                sim_mean[len - 1].to_string(),
                label(time_to_threshold(&ode_taus, &ode_mse, th.threshold)),
                label(time_to_threshold(&sims[0].taus(), &sim_mean, th.threshold)),
                specialization_report(std::slice::from_ref(&ode_final.m)).mean_dominance().to_string(),
                specialization_report(&sim_finals).mean_dominance().to_string(),
                ode.diagnostic.clone().unwrap_or_default(),
            ]);
        }
    }
    write_csv(&dir.join("theory_summary.csv"), &SUMMARY_HEADER, &summary)?;
    write_text(&dir.join("config.echo"), cfg.echo())
}
