//! CSV writers for analysis results. Every table has a header row and a
//! fixed column order.

use std::path::Path;

use super::{AccuracyCell, LayerOverlap, LeastPTable, ModeRanking, PowerLawFit, ProjectionStages, PruningPoint};
use crate::error::{Error, Result};

pub const ABOVE_GRID: &str = "above_grid";

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{other:?}")),
    })
}

fn finish(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// `layer,mode,rank,tau,sigma_abs`, modes listed in descending `τ`.
pub fn write_ranking_csv(path: &Path, ranking: &ModeRanking) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["layer", "mode", "rank", "tau", "sigma_abs"])?;
    for (l, layer) in ranking.layers.iter().enumerate() {
        for (rank, &a) in layer.order.iter().enumerate() {
            w.write_record([
                l.to_string(),
                a.to_string(),
                (rank + 1).to_string(),
                layer.tau[a].to_string(),
                layer.sigma_abs[a].to_string(),
            ])?;
        }
    }
    finish(w, path)
}

/// `layer,pair,overlap`; each layer's mean appears with pair `mean`.
pub fn write_overlap_csv(path: &Path, profile: &[LayerOverlap]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["layer", "pair", "overlap"])?;
    for layer in profile {
        for &(a, b, o) in &layer.pairs {
            w.write_record([layer.layer.to_string(), format!("{a}-{b}"), o.to_string()])?;
        }
        w.write_record([layer.layer.to_string(), "mean".to_string(), layer.mean.to_string()])?;
    }
    finish(w, path)
}

/// `layer,value`.
pub fn write_dispersion_csv(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["layer", "value"])?;
    for (l, v) in values.iter().enumerate() {
        w.write_record([l.to_string(), v.to_string()])?;
    }
    finish(w, path)
}

/// `layer,breakpoint,b1,b2,rss`.
pub fn write_powerlaw_csv(path: &Path, fits: &[(usize, PowerLawFit)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["layer", "breakpoint", "b1", "b2", "rss"])?;
    for (l, f) in fits {
        w.write_record([
            l.to_string(),
            f.breakpoint.to_string(),
            f.b1.to_string(),
            f.b2.to_string(),
            f.rss().to_string(),
        ])?;
    }
    finish(w, path)
}

/// `protocol,fraction,mean_acc,std_acc`.
pub fn write_pruning_csv(path: &Path, points: &[PruningPoint]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["protocol", "fraction", "mean_acc", "std_acc"])?;
    for p in points {
        w.write_record([
            p.protocol.name().to_string(),
            p.fraction.to_string(),
            p.mean_accuracy.to_string(),
            p.std_accuracy.to_string(),
        ])?;
    }
    finish(w, path)
}

fn least_label(table: &LeastPTable, width: usize) -> String {
    match table.least_p.iter().find(|(n, _)| *n == width).and_then(|(_, p)| *p) {
        Some(p) => p.to_string(),
        None => ABOVE_GRID.to_string(),
    }
}

fn cell_record(table: &LeastPTable, c: &AccuracyCell) -> [String; 5] {
    [
        c.width.to_string(),
        c.p.map_or_else(|| "bp".to_string(), |p| p.to_string()),
        c.mean_acc.to_string(),
        c.std_acc.to_string(),
        least_label(table, c.width),
    ]
}

/// Full grid: `width,p,mean_acc,std_acc,least_p`, with the dense reference as `p = bp`.
pub fn write_least_p_grid_csv(path: &Path, table: &LeastPTable) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["width", "p", "mean_acc", "std_acc", "least_p"])?;
    for c in table.reference.iter().chain(&table.grid) {
        w.write_record(cell_record(table, c))?;
    }
    finish(w, path)
}

/// One row per width: `width,bp_mean_acc,least_p`.
pub fn write_least_p_csv(path: &Path, table: &LeastPTable) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["width", "bp_mean_acc", "least_p"])?;
    for c in &table.reference {
        w.write_record([c.width.to_string(), c.mean_acc.to_string(), least_label(table, c.width)])?;
    }
    finish(w, path)
}

/// `index,label,stage1_0..,stage2_0..,stage3_0..`.
pub fn write_projection_stages_csv(path: &Path, stages: &ProjectionStages, labels: &[usize]) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["index".to_string(), "label".to_string()];
    for (name, m) in [("stage1", &stages.projected), ("stage2", &stages.weighted), ("stage3", &stages.mapped)] {
        header.extend((0..m.cols()).map(|c| format!("{name}_{c}")));
    }
    w.write_record(&header)?;
    for r in 0..stages.projected.rows() {
        let mut rec = vec![r.to_string(), labels.get(r).map_or(String::new(), usize::to_string)];
        for m in [&stages.projected, &stages.weighted, &stages.mapped] {
            rec.extend(m.row(r).iter().map(f64::to_string));
        }
        w.write_record(&rec)?;
    }
    finish(w, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::PruneProtocol;

    #[test]
    fn least_p_sentinel_and_headers() {
        let dir = tempfile::tempdir().unwrap();
        let table = LeastPTable {
            reference: vec![AccuracyCell { width: 50, p: None, mean_acc: 0.9, std_acc: 0.0 }],
            grid: vec![AccuracyCell { width: 50, p: Some(5), mean_acc: 0.5, std_acc: 0.0 }],
            least_p: vec![(50, None)],
        };
        let grid = dir.path().join("grid.csv");
        write_least_p_grid_csv(&grid, &table).unwrap();
        let text = std::fs::read_to_string(&grid).unwrap();
        assert_eq!(text.lines().next().unwrap(), "width,p,mean_acc,std_acc,least_p");
        assert!(text.lines().nth(2).unwrap().ends_with(ABOVE_GRID));

        let prune = dir.path().join("prune.csv");
        write_pruning_csv(
            &prune,
            &[PruningPoint { protocol: PruneProtocol::Random, fraction: 0.5, mean_accuracy: 0.25, std_accuracy: 0.0 }],
        )
        .unwrap();
        assert_eq!(std::fs::read_to_string(&prune).unwrap(), "protocol,fraction,mean_acc,std_acc\nrandom,0.5,0.25,0\n");
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let err = write_dispersion_csv(Path::new("/nonexistent-dir/x.csv"), &[1.0]).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
