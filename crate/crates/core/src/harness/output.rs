//! Result files. Every file is written atomically.
//!
//! * `curves.csv`: `minibatch,<name>_rmse_db,<name>_mean_depth,...`
//! * `depth_hist.csv`: `estimator,depth,count`
//! * `snr_hist.csv`: `bin_lo_db,bin_hi_db,count` (1 dB bins)
//! * `checkpoint_<name>.csv`: one per network
//! * `stream.csv`: the observation record file, when requested
//! * `snr_loss.csv`: `sigma_p,sigma_g,loss_db`

use std::path::{Path, PathBuf};

use super::learning::LearningOutcome;
use super::snr_loss::SnrLossCell;
use crate::error::{Error, Result};
use crate::io::{write_atomic, write_stream};
use crate::metrics::snr_histogram;
use crate::mpnet::save_checkpoint;

fn csv_bytes(rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(&r)
            .map_err(|e| Error::format("<csv>", e.to_string()))?;
    }
    w.into_inner()
        .map_err(|e| Error::format("<csv>", e.to_string()))
}

pub fn curves_csv(out: &LearningOutcome) -> Result<Vec<u8>> {
    let mut header = vec!["minibatch".to_string()];
    for c in &out.curves {
        header.push(format!("{}_rmse_db", c.name));
        header.push(format!("{}_mean_depth", c.name));
    }
    let batches = out.curves.first().map_or(0, |c| c.rmse_db.len());
    let mut rows = vec![header];
    for i in 0..batches {
        let mut r = vec![i.to_string()];
        for c in &out.curves {
            r.push(format!("{:.6}", c.rmse_db[i]));
            r.push(format!("{:.4}", c.mean_depth[i]));
        }
        rows.push(r);
    }
    csv_bytes(rows)
}

/// Writes all learning-run files into `dir` and returns their paths.
pub fn write_learning_outputs(
    dir: &Path,
    out: &LearningOutcome,
    checkpoints: bool,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let p = dir.join(name);
        write_atomic(&p, &bytes)?;
        written.push(p);
        Ok(())
    };
    put("curves.csv", curves_csv(out)?)?;

    let mut rows = vec![vec![
        "estimator".to_string(),
        "depth".into(),
        "count".into(),
    ]];
    for (name, h) in &out.depth_hist {
        for (d, c) in h {
            rows.push(vec![name.clone(), d.to_string(), c.to_string()]);
        }
    }
    put("depth_hist.csv", csv_bytes(rows)?)?;

    let mut rows = vec![vec![
        "bin_lo_db".to_string(),
        "bin_hi_db".into(),
        "count".into(),
    ]];
    if !out.snr_db.is_empty() {
        for b in snr_histogram(&out.snr_db)? {
            rows.push(vec![
                b.lo_db.to_string(),
                b.hi_db.to_string(),
                b.count.to_string(),
            ]);
        }
    }
    put("snr_hist.csv", csv_bytes(rows)?)?;

    if checkpoints {
        for net in &out.networks {
            let p = dir.join(format!("checkpoint_{}.csv", net.name));
            save_checkpoint(&p, &net.model, &net.adam)?;
            written.push(p);
        }
    }
    if let Some(samples) = &out.samples {
        let p = dir.join("stream.csv");
        write_stream(&p, samples)?;
        written.push(p);
    }
    Ok(written)
}

pub fn snr_loss_csv(cells: &[SnrLossCell]) -> Result<Vec<u8>> {
    let mut rows = vec![vec![
        "sigma_p".to_string(),
        "sigma_g".into(),
        "loss_db".into(),
    ]];
    for c in cells {
        rows.push(vec![
            c.sigma_p.to_string(),
            c.sigma_g.to_string(),
            format!("{:.6}", c.loss_db),
        ]);
    }
    csv_bytes(rows)
}

pub fn write_snr_loss(dir: &Path, cells: &[SnrLossCell]) -> Result<PathBuf> {
    let p = dir.join("snr_loss.csv");
    write_atomic(&p, &snr_loss_csv(cells)?)?;
    Ok(p)
}

/// Fails early when `dir` cannot receive output files.
pub fn ensure_writable(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    tempfile::NamedTempFile::new_in(dir)
        .map(drop)
        .map_err(|e| Error::io(dir, e))
}
