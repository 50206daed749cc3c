//! Delimited-text emission of surfaces, training series, and comparison
//! reports. Floats print in Rust's shortest round-trip form, so repeated
//! deterministic runs produce byte-identical files; a diverged grid point
//! keeps its row with the literal `inf`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::analysis::ComparisonReport;
use crate::error::Result;
use crate::landscape::SurfaceSample;
use crate::optim::EpochMetrics;

pub const SURFACE_HEADER: &str = "alpha,beta,train_loss,train_acc,test_loss,test_acc";
pub const SERIES_HEADER: &str = "epoch,train_loss,train_acc,test_acc,dist_from_init,weight_norm,optimizer";

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Surface table, one row per grid point, `beta` blank for 1-D sweeps.
pub fn emit_surface(path: &Path, samples: &[SurfaceSample]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{SURFACE_HEADER}")?;
    for s in samples {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            s.alpha,
            opt_f64(s.beta),
            s.train_loss,
            s.train_accuracy,
            opt_f64(s.test_loss),
            opt_f64(s.test_accuracy),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Per-epoch training series.
pub fn emit_series(path: &Path, series: &[EpochMetrics]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{SERIES_HEADER}")?;
    for m in series {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            m.epoch,
            m.train_loss,
            m.train_accuracy,
            opt_f64(m.test_accuracy),
            m.distance_from_init,
            m.weight_norm,
            m.optimizer,
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Comparison reports as a JSON array.
pub fn emit_report(path: &Path, reports: &[ComparisonReport]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, reports)
        .map_err(|e| crate::error::Error::Io(std::io::Error::other(e)))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
