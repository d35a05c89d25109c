//! CSV result tables.

use std::io::Write;

use crate::error::Result;
use crate::eval::GroupEer;
use crate::quality::QualityReport;
use crate::scalar::Scalar;

use super::scores::csv_err;

/// Block map with columns `row,col,s,r,q,interesting`.
pub fn write_quality_map<T: Scalar, W: Write>(out: W, report: &QualityReport<T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row", "col", "s", "r", "q", "interesting"])
        .map_err(csv_err)?;
    for row in 0..report.symmetry.rows() {
        for col in 0..report.symmetry.cols() {
            w.write_record([
                row.to_string(),
                col.to_string(),
                report.symmetry.get(col, row).to_string(),
                report.correlation.get(col, row).to_string(),
                report.quality.get(col, row).to_string(),
                u8::from(*report.interesting.get(col, row)).to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-group table with columns `group,n_genuine,n_impostor,eer`; an
/// undefined EER is written as `NA`.
pub fn write_group_results<T: Scalar, W: Write>(out: W, rows: &[GroupEer<T>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["group", "n_genuine", "n_impostor", "eer"])
        .map_err(csv_err)?;
    for g in rows {
        let eer = g
            .eer
            .map_or_else(|| "NA".to_string(), |e| format!("{:.6}", e.as_f64()));
        w.write_record([
            g.label.clone(),
            g.n_genuine.to_string(),
            g.n_impostor.to_string(),
            eer,
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
