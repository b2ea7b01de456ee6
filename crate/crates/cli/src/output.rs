use std::io::Write;
use std::path::Path;

use gfnoma_core::harness::SerCurve;

use crate::CliError;

pub const CSV_HEADER: [&str; 6] = ["sweep_value", "detector", "log10_ser", "errors", "symbols", "mean_iters"];

/// One row per (sweep value, detector), values in sweep order and detectors
/// in configuration order; reals with six fractional digits.
pub fn write_csv<W: Write>(curves: &[SerCurve], out: W) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Runtime(format!("writing CSV: {e}"));
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER).map_err(io)?;
    let rows = curves.first().map_or(0, |c| c.points.len());
    for i in 0..rows {
        for curve in curves {
            let p = &curve.points[i];
            w.write_record([
                format!("{:.6}", p.sweep_value),
                curve.algorithm.name().to_string(),
                format!("{:.6}", p.log10_ser),
                p.errors.to_string(),
                p.symbols.to_string(),
                format!("{:.6}", p.mean_iters),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| CliError::Runtime(format!("writing CSV: {e}")))
}

pub fn emit_csv(curves: &[SerCurve], path: &Path) -> Result<(), CliError> {
    if curves.is_empty() {
        return Err(CliError::Runtime("no curves to write".into()));
    }
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))?;
    write_csv(curves, std::io::BufWriter::new(file))
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Aligned text table of the curves.
pub fn summary(curves: &[SerCurve]) -> String {
    let mut s = format!("{:>10}  {:<14} {:>10} {:>9} {:>10} {:>7}\n", "value", "detector", "log10 SER", "errors", "symbols", "iters");
    let rows = curves.first().map_or(0, |c| c.points.len());
    for i in 0..rows {
        for c in curves {
            let p = &c.points[i];
            s += &format!(
                "{:>10.3}  {:<14} {:>10.3} {:>9} {:>10} {:>7.2}\n",
                p.sweep_value,
                c.algorithm.name(),
                p.log10_ser,
                p.errors,
                p.symbols,
                p.mean_iters
            );
        }
    }
    s
}
