//! CSV and image artifacts.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;
use crate::pgm::{write_pgm, GrayImage};
use crate::tfcore::TfField;

/// First line of every CSV file written by the harness.
pub const CSV_VERSION_LINE: &str = "# maskrec-csv v1";

/// 17 significant digits, enough for an exact `f64` round trip.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn r_column(prefix: &str, r: f64) -> String {
    format!("{prefix}{r}")
}

/// Header line, then rows; cells are written verbatim.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{CSV_VERSION_LINE}")?;
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Linear 8-bit quantization of a nonnegative field against its maximum.
pub fn quantize_field(f: &TfField) -> (GrayImage, f64) {
    let n = f.grid().n();
    let max = f.max();
    let pixels = f
        .values()
        .iter()
        .map(|&v| if max > 0.0 { (255.0 * v / max).round().clamp(0.0, 255.0) as u8 } else { 0 })
        .collect();
    (GrayImage { width: n, height: n, pixels }, max)
}

/// `rho.pgm` plus a sidecar recording the scale needed to invert it.
pub fn write_field_pgm(dir: &Path, stem: &str, f: &TfField) -> Result<()> {
    let (img, max) = quantize_field(f);
    write_pgm(BufWriter::new(fs::File::create(dir.join(format!("{stem}.pgm")))?), &img)?;
    let meta = format!(
        "field = {stem}\nmax = {}\nquantization = linear, value = pixel / 255 * max\n\
         step = {}\nrows = time index\ncolumns = frequency index\n",
        fmt_f64(max),
        fmt_f64(max / 255.0),
    );
    fs::write(dir.join(format!("{stem}.meta.txt")), meta)?;
    Ok(())
}

/// Median of a sample; the mean of the two middle values for even lengths.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
