//! File plumbing: atomic writes and the observation record file.
//!
//! Observation record file (`stream.csv`), one header row then one row per
//! sample:
//!
//! ```text
//! index,snr_db,sigma2,x_re_0,x_im_0,...,x_re_{N-1},x_im_{N-1},h_re_0,h_im_0,...
//! ```
//!
//! Floats are written in shortest round-trip form so a replay sees exactly
//! the values the original run saw.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::channel::ChannelSample;
use crate::error::{Error, Result};

/// Writes `bytes` to `path` through a temporary file in the same directory
/// followed by a rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub(crate) fn push_complex(rec: &mut Vec<String>, v: &[Complex64]) {
    for z in v {
        rec.push(z.re.to_string());
        rec.push(z.im.to_string());
    }
}

pub(crate) fn parse_f64(path: &Path, field: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::format(path, format!("not a number: {field:?}")))
}

pub(crate) fn parse_complex(path: &Path, fields: &[&str]) -> Result<Vec<Complex64>> {
    if !fields.len().is_multiple_of(2) {
        return Err(Error::format(path, "odd number of re/im fields"));
    }
    fields
        .chunks_exact(2)
        .map(|p| {
            Ok(Complex64::new(
                parse_f64(path, p[0])?,
                parse_f64(path, p[1])?,
            ))
        })
        .collect()
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::format(path, e.to_string())
}

/// Serializes samples into the record-file format.
pub fn stream_to_csv(samples: &[ChannelSample]) -> Result<Vec<u8>> {
    let n = samples.first().map_or(0, |s| s.n_antennas());
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let mut header = vec!["index".to_string(), "snr_db".into(), "sigma2".into()];
    for prefix in ["x", "h"] {
        for i in 0..n {
            header.push(format!("{prefix}_re_{i}"));
            header.push(format!("{prefix}_im_{i}"));
        }
    }
    let p = Path::new("<stream>");
    w.write_record(&header).map_err(|e| csv_err(p, e))?;
    for s in samples {
        if s.n_antennas() != n || s.x.len() != n {
            return Err(Error::Shape("samples differ in antenna count".into()));
        }
        let mut rec = vec![
            s.index.to_string(),
            s.snr_db.to_string(),
            s.sigma2.to_string(),
        ];
        push_complex(&mut rec, &s.x);
        push_complex(&mut rec, &s.h);
        w.write_record(&rec).map_err(|e| csv_err(p, e))?;
    }
    w.into_inner().map_err(|e| Error::format(p, e.to_string()))
}

pub fn write_stream(path: &Path, samples: &[ChannelSample]) -> Result<()> {
    write_atomic(path, &stream_to_csv(samples)?)
}

pub fn read_stream(path: &Path) -> Result<Vec<ChannelSample>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.get(0) != Some("index") || headers.len() < 3 || (headers.len() - 3) % 4 != 0 {
        return Err(Error::format(
            path,
            "unexpected header for an observation record file",
        ));
    }
    let n = (headers.len() - 3) / 4;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let fields: Vec<&str> = rec.iter().collect();
        let index = fields[0]
            .parse::<usize>()
            .map_err(|_| Error::format(path, format!("bad index {:?}", fields[0])))?;
        let snr_db = parse_f64(path, fields[1])?;
        let sigma2 = parse_f64(path, fields[2])?;
        let x = parse_complex(path, &fields[3..3 + 2 * n])?;
        let h = parse_complex(path, &fields[3 + 2 * n..])?;
        out.push(ChannelSample {
            index,
            h,
            x,
            sigma2,
            snr_db,
        });
    }
    Ok(out)
}
