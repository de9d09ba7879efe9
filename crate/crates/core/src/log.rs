//! Flight logs and their CSV form.
//!
//! Floats are written with Rust's shortest round-trip formatting so a log
//! read back is bit-identical to the one written.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::adaptive::THETA_TOTAL_LEN;
use crate::error::LogError;
use crate::math::Vec3;

/// One physics sample.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub r: Vec3,
    pub r_sp: Vec3,
    pub v: Vec3,
    pub v_sp: Vec3,
    pub q: [f64; 4],
    pub q_sp: [f64; 4],
    pub omega: Vec3,
    pub omega_sp: Vec3,
    pub f_sp: Vec3,
    pub moment_sp: Vec3,
    pub u_r: Vec3,
    pub u_v: Vec3,
    pub u_q: Vec3,
    pub u_omega: Vec3,
    pub thrust_achieved: f64,
    pub saturated: bool,
    /// Index of the active waypoint; the waypoint count once complete.
    pub waypoint: usize,
}

/// Adaptive coefficients at one sample: `θ_r, θ_v, θ_q, θ_ω`.
#[derive(Clone, Debug, PartialEq)]
pub struct GainRow {
    pub t: f64,
    pub theta: [f64; THETA_TOTAL_LEN],
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlightLog {
    pub rows: Vec<LogRow>,
    pub gains: Vec<GainRow>,
}

fn vec_cols(name: &str, out: &mut Vec<String>) {
    for axis in ["x", "y", "z"] {
        out.push(format!("{name}_{axis}"));
    }
}

pub fn log_header() -> Vec<String> {
    let mut h = vec!["t".to_string()];
    vec_cols("r", &mut h);
    vec_cols("r_sp", &mut h);
    vec_cols("v", &mut h);
    vec_cols("v_sp", &mut h);
    for i in 0..4 {
        h.push(format!("q_{i}"));
    }
    for i in 0..4 {
        h.push(format!("q_sp_{i}"));
    }
    for name in ["omega", "omega_sp", "f_sp", "moment_sp", "u_r", "u_v", "u_q", "u_omega"] {
        vec_cols(name, &mut h);
    }
    h.push("thrust_achieved".into());
    h.push("saturated".into());
    h.push("waypoint".into());
    h
}

pub fn gains_header() -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for (name, n) in [("theta_r", 3), ("theta_v", 9), ("theta_q", 3), ("theta_omega", 12)] {
        for i in 0..n {
            h.push(format!("{name}_{i}"));
        }
    }
    h
}

impl LogRow {
    fn to_record(&self) -> Vec<String> {
        let mut rec = Vec::with_capacity(60);
        rec.push(self.t.to_string());
        for v in [&self.r, &self.r_sp, &self.v, &self.v_sp] {
            rec.extend(v.iter().map(f64::to_string));
        }
        rec.extend(self.q.iter().map(f64::to_string));
        rec.extend(self.q_sp.iter().map(f64::to_string));
        for v in [
            &self.omega,
            &self.omega_sp,
            &self.f_sp,
            &self.moment_sp,
            &self.u_r,
            &self.u_v,
            &self.u_q,
            &self.u_omega,
        ] {
            rec.extend(v.iter().map(f64::to_string));
        }
        rec.push(self.thrust_achieved.to_string());
        rec.push(u8::from(self.saturated).to_string());
        rec.push(self.waypoint.to_string());
        rec
    }

    fn from_record(rec: &csv::StringRecord, line: u64) -> Result<Self, LogError> {
        let bad = |message: String| LogError::Format { line, message };
        let mut vals = Vec::with_capacity(rec.len());
        let n = rec.len();
        for (i, field) in rec.iter().enumerate().take(n - 2) {
            vals.push(
                field
                    .parse::<f64>()
                    .map_err(|_| bad(format!("column {}: `{field}` is not a number", i + 1)))?,
            );
        }
        let saturated = match &rec[n - 2] {
            "0" => false,
            "1" => true,
            other => return Err(bad(format!("saturated flag must be 0 or 1, got `{other}`"))),
        };
        let waypoint = rec[n - 1]
            .parse::<usize>()
            .map_err(|_| bad(format!("waypoint index `{}` is not an integer", &rec[n - 1])))?;
        let v3 = |i: usize| Vec3::new(vals[i], vals[i + 1], vals[i + 2]);
        let q4 = |i: usize| [vals[i], vals[i + 1], vals[i + 2], vals[i + 3]];
        Ok(Self {
            t: vals[0],
            r: v3(1),
            r_sp: v3(4),
            v: v3(7),
            v_sp: v3(10),
            q: q4(13),
            q_sp: q4(17),
            omega: v3(21),
            omega_sp: v3(24),
            f_sp: v3(27),
            moment_sp: v3(30),
            u_r: v3(33),
            u_v: v3(36),
            u_q: v3(39),
            u_omega: v3(42),
            thrust_achieved: vals[45],
            saturated,
            waypoint,
        })
    }
}

fn create(path: &Path) -> Result<csv::Writer<BufWriter<File>>, LogError> {
    let file = File::create(path).map_err(|source| LogError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file)))
}

fn open(path: &Path) -> Result<csv::Reader<File>, LogError> {
    let file = File::open(path).map_err(|source| LogError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn check_header(reader: &mut csv::Reader<File>, expected: &[String]) -> Result<(), LogError> {
    let found = reader.headers()?.clone();
    if found.iter().ne(expected.iter().map(String::as_str)) {
        return Err(LogError::Header {
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(())
}

fn record_error(e: csv::Error) -> LogError {
    match e.position() {
        Some(pos) => LogError::Format {
            line: pos.line(),
            message: e.to_string(),
        },
        None => LogError::Csv(e),
    }
}

fn flush(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<(), LogError> {
    w.flush().map_err(|source| LogError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_log(path: &Path, rows: &[LogRow]) -> Result<(), LogError> {
    let mut w = create(path)?;
    w.write_record(log_header())?;
    for row in rows {
        w.write_record(row.to_record())?;
    }
    flush(w, path)
}

pub fn read_log(path: &Path) -> Result<Vec<LogRow>, LogError> {
    let mut reader = open(path)?;
    check_header(&mut reader, &log_header())?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(record_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push(LogRow::from_record(&rec, line)?);
    }
    Ok(rows)
}

pub fn write_gains(path: &Path, rows: &[GainRow]) -> Result<(), LogError> {
    let mut w = create(path)?;
    w.write_record(gains_header())?;
    for row in rows {
        let mut rec = vec![row.t.to_string()];
        rec.extend(row.theta.iter().map(f64::to_string));
        w.write_record(rec)?;
    }
    flush(w, path)
}

pub fn read_gains(path: &Path) -> Result<Vec<GainRow>, LogError> {
    let mut reader = open(path)?;
    check_header(&mut reader, &gains_header())?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(record_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut vals = [0.0; THETA_TOTAL_LEN + 1];
        for (slot, field) in vals.iter_mut().zip(rec.iter()) {
            *slot = field.parse().map_err(|_| LogError::Format {
                line,
                message: format!("`{field}` is not a number"),
            })?;
        }
        let mut theta = [0.0; THETA_TOTAL_LEN];
        theta.copy_from_slice(&vals[1..]);
        rows.push(GainRow { t: vals[0], theta });
    }
    Ok(rows)
}

/// Writes the whole log to a file in memory; used to compare logs bitwise.
pub fn log_bytes(rows: &[LogRow]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(log_header()).unwrap();
    for row in rows {
        w.write_record(row.to_record()).unwrap();
    }
    w.flush().unwrap();
    w.into_inner().expect("in-memory writer")
}

/// Writes `text` to `path`.
pub fn write_text(path: &Path, text: &str) -> Result<(), LogError> {
    let mut f = File::create(path).map_err(|source| LogError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    f.write_all(text.as_bytes()).map_err(|source| LogError::Io {
        path: path.to_path_buf(),
        source,
    })
}
