//! File formats and report output: the `.t3b` tensor container, PPM (P6)
//! frame ingestion, CSV/JSON report rendering, and the TOML run
//! configuration.
//!
//! `.t3b` layout (little endian): magic `"T3B1"`, version `u32`, dimensions
//! `n, m, s` as `u64`, then `n*m*s` IEEE-754 binary64 values in slice-major,
//! column-major-within-slice order. The 32-byte header plus 8 bytes per
//! entry; round trips are bitwise lossless.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::Deserialize;

use crate::bench::{ExperimentConfig, ReportRow};
use crate::error::{Error, Result};
use crate::mor::{FloorPolicy, Method, TruncationConvention};
use crate::system::MarkovSequence;
use crate::tensor3::Tensor3;

pub const T3B_MAGIC: [u8; 4] = *b"T3B1";
pub const T3B_VERSION: u32 = 1;
pub const T3B_HEADER_LEN: usize = 32;

/// Writes a tensor atomically (temp file in the same directory, then rename).
pub fn write_tensor(path: &Path, t: &Tensor3) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let w = tmp.as_file_mut();
        w.write_all(&T3B_MAGIC)?;
        w.write_all(&T3B_VERSION.to_le_bytes())?;
        let (n, m, s) = t.dims();
        for dim in [n as u64, m as u64, s as u64] {
            w.write_all(&dim.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(t.data().len() * 8);
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<Tensor3> {
    let mut file = fs::File::open(path)?;
    let mut header = [0u8; T3B_HEADER_LEN];
    file.read_exact(&mut header).map_err(|_| Error::TruncatedPayload {
        expected: T3B_HEADER_LEN as u64,
        actual: fs::metadata(path).map(|m| m.len()).unwrap_or(0),
    })?;
    if header[0..4] != T3B_MAGIC {
        return Err(Error::BadMagic);
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != T3B_VERSION {
        return Err(Error::UnsupportedFormat(format!(
            "t3b version {} (supported: {})",
            version, T3B_VERSION
        )));
    }
    let n = u64::from_le_bytes(header[8..16].try_into().unwrap());
    let m = u64::from_le_bytes(header[16..24].try_into().unwrap());
    let s = u64::from_le_bytes(header[24..32].try_into().unwrap());
    let count = n
        .checked_mul(m)
        .and_then(|x| x.checked_mul(s))
        .ok_or(Error::DimOverflow { n, m, s })?;
    let payload_len = count.checked_mul(8).ok_or(Error::DimOverflow { n, m, s })?;
    if n == 0 || m == 0 || s == 0 || usize::try_from(payload_len).is_err() {
        return Err(Error::DimOverflow { n, m, s });
    }
    let mut payload = Vec::new();
    file.read_to_end(&mut payload)?;
    if (payload.len() as u64) < payload_len {
        return Err(Error::TruncatedPayload {
            expected: payload_len,
            actual: payload.len() as u64,
        });
    }
    let data: Vec<f64> = payload[..payload_len as usize]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::UnsupportedFormat(
            "tensor payload contains non-finite values".into(),
        ));
    }
    Tensor3::from_data(n as usize, m as usize, s as usize, data)
}

fn ppm_token(bytes: &[u8], pos: &mut usize) -> Result<u64> {
    // skip whitespace and '#' comments
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::UnsupportedFormat("malformed PPM header".into()));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::UnsupportedFormat("malformed PPM header".into()))
}

/// Parses one binary PPM (P6, 8-bit) frame into a `height x width x 3`
/// tensor with values in `[0, 1]`; the third mode is the color channel.
pub fn read_frame_ppm(path: &Path) -> Result<Tensor3> {
    let bytes = fs::read(path)?;
    if bytes.len() < 2 || &bytes[0..2] != b"P6" {
        return Err(Error::UnsupportedFormat(
            "only binary PPM (P6) images are supported".into(),
        ));
    }
    let mut pos = 2usize;
    let width = ppm_token(&bytes, &mut pos)? as usize;
    let height = ppm_token(&bytes, &mut pos)? as usize;
    let maxval = ppm_token(&bytes, &mut pos)?;
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!(
            "PPM maxval {} (only 8-bit supported)",
            maxval
        )));
    }
    pos += 1; // single whitespace after maxval
    let need = width * height * 3;
    if bytes.len() < pos + need {
        return Err(Error::TruncatedPayload {
            expected: (pos + need) as u64,
            actual: bytes.len() as u64,
        });
    }
    let data = &bytes[pos..pos + need];
    Ok(Tensor3::from_fn(height, width, 3, |i, j, k| {
        data[(i * width + j) * 3 + k] as f64 / 255.0
    }))
}

/// Reads an ordered list of equally-sized frames into a Markov sequence.
pub fn read_frames(paths: &[std::path::PathBuf]) -> Result<MarkovSequence> {
    let mut frames = Vec::with_capacity(paths.len());
    let mut dims: Option<(usize, usize, usize)> = None;
    for (index, p) in paths.iter().enumerate() {
        let f = read_frame_ppm(p)?;
        if let Some(d) = dims {
            if f.dims() != d {
                return Err(Error::InconsistentDimensions {
                    index,
                    expected: format!("{:?}", d),
                    found: format!("{:?}", f.dims()),
                });
            }
        } else {
            dims = Some(f.dims());
        }
        frames.push(f);
    }
    MarkovSequence::from_tensors(frames)
}

/// Writes an `h x w x 3` tensor as a binary PPM frame, clamping to `[0, 1]`.
pub fn write_frame_ppm(path: &Path, frame: &Tensor3) -> Result<()> {
    let (h, w, s) = frame.dims();
    if s != 3 {
        return Err(Error::DimensionMismatch {
            op: "write_frame_ppm",
            details: format!("expected 3 channel slices, got {}", s),
        });
    }
    let mut out = format!("P6\n{} {}\n255\n", w, h).into_bytes();
    for i in 0..h {
        for j in 0..w {
            for k in 0..3 {
                let v = frame.get(i, j, k).clamp(0.0, 1.0);
                out.push((v * 255.0).round() as u8);
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidConfig(format!(
                "unknown report format '{}'",
                other
            ))),
        }
    }
}

fn fmt_float(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{:.16e}", x),
        _ => "nan".into(),
    }
}

/// Renders rows as CSV with the fixed column set
/// `method,k,time_s,params,bytes,rel_err,bound`.
pub fn render_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("method,k,time_s,params,bytes,rel_err,bound\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.method,
            r.k,
            fmt_float(Some(r.time_s)),
            r.params,
            r.bytes,
            fmt_float(r.rel_err),
            fmt_float(r.bound),
        ));
    }
    out
}

pub fn render_json(rows: &[ReportRow]) -> Result<String> {
    serde_json::to_string_pretty(rows)
        .map_err(|e| Error::InvalidConfig(format!("report serialization failed: {}", e)))
}

/// Writes a report to `path` in the requested format.
pub fn emit_report(rows: &[ReportRow], format: ReportFormat, path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::InvalidConfig("refusing to emit an empty report".into()));
    }
    let body = match format {
        ReportFormat::Csv => render_csv(rows),
        ReportFormat::Json => render_json(rows)?,
    };
    fs::write(path, body)?;
    Ok(())
}

/// TOML run configuration. Every field is optional; omitted fields take the
/// defaults below (mirroring [`ExperimentConfig::default`]). Unknown keys are
/// rejected.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfigFile {
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub s: usize,
    pub rho: f64,
    pub seed: u64,
    pub k_list: Vec<usize>,
    pub horizon_t: usize,
    pub horizon_l: usize,
    /// Method names: any of `t-bt`, `bt`, `t-bpod`, `bpod`, `t-era`, `era`.
    pub methods: Vec<String>,
    pub repetitions: usize,
    /// `value` (baselines drop k*s singular values) or `tuple` (drop k).
    pub convention: String,
    /// `proceed`, `shrink`, or `strict`.
    pub floor_policy: String,
    pub grid: usize,
}

impl Default for RunConfigFile {
    fn default() -> Self {
        let d = ExperimentConfig::default();
        RunConfigFile {
            n: d.n,
            m: d.m,
            l: d.l,
            s: d.s,
            rho: d.rho,
            seed: d.seed,
            k_list: d.k_list,
            horizon_t: d.horizon_t,
            horizon_l: d.horizon_l,
            methods: d.methods.iter().map(|m| m.to_string()).collect(),
            repetitions: d.repetitions,
            convention: d.convention.to_string(),
            floor_policy: "proceed".into(),
            grid: d.grid,
        }
    }
}

impl RunConfigFile {
    pub fn into_experiment_config(self) -> Result<ExperimentConfig> {
        let methods = self
            .methods
            .iter()
            .map(|m| m.parse::<Method>())
            .collect::<Result<Vec<_>>>()?;
        let cfg = ExperimentConfig {
            n: self.n,
            m: self.m,
            l: self.l,
            s: self.s,
            rho: self.rho,
            seed: self.seed,
            k_list: self.k_list,
            horizon_t: self.horizon_t,
            horizon_l: self.horizon_l,
            methods,
            repetitions: self.repetitions,
            convention: self.convention.parse::<TruncationConvention>()?,
            floor_policy: self.floor_policy.parse::<FloorPolicy>()?,
            grid: self.grid,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses a TOML run configuration.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let file: RunConfigFile =
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    file.into_experiment_config()
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::{rand_tensor, seeded_rng};

    #[test]
    fn t3b_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = seeded_rng(101);
        let t = rand_tensor(3, 4, 5, &mut rng);
        let path = dir.path().join("t.t3b");
        write_tensor(&path, &t).unwrap();
        let back = read_tensor(&path).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn t3b_scalar_file_size() {
        let dir = tempfile::tempdir().unwrap();
        let t = Tensor3::from_fn(1, 1, 1, |_, _, _| 0.25);
        let path = dir.path().join("one.t3b");
        write_tensor(&path, &t).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 40);
    }

    #[test]
    fn t3b_rejects_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let t = Tensor3::from_fn(2, 2, 2, |i, j, k| (i + j + k) as f64);
        let path = dir.path().join("t.t3b");
        write_tensor(&path, &t).unwrap();

        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        let bad = dir.path().join("bad.t3b");
        fs::write(&bad, &bytes).unwrap();
        assert!(matches!(read_tensor(&bad), Err(Error::BadMagic)));

        let good = fs::read(&path).unwrap();
        let cut = dir.path().join("cut.t3b");
        fs::write(&cut, &good[..good.len() - 4]).unwrap();
        assert!(matches!(
            read_tensor(&cut),
            Err(Error::TruncatedPayload { .. })
        ));

        let mut huge = good.clone();
        huge[8..16].copy_from_slice(&u64::MAX.to_le_bytes());
        let overflow = dir.path().join("huge.t3b");
        fs::write(&overflow, &huge).unwrap();
        assert!(matches!(read_tensor(&overflow), Err(Error::DimOverflow { .. })));
    }

    #[test]
    fn ppm_black_and_red_frames() {
        let dir = tempfile::tempdir().unwrap();
        let black = dir.path().join("black.ppm");
        let mut bytes = b"P6\n5 5\n255\n".to_vec();
        bytes.extend(std::iter::repeat_n(0u8, 75));
        fs::write(&black, &bytes).unwrap();
        let t = read_frame_ppm(&black).unwrap();
        assert_eq!(t.dims(), (5, 5, 3));
        assert_eq!(t.norm(), 0.0);

        let red = dir.path().join("red.ppm");
        let mut bytes = b"P6\n# a comment\n5 5\n255\n".to_vec();
        for _ in 0..25 {
            bytes.extend([255u8, 0, 0]);
        }
        fs::write(&red, &bytes).unwrap();
        let t = read_frame_ppm(&red).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(t.get(i, j, 0), 1.0);
                assert_eq!(t.get(i, j, 1), 0.0);
                assert_eq!(t.get(i, j, 2), 0.0);
            }
        }
    }

    #[test]
    fn ppm_round_trip_and_frame_checks() {
        let dir = tempfile::tempdir().unwrap();
        let frame = Tensor3::from_fn(4, 6, 3, |i, j, k| {
            ((i * 6 + j) * 3 + k) as f64 / (4.0 * 6.0 * 3.0)
        });
        let p = dir.path().join("f.ppm");
        write_frame_ppm(&p, &frame).unwrap();
        let back = read_frame_ppm(&p).unwrap();
        // 8-bit quantization
        assert!(crate::tensor3::rel_err(&frame, &back) < 0.01);

        // inconsistent frame sizes are rejected
        let other = dir.path().join("g.ppm");
        write_frame_ppm(&other, &Tensor3::zeros(5, 5, 3)).unwrap();
        let r = read_frames(&[p, other]);
        assert!(matches!(r, Err(Error::InconsistentDimensions { .. })));
    }

    #[test]
    fn csv_layout() {
        let rows = vec![ReportRow {
            method: "t-bt".into(),
            k: 5,
            time_s: 0.125,
            params: 100,
            bytes: 800,
            rel_err: Some(1e-9),
            bound: Some(2e-9),
            error: None,
        }];
        let csv = render_csv(&rows);
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "method,k,time_s,params,bytes,rel_err,bound");
        assert!(lines[1].starts_with("t-bt,5,"));
        assert_eq!(lines[1].split(',').count(), 7);
    }

    #[test]
    fn json_round_trip() {
        let rows = vec![
            ReportRow {
                method: "t-era".into(),
                k: 0,
                time_s: 0.5,
                params: 10725,
                bytes: 85800,
                rel_err: Some(1e-8),
                bound: Some(0.0),
                error: None,
            },
            ReportRow {
                method: "era".into(),
                k: 99,
                time_s: 0.25,
                params: 0,
                bytes: 0,
                rel_err: None,
                bound: None,
                error: Some("truncation too large".into()),
            },
        ];
        let json = render_json(&rows).unwrap();
        let back: Vec<ReportRow> = serde_json::from_str(&json).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0], rows[0]);
        assert_eq!(back[1], rows[1]);
    }

    #[test]
    fn config_parsing_and_unknown_keys() {
        let cfg = parse_config(
            "n = 10\nm = 2\nl = 2\ns = 3\nk_list = [1, 2]\nmethods = [\"t-bt\", \"bt\"]\n",
        )
        .unwrap();
        assert_eq!(cfg.n, 10);
        assert_eq!(cfg.methods, vec![Method::TBt, Method::Bt]);
        // defaults fill the rest
        assert_eq!(cfg.grid, crate::system::DEFAULT_HINF_GRID);
        assert_eq!(cfg.rho, 0.9);

        let bad = parse_config("unknown_key = 1\n");
        assert!(matches!(bad, Err(Error::InvalidConfig(_))));

        let bad_method = parse_config("methods = [\"warp\"]\n");
        assert!(matches!(bad_method, Err(Error::InvalidConfig(_))));
    }
}
