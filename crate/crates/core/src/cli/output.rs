//! Run manifests, number formatting and trajectory CSV rows.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{Equilibrium, ShiftedRate, ShiftedState};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything needed to repeat a run. Contains no timestamps or host data
/// so identical invocations produce identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name, verbatim.
    pub arguments: Vec<String>,
    pub inputs: Vec<String>,
    pub seed: Option<u64>,
    pub step: Option<f64>,
    pub horizon: Option<f64>,
    pub outputs: Vec<String>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(command: &str, arguments: &[String]) -> Self {
        RunManifest {
            command: command.into(),
            arguments: arguments.to_vec(),
            inputs: Vec::new(),
            seed: None,
            step: None,
            horizon: None,
            outputs: Vec::new(),
            tool_version: TOOL_VERSION.into(),
        }
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        write_json(path, self)
    }
}

pub fn display(path: &Path) -> String {
    path.display().to_string()
}

/// `<path>.manifest.json`
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    text
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    std::fs::write(path, to_json(value))
}

/// Shortest round-trip decimal for ordinary magnitudes, exponent form for
/// very large or small ones. Never locale dependent.
pub fn fmt_f64(out: &mut String, x: f64) {
    let a = x.abs();
    if x == 0.0 {
        out.push('0');
    } else if (1e-5..1e16).contains(&a) || !x.is_finite() {
        let _ = write!(out, "{x}");
    } else {
        let _ = write!(out, "{x:e}");
    }
}

/// Streams trajectory rows `t, v, dv, x, w_1..w_n, y_1..y_n, V`.
pub struct CsvSink {
    out: BufWriter<File>,
    x0: f64,
    y0: Vec<f64>,
    line: String,
    /// First write failure; later rows are dropped.
    pub error: Option<io::Error>,
}

impl CsvSink {
    pub fn create(path: &Path, eq: &Equilibrium) -> io::Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        let n = eq.n();
        let mut header = String::from("t,v,dv,x");
        for i in 1..=n {
            let _ = write!(header, ",w_{i}");
        }
        for i in 1..=n {
            let _ = write!(header, ",y_{i}");
        }
        header.push_str(",V\n");
        out.write_all(header.as_bytes())?;
        Ok(CsvSink {
            out,
            x0: eq.x0,
            y0: eq.y0.iter().copied().collect(),
            line: String::new(),
            error: None,
        })
    }

    pub fn row(&mut self, t: f64, s: &ShiftedState, r: &ShiftedRate, lyap: f64) {
        if self.error.is_some() {
            return;
        }
        let line = &mut self.line;
        line.clear();
        let x = self.x0 * s.v.exp();
        for (k, value) in [t, s.v, r.dv, x].into_iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            fmt_f64(line, value);
        }
        for w in s.w.iter() {
            line.push(',');
            fmt_f64(line, *w);
        }
        for (w, y0) in s.w.iter().zip(&self.y0) {
            line.push(',');
            fmt_f64(line, y0 + w);
        }
        line.push(',');
        fmt_f64(line, lyap);
        line.push('\n');
        if let Err(e) = self.out.write_all(line.as_bytes()) {
            self.error = Some(e);
        }
    }

    pub fn finish(mut self) -> io::Result<()> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()
    }
}
