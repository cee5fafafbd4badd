//! Versioned JSON and CSV artifacts.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use fockfit_core::bootstrap::{ConfidenceInterval, IntervalMethod, Parameter};
use fockfit_core::estimation::{FitResult, FockHistogram, WeightScheme};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

fn check_version(found: u32, what: &str) -> Result<()> {
    if found == FORMAT_VERSION {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "{what}: unsupported format_version {found} (expected {FORMAT_VERSION})"
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountsFile {
    pub format_version: u32,
    pub n_max: usize,
    pub counts: Vec<u64>,
    pub overflow: u64,
    pub total: u64,
}

impl From<&FockHistogram> for CountsFile {
    fn from(h: &FockHistogram) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            n_max: h.n_max(),
            counts: h.counts().to_vec(),
            overflow: h.overflow_count(),
            total: h.total(),
        }
    }
}

impl CountsFile {
    pub fn to_histogram(&self) -> Result<FockHistogram> {
        check_version(self.format_version, "counts file")?;
        if self.counts.len() != self.n_max + 1 {
            return Err(Error::Validation(format!(
                "counts file: n_max = {} needs {} counts, found {}",
                self.n_max,
                self.n_max + 1,
                self.counts.len()
            )));
        }
        Ok(FockHistogram::with_total(self.counts.clone(), self.overflow, self.total)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorRecord {
    pub nu: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalRecord {
    pub parameter: String,
    pub method: String,
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
}

impl From<&ConfidenceInterval> for IntervalRecord {
    fn from(ci: &ConfidenceInterval) -> Self {
        Self {
            parameter: ci.parameter.name().to_owned(),
            method: ci.method.name().to_owned(),
            level: ci.level,
            lower: ci.lower,
            upper: ci.upper,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateFile {
    pub format_version: u32,
    pub vq: f64,
    pub vp: f64,
    pub r: f64,
    pub nbar: f64,
    pub objective: f64,
    pub converged: bool,
    pub weight_scheme: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub intervals: Vec<IntervalRecord>,
}

impl EstimateFile {
    pub fn new(fit: &FitResult, scheme: &WeightScheme) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            vq: fit.variances.vq(),
            vp: fit.variances.vp(),
            r: fit.state.r(),
            nbar: fit.state.nbar(),
            objective: fit.objective,
            converged: fit.converged,
            weight_scheme: scheme.name().to_owned(),
            prior: match scheme {
                WeightScheme::Posterior(p) => Some(PriorRecord { nu: p.nu(), eta: p.eta() }),
                _ => None,
            },
            intervals: Vec::new(),
        }
    }

    pub fn interval(&self, parameter: Parameter, method: IntervalMethod) -> Option<&IntervalRecord> {
        self.intervals
            .iter()
            .find(|i| i.parameter == parameter.name() && i.method == method.name())
    }
}

/// Reads a JSON document; parse errors name the offending field path.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut de = serde_json::Deserializer::from_reader(BufReader::new(file));
    serde_path_to_error::deserialize(&mut de).map_err(|source| Error::Json {
        path: path.to_owned(),
        source,
    })
}

pub fn read_counts(path: &Path) -> Result<FockHistogram> {
    read_json::<CountsFile>(path)?.to_histogram()
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact types serialize infallibly");
    s.push('\n');
    s
}

/// Writes `bytes` to a temporary file beside `path`, then renames it over
/// `path`; readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, to_json_string(value).as_bytes())
}

/// Serializes `rows` as CSV with a header line.
pub fn to_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|source| Error::Csv {
            path: path.to_owned(),
            source,
        })?;
    }
    w.into_inner().map_err(|e| Error::io(path, e.into_error()))
}
