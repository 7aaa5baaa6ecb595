//! File formats.
//!
//! | artifact        | layout                                                                 |
//! |-----------------|------------------------------------------------------------------------|
//! | state JSON      | `{"dim", "window", "amplitudes": [[re, im], ...]}`                     |
//! | density JSON    | `{"dim", "entries": [[re, im], ...]}`, row-major, `dim²` entries       |
//! | diagnostics     | [`Diagnostics`] as JSON                                                |
//! | counts CSV      | `setting_id,projA_kind,projA_params,projB_kind,projB_params,counts,shots` |
//! | labeled matrix  | header `state,<col labels>`, one row per label, values as `{:.16e}`     |
//!
//! JSON is pretty-printed with a trailing newline. Floats are written in their
//! shortest round-trip form, so write → read → write is byte-identical.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bellbasis::ModeWindow;
use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, PureState, C64};
use crate::measurement::{CountRecord, MeasurementSetting, ProjectorSpec};
use crate::tomography::Diagnostics;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub dim: usize,
    pub window: Vec<i64>,
    pub amplitudes: Vec<[f64; 2]>,
}

impl StateRecord {
    /// `window` is the single-arm window; `state` may be single-arm or joint.
    pub fn new(state: &PureState, window: &ModeWindow) -> Result<Self> {
        let d = window.d();
        if state.dim() != d && state.dim() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: state.dim(),
            });
        }
        Ok(StateRecord {
            dim: state.dim(),
            window: window.labels().to_vec(),
            amplitudes: state.amplitudes().iter().map(|a| [a.re, a.im]).collect(),
        })
    }

    pub fn into_parts(self) -> Result<(PureState, ModeWindow)> {
        if self.amplitudes.len() != self.dim {
            return Err(Error::format(
                "state",
                format!("{} amplitudes for dim {}", self.amplitudes.len(), self.dim),
            ));
        }
        let window = ModeWindow::new(self.window)?;
        let d = window.d();
        if self.dim != d && self.dim != d * d {
            return Err(Error::format(
                "state",
                format!("dim {} does not fit a {d}-mode window", self.dim),
            ));
        }
        let state = PureState::new(self.amplitudes.iter().map(|&[re, im]| C64::new(re, im)).collect())?;
        Ok((state, window))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRecord {
    pub dim: usize,
    pub entries: Vec<[f64; 2]>,
}

impl DensityRecord {
    pub fn new(rho: &DensityMatrix) -> Self {
        let m = rho.matrix();
        let dim = rho.dim();
        let entries = (0..dim)
            .flat_map(|i| (0..dim).map(move |j| [m[(i, j)].re, m[(i, j)].im]))
            .collect();
        DensityRecord { dim, entries }
    }

    pub fn into_density(self) -> Result<DensityMatrix> {
        if self.entries.len() != self.dim * self.dim {
            return Err(Error::format(
                "density matrix",
                format!("{} entries for dim {}", self.entries.len(), self.dim),
            ));
        }
        let m = DMatrix::from_row_iterator(
            self.dim,
            self.dim,
            self.entries.iter().map(|&[re, im]| C64::new(re, im)),
        );
        DensityMatrix::new(m)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::format("json", e))?;
    s.push('\n');
    Ok(s)
}

pub fn from_json<T: DeserializeOwned>(text: &str, what: &'static str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::format(what, e))
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    write_text(path, &to_json(value)?)
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>, what: &'static str) -> Result<T> {
    from_json(&read_text(path)?, what)
}

pub fn write_state(path: impl AsRef<Path>, state: &PureState, window: &ModeWindow) -> Result<()> {
    write_json(path, &StateRecord::new(state, window)?)
}

pub fn read_state(path: impl AsRef<Path>) -> Result<(PureState, ModeWindow)> {
    read_json::<StateRecord>(path, "state")?.into_parts()
}

pub fn write_density(path: impl AsRef<Path>, rho: &DensityMatrix) -> Result<()> {
    write_json(path, &DensityRecord::new(rho))
}

pub fn read_density(path: impl AsRef<Path>) -> Result<DensityMatrix> {
    read_json::<DensityRecord>(path, "density matrix")?.into_density()
}

pub fn write_diagnostics(path: impl AsRef<Path>, diag: &Diagnostics) -> Result<()> {
    write_json(path, diag)
}

pub fn read_diagnostics(path: impl AsRef<Path>) -> Result<Diagnostics> {
    read_json(path, "diagnostics")
}

fn projector_fields(p: &ProjectorSpec) -> (&'static str, String) {
    match *p {
        ProjectorSpec::Pure { k } => ("pure", k.to_string()),
        ProjectorSpec::Superposition { k1, k2, quarter } => ("superposition", format!("{k1};{k2};{quarter}")),
    }
}

fn parse_projector(kind: &str, params: &str) -> Result<ProjectorSpec> {
    let nums: Vec<u64> = params
        .split(';')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|e| Error::format("counts", format!("'{params}': {e}")))
        })
        .collect::<Result<_>>()?;
    match (kind, nums.as_slice()) {
        ("pure", &[k]) => Ok(ProjectorSpec::Pure { k: k as usize }),
        ("superposition", &[k1, k2, q]) if q < 4 => Ok(ProjectorSpec::Superposition {
            k1: k1 as usize,
            k2: k2 as usize,
            quarter: q as u8,
        }),
        _ => Err(Error::format("counts", format!("bad projector '{kind}' '{params}'"))),
    }
}

const COUNTS_HEADER: [&str; 7] = [
    "setting_id",
    "projA_kind",
    "projA_params",
    "projB_kind",
    "projB_params",
    "counts",
    "shots",
];

pub fn counts_to_csv(records: &[CountRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::format("counts", e);
    w.write_record(COUNTS_HEADER).map_err(csv_err)?;
    for r in records {
        let (ka, pa) = projector_fields(&r.setting.a);
        let (kb, pb) = projector_fields(&r.setting.b);
        w.write_record([
            r.setting_id.to_string(),
            ka.into(),
            pa,
            kb.into(),
            pb,
            r.counts.to_string(),
            r.shots.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format("counts", e))?;
    String::from_utf8(bytes).map_err(|e| Error::format("counts", e))
}

pub fn counts_from_csv(text: &str) -> Result<Vec<CountRecord>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| Error::format("counts", e))?;
    if header.iter().collect::<Vec<_>>() != COUNTS_HEADER {
        return Err(Error::format("counts", format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::format("counts", e))?;
        let num = |i: usize| -> Result<u64> {
            rec[i]
                .trim()
                .parse()
                .map_err(|e| Error::format("counts", format!("row {}: '{}': {e}", line + 1, &rec[i])))
        };
        let setting = MeasurementSetting {
            a: parse_projector(&rec[1], &rec[2])?,
            b: parse_projector(&rec[3], &rec[4])?,
        };
        let shots = num(6)?;
        if shots == 0 {
            return Err(Error::format("counts", format!("row {}: zero shots", line + 1)));
        }
        out.push(CountRecord {
            setting_id: num(0)? as usize,
            setting,
            counts: num(5)?,
            shots,
        });
    }
    if out.is_empty() {
        return Err(Error::format("counts", "no rows"));
    }
    Ok(out)
}

pub fn write_counts(path: impl AsRef<Path>, records: &[CountRecord]) -> Result<()> {
    write_text(path, &counts_to_csv(records)?)
}

pub fn read_counts(path: impl AsRef<Path>) -> Result<Vec<CountRecord>> {
    counts_from_csv(&read_text(path)?)
}

/// Real matrix with row and column labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub values: DMatrix<f64>,
}

impl LabeledMatrix {
    pub fn new(row_labels: Vec<String>, col_labels: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if values.shape() != (row_labels.len(), col_labels.len()) {
            return Err(Error::DimensionMismatch {
                expected: values.nrows() * values.ncols(),
                found: row_labels.len() * col_labels.len(),
            });
        }
        Ok(LabeledMatrix {
            row_labels,
            col_labels,
            values,
        })
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::format("matrix", e);
        let mut header = vec!["state".to_string()];
        header.extend(self.col_labels.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for (i, label) in self.row_labels.iter().enumerate() {
            let mut row = vec![label.clone()];
            row.extend(self.values.row(i).iter().map(|v| format!("{v:.16e}")));
            w.write_record(&row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::format("matrix", e))?;
        String::from_utf8(bytes).map_err(|e| Error::format("matrix", e))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| Error::format("matrix", e))?.clone();
        let col_labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut row_labels = Vec::new();
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::format("matrix", e))?;
            if rec.len() != col_labels.len() + 1 {
                return Err(Error::format(
                    "matrix",
                    format!("row '{}' has {} fields", &rec[0], rec.len()),
                ));
            }
            row_labels.push(rec[0].to_string());
            for v in rec.iter().skip(1) {
                let x: f64 = v
                    .trim()
                    .parse()
                    .map_err(|e| Error::format("matrix", format!("'{v}': {e}")))?;
                if !x.is_finite() {
                    return Err(Error::NonFinite("matrix CSV"));
                }
                values.push(x);
            }
        }
        if row_labels.is_empty() || col_labels.is_empty() {
            return Err(Error::format("matrix", "empty matrix"));
        }
        let values = DMatrix::from_row_slice(row_labels.len(), col_labels.len(), &values);
        Ok(LabeledMatrix {
            row_labels,
            col_labels,
            values,
        })
    }
}

pub fn write_matrix(path: impl AsRef<Path>, m: &LabeledMatrix) -> Result<()> {
    write_text(path, &m.to_csv()?)
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<LabeledMatrix> {
    LabeledMatrix::from_csv(&read_text(path)?)
}

/// Measured overlaps of the 16 generated states with the ideal basis, as
/// reported for the experiment. Columns run `(0,0), (1,0), (2,0), (3,0), (0,1), …`.
pub const TABLE1_CSV: &str = include_str!("../data/table1_overlaps.csv");

pub fn table1() -> LabeledMatrix {
    LabeledMatrix::from_csv(TABLE1_CSV).expect("bundled table parses")
}
