//! File formats: measures, lattices, envelopes, configs, CSV tables and matrix dumps.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::geometry::{DyadicLattice, Point, SquareKey};
use crate::kernel::Envelope;
use crate::measure::{Atom, Generator, PlanarMeasure};
use crate::pipeline::ExperimentConfig;
use crate::suite::SuiteConfig;
use crate::transform::OperatorMatrix;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

fn parse<T: DeserializeOwned>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

/// Provenance of a measure file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Generator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// `{atoms: [{z: [re, im], w}], meta: {generator, seed}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureFile {
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub meta: MeasureMeta,
}

impl MeasureFile {
    pub fn from_measure(mu: &PlanarMeasure, meta: MeasureMeta) -> Self {
        MeasureFile {
            atoms: mu.atoms().to_vec(),
            meta,
        }
    }

    pub fn measure(&self) -> Result<PlanarMeasure> {
        PlanarMeasure::new(self.atoms.clone())
    }
}

/// Parses a measure file; errors carry the JSON line and column.
pub fn parse_measure(text: &str) -> Result<PlanarMeasure> {
    parse::<MeasureFile>(text)?.measure()
}

pub fn measure_json(mu: &PlanarMeasure, meta: MeasureMeta) -> Result<String> {
    Ok(serde_json::to_string_pretty(&MeasureFile::from_measure(mu, meta))?)
}

/// `{shift: [re, im], seed, squares: [{level, ix, iy}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeFile {
    pub shift: Point,
    pub seed: u64,
    #[serde(default)]
    pub squares: Vec<SquareKey>,
}

impl LatticeFile {
    pub fn from_lattice(l: &DyadicLattice, squares: Vec<SquareKey>) -> Self {
        LatticeFile {
            shift: l.shift,
            seed: l.seed,
            squares,
        }
    }

    pub fn lattice(&self) -> Result<DyadicLattice> {
        let s = self.shift;
        let ok = |v: f64| (-0.25..0.25).contains(&v);
        if !(ok(s.re) && ok(s.im)) {
            return domain("lattice shift must lie in [-1/4, 1/4)^2");
        }
        Ok(DyadicLattice::with_shift(s, self.seed))
    }
}

/// Parses a lattice file and validates the shift and square levels.
pub fn parse_lattice(text: &str) -> Result<(DyadicLattice, Vec<SquareKey>)> {
    let f: LatticeFile = parse(text)?;
    if let Some(k) = f.squares.iter().find(|k| k.level > 60) {
        return domain(format!("square level {} exceeds 60", k.level));
    }
    Ok((f.lattice()?, f.squares))
}

/// Parses `{primitives: [{kind, ...}]}` and validates every primitive.
pub fn parse_envelope(text: &str) -> Result<Envelope> {
    let e: Envelope = parse(text)?;
    Envelope::new(e.primitives)
}

/// Parses and validates an experiment config; unknown fields are rejected.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let c: ExperimentConfig = parse(text)?;
    c.validate()?;
    Ok(c)
}

pub fn parse_suite_config(text: &str) -> Result<SuiteConfig> {
    let c: SuiteConfig = parse(text)?;
    c.params.validate()?;
    Ok(c)
}

/// Writes a header and rows as CSV.
pub fn write_csv<S: AsRef<str>>(path: &Path, header: &[&str], rows: &[Vec<S>]) -> Result<()> {
    let text = csv_string(header, rows)?;
    write_text(path, &text)
}

pub fn csv_string<S: AsRef<str>>(header: &[&str], rows: &[Vec<S>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_io = |e: csv::Error| Error::Io {
        path: PathBuf::from("<csv>"),
        source: std::io::Error::other(e.to_string()),
    };
    w.write_record(header).map_err(to_io)?;
    for r in rows {
        w.write_record(r.iter().map(|s| s.as_ref())).map_err(to_io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io {
        path: PathBuf::from("<csv>"),
        source: std::io::Error::other(e.to_string()),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Sidecar of a binary matrix dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixSidecar {
    pub n: usize,
    pub kernel: String,
    pub phi: Vec<f64>,
}

/// Writes the matrix as row-major little-endian `(re, im)` doubles to `path` and the
/// sidecar to `path` with extension `json`.
pub fn dump_matrix(path: &Path, m: &OperatorMatrix, kernel: &str, phi: &[f64]) -> Result<PathBuf> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut buf = Vec::with_capacity(m.entries().len() * 16);
    for v in m.entries() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&buf).map_err(io_err(path))?;
    let side = path.with_extension("json");
    let meta = MatrixSidecar {
        n: m.dim(),
        kernel: kernel.to_string(),
        phi: phi.to_vec(),
    };
    write_text(&side, &serde_json::to_string_pretty(&meta)?)?;
    Ok(side)
}

/// Reads a dump written by [`dump_matrix`] back as `(sidecar, entries)`.
pub fn load_matrix(path: &Path) -> Result<(MatrixSidecar, Vec<num_complex::Complex64>)> {
    let side: MatrixSidecar = parse(&read_text(&path.with_extension("json"))?)?;
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() != side.n * side.n * 16 {
        return domain(format!("matrix file holds {} bytes, expected {}", bytes.len(), side.n * side.n * 16));
    }
    let vals = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            num_complex::Complex64::new(re, im)
        })
        .collect();
    Ok((side, vals))
}

/// Output tree `reports/`, `tables/`, `measures/` under a root directory.
#[derive(Clone, Debug)]
pub struct OutputDir {
    pub root: PathBuf,
}

impl OutputDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        OutputDir { root: root.into() }
    }

    pub fn report_path(&self, name: &str) -> PathBuf {
        self.root.join("reports").join(format!("{name}.json"))
    }

    pub fn table_path(&self, name: &str) -> PathBuf {
        self.root.join("tables").join(format!("{name}.csv"))
    }

    pub fn measure_path(&self, name: &str) -> PathBuf {
        self.root.join("measures").join(format!("{name}.json"))
    }

    pub fn write_report<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let p = self.report_path(name);
        write_text(&p, &serde_json::to_string_pretty(value)?)?;
        Ok(p)
    }

    pub fn write_table<S: AsRef<str>>(&self, name: &str, header: &[&str], rows: &[Vec<S>]) -> Result<PathBuf> {
        let p = self.table_path(name);
        write_csv(&p, header, rows)?;
        Ok(p)
    }

    pub fn write_measure(&self, name: &str, mu: &PlanarMeasure, meta: MeasureMeta) -> Result<PathBuf> {
        let p = self.measure_path(name);
        write_text(&p, &measure_json(mu, meta)?)?;
        Ok(p)
    }
}
