//! Legacy VTK field output and CSV tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fe::Field;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

/// Legacy ASCII VTK text for `field`. P2 fields are written on all nodes,
/// each triangle split into four linear pieces.
pub fn vtk_string(field: &Field, name: &str) -> String {
    let space = field.space();
    let mesh = space.mesh();
    let coords = space.dof_coords();
    let mut cells: Vec<[usize; 3]> = Vec::new();
    for t in 0..mesh.n_triangles() {
        let d = space.cell_dofs(t);
        if space.degree() == 1 {
            cells.push([d[0], d[1], d[2]]);
        } else {
            let [v0, v1, v2, m01, m12, m20] = [d[0], d[1], d[2], d[3], d[4], d[5]];
            cells.extend([[v0, m01, m20], [m01, v1, m12], [m20, m12, v2], [m01, m12, m20]]);
        }
    }
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(s, "{name}");
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", coords.len());
    for p in coords {
        let _ = writeln!(s, "{:.16e} {:.16e} 0", p.x, p.y);
    }
    let _ = writeln!(s, "CELLS {} {}", cells.len(), 4 * cells.len());
    for c in &cells {
        let _ = writeln!(s, "3 {} {} {}", c[0], c[1], c[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {}", cells.len());
    for _ in &cells {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "POINT_DATA {}", coords.len());
    let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
    for v in field.values() {
        let _ = writeln!(s, "{v:.16e}");
    }
    s
}

pub fn write_vtk(field: &Field, name: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, vtk_string(field, name)).map_err(io_err(path))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
}

impl Value {
    pub fn as_f64(self) -> f64 {
        match self {
            Value::Int(i) => i as f64,
            Value::Float(x) => x,
        }
    }

    fn render(self) -> String {
        match self {
            Value::Int(i) => i.to_string(),
            Value::Float(x) => format!("{x:.16e}"),
        }
    }

    fn parse(s: &str) -> Option<Self> {
        s.parse::<i64>().map(Value::Int).ok().or_else(|| s.parse::<f64>().map(Value::Float).ok())
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Float(x)
    }
}

impl From<usize> for Value {
    fn from(i: usize) -> Self {
        Value::Int(i as i64)
    }
}

/// Rectangular table with a header row.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k].as_f64()).collect())
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.iter().map(|v| v.render())).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }
}

/// Writes `table` as CSV; floats use 17 significant digits.
pub fn write_csv(table: &Table, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, table.to_csv_string()).map_err(io_err(path))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Table> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|s| Value::parse(s).ok_or_else(|| Error::Parse { path: path.to_path_buf(), message: format!("row {}: invalid number {s:?}", line + 2) }))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// Creates `dir` and its parents.
pub fn ensure_dir(dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))
}
