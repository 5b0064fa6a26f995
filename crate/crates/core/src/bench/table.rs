//! Result rows and their CSV encoding.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 10] = [
    "sweep_param",
    "sweep_value",
    "scheme",
    "seed",
    "iteration",
    "per_sum",
    "latency_sum",
    "c_global",
    "converged",
    "iters_used",
];

/// Seed column: a concrete run seed or the across-seed mean row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SeedCell {
    Seed(u64),
    Mean,
}

impl fmt::Display for SeedCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeedCell::Seed(s) => write!(f, "{s}"),
            SeedCell::Mean => f.write_str("mean"),
        }
    }
}

impl FromStr for SeedCell {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "mean" {
            return Ok(SeedCell::Mean);
        }
        s.parse()
            .map(SeedCell::Seed)
            .map_err(|_| Error::validation(format!("bad seed cell '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_param: String,
    /// `None` when nothing is swept.
    pub sweep_value: Option<f64>,
    pub scheme: String,
    pub seed: SeedCell,
    pub iteration: usize,
    pub per_sum: f64,
    pub latency_sum: f64,
    pub c_global: f64,
    /// For mean rows: every seed converged.
    pub converged: bool,
    /// For mean rows: the largest count over seeds.
    pub iters_used: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

/// Fixed 12-significant-digit rendering used for every metric column.
pub fn format_float(v: f64) -> String {
    format!("{v:.11e}")
}

fn parse_float(s: &str, column: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::validation(format!("column {column}: bad number '{s}'")))
}

impl ResultRow {
    fn cells(&self) -> [String; 10] {
        [
            self.sweep_param.clone(),
            self.sweep_value.map(|v| v.to_string()).unwrap_or_default(),
            self.scheme.clone(),
            self.seed.to_string(),
            self.iteration.to_string(),
            format_float(self.per_sum),
            format_float(self.latency_sum),
            format_float(self.c_global),
            self.converged.to_string(),
            self.iters_used.to_string(),
        ]
    }

    fn from_cells(cells: &csv::StringRecord) -> Result<Self> {
        if cells.len() != CSV_HEADER.len() {
            return Err(Error::validation(format!(
                "expected {} columns, found {}",
                CSV_HEADER.len(),
                cells.len()
            )));
        }
        let int = |i: usize| -> Result<usize> {
            cells[i].parse().map_err(|_| {
                Error::validation(format!(
                    "column {}: bad integer '{}'",
                    CSV_HEADER[i], &cells[i]
                ))
            })
        };
        Ok(Self {
            sweep_param: cells[0].to_string(),
            sweep_value: if cells[1].is_empty() {
                None
            } else {
                Some(parse_float(&cells[1], "sweep_value")?)
            },
            scheme: cells[2].to_string(),
            seed: cells[3].parse()?,
            iteration: int(4)?,
            per_sum: parse_float(&cells[5], "per_sum")?,
            latency_sum: parse_float(&cells[6], "latency_sum")?,
            c_global: parse_float(&cells[7], "c_global")?,
            converged: cells[8].parse().map_err(|_| {
                Error::validation(format!("column converged: bad bool '{}'", &cells[8]))
            })?,
            iters_used: int(9)?,
        })
    }
}

impl ResultTable {
    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::contract("refusing to write an empty result table"));
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(CSV_HEADER)?;
        for row in &self.rows {
            w.write_record(row.cells())?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn parse<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        if header.iter().ne(CSV_HEADER.iter().copied()) {
            return Err(Error::validation(format!(
                "unexpected header: {}",
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let rows = r
            .records()
            .map(|rec| ResultRow::from_cells(&rec?))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows })
    }

    /// Rows carrying a concrete seed.
    pub fn data_rows(&self) -> impl Iterator<Item = &ResultRow> {
        self.rows
            .iter()
            .filter(|r| matches!(r.seed, SeedCell::Seed(_)))
    }

    pub fn mean_rows(&self) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(|r| r.seed == SeedCell::Mean)
    }
}

/// Write the table to `path`.
pub fn emit_csv(table: &ResultTable, path: &Path) -> Result<()> {
    if table.rows.is_empty() {
        return Err(Error::contract("refusing to write an empty result table"));
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    table.write(std::io::BufWriter::new(file))
}

/// Header plus string cells, for consumers that only need some columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(file)
    }

    pub fn parse<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| Ok(rec?.iter().map(str::to_string).collect()))
            .collect::<Result<Vec<Vec<String>>>>()?;
        Ok(Self { headers, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    /// Indices of `names`, or a validation error listing the missing ones.
    pub fn require(&self, names: &[&str]) -> Result<Vec<usize>> {
        let missing: Vec<&str> = names
            .iter()
            .copied()
            .filter(|n| self.column(n).is_none())
            .collect();
        if !missing.is_empty() {
            return Err(Error::validation(format!(
                "missing columns: {}",
                missing.join(", ")
            )));
        }
        Ok(names.iter().map(|n| self.column(n).unwrap()).collect())
    }
}

impl From<&ResultTable> for RawTable {
    fn from(t: &ResultTable) -> Self {
        Self {
            headers: CSV_HEADER.iter().map(|s| s.to_string()).collect(),
            rows: t.rows.iter().map(|r| r.cells().to_vec()).collect(),
        }
    }
}
