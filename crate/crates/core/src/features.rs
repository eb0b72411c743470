//! Dense labeled feature matrices consumed by the models.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::table::{PartitionedTable, Row, RowId};

/// One labeled feature row, the table-level view of a matrix row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint<T> {
    pub features: Vec<T>,
    pub label: bool,
}

/// Row-major dense matrix with one 0/1 label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    columns: Vec<String>,
    row_ids: Vec<RowId>,
    data: Vec<T>,
    labels: Vec<u8>,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            row_ids: Vec::new(),
            data: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, id: RowId, features: &[T], label: bool) -> Result<()> {
        if features.len() != self.width() {
            return Err(Error::Shape {
                expected: self.width(),
                actual: features.len(),
            });
        }
        self.row_ids.push(id);
        self.data.extend_from_slice(features);
        self.labels.push(u8::from(label));
        Ok(())
    }

    pub fn from_rows(
        columns: Vec<String>,
        rows: impl IntoIterator<Item = (RowId, Vec<T>, bool)>,
    ) -> Result<Self> {
        let mut m = Self::new(columns);
        for (id, f, l) in rows {
            m.push(id, &f, l)?;
        }
        Ok(m)
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn row_ids(&self) -> &[RowId] {
        &self.row_ids
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[T] {
        let w = self.width();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        // chunks_exact(0) panics; a zero-width matrix cannot be built anyway
        self.data.chunks_exact(self.width().max(1))
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    /// Multiplies every feature by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        let mut m = self.clone();
        m.data.iter_mut().for_each(|v| *v = *v * factor);
        m
    }

    pub fn to_table(&self, partitions: usize) -> Result<PartitionedTable<LabeledPoint<T>>> {
        let rows = (0..self.len())
            .map(|i| {
                Row::new(
                    self.row_ids[i],
                    LabeledPoint {
                        features: self.row(i).to_vec(),
                        label: self.labels[i] == 1,
                    },
                )
            })
            .collect();
        PartitionedTable::partition(rows, partitions)
    }

    pub fn from_table(columns: Vec<String>, table: &PartitionedTable<LabeledPoint<T>>) -> Result<Self> {
        let rows = table.collect()?;
        let mut m = Self::new(columns);
        m.row_ids.reserve(rows.len());
        m.data.reserve(rows.len() * m.width());
        for r in rows {
            m.push(r.id, &r.value.features, r.value.label)?;
        }
        Ok(m)
    }

    /// CSV with header `row_id,<columns>,label`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("row_id,");
        out.push_str(&self.columns.join(","));
        out.push_str(",label\n");
        for (i, row) in self.rows().enumerate().take(self.len()) {
            let _ = write!(out, "{}", self.row_ids[i]);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{}", self.labels[i]);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn parse_csv(text: &str, source: &Path) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse {
            file: source.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| perr(1, "missing header".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 3 || cols[0] != "row_id" || cols[cols.len() - 1] != "label" {
            return Err(perr(1, "expected header `row_id,<features...>,label`".into()));
        }
        let mut m = Self::new(cols[1..cols.len() - 1].iter().map(|s| s.to_string()).collect());
        let mut buf = Vec::with_capacity(m.width());
        for (i, line) in lines {
            let toks: Vec<&str> = line.split(',').map(str::trim).collect();
            if toks.len() != cols.len() {
                return Err(perr(i + 1, format!("expected {} fields, found {}", cols.len(), toks.len())));
            }
            let id = toks[0]
                .parse::<u64>()
                .map_err(|_| perr(i + 1, format!("bad row_id `{}`", toks[0])))?;
            buf.clear();
            for t in &toks[1..toks.len() - 1] {
                let v: f64 = t.parse().map_err(|_| perr(i + 1, format!("bad feature `{t}`")))?;
                buf.push(T::from_f64_lossy(v));
            }
            let label = match toks[toks.len() - 1] {
                "1" => true,
                "0" => false,
                other => return Err(perr(i + 1, format!("bad label `{other}`"))),
            };
            m.push(RowId(id), &buf, label)?;
        }
        Ok(m)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = crate::ingest::read_text(path)?;
        Self::parse_csv(&text, path)
    }
}
