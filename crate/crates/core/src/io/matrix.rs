//! Tab-separated numeric matrices.
//!
//! ```text
//! #birs-matrix    1
//! #dims   <n>     <p>
//! ##<key> <value>             (any number, e.g. the resolved run config)
//! #columns        <id_1> … <id_p>
//! #position       <bp_1> … <bp_p>   (optional; genotype files)
//! #maf    <maf_1> … <maf_p>          (optional; genotype files)
//! <n rows of p values>
//! ```

use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{create, open, parse_f64, parse_meta, parse_u64};
use crate::error::{Error, Result};
use crate::null_model::CovariateMatrix;
use crate::score::GenotypeMatrix;

pub const MATRIX_MAGIC: &str = "#birs-matrix";
pub const MATRIX_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFile {
    pub meta: Vec<(String, String)>,
    pub column_ids: Vec<String>,
    pub positions: Option<Vec<u64>>,
    pub maf: Option<Vec<f64>>,
    pub values: Array2<f64>,
}

impl MatrixFile {
    pub fn new(column_ids: Vec<String>, values: Array2<f64>) -> Self {
        MatrixFile {
            meta: Vec::new(),
            column_ids,
            positions: None,
            maf: None,
            values,
        }
    }

    pub fn with_meta(mut self, key: &str, value: &str) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn from_genotypes(g: &GenotypeMatrix) -> Self {
        let ids = (0..g.p()).map(|j| format!("v{j}")).collect();
        MatrixFile {
            positions: Some(g.positions().to_vec()),
            maf: Some(g.maf().to_vec()),
            ..MatrixFile::new(ids, g.dosages().to_owned())
        }
    }

    pub fn into_genotypes(self) -> Result<GenotypeMatrix> {
        let positions = self.positions.ok_or_else(|| {
            Error::InvalidInput("genotype matrix lacks a #position row".into())
        })?;
        match self.maf {
            Some(maf) => GenotypeMatrix::new(self.values, positions, maf),
            None => GenotypeMatrix::from_dosages(self.values, positions),
        }
    }

    /// Single-column outcome file.
    pub fn from_vector(id: &str, v: &Array1<f64>) -> Self {
        let values = v.clone().insert_axis(ndarray::Axis(1));
        MatrixFile::new(vec![id.to_string()], values)
    }

    pub fn into_vector(self) -> Result<Array1<f64>> {
        if self.p() != 1 {
            return Err(Error::InvalidInput(format!(
                "expected a single-column matrix, found {} columns",
                self.p()
            )));
        }
        Ok(self.values.column(0).to_owned())
    }

    pub fn from_covariates(x: &CovariateMatrix) -> Self {
        let ids = (0..x.q())
            .map(|j| if j == 0 { "intercept".to_string() } else { format!("x{j}") })
            .collect();
        MatrixFile::new(ids, x.values().to_owned())
    }

    pub fn into_covariates(self) -> Result<CovariateMatrix> {
        CovariateMatrix::new(self.values)
    }
}

pub fn read_matrix(path: &Path) -> Result<MatrixFile> {
    read_matrix_from(open(path)?, &path.display().to_string())
}

pub fn read_matrix_from(reader: impl BufRead, name: &str) -> Result<MatrixFile> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |expect: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((no, Ok(l))) => Ok((no, l)),
            Some((no, Err(e))) => Err(Error::parse(name, no, e.to_string())),
            None => Err(Error::parse(name, 0, format!("unexpected end of file, expected {expect}"))),
        }
    };

    let (no, first) = next("header")?;
    let mut head = first.split('\t');
    if head.next() != Some(MATRIX_MAGIC) {
        return Err(Error::parse(name, no, "missing #birs-matrix header"));
    }
    let version = head
        .next()
        .and_then(|v| v.parse::<u16>().ok())
        .ok_or_else(|| Error::parse(name, no, "missing format version"))?;
    if version != MATRIX_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: MATRIX_VERSION,
        });
    }

    let (no, dims) = next("#dims")?;
    let fields: Vec<&str> = dims.split('\t').collect();
    if fields.len() != 3 || fields[0] != "#dims" {
        return Err(Error::parse(name, no, "expected '#dims<TAB>n<TAB>p'"));
    }
    let n = parse_u64(fields[1], name, no)? as usize;
    let p = parse_u64(fields[2], name, no)? as usize;

    let mut meta = Vec::new();
    let mut column_ids = None;
    let mut positions = None;
    let mut maf = None;
    let mut values: Vec<f64> = Vec::with_capacity(n.saturating_mul(p).min(1 << 24));
    let mut rows = 0usize;
    let mut last_line = no;

    for (no, line) in lines {
        let line = line.map_err(|e| Error::parse(name, no, e.to_string()))?;
        last_line = no;
        if rows == 0 && line.starts_with('#') {
            if let Some(kv) = parse_meta(&line) {
                meta.push(kv);
                continue;
            }
            let mut f = line.split('\t');
            let tag = f.next().unwrap_or_default();
            let rest: Vec<&str> = f.collect();
            if rest.len() != p {
                return Err(Error::parse(
                    name,
                    no,
                    format!("{tag} row has {} fields, expected {p}", rest.len()),
                ));
            }
            match tag {
                "#columns" => column_ids = Some(rest.iter().map(|s| s.to_string()).collect()),
                "#position" => {
                    positions = Some(
                        rest.iter()
                            .map(|s| parse_u64(s, name, no))
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                "#maf" => {
                    maf = Some(
                        rest.iter()
                            .map(|s| parse_f64(s, name, no))
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                other => {
                    return Err(Error::parse(name, no, format!("unknown header row {other:?}")))
                }
            }
            continue;
        }
        if rows == n {
            if line.is_empty() {
                continue;
            }
            return Err(Error::parse(name, no, format!("more than {n} data rows")));
        }
        let before = values.len();
        for field in line.split('\t') {
            values.push(parse_f64(field, name, no)?);
        }
        if values.len() - before != p {
            return Err(Error::parse(
                name,
                no,
                format!("row has {} values, expected {p}", values.len() - before),
            ));
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::parse(
            name,
            last_line + 1,
            format!("truncated: found {rows} of {n} data rows"),
        ));
    }
    let column_ids = column_ids.ok_or_else(|| Error::parse(name, last_line, "missing #columns row"))?;
    let values = Array2::from_shape_vec((n, p), values)
        .map_err(|e| Error::parse(name, last_line, e.to_string()))?;
    Ok(MatrixFile {
        meta,
        column_ids,
        positions,
        maf,
        values,
    })
}

pub fn write_matrix(path: &Path, m: &MatrixFile) -> Result<()> {
    let mut w = create(path)?;
    write_matrix_to(&mut w, m).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_matrix_to(w: &mut impl Write, m: &MatrixFile) -> std::io::Result<()> {
    writeln!(w, "{MATRIX_MAGIC}\t{MATRIX_VERSION}")?;
    writeln!(w, "#dims\t{}\t{}", m.n(), m.p())?;
    for (k, v) in &m.meta {
        writeln!(w, "##{k}\t{v}")?;
    }
    write!(w, "#columns")?;
    for id in &m.column_ids {
        write!(w, "\t{id}")?;
    }
    writeln!(w)?;
    if let Some(pos) = &m.positions {
        write!(w, "#position")?;
        for x in pos {
            write!(w, "\t{x}")?;
        }
        writeln!(w)?;
    }
    if let Some(maf) = &m.maf {
        write!(w, "#maf")?;
        for x in maf {
            write!(w, "\t{x}")?;
        }
        writeln!(w)?;
    }
    let mut buf = String::new();
    for row in m.values.rows() {
        buf.clear();
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                buf.push('\t');
            }
            buf.push_str(&v.to_string());
        }
        writeln!(w, "{buf}")?;
    }
    Ok(())
}
