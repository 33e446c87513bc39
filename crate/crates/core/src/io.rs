//! Graph file formats: MatrixMarket coordinate files and TSV edge lists.
//!
//! MatrixMarket files are 1-based on disk and converted to 0-based
//! indices in memory; edge lists are 0-based on disk. Values are written
//! in exponent form with shortest round-trip precision, so save followed
//! by load reproduces every value bit-exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::graph::{AssemblyStats, GraphError, SparseGraph, ValueKind};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    MatrixMarket,
    EdgeListTsv,
}

impl GraphFormat {
    /// Guesses the format from the file extension: `.mtx` is MatrixMarket,
    /// anything else an edge list.
    pub fn from_path(path: &Path) -> GraphFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("mtx") => GraphFormat::MatrixMarket,
            _ => GraphFormat::EdgeListTsv,
        }
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> LoadError {
    LoadError::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

pub fn load_graph(
    path: &Path,
    format: GraphFormat,
    kind: ValueKind,
) -> Result<(SparseGraph, AssemblyStats), LoadError> {
    let reader = BufReader::new(File::open(path)?);
    match format {
        GraphFormat::MatrixMarket => load_matrix_market(path, reader, kind),
        GraphFormat::EdgeListTsv => load_edge_list(path, reader, kind),
    }
}

fn load_matrix_market(
    path: &Path,
    reader: impl BufRead,
    kind: ValueKind,
) -> Result<(SparseGraph, AssemblyStats), LoadError> {
    let mut lines = reader.lines().enumerate();

    let (lno, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))
        .and_then(|(i, l)| Ok((i + 1, l?)))?;
    let fields: Vec<String> = header.split_whitespace().map(|s| s.to_lowercase()).collect();
    if fields.len() != 5
        || fields[0] != "%%matrixmarket"
        || fields[1] != "matrix"
        || fields[2] != "coordinate"
    {
        return Err(parse_err(path, lno, "expected '%%MatrixMarket matrix coordinate ...' header"));
    }
    if fields[3] != "real" && fields[3] != "integer" {
        return Err(parse_err(path, lno, format!("unsupported field type '{}'", fields[3])));
    }
    let symmetric = match fields[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err(path, lno, format!("unsupported symmetry '{other}'"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut entries: Vec<(u32, u32, f64)> = Vec::new();
    let mut entry_lines = 0usize;
    for (i, line) in lines {
        let lno = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let mut it = line.split_whitespace();
        if size.is_none() {
            let nrows: usize = next_field(path, lno, &mut it, "row count")?;
            let ncols: usize = next_field(path, lno, &mut it, "column count")?;
            let nnz: usize = next_field(path, lno, &mut it, "entry count")?;
            if nrows != ncols {
                return Err(parse_err(path, lno, format!("matrix must be square, got {nrows}x{ncols}")));
            }
            size = Some((nrows, ncols, nnz));
            entries.reserve(if symmetric { 2 * nnz } else { nnz });
            continue;
        }
        let r: u64 = next_field(path, lno, &mut it, "row index")?;
        let c: u64 = next_field(path, lno, &mut it, "column index")?;
        let v: f64 = next_field(path, lno, &mut it, "value")?;
        let n = size.unwrap().0;
        if r < 1 || r > n as u64 || c < 1 || c > n as u64 {
            return Err(parse_err(path, lno, format!("index ({r}, {c}) outside 1..={n}")));
        }
        let (r, c) = ((r - 1) as u32, (c - 1) as u32);
        entry_lines += 1;
        entries.push((r, c, v));
        if symmetric && r != c {
            entries.push((c, r, v));
        }
    }
    let (n, _, nnz) = size.ok_or_else(|| parse_err(path, 0, "missing size line"))?;
    if entry_lines != nnz {
        return Err(parse_err(
            path,
            0,
            format!("size line declared {nnz} entries, file contains {entry_lines}"),
        ));
    }
    Ok(SparseGraph::from_entries(n, entries, kind)?)
}

fn load_edge_list(
    path: &Path,
    reader: impl BufRead,
    kind: ValueKind,
) -> Result<(SparseGraph, AssemblyStats), LoadError> {
    let mut entries: Vec<(u32, u32, f64)> = Vec::new();
    let mut max_idx: u64 = 0;
    for (i, line) in reader.lines().enumerate() {
        let lno = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let r: u64 = next_field(path, lno, &mut it, "source vertex")?;
        let c: u64 = next_field(path, lno, &mut it, "target vertex")?;
        let v: f64 = next_field(path, lno, &mut it, "weight")?;
        if r > u32::MAX as u64 || c > u32::MAX as u64 {
            return Err(parse_err(path, lno, "vertex id exceeds u32 range"));
        }
        max_idx = max_idx.max(r).max(c);
        entries.push((r as u32, c as u32, v));
    }
    if entries.is_empty() {
        return Err(parse_err(path, 0, "no edges in file"));
    }
    let n = (max_idx + 1) as usize;
    Ok(SparseGraph::from_entries(n, entries, kind)?)
}

fn next_field<T: std::str::FromStr>(
    path: &Path,
    lno: usize,
    it: &mut std::str::SplitWhitespace<'_>,
    what: &str,
) -> Result<T, LoadError> {
    let tok = it
        .next()
        .ok_or_else(|| parse_err(path, lno, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(path, lno, format!("cannot parse {what} from '{tok}'")))
}

pub fn save_graph(g: &SparseGraph, path: &Path, format: GraphFormat) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        GraphFormat::MatrixMarket => {
            writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
            writeln!(w, "{} {} {}", g.n(), g.n(), g.nnz())?;
            for i in 0..g.n() {
                let (cols, vals) = g.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
                }
            }
        }
        GraphFormat::EdgeListTsv => {
            for i in 0..g.n() {
                let (cols, vals) = g.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    writeln!(w, "{}\t{}\t{:e}", i, j, v)?;
                }
            }
        }
    }
    w.flush()
}
