//! Dense CSV/TSV matrices and point sets, label files and JSON run reports.
//!
//! Numbers are written with the shortest decimal representation that reads
//! back to the same `f64` (never more than 17 significant digits), so a
//! written matrix round-trips exactly.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::matrix::SquaredDissimilarityMatrix;
use crate::solver::{RunReport, SolverConfig};

/// How to read a matrix or point file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReadOptions {
    /// Field delimiter. `None` picks tab for `.tsv`/`.tab` paths and comma
    /// otherwise.
    pub delimiter: Option<u8>,
    /// Whether the first row holds names. `None` treats it as a header when
    /// any of its data cells fails to parse as a number.
    pub header: Option<bool>,
    /// Whether the first column holds point names.
    pub row_names: bool,
    /// Square every matrix entry on load (input holds plain distances).
    pub square_input: bool,
    /// Absolute validation tolerance; `None` uses the matrix default.
    pub tolerance: Option<f64>,
}

/// Delimiter implied by a file extension.
pub fn delimiter_for(path: &Path) -> u8 {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("tsv") || ext.eq_ignore_ascii_case("tab") => b'\t',
        _ => b',',
    }
}

struct Grid {
    rows: Vec<Vec<f64>>,
    lines: Vec<u64>,
    names: Option<Vec<String>>,
}

fn parse_error(path: &Path, line: u64, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message: message.into(),
    }
}

fn read_grid<R: Read>(reader: R, source: &Path, options: &ReadOptions) -> Result<Grid> {
    let delimiter = options.delimiter.unwrap_or_else(|| delimiter_for(source));
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let skip = usize::from(options.row_names);
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    let mut row_names = Vec::new();
    let mut header: Option<Vec<String>> = None;
    let mut first = true;
    let mut record = csv::ByteRecord::new();
    loop {
        let more = csv.read_byte_record(&mut record).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(source, line, 0, e.to_string())
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        let mut cells = Vec::with_capacity(record.len());
        for (col, raw) in record.iter().enumerate() {
            let text = std::str::from_utf8(raw)
                .map_err(|_| parse_error(source, line, col + 1, "invalid UTF-8"))?;
            cells.push(text);
        }
        if cells.len() == 1 && cells[0].is_empty() {
            continue;
        }
        if first {
            first = false;
            let is_header = options.header.unwrap_or_else(|| {
                cells
                    .iter()
                    .skip(skip)
                    .any(|c| c.parse::<f64>().is_err())
            });
            if is_header {
                header = Some(cells.iter().skip(skip).map(|c| c.to_string()).collect());
                continue;
            }
        }
        if cells.len() <= skip {
            return Err(parse_error(source, line, 1, "row has no numeric fields"));
        }
        if options.row_names {
            row_names.push(cells[0].to_string());
        }
        let mut values = Vec::with_capacity(cells.len() - skip);
        for (col, cell) in cells.iter().enumerate().skip(skip) {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_error(source, line, col + 1, format!("not a number: {cell:?}")))?;
            values.push(v);
        }
        rows.push(values);
        lines.push(line);
    }
    if rows.is_empty() {
        return Err(parse_error(source, 1, 0, "no data rows"));
    }
    let width = rows[0].len();
    if let Some(r) = rows.iter().position(|r| r.len() != width) {
        return Err(parse_error(
            source,
            lines[r],
            rows[r].len() + skip,
            format!(
                "data row {} has {} fields, expected {}",
                r + 1,
                rows[r].len(),
                width
            ),
        ));
    }
    let names = if options.row_names {
        Some(row_names)
    } else {
        header
    };
    if let Some(names) = &names {
        let expected = if options.row_names { rows.len() } else { width };
        if names.len() != expected {
            return Err(parse_error(
                source,
                1,
                0,
                format!("{} names for {} points", names.len(), expected),
            ));
        }
        let mut sorted: Vec<&String> = names.iter().collect();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(parse_error(source, 1, 0, format!("duplicate name {:?}", w[0])));
        }
    }
    Ok(Grid { rows, lines, names })
}

/// Reads a matrix file. Returns point names when the file carries them.
pub fn read_matrix(
    path: &Path,
    options: &ReadOptions,
) -> Result<(SquaredDissimilarityMatrix, Option<Vec<String>>)> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_matrix_from(file, path, options)
}

/// [`read_matrix`] over any reader; `source` names it in errors and picks
/// the default delimiter.
pub fn read_matrix_from<R: Read>(
    reader: R,
    source: &Path,
    options: &ReadOptions,
) -> Result<(SquaredDissimilarityMatrix, Option<Vec<String>>)> {
    let mut grid = read_grid(reader, source, options)?;
    let n = grid.rows.len();
    if grid.rows[0].len() != n {
        return Err(parse_error(
            source,
            grid.lines[0],
            0,
            format!("matrix has {} rows but {} columns", n, grid.rows[0].len()),
        ));
    }
    if options.square_input {
        for v in grid.rows.iter_mut().flatten() {
            *v *= *v;
        }
    }
    let matrix = SquaredDissimilarityMatrix::validate(&grid.rows, options.tolerance)?;
    Ok((matrix, grid.names))
}

/// Reads one point per row. Returns point names when the file carries them.
pub fn read_points(path: &Path, options: &ReadOptions) -> Result<(Vec<Vec<f64>>, Option<Vec<String>>)> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_points_from(file, path, options)
}

pub fn read_points_from<R: Read>(
    reader: R,
    source: &Path,
    options: &ReadOptions,
) -> Result<(Vec<Vec<f64>>, Option<Vec<String>>)> {
    let grid = read_grid(reader, source, options)?;
    // Column headers of a point file name coordinates, not points.
    let names = if options.row_names { grid.names } else { None };
    if let Some((r, c)) = grid
        .rows
        .iter()
        .enumerate()
        .find_map(|(r, row)| row.iter().position(|v| !v.is_finite()).map(|c| (r, c)))
    {
        return Err(parse_error(
            source,
            grid.lines[r],
            c + 1 + usize::from(options.row_names),
            "coordinate is not finite",
        ));
    }
    Ok((grid.rows, names))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes a matrix, with a header row of names when given.
pub fn write_matrix(
    path: &Path,
    matrix: &SquaredDissimilarityMatrix,
    names: Option<&[String]>,
    delimiter: Option<u8>,
) -> Result<()> {
    let delimiter = delimiter.unwrap_or_else(|| delimiter_for(path));
    let mut out = create(path)?;
    write_matrix_to(&mut out, matrix, names, delimiter)
        .and_then(|_| out.flush())
        .map_err(io_err(path))
}

pub fn write_matrix_to<W: Write + ?Sized>(
    out: &mut W,
    matrix: &SquaredDissimilarityMatrix,
    names: Option<&[String]>,
    delimiter: u8,
) -> std::io::Result<()> {
    let sep = delimiter as char;
    if let Some(names) = names {
        writeln!(out, "{}", names.join(&sep.to_string()))?;
    }
    for row in matrix.rows() {
        let mut first = true;
        for v in row {
            if !first {
                write!(out, "{sep}")?;
            }
            first = false;
            write!(out, "{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Writes `point,cluster` rows in input order.
pub fn write_labels(path: &Path, names: Option<&[String]>, labels: &[usize]) -> Result<()> {
    let mut out = create(path)?;
    write_labels_to(&mut out, names, labels)
        .and_then(|_| out.flush())
        .map_err(io_err(path))
}

pub fn write_labels_to<W: Write + ?Sized>(out: &mut W, names: Option<&[String]>, labels: &[usize]) -> std::io::Result<()> {
    writeln!(out, "point,cluster")?;
    for (i, l) in labels.iter().enumerate() {
        match names {
            Some(names) => writeln!(out, "{},{l}", csv_field(&names[i]))?,
            None => writeln!(out, "{i},{l}")?,
        }
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Where the clustered matrix came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixProvenance {
    pub source: PathBuf,
    /// `"matrix"` or `"points"`.
    pub kind: String,
    pub square_input: bool,
    pub has_negative_entries: bool,
    pub scale: f64,
}

/// JSON document written by [`write_report`]. Keys are sorted.
pub fn report_json(
    report: &RunReport,
    config: &SolverConfig,
    provenance: &MatrixProvenance,
    labels_file: Option<&Path>,
    wall_time_seconds: f64,
) -> serde_json::Value {
    json!({
        "objective": report.final_objective,
        "beta": report.beta_final,
        "iterations": report.iterations,
        "converged": report.converged,
        "labels_file": labels_file.map(|p| p.display().to_string()),
        "n": report.labels.len(),
        "clusters": config.num_clusters,
        "objective_trajectory": report.objective_trajectory,
        "beta_increments": report.beta_increments,
        "restart_index_of_best": report.restart_index_of_best,
        "restart_objectives": report.restart_objectives,
        "config": config,
        "matrix": provenance,
        "wall_time_seconds": wall_time_seconds,
    })
}

pub fn write_report(
    path: &Path,
    report: &RunReport,
    config: &SolverConfig,
    provenance: &MatrixProvenance,
    labels_file: Option<&Path>,
    wall_time_seconds: f64,
) -> Result<()> {
    let doc = report_json(report, config, provenance, labels_file, wall_time_seconds);
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, &doc).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    writeln!(out).and_then(|_| out.flush()).map_err(io_err(path))
}
