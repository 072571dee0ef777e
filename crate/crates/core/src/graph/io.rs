//! Text and binary graph file formats.
//!
//! * edges: one `u<TAB>v` pair per line, `#` comments and blank lines skipped
//! * features: CSV (row i = node i) or binary `FMAT` + rows/cols (u64 LE)
//!   + row-major f32 LE values
//! * labels: `node<TAB>label` lines; nodes without a line are unlabeled

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::AttributedGraph;
use crate::autodiff::Matrix;
use crate::error::{validation, Error, Result};

const FEATURE_MAGIC: &[u8; 4] = b"FMAT";

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn content_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .map(|(i, line)| line.map(|l| (i + 1, l)).map_err(Error::from))
        .filter(|r| match r {
            Ok((_, l)) => {
                let t = l.trim();
                !t.is_empty() && !t.starts_with('#')
            }
            Err(_) => true,
        })
}

fn parse_pair(line_no: usize, line: &str) -> Result<(usize, usize)> {
    let mut fields = line.split_whitespace();
    let mut next = |what: &str| -> Result<usize> {
        let tok = fields
            .next()
            .ok_or_else(|| parse_err(line_no, format!("missing {what}")))?;
        tok.parse()
            .map_err(|_| parse_err(line_no, format!("invalid {what} `{tok}`")))
    };
    let a = next("first field")?;
    let b = next("second field")?;
    if fields.next().is_some() {
        return Err(parse_err(line_no, "expected exactly two fields"));
    }
    Ok((a, b))
}

pub fn read_edges<R: BufRead>(reader: R) -> Result<Vec<(usize, usize)>> {
    content_lines(reader)
        .map(|r| r.and_then(|(n, l)| parse_pair(n, &l)))
        .collect()
}

pub fn read_labels<R: BufRead>(reader: R) -> Result<Vec<(usize, usize)>> {
    read_edges(reader)
}

fn read_features_csv(text: &str) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for r in content_lines(text.as_bytes()) {
        let (n, line) = r?;
        let row = line
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|_| parse_err(n, format!("invalid feature value `{}`", tok.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(
                    n,
                    format!("{} values, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    Matrix::from_rows(&rows)
}

fn read_features_binary(bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < 20 {
        return Err(validation("binary feature file shorter than its header"));
    }
    let rows = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
    let cols = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let body = &bytes[20..];
    if body.len() != rows * cols * 4 {
        return Err(validation(format!(
            "binary feature file holds {} bytes of values, expected {} for {rows}x{cols}",
            body.len(),
            rows * cols * 4
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    Matrix::from_vec(rows, cols, data)
}

/// Reads either feature format, detected by the `FMAT` magic prefix.
pub fn read_features(bytes: &[u8]) -> Result<Matrix> {
    if bytes.starts_with(FEATURE_MAGIC) {
        read_features_binary(bytes)
    } else {
        let text = std::str::from_utf8(bytes)
            .map_err(|_| validation("feature file is neither FMAT binary nor UTF-8 text"))?;
        read_features_csv(text)
    }
}

/// Loads a graph from the three text/binary files. The node count is the
/// feature row count and the class count is one past the largest label.
pub fn load_graph(
    edge_path: impl AsRef<Path>,
    feature_path: impl AsRef<Path>,
    label_path: impl AsRef<Path>,
    undirected: bool,
) -> Result<AttributedGraph> {
    let features = read_features(&fs::read(feature_path)?)?;
    let n = features.rows();
    let mut edges = read_edges(BufReader::new(File::open(edge_path)?))?;
    let label_pairs = read_labels(BufReader::new(File::open(label_path)?))?;

    let mut labels = vec![None; n];
    let mut num_classes = 0;
    for (node, y) in label_pairs {
        if node >= n {
            return Err(validation(format!("label for node {node} but only {n} nodes")));
        }
        labels[node] = Some(y);
        num_classes = num_classes.max(y + 1);
    }
    if undirected {
        let reversed: Vec<_> = edges.iter().map(|&(u, v)| (v, u)).collect();
        edges.extend(reversed);
    }
    AttributedGraph::new(n, edges, features, labels, num_classes)
}

pub fn write_edges<W: Write>(mut out: W, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<()> {
    for (u, v) in edges {
        writeln!(out, "{u}\t{v}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_labels<W: Write>(mut out: W, labels: &[Option<usize>]) -> Result<()> {
    for (u, y) in labels.iter().enumerate() {
        if let Some(y) = y {
            writeln!(out, "{u}\t{y}")?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_features_csv<W: Write>(out: W, features: &Matrix) -> Result<()> {
    let mut out = BufWriter::new(out);
    for r in 0..features.rows() {
        let line: Vec<String> = features.row(r).iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_features_binary<W: Write>(mut out: W, features: &Matrix) -> Result<()> {
    out.write_all(FEATURE_MAGIC)?;
    out.write_all(&(features.rows() as u64).to_le_bytes())?;
    out.write_all(&(features.cols() as u64).to_le_bytes())?;
    for &v in features.data() {
        out.write_all(&(v as f32).to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}
