//! Plain-text formats: edge lists, covariate CSV, label files, weighted
//! directed edge lists and attribute tables.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use crate::error::{NsbmError, Result};
use crate::simgen::WeightedDigraph;
use crate::types::{Covariates, Graph, Labels};

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedEdgeList {
    pub graph: Graph,
    /// Self-loops found and dropped.
    pub self_loops: usize,
    /// Repeated edges (in either orientation) merged.
    pub duplicates: usize,
}

fn parse_err(line: usize, msg: impl Into<String>) -> NsbmError {
    NsbmError::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_id(tok: &str, line: usize) -> Result<usize> {
    if tok.starts_with('-') {
        return Err(parse_err(line, format!("negative node id {tok}")));
    }
    tok.parse::<usize>()
        .map_err(|_| parse_err(line, format!("node id {tok:?} is not a non-negative integer")))
}

fn content_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader.lines().enumerate().filter_map(|(idx, line)| match line {
        Err(e) => Some(Err(e.into())),
        Ok(l) => {
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                None
            } else {
                Some(Ok((idx + 1, t.to_string())))
            }
        }
    })
}

/// Reads `u v` lines with 0-based ids. A line `n=<N>` fixes the node count;
/// otherwise it is one more than the largest id.
pub fn parse_edge_list<R: BufRead>(reader: R) -> Result<ParsedEdgeList> {
    let mut declared: Option<usize> = None;
    let mut pairs = Vec::new();
    let mut self_loops = 0;
    for item in content_lines(reader) {
        let (line, text) = item?;
        if let Some(rest) = text.strip_prefix("n=") {
            declared = Some(
                rest.trim()
                    .parse()
                    .map_err(|_| parse_err(line, format!("bad node count {rest:?}")))?,
            );
            continue;
        }
        let toks: Vec<&str> = text.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(parse_err(line, format!("expected 2 fields, found {}", toks.len())));
        }
        let (u, v) = (parse_id(toks[0], line)?, parse_id(toks[1], line)?);
        if u == v {
            self_loops += 1;
            continue;
        }
        pairs.push((u.min(v), u.max(v)));
    }
    let max_id = pairs.iter().map(|&(_, v)| v + 1).max().unwrap_or(0);
    let n = match declared {
        Some(n) if n < max_id => {
            return Err(NsbmError::InvalidInput(format!(
                "header declares n = {n} but id {} appears",
                max_id - 1
            )))
        }
        Some(n) => n,
        None => max_id,
    };
    let distinct: BTreeSet<(usize, usize)> = pairs.iter().copied().collect();
    let duplicates = pairs.len() - distinct.len();
    if self_loops > 0 {
        log::warn!("dropped {self_loops} self-loops");
    }
    Ok(ParsedEdgeList {
        graph: Graph::from_edges(n, distinct)?,
        self_loops,
        duplicates,
    })
}

pub fn write_edge_list<W: Write>(g: &Graph, mut w: W) -> Result<()> {
    writeln!(w, "n={}", g.n())?;
    for (i, j) in g.edges() {
        writeln!(w, "{i} {j}")?;
    }
    Ok(())
}

/// Comma-separated numeric rows; the first line is skipped when `has_header`.
/// `intercept` appends a column of ones.
pub fn parse_covariates<R: BufRead>(reader: R, has_header: bool, intercept: bool) -> Result<Covariates> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut header_pending = has_header;
    for item in content_lines(reader) {
        let (line, text) = item?;
        if header_pending {
            header_pending = false;
            continue;
        }
        let row = text
            .split(',')
            .map(|cell| {
                cell.trim()
                    .parse::<f64>()
                    .map_err(|_| parse_err(line, format!("non-numeric cell {:?}", cell.trim())))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(
                    line,
                    format!("row has {} cells, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    let x = Covariates::from_rows(&rows)?;
    Ok(if intercept { x.with_intercept() } else { x })
}

pub fn write_covariates<W: Write>(x: &Covariates, mut w: W) -> Result<()> {
    for i in 0..x.n() {
        let cells: Vec<String> = x.row(i).iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// One 0-based class id per line. `k` defaults to the largest id plus one.
pub fn parse_labels<R: BufRead>(reader: R, k: Option<usize>) -> Result<Labels> {
    let mut v = Vec::new();
    for item in content_lines(reader) {
        let (line, text) = item?;
        v.push(parse_id(&text, line)?);
    }
    match k {
        Some(k) => Labels::new(v, k),
        None => Ok(Labels::from_vec(v)),
    }
}

pub fn write_labels<W: Write>(labels: &Labels, mut w: W) -> Result<()> {
    for &c in labels.as_slice() {
        writeln!(w, "{c}")?;
    }
    Ok(())
}

/// Reads `u v w` lines of a weighted directed network. Fields may be
/// separated by commas or whitespace. With `one_based` unset, ids are taken
/// as 1-based when no id 0 appears and the largest id equals `n`.
pub fn parse_weighted_digraph<R: BufRead>(reader: R, n: usize, one_based: Option<bool>) -> Result<WeightedDigraph> {
    let mut triples = Vec::new();
    for item in content_lines(reader) {
        let (line, text) = item?;
        let toks: Vec<&str> = text
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .collect();
        if toks.len() != 3 {
            return Err(parse_err(line, format!("expected 3 fields, found {}", toks.len())));
        }
        let (u, v) = (parse_id(toks[0], line)?, parse_id(toks[1], line)?);
        let w: f64 = toks[2]
            .parse()
            .map_err(|_| parse_err(line, format!("weight {:?} is not numeric", toks[2])))?;
        if w < 0.0 || w.fract() != 0.0 {
            return Err(parse_err(line, format!("weight {w} is not a non-negative integer")));
        }
        triples.push((line, u, v, w as u32));
    }
    let min_id = triples.iter().map(|t| t.1.min(t.2)).min().unwrap_or(0);
    let max_id = triples.iter().map(|t| t.1.max(t.2)).max().unwrap_or(0);
    let shift = match one_based {
        Some(true) => 1,
        Some(false) => 0,
        None => usize::from(min_id >= 1 && max_id == n),
    };
    let mut weights = vec![0u32; n * n];
    for (line, u, v, w) in triples {
        if u < shift || v < shift || u - shift >= n || v - shift >= n {
            return Err(parse_err(line, format!("node id out of range for n = {n}")));
        }
        weights[(u - shift) * n + (v - shift)] = w;
    }
    WeightedDigraph::new(n, weights)
}

/// A table of named numeric columns, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeTable {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl AttributeTable {
    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| NsbmError::MissingInput(format!("no column named {name:?}")))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }
}

/// Header line of column names, then numeric rows; comma or whitespace
/// separated.
pub fn parse_attribute_table<R: BufRead>(reader: R) -> Result<AttributeTable> {
    let split = |s: &str| -> Vec<String> {
        s.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect()
    };
    let mut names: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for item in content_lines(reader) {
        let (line, text) = item?;
        let toks = split(&text);
        match &names {
            None => names = Some(toks),
            Some(h) => {
                if toks.len() != h.len() {
                    return Err(parse_err(line, format!("row has {} fields, header {}", toks.len(), h.len())));
                }
                rows.push(
                    toks.iter()
                        .map(|t| t.parse::<f64>().map_err(|_| parse_err(line, format!("non-numeric cell {t:?}"))))
                        .collect::<Result<Vec<f64>>>()?,
                );
            }
        }
    }
    Ok(AttributeTable {
        names: names.ok_or_else(|| NsbmError::MissingInput("attribute table is empty".into()))?,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_list_basic() {
        let p = parse_edge_list("0 1\n1 2".as_bytes()).unwrap();
        assert_eq!(p.graph.n(), 3);
        assert_eq!(p.graph.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn edge_list_dedup_and_loops() {
        let p = parse_edge_list("0 1\n1 0".as_bytes()).unwrap();
        assert_eq!(p.graph.edge_count(), 1);
        assert_eq!(p.duplicates, 1);
        let p = parse_edge_list("# comment\n0 1\n2 2\n".as_bytes()).unwrap();
        assert_eq!(p.self_loops, 1);
        assert_eq!(p.graph.edge_count(), 1);
        assert_eq!(p.graph.n(), 2);
    }

    #[test]
    fn edge_list_header_and_errors() {
        let p = parse_edge_list("n=5\n0 1\n".as_bytes()).unwrap();
        assert_eq!(p.graph.n(), 5);
        assert!(parse_edge_list("-1 2".as_bytes()).is_err());
        assert!(parse_edge_list("0 x".as_bytes()).is_err());
        assert!(parse_edge_list("n=2\n0 4".as_bytes()).is_err());
    }

    #[test]
    fn covariates_parse() {
        let x = parse_covariates("1.0,2.0\n3.0,4.0".as_bytes(), false, false).unwrap();
        assert_eq!(x.values(), &[1.0, 2.0, 3.0, 4.0]);
        let x = parse_covariates("a,b\n1.0,2.0\n".as_bytes(), true, false).unwrap();
        assert_eq!((x.n(), x.p()), (1, 2));
        let x = parse_covariates("1.0,2.0\n3.0,4.0".as_bytes(), false, true).unwrap();
        assert_eq!(x.p(), 3);
        assert_eq!(x.get(0, 2), 1.0);
        assert_eq!(x.get(1, 2), 1.0);
        assert!(parse_covariates("1,2\n3".as_bytes(), false, false).is_err());
        assert!(parse_covariates("1,z".as_bytes(), false, false).is_err());
    }

    #[test]
    fn round_trips() {
        let g = Graph::from_edges(6, [(0, 1), (2, 5), (3, 4)]).unwrap();
        let mut buf = Vec::new();
        write_edge_list(&g, &mut buf).unwrap();
        assert_eq!(parse_edge_list(buf.as_slice()).unwrap().graph, g);

        let x = Covariates::new(2, 2, vec![0.1, -1e-17, 1.0 / 3.0, 12345.678]).unwrap();
        let mut buf = Vec::new();
        write_covariates(&x, &mut buf).unwrap();
        assert_eq!(parse_covariates(buf.as_slice(), false, false).unwrap(), x);

        let l = Labels::new(vec![2, 0, 1, 1], 3).unwrap();
        let mut buf = Vec::new();
        write_labels(&l, &mut buf).unwrap();
        assert_eq!(parse_labels(buf.as_slice(), Some(3)).unwrap(), l);
    }

    #[test]
    fn weighted_ids_detect_base() {
        let d = parse_weighted_digraph("1 2 5\n2 3 4\n".as_bytes(), 3, None).unwrap();
        assert_eq!(d.weight(0, 1), 5);
        assert_eq!(d.weight(1, 2), 4);
        let d = parse_weighted_digraph("0,1,5\n".as_bytes(), 3, None).unwrap();
        assert_eq!(d.weight(0, 1), 5);
        assert!(parse_weighted_digraph("0 1 2.5".as_bytes(), 3, None).is_err());
    }

    #[test]
    fn attribute_table() {
        let t = parse_attribute_table("location tenure\n1 3\n2 4\n".as_bytes()).unwrap();
        assert_eq!(t.column("tenure").unwrap(), vec![3.0, 4.0]);
        assert!(t.column("level").is_err());
    }
}
