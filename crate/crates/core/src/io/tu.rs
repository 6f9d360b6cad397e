//! Multi-file plain-text graph database layout.
//!
//! A dataset `DS` is a directory holding
//!
//! * `DS_A.txt`: one edge `i, j` per line, 1-based global node ids,
//! * `DS_graph_indicator.txt`: the graph id (1-based) of every node,
//! * `DS_node_labels.txt` (optional): one label per node, `-1` for unlabeled,
//! * `DS_graph_labels.txt` (optional): one class per graph,
//! * `DS_node_attributes.txt` (optional): comma-separated reals per node.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::{Graph, GraphDatabase, Label};
use crate::io::{numbered_lines, read_to_string, write_string};

/// File contents of one dataset. Only the edge list and the graph indicator
/// are required.
#[derive(Debug, Clone, Copy, Default)]
pub struct TuFiles<'a> {
    pub adjacency: &'a str,
    pub graph_indicator: &'a str,
    pub node_labels: Option<&'a str>,
    pub graph_labels: Option<&'a str>,
    pub node_attributes: Option<&'a str>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TuOptions {
    /// Add the reverse of every listed edge.
    pub symmetrize: bool,
}

fn parse_graph_indicator(text: &str, name: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = 0usize;
    for (line, l) in numbered_lines(text) {
        let id: usize = l
            .parse()
            .map_err(|_| Error::parse(name, line, format!("expected a graph id, got {l:?}")))?;
        if id == 0 || (id != current && id != current + 1) {
            return Err(Error::parse(
                name,
                line,
                format!("graph id {id} after {current}: ids must be contiguous from 1 and nodes grouped by graph"),
            ));
        }
        current = id;
        out.push(id - 1);
    }
    Ok(out)
}

/// Parses a dataset from the contents of its files. `name` prefixes
/// diagnostics.
pub fn parse_tu(files: &TuFiles<'_>, name: &str, options: TuOptions) -> Result<GraphDatabase> {
    let indicator_name = format!("{name}_graph_indicator.txt");
    let indicator = parse_graph_indicator(files.graph_indicator, &indicator_name)?;
    let total = indicator.len();
    let num_graphs = indicator.last().map_or(0, |g| g + 1);

    // first global node of each graph
    let mut offsets = vec![0usize; num_graphs + 1];
    for &g in &indicator {
        offsets[g + 1] += 1;
    }
    for g in 0..num_graphs {
        offsets[g + 1] += offsets[g];
    }

    let edges_name = format!("{name}_A.txt");
    let mut edges: Vec<BTreeSet<(usize, usize)>> = vec![BTreeSet::new(); num_graphs];
    for (line, l) in numbered_lines(files.adjacency) {
        let mut parts = l.split(',').map(str::trim);
        let mut node = |what: &str| -> Result<usize> {
            let tok = parts
                .next()
                .ok_or_else(|| Error::parse(&edges_name, line, format!("missing {what} node")))?;
            let id: usize = tok
                .parse()
                .map_err(|_| Error::parse(&edges_name, line, format!("bad node id {tok:?}")))?;
            if id == 0 || id > total {
                return Err(Error::parse(
                    &edges_name,
                    line,
                    format!("dangling edge: node {id} outside 1..={total}"),
                ));
            }
            Ok(id - 1)
        };
        let u = node("source")?;
        let v = node("target")?;
        if parts.next().is_some() {
            return Err(Error::parse(&edges_name, line, "expected exactly two node ids"));
        }
        let g = indicator[u];
        if indicator[v] != g {
            return Err(Error::parse(
                &edges_name,
                line,
                format!("edge {}-{} connects graphs {} and {}", u + 1, v + 1, g + 1, indicator[v] + 1),
            ));
        }
        let (lu, lv) = (u - offsets[g], v - offsets[g]);
        edges[g].insert((lu, lv));
        if options.symmetrize {
            edges[g].insert((lv, lu));
        }
    }

    let labels_name = format!("{name}_node_labels.txt");
    let labels: Vec<Option<Label>> = match files.node_labels {
        Some(text) => {
            let parsed = numbered_lines(text)
                .map(|(line, l)| match l.parse::<i64>() {
                    Ok(-1) => Ok(None),
                    Ok(v) if (0..=Label::MAX as i64).contains(&v) => Ok(Some(v as Label)),
                    _ => Err(Error::parse(
                        &labels_name,
                        line,
                        format!("expected a label >= 0 or -1, got {l:?}"),
                    )),
                })
                .collect::<Result<Vec<_>>>()?;
            if parsed.len() != total {
                return Err(Error::parse(
                    &labels_name,
                    parsed.len(),
                    format!("{} node labels for {total} nodes", parsed.len()),
                ));
            }
            parsed
        }
        None => vec![None; total],
    };

    let classes_name = format!("{name}_graph_labels.txt");
    let classes = match files.graph_labels {
        Some(text) => {
            let c = crate::io::parse_classes(text, &classes_name)?;
            if c.len() != num_graphs {
                return Err(Error::parse(
                    &classes_name,
                    c.len(),
                    format!("{} graph labels for {num_graphs} graphs", c.len()),
                ));
            }
            Some(c)
        }
        None => None,
    };

    let attr_name = format!("{name}_node_attributes.txt");
    let attributes = match files.node_attributes {
        Some(text) => {
            let mut width = None;
            let mut data = Vec::new();
            let mut rows = 0usize;
            for (line, l) in numbered_lines(text) {
                let before = data.len();
                for tok in l.split(',').map(str::trim) {
                    let v: f64 = tok.parse().map_err(|_| {
                        Error::parse(&attr_name, line, format!("bad attribute value {tok:?}"))
                    })?;
                    if !v.is_finite() {
                        return Err(Error::parse(&attr_name, line, "non-finite attribute"));
                    }
                    data.push(v);
                }
                let w = data.len() - before;
                match width {
                    None => width = Some(w),
                    Some(prev) if prev != w => {
                        return Err(Error::parse(
                            &attr_name,
                            line,
                            format!("ragged attribute row: {w} values, expected {prev}"),
                        ))
                    }
                    _ => {}
                }
                rows += 1;
            }
            if rows != total {
                return Err(Error::parse(
                    &attr_name,
                    rows,
                    format!("{rows} attribute rows for {total} nodes"),
                ));
            }
            Some(DenseMatrix::from_vec(total, width.unwrap_or(0), data)?)
        }
        None => None,
    };

    let mut graphs = Vec::with_capacity(num_graphs);
    for g in 0..num_graphs {
        let (start, end) = (offsets[g], offsets[g + 1]);
        let list: Vec<(usize, usize)> = edges[g].iter().copied().collect();
        let mut graph = Graph::from_directed_edges(end - start, &list, labels[start..end].to_vec())?;
        if let Some(a) = &attributes {
            graph = graph.with_attributes(a.row_block(start, end))?;
        }
        if let Some(c) = &classes {
            graph = graph.with_class(c[g]);
        }
        graphs.push(graph);
    }
    GraphDatabase::new(graphs, None)
}

fn dataset_name(dir: &Path) -> Result<String> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if let Some(name) = entry.file_name().to_str().and_then(|f| f.strip_suffix("_A.txt")) {
            found.push(name.to_string());
        }
    }
    found.sort();
    match found.len() {
        1 => Ok(found.remove(0)),
        0 => Err(Error::invalid(format!("{}: no *_A.txt edge file", dir.display()))),
        _ => Err(Error::invalid(format!(
            "{}: several datasets ({}); keep one per directory",
            dir.display(),
            found.join(", ")
        ))),
    }
}

fn read_optional(path: PathBuf) -> Result<Option<String>> {
    if path.exists() {
        read_to_string(&path).map(Some)
    } else {
        Ok(None)
    }
}

/// Loads the single dataset stored in `dir`.
pub fn load_tu_dataset(dir: &Path, options: TuOptions) -> Result<GraphDatabase> {
    let name = dataset_name(dir)?;
    let file = |suffix: &str| dir.join(format!("{name}_{suffix}.txt"));
    let adjacency = read_to_string(&file("A"))?;
    let indicator = read_to_string(&file("graph_indicator"))?;
    let node_labels = read_optional(file("node_labels"))?;
    let graph_labels = read_optional(file("graph_labels"))?;
    let node_attributes = read_optional(file("node_attributes"))?;
    let files = TuFiles {
        adjacency: &adjacency,
        graph_indicator: &indicator,
        node_labels: node_labels.as_deref(),
        graph_labels: graph_labels.as_deref(),
        node_attributes: node_attributes.as_deref(),
    };
    parse_tu(&files, &dir.join(&name).display().to_string(), options)
}

/// File contents for `db` in the same layout, keyed by file suffix. The
/// format has no edge weights, so weighted graphs are rejected.
pub fn format_tu(db: &GraphDatabase) -> Result<Vec<(&'static str, String)>> {
    let offsets = db.node_offsets();
    let mut adjacency = String::new();
    let mut indicator = String::new();
    let mut labels = String::new();
    let mut attributes = String::new();
    for (g, graph) in db.graphs().iter().enumerate() {
        let base = offsets[g] + 1;
        for u in 0..graph.node_count() {
            let (cols, weights) = graph.adjacency().row(u);
            if let Some(w) = weights.iter().find(|&&w| w != 1.0) {
                return Err(Error::invalid(format!(
                    "graph {g} has edge weight {w}; the TU format stores unit weights only"
                )));
            }
            for &v in cols {
                writeln!(adjacency, "{}, {}", base + u, base + v).unwrap();
            }
            writeln!(indicator, "{}", g + 1).unwrap();
            match graph.labels()[u] {
                Some(l) => writeln!(labels, "{l}").unwrap(),
                None => labels.push_str("-1\n"),
            }
            if let Some(a) = graph.attributes() {
                let row: Vec<String> = a.row(u).iter().map(|v| format!("{v:?}")).collect();
                writeln!(attributes, "{}", row.join(", ")).unwrap();
            }
        }
    }
    let mut files = vec![("A", adjacency), ("graph_indicator", indicator)];
    if db.num_labels() > 0 {
        files.push(("node_labels", labels));
    }
    if let Some(classes) = db.classes() {
        let text = classes.iter().map(|c| format!("{c}\n")).collect();
        files.push(("graph_labels", text));
    }
    if db.has_attributes() {
        files.push(("node_attributes", attributes));
    }
    Ok(files)
}

/// Writes `db` into `dir` under dataset name `name`.
pub fn write_tu_dataset(db: &GraphDatabase, dir: &Path, name: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (suffix, contents) in format_tu(db)? {
        write_string(&dir.join(format!("{name}_{suffix}.txt")), &contents)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: &str = "1, 2\n2, 3\n4, 5\n";
    const IND: &str = "1\n1\n1\n2\n2\n";

    fn files<'a>(labels: Option<&'a str>) -> TuFiles<'a> {
        TuFiles {
            adjacency: A,
            graph_indicator: IND,
            node_labels: labels,
            graph_labels: Some("1\n-1\n"),
            node_attributes: None,
        }
    }

    #[test]
    fn two_graph_fixture() {
        let db = parse_tu(&files(Some("0\n1\n2\n0\n-1\n")), "fx", TuOptions::default()).unwrap();
        let counts: Vec<_> = db.graphs().iter().map(Graph::node_count).collect();
        assert_eq!(counts, vec![3, 2]);
        assert_eq!(db.num_labels(), 3);
        assert_eq!(db.graphs()[1].labels(), &[Some(0), None]);
        assert_eq!(db.classes(), Some(vec![1, -1]));
        assert_eq!(db.graphs()[0].adjacency().nnz(), 2);

        let sym = parse_tu(&files(None), "fx", TuOptions { symmetrize: true }).unwrap();
        assert_eq!(sym.graphs()[0].adjacency().nnz(), 4);
        assert_eq!(sym.num_labels(), 0);
    }

    #[test]
    fn rejects_with_line_numbers() {
        let bad_edge = TuFiles {
            adjacency: "1, 2\n3, 9\n",
            ..files(None)
        };
        let err = parse_tu(&bad_edge, "fx", TuOptions::default()).unwrap_err().to_string();
        assert!(err.contains("fx_A.txt:2:") && err.contains("dangling"), "{err}");

        let cross = TuFiles {
            adjacency: "3, 4\n",
            ..files(None)
        };
        let err = parse_tu(&cross, "fx", TuOptions::default()).unwrap_err().to_string();
        assert!(err.contains("fx_A.txt:1:"), "{err}");

        let gap = TuFiles {
            graph_indicator: "1\n1\n1\n3\n3\n",
            ..files(None)
        };
        let err = parse_tu(&gap, "fx", TuOptions::default()).unwrap_err().to_string();
        assert!(err.contains("fx_graph_indicator.txt:4:"), "{err}");

        let ragged = TuFiles {
            node_attributes: Some("1.0, 2.0\n1.0\n0, 0\n1, 1\n2, 2\n"),
            ..files(None)
        };
        let err = parse_tu(&ragged, "fx", TuOptions::default()).unwrap_err().to_string();
        assert!(err.contains("fx_node_attributes.txt:2:") && err.contains("ragged"), "{err}");

        let short = files(Some("0\n1\n"));
        assert!(parse_tu(&short, "fx", TuOptions::default()).is_err());
        let bad_label = files(Some("0\n1\n-2\n0\n0\n"));
        assert!(parse_tu(&bad_label, "fx", TuOptions::default()).is_err());
    }

    #[test]
    fn attributes_are_split_per_graph() {
        let f = TuFiles {
            node_attributes: Some("0.5, 1\n1.5, 2\n2.5, 3\n3.5, 4\n4.5, 5\n"),
            ..files(Some("0\n0\n0\n0\n0\n"))
        };
        let db = parse_tu(&f, "fx", TuOptions::default()).unwrap();
        assert_eq!(db.attr_dim(), 2);
        assert_eq!(db.graphs()[1].attributes().unwrap().row(0), &[3.5, 4.0]);
    }

    #[test]
    fn format_round_trip() {
        let f = TuFiles {
            node_attributes: Some("0.1, 1\n1.5, 2\n2.5, 3\n3.5, 4\n-4.5e-3, 5\n"),
            ..files(Some("0\n1\n-1\n2\n0\n"))
        };
        let db = parse_tu(&f, "fx", TuOptions { symmetrize: true }).unwrap();
        let out = format_tu(&db).unwrap();
        let get = |s: &str| out.iter().find(|(k, _)| *k == s).map(|(_, v)| v.as_str());
        let back = parse_tu(
            &TuFiles {
                adjacency: get("A").unwrap(),
                graph_indicator: get("graph_indicator").unwrap(),
                node_labels: get("node_labels"),
                graph_labels: get("graph_labels"),
                node_attributes: get("node_attributes"),
            },
            "fx",
            TuOptions::default(),
        )
        .unwrap();
        assert_eq!(back, db);
    }

    #[test]
    fn weighted_graphs_are_not_written() {
        let adj = crate::sparse::CsrMatrix::from_triplets(2, 2, &[(0, 1, 2.0), (1, 0, 2.0)]).unwrap();
        let g = crate::graph::Graph::new(adj, vec![Some(0), Some(0)]).unwrap();
        let db = GraphDatabase::new(vec![g], None).unwrap();
        assert!(format_tu(&db).unwrap_err().to_string().contains("weight"));
    }
}
