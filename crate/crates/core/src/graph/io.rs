use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use super::BipartiteGraph;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EdgeFormat {
    /// Whitespace (tab or space) separated columns.
    #[default]
    Tsv,
    Csv,
}

impl FromStr for EdgeFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(EdgeFormat::Tsv),
            "csv" => Ok(EdgeFormat::Csv),
            other => Err(Error::Config(format!("unknown edge format '{other}'"))),
        }
    }
}

impl fmt::Display for EdgeFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeFormat::Tsv => "tsv",
            EdgeFormat::Csv => "csv",
        })
    }
}

/// A graph plus the original ids behind each dense index.
#[derive(Clone, Debug)]
pub struct LoadedGraph {
    pub graph: BipartiteGraph,
    pub user_ids: Vec<i64>,
    pub item_ids: Vec<i64>,
}

fn columns(line: &str, format: EdgeFormat) -> Vec<&str> {
    match format {
        EdgeFormat::Tsv => line.split_whitespace().collect(),
        EdgeFormat::Csv => line.split(',').map(str::trim).collect(),
    }
}

/// Reads a two-column interaction file, densifying ids in first-seen order.
///
/// Extra columns (ratings, timestamps) are ignored, as are blank lines and
/// lines starting with `#`.
pub fn load_edge_list(path: &Path, format: EdgeFormat) -> Result<LoadedGraph> {
    let reader = BufReader::new(File::open(path)?);
    let mut user_index: HashMap<i64, usize> = HashMap::new();
    let mut item_index: HashMap<i64, usize> = HashMap::new();
    let mut user_ids = Vec::new();
    let mut item_ids = Vec::new();
    let mut edges = Vec::new();

    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cols = columns(trimmed, format);
        let parse = |idx: usize| -> Result<i64> {
            let raw = cols.get(idx).copied().unwrap_or("");
            raw.parse::<i64>().map_err(|_| Error::Ingest {
                path: path.to_path_buf(),
                line: n + 1,
                detail: format!("expected two integer columns, got '{trimmed}'"),
            })
        };
        let (u, v) = (parse(0)?, parse(1)?);
        let ui = *user_index.entry(u).or_insert_with(|| {
            user_ids.push(u);
            user_ids.len() - 1
        });
        let vi = *item_index.entry(v).or_insert_with(|| {
            item_ids.push(v);
            item_ids.len() - 1
        });
        edges.push((ui, vi));
    }

    if edges.is_empty() {
        return Err(Error::EmptyGraph(format!(
            "{} contains no interactions",
            path.display()
        )));
    }
    let graph = BipartiteGraph::new(user_ids.len(), item_ids.len(), edges)?;
    Ok(LoadedGraph {
        graph,
        user_ids,
        item_ids,
    })
}

/// Writes a dense-index graph: a `# users=.. items=.. edges=..` header and
/// one `user<TAB>item` line per edge.
pub fn write_graph(path: &Path, graph: &BipartiteGraph) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "# users={} items={} edges={}",
        graph.user_count(),
        graph.item_count(),
        graph.edge_count()
    )?;
    for (u, v) in graph.edges() {
        writeln!(w, "{u}\t{v}")?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn parse_header_fields(line: &str) -> HashMap<String, String> {
    line.trim_start_matches('#')
        .split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

pub(crate) fn header_usize(
    fields: &HashMap<String, String>,
    key: &str,
    path: &Path,
) -> Result<usize> {
    fields
        .get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            detail: format!("missing or invalid header field '{key}'"),
        })
}

/// Reads a graph written by [`write_graph`].
pub fn read_graph(path: &Path) -> Result<BipartiteGraph> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    let fields = parse_header_fields(&header);
    let users = header_usize(&fields, "users", path)?;
    let items = header_usize(&fields, "items", path)?;
    let mut edges = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let pair = line
            .split_once('\t')
            .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
        match pair {
            Some(p) => edges.push(p),
            None => {
                return Err(Error::Ingest {
                    path: path.to_path_buf(),
                    line: n + 2,
                    detail: format!("expected 'user<TAB>item', got '{line}'"),
                })
            }
        }
    }
    BipartiteGraph::new(users, items, edges)
}

/// Writes `index<TAB>original_id` lines.
pub fn write_id_map(path: &Path, ids: &[i64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "#index\toriginal_id")?;
    for (i, id) in ids.iter().enumerate() {
        writeln!(w, "{i}\t{id}")?;
    }
    w.flush()?;
    Ok(())
}
