//! Plain-text and binary file formats shared by the pipeline stages.
//!
//! * node table: `node_id<TAB>type<TAB>group-or-dash`
//! * edge list: `src_id<TAB>relation<TAB>dst_id`
//! * walk corpus: one walk per line, space-separated node ids
//! * labels: `user_id<TAB>career_id`
//! * item texts: `item_id<TAB>space-separated tokens`
//! * splits: `fold<TAB>set<TAB>user_id`
//! * rankings: `user_id<TAB>rank<TAB>career_id<TAB>probability`
//! * model files: magic, version, JSON header, little-endian `f64` payload
//!
//! Lines starting with `#` are comments in every text format. The node
//! table may carry a `# attribute=<name> groups=<g0>,<g1>` comment that
//! fixes the attribute name and the group order; without it groups are
//! ordered by name.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::EmbeddingError;
use crate::eval::SplitPlan;
use crate::hin::{build_graph, EdgeSpec, Group, HinError, HinGraph, NodeId, NodeSpec, ProtectedAttribute, Schema};
use crate::metapath::Walk;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{file} line {line}: {msg}")]
    Parse { file: &'static str, line: usize, msg: String },
    #[error(transparent)]
    Graph(#[from] HinError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("model file: {0}")]
    Model(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn perr(file: &'static str, line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Parse { file, line, msg: msg.into() }
}

/// Non-comment, non-blank lines with 1-based line numbers.
fn data_lines<R: BufRead>(r: R) -> impl Iterator<Item = Result<(usize, String), std::io::Error>> {
    r.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(s) if s.trim().is_empty() || s.starts_with('#') => None,
        Ok(s) => Some(Ok((i + 1, s.trim_end_matches('\r').to_string()))),
        Err(e) => Some(Err(e)),
    })
}

fn tab_fields<'a>(file: &'static str, line: usize, s: &'a str, n: usize) -> Result<Vec<&'a str>, FormatError> {
    let f: Vec<&str> = s.split('\t').collect();
    if f.len() != n || f.iter().any(|x| x.is_empty()) {
        return Err(perr(file, line, format!("expected {n} non-empty tab-separated fields, got {:?}", f)));
    }
    Ok(f)
}

/// One parsed node-table row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeRow {
    pub name: String,
    pub node_type: String,
    pub group: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NodeTable {
    pub attribute: Option<String>,
    pub group_order: Option<[String; 2]>,
    pub rows: Vec<NodeRow>,
}

pub fn read_node_table<R: BufRead>(r: R) -> Result<NodeTable, FormatError> {
    let mut table = NodeTable::default();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if let Some(meta) = line.strip_prefix('#') {
            for kv in meta.split_whitespace() {
                match kv.split_once('=') {
                    Some(("attribute", v)) => table.attribute = Some(v.to_string()),
                    Some(("groups", v)) => {
                        let gs: Vec<&str> = v.split(',').collect();
                        if gs.len() != 2 || gs[0].is_empty() || gs[1].is_empty() || gs[0] == gs[1] {
                            return Err(perr("node table", lineno, format!("groups must name two distinct groups, got {v:?}")));
                        }
                        table.group_order = Some([gs[0].to_string(), gs[1].to_string()]);
                    }
                    _ => {}
                }
            }
            continue;
        }
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let f = tab_fields("node table", lineno, line, 3)?;
        let group = (f[2] != "-").then(|| f[2].to_string());
        table.rows.push(NodeRow { name: f[0].to_string(), node_type: f[1].to_string(), group });
    }
    Ok(table)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeRow {
    pub src: String,
    pub relation: String,
    pub dst: String,
}

pub fn read_edge_list<R: BufRead>(r: R) -> Result<Vec<EdgeRow>, FormatError> {
    let mut out = Vec::new();
    for item in data_lines(r) {
        let (lineno, line) = item?;
        let f = tab_fields("edge list", lineno, &line, 3)?;
        out.push(EdgeRow { src: f[0].to_string(), relation: f[1].to_string(), dst: f[2].to_string() });
    }
    Ok(out)
}

/// Builds a graph from parsed node and edge tables. Node ids follow row
/// order; relation endpoint types come from the first edge that uses them.
pub fn graph_from_tables(nodes: &NodeTable, edges: &[EdgeRow]) -> Result<HinGraph, FormatError> {
    let mut schema = Schema::new();
    let mut specs = Vec::with_capacity(nodes.rows.len());
    let mut index: HashMap<&str, NodeId> = HashMap::with_capacity(nodes.rows.len());
    let mut protected: Option<crate::hin::TypeId> = None;
    let mut group_names: BTreeSet<&str> = BTreeSet::new();
    for (i, row) in nodes.rows.iter().enumerate() {
        let id = NodeId(u32::try_from(i).map_err(|_| perr("node table", i + 1, "too many nodes"))?);
        if index.insert(&row.name, id).is_some() {
            return Err(perr("node table", i + 1, format!("duplicate node id {:?}", row.name)));
        }
        let t = schema.add_type(&row.node_type);
        if let Some(g) = &row.group {
            match protected {
                None => protected = Some(t),
                Some(p) if p != t => {
                    return Err(perr("node table", i + 1, "group labels on more than one node type"));
                }
                _ => {}
            }
            group_names.insert(g);
        }
        specs.push(NodeSpec { id, node_type: t, name: row.name.clone() });
    }
    let protected = protected.ok_or_else(|| perr("node table", 0, "no node carries a group label"))?;
    let order: [String; 2] = match &nodes.group_order {
        Some(o) => o.clone(),
        None => {
            let mut it = group_names.iter();
            match (it.next(), it.next(), it.next()) {
                (Some(a), Some(b), None) => [a.to_string(), b.to_string()],
                (Some(a), None, _) => [a.to_string(), format!("not-{a}")],
                _ => return Err(perr("node table", 0, format!("expected two groups, found {group_names:?}"))),
            }
        }
    };
    let mut labels = Vec::new();
    for (row, spec) in nodes.rows.iter().zip(&specs) {
        if let Some(g) = &row.group {
            let grp = if *g == order[0] {
                Group::G0
            } else if *g == order[1] {
                Group::G1
            } else {
                return Err(perr("node table", spec.id.index() + 1, format!("group {g:?} not in {order:?}")));
            };
            labels.push((spec.id, grp));
        }
    }
    let mut edge_specs = Vec::with_capacity(edges.len());
    for (i, e) in edges.iter().enumerate() {
        let lookup = |name: &str| index.get(name).copied().ok_or_else(|| perr("edge list", i + 1, format!("unknown node {name:?}")));
        let (src, dst) = (lookup(&e.src)?, lookup(&e.dst)?);
        let (st, dt) = (specs[src.index()].node_type, specs[dst.index()].node_type);
        let rel = match schema.relation_id(&e.relation) {
            Some(r) => r,
            None => schema.add_relation(&e.relation, st, dt)?,
        };
        edge_specs.push(EdgeSpec { src, dst, relation: rel });
    }
    let attr = ProtectedAttribute {
        name: nodes.attribute.clone().unwrap_or_else(|| "group".to_string()),
        node_type: protected,
        group_names: order,
        labels,
    };
    Ok(build_graph(schema, specs, edge_specs, attr)?)
}

pub fn read_graph<N: BufRead, E: BufRead>(nodes: N, edges: E) -> Result<HinGraph, FormatError> {
    let nt = read_node_table(nodes)?;
    let el = read_edge_list(edges)?;
    graph_from_tables(&nt, &el)
}

pub fn write_node_table<W: Write>(mut w: W, g: &HinGraph) -> Result<(), FormatError> {
    writeln!(w, "# attribute={} groups={},{}", g.attribute_name(), g.group_name(Group::G0), g.group_name(Group::G1))?;
    for v in 0..g.num_nodes() {
        let v = NodeId(v as u32);
        let t = g.schema().type_name(g.node_type(v)?);
        let grp = g.group(v).map(|x| g.group_name(x)).unwrap_or("-");
        writeln!(w, "{}\t{}\t{}", g.name(v), t, grp)?;
    }
    Ok(())
}

pub fn write_edge_list<W: Write>(mut w: W, g: &HinGraph) -> Result<(), FormatError> {
    for e in g.edges() {
        writeln!(w, "{}\t{}\t{}", g.name(e.src), g.schema().relation(e.relation).name, g.name(e.dst))?;
    }
    Ok(())
}

fn resolve(g: &HinGraph, file: &'static str, line: usize, name: &str) -> Result<NodeId, FormatError> {
    g.node_by_name(name).ok_or_else(|| perr(file, line, format!("unknown node {name:?}")))
}

/// Walk corpus with node names resolved against nothing: raw token lines.
pub fn read_walk_tokens<R: BufRead>(r: R) -> Result<Vec<Vec<String>>, FormatError> {
    let mut out = Vec::new();
    for item in data_lines(r) {
        let (_, line) = item?;
        out.push(line.split_whitespace().map(str::to_string).collect());
    }
    Ok(out)
}

pub fn read_walks<R: BufRead>(r: R, g: &HinGraph) -> Result<Vec<Walk>, FormatError> {
    let mut out = Vec::new();
    for item in data_lines(r) {
        let (lineno, line) = item?;
        let walk = line.split_whitespace().map(|t| resolve(g, "walk corpus", lineno, t)).collect::<Result<Vec<_>, _>>()?;
        out.push(walk);
    }
    Ok(out)
}

pub fn write_walks<W: Write>(mut w: W, g: &HinGraph, walks: &[Walk]) -> Result<(), FormatError> {
    for walk in walks {
        let names: Vec<&str> = walk.iter().map(|&v| g.name(v)).collect();
        writeln!(w, "{}", names.join(" "))?;
    }
    Ok(())
}

/// Raw two-column rows (`a<TAB>b`).
pub fn read_pairs<R: BufRead>(r: R, file: &'static str) -> Result<Vec<(String, String)>, FormatError> {
    let mut out = Vec::new();
    for item in data_lines(r) {
        let (lineno, line) = item?;
        let f = tab_fields(file, lineno, &line, 2)?;
        out.push((f[0].to_string(), f[1].to_string()));
    }
    Ok(out)
}

/// `(user, career)` labels resolved against a graph.
pub fn read_labels<R: BufRead>(r: R, g: &HinGraph) -> Result<Vec<(NodeId, NodeId)>, FormatError> {
    let rows = read_pairs(r, "labels")?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(rows.len());
    for (i, (u, c)) in rows.iter().enumerate() {
        let u = resolve(g, "labels", i + 1, u)?;
        if !seen.insert(u) {
            return Err(perr("labels", i + 1, format!("user {} labeled twice", g.name(u))));
        }
        out.push((u, resolve(g, "labels", i + 1, c)?));
    }
    Ok(out)
}

pub fn write_labels<W: Write>(mut w: W, g: &HinGraph, labels: &[(NodeId, NodeId)]) -> Result<(), FormatError> {
    for &(u, c) in labels {
        writeln!(w, "{}\t{}", g.name(u), g.name(c))?;
    }
    Ok(())
}

/// `item<TAB>tokens` rows; an item with no tokens may omit the second field.
pub fn read_item_texts<R: BufRead>(r: R, g: &HinGraph) -> Result<HashMap<NodeId, Vec<String>>, FormatError> {
    let mut out = HashMap::new();
    for item in data_lines(r) {
        let (lineno, line) = item?;
        let (name, rest) = line.split_once('\t').unwrap_or((line.as_str(), ""));
        let v = resolve(g, "item texts", lineno, name)?;
        out.insert(v, rest.split_whitespace().map(str::to_string).collect());
    }
    Ok(out)
}

pub fn write_item_texts<W: Write>(mut w: W, g: &HinGraph, texts: &HashMap<NodeId, Vec<String>>) -> Result<(), FormatError> {
    let sorted: BTreeMap<NodeId, &Vec<String>> = texts.iter().map(|(k, v)| (*k, v)).collect();
    for (v, toks) in sorted {
        writeln!(w, "{}\t{}", g.name(v), toks.join(" "))?;
    }
    Ok(())
}

const SPLIT_SETS: [&str; 4] = ["embedding-train", "predict-train", "predict-valid", "predict-test"];

pub fn write_splits<W: Write>(mut w: W, g: &HinGraph, plans: &[SplitPlan]) -> Result<(), FormatError> {
    for p in plans {
        let sets = [&p.embedding_train, &p.predict_train, &p.predict_valid, &p.predict_test];
        for (name, set) in SPLIT_SETS.iter().zip(sets) {
            for &u in set {
                writeln!(w, "{}\t{}\t{}", p.fold, name, g.name(u))?;
            }
        }
    }
    Ok(())
}

pub fn read_splits<R: BufRead>(r: R, g: &HinGraph) -> Result<Vec<SplitPlan>, FormatError> {
    let mut plans: BTreeMap<usize, SplitPlan> = BTreeMap::new();
    for item in data_lines(r) {
        let (lineno, line) = item?;
        let f = tab_fields("splits", lineno, &line, 3)?;
        let fold: usize = f[0].parse().map_err(|_| perr("splits", lineno, format!("bad fold {:?}", f[0])))?;
        let u = resolve(g, "splits", lineno, f[2])?;
        let p = plans.entry(fold).or_insert_with(|| SplitPlan {
            fold,
            embedding_train: vec![],
            predict_train: vec![],
            predict_valid: vec![],
            predict_test: vec![],
        });
        match f[1] {
            "embedding-train" => p.embedding_train.push(u),
            "predict-train" => p.predict_train.push(u),
            "predict-valid" => p.predict_valid.push(u),
            "predict-test" => p.predict_test.push(u),
            other => return Err(perr("splits", lineno, format!("unknown set {other:?}"))),
        }
    }
    Ok(plans.into_values().collect())
}

/// One line of a rankings file.
#[derive(Clone, Debug, PartialEq)]
pub struct RankingRow {
    pub user: String,
    pub rank: usize,
    pub career: String,
    pub probability: f64,
}

pub fn write_rankings<W: Write>(mut w: W, rows: &[RankingRow]) -> Result<(), FormatError> {
    for r in rows {
        writeln!(w, "{}\t{}\t{}\t{:.9}", r.user, r.rank, r.career, r.probability)?;
    }
    Ok(())
}

pub fn read_rankings<R: BufRead>(r: R) -> Result<Vec<RankingRow>, FormatError> {
    let mut out = Vec::new();
    for item in data_lines(r) {
        let (lineno, line) = item?;
        let f = tab_fields("rankings", lineno, &line, 4)?;
        let rank = f[1].parse().map_err(|_| perr("rankings", lineno, format!("bad rank {:?}", f[1])))?;
        let probability: f64 = f[3].parse().map_err(|_| perr("rankings", lineno, format!("bad probability {:?}", f[3])))?;
        if !(0.0..=1.0).contains(&probability) {
            return Err(perr("rankings", lineno, format!("probability {probability} outside [0, 1]")));
        }
        out.push(RankingRow { user: f[0].to_string(), rank, career: f[2].to_string(), probability });
    }
    Ok(out)
}

/// Groups rows by user (first-appearance order) into career lists ordered
/// by rank. Ranks of each user must be exactly `1..=n`.
pub fn rankings_by_user(rows: &[RankingRow]) -> Result<Vec<(String, Vec<String>)>, FormatError> {
    let mut order: Vec<String> = Vec::new();
    let mut by_user: HashMap<&str, Vec<(usize, &str)>> = HashMap::new();
    for r in rows {
        let e = by_user.entry(&r.user).or_default();
        if e.is_empty() {
            order.push(r.user.clone());
        }
        e.push((r.rank, &r.career));
    }
    let mut out = Vec::with_capacity(order.len());
    for u in order {
        let mut list = by_user.remove(u.as_str()).unwrap_or_default();
        list.sort_unstable();
        if list.iter().enumerate().any(|(i, (rank, _))| *rank != i + 1) {
            return Err(perr("rankings", 0, format!("ranks of user {u:?} are not 1..n")));
        }
        out.push((u, list.into_iter().map(|(_, c)| c.to_string()).collect()));
    }
    Ok(out)
}

const MAGIC: &[u8; 8] = b"FAIRHIN\0";
pub const MODEL_VERSION: u32 = 1;
/// Largest JSON header accepted when reading.
const MAX_HEADER: u64 = 1 << 24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub kind: String,
    pub tensors: Vec<TensorInfo>,
    #[serde(default)]
    pub meta: serde_json::Value,
}

/// A parsed model file: header plus one flat buffer per tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub header: ModelHeader,
    pub data: Vec<Vec<f64>>,
}

impl ModelFile {
    pub fn tensor(&self, name: &str) -> Result<(&[usize], &[f64]), FormatError> {
        self.header
            .tensors
            .iter()
            .zip(&self.data)
            .find(|(t, _)| t.name == name)
            .map(|(t, d)| (t.shape.as_slice(), d.as_slice()))
            .ok_or_else(|| FormatError::Model(format!("missing tensor {name:?}")))
    }
}

pub fn write_model_file<W: Write>(
    mut w: W,
    kind: &str,
    meta: serde_json::Value,
    tensors: &[(&str, Vec<usize>, &[f64])],
) -> Result<(), FormatError> {
    let header = ModelHeader {
        kind: kind.to_string(),
        tensors: tensors.iter().map(|(n, s, _)| TensorInfo { name: n.to_string(), shape: s.clone() }).collect(),
        meta,
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&MODEL_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for (_, _, data) in tensors {
        for x in *data {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_model_file<R: Read>(mut r: R) -> Result<ModelFile, FormatError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(FormatError::Model("bad magic".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != MODEL_VERSION {
        return Err(FormatError::Model(format!("unsupported version {version}")));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let len = u64::from_le_bytes(b8);
    if len > MAX_HEADER {
        return Err(FormatError::Model(format!("header length {len} too large")));
    }
    let mut json = vec![0u8; len as usize];
    r.read_exact(&mut json)?;
    let header: ModelHeader = serde_json::from_slice(&json)?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    let mut total: usize = 0;
    for t in &header.tensors {
        let n = t.shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        total = n.and_then(|n| total.checked_add(n)).ok_or_else(|| FormatError::Model(format!("tensor {} shape overflows", t.name)))?;
    }
    if total.checked_mul(8) != Some(rest.len()) {
        return Err(FormatError::Model(format!("payload has {} bytes, shapes need {} values", rest.len(), total)));
    }
    let mut data = Vec::with_capacity(header.tensors.len());
    let mut chunks = rest.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    for t in &header.tensors {
        let n: usize = t.shape.iter().product();
        let v: Vec<f64> = chunks.by_ref().take(n).collect();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(FormatError::Model(format!("non-finite value in tensor {}", t.name)));
        }
        data.push(v);
    }
    Ok(ModelFile { header, data })
}
