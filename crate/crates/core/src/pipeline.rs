//! End-to-end experiment runner.
//!
//! A run loads a dataset, then evaluates every (method, hyper-parameters,
//! seed) cell of the configuration. Each cell draws its own cross-validation
//! split from its seed, trains embeddings once on the embedding-training
//! users (sampling methods) and then one predictor per outer fold. Every
//! intermediate is written under `experiment.out_dir`:
//!
//! ```text
//! data/{nodes,edges,labels,items}.tsv
//! seed{S}/splits.tsv
//! seed{S}/{method}/{params}/walks.txt, embeddings.txt
//! seed{S}/{method}/{params}/fold{K}/model.bin, {valid,test}_rankings.tsv
//! reports.csv, valid_reports.csv
//! ```
//!
//! With `experiment.resume` set, artifacts already on disk are read back
//! instead of recomputed. Embeddings are always passed through their text
//! format, so resumed and uninterrupted runs agree exactly.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use ndarray::Array2;
use rayon::prelude::*;
use serde_json::json;

use crate::config::{Config, DataSource, Method};
use crate::datasets::{generate_synthetic, labels_from_graph, load_movielens, role_types, Dataset, MovieLensOptions, RoleTypes};
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result, StageContext};
use crate::eval::{
    balance_data, diff_dp, diff_eo, format_params, mrr, nested_cv_split, ranking_from_probs, write_reports, EvalReport, PredictionRecord,
    SplitPlan,
};
use crate::formats::{self, read_model_file, write_model_file, FormatError, RankingRow};
use crate::gnn::{build_features, train_gnn, Adjacency, FairLossConfig, GnnError, GnnInput, GnnModel, GnnTrainConfig, LabeledNodes};
use crate::hin::{Group, HinGraph, NodeId};
use crate::metapath::{builtin_metapath, generate_walks, SamplerConfig, SamplingMode, Walk};
use crate::predictor::{predict_probs, train_mlp, MlpRanker};
use crate::projection::debias_all;
use crate::rng::derive_seed;
use crate::skipgram::train_skipgram;

/// A loaded dataset with its role types and sorted career list.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub dataset: Dataset,
    pub types: RoleTypes,
    pub careers: Vec<NodeId>,
}

/// Reads `nodes.tsv`, `edges.tsv` and, when present, `labels.tsv` and
/// `items.tsv` from `dir`. Without a label file, labels come from the
/// choose-edges.
pub fn load_files(dir: &Path, roles: &crate::metapath::Roles) -> Result<Dataset> {
    let open = |name: &str| -> Result<BufReader<File>> {
        File::open(dir.join(name)).map(BufReader::new).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                crate::datasets::DatasetError::MissingFile(dir.join(name).display().to_string()).into()
            } else {
                e.into()
            }
        })
    };
    let graph = formats::read_graph(open("nodes.tsv")?, open("edges.tsv")?)?;
    let labels =
        if dir.join("labels.tsv").exists() { formats::read_labels(open("labels.tsv")?, &graph)? } else { labels_from_graph(&graph, roles) };
    let item_texts = if dir.join("items.tsv").exists() { formats::read_item_texts(open("items.tsv")?, &graph)? } else { HashMap::new() };
    Ok(Dataset { graph, labels, item_texts })
}

pub fn load_dataset(cfg: &Config) -> Result<Dataset> {
    let dir = || cfg.data.dir.clone().unwrap_or_default();
    Ok(match cfg.data.source {
        DataSource::Synthetic => generate_synthetic(&cfg.synthetic.spec(cfg.experiment.data_seed))?,
        DataSource::Movielens => load_movielens(&dir(), &MovieLensOptions { removed_occupations: cfg.data.removed_occupations.clone() })?,
        DataSource::Files => load_files(&dir(), &cfg.data.roles)?,
    })
}

pub fn prepare(dataset: Dataset, cfg: &Config) -> Result<Prepared> {
    let roles = &cfg.data.roles;
    let types = role_types(&dataset.graph, roles).ok_or_else(|| {
        Error::Config(crate::config::ConfigError::Invalid(format!(
            "graph lacks one of the types {:?}, {:?}, {:?}",
            roles.user, roles.item, roles.career
        )))
    })?;
    if dataset.graph.protected_type() != types.user {
        return Err(crate::config::ConfigError::Invalid("the protected attribute must be carried by users".into()).into());
    }
    let careers = dataset.graph.nodes_of_type(types.career).to_vec();
    Ok(Prepared { dataset, types, careers })
}

/// Hyper-parameters of one cell.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct CellParams {
    pub num_walks: usize,
    pub ratio: f64,
    pub lambda: f64,
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Cell {
    pub method: Method,
    pub params: CellParams,
    pub seed: u64,
}

impl Cell {
    /// The `params` column of this cell's reports.
    pub fn params_string(&self, cfg: &Config) -> String {
        let p = &self.params;
        if self.method.is_gnn() {
            // the accuracy term is a mean over nodes, so λ is size independent
            format_params([("lambda", p.lambda.to_string()), ("loss", "mean".to_string())])
        } else {
            let mut kv = vec![
                ("epochs", cfg.skipgram.epochs.to_string()),
                ("lr", cfg.skipgram.initial_lr.to_string()),
                ("walks", p.num_walks.to_string()),
            ];
            if self.method.uses_fair_sampling() {
                kv.push(("ratio", p.ratio.to_string()));
            }
            format_params(kv)
        }
    }
}

fn or_default<T: Clone>(grid: &[T], default: T) -> Vec<T> {
    if grid.is_empty() {
        vec![default]
    } else {
        grid.to_vec()
    }
}

/// All cells of the configuration, in method, parameter, seed order.
pub fn cells(cfg: &Config) -> Vec<Cell> {
    let walks = or_default(&cfg.grid.num_walks, cfg.sampler.num_walks);
    let ratios = or_default(&cfg.grid.ratio, cfg.sampler.ratio);
    let base = CellParams { num_walks: cfg.sampler.num_walks, ratio: cfg.sampler.ratio, lambda: 0.0 };
    let mut out = Vec::new();
    for &method in &cfg.experiment.methods {
        let params: Vec<CellParams> = match method {
            Method::BalanceData | Method::M2v | Method::M2vProj => {
                walks.iter().map(|&num_walks| CellParams { num_walks, ratio: 1.0, ..base }).collect()
            }
            Method::M2vFair | Method::M2vFairProj => {
                walks.iter().flat_map(|&num_walks| ratios.iter().map(move |&ratio| CellParams { num_walks, ratio, ..base })).collect()
            }
            Method::Gnn => vec![base],
            Method::GnnDp => {
                or_default(&cfg.grid.lambda_dp, cfg.gnn.lambda).into_iter().map(|lambda| CellParams { lambda, ..base }).collect()
            }
            Method::GnnEo => {
                or_default(&cfg.grid.lambda_eo, cfg.gnn.lambda).into_iter().map(|lambda| CellParams { lambda, ..base }).collect()
            }
        };
        for p in params {
            for &seed in &cfg.experiment.seeds {
                out.push(Cell { method, params: p, seed });
            }
        }
    }
    out
}

/// Validation and test reports of a run.
#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub test: Vec<EvalReport>,
    pub valid: Vec<EvalReport>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn finish(mut w: BufWriter<File>) -> Result<()> {
    w.flush()?;
    Ok(())
}

/// Writes the dataset in the node/edge/label/item file formats.
pub fn write_dataset(dir: &Path, ds: &Dataset) -> Result<()> {
    let g = &ds.graph;
    let mut w = create(&dir.join("nodes.tsv"))?;
    formats::write_node_table(&mut w, g)?;
    finish(w)?;
    let mut w = create(&dir.join("edges.tsv"))?;
    formats::write_edge_list(&mut w, g)?;
    finish(w)?;
    let mut w = create(&dir.join("labels.tsv"))?;
    formats::write_labels(&mut w, g, &ds.labels)?;
    finish(w)?;
    let mut w = create(&dir.join("items.tsv"))?;
    formats::write_item_texts(&mut w, g, &ds.item_texts)?;
    finish(w)
}

pub fn write_embeddings(path: &Path, g: &HinGraph, emb: &EmbeddingTable) -> Result<()> {
    let mut w = create(path)?;
    emb.write_text(&mut w, |v| g.name(v).to_string())?;
    finish(w)
}

pub fn read_embeddings(path: &Path, g: &HinGraph) -> Result<EmbeddingTable> {
    Ok(EmbeddingTable::read_text(open(path)?, |name| g.node_by_name(name))?)
}

pub fn save_mlp(path: &Path, g: &HinGraph, m: &MlpRanker) -> Result<()> {
    let careers: Vec<&str> = m.careers.iter().map(|&c| g.name(c)).collect();
    let mut w = create(path)?;
    write_model_file(&mut w, "mlp", json!({ "careers": careers }), &m.tensors())?;
    finish(w)
}

fn restore_tensors(file: &formats::ModelFile, names: &[(&'static str, Vec<usize>)], dst: Vec<&mut [f64]>) -> Result<()> {
    for ((name, shape), d) in names.iter().zip(dst) {
        let (s, data) = file.tensor(name)?;
        if s != shape.as_slice() {
            return Err(FormatError::Model(format!("tensor {name} has shape {s:?}, expected {shape:?}")).into());
        }
        d.copy_from_slice(data);
    }
    Ok(())
}

pub fn load_mlp(path: &Path, g: &HinGraph) -> Result<MlpRanker> {
    let file = read_model_file(open(path)?)?;
    if file.header.kind != "mlp" {
        return Err(FormatError::Model(format!("expected an mlp model, found {:?}", file.header.kind)).into());
    }
    let careers = file.header.meta["careers"]
        .as_array()
        .ok_or_else(|| FormatError::Model("meta.careers missing".into()))?
        .iter()
        .map(|v| v.as_str().and_then(|n| g.node_by_name(n)).ok_or_else(|| FormatError::Model(format!("unknown career {v}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let (w1, _) = file.tensor("w1")?;
    if w1.len() != 2 {
        return Err(FormatError::Model("w1 must be a matrix".into()).into());
    }
    let mut m = MlpRanker::init(&careers, w1[1], w1[0], 0);
    let names: Vec<_> = m.tensors().into_iter().map(|(n, s, _)| (n, s)).collect();
    restore_tensors(&file, &names, m.tensors_mut())?;
    Ok(m)
}

pub fn save_gnn(path: &Path, g: &HinGraph, m: &GnnModel, careers: &[NodeId]) -> Result<()> {
    let careers: Vec<&str> = careers.iter().map(|&c| g.name(c)).collect();
    let mut w = create(path)?;
    write_model_file(&mut w, "gnn", json!({ "careers": careers, "activation": m.activation }), &m.tensors())?;
    finish(w)
}

/// A GNN model and the career names of its output classes.
pub fn load_gnn(path: &Path) -> Result<(GnnModel, Vec<String>)> {
    let file = read_model_file(open(path)?)?;
    if file.header.kind != "gnn" {
        return Err(FormatError::Model(format!("expected a gnn model, found {:?}", file.header.kind)).into());
    }
    let bad = |m: &str| -> Error { FormatError::Model(m.to_string()).into() };
    let careers: Vec<String> = serde_json::from_value(file.header.meta["careers"].clone()).map_err(|_| bad("meta.careers missing"))?;
    let activation = serde_json::from_value(file.header.meta["activation"].clone()).map_err(|_| bad("meta.activation missing"))?;
    let (w1, _) = file.tensor("w1")?;
    let (wo, _) = file.tensor("wo")?;
    if w1.len() != 2 || wo.len() != 2 || w1[1] % 2 != 0 {
        return Err(bad("unexpected weight shapes"));
    }
    let mut m = GnnModel::init(w1[1] / 2, w1[0], wo[0], activation, 0);
    let names: Vec<_> = m.tensors().into_iter().map(|(n, s, _)| (n, s)).collect();
    restore_tensors(&file, &names, m.tensors_mut())?;
    Ok((m, careers))
}

/// Rankings and records for `users` from their probability rows over `careers`.
pub fn records_from_probs(
    g: &HinGraph,
    users: &[NodeId],
    truth: &HashMap<NodeId, NodeId>,
    careers: &[NodeId],
    probs: &Array2<f64>,
) -> Result<(Vec<PredictionRecord>, Vec<RankingRow>)> {
    let mut records = Vec::with_capacity(users.len());
    let mut rows = Vec::with_capacity(users.len() * careers.len());
    for (i, &u) in users.iter().enumerate() {
        let order = ranking_from_probs(probs.row(i));
        for (r, &k) in order.iter().enumerate() {
            rows.push(RankingRow {
                user: g.name(u).to_string(),
                rank: r + 1,
                career: g.name(careers[k]).to_string(),
                probability: probs[[i, k]],
            });
        }
        records.push(PredictionRecord {
            user: u,
            group: g.group(u).ok_or(crate::eval::EvalError::Ungrouped(u))?,
            truth: truth[&u],
            ranking: order.into_iter().map(|k| careers[k]).collect(),
        });
    }
    Ok((records, rows))
}

fn report(cell: &Cell, cfg: &Config, split: String, records: &[PredictionRecord]) -> Result<EvalReport> {
    Ok(EvalReport {
        method: cell.method.name().to_string(),
        params: cell.params_string(cfg),
        seed: cell.seed,
        split,
        mrr: mrr(records)?,
        diff_dp: diff_dp(records)?,
        diff_eo: diff_eo(records)?,
    })
}

fn write_rankings(path: &Path, rows: &[RankingRow]) -> Result<()> {
    let mut w = create(path)?;
    formats::write_rankings(&mut w, rows)?;
    finish(w)
}

/// Runs the cross-validation split for one seed, reusing `splits.tsv` when
/// resuming.
pub fn split_for_seed(p: &Prepared, cfg: &Config, seed: u64) -> Result<Vec<SplitPlan>> {
    let path = cfg.experiment.out_dir.join(format!("seed{seed}")).join("splits.tsv");
    let g = &p.dataset.graph;
    if cfg.experiment.resume && path.exists() {
        return Ok(formats::read_splits(open(&path)?, g)?);
    }
    let plans = nested_cv_split(&p.dataset.labels, derive_seed(seed, "split", &[]))?;
    let mut w = create(&path)?;
    formats::write_splits(&mut w, g, &plans)?;
    finish(w)?;
    Ok(plans)
}

/// The graph embeddings are learned on: every like-edge, and choose-edges
/// only for embedding-training users.
pub fn embedding_graph(p: &Prepared, embedding_train: &[NodeId]) -> HinGraph {
    let g = &p.dataset.graph;
    let mut keep = vec![false; g.num_nodes()];
    for u in embedding_train {
        keep[u.index()] = true;
    }
    let career = p.types.career;
    g.filter_edges(|e| {
        let touches_career = g.node_type(e.src).ok() == Some(career) || g.node_type(e.dst).ok() == Some(career);
        !touches_career || keep[e.src.index()] || keep[e.dst.index()]
    })
}

fn sample_corpus(g: &HinGraph, p: &Prepared, cfg: &Config, cell: &Cell) -> Result<Vec<Walk>> {
    let roles = &cfg.data.roles;
    let mode = if cell.method.uses_fair_sampling() {
        SamplingMode::Fair { career_type: p.types.career, ratio: cell.params.ratio, kernel: cfg.sampler.kernel }
    } else {
        SamplingMode::Standard
    };
    let cuiuc = builtin_metapath(g.schema(), roles, "cuiuc")?;
    let uiu = builtin_metapath(g.schema(), roles, "uiu")?;
    let mut walks = generate_walks(
        g,
        &cuiuc,
        &SamplerConfig {
            num_walks_per_start: cfg.sampler.num_walks_cuiuc,
            walk_length: cfg.sampler.walk_length,
            seed: derive_seed(cell.seed, "walks-cuiuc", &[]),
            mode,
        },
    )?;
    walks.extend(generate_walks(
        g,
        &uiu,
        &SamplerConfig {
            num_walks_per_start: cell.params.num_walks,
            walk_length: cfg.sampler.walk_length,
            seed: derive_seed(cell.seed, "walks-uiu", &[]),
            mode,
        },
    )?);
    Ok(walks)
}

/// Adds zero rows for any of `needed` missing from `emb`.
pub fn fill_missing(emb: EmbeddingTable, g: &HinGraph, needed: impl IntoIterator<Item = NodeId>) -> Result<EmbeddingTable> {
    let missing: Vec<NodeId> = needed.into_iter().filter(|v| !emb.contains(*v)).collect();
    if missing.is_empty() {
        return Ok(emb);
    }
    warn!("{} nodes never appear in a walk (first: {}); using zero embeddings", missing.len(), g.name(missing[0]));
    let dim = emb.dim();
    let rows = emb.iter().map(|(v, x)| (v, x.to_vec())).chain(missing.into_iter().map(|v| (v, vec![0.0; dim])));
    Ok(EmbeddingTable::from_rows(dim, rows.collect::<Vec<_>>())?)
}

fn cell_dir(cfg: &Config, cell: &Cell) -> PathBuf {
    let params = cell.params_string(cfg).replace(';', "_");
    cfg.experiment.out_dir.join(format!("seed{}", cell.seed)).join(cell.method.name()).join(params)
}

/// Embeddings of a sampling-based cell, computed or read back.
fn cell_embeddings(p: &Prepared, cfg: &Config, cell: &Cell, plans: &[SplitPlan], dir: &Path) -> Result<EmbeddingTable> {
    let g = &p.dataset.graph;
    let emb_path = dir.join("embeddings.txt");
    let emb = if cfg.experiment.resume && emb_path.exists() {
        read_embeddings(&emb_path, g).stage("read-embeddings")?
    } else {
        let train_users = &plans[0].embedding_train;
        let mut eg = embedding_graph(p, train_users);
        if cell.method == Method::BalanceData {
            let truth: HashMap<NodeId, NodeId> = p.dataset.labels.iter().copied().collect();
            let pairs: Vec<(NodeId, NodeId)> = train_users.iter().map(|u| (*u, truth[u])).collect();
            eg = balance_data(&eg, &pairs, derive_seed(cell.seed, "balance", &[])).stage("balance")?.graph;
        }
        let walks_path = dir.join("walks.txt");
        let walks = if cfg.experiment.resume && walks_path.exists() {
            formats::read_walks(open(&walks_path)?, g).stage("read-walks")?
        } else {
            let walks = sample_corpus(&eg, p, cfg, cell).stage("sample-walks")?;
            let mut w = create(&walks_path)?;
            formats::write_walks(&mut w, g, &walks)?;
            finish(w)?;
            walks
        };
        let model = train_skipgram(&walks, &eg, &cfg.skipgram.to_config(derive_seed(cell.seed, "skipgram", &[]))).stage("train-embed")?;
        let mut emb = model.centers;
        if cell.method.uses_projection() {
            let users = g.nodes_of_type(p.types.user);
            let fit: Vec<(NodeId, Group)> =
                users.iter().filter(|u| emb.contains(**u)).filter_map(|&u| g.group(u).map(|x| (u, x))).collect();
            let targets: Vec<NodeId> = fit.iter().map(|f| f.0).collect();
            emb = debias_all(&emb, &fit, &targets).stage("debias")?.0;
        }
        write_embeddings(&emb_path, g, &emb)?;
        read_embeddings(&emb_path, g)?
    };
    let needed = p.careers.iter().copied().chain(plans.iter().flat_map(|pl| pl.all()));
    fill_missing(emb, g, needed.collect::<Vec<_>>())
}

fn run_sampling_cell(p: &Prepared, cfg: &Config, cell: &Cell, plans: &[SplitPlan]) -> Result<RunOutput> {
    let g = &p.dataset.graph;
    let dir = cell_dir(cfg, cell);
    let emb = cell_embeddings(p, cfg, cell, plans, &dir)?;
    let truth: HashMap<NodeId, NodeId> = p.dataset.labels.iter().copied().collect();
    let pairs = |users: &[NodeId]| users.iter().map(|u| (*u, truth[u])).collect::<Vec<_>>();
    let mut out = RunOutput::default();
    for &fold in &cfg.folds() {
        let plan = &plans[fold];
        let fdir = dir.join(format!("fold{fold}"));
        let model_path = fdir.join("model.bin");
        let ranker = if cfg.experiment.resume && model_path.exists() {
            load_mlp(&model_path, g).stage("read-mlp")?
        } else {
            let mlp_cfg = cfg.mlp.to_config(derive_seed(cell.seed, "mlp", &[fold as u64]));
            let t = train_mlp(&emb, &p.careers, &pairs(&plan.predict_train), &pairs(&plan.predict_valid), &mlp_cfg).stage("train-mlp")?;
            save_mlp(&model_path, g, &t.ranker)?;
            t.ranker
        };
        for (split, users, sink) in [("valid", &plan.predict_valid, &mut out.valid), ("test", &plan.predict_test, &mut out.test)] {
            let probs = predict_probs(&ranker, &emb, users).stage("predict")?;
            let (records, rows) = records_from_probs(g, users, &truth, &ranker.careers, &probs)?;
            write_rankings(&fdir.join(format!("{split}_rankings.tsv")), &rows)?;
            sink.push(report(cell, cfg, format!("fold{fold}/{split}"), &records).stage("evaluate")?);
        }
    }
    Ok(out)
}

/// Features and adjacency shared by every GNN cell of a dataset.
#[derive(Clone, Debug)]
pub struct GnnData {
    pub input: GnnInput,
    pub class_of: BTreeMap<NodeId, usize>,
}

pub fn gnn_data(p: &Prepared, cfg: &Config) -> GnnData {
    let g = &p.dataset.graph;
    let fm = build_features(g, &p.dataset.item_texts, p.types.user, p.types.item, cfg.gnn.feature_dim);
    // career nodes would leak labels through aggregation
    let adj = Adjacency::from_hin(g, &[p.types.career]);
    let class_of = p.careers.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    GnnData { input: GnnInput::new(adj, fm.data), class_of }
}

fn labeled(g: &HinGraph, users: &[NodeId], truth: &HashMap<NodeId, NodeId>, class_of: &BTreeMap<NodeId, usize>) -> Result<LabeledNodes> {
    let mut out = LabeledNodes { nodes: Vec::new(), labels: Vec::new(), groups: Vec::new() };
    for &u in users {
        out.nodes.push(u.index());
        out.labels.push(class_of[&truth[&u]]);
        out.groups.push(g.group(u).ok_or(crate::eval::EvalError::Ungrouped(u))?);
    }
    Ok(out)
}

fn run_gnn_cell(p: &Prepared, data: &GnnData, cfg: &Config, cell: &Cell, plans: &[SplitPlan]) -> Result<RunOutput> {
    let g = &p.dataset.graph;
    let dir = cell_dir(cfg, cell);
    let truth: HashMap<NodeId, NodeId> = p.dataset.labels.iter().copied().collect();
    let fair = match cell.method {
        Method::GnnDp => FairLossConfig::Dp { lambda: cell.params.lambda },
        Method::GnnEo => FairLossConfig::Eo { lambda: cell.params.lambda },
        _ => FairLossConfig::None,
    };
    let mut out = RunOutput::default();
    for &fold in &cfg.folds() {
        let plan = &plans[fold];
        let fdir = dir.join(format!("fold{fold}"));
        let model_path = fdir.join("model.bin");
        let model = if cfg.experiment.resume && model_path.exists() {
            load_gnn(&model_path).stage("read-gnn")?.0
        } else {
            let train_users: Vec<NodeId> = plan.embedding_train.iter().chain(&plan.predict_train).copied().collect();
            let train = labeled(g, &train_users, &truth, &data.class_of)?;
            let valid = labeled(g, &plan.predict_valid, &truth, &data.class_of)?;
            let gcfg = GnnTrainConfig {
                hidden: cfg.gnn.hidden,
                lr: cfg.gnn.lr,
                epochs: cfg.gnn.epochs,
                patience: cfg.gnn.patience,
                activation: cfg.gnn.activation,
                fair,
                seed: derive_seed(cell.seed, "gnn", &[fold as u64]),
            };
            let model = match train_gnn(&data.input, p.careers.len(), &train, &valid, &gcfg) {
                Ok(t) => t.model,
                Err(GnnError::Diverged { epoch, checkpoint }) => {
                    warn!(
                        "{} {} seed {} fold {fold}: diverged at epoch {epoch}; keeping the last finite model",
                        cell.method,
                        cell.params_string(cfg),
                        cell.seed
                    );
                    *checkpoint
                }
                Err(e) => return Err(e).stage("train-gnn"),
            };
            save_gnn(&model_path, g, &model, &p.careers)?;
            model
        };
        for (split, users, sink) in [("valid", &plan.predict_valid, &mut out.valid), ("test", &plan.predict_test, &mut out.test)] {
            let nodes: Vec<usize> = users.iter().map(|u| u.index()).collect();
            let probs = model.predict(&data.input, &nodes);
            let (records, rows) = records_from_probs(g, users, &truth, &p.careers, &probs)?;
            write_rankings(&fdir.join(format!("{split}_rankings.tsv")), &rows)?;
            sink.push(report(cell, cfg, format!("fold{fold}/{split}"), &records).stage("evaluate")?);
        }
    }
    Ok(out)
}

/// Evaluates one cell on every configured fold.
pub fn run_cell(p: &Prepared, gnn: Option<&GnnData>, cfg: &Config, cell: &Cell) -> Result<RunOutput> {
    let plans = split_for_seed(p, cfg, cell.seed).stage("split")?;
    if cell.method.is_gnn() {
        let owned;
        let data = match gnn {
            Some(d) => d,
            None => {
                owned = gnn_data(p, cfg);
                &owned
            }
        };
        run_gnn_cell(p, data, cfg, cell, &plans)
    } else {
        run_sampling_cell(p, cfg, cell, &plans)
    }
}

/// Runs every cell of `cfg` on an already prepared dataset; cells run in
/// parallel and results come back in [`cells`] order.
pub fn run_prepared(p: &Prepared, cfg: &Config) -> Result<RunOutput> {
    let all = cells(cfg);
    let gnn = cfg.experiment.methods.iter().any(|m| m.is_gnn()).then(|| gnn_data(p, cfg));
    // splits are shared by all cells of a seed; write them before fanning out
    for seed in &cfg.experiment.seeds {
        split_for_seed(p, cfg, *seed).stage("split")?;
    }
    let resumed = Config { experiment: crate::config::ExperimentConfig { resume: true, ..cfg.experiment.clone() }, ..cfg.clone() };
    let parts: Vec<RunOutput> = all
        .par_iter()
        .map(|cell| {
            info!("running {} {} seed {}", cell.method, cell.params_string(cfg), cell.seed);
            // read the split just written rather than racing to rewrite it
            let plans = split_for_seed(p, &resumed, cell.seed).stage("split")?;
            if cell.method.is_gnn() {
                run_gnn_cell(p, gnn.as_ref().expect("gnn data built"), cfg, cell, &plans)
            } else {
                run_sampling_cell(p, cfg, cell, &plans)
            }
        })
        .collect::<Result<_>>()?;
    let mut out = RunOutput::default();
    for part in parts {
        out.test.extend(part.test);
        out.valid.extend(part.valid);
    }
    Ok(out)
}

/// Loads the configured dataset, runs every cell and writes `reports.csv`
/// (test folds) and `valid_reports.csv`.
pub fn run_pipeline(cfg: &Config) -> Result<RunOutput> {
    cfg.validate()?;
    let out_dir = &cfg.experiment.out_dir;
    let dataset = load_dataset(cfg).stage("load")?;
    write_dataset(&out_dir.join("data"), &dataset).stage("write-data")?;
    let p = prepare(dataset, cfg).stage("load")?;
    let out = run_prepared(&p, cfg)?;
    let mut w = create(&out_dir.join("reports.csv"))?;
    write_reports(&mut w, &out.test)?;
    finish(w)?;
    let mut w = create(&out_dir.join("valid_reports.csv"))?;
    write_reports(&mut w, &out.valid)?;
    finish(w)?;
    info!("{} test reports written to {}", out.test.len(), out_dir.display());
    Ok(out)
}
