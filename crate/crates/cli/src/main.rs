use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};

use fairhin::config::Config;
use fairhin::datasets::{generate_synthetic, load_movielens, MovieLensOptions, SyntheticSpec, DEFAULT_REMOVED_OCCUPATIONS};
use fairhin::embedding::EmbeddingTable;
use fairhin::eval::{
    diff_dp, diff_eo, diff_eo_with, gnn_baseline_for_fairness, method_frontiers, mrr, nested_cv_split, pareto_frontier, read_reports,
    threshold_select, write_reports, EoDenominator, EvalReport, FairnessMetric, PredictionRecord,
};
use fairhin::formats::{self, RankingRow};
use fairhin::gnn::{build_features, train_gnn, Activation, Adjacency, FairLossConfig, GnnInput, GnnTrainConfig, LabeledNodes};
use fairhin::metapath::{builtin_metapath, generate_walks, FairKernel, Roles, SamplerConfig, SamplingMode};
use fairhin::pipeline;
use fairhin::predictor::{predict_probs, train_mlp, MlpConfig};
use fairhin::projection::debias_all;
use fairhin::rng::derive_seed;
use fairhin::skipgram::{train_skipgram, SkipGramConfig};
use fairhin::{Group, HinGraph, NodeId};

/// Directory that relative data paths are resolved against.
const DATA_DIR_ENV: &str = "FAIRHIN_DATA_DIR";

#[derive(Parser)]
#[command(name = "fairhin", version, about = "Fair node embeddings for heterogeneous information networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, ValueEnum)]
enum Mode {
    Standard,
    Fair,
}

#[derive(Copy, Clone, ValueEnum)]
enum Fair {
    None,
    Dp,
    Eo,
}

#[derive(Copy, Clone, ValueEnum)]
enum Kernel {
    Disadvantaged,
    Literal,
}

#[derive(Subcommand)]
enum Command {
    /// Convert raw MovieLens-1M files into graph tables.
    Load {
        /// Directory with users.dat, movies.dat and ratings.dat.
        #[arg(long, env = DATA_DIR_ENV)]
        dir: PathBuf,
        /// Occupation codes to drop.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_REMOVED_OCCUPATIONS)]
        remove: Vec<u8>,
        #[arg(long)]
        out: PathBuf,
        /// Seed of the cross-validation split written to `splits.tsv`.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate a synthetic graph with a planted gender bias.
    Synth {
        #[arg(long, default_value_t = 200)]
        users: usize,
        #[arg(long, default_value_t = 4)]
        careers: usize,
        #[arg(long, default_value_t = 0.35)]
        g1_fraction: f64,
        #[arg(long, default_value_t = 200)]
        items: usize,
        #[arg(long, default_value_t = 0.8)]
        beta: f64,
        #[arg(long, default_value_t = 20)]
        likes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample meta-path walks.
    SampleWalks {
        /// Directory with nodes.tsv and edges.tsv.
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value = "uiu")]
        metapath: String,
        #[arg(long, value_enum, default_value = "standard")]
        mode: Mode,
        #[arg(long, value_enum, default_value = "disadvantaged")]
        kernel: Kernel,
        #[arg(long, default_value_t = 10)]
        num_walks: usize,
        #[arg(long, default_value_t = 5)]
        walk_length: usize,
        #[arg(long, default_value_t = 1.0)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train skip-gram embeddings on a walk corpus.
    TrainEmbed {
        #[arg(long)]
        walks: PathBuf,
        /// Node table giving each walk token's type.
        #[arg(long)]
        nodes: PathBuf,
        #[arg(long, default_value_t = 128)]
        dim: usize,
        #[arg(long, default_value_t = 5)]
        negatives: usize,
        #[arg(long, default_value_t = 5)]
        window: usize,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        #[arg(long, default_value_t = 0.025)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Remove the group direction from user embeddings.
    Debias {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        node_table: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the GNN career classifier.
    TrainGnn {
        #[arg(long)]
        graph: PathBuf,
        /// Item token file used to build node features.
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Split file; without it every labeled user is trained on.
        #[arg(long)]
        splits: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        fold: usize,
        #[arg(long, value_enum, default_value = "none")]
        fair: Fair,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long, default_value_t = 300)]
        epochs: usize,
        #[arg(long, default_value_t = 30)]
        patience: usize,
        #[arg(long, default_value_t = 128)]
        hidden: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the MLP career ranker on embeddings.
    TrainMlp {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        nodes: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        splits: PathBuf,
        #[arg(long, default_value_t = 0)]
        fold: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank careers for a list of users.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Embeddings (MLP models).
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Node table (MLP models).
        #[arg(long)]
        nodes: Option<PathBuf>,
        /// Graph directory (GNN models).
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Item token file (GNN models).
        #[arg(long)]
        features: Option<PathBuf>,
        /// One user name per line.
        #[arg(long)]
        users: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score a ranking file.
    Evaluate {
        #[arg(long)]
        rankings: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Node table carrying the group labels.
        #[arg(long)]
        groups: PathBuf,
        /// Also report the TPR-denominator variant of the opportunity gap.
        #[arg(long)]
        tpr: bool,
        #[arg(long, default_value = "unknown")]
        method: String,
        #[arg(long, default_value = "")]
        params: String,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Append the report row to this CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every cell of an experiment configuration.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        resume: bool,
    },
    /// Pareto frontiers and threshold tables from report files.
    Report {
        /// Directory of report CSV files, or a single file.
        #[arg(long)]
        reports: PathBuf,
        #[arg(long, default_value = "gnn")]
        baseline_method: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).with_context(|| format!("cannot open {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    File::create(path).map(BufWriter::new).with_context(|| format!("cannot create {}", path.display()))
}

fn read_graph_dir(dir: &Path) -> Result<HinGraph> {
    Ok(formats::read_graph(open(&dir.join("nodes.tsv"))?, open(&dir.join("edges.tsv"))?)?)
}

/// Graph with nodes and groups but no edges, for name and type lookups.
fn read_nodes_only(path: &Path) -> Result<HinGraph> {
    let table = formats::read_node_table(open(path)?)?;
    Ok(formats::graph_from_tables(&table, &[])?)
}

fn read_user_list(path: &Path, g: &HinGraph) -> Result<Vec<NodeId>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| g.node_by_name(l).with_context(|| format!("unknown user {l:?}")))
        .collect()
}

fn print_stats(ds: &fairhin::datasets::Dataset) {
    let g = &ds.graph;
    let roles = Roles::default();
    let t = fairhin::datasets::role_types(g, &roles);
    if let Some(t) = t {
        println!("users\t{}", g.nodes_of_type(t.user).len());
        println!("items\t{}", g.nodes_of_type(t.item).len());
        println!("careers\t{}", g.nodes_of_type(t.career).len());
    }
    for grp in Group::BOTH {
        println!("{}\t{}", g.group_name(grp), g.group_size(grp));
    }
    println!("edges\t{}", g.edges().len());
}

/// `splits.tsv` as a pipeline run with the same seed would draw it.
fn write_split_file(dir: &Path, ds: &fairhin::datasets::Dataset, seed: u64) -> Result<()> {
    let plans = nested_cv_split(&ds.labels, derive_seed(seed, "split", &[]))?;
    let mut w = create(&dir.join("splits.tsv"))?;
    formats::write_splits(&mut w, &ds.graph, &plans)?;
    w.flush()?;
    Ok(())
}

fn report_line(r: &EvalReport) {
    println!("mrr\t{:.6}\ndiff_dp\t{:.6}\ndiff_eo\t{:.6}", r.mrr, r.diff_dp, r.diff_eo);
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Load { dir, remove, out, seed } => {
            let ds = load_movielens(&dir, &MovieLensOptions { removed_occupations: remove })?;
            pipeline::write_dataset(&out, &ds)?;
            write_split_file(&out, &ds, seed)?;
            print_stats(&ds);
        }
        Command::Synth { users, careers, g1_fraction, items, beta, likes, seed, out } => {
            let spec = SyntheticSpec { likes_per_user: likes, ..SyntheticSpec::skewed(users, careers, g1_fraction, items, beta, seed) };
            let ds = generate_synthetic(&spec)?;
            pipeline::write_dataset(&out, &ds)?;
            write_split_file(&out, &ds, seed)?;
            print_stats(&ds);
        }
        Command::SampleWalks { graph, metapath, mode, kernel, num_walks, walk_length, ratio, seed, out } => {
            let g = read_graph_dir(&graph)?;
            let roles = Roles::default();
            let mp = builtin_metapath(g.schema(), &roles, &metapath)?;
            let mode = match mode {
                Mode::Standard => SamplingMode::Standard,
                Mode::Fair => SamplingMode::Fair {
                    career_type: g.schema().type_id(&roles.career).context("graph has no career type")?,
                    ratio,
                    kernel: match kernel {
                        Kernel::Disadvantaged => FairKernel::Disadvantaged,
                        Kernel::Literal => FairKernel::Literal,
                    },
                },
            };
            let walks = generate_walks(&g, &mp, &SamplerConfig { num_walks_per_start: num_walks, walk_length, seed, mode })?;
            let mut w = create(&out)?;
            formats::write_walks(&mut w, &g, &walks)?;
            w.flush()?;
            info!("{} walks written", walks.len());
        }
        Command::TrainEmbed { walks, nodes, dim, negatives, window, epochs, lr, seed, out } => {
            let g = read_nodes_only(&nodes)?;
            let corpus = formats::read_walks(open(&walks)?, &g)?;
            let cfg = SkipGramConfig { dim, negatives, window, epochs, initial_lr: lr, seed, ..SkipGramConfig::default() };
            let model = train_skipgram(&corpus, &g, &cfg)?;
            pipeline::write_embeddings(&out, &g, &model.centers)?;
        }
        Command::Debias { embeddings, node_table, out, seed: _ } => {
            let g = read_nodes_only(&node_table)?;
            let emb = pipeline::read_embeddings(&embeddings, &g)?;
            let fit: Vec<(NodeId, Group)> = emb.ids().iter().filter_map(|&v| g.group(v).map(|x| (v, x))).collect();
            let targets: Vec<NodeId> = fit.iter().map(|f| f.0).collect();
            let (debiased, dir) = debias_all(&emb, &fit, &targets)?;
            if dir.is_none() {
                warn!("group directions coincide; embeddings copied unchanged");
            }
            pipeline::write_embeddings(&out, &g, &debiased)?;
        }
        Command::TrainGnn { graph, features, labels, splits, fold, fair, lambda, lr, epochs, patience, hidden, seed, out } => {
            let g = read_graph_dir(&graph)?;
            let roles = Roles::default();
            let t = fairhin::datasets::role_types(&g, &roles).context("graph lacks user, item or career nodes")?;
            let texts = formats::read_item_texts(open(&features)?, &g)?;
            let labels = formats::read_labels(open(&labels)?, &g)?;
            let careers = g.nodes_of_type(t.career).to_vec();
            let class_of: HashMap<NodeId, usize> = careers.iter().enumerate().map(|(i, c)| (*c, i)).collect();
            let truth: HashMap<NodeId, NodeId> = labels.iter().copied().collect();
            let (train_users, valid_users): (Vec<NodeId>, Vec<NodeId>) = match splits {
                Some(s) => {
                    let plans = formats::read_splits(open(&s)?, &g)?;
                    let p = plans.iter().find(|p| p.fold == fold).with_context(|| format!("no fold {fold} in the split file"))?;
                    (p.embedding_train.iter().chain(&p.predict_train).copied().collect(), p.predict_valid.clone())
                }
                None => (labels.iter().map(|l| l.0).collect(), Vec::new()),
            };
            let labeled = |users: &[NodeId]| -> Result<LabeledNodes> {
                let mut out = LabeledNodes { nodes: Vec::new(), labels: Vec::new(), groups: Vec::new() };
                for &u in users {
                    out.nodes.push(u.index());
                    out.labels.push(class_of[truth.get(&u).with_context(|| format!("{} has no label", g.name(u)))?]);
                    out.groups.push(g.group(u).with_context(|| format!("{} has no group", g.name(u)))?);
                }
                Ok(out)
            };
            let fm = build_features(&g, &texts, t.user, t.item, fairhin::gnn::FEATURE_DIM);
            let input = GnnInput::new(Adjacency::from_hin(&g, &[t.career]), fm.data);
            let fair = match fair {
                Fair::None => FairLossConfig::None,
                Fair::Dp => FairLossConfig::Dp { lambda },
                Fair::Eo => FairLossConfig::Eo { lambda },
            };
            let cfg = GnnTrainConfig { hidden, lr, epochs, patience, activation: Activation::Relu, fair, seed };
            let trained = train_gnn(&input, careers.len(), &labeled(&train_users)?, &labeled(&valid_users)?, &cfg)?;
            info!("kept epoch {} (validation MRR {:?})", trained.best_epoch, trained.best_valid_mrr);
            pipeline::save_gnn(&out, &g, &trained.model, &careers)?;
        }
        Command::TrainMlp { embeddings, nodes, labels, splits, fold, seed, out } => {
            let g = read_nodes_only(&nodes)?;
            let emb = pipeline::read_embeddings(&embeddings, &g)?;
            let labels = formats::read_labels(open(&labels)?, &g)?;
            let truth: HashMap<NodeId, NodeId> = labels.iter().copied().collect();
            let plans = formats::read_splits(open(&splits)?, &g)?;
            let p = plans.iter().find(|p| p.fold == fold).with_context(|| format!("no fold {fold} in the split file"))?;
            let mut careers: Vec<NodeId> = labels.iter().map(|l| l.1).collect();
            careers.sort_unstable();
            careers.dedup();
            let emb = pipeline::fill_missing(emb, &g, careers.iter().copied().chain(p.all()))?;
            let pairs = |users: &[NodeId]| users.iter().map(|u| (*u, truth[u])).collect::<Vec<_>>();
            let cfg = MlpConfig { seed, ..MlpConfig::default() };
            let trained = train_mlp(&emb, &careers, &pairs(&p.predict_train), &pairs(&p.predict_valid), &cfg)?;
            info!("kept epoch {} (validation MRR {:?})", trained.best_epoch, trained.best_valid_mrr);
            pipeline::save_mlp(&out, &g, &trained.ranker)?;
        }
        Command::Predict { model, embeddings, nodes, graph, features, users, out, seed: _ } => {
            let kind = formats::read_model_file(open(&model)?)?.header.kind;
            let rows: Vec<RankingRow> = match kind.as_str() {
                "mlp" => {
                    let (Some(embeddings), Some(nodes)) = (embeddings, nodes) else {
                        bail!("mlp models need --embeddings and --nodes");
                    };
                    let g = read_nodes_only(&nodes)?;
                    let m = pipeline::load_mlp(&model, &g)?;
                    let users = read_user_list(&users, &g)?;
                    let emb: EmbeddingTable = pipeline::read_embeddings(&embeddings, &g)?;
                    let emb = pipeline::fill_missing(emb, &g, m.careers.iter().chain(&users).copied().collect::<Vec<_>>())?;
                    let probs = predict_probs(&m, &emb, &users)?;
                    ranking_rows(&g, &users, &m.careers, &probs)
                }
                "gnn" => {
                    let (Some(graph), Some(features)) = (graph, features) else {
                        bail!("gnn models need --graph and --features");
                    };
                    let g = read_graph_dir(&graph)?;
                    let roles = Roles::default();
                    let t = fairhin::datasets::role_types(&g, &roles).context("graph lacks user, item or career nodes")?;
                    let texts = formats::read_item_texts(open(&features)?, &g)?;
                    let (m, names) = pipeline::load_gnn(&model)?;
                    let careers = names
                        .iter()
                        .map(|n| g.node_by_name(n).with_context(|| format!("unknown career {n:?}")))
                        .collect::<Result<Vec<_>>>()?;
                    let fm = build_features(&g, &texts, t.user, t.item, m.feature_dim());
                    let input = GnnInput::new(Adjacency::from_hin(&g, &[t.career]), fm.data);
                    let users = read_user_list(&users, &g)?;
                    let probs = m.predict(&input, &users.iter().map(|u| u.index()).collect::<Vec<_>>());
                    ranking_rows(&g, &users, &careers, &probs)
                }
                other => bail!("unknown model kind {other:?}"),
            };
            let mut w = create(&out)?;
            formats::write_rankings(&mut w, &rows)?;
            w.flush()?;
        }
        Command::Evaluate { rankings, labels, groups, tpr, method, params, split, seed, out } => {
            let g = read_nodes_only(&groups)?;
            let labels = formats::read_labels(open(&labels)?, &g)?;
            let truth: HashMap<NodeId, NodeId> = labels.iter().copied().collect();
            let rows = formats::read_rankings(open(&rankings)?)?;
            let mut records = Vec::new();
            for (user, careers) in formats::rankings_by_user(&rows)? {
                let u = g.node_by_name(&user).with_context(|| format!("unknown user {user:?}"))?;
                let ranking = careers
                    .iter()
                    .map(|c| g.node_by_name(c).with_context(|| format!("unknown career {c:?}")))
                    .collect::<Result<Vec<_>>>()?;
                records.push(PredictionRecord {
                    user: u,
                    group: g.group(u).with_context(|| format!("{user} has no group"))?,
                    truth: *truth.get(&u).with_context(|| format!("{user} has no label"))?,
                    ranking,
                });
            }
            let r =
                EvalReport { method, params, seed, split, mrr: mrr(&records)?, diff_dp: diff_dp(&records)?, diff_eo: diff_eo(&records)? };
            report_line(&r);
            if tpr {
                println!("diff_eo_tpr\t{:.6}", diff_eo_with(&records, EoDenominator::Truth)?);
            }
            if let Some(out) = out {
                let mut all = if out.exists() { read_reports(open(&out)?)? } else { Vec::new() };
                all.push(r);
                let mut w = create(&out)?;
                write_reports(&mut w, &all)?;
                w.flush()?;
            }
        }
        Command::Sweep { config, seed, out, resume } => {
            let mut cfg = Config::load(&config)?;
            let config_dir = config.parent().map(Path::to_path_buf).unwrap_or_default();
            let data_base = std::env::var_os(DATA_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| config_dir.clone());
            cfg.resolve_paths(&data_base, &config_dir);
            if let Some(s) = seed {
                cfg.experiment.seeds = vec![s];
            }
            if let Some(o) = out {
                cfg.experiment.out_dir = o;
            }
            cfg.experiment.resume |= resume;
            let out = pipeline::run_pipeline(&cfg)?;
            for p in fairhin::eval::mean_points(&out.test) {
                println!("{}\t{}\tmrr {:.4}\tdiff_dp {:.4}\tdiff_eo {:.4}", p.method, p.params, p.mrr, p.diff_dp, p.diff_eo);
            }
        }
        Command::Report { reports, baseline_method, out, seed: _ } => {
            let all = load_report_set(&reports)?;
            std::fs::create_dir_all(&out)?;
            for metric in [FairnessMetric::Dp, FairnessMetric::Eo] {
                let name = metric.name();
                let frontiers = method_frontiers(&all, metric);
                std::fs::write(out.join(format!("pareto_{name}.json")), serde_json::to_string_pretty(&frontiers)?)?;
                let mut text = String::new();
                for (m, pts) in &frontiers {
                    for p in pts {
                        text.push_str(&format!("{m}\t{}\t{:.4}\t{:.4}\n", p.params, p.mrr, p.fairness(metric)));
                    }
                }
                std::fs::write(out.join(format!("pareto_{name}.txt")), text)?;
                let xy: Vec<(f64, f64)> = all.iter().map(|r| (r.mrr, r.fairness(metric))).collect();
                let per_seed: Vec<&EvalReport> = pareto_frontier(&xy).into_iter().map(|i| &all[i]).collect();
                std::fs::write(out.join(format!("pareto_{name}_per_seed.json")), serde_json::to_string_pretty(&per_seed)?)?;
                match gnn_baseline_for_fairness(&all, &baseline_method, metric) {
                    Ok(b) => {
                        let table = threshold_select(&all, metric, b);
                        std::fs::write(out.join(format!("thresholds_{name}.json")), serde_json::to_string_pretty(&table)?)?;
                        std::fs::write(out.join(format!("thresholds_{name}.txt")), table.to_text())?;
                        print!("{}", table.to_text());
                    }
                    Err(e) => bail!("{e}"),
                }
            }
        }
    }
    Ok(())
}

fn ranking_rows(g: &HinGraph, users: &[NodeId], careers: &[NodeId], probs: &ndarray::Array2<f64>) -> Vec<RankingRow> {
    let mut rows = Vec::new();
    for (i, &u) in users.iter().enumerate() {
        for (r, k) in fairhin::eval::ranking_from_probs(probs.row(i)).into_iter().enumerate() {
            rows.push(RankingRow {
                user: g.name(u).to_string(),
                rank: r + 1,
                career: g.name(careers[k]).to_string(),
                probability: probs[[i, k]],
            });
        }
    }
    rows
}

fn load_report_set(path: &Path) -> Result<Vec<EvalReport>> {
    if path.is_file() {
        return Ok(read_reports(open(path)?)?);
    }
    let main = path.join("reports.csv");
    if main.exists() {
        return Ok(read_reports(open(&main)?)?);
    }
    let mut all = Vec::new();
    let mut files: Vec<PathBuf> =
        std::fs::read_dir(path)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.extension().is_some_and(|x| x == "csv")).collect();
    files.sort();
    for f in files {
        all.extend(read_reports(open(&f)?)?);
    }
    if all.is_empty() {
        bail!("no reports found in {}", path.display());
    }
    Ok(all)
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
