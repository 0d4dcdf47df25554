//! Acceptance criteria, one test per criterion. Each prints a single
//! `PASS`/`FAIL`/`SKIP` line before asserting.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use fairhin::config::{Config, Method};
use fairhin::datasets::{load_movielens, MovieLensOptions};
use fairhin::embedding::{dot, EmbeddingTable};
use fairhin::eval::{
    diff_dp, diff_eo, dp_terms, mean_points, mrr, pareto_frontier, threshold_select, EvalReport, FairnessMetric, MeanPoint,
    PredictionRecord, Thresholds,
};
use fairhin::gnn::{
    acc_with_grad, dp_with_grad, eo_with_grad, loss_and_grad, loss_dp, objective_with_grad, Activation, Adjacency, FairLossConfig,
    GnnInput, GnnModel, LabeledNodes,
};
use fairhin::hin::{build_graph, EdgeSpec, NodeSpec, ProtectedAttribute, Schema};
use fairhin::metapath::{generate_walks, transition_fair, FairKernel, MetaPath, SamplerConfig, SamplingMode};
use fairhin::predictor::MlpRanker;
use fairhin::projection::{debias, debias_all};
use fairhin::skipgram::{pair_gradient, pair_loss};
use fairhin::{Group, HinGraph, NodeId};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Writes past the test harness's output capture so the line shows up for
/// passing tests too.
fn report(line: &str) {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").unwrap();
    out.flush().unwrap();
}

fn verdict(n: u32, name: &str, ok: bool, detail: &str, elapsed: Duration) -> bool {
    report(&format!("criterion {n} {} {name}: {detail} ({:.1}s)", if ok { "PASS" } else { "FAIL" }, elapsed.as_secs_f64()));
    ok
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// 1. sampler kernel fidelity

/// Users 0-4 (0, 1, 2 in G0; 3, 4 in G1), items 5-7, careers 8-9.
fn ten_node_hin() -> (HinGraph, Vec<(u32, u32)>) {
    let mut s = Schema::new();
    let u = s.add_type("user");
    let i = s.add_type("item");
    let c = s.add_type("career");
    let like = s.add_relation("like", u, i).unwrap();
    let choose = s.add_relation("choose", u, c).unwrap();
    let types = [u, u, u, u, u, i, i, i, c, c];
    let nodes = types.iter().enumerate().map(|(k, &t)| NodeSpec { id: NodeId(k as u32), node_type: t, name: format!("n{k}") }).collect();
    let likes = [(0, 5), (0, 6), (1, 5), (2, 6), (2, 7), (3, 5), (3, 7), (4, 6), (4, 7), (1, 7)];
    let chooses = [(0, 8), (1, 8), (3, 8), (4, 8), (2, 9), (4, 9)];
    let mut edges: Vec<EdgeSpec> = likes.iter().map(|&(a, b)| EdgeSpec { src: NodeId(a), dst: NodeId(b), relation: like }).collect();
    edges.extend(chooses.iter().map(|&(a, b)| EdgeSpec { src: NodeId(a), dst: NodeId(b), relation: choose }));
    let groups = (0..5).map(|k| (NodeId(k), if k < 3 { Group::G0 } else { Group::G1 })).collect();
    let g = build_graph(
        s,
        nodes,
        edges,
        ProtectedAttribute { name: "gender".into(), node_type: u, group_names: ["M".into(), "F".into()], labels: groups },
    )
    .unwrap();
    let all: Vec<(u32, u32)> = likes.iter().chain(&chooses).copied().collect();
    (g, all)
}

/// Uniform over the listed neighbors of `v` that satisfy `is_next`.
fn oracle_uniform(edges: &[(u32, u32)], v: u32, is_next: impl Fn(u32) -> bool) -> BTreeMap<u32, f64> {
    let mut nb: Vec<u32> = edges
        .iter()
        .filter_map(|&(a, b)| {
            if a == v {
                Some(b)
            } else if b == v {
                Some(a)
            } else {
                None
            }
        })
        .collect();
    nb.retain(|&x| is_next(x));
    nb.sort_unstable();
    nb.dedup();
    nb.iter().map(|&x| (x, 1.0 / nb.len() as f64)).collect()
}

/// Hand-normalized group-aware kernel: disadvantaged members weigh
/// `r / n_dis`, advantaged ones `1 / n_adv`.
fn oracle_fair(edges: &[(u32, u32)], v: u32, r: f64, group_of: impl Fn(u32) -> Option<Group>, dis: Group) -> BTreeMap<u32, f64> {
    let users = oracle_uniform(edges, v, |x| group_of(x).is_some());
    let n_dis = users.keys().filter(|&&x| group_of(x) == Some(dis)).count() as f64;
    let n_adv = users.len() as f64 - n_dis;
    let w: BTreeMap<u32, f64> = users.keys().map(|&x| (x, if group_of(x) == Some(dis) { r / n_dis } else { 1.0 / n_adv })).collect();
    let z: f64 = w.values().sum();
    w.into_iter().map(|(x, p)| (x, p / z)).collect()
}

fn tv(empirical: &BTreeMap<u32, usize>, n: usize, exact: &BTreeMap<u32, f64>) -> f64 {
    let keys: std::collections::BTreeSet<u32> = empirical.keys().chain(exact.keys()).copied().collect();
    0.5 * keys.iter().map(|k| (*empirical.get(k).unwrap_or(&0) as f64 / n as f64 - exact.get(k).unwrap_or(&0.0)).abs()).sum::<f64>()
}

#[test]
fn criterion_1_sampler_kernel_fidelity() {
    let t0 = Instant::now();
    let (g, edges) = ten_node_hin();
    let s = g.schema();
    let (u, i, c) = (s.type_id("user").unwrap(), s.type_id("item").unwrap(), s.type_id("career").unwrap());
    let (like, choose) = (s.relation_id("like").unwrap(), s.relation_id("choose").unwrap());
    let type_of = |x: u32| g.node_type(NodeId(x)).unwrap();
    let group_of = |x: u32| g.group(NodeId(x));
    let dis = g.disadvantaged();
    const STEPS: usize = 100_000;
    let mut worst = 0.0f64;
    // (first type, next type, relation, fair ratio)
    let cases = [(u, i, like, None), (u, c, choose, None), (i, u, like, None), (c, u, choose, None), (c, u, choose, Some(3.0))];
    for (k, &(from, to, rel, ratio)) in cases.iter().enumerate() {
        let mp = MetaPath::new(s, "step", vec![from, to], vec![rel]).unwrap();
        let mode = match ratio {
            Some(r) => SamplingMode::Fair { career_type: c, ratio: r, kernel: FairKernel::Disadvantaged },
            None => SamplingMode::Standard,
        };
        let walks =
            generate_walks(&g, &mp, &SamplerConfig { num_walks_per_start: STEPS, walk_length: 1, seed: 17 + k as u64, mode }).unwrap();
        let mut counts: BTreeMap<u32, BTreeMap<u32, usize>> = BTreeMap::new();
        for w in &walks {
            *counts.entry(w[0].0).or_default().entry(w[1].0).or_default() += 1;
        }
        for &v in g.nodes_of_type(from) {
            let exact = match ratio {
                Some(r) => oracle_fair(&edges, v.0, r, group_of, dis),
                None => oracle_uniform(&edges, v.0, |x| type_of(x) == to),
            };
            let emp = counts.remove(&v.0).unwrap_or_default();
            let n: usize = emp.values().sum();
            if exact.is_empty() {
                assert_eq!(n, 0);
                continue;
            }
            assert_eq!(n, STEPS, "node {v} sampled {n} steps");
            worst = worst.max(tv(&emp, n, &exact));
        }
    }
    let elapsed = t0.elapsed();
    let ok = worst <= 0.01 && elapsed < Duration::from_secs(10);
    assert!(verdict(1, "sampler kernel fidelity", ok, &format!("max TV distance {worst:.4} (tol 0.01)"), elapsed));
}

// ---------------------------------------------------------------------------
// 2. group-parity point

/// A star of `n0 + n1` users (G0 then G1) around one career, with `extra`
/// further G0 users elsewhere so that G0 is the advantaged group.
fn career_star(n0: usize, n1: usize, extra: usize) -> (HinGraph, NodeId) {
    let mut s = Schema::new();
    let u = s.add_type("user");
    let c = s.add_type("career");
    let choose = s.add_relation("choose", u, c).unwrap();
    let users = n0 + n1 + extra;
    let mut nodes: Vec<NodeSpec> = (0..users).map(|k| NodeSpec { id: NodeId(k as u32), node_type: u, name: format!("u{k}") }).collect();
    let career = NodeId(users as u32);
    nodes.push(NodeSpec { id: career, node_type: c, name: "c".into() });
    let edges = (0..n0 + n1).map(|k| EdgeSpec { src: NodeId(k as u32), dst: career, relation: choose }).collect();
    let labels = (0..users).map(|k| (NodeId(k as u32), if k < n0 || k >= n0 + n1 { Group::G0 } else { Group::G1 })).collect();
    let g =
        build_graph(s, nodes, edges, ProtectedAttribute { name: "g".into(), node_type: u, group_names: ["a".into(), "b".into()], labels })
            .unwrap();
    (g, career)
}

#[test]
fn criterion_2_group_parity_point() {
    let t0 = Instant::now();
    let mut r = rng(2);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for _ in 0..200 {
        let n0 = r.gen_range(1..30);
        let n1 = r.gen_range(1..30);
        let (g, career) = career_star(n0, n1, n1 + 1);
        let ct = g.node_type(career).unwrap();
        let dis = g.disadvantaged();
        for ratio in 1..=10 {
            let t = transition_fair(&g, career, ct, ratio as f64, FairKernel::Disadvantaged).unwrap();
            let mass_dis: f64 = t.0.iter().filter(|(v, _)| g.group(*v) == Some(dis)).map(|(_, p)| p).sum();
            let mass_adv: f64 = t.0.iter().filter(|(v, _)| g.group(*v) == Some(dis.other())).map(|(_, p)| p).sum();
            let want = ratio as f64 / (1.0 + ratio as f64);
            worst = worst.max((mass_dis - want).abs()).max((mass_adv - (1.0 - want)).abs());
            if ratio == 1 {
                worst = worst.max((mass_dis - 0.5).abs()).max((mass_adv - 0.5).abs());
            }
            cases += 1;
        }
    }
    let ok = worst <= 1e-12;
    assert!(verdict(2, "group-parity point", ok, &format!("{cases} neighborhoods, max deviation {worst:.2e} (tol 1e-12)"), t0.elapsed()));
}

// ---------------------------------------------------------------------------
// 3. projection correctness

#[test]
fn criterion_3_projection_correctness() {
    let t0 = Instant::now();
    let d = 16;
    let mut r = rng(3);
    let gauss = |r: &mut ChaCha8Rng| -> Vec<f64> { (0..d).map(|_| r.gen_range(-1.0..1.0)).collect() };

    // random embeddings
    let n = 1000;
    let rows: Vec<(NodeId, Vec<f64>)> = (0..n).map(|k| (NodeId(k as u32), gauss(&mut r))).collect();
    let emb = EmbeddingTable::from_rows(d, rows.clone()).unwrap();
    let fit: Vec<(NodeId, Group)> = (0..n).map(|k| (NodeId(k as u32), if r.gen_bool(0.4) { Group::G1 } else { Group::G0 })).collect();
    let ids: Vec<NodeId> = fit.iter().map(|f| f.0).collect();
    let (out, vb) = debias_all(&emb, &fit, &ids).unwrap();
    let vb = vb.expect("groups differ");
    let max_dot = ids.iter().map(|&v| dot(out.get(v).unwrap(), vb.as_slice()).abs()).fold(0.0, f64::max);
    let mut max_idem = 0.0f64;
    let mut max_lin = 0.0f64;
    for k in 0..n {
        let e = out.get(NodeId(k as u32)).unwrap();
        let again = debias(e, &vb).unwrap();
        max_idem = max_idem.max(again.iter().zip(e).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        let x = &rows[k].1;
        let y = &rows[(k + 1) % n].1;
        let (a, b) = (r.gen_range(-3.0..3.0), r.gen_range(-3.0..3.0));
        let mix: Vec<f64> = x.iter().zip(y).map(|(p, q)| a * p + b * q).collect();
        let lhs = debias(&mix, &vb).unwrap();
        let (px, py) = (debias(x, &vb).unwrap(), debias(y, &vb).unwrap());
        max_lin = max_lin.max(lhs.iter().zip(px.iter().zip(&py)).map(|(l, (p, q))| (l - (a * p + b * q)).abs()).fold(0.0, f64::max));
    }

    // planted offset: users = base ± δ·dir ± symmetric noise, base ⊥ dir
    let mut dir = vec![0.0; d];
    dir[0] = 1.0;
    let mut base = gauss(&mut r);
    base[0] = 0.0;
    let mut planted = Vec::new();
    let mut groups = Vec::new();
    for k in 0..250 {
        let grp = if k % 2 == 0 { Group::G0 } else { Group::G1 };
        let sign = if grp == Group::G0 { 1.5 } else { -1.5 };
        let noise = gauss(&mut r);
        for s in [1.0, -1.0] {
            let v: Vec<f64> = (0..d).map(|j| base[j] + sign * dir[j] + s * noise[j]).collect();
            let id = NodeId(planted.len() as u32);
            planted.push((id, v));
            groups.push((id, grp));
        }
    }
    let pe = EmbeddingTable::from_rows(d, planted.clone()).unwrap();
    let pids: Vec<NodeId> = groups.iter().map(|g| g.0).collect();
    let (pout, _) = debias_all(&pe, &groups, &pids).unwrap();
    let mean_along = |grp: Group| {
        let m: Vec<f64> = groups.iter().filter(|g| g.1 == grp).map(|g| dot(pout.get(g.0).unwrap(), &dir)).collect();
        m.iter().sum::<f64>() / m.len() as f64
    };
    let collapse = (mean_along(Group::G0) - mean_along(Group::G1)).abs();

    let ok = max_dot <= 1e-9 && max_idem <= 1e-9 && max_lin <= 1e-9 && collapse <= 1e-6;
    let detail = format!("max |<e',v_b>| {max_dot:.1e}, idempotence {max_idem:.1e}, linearity {max_lin:.1e}, planted gap {collapse:.1e}");
    assert!(verdict(3, "projection correctness", ok, &detail, t0.elapsed()));
}

// ---------------------------------------------------------------------------
// 4. gradient checks

const H: f64 = 1e-6;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn random_probs(r: &mut ChaCha8Rng, n: usize, k: usize) -> Array2<f64> {
    let mut p = Array2::from_shape_fn((n, k), |_| r.gen_range(0.05..1.0));
    for mut row in p.rows_mut() {
        let s = row.sum();
        row /= s;
    }
    p
}

fn random_groups(r: &mut ChaCha8Rng, n: usize) -> Vec<Group> {
    let mut g: Vec<Group> = (0..n).map(|_| if r.gen_bool(0.5) { Group::G0 } else { Group::G1 }).collect();
    g[0] = Group::G0;
    g[1] = Group::G1;
    g
}

/// Max relative error of `grad` against central differences of `f` at `x`.
fn check_matrix(x: &Array2<f64>, grad: &Array2<f64>, f: impl Fn(&Array2<f64>) -> f64) -> f64 {
    let mut worst = 0.0f64;
    for idx in 0..x.len() {
        let (i, j) = (idx / x.ncols(), idx % x.ncols());
        let mut xp = x.clone();
        xp[[i, j]] += H;
        let mut xm = x.clone();
        xm[[i, j]] -= H;
        let num = (f(&xp) - f(&xm)) / (2.0 * H);
        worst = worst.max(rel_err(grad[[i, j]], num));
    }
    worst
}

fn check_loss_grads(r: &mut ChaCha8Rng) -> BTreeMap<&'static str, f64> {
    let mut worst: BTreeMap<&'static str, f64> = BTreeMap::new();
    for _ in 0..20 {
        let (n, k) = (r.gen_range(4..12), r.gen_range(2..5));
        let p = random_probs(r, n, k);
        let groups = random_groups(r, n);
        let mut labels: Vec<usize> = (0..n).map(|_| r.gen_range(0..k)).collect();
        // at least one class with both groups represented
        labels[0] = 0;
        labels[1] = 0;
        let lam = r.gen_range(1.0..100.0);
        let (_, g) = acc_with_grad(p.view(), &labels);
        let e = check_matrix(&p, &g, |x| acc_with_grad(x.view(), &labels).0);
        worst.entry("L_acc").and_modify(|w| *w = w.max(e)).or_insert(e);
        let (_, g) = dp_with_grad(p.view(), &groups).unwrap();
        let e = check_matrix(&p, &g, |x| dp_with_grad(x.view(), &groups).unwrap().0);
        worst.entry("L_dp").and_modify(|w| *w = w.max(e)).or_insert(e);
        let (_, g) = eo_with_grad(p.view(), &groups, &labels);
        let e = check_matrix(&p, &g, |x| eo_with_grad(x.view(), &groups, &labels).0);
        worst.entry("L_eo").and_modify(|w| *w = w.max(e)).or_insert(e);
        for (name, fair) in [("L_acc+λ·L_dp", FairLossConfig::Dp { lambda: lam }), ("L_acc+λ·L_eo", FairLossConfig::Eo { lambda: lam })]
        {
            let (_, g) = objective_with_grad(p.view(), &labels, &groups, &fair).unwrap();
            let e = check_matrix(&p, &g, |x| objective_with_grad(x.view(), &labels, &groups, &fair).unwrap().0);
            worst.entry(name).and_modify(|w| *w = w.max(e)).or_insert(e);
        }
    }
    worst
}

fn check_gnn_params(r: &mut ChaCha8Rng) -> f64 {
    let mut worst = 0.0f64;
    for inst in 0..20 {
        let (n, f, k) = (r.gen_range(6..10), 3, 3);
        let lists: Vec<Vec<usize>> = (0..n).map(|v| vec![(v + 1) % n, (v + n - 1) % n]).collect();
        let x = Array2::from_shape_fn((n, f), |_| r.gen_range(-1.0..1.0));
        let input = GnnInput::new(Adjacency::from_lists(&lists), x);
        let model = GnnModel::init(f, 4, k, Activation::Tanh, inst);
        let groups = random_groups(r, n);
        let mut labels: Vec<usize> = (0..n).map(|_| r.gen_range(0..k)).collect();
        labels[0] = 0;
        labels[1] = 0;
        let set = LabeledNodes { nodes: (0..n).collect(), labels, groups };
        let fair = match inst % 3 {
            0 => FairLossConfig::None,
            1 => FairLossConfig::Dp { lambda: 10.0 },
            _ => FairLossConfig::Eo { lambda: 10.0 },
        };
        let (_, grad) = loss_and_grad(&model, &input, &set, &fair).unwrap();
        let analytic: Vec<Vec<f64>> = grad.tensors().into_iter().map(<[f64]>::to_vec).collect();
        for (t, a) in analytic.iter().enumerate() {
            for (j, &aj) in a.iter().enumerate() {
                let eval = |delta: f64| {
                    let mut m = model.clone();
                    m.tensors_mut()[t][j] += delta;
                    loss_and_grad(&m, &input, &set, &fair).unwrap().0
                };
                let num = (eval(H) - eval(-H)) / (2.0 * H);
                worst = worst.max(rel_err(aj, num));
            }
        }
    }
    worst
}

fn check_skipgram(r: &mut ChaCha8Rng) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let d = r.gen_range(3..9);
        let v = |r: &mut ChaCha8Rng| -> Vec<f64> { (0..d).map(|_| r.gen_range(-1.0..1.0)).collect() };
        let center = v(r);
        let context = v(r);
        let negs: Vec<Vec<f64>> = (0..5).map(|_| v(r)).collect();
        let neg_refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
        let (_, g) = pair_gradient(&center, &context, &neg_refs);
        // flatten all inputs into one parameter vector
        let mut params: Vec<Vec<f64>> = vec![center.clone(), context.clone()];
        params.extend(negs.iter().cloned());
        let mut analytic: Vec<Vec<f64>> = vec![g.center, g.context];
        analytic.extend(g.negatives);
        for (t, a) in analytic.iter().enumerate() {
            for j in 0..d {
                let eval = |delta: f64| {
                    let mut p = params.clone();
                    p[t][j] += delta;
                    let refs: Vec<&[f64]> = p[2..].iter().map(Vec::as_slice).collect();
                    pair_loss(&p[0], &p[1], &refs)
                };
                worst = worst.max(rel_err(a[j], (eval(H) - eval(-H)) / (2.0 * H)));
            }
        }
    }
    worst
}

fn check_mlp(r: &mut ChaCha8Rng) -> f64 {
    let mut worst = 0.0f64;
    for inst in 0..20 {
        let (d, k, n) = (r.gen_range(2..6), r.gen_range(2..5), r.gen_range(3..8));
        let careers: Vec<NodeId> = (0..k).map(|c| NodeId(100 + c as u32)).collect();
        let m = MlpRanker::init(&careers, d, 5, inst);
        let users = Array2::from_shape_fn((n, d), |_| r.gen_range(-1.0..1.0));
        let cm = Array2::from_shape_fn((k, d), |_| r.gen_range(-1.0..1.0));
        let labels: Vec<usize> = (0..n).map(|_| r.gen_range(0..k)).collect();
        let (_, grad) = m.loss_and_grad(&users, &cm, &labels);
        let analytic: Vec<Vec<f64>> = grad.tensors().into_iter().map(<[f64]>::to_vec).collect();
        for (t, a) in analytic.iter().enumerate() {
            for (j, &aj) in a.iter().enumerate() {
                let eval = |delta: f64| {
                    let mut mm = m.clone();
                    mm.tensors_mut()[t][j] += delta;
                    mm.loss(&users, &cm, &labels)
                };
                worst = worst.max(rel_err(aj, (eval(H) - eval(-H)) / (2.0 * H)));
            }
        }
    }
    worst
}

#[test]
fn criterion_4_gradient_checks() {
    let t0 = Instant::now();
    let mut r = rng(4);
    let mut worst = check_loss_grads(&mut r);
    worst.insert("GNN parameters", check_gnn_params(&mut r));
    worst.insert("skip-gram pair", check_skipgram(&mut r));
    worst.insert("MLP", check_mlp(&mut r));
    let max = worst.values().copied().fold(0.0, f64::max);
    let elapsed = t0.elapsed();
    let ok = max <= 1e-4 && elapsed < Duration::from_secs(60);
    let detail = worst.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect::<Vec<_>>().join(", ");
    assert!(verdict(4, "gradient checks", ok, &format!("max rel. error {detail} (tol 1e-4, 20 instances each)"), elapsed));
}

// ---------------------------------------------------------------------------
// 5. counting/soft bridge

#[test]
fn criterion_5_counting_soft_bridge() {
    let t0 = Instant::now();
    let mut r = rng(5);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (n, k) = (r.gen_range(2..40), r.gen_range(1..7));
        let groups = random_groups(&mut r, n);
        let top: Vec<usize> = (0..n).map(|_| r.gen_range(0..k)).collect();
        let mut probs = Array2::zeros((n, k));
        let mut records = Vec::with_capacity(n);
        for (i, &t) in top.iter().enumerate() {
            probs[[i, t]] = 1.0;
            let mut ranking: Vec<NodeId> = (0..k).map(|c| NodeId(c as u32)).collect();
            ranking.swap(0, t);
            records.push(PredictionRecord { user: NodeId(1000 + i as u32), group: groups[i], truth: NodeId(0), ranking });
        }
        let soft = loss_dp(probs.view(), &groups).unwrap();
        let counting: f64 = dp_terms(&records).unwrap().values().map(|d| d * d).sum();
        worst = worst.max((soft - counting).abs());
    }
    let ok = worst <= 1e-12;
    assert!(verdict(
        5,
        "counting/soft bridge",
        ok,
        &format!("100 record sets, max |loss_dp - Σd_k²| {worst:.1e} (tol 1e-12)"),
        t0.elapsed()
    ));
}

// ---------------------------------------------------------------------------
// 6. metric oracles

fn random_records(r: &mut ChaCha8Rng) -> Vec<PredictionRecord> {
    let n = r.gen_range(2..60);
    let k = r.gen_range(1..8);
    let groups = random_groups(r, n);
    (0..n)
        .map(|i| {
            let mut ranking: Vec<NodeId> = (0..k).map(|c| NodeId(c as u32)).collect();
            ranking.shuffle(r);
            PredictionRecord { user: NodeId(100 + i as u32), group: groups[i], truth: NodeId(r.gen_range(0..k) as u32), ranking }
        })
        .collect()
}

fn oracle_mrr(recs: &[PredictionRecord]) -> f64 {
    let mut s = 0.0;
    for r in recs {
        let pos = r.ranking.iter().position(|&c| c == r.truth).unwrap();
        s += 1.0 / (pos + 1) as f64;
    }
    s / recs.len() as f64
}

/// Exact rational `Σ_k |c0_k n1 - c1_k n0| / (n0 n1)`.
fn oracle_dp(recs: &[PredictionRecord]) -> f64 {
    let mut n = [0i64; 2];
    let mut c: HashMap<NodeId, [i64; 2]> = HashMap::new();
    for r in recs {
        n[r.group.index()] += 1;
        c.entry(r.ranking[0]).or_default()[r.group.index()] += 1;
    }
    let num: i64 = c.values().map(|x| (x[0] * n[1] - x[1] * n[0]).abs()).sum();
    num as f64 / (n[0] * n[1]) as f64
}

/// `Σ_k |correct_k^0 / pred_k^0 - correct_k^1 / pred_k^1|` over classes
/// predicted in both groups, each term as an exact fraction.
fn oracle_eo(recs: &[PredictionRecord]) -> f64 {
    let mut pred: HashMap<NodeId, [i64; 2]> = HashMap::new();
    let mut correct: HashMap<NodeId, [i64; 2]> = HashMap::new();
    for r in recs {
        let g = r.group.index();
        pred.entry(r.ranking[0]).or_default()[g] += 1;
        if r.ranking[0] == r.truth {
            correct.entry(r.ranking[0]).or_default()[g] += 1;
        }
    }
    let mut keys: Vec<&NodeId> = pred.keys().collect();
    keys.sort();
    keys.into_iter()
        .filter(|k| pred[k][0] > 0 && pred[k][1] > 0)
        .map(|k| {
            let p = pred[k];
            let c = correct.get(k).copied().unwrap_or_default();
            (c[0] * p[1] - c[1] * p[0]).abs() as f64 / (p[0] * p[1]) as f64
        })
        .sum()
}

fn oracle_frontier(pts: &[(f64, f64)]) -> Vec<usize> {
    let mut keep = Vec::new();
    for (i, a) in pts.iter().enumerate() {
        let dominated = pts.iter().any(|b| b.0 >= a.0 && b.1 <= a.1 && (b.0 > a.0 || b.1 < a.1));
        let earlier_duplicate = pts[..i].iter().any(|b| b == a);
        if !dominated && !earlier_duplicate {
            keep.push(i);
        }
    }
    keep
}

#[test]
fn criterion_6_metric_oracles() {
    let t0 = Instant::now();
    let mut r = rng(6);
    let mut worst = [0.0f64; 3];
    let mut frontier_mismatch = 0;
    for trial in 0..1000 {
        let recs = random_records(&mut r);
        worst[0] = worst[0].max((mrr(&recs).unwrap() - oracle_mrr(&recs)).abs());
        worst[1] = worst[1].max((diff_dp(&recs).unwrap() - oracle_dp(&recs)).abs());
        worst[2] = worst[2].max((diff_eo(&recs).unwrap() - oracle_eo(&recs)).abs());
        let n = if trial % 100 == 0 { 1000 } else { r.gen_range(1..60) };
        // a coarse grid makes ties and duplicates common
        let pts: Vec<(f64, f64)> = (0..n).map(|_| (r.gen_range(0..20) as f64 / 20.0, r.gen_range(0..20) as f64 / 10.0)).collect();
        if pareto_frontier(&pts) != oracle_frontier(&pts) {
            frontier_mismatch += 1;
        }
    }
    // metric values are compared against exact rationals, so the only
    // admissible gap is floating-point rounding
    let ok = worst.iter().all(|&w| w <= 1e-12) && frontier_mismatch == 0;
    let detail = format!(
        "1000 inputs; max gap mrr {:.1e}, diff_dp {:.1e}, diff_eo {:.1e}; frontier mismatches {frontier_mismatch}",
        worst[0], worst[1], worst[2]
    );
    assert!(verdict(6, "metric oracles", ok, &detail, t0.elapsed()));
}

// ---------------------------------------------------------------------------
// 7. end-to-end debiasing direction

fn mean_by_params<'a>(points: &'a [MeanPoint], method: &str) -> Vec<&'a MeanPoint> {
    points.iter().filter(|p| p.method == method).collect()
}

fn param_f64(p: &MeanPoint, key: &str) -> f64 {
    fairhin::eval::param_value(&p.params, key).unwrap().parse().unwrap()
}

#[test]
fn criterion_7_end_to_end_debiasing() {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = Config::default();
    cfg.experiment.methods = vec![Method::M2v, Method::M2vProj, Method::M2vFair, Method::GnnDp];
    cfg.experiment.seeds = (0..5).collect();
    cfg.experiment.out_dir = dir.path().to_path_buf();
    cfg.grid.lambda_dp = (0..=10).map(|k| 10.0 * k as f64).collect();
    cfg.grid.ratio = (1..=10).map(f64::from).collect();
    let out = fairhin::pipeline::run_pipeline(&cfg).unwrap();
    assert_eq!(out.test.len(), (1 + 1 + 10 + 11) * 5 * 3);
    let valid = mean_points(&out.valid);
    let test = mean_points(&out.test);
    let find = |pts: &[MeanPoint], method: &str, key: &str, v: f64| -> MeanPoint {
        mean_by_params(pts, method).into_iter().find(|p| param_f64(p, key) == v).unwrap().clone()
    };

    // (a) λ chosen on validation: lowest diff_dp among λ > 0 keeping ≥ 70% of the λ = 0 MRR
    let v0 = find(&valid, "gnn-dp", "lambda", 0.0);
    let best_lambda = mean_by_params(&valid, "gnn-dp")
        .into_iter()
        .filter(|p| param_f64(p, "lambda") > 0.0 && p.mrr >= 0.7 * v0.mrr)
        .min_by(|a, b| a.diff_dp.total_cmp(&b.diff_dp))
        .map(|p| param_f64(p, "lambda"))
        .unwrap_or(10.0);
    let t_base = find(&test, "gnn-dp", "lambda", 0.0);
    let t_best = find(&test, "gnn-dp", "lambda", best_lambda);
    let reduction = 1.0 - t_best.diff_dp / t_base.diff_dp;
    let degradation = 1.0 - t_best.mrr / t_base.mrr;
    let ok_a = reduction >= 0.5 && degradation <= 0.3;

    // (b) r chosen on validation by lowest diff_dp
    let best_r = mean_by_params(&valid, "m2v+fair")
        .into_iter()
        .filter(|p| param_f64(p, "ratio") >= 2.0)
        .min_by(|a, b| a.diff_dp.total_cmp(&b.diff_dp))
        .map(|p| param_f64(p, "ratio"))
        .unwrap();
    let r1 = find(&test, "m2v+fair", "ratio", 1.0);
    let rb = find(&test, "m2v+fair", "ratio", best_r);
    let ok_b = rb.diff_dp < r1.diff_dp;

    // (c)
    let m2v = &mean_by_params(&test, "m2v")[0];
    let proj = &mean_by_params(&test, "m2v+proj")[0];
    let ok_c = proj.diff_dp < m2v.diff_dp;

    let elapsed = t0.elapsed();
    let ok = ok_a && ok_b && ok_c && elapsed < Duration::from_secs(20 * 60);
    let detail = format!(
        "(a) λ={best_lambda}: test diff_dp {:.3} -> {:.3} ({:.0}% lower), MRR {:.3} -> {:.3} ({:.0}% lower); \
         (b) r={best_r}: diff_dp {:.3} vs r=1 {:.3}; (c) proj diff_dp {:.3} vs m2v {:.3}",
        t_base.diff_dp,
        t_best.diff_dp,
        100.0 * reduction,
        t_base.mrr,
        t_best.mrr,
        100.0 * degradation,
        rb.diff_dp,
        r1.diff_dp,
        proj.diff_dp,
        m2v.diff_dp
    );
    assert!(verdict(7, "end-to-end debiasing direction", ok, &detail, elapsed));
}

// ---------------------------------------------------------------------------
// 8. MovieLens-1M sanity

fn movielens_dir() -> Option<PathBuf> {
    let candidates = [
        std::env::var_os("FAIRHIN_MOVIELENS_DIR").map(PathBuf::from),
        std::env::var_os("FAIRHIN_DATA_DIR").map(|d| PathBuf::from(d).join("ml-1m")),
    ];
    candidates.into_iter().flatten().find(|d| d.join("ratings.dat").exists())
}

#[test]
fn criterion_8_movielens_sanity() {
    let t0 = Instant::now();
    let Some(dir) = movielens_dir() else {
        report("criterion 8 SKIP MovieLens-1M sanity: dataset not present (set FAIRHIN_MOVIELENS_DIR)");
        return;
    };
    let ds = load_movielens(&dir, &MovieLensOptions::default()).unwrap();
    let g = &ds.graph;
    let s = g.schema();
    let count = |t: &str| g.nodes_of_type(s.type_id(t).unwrap()).len();
    let table = [count("user"), count("item"), count("career"), g.group_size(Group::G0), g.group_size(Group::G1)];
    let ok_table = table == [4920, 3677, 14, 3558, 1362];

    let out_dir = tempfile::tempdir().unwrap();
    let mut cfg = Config::default();
    cfg.data.source = fairhin::config::DataSource::Movielens;
    cfg.data.dir = Some(dir);
    cfg.experiment.methods = vec![Method::M2v, Method::Gnn];
    cfg.experiment.seeds = vec![0];
    cfg.experiment.out_dir = out_dir.path().to_path_buf();
    let out = fairhin::pipeline::run_pipeline(&cfg).unwrap();
    let pts = mean_points(&out.test);
    let m2v = mean_by_params(&pts, "m2v")[0].mrr;
    let gnn = mean_by_params(&pts, "gnn")[0].mrr;
    let in_band = |x: f64| (0.30..=0.45).contains(&x);
    let elapsed = t0.elapsed();
    let ok = ok_table && in_band(m2v) && in_band(gnn) && elapsed < Duration::from_secs(30 * 60);
    let detail = format!(
        "users/items/careers/M/F {table:?} (want [4920, 3677, 14, 3558, 1362]); test MRR m2v {m2v:.4}, gnn {gnn:.4} (band 0.30-0.45)"
    );
    assert!(verdict(8, "MovieLens-1M sanity", ok, &detail, elapsed));
}

// ---------------------------------------------------------------------------
// 9. threshold protocol

fn rep(method: &str, params: &str, seed: u64, mrr: f64, dp: f64) -> EvalReport {
    EvalReport { method: method.into(), params: params.into(), seed, split: "fold0/test".into(), mrr, diff_dp: dp, diff_eo: dp }
}

#[test]
fn criterion_9_threshold_protocol() {
    let t0 = Instant::now();
    let mut reports = Vec::new();
    for seed in 0..5 {
        // plain GNN: mean diff 0.4
        reports.push(rep("gnn", "lambda=0", seed, 0.40, 0.35 + 0.025 * seed as f64));
        // qualifies everywhere; the best cell differs per threshold
        reports.push(rep("all", "a", seed, 0.38, 0.39));
        reports.push(rep("all", "b", seed, 0.36, 0.29));
        reports.push(rep("all", "c", seed, 0.30 + 0.01 * seed as f64, 0.15));
        // qualifies under LF only
        reports.push(rep("lf-only", "x", seed, 0.37, 0.38));
        // never qualifies
        reports.push(rep("none", "y", seed, 0.41, 0.9));
    }
    let baseline = fairhin::eval::gnn_baseline_for_fairness(&reports, "gnn", FairnessMetric::Dp).unwrap();
    let table = threshold_select(&reports, FairnessMetric::Dp, baseline);
    let row = |m: &str| table.rows.iter().find(|r| r.method == m).unwrap().cells;
    let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() < 1e-12,
        (None, None) => true,
        _ => false,
    };
    let t = Thresholds::from_baseline(baseline);
    let ok_thresholds =
        (baseline - 0.4).abs() < 1e-12 && (t.lf - 0.4).abs() < 1e-12 && (t.mf - 0.3).abs() < 1e-12 && (t.hf - 0.2).abs() < 1e-12;
    let all = row("all");
    let ok_all = close(all[0], Some(0.38)) && close(all[1], Some(0.36)) && close(all[2], Some(0.32));
    let lf = row("lf-only");
    let ok_lf = close(lf[0], Some(0.37)) && lf[1].is_none() && lf[2].is_none();
    let ok_none = row("none") == [None, None, None];
    let text = table.to_text();
    let ok_text = text.lines().any(|l| l.starts_with("none") && l.matches("--").count() == 3);
    let ok = ok_thresholds && ok_all && ok_lf && ok_none && ok_text;
    let detail = format!("baseline {baseline:.3}, thresholds {:.3}/{:.3}/{:.3}; rows all {all:?}, lf-only {lf:?}", t.lf, t.mf, t.hf);
    assert!(verdict(9, "threshold protocol", ok, &detail, t0.elapsed()));
}
