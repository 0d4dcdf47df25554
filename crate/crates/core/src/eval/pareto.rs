//! Accuracy/fairness Pareto frontier.

use log::warn;

/// Whether `a` dominates `b`: MRR at least as high, gap at least as low,
/// and strictly better in one of the two.
pub fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 >= b.0 && a.1 <= b.1 && (a.0 > b.0 || a.1 < b.1)
}

/// Indices of the non-dominated `(mrr, fairness_diff)` points, ascending.
/// Exact duplicates are represented by their first occurrence; non-finite
/// points are ignored.
pub fn pareto_frontier(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len())
        .filter(|&i| {
            let ok = points[i].0.is_finite() && points[i].1.is_finite();
            if !ok {
                warn!("pareto frontier ignores non-finite point {:?}", points[i]);
            }
            ok
        })
        .collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (points[a], points[b]);
        pb.0.total_cmp(&pa.0).then(pa.1.total_cmp(&pb.1)).then(a.cmp(&b))
    });
    let mut out = Vec::new();
    let mut best_diff = f64::INFINITY;
    let mut prev: Option<(f64, f64)> = None;
    for i in order {
        let p = points[i];
        if prev == Some(p) {
            continue;
        }
        prev = Some(p);
        if best_diff > p.1 {
            out.push(i);
            best_diff = p.1;
        }
    }
    out.sort_unstable();
    out
}

/// The frontier points themselves, in input order.
pub fn pareto_points(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    pareto_frontier(points).into_iter().map(|i| points[i]).collect()
}
