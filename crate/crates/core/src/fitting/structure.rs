//! Greedy structure learning from normal-scores correlations.

use nalgebra::DMatrix;

use crate::numeric::special::norm_quantile;
use crate::vine::{Edge, PairObs, UnionFind};

const SCORE_EPS: f64 = 1e-10;

/// Normal scores of pseudo-observations; discrete pairs use the midpoint.
pub fn normal_scores(u: &[PairObs]) -> Vec<f64> {
    u.iter().map(|&(p, m)| norm_quantile((0.5 * (p + m)).clamp(SCORE_EPS, 1.0 - SCORE_EPS))).collect()
}

/// Pearson correlation matrix of the columns of `z` (one vector per variable).
pub fn correlation_matrix(z: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = z.len();
    let centered: Vec<(Vec<f64>, f64)> = z
        .iter()
        .map(|x| {
            let n = x.len() as f64;
            let m = x.iter().sum::<f64>() / n;
            let c: Vec<f64> = x.iter().map(|v| v - m).collect();
            let ss = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            (c, ss)
        })
        .collect();
    let mut r = vec![vec![0.0; d]; d];
    for a in 0..d {
        r[a][a] = 1.0;
        for b in (a + 1)..d {
            let (ca, sa) = &centered[a];
            let (cb, sb) = &centered[b];
            let v = if *sa > 0.0 && *sb > 0.0 {
                (ca.iter().zip(cb).map(|(x, y)| x * y).sum::<f64>() / (sa * sb)).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            r[a][b] = v;
            r[b][a] = v;
        }
    }
    r
}

/// Partial correlation of `a` and `b` given `cond`, from the inverse of the
/// correlation submatrix. Singular submatrices give 0.
pub fn partial_correlation(r: &[Vec<f64>], a: usize, b: usize, cond: &[usize]) -> f64 {
    if cond.is_empty() {
        return r[a][b];
    }
    let idx: Vec<usize> = [a, b].iter().chain(cond).copied().collect();
    let k = idx.len();
    let sub = DMatrix::from_fn(k, k, |i, j| r[idx[i]][idx[j]]);
    match sub.try_inverse() {
        Some(p) if p[(0, 0)] > 0.0 && p[(1, 1)] > 0.0 => (-p[(0, 1)] / (p[(0, 0)] * p[(1, 1)]).sqrt()).clamp(-1.0, 1.0),
        _ => 0.0,
    }
}

fn total_set(e: &Edge) -> Vec<usize> {
    let mut t = e.cond.clone();
    t.push(e.pair.0);
    t.push(e.pair.1);
    t.sort_unstable();
    t
}

fn make_edge(a: usize, b: usize, mut cond: Vec<usize>) -> Edge {
    cond.sort_unstable();
    Edge { pair: (a.min(b), a.max(b)), cond }
}

/// Maximum spanning tree by Kruskal over candidate (weight, node i, node j,
/// edge). Ties go to the candidate with the smallest labels.
fn kruskal(n_nodes: usize, mut cands: Vec<(f64, usize, usize, Edge)>) -> Vec<Edge> {
    cands.sort_by(|x, y| y.0.total_cmp(&x.0).then_with(|| x.3.cmp(&y.3)));
    let mut uf = UnionFind::new(n_nodes);
    let mut out = Vec::with_capacity(n_nodes.saturating_sub(1));
    for (_, i, j, e) in cands {
        if uf.union(i, j) {
            out.push(e);
        }
    }
    out
}

/// Trees of a regular vine on `vars`: tree 1 is the maximum spanning tree
/// under |correlation|, later trees join proximity-feasible nodes by
/// |partial correlation|. All `vars.len() - 1` trees are built.
pub fn greedy_vine(r: &[Vec<f64>], vars: &[usize]) -> Vec<Vec<Edge>> {
    let p = vars.len();
    if p < 2 {
        return Vec::new();
    }
    let mut cands = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            let (a, b) = (vars[i], vars[j]);
            cands.push((r[a][b].abs(), i, j, make_edge(a, b, vec![])));
        }
    }
    let mut levels = vec![kruskal(p, cands)];
    for l in 1..p - 1 {
        let prev = &levels[l - 1];
        let totals: Vec<Vec<usize>> = prev.iter().map(total_set).collect();
        let mut cands = Vec::new();
        for i in 0..prev.len() {
            for j in (i + 1)..prev.len() {
                let common: Vec<usize> = totals[i].iter().copied().filter(|x| totals[j].contains(x)).collect();
                if common.len() != l {
                    continue;
                }
                let a = *totals[i].iter().find(|x| !common.contains(x)).unwrap();
                let b = *totals[j].iter().find(|x| !common.contains(x)).unwrap();
                let w = partial_correlation(r, a, b, &common).abs();
                cands.push((w, i, j, make_edge(a, b, common)));
            }
        }
        levels.push(kruskal(prev.len(), cands));
    }
    levels
}

/// Extend predictor trees by the response `y` as a leaf: at tree 1 it links
/// to the predictor with the largest |correlation|, at tree l to the
/// proximity-feasible node with the largest |partial correlation|.
/// Returns `preds.len()` levels over predictors and response.
pub fn attach_response(pred_levels: &[Vec<Edge>], r: &[Vec<f64>], preds: &[usize], y: usize) -> Vec<Vec<Edge>> {
    let p = preds.len();
    let mut out: Vec<Vec<Edge>> = Vec::with_capacity(p);
    let first = pick_max(preds.iter().map(|&x| (r[x][y].abs(), x)));
    out.push(pred_levels.first().cloned().unwrap_or_default());
    out[0].push(make_edge(first, y, vec![]));
    let mut linked = vec![first];
    for l in 1..p {
        let mut level = pred_levels.get(l).cloned().unwrap_or_default();
        let feasible = pred_levels[l - 1].iter().filter_map(|e| {
            let t = total_set(e);
            if linked.iter().all(|x| t.contains(x)) {
                let k = *t.iter().find(|x| !linked.contains(x)).unwrap();
                Some((partial_correlation(r, y, k, &linked).abs(), k))
            } else {
                None
            }
        });
        let k = pick_max(feasible);
        level.push(make_edge(k, y, linked.clone()));
        linked.push(k);
        out.push(level);
    }
    out
}

/// Largest weight, lowest label on ties.
fn pick_max(it: impl Iterator<Item = (f64, usize)>) -> usize {
    let mut best: Option<(f64, usize)> = None;
    for (w, x) in it {
        if best.is_none_or(|(bw, bx)| w > bw || (w == bw && x < bx)) {
            best = Some((w, x));
        }
    }
    best.expect("at least one feasible node").1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vine::VineArray;

    fn corr(d: usize, pairs: &[((usize, usize), f64)]) -> Vec<Vec<f64>> {
        let mut r = vec![vec![0.0; d]; d];
        for (i, row) in r.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        for &((a, b), v) in pairs {
            r[a][b] = v;
            r[b][a] = v;
        }
        r
    }

    #[test]
    fn first_tree_is_the_maximum_spanning_tree() {
        let r = corr(3, &[((0, 1), 0.9), ((0, 2), -0.8), ((1, 2), 0.1)]);
        let lv = greedy_vine(&r, &[0, 1, 2]);
        let mut t1 = lv[0].clone();
        t1.sort();
        assert_eq!(t1, vec![make_edge(0, 1, vec![]), make_edge(0, 2, vec![])]);
        assert_eq!(lv[1], vec![make_edge(1, 2, vec![0])]);
    }

    #[test]
    fn two_variables_give_one_edge() {
        let r = corr(2, &[((0, 1), 0.3)]);
        assert_eq!(greedy_vine(&r, &[0, 1]), vec![vec![make_edge(0, 1, vec![])]]);
    }

    #[test]
    fn partial_correlation_matches_closed_form() {
        let r = corr(3, &[((0, 1), 0.5), ((0, 2), 0.4), ((1, 2), 0.3)]);
        let want = (0.3 - 0.5 * 0.4) / ((1.0f64 - 0.25) * (1.0 - 0.16)).sqrt();
        assert!((partial_correlation(&r, 1, 2, &[0]) - want).abs() < 1e-14);
    }

    #[test]
    fn response_attachment_worked_example() {
        // variables 1..5 as 0..4, response 6 as 5; T1 = {12, 23, 24, 35}
        let pred_levels = vec![
            vec![make_edge(0, 1, vec![]), make_edge(1, 2, vec![]), make_edge(1, 3, vec![]), make_edge(2, 4, vec![])],
            vec![make_edge(0, 2, vec![1]), make_edge(0, 3, vec![1]), make_edge(1, 4, vec![2])],
            vec![make_edge(2, 3, vec![0, 1]), make_edge(0, 4, vec![1, 2])],
            vec![make_edge(3, 4, vec![0, 1, 2])],
        ];
        // |rho_36| maximal; rho_56;3 larger than rho_26;3 in absolute value
        let r = corr(
            6,
            &[
                ((0, 5), 0.1),
                ((1, 5), 0.3),
                ((2, 5), 0.7),
                ((3, 5), 0.2),
                ((4, 5), 0.6),
                ((1, 2), 0.4),
                ((2, 4), 0.5),
                ((0, 1), 0.3),
                ((1, 3), 0.3),
            ],
        );
        let rp5 = partial_correlation(&r, 5, 4, &[2]).abs();
        let rp2 = partial_correlation(&r, 5, 1, &[2]).abs();
        assert!(rp5 > rp2);
        let lv = attach_response(&pred_levels, &r, &[0, 1, 2, 3, 4], 5);
        assert!(lv[0].contains(&make_edge(2, 5, vec![])));
        assert!(lv[1].contains(&make_edge(4, 5, vec![2])));
        let v = VineArray::from_edge_sets(lv, 2, Some(5)).unwrap();
        assert_eq!(v.order()[5], 5);
        // leaf constraint: the response occurs only in its own column
        let raw = v.to_raw();
        for (j, col) in (0..6).map(|j| (j, (0..j).map(|l| raw[l][j]).collect::<Vec<_>>())) {
            if j < 5 {
                assert!(!col.contains(&6));
            }
        }
    }

    #[test]
    fn single_predictor_attachment() {
        let r = corr(2, &[((0, 1), 0.5)]);
        assert_eq!(attach_response(&[], &r, &[0], 1), vec![vec![make_edge(0, 1, vec![])]]);
    }
}
