use serde::{Deserialize, Serialize};

use super::SearchPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Params,
    Macs,
}

/// Indices of the points not dominated in (error, cost), sorted by cost
/// ascending (ties by error, then index). A point is dominated when another
/// is no worse on both coordinates and strictly better on one.
pub fn pareto_indices(points: &[(f32, u64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .1
            .cmp(&points[b].1)
            .then(points[a].0.total_cmp(&points[b].0))
            .then(a.cmp(&b))
    });
    // sweep by increasing cost; a point survives if its error beats every
    // cheaper point's, or equals the best among points of identical cost
    let mut front = Vec::new();
    let mut best = f32::INFINITY;
    let mut i = 0;
    while i < order.len() {
        let cost = points[order[i]].1;
        let group_best = points[order[i]].0;
        let mut j = i;
        while j < order.len() && points[order[j]].1 == cost {
            let (err, _) = points[order[j]];
            if err == group_best && err < best {
                front.push(order[j]);
            }
            j += 1;
        }
        best = best.min(group_best);
        i = j;
    }
    front
}

pub fn pareto_front(points: &[SearchPoint], axis: Axis) -> Vec<SearchPoint> {
    let keyed: Vec<(f32, u64)> = points
        .iter()
        .map(|p| {
            let cost = match axis {
                Axis::Params => p.params,
                Axis::Macs => p.macs,
            };
            (p.mae, cost)
        })
        .collect();
    pareto_indices(&keyed).into_iter().map(|i| points[i].clone()).collect()
}
