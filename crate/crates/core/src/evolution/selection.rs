use std::cmp::Ordering;

use super::hierarchical::{hierarchical_cluster, Linkage};
use super::Solution;
use crate::error::{Error, Result};
use crate::metrics::{dominates, NormalizationBounds};

/// Weighted sum of min-max normalized objectives. An axis with
/// `nadir == ideal` contributes zero.
pub fn scalar_fitness(objectives: &[f64; 3], bounds: &NormalizationBounds, weights: &[f64; 3]) -> f64 {
    let n = bounds.apply(objectives);
    (0..3).map(|k| weights[k] * n[k]).sum()
}

fn objective_matrix(u: &[Solution]) -> Result<Vec<[f64; 3]>> {
    u.iter().map(Solution::objective_array).collect()
}

/// Sets `fitness` on every member, normalizing over the whole set, and
/// returns the bounds used.
pub fn assign_fitness(u: &mut [Solution], weights: &[f64; 3]) -> Result<NormalizationBounds> {
    let objs = objective_matrix(u)?;
    let bounds = NormalizationBounds::from_points(&objs)
        .ok_or_else(|| Error::Input("cannot assign fitness to an empty set".into()))?;
    for (s, o) in u.iter_mut().zip(&objs) {
        s.fitness = Some(scalar_fitness(o, &bounds, weights));
    }
    Ok(bounds)
}

fn by_fitness_then_id(a: &Solution, b: &Solution) -> Ordering {
    let fa = a.fitness.unwrap_or(f64::INFINITY);
    let fb = b.fitness.unwrap_or(f64::INFINITY);
    fa.total_cmp(&fb).then(a.id.cmp(&b.id))
}

/// Clusters the union into `n` groups by direction in normalized objective
/// space and keeps the lowest-fitness member of each group (ties to the
/// lower id). Survivors come out in cluster order.
pub fn environmental_selection(
    u: &[Solution],
    n: usize,
    linkage: Linkage,
    weights: &[f64; 3],
) -> Result<Vec<Solution>> {
    if n == 0 || n > u.len() {
        return Err(Error::Input(format!(
            "cannot select {n} survivors from {} solutions",
            u.len()
        )));
    }
    let mut scored = u.to_vec();
    let bounds = assign_fitness(&mut scored, weights)?;
    let normalized: Vec<[f64; 3]> = objective_matrix(&scored)?
        .iter()
        .map(|o| bounds.apply(o))
        .collect();
    let clusters = hierarchical_cluster(&normalized, n, linkage)?;
    Ok(clusters
        .iter()
        .map(|members| {
            members
                .iter()
                .map(|&i| &scored[i])
                .min_by(|a, b| by_fitness_then_id(a, b))
                .expect("clusters are non-empty")
                .clone()
        })
        .collect())
}

/// Deb's fast non-dominated sort. Fronts list indices into `points` in
/// ascending order; front 0 is the non-dominated set.
pub fn fast_nondominated_sort(points: &[[f64; 3]]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if dominates(&points[i], &points[j]) {
                dominated_by_me[i].push(j);
            } else if dominates(&points[j], &points[i]) {
                domination_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by_me[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each member of one front; extremes get infinity.
pub fn crowding_distance(points: &[[f64; 3]], front: &[usize]) -> Vec<f64> {
    let m = front.len();
    let mut distance = vec![0.0; m];
    if m <= 2 {
        return vec![f64::INFINITY; m];
    }
    for k in 0..3 {
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| points[front[a]][k].total_cmp(&points[front[b]][k]).then(a.cmp(&b)));
        let lo = points[front[order[0]]][k];
        let hi = points[front[order[m - 1]]][k];
        distance[order[0]] = f64::INFINITY;
        distance[order[m - 1]] = f64::INFINITY;
        let span = hi - lo;
        if span <= 0.0 {
            continue;
        }
        for w in 1..m - 1 {
            let gap = points[front[order[w + 1]]][k] - points[front[order[w - 1]]][k];
            distance[order[w]] += gap / span;
        }
    }
    distance
}

/// Non-domination rank and within-front crowding distance of every point.
pub fn rank_and_crowding(points: &[[f64; 3]]) -> (Vec<usize>, Vec<f64>) {
    let mut rank = vec![0; points.len()];
    let mut crowd = vec![0.0; points.len()];
    for (r, front) in fast_nondominated_sort(points).iter().enumerate() {
        let d = crowding_distance(points, front);
        for (w, &i) in front.iter().enumerate() {
            rank[i] = r;
            crowd[i] = d[w];
        }
    }
    (rank, crowd)
}

/// NSGA-II survival: whole fronts by rank, the boundary front cut by
/// descending crowding distance (ties to the lower id). Fitness is set on
/// the survivors for reporting.
pub fn nsga2_select(u: &[Solution], n: usize, weights: &[f64; 3]) -> Result<Vec<Solution>> {
    if n == 0 || n > u.len() {
        return Err(Error::Input(format!(
            "cannot select {n} survivors from {} solutions",
            u.len()
        )));
    }
    let mut scored = u.to_vec();
    assign_fitness(&mut scored, weights)?;
    let objs = objective_matrix(&scored)?;
    let mut survivors = Vec::with_capacity(n);
    for front in fast_nondominated_sort(&objs) {
        if survivors.len() + front.len() <= n {
            survivors.extend(front.iter().map(|&i| scored[i].clone()));
            if survivors.len() == n {
                break;
            }
            continue;
        }
        let crowd = crowding_distance(&objs, &front);
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| {
            crowd[b]
                .total_cmp(&crowd[a])
                .then(scored[front[a]].id.cmp(&scored[front[b]].id))
        });
        let room = n - survivors.len();
        survivors.extend(order[..room].iter().map(|&w| scored[front[w]].clone()));
        break;
    }
    Ok(survivors)
}
