use serde::{Deserialize, Serialize};

use super::kmeans::{dot, unit, ZERO_OFFSET};
use crate::error::{Error, Result};

/// How the similarity of two clusters is derived from their members.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    /// Cosine between cluster centers (normalized mean of members).
    #[default]
    Centroid,
    /// Most similar member pair.
    Single,
    /// Least similar member pair.
    Complete,
}

struct Group {
    members: Vec<usize>,
    sum: [f64; 3],
}

impl Group {
    fn center(&self) -> [f64; 3] {
        unit(&self.sum).0
    }
}

fn similarity(a: &Group, b: &Group, dirs: &[[f64; 3]], linkage: Linkage) -> f64 {
    match linkage {
        Linkage::Centroid => dot(&a.center(), &b.center()),
        Linkage::Single => pairs(a, b, dirs).fold(f64::NEG_INFINITY, f64::max),
        Linkage::Complete => pairs(a, b, dirs).fold(f64::INFINITY, f64::min),
    }
}

fn pairs<'a>(a: &'a Group, b: &'a Group, dirs: &'a [[f64; 3]]) -> impl Iterator<Item = f64> + 'a {
    a.members
        .iter()
        .flat_map(move |&i| b.members.iter().map(move |&j| dot(&dirs[i], &dirs[j])))
}

/// Agglomerative clustering by cosine similarity down to `target` clusters.
///
/// Starts from singletons and repeatedly merges the most similar pair; on
/// equal similarity the pair with the lexicographically smallest position
/// wins. Clusters are kept ordered by their smallest member, and each
/// returned cluster lists its members in ascending order.
pub fn hierarchical_cluster(vectors: &[[f64; 3]], target: usize, linkage: Linkage) -> Result<Vec<Vec<usize>>> {
    let n = vectors.len();
    if target == 0 || target > n {
        return Err(Error::Input(format!(
            "cannot form {target} clusters from {n} vectors"
        )));
    }
    let dirs: Vec<[f64; 3]> = vectors.iter().map(|v| unit(v).0).collect();
    let mut groups: Vec<Group> = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| Group {
            members: vec![i],
            sum: if v.iter().all(|x| *x == 0.0) {
                [ZERO_OFFSET; 3]
            } else {
                *v
            },
        })
        .collect();

    // sim[i][j] for i < j, indexed by current positions.
    let mut sim: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if j > i { similarity(&groups[i], &groups[j], &dirs, linkage) } else { 0.0 })
                .collect()
        })
        .collect();

    while groups.len() > target {
        let mut best = (0, 1);
        let mut best_sim = f64::NEG_INFINITY;
        for i in 0..groups.len() {
            for j in i + 1..groups.len() {
                if sim[i][j] > best_sim {
                    best_sim = sim[i][j];
                    best = (i, j);
                }
            }
        }
        let (i, j) = best;
        let absorbed = groups.remove(j);
        sim.remove(j);
        for row in sim.iter_mut() {
            row.remove(j);
        }
        let g = &mut groups[i];
        g.members.extend(absorbed.members);
        g.members.sort_unstable();
        for k in 0..3 {
            g.sum[k] += absorbed.sum[k];
        }
        for k in 0..groups.len() {
            if k == i {
                continue;
            }
            let s = similarity(&groups[i.min(k)], &groups[i.max(k)], &dirs, linkage);
            sim[i.min(k)][i.max(k)] = s;
        }
    }
    Ok(groups.into_iter().map(|g| g.members).collect())
}
