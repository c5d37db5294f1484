use rand::Rng;

use super::{ClusterSet, GeneBounds, IdSource, Population, Solution};
use crate::error::{Error, Result};

/// SBX spread factor for a uniform draw `u`.
fn spread(u: f64, eta: f64) -> f64 {
    let exp = 1.0 / (eta + 1.0);
    if u <= 0.5 {
        (2.0 * u).powf(exp)
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(exp)
    }
}

/// Unclamped SBX children of one gene pair for a given draw `u`.
pub fn sbx_children(p1: f64, p2: f64, u: f64, eta: f64) -> (f64, f64) {
    let beta = spread(u, eta);
    let mid = p1 + p2;
    (0.5 * (mid - beta * (p2 - p1)), 0.5 * (mid + beta * (p2 - p1)))
}

/// Simulated binary crossover, gene by gene with probability `pc`,
/// children clamped to bounds.
pub fn sbx_crossover<R: Rng + ?Sized>(
    p1: &[f64; 3],
    p2: &[f64; 3],
    pc: f64,
    eta: f64,
    bounds: &GeneBounds,
    rng: &mut R,
) -> ([f64; 3], [f64; 3]) {
    let mut c1 = *p1;
    let mut c2 = *p2;
    for k in 0..3 {
        if rng.random::<f64>() < pc {
            let u: f64 = rng.random();
            let (a, b) = sbx_children(p1[k], p2[k], u, eta);
            c1[k] = a;
            c2[k] = b;
        }
    }
    bounds.clamp(&mut c1);
    bounds.clamp(&mut c2);
    (c1, c2)
}

/// Bounded polynomial mutation. Each gene mutates with probability `pm`;
/// the perturbation shrinks toward whichever bound is closer, so a gene on
/// a bound can only move inward.
pub fn polynomial_mutation<R: Rng + ?Sized>(
    genes: &[f64; 3],
    pm: f64,
    eta: f64,
    bounds: &GeneBounds,
    rng: &mut R,
) -> [f64; 3] {
    let mut out = *genes;
    for k in 0..3 {
        if rng.random::<f64>() >= pm {
            continue;
        }
        let (lo, hi) = (bounds.lower[k], bounds.upper[k]);
        let span = hi - lo;
        if span <= 0.0 {
            continue;
        }
        let x = out[k];
        let d1 = (x - lo) / span;
        let d2 = (hi - x) / span;
        let r: f64 = rng.random();
        let pow = 1.0 / (eta + 1.0);
        let dq = if r < 0.5 {
            let v = 2.0 * r + (1.0 - 2.0 * r) * (1.0 - d1).powf(eta + 1.0);
            v.powf(pow) - 1.0
        } else {
            let v = 2.0 * (1.0 - r) + 2.0 * (r - 0.5) * (1.0 - d2).powf(eta + 1.0);
            1.0 - v.powf(pow)
        };
        out[k] = (x + dq * span).clamp(lo, hi);
    }
    out
}

/// Mating order: clusters visited round-robin, each appearing as many times
/// as it has members.
fn mating_schedule(clusters: &ClusterSet) -> Vec<usize> {
    let members = clusters.members();
    let mut left: Vec<usize> = members.iter().map(Vec::len).collect();
    let mut order = Vec::with_capacity(left.iter().sum());
    while left.iter().any(|&n| n > 0) {
        for (c, n) in left.iter_mut().enumerate() {
            if *n > 0 {
                order.push(c);
                *n -= 1;
            }
        }
    }
    order
}

/// Produces `|population|` children by mating within clusters. A cluster
/// with a single member borrows its second parent from the whole
/// population.
pub fn generate_offspring<R: Rng + ?Sized>(
    population: &Population,
    clusters: &ClusterSet,
    params: &super::EvolutionParams,
    rng: &mut R,
    ids: &mut IdSource,
) -> Result<Vec<Solution>> {
    let n = population.len();
    if n < 2 {
        return Err(Error::Input("mating needs at least two solutions".into()));
    }
    if clusters.assignments().len() != n {
        return Err(Error::Internal(format!(
            "cluster assignment covers {} of {n} solutions",
            clusters.assignments().len()
        )));
    }
    let schedule = mating_schedule(clusters);
    let groups = clusters.members();
    let mut children = Vec::with_capacity(n);
    let mut slot = 0;
    while children.len() < n {
        let group = &groups[schedule[slot % schedule.len()]];
        slot += 1;
        let first = group[rng.random_range(0..group.len())];
        let second = if group.len() >= 2 {
            let mut j = group[rng.random_range(0..group.len() - 1)];
            if j == first {
                j = group[group.len() - 1];
            }
            j
        } else {
            let j = rng.random_range(0..n - 1);
            if j >= first {
                j + 1
            } else {
                j
            }
        };
        let p1 = &population.members[first].genes;
        let p2 = &population.members[second].genes;
        let (c1, c2) = sbx_crossover(
            p1,
            p2,
            params.crossover_prob,
            params.crossover_eta,
            &params.bounds,
            rng,
        );
        for c in [c1, c2] {
            if children.len() == n {
                break;
            }
            let genes =
                polynomial_mutation(&c, params.mutation_prob, params.mutation_eta, &params.bounds, rng);
            children.push(Solution::new(ids.next_id(), genes));
        }
    }
    Ok(children)
}

/// NSGA-II mating: each parent is the winner of a binary tournament on
/// (lower rank, larger crowding distance), ties to the first draw.
pub fn tournament_offspring<R: Rng + ?Sized>(
    population: &Population,
    rank: &[usize],
    crowding: &[f64],
    params: &super::EvolutionParams,
    rng: &mut R,
    ids: &mut IdSource,
) -> Result<Vec<Solution>> {
    let n = population.len();
    if n < 2 {
        return Err(Error::Input("mating needs at least two solutions".into()));
    }
    if rank.len() != n || crowding.len() != n {
        return Err(Error::Internal(format!(
            "ranking covers {} of {n} solutions",
            rank.len().min(crowding.len())
        )));
    }
    let pick = |rng: &mut R| {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let better = rank[b] < rank[a] || (rank[b] == rank[a] && crowding[b] > crowding[a]);
        if better {
            b
        } else {
            a
        }
    };
    let mut children = Vec::with_capacity(n);
    while children.len() < n {
        let first = pick(rng);
        let second = pick(rng);
        let (c1, c2) = sbx_crossover(
            &population.members[first].genes,
            &population.members[second].genes,
            params.crossover_prob,
            params.crossover_eta,
            &params.bounds,
            rng,
        );
        for c in [c1, c2] {
            if children.len() == n {
                break;
            }
            let genes =
                polynomial_mutation(&c, params.mutation_prob, params.mutation_eta, &params.bounds, rng);
            children.push(Solution::new(ids.next_id(), genes));
        }
    }
    Ok(children)
}

#[cfg(test)]
mod tests {
    use super::super::{EvolutionParams, GeneBounds};
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn median_draw_copies_parents() {
        let (a, b) = sbx_children(0.2, 0.7, 0.5, 2.0);
        assert!((a - 0.2).abs() < 1e-15 && (b - 0.7).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn sbx_preserves_gene_sum(p1 in -5.0..5.0f64, p2 in -5.0..5.0f64, u in 0.0..1.0f64, eta in 0.0..30.0f64) {
            let (a, b) = sbx_children(p1, p2, u, eta);
            prop_assert!(((a + b) - (p1 + p2)).abs() <= 1e-9 * (1.0 + a.abs() + b.abs()));
        }
    }

    #[test]
    fn operators_keep_genes_in_bounds() {
        let bounds = GeneBounds::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let mut p1 = [0.0; 3];
            let mut p2 = [0.0; 3];
            for k in 0..3 {
                p1[k] = rng.random_range(bounds.lower[k]..=bounds.upper[k]);
                p2[k] = rng.random_range(bounds.lower[k]..=bounds.upper[k]);
            }
            let (c1, c2) = sbx_crossover(&p1, &p2, 0.9, 2.0, &bounds, &mut rng);
            assert!(bounds.contains(&c1) && bounds.contains(&c2));
            let m = polynomial_mutation(&c1, 1.0, 20.0, &bounds, &mut rng);
            assert!(bounds.contains(&m));
            assert!(m[1] < 1.0);
        }
    }

    #[test]
    fn zero_probability_mutation_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = [0.4, 0.5, 3.0];
        assert_eq!(polynomial_mutation(&g, 0.0, 20.0, &GeneBounds::default(), &mut rng), g);
    }

    #[test]
    fn mutation_on_a_bound_moves_inward() {
        let bounds = GeneBounds::default();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..5000 {
            let up = polynomial_mutation(&bounds.lower, 1.0, 20.0, &bounds, &mut rng);
            let down = polynomial_mutation(&bounds.upper, 1.0, 20.0, &bounds, &mut rng);
            for k in 0..3 {
                assert!(up[k] >= bounds.lower[k]);
                assert!(down[k] <= bounds.upper[k]);
            }
        }
    }

    #[test]
    fn interior_mutation_is_unbiased() {
        let bounds = GeneBounds::default();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let centre = [0.5, 0.5, 6.05];
        let n = 100_000;
        let deltas: Vec<f64> = (0..n)
            .map(|_| polynomial_mutation(&centre, 1.0, 20.0, &bounds, &mut rng)[0] - centre[0])
            .collect();
        let mean = deltas.iter().sum::<f64>() / n as f64;
        let var = deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let stderr = (var / n as f64).sqrt();
        assert!(mean.abs() < 3.0 * stderr, "mean {mean} stderr {stderr}");
    }

    #[test]
    fn schedule_interleaves_by_size() {
        let cs = ClusterSet::from_assignments(vec![0, 0, 0, 1, 1, 2], 3);
        assert_eq!(mating_schedule(&cs), vec![0, 1, 2, 0, 1, 0]);
    }

    fn population(n: usize, rng: &mut ChaCha8Rng) -> Population {
        let params = EvolutionParams::default();
        super::super::init_population(n, &params, rng, &mut IdSource::new()).unwrap()
    }

    #[test]
    fn singleton_clusters_still_mate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pop = population(10, &mut rng);
        let cs = ClusterSet::from_assignments((0..10).collect(), 10);
        let mut ids = IdSource::new();
        ids.next_id();
        let q = generate_offspring(&pop, &cs, &EvolutionParams::default(), &mut rng, &mut ids).unwrap();
        assert_eq!(q.len(), 10);
        assert!(q.iter().all(|s| EvolutionParams::default().bounds.contains(&s.genes)));
    }

    #[test]
    fn offspring_are_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pop = population(10, &mut rng);
        let cs = ClusterSet::from_assignments(vec![0, 1, 2, 0, 1, 2, 0, 1, 2, 0], 3);
        let run = |seed| {
            let mut ids = IdSource::new();
            generate_offspring(&pop, &cs, &EvolutionParams::default(), &mut ChaCha8Rng::seed_from_u64(seed), &mut ids).unwrap()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn tournament_favors_the_first_front() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut pop = population(6, &mut rng);
        // Collapse crossover and mutation so children copy their parents.
        let params = EvolutionParams {
            crossover_prob: 0.0,
            mutation_prob: 0.0,
            ..EvolutionParams::default()
        };
        pop.members[3].genes = [0.5, 0.5, 0.5];
        let rank = vec![1, 1, 1, 0, 1, 1];
        let crowd = vec![1.0; 6];
        let mut wins = 0;
        for _ in 0..200 {
            let q = tournament_offspring(&pop, &rank, &crowd, &params, &mut rng, &mut IdSource::new()).unwrap();
            assert_eq!(q.len(), 6);
            wins += q.iter().filter(|s| s.genes == [0.5, 0.5, 0.5]).count();
        }
        // P(win) = 1 - (5/6)^2 = 11/36 per child.
        let rate = wins as f64 / 1200.0;
        assert!((rate - 11.0 / 36.0).abs() < 0.05, "{rate}");
    }
}
