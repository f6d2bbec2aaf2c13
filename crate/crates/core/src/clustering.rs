//! k-medoids partitioning of dictionary atoms.
//!
//! PAM-style alternation: assign every atom to its nearest medoid, then move
//! each medoid to the member minimising the within-cluster distance sum.
//! Seeding is k-medoids++ from a ChaCha stream. To make the result
//! equivariant under column permutations, the algorithm runs on a canonical
//! (lexicographic) ordering of the columns and maps the labels back.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    L1,
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringConfig {
    pub k: usize,
    pub metric: Metric,
    pub seed: u64,
    pub max_iters: usize,
}

impl ClusteringConfig {
    pub fn new(k: usize, metric: Metric, seed: u64) -> Self {
        Self {
            k,
            metric,
            seed,
            max_iters: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Cluster label per atom, in `1..=k`.
    pub labels: Vec<usize>,
    /// Column index of each cluster's medoid (cluster `c` has label `c + 1`).
    pub medoids: Vec<usize>,
    /// Sum of distances from every atom to its medoid.
    pub cost: f64,
    /// Cost after seeding and after each iteration.
    pub cost_trace: Vec<f64>,
    pub iterations: usize,
}

/// Symmetric `p x p` matrix of pairwise column distances.
pub fn distance_matrix(d: &Dictionary, metric: Metric) -> DMatrix<f64> {
    let atoms = d.atoms();
    let p = atoms.ncols();
    let mut out = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in (i + 1)..p {
            let (a, b) = (atoms.column(i), atoms.column(j));
            let dist = match metric {
                Metric::L1 => a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum(),
                Metric::L2 => a
                    .iter()
                    .zip(b.iter())
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt(),
            };
            out[(i, j)] = dist;
            out[(j, i)] = dist;
        }
    }
    out
}

fn lexicographic(atoms: &DMatrix<f64>, a: usize, b: usize) -> Ordering {
    for (x, y) in atoms.column(a).iter().zip(atoms.column(b).iter()) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// Clusters the atoms of `d` into `cfg.k` groups.
pub fn k_medoids(d: &Dictionary, cfg: &ClusteringConfig) -> Result<Clustering> {
    let p = d.n_atoms();
    if cfg.k == 0 || cfg.k > p {
        return Err(Error::invalid(format!(
            "cluster count {} must lie in 1..={p}",
            cfg.k
        )));
    }
    if cfg.max_iters == 0 {
        return Err(Error::invalid("max_iters must be positive"));
    }

    let mut canonical: Vec<usize> = (0..p).collect();
    canonical.sort_by(|&a, &b| lexicographic(d.atoms(), a, b));
    let ordered = Dictionary::new(d.select_columns(&canonical))?;
    let dist = distance_matrix(&ordered, cfg.metric);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut medoids = seed_plus_plus(&dist, cfg.k, &mut rng);
    let mut assign = assign_nearest(&dist, &medoids);
    let mut cost = total_cost(&dist, &medoids, &assign);
    let mut trace = vec![cost];
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        let mut changed = false;
        for c in 0..medoids.len() {
            let members: Vec<usize> = (0..p).filter(|&i| assign[i] == c).collect();
            let within = |m: usize| members.iter().map(|&i| dist[(m, i)]).sum::<f64>();
            let current = within(medoids[c]);
            let mut best = (current, medoids[c]);
            for &m in &members {
                let s = within(m);
                if s < best.0 {
                    best = (s, m);
                }
            }
            if best.1 != medoids[c] {
                medoids[c] = best.1;
                changed = true;
            }
        }
        assign = assign_nearest(&dist, &medoids);
        cost = total_cost(&dist, &medoids, &assign);
        trace.push(cost);
        if !changed {
            break;
        }
    }

    // number clusters by medoid position in canonical order
    let mut order: Vec<usize> = (0..medoids.len()).collect();
    order.sort_by_key(|&c| medoids[c]);
    let mut rank = vec![0; medoids.len()];
    for (r, &c) in order.iter().enumerate() {
        rank[c] = r;
    }

    let mut labels = vec![0; p];
    for (pos, &orig) in canonical.iter().enumerate() {
        labels[orig] = rank[assign[pos]] + 1;
    }
    let mut out_medoids = vec![0; medoids.len()];
    for (c, &m) in medoids.iter().enumerate() {
        out_medoids[rank[c]] = canonical[m];
    }

    Ok(Clustering {
        labels,
        medoids: out_medoids,
        cost,
        cost_trace: trace,
        iterations,
    })
}

fn seed_plus_plus(dist: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let p = dist.nrows();
    let mut medoids = vec![rng.gen_range(0..p)];
    let mut nearest: Vec<f64> = (0..p).map(|i| dist[(medoids[0], i)]).collect();
    while medoids.len() < k {
        let weights: Vec<f64> = (0..p)
            .map(|i| {
                if medoids.contains(&i) {
                    0.0
                } else {
                    nearest[i] * nearest[i]
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut chosen = None;
            for (i, w) in weights.iter().enumerate() {
                if *w > 0.0 {
                    chosen = Some(i);
                    if u < *w {
                        break;
                    }
                    u -= w;
                }
            }
            chosen.unwrap()
        } else {
            // every remaining atom duplicates a medoid
            (0..p).find(|i| !medoids.contains(i)).unwrap()
        };
        medoids.push(pick);
        for i in 0..p {
            nearest[i] = nearest[i].min(dist[(pick, i)]);
        }
    }
    medoids
}

/// Nearest-medoid assignment; ties go to the medoid with the lowest column
/// index, and every medoid belongs to its own cluster.
fn assign_nearest(dist: &DMatrix<f64>, medoids: &[usize]) -> Vec<usize> {
    let p = dist.nrows();
    let mut by_index: Vec<usize> = (0..medoids.len()).collect();
    by_index.sort_by_key(|&c| medoids[c]);
    (0..p)
        .map(|i| {
            if let Some(c) = medoids.iter().position(|&m| m == i) {
                return c;
            }
            let mut best = by_index[0];
            for &c in &by_index[1..] {
                if dist[(medoids[c], i)] < dist[(medoids[best], i)] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

fn total_cost(dist: &DMatrix<f64>, medoids: &[usize], assign: &[usize]) -> f64 {
    assign
        .iter()
        .enumerate()
        .map(|(i, &c)| dist[(medoids[c], i)])
        .sum()
}
