//! Station grouping by observed visibility climatology.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng;

use super::window::TrainingWindow;
use crate::data::ObservationRecord;
use crate::error::{Error, Result};
use crate::rng::rng_for;

pub const KMEANS_RESTARTS: usize = 10;
pub const KMEANS_MAX_ITER: usize = 100;

/// Interval edges in metres for the climatology frequencies.
const EDGES: [f64; 2] = [5000.0, 30_000.0];

fn interval_of(v: f64) -> usize {
    EDGES.iter().filter(|&&e| v > e).count()
}

/// Per-station frequencies of observations in [0, 5000], (5000, 30000] and
/// (30000, 70000] m over the window. Stations without observations in the
/// window are left out.
pub fn climatology_features(
    observations: &[ObservationRecord],
    window: &TrainingWindow,
) -> BTreeMap<String, [f64; 3]> {
    let mut counts: BTreeMap<String, [usize; 3]> = BTreeMap::new();
    for o in observations.iter().filter(|o| window.contains(o.valid_time.date())) {
        counts.entry(o.station_id.clone()).or_default()[interval_of(o.visibility_class.value())] += 1;
    }
    counts
        .into_iter()
        .map(|(s, c)| {
            let n = c.iter().sum::<usize>() as f64;
            (s, c.map(|v| v as f64 / n))
        })
        .collect()
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd iterations from the given centres; returns labels and the
/// within-cluster sum of squares.
fn lloyd(points: &[[f64; 3]], mut centres: Vec<[f64; 3]>) -> (Vec<usize>, f64) {
    let k = centres.len();
    let mut labels = vec![usize::MAX; points.len()];
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for (p, l) in points.iter().zip(labels.iter_mut()) {
            let best = (0..k)
                .min_by(|&a, &b| dist2(p, &centres[a]).total_cmp(&dist2(p, &centres[b])))
                .expect("k >= 1");
            if *l != best {
                *l = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![[0.0; 3]; k];
        let mut n = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            n[l] += 1;
            for d in 0..3 {
                sums[l][d] += p[d];
            }
        }
        for c in 0..k {
            if n[c] > 0 {
                centres[c] = sums[c].map(|s| s / n[c] as f64);
            }
        }
    }
    let wss = points.iter().zip(&labels).map(|(p, &l)| dist2(p, &centres[l])).sum();
    (labels, wss)
}

fn best_of_restarts<R: Rng>(points: &[[f64; 3]], k: usize, rng: &mut R) -> Vec<usize> {
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let centres = sample(rng, points.len(), k).into_iter().map(|i| points[i]).collect();
        let (labels, wss) = lloyd(points, centres);
        if best.as_ref().is_none_or(|(_, b)| wss < *b) {
            best = Some((labels, wss));
        }
    }
    best.expect("at least one restart").0
}

/// k-means on the station feature vectors with seeded restarts. If any
/// cluster ends up with fewer than `min_size` stations, `k` is decremented and
/// the clustering redone. Clusters are returned with stations in sorted order
/// and ordered by their first station.
pub fn kmeans_clusters(
    features: &BTreeMap<String, [f64; 3]>,
    k: usize,
    min_size: usize,
    seed: u64,
) -> Result<Vec<Vec<String>>> {
    if k == 0 || min_size == 0 {
        return Err(Error::Invalid("k and min_size must be at least 1".into()));
    }
    let ids: Vec<&String> = features.keys().collect();
    let points: Vec<[f64; 3]> = features.values().copied().collect();
    let n = points.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut k = k.min(n).min((n / min_size).max(1));
    let labels = loop {
        if k == 1 {
            break vec![0; n];
        }
        let mut rng = rng_for(seed, &[k as u64]);
        let labels = best_of_restarts(&points, k, &mut rng);
        let mut sizes = vec![0usize; k];
        labels.iter().for_each(|&l| sizes[l] += 1);
        if sizes.iter().all(|&s| s >= min_size) {
            break labels;
        }
        k -= 1;
    };
    let mut clusters: Vec<Vec<String>> = Vec::new();
    let mut slot = vec![usize::MAX; k];
    for (id, &l) in ids.iter().zip(&labels) {
        if slot[l] == usize::MAX {
            slot[l] = clusters.len();
            clusters.push(Vec::new());
        }
        clusters[slot[l]].push((*id).clone());
    }
    Ok(clusters)
}
