use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::Serialize;

use super::behavior::UserChargingProfile;
use crate::error::{Error, Result};

const MAX_LLOYD_ITERS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub wcss: f64,
    /// Mean silhouette; `None` for a single cluster.
    pub silhouette: Option<f64>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Standardizes each column to zero mean and unit variance. Constant
/// columns are only centered.
pub fn standardize(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let Some(first) = points.first() else {
        return Vec::new();
    };
    let dims = first.len();
    let n = points.len() as f64;
    let mut out = points.to_vec();
    for d in 0..dims {
        let mean = points.iter().map(|p| p[d]).sum::<f64>() / n;
        let var = points.iter().map(|p| (p[d] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        for p in out.iter_mut() {
            p[d] = if sd > 1e-12 { (p[d] - mean) / sd } else { p[d] - mean };
        }
    }
    out
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut wcss = 0.0;
    let assignments = points
        .iter()
        .map(|p| {
            let (best, d) = centroids
                .iter()
                .enumerate()
                .map(|(j, c)| (j, dist2(p, c)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("k >= 1");
            wcss += d;
            best
        })
        .collect();
    (assignments, wcss)
}

/// Lloyd iterations from `centroids` until assignments stop changing.
fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> ClusterResult {
    let k = centroids.len();
    let dims = points[0].len();
    let (mut assignments, mut wcss) = assign(points, &centroids);
    for _ in 0..MAX_LLOYD_ITERS {
        let mut sums = vec![vec![0.0; dims]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            } else {
                // reseed an empty cluster at the point farthest from its centroid
                let far = points
                    .iter()
                    .zip(&assignments)
                    .map(|(p, &a)| dist2(p, &centroids[a]))
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(i, _)| i)
                    .expect("non-empty");
                centroids[j] = points[far].clone();
            }
        }
        let (next, next_wcss) = assign(points, &centroids);
        let changed = next != assignments;
        assignments = next;
        wcss = next_wcss;
        if !changed {
            break;
        }
    }
    ClusterResult {
        k,
        assignments,
        centroids,
        wcss,
        silhouette: None,
    }
}

fn kmeans_pp<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.gen_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total <= 0.0 {
            rng.gen_range(0..points.len())
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        };
        let c = points[idx].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Best of `restarts` k-means++ runs by WCSS, with the silhouette of the
/// winning assignment. Restarts draw from `rng` in order, so adding
/// restarts never worsens the result.
pub fn kmeans<R: Rng>(points: &[Vec<f64>], k: usize, restarts: usize, rng: &mut R) -> Result<ClusterResult> {
    kmeans_with_seed(points, k, restarts, rng, None)
}

fn kmeans_with_seed<R: Rng>(
    points: &[Vec<f64>],
    k: usize,
    restarts: usize,
    rng: &mut R,
    warm: Option<Vec<Vec<f64>>>,
) -> Result<ClusterResult> {
    if k == 0 || k > points.len() {
        return Err(Error::TooFewProfiles { k, n: points.len() });
    }
    let mut best: Option<ClusterResult> = None;
    let inits = (0..restarts.max(1))
        .map(|_| kmeans_pp(points, k, rng))
        .chain(warm);
    for init in inits {
        let r = lloyd(points, init);
        if best.as_ref().is_none_or(|b| r.wcss < b.wcss) {
            best = Some(r);
        }
    }
    let mut best = best.expect("at least one restart");
    best.silhouette = mean_silhouette(points, &best.assignments, k);
    Ok(best)
}

/// Per-point silhouette values; points in singleton clusters score 0.
pub fn silhouette_samples(points: &[Vec<f64>], assignments: &[usize], k: usize) -> Vec<f64> {
    let mut sizes = vec![0usize; k];
    for &a in assignments {
        sizes[a] += 1;
    }
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let own = assignments[i];
            if sizes[own] <= 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for (j, q) in points.iter().enumerate() {
                if i != j {
                    sums[assignments[j]] += dist2(p, q).sqrt();
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            if !b.is_finite() {
                return 0.0;
            }
            let m = a.max(b);
            if m > 0.0 {
                (b - a) / m
            } else {
                0.0
            }
        })
        .collect()
}

pub fn mean_silhouette(points: &[Vec<f64>], assignments: &[usize], k: usize) -> Option<f64> {
    let used = {
        let mut seen = vec![false; k];
        assignments.iter().for_each(|&a| seen[a] = true);
        seen.iter().filter(|&&s| s).count()
    };
    if used < 2 {
        return None;
    }
    let s = silhouette_samples(points, assignments, k);
    Some(s.iter().sum::<f64>() / s.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElbowPoint {
    pub k: usize,
    pub wcss: f64,
    pub silhouette: Option<f64>,
}

/// Clusters standardized profile features for k = 1..=k_max. Each k also
/// tries the best k-1 centroids plus the farthest point, so WCSS never
/// increases along the sweep.
pub fn elbow_sweep(
    profiles: &[UserChargingProfile],
    k_max: usize,
    restarts: usize,
    seed: u64,
) -> Result<(Vec<ElbowPoint>, Vec<ClusterResult>)> {
    if k_max < 2 {
        return Err(Error::Invalid("elbow sweep needs k_max >= 2".into()));
    }
    let points = standardize(&profiles.iter().map(|p| p.features()).collect::<Vec<_>>());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results: Vec<ClusterResult> = Vec::new();
    for k in 1..=k_max.min(points.len()) {
        let warm = results.last().map(|prev| {
            let far = points
                .iter()
                .zip(&prev.assignments)
                .map(|(p, &a)| dist2(p, &prev.centroids[a]))
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(i, _)| i)
                .expect("non-empty");
            let mut c = prev.centroids.clone();
            c.push(points[far].clone());
            c
        });
        results.push(kmeans_with_seed(&points, k, restarts, &mut rng, warm)?);
    }
    let sweep = results
        .iter()
        .map(|r| ElbowPoint {
            k: r.k,
            wcss: r.wcss,
            silhouette: r.silhouette,
        })
        .collect();
    Ok((sweep, results))
}

/// The k with the highest mean silhouette.
pub fn best_k(sweep: &[ElbowPoint]) -> Option<usize> {
    sweep
        .iter()
        .filter_map(|p| p.silhouette.map(|s| (p.k, s)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| k)
}

pub const CLUSTER_HEADER: [&str; 6] = [
    "household",
    "cluster",
    "mean_start",
    "mean_end",
    "mean_duration",
    "silhouette",
];

/// One row per profile with its cluster and per-point silhouette.
pub fn write_cluster_report<W: Write>(
    writer: W,
    profiles: &[UserChargingProfile],
    result: &ClusterResult,
) -> Result<()> {
    let points = standardize(&profiles.iter().map(|p| p.features()).collect::<Vec<_>>());
    let sil = silhouette_samples(&points, &result.assignments, result.k);
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CLUSTER_HEADER)?;
    for ((p, &c), s) in profiles.iter().zip(&result.assignments).zip(sil) {
        w.write_record([
            p.household_id.clone(),
            c.to_string(),
            p.mean_start_hour.to_string(),
            p.mean_end_hour.to_string(),
            p.mean_duration_h.to_string(),
            s.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn blobs(n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.3).unwrap();
        (0..2 * n)
            .map(|i| {
                let c = if i < n { 0.0 } else { 10.0 };
                (0..3).map(|_| c + noise.sample(&mut rng)).collect()
            })
            .collect()
    }

    #[test]
    fn separated_blobs_are_recovered() {
        let pts = blobs(20, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = kmeans(&pts, 2, 5, &mut rng).unwrap();
        assert!(r.assignments[..20].iter().all(|&a| a == r.assignments[0]));
        assert!(r.assignments[20..].iter().all(|&a| a != r.assignments[0]));
        assert!(r.silhouette.unwrap() > 0.7);
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let pts = blobs(5, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = kmeans(&pts, 1, 3, &mut rng).unwrap();
        let mean0 = pts.iter().map(|p| p[0]).sum::<f64>() / pts.len() as f64;
        assert!((r.centroids[0][0] - mean0).abs() < 1e-12);
        assert_eq!(r.silhouette, None);
        assert!(kmeans(&pts, 11, 1, &mut rng).is_err());
    }

    #[test]
    fn more_restarts_never_worse() {
        let pts: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![(i * 7 % 13) as f64, (i * 5 % 11) as f64])
            .collect();
        let mut prev = f64::INFINITY;
        for r in 1..8 {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let w = kmeans(&pts, 4, r, &mut rng).unwrap().wcss;
            assert!(w <= prev + 1e-12);
            prev = w;
        }
    }

    #[test]
    fn identical_profiles_have_zero_wcss() {
        let p = UserChargingProfile {
            household_id: "x".into(),
            mean_start_hour: 8.0,
            mean_end_hour: 17.0,
            mean_duration_h: 9.0,
            transaction_count: 3,
        };
        let (sweep, _) = elbow_sweep(&vec![p; 6], 3, 2, 1).unwrap();
        assert_eq!(sweep[0].wcss, 0.0);
    }
}
