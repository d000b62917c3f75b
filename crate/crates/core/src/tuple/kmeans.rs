use rand::Rng;

use super::features::sq_dist;

/// Lloyd iterations with k-means++ seeding.
///
/// `points` is row-major with `dims` columns. Clusters that end up empty are
/// dropped, so `centroids` may hold fewer than `k` rows. Nearest-centre ties
/// go to the lowest centre.
#[derive(Debug, Clone)]
pub struct KMeans {
    pub dims: usize,
    pub centroids: Vec<f64>,
    pub assignment: Vec<usize>,
}

impl KMeans {
    pub fn k(&self) -> usize {
        if self.dims == 0 {
            usize::from(!self.assignment.is_empty())
        } else {
            self.centroids.len() / self.dims
        }
    }

    pub fn centroid(&self, c: usize) -> &[f64] {
        &self.centroids[c * self.dims..(c + 1) * self.dims]
    }
}

fn nearest(point: &[f64], centroids: &[f64], dims: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centre) in centroids.chunks_exact(dims.max(1)).enumerate() {
        let d = sq_dist(point, centre);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn seed_centres<R: Rng>(points: &[f64], dims: usize, k: usize, rng: &mut R) -> Vec<f64> {
    let n = points.len() / dims;
    let point = |i: usize| &points[i * dims..(i + 1) * dims];
    let mut centres = point(rng.random_range(0..n)).to_vec();
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(point(i), &centres)).collect();
    while centres.len() / dims < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = n - 1;
        for (i, &w) in d2.iter().enumerate() {
            if target < w {
                pick = i;
                break;
            }
            target -= w;
        }
        let start = centres.len();
        centres.extend_from_slice(point(pick));
        let new = &centres[start..];
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(point(i), new));
        }
    }
    centres
}

pub fn kmeans<R: Rng>(points: &[f64], dims: usize, k: usize, max_iter: usize, rng: &mut R) -> KMeans {
    let n = if dims == 0 { 0 } else { points.len() / dims };
    if n == 0 || k == 0 {
        return KMeans {
            dims,
            centroids: Vec::new(),
            assignment: vec![0; n],
        };
    }
    let mut centroids = seed_centres(points, dims, k.min(n), rng);
    let mut assignment = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, slot) in assignment.iter_mut().enumerate() {
            let (c, _) = nearest(&points[i * dims..(i + 1) * dims], &centroids, dims);
            if *slot != c {
                *slot = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let kc = centroids.len() / dims;
        let mut sums = vec![0.0; kc * dims];
        let mut counts = vec![0usize; kc];
        for (i, &c) in assignment.iter().enumerate() {
            counts[c] += 1;
            for j in 0..dims {
                sums[c * dims + j] += points[i * dims + j];
            }
        }
        for c in 0..kc {
            if counts[c] > 0 {
                for j in 0..dims {
                    centroids[c * dims + j] = sums[c * dims + j] / counts[c] as f64;
                }
            }
        }
    }

    let kc = centroids.len() / dims;
    let mut counts = vec![0usize; kc];
    for &c in &assignment {
        counts[c] += 1;
    }
    let mut remap = vec![usize::MAX; kc];
    let mut kept = Vec::new();
    for c in 0..kc {
        if counts[c] > 0 {
            remap[c] = kept.len() / dims;
            kept.extend_from_slice(&centroids[c * dims..(c + 1) * dims]);
        }
    }
    for a in &mut assignment {
        *a = remap[*a];
    }
    KMeans {
        dims,
        centroids: kept,
        assignment,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn duplicate_points_collapse_to_fewer_clusters() {
        let points = vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let km = kmeans(&points, 2, 3, 100, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(km.k(), 1);
        assert_eq!(km.assignment, vec![0, 0, 0]);
    }

    #[test]
    fn two_obvious_groups() {
        let points = vec![0.0, 0.1, 0.2, 10.0, 10.1, 10.2];
        let km = kmeans(&points, 1, 2, 100, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(km.k(), 2);
        assert_eq!(km.assignment[0], km.assignment[2]);
        assert_eq!(km.assignment[3], km.assignment[5]);
        assert_ne!(km.assignment[0], km.assignment[3]);
    }
}
