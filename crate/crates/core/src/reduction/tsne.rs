//! Exact t-SNE with packed upper-triangular affinity storage.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::pca::Pca;
use super::{ReducedMap, ReductionConfig};
use crate::error::{Error, Result};
use crate::geometry::{check_dimensions, Point2D, SemanticPoint};

const ENTROPY_TOL_BITS: f64 = 1e-5;
const BISECTION_STEPS: usize = 200;
const MOMENTUM_EARLY: f64 = 0.5;
const MOMENTUM_LATE: f64 = 0.8;
const MIN_GAIN: f64 = 0.01;
/// Standard deviation of the first PCA coordinate after rescaling.
const PCA_INIT_STD: f64 = 1e-2;
const JITTER_STD: f64 = 1e-4;

#[inline]
fn packed_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Symmetrised input affinities plus per-point calibration diagnostics.
#[derive(Debug, Clone)]
pub struct Affinities {
    pub n: usize,
    /// `p_ij` for `i < j`, packed row-major; the full matrix sums to one.
    pub packed: Vec<f64>,
    /// Shannon entropy (bits) of each conditional distribution.
    pub entropies_bits: Vec<f64>,
    pub target_entropy_bits: f64,
}

impl Affinities {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.packed[packed_index(self.n, i, j)],
            std::cmp::Ordering::Greater => self.packed[packed_index(self.n, j, i)],
            std::cmp::Ordering::Equal => 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        2.0 * self.packed.iter().sum::<f64>()
    }
}

/// Conditional distribution of row `i` for precision `beta`, returning its
/// entropy in nats. `dist` excludes the point itself.
fn conditional_row(dist: &[f64], d_min: f64, beta: f64, out: &mut [f64]) -> f64 {
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for (o, &d) in out.iter_mut().zip(dist) {
        let shifted = d - d_min;
        let e = (-beta * shifted).exp();
        *o = e;
        sum += e;
        weighted += e * shifted;
    }
    out.iter_mut().for_each(|o| *o /= sum);
    sum.ln() + beta * weighted / sum
}

/// Gaussian conditionals with per-point precision found by bisection, then
/// `p_ij = (p_j|i + p_i|j) / 2N`.
pub fn compute_affinities(rows: &[&[f64]], perplexity: f64) -> Result<Affinities> {
    let n = rows.len();
    let target_nats = perplexity.ln();
    let target_bits = perplexity.log2();
    let mut packed = vec![0.0; n * (n - 1) / 2];
    let mut entropies_bits = Vec::with_capacity(n);
    let mut dist = vec![0.0; n - 1];
    let mut row = vec![0.0; n - 1];
    let scale = 1.0 / (2.0 * n as f64);

    for i in 0..n {
        let mut k = 0;
        for j in 0..n {
            if j != i {
                let d = squared_distance(rows[i], rows[j]);
                if !d.is_finite() {
                    return Err(Error::NonFinite(format!("distance between points {i} and {j}")));
                }
                dist[k] = d;
                k += 1;
            }
        }
        let d_min = dist.iter().copied().fold(f64::INFINITY, f64::min);
        let spread = dist.iter().map(|d| d - d_min).fold(0.0, f64::max);
        let mut beta = if spread > 0.0 { 1.0 / spread } else { 1.0 };
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        let mut h = conditional_row(&dist, d_min, beta, &mut row);
        for _ in 0..BISECTION_STEPS {
            let diff = h - target_nats;
            if (diff / std::f64::consts::LN_2).abs() < ENTROPY_TOL_BITS {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
            h = conditional_row(&dist, d_min, beta, &mut row);
        }
        entropies_bits.push(h / std::f64::consts::LN_2);

        let mut k = 0;
        for j in 0..n {
            if j == i {
                continue;
            }
            let p = row[k] * scale;
            k += 1;
            if j > i {
                packed[packed_index(n, i, j)] += p;
            } else {
                packed[packed_index(n, j, i)] += p;
            }
        }
    }
    Ok(Affinities { n, packed, entropies_bits, target_entropy_bits: target_bits })
}

fn initial_layout(rows: &[&[f64]], seed: u64) -> Vec<Point2D> {
    let n = rows.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, JITTER_STD).expect("valid normal");
    let base: Vec<Point2D> = match Pca::fit(rows) {
        Ok(pca) => {
            let proj: Vec<Point2D> = rows.iter().map(|r| pca.project_2d(r)).collect();
            let mean_x = proj.iter().map(|p| p.x).sum::<f64>() / n as f64;
            let var_x = proj.iter().map(|p| (p.x - mean_x).powi(2)).sum::<f64>() / n as f64;
            let s = if var_x > 0.0 { PCA_INIT_STD / var_x.sqrt() } else { 0.0 };
            proj.into_iter().map(|p| p.scale(s)).collect()
        }
        Err(_) => vec![Point2D::new(0.0, 0.0); n],
    };
    base.into_iter().map(|p| Point2D::new(p.x + jitter.sample(&mut rng), p.y + jitter.sample(&mut rng))).collect()
}

/// Exact t-SNE of `points` into the plane.
pub fn tsne_embed(points: &[SemanticPoint], config: &ReductionConfig) -> Result<ReducedMap> {
    let rows: Vec<&[f64]> = points.iter().map(|p| p.coords()).collect();
    if let Some(p) = points.first() {
        check_dimensions(points, p.dim())?;
    }
    let coords = tsne_rows(&rows, config)?;
    Ok(ReducedMap::indexed(coords))
}

/// [`tsne_embed`] on bare rows.
pub fn tsne_rows(rows: &[&[f64]], config: &ReductionConfig) -> Result<Vec<Point2D>> {
    let n = rows.len();
    if n < 4 {
        return Err(Error::TooFewPoints { needed: 4, got: n });
    }
    config.validate()?;
    let aff = compute_affinities(rows, config.effective_perplexity(n))?;
    let mut y = initial_layout(rows, config.seed);
    optimize(&aff, &mut y, config);
    if y.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("t-SNE layout".into()));
    }
    Ok(y)
}

fn optimize(aff: &Affinities, y: &mut [Point2D], config: &ReductionConfig) {
    let n = y.len();
    let mut q_num = vec![0.0; aff.packed.len()];
    let mut grad = vec![Point2D::new(0.0, 0.0); n];
    let mut update = vec![Point2D::new(0.0, 0.0); n];
    let mut gains = vec![Point2D::new(1.0, 1.0); n];
    let learning_rate = config.effective_learning_rate(n);

    for iter in 0..config.iterations {
        let early = iter < config.exaggeration_iterations;
        let exaggeration = if early { config.early_exaggeration } else { 1.0 };
        let momentum = if early { MOMENTUM_EARLY } else { MOMENTUM_LATE };

        let mut z = 0.0;
        let mut k = 0;
        for i in 0..n {
            let yi = y[i];
            for yj in &y[i + 1..] {
                let dx = yi.x - yj.x;
                let dy = yi.y - yj.y;
                let q = 1.0 / (1.0 + dx * dx + dy * dy);
                q_num[k] = q;
                z += q;
                k += 1;
            }
        }
        let inv_z = 1.0 / (2.0 * z);

        grad.iter_mut().for_each(|g| *g = Point2D::new(0.0, 0.0));
        let mut k = 0;
        for i in 0..n {
            let yi = y[i];
            let (mut gx, mut gy) = (0.0, 0.0);
            for j in i + 1..n {
                let q = q_num[k];
                let c = (exaggeration * aff.packed[k] - q * inv_z) * q;
                k += 1;
                let fx = c * (yi.x - y[j].x);
                let fy = c * (yi.y - y[j].y);
                gx += fx;
                gy += fy;
                grad[j].x -= fx;
                grad[j].y -= fy;
            }
            grad[i].x += gx;
            grad[i].y += gy;
        }

        for i in 0..n {
            let g = grad[i].scale(4.0);
            let u = update[i];
            let gain = &mut gains[i];
            gain.x = if (g.x > 0.0) != (u.x > 0.0) { gain.x + 0.2 } else { gain.x * 0.8 }.max(MIN_GAIN);
            gain.y = if (g.y > 0.0) != (u.y > 0.0) { gain.y + 0.2 } else { gain.y * 0.8 }.max(MIN_GAIN);
            update[i] = Point2D::new(
                momentum * u.x - learning_rate * gain.x * g.x,
                momentum * u.y - learning_rate * gain.y * g.y,
            );
            y[i] = y[i].add(update[i]);
        }
        let mean = y.iter().fold(Point2D::new(0.0, 0.0), |a, p| a.add(*p)).scale(1.0 / n as f64);
        y.iter_mut().for_each(|p| *p = p.sub(mean));
    }
}

/// Kullback-Leibler divergence `KL(P || Q)` of a layout; used in tests.
pub fn kl_divergence(aff: &Affinities, y: &[Point2D]) -> f64 {
    let n = y.len();
    let mut z = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            z += 1.0 / (1.0 + y[i].sub(y[j]).dot(y[i].sub(y[j])));
        }
    }
    let mut kl = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let p = aff.get(i, j);
            if p > 0.0 {
                let q = 1.0 / (1.0 + y[i].sub(y[j]).dot(y[i].sub(y[j]))) / (2.0 * z);
                kl += 2.0 * p * (p / q).ln();
            }
        }
    }
    kl
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Three unit-variance blobs in the plane with centres drawn from `[-10, 10]^2`.
    fn blobs(seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers: Vec<[f64; 2]> =
            (0..3).map(|_| [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)]).collect();
        let noise = Normal::new(0.0, 1.0).unwrap();
        (0..100).map(|i| centers[i % 3].iter().map(|m| m + noise.sample(&mut rng)).collect()).collect()
    }

    fn knn(points: &[Vec<f64>], i: usize, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..points.len()).filter(|&j| j != i).collect();
        idx.sort_by(|&a, &b| {
            squared_distance(&points[i], &points[a]).total_cmp(&squared_distance(&points[i], &points[b]))
        });
        idx.truncate(k);
        idx.sort();
        idx
    }

    /// Mean Jaccard overlap of k-nearest-neighbour sets, by brute force.
    fn knn_jaccard(src: &[Vec<f64>], dst: &[Point2D], k: usize) -> f64 {
        let dst: Vec<Vec<f64>> = dst.iter().map(|p| vec![p.x, p.y]).collect();
        let mut total = 0.0;
        for i in 0..src.len() {
            let a = knn(src, i, k);
            let b = knn(&dst, i, k);
            let inter = a.iter().filter(|x| b.contains(x)).count() as f64;
            total += inter / (2.0 * k as f64 - inter);
        }
        total / src.len() as f64
    }

    #[test]
    fn affinities_are_calibrated_and_normalised() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..120).map(|_| (0..10).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let aff = compute_affinities(&refs, 30.0).unwrap();
        assert!((aff.total() - 1.0).abs() < 1e-9);
        assert!(aff.packed.iter().all(|&p| p >= 0.0));
        for h in &aff.entropies_bits {
            assert!((h - 30f64.log2()).abs() < 1e-4);
        }
    }

    #[test]
    fn two_clusters_stay_apart() {
        let a = vec![0.0; 50];
        let mut b = a.clone();
        b[0] = 0.1;
        let mut c = vec![0.0; 50];
        c[1] = 100.0;
        let mut d = c.clone();
        d[0] = 0.1;
        let pts: Vec<SemanticPoint> = [a, b, c, d].into_iter().map(SemanticPoint::abstract_point).collect();
        let map = tsne_embed(&pts, &ReductionConfig { iterations: 500, ..Default::default() }).unwrap();
        let y = &map.coords2d;
        let within = [y[0].distance(y[1]), y[2].distance(y[3])];
        let across = [y[0].distance(y[2]), y[0].distance(y[3]), y[1].distance(y[2]), y[1].distance(y[3])];
        for w in within {
            for x in across {
                assert!(w < x, "within {w} vs across {x}");
            }
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<SemanticPoint> = (0..30)
            .map(|_| SemanticPoint::abstract_point((0..5).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect();
        let cfg = ReductionConfig { iterations: 300, ..Default::default() };
        let a = tsne_embed(&pts, &cfg).unwrap();
        let b = tsne_embed(&pts, &cfg).unwrap();
        assert!(a
            .coords2d
            .iter()
            .zip(&b.coords2d)
            .all(|(p, q)| p.x.to_bits() == q.x.to_bits() && p.y.to_bits() == q.y.to_bits()));
    }

    #[test]
    fn three_blobs_keep_their_neighbourhoods() {
        let rows = blobs(3);
        let pts: Vec<SemanticPoint> = rows.iter().cloned().map(SemanticPoint::abstract_point).collect();
        let map = tsne_embed(&pts, &ReductionConfig::default()).unwrap();
        let score = knn_jaccard(&rows, &map.coords2d, 10);
        assert!(score >= 0.5, "kNN Jaccard {score}");
    }

    #[test]
    fn optimisation_lowers_kl() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..40).map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let cfg = ReductionConfig { iterations: 400, ..Default::default() };
        let aff = compute_affinities(&refs, cfg.effective_perplexity(40)).unwrap();
        let init = initial_layout(&refs, cfg.seed);
        let mut y = init.clone();
        optimize(&aff, &mut y, &cfg);
        assert!(kl_divergence(&aff, &y) < kl_divergence(&aff, &init));
    }

    #[test]
    fn too_few_points() {
        let pts = vec![SemanticPoint::abstract_point(vec![0.0, 1.0]); 3];
        assert!(matches!(tsne_embed(&pts, &ReductionConfig::default()), Err(Error::TooFewPoints { .. })));
    }

    #[test]
    fn non_finite_distance_is_reported() {
        let mut pts = vec![SemanticPoint::abstract_point(vec![0.0, 1.0]); 5];
        pts[2] = SemanticPoint::abstract_point(vec![f64::INFINITY, 0.0]);
        assert!(matches!(tsne_embed(&pts, &ReductionConfig::default()), Err(Error::NonFinite(_))));
    }
}
