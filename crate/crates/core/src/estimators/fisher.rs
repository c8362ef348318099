use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::entropy::jitter_duplicates;
use super::kdtree::KdTree;
use super::stats::mean_and_se;
use super::EstimatorReport;
use crate::error::{Error, Result};
use crate::geometry::Velocity;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum FisherMethod {
    /// Cross-fitted local score estimate on k-NN balls. `k` is capped at
    /// `n / 4` for small samples; the report carries the value used.
    KnnScore { k: usize, splits: usize },
    /// `int |grad f_h|^2 / f_h` for a gridded Gaussian kernel density
    /// estimate `f_h`. `bandwidth = None` picks `sigma n^(-1/7)`.
    KdePlugin {
        bandwidth: Option<f64>,
        max_cells: usize,
        bootstrap: usize,
    },
}

impl Default for FisherMethod {
    fn default() -> Self {
        FisherMethod::KnnScore { k: 64, splits: 2 }
    }
}

impl FisherMethod {
    pub fn kde_default() -> Self {
        FisherMethod::KdePlugin {
            bandwidth: None,
            max_cells: 1 << 23,
            bootstrap: 4,
        }
    }
}

const MIN_SAMPLES: usize = 100;
/// Groups in the knn_score jackknife.
const JACKKNIFE_GROUPS: usize = 8;

/// Estimate of `I(f) = int |grad f|^2 / f` for the law of `sample`.
pub fn fisher_estimate(sample: &[Velocity], method: &FisherMethod, seed: u64) -> Result<EstimatorReport> {
    fisher_estimate_grouped(sample, method, seed, None)
}

/// As [`fisher_estimate`], with the standard error clustered over
/// consecutive blocks of `group` points (one block per replica) when the
/// method allows it.
pub fn fisher_estimate_grouped(sample: &[Velocity], method: &FisherMethod, seed: u64, group: Option<usize>) -> Result<EstimatorReport> {
    if sample.len() < MIN_SAMPLES {
        return Err(Error::Estimator(format!(
            "Fisher estimate needs n >= {MIN_SAMPLES}, got {}",
            sample.len()
        )));
    }
    match *method {
        FisherMethod::KnnScore { k, splits } => knn_score(sample, k, splits, seed, group),
        FisherMethod::KdePlugin {
            bandwidth,
            max_cells,
            bootstrap,
        } => {
            let h = match bandwidth {
                Some(h) if !(h > 0.0 && h.is_finite()) => return Err(Error::Estimator(format!("bandwidth {h} must be positive"))),
                Some(h) => h,
                None => default_bandwidth(sample),
            };
            let value = kde_fisher(sample, h, max_cells)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut reps = Vec::with_capacity(bootstrap);
            for _ in 0..bootstrap {
                let re: Vec<Velocity> = (0..sample.len()).map(|_| sample[rng.random_range(0..sample.len())]).collect();
                reps.push(kde_fisher(&re, h, max_cells)?);
            }
            let se = if bootstrap >= 2 {
                mean_and_se(&reps).1 * (bootstrap as f64).sqrt()
            } else {
                0.0
            };
            Ok(EstimatorReport::new("fisher_kde_plugin", value, se, sample.len())
                .with("bandwidth", h)
                .with("bootstrap", bootstrap as f64))
        }
    }
}

/// Mean radial fraction `E[u.y] / r` of a point `y` uniform on the ball of
/// radius `r` tilted by `exp(kappa u.y / r)`.
fn tilt_mean(kappa: f64) -> f64 {
    if kappa < 0.3 {
        const C: [f64; 5] = [0.2, -1.0 / 175.0, 2.0 / 7875.0, -1.220_366_934_652_649e-5, 5.987_663_130_520_273e-7];
        let k2 = kappa * kappa;
        kappa * C.iter().rev().fold(0.0, |acc, &c| acc * k2 + c)
    } else {
        let t = kappa.tanh();
        kappa * t / (kappa - t) - 3.0 / kappa
    }
}

fn tilt_inverse(y: f64) -> f64 {
    let y = y.clamp(0.0, 0.98);
    let (mut lo, mut hi) = (0.0, 200.0);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if tilt_mean(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Score at each point of `queries` from the `k` nearest points of `half`,
/// fitting a log-linear density on the ball reaching the next neighbour.
fn local_scores(queries: &[Velocity], half: &[Velocity], k: usize) -> Vec<Velocity> {
    let tree = KdTree::new(half);
    queries
        .par_iter()
        .map(|&x| {
            let mut nn = tree.nearest(x, k + 2, None);
            // the query itself belongs to this half when its distance is 0
            if nn[0].0 == 0.0 {
                nn.remove(0);
            }
            let r = nn[k].0.sqrt();
            let mut mu = Velocity::ZERO;
            for &(_, j) in &nn[..k] {
                mu += half[j] - x;
            }
            mu = mu / k as f64;
            let m = mu.norm();
            if m == 0.0 || r == 0.0 {
                return Velocity::ZERO;
            }
            mu * (tilt_inverse(m / r) / (r * m))
        })
        .collect()
}

/// Mean over `keep` of the cross-fitted products `s_a(x_i) . s_b(x_i)`,
/// averaged over the halvings in `labels` (one bit per point and split).
fn cross_fit_mean(pts: &[Velocity], labels: &[Vec<bool>], keep: &[bool], k: usize) -> f64 {
    let idx: Vec<usize> = (0..pts.len()).filter(|&i| keep[i]).collect();
    let q: Vec<Velocity> = idx.iter().map(|&i| pts[i]).collect();
    let mut total = 0.0;
    for lab in labels {
        let a: Vec<Velocity> = idx.iter().filter(|&&i| lab[i]).map(|&i| pts[i]).collect();
        let b: Vec<Velocity> = idx.iter().filter(|&&i| !lab[i]).map(|&i| pts[i]).collect();
        let sa = local_scores(&q, &a, k);
        let sb = local_scores(&q, &b, k);
        total += sa.iter().zip(&sb).map(|(x, y)| x.dot(*y)).sum::<f64>() / q.len() as f64;
    }
    total / labels.len() as f64
}

/// Neighbouring score fits share data, so the per-point products are
/// strongly correlated and their spread understates the error. The error
/// bar is a delete-one-group jackknife over `JACKKNIFE_GROUPS` groups of
/// whole units (points, or blocks of `group` points), with each point's
/// half labels held fixed; by the Efron-Stein inequality it is
/// conservative.
fn knn_score(sample: &[Velocity], k: usize, splits: usize, seed: u64, group: Option<usize>) -> Result<EstimatorReport> {
    let n = sample.len();
    let k = k.min(n / 4);
    if k == 0 || splits == 0 || n < 2 * (k + 2) {
        return Err(Error::Estimator(format!(
            "knn_score needs k, splits >= 1 and n >= 2(k+2); n = {n}, k = {k}"
        )));
    }
    let (pts, moved) = jitter_duplicates(sample, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0xf15);
    let labels: Vec<Vec<bool>> = (0..splits)
        .map(|_| {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let mut lab = vec![false; n];
            for &i in &perm[..n / 2] {
                lab[i] = true;
            }
            lab
        })
        .collect();
    let value = cross_fit_mean(&pts, &labels, &vec![true; n], k);

    let group = group.filter(|&g| g > 0 && n.is_multiple_of(g) && n / g >= 2);
    let units = group.map_or(n, |g| n / g);
    let groups = JACKKNIFE_GROUPS.min(units);
    let mut unit_group: Vec<usize> = (0..units).map(|u| u % groups).collect();
    unit_group.shuffle(&mut rng);
    let of = |i: usize| unit_group[group.map_or(i, |g| i / g)];
    let loo: Vec<f64> = (0..groups)
        .map(|g| {
            let keep: Vec<bool> = (0..n).map(|i| of(i) != g).collect();
            cross_fit_mean(&pts, &labels, &keep, k)
        })
        .collect();
    let m = loo.iter().sum::<f64>() / groups as f64;
    let se = ((groups as f64 - 1.0) / groups as f64 * loo.iter().map(|x| (x - m).powi(2)).sum::<f64>()).sqrt();
    Ok(EstimatorReport::new("fisher_knn_score", value, se, n)
        .with("k", k as f64)
        .with("splits", splits as f64)
        .with("jackknife_groups", groups as f64)
        .with("jittered", moved as f64))
}

fn default_bandwidth(sample: &[Velocity]) -> f64 {
    let n = sample.len() as f64;
    let mean = sample.iter().fold(Velocity::ZERO, |a, &v| a + v) / n;
    let var = sample.iter().map(|&v| (v - mean).norm_sq()).sum::<f64>() / (3.0 * n);
    var.sqrt() * n.powf(-1.0 / 7.0)
}

struct Grid {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Grid {
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    /// Separable convolution with the three 1-d stencils (centred, odd length).
    fn convolve(&self, kx: &[f64], ky: &[f64], kz: &[f64]) -> Grid {
        let mut cur = self.data.clone();
        for (axis, ker) in [kx, ky, kz].into_iter().enumerate() {
            let half = (ker.len() / 2) as isize;
            let d = self.dims;
            let stride = match axis {
                0 => d[1] * d[2],
                1 => d[2],
                _ => 1,
            };
            let len = d[axis] as isize;
            let mut next = vec![0.0; cur.len()];
            next.par_chunks_mut(d[1] * d[2]).enumerate().for_each(|(i, slab)| {
                for j in 0..d[1] {
                    for k in 0..d[2] {
                        let pos = [i, j, k][axis] as isize;
                        let base = (i * d[1] + j) * d[2] + k - pos as usize * stride;
                        let mut s = 0.0;
                        for (m, &w) in ker.iter().enumerate() {
                            let q = pos + m as isize - half;
                            if q >= 0 && q < len {
                                s += w * cur[base + q as usize * stride];
                            }
                        }
                        slab[j * d[2] + k] = s;
                    }
                }
            });
            cur = next;
        }
        Grid {
            dims: self.dims,
            data: cur,
        }
    }
}

/// Plug-in `int |grad f_h|^2 / f_h` on a grid of spacing `h/3`, with the
/// sampling variance of `grad f_h` subtracted pointwise. For a standard
/// Gaussian this targets `3 / (1 + h^2 + dx^2/6)`, the Fisher information of
/// the smoothed density (the last term is the linear binning).
pub(crate) fn kde_fisher(sample: &[Velocity], h: f64, max_cells: usize) -> Result<f64> {
    let dx = h / 3.0;
    let pad = 4.0 * h + 2.0 * dx;
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for v in sample {
        let a = v.to_array();
        for d in 0..3 {
            lo[d] = lo[d].min(a[d]);
            hi[d] = hi[d].max(a[d]);
        }
    }
    let mut dims = [0usize; 3];
    let mut cells: f64 = 1.0;
    for d in 0..3 {
        lo[d] -= pad;
        dims[d] = ((hi[d] + pad - lo[d]) / dx).ceil() as usize + 1;
        cells *= dims[d] as f64;
    }
    if cells > max_cells as f64 {
        return Err(Error::Estimator(format!(
            "KDE grid overflow: {cells:.0} cells exceed the limit {max_cells} (bandwidth {h})"
        )));
    }
    let mut counts = Grid {
        dims,
        data: vec![0.0; cells as usize],
    };
    for v in sample {
        let a = v.to_array();
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for d in 0..3 {
            let u = (a[d] - lo[d]) / dx;
            base[d] = u.floor() as usize;
            frac[d] = u - base[d] as f64;
        }
        for c in 0..8 {
            let o = [(c >> 2) & 1, (c >> 1) & 1, c & 1];
            let mut w = 1.0;
            for d in 0..3 {
                w *= if o[d] == 1 { frac[d] } else { 1.0 - frac[d] };
            }
            let id = counts.idx(base[0] + o[0], base[1] + o[1], base[2] + o[2]);
            counts.data[id] += w;
        }
    }
    let m = (4.0 * h / dx).ceil() as isize;
    let norm = 1.0 / (h * (2.0 * PI).sqrt());
    let k: Vec<f64> = (-m..=m)
        .map(|i| norm * (-((i as f64 * dx).powi(2)) / (2.0 * h * h)).exp())
        .collect();
    let dk: Vec<f64> = (-m..=m).zip(&k).map(|(i, &w)| -(i as f64 * dx) / (h * h) * w).collect();
    let k2: Vec<f64> = k.iter().map(|w| w * w).collect();
    let dk2: Vec<f64> = dk.iter().map(|w| w * w).collect();
    let n = sample.len() as f64;
    let f = counts.convolve(&k, &k, &k);
    let g = [
        counts.convolve(&dk, &k, &k),
        counts.convolve(&k, &dk, &k),
        counts.convolve(&k, &k, &dk),
    ];
    let var = [
        counts.convolve(&dk2, &k2, &k2),
        counts.convolve(&k2, &dk2, &k2),
        counts.convolve(&k2, &k2, &dk2),
    ];
    let fmax = f.data.iter().cloned().fold(0.0, f64::max);
    let floor = 1e-6 * fmax;
    let mut total = 0.0;
    for c in 0..f.data.len() {
        let fc = f.data[c];
        if fc <= floor {
            continue;
        }
        let mut num = 0.0;
        for d in 0..3 {
            let gd = g[d].data[c] / n;
            let vd = var[d].data[c] / (n * n) - gd * gd / n;
            num += gd * gd - vd;
        }
        total += num / (fc / n);
    }
    Ok(total * dx * dx * dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, s: f64, seed: u64) -> Vec<Velocity> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let a: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
                Velocity::from_array(a) * s
            })
            .collect()
    }

    #[test]
    fn tilt_inverse_roundtrip() {
        for kappa in [1e-4, 0.05, 0.1, 0.5, 3.0, 30.0] {
            assert!((tilt_inverse(tilt_mean(kappa)) - kappa).abs() < 1e-9 * (1.0 + kappa));
        }
        assert!((tilt_mean(0.3 - 1e-13) - tilt_mean(0.3 + 1e-13)).abs() < 1e-12);
    }

    #[test]
    fn knn_gaussian_within_five_percent() {
        let r = fisher_estimate(&gaussian(100_000, 1.0, 1), &FisherMethod::default(), 3).unwrap();
        assert!((r.value - 3.0).abs() < 0.15, "{r:?}");
        assert!(r.std_error > 0.0);
    }

    #[test]
    fn knn_caps_k_on_small_samples() {
        let r = fisher_estimate(&gaussian(120, 1.0, 5), &FisherMethod::default(), 0).unwrap();
        assert_eq!(r.parameters["k"], 30.0);
        assert!(r.value.is_finite() && r.value > 0.0);
    }

    #[test]
    fn knn_scaling_law() {
        let x = gaussian(30_000, 1.0, 7);
        let y: Vec<Velocity> = x.iter().map(|&v| v * 0.5).collect();
        let ix = fisher_estimate(&x, &FisherMethod::default(), 1).unwrap();
        let iy = fisher_estimate(&y, &FisherMethod::default(), 1).unwrap();
        assert!((iy.value - 4.0 * ix.value).abs() < 1e-9 * iy.value);
    }

    #[test]
    fn knn_mixture_against_quadrature() {
        // x: equal mixture of N(+-a, s^2); y, z: N(0, s^2)
        let (a, s): (f64, f64) = (1.2, ((3.0 - 1.44) / 3.0f64).sqrt());
        let s2 = s * s;
        let i1 = integrate(
            |x| {
                let p = (-(x - a).powi(2) / (2.0 * s2)).exp();
                let q = (-(x + a).powi(2) / (2.0 * s2)).exp();
                let f = 0.5 * (p + q) / (s * (2.0 * PI).sqrt());
                let score = (-(x - a) * p - (x + a) * q) / ((p + q) * s2);
                if f > 0.0 {
                    f * score * score
                } else {
                    0.0
                }
            },
            -12.0,
            12.0,
            1e-12,
            1e-12,
            2000,
        )
        .unwrap()
        .value;
        let exact = i1 + 2.0 / s2;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<Velocity> = gaussian(30_000, s, 3)
            .into_iter()
            .map(|v| v + Velocity::new(if rng.random::<bool>() { a } else { -a }, 0.0, 0.0))
            .collect();
        let r = fisher_estimate(&x, &FisherMethod::default(), 5).unwrap();
        assert!((r.value - exact).abs() < 0.1 * exact, "{} vs {exact}", r.value);
    }

    #[test]
    fn kde_targets_smoothed_gaussian() {
        let h = 0.3;
        let dx = h / 3.0;
        let target = 3.0 / (1.0 + h * h + dx * dx / 6.0);
        let m = FisherMethod::KdePlugin {
            bandwidth: Some(h),
            max_cells: 1 << 23,
            bootstrap: 0,
        };
        let r = fisher_estimate(&gaussian(100_000, 1.0, 11), &m, 0).unwrap();
        assert!((r.value - target).abs() < 0.03 * target, "{} vs {target}", r.value);
    }

    #[test]
    fn kde_rejects_bad_bandwidth_and_overflow() {
        let x = gaussian(1000, 1.0, 1);
        let bad = FisherMethod::KdePlugin {
            bandwidth: Some(0.0),
            max_cells: 1 << 20,
            bootstrap: 0,
        };
        assert!(fisher_estimate(&x, &bad, 0).is_err());
        let tiny = FisherMethod::KdePlugin {
            bandwidth: Some(0.01),
            max_cells: 1 << 20,
            bootstrap: 0,
        };
        let e = fisher_estimate(&x, &tiny, 0).unwrap_err().to_string();
        assert!(e.contains("overflow"), "{e}");
        assert!(fisher_estimate(&x[..50], &FisherMethod::default(), 0).is_err());
    }
}
