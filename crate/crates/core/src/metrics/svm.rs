//! One-vs-one RBF support vector machine trained by SMO with second-order
//! working-set selection.

use std::collections::{HashMap, VecDeque};
use std::rc::Rc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::hypercube::HyperCube;
use crate::phantom::LabelMap;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    /// training pixels per class; `None` means `min(10000, available)`
    pub per_class: Option<usize>,
    /// RBF width; `None` means `1 / Z_S`
    pub gamma: Option<f64>,
    /// box constraint
    pub c: f64,
    /// KKT violation tolerance
    pub tolerance: f64,
    pub seed: u64,
    /// kernel cache budget in MiB
    pub cache_mib: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { per_class: None, gamma: None, c: 10.0, tolerance: 1e-3, seed: 0, cache_mib: 256 }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct PairModel {
    /// positive class (`+1`) and negative class, as label values
    positive: usize,
    negative: usize,
    /// indices into the model's support vectors
    support: Vec<usize>,
    /// `αᵢyᵢ`
    coef: Vec<f64>,
    rho: f64,
}

/// Trained classifier; features are standardized with the stored statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    n_features: usize,
    mean: Vec<f64>,
    scale: Vec<f64>,
    gamma: f64,
    c: f64,
    /// labels with training data, ascending
    classes: Vec<usize>,
    class_names: Vec<String>,
    /// standardized support vectors, row-major
    support: Vec<f64>,
    pairs: Vec<PairModel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedSvm {
    pub model: SvmModel,
    pub training_accuracy: f64,
    /// `(class, available)` for classes with fewer pixels than requested
    pub short_classes: Vec<(usize, usize)>,
}

impl SvmModel {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn n_support(&self) -> usize {
        self.support.len() / self.n_features.max(1)
    }

    /// Every pairwise dual coefficient, for inspection.
    pub fn dual_coefficients(&self) -> impl Iterator<Item = f64> + '_ {
        self.pairs.iter().flat_map(|p| p.coef.iter().copied())
    }

    pub fn box_constraint(&self) -> f64 {
        self.c
    }

    fn standardize(&self, raw: impl Iterator<Item = f64>, out: &mut [f64]) {
        for ((o, v), (m, s)) in out.iter_mut().zip(raw).zip(self.mean.iter().zip(&self.scale)) {
            *o = (v - m) / s;
        }
    }

    /// Predicted label for one standardized feature vector.
    fn predict_standardized(&self, x: &[f64], kernel: &mut Vec<f64>) -> usize {
        let d = self.n_features;
        kernel.clear();
        kernel.extend(self.support.chunks(d).map(|sv| rbf(sv, x, self.gamma)));
        let mut votes: HashMap<usize, usize> = HashMap::new();
        for pair in &self.pairs {
            let f: f64 = pair.support.iter().zip(&pair.coef).map(|(&s, c)| c * kernel[s]).sum::<f64>() - pair.rho;
            *votes.entry(if f > 0.0 { pair.positive } else { pair.negative }).or_default() += 1;
        }
        // most votes; ties toward the lower label
        self.classes
            .iter()
            .copied()
            .max_by_key(|c| (votes.get(c).copied().unwrap_or(0), std::cmp::Reverse(*c)))
            .expect("classes")
    }

    fn predict_rows(&self, rows: &[f64]) -> Vec<usize> {
        let d = self.n_features;
        rows.par_chunks(d).map_init(Vec::new, |k, x| self.predict_standardized(x, k)).collect()
    }
}

#[inline]
fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// Binary SMO on `x` (row-major, `d` features) with labels `y ∈ {±1}`.
/// Returns `(α, ρ)` for the decision `Σ αᵢyᵢK(xᵢ,·) - ρ`.
fn smo(x: &[f64], d: usize, y: &[f64], gamma: f64, c: f64, eps: f64, cache_rows: usize) -> (Vec<f64>, f64) {
    const TAU: f64 = 1e-12;
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut cache: HashMap<usize, Rc<Vec<f64>>> = HashMap::new();
    let mut order: VecDeque<usize> = VecDeque::new();
    let mut row = |i: usize| -> Rc<Vec<f64>> {
        if let Some(r) = cache.get(&i) {
            return r.clone();
        }
        let xi = &x[i * d..(i + 1) * d];
        let q: Vec<f64> = if n > 2048 {
            x.par_chunks(d).zip(y.par_iter()).map(|(xt, yt)| y[i] * yt * rbf(xi, xt, gamma)).collect()
        } else {
            x.chunks(d).zip(y).map(|(xt, yt)| y[i] * yt * rbf(xi, xt, gamma)).collect()
        };
        let q = Rc::new(q);
        if order.len() >= cache_rows {
            if let Some(old) = order.pop_front() {
                cache.remove(&old);
            }
        }
        order.push_back(i);
        cache.insert(i, q.clone());
        q
    };
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    let max_iter = (100 * n).max(10_000_000);

    for _ in 0..max_iter {
        // i: maximal violator in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let in_up = if y[t] > 0.0 { !upper(alpha[t]) } else { !lower(alpha[t]) };
            if in_up && v >= gmax {
                gmax = v;
                i = t;
            }
        }
        if i == usize::MAX {
            break;
        }
        let qi = row(i);
        // j: second-order gain in I_low
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            let in_low = if y[t] > 0.0 { !lower(alpha[t]) } else { !upper(alpha[t]) };
            if !in_low {
                continue;
            }
            let v = -y[t] * grad[t];
            gmax2 = gmax2.max(-v);
            let diff = gmax - v;
            if diff > 0.0 {
                // K_ii = K_tt = 1 for the RBF kernel
                let quad = 2.0 - 2.0 * y[i] * y[t] * qi[t];
                let quad = if quad > 0.0 { quad } else { TAU };
                let gain = -diff * diff / quad;
                if gain <= best {
                    best = gain;
                    j = t;
                }
            }
        }
        if gmax + gmax2 < eps || j == usize::MAX {
            break;
        }
        let qj = row(j);
        let (ai, aj) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (2.0 + 2.0 * qi[j]).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (2.0 - 2.0 * qi[j]).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai, alpha[j] - aj);
        for t in 0..n {
            grad[t] += qi[t] * di + qj[t] * dj;
        }
    }

    // bias from free vectors, or the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { 0.5 * (ub + lb) };
    (alpha, rho)
}

/// Trains on a seeded per-class sample of the labelled cube.
pub fn train_svm<T: Real>(
    cube: &HyperCube<T>,
    labels: &LabelMap,
    params: &SvmParams,
) -> Result<TrainedSvm, MetricsError> {
    if labels.width() != cube.width() || labels.height() != cube.height() {
        return Err(MetricsError::Shape(format!(
            "{}x{} labels for a {}x{} cube",
            labels.width(),
            labels.height(),
            cube.width(),
            cube.height()
        )));
    }
    if !(params.c > 0.0 && params.tolerance > 0.0) || params.gamma.is_some_and(|g| !(g > 0.0)) {
        return Err(MetricsError::InvalidParameter(format!("{params:?}")));
    }
    let d = cube.bands();
    let gamma = params.gamma.unwrap_or(1.0 / d as f64);
    let requested = params.per_class.unwrap_or(10_000);
    if requested == 0 {
        return Err(MetricsError::InvalidParameter("per_class must be positive".into()));
    }

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); labels.n_classes()];
    for (p, &l) in labels.labels().iter().enumerate() {
        by_class[l].push(p);
    }
    let classes: Vec<usize> = (0..by_class.len()).filter(|&c| !by_class[c].is_empty()).collect();
    if classes.len() < 2 {
        return Err(MetricsError::TooFewClasses(classes.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut short_classes = Vec::new();
    let mut picked: Vec<(usize, usize)> = Vec::new();
    for &c in &classes {
        let pool = &by_class[c];
        if pool.len() < requested {
            short_classes.push((c, pool.len()));
        }
        let mut idx = sample(&mut rng, pool.len(), requested.min(pool.len())).into_vec();
        idx.sort_unstable();
        picked.extend(idx.into_iter().map(|i| (pool[i], c)));
    }

    // standardization statistics over the training set
    let n = picked.len();
    let plane = cube.n_pixels();
    let vals = cube.values();
    let mut raw = vec![0.0; n * d];
    for (s, &(p, _)) in picked.iter().enumerate() {
        for b in 0..d {
            raw[s * d + b] = vals[b * plane + p].as_f64();
        }
    }
    let mut mean = vec![0.0; d];
    for row in raw.chunks(d) {
        mean.iter_mut().zip(row).for_each(|(m, v)| *m += v / n as f64);
    }
    let mut scale = vec![0.0; d];
    for row in raw.chunks(d) {
        scale.iter_mut().zip(row.iter().zip(&mean)).for_each(|(s, (v, m))| *s += (v - m).powi(2) / n as f64);
    }
    scale.iter_mut().for_each(|s| *s = if *s > 0.0 { s.sqrt() } else { 1.0 });
    let feats: Vec<f64> =
        raw.chunks(d).flat_map(|row| row.iter().zip(mean.iter().zip(&scale)).map(|(v, (m, s))| (v - m) / s)).collect();

    let cache_rows = |m: usize| ((params.cache_mib << 20) / (8 * m.max(1))).max(2);
    let mut support_of: HashMap<usize, usize> = HashMap::new();
    let mut support = Vec::new();
    let mut pairs = Vec::new();
    for (ai, &a) in classes.iter().enumerate() {
        for &b in &classes[ai + 1..] {
            let members: Vec<usize> = (0..n).filter(|&s| picked[s].1 == a || picked[s].1 == b).collect();
            let x: Vec<f64> = members.iter().flat_map(|&s| feats[s * d..(s + 1) * d].iter().copied()).collect();
            let y: Vec<f64> = members.iter().map(|&s| if picked[s].1 == a { 1.0 } else { -1.0 }).collect();
            let (alpha, rho) = smo(&x, d, &y, gamma, params.c, params.tolerance, cache_rows(members.len()));
            let mut pair = PairModel { positive: a, negative: b, support: Vec::new(), coef: Vec::new(), rho };
            for (t, &s) in members.iter().enumerate() {
                if alpha[t] > 0.0 {
                    let next = support_of.len();
                    let idx = *support_of.entry(s).or_insert_with(|| {
                        support.extend_from_slice(&feats[s * d..(s + 1) * d]);
                        next
                    });
                    pair.support.push(idx);
                    pair.coef.push(alpha[t] * y[t]);
                }
            }
            pairs.push(pair);
        }
    }

    let model = SvmModel {
        n_features: d,
        mean,
        scale,
        gamma,
        c: params.c,
        classes,
        class_names: labels.class_names().to_vec(),
        support,
        pairs,
    };
    let predicted = model.predict_rows(&feats);
    let hits = predicted.iter().zip(&picked).filter(|(p, (_, c))| *p == c).count();
    Ok(TrainedSvm { model, training_accuracy: hits as f64 / n as f64, short_classes })
}

/// Labels every pixel of `cube`.
pub fn classify<T: Real>(model: &SvmModel, cube: &HyperCube<T>) -> Result<LabelMap, MetricsError> {
    if cube.bands() != model.n_features {
        return Err(MetricsError::FeatureCount { expected: model.n_features, actual: cube.bands() });
    }
    let plane = cube.n_pixels();
    let vals = cube.values();
    let d = model.n_features;
    let labels: Vec<usize> = (0..plane)
        .into_par_iter()
        .map_init(
            || (vec![0.0; d], Vec::new()),
            |(x, k), p| {
                model.standardize((0..d).map(|b| vals[b * plane + p].as_f64()), x);
                model.predict_standardized(x, k)
            },
        )
        .collect();
    LabelMap::new(cube.width(), cube.height(), labels, model.class_names.clone())
        .map_err(|e| MetricsError::Shape(e.to_string()))
}
