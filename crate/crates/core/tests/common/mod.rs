//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use imbalance_kit::dataset::Dataset;
use imbalance_kit::matrix::Matrix;
use imbalance_kit::metrics::{ConfusionMatrix, MetricsReport};
use imbalance_kit::resampling::{ResampleResult, SamplerConfig, SamplerKind};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/keel")
}

/// Bundled fixtures with their published (attributes, samples, ratio).
pub const PUBLISHED_DESCRIPTORS: [(&str, usize, usize, &str); 20] = [
    ("wisconsin", 9, 683, "1.86"),
    ("pima", 8, 768, "1.87"),
    ("iris0", 4, 150, "2.00"),
    ("glass0", 9, 214, "2.06"),
    ("glass1", 9, 214, "1.82"),
    ("glass6", 9, 214, "6.38"),
    ("yeast1", 8, 1484, "2.46"),
    ("haberman", 3, 306, "2.78"),
    ("vehicle1", 18, 846, "2.90"),
    ("vehicle2", 18, 846, "2.88"),
    ("vehicle3", 18, 846, "2.99"),
    ("ecoli1", 7, 336, "3.36"),
    ("ecoli2", 7, 336, "5.46"),
    ("ecoli3", 7, 336, "8.60"),
    ("new-thyroid1", 5, 215, "5.14"),
    ("new-thyroid2", 5, 215, "5.14"),
    ("segment0", 19, 2308, "6.02"),
    ("yeast3", 8, 1484, "8.10"),
    ("page-blocks0", 10, 5472, "8.79"),
    ("yeast-2_vs_4", 8, 514, "9.08"),
];

pub fn load_fixture(name: &str) -> Dataset {
    Dataset::load(&fixture_dir().join(format!("{name}.dat")), None).unwrap()
}

// ---------------------------------------------------------------- datasets

/// Random binary dataset with `n <= 200`, `d <= 10`, imbalance ratio in
/// `[1.5, 10]` and labels scattered over the rows. Every other dataset uses a
/// small integer grid so that distance ties are common.
pub fn random_dataset(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(30..=200usize);
    let d = rng.gen_range(1..=10usize);
    let ir: f64 = rng.gen_range(1.5..=10.0);
    let n_min = ((n as f64 / (1.0 + ir)).round() as usize).max(3);
    let grid = seed.is_multiple_of(2);
    let data: Vec<f64> = (0..n * d)
        .map(|_| if grid { rng.gen_range(0..4) as f64 } else { rng.gen_range(-5.0..5.0) })
        .collect();
    let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i < n_min)).collect();
    labels.shuffle(&mut rng);
    let names = (0..d).map(|j| format!("x{j}")).collect();
    Dataset::new(format!("random{seed}"), Matrix::from_vec(n, d, data), labels, names).unwrap()
}

// ---------------------------------------------------------------- samplers

fn dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += (x - y) * (x - y);
    }
    s.sqrt()
}

fn distance_matrix(ds: &Dataset) -> Vec<Vec<f64>> {
    let f = ds.features();
    (0..ds.n_samples()).map(|i| (0..ds.n_samples()).map(|j| dist(f.row(i), f.row(j))).collect()).collect()
}

/// `candidates` ordered by (distance to `q`, index).
fn ranked(dm: &[Vec<f64>], q: usize, candidates: &[usize]) -> Vec<usize> {
    let mut c = candidates.to_vec();
    c.sort_by(|&a, &b| dm[q][a].partial_cmp(&dm[q][b]).unwrap().then(a.cmp(&b)));
    c
}

fn by_label(ds: &Dataset, label: u8) -> Vec<usize> {
    (0..ds.n_samples()).filter(|&i| ds.labels()[i] == label).collect()
}

/// What a sampler is expected to produce.
#[derive(Debug, PartialEq)]
pub struct Expected {
    pub removed: Vec<usize>,
    pub duplicated: Vec<usize>,
    /// `(base, neighbor, lambda)` per synthetic row.
    pub lineage: Vec<(usize, usize, f64)>,
    pub features: Vec<f64>,
    pub labels: Vec<u8>,
}

fn undersample(ds: &Dataset, mut removed: Vec<usize>) -> Option<Expected> {
    removed.sort_unstable();
    removed.dedup();
    let keep: Vec<usize> = (0..ds.n_samples()).filter(|i| !removed.contains(i)).collect();
    let labels: Vec<u8> = keep.iter().map(|&i| ds.labels()[i]).collect();
    if !labels.contains(&0) || !labels.contains(&1) {
        return None;
    }
    let features = keep.iter().flat_map(|&i| ds.features().row(i).to_vec()).collect();
    Some(Expected { removed, duplicated: vec![], lineage: vec![], features, labels })
}

fn oversample(ds: &Dataset, rows: &[Vec<f64>], duplicated: Vec<usize>, lineage: Vec<(usize, usize, f64)>) -> Expected {
    let mut features = ds.features().as_slice().to_vec();
    let mut labels = ds.labels().to_vec();
    for r in rows {
        features.extend_from_slice(r);
        labels.push(1);
    }
    Expected { removed: vec![], duplicated, lineage, features, labels }
}

fn round_count(x: f64) -> usize {
    x.round().max(0.0) as usize
}

/// Brute-force Tomek links within `rows`: cross-class pairs with no third row
/// of `rows` strictly closer to either end.
fn tomek_pairs(ds: &Dataset, dm: &[Vec<f64>], rows: &[usize]) -> Vec<(usize, usize)> {
    let y = ds.labels();
    let mut out = Vec::new();
    for (a, &i) in rows.iter().enumerate() {
        for &j in &rows[a + 1..] {
            if y[i] == y[j] {
                continue;
            }
            let d = dm[i][j];
            let blocked = rows.iter().any(|&k| k != i && k != j && (dm[i][k] < d || dm[j][k] < d));
            if !blocked {
                out.push((i, j));
            }
        }
    }
    out
}

/// O(n^2) reimplementation of every sampler. `None` means the sampler must
/// fail (too few rows or a vanished class).
pub fn oracle(kind: SamplerKind, ds: &Dataset, cfg: &SamplerConfig) -> Option<Expected> {
    let dm = distance_matrix(ds);
    let min = by_label(ds, 1);
    let maj = by_label(ds, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    match kind {
        SamplerKind::Ros => {
            let extra = round_count(maj.len() as f64 * cfg.target_ratio).saturating_sub(min.len());
            let dup: Vec<usize> = (0..extra).map(|_| min[rng.gen_range(0..min.len())]).collect();
            let rows: Vec<Vec<f64>> = dup.iter().map(|&i| ds.features().row(i).to_vec()).collect();
            Some(oversample(ds, &rows, dup, vec![]))
        }
        SamplerKind::Rus => {
            let target = round_count(min.len() as f64 / cfg.target_ratio);
            if target == 0 {
                return None;
            }
            let drop = maj.len().saturating_sub(target);
            let mut pool = maj.clone();
            for i in 0..drop {
                let j = rng.gen_range(i..pool.len());
                pool.swap(i, j);
            }
            undersample(ds, pool[..drop].to_vec())
        }
        SamplerKind::Smote => {
            if min.len() < 2 {
                return None;
            }
            let extra = round_count(maj.len() as f64 * cfg.target_ratio).saturating_sub(min.len());
            let k = cfg.smote_k.min(min.len() - 1);
            let (mut rows, mut lineage) = (Vec::new(), Vec::new());
            for _ in 0..extra {
                let pos = rng.gen_range(0..min.len());
                let rank = rng.gen_range(0..k);
                let lambda: f64 = rng.gen_range(0.0..=1.0);
                let base = min[pos];
                let others: Vec<usize> = min.iter().copied().filter(|&i| i != base).collect();
                let neighbor = ranked(&dm, base, &others)[rank];
                let (b, n) = (ds.features().row(base), ds.features().row(neighbor));
                rows.push(b.iter().zip(n).map(|(b, n)| b + lambda * (n - b)).collect());
                lineage.push((base, neighbor, lambda));
            }
            Some(oversample(ds, &rows, vec![], lineage))
        }
        SamplerKind::TomekLinks => {
            let all: Vec<usize> = (0..ds.n_samples()).collect();
            let removed =
                tomek_pairs(ds, &dm, &all).into_iter().map(|(i, j)| if ds.labels()[i] == 0 { i } else { j }).collect();
            undersample(ds, removed)
        }
        SamplerKind::Oss => {
            let seed_row = maj[rng.gen_range(0..maj.len())];
            let mut store = min.clone();
            store.push(seed_row);
            for &r in &maj {
                if r == seed_row {
                    continue;
                }
                let nearest = ranked(&dm, r, &store)[0];
                if ds.labels()[nearest] == 1 {
                    store.push(r);
                }
            }
            store.sort_unstable();
            let mut removed: Vec<usize> = maj.iter().copied().filter(|i| !store.contains(i)).collect();
            for (i, j) in tomek_pairs(ds, &dm, &store) {
                removed.push(if ds.labels()[i] == 0 { i } else { j });
            }
            undersample(ds, removed)
        }
        SamplerKind::NearMiss1 | SamplerKind::NearMiss2 => {
            let m = cfg.nearmiss_m;
            if min.len() < m {
                return None;
            }
            let target = round_count(min.len() as f64 / cfg.target_ratio);
            if target == 0 {
                return None;
            }
            let mut scored: Vec<(f64, usize)> = maj
                .iter()
                .map(|&r| {
                    let order = ranked(&dm, r, &min);
                    let chosen = if kind == SamplerKind::NearMiss1 { &order[..m] } else { &order[order.len() - m..] };
                    let mut s = 0.0;
                    for &c in chosen {
                        s += dm[r][c];
                    }
                    (s / m as f64, r)
                })
                .collect();
            scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let kept: Vec<usize> = scored.iter().take(target).map(|s| s.1).collect();
            undersample(ds, maj.iter().copied().filter(|i| !kept.contains(i)).collect())
        }
        SamplerKind::NearMiss3 => {
            let per = cfg.nearmiss3_per_minority.min(maj.len());
            let mut kept = Vec::new();
            for &p in &min {
                kept.extend_from_slice(&ranked(&dm, p, &maj)[..per]);
            }
            undersample(ds, maj.iter().copied().filter(|i| !kept.contains(i)).collect())
        }
    }
}

fn observed(r: &ResampleResult) -> Expected {
    Expected {
        removed: r.removed_indices.clone(),
        duplicated: r.duplicated_indices.clone(),
        lineage: r.synthetic_lineage.iter().map(|s| (s.base, s.neighbor, s.lambda)).collect(),
        features: r.dataset.features().as_slice().to_vec(),
        labels: r.dataset.labels().to_vec(),
    }
}

/// Compares the library sampler with the oracle; `Err` describes the mismatch.
pub fn check_sampler(kind: SamplerKind, ds: &Dataset, cfg: &SamplerConfig) -> Result<(), String> {
    let got = imbalance_kit::resampling::resample(kind, ds, cfg);
    match (got, oracle(kind, ds, cfg)) {
        (Ok(r), Some(e)) => {
            let o = observed(&r);
            if o == e {
                Ok(())
            } else {
                Err(format!(
                    "{kind} on {}: removed {:?} vs {:?}, dup {} vs {}, lineage {} vs {}",
                    ds.name,
                    o.removed,
                    e.removed,
                    o.duplicated.len(),
                    e.duplicated.len(),
                    o.lineage.len(),
                    e.lineage.len()
                ))
            }
        }
        (Err(_), None) => Ok(()),
        (Ok(_), None) => Err(format!("{kind} on {}: library succeeded, oracle expected failure", ds.name)),
        (Err(err), Some(_)) => Err(format!("{kind} on {}: library failed ({err}), oracle succeeded", ds.name)),
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Checks every synthetic row of a SMOTE run; returns how many were checked.
pub fn check_smote_geometry(ds: &Dataset, k: usize, seed: u64) -> usize {
    let cfg = SamplerConfig { smote_k: k, ..SamplerConfig::default() }.with_seed(seed);
    let out = imbalance_kit::resampling::resample(SamplerKind::Smote, ds, &cfg).unwrap();
    let f = ds.features();
    let minority = ds.indices_of(1);
    let k_eff = k.min(minority.len() - 1);
    let n = ds.n_samples();
    assert_eq!(out.dataset.n_samples(), n + out.synthetic_lineage.len());
    for (s, origin) in out.synthetic_lineage.iter().enumerate() {
        let base = f.row(origin.base);
        let nb = f.row(origin.neighbor);
        assert_eq!(ds.labels()[origin.base], 1);
        assert!((0.0..1.0).contains(&origin.lambda), "lambda {}", origin.lambda);

        let row = out.dataset.features().row(n + s);
        for j in 0..ds.n_features() {
            let expected = base[j] + origin.lambda * (nb[j] - base[j]);
            assert!((row[j] - expected).abs() <= 1e-9, "{}: synthetic row {s} off its segment", ds.name);
        }
        assert_eq!(out.dataset.labels()[n + s], 1);

        let mut others: Vec<usize> = minority.iter().copied().filter(|&i| i != origin.base).collect();
        others.sort_by(|&a, &b| {
            squared_distance(base, f.row(a)).total_cmp(&squared_distance(base, f.row(b))).then(a.cmp(&b))
        });
        assert!(
            others[..k_eff].contains(&origin.neighbor),
            "{}: neighbor {} not among the {k_eff} nearest minority rows of {}",
            ds.name,
            origin.neighbor,
            origin.base
        );
    }
    out.synthetic_lineage.len()
}

// ---------------------------------------------------------------- metrics

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Exact rational with a positive denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Q(pub i128, pub i128);

impl Q {
    pub fn new(n: i128, d: i128) -> Option<Q> {
        if d == 0 {
            return None;
        }
        let g = gcd(n, d).max(1);
        let s = if d < 0 { -1 } else { 1 };
        Some(Q(s * n / g, s * d / g))
    }
    fn add(self, o: Q) -> Q {
        Q::new(self.0 * o.1 + o.0 * self.1, self.1 * o.1).unwrap()
    }
    fn sub(self, o: Q) -> Q {
        Q::new(self.0 * o.1 - o.0 * self.1, self.1 * o.1).unwrap()
    }
    fn mul(self, o: Q) -> Q {
        Q::new(self.0 * o.0, self.1 * o.1).unwrap()
    }
    fn div(self, o: Q) -> Option<Q> {
        Q::new(self.0 * o.1, self.1 * o.0)
    }
    pub fn to_f64(self) -> f64 {
        self.0 as f64 / self.1 as f64
    }
}

/// Metrics from their textbook definitions, evaluated in exact rationals
/// and rounded once at the end.
pub fn brute_metrics(labels: &[u8], preds: &[u8]) -> (ConfusionMatrix, MetricsReport) {
    let mut cm = ConfusionMatrix::default();
    for (&y, &p) in labels.iter().zip(preds) {
        match (y, p) {
            (1, 1) => cm.tp += 1,
            (1, 0) => cm.fn_ += 1,
            (0, 1) => cm.fp += 1,
            _ => cm.tn += 1,
        }
    }
    let (tp, fn_, fp, tn) = (cm.tp as i128, cm.fn_ as i128, cm.fp as i128, cm.tn as i128);
    let n = tp + fn_ + fp + tn;
    let precision = Q::new(tp, tp + fp);
    let recall = Q::new(tp, tp + fn_);
    let specificity = Q::new(tn, tn + fp);
    // harmonic mean where it exists, else the count form 2TP / (2TP + FP + FN)
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p.0 + r.0 > 0 => Q(2, 1).mul(p).mul(r).div(p.add(r)),
        _ => Q::new(2 * tp, 2 * tp + fp + fn_),
    };
    let g_mean = match (recall, specificity) {
        (Some(r), Some(s)) => Some(r.mul(s).to_f64().sqrt()),
        _ => None,
    };
    let po = Q::new(tp + tn, n).unwrap();
    let pe = Q::new(tp + fp, n)
        .unwrap()
        .mul(Q::new(tp + fn_, n).unwrap())
        .add(Q::new(fn_ + tn, n).unwrap().mul(Q::new(fp + tn, n).unwrap()));
    let kappa = po.sub(pe).div(Q(1, 1).sub(pe));
    let report = MetricsReport {
        accuracy: Some(po.to_f64()),
        precision: precision.map(Q::to_f64),
        recall: recall.map(Q::to_f64),
        f1: f1.map(Q::to_f64),
        g_mean,
        specificity: specificity.map(Q::to_f64),
        kappa: kappa.map(Q::to_f64),
        auc: None,
    };
    (cm, report)
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn rank_statistic(labels: &[u8], scores: &[f64]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &yi) in labels.iter().enumerate() {
        if yi != 1 {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj != 0 {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

// ---------------------------------------------------------------- gradients

/// `|a - b| / max(|a|, |b|)`, or the absolute difference when both are below
/// `floor` (where the finite difference itself is dominated by rounding).
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < floor {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

/// Central difference of `f` at `x` with step `h`.
pub fn central_diff(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

use imbalance_kit::nn::{
    bce_loss, focal_loss, init_model, ForwardMode, LayerSpec, ModelKind, ModelSpec, ModelState, Tensor,
};

pub const FD_STEP: f64 = 1e-4;
/// Gradients smaller than this are compared absolutely.
pub const FD_FLOOR: f64 = 1e-7;
/// Full models produce objectives near 10 and gradients near 1e-7, where
/// central-difference roundoff (`eps * |f| / h`) reaches 1e-11.
pub const STOCK_FD_FLOOR: f64 = 1e-6;

/// Layer families whose gradients are checked.
pub const GRAD_FAMILIES: [&str; 5] = ["dense", "conv1d", "batchnorm", "dropout", "relu"];

fn bn(features: usize) -> LayerSpec {
    LayerSpec::BatchNorm1d { features, epsilon: 1e-5, momentum: 0.1 }
}

/// A random small network exercising one layer family.
pub fn family_spec(family: &str, rng: &mut ChaCha8Rng) -> ModelSpec {
    let d = rng.gen_range(1..=5usize);
    let h = rng.gen_range(2..=6usize);
    let (kind, layers, width) = match family {
        "dense" => (
            ModelKind::Dnn,
            vec![LayerSpec::Dense { inputs: d, outputs: h }, LayerSpec::Dense { inputs: h, outputs: 1 }],
            d,
        ),
        "conv1d" => {
            let len = rng.gen_range(4..=8usize);
            let (c1, k1, s1) = (rng.gen_range(1..=3usize), rng.gen_range(1..=3usize), rng.gen_range(1..=2usize));
            let l1 = (len - k1) / s1 + 1;
            let (c2, k2) = (rng.gen_range(1..=3usize), rng.gen_range(1..=l1.min(2)));
            let l2 = l1 - k2 + 1;
            (
                ModelKind::Cnn,
                vec![
                    LayerSpec::Conv1d { in_channels: 1, out_channels: c1, kernel: k1, stride: s1 },
                    LayerSpec::Conv1d { in_channels: c1, out_channels: c2, kernel: k2, stride: 1 },
                    LayerSpec::Flatten,
                    LayerSpec::Dense { inputs: c2 * l2, outputs: 1 },
                ],
                len,
            )
        }
        "batchnorm" => (
            ModelKind::Dnn,
            vec![LayerSpec::Dense { inputs: d, outputs: h }, bn(h), LayerSpec::Dense { inputs: h, outputs: 1 }],
            d,
        ),
        "dropout" => (
            ModelKind::Dnn,
            vec![
                LayerSpec::Dense { inputs: d, outputs: h },
                LayerSpec::Dropout { rate: rng.gen_range(0.1..0.6) },
                LayerSpec::Dense { inputs: h, outputs: 1 },
            ],
            d,
        ),
        "relu" => (
            ModelKind::Dnn,
            vec![
                LayerSpec::Dense { inputs: d, outputs: h },
                LayerSpec::Relu,
                LayerSpec::Dense { inputs: h, outputs: h },
                LayerSpec::Relu,
                LayerSpec::Dense { inputs: h, outputs: 1 },
            ],
            d,
        ),
        other => panic!("unknown family {other}"),
    };
    ModelSpec::custom(kind, layers, width).unwrap()
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>, lo: f64, hi: f64) -> Tensor {
    let len = shape.iter().product();
    Tensor::new(shape, (0..len).map(|_| rng.gen_range(lo..hi)).collect())
}

/// Initializes `spec` and replaces every trainable value with `U(-1, 1)`.
pub fn randomized_state(spec: &ModelSpec, rng: &mut ChaCha8Rng) -> ModelState {
    let mut state = init_model(spec, rng.gen());
    for layer in state.layers.iter_mut() {
        for t in layer.trainable_mut() {
            for v in t.values_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
    }
    state
}

/// Objective `sum(c * logits)` and the on/off pattern of every ReLU input.
fn probe_forward(s: &ModelState, x: &Tensor, mode: ForwardMode, c: &Tensor) -> (f64, Vec<bool>) {
    let (y, cache) = s.forward(x, mode).unwrap();
    let mut pattern = Vec::new();
    for (i, layer) in s.spec.layers().iter().enumerate() {
        if *layer == LayerSpec::Relu {
            pattern.extend(cache.layer_input(i).unwrap().values().iter().map(|&v| v > 0.0));
        }
    }
    (y.values().iter().zip(c.values()).map(|(a, b)| a * b).sum(), pattern)
}

/// Finite-difference scheme for [`model_grad_error`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdScheme {
    /// `(f(t+h) - f(t-h)) / 2h`.
    Central,
    /// `(4 D(h/2) - D(h)) / 3` over central differences `D`, which cancels
    /// the `h^2` term. Needed where tiny gradients sit next to large
    /// curvature (full models with batchnorm on 6 rows).
    Richardson,
}

/// Largest relative error between `backward` and finite differences of
/// `sum(c * logits)` over every parameter, for one train-mode batch.
///
/// The step is `FD_STEP` unless some probe switches a ReLU on or off; then
/// it shrinks by 10x (down to 1e-9) until every probe stays on the piece
/// containing `theta`, where the analytic gradient is defined.
pub fn model_grad_error(state: &ModelState, x: &Tensor, mask_seed: u64, c: &Tensor, scheme: FdScheme, floor: f64) -> f64 {
    let mode = ForwardMode::Train { mask_seed };
    let (_, cache) = state.forward(x, mode).unwrap();
    let grads = state.backward(&cache, c).unwrap();
    let (_, base_pattern) = probe_forward(state, x, mode, c);
    let mut probe = state.clone();
    let mut worst: f64 = 0.0;
    for (l, layer_grads) in grads.layers.iter().enumerate() {
        for (p, g) in layer_grads.iter().enumerate() {
            for e in 0..g.len() {
                let original = probe.layers[l].trainable()[p].values()[e];
                // Central difference at step h, or None if a probe crossed a kink.
                let mut diff = |h: f64| -> Option<f64> {
                    probe.layers[l].trainable_mut()[p].values_mut()[e] = original + h;
                    let (up, pu) = probe_forward(&probe, x, mode, c);
                    probe.layers[l].trainable_mut()[p].values_mut()[e] = original - h;
                    let (down, pd) = probe_forward(&probe, x, mode, c);
                    probe.layers[l].trainable_mut()[p].values_mut()[e] = original;
                    (pu == base_pattern && pd == base_pattern).then(|| (up - down) / (2.0 * h))
                };
                let mut h = FD_STEP;
                let numeric = loop {
                    let estimate = match scheme {
                        FdScheme::Central => diff(h),
                        FdScheme::Richardson => diff(h).zip(diff(h / 2.0)).map(|(a, b)| (4.0 * b - a) / 3.0),
                    };
                    match estimate {
                        Some(v) => break v,
                        None if h < 1e-9 => panic!("layer {l} param {p} element {e}: kink within 1e-9"),
                        None => h /= 10.0,
                    }
                };
                worst = worst.max(rel_err(g.values()[e], numeric, floor));
            }
        }
    }
    worst
}

/// One random configuration of `family`; returns the worst relative error.
pub fn family_grad_error(family: &str, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = family_spec(family, &mut rng);
    let state = randomized_state(&spec, &mut rng);
    let n = rng.gen_range(3..=8usize);
    let x = random_tensor(&mut rng, vec![n, spec.input_width()], -2.0, 2.0);
    let c = random_tensor(&mut rng, vec![n, 1], -1.0, 1.0);
    model_grad_error(&state, &x, rng.gen(), &c, FdScheme::Central, FD_FLOOR)
}

/// Stock DNN or CNN on a 6-sample batch.
pub fn stock_grad_error(kind: ModelKind, d: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = ModelSpec::new(kind, d);
    let state = randomized_state(&spec, &mut rng);
    let x = random_tensor(&mut rng, vec![6, d], 0.0, 1.0);
    let c = random_tensor(&mut rng, vec![6, 1], -1.0, 1.0);
    model_grad_error(&state, &x, rng.gen(), &c, FdScheme::Richardson, STOCK_FD_FLOOR)
}

/// Worst relative error of a loss gradient with respect to the logits.
pub fn loss_grad_error(focal: Option<(f64, f64)>, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=10usize);
    let logits: Vec<f64> = (0..n).map(|_| rng.gen_range(-6.0..6.0)).collect();
    let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
    let loss = |z: &[f64]| -> (f64, Tensor) {
        let t = Tensor::new(vec![n, 1], z.to_vec());
        match focal {
            Some((a, g)) => focal_loss(&t, &labels, a, g).unwrap(),
            None => bce_loss(&t, &labels).unwrap(),
        }
    };
    let (_, grad) = loss(&logits);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let mut z = logits.clone();
        let numeric = central_diff(
            |v| {
                z[i] = v;
                loss(&z).0
            },
            logits[i],
            FD_STEP,
        );
        worst = worst.max(rel_err(grad.values()[i], numeric, FD_FLOOR));
    }
    worst
}
