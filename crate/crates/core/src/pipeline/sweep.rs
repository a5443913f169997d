use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ffnn::{init_weights, scg_train, split_data, Samples, Topology, TrainConfig};
use crate::linalg::lstsq;
use crate::{seed, Error, Result};

/// Bounds on the hidden-layer size from two common rules of thumb:
/// `N_o <= N_h < 2 N_i` and `N_h ≈ 2/3 N_i + N_o`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RulesOfThumb {
    pub min_inclusive: usize,
    pub max_exclusive: usize,
    pub suggested: f64,
}

impl RulesOfThumb {
    pub fn new(n_input: usize, n_output: usize) -> Self {
        RulesOfThumb {
            min_inclusive: n_output,
            max_exclusive: 2 * n_input,
            suggested: 2.0 * n_input as f64 / 3.0 + n_output as f64,
        }
    }
}

/// One sweep grid point aggregated over seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub x: usize,
    pub mean: f64,
    pub std: f64,
    /// Seeds that trained without diverging.
    pub runs: usize,
    pub diverged: usize,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("x,mean,std\n");
    for r in rows {
        s.push_str(&format!("{},{},{}\n", r.x, r.mean, r.std));
    }
    s
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() < 2 {
        0.0
    } else {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, std)
}

/// Shared sweep settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
}

/// Train one network and return its minimum test cost over all epochs, or
/// `None` on divergence.
fn min_test_cost(
    topology: &Topology,
    data: &Samples,
    cfg: &TrainConfig,
    s: u64,
) -> Result<Option<f64>> {
    let split = split_data(data.len(), &mut seed::rng(seed::derive(s, 1)))?;
    let mut net = init_weights(topology, &mut seed::rng(seed::derive(s, 2)))?;
    net.meta.seed = Some(s);
    match scg_train(&net, data, &split, cfg) {
        Ok(out) => Ok(out.min_test()),
        Err(Error::TrainingDiverged { epoch, .. }) => {
            log::warn!("seed {s} diverged at epoch {epoch}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn aggregate(x: usize, costs: Vec<Option<f64>>) -> SweepRow {
    let ok: Vec<f64> = costs.iter().flatten().copied().collect();
    let (mean, std) = mean_std(&ok);
    SweepRow {
        x,
        mean,
        std,
        runs: ok.len(),
        diverged: costs.len() - ok.len(),
    }
}

/// Per grid count, draw that many samples of each class (all of a class if
/// it has fewer), train one network per seed and record the minimum test
/// cost.
pub fn sweep_sample_count(
    topology: &Topology,
    data: &Samples,
    classes: &[usize],
    counts: &[usize],
    cfg: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    if counts.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::invalid("sweep needs a non-empty grid and seed list"));
    }
    if classes.len() != data.len() {
        return Err(Error::invalid("one class per sample required"));
    }
    let max_class = classes.iter().copied().max().unwrap_or(0);
    let cells: Vec<(usize, u64)> = counts
        .iter()
        .flat_map(|&c| cfg.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let results: Vec<Option<f64>> = cells
        .par_iter()
        .map(|&(count, s)| {
            let mut rng = seed::rng(seed::derive(s, count as u64));
            let mut idx = Vec::new();
            for k in 0..=max_class {
                let mut members: Vec<usize> =
                    (0..classes.len()).filter(|&i| classes[i] == k).collect();
                members.shuffle(&mut rng);
                members.truncate(count);
                idx.extend(members);
            }
            if idx.len() < 3 {
                return Err(Error::invalid(format!(
                    "count {count} leaves fewer than 3 samples"
                )));
            }
            min_test_cost(topology, &data.select(&idx), &cfg.train, s)
        })
        .collect::<Result<_>>()?;
    Ok(counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            aggregate(
                c,
                results[i * cfg.seeds.len()..(i + 1) * cfg.seeds.len()].to_vec(),
            )
        })
        .collect())
}

/// Train single-hidden-layer variants of `template` for every hidden size
/// in `grid`; `mean` and `std` are divided by the mean at one hidden neuron.
pub fn sweep_hidden_neurons(
    template: &Topology,
    data: &Samples,
    grid: &[usize],
    cfg: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    if !grid.contains(&1) {
        return Err(Error::invalid(
            "hidden-neuron grid must contain 1 as the normalization anchor",
        ));
    }
    if cfg.seeds.is_empty() {
        return Err(Error::invalid("empty seed list"));
    }
    let cells: Vec<(usize, u64)> = grid
        .iter()
        .flat_map(|&h| cfg.seeds.iter().map(move |&s| (h, s)))
        .collect();
    let results: Vec<Option<f64>> = cells
        .par_iter()
        .map(|&(h, s)| {
            let t = Topology {
                hidden: vec![h],
                ..template.clone()
            };
            t.validate()?;
            min_test_cost(&t, data, &cfg.train, s)
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<SweepRow> = grid
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            aggregate(
                h,
                results[i * cfg.seeds.len()..(i + 1) * cfg.seeds.len()].to_vec(),
            )
        })
        .collect();
    let anchor = rows.iter().find(|r| r.x == 1).expect("checked above").mean;
    if !(anchor > 0.0 && anchor.is_finite()) {
        return Err(Error::invalid("anchor cost is not positive"));
    }
    for r in &mut rows {
        r.mean /= anchor;
        r.std /= anchor;
    }
    Ok(rows)
}

/// Coefficients of `f(x) = (a x^3 + b x^2 + c x + d) / (x + e)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalFitParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    /// Root mean square of the fit residuals.
    pub residual: f64,
    /// Minimizer of `f` over `[min xs, max xs]` by dense evaluation.
    pub argmin: f64,
}

impl RationalFitParams {
    pub fn eval(&self, x: f64) -> f64 {
        (((self.a * x + self.b) * x + self.c) * x + self.d) / (x + self.e)
    }
}

const E_GRID: usize = 240;
const GOLDEN_ITERS: usize = 200;
const ARGMIN_SAMPLES: usize = 20_001;

fn fit_fixed_e(xs: &[f64], ys: &[f64], e: f64) -> Option<([f64; 4], f64)> {
    let mut design = Vec::with_capacity(xs.len() * 4);
    for &x in xs {
        let q = x + e;
        design.extend([x * x * x / q, x * x / q, x / q, 1.0 / q]);
    }
    let coef = lstsq(&design, 4, ys).ok()?;
    let c = [coef[0], coef[1], coef[2], coef[3]];
    let ss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let f = (((c[0] * x + c[1]) * x + c[2]) * x + c[3]) / (x + e);
            (f - y) * (f - y)
        })
        .sum();
    let rms = (ss / xs.len() as f64).sqrt();
    rms.is_finite().then_some((c, rms))
}

/// Least-squares fit of the cubic-over-linear rational function. For each
/// `e` on a geometric grid over `(-min xs, 10 max xs]` the remaining
/// coefficients are linear; the best grid point is refined by golden-section
/// search.
pub fn rational_fit(xs: &[f64], ys: &[f64]) -> Result<RationalFitParams> {
    if xs.len() != ys.len() || xs.len() < 6 {
        return Err(Error::invalid("rational fit needs at least 6 (x, y) pairs"));
    }
    if xs.iter().any(|x| !(*x > 0.0) || !x.is_finite()) || ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::invalid("xs must be positive and all values finite"));
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // e = -lo + offset with offset geometric in [1e-3 lo, 10 hi + lo]
    let (o_lo, o_hi) = (1e-3 * lo, 10.0 * hi + lo);
    let offsets: Vec<f64> = (0..E_GRID)
        .map(|i| o_lo * (o_hi / o_lo).powf(i as f64 / (E_GRID - 1) as f64))
        .collect();
    let score = |o: f64| fit_fixed_e(xs, ys, o - lo).map_or(f64::INFINITY, |f| f.1);
    let scores: Vec<f64> = offsets.iter().map(|&o| score(o)).collect();
    let best = (0..E_GRID)
        .min_by(|&a, &b| scores[a].total_cmp(&scores[b]))
        .expect("non-empty grid");
    if !scores[best].is_finite() {
        return Err(Error::FitFailed(
            "least squares singular for every e".into(),
        ));
    }
    let (mut a, mut b) = (
        offsets[best.saturating_sub(1)],
        offsets[(best + 1).min(E_GRID - 1)],
    );
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (score(c), score(d));
    for _ in 0..GOLDEN_ITERS {
        if b - a <= 1e-15 * b.abs().max(1.0) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = score(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = score(d);
        }
    }
    let mut o = offsets[best];
    let mut rms = scores[best];
    for (cand, f) in [(c, fc), (d, fd)] {
        if f < rms {
            o = cand;
            rms = f;
        }
    }
    let e = o - lo;
    let (coef, residual) =
        fit_fixed_e(xs, ys, e).ok_or_else(|| Error::FitFailed("refined fit singular".into()))?;
    let mut fit = RationalFitParams {
        a: coef[0],
        b: coef[1],
        c: coef[2],
        d: coef[3],
        e,
        residual,
        argmin: lo,
    };
    let mut best_v = f64::INFINITY;
    for i in 0..ARGMIN_SAMPLES {
        let x = lo + (hi - lo) * i as f64 / (ARGMIN_SAMPLES - 1) as f64;
        let v = fit.eval(x);
        if v < best_v {
            best_v = v;
            fit.argmin = x;
        }
    }
    Ok(fit)
}
