use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::grad::cost_and_gradient;
use super::{CostKind, Network, Samples};
use crate::{Error, Result};

/// Training / validation / test indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl DataSplit {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.val).chain(&self.test) {
            if i >= n || seen[i] {
                return Err(Error::Validation(format!(
                    "split index {i} out of range or repeated"
                )));
            }
            seen[i] = true;
        }
        if self.train.is_empty() {
            return Err(Error::Validation("empty training set".into()));
        }
        Ok(())
    }
}

/// Shuffle `0..n` and cut it 70/15/15, rounding by largest remainder (ties
/// go to the earlier set).
pub fn split_data<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<DataSplit> {
    if n < 3 {
        return Err(Error::invalid(format!(
            "need at least 3 samples to split, got {n}"
        )));
    }
    const PERCENT: [usize; 3] = [70, 15, 15];
    let mut sizes = PERCENT.map(|p| n * p / 100);
    let rem = PERCENT.map(|p| n * p % 100);
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| rem[b].cmp(&rem[a]).then(a.cmp(&b)));
    let missing = n - sizes.iter().sum::<usize>();
    for &k in order.iter().take(missing) {
        sizes[k] += 1;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let test = idx.split_off(sizes[0] + sizes[1]);
    let val = idx.split_off(sizes[0]);
    Ok(DataSplit {
        train: idx,
        val,
        test,
    })
}

/// Costs after an epoch; epoch 0 is the initial network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train: f64,
    pub val: Option<f64>,
    pub test: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    EarlyStop,
    /// Gradient vanished.
    Converged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistorySummary {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_train: f64,
    pub best_val: Option<f64>,
    pub best_test: Option<f64>,
    pub min_test: Option<f64>,
    pub stop: StopReason,
}

/// Validation-based early stopping: stop once the validation cost has not
/// improved for `patience` consecutive epochs. `None` disables stopping.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: Option<usize>,
    best: f64,
    best_epoch: usize,
    fails: usize,
}

impl EarlyStopping {
    pub fn new(patience: Option<usize>) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            fails: 0,
        }
    }

    /// Record a cost; returns true when it is a new best.
    pub fn observe(&mut self, epoch: usize, cost: f64) -> bool {
        if cost < self.best {
            self.best = cost;
            self.best_epoch = epoch;
            self.fails = 0;
            true
        } else {
            self.fails += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.patience.is_some_and(|p| self.fails >= p)
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

/// Møller's step-size constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScgParams {
    pub sigma: f64,
    pub lambda: f64,
}

impl Default for ScgParams {
    fn default() -> Self {
        ScgParams {
            sigma: 1e-4,
            lambda: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub cost: CostKind,
    pub max_epochs: usize,
    pub patience: Option<usize>,
    #[serde(default)]
    pub scg: ScgParams,
}

impl TrainConfig {
    pub fn new(cost: CostKind, max_epochs: usize, patience: Option<usize>) -> Self {
        TrainConfig {
            cost,
            max_epochs,
            patience,
            scg: ScgParams::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Weights from the best epoch.
    pub net: Network,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stop: StopReason,
}

impl TrainOutcome {
    pub fn summary(&self) -> HistorySummary {
        let best = &self.history[self.best_epoch];
        HistorySummary {
            epochs_run: self.history.len() - 1,
            best_epoch: self.best_epoch,
            best_train: best.train,
            best_val: best.val,
            best_test: best.test,
            min_test: self.min_test(),
            stop: self.stop,
        }
    }

    /// Smallest test cost seen over all epochs.
    pub fn min_test(&self) -> Option<f64> {
        self.history.iter().filter_map(|r| r.test).reduce(f64::min)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

fn axpy(w: &[f64], alpha: f64, p: &[f64]) -> Vec<f64> {
    w.iter().zip(p).map(|(w, p)| w + alpha * p).collect()
}

/// Scaled conjugate gradient state over a flat parameter vector.
pub(crate) struct Scg {
    pub w: Vec<f64>,
    pub cost: f64,
    /// Negative gradient at `w`.
    r: Vec<f64>,
    p: Vec<f64>,
    lambda: f64,
    sigma: f64,
    /// Unscaled curvature `p' s` along `p`, kept across failed steps.
    theta: f64,
    success: bool,
    since_restart: usize,
}

impl Scg {
    pub fn new(w: Vec<f64>, cost: f64, grad: Vec<f64>, params: ScgParams) -> Self {
        let r: Vec<f64> = grad.iter().map(|g| -g).collect();
        Scg {
            p: r.clone(),
            r,
            w,
            cost,
            lambda: params.lambda,
            sigma: params.sigma,
            theta: 0.0,
            success: true,
            since_restart: 0,
        }
    }

    pub fn converged(&self) -> bool {
        dot(&self.r, &self.r) == 0.0
    }

    /// One iteration. `value_grad` returns cost and gradient, `value` the
    /// cost alone.
    pub fn step(
        &mut self,
        value_grad: &dyn Fn(&[f64]) -> (f64, Vec<f64>),
        value: &dyn Fn(&[f64]) -> f64,
    ) {
        let n = self.w.len();
        let mut mu = dot(&self.p, &self.r);
        if mu <= 0.0 {
            // not a descent direction: restart on steepest descent
            self.p = self.r.clone();
            self.success = true;
            self.since_restart = 0;
            mu = dot(&self.p, &self.r);
        }
        let pp = dot(&self.p, &self.p);
        if pp == 0.0 {
            return;
        }
        if self.success {
            let sk = self.sigma / pp.sqrt();
            let (_, g_plus) = value_grad(&axpy(&self.w, sk, &self.p));
            // s = (E'(w + sk p) - E'(w)) / sk, and E'(w) = -r
            self.theta = self
                .p
                .iter()
                .zip(g_plus.iter().zip(&self.r))
                .map(|(p, (g, r))| p * (g + r))
                .sum::<f64>()
                / sk;
        }
        let mut delta = self.theta + self.lambda * pp;
        if delta <= 0.0 {
            // make the scaled Hessian positive definite
            self.lambda = 2.0 * (self.lambda - delta / pp);
            delta = self.theta + self.lambda * pp;
        }
        let alpha = mu / delta;
        let w_new = axpy(&self.w, alpha, &self.p);
        let e_new = value(&w_new);
        let comparison = 2.0 * delta * (self.cost - e_new) / (mu * mu);
        if comparison >= 0.0 && e_new.is_finite() {
            let (e, g) = value_grad(&w_new);
            let r_new: Vec<f64> = g.iter().map(|g| -g).collect();
            self.w = w_new;
            self.cost = e;
            self.since_restart += 1;
            if self.since_restart >= n {
                self.p = r_new.clone();
                self.since_restart = 0;
            } else {
                let beta = (dot(&r_new, &r_new) - dot(&r_new, &self.r)) / mu;
                self.p = self
                    .p
                    .iter()
                    .zip(&r_new)
                    .map(|(p, r)| r + beta * p)
                    .collect();
            }
            self.r = r_new;
            self.success = true;
            if comparison >= 0.75 {
                self.lambda /= 4.0;
            }
        } else {
            self.success = false;
        }
        if comparison < 0.25 || !comparison.is_finite() {
            let raise = if comparison.is_finite() {
                delta * (1.0 - comparison) / pp
            } else {
                delta / pp
            };
            self.lambda = (self.lambda + raise).min(1e100);
        }
        self.lambda = self.lambda.max(1e-300);
    }
}

/// Full-batch scaled conjugate gradient training with validation early
/// stopping. One SCG iteration is one epoch. The returned network holds the
/// weights of the epoch with the lowest validation cost (training cost when
/// the validation set is empty).
pub fn scg_train(
    net: &Network,
    data: &Samples,
    split: &DataSplit,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    split.validate(data.len())?;
    if cfg.max_epochs == 0 {
        return Err(Error::invalid("max_epochs must be >= 1"));
    }
    if data.inputs.ncols() != net.n_input() || data.targets.ncols() != net.n_output() {
        return Err(Error::invalid("data dimensions do not match the network"));
    }
    let train = data.select(&split.train);
    let val = (!split.val.is_empty()).then(|| data.select(&split.val));
    let test = (!split.test.is_empty()).then(|| data.select(&split.test));
    let cost = cfg.cost;

    let mut work = net.clone();
    let value_grad = |w: &[f64]| -> (f64, Vec<f64>) {
        let mut m = work.clone();
        m.set_params(w).expect("length fixed");
        cost_and_gradient(&m, &train, cost).expect("dimensions checked")
    };
    let eval = |w: &[f64], s: &Samples| -> f64 {
        let mut m = work.clone();
        m.set_params(w).expect("length fixed");
        cost.batch_cost(
            &m.forward_batch(&s.inputs).expect("dimensions checked"),
            &s.targets,
        )
        .expect("same shape")
    };
    let value = |w: &[f64]| eval(w, &train);

    let (c0, g0) = value_grad(&net.params());
    let mut history = Vec::with_capacity(cfg.max_epochs + 1);
    let record = |epoch: usize, train_cost: f64, w: &[f64]| EpochRecord {
        epoch,
        train: train_cost,
        val: val.as_ref().map(|v| eval(w, v)),
        test: test.as_ref().map(|t| eval(w, t)),
    };
    let first = record(0, c0, &net.params());
    history.push(first);
    if !c0.is_finite() {
        return Err(Error::TrainingDiverged { epoch: 0, history });
    }
    let mut stopper = EarlyStopping::new(if val.is_some() { cfg.patience } else { None });
    stopper.observe(0, first.val.unwrap_or(first.train));
    let mut best_w = net.params();

    let mut scg = Scg::new(net.params(), c0, g0, cfg.scg);
    let mut stop = StopReason::MaxEpochs;
    for epoch in 1..=cfg.max_epochs {
        if scg.converged() {
            stop = StopReason::Converged;
            break;
        }
        scg.step(&value_grad, &value);
        let rec = record(epoch, scg.cost, &scg.w);
        history.push(rec);
        if !rec.train.is_finite() || rec.val.is_some_and(|v| !v.is_finite()) {
            return Err(Error::TrainingDiverged { epoch, history });
        }
        if stopper.observe(epoch, rec.val.unwrap_or(rec.train)) {
            best_w.clone_from(&scg.w);
        }
        if stopper.should_stop() {
            stop = StopReason::EarlyStop;
            break;
        }
    }
    work.set_params(&best_w)?;
    let mut outcome = TrainOutcome {
        net: work,
        history,
        best_epoch: stopper.best_epoch(),
        stop,
    };
    outcome.net.meta.cost = Some(cost);
    outcome.net.meta.seed = net.meta.seed;
    outcome.net.meta.history_summary = Some(outcome.summary());
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ffnn::{init_weights, Activation, Topology};
    use crate::seed;

    #[test]
    fn split_sizes_by_largest_remainder() {
        let s = split_data(10_000, &mut seed::rng(1)).unwrap();
        assert_eq!(s.sizes(), (7000, 1500, 1500));
        assert_eq!(
            split_data(10, &mut seed::rng(1)).unwrap().sizes(),
            (7, 2, 1)
        );
        assert_eq!(split_data(3, &mut seed::rng(1)).unwrap().sizes(), (2, 1, 0));
        assert!(split_data(2, &mut seed::rng(1)).is_err());
        for n in 3..200 {
            let s = split_data(n, &mut seed::rng(n as u64)).unwrap();
            s.validate(n).unwrap();
            let (a, b, c) = s.sizes();
            assert_eq!(a + b + c, n);
            assert!((a as f64 - 0.7 * n as f64).abs() <= 1.0);
        }
        assert_eq!(
            split_data(50, &mut seed::rng(4)).unwrap(),
            split_data(50, &mut seed::rng(4)).unwrap()
        );
    }

    #[test]
    fn early_stopping_contract() {
        let mut es = EarlyStopping::new(Some(3));
        let vals = [1.0, 0.5, 0.6, 0.7, 0.8, 0.9];
        let mut stopped_at = None;
        for (e, v) in vals.iter().enumerate() {
            es.observe(e, *v);
            if es.should_stop() {
                stopped_at = Some(e);
                break;
            }
        }
        assert_eq!(stopped_at, Some(4));
        assert_eq!(es.best_epoch(), 1);
        let mut never = EarlyStopping::new(None);
        for e in 0..100 {
            never.observe(e, e as f64);
            assert!(!never.should_stop());
        }
    }

    #[test]
    fn scg_minimizes_quadratic() {
        let diag = [1.0, 4.0, 9.0, 0.5, 2.0];
        let value = |w: &[f64]| {
            w.iter()
                .zip(diag)
                .map(|(w, d)| 0.5 * d * (w - 1.0) * (w - 1.0))
                .sum::<f64>()
        };
        let value_grad = |w: &[f64]| {
            (
                value(w),
                w.iter().zip(diag).map(|(w, d)| d * (w - 1.0)).collect(),
            )
        };
        let w0 = vec![0.0; 5];
        let (c, g) = value_grad(&w0);
        let mut scg = Scg::new(w0, c, g, ScgParams::default());
        for _ in 0..60 {
            if scg.converged() {
                break;
            }
            scg.step(&value_grad, &value);
        }
        assert!(scg.cost < 1e-12, "cost {}", scg.cost);
    }

    #[test]
    fn scg_handles_rosenbrock() {
        let value = |w: &[f64]| (1.0 - w[0]).powi(2) + 100.0 * (w[1] - w[0] * w[0]).powi(2);
        let value_grad = |w: &[f64]| {
            let g0 = -2.0 * (1.0 - w[0]) - 400.0 * w[0] * (w[1] - w[0] * w[0]);
            let g1 = 200.0 * (w[1] - w[0] * w[0]);
            (value(w), vec![g0, g1])
        };
        let w0 = vec![-1.2, 1.0];
        let (c, g) = value_grad(&w0);
        let mut scg = Scg::new(w0, c, g, ScgParams::default());
        let mut prev = scg.cost;
        for _ in 0..2000 {
            if scg.converged() {
                break;
            }
            scg.step(&value_grad, &value);
            assert!(scg.cost <= prev);
            prev = scg.cost;
        }
        assert!(scg.cost < 1e-8, "cost {}", scg.cost);
    }

    fn xor() -> Samples {
        Samples::from_rows(
            &[
                vec![0.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0],
            ],
            &[vec![0.0], vec![1.0], vec![1.0], vec![0.0]],
        )
        .unwrap()
    }

    #[test]
    fn xor_learns_for_most_seeds() {
        let t = Topology::new(2, &[4], 1, Activation::Tanh, Activation::Identity).unwrap();
        let data = xor();
        let split = DataSplit {
            train: vec![0, 1, 2, 3],
            val: vec![],
            test: vec![],
        };
        let cfg = TrainConfig::new(CostKind::Mse, 500, None);
        let mut solved = 0;
        for s in 0..10 {
            let net = init_weights(&t, &mut seed::rng(s)).unwrap();
            let out = scg_train(&net, &data, &split, &cfg).unwrap();
            if out.history.last().unwrap().train < 1e-3 {
                solved += 1;
            }
        }
        assert!(solved >= 8, "solved {solved}/10");
    }

    #[test]
    fn training_is_deterministic_and_snapshots_best() {
        let t = Topology::new(2, &[3], 2, Activation::Tanh, Activation::Softmax).unwrap();
        let mut rng = seed::rng(3);
        let mut x = Vec::new();
        let mut labels = Vec::new();
        for i in 0..60 {
            let c = i % 2;
            let off = if c == 0 { -1.0 } else { 1.0 };
            x.push(vec![
                off + rng.random_range(-0.8..0.8),
                off + rng.random_range(-0.8..0.8),
            ]);
            labels.push(c + 1);
        }
        let data = Samples::new(
            ndarray::Array2::from_shape_vec((60, 2), x.concat()).unwrap(),
            Samples::one_hot(&labels, 2).unwrap(),
        )
        .unwrap();
        let split = split_data(60, &mut seed::rng(9)).unwrap();
        let net = init_weights(&t, &mut seed::rng(1)).unwrap();
        let cfg = TrainConfig::new(CostKind::Ce, 100, Some(6));
        let a = scg_train(&net, &data, &split, &cfg).unwrap();
        let b = scg_train(&net, &data, &split, &cfg).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.net, b.net);
        let best_val = a
            .history
            .iter()
            .filter_map(|r| r.val)
            .fold(f64::INFINITY, f64::min);
        let val = data.select(&split.val);
        let got = CostKind::Ce
            .batch_cost(&a.net.forward_batch(&val.inputs).unwrap(), &val.targets)
            .unwrap();
        assert_eq!(got, best_val);
        assert_eq!(a.history[0].epoch, 0);
    }

    #[test]
    fn separable_blobs_fit_perfectly() {
        let t = Topology::new(2, &[4], 2, Activation::Tanh, Activation::Softmax).unwrap();
        let mut rng = seed::rng(8);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..80 {
            let c = i % 2;
            let cx = if c == 0 { -2.0 } else { 2.0 };
            rows.push(vec![
                cx + rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ]);
            labels.push(c + 1);
        }
        let targets = Samples::one_hot(&labels, 2).unwrap();
        let data = Samples::new(
            ndarray::Array2::from_shape_vec((80, 2), rows.concat()).unwrap(),
            targets,
        )
        .unwrap();
        let split = DataSplit {
            train: (0..80).collect(),
            val: vec![],
            test: vec![],
        };
        let net = init_weights(&t, &mut seed::rng(2)).unwrap();
        let out = scg_train(
            &net,
            &data,
            &split,
            &TrainConfig::new(CostKind::Ce, 200, None),
        )
        .unwrap();
        let pred = out.net.forward_batch(&data.inputs).unwrap();
        for (row, &l) in pred.rows().into_iter().zip(&labels) {
            assert_eq!(crate::ffnn::argmax(row.as_slice().unwrap()) + 1, l);
        }
    }
}
