use ndarray::{Array2, Axis};

use super::{activate, Activation, CostKind, Network, Samples, CE_FLOOR};
use crate::{Error, Result};

/// Gradient of the batch-mean cost with respect to [`Network::params`].
pub fn gradient(net: &Network, batch: &Samples, cost: CostKind) -> Result<Vec<f64>> {
    Ok(cost_and_gradient(net, batch, cost)?.1)
}

pub(crate) fn cost_and_gradient(
    net: &Network,
    batch: &Samples,
    cost: CostKind,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    if batch.inputs.ncols() != net.n_input() || batch.targets.ncols() != net.n_output() {
        return Err(Error::invalid(format!(
            "batch is {}->{} but network is {}->{}",
            batch.inputs.ncols(),
            batch.targets.ncols(),
            net.n_input(),
            net.n_output()
        )));
    }
    let n = batch.len() as f64;
    let n_out = net.n_output() as f64;

    // activations[0] is the input, activations[i + 1] the output of layer i
    let mut activations: Vec<Array2<f64>> = Vec::with_capacity(net.layers().len() + 1);
    activations.push(batch.inputs.clone());
    for l in net.layers() {
        let mut z = activations
            .last()
            .expect("input pushed")
            .dot(&l.weights.t());
        z += &l.biases;
        activate(l.activation, &mut z);
        activations.push(z);
    }
    let out = activations.last().expect("at least one layer");
    let t = &batch.targets;
    let value = cost.batch_cost(out, t)?;

    let out_act = net.layers().last().expect("at least one layer").activation;
    // delta = d(batch-mean cost) / d(pre-activation), one row per sample
    let mut delta = if cost == CostKind::Ce && out_act == Activation::Softmax {
        (out - t) / (n * n_out)
    } else {
        let d_out = match cost {
            CostKind::Mse => (out - t) * (2.0 / (n * n_out)),
            CostKind::Ce => {
                let mut g = Array2::zeros(out.dim());
                ndarray::Zip::from(&mut g)
                    .and(out)
                    .and(t)
                    .for_each(|g, &o, &t| {
                        if o > CE_FLOOR {
                            *g = -t / (o * n * n_out);
                        }
                    });
                g
            }
        };
        act_backward(out_act, out, d_out)
    };

    let mut grads: Vec<(Array2<f64>, ndarray::Array1<f64>)> =
        Vec::with_capacity(net.layers().len());
    for (i, l) in net.layers().iter().enumerate().rev() {
        let prev = &activations[i];
        let gw = delta.t().dot(prev);
        let gb = delta.sum_axis(Axis(0));
        if i > 0 {
            let back = delta.dot(&l.weights);
            delta = act_backward(net.layers()[i - 1].activation, prev, back);
        }
        grads.push((gw, gb));
    }
    grads.reverse();
    let mut flat = Vec::with_capacity(net.param_count());
    for (gw, gb) in &grads {
        flat.extend(gw.iter());
        flat.extend(gb.iter());
    }
    Ok((value, flat))
}

/// Chain `upstream` (d cost / d output) through the activation whose output
/// is `a`.
fn act_backward(act: Activation, a: &Array2<f64>, mut upstream: Array2<f64>) -> Array2<f64> {
    match act {
        Activation::Identity => upstream,
        Activation::Tanh => {
            ndarray::Zip::from(&mut upstream)
                .and(a)
                .for_each(|g, &a| *g *= 1.0 - a * a);
            upstream
        }
        Activation::Softmax => {
            for (mut g, a) in upstream.rows_mut().into_iter().zip(a.rows()) {
                let dot: f64 = g.iter().zip(a.iter()).map(|(g, a)| g * a).sum();
                ndarray::Zip::from(&mut g)
                    .and(&a)
                    .for_each(|g, &a| *g = a * (*g - dot));
            }
            upstream
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::ffnn::{init_weights, Topology};
    use crate::seed;

    fn fd_check(topology: Topology, cost: CostKind, one_hot: bool) {
        let mut rng = seed::rng(11);
        let mut net = init_weights(&topology, &mut rng).unwrap();
        let mut p = net.params();
        for v in &mut p {
            *v += rng.random_range(-0.3..0.3);
        }
        net.set_params(&p).unwrap();
        let n = 8;
        let x = Array2::from_shape_fn((n, topology.n_input), |_| rng.random_range(-1.0..1.0));
        let t = if one_hot {
            let labels: Vec<usize> = (0..n)
                .map(|_| rng.random_range(1..=topology.n_output))
                .collect();
            Samples::one_hot(&labels, topology.n_output).unwrap()
        } else {
            Array2::from_shape_fn((n, topology.n_output), |_| rng.random_range(-1.0..1.0))
        };
        let batch = Samples::new(x, t).unwrap();
        let g = gradient(&net, &batch, cost).unwrap();
        let h = 1e-5;
        let eval = |p: &[f64]| {
            let mut m = net.clone();
            m.set_params(p).unwrap();
            cost.batch_cost(&m.forward_batch(&batch.inputs).unwrap(), &batch.targets)
                .unwrap()
        };
        for i in 0..p.len() {
            let mut plus = p.clone();
            plus[i] += h;
            let mut minus = p.clone();
            minus[i] -= h;
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let err = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-7);
            assert!(err < 1e-5, "param {i}: fd {fd} analytic {}", g[i]);
        }
    }

    #[test]
    fn softmax_ce_matches_finite_differences() {
        fd_check(
            Topology::new(5, &[4], 3, Activation::Tanh, Activation::Softmax).unwrap(),
            CostKind::Ce,
            true,
        );
    }

    #[test]
    fn two_hidden_mse_matches_finite_differences() {
        fd_check(
            Topology::new(3, &[4, 3], 2, Activation::Tanh, Activation::Identity).unwrap(),
            CostKind::Mse,
            false,
        );
    }

    #[test]
    fn tanh_output_and_softmax_mse_match_finite_differences() {
        fd_check(
            Topology::new(3, &[4], 2, Activation::Tanh, Activation::Tanh).unwrap(),
            CostKind::Mse,
            false,
        );
        fd_check(
            Topology::new(3, &[4], 3, Activation::Identity, Activation::Softmax).unwrap(),
            CostKind::Mse,
            true,
        );
    }

    #[test]
    fn symmetric_net_has_equal_hidden_rows() {
        let t = Topology::new(3, &[4], 2, Activation::Tanh, Activation::Softmax).unwrap();
        let net = crate::ffnn::Network::zeros(&t).unwrap();
        let batch = Samples::from_rows(
            &[vec![0.2, 0.5, -0.1], vec![0.9, -0.3, 0.4]],
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        let g = gradient(&net, &batch, CostKind::Ce).unwrap();
        let rows: Vec<&[f64]> = g[..12].chunks(3).collect();
        assert!(rows.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn rejects_mismatched_batch() {
        let t = Topology::new(3, &[4], 2, Activation::Tanh, Activation::Softmax).unwrap();
        let net = crate::ffnn::Network::zeros(&t).unwrap();
        let batch = Samples::from_rows(&[vec![0.2, 0.5]], &[vec![1.0, 0.0]]).unwrap();
        assert!(gradient(&net, &batch, CostKind::Ce).is_err());
    }
}
