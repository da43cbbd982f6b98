//! Backpropagation oracle: analytic gradients must match central finite
//! differences of the loss for every model family, on small networks.

use v2n_core::neural::{ModelKind, NetConfig, Network, Sample};
use v2n_core::rng::Rng;

fn check_kind(kind: ModelKind) {
    let mut cfg = NetConfig::defaults(kind);
    cfg.neurons = 3;
    cfg.history = 8;
    cfg.input_dim = 2;
    cfg.heads = vec![1, 3];
    cfg.seed = 11;
    let mut net = Network::new(cfg.clone()).unwrap();
    let mut rng = Rng::new(17);
    let sample = Sample {
        inputs: (0..cfg.history)
            .map(|_| (0..cfg.input_dim).map(|_| rng.uniform(0.0, 1.0)).collect())
            .collect(),
        targets: vec![0.4, 0.7],
    };

    net.reset_gradients();
    net.accumulate_gradients(&sample).unwrap();
    let analytic = net.grad_vec();
    let params = net.param_vec();
    assert_eq!(analytic.len(), params.len());

    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let mut plus = params.clone();
        plus[i] += eps;
        net.set_param_vec(&plus).unwrap();
        let lp = net.loss(&sample).unwrap();
        let mut minus = params.clone();
        minus[i] -= eps;
        net.set_param_vec(&minus).unwrap();
        let lm = net.loss(&sample).unwrap();
        let numeric = (lp - lm) / (2.0 * eps);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    assert!(worst < 1e-4, "{kind:?}: worst relative gradient error {worst}");
}

#[test]
fn lstm_gradients_match_finite_differences() {
    check_kind(ModelKind::Lstm);
}

#[test]
fn gru_gradients_match_finite_differences() {
    check_kind(ModelKind::Gru);
}

#[test]
fn tcn_gradients_match_finite_differences() {
    check_kind(ModelKind::Tcn);
}

#[test]
fn tcnlstm_gradients_match_finite_differences() {
    check_kind(ModelKind::TcnLstm);
}
