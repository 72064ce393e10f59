use dfc_cl::baselines::*;
use dfc_cl::dfc::*;
use dfc_cl::numerics::softmax::cross_entropy;
use dfc_cl::numerics::{Activation, Matrix};

fn toy() -> (Matrix, Vec<u8>) {
    let x = Matrix::from_fn(16, 8, |i, j| {
        (((i + 1) * (j + 3) + 11usize) as f64 * 0.61).sin() * 0.5
    });
    let y: Vec<u8> = (0..16).map(|i| (i % 2) as u8).collect();
    (x, y)
}

fn run_dfc(tag: &str, lambda: f64, lr: f64, iters: usize) {
    let params =
        NetworkParams::new(&[8, 20, 20, 2], Activation::Tanh, Activation::Linear, 13).unwrap();
    let cfg = DfcConfig {
        n_steps: 120, ramp_steps: 60, k_p: 1.0, k_i: 1.0,
        target_step: lambda, lr,
        ..DfcConfig::default()
    };
    let mut t = DfcTrainer::new(params, cfg).unwrap();
    let (x, y) = toy();
    let mut hit = None;
    for iter in 0..iters {
        t.train_on_batch(&x, &y).unwrap();
        if hit.is_none() && t.batch_accuracy(&x, &y).unwrap() == 1.0 { hit = Some(iter + 1); }
    }
    let fp = feedforward_pass(&t.params, &x).unwrap();
    let (loss, _) = cross_entropy(fp.output(), &y);
    println!("dfc {tag}: acc={:.3} loss={loss:.4} hit={hit:?}", t.batch_accuracy(&x, &y).unwrap());
}

fn run_bp(lr: f64, iters: usize) {
    let mut t = BaselineTrainer::new(&[8, 20, 20, 2], Activation::Relu, BaselineKind::Bp, lr, 0.0, 13).unwrap();
    let (x, y) = toy();
    let mut hit = None;
    for iter in 0..iters {
        t.train_on_batch(&x, &y).unwrap();
        if hit.is_none() && t.batch_accuracy(&x, &y).unwrap() == 1.0 { hit = Some(iter + 1); }
    }
    let fp = t.net.forward(&x).unwrap();
    let (loss, _) = cross_entropy(fp.output(), &y);
    println!("bp  lr={lr}: acc={:.3} loss={loss:.4} hit={hit:?}", t.batch_accuracy(&x, &y).unwrap());
}

#[test]
fn probe_learning() {
    run_bp(1e-3, 200);
    run_bp(1e-3, 1000);
    run_dfc("lam0.1 lr1e-3 i200 ", 0.1, 1e-3, 200);
    run_dfc("lam0.1 lr1e-3 i1000", 0.1, 1e-3, 1000);
    run_dfc("lam0.5 lr1e-3 i200 ", 0.5, 1e-3, 200);
    run_dfc("lam1.0 lr1e-3 i200 ", 1.0, 1e-3, 200);
    run_dfc("lam0.1 lr1e-2 i200 ", 0.1, 1e-2, 200);
}
