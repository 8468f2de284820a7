//! Reverse-mode gradient checks: op chains against finite differences,
//! additive accumulation, and end-to-end model passes.

mod common;

use aml_core::model::{Activation, ModelConfig, PredictorKind, Variant};
use aml_core::nn::{grad_check, AdjSlice, BranchNorm, BranchTag, DenseMatrix, ParamStore, Tape};
use common::e2e_grad_error;

fn det_matrix(rows: usize, cols: usize, salt: usize) -> DenseMatrix {
    common::det_features(rows, cols, salt)
}

#[test]
fn op_chain_gradients_match_finite_differences() {
    // matmul + spmm + gather + hadamard + batch norm + row_sum + loss
    let mut store = ParamStore::new();
    let w = store.add("w", det_matrix(3, 3, 1), true);
    let b = store.add("b", det_matrix(1, 3, 2), true);
    let norm = BranchNorm::create(&mut store, "norm", BranchTag::Head, 3);

    let adj = AdjSlice {
        out_rows: 3,
        in_rows: 4,
        row_offsets: vec![0, 2, 3, 5],
        cols: vec![0, 2, 1, 0, 3],
        vals: vec![0.5, 0.5, 1.0, 0.25, 0.75],
    };
    let x = det_matrix(4, 3, 3);
    let labels = [1.0, 0.0, 1.0];

    let run = |store: &mut ParamStore, do_backward: bool| -> f64 {
        let mut tape = Tape::new();
        let xn = tape.constant(x.clone());
        let wn = tape.param(w, store);
        let h = tape.matmul(xn, wn).unwrap();
        let agg = tape.spmm(adj.clone(), h).unwrap();
        let own = tape.gather_rows(h, &[0, 1, 2]).unwrap();
        let z = tape.add(agg, own).unwrap();
        let z = norm.forward(&mut tape, store, z, true).unwrap();
        let z = tape.relu(z);
        let bn = tape.param(b, store);
        let z = tape.add_row_vec(z, bn).unwrap();
        let mixed = tape.hadamard(z, own).unwrap();
        let s = tape.row_sum(mixed);
        let loss = tape.bce_with_logits_mean(s, &labels).unwrap();
        if do_backward {
            tape.backward(loss, store).unwrap();
        }
        tape.value(loss).get(0, 0)
    };

    store.zero_grads();
    run(&mut store, true);
    let err = grad_check(|s: &mut ParamStore| run(s, false), &mut store, 1e-5, 500, 0);
    assert!(err <= 1e-4, "max relative error {err}");
}

#[test]
fn inference_mode_norm_gradients_match_finite_differences() {
    let mut store = ParamStore::new();
    let w = store.add("w", det_matrix(2, 2, 9), true);
    let norm = BranchNorm::create(&mut store, "norm", BranchTag::Tail, 2);
    // non-trivial running stats
    store.get_mut(norm.running_mean).value.set(0, 0, 0.3);
    store.get_mut(norm.running_var).value.set(0, 1, 2.0);
    let x = det_matrix(3, 2, 4);
    let labels = [0.0, 1.0, 1.0];

    let run = |store: &mut ParamStore, do_backward: bool| -> f64 {
        let mut tape = Tape::new();
        let xn = tape.constant(x.clone());
        let wn = tape.param(w, store);
        let h = tape.matmul(xn, wn).unwrap();
        let h = norm.forward(&mut tape, store, h, false).unwrap();
        let s = tape.row_sum(h);
        let loss = tape.bce_with_logits_mean(s, &labels).unwrap();
        if do_backward {
            tape.backward(loss, store).unwrap();
        }
        tape.value(loss).get(0, 0)
    };

    store.zero_grads();
    run(&mut store, true);
    let err = grad_check(|s: &mut ParamStore| run(s, false), &mut store, 1e-5, 500, 1);
    assert!(err <= 1e-4, "max relative error {err}");
}

#[test]
fn backward_on_summed_losses_accumulates_additively() {
    let mut store = ParamStore::new();
    let w = store.add("w", det_matrix(2, 2, 5), true);
    let xa = det_matrix(3, 2, 6);
    let xb = det_matrix(3, 2, 7);
    let labels = [1.0, 0.0, 1.0];

    let grads_for = |store: &mut ParamStore, inputs: &[&DenseMatrix]| -> Vec<f64> {
        store.zero_grads();
        for x in inputs {
            let mut tape = Tape::new();
            let xn = tape.constant((*x).clone());
            let wn = tape.param(w, store);
            let h = tape.matmul(xn, wn).unwrap();
            let s = tape.row_sum(h);
            let loss = tape.bce_with_logits_mean(s, &labels).unwrap();
            tape.backward(loss, store).unwrap();
        }
        store.get(w).grad.data().to_vec()
    };

    let sum_of_parts: Vec<f64> = {
        let ga = grads_for(&mut store, &[&xa]);
        let gb = grads_for(&mut store, &[&xb]);
        ga.iter().zip(&gb).map(|(a, b)| a + b).collect()
    };
    let accumulated = grads_for(&mut store, &[&xa, &xb]);
    for (a, b) in accumulated.iter().zip(&sum_of_parts) {
        assert!((a - b).abs() <= 1e-12);
    }
}

fn grad_cfg(variant: Variant) -> ModelConfig {
    ModelConfig {
        variant,
        layers: 2,
        hidden_dim: 4,
        activation: Activation::Relu,
        batch_norm: true,
        predictor: PredictorKind::Mlp,
        fanout: None,
        ..ModelConfig::default()
    }
}

#[test]
fn end_to_end_gradients_default_variant() {
    let err = e2e_grad_error(&grad_cfg(Variant::Aml), 12);
    assert!(err <= 1e-4, "max relative error {err}");
}

#[test]
fn end_to_end_gradients_reversed_variant() {
    let err = e2e_grad_error(&grad_cfg(Variant::AmlR), 12);
    assert!(err <= 1e-4, "max relative error {err}");
}

#[test]
fn end_to_end_gradients_with_toggles_off() {
    let cfg = ModelConfig {
        knowledge_transfer: false,
        residual_delta: false,
        homophily: false,
        ..grad_cfg(Variant::Aml)
    };
    let err = e2e_grad_error(&cfg, 13);
    assert!(err <= 1e-4, "max relative error {err}");
}
