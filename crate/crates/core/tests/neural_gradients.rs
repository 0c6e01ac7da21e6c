//! Analytic gradients against central finite differences.

mod common;

use common::check;
use sharpecast::neural::{Activation, CellKind};

#[test]
fn lstm_plain() {
    for depth in [1, 2, 3] {
        check(CellKind::Lstm, depth, false, false, 0.0, Activation::Tanh);
    }
}

#[test]
fn gru_plain() {
    for depth in [1, 2, 3] {
        check(CellKind::Gru, depth, false, false, 0.0, Activation::Tanh);
    }
}

#[test]
fn lstm_batchnorm_and_dropout() {
    for depth in [1, 3] {
        check(CellKind::Lstm, depth, true, true, 0.0, Activation::Tanh);
        check(CellKind::Lstm, depth, false, false, 0.3, Activation::Tanh);
        check(CellKind::Lstm, depth, true, true, 0.3, Activation::Tanh);
        check(CellKind::Lstm, depth, true, false, 0.3, Activation::Tanh);
    }
}

#[test]
fn gru_batchnorm_and_dropout() {
    for depth in [1, 3] {
        check(CellKind::Gru, depth, true, true, 0.0, Activation::Tanh);
        check(CellKind::Gru, depth, false, false, 0.3, Activation::Tanh);
        check(CellKind::Gru, depth, true, true, 0.3, Activation::Tanh);
        check(CellKind::Gru, depth, true, false, 0.3, Activation::Tanh);
    }
}

#[test]
fn relu_head() {
    check(CellKind::Lstm, 2, true, true, 0.2, Activation::Relu);
    check(CellKind::Gru, 2, false, false, 0.0, Activation::Relu);
}
