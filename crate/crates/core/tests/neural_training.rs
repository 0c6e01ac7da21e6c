mod common;

#[test]
fn lstm_memorizes_four_samples() {
    let rmse = common::memorization_rmse();
    assert!(rmse < 0.01, "train RMSE {rmse}");
}
