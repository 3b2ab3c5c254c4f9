mod common;

#[test]
fn analytic_gradients_match_central_differences() {
    for seed in 0..10 {
        let err = common::gradient_check(seed, 1e-5);
        assert!(err < 1e-4, "seed {seed}: worst relative error {err:e}");
    }
}
