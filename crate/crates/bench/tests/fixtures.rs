use peershare_bench::{context, small_sweep};

#[test]
fn context_matches_profile() {
    let ctx = context(0.6, 0.3);
    assert_eq!((ctx.profile.alpha, ctx.profile.beta), (0.6, 0.3));
    assert!((ctx.v_tilde - 3.2936).abs() < 1e-4);
}

#[test]
fn small_sweep_has_requested_grid() {
    let s = small_sweep(3);
    assert_eq!(s.sweep.alpha.points().len(), 3);
    assert_eq!(s.sweep.beta.points().len(), 3);
}
