use sampled_awgn::extremes::{zmax_exact, zmax_mc, MaxGaussQuery, MomentKind};
use sampled_awgn::Execution;

#[test]
fn square_moment_at_sixteen_matches_quadrature() {
    let q = MaxGaussQuery::new(16, MomentKind::Square, 10_000_000).unwrap();
    let exact = zmax_exact(&q).unwrap();
    assert!((exact - 0.213_358_463_084_619_4).abs() < 1e-12);
    let mc = zmax_mc(&q, 21, Execution::Parallel).unwrap();
    assert!(mc.within(exact, 4.0), "{} ± {} vs {exact}", mc.mean, mc.std_error);
}

#[test]
fn exp_square_moment_at_1024_matches_quadrature() {
    let q = MaxGaussQuery::new(1024, MomentKind::ExpSquare, 100_000).unwrap();
    let exact = zmax_exact(&q).unwrap();
    assert!((exact - 1.010_481_177_431_917).abs() < 1e-10);
    let mc = zmax_mc(&q, 22, Execution::Parallel).unwrap();
    assert!(mc.within(exact, 4.0), "{} ± {} vs {exact}", mc.mean, mc.std_error);
}

#[test]
fn monte_carlo_is_identical_across_execution_modes() {
    let q = MaxGaussQuery::new(64, MomentKind::Fourth, 5_000).unwrap();
    assert_eq!(
        zmax_mc(&q, 23, Execution::Parallel).unwrap(),
        zmax_mc(&q, 23, Execution::Sequential).unwrap()
    );
}
