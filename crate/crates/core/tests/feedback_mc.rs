use sampled_awgn::extremes::rate_fit;
use sampled_awgn::feedmi::{estimate_feedback_mi, sup_norm_moment_check};
use sampled_awgn::quad::adaptive;
use sampled_awgn::{DriftSpec, Execution, MessageAlphabet, SampleGrid};

fn linear() -> DriftSpec {
    DriftSpec::linear_feedback(1.0, 1.0, MessageAlphabet::antipodal())
}

fn coarse(t: f64, ns: &[usize]) -> Vec<SampleGrid> {
    ns.iter().map(|&n| SampleGrid::new(t, n).unwrap()).collect()
}

#[test]
fn likelihood_exponent_gap_shrinks_at_least_linearly() {
    let fine = SampleGrid::new(2.0, 1024).unwrap();
    let grids = coarse(2.0, &[8, 16, 32, 64, 128]);
    let est = estimate_feedback_mi(&linear(), &fine, &grids, 20_000, 5, Execution::Parallel).unwrap();
    let pts: Vec<(f64, f64)> = grids.iter().zip(&est.rho_gap_sq).map(|(g, s)| (g.delta(), s.mean)).collect();
    let fit = rate_fit(&pts).unwrap();
    assert!(fit.slope >= 0.8, "slope {}", fit.slope);
}

#[test]
fn common_random_numbers_shrink_the_gap_error() {
    let fine = SampleGrid::new(2.0, 512).unwrap();
    let grids = coarse(2.0, &[16, 64]);
    let est = estimate_feedback_mi(&linear(), &fine, &grids, 20_000, 6, Execution::Parallel).unwrap();
    for (s, gap) in est.sampled.iter().zip(&est.gaps) {
        let independent = s.std_error.hypot(est.continuous.std_error);
        assert!(gap.std_error * 3.0 < independent, "{} vs {}", gap.std_error, independent);
    }
}

/// `P(sup_{[0,1]} |B| ≥ x)`: theta series for small `x`, reflection series
/// otherwise.
fn sup_abs_tail(x: f64) -> f64 {
    use std::f64::consts::PI;
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.0 {
        let below: f64 = (0..50)
            .map(|k| {
                let j = (2 * k + 1) as f64;
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign / j * (-(j * j) * PI * PI / (8.0 * x * x)).exp()
            })
            .sum();
        1.0 - 4.0 / PI * below
    } else {
        let q = |z: f64| 0.5 * libm::erfc(z / std::f64::consts::SQRT_2);
        // P(S ≥ x) = 2 Σ_{k≥1} (−1)^{k+1} · 2Q((2k − 1)x)
        (1..50).map(|k| {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * 4.0 * q((2 * k - 1) as f64 * x)
        })
        .sum()
    }
}

#[test]
fn series_representations_agree() {
    for x in [0.7, 0.9, 1.0, 1.2, 1.5] {
        let small = {
            use std::f64::consts::PI;
            1.0 - 4.0 / PI
                * (0..200)
                    .map(|k| {
                        let j = (2 * k + 1) as f64;
                        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                        sign / j * (-(j * j) * PI * PI / (8.0 * x * x)).exp()
                    })
                    .sum::<f64>()
        };
        let q = |z: f64| 0.5 * libm::erfc(z / std::f64::consts::SQRT_2);
        let large: f64 =
            (1..50).map(|k| if k % 2 == 1 { 4.0 } else { -4.0 } * q((2 * k - 1) as f64 * x)).sum();
        assert!((small - large).abs() < 1e-13, "x = {x}: {small} vs {large}");
    }
}

#[test]
fn sup_moment_of_brownian_motion_matches_series() {
    let eps = 0.1;
    let exact = 1.0 + adaptive(|x| 2.0 * eps * x * (eps * x * x).exp() * sup_abs_tail(x), 0.0, 14.0, 1e-14, 1e-12)
        .unwrap();
    let zero = DriftSpec::zero(MessageAlphabet::antipodal());
    let grid = SampleGrid::new(1.0, 512).unwrap();
    let mc = sup_norm_moment_check(&zero, &grid, eps, 200_000, 7, Execution::Parallel).unwrap();
    assert!(mc.within(exact, 4.0), "{} ± {} vs {exact}", mc.mean, mc.std_error);
}
