use vortexlab::dynamics::simulate;
use vortexlab::estimators::mean_with_se;
use vortexlab::{Init, Params, System, Vec2d};

/// With equal vorticities the pair interactions cancel in `Σ|X^i|²`, which
/// then grows like `4nνt` in the original system, one `2ν` per coordinate.
#[test]
fn second_moment_of_original_system_grows_by_four_n_nu_t() {
    let (n, nu, t) = (3usize, 0.7, 1.0);
    let z0 = vec![Vec2d::new(1.0, 0.0), Vec2d::new(-0.5, 0.8), Vec2d::new(-0.5, -0.8)];
    let start: f64 = z0.iter().map(|p| p.norm2()).sum();
    let params = Params::new(t, 40_000, 17);
    let out = simulate(&System::original(vec![1.0; n], nu).unwrap(), &Init::Point(z0), &params, &()).unwrap();
    let growth: Vec<f64> = out.batch.iter().map(|c| c.iter().map(|p| p.norm2()).sum::<f64>() - start).collect();
    let (m, se) = mean_with_se(&growth);
    let four = 4.0 * n as f64 * nu * t;
    let two = 2.0 * n as f64 * nu * t;
    assert!((m - four).abs() < 4.0 * se, "{m} ± {se} vs {four}");
    assert!((m - two).abs() > 20.0 * se, "{m} ± {se} vs {two}");
}
