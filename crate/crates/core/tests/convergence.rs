use isi_core::dynamics::exact_finite_time_average;
use isi_core::equilibrium::{eigenstate_reductions, overlaps, time_averaged_state, DegeneracyPolicy};
use isi_core::hilbert::{partial_trace_bath, trace_distance, Factor, SpaceLayout};
use isi_core::models::build_random_model;
use isi_core::sampling::{monte_carlo_average, sample_uniform_state, stream_rng, StreamPlan, SubspaceBasis};
use isi_core::spectral::eigendecompose;
use isi_core::Tolerances;

/// Least-squares slope of `ln y` against `ln x`.
fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[test]
fn monte_carlo_error_shrinks_as_inverse_root_n() {
    // E tr(rho_S^2) for a uniform state on C^2 (x) C^16 is 18/33
    let layout = SpaceLayout::new(2, 16).unwrap();
    let full = SubspaceBasis::full(Factor::Composite, layout.d()).unwrap();
    let exact = 18.0 / 33.0;
    let ns = [500usize, 2000, 8000, 32000];
    let mut se = Vec::new();
    for (k, &n) in ns.iter().enumerate() {
        let est = monte_carlo_average(
            |psi: &isi_core::hilbert::PureState| partial_trace_bath(psi, &layout).unwrap().purity(),
            |rng| sample_uniform_state(&full, rng),
            n,
            StreamPlan::new(100 + k as u64, 4),
        )
        .unwrap();
        assert!((est.mean - exact).abs() <= 4.0 * est.standard_error, "n={n}: {} vs {exact}", est.mean);
        se.push(est.standard_error);
    }
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let slope = loglog_slope(&x, &se);
    assert!((slope + 0.5).abs() < 0.1, "slope {slope}");
}

#[test]
fn finite_time_average_error_decays_as_inverse_t() {
    let tol = Tolerances::default();
    let layout = SpaceLayout::new(2, 8).unwrap();
    let mut rng = stream_rng(77, 0);
    let h = build_random_model(&layout, 1.0, &tol, &mut rng).unwrap();
    let spec = eigendecompose(h.total(), &tol).unwrap();
    let red = eigenstate_reductions(&spec, &layout, &tol).unwrap();
    let psi = sample_uniform_state(&SubspaceBasis::full(Factor::Composite, layout.d()).unwrap(), &mut rng);
    let c = overlaps(&spec, &psi).unwrap();
    let bar = time_averaged_state(&c, &red, DegeneracyPolicy::Refuse).unwrap();
    let t0 = 1.0 / spec.min_level_spacing();
    // the error oscillates within each decade; average it over a short window
    let ts: Vec<f64> = (0..13).map(|k| t0 * 10f64.powf(1.0 + 0.25 * k as f64)).collect();
    let errs: Vec<f64> = ts
        .iter()
        .map(|&t| {
            (0..16)
                .map(|j| {
                    let tj = t * (1.0 + 0.05 * j as f64);
                    let avg = exact_finite_time_average(&c, &spec, &layout, tj).unwrap();
                    trace_distance(&avg, &bar).unwrap()
                })
                .sum::<f64>()
                / 16.0
        })
        .collect();
    let slope = loglog_slope(&ts, &errs);
    assert!((slope + 1.0).abs() < 0.2, "slope {slope}, errors {errs:?}");
}
