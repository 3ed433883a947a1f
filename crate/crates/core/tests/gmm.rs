use flowloc_core::features::{fit_gmm, fit_gmm_traced, EmSettings};
use flowloc_core::rng;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn two_gaussians(n: usize, a: (f64, f64), b: (f64, f64), share_a: f64, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, &[]);
    let na = Normal::new(a.0, a.1.sqrt()).unwrap();
    let nb = Normal::new(b.0, b.1.sqrt()).unwrap();
    (0..n).map(|_| if r.gen::<f64>() < share_a { na.sample(&mut r) } else { nb.sample(&mut r) }).collect()
}

#[test]
fn recovers_well_separated_components() {
    for seed in 0..5 {
        // exactly half from each: N(10, 1) and N(30, 4)
        let mut r = rng::stream(seed, &[1]);
        let lo = Normal::new(10.0, 1.0).unwrap();
        let hi = Normal::new(30.0, 2.0).unwrap();
        let mut xs: Vec<f64> = (0..500).map(|_| lo.sample(&mut r)).collect();
        xs.extend((0..500).map(|_| hi.sample(&mut r)));
        let p = fit_gmm(&xs, &EmSettings::default()).unwrap();
        let [a, b] = p.components;
        assert!((a.mean - 10.0).abs() <= 0.05 * 10.0, "seed {seed}: {a:?}");
        assert!((b.mean - 30.0).abs() <= 0.05 * 30.0, "seed {seed}: {b:?}");
        assert!((a.weight - 0.5).abs() <= 0.05 && (b.weight - 0.5).abs() <= 0.05);
        assert!((a.variance - 1.0).abs() < 0.3 && (b.variance - 4.0).abs() < 1.2);
    }
}

#[test]
fn log_likelihood_never_decreases() {
    let mut r = rng::stream(99, &[]);
    for fixture in 0..100 {
        let n = r.gen_range(2..400);
        let a = (r.gen_range(0.0..50.0), r.gen_range(0.05..25.0));
        let b = (r.gen_range(0.0..50.0), r.gen_range(0.05..25.0));
        let xs = two_gaussians(n, a, b, r.gen_range(0.05..0.95), fixture);
        let fit = fit_gmm_traced(&xs, &EmSettings::default()).unwrap();
        for w in fit.log_likelihood_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "fixture {fixture}: {} -> {}", w[0], w[1]);
        }
        let [c0, c1] = fit.params.components;
        assert!(c0.mean <= c1.mean);
        assert!((c0.weight + c1.weight - 1.0).abs() < 1e-9);
        assert!(c0.variance >= 1e-6 && c1.variance >= 1e-6);
    }
}

#[test]
fn iteration_cap_is_respected() {
    let xs = two_gaussians(300, (0.0, 1.0), (1.0, 1.0), 0.5, 3);
    let s = EmSettings { max_iters: 3, tol: 0.0, ..Default::default() };
    let fit = fit_gmm_traced(&xs, &s).unwrap();
    assert_eq!(fit.iterations, 3);
    assert_eq!(fit.log_likelihood_trace.len(), 4);
}
