use approx::assert_relative_eq;
use proptest::prelude::*;
use subres::direct::{submodel_fisher, Psf};
use subres::hankel::factorize;
use subres::measure::STANDARD_GAUSSIAN_VARIANCE;
use subres::scaling::DeltaGrid;
use subres::spade::{build_spade, generalized_moments, mode_probabilities};
use subres::submodel::{purified_score_norm, TiltedSubmodel, Truncation};
use subres::Measure;

const PREC: u32 = 256;

fn gaussian_q() -> Measure {
    Measure::gaussian_frequency(STANDARD_GAUSSIAN_VARIANCE, PREC).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cholesky_reproduces_hankel(delta in 0.01f64..2.0, j in 1usize..12) {
        let f = factorize(&Measure::quadratic(delta, PREC).unwrap(), j).unwrap();
        let l = &f.cholesky.entries;
        let rebuilt = l.matmul(&l.transpose());
        let residual = rebuilt.sub(&f.hankel.entries).max_abs().to_f64();
        let scale = f.hankel.entries.max_abs().to_f64();
        prop_assert!(residual <= 1e-60 * scale, "residual {residual:e}");
        for n in 0..=j {
            prop_assert!(l[(n, n)].is_sign_positive());
        }
    }

    #[test]
    fn uniform_moments_scale(delta in 0.01f64..3.0, p in 0usize..10) {
        let m = Measure::uniform(delta, PREC).unwrap().moment(p).unwrap().to_f64();
        let want = if p % 2 == 1 { 0.0 } else { delta.powi(p as i32) / (p + 1) as f64 };
        prop_assert!((m - want).abs() <= 1e-14 * delta.powi(p as i32), "{m} vs {want}");
    }

    #[test]
    fn mode_probabilities_form_a_distribution(delta in 0.01f64..0.5) {
        let model = build_spade(&gaussian_q(), 4).unwrap();
        let probs = mode_probabilities(&model, &Measure::truncated_gaussian(delta, 0.5 * delta, PREC).unwrap()).unwrap();
        let total: f64 = probs.pad.iter().sum();
        prop_assert!(total <= 1.0 + 1e-12);
        for n in 0..probs.ipad_plus.len() {
            prop_assert!(probs.ipad_plus[n] >= 0.0 && probs.ipad_minus[n] >= 0.0);
            let d = probs.ipad_plus[n] - probs.ipad_minus[n];
            prop_assert!((d - probs.ipad_difference[n]).abs() <= 1e-12);
        }
    }

    #[test]
    fn symmetric_objects_have_vanishing_odd_generalized_moments(delta in 0.01f64..0.5) {
        let model = build_spade(&gaussian_q(), 3).unwrap();
        let beta = generalized_moments(&model, &Measure::quadratic(delta, PREC).unwrap()).unwrap();
        for k in (1..beta.len()).step_by(2) {
            prop_assert!(beta[k].abs() <= 1e-12 * beta[0], "β_{k} = {}", beta[k]);
        }
    }

    #[test]
    fn geometric_grid_is_increasing(lo in 1e-4f64..1.0, ratio in 1.01f64..100.0, n in 2usize..40) {
        let grid = DeltaGrid::geometric(lo, lo * ratio, n).unwrap();
        let v = grid.values();
        prop_assert_eq!(v.len(), n);
        prop_assert!(v.windows(2).all(|w| w[1] > w[0]));
        prop_assert!((v[0] - lo).abs() <= 1e-12 * lo);
        prop_assert!((v[n - 1] - lo * ratio).abs() <= 1e-12 * lo * ratio);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn direct_fisher_never_exceeds_quantum_limit(delta in 0.01f64..0.3, mu in 1usize..4) {
        let q = gaussian_q();
        let psf = Psf::matched_to(&q).unwrap();
        let sub = TiltedSubmodel::new(&Measure::uniform(delta, PREC).unwrap(), mu).unwrap();
        let gram = purified_score_norm(&sub, &q, Truncation::default()).unwrap().gram;
        let fisher = submodel_fisher(&psf, &sub, 1.0, false).unwrap().fisher;
        prop_assert!(fisher <= 4.0 * gram, "F = {fisher:e}, 4g = {:e}", 4.0 * gram);
    }
}

#[test]
fn matched_psf_width() {
    let psf = Psf::matched_to(&gaussian_q()).unwrap();
    assert_relative_eq!(psf.width(), 0.5 / STANDARD_GAUSSIAN_VARIANCE.sqrt(), max_relative = 1e-15);
}
