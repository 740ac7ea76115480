use num_complex::Complex64;
use spectrode::esd::{ode_rhs, stieltjes_point};
use spectrode::fpa::{fpa_density_grid, fpa_solve};
use spectrode::functionals::{clt_mean, contour_stieltjes, esd_cdf, esd_mode, esd_moment, esd_quantile, ContourSpec};
use spectrode::oracles::{mp_density, mp_edges, solve_cubic, twopoint_density};
use spectrode::silverstein::{h_integral_1, h_integral_2, silverstein_residual, z_of_v, z_prime};
use spectrode::*;
use std::f64::consts::PI;

const MP_LOG_MOMENT: f64 = -0.306_852_819_440_054_7;
const MP_LOG2_MOMENT: f64 = 0.817_280_663_973_731_5;
const CLT_LOG: f64 = -0.346_573_590_279_973;
const CLT_LOG2: f64 = 1.211_624_780_285_48;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn mp() -> PopulationSpectrum {
    PopulationSpectrum::identity()
}

fn two_point() -> PopulationSpectrum {
    PopulationSpectrum::two_point(0.5, 8.0).unwrap()
}

/// Support of an atomic spectrum from a dense scan of the sign of `z'(v)`
/// at step `h`, written without the library's kernels.
fn fine_scan_support(atoms: &[(f64, f64)], gamma: f64, h: f64) -> Vec<(f64, f64)> {
    let z = |v: f64| -1.0 / v + gamma * atoms.iter().map(|&(t, w)| w * t / (1.0 + t * v)).sum::<f64>();
    let zp = |v: f64| 1.0 / (v * v) - gamma * atoms.iter().map(|&(t, w)| w * t * t / (1.0 + t * v).powi(2)).sum::<f64>();
    let mut poles: Vec<f64> = atoms.iter().map(|&(t, _)| -1.0 / t).collect();
    poles.sort_by(f64::total_cmp);
    let mut bounds = vec![poles[0] - 50.0];
    bounds.extend(&poles);
    bounds.push(-h);
    let mut increasing: Vec<(f64, f64)> = Vec::new();
    for w in bounds.windows(2) {
        let (lo, hi) = (w[0] + h, w[1] - h);
        let n = ((hi - lo) / h) as usize;
        let mut start: Option<f64> = None;
        for i in 0..=n {
            let v = lo + i as f64 * h;
            if zp(v) > 0.0 {
                start.get_or_insert(v);
            } else if let Some(s) = start.take() {
                increasing.push((s, v - h));
            }
        }
        if let Some(s) = start {
            increasing.push((s, hi));
        }
    }
    let mut out = Vec::new();
    for pair in increasing.windows(2) {
        out.push((z(pair[0].1), z(pair[1].0)));
    }
    out
}

fn sup_error(esd: &SpectralDensity, truth: impl Fn(f64) -> f64) -> f64 {
    esd.intervals
        .iter()
        .flat_map(|iv| iv.grid.iter().zip(&iv.values).map(|(&x, &f)| (f - truth(x)).abs()).collect::<Vec<_>>())
        .fold(0.0, f64::max)
}

mod model_examples {
    use super::*;

    #[test]
    fn identity_spectrum_is_valid() {
        let psd = validate_psd(&[(1.0, 1.0)], &[]).unwrap();
        assert_eq!(psd, PopulationSpectrum::identity());
    }

    #[test]
    fn two_point_spectrum_is_valid() {
        let psd = validate_psd(&[(8.0, 0.5), (1.0, 0.5)], &[]).unwrap();
        assert_eq!(psd.atoms()[0].t, 1.0);
        assert_eq!(psd, two_point());
    }

    #[test]
    fn boxcar_mixture_preset_matches_its_definition() {
        let atoms: Vec<(f64, f64)> = (0..10).map(|i| (2.0 + i as f64, 0.0275 + 0.005 * i as f64)).collect();
        let psd = validate_psd(&atoms, &[(0.5, 1.5, 0.5)]).unwrap();
        assert_eq!(psd, PopulationSpectrum::boxcar_mixture());
        assert_eq!(psd.component_count(), 11);
    }

    #[test]
    fn rejects_invalid_components() {
        assert!(matches!(validate_psd(&[(-1.0, 1.0)], &[]), Err(Error::NonPositiveEigenvalue(_))));
        assert!(matches!(validate_psd(&[(1.0, 0.5)], &[]), Err(Error::WeightsDoNotSumToOne(_))));
        assert!(matches!(validate_psd(&[(1.0, 0.5), (1.0, 0.5)], &[]), Err(Error::DuplicateAtom(_))));
        assert!(matches!(validate_psd(&[], &[(2.0, 1.0, 1.0)]), Err(Error::DegenerateUniform(..))));
    }

    #[test]
    fn near_unit_weights_are_renormalized() {
        let psd = validate_psd(&[(1.0, 0.5 + 4e-10), (2.0, 0.5)], &[]).unwrap();
        let total: f64 = psd.atoms().iter().map(|a| a.w).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn comb_of_six_on_half_to_ten() {
        let psd = comb_psd(6, 0.01, 0.5, 1.9).unwrap();
        let atoms = psd.atoms();
        assert_eq!(atoms.len(), 6);
        assert!((atoms[5].t - 10.0).abs() < 1e-12);
        for pair in atoms.windows(2) {
            assert!((pair[1].w - pair[0].w - 0.01).abs() < 1e-12);
        }
        assert!((atoms.iter().map(|a| a.w).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn comb_edge_cases() {
        assert_eq!(comb_psd(1, 0.01, 3.0, 1.0).unwrap().atoms()[0].w, 1.0);
        let equal = comb_psd(3, 0.0, 1.0, 1.0).unwrap();
        assert!(equal.atoms().iter().all(|a| (a.w - 1.0 / 3.0).abs() < 1e-15));
        assert!(matches!(comb_psd(6, 0.2, 1.0, 1.0), Err(Error::InvalidComb { .. })));
    }

    #[test]
    fn gamma_one_is_rejected_everywhere() {
        let p = Precision::new(1e-4).unwrap();
        assert_eq!(check_gamma(1.0), Err(Error::GammaEqualsOne));
        assert_eq!(compute_esd(&mp(), 1.0, &p).unwrap_err(), Error::GammaEqualsOne);
        assert_eq!(find_support(&mp(), 1.0, 1e-4).unwrap_err(), Error::GammaEqualsOne);
        assert_eq!(fpa_solve(&mp(), 1.0, c(1.0, 1.0), 1e-6, 10).unwrap_err(), Error::GammaEqualsOne);
    }

    #[test]
    fn precision_defaults() {
        let p = Precision::new(1e-4).unwrap();
        assert_eq!(p.grid_size_per_interval, 100);
        assert_eq!(p.delta, 1e-8);
        assert_eq!(p.eta, 1e-4);
        assert!(Precision::new(1e-11).is_err());
        assert!(Precision::new(0.0).is_err());
    }

    #[test]
    fn psd_json_round_trip() {
        let psd = PopulationSpectrum::boxcar_mixture();
        assert_eq!(PopulationSpectrum::from_json(&psd.to_json()).unwrap(), psd);
    }
}

mod silverstein_examples {
    use super::*;

    #[test]
    fn first_integral() {
        assert!((h_integral_1(&mp(), c(1.0, 0.0)).unwrap() - 0.5).norm() < 1e-15);
        let u = validate_psd(&[], &[(0.5, 1.5, 1.0)]).unwrap();
        assert!((h_integral_1(&u, c(1e-8, 0.0)).unwrap() - 1.0).norm() < 1e-7);
        let v = h_integral_1(&two_point(), c(-0.25, 0.0)).unwrap();
        assert!((v - (0.5 / 0.75 - 4.0)).norm() < 1e-13);
    }

    #[test]
    fn second_integral() {
        assert!((h_integral_2(&mp(), c(1.0, 0.0)).unwrap() - 0.25).norm() < 1e-15);
        let u = validate_psd(&[], &[(0.5, 1.5, 1.0)]).unwrap();
        assert!((h_integral_2(&u, c(1e-8, 0.0)).unwrap() - 13.0 / 12.0).norm() < 1e-7);
        let v = h_integral_2(&two_point(), c(-0.25, 0.0)).unwrap();
        assert!((v - (0.5 / 0.5625 + 32.0)).norm() < 1e-12);
    }

    #[test]
    fn mp_edges_are_images_of_critical_points() {
        let g: f64 = 0.5;
        let upper = z_of_v(&mp(), g, c(-1.0 / (1.0 + g.sqrt()), 0.0)).unwrap();
        let lower = z_of_v(&mp(), g, c(1.0 / (g.sqrt() - 1.0), 0.0)).unwrap();
        assert!((upper.re - (1.0 + g.sqrt()).powi(2)).abs() < 1e-12);
        assert!((lower.re - (1.0 - g.sqrt()).powi(2)).abs() < 1e-12);
        assert!(z_prime(&mp(), g, c(-1.0 / (1.0 + g.sqrt()), 0.0)).unwrap().norm() < 1e-12);
    }

    #[test]
    fn z_is_negative_on_positive_reals() {
        for v in [1e-3, 0.5, 1.0, 10.0, 1e4] {
            assert!(z_of_v(&PopulationSpectrum::boxcar_mixture(), 0.3, c(v, 0.0)).unwrap().re < 0.0);
        }
    }

    #[test]
    fn derivative_signs() {
        let inside = z_prime(&mp(), 0.5, c(-1.5, 0.0)).unwrap();
        assert!((inside.re - (1.0 / 2.25 - 2.0)).abs() < 1e-13);
        let left = z_prime(&mp(), 0.5, c(-10.0, 0.0)).unwrap();
        assert!((left.re - (0.01 - 0.5 / 81.0)).abs() < 1e-15);
        assert!(left.re > 0.0);
    }

    #[test]
    fn residual_of_exact_solution() {
        let g = 0.5;
        for z in [c(1.3, 0.2), c(0.5, 1e-3), c(4.0, 2.0)] {
            let b = z + 1.0 - g;
            let disc = (b * b - 4.0 * z).sqrt();
            let v = [(-b + disc) / (2.0 * z), (-b - disc) / (2.0 * z)].into_iter().find(|v| v.im > 0.0).unwrap();
            assert!(silverstein_residual(&mp(), g, z, v).unwrap() < 1e-12);
        }
    }

    #[test]
    fn residual_detects_mismatch() {
        assert!(silverstein_residual(&mp(), 0.5, c(1.0, 0.1), c(0.3, 0.3)).unwrap() > 0.1);
        let z = c(50.0, 1.0);
        let v = -1.0 / z;
        let r = silverstein_residual(&mp(), 1e-9, z, v).unwrap();
        let expected = 1e-9 * h_integral_1(&mp(), v).unwrap().norm();
        assert!((r - expected).abs() < 1e-4 * expected);
    }
}

mod fpa_examples {
    use super::*;

    #[test]
    fn mp_iteration_is_neutral_at_height_eta_squared() {
        let r = fpa_solve(&mp(), 0.5, c(1.0, 0.0), 1e-6, 1_000_000).unwrap();
        assert_eq!(r.lift, 1e-12);
        assert!(!r.converged && r.sample.residual > 1e-6);
        assert!(matches!(r.into_converged(), Err(Error::NotConverged { .. })));
        let s = stieltjes_point(&mp(), 0.5, c(1.0, 1e-12)).unwrap();
        assert!((s.density() - 1.75f64.sqrt() / PI).abs() < 1e-9);
    }

    #[test]
    fn mp_density_at_one_with_coarse_eta() {
        let r = fpa_solve(&mp(), 0.5, c(1.0, 0.0), 1e-2, 1_000_000).unwrap();
        assert!(r.converged);
        assert!((r.density() - 1.75f64.sqrt() / PI).abs() < 1e-2);
    }

    #[test]
    fn tiny_gamma_converges_immediately() {
        let r = fpa_solve(&mp(), 1e-12, c(0.7, 0.4), 1e-6, 100).unwrap();
        assert!(r.converged && r.iterations <= 2);
        assert!((r.sample.v + 1.0 / c(0.7, 0.4)).norm() < 1e-9);
    }

    #[test]
    fn two_point_density_at_one() {
        let r = fpa_solve(&two_point(), 0.5, c(1.0, 0.0), 1e-6, 1_000_000).unwrap();
        let truth = twopoint_density(0.5, 0.5, 8.0, 1.0).unwrap();
        assert!((r.density() - truth).abs() < 1e-3);
    }

    #[test]
    fn converged_grid_points_follow_eta() {
        let r = find_support(&two_point(), 0.5, 1e-4).unwrap();
        let (lo, hi) = r.endpoints[1];
        let grid: Vec<f64> = (1..=100).map(|i| lo + (hi - lo) * i as f64 / 101.0).collect();
        let points = fpa_density_grid(&two_point(), 0.5, &grid, 1e-4, 1_000_000).unwrap();
        assert!(points.iter().all(|p| p.converged));
        for p in points {
            let truth = twopoint_density(0.5, 0.5, 8.0, p.x).unwrap();
            assert!((p.density - truth).abs() <= 1e-3, "x = {}", p.x);
        }
    }

    #[test]
    fn single_point_grid_matches_solve() {
        let p = fpa_density_grid(&two_point(), 0.5, &[3.0], 1e-6, 100_000).unwrap();
        let r = fpa_solve(&two_point(), 0.5, c(3.0, 0.0), 1e-6, 100_000).unwrap();
        assert_eq!(p[0].density, r.density().max(0.0));
        assert_eq!(p[0].iterations, r.iterations);
    }

    #[test]
    fn outside_support_density_is_small() {
        let grid = [4.0, 5.0, 8.0, 20.0];
        for p in fpa_density_grid(&mp(), 0.5, &grid, 1e-4, 1_000_000).unwrap() {
            assert!(p.density <= 1e-4, "x = {} density = {}", p.x, p.density);
        }
    }
}

mod support_examples {
    use super::*;

    #[test]
    fn mp_lower_edges() {
        let (_, l) = find_leftmost_edge(&mp(), 0.5, 1e-5).unwrap();
        assert!((l - (1.0 - 0.5f64.sqrt()).powi(2)).abs() < 1e-4);
        let (_, l) = find_leftmost_edge(&mp(), 0.25, 1e-5).unwrap();
        assert!((l - 0.25).abs() < 1e-4);
    }

    #[test]
    fn comb_lower_edge_approaches_smallest_atom() {
        let comb = comb_psd(6, 0.01, 0.5, 1.9).unwrap();
        let mut previous = 0.0;
        for g in [1.0 / 8.0, 1.0 / 32.0, 1.0 / 128.0, 1.0 / 1024.0] {
            let (_, l) = find_leftmost_edge(&comb, g, 1e-6).unwrap();
            assert!(l < 0.5 && l > previous);
            previous = l;
        }
        assert!(0.5 - previous < 0.05);
    }

    #[test]
    fn mp_support() {
        let r = find_support(&mp(), 0.5, 1e-4).unwrap();
        assert_eq!(r.k_hat, 1);
        let (lo, hi) = mp_edges(0.5);
        assert!((r.endpoints[0].0 - lo).abs() < 1e-3 && (r.endpoints[0].1 - hi).abs() < 1e-3);
    }

    #[test]
    fn mp_support_above_one() {
        let r = find_support(&mp(), 4.0, 1e-4).unwrap();
        assert_eq!(r.k_hat, 1);
        assert!((r.endpoints[0].0 - 1.0).abs() < 1e-3 && (r.endpoints[0].1 - 9.0).abs() < 1e-3);
        assert_eq!(r.zero_mass, 0.75);
    }

    #[test]
    fn two_point_support_matches_fine_scan() {
        let oracle = fine_scan_support(&[(1.0, 0.5), (8.0, 0.5)], 0.5, 1e-6);
        let r = find_support(&two_point(), 0.5, 1e-6).unwrap();
        assert_eq!(r.k_hat, oracle.len());
        for (&(l, u), &(ol, ou)) in r.endpoints.iter().zip(&oracle) {
            assert!((l - ol).abs() < 1e-3 && (u - ou).abs() < 1e-3, "{l} {u} vs {ol} {ou}");
        }
    }

    #[test]
    fn comb_cluster_count_is_stable_under_halving() {
        let comb = comb_psd(6, 0.01, 0.5, 1.9).unwrap();
        for k in 2..=5 {
            let g = 2f64.powi(-k);
            let counts: Vec<usize> =
                [1e-4, 5e-5, 2.5e-5].iter().map(|&e| find_support(&comb, g, e).unwrap().k_hat).collect();
            assert!(counts.windows(2).all(|w| w[0] == w[1]), "gamma {g}: {counts:?}");
        }
    }
}

mod esd_examples {
    use super::*;

    #[test]
    fn rhs_at_i() {
        let r = ode_rhs(&mp(), 0.5, Complex64::i()).unwrap();
        assert!((r - 1.0 / c(-1.0, 0.25)).norm() < 1e-14);
    }

    #[test]
    fn rhs_small_gamma_and_conjugation() {
        let v = c(-0.3, 0.8);
        assert!((ode_rhs(&mp(), 1e-14, v).unwrap() - v * v).norm() < 1e-12);
        let psd = PopulationSpectrum::boxcar_mixture();
        let r = ode_rhs(&psd, 0.3, v).unwrap();
        assert!((ode_rhs(&psd, 0.3, v.conj()).unwrap() - r.conj()).norm() < 1e-13 * r.norm());
    }

    #[test]
    fn mp_interval_value_at_one() {
        let p = Precision::new(1e-6).unwrap();
        let r = find_support(&mp(), 0.5, 1e-6).unwrap();
        let (l, u) = r.endpoints[0];
        let trace = solve_interval(&mp(), 0.5, l, u, &p).unwrap();
        assert!(trace.max_residual <= 1e-6);
        let esd = compute_esd(&mp(), 0.5, &p).unwrap();
        assert!((evaluate_density(&esd, 1.0) - 1.75f64.sqrt() / PI).abs() < 1e-5);
    }

    #[test]
    fn two_point_grid_matches_cubic_oracle() {
        let esd = compute_esd(&two_point(), 0.5, &Precision::new(1e-6).unwrap()).unwrap();
        assert!(sup_error(&esd, |x| twopoint_density(0.5, 0.5, 8.0, x).unwrap()) < 1e-4);
    }

    #[test]
    fn mp_sup_error_at_coarse_epsilon() {
        let esd = compute_esd(&mp(), 0.5, &Precision::new(1e-4).unwrap()).unwrap();
        assert!(sup_error(&esd, |x| mp_density(0.5, x)) < 1e-4);
    }

    #[test]
    fn mp_above_one_has_quarter_continuous_mass() {
        let esd = compute_esd(&mp(), 4.0, &Precision::new(1e-6).unwrap()).unwrap();
        assert_eq!(esd.zero_mass, 0.75);
        assert!((esd.continuous_mass() - 0.25).abs() < 1e-3);
        assert!(sup_error(&esd, |x| mp_density(4.0, x)) < 1e-5);
    }

    #[test]
    fn boxcar_mixture_has_eleven_clusters() {
        let esd = compute_esd(&PopulationSpectrum::boxcar_mixture(), 0.01, &Precision::new(1e-4).unwrap()).unwrap();
        assert_eq!(esd.k_hat(), 11);
    }

    #[test]
    fn evaluation_interpolates() {
        let esd = compute_esd(&mp(), 0.5, &Precision::new(1e-4).unwrap()).unwrap();
        let iv = &esd.intervals[0];
        assert_eq!(evaluate_density(&esd, iv.lower - 1e-3), 0.0);
        assert_eq!(evaluate_density(&esd, iv.grid[7]), iv.values[7]);
        let mid = 0.5 * (iv.grid[7] + iv.grid[8]);
        assert!((evaluate_density(&esd, mid) - 0.5 * (iv.values[7] + iv.values[8])).abs() < 1e-15);
    }

    #[test]
    fn point_solver_agrees_with_closed_form() {
        let s = stieltjes_point(&mp(), 0.5, c(2.0, 1e-12)).unwrap();
        assert!((s.density() - mp_density(0.5, 2.0)).abs() < 1e-9);
    }
}

mod functional_examples {
    use super::*;

    fn mp_esd(eps: f64) -> SpectralDensity {
        compute_esd(&mp(), 0.5, &Precision::new(eps).unwrap()).unwrap()
    }

    #[test]
    fn mp_moments() {
        let esd = mp_esd(1e-8);
        assert!((esd_moment(&esd, |x| x).unwrap() - 1.0).abs() < 1e-5);
        assert!((esd_moment(&esd, f64::ln).unwrap() - MP_LOG_MOMENT).abs() < 1e-4);
        assert!((esd_moment(&esd, |x| x.ln().powi(2)).unwrap() - MP_LOG2_MOMENT).abs() < 1e-3);
        assert!((esd_moment(&esd, |_| 1.0).unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn non_finite_test_function_is_reported() {
        let esd = compute_esd(&mp(), 4.0, &Precision::new(1e-4).unwrap()).unwrap();
        assert!(matches!(esd_moment(&esd, f64::ln), Err(Error::NonFiniteH { .. })));
    }

    #[test]
    fn quantiles() {
        let small = compute_esd(&mp(), 1e-3, &Precision::new(1e-4).unwrap()).unwrap();
        assert!((esd_quantile(&small, 0.5).unwrap() - 1.0).abs() < 0.01);
        let esd = mp_esd(1e-6);
        let median = esd_quantile(&esd, 0.5).unwrap();
        let (lo, hi) = mp_edges(0.5);
        assert!(median > lo && median < hi);
        let mass = spectrode::quadrature::integrate_real(|x| mp_density(0.5, x), lo, median, 1e-12);
        assert!((mass - 0.5).abs() < 1e-3);
        let above = compute_esd(&mp(), 4.0, &Precision::new(1e-4).unwrap()).unwrap();
        assert_eq!(esd_quantile(&above, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn mode() {
        let esd = mp_esd(1e-6);
        let m = esd_mode(&esd).unwrap();
        let (lo, hi) = mp_edges(0.5);
        let dense = (0..=200_000).map(|i| lo + (hi - lo) * i as f64 / 200_000.0);
        let argmax = dense.max_by(|a, b| mp_density(0.5, *a).total_cmp(&mp_density(0.5, *b))).unwrap();
        let step = esd.intervals[0].grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        assert!((m - argmax).abs() <= step);
        let mut doubled = esd.clone();
        doubled.intervals[0].values.iter_mut().for_each(|f| *f *= 2.0);
        assert_eq!(esd_mode(&doubled).unwrap(), m);
    }

    #[test]
    fn narrow_uniform_mode_is_near_centre() {
        let psd = validate_psd(&[], &[(2.0, 2.2, 1.0)]).unwrap();
        let esd = compute_esd(&psd, 1e-4, &Precision::new(1e-6).unwrap()).unwrap();
        assert!((esd_mode(&esd).unwrap() - 2.1).abs() < 0.1);
    }

    #[test]
    fn quantile_and_cdf_agree() {
        let esd = compute_esd(&two_point(), 0.5, &Precision::new(1e-4).unwrap()).unwrap();
        for p in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let q = esd_quantile(&esd, p).unwrap();
            assert!((esd_cdf(&esd, q) - p).abs() < 1e-3);
        }
    }

    #[test]
    fn constant_and_zero_integrands_vanish() {
        let contour = ContourSpec::through_origin(1.1 * mp_edges(0.5).1);
        let p = Precision::new(1e-6).unwrap();
        let zero = contour_stieltjes(&mp(), 0.5, &contour, |_, _| c(0.0, 0.0), &p).unwrap();
        assert_eq!(zero, c(0.0, 0.0));
        let one = contour_stieltjes(&mp(), 0.5, &contour, |_, _| c(1.0, 0.0), &p).unwrap();
        assert!(one.norm() < 1e-10);
    }

    #[test]
    fn clt_means_for_mp() {
        let g: f64 = 0.5;
        let contour = ContourSpec::through_origin(1.1 * (1.0 + g.sqrt()).powi(2));
        let p = Precision::new(1e-8).unwrap();
        let x = clt_mean(&mp(), g, |z| z, &contour, &p).unwrap();
        assert!(x.value.abs() < 1e-8 && x.imag_residual.abs() < 1e-8);
        let log = clt_mean(&mp(), g, |z: Complex64| z.ln(), &contour, &p).unwrap();
        assert!((log.value - CLT_LOG).abs() < 1e-4);
        let log2 = clt_mean(&mp(), g, |z: Complex64| z.ln().powi(2), &contour, &p).unwrap();
        assert!((log2.value - CLT_LOG2).abs() < 1e-3);
    }

    #[test]
    fn contour_crossing_the_support_is_rejected() {
        let contour = ContourSpec::through_origin(1.0);
        let p = Precision::new(1e-4).unwrap();
        let r = clt_mean(&mp(), 0.5, |z| z, &contour, &p);
        assert!(matches!(r, Err(Error::ContourTouchesSupport { .. })));
    }
}

mod oracle_examples {
    use super::*;
    use spectrode::oracles::{mc_esd, MonteCarlo};

    #[test]
    fn mp_closed_form() {
        assert!((mp_density(0.5, 1.0) - 1.75f64.sqrt() / PI).abs() < 1e-15);
        assert_eq!(mp_density(0.5, mp_edges(0.5).1), 0.0);
        assert_eq!(mp_density(0.5, 3.0), 0.0);
    }

    #[test]
    fn cubic_roots_satisfy_the_polynomial() {
        let roots = solve_cubic(8.0, 13.0, 7.75, 1.0).unwrap();
        for r in roots {
            let value = ((8.0 * r + 13.0) * r + 7.75) * r + 1.0;
            assert!(value.norm() < 1e-10 * 13.0);
        }
        assert_eq!(roots.iter().filter(|r| r.im > 0.0).count(), 1);
        assert!(matches!(solve_cubic(1e-16, 1.0, 1.0, 1.0), Err(Error::DegenerateCubic(_))));
    }

    #[test]
    fn two_point_limits() {
        for x in [0.2, 0.7, 1.0, 2.0, 2.8] {
            let q = twopoint_density(0.5, 1.0 - 1e-9, 8.0, x).unwrap();
            assert!((q - mp_density(0.5, x)).abs() < 1e-6, "x = {x}");
        }
        assert_eq!(twopoint_density(0.5, 0.5, 8.0, 50.0).unwrap(), 0.0);
    }

    #[test]
    fn monte_carlo_is_deterministic_and_improves_with_dimension() {
        let grid: Vec<f64> = (1..=50).map(|i| 0.1 + 2.8 * i as f64 / 51.0).collect();
        let a = mc_esd(&mp(), 0.5, &MonteCarlo::new(40, 1, 7), &grid).unwrap();
        let b = mc_esd(&mp(), 0.5, &MonteCarlo::new(40, 1, 7), &grid).unwrap();
        assert_eq!(a, b);
        let mae = |p: usize| {
            let est = mc_esd(&mp(), 0.5, &MonteCarlo::new(p, 4, 11), &grid).unwrap();
            est.iter().zip(&grid).map(|(f, &x)| (f - mp_density(0.5, x)).abs()).sum::<f64>() / grid.len() as f64
        };
        assert!(mae(400) < mae(10));
        let capped = MonteCarlo { max_dimension: 100, ..MonteCarlo::new(200, 1, 1) };
        assert!(matches!(mc_esd(&mp(), 0.5, &capped, &grid), Err(Error::DimensionTooLarge { .. })));
    }
}

mod bench_examples {
    use super::*;
    use spectrode::bench::{run_support_experiment, run_timing, Problem, TimingConfig};

    #[test]
    fn coarse_timing_rows() {
        let quick = TimingConfig { warmups: 0, repeats: 1, parallel: false };
        let r = run_timing(Problem::MarchenkoPastur, &[1e-1, 1e-2], 0.5, &quick).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert!(r.rows.iter().all(|row| row.error.is_none()));
        let fpa: Vec<_> = r.rows.iter().filter(|row| row.method == "fpa").collect();
        assert!(fpa[0].fpa_iterations <= fpa[1].fpa_iterations);
        let tp = run_timing(Problem::TwoPoint { q: 0.5, t: 8.0 }, &[1e-6], 0.5, &quick).unwrap();
        assert!(tp.rows[0].mean_digits >= 5.0);
    }

    #[test]
    fn raw_points_reproduce_summary() {
        let quick = TimingConfig { warmups: 0, repeats: 1, parallel: false };
        let r = run_timing(Problem::MarchenkoPastur, &[1e-3], 0.5, &quick).unwrap();
        for row in &r.rows {
            let pts: Vec<_> = r.raw.iter().filter(|p| p.method == row.method).collect();
            let mae = pts.iter().map(|p| (p.estimate - p.truth).abs()).sum::<f64>() / pts.len() as f64;
            assert!((-mae.log10() - row.mean_digits).abs() < 1e-12);
        }
    }

    #[test]
    fn gold_standard_must_be_finer() {
        let comb = comb_psd(6, 0.01, 0.5, 1.9).unwrap();
        assert!(run_support_experiment(&comb, &[0.25], &[1e-5], 1e-5).is_err());
        let rows = run_support_experiment(&comb, &[0.25], &[1e-5], 1e-7).unwrap();
        assert_eq!(rows[0].delta_k, 0);
    }
}
