use std::f64::consts::PI;

use dampwave::asymptotics::log_times;
use dampwave::audit::{
    bound_terms, central_difference, decay_fit, decay_fit_with, dilation_scan, heat_l1_series, inequality_check,
    part_norm, symbol_bound_scan, BoundId, Inequality, Jet2,
};
use dampwave::elastic::LameParams;
use dampwave::field::{PhysicalField, SpectralField};
use dampwave::grid::{CutoffSpec, FrequencyPart, Grid3};
use dampwave::harness::{band_random_field, shell_field};
use dampwave::kernels::{DampingParams, KernelKind};
use dampwave::norms::seminorm;
use dampwave::Error;
use num_complex::Complex64 as C;
use proptest::prelude::*;

fn lame() -> LameParams {
    LameParams::new(0.0, 1.0, 1.0).unwrap()
}

fn fit_grid() -> Grid3 {
    Grid3::new(32, 2.0 * PI).unwrap()
}

fn gaussian(s: f64, dir: [f64; 3]) -> impl Fn([f64; 3]) -> [f64; 3] {
    move |x| {
        let v = (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * s * s)).exp();
        [v * dir[0], v * dir[1], v * dir[2]]
    }
}

fn linear_times(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

#[test]
fn radial_derivatives_of_gaussian() {
    for r in [0.1f64, 0.5, 1.0, 1.7, 3.0] {
        let d_exact = -2.0 * r * (-r * r).exp();
        let dd_exact = (4.0 * r * r - 2.0) * (-r * r).exp();
        let (d, _) = central_difference(|x| (-x * x).exp(), r, 1e-5 * r);
        assert!((d - d_exact).abs() < 1e-8, "r={r}");
        let (_, dd) = central_difference(|x| (-x * x).exp(), r, 1e-3 * r);
        assert!((dd - dd_exact).abs() < 1e-5, "r={r}");
        let x = Jet2::var(r);
        let j = (-(x * x)).exp();
        assert!((j.d - d_exact).abs() < 1e-15);
        assert!((j.dd - dd_exact).abs() < 1e-14);
    }
}

#[test]
fn scale_invariant_ratios_survive_dilation() {
    let g = Grid3::new(128, 28.0).unwrap();
    let lambdas = [0.5, 1.0, 2.0];
    for ineq in [
        Inequality::GnInf,
        Inequality::GnL1,
        Inequality::Grad2p { p: 1.0 },
        Inequality::Grad2p { p: 2.0 },
        Inequality::Sob6,
    ] {
        let r = dilation_scan(&ineq, &g, gaussian(1.0, [1.0, 0.5, -0.25]), &lambdas).unwrap();
        for v in &r {
            assert!((v / r[1] - 1.0).abs() < 1e-6, "{ineq:?}: {r:?}");
        }
    }
}

#[test]
fn sobolev_six_matches_quadrature() {
    // g = (sin x1 + cos 2 x2 / 2) e1 on the 2 pi box
    let g = Grid3::new(16, 2.0 * PI).unwrap();
    let f = |x: [f64; 3]| [x[0].sin() + 0.5 * (2.0 * x[1]).cos(), 0.0, 0.0];
    let ratio = inequality_check(&Inequality::Sob6, &PhysicalField::from_fn(g, f)).unwrap();
    let m = 400;
    let h = 2.0 * PI / m as f64;
    let mut sum = 0.0;
    for i in 0..m {
        for j in 0..m {
            let (a, b) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
            sum += (a.sin() + 0.5 * (2.0 * b).cos()).powi(6);
        }
    }
    let l6 = (sum * h * h * 2.0 * PI).powf(1.0 / 6.0);
    // |grad g|_2^2 = (2 pi)^3 (1/2 + 1/2)
    let want = l6 / (2.0 * PI).powf(1.5);
    assert!((ratio - want).abs() <= 1e-4 * want, "{ratio} vs {want}");
}

#[test]
fn low_high_split_is_stable_under_refinement() {
    let family: Vec<Box<dyn Fn([f64; 3]) -> [f64; 3]>> = (0..20)
        .map(|k| {
            let s = 0.8 + 0.1 * k as f64;
            let b: Box<dyn Fn([f64; 3]) -> [f64; 3]> = if k % 2 == 0 {
                Box::new(gaussian(s, [1.0, 0.0, 0.0]))
            } else {
                Box::new(move |x: [f64; 3]| {
                    let v = (-(x[0] * x[0] / (s * s) + x[1] * x[1] + 2.0 * x[2] * x[2]) / 2.0).exp();
                    [x[0] * v, v, 0.0]
                })
            };
            b
        })
        .collect();
    let sup = |n: usize| {
        let g = Grid3::new(n, 24.0).unwrap();
        family
            .iter()
            .map(|f| inequality_check(&Inequality::LowHighSplit, &PhysicalField::from_fn(g, f)).unwrap())
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (sup(64), sup(96));
    assert!(coarse.is_finite() && coarse > 0.0);
    assert!((coarse / fine - 1.0).abs() < 0.01, "{coarse} vs {fine}");
}

#[test]
fn riesz_and_degenerate_inputs() {
    let g = Grid3::new(8, 6.0).unwrap();
    assert!(matches!(
        inequality_check(&Inequality::GnInf, &PhysicalField::zeros(g)),
        Err(Error::DegenerateInput(_))
    ));
    let f = PhysicalField::from_fn(g, gaussian(1.0, [1.0, 0.0, 0.0]));
    assert!(matches!(inequality_check(&Inequality::Riesz { axis: 0, p: 1.0 }, &f), Err(Error::InvalidExponent(_))));
    assert!(matches!(inequality_check(&Inequality::Riesz { axis: 3, p: 2.0 }, &f), Err(Error::InvalidParams(_))));
    let r4 = inequality_check(&Inequality::Riesz { axis: 1, p: 4.0 }, &f).unwrap();
    assert!(r4.is_finite() && r4 > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn riesz_is_an_l2_contraction(seed in any::<u64>(), axis in 0usize..3) {
        let g = Grid3::new(8, 2.0 * PI).unwrap();
        let f = band_random_field(g, seed, [0.0, 4.0]).to_physical();
        let r = inequality_check(&Inequality::Riesz { axis, p: 2.0 }, &f).unwrap();
        prop_assert!(r <= 1.0 + 1e-12);
    }
}

#[test]
fn high_part_decays_exponentially() {
    let g = PhysicalField::from_fn(fit_grid(), gaussian(0.3, [1.0, -1.0, 0.3])).to_spectral();
    let grad = seminorm(&g, 1);
    let times = linear_times(0.1, 30.0, 30);
    let fit = decay_fit(FrequencyPart::High, KernelKind::K1, &g, &lame(), &times, grad).unwrap();
    assert!(fit.c_fit > 0.0);
    assert!(fit.c_ci / fit.c_fit < 0.25);
    for (t, v) in fit.times.iter().zip(&fit.values) {
        assert!(*v <= fit.prefactor_fit * (-fit.c_fit * t).exp() * grad * (1.0 + 1e-12));
    }
}

#[test]
fn middle_part_decays_exponentially() {
    let g = shell_field(fit_grid(), [3.2, 5.4], [1.0, -1.0, 0.3]);
    let times = linear_times(0.1, 30.0, 30);
    let grad = seminorm(&g, 1);
    let l = lame();
    let fit = decay_fit(FrequencyPart::Mid, KernelKind::K0, &g, &l, &times, grad).unwrap();
    assert!(fit.c_fit > 0.0 && fit.residual <= 0.05 && fit.c_ci / fit.c_fit < 0.25);
    // c0 halved, c1 doubled
    let alt = CutoffSpec::new(0.5 * l.cutoffs().c0, 2.0 * l.cutoffs().c1).unwrap();
    let fit = decay_fit_with(FrequencyPart::Mid, KernelKind::K0, &g, &l, &times, grad, &alt).unwrap();
    assert!(fit.c_fit > 0.0 && fit.residual <= 0.05 && fit.c_ci / fit.c_fit < 0.25);
    // a broad Gaussian keeps low-frequency mass near the mid cutoff, and the
    // slow tail bends the log series away from a line
    let broad = PhysicalField::from_fn(fit_grid(), gaussian(1.0, [1.0, -1.0, 0.3])).to_spectral();
    assert!(matches!(
        decay_fit(FrequencyPart::Mid, KernelKind::K0, &broad, &l, &times, seminorm(&broad, 1)),
        Err(Error::Fit(_))
    ));
    assert!(matches!(
        decay_fit(FrequencyPart::Mid, KernelKind::K0, &g, &l, &times[..5], grad),
        Err(Error::Window(_))
    ));
    assert!(matches!(
        decay_fit(FrequencyPart::Low, KernelKind::K0, &g, &l, &times, grad),
        Err(Error::InvalidParams(_))
    ));
}

#[test]
fn low_frequency_data_has_no_middle_or_high_part() {
    let grid = Grid3::new(16, 16.0 * PI).unwrap();
    let l = lame();
    let mut g = SpectralField::zeros(grid);
    for idx in 0..grid.len() {
        let xi = grid.wave_vector(idx);
        let r = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
        if r < 0.45 * l.cutoffs().c0 {
            g.comps[0][idx] = C::new(1.0, 0.0);
            g.comps[2][idx] = C::new(-0.5, 0.0);
        }
    }
    assert!(seminorm(&g, 0) > 0.0);
    for part in [FrequencyPart::Mid, FrequencyPart::High] {
        for which in [KernelKind::K0, KernelKind::K1] {
            for t in [0.0, 1.0, 10.0] {
                assert!(part_norm(part, which, &g, &l, t).unwrap() <= 1e-14);
            }
        }
    }
}

#[test]
fn heat_multiplier_l1_decay() {
    let g = Grid3::new(128, 256.0).unwrap();
    let times = log_times(10.0, 1e3, 8);
    for (alpha, ell) in [(1u32, 0u32), (2, 0), (0, 1)] {
        let rep = heat_l1_series(&g, 1.0, alpha, ell, 1.0, &times).unwrap();
        assert!(rep.fitted_slope <= -(alpha as f64 / 2.0 + ell as f64) + 0.1, "{alpha},{ell}: {}", rep.fitted_slope);
    }
    let f = PhysicalField::zeros(g);
    assert!(matches!(
        inequality_check(
            &Inequality::HeatL1 { nu: 1.0, t: 1.0, alpha: 0, ell: 0, a: 0, b: 0, c0: 1.0 },
            &f
        ),
        Err(Error::InvalidParams(_))
    ));
}

#[test]
fn symbol_bound_scans_are_stable() {
    let l = lame();
    for p in [l.long(), l.trans()] {
        let c0 = p.beta / p.nu;
        for b in [BoundId::B333, BoundId::B336] {
            let rep = symbol_bound_scan(b, &p, (1.0, 1e3), (1e-3, c0), 32, 11).unwrap();
            assert!(rep.max_ratio.is_finite() && rep.max_ratio > 0.0);
            assert!(rep.samples >= 1000);
            assert!(rep.stable, "{rep:?}");
        }
    }
    let p = l.trans();
    assert!(matches!(
        symbol_bound_scan(BoundId::B331, &p, (1.0, 10.0), (1e-3, 0.5), 20, 1),
        Err(Error::InsufficientSamples(_))
    ));
    assert!(matches!(
        symbol_bound_scan(BoundId::B331, &p, (1.0, 10.0), (1e-3, 1.5), 32, 1),
        Err(Error::OutOfDomain(_))
    ));
    let a = symbol_bound_scan(BoundId::B335, &p, (1.0, 10.0), (1e-3, 1.0), 32, 5).unwrap();
    let b = symbol_bound_scan(BoundId::B335, &p, (1.0, 10.0), (1e-3, 1.0), 32, 5).unwrap();
    assert_eq!(a, b);
    assert_eq!(BoundId::parse("b336").unwrap(), BoundId::B336);
}

#[test]
fn bounds_vanish_at_time_zero() {
    let p = DampingParams::new(1.0, 1.0).unwrap();
    for b in BoundId::ALL {
        if b == BoundId::B337 {
            continue;
        }
        for r in [1e-3, 0.1, 0.5, 1.0] {
            let (lhs, maj) = bound_terms(b, 0.0, r, &p).unwrap();
            assert!(lhs.abs() <= 1e-15, "{b:?} r={r}: {lhs}");
            assert!(maj >= 0.0);
        }
    }
    assert!(matches!(bound_terms(BoundId::B331, 1.0, 2.0, &p), Err(Error::OutOfDomain(_))));
}
