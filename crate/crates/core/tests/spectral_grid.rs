use std::f64::consts::PI;

use dampwave::field::{PhysicalField, Snapshot, SpectralField, VectorField};
use dampwave::grid::{CutoffSpec, FrequencyPart, Grid3};
use dampwave::kernels::{DampingParams, KernelKind};
use dampwave::norms::{lp_norm, spectral_l2};
use dampwave::radial::{radial_l2_norm, C_PARALLEL, C_PERP};
use dampwave::symbols::{apply_symbol, Symbol, SymbolParams};
use dampwave::Error;
use num_complex::Complex64 as C;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_physical(grid: Grid3, seed: u64) -> PhysicalField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = grid.len();
    let mut comp = || (0..len).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    PhysicalField::new(grid, [comp(), comp(), comp()]).unwrap()
}

/// Sum of a few plane waves with integer wavenumbers below `kmax`.
fn trig_field(grid: Grid3, seed: u64, kmax: i64) -> PhysicalField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dk = grid.dk();
    let modes: Vec<([f64; 3], f64, f64, usize)> = (0..6)
        .map(|_| {
            let k = [0; 3].map(|_: i32| dk * rng.random_range(-kmax..=kmax) as f64);
            (k, rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0 * PI), rng.random_range(0..3))
        })
        .collect();
    PhysicalField::from_fn(grid, |x| {
        let mut v = [0.3, -0.1, 0.2];
        for (k, a, ph, c) in &modes {
            v[*c] += a * (k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + ph).cos();
        }
        v
    })
}

#[test]
fn grid_sizes_are_validated() {
    assert!(matches!(Grid3::new(7, 1.0), Err(Error::InvalidGrid(_))));
    assert!(matches!(Grid3::new(6, 1.0), Err(Error::InvalidGrid(_))));
    assert!(matches!(Grid3::new(8, 0.0), Err(Error::InvalidGrid(_))));
    assert!(Grid3::new(8, 1.0).is_ok());
}

#[test]
fn integer_lattice_on_two_pi_box() {
    let g = Grid3::new(8, 2.0 * PI).unwrap();
    let mut zeros = 0;
    for xi in g.freq_lattice() {
        for c in xi {
            assert!((c - c.round()).abs() < 1e-14);
            assert!((-4.0..=3.0).contains(&c.round()));
        }
        if xi == [0.0; 3] {
            zeros += 1;
        }
    }
    assert_eq!(g.len(), 512);
    assert_eq!(zeros, 1);
    let unit = Grid3::new(16, 1.0).unwrap();
    let smallest = unit
        .freq_lattice()
        .map(|x| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt())
        .filter(|&r| r > 0.0)
        .fold(f64::INFINITY, f64::min);
    assert!((smallest - 2.0 * PI).abs() < 1e-12);
}

#[test]
fn band_limited_round_trip() {
    let g = Grid3::new(32, 10.0).unwrap();
    let f = trig_field(g, 3, 10);
    let back = VectorField::from(f.clone()).transform().transform();
    let back = back.as_physical().unwrap();
    let mut err = 0.0_f64;
    for a in 0..3 {
        for (x, y) in f.comps[a].iter().zip(&back.comps[a]) {
            err = err.max((x - y).abs());
        }
    }
    assert!(err < 1e-12, "round trip error {err}");
}

#[test]
fn zero_field_transforms_to_zero() {
    let g = Grid3::new(8, 3.0).unwrap();
    let s = PhysicalField::zeros(g).to_spectral();
    assert_eq!(s.max_abs(), 0.0);
}

#[test]
fn plane_wave_has_two_coefficients() {
    let g = Grid3::new(8, 2.0 * PI).unwrap();
    let f = PhysicalField::from_fn(g, |x| [x[0].cos(), 0.0, 0.0]).to_spectral();
    let peak = f.max_abs();
    let hits: Vec<[i64; 3]> = (0..g.len())
        .filter(|&i| f.comps[0][i].norm() > 1e-12 * peak)
        .map(|i| g.integer_wave_vector(i))
        .collect();
    assert_eq!(hits.len(), 2);
    assert!(hits.contains(&[1, 0, 0]) && hits.contains(&[-1, 0, 0]));
}

#[test]
fn derivative_multiplies_by_i() {
    let g = Grid3::new(8, 2.0 * PI).unwrap();
    let f = PhysicalField::from_fn(g, |x| [x[0].cos(), 0.0, 0.0]).to_spectral();
    let out = apply_symbol(&f.clone().into(), &Symbol::Derivative([1, 0, 0])).unwrap().field;
    let idx = g.flatten(1, 0, 0);
    let want = C::new(0.0, 1.0) * f.comps[0][idx];
    assert!((out.comps[0][idx] - want).norm() < 1e-15);
}

#[test]
fn gaussian_l2_matches_closed_form() {
    let g = Grid3::new(64, 16.0).unwrap();
    let s: f64 = 0.5;
    let norm = (2.0 * PI * s * s).powf(-1.5);
    let f = PhysicalField::from_fn(g, |x| {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        [norm * (-r2 / (2.0 * s * s)).exp(), 0.0, 0.0]
    });
    // int g^2 = norm^2 (pi s^2)^{3/2}
    let exact = norm * (PI * s * s).powf(0.75);
    let got = lp_norm(&f.into(), 2.0).unwrap();
    assert!(((got - exact) / exact).abs() < 1e-6, "{got} vs {exact}");
}

#[test]
fn constant_and_sup_norms() {
    let g = Grid3::new(8, 3.0).unwrap();
    let c = -2.5;
    let f: VectorField = PhysicalField::from_fn(g, |_| [c, 0.0, 0.0]).into();
    let v = g.box_length().powi(3);
    assert!((lp_norm(&f, 2.0).unwrap() - c.abs() * v.sqrt()).abs() < 1e-12);
    let r = random_physical(g, 11);
    let peak = r.comps.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()));
    assert_eq!(lp_norm(&r.into(), f64::INFINITY).unwrap(), peak);
    assert!(matches!(lp_norm(&f, 0.5), Err(Error::InvalidExponent(_))));
}

#[test]
fn riesz_squares_sum_to_identity_off_the_mean() {
    let g = Grid3::new(16, 7.0).unwrap();
    let f: VectorField = trig_field(g, 5, 5).to_spectral().into();
    let mut total = SpectralField::zeros(g);
    for a in 0..3 {
        let s = Symbol::Product(vec![Symbol::Riesz(a), Symbol::Riesz(a)]);
        total.add_assign(&apply_symbol(&f, &s).unwrap().field).unwrap();
    }
    let src = f.as_spectral().unwrap();
    for idx in 0..g.len() {
        for c in 0..3 {
            let want = if idx == 0 { C::new(0.0, 0.0) } else { src.comps[c][idx] };
            assert!((total.comps[c][idx] - want).norm() < 1e-14);
        }
    }
}

#[test]
fn symbols_compose_coefficientwise() {
    let g = Grid3::new(16, 9.0).unwrap();
    let f: VectorField = random_physical(g, 2).to_spectral().into();
    let p = DampingParams::new(1.3, 0.7).unwrap();
    let s1 = Symbol::Kernel {
        params: p,
        which: KernelKind::K1,
        t: 2.0,
        order: 1,
    };
    let s2 = Symbol::Product(vec![Symbol::Riesz(2), Symbol::Derivative([0, 1, 0])]);
    let seq = apply_symbol(&apply_symbol(&f, &s1).unwrap().field.into(), &s2).unwrap().field;
    let once = apply_symbol(&f, &Symbol::Product(vec![s1, s2])).unwrap().field;
    for c in 0..3 {
        for (a, b) in seq.comps[c].iter().zip(&once.comps[c]) {
            assert!((a - b).norm() <= 1e-14 * (1.0 + b.norm()));
        }
    }
}

#[test]
fn inverse_gradient_flags_nonzero_mean() {
    let g = Grid3::new(8, 4.0).unwrap();
    let p = SymbolParams::default();
    let inv = Symbol::from_id("inv_grad", &p).unwrap();
    let with_mean: VectorField = PhysicalField::from_fn(g, |x| [1.0 + x[0].sin(), 0.0, 0.0]).to_spectral().into();
    let out = apply_symbol(&with_mean, &inv).unwrap();
    assert!(out.mean_nonzero);
    assert_eq!(out.field.comps[0][0], C::new(0.0, 0.0));
    let mean_free: VectorField = PhysicalField::from_fn(g, |x| [(PI * x[0] / 2.0).sin(), 0.0, 0.0])
        .to_spectral()
        .into();
    assert!(!apply_symbol(&mean_free, &inv).unwrap().mean_nonzero);
    assert!(matches!(Symbol::from_id("laplace", &p), Err(Error::UnsupportedSymbol(_))));
}

#[test]
fn cutoffs_partition_the_lattice() {
    for spec in [
        CutoffSpec::from_speeds(1.0, 2.0_f64.sqrt(), 1.0).unwrap(),
        CutoffSpec::new(0.5, 11.4).unwrap(),
    ] {
        let g = Grid3::new(32, 8.0).unwrap();
        for xi in g.freq_lattice() {
            let r = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
            let l = spec.chi(FrequencyPart::Low, r);
            let m = spec.chi(FrequencyPart::Mid, r);
            let h = spec.chi(FrequencyPart::High, r);
            assert_eq!(l + m + h, 1.0);
            for v in [l, m, h] {
                assert!((0.0..=1.0).contains(&v));
            }
            if r <= spec.c0 / 2.0 {
                assert_eq!(l, 1.0);
            }
            if r >= spec.c0 {
                assert_eq!(l, 0.0);
            }
            if r <= spec.c1 {
                assert_eq!(h, 0.0);
            }
            if r >= 2.0 * spec.c1 {
                assert_eq!(h, 1.0);
            }
        }
    }
    assert!(CutoffSpec::new(2.0, 1.0).is_err());
}

#[test]
fn radial_norm_of_gaussian() {
    // h = e^{-r^2/2}: int r^2 e^{-r^2} dr = sqrt(pi)/4
    let got = radial_l2_norm(0.0, |_, _| 1.0, |r| (-0.5 * r * r).exp(), 0, (1.0, 0.0)).unwrap();
    let exact = (C_PARALLEL * PI.sqrt() / 4.0).sqrt();
    assert!(((got - exact) / exact).abs() < 1e-8);
    // alpha = 1: int r^4 e^{-r^2} dr = 3 sqrt(pi)/8
    let got = radial_l2_norm(0.0, |_, _| 1.0, |r| (-0.5 * r * r).exp(), 1, (0.0, 1.0)).unwrap();
    let exact = (C_PERP * 3.0 * PI.sqrt() / 8.0).sqrt();
    assert!(((got - exact) / exact).abs() < 1e-8);
}

#[test]
fn angular_constants_by_sphere_quadrature() {
    let e = {
        let v = [0.3_f64, -0.5, 0.8];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        v.map(|x| x / n)
    };
    let (nt, np) = (400, 800);
    let (mut par, mut perp) = (0.0, 0.0);
    for i in 0..nt {
        let th = PI * (i as f64 + 0.5) / nt as f64;
        for j in 0..np {
            let ph = 2.0 * PI * (j as f64 + 0.5) / np as f64;
            let w = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
            let d = w[0] * e[0] + w[1] * e[1] + w[2] * e[2];
            let da = th.sin() * (PI / nt as f64) * (2.0 * PI / np as f64);
            par += d * d * da;
            perp += (1.0 - d * d) * da;
        }
    }
    assert!((par - C_PARALLEL).abs() < 1e-4);
    assert!((perp - C_PERP).abs() < 1e-4);
}

#[test]
fn radial_path_agrees_with_grid_path() {
    let g = Grid3::new(64, 16.0).unwrap();
    let e = [1.0 / 3f64.sqrt(); 3];
    let f = PhysicalField::from_fn(g, |x| {
        let v = (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0).exp();
        e.map(|c| c * v)
    });
    let grid_norm = lp_norm(&f.into(), 2.0).unwrap();
    // unitary transform of e^{-|x|^2/2} is e^{-r^2/2}
    let radial = radial_l2_norm(0.0, |_, _| 1.0, |r| (-0.5 * r * r).exp(), 0, (1.0, 1.0)).unwrap();
    assert!(((grid_norm - radial) / radial).abs() < 1e-5);
}

#[test]
fn heat_multiplier_norm_decreases() {
    let mut last = f64::INFINITY;
    for t in [0.0, 0.1, 0.5, 1.0, 3.0, 10.0] {
        let v = radial_l2_norm(t, |t, r| (-r * r * t).exp(), |r| (-0.5 * r * r).exp(), 0, (1.0, 1.0)).unwrap();
        assert!(v < last);
        last = v;
    }
}

#[test]
fn snapshot_container_round_trip() {
    let g = Grid3::new(8, 5.0).unwrap();
    let f: VectorField = random_physical(g, 9).to_spectral().into();
    let snap = Snapshot::from_field(&f, Some(1.5));
    let mut buf = Vec::new();
    snap.write_to(&mut buf).unwrap();
    let back = Snapshot::read_from(buf.as_slice()).unwrap();
    assert_eq!(back, snap);
    assert_eq!(back.to_field().unwrap(), f);
    assert!(Snapshot::read_from(&buf[..20]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn plancherel_holds(seed in any::<u64>(), half in 4usize..7, length in 0.5f64..30.0) {
        let g = Grid3::new(2 * half, length).unwrap();
        let f = random_physical(g, seed);
        let phys = lp_norm(&f.clone().into(), 2.0).unwrap();
        let spec = spectral_l2(&f.to_spectral());
        prop_assert!((phys - spec).abs() <= 1e-12 * phys);
    }

    #[test]
    fn spectra_of_real_fields_are_hermitian(seed in any::<u64>()) {
        let g = Grid3::new(8, 2.0).unwrap();
        let s = random_physical(g, seed).to_spectral();
        prop_assert!(s.hermitian_defect() <= 1e-12);
    }

    #[test]
    fn riesz_is_a_contraction(seed in any::<u64>(), axis in 0usize..3) {
        let g = Grid3::new(8, 4.0).unwrap();
        let f = random_physical(g, seed).to_spectral();
        let rf = apply_symbol(&f.clone().into(), &Symbol::Riesz(axis)).unwrap().field;
        prop_assert!(spectral_l2(&rf) <= spectral_l2(&f) * (1.0 + 1e-15));
    }
}
