use super::*;
use proptest::prelude::*;
use std::f64::consts::PI;

fn grid_1d(l: f64, m: usize) -> Arc<Grid> {
    Grid::new(GridSpec::one_d(l, m)).unwrap()
}

fn real(f: impl Fn(f64) -> f64) -> impl Fn(&[f64]) -> Complex64 {
    move |x: &[f64]| Complex64::new(f(x[0]), 0.0)
}

fn gaussian(grid: &Arc<Grid>) -> ComplexField {
    ComplexField::sample(grid, real(|x| (-x * x).exp())).unwrap()
}

#[test]
fn grid_validation() {
    assert!(Grid::new(GridSpec::one_d(20.0, 1000)).is_err());
    assert!(Grid::new(GridSpec::one_d(-1.0, 1024)).is_err());
    assert!(Grid::new(GridSpec::new(4, 1.0, 16)).is_err());
    let g = grid_1d(20.0, 4096);
    assert!((g.dx() - 40.0 / 4096.0).abs() < 1e-15);
    assert!((g.axis_wavenumbers()[1] - PI / 20.0).abs() < 1e-15);
    assert!((g.axis_wavenumbers()[4095] + PI / 20.0).abs() < 1e-15);
}

#[test]
fn sample_profile_examples() {
    let g = grid_1d(20.0, 4096);
    let zero = ComplexField::sample(&g, |_| Complex64::new(0.0, 0.0)).unwrap();
    assert!(zero.values().iter().all(|v| *v == Complex64::new(0.0, 0.0)));

    let gauss = gaussian(&g);
    assert_eq!(gauss.peak_index(), 2048);
    assert_eq!(gauss.values()[2048].re, 1.0);
    assert!((gauss.sup_norm() - 1.0).abs() < 1e-15);

    // oracle: integral of sech^2 over R is 2; the box tail is below e^{-40}
    let sech = ComplexField::sample(&g, real(|x| 1.0 / x.cosh())).unwrap();
    assert!((sech.mass() - 2.0).abs() < 1e-12);

    assert!(ComplexField::sample(&g, real(|x| if x == 0.0 { f64::NAN } else { 0.0 })).is_err());
}

#[test]
fn mass_examples() {
    let g = grid_1d(20.0, 4096);
    assert_eq!(ComplexField::zeros(&g).mass(), 0.0);
    assert!((gaussian(&g).mass() - (PI / 2.0).sqrt()).abs() < 1e-12);
}

#[test]
fn kinetic_examples() {
    let g = grid_1d(20.0, 4096);
    let c = ComplexField::sample(&g, |_| Complex64::new(0.7, -0.2)).unwrap();
    assert!(c.kinetic().abs() < 1e-20);

    let l = g.half_length();
    let mode = ComplexField::sample(&g, real(|x| (PI * x / l).sin())).unwrap();
    let expected = (PI / l).powi(2) * mode.mass();
    assert!((mode.kinetic() - expected).abs() < 1e-12 * expected);

    // oracle: integral of (2x e^{-x^2})^2 = sqrt(pi/2)
    assert!((gaussian(&g).kinetic() - (PI / 2.0).sqrt()).abs() < 1e-11);
}

#[test]
fn laplacian_examples() {
    let g = grid_1d(20.0, 4096);
    let c = ComplexField::sample(&g, |_| Complex64::new(1.0, 1.0)).unwrap();
    assert!(c.laplacian().sup_norm() < 1e-14);

    let k = 5.0 * PI / g.half_length();
    let mode = ComplexField::sample(&g, |x| Complex64::from_polar(1.0, k * x[0])).unwrap();
    let lap = mode.laplacian();
    assert!(lap.sup_distance(&mode.scaled_real(-k * k)) < 1e-10);

    let lap = gaussian(&g).laplacian();
    let exact = ComplexField::sample(&g, real(|x| (4.0 * x * x - 2.0) * (-x * x).exp())).unwrap();
    assert!(lap.sup_distance(&exact) < 1e-10);
}

#[test]
fn weighted_moment_examples() {
    let g = grid_1d(20.0, 4096);
    assert_eq!(ComplexField::zeros(&g).weighted_moment(), 0.0);
    let expected = 0.25 * (PI / 2.0).sqrt();
    assert!((gaussian(&g).weighted_moment() - expected).abs() < 1e-12);

    let a = 1.7;
    let shifted = ComplexField::sample(&g, real(|x| (-(x - a) * (x - a)).exp())).unwrap();
    let centered = gaussian(&g);
    let gap = shifted.weighted_moment() - centered.weighted_moment();
    assert!((gap - a * a * centered.mass()).abs() < 1e-10);
}

#[test]
fn boundary_mass_fraction_examples() {
    let g = grid_1d(20.0, 4096);
    assert_eq!(ComplexField::zeros(&g).boundary_mass_fraction(0.8), 0.0);
    assert!(gaussian(&g).boundary_mass_fraction(0.8) <= 1e-12);

    let uniform = ComplexField::sample(&g, |_| Complex64::new(1.0, 0.0)).unwrap();
    assert!((uniform.boundary_mass_fraction(0.8) - 0.2).abs() < 1e-3);

    // oracle: tail integral of sech^2(3x) beyond 16 over the full integral
    let sech3 = ComplexField::sample(&g, real(|x| 1.0 / (3.0 * x).cosh())).unwrap();
    let e = (-96.0f64).exp();
    let oracle = 2.0 * e / (1.0 + e);
    let got = sech3.boundary_mass_fraction(0.8);
    assert!((got - oracle).abs() < 0.05 * oracle, "{got:e} vs {oracle:e}");
}

#[test]
fn rescale_examples() {
    let g = grid_1d(20.0, 4096);
    let v = gaussian(&g);
    assert_eq!(v.rescale(1.0).unwrap(), v);

    let r = v.rescale(1.3).unwrap();
    assert!((r.mass() - v.mass()).abs() <= 1e-10 * v.mass());

    let exact = ComplexField::sample(&g, real(|x| 2f64.sqrt() * (-4.0 * x * x).exp())).unwrap();
    assert!(v.rescale(2.0).unwrap().sup_distance(&exact) < 1e-11);

    let squeezed = ComplexField::sample(&g, real(|x| 0.5f64.sqrt() * (-0.25 * x * x).exp())).unwrap();
    assert!(v.rescale(0.5).unwrap().sup_distance(&squeezed) < 1e-11);

    assert!(matches!(v.rescale(0.0), Err(Error::Domain(_))));
    let wide = ComplexField::sample(&g, real(|x| (-x * x / 50.0).exp())).unwrap();
    assert!(matches!(wide.rescale(0.5), Err(Error::Truncation(_))));
    let rough = ComplexField::sample(&g, real(|x| (-4000.0 * x * x).exp())).unwrap();
    assert!(matches!(rough.rescale(2.0), Err(Error::Truncation(_))));
}

#[test]
fn rescale_in_two_dimensions() {
    let g = Grid::new(GridSpec::new(2, 8.0, 64)).unwrap();
    let v = ComplexField::sample(&g, |x| Complex64::new((-(x[0] * x[0] + x[1] * x[1])).exp(), 0.0)).unwrap();
    assert!((v.mass() - PI / 2.0).abs() < 1e-12);
    assert!((v.kinetic() - PI).abs() < 1e-10);
    let exact = ComplexField::sample(&g, |x| {
        Complex64::new(2.0 * (-4.0 * (x[0] * x[0] + x[1] * x[1])).exp(), 0.0)
    })
    .unwrap();
    assert!(v.rescale(2.0).unwrap().sup_distance(&exact) < 1e-9);
}

#[test]
fn three_dimensional_quadratures() {
    let g = Grid::new(GridSpec::new(3, 6.0, 64)).unwrap();
    let v = ComplexField::sample_radial(&g, |r| (-r * r).exp()).unwrap();
    // oracle: (pi/2)^{3/2}
    assert!((v.mass() - (PI / 2.0).powf(1.5)).abs() < 1e-10);
    let lap = v.laplacian();
    let exact = ComplexField::sample_radial(&g, |r| (4.0 * r * r - 6.0) * (-r * r).exp()).unwrap();
    assert!(lap.sup_distance(&exact) < 1e-8);
}

#[test]
fn dealias_and_tail_fraction() {
    let g = grid_1d(20.0, 256);
    let k_hi = g.axis_wavenumbers()[120];
    let v = ComplexField::sample(&g, |x| {
        Complex64::new((-x[0] * x[0]).exp(), 0.0) + Complex64::from_polar(1e-3, k_hi * x[0])
    })
    .unwrap();
    assert!(v.spectral_tail_fraction() > 1e-8);
    let d = v.dealiased();
    assert!(d.spectral_tail_fraction() < 1e-25);
    assert!(gaussian(&g).spectral_tail_fraction() < 1e-25);
}

#[test]
fn prolongation_is_exact_for_band_limited_fields() {
    let coarse = grid_1d(10.0, 256);
    let fine = grid_1d(10.0, 1024);
    let u = gaussian(&coarse);
    let up = u.prolong(&fine).unwrap();
    assert!(up.sup_distance(&gaussian(&fine)) < 1e-13);
    assert!((up.mass() - u.mass()).abs() < 1e-13 * u.mass());
    // a mode at the coarse Nyquist frequency is split into its two aliases
    let nyquist = ComplexField::sample(&coarse, |x| Complex64::new((std::f64::consts::PI * x[0] / coarse.dx()).cos(), 0.0)).unwrap();
    let up = nyquist.prolong(&fine).unwrap();
    let expected = ComplexField::sample(&fine, |x| Complex64::new((std::f64::consts::PI * x[0] / coarse.dx()).cos(), 0.0)).unwrap();
    assert!(up.sup_distance(&expected) < 1e-12);

    let c2 = Grid::new(GridSpec::new(2, 6.0, 64)).unwrap();
    let f2 = Grid::new(GridSpec::new(2, 6.0, 128)).unwrap();
    let g2 = |g: &Arc<Grid>| ComplexField::sample(g, |x| Complex64::new((-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp(), x[0] * (-(x[0] * x[0] + x[1] * x[1])).exp())).unwrap();
    assert!(g2(&c2).prolong(&f2).unwrap().sup_distance(&g2(&f2)) < 1e-10);
    assert!(matches!(u.prolong(&grid_1d(11.0, 1024)), Err(Error::Grid(_))));
    assert!(u.prolong(&grid_1d(10.0, 128)).is_err());
}

#[test]
fn restriction_samples_the_coarse_nodes() {
    let coarse = grid_1d(10.0, 256);
    let fine = grid_1d(10.0, 1024);
    let down = gaussian(&fine).restrict(&coarse).unwrap();
    assert_eq!(down.values(), gaussian(&coarse).values());
    let back = gaussian(&coarse).prolong(&fine).unwrap().restrict(&coarse).unwrap();
    assert!(back.sup_distance(&gaussian(&coarse)) < 1e-13);

    let c2 = Grid::new(GridSpec::new(2, 6.0, 32)).unwrap();
    let f2 = Grid::new(GridSpec::new(2, 6.0, 128)).unwrap();
    let g2 = |g: &Arc<Grid>| ComplexField::sample(g, |x| Complex64::new(x[0] - 2.0 * x[1], x[1])).unwrap();
    assert_eq!(g2(&f2).restrict(&c2).unwrap().values(), g2(&c2).values());
    assert!(gaussian(&coarse).restrict(&fine).is_err());
    assert!(gaussian(&fine).restrict(&grid_1d(11.0, 256)).is_err());
}

#[test]
fn csv_round_trip() {
    let g = grid_1d(5.0, 64);
    let v = ComplexField::sample(&g, |x| Complex64::new((-x[0] * x[0]).exp(), 0.1 * x[0])).unwrap();
    let text = field_to_csv(&v);
    assert!(text.starts_with("x,re,im\n"));
    assert_eq!(text.lines().count(), 65);
    let back = field_from_csv(&g, &text).unwrap();
    assert_eq!(back, v);
    let meta = serde_json::to_value(GridMetadata::of(&g)).unwrap();
    assert_eq!(meta["points"], 64);
    assert!(field_from_csv(&g, "y,re,im\n").is_err());
}

/// Up to three complex Gaussians near the origin.
fn localized() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
    prop::collection::vec((-1.5f64..1.5, 0.4f64..0.8, -1.0f64..1.0, -1.0f64..1.0), 1..=3)
}

fn build(grid: &Arc<Grid>, parts: &[(f64, f64, f64, f64)]) -> ComplexField {
    ComplexField::sample(grid, |x| {
        parts
            .iter()
            .map(|&(c, w, re, im)| Complex64::new(re, im) * (-((x[0] - c) / w).powi(2)).exp())
            .sum()
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn plancherel(seed in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 40)) {
        let g = grid_1d(10.0, 256);
        let mut spec = vec![Complex64::new(0.0, 0.0); 256];
        for (j, (re, im)) in seed.iter().enumerate() {
            let idx = if j < 20 { j } else { 256 - (j - 19) };
            spec[idx] = Complex64::new(*re, *im);
        }
        let v = ComplexField::from_spectrum(&g, spec.clone());
        let spectral = g.cell_volume() / 256.0 * spec.iter().map(|s| s.norm_sqr()).sum::<f64>();
        prop_assert!((v.mass() - spectral).abs() <= 1e-10 * v.mass());
    }

    #[test]
    fn kinetic_scales_quadratically(parts in localized(), lambda in 0.6f64..1.8) {
        let g = grid_1d(20.0, 1024);
        let v = build(&g, &parts);
        prop_assume!(v.mass() > 1e-3);
        let r = v.rescale(lambda).unwrap();
        let k = v.kinetic();
        prop_assert!((r.kinetic() - lambda * lambda * k).abs() <= 1e-8 * lambda * lambda * k);
        prop_assert!((r.mass() - v.mass()).abs() <= 1e-10 * v.mass());
        let w = v.weighted_moment();
        prop_assert!((r.weighted_moment() - w / (lambda * lambda)).abs() <= 1e-6 * w / (lambda * lambda));
    }

    #[test]
    fn rescale_round_trip(parts in localized(), lambda in 0.5f64..2.0) {
        let g = grid_1d(20.0, 1024);
        let v = build(&g, &parts);
        let back = v.rescale(lambda).unwrap().rescale(1.0 / lambda).unwrap();
        prop_assert!(back.sup_distance(&v) <= 1e-8);
    }
}
