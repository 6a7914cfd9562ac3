use super::*;
use crate::field::GridSpec;

fn grid_1d(l: f64, m: usize) -> Arc<Grid> {
    Grid::new(GridSpec::one_d(l, m)).unwrap()
}

fn power(p: f64) -> NonlinearityModel {
    NonlinearityModel::pure_power(p, 1).unwrap()
}

fn gaussian_seed(grid: &Arc<Grid>) -> ComplexField {
    ComplexField::sample_radial(grid, |r| (-r * r).exp()).unwrap()
}

#[test]
fn closed_form_examples() {
    let g = grid_1d(20.0, 4096);
    let r = closed_form_1d(&power(7.0), 1.0, &g).unwrap();
    assert_eq!(r.method, Method::ClosedForm);
    assert!((r.field.values()[2048].re - 4f64.powf(1.0 / 6.0)).abs() < 1e-14);
    assert!(r.residual_rel <= 1e-8, "{}", r.residual_rel);
    assert!(r.level_m > 0.0);

    let cubic = closed_form_1d(&power(3.0), 1.0, &g).unwrap();
    // √2 sech(x) on the torus of period 40, nearest images included
    let sech = |x: f64| 2f64.sqrt() / x.cosh();
    let oracle = ComplexField::sample_radial(&g, |x| sech(x) + sech(x - 40.0) + sech(x + 40.0)).unwrap();
    assert!(cubic.field.sup_distance(&oracle) < 1e-13);
}

#[test]
fn closed_form_rejects_coarse_grid_and_wrong_model() {
    let coarse = grid_1d(20.0, 64);
    assert!(matches!(closed_form_1d(&power(7.0), 1.0, &coarse), Err(Error::Convergence(_))));
    let g = grid_1d(20.0, 256);
    let m3 = NonlinearityModel::pure_power(3.0, 3).unwrap();
    assert!(matches!(closed_form_1d(&m3, 1.0, &g), Err(Error::Domain(_))));
    assert!(closed_form_1d(&power(7.0), -1.0, &g).is_err());
}

#[test]
fn petviashvili_matches_closed_form() {
    let g = grid_1d(20.0, 4096);
    for p in [3.0, 7.0] {
        let exact = closed_form_1d(&power(p), 1.0, &g).unwrap();
        let r = petviashvili(&power(p), 1.0, &gaussian_seed(&g), PetviashviliOptions::default()).unwrap();
        assert_eq!(r.method, Method::Petviashvili);
        assert!(r.field.sup_distance(&exact.field) < 1e-6, "p={p}: {}", r.field.sup_distance(&exact.field));
        assert!(r.iterations > 0);
    }
    let zero = ComplexField::zeros(&g);
    assert!(matches!(
        petviashvili(&power(7.0), 1.0, &zero, PetviashviliOptions::default()),
        Err(Error::DegenerateSeed(_))
    ));
}

#[test]
fn shooting_matches_closed_form_peak() {
    let g = grid_1d(20.0, 4096);
    let (profile, r) = shoot_radial(&power(7.0), 1.0, None, &g).unwrap();
    assert!((profile.peak - 4f64.powf(1.0 / 6.0)).abs() < 1e-6);
    assert_eq!(r.method, Method::Shooting);
    let (profile, _) = shoot_radial(&power(3.0), 1.0, None, &g).unwrap();
    assert!((profile.peak - 2f64.sqrt()).abs() < 1e-6);
}

#[test]
fn shooting_rejects_bad_bracket() {
    let g = grid_1d(20.0, 4096);
    let bad = ShootingBracket { low: 2.0, high: 3.0 };
    assert!(matches!(shoot_radial(&power(7.0), 1.0, Some(bad), &g), Err(Error::Bracket(_))));
    let good = ShootingBracket { low: 0.5, high: 3.0 };
    assert!(shoot_radial(&power(7.0), 1.0, Some(good), &g).is_ok());
}

#[test]
fn shooting_in_three_dimensions() {
    let m = NonlinearityModel::pure_power(3.0, 3).unwrap();
    let profile = solve_radial(&m, 1.0, None).unwrap();
    // reference central value of the cubic ground state in three dimensions
    assert!((profile.peak - 4.3373877).abs() < 1e-6, "{}", profile.peak);
    assert!(profile.radial_residual_rel(&m, 20.0) <= 1e-6);
    assert!(profile.value(20.0) > 0.0 && profile.value(20.0) < 1e-9);

    // on a desk-sized box the grid residual is limited by box and mesh size
    let coarse = Grid::new(GridSpec::new(3, 8.0, 64)).unwrap();
    let fine = Grid::new(GridSpec::new(3, 8.0, 128)).unwrap();
    let res = |g: &Arc<Grid>| {
        let f = ComplexField::sample_radial_periodic(g, |r| profile.value(r)).unwrap();
        action_gradient(&f, &m, 1.0).unwrap().l2_norm() / f.l2_norm()
    };
    assert!(res(&fine) < 0.1 * res(&coarse));
    assert!(matches!(shoot_radial(&m, 1.0, None, &coarse), Err(Error::Convergence(_))));
}

#[test]
fn one_dimensional_radial_residual() {
    let profile = solve_radial(&power(7.0), 1.0, None).unwrap();
    assert!(profile.radial_residual_rel(&power(7.0), 15.0) <= 1e-6);
}

#[test]
fn methods_agree_across_frequencies() {
    let g = grid_1d(40.0, 8192);
    for p in [3.0, 7.0] {
        for omega in [0.5, 1.0, 2.0] {
            let a = closed_form_1d(&power(p), omega, &g).unwrap();
            let b = petviashvili(&power(p), omega, &gaussian_seed(&g), PetviashviliOptions::default()).unwrap();
            let (_, c) = shoot_radial(&power(p), omega, None, &g).unwrap();
            let d = [a.field.sup_distance(&b.field), a.field.sup_distance(&c.field), b.field.sup_distance(&c.field)];
            assert!(d.iter().all(|&x| x < 1e-5), "p={p} ω={omega}: {d:?}");
            assert!((a.level_m - b.level_m).abs() < 1e-6 * a.level_m);
        }
    }
}

#[test]
fn frequency_scaling_law() {
    // φ_ω(x) = ω^{1/(p-1)} φ_1(√ω x), with φ_1 from shooting
    let g = grid_1d(40.0, 8192);
    for p in [3.0, 7.0] {
        let (unit, _) = shoot_radial(&power(p), 1.0, None, &g).unwrap();
        for omega in [0.5, 2.0] {
            let r = petviashvili(&power(p), omega, &gaussian_seed(&g), PetviashviliOptions::default()).unwrap();
            let scaled = ComplexField::sample_radial(&g, |x| omega.powf(1.0 / (p - 1.0)) * unit.value(omega.sqrt() * x))
                .unwrap();
            assert!(r.field.sup_distance(&scaled) < 1e-6, "p={p} ω={omega}");
        }
    }
}

#[test]
fn summary_serializes() {
    let g = grid_1d(20.0, 4096);
    let r = closed_form_1d(&power(7.0), 1.0, &g).unwrap();
    let json = serde_json::to_value(r.summary()).unwrap();
    assert_eq!(json["method"], "closed_form");
    assert!(json["report"]["S"].as_f64().unwrap() > 0.0);
}
