use inflap_core::geometry::{
    density, distance_to_points, growth_constants, harnack_ratio, lipschitz_constant, mean_boundary_value,
    minkowski_content, nondegeneracy, porosity, DistanceField, LevelDecomposition,
};
use inflap_core::{Grid, ScalarField, Subdomain};
use proptest::prelude::*;

fn square(n: usize) -> Grid {
    Grid::new(2, &[-1.0, -1.0], &[1.0, 1.0], n).unwrap()
}

#[test]
fn lipschitz_of_simple_fields() {
    let g = Grid::new(2, &[0.0, 0.0], &[1.0, 1.0], 65).unwrap();
    let sub = Subdomain::new(g, 0.1).unwrap();
    let aff = ScalarField::from_fn(g, |p| 0.3 * p[0] - 0.4 * p[1] + 2.0);
    assert!((lipschitz_constant(&aff, &sub).unwrap() - 0.5).abs() <= 1e-12);
    let quad = ScalarField::from_fn(g, |p| 0.5 * (p[0] * p[0] + p[1] * p[1]));
    let l = lipschitz_constant(&quad, &sub).unwrap();
    assert!((l - (2.0f64 * 0.81).sqrt()).abs() <= 2.0 * g.h(), "{l}");
    assert_eq!(lipschitz_constant(&ScalarField::constant(g, 4.0), &sub).unwrap(), 0.0);
    let thin = Subdomain::new(g, 0.5 * g.h()).unwrap();
    assert!(lipschitz_constant(&aff, &thin).is_err());
}

#[test]
fn cone_has_unit_growth() {
    let g = square(65);
    let u = ScalarField::from_fn(g, |p| p[0].hypot(p[1]));
    let eps = 1e-12;
    let levels = LevelDecomposition::new(&u, eps);
    assert_eq!(levels.omega_eps.len(), 1);
    let d = DistanceField::new(&g, &levels);
    let sub = Subdomain::new(g, 0.1).unwrap();
    let rep = growth_constants(&u, &d, eps, &sub);
    assert!(!rep.vacuous);
    assert!((rep.c_min - 1.0).abs() < 1e-9 && (rep.c_max - 1.0).abs() < 1e-9, "{rep:?}");

    let nd = nondegeneracy(&u, &levels, &d, &sub, &[8.0 * g.h(), 16.0 * g.h()], 64, 1);
    assert!(!nd.vacuous && nd.min_ratio >= 1.0, "{nd:?}");
}

#[test]
fn twice_the_distance() {
    let g = square(129);
    let u = ScalarField::from_fn(g, |p| 2.0 * p[0].max(0.0));
    let eps = 1e-9;
    let levels = LevelDecomposition::new(&u, eps);
    let d = DistanceField::new(&g, &levels);
    let sub = Subdomain::new(g, 0.1).unwrap();
    let rep = growth_constants(&u, &d, eps, &sub);
    assert!((rep.c_min - 2.0).abs() < 1e-6 && (rep.c_max - 2.0).abs() < 1e-6, "{rep:?}");
}

#[test]
fn degenerate_fields_are_flagged() {
    let g = square(33);
    let eps = 0.1;
    let u = ScalarField::constant(g, eps / 2.0);
    let levels = LevelDecomposition::new(&u, eps);
    assert!(!levels.has_interface() && levels.gamma_eps.is_empty());
    let d = DistanceField::new(&g, &levels);
    let sub = Subdomain::new(g, 0.1).unwrap();
    assert!(nondegeneracy(&u, &levels, &d, &sub, &[0.2], 16, 0).vacuous);
    assert!(growth_constants(&u, &d, eps, &sub).vacuous);
    assert!(harnack_ratio(&u, &d, eps, &sub, 16, 0).vacuous);
}

#[test]
fn harnack_on_a_half_plane() {
    let g = square(65);
    let u = ScalarField::from_fn(g, |p| p[0].max(0.0));
    let eps = 1e-9;
    let levels = LevelDecomposition::new(&u, eps);
    let d = DistanceField::new(&g, &levels);
    let sub = Subdomain::new(g, 0.1).unwrap();
    let rep = harnack_ratio(&u, &d, eps, &sub, 10_000, 0);
    assert!(!rep.degenerate && rep.samples > 0);
    // Direct evaluation over the same balls.
    let floor = 4.0 * g.h();
    let mut want = 0.0f64;
    for k in sub.members() {
        if d.d_eps[k] >= floor {
            let nodes = g.nodes_in_ball(g.point(k), 0.5 * d.d_eps[k]);
            let hi = nodes.iter().map(|&m| u.get(m)).fold(f64::MIN, f64::max);
            let lo = nodes.iter().map(|&m| u.get(m)).fold(f64::MAX, f64::min);
            want = want.max(hi / lo);
        }
    }
    assert_eq!(rep.ratio, want);
    assert!(rep.ratio <= 3.0 + 1e-9);
}

#[test]
fn density_oracles() {
    let g = square(129);
    let rho = 0.5;
    let pos = ScalarField::constant(g, 1.0);
    assert_eq!(density(&pos, 0.1, [0.0, 0.0], rho).unwrap(), 1.0);
    let half = ScalarField::from_fn(g, |p| p[0]);
    let v = density(&half, 1e-12, [0.0, 0.0], rho).unwrap();
    assert!((v - 0.5).abs() <= 2.0 * g.h() / rho, "{v}");
    assert!(density(&half, 0.0, [0.0, 0.0], 0.5 * g.h()).is_err());
    assert!(density(&half, 0.0, [0.9, 0.0], 0.5).is_err());
}

fn line_points(x: f64, n: usize) -> Vec<[f64; 2]> {
    (0..=n).map(|k| [x, -1.0 + 2.0 * k as f64 / n as f64]).collect()
}

#[test]
fn porosity_oracles() {
    let g = square(129);
    let h = g.h();
    let line = line_points(0.0, 2048);
    let dl = distance_to_points(&g, &line);
    let rs = [16.0 * h, 32.0 * h];
    let centers: Vec<[f64; 2]> = line.iter().copied().filter(|p| p[1].abs() < 0.5).collect();
    let rep = porosity(&g, &centers, &dl, 64.0 * h, &rs, 64, 3).unwrap();
    assert!((rep.delta - 0.5).abs() <= 2.0 * h / rs[0], "{rep:?}");
    let point = [[0.0, 0.0]];
    let dp = distance_to_points(&g, &point);
    let rep = porosity(&g, &point, &dp, 64.0 * h, &rs, 64, 3).unwrap();
    assert!((rep.delta - 0.5).abs() <= 2.0 * h / rs[0], "{rep:?}");
    assert!(porosity(&g, &point, &dp, 0.1, &[0.2], 4, 0).is_err());
}

#[test]
fn minkowski_oracles() {
    let g = Grid::new(2, &[-1.0, -1.0], &[1.0, 1.0], 257).unwrap();
    let h = g.h();
    // Horizontal line y = 0.1 crossing the ball: chord length 2 √(ρ² − 0.01).
    let line: Vec<[f64; 2]> = (0..=4096).map(|k| [-1.0 + 2.0 * k as f64 / 4096.0, 0.1]).collect();
    let dl = distance_to_points(&g, &line);
    let rho = 0.8;
    let chord = 2.0 * (rho * rho - 0.01f64).sqrt();
    let (ratios, skipped) = minkowski_content(&g, &dl, &[h, 4.0 * h, 8.0 * h, 16.0 * h], [0.0, 0.0], rho).unwrap();
    assert_eq!(skipped, vec![h]);
    assert_eq!(ratios.len(), 3);
    for &(d, r) in &ratios {
        assert!((r / chord - 1.0).abs() <= 0.1, "delta {d}: {r} vs {chord}");
    }
    let empty = distance_to_points(&g, &[]);
    let (ratios, _) = minkowski_content(&g, &empty, &[4.0 * h], [0.0, 0.0], rho).unwrap();
    assert_eq!(ratios[0].1, 0.0);
}

#[test]
fn sphere_means() {
    let g = square(129);
    let x0 = [0.1, -0.2];
    let u = ScalarField::from_fn(g, |p| (p[0] - x0[0]).hypot(p[1] - x0[1]));
    for rho in [8.0 * g.h(), 16.0 * g.h(), 0.5] {
        let m = mean_boundary_value(&u, x0, rho).unwrap();
        // Bilinear interpolation of the cone is off by at most h²/(8ρ).
        assert!((m - rho).abs() <= g.h() * g.h() / (8.0 * rho), "{m} vs {rho}");
    }
    assert_eq!(mean_boundary_value(&ScalarField::constant(g, 0.0), x0, 0.3).unwrap(), 0.0);
    assert!(mean_boundary_value(&u, x0, 0.95).is_err());
}

#[test]
fn level_measurements_ignore_a_common_shift() {
    let g = square(65);
    let u = ScalarField::from_fn(g, |p| (p[0] * p[0] + 0.5 * p[1]).max(0.0));
    let eps = 0.125;
    let c = 0.5;
    let shifted = u.map(|v| v + c);
    let a = LevelDecomposition::new(&u, eps);
    let b = LevelDecomposition::new(&shifted, eps + c);
    assert_eq!(a.omega_eps, b.omega_eps);
    assert_eq!(a.gamma_eps.len(), b.gamma_eps.len());
    for (p, q) in a.gamma_eps.iter().zip(&b.gamma_eps) {
        assert!((p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12);
    }
    let da = density(&u, eps, [0.0, 0.0], 0.4).unwrap();
    let db = density(&shifted, eps + c, [0.0, 0.0], 0.4).unwrap();
    assert_eq!(da, db);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn distance_field_is_lipschitz(vals in prop::collection::vec(0.0f64..1.0, 17 * 17), eps in 0.1f64..0.9) {
        let g = square(17);
        let u = ScalarField::new(g, vals).unwrap();
        let levels = LevelDecomposition::new(&u, eps);
        prop_assert_eq!(levels.omega_eps.len() + levels.positivity.len(), g.len());
        prop_assert_eq!(levels.has_interface(), !levels.gamma_eps.is_empty());
        let d = DistanceField::new(&g, &levels);
        for k in 0..g.len() {
            for m in g.edge_neighbors(k) {
                prop_assert!((d.d_eps[k] - d.d_eps[m]).abs() <= g.h() * 2f64.sqrt() + 1e-12);
            }
        }
    }

    #[test]
    fn measurements_stay_in_range(vals in prop::collection::vec(0.0f64..1.0, 33 * 33), eps in 0.2f64..0.8) {
        let g = square(33);
        let u = ScalarField::new(g, vals).unwrap();
        let levels = LevelDecomposition::new(&u, eps);
        let v = density(&u, eps, [0.0, 0.0], 0.5).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        let de = distance_to_points(&g, &levels.gamma_eps);
        let inner: Vec<[f64; 2]> = levels.gamma_eps.iter().copied().filter(|p| p[0].abs() < 0.5 && p[1].abs() < 0.5).collect();
        let rep = porosity(&g, &inner, &de, 0.5, &[0.25], 16, 7).unwrap();
        prop_assert!(rep.vacuous || (0.0..1.0).contains(&rep.delta));
        let (ratios, _) = minkowski_content(&g, &de, &[0.125], [0.0, 0.0], 0.75).unwrap();
        prop_assert!(ratios[0].1 >= 0.0);
    }
}
