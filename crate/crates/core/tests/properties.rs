use ifsnet_core::operators::{
    characteristic, generalized_fuzzy_step, generalized_hutchinson_step, generate_inverse_table, Discretization,
};
use ifsnet_core::systems::{lipschitz_affine, AffineForm};
use ifsnet_core::{
    d_infinity, hausdorff, DiscreteFuzzySet, DiscreteSet, Domain, Expression, GreyMap, Grid, MapSpec, Membership, Net,
    SystemSpec,
};
use proptest::prelude::*;

const BUDGET: u64 = 100_000_000;

/// max |Σ Aᵢ uᵢ| over unit vectors uᵢ, by a dense angle scan.
fn lipschitz_scan(blocks: &[[[f64; 2]; 2]]) -> f64 {
    let steps = 720;
    let dirs: Vec<[f64; 2]> = (0..steps)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / steps as f64;
            [t.cos(), t.sin()]
        })
        .collect();
    let apply = |a: &[[f64; 2]; 2], u: [f64; 2]| [a[0][0] * u[0] + a[0][1] * u[1], a[1][0] * u[0] + a[1][1] * u[1]];
    let mut best = 0.0f64;
    match blocks {
        [a] => {
            for &u in &dirs {
                let v = apply(a, u);
                best = best.max(v[0].hypot(v[1]));
            }
        }
        [a, b] => {
            for &u in &dirs {
                let p = apply(a, u);
                for &w in &dirs {
                    let q = apply(b, w);
                    best = best.max((p[0] + q[0]).hypot(p[1] + q[1]));
                }
            }
        }
        _ => unreachable!(),
    }
    best
}

fn affine_strategy(arity: usize) -> impl Strategy<Value = AffineForm> {
    prop::collection::vec(-0.6f64..0.6, 4 * arity).prop_map(move |m| AffineForm::new(2, arity, m, vec![0.1, 0.2]).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lipschitz_matches_scan_for_ifs(form in affine_strategy(1)) {
        let found = lipschitz_affine(&form);
        let scan = lipschitz_scan(&[form.block(0)]);
        prop_assert!(found >= scan - 1e-12);
        prop_assert!(found - scan <= 1e-4 * found.max(1.0));
    }

    #[test]
    fn lipschitz_matches_scan_for_gifs(form in affine_strategy(2)) {
        let found = lipschitz_affine(&form);
        let scan = lipschitz_scan(&[form.block(0), form.block(1)]);
        prop_assert!(found >= scan - 1e-9);
        prop_assert!(found - scan <= 1e-4 * found.max(1.0));
    }
}

#[test]
fn one_dimensional_lipschitz_is_sum_of_coefficients() {
    let form = AffineForm::new(1, 3, vec![0.2, -0.3, 0.1], vec![0.0]).unwrap();
    assert!((lipschitz_affine(&form) - 0.6).abs() < 1e-15);
}

fn grid() -> Grid {
    Grid::new(Domain::unit(2).unwrap(), 24).unwrap()
}

fn set_strategy() -> impl Strategy<Value = DiscreteSet> {
    let g = grid();
    prop::collection::vec(0..g.len() as u32, 1..12).prop_map(move |ids| DiscreteSet::new(g, ids).unwrap())
}

fn fuzzy_strategy() -> impl Strategy<Value = DiscreteFuzzySet> {
    let g = grid();
    prop::collection::vec((0..g.len() as u32, 1u16..=1020), 1..12).prop_map(move |mut e| {
        e[0].1 = 1020;
        let entries = e.into_iter().map(|(id, l)| (id, Membership::from_level(l).unwrap())).collect();
        DiscreteFuzzySet::new(g, entries).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn hausdorff_is_a_metric(a in set_strategy(), b in set_strategy(), c in set_strategy()) {
        let ab = hausdorff(&a, &b).unwrap();
        prop_assert_eq!(ab, hausdorff(&b, &a).unwrap());
        prop_assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
        prop_assert!(ab <= hausdorff(&a, &c).unwrap() + hausdorff(&c, &b).unwrap() + 1e-12);
        prop_assert_eq!(ab == 0.0, a == b);
    }

    #[test]
    fn d_infinity_is_symmetric_and_bounded_by_diameter(u in fuzzy_strategy(), v in fuzzy_strategy()) {
        let d = d_infinity(&u, &v).unwrap();
        prop_assert_eq!(d, d_infinity(&v, &u).unwrap());
        prop_assert!(d <= 2f64.sqrt() + 1e-12);
        prop_assert_eq!(d_infinity(&u, &u).unwrap(), 0.0);
    }
}

fn fuzzy_system() -> SystemSpec {
    let maps = vec![
        MapSpec::parse(2, 1, &["0.5*x", "0.5*y"]).unwrap(),
        MapSpec::parse(2, 1, &["0.5*y + 0.5", "-0.5*x + 0.5"]).unwrap(),
        MapSpec::parse(2, 1, &["0.4*x + 0.3*y + 0.3", "0.5*y + 0.5"]).unwrap(),
    ];
    let grey = vec![
        GreyMap::parse("t*t").unwrap(),
        GreyMap::identity(),
        GreyMap::parse("0.6*t").unwrap(),
    ];
    SystemSpec::new(Domain::unit(2).unwrap(), 1, maps, Some(grey)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fuzzy_step_is_monotone_and_supported_by_the_crisp_image(u in fuzzy_strategy(), raise in prop::collection::vec(0u16..400, 12)) {
        let spec = fuzzy_system();
        let net = Net::uniform(*spec.domain(), 24).unwrap();
        let d = Discretization::new(&spec, &net).unwrap();
        let table = generate_inverse_table(&d, BUDGET).unwrap();
        // v ≥ u pointwise.
        let bigger: Vec<_> = u.entries().iter().zip(raise.iter().cycle())
            .map(|(&(id, m), &r)| (id, Membership::from_level((m.level() + r).min(1020)).unwrap()))
            .collect();
        let v = DiscreteFuzzySet::new(*u.grid(), bigger).unwrap();
        let zu = generalized_fuzzy_step(&d, &table, &u).unwrap();
        let zv = generalized_fuzzy_step(&d, &table, &v).unwrap();
        for &(id, m) in zu.entries() {
            prop_assert!(m <= zv.get(id));
        }
        let image = generalized_hutchinson_step(&d, &u.support(), BUDGET).unwrap();
        for &(id, _) in zu.entries() {
            prop_assert!(image.contains(id));
        }
    }
}

#[test]
fn identity_grey_maps_reduce_to_the_crisp_operator() {
    let spec = fuzzy_system().with_identity_grey();
    let crisp = spec.crisp();
    let net = Net::uniform(*spec.domain(), 40).unwrap();
    let fd = Discretization::new(&spec, &net).unwrap();
    let cd = Discretization::new(&crisp, &net).unwrap();
    let table = generate_inverse_table(&fd, BUDGET).unwrap();
    let mut k = DiscreteSet::new(*net.grid(), vec![0, 17, 900]).unwrap();
    let mut u = characteristic(&k);
    for _ in 0..6 {
        k = generalized_hutchinson_step(&cd, &k, BUDGET).unwrap();
        u = generalized_fuzzy_step(&fd, &table, &u).unwrap();
        assert_eq!(u, characteristic(&k));
    }
}

#[test]
fn uniform_projection_stays_within_a_cell_diagonal() {
    let domain = Domain::new(&[(-1.0, 2.0), (0.5, 0.75)]).unwrap();
    let net = Net::uniform(domain, 37).unwrap();
    let eps = net.effective_epsilon();
    for i in 0..=200 {
        for j in 0..=200 {
            let p = [-1.0 + 3.0 * i as f64 / 200.0, 0.5 + 0.25 * j as f64 / 200.0];
            let q = net.coords(net.project(&p).id);
            assert!(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt() <= eps + 1e-12);
        }
    }
}

#[test]
fn expressions_follow_usual_precedence() {
    let e = Expression::parse("-2^2 + 3*(x - 1)/2 + sin(0)", &["x"]).unwrap();
    assert_eq!(e.evaluate(&[3.0]).unwrap(), -4.0 + 3.0);
    let e = Expression::parse("2^3^2", &[]).unwrap();
    assert_eq!(e.evaluate(&[]).unwrap(), 512.0);
}
