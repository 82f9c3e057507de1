use proptest::prelude::*;

use goafem::driver::{fit_rate, ConvergenceRecord};
use goafem::estimators::{estimate_residual, IndicatorField, Residual};
use goafem::fespace::{assemble_stiffness, Diffusion, FeSpace};
use goafem::marking::{
    check_doerfler, check_general, mark_doerfler, mark_equidistribution, mark_goafem, mark_maximum, MarkRequest,
    Strategy as MarkStrategy,
};
use goafem::mesh::{Bisections, MarkedSet, Triangulation};
use goafem::par::Execution;

fn start(l_shape: bool) -> Triangulation {
    if l_shape {
        Triangulation::l_shape()
    } else {
        Triangulation::unit_square()
    }
}

fn marking(picks: &[prop::sample::Index], n: usize) -> MarkedSet {
    let mut idx: Vec<usize> = picks.iter().map(|p| p.index(n)).collect();
    idx.sort_unstable();
    idx.dedup();
    MarkedSet::new(idx, n).unwrap()
}

fn refined(l_shape: bool, rounds: &[Vec<prop::sample::Index>]) -> Triangulation {
    let mut mesh = start(l_shape);
    for picks in rounds {
        let m = marking(picks, mesh.n_elements());
        mesh = mesh.refine_nvb(&m, Bisections::One).unwrap();
    }
    mesh
}

fn rounds() -> impl Strategy<Value = Vec<Vec<prop::sample::Index>>> {
    prop::collection::vec(prop::collection::vec(any::<prop::sample::Index>(), 1..8), 0..6)
}

fn field() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 1 => Just(0.5), 6 => 0.0..10.0f64], 1..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn refinement_keeps_mesh_invariants(
        l_shape in any::<bool>(),
        history in rounds(),
        picks in prop::collection::vec(any::<prop::sample::Index>(), 1..8),
        three in any::<bool>(),
    ) {
        let coarse = refined(l_shape, &history);
        let m = marking(&picks, coarse.n_elements());
        let bis = if three { Bisections::Three } else { Bisections::One };
        let fine = coarse.refine_nvb(&m, bis).unwrap();
        prop_assert!(fine.check_conforming().is_ok());
        prop_assert!((fine.total_area() - coarse.total_area()).abs() <= 1e-12 * coarse.total_area());
        let map = fine.is_refinement_of(&coarse).unwrap();
        for &t in m.indices() {
            prop_assert!(map.refined[t]);
            let limit = if three { 0.25 } else { 0.5 };
            for &c in &map.children[t] {
                prop_assert!(fine.area(c) <= limit * coarse.area(t) * (1.0 + 1e-12));
            }
        }
        for (t, ch) in map.children.iter().enumerate() {
            let s: f64 = ch.iter().map(|&c| fine.area(c)).sum();
            prop_assert!((s - coarse.area(t)).abs() <= 1e-12 * coarse.area(t));
            prop_assert_eq!(map.refined[t], ch.len() > 1);
        }
        let kappa_ref = (0..=3).map(|l| start(l_shape).uniform_refine(l).shape_regularity()).fold(0.0, f64::max);
        prop_assert!(fine.shape_regularity() <= kappa_ref * (1.0 + 1e-9));
    }

    #[test]
    fn mesh_text_round_trip(l_shape in any::<bool>(), history in rounds()) {
        let mesh = refined(l_shape, &history);
        let back = Triangulation::parse(&mesh.to_text()).unwrap();
        prop_assert_eq!(back.vertices(), mesh.vertices());
        prop_assert_eq!(back.triangles(), mesh.triangles());
        prop_assert_eq!(back.boundary_edges(), mesh.boundary_edges());
    }

    #[test]
    fn patches_contain_center_and_touch_it(l_shape in any::<bool>(), history in rounds(), pick in any::<prop::sample::Index>()) {
        let mesh = refined(l_shape, &history);
        let t = pick.index(mesh.n_elements());
        let patch = mesh.patch_of(t).unwrap();
        prop_assert!(patch.members.contains(&t));
        let corners = mesh.triangles()[t];
        for &m in &patch.members {
            prop_assert!(mesh.triangles()[m].iter().any(|v| corners.contains(v)));
        }
        let area: f64 = patch.members.iter().map(|&m| mesh.area(m)).sum();
        prop_assert!((area - patch.area).abs() <= 1e-12 * area);
    }

    #[test]
    fn stiffness_is_symmetric_positive(l_shape in any::<bool>(), history in rounds(), p in 1usize..=3, seed in any::<u64>()) {
        let space = FeSpace::new(refined(l_shape, &history), p).unwrap();
        let k = assemble_stiffness(&space, &Diffusion::Identity, Execution::default());
        prop_assert_eq!(k.asymmetry(), 0.0);
        let mut s = seed | 1;
        let v: Vec<f64> = (0..k.nrows).map(|_| { s ^= s << 13; s ^= s >> 7; s ^= s << 17; (s % 2001) as f64 / 1000.0 - 1.0 }).collect();
        let kv = k.mul_vec(&v);
        let energy: f64 = v.iter().zip(&kv).map(|(a, b)| a * b).sum();
        prop_assert!(energy > 0.0 || v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn estimator_is_execution_independent(l_shape in any::<bool>(), history in rounds(), p in 1usize..=3) {
        let space = FeSpace::new(refined(l_shape, &history), p).unwrap();
        let u = space.interpolate(|x| (x[0] - 0.3).powi(3) * x[1] + x[1] * x[1]).into_coefficients();
        let form = Residual::poisson(|x| x[0].sin(), true);
        let a = estimate_residual(&space, &[&u], &form, Execution::Sequential).unwrap();
        let b = estimate_residual(&space, &[&u], &form, Execution::Parallel).unwrap();
        prop_assert_eq!(a.values(), b.values());
    }

    #[test]
    fn indicator_aggregates_are_consistent(v in field(), split in any::<prop::sample::Index>()) {
        let xi = IndicatorField::new(v.clone()).unwrap();
        let k = split.index(v.len() + 1);
        let (left, right): (Vec<usize>, Vec<usize>) = ((0..k).collect(), (k..v.len()).collect());
        let g = xi.aggregate(&left).hypot(xi.aggregate(&right));
        prop_assert!((g - xi.global()).abs() <= 1e-12 * xi.global().max(1e-300));
    }

    #[test]
    fn single_field_criteria_hold(v in field(), theta in 0.01..=1.0f64) {
        let xi = IndicatorField::new(v).unwrap();
        let nonzero = xi.global() > 0.0;
        let d = mark_doerfler(&xi, theta).unwrap();
        prop_assert!(check_doerfler(&xi, &d, theta));
        prop_assert!(!nonzero || !d.is_empty());
        if d.len() > 0 {
            // Dropping the smallest marked element breaks the criterion.
            let smaller = MarkedSet::new(
                d.indices().iter().copied().filter(|&t| t != *d.indices().iter().min_by(|&&a, &&b| xi.get(a).total_cmp(&xi.get(b)).then(b.cmp(&a))).unwrap()).collect(),
                xi.len(),
            ).unwrap();
            prop_assert!(!check_doerfler(&xi, &smaller, theta));
        }
        for m in [mark_maximum(&xi, theta).unwrap(), mark_equidistribution(&xi, theta).unwrap()] {
            prop_assert!(check_general(&xi, &m, &|t| t));
            prop_assert!(!nonzero || !m.is_empty());
            prop_assert!(m.indices().iter().all(|&t| xi.get(t) > 0.0));
        }
    }

    #[test]
    fn goafem_strategies_are_deterministic_and_bounded(eta in field(), zeta_seed in field(), theta in 0.01..=1.0f64, k in 0usize..8) {
        let n = eta.len();
        let zeta: Vec<f64> = (0..n).map(|i| zeta_seed[i % zeta_seed.len()]).collect();
        let (eta, zeta) = (IndicatorField::new(eta).unwrap(), IndicatorField::new(zeta).unwrap());
        let req = MarkRequest::new(MarkStrategy::from_key(MarkStrategy::KEYS[k]).unwrap(), theta).unwrap();
        if let Ok(m) = mark_goafem(&eta, &zeta, &req) {
            prop_assert_eq!(&m, &mark_goafem(&eta, &zeta, &req).unwrap());
            prop_assert!(m.indices().iter().all(|&t| t < n));
        } else {
            prop_assert!(eta.global() == 0.0 || zeta.global() == 0.0);
        }
    }

    #[test]
    fn rate_fit_recovers_power_laws(alpha in -4.0..-0.2f64, c in 0.01..100.0f64, n in 6usize..30) {
        let records: Vec<ConvergenceRecord> = (0..n)
            .map(|l| {
                let cum = 10usize * 2usize.pow(l as u32 / 2) * (1 + l % 2) + l;
                let est = c * (cum as f64).powf(alpha);
                ConvergenceRecord { level: l, cumulative_dofs: cum, estimator: est, eta: est.sqrt(), zeta: est.sqrt(), ..Default::default() }
            })
            .collect();
        let fitted = fit_rate(&records, 1.0).unwrap();
        prop_assert!((fitted - alpha).abs() < 1e-9);
    }
}
