//! Randomized invariants across modules.

use std::sync::Arc;

use proptest::prelude::*;

use wavegal::adaptivity::{expand_neighborhood, mark_essential, transfer_coefficients, ActiveSet, AdaptivityPolicy};
use wavegal::assembly::{Assembler, CsrMatrix, QuadratureRule};
use wavegal::cli::{ScenarioConfig, ScenarioKind};
use wavegal::mra::{full_index_set, Basis, BasisFamily, Generator, IndexSet};
use wavegal::problem::{DirichletEdges, Geometry, MaterialMap, MaterialPhase};
use wavegal::timestepper::{backward_euler_step, pcg_solve, PcgConfig};

fn family() -> impl Strategy<Value = BasisFamily> {
    prop_oneof![
        Just(BasisFamily::Haar),
        Just(BasisFamily::Daubechies4),
        Just(BasisFamily::HierarchicalHat),
    ]
}

fn edges() -> impl Strategy<Value = DirichletEdges> {
    (0u8..16).prop_map(|bits| {
        let all = wavegal::problem::Edge::ALL;
        DirichletEdges::from_edges(
            &all.iter()
                .copied()
                .filter(|e| bits & (1 << e.index()) != 0)
                .collect::<Vec<_>>(),
        )
    })
}

/// Level-0 scaling ordinals, or all level-0 ordinals if none survived.
fn net(full: &IndexSet) -> Vec<usize> {
    let level0: Vec<usize> = (0..full.len()).filter(|&i| full.get(i).level == 0).collect();
    let scal: Vec<usize> = level0.iter().copied().filter(|&i| full.get(i).is_scaling()).collect();
    if scal.is_empty() {
        level0
    } else {
        scal
    }
}

fn coeffs_for(full: &IndexSet, seed: &[f64]) -> Vec<f64> {
    (0..full.len())
        .map(|i| seed[i % seed.len()] * 10f64.powi(-((i % 7) as i32)))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn threshold_monotonicity(
        fam in family(),
        j in 1u32..4,
        d in edges(),
        seed in prop::collection::vec(-1.0f64..1.0, 1..64),
        e1 in 1e-6f64..1.0,
        factor in 1.0f64..100.0,
    ) {
        let full = Arc::new(full_index_set(j, fam, d).unwrap());
        prop_assume!(!full.is_empty());
        let everything = ActiveSet::everything(full.clone(), 0);
        let u = coeffs_for(&full, &seed);
        let fine = mark_essential(&u, &everything, &AdaptivityPolicy::with_epsilon(e1)).unwrap();
        let coarse = mark_essential(&u, &everything, &AdaptivityPolicy::with_epsilon(e1 * factor)).unwrap();
        for o in &coarse {
            prop_assert!(fine.binary_search(o).is_ok());
        }
    }

    #[test]
    fn expansion_is_sound_and_keeps_the_safety_net(
        fam in family(),
        j in 1u32..4,
        d in edges(),
        seed in prop::collection::vec(-1.0f64..1.0, 1..64),
        eps in 1e-5f64..1.0,
        radius in 0u32..3,
        parents in any::<bool>(),
        children in any::<bool>(),
    ) {
        let full = Arc::new(full_index_set(j, fam, d).unwrap());
        prop_assume!(!full.is_empty());
        let policy = AdaptivityPolicy { epsilon: eps, radius, parents, children, stride: 1 };
        let everything = ActiveSet::everything(full.clone(), 0);
        let u = coeffs_for(&full, &seed);
        let essential = mark_essential(&u, &everything, &policy).unwrap();
        let expanded = expand_neighborhood(&essential, &full, &policy);
        let members = expanded.full_ordinals();
        prop_assert!(members.windows(2).all(|w| w[0] < w[1]));
        for o in essential.iter().chain(net(&full).iter()) {
            prop_assert!(members.binary_search(o).is_ok());
        }
        // transferring there and back keeps the shared coefficients
        let there = transfer_coefficients(&everything, &u, &expanded).unwrap();
        let back = transfer_coefficients(&expanded, &there, &everything).unwrap();
        for (i, v) in back.iter().enumerate() {
            let kept = members.binary_search(&i).is_ok();
            prop_assert_eq!(*v, if kept { u[i] } else { 0.0 });
        }
    }

    #[test]
    fn assembled_operators_are_symmetric(
        kind in prop_oneof![Just(ScenarioKind::Slab), Just(ScenarioKind::Inclusion), Just(ScenarioKind::Fgm)],
        fam in prop_oneof![Just(BasisFamily::Daubechies4), Just(BasisFamily::HierarchicalHat)],
        k2 in 0.1f64..100.0,
        pick in prop::collection::vec(any::<bool>(), 64),
    ) {
        let mut c = ScenarioConfig::minimal(kind);
        c.material.k2 = k2;
        let p = c.problem().unwrap();
        let full = full_index_set(3, fam, p.boundary.dirichlet_edges()).unwrap();
        let items: Vec<_> = full.iter().enumerate().filter(|(i, w)| w.level == 0 || pick[i % pick.len()]).map(|(_, w)| *w).collect();
        let set = IndexSet::from_indices(fam, 3, p.boundary.dirichlet_edges(), items);
        prop_assume!(!set.is_empty());
        let basis = Basis::new(fam, 6).unwrap();
        let (m, k) = Assembler::new(&basis, &set, &p, QuadratureRule::default_for(fam)).unwrap().matrices().unwrap();
        prop_assert!(m.max_asymmetry() <= 1e-10);
        prop_assert!(k.max_asymmetry() <= 1e-10);
    }

    #[test]
    fn backward_euler_never_increases_energy(
        dt in 1e-4f64..1e4,
        seed in prop::collection::vec(-1.0f64..1.0, 8..64),
    ) {
        let c = ScenarioConfig::minimal(ScenarioKind::Slab);
        let mut p = c.problem().unwrap();
        p.boundary = wavegal::problem::BoundarySpec::new(
            wavegal::problem::BoundaryCondition::Dirichlet(Default::default()),
            wavegal::problem::BoundaryCondition::insulated(),
            wavegal::problem::BoundaryCondition::Dirichlet(Default::default()),
            wavegal::problem::BoundaryCondition::insulated(),
        ).unwrap();
        let fam = BasisFamily::HierarchicalHat;
        let set = full_index_set(3, fam, p.boundary.dirichlet_edges()).unwrap();
        let basis = Basis::new(fam, 6).unwrap();
        let (m, k) = Assembler::new(&basis, &set, &p, QuadratureRule::default_for(fam)).unwrap().matrices().unwrap();
        let u: Vec<f64> = (0..set.len()).map(|i| seed[i % seed.len()]).collect();
        prop_assume!(m.quadratic_form(&u) > 0.0);
        let cfg = PcgConfig { tol: 1e-13, ..PcgConfig::default() };
        let next = backward_euler_step(&m, &k, &u, &vec![0.0; u.len()], dt, &cfg).unwrap().0;
        prop_assert!(m.quadratic_form(&next) <= m.quadratic_form(&u) * (1.0 + 1e-12));
    }

    #[test]
    fn pcg_is_bit_reproducible(
        n in 2usize..40,
        seed in prop::collection::vec(-1.0f64..1.0, 40),
    ) {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0 + seed[i].abs()));
            if i + 1 < n {
                t.push((i, i + 1, seed[i] * 0.9));
                t.push((i + 1, i, seed[i] * 0.9));
            }
        }
        let a = CsrMatrix::from_triplets(n, &t, 0.0);
        let b: Vec<f64> = (0..n).map(|i| seed[(i * 7) % seed.len()]).collect();
        let cfg = PcgConfig::default();
        let (x1, s1) = pcg_solve(&a, &b, &cfg, None).unwrap();
        let (x2, s2) = pcg_solve(&a, &b, &cfg, None).unwrap();
        prop_assert_eq!(s1, s2);
        prop_assert!(x1.iter().zip(&x2).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn config_echo_round_trips(
        kind in prop_oneof![Just(ScenarioKind::Slab), Just(ScenarioKind::Inclusion), Just(ScenarioKind::Fgm), Just(ScenarioKind::Homogeneous)],
        fam in prop_oneof![Just(BasisFamily::HierarchicalHat), Just(BasisFamily::Daubechies4), Just(BasisFamily::Daubechies6)],
        j in 1u32..8,
        eps in 1e-8f64..1.0,
        dt_steps in 1usize..200,
        k1 in 1e-3f64..1e3,
        k2 in 1e-3f64..1e3,
        source_c in -5.0f64..5.0,
        enabled in any::<bool>(),
    ) {
        let mut c = ScenarioConfig::minimal(kind);
        c.basis.family = fam;
        c.basis.j_max = j;
        c.adaptivity.epsilon = eps;
        c.adaptivity.enabled = enabled;
        c.time.t_final = 1.0;
        c.time.dt = 1.0 / dt_steps as f64;
        c.material.k1 = k1;
        c.material.k2 = k2;
        c.scenario.source = wavegal::problem::SpaceTimeFn::parse(&format!("{source_c} * x * y^2")).unwrap();
        let echo = c.echo();
        prop_assert!(echo.lines().all(|l| l.starts_with("config.")));
        prop_assert_eq!(ScenarioConfig::from_echo(&echo).unwrap(), c);
    }

    #[test]
    fn conductivity_is_spd_and_graded_ray_is_lipschitz(
        k_m in 0.01f64..100.0,
        alpha in 0.0f64..5.0,
        y0 in 0.05f64..0.95,
        x in 0.0f64..1.0,
    ) {
        prop_assume!(1.0 + alpha * (2.0 * y0 - 1.0) > 0.0);
        let map = MaterialMap::new(
            Geometry::GradedLayer { y0, alpha },
            MaterialPhase::isotropic(0, k_m),
            MaterialPhase::isotropic(1, k_m),
        ).unwrap();
        let n = 400;
        let dy = 1.0 / n as f64;
        let mut prev = map.conductivity([x, 0.0]).unwrap();
        for i in 1..=n {
            let k = map.conductivity([x, i as f64 * dy]).unwrap();
            prop_assert!(k.is_positive_definite());
            // the layer boundary itself is a jump
            let straddles = ((i - 1) as f64 * dy) < y0 && i as f64 * dy >= y0;
            if !straddles {
                prop_assert!((k.kyy - prev.kyy).abs() <= 2.0 * alpha * k_m * dy * (1.0 + 1e-9) + 1e-12);
            }
            prev = k;
        }
    }

    #[test]
    fn coarse_scaling_functions_nest_in_the_finer_level(
        fam in prop_oneof![Just(BasisFamily::Daubechies4), Just(BasisFamily::Daubechies6), Just(BasisFamily::HierarchicalHat)],
        c in prop::collection::vec(-1.0f64..1.0, 8),
        i in 0usize..4096,
    ) {
        // Σ c_k φ_{2,k} against its level-3 expansion through the mask, at
        // points where both levels hit table nodes
        let q = 8;
        let b = Basis::new(fam, q).unwrap();
        let h = fam.lowpass();
        let lo = fam.mother_support(Generator::Phi).0;
        let x = i as f64 / (1u64 << (q + 2)) as f64;
        let coarse: f64 = c.iter().enumerate().map(|(k, ck)| ck * b.factor(Generator::Phi, 2, k as i64 - 3, x)).sum();
        let fine: f64 = c
            .iter()
            .enumerate()
            .map(|(k, ck)| {
                let k = k as i64 - 3;
                ck * h.iter().enumerate().map(|(l, hl)| hl * b.factor(Generator::Phi, 3, 2 * k + l as i64 + lo, x)).sum::<f64>()
            })
            .sum();
        prop_assert!((coarse - fine).abs() <= 1e-10, "{} vs {}", coarse, fine);
    }
}
