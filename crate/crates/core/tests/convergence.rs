//! Numerical behaviour across resolutions and thresholds.

use std::sync::Arc;

use wavegal::adaptivity::{finest_level_strip_fraction, initial_active_set, AdaptivityPolicy};
use wavegal::assembly::{Assembler, QuadratureRule};
use wavegal::cli::{ScenarioConfig, ScenarioKind};
use wavegal::mra::{full_index_set, project_function, Basis, BasisFamily, Evaluator};
use wavegal::problem::DirichletEdges;
use wavegal::reference::{fd_solve_steady, interface_flux_jump, FdOptions, UniformGridField};
use wavegal::timestepper::{run_transient, solve_steady, PcgConfig, RunOptions};

#[test]
fn stiffness_density_falls_with_level() {
    for fam in [BasisFamily::Daubechies4, BasisFamily::HierarchicalHat] {
        let p = ScenarioConfig::minimal(ScenarioKind::Inclusion).problem().unwrap();
        let basis = Basis::new(fam, 8).unwrap();
        let density: Vec<f64> = (3..=5)
            .map(|j| {
                let set = full_index_set(j, fam, p.boundary.dirichlet_edges()).unwrap();
                let asm = Assembler::new(&basis, &set, &p, QuadratureRule::default_for(fam)).unwrap();
                asm.stiffness().unwrap().density()
            })
            .collect();
        assert!(density.windows(2).all(|w| w[1] < w[0]), "{fam:?}: {density:?}");
        assert!(density[2] <= 0.20, "{fam:?}: {density:?}");
    }
}

#[test]
fn haar_mass_is_the_identity() {
    let p = ScenarioConfig::minimal(ScenarioKind::Homogeneous).problem().unwrap();
    let set = full_index_set(4, BasisFamily::Haar, DirichletEdges::NONE).unwrap();
    let basis = Basis::new(BasisFamily::Haar, 6).unwrap();
    let m = Assembler::new(&basis, &set, &p, QuadratureRule::default_for(BasisFamily::Haar))
        .unwrap()
        .mass()
        .unwrap();
    let dense = m.to_dense();
    for i in 0..set.len() {
        for j in 0..set.len() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((dense[(i, j)] - want).abs() < 1e-12, "({i}, {j}) = {}", dense[(i, j)]);
        }
    }
}

fn restricted_gap(coarse: &UniformGridField, fine: &UniformGridField) -> f64 {
    let n = coarse.n();
    let stride = (fine.n() - 1) / (n - 1);
    let mut sum = 0.0;
    for iy in 0..n {
        for ix in 0..n {
            let d = coarse.get(ix, iy) - fine.get(ix * stride, iy * stride);
            sum += d * d;
        }
    }
    (sum / (n * n) as f64).sqrt()
}

#[test]
fn finite_difference_reference_converges_on_the_inclusion() {
    let p = ScenarioConfig::minimal(ScenarioKind::Inclusion).problem().unwrap();
    let opts = FdOptions {
        cg_tol: 1e-12,
        ..FdOptions::default()
    };
    let fields: Vec<UniformGridField> = [129, 257, 513]
        .iter()
        .map(|&n| fd_solve_steady(&p, n, &opts).unwrap().0)
        .collect();
    let d1 = restricted_gap(&fields[0], &fields[1]);
    let d2 = restricted_gap(&fields[1], &fields[2]);
    assert!(d2 < d1, "{d1:e} {d2:e}");
    assert!(d1 <= 4.0 * d2, "{d1:e} {d2:e}");
}

#[test]
fn coarse_initial_data_activates_no_fine_wavelets() {
    let fam = BasisFamily::HierarchicalHat;
    let full = Arc::new(full_index_set(6, fam, DirichletEdges::NONE).unwrap());
    // bilinear on the level-1 grid
    let t0 = |p: [f64; 2]| {
        let h = |t: f64| 1.0 - (2.0 * t - 1.0).abs();
        1.0 + h(p[0]) * h(p[1])
    };
    let coeffs = project_function(
        &t0,
        &full,
        &Basis::new(fam, 8).unwrap(),
        QuadratureRule::default_for(fam),
    )
    .unwrap();
    let active = initial_active_set(&full, &coeffs, &AdaptivityPolicy::with_epsilon(1e-6)).unwrap();
    assert!(active.set().iter().all(|w| w.level <= 2));
    assert!(active.len() < full.len() / 10);
}

#[test]
fn sharp_ramp_concentrates_fine_wavelets_near_the_front() {
    let fam = BasisFamily::HierarchicalHat;
    let full = Arc::new(full_index_set(7, fam, DirichletEdges::NONE).unwrap());
    let basis = Basis::new(fam, 9).unwrap();
    let t0 = |p: [f64; 2]| 0.5 * (1.0 + ((p[1] - 0.3) / 0.01).tanh());
    let coeffs = project_function(&t0, &full, &basis, QuadratureRule::default_for(fam)).unwrap();
    let active = initial_active_set(&full, &coeffs, &AdaptivityPolicy::with_epsilon(1e-3)).unwrap();
    assert_eq!(active.set().finest_wavelet_level(), Some(6));
    let frac = finest_level_strip_fraction(&active, &basis, 0.3).unwrap();
    assert!(frac >= 0.9, "{frac}");
    assert!(active.len() < full.len() / 2);
}

#[test]
fn daubechies_projection_reproduces_a_linear_function() {
    let fam = BasisFamily::Daubechies4;
    let set = full_index_set(4, fam, DirichletEdges::NONE).unwrap();
    let basis = Basis::new(fam, 10).unwrap();
    let f = |p: [f64; 2]| p[0];
    let c = project_function(&f, &set, &basis, QuadratureRule::default_for(fam)).unwrap();
    let ev = Evaluator::new(&basis, &set);
    let n = 64;
    let mut sum = 0.0;
    for iy in 0..n {
        for ix in 0..n {
            let p = [(ix as f64 + 0.5) / n as f64, (iy as f64 + 0.5) / n as f64];
            let d = ev.eval(&c, p).unwrap() - f(p);
            sum += d * d;
        }
    }
    let l2 = (sum / (n * n) as f64).sqrt();
    assert!(l2 <= 1e-6, "{l2:e}");
}

#[test]
fn long_transient_settles_on_the_steady_solution() {
    let mut c = ScenarioConfig::minimal(ScenarioKind::Inclusion);
    c.basis.j_max = 4;
    c.adaptivity.enabled = false;
    c.time.dt = 0.5;
    c.time.t_final = 40.0;
    let p = c.problem().unwrap();
    let disc = c.discretization();
    let opts = RunOptions {
        store_every: 0,
        ..RunOptions::default()
    };
    let sol = run_transient(&p, &disc, None, c.time_grid().unwrap(), opts).unwrap();
    let cfg = PcgConfig {
        tol: 1e-12,
        ..PcgConfig::default()
    };
    let (u, _) = solve_steady(&sol.basis, &sol.full, &p, disc.quadrature, &cfg).unwrap();
    let gap = sol
        .last()
        .coeffs
        .iter()
        .zip(&u)
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    let scale = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(gap <= 1e-6 * scale.max(1.0), "{gap:e}");
}

#[test]
fn flux_jump_shrinks_with_the_threshold() {
    for y_i in [0.5, 0.3] {
        let mut c = ScenarioConfig::minimal(ScenarioKind::Slab);
        c.basis.j_max = 5;
        c.material.interface_y = y_i;
        c.time.t_final = 2.0;
        let p = c.problem().unwrap();
        let opts = RunOptions {
            store_every: 0,
            ..RunOptions::default()
        };
        let delta = 1.0 / (1u32 << c.basis.j_max) as f64;
        let jumps: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&eps| {
                let policy = AdaptivityPolicy::with_epsilon(eps);
                let sol = run_transient(&p, &c.discretization(), Some(&policy), c.time_grid().unwrap(), opts).unwrap();
                interface_flux_jump(&sol, sol.last(), y_i, delta, 64)
            })
            .collect();
        assert!(
            jumps.windows(2).all(|w| w[1] <= w[0] * 1.05 + 1e-9),
            "y = {y_i}: {jumps:?}"
        );
    }
}
