use crosspoint_core::harness::{fixed_point_check, ConfigMap};
use crosspoint_core::osm::{energy_series, run_osm, Method, OsmConfig, Rhs, Start};
use crosspoint_core::{convergence_factor, solve_mono, Engine, Error, InterfaceMatrix, Load, Mesh, Traces};
use proptest::prelude::*;

fn small(sub: (usize, usize), method: Method, variant: InterfaceMatrix, p: f64) -> OsmConfig {
    OsmConfig {
        cells: (4 * sub.0, 4 * sub.1),
        extent: (2.0 * sub.0 as f64, 2.0 * sub.1 as f64),
        subdomains: sub,
        p,
        variant,
        method,
        iterations: 25,
        ..Default::default()
    }
}

#[test]
fn mono_solution_approaches_the_exact_benchmark() {
    // bilinear elements reproduce x(4-x)y(4-y) at the nodes only approximately; the error is O(h^2)
    let mut errs = Vec::new();
    for n in [8, 16, 32] {
        let mesh = Mesh::new(n, n, 4.0, 4.0).unwrap();
        let load = Load::function(crosspoint_core::assembly::poisson_benchmark_rhs);
        let u = solve_mono(&mesh, 0.0, &load).unwrap();
        let e = (0..mesh.num_nodes())
            .map(|j| {
                let [x, y] = mesh.coords(j);
                (u[j] - x * (4.0 - x) * y * (4.0 - y)).abs()
            })
            .fold(0.0, f64::max);
        errs.push(e);
    }
    assert!(errs[1] < errs[0] / 3.0 && errs[2] < errs[1] / 3.0, "{errs:?}");
}

#[test]
fn both_methods_converge_to_the_mono_domain_solution() {
    for method in [Method::Auxiliary, Method::Complete] {
        let cfg = OsmConfig {
            rhs: Rhs::Poisson,
            start: Start::Zero,
            iterations: 400,
            p: 2.0,
            ..small((3, 2), method, InterfaceMatrix::Lumped, 2.0)
        };
        let r = run_osm(&cfg).unwrap();
        assert!(*r.errors.last().unwrap() < 1e-8 * r.errors[0], "{method}: {:e}", r.errors.last().unwrap());
    }
}

#[test]
fn consistent_and_overlumped_variants_converge() {
    for variant in [InterfaceMatrix::Consistent, InterfaceMatrix::Overlumped(4.0)] {
        let cfg = OsmConfig { iterations: 200, ..small((2, 2), Method::Complete, variant, 1.5) };
        let r = run_osm(&cfg).unwrap();
        assert!(*r.errors.last().unwrap() < 1e-6 * r.errors[0]);
    }
}

#[test]
fn complete_method_has_no_energy() {
    let r = run_osm(&small((2, 2), Method::Complete, InterfaceMatrix::Lumped, 1.0)).unwrap();
    assert!(matches!(energy_series(&r), Err(Error::Unsupported(_))));
    assert!(r.energy.iter().all(Option::is_none));
}

#[test]
fn zero_error_makes_the_factor_undefined() {
    let cfg = OsmConfig { start: Start::Zero, ..small((2, 1), Method::Auxiliary, InterfaceMatrix::Lumped, 1.0) };
    let r = run_osm(&cfg).unwrap();
    assert!(matches!(convergence_factor(&r.errors, 0, 5), Err(Error::UndefinedFactor(_))));
}

#[test]
fn perturbed_fixed_point_is_detected() {
    let cfg = OsmConfig { rhs: Rhs::Poisson, ..small((2, 2), Method::Auxiliary, InterfaceMatrix::Lumped, 2.0) };
    assert!(fixed_point_check(&cfg, 0.0).unwrap().passed(1e-10));
    let r = fixed_point_check(&cfg, 1e-3).unwrap();
    assert!(!r.passed(1e-10));
    assert!(r.max_abs_change >= 1e-4);
}

#[test]
fn config_file_round_trip() {
    let text = "# run\np = 2\ncells = 20x20\nsubdomains = 2x2\nmethod = complete\nomega = 3.5\niters = 7\n";
    let cfg = ConfigMap::parse(text).unwrap().to_osm_config().unwrap();
    assert_eq!(cfg.extent, (4.0, 4.0));
    assert_eq!(cfg.method, Method::Complete);
    assert_eq!(cfg.variant, InterfaceMatrix::Overlumped(3.5));
    assert_eq!(run_osm(&cfg).unwrap().errors.len(), 8);
}

#[test]
fn config_errors_name_the_line() {
    let err = ConfigMap::parse("p = 1\ncells = 4x4\nbogus = 1\n").unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");
    let err = ConfigMap::parse("p = x\ncells = 4x4\nsubdomains = 2x2\n").unwrap().to_osm_config().unwrap_err();
    assert!(err.to_string().contains("line 1"), "{err}");
    let err = ConfigMap::parse("cells = 4x4\nsubdomains = 2x2\n").unwrap().to_osm_config().unwrap_err();
    assert!(err.to_string().contains("'p'"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lumped_energy_never_increases(seed in 0u64..10_000, p in 0.3f64..6.0, px in 2usize..4, py in 2usize..4) {
        let cfg = OsmConfig { seed, iterations: 15, ..small((px, py), Method::Auxiliary, InterfaceMatrix::Lumped, p) };
        let e = energy_series(&run_osm(&cfg).unwrap()).unwrap();
        for w in e.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn iteration_is_linear_in_the_traces(seed in 0u64..10_000, scale in -3.0f64..3.0) {
        let cfg = small((2, 2), Method::Auxiliary, InterfaceMatrix::Overlumped(2.5), 1.7);
        let engine = Engine::new(cfg.decomposition().unwrap(), cfg.params(), cfg.method, &Load::Zero).unwrap();
        let t = engine.random_traces(seed);
        let Traces::Aux(mut scaled) = t.clone() else { unreachable!() };
        for side in scaled.values.iter_mut().flatten() {
            side.iter_mut().for_each(|v| *v *= scale);
        }
        let (u1, _) = engine.step(&t).unwrap();
        let (u2, _) = engine.step(&Traces::Aux(scaled)).unwrap();
        for (a, b) in u1.iter().flatten().zip(u2.iter().flatten()) {
            prop_assert!((a * scale - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn fixed_point_holds_for_any_parameters(p in 0.2f64..10.0, omega in 0.0f64..20.0, eta in 0.0f64..3.0, complete in any::<bool>()) {
        let method = if complete { Method::Complete } else { Method::Auxiliary };
        let cfg = OsmConfig { rhs: Rhs::Poisson, eta, ..small((3, 2), method, InterfaceMatrix::Overlumped(omega), p) };
        let r = fixed_point_check(&cfg, 0.0).unwrap();
        prop_assert!(r.passed(1e-10), "{r:?}");
    }
}
