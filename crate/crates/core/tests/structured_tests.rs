use num_complex::Complex64;
use proptest::prelude::*;
use torus_toeplitz::factorization::{cone_factorize, FactorizationOptions, FactorizationResult};
use torus_toeplitz::harness::modulus_squared;
use torus_toeplitz::lattice::{ConeSpec, FrequencyPoint, PrimitiveVector, TriangleInstance};
use torus_toeplitz::structured::{
    apply_exchange, assemble_h, build_system, combination_norm, constraint_residuals, h_eigen,
    project_k,
    reference_field, structured_inverse_apply, structured_inverse_columns, HankelSystem,
    SolverMode, StructuredOptions,
};
use torus_toeplitz::symbol::{synthesize, FourierMap};
use torus_toeplitz::toeplitz::{assemble_toeplitz, inverse};
use torus_toeplitz::Error;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn alpha(entries: &[((i64, i64), f64)]) -> FourierMap {
    FourierMap::from_entries(
        entries.iter().map(|&((u, v), x)| (FrequencyPoint::new(u, v), c(x))),
        false,
    )
}

fn factor(a: &FourierMap) -> (FourierMap, FactorizationResult) {
    let f = modulus_squared(a);
    // ln f of the two-variable factors decays slowly; 256 keeps aliasing below 1e-10
    let g = synthesize(&f, 256).unwrap().map(|z| c(z.re));
    let cone = ConeSpec::from_points(FrequencyPoint::new(1, 0), FrequencyPoint::new(1, 1)).unwrap();
    let fact = cone_factorize(&g, &cone, &FactorizationOptions::default()).unwrap();
    assert!(fact.is_exact());
    (f, fact)
}

fn tri(lambda: u32) -> TriangleInstance {
    TriangleInstance::new(PrimitiveVector::new(-1, 1).unwrap(), 2, lambda).unwrap()
}

fn system(a: &FourierMap, lambda: u32, m: usize) -> HankelSystem {
    let (_, fact) = factor(a);
    let opts = StructuredOptions {
        box_m: Some(m),
        ..Default::default()
    };
    build_system(&fact, &tri(lambda), &opts).unwrap()
}

fn symbols() -> Vec<FourierMap> {
    vec![
        alpha(&[((0, 0), 1.0), ((1, 0), -0.5)]),
        alpha(&[((0, 0), 1.0), ((1, 0), -0.5), ((1, 1), -1.0 / 3.0)]),
        alpha(&[((0, 0), 1.0), ((1, 0), 0.3), ((1, 1), 0.2), ((2, 0), -0.1)]),
    ]
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
        .prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn exchange_blocks_are_adjoint(seed in 0usize..3, x in vec_strategy(4096), y in vec_strategy(4096)) {
        let sys = system(&symbols()[seed], 1, 5);
        let (n1, n2) = (sys.spectral_box.b1.len(), sys.spectral_box.b2.len());
        let (x, y) = (&x[..n2], &y[..n1]);
        let lhs = inner(&apply_exchange(&sys, 1, 2, x), y);
        let rhs = inner(x, &apply_exchange(&sys, 2, 1, y));
        prop_assert!((lhs - rhs).norm() < 1e-11);
    }

    #[test]
    fn quadratic_form_is_a_squared_norm(seed in 0usize..3, x in vec_strategy(4096)) {
        let sys = system(&symbols()[seed], 1, 5);
        let h = assemble_h(&sys).unwrap();
        let n1 = sys.spectral_box.b1.len();
        let theta = &x[..h.size()];
        let ht: Vec<Complex64> = (0..h.size())
            .map(|i| (0..h.size()).map(|j| h.entry(i, j) * theta[j]).sum())
            .collect();
        let q = inner(&ht, theta).re;
        let n = combination_norm(&sys, &theta[..n1], &theta[n1..]);
        prop_assert!((q - n * n).abs() < 1e-10 * q.max(1.0));
    }
}

#[test]
fn assembled_h_is_hermitian_and_nonnegative() {
    for a in symbols() {
        for m in [4, 8, 12] {
            let sys = system(&a, 1, m);
            let h = assemble_h(&sys).unwrap();
            assert!(h.hermitian_defect() < 1e-10);
            let (vals, _) = h_eigen(&h).unwrap();
            assert!(vals[0] >= -1e-8 * h.inf_norm(), "min eigenvalue {}", vals[0]);
        }
    }
}

#[test]
fn structured_matches_dense_on_small_triangles() {
    for a in symbols().iter().take(2) {
        let (f, fact) = factor(a);
        for lambda in [1, 2] {
            let t = tri(lambda);
            let sys = build_system(&fact, &t, &StructuredOptions::default()).unwrap();
            let dense = inverse(&assemble_toeplitz(&f, &t)).unwrap();
            let (cols, report) = structured_inverse_columns(&sys).unwrap();
            assert!(report.residual < 1e-10);
            for (j, col) in cols.iter().enumerate() {
                for (i, v) in col.values.iter().enumerate() {
                    assert!((v - dense[(i, j)]).norm() < 1e-8, "λ={lambda} ({i},{j})");
                }
            }
        }
    }
}

#[test]
fn neumann_and_direct_agree_and_fallback_works() {
    let a = &symbols()[1];
    let (_, fact) = factor(a);
    let t = tri(2);
    let q = FrequencyPoint::new(2, 1);
    let run = |opts: StructuredOptions| build_system(&fact, &t, &opts).and_then(|s| structured_inverse_apply(&s, q));
    let neu = run(StructuredOptions::default()).unwrap();
    let dir = run(StructuredOptions {
        solver: SolverMode::Direct,
        ..Default::default()
    })
    .unwrap();
    for (x, y) in neu.values.iter().zip(&dir.values) {
        assert!((x - y).norm() < 1e-10);
    }
    let strict = StructuredOptions {
        max_iters: Some(2),
        allow_fallback: false,
        ..Default::default()
    };
    assert!(matches!(run(strict.clone()), Err(Error::SolverDiverged { .. })));
    let sys = build_system(
        &fact,
        &t,
        &StructuredOptions {
            allow_fallback: true,
            ..strict
        },
    )
    .unwrap();
    let s = torus_toeplitz::structured::solve_triangle(&sys, q).unwrap();
    assert!(s.report.fell_back);
    assert_eq!(s.report.mode, SolverMode::Direct);
}

#[test]
fn projection_lands_in_the_constraint_space() {
    for (k, m) in [(0, 16), (1, 20), (2, 16)] {
        let sys = system(&symbols()[k], 2, m);
        let psi = reference_field(&sys, FrequencyPoint::new(1, 0));
        let scale: f64 = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let once = project_k(&sys, &psi).unwrap();
        let (r1, r2) = constraint_residuals(&sys, &once);
        assert!(r1 < 1e-10 * scale && r2 < 1e-10 * scale, "{k}: {r1:e} {r2:e}");
    }
    // well-conditioned case: applying the projection twice changes nothing
    let sys = system(&symbols()[0], 2, 16);
    let once = project_k(&sys, &reference_field(&sys, FrequencyPoint::new(2, 0))).unwrap();
    let twice = project_k(&sys, &once).unwrap();
    let diff: f64 = once.iter().zip(&twice).map(|(a, b)| (a - b).norm_sqr()).sum();
    assert!(diff.sqrt() < 1e-10);
}

#[test]
fn oversized_problems_are_refused() {
    let (_, fact) = factor(&symbols()[0]);
    let opts = StructuredOptions {
        dense_limit: 100,
        ..Default::default()
    };
    assert!(matches!(
        build_system(&fact, &tri(2), &opts),
        Err(Error::TooLarge { .. })
    ));
}
