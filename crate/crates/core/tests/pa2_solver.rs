use proptest::prelude::*;

use kirchhoff_core::audit::necessary_conditions;
use kirchhoff_core::elliptic::{apply_laplacian, principal_eigenpair, solve_poisson};
use kirchhoff_core::pa2::{
    apply_jacobian, fixed_point_pa2, multi_start, newton_solve_pa2, random_positive_guesses, residual_pa2,
    NewtonOptions,
};
use kirchhoff_core::qmap::f_eval;
use kirchhoff_core::{ChangeOfVariables, EigenPair, Error, ExecMode, GridFunction, Mesh1D, NewtonFailure, ProblemParams};

fn setup(n: usize) -> (Mesh1D, EigenPair) {
    let m = Mesh1D::new(n).unwrap();
    let eig = principal_eigenpair(&m, 1e-12).unwrap();
    (m, eig)
}

#[test]
fn trivial_guess_is_reported() {
    let (m, eig) = setup(63);
    let cv = ChangeOfVariables::new(1.0, 2.0).unwrap();
    let p = ProblemParams::new(2.0 * eig.lambda1, 0.0, 2.0, 2.0);
    let zero = vec![0.0; 63];
    assert_eq!(residual_pa2(&m, &cv, &p, &zero).unwrap().sup_norm(), 0.0);
    let err = newton_solve_pa2(&m, &cv, &p, &zero, &NewtonOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Newton(NewtonFailure::ConvergedToTrivial)));
}

#[test]
fn residual_is_the_differential_form() {
    let (m, _) = setup(31);
    let cv = ChangeOfVariables::new(0.8, 2.5).unwrap();
    let p = ProblemParams::new(7.0, -0.5, 2.0, 2.5);
    let w0 = m.sample(|x| x * (1.0 - x));
    let f0: Vec<f64> = w0.iter().map(|&s| f_eval(&cv, &p, s).unwrap()).collect();
    let w = solve_poisson(&m, &f0).unwrap();
    let lap = apply_laplacian(&m, &w).unwrap();
    let expected: Vec<f64> = lap.iter().zip(w.iter()).map(|(l, &s)| l - f_eval(&cv, &p, s).unwrap()).collect();
    let got = residual_pa2(&m, &cv, &p, &w).unwrap();
    assert!(got.sup_distance(&GridFunction::new(expected)) < 1e-10);
}

#[test]
fn unique_solution_from_random_starts() {
    let (m, eig) = setup(127);
    let cv = ChangeOfVariables::new(1.0, 2.0).unwrap();
    let p = ProblemParams::new(2.0 * eig.lambda1, 0.0, 2.0, 2.0);
    let opts = NewtonOptions::default();
    let reference = newton_solve_pa2(&m, &cv, &p, &eig.phi1.scaled(3.0), &opts).unwrap();
    // Picard iteration is an independent oracle for the sublinear case.
    let picard = fixed_point_pa2(&m, &cv, &p, &eig.phi1.scaled(0.5), 1e-13, 20_000).unwrap();
    assert!(reference.w.sup_distance(&picard) < 1e-8);

    let amp = reference.w.sup_norm();
    let guesses = random_positive_guesses(&m, 10, 11, amp);
    let results = multi_start(&m, &cv, &p, &guesses, &opts, ExecMode::default());
    let mut converged = 0;
    for r in &results {
        match r {
            Ok(sol) => {
                converged += 1;
                assert!(sol.w.sup_distance(&reference.w) < 1e-6);
            }
            Err(Error::Newton(_)) => {}
            Err(e) => panic!("{e}"),
        }
    }
    assert!(converged >= 5, "only {converged} of 10 starts converged");
}

#[test]
fn no_positive_solution_below_bifurcation_when_b_nonpositive() {
    let (m, eig) = setup(255);
    let a = 20.0;
    let l0 = eig.lambda1 / a;
    let opts = NewtonOptions::default();
    for b in [0.0, -1.0, -10.0] {
        let p = ProblemParams::new(a, b, 2.0, 2.0);
        for frac in [0.5, 0.9, 1.0] {
            let cv = ChangeOfVariables::new(frac * l0, 2.0).unwrap();
            let guesses = random_positive_guesses(&m, 20, 3, 1.0);
            for r in multi_start(&m, &cv, &p, &guesses, &opts, ExecMode::default()) {
                assert!(r.is_err(), "b={b} λ={}λ₀ returned a positive solution", frac);
            }
        }
    }
}

#[test]
fn ray_through_eigenfunction() {
    let (m, eig) = setup(255);
    let a = 5.0;
    let p = ProblemParams::new(a, eig.lambda1, 1.5, 1.5);
    let cv = ChangeOfVariables::new(eig.lambda1 / a, 1.5).unwrap();
    let sol = newton_solve_pa2(&m, &cv, &p, &eig.phi1.scaled(2.0), &NewtonOptions::default()).unwrap();
    let c = sol.w.sup_norm();
    assert!(sol.w.sup_distance(&eig.phi1.scaled(c)) < 1e-8 * c);
}

#[test]
fn converged_solutions_pass_necessary_conditions() {
    let (m, eig) = setup(127);
    let opts = NewtonOptions::default();
    let cases = [
        (ProblemParams::new(20.0, 0.0, 2.0, 2.0), 0.8),
        (ProblemParams::new(20.0, -1.0, 2.0, 2.0), 1.5),
        (ProblemParams::new(20.0, 2.0, 2.0, 3.0), 0.52),
        (ProblemParams::new(eig.lambda1, 2.0, 2.0, 3.0), 0.995),
    ];
    let mut seen = 0;
    for (p, lambda) in cases {
        let cv = ChangeOfVariables::new(lambda, p.r).unwrap();
        let guesses = random_positive_guesses(&m, 12, 5, 2.0);
        for sol in multi_start(&m, &cv, &p, &guesses, &opts, ExecMode::default()).into_iter().flatten() {
            seen += 1;
            let u = sol.w.try_map(|s| cv.q(s)).unwrap();
            let report = necessary_conditions(&p, lambda, u.sup_norm(), eig.lambda1);
            assert!(report.passed(), "{:?}", report.failed_checks().collect::<Vec<_>>());
        }
    }
    assert!(seen > 0);
}

#[test]
fn execution_modes_agree() {
    let (m, eig) = setup(63);
    let cv = ChangeOfVariables::new(1.0, 2.0).unwrap();
    let p = ProblemParams::new(2.0 * eig.lambda1, -1.0, 2.0, 2.0);
    let guesses = random_positive_guesses(&m, 8, 9, 1.0);
    let opts = NewtonOptions::default();
    let seq = multi_start(&m, &cv, &p, &guesses, &opts, ExecMode::Sequential);
    let par = multi_start(&m, &cv, &p, &guesses, &opts, ExecMode::Parallel);
    for (a, b) in seq.iter().zip(&par) {
        match (a, b) {
            (Ok(x), Ok(y)) => assert_eq!(x, y),
            (Err(x), Err(y)) => assert_eq!(x.to_string(), y.to_string()),
            _ => panic!("modes disagree"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn jacobian_matches_finite_difference(
        lambda in 0.2f64..3.0,
        r in 1.3f64..3.0,
        p in 1.3f64..3.0,
        b in -3.0f64..3.0,
        amp in 0.2f64..3.0,
        dir in prop::collection::vec(-1.0f64..1.0, 31),
    ) {
        let m = Mesh1D::new(31).unwrap();
        let cv = ChangeOfVariables::new(lambda, r).unwrap();
        let params = ProblemParams::new(15.0, b, p, r);
        let w = m.sample(|x| amp * (std::f64::consts::PI * x).sin() + 0.05);
        let eps = 1e-6;
        let plus: Vec<f64> = w.iter().zip(&dir).map(|(a, d)| a + eps * d).collect();
        let minus: Vec<f64> = w.iter().zip(&dir).map(|(a, d)| a - eps * d).collect();
        let rp = residual_pa2(&m, &cv, &params, &plus).unwrap();
        let rm = residual_pa2(&m, &cv, &params, &minus).unwrap();
        let jd = apply_jacobian(&m, &cv, &params, &w, &dir).unwrap();
        let scale = jd.sup_norm().max(1e-8);
        for i in 0..31 {
            let fd = (rp[i] - rm[i]) / (2.0 * eps);
            prop_assert!((fd - jd[i]).abs() <= 1e-5 * scale, "i={} fd={} jd={}", i, fd, jd[i]);
        }
    }
}
