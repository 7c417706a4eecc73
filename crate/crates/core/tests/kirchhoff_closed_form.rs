use std::f64::consts::PI;

use approx::assert_relative_eq;

use kirchhoff_core::continuation::{trace_branch, BranchContext};
use kirchhoff_core::elliptic::{grad_norm_sq, principal_eigenpair};
use kirchhoff_core::kirchhoff::{
    closed_form_solution, find_h_roots, grad_norm_c, h_eval, has_sign_change, p1_residual, theorem_c_h_scan,
    theorem_c_solve,
};
use kirchhoff_core::pa2::{newton_solve_pa2, NewtonOptions};
use kirchhoff_core::{
    ChangeOfVariables, ContinuationSettings, EigenPair, Error, ExecMode, GFunction, Mesh1D, ProblemParams,
    TheoremCOutcome, ToleranceSettings,
};

fn setup(n: usize) -> (Mesh1D, EigenPair) {
    let m = Mesh1D::new(n).unwrap();
    let eig = principal_eigenpair(&m, 1e-12).unwrap();
    (m, eig)
}

fn vertical_params(eig: &EigenPair, a: f64) -> ProblemParams {
    ProblemParams::new(a, eig.lambda1, 1.5, 1.5)
}

#[test]
fn h_examples() {
    let one = GFunction::Constant { g0: 1.0 };
    for gamma in [0.0, 1.0, 1e6] {
        assert_eq!(h_eval(1.0, gamma, &one).unwrap(), 0.0);
    }
    let g = GFunction::Constant { g0: 2.5 };
    assert_eq!(h_eval(0.4, 3.0, &g).unwrap(), 0.0);
    assert!(h_eval(0.41, 3.0, &g).unwrap() != 0.0);
    // At the bifurcation point h = a/λ₁ - g(0).
    let sat = GFunction::Saturating { alpha: 1.0, beta: 1.0 };
    let (a, l1) = (20.0, 9.8696);
    assert_relative_eq!(h_eval(l1 / a, 0.0, &sat).unwrap(), a / l1 - 1.0, max_relative = 1e-14);
    assert!(h_eval(0.0, 1.0, &one).is_err());
    assert!(h_eval(-1.0, 1.0, &one).is_err());
}

#[test]
fn p1_residual_controls() {
    let (m, eig) = setup(127);
    let p = ProblemParams::new(20.0, 1.0, 2.0, 3.0);
    let g = GFunction::Saturating { alpha: 1.0, beta: 1.0 };
    assert_eq!(p1_residual(&m, &[0.0; 127], &g, &p).unwrap(), 0.0);
    assert!(p1_residual(&m, &eig.phi1, &g, &p).unwrap() > 1e-3);
}

#[test]
fn constant_g_root_is_the_fixed_lambda_solution() {
    let (m, eig) = setup(127);
    let p = ProblemParams::new(2.0 * eig.lambda1, 0.0, 2.0, 2.0);
    let g = GFunction::Constant { g0: 1.0 };
    let tol = ToleranceSettings::default();
    let ctx = BranchContext::new(&m, &p, &eig, &tol);
    let branch = trace_branch(&ctx, &ContinuationSettings::default(), (0.01, 2.0)).unwrap();
    let roots = find_h_roots(&ctx, &branch, &g, None, ExecMode::default()).unwrap();
    assert_eq!(roots.len(), 1);
    let root = &roots[0];
    assert!((root.lambda_star - 1.0).abs() <= 1e-8);

    // Oracle: Newton at fixed λ = 1, mapped back through q.
    let cv = ChangeOfVariables::new(1.0, 2.0).unwrap();
    let w = newton_solve_pa2(&m, &cv, &p, &eig.phi1.scaled(3.0), &NewtonOptions::default()).unwrap().w;
    let u = w.try_map(|s| cv.q(s)).unwrap();
    assert!(root.u.sup_distance(&u) < 1e-6 * u.sup_norm().max(1.0), "{}", root.u.sup_distance(&u));
    assert!(root.residual_sup <= 1e-7);
}

#[test]
fn closed_form_is_monotone_in_c() {
    let (m, eig) = setup(255);
    let p = vertical_params(&eig, 5.0);
    assert!(closed_form_solution(&m, &eig, &p, 1e-12).unwrap().sup_norm() < 1e-11);
    assert_eq!(closed_form_solution(&m, &eig, &p, 0.0).unwrap().sup_norm(), 0.0);
    let mut prev = closed_form_solution(&m, &eig, &p, 0.5).unwrap();
    for c in [0.75, 1.0, 1.5, 2.0, 5.0] {
        let next = closed_form_solution(&m, &eig, &p, c).unwrap();
        assert!(next.iter().zip(prev.iter()).all(|(a, b)| a > b), "c={c}");
        prev = next;
    }
    assert!(matches!(
        closed_form_solution(&m, &eig, &ProblemParams::new(5.0, eig.lambda1, 1.5, 2.0), 1.0),
        Err(Error::Regime(_))
    ));
    assert!(matches!(closed_form_solution(&m, &eig, &ProblemParams::new(5.0, 3.0, 1.5, 1.5), 1.0), Err(Error::Regime(_))));
}

#[test]
fn gradient_formula_agrees_with_discrete_gradient() {
    let mut prev = f64::INFINITY;
    for n in [63, 127, 255, 511] {
        let (m, eig) = setup(n);
        let p = vertical_params(&eig, 5.0);
        let mut worst: f64 = 0.0;
        for c in [0.5, 1.0, 2.0] {
            let quad = grad_norm_c(&m, &eig, &p, c).unwrap();
            let direct = grad_norm_sq(&m, &closed_form_solution(&m, &eig, &p, c).unwrap()).unwrap();
            worst = worst.max(((quad - direct) / direct).abs());
        }
        assert!(worst <= 5.0 * m.h(), "n={n}: {worst}");
        assert!(worst < prev);
        prev = worst;
    }
}

#[test]
fn gradient_formula_examples() {
    let (m, eig) = setup(511);
    let p = vertical_params(&eig, 5.0);
    assert_eq!(grad_norm_c(&m, &eig, &p, 0.0).unwrap(), 0.0);
    // The first correction scales like c^{r-1}, so c must be tiny for r = 1.5.
    let c = 1e-12;
    let approx = (c * eig.lambda1 / p.a).powi(2) * PI * PI / 2.0;
    assert_relative_eq!(grad_norm_c(&m, &eig, &p, c).unwrap(), approx, max_relative = 1e-4);
    let values: Vec<f64> = (1..=100).map(|k| grad_norm_c(&m, &eig, &p, 0.1 * k as f64).unwrap()).collect();
    assert!(values.windows(2).all(|w| w[1] > w[0]));
    let steep = ProblemParams::new(5.0, eig.lambda1, 2.5, 2.5);
    assert!(matches!(grad_norm_c(&m, &eig, &steep, 1.0), Err(Error::Regime(_))));
}

#[test]
fn theorem_c_solvable() {
    let (m, eig) = setup(511);
    let p = vertical_params(&eig, 0.5 * eig.lambda1);
    let g = GFunction::Decaying { alpha: 1.0 };
    match theorem_c_solve(&m, &eig, &p, &g).unwrap() {
        TheoremCOutcome::Solved { solution, s_prime, degenerate, c } => {
            assert!(!degenerate && c > 0.0);
            assert_relative_eq!(s_prime, 1.0, max_relative = 1e-12);
            assert!((solution.gamma - 1.0).abs() <= 1e-8);
            assert!(solution.residual_sup <= 1e-7);
            assert!(solution.u.min() > 0.0);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn theorem_c_unsolvable_and_scan() {
    let (m, eig) = setup(511);
    let p = vertical_params(&eig, 2.0 * eig.lambda1);
    let g = GFunction::Decaying { alpha: 1.0 };
    match theorem_c_solve(&m, &eig, &p, &g).unwrap() {
        TheoremCOutcome::NoSolution { range, target, near_boundary } => {
            assert_eq!(range.to_string(), "(0, 1]");
            assert_relative_eq!(target, 2.0, max_relative = 1e-12);
            assert!(!near_boundary);
        }
        other => panic!("{other:?}"),
    }
    let cs: Vec<f64> = (0..=60).map(|k| 10f64.powf(-3.0 + 0.1 * k as f64)).collect();
    let hs = theorem_c_h_scan(&m, &eig, &p, &g, &cs, ExecMode::default()).unwrap();
    assert!(!has_sign_change(&hs));
    // The solvable case does change sign along the same sweep.
    let solvable = vertical_params(&eig, 0.5 * eig.lambda1);
    assert!(has_sign_change(&theorem_c_h_scan(&m, &eig, &solvable, &g, &cs, ExecMode::default()).unwrap()));
}

#[test]
fn theorem_c_constant_g_is_degenerate() {
    let (m, eig) = setup(255);
    let g = GFunction::Constant { g0: 2.0 };
    let p = vertical_params(&eig, 2.0 * eig.lambda1);
    match theorem_c_solve(&m, &eig, &p, &g).unwrap() {
        TheoremCOutcome::Solved { solution, s_prime, degenerate, .. } => {
            assert!(degenerate);
            assert_eq!(s_prime, 1.0);
            assert!((solution.gamma - 1.0).abs() <= 1e-8);
        }
        other => panic!("{other:?}"),
    }
    let steep = ProblemParams::new(2.0 * eig.lambda1, eig.lambda1, 2.0, 2.0);
    assert!(matches!(theorem_c_solve(&m, &eig, &steep, &g), Err(Error::Regime(_))));
}

#[test]
fn boundary_targets_report_no_solution() {
    let (m, eig) = setup(127);
    // g(0) = 1 is attained only at s' = 0, where u_c is trivial.
    let top = vertical_params(&eig, eig.lambda1);
    let dec = GFunction::Decaying { alpha: 1.0 };
    assert!(matches!(
        theorem_c_solve(&m, &eig, &top, &dec).unwrap(),
        TheoremCOutcome::NoSolution { near_boundary: true, .. }
    ));
    // Saturating(1, 1) has R[g] = [1, 2); 2 is its supremum, approached only as s grows.
    let sat = GFunction::Saturating { alpha: 1.0, beta: 1.0 };
    let sup = vertical_params(&eig, 2.0 * eig.lambda1);
    match theorem_c_solve(&m, &eig, &sup, &sat).unwrap() {
        TheoremCOutcome::NoSolution { range, near_boundary, .. } => {
            assert_eq!(range.to_string(), "[1, 2)");
            assert!(near_boundary);
        }
        other => panic!("{other:?}"),
    }
}
