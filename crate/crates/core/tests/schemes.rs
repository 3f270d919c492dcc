use indc_imex::harness::{ladder, run_study, ProblemSpec, Reference, SchemeSpec, StudySpec};
use indc_imex::indc::{integrate as indc_integrate, IndcScheme};
use indc_imex::problems::van_der_pol;
use indc_imex::stepper::{integrate as rk_integrate, SplitProblem};
use indc_imex::tableau::lookup;

fn vdp_study(scheme: SchemeSpec, eps: Vec<f64>) -> StudySpec {
    StudySpec {
        name: "schemes".into(),
        problem: ProblemSpec::Vdp,
        scheme,
        dts: ladder(0.5, 2, 4),
        eps,
        t_final: 0.5,
        norm: None,
        reference: Reference::Exact,
        component: None,
    }
}

/// With no corrections an InDC step is M substeps of its base scheme.
#[test]
fn prediction_only_equals_substepping() {
    for base in ["IMEX1-GSA-ARS", "IMEX2-ARS", "IMEX3-ARS"] {
        let t = lookup(base).unwrap();
        for m in 1..=4 {
            let scheme = IndcScheme::new(t.clone(), m, 0).unwrap();
            let p = van_der_pol(1e-3).unwrap();
            let u0 = p.initial_state();
            let a = indc_integrate(&scheme, &p, &u0, 0.0, 0.4, 0.1).unwrap();
            let b = rk_integrate(&t, &p, &u0, 0.0, 0.4, 0.1 / m as f64).unwrap();
            for (x, y) in a.u.iter().zip(&b.u) {
                assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0), "{base} M={m}: {x} vs {y}");
            }
        }
    }
}

/// The harness gives the same errors whether it steps the correction loop
/// or the assembled tableau, up to round-off in the solution.
#[test]
fn harness_loop_and_assembled_agree() {
    let eps = vec![1.0, 1e-6, 0.0];
    let mut spec = vdp_study(SchemeSpec::new("IMEX2-ARS", 3, 1), eps);
    let looped = run_study(&spec).unwrap();
    spec.scheme.assembled = true;
    let assembled = run_study(&spec).unwrap();
    assert!(!looped.failed() && !assembled.failed());
    for (a, b) in looped.cells.iter().zip(&assembled.cells) {
        let (x, y) = (a.error.unwrap(), b.error.unwrap());
        assert!((x - y).abs() <= 1e-10, "eps {} dt {}: {x} vs {y}", a.eps, a.dt);
    }
}

/// Orders grow with corrections up to the node count at ε = 0.
#[test]
fn reduced_problem_orders_grow_with_corrections() {
    for (k, floor) in [(0usize, 0.8), (1, 1.8), (2, 2.5)] {
        let r = run_study(&vdp_study(SchemeSpec::new("IMEX1-GSA-ARS", 3, k), vec![0.0])).unwrap();
        let last = r.cells.last().unwrap().order.unwrap();
        assert!(last >= floor, "K={k}: order {last}");
    }
}

/// Errors shrink with the step at every ε for a second-order base.
#[test]
fn errors_decrease_across_stiffness() {
    let r = run_study(&vdp_study(SchemeSpec::new("IMEX2-CK", 2, 1), vec![1.0, 1e-2, 1e-4, 1e-6])).unwrap();
    for e in r.eps_values() {
        let row = r.row(e);
        assert!(row.windows(2).all(|w| w[1].error.unwrap() < w[0].error.unwrap()), "eps {e}");
    }
}
