use indc_imex::assembly::{analyze, assemble};
use indc_imex::harness::{fit_slope, observed_order};
use indc_imex::problems::{weno5_flux_derivative, Grid1D};
use indc_imex::quadrature::QuadratureSet;
use indc_imex::tableau::{builtin_catalog, format_tableau, lookup, parse_tableau, validate, TextFormat};
use proptest::prelude::*;

const GSA_BASES: [&str; 5] = ["IMEX1-GSA-ARS", "IMEX1-GSA-A", "IMEX2-ARS", "IMEX2-CK", "IMEX3-ARS"];

proptest! {
    #[test]
    fn cumulative_quadrature_is_exact_for_low_degree(
        m in 1usize..=10,
        coef in prop::collection::vec(-5.0f64..5.0, 10),
    ) {
        let qs = QuadratureSet::build(m).unwrap();
        let c = &coef[..m];
        let p = |x: f64| c.iter().rev().fold(0.0, |acc, v| acc * x + v);
        let prim = |x: f64| c.iter().enumerate().rev().fold(0.0, |acc, (k, v)| acc * x + v / (k + 1) as f64) * x;
        for (i, row) in qs.s_cum.iter().enumerate() {
            let quad: f64 = row.iter().zip(&qs.nodes).map(|(w, &t)| w * p(t)).sum();
            let exact = prim((i + 1) as f64 / m as f64);
            prop_assert!((quad - exact).abs() <= 1e-9 * (1.0 + exact.abs()));
        }
    }

    #[test]
    fn substep_rows_sum_to_one(m in 1usize..=16) {
        let qs = QuadratureSet::build(m).unwrap();
        for row in &qs.s_sub {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn observed_order_is_antisymmetric_and_scale_free(a in 1e-12f64..1.0, b in 1e-12f64..1.0, s in 1e-3f64..1e3) {
        let ab = observed_order(a, b).unwrap();
        prop_assert!((ab + observed_order(b, a).unwrap()).abs() < 1e-12);
        prop_assert!((ab - observed_order(s * a, s * b).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn fit_recovers_power_laws(c in 1e-3f64..1e3, p in 0.5f64..6.0, n in 2usize..8) {
        let pts: Vec<(f64, f64)> = (0..n).map(|j| {
            let h = 0.5f64.powi(j as i32);
            (h, c * h.powf(p))
        }).collect();
        let f = fit_slope(&pts).unwrap();
        prop_assert!((f.slope - p).abs() < 1e-9);
        prop_assert_eq!(f.points, n);
    }

    #[test]
    fn assembled_tableaus_are_valid_and_inherit_gsa(base in 0usize..5, m in 1usize..=4, k in 0usize..=2) {
        let t = lookup(GSA_BASES[base]).unwrap();
        let a = assemble(&t, m, k).unwrap();
        let v = validate(a.tableau.clone());
        prop_assert!(v.is_ok(), "{:?}", v.err());
        let report = analyze(&a);
        prop_assert!(report.gsa);
        prop_assert!(report.det_identity_holds);
        let imp = &a.tableau.implicit;
        prop_assert!((imp.c[imp.c.len() - 1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weno_is_conservative_and_translation_equivariant(
        u in prop::collection::vec(-2.0f64..2.0, 16..64),
        shift in 1usize..8,
    ) {
        let n = u.len();
        let grid = Grid1D::new(n, 0.0, 1.0).unwrap();
        let flux: Vec<f64> = u.iter().map(|v| 0.5 * v * v).collect();
        let alpha = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut out = vec![0.0; n];
        weno5_flux_derivative(&grid, &u, &flux, alpha, &mut out).unwrap();
        let total: f64 = out.iter().sum::<f64>() * grid.dx();
        prop_assert!(total.abs() <= 1e-12 * n as f64);
        let roll = |v: &[f64]| -> Vec<f64> { (0..n).map(|i| v[(i + n - shift) % n]).collect() };
        let mut moved = vec![0.0; n];
        weno5_flux_derivative(&grid, &roll(&u), &roll(&flux), alpha, &mut moved).unwrap();
        prop_assert_eq!(moved, roll(&out));
    }
}

#[test]
fn catalog_text_round_trips() {
    for t in builtin_catalog() {
        for fmt in [TextFormat::Rational, TextFormat::Decimal] {
            let back = parse_tableau(&format_tableau(&t, fmt)).unwrap();
            assert_eq!(back.name, t.name);
            assert_eq!(back.order, t.order);
            for (x, y) in [(&back.explicit, &t.explicit), (&back.implicit, &t.implicit)] {
                for (rx, ry) in x.a.iter().zip(&y.a) {
                    for (a, b) in rx.iter().zip(ry) {
                        assert!((a - b).abs() <= 1e-15, "{}: {a} vs {b}", t.name);
                    }
                }
            }
        }
    }
}
