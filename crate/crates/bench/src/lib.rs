//! Benchmark fixtures.
use indc_imex::indc::IndcScheme;
use indc_imex::problems::{nonlinear_relaxation, van_der_pol, Grid1D, RelaxationSystem, VanDerPol};
use indc_imex::stepper::{SplitProblem, StepState};
use indc_imex::tableau::lookup;

/// Stiff Van der Pol at its initial state.
pub fn vdp_fixture(eps: f64) -> (VanDerPol, StepState) {
    let p = van_der_pol(eps).expect("valid ε");
    let s = StepState::new(0.0, p.initial_state());
    (p, s)
}

/// Nonlinear relaxation on `cells` cells at its initial state.
pub fn relaxation_fixture(cells: usize, eps: f64) -> (RelaxationSystem, StepState) {
    let grid = Grid1D::new(cells, 0.0, 1.0).expect("valid grid");
    let p = nonlinear_relaxation(grid, eps).expect("valid ε");
    let s = StepState::new(0.0, p.initial_state());
    (p, s)
}

/// InDC scheme on a catalog base.
pub fn scheme(base: &str, m: usize, k: usize) -> IndcScheme {
    IndcScheme::new(lookup(base).expect("catalog scheme"), m, k).expect("valid M, K")
}
