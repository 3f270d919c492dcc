//! IMEX Runge-Kutta schemes, integral deferred correction (InDC) built on
//! them, the assembled-tableau view of an InDC step, benchmark problems and a
//! convergence-study harness.
// NaN-rejecting checks are written as negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod exact;
pub mod harness;
pub mod indc;
pub mod problems;
pub mod quadrature;
pub mod stepper;
pub mod tableau;

pub use assembly::{analyze, assemble, emit, AssembledTableau, AssemblyError, AssemblyReport};
pub use exact::Rational;
pub use harness::{observed_order, run_study, uniform_order_analysis, ConvergenceReport, HarnessError, StudySpec};
pub use indc::{IndcError, IndcScheme, NodeSweep};
pub use problems::{Benchmark, Grid1D, ProblemError};
pub use quadrature::{QuadratureError, QuadratureSet, StageRow};
pub use stepper::{
    dae_step, imex_step, integrate, newton_solve, NewtonOptions, SplitProblem, StepError, StepState, Stepper,
    Stiffness, Work,
};
pub use tableau::{ImexTableau, ImexType, RkTableau, TableauError};
