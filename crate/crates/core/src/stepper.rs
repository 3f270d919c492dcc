//! One-step IMEX Runge-Kutta integration with damped Newton stage solves.
//!
//! Problems are written in mass form `M u' = F(u) + G(u)`, where `M` is the
//! identity for additive problems and `diag(1, …, 1, ε, …, ε)` for the
//! partitioned form y' = f(y, z), εz' = g(y, z). A diagonally implicit stage
//! then reads
//!
//! ```text
//! M (U_i − u_n) = h Σ_{j<i} (ã_ij F_j + a_ij G_j) + h a_ii G(U_i)
//! ```
//!
//! which degenerates smoothly to an algebraic equation for z when ε = 0.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::tableau::ImexTableau;

/// Stiffness structure of a [`SplitProblem`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stiffness {
    /// u' = F(u) + G(u), with any 1/ε factor already inside G.
    Additive,
    /// The first `ny` unknowns are y, the rest are z with εz' = g(y, z).
    Partitioned { ny: usize, eps: f64 },
}

/// A system split into a non-stiff part F and a stiff part G.
///
/// For partitioned problems `explicit_rhs` returns (f, 0) and `stiff_rhs`
/// returns (0, g). Implementations must be pure; they are called from
/// several threads at once during studies.
pub trait SplitProblem: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn stiffness(&self) -> Stiffness {
        Stiffness::Additive
    }
    fn initial_state(&self) -> Vec<f64>;
    fn explicit_rhs(&self, u: &[f64], out: &mut [f64]);
    fn stiff_rhs(&self, u: &[f64], out: &mut [f64]);

    /// Jacobian of `stiff_rhs`. Defaults to central differences.
    fn stiff_jacobian(&self, u: &[f64], jac: &mut DMatrix<f64>) {
        fd_jacobian(|v, out| self.stiff_rhs(v, out), u, jac);
    }

    /// True when the stiff Jacobian does not depend on the state.
    fn constant_stiff_jacobian(&self) -> bool {
        false
    }

    /// Optional structured solve of `(M − γ J_G(u)) x = rhs`, in place.
    /// Returning `None` selects the dense fallback; `Some(false)` reports a
    /// singular system.
    fn solve_stage_system(&self, _u: &[f64], _gamma: f64, _rhs: &mut [f64]) -> Option<bool> {
        None
    }

    /// Exact or reference solution at time `t`, when one is available.
    fn reference_solution(&self, _t: f64) -> Option<Vec<f64>> {
        None
    }

    /// Diagonal of the mass matrix.
    fn mass(&self) -> Vec<f64> {
        let n = self.dim();
        match self.stiffness() {
            Stiffness::Additive => vec![1.0; n],
            Stiffness::Partitioned { ny, eps } => (0..n).map(|i| if i < ny { 1.0 } else { eps }).collect(),
        }
    }
}

/// Central-difference Jacobian with increment √eps·(1 + |u_i|).
pub fn fd_jacobian(mut f: impl FnMut(&[f64], &mut [f64]), u: &[f64], jac: &mut DMatrix<f64>) {
    let n = u.len();
    let mut v = u.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    let sq = f64::EPSILON.sqrt();
    for j in 0..n {
        let d = sq * (1.0 + u[j].abs());
        v[j] = u[j] + d;
        f(&v, &mut fp);
        v[j] = u[j] - d;
        f(&v, &mut fm);
        v[j] = u[j];
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * d);
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("stage Jacobian is singular")]
    SingularStageJacobian,
    #[error("the ε = 0 step requires a globally stiffly accurate tableau")]
    RequiresGsa,
    #[error("the ε = 0 step requires a partitioned problem with ε = 0")]
    NotDae,
    #[error("interval {span} is not an integer multiple of the step {h}")]
    NonIntegralSteps { span: f64, h: f64 },
    #[error("step size must be positive, got {0}")]
    BadStepSize(f64),
    #[error("state has {found} entries, problem has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<StepError>,
    },
}

/// Solver settings for stage equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-14,
            max_iter: 50,
            max_halvings: 8,
        }
    }
}

/// Work counters accumulated along an integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Work {
    pub newton_iters: u64,
    pub rhs_evals: u64,
}

impl std::ops::AddAssign for Work {
    fn add_assign(&mut self, o: Work) {
        self.newton_iters += o.newton_iters;
        self.rhs_evals += o.rhs_evals;
    }
}

/// Time, solution and accumulated work.
#[derive(Debug, Clone, PartialEq)]
pub struct StepState {
    pub t: f64,
    pub u: Vec<f64>,
    pub work: Work,
}

impl StepState {
    pub fn new(t: f64, u: Vec<f64>) -> Self {
        StepState {
            t,
            u,
            work: Work::default(),
        }
    }
}

/// Outcome of [`newton_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonResult {
    pub v: Vec<f64>,
    pub iterations: usize,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

struct CoreStats {
    iterations: usize,
    /// The residual callback was last invoked at the returned iterate.
    residual_at_solution: bool,
}

/// Damped Newton iteration. `residual` fills `r` and returns the magnitude of
/// the terms it balanced; `solve` overwrites `r` with `J(v)⁻¹ r`.
fn newton_core(
    mut residual: impl FnMut(&[f64], &mut [f64]) -> f64,
    mut solve: impl FnMut(&[f64], &mut [f64]) -> Result<(), StepError>,
    v: &mut [f64],
    opts: &NewtonOptions,
) -> Result<CoreStats, StepError> {
    let n = v.len();
    let mut r = vec![0.0; n];
    let mut rt = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut delta = vec![0.0; n];
    let mut dbar = vec![0.0; n];
    let mut scale = residual(v, &mut r);
    let mut norm = inf_norm(&r);
    let mut iterations = 0;
    let mut at_solution = true;
    loop {
        if !norm.is_finite() {
            return Err(StepError::NewtonDiverged {
                iterations,
                residual: norm,
            });
        }
        if norm <= opts.tol * (1.0 + inf_norm(v).max(scale)) {
            return Ok(CoreStats {
                iterations,
                residual_at_solution: at_solution,
            });
        }
        if iterations >= opts.max_iter {
            return Err(StepError::NewtonDiverged {
                iterations,
                residual: norm,
            });
        }
        delta.copy_from_slice(&r);
        solve(v, &mut delta)?;
        iterations += 1;
        let step = inf_norm(&delta);
        let small_step = step <= opts.tol * (1.0 + inf_norm(v));
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            for i in 0..n {
                trial[i] = v[i] - lambda * delta[i];
            }
            let st = residual(&trial, &mut rt);
            let nt = inf_norm(&rt);
            // Residual decrease, or natural monotonicity of the simplified
            // Newton correction when rows are badly scaled.
            let natural = nt.is_finite() && nt >= norm && {
                dbar.copy_from_slice(&rt);
                solve(v, &mut dbar)?;
                inf_norm(&dbar) <= (1.0 - 0.25 * lambda) * step
            };
            if nt < norm || natural {
                v.copy_from_slice(&trial);
                std::mem::swap(&mut r, &mut rt);
                norm = nt;
                scale = st;
                accepted = true;
                at_solution = true;
                break;
            }
            lambda *= 0.5;
        }
        if small_step {
            // Round-off limited: the update no longer changes the iterate.
            if !accepted {
                for i in 0..n {
                    v[i] -= delta[i];
                }
                at_solution = false;
            }
            return Ok(CoreStats {
                iterations,
                residual_at_solution: at_solution,
            });
        }
        if !accepted {
            return Err(StepError::NewtonDiverged {
                iterations,
                residual: norm,
            });
        }
    }
}

fn lu_solve(lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, rhs: &mut [f64]) -> Result<(), StepError> {
    let b = DVector::from_column_slice(rhs);
    let x = lu.solve(&b).ok_or(StepError::SingularStageJacobian)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(StepError::SingularStageJacobian);
    }
    rhs.copy_from_slice(x.as_slice());
    Ok(())
}

fn checked_lu(m: DMatrix<f64>) -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, StepError> {
    let lu = m.lu();
    let u = lu.u();
    let d = u.diagonal();
    let max = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = d.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if max == 0.0 || min <= max * 1e-15 {
        return Err(StepError::SingularStageJacobian);
    }
    Ok(lu)
}

/// Newton's method for `residual(v) = 0` with a dense Jacobian closure.
///
/// Converges when ‖r‖∞ ≤ tol·(1 + ‖v‖∞), or when the Newton update itself
/// falls below that bound. A damped step is accepted when it reduces the
/// residual or the simplified Newton correction; otherwise it is halved up
/// to `max_halvings` times.
pub fn newton_solve(
    mut residual: impl FnMut(&[f64], &mut [f64]),
    mut jacobian: impl FnMut(&[f64]) -> DMatrix<f64>,
    guess: &[f64],
    opts: &NewtonOptions,
) -> Result<NewtonResult, StepError> {
    let mut v = guess.to_vec();
    let stats = newton_core(
        |x, r| {
            residual(x, r);
            0.0
        },
        |x, r| {
            let lu = checked_lu(jacobian(x))?;
            lu_solve(&lu, r)
        },
        &mut v,
        opts,
    )?;
    Ok(NewtonResult {
        v,
        iterations: stats.iterations,
    })
}

/// Values recorded for one stage of a step.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSample {
    pub u: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

/// Result of a step with its stage history.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub u: Vec<f64>,
    pub stages: Vec<StageSample>,
    /// F and G at the returned state.
    pub f_end: Vec<f64>,
    pub g_end: Vec<f64>,
}

struct LuCache {
    gamma: f64,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

/// Stage solver with reusable scratch space. One instance per integration.
pub struct Stepper {
    pub opts: NewtonOptions,
    cache: Option<LuCache>,
}

impl Default for Stepper {
    fn default() -> Self {
        Self::new(NewtonOptions::default())
    }
}

pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    if a != 0.0 {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += a * xi;
        }
    }
}

impl Stepper {
    pub fn new(opts: NewtonOptions) -> Self {
        Stepper { opts, cache: None }
    }

    fn solve_linear(
        &mut self,
        p: &dyn SplitProblem,
        mass: &[f64],
        u: &[f64],
        gamma: f64,
        rhs: &mut [f64],
    ) -> Result<(), StepError> {
        if let Some(ok) = p.solve_stage_system(u, gamma, rhs) {
            return if ok && rhs.iter().all(|v| v.is_finite()) {
                Ok(())
            } else {
                Err(StepError::SingularStageJacobian)
            };
        }
        let constant = p.constant_stiff_jacobian();
        if constant {
            if let Some(c) = &self.cache {
                if c.gamma == gamma {
                    return lu_solve(&c.lu, rhs);
                }
            }
        }
        let n = u.len();
        let mut jac = DMatrix::zeros(n, n);
        p.stiff_jacobian(u, &mut jac);
        jac *= -gamma;
        for i in 0..n {
            jac[(i, i)] += mass[i];
        }
        let lu = checked_lu(jac)?;
        lu_solve(&lu, rhs)?;
        if constant {
            self.cache = Some(LuCache { gamma, lu });
        }
        Ok(())
    }

    /// Solves `M (U − base) = known + γ G(U)` for U, starting from `guess`.
    /// Returns U and G(U). Rows with zero mass and γ = 0 keep `base`.
    #[allow(clippy::too_many_arguments)]
    pub fn solve_stage(
        &mut self,
        p: &dyn SplitProblem,
        mass: &[f64],
        base: &[f64],
        known: &[f64],
        gamma: f64,
        guess: &[f64],
        work: &mut Work,
    ) -> Result<(Vec<f64>, Vec<f64>), StepError> {
        let n = base.len();
        let mut g = vec![0.0; n];
        if gamma == 0.0 {
            let u: Vec<f64> = (0..n)
                .map(|i| if mass[i] != 0.0 { base[i] + known[i] / mass[i] } else { base[i] })
                .collect();
            p.stiff_rhs(&u, &mut g);
            work.rhs_evals += 1;
            return Ok((u, g));
        }
        let mut v = guess.to_vec();
        let mut evals = 0u64;
        let opts = self.opts;
        let residual = |x: &[f64], r: &mut [f64]| {
            p.stiff_rhs(x, &mut g);
            evals += 1;
            let mut scale = 0.0f64;
            for i in 0..n {
                let (a, b, c) = (mass[i] * (x[i] - base[i]), known[i], gamma * g[i]);
                r[i] = a - b - c;
                scale = scale.max(a.abs()).max(b.abs()).max(c.abs());
            }
            scale
        };
        let stats = {
            let this = &mut *self;
            newton_core(residual, |x, r| this.solve_linear(p, mass, x, gamma, r), &mut v, &opts)
        };
        work.rhs_evals += evals;
        let stats = stats?;
        work.newton_iters += stats.iterations as u64;
        if !stats.residual_at_solution || stats.iterations == 0 {
            // g may hold a trial point; recompute at the solution.
            p.stiff_rhs(&v, &mut g);
            work.rhs_evals += 1;
        }
        Ok((v, g))
    }

    /// One step of `t` from `u` with all stage samples. Dispatches to the
    /// ε = 0 path when the problem has zero mass entries.
    pub fn step_with_stages(
        &mut self,
        t: &ImexTableau,
        p: &dyn SplitProblem,
        u: &[f64],
        h: f64,
        work: &mut Work,
    ) -> Result<StepOutput, StepError> {
        if !(h > 0.0) {
            return Err(StepError::BadStepSize(h));
        }
        if u.len() != p.dim() {
            return Err(StepError::DimensionMismatch {
                expected: p.dim(),
                found: u.len(),
            });
        }
        let mass = p.mass();
        let dae = mass.contains(&0.0);
        let gsa = t.is_gsa();
        if dae && !gsa {
            return Err(StepError::RequiresGsa);
        }
        let s = t.stages();
        let n = u.len();
        let ex = &t.explicit;
        let im = &t.implicit;
        let mut stages: Vec<StageSample> = Vec::with_capacity(s);
        for i in 0..s {
            let mut known = vec![0.0; n];
            for (j, st) in stages.iter().enumerate() {
                axpy(&mut known, h * ex.a[i][j], &st.f);
                axpy(&mut known, h * im.a[i][j], &st.g);
            }
            let mut gamma = h * im.a[i][i];
            if dae {
                for k in 0..n {
                    if mass[k] == 0.0 {
                        known[k] = 0.0;
                    }
                }
                // Every stage with an implicit contribution satisfies the
                // constraint; an explicit first stage keeps z_n.
                if im.a[i].iter().any(|&v| v != 0.0) {
                    gamma = 1.0;
                } else {
                    gamma = 0.0;
                }
            }
            let guess = stages.last().map_or(u, |st| st.u.as_slice()).to_vec();
            let (ui, gi) = self.solve_stage(p, &mass, u, &known, gamma, &guess, work)?;
            let mut fi = vec![0.0; n];
            p.explicit_rhs(&ui, &mut fi);
            work.rhs_evals += 1;
            stages.push(StageSample { u: ui, f: fi, g: gi });
        }
        if gsa {
            let last = stages.last().expect("at least one stage");
            return Ok(StepOutput {
                u: last.u.clone(),
                f_end: last.f.clone(),
                g_end: last.g.clone(),
                stages,
            });
        }
        let mut incr = vec![0.0; n];
        for (j, st) in stages.iter().enumerate() {
            axpy(&mut incr, h * ex.b[j], &st.f);
            axpy(&mut incr, h * im.b[j], &st.g);
        }
        let next: Vec<f64> = (0..n).map(|k| u[k] + incr[k] / mass[k]).collect();
        let mut f_end = vec![0.0; n];
        let mut g_end = vec![0.0; n];
        p.explicit_rhs(&next, &mut f_end);
        p.stiff_rhs(&next, &mut g_end);
        work.rhs_evals += 2;
        Ok(StepOutput {
            u: next,
            stages,
            f_end,
            g_end,
        })
    }

    /// Advances `s` by one step of size `h`.
    pub fn step(&mut self, t: &ImexTableau, p: &dyn SplitProblem, s: &StepState, h: f64) -> Result<StepState, StepError> {
        let mut work = s.work;
        let out = self.step_with_stages(t, p, &s.u, h, &mut work)?;
        Ok(StepState {
            t: s.t + h,
            u: out.u,
            work,
        })
    }
}

/// One IMEX Runge-Kutta step with default Newton settings.
pub fn imex_step(t: &ImexTableau, p: &dyn SplitProblem, s: &StepState, h: f64) -> Result<StepState, StepError> {
    Stepper::default().step(t, p, s, h)
}

/// One step of the ε = 0 limit scheme: explicit stages for y, with each Z_i
/// from g(Y_i, Z_i) = 0, and z_{n+1} = Z_s.
pub fn dae_step(t: &ImexTableau, p: &dyn SplitProblem, s: &StepState, h: f64) -> Result<StepState, StepError> {
    match p.stiffness() {
        Stiffness::Partitioned { eps: 0.0, .. } => {}
        _ => return Err(StepError::NotDae),
    }
    if !t.is_gsa() {
        return Err(StepError::RequiresGsa);
    }
    imex_step(t, p, s, h)
}

/// Number of steps of size `h` covering `[t0, t1]`.
pub fn step_count(t0: f64, t1: f64, h: f64) -> Result<usize, StepError> {
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(0);
    }
    if !(h > 0.0) || span < 0.0 {
        return Err(StepError::BadStepSize(h));
    }
    let r = span / h;
    let n = r.round();
    if (r - n).abs() > 1e-9 * n.max(1.0) {
        return Err(StepError::NonIntegralSteps { span, h });
    }
    Ok(n as usize)
}

/// Integrates from `t0` to `t1` with fixed steps of size `h`.
pub fn integrate(
    t: &ImexTableau,
    p: &dyn SplitProblem,
    u0: &[f64],
    t0: f64,
    t1: f64,
    h: f64,
) -> Result<StepState, StepError> {
    let n = step_count(t0, t1, h)?;
    let mut stepper = Stepper::default();
    let mut state = StepState::new(t0, u0.to_vec());
    for k in 0..n {
        state = stepper.step(t, p, &state, h).map_err(|e| StepError::AtStep {
            step: k,
            source: Box::new(e),
        })?;
        state.t = t0 + (k + 1) as f64 * h;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tableau::lookup;

    /// u' = λ₁u + λ₂u with the first term explicit.
    struct Dahlquist {
        l1: f64,
        l2: f64,
    }

    impl SplitProblem for Dahlquist {
        fn name(&self) -> &str {
            "dahlquist"
        }
        fn dim(&self) -> usize {
            1
        }
        fn initial_state(&self) -> Vec<f64> {
            vec![1.0]
        }
        fn explicit_rhs(&self, u: &[f64], out: &mut [f64]) {
            out[0] = self.l1 * u[0];
        }
        fn stiff_rhs(&self, u: &[f64], out: &mut [f64]) {
            out[0] = self.l2 * u[0];
        }
    }

    #[test]
    fn imex_euler_on_dahlquist() {
        let p = Dahlquist { l1: -0.7, l2: -30.0 };
        let t = lookup("imex1-ars").unwrap();
        let h = 0.1;
        let s = imex_step(&t, &p, &StepState::new(0.0, vec![1.3]), h).unwrap();
        let expect = (1.3 + h * -0.7 * 1.3) / (1.0 - h * -30.0);
        assert!((s.u[0] - expect).abs() < 1e-15);
        assert_eq!(s.t, h);
    }

    #[test]
    fn zero_rhs_leaves_state() {
        let p = Dahlquist { l1: 0.0, l2: 0.0 };
        let t = lookup("IMEX3-ARS").unwrap();
        let s = imex_step(&t, &p, &StepState::new(0.5, vec![2.0]), 0.25).unwrap();
        assert_eq!(s.u, vec![2.0]);
        assert_eq!(s.t, 0.75);
    }

    #[test]
    fn newton_textbook_cases() {
        let opts = NewtonOptions::default();
        let r = newton_solve(
            |v, r| r[0] = v[0] - 3.5,
            |_| DMatrix::from_element(1, 1, 1.0),
            &[0.0],
            &opts,
        )
        .unwrap();
        assert_eq!(r.v, vec![3.5]);
        assert_eq!(r.iterations, 1);
        let r = newton_solve(
            |v, r| r[0] = v[0] * v[0] - 4.0,
            |v| DMatrix::from_element(1, 1, 2.0 * v[0]),
            &[3.0],
            &opts,
        )
        .unwrap();
        assert!((r.v[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn newton_reports_divergence() {
        let opts = NewtonOptions {
            max_iter: 5,
            ..Default::default()
        };
        let err = newton_solve(
            |v, r| r[0] = v[0] * v[0] + 1.0,
            |v| DMatrix::from_element(1, 1, 2.0 * v[0]),
            &[0.7],
            &opts,
        )
        .unwrap_err();
        assert!(matches!(err, StepError::NewtonDiverged { .. }));
    }

    #[test]
    fn singular_jacobian_is_reported() {
        let opts = NewtonOptions::default();
        let err = newton_solve(
            |v, r| r[0] = v[0] * v[0],
            |_| DMatrix::from_element(1, 1, 0.0),
            &[1.0],
            &opts,
        )
        .unwrap_err();
        assert_eq!(err, StepError::SingularStageJacobian);
    }

    #[test]
    fn implicit_euler_integrate_closed_form() {
        let p = Dahlquist { l1: 0.0, l2: -1.0 };
        let t = lookup("IMEX1-NGSA-A").unwrap();
        let s = integrate(&t, &p, &[1.0], 0.0, 1.0, 0.1).unwrap();
        assert!((s.u[0] - (1.0f64 / 1.1).powi(10)).abs() < 1e-14);
        let s = integrate(&t, &p, &[1.0], 0.0, 0.0, 0.1).unwrap();
        assert_eq!(s.u, vec![1.0]);
        assert!(matches!(
            integrate(&t, &p, &[1.0], 0.0, 1.0, 0.3),
            Err(StepError::NonIntegralSteps { .. })
        ));
    }

    #[test]
    fn fd_jacobian_matches_analytic() {
        let mut jac = DMatrix::zeros(2, 2);
        fd_jacobian(
            |u, out| {
                out[0] = u[0] * u[1];
                out[1] = u[0].sin();
            },
            &[0.3, 2.0],
            &mut jac,
        );
        assert!((jac[(0, 0)] - 2.0).abs() < 1e-8);
        assert!((jac[(0, 1)] - 0.3).abs() < 1e-8);
        assert!((jac[(1, 0)] - 0.3f64.cos()).abs() < 1e-8);
        assert!(jac[(1, 1)].abs() < 1e-8);
    }
}
