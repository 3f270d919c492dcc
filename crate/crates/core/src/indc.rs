//! Loop form of integral deferred correction on IMEX Runge-Kutta substeps.
//!
//! A step of size H is split into M uniform substeps of size h = H/M. The
//! prediction sweep runs the base scheme on every substep; each of the K
//! correction sweeps solves the error equation with the same base scheme,
//! written directly for the updated solution. For a stage with abscissae
//! (c̃_i, c_i) on substep m,
//!
//! ```text
//! M_ε (U_i − u_m) = h S^{c̃_i}_m F^{k−1} + h S^{c_i}_m G^{k−1}
//!                 + h Σ_{j<i} ã_ij ΔF_j + h Σ_{j≤i} a_ij ΔG_j
//! ```
//!
//! where S rows integrate the degree M−1 interpolant of the previous
//! iterate and ΔF_j = F(U_j) − P^{c̃_j}_m F^{k−1}, ΔG_j = G(U_j) − P^{c_j}_m G^{k−1}.
//! An explicit first stage at c̃ = 0 takes its increment at the left node.
//! For bases that are not globally stiffly accurate the increments are
//! taken against the previous iterate's stage samples and the substep
//! result is formed from the weights b̃, b.

use thiserror::Error;

use crate::quadrature::{QuadratureError, QuadratureSet, StageRow};
use crate::stepper::{axpy, step_count, SplitProblem, StageSample, StepError, StepState, Stepper, Work};
use crate::tableau::{validate, ImexTableau, TableauError};

fn stage_label(stage: &Option<usize>) -> String {
    stage.map_or(String::new(), |i| format!(", stage {i}"))
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndcError {
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("invalid base tableau: {0}")]
    Tableau(#[from] TableauError),
    #[error("iteration {iteration}, substep {substep}{}: {source}", stage_label(stage))]
    Sweep {
        iteration: usize,
        substep: usize,
        stage: Option<usize>,
        #[source]
        source: StepError,
    },
    #[error(transparent)]
    Step(#[from] StepError),
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<IndcError>,
    },
}

/// Base tableau, node count M and correction count K, with cached rows.
#[derive(Debug, Clone)]
pub struct IndcScheme {
    pub base: ImexTableau,
    pub m: usize,
    pub k: usize,
    quad: QuadratureSet,
    /// `rows_ex[m][i]`: rows for the explicit abscissa c̃_i on substep m.
    rows_ex: Vec<Vec<StageRow>>,
    rows_im: Vec<Vec<StageRow>>,
}

fn part_rows(q: &QuadratureSet, part: &crate::tableau::RkTableau) -> Result<Vec<Vec<StageRow>>, QuadratureError> {
    (0..q.m())
        .map(|m| {
            (0..part.stages())
                .map(|i| match &part.exact {
                    Some(e) => Ok(q.stage_row_exact(&e.c[i], m)?.to_f64()),
                    None => q.stage_row(part.c[i], m),
                })
                .collect()
        })
        .collect()
}

impl IndcScheme {
    /// Builds a scheme. M = 1 is accepted; its correction integrates a
    /// constant interpolant.
    pub fn new(base: ImexTableau, m: usize, k: usize) -> Result<Self, IndcError> {
        let base = validate(base)?;
        let quad = QuadratureSet::build(m)?;
        let rows_ex = part_rows(&quad, &base.explicit)?;
        let rows_im = part_rows(&quad, &base.implicit)?;
        Ok(IndcScheme {
            base,
            m,
            k,
            quad,
            rows_ex,
            rows_im,
        })
    }

    pub fn quadrature(&self) -> &QuadratureSet {
        &self.quad
    }

    /// p·(K + 1) for base order p.
    pub fn uncapped_order(&self) -> u32 {
        self.base.order * (self.k as u32 + 1)
    }

    /// Expected order min(p·(K + 1), M).
    pub fn predicted_order(&self) -> u32 {
        self.uncapped_order().min(self.m as u32)
    }

    pub fn name(&self) -> String {
        format!("InDC-{}-{}-{}", self.base.name, self.m, self.k)
    }

    /// Prediction sweep: M plain substeps of the base scheme.
    pub fn predict(
        &self,
        stepper: &mut Stepper,
        p: &dyn SplitProblem,
        u0: &[f64],
        big_h: f64,
        work: &mut Work,
    ) -> Result<NodeSweep, IndcError> {
        let h = big_h / self.m as f64;
        let n = u0.len();
        let mut f0 = vec![0.0; n];
        let mut g0 = vec![0.0; n];
        p.explicit_rhs(u0, &mut f0);
        p.stiff_rhs(u0, &mut g0);
        work.rhs_evals += 2;
        let mut sweep = NodeSweep {
            iteration: 0,
            u: vec![u0.to_vec()],
            f: vec![f0],
            g: vec![g0],
            stages: Vec::with_capacity(self.m),
        };
        for m in 0..self.m {
            let out = stepper
                .step_with_stages(&self.base, p, &sweep.u[m], h, work)
                .map_err(|source| IndcError::Sweep {
                    iteration: 0,
                    substep: m,
                    stage: None,
                    source,
                })?;
            sweep.u.push(out.u);
            sweep.f.push(out.f_end);
            sweep.g.push(out.g_end);
            sweep.stages.push(out.stages);
        }
        Ok(sweep)
    }

    /// P^c_m applied to node samples; the left endpoint of the first
    /// substep is the τ_0 sample itself.
    fn interp(&self, samples: &[Vec<f64>], m: usize, row: &StageRow, at_left: bool) -> Vec<f64> {
        if m == 0 && at_left {
            return samples[0].clone();
        }
        let mut out = vec![0.0; samples[0].len()];
        for (l, w) in row.interpolation.iter().enumerate() {
            axpy(&mut out, *w, &samples[l + 1]);
        }
        out
    }

    /// One correction sweep from iterate k−1 to k.
    pub fn correct(
        &self,
        stepper: &mut Stepper,
        p: &dyn SplitProblem,
        prev: &NodeSweep,
        big_h: f64,
        work: &mut Work,
    ) -> Result<NodeSweep, IndcError> {
        let it = prev.iteration + 1;
        let h = big_h / self.m as f64;
        let n = prev.u[0].len();
        let s = self.base.stages();
        let mass = p.mass();
        let gsa = self.base.is_gsa();
        let ex = &self.base.explicit;
        let im = &self.base.implicit;
        if !gsa && mass.contains(&0.0) {
            return Err(IndcError::Sweep {
                iteration: it,
                substep: 0,
                stage: None,
                source: StepError::RequiresGsa,
            });
        }
        let mut next = NodeSweep {
            iteration: it,
            u: vec![prev.u[0].clone()],
            f: vec![prev.f[0].clone()],
            g: vec![prev.g[0].clone()],
            stages: Vec::with_capacity(self.m),
        };
        for m in 0..self.m {
            let um = next.u[m].clone();
            let mut dk: Vec<Vec<f64>> = Vec::with_capacity(s);
            let mut dl: Vec<Vec<f64>> = Vec::with_capacity(s);
            let mut samples: Vec<StageSample> = Vec::with_capacity(s);
            for i in 0..s {
                let rx = &self.rows_ex[m][i];
                let ri = &self.rows_im[m][i];
                let mut known = vec![0.0; n];
                for l in 0..self.m {
                    axpy(&mut known, h * rx.integration[l], &prev.f[l + 1]);
                    axpy(&mut known, h * ri.integration[l], &prev.g[l + 1]);
                }
                for j in 0..i {
                    axpy(&mut known, h * ex.a[i][j], &dk[j]);
                    axpy(&mut known, h * im.a[i][j], &dl[j]);
                }
                let (pref_f, pref_g) = if gsa {
                    (
                        self.interp(&prev.f, m, rx, ex.c[i] == 0.0),
                        self.interp(&prev.g, m, ri, im.c[i] == 0.0),
                    )
                } else {
                    let st = &prev.stages[m][i];
                    (st.f.clone(), st.g.clone())
                };
                let gamma = h * im.a[i][i];
                axpy(&mut known, -gamma, &pref_g);
                let guess = &prev.stages[m][i].u;
                let (ui, gi) = stepper
                    .solve_stage(p, &mass, &um, &known, gamma, guess, work)
                    .map_err(|source| IndcError::Sweep {
                        iteration: it,
                        substep: m,
                        stage: Some(i),
                        source,
                    })?;
                let left_node = gsa && ex.c[i] == 0.0 && ex.a[i].iter().all(|&v| v == 0.0);
                let fi = if left_node {
                    next.f[m].clone()
                } else {
                    let mut fi = vec![0.0; n];
                    p.explicit_rhs(&ui, &mut fi);
                    work.rhs_evals += 1;
                    fi
                };
                let mut dki = fi.clone();
                axpy(&mut dki, -1.0, &pref_f);
                let mut dli = gi.clone();
                axpy(&mut dli, -1.0, &pref_g);
                dk.push(dki);
                dl.push(dli);
                samples.push(StageSample { u: ui, f: fi, g: gi });
            }
            if gsa {
                let last = samples.last().expect("at least one stage");
                next.u.push(last.u.clone());
                next.f.push(last.f.clone());
                next.g.push(last.g.clone());
            } else {
                let mut incr = vec![0.0; n];
                for l in 0..self.m {
                    let w = h * self.quad.s_sub[m][l];
                    axpy(&mut incr, w, &prev.f[l + 1]);
                    axpy(&mut incr, w, &prev.g[l + 1]);
                }
                for j in 0..s {
                    axpy(&mut incr, h * ex.b[j], &dk[j]);
                    axpy(&mut incr, h * im.b[j], &dl[j]);
                }
                let u1: Vec<f64> = (0..n).map(|r| um[r] + incr[r] / mass[r]).collect();
                let mut f1 = vec![0.0; n];
                let mut g1 = vec![0.0; n];
                p.explicit_rhs(&u1, &mut f1);
                p.stiff_rhs(&u1, &mut g1);
                work.rhs_evals += 2;
                next.u.push(u1);
                next.f.push(f1);
                next.g.push(g1);
            }
            next.stages.push(samples);
        }
        Ok(next)
    }

    /// Prediction followed by K corrections. Returns every iterate.
    pub fn sweeps(
        &self,
        stepper: &mut Stepper,
        p: &dyn SplitProblem,
        u0: &[f64],
        big_h: f64,
        work: &mut Work,
    ) -> Result<Vec<NodeSweep>, IndcError> {
        let mut all = vec![self.predict(stepper, p, u0, big_h, work)?];
        for _ in 0..self.k {
            let next = self.correct(stepper, p, all.last().expect("nonempty"), big_h, work)?;
            all.push(next);
        }
        Ok(all)
    }

    /// One InDC step of size `big_h`.
    pub fn step(
        &self,
        stepper: &mut Stepper,
        p: &dyn SplitProblem,
        s: &StepState,
        big_h: f64,
    ) -> Result<StepState, IndcError> {
        if !(big_h > 0.0) {
            return Err(StepError::BadStepSize(big_h).into());
        }
        if s.u.len() != p.dim() {
            return Err(StepError::DimensionMismatch {
                expected: p.dim(),
                found: s.u.len(),
            }
            .into());
        }
        let mut work = s.work;
        let mut sweep = self.predict(stepper, p, &s.u, big_h, &mut work)?;
        for _ in 0..self.k {
            sweep = self.correct(stepper, p, &sweep, big_h, &mut work)?;
        }
        Ok(StepState {
            t: s.t + big_h,
            u: sweep.u.pop().expect("M ≥ 1"),
            work,
        })
    }

    /// Fixed-step integration over `[t0, t1]`, calling `observe` after every step.
    pub fn integrate_with(
        &self,
        p: &dyn SplitProblem,
        u0: &[f64],
        t0: f64,
        t1: f64,
        big_h: f64,
        mut observe: impl FnMut(&StepState),
    ) -> Result<StepState, IndcError> {
        let steps = step_count(t0, t1, big_h)?;
        let mut stepper = Stepper::default();
        let mut state = StepState::new(t0, u0.to_vec());
        for i in 0..steps {
            state = self.step(&mut stepper, p, &state, big_h).map_err(|e| IndcError::AtStep {
                step: i,
                source: Box::new(e),
            })?;
            state.t = t0 + (i + 1) as f64 * big_h;
            observe(&state);
        }
        Ok(state)
    }
}

/// Node values and right-hand-side samples of one iterate on τ_0..τ_M.
#[derive(Debug, Clone)]
pub struct NodeSweep {
    pub iteration: usize,
    pub u: Vec<Vec<f64>>,
    pub f: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    /// Stage samples per substep.
    pub stages: Vec<Vec<StageSample>>,
}

/// Prediction sweep with default Newton settings.
pub fn predict(scheme: &IndcScheme, p: &dyn SplitProblem, u0: &[f64], big_h: f64) -> Result<NodeSweep, IndcError> {
    scheme.predict(&mut Stepper::default(), p, u0, big_h, &mut Work::default())
}

/// One correction sweep with default Newton settings.
pub fn correct(scheme: &IndcScheme, p: &dyn SplitProblem, prev: &NodeSweep, big_h: f64) -> Result<NodeSweep, IndcError> {
    scheme.correct(&mut Stepper::default(), p, prev, big_h, &mut Work::default())
}

/// One InDC step with default Newton settings.
pub fn indc_step(scheme: &IndcScheme, p: &dyn SplitProblem, s: &StepState, big_h: f64) -> Result<StepState, IndcError> {
    scheme.step(&mut Stepper::default(), p, s, big_h)
}

/// Fixed-step InDC integration; returns the final state.
pub fn integrate(
    scheme: &IndcScheme,
    p: &dyn SplitProblem,
    u0: &[f64],
    t0: f64,
    t1: f64,
    big_h: f64,
) -> Result<StepState, IndcError> {
    scheme.integrate_with(p, u0, t0, t1, big_h, |_| {})
}
