//! Benchmark problems: the Van der Pol oscillator in singular-perturbation
//! form, viscous Burgers, and two hyperbolic relaxation systems, plus the
//! periodic finite-difference operators used to semi-discretize them.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::ops::Range;
use std::sync::{Mutex, OnceLock};

use nalgebra::{Complex, DMatrix};
use thiserror::Error;

use crate::stepper::{SplitProblem, Stiffness};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("grid has {0} cells; WENO5 needs at least 8")]
    StencilTooSmall(usize),
    #[error("|b| = {0} violates the subcharacteristic condition |b| ≤ 1")]
    SubcharacteristicViolated(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Uniform periodic grid with points x_i = a + iΔx, i = 0..N−1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub n: usize,
    pub a: f64,
    pub b: f64,
}

impl Grid1D {
    pub fn new(n: usize, a: f64, b: f64) -> Result<Self, ProblemError> {
        if n < 8 {
            return Err(ProblemError::StencilTooSmall(n));
        }
        if !(b > a) {
            return Err(ProblemError::InvalidParameter(format!("empty domain [{a}, {b}]")));
        }
        Ok(Grid1D { n, a, b })
    }

    pub fn dx(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.a + i as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }
}

/// Regularization in the WENO smoothness weights.
pub const WENO_EPS: f64 = 1e-6;

/// Fifth-order WENO value at the right edge of the middle cell of a five-cell stencil.
fn weno5(a: f64, b: f64, c: f64, d: f64, e: f64) -> f64 {
    let q0 = (2.0 * a - 7.0 * b + 11.0 * c) / 6.0;
    let q1 = (-b + 5.0 * c + 2.0 * d) / 6.0;
    let q2 = (2.0 * c + 5.0 * d - e) / 6.0;
    let s = 13.0 / 12.0;
    let b0 = s * (a - 2.0 * b + c).powi(2) + 0.25 * (a - 4.0 * b + 3.0 * c).powi(2);
    let b1 = s * (b - 2.0 * c + d).powi(2) + 0.25 * (b - d).powi(2);
    let b2 = s * (c - 2.0 * d + e).powi(2) + 0.25 * (3.0 * c - 4.0 * d + e).powi(2);
    let w0 = 0.1 / (WENO_EPS + b0).powi(2);
    let w1 = 0.6 / (WENO_EPS + b1).powi(2);
    let w2 = 0.3 / (WENO_EPS + b2).powi(2);
    (w0 * q0 + w1 * q1 + w2 * q2) / (w0 + w1 + w2)
}

/// Left-biased WENO5 reconstruction: entry i is the value at x_{i+1/2}.
pub fn weno5_reconstruct(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let at = |k: isize| f[k.rem_euclid(n as isize) as usize];
    (0..n as isize)
        .map(|i| weno5(at(i - 2), at(i - 1), at(i), at(i + 1), at(i + 2)))
        .collect()
}

/// Conservative approximation of −∂x flux with global Lax-Friedrichs
/// splitting f± = (flux ± αu)/2 and WENO5 reconstruction of each part.
pub fn weno5_flux_derivative(
    grid: &Grid1D,
    u: &[f64],
    flux: &[f64],
    alpha: f64,
    out: &mut [f64],
) -> Result<(), ProblemError> {
    let n = grid.n;
    if n < 8 || u.len() != n || flux.len() != n || out.len() != n {
        return Err(ProblemError::StencilTooSmall(u.len().min(flux.len())));
    }
    let fp: Vec<f64> = (0..n).map(|i| 0.5 * (flux[i] + alpha * u[i])).collect();
    let fm: Vec<f64> = (0..n).map(|i| 0.5 * (flux[i] - alpha * u[i])).collect();
    let w = |k: isize| k.rem_euclid(n as isize) as usize;
    let hat: Vec<f64> = (0..n as isize)
        .map(|i| {
            let plus = weno5(fp[w(i - 2)], fp[w(i - 1)], fp[w(i)], fp[w(i + 1)], fp[w(i + 2)]);
            let minus = weno5(fm[w(i + 3)], fm[w(i + 2)], fm[w(i + 1)], fm[w(i)], fm[w(i - 1)]);
            plus + minus
        })
        .collect();
    let inv = 1.0 / grid.dx();
    for i in 0..n {
        out[i] = -(hat[i] - hat[(i + n - 1) % n]) * inv;
    }
    Ok(())
}

const D4: [f64; 5] = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];

/// `coef·u_xx` with the periodic fourth-order central stencil.
pub fn d4(grid: &Grid1D, u: &[f64], coef: f64, out: &mut [f64]) {
    let n = u.len();
    let s = coef / (grid.dx() * grid.dx());
    for i in 0..n {
        let mut acc = 0.0;
        for (k, w) in D4.iter().enumerate() {
            acc += w * u[(i + n + k - 2) % n];
        }
        out[i] = s * acc;
    }
}

/// Dense matrix of [`d4`].
pub fn d4_matrix(grid: &Grid1D, coef: f64) -> DMatrix<f64> {
    let n = grid.n;
    let s = coef / (grid.dx() * grid.dx());
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for (k, w) in D4.iter().enumerate() {
            m[(i, (i + n + k - 2) % n)] += s * w;
        }
    }
    m
}

/// Named slices of the state vector.
pub type Components = Vec<(String, Range<usize>)>;

/// Problems also expose state layout and, for grids, the cell width.
pub trait Benchmark: SplitProblem {
    fn components(&self) -> Components {
        vec![("u".into(), 0..self.dim())]
    }
    /// Grid spacing for discrete L¹/L² norms; `None` for ODEs.
    fn cell_width(&self) -> Option<f64> {
        None
    }
    /// Checks that a state lies where the model is well posed.
    fn admissible(&self, _u: &[f64]) -> Result<(), String> {
        Ok(())
    }
}

// ---------------------------------------------------------------------------

/// y' = z, εz' = (1 − y²)z − y, with well-prepared initial data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VanDerPol {
    pub eps: f64,
}

/// Van der Pol with stiffness `eps` (ε = 0 gives the reduced system).
pub fn van_der_pol(eps: f64) -> Result<VanDerPol, ProblemError> {
    if !(eps >= 0.0) {
        return Err(ProblemError::InvalidParameter(format!("ε = {eps} must be nonnegative")));
    }
    Ok(VanDerPol { eps })
}

impl VanDerPol {
    pub fn initial(eps: f64) -> [f64; 2] {
        [2.0, -2.0 / 3.0 + 10.0 / 81.0 * eps - 292.0 / 2187.0 * eps * eps]
    }

    fn g(y: f64, z: f64) -> f64 {
        (1.0 - y * y) * z - y
    }
}

impl SplitProblem for VanDerPol {
    fn name(&self) -> &str {
        "vdp"
    }
    fn dim(&self) -> usize {
        2
    }
    fn stiffness(&self) -> Stiffness {
        Stiffness::Partitioned { ny: 1, eps: self.eps }
    }
    fn initial_state(&self) -> Vec<f64> {
        Self::initial(self.eps).to_vec()
    }
    fn explicit_rhs(&self, u: &[f64], out: &mut [f64]) {
        out[0] = u[1];
        out[1] = 0.0;
    }
    fn stiff_rhs(&self, u: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = Self::g(u[0], u[1]);
    }
    fn stiff_jacobian(&self, u: &[f64], jac: &mut DMatrix<f64>) {
        jac.fill(0.0);
        jac[(1, 0)] = -2.0 * u[0] * u[1] - 1.0;
        jac[(1, 1)] = 1.0 - u[0] * u[0];
    }
    fn reference_solution(&self, t: f64) -> Option<Vec<f64>> {
        if self.eps == 0.0 {
            reduced_vdp(t).map(|v| v.to_vec())
        } else {
            Some(vdp_reference(self.eps, t).to_vec())
        }
    }
}

impl Benchmark for VanDerPol {
    fn components(&self) -> Components {
        vec![("y".into(), 0..1), ("z".into(), 1..2)]
    }
}

/// Closed-form solution of the reduced system: ln y − y²/2 = t + ln 2 − 2,
/// z = y/(1 − y²). Defined while y > 1.
pub fn reduced_vdp(t: f64) -> Option<[f64; 2]> {
    let rhs = t + 2f64.ln() - 2.0;
    let mut y = 2.0f64;
    for _ in 0..100 {
        let phi = y.ln() - 0.5 * y * y - rhs;
        let dphi = 1.0 / y - y;
        let step = phi / dphi;
        y -= step;
        if !(y > 1.0) {
            return None;
        }
        if step.abs() <= 1e-16 * y {
            break;
        }
    }
    Some([y, y / (1.0 - y * y)])
}

/// Three-stage Radau IIA coefficients (order 5, stiffly accurate).
fn radau_iia() -> [[f64; 3]; 3] {
    let r6 = 6f64.sqrt();
    [
        [(88.0 - 7.0 * r6) / 360.0, (296.0 - 169.0 * r6) / 1800.0, (-2.0 + 3.0 * r6) / 225.0],
        [(296.0 + 169.0 * r6) / 1800.0, (88.0 + 7.0 * r6) / 360.0, (-2.0 - 3.0 * r6) / 225.0],
        [(16.0 - r6) / 36.0, (16.0 + r6) / 36.0, 1.0 / 9.0],
    ]
}

/// Step count used for the ε > 0 reference per unit time.
const REFERENCE_STEPS_PER_UNIT: f64 = 2000.0;

/// Radau IIA solution of the ε > 0 problem at time `t`.
/// Results are cached per (ε, t).
pub fn vdp_reference(eps: f64, t: f64) -> [f64; 2] {
    type Cache = Mutex<HashMap<(u64, u64), [f64; 2]>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let key = (eps.to_bits(), t.to_bits());
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().expect("cache lock").get(&key) {
        return *v;
    }
    let v = vdp_radau(eps, t, (t * REFERENCE_STEPS_PER_UNIT).ceil().max(1.0) as usize);
    cache.lock().expect("cache lock").insert(key, v);
    v
}

/// Three-stage Radau IIA integration of Van der Pol with `steps` uniform steps.
pub fn vdp_radau(eps: f64, t: f64, steps: usize) -> [f64; 2] {
    let a = radau_iia();
    let h = t / steps as f64;
    let [mut y, mut z] = VanDerPol::initial(eps);
    if t == 0.0 {
        return [y, z];
    }
    // Unknowns (Y₁, Y₂, Y₃, Z₁, Z₂, Z₃).
    let mut x = nalgebra::Vector6::new(y, y, y, z, z, z);
    for _ in 0..steps {
        for _ in 0..50 {
            let mut r = nalgebra::Vector6::zeros();
            let mut j = nalgebra::Matrix6::zeros();
            for i in 0..3 {
                r[i] = x[i] - y;
                r[3 + i] = eps * (x[3 + i] - z);
                j[(i, i)] = 1.0;
                j[(3 + i, 3 + i)] = eps;
                for k in 0..3 {
                    let (yk, zk) = (x[k], x[3 + k]);
                    let ha = h * a[i][k];
                    r[i] -= ha * zk;
                    r[3 + i] -= ha * VanDerPol::g(yk, zk);
                    j[(i, 3 + k)] -= ha;
                    j[(3 + i, k)] -= ha * (-2.0 * yk * zk - 1.0);
                    j[(3 + i, 3 + k)] -= ha * (1.0 - yk * yk);
                }
            }
            let d = j.lu().solve(&r).expect("Radau stage matrix is regular");
            x -= d;
            if d.amax() <= 1e-15 * (1.0 + x.amax()) {
                break;
            }
        }
        y = x[2];
        z = x[5];
    }
    [y, z]
}

// ---------------------------------------------------------------------------

/// u_t + (u²/2)_x = u_xx / R on a periodic grid over [0, 1].
#[derive(Debug, Clone)]
pub struct Burgers {
    pub grid: Grid1D,
    pub reynolds: f64,
}

/// Viscous Burgers with u(x, 0) = sin(πx).
pub fn burgers(grid: Grid1D, reynolds: f64) -> Result<Burgers, ProblemError> {
    if !(reynolds > 0.0) {
        return Err(ProblemError::InvalidParameter(format!("R = {reynolds} must be positive")));
    }
    Ok(Burgers { grid, reynolds })
}

impl SplitProblem for Burgers {
    fn name(&self) -> &str {
        "burgers"
    }
    fn dim(&self) -> usize {
        self.grid.n
    }
    fn initial_state(&self) -> Vec<f64> {
        self.grid.points().iter().map(|x| (PI * x).sin()).collect()
    }
    fn explicit_rhs(&self, u: &[f64], out: &mut [f64]) {
        let flux: Vec<f64> = u.iter().map(|v| 0.5 * v * v).collect();
        let alpha = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        weno5_flux_derivative(&self.grid, u, &flux, alpha, out).expect("grid checked at construction");
    }
    fn stiff_rhs(&self, u: &[f64], out: &mut [f64]) {
        d4(&self.grid, u, 1.0 / self.reynolds, out);
    }
    fn stiff_jacobian(&self, _u: &[f64], jac: &mut DMatrix<f64>) {
        jac.copy_from(&d4_matrix(&self.grid, 1.0 / self.reynolds));
    }
    fn constant_stiff_jacobian(&self) -> bool {
        true
    }
}

impl Benchmark for Burgers {
    fn cell_width(&self) -> Option<f64> {
        Some(self.grid.dx())
    }
}

// ---------------------------------------------------------------------------

/// Flux, source and equilibrium of a 2×2 relaxation model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelaxationModel {
    /// f₁ = v, f₂ = u, g = −(v − bu), q(u) = bu.
    Linear { b: f64 },
    /// f₁ = w, f₂ = h + h²/2, g = −(w − h²/2), q(h) = h²/2.
    Nonlinear,
}

impl RelaxationModel {
    pub fn flux(&self, u: f64, v: f64) -> (f64, f64) {
        match self {
            RelaxationModel::Linear { .. } => (v, u),
            RelaxationModel::Nonlinear => (v, u + 0.5 * u * u),
        }
    }

    /// g(u, v), ∂g/∂u, ∂g/∂v.
    pub fn source(&self, u: f64, v: f64) -> (f64, f64, f64) {
        match self {
            RelaxationModel::Linear { b } => (-(v - b * u), *b, -1.0),
            RelaxationModel::Nonlinear => (-(v - 0.5 * u * u), u, -1.0),
        }
    }

    pub fn equilibrium(&self, u: f64) -> f64 {
        match self {
            RelaxationModel::Linear { b } => b * u,
            RelaxationModel::Nonlinear => 0.5 * u * u,
        }
    }

    /// Global Lax-Friedrichs speed: the spectral radius of ∂(f₁, f₂)/∂(u, v)
    /// maximized over the grid.
    pub fn speed(&self, u: &[f64]) -> f64 {
        match self {
            RelaxationModel::Linear { .. } => 1.0,
            RelaxationModel::Nonlinear => u.iter().fold(0.0f64, |m, h| m.max((1.0 + h.abs()).sqrt())),
        }
    }
}

/// u_t + f₁(u, v)_x = 0, v_t + f₂(u, v)_x = g(u, v)/ε on a periodic grid.
///
/// The state is laid out as all u values followed by all v values.
#[derive(Debug, Clone)]
pub struct RelaxationSystem {
    pub model: RelaxationModel,
    pub grid: Grid1D,
    pub eps: f64,
    pub init: Vec<f64>,
    /// Single Fourier mode with its closed-form evolution.
    pub exact: Option<LinearMode>,
}

impl RelaxationSystem {
    fn split<'a>(&self, s: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        s.split_at(self.grid.n)
    }
}

impl SplitProblem for RelaxationSystem {
    fn name(&self) -> &str {
        match self.model {
            RelaxationModel::Linear { .. } => "linear-relaxation",
            RelaxationModel::Nonlinear => "nonlinear-relaxation",
        }
    }
    fn dim(&self) -> usize {
        2 * self.grid.n
    }
    fn initial_state(&self) -> Vec<f64> {
        self.init.clone()
    }
    fn explicit_rhs(&self, s: &[f64], out: &mut [f64]) {
        let n = self.grid.n;
        let (u, v) = self.split(s);
        let alpha = self.model.speed(u);
        let (f1, f2): (Vec<f64>, Vec<f64>) = (0..n).map(|i| self.model.flux(u[i], v[i])).unzip();
        let (ou, ov) = out.split_at_mut(n);
        weno5_flux_derivative(&self.grid, u, &f1, alpha, ou).expect("grid checked at construction");
        weno5_flux_derivative(&self.grid, v, &f2, alpha, ov).expect("grid checked at construction");
    }
    fn stiff_rhs(&self, s: &[f64], out: &mut [f64]) {
        let n = self.grid.n;
        let (u, v) = self.split(s);
        for i in 0..n {
            out[i] = 0.0;
            out[n + i] = self.model.source(u[i], v[i]).0 / self.eps;
        }
    }
    fn stiff_jacobian(&self, s: &[f64], jac: &mut DMatrix<f64>) {
        let n = self.grid.n;
        let (u, v) = self.split(s);
        jac.fill(0.0);
        for i in 0..n {
            let (_, gu, gv) = self.model.source(u[i], v[i]);
            jac[(n + i, i)] = gu / self.eps;
            jac[(n + i, n + i)] = gv / self.eps;
        }
    }
    fn solve_stage_system(&self, s: &[f64], gamma: f64, rhs: &mut [f64]) -> Option<bool> {
        // Per cell: [[1, 0], [−γg_u/ε, 1 − γg_v/ε]].
        let n = self.grid.n;
        let (u, v) = self.split(s);
        for i in 0..n {
            let (_, gu, gv) = self.model.source(u[i], v[i]);
            let d = 1.0 - gamma * gv / self.eps;
            if d == 0.0 || !d.is_finite() {
                return Some(false);
            }
            rhs[n + i] = (rhs[n + i] + gamma * gu / self.eps * rhs[i]) / d;
        }
        Some(true)
    }
    fn reference_solution(&self, t: f64) -> Option<Vec<f64>> {
        let mode = self.exact.as_ref()?;
        Some(mode.evaluate(&self.grid, t))
    }
}

impl Benchmark for RelaxationSystem {
    fn components(&self) -> Components {
        let n = self.grid.n;
        let (a, b) = match self.model {
            RelaxationModel::Linear { .. } => ("u", "v"),
            RelaxationModel::Nonlinear => ("h", "w"),
        };
        vec![(a.into(), 0..n), (b.into(), n..2 * n)]
    }
    fn cell_width(&self) -> Option<f64> {
        Some(self.grid.dx())
    }
    /// The nonlinear model needs f'(h)² < p'(h), i.e. h² < 1 + h.
    fn admissible(&self, u: &[f64]) -> Result<(), String> {
        if self.model != RelaxationModel::Nonlinear {
            return Ok(());
        }
        match u[..self.grid.n].iter().find(|&&h| !(h * h < 1.0 + h)) {
            Some(h) => Err(format!("h = {h} violates the subcharacteristic condition h² < 1 + h")),
            None => Ok(()),
        }
    }
}

/// One Fourier mode of the linear relaxation system:
/// u = Re(U(t) e^{ikx}), v = Re(V(t) e^{ikx}) with
/// U' = −ikV, V' = −ikU − (V − bU)/ε.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMode {
    pub k: f64,
    pub b: f64,
    pub eps: f64,
    pub u0: Complex<f64>,
    pub v0: Complex<f64>,
}

impl LinearMode {
    /// Mode amplitudes at time `t`, from the eigen-decomposition of the 2×2
    /// generator. The fast root comes from the stable quadratic formula.
    pub fn amplitudes(&self, t: f64) -> (Complex<f64>, Complex<f64>) {
        let i = Complex::new(0.0, 1.0);
        let zero = Complex::new(0.0, 0.0);
        let k = self.k;
        let inv = 1.0 / self.eps;
        let m = [[zero, -i * k], [-i * k + self.b * inv, Complex::new(-inv, 0.0)]];
        // λ² + pλ + q = 0 with p = 1/ε, q = k² + ikb/ε.
        let p = Complex::new(inv, 0.0);
        let q = Complex::new(k * k, k * self.b * inv);
        let mut disc = (p * p - q * 4.0).sqrt();
        if (p.conj() * disc).re < 0.0 {
            disc = -disc;
        }
        let fast = -(p + disc) * 0.5;
        let slow = q / fast;
        let e_fast = (fast * t).exp();
        let e_slow = (slow * t).exp();
        let d = slow - fast;
        // exp(tM) = [e_slow (M − fast I) − e_fast (M − slow I)] / (slow − fast)
        let apply = |lam: Complex<f64>| {
            (
                (m[0][0] - lam) * self.u0 + m[0][1] * self.v0,
                m[1][0] * self.u0 + (m[1][1] - lam) * self.v0,
            )
        };
        let (a0, a1) = apply(fast);
        let (b0, b1) = apply(slow);
        ((e_slow * a0 - e_fast * b0) / d, (e_slow * a1 - e_fast * b1) / d)
    }

    pub fn evaluate(&self, grid: &Grid1D, t: f64) -> Vec<f64> {
        let (u, v) = self.amplitudes(t);
        let xs = grid.points();
        let phase = |x: f64| Complex::new(0.0, self.k * x).exp();
        xs.iter()
            .map(|&x| (u * phase(x)).re)
            .chain(xs.iter().map(|&x| (v * phase(x)).re))
            .collect()
    }
}

/// u_t + v_x = 0, v_t + u_x = −(v − bu)/ε with u(x, 0) = sin(2πx) and
/// v(x, 0) = b u + ε(b² − 1) u_x.
pub fn linear_relaxation(grid: Grid1D, b: f64, eps: f64) -> Result<RelaxationSystem, ProblemError> {
    if b.abs() > 1.0 {
        return Err(ProblemError::SubcharacteristicViolated(b.abs()));
    }
    if !(eps > 0.0) {
        return Err(ProblemError::InvalidParameter(format!("ε = {eps} must be positive")));
    }
    let k = 2.0 * PI;
    let xs = grid.points();
    let u = xs.iter().map(|x| (k * x).sin());
    let v = xs.iter().map(|x| b * (k * x).sin() + eps * (b * b - 1.0) * k * (k * x).cos());
    // sin(kx) = Re(−i e^{ikx}), cos(kx) = Re(e^{ikx}).
    let mode = LinearMode {
        k,
        b,
        eps,
        u0: Complex::new(0.0, -1.0),
        v0: Complex::new(eps * (b * b - 1.0) * k, -b),
    };
    Ok(RelaxationSystem {
        model: RelaxationModel::Linear { b },
        grid,
        eps,
        init: u.chain(v).collect(),
        exact: Some(mode),
    })
}

/// h_t + w_x = 0, w_t + (h + h²/2)_x = −(w − h²/2)/ε with
/// h(x, 0) = 1 + 0.2 sin(8πx) and w = h²/2 + ε (h² − (1 + h)) h_x.
pub fn nonlinear_relaxation(grid: Grid1D, eps: f64) -> Result<RelaxationSystem, ProblemError> {
    if !(eps > 0.0) {
        return Err(ProblemError::InvalidParameter(format!("ε = {eps} must be positive")));
    }
    let k = 8.0 * PI;
    let xs = grid.points();
    let h: Vec<f64> = xs.iter().map(|x| 1.0 + 0.2 * (k * x).sin()).collect();
    let w: Vec<f64> = xs
        .iter()
        .zip(&h)
        .map(|(x, h)| {
            let hx = 0.2 * k * (k * x).cos();
            0.5 * h * h + eps * (h * h - (1.0 + h)) * hx
        })
        .collect();
    Ok(RelaxationSystem {
        model: RelaxationModel::Nonlinear,
        grid,
        eps,
        init: h.into_iter().chain(w).collect(),
        exact: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid1D {
        Grid1D::new(n, 0.0, 1.0).unwrap()
    }

    #[test]
    fn van_der_pol_data() {
        let p = van_der_pol(0.0).unwrap();
        let u = p.initial_state();
        assert_eq!(u, vec![2.0, -2.0 / 3.0]);
        let mut g = [0.0; 2];
        p.stiff_rhs(&u, &mut g);
        assert!(g[1].abs() < 1e-15);
        let mut j = DMatrix::zeros(2, 2);
        p.stiff_jacobian(&u, &mut j);
        assert_eq!(j[(1, 1)], -3.0);
        let z = VanDerPol::initial(1e-6)[1];
        assert_eq!(z, -2.0 / 3.0 + 10.0 / 81.0 * 1e-6 - 292.0 / 2187.0 * 1e-12);
        assert!(van_der_pol(-1.0).is_err());
    }

    #[test]
    fn reduced_solution_satisfies_constraint() {
        assert_eq!(reduced_vdp(0.0).unwrap(), [2.0, -2.0 / 3.0]);
        let [y, z] = reduced_vdp(0.5).unwrap();
        assert!(((1.0 - y * y) * z - y).abs() < 1e-14);
        let h = 1e-6;
        let yp = (reduced_vdp(0.5 + h).unwrap()[0] - reduced_vdp(0.5 - h).unwrap()[0]) / (2.0 * h);
        assert!((yp - z).abs() < 1e-8);
        assert!(reduced_vdp(2.0).is_none());
    }

    #[test]
    fn radau_reference_converges_at_fifth_order() {
        let exact = vdp_radau(0.5, 0.5, 800);
        let e1 = (vdp_radau(0.5, 0.5, 10)[0] - exact[0]).abs();
        let e2 = (vdp_radau(0.5, 0.5, 20)[0] - exact[0]).abs();
        assert!((e1 / e2).log2() > 4.6, "{e1} {e2}");
        let stiff = vdp_radau(1e-6, 0.5, 1000);
        let finer = vdp_radau(1e-6, 0.5, 2000);
        assert!((stiff[1] - finer[1]).abs() < 1e-13);
        let near = vdp_reference(1e-8, 0.5);
        let reduced = reduced_vdp(0.5).unwrap();
        assert!((near[0] - reduced[0]).abs() < 1e-7);
    }

    #[test]
    fn weno_constant_and_conservation() {
        let g = grid(32);
        let u = vec![0.7; 32];
        let mut out = vec![1.0; 32];
        weno5_flux_derivative(&g, &u, &u, 1.0, &mut out).unwrap();
        assert!(out.iter().all(|v| v.abs() < 1e-13));
        let u: Vec<f64> = g.points().iter().map(|x| (2.0 * PI * x).sin() + 0.3 * (6.0 * PI * x).cos()).collect();
        let f: Vec<f64> = u.iter().map(|v| 0.5 * v * v).collect();
        weno5_flux_derivative(&g, &u, &f, 1.3, &mut out).unwrap();
        assert!(out.iter().sum::<f64>().abs() <= 1e-12 * 32.0);
        assert_eq!(
            weno5_flux_derivative(&g, &u[..8], &f[..8], 1.0, &mut out),
            Err(ProblemError::StencilTooSmall(8))
        );
        assert!(Grid1D::new(7, 0.0, 1.0).is_err());
    }

    #[test]
    fn weno_is_translation_equivariant() {
        let g = grid(40);
        let u: Vec<f64> = g.points().iter().map(|x| (2.0 * PI * x).sin().powi(3) + 0.1).collect();
        let f: Vec<f64> = u.iter().map(|v| v * v).collect();
        let mut a = vec![0.0; 40];
        let mut b = vec![0.0; 40];
        weno5_flux_derivative(&g, &u, &f, 2.0, &mut a).unwrap();
        let mut us = u.clone();
        let mut fs = f.clone();
        us.rotate_right(1);
        fs.rotate_right(1);
        weno5_flux_derivative(&g, &us, &fs, 2.0, &mut b).unwrap();
        a.rotate_right(1);
        assert_eq!(a, b);
    }

    #[test]
    fn weno_reconstruction_of_a_step_adds_no_variation() {
        let f: Vec<f64> = (0..40).map(|i| if (10..25).contains(&i) { 1.0 } else { 0.0 }).collect();
        let tv = |v: &[f64]| (0..v.len()).map(|i| (v[(i + 1) % v.len()] - v[i]).abs()).sum::<f64>();
        let r = weno5_reconstruct(&f);
        assert!(tv(&r) <= tv(&f) + 1e-10, "{} {}", tv(&r), tv(&f));
    }

    #[test]
    fn fourth_order_diffusion_on_sine() {
        let g = grid(64);
        let u: Vec<f64> = g.points().iter().map(|x| (2.0 * PI * x).sin()).collect();
        let mut out = vec![0.0; 64];
        d4(&g, &u, 1.0, &mut out);
        let k2 = (2.0 * PI).powi(2);
        let bound = (2.0 * PI * g.dx()).powi(4);
        for i in 0..64 {
            assert!((out[i] + k2 * u[i]).abs() <= bound * k2);
        }
        let m = d4_matrix(&g, 1.0);
        let mv = &m * nalgebra::DVector::from_vec(u);
        for i in 0..64 {
            assert!((mv[i] - out[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn burgers_constant_state_is_steady() {
        let p = burgers(grid(16), 0.1).unwrap();
        let u = vec![0.4; 16];
        let mut f = vec![1.0; 16];
        let mut g = vec![1.0; 16];
        p.explicit_rhs(&u, &mut f);
        p.stiff_rhs(&u, &mut g);
        assert!(f.iter().chain(&g).all(|v| v.abs() < 1e-12));
        assert!(burgers(grid(16), 0.0).is_err());
    }

    fn rel_grid() -> Grid1D {
        Grid1D::new(100, 0.0, 2.0).unwrap()
    }

    #[test]
    fn linear_mode_matches_initial_data_and_limit() {
        for eps in [1.0, 1e-3, 1e-8] {
            let p = linear_relaxation(rel_grid(), 0.5, eps).unwrap();
            let e = p.reference_solution(0.0).unwrap();
            let u0 = p.initial_state();
            for i in 0..200 {
                assert!((e[i] - u0[i]).abs() < 1e-13);
            }
        }
        let p = linear_relaxation(rel_grid(), 0.5, 1e-8).unwrap();
        let e = p.reference_solution(0.2).unwrap();
        for (i, x) in rel_grid().points().iter().enumerate() {
            assert!((e[i] - (2.0 * PI * (x - 0.1)).sin()).abs() < 1e-6);
        }
        assert_eq!(
            linear_relaxation(rel_grid(), 1.5, 1.0).unwrap_err(),
            ProblemError::SubcharacteristicViolated(1.5)
        );
    }

    #[test]
    fn linear_mode_semigroup() {
        for eps in [1.0, 1e-2, 1e-6] {
            let m = linear_relaxation(rel_grid(), 0.5, eps).unwrap().exact.unwrap();
            let (u1, v1) = m.amplitudes(0.07);
            let restarted = LinearMode { u0: u1, v0: v1, ..m.clone() };
            let (a, b) = restarted.amplitudes(0.11);
            let (c, d) = m.amplitudes(0.18);
            assert!((a - c).norm() < 1e-12 && (b - d).norm() < 1e-12, "eps={eps}");
        }
    }

    #[test]
    fn linear_mode_is_damped() {
        // Eigenvalues of [[0, −ik], [−ik + b/ε, −1/ε]] for ε = 1.
        let k = 2.0 * PI;
        let tr = Complex::new(-1.0, 0.0);
        let det = Complex::new(k * k, 0.5 * k);
        let disc = (tr * tr - det * 4.0).sqrt();
        for lam in [(tr + disc) / 2.0, (tr - disc) / 2.0] {
            assert!(lam.re < 0.0);
        }
    }

    #[test]
    fn subcharacteristic_admissibility() {
        let p = nonlinear_relaxation(grid(10), 0.01).unwrap();
        let mut s = p.initial_state();
        assert!(p.admissible(&s).is_ok());
        s[3] = -0.7;
        assert!(p.admissible(&s).is_err());
        let l = linear_relaxation(rel_grid(), 0.5, 1.0).unwrap();
        assert!(l.admissible(&vec![-5.0; 200]).is_ok());
    }

    #[test]
    fn nonlinear_relaxation_data() {
        let m = RelaxationModel::Nonlinear;
        for h in [0.8, 1.0, 1.2] {
            assert_eq!(m.source(h, m.equilibrium(h)).0, 0.0);
            assert!(h * h < 1.0 + h);
        }
        let g = grid(100);
        let p = nonlinear_relaxation(g, 1e-2).unwrap();
        let s = p.initial_state();
        let (h, w) = s.split_at(100);
        // Points where cos(8πx) = 0 have h_x = 0 and w on equilibrium.
        for i in 0..100 {
            let hx = 0.2 * 8.0 * PI * (8.0 * PI * g.x(i)).cos();
            let w1 = (h[i] * h[i] - (1.0 + h[i])) * hx;
            assert!((w[i] - 0.5 * h[i] * h[i] - 1e-2 * w1).abs() < 1e-15);
        }
        let flat = RelaxationModel::Nonlinear.speed(&[1.0, -0.44]);
        assert_eq!(flat, 2f64.sqrt());
    }

    #[test]
    fn block_stage_solve_matches_dense() {
        let p = nonlinear_relaxation(grid(10), 0.01).unwrap();
        let s = p.initial_state();
        let gamma = 0.03;
        let rhs: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let mut x = rhs.clone();
        assert_eq!(p.solve_stage_system(&s, gamma, &mut x), Some(true));
        let mut j = DMatrix::zeros(20, 20);
        p.stiff_jacobian(&s, &mut j);
        let m = DMatrix::identity(20, 20) - j * gamma;
        let back = m * nalgebra::DVector::from_vec(x);
        for i in 0..20 {
            assert!((back[i] - rhs[i]).abs() < 1e-12);
        }
    }
}
