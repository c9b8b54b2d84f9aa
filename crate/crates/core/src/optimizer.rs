//! Hybrid non-monotone line search on the Stiefel manifold.
//!
//! One iteration, starting from an iterate W with Euclidean gradient G:
//!
//! 1. Blend three tangent directions into the search direction
//!    F = α·F₁ + β·F₂ + γ·F₃ with
//!    F₁ = G − WGᵀW, F₂ = (I − WWᵀ)G, F₃ = ½(I − WWᵀ)G.
//! 2. Propose a step length by the Barzilai-Borwein rule, alternating the two
//!    BB formulas by iteration parity, clamped to `[dt_min, dt_max]`.
//! 3. Step along −F by the average of the previous accepted step and the
//!    current proposal, retract back onto the manifold with the orthogonal
//!    polar factor (SVD), and backtrack that step until the trial value
//!    passes a non-monotone sufficient-decrease test against the
//!    Zhang–Hager reference C rather than the last objective value.
//!
//! Plain mode runs the same loop with F = F₁ only and no step averaging; it
//! exists so the hybrid variant can be compared against its baseline.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::objective::{self, CenteredProblem, StiefelPoint};

/// Direction-blend weights on the constrained simplex:
/// α + β + γ = 1 with each component ≥ 0.01.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexWeights {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl SimplexWeights {
    pub const MIN_COMPONENT: f64 = 0.01;

    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let sum = alpha + beta + gamma;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "simplex weights must sum to 1, got {sum}"
            )));
        }
        for (name, v) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            // The same 1e-12 slack as the sum check, so lattice points whose
            // third component is computed as 1 - a - b pass cleanly.
            if v < Self::MIN_COMPONENT - 1e-12 {
                return Err(Error::Config(format!(
                    "{name} = {v} is below the minimum weight {}",
                    Self::MIN_COMPONENT
                )));
            }
        }
        Ok(Self { alpha, beta, gamma })
    }

    /// The (1/3, 1/3, 1/3) blend.
    pub fn uniform() -> Self {
        Self {
            alpha: 1.0 / 3.0,
            beta: 1.0 / 3.0,
            gamma: 1.0 / 3.0,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Whether the search blends directions and averages step lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchMode {
    /// Blended direction F and averaged step length.
    #[default]
    Hybrid,
    /// F₁ only, raw BB step. The baseline the hybrid is measured against.
    Plain,
}

/// Line-search parameters.
#[derive(Debug, Clone, Copy)]
pub struct SearchConfig {
    /// Stop when the tangent-projected gradient norm falls to this value.
    pub eps_grad: f64,
    /// Step length at iteration 0 and the degenerate-curvature fallback.
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Sufficient-decrease slope (Armijo parameter).
    pub rho: f64,
    /// Backtracking shrink factor.
    pub delta: f64,
    /// Non-monotone memory: 0 is monotone, values near 1 average far back.
    pub mu: f64,
    pub max_iters: usize,
    /// Seeds the initial Stiefel point.
    pub seed: u64,
    pub mode: SearchMode,
}

impl SearchConfig {
    /// Defaults for a d×k problem: eps_grad = 1e-4·√(dk), dt ∈ [1e-10, 1e2]
    /// starting at 1e-2, ρ = 1e-4, δ = 0.5, μ = 0.85, 1000 iterations.
    pub fn for_shape(d: usize, k: usize) -> Self {
        Self {
            eps_grad: 1e-4 * ((d * k) as f64).sqrt(),
            dt_init: 1e-2,
            dt_min: 1e-10,
            dt_max: 1e2,
            rho: 1e-4,
            delta: 0.5,
            mu: 0.85,
            max_iters: 1000,
            seed: 0,
            mode: SearchMode::Hybrid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_min > 0.0 && self.dt_min < self.dt_max) {
            return Err(Error::Config(format!(
                "need 0 < dt_min < dt_max, got [{}, {}]",
                self.dt_min, self.dt_max
            )));
        }
        if self.dt_init <= 0.0 {
            return Err(Error::Config("dt_init must be positive".into()));
        }
        for (name, v) in [("rho", self.rho), ("delta", self.delta), ("mu", self.mu)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        if self.eps_grad <= 0.0 {
            return Err(Error::Config("eps_grad must be positive".into()));
        }
        Ok(())
    }
}

/// Objective and step history of one search run.
#[derive(Debug, Clone)]
pub struct DescentTrace {
    /// f(W_m) per iterate, including the initial point.
    pub f_values: Vec<f64>,
    /// Accepted step length per iteration (length = iterations).
    pub accepted_steps: Vec<f64>,
    /// Tangent-projected gradient norm per iterate.
    pub grad_norms: Vec<f64>,
    /// Zhang–Hager reference value C_m per iterate.
    pub envelope: Vec<f64>,
    /// True when the gradient-norm test triggered before `max_iters`.
    pub converged: bool,
    /// Number of accepted iterations c.
    pub iterations: usize,
    /// Largest ‖WᵀW − I‖_F observed across accepted iterates.
    pub max_ortho_error: f64,
    /// Iterations where backtracking hit the dt_min floor and the trial was
    /// accepted regardless.
    pub floored_steps: Vec<usize>,
    /// Iterations that fell back to F₁ after a nonpositive descent product.
    pub direction_fallbacks: Vec<usize>,
}

impl DescentTrace {
    fn new(f0: f64, grad0: f64, ortho0: f64) -> Self {
        Self {
            f_values: vec![f0],
            accepted_steps: Vec::new(),
            grad_norms: vec![grad0],
            envelope: vec![f0],
            converged: false,
            iterations: 0,
            max_ortho_error: ortho0,
            floored_steps: Vec::new(),
            direction_fallbacks: Vec::new(),
        }
    }

    /// Writes the trace as CSV rows `iteration,f,grad_norm,dt`; the initial
    /// row has an empty dt field.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "iteration,f,grad_norm,dt")?;
        for i in 0..self.f_values.len() {
            if i == 0 {
                writeln!(out, "0,{},{},", self.f_values[0], self.grad_norms[0])?;
            } else {
                writeln!(
                    out,
                    "{i},{},{},{}",
                    self.f_values[i],
                    self.grad_norms[i],
                    self.accepted_steps[i - 1]
                )?;
            }
        }
        Ok(())
    }
}

/// Draws a seeded random point on St(d, k): a standard-Gaussian matrix is
/// orthonormalized by thin QR with the sign of R's diagonal fixed, so the
/// result is reproducible for a given seed.
pub fn init_stiefel(d: usize, k: usize, seed: u64) -> Result<StiefelPoint> {
    if d < k {
        return Err(Error::Dimension(format!(
            "cannot build a {d}x{k} orthonormal matrix: d < k"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let gauss: DMatrix<f64> = DMatrix::from_fn(d, k, |_, _| normal.sample(&mut rng));
    let qr = gauss.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    StiefelPoint::new(q)
}

/// The three tangent directions (F₁, F₂, F₃) at W for Euclidean gradient G.
pub fn tangent_directions(w: &StiefelPoint, g: &DMatrix<f64>) -> [DMatrix<f64>; 3] {
    let wm = w.matrix();
    let f1 = g - wm * (g.transpose() * wm);
    let f2 = g - wm * (wm.transpose() * g);
    let f3 = 0.5 * &f2;
    [f1, f2, f3]
}

/// The tangent-projected gradient ∇f(W) = G − WGᵀW used for the stopping
/// test and the BB secant pairs.
pub fn riemannian_gradient(w: &StiefelPoint, g: &DMatrix<f64>) -> DMatrix<f64> {
    let wm = w.matrix();
    g - wm * (g.transpose() * wm)
}

/// Blended search direction F = αF₁ + βF₂ + γF₃.
pub fn hybrid_direction(
    w: &StiefelPoint,
    g: &DMatrix<f64>,
    weights: &SimplexWeights,
) -> DMatrix<f64> {
    let [f1, f2, f3] = tangent_directions(w, g);
    weights.alpha() * f1 + weights.beta() * f2 + weights.gamma() * f3
}

/// ‖WᵀF + FᵀW‖_F, zero for members of the tangent space at W.
pub fn tangency_error(w: &StiefelPoint, f: &DMatrix<f64>) -> f64 {
    let m = w.matrix().transpose() * f;
    (&m + m.transpose()).norm()
}

/// Barzilai-Borwein step from the secant pair S = W_m − W_{m−1},
/// O = ∇f(W_m) − ∇f(W_{m−1}); BB1 on even iterations, BB2 on odd ones,
/// clamped to `[dt_min, dt_max]`. Degenerate curvature falls back to
/// `dt_init`.
pub fn bb_step(m: usize, s: &DMatrix<f64>, o: &DMatrix<f64>, cfg: &SearchConfig) -> f64 {
    let so = s.dot(o).abs();
    let o_norm_sq = o.norm_squared();
    let raw = if so < 1e-16 || o_norm_sq.sqrt() < 1e-16 {
        cfg.dt_init
    } else if m % 2 == 0 {
        s.norm_squared() / so
    } else {
        so / o_norm_sq
    };
    raw.clamp(cfg.dt_min, cfg.dt_max)
}

/// Projects Q onto the Stiefel manifold: the orthogonal polar factor U·Vᵀ
/// from the SVD Q = UΣVᵀ, which is the orthonormal matrix nearest to Q in
/// Frobenius distance.
pub fn retract(q: &DMatrix<f64>) -> Result<StiefelPoint> {
    let svd = q.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin < 1e-12 * smax {
        return Err(Error::Numerical(format!(
            "retraction input is rank deficient (sigma_min/sigma_max = {:.3e}); reduce the step length",
            if smax > 0.0 { smin / smax } else { 0.0 }
        )));
    }
    let u = svd.u.ok_or_else(|| Error::Numerical("SVD failed to produce U".into()))?;
    let v_t = svd.v_t.ok_or_else(|| Error::Numerical("SVD failed to produce V".into()))?;
    StiefelPoint::new(u * v_t)
}

/// Tangent-space step Q = W − ((dt_prev + dt_curr)/2)·F.
pub fn tangent_step(
    w: &StiefelPoint,
    f: &DMatrix<f64>,
    dt_prev: f64,
    dt_curr: f64,
) -> DMatrix<f64> {
    let dt = 0.5 * (dt_prev + dt_curr);
    w.matrix() - dt * f
}

const MAX_BACKTRACKS: usize = 60;

/// Runs the search from a seeded random initial point (`cfg.seed`).
pub fn minimize(
    p: &CenteredProblem,
    weights: &SimplexWeights,
    cfg: &SearchConfig,
) -> Result<(StiefelPoint, DescentTrace)> {
    let w0 = init_stiefel(p.n_features(), p.n_classes(), cfg.seed)?;
    minimize_from(p, w0, weights, cfg)
}

/// Runs the search from an explicit initial point.
pub fn minimize_from(
    p: &CenteredProblem,
    w0: StiefelPoint,
    weights: &SimplexWeights,
    cfg: &SearchConfig,
) -> Result<(StiefelPoint, DescentTrace)> {
    cfg.validate()?;
    if w0.nrows() != p.n_features() || w0.ncols() != p.n_classes() {
        return Err(Error::Dimension(format!(
            "initial point is {}x{} but the problem is {}x{}",
            w0.nrows(),
            w0.ncols(),
            p.n_features(),
            p.n_classes()
        )));
    }

    let mut w = w0;
    let mut g = objective::gradient(p, &w);
    let mut rg = riemannian_gradient(&w, &g);
    let mut f_curr = objective::objective_value(p, &w);
    let mut trace = DescentTrace::new(f_curr, rg.norm(), w.orthonormality_error());

    // Zhang–Hager averaging state.
    let mut p_weight = 1.0f64;
    let mut c_ref = f_curr;

    // dt_proposed: the (clamped) BB proposal for the current iteration.
    // dt_prev: the accepted, possibly backtracked, step of the previous one.
    let mut dt_proposed = cfg.dt_init.clamp(cfg.dt_min, cfg.dt_max);
    let mut dt_prev: Option<f64> = None;

    let mut m = 0usize;
    loop {
        if rg.norm() <= cfg.eps_grad {
            trace.converged = true;
            break;
        }
        if m >= cfg.max_iters {
            break;
        }

        let mut direction = match cfg.mode {
            SearchMode::Hybrid => hybrid_direction(&w, &g, weights),
            SearchMode::Plain => rg.clone(),
        };
        let mut descent = rg.dot(&direction);
        if descent <= 0.0 {
            // All three directions have a nonnegative product with the
            // projected gradient, so this only happens through rounding.
            direction = rg.clone();
            descent = rg.norm_squared();
            trace.direction_fallbacks.push(m);
        }
        let dir_deriv = -descent;

        // The line-search variable is the step actually taken. Its starting
        // value is the hybrid average of the previous accepted step and the
        // current BB proposal (iteration 0 and plain mode use the proposal
        // alone); backtracking shrinks the step itself.
        let mut dt = match (cfg.mode, dt_prev) {
            (SearchMode::Hybrid, Some(prev)) => {
                0.5 * (prev + dt_proposed)
            }
            _ => dt_proposed,
        };
        let mut floored = false;
        let mut shrinks = 0usize;
        let (w_next, f_next, dt_accepted) = loop {
            let q = tangent_step(&w, &direction, dt, dt);
            let trial = retract(&q);
            let accept = match &trial {
                Ok(w_trial) => {
                    let f_trial = objective::objective_value(p, w_trial);
                    if f_trial.is_finite() && (f_trial < c_ref + cfg.rho * dt * dir_deriv || floored)
                    {
                        Some(f_trial)
                    } else {
                        None
                    }
                }
                Err(_) => None,
            };
            if let Some(f_trial) = accept {
                break (trial.unwrap(), f_trial, dt);
            }
            if floored {
                // Even the floor step failed to produce a finite retractable
                // trial; the problem data is numerically broken.
                return Err(trial.err().unwrap_or_else(|| {
                    Error::Numerical("objective is non-finite at the minimum step length".into())
                }));
            }
            shrinks += 1;
            let next = cfg.delta * dt;
            if next < cfg.dt_min || shrinks >= MAX_BACKTRACKS {
                dt = cfg.dt_min;
                floored = true;
                trace.floored_steps.push(m);
            } else {
                dt = next;
            }
        };

        let g_next = objective::gradient(p, &w_next);
        let rg_next = riemannian_gradient(&w_next, &g_next);

        // Secant pair for the next BB proposal.
        let s = w_next.matrix() - w.matrix();
        let o = &rg_next - &rg;
        dt_proposed = bb_step(m + 1, &s, &o, cfg);
        dt_prev = Some(dt_accepted);

        // C_{m+1} = (mu * P_m * C_m + f(W_{m+1})) / P_{m+1}, P_{m+1} = mu * P_m + 1.
        let p_next = cfg.mu * p_weight + 1.0;
        c_ref = (cfg.mu * p_weight * c_ref + f_next) / p_next;
        p_weight = p_next;

        trace.max_ortho_error = trace.max_ortho_error.max(w_next.orthonormality_error());
        trace.f_values.push(f_next);
        trace.grad_norms.push(rg_next.norm());
        trace.accepted_steps.push(dt_accepted);
        trace.envelope.push(c_ref);
        trace.iterations += 1;

        w = w_next;
        g = g_next;
        rg = rg_next;
        f_curr = f_next;
        m += 1;
    }
    let _ = f_curr;
    Ok((w, trace))
}
