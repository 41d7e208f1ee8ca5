//! Plug-and-play ADMM for `min ½‖y − Φx‖² + λ𝒥(x)` with the proximal step of
//! `𝒥` replaced by a denoiser:
//!
//! ```text
//! x ← (ΦᴴΦ + ρI)⁻¹(Φᴴy + ρ(z − u))
//! z ← D(x + u, σ),   σ² = λ/(2ρ)
//! u ← u + x − z
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{adjoint_mul, gram, norm_sqr, CMatrix, Cholesky, FlopCounter, C64};

/// The `z`-update: maps a noisy vector and a noise level to a cleaner one.
pub trait Denoiser: Sync {
    fn denoise(&self, x: &[C64], sigma: f64) -> Result<Vec<C64>>;

    fn name(&self) -> &str;
}

/// `D(x) = x`.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityDenoiser;

impl Denoiser for IdentityDenoiser {
    fn denoise(&self, x: &[C64], _sigma: f64) -> Result<Vec<C64>> {
        Ok(x.to_vec())
    }

    fn name(&self) -> &str {
        "identity"
    }
}

/// Prepared `(ΦᴴΦ + ρI)⁻¹` for one value of `ρ`.
pub trait RegularizedInverse {
    fn solve(&self, rhs: &[C64]) -> Vec<C64>;
}

/// Forward model seen by the primal step.
pub trait PrimalOperator {
    fn dim(&self) -> usize;

    fn factor(&self, rho: f64) -> Result<Box<dyn RegularizedInverse + '_>>;
}

/// Dense `Φ` with its Gram matrix cached.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    pub phi: CMatrix,
    gram: CMatrix,
}

impl DenseOperator {
    pub fn new(phi: CMatrix) -> Self {
        let gram = gram(&phi, &mut FlopCounter::default());
        Self { phi, gram }
    }

    pub fn adjoint(&self, y: &[C64]) -> Vec<C64> {
        adjoint_mul(&self.phi, y)
    }
}

struct DenseInverse(Cholesky);

impl RegularizedInverse for DenseInverse {
    fn solve(&self, rhs: &[C64]) -> Vec<C64> {
        self.0.solve(rhs, &mut FlopCounter::default())
    }
}

impl PrimalOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.gram.nrows()
    }

    fn factor(&self, rho: f64) -> Result<Box<dyn RegularizedInverse + '_>> {
        let mut g = self.gram.clone();
        for i in 0..g.nrows() {
            g[(i, i)] += rho;
        }
        Ok(Box::new(DenseInverse(Cholesky::factor(&g, &mut FlopCounter::default())?)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PnpConfig {
    pub rho: f64,
    pub lambda: f64,
    pub iterations: usize,
    /// `ρ ← μρ` after every round; 1 keeps `ρ` fixed.
    #[serde(default = "one")]
    pub rho_growth: f64,
    /// Stop once `‖x − z‖/‖z‖` falls below this.
    #[serde(default)]
    pub early_exit: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl Default for PnpConfig {
    fn default() -> Self {
        Self {
            rho: 0.1,
            lambda: 0.5,
            iterations: 10,
            rho_growth: 1.0,
            early_exit: None,
        }
    }
}

impl PnpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) {
            return Err(Error::InvalidParameter(format!("rho must be > 0, got {}", self.rho)));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iteration budget must be >= 1".into()));
        }
        if !(self.rho_growth >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "rho growth must be >= 1, got {}",
                self.rho_growth
            )));
        }
        Ok(())
    }

    /// Denoiser noise level `σ = √(λ/(2ρ))`.
    pub fn sigma(&self, rho: f64) -> f64 {
        (self.lambda / (2.0 * rho)).sqrt()
    }
}

/// ADMM triple plus bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct PnpState {
    pub x: Vec<C64>,
    pub z: Vec<C64>,
    pub u: Vec<C64>,
    pub iteration: usize,
    pub rho: f64,
    /// `‖x − z‖` after each round.
    pub residuals: Vec<f64>,
}

impl PnpState {
    pub fn zeros(dim: usize, rho: f64) -> Self {
        let zero = vec![C64::new(0.0, 0.0); dim];
        Self {
            x: zero.clone(),
            z: zero.clone(),
            u: zero,
            iteration: 0,
            rho,
            residuals: Vec::new(),
        }
    }
}

/// `x = (ΦᴴΦ + ρI)⁻¹(Φᴴy + ρż)`.
pub fn primal_update(inv: &dyn RegularizedInverse, phi_h_y: &[C64], z_dot: &[C64], rho: f64) -> Vec<C64> {
    let rhs: Vec<C64> = phi_h_y.iter().zip(z_dot).map(|(a, b)| a + b * rho).collect();
    inv.solve(&rhs)
}

/// `u ← u + x − z`.
pub fn dual_update(u: &mut [C64], x: &[C64], z: &[C64]) {
    for ((u, x), z) in u.iter_mut().zip(x).zip(z) {
        *u += x - z;
    }
}

/// Runs the loop for `cfg.iterations` rounds (or until early exit). The
/// observer sees the state after every round.
pub fn run(
    op: &dyn PrimalOperator,
    phi_h_y: &[C64],
    denoiser: &dyn Denoiser,
    cfg: &PnpConfig,
    init: Option<PnpState>,
    observer: &mut dyn FnMut(&PnpState),
) -> Result<PnpState> {
    cfg.validate()?;
    let dim = op.dim();
    if phi_h_y.len() != dim {
        return Err(Error::dim(dim, phi_h_y.len()));
    }
    let mut state = init.unwrap_or_else(|| PnpState::zeros(dim, cfg.rho));
    if state.x.len() != dim || state.z.len() != dim || state.u.len() != dim {
        return Err(Error::dim(dim, state.x.len()));
    }
    let mut inv = op.factor(state.rho)?;
    for _ in 0..cfg.iterations {
        let z_dot: Vec<C64> = state.z.iter().zip(&state.u).map(|(z, u)| z - u).collect();
        state.x = primal_update(inv.as_ref(), phi_h_y, &z_dot, state.rho);
        let x_dot: Vec<C64> = state.x.iter().zip(&state.u).map(|(x, u)| x + u).collect();
        let z = denoiser.denoise(&x_dot, cfg.sigma(state.rho))?;
        if z.len() != dim {
            return Err(Error::dim(
                format!("denoiser output of length {dim}"),
                z.len(),
            ));
        }
        state.z = z;
        dual_update(&mut state.u, &state.x, &state.z);
        let diff: Vec<C64> = state.x.iter().zip(&state.z).map(|(a, b)| a - b).collect();
        let res = norm_sqr(&diff).sqrt();
        state.residuals.push(res);
        state.iteration += 1;
        observer(&state);
        if let Some(tol) = cfg.early_exit {
            if res <= tol * norm_sqr(&state.z).sqrt() {
                break;
            }
        }
        if cfg.rho_growth > 1.0 {
            // scaled dual keeps ρu fixed when ρ changes
            let scale = 1.0 / cfg.rho_growth;
            state.u.iter_mut().for_each(|u| *u *= scale);
            state.rho *= cfg.rho_growth;
            inv = op.factor(state.rho)?;
        }
    }
    Ok(state)
}
