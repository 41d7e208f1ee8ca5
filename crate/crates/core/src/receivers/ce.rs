//! Channel estimators on the pilot model `y_obs = Φh + n`.

use serde::{Deserialize, Serialize};

use crate::denoise::{adaptive_threshold, SoftThreshold};
use crate::error::{Error, Result};
use crate::linalg::{nmse, CMatrix, Cholesky, FlopCounter, C64};
use crate::pnp::{self, Denoiser, DenseOperator, PnpConfig, PrimalOperator};

/// Ridge used by the least-squares estimators for conditioning.
pub const LS_RIDGE: f64 = 1e-12;

/// Estimate plus optional per-iteration NMSE against a supplied truth.
#[derive(Debug, Clone, PartialEq)]
pub struct CeResult {
    pub h: Vec<C64>,
    pub nmse_trace: Vec<f64>,
    pub iterations: usize,
}

/// Which ADMM variable is reported as the estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CeOutput {
    /// The primal iterate `x` (data-consistent).
    #[default]
    Primal,
    /// The denoiser output `z`.
    Denoised,
}

/// How the ℓ1 shrinkage threshold is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy", content = "value")]
pub enum ThresholdPolicy {
    Fixed(f64),
    /// `τ = c·σ_x·√(2 ln L_n)` with `σ_x` the per-tap noise level of the
    /// regularized LS iterate.
    Adaptive(f64),
}

/// `Φ` with its Gram matrix cached; all estimators share it.
#[derive(Debug, Clone)]
pub struct ChannelEstimator {
    op: DenseOperator,
}

impl ChannelEstimator {
    pub fn new(phi: CMatrix) -> Self {
        Self { op: DenseOperator::new(phi) }
    }

    pub fn phi(&self) -> &CMatrix {
        &self.op.phi
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    fn check(&self, y: &[C64]) -> Result<()> {
        if y.len() != self.op.phi.nrows() {
            return Err(Error::dim(self.op.phi.nrows(), y.len()));
        }
        Ok(())
    }

    fn ridge(&self, y: &[C64], rho: f64) -> Result<Vec<C64>> {
        self.check(y)?;
        let inv = self.op.factor(rho)?;
        Ok(inv.solve(&self.op.adjoint(y)))
    }

    /// `(ΦᴴΦ + 10⁻¹²I)⁻¹Φᴴy`.
    pub fn ls(&self, y: &[C64]) -> Result<Vec<C64>> {
        self.ridge(y, LS_RIDGE)
    }

    /// `C Φᴴ(ΦCΦᴴ + σ²I)⁻¹y` with `C = c·I`, evaluated as
    /// `(ΦᴴΦ + (σ²/c)I)⁻¹Φᴴy`.
    pub fn lmmse(&self, y: &[C64], noise_var: f64, prior_var: f64) -> Result<Vec<C64>> {
        if !(prior_var > 0.0) || !(noise_var >= 0.0) {
            return Err(Error::InvalidParameter("LMMSE needs prior_var > 0 and noise_var >= 0".into()));
        }
        self.ridge(y, (noise_var / prior_var).max(LS_RIDGE))
    }

    /// Per-tap standard deviation of `(ΦᴴΦ + ρI)⁻¹Φᴴn` for white `n` of
    /// variance `noise_var`: `√(σ²·tr(A G A)/L_n)`, `A = (G + ρI)⁻¹`.
    pub fn primal_noise_std(&self, noise_var: f64, rho: f64) -> Result<f64> {
        let n = self.dim();
        let mut g = self.op.phi.adjoint() * &self.op.phi;
        let gram = g.clone();
        for i in 0..n {
            g[(i, i)] += rho;
        }
        let chol = Cholesky::factor(&g, &mut FlopCounter::default())?;
        let mut a = CMatrix::identity(n, n);
        for j in 0..n {
            let col = chol.solve(a.column(j).as_slice(), &mut FlopCounter::default());
            a.set_column(j, &nalgebra::DVector::from_vec(col));
        }
        let tr = (&a * gram * &a).trace().re;
        Ok((noise_var * tr / n as f64).sqrt())
    }

    pub fn threshold(&self, policy: ThresholdPolicy, noise_var: f64, rho: f64) -> Result<f64> {
        Ok(match policy {
            ThresholdPolicy::Fixed(t) => t,
            ThresholdPolicy::Adaptive(c) => adaptive_threshold(self.primal_noise_std(noise_var, rho)?, self.dim(), c),
        })
    }

    /// Generic PnP run: primal → denoise → dual.
    pub fn pnp(
        &self,
        y: &[C64],
        denoiser: &dyn Denoiser,
        cfg: &PnpConfig,
        output: CeOutput,
        truth: Option<&[C64]>,
    ) -> Result<CeResult> {
        self.check(y)?;
        let mut trace = Vec::new();
        let pick = |s: &pnp::PnpState| match output {
            CeOutput::Primal => s.x.clone(),
            CeOutput::Denoised => s.z.clone(),
        };
        let state = pnp::run(&self.op, &self.op.adjoint(y), denoiser, cfg, None, &mut |s| {
            if let Some(t) = truth {
                trace.push(nmse(&pick(s), t));
            }
        })?;
        Ok(CeResult {
            h: pick(&state),
            nmse_trace: trace,
            iterations: state.iteration,
        })
    }

    /// ADMM with soft-thresholding; `τ` is the shrinkage applied to `x + u`.
    pub fn admm_l1(
        &self,
        y: &[C64],
        tau: f64,
        cfg: &PnpConfig,
        output: CeOutput,
        truth: Option<&[C64]>,
    ) -> Result<CeResult> {
        self.pnp(y, &SoftThreshold { tau }, cfg, output, truth)
    }
}
