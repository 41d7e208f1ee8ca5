//! `W⁻¹ = (Ĥ_DDᴴĤ_DD + ρI)⁻¹` evaluated through the block-diagonal
//! time-domain channel: since `Ĥ_DD = (F_N⊗I)Ĥ_T(F_Nᴴ⊗I)` with a unitary
//! outer transform,
//!
//! `W⁻¹v = (F_N⊗I_M)·blockdiag(C_n⁻¹)·(F_Nᴴ⊗I_M)·v`, `C_n = Ĥ_nᴴĤ_n + ρI_M`.

use crate::channel::EffectiveChannelTime;
use crate::error::{Error, Result};
use crate::frame::FrameConfig;
use crate::linalg::{gram, Cholesky, FlopCounter, UnitaryDft, C64};
use crate::pnp::{PrimalOperator, RegularizedInverse};

/// Structured `Ĥ_DD` backed by its time-domain blocks.
#[derive(Debug, Clone)]
pub struct StructuredChannel {
    pub h_t: EffectiveChannelTime,
    dft: UnitaryDft,
}

impl StructuredChannel {
    pub fn new(h_t: EffectiveChannelTime, cfg: &FrameConfig) -> Result<Self> {
        if h_t.m != cfg.m || h_t.n() != cfg.n {
            return Err(Error::dim(format!("{}x{} blocks", cfg.m, cfg.n), format!("{}x{}", h_t.m, h_t.n())));
        }
        Ok(Self { h_t, dft: cfg.dft_n() })
    }

    pub fn m(&self) -> usize {
        self.h_t.m
    }

    /// `Ĥ_DD x`.
    pub fn apply(&self, x: &[C64], flops: &mut FlopCounter) -> Vec<C64> {
        let xt = self.dft.apply_kron_identity(x, self.m(), true, flops);
        let yt = self.h_t.apply(&xt);
        self.dft.apply_kron_identity(&yt, self.m(), false, flops)
    }

    /// `Ĥ_DDᴴ y`.
    pub fn adjoint(&self, y: &[C64], flops: &mut FlopCounter) -> Vec<C64> {
        let yt = self.dft.apply_kron_identity(y, self.m(), true, flops);
        let xt = self.h_t.apply_adjoint(&yt);
        self.dft.apply_kron_identity(&xt, self.m(), false, flops)
    }

    pub fn block_inverse(&self, rho: f64, flops: &mut FlopCounter) -> Result<BlockInverse> {
        BlockInverse::new(self, rho, flops)
    }
}

/// Per-block Cholesky factors of `C_n`.
#[derive(Debug, Clone)]
pub struct BlockInverse {
    blocks: Vec<Cholesky>,
    dft: UnitaryDft,
    m: usize,
}

impl BlockInverse {
    pub fn new(ch: &StructuredChannel, rho: f64, flops: &mut FlopCounter) -> Result<Self> {
        if rho < 0.0 || !rho.is_finite() {
            return Err(Error::InvalidParameter(format!("rho must be >= 0, got {rho}")));
        }
        let blocks = ch
            .h_t
            .blocks
            .iter()
            .map(|b| {
                let mut c = gram(b, flops);
                for i in 0..c.nrows() {
                    c[(i, i)] += rho;
                }
                Cholesky::factor(&c, flops)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { blocks, dft: ch.dft.clone(), m: ch.m() })
    }

    pub fn solve_counted(&self, v: &[C64], flops: &mut FlopCounter) -> Vec<C64> {
        let mut t = self.dft.apply_kron_identity(v, self.m, true, flops);
        for (chol, chunk) in self.blocks.iter().zip(t.chunks_mut(self.m)) {
            chol.solve_in_place(chunk, flops);
        }
        self.dft.apply_kron_identity(&t, self.m, false, flops)
    }
}

impl RegularizedInverse for BlockInverse {
    fn solve(&self, rhs: &[C64]) -> Vec<C64> {
        self.solve_counted(rhs, &mut FlopCounter::default())
    }
}

impl PrimalOperator for StructuredChannel {
    fn dim(&self) -> usize {
        self.m() * self.h_t.n()
    }

    fn factor(&self, rho: f64) -> Result<Box<dyn RegularizedInverse + '_>> {
        Ok(Box::new(self.block_inverse(rho, &mut FlopCounter::default())?))
    }
}

/// Flops of building `W⁻¹` and applying it once, structured and dense.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionCost {
    pub structured: u64,
    pub dense: u64,
}

impl InversionCost {
    pub fn ratio(&self) -> f64 {
        self.dense as f64 / self.structured as f64
    }
}

/// Meters both paths on the same channel and right-hand side; also returns
/// the relative difference of the two solutions.
pub fn measure_inversion(
    ch: &StructuredChannel,
    cfg: &FrameConfig,
    rho: f64,
    v: &[C64],
) -> Result<(InversionCost, f64)> {
    let mut fs = FlopCounter::default();
    let inv = ch.block_inverse(rho, &mut fs)?;
    let xs = inv.solve_counted(v, &mut fs);

    let h_dd = crate::channel::build_dd_channel(&ch.h_t, cfg)?;
    let mut fd = FlopCounter::default();
    let mut g = gram(&h_dd.dense, &mut fd);
    for i in 0..g.nrows() {
        g[(i, i)] += rho;
    }
    let chol = Cholesky::factor(&g, &mut fd)?;
    let xd = chol.solve(v, &mut fd);
    let err = crate::linalg::nmse(&xs, &xd).sqrt();
    Ok((InversionCost { structured: fs.0, dense: fd.0 }, err))
}
