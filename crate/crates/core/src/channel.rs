//! Delay-Doppler channel: random path generation, Doppler-leakage kernels,
//! the truncated DD response seen by the estimator, and the effective
//! time-domain (block-diagonal under ZP) and DD-domain channel matrices.
//!
//! Doppler convention: path `i` rotates the transmitted stream (zero padding
//! included) by `e^{j2π(k_i+κ_i)(t−l_i)/(N·M_zp)}` where `M_zp = M + zp_len`
//! is the transmitted block length, so Doppler bins are `1/(N·M_zp·T_s)` wide
//! and an integer `k_i` lands on exactly one Doppler bin.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::frame::{DdGrid, FrameConfig, GridRole, TimeSignal};
use crate::linalg::{norm_sqr, CMatrix, FlopCounter, C64};

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub gain: C64,
    /// Integer delay index `l_i ∈ [0, l_max]`.
    pub delay: usize,
    /// Integer Doppler index `k_i ∈ [−k_max, k_max]`.
    pub doppler: i64,
    /// Fractional Doppler offset `κ_i ∈ [−½, ½]`.
    pub frac_doppler: f64,
}

/// How Doppler shifts are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    /// On-grid Doppler (`κ_i = 0`).
    Integer,
    /// Off-grid Doppler.
    FractionalDoppler,
    /// Off-grid Doppler plus numerically synthesized delay leakage (see
    /// [`emulate_fractional_delay`]).
    FractionalDelayDoppler,
}

impl ChannelKind {
    pub fn fractional_doppler(self) -> bool {
        !matches!(self, ChannelKind::Integer)
    }
}

/// Channel generator parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub paths: usize,
    pub l_max: usize,
    pub k_max: usize,
    /// Doppler spread bins kept per path on each side (`N_i`).
    pub truncation: usize,
    pub kind: ChannelKind,
}

impl ChannelParams {
    pub fn standard(kind: ChannelKind) -> Self {
        Self {
            paths: 5,
            l_max: 4,
            k_max: 3,
            truncation: 2,
            kind,
        }
    }

    /// `k̂_max = k_max + N_i`.
    pub fn k_hat_max(&self) -> usize {
        self.k_max + self.truncation
    }

    /// Length of the truncated response vector `L_n = (l_max+1)(2k̂_max+1)`.
    pub fn response_len(&self) -> usize {
        (self.l_max + 1) * (2 * self.k_hat_max() + 1)
    }

    pub fn sample<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<PathSet> {
        let set = sample_paths(
            rng,
            self.paths,
            self.l_max,
            self.k_max,
            self.kind.fractional_doppler(),
            self.truncation,
        )?;
        Ok(match self.kind {
            ChannelKind::FractionalDelayDoppler => emulate_fractional_delay(&set, m, rng),
            _ => set,
        })
    }
}

/// A sparse DD channel realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub paths: Vec<Path>,
    pub l_max: usize,
    pub k_max: usize,
    /// Truncation `N_i` (shared by all paths).
    pub truncation: usize,
    pub kind: ChannelKind,
}

impl PathSet {
    pub fn new(
        paths: Vec<Path>,
        l_max: usize,
        k_max: usize,
        truncation: usize,
        kind: ChannelKind,
    ) -> Result<Self> {
        for p in &paths {
            if p.delay > l_max || p.doppler.unsigned_abs() as usize > k_max {
                return Err(Error::InvalidParameter(format!(
                    "path (l={}, k={}) outside bounds l_max={l_max}, k_max={k_max}",
                    p.delay, p.doppler
                )));
            }
            if p.frac_doppler.abs() > 0.5 {
                return Err(Error::InvalidParameter(format!(
                    "fractional Doppler {} outside [-1/2, 1/2]",
                    p.frac_doppler
                )));
            }
            if kind == ChannelKind::Integer && p.frac_doppler != 0.0 {
                return Err(Error::InvalidParameter(
                    "integer-Doppler channel with nonzero fractional offset".into(),
                ));
            }
        }
        Ok(Self {
            paths,
            l_max,
            k_max,
            truncation,
            kind,
        })
    }

    /// Single on-grid path, convenient for tests and examples.
    pub fn single(gain: C64, delay: usize, doppler: i64, l_max: usize, k_max: usize) -> Self {
        Self::new(
            vec![Path {
                gain,
                delay,
                doppler,
                frac_doppler: 0.0,
            }],
            l_max,
            k_max,
            0,
            ChannelKind::Integer,
        )
        .expect("path inside bounds")
    }

    pub fn k_hat_max(&self) -> usize {
        self.k_max + self.truncation
    }

    pub fn total_power(&self) -> f64 {
        self.paths.iter().map(|p| p.gain.norm_sqr()).sum()
    }
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * s, im * s)
}

/// Draws `P` paths with uniform integer indices, `CN(0, 1/P)` gains and,
/// when `fractional`, `κ_i ~ U[−½, ½]`.
pub fn sample_paths<R: Rng + ?Sized>(
    rng: &mut R,
    p: usize,
    l_max: usize,
    k_max: usize,
    fractional: bool,
    truncation: usize,
) -> Result<PathSet> {
    if p < 1 {
        return Err(Error::InvalidParameter("path count must be >= 1".into()));
    }
    let k_max_i = i64::try_from(k_max)
        .map_err(|_| Error::InvalidParameter(format!("k_max {k_max} too large")))?;
    let paths = (0..p)
        .map(|_| {
            let gain = complex_gaussian(rng, 1.0 / p as f64);
            let delay = rng.random_range(0..=l_max);
            let doppler = rng.random_range(-k_max_i..=k_max_i);
            let frac_doppler = if fractional {
                rng.random_range(-0.5..=0.5)
            } else {
                0.0
            };
            Path {
                gain,
                delay,
                doppler,
                frac_doppler,
            }
        })
        .collect();
    let kind = if fractional {
        ChannelKind::FractionalDoppler
    } else {
        ChannelKind::Integer
    };
    PathSet::new(paths, l_max, k_max, truncation, kind)
}

/// Synthesizes fractional-delay leakage: every path is split into sub-paths
/// at delays `l_i + p`, `|p| ≤ N_i`, weighted by the delay-axis Dirichlet
/// kernel `η_M(−p, ι_i)` with `ι_i ~ U[−½, ½]`. Sub-paths falling outside
/// `[0, l_max]` are dropped. This is an emulation switch; the physical
/// generator has on-grid delays.
pub fn emulate_fractional_delay<R: Rng + ?Sized>(set: &PathSet, m: usize, rng: &mut R) -> PathSet {
    let spread = set.truncation as i64;
    let mut paths = Vec::new();
    for path in &set.paths {
        let iota: f64 = rng.random_range(-0.5..=0.5);
        for p in -spread..=spread {
            let l = path.delay as i64 + p;
            if l < 0 || l > set.l_max as i64 {
                continue;
            }
            let w = eta(-p, iota, m);
            if w.norm() == 0.0 {
                continue;
            }
            paths.push(Path {
                gain: path.gain * w,
                delay: l as usize,
                ..*path
            });
        }
    }
    PathSet {
        paths,
        kind: ChannelKind::FractionalDelayDoppler,
        ..set.clone()
    }
}

/// Doppler leakage coefficient
/// `η(q, κ) = (1 − e^{j2π(q+κ)}) / (N(1 − e^{j2π(q+κ)/N})) = (1/N)Σₙ e^{j2πn(q+κ)/N}`,
/// with the removable singularity at `q + κ ≡ 0 (mod N)` resolved to 1.
pub fn eta(q: i64, kappa: f64, n: usize) -> C64 {
    let nf = n as f64;
    if kappa == 0.0 {
        return if q.rem_euclid(n as i64) == 0 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        };
    }
    let x = q as f64 + kappa;
    let den = (PI * x / nf).sin();
    if den == 0.0 {
        return C64::new(1.0, 0.0);
    }
    // 1 − e^{jθ} = −2j·sin(θ/2)·e^{jθ/2}
    let mag = (PI * x).sin() / (nf * den);
    C64::from_polar(mag, PI * x * (nf - 1.0) / nf)
}

/// `|sin(π(k'−k_i−κ_i)) / (N sin(π(k'−k_i−κ_i)/N))|`, equal to 1 at the
/// removable singularity.
pub fn g2_magnitude(k_prime: i64, k_i: i64, kappa_i: f64, n: usize) -> f64 {
    let x = (k_prime - k_i) as f64 - kappa_i;
    let nf = n as f64;
    if kappa_i == 0.0 && (k_prime - k_i).rem_euclid(n as i64) == 0 {
        return 1.0;
    }
    if kappa_i == 0.0 {
        return 0.0;
    }
    let den = nf * (PI * x / nf).sin();
    if den == 0.0 {
        1.0
    } else {
        ((PI * x).sin() / den).abs()
    }
}

/// Truncated DD channel `𝓗 ∈ C^{(l_max+1)×(2k̂_max+1)}`; column `c` holds
/// Doppler tap `c − k̂_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedDdResponse {
    pub l_max: usize,
    pub k_hat_max: usize,
    pub grid: CMatrix,
}

impl TruncatedDdResponse {
    pub fn zeros(l_max: usize, k_hat_max: usize) -> Self {
        Self {
            l_max,
            k_hat_max,
            grid: CMatrix::zeros(l_max + 1, 2 * k_hat_max + 1),
        }
    }

    pub fn from_vec(l_max: usize, k_hat_max: usize, h: &[C64]) -> Result<Self> {
        let len = (l_max + 1) * (2 * k_hat_max + 1);
        if h.len() != len {
            return Err(Error::dim(len, h.len()));
        }
        Ok(Self {
            l_max,
            k_hat_max,
            grid: CMatrix::from_column_slice(l_max + 1, 2 * k_hat_max + 1, h),
        })
    }

    /// `h = vec(𝓗)`, delay index fastest.
    pub fn vec(&self) -> Vec<C64> {
        self.grid.as_slice().to_vec()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Tap at delay `l`, Doppler offset `k ∈ [−k̂_max, k̂_max]`.
    pub fn tap(&self, l: usize, k: i64) -> C64 {
        self.grid[(l, (k + self.k_hat_max as i64) as usize)]
    }

    pub fn nonzeros(&self) -> usize {
        self.grid.iter().filter(|z| z.norm() != 0.0).count()
    }

    /// The taps as on-grid virtual paths (zero taps skipped).
    pub fn as_virtual_paths(&self) -> PathSet {
        let mut paths = Vec::new();
        for c in 0..self.grid.ncols() {
            for l in 0..self.grid.nrows() {
                let g = self.grid[(l, c)];
                if g.norm() != 0.0 {
                    paths.push(Path {
                        gain: g,
                        delay: l,
                        doppler: c as i64 - self.k_hat_max as i64,
                        frac_doppler: 0.0,
                    });
                }
            }
        }
        PathSet {
            paths,
            l_max: self.l_max,
            k_max: self.k_hat_max,
            truncation: 0,
            kind: ChannelKind::Integer,
        }
    }
}

/// `𝓗[l_i, k̂_max + k_i − q] += h_i·η(q, κ_i)` for `q ∈ [−N_i, N_i]`; the
/// intra-frame phase rotation is not part of the truncated response.
pub fn build_truncated_response(paths: &PathSet, cfg: &FrameConfig) -> Result<TruncatedDdResponse> {
    let k_hat = paths.k_hat_max();
    if 2 * k_hat + 1 > cfg.n {
        return Err(Error::InvalidParameter(format!(
            "truncated Doppler support 2·{k_hat}+1 exceeds N={}",
            cfg.n
        )));
    }
    let mut out = TruncatedDdResponse::zeros(paths.l_max, k_hat);
    let ni = paths.truncation as i64;
    for p in &paths.paths {
        for q in -ni..=ni {
            let w = eta(q, p.frac_doppler, cfg.n);
            if w.norm() == 0.0 {
                continue;
            }
            let col = (k_hat as i64 + p.doppler - q) as usize;
            out.grid[(p.delay, col)] += p.gain * w;
        }
    }
    Ok(out)
}

/// Block-diagonal time-domain channel `H_T = diag{H_1, …, H_N}` after ZP
/// removal.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannelTime {
    pub m: usize,
    pub blocks: Vec<CMatrix>,
}

impl EffectiveChannelTime {
    pub fn n(&self) -> usize {
        self.blocks.len()
    }

    pub fn frobenius_sqr(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm_squared()).sum()
    }

    /// `H_T x_T`.
    pub fn apply(&self, x_t: &[C64]) -> Vec<C64> {
        let mut out = Vec::with_capacity(x_t.len());
        for (b, chunk) in self.blocks.iter().zip(x_t.chunks(self.m)) {
            out.extend(crate::linalg::mat_vec(b, chunk));
        }
        out
    }

    /// `H_Tᴴ v`.
    pub fn apply_adjoint(&self, v: &[C64]) -> Vec<C64> {
        let mut out = Vec::with_capacity(v.len());
        for (b, chunk) in self.blocks.iter().zip(v.chunks(self.m)) {
            out.extend(crate::linalg::adjoint_mul(b, chunk));
        }
        out
    }

    pub fn dense(&self) -> CMatrix {
        let mn = self.m * self.n();
        let mut d = CMatrix::zeros(mn, mn);
        for (i, b) in self.blocks.iter().enumerate() {
            d.view_mut((i * self.m, i * self.m), (self.m, self.m))
                .copy_from(b);
        }
        d
    }
}

/// Builds `H_T`: `(H_n)[p, p−l_i] += h_i·e^{j2π(k_i+κ_i)(n·M_zp + p − l_i)/(N·M_zp)}`.
pub fn build_time_channel(paths: &PathSet, cfg: &FrameConfig) -> Result<EffectiveChannelTime> {
    cfg.check_delay_spread(paths.l_max)?;
    let (m, n) = (cfg.m, cfg.n);
    let mzp = cfg.block_len();
    let frame = (n * mzp) as f64;
    let mut blocks = vec![CMatrix::zeros(m, m); n];
    for path in &paths.paths {
        let nu = path.doppler as f64 + path.frac_doppler;
        for (nb, block) in blocks.iter_mut().enumerate() {
            for p in path.delay..m {
                let t = (nb * mzp + p - path.delay) as f64;
                block[(p, p - path.delay)] += path.gain * C64::from_polar(1.0, 2.0 * PI * nu * t / frame);
            }
        }
    }
    Ok(EffectiveChannelTime { m, blocks })
}

/// Passes a zero-padded transmitted stream through the linear time-varying
/// channel sample by sample. Delayed energy beyond the frame is lost.
pub fn apply_stream(paths: &PathSet, cfg: &FrameConfig, tx: &TimeSignal) -> Result<TimeSignal> {
    if !tx.zero_padded {
        return Err(Error::InvalidParameter("stream model expects a zero-padded signal".into()));
    }
    cfg.check_delay_spread(paths.l_max)?;
    let frame = (cfg.n * cfg.block_len()) as f64;
    let len = tx.samples.len();
    let mut rx = vec![C64::new(0.0, 0.0); len];
    for path in &paths.paths {
        let nu = path.doppler as f64 + path.frac_doppler;
        for t in path.delay..len {
            let src = t - path.delay;
            rx[t] += path.gain * C64::from_polar(1.0, 2.0 * PI * nu * src as f64 / frame) * tx.samples[src];
        }
    }
    Ok(TimeSignal {
        samples: rx,
        zero_padded: true,
    })
}

/// DD-domain effective channel `H_DD = (F_N ⊗ I_M) H_T (F_Nᴴ ⊗ I_M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannelDd {
    pub m: usize,
    pub n: usize,
    pub dense: CMatrix,
}

impl EffectiveChannelDd {
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        crate::linalg::mat_vec(&self.dense, x)
    }

    pub fn frobenius_sqr(&self) -> f64 {
        self.dense.norm_squared()
    }
}

/// Dense `H_DD`, assembled blockwise: block `(a, b) = Σ_n F[a,n]·H_n·conj(F[b,n])`.
pub fn build_dd_channel(h_t: &EffectiveChannelTime, cfg: &FrameConfig) -> Result<EffectiveChannelDd> {
    if h_t.m != cfg.m || h_t.n() != cfg.n {
        return Err(Error::dim(
            format!("{}x{} blocks", cfg.m, cfg.n),
            format!("{}x{}", h_t.m, h_t.n()),
        ));
    }
    let (m, n) = (cfg.m, cfg.n);
    let f = crate::linalg::dft_matrix(n);
    let mut dense = CMatrix::zeros(m * n, m * n);
    for a in 0..n {
        for b in 0..n {
            let mut view = dense.view_mut((a * m, b * m), (m, m));
            for (t, block) in h_t.blocks.iter().enumerate() {
                let w = f[(a, t)] * f[(b, t)].conj();
                view.zip_apply(block, |d, h| *d += w * h);
            }
        }
    }
    Ok(EffectiveChannelDd { m, n, dense })
}

/// `H_DD x` evaluated as `(F_N ⊗ I)·H_T·(F_Nᴴ ⊗ I)·x` without forming `H_DD`.
pub fn apply_dd_structured(h_t: &EffectiveChannelTime, cfg: &FrameConfig, x: &[C64]) -> Vec<C64> {
    let dft = cfg.dft_n();
    let mut flops = FlopCounter::default();
    let xt = dft.apply_kron_identity(x, cfg.m, true, &mut flops);
    let yt = h_t.apply(&xt);
    dft.apply_kron_identity(&yt, cfg.m, false, &mut flops)
}

/// Noise added to every entry of `H_DD` so that `E‖E‖²_F = ε‖H‖²_F`:
/// `E_ij ~ CN(0, ε‖H‖²_F/(MN)²)`.
pub fn perturb_channel<R: Rng + ?Sized>(
    h_dd: &EffectiveChannelDd,
    epsilon: f64,
    rng: &mut R,
) -> Result<EffectiveChannelDd> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be >= 0, got {epsilon}")));
    }
    if epsilon == 0.0 {
        return Ok(h_dd.clone());
    }
    let mn = (h_dd.m * h_dd.n) as f64;
    let var = epsilon * h_dd.frobenius_sqr() / (mn * mn);
    let mut out = h_dd.clone();
    out.dense.iter_mut().for_each(|z| *z += complex_gaussian(rng, var));
    Ok(out)
}

/// Per-DD-sample variance of the interference `E·x` for unit-energy symbols.
pub fn csi_error_variance(h_dd_frobenius_sqr: f64, epsilon: f64, mn: usize) -> f64 {
    epsilon * h_dd_frobenius_sqr / mn as f64
}

/// Which Doppler leakage terms the scalar oracle sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeakageSum {
    /// All `q ∈ [0, N−1]`: exact for the time-domain model.
    Full,
    /// `q ∈ [−N_i, N_i]`: the truncated-response approximation.
    Truncated,
}

/// Noiseless DD-domain output by direct summation:
///
/// `y[l,k] = Σ_i 1{l ≥ l_i}·h_i·e^{j2π(l−l_i)(k_i+κ_i)/(N·M_zp)} Σ_q η(q,κ_i)·x[l−l_i, [k−k_i+q]_N]`.
///
/// The indicator reflects zero padding (no delay wrap-around). With
/// `with_phase = false` the intra-frame phase factor is dropped, which is the
/// model the pilot measurement matrix assumes.
pub fn scalar_io_oracle(
    paths: &PathSet,
    x: &DdGrid,
    cfg: &FrameConfig,
    sum: LeakageSum,
    with_phase: bool,
) -> Result<DdGrid> {
    cfg.check_grid(&x.data)?;
    let (m, n) = (cfg.m, cfg.n as i64);
    let frame = (cfg.n * cfg.block_len()) as f64;
    let qs: Vec<i64> = match sum {
        LeakageSum::Full => (0..n).collect(),
        LeakageSum::Truncated => (-(paths.truncation as i64)..=paths.truncation as i64).collect(),
    };
    let mut y = DdGrid::zeros(cfg, GridRole::Received);
    for path in &paths.paths {
        let nu = path.doppler as f64 + path.frac_doppler;
        let etas: Vec<(i64, C64)> = qs.iter().map(|&q| (q, eta(q, path.frac_doppler, cfg.n))).collect();
        for l in path.delay..m {
            let phase = if with_phase {
                C64::from_polar(1.0, 2.0 * PI * (l - path.delay) as f64 * nu / frame)
            } else {
                C64::new(1.0, 0.0)
            };
            let coeff = path.gain * phase;
            for k in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for &(q, e) in &etas {
                    let src_k = (k - path.doppler + q).rem_euclid(n) as usize;
                    acc += e * x.data[(l - path.delay, src_k)];
                }
                y.data[(l, k as usize)] += coeff * acc;
            }
        }
    }
    Ok(y)
}

/// Bi-orthogonal-pulse relation: a 2D circular (twisted) convolution
/// `y[l,k] = Σ_i Σ_q h_i·e^{−j2πl_i(k_i+κ_i)/(MN)}·η(q,κ_i)·x[[l−l_i]_M, [k−k_i+q]_N]`.
pub fn scalar_io_oracle_biorthogonal(paths: &PathSet, x: &DdGrid, cfg: &FrameConfig) -> Result<DdGrid> {
    cfg.check_grid(&x.data)?;
    let (m, n) = (cfg.m as i64, cfg.n as i64);
    let mut y = DdGrid::zeros(cfg, GridRole::Received);
    for path in &paths.paths {
        let nu = path.doppler as f64 + path.frac_doppler;
        let g = path.gain * C64::from_polar(1.0, -2.0 * PI * path.delay as f64 * nu / (m * n) as f64);
        for q in 0..n {
            let e = eta(q, path.frac_doppler, cfg.n);
            if e.norm() == 0.0 {
                continue;
            }
            for l in 0..m {
                for k in 0..n {
                    let sl = (l - path.delay as i64).rem_euclid(m) as usize;
                    let sk = (k - path.doppler + q).rem_euclid(n) as usize;
                    y.data[(l as usize, k as usize)] += g * e * x.data[(sl, sk)];
                }
            }
        }
    }
    Ok(y)
}

/// Serializable channel realization: the seed it was drawn from plus the
/// resulting path list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRecord {
    pub seed: u64,
    pub params: ChannelParams,
    pub paths: PathSet,
}

pub fn total_energy(v: &[C64]) -> f64 {
    norm_sqr(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{modulate, demodulate, strip_zero_padding};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_grid(cfg: &FrameConfig, rng: &mut ChaCha8Rng) -> DdGrid {
        DdGrid::from_matrix(
            CMatrix::from_fn(cfg.m, cfg.n, |_, _| complex_gaussian(rng, 1.0)),
            GridRole::Symbols,
        )
    }

    #[test]
    fn sample_paths_respects_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let s = sample_paths(&mut rng, 5, 4, 3, false, 2).unwrap();
            assert_eq!(s.paths.len(), 5);
            for p in &s.paths {
                assert!(p.delay <= 4);
                assert!((-3..=3).contains(&p.doppler));
                assert_eq!(p.frac_doppler, 0.0);
            }
        }
        let f = sample_paths(&mut rng, 5, 4, 3, true, 2).unwrap();
        assert!(f.paths.iter().all(|p| p.frac_doppler.abs() <= 0.5));
        assert!(sample_paths(&mut rng, 0, 4, 3, false, 2).is_err());
    }

    #[test]
    fn path_power_is_unit_on_average() {
        // Monte-Carlo oracle: E Σ|h_i|² = P · (1/P) = 1.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let trials = 100_000;
        let mean: f64 = (0..trials)
            .map(|_| sample_paths(&mut rng, 5, 4, 3, false, 2).unwrap().total_power())
            .sum::<f64>()
            / trials as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean power {mean}");
    }

    #[test]
    fn eta_limits_and_parseval() {
        assert_eq!(eta(0, 0.0, 20), C64::new(1.0, 0.0));
        assert_eq!(eta(20, 0.0, 20), C64::new(1.0, 0.0));
        for q in 1..20 {
            assert_eq!(eta(q, 0.0, 20), C64::new(0.0, 0.0));
        }
        let s: f64 = (0..20).map(|q| eta(q, 0.3, 20).norm_sqr()).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eta_matches_geometric_sum() {
        for &kappa in &[0.1, -0.37, 0.5, -0.5, 1e-9] {
            for q in -5..5 {
                let n = 16;
                let direct: C64 = (0..n)
                    .map(|t| C64::from_polar(1.0, 2.0 * PI * t as f64 * (q as f64 + kappa) / n as f64))
                    .sum::<C64>()
                    / n as f64;
                assert!((direct - eta(q, kappa, n)).norm() < 1e-12, "q={q} kappa={kappa}");
            }
        }
    }

    #[test]
    fn g2_magnitude_values() {
        assert_eq!(g2_magnitude(2, 2, 0.0, 20), 1.0);
        assert_eq!(g2_magnitude(7, 2, 0.0, 20), 0.0);
        let v = g2_magnitude(1, 1, 0.5, 20);
        // geometric-series oracle for |(1/N) Σ e^{-j2π n x/N}|, x = -0.5
        let direct: C64 = (0..20)
            .map(|t| C64::from_polar(1.0, -2.0 * PI * t as f64 * (-0.5) / 20.0))
            .sum::<C64>()
            / 20.0;
        assert!((v - direct.norm()).abs() < 1e-12);
        assert!((v - 0.637_27).abs() < 1e-4);
    }

    #[test]
    fn g2_main_lobe_holds_most_energy() {
        for i in 0..=100 {
            let kappa = -0.5 + i as f64 / 100.0;
            let total: f64 = (-10..10).map(|k| g2_magnitude(k, 0, kappa, 20).powi(2)).sum();
            let lobe: f64 = (-2..=2).map(|k| g2_magnitude(k, 0, kappa, 20).powi(2)).sum();
            let peak = (-10..10)
                .max_by(|a, b| {
                    g2_magnitude(*a, 0, kappa, 20)
                        .partial_cmp(&g2_magnitude(*b, 0, kappa, 20))
                        .unwrap()
                })
                .unwrap();
            // The 5-bin window around k_i keeps ≥ 95% only up to |κ| ≈ 0.3;
            // the worst case (κ = ±½) is ≈ 92.1%.
            let floor = if kappa.abs() <= 0.25 { 0.95 } else { 0.92 };
            assert!(lobe / total >= floor, "kappa {kappa}: {}", lobe / total);
            assert!((peak as f64 - kappa).abs() <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn truncated_response_integer_single_tap() {
        let cfg = FrameConfig::standard();
        let mut set = PathSet::single(C64::new(1.0, 0.0), 2, 1, 4, 3);
        set.truncation = 2;
        let h = build_truncated_response(&set, &cfg).unwrap();
        assert_eq!(h.nonzeros(), 1);
        assert_eq!(h.grid[(2, 5 + 1)], C64::new(1.0, 0.0));
    }

    #[test]
    fn truncated_response_fractional_band() {
        let cfg = FrameConfig::standard();
        let set = PathSet::new(
            vec![Path { gain: C64::new(1.0, 0.0), delay: 1, doppler: -1, frac_doppler: 0.4 }],
            4,
            3,
            2,
            ChannelKind::FractionalDoppler,
        )
        .unwrap();
        let h = build_truncated_response(&set, &cfg).unwrap();
        assert_eq!(h.nonzeros(), 5);
        for q in -2i64..=2 {
            let tap = h.tap(1, -1 - q);
            assert!((tap.norm_sqr() - eta(q, 0.4, 20).norm_sqr()).abs() < 1e-15);
        }
    }

    #[test]
    fn integer_response_is_burst_sparse() {
        let cfg = FrameConfig::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let s = sample_paths(&mut rng, 5, 4, 3, false, 2).unwrap();
            assert!(build_truncated_response(&s, &cfg).unwrap().nonzeros() <= 5);
        }
    }

    #[test]
    fn truncation_must_fit_grid() {
        let cfg = FrameConfig::new(8, 8, 4, 4).unwrap();
        let set = PathSet::new(vec![], 4, 3, 2, ChannelKind::FractionalDoppler).unwrap();
        assert!(build_truncated_response(&set, &cfg).is_err());
    }

    #[test]
    fn time_channel_identity_and_shift() {
        let cfg = FrameConfig::new(6, 4, 2, 4).unwrap();
        let id = build_time_channel(&PathSet::single(C64::new(1.0, 0.0), 0, 0, 2, 1), &cfg).unwrap();
        for b in &id.blocks {
            assert_eq!(*b, CMatrix::identity(6, 6));
        }
        let sh = build_time_channel(&PathSet::single(C64::new(1.0, 0.0), 1, 0, 2, 1), &cfg).unwrap();
        for b in &sh.blocks {
            for i in 0..6 {
                for j in 0..6 {
                    let e = if i == j + 1 { 1.0 } else { 0.0 };
                    assert_eq!(b[(i, j)], C64::new(e, 0.0));
                }
            }
        }
    }

    #[test]
    fn zp_too_short_is_rejected() {
        let cfg = FrameConfig::new(6, 4, 1, 4).unwrap();
        let set = PathSet::single(C64::new(1.0, 0.0), 2, 0, 2, 1);
        assert!(build_time_channel(&set, &cfg).is_err());
    }

    #[test]
    fn stream_channel_matches_block_model() {
        let cfg = FrameConfig::new(8, 8, 3, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut set = sample_paths(&mut rng, 4, 3, 2, true, 1).unwrap();
        set.truncation = 1;
        let x = rand_grid(&cfg, &mut rng);
        let tx = modulate(&x, &cfg, true).unwrap();
        let rx = strip_zero_padding(&apply_stream(&set, &cfg, &tx).unwrap(), &cfg).unwrap();
        let h_t = build_time_channel(&set, &cfg).unwrap();
        let xt = modulate(&x, &cfg, false).unwrap();
        let yt = h_t.apply(&xt.samples);
        for (a, b) in rx.samples.iter().zip(&yt) {
            assert!((a - b).norm() < 1e-12);
        }
        // block-diagonality: dense form has no cross-block entries
        let d = h_t.dense();
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                if i / cfg.m != j / cfg.m {
                    assert_eq!(d[(i, j)], C64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn matrix_chain_matches_scalar_oracle() {
        let cfg = FrameConfig::new(8, 8, 3, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..10 {
            let set = sample_paths(&mut rng, 3, 3, 2, true, 1).unwrap();
            let x = rand_grid(&cfg, &mut rng);
            let h_dd = build_dd_channel(&build_time_channel(&set, &cfg).unwrap(), &cfg).unwrap();
            let y = h_dd.apply(&x.vec());
            let oracle = scalar_io_oracle(&set, &x, &cfg, LeakageSum::Full, true).unwrap();
            let err: f64 = y.iter().zip(oracle.data.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
            assert!((err / oracle.energy()).sqrt() < 1e-9);
        }
    }

    #[test]
    fn dd_channel_identity_structured_and_norm() {
        let cfg = FrameConfig::new(4, 4, 2, 4).unwrap();
        let id = build_time_channel(&PathSet::single(C64::new(1.0, 0.0), 0, 0, 2, 1), &cfg).unwrap();
        let h = build_dd_channel(&id, &cfg).unwrap();
        assert!((h.dense.clone() - CMatrix::identity(16, 16)).norm() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let set = sample_paths(&mut rng, 3, 2, 1, true, 0).unwrap();
        let h_t = build_time_channel(&set, &cfg).unwrap();
        let h_dd = build_dd_channel(&h_t, &cfg).unwrap();
        let x = rand_grid(&cfg, &mut rng).vec();
        let a = h_dd.apply(&x);
        let b = apply_dd_structured(&h_t, &cfg, &x);
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).norm() < 1e-12);
        }
        assert!((h_dd.frobenius_sqr() - h_t.frobenius_sqr()).abs() < 1e-10);
    }

    #[test]
    fn single_tap_channel_is_transparent() {
        let cfg = FrameConfig::new(4, 4, 1, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = rand_grid(&cfg, &mut rng);
        let set = PathSet::single(C64::new(1.0, 0.0), 0, 0, 1, 1);
        let tx = modulate(&x, &cfg, true).unwrap();
        let rx = strip_zero_padding(&apply_stream(&set, &cfg, &tx).unwrap(), &cfg).unwrap();
        let y = demodulate(&rx, &cfg).unwrap();
        let oracle = scalar_io_oracle(&set, &x, &cfg, LeakageSum::Full, true).unwrap();
        for ((a, b), c) in y.data.iter().zip(x.data.iter()).zip(oracle.data.iter()) {
            assert!((a - b).norm() < 1e-12);
            assert!((c - b).norm() < 1e-12);
        }
    }

    #[test]
    fn biorthogonal_integer_case_is_circular_convolution() {
        let cfg = FrameConfig::new(6, 5, 2, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let set = sample_paths(&mut rng, 3, 2, 2, false, 0).unwrap();
        let x = rand_grid(&cfg, &mut rng);
        let y = scalar_io_oracle_biorthogonal(&set, &x, &cfg).unwrap();
        // tap grid with the per-path phase folded into the gain
        let mut taps = CMatrix::zeros(6, 5);
        for p in &set.paths {
            let g = p.gain * C64::from_polar(1.0, -2.0 * PI * (p.delay as f64) * p.doppler as f64 / 30.0);
            taps[(p.delay, p.doppler.rem_euclid(5) as usize)] += g;
        }
        for l in 0..6 {
            for k in 0..5 {
                let mut s = C64::new(0.0, 0.0);
                for a in 0..6 {
                    for b in 0..5 {
                        s += taps[(a, b)] * x.data[((l + 6 - a) % 6, (k + 5 - b) % 5)];
                    }
                }
                assert!((s - y.data[(l, k)]).norm() < 1e-12);
            }
        }
        // identity channel
        let id = PathSet::single(C64::new(1.0, 0.0), 0, 0, 2, 2);
        let yi = scalar_io_oracle(&id, &x, &cfg, LeakageSum::Full, true).unwrap();
        assert!((yi.data - x.data.clone()).norm() < 1e-12);
    }

    #[test]
    fn perturbation_energy_matches_epsilon() {
        let cfg = FrameConfig::new(4, 4, 2, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let set = sample_paths(&mut rng, 3, 2, 1, false, 0).unwrap();
        let h = build_dd_channel(&build_time_channel(&set, &cfg).unwrap(), &cfg).unwrap();
        assert_eq!(perturb_channel(&h, 0.0, &mut rng).unwrap(), h);
        let draws = 1000;
        let mean: f64 = (0..draws)
            .map(|_| {
                let p = perturb_channel(&h, 1e-2, &mut rng).unwrap();
                (p.dense - h.dense.clone()).norm_squared() / h.frobenius_sqr()
            })
            .sum::<f64>()
            / draws as f64;
        assert!((mean - 1e-2).abs() < 5e-4, "mean {mean}");
        assert!(perturb_channel(&h, -1.0, &mut rng).is_err());
    }

    #[test]
    fn fractional_delay_emulation_spreads_along_delay() {
        let cfg = FrameConfig::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let base = PathSet::new(
            vec![Path { gain: C64::new(1.0, 0.0), delay: 2, doppler: 0, frac_doppler: 0.2 }],
            4,
            3,
            2,
            ChannelKind::FractionalDoppler,
        )
        .unwrap();
        let e = emulate_fractional_delay(&base, cfg.m, &mut rng);
        assert_eq!(e.kind, ChannelKind::FractionalDelayDoppler);
        assert_eq!(e.paths.len(), 5);
        let delays: Vec<usize> = e.paths.iter().map(|p| p.delay).collect();
        assert_eq!(delays, vec![0, 1, 2, 3, 4]);
        let h = build_truncated_response(&e, &cfg).unwrap();
        assert!(h.nonzeros() > 5);
    }
}
