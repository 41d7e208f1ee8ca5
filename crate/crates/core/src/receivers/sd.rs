//! Symbol detection on `y_DD = Ĥ_DD x_DD + n̂_DD`.

use super::block_inverse::StructuredChannel;
use crate::error::{Error, Result};
use crate::frame::Constellation;
use crate::linalg::{FlopCounter, C64};
use crate::pnp::{self, Denoiser, DenseOperator, PnpConfig, PrimalOperator};

/// Ridge used by the LS equalizer.
pub const LS_RIDGE: f64 = 1e-12;

/// The channel the detector believes in.
#[derive(Debug, Clone)]
pub enum SdChannel {
    /// Block-diagonal time-domain form (exact or virtual-path estimate).
    Structured(StructuredChannel),
    /// Arbitrary dense `Ĥ_DD`, e.g. after a CSI perturbation.
    Dense(DenseOperator),
}

impl SdChannel {
    fn op(&self) -> &dyn PrimalOperator {
        match self {
            SdChannel::Structured(s) => s,
            SdChannel::Dense(d) => d,
        }
    }

    fn adjoint(&self, y: &[C64]) -> Vec<C64> {
        match self {
            SdChannel::Structured(s) => s.adjoint(y, &mut FlopCounter::default()),
            SdChannel::Dense(d) => d.adjoint(y),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdResult {
    /// Estimate before the hard decision.
    pub soft: Vec<C64>,
    pub decisions: Vec<usize>,
    pub bits: Vec<u8>,
    pub iterations: usize,
    /// BER of the hard decisions on `z` after each iteration (when truth is
    /// supplied to [`Detector::pnp`]).
    pub ber_trace: Vec<f64>,
}

impl SdResult {
    fn from_soft(soft: Vec<C64>, c: &Constellation, iterations: usize, ber_trace: Vec<f64>) -> Self {
        let decisions: Vec<usize> = soft.iter().map(|&z| c.nearest(z)).collect();
        let bits = indices_to_bits(&decisions, c);
        Self { soft, decisions, bits, iterations, ber_trace }
    }

    pub fn ber(&self, truth: &[u8]) -> f64 {
        ber(&self.bits, truth)
    }
}

pub fn indices_to_bits(idx: &[usize], c: &Constellation) -> Vec<u8> {
    let mut bits = Vec::with_capacity(idx.len() * c.bits_per_symbol());
    for &i in idx {
        c.bits_of(i, &mut bits);
    }
    bits
}

pub fn bit_errors(a: &[u8], b: &[u8]) -> usize {
    assert_eq!(a.len(), b.len(), "bit vectors differ in length");
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

pub fn ber(a: &[u8], b: &[u8]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    bit_errors(a, b) as f64 / a.len() as f64
}

#[derive(Debug, Clone)]
pub struct Detector {
    pub channel: SdChannel,
    pub constellation: Constellation,
}

impl Detector {
    pub fn new(channel: SdChannel, constellation: Constellation) -> Self {
        Self { channel, constellation }
    }

    pub fn dim(&self) -> usize {
        self.channel.op().dim()
    }

    fn check(&self, y: &[C64]) -> Result<()> {
        if y.len() != self.dim() {
            return Err(Error::dim(self.dim(), y.len()));
        }
        Ok(())
    }

    fn equalize(&self, y: &[C64], ridge: f64) -> Result<SdResult> {
        self.check(y)?;
        let inv = self.channel.op().factor(ridge)?;
        let soft = inv.solve(&self.channel.adjoint(y));
        Ok(SdResult::from_soft(soft, &self.constellation, 1, Vec::new()))
    }

    /// `(ĤᴴĤ + 10⁻¹²I)⁻¹Ĥᴴy`.
    pub fn ls(&self, y: &[C64]) -> Result<SdResult> {
        self.equalize(y, LS_RIDGE)
    }

    /// `(ĤᴴĤ + σ²I)⁻¹Ĥᴴy` for unit-energy symbols.
    pub fn lmmse(&self, y: &[C64], noise_var: f64) -> Result<SdResult> {
        if !(noise_var >= 0.0) {
            return Err(Error::InvalidParameter(format!("noise variance must be >= 0, got {noise_var}")));
        }
        self.equalize(y, noise_var.max(LS_RIDGE))
    }

    /// PnP loop; hard decisions are taken on the final `z`.
    pub fn pnp(
        &self,
        y: &[C64],
        denoiser: &dyn Denoiser,
        cfg: &PnpConfig,
        truth_bits: Option<&[u8]>,
    ) -> Result<SdResult> {
        self.check(y)?;
        let c = &self.constellation;
        let mut trace = Vec::new();
        let state = pnp::run(self.channel.op(), &self.channel.adjoint(y), denoiser, cfg, None, &mut |s| {
            if let Some(t) = truth_bits {
                let idx: Vec<usize> = s.z.iter().map(|&z| c.nearest(z)).collect();
                trace.push(ber(&indices_to_bits(&idx, c), t));
            }
        })?;
        Ok(SdResult::from_soft(state.z, c, state.iteration, trace))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_time_channel, complex_gaussian, PathSet};
    use crate::denoise::SoftMapper;
    use crate::frame::FrameConfig;
    use crate::linalg::CMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symbols(c: &Constellation, n: usize, seed: u64) -> (Vec<C64>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..c.order())).collect();
        (idx.iter().map(|&i| c.points()[i]).collect(), indices_to_bits(&idx, c))
    }

    fn identity_detector(cfg: &FrameConfig) -> Detector {
        let set = PathSet::single(C64::new(1.0, 0.0), 0, 0, 0, 0);
        let h = StructuredChannel::new(build_time_channel(&set, cfg).unwrap(), cfg).unwrap();
        Detector::new(SdChannel::Structured(h), cfg.constellation.clone())
    }

    #[test]
    fn noiseless_identity_channel_is_error_free() {
        let cfg = FrameConfig::new(8, 8, 2, 4).unwrap();
        let det = identity_detector(&cfg);
        let (x, bits) = random_symbols(&cfg.constellation, 64, 1);
        let sm = SoftMapper { constellation: cfg.constellation.clone() };
        let r = det.pnp(&x, &sm, &PnpConfig::default(), Some(&bits)).unwrap();
        assert_eq!(r.ber(&bits), 0.0);
        assert_eq!(r.ber_trace.len(), 10);
        assert_eq!(det.ls(&x).unwrap().bits, bits);
        assert_eq!(det.lmmse(&x, 0.0).unwrap().bits, bits);
    }

    #[test]
    fn soft_output_in_constellation_hull() {
        let cfg = FrameConfig::new(8, 8, 2, 16).unwrap();
        let det = identity_detector(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y: Vec<C64> = (0..64).map(|_| complex_gaussian(&mut rng, 4.0)).collect();
        let sm = SoftMapper { constellation: cfg.constellation.clone() };
        let r = det.pnp(&y, &sm, &PnpConfig::default(), None).unwrap();
        let edge = cfg.constellation.points().iter().map(|p| p.re.abs()).fold(0.0, f64::max);
        // the square QAM hull is the box spanned by the corner points
        assert!(r.soft.iter().all(|z| z.re.abs() <= edge + 1e-12 && z.im.abs() <= edge + 1e-12));
    }

    #[test]
    fn dense_orthogonal_channel_matched_filter() {
        let cfg = FrameConfig::new(4, 4, 2, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = CMatrix::from_fn(16, 16, |_, _| complex_gaussian(&mut rng, 1.0)).qr().q();
        let (x, bits) = random_symbols(&cfg.constellation, 16, 4);
        let y = crate::linalg::mat_vec(&q, &x);
        let det = Detector::new(SdChannel::Dense(DenseOperator::new(q.clone())), cfg.constellation.clone());
        let mf = crate::linalg::adjoint_mul(&q, &y);
        let r = det.ls(&y).unwrap();
        for (a, b) in r.soft.iter().zip(&mf) {
            assert!((a - b).norm() < 1e-10);
        }
        assert_eq!(r.bits, bits);
    }

    #[test]
    fn structured_and_dense_detectors_agree() {
        let cfg = FrameConfig::new(8, 4, 3, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let set = crate::channel::sample_paths(&mut rng, 3, 3, 1, true, 0).unwrap();
        let h_t = build_time_channel(&set, &cfg).unwrap();
        let dense = crate::channel::build_dd_channel(&h_t, &cfg).unwrap().dense;
        let s = Detector::new(SdChannel::Structured(StructuredChannel::new(h_t, &cfg).unwrap()), cfg.constellation.clone());
        let d = Detector::new(SdChannel::Dense(DenseOperator::new(dense)), cfg.constellation.clone());
        let y: Vec<C64> = (0..32).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let sm = SoftMapper { constellation: cfg.constellation.clone() };
        let a = s.pnp(&y, &sm, &PnpConfig::default(), None).unwrap();
        let b = d.pnp(&y, &sm, &PnpConfig::default(), None).unwrap();
        assert!(crate::linalg::nmse(&a.soft, &b.soft) < 1e-18);
        let a = s.lmmse(&y, 0.1).unwrap();
        let b = d.lmmse(&y, 0.1).unwrap();
        assert!(crate::linalg::nmse(&a.soft, &b.soft) < 1e-18);
    }

    #[test]
    fn ber_helpers() {
        assert_eq!(bit_errors(&[0, 1, 1, 0], &[0, 0, 1, 1]), 2);
        assert_eq!(ber(&[0, 1, 1, 0], &[0, 0, 1, 1]), 0.5);
        assert_eq!(ber(&[], &[]), 0.0);
        let det = identity_detector(&FrameConfig::new(4, 4, 1, 4).unwrap());
        assert!(det.ls(&[C64::new(0.0, 0.0); 3]).is_err());
        assert!(det.lmmse(&[C64::new(0.0, 0.0); 16], -1.0).is_err());
    }
}
