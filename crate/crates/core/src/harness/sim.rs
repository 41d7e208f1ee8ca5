//! One Monte-Carlo trial's worth of synthetic signals.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{
    apply_dd_structured, build_dd_channel, build_time_channel, build_truncated_response, complex_gaussian,
    csi_error_variance, perturb_channel, ChannelParams, PathSet, TruncatedDdResponse,
};
use crate::error::Result;
use crate::frame::{DdGrid, FrameConfig, GridRole};
use crate::linalg::C64;
use crate::pilot::{best_pilot_seed, build_measurement_matrix, extract_observation, place_pilots, PilotLayout};
use crate::pnp::DenseOperator;
use crate::receivers::block_inverse::StructuredChannel;
use crate::receivers::ce::ChannelEstimator;
use crate::receivers::sd::{indices_to_bits, Detector, SdChannel};

/// `N₀ = E_s / 10^{SNR/10}`.
pub fn noise_variance(es: f64, snr_db: f64) -> f64 {
    es * 10f64.powf(-snr_db / 10.0)
}

pub fn awgn<R: Rng + ?Sized>(v: &mut [C64], var: f64, rng: &mut R) {
    if var > 0.0 {
        v.iter_mut().for_each(|z| *z += complex_gaussian(rng, var));
    }
}

pub const PILOT_SEED_CANDIDATES: u64 = 64;

/// Uniform random symbols; returns the grid vector and its bits.
pub fn random_symbols<R: Rng + ?Sized>(cfg: &FrameConfig, rng: &mut R) -> (Vec<C64>, Vec<usize>, Vec<u8>) {
    let c = &cfg.constellation;
    let idx: Vec<usize> = (0..cfg.grid_len()).map(|_| rng.random_range(0..c.order())).collect();
    let bits = indices_to_bits(&idx, c);
    (idx.iter().map(|&i| c.points()[i]).collect(), idx, bits)
}

/// Frame, channel model and pilot layout shared by every trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub frame: FrameConfig,
    pub channel: ChannelParams,
    pub pilot: PilotLayout,
}

impl ScenarioSpec {
    /// 20×20 frame, 5-path channel, 2×2 pilot block. The pilot seed is the
    /// best of the first [`PILOT_SEED_CANDIDATES`] by LS noise gain.
    pub fn standard(kind: crate::channel::ChannelKind) -> Self {
        let channel = ChannelParams::standard(kind);
        let frame = FrameConfig::standard();
        let mut pilot = PilotLayout::new(2, 2, channel.l_max, channel.k_hat_max());
        pilot.seed = best_pilot_seed(&pilot, &frame, PILOT_SEED_CANDIDATES).expect("static layout is valid");
        Self { frame, channel, pilot }
    }
}

/// A scenario with its measurement matrix prepared.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub estimator: ChannelEstimator,
}

/// Received pilot-window samples and what produced them.
#[derive(Debug, Clone)]
pub struct CeTrial {
    pub paths: PathSet,
    pub truth: Vec<C64>,
    pub y_obs: Vec<C64>,
    pub noise_var: f64,
}

/// A detection frame through a known channel.
#[derive(Debug, Clone)]
pub struct SdTrial {
    pub y: Vec<C64>,
    pub bits: Vec<u8>,
    pub symbols: Vec<C64>,
    pub noise_var: f64,
}

impl Scenario {
    pub fn new(spec: ScenarioSpec) -> Result<Self> {
        spec.frame.validate()?;
        spec.frame.check_delay_spread(spec.channel.l_max)?;
        let phi = build_measurement_matrix(&spec.pilot, &spec.frame)?;
        Ok(Self { estimator: ChannelEstimator::new(phi.phi), spec })
    }

    pub fn frame(&self) -> &FrameConfig {
        &self.spec.frame
    }

    pub fn es(&self) -> f64 {
        self.spec.frame.constellation.average_energy()
    }

    /// `L_n`, the truncated response length.
    pub fn response_len(&self) -> usize {
        self.spec.channel.response_len()
    }

    pub fn draw_channel<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PathSet> {
        self.spec.channel.sample(self.spec.frame.m, rng)
    }

    pub fn truth(&self, paths: &PathSet) -> Result<Vec<C64>> {
        Ok(build_truncated_response(paths, &self.spec.frame)?.vec())
    }

    /// Embedded-pilot frame (random data outside the guard) through the
    /// channel, AWGN, window cropped in `Φ` row order.
    pub fn ce_trial<R: Rng + ?Sized>(
        &self,
        paths: PathSet,
        snr_db: f64,
        data_rng: &mut R,
        noise_rng: &mut R,
    ) -> Result<CeTrial> {
        let cfg = &self.spec.frame;
        let (data, _, _) = random_symbols(cfg, data_rng);
        let grid = place_pilots(&self.spec.pilot, &DdGrid::unvec(&data, cfg, GridRole::Symbols)?, cfg)?;
        let h_t = build_time_channel(&paths, cfg)?;
        let mut y = apply_dd_structured(&h_t, cfg, &grid.vec());
        let noise_var = noise_variance(self.es(), snr_db);
        awgn(&mut y, noise_var, noise_rng);
        let y_obs = extract_observation(&DdGrid::unvec(&y, cfg, GridRole::Received)?, &self.spec.pilot, cfg)?;
        Ok(CeTrial { truth: self.truth(&paths)?, paths, y_obs, noise_var })
    }

    /// Full data frame (no pilot) through the channel plus AWGN.
    pub fn sd_trial<R: Rng + ?Sized>(
        &self,
        paths: &PathSet,
        snr_db: f64,
        data_rng: &mut R,
        noise_rng: &mut R,
    ) -> Result<SdTrial> {
        let cfg = &self.spec.frame;
        let (symbols, _, bits) = random_symbols(cfg, data_rng);
        let h_t = build_time_channel(paths, cfg)?;
        let mut y = apply_dd_structured(&h_t, cfg, &symbols);
        let noise_var = noise_variance(self.es(), snr_db);
        awgn(&mut y, noise_var, noise_rng);
        Ok(SdTrial { y, bits, symbols, noise_var })
    }

    /// Detector on the block-diagonal channel of a path set.
    pub fn structured_detector(&self, paths: &PathSet) -> Result<Detector> {
        let cfg = &self.spec.frame;
        let ch = StructuredChannel::new(build_time_channel(paths, cfg)?, cfg)?;
        Ok(Detector::new(SdChannel::Structured(ch), cfg.constellation.clone()))
    }

    /// Detector on an estimated truncated response, rebuilt as on-grid
    /// virtual paths.
    pub fn estimated_detector(&self, h_hat: &[C64]) -> Result<Detector> {
        let ch = &self.spec.channel;
        let resp = TruncatedDdResponse::from_vec(ch.l_max, ch.k_hat_max(), h_hat)?;
        self.structured_detector(&resp.as_virtual_paths())
    }

    /// Detector on `Ĥ_DD = H_DD + E`; also returns the CSI-error variance
    /// the detector is told about.
    pub fn perturbed_detector<R: Rng + ?Sized>(
        &self,
        paths: &PathSet,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<(Detector, f64)> {
        if epsilon == 0.0 {
            return Ok((self.structured_detector(paths)?, 0.0));
        }
        let cfg = &self.spec.frame;
        let h = build_dd_channel(&build_time_channel(paths, cfg)?, cfg)?;
        let var = csi_error_variance(h.frobenius_sqr(), epsilon, cfg.grid_len());
        let h_hat = perturb_channel(&h, epsilon, rng)?;
        Ok((
            Detector::new(SdChannel::Dense(DenseOperator::new(h_hat.dense)), cfg.constellation.clone()),
            var,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noiseless_integer_trial_is_nearly_consistent() {
        let sc = Scenario::new(ScenarioSpec::standard(ChannelKind::Integer)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut rng2 = ChaCha8Rng::seed_from_u64(2);
        let paths = sc.draw_channel(&mut rng).unwrap();
        let t = sc.ce_trial(paths, f64::INFINITY, &mut rng, &mut rng2).unwrap();
        assert_eq!(t.noise_var, 0.0);
        let pred = crate::linalg::mat_vec(sc.estimator.phi(), &t.truth);
        // only the neglected intra-frame phase separates Φh from y
        assert!(crate::linalg::nmse(&pred, &t.y_obs) < 0.05);
    }

    #[test]
    fn estimated_detector_from_truth_matches_true_channel() {
        let sc = Scenario::new(ScenarioSpec::standard(ChannelKind::Integer)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut paths = sc.draw_channel(&mut rng).unwrap();
        // a delay-0 path keeps every time block invertible
        paths.paths[0].delay = 0;
        let det = sc.estimated_detector(&sc.truth(&paths).unwrap()).unwrap();
        let t = sc.sd_trial(&paths, f64::INFINITY, &mut rng, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        // integer channel: virtual paths reproduce the physical ones exactly
        let r = det.ls(&t.y).unwrap();
        assert_eq!(r.ber(&t.bits), 0.0);
    }

    #[test]
    fn snr_to_noise_variance() {
        assert!((noise_variance(1.0, 10.0) - 0.1).abs() < 1e-15);
        assert_eq!(noise_variance(1.0, f64::INFINITY), 0.0);
    }
}
