//! OTFS frame geometry, delay-Doppler ↔ time-frequency ↔ time transforms,
//! and Gray-mapped QAM.
//!
//! A delay-Doppler grid is an `M × N` matrix: rows are delay bins `l`,
//! columns are Doppler bins `k`. Its canonical vectorization stacks columns,
//! so the delay index runs fastest (`vec[l + M·k]`), which is exactly the
//! column-major storage of [`CMatrix`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, DftBackend, FlopCounter, UnitaryDft, C64};

/// Square QAM constellation with Gray bit labels and unit average energy.
///
/// Bit labelling: the first half of a symbol's bits (MSB first) selects the
/// in-phase level, the second half the quadrature level. Within one axis,
/// the label is Gray-decoded to a natural index `i` and mapped to the level
/// `(L−1) − 2i` before scaling. For 4QAM this gives `00 → (1+j)/√2`,
/// `01 → (1−j)/√2`, `10 → (−1+j)/√2`, `11 → (−1−j)/√2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Constellation {
    order: usize,
    points: Vec<C64>,
}

impl Constellation {
    pub fn qam(order: usize) -> Result<Self> {
        let bits = order.trailing_zeros() as usize;
        if order < 4 || !order.is_power_of_two() || bits % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "square QAM needs order 4^k, got {order}"
            )));
        }
        let per_axis = 1usize << (bits / 2);
        let energy = 2.0 * ((per_axis * per_axis) as f64 - 1.0) / 3.0;
        let scale = 1.0 / energy.sqrt();
        let level = |label: usize| {
            let natural = gray_decode(label);
            ((per_axis - 1) as f64 - 2.0 * natural as f64) * scale
        };
        let points = (0..order)
            .map(|idx| {
                let i_label = idx >> (bits / 2);
                let q_label = idx & (per_axis - 1);
                C64::new(level(i_label), level(q_label))
            })
            .collect();
        Ok(Self { order, points })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.order.trailing_zeros() as usize
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn average_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.order as f64
    }

    /// Index of the nearest point; ties go to the lowest index.
    pub fn nearest(&self, z: C64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub fn symbol_from_bits(&self, bits: &[u8]) -> C64 {
        let idx = bits.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
        self.points[idx]
    }

    pub fn bits_of(&self, index: usize, out: &mut Vec<u8>) {
        let b = self.bits_per_symbol();
        for s in (0..b).rev() {
            out.push(((index >> s) & 1) as u8);
        }
    }
}

impl TryFrom<usize> for Constellation {
    type Error = Error;

    fn try_from(order: usize) -> Result<Self> {
        Self::qam(order)
    }
}

impl From<Constellation> for usize {
    fn from(c: Constellation) -> usize {
        c.order
    }
}

fn gray_decode(mut g: usize) -> usize {
    let mut n = g;
    while g > 0 {
        g >>= 1;
        n ^= g;
    }
    n
}

/// OTFS grid geometry and physical constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    /// Subcarriers / delay bins.
    pub m: usize,
    /// Time slots / Doppler bins.
    pub n: usize,
    /// Subcarrier spacing in Hz.
    pub delta_f: f64,
    /// Carrier frequency in Hz.
    pub carrier_hz: f64,
    /// Zero-padding samples appended after each time block.
    pub zp_len: usize,
    pub constellation: Constellation,
    #[serde(default)]
    pub dft_backend: DftBackendConfig,
}

/// Serializable mirror of [`DftBackend`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DftBackendConfig {
    #[default]
    Matrix,
    Fast,
}

impl From<DftBackendConfig> for DftBackend {
    fn from(c: DftBackendConfig) -> Self {
        match c {
            DftBackendConfig::Matrix => DftBackend::Matrix,
            DftBackendConfig::Fast => DftBackend::Fast,
        }
    }
}

impl FrameConfig {
    pub fn new(m: usize, n: usize, zp_len: usize, qam_order: usize) -> Result<Self> {
        let cfg = Self {
            m,
            n,
            delta_f: 7.5e3,
            carrier_hz: 3.0e9,
            zp_len,
            constellation: Constellation::qam(qam_order)?,
            dft_backend: DftBackendConfig::Matrix,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The 20×20, 7.5 kHz, 3 GHz, 4QAM frame used throughout the experiments.
    pub fn standard() -> Self {
        Self::new(20, 20, 4, 4).expect("static configuration is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidParameter("M and N must be >= 1".into()));
        }
        if !(self.delta_f > 0.0) {
            return Err(Error::InvalidParameter("subcarrier spacing must be > 0".into()));
        }
        let e = self.constellation.average_energy();
        if (e - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "constellation energy {e} is not unit"
            )));
        }
        Ok(())
    }

    /// Slot duration `T = 1/Δf`.
    pub fn slot_duration(&self) -> f64 {
        1.0 / self.delta_f
    }

    /// Samples per transmitted block including zero padding.
    pub fn block_len(&self) -> usize {
        self.m + self.zp_len
    }

    pub fn grid_len(&self) -> usize {
        self.m * self.n
    }

    pub fn bits_per_frame(&self) -> usize {
        self.grid_len() * self.constellation.bits_per_symbol()
    }

    /// Checks the zero padding covers a channel's maximum delay.
    pub fn check_delay_spread(&self, l_max: usize) -> Result<()> {
        if self.zp_len < l_max {
            return Err(Error::InvalidParameter(format!(
                "zero padding {} shorter than maximum delay {l_max}",
                self.zp_len
            )));
        }
        Ok(())
    }

    pub(crate) fn dft_m(&self) -> UnitaryDft {
        UnitaryDft::new(self.m, self.dft_backend.into())
    }

    pub(crate) fn dft_n(&self) -> UnitaryDft {
        UnitaryDft::new(self.n, self.dft_backend.into())
    }

    pub(crate) fn check_grid(&self, g: &CMatrix) -> Result<()> {
        if g.nrows() != self.m || g.ncols() != self.n {
            return Err(Error::dim(
                format!("{}x{} grid", self.m, self.n),
                format!("{}x{}", g.nrows(), g.ncols()),
            ));
        }
        Ok(())
    }
}

/// What a delay-Doppler grid holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridRole {
    Symbols,
    Received,
    ChannelEstimate,
}

/// `M × N` delay-Doppler grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DdGrid {
    pub data: CMatrix,
    pub role: GridRole,
}

impl DdGrid {
    pub fn zeros(cfg: &FrameConfig, role: GridRole) -> Self {
        Self {
            data: CMatrix::zeros(cfg.m, cfg.n),
            role,
        }
    }

    pub fn from_matrix(data: CMatrix, role: GridRole) -> Self {
        Self { data, role }
    }

    /// Column-stacked (delay-fastest) vector.
    pub fn vec(&self) -> Vec<C64> {
        self.data.as_slice().to_vec()
    }

    pub fn unvec(v: &[C64], cfg: &FrameConfig, role: GridRole) -> Result<Self> {
        if v.len() != cfg.grid_len() {
            return Err(Error::dim(cfg.grid_len(), v.len()));
        }
        Ok(Self {
            data: CMatrix::from_column_slice(cfg.m, cfg.n, v),
            role,
        })
    }

    /// Symbol at delay `l`, Doppler `k`.
    pub fn at(&self, l: usize, k: usize) -> C64 {
        self.data[(l, k)]
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Time-frequency grid `X_TF[m, n]`: rows subcarriers, columns slots.
pub type TfGrid = CMatrix;

/// Time-domain OTFS samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    pub samples: Vec<C64>,
    /// Whether each block is followed by `zp_len` zeros.
    pub zero_padded: bool,
}

/// ISFFT: `X_TF = F_M · X_DD · F_Nᴴ`.
pub fn isfft(x_dd: &DdGrid, cfg: &FrameConfig) -> Result<TfGrid> {
    cfg.check_grid(&x_dd.data)?;
    let fm = cfg.dft_m();
    let fnn = cfg.dft_n();
    let mut out = x_dd.data.clone();
    transform_columns(&mut out, &fm, false);
    transform_rows(&mut out, &fnn, true);
    Ok(out)
}

/// SFFT: `X_DD = F_Mᴴ · X_TF · F_N`, the exact inverse of [`isfft`].
pub fn sfft(x_tf: &TfGrid, cfg: &FrameConfig) -> Result<DdGrid> {
    cfg.check_grid(x_tf)?;
    let fm = cfg.dft_m();
    let fnn = cfg.dft_n();
    let mut out = x_tf.clone();
    transform_columns(&mut out, &fm, true);
    transform_rows(&mut out, &fnn, false);
    Ok(DdGrid::from_matrix(out, GridRole::Received))
}

fn transform_columns(g: &mut CMatrix, dft: &UnitaryDft, inverse: bool) {
    for mut col in g.column_iter_mut() {
        let mut buf: Vec<C64> = col.iter().copied().collect();
        dft.apply(&mut buf, inverse);
        col.iter_mut().zip(buf).for_each(|(c, v)| *c = v);
    }
}

/// Applies `F` (or `Fᴴ`) along the Doppler axis, i.e. `G·Fᵀ` (= `G·F`).
fn transform_rows(g: &mut CMatrix, dft: &UnitaryDft, inverse: bool) {
    for mut row in g.row_iter_mut() {
        let mut buf: Vec<C64> = row.iter().copied().collect();
        dft.apply(&mut buf, inverse);
        row.iter_mut().zip(buf).for_each(|(c, v)| *c = v);
    }
}

/// Rectangular-pulse OTFS modulator: `x_T = (F_Nᴴ ⊗ I_M)·vec(X_DD)`, then
/// `zp_len` zeros appended after every block when `zero_pad` is set.
pub fn modulate(x_dd: &DdGrid, cfg: &FrameConfig, zero_pad: bool) -> Result<TimeSignal> {
    cfg.check_grid(&x_dd.data)?;
    let x_t = cfg
        .dft_n()
        .apply_kron_identity(x_dd.data.as_slice(), cfg.m, true, &mut FlopCounter::default());
    if !zero_pad {
        return Ok(TimeSignal {
            samples: x_t,
            zero_padded: false,
        });
    }
    let mut samples = Vec::with_capacity(cfg.block_len() * cfg.n);
    for block in x_t.chunks(cfg.m) {
        samples.extend_from_slice(block);
        samples.extend(std::iter::repeat_n(C64::new(0.0, 0.0), cfg.zp_len));
    }
    Ok(TimeSignal {
        samples,
        zero_padded: true,
    })
}

/// Drops the zero-padding interval of every received block.
pub fn strip_zero_padding(y: &TimeSignal, cfg: &FrameConfig) -> Result<TimeSignal> {
    if !y.zero_padded {
        return Ok(y.clone());
    }
    let expected = cfg.block_len() * cfg.n;
    if y.samples.len() != expected {
        return Err(Error::dim(expected, y.samples.len()));
    }
    let samples = y
        .samples
        .chunks(cfg.block_len())
        .flat_map(|b| b[..cfg.m].iter().copied())
        .collect();
    Ok(TimeSignal {
        samples,
        zero_padded: false,
    })
}

/// Demodulator: `y_DD = (F_N ⊗ I_M)·y_T` on a ZP-free signal.
pub fn demodulate(y_t: &TimeSignal, cfg: &FrameConfig) -> Result<DdGrid> {
    if y_t.zero_padded {
        return Err(Error::InvalidParameter(
            "zero padding must be stripped before demodulation".into(),
        ));
    }
    if y_t.samples.len() != cfg.grid_len() {
        return Err(Error::dim(cfg.grid_len(), y_t.samples.len()));
    }
    let v = cfg
        .dft_n()
        .apply_kron_identity(&y_t.samples, cfg.m, false, &mut FlopCounter::default());
    DdGrid::unvec(&v, cfg, GridRole::Received)
}

/// Gray-maps `M·N·log2(Q')` bits onto the grid in canonical vector order.
pub fn map_bits(bits: &[u8], cfg: &FrameConfig) -> Result<DdGrid> {
    if bits.len() != cfg.bits_per_frame() {
        return Err(Error::dim(cfg.bits_per_frame(), bits.len()));
    }
    let b = cfg.constellation.bits_per_symbol();
    let symbols: Vec<C64> = bits
        .chunks(b)
        .map(|chunk| cfg.constellation.symbol_from_bits(chunk))
        .collect();
    DdGrid::unvec(&symbols, cfg, GridRole::Symbols)
}

/// Nearest-point demapping of every grid cell back to bits.
pub fn demap_symbols(grid: &DdGrid, cfg: &FrameConfig) -> Result<Vec<u8>> {
    cfg.check_grid(&grid.data)?;
    Ok(demap_vector(grid.data.as_slice(), &cfg.constellation))
}

pub fn demap_vector(symbols: &[C64], constellation: &Constellation) -> Vec<u8> {
    let mut out = Vec::with_capacity(symbols.len() * constellation.bits_per_symbol());
    for &z in symbols {
        constellation.bits_of(constellation.nearest(z), &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(cfg: &FrameConfig, seed: u64) -> DdGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DdGrid::from_matrix(
            CMatrix::from_fn(cfg.m, cfg.n, |_, _| {
                C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            }),
            GridRole::Symbols,
        )
    }

    fn max_err(a: &CMatrix, b: &CMatrix) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn isfft_of_impulse_is_flat() {
        let cfg = FrameConfig::new(2, 2, 0, 4).unwrap();
        let mut x = DdGrid::zeros(&cfg, GridRole::Symbols);
        x.data[(0, 0)] = C64::new(1.0, 0.0);
        let tf = isfft(&x, &cfg).unwrap();
        for z in tf.iter() {
            assert!((z - C64::new(0.5, 0.0)).norm() < 1e-15);
        }
        let back = sfft(&CMatrix::from_element(2, 2, C64::new(0.5, 0.0)), &cfg).unwrap();
        assert!((back.at(0, 0) - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(back.data.iter().skip(1).all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn isfft_matches_double_sum() {
        let cfg = FrameConfig::new(3, 4, 0, 4).unwrap();
        let x = random_grid(&cfg, 1);
        let tf = isfft(&x, &cfg).unwrap();
        let (m_, n_) = (cfg.m as f64, cfg.n as f64);
        for m in 0..cfg.m {
            for n in 0..cfg.n {
                let mut s = C64::new(0.0, 0.0);
                for k in 0..cfg.n {
                    for l in 0..cfg.m {
                        let ph = 2.0
                            * std::f64::consts::PI
                            * ((n * k) as f64 / n_ - (m * l) as f64 / m_);
                        s += x.at(l, k) * C64::from_polar(1.0, ph);
                    }
                }
                s /= (m_ * n_).sqrt();
                assert!((s - tf[(m, n)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn sfft_inverts_isfft_and_preserves_norm() {
        let cfg = FrameConfig::new(4, 4, 0, 4).unwrap();
        let x = random_grid(&cfg, 2);
        let tf = isfft(&x, &cfg).unwrap();
        let back = sfft(&tf, &cfg).unwrap();
        assert!(max_err(&back.data, &x.data) < 1e-12);
        assert!((tf.norm() - x.data.norm()).abs() < 1e-12);
    }

    #[test]
    fn sfft_is_linear() {
        let cfg = FrameConfig::new(4, 4, 0, 4).unwrap();
        let x = random_grid(&cfg, 3).data;
        let y = random_grid(&cfg, 4).data;
        let (a, b) = (C64::new(0.3, -1.2), C64::new(-2.0, 0.5));
        let lhs = sfft(&(&x * a + &y * b), &cfg).unwrap().data;
        let rhs = sfft(&x, &cfg).unwrap().data * a + sfft(&y, &cfg).unwrap().data * b;
        assert!(max_err(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn modulate_equals_heisenberg_of_isfft() {
        let cfg = FrameConfig::new(4, 3, 0, 4).unwrap();
        let x = random_grid(&cfg, 5);
        let tf = isfft(&x, &cfg).unwrap();
        let fm = crate::linalg::dft_matrix(cfg.m);
        let heis = fm.adjoint() * tf;
        let xt = modulate(&x, &cfg, false).unwrap();
        for (a, b) in xt.samples.iter().zip(heis.as_slice()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn modulation_round_trip_and_energy() {
        let cfg = FrameConfig::new(4, 4, 2, 4).unwrap();
        let x = random_grid(&cfg, 6);
        let xt = modulate(&x, &cfg, true).unwrap();
        assert_eq!(xt.samples.len(), 6 * 4);
        let e_t: f64 = xt.samples.iter().map(|z| z.norm_sqr()).sum();
        assert!((e_t - x.energy()).abs() < 1e-12);
        let y = demodulate(&strip_zero_padding(&xt, &cfg).unwrap(), &cfg).unwrap();
        assert!(max_err(&y.data, &x.data) < 1e-12);
    }

    #[test]
    fn fast_backend_agrees_with_matrix_backend() {
        let mut cfg = FrameConfig::new(8, 16, 0, 4).unwrap();
        let x = random_grid(&cfg, 7);
        let slow = isfft(&x, &cfg).unwrap();
        cfg.dft_backend = DftBackendConfig::Fast;
        let fast = isfft(&x, &cfg).unwrap();
        assert!(max_err(&slow, &fast) < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let cfg = FrameConfig::new(4, 4, 0, 4).unwrap();
        let other = FrameConfig::new(4, 5, 0, 4).unwrap();
        let x = random_grid(&other, 8);
        assert!(matches!(isfft(&x, &cfg), Err(Error::Dimension { .. })));
        let short = TimeSignal {
            samples: vec![C64::new(0.0, 0.0); 15],
            zero_padded: false,
        };
        assert!(matches!(demodulate(&short, &cfg), Err(Error::Dimension { .. })));
    }

    #[test]
    fn gray_4qam_table() {
        let c = Constellation::qam(4).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let table = [([0, 0], (s, s)), ([0, 1], (s, -s)), ([1, 0], (-s, s)), ([1, 1], (-s, -s))];
        for (bits, (re, im)) in table {
            assert!((c.symbol_from_bits(&bits) - C64::new(re, im)).norm() < 1e-15);
        }
    }

    #[test]
    fn qam_is_unit_energy_and_gray() {
        for order in [4, 16, 64] {
            let c = Constellation::qam(order).unwrap();
            assert!((c.average_energy() - 1.0).abs() < 1e-12);
            // nearest neighbours differ in exactly one bit
            let d_min = 2.0 / (2.0 * ((order as f64) - 1.0) / 3.0).sqrt();
            for i in 0..order {
                for j in 0..order {
                    let d = (c.points()[i] - c.points()[j]).norm();
                    if (d - d_min).abs() < 1e-9 {
                        assert_eq!((i ^ j).count_ones(), 1, "order {order}: {i} vs {j}");
                    }
                }
            }
        }
        assert!(Constellation::qam(8).is_err());
    }

    #[test]
    fn nearest_breaks_ties_low() {
        let c = Constellation::qam(4).unwrap();
        assert_eq!(c.nearest(C64::new(0.0, 0.0)), 0);
    }

    proptest! {
        #[test]
        fn bits_round_trip(seed in any::<u64>(), order_pow in 1usize..=3) {
            let cfg = FrameConfig::new(4, 3, 0, 1 << (2 * order_pow)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let bits: Vec<u8> = (0..cfg.bits_per_frame()).map(|_| rng.random_range(0..2u8)).collect();
            let grid = map_bits(&bits, &cfg).unwrap();
            prop_assert_eq!(demap_symbols(&grid, &cfg).unwrap(), bits.clone());
            // small perturbation stays inside decision regions for 4QAM
            if order_pow == 1 {
                let noisy = DdGrid::from_matrix(
                    grid.data.map(|z| z + C64::from_polar(0.09, rng.random::<f64>() * 6.3)),
                    GridRole::Received,
                );
                prop_assert_eq!(demap_symbols(&noisy, &cfg).unwrap(), bits);
            }
        }

        #[test]
        fn vec_unvec_round_trip(seed in any::<u64>()) {
            let cfg = FrameConfig::new(5, 3, 0, 4).unwrap();
            let g = random_grid(&cfg, seed);
            let v = g.vec();
            prop_assert_eq!(v[2 + 5], g.at(2, 1));
            let back = DdGrid::unvec(&v, &cfg, GridRole::Symbols).unwrap();
            prop_assert_eq!(back.data, g.data);
        }
    }
}
