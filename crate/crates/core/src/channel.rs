//! SIMO-OFDM channel tensor synthesis and observation.
//!
//! The noiseless tensor is
//!
//! ```text
//! H(m, s, k) = sum_l alpha_l * exp(j 2 pi f_c/c delta_{l,m})
//!                            * exp(-j 2 pi s df tau_l)
//!                            * exp(+j 2 pi k f_d,l T0)
//! ```
//!
//! Received-power bookkeeping lives entirely in `alpha_l`: its magnitude is
//! `sqrt(P_tx) * lambda / (4 pi d) * 10^(-loss/20)` (see
//! [`crate::raygen::path_amplitude`]), so `|alpha|^2` is the received power in
//! watts. Each observed entry carries complex Gaussian noise of variance
//! `N0 = k_B * BW * T_e` watts, which makes `|alpha|^2 / N0` the per-entry SNR.
//!
//! # Tensor dump format
//!
//! [`ChannelTensor::write_dump`] writes a 24-byte header of three
//! little-endian `u64` (`M`, `N_f`, `N_t`) followed by `M * N_f * N_t`
//! little-endian complex64 values (`f32` real, then `f32` imaginary), in C
//! order over `(m, s, k)`: `k` varies fastest, then `s`, then `m`.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::raygen::PathTruth;
use crate::{Complex, Error, Result, BOLTZMANN, SPEED_OF_LIGHT};

/// Resource grid and radio front-end parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub antennas: usize,
    pub subcarriers: usize,
    pub symbols: usize,
    pub carrier_hz: f64,
    /// Effective pilot spacing (comb size times numerology spacing).
    pub subcarrier_spacing_hz: f64,
    /// Effective pilot symbol period T0.
    pub symbol_period_s: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub noise_figure_db: f64,
    pub antenna_temp_k: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::from_srs(100, 100e6, 30e3, 8, 12, 0.5e-3)
    }
}

impl GridSpec {
    /// Comb-`comb` sounding grid: effective spacing `comb * scs` and
    /// `floor(bandwidth / spacing)` pilot subcarriers.
    pub fn from_srs(
        antennas: usize,
        bandwidth_hz: f64,
        scs_hz: f64,
        comb: usize,
        symbols: usize,
        symbol_period_s: f64,
    ) -> Self {
        let spacing = scs_hz * comb as f64;
        GridSpec {
            antennas,
            subcarriers: (bandwidth_hz / spacing).floor() as usize,
            symbols,
            carrier_hz: 5.9e9,
            subcarrier_spacing_hz: spacing,
            symbol_period_s,
            bandwidth_hz,
            tx_power_dbm: 23.0,
            noise_figure_db: 5.0,
            antenna_temp_k: 298.0,
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.carrier_hz,
            self.subcarrier_spacing_hz,
            self.symbol_period_s,
            self.bandwidth_hz,
        ];
        if self.antennas == 0 || self.subcarriers == 0 || self.symbols == 0 || positive.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::config("grid dimensions, carrier, spacing, period and bandwidth must be positive"));
        }
        if self.subcarrier_spacing_hz * self.subcarriers as f64 > self.bandwidth_hz * (1.0 + 1e-12) {
            return Err(Error::config("pilot span exceeds the bandwidth"));
        }
        if self.antenna_temp_k < 0.0 {
            return Err(Error::config("antenna temperature must be non-negative"));
        }
        Ok(())
    }

    /// `T_e = T_ant + 290 (F - 1)` with `F` the linear noise figure.
    pub fn equivalent_noise_temperature(&self) -> f64 {
        equivalent_noise_temperature(self.antenna_temp_k, self.noise_figure_db)
    }

    /// Per-entry noise variance `k_B * BW * T_e`, watts.
    pub fn noise_power(&self) -> f64 {
        BOLTZMANN * self.bandwidth_hz * self.equivalent_noise_temperature()
    }
}

pub fn equivalent_noise_temperature(antenna_temp_k: f64, noise_figure_db: f64) -> f64 {
    antenna_temp_k + 290.0 * (10f64.powf(noise_figure_db / 10.0) - 1.0)
}

/// Dense `M x N_f x N_t` complex tensor, antenna index fastest in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTensor {
    dims: (usize, usize, usize),
    data: Vec<Complex>,
}

impl ChannelTensor {
    pub fn zeros(m: usize, nf: usize, nt: usize) -> Self {
        ChannelTensor { dims: (m, nf, nt), data: vec![Complex::new(0.0, 0.0); m * nf * nt] }
    }

    pub fn from_fn(m: usize, nf: usize, nt: usize, mut f: impl FnMut(usize, usize, usize) -> Complex) -> Self {
        let mut t = Self::zeros(m, nf, nt);
        for k in 0..nt {
            for s in 0..nf {
                for i in 0..m {
                    let idx = t.offset(i, s, k);
                    t.data[idx] = f(i, s, k);
                }
            }
        }
        t
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    #[inline]
    pub fn offset(&self, m: usize, s: usize, k: usize) -> usize {
        m + self.dims.0 * (s + self.dims.1 * k)
    }

    #[inline]
    pub fn get(&self, m: usize, s: usize, k: usize) -> Complex {
        self.data[self.offset(m, s, k)]
    }

    #[inline]
    pub fn set(&mut self, m: usize, s: usize, k: usize, v: Complex) {
        let i = self.offset(m, s, k);
        self.data[i] = v;
    }

    /// Raw storage, `m + M * (s + N_f * k)`.
    pub fn as_slice(&self) -> &[Complex] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex] {
        &mut self.data
    }

    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sqr().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        let (m, nf, nt) = self.dims;
        for d in [m, nf, nt] {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for i in 0..m {
            for s in 0..nf {
                for k in 0..nt {
                    let v = self.get(i, s, k);
                    w.write_all(&(v.re as f32).to_le_bytes())?;
                    w.write_all(&(v.im as f32).to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_dump<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 24];
        r.read_exact(&mut header)?;
        let dim = |i: usize| u64::from_le_bytes(header[8 * i..8 * i + 8].try_into().unwrap()) as usize;
        let (m, nf, nt) = (dim(0), dim(1), dim(2));
        let mut t = ChannelTensor::zeros(m, nf, nt);
        let mut buf = [0u8; 8];
        for i in 0..m {
            for s in 0..nf {
                for k in 0..nt {
                    r.read_exact(&mut buf)?;
                    let re = f32::from_le_bytes(buf[..4].try_into().unwrap()) as f64;
                    let im = f32::from_le_bytes(buf[4..].try_into().unwrap()) as f64;
                    t.set(i, s, k, Complex::new(re, im));
                }
            }
        }
        Ok(t)
    }
}

/// Spatial, frequency and time steering vectors of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct Steering {
    pub space: Vec<Complex>,
    pub freq: Vec<Complex>,
    pub time: Vec<Complex>,
}

/// Unit-modulus phasor `exp(j x)`; exact `1 + 0j` at `x = 0`.
fn cis(x: f64) -> Complex {
    Complex::new(x.cos(), x.sin())
}

pub fn steering_vectors(path: &PathTruth, grid: &GridSpec) -> Steering {
    use std::f64::consts::TAU;
    let k_space = TAU * grid.carrier_hz / SPEED_OF_LIGHT;
    let space = path.delta.iter().map(|d| cis(k_space * d)).collect();
    let freq = (0..grid.subcarriers)
        .map(|s| cis(-TAU * s as f64 * grid.subcarrier_spacing_hz * path.delay))
        .collect();
    let time = (0..grid.symbols)
        .map(|k| cis(TAU * k as f64 * path.doppler * grid.symbol_period_s))
        .collect();
    Steering { space, freq, time }
}

/// Sum of rank-one terms `alpha_l * b_s (x) b_f (x) b_t`.
pub fn synth_channel(paths: &[PathTruth], grid: &GridSpec) -> ChannelTensor {
    let (m, nf, nt) = (grid.antennas, grid.subcarriers, grid.symbols);
    let mut h = ChannelTensor::zeros(m, nf, nt);
    for path in paths {
        debug_assert_eq!(path.delta.len(), m);
        let st = steering_vectors(path, grid);
        let data = h.as_mut_slice();
        for k in 0..nt {
            let gk = path.gain * st.time[k];
            for s in 0..nf {
                let gks = gk * st.freq[s];
                let base = m * (s + nf * k);
                for (i, bs) in st.space.iter().enumerate() {
                    data[base + i] += gks * bs;
                }
            }
        }
    }
    h
}

/// Unit-modulus QPSK pilots drawn from `rng`.
pub fn qpsk_pilots<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<Complex> {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    (0..len)
        .map(|_| {
            let re = if rng.random::<bool>() { a } else { -a };
            let im = if rng.random::<bool>() { a } else { -a };
            Complex::new(re, im)
        })
        .collect()
}

/// Circular complex Gaussian sample of the given variance.
pub fn complex_gaussian<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> Complex {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex::new(s * re, s * im)
}

/// Pilot transmission over `h` plus thermal noise, followed by element-wise
/// pilot removal: returns `(H .* X + Z) ./ X`.
pub fn observe<R: Rng + ?Sized>(h: &ChannelTensor, grid: &GridSpec, rng: &mut R) -> ChannelTensor {
    let n0 = grid.noise_power();
    let pilots = qpsk_pilots(h.as_slice().len(), rng);
    let mut out = h.clone();
    for (v, x) in out.as_mut_slice().iter_mut().zip(pilots) {
        if n0 > 0.0 {
            let y = *v * x + complex_gaussian(n0, rng);
            *v = y / x;
        }
    }
    out
}

/// Transmitter clock bias model: zero-mean Gaussian truncated to `support`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockModel {
    pub sigma: f64,
    pub support: (f64, f64),
}

impl Default for ClockModel {
    fn default() -> Self {
        ClockModel { sigma: 50e-9, support: (-100e-9, 100e-9) }
    }
}

/// Rejection sampling from the truncated Gaussian.
pub fn draw_clock_bias<R: Rng + ?Sized>(model: &ClockModel, rng: &mut R) -> f64 {
    if model.sigma <= 0.0 {
        return 0.0_f64.clamp(model.support.0, model.support.1);
    }
    loop {
        let z: f64 = StandardNormal.sample(rng);
        let b = model.sigma * z;
        if b >= model.support.0 && b <= model.support.1 {
            return b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raygen::PathKind;
    use crate::Vec3;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_grid() -> GridSpec {
        GridSpec { antennas: 4, subcarriers: 8, symbols: 3, ..GridSpec::default() }
    }

    fn path(gain: Complex, delay: f64, doppler: f64, delta: Vec<f64>) -> PathTruth {
        PathTruth {
            kind: PathKind::LineOfSight,
            panel_id: None,
            vue: Vec3::zeros(),
            specular_point: None,
            gain,
            delay,
            doppler,
            delta,
            distance_ref: 1.0,
        }
    }

    /// Entry-by-entry evaluation of the channel sum, independent of the
    /// steering-vector code path.
    fn direct(paths: &[PathTruth], g: &GridSpec) -> ChannelTensor {
        use std::f64::consts::PI;
        ChannelTensor::from_fn(g.antennas, g.subcarriers, g.symbols, |m, s, k| {
            paths
                .iter()
                .map(|p| {
                    let phase = 2.0 * PI * g.carrier_hz / SPEED_OF_LIGHT * p.delta[m]
                        - 2.0 * PI * s as f64 * g.subcarrier_spacing_hz * p.delay
                        + 2.0 * PI * k as f64 * p.doppler * g.symbol_period_s;
                    p.gain * Complex::from_polar(1.0, phase)
                })
                .sum()
        })
    }

    #[test]
    fn first_entries_are_one() {
        let g = small_grid();
        let p = path(Complex::new(0.3, 0.1), 1.3e-7, 42.0, vec![0.0, 0.01, 0.02, 0.05]);
        let st = steering_vectors(&p, &g);
        let one = Complex::new(1.0, 0.0);
        assert_eq!(st.space[0], one);
        assert_eq!(st.freq[0], one);
        assert_eq!(st.time[0], one);
    }

    #[test]
    fn harmonic_delay_is_dft_column() {
        let g = small_grid();
        let n = 3.0;
        let tau = n / (g.subcarriers as f64 * g.subcarrier_spacing_hz);
        let st = steering_vectors(&path(Complex::new(1.0, 0.0), tau, 0.0, vec![0.0; 4]), &g);
        for (s, v) in st.freq.iter().enumerate() {
            let expect = Complex::from_polar(1.0, -2.0 * std::f64::consts::PI * n * s as f64 / g.subcarriers as f64);
            assert!((v - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn quarter_wavelength_offset_is_j() {
        let g = small_grid();
        let lam = g.wavelength();
        let st = steering_vectors(&path(Complex::new(1.0, 0.0), 0.0, 0.0, vec![0.0, lam / 4.0, 0.0, 0.0]), &g);
        assert!((st.space[1] - Complex::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn unit_path_gives_all_ones() {
        let g = small_grid();
        let h = synth_channel(&[path(Complex::new(1.0, 0.0), 0.0, 0.0, vec![0.0; 4])], &g);
        assert!(h.as_slice().iter().all(|v| *v == Complex::new(1.0, 0.0)));
    }

    #[test]
    fn first_entry_sums_gains() {
        let g = small_grid();
        let paths = [
            path(Complex::new(0.3, 0.1), 1e-7, 30.0, vec![0.0, 0.01, 0.02, 0.03]),
            path(Complex::new(-0.2, 0.5), 2e-7, -10.0, vec![0.0, -0.01, 0.05, 0.01]),
        ];
        let h = synth_channel(&paths, &g);
        assert!((h.get(0, 0, 0) - Complex::new(0.1, 0.6)).norm() < 1e-15);
    }

    #[test]
    fn cp_construction_matches_direct_sum() {
        let g = GridSpec { antennas: 6, subcarriers: 16, symbols: 5, ..GridSpec::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let paths: Vec<_> = (0..3)
            .map(|_| {
                let delta = (0..6).map(|m| if m == 0 { 0.0 } else { rng.random_range(-0.1..0.1) }).collect();
                path(
                    Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                    rng.random_range(1e-8..3e-7),
                    rng.random_range(-200.0..200.0),
                    delta,
                )
            })
            .collect();
        let a = synth_channel(&paths, &g);
        let b = direct(&paths, &g);
        let err: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        assert!(err / b.frobenius_norm() < 1e-12);
    }

    #[test]
    fn two_path_subcarrier_power() {
        let g = GridSpec { antennas: 1, subcarriers: 32, symbols: 1, ..GridSpec::default() };
        let t0 = 0.0;
        let t1 = 1.0 / (g.subcarriers as f64 * g.subcarrier_spacing_hz);
        let a0 = Complex::new(0.7, 0.0);
        let a1 = Complex::new(0.0, 0.4);
        let h = synth_channel(&[path(a0, t0, 0.0, vec![0.0]), path(a1, t1, 0.0, vec![0.0])], &g);
        for s in 0..g.subcarriers {
            let b1 = Complex::from_polar(1.0, -2.0 * std::f64::consts::PI * s as f64 * g.subcarrier_spacing_hz * t1);
            let expect = (a0 + a1 * b1).norm_sqr();
            assert!((h.get(0, s, 0).norm_sqr() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn single_path_energy() {
        let g = small_grid();
        let alpha = Complex::new(0.6, -0.8) * 0.5;
        let h = synth_channel(&[path(alpha, 1.7e-7, 55.0, vec![0.0, 0.02, 0.04, 0.07])], &g);
        let expect = alpha.norm_sqr() * (g.antennas * g.subcarriers * g.symbols) as f64;
        assert!((h.frobenius_norm_sqr() - expect).abs() < 1e-12);
    }

    #[test]
    fn noise_temperature_and_power() {
        let te = equivalent_noise_temperature(298.0, 5.0);
        assert!((te - 925.06).abs() < 0.01);
        let g = GridSpec::default();
        assert!((g.noise_power() - 1.2772e-12).abs() < 1e-15);
        assert!((BOLTZMANN * 1e8 * 925.06 - 1.277e-12).abs() < 1e-15);
    }

    #[test]
    fn zero_temperature_observation_is_exact() {
        let g = GridSpec { antenna_temp_k: 0.0, noise_figure_db: 0.0, ..small_grid() };
        let h = synth_channel(&[path(Complex::new(0.3, 0.2), 1e-7, 10.0, vec![0.0, 0.1, 0.2, 0.3])], &g);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(observe(&h, &g, &mut rng), h);
    }

    #[test]
    fn observed_noise_statistics() {
        // 10^5 entries: variance matches N0 and real/imag parts are uncorrelated.
        let g = GridSpec { antennas: 100, subcarriers: 100, symbols: 10, ..GridSpec::default() };
        let h = ChannelTensor::zeros(100, 100, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = observe(&h, &g, &mut rng);
        let n = z.as_slice().len() as f64;
        let n0 = g.noise_power();
        let var = z.as_slice().iter().map(|v| v.norm_sqr()).sum::<f64>() / n;
        assert!((var / n0 - 1.0).abs() < 0.02);
        let cross = z.as_slice().iter().map(|v| v.re * v.im).sum::<f64>() / n;
        assert!(cross.abs() / (n0 / 2.0) < 0.02);
        // lag-one correlation along the flattened index
        let lag = z.as_slice().windows(2).map(|w| (w[0] * w[1].conj()).norm()).sum::<f64>() / n;
        let lag_mean = z.as_slice().windows(2).map(|w| w[0] * w[1].conj()).sum::<Complex>() / n;
        assert!(lag_mean.norm() / n0 < 0.02, "lag {lag}");
    }

    #[test]
    fn clock_bias_degenerate_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = ClockModel { sigma: 0.0, ..ClockModel::default() };
        assert_eq!(draw_clock_bias(&m, &mut rng), 0.0);
    }

    #[test]
    fn clock_bias_support_and_std() {
        let m = ClockModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let draws: Vec<f64> = (0..100_000).map(|_| draw_clock_bias(&m, &mut rng)).collect();
        assert!(draws.iter().all(|b| (-100e-9..=100e-9).contains(b)));
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let std = (draws.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / draws.len() as f64).sqrt();
        // Symmetric truncation at a = 2 sigma:
        // var = sigma^2 (1 - 2 a phi(a) / (2 Phi(a) - 1)).
        let a = 2.0_f64;
        let phi = (-a * a / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mass = statrs::function::erf::erf(a / 2f64.sqrt());
        let analytic = 50e-9 * (1.0 - 2.0 * a * phi / mass).sqrt();
        assert!((std / analytic - 1.0).abs() < 0.05, "std {std} analytic {analytic}");
    }

    #[test]
    fn dump_round_trip_layout() {
        let h = ChannelTensor::from_fn(2, 3, 2, |m, s, k| Complex::new(m as f64, (10 * s + k) as f64));
        let mut buf = Vec::new();
        h.write_dump(&mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 8 * 12);
        assert_eq!(&buf[..8], &2u64.to_le_bytes());
        // second record is (m=0, s=0, k=1)
        assert_eq!(f32::from_le_bytes(buf[24 + 12..24 + 16].try_into().unwrap()), 1.0);
        let back = ChannelTensor::read_dump(&buf[..]).unwrap();
        assert_eq!(back, h);
    }
}
