//! Time-domain cross-check of the scatter predictions.
//!
//! A modulated carrier is synthesized sample by sample with exact
//! trigonometry, filtered in the frequency domain, and demodulated by reading
//! the DFT bins of the carrier and both sidebands. Sampling is coherent: the
//! carrier and modulation frequencies are integer multiples of the bin
//! spacing, so every line sits exactly on a bin and there is no leakage.
//!
//! Nothing here uses the [`crate::scatter`] algebra except [`verify`], which
//! runs both paths and compares them.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::filterlib::{Frequency, TransferFunction};
use crate::scatter::{apply_scatter, compute_scatter, ModulationState, DEFAULT_CARRIER_FLOOR};
use crate::Complex;

/// Upper bound on the sample count picked by [`WaveformSpec::coherent`].
pub const MAX_SAMPLES: usize = 1 << 22;

/// Index magnitudes below this are compared in absolute rather than
/// relative terms by [`verify`].
pub const INDEX_FLOOR: f64 = 1e-6;

/// Largest index [`verify`] accepts without `allow_large_index`.
pub const VERIFY_INDEX_LIMIT: f64 = 0.01;

/// Modulation orders kept clear of the folding frequency.
const GUARD_ORDERS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SynthesisMethod {
    /// Only the carrier and the two first-order sidebands.
    SpectralLines,
    /// `A(1 + a·cos ωm t)·cos(ωc t + p·sin ωm t)`, all sidebands included.
    #[default]
    FullWaveform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSpec {
    pub fc: f64,
    pub fm: f64,
    pub amplitude: f64,
    pub am_index: f64,
    pub pm_index: f64,
    pub n_samples: usize,
    pub sample_rate: f64,
    pub method: SynthesisMethod,
}

/// DFT bin numbers of the carrier and the modulation offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bins {
    pub carrier: usize,
    pub offset: usize,
}

impl WaveformSpec {
    /// Picks the bin spacing as the largest frequency dividing both `fc` and
    /// `fm`, and the smallest power-of-two length that keeps the carrier plus
    /// a few modulation orders below Nyquist.
    pub fn coherent(
        fc: f64,
        fm: f64,
        amplitude: f64,
        am_index: f64,
        pm_index: f64,
        method: SynthesisMethod,
    ) -> Result<Self> {
        if !(fm > 0.0 && fc > fm && fc.is_finite()) {
            return Err(Error::invalid(format!("need 0 < fm < fc, got fm = {fm}, fc = {fc}")));
        }
        let max_bins = MAX_SAMPLES / 2;
        let (kc, km) = rational_ratio(fc, fm, max_bins).ok_or_else(|| {
            Error::invalid(format!(
                "fc = {fc} Hz and fm = {fm} Hz have no common bin spacing within {MAX_SAMPLES} samples"
            ))
        })?;
        let needed = 2 * (kc + GUARD_ORDERS * km) + 1;
        if needed > MAX_SAMPLES {
            return Err(Error::invalid(format!(
                "coherent sampling of fc = {fc} Hz, fm = {fm} Hz needs more than {MAX_SAMPLES} samples"
            )));
        }
        let n_samples = needed.next_power_of_two();
        let bin_hz = fc / kc as f64;
        let spec = WaveformSpec {
            fc,
            fm,
            amplitude,
            am_index,
            pm_index,
            n_samples,
            sample_rate: n_samples as f64 * bin_hz,
            method,
        };
        spec.bins()?;
        Ok(spec)
    }

    pub fn bin_hz(&self) -> f64 {
        self.sample_rate / self.n_samples as f64
    }

    /// Checks the invariants and returns the bin numbers.
    pub fn bins(&self) -> Result<Bins> {
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::invalid("amplitude must be positive"));
        }
        if !(self.am_index.is_finite() && self.pm_index.is_finite()) {
            return Err(Error::invalid("modulation indices must be finite"));
        }
        if !(self.fm > 0.0 && self.fc > self.fm) {
            return Err(Error::invalid("need 0 < fm < fc"));
        }
        if self.n_samples < 4 {
            return Err(Error::invalid("need at least 4 samples"));
        }
        if !(self.sample_rate > 2.0 * (self.fc + self.fm)) {
            return Err(Error::invalid(format!(
                "sample rate {} Hz does not exceed 2·(fc + fm) = {} Hz",
                self.sample_rate,
                2.0 * (self.fc + self.fm)
            )));
        }
        let on_bin = |f: f64, what: &str| {
            let b = f / self.bin_hz();
            let r = b.round();
            if (b - r).abs() > 1e-6 * b.max(1.0) {
                Err(Error::invalid(format!(
                    "{what} = {f} Hz is not on a DFT bin (bin {b})"
                )))
            } else {
                Ok(r as usize)
            }
        };
        Ok(Bins {
            carrier: on_bin(self.fc, "fc")?,
            offset: on_bin(self.fm, "fm")?,
        })
    }
}

/// Smallest `(p, q)` with `p/q = x/y` to 1e-12, via continued fractions.
fn rational_ratio(x: f64, y: f64, max_p: usize) -> Option<(usize, usize)> {
    let target = x / y;
    let (mut h0, mut h1) = (0u128, 1u128);
    let (mut k0, mut k1) = (1u128, 0u128);
    let mut r = target;
    for _ in 0..64 {
        let a = r.floor();
        if a > max_p as f64 {
            return None;
        }
        let a = a as u128;
        (h0, h1) = (h1, a * h1 + h0);
        (k0, k1) = (k1, a * k1 + k0);
        if h1 > max_p as u128 {
            return None;
        }
        let (p, q) = (h1 as f64, k1 as f64);
        if (x * q - y * p).abs() <= 1e-12 * x * q {
            return Some((h1 as usize, k1 as usize));
        }
        let frac = r - r.floor();
        if frac == 0.0 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    }
}

/// Unnormalized forward DFT of a real sequence.
pub fn spectrum(samples: &[f64]) -> Vec<Complex> {
    let mut buf: Vec<Complex> = samples.iter().map(|&x| Complex::new(x, 0.0)).collect();
    plan(buf.len(), false).process(&mut buf);
    buf
}

/// Samples the modulated carrier at `t = n / sample_rate`.
pub fn synthesize(spec: &WaveformSpec) -> Result<Vec<f64>> {
    let bins = spec.bins()?;
    let n = spec.n_samples;
    // Phases reduced modulo the record length, so they stay exact for long
    // records.
    let phase = |bin: usize, i: usize| 2.0 * PI * ((bin * i) % n) as f64 / n as f64;
    let (big_a, a, p) = (spec.amplitude, spec.am_index, spec.pm_index);
    let samples = (0..n)
        .into_par_iter()
        .map(|i| {
            let wc = phase(bins.carrier, i);
            match spec.method {
                SynthesisMethod::FullWaveform => {
                    let wm = phase(bins.offset, i);
                    big_a * (1.0 + a * wm.cos()) * (wc + p * wm.sin()).cos()
                }
                SynthesisMethod::SpectralLines => {
                    let wl = phase(bins.carrier - bins.offset, i);
                    let wu = phase(bins.carrier + bins.offset, i);
                    big_a * (wc.cos() + 0.5 * (a - p) * wl.cos() + 0.5 * (a + p) * wu.cos())
                }
            }
        })
        .collect();
    Ok(samples)
}

/// Filters a real record through `tf` by scaling each DFT bin with the
/// response at that bin's frequency.
pub fn filter_waveform(tf: &TransferFunction, samples: &[f64], sample_rate: f64) -> Result<Vec<f64>> {
    filter_waveform_with_residue(tf, samples, sample_rate).map(|(x, _)| x)
}

/// As [`filter_waveform`], also returning the RMS of the discarded imaginary
/// part relative to the RMS of the output.
pub fn filter_waveform_with_residue(
    tf: &TransferFunction,
    samples: &[f64],
    sample_rate: f64,
) -> Result<(Vec<f64>, f64)> {
    let n = samples.len();
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::invalid("sample rate must be positive"));
    }
    let bin_hz = sample_rate / n as f64;
    let half = n / 2;
    let response: Vec<Complex> = (0..=half)
        .into_par_iter()
        .map(|b| tf.evaluate(b as f64 * bin_hz))
        .collect::<Result<_>>()?;

    let mut buf = spectrum(samples);
    buf[0] *= response[0];
    for b in 1..n.div_ceil(2) {
        buf[b] *= response[b];
        buf[n - b] *= response[b].conj();
    }
    if n % 2 == 0 {
        // The folding bin holds +fs/2 and -fs/2 together.
        buf[half] *= response[half].re;
    }
    plan(n, true).process(&mut buf);

    let scale = 1.0 / n as f64;
    let out: Vec<f64> = buf.iter().map(|c| c.re * scale).collect();
    let rms = |it: &mut dyn Iterator<Item = f64>| (it.map(|x| x * x).sum::<f64>() / n as f64).sqrt();
    let re_rms = rms(&mut out.iter().copied());
    let im_rms = rms(&mut buf.iter().map(|c| c.im * scale));
    let residue = if re_rms > 0.0 { im_rms / re_rms } else { im_rms };
    Ok((out, residue))
}

/// Carrier-referenced indices read off the three DFT lines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemodResult {
    pub a_out: Complex,
    pub p_out: Complex,
    /// Complex carrier line amplitude, in units of the synthesized `A`.
    pub carrier_out: Complex,
    /// Fraction of spectral energy outside the carrier and first sidebands.
    pub residual: f64,
}

/// Reads the carrier and sideband lines and converts them to indices.
///
/// Each line is expressed as a phasor relative to `t = 0`; dividing by the
/// carrier phasor puts both sidebands in the carrier's reference frame.
pub fn demodulate(samples: &[f64], spec: &WaveformSpec) -> Result<DemodResult> {
    let bins = spec.bins()?;
    let n = spec.n_samples;
    if samples.len() != n {
        return Err(Error::invalid(format!(
            "expected {n} samples, got {}",
            samples.len()
        )));
    }
    let x = spectrum(samples);
    let to_amplitude = 2.0 / n as f64;
    let carrier = x[bins.carrier] * to_amplitude;
    let lsb = x[bins.carrier - bins.offset] * to_amplitude;
    let usb = x[bins.carrier + bins.offset] * to_amplitude;

    let line_bins = [
        bins.carrier,
        bins.carrier - bins.offset,
        bins.carrier + bins.offset,
    ];
    let total: f64 = x.iter().map(|c| c.norm_sqr()).sum();
    let in_lines: f64 = line_bins
        .iter()
        .flat_map(|&b| [b, n - b])
        .map(|b| x[b].norm_sqr())
        .sum();
    let residual = if total > 0.0 {
        ((total - in_lines) / total).max(0.0)
    } else {
        0.0
    };

    if !(carrier.norm() >= DEFAULT_CARRIER_FLOOR) {
        return Err(Error::DegenerateCarrier {
            magnitude: carrier.norm(),
        });
    }
    Ok(DemodResult {
        a_out: (usb + lsb) / carrier,
        p_out: (usb - lsb) / carrier,
        carrier_out: carrier,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub method: SynthesisMethod,
    pub amplitude: f64,
    /// Accept indices above [`VERIFY_INDEX_LIMIT`].
    pub allow_large_index: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            method: SynthesisMethod::FullWaveform,
            amplitude: 1.0,
            allow_large_index: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub analytic: ModulationState,
    pub measured: DemodResult,
    pub max_rel_err: f64,
    pub waveform: WaveformSpec,
}

/// Runs the scatter-matrix prediction and the waveform measurement for the
/// same input and reports their largest relative disagreement over `a'`,
/// `p'` and `A'`.
pub fn verify(
    tf: &TransferFunction,
    fc: Frequency,
    fm: Frequency,
    am_index: f64,
    pm_index: f64,
) -> Result<Verification> {
    verify_with(tf, fc, fm, am_index, pm_index, &VerifyOptions::default())
}

pub fn verify_with(
    tf: &TransferFunction,
    fc: Frequency,
    fm: Frequency,
    am_index: f64,
    pm_index: f64,
    opts: &VerifyOptions,
) -> Result<Verification> {
    if !opts.allow_large_index
        && (am_index.abs() > VERIFY_INDEX_LIMIT || pm_index.abs() > VERIFY_INDEX_LIMIT)
    {
        return Err(Error::invalid(format!(
            "indices above {VERIFY_INDEX_LIMIT} exceed the verification regime \
             (a = {am_index}, p = {pm_index})"
        )));
    }
    let input = ModulationState::real(opts.amplitude, am_index, pm_index)?;
    let analytic = apply_scatter(&compute_scatter(tf, fc, fm)?, &input);

    let waveform = WaveformSpec::coherent(
        fc.hz(),
        fm.hz(),
        opts.amplitude,
        am_index,
        pm_index,
        opts.method,
    )?;
    let x = synthesize(&waveform)?;
    let y = filter_waveform(tf, &x, waveform.sample_rate)?;
    let measured = demodulate(&y, &waveform)?;

    let index_err =
        |got: Complex, want: Complex| (got - want).norm() / want.norm().max(INDEX_FLOOR);
    let max_rel_err = index_err(measured.a_out, analytic.am_index)
        .max(index_err(measured.p_out, analytic.pm_index))
        .max((measured.carrier_out - analytic.amplitude).norm() / analytic.amplitude.norm());

    Ok(Verification {
        analytic,
        measured,
        max_rel_err,
        waveform,
    })
}
