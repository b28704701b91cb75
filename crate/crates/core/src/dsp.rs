//! Zero-phase IIR band filtering.
//!
//! Filters are designed the classical way: an analog Butterworth prototype is
//! frequency-transformed (low-pass → band-pass or high-pass), discretized
//! with the prewarped bilinear transform, and factored into second-order
//! sections. Application is forward–backward (`filtfilt`): the signal is
//! extended by odd reflection, each cascade pass starts from the filter's
//! constant-input steady state scaled to the first sample, and the doubled
//! pass cancels the phase response exactly, so band-internal components come
//! through with zero group delay.
//!
//! The high-gamma band's upper edge sits exactly at Nyquist for 128 Hz
//! recordings; a band-pass with an edge at Nyquist is degenerate, so any band
//! whose upper edge reaches Nyquist is implemented as a high-pass at the
//! lower edge.

use crate::types::{BandDef, Recording};
use ndarray::Array2;
use num_complex::Complex64;
use thiserror::Error;

/// Prototype order used by [`bandpass`] and [`notch`].
pub const DEFAULT_FILTER_ORDER: usize = 4;

/// Q factor giving a ~1.7 Hz-wide notch at 50 Hz; narrow enough to leave
/// high-gamma content intact.
pub const DEFAULT_NOTCH_Q: f64 = 30.0;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("band edge {edge_hz} Hz is above the Nyquist frequency {nyquist_hz} Hz")]
    EdgeAboveNyquist { edge_hz: f64, nyquist_hz: f64 },
    #[error("invalid band: lo {lo_hz} Hz, hi {hi_hz} Hz")]
    InvalidBand { lo_hz: f64, hi_hz: f64 },
    #[error("filter order must be an even number ≥ 2, got {0}")]
    InvalidOrder(usize),
    #[error("notch frequency {f0_hz} Hz must lie strictly inside (0, {nyquist_hz}) Hz")]
    InvalidNotch { f0_hz: f64, nyquist_hz: f64 },
    #[error("notch Q must be positive and finite, got {0}")]
    InvalidQ(f64),
    #[error("signal of {got} samples is too short to filter (need more than {need})")]
    SignalTooShort { need: usize, got: usize },
}

/// Design request for a Butterworth filter: pass-band edges in Hz on a signal
/// sampled at `sample_rate_hz`, with an even prototype `order`. Setting
/// `hi_hz` at (or above within rounding of) Nyquist selects the high-pass
/// fallback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub lo_hz: f64,
    pub hi_hz: f64,
    pub sample_rate_hz: f64,
    pub order: usize,
}

/// One second-order section, denominator normalized to `a0 = 1`.
#[derive(Debug, Clone, Copy)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// DC gain of the section.
    fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    /// Direct-form-II-transposed state that reproduces the steady-state
    /// response to a constant input of `level`, so a constant signal passes
    /// through with no start-up transient.
    fn steady_state(&self, level: f64) -> (f64, f64) {
        let k = self.dc_gain();
        ((k - self.b0) * level, (self.b2 - self.a2 * k) * level)
    }
}

/// Analog Butterworth low-pass prototype: the `order` left-half-plane poles
/// on the unit circle, gain 1, no zeros.
fn butterworth_poles(order: usize) -> Vec<Complex64> {
    (0..order)
        .map(|k| {
            let theta = std::f64::consts::PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            Complex64::from_polar(1.0, theta)
        })
        .collect()
}

/// Prewarped analog frequency for a digital edge, with the design run at a
/// nominal sampling rate of 2 (the usual normalized-design convention).
fn warp(f_hz: f64, sample_rate_hz: f64) -> f64 {
    let wn = f_hz / (sample_rate_hz / 2.0); // in (0, 1)
    4.0 * (std::f64::consts::PI * wn / 2.0).tan()
}

struct Zpk {
    zeros: Vec<Complex64>,
    poles: Vec<Complex64>,
    gain: f64,
}

fn lowpass_to_bandpass(poles: Vec<Complex64>, w0: f64, bw: f64) -> Zpk {
    let order = poles.len();
    let mut bp_poles = Vec::with_capacity(order * 2);
    for p in poles {
        let s = p * (bw / 2.0);
        let d = (s * s - Complex64::new(w0 * w0, 0.0)).sqrt();
        bp_poles.push(s + d);
        bp_poles.push(s - d);
    }
    Zpk {
        zeros: vec![Complex64::new(0.0, 0.0); order],
        poles: bp_poles,
        gain: bw.powi(order as i32),
    }
}

fn lowpass_to_highpass(poles: Vec<Complex64>, w0: f64) -> Zpk {
    // k_hp = k · Π(-z)/Π(-p); the Butterworth prototype has no zeros and its
    // characteristic polynomial has unit constant term, so the gain stays 1.
    let order = poles.len();
    let prod_neg_p: Complex64 = poles.iter().map(|p| -p).product();
    let hp_poles = poles.iter().map(|p| Complex64::new(w0, 0.0) / p).collect();
    Zpk {
        zeros: vec![Complex64::new(0.0, 0.0); order],
        poles: hp_poles,
        gain: 1.0 / prod_neg_p.re,
    }
}

/// Bilinear transform at the nominal design rate of 2 (`fs2 = 4`), mapping
/// each analog root `s` to `(fs2 + s) / (fs2 - s)` and topping up the zeros
/// at z = -1.
fn bilinear(zpk: Zpk) -> Zpk {
    let fs2 = Complex64::new(4.0, 0.0);
    let mut num = Complex64::new(1.0, 0.0);
    for z in &zpk.zeros {
        num *= fs2 - z;
    }
    let mut den = Complex64::new(1.0, 0.0);
    for p in &zpk.poles {
        den *= fs2 - p;
    }
    let mut zeros: Vec<Complex64> = zpk.zeros.iter().map(|z| (fs2 + z) / (fs2 - z)).collect();
    let poles: Vec<Complex64> = zpk.poles.iter().map(|p| (fs2 + p) / (fs2 - p)).collect();
    zeros.resize(poles.len(), Complex64::new(-1.0, 0.0));
    Zpk {
        zeros,
        poles,
        gain: zpk.gain * (num / den).re,
    }
}

/// Pair conjugate poles with zeros into second-order sections. The designs in
/// this module produce even pole counts in conjugate pairs and real zeros
/// (at ±1), so the pairing is straightforward: sort the upper-half-plane
/// poles deterministically, hand each one zero pair.
fn to_sections(zpk: Zpk) -> Vec<Biquad> {
    let mut upper: Vec<Complex64> = zpk.poles.iter().copied().filter(|p| p.im > 1e-12).collect();
    assert_eq!(
        upper.len() * 2,
        zpk.poles.len(),
        "expected complex-conjugate pole pairs only"
    );
    upper.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });

    // Zeros arrive as real values at +1 / -1; spread them evenly so every
    // section gets one pair.
    let mut plus: usize = zpk.zeros.iter().filter(|z| z.re > 0.0).count();
    let mut minus = zpk.zeros.len() - plus;
    assert_eq!(plus + minus, zpk.poles.len());

    let mut sections = Vec::with_capacity(upper.len());
    for (idx, p) in upper.iter().enumerate() {
        let mut zs = [1.0f64, 1.0];
        for z in zs.iter_mut() {
            if plus > 0 && (minus == 0 || plus >= minus) {
                *z = 1.0;
                plus -= 1;
            } else {
                *z = -1.0;
                minus -= 1;
            }
        }
        let gain = if idx == 0 { zpk.gain } else { 1.0 };
        sections.push(Biquad {
            b0: gain,
            b1: -gain * (zs[0] + zs[1]),
            b2: gain * (zs[0] * zs[1]),
            a1: -2.0 * p.re,
            a2: p.norm_sqr(),
        });
    }
    sections
}

/// Design the second-order sections for `spec`. Returns the high-pass
/// fallback when the upper edge reaches Nyquist.
pub fn design_bandpass(spec: &FilterSpec) -> Result<Vec<Biquad>, DspError> {
    if spec.order < 2 || spec.order % 2 != 0 {
        return Err(DspError::InvalidOrder(spec.order));
    }
    let nyquist = spec.sample_rate_hz / 2.0;
    if !(spec.lo_hz > 0.0) || spec.lo_hz >= spec.hi_hz {
        return Err(DspError::InvalidBand {
            lo_hz: spec.lo_hz,
            hi_hz: spec.hi_hz,
        });
    }
    if spec.lo_hz >= nyquist {
        return Err(DspError::EdgeAboveNyquist {
            edge_hz: spec.lo_hz,
            nyquist_hz: nyquist,
        });
    }
    if spec.hi_hz > nyquist * (1.0 + 1e-9) {
        return Err(DspError::EdgeAboveNyquist {
            edge_hz: spec.hi_hz,
            nyquist_hz: nyquist,
        });
    }

    let proto = butterworth_poles(spec.order);
    let analog = if spec.hi_hz >= nyquist * (1.0 - 1e-9) {
        // Upper edge at Nyquist: band-pass is degenerate, fall back to a
        // high-pass at the lower edge.
        lowpass_to_highpass(proto, warp(spec.lo_hz, spec.sample_rate_hz))
    } else {
        let wlo = warp(spec.lo_hz, spec.sample_rate_hz);
        let whi = warp(spec.hi_hz, spec.sample_rate_hz);
        lowpass_to_bandpass(proto, (wlo * whi).sqrt(), whi - wlo)
    };
    Ok(to_sections(bilinear(analog)))
}

/// Second-order notch (RBJ cookbook) at `f0_hz` with quality factor `q`.
pub fn design_notch(f0_hz: f64, q: f64, sample_rate_hz: f64) -> Result<Vec<Biquad>, DspError> {
    let nyquist = sample_rate_hz / 2.0;
    if !(f0_hz > 0.0) || f0_hz >= nyquist {
        return Err(DspError::InvalidNotch {
            f0_hz,
            nyquist_hz: nyquist,
        });
    }
    if !(q > 0.0) || !q.is_finite() {
        return Err(DspError::InvalidQ(q));
    }
    let w = 2.0 * std::f64::consts::PI * f0_hz / sample_rate_hz;
    let alpha = w.sin() / (2.0 * q);
    let a0 = 1.0 + alpha;
    Ok(vec![Biquad {
        b0: 1.0 / a0,
        b1: -2.0 * w.cos() / a0,
        b2: 1.0 / a0,
        a1: -2.0 * w.cos() / a0,
        a2: (1.0 - alpha) / a0,
    }])
}

fn run_cascade(sections: &[Biquad], buf: &mut [f64]) {
    for s in sections {
        let x0 = buf[0];
        let (mut s1, mut s2) = s.steady_state(x0);
        for x in buf.iter_mut() {
            let input = *x;
            let y = s.b0 * input + s1;
            s1 = s.b1 * input - s.a1 * y + s2;
            s2 = s.b2 * input - s.a2 * y;
            *x = y;
        }
    }
}

/// Forward–backward application of a section cascade with odd-reflection
/// padding of `3 · order` samples on each side.
pub fn filtfilt(sections: &[Biquad], order: usize, signal: &[f64]) -> Result<Vec<f64>, DspError> {
    let n = signal.len();
    if n < 2 {
        return Err(DspError::SignalTooShort { need: 2, got: n });
    }
    let pad = (3 * order).min(n - 1);
    let mut buf = Vec::with_capacity(n + 2 * pad);
    let first = signal[0];
    let last = signal[n - 1];
    for i in 0..pad {
        buf.push(2.0 * first - signal[pad - i]);
    }
    buf.extend_from_slice(signal);
    for i in 0..pad {
        buf.push(2.0 * last - signal[n - 2 - i]);
    }

    run_cascade(sections, &mut buf);
    buf.reverse();
    run_cascade(sections, &mut buf);
    buf.reverse();

    Ok(buf[pad..pad + n].to_vec())
}

fn filter_matrix(sections: &[Biquad], order: usize, data: &Array2<f64>) -> Result<Array2<f64>, DspError> {
    let mut out = Array2::<f64>::zeros(data.raw_dim());
    for (row, mut out_row) in data.rows().into_iter().zip(out.rows_mut()) {
        let channel: Vec<f64> = row.to_vec();
        let filtered = filtfilt(sections, order, &channel)?;
        for (dst, v) in out_row.iter_mut().zip(filtered) {
            *dst = v;
        }
    }
    Ok(out)
}

/// Zero-phase Butterworth band-pass of every channel of a recording.
pub fn bandpass(rec: &Recording, band: &BandDef) -> Result<Recording, DspError> {
    let spec = FilterSpec {
        lo_hz: band.lo_hz,
        hi_hz: band.hi_hz,
        sample_rate_hz: rec.sample_rate_hz,
        order: DEFAULT_FILTER_ORDER,
    };
    let sections = design_bandpass(&spec)?;
    let data = filter_matrix(&sections, spec.order, &rec.data)?;
    Ok(Recording {
        subject_id: rec.subject_id.clone(),
        condition: rec.condition,
        sample_rate_hz: rec.sample_rate_hz,
        data,
    })
}

/// Zero-phase band-pass of a single signal.
pub(crate) fn bandpass_signal(
    signal: &[f64],
    sample_rate_hz: f64,
    band: &BandDef,
) -> Result<Vec<f64>, DspError> {
    let spec = FilterSpec {
        lo_hz: band.lo_hz,
        hi_hz: band.hi_hz,
        sample_rate_hz,
        order: DEFAULT_FILTER_ORDER,
    };
    let sections = design_bandpass(&spec)?;
    filtfilt(&sections, spec.order, signal)
}

/// Zero-phase notch at `f0_hz` (power-line removal) on every channel.
pub fn notch(rec: &Recording, f0_hz: f64, q: f64) -> Result<Recording, DspError> {
    let sections = design_notch(f0_hz, q, rec.sample_rate_hz)?;
    let data = filter_matrix(&sections, 2, &rec.data)?;
    Ok(Recording {
        subject_id: rec.subject_id.clone(),
        condition: rec.condition,
        sample_rate_hz: rec.sample_rate_hz,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{band_definitions, BandName, Condition};
    use ndarray::Array2;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const FS: f64 = 128.0;

    fn tone(freq: f64, seconds: f64) -> Vec<f64> {
        let n = (seconds * FS) as usize;
        (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / FS).sin())
            .collect()
    }

    fn central_rms(x: &[f64]) -> f64 {
        let n = x.len();
        let slice = &x[n / 4..3 * n / 4];
        (slice.iter().map(|v| v * v).sum::<f64>() / slice.len() as f64).sqrt()
    }

    fn band(name: BandName) -> crate::types::BandDef {
        name.definition()
    }

    fn filter_tone(b: &crate::types::BandDef, freq: f64) -> (Vec<f64>, Vec<f64>) {
        let x = tone(freq, 4.0);
        let spec = FilterSpec {
            lo_hz: b.lo_hz,
            hi_hz: b.hi_hz,
            sample_rate_hz: FS,
            order: DEFAULT_FILTER_ORDER,
        };
        let sections = design_bandpass(&spec).unwrap();
        let y = filtfilt(&sections, spec.order, &x).unwrap();
        (x, y)
    }

    #[test]
    fn alpha_band_passes_alpha_tone() {
        let (x, y) = filter_tone(&band(BandName::Alpha), 10.0);
        let ratio = central_rms(&y) / central_rms(&x);
        assert!(
            (0.89..=1.12).contains(&ratio),
            "pass-band ratio {ratio} out of range"
        );
    }

    #[test]
    fn low_gamma_band_rejects_alpha_tone() {
        let (x, y) = filter_tone(&band(BandName::LowGamma), 10.0);
        let ratio = central_rms(&y) / central_rms(&x);
        assert!(ratio <= 0.03, "stop-band ratio {ratio} too large");
    }

    #[test]
    fn bands_attenuate_an_octave_outside_edges() {
        for b in band_definitions() {
            let below = b.lo_hz / 2.0;
            let (x, y) = filter_tone(&b, below);
            let ratio = central_rms(&y) / central_rms(&x);
            assert!(
                ratio <= 0.0316,
                "{}: {below} Hz leaked through at ratio {ratio}",
                b.name
            );
            let above = b.hi_hz * 2.0;
            if above < FS / 2.0 {
                let (x, y) = filter_tone(&b, above);
                let ratio = central_rms(&y) / central_rms(&x);
                assert!(
                    ratio <= 0.0316,
                    "{}: {above} Hz leaked through at ratio {ratio}",
                    b.name
                );
            }
        }
    }

    #[test]
    fn passband_center_gain_within_one_db() {
        for b in band_definitions() {
            // High gamma runs as a high-pass (upper edge at Nyquist), so its
            // "center" probe sits inside the pass-band rather than at the
            // geometric center, which the -3 dB edge at 45 Hz would drag down.
            let center = if b.hi_hz >= FS / 2.0 {
                60.0
            } else {
                (b.lo_hz * b.hi_hz).sqrt()
            };
            let (x, y) = filter_tone(&b, center);
            let ratio = central_rms(&y) / central_rms(&x);
            assert!(
                (0.891..=1.122).contains(&ratio),
                "{}: center gain {ratio} outside ±1 dB",
                b.name
            );
        }
    }

    #[test]
    fn zero_signal_stays_zero() {
        let x = vec![0.0; 512];
        let spec = FilterSpec {
            lo_hz: 8.0,
            hi_hz: 13.0,
            sample_rate_hz: FS,
            order: 4,
        };
        let sections = design_bandpass(&spec).unwrap();
        let y = filtfilt(&sections, spec.order, &x).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn filtering_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..512).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let z: Vec<f64> = (0..512).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (a, b) = (0.7, -1.3);
        let combo: Vec<f64> = x.iter().zip(&z).map(|(u, v)| a * u + b * v).collect();

        let spec = FilterSpec {
            lo_hz: 13.0,
            hi_hz: 25.0,
            sample_rate_hz: FS,
            order: 4,
        };
        let sections = design_bandpass(&spec).unwrap();
        let fx = filtfilt(&sections, 4, &x).unwrap();
        let fz = filtfilt(&sections, 4, &z).unwrap();
        let fc = filtfilt(&sections, 4, &combo).unwrap();

        let mut err = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..512 {
            let expected = a * fx[i] + b * fz[i];
            err += (fc[i] - expected).powi(2);
            scale += expected.powi(2);
        }
        assert!(err.sqrt() <= 1e-9 * scale.sqrt().max(1.0));
    }

    #[test]
    fn band_internal_tone_has_zero_lag() {
        let (x, y) = filter_tone(&band(BandName::Alpha), 10.0);
        // Cross-correlate over the central window at small integral lags; the
        // peak must sit at lag 0 for a zero-phase filter.
        let n = x.len();
        let core = n / 4..3 * n / 4;
        let mut best_lag = 0i64;
        let mut best = f64::MIN;
        for lag in -5i64..=5 {
            let mut c = 0.0;
            for i in core.clone() {
                let j = i as i64 + lag;
                if j >= 0 && (j as usize) < n {
                    c += x[i] * y[j as usize];
                }
            }
            if c > best {
                best = c;
                best_lag = lag;
            }
        }
        assert_eq!(best_lag, 0);
    }

    #[test]
    fn filtered_noise_concentrates_power_in_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 4096usize;
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for name in [BandName::Alpha, BandName::LowGamma] {
            let b = band(name);
            let spec = FilterSpec {
                lo_hz: b.lo_hz,
                hi_hz: b.hi_hz,
                sample_rate_hz: FS,
                order: 4,
            };
            let sections = design_bandpass(&spec).unwrap();
            let y = filtfilt(&sections, 4, &x).unwrap();
            // Periodogram by direct DFT; Parseval gives the total.
            let mut in_band = 0.0f64;
            let mut total = 0.0f64;
            for k in 0..=n / 2 {
                let f = k as f64 * FS / n as f64;
                let (mut re, mut im) = (0.0f64, 0.0f64);
                for (i, &v) in y.iter().enumerate() {
                    let phase = -2.0 * std::f64::consts::PI * (k * i) as f64 / n as f64;
                    re += v * phase.cos();
                    im += v * phase.sin();
                }
                let weight = if k == 0 || k == n / 2 { 1.0 } else { 2.0 };
                let p = weight * (re * re + im * im);
                total += p;
                if f >= b.lo_hz && f <= b.hi_hz {
                    in_band += p;
                }
            }
            let fraction = in_band / total;
            assert!(
                fraction >= 0.90,
                "{name}: only {fraction:.3} of power in band"
            );
        }
    }

    #[test]
    fn high_gamma_runs_as_high_pass() {
        let b = band(BandName::HighGamma);
        assert_eq!(b.hi_hz, FS / 2.0);
        // 60 Hz passes…
        let (x, y) = filter_tone(&b, 60.0);
        assert!(central_rms(&y) / central_rms(&x) > 0.85);
        // …and 22.5 Hz (an octave below the lower edge) is crushed.
        let (x, y) = filter_tone(&b, 22.5);
        assert!(central_rms(&y) / central_rms(&x) <= 0.0316);
    }

    #[test]
    fn edges_above_nyquist_are_rejected() {
        let spec = FilterSpec {
            lo_hz: 45.0,
            hi_hz: 64.0,
            sample_rate_hz: 100.0,
            order: 4,
        };
        assert!(matches!(
            design_bandpass(&spec),
            Err(DspError::EdgeAboveNyquist { .. })
        ));
        let spec = FilterSpec {
            lo_hz: 70.0,
            hi_hz: 80.0,
            sample_rate_hz: 128.0,
            order: 4,
        };
        assert!(matches!(
            design_bandpass(&spec),
            Err(DspError::EdgeAboveNyquist { .. })
        ));
    }

    #[test]
    fn odd_orders_are_rejected() {
        let spec = FilterSpec {
            lo_hz: 8.0,
            hi_hz: 13.0,
            sample_rate_hz: 128.0,
            order: 3,
        };
        assert!(matches!(design_bandpass(&spec), Err(DspError::InvalidOrder(3))));
    }

    #[test]
    fn notch_removes_line_frequency() {
        let x = tone(50.0, 4.0);
        let sections = design_notch(50.0, DEFAULT_NOTCH_Q, FS).unwrap();
        let y = filtfilt(&sections, 2, &x).unwrap();
        assert!(central_rms(&y) / central_rms(&x) <= 0.1);
    }

    #[test]
    fn notch_leaves_dc_untouched() {
        let x = vec![5.0; 512];
        let sections = design_notch(50.0, DEFAULT_NOTCH_Q, FS).unwrap();
        let y = filtfilt(&sections, 2, &x).unwrap();
        for &v in &y {
            assert!((v - 5.0).abs() <= 5.0 * 1e-6);
        }
    }

    #[test]
    fn notch_leaves_neighbors_mostly_untouched() {
        let sections = design_notch(50.0, DEFAULT_NOTCH_Q, FS).unwrap();
        for f in [45.0, 55.0] {
            let x = tone(f, 4.0);
            let y = filtfilt(&sections, 2, &x).unwrap();
            let ratio = central_rms(&y) / central_rms(&x);
            assert!(
                (0.841..=1.188).contains(&ratio),
                "{f} Hz: ratio {ratio} outside ±1.5 dB"
            );
        }
    }

    #[test]
    fn notch_rejects_bad_parameters() {
        assert!(matches!(
            design_notch(64.0, 30.0, FS),
            Err(DspError::InvalidNotch { .. })
        ));
        assert!(matches!(
            design_notch(50.0, 0.0, FS),
            Err(DspError::InvalidQ(_))
        ));
    }

    #[test]
    fn recording_level_bandpass_preserves_shape() {
        let data = Array2::from_shape_fn((3, 512), |(c, t)| {
            ((2.0 * std::f64::consts::PI * 10.0 * t as f64 / FS) + c as f64).sin()
        });
        let rec = Recording::new("s1", Condition::Rest, FS, data).unwrap();
        let out = bandpass(&rec, &band(BandName::Alpha)).unwrap();
        assert_eq!(out.data.dim(), (3, 512));
        assert_eq!(out.subject_id, "s1");
        assert_eq!(out.condition, Condition::Rest);
    }
}
