mod common;

use common::*;
use ergomon_core::signal::*;
use ergomon_core::Error;
use rand::Rng;
use std::f64::consts::PI;

#[test]
fn cubic_derivatives_are_exact_everywhere() {
    let fs = 100.0;
    let x: Vec<f64> = (0..60)
        .map(|i| {
            let t = i as f64 / fs;
            0.3 - 1.2 * t + 2.0 * t * t - 4.0 * t * t * t
        })
        .collect();
    let d = differentiate(&x, fs, DifferentiatorSpec::default()).unwrap();
    assert_eq!(d.lag, 5);
    assert_eq!(d.first.len(), x.len());
    for i in 0..x.len() {
        let t = i as f64 / fs;
        assert_close(d.smoothed[i], x[i], 1e-9, "value");
        assert_close(d.first[i], -1.2 + 4.0 * t - 12.0 * t * t, 1e-8, "first");
        assert_close(d.second[i], 4.0 - 24.0 * t, 1e-6, "second");
    }
}

#[test]
fn sine_derivative_amplitude_within_two_percent() {
    for (f, fs) in [
        (0.25, 60.0),
        (0.5, 60.0),
        (0.8, 60.0),
        (1.0, 100.0),
        (1.5, 120.0),
        (2.0, 200.0),
    ] {
        let w = 2.0 * PI * f;
        let x: Vec<f64> = (0..(10.0 * fs) as usize)
            .map(|i| (w * i as f64 / fs).sin())
            .collect();
        let d = differentiate(&x, fs, DifferentiatorSpec::default()).unwrap();
        let inner = &d.first[20..x.len() - 20];
        let peak1 = inner.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let peak2 = d.second[20..x.len() - 20]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(
            (peak1 / w - 1.0).abs() < 0.02,
            "f = {f}: first {peak1} vs {w}"
        );
        assert!(
            (peak2 / (w * w) - 1.0).abs() < 0.02,
            "f = {f}: second {peak2} vs {}",
            w * w
        );
    }
}

#[test]
fn streaming_matches_batch() {
    let mut r = seeded();
    let n = 200;
    let cols: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..n).map(|_| r.random_range(-1.0..1.0)).collect())
        .collect();
    let mut d = Differentiator::new(DifferentiatorSpec::default(), 120.0, 3).unwrap();
    let mut samples = Vec::new();
    for i in 0..n {
        let out = d.push(&[cols[0][i], cols[1][i], cols[2][i]]).unwrap();
        for s in &out {
            assert!(s.index + d.lag() <= i, "sample {} emitted at {i}", s.index);
        }
        samples.extend(out);
    }
    samples.extend(d.finish().unwrap());
    assert_eq!(samples.len(), n);
    for (c, col) in cols.iter().enumerate() {
        let batch = differentiate(col, 120.0, DifferentiatorSpec::default()).unwrap();
        for (i, s) in samples.iter().enumerate() {
            assert_eq!(s.index, i);
            assert_eq!(s.first[c], batch.first[i]);
            assert_eq!(s.second[c], batch.second[i]);
        }
    }
}

#[test]
fn short_streams_and_bad_specs_fail() {
    let mut d = Differentiator::new(DifferentiatorSpec::default(), 60.0, 1).unwrap();
    for _ in 0..10 {
        assert!(d.push(&[1.0]).unwrap().is_empty());
    }
    assert!(matches!(d.finish(), Err(Error::WindowTooLong { .. })));
    assert!(differentiate(&[1.0; 5], 60.0, DifferentiatorSpec::default()).is_err());
    assert!(DifferentiatorSpec {
        window: 10,
        order: 3
    }
    .validate()
    .is_err());
    assert!(DifferentiatorSpec {
        window: 5,
        order: 5
    }
    .validate()
    .is_err());
    assert!(DifferentiatorSpec {
        window: 5,
        order: 1
    }
    .validate()
    .is_err());
}

fn analog_lowpass(f: f64, fc: f64, fs: f64, n: usize) -> f64 {
    let ratio = (PI * f / fs).tan() / (PI * fc / fs).tan();
    1.0 / (1.0 + ratio.powi(2 * n as i32)).sqrt()
}

#[test]
fn butterworth_gain_matches_prewarped_prototype() {
    for n in [2, 4, 6] {
        let spec = FilterSpec {
            kind: FilterKind::LowPass { cutoff: 40.0 },
            order: n,
            sample_rate: 500.0,
        };
        let filt = ButterworthFilter::new(&spec).unwrap();
        for f in [1.0, 10.0, 30.0, 40.0, 55.0, 100.0, 200.0] {
            assert_close(
                filt.gain(f),
                analog_lowpass(f, 40.0, 500.0, n),
                1e-9,
                "low-pass gain",
            );
        }
        assert_close(filt.gain_db(40.0), -3.0103, 1e-3, "corner");
    }
}

fn emg_band(fs: f64) -> ButterworthFilter {
    let c = EmgConfig::default();
    ButterworthFilter::new(&FilterSpec {
        kind: FilterKind::BandPass {
            low: c.band_low,
            high: c.band_high,
        },
        order: c.order,
        sample_rate: fs,
    })
    .unwrap()
}

fn steady_amplitude(filt: &mut ButterworthFilter, f: f64, fs: f64) -> f64 {
    let n = (fs * 20.0) as usize;
    let mut peak = 0.0f64;
    for i in 0..n {
        let y = filt.process((2.0 * PI * f * i as f64 / fs).sin());
        if i > n / 2 {
            peak = peak.max(y.abs());
        }
    }
    peak
}

#[test]
fn emg_band_pass_rejects_drift_and_keeps_the_band() {
    let fs = 2000.0;
    let filt = emg_band(fs);
    assert!(filt.gain_db(0.5) <= -20.0, "{}", filt.gain_db(0.5));
    assert!(filt.gain_db(50.0).abs() <= 1.0, "{}", filt.gain_db(50.0));
    assert!(filt.gain_db(150.0).abs() <= 1.0);
    assert!(steady_amplitude(&mut emg_band(fs), 0.5, fs) <= 0.1);
    let pass = steady_amplitude(&mut emg_band(fs), 50.0, fs);
    assert!((pass - 1.0).abs() <= 0.13, "{pass}");
}

#[test]
fn low_rates_are_rejected() {
    let mvc = [1.0; N_EMG];
    assert!(matches!(
        EmgProcessor::new(1000.0, &mvc, &EmgConfig::default()),
        Err(Error::SampleRateTooLow { .. })
    ));
    let mut bad = mvc;
    bad[3] = 0.0;
    assert!(EmgProcessor::new(2000.0, &bad, &EmgConfig::default()).is_err());
}

#[test]
fn emg_envelope_of_zero_and_dc() {
    let fs = 2000.0;
    let mvc = [0.5; N_EMG];
    let zero = vec![[0.0; N_EMG]; 4000];
    assert!(process_emg(&zero, fs, &mvc, &EmgConfig::default())
        .unwrap()
        .iter()
        .all(|s| s.iter().all(|v| *v == 0.0)));
    let dc = vec![[0.3; N_EMG]; 20000];
    let out = process_emg(&dc, fs, &mvc, &EmgConfig::default()).unwrap();
    for v in out.last().unwrap() {
        assert!(v.abs() < 1e-3, "{v}");
    }
}

#[test]
fn emg_envelope_tracks_normalized_rms() {
    let fs = 2000.0;
    let mut r = seeded();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let tones: Vec<(f64, f64, f64)> = (0..12)
            .map(|_| {
                (
                    r.random_range(20.0..300.0),
                    r.random_range(0.05..0.3),
                    r.random_range(0.0..2.0 * PI),
                )
            })
            .collect();
        let rms = (tones.iter().map(|t| t.1 * t.1 / 2.0).sum::<f64>()).sqrt();
        let m: f64 = r.random_range(0.2..2.0);
        let raw: Vec<[f64; N_EMG]> = (0..8000)
            .map(|i| {
                let t = i as f64 / fs;
                let v: f64 = tones
                    .iter()
                    .map(|(f, a, p)| a * (2.0 * PI * f * t + p).sin())
                    .sum();
                [v + 0.7; N_EMG]
            })
            .collect();
        let out = process_emg(&raw, fs, &[m; N_EMG], &EmgConfig::default()).unwrap();
        let tail = &out[6000..];
        let mean = tail.iter().map(|s| s[0]).sum::<f64>() / tail.len() as f64;
        worst = worst.max((mean / (rms / m) - 1.0).abs());
    }
    assert!(worst < 0.1, "relative envelope error {worst}");
}

#[test]
fn resampling_bridges_short_gaps_and_flags_long_ones() {
    let times: Vec<f64> = (0..100)
        .map(|i| i as f64 * 0.01 + 0.0003 * (i % 3) as f64)
        .collect();
    let mut a: Vec<Option<f64>> = times.iter().map(|t| Some(2.0 * t + 1.0)).collect();
    for k in [10, 11, 12] {
        a[k] = None;
    }
    for k in 40..60 {
        a[k] = None;
    }
    let out = resample_linear(&times, &[a], 100.0).unwrap();
    assert_eq!(out.times.len(), 100);
    for (t, v) in out.times.iter().zip(&out.channels[0]) {
        assert_close(*v, 2.0 * t + 1.0, 1e-9, "ramp");
    }
    assert_eq!(out.gaps.len(), 1);
    assert!(out.gaps[0].periods > MAX_GAP_PERIODS);
    assert!(resample_linear(&times, &[vec![Some(1.0); 3]], 100.0).is_err());
    assert!(resample_linear(&times, &[], 0.0).is_err());
}
