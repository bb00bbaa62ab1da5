use ndarray::Array1;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::FeatureMatrix;
use crate::dataio::{Cohort, ParcellatedTimeseries};
use crate::error::{Error, Result};

/// Default low-frequency band in Hz.
pub const DEFAULT_BAND: (f64, f64) = (0.008, 0.09);

/// One-sided DFT bins `k >= 1` whose frequency `k / (T * tr)` lies in
/// `[f_lo, f_hi]`.
pub fn alff_band_bins(n_timepoints: usize, tr_seconds: f64, f_lo: f64, f_hi: f64) -> Result<Vec<usize>> {
    let duration = n_timepoints as f64 * tr_seconds;
    let resolution = 1.0 / duration;
    let band_err = || Error::Band {
        f_lo,
        f_hi,
        resolution,
    };
    if !(f_hi > f_lo) || resolution > f_hi - f_lo {
        return Err(band_err());
    }
    let bins: Vec<usize> = (1..=n_timepoints / 2)
        .filter(|&k| {
            let f = k as f64 / duration;
            f >= f_lo && f <= f_hi
        })
        .collect();
    if bins.is_empty() {
        return Err(band_err());
    }
    Ok(bins)
}

/// Mean square-rooted DFT magnitude of each region over the band.
pub fn alff(ts: &ParcellatedTimeseries, f_lo: f64, f_hi: f64) -> Result<Array1<f64>> {
    let t = ts.n_timepoints();
    let bins = alff_band_bins(t, ts.tr_seconds, f_lo, f_hi)?;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(t);
    let mut buffer = vec![Complex::new(0.0, 0.0); t];
    let mut out = Array1::zeros(ts.n_regions());
    for (b, col) in ts.values.columns().into_iter().enumerate() {
        for (slot, &v) in buffer.iter_mut().zip(col.iter()) {
            *slot = Complex::new(v, 0.0);
        }
        fft.process(&mut buffer);
        let total: f64 = bins.iter().map(|&k| buffer[k].norm().sqrt()).sum();
        out[b] = total / bins.len() as f64;
    }
    Ok(out)
}

pub fn alff_features(cohort: &Cohort, f_lo: f64, f_hi: f64) -> Result<FeatureMatrix> {
    let rows: Vec<Array1<f64>> = cohort
        .timeseries
        .par_iter()
        .map(|ts| alff(ts, f_lo, f_hi))
        .collect::<Result<_>>()?;
    let names = cohort
        .region_labels()
        .iter()
        .map(|l| format!("alff_{l}"))
        .collect();
    FeatureMatrix::from_rows(rows, names, cohort.subject_ids())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use std::f64::consts::PI;

    fn sinusoid_ts(t: usize, tr: f64, bins: &[usize]) -> ParcellatedTimeseries {
        let values = Array2::from_shape_fn((t, bins.len()), |(i, b)| {
            (2.0 * PI * bins[b] as f64 * i as f64 / t as f64).sin()
        });
        let labels = (0..bins.len()).map(|b| format!("r{b}")).collect();
        ParcellatedTimeseries::new("s", values, tr, labels).unwrap()
    }

    #[test]
    fn reference_band_bin_count() {
        let bins = alff_band_bins(570, 0.8, 0.008, 0.09).unwrap();
        assert_eq!(bins.first(), Some(&4));
        assert_eq!(bins.last(), Some(&41));
        assert_eq!(bins.len(), 38);
    }

    #[test]
    fn in_band_sinusoid_dominates() {
        let ts = sinusoid_ts(570, 0.8, &[20, 150]);
        let a = alff(&ts, 0.008, 0.09).unwrap();
        assert!(a[0] / a[1] > 10.0, "{a}");
    }

    #[test]
    fn zero_signal_has_zero_alff() {
        let labels = vec!["a".into(), "b".into()];
        let ts = ParcellatedTimeseries::new("s", Array2::zeros((64, 2)), 2.0, labels).unwrap();
        assert_eq!(alff(&ts, 0.008, 0.09).unwrap().to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn constant_offset_is_ignored() {
        let ts = sinusoid_ts(128, 0.8, &[5, 9]);
        let mut shifted = ts.clone();
        shifted.values.mapv_inplace(|v| v + 3.5);
        let a = alff(&ts, 0.008, 0.09).unwrap();
        let b = alff(&shifted, 0.008, 0.09).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-5);
        }
    }

    #[test]
    fn empty_band_is_an_error() {
        assert!(matches!(
            alff_band_bins(16, 1.0, 0.001, 0.01).unwrap_err(),
            Error::Band { .. }
        ));
        assert!(alff_band_bins(570, 0.8, 0.09, 0.008).is_err());
    }
}
