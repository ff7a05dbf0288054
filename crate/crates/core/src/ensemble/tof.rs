//! Time-of-flight histograms and Gaussian fits.

use crate::error::{CoreError, CoreResult};

/// Default histogram bin width, s.
pub const DEFAULT_BIN_WIDTH: f64 = 2e-9;

#[derive(Debug, Clone)]
pub struct TofHistogram {
    /// Bin edges, length counts.len() + 1, s.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub bin_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMethod {
    /// Maximum likelihood on the raw samples.
    SampleMle,
    /// Least squares on the binned histogram.
    BinnedLeastSquares,
}

#[derive(Debug, Clone)]
pub struct GaussianFit {
    pub mean: f64,
    pub sigma: f64,
    /// Standard errors.
    pub mean_err: f64,
    pub sigma_err: f64,
    pub method: FitMethod,
}

/// Histogram + MLE fit + binned least-squares fit of arrival times.
pub fn fit_gaussian_tof(
    times: &[f64],
    bin_width: f64,
) -> CoreResult<(TofHistogram, GaussianFit, GaussianFit)> {
    if times.len() < 10 {
        return Err(CoreError::DegenerateData(format!(
            "need at least 10 samples, got {}",
            times.len()
        )));
    }
    let t_lo = times.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_hi = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if t_lo == t_hi {
        return Err(CoreError::DegenerateData(
            "all arrival times identical".into(),
        ));
    }
    let n = times.len() as f64;
    let mean = times.iter().sum::<f64>() / n;
    let var = times.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n;
    let sigma = var.sqrt();
    let mle = GaussianFit {
        mean,
        sigma,
        mean_err: sigma / n.sqrt(),
        sigma_err: sigma / (2.0 * n).sqrt(),
        method: FitMethod::SampleMle,
    };

    // Histogram aligned to multiples of the bin width.
    let t_min = times.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_max = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let first = (t_min / bin_width).floor();
    let n_bins = (((t_max / bin_width).floor() - first) as usize + 1).max(1);
    let mut counts = vec![0u64; n_bins];
    for &t in times {
        let b = ((t / bin_width).floor() - first) as usize;
        counts[b.min(n_bins - 1)] += 1;
    }
    let edges: Vec<f64> = (0..=n_bins)
        .map(|i| (first + i as f64) * bin_width)
        .collect();
    let hist = TofHistogram {
        edges,
        counts,
        bin_width,
    };

    let binned = fit_binned(&hist, mean, sigma)?;
    Ok((hist, mle, binned))
}

/// Gauss-Newton least squares of A exp(-(t-mu)^2 / (2 s^2)) on the bins.
fn fit_binned(hist: &TofHistogram, mu0: f64, s0: f64) -> CoreResult<GaussianFit> {
    let centers: Vec<f64> = hist
        .edges
        .windows(2)
        .map(|w| 0.5 * (w[0] + w[1]))
        .collect();
    let y: Vec<f64> = hist.counts.iter().map(|&c| c as f64).collect();
    let mut amp = y.iter().cloned().fold(0.0, f64::max).max(1.0);
    let mut mu = mu0;
    let mut s = s0.max(hist.bin_width / 4.0);

    for _ in 0..200 {
        // Residuals and Jacobian of r_i = y_i - A g_i.
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for (c, yi) in centers.iter().zip(&y) {
            let u = (c - mu) / s;
            let g = (-0.5 * u * u).exp();
            let r = yi - amp * g;
            let da = g;
            let dmu = amp * g * u / s;
            let ds = amp * g * u * u / s;
            let grad = [da, dmu, ds];
            for i in 0..3 {
                for j in 0..3 {
                    jtj[i][j] += grad[i] * grad[j];
                }
                jtr[i] += grad[i] * r;
            }
        }
        // Levenberg damping keeps the step sane for sparse histograms.
        for (i, row) in jtj.iter_mut().enumerate() {
            row[i] *= 1.0 + 1e-6;
            row[i] += 1e-12;
            let _ = i;
        }
        let step = solve3(&jtj, &jtr);
        amp += step[0];
        mu += step[1];
        s += step[2];
        s = s.abs().max(hist.bin_width * 1e-3);
        amp = amp.max(1e-9);
        if step[1].abs() < 1e-15 * s.max(1e-30) && step[2].abs() < 1e-15 * s {
            break;
        }
    }
    if !(s > 0.0) || !mu.is_finite() {
        return Err(CoreError::DegenerateData(
            "binned Gaussian fit did not converge".into(),
        ));
    }
    // Counting-statistics errors from the fitted curve.
    let n_tot: f64 = y.iter().sum();
    Ok(GaussianFit {
        mean: mu,
        sigma: s,
        mean_err: s / n_tot.max(1.0).sqrt(),
        sigma_err: s / (2.0 * n_tot.max(1.0)).sqrt(),
        method: FitMethod::BinnedLeastSquares,
    })
}

fn solve3(a: &[[f64; 3]; 3], b: &[f64; 3]) -> [f64; 3] {
    let m = nalgebra::Matrix3::from_fn(|i, j| a[i][j]);
    let v = nalgebra::Vector3::new(b[0], b[1], b[2]);
    match m.lu().solve(&v) {
        Some(x) => [x[0], x[1], x[2]],
        None => [0.0, 0.0, 0.0],
    }
}

/// Mean velocity implied by a TOF mean, using a reference trajectory to
/// absorb the acceleration-region time deficit: with `t0 = t_ref - L/v_ref`
/// the conversion is `v = L / (t - t0)`, exact at the reference point.
pub fn velocity_from_tof(mean_tof: f64, plane_distance: f64, t_ref: f64, v_ref: f64) -> f64 {
    let t0 = t_ref - plane_distance / v_ref;
    plane_distance / (mean_tof - t0)
}
