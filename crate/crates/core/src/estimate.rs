//! Transmittance and excess-noise estimation from paired symbols, with Gaussian confidence bounds.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::DetectorModel;
use crate::error::{Error, Result};
use crate::snu::SymbolFrame;
use crate::stats;

/// Sufficient statistics of the per-quadrature regression y = g·x + z. Merging is associative.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LinkStats {
    pub sxx: f64,
    pub sxy: f64,
    pub syy: f64,
    /// Number of complex symbols (two real samples each).
    pub n: u64,
}

impl LinkStats {
    pub fn from_pairs(x: &[Complex64], y: &[Complex64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Contract(format!("symbol streams differ in length: {} vs {}", x.len(), y.len())));
        }
        let mut s = LinkStats { n: x.len() as u64, ..Default::default() };
        for (a, b) in x.iter().zip(y) {
            s.sxx += a.norm_sqr();
            s.sxy += a.re * b.re + a.im * b.im;
            s.syy += b.norm_sqr();
        }
        Ok(s)
    }

    pub fn merge(self, o: LinkStats) -> LinkStats {
        LinkStats { sxx: self.sxx + o.sxx, sxy: self.sxy + o.sxy, syy: self.syy + o.syy, n: self.n + o.n }
    }

    pub fn estimate(&self, tau: f64, t: f64, delta_fail: f64) -> Result<LinkEstimate> {
        if self.n < 2 {
            return Err(Error::Estimation("need at least two symbols".into()));
        }
        if !(self.sxx > 0.0) {
            return Err(Error::Estimation("transmitted symbols have zero energy".into()));
        }
        if !(tau > 0.0) {
            return Err(Error::Domain("detector efficiency must be positive".into()));
        }
        let g = self.sxy / self.sxx;
        let dof = (2 * self.n - 1) as f64;
        let res = ((self.syy - g * self.sxy) / dof).max(0.0);
        let eta = 2.0 * g * g / tau;
        let xi = 2.0 * (res - 1.0 - t / 2.0) / tau;
        Ok(LinkEstimate {
            eta_hat: eta,
            xi_hat: xi,
            n_used: self.n,
            eta_low: eta,
            xi_up: xi,
            delta_fail,
            gain: g,
            gain_std: (res / self.sxx).sqrt(),
            residual_var: res,
            tau,
            t,
        })
    }
}

/// Link parameters in SNU. `xi_hat` and `xi_up` are referenced at the channel output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkEstimate {
    pub eta_hat: f64,
    pub xi_hat: f64,
    pub n_used: u64,
    pub eta_low: f64,
    pub xi_up: f64,
    pub delta_fail: f64,
    pub gain: f64,
    pub gain_std: f64,
    pub residual_var: f64,
    pub tau: f64,
    pub t: f64,
}

impl LinkEstimate {
    /// Known link values with a zero-width interval, e.g. for formula-path rate evaluation.
    pub fn from_model(eta: f64, xi_out: f64, tau: f64, t: f64, n: u64, delta_fail: f64) -> Self {
        let g = (tau * eta / 2.0).sqrt();
        LinkEstimate {
            eta_hat: eta,
            xi_hat: xi_out,
            n_used: n,
            eta_low: eta,
            xi_up: xi_out,
            delta_fail,
            gain: g,
            gain_std: 0.0,
            residual_var: 1.0 + t / 2.0 + tau * xi_out / 2.0,
            tau,
            t,
        }
    }

    pub fn xi_hat_in(&self) -> f64 {
        xi_out_to_in(self.xi_hat, self.eta_hat)
    }

    pub fn xi_up_in(&self) -> f64 {
        xi_out_to_in(self.xi_up, self.eta_low)
    }

    /// Standard deviation of the excess-noise estimate (output referenced).
    pub fn xi_std(&self) -> f64 {
        2.0 / self.tau * self.residual_var * (2.0 / (2 * self.n_used) as f64).sqrt()
    }
}

/// Excess noise referenced at the channel input from its value at the channel output.
pub fn xi_out_to_in(xi_out: f64, eta: f64) -> f64 {
    xi_out / eta
}

pub fn xi_in_to_out(xi_in: f64, eta: f64) -> f64 {
    xi_in * eta
}

/// Least-squares link estimate over aligned symbol streams.
pub fn estimate_link(tx: &SymbolFrame, rx: &SymbolFrame, det: &DetectorModel, delta_fail: f64) -> Result<LinkEstimate> {
    LinkStats::from_pairs(&tx.symbols, &rx.symbols)?.estimate(det.tau, det.t_noise, delta_fail)
}

/// Lower the gain by z·std(gain) and raise the residual variance by z·std(residual), z = Φ⁻¹(1 − δ).
pub fn worst_case_bounds(est: &LinkEstimate) -> Result<LinkEstimate> {
    if est.n_used <= 100 {
        return Err(Error::Estimation(format!("confidence bounds need more than 100 symbols, got {}", est.n_used)));
    }
    let z = stats::z_quantile(est.delta_fail);
    let m = (2 * est.n_used) as f64;
    let g_low = (est.gain - z * est.gain_std).max(0.0);
    let var_up = est.residual_var * (1.0 + z * (2.0 / m).sqrt());
    let mut out = *est;
    out.eta_low = 2.0 * g_low * g_low / est.tau;
    out.xi_up = 2.0 * (var_up - 1.0 - est.t / 2.0) / est.tau;
    Ok(out)
}

/// Widen the bounds for a relative error `rel_std` in the shot-noise level of the symbols.
///
/// A level error ε scales both g² and the residual by (1 + ε); each bound takes its own worst sign.
pub fn widen_for_calibration(est: &LinkEstimate, rel_std: f64) -> Result<LinkEstimate> {
    if !(rel_std >= 0.0) {
        return Err(Error::Estimation(format!("calibration uncertainty must be non-negative, got {rel_std}")));
    }
    let k = stats::z_quantile(est.delta_fail) * rel_std;
    if k >= 1.0 {
        return Err(Error::Estimation(format!("calibration too uncertain for δ = {:e}", est.delta_fail)));
    }
    let var_up = 1.0 + est.t / 2.0 + est.tau * est.xi_up / 2.0;
    let mut out = *est;
    out.eta_low = est.eta_low / (1.0 + k);
    out.xi_up = 2.0 * (var_up / (1.0 - k) - 1.0 - est.t / 2.0) / est.tau;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub n_frames: usize,
    pub xi_cum_msnu: f64,
    pub xi_up_msnu: f64,
}

/// Running inverse-variance pooled ξ and its upper bound as frames accumulate.
pub fn cumulative_noise_trace(frames: &[LinkEstimate]) -> Result<Vec<TracePoint>> {
    if frames.is_empty() {
        return Err(Error::Estimation("noise trace needs at least one frame".into()));
    }
    let mut sw = 0.0;
    let mut swx = 0.0;
    let mut out = Vec::with_capacity(frames.len());
    for (i, f) in frames.iter().enumerate() {
        let s = f.xi_std();
        let w = if s > 0.0 { 1.0 / (s * s) } else { 1e300 };
        sw += w;
        swx += w * f.xi_hat;
        let xi = swx / sw;
        let z = stats::z_quantile(f.delta_fail);
        out.push(TracePoint { n_frames: i + 1, xi_cum_msnu: xi * 1e3, xi_up_msnu: (xi + z / sw.sqrt()) * 1e3 });
    }
    Ok(out)
}

pub fn write_trace(path: &Path, trace: &[TracePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["n_frames", "xi_cum_msnu", "xi_up_msnu"])?;
    for p in trace {
        w.write_record([p.n_frames.to_string(), format!("{:.6}", p.xi_cum_msnu), format!("{:.6}", p.xi_up_msnu)])?;
    }
    w.flush()?;
    Ok(())
}
