//! Pilot phase tracking: unscented Kalman filter on a random-walk phase, with an RTS smoothing pass.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SigmaParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for SigmaParams {
    fn default() -> Self {
        SigmaParams { alpha: 1e-3, beta: 2.0, kappa: 0.0 }
    }
}

/// Filter state and noise model. `meas_var_r` is per quadrature, `amplitude` is the pilot modulus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseTrackState {
    pub theta_hat: f64,
    pub p_cov: f64,
    pub process_var_q: f64,
    pub meas_var_r: f64,
    pub amplitude: f64,
    pub sigma: SigmaParams,
}

impl PhaseTrackState {
    /// Process variance per sample for a combined Lorentzian linewidth.
    pub fn q_from_linewidth(linewidth_hz: f64, fs: f64) -> f64 {
        TAU * linewidth_hz / fs
    }

    /// Initial state from the first samples of a baseband pilot.
    pub fn initial(pilot: &[Complex64], q: f64, r: f64, amplitude: f64, sigma: SigmaParams) -> Self {
        let head: Complex64 = pilot.iter().take(256).sum();
        PhaseTrackState { theta_hat: head.arg(), p_cov: 0.1, process_var_q: q, meas_var_r: r, amplitude, sigma }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrack {
    /// Smoothed (or filtered, if smoothing is off) phase per sample, unwrapped.
    pub theta: Vec<f64>,
    /// Posterior variance per sample.
    pub var: Vec<f64>,
    pub final_state: PhaseTrackState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpnEstimate {
    /// Mean posterior phase variance: the tracker's own estimate of its residual phase noise.
    pub v_rpn: f64,
}

struct Weights {
    lam: f64,
    wc0: f64,
    wi: f64,
}

fn weights(s: &SigmaParams) -> Weights {
    let n = 1.0;
    let lam = s.alpha * s.alpha * (n + s.kappa) - n;
    let wm0 = lam / (n + lam);
    Weights { lam, wc0: wm0 + 1.0 - s.alpha * s.alpha + s.beta, wi: 0.5 / (n + lam) }
}

/// One predict/update step. Returns (posterior mean, posterior variance, prior variance).
fn step(m: f64, p: f64, y: Complex64, st: &PhaseTrackState, w: &Weights) -> (f64, f64, f64) {
    let pm = p + st.process_var_q;
    let s = ((1.0 + w.lam) * pm).sqrt();
    let a = st.amplitude;
    let h0 = [a * m.cos(), a * m.sin()];
    let hp = [a * (m + s).cos(), a * (m + s).sin()];
    let hn = [a * (m - s).cos(), a * (m - s).sin()];
    let dp = [hp[0] - h0[0], hp[1] - h0[1]];
    let dn = [hn[0] - h0[0], hn[1] - h0[1]];
    // Predicted measurement, written as h0 plus weighted deviations to avoid cancellation.
    let zh = [h0[0] + w.wi * (dp[0] + dn[0]), h0[1] + w.wi * (dp[1] + dn[1])];
    let e0 = [h0[0] - zh[0], h0[1] - zh[1]];
    let ep = [hp[0] - zh[0], hp[1] - zh[1]];
    let en = [hn[0] - zh[0], hn[1] - zh[1]];
    let r = st.meas_var_r;
    let s00 = w.wc0 * e0[0] * e0[0] + w.wi * (ep[0] * ep[0] + en[0] * en[0]) + r;
    let s11 = w.wc0 * e0[1] * e0[1] + w.wi * (ep[1] * ep[1] + en[1] * en[1]) + r;
    let s01 = w.wc0 * e0[0] * e0[1] + w.wi * (ep[0] * ep[1] + en[0] * en[1]);
    let c0 = w.wi * s * (ep[0] - en[0]);
    let c1 = w.wi * s * (ep[1] - en[1]);
    let det = s00 * s11 - s01 * s01;
    let k0 = (c0 * s11 - c1 * s01) / det;
    let k1 = (c1 * s00 - c0 * s01) / det;
    let m_new = m + k0 * (y.re - zh[0]) + k1 * (y.im - zh[1]);
    let p_new = pm - (k0 * c0 + k1 * c1);
    (m_new, p_new, pm)
}

/// Track the phase of a baseband pilot.
///
/// Fails with a tracking error when the posterior variance exceeds `p_ceiling`.
pub fn ukf_phase_track(
    pilot: &[Complex64],
    init: PhaseTrackState,
    smooth: bool,
    p_ceiling: f64,
    frame_id: u64,
) -> Result<(PhaseTrack, RpnEstimate)> {
    if pilot.is_empty() {
        return Err(Error::Estimation("empty pilot".into()));
    }
    if !(init.amplitude > 0.0) || !(init.meas_var_r >= 0.0) || !(init.process_var_q >= 0.0) {
        return Err(Error::Domain("phase tracker needs positive amplitude and non-negative noise".into()));
    }
    let mut st = init;
    st.meas_var_r = st.meas_var_r.max(1e-12 * st.amplitude * st.amplitude);
    let w = weights(&st.sigma);
    let n = pilot.len();
    let mut ms = Vec::with_capacity(n);
    let mut ps = Vec::with_capacity(n);
    let mut m = st.theta_hat;
    let mut p = st.p_cov;
    for (i, &y) in pilot.iter().enumerate() {
        let (mn, pn, _) = step(m, p, y, &st, &w);
        if !(pn <= p_ceiling) {
            return Err(Error::Tracking { frame_id, p_cov: pn });
        }
        if i > 0 && !pn.is_finite() {
            return Err(Error::Tracking { frame_id, p_cov: pn });
        }
        m = mn;
        p = pn.max(0.0);
        ms.push(m);
        ps.push(p);
    }
    st.theta_hat = m;
    st.p_cov = p;
    if smooth && n > 1 {
        let q = st.process_var_q;
        for k in (0..n - 1).rev() {
            let prior = ps[k] + q;
            let g = if prior > 0.0 { ps[k] / prior } else { 0.0 };
            ms[k] += g * (ms[k + 1] - ms[k]);
            ps[k] += g * g * (ps[k + 1] - prior);
        }
    }
    let v = ps.iter().sum::<f64>() / n as f64;
    Ok((PhaseTrack { theta: ms, var: ps, final_state: st }, RpnEstimate { v_rpn: v }))
}

/// Phase error variance of an estimate against a reference, after removing the common offset.
pub fn residual_phase_variance(est: &[f64], truth: &[f64]) -> f64 {
    let e: Vec<f64> = est.iter().zip(truth).map(|(a, b)| stats::wrap_phase(a - b)).collect();
    let c: Complex64 = e.iter().map(|&x| Complex64::from_polar(1.0, x)).sum();
    let c = c.arg();
    e.iter().map(|&x| stats::wrap_phase(x - c).powi(2)).sum::<f64>() / e.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snu::rng::{Gaussian, Stream};
    use proptest::prelude::*;

    fn noisy_pilot(theta: &[f64], amp: f64, r: f64, seed: u64) -> Vec<Complex64> {
        let mut g = Gaussian::new(seed, Stream::Test, 0);
        let s = r.sqrt();
        theta.iter().map(|&t| Complex64::from_polar(amp, t) + Complex64::new(s * g.sample(), s * g.sample())).collect()
    }

    #[test]
    fn zero_phase_zero_noise() {
        let y = vec![Complex64::new(2.0, 0.0); 1000];
        let init = PhaseTrackState::initial(&y, 1e-6, 0.0, 2.0, SigmaParams::default());
        let (t, _) = ukf_phase_track(&y, init, true, 1.0, 0).unwrap();
        assert!(t.theta.iter().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn constant_phase_converges() {
        let theta = vec![0.7; 5000];
        let y = noisy_pilot(&theta, 1.0, 0.01, 1);
        let mut init = PhaseTrackState::initial(&y, 0.0, 0.01, 1.0, SigmaParams::default());
        init.theta_hat = 0.0;
        init.p_cov = 1.0;
        let (t, _) = ukf_phase_track(&y, init, false, 10.0, 0).unwrap();
        assert!((t.theta[1000] - 0.7).abs() < 1e-2, "{}", t.theta[1000]);
    }

    #[test]
    fn wiener_phase_tracked_and_self_estimate_honest() {
        let q: f64 = 1e-4;
        let r = 0.02;
        let mut g = Gaussian::new(2, Stream::Test, 1);
        let mut acc = 0.3;
        let theta: Vec<f64> = (0..200_000)
            .map(|_| {
                acc += q.sqrt() * g.sample();
                acc
            })
            .collect();
        let y = noisy_pilot(&theta, 1.0, r, 3);
        let init = PhaseTrackState::initial(&y, q, r, 1.0, SigmaParams::default());
        let (filt, ef) = ukf_phase_track(&y, init, false, 1.0, 0).unwrap();
        let (smth, es) = ukf_phase_track(&y, init, true, 1.0, 0).unwrap();
        let vf = residual_phase_variance(&filt.theta, &theta);
        let vs = residual_phase_variance(&smth.theta, &theta);
        // Steady-state Kalman variance for a random walk in white noise.
        let rr = r;
        let pf = (-q + (q * q + 4.0 * q * rr).sqrt()) / 2.0;
        let pf_post = (pf + q) * rr / (pf + q + rr);
        assert!((ef.v_rpn / pf_post - 1.0).abs() < 0.1, "{} vs {pf_post}", ef.v_rpn);
        assert!((vf / ef.v_rpn - 1.0).abs() < 0.15, "{vf} vs {}", ef.v_rpn);
        assert!((vs / es.v_rpn - 1.0).abs() < 0.15, "{vs} vs {}", es.v_rpn);
        assert!(vs < 0.7 * vf);
    }

    #[test]
    fn divergence_reported() {
        let mut g = Gaussian::new(4, Stream::Test, 0);
        let y: Vec<Complex64> = (0..1000).map(|_| Complex64::new(g.sample(), g.sample())).collect();
        let init = PhaseTrackState { theta_hat: 0.0, p_cov: 0.1, process_var_q: 0.5, meas_var_r: 100.0, amplitude: 0.01, sigma: SigmaParams::default() };
        match ukf_phase_track(&y, init, true, 0.2, 17) {
            Err(Error::Tracking { frame_id, .. }) => assert_eq!(frame_id, 17),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn residual_variance_ignores_offset() {
        let a = [0.1, 0.2, 0.3];
        let b = [0.1 + 2.0, 0.2 + 2.0, 0.3 + 2.0];
        assert!(residual_phase_variance(&a, &b) < 1e-20);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn posterior_variance_stays_positive_and_bounded(q in 1e-8f64..1e-2, r in 1e-4f64..10.0) {
            let y = noisy_pilot(&vec![0.0; 500], 1.0, r, 9);
            let init = PhaseTrackState::initial(&y, q, r, 1.0, SigmaParams::default());
            let (t, _) = ukf_phase_track(&y, init, true, 10.0, 0).unwrap();
            prop_assert!(t.var.iter().all(|&v| v >= 0.0 && v <= 0.1 + q * 500.0));
        }
    }
}
