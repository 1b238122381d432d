//! Mutual information, trusted-detector Holevo bound, finite-size term and key rates.
//!
//! Excess noise arguments named `xi_out` are referenced at the channel output.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::estimate::{xi_out_to_in, LinkEstimate};

/// G(x) = (x+1)·log2(x+1) − x·log2(x), the von Neumann entropy of a thermal state with mean photon number x.
pub fn g_entropy(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (x + 1.0) * (x + 1.0).log2() - x * x.log2()
}

/// Entropy contribution of a symplectic eigenvalue ν ≥ 1.
fn g_nu(nu: f64) -> f64 {
    g_entropy((nu - 1.0) / 2.0)
}

/// Heterodyne signal-to-noise ratio per quadrature.
pub fn snr(v_mod: f64, eta: f64, tau: f64, t: f64, xi_out: f64) -> f64 {
    (tau * eta * v_mod / 2.0) / (1.0 + t / 2.0 + tau * xi_out / 2.0)
}

/// I_AB = log2(1 + SNR), both quadratures together.
pub fn mutual_information(v_mod: f64, eta: f64, tau: f64, t: f64, xi_out: f64) -> f64 {
    (1.0 + snr(v_mod, eta, tau, t, xi_out)).log2()
}

/// Holevo bound on Eve's information for reverse reconciliation with a trusted heterodyne detector.
///
/// Eve purifies the channel (η, ξ); detector loss τ and electronic noise t are out of her reach.
pub fn holevo_bound_trusted(v_mod: f64, eta: f64, tau: f64, t: f64, xi_out: f64) -> Result<f64> {
    if !(v_mod >= 0.0) || !(eta > 0.0 && eta <= 1.0) || !(tau > 0.0 && tau <= 1.0) || !(t >= 0.0) {
        return domain(format!("invalid link parameters v_mod={v_mod} eta={eta} tau={tau} t={t}"));
    }
    if v_mod == 0.0 {
        return Ok(0.0);
    }
    let v = v_mod + 1.0;
    let xi = xi_out_to_in(xi_out.max(0.0), eta);
    let chi_line = 1.0 / eta - 1.0 + xi;
    let chi_het = (2.0 - tau + t) / tau;
    let chi_tot = chi_line + chi_het / eta;

    let a = v * v * (1.0 - 2.0 * eta) + 2.0 * eta + eta * eta * (v + chi_line).powi(2);
    let b = eta * eta * (v * chi_line + 1.0).powi(2);
    let (l1, l2) = pair(a, b)?;

    let den = (eta * (v + chi_tot)).powi(2);
    let c = (a * chi_het * chi_het
        + b
        + 1.0
        + 2.0 * chi_het * (v * b.sqrt() + eta * (v + chi_line))
        + 2.0 * eta * (v * v - 1.0))
        / den;
    let d = ((v + b.sqrt() * chi_het) / (eta * (v + chi_tot))).powi(2);
    let (l3, l4) = pair(c, d)?;

    for l in [l1, l2, l3, l4] {
        if l < 1.0 - 1e-9 {
            return domain(format!("non-physical covariance matrix (symplectic eigenvalue {l})"));
        }
    }
    Ok(g_nu(l1) + g_nu(l2) - g_nu(l3) - g_nu(l4))
}

/// Roots ν₁, ν₂ of ν⁴ − a·ν² + b = 0.
fn pair(a: f64, b: f64) -> Result<(f64, f64)> {
    let disc = a * a - 4.0 * b;
    // Degenerate pairs cancel to rounding level; sqrt would amplify that to ~1e-8.
    let disc = if disc.abs() <= 64.0 * f64::EPSILON * a * a { 0.0 } else { disc };
    if disc < 0.0 || b < 0.0 || a <= 0.0 {
        return domain("non-physical covariance matrix (complex symplectic spectrum)");
    }
    let hi = (a + disc.sqrt()) / 2.0;
    Ok((hi.sqrt(), (b / hi).sqrt()))
}

/// Δ(n) = 7·sqrt(log2(2/ε̄)/n).
pub fn finite_size_delta(n_block: u64, eps_bar: f64) -> f64 {
    if n_block == 0 {
        return f64::INFINITY;
    }
    7.0 * ((2.0 / eps_bar).log2() / n_block as f64).sqrt()
}

/// ξ_RPN = 2·T·V_mod·(1 − exp(−V_RPN/2)), T the total transmittance.
pub fn xi_rpn_model(t_total: f64, v_mod: f64, v_rpn: f64) -> f64 {
    2.0 * t_total * v_mod * (1.0 - (-v_rpn / 2.0).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SecurityParams {
    pub beta: f64,
    pub fer: f64,
    /// Privacy-amplification block length; defaults to n_used·(1 − FER).
    pub n_block: Option<u64>,
    pub delta_fail: f64,
    pub baud_hz: f64,
}

impl Default for SecurityParams {
    fn default() -> Self {
        SecurityParams { beta: 0.925, fer: 0.59, n_block: None, delta_fail: 1e-10, baud_hz: 1e8 }
    }
}

impl SecurityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return domain(format!("beta {} outside (0, 1)", self.beta));
        }
        if !(0.0..=1.0).contains(&self.fer) {
            return domain(format!("FER {} outside [0, 1]", self.fer));
        }
        if !(self.delta_fail > 0.0 && self.delta_fail < 1.0) || !(self.baud_hz > 0.0) {
            return domain("delta_fail must be in (0, 1) and the baud rate positive");
        }
        Ok(())
    }

    pub fn block_len(&self, n_used: u64) -> u64 {
        self.n_block.unwrap_or_else(|| (n_used as f64 * (1.0 - self.fer)).round() as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateMode {
    Asymptotic,
    Finite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub i_ab: f64,
    pub chi_e: f64,
    pub delta_n: f64,
    /// β·I_AB − χ_E − Δ before clamping.
    pub raw_bits_per_symbol: f64,
    pub skr_bps: f64,
    pub negative: bool,
}

/// SKR = B·(1 − FER)·(β·I_AB − χ_E − Δ(n)), clamped at zero.
///
/// Finite mode uses (eta_low, xi_up) and Δ; asymptotic mode uses (eta_hat, xi_hat) and no Δ.
pub fn secret_key_rate(link: &LinkEstimate, sec: &SecurityParams, v_mod: f64, mode: RateMode) -> Result<RatePoint> {
    sec.validate()?;
    let (eta, xi) = match mode {
        RateMode::Asymptotic => (link.eta_hat, link.xi_hat),
        RateMode::Finite => (link.eta_low, link.xi_up),
    };
    let xi = xi.max(0.0);
    if !(eta > 0.0) {
        return Ok(RatePoint { i_ab: 0.0, chi_e: 0.0, delta_n: 0.0, raw_bits_per_symbol: 0.0, skr_bps: 0.0, negative: true });
    }
    let eta = eta.min(1.0);
    let i_ab = mutual_information(v_mod, eta, link.tau, link.t, xi);
    let chi_e = holevo_bound_trusted(v_mod, eta, link.tau, link.t, xi)?;
    let delta_n = match mode {
        RateMode::Asymptotic => 0.0,
        RateMode::Finite => finite_size_delta(sec.block_len(link.n_used), sec.delta_fail),
    };
    let raw = sec.beta * i_ab - chi_e - delta_n;
    let negative = raw <= 0.0 || sec.fer >= 1.0;
    let skr = if negative { 0.0 } else { sec.baud_hz * (1.0 - sec.fer) * raw };
    Ok(RatePoint { i_ab, chi_e, delta_n, raw_bits_per_symbol: raw, skr_bps: skr, negative })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityReport {
    pub i_ab: f64,
    pub chi_e: f64,
    pub delta_n: f64,
    pub skr_asymptotic_bps: f64,
    pub skr_finite_bps: f64,
    pub negative_rate: bool,
    pub link: LinkEstimate,
    pub params: SecurityParams,
    pub v_mod: f64,
}

/// Both regimes for one link estimate. I_AB, χ_E and Δ are the finite-size (worst-case) values.
pub fn security_report(link: &LinkEstimate, sec: &SecurityParams, v_mod: f64) -> Result<SecurityReport> {
    let f = secret_key_rate(link, sec, v_mod, RateMode::Finite)?;
    let a = secret_key_rate(link, sec, v_mod, RateMode::Asymptotic)?;
    Ok(SecurityReport {
        i_ab: f.i_ab,
        chi_e: f.chi_e,
        delta_n: f.delta_n,
        skr_asymptotic_bps: a.skr_bps,
        skr_finite_bps: f.skr_bps,
        negative_rate: f.negative,
        link: *link,
        params: *sec,
        v_mod,
    })
}

/// Fixed link model used for the distance and modulation-variance curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkModel {
    pub v_mod: f64,
    pub tau: f64,
    pub t: f64,
    pub xi_out: f64,
    pub coupling: f64,
    pub atten_db_per_km: f64,
    pub n_symbols: u64,
}

impl Default for LinkModel {
    fn default() -> Self {
        LinkModel { v_mod: 8.41, tau: 0.68, t: 0.06272, xi_out: 2.12e-4, coupling: 0.82, atten_db_per_km: 0.146, n_symbols: 950_000_000 }
    }
}

impl LinkModel {
    pub fn eta(&self, length_km: f64) -> f64 {
        crate::channel::eta_at(length_km, self.atten_db_per_km, self.coupling)
    }

    pub fn link(&self, length_km: f64, delta_fail: f64) -> LinkEstimate {
        LinkEstimate::from_model(self.eta(length_km), self.xi_out, self.tau, self.t, self.n_symbols, delta_fail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistancePoint {
    pub distance_km: f64,
    pub skr_asym_bps: f64,
    pub skr_finite_bps: f64,
}

/// SKR against fiber length with η(L) = coupling·10^(−α·L/10) and fixed output excess noise.
pub fn skr_vs_distance(lengths_km: &[f64], model: &LinkModel, sec: &SecurityParams) -> Result<Vec<DistancePoint>> {
    lengths_km
        .iter()
        .map(|&l| {
            let r = security_report(&model.link(l, sec.delta_fail), sec, model.v_mod)?;
            Ok(DistancePoint { distance_km: l, skr_asym_bps: r.skr_asymptotic_bps, skr_finite_bps: r.skr_finite_bps })
        })
        .collect()
}

/// Largest distance with a positive rate, by bisection on [0, max_km]. None if the rate is zero at 0 km.
pub fn zero_crossing_km(model: &LinkModel, sec: &SecurityParams, mode: RateMode, max_km: f64) -> Result<Option<f64>> {
    let raw = |l: f64| -> Result<f64> {
        Ok(secret_key_rate(&model.link(l, sec.delta_fail), sec, model.v_mod, mode)?.raw_bits_per_symbol)
    };
    if raw(0.0)? <= 0.0 {
        return Ok(None);
    }
    if raw(max_km)? > 0.0 {
        return Ok(Some(max_km));
    }
    let (mut lo, mut hi) = (0.0, max_km);
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if raw(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

/// Reconciliation operating points (V_mod, β, FER), linearly interpolated and clamped at the ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingTable {
    pub points: Vec<(f64, f64, f64)>,
}

impl OperatingTable {
    /// β and FER per modulation variance at 100 km as reported for the experiment.
    pub fn paper() -> Self {
        OperatingTable { points: vec![(8.11, 0.931, 0.80), (8.41, 0.925, 0.59), (8.71, 0.917, 0.62), (9.27, 0.905, 0.70)] }
    }

    pub fn at(&self, v: f64) -> (f64, f64) {
        let p = &self.points;
        if v <= p[0].0 {
            return (p[0].1, p[0].2);
        }
        for w in p.windows(2) {
            if v <= w[1].0 {
                let s = (v - w[0].0) / (w[1].0 - w[0].0);
                return (w[0].1 + s * (w[1].1 - w[0].1), w[0].2 + s * (w[1].2 - w[0].2));
            }
        }
        let l = p[p.len() - 1];
        (l.1, l.2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VmodPoint {
    pub v_mod: f64,
    pub beta: f64,
    pub fer: f64,
    pub skr_bps: f64,
}

/// Asymptotic SKR over a V_mod grid with β and FER supplied per point; returns the argmax and the curve.
pub fn vmod_optimize(
    grid: &[f64],
    beta_fer: &dyn Fn(f64) -> (f64, f64),
    link: &LinkEstimate,
    sec: &SecurityParams,
) -> Result<(Option<f64>, Vec<VmodPoint>)> {
    let mut curve = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64)> = None;
    for &v in grid {
        let (beta, fer) = beta_fer(v);
        let s = SecurityParams { beta, fer, ..*sec };
        let r = secret_key_rate(link, &s, v, RateMode::Asymptotic)?;
        if best.map_or(true, |(_, b)| r.skr_bps > b) {
            best = Some((v, r.skr_bps));
        }
        curve.push(VmodPoint { v_mod: v, beta, fer, skr_bps: r.skr_bps });
    }
    Ok((best.map(|b| b.0), curve))
}
