//! Reverse reconciliation: MD mapping, syndrome decoding of Bob's key bits, rate adaptation and
//! privacy amplification.

pub mod bp;
pub mod ldpc;
pub mod md;
pub mod toeplitz;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};
use crate::snu::rng::{stream, Gaussian, Stream};

pub use bp::{bp_decode, bp_decode_syndrome, DecodeResult};
pub use ldpc::{LdpcCode, MetDistribution};
pub use md::{gaussian_capacity, md_demap, md_map, md_virtual_capacity};
pub use toeplitz::toeplitz_extract;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconConfig {
    pub dim: usize,
    pub max_iters: usize,
    pub block_len: usize,
    pub code_seed: u64,
    pub blocks: usize,
}

impl Default for ReconConfig {
    fn default() -> Self {
        ReconConfig { dim: 8, max_iters: 500, block_len: 20_000, code_seed: 1, blocks: 40 }
    }
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        if !md::DIMS.contains(&self.dim) {
            return config(format!("MD dimension {} not in {{1, 2, 4, 8}}", self.dim));
        }
        if self.block_len % 8 != 0 || self.block_len < 64 {
            return config("block length must be a multiple of 8 and at least 64");
        }
        if self.max_iters == 0 {
            return config("max_iters must be positive");
        }
        Ok(())
    }
}

/// Raise the effective rate towards `beta_design`·C(target_snr) by puncturing candidate positions.
/// C is the capacity of the MD virtual channel at dimension `dim`.
///
/// The puncture count keeps the transmitted length a multiple of 8, rounding the rate down.
pub fn rate_adapt(code: &LdpcCode, target_snr: f64, dim: usize, beta_design: f64, seed: u64) -> Result<LdpcCode> {
    rate_adapt_to(code, beta_design * md_virtual_capacity(target_snr, dim), seed)
}

pub fn rate_adapt_to(code: &LdpcCode, target_rate: f64, seed: u64) -> Result<LdpcCode> {
    let n = code.block_len;
    let k = code.info_bits();
    let base = k as f64 / n as f64;
    if target_rate < base - 1e-12 {
        return config(format!("target rate {target_rate} below the base rate {base}"));
    }
    let max_rate = k as f64 / (n - code.punct_candidates.len()) as f64;
    if target_rate > max_rate {
        return config(format!("target rate {target_rate} above the largest supported rate {max_rate}"));
    }
    let mut p = (n as f64 - k as f64 / target_rate).floor().max(0.0) as usize;
    while (n - p) % 8 != 0 && p > 0 {
        p -= 1;
    }
    code.punctured_copy(p, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockOutcome {
    pub converged: bool,
    pub iters: usize,
    /// Alice's decoded bits equal Bob's.
    pub agree: bool,
    pub bob_bits: Vec<u8>,
    pub alice_bits: Vec<u8>,
    pub syndrome: Vec<u8>,
}

/// One block: Bob draws key bits, discloses the MD maps and the syndrome; Alice decodes.
///
/// `x` (Alice) is unit-variance per dimension, `y` (Bob) the reference; both hold one value per transmitted position.
pub fn reconcile_block(
    code: &LdpcCode,
    x: &[f64],
    y: &[f64],
    noise_var: f64,
    dim: usize,
    max_iters: usize,
    seed: u64,
    block_id: u64,
) -> Result<BlockOutcome> {
    let positions: Vec<usize> = (0..code.block_len).filter(|&i| !code.punctured[i]).collect();
    if x.len() != positions.len() || y.len() != positions.len() {
        return Err(Error::Contract(format!("block needs {} values per side", positions.len())));
    }
    if positions.len() % dim != 0 {
        return Err(Error::Contract(format!("{} transmitted positions not a multiple of {dim}", positions.len())));
    }
    let mut rng = stream(seed, Stream::ReconBits, block_id);
    let mut bob = vec![0u8; code.block_len];
    let mut word = 0u64;
    for (i, b) in bob.iter_mut().enumerate() {
        if i % 64 == 0 {
            word = rng.next_u64();
        }
        *b = ((word >> (i % 64)) & 1) as u8;
    }
    let syndrome = code.syndrome(&bob);
    let mut llr = vec![0.0; code.block_len];
    for (c, pos) in positions.chunks(dim).enumerate() {
        let r = c * dim..(c + 1) * dim;
        let bits: Vec<u8> = pos.iter().map(|&p| bob[p]).collect();
        let m = md_map(&y[r.clone()], &md::spins(&bits))?;
        for (&p, l) in pos.iter().zip(md_demap(&x[r], &m, noise_var)) {
            llr[p] = l;
        }
    }
    let dec = bp_decode_syndrome(code, &llr, &syndrome, max_iters)?;
    Ok(BlockOutcome {
        converged: dec.converged,
        iters: dec.iters,
        agree: dec.bits == bob,
        alice_bits: dec.bits,
        bob_bits: bob,
        syndrome,
    })
}

/// Aggregate figures of merit over many blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconSession {
    pub dim: usize,
    pub snr_target: f64,
    pub snr_measured: f64,
    pub rate_effective: f64,
    pub capacity: f64,
    /// R_eff / C(SNR_measured), C the capacity of the MD virtual channel.
    pub beta: f64,
    pub fer: f64,
    pub blocks: usize,
    pub failures: usize,
    /// Converged blocks whose bits differ from Bob's.
    pub disagreements: usize,
    pub mean_iters: f64,
}

/// Gaussian pairs y = x + z at the given SNR, reconciled block by block in parallel.
pub fn measure_beta_fer(code: &LdpcCode, snr: f64, cfg: &ReconConfig, seed: u64) -> Result<ReconSession> {
    cfg.validate()?;
    if !(snr > 0.0) {
        return domain(format!("SNR must be positive, got {snr}"));
    }
    let nv = 1.0 / snr;
    let nt = code.block_len - code.n_punctured();
    let results: Vec<Result<(BlockOutcome, [f64; 3])>> = (0..cfg.blocks as u64)
        .into_par_iter()
        .map(|b| {
            let mut g = Gaussian::new(seed, Stream::Excess, b);
            let mut x = vec![0.0; nt];
            let mut y = vec![0.0; nt];
            let mut s = [0.0; 3];
            for i in 0..nt {
                x[i] = g.sample();
                y[i] = x[i] + nv.sqrt() * g.sample();
                s[0] += x[i] * x[i];
                s[1] += x[i] * y[i];
                s[2] += y[i] * y[i];
            }
            Ok((reconcile_block(code, &x, &y, nv, cfg.dim, cfg.max_iters, seed, b)?, s))
        })
        .collect();
    let mut s = [0.0; 3];
    let (mut fail, mut dis, mut iters) = (0, 0, 0usize);
    for r in results {
        let (o, si) = r?;
        for k in 0..3 {
            s[k] += si[k];
        }
        if !o.converged {
            fail += 1;
        } else if !o.agree {
            dis += 1;
        }
        iters += o.iters;
    }
    let rho2 = s[1] * s[1] / (s[0] * s[2]);
    let snr_m = rho2 / (1.0 - rho2);
    let cap = md_virtual_capacity(snr_m, cfg.dim);
    let r = code.effective_rate();
    Ok(ReconSession {
        dim: cfg.dim,
        snr_target: snr,
        snr_measured: snr_m,
        rate_effective: r,
        capacity: cap,
        beta: r / cap,
        fer: fail as f64 / cfg.blocks as f64,
        blocks: cfg.blocks,
        failures: fail,
        disagreements: dis,
        mean_iters: iters as f64 / cfg.blocks.max(1) as f64,
    })
}

/// FER over an SNR grid given in dB.
pub fn fer_curve(code: &LdpcCode, snr_db: &[f64], cfg: &ReconConfig, seed: u64) -> Result<Vec<ReconSession>> {
    snr_db.iter().map(|&d| measure_beta_fer(code, 10f64.powf(d / 10.0), cfg, seed)).collect()
}

/// SNR (linear) where FER first crosses 0.5, interpolated in dB.
pub fn fer_threshold(curve: &[ReconSession]) -> Option<f64> {
    let db = |s: f64| 10.0 * s.log10();
    for w in curve.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.fer >= 0.5 && b.fer < 0.5 {
            let t = (a.fer - 0.5) / (a.fer - b.fer);
            let d = db(a.snr_target) + t * (db(b.snr_target) - db(a.snr_target));
            return Some(10f64.powf(d / 10.0));
        }
    }
    None
}

/// Replay record for one block: seeds and the disclosed syndrome, packed little-endian.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockTranscript {
    pub seed: u64,
    pub block_id: u64,
    pub syndrome: Vec<u8>,
}

impl BlockTranscript {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + self.syndrome.len() / 8 + 1);
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.block_id.to_le_bytes());
        out.extend_from_slice(&(self.syndrome.len() as u64).to_le_bytes());
        for ch in self.syndrome.chunks(8) {
            out.push(ch.iter().enumerate().fold(0u8, |a, (i, &b)| a | (b & 1) << i));
        }
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        if b.len() < 24 {
            return Err(Error::Format("transcript shorter than its header".into()));
        }
        let word = |i: usize| u64::from_le_bytes(b[i..i + 8].try_into().unwrap());
        let n = word(16) as usize;
        if b.len() != 24 + n.div_ceil(8) {
            return Err(Error::Format(format!("transcript holds {} bytes for {n} syndrome bits", b.len())));
        }
        let syndrome = (0..n).map(|i| (b[24 + i / 8] >> (i % 8)) & 1).collect();
        Ok(BlockTranscript { seed: word(0), block_id: word(8), syndrome })
    }
}
