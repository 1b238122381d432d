//! Sum-product decoding against a target syndrome, row-serial (layered) schedule.

use super::ldpc::LdpcCode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub bits: Vec<u8>,
    pub converged: bool,
    pub iters: usize,
}

const T_MAX: f64 = 1.0 - 1e-15;

/// Decode towards the all-zero syndrome.
pub fn bp_decode(code: &LdpcCode, llrs: &[f64], max_iters: usize) -> Result<DecodeResult> {
    bp_decode_syndrome(code, llrs, &vec![0; code.n_checks], max_iters)
}

/// Sum-product with a syndrome check after every iteration. Positive LLR favours bit 0.
///
/// Non-convergence is reported in the result, not as an error.
pub fn bp_decode_syndrome(code: &LdpcCode, llrs: &[f64], syndrome: &[u8], max_iters: usize) -> Result<DecodeResult> {
    let n = code.block_len;
    if llrs.len() != n || syndrome.len() != code.n_checks {
        return Err(Error::Contract(format!(
            "decoder needs {n} LLRs and {} syndrome bits, got {} and {}",
            code.n_checks,
            llrs.len(),
            syndrome.len()
        )));
    }
    let ne = code.n_edges();
    let th = |m: f64| {
        let e = (-m.abs()).exp();
        ((1.0 - e) / (1.0 + e)).copysign(m)
    };
    let mut post = llrs.to_vec();
    let mut c2v = vec![0.0f64; ne];
    let mut bits: Vec<u8> = llrs.iter().map(|&l| (l < 0.0) as u8).collect();
    if syndrome_ok(code, &bits, syndrome) {
        return Ok(DecodeResult { bits, converged: true, iters: 0 });
    }
    let mut v2c = Vec::new();
    let mut t = Vec::new();
    let mut fwd = Vec::new();
    for it in 1..=max_iters {
        // Row-serial schedule: each check sees the posteriors already updated by earlier checks.
        for c in 0..code.n_checks {
            let r = code.check_range(c);
            v2c.clear();
            t.clear();
            fwd.clear();
            let mut acc = if syndrome[c] == 1 { -1.0 } else { 1.0 };
            for e in r.clone() {
                let m = post[code.edge_var(e)] - c2v[e];
                v2c.push(m);
                let x = th(m);
                t.push(x);
                fwd.push(acc);
                acc *= x;
            }
            let mut back = 1.0;
            for i in (0..t.len()).rev() {
                let e = r.start + i;
                let p = (fwd[i] * back).clamp(-T_MAX, T_MAX);
                c2v[e] = ((1.0 + p) / (1.0 - p)).ln();
                post[code.edge_var(e)] = v2c[i] + c2v[e];
                back *= t[i];
            }
        }
        for (b, &l) in bits.iter_mut().zip(&post) {
            *b = (l < 0.0) as u8;
        }
        if syndrome_ok(code, &bits, syndrome) {
            return Ok(DecodeResult { bits, converged: true, iters: it });
        }
    }
    Ok(DecodeResult { bits, converged: false, iters: max_iters })
}

fn syndrome_ok(code: &LdpcCode, bits: &[u8], syndrome: &[u8]) -> bool {
    (0..code.n_checks).all(|c| code.check(c).iter().fold(0u8, |a, &v| a ^ bits[v as usize]) == syndrome[c])
}
