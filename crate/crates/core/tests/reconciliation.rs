use cvqkd::recon::md::biawgn_capacity;
use cvqkd::recon::*;
use cvqkd::recon::ldpc::{CheckType, VarType};
use cvqkd::snu::rng::{Gaussian, Stream};
use std::sync::OnceLock;

/// Population-dynamics density evolution for a multi-edge-type table on the binary-input AWGN channel.
fn de_converges(dist: &MetDistribution, snr: f64, pop: usize, iters: usize, seed: u64) -> bool {
    let et = dist.vars[0].degrees.len();
    let mut g = Gaussian::new(seed, Stream::Test, (snr * 1e6) as u64);
    let ch = |g: &mut Gaussian| 2.0 * snr + (4.0 * snr).sqrt() * g.sample();
    let pick = |g: &mut Gaussian, w: &[f64]| {
        let s: f64 = w.iter().sum();
        let mut u = g.uniform() * s;
        for (i, &x) in w.iter().enumerate() {
            if u < x {
                return i;
            }
            u -= x;
        }
        w.len() - 1
    };
    let mut v2c = vec![vec![0.0f64; pop]; et];
    let mut c2v = vec![vec![0.0f64; pop]; et];
    for it in 0..iters {
        for e in 0..et {
            let w: Vec<f64> = dist.checks.iter().map(|c| c.frac * c.degrees[e] as f64).collect();
            if w.iter().all(|&x| x == 0.0) {
                continue;
            }
            for k in 0..pop {
                let ct = &dist.checks[pick(&mut g, &w)];
                let mut t = 1.0f64;
                for f in 0..et {
                    let cnt = ct.degrees[f] as usize - (f == e) as usize;
                    for _ in 0..cnt {
                        let m = v2c[f][(g.uniform() * pop as f64) as usize];
                        t *= (0.5 * m).tanh();
                    }
                }
                c2v[e][k] = 2.0 * t.clamp(-1.0 + 1e-15, 1.0 - 1e-15).atanh();
            }
        }
        for e in 0..et {
            let w: Vec<f64> = dist.vars.iter().map(|v| v.frac * v.degrees[e] as f64).collect();
            if w.iter().all(|&x| x == 0.0) {
                continue;
            }
            for k in 0..pop {
                let vt = &dist.vars[pick(&mut g, &w)];
                let mut l = ch(&mut g);
                for f in 0..et {
                    let cnt = vt.degrees[f] as usize - (f == e) as usize;
                    for _ in 0..cnt {
                        l += c2v[f][(g.uniform() * pop as f64) as usize];
                    }
                }
                v2c[e][k] = l;
            }
        }
        // Posterior LLR over node types.
        let w: Vec<f64> = dist.vars.iter().map(|v| v.frac).collect();
        let clean = (0..pop).all(|_| {
            let vt = &dist.vars[pick(&mut g, &w)];
            let mut l = ch(&mut g);
            for f in 0..et {
                for _ in 0..vt.degrees[f] {
                    l += c2v[f][(g.uniform() * pop as f64) as usize];
                }
            }
            l > 0.0
        });
        if clean && it > 5 {
            return true;
        }
    }
    false
}

/// Geometric bisection for the smallest SNR in [lo, hi] at which density evolution converges.
fn de_threshold_in(dist: &MetDistribution, mut lo: f64, mut hi: f64, steps: usize) -> f64 {
    for _ in 0..steps {
        let mid = (lo * hi).sqrt();
        if de_converges(dist, mid, 3000, 250, 1) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn de_threshold() -> f64 {
    static TH: OnceLock<f64> = OnceLock::new();
    *TH.get_or_init(|| de_threshold_in(&MetDistribution::demo_rate_005(), 0.05, 0.15, 8))
}

/// Block errors: decoder failures plus converged words that differ from the truth.
fn bpsk_fer(code: &LdpcCode, snr: f64, trials: u64, seed: u64) -> (f64, usize) {
    let s2 = 1.0 / snr;
    let (mut fails, mut undetected) = (0, 0);
    for t in 0..trials {
        let mut g = Gaussian::new(seed, Stream::Test, t);
        let bits: Vec<u8> = (0..code.block_len).map(|_| (g.uniform() < 0.5) as u8).collect();
        let syn = code.syndrome(&bits);
        let llr: Vec<f64> = bits
            .iter()
            .map(|&b| {
                let y = if b == 0 { 1.0 } else { -1.0 } + s2.sqrt() * g.sample();
                2.0 * y / s2
            })
            .collect();
        let r = bp_decode_syndrome(code, &llr, &syn, 500).unwrap();
        if !r.converged || r.bits != bits {
            fails += 1;
        }
        if r.converged && r.bits != bits {
            undetected += 1;
        }
    }
    (fails as f64 / trials as f64, undetected)
}

#[test]
fn demo_ensemble_threshold_close_to_capacity() {
    let th = de_threshold();
    let beta = 0.05 / biawgn_capacity(th);
    println!("DE threshold {th:.4} ({:.2} dB), beta {beta:.3}", 10.0 * th.log10());
    assert!(beta > 0.9 && beta < 1.0, "{beta}");
}

/// Rate-0.05 ensemble with degree-3 variables and degree-3/4 checks: a poor threshold but a steep
/// waterfall at short lengths.
fn regular_short() -> MetDistribution {
    MetDistribution {
        vars: vec![VarType { frac: 1.0, degrees: vec![3], puncturable: false }],
        checks: vec![CheckType { frac: 0.8, degrees: vec![3] }, CheckType { frac: 0.15, degrees: vec![4] }],
    }
}

#[test]
fn short_regular_code_two_db_above_threshold() {
    let d = regular_short();
    let th = de_threshold_in(&d, 0.03, 1.0, 10);
    let code = LdpcCode::from_met(&d, 1000, 3).unwrap();
    assert_eq!(code.info_bits(), 50);
    let (fer, undetected) = bpsk_fer(&code, th * 10f64.powf(0.2), 1000, 5);
    println!("regular n=1000: threshold {:.2} dB, +2 dB FER {fer} ({undetected} undetected)", 10.0 * th.log10());
    assert!(fer < 1e-2, "{fer}");
}

#[test]
fn short_code_three_db_above_threshold() {
    let th = de_threshold();
    let code = LdpcCode::from_met(&MetDistribution::demo_rate_005(), 1000, 3).unwrap();
    let (fer, undetected) = bpsk_fer(&code, th * 10f64.powf(0.3), 1000, 5);
    println!("n=1000, +3 dB: FER {fer} ({undetected} undetected)");
    assert!(fer < 1e-2, "{fer}");
}

/// The demo code at n = 20000 with a threshold near −10.7 dB.
fn code_20k() -> &'static LdpcCode {
    static CODE: OnceLock<LdpcCode> = OnceLock::new();
    CODE.get_or_init(|| LdpcCode::from_met(&MetDistribution::demo_rate_005(), 20_000, 1).unwrap())
}

#[test]
fn key_agreement_and_privacy_amplification() {
    let code = code_20k();
    let snr = 10f64.powf(-1.0);
    let nv = 1.0 / snr;
    let (mut alice, mut bob) = (Vec::new(), Vec::new());
    let mut converged = 0;
    for b in 0..6u64 {
        let mut g = Gaussian::new(11, Stream::Excess, b);
        let x: Vec<f64> = (0..code.block_len).map(|_| g.sample()).collect();
        let y: Vec<f64> = x.iter().map(|v| v + nv.sqrt() * g.sample()).collect();
        let o = reconcile_block(code, &x, &y, nv, 8, 500, 11, b).unwrap();
        if o.converged {
            converged += 1;
            assert_eq!(o.alice_bits, o.bob_bits, "block {b}");
            assert_eq!(code.syndrome(&o.alice_bits), o.syndrome);
            alice.extend(o.alice_bits);
            bob.extend(o.bob_bits);
        }
    }
    assert!(converged >= 5, "{converged}");
    let out = alice.len() / 4;
    let mut g = Gaussian::new(12, Stream::Test, 0);
    let seed: Vec<u8> = (0..alice.len() + out - 1).map(|_| (g.uniform() < 0.5) as u8).collect();
    let ka = toeplitz_extract(&alice, &seed, out).unwrap();
    let kb = toeplitz_extract(&bob, &seed, out).unwrap();
    assert_eq!(ka, kb);
    assert_eq!(ka.len(), out);
    let ones = ka.iter().filter(|&&b| b == 1).count() as f64 / out as f64;
    assert!((ones - 0.5).abs() < 0.02, "{ones}");
    alice[17] ^= 1;
    let kc = toeplitz_extract(&alice, &seed, out).unwrap();
    assert_ne!(kc, kb);
}

#[test]
fn rate_adaptation_raises_beta() {
    let code = code_20k();
    let snr = 10f64.powf(-1.03);
    let cfg = ReconConfig { blocks: 6, ..Default::default() };
    let fixed = measure_beta_fer(code, snr, &cfg, 21).unwrap();
    let adapted_code = rate_adapt(code, snr, 8, 0.85, 4).unwrap();
    let adapted = measure_beta_fer(&adapted_code, snr, &cfg, 21).unwrap();
    println!(
        "fixed: rate {:.4} beta {:.3} fer {:.2}; adapted: rate {:.4} beta {:.3} fer {:.2}",
        fixed.rate_effective, fixed.beta, fixed.fer, adapted.rate_effective, adapted.beta, adapted.fer
    );
    assert!(adapted.rate_effective > fixed.rate_effective);
    assert!(adapted.beta >= fixed.beta);
    assert!(adapted.fer < 0.5, "{}", adapted.fer);
    assert!(adapted.beta <= 1.0 && fixed.beta <= 1.0);
}

#[test]
fn fer_non_increasing_in_snr() {
    let code = LdpcCode::from_met(&MetDistribution::demo_rate_005(), 4000, 2).unwrap();
    let cfg = ReconConfig { blocks: 12, max_iters: 200, ..Default::default() };
    let grid: Vec<f64> = (0..10).map(|i| -12.1 + 0.3 * i as f64).collect();
    let curve = fer_curve(&code, &grid, &cfg, 31).unwrap();
    let fers: Vec<f64> = curve.iter().map(|s| s.fer).collect();
    println!("{fers:?}");
    let inversions = fers.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(inversions <= 1, "{fers:?}");
    assert_eq!(fers[0], 1.0);
    assert!(*fers.last().unwrap() < 0.2);
    for s in &curve {
        assert_eq!(s.disagreements, 0);
        if s.fer < 0.5 {
            assert!(s.beta <= 1.0, "{}", s.beta);
        }
    }
}

