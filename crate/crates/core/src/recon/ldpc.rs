//! Sparse parity-check codes built from multi-edge-type degree tables.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::snu::rng::{stream, Stream};

/// Variable-node type: fraction of the block length and socket count per edge type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarType {
    pub frac: f64,
    pub degrees: Vec<u32>,
    /// May be punctured by rate adaptation.
    #[serde(default)]
    pub puncturable: bool,
}

/// Check-node type: fraction of the block length and socket count per edge type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckType {
    pub frac: f64,
    pub degrees: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetDistribution {
    pub vars: Vec<VarType>,
    pub checks: Vec<CheckType>,
}

impl MetDistribution {
    /// Rate-0.05 ensemble: a rate-0.42 precode on 12% of the nodes with degree-14/15 links into
    /// degree-2 checks, each closed by a degree-1 variable node.
    pub fn demo_rate_005() -> Self {
        MetDistribution {
            vars: vec![
                VarType { frac: 0.022, degrees: vec![2, 14, 0], puncturable: true },
                VarType { frac: 0.044, degrees: vec![2, 15, 0], puncturable: true },
                VarType { frac: 0.018, degrees: vec![3, 14, 0], puncturable: true },
                VarType { frac: 0.036, degrees: vec![3, 15, 0], puncturable: true },
                VarType { frac: 0.88, degrees: vec![0, 0, 1], puncturable: false },
            ],
            checks: vec![
                CheckType { frac: 0.056, degrees: vec![4, 0, 0] },
                CheckType { frac: 0.014, degrees: vec![5, 0, 0] },
                CheckType { frac: 0.88, degrees: vec![0, 2, 1] },
            ],
        }
    }

    pub fn design_rate(&self) -> f64 {
        1.0 - self.checks.iter().map(|c| c.frac).sum::<f64>() / self.vars.iter().map(|v| v.frac).sum::<f64>()
    }

    pub fn validate(&self) -> Result<()> {
        let e = self.vars.first().map(|v| v.degrees.len()).unwrap_or(0);
        if e == 0 || self.checks.is_empty() {
            return config("degree table needs variable and check types");
        }
        if self.vars.iter().any(|v| v.degrees.len() != e) || self.checks.iter().any(|c| c.degrees.len() != e) {
            return config("every node type must list one degree per edge type");
        }
        if self.vars.iter().map(|v| v.frac).chain(self.checks.iter().map(|c| c.frac)).any(|f| !(f >= 0.0)) {
            return config("negative node fraction");
        }
        let vsum: f64 = self.vars.iter().map(|v| v.frac).sum();
        if (vsum - 1.0).abs() > 1e-9 {
            return config(format!("variable fractions sum to {vsum}, expected 1"));
        }
        for t in 0..e {
            let vs: f64 = self.vars.iter().map(|v| v.frac * v.degrees[t] as f64).sum();
            let cs: f64 = self.checks.iter().map(|c| c.frac * c.degrees[t] as f64).sum();
            if (vs - cs).abs() > 0.02 * vs.max(cs) {
                return config(format!("edge type {t}: {vs} variable sockets vs {cs} check sockets per node"));
            }
        }
        Ok(())
    }
}

fn split_counts(fracs: &[f64], total: usize) -> Vec<usize> {
    let s: f64 = fracs.iter().sum();
    let mut out: Vec<usize> = fracs.iter().map(|f| (f / s * total as f64).floor() as usize).collect();
    let mut rem = total - out.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..fracs.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = fracs[a] / s * total as f64 - out[a] as f64;
        let rb = fracs[b] / s * total as f64 - out[b] as f64;
        rb.total_cmp(&ra)
    });
    for &i in order.iter().cycle() {
        if rem == 0 {
            break;
        }
        out[i] += 1;
        rem -= 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdpcCode {
    pub block_len: usize,
    pub n_checks: usize,
    /// Declared rate 1 − rank/block_len.
    pub code_rate: f64,
    pub punctured: Vec<bool>,
    /// Positions rate adaptation may puncture.
    pub punct_candidates: Vec<u32>,
    pub distribution: Option<MetDistribution>,
    check_ptr: Vec<u32>,
    check_vars: Vec<u32>,
    var_ptr: Vec<u32>,
    var_edges: Vec<u32>,
}

impl LdpcCode {
    /// Build from an explicit list of (check, variable) pairs. The rate is computed from the GF(2) rank.
    pub fn from_edges(block_len: usize, n_checks: usize, edges: &[(u32, u32)]) -> Result<Self> {
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n_checks];
        for &(c, v) in edges {
            if c as usize >= n_checks || v as usize >= block_len {
                return Err(Error::Format(format!("edge ({c}, {v}) outside {n_checks}×{block_len}")));
            }
            rows[c as usize].push(v);
        }
        for r in rows.iter_mut() {
            r.sort_unstable();
            r.dedup();
        }
        let mut code = Self::from_rows(block_len, rows);
        code.code_rate = 1.0 - code.gf2_rank() as f64 / block_len as f64;
        Ok(code)
    }

    fn from_rows(block_len: usize, rows: Vec<Vec<u32>>) -> Self {
        let n_checks = rows.len();
        let mut check_ptr = Vec::with_capacity(n_checks + 1);
        let mut check_vars = Vec::new();
        check_ptr.push(0);
        for r in &rows {
            check_vars.extend_from_slice(r);
            check_ptr.push(check_vars.len() as u32);
        }
        let mut deg = vec![0u32; block_len];
        for &v in &check_vars {
            deg[v as usize] += 1;
        }
        let mut var_ptr = vec![0u32; block_len + 1];
        for v in 0..block_len {
            var_ptr[v + 1] = var_ptr[v] + deg[v];
        }
        let mut fill = var_ptr.clone();
        let mut var_edges = vec![0u32; check_vars.len()];
        for (e, &v) in check_vars.iter().enumerate() {
            var_edges[fill[v as usize] as usize] = e as u32;
            fill[v as usize] += 1;
        }
        LdpcCode {
            block_len,
            n_checks,
            code_rate: 1.0 - n_checks as f64 / block_len as f64,
            punctured: vec![false; block_len],
            punct_candidates: Vec::new(),
            distribution: None,
            check_ptr,
            check_vars,
            var_ptr,
            var_edges,
        }
    }

    /// Random socket matching per edge type, with double edges swapped away.
    pub fn from_met(dist: &MetDistribution, block_len: usize, seed: u64) -> Result<Self> {
        dist.validate()?;
        let e_types = dist.vars[0].degrees.len();
        let var_counts = split_counts(&dist.vars.iter().map(|v| v.frac).collect::<Vec<_>>(), block_len);
        let n_checks = (dist.checks.iter().map(|c| c.frac).sum::<f64>() * block_len as f64).round() as usize;
        let check_counts = split_counts(&dist.checks.iter().map(|c| c.frac).collect::<Vec<_>>(), n_checks);
        let mut rng = stream(seed, Stream::CodeGraph, block_len as u64);

        let mut var_type = Vec::with_capacity(block_len);
        for (t, &c) in var_counts.iter().enumerate() {
            var_type.extend(std::iter::repeat(t).take(c));
        }
        var_type.shuffle(&mut rng);
        let mut check_type = Vec::with_capacity(n_checks);
        for (t, &c) in check_counts.iter().enumerate() {
            check_type.extend(std::iter::repeat(t).take(c));
        }

        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n_checks];
        for et in 0..e_types {
            let mut vs: Vec<u32> = Vec::new();
            for (v, &t) in var_type.iter().enumerate() {
                vs.extend(std::iter::repeat(v as u32).take(dist.vars[t].degrees[et] as usize));
            }
            if vs.is_empty() {
                continue;
            }
            // Check sockets follow the declared degrees, trimmed or padded round-robin to match.
            let mut per: Vec<usize> = check_type.iter().map(|&t| dist.checks[t].degrees[et] as usize).collect();
            let holders: Vec<usize> = (0..n_checks).filter(|&c| per[c] > 0).collect();
            if holders.is_empty() {
                return config(format!("edge type {et} has variable sockets but no check sockets"));
            }
            let mut total: usize = per.iter().sum();
            let mut k = 0usize;
            while total != vs.len() {
                let c = holders[(k * 7919) % holders.len()];
                if total > vs.len() {
                    if per[c] > 1 {
                        per[c] -= 1;
                        total -= 1;
                    }
                } else {
                    per[c] += 1;
                    total += 1;
                }
                k += 1;
            }
            let mut pool: Vec<u32> = Vec::with_capacity(vs.len());
            for &c in &holders {
                pool.extend(std::iter::repeat(c as u32).take(per[c]));
            }
            pool.shuffle(&mut rng);
            // Degree-2 variables are wired as a forest over the checks so they close no cycle among
            // themselves; such cycles are low-weight codewords.
            let deg2: Vec<u32> =
                (0..block_len as u32).filter(|&v| dist.vars[var_type[v as usize]].degrees[et] == 2).collect();
            let mut parent: Vec<u32> = (0..n_checks as u32).collect();
            fn find(p: &mut [u32], mut x: u32) -> u32 {
                while p[x as usize] != x {
                    p[x as usize] = p[p[x as usize] as usize];
                    x = p[x as usize];
                }
                x
            }
            let mut cs: Vec<u32> = Vec::with_capacity(vs.len());
            let mut vs2: Vec<u32> = Vec::with_capacity(vs.len());
            for &v in &deg2 {
                let a = pool.swap_remove(rng.gen_range(0..pool.len()));
                let ra = find(&mut parent, a);
                let mut j = None;
                for _ in 0..64 {
                    let t = rng.gen_range(0..pool.len());
                    if find(&mut parent, pool[t]) != ra {
                        j = Some(t);
                        break;
                    }
                }
                let j = j.or_else(|| pool.iter().position(|&c| c != a)).unwrap_or(0);
                let b = pool.swap_remove(j);
                let rb = find(&mut parent, b);
                parent[ra as usize] = rb;
                cs.extend([a, b]);
                vs2.extend([v, v]);
            }
            let mut vs: Vec<u32> = vs.into_iter().filter(|v| dist.vars[var_type[*v as usize]].degrees[et] != 2).collect();
            vs.shuffle(&mut rng);
            let fixed = cs.len();
            cs.extend(pool);
            vs2.extend(vs);
            let mut vs = vs2;
            // Swap away repeated (check, variable) pairs among the freely matched sockets.
            for _ in 0..20 {
                let mut seen = std::collections::HashSet::with_capacity(vs.len());
                let mut bad = Vec::new();
                for i in 0..vs.len() {
                    let present = rows[cs[i] as usize].contains(&vs[i]);
                    if (present || !seen.insert((cs[i], vs[i]))) && i >= fixed {
                        bad.push(i);
                    }
                }
                if bad.is_empty() || vs.len() == fixed {
                    break;
                }
                for i in bad {
                    let j = rng.gen_range(fixed..vs.len());
                    vs.swap(i, j);
                }
            }
            for (c, v) in cs.into_iter().zip(vs) {
                rows[c as usize].push(v);
            }
        }
        for r in rows.iter_mut() {
            r.sort_unstable();
            r.dedup();
        }
        let mut code = Self::from_rows(block_len, rows);
        code.punct_candidates =
            (0..block_len as u32).filter(|&v| dist.vars[var_type[v as usize]].puncturable).collect();
        code.distribution = Some(dist.clone());
        Ok(code)
    }

    pub fn n_edges(&self) -> usize {
        self.check_vars.len()
    }

    pub fn check(&self, c: usize) -> &[u32] {
        &self.check_vars[self.check_ptr[c] as usize..self.check_ptr[c + 1] as usize]
    }

    pub(crate) fn check_range(&self, c: usize) -> std::ops::Range<usize> {
        self.check_ptr[c] as usize..self.check_ptr[c + 1] as usize
    }

    /// Edge ids (positions in the check-ordered edge list) attached to variable `v`.
    pub fn var_edge_ids(&self, v: usize) -> &[u32] {
        &self.var_edges[self.var_ptr[v] as usize..self.var_ptr[v + 1] as usize]
    }

    pub(crate) fn edge_var(&self, e: usize) -> usize {
        self.check_vars[e] as usize
    }

    pub fn var_degree(&self, v: usize) -> usize {
        (self.var_ptr[v + 1] - self.var_ptr[v]) as usize
    }

    pub fn n_punctured(&self) -> usize {
        self.punctured.iter().filter(|&&p| p).count()
    }

    /// Key bits per block, n − rank.
    pub fn info_bits(&self) -> usize {
        (self.code_rate * self.block_len as f64).round() as usize
    }

    /// k/(n − p).
    pub fn effective_rate(&self) -> f64 {
        self.info_bits() as f64 / (self.block_len - self.n_punctured()) as f64
    }

    pub fn syndrome(&self, bits: &[u8]) -> Vec<u8> {
        (0..self.n_checks).map(|c| self.check(c).iter().fold(0u8, |a, &v| a ^ bits[v as usize])).collect()
    }

    /// Rank of H over GF(2) by dense bitset elimination.
    pub fn gf2_rank(&self) -> usize {
        let words = self.block_len.div_ceil(64);
        let mut rows: Vec<Vec<u64>> = (0..self.n_checks)
            .map(|c| {
                let mut r = vec![0u64; words];
                for &v in self.check(c) {
                    r[v as usize / 64] ^= 1 << (v % 64);
                }
                r
            })
            .collect();
        let mut rank = 0;
        for col in 0..self.block_len {
            let (w, b) = (col / 64, 1u64 << (col % 64));
            let Some(p) = (rank..rows.len()).find(|&r| rows[r][w] & b != 0) else { continue };
            rows.swap(rank, p);
            let (head, tail) = rows.split_at_mut(rank + 1);
            let piv = &head[rank];
            for r in tail.iter_mut() {
                if r[w] & b != 0 {
                    for k in w..words {
                        r[k] ^= piv[k];
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    /// Coordinate text: header `n m rate`, then `row col` per edge, then `p idx` per punctured position.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.block_len, self.n_checks, self.code_rate);
        for c in 0..self.n_checks {
            for &v in self.check(c) {
                let _ = writeln!(s, "{c} {v}");
            }
        }
        for (i, _) in self.punctured.iter().enumerate().filter(|p| *p.1) {
            let _ = writeln!(s, "p {i}");
        }
        s
    }

    pub fn from_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let head = lines.next().ok_or_else(|| Error::Format("empty code file".into()))??;
        let h: Vec<&str> = head.split_whitespace().collect();
        let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad integer '{s}'")));
        if h.len() != 3 {
            return Err(Error::Format("header must be 'n m rate'".into()));
        }
        let (n, m) = (parse(h[0])?, parse(h[1])?);
        let rate: f64 = h[2].parse().map_err(|_| Error::Format(format!("bad rate '{}'", h[2])))?;
        let mut edges = Vec::new();
        let mut punct = Vec::new();
        for line in lines {
            let line = line?;
            let f: Vec<&str> = line.split_whitespace().collect();
            match f.as_slice() {
                [] => {}
                ["p", i] => punct.push(parse(i)?),
                [c, v] => edges.push((parse(c)? as u32, parse(v)? as u32)),
                _ => return Err(Error::Format(format!("bad line '{line}'"))),
            }
        }
        let mut code = Self::from_edges(n, m, &edges)?;
        if (code.code_rate - rate).abs() > 1e-9 {
            return Err(Error::Format(format!("declared rate {rate} but rank gives {}", code.code_rate)));
        }
        for i in punct {
            if i >= n {
                return Err(Error::Format(format!("punctured index {i} ≥ {n}")));
            }
            code.punctured[i] = true;
        }
        Ok(code)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_text(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// Puncture `p` positions drawn uniformly from the candidates under `seed`.
    pub fn punctured_copy(&self, p: usize, seed: u64) -> Result<Self> {
        if p > self.punct_candidates.len() {
            return config(format!("{p} punctures requested, {} candidates", self.punct_candidates.len()));
        }
        let mut c = self.clone();
        c.punctured = vec![false; self.block_len];
        let mut rng = stream(seed, Stream::Puncture, p as u64);
        for &i in self.punct_candidates.choose_multiple(&mut rng, p) {
            c.punctured[i as usize] = true;
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hamming() -> LdpcCode {
        let rows = [[0, 1, 2, 4], [0, 1, 3, 5], [0, 2, 3, 6]];
        let e: Vec<(u32, u32)> = rows.iter().enumerate().flat_map(|(c, r)| r.iter().map(move |&v| (c as u32, v))).collect();
        LdpcCode::from_edges(7, 3, &e).unwrap()
    }

    #[test]
    fn hamming_rate_and_syndrome() {
        let h = hamming();
        assert_eq!(h.gf2_rank(), 3);
        assert!((h.code_rate - 4.0 / 7.0).abs() < 1e-15);
        assert_eq!(h.syndrome(&[1, 1, 1, 0, 0, 0, 1]), vec![1, 0, 1]);
        assert_eq!(h.syndrome(&[0; 7]), vec![0; 3]);
    }

    #[test]
    fn redundant_rows_lower_rank() {
        let e = [(0, 0), (0, 1), (1, 1), (1, 2), (2, 0), (2, 2)];
        let c = LdpcCode::from_edges(4, 3, &e).unwrap();
        assert_eq!(c.gf2_rank(), 2);
        assert!((c.code_rate - 0.5).abs() < 1e-15);
    }

    #[test]
    fn text_round_trip() {
        let mut h = hamming();
        h.punctured[2] = true;
        let t = h.to_text();
        let back = LdpcCode::from_text(t.as_bytes()).unwrap();
        assert_eq!(back.to_text(), t);
        assert!(LdpcCode::from_text("7 3 0.9\n0 1\n".as_bytes()).is_err());
        assert!(LdpcCode::from_text("7 3\n".as_bytes()).is_err());
    }

    #[test]
    fn met_graph_follows_table() {
        let d = MetDistribution::demo_rate_005();
        assert!((d.design_rate() - 0.05).abs() < 1e-12);
        let c = LdpcCode::from_met(&d, 4000, 1).unwrap();
        assert_eq!(c.n_checks, 3800);
        let deg1 = (0..c.block_len).filter(|&v| c.var_degree(v) == 1).count();
        assert_eq!(deg1, 3520);
        assert_eq!(c.punct_candidates.len(), 480);
        for &v in &c.punct_candidates {
            let d = c.var_degree(v as usize);
            assert!((16..=18).contains(&d), "{d}");
        }
        for ch in 0..c.n_checks {
            let r = c.check(ch);
            assert!(r.windows(2).all(|w| w[0] < w[1]));
        }
        assert_eq!(c.gf2_rank(), c.n_checks);
        let again = LdpcCode::from_met(&d, 4000, 1).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn degree_two_nodes_form_a_forest() {
        let c = LdpcCode::from_met(&MetDistribution::demo_rate_005(), 10_000, 4).unwrap();
        let core_checks: Vec<usize> = (0..c.n_checks).filter(|&k| c.check(k).iter().all(|&v| c.var_degree(v as usize) > 1)).collect();
        let idx: std::collections::HashMap<usize, usize> = core_checks.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); c.block_len];
        for &k in &core_checks {
            for &v in c.check(k) {
                nbrs[v as usize].push(idx[&k]);
            }
        }
        let mut parent: Vec<usize> = (0..core_checks.len()).collect();
        fn root(p: &mut Vec<usize>, mut x: usize) -> usize {
            while p[x] != x {
                x = p[x];
            }
            x
        }
        let mut n2 = 0;
        for nb in nbrs.iter().filter(|nb| nb.len() == 2) {
            let (a, b) = (root(&mut parent, nb[0]), root(&mut parent, nb[1]));
            assert_ne!(a, b, "cycle among degree-2 nodes");
            parent[a] = b;
            n2 += 1;
        }
        assert_eq!(n2, 660);
    }

    #[test]
    fn bad_table_rejected() {
        let mut d = MetDistribution::demo_rate_005();
        d.vars[0].frac = 0.5;
        assert!(LdpcCode::from_met(&d, 1000, 0).is_err());
        let mut d = MetDistribution::demo_rate_005();
        d.checks[2].degrees = vec![0, 4, 1];
        assert!(d.validate().is_err());
    }

    #[test]
    fn puncture_count_identity() {
        let c = LdpcCode::from_met(&MetDistribution::demo_rate_005(), 10_000, 2).unwrap();
        let zero = c.punctured_copy(0, 5).unwrap();
        assert_eq!(zero, c);
        // k = 500; 0.0525 = 500/(10000 − p) → p = 476.19…, take 476.
        let p = c.punctured_copy(476, 5).unwrap();
        assert_eq!(p.n_punctured(), 476);
        assert_eq!(p.effective_rate(), 500.0 / 9524.0);
        assert!(p.punctured.iter().enumerate().filter(|x| *x.1).all(|(i, _)| c.punct_candidates.contains(&(i as u32))));
        assert!(c.punctured_copy(1201, 5).is_err());
    }
}
