//! Max-min fair assignment of devices to shared networks.
//!
//! Under equal sharing a device on network `j` with `n_j` clients gets
//! `bandwidth_j / n_j`. A rate `r` is achievable by every device iff devices
//! can be assigned so that `n_j <= floor(bandwidth_j / r)`, a bipartite
//! capacity question answered with max-flow between availability groups
//! and networks. The optimum is one of the values `bandwidth_j / n`, so a
//! binary search over that candidate set gives it exactly.

use std::collections::{BTreeMap, VecDeque};

use crate::error::{Error, Result};

/// Highest achievable minimum per-device rate.
///
/// `masks[d][j]` says whether device `d` can use network `j`.
pub fn optimal_min_rate(bandwidths: &[f64], masks: &[Vec<bool>]) -> Result<f64> {
    let groups = group_masks(bandwidths.len(), masks)?;
    if groups.is_empty() {
        return Ok(0.0);
    }
    let devices = masks.len();
    let mut candidates: Vec<f64> = bandwidths
        .iter()
        .filter(|&&b| b > 0.0)
        .flat_map(|&b| (1..=devices).map(move |n| b / n as f64))
        .collect();
    candidates.sort_by(|a, b| a.total_cmp(b));
    candidates.dedup();

    // feasibility is monotone: true on a prefix of the sorted candidates
    let (mut lo, mut hi) = (0usize, candidates.len());
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(bandwidths, &groups, devices, candidates[mid]) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    Ok(if lo == 0 { 0.0 } else { candidates[lo - 1] })
}

fn group_masks(networks: usize, masks: &[Vec<bool>]) -> Result<Vec<(Vec<bool>, usize)>> {
    let mut groups: BTreeMap<&[bool], usize> = BTreeMap::new();
    for (d, mask) in masks.iter().enumerate() {
        if mask.len() != networks {
            return Err(Error::Allocation(format!(
                "device {d} has a mask of length {} for {networks} networks",
                mask.len()
            )));
        }
        if !mask.iter().any(|&a| a) {
            return Err(Error::Allocation(format!(
                "device {d} has no available network"
            )));
        }
        *groups.entry(mask.as_slice()).or_default() += 1;
    }
    Ok(groups.into_iter().map(|(m, c)| (m.to_vec(), c)).collect())
}

fn feasible(bandwidths: &[f64], groups: &[(Vec<bool>, usize)], devices: usize, rate: f64) -> bool {
    let k = bandwidths.len();
    let g = groups.len();
    // source, groups, networks, sink
    let source = 0;
    let sink = 1 + g + k;
    let mut flow = MaxFlow::new(sink + 1);
    for (gi, (mask, count)) in groups.iter().enumerate() {
        flow.add_edge(source, 1 + gi, *count as u64);
        for (j, &ok) in mask.iter().enumerate() {
            if ok {
                flow.add_edge(1 + gi, 1 + g + j, devices as u64);
            }
        }
    }
    for (j, &b) in bandwidths.iter().enumerate() {
        // the 1e-9 absorbs b / (b / n) landing just under n
        let cap = ((b / rate) + 1e-9).floor().clamp(0.0, devices as f64) as u64;
        if cap > 0 {
            flow.add_edge(1 + g + j, sink, cap);
        }
    }
    flow.run(source, sink) == devices as u64
}

/// Dinic max-flow on a small dense graph.
struct MaxFlow {
    // (to, capacity, reverse edge index)
    adj: Vec<Vec<(usize, u64, usize)>>,
}

impl MaxFlow {
    fn new(n: usize) -> Self {
        Self {
            adj: vec![Vec::new(); n],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: u64) {
        let rev_from = self.adj[to].len();
        let rev_to = self.adj[from].len();
        self.adj[from].push((to, cap, rev_from));
        self.adj[to].push((from, 0, rev_to));
    }

    fn levels(&self, s: usize) -> Vec<Option<usize>> {
        let mut level = vec![None; self.adj.len()];
        level[s] = Some(0);
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &(v, cap, _) in &self.adj[u] {
                if cap > 0 && level[v].is_none() {
                    level[v] = Some(level[u].unwrap() + 1);
                    queue.push_back(v);
                }
            }
        }
        level
    }

    fn push(
        &mut self,
        u: usize,
        t: usize,
        limit: u64,
        level: &[Option<usize>],
        next: &mut [usize],
    ) -> u64 {
        if u == t {
            return limit;
        }
        while next[u] < self.adj[u].len() {
            let (v, cap, rev) = self.adj[u][next[u]];
            if cap > 0 && level[v] == level[u].map(|l| l + 1) {
                let pushed = self.push(v, t, limit.min(cap), level, next);
                if pushed > 0 {
                    self.adj[u][next[u]].1 -= pushed;
                    self.adj[v][rev].1 += pushed;
                    return pushed;
                }
            }
            next[u] += 1;
        }
        0
    }

    fn run(&mut self, s: usize, t: usize) -> u64 {
        let mut total = 0;
        loop {
            let level = self.levels(s);
            if level[t].is_none() {
                return total;
            }
            let mut next = vec![0; self.adj.len()];
            loop {
                let pushed = self.push(s, t, u64::MAX, &level, &mut next);
                if pushed == 0 {
                    break;
                }
                total += pushed;
            }
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Minimum rate of the best assignment, by enumerating all of them.
    pub(crate) fn brute_force_min_rate(bandwidths: &[f64], masks: &[Vec<bool>]) -> f64 {
        let k = bandwidths.len();
        let n = masks.len();
        let mut best = 0.0f64;
        let total = k.pow(n as u32);
        'outer: for code in 0..total {
            let choice: Vec<usize> = (0..n).map(|d| (code / k.pow(d as u32)) % k).collect();
            let mut counts = vec![0usize; k];
            for (d, &j) in choice.iter().enumerate() {
                if !masks[d][j] {
                    continue 'outer;
                }
                counts[j] += 1;
            }
            let min = choice
                .iter()
                .map(|&j| bandwidths[j] / counts[j] as f64)
                .fold(f64::INFINITY, f64::min);
            best = best.max(min);
        }
        best
    }

    #[test]
    fn three_devices_two_networks() {
        let masks = vec![vec![true, true]; 3];
        assert_eq!(optimal_min_rate(&[12.0, 6.0], &masks).unwrap(), 6.0);
        assert_eq!(brute_force_min_rate(&[12.0, 6.0], &masks), 6.0);
    }

    #[test]
    fn single_device() {
        assert_eq!(optimal_min_rate(&[10.0], &[vec![true]]).unwrap(), 10.0);
    }

    #[test]
    fn restricted_groups() {
        // two devices stuck on net 0, one free device
        let masks = vec![vec![true, false], vec![true, false], vec![true, true]];
        let got = optimal_min_rate(&[10.0, 2.0], &masks).unwrap();
        assert_eq!(got, brute_force_min_rate(&[10.0, 2.0], &masks));
        assert_eq!(got, 10.0 / 3.0);
    }

    #[test]
    fn zero_bandwidth_only_gives_zero() {
        let masks = vec![vec![true, false], vec![false, true]];
        assert_eq!(optimal_min_rate(&[0.0, 5.0], &masks).unwrap(), 0.0);
    }

    #[test]
    fn infeasible_availability() {
        let masks = vec![vec![false, false]];
        assert!(optimal_min_rate(&[1.0, 1.0], &masks).is_err());
        assert!(optimal_min_rate(&[1.0, 1.0], &[vec![true]]).is_err());
    }
}
