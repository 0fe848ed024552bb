//! Coalescing reference flow: clusters move with variance rate `1/mass` and
//! stick together when they meet.
//!
//! Because order is preserved, every cluster is a contiguous run of particle
//! indices. The merge time of each boundary between neighbours is enough to
//! recover collision times and the mass history of every particle.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::noise::{lane, NoiseStream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cluster {
    /// First particle index.
    pub first: usize,
    /// Number of particles.
    pub count: usize,
    pub position: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoalescingSystem {
    n: usize,
    pub t: f64,
    pub clusters: Vec<Cluster>,
    /// `boundary_merge[b]`: time at which particles `b` and `b + 1` met.
    pub boundary_merge: Vec<Option<f64>>,
}

impl CoalescingSystem {
    /// Particles at non-decreasing `positions`; equal neighbours start merged.
    pub fn new(positions: &[f64]) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Config("empty particle system".into()));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite initial position".into()));
        }
        if let Some(i) = positions.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::Domain(format!("initial positions decrease at index {}", i + 1)));
        }
        let n = positions.len();
        let mut sys = Self {
            n,
            t: 0.0,
            clusters: positions.iter().enumerate().map(|(i, &x)| Cluster { first: i, count: 1, position: x }).collect(),
            boundary_merge: vec![None; n - 1],
        };
        sys.coalesce();
        Ok(sys)
    }

    /// Particles on the quantile grid of `g`.
    pub fn from_quantile(n: usize, g: impl Fn(f64) -> f64) -> Result<Self> {
        let y: Vec<f64> = (0..n).map(|i| g((i as f64 + 0.5) / n as f64)).collect();
        Self::new(&y)
    }

    pub fn particles(&self) -> usize {
        self.n
    }

    pub fn mass(&self, c: &Cluster) -> f64 {
        c.count as f64 / self.n as f64
    }

    pub fn cluster_of(&self, i: usize) -> &Cluster {
        let c = self.clusters.partition_point(|c| c.first + c.count <= i);
        &self.clusters[c]
    }

    pub fn positions(&self) -> Vec<f64> {
        self.clusters.iter().flat_map(|c| std::iter::repeat(c.position).take(c.count)).collect()
    }

    /// Moves every cluster by `N(0, dt/mass)` and merges clusters that crossed.
    pub fn step(&mut self, dt: f64, stream: &mut NoiseStream) {
        let mut z = vec![0.0; self.clusters.len()];
        stream.standard_normals(&mut z);
        let n = self.n as f64;
        for (c, dz) in self.clusters.iter_mut().zip(&z) {
            c.position += (dt * n / c.count as f64).sqrt() * dz;
        }
        self.t += dt;
        self.coalesce();
    }

    /// Left-to-right stack merge; a cluster that catches its left neighbour
    /// joins it at the mass-weighted mean and is compared again.
    fn coalesce(&mut self) {
        let mut out: Vec<Cluster> = Vec::with_capacity(self.clusters.len());
        for &c in &self.clusters {
            let mut cur = c;
            while let Some(top) = out.last() {
                if top.position < cur.position {
                    break;
                }
                let top = out.pop().unwrap();
                let count = top.count + cur.count;
                self.boundary_merge[cur.first - 1] = Some(self.t);
                cur = Cluster {
                    first: top.first,
                    count,
                    position: (top.position * top.count as f64 + cur.position * cur.count as f64) / count as f64,
                };
            }
            out.push(cur);
        }
        self.clusters = out;
    }

    /// `τ_{i,j}`: first time `i` and `j` share a cluster.
    pub fn collision_time(&self, i: usize, j: usize) -> Option<f64> {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.boundary_merge[a..b].iter().try_fold(0.0, |acc, t| t.map(|t| f64::max(acc, t)))
    }

    /// Mass of the cluster holding particle `i` at time `s <= t`.
    pub fn mass_at(&self, i: usize, s: f64) -> f64 {
        let joined = |t: &Option<f64>| matches!(t, Some(t) if *t <= s);
        let left = self.boundary_merge[..i].iter().rev().take_while(|t| joined(t)).count();
        let right = self.boundary_merge[i..].iter().take_while(|t| joined(t)).count();
        (1 + left + right) as f64 / self.n as f64
    }
}

/// One step of the coalescing flow.
pub fn step_arratia(mut sys: CoalescingSystem, dt: f64, stream: &mut NoiseStream) -> CoalescingSystem {
    sys.step(dt, stream);
    sys
}

/// `∫_0^t 1{s ≥ τ_{i,j}} / m_s(i) ds` from the recorded merge history.
pub fn covariation_profile(sys: &CoalescingSystem, i: usize, j: usize) -> f64 {
    let Some(tau) = sys.collision_time(i, j) else {
        return 0.0;
    };
    let mut events: Vec<f64> = sys.boundary_merge.iter().flatten().copied().filter(|&t| t > tau && t < sys.t).collect();
    events.sort_by(f64::total_cmp);
    events.dedup();
    let mut acc = 0.0;
    let mut s0 = tau;
    for s1 in events.into_iter().chain(std::iter::once(sys.t)) {
        acc += (s1 - s0) / sys.mass_at(i, s0);
        s0 = s1;
    }
    acc
}

/// A run of the flow with snapshots and realized quadratic covariations.
#[derive(Debug, Clone, PartialEq)]
pub struct ArratiaRun {
    pub snapshots: Vec<(f64, Vec<Cluster>)>,
    pub last: CoalescingSystem,
    /// Realized `Σ Δy_i Δy_j` for the requested pairs.
    pub realized: Vec<f64>,
}

/// Runs `steps` steps of size `dt` on path `path`, recording every `stride`-th state.
pub fn run_arratia(
    initial: &CoalescingSystem,
    dt: f64,
    steps: usize,
    seed: u64,
    path: u64,
    stride: usize,
    pairs: &[(usize, usize)],
) -> Result<ArratiaRun> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i.max(j) >= initial.particles()) {
        return Err(Error::Config(format!("pair ({i}, {j}) out of range")));
    }
    let stride = stride.max(1);
    let mut stream = NoiseStream::new(seed, path).on_lane(lane::ARRATIA);
    let mut sys = initial.clone();
    let mut snapshots = vec![(sys.t, sys.clusters.clone())];
    let mut realized = vec![0.0; pairs.len()];
    let mut prev = sys.positions();
    for s in 1..=steps {
        sys.step(dt, &mut stream);
        let cur = sys.positions();
        for (r, &(i, j)) in realized.iter_mut().zip(pairs) {
            *r += (cur[i] - prev[i]) * (cur[j] - prev[j]);
        }
        prev = cur;
        if s % stride == 0 || s == steps {
            snapshots.push((sys.t, sys.clusters.clone()));
        }
    }
    Ok(ArratiaRun { snapshots, last: sys, realized })
}

/// Mean realized and predicted covariation per pair over `paths` runs.
pub fn covariation_ensemble(
    initial: &CoalescingSystem,
    dt: f64,
    steps: usize,
    seed: u64,
    paths: usize,
    pairs: &[(usize, usize)],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let runs: Vec<(Vec<f64>, Vec<f64>)> = (0..paths as u64)
        .into_par_iter()
        .map(|p| {
            let r = run_arratia(initial, dt, steps, seed, p, usize::MAX, pairs)?;
            let pred = pairs.iter().map(|&(i, j)| covariation_profile(&r.last, i, j)).collect();
            Ok((r.realized, pred))
        })
        .collect::<Result<_>>()?;
    let mut realized = vec![0.0; pairs.len()];
    let mut predicted = vec![0.0; pairs.len()];
    for (r, p) in &runs {
        for k in 0..pairs.len() {
            realized[k] += r[k] / paths as f64;
            predicted[k] += p[k] / paths as f64;
        }
    }
    Ok((realized, predicted))
}
