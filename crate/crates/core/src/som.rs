//! One sensory stream represented as a 1-D lattice of Gaussian-tuned neurons.
//!
//! Each neuron holds a preferred value (a point in the stream's input space)
//! and a tuning variance. A sample elicits a Gaussian response from every
//! neuron; the most active one wins and pulls itself and its lattice
//! neighbours toward the sample, while the tuning variances track the local
//! squared error. Dense regions of the input end up covered by many narrow
//! tuning curves, sparse regions by few wide ones.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of leading samples used to seed a fresh map.
pub const WARMUP_SAMPLES: usize = 100;

/// Population response of a map to one sample. Entries are nonnegative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityVector(pub Vec<f64>);

impl ActivityVector {
    pub fn zeros(n: usize) -> Self {
        ActivityVector(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Index of the most active neuron; ties go to the lowest index.
    pub fn winner(&self) -> Result<usize> {
        if self.0.is_empty() {
            return Err(Error::Structural("winner of an empty activity vector".into()));
        }
        let mut best = 0;
        for (i, &a) in self.0.iter().enumerate().skip(1) {
            if a > self.0[best] {
                best = i;
            }
        }
        Ok(best)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    /// Scale so the largest entry is 1. All-zero vectors are returned unchanged.
    pub fn normalized(&self) -> ActivityVector {
        let m = self.max();
        if m > 0.0 {
            ActivityVector(self.0.iter().map(|a| a / m).collect())
        } else {
            self.clone()
        }
    }
}

/// Outcome of one [`SelfOrganizingMap::adapt`] step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptOutcome {
    pub winner: usize,
    /// Squared distance between the sample and the winner's preferred value
    /// before the update (quantization error).
    pub sq_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MapRepr", into = "MapRepr")]
pub struct SelfOrganizingMap {
    n_neurons: usize,
    input_dim: usize,
    /// Row-major `n_neurons x input_dim`.
    preferred: Vec<f64>,
    tuning_var: Vec<f64>,
    var_floor: f64,
    step_count: u64,
}

/// Stored form: one preferred vector per neuron. Lattice positions are
/// implicit (`0..N`).
#[derive(Serialize, Deserialize)]
struct MapRepr {
    preferred: Vec<Vec<f64>>,
    tuning_var: Vec<f64>,
    var_floor: f64,
    step_count: u64,
}

impl TryFrom<MapRepr> for SelfOrganizingMap {
    type Error = Error;

    fn try_from(r: MapRepr) -> Result<Self> {
        let dim = r.preferred.first().map_or(0, |p| p.len());
        if r.preferred.iter().any(|p| p.len() != dim) {
            return Err(Error::Structural("preferred vectors of unequal dimension".into()));
        }
        if r.preferred.len() != r.tuning_var.len() {
            return Err(Error::Structural(format!(
                "{} preferred vectors but {} tuning variances",
                r.preferred.len(),
                r.tuning_var.len()
            )));
        }
        let flat = r.preferred.into_iter().flatten().collect();
        SelfOrganizingMap::from_parts(dim, flat, r.tuning_var, r.var_floor, r.step_count)
    }
}

impl From<SelfOrganizingMap> for MapRepr {
    fn from(m: SelfOrganizingMap) -> Self {
        MapRepr {
            preferred: m.preferred.chunks(m.input_dim).map(|c| c.to_vec()).collect(),
            tuning_var: m.tuning_var,
            var_floor: m.var_floor,
            step_count: m.step_count,
        }
    }
}

impl SelfOrganizingMap {
    /// Seed a map from the first samples of its stream.
    ///
    /// Preferred values are drawn uniformly inside the per-dimension bounding
    /// box of the warm-up batch (at most [`WARMUP_SAMPLES`] are looked at),
    /// tuning variances start at `(range / N)^2` and are never allowed below
    /// `(range * 1e-3)^2`.
    pub fn from_warmup<R: Rng + ?Sized>(
        n_neurons: usize,
        warmup: &[Vec<f64>],
        rng: &mut R,
    ) -> Result<Self> {
        if n_neurons == 0 {
            return Err(Error::Parameter("a map needs at least one neuron".into()));
        }
        let first = warmup
            .first()
            .ok_or_else(|| Error::Parameter("empty warm-up batch".into()))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::Parameter("input dimension must be positive".into()));
        }
        let batch = &warmup[..warmup.len().min(WARMUP_SAMPLES)];
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for s in batch {
            check_sample(s, dim)?;
            for (k, &v) in s.iter().enumerate() {
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        let mut range = lo.iter().zip(&hi).map(|(l, h)| h - l).fold(0.0, f64::max);
        if range <= 1e-12 {
            // Constant warm-up: fall back to a unit scale so variances stay positive.
            range = 1.0;
        }
        let mut preferred = Vec::with_capacity(n_neurons * dim);
        for _ in 0..n_neurons {
            for k in 0..dim {
                let v = if hi[k] > lo[k] { rng.random_range(lo[k]..=hi[k]) } else { lo[k] };
                preferred.push(v);
            }
        }
        let init_var = (range / n_neurons as f64).powi(2);
        let var_floor = (range * 1e-3).powi(2);
        Ok(SelfOrganizingMap {
            n_neurons,
            input_dim: dim,
            preferred,
            tuning_var: vec![init_var.max(var_floor); n_neurons],
            var_floor,
            step_count: 0,
        })
    }

    /// Build a map from explicit state.
    pub fn from_parts(
        input_dim: usize,
        preferred: Vec<f64>,
        tuning_var: Vec<f64>,
        var_floor: f64,
        step_count: u64,
    ) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Parameter("input dimension must be positive".into()));
        }
        let n = tuning_var.len();
        if n == 0 || preferred.len() != n * input_dim {
            return Err(Error::Structural(format!(
                "preferred has {} values, expected {} x {}",
                preferred.len(),
                n,
                input_dim
            )));
        }
        if !(var_floor.is_finite() && var_floor > 0.0) {
            return Err(Error::Parameter(format!("variance floor must be positive, got {var_floor}")));
        }
        if preferred.iter().any(|v| !v.is_finite()) {
            return Err(Error::InputDomain("non-finite preferred value".into()));
        }
        if tuning_var.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InputDomain("tuning variances must be finite and positive".into()));
        }
        Ok(SelfOrganizingMap { n_neurons: n, input_dim, preferred, tuning_var, var_floor, step_count })
    }

    pub fn n_neurons(&self) -> usize {
        self.n_neurons
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn var_floor(&self) -> f64 {
        self.var_floor
    }

    pub fn preferred(&self, i: usize) -> &[f64] {
        &self.preferred[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn preferred_flat(&self) -> &[f64] {
        &self.preferred
    }

    pub fn tuning_var(&self) -> &[f64] {
        &self.tuning_var
    }

    /// Lattice coordinate of neuron `i`.
    pub fn position(&self, i: usize) -> f64 {
        i as f64
    }

    /// Smallest and largest preferred value along dimension `k`.
    pub fn preferred_bounds(&self, k: usize) -> (f64, f64) {
        (0..self.n_neurons)
            .map(|i| self.preferred[i * self.input_dim + k])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    /// Gaussian response of neuron `i` to `sample`. The sample is assumed valid.
    pub fn response(&self, i: usize, sample: &[f64]) -> f64 {
        let var = self.tuning_var[i];
        let d2 = sq_dist(sample, self.preferred(i));
        (-d2 / (2.0 * var)).exp() / ((2.0 * PI).sqrt() * var.sqrt())
    }

    /// Peak response of neuron `i`, reached when the sample equals its preferred value.
    pub fn peak_response(&self, i: usize) -> f64 {
        1.0 / ((2.0 * PI).sqrt() * self.tuning_var[i].sqrt())
    }

    pub fn activate(&self, sample: &[f64]) -> Result<ActivityVector> {
        check_sample(sample, self.input_dim)?;
        Ok(ActivityVector((0..self.n_neurons).map(|i| self.response(i, sample)).collect()))
    }

    /// Lattice neighbourhood weights around neuron `b`.
    pub fn interaction_kernel(&self, b: usize, sigma: f64) -> Result<Vec<f64>> {
        if b >= self.n_neurons {
            return Err(Error::Structural(format!(
                "neuron index {b} out of range for a map of {}",
                self.n_neurons
            )));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Parameter(format!("kernel width must be positive, got {sigma}")));
        }
        let rb = self.position(b);
        let denom = 2.0 * sigma * sigma;
        Ok((0..self.n_neurons)
            .map(|i| {
                let d = self.position(i) - rb;
                (-(d * d) / denom).exp()
            })
            .collect())
    }

    /// One competitive/cooperative learning step.
    pub fn adapt(&mut self, sample: &[f64], alpha: f64, sigma: f64) -> Result<AdaptOutcome> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Parameter(format!("learning rate must lie in (0, 1], got {alpha}")));
        }
        let activity = self.activate(sample)?;
        let b = activity.winner()?;
        let h = self.interaction_kernel(b, sigma)?;
        let sq_error = sq_dist(sample, self.preferred(b));
        let d = self.input_dim;
        for (i, &hi) in h.iter().enumerate() {
            let rate = alpha * hi;
            if rate == 0.0 {
                continue;
            }
            let row = &mut self.preferred[i * d..(i + 1) * d];
            let err2 = sq_dist(sample, row);
            for (w, &s) in row.iter_mut().zip(sample) {
                *w += rate * (s - *w);
            }
            let var = &mut self.tuning_var[i];
            *var += rate * (err2 - *var);
            if *var < self.var_floor {
                *var = self.var_floor;
            }
        }
        self.step_count += 1;
        Ok(AdaptOutcome { winner: b, sq_error })
    }
}

fn check_sample(sample: &[f64], dim: usize) -> Result<()> {
    if sample.len() != dim {
        return Err(Error::Structural(format!(
            "sample has dimension {}, map expects {dim}",
            sample.len()
        )));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::InputDomain(format!("non-finite sample {sample:?}")));
    }
    Ok(())
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
