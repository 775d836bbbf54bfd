//! Population decoding: turning a pattern of activity back into a value in
//! stream units.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::brent::brent_minimize_from;
use crate::error::{Error, Result};
use crate::som::{ActivityVector, SelfOrganizingMap};

/// Fraction of most active neurons averaged by [`decode_vector`].
pub const VECTOR_TOP_FRACTION: f64 = 0.1;

/// Relative gain mismatch under which an activity pattern is taken to be a
/// direct tuning-curve response.
const GAIN_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    pub value: Vec<f64>,
    /// Activity of the most active neuron.
    pub confidence: f64,
}

impl DecodeResult {
    /// First component; the whole value for scalar streams.
    pub fn scalar(&self) -> f64 {
        self.value[0]
    }
}

pub fn decode(som: &SelfOrganizingMap, activity: &ActivityVector) -> Result<DecodeResult> {
    if som.input_dim() == 1 {
        decode_scalar(som, activity)
    } else {
        decode_vector(som, activity)
    }
}

fn check(som: &SelfOrganizingMap, activity: &ActivityVector) -> Result<usize> {
    if activity.len() != som.n_neurons() {
        return Err(Error::Structural(format!(
            "activity of size {} for a map of {} neurons",
            activity.len(),
            som.n_neurons()
        )));
    }
    if activity.values().iter().any(|a| !a.is_finite()) {
        return Err(Error::InputDomain("non-finite activity".into()));
    }
    let b = activity.winner()?;
    if activity.values()[b] <= 0.0 {
        return Err(Error::NoSignal);
    }
    Ok(b)
}

/// Decode a scalar map.
///
/// The winner's Gaussian is inverted analytically to get a first estimate,
/// which is then refined with Brent's method against the whole population
/// pattern. Patterns that are not at tuning-curve scale (normalized or
/// propagated activity) are fitted up to a gain factor.
pub fn decode_scalar(som: &SelfOrganizingMap, activity: &ActivityVector) -> Result<DecodeResult> {
    if som.input_dim() != 1 {
        return Err(Error::Structural(format!(
            "scalar decoding needs a 1-D map, got dimension {}",
            som.input_dim()
        )));
    }
    let b = check(som, activity)?;
    let act = activity.values();
    let n = som.n_neurons();
    let a = act[b];
    let w = som.preferred(b)[0];
    let xi = som.tuning_var()[b].sqrt();

    let displacement = xi * (-2.0 * ((2.0 * PI).sqrt() * xi * a).ln()).max(0.0).sqrt();
    let toward_higher = if b > 0 && b + 1 < n {
        let nb = if act[b + 1] > act[b - 1] { b + 1 } else { b - 1 };
        som.preferred(nb)[0] >= w
    } else {
        b < n / 2
    };
    let guess = if toward_higher { w + displacement } else { w - displacement };

    let (pmin, pmax) = som.preferred_bounds(0);
    let mean_xi = som.tuning_var().iter().map(|v| v.sqrt()).sum::<f64>() / n as f64;
    let (bound_lo, bound_hi) = (pmin - 2.0 * mean_xi, pmax + 2.0 * mean_xi);
    let range = if pmax > pmin { pmax - pmin } else { xi };

    if n == 1 {
        // A lone tuning curve carries no shape information beyond its height.
        return Ok(DecodeResult { value: vec![guess.clamp(bound_lo, bound_hi)], confidence: a });
    }

    let lo = (w - 2.0 * xi).min(guess - 0.5 * xi);
    let hi = (w + 2.0 * xi).max(guess + 0.5 * xi);
    // Fresh activations are fitted as they are; rescaled patterns (lateral
    // estimates) are fitted up to the least-squares gain.
    let gain = |y: f64| {
        let (mut dot, mut ee) = (0.0, 0.0);
        for (i, &ai) in act.iter().enumerate() {
            let e = som.response(i, &[y]);
            dot += ai * e;
            ee += e * e;
        }
        if ee > 0.0 {
            dot / ee
        } else {
            0.0
        }
    };
    let g0 = gain(guess);
    let free_gain = !((g0 - 1.0).abs() <= GAIN_TOLERANCE);
    let cost = |y: f64| {
        let g = if free_gain { gain(y) } else { 1.0 };
        act.iter()
            .enumerate()
            .map(|(i, &ai)| {
                let r = ai - g * som.response(i, &[y]);
                r * r
            })
            .sum::<f64>()
    };
    let refined = brent_minimize_from(cost, lo, hi, Some(guess), 1e-6 * range)?;
    let value = refined.x.clamp(bound_lo, bound_hi);
    Ok(DecodeResult { value: vec![value], confidence: a })
}

/// Activity-weighted mean of the preferred vectors of the most active
/// neurons (top 10%, ties included).
pub fn decode_vector(som: &SelfOrganizingMap, activity: &ActivityVector) -> Result<DecodeResult> {
    weighted_mean(som, activity, VECTOR_TOP_FRACTION)
}

/// Activity-weighted mean of all preferred values. Works for any input
/// dimension and for patterns with several bumps.
pub fn decode_population(som: &SelfOrganizingMap, activity: &ActivityVector) -> Result<DecodeResult> {
    weighted_mean(som, activity, 1.0)
}

fn weighted_mean(som: &SelfOrganizingMap, activity: &ActivityVector, fraction: f64) -> Result<DecodeResult> {
    let b = check(som, activity)?;
    let act = activity.values();
    let n = som.n_neurons();
    let k = ((fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut sorted: Vec<f64> = act.to_vec();
    sorted.sort_by(|x, y| y.total_cmp(x));
    let cutoff = sorted[k - 1];
    // Relative weights keep subnormal patterns usable.
    let peak = act[b];
    let dim = som.input_dim();
    let mut value = vec![0.0; dim];
    let mut total = 0.0;
    for (i, &a) in act.iter().enumerate() {
        if a >= cutoff && a > 0.0 {
            let w = a / peak;
            total += w;
            for (v, p) in value.iter_mut().zip(som.preferred(i)) {
                *v += w * p;
            }
        }
    }
    value.iter_mut().for_each(|v| *v /= total);
    Ok(DecodeResult { value, confidence: act[b] })
}
