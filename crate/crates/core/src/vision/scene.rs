//! Synthetic translating scenes with analytic ground truth, and extraction
//! of per-pixel intensity, gradient, temporal-derivative and flow streams.

use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::StreamTable;
use crate::vision::frame::Frame;
use crate::vision::ops::{lucas_kanade_from, pair_derivatives, EPS_GRADIENT};

/// Column names of the scene stream table, in order.
pub const SCENE_COLUMNS: [&str; 4] = ["i", "g_mag", "v", "f_par"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SequenceKind {
    /// `0.5 + 0.5 sin(2 pi ((x - vx t) + (y - vy t) mix) / wavelength)`;
    /// `mix = 0` varies along x only.
    TranslatingSine { mix: f64 },
    /// Three superposed sinusoids of incommensurate wavelengths and
    /// orientations, so every window sees 2-D structure.
    TranslatingTexture,
}

/// (wavelength multiplier, orientation, phase) of each texture component.
const TEXTURE: [(f64, f64, f64); 3] = [(1.0, 0.3, 0.0), (1.37, 1.4, 1.1), (1.81, 2.5, 2.3)];

/// An analytic moving pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScene {
    pub kind: SequenceKind,
    /// Pixels per frame.
    pub velocity: [f64; 2],
    pub wavelength: f64,
}

/// Exact per-pixel quantities of a synthetic scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneTruth {
    pub i: f64,
    pub g: [f64; 2],
    pub v: f64,
    pub f: [f64; 2],
}

impl SyntheticScene {
    /// (amplitude, wave vector, phase) of each sinusoidal component.
    fn components(&self) -> Vec<(f64, [f64; 2], f64)> {
        let k = 2.0 * PI / self.wavelength;
        match self.kind {
            SequenceKind::TranslatingSine { mix } => vec![(0.5, [k, k * mix], 0.0)],
            SequenceKind::TranslatingTexture => TEXTURE
                .iter()
                .map(|&(m, theta, phase)| {
                    let km = k / m;
                    (0.5 / 3.0, [km * theta.cos(), km * theta.sin()], phase)
                })
                .collect(),
        }
    }

    pub fn truth(&self, x: f64, y: f64, t: f64) -> SceneTruth {
        let [vx, vy] = self.velocity;
        let mut out = SceneTruth { i: 0.5, g: [0.0; 2], v: 0.0, f: self.velocity };
        for (amp, [kx, ky], phase) in self.components() {
            let arg = kx * (x - vx * t) + ky * (y - vy * t) + phase;
            let c = amp * arg.cos();
            out.i += amp * arg.sin();
            out.g[0] += c * kx;
            out.g[1] += c * ky;
            out.v -= c * (kx * vx + ky * vy);
        }
        out
    }

    pub fn render(&self, width: usize, height: usize, t: f64) -> Result<Frame> {
        Frame::from_fn(width, height, |x, y| self.truth(x as f64, y as f64, t).i.clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub frames: Vec<Frame>,
    /// Present for generated sequences.
    pub scene: Option<SyntheticScene>,
}

impl FrameSequence {
    pub fn from_frames(frames: Vec<Frame>) -> Result<Self> {
        if let Some(f0) = frames.first() {
            if frames.iter().any(|f| !f.same_size(f0)) {
                return Err(Error::Size("frames of different sizes".into()));
            }
        }
        Ok(FrameSequence { frames, scene: None })
    }
}

pub fn synth_sequence(
    kind: SequenceKind,
    velocity: [f64; 2],
    frames: usize,
    size: (usize, usize),
    wavelength: f64,
) -> Result<FrameSequence> {
    let (w, h) = size;
    if w < 3 || h < 3 {
        return Err(Error::Size(format!("frames must be at least 3x3, got {w}x{h}")));
    }
    if frames == 0 {
        return Err(Error::Parameter("sequence needs at least one frame".into()));
    }
    if !(wavelength.is_finite() && wavelength >= 4.0) {
        return Err(Error::Parameter(format!("wavelength must be at least 4 px, got {wavelength}")));
    }
    let speed = velocity[0].hypot(velocity[1]);
    if !speed.is_finite() || speed > wavelength / 4.0 {
        return Err(Error::Parameter(format!(
            "speed {speed} px/frame aliases a {wavelength} px pattern"
        )));
    }
    if let SequenceKind::TranslatingSine { mix } = kind {
        if !mix.is_finite() {
            return Err(Error::Parameter("non-finite mix".into()));
        }
    }
    let scene = SyntheticScene { kind, velocity, wavelength };
    let frames = (0..frames).map(|t| scene.render(w, h, t as f64)).collect::<Result<Vec<_>>>()?;
    Ok(FrameSequence { frames, scene: Some(scene) })
}

/// One per-pixel observation of the scene quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSample {
    /// Frame-pair index.
    pub pair: usize,
    pub x: usize,
    pub y: usize,
    pub i: f64,
    pub g: [f64; 2],
    pub v: f64,
    pub f: [f64; 2],
    pub g_mag: f64,
    /// Flow component along the gradient direction.
    pub f_par: f64,
    /// Flow recovered only along the gradient (rank-deficient window).
    pub aperture: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Sampling {
    AllPixels,
    /// `k` distinct pixels per frame pair.
    RandomK { k: usize, seed: u64 },
}

/// Per frame pair and sampled pixel, measure (I, G, V, F) with the in-repo
/// operators. Pixels closer than `window / 2 + 1` to the border and
/// textureless pixels are skipped.
pub fn extract_streams(seq: &FrameSequence, sampling: Sampling, window: usize) -> Result<Vec<SceneSample>> {
    if seq.frames.len() < 2 {
        return Err(Error::Parameter(format!(
            "stream extraction needs at least 2 frames, got {}",
            seq.frames.len()
        )));
    }
    if window < 3 || window % 2 == 0 {
        return Err(Error::Parameter(format!("window must be odd and at least 3, got {window}")));
    }
    let (w, h) = (seq.frames[0].width(), seq.frames[0].height());
    let margin = window / 2 + 1;
    let interior: Vec<(usize, usize)> = (margin..h.saturating_sub(margin))
        .flat_map(|y| (margin..w.saturating_sub(margin)).map(move |x| (x, y)))
        .collect();
    let mut rng = match sampling {
        Sampling::RandomK { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        Sampling::AllPixels => None,
    };
    let mut rows = Vec::new();
    for (pair, fr) in seq.frames.windows(2).enumerate() {
        let (prev, next) = (&fr[0], &fr[1]);
        let (g, v) = pair_derivatives(prev, next)?;
        let flow = lucas_kanade_from(&g, &v, window);
        let picks: Vec<(usize, usize)> = match (sampling, rng.as_mut()) {
            (Sampling::RandomK { k, .. }, Some(rng)) => {
                let k = k.min(interior.len());
                sample(rng, interior.len(), k).into_iter().map(|j| interior[j]).collect()
            }
            _ => interior.clone(),
        };
        for (x, y) in picks {
            let gv = g.at(x, y);
            let g_mag = gv[0].hypot(gv[1]);
            if g_mag <= EPS_GRADIENT {
                continue;
            }
            let f = flow.flow.at(x, y);
            rows.push(SceneSample {
                pair,
                x,
                y,
                i: 0.5 * (prev.get(x, y) + next.get(x, y)),
                g: gv,
                v: v.at(x, y),
                f,
                g_mag,
                f_par: (f[0] * gv[0] + f[1] * gv[1]) / g_mag,
                aperture: flow.aperture[y * w + x],
            });
        }
    }
    Ok(rows)
}

/// Scene samples as a `i, g_mag, v, f_par` stream table.
pub fn scene_table(samples: &[SceneSample]) -> StreamTable {
    let names = SCENE_COLUMNS.iter().map(|s| s.to_string()).collect();
    let rows = samples.iter().map(|s| vec![s.i, s.g_mag, s.v, s.f_par]).collect();
    StreamTable::with_rows(names, rows).expect("fixed column layout")
}

/// Root-mean-square residual of `-v = f_par * g_mag` relative to the RMS of `v`.
pub fn flow_constraint_residual(samples: &[SceneSample]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for s in samples {
        num += (s.v + s.f_par * s.g_mag).powi(2);
        den += s.v * s.v;
    }
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        0.0
    }
}
