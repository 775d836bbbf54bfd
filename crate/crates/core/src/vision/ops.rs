//! Differential image operators: Sobel gradient, frame differencing and
//! single-scale Lucas-Kanade flow.

use crate::error::{Error, Result};
use crate::vision::frame::{Frame, ScalarField, VectorField};

/// Gradient magnitude (intensity per pixel) below which a pixel is textureless.
pub const EPS_GRADIENT: f64 = 1e-3;
/// Smallest structure-tensor eigenvalue for a full 2-D flow solution.
pub const EPS_EIGEN: f64 = 1e-4;

/// 3x3 Sobel derivatives scaled by 1/8, so a unit-slope ramp has gradient 1.
/// Borders replicate the edge pixels.
pub fn sobel_gradient(frame: &Frame) -> Result<VectorField> {
    let (w, h) = (frame.width(), frame.height());
    if w < 3 || h < 3 {
        return Err(Error::Size(format!("Sobel needs at least 3x3 pixels, got {w}x{h}")));
    }
    let mut gx = Vec::with_capacity(w * h);
    let mut gy = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let p = |dx: isize, dy: isize| frame.get_clamped(x + dx, y + dy);
            let sx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            let sy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            gx.push(sx / 8.0);
            gy.push(sy / 8.0);
        }
    }
    Ok(VectorField { width: w, height: h, x: gx, y: gy })
}

/// `next - prev`, per pixel.
pub fn temporal_derivative(prev: &Frame, next: &Frame) -> Result<ScalarField> {
    if !prev.same_size(next) {
        return Err(Error::Size(format!(
            "{}x{} vs {}x{} frames",
            prev.width(),
            prev.height(),
            next.width(),
            next.height()
        )));
    }
    Ok(ScalarField {
        width: prev.width(),
        height: prev.height(),
        values: next.pixels().iter().zip(prev.pixels()).map(|(n, p)| n - p).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub flow: VectorField,
    /// Pixels where the structure tensor was rank-deficient and only the
    /// normal flow (along the gradient) was recovered.
    pub aperture: Vec<bool>,
}

/// Spatial gradient and temporal derivative evaluated at the temporal
/// midpoint of a frame pair, as used by [`lucas_kanade`].
pub fn pair_derivatives(prev: &Frame, next: &Frame) -> Result<(VectorField, ScalarField)> {
    let v = temporal_derivative(prev, next)?;
    let g = sobel_gradient(&prev.midpoint(next)?)?;
    Ok((g, v))
}

/// Single-scale Lucas-Kanade flow over a square `window`.
pub fn lucas_kanade(prev: &Frame, next: &Frame, window: usize) -> Result<FlowField> {
    if window < 3 || window % 2 == 0 {
        return Err(Error::Parameter(format!("window must be odd and at least 3, got {window}")));
    }
    let (g, v) = pair_derivatives(prev, next)?;
    Ok(lucas_kanade_from(&g, &v, window))
}

pub(crate) fn lucas_kanade_from(g: &VectorField, v: &ScalarField, window: usize) -> FlowField {
    let (w, h) = (g.width, g.height);
    let r = (window / 2) as isize;
    let idx = |x: isize, y: isize| {
        let cx = x.clamp(0, w as isize - 1) as usize;
        let cy = y.clamp(0, h as isize - 1) as usize;
        cy * w + cx
    };
    let mut fx = vec![0.0; w * h];
    let mut fy = vec![0.0; w * h];
    let mut aperture = vec![false; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let (mut sxx, mut sxy, mut syy, mut sxt, mut syt) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for dy in -r..=r {
                for dx in -r..=r {
                    let k = idx(x + dx, y + dy);
                    let (ix, iy, it) = (g.x[k], g.y[k], v.values[k]);
                    sxx += ix * ix;
                    sxy += ix * iy;
                    syy += iy * iy;
                    sxt += ix * it;
                    syt += iy * it;
                }
            }
            let k = y as usize * w + x as usize;
            let half_trace = 0.5 * (sxx + syy);
            let det = sxx * syy - sxy * sxy;
            let lambda_min = half_trace - (half_trace * half_trace - det).max(0.0).sqrt();
            if lambda_min >= EPS_EIGEN {
                fx[k] = (-syy * sxt + sxy * syt) / det;
                fy[k] = (sxy * sxt - sxx * syt) / det;
            } else {
                aperture[k] = true;
                let (ix, iy) = (g.x[k], g.y[k]);
                let g2 = ix * ix + iy * iy;
                if g2.sqrt() > EPS_GRADIENT {
                    let s = -v.values[k] / g2;
                    fx[k] = s * ix;
                    fy[k] = s * iy;
                }
            }
        }
    }
    FlowField { flow: VectorField { width: w, height: h, x: fx, y: fy }, aperture }
}
