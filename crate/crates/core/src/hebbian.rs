//! All-to-all cross-modal weights between two maps, learned with a
//! covariance Hebbian rule against running mean activities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::som::ActivityVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Source is the `p` (row) side.
    Forward,
    /// Source is the `q` (column) side; uses the transposed matrix.
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CrossLinkRepr", into = "CrossLinkRepr")]
pub struct CrossLink {
    n_p: usize,
    n_q: usize,
    /// Row-major `n_p x n_q`.
    weights: Vec<f64>,
    mean_p: Vec<f64>,
    mean_q: Vec<f64>,
    step_count: u64,
}

/// Stored form: the matrix as nested rows.
#[derive(Serialize, Deserialize)]
struct CrossLinkRepr {
    w_cross: Vec<Vec<f64>>,
    mean_p: Vec<f64>,
    mean_q: Vec<f64>,
    step_count: u64,
}

impl TryFrom<CrossLinkRepr> for CrossLink {
    type Error = Error;

    fn try_from(r: CrossLinkRepr) -> Result<Self> {
        CrossLink::from_parts(r.w_cross, r.mean_p, r.mean_q, r.step_count)
    }
}

impl From<CrossLink> for CrossLinkRepr {
    fn from(l: CrossLink) -> Self {
        CrossLinkRepr {
            w_cross: l.rows().map(|r| r.to_vec()).collect(),
            mean_p: l.mean_p,
            mean_q: l.mean_q,
            step_count: l.step_count,
        }
    }
}

impl CrossLink {
    /// Zero weights and zero running means.
    pub fn new(n_p: usize, n_q: usize) -> Self {
        CrossLink {
            n_p,
            n_q,
            weights: vec![0.0; n_p * n_q],
            mean_p: vec![0.0; n_p],
            mean_q: vec![0.0; n_q],
            step_count: 0,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut link = CrossLink::new(n, n);
        for i in 0..n {
            link.weights[i * n + i] = 1.0;
        }
        link
    }

    pub fn from_parts(
        weights: Vec<Vec<f64>>,
        mean_p: Vec<f64>,
        mean_q: Vec<f64>,
        step_count: u64,
    ) -> Result<Self> {
        let n_p = weights.len();
        let n_q = mean_q.len();
        if n_p == 0 || n_q == 0 || mean_p.len() != n_p {
            return Err(Error::Structural(format!(
                "link matrix has {n_p} rows but {} row means",
                mean_p.len()
            )));
        }
        if let Some(bad) = weights.iter().position(|r| r.len() != n_q) {
            return Err(Error::Structural(format!(
                "link matrix row {bad} has {} columns, expected {n_q}",
                weights[bad].len()
            )));
        }
        let flat: Vec<f64> = weights.into_iter().flatten().collect();
        if flat.iter().chain(&mean_p).chain(&mean_q).any(|v| !v.is_finite()) {
            return Err(Error::InputDomain("non-finite link state".into()));
        }
        Ok(CrossLink { n_p, n_q, weights: flat, mean_p, mean_q, step_count })
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    pub fn n_q(&self) -> usize {
        self.n_q
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n_q + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n_q..(i + 1) * self.n_q]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.weights.chunks(self.n_q)
    }

    pub fn weights_flat(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean_p(&self) -> &[f64] {
        &self.mean_p
    }

    pub fn mean_q(&self) -> &[f64] {
        &self.mean_q
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    fn check_sizes(&self, act_p: &ActivityVector, act_q: &ActivityVector) -> Result<()> {
        if act_p.len() != self.n_p || act_q.len() != self.n_q {
            return Err(Error::Structural(format!(
                "activities of sizes ({}, {}) do not fit a {}x{} link",
                act_p.len(),
                act_q.len(),
                self.n_p,
                self.n_q
            )));
        }
        Ok(())
    }

    fn check_rates(eta: f64, beta: f64) -> Result<()> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::Parameter(format!("Hebbian rate must be positive, got {eta}")));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::Parameter(format!("mean-tracking rate must lie in (0, 1], got {beta}")));
        }
        Ok(())
    }

    fn refreshed_means(&self, act_p: &ActivityVector, act_q: &ActivityVector, beta: f64) -> (Vec<f64>, Vec<f64>) {
        let blend = |prev: &[f64], act: &[f64]| -> Vec<f64> {
            prev.iter().zip(act).map(|(m, a)| m + beta * (a - m)).collect()
        };
        (blend(&self.mean_p, act_p.values()), blend(&self.mean_q, act_q.values()))
    }

    /// The raw covariance increment (before normalization) that
    /// [`update_link`](Self::update_link) would apply. Row-major `n_p x n_q`.
    pub fn covariance_delta(
        &self,
        act_p: &ActivityVector,
        act_q: &ActivityVector,
        eta: f64,
        beta: f64,
    ) -> Result<Vec<f64>> {
        self.check_sizes(act_p, act_q)?;
        Self::check_rates(eta, beta)?;
        let (mp, mq) = self.refreshed_means(act_p, act_q, beta);
        let dq: Vec<f64> = act_q.values().iter().zip(&mq).map(|(a, m)| a - m).collect();
        let mut delta = Vec::with_capacity(self.n_p * self.n_q);
        for (a, m) in act_p.values().iter().zip(&mp) {
            let dp = eta * (a - m);
            delta.extend(dq.iter().map(|d| dp * d));
        }
        Ok(delta)
    }

    /// Refresh the running means, apply the covariance increment, then scale
    /// every row by `1 / max(1, sum_j |w_ij|)`.
    pub fn update_link(
        &mut self,
        act_p: &ActivityVector,
        act_q: &ActivityVector,
        eta: f64,
        beta: f64,
    ) -> Result<()> {
        self.check_sizes(act_p, act_q)?;
        Self::check_rates(eta, beta)?;
        let (mp, mq) = self.refreshed_means(act_p, act_q, beta);
        self.mean_p = mp;
        self.mean_q = mq;
        let dq: Vec<f64> = act_q.values().iter().zip(&self.mean_q).map(|(a, m)| a - m).collect();
        for (i, (a, m)) in act_p.values().iter().zip(&self.mean_p).enumerate() {
            let dp = eta * (a - m);
            let row = &mut self.weights[i * self.n_q..(i + 1) * self.n_q];
            if dp == 0.0 {
                continue;
            }
            for (w, d) in row.iter_mut().zip(&dq) {
                *w += dp * d;
            }
            let mass: f64 = row.iter().map(|w| w.abs()).sum();
            if mass > 1.0 {
                let s = 1.0 / mass;
                row.iter_mut().for_each(|w| *w *= s);
            }
        }
        self.step_count += 1;
        Ok(())
    }

    /// Linear transport through the matrix followed by rectification, with no
    /// rescaling.
    pub fn propagate_raw(&self, act: &ActivityVector, direction: Direction) -> Result<ActivityVector> {
        let (n_in, n_out) = match direction {
            Direction::Forward => (self.n_p, self.n_q),
            Direction::Backward => (self.n_q, self.n_p),
        };
        if act.len() != n_in {
            return Err(Error::Structural(format!(
                "activity of size {} does not fit the {direction:?} side of a {}x{} link",
                act.len(),
                self.n_p,
                self.n_q
            )));
        }
        let mut out = vec![0.0; n_out];
        match direction {
            Direction::Forward => {
                for (row, &a) in self.weights.chunks(self.n_q).zip(act.values()) {
                    if a == 0.0 {
                        continue;
                    }
                    for (o, w) in out.iter_mut().zip(row) {
                        *o += w * a;
                    }
                }
            }
            Direction::Backward => {
                for (o, row) in out.iter_mut().zip(self.weights.chunks(self.n_q)) {
                    *o = row.iter().zip(act.values()).map(|(w, a)| w * a).sum();
                }
            }
        }
        out.iter_mut().for_each(|o| *o = o.max(0.0));
        Ok(ActivityVector(out))
    }

    /// Transport activity across the link; the output's maximum is rescaled
    /// to the input's maximum.
    pub fn propagate(&self, act: &ActivityVector, direction: Direction) -> Result<ActivityVector> {
        let mut out = self.propagate_raw(act, direction)?;
        let out_max = out.max();
        let in_max = act.max();
        if out_max > 0.0 && out_max != in_max {
            let s = in_max / out_max;
            out.0.iter_mut().for_each(|o| *o *= s);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn act(v: &[f64]) -> ActivityVector {
        ActivityVector(v.to_vec())
    }

    #[test]
    fn zero_covariance_gives_zero_delta() {
        let mut link = CrossLink::new(3, 2);
        link.update_link(&act(&[1.0, 2.0, 3.0]), &act(&[0.5, 0.25]), 0.1, 1.0).unwrap();
        // Means now equal the activity, so replaying it is covariance-free.
        let d = link.covariance_delta(&act(&[1.0, 2.0, 3.0]), &act(&[4.0, 0.0]), 0.1, 0.3).unwrap();
        assert!(d.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn covariance_signs() {
        let link = CrossLink::new(1, 2);
        // means start at zero; beta 0.5 -> refreshed means are half the activity
        let d = link.covariance_delta(&act(&[2.0]), &act(&[1.0, 0.0]), 1.0, 0.5).unwrap();
        assert!(d[0] > 0.0);
        assert_relative_eq!(d[0], 1.0 * 0.5, epsilon = 1e-15);
        assert_eq!(d[1], 0.0);

        let mut link = CrossLink::new(1, 1);
        link.update_link(&act(&[0.0]), &act(&[1.0]), 0.1, 1.0).unwrap();
        // p above its mean, q below its mean
        let d = link.covariance_delta(&act(&[1.0]), &act(&[0.0]), 1.0, 0.5).unwrap();
        assert!(d[0] < 0.0);
    }

    #[test]
    fn full_mean_tracking_is_a_no_op() {
        let mut link = CrossLink::from_parts(
            vec![vec![0.2, -0.1], vec![0.0, 0.3]],
            vec![0.3, 0.1],
            vec![0.0, 1.0],
            5,
        )
        .unwrap();
        let before = link.weights_flat().to_vec();
        link.update_link(&act(&[4.0, 0.0]), &act(&[0.0, 9.0]), 0.7, 1.0).unwrap();
        assert_eq!(link.weights_flat(), &before[..]);
        assert_eq!(link.mean_p(), &[4.0, 0.0]);
        assert_eq!(link.step_count(), 6);
    }

    #[test]
    fn rows_are_normalized() {
        let mut link = CrossLink::new(2, 3);
        link.update_link(&act(&[10.0, 0.0]), &act(&[10.0, 0.0, 5.0]), 1.0, 0.5).unwrap();
        for row in link.rows() {
            let mass: f64 = row.iter().map(|w| w.abs()).sum();
            assert!(mass <= 1.0 + 1e-12);
        }
        assert!(link.weight(0, 0) > 0.0);
    }

    #[test]
    fn size_mismatch_is_structural() {
        let mut link = CrossLink::new(2, 3);
        assert!(matches!(
            link.update_link(&act(&[1.0]), &act(&[1.0, 1.0, 1.0]), 0.1, 0.5),
            Err(Error::Structural(_))
        ));
        assert!(matches!(link.propagate(&act(&[1.0; 3]), Direction::Forward), Err(Error::Structural(_))));
        assert!(link.propagate(&act(&[1.0; 3]), Direction::Backward).is_ok());
    }

    #[test]
    fn rejects_bad_rates() {
        let mut link = CrossLink::new(1, 1);
        assert!(link.update_link(&act(&[1.0]), &act(&[1.0]), 0.0, 0.5).is_err());
        assert!(link.update_link(&act(&[1.0]), &act(&[1.0]), 0.1, 0.0).is_err());
        assert!(link.update_link(&act(&[1.0]), &act(&[1.0]), 0.1, 1.1).is_err());
    }

    #[test]
    fn identity_propagation() {
        let link = CrossLink::identity(4);
        let a = act(&[0.1, 3.0, 0.0, 2.5]);
        assert_eq!(link.propagate(&a, Direction::Forward).unwrap(), a);
        assert_eq!(link.propagate(&a, Direction::Backward).unwrap(), a);
    }

    #[test]
    fn zero_matrix_propagates_nothing() {
        let link = CrossLink::new(3, 4);
        let out = link.propagate(&act(&[1.0, 2.0, 3.0]), Direction::Forward).unwrap();
        assert_eq!(out.values(), &[0.0; 4]);
    }

    #[test]
    fn single_synapse_routing() {
        let mut w = vec![vec![0.0; 4]; 3];
        w[1][2] = 0.4;
        let link = CrossLink::from_parts(w, vec![0.0; 3], vec![0.0; 4], 1).unwrap();
        let out = link.propagate(&act(&[0.0, 2.0, 0.0]), Direction::Forward).unwrap();
        assert_eq!(out.values(), &[0.0, 0.0, 2.0, 0.0]);
        let back = link.propagate(&act(&[0.0, 0.0, 5.0, 0.0]), Direction::Backward).unwrap();
        assert_eq!(back.values(), &[0.0, 5.0, 0.0]);
    }

    #[test]
    fn negative_transport_is_rectified() {
        let link = CrossLink::from_parts(vec![vec![-1.0, 0.5]], vec![0.0], vec![0.0; 2], 1).unwrap();
        let out = link.propagate(&act(&[1.0]), Direction::Forward).unwrap();
        assert_eq!(out.values(), &[0.0, 1.0]);
    }

    proptest! {
        #[test]
        fn raw_propagation_is_positively_homogeneous(
            w in proptest::collection::vec(-1.0f64..1.0, 12),
            a in proptest::collection::vec(0.0f64..5.0, 3),
            c in 0.01f64..100.0,
        ) {
            let rows: Vec<Vec<f64>> = w.chunks(4).map(|r| r.to_vec()).collect();
            let link = CrossLink::from_parts(rows, vec![0.0; 3], vec![0.0; 4], 1).unwrap();
            let base = link.propagate_raw(&ActivityVector(a.clone()), Direction::Forward).unwrap();
            let scaled_in = ActivityVector(a.iter().map(|x| x * c).collect());
            let scaled = link.propagate_raw(&scaled_in, Direction::Forward).unwrap();
            for (x, y) in base.values().iter().zip(scaled.values()) {
                prop_assert!((x * c - y).abs() <= 1e-9 * (1.0 + y.abs()));
            }
        }

        #[test]
        fn propagate_preserves_maximum(
            w in proptest::collection::vec(0.01f64..1.0, 12),
            a in proptest::collection::vec(0.0f64..5.0, 3),
        ) {
            prop_assume!(a.iter().any(|&x| x > 0.0));
            let rows: Vec<Vec<f64>> = w.chunks(4).map(|r| r.to_vec()).collect();
            let link = CrossLink::from_parts(rows, vec![0.0; 3], vec![0.0; 4], 1).unwrap();
            let input = ActivityVector(a);
            let out = link.propagate(&input, Direction::Forward).unwrap();
            prop_assert!((out.max() - input.max()).abs() <= 1e-12 * input.max());
        }
    }
}
