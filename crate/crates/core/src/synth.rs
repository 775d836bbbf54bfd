//! Synthetic multimodal streams with known hidden relations.

use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::StreamTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    /// `x^p`; params `[p]`.
    Power,
    /// `c0 + c1 x + c2 x^2 + ...`; params are the coefficients.
    Polynomial,
    /// `a x + b`; params `[a, b]`.
    Affine,
    /// `amp * sin(freq * x + phase) + offset`; params `[amp, freq, phase, offset]`.
    Sine,
    /// The `parts` applied left to right.
    Composed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationSpec {
    pub kind: RelationKind,
    #[serde(default)]
    pub params: Vec<f64>,
    /// Input domain `[lo, hi]`.
    pub domain: [f64; 2],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<RelationSpec>,
}

impl RelationSpec {
    pub fn power(exponent: f64, domain: [f64; 2]) -> Self {
        RelationSpec { kind: RelationKind::Power, params: vec![exponent], domain, parts: vec![] }
    }

    pub fn affine(slope: f64, intercept: f64, domain: [f64; 2]) -> Self {
        RelationSpec { kind: RelationKind::Affine, params: vec![slope, intercept], domain, parts: vec![] }
    }

    pub fn polynomial(coeffs: Vec<f64>, domain: [f64; 2]) -> Self {
        RelationSpec { kind: RelationKind::Polynomial, params: coeffs, domain, parts: vec![] }
    }

    pub fn sine(amp: f64, freq: f64, phase: f64, offset: f64, domain: [f64; 2]) -> Self {
        RelationSpec {
            kind: RelationKind::Sine,
            params: vec![amp, freq, phase, offset],
            domain,
            parts: vec![],
        }
    }

    pub fn composed(parts: Vec<RelationSpec>) -> Self {
        let domain = parts.first().map(|p| p.domain).unwrap_or([0.0, 1.0]);
        RelationSpec { kind: RelationKind::Composed, params: vec![], domain, parts }
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Specification(format!("degenerate domain [{lo}, {hi}]")));
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Specification("non-finite relation parameter".into()));
        }
        let want = |n: usize| -> Result<()> {
            if self.params.len() != n {
                return Err(Error::Specification(format!(
                    "{:?} relation takes {n} parameters, got {}",
                    self.kind,
                    self.params.len()
                )));
            }
            Ok(())
        };
        match self.kind {
            RelationKind::Power => {
                want(1)?;
                if self.params[0].fract() != 0.0 && lo < 0.0 {
                    return Err(Error::Specification(
                        "fractional power needs a nonnegative domain".into(),
                    ));
                }
            }
            RelationKind::Polynomial => {
                if self.params.is_empty() {
                    return Err(Error::Specification("polynomial needs coefficients".into()));
                }
            }
            RelationKind::Affine => want(2)?,
            RelationKind::Sine => want(4)?,
            RelationKind::Composed => {
                if self.parts.is_empty() {
                    return Err(Error::Specification("composed relation without parts".into()));
                }
                for p in &self.parts {
                    p.validate()?;
                }
            }
        }
        Ok(())
    }

    pub fn apply(&self, x: f64) -> f64 {
        let p = &self.params;
        match self.kind {
            RelationKind::Power => x.powf(p[0]),
            RelationKind::Polynomial => p.iter().rev().fold(0.0, |acc, c| acc * x + c),
            RelationKind::Affine => p[0] * x + p[1],
            RelationKind::Sine => p[0] * (p[1] * x + p[2]).sin() + p[3],
            RelationKind::Composed => self.parts.iter().fold(x, |acc, r| r.apply(acc)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Pair,
    Chain,
    Tree,
    Cycle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub from: String,
    pub to: String,
    pub relation: RelationSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologySpec {
    pub shape: Shape,
    pub edges: Vec<EdgeSpec>,
}

/// Probe points used by the cycle-consistency check.
pub const CYCLE_PROBES: usize = 100;
pub const CYCLE_TOLERANCE: f64 = 1e-9;

struct Plan {
    names: Vec<String>,
    root: usize,
    root_domain: [f64; 2],
    /// (from, to, edge index) in generation order.
    steps: Vec<(usize, usize, usize)>,
}

impl TopologySpec {
    fn edge(from: &str, to: &str, relation: RelationSpec) -> EdgeSpec {
        EdgeSpec { from: from.into(), to: to.into(), relation }
    }

    /// `y = x^2` on `[0, 1]`.
    pub fn pair_square() -> Self {
        TopologySpec {
            shape: Shape::Pair,
            edges: vec![Self::edge("x", "y", RelationSpec::power(2.0, [0.0, 1.0]))],
        }
    }

    /// `y = sqrt(x)` on `[0, 1]`.
    pub fn pair_sqrt() -> Self {
        TopologySpec {
            shape: Shape::Pair,
            edges: vec![Self::edge("x", "y", RelationSpec::power(0.5, [0.0, 1.0]))],
        }
    }

    /// `y = 0.5 sin(pi x) + 0.5` on `[0, 1]`.
    pub fn pair_sine() -> Self {
        TopologySpec {
            shape: Shape::Pair,
            edges: vec![Self::edge("x", "y", RelationSpec::sine(0.5, PI, 0.0, 0.5, [0.0, 1.0]))],
        }
    }

    /// `m1 -> m2 = m1^2 -> m3 = sqrt(m2)`.
    pub fn chain() -> Self {
        TopologySpec {
            shape: Shape::Chain,
            edges: vec![
                Self::edge("m1", "m2", RelationSpec::power(2.0, [0.0, 1.0])),
                Self::edge("m2", "m3", RelationSpec::power(0.5, [0.0, 1.0])),
            ],
        }
    }

    /// Root `m1` with leaves `m2 = m1^2` and `m3 = 0.5 sin(pi m1) + 0.5`.
    pub fn tree() -> Self {
        TopologySpec {
            shape: Shape::Tree,
            edges: vec![
                Self::edge("m1", "m2", RelationSpec::power(2.0, [0.0, 1.0])),
                Self::edge("m1", "m3", RelationSpec::sine(0.5, PI, 0.0, 0.5, [0.0, 1.0])),
            ],
        }
    }

    /// `m1 -> m2 = m1^2 -> m3 = 0.5 m2 + 0.25 -> m1 = sqrt(2 m3 - 0.5)`.
    pub fn cycle() -> Self {
        TopologySpec {
            shape: Shape::Cycle,
            edges: vec![
                Self::edge("m1", "m2", RelationSpec::power(2.0, [0.0, 1.0])),
                Self::edge("m2", "m3", RelationSpec::affine(0.5, 0.25, [0.0, 1.0])),
                Self::edge(
                    "m3",
                    "m1",
                    RelationSpec::composed(vec![
                        RelationSpec::affine(2.0, -0.5, [0.25, 0.75]),
                        RelationSpec::power(0.5, [0.0, 1.0]),
                    ]),
                ),
            ],
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        Some(match name {
            "pair_square" => Self::pair_square(),
            "pair_sqrt" => Self::pair_sqrt(),
            "pair_sine" => Self::pair_sine(),
            "chain" => Self::chain(),
            "tree" => Self::tree(),
            "cycle" => Self::cycle(),
            _ => return None,
        })
    }

    pub const PRESETS: [&'static str; 6] =
        ["pair_square", "pair_sqrt", "pair_sine", "chain", "tree", "cycle"];

    /// Stream names in order of first appearance.
    pub fn stream_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for e in &self.edges {
            for n in [&e.from, &e.to] {
                if !names.contains(n) {
                    names.push(n.clone());
                }
            }
        }
        names
    }

    pub fn validate(&self) -> Result<()> {
        self.plan().map(|_| ())
    }

    fn plan(&self) -> Result<Plan> {
        if self.edges.is_empty() {
            return Err(Error::Specification("topology without edges".into()));
        }
        let names = self.stream_names();
        let idx = |n: &str| names.iter().position(|m| m == n).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.edges {
            e.relation.validate()?;
            if e.from == e.to {
                return Err(Error::Specification(format!("self-loop on `{}`", e.from)));
            }
            let key = if e.from < e.to { (&e.from, &e.to) } else { (&e.to, &e.from) };
            if !seen.insert(key) {
                return Err(Error::Specification(format!(
                    "more than one edge between `{}` and `{}`",
                    e.from, e.to
                )));
            }
        }
        let n = names.len();
        let m = self.edges.len();
        let mut indegree = vec![0usize; n];
        for e in &self.edges {
            indegree[idx(&e.to)] += 1;
        }
        let shape_ok = match self.shape {
            Shape::Pair => m == 1,
            Shape::Chain | Shape::Tree => m == n - 1,
            Shape::Cycle => m == n && n >= 3,
        };
        if !shape_ok {
            return Err(Error::Specification(format!(
                "{:?} topology cannot have {n} streams and {m} edges",
                self.shape
            )));
        }
        if self.shape == Shape::Chain {
            let out_ok = names.iter().all(|s| self.edges.iter().filter(|e| &e.from == s).count() <= 1);
            if !out_ok || indegree.iter().any(|&d| d > 1) {
                return Err(Error::Specification("chain streams must form a single path".into()));
            }
        }
        let root = match self.shape {
            Shape::Cycle => {
                if indegree.iter().any(|&d| d != 1) {
                    return Err(Error::Specification("cycle edges must form one directed loop".into()));
                }
                idx(&self.edges[0].from)
            }
            _ => {
                let roots: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
                if roots.len() != 1 || indegree.iter().any(|&d| d > 1) {
                    return Err(Error::Specification(
                        "acyclic topologies need exactly one root and one parent per stream".into(),
                    ));
                }
                roots[0]
            }
        };
        // Breadth-first generation order from the root; in a cycle the edge
        // closing the loop is skipped.
        let mut assigned = vec![false; n];
        assigned[root] = true;
        let mut queue = VecDeque::from([root]);
        let mut steps = Vec::new();
        while let Some(u) = queue.pop_front() {
            for (k, e) in self.edges.iter().enumerate() {
                let (f, t) = (idx(&e.from), idx(&e.to));
                if f == u && !assigned[t] {
                    assigned[t] = true;
                    steps.push((f, t, k));
                    queue.push_back(t);
                }
            }
        }
        if assigned.iter().any(|a| !a) {
            return Err(Error::Specification("topology is not connected from its root".into()));
        }
        let root_domain = self
            .edges
            .iter()
            .find(|e| idx(&e.from) == root)
            .map(|e| e.relation.domain)
            .unwrap();
        let plan = Plan { names, root, root_domain, steps };
        if self.shape == Shape::Cycle {
            self.check_cycle(&plan)?;
        }
        Ok(plan)
    }

    fn check_cycle(&self, plan: &Plan) -> Result<()> {
        let [lo, hi] = plan.root_domain;
        let mut order = Vec::with_capacity(self.edges.len());
        let mut at = &self.edges[0].from;
        for _ in 0..self.edges.len() {
            let e = self
                .edges
                .iter()
                .find(|e| &e.from == at)
                .ok_or_else(|| Error::Specification("broken cycle".into()))?;
            order.push(e);
            at = &e.to;
        }
        for k in 0..CYCLE_PROBES {
            let x = lo + (hi - lo) * k as f64 / (CYCLE_PROBES - 1) as f64;
            let back = order.iter().fold(x, |acc, e| e.relation.apply(acc));
            if !((back - x).abs() <= CYCLE_TOLERANCE) {
                return Err(Error::Specification(format!(
                    "inconsistent cycle: {x} maps back to {back}"
                )));
            }
        }
        Ok(())
    }
}

/// Sample `n` synchronized rows. The root stream is uniform on its domain,
/// the others follow the edge relations, and every stream then receives
/// independent Gaussian noise of standard deviation `noise_sigma`.
///
/// Root values and noise come from separate random streams, so the same seed
/// with `noise_sigma = 0` yields the clean version of a noisy table.
pub fn generate(spec: &TopologySpec, n: usize, noise_sigma: f64, seed: u64) -> Result<StreamTable> {
    if n == 0 {
        return Err(Error::Parameter("row count must be positive".into()));
    }
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::Parameter(format!("noise sigma must be nonnegative, got {noise_sigma}")));
    }
    let plan = spec.plan()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(1);
    let noise = Normal::new(0.0, noise_sigma).map_err(|e| Error::Parameter(e.to_string()))?;
    let [lo, hi] = plan.root_domain;
    let mut table = StreamTable::new(plan.names.clone())?;
    let mut clean = vec![0.0; plan.names.len()];
    for _ in 0..n {
        clean[plan.root] = rng.random_range(lo..=hi);
        for &(f, t, k) in &plan.steps {
            clean[t] = spec.edges[k].relation.apply(clean[f]);
        }
        let row = clean
            .iter()
            .map(|&v| if noise_sigma > 0.0 { v + noise.sample(&mut noise_rng) } else { v })
            .collect();
        table.push(row)?;
    }
    Ok(table)
}

/// Add independent Gaussian noise to one column.
pub fn add_noise(table: &StreamTable, column: &str, sigma: f64, seed: u64) -> Result<StreamTable> {
    let k = table
        .column_index(column)
        .ok_or_else(|| Error::Configuration(format!("no stream named `{column}`")))?;
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::Parameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = table
        .rows()
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r[k] += noise.sample(&mut rng);
            r
        })
        .collect();
    StreamTable::with_rows(table.names().to_vec(), rows)
}

/// Noiseless value of every stream for a given root value.
pub fn evaluate(spec: &TopologySpec, root_value: f64) -> Result<BTreeMap<String, f64>> {
    let plan = spec.plan()?;
    let mut vals = vec![0.0; plan.names.len()];
    vals[plan.root] = root_value;
    for &(f, t, k) in &plan.steps {
        vals[t] = spec.edges[k].relation.apply(vals[f]);
    }
    Ok(plan.names.into_iter().zip(vals).collect())
}

/// Name of the stream sampled directly; every other stream derives from it.
pub fn root_stream(spec: &TopologySpec) -> Result<(String, [f64; 2])> {
    let plan = spec.plan()?;
    Ok((plan.names[plan.root].clone(), plan.root_domain))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_pair_is_exact() {
        let t = generate(&TopologySpec::pair_square(), 3, 0.0, 9).unwrap();
        assert_eq!(t.names(), &["x", "y"]);
        for r in t.rows() {
            assert_eq!(r[1], r[0] * r[0]);
        }
    }

    #[test]
    fn inverse_chain_returns_to_start() {
        let t = generate(&TopologySpec::chain(), 200, 0.0, 1).unwrap();
        for r in t.rows() {
            assert!((r[0] - r[2]).abs() < 1e-15);
        }
    }

    #[test]
    fn noise_level() {
        let t = generate(&TopologySpec::pair_square(), 10_000, 0.05, 2024).unwrap();
        let clean = generate(&TopologySpec::pair_square(), 10_000, 0.0, 2024).unwrap();
        let resid: Vec<f64> =
            t.rows().iter().zip(clean.rows()).map(|(r, c)| r[1] - c[0] * c[0]).collect();
        let mean = resid.iter().sum::<f64>() / resid.len() as f64;
        let var = resid.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (resid.len() - 1) as f64;
        let sd = var.sqrt();
        assert!((0.045..=0.055).contains(&sd), "{sd}");
    }

    #[test]
    fn single_stream_noise() {
        let clean = generate(&TopologySpec::pair_square(), 100, 0.0, 8).unwrap();
        let noisy = add_noise(&clean, "y", 0.1, 3).unwrap();
        assert_eq!(clean.column("x"), noisy.column("x"));
        assert_ne!(clean.column("y"), noisy.column("y"));
        assert!(add_noise(&clean, "z", 0.1, 3).is_err());
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = generate(&TopologySpec::tree(), 500, 0.1, 77).unwrap();
        let b = generate(&TopologySpec::tree(), 500, 0.1, 77).unwrap();
        assert_eq!(a, b);
        let c = generate(&TopologySpec::tree(), 500, 0.1, 78).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noiseless_streams_stay_in_domains() {
        for name in TopologySpec::PRESETS {
            let spec = TopologySpec::preset(name).unwrap();
            let t = generate(&spec, 2000, 0.0, 5).unwrap();
            for e in &spec.edges {
                let col = t.column(&e.from).unwrap();
                let [lo, hi] = e.relation.domain;
                assert!(col.iter().all(|v| (lo..=hi).contains(v)), "{name}: {}", e.from);
            }
        }
    }

    #[test]
    fn shipped_cycles_are_consistent() {
        TopologySpec::cycle().validate().unwrap();
        let t = generate(&TopologySpec::cycle(), 100, 0.0, 3).unwrap();
        let back = &TopologySpec::cycle().edges[2].relation;
        for r in t.rows() {
            assert!((back.apply(r[2]) - r[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn inconsistent_cycle_is_rejected() {
        let mut spec = TopologySpec::cycle();
        spec.edges[1].relation = RelationSpec::affine(0.5, 0.3, [0.0, 1.0]);
        assert!(matches!(generate(&spec, 10, 0.0, 1), Err(Error::Specification(_))));
    }

    #[test]
    fn malformed_topologies() {
        let mut spec = TopologySpec::chain();
        spec.shape = Shape::Pair;
        assert!(spec.validate().is_err());
        let mut spec = TopologySpec::pair_square();
        spec.edges[0].relation.domain = [1.0, 1.0];
        assert!(spec.validate().is_err());
        let mut spec = TopologySpec::pair_square();
        spec.edges[0].to = "x".into();
        assert!(spec.validate().is_err());
        let mut spec = TopologySpec::pair_sqrt();
        spec.edges[0].relation.domain = [-1.0, 1.0];
        assert!(spec.validate().is_err());
        assert!(generate(&TopologySpec::pair_square(), 0, 0.0, 1).is_err());
    }

    #[test]
    fn relation_kinds() {
        assert_eq!(RelationSpec::polynomial(vec![1.0, 0.0, 2.0], [0.0, 1.0]).apply(3.0), 19.0);
        assert_eq!(RelationSpec::affine(2.0, -1.0, [0.0, 1.0]).apply(0.25), -0.5);
        let s = RelationSpec::sine(0.5, PI, 0.0, 0.5, [0.0, 1.0]);
        assert!((s.apply(0.5) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn evaluate_follows_edges() {
        let vals = evaluate(&TopologySpec::tree(), 0.5).unwrap();
        assert_eq!(vals["m2"], 0.25);
        assert!((vals["m3"] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let spec = TopologySpec::cycle();
        let s = serde_json::to_string(&spec).unwrap();
        let back: TopologySpec = serde_json::from_str(&s).unwrap();
        assert_eq!(spec, back);
    }
}
