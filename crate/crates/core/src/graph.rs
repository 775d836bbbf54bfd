//! Networks of stream maps joined by Hebbian links.
//!
//! A [`RelationGraph`] owns one [`SelfOrganizingMap`] per named stream and
//! one [`CrossLink`] per related pair. Training adapts the maps and the links
//! together; inference clamps the observed maps to their sensors and lets
//! activity flow across trained links until the free maps settle.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::decode::{decode, decode_population, DecodeResult};
use crate::error::{Error, Result};
use crate::hebbian::{CrossLink, Direction};
use crate::schedule::DecaySchedule;
use crate::som::{ActivityVector, SelfOrganizingMap, WARMUP_SAMPLES};
use crate::table::{Sample, StreamTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: String,
    /// Table columns forming the node's input vector. Empty means the single
    /// column named like the node.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub columns: Vec<String>,
    pub n_neurons: usize,
    /// Neighbourhood schedule; defaults to `N/2 -> 0.5` over a quarter of the alpha time constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<DecaySchedule>,
}

impl NodeSpec {
    pub fn scalar(name: &str, n_neurons: usize) -> Self {
        NodeSpec { name: name.into(), columns: vec![], n_neurons, sigma: None }
    }

    pub fn vector(name: &str, columns: &[&str], n_neurons: usize) -> Self {
        NodeSpec {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            n_neurons,
            sigma: None,
        }
    }

    pub fn input_columns(&self) -> Vec<String> {
        if self.columns.is_empty() {
            vec![self.name.clone()]
        } else {
            self.columns.clone()
        }
    }
}

/// An undirected relation between two nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub a: String,
    pub b: String,
}

impl LinkSpec {
    pub fn new(a: &str, b: &str) -> Self {
        LinkSpec { a: a.into(), b: b.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub nodes: Vec<NodeSpec>,
    pub edges: Vec<LinkSpec>,
}

impl GraphSpec {
    /// Scalar nodes of equal size joined by the given pairs.
    pub fn scalar(names: &[&str], n_neurons: usize, edges: &[(&str, &str)]) -> Self {
        GraphSpec {
            nodes: names.iter().map(|n| NodeSpec::scalar(n, n_neurons)).collect(),
            edges: edges.iter().map(|(a, b)| LinkSpec::new(a, b)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = BTreeSet::new();
        for n in &self.nodes {
            if n.name.is_empty() {
                return Err(Error::Configuration("empty node name".into()));
            }
            if !names.insert(n.name.as_str()) {
                return Err(Error::Configuration(format!("duplicate node `{}`", n.name)));
            }
            if n.n_neurons == 0 {
                return Err(Error::Configuration(format!("node `{}` has no neurons", n.name)));
            }
            if let Some(s) = &n.sigma {
                s.validate()?;
            }
        }
        if self.nodes.is_empty() {
            return Err(Error::Configuration("graph without nodes".into()));
        }
        let mut pairs = BTreeSet::new();
        for e in &self.edges {
            for end in [&e.a, &e.b] {
                if !names.contains(end.as_str()) {
                    return Err(Error::Configuration(format!("edge references unknown node `{end}`")));
                }
            }
            if e.a == e.b {
                return Err(Error::Configuration(format!("self-loop on `{}`", e.a)));
            }
            let key = if e.a < e.b { (&e.a, &e.b) } else { (&e.b, &e.a) };
            if !pairs.insert(key) {
                return Err(Error::Configuration(format!("duplicate edge {}-{}", e.a, e.b)));
            }
        }
        let index: BTreeMap<&str, usize> =
            self.nodes.iter().enumerate().map(|(i, n)| (n.name.as_str(), i)).collect();
        let adj = self
            .edges
            .iter()
            .map(|e| (index[e.a.as_str()], index[e.b.as_str()]))
            .collect::<Vec<_>>();
        let reach = reachable(self.nodes.len(), &adj, &[0]);
        if let Some(i) = reach.iter().position(|r| !r) {
            return Err(Error::Configuration(format!(
                "graph is not connected: `{}` cannot be reached from `{}`",
                self.nodes[i].name, self.nodes[0].name
            )));
        }
        Ok(())
    }
}

fn reachable(n: usize, edges: &[(usize, usize)], start: &[usize]) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = start.iter().copied().collect();
    for &s in start {
        seen[s] = true;
    }
    while let Some(u) = queue.pop_front() {
        for &(a, b) in edges {
            let v = if a == u {
                b
            } else if b == u {
                a
            } else {
                continue;
            };
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

/// Rates shared by every map and link of a graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedules {
    pub alpha: DecaySchedule,
    pub eta: DecaySchedule,
    pub beta: DecaySchedule,
}

impl Schedules {
    pub fn defaults(planned_steps: u64) -> Self {
        Schedules {
            alpha: DecaySchedule::default_alpha(planned_steps),
            eta: DecaySchedule::default_eta(planned_steps),
            beta: DecaySchedule::default_beta(planned_steps),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.alpha.validate()?;
        self.eta.validate()?;
        self.beta.validate()?;
        if self.alpha.initial > 1.0 || self.beta.initial > 1.0 {
            return Err(Error::Parameter("alpha and beta must not exceed 1".into()));
        }
        if self.alpha.floor <= 0.0 || self.eta.floor <= 0.0 || self.beta.floor <= 0.0 {
            return Err(Error::Parameter("schedule floors must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxParams {
    /// Weight of a node's own sensor against the lateral estimate when denoising.
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RelaxParams {
    fn default() -> Self {
        RelaxParams { lambda: 0.7, tol: 1e-4, max_iter: 50 }
    }
}

impl RelaxParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::Parameter(format!("relax lambda must lie in (0, 1], got {}", self.lambda)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Parameter(format!("relax tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Parameter("relax max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamNode {
    pub name: String,
    pub columns: Vec<String>,
    pub som: SelfOrganizingMap,
    pub sigma: DecaySchedule,
    pub last_activity: ActivityVector,
    /// Whether a sensor drove this node on the last training step.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationEdge {
    /// Row side of the link matrix.
    pub a: String,
    /// Column side of the link matrix.
    pub b: String,
    pub link: CrossLink,
}

/// One stage of pairwise training: the edge between `a` and `b`, trained for `steps` samples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub a: String,
    pub b: String,
    pub steps: u64,
}

impl Stage {
    pub fn new(a: &str, b: &str, steps: u64) -> Self {
        Stage { a: a.into(), b: b.into(), steps }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub values: BTreeMap<String, DecodeResult>,
    pub iterations: usize,
    pub converged: bool,
}

impl Inference {
    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.values.get(name).map(|r| r.scalar())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationGraph {
    nodes: Vec<StreamNode>,
    edges: Vec<RelationEdge>,
    schedules: Schedules,
    relax: RelaxParams,
    step_count: u64,
}

impl RelationGraph {
    /// Build an untrained graph, seeding every map from the first rows of `warmup`.
    pub fn new<R: Rng + ?Sized>(
        spec: &GraphSpec,
        schedules: Schedules,
        relax: RelaxParams,
        warmup: &StreamTable,
        rng: &mut R,
    ) -> Result<Self> {
        spec.validate()?;
        schedules.validate()?;
        relax.validate()?;
        if warmup.is_empty() {
            return Err(Error::Parameter("empty warm-up table".into()));
        }
        let head = warmup.slice(0..warmup.len().min(WARMUP_SAMPLES));
        let mut nodes = Vec::with_capacity(spec.nodes.len());
        for ns in &spec.nodes {
            let columns = ns.input_columns();
            let idx = column_indices(&head, &columns)?;
            let batch: Vec<Vec<f64>> =
                head.rows().iter().map(|r| idx.iter().map(|&k| r[k]).collect()).collect();
            let som = SelfOrganizingMap::from_warmup(ns.n_neurons, &batch, rng)?;
            let sigma =
                ns.sigma.unwrap_or(DecaySchedule::sigma_for(ns.n_neurons, schedules.alpha.tau / 4.0));
            nodes.push(StreamNode {
                name: ns.name.clone(),
                columns,
                som,
                sigma,
                last_activity: ActivityVector::zeros(ns.n_neurons),
                clamped: false,
            });
        }
        let size = |name: &str| nodes.iter().find(|n| n.name == name).map(|n| n.som.n_neurons()).unwrap();
        let edges = spec
            .edges
            .iter()
            .map(|e| RelationEdge {
                a: e.a.clone(),
                b: e.b.clone(),
                link: CrossLink::new(size(&e.a), size(&e.b)),
            })
            .collect();
        Ok(RelationGraph { nodes, edges, schedules, relax, step_count: 0 })
    }

    /// Assemble a graph from existing parts, checking that they fit together.
    pub fn from_parts(
        nodes: Vec<StreamNode>,
        edges: Vec<RelationEdge>,
        schedules: Schedules,
        relax: RelaxParams,
        step_count: u64,
    ) -> Result<Self> {
        let g = RelationGraph { nodes, edges, schedules, relax, step_count };
        g.validate()?;
        Ok(g)
    }

    /// Structural self-consistency: names, sizes and connectivity.
    pub fn validate(&self) -> Result<()> {
        self.spec().validate()?;
        self.schedules.validate()?;
        self.relax.validate()?;
        for n in &self.nodes {
            if n.columns.len() != n.som.input_dim() {
                return Err(Error::Structural(format!(
                    "node `{}` reads {} columns into a {}-D map",
                    n.name,
                    n.columns.len(),
                    n.som.input_dim()
                )));
            }
            if n.last_activity.len() != n.som.n_neurons() {
                return Err(Error::Structural(format!("node `{}` activity size mismatch", n.name)));
            }
        }
        for e in &self.edges {
            let (na, nb) = (self.node(&e.a)?.som.n_neurons(), self.node(&e.b)?.som.n_neurons());
            if e.link.n_p() != na || e.link.n_q() != nb {
                return Err(Error::Structural(format!(
                    "link {}-{} is {}x{}, maps have {} and {} neurons",
                    e.a,
                    e.b,
                    e.link.n_p(),
                    e.link.n_q(),
                    na,
                    nb
                )));
            }
        }
        Ok(())
    }

    /// The topology this graph was built from.
    pub fn spec(&self) -> GraphSpec {
        GraphSpec {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeSpec {
                    name: n.name.clone(),
                    columns: if n.columns.len() == 1 && n.columns[0] == n.name {
                        vec![]
                    } else {
                        n.columns.clone()
                    },
                    n_neurons: n.som.n_neurons(),
                    sigma: Some(n.sigma),
                })
                .collect(),
            edges: self.edges.iter().map(|e| LinkSpec::new(&e.a, &e.b)).collect(),
        }
    }

    pub fn nodes(&self) -> &[StreamNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[RelationEdge] {
        &self.edges
    }

    pub fn schedules(&self) -> &Schedules {
        &self.schedules
    }

    pub fn set_schedules(&mut self, schedules: Schedules) -> Result<()> {
        schedules.validate()?;
        self.schedules = schedules;
        Ok(())
    }

    pub fn relax(&self) -> &RelaxParams {
        &self.relax
    }

    pub fn set_relax(&mut self, relax: RelaxParams) -> Result<()> {
        relax.validate()?;
        self.relax = relax;
        Ok(())
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn node_names(&self) -> Vec<String> {
        self.nodes.iter().map(|n| n.name.clone()).collect()
    }

    fn node_index(&self, name: &str) -> Result<usize> {
        self.nodes
            .iter()
            .position(|n| n.name == name)
            .ok_or_else(|| Error::Configuration(format!("unknown node `{name}`")))
    }

    pub fn node(&self, name: &str) -> Result<&StreamNode> {
        Ok(&self.nodes[self.node_index(name)?])
    }

    fn edge_index(&self, a: &str, b: &str) -> Result<usize> {
        self.edges
            .iter()
            .position(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a))
            .ok_or_else(|| Error::Configuration(format!("no edge between `{a}` and `{b}`")))
    }

    pub fn edge(&self, a: &str, b: &str) -> Result<&RelationEdge> {
        Ok(&self.edges[self.edge_index(a, b)?])
    }

    /// The same graph with one edge removed. Fails if that disconnects it.
    pub fn without_edge(&self, a: &str, b: &str) -> Result<RelationGraph> {
        let k = self.edge_index(a, b)?;
        let mut g = self.clone();
        g.edges.remove(k);
        g.spec().validate()?;
        Ok(g)
    }

    /// Per-node input vectors for one table row.
    pub fn sample_from_row(&self, table: &StreamTable, row: usize) -> Result<Sample> {
        let r = table
            .rows()
            .get(row)
            .ok_or_else(|| Error::Parameter(format!("row {row} out of range")))?;
        let mut sample = Sample::new();
        for n in &self.nodes {
            let idx = column_indices(table, &n.columns)?;
            sample.insert(n.name.clone(), idx.iter().map(|&k| r[k]).collect());
        }
        Ok(sample)
    }

    /// One synchronized step over every node and edge. Returns the squared
    /// quantization error of each node.
    pub fn train_step(&mut self, samples: &Sample) -> Result<BTreeMap<String, f64>> {
        for n in &self.nodes {
            let s = samples
                .get(&n.name)
                .ok_or_else(|| Error::IncompleteFrame(format!("no sample for `{}`", n.name)))?;
            if s.len() != n.som.input_dim() {
                return Err(Error::Structural(format!(
                    "sample for `{}` has dimension {}, expected {}",
                    n.name,
                    s.len(),
                    n.som.input_dim()
                )));
            }
        }
        let active: Vec<bool> = vec![true; self.nodes.len()];
        let edges: Vec<usize> = (0..self.edges.len()).collect();
        let k = self.step_count;
        let errors = self.step_subset(samples, &active, &active, &edges, k)?;
        self.step_count += 1;
        Ok(errors)
    }

    /// Adapt the `adapting` maps, refresh the activity of the `sensed` ones and
    /// update the listed edges, all with the rates of step `k`.
    fn step_subset(
        &mut self,
        samples: &Sample,
        sensed: &[bool],
        adapting: &[bool],
        edges: &[usize],
        k: u64,
    ) -> Result<BTreeMap<String, f64>> {
        let alpha = self.schedules.alpha.value(k);
        let mut errors = BTreeMap::new();
        for (i, node) in self.nodes.iter_mut().enumerate() {
            node.clamped = sensed[i];
            if !sensed[i] {
                continue;
            }
            let s = &samples[&node.name];
            if adapting[i] {
                let out = node.som.adapt(s, alpha, node.sigma.value(k))?;
                errors.insert(node.name.clone(), out.sq_error);
            }
            node.last_activity = node.som.activate(s)?;
        }
        let (eta, beta) = (self.schedules.eta.value(k), self.schedules.beta.value(k));
        for &e in edges {
            let ia = self.node_index(&self.edges[e].a)?;
            let ib = self.node_index(&self.edges[e].b)?;
            let pa = self.nodes[ia].last_activity.normalized();
            let pb = self.nodes[ib].last_activity.normalized();
            self.edges[e].link.update_link(&pa, &pb, eta, beta)?;
        }
        Ok(errors)
    }

    /// Train on `steps` rows drawn uniformly from `table`. `progress` is
    /// called every 1000 steps (and after the last one) with the mean squared
    /// quantization error of each node over that window.
    pub fn train<R: Rng + ?Sized>(
        &mut self,
        table: &StreamTable,
        steps: u64,
        rng: &mut R,
        mut progress: impl FnMut(u64, &BTreeMap<String, f64>),
    ) -> Result<()> {
        if steps > 0 && table.is_empty() {
            return Err(Error::Parameter("cannot train on an empty table".into()));
        }
        let mut window = ErrorWindow::default();
        for s in 0..steps {
            let row = rng.random_range(0..table.len());
            let sample = self.sample_from_row(table, row)?;
            let errors = self.train_step(&sample)?;
            window.add(errors, s + 1 == steps, |w| progress(s + 1, w));
        }
        Ok(())
    }

    /// Train edge by edge. Each stage draws rows from `table`, adapts the two
    /// endpoint maps (unless they were trained before, by an earlier stage or
    /// an earlier call) and updates only the staged link, with rates
    /// restarting at step 0.
    pub fn train_pairwise<R: Rng + ?Sized>(
        &mut self,
        table: &StreamTable,
        stages: &[Stage],
        rng: &mut R,
    ) -> Result<()> {
        self.train_pairwise_with(table, stages, rng, |_, _, _| {})
    }

    /// [`train_pairwise`](Self::train_pairwise) reporting, like
    /// [`train`](Self::train), windowed quantization errors tagged with the
    /// stage index.
    pub fn train_pairwise_with<R: Rng + ?Sized>(
        &mut self,
        table: &StreamTable,
        stages: &[Stage],
        rng: &mut R,
        mut progress: impl FnMut(usize, u64, &BTreeMap<String, f64>),
    ) -> Result<()> {
        let staged: Vec<usize> =
            stages.iter().map(|s| self.edge_index(&s.a, &s.b)).collect::<Result<_>>()?;
        for n in &self.nodes {
            column_indices(table, &n.columns)?;
        }
        if stages.iter().any(|s| s.steps > 0) && table.is_empty() {
            return Err(Error::Parameter("cannot train on an empty table".into()));
        }
        // Maps that already learned their stream keep it; later stages only
        // add links on top of them.
        let mut frozen: Vec<bool> = self.nodes.iter().map(|n| n.som.step_count() > 0).collect();
        for (si, (stage, &e)) in stages.iter().zip(&staged).enumerate() {
            let ia = self.node_index(&self.edges[e].a)?;
            let ib = self.node_index(&self.edges[e].b)?;
            let mut sensed = vec![false; self.nodes.len()];
            sensed[ia] = true;
            sensed[ib] = true;
            let adapting: Vec<bool> = sensed.iter().zip(&frozen).map(|(s, f)| *s && !f).collect();
            let mut window = ErrorWindow::default();
            for k in 0..stage.steps {
                let row = rng.random_range(0..table.len());
                let sample = self.sample_from_row(table, row)?;
                let errors = self.step_subset(&sample, &sensed, &adapting, &[e], k)?;
                self.step_count += 1;
                window.add(errors, k + 1 == stage.steps, |w| progress(si, k + 1, w));
            }
            frozen[ia] = true;
            frozen[ib] = true;
        }
        Ok(())
    }

    fn check_observed(&self, observed: &Sample) -> Result<Vec<Option<ActivityVector>>> {
        let mut clamped = vec![None; self.nodes.len()];
        for (name, s) in observed {
            let i = self.node_index(name)?;
            clamped[i] = Some(self.nodes[i].som.activate(s)?);
        }
        Ok(clamped)
    }

    fn trained_edges(&self) -> Vec<(usize, usize, usize)> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.link.step_count() > 0)
            .map(|(k, e)| (k, self.node_index(&e.a).unwrap(), self.node_index(&e.b).unwrap()))
            .collect()
    }

    /// Lateral estimate for node `i`: the element-wise maximum of the activity
    /// arriving over every trained edge, scaled to a peak of 1.
    fn lateral(&self, i: usize, trained: &[(usize, usize, usize)], state: &[ActivityVector]) -> Result<ActivityVector> {
        let mut acc = ActivityVector::zeros(self.nodes[i].som.n_neurons());
        for &(k, a, b) in trained {
            let (src, dir) = if a == i {
                (b, Direction::Backward)
            } else if b == i {
                (a, Direction::Forward)
            } else {
                continue;
            };
            if state[src].max() <= 0.0 {
                continue;
            }
            let p = self.edges[k].link.propagate(&state[src], dir)?;
            for (x, y) in acc.0.iter_mut().zip(p.values()) {
                *x = x.max(*y);
            }
        }
        Ok(acc.normalized())
    }

    /// Infer the `query` streams from the `observed` ones.
    ///
    /// Observed maps are clamped to their sensor response; every other map
    /// repeatedly takes the lateral estimate of its neighbours until no
    /// activity moves by more than the relaxation tolerance.
    pub fn infer(&self, observed: &Sample, query: &[String]) -> Result<Inference> {
        if observed.is_empty() {
            return Err(Error::Parameter("nothing observed".into()));
        }
        let clamped = self.check_observed(observed)?;
        let mut targets = Vec::with_capacity(query.len());
        for q in query {
            if observed.contains_key(q) {
                return Err(Error::Configuration(format!("`{q}` is both observed and queried")));
            }
            targets.push(self.node_index(q)?);
        }
        if targets.is_empty() {
            return Ok(Inference { values: BTreeMap::new(), iterations: 0, converged: true });
        }
        let trained = self.trained_edges();
        if trained.is_empty() {
            return Err(Error::State("graph has no trained links".into()));
        }
        let pairs: Vec<(usize, usize)> = trained.iter().map(|&(_, a, b)| (a, b)).collect();
        let sources: Vec<usize> = (0..self.nodes.len()).filter(|&i| clamped[i].is_some()).collect();
        let reach = reachable(self.nodes.len(), &pairs, &sources);
        if let Some(&t) = targets.iter().find(|&&t| !reach[t]) {
            return Err(Error::Connectivity(format!(
                "`{}` cannot be reached from the observed streams over trained links",
                self.nodes[t].name
            )));
        }

        let mut state: Vec<ActivityVector> = self
            .nodes
            .iter()
            .zip(&clamped)
            .map(|(n, c)| match c {
                Some(a) => a.normalized(),
                None => ActivityVector::zeros(n.som.n_neurons()),
            })
            .collect();
        let (iterations, converged) = self.relax_loop(&mut state, &trained, |i, lateral| {
            if clamped[i].is_some() {
                None
            } else {
                Some(lateral)
            }
        })?;
        let mut values = BTreeMap::new();
        for &t in &targets {
            values.insert(self.nodes[t].name.clone(), decode(&self.nodes[t].som, &state[t])?);
        }
        Ok(Inference { values, iterations, converged })
    }

    /// Clean up a full set of readings by blending each map's sensor response
    /// with the lateral estimate of its neighbours, relaxing to a fixed point
    /// and reading every map out as a population mean.
    pub fn denoise(&self, observed: &Sample) -> Result<Inference> {
        for n in &self.nodes {
            if !observed.contains_key(&n.name) {
                return Err(Error::IncompleteFrame(format!("denoising needs `{}`", n.name)));
            }
        }
        let bottom_up: Vec<ActivityVector> =
            self.check_observed(observed)?.into_iter().map(|a| a.unwrap()).collect();
        let trained = self.trained_edges();
        if trained.is_empty() {
            return Err(Error::State("graph has no trained links".into()));
        }
        let lambda = self.relax.lambda;
        if lambda >= 1.0 {
            // Nothing to blend: each map reads out its own sensor.
            let mut values = BTreeMap::new();
            for (n, s) in self.nodes.iter().zip(&bottom_up) {
                values.insert(n.name.clone(), decode(&n.som, s)?);
            }
            return Ok(Inference { values, iterations: 0, converged: true });
        }
        // Work in units of each sensor's own peak. A reading far outside the
        // learned range elicits no response at all; the lateral estimate then
        // stands alone.
        let own: Vec<ActivityVector> = bottom_up.iter().map(|a| a.normalized()).collect();
        let mut state = own.clone();
        let (iterations, converged) = self.relax_loop(&mut state, &trained, |i, lateral| {
            Some(ActivityVector(
                own[i]
                    .values()
                    .iter()
                    .zip(lateral.values())
                    .map(|(o, l)| lambda * o + (1.0 - lambda) * l)
                    .collect(),
            ))
        })?;
        // The blend can hold two bumps (sensor and neighbours); the population
        // mean weighs both instead of picking one.
        let mut values = BTreeMap::new();
        for (n, s) in self.nodes.iter().zip(&state) {
            values.insert(n.name.clone(), decode_population(&n.som, s)?);
        }
        Ok(Inference { values, iterations, converged })
    }

    /// Synchronous relaxation. `update` maps a node and its lateral estimate
    /// to the node's next activity, or `None` to keep it fixed.
    fn relax_loop(
        &self,
        state: &mut [ActivityVector],
        trained: &[(usize, usize, usize)],
        update: impl Fn(usize, ActivityVector) -> Option<ActivityVector>,
    ) -> Result<(usize, bool)> {
        for iter in 1..=self.relax.max_iter {
            let mut next = Vec::with_capacity(state.len());
            for i in 0..state.len() {
                next.push(update(i, self.lateral(i, trained, state)?));
            }
            let mut change: f64 = 0.0;
            for (s, n) in state.iter_mut().zip(next) {
                if let Some(n) = n {
                    for (x, y) in s.values().iter().zip(n.values()) {
                        change = change.max((x - y).abs());
                    }
                    *s = n;
                }
            }
            if change < self.relax.tol {
                return Ok((iter, true));
            }
        }
        Ok((self.relax.max_iter, false))
    }
}

/// Running mean of per-node errors, flushed every 1000 steps.
#[derive(Default)]
struct ErrorWindow {
    sums: BTreeMap<String, f64>,
    count: u64,
}

impl ErrorWindow {
    fn add(&mut self, errors: BTreeMap<String, f64>, last: bool, flush: impl FnOnce(&BTreeMap<String, f64>)) {
        for (name, e) in errors {
            *self.sums.entry(name).or_insert(0.0) += e;
        }
        self.count += 1;
        if self.count == 1000 || last {
            let n = self.count as f64;
            self.sums.values_mut().for_each(|v| *v /= n);
            flush(&self.sums);
            self.sums.clear();
            self.count = 0;
        }
    }
}

fn column_indices(table: &StreamTable, columns: &[String]) -> Result<Vec<usize>> {
    columns
        .iter()
        .map(|c| {
            table
                .column_index(c)
                .ok_or_else(|| Error::Configuration(format!("no stream named `{c}` in the data")))
        })
        .collect()
}
