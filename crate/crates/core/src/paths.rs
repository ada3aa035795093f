//! Time-respecting paths.
//!
//! A time-respecting path from s to t is a sequence of (edge, time) steps that
//! chains from s to t, uses times from each edge's availability set, has
//! strictly increasing times and never repeats an edge. Paths stop at the
//! first arrival at t; other vertices may be revisited unless
//! [`EnumerateOptions::simple_vertices`] is set. Neither choice changes the
//! modulus, since a path containing a detour is dominated by the path without it.
//!
//! [`min_length_trp`] is the separation oracle of the modulus solver. It sweeps
//! the contacts in time order and keeps, per vertex, the labels that can still
//! lead to an optimal path:
//!
//! * multiplicative per-edge: step cost φ(t)ρ(e), one best label per vertex;
//! * per-object modes: labels carry Σρ only, the time penalty is applied at the
//!   target as φ(t_last)·Σρ or Σρ / (1 − φ(t_last)), which is monotone in both;
//! * additive per-edge: Pareto labels over (Σρ, Σφ) so that paths whose total
//!   penalty reaches one can be discarded without losing the optimum.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::penalty::{raw_length, PenaltyConfig, PenaltyMode, ADDITIVE_SINGULARITY};
use crate::tempgraph::{EdgeId, TemporalGraph, VertexId};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub edge: EdgeId,
    pub time: f64,
    /// Traversed tail → head. Always true on directed graphs.
    pub forward: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemporalPath {
    pub source: VertexId,
    pub target: VertexId,
    pub steps: Vec<Step>,
}

impl TemporalPath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The projected edge set γ̌, in traversal order.
    pub fn edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.steps.iter().map(|s| s.edge)
    }

    pub fn last_time(&self) -> Option<f64> {
        self.steps.last().map(|s| s.time)
    }

    /// Vertex sequence, starting at the source.
    pub fn vertices(&self, g: &TemporalGraph) -> Vec<VertexId> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        out.push(self.source);
        for s in &self.steps {
            let e = g.edge(s.edge);
            out.push(if s.forward { e.head } else { e.tail });
        }
        out
    }

    /// Hashable identity of the step sequence.
    pub fn key(&self) -> Vec<(usize, u64, bool)> {
        self.steps.iter().map(|s| (s.edge.0, s.time.to_bits(), s.forward)).collect()
    }

    /// Checks chaining, availability, strictly increasing times and edge uniqueness.
    pub fn validate(&self, g: &TemporalGraph) -> std::result::Result<(), String> {
        if self.steps.is_empty() {
            return Err("path has no steps".into());
        }
        let mut at = self.source;
        let mut last = f64::NEG_INFINITY;
        let mut seen = std::collections::HashSet::new();
        for (i, s) in self.steps.iter().enumerate() {
            let e = g.edge(s.edge);
            let (from, to) = if s.forward { (e.tail, e.head) } else { (e.head, e.tail) };
            if !s.forward && g.directed() {
                return Err(format!("step {i} traverses a directed edge backwards"));
            }
            if from != at {
                return Err(format!("step {i} does not chain"));
            }
            if !(s.time > last) {
                return Err(format!("step {i} does not increase time"));
            }
            if e.times.binary_search_by(|x| x.total_cmp(&s.time)).is_err() {
                return Err(format!("step {i} uses an unavailable time"));
            }
            if !seen.insert(s.edge) {
                return Err(format!("step {i} repeats edge {}", s.edge.0));
            }
            at = to;
            last = s.time;
        }
        if at != self.target {
            return Err("path does not end at its target".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct Arc {
    from: VertexId,
    to: VertexId,
    edge: EdgeId,
    time: f64,
    forward: bool,
}

/// Contacts of a graph as directed arcs, grouped by time.
pub struct EventIndex<'g> {
    graph: &'g TemporalGraph,
    /// Sorted by (time, edge, direction).
    arcs: Vec<Arc>,
    /// Ranges of `arcs` sharing one time.
    groups: Vec<(usize, usize)>,
}

impl<'g> EventIndex<'g> {
    pub fn new(g: &'g TemporalGraph) -> Self {
        let mut arcs = Vec::with_capacity(2 * g.contact_count());
        for e in g.edges() {
            for &time in &e.times {
                arcs.push(Arc { from: e.tail, to: e.head, edge: e.id, time, forward: true });
                if !g.directed() && e.tail != e.head {
                    arcs.push(Arc { from: e.head, to: e.tail, edge: e.id, time, forward: false });
                }
            }
        }
        arcs.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.edge.cmp(&b.edge)).then(b.forward.cmp(&a.forward)));
        let mut groups = Vec::new();
        let mut start = 0;
        for i in 1..=arcs.len() {
            if i == arcs.len() || arcs[i].time != arcs[start].time {
                groups.push((start, i));
                start = i;
            }
        }
        EventIndex { graph: g, arcs, groups }
    }

    pub fn graph(&self) -> &'g TemporalGraph {
        self.graph
    }
}

#[derive(Clone, Debug)]
pub struct EnumerateOptions {
    pub max_hops: Option<usize>,
    pub max_count: usize,
    /// Forbid revisiting any vertex.
    pub simple_vertices: bool,
}

impl Default for EnumerateOptions {
    fn default() -> Self {
        EnumerateOptions { max_hops: None, max_count: 10_000, simple_vertices: false }
    }
}

#[derive(Clone, Debug)]
pub struct Enumeration {
    pub paths: Vec<TemporalPath>,
    /// More than `max_count` paths exist; `paths` holds the first `max_count`.
    pub truncated: bool,
}

/// Every time-respecting s→t path, in lexicographic order of the
/// (edge id, time) sequence.
pub fn enumerate_trp(g: &TemporalGraph, s: VertexId, t: VertexId, opts: &EnumerateOptions) -> Enumeration {
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); g.vertex_count()];
    let mut arcs = Vec::new();
    for e in g.edges() {
        for &time in &e.times {
            arcs.push(Arc { from: e.tail, to: e.head, edge: e.id, time, forward: true });
            if !g.directed() && e.tail != e.head {
                arcs.push(Arc { from: e.head, to: e.tail, edge: e.id, time, forward: false });
            }
        }
    }
    arcs.sort_by(|a, b| a.edge.cmp(&b.edge).then(a.time.total_cmp(&b.time)).then(b.forward.cmp(&a.forward)));
    for (i, a) in arcs.iter().enumerate() {
        out[a.from.0].push(i);
    }

    struct Dfs<'a> {
        arcs: &'a [Arc],
        out: &'a [Vec<usize>],
        target: VertexId,
        source: VertexId,
        opts: &'a EnumerateOptions,
        used_edge: Vec<bool>,
        visited: Vec<bool>,
        stack: Vec<Step>,
        found: Vec<TemporalPath>,
        truncated: bool,
    }

    impl Dfs<'_> {
        fn visit(&mut self, at: VertexId, last: f64) {
            if self.truncated {
                return;
            }
            if self.opts.max_hops.is_some_and(|h| self.stack.len() >= h) {
                return;
            }
            for &i in &self.out[at.0] {
                let a = self.arcs[i];
                if a.time <= last || self.used_edge[a.edge.0] {
                    continue;
                }
                if self.opts.simple_vertices && self.visited[a.to.0] {
                    continue;
                }
                self.stack.push(Step { edge: a.edge, time: a.time, forward: a.forward });
                if a.to == self.target {
                    if self.found.len() == self.opts.max_count {
                        self.truncated = true;
                        return;
                    }
                    self.found.push(TemporalPath {
                        source: self.source,
                        target: self.target,
                        steps: self.stack.clone(),
                    });
                } else {
                    self.used_edge[a.edge.0] = true;
                    let was = std::mem::replace(&mut self.visited[a.to.0], true);
                    self.visit(a.to, a.time);
                    self.visited[a.to.0] = was;
                    self.used_edge[a.edge.0] = false;
                }
                self.stack.pop();
                if self.truncated {
                    return;
                }
            }
        }
    }

    if s == t {
        return Enumeration { paths: Vec::new(), truncated: false };
    }
    let mut dfs = Dfs {
        arcs: &arcs,
        out: &out,
        target: t,
        source: s,
        opts,
        used_edge: vec![false; g.edge_count()],
        visited: vec![false; g.vertex_count()],
        stack: Vec::new(),
        found: Vec::new(),
        truncated: false,
    };
    dfs.visited[s.0] = true;
    dfs.visit(s, f64::NEG_INFINITY);
    Enumeration { paths: dfs.found, truncated: dfs.truncated }
}

/// Every vertex-simple s→t path of the aggregated graph, times ignored.
/// Steps carry time 0.
pub fn enumerate_static_paths(g: &TemporalGraph, s: VertexId, t: VertexId, max_count: usize) -> Enumeration {
    let mut out: Vec<Vec<(EdgeId, VertexId, bool)>> = vec![Vec::new(); g.vertex_count()];
    for e in g.edges() {
        out[e.tail.0].push((e.id, e.head, true));
        if !g.directed() && e.tail != e.head {
            out[e.head.0].push((e.id, e.tail, false));
        }
    }
    fn visit(
        at: VertexId,
        t: VertexId,
        out: &[Vec<(EdgeId, VertexId, bool)>],
        visited: &mut [bool],
        stack: &mut Vec<Step>,
        found: &mut Vec<Vec<Step>>,
        max_count: usize,
    ) -> bool {
        for &(edge, to, forward) in &out[at.0] {
            if visited[to.0] {
                continue;
            }
            stack.push(Step { edge, time: 0.0, forward });
            if to == t {
                if found.len() == max_count {
                    return false;
                }
                found.push(stack.clone());
            } else {
                visited[to.0] = true;
                let ok = visit(to, t, out, visited, stack, found, max_count);
                visited[to.0] = false;
                if !ok {
                    return false;
                }
            }
            stack.pop();
        }
        true
    }
    if s == t {
        return Enumeration { paths: Vec::new(), truncated: false };
    }
    let mut visited = vec![false; g.vertex_count()];
    visited[s.0] = true;
    let mut found = Vec::new();
    let complete = visit(s, t, &out, &mut visited, &mut Vec::new(), &mut found, max_count);
    Enumeration {
        paths: found.into_iter().map(|steps| TemporalPath { source: s, target: t, steps }).collect(),
        truncated: !complete,
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SearchOptions {
    /// Prune dominated labels. Disabling keeps every label (exponential; tests only).
    pub dominance: bool,
    /// Only consider paths with at most this many steps.
    pub max_hops: Option<usize>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { dominance: true, max_hops: None }
    }
}

#[derive(Clone, Debug)]
pub struct ShortestPath {
    pub path: TemporalPath,
    /// ℓ_ρ(γ) = (Nρ)(γ), except for additive per-edge penalization where it is
    /// the raw length Σρ + Σφ.
    pub length: f64,
}

#[derive(Clone, Copy, Debug)]
struct Label {
    time: f64,
    cost: f64,
    penalty: f64,
    hops: u32,
    /// Index of the predecessor label; `None` for the start at the source.
    pred: Option<usize>,
    arc: usize,
}

/// Minimum ρ-length time-respecting path from `s` to `t`.
///
/// Ties are broken by fewer hops, then earlier arrival, then contact order.
pub fn min_length_trp(
    g: &TemporalGraph,
    s: VertexId,
    t: VertexId,
    rho: &[f64],
    cfg: &PenaltyConfig,
) -> Result<ShortestPath> {
    min_length_trp_indexed(&EventIndex::new(g), s, t, rho, cfg, SearchOptions::default())
}

pub fn min_length_trp_indexed(
    index: &EventIndex<'_>,
    s: VertexId,
    t: VertexId,
    rho: &[f64],
    cfg: &PenaltyConfig,
    opts: SearchOptions,
) -> Result<ShortestPath> {
    let g = index.graph;
    if s == t {
        return Err(Error::NoPath);
    }
    let mode = cfg.mode();
    let phi = cfg.phi();
    let pareto = mode == PenaltyMode::AddPerEdge;
    let hop_cap = opts.max_hops.map_or(u32::MAX, |h| h.min(u32::MAX as usize) as u32);
    let capped = opts.max_hops.is_some();

    let mut labels: Vec<Label> = Vec::new();
    let mut at: Vec<Vec<usize>> = vec![Vec::new(); g.vertex_count()];
    let start = Label { time: f64::NEG_INFINITY, cost: 0.0, penalty: 0.0, hops: 0, pred: None, arc: usize::MAX };
    let mut best: Option<(f64, u32, f64, usize)> = None;
    let mut fresh: Vec<(usize, Label)> = Vec::new();

    for &(lo, hi) in &index.groups {
        fresh.clear();
        for ai in lo..hi {
            let a = index.arcs[ai];
            if a.from == t {
                continue;
            }
            let phi_t = phi.eval(a.time);
            if mode == PenaltyMode::AddPerObject && 1.0 - phi_t < ADDITIVE_SINGULARITY {
                continue;
            }
            let step_cost = match mode {
                PenaltyMode::MulPerEdge => phi_t * rho[a.edge.0],
                _ => rho[a.edge.0],
            };
            let step_penalty = if pareto { phi_t } else { 0.0 };
            let mut extend = |prev: &Label, pred: Option<usize>| {
                if prev.hops >= hop_cap {
                    return;
                }
                let penalty = prev.penalty + step_penalty;
                if pareto && 1.0 - penalty < ADDITIVE_SINGULARITY {
                    return;
                }
                fresh.push((
                    a.to.0,
                    Label { time: a.time, cost: prev.cost + step_cost, penalty, hops: prev.hops + 1, pred, arc: ai },
                ));
            };
            if a.from == s {
                extend(&start, None);
            }
            for &li in &at[a.from.0] {
                extend(&labels[li], Some(li));
            }
        }

        for &(v, label) in &fresh {
            let li = labels.len();
            labels.push(label);
            if v == t.0 {
                let objective = match mode {
                    PenaltyMode::MulPerEdge => label.cost,
                    PenaltyMode::AddPerEdge => label.cost + label.penalty,
                    PenaltyMode::MulPerObject => phi.eval(label.time) * label.cost,
                    PenaltyMode::AddPerObject => label.cost / (1.0 - phi.eval(label.time)),
                };
                let better = match best {
                    None => true,
                    Some((o, h, time, _)) => {
                        (objective, label.hops, label.time).partial_cmp(&(o, h, time)) == Some(Ordering::Less)
                    }
                };
                if better {
                    best = Some((objective, label.hops, label.time, li));
                }
                continue;
            }
            if v == s.0 && opts.dominance {
                // the start label dominates everything arriving back at s
                continue;
            }
            if !opts.dominance {
                at[v].push(li);
            } else if pareto || capped {
                // with a hop cap, fewer hops is worth keeping even at a higher cost
                let dominates = |x: &Label, y: &Label| {
                    x.cost <= y.cost
                        && x.penalty <= y.penalty
                        && (!capped || x.hops <= y.hops)
                        && (x.cost < y.cost || x.penalty < y.penalty || x.hops <= y.hops)
                };
                if at[v].iter().any(|&o| dominates(&labels[o], &label)) {
                    continue;
                }
                at[v].retain(|&o| !dominates(&label, &labels[o]));
                at[v].push(li);
            } else {
                match at[v].first() {
                    Some(&o) if (labels[o].cost, labels[o].hops) <= (label.cost, label.hops) => {}
                    _ => {
                        at[v].clear();
                        at[v].push(li);
                    }
                }
            }
        }
    }

    let Some((_, _, _, li)) = best else {
        return Err(Error::NoPath);
    };
    let mut steps = Vec::new();
    let mut cur = Some(li);
    while let Some(i) = cur {
        let a = index.arcs[labels[i].arc];
        steps.push(Step { edge: a.edge, time: a.time, forward: a.forward });
        cur = labels[i].pred;
    }
    steps.reverse();
    let path = TemporalPath { source: s, target: t, steps: remove_repeated_edges(steps) };
    let length = raw_length(&path, rho, cfg)?;
    Ok(ShortestPath { path, length })
}

/// Cuts the detour between two uses of one edge. With nonnegative costs and a
/// nondecreasing penalty the result is never longer.
fn remove_repeated_edges(mut steps: Vec<Step>) -> Vec<Step> {
    'outer: loop {
        for j in 1..steps.len() {
            if let Some(i) = steps[..j].iter().position(|s| s.edge == steps[j].edge) {
                if steps[i].forward == steps[j].forward {
                    // same arrival vertex: keep the earlier traversal
                    steps.drain(i + 1..=j);
                } else {
                    // back at the departure vertex of step i
                    steps.drain(i..=j);
                }
                continue 'outer;
            }
        }
        return steps;
    }
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem {
    cost: f64,
    hops: u32,
    vertex: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then(other.hops.cmp(&self.hops)).then(other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimum Σρ path in the aggregated graph (Dijkstra, times ignored).
/// Steps carry time 0.
pub fn min_length_static(g: &TemporalGraph, s: VertexId, t: VertexId, rho: &[f64]) -> Result<ShortestPath> {
    if s == t {
        return Err(Error::NoPath);
    }
    let n = g.vertex_count();
    let mut out: Vec<Vec<(EdgeId, VertexId, bool)>> = vec![Vec::new(); n];
    for e in g.edges() {
        out[e.tail.0].push((e.id, e.head, true));
        if !g.directed() && e.tail != e.head {
            out[e.head.0].push((e.id, e.tail, false));
        }
    }
    let mut dist = vec![(f64::INFINITY, u32::MAX); n];
    let mut pred: Vec<Option<(usize, Step)>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[s.0] = (0.0, 0);
    heap.push(HeapItem { cost: 0.0, hops: 0, vertex: s.0 });
    while let Some(HeapItem { cost, hops, vertex }) = heap.pop() {
        if done[vertex] {
            continue;
        }
        done[vertex] = true;
        if vertex == t.0 {
            break;
        }
        for &(edge, to, forward) in &out[vertex] {
            let cand = (cost + rho[edge.0], hops + 1);
            if !done[to.0] && cand.partial_cmp(&dist[to.0]) == Some(Ordering::Less) {
                dist[to.0] = cand;
                pred[to.0] = Some((vertex, Step { edge, time: 0.0, forward }));
                heap.push(HeapItem { cost: cand.0, hops: cand.1, vertex: to.0 });
            }
        }
    }
    if !done[t.0] {
        return Err(Error::NoPath);
    }
    let mut steps = Vec::new();
    let mut cur = t.0;
    while let Some((prev, step)) = pred[cur] {
        steps.push(step);
        cur = prev;
    }
    steps.reverse();
    let length = steps.iter().map(|st| rho[st.edge.0]).sum();
    Ok(ShortestPath { path: TemporalPath { source: s, target: t, steps }, length })
}
