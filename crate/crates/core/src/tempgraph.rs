//! Contact-sequence temporal multigraphs.
//!
//! Each edge carries a positive weight σ(e) and a finite, strictly sorted set
//! of positive availability times T(e). Parallel edges are allowed; in the
//! text format they are told apart by an optional edge key.
//!
//! Text format, one contact per line, `#` starts a comment:
//!
//! ```text
//! <u> <v> <t> [<sigma> [<key>]]
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub usize);

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeRecord {
    pub id: EdgeId,
    pub tail: VertexId,
    pub head: VertexId,
    /// σ(e), strictly positive.
    pub weight: f64,
    /// T(e): nonempty, strictly increasing, all positive.
    pub times: Vec<f64>,
    /// Distinguishes parallel edges between the same endpoints. Empty by default.
    pub key: String,
}

impl EdgeRecord {
    /// Endpoint reached when leaving `from` along this edge, if `from` is an endpoint.
    pub fn other(&self, from: VertexId) -> Option<VertexId> {
        if from == self.tail {
            Some(self.head)
        } else if from == self.head {
            Some(self.tail)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemporalGraph {
    directed: bool,
    labels: Vec<String>,
    index: HashMap<String, VertexId>,
    edges: Vec<EdgeRecord>,
    /// Stored times are `raw - time_offset`.
    time_offset: f64,
}

impl TemporalGraph {
    pub fn directed(&self) -> bool {
        self.directed
    }

    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn edges(&self) -> &[EdgeRecord] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &EdgeRecord {
        &self.edges[id.0]
    }

    pub fn label(&self, v: VertexId) -> &str {
        &self.labels[v.0]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn vertex(&self, label: &str) -> Option<VertexId> {
        self.index.get(label).copied()
    }

    pub fn vertex_or_err(&self, label: &str) -> Result<VertexId> {
        self.vertex(label).ok_or_else(|| Error::UnknownVertex(label.to_string()))
    }

    pub fn time_offset(&self) -> f64 {
        self.time_offset
    }

    /// Converts a stored time back to the timestamp found in the input.
    pub fn raw_time(&self, t: f64) -> f64 {
        t + self.time_offset
    }

    /// Edge weights indexed by edge id.
    pub fn weights(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.weight).collect()
    }

    /// M = max over edges of max T(e); zero for an edgeless graph.
    pub fn max_time(&self) -> f64 {
        self.edges.iter().filter_map(|e| e.times.last().copied()).fold(0.0, f64::max)
    }

    /// Number of (edge, time) pairs.
    pub fn contact_count(&self) -> usize {
        self.edges.iter().map(|e| e.times.len()).sum()
    }

    /// Earliest stored time on an edge that can be traversed away from `v`.
    pub fn earliest_departure(&self, v: VertexId) -> Option<f64> {
        self.edges
            .iter()
            .filter(|e| e.tail == v || (!self.directed && e.head == v))
            .filter_map(|e| e.times.first().copied())
            .reduce(f64::min)
    }

    /// Same graph with every weight replaced.
    pub fn with_weights(&self, weights: &[f64]) -> Result<TemporalGraph> {
        if weights.len() != self.edges.len() {
            return Err(Error::Validation(format!("expected {} weights, got {}", self.edges.len(), weights.len())));
        }
        let mut g = self.clone();
        for (e, &w) in g.edges.iter_mut().zip(weights) {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Validation(format!("edge {} has non-positive weight {w}", e.id.0)));
            }
            e.weight = w;
        }
        Ok(g)
    }

    /// Canonical text form: one line per contact, sorted by (u, v, key, t).
    /// Timestamps are written as they appeared in the input.
    pub fn serialize(&self) -> String {
        let mut lines: Vec<(&str, &str, &str, f64, f64)> = Vec::with_capacity(self.contact_count());
        for e in &self.edges {
            for &t in &e.times {
                lines.push((self.label(e.tail), self.label(e.head), &e.key, self.raw_time(t), e.weight));
            }
        }
        lines.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)).then(a.3.total_cmp(&b.3)));
        let mut out = String::new();
        for (u, v, key, t, w) in lines {
            let _ = write!(out, "{u} {v} {t}");
            if !key.is_empty() {
                let _ = write!(out, " {w} {key}");
            } else if w != 1.0 {
                let _ = write!(out, " {w}");
            }
            out.push('\n');
        }
        out
    }
}

/// Incremental construction of a [`TemporalGraph`]; validation happens in [`GraphBuilder::build`].
#[derive(Clone, Debug, Default)]
pub struct GraphBuilder {
    directed: bool,
    labels: Vec<String>,
    index: HashMap<String, VertexId>,
    edges: Vec<(VertexId, VertexId, f64, Vec<f64>, String)>,
    time_offset: f64,
}

impl GraphBuilder {
    pub fn new(directed: bool) -> Self {
        GraphBuilder { directed, ..Default::default() }
    }

    pub fn vertex(&mut self, label: &str) -> VertexId {
        if let Some(&v) = self.index.get(label) {
            return v;
        }
        let v = VertexId(self.labels.len());
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), v);
        v
    }

    pub fn edge(&mut self, tail: &str, head: &str, weight: f64, times: &[f64]) -> EdgeId {
        self.keyed_edge(tail, head, weight, times, "")
    }

    pub fn keyed_edge(&mut self, tail: &str, head: &str, weight: f64, times: &[f64], key: &str) -> EdgeId {
        let t = self.vertex(tail);
        let h = self.vertex(head);
        self.edges.push((t, h, weight, times.to_vec(), key.to_string()));
        EdgeId(self.edges.len() - 1)
    }

    fn time_offset(&mut self, offset: f64) -> &mut Self {
        self.time_offset = offset;
        self
    }

    pub fn build(self) -> Result<TemporalGraph> {
        let mut edges = Vec::with_capacity(self.edges.len());
        for (i, (tail, head, weight, mut times, key)) in self.edges.into_iter().enumerate() {
            if !(weight > 0.0 && weight.is_finite()) {
                return Err(Error::Validation(format!("edge {i} has non-positive weight {weight}")));
            }
            if times.is_empty() {
                return Err(Error::Validation(format!("edge {i} has no availability times")));
            }
            if let Some(&bad) = times.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
                return Err(Error::Validation(format!("edge {i} has non-positive time {bad}")));
            }
            times.sort_by(f64::total_cmp);
            times.dedup();
            edges.push(EdgeRecord { id: EdgeId(i), tail, head, weight, times, key });
        }
        Ok(TemporalGraph {
            directed: self.directed,
            labels: self.labels,
            index: self.index,
            edges,
            time_offset: self.time_offset,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseOptions {
    pub directed: bool,
    /// Store `t - t_min + 1` instead of requiring strictly positive timestamps.
    pub shift_times: bool,
    pub drop_self_loops: bool,
}

impl ParseOptions {
    pub fn new(directed: bool) -> Self {
        ParseOptions { directed, shift_times: false, drop_self_loops: true }
    }
}

struct PendingEdge {
    weight: Option<f64>,
    times: Vec<f64>,
    first_line: usize,
}

/// Parses the contact-sequence text format into a temporal graph.
///
/// Contacts of the same (u, v, key) are aggregated into one edge; duplicate
/// contacts collapse. For undirected graphs (u, v) and (v, u) name the same
/// edge. Vertices and edges are numbered in sorted label order, so the result
/// does not depend on line order.
pub fn parse_contact_sequence(text: &str, opts: &ParseOptions) -> Result<TemporalGraph> {
    let mut pending: BTreeMap<(String, String, String), PendingEdge> = BTreeMap::new();
    let mut labels: BTreeSet<String> = BTreeSet::new();
    let mut t_min = f64::INFINITY;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if !(3..=5).contains(&tokens.len()) {
            return Err(Error::Parse {
                line,
                msg: format!("expected `u v t [sigma [key]]`, found {} tokens", tokens.len()),
            });
        }
        let t: f64 = tokens[2]
            .parse()
            .ok()
            .filter(|t: &f64| t.is_finite())
            .ok_or_else(|| Error::Parse { line, msg: format!("bad timestamp `{}`", tokens[2]) })?;
        let weight = match tokens.get(3) {
            Some(tok) => Some(
                tok.parse::<f64>()
                    .ok()
                    .filter(|w| w.is_finite() && *w > 0.0)
                    .ok_or_else(|| Error::Parse { line, msg: format!("bad weight `{tok}`") })?,
            ),
            None => None,
        };
        let key = tokens.get(4).copied().unwrap_or("").to_string();
        let (mut u, mut v) = (tokens[0].to_string(), tokens[1].to_string());
        if u == v && opts.drop_self_loops {
            continue;
        }
        if !opts.shift_times && t <= 0.0 {
            return Err(Error::Validation(format!("line {line}: timestamp {t} is not positive")));
        }
        if !opts.directed && v < u {
            std::mem::swap(&mut u, &mut v);
        }
        labels.insert(u.clone());
        labels.insert(v.clone());
        t_min = t_min.min(t);
        let entry =
            pending.entry((u, v, key)).or_insert(PendingEdge { weight: None, times: Vec::new(), first_line: line });
        match (entry.weight, weight) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Parse {
                    line,
                    msg: format!("weight {b} conflicts with weight {a} given on line {}", entry.first_line),
                })
            }
            (None, Some(b)) => entry.weight = Some(b),
            _ => {}
        }
        entry.times.push(t);
    }

    let offset = if opts.shift_times && t_min.is_finite() { t_min - 1.0 } else { 0.0 };
    let mut builder = GraphBuilder::new(opts.directed);
    for label in &labels {
        builder.vertex(label);
    }
    for ((u, v, key), edge) in pending {
        let times: Vec<f64> = edge.times.iter().map(|t| t - offset).collect();
        builder.keyed_edge(&u, &v, edge.weight.unwrap_or(1.0), &times, &key);
    }
    builder.time_offset(offset);
    builder.build()
}

/// Induced subgraph on the largest component of the undirected skeleton.
/// Ties go to the component containing the smallest vertex id.
pub fn largest_weakly_connected_component(g: &TemporalGraph) -> TemporalGraph {
    let n = g.vertex_count();
    if n == 0 {
        return g.clone();
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for e in g.edges() {
        let a = find(&mut parent, e.tail.0);
        let b = find(&mut parent, e.head.0);
        if a != b {
            // smaller root wins so the root is the component minimum
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            parent[hi] = lo;
        }
    }
    let mut size = vec![0usize; n];
    let roots: Vec<usize> = (0..n).map(|v| find(&mut parent, v)).collect();
    for &r in &roots {
        size[r] += 1;
    }
    // roots are component minima; scanning upward keeps the first maximum
    let mut best = 0;
    for r in 0..n {
        if size[r] > size[best] {
            best = r;
        }
    }
    if size[best] == n {
        return g.clone();
    }

    let mut builder = GraphBuilder::new(g.directed());
    for v in 0..n {
        if roots[v] == best {
            builder.vertex(g.label(VertexId(v)));
        }
    }
    for e in g.edges() {
        if roots[e.tail.0] == best {
            builder.keyed_edge(g.label(e.tail), g.label(e.head), e.weight, &e.times, &e.key);
        }
    }
    builder.time_offset(g.time_offset());
    builder.build().expect("subgraph of a valid graph is valid")
}

#[derive(Clone, Debug, PartialEq)]
pub struct StaticEdge {
    pub id: EdgeId,
    pub tail: VertexId,
    pub head: VertexId,
    pub weight: f64,
    pub key: String,
}

/// The aggregated graph: same vertices, edge ids and weights, no times.
#[derive(Clone, Debug, PartialEq)]
pub struct StaticGraph {
    pub directed: bool,
    pub labels: Vec<String>,
    pub edges: Vec<StaticEdge>,
}

pub fn aggregate(g: &TemporalGraph) -> StaticGraph {
    StaticGraph {
        directed: g.directed(),
        labels: g.labels().to_vec(),
        edges: g
            .edges()
            .iter()
            .map(|e| StaticEdge { id: e.id, tail: e.tail, head: e.head, weight: e.weight, key: e.key.clone() })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn aggregates_contacts_per_pair() {
        let g = parse_contact_sequence("a b 1\na b 2\na c 1", &ParseOptions::new(true)).unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.edge_count(), 2);
        let ab = g.edges().iter().find(|e| g.label(e.head) == "b").unwrap();
        let ac = g.edges().iter().find(|e| g.label(e.head) == "c").unwrap();
        assert_eq!(ab.times, vec![1.0, 2.0]);
        assert_eq!(ac.times, vec![1.0]);
    }

    #[test]
    fn duplicate_contacts_collapse() {
        let g = parse_contact_sequence("a b 1\na b 1", &ParseOptions::new(true)).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.edges()[0].times, vec![1.0]);
    }

    #[test]
    fn undirected_pairs_merge() {
        let g = parse_contact_sequence("b a 1\na b 2", &ParseOptions::new(false)).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.edges()[0].times, vec![1.0, 2.0]);
        let d = parse_contact_sequence("b a 1\na b 2", &ParseOptions::new(true)).unwrap();
        assert_eq!(d.edge_count(), 2);
    }

    #[test]
    fn keys_make_parallel_edges() {
        let g = parse_contact_sequence("a b 1 1 e1\na b 2 1 e2\n", &ParseOptions::new(false)).unwrap();
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn comments_weights_and_errors() {
        let g = parse_contact_sequence("# header\na b 1 2.5 # trailing\n\n", &ParseOptions::new(true)).unwrap();
        assert_eq!(g.edges()[0].weight, 2.5);

        match parse_contact_sequence("a b 1\na b", &ParseOptions::new(true)) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match parse_contact_sequence("a b x", &ParseOptions::new(true)) {
            Err(Error::Parse { line: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_contact_sequence("a b 1 2\na b 3 4", &ParseOptions::new(true)),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(parse_contact_sequence("a b 0", &ParseOptions::new(true)), Err(Error::Validation(_))));
    }

    #[test]
    fn shift_admits_zero_and_echoes_raw_times() {
        let opts = ParseOptions { shift_times: true, ..ParseOptions::new(true) };
        let g = parse_contact_sequence("a b 0\nb c 5", &opts).unwrap();
        assert_eq!(g.edges()[0].times, vec![1.0]);
        assert_eq!(g.edges()[1].times, vec![6.0]);
        assert_eq!(g.raw_time(6.0), 5.0);
        assert_eq!(g.serialize(), "a b 0\nb c 5\n");
    }

    #[test]
    fn self_loops_dropped_unless_kept() {
        let g = parse_contact_sequence("a a 1\na b 2", &ParseOptions::new(true)).unwrap();
        assert_eq!(g.edge_count(), 1);
        let opts = ParseOptions { drop_self_loops: false, ..ParseOptions::new(true) };
        let g = parse_contact_sequence("a a 1\na b 2", &opts).unwrap();
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn builder_rejects_bad_records() {
        let mut b = GraphBuilder::new(false);
        b.edge("a", "b", 0.0, &[1.0]);
        assert!(b.build().is_err());
        let mut b = GraphBuilder::new(false);
        b.edge("a", "b", 1.0, &[]);
        assert!(b.build().is_err());
        let mut b = GraphBuilder::new(false);
        b.edge("a", "b", 1.0, &[-1.0]);
        assert!(b.build().is_err());
    }

    #[test]
    fn largest_component_picks_bigger_triangle() {
        let text = "a b 1\nb c 1\na c 1\nw x 1\nx y 1\ny z 1\nz w 1\n";
        let g = parse_contact_sequence(text, &ParseOptions::new(false)).unwrap();
        let c = largest_weakly_connected_component(&g);
        assert_eq!(c.vertex_count(), 4);
        assert_eq!(c.edge_count(), 4);
        assert!(c.vertex("w").is_some() && c.vertex("a").is_none());
        assert_eq!(largest_weakly_connected_component(&c), c);
    }

    #[test]
    fn largest_component_ties_and_trivial_cases() {
        let g = parse_contact_sequence("c d 1\na b 1", &ParseOptions::new(true)).unwrap();
        let c = largest_weakly_connected_component(&g);
        assert!(c.vertex("a").is_some());
        let connected = parse_contact_sequence("a b 1\nb c 2", &ParseOptions::new(true)).unwrap();
        assert_eq!(largest_weakly_connected_component(&connected), connected);
        let empty = parse_contact_sequence("", &ParseOptions::new(true)).unwrap();
        assert!(largest_weakly_connected_component(&empty).is_empty());
    }

    #[test]
    fn aggregate_keeps_multiedges() {
        let mut b = GraphBuilder::new(false);
        for i in 0..4 {
            b.edge("a", "b", 1.0, &[i as f64 + 1.0]);
        }
        let g = b.build().unwrap();
        let s = aggregate(&g);
        assert_eq!(s.edges.len(), 4);
        assert!(s.edges.iter().all(|e| e.tail == s.edges[0].tail && e.head == s.edges[0].head));
        let empty = aggregate(&GraphBuilder::new(true).build().unwrap());
        assert!(empty.edges.is_empty() && empty.labels.is_empty());
    }

    fn contact_text() -> impl Strategy<Value = String> {
        let contact = (0u8..6, 0u8..6, 1u32..20, prop::option::of(1u8..4));
        prop::collection::vec(contact, 0..25).prop_map(|cs| {
            let mut s = String::new();
            let mut weights: HashMap<(u8, u8), u8> = HashMap::new();
            for (u, v, t, w) in cs {
                // keep one weight per pair so the text is valid
                let w = *weights.entry((u, v)).or_insert(w.unwrap_or(1));
                let _ = writeln!(s, "v{u} v{v} {} {}", t as f64 / 2.0, w);
            }
            s
        })
    }

    proptest! {
        #[test]
        fn serialize_round_trips(text in contact_text(), directed in any::<bool>()) {
            // undirected parsing may merge (u,v) and (v,u) with different weights
            let opts = ParseOptions::new(directed);
            if let Ok(g) = parse_contact_sequence(&text, &opts) {
                let again = parse_contact_sequence(&g.serialize(), &opts).unwrap();
                prop_assert_eq!(&again, &g);
                let a = aggregate(&g);
                let ids: Vec<EdgeId> = a.edges.iter().map(|e| e.id).collect();
                let expected: Vec<EdgeId> = g.edges().iter().map(|e| e.id).collect();
                prop_assert_eq!(ids, expected);
                let c = largest_weakly_connected_component(&g);
                prop_assert_eq!(largest_weakly_connected_component(&c), c);
            }
        }
    }
}
