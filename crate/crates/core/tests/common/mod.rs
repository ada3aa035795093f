#![allow(dead_code)]

use rand::Rng;
use temporal_modulus::{GraphBuilder, PenaltyConfig, PenaltyMode, PhiKind, PhiSpec, TemporalGraph, VertexId};

pub struct Instance {
    pub graph: TemporalGraph,
    pub source: VertexId,
    pub target: VertexId,
}

/// Up to `max_vertices` vertices and `max_contacts` edge-time pairs with
/// integer times in 1..=10. Source v0, target v1.
pub fn random_instance(rng: &mut impl Rng, max_vertices: usize, max_contacts: usize) -> Instance {
    let n = rng.gen_range(2..=max_vertices);
    let directed = rng.gen_bool(0.5);
    let mut b = GraphBuilder::new(directed);
    for v in 0..n {
        b.vertex(&format!("v{v}"));
    }
    let contacts = rng.gen_range(1..=max_contacts);
    let mut pairs: Vec<((usize, usize), Vec<f64>)> = Vec::new();
    let mut placed = 0;
    let mut attempts = 0;
    while placed < contacts && attempts < 50 * max_contacts {
        attempts += 1;
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u == v {
            continue;
        }
        let key = if directed || u < v { (u, v) } else { (v, u) };
        let t = rng.gen_range(1..=10) as f64;
        match pairs.iter_mut().find(|(k, _)| *k == key) {
            Some((_, times)) if times.contains(&t) => continue,
            Some((_, times)) => times.push(t),
            None => pairs.push((key, vec![t])),
        }
        placed += 1;
    }
    for ((u, v), times) in &pairs {
        let w = if rng.gen_bool(0.3) { rng.gen_range(0.5..2.0) } else { 1.0 };
        b.edge(&format!("v{u}"), &format!("v{v}"), w, times);
    }
    let graph = b.build().unwrap();
    let source = graph.vertex("v0").unwrap();
    let target = graph.vertex("v1").unwrap();
    Instance { graph, source, target }
}

/// A valid penalty for `mode` with a random rate. Additive rates are large
/// enough that some long or late paths become infeasible.
pub fn random_penalty(rng: &mut impl Rng, mode: PenaltyMode) -> PenaltyConfig {
    let kind = match mode {
        PenaltyMode::AddPerEdge | PenaltyMode::AddPerObject => {
            PhiKind::ExpZero { rate: rng.gen_range(0.01..0.07), t0: 0.0 }
        }
        _ if rng.gen_bool(0.5) => PhiKind::AffinePlusOne(rng.gen_range(0.0..0.5)),
        _ => PhiKind::ExpNormalized { rate: rng.gen_range(0.0..0.3), t0: 0.0 },
    };
    PenaltyConfig::new(mode, PhiSpec::new(kind)).unwrap()
}
