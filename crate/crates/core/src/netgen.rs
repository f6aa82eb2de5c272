//! Configuration-model contact networks with i.i.d. mask types.
//!
//! Stubs are matched by shuffling the stub array and pairing neighbours, which
//! is an exact uniform perfect matching. Self-loops and multi-edges are kept:
//! a self-loop is inert during spread and each copy of a multi-edge gives an
//! independent transmission chance.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::Distribution;

use crate::degree::DegreeModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ContactNetwork {
    degrees: Vec<u32>,
    /// Edge endpoints, two per edge, in matching order.
    stubs: Vec<u32>,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    node_type: Vec<u8>,
    num_types: usize,
    self_loops: usize,
}

/// Counts of configuration-model defects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Defects {
    pub edges: usize,
    pub self_loops: usize,
    /// Edge copies beyond the first between the same pair of distinct nodes.
    pub extra_multi_edges: usize,
}

impl Defects {
    pub fn fraction(&self) -> f64 {
        if self.edges == 0 {
            0.0
        } else {
            (self.self_loops + self.extra_multi_edges) as f64 / self.edges as f64
        }
    }
}

impl ContactNetwork {
    /// Draws i.i.d. degrees, fixes an odd stub total by bumping one uniform
    /// node, and matches stubs uniformly. Types are left unassigned.
    pub fn generate<R: Rng + ?Sized>(model: &DegreeModel, n_nodes: usize, rng: &mut R) -> Result<Self> {
        if n_nodes < 2 {
            return Err(Error::Domain(format!("network needs at least 2 nodes, got {n_nodes}")));
        }
        if n_nodes > u32::MAX as usize {
            return Err(Error::Domain(format!("network size {n_nodes} exceeds the u32 node-id range")));
        }
        let sampler = model.sampler();
        let mut degrees: Vec<u32> = (0..n_nodes).map(|_| sampler.sample(rng)).collect();
        let total: u64 = degrees.iter().map(|&d| d as u64).sum();
        if total % 2 == 1 {
            degrees[rng.random_range(0..n_nodes)] += 1;
        }
        let mut stubs = Vec::with_capacity(total as usize + 1);
        for (node, &d) in degrees.iter().enumerate() {
            stubs.extend(std::iter::repeat_n(node as u32, d as usize));
        }
        stubs.shuffle(rng);
        Ok(Self::from_stubs(degrees, stubs))
    }

    /// Builds a network from an explicit edge list. Degrees follow from the edges.
    pub fn from_edges(n_nodes: usize, edges: &[(u32, u32)]) -> Result<Self> {
        let mut degrees = vec![0u32; n_nodes];
        let mut stubs = Vec::with_capacity(edges.len() * 2);
        for &(u, v) in edges {
            for w in [u, v] {
                let slot = degrees
                    .get_mut(w as usize)
                    .ok_or_else(|| Error::Domain(format!("edge endpoint {w} out of range for {n_nodes} nodes")))?;
                *slot += 1;
            }
            stubs.push(u);
            stubs.push(v);
        }
        Ok(Self::from_stubs(degrees, stubs))
    }

    fn from_stubs(degrees: Vec<u32>, stubs: Vec<u32>) -> Self {
        let n = degrees.len();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0usize);
        for &d in &degrees {
            offsets.push(offsets.last().unwrap() + d as usize);
        }
        let mut cursor = offsets[..n].to_vec();
        let mut neighbors = vec![0u32; stubs.len()];
        let mut self_loops = 0;
        for pair in stubs.chunks_exact(2) {
            let (u, v) = (pair[0] as usize, pair[1] as usize);
            neighbors[cursor[u]] = pair[1];
            cursor[u] += 1;
            neighbors[cursor[v]] = pair[0];
            cursor[v] += 1;
            if u == v {
                self_loops += 1;
            }
        }
        ContactNetwork {
            degrees,
            stubs,
            offsets,
            neighbors,
            node_type: Vec::new(),
            num_types: 0,
            self_loops,
        }
    }

    /// Draws every node's type i.i.d. from the prevalence vector `m`.
    pub fn assign_types<R: Rng + ?Sized>(&mut self, m: &[f64], rng: &mut R) -> Result<()> {
        if m.is_empty() || m.len() > u8::MAX as usize {
            return Err(Error::validation("m", None, format!("need 1..={} types, got {}", u8::MAX, m.len())));
        }
        let dist = WeightedIndex::new(m).map_err(|e| Error::validation("m", None, e.to_string()))?;
        self.node_type = (0..self.num_nodes()).map(|_| dist.sample(rng) as u8).collect();
        self.num_types = m.len();
        Ok(())
    }

    /// Sets types explicitly (0-based).
    pub fn set_types(&mut self, types: Vec<u8>, num_types: usize) -> Result<()> {
        if types.len() != self.num_nodes() {
            return Err(Error::Domain(format!("{} types for {} nodes", types.len(), self.num_nodes())));
        }
        if let Some(t) = types.iter().find(|&&t| t as usize >= num_types) {
            return Err(Error::Domain(format!("type {t} out of range for {num_types} types")));
        }
        self.node_type = types;
        self.num_types = num_types;
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.degrees.len()
    }

    pub fn num_edges(&self) -> usize {
        self.stubs.len() / 2
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    #[inline]
    pub fn neighbors(&self, node: usize) -> &[u32] {
        &self.neighbors[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.stubs.chunks_exact(2).map(|p| (p[0], p[1]))
    }

    /// Number of stored neighbour entries (edge endpoints).
    pub fn endpoint_count(&self) -> usize {
        self.neighbors.len()
    }

    /// Types are 0-based; empty until assigned.
    pub fn node_types(&self) -> &[u8] {
        &self.node_type
    }

    #[inline]
    pub fn node_type(&self, node: usize) -> usize {
        self.node_type[node] as usize
    }

    pub fn num_types(&self) -> usize {
        self.num_types
    }

    pub fn types_assigned(&self) -> bool {
        self.num_types > 0
    }

    pub fn type_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_types];
        for &t in &self.node_type {
            counts[t as usize] += 1;
        }
        counts
    }

    pub fn defects(&self) -> Defects {
        let mut extra = 0;
        let mut buf = Vec::new();
        for u in 0..self.num_nodes() {
            buf.clear();
            buf.extend(self.neighbors(u).iter().copied().filter(|&v| v as usize > u));
            buf.sort_unstable();
            extra += buf.windows(2).filter(|w| w[0] == w[1]).count();
        }
        Defects {
            edges: self.num_edges(),
            self_loops: self.self_loops,
            extra_multi_edges: extra,
        }
    }

    /// Text dump: header `n_nodes M`, then `node_id type degree` per node
    /// (type 1-based, 0 when unassigned), then `u v` per edge.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let mut buf = String::new();
        writeln!(buf, "{} {}", self.num_nodes(), self.num_types).unwrap();
        for (node, &d) in self.degrees.iter().enumerate() {
            let t = if self.types_assigned() { self.node_type[node] as usize + 1 } else { 0 };
            writeln!(buf, "{node} {t} {d}").unwrap();
        }
        for (u, v) in self.edges() {
            writeln!(buf, "{u} {v}").unwrap();
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = Vec::new();
        self.write_text(&mut out).expect("writing to memory");
        String::from_utf8(out).expect("ascii output")
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let mut next_fields = |expect: usize| -> Result<Option<(usize, Vec<u64>)>> {
            let Some((idx, line)) = lines.next() else { return Ok(None) };
            let line = line?;
            let fields = line
                .split_whitespace()
                .map(|f| f.parse::<u64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::NetworkFormat { line: idx + 1, reason: e.to_string() })?;
            if fields.len() != expect {
                return Err(Error::NetworkFormat {
                    line: idx + 1,
                    reason: format!("expected {expect} fields, found {}", fields.len()),
                });
            }
            Ok(Some((idx + 1, fields)))
        };
        let (_, header) = next_fields(2)?.ok_or(Error::NetworkFormat { line: 1, reason: "missing header".into() })?;
        let (n, num_types) = (header[0] as usize, header[1] as usize);
        let mut types = Vec::with_capacity(n);
        let mut declared = Vec::with_capacity(n);
        for node in 0..n {
            let (line, f) = next_fields(3)?.ok_or(Error::NetworkFormat { line: node + 2, reason: "missing node line".into() })?;
            if f[0] as usize != node {
                return Err(Error::NetworkFormat { line, reason: format!("expected node id {node}, found {}", f[0]) });
            }
            let t = f[1] as usize;
            if (num_types == 0 && t != 0) || (num_types > 0 && !(1..=num_types).contains(&t)) {
                return Err(Error::NetworkFormat { line, reason: format!("type {t} invalid for {num_types} types") });
            }
            types.push(t.saturating_sub(1) as u8);
            declared.push(f[2] as u32);
        }
        let mut edges = Vec::new();
        while let Some((line, f)) = next_fields(2)? {
            if f[0] as usize >= n || f[1] as usize >= n {
                return Err(Error::NetworkFormat { line, reason: "edge endpoint out of range".into() });
            }
            edges.push((f[0] as u32, f[1] as u32));
        }
        let mut net = Self::from_edges(n, &edges)?;
        if let Some(node) = (0..n).find(|&i| net.degrees[i] != declared[i]) {
            return Err(Error::NetworkFormat {
                line: node + 2,
                reason: format!("declared degree {} but edges give {}", declared[node], net.degrees[node]),
            });
        }
        if num_types > 0 {
            net.set_types(types, num_types)?;
        }
        Ok(net)
    }
}
