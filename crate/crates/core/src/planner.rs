//! Circuit constructions for TMS-Bell, TMS-GHZ and TMS-cluster states, the
//! cluster-graph bookkeeping that goes with them, and loss/squeezing budget
//! arithmetic.
//!
//! The graph grows by PBS operations (a polarizing beamsplitter followed by a
//! Hadamard on one of its spatial modes): the Hadamard target hands its
//! neighbors to the other mode and re-attaches to it as a byproduct. Byproduct
//! modes stay in the state; the `backbone` set marks the cluster proper and
//! `leaves()` is everything else, which reproduces the n(m+2) leaf count of
//! the row-by-row grid construction. Every graph prediction that fits within
//! the engine's query cap is verified against the moment engine in tests
//! rather than trusted.

use std::collections::BTreeSet;

use crate::circuit::{Circuit, Gate, ModeLayout, SpatialId};
use crate::error::{Error, Result};
use crate::gaussian::PolMode;

const DB_PER_FACTOR_2: f64 = 3.010299956639812; // 10 log10(2)

#[derive(Debug, Clone, serde::Serialize)]
struct Vertex {
    spatial: SpatialId,
    name: String,
    #[serde(skip)]
    mode: PolMode,
}

/// Vertex/edge bookkeeping for cluster constructions.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ClusterGraph {
    vertices: Vec<Vertex>,
    edges: BTreeSet<(usize, usize)>,
    backbone: BTreeSet<usize>,
    pbs_ops: usize,
    predicts_equal: bool,
}

impl ClusterGraph {
    fn new() -> Self {
        Self {
            vertices: Vec::new(),
            edges: BTreeSet::new(),
            backbone: BTreeSet::new(),
            pbs_ops: 0,
            predicts_equal: false,
        }
    }

    fn add_vertex(&mut self, spatial: SpatialId, name: String, mode: PolMode) -> usize {
        self.vertices.push(Vertex {
            spatial,
            name,
            mode,
        });
        self.vertices.len() - 1
    }

    fn add_edge(&mut self, a: usize, b: usize) {
        debug_assert_ne!(a, b);
        self.edges.insert((a.min(b), a.max(b)));
    }

    fn remove_edge(&mut self, a: usize, b: usize) {
        self.edges.remove(&(a.min(b), a.max(b)));
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_mode(&self, v: usize) -> PolMode {
        self.vertices[v].mode
    }

    pub fn vertex_name(&self, v: usize) -> &str {
        &self.vertices[v].name
    }

    pub fn vertex_of_spatial(&self, s: SpatialId) -> Option<usize> {
        self.vertices.iter().position(|v| v.spatial == s)
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    /// Cluster vertices proper (grid/chain vertices, or the star center).
    pub fn backbone(&self) -> impl Iterator<Item = usize> + '_ {
        self.backbone.iter().copied()
    }

    /// Byproduct modes outside the backbone. For stars and chains these are
    /// exactly the degree-one vertices.
    pub fn leaves(&self) -> Vec<usize> {
        (0..self.vertices.len())
            .filter(|v| !self.backbone.contains(v))
            .collect()
    }

    pub fn leaf_count(&self) -> usize {
        self.vertices.len() - self.backbone.len()
    }

    pub fn pbs_op_count(&self) -> usize {
        self.pbs_ops
    }

    /// Each PBS operation halves the co-fluctuation of the stabilizer
    /// queries.
    pub fn predicted_cofluctuation(&self) -> f64 {
        2f64.powi(-(self.pbs_ops as i32))
    }

    pub fn predicts_equal_stabilizers(&self) -> bool {
        self.predicts_equal
    }

    fn same_component(&self, a: usize, b: usize) -> bool {
        let mut seen = vec![false; self.vertices.len()];
        let mut stack = vec![a];
        seen[a] = true;
        while let Some(v) = stack.pop() {
            if v == b {
                return true;
            }
            for w in self.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        false
    }
}

/// TMS-Bell circuit: squeezers S_{a_h b_h}(r, 0) and S_{a_v b_v}(r, phi) on
/// two fresh polarized spatial modes.
pub fn bell_circuit(r: f64, phi: f64) -> Circuit {
    let mut c = Circuit::new(ModeLayout::polarized(2));
    push_bell(&mut c, 0, 1, r, phi);
    c
}

fn push_bell(c: &mut Circuit, a: SpatialId, b: SpatialId, r: f64, phi: f64) {
    let pa = c.layout.spatial_mode(a);
    let pb = c.layout.spatial_mode(b);
    c.push(Gate::Squeeze {
        a: pa.h,
        b: pb.h,
        r,
        phi: 0.0,
    })
    .unwrap();
    c.push(Gate::Squeeze {
        a: pa.v,
        b: pb.v,
        r,
        phi,
    })
    .unwrap();
}

fn push_hadamard_on(c: &mut Circuit, s: SpatialId) {
    let pm = c.layout.spatial_mode(s);
    c.push(Gate::Hadamard { a: pm.h, b: pm.v }).unwrap();
}

/// `k` independent TMS-Bell pairs (2k spatial modes), phi = 0.
pub fn bell_array(k: usize, r: f64) -> Result<Circuit> {
    if k == 0 {
        return Err(Error::UnsupportedSize("k must be >= 1".into()));
    }
    let mut c = Circuit::new(ModeLayout::polarized(2 * k));
    for i in 0..k {
        push_bell(&mut c, 2 * i, 2 * i + 1, r, 0.0);
    }
    Ok(c)
}

/// Two-vertex TMS-cluster: Bell pair plus a Hadamard on the `a` polarization
/// pair. Its nonzero central-moment pattern is {(0,0), (1,2), (2,1), (3,3)}
/// and both stabilizers equal 2 sinh^2 r cosh^2 r.
pub fn cluster2_circuit(r: f64) -> (Circuit, ClusterGraph) {
    let mut c = bell_circuit(r, 0.0);
    push_hadamard_on(&mut c, 0);
    let mut g = ClusterGraph::new();
    let va = g.add_vertex(0, c.layout.spatial_name_of(0).into(), c.layout.spatial_mode(0));
    let vb = g.add_vertex(1, c.layout.spatial_name_of(1).into(), c.layout.spatial_mode(1));
    g.add_edge(va, vb);
    g.backbone.insert(va);
    g.backbone.insert(vb);
    g.predicts_equal = true;
    (c, g)
}

/// Ring labeling of an n-mode TMS-GHZ state.
#[derive(Debug, Clone, serde::Serialize)]
pub struct GhzRing {
    pub spatial: Vec<SpatialId>,
    pub pairs: usize,
}

impl GhzRing {
    /// Co-fluctuations drop off as 2^{1-k} for k underlying Bell pairs.
    pub fn predicted_cofluctuation(&self) -> f64 {
        2f64.powi(1 - self.pairs as i32)
    }
}

/// n = 2k mode TMS-GHZ state: squeezers S_{a^{(i)}_h a^{((i+1) mod n)}_v}(r, 0)
/// around a ring of spatial modes. Only even mode counts exist; `k` counts
/// the underlying Bell pairs.
pub fn ghz_circuit(k: usize, r: f64) -> Result<(Circuit, GhzRing)> {
    if k == 0 {
        return Err(Error::UnsupportedSize(
            "GHZ construction needs at least one Bell pair".into(),
        ));
    }
    let n = 2 * k;
    let mut c = Circuit::new(ModeLayout::polarized(n));
    for i in 0..n {
        let this = c.layout.spatial_mode(i);
        let next = c.layout.spatial_mode((i + 1) % n);
        c.push(Gate::Squeeze {
            a: this.h,
            b: next.v,
            r,
            phi: 0.0,
        })
        .unwrap();
    }
    Ok((
        c,
        GhzRing {
            spatial: (0..n).collect(),
            pairs: k,
        },
    ))
}

/// PBS operation: polarizing beamsplitter on spatial modes `a`, `b` followed
/// by a Hadamard on `hadamard_target` (one of the two). The target's graph
/// neighbors transfer to the other mode and the target re-attaches to it as
/// a byproduct.
pub fn pbs_op(
    circuit: &Circuit,
    graph: &ClusterGraph,
    a: SpatialId,
    b: SpatialId,
    hadamard_target: SpatialId,
) -> Result<(Circuit, ClusterGraph)> {
    if hadamard_target != a && hadamard_target != b {
        return Err(Error::UnsupportedSize(format!(
            "hadamard target {hadamard_target} is neither PBS input {a} nor {b}"
        )));
    }
    let va = graph
        .vertex_of_spatial(a)
        .ok_or(Error::UnmappedVertex(a))?;
    let vb = graph
        .vertex_of_spatial(b)
        .ok_or(Error::UnmappedVertex(b))?;
    if graph.same_component(va, vb) {
        return Err(Error::UnsupportedSize(
            "PBS operation within one cluster component is undefined".into(),
        ));
    }
    let mut c = circuit.clone();
    c.push(Gate::Pbs { a, b })?;
    push_hadamard_on(&mut c, hadamard_target);

    let (vt, vo) = if hadamard_target == a {
        (va, vb)
    } else {
        (vb, va)
    };
    let mut g = graph.clone();
    for n in g.neighbors(vt) {
        g.remove_edge(vt, n);
        if n != vo {
            g.add_edge(vo, n);
        }
    }
    g.add_edge(vo, vt);
    g.pbs_ops += 1;
    g.predicts_equal = false;
    Ok((c, g))
}

/// Place a fresh 2-vertex cluster on two new spatial modes of `circuit`.
fn append_cluster2(circuit: &mut Circuit, graph: &mut ClusterGraph, r: f64) -> (usize, usize) {
    let sa = circuit.layout.add_spatial(next_name(circuit)).unwrap();
    let sb = circuit.layout.add_spatial(next_name(circuit)).unwrap();
    push_bell(circuit, sa, sb, r, 0.0);
    push_hadamard_on(circuit, sa);
    let va = graph.add_vertex(
        sa,
        circuit.layout.spatial_name_of(sa).into(),
        circuit.layout.spatial_mode(sa),
    );
    let vb = graph.add_vertex(
        sb,
        circuit.layout.spatial_name_of(sb).into(),
        circuit.layout.spatial_mode(sb),
    );
    graph.add_edge(va, vb);
    (va, vb)
}

fn next_name(circuit: &Circuit) -> String {
    crate::circuit::spatial_name(circuit.layout.num_spatial())
}

/// Four-mode star: two 2-vertex clusters fused by one PBS operation. The
/// second cluster's first mode becomes the center; all four stabilizers are
/// predicted equal.
pub fn star_circuit(r: f64) -> (Circuit, ClusterGraph) {
    let mut c = Circuit::new(ModeLayout::new());
    let mut g = ClusterGraph::new();
    let (a, _b) = append_cluster2(&mut c, &mut g, r);
    let (center, _d) = append_cluster2(&mut c, &mut g, r);
    let (c2, mut g2) = pbs_op(
        &c,
        &g,
        g.vertices[a].spatial,
        g.vertices[center].spatial,
        g.vertices[a].spatial,
    )
    .unwrap();
    g2.backbone.insert(center);
    g2.predicts_equal = true;
    (c2, g2)
}

/// Linear chain with `n_links` edges along the backbone.
///
/// One link is the plain 2-vertex cluster. Even link counts come from fusing
/// 4-mode stars leaf-to-leaf, giving an odd number of chain vertices with
/// m + 2 byproduct leaves; odd link counts above one cannot arise from star
/// fusion and are rejected.
pub fn linear_chain(n_links: usize, r: f64) -> Result<(Circuit, ClusterGraph)> {
    if n_links == 0 {
        return Err(Error::UnsupportedSize("chain needs at least one link".into()));
    }
    if n_links == 1 {
        return Ok(cluster2_circuit(r));
    }
    if n_links % 2 != 0 {
        return Err(Error::UnsupportedSize(format!(
            "a chain with {n_links} links cannot be fused from 4-mode stars"
        )));
    }
    let (circuit, mut graph, backbone) = chain_row(n_links + 1, r)?;
    graph.backbone.extend(backbone);
    graph.predicts_equal = false;
    Ok((circuit, graph))
}

/// Build an m-vertex chain row (m odd, or m = 1 for a bare star) and return
/// the backbone vertex list in chain order.
fn chain_row(m: usize, r: f64) -> Result<(Circuit, ClusterGraph, Vec<usize>)> {
    if m % 2 == 0 {
        return Err(Error::UnsupportedSize(format!(
            "chain width {m} is even; star fusion yields odd widths"
        )));
    }
    let mut circuit = Circuit::new(ModeLayout::new());
    let mut graph = ClusterGraph::new();
    // first star: vertices a(leaf) b(leaf) center d(leaf)
    let (a0, _) = append_cluster2(&mut circuit, &mut graph, r);
    let (center0, _) = append_cluster2(&mut circuit, &mut graph, r);
    let (mut c2, mut g2) = pbs_op(
        &circuit,
        &graph,
        graph.vertices[a0].spatial,
        graph.vertices[center0].spatial,
        graph.vertices[a0].spatial,
    )?;
    let mut backbone = vec![center0];
    if m == 1 {
        g2.backbone.insert(center0);
        g2.predicts_equal = true;
        return Ok((c2, g2, backbone));
    }
    while backbone.len() < m {
        // free leaf on the current chain end
        let end = *backbone.last().unwrap();
        let end_leaf = g2
            .neighbors(end)
            .into_iter()
            .find(|&v| !backbone.contains(&v) && g2.neighbors(v).len() == 1)
            .ok_or_else(|| Error::UnsupportedSize("chain end has no free leaf".into()))?;
        // fresh star
        let (sa, _) = append_cluster2(&mut c2, &mut g2, r);
        let (scenter, _) = append_cluster2(&mut c2, &mut g2, r);
        let (c3, g3) = pbs_op(
            &c2,
            &g2,
            g2.vertices[sa].spatial,
            g2.vertices[scenter].spatial,
            g2.vertices[sa].spatial,
        )?;
        // star leaf to fuse with the chain end leaf
        let star_leaf = g3
            .neighbors(scenter)
            .into_iter()
            .find(|&v| v != sa && g3.neighbors(v).len() == 1)
            .ok_or_else(|| Error::UnsupportedSize("star has no free leaf".into()))?;
        let (c4, g4) = pbs_op(
            &c3,
            &g3,
            g3.vertices[end_leaf].spatial,
            g3.vertices[star_leaf].spatial,
            g3.vertices[end_leaf].spatial,
        )?;
        backbone.push(star_leaf);
        backbone.push(scenter);
        c2 = c4;
        g2 = g4;
    }
    Ok((c2, g2, backbone))
}

/// n x m planar cluster built from n chain rows joined column-by-column.
/// Each join targets a leaf of the lower row, so the byproduct count stays
/// at n(m+2).
pub fn grid(rows: usize, cols: usize, r: f64) -> Result<(Circuit, ClusterGraph)> {
    if rows == 0 || cols == 0 {
        return Err(Error::UnsupportedSize("grid sizes must be >= 1".into()));
    }
    if cols > 1 && cols % 2 == 0 {
        return Err(Error::UnsupportedSize(format!(
            "grid width {cols} is even; rows are star-fused chains of odd width"
        )));
    }
    // build row 0
    let (mut circuit, mut graph, row0) = chain_row(cols, r)?;
    let mut row_backbones = vec![row0];
    for _ in 1..rows {
        // append a fresh row into the same circuit
        let vertex_offset = graph.vertex_count();
        let mode_offset = circuit.layout.num_modes();
        let spatial_offset = circuit.layout.num_spatial();
        let (row_c, row_g, row_bb) = chain_row(cols, r)?;
        for (i, name, _pm) in row_c.layout.spatial_modes() {
            let sid = circuit
                .layout
                .add_spatial(format!("r{}_{}", row_backbones.len(), name))?;
            debug_assert_eq!(sid, spatial_offset + i);
        }
        for gate in &row_c.gates {
            circuit.push(shift_gate(gate, mode_offset, spatial_offset))?;
        }
        for v in 0..row_g.vertex_count() {
            let spatial = row_g.vertices[v].spatial + spatial_offset;
            let vid = graph.add_vertex(
                spatial,
                circuit.layout.spatial_name_of(spatial).into(),
                circuit.layout.spatial_mode(spatial),
            );
            debug_assert_eq!(vid, vertex_offset + v);
        }
        for (a, b) in row_g.edges() {
            graph.add_edge(a + vertex_offset, b + vertex_offset);
        }
        graph.pbs_ops += row_g.pbs_ops;
        row_backbones.push(row_bb.into_iter().map(|v| v + vertex_offset).collect());
    }
    // rungs: join row i to row i-1 at every column, consuming a leaf of row i
    for i in 1..rows {
        for j in 0..cols {
            let upper = row_backbones[i - 1][j];
            let lower = row_backbones[i][j];
            let leaf = graph
                .neighbors(lower)
                .into_iter()
                .find(|&v| {
                    !row_backbones[i].contains(&v) && graph.neighbors(v).len() == 1
                })
                .ok_or_else(|| Error::UnsupportedSize("row vertex has no free leaf".into()))?;
            let (c2, g2) = pbs_op(
                &circuit,
                &graph,
                graph.vertices[leaf].spatial,
                graph.vertices[upper].spatial,
                graph.vertices[leaf].spatial,
            )?;
            circuit = c2;
            graph = g2;
        }
    }
    for bb in &row_backbones {
        for &v in bb {
            graph.backbone.insert(v);
        }
    }
    graph.predicts_equal = false;
    Ok((circuit, graph))
}

fn shift_gate(g: &Gate, mode_offset: usize, spatial_offset: usize) -> Gate {
    match *g {
        Gate::Squeeze { a, b, r, phi } => Gate::Squeeze {
            a: a + mode_offset,
            b: b + mode_offset,
            r,
            phi,
        },
        Gate::Hadamard { a, b } => Gate::Hadamard {
            a: a + mode_offset,
            b: b + mode_offset,
        },
        Gate::BeamSplitter { a, b, theta, phi } => Gate::BeamSplitter {
            a: a + mode_offset,
            b: b + mode_offset,
            theta,
            phi,
        },
        Gate::Pbs { a, b } => Gate::Pbs {
            a: a + spatial_offset,
            b: b + spatial_offset,
        },
        Gate::Loss {
            mode,
            transmissivity,
        } => Gate::Loss {
            mode: mode + mode_offset,
            transmissivity,
        },
        Gate::Gain { mode, gain } => Gate::Gain {
            mode: mode + mode_offset,
            gain,
        },
        Gate::Swap { a, b } => Gate::Swap {
            a: a + mode_offset,
            b: b + mode_offset,
        },
    }
}

/// Transmissivity rebalancing misbalanced squeezing r1 > r2 when applied to
/// both h-modes: `t sinh(r1) cosh(r1) = sinh(r2) cosh(r2)`.
pub fn rebalance_loss(r1: f64, r2: f64) -> Result<f64> {
    if !(r1 > r2) {
        return Err(Error::InvalidParameter {
            name: "r1",
            value: r1,
            constraint: "r1 > r2",
        });
    }
    Ok((2.0 * r2).sinh() / (2.0 * r1).sinh())
}

/// Gain rebalancing the weaker arm when applied to both v-modes:
/// `sinh(r1) cosh(r1) = cosh^2(g) sinh(r2) cosh(r2)`.
pub fn rebalance_gain(r1: f64, r2: f64) -> Result<f64> {
    if !(r1 > r2) {
        return Err(Error::InvalidParameter {
            name: "r1",
            value: r1,
            constraint: "r1 > r2",
        });
    }
    let cosh2 = (2.0 * r1).sinh() / (2.0 * r2).sinh();
    Ok(cosh2.sqrt().acosh())
}

/// Loss and operation budget for scalable nonzero central moments.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BudgetReport {
    pub r: f64,
    /// Smallest tolerable per-mode intensity transmissivity,
    /// `sqrt(2)/sinh(2r)`.
    pub gamma_max: f64,
    pub gamma_max_db: f64,
    pub pbs_ops_per_mode: usize,
    pub feedforward_postselect: bool,
    /// dB consumed at the exact 10*log10(2) per factor of two.
    pub spent_db: f64,
    pub residual_db: f64,
    /// Paper-style accounting: one-decimal budget and a flat -3 dB per
    /// factor of two.
    pub spent_db_rounded: f64,
    pub residual_db_rounded: f64,
    pub mean_photons_per_spatial_mode: f64,
    /// False when gamma_max > 1 (no loss tolerance at this squeezing).
    pub feasible: bool,
}

pub fn loss_budget(r: f64, pbs_ops_per_mode: usize, feedforward_postselect: bool) -> Result<BudgetReport> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter {
            name: "r",
            value: r,
            constraint: "r > 0",
        });
    }
    let gamma_max = std::f64::consts::SQRT_2 / (2.0 * r).sinh();
    let feasible = gamma_max <= 1.0;
    let gamma_max_db = 10.0 * gamma_max.log10();
    let factors = pbs_ops_per_mode + usize::from(feedforward_postselect);
    let spent_db = DB_PER_FACTOR_2 * factors as f64;
    let spent_db_rounded = 3.0 * factors as f64;
    let rounded_budget = (gamma_max_db * 10.0).round() / 10.0;
    Ok(BudgetReport {
        r,
        gamma_max,
        gamma_max_db,
        pbs_ops_per_mode,
        feedforward_postselect,
        spent_db,
        residual_db: gamma_max_db + spent_db,
        spent_db_rounded,
        residual_db_rounded: rounded_budget + spent_db_rounded,
        mean_photons_per_spatial_mode: 2.0 * r.sinh().powi(2),
        feasible,
    })
}

/// Closed form of `<prod_{i=1}^n Sigma-bar_0>` over the 2k spatial modes of
/// k separate Bell pairs: `[sqrt(2) cosh(r) sinh(r)]^n`. Only even n exist.
pub fn scaling_moment(n: usize, r: f64) -> Result<f64> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::UnsupportedSize(format!(
            "combining an odd number of modes ({n}) is not defined"
        )));
    }
    Ok((std::f64::consts::SQRT_2 * r.sinh() * r.cosh()).powi(n as i32))
}
