//! Dependency-graph-scheduled in-place evaluation of fan-in-2 circuit layers.
//!
//! One layer of a width-`w` circuit induces a multigraph with a vertex per
//! input wire and an edge per gate joining the gate's two inputs. Evaluating
//! the layer in-place means interleaving "compute an edge" (evaluate a gate,
//! value now live) and "uncompute a vertex" (overwrite an input cell) so that
//! no gate ever reads an overwritten cell and at most two computed values are
//! parked on the side. The schedule classifies each component's edges as
//! feathers (spare edges, consumed early through other components' isolated
//! vertices), bones (spanning-forest branches, eaten leaf-first by
//! prominence), and the skull (the cycle closed by the lexicographically last
//! non-forest edge, swept in one pass).
//!
//! On top of the per-layer step sit the whole-circuit evaluator for
//! width-`n + O(log n)` circuits, the prefix-local evaluator, and the
//! lossy-code witness search on a catalytic bit tape.

use crate::bits::Bits;
use crate::tape::SpaceLedger;
use std::collections::{HashMap, HashSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CircError {
    #[error("width {width} exceeds bound {max} for input length {n}")]
    WidthExceeded { width: usize, max: usize, n: usize },
    #[error("gate {gate} reads input {input}, outside its window")]
    WindowViolation { gate: usize, input: usize },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("circuit tail gate {gate} is not constant zero")]
    UncleanOutputTail { gate: usize },
}

/// A fan-in-2 gate: 4-bit truth table, output bit `tt >> (2*a + b) & 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Gate {
    pub tt: u8,
    pub a: usize,
    pub b: usize,
}

impl Gate {
    pub fn eval(&self, va: bool, vb: bool) -> bool {
        self.tt >> ((va as u8) << 1 | vb as u8) & 1 == 1
    }
}

/// Truth table of the gate passing its first input through.
pub const TT_PASS_A: u8 = 0xc;
/// Truth table of the constant-zero gate.
pub const TT_ZERO: u8 = 0x0;
/// Truth table of XOR.
pub const TT_XOR: u8 = 0x6;

/// One layer: exactly `width` gates over `width` input wires.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layer {
    pub width: usize,
    pub gates: Vec<Gate>,
}

impl Layer {
    pub fn new(width: usize, gates: Vec<Gate>) -> Layer {
        assert_eq!(gates.len(), width);
        assert!(gates.iter().all(|g| g.a < width && g.b < width));
        Layer { width, gates }
    }

    /// Pads a narrower gate list up to `width` with pass-through gates, so a
    /// circuit narrower than its declared width still has one gate per wire.
    pub fn padded(width: usize, mut gates: Vec<Gate>) -> Layer {
        assert!(gates.len() <= width);
        assert!(gates.iter().all(|g| g.a < width && g.b < width));
        for i in gates.len()..width {
            gates.push(Gate {
                tt: TT_PASS_A,
                a: i,
                b: i,
            });
        }
        Layer { width, gates }
    }

    /// Direct evaluation, the oracle the in-place path is tested against.
    pub fn eval_direct(&self, input: &[bool]) -> Vec<bool> {
        self.gates
            .iter()
            .map(|g| g.eval(input[g.a], input[g.b]))
            .collect()
    }
}

/// The per-layer dependency multigraph: vertex per wire, edge per gate.
/// Vertices start computed (their input values are live) and edges start
/// uncomputed.
#[derive(Clone, Debug)]
pub struct DepGraph {
    pub w: usize,
    pub edges: Vec<(usize, usize)>,
    pub computed_vertices: Vec<bool>,
    pub computed_edges: Vec<bool>,
}

pub fn build_dep_graph(layer: &Layer) -> DepGraph {
    DepGraph {
        w: layer.width,
        edges: layer.gates.iter().map(|g| (g.a, g.b)).collect(),
        computed_vertices: vec![true; layer.width],
        computed_edges: vec![false; layer.width],
    }
}

/// Classification of one edge inside its connected component.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EdgeClass {
    Feather,
    Bone { prominence: usize },
    Skull { cycle_position: usize },
}

/// Lexicographic edge key: sorted endpoints, then edge id for multi-edges.
fn edge_key(g: &DepGraph, e: usize) -> (usize, usize, usize) {
    let (a, b) = g.edges[e];
    (a.min(b), a.max(b), e)
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn new(n: usize) -> Dsu {
        Dsu((0..n).collect())
    }
    fn find(&mut self, x: usize) -> usize {
        if self.0[x] != x {
            let r = self.find(self.0[x]);
            self.0[x] = r;
        }
        self.0[x]
    }
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Everything the scheduler needs about one component, in processing order.
struct Component {
    vertices: Vec<usize>,
    /// Bone edge ids ordered by (prominence, lexicographic key).
    bones: Vec<usize>,
    /// Skull edge ids in sweep order.
    skull_edges: Vec<usize>,
    /// Vertex uncomputed after each sweep edge from the second onward, with
    /// the final join closing the cycle; one join per skull edge.
    skull_joins: Vec<usize>,
    feathers: Vec<usize>,
}

struct Analysis {
    classes: Vec<EdgeClass>,
    components: Vec<Component>,
}

fn analyze(g: &DepGraph) -> Analysis {
    let w = g.w;
    let mut dsu = Dsu::new(w);
    for &(a, b) in &g.edges {
        dsu.union(a, b);
    }
    let mut comp_of_vertex: Vec<usize> = (0..w).map(|v| dsu.find(v)).collect();
    let mut roots: Vec<usize> = comp_of_vertex.clone();
    roots.sort_unstable();
    roots.dedup();

    let mut verts: Vec<Vec<usize>> = vec![Vec::new(); roots.len()];
    let mut edges: Vec<Vec<usize>> = vec![Vec::new(); roots.len()];
    for v in 0..w {
        let c = roots.binary_search(&comp_of_vertex[v]).unwrap();
        comp_of_vertex[v] = c;
        verts[c].push(v);
    }
    for (e, &(a, _)) in g.edges.iter().enumerate() {
        edges[comp_of_vertex[a]].push(e);
    }

    // components in order of initial average degree 2E/V, ties by smallest
    // contained vertex id; compare E/V as cross products
    let mut order: Vec<usize> = (0..roots.len()).collect();
    order.sort_by(|&x, &y| {
        (edges[x].len() * verts[y].len())
            .cmp(&(edges[y].len() * verts[x].len()))
            .then(verts[x][0].cmp(&verts[y][0]))
    });

    let mut classes = vec![EdgeClass::Feather; g.edges.len()];
    let mut components = Vec::with_capacity(order.len());
    for &c in &order {
        // deterministic Kruskal over lexicographically ordered edges;
        // self-loops never join the forest
        let mut sorted = edges[c].clone();
        sorted.sort_by_key(|&e| edge_key(g, e));
        let mut forest = Dsu::new(w);
        let mut msf = Vec::new();
        let mut non_msf = Vec::new();
        for &e in &sorted {
            let (a, b) = g.edges[e];
            if a != b && forest.union(a, b) {
                msf.push(e);
            } else {
                non_msf.push(e);
            }
        }
        let closer = non_msf.last().copied();
        let feathers: Vec<usize> = non_msf
            .iter()
            .copied()
            .filter(|e| Some(*e) != closer)
            .collect();

        let skeleton: Vec<usize> = msf.iter().copied().chain(closer).collect();
        let cycle = closer
            .map(|cl| skeleton_cycle(g, &msf, cl))
            .unwrap_or_default();
        let (skull_edges, skull_joins) = sweep_with_joins(g, &cycle);
        let in_skull: HashSet<usize> = skull_edges.iter().copied().collect();

        let mut bones: Vec<usize> = msf
            .iter()
            .copied()
            .filter(|e| !in_skull.contains(e))
            .collect();
        let prominence = bone_prominence(g, &skeleton, &verts[c]);
        bones.sort_by_key(|&e| (prominence[&e], edge_key(g, e)));

        for &e in &bones {
            classes[e] = EdgeClass::Bone {
                prominence: prominence[&e],
            };
        }
        for (pos, &e) in skull_edges.iter().enumerate() {
            classes[e] = EdgeClass::Skull {
                cycle_position: pos,
            };
        }
        components.push(Component {
            vertices: verts[c].clone(),
            bones,
            skull_edges,
            skull_joins,
            feathers,
        });
    }
    Analysis {
        classes,
        components,
    }
}

/// The unique cycle of the skeleton: the closing edge plus the forest path
/// between its endpoints. A self-loop closes a one-edge cycle.
fn skeleton_cycle(g: &DepGraph, msf: &[usize], closer: usize) -> Vec<usize> {
    let (a, b) = g.edges[closer];
    if a == b {
        return vec![closer];
    }
    let mut adj: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
    for &e in msf {
        let (u, v) = g.edges[e];
        adj.entry(u).or_default().push((v, e));
        adj.entry(v).or_default().push((u, e));
    }
    let mut prev: HashMap<usize, (usize, usize)> = HashMap::new();
    let mut queue = VecDeque::from([a]);
    let mut seen = HashSet::from([a]);
    while let Some(u) = queue.pop_front() {
        if u == b {
            break;
        }
        for &(v, e) in adj.get(&u).into_iter().flatten() {
            if seen.insert(v) {
                prev.insert(v, (u, e));
                queue.push_back(v);
            }
        }
    }
    let mut cycle = vec![closer];
    let mut v = b;
    while v != a {
        let (u, e) = prev[&v];
        cycle.push(e);
        v = u;
    }
    cycle
}

fn other_endpoint(g: &DepGraph, e: usize, entering: usize) -> usize {
    let (a, b) = g.edges[e];
    if a == entering {
        b
    } else {
        a
    }
}

/// Orders the skull sweep: start at the lexicographically first cycle edge,
/// continue through its lexicographically first neighbor, follow the cycle
/// in that direction. Returns the edge order and the join vertices: join
/// `t` is uncomputed right after edge `t+1` is computed, and the final join
/// closes the cycle.
fn sweep_with_joins(g: &DepGraph, cycle: &[usize]) -> (Vec<usize>, Vec<usize>) {
    match cycle.len() {
        0 => return (Vec::new(), Vec::new()),
        1 => return (cycle.to_vec(), vec![g.edges[cycle[0]].0]),
        _ => {}
    }
    let start = *cycle.iter().min_by_key(|&&e| edge_key(g, e)).unwrap();
    let shares_vertex = |e1: usize, e2: usize| {
        let (a, b) = g.edges[e1];
        let (c, d) = g.edges[e2];
        a == c || a == d || b == c || b == d
    };
    let second = *cycle
        .iter()
        .filter(|&&e| e != start && shares_vertex(start, e))
        .min_by_key(|&&e| edge_key(g, e))
        .expect("a cycle edge has neighbors");
    let (sa, sb) = g.edges[start];
    let (ca, cb) = g.edges[second];
    // traverse `start` so that the shared vertex is exited; for parallel
    // edges (both endpoints shared) go min -> max
    let first_join = if (sa == ca || sa == cb) && (sb == ca || sb == cb) {
        sa.max(sb)
    } else if sa == ca || sa == cb {
        sa
    } else {
        sb
    };
    let mut edges = vec![start, second];
    let mut joins = vec![first_join];
    let mut used: HashSet<usize> = edges.iter().copied().collect();
    let mut entering = first_join;
    while edges.len() < cycle.len() {
        let cur = *edges.last().unwrap();
        let exit = other_endpoint(g, cur, entering);
        let next = cycle
            .iter()
            .copied()
            .find(|&e| {
                !used.contains(&e) && {
                    let (x, y) = g.edges[e];
                    x == exit || y == exit
                }
            })
            .expect("cycle walk continues");
        joins.push(exit);
        used.insert(next);
        edges.push(next);
        entering = exit;
    }
    let final_join = other_endpoint(g, *edges.last().unwrap(), entering);
    joins.push(final_join);
    (edges, joins)
}

/// A bone's prominence: the round in which iterated leaf-edge removal
/// deletes it from the skeleton, i.e. its distance to a leaf measured along
/// its own pendant branch. Eating bones in prominence order guarantees each
/// one touches a live leaf at its turn; the skull cycle never peels and is
/// left intact. (The naive shortest-distance-to-any-leaf reading fails when
/// a vertex carries one short and one long branch: the long branch's inner
/// edges would come up before their own subtree is gone.)
fn bone_prominence(g: &DepGraph, skeleton: &[usize], vertices: &[usize]) -> HashMap<usize, usize> {
    let mut deg: HashMap<usize, usize> = vertices.iter().map(|&v| (v, 0)).collect();
    for &e in skeleton {
        let (u, v) = g.edges[e];
        *deg.get_mut(&u).unwrap() += 1;
        *deg.get_mut(&v).unwrap() += 1;
    }
    let mut alive: HashSet<usize> = skeleton.iter().copied().collect();
    let mut rounds: HashMap<usize, usize> = HashMap::new();
    let mut round = 0;
    loop {
        let peel: Vec<usize> = alive
            .iter()
            .copied()
            .filter(|&e| {
                let (u, v) = g.edges[e];
                u != v && (deg[&u] == 1 || deg[&v] == 1)
            })
            .collect();
        if peel.is_empty() {
            break;
        }
        for &e in &peel {
            let (u, v) = g.edges[e];
            alive.remove(&e);
            *deg.get_mut(&u).unwrap() -= 1;
            *deg.get_mut(&v).unwrap() -= 1;
            rounds.insert(e, round);
        }
        round += 1;
    }
    // whatever survives is the skull; give it a sentinel no bone ever gets
    for &e in skeleton {
        rounds.entry(e).or_insert(usize::MAX);
    }
    rounds
}

/// Per-edge classification: spanning-forest bones with their prominence, the
/// skull cycle positions, and the feathers.
pub fn classify_edges(g: &DepGraph) -> Vec<EdgeClass> {
    analyze(g).classes
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Ev {
    Compute(usize),
    Uncompute(usize),
}

struct ScheduleBuilder<'g> {
    g: &'g DepGraph,
    deg: Vec<usize>,
    edge_done: Vec<bool>,
    vertex_done: Vec<bool>,
    events: Vec<Ev>,
}

impl<'g> ScheduleBuilder<'g> {
    fn new(g: &'g DepGraph) -> Self {
        let mut deg = vec![0usize; g.w];
        for &(a, b) in &g.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        ScheduleBuilder {
            g,
            deg,
            edge_done: vec![false; g.edges.len()],
            vertex_done: vec![false; g.w],
            events: Vec::with_capacity(2 * g.w),
        }
    }

    fn compute(&mut self, e: usize) -> Result<(), CircError> {
        if self.edge_done[e] {
            return Err(CircError::InvalidSchedule(format!(
                "edge {e} computed twice"
            )));
        }
        let (a, b) = self.g.edges[e];
        if self.vertex_done[a] || self.vertex_done[b] {
            return Err(CircError::InvalidSchedule(format!(
                "edge {e} computed after an endpoint was uncomputed"
            )));
        }
        self.edge_done[e] = true;
        self.deg[a] -= 1;
        self.deg[b] -= 1;
        self.events.push(Ev::Compute(e));
        Ok(())
    }

    fn uncompute(&mut self, v: usize) -> Result<(), CircError> {
        if self.vertex_done[v] {
            return Err(CircError::InvalidSchedule(format!(
                "vertex {v} uncomputed twice"
            )));
        }
        if self.deg[v] != 0 {
            return Err(CircError::InvalidSchedule(format!(
                "vertex {v} uncomputed with {} live edges",
                self.deg[v]
            )));
        }
        self.vertex_done[v] = true;
        self.events.push(Ev::Uncompute(v));
        Ok(())
    }
}

/// Builds the deletion orders: `pi1[i]` is the `i`-th vertex uncomputed and
/// `pi2[i]` the `i`-th edge computed over a sequence of isolated-vertex,
/// leaf, and isolated-cycle moves. Components are processed in average
/// degree order; isolated-vertex moves feed on the global feather queue.
pub fn deletion_orders(g: &DepGraph) -> Result<(Vec<usize>, Vec<usize>), CircError> {
    let analysis = analyze(g);
    let mut b = ScheduleBuilder::new(g);

    let mut feather_queue: VecDeque<usize> = analysis
        .components
        .iter()
        .flat_map(|c| c.feathers.iter().copied())
        .collect();

    for comp in &analysis.components {
        // earlier components' isolated-vertex slots must have consumed this
        // component's feathers already
        if let Some(&f) = comp.feathers.iter().find(|&&f| !b.edge_done[f]) {
            return Err(CircError::InvalidSchedule(format!(
                "feather {f} still uncomputed when its component starts"
            )));
        }
        for &e in &comp.bones {
            b.compute(e)?;
            let (x, y) = g.edges[e];
            let leaf = match (b.deg[x] == 0, b.deg[y] == 0) {
                (true, true) => x.min(y),
                (true, false) => x,
                (false, true) => y,
                (false, false) => {
                    return Err(CircError::InvalidSchedule(format!(
                        "bone {e} touches no leaf at its turn"
                    )));
                }
            };
            b.uncompute(leaf)?;
        }
        if !comp.skull_edges.is_empty() {
            b.compute(comp.skull_edges[0])?;
            for t in 1..comp.skull_edges.len() {
                b.compute(comp.skull_edges[t])?;
                b.uncompute(comp.skull_joins[t - 1])?;
            }
            b.uncompute(*comp.skull_joins.last().unwrap())?;
        }
        // tree roots and edge-less vertices: uncompute, then feed the slot
        // from the feather queue
        for &v in &comp.vertices {
            if !b.vertex_done[v] {
                b.uncompute(v)?;
                if let Some(f) = feather_queue.pop_front() {
                    b.compute(f)?;
                }
            }
        }
    }
    if !feather_queue.is_empty() {
        return Err(CircError::InvalidSchedule(
            "feathers left unconsumed".into(),
        ));
    }
    if b.edge_done.iter().any(|&d| !d) || b.vertex_done.iter().any(|&d| !d) {
        return Err(CircError::InvalidSchedule(
            "schedule did not terminate fully".into(),
        ));
    }

    let mut pi1 = Vec::with_capacity(g.w);
    let mut pi2 = Vec::with_capacity(g.w);
    let mut excess: i64 = 0;
    for ev in &b.events {
        match ev {
            Ev::Compute(e) => {
                pi2.push(*e);
                excess += 1;
            }
            Ev::Uncompute(v) => {
                pi1.push(*v);
                excess -= 1;
            }
        }
        if excess > 2 {
            return Err(CircError::InvalidSchedule(
                "computed-edge excess exceeded 2".into(),
            ));
        }
    }
    Ok((pi1, pi2))
}

/// Replays `(pi1, pi2)` against the graph: both must be permutations, no
/// edge may be computed once an endpoint is overwritten (the two parked
/// values give a two-slot offset between the orders), and the replay must
/// terminate with everything processed.
pub fn validate_schedule(g: &DepGraph, pi1: &[usize], pi2: &[usize]) -> Result<(), CircError> {
    let w = g.w;
    let is_perm = |p: &[usize]| {
        let mut seen = vec![false; w];
        p.len() == w
            && p.iter()
                .all(|&x| x < w && !std::mem::replace(&mut seen[x], true))
    };
    if !is_perm(pi1) || !is_perm(pi2) {
        return Err(CircError::InvalidSchedule(
            "orders are not permutations".into(),
        ));
    }
    let mut pos1 = vec![0usize; w];
    for (i, &v) in pi1.iter().enumerate() {
        pos1[v] = i;
    }
    // endpoints of the edge at position j survive until at least position
    // j - 2 of the vertex order...
    for (j, &e) in pi2.iter().enumerate() {
        let (a, b) = g.edges[e];
        let cutoff = j.saturating_sub(2);
        if pos1[a] < cutoff || pos1[b] < cutoff {
            return Err(CircError::InvalidSchedule(format!(
                "edge {e} at position {j} reads an already-overwritten vertex"
            )));
        }
    }
    // ...equivalently, every edge incident to pi1[i] appears by position i+2
    let mut pos2 = vec![0usize; w];
    for (j, &e) in pi2.iter().enumerate() {
        pos2[e] = j;
    }
    for (e, &(a, b)) in g.edges.iter().enumerate() {
        for v in [a, b] {
            if pos2[e] > pos1[v] + 2 {
                return Err(CircError::InvalidSchedule(format!(
                    "edge {e} computed after endpoint {v} was overwritten"
                )));
            }
        }
    }
    Ok(())
}

/// Evaluates one layer in-place on `w` bit cells: two gate outputs are
/// parked on the side, every further gate output overwrites the next dead
/// input cell, and a final in-place permutation puts the outputs in gate
/// order.
pub fn eval_layer_inplace(
    layer: &Layer,
    tape: &mut [bool],
    ledger: &SpaceLedger,
) -> Result<(), CircError> {
    let w = layer.width;
    if tape.len() != w {
        return Err(CircError::Dimension(format!(
            "tape {} != width {}",
            tape.len(),
            w
        )));
    }
    if w == 0 {
        return Ok(());
    }
    let g = build_dep_graph(layer);
    let (pi1, pi2) = deletion_orders(&g)?;

    let out = |e: usize, tape: &[bool]| {
        let gate = &layer.gates[e];
        gate.eval(tape[gate.a], tape[gate.b])
    };
    let aside1 = ledger.hold(out(pi2[0], tape));
    let aside2 = if w >= 2 {
        Some(ledger.hold(out(pi2[1], tape)))
    } else {
        None
    };
    for i in 0..w.saturating_sub(2) {
        ledger.count_step();
        let v = out(pi2[i + 2], tape);
        tape[pi1[i]] = v;
    }
    match aside2 {
        Some(a2) => {
            tape[pi1[w - 2]] = *aside1;
            tape[pi1[w - 1]] = *a2;
        }
        None => tape[pi1[0]] = *aside1,
    }
    drop(aside1);

    // cell pi1[i] now holds the output of gate pi2[(i+2) mod w]; pull each
    // gate's value into its own cell
    let mut pos2 = vec![0usize; w];
    for (j, &e) in pi2.iter().enumerate() {
        pos2[e] = j;
    }
    let perm = |c: usize| pi1[(pos2[c] + 2 * w - 2) % w];
    apply_permutation_inplace(tape, &perm, ledger);
    Ok(())
}

/// In-place permutation application: cell `i` ends with cell `perm(i)`'s
/// prior content. A cycle is rotated only from its minimum-index element,
/// keeping storage at one parked value plus counters.
pub fn apply_permutation_inplace<T: Clone>(
    tape: &mut [T],
    perm: &dyn Fn(usize) -> usize,
    ledger: &SpaceLedger,
) {
    let n = tape.len();
    for s in 0..n {
        if perm(s) == s {
            continue;
        }
        let mut j = perm(s);
        let mut leader = true;
        while j != s {
            if j < s {
                leader = false;
                break;
            }
            j = perm(j);
        }
        if !leader {
            continue;
        }
        let parked = ledger.hold(tape[s].clone());
        let mut i = s;
        loop {
            ledger.count_step();
            let j = perm(i);
            if j == s {
                tape[i] = parked.clone();
                break;
            }
            tape[i] = tape[j].clone();
            i = j;
        }
    }
}

/// A layered fan-in-2 circuit of fixed width. `n` is the input length; the
/// output is read from the first cells of the final tape.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmallWidthCircuit {
    pub n: usize,
    pub width: usize,
    pub layers: Vec<Layer>,
}

/// Default width-bound constant: width at most `n + 8 * ceil(log2 n)`.
pub const DEFAULT_WIDTH_CONSTANT: usize = 8;

fn log2_ceil(n: usize) -> usize {
    (usize::BITS - n.max(1).leading_zeros()) as usize
}

impl SmallWidthCircuit {
    pub fn new(n: usize, width: usize, layers: Vec<Layer>) -> Result<Self, CircError> {
        Self::with_width_constant(n, width, layers, DEFAULT_WIDTH_CONSTANT)
    }

    pub fn with_width_constant(
        n: usize,
        width: usize,
        layers: Vec<Layer>,
        c: usize,
    ) -> Result<Self, CircError> {
        let max = n + c * log2_ceil(n);
        if width < n || width > max {
            return Err(CircError::WidthExceeded { width, max, n });
        }
        assert!(layers.iter().all(|l| l.width == width));
        Ok(SmallWidthCircuit { n, width, layers })
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Direct free-memory evaluation of the full tape: the test oracle, and
    /// the read-only probe used before any in-place pass.
    pub fn eval_direct_tape(&self, input: &[bool]) -> Vec<bool> {
        let mut tape = input.to_vec();
        tape.resize(self.width, false);
        for layer in &self.layers {
            tape = layer.eval_direct(&tape);
        }
        tape
    }

    /// Direct evaluation reading the first `out_len` cells.
    pub fn eval_direct(&self, input: &Bits, out_len: usize) -> Bits {
        let tape = self.eval_direct_tape(input.as_slice());
        Bits::from_bools(tape[..out_len].to_vec())
    }

    /// True when every final-layer gate at position `>= out_len` is the
    /// constant-zero gate, so in-place evaluation leaves the tail clean.
    pub fn has_clean_tail(&self, out_len: usize) -> bool {
        match self.layers.last() {
            None => true,
            Some(l) => l.gates[out_len..].iter().all(|g| g.tt == TT_ZERO),
        }
    }

    /// Text form: `CIRCUIT n width depth`, then per layer `width` lines of
    /// `TT4 in_a in_b` with the truth table as one hex digit.
    pub fn to_text(&self) -> String {
        let mut out = format!("CIRCUIT {} {} {}\n", self.n, self.width, self.depth());
        for layer in &self.layers {
            for g in &layer.gates {
                out.push_str(&format!("{:x} {} {}\n", g.tt, g.a, g.b));
            }
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self, CircError> {
        Self::parse_with_width_constant(text, DEFAULT_WIDTH_CONSTANT)
    }

    pub fn parse_with_width_constant(text: &str, c: usize) -> Result<Self, CircError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (ln, header) = lines.next().ok_or(CircError::Parse {
            line: 0,
            msg: "empty file".into(),
        })?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 4 || toks[0] != "CIRCUIT" {
            return Err(CircError::Parse {
                line: ln + 1,
                msg: "expected `CIRCUIT n width depth`".into(),
            });
        }
        let parse_num = |t: &str, ln: usize| {
            t.parse::<usize>().map_err(|e| CircError::Parse {
                line: ln + 1,
                msg: e.to_string(),
            })
        };
        let n = parse_num(toks[1], ln)?;
        let width = parse_num(toks[2], ln)?;
        let depth = parse_num(toks[3], ln)?;
        let mut layers = Vec::with_capacity(depth);
        for _ in 0..depth {
            let mut gates = Vec::with_capacity(width);
            for _ in 0..width {
                let (ln, line) = lines.next().ok_or(CircError::Parse {
                    line: 0,
                    msg: "missing gate line".into(),
                })?;
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() != 3 {
                    return Err(CircError::Parse {
                        line: ln + 1,
                        msg: "expected `TT4 in_a in_b`".into(),
                    });
                }
                let tt = u8::from_str_radix(toks[0], 16).map_err(|e| CircError::Parse {
                    line: ln + 1,
                    msg: e.to_string(),
                })?;
                if tt > 0xf {
                    return Err(CircError::Parse {
                        line: ln + 1,
                        msg: format!("truth table {tt:#x} is not one hex digit"),
                    });
                }
                let a = parse_num(toks[1], ln)?;
                let b = parse_num(toks[2], ln)?;
                if a >= width || b >= width {
                    return Err(CircError::Parse {
                        line: ln + 1,
                        msg: format!("gate input out of range (width {width})"),
                    });
                }
                gates.push(Gate { tt, a, b });
            }
            layers.push(Layer::new(width, gates));
        }
        Self::with_width_constant(n, width, layers, c)
    }
}

/// Evaluates the circuit in-place on a width-cell region (input in the
/// first `n` cells, the rest zeroed by the caller), one layer at a time.
pub fn eval_region_inplace(
    c: &SmallWidthCircuit,
    region: &mut [bool],
    ledger: &SpaceLedger,
) -> Result<(), CircError> {
    if region.len() != c.width {
        return Err(CircError::Dimension(format!(
            "region {} != width {}",
            region.len(),
            c.width
        )));
    }
    for layer in &c.layers {
        eval_layer_inplace(layer, region, ledger)?;
    }
    Ok(())
}

/// Whole-circuit in-place evaluation: pads the input to the circuit width,
/// runs every layer in-place, returns the first `n` cells. The ledger
/// records that side storage stayed at two parked values.
pub fn eval_circuit_inplace(
    c: &SmallWidthCircuit,
    input: &Bits,
    ledger: &SpaceLedger,
) -> Result<Bits, CircError> {
    if input.len() != c.n {
        return Err(CircError::Dimension(format!(
            "input {} != n {}",
            input.len(),
            c.n
        )));
    }
    let mut region = input.as_slice().to_vec();
    region.resize(c.width, false);
    eval_region_inplace(c, &mut region, ledger)?;
    Ok(Bits::from_bools(region[..c.n].to_vec()))
}

/// A gate of the prefix-local evaluator: an arbitrary truth table over an
/// explicit list of input positions.
#[derive(Clone, Debug)]
pub struct PrefixGate {
    pub inputs: Vec<usize>,
    /// `2^inputs.len()` entries, indexed by the input bits read MSB-first.
    pub table: Vec<bool>,
}

impl PrefixGate {
    fn eval(&self, tape: &[bool]) -> bool {
        let mut idx = 0usize;
        for &i in &self.inputs {
            idx = idx << 1 | tape[i] as usize;
        }
        self.table[idx]
    }
}

/// A length-preserving map whose output `i` reads only inputs at positions
/// `<= i + delta`.
#[derive(Clone, Debug)]
pub struct PrefixLocalMap {
    pub n: usize,
    pub delta: usize,
    pub gates: Vec<PrefixGate>,
}

impl PrefixLocalMap {
    pub fn eval_direct(&self, input: &[bool]) -> Vec<bool> {
        self.gates.iter().map(|g| g.eval(input)).collect()
    }
}

/// Computes the outputs last to first, erasing the dead input tail as it
/// goes: output `i` lands on cell `i + delta`, which no earlier output
/// reads. Total live cells never exceed `n + delta`.
pub fn eval_prefix_local_inplace(
    f: &PrefixLocalMap,
    input: &Bits,
    ledger: &SpaceLedger,
) -> Result<Bits, CircError> {
    let n = f.n;
    if input.len() != n || f.gates.len() != n {
        return Err(CircError::Dimension(format!(
            "input {} != n {}",
            input.len(),
            n
        )));
    }
    for (i, g) in f.gates.iter().enumerate() {
        if let Some(&bad) = g.inputs.iter().find(|&&p| p > i + f.delta || p >= n) {
            return Err(CircError::WindowViolation {
                gate: i,
                input: bad,
            });
        }
    }
    let mut tape = input.as_slice().to_vec();
    tape.resize(n + f.delta, false);
    for i in (0..n).rev() {
        ledger.count_step();
        let v = f.gates[i].eval(&tape);
        tape[i + f.delta] = v;
    }
    // slide the outputs down over the spent input prefix
    for i in 0..n {
        tape[i] = tape[i + f.delta];
    }
    Ok(Bits::from_bools(tape[..n].to_vec()))
}

/// Lossy-code witness search: given `C: n -> n-1` and `D: n-1 -> n` of
/// small width and a catalytic tape of `n*n` bits, returns an `x` with
/// `D(C(x)) != x`, restoring the tape exactly.
///
/// Blocks that already fail the round trip are immediate witnesses and
/// leave the tape untouched. Otherwise every block is compressed in place
/// through `C` (freeing its last bit), the payloads are shifted together so
/// `n` zero bits gather at the end, the witness is found by scanning `y` in
/// order, and the blocks are decompressed back through `D`.
///
/// Both circuits must zero their non-output tail cells (constant-zero gates
/// in the final layer), or the freed bits would not come back as zeros.
pub fn lossy_code_solve(
    c: &SmallWidthCircuit,
    d: &SmallWidthCircuit,
    catalytic: &mut Bits,
    ledger: &SpaceLedger,
) -> Result<Bits, CircError> {
    let n = c.n;
    if n < 2 || d.n != n - 1 {
        return Err(CircError::Dimension(format!(
            "need C: n -> n-1 and D: n-1 -> n, got C.n = {n}, D.n = {}",
            d.n
        )));
    }
    if catalytic.len() != n * n {
        return Err(CircError::Dimension(format!(
            "catalytic tape {} != n^2 = {}",
            catalytic.len(),
            n * n
        )));
    }
    if n > 20 {
        return Err(CircError::Dimension(
            "witness scan limited to n <= 20".into(),
        ));
    }
    if !c.has_clean_tail(n - 1) {
        let g = (n - 1..c.width)
            .find(|&g| c.layers.last().is_some_and(|l| l.gates[g].tt != TT_ZERO))
            .unwrap();
        return Err(CircError::UncleanOutputTail { gate: g });
    }
    if !d.has_clean_tail(n) {
        let g = (n..d.width)
            .find(|&g| d.layers.last().is_some_and(|l| l.gates[g].tt != TT_ZERO))
            .unwrap();
        return Err(CircError::UncleanOutputTail { gate: g });
    }

    let round_trip_fails = |x: &Bits| {
        let compressed = c.eval_direct(x, n - 1);
        d.eval_direct(&compressed, n) != *x
    };

    // read-only scan for an immediate witness
    for i in 0..n {
        let block = catalytic.slice(i * n, n);
        if round_trip_fails(&block) {
            return Ok(block);
        }
    }

    // compress every block in place: tau_i -> C(tau_i) || 0
    for i in 0..n {
        let mut region: Vec<bool> = catalytic.slice(i * n, n).as_slice().to_vec();
        region.resize(c.width, false);
        eval_region_inplace(c, &mut region, ledger)?;
        debug_assert!(
            region[n - 1..].iter().all(|&b| !b),
            "clean tail after compression"
        );
        catalytic.splice(i * n, &Bits::from_bools(region[..n].to_vec()));
    }
    // shift the payloads together; the freed zeros gather at the end
    for i in 0..n {
        for t in 0..n - 1 {
            let v = catalytic.get(i * n + t);
            catalytic.set(i * (n - 1) + t, v);
        }
    }
    for t in n * (n - 1)..n * n {
        catalytic.set(t, false);
    }

    // brute-force scan over the freed space
    let mut witness = None;
    for y in 0u64..1 << n {
        ledger.count_step();
        let cand = Bits::from_u64(y, n);
        if round_trip_fails(&cand) {
            witness = Some(cand);
            break;
        }
    }
    let witness = witness.expect("a lossy pair always has a witness by pigeonhole");

    // unshift, then decompress every block back through D
    for i in (0..n).rev() {
        for t in (0..n - 1).rev() {
            let v = catalytic.get(i * (n - 1) + t);
            catalytic.set(i * n + t, v);
        }
        catalytic.set(i * n + n - 1, false);
    }
    for i in 0..n {
        let mut region: Vec<bool> = catalytic.slice(i * n, n).as_slice().to_vec();
        region.resize(d.width, false);
        eval_region_inplace(d, &mut region, ledger)?;
        catalytic.splice(i * n, &Bits::from_bools(region[..n].to_vec()));
    }
    Ok(witness)
}
