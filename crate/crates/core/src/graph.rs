//! Decorated graphs, orientations, and canonical forms.
//!
//! A decorated graph is a fixed-point-free involution on a dart set together
//! with a vertex structure on each vertex's darts. An orientation is a total
//! order on the vertices plus a direction for every edge; reordering two
//! vertices or flipping one edge reverses the orientation's sign. Loops are
//! directed like any other edge, so an automorphism that swaps a loop's two
//! darts is orientation-reversing.
//!
//! `canonical_class` returns a relabeling-invariant encoding, the sign
//! relating the input presentation to the canonical one, and whether the
//! class is zero (some automorphism reverses orientation). The search is a
//! backtracking minimization over vertex orders and admissible per-vertex
//! dart orders, pruned by lexicographic comparison of partial encodings;
//! that is adequate for the desk-scale graphs this crate targets.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::species::{Dart, Payload, SpeciesId, VertexStructure};
use crate::{Error, Result};

/// Sorted dart pair identifying an edge.
pub type EdgeKey = (Dart, Dart);

pub fn edge_key(a: Dart, b: Dart) -> EdgeKey {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// A graph whose vertices carry species structures on their darts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecoratedGraph {
    species: SpeciesId,
    vertices: Vec<VertexStructure>,
    /// Sorted list of sorted dart pairs.
    edges: Vec<EdgeKey>,
    dart_vertex: BTreeMap<Dart, usize>,
    partner: BTreeMap<Dart, Dart>,
}

impl DecoratedGraph {
    /// Validates and builds a graph. Every dart must appear in exactly one
    /// vertex and one edge; the involution may not fix a dart.
    pub fn new(
        species: SpeciesId,
        vertices: Vec<VertexStructure>,
        edges: Vec<(Dart, Dart)>,
    ) -> Result<Self> {
        let fail = |msg: String| Err(Error::MalformedGraph(msg));
        let mut dart_vertex = BTreeMap::new();
        for (v, s) in vertices.iter().enumerate() {
            if s.species != species {
                return fail(format!("vertex {v} has a different species"));
            }
            for &d in &s.darts {
                if dart_vertex.insert(d, v).is_some() {
                    return fail(format!("dart {d} appears on two vertices"));
                }
            }
        }
        let mut partner = BTreeMap::new();
        let mut norm_edges = Vec::with_capacity(edges.len());
        for &(a, b) in &edges {
            if a == b {
                return fail(format!("edge fixes dart {a}"));
            }
            if !dart_vertex.contains_key(&a) || !dart_vertex.contains_key(&b) {
                return fail("edge uses a dart not on any vertex".into());
            }
            if partner.insert(a, b).is_some() || partner.insert(b, a).is_some() {
                return fail("dart on two edges".into());
            }
            norm_edges.push(edge_key(a, b));
        }
        if partner.len() != dart_vertex.len() {
            return fail("unmatched darts remain".into());
        }
        norm_edges.sort_unstable();
        Ok(DecoratedGraph { species, vertices, edges: norm_edges, dart_vertex, partner })
    }

    /// The empty graph (unit of disjoint union).
    pub fn empty(species: SpeciesId) -> Self {
        DecoratedGraph {
            species,
            vertices: vec![],
            edges: vec![],
            dart_vertex: BTreeMap::new(),
            partner: BTreeMap::new(),
        }
    }

    pub fn species(&self) -> &SpeciesId {
        &self.species
    }

    pub fn vertices(&self) -> &[VertexStructure] {
        &self.vertices
    }

    pub fn edges(&self) -> &[EdgeKey] {
        &self.edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_of(&self, d: Dart) -> usize {
        self.dart_vertex[&d]
    }

    pub fn partner(&self, d: Dart) -> Dart {
        self.partner[&d]
    }

    pub fn is_loop(&self, e: EdgeKey) -> bool {
        self.vertex_of(e.0) == self.vertex_of(e.1)
    }

    /// First Betti number plus components minus one is not what we track;
    /// this is the genus-like rank r = e - k + 1 from the Euler
    /// characteristic, independent of the component count.
    pub fn rank(&self) -> i64 {
        self.num_edges() as i64 - self.num_vertices() as i64 + 1
    }

    pub fn is_connected(&self) -> bool {
        let k = self.num_vertices();
        if k <= 1 {
            return true;
        }
        let mut uf: Vec<usize> = (0..k).collect();
        fn find(uf: &mut Vec<usize>, x: usize) -> usize {
            if uf[x] != x {
                let r = find(uf, uf[x]);
                uf[x] = r;
            }
            uf[x]
        }
        for &(a, b) in &self.edges {
            let (ra, rb) = (find(&mut uf, self.vertex_of(a)), find(&mut uf, self.vertex_of(b)));
            uf[ra] = rb;
        }
        let r0 = find(&mut uf, 0);
        (1..k).all(|v| find(&mut uf, v) == r0)
    }

    /// All vertices fake (every one a suspension element).
    pub fn all_fake(&self) -> bool {
        self.vertices.iter().all(|v| v.is_fake())
    }

    pub fn all_real(&self) -> bool {
        self.vertices.iter().all(|v| !v.is_fake())
    }

    pub fn all_bivalent(&self) -> bool {
        self.vertices.iter().all(|v| v.valence() == 2)
    }

    pub fn max_valence(&self) -> usize {
        self.vertices.iter().map(|v| v.valence()).max().unwrap_or(0)
    }

    /// Relabels darts through an injective map; vertex order is preserved.
    pub fn relabel(&self, map: impl Fn(Dart) -> Dart + Copy) -> Result<Self> {
        let vertices = self.vertices.iter().map(|v| v.relabel(map)).collect();
        let edges = self.edges.iter().map(|&(a, b)| (map(a), map(b))).collect();
        DecoratedGraph::new(self.species.clone(), vertices, edges)
    }
}

/// Membership predicate selecting one of the standard chain groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ComplexFilter {
    /// All graphs.
    Full,
    /// Connected graphs.
    Connected,
    /// Connected, all vertices real, at least one vertex of valence > 2.
    QGraph,
    /// Connected, all vertices bivalent.
    Bivalent,
    /// All vertices fake (not necessarily connected).
    FakeAll,
    /// Connected, all vertices fake.
    Poly,
    /// All vertices bivalent (not necessarily connected).
    TAll,
}

impl ComplexFilter {
    pub fn admits(&self, g: &DecoratedGraph) -> bool {
        match self {
            ComplexFilter::Full => true,
            ComplexFilter::Connected => g.is_connected(),
            ComplexFilter::QGraph => {
                g.is_connected() && g.all_real() && g.max_valence() > 2
            }
            ComplexFilter::Bivalent => g.is_connected() && g.all_bivalent(),
            ComplexFilter::FakeAll => g.all_fake(),
            ComplexFilter::Poly => g.is_connected() && g.all_fake(),
            ComplexFilter::TAll => g.all_bivalent(),
        }
    }

    /// Filters whose members are all connected (single-component bases).
    pub fn connected_only(&self) -> bool {
        matches!(
            self,
            ComplexFilter::Connected
                | ComplexFilter::QGraph
                | ComplexFilter::Bivalent
                | ComplexFilter::Poly
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            ComplexFilter::Full => "full",
            ComplexFilter::Connected => "connected",
            ComplexFilter::QGraph => "qgraph",
            ComplexFilter::Bivalent => "bivalent",
            ComplexFilter::FakeAll => "fake",
            ComplexFilter::Poly => "poly",
            ComplexFilter::TAll => "t",
        }
    }

    pub fn parse(s: &str) -> Option<ComplexFilter> {
        Some(match s {
            "full" => ComplexFilter::Full,
            "connected" => ComplexFilter::Connected,
            "qgraph" => ComplexFilter::QGraph,
            "bivalent" => ComplexFilter::Bivalent,
            "fake" => ComplexFilter::FakeAll,
            "poly" => ComplexFilter::Poly,
            "t" => ComplexFilter::TAll,
            _ => return None,
        })
    }
}

impl fmt::Display for ComplexFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Vertex order plus a direction for every edge (loops included).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Orientation {
    /// Permutation of vertex indices; earlier = smaller label.
    pub vertex_order: Vec<usize>,
    /// edge key -> (tail, head).
    pub directions: BTreeMap<EdgeKey, (Dart, Dart)>,
}

impl Orientation {
    /// Vertices in index order, every edge directed low dart to high dart.
    pub fn standard(g: &DecoratedGraph) -> Self {
        Orientation {
            vertex_order: (0..g.num_vertices()).collect(),
            directions: g.edges().iter().map(|&e| (e, e)).collect(),
        }
    }

    pub fn validate(&self, g: &DecoratedGraph) -> Result<()> {
        let k = g.num_vertices();
        let mut seen = vec![false; k];
        if self.vertex_order.len() != k {
            return Err(Error::MalformedGraph("vertex order has wrong length".into()));
        }
        for &v in &self.vertex_order {
            if v >= k || seen[v] {
                return Err(Error::MalformedGraph("vertex order is not a permutation".into()));
            }
            seen[v] = true;
        }
        if self.directions.len() != g.num_edges() {
            return Err(Error::MalformedGraph("directions must cover exactly the edges".into()));
        }
        for (&e, &(t, h)) in &self.directions {
            if g.edges().binary_search(&e).is_err() || edge_key(t, h) != e {
                return Err(Error::MalformedGraph("direction on a non-edge".into()));
            }
        }
        Ok(())
    }

    pub fn tail(&self, e: EdgeKey) -> Dart {
        self.directions[&e].0
    }

    pub fn head(&self, e: EdgeKey) -> Dart {
        self.directions[&e].1
    }
}

/// A graph together with an orientation representative.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Oriented {
    pub graph: DecoratedGraph,
    pub orientation: Orientation,
}

impl Oriented {
    pub fn standard(graph: DecoratedGraph) -> Self {
        let orientation = Orientation::standard(&graph);
        Oriented { graph, orientation }
    }

    pub fn validate(&self) -> Result<()> {
        self.orientation.validate(&self.graph)
    }
}

/// Relabeling-invariant identifier of an oriented-graph class.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Encoding(pub Vec<u8>);

impl fmt::Debug for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Encoding({self})")
    }
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// Result of canonicalization: class id, the sign relating the input
/// presentation to the canonical representative, and zero detection.
#[derive(Clone, Debug)]
pub struct SignedClass {
    pub encoding: Encoding,
    /// +1 or -1; input = sign * canonical representative. Irrelevant when
    /// `is_zero`.
    pub sign: i8,
    /// True when an automorphism reverses orientation, forcing the class to
    /// equal its own negative.
    pub is_zero: bool,
    /// Canonical representative: vertices labeled in canonical order, darts
    /// densely renumbered, every edge directed low to high.
    pub rep: Arc<Oriented>,
}

/// Parity of a permutation given as images; +1 or -1.
pub fn permutation_sign(perm: &[usize]) -> i8 {
    let n = perm.len();
    let mut seen = vec![false; n];
    let mut sign = 1i8;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut x = start;
        while !seen[x] {
            seen[x] = true;
            x = perm[x];
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

/// Dense view of a graph for the search algorithms: darts renumbered
/// 0..2e in sorted-id order.
pub(crate) struct Dense {
    pub dart_ids: Vec<Dart>,
    pub partner: Vec<usize>,
    pub vertex_of: Vec<usize>,
    pub vertex_darts: Vec<Vec<usize>>,
    /// Per-vertex invariant bytes: valence plus a payload class key that
    /// any structure-preserving bijection must preserve.
    pub vertex_inv: Vec<Vec<u8>>,
    /// Loops at each vertex; preserved by isomorphisms but not by matching
    /// overlays.
    pub loop_count: Vec<u8>,
    /// Admissible dart orders per vertex (dense indices), one per
    /// structure-preserving way to order the darts. For cc this is a single
    /// placeholder; cc slots are assigned greedily instead.
    pub orders: Vec<Vec<Vec<usize>>>,
    pub is_cc: bool,
}

pub(crate) fn dense(g: &DecoratedGraph) -> Dense {
    let dart_ids: Vec<Dart> = g.dart_vertex.keys().copied().collect();
    let idx = |d: Dart| dart_ids.binary_search(&d).unwrap();
    let n = dart_ids.len();
    let mut partner = vec![0usize; n];
    let mut vertex_of = vec![0usize; n];
    for (i, &d) in dart_ids.iter().enumerate() {
        partner[i] = idx(g.partner(d));
        vertex_of[i] = g.vertex_of(d);
    }
    let k = g.num_vertices();
    let mut vertex_darts = vec![Vec::new(); k];
    for (i, &v) in vertex_of.iter().enumerate() {
        vertex_darts[v].push(i);
    }
    let is_cc = matches!(g.species(), SpeciesId::Cc);
    let mut orders = Vec::with_capacity(k);
    let mut vertex_inv = Vec::with_capacity(k);
    let mut loop_count = Vec::with_capacity(k);
    for (v, s) in g.vertices().iter().enumerate() {
        orders.push(admissible_orders(s, &idx));
        let mut inv = vec![s.valence() as u8];
        inv.extend(payload_class_key(s));
        vertex_inv.push(inv);
        let loops = vertex_darts[v]
            .iter()
            .filter(|&&d| vertex_of[partner[d]] == v)
            .count();
        loop_count.push(loops as u8);
    }
    Dense { dart_ids, partner, vertex_of, vertex_darts, vertex_inv, loop_count, orders, is_cc }
}

/// Bytes every isomorphism must preserve at a vertex, independent of dart
/// labels: species content that does not depend on the labeling.
fn payload_class_key(s: &VertexStructure) -> Vec<u8> {
    match (&s.species, &s.payload) {
        (SpeciesId::Group(k), Payload::Group { elem, .. }) => {
            // The unordered pair {g, g*} is label-independent.
            let a = *elem;
            let b = k.star_el(a);
            let (lo, hi) = if k.name(a) <= k.name(b) { (a, b) } else { (b, a) };
            [lo.to_be_bytes(), hi.to_be_bytes()].concat()
        }
        _ => vec![],
    }
}

/// Structure-preserving dart orders for the canonical search, in dense
/// indices. For cc a single empty marker: slots are assigned greedily.
fn admissible_orders(s: &VertexStructure, idx: &impl Fn(Dart) -> usize) -> Vec<Vec<usize>> {
    match &s.payload {
        Payload::Cc => vec![vec![]],
        Payload::Aa(cyc) => {
            let base: Vec<usize> = cyc.iter().map(|&d| idx(d)).collect();
            (0..base.len())
                .map(|r| (0..base.len()).map(|i| base[(r + i) % base.len()]).collect())
                .collect()
        }
        Payload::Kk(_) => {
            let mut darts: Vec<usize> = s.darts.iter().map(|&d| idx(d)).collect();
            let mut out = Vec::new();
            permute_indices(&mut darts, 0, &mut |p| out.push(p.to_vec()));
            out
        }
        Payload::Group { .. } => {
            let a = idx(s.darts[0]);
            let b = idx(s.darts[1]);
            vec![vec![a, b], vec![b, a]]
        }
    }
}

fn permute_indices(items: &mut [usize], k: usize, f: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        f(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute_indices(items, k + 1, f);
        items.swap(k, i);
    }
}

/// Payload bytes of a vertex relative to a chosen dense dart order.
fn payload_bytes_for_order(s: &VertexStructure, dense: &Dense, order: &[usize]) -> Vec<u8> {
    let local = |d: Dart| {
        let di = dense.dart_ids.binary_search(&d).unwrap();
        order.iter().position(|&x| x == di).unwrap() as u8
    };
    s.payload_bytes(local)
}

const ENC_VERSION: u8 = 1;
const ENTRY_NONE: [u8; 2] = [0xFF, 0xFF];

#[derive(Clone)]
struct SearchState {
    /// canonical position of each vertex, 0xFF = unplaced
    pos_of: Vec<u8>,
    placed: Vec<usize>,
    /// canonical slot of each dense dart, 0xFF = unassigned
    slot_of: Vec<u8>,
    next_slot: Vec<u8>,
    enc: Vec<u8>,
    /// Already strictly below the best encoding at an earlier byte, so
    /// byte comparisons against `best` at the current offset are void.
    below_best: bool,
}

struct Searcher<'a> {
    d: &'a Dense,
    g: &'a DecoratedGraph,
    best: Option<Vec<u8>>,
    best_state: Option<SearchState>,
}

impl<'a> Searcher<'a> {
    /// Chunk for placing vertex `v` next with dart order `order` (empty =
    /// cc greedy). Returns the mutated state on success, or None when the
    /// branch is already lexicographically worse than `best`.
    fn try_place(&self, st: &SearchState, v: usize, order: &[usize]) -> Option<SearchState> {
        let mut st = st.clone();
        let m = st.placed.len() as u8;
        st.pos_of[v] = m;
        st.placed.push(v);
        let s = &self.g.vertices()[v];
        let start = st.enc.len();
        st.enc.push(s.valence() as u8);
        if self.d.is_cc {
            self.cc_entries(&mut st, v, m);
        } else {
            st.enc.extend(payload_bytes_for_order(s, self.d, order));
            for (slot, &x) in order.iter().enumerate() {
                st.slot_of[x] = slot as u8;
            }
            st.next_slot[v] = order.len() as u8;
            for &x in order {
                let y = self.d.partner[x];
                let vy = self.d.vertex_of[y];
                let posy = st.pos_of[vy];
                if posy == 0xFF {
                    st.enc.extend(ENTRY_NONE);
                } else if vy == v && st.slot_of[y] != 0xFF && st.slot_of[y] > st.slot_of[x] {
                    // Same-vertex partner that comes later in the order:
                    // emit the pair once, at the later dart.
                    st.enc.extend(ENTRY_NONE);
                } else {
                    let ty = st.slot_of[y];
                    if ty == 0xFF {
                        // Partner at an earlier cc vertex without a slot yet.
                        let t = st.next_slot[vy];
                        st.slot_of[y] = t;
                        st.next_slot[vy] += 1;
                        st.enc.extend([posy, t]);
                    } else {
                        st.enc.extend([posy, ty]);
                    }
                }
            }
        }
        // Lexicographic pruning against the best full encoding; only valid
        // while this branch byte-matches the best prefix.
        if !st.below_best {
            if let Some(best) = &self.best {
                let upto = st.enc.len().min(best.len());
                match st.enc[start..upto].cmp(&best[start..upto]) {
                    Ordering::Greater => return None,
                    Ordering::Less => st.below_best = true,
                    Ordering::Equal => {}
                }
            }
        }
        Some(st)
    }

    /// Greedy slot assignment and entries for a cc vertex: resolved
    /// partners first in sorted key order, then loops, then unresolved.
    fn cc_entries(&self, st: &mut SearchState, v: usize, m: u8) {
        let darts = &self.d.vertex_darts[v];
        let mut resolved: Vec<([u8; 2], usize)> = Vec::new();
        let mut loops: Vec<(usize, usize)> = Vec::new();
        let mut pending: Vec<usize> = Vec::new();
        for &x in darts {
            let y = self.d.partner[x];
            let vy = self.d.vertex_of[y];
            if vy == v {
                if x < y {
                    loops.push((x, y));
                }
            } else if st.pos_of[vy] != 0xFF {
                let posy = st.pos_of[vy];
                let ty = if st.slot_of[y] != 0xFF {
                    st.slot_of[y]
                } else {
                    let t = st.next_slot[vy];
                    st.slot_of[y] = t;
                    st.next_slot[vy] += 1;
                    t
                };
                resolved.push(([posy, ty], x));
            } else {
                pending.push(x);
            }
        }
        resolved.sort_unstable();
        let mut slot = 0u8;
        for (entry, x) in &resolved {
            st.slot_of[*x] = slot;
            slot += 1;
            st.enc.extend(entry);
        }
        for &(x, y) in &loops {
            st.slot_of[x] = slot;
            st.slot_of[y] = slot + 1;
            st.enc.extend(ENTRY_NONE);
            st.enc.extend([m, slot]);
            slot += 2;
        }
        st.next_slot[v] = slot;
        for _ in &pending {
            st.enc.extend(ENTRY_NONE);
        }
        // Pending darts receive slots later, when their partners resolve
        // them from the other side.
    }

    fn run(&mut self, st: SearchState) {
        if st.placed.len() == self.g.num_vertices() {
            let better = match &self.best {
                None => true,
                Some(best) => st.enc < *best,
            };
            if better {
                self.best = Some(st.enc.clone());
                self.best_state = Some(st);
            }
            return;
        }
        // All (vertex, order) branches; keep those minimal in chunk bytes.
        let mut branches: Vec<(Vec<u8>, SearchState)> = Vec::new();
        let mut min_chunk: Option<Vec<u8>> = None;
        let base = st.enc.len();
        for v in 0..self.g.num_vertices() {
            if st.pos_of[v] != 0xFF {
                continue;
            }
            for order in &self.d.orders[v] {
                if let Some(next) = self.try_place(&st, v, order) {
                    let chunk = next.enc[base..].to_vec();
                    match &min_chunk {
                        None => {
                            min_chunk = Some(chunk.clone());
                            branches.push((chunk, next));
                        }
                        Some(mc) => match chunk.cmp(mc) {
                            Ordering::Less => {
                                min_chunk = Some(chunk.clone());
                                branches.retain(|(c, _)| *c <= chunk);
                                branches.push((chunk, next));
                            }
                            Ordering::Equal => branches.push((chunk, next)),
                            Ordering::Greater => {}
                        },
                    }
                }
            }
        }
        let mc = match min_chunk {
            Some(mc) => mc,
            None => return,
        };
        for (chunk, next) in branches {
            if chunk == mc {
                self.run(next);
            }
        }
    }
}

fn encoding_header(g: &DecoratedGraph) -> Vec<u8> {
    let mut h = vec![b'G', ENC_VERSION, g.species().tag()];
    if let SpeciesId::Group(k) = g.species() {
        h.extend((k.order() as u16).to_be_bytes());
    }
    h.push(g.num_vertices() as u8);
    h.push(g.num_edges() as u8);
    h
}

/// Canonicalizes an oriented decorated graph.
pub fn canonical_class(input: &Oriented) -> Result<SignedClass> {
    input.validate()?;
    let g = &input.graph;
    if g.num_vertices() > 200 || g.num_edges() > 250 {
        return Err(Error::ResourceLimit("graph too large for canonicalization".into()));
    }
    if g.num_vertices() == 0 {
        let rep = Arc::new(Oriented::standard(DecoratedGraph::empty(g.species().clone())));
        return Ok(SignedClass {
            encoding: Encoding(encoding_header(g)),
            sign: 1,
            is_zero: false,
            rep,
        });
    }
    let d = dense(g);
    let n = d.dart_ids.len();
    let mut searcher = Searcher { d: &d, g, best: None, best_state: None };
    let st = SearchState {
        pos_of: vec![0xFF; g.num_vertices()],
        placed: vec![],
        slot_of: vec![0xFF; n],
        next_slot: vec![0; g.num_vertices()],
        enc: Vec::with_capacity(n * 2 + g.num_vertices() * 2),
        below_best: false,
    };
    searcher.run(st);
    let won = searcher.best_state.expect("nonempty graph always canonicalizes");
    debug_assert!(won.slot_of.iter().all(|&s| s != 0xFF));

    let mut encoding = encoding_header(g);
    encoding.extend(&won.enc);

    let rep = build_canonical_rep(g, &d, &won);
    let sign = completion_sign(g, &d, &input.orientation, &won);
    let is_zero = has_orientation_reversing_automorphism(g, &d);
    Ok(SignedClass { encoding: Encoding(encoding), sign, is_zero, rep: Arc::new(rep) })
}

/// Global canonical dart id for (vertex position, slot).
fn canonical_dart_id(offsets: &[u32], pos: u8, slot: u8) -> Dart {
    offsets[pos as usize] + slot as u32
}

fn completion_sign(
    _g: &DecoratedGraph,
    d: &Dense,
    orientation: &Orientation,
    won: &SearchState,
) -> i8 {
    // Vertex permutation: input order position -> canonical position.
    let perm: Vec<usize> = orientation
        .vertex_order
        .iter()
        .map(|&v| won.pos_of[v] as usize)
        .collect();
    let mut sign = permutation_sign(&perm);
    for &(tail, head) in orientation.directions.values() {
        let ti = d.dart_ids.binary_search(&tail).unwrap();
        let hi = d.dart_ids.binary_search(&head).unwrap();
        let tkey = (won.pos_of[d.vertex_of[ti]], won.slot_of[ti]);
        let hkey = (won.pos_of[d.vertex_of[hi]], won.slot_of[hi]);
        if tkey > hkey {
            sign = -sign;
        }
    }
    sign
}

fn build_canonical_rep(g: &DecoratedGraph, d: &Dense, won: &SearchState) -> Oriented {
    let k = g.num_vertices();
    let mut valence_at = vec![0u32; k];
    for v in 0..k {
        valence_at[won.pos_of[v] as usize] = g.vertices()[v].valence() as u32;
    }
    let mut offsets = vec![0u32; k];
    for p in 1..k {
        offsets[p] = offsets[p - 1] + valence_at[p - 1];
    }
    let new_id = |dense_idx: usize| {
        canonical_dart_id(&offsets, won.pos_of[d.vertex_of[dense_idx]], won.slot_of[dense_idx])
    };
    let mut vertices: Vec<Option<VertexStructure>> = vec![None; k];
    for (v, s) in g.vertices().iter().enumerate() {
        let relabeled = s.relabel(|dart| new_id(d.dart_ids.binary_search(&dart).unwrap()));
        vertices[won.pos_of[v] as usize] = Some(relabeled);
    }
    let vertices: Vec<VertexStructure> = vertices.into_iter().map(Option::unwrap).collect();
    let edges: Vec<(Dart, Dart)> = g
        .edges()
        .iter()
        .map(|&(a, b)| {
            let na = new_id(d.dart_ids.binary_search(&a).unwrap());
            let nb = new_id(d.dart_ids.binary_search(&b).unwrap());
            (na, nb)
        })
        .collect();
    let graph = DecoratedGraph::new(g.species().clone(), vertices, edges)
        .expect("canonical relabeling preserves validity");
    Oriented::standard(graph)
}

/// Disjoint union at the presentation level: `b`'s darts are shifted above
/// `a`'s, `a`'s vertices come first in both the id space and the vertex
/// order, and every edge keeps its direction.
pub fn union_graphs(a: &Oriented, b: &Oriented) -> Result<Oriented> {
    if a.graph.species() != b.graph.species() {
        return Err(Error::SpeciesMismatch);
    }
    let offset = a
        .graph
        .edges()
        .iter()
        .flat_map(|&(x, y)| [x, y])
        .max()
        .map_or(0, |m| m + 1);
    let shifted = b.graph.relabel(|d| d + offset)?;
    let mut vertices = a.graph.vertices().to_vec();
    vertices.extend(shifted.vertices().iter().cloned());
    let mut edges: Vec<(Dart, Dart)> = a.graph.edges().to_vec();
    edges.extend(shifted.edges().iter().copied());
    let graph = DecoratedGraph::new(a.graph.species().clone(), vertices, edges)?;
    let kv = a.graph.num_vertices();
    let mut vertex_order = a.orientation.vertex_order.clone();
    vertex_order.extend(b.orientation.vertex_order.iter().map(|&v| v + kv));
    let mut directions = a.orientation.directions.clone();
    for (&(x, y), &(t, h)) in &b.orientation.directions {
        directions.insert((x + offset, y + offset), (t + offset, h + offset));
    }
    let oriented = Oriented { graph, orientation: Orientation { vertex_order, directions } };
    oriented.validate()?;
    Ok(oriented)
}

/// A dart bijection from one graph onto another, recorded densely.
#[derive(Clone, Debug)]
pub struct DartBijection {
    /// image vertex per source vertex
    pub vertex_map: Vec<usize>,
    /// image dense dart index per source dense dart index
    pub dart_map: Vec<usize>,
}

/// Enumerates decoration-preserving isomorphisms (edge-compatible dart
/// bijections) from `g1` onto `g2`. Call with the same graph twice for the
/// automorphism group. `stop_early` aborts after the first hit for which
/// `f` returns true.
pub(crate) fn for_each_isomorphism(
    g1: &DecoratedGraph,
    d1: &Dense,
    g2: &DecoratedGraph,
    d2: &Dense,
    f: &mut impl FnMut(&DartBijection) -> bool,
) {
    for_each_bijection(g1, d1, g2, d2, true, f)
}

/// Like `for_each_isomorphism` but without requiring edges to map to
/// edges: enumerates the structure-preserving vertex overlays that the
/// matching pairing sums over.
pub(crate) fn for_each_matching_bijection(
    g1: &DecoratedGraph,
    d1: &Dense,
    g2: &DecoratedGraph,
    d2: &Dense,
    f: &mut impl FnMut(&DartBijection) -> bool,
) {
    for_each_bijection(g1, d1, g2, d2, false, f)
}

fn for_each_bijection(
    g1: &DecoratedGraph,
    d1: &Dense,
    g2: &DecoratedGraph,
    d2: &Dense,
    check_edges: bool,
    f: &mut impl FnMut(&DartBijection) -> bool,
) {
    if g1.species() != g2.species()
        || g1.num_vertices() != g2.num_vertices()
        || g1.num_edges() != g2.num_edges()
    {
        return;
    }
    let k = g1.num_vertices();
    if k == 0 {
        f(&DartBijection { vertex_map: vec![], dart_map: vec![] });
        return;
    }
    // Order source vertices to keep mapped neighbors close: BFS from 0.
    let mut order = Vec::with_capacity(k);
    let mut seen = vec![false; k];
    for root in 0..k {
        if seen[root] {
            continue;
        }
        let mut queue = std::collections::VecDeque::from([root]);
        seen[root] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &x in &d1.vertex_darts[v] {
                let w = d1.vertex_of[d1.partner[x]];
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    let mut vmap = vec![usize::MAX; k];
    let mut used = vec![false; k];
    let mut dmap = vec![usize::MAX; d1.dart_ids.len()];
    let mut stop = false;
    iso_dfs(
        g1, d1, g2, d2, check_edges, &order, 0, &mut vmap, &mut used, &mut dmap, f, &mut stop,
    );
}

#[allow(clippy::too_many_arguments)]
fn iso_dfs(
    g1: &DecoratedGraph,
    d1: &Dense,
    g2: &DecoratedGraph,
    d2: &Dense,
    check_edges: bool,
    order: &[usize],
    depth: usize,
    vmap: &mut Vec<usize>,
    used: &mut Vec<bool>,
    dmap: &mut Vec<usize>,
    f: &mut impl FnMut(&DartBijection) -> bool,
    stop: &mut bool,
) {
    if *stop {
        return;
    }
    if depth == order.len() {
        if f(&DartBijection { vertex_map: vmap.clone(), dart_map: dmap.clone() }) {
            *stop = true;
        }
        return;
    }
    let v = order[depth];
    for w in 0..g2.num_vertices() {
        if used[w] || d1.vertex_inv[v] != d2.vertex_inv[w] {
            continue;
        }
        if check_edges && d1.loop_count[v] != d2.loop_count[w] {
            continue;
        }
        if check_edges && matches!(g1.vertices()[v].payload, Payload::Cc) {
            // Any dart bijection preserves a cc decoration, so enumerating
            // them wholesale is factorial in the valence; assign darts one
            // at a time instead, pruning on partner consistency.
            vmap[v] = w;
            used[w] = true;
            cc_dart_assign(
                g1, d1, g2, d2, order, depth, v, w, 0, vmap, used, dmap, f, stop,
            );
            vmap[v] = usize::MAX;
            used[w] = false;
            if *stop {
                return;
            }
            continue;
        }
        for phi in structure_bijections(&g1.vertices()[v], d1, &g2.vertices()[w], d2) {
            // Edge compatibility against everything already mapped.
            let ok = !check_edges
                || phi.iter().all(|&(x, y)| {
                    let px = d1.partner[x];
                    let qy = d2.partner[y];
                    let vx = d1.vertex_of[px];
                    if vx == v || vmap[vx] != usize::MAX {
                        // Partner dart is mapped (same vertex: by phi itself).
                        let mapped = if vx == v {
                            phi.iter().find(|&&(a, _)| a == px).map(|&(_, b)| b)
                        } else if dmap[px] != usize::MAX {
                            Some(dmap[px])
                        } else {
                            None
                        };
                        match mapped {
                            Some(mp) => mp == qy,
                            None => true,
                        }
                    } else {
                        // Partner unmapped; image partner must also be unmapped.
                        d2.vertex_of[qy] == w || vmap.iter().all(|&m| m != d2.vertex_of[qy])
                    }
                });
            if !ok {
                continue;
            }
            vmap[v] = w;
            used[w] = true;
            for &(x, y) in &phi {
                dmap[x] = y;
            }
            iso_dfs(
                g1, d1, g2, d2, check_edges, order, depth + 1, vmap, used, dmap, f, stop,
            );
            for &(x, _) in &phi {
                dmap[x] = usize::MAX;
            }
            vmap[v] = usize::MAX;
            used[w] = false;
            if *stop {
                return;
            }
        }
    }
}

/// Assigns the darts of cc vertex v (dense indices) to darts of w one at
/// a time, enforcing partner consistency with everything mapped so far,
/// then continues the vertex search.
#[allow(clippy::too_many_arguments)]
fn cc_dart_assign(
    g1: &DecoratedGraph,
    d1: &Dense,
    g2: &DecoratedGraph,
    d2: &Dense,
    order: &[usize],
    depth: usize,
    v: usize,
    w: usize,
    i: usize,
    vmap: &mut Vec<usize>,
    used: &mut Vec<bool>,
    dmap: &mut Vec<usize>,
    f: &mut impl FnMut(&DartBijection) -> bool,
    stop: &mut bool,
) {
    if *stop {
        return;
    }
    let vd = &d1.vertex_darts[v];
    if i == vd.len() {
        iso_dfs(g1, d1, g2, d2, true, order, depth + 1, vmap, used, dmap, f, stop);
        return;
    }
    let x = vd[i];
    let px = d1.partner[x];
    for &y in &d2.vertex_darts[w] {
        if vd[..i].iter().any(|&x2| dmap[x2] == y) {
            continue;
        }
        let qy = d2.partner[y];
        let ok = if dmap[px] != usize::MAX {
            dmap[px] == qy
        } else {
            // Partner not mapped yet: its eventual image lives at the
            // image of its vertex, which must still be available.
            let vq = d2.vertex_of[qy];
            vq == w || vmap.iter().all(|&m| m != vq)
        };
        if !ok {
            continue;
        }
        dmap[x] = y;
        cc_dart_assign(
            g1, d1, g2, d2, order, depth, v, w, i + 1, vmap, used, dmap, f, stop,
        );
        dmap[x] = usize::MAX;
        if *stop {
            return;
        }
    }
}

/// Structure-preserving dart bijections between two vertices, as dense
/// index pairs (source, image).
pub(crate) fn structure_bijections(
    a: &VertexStructure,
    da: &Dense,
    b: &VertexStructure,
    db: &Dense,
) -> Vec<Vec<(usize, usize)>> {
    if a.species != b.species || a.valence() != b.valence() {
        return vec![];
    }
    let ia = |d: Dart| da.dart_ids.binary_search(&d).unwrap();
    let ib = |d: Dart| db.dart_ids.binary_search(&d).unwrap();
    match (&a.payload, &b.payload) {
        (Payload::Cc, Payload::Cc) => {
            let src: Vec<usize> = a.darts.iter().map(|&d| ia(d)).collect();
            let mut dst: Vec<usize> = b.darts.iter().map(|&d| ib(d)).collect();
            let mut out = Vec::new();
            permute_indices(&mut dst, 0, &mut |p| {
                out.push(src.iter().copied().zip(p.iter().copied()).collect())
            });
            out
        }
        (Payload::Aa(ca), Payload::Aa(cb)) => {
            let sa: Vec<usize> = ca.iter().map(|&d| ia(d)).collect();
            let sb: Vec<usize> = cb.iter().map(|&d| ib(d)).collect();
            (0..sb.len())
                .map(|r| {
                    (0..sa.len())
                        .map(|i| (sa[i], sb[(i + r) % sb.len()]))
                        .collect()
                })
                .collect()
        }
        (Payload::Kk(pa), Payload::Kk(pb)) => {
            // All bijections matching chords to chords, in both chord
            // directions.
            let mut out = Vec::new();
            let mut chord_perm: Vec<usize> = (0..pb.len()).collect();
            let mut all_perms = Vec::new();
            permute_indices(&mut chord_perm, 0, &mut |p| all_perms.push(p.to_vec()));
            for perm in all_perms {
                // Each chord can map straight or crossed.
                let c = pa.len();
                for mask in 0u32..(1 << c) {
                    let mut map = Vec::with_capacity(2 * c);
                    for (i, &(x, y)) in pa.iter().enumerate() {
                        let (u, v) = pb[perm[i]];
                        if mask >> i & 1 == 0 {
                            map.push((ia(x), ib(u)));
                            map.push((ia(y), ib(v)));
                        } else {
                            map.push((ia(x), ib(v)));
                            map.push((ia(y), ib(u)));
                        }
                    }
                    out.push(map);
                }
            }
            out
        }
        (Payload::Group { .. }, Payload::Group { .. }) => {
            let (a0, a1) = (a.darts[0], a.darts[1]);
            let (b0, b1) = (b.darts[0], b.darts[1]);
            let mut out = Vec::new();
            // A bijection is admissible when the group element read from
            // the image tail matches the one read from the source tail.
            if a.group_read_from(a0) == b.group_read_from(b0) {
                out.push(vec![(ia(a0), ib(b0)), (ia(a1), ib(b1))]);
            }
            if a.group_read_from(a0) == b.group_read_from(b1) {
                out.push(vec![(ia(a0), ib(b1)), (ia(a1), ib(b0))]);
            }
            out
        }
        _ => vec![],
    }
}

/// Orientation sign of an automorphism of `g` with respect to any single
/// orientation (independent of the choice).
pub(crate) fn automorphism_sign(g: &DecoratedGraph, d: &Dense, auto: &DartBijection) -> i8 {
    let perm: Vec<usize> = (0..g.num_vertices()).map(|v| auto.vertex_map[v]).collect();
    let mut sign = permutation_sign(&perm);
    // Count edges whose direction is reversed: direct each edge low->high
    // in dense indices and compare with the image edge's direction.
    for &(a, b) in g.edges() {
        let ai = d.dart_ids.binary_search(&a).unwrap();
        let bi = d.dart_ids.binary_search(&b).unwrap();
        // a < b so (ai, bi) is the reference direction.
        if auto.dart_map[ai] > auto.dart_map[bi] {
            sign = -sign;
        }
    }
    sign
}

fn has_orientation_reversing_automorphism(g: &DecoratedGraph, d: &Dense) -> bool {
    let mut found = false;
    for_each_isomorphism(g, d, g, d, &mut |auto| {
        if automorphism_sign(g, d, auto) < 0 {
            found = true;
            true
        } else {
            false
        }
    });
    found
}

/// Order of the decoration-preserving automorphism group.
pub fn automorphism_order(g: &DecoratedGraph) -> usize {
    let d = dense(g);
    let mut count = 0usize;
    for_each_isomorphism(g, &d, g, &d, &mut |_| {
        count += 1;
        false
    });
    count
}

/// Small graphs shared across module tests.
#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;
    use crate::species::GroupPresentation;

    /// Trivial-group polygon with k vertices (k = 1 gives the loop vertex).
    pub(crate) fn polygon(k: usize) -> Oriented {
        let species = SpeciesId::group(GroupPresentation::trivial());
        polygon_labeled(&species, &vec![0; k])
    }

    /// Group polygon with the given element labels. Vertex i has darts
    /// (2i, 2i+1); edges join 2i+1 with 2(i+1 mod k).
    pub(crate) fn polygon_labeled(species: &SpeciesId, labels: &[u16]) -> Oriented {
        let k = labels.len();
        let vertices: Vec<VertexStructure> = labels
            .iter()
            .enumerate()
            .map(|(i, &g)| {
                VertexStructure::new(
                    species.clone(),
                    vec![2 * i as Dart, 2 * i as Dart + 1],
                    Payload::Group { elem: g, tail: 2 * i as Dart },
                )
                .unwrap()
            })
            .collect();
        let edges: Vec<(Dart, Dart)> = (0..k)
            .map(|i| (2 * i as Dart + 1, (2 * ((i + 1) % k)) as Dart))
            .collect();
        Oriented::standard(DecoratedGraph::new(species.clone(), vertices, edges).unwrap())
    }

    pub(crate) fn cc_graph(edges: &[(Dart, Dart)], vertex_darts: &[&[Dart]]) -> Oriented {
        let vertices = vertex_darts
            .iter()
            .map(|darts| VertexStructure::new(SpeciesId::Cc, darts.to_vec(), Payload::Cc).unwrap())
            .collect();
        Oriented::standard(DecoratedGraph::new(SpeciesId::Cc, vertices, edges.to_vec()).unwrap())
    }

    pub(crate) fn cc_triangle() -> Oriented {
        cc_graph(
            &[(1, 2), (3, 4), (5, 0)],
            &[&[0, 1], &[2, 3], &[4, 5]],
        )
    }

    pub(crate) fn cc_theta() -> Oriented {
        cc_graph(&[(0, 3), (1, 4), (2, 5)], &[&[0, 1, 2], &[3, 4, 5]])
    }
}

#[cfg(test)]
mod tests {
    use super::tests_support::*;
    use super::*;
    use crate::species::GroupPresentation;

    #[test]
    fn polygon_automorphisms_are_dihedral() {
        for k in 1..=6 {
            let p = polygon(k);
            assert_eq!(automorphism_order(&p.graph), 2 * k, "k = {k}");
        }
    }

    #[test]
    fn polygon_classes_vanish_except_three_mod_four() {
        for k in 1..=9 {
            let c = canonical_class(&polygon(k)).unwrap();
            assert_eq!(c.is_zero, k % 4 != 3, "k = {k}");
        }
    }

    #[test]
    fn triangle_class_is_nonzero_with_aut_six() {
        let t = cc_triangle();
        let c = canonical_class(&t).unwrap();
        assert!(!c.is_zero);
        assert_eq!(automorphism_order(&t.graph), 6);
    }

    #[test]
    fn fake_square_vanishes() {
        // The cc 4-gon has an orientation-reversing rotation.
        let sq = cc_graph(
            &[(1, 2), (3, 4), (5, 6), (7, 0)],
            &[&[0, 1], &[2, 3], &[4, 5], &[6, 7]],
        );
        assert!(canonical_class(&sq).unwrap().is_zero);
        assert_eq!(automorphism_order(&sq.graph), 8);
    }

    #[test]
    fn theta_has_aut_twelve() {
        assert_eq!(automorphism_order(&cc_theta().graph), 12);
        assert!(!canonical_class(&cc_theta()).unwrap().is_zero);
    }

    #[test]
    fn cc_loop_classes_vanish() {
        // A loop's dart swap is a decoration-preserving automorphism that
        // reverses orientation.
        let g = cc_graph(&[(0, 1)], &[&[0, 1]]);
        assert!(canonical_class(&g).unwrap().is_zero);
    }

    #[test]
    fn two_changes_cancel() {
        // Swapping two vertices in the order and flipping one edge leaves
        // the sign unchanged relative to the standard presentation.
        let t = cc_triangle();
        let base = canonical_class(&t).unwrap();
        let mut o = t.orientation.clone();
        o.vertex_order.swap(0, 1);
        let e = *t.graph.edges().first().unwrap();
        let (tail, head) = o.directions[&e];
        o.directions.insert(e, (head, tail));
        let twisted = Oriented { graph: t.graph.clone(), orientation: o };
        let c = canonical_class(&twisted).unwrap();
        assert_eq!(c.encoding, base.encoding);
        assert_eq!(c.sign, base.sign);
    }

    #[test]
    fn single_change_flips() {
        let t = cc_triangle();
        let base = canonical_class(&t).unwrap();
        let mut o = t.orientation.clone();
        o.vertex_order.swap(1, 2);
        let c = canonical_class(&Oriented { graph: t.graph.clone(), orientation: o }).unwrap();
        assert_eq!(c.encoding, base.encoding);
        assert_eq!(c.sign, -base.sign);
    }

    #[test]
    fn canonical_rep_is_fixed_point() {
        for oriented in [cc_triangle(), cc_theta(), polygon(3), polygon(5)] {
            let c = canonical_class(&oriented).unwrap();
            let again = canonical_class(&c.rep).unwrap();
            assert_eq!(again.encoding, c.encoding);
            assert_eq!(again.sign, 1);
        }
    }

    #[test]
    fn z2_distinguishes_labels() {
        let z2 = SpeciesId::group(GroupPresentation::z2());
        let a = canonical_class(&polygon_labeled(&z2, &[0, 1, 1])).unwrap();
        let b = canonical_class(&polygon_labeled(&z2, &[1, 1, 1])).unwrap();
        assert_ne!(a.encoding, b.encoding);
        // Rotations of the labels give the same class.
        let a2 = canonical_class(&polygon_labeled(&z2, &[1, 0, 1])).unwrap();
        assert_eq!(a.encoding, a2.encoding);
    }

    #[test]
    fn empty_graph_canonicalizes() {
        let e = Oriented::standard(DecoratedGraph::empty(SpeciesId::Cc));
        let c = canonical_class(&e).unwrap();
        assert!(!c.is_zero);
        assert_eq!(c.sign, 1);
    }
}
