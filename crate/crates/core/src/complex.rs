//! Chain vectors and the boundary/coboundary calculus on decorated graphs.
//!
//! Terms are indexed by canonical encodings; a term's representative is the
//! canonical one, so coefficients always refer to the canonical
//! orientation. The edge boundary contracts non-loop edges, the quasi-edge
//! boundary rewires and contracts pairs of darts that do not form an edge,
//! and the coboundary expands ideal edges inside vertices. The combined
//! operator with weight `s` on the edge part ties the two boundaries into
//! one polynomial family.

use std::collections::BTreeMap;
use std::ops::Neg;
use std::sync::Arc;

use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::graph::{
    canonical_class, edge_key, ComplexFilter, DecoratedGraph, EdgeKey, Encoding, Orientation,
    Oriented, SignedClass,
};
use crate::species::{Dart, VertexStructure};
use crate::{Error, Int, IntPoly, Result};

/// Sparse linear combination of graph classes.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainVector<T> {
    terms: BTreeMap<Encoding, (T, Arc<Oriented>)>,
}

impl<T> Default for ChainVector<T> {
    fn default() -> Self {
        ChainVector { terms: BTreeMap::new() }
    }
}

impl<T> ChainVector<T>
where
    T: Clone + Zero + Neg<Output = T>,
{
    pub fn new() -> Self {
        Self::default()
    }

    /// The chain `1 * class` (sign folded in). Zero classes give the zero
    /// chain.
    pub fn from_class(sc: &SignedClass) -> Self
    where
        T: One,
    {
        let mut c = Self::new();
        c.add_scaled_class(T::one(), sc);
        c
    }

    /// Adds `coeff * class`, folding the class's sign into the coefficient
    /// and dropping classes that are zero by symmetry.
    pub fn add_scaled_class(&mut self, coeff: T, sc: &SignedClass) {
        if sc.is_zero || coeff.is_zero() {
            return;
        }
        let signed = if sc.sign < 0 { -coeff } else { coeff };
        self.add_term(signed, &sc.encoding, &sc.rep);
    }

    fn add_term(&mut self, coeff: T, enc: &Encoding, rep: &Arc<Oriented>) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.get_mut(enc) {
            Some((c, _)) => {
                let sum = std::mem::replace(c, T::zero()) + coeff;
                if sum.is_zero() {
                    self.terms.remove(enc);
                } else {
                    *c = sum;
                }
            }
            None => {
                self.terms.insert(enc.clone(), (coeff, Arc::clone(rep)));
            }
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (enc, (c, rep)) in &other.terms {
            self.add_term(c.clone(), enc, rep);
        }
    }

    pub fn sub_assign(&mut self, other: &Self) {
        for (enc, (c, rep)) in &other.terms {
            self.add_term(-c.clone(), enc, rep);
        }
    }

    pub fn add_scaled(&mut self, coeff: &T, other: &Self)
    where
        T: std::ops::Mul<Output = T>,
    {
        for (enc, (c, rep)) in &other.terms {
            self.add_term(coeff.clone() * c.clone(), enc, rep);
        }
    }

    pub fn scale(&mut self, coeff: &T)
    where
        T: std::ops::Mul<Output = T>,
    {
        let old = std::mem::take(&mut self.terms);
        for (enc, (c, rep)) in old {
            self.add_term(coeff.clone() * c, &enc, &rep);
        }
    }

    pub fn negated(&self) -> Self {
        let mut out = Self::new();
        for (enc, (c, rep)) in &self.terms {
            out.add_term(-c.clone(), enc, rep);
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, enc: &Encoding) -> Option<&T> {
        self.terms.get(enc).map(|(c, _)| c)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Encoding, &T, &Arc<Oriented>)> {
        self.terms.iter().map(|(e, (c, r))| (e, c, r))
    }

    pub fn map<U: Clone + Zero + Neg<Output = U>>(
        &self,
        f: impl Fn(&T) -> U,
    ) -> ChainVector<U> {
        let mut out = ChainVector::new();
        for (enc, (c, rep)) in &self.terms {
            out.add_term(f(c), enc, rep);
        }
        out
    }
}

/// Contracts a non-loop edge, merging the endpoint structures by mating.
///
/// With the endpoints at (1-indexed) positions i < j of the vertex order,
/// the merged vertex takes position i, later vertices shift down, and the
/// result carries sign (-1)^j when the edge is directed i -> j, otherwise
/// (-1)^(j+1). The contracted presentation lists vertices in the induced
/// order and keeps all other edge directions.
pub fn contract_edge(o: &Oriented, e: EdgeKey) -> Result<(i8, Oriented)> {
    let g = &o.graph;
    let (da, db) = e;
    let (va, vb) = (g.vertex_of(da), g.vertex_of(db));
    if va == vb {
        return Err(Error::LoopContraction);
    }
    let pos = |v: usize| o.orientation.vertex_order.iter().position(|&x| x == v).unwrap();
    let (pa, pb) = (pos(va), pos(vb));
    let (vi, di, pj, dj_vertex, dj) =
        if pa < pb { (va, da, pb, vb, db) } else { (vb, db, pa, va, da) };
    let j = pj + 1; // 1-indexed label of the later endpoint
    let (tail, _) = o.orientation.directions[&e];
    let mut sign: i8 = if j % 2 == 0 { 1 } else { -1 }; // (-1)^j
    if tail != di {
        sign = -sign; // edge points j -> i: (-1)^(j+1)
    }
    let merged = VertexStructure::mate(&g.vertices()[vi], di, &g.vertices()[dj_vertex], dj)?;
    // New vertex list in the contracted label order.
    let mut vertices = Vec::with_capacity(g.num_vertices() - 1);
    for &v in &o.orientation.vertex_order {
        if v == dj_vertex {
            continue;
        }
        vertices.push(if v == vi { merged.clone() } else { g.vertices()[v].clone() });
    }
    let edges: Vec<(Dart, Dart)> =
        g.edges().iter().copied().filter(|&ek| ek != e).collect();
    let graph = DecoratedGraph::new(g.species().clone(), vertices, edges)?;
    let mut directions = o.orientation.directions.clone();
    directions.remove(&e);
    let orientation =
        Orientation { vertex_order: (0..graph.num_vertices()).collect(), directions };
    let out = Oriented { graph, orientation };
    out.validate()?;
    Ok((sign, out))
}

/// Oracle form of `contract_edge`: re-present the orientation so the edge
/// runs from label 1 to label 2 (collecting the re-presentation sign), then
/// contract with no additional sign. Must agree with `contract_edge` on
/// every edge; kept public so tests can pit the two descriptions against
/// each other.
pub fn contract_edge_relabel_first(o: &Oriented, e: EdgeKey) -> Result<(i8, Oriented)> {
    let g = &o.graph;
    if g.vertex_of(e.0) == g.vertex_of(e.1) {
        return Err(Error::LoopContraction);
    }
    let (tail, head) = o.orientation.directions[&e];
    let (vt, vh) = (g.vertex_of(tail), g.vertex_of(head));
    // Re-presentation: vertex order [vt, vh, rest], same directions.
    let mut new_order = vec![vt, vh];
    new_order.extend(o.orientation.vertex_order.iter().copied().filter(|&v| v != vt && v != vh));
    let sign = reorder_sign(&o.orientation.vertex_order, &new_order);
    // Contract with the edge pointing 1 -> 2: merged vertex first.
    let merged = VertexStructure::mate(&g.vertices()[vt], tail, &g.vertices()[vh], head)?;
    let mut vertices = vec![merged];
    for &v in &new_order[2..] {
        vertices.push(g.vertices()[v].clone());
    }
    let edges: Vec<(Dart, Dart)> =
        g.edges().iter().copied().filter(|&ek| ek != e).collect();
    let graph = DecoratedGraph::new(g.species().clone(), vertices, edges)?;
    let mut directions = o.orientation.directions.clone();
    directions.remove(&e);
    let orientation =
        Orientation { vertex_order: (0..graph.num_vertices()).collect(), directions };
    let out = Oriented { graph, orientation };
    out.validate()?;
    Ok((sign, out))
}

/// Parity of the permutation taking `from` to `to` (both orders of the
/// same vertex set).
fn reorder_sign(from: &[usize], to: &[usize]) -> i8 {
    let pos_in_to: BTreeMap<usize, usize> = to.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let perm: Vec<usize> = from.iter().map(|v| pos_in_to[v]).collect();
    crate::graph::permutation_sign(&perm)
}

/// Contracts the quasi-edge given by two darts on distinct vertices that
/// do not form an edge: re-present so the darts' vertices take labels 1
/// and 2 with the first incident edge directed out of vertex 1 at the
/// first dart and the second directed into vertex 2 at the second dart;
/// rewire the two incident edges so the dart pair and its complement
/// become edges; then collapse the new connecting edge.
pub fn contract_quasi_edge(o: &Oriented, q: (Dart, Dart)) -> Result<(i8, Oriented)> {
    let g = &o.graph;
    let (h1, h2) = q;
    if h1 == h2 {
        return Err(Error::MalformedGraph("quasi-edge darts must differ".into()));
    }
    let (v1, v2) = (g.vertex_of(h1), g.vertex_of(h2));
    if v1 == v2 {
        return Err(Error::QuasiLoop);
    }
    if g.partner(h1) == h2 {
        return Err(Error::IsActualEdge);
    }
    let (p1, p2) = (g.partner(h1), g.partner(h2));
    let e1 = edge_key(h1, p1);
    let e2 = edge_key(h2, p2);
    let mut sign: i8 = 1;
    // Step 1: move v1, v2 to the front and align the two arrows.
    let mut new_order = vec![v1, v2];
    new_order.extend(o.orientation.vertex_order.iter().copied().filter(|&v| v != v1 && v != v2));
    sign *= reorder_sign(&o.orientation.vertex_order, &new_order);
    if o.orientation.directions[&e1].0 != h1 {
        sign = -sign;
    }
    if o.orientation.directions[&e2].1 != h2 {
        sign = -sign;
    }
    // Step 2: rewire; the new edges inherit the aligned directions.
    let mut edges: Vec<(Dart, Dart)> =
        g.edges().iter().copied().filter(|&ek| ek != e1 && ek != e2).collect();
    edges.push((h1, h2));
    edges.push((p2, p1));
    let graph =
        DecoratedGraph::new(g.species().clone(), g.vertices().to_vec(), edges)?;
    let mut directions = o.orientation.directions.clone();
    directions.remove(&e1);
    directions.remove(&e2);
    directions.insert(edge_key(h1, h2), (h1, h2));
    directions.insert(edge_key(p2, p1), (p2, p1));
    let rewired = Oriented {
        graph,
        orientation: Orientation { vertex_order: new_order, directions },
    };
    rewired.validate()?;
    // Step 3: collapse the new v1-v2 edge; it points label 1 -> 2 so the
    // contraction sign is +1, but route through contract_edge anyway.
    let (s, out) = contract_edge(&rewired, edge_key(h1, h2))?;
    Ok((sign * s, out))
}

/// All edge-contraction terms (loops skipped).
pub fn edge_terms(o: &Oriented) -> Result<Vec<(i8, Oriented)>> {
    let mut out = Vec::new();
    for &e in o.graph.edges() {
        if o.graph.is_loop(e) {
            continue;
        }
        out.push(contract_edge(o, e)?);
    }
    Ok(out)
}

/// All quasi-edge contraction terms (pairs of darts on distinct vertices
/// that do not form an edge).
pub fn quasi_terms(o: &Oriented) -> Result<Vec<(i8, Oriented)>> {
    let g = &o.graph;
    let mut darts: Vec<Dart> = g.edges().iter().flat_map(|&(a, b)| [a, b]).collect();
    darts.sort_unstable();
    let mut out = Vec::new();
    for (i, &x) in darts.iter().enumerate() {
        for &y in &darts[i + 1..] {
            if g.vertex_of(x) == g.vertex_of(y) || g.partner(x) == y {
                continue;
            }
            out.push(contract_quasi_edge(o, (x, y))?);
        }
    }
    Ok(out)
}

/// All ideal-edge expansion terms: for the vertex at (1-indexed) position
/// l of the vertex order, the expanded term carries sign (-1)^(l-1) (the
/// vertex moves to label 1), the two children take labels 1 and 2, every
/// other label shifts up, and the new edge is directed 1 -> 2.
pub fn expansion_terms(o: &Oriented) -> Result<Vec<(i8, Oriented)>> {
    let g = &o.graph;
    let fresh = g
        .edges()
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .max()
        .map_or(0, |m| m + 1);
    let (na, nb) = (fresh, fresh + 1);
    let mut out = Vec::new();
    for (pos, &v) in o.orientation.vertex_order.iter().enumerate() {
        let move_sign: i8 = if pos % 2 == 0 { 1 } else { -1 };
        for split in g.vertices()[v].ideal_expansions(na, nb)? {
            debug_assert_eq!(split.multiplicity, 1);
            let mut vertices = vec![split.side_a.clone(), split.side_b.clone()];
            for &w in &o.orientation.vertex_order {
                if w != v {
                    vertices.push(g.vertices()[w].clone());
                }
            }
            let mut edges: Vec<(Dart, Dart)> = g.edges().to_vec();
            edges.push((na, nb));
            let graph = DecoratedGraph::new(g.species().clone(), vertices, edges)?;
            let mut directions = o.orientation.directions.clone();
            directions.insert(edge_key(na, nb), (na, nb));
            let orientation =
                Orientation { vertex_order: (0..graph.num_vertices()).collect(), directions };
            let expanded = Oriented { graph, orientation };
            expanded.validate()?;
            out.push((move_sign, expanded));
        }
    }
    Ok(out)
}

/// Which boundary to apply: the edge part, the quasi-edge part, or the
/// combined operator at a numeric parameter n (weight 2n on the edge
/// part).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryKind {
    E,
    H,
    N(u32),
}

impl BoundaryKind {
    pub fn parse(s: &str) -> Option<BoundaryKind> {
        match s {
            "dE" | "de" | "E" => Some(BoundaryKind::E),
            "dH" | "dh" | "H" => Some(BoundaryKind::H),
            _ => None,
        }
    }

    pub fn name(&self) -> String {
        match self {
            BoundaryKind::E => "dE".into(),
            BoundaryKind::H => "dH".into(),
            BoundaryKind::N(n) => format!("dN({n})"),
        }
    }
}

/// Shared engine: weight_e * (edge part) + weight_h * (quasi part), with
/// the qgraph filter dropping image terms that leave the chain group.
fn boundary_weighted<T>(
    chain: &ChainVector<T>,
    weight_e: &T,
    weight_h: &T,
    filter: ComplexFilter,
) -> Result<ChainVector<T>>
where
    T: Clone + Zero + One + Neg<Output = T> + std::ops::Mul<Output = T> + PartialEq,
{
    let mut out = ChainVector::new();
    for (_, coeff, rep) in chain.iter() {
        let mut terms: Vec<(T, Oriented)> = Vec::new();
        if !weight_e.is_zero() {
            for (s, g) in edge_terms(rep)? {
                let c = apply_sign(weight_e.clone(), s);
                terms.push((coeff.clone() * c, g));
            }
        }
        if !weight_h.is_zero() {
            for (s, g) in quasi_terms(rep)? {
                let c = apply_sign(weight_h.clone(), s);
                terms.push((coeff.clone() * c, g));
            }
        }
        for (c, g) in terms {
            let sc = canonical_class(&g)?;
            if sc.is_zero {
                continue;
            }
            if filter == ComplexFilter::QGraph && !filter.admits(&sc.rep.graph) {
                continue;
            }
            out.add_scaled_class(c, &sc);
        }
    }
    Ok(out)
}

fn apply_sign<T: Neg<Output = T>>(v: T, s: i8) -> T {
    if s < 0 {
        -v
    } else {
        v
    }
}

/// Boundary of a rational chain: the edge part, the quasi part, or their
/// weighted combination at numeric n.
pub fn boundary<T>(
    chain: &ChainVector<T>,
    kind: BoundaryKind,
    filter: ComplexFilter,
) -> Result<ChainVector<T>>
where
    T: Clone + Zero + One + Neg<Output = T> + std::ops::Mul<Output = T> + PartialEq,
{
    let (we, wh) = match kind {
        BoundaryKind::E => (T::one(), T::zero()),
        BoundaryKind::H => (T::zero(), T::one()),
        BoundaryKind::N(n) => (small_int::<T>(2 * n as u64), T::one()),
    };
    boundary_weighted(chain, &we, &wh, filter)
}

/// n as a ring element (repeated addition of one; n stays tiny here).
fn small_int<T: Zero + One + std::ops::Add<Output = T>>(n: u64) -> T {
    (0..n).fold(T::zero(), |acc, _| acc + T::one())
}

/// Boundary with the edge part weighted by the formal variable s (which
/// stands for 2n), acting on polynomial chains.
pub fn boundary_sym(
    chain: &ChainVector<IntPoly>,
    filter: ComplexFilter,
) -> Result<ChainVector<IntPoly>> {
    boundary_weighted(chain, &IntPoly::var(), &IntPoly::one(), filter)
}

/// Coboundary: sum of ideal-edge expansions over all vertices.
pub fn coboundary_e<T>(chain: &ChainVector<T>) -> Result<ChainVector<T>>
where
    T: Clone + Zero + One + Neg<Output = T> + PartialEq + std::ops::Mul<Output = T>,
{
    let mut out = ChainVector::new();
    for (_, coeff, rep) in chain.iter() {
        for (s, g) in expansion_terms(rep)? {
            let sc = canonical_class(&g)?;
            if sc.is_zero {
                continue;
            }
            out.add_scaled_class(apply_sign(coeff.clone(), s), &sc);
        }
    }
    Ok(out)
}

/// Matrix of a boundary operator between two enumerated bases: columns
/// indexed by `basis_k`, rows by `basis_km1`. A term landing outside the
/// target basis is a `BasisMismatch` (for subcomplex filters this means
/// the operator does not preserve the filter).
pub fn boundary_matrix(
    basis_k: &[SignedClass],
    basis_km1: &[SignedClass],
    kind: BoundaryKind,
    filter: ComplexFilter,
) -> Result<crate::linalg::SparseMatrix<Int>> {
    matrix_of(basis_k, basis_km1, |sc| {
        let chain: ChainVector<Int> = ChainVector::from_class(sc);
        boundary(&chain, kind, filter)
    })
}

/// Matrix of the symbolic combined boundary (edge part weighted by s).
pub fn boundary_matrix_sym(
    basis_k: &[SignedClass],
    basis_km1: &[SignedClass],
    filter: ComplexFilter,
) -> Result<crate::linalg::SparseMatrix<IntPoly>> {
    matrix_of(basis_k, basis_km1, |sc| {
        let chain: ChainVector<IntPoly> = ChainVector::from_class(sc);
        boundary_sym(&chain, filter)
    })
}

/// Matrix of the coboundary between two bases (columns expand into rows).
pub fn coboundary_matrix(
    basis_k: &[SignedClass],
    basis_kp1: &[SignedClass],
) -> Result<crate::linalg::SparseMatrix<Int>> {
    matrix_of(basis_k, basis_kp1, |sc| {
        let chain: ChainVector<Int> = ChainVector::from_class(sc);
        coboundary_e(&chain)
    })
}

fn matrix_of<T>(
    cols_basis: &[SignedClass],
    rows_basis: &[SignedClass],
    apply: impl Fn(&SignedClass) -> Result<ChainVector<T>> + Sync,
) -> Result<crate::linalg::SparseMatrix<T>>
where
    T: Clone + Zero + Neg<Output = T> + PartialEq + Send + Sync,
{
    let row_index: BTreeMap<&Encoding, usize> =
        rows_basis.iter().enumerate().map(|(i, sc)| (&sc.encoding, i)).collect();
    let columns: Vec<Result<Vec<(usize, T)>>> = cols_basis
        .par_iter()
        .map(|sc| {
            let image = apply(sc)?;
            let mut col = Vec::with_capacity(image.len());
            for (enc, c, _) in image.iter() {
                match row_index.get(enc) {
                    Some(&i) => col.push((i, c.clone())),
                    None => {
                        return Err(Error::BasisMismatch(format!(
                            "image term {enc} outside the target basis"
                        )))
                    }
                }
            }
            Ok(col)
        })
        .collect();
    let mut m = crate::linalg::SparseMatrix::new(rows_basis.len(), cols_basis.len());
    for (j, col) in columns.into_iter().enumerate() {
        for (i, v) in col? {
            m.set(i, j, v);
        }
    }
    Ok(m)
}
