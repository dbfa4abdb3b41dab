//! The matching pairing between graph classes, the deformation family it
//! induces, the disjoint-union product, the bracket, and the verification
//! drivers for the adjointness and homotopy identities.
//!
//! A matching between two graphs with equal vertex and edge counts is a
//! vertex bijection together with a decoration-preserving dart bijection
//! at every matched vertex pair; no edge compatibility is required.
//! Overlaying the two edge involutions along the dart bijection cuts the
//! dart set into even alternating polygons.
//!
//! The pairing is a polynomial in s = 2n, built per matching from the
//! matching's orientation sign — the parity of its vertex bijection read
//! in the two vertex orders, times a factor of -1 for every polygon
//! holding an odd number of edge tails (from either graph) on one
//! coloring side — together with a per-species weight.
//!
//! For the two species that carry a state-sum invariant (commutative
//! vertices and the trivial group), the weight is the labelled polygon
//! sum, which makes the pairing's value at every ambient index n equal
//! the coefficient dot product of the two state-sum invariants (tested in
//! the state-sum module): every polygon independently picks one of the n
//! indices and one of the two letters; a letter choice contributes a
//! factor of -1 for each edge tail sitting on the polygon's off-letter
//! coloring side; and every overlay vertex divides by the factorials of
//! the numbers of darts it holds in each (index, letter, color) slot.
//! Grouping index choices by their level sets makes the sum a polynomial
//! in n with falling-factorial terms, so it can be evaluated once per
//! polygon shape and reused; substituting n = s/2 always clears the
//! denominators.
//!
//! Every other species uses the bare weight s to the number of polygons.
//! That is the convention under which the combined boundary (quasi-edge
//! contraction, with weight s on the actual-edge part) and the ideal-edge
//! expansion are adjoint: the two sides' terms correspond one to one,
//! with a bigon overlay on the new edge absorbing the weight-s edge
//! contractions and every longer polygon absorbing a quasi-edge one.
//!
//! On the diagonal, under either weight, only the perfect overlays reach
//! degree e, each with weight one and positive sign, so the top
//! coefficient is the automorphism order.

use std::collections::{BTreeMap, HashMap};
use std::ops::{Mul, Neg};
use std::sync::{Arc, Mutex, OnceLock};

use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::complex::{boundary, boundary_sym, coboundary_e, BoundaryKind, ChainVector};
use crate::enumerate::enumerate_basis;
use crate::graph::{
    canonical_class, dense, for_each_matching_bijection, permutation_sign, union_graphs,
    ComplexFilter, DartBijection, Encoding, Oriented, SignedClass,
};
use crate::linalg::SparseMatrix;
use crate::species::SpeciesId;
use crate::{Chain, Error, Int, IntPoly, Rat, RatPoly, Result};

/// One structure-preserving overlay of two graphs: the vertex images, the
/// dart images (dense indices on both sides), the orientation sign, and
/// the polygon count.
#[derive(Clone, Debug)]
pub struct Matching {
    /// Image vertex per source vertex.
    pub vertex_map: Vec<usize>,
    /// Image dense dart index per source dense dart index.
    pub dart_map: Vec<usize>,
    /// Orientation sign of the overlay, +1 or -1.
    pub sign: i8,
    /// Number of alternating polygons the overlay cuts the darts into.
    pub polygons: usize,
}

/// Weight record of one alternating polygon: the number of edge tails
/// (from either graph) on each coloring side, and per overlay vertex the
/// number of darts the polygon holds of each color. The two colorings of
/// a polygon are interchangeable, so the record is normalized to its
/// smaller reading; both tail counts have the same parity (their sum is
/// the number of darts, which is even), so the swap never changes the
/// sign conventions built on `tails[1]`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
struct PolygonData {
    tails: [u32; 2],
    visits: Vec<(u32, [u32; 2])>,
}

impl PolygonData {
    fn flipped(&self) -> PolygonData {
        PolygonData {
            tails: [self.tails[1], self.tails[0]],
            visits: self.visits.iter().map(|&(v, [x, y])| (v, [y, x])).collect(),
        }
    }

    fn normalize(&mut self) {
        let f = self.flipped();
        if f < *self {
            *self = f;
        }
    }
}

/// Walks every overlay of `a` onto `b`, reporting the parity of the
/// vertex bijection, the polygon weight records, and the dart bijection.
/// Scratch buffers are reused across overlays.
fn fold_matchings(
    a: &Oriented,
    b: &Oriented,
    f: &mut impl FnMut(i8, &[PolygonData], &DartBijection),
) {
    if a.graph.species() != b.graph.species()
        || a.graph.num_vertices() != b.graph.num_vertices()
        || a.graph.num_edges() != b.graph.num_edges()
    {
        return;
    }
    let da = dense(&a.graph);
    let db = dense(&b.graph);
    let k = a.graph.num_vertices();
    let n = da.dart_ids.len();
    // Position of each vertex of b in b's vertex order.
    let mut pos_b = vec![0usize; k];
    for (i, &v) in b.orientation.vertex_order.iter().enumerate() {
        pos_b[v] = i;
    }
    // Tail-dart indicator per graph, on dense dart indices.
    let tail_marks = |o: &Oriented, d: &crate::graph::Dense| -> Vec<bool> {
        let mut marks = vec![false; d.dart_ids.len()];
        for &e in o.graph.edges() {
            marks[d.dart_ids.binary_search(&o.orientation.tail(e)).unwrap()] = true;
        }
        marks
    };
    let a_tail = tail_marks(a, &da);
    let b_tail = tail_marks(b, &db);
    let mut perm = vec![0usize; k];
    let mut inv = vec![usize::MAX; n];
    let mut label = vec![2u8; n];
    let mut stack: Vec<usize> = Vec::with_capacity(n);
    let mut visit_at = vec![[0u32; 2]; k];
    let mut touched: Vec<u32> = Vec::with_capacity(k);
    let mut polys: Vec<PolygonData> = Vec::new();
    for_each_matching_bijection(&a.graph, &da, &b.graph, &db, &mut |bij| {
        for (i, &v) in a.orientation.vertex_order.iter().enumerate() {
            perm[i] = pos_b[bij.vertex_map[v]];
        }
        let sign = permutation_sign(&perm);
        for (x, &y) in bij.dart_map.iter().enumerate() {
            inv[y] = x;
        }
        // Two-color the polygons: neighbors along either edge involution
        // (b's pulled back through the dart bijection) alternate labels.
        label.fill(2);
        polys.clear();
        for start in 0..n {
            if label[start] != 2 {
                continue;
            }
            let mut tails = [0u32; 2];
            touched.clear();
            label[start] = 0;
            stack.push(start);
            while let Some(x) = stack.pop() {
                let lx = label[x] as usize;
                let v = da.vertex_of[x];
                if visit_at[v] == [0, 0] {
                    touched.push(v as u32);
                }
                visit_at[v][lx] += 1;
                if a_tail[x] {
                    tails[lx] += 1;
                }
                if b_tail[bij.dart_map[x]] {
                    tails[lx] += 1;
                }
                for nb in [da.partner[x], inv[db.partner[bij.dart_map[x]]]] {
                    if label[nb] == 2 {
                        label[nb] = 1 - label[x];
                        stack.push(nb);
                    } else {
                        debug_assert_eq!(label[nb], 1 - label[x], "odd polygon cycle");
                    }
                }
            }
            touched.sort_unstable();
            let visits = touched
                .iter()
                .map(|&v| {
                    let t = visit_at[v as usize];
                    visit_at[v as usize] = [0, 0];
                    (v, t)
                })
                .collect();
            let mut p = PolygonData { tails, visits };
            p.normalize();
            polys.push(p);
        }
        f(sign, &polys, bij);
        false
    });
}

/// All matchings between the canonical representatives of two classes.
pub fn matchings(a: &SignedClass, b: &SignedClass) -> Vec<Matching> {
    let mut out = Vec::new();
    fold_matchings(&a.rep, &b.rep, &mut |sign, polys, bij| {
        let mut s = sign;
        for p in polys {
            if p.tails[1] % 2 == 1 {
                s = -s;
            }
        }
        out.push(Matching {
            vertex_map: bij.vertex_map.clone(),
            dart_map: bij.dart_map.clone(),
            sign: s,
            polygons: polys.len(),
        });
    });
    out
}

fn factorial(k: u32) -> Int {
    let mut f = Int::one();
    for t in 2..=k {
        f *= Int::from(t);
    }
    f
}

/// The labelled polygon sum of one overlay, as coefficients in n (index m
/// holds the coefficient of n^m). Index choices are grouped by their
/// level sets: a partition into b classes carries the falling factorial
/// n (n-1) ... (n-b+1), and within each partition the two letters per
/// polygon are summed with their signs and per-vertex factorial weights.
fn labelled_sum(polys: &[PolygonData]) -> Vec<Rat> {
    let c = polys.len();
    let mut nv = 0usize;
    for p in polys {
        for &(v, _) in &p.visits {
            nv = nv.max(v as usize + 1);
        }
    }
    // acc[b] multiplies the falling factorial with b factors.
    let mut acc = vec![Rat::zero(); c + 1];
    if c == 0 {
        acc[0] = Rat::one();
    }
    let mut assign = vec![0usize; c];
    let mut slots = vec![[0u32; 2]; c * nv];
    let mut used: Vec<usize> = Vec::new();
    rgs(polys, nv, 0, 0, &mut assign, &mut slots, &mut used, &mut acc);
    let mut out = vec![Rat::zero(); c + 1];
    let mut ff: Vec<Rat> = vec![Rat::one()];
    for (b, a) in acc.iter().enumerate() {
        if !a.is_zero() {
            for (m, co) in ff.iter().enumerate() {
                if !co.is_zero() {
                    out[m] += a.clone() * co.clone();
                }
            }
        }
        if b < c {
            // Multiply the falling factorial by (n - b).
            let bb = Rat::from_integer(Int::from(b as i64));
            let mut next = vec![Rat::zero(); ff.len() + 1];
            for (m, co) in ff.iter().enumerate() {
                next[m + 1] += co.clone();
                next[m] -= co.clone() * bb.clone();
            }
            ff = next;
        }
    }
    out
}

/// Enumerates set partitions of the polygons as restricted growth
/// strings; at each leaf adds the letter sum into `acc` at the partition
/// size.
#[allow(clippy::too_many_arguments)]
fn rgs(
    polys: &[PolygonData],
    nv: usize,
    j: usize,
    blocks: usize,
    assign: &mut [usize],
    slots: &mut [[u32; 2]],
    used: &mut Vec<usize>,
    acc: &mut [Rat],
) {
    if j == polys.len() {
        if j > 0 {
            acc[blocks] += letter_sum(polys, nv, assign, slots, used);
        }
        return;
    }
    for b in 0..=blocks {
        assign[j] = b;
        rgs(polys, nv, j + 1, blocks.max(b + 1), assign, slots, used, acc);
    }
}

/// Sums one letter choice per polygon under a fixed index partition: the
/// sign is -1 per edge tail on the off-letter side, and every (vertex,
/// class) pair divides by the factorials of its two accumulated dart
/// multiplicities.
fn letter_sum(
    polys: &[PolygonData],
    nv: usize,
    assign: &[usize],
    slots: &mut [[u32; 2]],
    used: &mut Vec<usize>,
) -> Rat {
    let c = polys.len();
    let mut total = Rat::zero();
    for letters in 0u32..(1 << c) {
        let mut neg = false;
        used.clear();
        for (j, p) in polys.iter().enumerate() {
            let q = letters >> j & 1 == 1;
            if p.tails[if q { 0 } else { 1 }] % 2 == 1 {
                neg = !neg;
            }
            for &(v, t) in &p.visits {
                let idx = assign[j] * nv + v as usize;
                if slots[idx] == [0, 0] {
                    used.push(idx);
                }
                slots[idx][0] += if q { t[1] } else { t[0] };
                slots[idx][1] += if q { t[0] } else { t[1] };
            }
        }
        let mut denom = Int::one();
        for &idx in used.iter() {
            let [x, y] = slots[idx];
            denom *= factorial(x) * factorial(y);
            slots[idx] = [0, 0];
        }
        let num = if neg { -Int::one() } else { Int::one() };
        total += Rat::new(num, denom);
    }
    total
}

/// Canonical form of an overlay's polygon records, the key of the
/// labelled-sum memo: vertices are relabeled by first appearance along
/// the sorted polygon list (twice, since relabeling can reorder the
/// list), so equal-shaped overlays of different matchings share keys. A
/// coarser key would still be sound -- the labelled sum depends only on
/// the shape -- this one is cheap and collapses almost all repeats.
fn canonical_polys(polys: &[PolygonData]) -> Vec<PolygonData> {
    let mut ps = polys.to_vec();
    let mut relabel: BTreeMap<u32, u32> = BTreeMap::new();
    for _ in 0..2 {
        ps.sort_unstable();
        relabel.clear();
        for p in &ps {
            for &(v, _) in &p.visits {
                let next = relabel.len() as u32;
                relabel.entry(v).or_insert(next);
            }
        }
        for p in &mut ps {
            for visit in &mut p.visits {
                visit.0 = relabel[&visit.0];
            }
            p.visits.sort_unstable();
            p.normalize();
        }
    }
    ps.sort_unstable();
    ps
}

static LABEL_MEMO: OnceLock<Mutex<HashMap<Vec<PolygonData>, Arc<Vec<Rat>>>>> = OnceLock::new();

fn labelled_sum_memo(polys: &[PolygonData]) -> Arc<Vec<Rat>> {
    let key = canonical_polys(polys);
    let memo = LABEL_MEMO.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = memo.lock().unwrap().get(&key) {
        return hit.clone();
    }
    let val = Arc::new(labelled_sum(&key));
    memo.lock().unwrap().insert(key, val.clone());
    val
}

/// The pairing of two presentations: the signed labelled sum over all
/// matchings, written as an integer polynomial in s = 2n.
/// True for the species whose pairing weights come from the state-sum
/// side (the species that have an invariant state sum): the commutative
/// species and the trivial-group species. All other species use the bare
/// polygon-count weight.
fn state_weighted(species: &SpeciesId) -> bool {
    match species {
        SpeciesId::Cc => true,
        SpeciesId::Group(k) => k.order() == 1,
        _ => false,
    }
}

pub fn pairing_m_oriented(a: &Oriented, b: &Oriented) -> IntPoly {
    let e = a.graph.num_edges();
    if !state_weighted(a.graph.species()) {
        // Bare weight: each overlay contributes its orientation sign times
        // s to the number of polygons. This is the convention under which
        // quasi-edge contraction and ideal-edge expansion are adjoint.
        let mut coeffs = vec![Int::zero(); e + 1];
        fold_matchings(a, b, &mut |sign, polys, _| {
            let mut s = sign;
            for p in polys {
                if p.tails[1] % 2 == 1 {
                    s = -s;
                }
            }
            if s > 0 {
                coeffs[polys.len()] += Int::one();
            } else {
                coeffs[polys.len()] -= Int::one();
            }
        });
        return IntPoly::from_coeffs(coeffs);
    }
    let mut acc = vec![Rat::zero(); e + 1];
    fold_matchings(a, b, &mut |sign, polys, _| {
        let vals = labelled_sum_memo(polys);
        for (m, v) in vals.iter().enumerate() {
            if v.is_zero() {
                continue;
            }
            if sign > 0 {
                acc[m] += v.clone();
            } else {
                acc[m] -= v.clone();
            }
        }
    });
    // Substitute n = s/2; the combined weights always clear the halves.
    let mut coeffs = Vec::with_capacity(e + 1);
    let mut pow2 = Int::one();
    for v in acc {
        let scaled = v / Rat::from_integer(pow2.clone());
        assert!(
            scaled.is_integer(),
            "matching pairing produced the fractional coefficient {scaled}"
        );
        coeffs.push(scaled.to_integer());
        pow2 *= Int::from(2);
    }
    IntPoly::from_coeffs(coeffs)
}

/// The pairing of two classes, on canonical representatives. Zero when the
/// vertex or edge counts differ, degree at most the edge count, and the
/// top coefficient on the diagonal is the automorphism order.
pub fn pairing_m(a: &SignedClass, b: &SignedClass) -> IntPoly {
    pairing_m_oriented(&a.rep, &b.rep)
}

/// Bilinear extension of the pairing to polynomial chains.
pub fn pairing_m_chain(x: &ChainVector<IntPoly>, y: &ChainVector<IntPoly>) -> IntPoly {
    let mut acc = IntPoly::zero();
    for (_, cx, rx) in x.iter() {
        for (_, cy, ry) in y.iter() {
            let m = pairing_m_oriented(rx, ry);
            if !m.is_zero() {
                acc = acc + m * cx.clone() * cy.clone();
            }
        }
    }
    acc
}

/// A pairing-closed cell: the full-complex basis at fixed vertex and edge
/// counts, the automorphism orders, and cached pairing columns. The
/// deformation maps are block diagonal with respect to these cells.
pub struct Block {
    pub k: usize,
    pub e: usize,
    pub basis: Vec<SignedClass>,
    pub index: BTreeMap<Encoding, usize>,
    pub auts: Vec<Int>,
    columns: Mutex<BTreeMap<usize, Arc<Vec<IntPoly>>>>,
}

impl Block {
    pub fn new(species: &SpeciesId, k: usize, e: usize) -> Result<Block> {
        let basis = if e + 1 >= k && k > 0 {
            enumerate_basis(species, k, e + 1 - k, ComplexFilter::Full)?
        } else {
            Vec::new()
        };
        let index =
            basis.iter().enumerate().map(|(i, sc)| (sc.encoding.clone(), i)).collect();
        let auts = basis
            .iter()
            .map(|sc| Int::from(crate::graph::automorphism_order(&sc.rep.graph)))
            .collect();
        Ok(Block { k, e, basis, index, auts, columns: Mutex::new(BTreeMap::new()) })
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    fn position(&self, enc: &Encoding) -> Result<usize> {
        self.index.get(enc).copied().ok_or_else(|| {
            Error::BasisIncomplete(format!(
                "class {enc} is outside the ({}, {}) block",
                self.k, self.e
            ))
        })
    }

    /// Pairing column against the j-th basis class (cached).
    pub fn column(&self, j: usize) -> Arc<Vec<IntPoly>> {
        if let Some(c) = self.columns.lock().unwrap().get(&j) {
            return c.clone();
        }
        let bj = &self.basis[j];
        let col: Vec<IntPoly> =
            self.basis.par_iter().map(|bi| pairing_m(bi, bj)).collect();
        let col = Arc::new(col);
        self.columns.lock().unwrap().insert(j, col.clone());
        col
    }

    /// The full pairing matrix in the block basis, entries in Z[s].
    pub fn pairing_matrix(&self) -> SparseMatrix<IntPoly> {
        let nb = self.basis.len();
        let mut m = SparseMatrix::new(nb, nb);
        for j in 0..nb {
            let col = self.column(j);
            for (i, p) in col.iter().enumerate() {
                if !p.is_zero() {
                    m.set(i, j, p.clone());
                }
            }
        }
        m
    }

    /// The deformation image of a class in this block: the chain whose
    /// coefficient at the i-th basis class is M(b_i, class)/|Aut(b_i)|, a
    /// polynomial in s. The coefficient of s^e is the class itself.
    pub fn deformation_d(&self, sc: &SignedClass) -> Result<ChainVector<RatPoly>> {
        let mut out = ChainVector::new();
        if sc.is_zero {
            return Ok(out);
        }
        let j = self.position(&sc.encoding)?;
        let col = self.column(j);
        for (i, p) in col.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let aut = Rat::from_integer(self.auts[i].clone());
            let mut rp = p.map(|c| Rat::from_integer(c.clone()) / aut.clone());
            if sc.sign < 0 {
                rp = -rp;
            }
            out.add_scaled_class(rp, &self.basis[i]);
        }
        Ok(out)
    }

    /// Applies the first-order deformation coefficient map (the s^{e-1}
    /// coefficient of the deformation) to a chain supported on this block.
    pub fn apply_d1(&self, chain: &Chain) -> Result<Chain> {
        let mut out = Chain::new();
        if self.e == 0 {
            return Ok(out);
        }
        for (enc, c, _) in chain.iter() {
            let j = self.position(enc)?;
            let col = self.column(j);
            for (i, p) in col.iter().enumerate() {
                let num = p.coeff(self.e - 1);
                if num.is_zero() {
                    continue;
                }
                let w = Rat::new(num, self.auts[i].clone()) * c.clone();
                out.add_scaled_class(w, &self.basis[i]);
            }
        }
        Ok(out)
    }
}

/// Lazily built pairing blocks for one species, keyed by (k, e).
pub struct BlockCache {
    species: SpeciesId,
    blocks: BTreeMap<(usize, usize), Arc<Block>>,
}

impl BlockCache {
    pub fn new(species: &SpeciesId) -> Self {
        BlockCache { species: species.clone(), blocks: BTreeMap::new() }
    }

    pub fn block(&mut self, k: usize, e: usize) -> Result<Arc<Block>> {
        if let Some(b) = self.blocks.get(&(k, e)) {
            return Ok(b.clone());
        }
        let b = Arc::new(Block::new(&self.species, k, e)?);
        self.blocks.insert((k, e), b.clone());
        Ok(b)
    }

    /// First-order deformation coefficient on a chain with mixed supports:
    /// terms are grouped by cell and sent through their own blocks. The
    /// empty-graph class is fixed by the deformation, so it contributes
    /// nothing at first order.
    pub fn apply_d1(&mut self, chain: &Chain) -> Result<Chain> {
        let mut groups: BTreeMap<(usize, usize), Chain> = BTreeMap::new();
        for (enc, c, rep) in chain.iter() {
            let k = rep.graph.num_vertices();
            if k == 0 {
                continue;
            }
            let cell = (k, rep.graph.num_edges());
            groups.entry(cell).or_default().add_scaled_class(
                c.clone(),
                &SignedClass {
                    encoding: enc.clone(),
                    sign: 1,
                    is_zero: false,
                    rep: rep.clone(),
                },
            );
        }
        let mut out = Chain::new();
        for ((k, e), sub) in groups {
            let block = self.block(k, e)?;
            out.add_assign(&block.apply_d1(&sub)?);
        }
        Ok(out)
    }
}

/// Bilinear disjoint-union product. The empty-graph class is the unit;
/// unions that acquire an orientation-reversing automorphism are dropped.
pub fn disjoint_union<T>(a: &ChainVector<T>, b: &ChainVector<T>) -> Result<ChainVector<T>>
where
    T: Clone + Zero + Neg<Output = T> + Mul<Output = T>,
{
    let mut out = ChainVector::new();
    for (_, ca, ra) in a.iter() {
        for (_, cb, rb) in b.iter() {
            let u = union_graphs(ra, rb)?;
            let sc = canonical_class(&u)?;
            out.add_scaled_class(ca.clone() * cb.clone(), &sc);
        }
    }
    Ok(out)
}

/// Splits a chain by the parity of the vertex count of its terms.
fn split_by_vertex_parity(a: &Chain) -> (Chain, Chain) {
    let mut even = Chain::new();
    let mut odd = Chain::new();
    for (enc, c, rep) in a.iter() {
        let sc = SignedClass {
            encoding: enc.clone(),
            sign: 1,
            is_zero: false,
            rep: rep.clone(),
        };
        if rep.graph.num_vertices() % 2 == 0 {
            even.add_scaled_class(c.clone(), &sc);
        } else {
            odd.add_scaled_class(c.clone(), &sc);
        }
    }
    (even, odd)
}

/// The failure of the quasi-edge boundary to be a derivation:
/// [a, b] = dH(ab) - (dH a)b - (-1)^{|V(a)|} a (dH b), extended bilinearly
/// with the sign taken per vertex-homogeneous piece of a.
pub fn bracket(a: &Chain, b: &Chain) -> Result<Chain> {
    let mut out = boundary(&disjoint_union(a, b)?, BoundaryKind::H, ComplexFilter::Full)?;
    let da = boundary(a, BoundaryKind::H, ComplexFilter::Full)?;
    out.sub_assign(&disjoint_union(&da, b)?);
    let db = boundary(b, BoundaryKind::H, ComplexFilter::Full)?;
    let (a_even, a_odd) = split_by_vertex_parity(a);
    out.sub_assign(&disjoint_union(&a_even, &db)?);
    out.add_assign(&disjoint_union(&a_odd, &db)?);
    Ok(out)
}

/// The first-order deformed product: mu1 = D1 mu - mu(D1 x 1 + 1 x D1).
/// The deformation coefficient is an even operator, so no parity signs
/// appear here.
pub fn mu1(cache: &mut BlockCache, a: &Chain, b: &Chain) -> Result<Chain> {
    let prod = disjoint_union(a, b)?;
    let mut out = cache.apply_d1(&prod)?;
    out.sub_assign(&disjoint_union(&cache.apply_d1(a)?, b)?);
    out.sub_assign(&disjoint_union(a, &cache.apply_d1(b)?)?);
    Ok(out)
}

/// Checks the polynomial adjointness of the combined boundary against the
/// ideal-edge coboundary on one cell: every class pair from (k, e) and
/// (k-1, e-1) must satisfy M(dn g1, g2) = M(g1, dE* g2) identically in s.
pub fn check_adjoint_cell(species: &SpeciesId, k: usize, e: usize) -> Result<Vec<String>> {
    let mut failures = Vec::new();
    if k < 2 || e < 1 || e + 1 < k {
        return Ok(failures);
    }
    let r = e + 1 - k;
    let upper = enumerate_basis(species, k, r, ComplexFilter::Full)?;
    let lower = enumerate_basis(species, k - 1, r, ComplexFilter::Full)?;
    if upper.is_empty() || lower.is_empty() {
        return Ok(failures);
    }
    for g1 in &upper {
        let c1: ChainVector<IntPoly> = ChainVector::from_class(g1);
        let bd = boundary_sym(&c1, ComplexFilter::Full)?;
        for g2 in &lower {
            let c2: ChainVector<IntPoly> = ChainVector::from_class(g2);
            let lhs = pairing_m_chain(&bd, &c2);
            let rhs = pairing_m_chain(&c1, &coboundary_e(&c2)?);
            if lhs != rhs {
                failures.push(format!(
                    "adjoint (k={k}, e={e}): {} vs {}: {} != {}",
                    g1.encoding, g2.encoding, lhs, rhs
                ));
            }
        }
    }
    Ok(failures)
}

/// Adjointness over a rectangle of cells; returns the failure witnesses.
pub fn verify_adjoint(species: &SpeciesId, k_max: usize, e_max: usize) -> Result<Vec<String>> {
    let mut failures = Vec::new();
    for k in 2..=k_max {
        for e in 1..=e_max {
            failures.extend(check_adjoint_cell(species, k, e)?);
        }
    }
    Ok(failures)
}

/// Checks the deformation and homotopy identities on a window of cells.
///
/// Per cell: the top deformation coefficient is the identity, and
/// dH = dE D1 - D1 dE on every basis class. Per ordered pair of window
/// classes whose union has at most `pair_edge_cap` edges: the first-order
/// product mu1 agrees with its polynomial-level recomputation, and
/// [a, b] = dE mu1(a, b) - mu1(dE a, b) - (-1)^{|V(a)|} mu1(a, dE b).
pub fn verify_homotopy(
    species: &SpeciesId,
    cells: &[(usize, usize)],
    pair_edge_cap: usize,
) -> Result<Vec<String>> {
    let mut failures = Vec::new();
    let mut cache = BlockCache::new(species);
    for &(k, e) in cells {
        let block = cache.block(k, e)?;
        for j in 0..block.len() {
            let col = block.column(j);
            for (i, p) in col.iter().enumerate() {
                let top = p.coeff(e);
                let expected = if i == j { block.auts[i].clone() } else { Int::zero() };
                if top != expected {
                    failures.push(format!(
                        "deformation top coefficient (k={k}, e={e}) at ({i}, {j}): {top} != {expected}"
                    ));
                }
            }
        }
        for sc in &block.basis {
            let c: Chain = ChainVector::from_class(sc);
            let lhs = boundary(&c, BoundaryKind::H, ComplexFilter::Full)?;
            let de = boundary(&c, BoundaryKind::E, ComplexFilter::Full)?;
            let mut rhs = boundary(&block.apply_d1(&c)?, BoundaryKind::E, ComplexFilter::Full)?;
            rhs.sub_assign(&cache.apply_d1(&de)?);
            if lhs != rhs {
                failures.push(format!(
                    "quasi-edge homotopy (k={k}, e={e}) fails on {}",
                    sc.encoding
                ));
            }
        }
    }
    // Ordered pairs for the product identities.
    let mut window: Vec<SignedClass> = Vec::new();
    for &(k, e) in cells {
        window.extend(cache.block(k, e)?.basis.iter().cloned());
    }
    for a_sc in &window {
        for b_sc in &window {
            let ea = a_sc.rep.graph.num_edges();
            let eb = b_sc.rep.graph.num_edges();
            if ea + eb > pair_edge_cap {
                continue;
            }
            let a: Chain = ChainVector::from_class(a_sc);
            let b: Chain = ChainVector::from_class(b_sc);
            let m1 = mu1(&mut cache, &a, &b)?;
            // Recompute mu1 through the full polynomial deformation chains
            // instead of the direct coefficient maps.
            let prod = disjoint_union(&a, &b)?;
            let mut m1_poly = peel_first_order(&deformation_chain(&mut cache, &prod)?, ea + eb);
            let d1_a = peel_first_order(&deformation_chain(&mut cache, &a)?, ea);
            let d1_b = peel_first_order(&deformation_chain(&mut cache, &b)?, eb);
            m1_poly.sub_assign(&disjoint_union(&d1_a, &b)?);
            m1_poly.sub_assign(&disjoint_union(&a, &d1_b)?);
            if m1 != m1_poly {
                failures.push(format!(
                    "first-order product (via polynomials) differs on {} x {}",
                    a_sc.encoding, b_sc.encoding
                ));
            }
            let lhs = bracket(&a, &b)?;
            let mut rhs = boundary(&m1, BoundaryKind::E, ComplexFilter::Full)?;
            let da = boundary(&a, BoundaryKind::E, ComplexFilter::Full)?;
            rhs.sub_assign(&mu1(&mut cache, &da, &b)?);
            let db = boundary(&b, BoundaryKind::E, ComplexFilter::Full)?;
            let t = mu1(&mut cache, &a, &db)?;
            if a_sc.rep.graph.num_vertices() % 2 == 0 {
                rhs.sub_assign(&t);
            } else {
                rhs.add_assign(&t);
            }
            if lhs != rhs {
                failures.push(format!(
                    "bracket homotopy fails on {} x {}",
                    a_sc.encoding, b_sc.encoding
                ));
            }
        }
    }
    Ok(failures)
}

/// The full deformation chain of a (possibly mixed-cell) rational chain,
/// as polynomial coefficients.
fn deformation_chain(
    cache: &mut BlockCache,
    chain: &Chain,
) -> Result<ChainVector<RatPoly>> {
    let mut out: ChainVector<RatPoly> = ChainVector::new();
    for (enc, c, rep) in chain.iter() {
        let k = rep.graph.num_vertices();
        let sc = SignedClass {
            encoding: enc.clone(),
            sign: 1,
            is_zero: false,
            rep: rep.clone(),
        };
        if k == 0 {
            // The empty graph pairs with itself exactly once.
            out.add_scaled_class(RatPoly::constant(c.clone()), &sc);
            continue;
        }
        let block = cache.block(k, rep.graph.num_edges())?;
        let mut d = block.deformation_d(&sc)?;
        d.scale(&RatPoly::constant(c.clone()));
        out.add_assign(&d);
    }
    Ok(out)
}

/// Extracts the s^{degree-1} coefficient of a polynomial chain.
fn peel_first_order(chain: &ChainVector<RatPoly>, degree: usize) -> Chain {
    let mut out = Chain::new();
    if degree == 0 {
        return out;
    }
    for (enc, p, rep) in chain.iter() {
        let c = p.coeff(degree - 1);
        if c.is_zero() {
            continue;
        }
        out.add_scaled_class(
            c,
            &SignedClass {
                encoding: enc.clone(),
                sign: 1,
                is_zero: false,
                rep: rep.clone(),
            },
        );
    }
    out
}
