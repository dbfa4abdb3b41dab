//! Vertex species: the local structure a graph vertex carries on its darts.
//!
//! Four species are supported. `Cc` puts no structure on the dart set, `Aa`
//! a cyclic order, `Kk` a perfect matching (chord diagram), and `Group(K)`
//! a directed element of a finite group `K` on exactly two darts. Each
//! species knows how to mate two structures along a pair of darts (the local
//! step of edge contraction) and how to expand a structure along an ideal
//! edge (the local step of the coboundary).

use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

use crate::{Error, Result};

/// Half-edge identifier. Ids are arbitrary; algorithms never assume density.
pub type Dart = u32;

/// Index of a group element inside its presentation's element list.
pub type GroupElem = u16;

/// A finite group given by tables, together with a star (reversal) map.
///
/// The star map must fix the unit, reverse products, and be an involution;
/// `star = inverse` always works, `star = identity` works exactly for
/// abelian groups.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupPresentation {
    pub elements: Vec<String>,
    pub unit: GroupElem,
    pub mul: Vec<Vec<GroupElem>>,
    pub star: Vec<GroupElem>,
}

impl GroupPresentation {
    /// Builds and fully validates a presentation.
    pub fn new(
        elements: Vec<String>,
        unit: GroupElem,
        mul: Vec<Vec<GroupElem>>,
        star: Vec<GroupElem>,
    ) -> Result<Self> {
        let g = GroupPresentation { elements, unit, mul, star };
        g.validate()?;
        Ok(g)
    }

    /// Checks the group laws and the star axioms.
    pub fn validate(&self) -> Result<()> {
        let n = self.elements.len();
        let fail = |msg: String| Err(Error::InvalidGroup(msg));
        if n == 0 {
            return fail("no elements".into());
        }
        if n > u16::MAX as usize {
            return fail("too many elements".into());
        }
        let mut names = self.elements.clone();
        names.sort();
        names.dedup();
        if names.len() != n {
            return fail("duplicate element names".into());
        }
        if self.unit as usize >= n {
            return fail("unit out of range".into());
        }
        if self.mul.len() != n || self.mul.iter().any(|row| row.len() != n) {
            return fail("multiplication table is not square".into());
        }
        if self.mul.iter().flatten().any(|&x| x as usize >= n) {
            return fail("multiplication table entry out of range".into());
        }
        let e = self.unit;
        for a in 0..n as GroupElem {
            if self.mul_el(e, a) != a || self.mul_el(a, e) != a {
                return fail(format!("unit law fails at {}", self.elements[a as usize]));
            }
        }
        for a in 0..n as GroupElem {
            if !(0..n as GroupElem).any(|b| self.mul_el(a, b) == e && self.mul_el(b, a) == e) {
                return fail(format!("no inverse for {}", self.elements[a as usize]));
            }
        }
        for a in 0..n as GroupElem {
            for b in 0..n as GroupElem {
                for c in 0..n as GroupElem {
                    if self.mul_el(self.mul_el(a, b), c) != self.mul_el(a, self.mul_el(b, c)) {
                        return fail("associativity fails".into());
                    }
                }
            }
        }
        if self.star.len() != n || self.star.iter().any(|&x| x as usize >= n) {
            return fail("star map is not a function on the elements".into());
        }
        if self.star[e as usize] != e {
            return fail("star does not fix the unit".into());
        }
        for a in 0..n as GroupElem {
            if self.star_el(self.star_el(a)) != a {
                return fail("star is not an involution".into());
            }
            for b in 0..n as GroupElem {
                if self.star_el(self.mul_el(a, b)) != self.mul_el(self.star_el(b), self.star_el(a)) {
                    return fail(format!(
                        "star is not an anti-homomorphism at ({}, {})",
                        self.elements[a as usize], self.elements[b as usize]
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn mul_el(&self, a: GroupElem, b: GroupElem) -> GroupElem {
        self.mul[a as usize][b as usize]
    }

    pub fn star_el(&self, a: GroupElem) -> GroupElem {
        self.star[a as usize]
    }

    pub fn inv_el(&self, a: GroupElem) -> GroupElem {
        (0..self.order() as GroupElem)
            .find(|&b| self.mul_el(a, b) == self.unit)
            .expect("validated group has inverses")
    }

    pub fn name(&self, a: GroupElem) -> &str {
        &self.elements[a as usize]
    }

    /// The one-element group.
    pub fn trivial() -> Self {
        GroupPresentation::new(vec!["1".into()], 0, vec![vec![0]], vec![0]).unwrap()
    }

    /// Z/2 with the given star map (identity and inverse coincide here, but
    /// both spellings are accepted by the CLI).
    pub fn z2() -> Self {
        GroupPresentation::new(
            vec!["1".into(), "s".into()],
            0,
            vec![vec![0, 1], vec![1, 0]],
            vec![0, 1],
        )
        .unwrap()
    }

    /// Symmetric group on three letters; useful as the smallest nonabelian
    /// test case. `star` must be supplied (identity is rejected here).
    pub fn s3(star_is_inverse: bool) -> Result<Self> {
        // Elements as permutations of {0,1,2} in one-line notation.
        let perms: Vec<[u8; 3]> = vec![
            [0, 1, 2],
            [1, 0, 2],
            [0, 2, 1],
            [2, 1, 0],
            [1, 2, 0],
            [2, 0, 1],
        ];
        let names = vec!["e", "s01", "s12", "s02", "r1", "r2"];
        let compose = |a: &[u8; 3], b: &[u8; 3]| [a[b[0] as usize], a[b[1] as usize], a[b[2] as usize]];
        let idx = |p: &[u8; 3]| perms.iter().position(|q| q == p).unwrap() as GroupElem;
        let mul: Vec<Vec<GroupElem>> = perms
            .iter()
            .map(|a| perms.iter().map(|b| idx(&compose(a, b))).collect())
            .collect();
        let star: Vec<GroupElem> = if star_is_inverse {
            (0..6)
                .map(|a| {
                    (0..6)
                        .find(|&b| mul[a][b as usize] == 0)
                        .unwrap()
                })
                .collect()
        } else {
            (0..6).collect()
        };
        GroupPresentation::new(names.into_iter().map(String::from).collect(), 0, mul, star)
    }
}

/// Which species a vertex (and hence the whole graph) belongs to.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpeciesId {
    /// Commutative: no structure on the dart set.
    Cc,
    /// Associative/ribbon: a cyclic order on the darts.
    Aa,
    /// Chord: a perfect matching on the darts.
    Kk,
    /// A finite group element with a direction, on exactly two darts.
    Group(Arc<GroupPresentation>),
}

impl SpeciesId {
    pub fn group(presentation: GroupPresentation) -> SpeciesId {
        SpeciesId::Group(Arc::new(presentation))
    }

    /// Stable one-byte tag used in canonical encodings.
    pub fn tag(&self) -> u8 {
        match self {
            SpeciesId::Cc => 0,
            SpeciesId::Aa => 1,
            SpeciesId::Kk => 2,
            SpeciesId::Group(_) => 3,
        }
    }
}

impl fmt::Display for SpeciesId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpeciesId::Cc => write!(f, "cc"),
            SpeciesId::Aa => write!(f, "aa"),
            SpeciesId::Kk => write!(f, "kk"),
            SpeciesId::Group(g) => write!(f, "group[{}]", g.order()),
        }
    }
}

/// The species-specific data of a vertex structure.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Payload {
    Cc,
    /// Cyclic order, stored rotated so the smallest dart comes first.
    Aa(Vec<Dart>),
    /// Perfect matching as sorted (lo, hi) pairs, pairs sorted by lo.
    Kk(Vec<(Dart, Dart)>),
    /// Group element read from `tail` towards the other dart, in the normal
    /// form of the direction relation (see `normalize_group`).
    Group { elem: GroupElem, tail: Dart },
}

/// A species structure on a concrete dart set.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexStructure {
    pub species: SpeciesId,
    /// Sorted, distinct.
    pub darts: Vec<Dart>,
    pub payload: Payload,
}

/// One ideal-edge expansion of a vertex: two child structures joined by a
/// fresh edge (the new darts live one in each child).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpansionSplit {
    pub side_a: VertexStructure,
    pub side_b: VertexStructure,
    /// Always 1 for the supported species; kept so callers need no special
    /// cases if a species with coinciding expansions is added.
    pub multiplicity: u32,
}

fn sorted_darts(darts: &[Dart]) -> Vec<Dart> {
    let mut d = darts.to_vec();
    d.sort_unstable();
    d
}

/// Rotates a cyclic word so its minimum entry comes first.
fn normalize_cycle(mut cyc: Vec<Dart>) -> Vec<Dart> {
    if cyc.is_empty() {
        return cyc;
    }
    let pos = cyc
        .iter()
        .enumerate()
        .min_by_key(|&(_, d)| *d)
        .map(|(i, _)| i)
        .unwrap();
    cyc.rotate_left(pos);
    cyc
}

fn normalize_matching(mut pairs: Vec<(Dart, Dart)>) -> Vec<(Dart, Dart)> {
    for p in &mut pairs {
        if p.0 > p.1 {
            *p = (p.1, p.0);
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Normal form of a directed group element on the dart pair {a, b}, a < b:
/// of the two equivalent presentations (g read from a) and (g* read from b),
/// keep the one whose element name is lexicographically smaller, preferring
/// the a-tailed one on ties.
fn normalize_group(
    k: &GroupPresentation,
    elem: GroupElem,
    tail: Dart,
    a: Dart,
    b: Dart,
) -> (GroupElem, Dart) {
    debug_assert!(a < b);
    let from_a = if tail == a { elem } else { k.star_el(elem) };
    let from_b = k.star_el(from_a);
    if k.name(from_a) <= k.name(from_b) {
        (from_a, a)
    } else {
        (from_b, b)
    }
}

impl VertexStructure {
    /// Validates counts and payload consistency, and normalizes the payload.
    pub fn new(species: SpeciesId, darts: Vec<Dart>, payload: Payload) -> Result<Self> {
        let darts = sorted_darts(&darts);
        if darts.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::MalformedStructure("repeated dart".into()));
        }
        let d = darts.len();
        let fail = |msg: &str| Err(Error::MalformedStructure(msg.into()));
        let payload = match (&species, payload) {
            (SpeciesId::Cc, Payload::Cc) => {
                if d < 2 {
                    return fail("cc vertex needs at least two darts");
                }
                Payload::Cc
            }
            (SpeciesId::Aa, Payload::Aa(cyc)) => {
                if d < 2 {
                    return fail("aa vertex needs at least two darts");
                }
                if sorted_darts(&cyc) != darts {
                    return fail("cyclic order must list exactly the vertex darts");
                }
                Payload::Aa(normalize_cycle(cyc))
            }
            (SpeciesId::Kk, Payload::Kk(pairs)) => {
                if d < 2 || d % 2 != 0 {
                    return fail("kk vertex needs a positive even dart count");
                }
                let pairs = normalize_matching(pairs);
                let mut all: Vec<Dart> = pairs.iter().flat_map(|&(x, y)| [x, y]).collect();
                all.sort_unstable();
                if all != darts || pairs.iter().any(|&(x, y)| x == y) {
                    return fail("chords must perfectly match the vertex darts");
                }
                Payload::Kk(pairs)
            }
            (SpeciesId::Group(k), Payload::Group { elem, tail }) => {
                if d != 2 {
                    return fail("group vertex needs exactly two darts");
                }
                if elem as usize >= k.order() {
                    return fail("group element out of range");
                }
                if !darts.contains(&tail) {
                    return fail("tail must be one of the vertex darts");
                }
                let (elem, tail) = normalize_group(k, elem, tail, darts[0], darts[1]);
                Payload::Group { elem, tail }
            }
            _ => return fail("payload does not match species"),
        };
        Ok(VertexStructure { species, darts, payload })
    }

    pub fn valence(&self) -> usize {
        self.darts.len()
    }

    /// Whether this structure is the fake (suspension) element of its
    /// species: the unique structure a mating can absorb without trace.
    pub fn is_fake(&self) -> bool {
        match &self.payload {
            Payload::Cc => self.darts.len() == 2,
            Payload::Aa(_) => self.darts.len() == 2,
            Payload::Kk(pairs) => pairs.len() == 1,
            Payload::Group { elem, .. } => {
                if let SpeciesId::Group(k) = &self.species {
                    *elem == k.unit
                } else {
                    false
                }
            }
        }
    }

    /// The other dart of a two-dart structure.
    fn other(&self, d: Dart) -> Dart {
        if self.darts[0] == d {
            self.darts[1]
        } else {
            self.darts[0]
        }
    }

    /// Group element read along the vertex from dart `from` to the other dart.
    pub fn group_read_from(&self, from: Dart) -> GroupElem {
        match (&self.species, &self.payload) {
            (SpeciesId::Group(k), Payload::Group { elem, tail }) => {
                if *tail == from {
                    *elem
                } else {
                    k.star_el(*elem)
                }
            }
            _ => panic!("group_read_from on a non-group structure"),
        }
    }

    /// Applies a dart relabeling (must be injective on this vertex's darts).
    pub fn relabel(&self, map: impl Fn(Dart) -> Dart) -> VertexStructure {
        let darts: Vec<Dart> = self.darts.iter().map(|&d| map(d)).collect();
        let payload = match &self.payload {
            Payload::Cc => Payload::Cc,
            Payload::Aa(cyc) => Payload::Aa(cyc.iter().map(|&d| map(d)).collect()),
            Payload::Kk(pairs) => Payload::Kk(pairs.iter().map(|&(x, y)| (map(x), map(y))).collect()),
            Payload::Group { elem, tail } => Payload::Group { elem: *elem, tail: map(*tail) },
        };
        VertexStructure::new(self.species.clone(), darts, payload)
            .expect("relabeling preserves validity")
    }

    /// All structures of `species` on the given dart set. Empty when the
    /// species has none (odd kk counts, wrong group arity, fewer than two
    /// darts).
    pub fn list_structures(species: &SpeciesId, darts: &[Dart]) -> Vec<VertexStructure> {
        let darts = sorted_darts(darts);
        let d = darts.len();
        let mk = |payload| VertexStructure::new(species.clone(), darts.clone(), payload);
        match species {
            SpeciesId::Cc => {
                if d < 2 {
                    vec![]
                } else {
                    vec![mk(Payload::Cc).unwrap()]
                }
            }
            SpeciesId::Aa => {
                if d < 2 {
                    return vec![];
                }
                // Cyclic orders = permutations of the tail with the first
                // dart pinned.
                let mut out = Vec::new();
                let mut rest: Vec<Dart> = darts[1..].to_vec();
                permute(&mut rest, 0, &mut |tail| {
                    let mut cyc = vec![darts[0]];
                    cyc.extend_from_slice(tail);
                    out.push(mk(Payload::Aa(cyc)).unwrap());
                });
                out
            }
            SpeciesId::Kk => {
                if d < 2 || d % 2 != 0 {
                    return vec![];
                }
                let mut out = Vec::new();
                let mut pairs = Vec::new();
                perfect_matchings(&darts, &mut pairs, &mut |m| {
                    out.push(mk(Payload::Kk(m.to_vec())).unwrap());
                });
                out
            }
            SpeciesId::Group(k) => {
                if d != 2 {
                    return vec![];
                }
                let mut out: Vec<VertexStructure> = (0..k.order() as GroupElem)
                    .map(|g| mk(Payload::Group { elem: g, tail: darts[0] }).unwrap())
                    .collect();
                out.sort();
                out.dedup();
                out
            }
        }
    }

    /// Mates two structures along the darts `da` (in `a`) and `db` (in `b`):
    /// the local step of contracting an edge joining them. Symmetric in its
    /// argument pairs.
    pub fn mate(a: &VertexStructure, da: Dart, b: &VertexStructure, db: Dart) -> Result<VertexStructure> {
        if a.species != b.species {
            return Err(Error::MalformedStructure("mating across species".into()));
        }
        if !a.darts.contains(&da) || !b.darts.contains(&db) {
            return Err(Error::MalformedStructure("mating dart not on its vertex".into()));
        }
        let mut darts: Vec<Dart> = a.darts.iter().chain(b.darts.iter()).copied().collect();
        darts.retain(|&d| d != da && d != db);
        let payload = match (&a.payload, &b.payload) {
            (Payload::Cc, Payload::Cc) => Payload::Cc,
            (Payload::Aa(ca), Payload::Aa(cb)) => {
                let seq_a = linearize_after(ca, da);
                let seq_b = linearize_after(cb, db);
                Payload::Aa(seq_a.into_iter().chain(seq_b).collect())
            }
            (Payload::Kk(pa), Payload::Kk(pb)) => {
                // Join the two broken chords through the mated darts.
                let mut pairs = Vec::new();
                let mut end_a = None;
                for &(x, y) in pa {
                    if x == da {
                        end_a = Some(y);
                    } else if y == da {
                        end_a = Some(x);
                    } else {
                        pairs.push((x, y));
                    }
                }
                let mut end_b = None;
                for &(x, y) in pb {
                    if x == db {
                        end_b = Some(y);
                    } else if y == db {
                        end_b = Some(x);
                    } else {
                        pairs.push((x, y));
                    }
                }
                pairs.push((end_a.unwrap(), end_b.unwrap()));
                Payload::Kk(pairs)
            }
            (Payload::Group { .. }, Payload::Group { .. }) => {
                // Align both segments head-to-tail along the mating and
                // multiply: read a from its surviving dart into da, then b
                // from db out to its surviving dart.
                let k = match &a.species {
                    SpeciesId::Group(k) => k.clone(),
                    _ => unreachable!(),
                };
                let x = a.other(da);
                let y = b.other(db);
                if x == da || y == db {
                    return Err(Error::MalformedStructure("group mate needs distinct darts".into()));
                }
                let g1 = a.group_read_from(x);
                let g2 = b.group_read_from(db);
                let _ = y;
                Payload::Group { elem: k.mul_el(g1, g2), tail: x }
            }
            _ => return Err(Error::MalformedStructure("payload mismatch in mate".into())),
        };
        VertexStructure::new(a.species.clone(), darts, payload)
    }

    /// All ideal-edge expansions of this structure. The two fresh darts
    /// `new_a` (placed in `side_a`) and `new_b` (in `side_b`) are supplied by
    /// the caller and must not collide with existing darts.
    pub fn ideal_expansions(&self, new_a: Dart, new_b: Dart) -> Result<Vec<ExpansionSplit>> {
        if self.darts.contains(&new_a) || self.darts.contains(&new_b) || new_a == new_b {
            return Err(Error::MalformedStructure("fresh darts collide".into()));
        }
        let mut out = Vec::new();
        match (&self.species, &self.payload) {
            (SpeciesId::Cc, Payload::Cc) => {
                let d = self.darts.len();
                // Unordered bipartitions: fix darts[0] on side a.
                for mask in 0u32..(1 << (d - 1)) {
                    let mut side_a = vec![self.darts[0]];
                    let mut side_b = Vec::new();
                    for (i, &dart) in self.darts[1..].iter().enumerate() {
                        if mask >> i & 1 == 1 {
                            side_a.push(dart);
                        } else {
                            side_b.push(dart);
                        }
                    }
                    if side_b.is_empty() {
                        continue;
                    }
                    side_a.push(new_a);
                    side_b.push(new_b);
                    out.push(ExpansionSplit {
                        side_a: VertexStructure::new(SpeciesId::Cc, side_a, Payload::Cc)?,
                        side_b: VertexStructure::new(SpeciesId::Cc, side_b, Payload::Cc)?,
                        multiplicity: 1,
                    });
                }
            }
            (SpeciesId::Aa, Payload::Aa(cyc)) => {
                // A split is an unordered pair of distinct gaps; gap i sits
                // after position i in the cyclic word.
                let d = cyc.len();
                for i in 0..d {
                    for j in (i + 1)..d {
                        let arc1: Vec<Dart> = (i + 1..=j).map(|t| cyc[t % d]).collect();
                        let arc2: Vec<Dart> = (j + 1..=i + d).map(|t| cyc[t % d]).collect();
                        let mut ca = arc1;
                        ca.push(new_a);
                        let mut cb = arc2;
                        cb.push(new_b);
                        let da: Vec<Dart> = ca.clone();
                        let db: Vec<Dart> = cb.clone();
                        out.push(ExpansionSplit {
                            side_a: VertexStructure::new(SpeciesId::Aa, da, Payload::Aa(ca))?,
                            side_b: VertexStructure::new(SpeciesId::Aa, db, Payload::Aa(cb))?,
                            multiplicity: 1,
                        });
                    }
                }
            }
            (SpeciesId::Group(k), Payload::Group { elem, tail }) => {
                // All ordered factorizations elem = g1 * g2; g1 keeps the
                // original tail side. Unit factors are included: a label
                // can be presented as a mating with a unit-labeled vertex,
                // so the expansion must list those splits as well.
                let t = *tail;
                let h = self.other(t);
                for g1 in 0..k.order() as GroupElem {
                    let g2 = k.mul_el(k.inv_el(g1), *elem);
                    out.push(ExpansionSplit {
                        side_a: VertexStructure::new(
                            self.species.clone(),
                            vec![t, new_a],
                            Payload::Group { elem: g1, tail: t },
                        )?,
                        side_b: VertexStructure::new(
                            self.species.clone(),
                            vec![new_b, h],
                            Payload::Group { elem: g2, tail: new_b },
                        )?,
                        multiplicity: 1,
                    });
                }
            }
            (SpeciesId::Kk, _) => {
                return Err(Error::NotSupported(
                    "ideal expansions for the chord species are not implemented".into(),
                ));
            }
            _ => unreachable!("constructor enforces payload consistency"),
        }
        Ok(out)
    }

    /// Stable payload bytes relative to a local dart numbering, used by
    /// canonical encodings. `local` maps a dart id to its local slot.
    pub fn payload_bytes(&self, local: impl Fn(Dart) -> u8) -> Vec<u8> {
        match &self.payload {
            Payload::Cc => vec![],
            // The canonical dart order of an aa vertex follows the cyclic
            // order, so no bytes are needed beyond the edge table.
            Payload::Aa(_) => vec![],
            Payload::Kk(pairs) => {
                let mut loc: Vec<(u8, u8)> = pairs
                    .iter()
                    .map(|&(x, y)| {
                        let (a, b) = (local(x), local(y));
                        if a < b {
                            (a, b)
                        } else {
                            (b, a)
                        }
                    })
                    .collect();
                loc.sort_unstable();
                loc.into_iter().flat_map(|(a, b)| [a, b]).collect()
            }
            Payload::Group { elem, tail } => {
                // Element as read from the dart in local slot 0.
                let k = match &self.species {
                    SpeciesId::Group(k) => k,
                    _ => unreachable!(),
                };
                let g = if local(*tail) == 0 { *elem } else { k.star_el(*elem) };
                g.to_be_bytes().to_vec()
            }
        }
    }
}

/// Reads a cyclic word linearly starting just after `at`, omitting `at`.
fn linearize_after(cyc: &[Dart], at: Dart) -> Vec<Dart> {
    let pos = cyc.iter().position(|&d| d == at).expect("dart in cycle");
    (1..cyc.len()).map(|i| cyc[(pos + i) % cyc.len()]).collect()
}

fn permute<T: Copy>(items: &mut [T], k: usize, f: &mut impl FnMut(&[T])) {
    if k == items.len() {
        f(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, f);
        items.swap(k, i);
    }
}

fn perfect_matchings(darts: &[Dart], acc: &mut Vec<(Dart, Dart)>, f: &mut impl FnMut(&[(Dart, Dart)])) {
    if darts.is_empty() {
        f(acc);
        return;
    }
    let first = darts[0];
    for i in 1..darts.len() {
        let partner = darts[i];
        let rest: Vec<Dart> = darts[1..]
            .iter()
            .copied()
            .filter(|&d| d != partner)
            .collect();
        acc.push((first, partner));
        perfect_matchings(&rest, acc, f);
        acc.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cc(darts: &[Dart]) -> VertexStructure {
        VertexStructure::new(SpeciesId::Cc, darts.to_vec(), Payload::Cc).unwrap()
    }

    #[test]
    fn structure_counts() {
        assert_eq!(VertexStructure::list_structures(&SpeciesId::Cc, &[1, 2, 3, 4]).len(), 1);
        assert_eq!(VertexStructure::list_structures(&SpeciesId::Aa, &[1, 2, 3]).len(), 2);
        assert_eq!(VertexStructure::list_structures(&SpeciesId::Kk, &[1, 2, 3]).len(), 0);
        assert_eq!(VertexStructure::list_structures(&SpeciesId::Kk, &[1, 2, 3, 4]).len(), 3);
        let z2 = SpeciesId::group(GroupPresentation::z2());
        assert_eq!(VertexStructure::list_structures(&z2, &[1, 2]).len(), 2);
        assert_eq!(VertexStructure::list_structures(&z2, &[1, 2, 3]).len(), 0);
    }

    #[test]
    fn mate_cc_merges_dart_sets() {
        let a = cc(&[1, 2, 3]);
        let b = cc(&[4, 5, 6]);
        let m = VertexStructure::mate(&a, 2, &b, 5).unwrap();
        assert_eq!(m.darts, vec![1, 3, 4, 6]);
        assert_eq!(m.payload, Payload::Cc);
    }

    #[test]
    fn mate_is_symmetric() {
        // The mating relation makes the order of the two arguments
        // immaterial; check all species on small instances.
        let a = cc(&[1, 2, 3]);
        let b = cc(&[4, 5]);
        assert_eq!(
            VertexStructure::mate(&a, 2, &b, 4).unwrap(),
            VertexStructure::mate(&b, 4, &a, 2).unwrap()
        );

        let aa = |darts: Vec<Dart>, cyc: Vec<Dart>| {
            VertexStructure::new(SpeciesId::Aa, darts, Payload::Aa(cyc)).unwrap()
        };
        let x = aa(vec![1, 2, 3], vec![1, 3, 2]);
        let y = aa(vec![4, 5, 6], vec![4, 5, 6]);
        for (dx, dy) in [(1, 4), (3, 6), (2, 5)] {
            assert_eq!(
                VertexStructure::mate(&x, dx, &y, dy).unwrap(),
                VertexStructure::mate(&y, dy, &x, dx).unwrap()
            );
        }

        let z2 = SpeciesId::group(GroupPresentation::z2());
        let g = |darts: Vec<Dart>, elem, tail| {
            VertexStructure::new(z2.clone(), darts, Payload::Group { elem, tail }).unwrap()
        };
        let u = g(vec![1, 2], 1, 1);
        let v = g(vec![3, 4], 1, 3);
        assert_eq!(
            VertexStructure::mate(&u, 2, &v, 3).unwrap(),
            VertexStructure::mate(&v, 3, &u, 2).unwrap()
        );
    }

    #[test]
    fn mate_aa_splices() {
        let aa = |darts: Vec<Dart>, cyc: Vec<Dart>| {
            VertexStructure::new(SpeciesId::Aa, darts, Payload::Aa(cyc)).unwrap()
        };
        let a = aa(vec![1, 7, 8], vec![1, 7, 8]);
        let b = aa(vec![2, 5, 6], vec![2, 5, 6]);
        let m = VertexStructure::mate(&a, 1, &b, 2).unwrap();
        assert_eq!(m.payload, Payload::Aa(vec![5, 6, 7, 8]));
    }

    #[test]
    fn mate_group_multiplies_aligned() {
        let s3 = SpeciesId::group(GroupPresentation::s3(true).unwrap());
        let k = match &s3 {
            SpeciesId::Group(k) => k.clone(),
            _ => unreachable!(),
        };
        for ga in 0..6u16 {
            for gb in 0..6u16 {
                let a = VertexStructure::new(
                    s3.clone(),
                    vec![1, 2],
                    Payload::Group { elem: ga, tail: 1 },
                )
                .unwrap();
                let b = VertexStructure::new(
                    s3.clone(),
                    vec![3, 4],
                    Payload::Group { elem: gb, tail: 3 },
                )
                .unwrap();
                // Reading 1 -> 2 gives ga, then 3 -> 4 gives gb; mating 2
                // with 3 composes the segments into a path read 1 -> 4.
                let m = VertexStructure::mate(&a, 2, &b, 3).unwrap();
                let read = m.group_read_from(1);
                assert_eq!(read, k.mul_el(a.group_read_from(1), b.group_read_from(3)));
            }
        }
    }

    #[test]
    fn fake_structures() {
        assert!(cc(&[1, 2]).is_fake());
        assert!(!cc(&[1, 2, 3]).is_fake());
        let z2 = SpeciesId::group(GroupPresentation::z2());
        let unit = VertexStructure::new(z2.clone(), vec![1, 2], Payload::Group { elem: 0, tail: 1 }).unwrap();
        let sigma = VertexStructure::new(z2, vec![1, 2], Payload::Group { elem: 1, tail: 1 }).unwrap();
        assert!(unit.is_fake());
        assert!(!sigma.is_fake());
    }

    #[test]
    fn group_validation() {
        assert!(GroupPresentation::z2().validate().is_ok());
        assert!(GroupPresentation::s3(true).is_ok());
        // Identity star on a nonabelian group is not an anti-homomorphism.
        assert!(matches!(GroupPresentation::s3(false), Err(Error::InvalidGroup(_))));
    }

    #[test]
    fn group_direction_relation() {
        // (g read from a) and (g* read from b) are the same structure.
        let s3 = SpeciesId::group(GroupPresentation::s3(true).unwrap());
        let k = match &s3 {
            SpeciesId::Group(k) => k.clone(),
            _ => unreachable!(),
        };
        for g in 0..6u16 {
            let one = VertexStructure::new(s3.clone(), vec![5, 9], Payload::Group { elem: g, tail: 5 }).unwrap();
            let two = VertexStructure::new(
                s3.clone(),
                vec![5, 9],
                Payload::Group { elem: k.star_el(g), tail: 9 },
            )
            .unwrap();
            assert_eq!(one, two);
        }
    }

    #[test]
    fn expansion_counts() {
        let v = cc(&[1, 2, 3, 4]);
        assert_eq!(v.ideal_expansions(100, 101).unwrap().len(), 7);

        let aa = VertexStructure::new(SpeciesId::Aa, vec![1, 2, 3, 4], Payload::Aa(vec![1, 2, 3, 4])).unwrap();
        assert_eq!(aa.ideal_expansions(100, 101).unwrap().len(), 6);

        let z2 = SpeciesId::group(GroupPresentation::z2());
        let sigma = VertexStructure::new(z2.clone(), vec![1, 2], Payload::Group { elem: 1, tail: 1 }).unwrap();
        let sigma_splits = sigma.ideal_expansions(100, 101).unwrap();
        // sigma factors as unit * sigma and sigma * unit.
        assert_eq!(sigma_splits.len(), 2);
        let unit = VertexStructure::new(z2, vec![1, 2], Payload::Group { elem: 0, tail: 1 }).unwrap();
        // unit factors as unit * unit and sigma * sigma.
        assert_eq!(unit.ideal_expansions(100, 101).unwrap().len(), 2);

        let kk = VertexStructure::new(SpeciesId::Kk, vec![1, 2, 3, 4], Payload::Kk(vec![(1, 2), (3, 4)])).unwrap();
        assert!(matches!(kk.ideal_expansions(100, 101), Err(Error::NotSupported(_))));
    }

    #[test]
    fn expansions_recontract() {
        // Mating the two children along the fresh edge restores the parent.
        let vertices = vec![
            cc(&[1, 2, 3, 4]),
            VertexStructure::new(SpeciesId::Aa, vec![1, 2, 3, 4, 5], Payload::Aa(vec![1, 3, 2, 5, 4])).unwrap(),
            VertexStructure::new(
                SpeciesId::group(GroupPresentation::s3(true).unwrap()),
                vec![1, 2],
                Payload::Group { elem: 4, tail: 1 },
            )
            .unwrap(),
        ];
        for v in vertices {
            for split in v.ideal_expansions(100, 101).unwrap() {
                assert_eq!(split.multiplicity, 1);
                let back = VertexStructure::mate(&split.side_a, 100, &split.side_b, 101).unwrap();
                assert_eq!(back, v, "expansion failed to recontract for {v:?}");
            }
        }
    }
}
