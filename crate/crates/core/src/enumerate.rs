//! Basis enumeration: all nonzero graph classes with a given vertex count
//! and rank, for any species and subcomplex filter.
//!
//! The vertex count k and rank r = 1 - Euler characteristic determine the
//! edge count e = k + r - 1. Connected filters enumerate connected graphs
//! directly; the others assemble disjoint unions of connected classes.
//! Every vertex has valence >= 2, so each connected piece has at least as
//! many edges as vertices and nonempty cells always have r >= 1.

use std::collections::BTreeMap;

use crate::graph::{
    canonical_class, union_graphs, ComplexFilter, DecoratedGraph, Encoding, Oriented,
    SignedClass,
};
use crate::species::{Dart, SpeciesId, VertexStructure};
use crate::{Error, Result};

/// Environment variable capping how many classes a single cell may hold.
pub const MAX_CELLS_ENV: &str = "GRAPHOPLEX_MAX_CELLS";

thread_local! {
    static CAP_OVERRIDE: std::cell::Cell<Option<usize>> = const { std::cell::Cell::new(None) };
}

/// Runs `f` with the cell cap forced to `cap` on this thread (testing and
/// embedding hook; the CLI uses the environment variable).
pub fn with_cell_cap<R>(cap: usize, f: impl FnOnce() -> R) -> R {
    CAP_OVERRIDE.with(|c| c.set(Some(cap)));
    let out = f();
    CAP_OVERRIDE.with(|c| c.set(None));
    out
}

fn cell_cap() -> usize {
    if let Some(cap) = CAP_OVERRIDE.with(|c| c.get()) {
        return cap;
    }
    std::env::var(MAX_CELLS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(usize::MAX)
}

/// Nonincreasing sequences of length k, entries >= 2, summing to 2e.
fn degree_sequences(k: usize, e: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(cur: &mut Vec<usize>, k: usize, remaining: usize, max: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            if remaining == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let slots_left = k - cur.len();
        for d in (2..=max.min(remaining)).rev() {
            // The rest must fit with entries in [2, d].
            let rest = remaining - d;
            if rest < 2 * (slots_left - 1) || rest > d * (slots_left - 1) {
                continue;
            }
            cur.push(d);
            rec(cur, k, rest, d, out);
            cur.pop();
        }
    }
    if k == 0 {
        if e == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(&mut cur, k, 2 * e, 2 * e, &mut out);
    out
}

/// All multigraph shapes with the given vertex degrees, as sorted edge
/// multisets over vertex indices (loops allowed). Each shape appears
/// exactly once per labeled-vertex edge multiset.
fn shapes(degrees: &[usize]) -> Vec<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    let mut rem: Vec<usize> = degrees.to_vec();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    fn rec(
        rem: &mut Vec<usize>,
        edges: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        let Some(v) = rem.iter().position(|&d| d > 0) else {
            out.push(edges.clone());
            return;
        };
        // All remaining edges at v have first coordinate v; keep the edge
        // list sorted to enumerate each multiset once.
        let u_min = match edges.last() {
            Some(&(a, b)) if a == v => b,
            _ => v,
        };
        for u in u_min..rem.len() {
            if u == v {
                if rem[v] < 2 {
                    continue;
                }
                rem[v] -= 2;
            } else {
                if rem[v] < 1 || rem[u] < 1 {
                    continue;
                }
                rem[v] -= 1;
                rem[u] -= 1;
            }
            edges.push((v, u));
            rec(rem, edges, out);
            edges.pop();
            if u == v {
                rem[v] += 2;
            } else {
                rem[v] += 1;
                rem[u] += 1;
            }
        }
    }
    rec(&mut rem, &mut edges, &mut out);
    out
}

fn shape_is_connected(k: usize, edges: &[(usize, usize)]) -> bool {
    if k == 0 {
        return false;
    }
    let mut parent: Vec<usize> = (0..k).collect();
    fn find(p: &mut Vec<usize>, mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
        }
    }
    let root = find(&mut parent, 0);
    (1..k).all(|v| find(&mut parent, v) == root)
}

/// Builds the dart-level graph of a shape: edge m gets darts (2m, 2m+1)
/// placed at its two endpoints.
fn shape_darts(k: usize, edges: &[(usize, usize)]) -> (Vec<Vec<Dart>>, Vec<(Dart, Dart)>) {
    let mut vertex_darts: Vec<Vec<Dart>> = vec![Vec::new(); k];
    let mut dart_edges = Vec::with_capacity(edges.len());
    for (m, &(a, b)) in edges.iter().enumerate() {
        let (da, db) = (2 * m as Dart, 2 * m as Dart + 1);
        vertex_darts[a].push(da);
        vertex_darts[b].push(db);
        dart_edges.push((da, db));
    }
    (vertex_darts, dart_edges)
}

/// Every decorated graph on one shape: the cartesian product of each
/// vertex's admissible structures.
fn decorate_shape(
    species: &SpeciesId,
    vertex_darts: &[Vec<Dart>],
    dart_edges: &[(Dart, Dart)],
    mut sink: impl FnMut(DecoratedGraph) -> Result<()>,
) -> Result<()> {
    let choices: Vec<Vec<VertexStructure>> = vertex_darts
        .iter()
        .map(|d| VertexStructure::list_structures(species, d))
        .collect();
    if choices.iter().any(|c| c.is_empty()) {
        return Ok(());
    }
    let mut idx = vec![0usize; choices.len()];
    loop {
        let vertices: Vec<VertexStructure> =
            idx.iter().enumerate().map(|(v, &i)| choices[v][i].clone()).collect();
        sink(DecoratedGraph::new(species.clone(), vertices, dart_edges.to_vec())?)?;
        // Odometer increment.
        let mut v = 0;
        loop {
            if v == idx.len() {
                return Ok(());
            }
            idx[v] += 1;
            if idx[v] < choices[v].len() {
                break;
            }
            idx[v] = 0;
            v += 1;
        }
    }
}

/// All nonzero connected classes with k vertices and e edges, sorted by
/// encoding.
pub fn enumerate_connected(
    species: &SpeciesId,
    k: usize,
    e: usize,
) -> Result<Vec<SignedClass>> {
    let cap = cell_cap();
    let mut found: BTreeMap<Encoding, SignedClass> = BTreeMap::new();
    if k == 0 || e < k {
        return Ok(Vec::new());
    }
    for degrees in degree_sequences(k, e) {
        for shape in shapes(&degrees) {
            if !shape_is_connected(k, &shape) {
                continue;
            }
            let (vertex_darts, dart_edges) = shape_darts(k, &shape);
            decorate_shape(species, &vertex_darts, &dart_edges, |g| {
                let c = canonical_class(&Oriented::standard(g))?;
                if !c.is_zero {
                    found.insert(
                        c.encoding.clone(),
                        SignedClass { encoding: c.encoding, sign: 1, is_zero: false, rep: c.rep },
                    );
                    if found.len() > cap {
                        return Err(Error::ResourceLimit(format!(
                            "cell ({k}, e={e}) exceeds {MAX_CELLS_ENV}"
                        )));
                    }
                }
                Ok(())
            })?;
        }
    }
    Ok(found.into_values().collect())
}

/// All nonzero classes (connectivity not required) with k vertices and e
/// edges: disjoint unions of connected classes, one multiset at a time.
fn enumerate_all(species: &SpeciesId, k: usize, e: usize) -> Result<Vec<SignedClass>> {
    let cap = cell_cap();
    // Connected cells that could appear as components.
    let mut cells: Vec<(usize, usize, Vec<SignedClass>)> = Vec::new();
    for k1 in 1..=k {
        for e1 in k1..=e {
            // The rest of the partition must also fit components with
            // e_i >= k_i, so skip cells the remainder can never complete.
            if e - e1 < k - k1 {
                continue;
            }
            let list = enumerate_connected(species, k1, e1)?;
            if !list.is_empty() {
                cells.push((k1, e1, list));
            }
        }
    }
    let mut found: BTreeMap<Encoding, SignedClass> = BTreeMap::new();
    // Choose a nondecreasing sequence of (cell, index) pairs summing to
    // (k, e); repeats allowed.
    fn rec(
        cells: &[(usize, usize, Vec<SignedClass>)],
        min_cell: usize,
        min_idx: usize,
        k_rem: usize,
        e_rem: usize,
        chosen: &mut Vec<Oriented>,
        found: &mut BTreeMap<Encoding, SignedClass>,
        cap: usize,
    ) -> Result<()> {
        if k_rem == 0 {
            if e_rem != 0 || chosen.is_empty() {
                return Ok(());
            }
            let mut it = chosen.iter();
            let mut acc = it.next().unwrap().clone();
            for g in it {
                acc = union_graphs(&acc, g)?;
            }
            let c = canonical_class(&acc)?;
            if !c.is_zero {
                found.insert(
                    c.encoding.clone(),
                    SignedClass { encoding: c.encoding, sign: 1, is_zero: false, rep: c.rep },
                );
                if found.len() > cap {
                    return Err(Error::ResourceLimit(format!(
                        "cell exceeds {MAX_CELLS_ENV}"
                    )));
                }
            }
            return Ok(());
        }
        for ci in min_cell..cells.len() {
            let (k1, e1, list) = &cells[ci];
            if *k1 > k_rem || *e1 > e_rem {
                continue;
            }
            let start = if ci == min_cell { min_idx } else { 0 };
            for ii in start..list.len() {
                chosen.push((*list[ii].rep).clone());
                rec(cells, ci, ii, k_rem - k1, e_rem - e1, chosen, found, cap)?;
                chosen.pop();
            }
        }
        Ok(())
    }
    rec(&cells, 0, 0, k, e, &mut Vec::new(), &mut found, cap)?;
    Ok(found.into_values().collect())
}

/// All nonzero classes with k vertices and rank r = 1 - chi satisfying the
/// filter, sorted by encoding. The edge count is e = k + r - 1.
pub fn enumerate_basis(
    species: &SpeciesId,
    k: usize,
    r: usize,
    filter: ComplexFilter,
) -> Result<Vec<SignedClass>> {
    if k == 0 || k + r == 0 {
        return Ok(Vec::new());
    }
    let e = match (k + r).checked_sub(1) {
        Some(e) => e,
        None => return Ok(Vec::new()),
    };
    let list = if filter.connected_only() {
        enumerate_connected(species, k, e)?
    } else {
        enumerate_all(species, k, e)?
    };
    Ok(list.into_iter().filter(|c| filter.admits(&c.rep.graph)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::species::{GroupPresentation, Payload};

    /// Independent shape source: raw fixed-point-free involutions on the
    /// dart set of each degree sequence, deduplicated by canonical shape.
    fn oracle_shapes(k: usize, e: usize) -> Vec<Oriented> {
        let mut reps: BTreeMap<Encoding, Oriented> = BTreeMap::new();
        for degrees in degree_sequences(k, e) {
            // Vertex i owns darts offset..offset+degrees[i].
            let mut vertex_of = Vec::new();
            for (v, &d) in degrees.iter().enumerate() {
                vertex_of.extend(std::iter::repeat(v).take(d));
            }
            let n = vertex_of.len();
            let mut paired = vec![usize::MAX; n];
            fn rec(
                paired: &mut Vec<usize>,
                vertex_of: &[usize],
                k: usize,
                reps: &mut BTreeMap<Encoding, Oriented>,
            ) {
                let Some(a) = paired.iter().position(|&p| p == usize::MAX) else {
                    let mut edges = Vec::new();
                    for (d, &p) in paired.iter().enumerate() {
                        if d < p {
                            edges.push((d as Dart, p as Dart));
                        }
                    }
                    let vertices: Vec<VertexStructure> = (0..k)
                        .map(|v| {
                            let darts: Vec<Dart> = vertex_of
                                .iter()
                                .enumerate()
                                .filter(|&(_, &w)| w == v)
                                .map(|(d, _)| d as Dart)
                                .collect();
                            VertexStructure::new(SpeciesId::Cc, darts, Payload::Cc).unwrap()
                        })
                        .collect();
                    let g = DecoratedGraph::new(SpeciesId::Cc, vertices, edges).unwrap();
                    let c = canonical_class(&Oriented::standard(g)).unwrap();
                    reps.entry(c.encoding).or_insert_with(|| (*c.rep).clone());
                    return;
                };
                for b in a + 1..paired.len() {
                    if paired[b] != usize::MAX {
                        continue;
                    }
                    paired[a] = b;
                    paired[b] = a;
                    rec(paired, vertex_of, k, reps);
                    paired[a] = usize::MAX;
                    paired[b] = usize::MAX;
                }
            }
            rec(&mut paired, &vertex_of, k, &mut reps);
        }
        reps.into_values().collect()
    }

    /// Decorates every oracle shape and counts distinct nonzero classes.
    fn oracle_count(species: &SpeciesId, k: usize, e: usize) -> usize {
        let mut found: BTreeMap<Encoding, ()> = BTreeMap::new();
        for shape in oracle_shapes(k, e) {
            let vertex_darts: Vec<Vec<Dart>> =
                shape.graph.vertices().iter().map(|v| v.darts.clone()).collect();
            let dart_edges = shape.graph.edges().to_vec();
            decorate_shape(species, &vertex_darts, &dart_edges, |g| {
                let c = canonical_class(&Oriented::standard(g))?;
                if !c.is_zero {
                    found.insert(c.encoding, ());
                }
                Ok(())
            })
            .unwrap();
        }
        found.len()
    }

    #[test]
    fn trivial_group_connected_matches_mod_four_rule() {
        let species = SpeciesId::group(GroupPresentation::trivial());
        for k in 1..=8 {
            let basis = enumerate_basis(&species, k, 1, ComplexFilter::Connected).unwrap();
            let expected = usize::from(k % 4 == 3);
            assert_eq!(basis.len(), expected, "k = {k}");
        }
    }

    #[test]
    fn zero_vertices_gives_empty_basis() {
        for f in [ComplexFilter::Full, ComplexFilter::Connected] {
            assert!(enumerate_basis(&SpeciesId::Cc, 0, 1, f).unwrap().is_empty());
        }
    }

    #[test]
    fn group_cells_above_rank_one_are_empty() {
        let species = SpeciesId::group(GroupPresentation::z2());
        for k in 1..=5 {
            for r in 2..=3 {
                assert!(enumerate_basis(&species, k, r, ComplexFilter::Full).unwrap().is_empty());
            }
        }
    }

    #[test]
    fn full_counts_match_involution_oracle() {
        let z2 = SpeciesId::group(GroupPresentation::z2());
        for (species, name) in [(&SpeciesId::Cc, "cc"), (&z2, "z2")] {
            for k in 1..=5usize {
                for e in k..=6usize {
                    let r = e - k + 1;
                    let basis = enumerate_basis(species, k, r, ComplexFilter::Full).unwrap();
                    assert_eq!(
                        basis.len(),
                        oracle_count(species, k, e),
                        "{name} ({k}, {e})"
                    );
                }
            }
        }
    }

    #[test]
    fn full_counts_match_involution_oracle_aa() {
        for k in 1..=5usize {
            for e in k..=6usize {
                // A single vertex of valence 2e carries (2e-1)! cyclic
                // orders; past e = 4 that count is out of desk scale, so
                // those two cells are left out of the window.
                if k == 1 && e >= 5 {
                    continue;
                }
                let r = e - k + 1;
                let basis = enumerate_basis(&SpeciesId::Aa, k, r, ComplexFilter::Full).unwrap();
                assert_eq!(basis.len(), oracle_count(&SpeciesId::Aa, k, e), "aa ({k}, {e})");
            }
        }
    }

    #[test]
    fn qgraph_membership_cross_check() {
        for (k, r) in [(2usize, 2usize), (3, 2), (4, 2), (3, 3)] {
            let connected = enumerate_basis(&SpeciesId::Cc, k, r, ComplexFilter::Connected).unwrap();
            let qgraph = enumerate_basis(&SpeciesId::Cc, k, r, ComplexFilter::QGraph).unwrap();
            let expected: Vec<&Encoding> = connected
                .iter()
                .filter(|c| c.rep.graph.all_real() && c.rep.graph.max_valence() > 2)
                .map(|c| &c.encoding)
                .collect();
            let got: Vec<&Encoding> = qgraph.iter().map(|c| &c.encoding).collect();
            assert_eq!(got, expected, "({k}, {r})");
        }
    }

    #[test]
    fn cell_cap_is_enforced() {
        // The (2, 2) cc cell contains theta, so a zero cap must trip.
        let res =
            with_cell_cap(0, || enumerate_basis(&SpeciesId::Cc, 2, 2, ComplexFilter::Connected));
        assert!(matches!(res, Err(Error::ResourceLimit(_))));
        // And the same call succeeds once the cap is lifted.
        let ok = enumerate_basis(&SpeciesId::Cc, 2, 2, ComplexFilter::Connected).unwrap();
        assert!(!ok.is_empty());
    }

    #[test]
    fn connected_union_appears_in_full_cell() {
        // Two distinct triangles (trivial group 3-gon + CC triangle don't
        // mix species; use two CC thetas vs distinct classes): the FULL
        // (4, 3) CC cell contains the union of two bigon-free pieces such
        // as theta (2 vertices, 3 edges) with a theta; instead check that
        // FULL contains strictly more than CONNECTED where unions exist.
        let full = enumerate_basis(&SpeciesId::Cc, 4, 3, ComplexFilter::Full).unwrap();
        let connected = enumerate_basis(&SpeciesId::Cc, 4, 3, ComplexFilter::Connected).unwrap();
        assert!(full.len() >= connected.len());
        let union_count = full.iter().filter(|c| !c.rep.graph.is_connected()).count();
        assert_eq!(union_count, full.len() - connected.len());
    }
}
