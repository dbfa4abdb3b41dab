//! Exact symplectic polynomial algebra mirroring the graph calculus:
//! polynomials in `p_1..p_n, q_1..q_n`, cutting (partial derivatives), the
//! Poisson bracket, Hamiltonian matrices, the Chevalley-Eilenberg boundary on
//! wedges, graph state sums, the orthonormal wedge pairing, and the Moyal
//! star product. Everything is over the rationals with zero tolerance.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_traits::{One, Zero};

use crate::complex::ChainVector;
use crate::graph::{Oriented, SignedClass};
use crate::species::SpeciesId;
use crate::{Error, Rat, Result};

/// One of the `2n` symplectic coordinates, 1-indexed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    P(usize),
    Q(usize),
}

/// Index of a variable inside an exponent vector of length `2n`.
fn var_slot(n: usize, v: Var) -> usize {
    match v {
        Var::P(i) => {
            assert!(i >= 1 && i <= n, "p index out of range");
            i - 1
        }
        Var::Q(i) => {
            assert!(i >= 1 && i <= n, "q index out of range");
            n + i - 1
        }
    }
}

/// A monomial in `p_1..p_n, q_1..q_n`, stored as an exponent vector with the
/// `p` block first. The total order is graded, then lexicographic on the
/// exponent vector; it only makes sense between monomials of equal `n`,
/// which every container here enforces by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Monomial {
    n: usize,
    exps: Vec<u32>,
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.degree(), &self.exps).cmp(&(other.degree(), &other.exps))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Monomial {
    /// The unit monomial (all exponents zero).
    pub fn one(n: usize) -> Self {
        Monomial { n, exps: vec![0; 2 * n] }
    }

    /// The monomial consisting of a single variable.
    pub fn var(n: usize, v: Var) -> Self {
        let mut m = Self::one(n);
        m.exps[var_slot(n, v)] += 1;
        m
    }

    /// Builds a monomial from an explicit exponent vector of length `2n`
    /// (`p` block first, then the `q` block).
    pub fn from_exps(n: usize, exps: Vec<u32>) -> Self {
        assert_eq!(exps.len(), 2 * n, "exponent vector must have length 2n");
        Monomial { n, exps }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn slot(&self, v: Var) -> usize {
        var_slot(self.n, v)
    }

    pub fn degree(&self) -> u32 {
        self.exps.iter().sum()
    }

    pub fn exponent(&self, v: Var) -> u32 {
        self.exps[self.slot(v)]
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        assert_eq!(self.n, other.n, "mixed ambient dimensions");
        let exps = self
            .exps
            .iter()
            .zip(&other.exps)
            .map(|(a, b)| a + b)
            .collect();
        Monomial { n: self.n, exps }
    }

    /// Differentiates with respect to `v`: returns the old exponent and the
    /// reduced monomial, or None when the variable is absent.
    pub fn partial(&self, v: Var) -> Option<(u32, Monomial)> {
        let s = self.slot(v);
        if self.exps[s] == 0 {
            return None;
        }
        let mut exps = self.exps.clone();
        exps[s] -= 1;
        Some((self.exps[s], Monomial { n: self.n, exps }))
    }

    /// Reinterprets the monomial inside a larger ambient dimension, padding
    /// the fresh `p` and `q` slots with zero exponents.
    pub fn embed(&self, new_n: usize) -> Monomial {
        assert!(new_n >= self.n, "cannot shrink the ambient dimension");
        let mut exps = vec![0u32; 2 * new_n];
        exps[..self.n].copy_from_slice(&self.exps[..self.n]);
        exps[new_n..new_n + self.n].copy_from_slice(&self.exps[self.n..]);
        Monomial { n: new_n, exps }
    }

    /// Canonical text: factors in slot order, `p` variables first, e.g.
    /// `p1^2*q3`; the unit monomial prints as `1`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (s, &e) in self.exps.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !out.is_empty() {
                out.push('*');
            }
            let (letter, idx) =
                if s < self.n { ('p', s + 1) } else { ('q', s - self.n + 1) };
            if e == 1 {
                let _ = write!(out, "{letter}{idx}");
            } else {
                let _ = write!(out, "{letter}{idx}^{e}");
            }
        }
        if out.is_empty() {
            out.push('1');
        }
        out
    }
}

/// A polynomial with rational coefficients and no zero terms. The same type
/// backs both the quadratic-and-above algebra (build with [`PolyElement::qa_new`])
/// and the full algebra used by the star product (build with
/// [`PolyElement::moyal_new`]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyElement {
    n: usize,
    terms: BTreeMap<Monomial, Rat>,
}

impl PolyElement {
    pub fn zero(n: usize) -> Self {
        PolyElement { n, terms: BTreeMap::new() }
    }

    fn collect(n: usize, terms: impl IntoIterator<Item = (Monomial, Rat)>) -> Self {
        let mut out = Self::zero(n);
        for (m, c) in terms {
            out.add_monomial(m, c);
        }
        out
    }

    /// Constructor for elements with every term of total degree at least 2.
    pub fn qa_new(n: usize, terms: Vec<(Monomial, Rat)>) -> Result<Self> {
        for (m, c) in &terms {
            if !c.is_zero() && m.degree() < 2 {
                return Err(Error::DegreeTooLow(m.degree()));
            }
        }
        Ok(Self::collect(n, terms))
    }

    /// Constructor for the full polynomial algebra: constants and linear
    /// terms are allowed.
    pub fn moyal_new(n: usize, terms: Vec<(Monomial, Rat)>) -> Self {
        Self::collect(n, terms)
    }

    /// The polynomial `c * m`.
    pub fn monomial(n: usize, m: Monomial, c: Rat) -> Self {
        Self::collect(n, [(m, c)])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rat)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> Rat {
        self.terms.get(m).cloned().unwrap_or_else(Rat::zero)
    }

    /// True when every term has total degree at least 2.
    pub fn is_qa(&self) -> bool {
        self.terms.keys().all(|m| m.degree() >= 2)
    }

    fn add_monomial(&mut self, m: Monomial, c: Rat) {
        assert_eq!(m.n, self.n, "mixed ambient dimensions");
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(old) => {
                let sum = std::mem::replace(old, Rat::zero()) + c;
                if sum.is_zero() {
                    self.terms.remove(&m);
                } else {
                    *old = sum;
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "mixed ambient dimensions");
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_monomial(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-Rat::one()))
    }

    pub fn scale(&self, c: &Rat) -> Self {
        Self::collect(
            self.n,
            self.terms.iter().map(|(m, v)| (m.clone(), v.clone() * c.clone())),
        )
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "mixed ambient dimensions");
        let mut out = Self::zero(self.n);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_monomial(ma.mul(mb), ca.clone() * cb.clone());
            }
        }
        out
    }

    /// Cutting: the standard partial derivative with respect to `v`.
    pub fn partial_derivative(&self, v: Var) -> Self {
        let mut out = Self::zero(self.n);
        for (m, c) in &self.terms {
            if let Some((e, reduced)) = m.partial(v) {
                out.add_monomial(reduced, c.clone() * Rat::from_integer(e.into()));
            }
        }
        out
    }

    pub fn embed(&self, new_n: usize) -> Self {
        Self::collect(
            new_n,
            self.terms.iter().map(|(m, c)| (m.embed(new_n), c.clone())),
        )
    }

    /// Canonical text: terms in ascending monomial order with explicit
    /// parenthesized rational coefficients, e.g. `(-1/2)*p1*q2 + (3)*q1^2`.
    pub fn to_text(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(m, c)| format!("({c})*{}", m.to_text()))
            .collect();
        parts.join(" + ")
    }
}

/// Poisson bracket: sum over `i` of dF/dp_i dH/dq_i - dF/dq_i dH/dp_i.
pub fn poisson_bracket(f: &PolyElement, h: &PolyElement) -> PolyElement {
    assert_eq!(f.n, h.n, "mixed ambient dimensions");
    let mut out = PolyElement::zero(f.n);
    for i in 1..=f.n {
        let a = f
            .partial_derivative(Var::P(i))
            .mul(&h.partial_derivative(Var::Q(i)));
        let b = f
            .partial_derivative(Var::Q(i))
            .mul(&h.partial_derivative(Var::P(i)));
        out = out.add(&a).sub(&b);
    }
    out
}

/// The matrix of the linear vector field attached to a homogeneous
/// degree-two Hamiltonian, acting on the ordered basis
/// `p_1..p_n, q_1..q_n`. Columns are images of basis vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HamiltonianMatrix {
    n: usize,
    entries: Vec<Vec<Rat>>,
}

/// The field of a degree-two Hamiltonian: `p_i` maps to dH/dq_i and `q_i`
/// maps to -dH/dp_i. The assignment is a Lie anti-homomorphism into the
/// symplectic Lie algebra.
pub fn hamiltonian_matrix(h: &PolyElement) -> Result<HamiltonianMatrix> {
    if h.terms.keys().any(|m| m.degree() != 2) {
        return Err(Error::NotDegreeTwo);
    }
    let n = h.n;
    let dim = 2 * n;
    let mut entries = vec![vec![Rat::zero(); dim]; dim];
    for col in 0..dim {
        let image = if col < n {
            h.partial_derivative(Var::Q(col + 1))
        } else {
            h.partial_derivative(Var::P(col - n + 1)).scale(&-Rat::one())
        };
        for (m, c) in image.terms() {
            debug_assert_eq!(m.degree(), 1);
            let row = m.exps.iter().position(|&e| e == 1).expect("linear term");
            entries[row][col] = c.clone();
        }
    }
    Ok(HamiltonianMatrix { n, entries })
}

impl HamiltonianMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, row: usize, col: usize) -> &Rat {
        &self.entries[row][col]
    }

    /// The image of the `col`-th basis vector as a linear polynomial.
    pub fn image_of(&self, col: usize) -> PolyElement {
        let mut out = PolyElement::zero(self.n);
        for row in 0..2 * self.n {
            let v = if row < self.n { Var::P(row + 1) } else { Var::Q(row - self.n + 1) };
            out.add_monomial(Monomial::var(self.n, v), self.entries[row][col].clone());
        }
        out
    }

    fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let dim = 2 * self.n;
        let mut entries = vec![vec![Rat::zero(); dim]; dim];
        for r in 0..dim {
            for c in 0..dim {
                let mut acc = Rat::zero();
                for t in 0..dim {
                    acc += self.entries[r][t].clone() * other.entries[t][c].clone();
                }
                entries[r][c] = acc;
            }
        }
        HamiltonianMatrix { n: self.n, entries }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let dim = 2 * self.n;
        let entries = (0..dim)
            .map(|r| {
                (0..dim)
                    .map(|c| self.entries[r][c].clone() - other.entries[r][c].clone())
                    .collect()
            })
            .collect();
        HamiltonianMatrix { n: self.n, entries }
    }

    pub fn commutator(a: &Self, b: &Self) -> Self {
        a.mul(b).sub(&b.mul(a))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|row| row.iter().all(|e| e.is_zero()))
    }

    /// Membership in the symplectic Lie algebra: `M^T J + J M = 0` for the
    /// standard form `J` sending `p_i` to `-q_i` and `q_i` to `p_i`.
    pub fn is_sp(&self) -> bool {
        let n = self.n;
        let dim = 2 * n;
        // (M^T J)_{rc} = sum_t M_{tr} J_{tc}; J_{tc} = [t < n && c == t + n]
        // - [t >= n && c == t - n].
        let j = |t: usize, c: usize| -> i8 {
            if t < n && c == t + n {
                1
            } else if t >= n && c == t - n {
                -1
            } else {
                0
            }
        };
        for r in 0..dim {
            for c in 0..dim {
                let mut acc = Rat::zero();
                for t in 0..dim {
                    match j(t, c) {
                        1 => acc += self.entries[t][r].clone(),
                        -1 => acc -= self.entries[t][r].clone(),
                        _ => {}
                    }
                    match j(r, t) {
                        1 => acc += self.entries[t][c].clone(),
                        -1 => acc -= self.entries[t][c].clone(),
                        _ => {}
                    }
                }
                if !acc.is_zero() {
                    return false;
                }
            }
        }
        true
    }

    /// Extends the linear action to a derivation on polynomials.
    pub fn derivation_on_poly(&self, f: &PolyElement) -> PolyElement {
        assert_eq!(self.n, f.n, "mixed ambient dimensions");
        let mut out = PolyElement::zero(self.n);
        for (m, c) in f.terms() {
            for col in 0..2 * self.n {
                let v = if col < self.n {
                    Var::P(col + 1)
                } else {
                    Var::Q(col - self.n + 1)
                };
                if let Some((e, reduced)) = m.partial(v) {
                    let factor = c.clone() * Rat::from_integer(e.into());
                    let image = self.image_of(col);
                    for (im, ic) in image.terms() {
                        out.add_monomial(reduced.mul(im), factor.clone() * ic.clone());
                    }
                }
            }
        }
        out
    }

    /// Extends the derivation across wedge slots by the Leibniz rule.
    pub fn derivation_on_wedge(&self, w: &WedgeElement) -> WedgeElement {
        assert_eq!(self.n, w.n, "mixed ambient dimensions");
        let mut out = WedgeElement::zero(self.n);
        for (key, c) in &w.terms {
            for s in 0..key.len() {
                let acted = self.derivation_on_poly(&PolyElement::monomial(
                    self.n,
                    key[s].clone(),
                    Rat::one(),
                ));
                for (m, mc) in acted.terms() {
                    let mut slots = key.clone();
                    slots[s] = m.clone();
                    out.add_term(slots, c.clone() * mc.clone());
                }
            }
        }
        out
    }
}

/// An element of the exterior algebra on monomials: a sparse sum of wedges
/// of monomials. Keys are strictly increasing in the monomial order;
/// antisymmetry is normalized at insertion and wedges with a repeated
/// monomial vanish.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WedgeElement {
    n: usize,
    terms: BTreeMap<Vec<Monomial>, Rat>,
}

/// Sorts the slots in place and returns the permutation sign, or None when
/// two slots coincide (the wedge is zero).
fn sort_with_sign(slots: &mut [Monomial]) -> Option<i8> {
    let mut sign = 1i8;
    for i in 1..slots.len() {
        let mut j = i;
        while j > 0 && slots[j] < slots[j - 1] {
            slots.swap(j, j - 1);
            sign = -sign;
            j -= 1;
        }
        if j > 0 && slots[j] == slots[j - 1] {
            return None;
        }
    }
    Some(sign)
}

impl WedgeElement {
    pub fn zero(n: usize) -> Self {
        WedgeElement { n, terms: BTreeMap::new() }
    }

    /// The normalized wedge of the given monomials with coefficient one.
    pub fn from_monomials(n: usize, slots: Vec<Monomial>) -> Self {
        let mut out = Self::zero(n);
        out.add_term(slots, Rat::one());
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<Monomial>, &Rat)> {
        self.terms.iter()
    }

    /// Adds `c` times the wedge of `slots`, normalizing the slot order.
    pub fn add_term(&mut self, mut slots: Vec<Monomial>, c: Rat) {
        if c.is_zero() {
            return;
        }
        for m in &slots {
            assert_eq!(m.n, self.n, "mixed ambient dimensions");
        }
        let Some(sign) = sort_with_sign(&mut slots) else {
            return;
        };
        let signed = if sign < 0 { -c } else { c };
        match self.terms.get_mut(&slots) {
            Some(old) => {
                let sum = std::mem::replace(old, Rat::zero()) + signed;
                if sum.is_zero() {
                    self.terms.remove(&slots);
                } else {
                    *old = sum;
                }
            }
            None => {
                self.terms.insert(slots, signed);
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "mixed ambient dimensions");
        let mut out = self.clone();
        for (key, c) in &other.terms {
            out.add_term(key.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-Rat::one()))
    }

    pub fn scale(&self, c: &Rat) -> Self {
        let mut out = Self::zero(self.n);
        for (key, v) in &self.terms {
            out.add_term(key.clone(), v.clone() * c.clone());
        }
        out
    }

    pub fn embed(&self, new_n: usize) -> Self {
        let mut out = Self::zero(new_n);
        for (key, c) in &self.terms {
            let slots = key.iter().map(|m| m.embed(new_n)).collect();
            out.add_term(slots, c.clone());
        }
        out
    }

    /// Canonical text: terms in ascending key order, each as
    /// `(coeff)*[m1 ^ m2 ^ ...]`; the empty wedge prints as `[]`.
    pub fn to_text(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(key, c)| {
                let slots: Vec<String> = key.iter().map(|m| m.to_text()).collect();
                format!("({c})*[{}]", slots.join(" ^ "))
            })
            .collect();
        parts.join(" + ")
    }
}

/// Boundary of the standard complex on wedges: sum over slot pairs `s < t`
/// of the bracket of the two slots wedged with the rest, with the sign
/// `(-1)^{s+t-1}` for 1-based slot positions.
pub fn ce_boundary(w: &WedgeElement) -> WedgeElement {
    let n = w.n;
    let mut out = WedgeElement::zero(n);
    for (key, c) in w.terms() {
        let k = key.len();
        for s in 0..k {
            for t in (s + 1)..k {
                // 1-based positions s+1 and t+1 give exponent s+t+1.
                let signed = if (s + t) % 2 == 1 { c.clone() } else { -c.clone() };
                let br = poisson_bracket(
                    &PolyElement::monomial(n, key[s].clone(), Rat::one()),
                    &PolyElement::monomial(n, key[t].clone(), Rat::one()),
                );
                for (m, bc) in br.terms() {
                    let mut slots = Vec::with_capacity(k - 1);
                    slots.push(m.clone());
                    for (u, mon) in key.iter().enumerate() {
                        if u != s && u != t {
                            slots.push(mon.clone());
                        }
                    }
                    out.add_term(slots, signed.clone() * bc.clone());
                }
            }
        }
    }
    out
}

/// The `2n` states of a single directed edge: the positive states place
/// `p_i` at the tail and `q_i` at the head; the swapped states carry a
/// minus sign.
pub fn edge_states(n: usize) -> Vec<(i8, Var, Var)> {
    let mut out = Vec::with_capacity(2 * n);
    for i in 1..=n {
        out.push((1, Var::P(i), Var::Q(i)));
        out.push((-1, Var::Q(i), Var::P(i)));
    }
    out
}

/// True for species whose vertex data is a plain multiset of half-edges, so
/// a state assigns each vertex the product of its incident variables.
fn supports_state_sum(species: &SpeciesId) -> bool {
    match species {
        SpeciesId::Cc => true,
        SpeciesId::Group(k) => k.order() == 1,
        _ => false,
    }
}

/// Visits every state of the oriented graph: `f` receives the state sign
/// and the per-vertex monomials in vertex order. There are `(2n)^e` states.
fn for_each_state(o: &Oriented, n: usize, f: &mut impl FnMut(i8, Vec<Monomial>)) {
    let edges = o.graph.edges();
    let e = edges.len();
    let states = edge_states(n);
    let verts = o.graph.vertices();
    let order = &o.orientation.vertex_order;
    // `choice[j]` indexes into `states` for edge j.
    let mut choice = vec![0usize; e];
    loop {
        let mut sign = 1i8;
        let mut exps: Vec<Vec<u32>> = vec![vec![0; 2 * n]; verts.len()];
        for (j, &ek) in edges.iter().enumerate() {
            let (s, tail_var, head_var) = states[choice[j]];
            sign *= s;
            let (tail, head) = o.orientation.directions[&ek];
            exps[o.graph.vertex_of(tail)][var_slot(n, tail_var)] += 1;
            exps[o.graph.vertex_of(head)][var_slot(n, head_var)] += 1;
        }
        let slots: Vec<Monomial> = order
            .iter()
            .map(|&v| Monomial::from_exps(n, std::mem::take(&mut exps[v])))
            .collect();
        f(sign, slots);
        // Advance the odometer.
        let mut j = 0;
        loop {
            if j == e {
                return;
            }
            choice[j] += 1;
            if choice[j] < states.len() {
                break;
            }
            choice[j] = 0;
            j += 1;
        }
    }
}

/// The invariant wedge of an orientation representative: the signed sum
/// over all `(2n)^e` states of the wedge of per-vertex monomials taken in
/// vertex order.
pub fn invariant_of_rep(o: &Oriented, n: usize) -> Result<WedgeElement> {
    if n == 0 {
        return Err(Error::DimensionMismatch);
    }
    if !supports_state_sum(o.graph.species()) {
        return Err(Error::NotSupported(
            "state sums are defined for plain commutative vertex data only".into(),
        ));
    }
    let mut out = WedgeElement::zero(n);
    for_each_state(o, n, &mut |sign, slots| {
        let c = if sign < 0 { -Rat::one() } else { Rat::one() };
        out.add_term(slots, c);
    });
    Ok(out)
}

/// The invariant wedge of a class: the class sign times the invariant of
/// its canonical representative. Zero classes give the zero wedge.
pub fn invariant_state_sum(sc: &SignedClass, n: usize) -> Result<WedgeElement> {
    if sc.is_zero {
        return Ok(WedgeElement::zero(n));
    }
    let w = invariant_of_rep(&sc.rep, n)?;
    Ok(if sc.sign < 0 { w.scale(&-Rat::one()) } else { w })
}

/// Linear extension of the invariant to chains.
pub fn invariant_of_chain(chain: &ChainVector<Rat>, n: usize) -> Result<WedgeElement> {
    let mut out = WedgeElement::zero(n);
    for (_, c, rep) in chain.iter() {
        let w = invariant_of_rep(rep, n)?;
        out = out.add(&w.scale(c));
    }
    Ok(out)
}

/// Orthonormal pairing on wedge monomials, extended bilinearly: the basis
/// of strictly increasing wedges is declared orthonormal, so the pairing is
/// the coefficient dot product.
pub fn pairing_mprime(a: &WedgeElement, b: &WedgeElement) -> Result<Rat> {
    if a.n != b.n {
        return Err(Error::DimensionMismatch);
    }
    let mut acc = Rat::zero();
    for (key, ca) in &a.terms {
        if let Some(cb) = b.terms.get(key) {
            acc += ca.clone() * cb.clone();
        }
    }
    Ok(acc)
}

/// One bidifferential step of the star product's expansion on a tensor:
/// for each `i`, differentiate the left slot by `p_i` and the right by
/// `q_i`, minus the swap.
fn apply_b(
    t: &BTreeMap<(Monomial, Monomial), Rat>,
    n: usize,
) -> BTreeMap<(Monomial, Monomial), Rat> {
    let mut out: BTreeMap<(Monomial, Monomial), Rat> = BTreeMap::new();
    let mut add = |key: (Monomial, Monomial), c: Rat| {
        if c.is_zero() {
            return;
        }
        match out.get_mut(&key) {
            Some(old) => {
                let sum = std::mem::replace(old, Rat::zero()) + c;
                if sum.is_zero() {
                    out.remove(&key);
                } else {
                    *old = sum;
                }
            }
            None => {
                out.insert(key, c);
            }
        }
    };
    for ((a, b), c) in t {
        for i in 1..=n {
            if let (Some((ea, ra)), Some((eb, rb))) =
                (a.partial(Var::P(i)), b.partial(Var::Q(i)))
            {
                let w = c.clone()
                    * Rat::from_integer(ea.into())
                    * Rat::from_integer(eb.into());
                add((ra, rb), w);
            }
            if let (Some((ea, ra)), Some((eb, rb))) =
                (a.partial(Var::Q(i)), b.partial(Var::P(i)))
            {
                let w = c.clone()
                    * Rat::from_integer(ea.into())
                    * Rat::from_integer(eb.into());
                add((ra, rb), -w);
            }
        }
    }
    out
}

/// The star product expansion through the requested order: entry `m` of the
/// result is the coefficient of `t^m`, i.e. the `m`-fold bidifferential
/// power applied to the pair and divided by `m!`. Order 0 is the plain
/// product and order 1 is the Poisson bracket.
pub fn moyal_star(f: &PolyElement, h: &PolyElement, m_max: usize) -> Vec<PolyElement> {
    assert_eq!(f.n, h.n, "mixed ambient dimensions");
    let n = f.n;
    let mut out = Vec::with_capacity(m_max + 1);
    out.push(f.mul(h));
    let mut tensor: BTreeMap<(Monomial, Monomial), Rat> = BTreeMap::new();
    for (ma, ca) in f.terms() {
        for (mb, cb) in h.terms() {
            let key = (ma.clone(), mb.clone());
            let c = ca.clone() * cb.clone();
            tensor
                .entry(key)
                .and_modify(|old| *old += c.clone())
                .or_insert(c);
        }
    }
    let mut factorial = Rat::one();
    for m in 1..=m_max {
        tensor = apply_b(&tensor, n);
        factorial *= Rat::from_integer(m.into());
        let mut collapsed = PolyElement::zero(n);
        for ((a, b), c) in &tensor {
            collapsed.add_monomial(a.mul(b), c.clone() / factorial.clone());
        }
        out.push(collapsed);
    }
    out
}

/// Cyclic derivative for words in abstract letters: each occurrence of the
/// letter is removed and the word is read off linearly starting just after
/// it. Returns one linear word per occurrence, in occurrence order.
pub fn cyclic_derivative(word: &[usize], letter: usize) -> Vec<Vec<usize>> {
    let d = word.len();
    let mut out = Vec::new();
    for j in 0..d {
        if word[j] == letter {
            let mut linear = Vec::with_capacity(d - 1);
            for t in 1..d {
                linear.push(word[(j + t) % d]);
            }
            out.push(linear);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::canonical_class;
    use crate::graph::ComplexFilter;
    use crate::graph::tests_support::{cc_theta, cc_triangle, polygon};
    use crate::pairing::pairing_m;
    use crate::species::GroupPresentation;
    use crate::Int;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rat(x: i64) -> Rat {
        Rat::from_integer(Int::from(x))
    }

    fn mono(n: usize, exps: &[u32]) -> Monomial {
        Monomial::from_exps(n, exps.to_vec())
    }

    fn poly(n: usize, terms: &[(&[u32], i64)]) -> PolyElement {
        PolyElement::moyal_new(
            n,
            terms.iter().map(|(e, c)| (mono(n, e), rat(*c))).collect(),
        )
    }

    fn rand_monomial(rng: &mut ChaCha8Rng, n: usize, dmin: u32, dmax: u32) -> Monomial {
        let deg = rng.gen_range(dmin..=dmax);
        let mut exps = vec![0u32; 2 * n];
        for _ in 0..deg {
            let slot = rng.gen_range(0..2 * n);
            exps[slot] += 1;
        }
        Monomial::from_exps(n, exps)
    }

    fn rand_poly(
        rng: &mut ChaCha8Rng,
        n: usize,
        terms: usize,
        dmin: u32,
        dmax: u32,
    ) -> PolyElement {
        let mut out = PolyElement::zero(n);
        for _ in 0..terms {
            let m = rand_monomial(rng, n, dmin, dmax);
            let c = loop {
                let c = rng.gen_range(-3i64..=3);
                if c != 0 {
                    break c;
                }
            };
            out = out.add(&PolyElement::monomial(n, m, rat(c)));
        }
        out
    }

    #[test]
    fn monomial_order_is_graded_then_lexicographic() {
        let n = 2;
        // Degree dominates.
        assert!(mono(n, &[1, 0, 0, 0]) < mono(n, &[1, 1, 0, 0]));
        // Same degree: exponent vectors compare lexicographically, so the
        // q-heavy monomial is smaller.
        assert!(mono(n, &[0, 0, 0, 2]) < mono(n, &[0, 0, 2, 0]));
        assert!(mono(n, &[0, 1, 1, 0]) < mono(n, &[1, 1, 0, 0]));
        assert_eq!(Monomial::var(n, Var::P(1)), mono(n, &[1, 0, 0, 0]));
        assert_eq!(Monomial::var(n, Var::Q(2)), mono(n, &[0, 0, 0, 1]));
    }

    #[test]
    fn qa_constructor_rejects_low_degree() {
        let n = 1;
        assert!(matches!(
            PolyElement::qa_new(n, vec![(Monomial::var(n, Var::P(1)), rat(1))]),
            Err(Error::DegreeTooLow(1))
        ));
        assert!(matches!(
            PolyElement::qa_new(n, vec![(Monomial::one(n), rat(2))]),
            Err(Error::DegreeTooLow(0))
        ));
        // Zero coefficients on low-degree monomials are dropped, not rejected.
        assert!(PolyElement::qa_new(n, vec![(Monomial::one(n), rat(0))])
            .unwrap()
            .is_zero());
        let ok = PolyElement::qa_new(
            n,
            vec![(mono(n, &[1, 1]), rat(1)), (mono(n, &[3, 0]), rat(-2))],
        )
        .unwrap();
        assert!(ok.is_qa());
    }

    #[test]
    fn cutting_matches_the_stated_examples() {
        // d/dx1 (x1^2 x2 x3) = 2 x1 x2 x3, reading x_i as p_i with n = 3.
        let n = 3;
        let f = poly(n, &[(&[2, 1, 1, 0, 0, 0], 1)]);
        let d = f.partial_derivative(Var::P(1));
        assert_eq!(d, poly(n, &[(&[1, 1, 1, 0, 0, 0], 2)]));
        // Derivative with respect to an absent variable vanishes.
        assert!(f.partial_derivative(Var::Q(3)).is_zero());
    }

    #[test]
    fn pinned_poisson_bracket() {
        // {p1 q1 p2, p2 q2} = p1 q1 p2 with n = 2.
        let n = 2;
        let f = poly(n, &[(&[1, 1, 1, 0], 1)]);
        let h = poly(n, &[(&[0, 1, 0, 1], 1)]);
        assert_eq!(poisson_bracket(&f, &h), f);
    }

    #[test]
    fn bracket_is_antisymmetric_and_satisfies_jacobi() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 2;
        for _ in 0..50 {
            let f = rand_poly(&mut rng, n, 3, 2, 4);
            let g = rand_poly(&mut rng, n, 3, 2, 4);
            let h = rand_poly(&mut rng, n, 3, 2, 4);
            assert!(poisson_bracket(&f, &f).is_zero());
            assert!(poisson_bracket(&f, &g)
                .add(&poisson_bracket(&g, &f))
                .is_zero());
            let jac = poisson_bracket(&f, &poisson_bracket(&g, &h))
                .add(&poisson_bracket(&g, &poisson_bracket(&h, &f)))
                .add(&poisson_bracket(&h, &poisson_bracket(&f, &g)));
            assert!(jac.is_zero());
        }
    }

    #[test]
    fn hamiltonian_matrix_examples() {
        let n = 1;
        // H = p1 q1: the field fixes p1 and negates q1.
        let h = poly(n, &[(&[1, 1], 1)]);
        let m = hamiltonian_matrix(&h).unwrap();
        assert_eq!(m.image_of(0), poly(n, &[(&[1, 0], 1)]));
        assert_eq!(m.image_of(1), poly(n, &[(&[0, 1], -1)]));
        assert!(m.is_sp());
        // H = q1^2: p1 maps to 2 q1 and q1 maps to 0.
        let h = poly(n, &[(&[0, 2], 1)]);
        let m = hamiltonian_matrix(&h).unwrap();
        assert_eq!(m.image_of(0), poly(n, &[(&[0, 1], 2)]));
        assert!(m.image_of(1).is_zero());
        assert!(m.is_sp());
        // Degree three or mixed degrees are rejected.
        assert!(matches!(
            hamiltonian_matrix(&poly(n, &[(&[2, 1], 1)])),
            Err(Error::NotDegreeTwo)
        ));
        assert!(matches!(
            hamiltonian_matrix(&poly(n, &[(&[1, 1], 1), (&[3, 0], 1)])),
            Err(Error::NotDegreeTwo)
        ));
    }

    #[test]
    fn hamiltonian_map_is_an_anti_homomorphism_into_sp() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 2;
        for _ in 0..50 {
            let f = rand_poly(&mut rng, n, 3, 2, 2);
            let h = rand_poly(&mut rng, n, 3, 2, 2);
            let xf = hamiltonian_matrix(&f).unwrap();
            let xh = hamiltonian_matrix(&h).unwrap();
            assert!(xf.is_sp());
            assert!(xh.is_sp());
            let lhs = hamiltonian_matrix(&poisson_bracket(&f, &h)).unwrap();
            let rhs = HamiltonianMatrix::commutator(&xh, &xf);
            assert!(lhs.sub(&rhs).is_zero());
        }
    }

    #[test]
    fn wedge_normalization() {
        let n = 1;
        let a = mono(n, &[2, 0]);
        let b = mono(n, &[0, 2]);
        // Repeated slots vanish.
        let w = WedgeElement::from_monomials(n, vec![a.clone(), a.clone()]);
        assert!(w.is_zero());
        assert!(ce_boundary(&w).is_zero());
        // Swapping slots negates.
        let ab = WedgeElement::from_monomials(n, vec![a.clone(), b.clone()]);
        let ba = WedgeElement::from_monomials(n, vec![b, a]);
        assert_eq!(ab, ba.scale(&rat(-1)));
    }

    #[test]
    fn ce_boundary_of_a_pair_is_the_bracket() {
        // The boundary of F ^ H is {F, H}, independent of how the wedge is
        // normalized internally.
        let n = 1;
        let f = mono(n, &[2, 1]); // p^2 q
        let h = mono(n, &[1, 2]); // p q^2
        let w = WedgeElement::from_monomials(n, vec![f.clone(), h.clone()]);
        let b = ce_boundary(&w);
        let br = poisson_bracket(
            &PolyElement::monomial(n, f, Rat::one()),
            &PolyElement::monomial(n, h, Rat::one()),
        );
        assert!(!br.is_zero());
        let mut expected = WedgeElement::zero(n);
        for (m, c) in br.terms() {
            expected.add_term(vec![m.clone()], c.clone());
        }
        assert_eq!(b, expected);
    }

    #[test]
    fn ce_boundary_squares_to_zero_on_seeded_wedges() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 2;
        for trial in 0..50 {
            let k = 3 + (trial % 2);
            let slots: Vec<Monomial> =
                (0..k).map(|_| rand_monomial(&mut rng, n, 2, 4)).collect();
            let w = WedgeElement::from_monomials(n, slots);
            let bb = ce_boundary(&ce_boundary(&w));
            assert!(bb.is_zero(), "double boundary on trial {trial}");
        }
    }

    #[test]
    fn edge_state_atoms_match_the_chord_invariant() {
        // A single directed edge expands to sum_i p_i (x) q_i - q_i (x) p_i.
        let states = edge_states(3);
        assert_eq!(states.len(), 6);
        assert_eq!(states[0], (1, Var::P(1), Var::Q(1)));
        assert_eq!(states[1], (-1, Var::Q(1), Var::P(1)));
        assert_eq!(states[4], (1, Var::P(3), Var::Q(3)));
        assert_eq!(states[5], (-1, Var::Q(3), Var::P(3)));
    }

    #[test]
    fn state_count_is_two_n_to_the_edges() {
        for (o, n, expected) in [
            (cc_theta(), 1usize, 8usize),
            (cc_theta(), 2, 64),
            (cc_triangle(), 1, 8),
            (polygon(3), 2, 64),
        ] {
            let mut count = 0usize;
            for_each_state(&o, n, &mut |_, _| count += 1);
            assert_eq!(count, expected);
        }
    }

    #[test]
    fn pinned_theta_invariant() {
        // Hand expansion of the 8 states of the theta graph at n = 1:
        // j swapped edges contribute C(3,j) states of sign (-1)^j with
        // vertex monomials p^{3-j} q^j and p^j q^{3-j}. Collecting into
        // sorted wedges gives -2 [q^3 ^ p^3] + 6 [p q^2 ^ p^2 q].
        let w = invariant_of_rep(&cc_theta(), 1).unwrap();
        assert_eq!(
            w.to_text(),
            "(-2)*[q1^3 ^ p1^3] + (6)*[p1*q1^2 ^ p1^2*q1]"
        );
        // The class-level invariant folds the canonical sign (+1 here).
        let sc = canonical_class(&cc_theta()).unwrap();
        assert_eq!(invariant_state_sum(&sc, 1).unwrap(), w);
    }

    #[test]
    fn invariants_are_killed_by_every_sp_generator() {
        let n = 1;
        let gens = [
            poly(n, &[(&[2, 0], 1)]), // p^2
            poly(n, &[(&[1, 1], 1)]), // pq
            poly(n, &[(&[0, 2], 1)]), // q^2
        ];
        for o in [cc_theta(), cc_triangle(), polygon(3)] {
            let w = invariant_of_rep(&o, n).unwrap();
            assert!(!w.is_zero());
            for g in &gens {
                let xi = hamiltonian_matrix(g).unwrap();
                let acted = xi.derivation_on_wedge(&w);
                assert!(acted.is_zero(), "generator {} acts nontrivially", g.to_text());
            }
        }
    }

    #[test]
    fn state_sum_intertwines_the_boundaries() {
        // ce_boundary(I(c)) = I(boundary at edge weight 2n) on small
        // classes, for both ambient dimensions.
        use crate::complex::{boundary, BoundaryKind};
        for o in [cc_theta(), cc_triangle(), polygon(3), polygon(4)] {
            for n in [1usize, 2] {
                let chain: ChainVector<Rat> =
                    ChainVector::from_class(&canonical_class(&o).unwrap());
                let rhs_chain =
                    boundary(&chain, BoundaryKind::N(n as u32), ComplexFilter::Full)
                        .unwrap();
                let lhs = ce_boundary(&invariant_of_chain(&chain, n).unwrap());
                let rhs = invariant_of_chain(&rhs_chain, n).unwrap();
                assert_eq!(
                    lhs,
                    rhs,
                    "graph with {} vertices, n = {n}",
                    o.graph.num_vertices()
                );
            }
        }
    }

    #[test]
    fn mprime_is_orthonormal_on_basis_wedges() {
        let n = 1;
        let a = WedgeElement::from_monomials(n, vec![mono(n, &[2, 0]), mono(n, &[0, 2])]);
        let b = WedgeElement::from_monomials(n, vec![mono(n, &[2, 0]), mono(n, &[1, 1])]);
        assert_eq!(pairing_mprime(&a, &a).unwrap(), rat(1));
        assert_eq!(pairing_mprime(&a, &b).unwrap(), rat(0));
        // Different ambient dimensions are rejected.
        let c = WedgeElement::zero(2);
        assert!(matches!(pairing_mprime(&a, &c), Err(Error::DimensionMismatch)));
        // The pairing respects the sign normalization.
        let swapped =
            WedgeElement::from_monomials(n, vec![mono(n, &[0, 2]), mono(n, &[2, 0])]);
        assert_eq!(pairing_mprime(&a, &swapped).unwrap(), rat(-1));
    }

    #[test]
    fn wedge_pairing_restricts_to_the_matching_pairing() {
        // The coefficient dot product of two graph invariants equals the
        // matching pairing evaluated at s = 2n, across whole blocks (so
        // including off-diagonal and cross-cell pairs) and per species.
        let mut groups: Vec<Vec<SignedClass>> = vec![
            vec![
                canonical_class(&cc_theta()).unwrap(),
                canonical_class(&cc_triangle()).unwrap(),
            ],
            vec![
                canonical_class(&polygon(3)).unwrap(),
                canonical_class(&polygon(4)).unwrap(),
                canonical_class(&polygon(5)).unwrap(),
            ],
        ];
        for (k, e) in [(3usize, 5usize), (4, 5)] {
            let block = crate::pairing::Block::new(&SpeciesId::Cc, k, e).unwrap();
            groups[0].extend(block.basis.iter().cloned());
        }
        groups[1].retain(|sc| !sc.is_zero);
        for group in &groups {
            for n in [1usize, 2] {
                let wedges: Vec<WedgeElement> = group
                    .iter()
                    .map(|sc| invariant_state_sum(sc, n).unwrap())
                    .collect();
                for (i, a) in group.iter().enumerate() {
                    for (j, b) in group.iter().enumerate() {
                        let lhs = pairing_mprime(&wedges[i], &wedges[j]).unwrap();
                        let rhs = pairing_m(a, b).eval(&Int::from(2 * n as i64));
                        assert_eq!(
                            lhs,
                            Rat::from_integer(rhs),
                            "n = {n}, pair ({i}, {j}) of {} classes",
                            group.len()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn wedge_pairing_is_stable_in_n() {
        // Pairing a fixed low-index wedge against a graph invariant gives
        // the same number at every sufficiently large ambient dimension.
        let theta = canonical_class(&cc_theta()).unwrap();
        let tri = canonical_class(&cc_triangle()).unwrap();
        let mut probes: Vec<WedgeElement> = vec![
            invariant_state_sum(&theta, 1).unwrap(),
            invariant_state_sum(&tri, 1).unwrap(),
            WedgeElement::from_monomials(1, vec![mono(1, &[3, 0]), mono(1, &[0, 3])]),
            WedgeElement::from_monomials(
                1,
                vec![mono(1, &[2, 1]), mono(1, &[1, 2]), mono(1, &[2, 0])],
            ),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for k in 2..=3 {
            let slots: Vec<Monomial> =
                (0..k).map(|_| rand_monomial(&mut rng, 1, 2, 4)).collect();
            probes.push(WedgeElement::from_monomials(1, slots));
        }
        for target in [&theta, &tri] {
            let i1 = invariant_state_sum(target, 1).unwrap();
            let i2 = invariant_state_sum(target, 2).unwrap();
            for w in &probes {
                let with_1 = pairing_mprime(w, &i1).unwrap();
                let with_2 = pairing_mprime(&w.embed(2), &i2).unwrap();
                assert_eq!(with_1, with_2);
            }
        }
    }

    #[test]
    fn moyal_low_orders_are_product_and_bracket() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let n = 2;
        for _ in 0..20 {
            let f = rand_poly(&mut rng, n, 3, 0, 3);
            let h = rand_poly(&mut rng, n, 3, 0, 3);
            let orders = moyal_star(&f, &h, 1);
            assert_eq!(orders[0], f.mul(&h));
            assert_eq!(orders[1], poisson_bracket(&f, &h));
        }
    }

    #[test]
    fn moyal_star_is_associative_through_order_three() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let n = 2;
        for trial in 0..20 {
            let f = rand_poly(&mut rng, n, 2, 0, 3);
            let g = rand_poly(&mut rng, n, 2, 0, 3);
            let h = rand_poly(&mut rng, n, 2, 0, 3);
            for m in 0..=3usize {
                let mut lhs = PolyElement::zero(n);
                let mut rhs = PolyElement::zero(n);
                for a in 0..=m {
                    let b = m - a;
                    let fg = moyal_star(&f, &g, a)[a].clone();
                    lhs = lhs.add(&moyal_star(&fg, &h, b)[b]);
                    let gh = moyal_star(&g, &h, a)[a].clone();
                    rhs = rhs.add(&moyal_star(&f, &gh, b)[b]);
                }
                assert_eq!(lhs, rhs, "trial {trial}, order {m}");
            }
        }
    }

    #[test]
    fn antisymmetrized_first_order_term_is_the_bracket() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 2;
        for _ in 0..20 {
            let f = rand_poly(&mut rng, n, 3, 2, 4);
            let h = rand_poly(&mut rng, n, 3, 2, 4);
            let fh = moyal_star(&f, &h, 1)[1].clone();
            let hf = moyal_star(&h, &f, 1)[1].clone();
            let half = fh.sub(&hf).scale(&(rat(1) / rat(2)));
            assert_eq!(half, poisson_bracket(&f, &h));
        }
    }

    #[test]
    fn cyclic_derivative_examples() {
        // The cyclic word x1 x4 x1 x2 cut at x1 gives x4 x1 x2 and x2 x1 x4.
        let out = cyclic_derivative(&[1, 4, 1, 2], 1);
        assert_eq!(out, vec![vec![4, 1, 2], vec![2, 1, 4]]);
        assert!(cyclic_derivative(&[1, 4, 1, 2], 3).is_empty());
        assert_eq!(cyclic_derivative(&[5], 5), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn canonical_text_forms() {
        let n = 2;
        let f = PolyElement::moyal_new(
            n,
            vec![
                (mono(n, &[1, 1, 1, 0]), rat(1)),
                (mono(n, &[0, 0, 2, 0]), rat(-3) / rat(2)),
            ],
        );
        assert_eq!(f.to_text(), "(-3/2)*q1^2 + (1)*p1*p2*q1");
        assert_eq!(PolyElement::zero(1).to_text(), "0");
        assert_eq!(Monomial::one(1).to_text(), "1");
        let w = WedgeElement::from_monomials(
            1,
            vec![mono(1, &[2, 0]), mono(1, &[0, 2])],
        );
        assert_eq!(w.to_text(), "(-1)*[q1^2 ^ p1^2]");
        // The empty wedge is the unit of the exterior algebra.
        let unit = WedgeElement::from_monomials(1, vec![]);
        assert_eq!(unit.to_text(), "(1)*[]");
        assert_eq!(pairing_mprime(&unit, &unit).unwrap(), rat(1));
    }

    #[test]
    fn species_guard_on_state_sums() {
        use crate::graph::tests_support::polygon_labeled;
        let z2 = SpeciesId::group(GroupPresentation::z2());
        let labeled = polygon_labeled(&z2, &[0, 0, 1]);
        assert!(matches!(
            invariant_of_rep(&labeled, 1),
            Err(Error::NotSupported(_))
        ));
        assert!(matches!(
            invariant_of_rep(&cc_theta(), 0),
            Err(Error::DimensionMismatch)
        ));
    }
}
