//! Moment-matrix relaxations of the quantum set for two-party scenarios.
//!
//! Words are built from one projector per outcome-except-last, per input, per
//! party. Canonical form keeps all A symbols before all B symbols (different
//! parties commute), collapses repeated adjacent projectors, and kills words
//! with adjacent orthogonal projectors of one input. The moment matrix is
//! indexed by all reduced words up to the hierarchy level; two cells share a
//! moment variable iff their reduced products coincide up to adjoints.

use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NpaError {
    #[error("level must be at least 1")]
    LevelZero,
    #[error("unsupported level spec `{0}`")]
    BadLevelSpec(String),
    #[error("moment matrix would have {0} monomials, above the configured cap {1}")]
    TooLarge(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Party {
    A,
    B,
}

/// One projector symbol: party, input index, outcome index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OpSym {
    pub party: Party,
    pub input: u16,
    pub outcome: u16,
}

/// A reduced operator word in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial {
    word: Vec<OpSym>,
}

impl Monomial {
    pub fn identity() -> Self {
        Self { word: Vec::new() }
    }

    pub fn single(sym: OpSym) -> Self {
        Self { word: vec![sym] }
    }

    pub fn degree(&self) -> usize {
        self.word.len()
    }

    pub fn symbols(&self) -> &[OpSym] {
        &self.word
    }

    fn party_part(&self, party: Party) -> impl DoubleEndedIterator<Item = &OpSym> {
        self.word.iter().filter(move |s| s.party == party)
    }

    /// Collapse adjacent symbols of one party's subword; None is the zero
    /// monomial (orthogonal adjacent projectors).
    fn collapse(mut seq: Vec<OpSym>) -> Option<Vec<OpSym>> {
        let mut changed = true;
        while changed {
            changed = false;
            let mut out: Vec<OpSym> = Vec::with_capacity(seq.len());
            for s in seq {
                if let Some(last) = out.last() {
                    if last.input == s.input {
                        if last.outcome == s.outcome {
                            changed = true;
                            continue; // idempotent
                        }
                        return None; // orthogonal
                    }
                }
                out.push(s);
            }
            seq = out;
        }
        Some(seq)
    }

    /// Product of two canonical words, reduced; None is the zero monomial.
    pub fn mul(&self, rhs: &Monomial) -> Option<Monomial> {
        let a: Vec<OpSym> = self
            .party_part(Party::A)
            .chain(rhs.party_part(Party::A))
            .copied()
            .collect();
        let b: Vec<OpSym> = self
            .party_part(Party::B)
            .chain(rhs.party_part(Party::B))
            .copied()
            .collect();
        let mut word = Monomial::collapse(a)?;
        word.extend(Monomial::collapse(b)?);
        Some(Monomial { word })
    }

    /// Adjoint: reverse each party's subword (projectors are Hermitian).
    pub fn adjoint(&self) -> Monomial {
        let mut word: Vec<OpSym> = self.party_part(Party::A).rev().copied().collect();
        word.extend(self.party_part(Party::B).rev().copied());
        Monomial { word }
    }

    /// Class key identifying a word with its adjoint.
    fn class_key(&self) -> Monomial {
        let adj = self.adjoint();
        if *self <= adj {
            self.clone()
        } else {
            adj
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Graded order: by length, then lexicographic by (party, input, outcome).
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.word
            .len()
            .cmp(&other.word.len())
            .then_with(|| self.word.cmp(&other.word))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.word.is_empty() {
            return write!(f, "1");
        }
        for s in &self.word {
            let p = match s.party {
                Party::A => 'A',
                Party::B => 'B',
            };
            write!(f, "{}{}|{} ", p, s.outcome, s.input)?;
        }
        Ok(())
    }
}

/// Hierarchy level: all words up to a maximum length, optionally extended
/// with all A*B products (the "1+AB" style intermediate level).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelSpec {
    pub max_len: u32,
    pub plus_ab: bool,
}

impl LevelSpec {
    pub fn fixed(k: u32) -> Self {
        Self { max_len: k, plus_ab: false }
    }

    pub fn parse(s: &str) -> Result<Self, NpaError> {
        let t = s.trim();
        if let Some(base) = t.strip_suffix("+AB").or_else(|| t.strip_suffix("+ab")) {
            let k: u32 = base.trim().parse().map_err(|_| NpaError::BadLevelSpec(s.into()))?;
            if k == 0 {
                return Err(NpaError::LevelZero);
            }
            return Ok(Self { max_len: k, plus_ab: true });
        }
        let k: u32 = t.parse().map_err(|_| NpaError::BadLevelSpec(s.into()))?;
        if k == 0 {
            return Err(NpaError::LevelZero);
        }
        Ok(Self { max_len: k, plus_ab: false })
    }
}

impl fmt::Display for LevelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.max_len, if self.plus_ab { "+AB" } else { "" })
    }
}

/// Where a moment-matrix cell points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    /// Index into the class table.
    Class(u32),
    /// Product of orthogonal projectors: the entry is identically zero.
    Zero,
}

#[derive(Debug, Clone)]
pub struct MomentClass {
    pub word: Monomial,
    /// First (row <= col) cell carrying this class.
    pub rep_cell: (usize, usize),
}

/// Level-k moment-matrix structure for a two-party scenario.
#[derive(Debug, Clone)]
pub struct Relaxation {
    pub x_size: usize,
    pub y_size: usize,
    pub a_size: usize,
    pub b_size: usize,
    pub level: LevelSpec,
    pub monomials: Vec<Monomial>,
    /// Upper-triangle cell map, row-major: entry (i,j), i <= j at
    /// i*d - i(i-1)/2 + (j-i).
    cells: Vec<Cell>,
    pub classes: Vec<MomentClass>,
    class_lookup: BTreeMap<Monomial, u32>,
    /// Class of the empty word, i.e. the normalization moment <1>.
    pub norm_class: u32,
}

pub const MAX_MONOMIALS: usize = 256;

fn generators(x_size: usize, y_size: usize, a_size: usize, b_size: usize) -> Vec<OpSym> {
    let mut gens = Vec::new();
    for x in 0..x_size {
        for a in 0..a_size - 1 {
            gens.push(OpSym { party: Party::A, input: x as u16, outcome: a as u16 });
        }
    }
    for y in 0..y_size {
        for b in 0..b_size - 1 {
            gens.push(OpSym { party: Party::B, input: y as u16, outcome: b as u16 });
        }
    }
    gens
}

pub(crate) fn enumerate_monomials(gens: &[OpSym], level: LevelSpec) -> Vec<Monomial> {
    let mut all: std::collections::BTreeSet<Monomial> = std::collections::BTreeSet::new();
    all.insert(Monomial::identity());
    let mut frontier: Vec<Monomial> = vec![Monomial::identity()];
    for len in 1..=level.max_len {
        let mut next: std::collections::BTreeSet<Monomial> = std::collections::BTreeSet::new();
        for w in &frontier {
            for g in gens {
                if let Some(prod) = w.mul(&Monomial::single(*g)) {
                    if prod.degree() == len as usize {
                        next.insert(prod);
                    }
                }
            }
        }
        frontier = next.iter().cloned().collect();
        all.extend(next);
    }
    if level.plus_ab {
        for ga in gens.iter().filter(|g| g.party == Party::A) {
            for gb in gens.iter().filter(|g| g.party == Party::B) {
                if let Some(prod) = Monomial::single(*ga).mul(&Monomial::single(*gb)) {
                    all.insert(prod);
                }
            }
        }
    }
    all.into_iter().collect()
}

pub fn build_relaxation(
    x_size: usize,
    y_size: usize,
    a_size: usize,
    b_size: usize,
    level: LevelSpec,
) -> Result<Relaxation, NpaError> {
    if level.max_len == 0 {
        return Err(NpaError::LevelZero);
    }
    let gens = generators(x_size, y_size, a_size, b_size);
    let monomials = enumerate_monomials(&gens, level);
    let d = monomials.len();
    if d > MAX_MONOMIALS {
        return Err(NpaError::TooLarge(d, MAX_MONOMIALS));
    }

    let mut classes: Vec<MomentClass> = Vec::new();
    let mut class_lookup: BTreeMap<Monomial, u32> = BTreeMap::new();
    let mut cells = Vec::with_capacity(d * (d + 1) / 2);
    for i in 0..d {
        let mi_adj = monomials[i].adjoint();
        for j in i..d {
            match mi_adj.mul(&monomials[j]) {
                None => cells.push(Cell::Zero),
                Some(prod) => {
                    let key = prod.class_key();
                    let idx = match class_lookup.get(&key) {
                        Some(&idx) => idx,
                        None => {
                            let idx = classes.len() as u32;
                            classes.push(MomentClass { word: key.clone(), rep_cell: (i, j) });
                            class_lookup.insert(key, idx);
                            idx
                        }
                    };
                    cells.push(Cell::Class(idx));
                }
            }
        }
    }

    let norm_class = class_lookup[&Monomial::identity()];
    Ok(Relaxation {
        x_size,
        y_size,
        a_size,
        b_size,
        level,
        monomials,
        cells,
        classes,
        class_lookup,
        norm_class,
    })
}

impl Relaxation {
    pub fn size(&self) -> usize {
        self.monomials.len()
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> Cell {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let d = self.monomials.len();
        self.cells[i * (2 * d - i + 1) / 2 + (j - i)]
    }

    /// Class of a reduced word, if it appears in the moment matrix.
    pub fn class_of(&self, word: &Monomial) -> Option<u32> {
        self.class_lookup.get(&word.class_key()).copied()
    }

    fn sym_a(&self, a: usize, x: usize) -> OpSym {
        OpSym { party: Party::A, input: x as u16, outcome: a as u16 }
    }

    fn sym_b(&self, b: usize, y: usize) -> OpSym {
        OpSym { party: Party::B, input: y as u16, outcome: b as u16 }
    }

    /// Linear expression of p(a,b|x,y), for arbitrary outcomes including the
    /// dropped ones, over moment classes: inclusion-exclusion through the
    /// marginals and the normalization moment.
    pub fn prob_expression(&self, a: usize, b: usize, x: usize, y: usize) -> Vec<(u32, f64)> {
        let la = self.a_size - 1;
        let lb = self.b_size - 1;
        let joint = |a: usize, b: usize| -> u32 {
            let w = Monomial::single(self.sym_a(a, x))
                .mul(&Monomial::single(self.sym_b(b, y)))
                .expect("A and B projectors never annihilate");
            self.class_of(&w).expect("level >= 1 contains AB moments")
        };
        let marg_a =
            |a: usize| -> u32 { self.class_of(&Monomial::single(self.sym_a(a, x))).unwrap() };
        let marg_b =
            |b: usize| -> u32 { self.class_of(&Monomial::single(self.sym_b(b, y))).unwrap() };
        let mut expr: Vec<(u32, f64)> = Vec::new();
        let mut add = |class: u32, coeff: f64| {
            if let Some(e) = expr.iter_mut().find(|(c, _)| *c == class) {
                e.1 += coeff;
            } else {
                expr.push((class, coeff));
            }
        };
        match (a < la, b < lb) {
            (true, true) => add(joint(a, b), 1.0),
            (false, true) => {
                add(marg_b(b), 1.0);
                for ap in 0..la {
                    add(joint(ap, b), -1.0);
                }
            }
            (true, false) => {
                add(marg_a(a), 1.0);
                for bp in 0..lb {
                    add(joint(a, bp), -1.0);
                }
            }
            (false, false) => {
                add(self.norm_class, 1.0);
                for ap in 0..la {
                    add(marg_a(ap), -1.0);
                }
                for bp in 0..lb {
                    add(marg_b(bp), -1.0);
                }
                for ap in 0..la {
                    for bp in 0..lb {
                        add(joint(ap, bp), 1.0);
                    }
                }
            }
        }
        expr
    }

    /// Representative moment-matrix cells for the one-outcome-dropped joint
    /// probabilities.
    pub fn behaviour_cells(&self) -> Vec<((usize, usize, usize, usize), (usize, usize))> {
        let mut out = Vec::new();
        for x in 0..self.x_size {
            for y in 0..self.y_size {
                for a in 0..self.a_size - 1 {
                    for b in 0..self.b_size - 1 {
                        let w = Monomial::single(self.sym_a(a, x))
                            .mul(&Monomial::single(self.sym_b(b, y)))
                            .unwrap();
                        let class = self.class_of(&w).unwrap();
                        out.push(((a, b, x, y), self.classes[class as usize].rep_cell));
                    }
                }
            }
        }
        out
    }

    /// Text dump of the class table for diffing.
    pub fn class_table_dump(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(out, "monomials: {}", self.monomials.len());
        for (i, m) in self.monomials.iter().enumerate() {
            let _ = writeln!(out, "m{i}: {m}");
        }
        let _ = writeln!(out, "classes: {}", self.classes.len());
        for (i, c) in self.classes.iter().enumerate() {
            let _ = writeln!(out, "c{i}: {} rep=({},{})", c.word, c.rep_cell.0, c.rep_cell.1);
        }
        out
    }

    /// Exact moment value of a class under a qubit realization; test oracle
    /// and PSD sanity checks.
    pub fn class_moment_qubit(&self, class: u32, setup: &crate::behaviour::QubitSetup) -> f64 {
        use crate::behaviour::qubit;
        let word = &self.classes[class as usize].word;
        let mut ma = qubit::IDENTITY2;
        let mut mb = qubit::IDENTITY2;
        let mat_mul = |p: &[[f64; 2]; 2], q: &[[f64; 2]; 2]| -> [[f64; 2]; 2] {
            let mut out = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        out[i][j] += p[i][k] * q[k][j];
                    }
                }
            }
            out
        };
        for s in word.symbols() {
            let angles = match s.party {
                Party::A => &setup.alice_angles,
                Party::B => &setup.bob_angles,
            };
            let proj = qubit::projector(angles[s.input as usize]);
            let eff = if s.outcome == 0 { proj } else { qubit::sub2(&qubit::IDENTITY2, &proj) };
            match s.party {
                Party::A => ma = mat_mul(&ma, &eff),
                Party::B => mb = mat_mul(&mb, &eff),
            }
        }
        let rho = qubit::state_density(setup.theta, setup.werner);
        qubit::trace_product(&rho, &qubit::kron2(&ma, &mb))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    /// Independent oracle: brute-force enumeration of generator sequences
    /// with a from-scratch reducer.
    fn brute_force_words(
        x_size: usize,
        y_size: usize,
        a_size: usize,
        b_size: usize,
        k: u32,
    ) -> std::collections::BTreeSet<Vec<(u8, u16, u16)>> {
        // symbols as tuples (party 0/1, input, outcome)
        let mut gens = Vec::new();
        for x in 0..x_size {
            for a in 0..a_size - 1 {
                gens.push((0u8, x as u16, a as u16));
            }
        }
        for y in 0..y_size {
            for b in 0..b_size - 1 {
                gens.push((1u8, y as u16, b as u16));
            }
        }
        fn reduce(seq: &[(u8, u16, u16)]) -> Option<Vec<(u8, u16, u16)>> {
            // stable partition by party, then collapse repeatedly
            let mut parts: Vec<Vec<(u8, u16, u16)>> = vec![Vec::new(), Vec::new()];
            for &s in seq {
                parts[s.0 as usize].push(s);
            }
            for part in parts.iter_mut() {
                loop {
                    let mut out: Vec<(u8, u16, u16)> = Vec::new();
                    let mut reduced = false;
                    for &s in part.iter() {
                        match out.last() {
                            Some(&t) if t.1 == s.1 && t.2 == s.2 => {
                                reduced = true;
                            }
                            Some(&t) if t.1 == s.1 => return None,
                            _ => out.push(s),
                        }
                    }
                    let done = !reduced;
                    *part = out;
                    if done {
                        break;
                    }
                }
            }
            let mut whole = parts[0].clone();
            whole.extend(parts[1].iter().copied());
            Some(whole)
        }
        let mut found = std::collections::BTreeSet::new();
        found.insert(Vec::new());
        let mut stack: Vec<Vec<(u8, u16, u16)>> = vec![Vec::new()];
        for _ in 0..k {
            let mut next = Vec::new();
            for seq in &stack {
                for &g in &gens {
                    let mut s = seq.clone();
                    s.push(g);
                    if let Some(r) = reduce(&s) {
                        if found.insert(r.clone()) {
                            next.push(s);
                        }
                    } else {
                        // keep exploring? reduced-to-zero sequences stay zero
                    }
                    // sequences that reduce shorter are revisited via shorter stacks
                }
            }
            stack = next;
        }
        found
    }

    #[test]
    fn level2_monomial_count_matches_exhaustive_oracle() {
        let r = build_relaxation(2, 3, 2, 2, LevelSpec::fixed(2)).unwrap();
        assert_eq!(r.size(), 20, "1 + 5 + 2 AA + 6 BB + 6 AB");
        let oracle = brute_force_words(2, 3, 2, 2, 2);
        assert_eq!(oracle.len(), 20);
        let ours: std::collections::BTreeSet<Vec<(u8, u16, u16)>> = r
            .monomials
            .iter()
            .map(|m| {
                m.symbols()
                    .iter()
                    .map(|s| (if s.party == Party::A { 0u8 } else { 1 }, s.input, s.outcome))
                    .collect()
            })
            .collect();
        assert_eq!(ours, oracle);
    }

    #[test]
    fn projector_reduction_rules() {
        let a00 = Monomial::single(OpSym { party: Party::A, input: 0, outcome: 0 });
        assert_eq!(a00.mul(&a00), Some(a00.clone()));
        // distinct outcomes of one input annihilate (arises for a_size >= 3)
        let a10 = Monomial::single(OpSym { party: Party::A, input: 0, outcome: 1 });
        assert_eq!(a00.mul(&a10), None);
        // parties commute into canonical order
        let b00 = Monomial::single(OpSym { party: Party::B, input: 0, outcome: 0 });
        let ab = b00.mul(&a00).unwrap();
        assert_eq!(ab.symbols()[0].party, Party::A);
    }

    #[test]
    fn moment_matrix_from_qubit_moments_is_psd() {
        let setup = crate::behaviour::ideal_chsh_setup();
        for level in [LevelSpec::fixed(1), LevelSpec::parse("1+AB").unwrap(), LevelSpec::fixed(2)] {
            let r = build_relaxation(2, 3, 2, 2, level).unwrap();
            let d = r.size();
            let mut m = DMatrix::zeros(d, d);
            for i in 0..d {
                for j in i..d {
                    let v = match r.cell(i, j) {
                        Cell::Zero => 0.0,
                        Cell::Class(c) => r.class_moment_qubit(c, &setup),
                    };
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            let eig = nalgebra::SymmetricEigen::new(m);
            let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-10, "level {level}: min eig {min}");
        }
    }

    #[test]
    fn class_count_invariant_under_generator_order() {
        let gens = super::generators(2, 3, 2, 2);
        let mut permuted = gens.clone();
        permuted.reverse();
        let a = enumerate_monomials(&gens, LevelSpec::fixed(2));
        let b = enumerate_monomials(&permuted, LevelSpec::fixed(2));
        assert_eq!(a, b);
    }

    #[test]
    fn level_sets_nest_and_are_prefix_closed() {
        let r2 = build_relaxation(2, 3, 2, 2, LevelSpec::fixed(2)).unwrap();
        let r3 = build_relaxation(2, 3, 2, 2, LevelSpec::fixed(3)).unwrap();
        let set3: std::collections::BTreeSet<_> = r3.monomials.iter().cloned().collect();
        for m in &r2.monomials {
            assert!(set3.contains(m));
        }
        // prefix closure: dropping the final symbol stays in the set
        let set2: std::collections::BTreeSet<_> = r2.monomials.iter().cloned().collect();
        for m in &r2.monomials {
            if m.degree() > 0 {
                let prefix = Monomial { word: m.symbols()[..m.degree() - 1].to_vec() };
                assert!(set2.contains(&prefix), "prefix of {m} missing");
            }
        }
    }

    #[test]
    fn behaviour_cells_cover_reduced_outcomes() {
        let r = build_relaxation(2, 3, 2, 2, LevelSpec::fixed(2)).unwrap();
        let cells = r.behaviour_cells();
        assert_eq!(cells.len(), 6); // 1 x 1 outcomes x 2 x 3 inputs
        // identity row cells give marginals
        let a00 = Monomial::single(OpSym { party: Party::A, input: 0, outcome: 0 });
        let class = r.class_of(&a00).unwrap();
        let (i, j) = r.classes[class as usize].rep_cell;
        assert_eq!(i, 0, "marginal is an identity-row cell");
        assert!(j > 0);
    }

    #[test]
    fn prob_expression_reconstructs_binary_outputs() {
        let r = build_relaxation(2, 3, 2, 2, LevelSpec::fixed(2)).unwrap();
        let setup = crate::behaviour::ideal_chsh_setup();
        let p = crate::behaviour::ideal_chsh_behaviour();
        for x in 0..2 {
            for y in 0..3 {
                for a in 0..2 {
                    for b in 0..2 {
                        let expr = r.prob_expression(a, b, x, y);
                        let val: f64 = expr
                            .iter()
                            .map(|&(c, w)| w * r.class_moment_qubit(c, &setup))
                            .sum();
                        assert!(
                            (val - p.prob(a, b, x, y)).abs() < 1e-13,
                            "p({a},{b}|{x},{y})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn orthogonal_zero_cells_appear_for_ternary_outputs() {
        let r = build_relaxation(1, 1, 3, 2, LevelSpec::fixed(2)).unwrap();
        // generators A0|0, A1|0 (outcomes 0 and 1 of the same input), B0|0
        let mut zeros = 0;
        for i in 0..r.size() {
            for j in i..r.size() {
                if r.cell(i, j) == Cell::Zero {
                    zeros += 1;
                }
            }
        }
        assert!(zeros > 0);
    }

    #[test]
    fn correlator_scenario_level2_size() {
        let r = build_relaxation(2, 2, 2, 2, LevelSpec::fixed(2)).unwrap();
        assert_eq!(r.size(), 13); // 1 + 4 + 2 AA + 2 BB + 4 AB
    }
}
