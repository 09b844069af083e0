//! Square-tiled surfaces: permutation pairs, canonical labelling, stratum data
//! and the action of the two integer shears.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A bijection of `{0, .., n-1}`, stored by images.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Permutation {
    images: Vec<u32>,
}

impl Permutation {
    pub fn new(images: Vec<u32>) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::InvalidPermutation("empty".into()));
        }
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            let i = i as usize;
            if i >= n || seen[i] {
                return Err(Error::InvalidPermutation(format!("{images:?} is not a bijection")));
            }
            seen[i] = true;
        }
        Ok(Self { images })
    }

    pub fn identity(n: usize) -> Self {
        Self { images: (0..n as u32).collect() }
    }

    /// Builds a permutation of `{0, .., n-1}` from 0-based cycles; unlisted points are fixed.
    pub fn from_cycles(n: usize, cycles: &[Vec<u32>]) -> Result<Self> {
        let mut images: Vec<u32> = (0..n as u32).collect();
        let mut touched = vec![false; n];
        for cycle in cycles {
            for (k, &a) in cycle.iter().enumerate() {
                let b = cycle[(k + 1) % cycle.len()];
                if a as usize >= n || b as usize >= n {
                    return Err(Error::InvalidPermutation(format!("point out of range in {cycle:?}")));
                }
                if touched[a as usize] {
                    return Err(Error::InvalidPermutation(format!("point {} repeated", a + 1)));
                }
                touched[a as usize] = true;
                images[a as usize] = b;
            }
        }
        Self::new(images)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.images[i] as usize
    }

    pub fn images(&self) -> &[u32] {
        &self.images
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0u32; self.images.len()];
        for (i, &j) in self.images.iter().enumerate() {
            inv[j as usize] = i as u32;
        }
        Self { images: inv }
    }

    /// `x ↦ self(first(x))`: `first` is applied before `self`.
    pub fn after(&self, first: &Permutation) -> Self {
        Self { images: first.images.iter().map(|&i| self.images[i as usize]).collect() }
    }

    /// Cycles in order of their smallest element, each starting at that element.
    pub fn cycles(&self) -> Vec<Vec<u32>> {
        let n = self.images.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                cycle.push(i as u32);
                i = self.images[i] as usize;
            }
            out.push(cycle);
        }
        out
    }

    /// Conjugate by a relabelling `new_label[old] = new`.
    fn relabel(&self, new_label: &[u32]) -> Self {
        let mut images = vec![0u32; self.images.len()];
        for (old, &img) in self.images.iter().enumerate() {
            images[new_label[old] as usize] = new_label[img as usize];
        }
        Self { images }
    }

    fn fmt_cycles(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for cycle in self.cycles() {
            f.write_str("(")?;
            for (k, p) in cycle.iter().enumerate() {
                if k > 0 {
                    f.write_str(" ")?;
                }
                write!(f, "{}", p + 1)?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// One of the two integer shears generating the integer Möbius group.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Shear {
    /// `[[1, 1], [0, 1]]`
    Horizontal,
    /// `[[1, 0], [1, 1]]`
    Vertical,
}

impl Shear {
    pub const ALL: [Shear; 2] = [Shear::Horizontal, Shear::Vertical];

    pub fn label(self) -> &'static str {
        match self {
            Shear::Horizontal => "T_h",
            Shear::Vertical => "T_v",
        }
    }
}

/// A connected square-tiled surface: `h` sends a square to its right neighbour,
/// `v` to its upper neighbour.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Origami {
    h: Permutation,
    v: Permutation,
}

impl Origami {
    pub fn new(h: Permutation, v: Permutation) -> Result<Self> {
        if h.len() != v.len() {
            return Err(Error::InvalidOrigami(format!("h acts on {} squares but v on {}", h.len(), v.len())));
        }
        let o = Self { h, v };
        if !o.is_connected() {
            return Err(Error::InvalidOrigami("h and v do not act transitively".into()));
        }
        Ok(o)
    }

    /// The one-square torus.
    pub fn torus() -> Self {
        Self { h: Permutation::identity(1), v: Permutation::identity(1) }
    }

    /// The three-square L-shaped surface `h = (1 2)`, `v = (1 3)`, stratum H(2).
    pub fn l3() -> Self {
        Self {
            h: Permutation::from_cycles(3, &[vec![0, 1]]).unwrap(),
            v: Permutation::from_cycles(3, &[vec![0, 2]]).unwrap(),
        }
    }

    pub fn n_squares(&self) -> usize {
        self.h.len()
    }

    pub fn h(&self) -> &Permutation {
        &self.h
    }

    pub fn v(&self) -> &Permutation {
        &self.v
    }

    fn is_connected(&self) -> bool {
        let n = self.n_squares();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for j in [self.h.apply(i), self.v.apply(i)] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count == n
    }

    /// Breadth-first relabelling from `start`, visiting `h` before `v`.
    fn bfs_labelling(&self, start: usize) -> Vec<u32> {
        let n = self.n_squares();
        let mut label = vec![u32::MAX; n];
        let mut order = Vec::with_capacity(n);
        label[start] = 0;
        order.push(start);
        let mut head = 0;
        while head < order.len() {
            let i = order[head];
            head += 1;
            for j in [self.h.apply(i), self.v.apply(i)] {
                if label[j] == u32::MAX {
                    label[j] = order.len() as u32;
                    order.push(j);
                }
            }
        }
        label
    }

    /// Representative of the simultaneous-conjugacy class: the lexicographically
    /// smallest `(h, v)` over all breadth-first labellings.
    pub fn canonical_form(&self) -> Origami {
        let mut best: Option<Origami> = None;
        for start in 0..self.n_squares() {
            let label = self.bfs_labelling(start);
            let cand = Origami { h: self.h.relabel(&label), v: self.v.relabel(&label) };
            if best.as_ref().is_none_or(|b| cand < *b) {
                best = Some(cand);
            }
        }
        best.expect("at least one square")
    }

    /// Commutator whose cycles are the cone points of the flat structure.
    pub fn vertex_permutation(&self) -> Permutation {
        // x ↦ v⁻¹ h⁻¹ v h (x): walk right, up, left, down around a corner.
        let hi = self.h.inverse();
        let vi = self.v.inverse();
        vi.after(&hi.after(&self.v.after(&self.h)))
    }

    pub fn stratum(&self) -> StratumSignature {
        let cycles = self.vertex_permutation().cycles();
        let n = self.n_squares() as i64;
        let vertices = cycles.len() as i64;
        // χ = V − E + F with E = 2N, F = N
        let chi = vertices - 2 * n + n;
        let genus = ((2 - chi) / 2) as u32;
        let mut cone_orders: Vec<u32> = cycles.iter().map(|c| c.len() as u32 - 1).filter(|&k| k > 0).collect();
        cone_orders.sort_unstable_by(|a, b| b.cmp(a));
        StratumSignature { genus, cone_orders }
    }

    /// The sheared surface in canonical form.
    pub fn act_shear(&self, gen: Shear) -> Origami {
        self.act_shear_raw(gen).canonical_form()
    }

    pub(crate) fn act_shear_raw(&self, gen: Shear) -> Origami {
        match gen {
            // (h, v) ↦ (h, v·h⁻¹)
            Shear::Horizontal => Origami { h: self.h.clone(), v: self.v.after(&self.h.inverse()) },
            // (h, v) ↦ (h·v⁻¹, v)
            Shear::Vertical => Origami { h: self.h.after(&self.v.inverse()), v: self.v.clone() },
        }
    }

    /// Inverse shear, canonicalised.
    pub fn act_shear_inverse(&self, gen: Shear) -> Origami {
        match gen {
            Shear::Horizontal => Origami { h: self.h.clone(), v: self.v.after(&self.h) },
            Shear::Vertical => Origami { h: self.h.after(&self.v), v: self.v.clone() },
        }
        .canonical_form()
    }

    /// Image under the half-turn `−I`: `(h, v) ↦ (h⁻¹, v⁻¹)`, canonicalised.
    pub fn half_turn(&self) -> Origami {
        Origami { h: self.h.inverse(), v: self.v.inverse() }.canonical_form()
    }
}

impl fmt::Display for Origami {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("h=")?;
        self.h.fmt_cycles(f)?;
        f.write_str(" v=")?;
        self.v.fmt_cycles(f)
    }
}

fn parse_cycles(text: &str) -> Result<Vec<Vec<u32>>> {
    let text = text.trim();
    let mut cycles = Vec::new();
    let mut rest = text;
    while !rest.is_empty() {
        let body = rest.strip_prefix('(').ok_or_else(|| Error::Parse(format!("expected '(' at {rest:?}")))?;
        let close = body.find(')').ok_or_else(|| Error::Parse(format!("unclosed cycle in {text:?}")))?;
        let mut cycle = Vec::new();
        for tok in body[..close].split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
            let p: u32 = tok.parse().map_err(|_| Error::Parse(format!("bad square label {tok:?}")))?;
            if p == 0 {
                return Err(Error::Parse("square labels are 1-based".into()));
            }
            cycle.push(p - 1);
        }
        if cycle.is_empty() {
            return Err(Error::Parse("empty cycle".into()));
        }
        cycles.push(cycle);
        rest = body[close + 1..].trim_start();
    }
    Ok(cycles)
}

impl FromStr for Origami {
    type Err = Error;

    /// Parses `h=<cycles> v=<cycles>` with 1-based labels; fixed points may be omitted.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let hpos = s.find("h=").ok_or_else(|| Error::Parse("missing 'h='".into()))?;
        let vpos = s.find("v=").ok_or_else(|| Error::Parse("missing 'v='".into()))?;
        if !s[..hpos.min(vpos)].trim().is_empty() {
            return Err(Error::Parse(format!("unexpected text before cycles in {s:?}")));
        }
        let (htext, vtext) =
            if hpos < vpos { (&s[hpos + 2..vpos], &s[vpos + 2..]) } else { (&s[hpos + 2..], &s[vpos + 2..hpos]) };
        let hc = parse_cycles(htext)?;
        let vc = parse_cycles(vtext)?;
        let n = hc.iter().chain(vc.iter()).flatten().map(|&p| p as usize + 1).max().unwrap_or(0);
        if n == 0 {
            return Err(Error::Parse("no squares".into()));
        }
        Origami::new(Permutation::from_cycles(n, &hc)?, Permutation::from_cycles(n, &vc)?)
    }
}

/// Genus and zero orders of the abelian differential; an order-`k` zero has
/// cone angle `2π(k+1)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StratumSignature {
    pub genus: u32,
    /// Sorted in decreasing order.
    pub cone_orders: Vec<u32>,
}

impl StratumSignature {
    pub fn cone_angles_over_2pi(&self) -> Vec<u32> {
        self.cone_orders.iter().map(|k| k + 1).collect()
    }
}

impl fmt::Display for StratumSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.cone_orders.is_empty() {
            return f.write_str("H(0)");
        }
        let parts: Vec<String> = self.cone_orders.iter().map(|k| k.to_string()).collect();
        write!(f, "H({})", parts.join(","))
    }
}
