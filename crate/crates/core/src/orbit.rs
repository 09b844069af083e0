//! The integer-Möbius orbit of an origami and the coset action it induces.
//!
//! Vertices of the orbit graph are canonical origamis; the two shear
//! generators act on them by permutations. Quotienting by the half-turn gives
//! the cosets of the (projective) Veech group, which is what the hyperbolic
//! geometry consumes through [`CosetAction`].

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::origami::{Origami, Shear};

pub const DEFAULT_ORBIT_CAP: usize = 1_000_000;

#[derive(Clone, Debug)]
pub struct OrbitGraph {
    vertices: Vec<Origami>,
    /// `edges[v] = [succ under T_h, succ under T_v]`
    edges: Vec<[u32; 2]>,
    basepoint: usize,
    /// Class of each vertex under the half-turn identification.
    projective_class: Vec<u32>,
    projective_index: usize,
}

impl OrbitGraph {
    pub fn vertices(&self) -> &[Origami] {
        &self.vertices
    }

    pub fn basepoint(&self) -> usize {
        self.basepoint
    }

    /// Orbit size under the shear action.
    pub fn index(&self) -> usize {
        self.vertices.len()
    }

    /// Orbit size after identifying each origami with its half-turn image.
    pub fn projective_index(&self) -> usize {
        self.projective_index
    }

    pub fn projective_class(&self, vertex: usize) -> usize {
        self.projective_class[vertex] as usize
    }

    pub fn successor(&self, vertex: usize, gen: Shear) -> usize {
        self.edges[vertex][gen as usize] as usize
    }

    /// Successor table of one generator.
    pub fn generator_map(&self, gen: Shear) -> Vec<usize> {
        self.edges.iter().map(|e| e[gen as usize] as usize).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "vertex_id,gen,successor_id")?;
        for (v, e) in self.edges.iter().enumerate() {
            for gen in Shear::ALL {
                writeln!(out, "{},{},{}", v, gen.label(), e[gen as usize])?;
            }
        }
        Ok(())
    }

    /// Coset action of `PSL(2,Z)` on projective classes, checked against the
    /// defining relations.
    pub fn coset_action(&self) -> Result<CosetAction> {
        CosetAction::from_orbit(self)
    }
}

/// Breadth-first closure of `o` under both shears, capped at `cap` vertices.
pub fn enumerate_orbit_with_cap(o: &Origami, cap: usize) -> Result<OrbitGraph> {
    let base = o.canonical_form();
    let mut index: HashMap<Origami, u32> = HashMap::new();
    let mut vertices = vec![base.clone()];
    index.insert(base, 0);
    let mut edges: Vec<[u32; 2]> = Vec::new();
    let mut head = 0;
    while head < vertices.len() {
        let cur = vertices[head].clone();
        let mut e = [0u32; 2];
        for gen in Shear::ALL {
            let next = cur.act_shear(gen);
            let id = match index.get(&next) {
                Some(&id) => id,
                None => {
                    if vertices.len() >= cap {
                        return Err(Error::OrbitCap { cap });
                    }
                    let id = vertices.len() as u32;
                    index.insert(next.clone(), id);
                    vertices.push(next);
                    id
                }
            };
            e[gen as usize] = id;
        }
        edges.push(e);
        head += 1;
    }

    let mut projective_class = vec![u32::MAX; vertices.len()];
    let mut projective_index = 0u32;
    for v in 0..vertices.len() {
        if projective_class[v] != u32::MAX {
            continue;
        }
        let partner = *index
            .get(&vertices[v].half_turn())
            .ok_or_else(|| Error::Relation("half-turn image left the orbit".into()))?;
        projective_class[v] = projective_index;
        projective_class[partner as usize] = projective_index;
        projective_index += 1;
    }

    Ok(OrbitGraph { vertices, edges, basepoint: 0, projective_class, projective_index: projective_index as usize })
}

pub fn enumerate_orbit(o: &Origami) -> Result<OrbitGraph> {
    enumerate_orbit_with_cap(o, DEFAULT_ORBIT_CAP)
}

fn invert(map: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; map.len()];
    for (i, &j) in map.iter().enumerate() {
        inv[j] = i;
    }
    inv
}

/// Right action of `PSL(2,Z)` on the cosets `Γ\PSL(2,Z)`, indexed by
/// projective classes, with `T = [[1,1],[0,1]]` and `S = [[0,-1],[1,0]]`.
///
/// Words act left to right: `c·(g₁g₂) = (c·g₁)·g₂`.
#[derive(Clone, Debug)]
pub struct CosetAction {
    t: Vec<u32>,
    t_inv: Vec<u32>,
    s: Vec<u32>,
    /// For each coset, the id of its `T`-cycle and its position in that cycle.
    t_cycle: Vec<(u32, u32)>,
    /// Cosets of each `T`-cycle in cycle order; lengths are the cusp widths.
    t_cycles: Vec<Vec<u32>>,
    base: usize,
}

impl CosetAction {
    pub fn from_orbit(orbit: &OrbitGraph) -> Result<Self> {
        let th = orbit.generator_map(Shear::Horizontal);
        let tv = orbit.generator_map(Shear::Vertical);
        let tv_inv = invert(&tv);
        let n = th.len();

        // S ≡ V⁻¹ T V⁻¹ and the braid relation T V⁻¹ T = V⁻¹ T V⁻¹.
        let s_raw: Vec<usize> = (0..n).map(|c| tv_inv[th[tv_inv[c]]]).collect();
        for c in 0..n {
            if th[tv_inv[th[c]]] != s_raw[c] {
                return Err(Error::Relation(format!("T V⁻¹ T = V⁻¹ T V⁻¹ at vertex {c}")));
            }
            // S² is the half-turn, so it fixes projective classes.
            if orbit.projective_class(s_raw[s_raw[c]]) != orbit.projective_class(c) {
                return Err(Error::Relation(format!("S² = ±I at vertex {c}")));
            }
            if s_raw[s_raw[s_raw[s_raw[c]]]] != c {
                return Err(Error::Relation(format!("S⁴ = I at vertex {c}")));
            }
            // (S T)³ = ±I
            let mut x = c;
            for _ in 0..3 {
                x = th[s_raw[x]];
            }
            if orbit.projective_class(x) != orbit.projective_class(c) {
                return Err(Error::Relation(format!("(S T)³ = ±I at vertex {c}")));
            }
        }

        let m = orbit.projective_index();
        let mut t = vec![u32::MAX; m];
        let mut s = vec![u32::MAX; m];
        for c in 0..n {
            let pc = orbit.projective_class(c);
            let pt = orbit.projective_class(th[c]) as u32;
            let ps = orbit.projective_class(s_raw[c]) as u32;
            if (t[pc] != u32::MAX && t[pc] != pt) || (s[pc] != u32::MAX && s[pc] != ps) {
                return Err(Error::Relation("half-turn does not commute with the shears".into()));
            }
            t[pc] = pt;
            s[pc] = ps;
        }
        let t_inv: Vec<u32> = {
            let tu: Vec<usize> = t.iter().map(|&x| x as usize).collect();
            invert(&tu).into_iter().map(|x| x as u32).collect()
        };

        let mut t_cycle = vec![(u32::MAX, 0u32); m];
        let mut t_cycles = Vec::new();
        for c in 0..m {
            if t_cycle[c].0 != u32::MAX {
                continue;
            }
            let id = t_cycles.len() as u32;
            let mut cycle = Vec::new();
            let mut x = c;
            while t_cycle[x].0 == u32::MAX {
                t_cycle[x] = (id, cycle.len() as u32);
                cycle.push(x as u32);
                x = t[x] as usize;
            }
            t_cycles.push(cycle);
        }

        Ok(Self { t, t_inv, s, t_cycle, t_cycles, base: orbit.projective_class(orbit.basepoint()) })
    }

    /// Action of the full group on a single coset (index 1).
    pub fn trivial() -> Self {
        Self { t: vec![0], t_inv: vec![0], s: vec![0], t_cycle: vec![(0, 0)], t_cycles: vec![vec![0]], base: 0 }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Coset of the basepoint origami.
    pub fn base(&self) -> usize {
        self.base
    }

    #[inline]
    pub fn t(&self, c: usize) -> usize {
        self.t[c] as usize
    }

    #[inline]
    pub fn t_inv(&self, c: usize) -> usize {
        self.t_inv[c] as usize
    }

    #[inline]
    pub fn s(&self, c: usize) -> usize {
        self.s[c] as usize
    }

    /// `c·T^k` for any integer `k`, in constant time.
    #[inline]
    pub fn t_pow(&self, c: usize, k: i64) -> usize {
        let (id, pos) = self.t_cycle[c];
        let cycle = &self.t_cycles[id as usize];
        let len = cycle.len() as i64;
        cycle[(pos as i64 + k).rem_euclid(len) as usize] as usize
    }

    /// Widths of the cusps (lengths of the `T`-cycles).
    pub fn cusp_widths(&self) -> Vec<usize> {
        self.t_cycles.iter().map(Vec::len).collect()
    }
}
