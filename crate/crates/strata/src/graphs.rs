//! Stable graphs: dual graphs of stable pointed curves with genus-labelled
//! vertices, marked legs, and edges stored as ordered endpoint pairs.
//!
//! Graphs are kept in a canonical form so that isomorphic decorated strata
//! merge; canonicalization is an exhaustive search over genus- and
//! leg-preserving vertex orders, which is exact at the sizes that occur in
//! genus <= 2.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::{Mutex, OnceLock};

pub type VertexId = usize;

/// A flag is a leg (carrying its marking) or one half of an edge.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Flag {
    Leg(u32),
    Half(usize, u8),
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct StableGraph {
    pub genus: Vec<u32>,
    /// (marking, vertex), sorted by marking.
    pub legs: Vec<(u32, VertexId)>,
    /// Each pair (a, b) with a <= b; the list is sorted. A loop has a == b.
    pub edges: Vec<(VertexId, VertexId)>,
}

/// Result of canonicalization: the canonical representative, the flag
/// relabelling into it, its automorphism count, and the automorphisms of the
/// canonical graph as flag permutations (legs are fixed pointwise).
#[derive(Clone, Debug)]
pub struct Canon {
    pub graph: StableGraph,
    pub flag_map: BTreeMap<Flag, Flag>,
    /// old vertex id -> canonical vertex id
    pub vertex_map: Vec<usize>,
    pub aut_count: u64,
    pub auts: Vec<BTreeMap<Flag, Flag>>,
    /// vertex permutation of each automorphism, aligned with `auts`
    pub auts_vertex: Vec<Vec<usize>>,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum GraphFilter {
    All,
    CompactType,
    RationalTails,
    NoRationalTails,
    Extended,
}

/// How an edge of a genus-2 graph splits it.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum EdgeClass {
    /// Disconnecting, both sides of genus one.
    GenusOnePair,
    /// Disconnecting into a genus-2 part and a rational part; `toward_g2`
    /// is the flag on the rational side, `outward` the flag on the genus-2
    /// side.
    RationalTail { toward_g2: Flag, outward: Flag },
    NonDisconnecting,
}

impl StableGraph {
    pub fn smooth(genus: u32, marks: &BTreeSet<u32>) -> Self {
        StableGraph {
            genus: vec![genus],
            legs: marks.iter().map(|&m| (m, 0)).collect(),
            edges: Vec::new(),
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.genus.len()
    }

    pub fn h1(&self) -> u32 {
        (self.edges.len() + 1 - self.n_vertices()) as u32
    }

    pub fn total_genus(&self) -> u32 {
        self.genus.iter().sum::<u32>() + self.h1()
    }

    pub fn leg_vertex(&self, mark: u32) -> Option<VertexId> {
        self.legs.iter().find(|&&(m, _)| m == mark).map(|&(_, v)| v)
    }

    pub fn flag_vertex(&self, f: Flag) -> VertexId {
        match f {
            Flag::Leg(m) => self.leg_vertex(m).expect("unknown marking"),
            Flag::Half(e, s) => {
                let (a, b) = self.edges[e];
                if s == 0 {
                    a
                } else {
                    b
                }
            }
        }
    }

    pub fn edge_flags(&self, e: usize) -> (Flag, Flag) {
        (Flag::Half(e, 0), Flag::Half(e, 1))
    }

    pub fn other_half(&self, f: Flag) -> Flag {
        match f {
            Flag::Half(e, s) => Flag::Half(e, 1 - s),
            Flag::Leg(_) => panic!("leg has no partner"),
        }
    }

    /// Flags at a vertex: legs sorted by marking, then halves by (edge, side).
    pub fn vertex_flags(&self, v: VertexId) -> Vec<Flag> {
        let mut out = Vec::new();
        for &(m, w) in &self.legs {
            if w == v {
                out.push(Flag::Leg(m));
            }
        }
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            if a == v {
                out.push(Flag::Half(i, 0));
            }
            if b == v {
                out.push(Flag::Half(i, 1));
            }
        }
        out
    }

    pub fn all_flags(&self) -> Vec<Flag> {
        (0..self.n_vertices())
            .flat_map(|v| self.vertex_flags(v))
            .collect()
    }

    pub fn valence(&self, v: VertexId) -> usize {
        self.vertex_flags(v).len()
    }

    pub fn loops_at(&self, v: VertexId) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v && b == v).count()
    }

    pub fn is_stable(&self) -> bool {
        (0..self.n_vertices()).all(|v| 2 * self.genus[v] as usize + self.valence(v) > 2)
    }

    pub fn is_connected(&self) -> bool {
        if self.n_vertices() == 0 {
            return false;
        }
        let mut seen = vec![false; self.n_vertices()];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(a, b) in &self.edges {
                for (x, y) in [(a, b), (b, a)] {
                    if x == v && !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn check_valid(&self) -> Result<(), String> {
        if !self.is_connected() {
            return Err("graph is not connected".into());
        }
        for v in 0..self.n_vertices() {
            if 2 * self.genus[v] as usize + self.valence(v) <= 2 {
                return Err(format!(
                    "vertex {} (genus {}) violates stability",
                    v, self.genus[v]
                ));
            }
        }
        Ok(())
    }

    pub fn marks(&self) -> BTreeSet<u32> {
        self.legs.iter().map(|&(m, _)| m).collect()
    }

    /// Vertices reachable from `start` without crossing edge `skip`.
    fn side_of(&self, start: VertexId, skip: usize) -> HashSet<VertexId> {
        let mut seen = HashSet::new();
        seen.insert(start);
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for (i, &(a, b)) in self.edges.iter().enumerate() {
                if i == skip {
                    continue;
                }
                for (x, y) in [(a, b), (b, a)] {
                    if x == v && !seen.contains(&y) {
                        seen.insert(y);
                        stack.push(y);
                    }
                }
            }
        }
        seen
    }

    pub fn edge_disconnects(&self, e: usize) -> bool {
        let (a, b) = self.edges[e];
        if a == b {
            return false;
        }
        !self.side_of(a, e).contains(&b)
    }

    fn subgraph_genus(&self, verts: &HashSet<VertexId>, skip: usize) -> u32 {
        let g: u32 = verts.iter().map(|&v| self.genus[v]).sum();
        let e = self
            .edges
            .iter()
            .enumerate()
            .filter(|&(i, &(a, b))| i != skip && verts.contains(&a) && verts.contains(&b))
            .count();
        g + (e + 1 - verts.len()) as u32
    }

    /// Relabels markings through `map`; markings not present in `map` keep
    /// their label.
    pub fn relabel_legs(&self, map: &BTreeMap<u32, u32>) -> StableGraph {
        let mut legs: Vec<(u32, VertexId)> = self
            .legs
            .iter()
            .map(|&(m, v)| (*map.get(&m).unwrap_or(&m), v))
            .collect();
        legs.sort();
        StableGraph {
            genus: self.genus.clone(),
            legs,
            edges: self.edges.clone(),
        }
    }

    /// Contracts the edge set `which`; the flag map covers every flag not on a
    /// contracted edge, and the vertex map covers all vertices. Contracting a
    /// loop raises its vertex genus; a non-loop merges its endpoints and adds
    /// the genera.
    pub fn contract_edges(
        &self,
        which: &[usize],
    ) -> (StableGraph, BTreeMap<Flag, Flag>, Vec<usize>) {
        let contract: HashSet<usize> = which.iter().copied().collect();
        // Union-find over vertices along contracted non-loop edges.
        let mut parent: Vec<usize> = (0..self.n_vertices()).collect();
        fn find(parent: &mut Vec<usize>, x: usize) -> usize {
            if parent[x] != x {
                let r = find(parent, parent[x]);
                parent[x] = r;
                r
            } else {
                x
            }
        }
        let mut extra_genus = vec![0u32; self.n_vertices()];
        for &e in which {
            let (a, b) = self.edges[e];
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra == rb {
                extra_genus[ra] += 1;
            } else {
                parent[ra] = rb;
            }
        }
        // Re-root extra genus contributions.
        let mut genus_acc: HashMap<usize, u32> = HashMap::new();
        for v in 0..self.n_vertices() {
            let r = find(&mut parent, v);
            *genus_acc.entry(r).or_insert(0) += self.genus[v] + extra_genus[v];
        }
        let mut roots: Vec<usize> = genus_acc.keys().copied().collect();
        roots.sort();
        let index_of: HashMap<usize, usize> =
            roots.iter().enumerate().map(|(i, &r)| (r, i)).collect();
        let genus: Vec<u32> = roots.iter().map(|r| genus_acc[r]).collect();
        let mut legs: Vec<(u32, VertexId)> = self
            .legs
            .iter()
            .map(|&(m, v)| (m, index_of[&find(&mut parent, v)]))
            .collect();
        legs.sort();
        let mut edges = Vec::new();
        let mut flag_map = BTreeMap::new();
        for &(m, _) in &self.legs {
            flag_map.insert(Flag::Leg(m), Flag::Leg(m));
        }
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            if contract.contains(&i) {
                continue;
            }
            let na = index_of[&find(&mut parent, a)];
            let nb = index_of[&find(&mut parent, b)];
            let k = edges.len();
            if na <= nb {
                edges.push((na, nb));
                flag_map.insert(Flag::Half(i, 0), Flag::Half(k, 0));
                flag_map.insert(Flag::Half(i, 1), Flag::Half(k, 1));
            } else {
                edges.push((nb, na));
                flag_map.insert(Flag::Half(i, 0), Flag::Half(k, 1));
                flag_map.insert(Flag::Half(i, 1), Flag::Half(k, 0));
            }
        }
        let vertex_map: Vec<usize> = (0..self.n_vertices())
            .map(|v| index_of[&find(&mut parent, v)])
            .collect();
        (
            StableGraph {
                genus,
                legs,
                edges,
            },
            flag_map,
            vertex_map,
        )
    }

    /// Minimal certificate search over genus/leg/valence-preserving vertex
    /// orders, after an iterated colour refinement that shrinks the
    /// permutation classes.
    pub fn canonicalize(&self) -> Canon {
        let n = self.n_vertices();
        // Invariant key per vertex; vertices sharing a key form a class.
        let key = |v: usize| {
            let mut legs: Vec<u32> = self
                .legs
                .iter()
                .filter(|&&(_, w)| w == v)
                .map(|&(m, _)| m)
                .collect();
            legs.sort();
            (self.genus[v], legs, self.valence(v), self.loops_at(v))
        };
        // Colour refinement: start from the invariant key, refine by the
        // sorted multiset of neighbour colours until stable. Colours are
        // ranks of sorted signatures, so they agree across isomorphic
        // graphs.
        let mut colors: Vec<usize> = {
            let keys: Vec<_> = (0..n).map(key).collect();
            let mut sorted = keys.clone();
            sorted.sort();
            sorted.dedup();
            keys.iter()
                .map(|k| sorted.binary_search(k).unwrap())
                .collect()
        };
        loop {
            let sigs: Vec<(usize, Vec<usize>)> = (0..n)
                .map(|v| {
                    let mut nb: Vec<usize> = self
                        .edges
                        .iter()
                        .flat_map(|&(a, b)| {
                            let mut out = Vec::new();
                            if a == v {
                                out.push(colors[b]);
                            }
                            if b == v {
                                out.push(colors[a]);
                            }
                            out
                        })
                        .collect();
                    nb.sort();
                    (colors[v], nb)
                })
                .collect();
            let mut sorted = sigs.clone();
            sorted.sort();
            sorted.dedup();
            let next: Vec<usize> = sigs
                .iter()
                .map(|s| sorted.binary_search(s).unwrap())
                .collect();
            if next == colors {
                break;
            }
            colors = next;
        }
        let mut classes: BTreeMap<(usize, _), Vec<usize>> = BTreeMap::new();
        for v in 0..n {
            classes.entry((colors[v], key(v))).or_default().push(v);
        }
        let class_list: Vec<Vec<usize>> = classes.into_values().collect();

        // Enumerate vertex orders as products of within-class permutations.
        let mut orders: Vec<Vec<usize>> = vec![Vec::new()];
        for class in &class_list {
            let perms = permutations(class);
            let mut next = Vec::with_capacity(orders.len() * perms.len());
            for base in &orders {
                for p in &perms {
                    let mut o = base.clone();
                    o.extend_from_slice(p);
                    next.push(o);
                }
            }
            orders = next;
        }

        let mut best_cert: Option<Vec<(usize, usize)>> = None;
        let mut best_orders: Vec<Vec<usize>> = Vec::new();
        for order in orders {
            // order[i] = old id at new position i; invert to old -> new.
            let mut pos = vec![0usize; n];
            for (i, &old) in order.iter().enumerate() {
                pos[old] = i;
            }
            let mut cert: Vec<(usize, usize)> = self
                .edges
                .iter()
                .map(|&(a, b)| {
                    let (x, y) = (pos[a], pos[b]);
                    if x <= y {
                        (x, y)
                    } else {
                        (y, x)
                    }
                })
                .collect();
            cert.sort();
            match &best_cert {
                Some(bc) if *bc < cert => {}
                Some(bc) if *bc == cert => best_orders.push(order),
                _ => {
                    best_cert = Some(cert);
                    best_orders = vec![order];
                }
            }
        }
        let cert = best_cert.unwrap_or_default();
        let order = best_orders[0].clone();
        let mut pos = vec![0usize; n];
        for (i, &old) in order.iter().enumerate() {
            pos[old] = i;
        }

        let genus: Vec<u32> = order.iter().map(|&v| self.genus[v]).collect();
        let mut legs: Vec<(u32, VertexId)> =
            self.legs.iter().map(|&(m, v)| (m, pos[v])).collect();
        legs.sort();
        let canonical = StableGraph {
            genus,
            legs,
            edges: cert.clone(),
        };

        // Old edge -> canonical edge index and side orientation, assigning
        // parallel copies in old-index order.
        let mut flag_map = BTreeMap::new();
        for &(m, _) in &self.legs {
            flag_map.insert(Flag::Leg(m), Flag::Leg(m));
        }
        let mut used: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (k, &(x, y)) in cert.iter().enumerate() {
            used.entry((x, y)).or_default().push(k);
        }
        let mut next_in_class: HashMap<(usize, usize), usize> = HashMap::new();
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            let (x, y) = {
                let (p, q) = (pos[a], pos[b]);
                if p <= q {
                    (p, q)
                } else {
                    (q, p)
                }
            };
            let slot = *next_in_class.entry((x, y)).or_insert(0);
            next_in_class.insert((x, y), slot + 1);
            let k = used[&(x, y)][slot];
            if x == y || pos[a] == x {
                flag_map.insert(Flag::Half(i, 0), Flag::Half(k, 0));
                flag_map.insert(Flag::Half(i, 1), Flag::Half(k, 1));
            } else {
                flag_map.insert(Flag::Half(i, 0), Flag::Half(k, 1));
                flag_map.insert(Flag::Half(i, 1), Flag::Half(k, 0));
            }
        }

        // Automorphism count: vertex symmetries times parallel-edge
        // permutations times loop half swaps.
        let mut parallel: HashMap<(usize, usize), u64> = HashMap::new();
        for &(x, y) in &cert {
            *parallel.entry((x, y)).or_insert(0) += 1;
        }
        let mut aut_count = best_orders.len() as u64;
        let mut loops = 0u32;
        for ((x, y), mult) in &parallel {
            let mut f = 1u64;
            for j in 2..=*mult {
                f *= j;
            }
            aut_count *= f;
            if x == y {
                loops += *mult as u32;
            }
        }
        aut_count <<= loops;

        let (auts, auts_vertex) = canonical.flag_automorphisms(&best_orders, &order);
        debug_assert_eq!(auts.len() as u64, aut_count);
        Canon {
            graph: canonical,
            flag_map,
            vertex_map: pos,
            aut_count,
            auts,
            auts_vertex,
        }
    }

    /// Flag permutations of the canonical graph, built from the vertex
    /// symmetries plus parallel-edge matchings and loop flips.
    fn flag_automorphisms(
        &self,
        best_orders: &[Vec<usize>],
        chosen: &[usize],
    ) -> (Vec<BTreeMap<Flag, Flag>>, Vec<Vec<usize>>) {
        // Vertex automorphisms of the canonical graph: composition of the
        // chosen order with every other best order.
        let n = self.n_vertices();
        let mut pos_chosen = vec![0usize; n];
        for (i, &old) in chosen.iter().enumerate() {
            pos_chosen[old] = i;
        }
        let mut vperms: Vec<Vec<usize>> = Vec::new();
        for other in best_orders {
            // new index i (in chosen) -> old chosen[i] -> new index in other.
            let mut pos_other = vec![0usize; n];
            for (i, &old) in other.iter().enumerate() {
                pos_other[old] = i;
            }
            let perm: Vec<usize> = (0..n).map(|i| pos_other[chosen[i]]).collect();
            vperms.push(perm);
        }

        // Group canonical edges into parallel classes.
        let mut class_of: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (k, &(x, y)) in self.edges.iter().enumerate() {
            class_of.entry((x, y)).or_default().push(k);
        }

        let mut out = Vec::new();
        let mut out_vertex = Vec::new();
        for vp in &vperms {
            // Image class for each parallel class.
            let mut assignments: Vec<Vec<(usize, usize, bool)>> = vec![Vec::new()];
            // (old edge, new edge, swap_sides)
            let mut keys: Vec<(usize, usize)> = class_of.keys().copied().collect();
            keys.sort();
            for &(x, y) in &keys {
                let src = &class_of[&(x, y)];
                let (ix, iy) = {
                    let (p, q) = (vp[x], vp[y]);
                    if p <= q {
                        (p, q)
                    } else {
                        (q, p)
                    }
                };
                let dst = &class_of[&(ix, iy)];
                let is_loop = x == y;
                let mut new_assignments = Vec::new();
                for perm in permutations(dst) {
                    // swap side iff mapped endpoint order reverses; for loops
                    // both choices are allowed per edge.
                    let side_options: Vec<Vec<bool>> = if is_loop {
                        bool_vectors(src.len())
                    } else {
                        vec![vec![vp[x] > vp[y]; src.len()]]
                    };
                    for sides in side_options {
                        for base in &assignments {
                            let mut a = base.clone();
                            for (j, &e_old) in src.iter().enumerate() {
                                a.push((e_old, perm[j], sides[j]));
                            }
                            new_assignments.push(a);
                        }
                    }
                }
                assignments = new_assignments;
            }
            for a in assignments {
                let mut map = BTreeMap::new();
                for &(m, _) in &self.legs {
                    map.insert(Flag::Leg(m), Flag::Leg(m));
                }
                for &(e_old, e_new, swap) in &a {
                    let (s0, s1) = if swap { (1, 0) } else { (0, 1) };
                    map.insert(Flag::Half(e_old, 0), Flag::Half(e_new, s0));
                    map.insert(Flag::Half(e_old, 1), Flag::Half(e_new, s1));
                }
                out.push(map);
                out_vertex.push(vp.clone());
            }
        }
        (out, out_vertex)
    }

    /// Partition of the edges of a genus-2 graph by how they separate it.
    pub fn classify_edges(&self) -> Result<Vec<EdgeClass>, String> {
        if self.total_genus() != 2 {
            return Err(format!("expected genus 2, got {}", self.total_genus()));
        }
        let mut out = Vec::with_capacity(self.edges.len());
        for e in 0..self.edges.len() {
            if !self.edge_disconnects(e) {
                out.push(EdgeClass::NonDisconnecting);
                continue;
            }
            let (a, b) = self.edges[e];
            let side_a = self.side_of(a, e);
            let ga = self.subgraph_genus(&side_a, e);
            if ga == 1 {
                out.push(EdgeClass::GenusOnePair);
            } else {
                // One side rational, the other of genus two. Flag 0 sits at
                // `a`; it points toward the genus-2 part iff side_a is the
                // rational side.
                let (toward, outward) = if ga == 0 {
                    (Flag::Half(e, 0), Flag::Half(e, 1))
                } else {
                    (Flag::Half(e, 1), Flag::Half(e, 0))
                };
                let _ = b;
                out.push(EdgeClass::RationalTail {
                    toward_g2: toward,
                    outward,
                });
            }
        }
        Ok(out)
    }

    /// The minimal connected full-genus subgraph: prune rational leaf
    /// vertices until none remain. Returns the vertex set of the core.
    pub fn core_vertices(&self) -> HashSet<VertexId> {
        let mut alive: HashSet<VertexId> = (0..self.n_vertices()).collect();
        loop {
            let mut removed = None;
            for &v in &alive {
                if self.genus[v] != 0 || self.loops_at(v) > 0 {
                    continue;
                }
                let deg = self
                    .edges
                    .iter()
                    .filter(|&&(a, b)| {
                        (a == v && alive.contains(&b) && b != v)
                            || (b == v && alive.contains(&a) && a != v)
                    })
                    .count();
                if deg == 1 {
                    removed = Some(v);
                    break;
                }
            }
            match removed {
                Some(v) => {
                    alive.remove(&v);
                }
                None => break,
            }
        }
        alive
    }

    /// Outward flags of the external trees: the legs carried by tail
    /// vertices together with the tail-internal half-edges pointing toward
    /// the core. `w` sends each of them to the tail-side flag of its tree's
    /// attaching edge.
    pub fn core_and_outward(&self) -> (HashSet<VertexId>, Vec<Flag>, BTreeMap<Flag, Flag>) {
        let core = self.core_vertices();
        let mut outward = Vec::new();
        let mut w = BTreeMap::new();
        for v in 0..self.n_vertices() {
            if core.contains(&v) {
                continue;
            }
            let attach = self.attaching_flag(v, &core);
            for f in self.vertex_flags(v) {
                match f {
                    Flag::Leg(_) => {
                        outward.push(f);
                        w.insert(f, attach);
                    }
                    Flag::Half(e, _) => {
                        // Outward iff the partner's side of this tree edge
                        // contains the core; this includes the tail-side
                        // half of the attaching edge itself.
                        let side = self.side_of(self.flag_vertex(f), e);
                        if !side.iter().any(|x| core.contains(x)) {
                            outward.push(f);
                            w.insert(f, attach);
                        }
                    }
                }
            }
        }
        outward.sort();
        (core, outward, w)
    }

    /// Tail-side flag of the edge attaching v's external tree to the core:
    /// breadth-first search from v, stopping at the first step into the core.
    pub fn attaching_flag(&self, v: VertexId, core: &HashSet<VertexId>) -> Flag {
        let mut queue = std::collections::VecDeque::new();
        let mut seen = HashSet::new();
        queue.push_back(v);
        seen.insert(v);
        while let Some(x) = queue.pop_front() {
            for (i, &(a, b)) in self.edges.iter().enumerate() {
                for (s, p, q) in [(0u8, a, b), (1u8, b, a)] {
                    if p == x && !seen.contains(&q) {
                        if core.contains(&q) {
                            // flag at x (the tail side) on edge i
                            return Flag::Half(i, s);
                        }
                        seen.insert(q);
                        queue.push_back(q);
                    }
                }
            }
        }
        panic!("core unreachable from tail vertex");
    }

    /// Membership in the extended graph family used by the boundary formula
    /// beyond compact type: no one-edge loops; three non-disconnecting edges
    /// need three adjacent vertices; a trivalent rational vertex on the
    /// non-disconnecting part must either reach an elliptic vertex through
    /// disconnecting edges or have a disconnecting-edge neighbour that is
    /// not both trivalent and rational; and a rational vertex adjacent to a
    /// non-disconnecting edge may not carry two external trivalent rational
    /// neighbours.
    pub fn in_extended_set(&self) -> bool {
        debug_assert_eq!(self.total_genus(), 2);
        // (i) no loops
        if self.edges.iter().any(|&(a, b)| a == b) {
            return false;
        }
        let classes = self.classify_edges().expect("genus 2");
        let nondisc: Vec<usize> = (0..self.edges.len())
            .filter(|&e| classes[e] == EdgeClass::NonDisconnecting)
            .collect();
        // (ii)
        if nondisc.len() == 3 {
            let mut verts = HashSet::new();
            for &e in &nondisc {
                verts.insert(self.edges[e].0);
                verts.insert(self.edges[e].1);
            }
            if verts.len() < 3 {
                return false;
            }
        }
        let trivalent_rational =
            |v: VertexId| self.genus[v] == 0 && self.valence(v) == 3;
        let adjacent_nondisc = |v: VertexId| {
            nondisc
                .iter()
                .any(|&e| self.edges[e].0 == v || self.edges[e].1 == v)
        };
        // Vertices reachable through disconnecting edges only.
        let disc_reach = |v: VertexId| -> HashSet<VertexId> {
            let mut seen = HashSet::new();
            seen.insert(v);
            let mut stack = vec![v];
            while let Some(x) = stack.pop() {
                for (i, &(a, b)) in self.edges.iter().enumerate() {
                    if classes[i] == EdgeClass::NonDisconnecting {
                        continue;
                    }
                    for (p, q) in [(a, b), (b, a)] {
                        if p == x && !seen.contains(&q) {
                            seen.insert(q);
                            stack.push(q);
                        }
                    }
                }
            }
            seen
        };
        // (iii)
        for v in 0..self.n_vertices() {
            if !adjacent_nondisc(v) {
                continue;
            }
            if disc_reach(v).iter().any(|&x| self.genus[x] == 1) {
                continue;
            }
            if !trivalent_rational(v) {
                continue;
            }
            // Needs a disconnecting-edge neighbour that is not both
            // trivalent and rational.
            let ok = self.edges.iter().enumerate().any(|(i, &(a, b))| {
                classes[i] != EdgeClass::NonDisconnecting
                    && ((a == v && !trivalent_rational(b))
                        || (b == v && !trivalent_rational(a)))
            });
            if !ok {
                return false;
            }
        }
        // (iv)
        let external = |v: VertexId| {
            self.loops_at(v) == 0
                && self
                    .edges
                    .iter()
                    .filter(|&&(a, b)| a == v || b == v)
                    .count()
                    == 1
        };
        for v in 0..self.n_vertices() {
            if self.genus[v] != 0 || !adjacent_nondisc(v) {
                continue;
            }
            let bad = self
                .edges
                .iter()
                .filter(|&&(a, b)| {
                    let u = if a == v { b } else if b == v { a } else { return false };
                    u != v && external(u) && trivalent_rational(u)
                })
                .count();
            if bad >= 2 {
                return false;
            }
        }
        true
    }

    pub fn matches_filter(&self, filter: GraphFilter) -> bool {
        match filter {
            GraphFilter::All => true,
            GraphFilter::CompactType => self.h1() == 0,
            GraphFilter::RationalTails => {
                self.h1() == 0 && self.genus.iter().any(|&g| g == self.total_genus())
            }
            GraphFilter::NoRationalTails => {
                self.h1() == 0
                    && (0..self.n_vertices()).all(|v| {
                        self.genus[v] != 0
                            || self
                                .edges
                                .iter()
                                .filter(|&&(a, b)| a == v || b == v)
                                .count()
                                != 1
                    })
            }
            GraphFilter::Extended => self.in_extended_set(),
        }
    }

    /// One-line record: field order fixed, vertices in canonical order.
    pub fn record(&self, aut: u64) -> String {
        let v = self
            .genus
            .iter()
            .map(|g| g.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let l = self
            .legs
            .iter()
            .map(|&(m, v)| format!("{}:{}", m, v))
            .collect::<Vec<_>>()
            .join(",");
        let slots = self.flag_slots();
        let e = self
            .edges
            .iter()
            .enumerate()
            .map(|(i, _)| {
                let (f0, f1) = self.edge_flags(i);
                format!(
                    "({}.{}-{}.{})",
                    self.flag_vertex(f0),
                    slots[&f0],
                    self.flag_vertex(f1),
                    slots[&f1]
                )
            })
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "G g={} n={} V={} L={} E={} aut={} h1={}",
            self.total_genus(),
            self.legs.len(),
            v,
            l,
            e,
            aut,
            self.h1()
        )
    }

    /// Slot index of each flag within its vertex (legs first, then halves).
    pub fn flag_slots(&self) -> BTreeMap<Flag, usize> {
        let mut out = BTreeMap::new();
        for v in 0..self.n_vertices() {
            for (i, f) in self.vertex_flags(v).into_iter().enumerate() {
                out.insert(f, i);
            }
        }
        out
    }

    pub fn flag_at_slot(&self, v: VertexId, slot: usize) -> Option<Flag> {
        self.vertex_flags(v).get(slot).copied()
    }

    pub fn parse_record(line: &str) -> Result<(StableGraph, u64), String> {
        let mut fields: HashMap<&str, &str> = HashMap::new();
        for tok in line.split_whitespace() {
            if tok == "G" {
                continue;
            }
            let (k, v) = tok.split_once('=').ok_or("bad field")?;
            fields.insert(k, v);
        }
        let genus: Vec<u32> = if fields["V"].is_empty() {
            Vec::new()
        } else {
            fields["V"]
                .split(',')
                .map(|s| s.parse().map_err(|_| "bad genus".to_string()))
                .collect::<Result<_, _>>()?
        };
        let mut legs = Vec::new();
        if !fields["L"].is_empty() {
            for part in fields["L"].split(',') {
                let (m, v) = part.split_once(':').ok_or("bad leg")?;
                legs.push((
                    m.parse().map_err(|_| "bad mark")?,
                    v.parse().map_err(|_| "bad leg vertex")?,
                ));
            }
        }
        legs.sort();
        let mut edges = Vec::new();
        let e_field = fields["E"];
        if !e_field.is_empty() {
            for part in e_field.split("),") {
                let part = part.trim_start_matches('(').trim_end_matches(')');
                let (x, y) = part.split_once('-').ok_or("bad edge")?;
                let va: usize = x.split('.').next().unwrap().parse().map_err(|_| "bad edge")?;
                let vb: usize = y.split('.').next().unwrap().parse().map_err(|_| "bad edge")?;
                // Record printing keeps side 0 first; reconstruct likewise.
                edges.push(if va <= vb { (va, vb) } else { (vb, va) });
            }
        }
        let aut: u64 = fields["aut"].parse().map_err(|_| "bad aut")?;
        Ok((
            StableGraph {
                genus,
                legs,
                edges,
            },
            aut,
        ))
    }
}

fn permutations<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let x = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, x.clone());
            out.push(tail);
        }
    }
    out
}

fn bool_vectors(n: usize) -> Vec<Vec<bool>> {
    (0..(1usize << n))
        .map(|mask| (0..n).map(|i| mask & (1 << i) != 0).collect())
        .collect()
}

// ---------------------------------------------------------------------------
// Enumeration

fn splits_of(graph: &StableGraph, v: VertexId) -> Vec<StableGraph> {
    let mut out = Vec::new();
    let g = graph.genus[v];
    // Endpoint slots at v: leg indices and edge endpoints.
    let legs_at: Vec<usize> = graph
        .legs
        .iter()
        .enumerate()
        .filter(|&(_, &(_, w))| w == v)
        .map(|(i, _)| i)
        .collect();
    let ends_at: Vec<(usize, u8)> = graph
        .edges
        .iter()
        .enumerate()
        .flat_map(|(i, &(a, b))| {
            let mut v2 = Vec::new();
            if a == v {
                v2.push((i, 0u8));
            }
            if b == v {
                v2.push((i, 1u8));
            }
            v2
        })
        .collect();
    let slots = legs_at.len() + ends_at.len();
    for g1 in 0..=g {
        let g2 = g - g1;
        for mask in 0..(1u64 << slots) {
            // Side 1 keeps vertex id v, side 2 becomes a fresh vertex.
            let new_v = graph.n_vertices();
            let mut genus = graph.genus.clone();
            genus[v] = g1;
            genus.push(g2);
            let mut legs = graph.legs.clone();
            for (j, &li) in legs_at.iter().enumerate() {
                if mask & (1 << j) != 0 {
                    legs[li].1 = new_v;
                }
            }
            let mut edges = graph.edges.clone();
            for (j, &(ei, side)) in ends_at.iter().enumerate() {
                if mask & (1 << (legs_at.len() + j)) != 0 {
                    if side == 0 {
                        edges[ei].0 = new_v;
                    } else {
                        edges[ei].1 = new_v;
                    }
                }
            }
            edges.push((v, new_v));
            let mut cand = StableGraph {
                genus,
                legs,
                edges,
            };
            normalize_raw(&mut cand);
            if cand.is_stable() {
                out.push(cand);
            }
        }
    }
    out
}

/// Orders edge endpoint pairs and sorts edge/leg lists (raw builder output).
fn normalize_raw(g: &mut StableGraph) {
    for e in g.edges.iter_mut() {
        if e.0 > e.1 {
            *e = (e.1, e.0);
        }
    }
    g.edges.sort();
    g.legs.sort();
}

fn enumerate_raw(genus: u32, n: u32, with_loops: bool) -> Vec<StableGraph> {
    let marks: BTreeSet<u32> = (1..=n).collect();
    let smooth = StableGraph::smooth(genus, &marks);
    let mut seen: HashSet<StableGraph> = HashSet::new();
    let mut queue = vec![smooth.canonicalize().graph];
    seen.insert(queue[0].clone());
    let mut idx = 0;
    while idx < queue.len() {
        let cur = queue[idx].clone();
        idx += 1;
        for v in 0..cur.n_vertices() {
            for next in splits_of(&cur, v) {
                let c = next.canonicalize().graph;
                if seen.insert(c.clone()) {
                    queue.push(c);
                }
            }
            if with_loops && cur.genus[v] >= 1 {
                let mut next = cur.clone();
                next.genus[v] -= 1;
                next.edges.push((v, v));
                normalize_raw(&mut next);
                let c = next.canonicalize().graph;
                if seen.insert(c.clone()) {
                    queue.push(c);
                }
            }
        }
    }
    queue
}

static ENUM_CACHE: OnceLock<Mutex<HashMap<(u32, u32, bool), Vec<StableGraph>>>> =
    OnceLock::new();

static CANON_CACHE: OnceLock<Mutex<HashMap<StableGraph, std::sync::Arc<Canon>>>> =
    OnceLock::new();

/// Cached canonicalization; the hot paths re-canonicalize the same raw
/// graphs constantly.
pub fn canonical_cached(graph: &StableGraph) -> std::sync::Arc<Canon> {
    let cache = CANON_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    {
        let guard = cache.lock().unwrap();
        if let Some(c) = guard.get(graph) {
            return c.clone();
        }
    }
    let canon = std::sync::Arc::new(graph.canonicalize());
    cache
        .lock()
        .unwrap()
        .insert(graph.clone(), canon.clone());
    canon
}

/// All canonical stable graphs of the given genus and markings, under a
/// structural filter. Results are cached per (genus, n).
pub fn enumerate_stable_graphs(
    genus: u32,
    marks: &BTreeSet<u32>,
    filter: GraphFilter,
) -> Vec<StableGraph> {
    let n = marks.len() as u32;
    assert!(
        3 * genus as i64 - 3 + n as i64 >= 0,
        "unstable moduli target (g={}, n={})",
        genus,
        n
    );
    let with_loops = matches!(filter, GraphFilter::All | GraphFilter::Extended);
    let cache = ENUM_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let base = {
        let mut guard = cache.lock().unwrap();
        guard
            .entry((genus, n, with_loops))
            .or_insert_with(|| enumerate_raw(genus, n, with_loops))
            .clone()
    };
    let std_marks: Vec<u32> = (1..=n).collect();
    let map: BTreeMap<u32, u32> = std_marks
        .iter()
        .zip(marks.iter())
        .map(|(&a, &b)| (a, b))
        .collect();
    base.into_iter()
        .filter(|g| g.matches_filter(filter))
        .map(|g| g.relabel_legs(&map).canonicalize().graph)
        .collect()
}

// ---------------------------------------------------------------------------
// Rooted rational trees. The root leg is marking 0 throughout.

pub const ROOT_MARK: u32 = 0;

/// All stable trees on the given markings, each exactly once: a labelled
/// stable tree has no automorphisms, so adding the next leg at every vertex,
/// edge midpoint, and leg midpoint never produces duplicates.
pub fn enumerate_stable_trees(marks: &BTreeSet<u32>) -> Vec<StableGraph> {
    let labels: Vec<u32> = marks.iter().copied().collect();
    assert!(labels.len() >= 3, "need at least three markings");
    let mut trees = vec![StableGraph {
        genus: vec![0],
        legs: labels[..3].iter().map(|&m| (m, 0)).collect(),
        edges: Vec::new(),
    }];
    for &m in &labels[3..] {
        let mut next = Vec::new();
        for t in &trees {
            // at a vertex
            for v in 0..t.n_vertices() {
                let mut g = t.clone();
                g.legs.push((m, v));
                g.legs.sort();
                next.push(g);
            }
            // at an edge midpoint: subdivide and hang the new leg there
            for (i, &(a, b)) in t.edges.iter().enumerate() {
                let mut g = t.clone();
                let u = g.n_vertices();
                g.genus.push(0);
                g.edges[i] = (a.min(u), a.max(u));
                g.edges.push((b.min(u), b.max(u)));
                g.legs.push((m, u));
                let _ = i;
                normalize_raw(&mut g);
                next.push(g);
            }
            // at a leg midpoint: pull the leg out to a new trivalent vertex
            for j in 0..t.legs.len() {
                let (mk, v) = t.legs[j];
                let mut g = t.clone();
                let u = g.n_vertices();
                g.genus.push(0);
                g.legs[j] = (mk, u);
                g.legs.push((m, u));
                g.edges.push((v, u));
                normalize_raw(&mut g);
                next.push(g);
            }
        }
        trees = next;
    }
    trees
}

/// Stable rooted trees with legs {1..n} plus the root leg. The output is
/// duplicate-free but not canonically ordered.
pub fn rooted_trees(n: u32) -> Vec<StableGraph> {
    let mut marks: BTreeSet<u32> = (1..=n).collect();
    marks.insert(ROOT_MARK);
    enumerate_stable_trees(&marks)
}

/// Whether leg `n` sits on a non-root external trivalent vertex (the image
/// of an attach-to-leaf move).
fn leg_on_external_trivalent(t: &StableGraph, n: u32) -> bool {
    let v = t.leg_vertex(n).expect("leg missing");
    if t.valence(v) != 3 {
        return false;
    }
    let flags = t.vertex_flags(v);
    let legs: Vec<u32> = flags
        .iter()
        .filter_map(|f| match f {
            Flag::Leg(m) => Some(*m),
            _ => None,
        })
        .collect();
    let halves = flags.len() - legs.len();
    halves == 1 && legs.len() == 2 && !legs.contains(&ROOT_MARK)
}

/// Trees where the distinguished leg is not on a non-root external trivalent
/// vertex.
pub fn rooted_trees_ne(n: u32) -> Vec<StableGraph> {
    rooted_trees(n)
        .into_iter()
        .filter(|t| !leg_on_external_trivalent(t, n))
        .collect()
}

/// Attaches leg `new` to an internal point of leg `i`: replaces leg `i` by an
/// edge to a fresh trivalent vertex carrying legs `i` and `new`.
pub fn attach_to_leg(t: &StableGraph, i: u32, new: u32) -> StableGraph {
    let v = t.leg_vertex(i).expect("leg missing");
    let mut g = t.clone();
    let new_v = g.n_vertices();
    g.genus.push(0);
    for leg in g.legs.iter_mut() {
        if leg.0 == i {
            leg.1 = new_v;
        }
    }
    g.legs.push((new, new_v));
    g.edges.push((v, new_v));
    normalize_raw(&mut g);
    g.canonicalize().graph
}

/// Forgets a leg and stabilizes (contracts a resulting 2-valent rational
/// vertex).
pub fn forget_leg_stabilize(t: &StableGraph, m: u32) -> StableGraph {
    let v = t.leg_vertex(m).expect("leg missing");
    let mut g = t.clone();
    g.legs.retain(|&(mk, _)| mk != m);
    if g.genus[v] == 0 && g.valence(v) == 2 {
        let flags = g.vertex_flags(v);
        match (flags[0], flags[1]) {
            (Flag::Half(e1, _), Flag::Half(e2, _)) if e1 != e2 => {
                let other1 = g.flag_vertex(g.other_half(flags[0]));
                let other2 = g.flag_vertex(g.other_half(flags[1]));
                let mut edges = g.edges.clone();
                let keep: Vec<(usize, usize)> = edges
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != e1 && i != e2)
                    .map(|(_, &e)| e)
                    .collect();
                edges = keep;
                edges.push((other1.min(other2), other1.max(other2)));
                // remove vertex v, shift ids
                let shift = |x: usize| if x > v { x - 1 } else { x };
                let genus: Vec<u32> = g
                    .genus
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != v)
                    .map(|(_, &gg)| gg)
                    .collect();
                let legs: Vec<(u32, VertexId)> =
                    g.legs.iter().map(|&(mk, w)| (mk, shift(w))).collect();
                let edges: Vec<(usize, usize)> =
                    edges.iter().map(|&(a, b)| (shift(a), shift(b))).collect();
                let mut out = StableGraph {
                    genus,
                    legs,
                    edges,
                };
                normalize_raw(&mut out);
                return out.canonicalize().graph;
            }
            (Flag::Leg(mk), Flag::Half(_, _)) | (Flag::Half(_, _), Flag::Leg(mk)) => {
                // Move the leg onto the neighbour across the edge.
                let half = flags
                    .iter()
                    .find(|f| matches!(f, Flag::Half(_, _)))
                    .copied()
                    .unwrap();
                let Flag::Half(e, _) = half else { unreachable!() };
                let w = g.flag_vertex(g.other_half(half));
                let shift = |x: usize| if x > v { x - 1 } else { x };
                let genus: Vec<u32> = g
                    .genus
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != v)
                    .map(|(_, &gg)| gg)
                    .collect();
                let mut legs: Vec<(u32, VertexId)> = g
                    .legs
                    .iter()
                    .map(|&(mm, x)| if mm == mk { (mm, shift(w)) } else { (mm, shift(x)) })
                    .collect();
                legs.sort();
                let edges: Vec<(usize, usize)> = g
                    .edges
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != e)
                    .map(|(_, &(a, b))| (shift(a), shift(b)))
                    .collect();
                let mut out = StableGraph {
                    genus,
                    legs,
                    edges,
                };
                normalize_raw(&mut out);
                return out.canonicalize().graph;
            }
            _ => {}
        }
    }
    g.canonicalize().graph
}

/// The tree family built recursively from small cases: at each stage the new
/// leg joins a vertex directly, either of the previous family member or of
/// the tree obtained by first pulling the previous leg out with another
/// non-root leg to a trivalent external vertex.
pub fn rooted_trees_b(n: u32) -> Vec<StableGraph> {
    assert!(n >= 3);
    if n == 3 {
        // attach leg 3 at the only vertex of the three-marking star
        return vec![StableGraph {
            genus: vec![0],
            legs: vec![(ROOT_MARK, 0), (1, 0), (2, 0), (3, 0)],
            edges: Vec::new(),
        }];
    }
    let prev = rooted_trees_b(n - 1);
    let mut sources: HashSet<StableGraph> =
        prev.iter().map(|t| t.canonicalize().graph).collect();
    for t in &prev {
        // the previous leg never sits on a trivalent vertex here, so
        // forgetting it needs no stabilization
        let v = t.leg_vertex(n - 1).expect("leg missing");
        assert!(t.valence(v) > 3, "unexpected trivalent attachment");
        for i in 1..=(n - 2) {
            let dropped = forget_leg_stabilize(t, n - 1);
            sources.insert(attach_to_leg(&dropped, i, n - 1));
        }
    }
    let mut out: HashSet<StableGraph> = HashSet::new();
    for t in &sources {
        for v in 0..t.n_vertices() {
            let mut g = t.clone();
            g.legs.push((n, v));
            g.legs.sort();
            out.insert(g.canonicalize().graph);
        }
    }
    let mut v: Vec<StableGraph> = out.into_iter().collect();
    v.sort();
    v
}

/// The flag of `v` directed toward the root vertex (the root vertex maps to
/// its root leg).
pub fn root_flag(t: &StableGraph, v: VertexId) -> Flag {
    let root_v = t.leg_vertex(ROOT_MARK).expect("no root leg");
    if v == root_v {
        return Flag::Leg(ROOT_MARK);
    }
    for (i, &(a, b)) in t.edges.iter().enumerate() {
        for (s, x, y) in [(0u8, a, b), (1u8, b, a)] {
            if x == v {
                // the half at v pointing toward the root: the other side
                // contains the root
                let side = t.side_of(y, i);
                if side.contains(&root_v) {
                    return Flag::Half(i, s);
                }
            }
        }
    }
    panic!("root not reachable");
}

/// Expands a partially labelled template: legs with markings >= FREE_BASE are
/// slots; the given markings are assigned in all ways, duplicates removed
/// after canonicalization. Returns empty when the counts cannot match.
pub const FREE_BASE: u32 = 900;

pub fn expand_partial_labels(template: &StableGraph, marks: &[u32]) -> Vec<StableGraph> {
    let free: Vec<u32> = template
        .legs
        .iter()
        .map(|&(m, _)| m)
        .filter(|&m| m >= FREE_BASE)
        .collect();
    if free.len() != marks.len() {
        return Vec::new();
    }
    let mut out: HashSet<StableGraph> = HashSet::new();
    for perm in permutations(marks) {
        let map: BTreeMap<u32, u32> = free.iter().copied().zip(perm).collect();
        out.insert(template.relabel_legs(&map).canonicalize().graph);
    }
    let mut v: Vec<StableGraph> = out.into_iter().collect();
    v.sort();
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn marks(n: u32) -> BTreeSet<u32> {
        (1..=n).collect()
    }

    #[test]
    fn canonical_aut_counts() {
        // two genus-1 vertices, one edge
        let g = StableGraph {
            genus: vec![1, 1],
            legs: vec![],
            edges: vec![(0, 1)],
        };
        assert_eq!(g.canonicalize().aut_count, 2);

        // theta: two genus-0 vertices joined by 3 edges
        let theta = StableGraph {
            genus: vec![0, 0],
            legs: vec![],
            edges: vec![(0, 1), (0, 1), (0, 1)],
        };
        assert_eq!(theta.canonicalize().aut_count, 12);

        // single genus-2 vertex with one leg
        let sm = StableGraph::smooth(2, &marks(1));
        assert_eq!(sm.canonicalize().aut_count, 1);

        // loop on a genus-0 vertex with a leg: the half-edge swap
        let lp = StableGraph {
            genus: vec![0],
            legs: vec![(1, 0)],
            edges: vec![(0, 0)],
        };
        assert_eq!(lp.canonicalize().aut_count, 2);
    }

    #[test]
    fn canonical_is_isomorphism_invariant() {
        let g = StableGraph {
            genus: vec![0, 1, 1],
            legs: vec![(1, 0), (2, 0)],
            edges: vec![(0, 1), (0, 2)],
        };
        let h = StableGraph {
            genus: vec![1, 1, 0],
            legs: vec![(1, 2), (2, 2)],
            edges: vec![(0, 2), (1, 2)],
        };
        assert_eq!(g.canonicalize().graph, h.canonicalize().graph);
        let c = g.canonicalize();
        assert_eq!(c.graph.canonicalize().graph, c.graph);
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(
            enumerate_stable_graphs(0, &marks(4), GraphFilter::All).len(),
            4
        );
        assert_eq!(
            enumerate_stable_graphs(0, &marks(5), GraphFilter::All).len(),
            26
        );
        assert_eq!(
            enumerate_stable_graphs(2, &marks(0), GraphFilter::All).len(),
            7
        );
    }

    #[test]
    fn filters_nest() {
        for n in 0..=2 {
            let all = enumerate_stable_graphs(2, &marks(n), GraphFilter::All);
            let ct = enumerate_stable_graphs(2, &marks(n), GraphFilter::CompactType);
            let rt = enumerate_stable_graphs(2, &marks(n), GraphFilter::RationalTails);
            let ext = enumerate_stable_graphs(2, &marks(n), GraphFilter::Extended);
            let all_set: HashSet<_> = all.iter().cloned().collect();
            let ct_set: HashSet<_> = ct.iter().cloned().collect();
            let ext_set: HashSet<_> = ext.iter().cloned().collect();
            assert!(rt.iter().all(|g| ct_set.contains(g)));
            assert!(ct.iter().all(|g| all_set.contains(g)));
            assert!(ct.iter().all(|g| ext_set.contains(g)));
            for g in &all {
                assert_eq!(g.total_genus(), 2);
                assert!(g.is_stable());
            }
        }
    }

    #[test]
    fn edge_classification() {
        let g = StableGraph {
            genus: vec![1, 1],
            legs: vec![],
            edges: vec![(0, 1)],
        };
        assert_eq!(g.classify_edges().unwrap(), vec![EdgeClass::GenusOnePair]);

        let g2 = StableGraph {
            genus: vec![2, 0],
            legs: vec![(1, 1), (2, 1)],
            edges: vec![(0, 1)],
        };
        match g2.classify_edges().unwrap()[0] {
            EdgeClass::RationalTail { toward_g2, outward } => {
                assert_eq!(g2.flag_vertex(toward_g2), 1);
                assert_eq!(g2.flag_vertex(outward), 0);
            }
            _ => panic!("expected a rational-tail edge"),
        }

        // genus-1 vertex doubly connected to a rational vertex with legs
        let banana = StableGraph {
            genus: vec![1, 0],
            legs: vec![(1, 1), (2, 1)],
            edges: vec![(0, 1), (0, 1)],
        };
        assert_eq!(
            banana.classify_edges().unwrap(),
            vec![EdgeClass::NonDisconnecting, EdgeClass::NonDisconnecting]
        );
        assert!(banana.in_extended_set());
    }

    #[test]
    fn seven_excluded_graphs() {
        // The seven graphs ruled out by conditions i-iv.
        let g1 = StableGraph {
            genus: vec![1],
            legs: vec![(1, 0)],
            edges: vec![(0, 0)],
        };
        let g2 = StableGraph {
            genus: vec![0, 0],
            legs: vec![(3, 0), (1, 1), (2, 1)],
            edges: vec![(0, 1), (0, 1), (0, 1)],
        };
        let g3 = StableGraph {
            genus: vec![0, 1],
            legs: vec![(2, 0), (1, 1)],
            edges: vec![(0, 1), (0, 1)],
        };
        let g4 = StableGraph {
            genus: vec![1, 0, 0],
            legs: vec![(2, 1), (1, 1), (3, 2)],
            edges: vec![(0, 1), (0, 2), (1, 2)],
        };
        let g5 = StableGraph {
            genus: vec![0, 0, 1],
            legs: vec![(1, 0), (2, 0), (3, 2)],
            edges: vec![(0, 1), (1, 2), (1, 2)],
        };
        let g6 = StableGraph {
            genus: vec![0, 0, 0, 1],
            legs: vec![(1, 0), (2, 0), (3, 0), (4, 1)],
            edges: vec![(0, 1), (1, 2), (2, 3), (2, 3)],
        };
        let g7 = StableGraph {
            genus: vec![0, 0, 0, 1],
            legs: vec![(2, 0), (1, 0), (4, 2), (3, 2)],
            edges: vec![(0, 1), (1, 2), (1, 3), (1, 3)],
        };
        for (i, g) in [g1, g2, g3, g4, g5, g6, g7].iter().enumerate() {
            assert_eq!(g.total_genus(), 2, "graph {}", i + 1);
            assert!(g.is_stable(), "graph {}", i + 1);
            assert!(!g.in_extended_set(), "graph {} should be excluded", i + 1);
        }
    }

    #[test]
    fn extended_contains_compact_type() {
        for n in 0..=3u32 {
            for g in enumerate_stable_graphs(2, &marks(n), GraphFilter::CompactType) {
                assert!(g.in_extended_set());
            }
        }
    }

    #[test]
    fn core_and_outward_flags() {
        // genus-2 core with a hub and two leg-carrying branches:
        // core(2) -- hub -- {A(1,2), B(3,4)}
        let g = StableGraph {
            genus: vec![2, 0, 0, 0],
            legs: vec![(1, 2), (2, 2), (3, 3), (4, 3)],
            edges: vec![(0, 1), (1, 2), (1, 3)],
        };
        let (core, outward, w) = g.core_and_outward();
        assert_eq!(core, [0usize].into_iter().collect());
        assert_eq!(outward.len(), 7);
        let attach = Flag::Half(0, 1); // hub side of the attaching edge
        for f in &outward {
            assert_eq!(w[f], attach);
        }

        let sm = StableGraph::smooth(2, &marks(1));
        let (core, outward, _) = sm.core_and_outward();
        assert_eq!(core.len(), 1);
        assert!(outward.is_empty());

        let tail = StableGraph {
            genus: vec![2, 0],
            legs: vec![(1, 1), (2, 1)],
            edges: vec![(0, 1)],
        };
        let (_, outward, w) = tail.core_and_outward();
        // the two legs plus the attaching half at the rational vertex,
        // all sent by w to that attaching half
        assert_eq!(
            outward,
            vec![Flag::Leg(1), Flag::Leg(2), Flag::Half(0, 1)]
        );
        for f in &outward {
            assert_eq!(w[f], Flag::Half(0, 1));
        }
    }

    #[test]
    fn rooted_tree_families() {
        // legs {1,2,3,r}
        assert_eq!(rooted_trees(3).len(), 4);
        assert_eq!(rooted_trees_ne(3).len(), 2);
        // the base of the recursive family: the new leg joins the star
        assert_eq!(rooted_trees_b(3).len(), 1);
        assert_eq!(rooted_trees_b(4).len(), 5);
        // h(root vertex) = root leg
        for t in rooted_trees(3) {
            let rv = t.leg_vertex(ROOT_MARK).unwrap();
            assert_eq!(root_flag(&t, rv), Flag::Leg(ROOT_MARK));
        }
    }

    #[test]
    fn sigma_images_partition() {
        // G_{0,n+1} = G^{ne} + disjoint images of the attach maps.
        for n in [3u32, 4, 5] {
            let all = rooted_trees(n);
            let ne = rooted_trees_ne(n);
            let prev = rooted_trees(n - 1);
            let mut images: HashSet<StableGraph> = HashSet::new();
            let mut total = 0;
            for i in 1..n {
                for t in &prev {
                    // relabel: prev trees have legs {1..n-1, r}; attach leg n at i
                    let img = attach_to_leg(t, i, n);
                    assert!(images.insert(img), "images must be disjoint");
                    total += 1;
                }
            }
            assert_eq!(all.len(), ne.len() + total);
            for t in &ne {
                assert!(!images.contains(&t.canonicalize().graph));
            }
        }
    }

    #[test]
    fn expand_partial_label_counts() {
        // square of 4 vertices including a genus-1 vertex, leg 4 fixed,
        // 3 free slots
        let template = StableGraph {
            genus: vec![1, 0, 0, 0],
            legs: vec![
                (FREE_BASE, 1),
                (4, 2),
                (FREE_BASE + 1, 2),
                (FREE_BASE + 2, 3),
            ],
            edges: vec![(0, 1), (1, 2), (2, 3), (0, 3)],
        };
        let out = expand_partial_labels(&template, &[1, 2, 3]);
        assert_eq!(out.len(), 3);

        let fixed = StableGraph::smooth(2, &marks(2));
        assert_eq!(expand_partial_labels(&fixed, &[]).len(), 1);
        assert!(expand_partial_labels(&fixed, &[9]).is_empty());
    }

    #[test]
    fn record_round_trip() {
        let g = StableGraph {
            genus: vec![1, 0],
            legs: vec![(1, 1), (2, 1)],
            edges: vec![(0, 1), (0, 1)],
        };
        let c = g.canonicalize();
        let line = c.graph.record(c.aut_count);
        let (back, aut) = StableGraph::parse_record(&line).unwrap();
        assert_eq!(back.canonicalize().graph, c.graph);
        assert_eq!(aut, 2);
    }
}
