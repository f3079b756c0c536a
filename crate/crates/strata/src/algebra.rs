//! The strata algebra: formal sums of boundary strata decorated with psi and
//! kappa classes, over exact rational coefficients. Products are computed by
//! enumerating generic common degenerations with the excess factor
//! -psi - psi' on shared edges; pullback and pushforward along forgetful maps
//! follow the standard comparison rules.

use crate::graphs::{
    canonical_cached, enumerate_stable_graphs, Flag, GraphFilter, StableGraph, VertexId,
};
use crate::rat::{binomial, rat_from_str, rat_i64, rat_to_string, Rat};
use num_traits::Zero;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Mutex, OnceLock};

/// Synthetic marking labels for half-edge flags on vertex moduli. The base
/// is raised above the graph's own leg labels so that nesting (classes on
/// vertex moduli whose marks are themselves half labels) stays injective.
pub const HALF_LABEL_BASE: u32 = 1 << 20;

pub fn half_label_base(graph: &StableGraph) -> u32 {
    let max_leg = graph.legs.iter().map(|&(m, _)| m).max().unwrap_or(0);
    HALF_LABEL_BASE.max(max_leg + 1)
}

/// Half-edge labels are positional within their vertex, so that isomorphic
/// local pictures on different graphs get identical vertex moduli (and hence
/// share every per-space cache).
pub fn flag_label(graph: &StableGraph, f: Flag) -> u32 {
    match f {
        Flag::Leg(m) => m,
        Flag::Half(_, _) => {
            let v = graph.flag_vertex(f);
            let pos = graph
                .vertex_flags(v)
                .iter()
                .position(|&x| x == f)
                .expect("flag not at its vertex") as u32;
            half_label_base(graph) + pos
        }
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Space {
    pub genus: u32,
    pub marks: BTreeSet<u32>,
}

impl Space {
    pub fn new(genus: u32, n: u32) -> Self {
        Space {
            genus,
            marks: (1..=n).collect(),
        }
    }

    pub fn with_marks(genus: u32, marks: BTreeSet<u32>) -> Self {
        Space { genus, marks }
    }

    pub fn n(&self) -> u32 {
        self.marks.len() as u32
    }

    pub fn dim(&self) -> i64 {
        3 * self.genus as i64 - 3 + self.marks.len() as i64
    }

    pub fn is_stable(&self) -> bool {
        2 * self.genus as i64 - 2 + self.marks.len() as i64 > 0
    }

    pub fn vertex_space(graph: &StableGraph, v: VertexId) -> Space {
        Space {
            genus: graph.genus[v],
            marks: graph
                .vertex_flags(v)
                .iter()
                .map(|&f| flag_label(graph, f))
                .collect(),
        }
    }

    pub fn vertex_dim(graph: &StableGraph, v: VertexId) -> i64 {
        3 * graph.genus[v] as i64 - 3 + graph.valence(v) as i64
    }
}

/// A monomial of psi powers on flags and kappa powers on vertices.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Decoration {
    pub psi: BTreeMap<Flag, u32>,
    /// (vertex, index a >= 1) -> exponent
    pub kappa: BTreeMap<(VertexId, u32), u32>,
}

impl Decoration {
    pub fn degree(&self) -> i64 {
        let p: u32 = self.psi.values().sum();
        let k: u32 = self.kappa.iter().map(|(&(_, a), &e)| a * e).sum();
        (p + k) as i64
    }

    pub fn degree_at(&self, graph: &StableGraph, v: VertexId) -> i64 {
        let p: u32 = self
            .psi
            .iter()
            .filter(|&(&f, _)| graph.flag_vertex(f) == v)
            .map(|(_, &e)| e)
            .sum();
        let k: u32 = self
            .kappa
            .iter()
            .filter(|&(&(w, _), _)| w == v)
            .map(|(&(_, a), &e)| a * e)
            .sum();
        (p + k) as i64
    }

    pub fn add_psi(&mut self, f: Flag, e: u32) {
        if e > 0 {
            *self.psi.entry(f).or_insert(0) += e;
        }
    }

    pub fn add_kappa(&mut self, v: VertexId, a: u32, e: u32) {
        if e > 0 && a > 0 {
            *self.kappa.entry((v, a)).or_insert(0) += e;
        }
    }

    /// Transports the decoration through a flag map and a vertex map.
    pub fn transport(&self, flags: &BTreeMap<Flag, Flag>, verts: &[usize]) -> Decoration {
        let mut out = Decoration::default();
        for (&f, &e) in &self.psi {
            out.add_psi(flags[&f], e);
        }
        for (&(v, a), &e) in &self.kappa {
            out.add_kappa(verts[v], a, e);
        }
        out
    }
}

/// One decorated stratum, stored canonically.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Term {
    pub graph: StableGraph,
    pub dec: Decoration,
}

impl Term {
    pub fn degree(&self) -> i64 {
        self.graph.edges.len() as i64 + self.dec.degree()
    }

    /// Canonical representative of (graph, decoration) under isomorphism.
    pub fn canonical(graph: &StableGraph, dec: &Decoration) -> Term {
        let canon = canonical_cached(graph);
        let moved = dec.transport(&canon.flag_map, &canon.vertex_map);
        let best = canon
            .auts
            .iter()
            .zip(canon.auts_vertex.iter())
            .map(|(fm, vm)| moved.transport(fm, vm))
            .min()
            .unwrap_or(moved);
        Term {
            graph: canon.graph.clone(),
            dec: best,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TautClass {
    pub space: Space,
    pub terms: BTreeMap<Term, Rat>,
}

impl TautClass {
    pub fn zero(space: &Space) -> Self {
        TautClass {
            space: space.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn one(space: &Space) -> Self {
        let mut c = Self::zero(space);
        c.insert(
            &StableGraph::smooth(space.genus, &space.marks),
            Decoration::default(),
            rat_i64(1),
        );
        c
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Canonicalizes and accumulates one raw term, dropping anything past the
    /// ambient or a vertex dimension.
    pub fn insert(&mut self, graph: &StableGraph, dec: Decoration, coeff: Rat) {
        if coeff.is_zero() {
            return;
        }
        let deg = graph.edges.len() as i64 + dec.degree();
        if deg > self.space.dim() {
            return;
        }
        for v in 0..graph.n_vertices() {
            if dec.degree_at(graph, v) > Space::vertex_dim(graph, v) {
                return;
            }
        }
        let term = Term::canonical(graph, &dec);
        let entry = self.terms.entry(term).or_insert_with(Rat::zero);
        *entry += coeff;
        if entry.is_zero() {
            // avoid borrowing issues: recompute the key
            let term = Term::canonical(graph, &dec);
            self.terms.remove(&term);
        }
    }

    pub fn add_term_canonical(&mut self, term: Term, coeff: Rat) {
        if coeff.is_zero() {
            return;
        }
        let entry = self.terms.entry(term.clone()).or_insert_with(Rat::zero);
        *entry += coeff;
        if entry.is_zero() {
            self.terms.remove(&term);
        }
    }

    pub fn add(&self, other: &TautClass) -> TautClass {
        assert_eq!(self.space, other.space, "ambient mismatch");
        let mut out = self.clone();
        for (t, c) in &other.terms {
            out.add_term_canonical(t.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &TautClass) -> TautClass {
        self.add(&other.scale(&rat_i64(-1)))
    }

    pub fn scale(&self, s: &Rat) -> TautClass {
        if s.is_zero() {
            return TautClass::zero(&self.space);
        }
        TautClass {
            space: self.space.clone(),
            terms: self
                .terms
                .iter()
                .map(|(t, c)| (t.clone(), c * s))
                .collect(),
        }
    }

    pub fn degree_part(&self, d: i64) -> TautClass {
        TautClass {
            space: self.space.clone(),
            terms: self
                .terms
                .iter()
                .filter(|(t, _)| t.degree() == d)
                .map(|(t, c)| (t.clone(), c.clone()))
                .collect(),
        }
    }

    /// Drops every term whose graph has a cycle (those vanish on compact
    /// type).
    pub fn restrict_compact_type(&self) -> TautClass {
        TautClass {
            space: self.space.clone(),
            terms: self
                .terms
                .iter()
                .filter(|(t, _)| t.graph.h1() == 0)
                .map(|(t, c)| (t.clone(), c.clone()))
                .collect(),
        }
    }

    pub fn max_degree(&self) -> i64 {
        self.terms.keys().map(|t| t.degree()).max().unwrap_or(0)
    }

    pub fn is_pure_degree(&self, d: i64) -> bool {
        self.terms.keys().all(|t| t.degree() == d)
    }

    /// Renames markings; `map` must be injective on the present marks.
    pub fn relabel(&self, map: &BTreeMap<u32, u32>) -> TautClass {
        let marks: BTreeSet<u32> = self
            .space
            .marks
            .iter()
            .map(|m| *map.get(m).unwrap_or(m))
            .collect();
        assert_eq!(marks.len(), self.space.marks.len());
        let space = Space::with_marks(self.space.genus, marks);
        let mut out = TautClass::zero(&space);
        for (t, c) in &self.terms {
            let g = t.graph.relabel_legs(map);
            let mut flags = BTreeMap::new();
            for f in t.graph.all_flags() {
                let nf = match f {
                    Flag::Leg(m) => Flag::Leg(*map.get(&m).unwrap_or(&m)),
                    h => h,
                };
                flags.insert(f, nf);
            }
            let verts: Vec<usize> = (0..t.graph.n_vertices()).collect();
            out.insert(&g, t.dec.transport(&flags, &verts), c.clone());
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Assembly of block graphs: a skeleton whose vertices are replaced by inner
// graphs, used by both the product and the graph-formula constructors.

pub struct Assembly {
    pub graph: StableGraph,
    /// skeleton edge i -> assembled edge index (identical, by construction)
    pub skeleton_flag: BTreeMap<Flag, Flag>,
    /// per skeleton vertex: flag map from its inner graph into the assembly
    pub part_flags: Vec<BTreeMap<Flag, Flag>>,
    /// per skeleton vertex: vertex map from its inner graph into the assembly
    pub part_verts: Vec<Vec<usize>>,
}

/// Replaces each skeleton vertex by an inner graph whose leg labels are the
/// `flag_label`s of the skeleton flags at that vertex.
pub fn assemble(skeleton: &StableGraph, parts: &[&StableGraph]) -> Assembly {
    let nv = skeleton.n_vertices();
    assert_eq!(parts.len(), nv);
    let mut genus = Vec::new();
    let mut offsets = Vec::with_capacity(nv);
    for part in parts {
        offsets.push(genus.len());
        genus.extend_from_slice(&part.genus);
    }
    let mut legs: Vec<(u32, VertexId)> = Vec::new();
    let mut part_flags: Vec<BTreeMap<Flag, Flag>> = vec![BTreeMap::new(); nv];
    let mut part_verts: Vec<Vec<usize>> = Vec::with_capacity(nv);
    for (v, part) in parts.iter().enumerate() {
        part_verts.push((0..part.n_vertices()).map(|u| offsets[v] + u).collect());
    }
    // Where each skeleton flag lands: the inner vertex carrying its label.
    let mut skeleton_anchor: BTreeMap<Flag, VertexId> = BTreeMap::new();
    for v in 0..nv {
        for f in skeleton.vertex_flags(v) {
            let label = flag_label(skeleton, f);
            let inner = parts[v]
                .leg_vertex(label)
                .expect("inner graph must carry the skeleton flag label");
            skeleton_anchor.insert(f, offsets[v] + inner);
        }
    }
    // Skeleton legs become assembly legs at their anchors.
    for &(m, v) in &skeleton.legs {
        legs.push((m, skeleton_anchor[&Flag::Leg(m)]));
        let _ = v;
    }
    // Skeleton edges come first so their indices are preserved.
    let mut edges: Vec<(VertexId, VertexId)> = Vec::new();
    let mut skeleton_flag = BTreeMap::new();
    for &(m, _) in &skeleton.legs {
        skeleton_flag.insert(Flag::Leg(m), Flag::Leg(m));
    }
    for (i, _) in skeleton.edges.iter().enumerate() {
        let a = skeleton_anchor[&Flag::Half(i, 0)];
        let b = skeleton_anchor[&Flag::Half(i, 1)];
        edges.push((a, b));
        skeleton_flag.insert(Flag::Half(i, 0), Flag::Half(i, 0));
        skeleton_flag.insert(Flag::Half(i, 1), Flag::Half(i, 1));
    }
    // Inner legs map to the skeleton flags they label (no assembly leg), and
    // inner edges are appended.
    for (v, part) in parts.iter().enumerate() {
        let mut label_to_flag: BTreeMap<u32, Flag> = BTreeMap::new();
        for f in skeleton.vertex_flags(v) {
            label_to_flag.insert(flag_label(skeleton, f), skeleton_flag[&f]);
        }
        for &(label, _) in &part.legs {
            part_flags[v].insert(Flag::Leg(label), label_to_flag[&label]);
        }
        for (j, &(a, b)) in part.edges.iter().enumerate() {
            let k = edges.len();
            edges.push((offsets[v] + a, offsets[v] + b));
            part_flags[v].insert(Flag::Half(j, 0), Flag::Half(k, 0));
            part_flags[v].insert(Flag::Half(j, 1), Flag::Half(k, 1));
        }
    }
    legs.sort();
    Assembly {
        graph: StableGraph {
            genus,
            legs,
            edges,
        },
        skeleton_flag,
        part_flags,
        part_verts,
    }
}

/// Pushforward along the gluing of a skeleton graph, with an arbitrary class
/// on each vertex moduli: expands the product of the vertex classes and
/// grafts each combination into the skeleton. Coefficient conventions are the
/// caller's (no 1/Aut here).
pub fn graft(space: &Space, skeleton: &StableGraph, parts: &[TautClass]) -> TautClass {
    let mut out = TautClass::zero(space);
    let nv = skeleton.n_vertices();
    assert_eq!(parts.len(), nv);
    // Cartesian product over the vertex classes' terms.
    let term_lists: Vec<Vec<(&Term, &Rat)>> = parts.iter().map(|p| p.terms.iter().collect()).collect();
    if term_lists.iter().any(|l| l.is_empty()) {
        return out;
    }
    let mut idx = vec![0usize; nv];
    loop {
        let chosen: Vec<(&Term, &Rat)> = (0..nv).map(|v| term_lists[v][idx[v]]).collect();
        let inner: Vec<&StableGraph> = chosen.iter().map(|(t, _)| &t.graph).collect();
        let asm = assemble(skeleton, &inner);
        let mut dec = Decoration::default();
        let mut coeff = rat_i64(1);
        for (v, (t, c)) in chosen.iter().enumerate() {
            coeff *= (*c).clone();
            for (&f, &e) in &t.dec.psi {
                dec.add_psi(asm.part_flags[v][&f], e);
            }
            for (&(u, a), &e) in &t.dec.kappa {
                dec.add_kappa(asm.part_verts[v][u], a, e);
            }
        }
        out.insert(&asm.graph, dec, coeff);
        // advance
        let mut k = 0;
        loop {
            if k == nv {
                return out;
            }
            idx[k] += 1;
            if idx[k] < term_lists[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// The class xi_{Gamma*}(monomial): a single-term pushforward with
/// coefficient one.
pub fn glue_pushforward(space: &Space, graph: &StableGraph, dec: Decoration) -> TautClass {
    for f in dec.psi.keys() {
        match f {
            Flag::Leg(m) => assert!(graph.leg_vertex(*m).is_some(), "decoration on missing leg"),
            Flag::Half(e, _) => assert!(*e < graph.edges.len(), "decoration on missing edge"),
        }
    }
    let mut out = TautClass::zero(space);
    out.insert(graph, dec, rat_i64(1));
    out
}

// ---------------------------------------------------------------------------
// Product via generic common degenerations.

static DEGEN_CACHE: OnceLock<Mutex<HashMap<(u32, Vec<u32>, usize), std::sync::Arc<Vec<(StableGraph, u64)>>>>> =
    OnceLock::new();

/// Degenerations of a single vertex moduli (genus, marks) with at most `cap`
/// edges, with automorphism counts (legs pinned).
fn vertex_degenerations(
    genus: u32,
    marks: &BTreeSet<u32>,
    cap: usize,
) -> std::sync::Arc<Vec<(StableGraph, u64)>> {
    let key = (genus, marks.iter().copied().collect::<Vec<u32>>(), cap);
    let cache = DEGEN_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    {
        let guard = cache.lock().unwrap();
        if let Some(v) = guard.get(&key) {
            return v.clone();
        }
    }
    let all = enumerate_stable_graphs(genus, marks, GraphFilter::All);
    let list: Vec<(StableGraph, u64)> = all
        .into_iter()
        .filter(|g| g.edges.len() <= cap)
        .map(|g| {
            let aut = canonical_cached(&g).aut_count;
            (g, aut)
        })
        .collect();
    let arc = std::sync::Arc::new(list);
    cache
        .lock()
        .unwrap()
        .insert(key, arc.clone());
    arc
}

/// One generic degeneration site of a decorated stratum: an assembly of
/// vertex degenerations together with a subset of skeleton edges contracted
/// away, and the canonical form of the contraction.
pub struct RefinementSite<'a> {
    pub gamma: &'a StableGraph,
    /// the first stratum's decoration transported onto gamma (kappa classes
    /// expanded over the degenerated vertices), with multiplicities
    pub alpha_terms: &'a [(Rat, Decoration)],
    /// 1/(product of inner automorphism counts)
    pub aut_factor: &'a Rat,
    /// skeleton edges not contracted: each carries an excess factor
    pub excess_edges: &'a [usize],
    pub k_canon: &'a crate::graphs::Canon,
    /// flags of gamma surviving the contraction, mapped into k_canon.graph
    pub gamma_to_k_flags: &'a BTreeMap<Flag, Flag>,
    pub gamma_to_k_verts: &'a [usize],
}

/// Enumerates every refinement site of `ta` whose contraction has at most
/// `budget` inner edges.
pub fn refinement_sites<F: FnMut(&RefinementSite)>(ta: &Term, budget: usize, mut visit: F) {
    let a = &ta.graph;
    let nv = a.n_vertices();
    let flags_per_vertex: Vec<Vec<Flag>> = (0..nv).map(|v| a.vertex_flags(v)).collect();
    let options: Vec<std::sync::Arc<Vec<(StableGraph, u64)>>> = (0..nv)
        .map(|v| {
            let marks: BTreeSet<u32> = flags_per_vertex[v]
                .iter()
                .map(|&f| flag_label(a, f))
                .collect();
            debug_assert_eq!(marks.len(), flags_per_vertex[v].len());
            vertex_degenerations(a.genus[v], &marks, budget)
        })
        .collect();
    let mut choice: Vec<usize> = vec![0; nv];
    visit_choices(ta, budget, &options, 0, 0, &mut choice, &mut visit);
}

fn visit_choices<F: FnMut(&RefinementSite)>(
    ta: &Term,
    budget: usize,
    options: &[std::sync::Arc<Vec<(StableGraph, u64)>>],
    v: usize,
    used: usize,
    choice: &mut Vec<usize>,
    visit: &mut F,
) {
    let nv = ta.graph.n_vertices();
    if v < nv {
        for (i, (g, _)) in options[v].iter().enumerate() {
            let e = g.edges.len();
            if used + e > budget {
                continue;
            }
            choice[v] = i;
            visit_choices(ta, budget, options, v + 1, used + e, choice, visit);
        }
        return;
    }
    let a = &ta.graph;
    let parts: Vec<&StableGraph> = (0..nv).map(|u| &options[u][choice[u]].0).collect();
    let mut aut_denom = rat_i64(1);
    for u in 0..nv {
        aut_denom *= rat_i64(options[u][choice[u]].1 as i64);
    }
    let aut_factor = rat_i64(1) / aut_denom;
    let asm = assemble(a, &parts);
    let gamma = &asm.graph;
    let n_skel = a.edges.len();

    // alpha transported onto gamma, kappa expanded over the inner vertices
    let mut alpha_terms: Vec<(Rat, Decoration)> = vec![(rat_i64(1), Decoration::default())];
    for (&f, &e) in &ta.dec.psi {
        let nf = asm.skeleton_flag[&f];
        for (_, d) in alpha_terms.iter_mut() {
            d.add_psi(nf, e);
        }
    }
    for (&(vv, aa), &m) in &ta.dec.kappa {
        let verts = &asm.part_verts[vv];
        alpha_terms = distribute_kappa(&alpha_terms, verts, aa, m);
    }

    for mask in 0u64..(1u64 << n_skel) {
        let sub: Vec<usize> = (0..n_skel).filter(|i| mask & (1 << i) != 0).collect();
        if gamma.edges.len() - sub.len() > budget {
            continue;
        }
        let (k, kflags, kverts) = gamma.contract_edges(&sub);
        let k_canon = canonical_cached(&k);
        let mut gamma_to_k_flags: BTreeMap<Flag, Flag> = BTreeMap::new();
        for f in gamma.all_flags() {
            if let Some(&kf) = kflags.get(&f) {
                gamma_to_k_flags.insert(f, k_canon.flag_map[&kf]);
            }
        }
        let gamma_to_k_verts: Vec<usize> =
            kverts.iter().map(|&u| k_canon.vertex_map[u]).collect();
        let excess_edges: Vec<usize> = (0..n_skel).filter(|i| mask & (1 << i) == 0).collect();
        visit(&RefinementSite {
            gamma,
            alpha_terms: &alpha_terms,
            aut_factor: &aut_factor,
            excess_edges: &excess_edges,
            k_canon: &k_canon,
            gamma_to_k_flags: &gamma_to_k_flags,
            gamma_to_k_verts: &gamma_to_k_verts,
        });
    }
}

/// Applies a second stratum at a site whose contraction matches its graph:
/// pulls the decoration back through every isomorphism, expands the excess
/// factors, and feeds raw contributions to the sink.
pub fn emit_at_site<F: FnMut(Rat, &StableGraph, &Decoration)>(
    site: &RefinementSite,
    tb: &Term,
    sink: &mut F,
) {
    debug_assert_eq!(site.k_canon.graph, tb.graph);
    let mut inv_vert_base: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (gv, &bv) in site.gamma_to_k_verts.iter().enumerate() {
        inv_vert_base.entry(bv).or_default().push(gv);
    }
    for (aut, aut_v) in site
        .k_canon
        .auts
        .iter()
        .zip(site.k_canon.auts_vertex.iter())
    {
        let mut beta_terms: Vec<(Rat, Decoration)> = vec![(rat_i64(1), Decoration::default())];
        let mut dead = false;
        // invert flag map lazily: for each decorated flag of b, find its
        // gamma preimage through this isomorphism
        for (&f, &e) in &tb.dec.psi {
            // the iso gamma -> b is aut(k_canon_flag(.)); we need its inverse
            let mut found = None;
            for (&gf, &bf) in site.gamma_to_k_flags.iter() {
                if aut[&bf] == f {
                    found = Some(gf);
                    break;
                }
            }
            match found {
                Some(gf) => {
                    for (_, d) in beta_terms.iter_mut() {
                        d.add_psi(gf, e);
                    }
                }
                None => {
                    dead = true;
                    break;
                }
            }
        }
        if dead {
            continue;
        }
        for (&(vv, aa), &m) in &tb.dec.kappa {
            // vertices of gamma over the aut-preimage of vv
            let pre = aut_v
                .iter()
                .position(|&x| x == vv)
                .expect("vertex not in automorphism image");
            let verts = &inv_vert_base[&pre];
            beta_terms = distribute_kappa(&beta_terms, verts, aa, m);
        }
        let sign = if site.excess_edges.len() % 2 == 1 {
            rat_i64(-1)
        } else {
            rat_i64(1)
        };
        let mut excess_terms: Vec<Decoration> = vec![Decoration::default()];
        for &e in site.excess_edges {
            let mut next = Vec::with_capacity(excess_terms.len() * 2);
            for d in &excess_terms {
                for side in [0u8, 1u8] {
                    let mut d2 = d.clone();
                    d2.add_psi(Flag::Half(e, side), 1);
                    next.push(d2);
                }
            }
            excess_terms = next;
        }
        for (ca, da) in site.alpha_terms {
            for (cb, db) in &beta_terms {
                for de in &excess_terms {
                    let mut dec = da.clone();
                    for (&f, &e) in &db.psi {
                        dec.add_psi(f, e);
                    }
                    for (&(vv, aa), &e) in &db.kappa {
                        dec.add_kappa(vv, aa, e);
                    }
                    for (&f, &e) in &de.psi {
                        dec.add_psi(f, e);
                    }
                    let coeff = ca * cb * &sign * site.aut_factor;
                    sink(coeff, site.gamma, &dec);
                }
            }
        }
    }
}

/// Enumerates the generic common degenerations of two decorated strata and
/// feeds each raw contribution (coefficient, graph, decoration) to `sink`.
/// The factor 1/|Aut| of the inner degenerations is included; the caller's
/// coefficients are not.
pub fn refine_pairs<F: FnMut(Rat, &StableGraph, &Decoration)>(ta: &Term, tb: &Term, mut sink: F) {
    refinement_sites(ta, tb.graph.edges.len(), |site| {
        if site.k_canon.graph == tb.graph {
            emit_at_site(site, tb, &mut sink);
        }
    });
}

/// Expands (sum of kappa_a over `verts`)^m into decorations with multinomial
/// coefficients.
fn distribute_kappa(
    base: &[(Rat, Decoration)],
    verts: &[usize],
    a: u32,
    m: u32,
) -> Vec<(Rat, Decoration)> {
    let mut out = Vec::new();
    let k = verts.len();
    // compositions of m into k parts
    fn compositions(m: u32, k: usize) -> Vec<Vec<u32>> {
        if k == 1 {
            return vec![vec![m]];
        }
        let mut out = Vec::new();
        for first in 0..=m {
            for mut rest in compositions(m - first, k - 1) {
                rest.insert(0, first);
                out.push(rest);
            }
        }
        out
    }
    for comp in compositions(m, k) {
        let mut multi = crate::rat::factorial(m);
        for &c in &comp {
            multi /= crate::rat::factorial(c);
        }
        for (bc, bd) in base {
            let mut d = bd.clone();
            for (i, &c) in comp.iter().enumerate() {
                d.add_kappa(verts[i], a, c);
            }
            out.push((bc * &multi, d));
        }
    }
    out
}

static PROD_TERM_CACHE: OnceLock<
    std::sync::RwLock<HashMap<(Term, Term), std::sync::Arc<Vec<(Rat, Term)>>>>,
> = OnceLock::new();

/// Product of two canonical strata as a normalized term list, memoized. The
/// ambient space is determined by the terms themselves.
pub fn multiply_terms(ta: &Term, tb: &Term, space: &Space) -> std::sync::Arc<Vec<(Rat, Term)>> {
    let key = if ta <= tb {
        (ta.clone(), tb.clone())
    } else {
        (tb.clone(), ta.clone())
    };
    let cache = PROD_TERM_CACHE.get_or_init(|| std::sync::RwLock::new(HashMap::new()));
    {
        let guard = cache.read().unwrap();
        if let Some(v) = guard.get(&key) {
            return v.clone();
        }
    }
    let mut acc = TautClass::zero(space);
    refine_pairs(&key.0, &key.1, |c, g, d| {
        acc.insert(g, d.clone(), c);
    });
    let list: Vec<(Rat, Term)> = acc
        .terms
        .into_iter()
        .map(|(t, c)| (c, t))
        .collect();
    let arc = std::sync::Arc::new(list);
    cache.write().unwrap().insert(key, arc.clone());
    arc
}

/// Excess-intersection product of two classes on the same ambient space.
pub fn multiply(a: &TautClass, b: &TautClass) -> TautClass {
    assert_eq!(a.space, b.space, "ambient mismatch");
    let dim = a.space.dim();
    let mut out = TautClass::zero(&a.space);
    for (ta, ca) in &a.terms {
        for (tb, cb) in &b.terms {
            if ta.degree() + tb.degree() > dim {
                continue;
            }
            let c0 = ca * cb;
            for (c, t) in multiply_terms(ta, tb, &a.space).iter() {
                out.add_term_canonical(t.clone(), c * &c0);
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Forgetful maps.

/// Pullback along the map forgetting the (new) marking `m`: distributes the
/// new leg over the vertices with the psi and kappa comparison corrections.
pub fn pullback_add(a: &TautClass, m: u32) -> TautClass {
    assert!(!a.space.marks.contains(&m), "marking already present");
    let mut marks = a.space.marks.clone();
    marks.insert(m);
    let space = Space::with_marks(a.space.genus, marks);
    let mut out = TautClass::zero(&space);
    for (t, c) in &a.terms {
        for v in 0..t.graph.n_vertices() {
            // kappa corrections at v: kappa_a -> kappa_a - psi_m^a
            let kappas_at: Vec<(u32, u32)> = t
                .dec
                .kappa
                .iter()
                .filter(|&(&(w, _), _)| w == v)
                .map(|(&(_, a), &e)| (a, e))
                .collect();
            let mut jvecs: Vec<(Rat, Vec<(u32, u32)>, u32)> =
                vec![(rat_i64(1), Vec::new(), 0)];
            for &(aa, mm) in &kappas_at {
                let mut next = Vec::new();
                for j in 0..=mm {
                    let cj = binomial(mm, j)
                        * if j % 2 == 1 { rat_i64(-1) } else { rat_i64(1) };
                    for (c0, red, psim) in &jvecs {
                        let mut red2 = red.clone();
                        red2.push((aa, mm - j));
                        next.push((c0 * &cj, red2, psim + aa * j));
                    }
                }
                jvecs = next;
            }
            // graph with the new leg at v
            let mut g_main = t.graph.clone();
            g_main.legs.push((m, v));
            g_main.legs.sort();
            for (cj, reduced, psim) in &jvecs {
                let mut dec = t.dec.clone();
                dec.kappa.retain(|&(w, _), _| w != v);
                for &(aa, e) in reduced {
                    dec.add_kappa(v, aa, e);
                }
                if *psim > 0 {
                    dec.add_psi(Flag::Leg(m), *psim);
                    out.insert(&g_main, dec, c * cj);
                } else {
                    // main term
                    out.insert(&g_main, dec.clone(), c * cj);
                    // bubble corrections, one per decorated flag at v
                    for f in t.graph.vertex_flags(v) {
                        let k = *t.dec.psi.get(&f).unwrap_or(&0);
                        if k == 0 {
                            continue;
                        }
                        let (g_bub, moved, new_half_at_v) = bubble_off(&t.graph, v, f, m);
                        let mut dec2 = Decoration::default();
                        for (&pf, &pe) in &dec.psi {
                            if pf == f {
                                continue;
                            }
                            dec2.add_psi(moved[&pf], pe);
                        }
                        dec2.add_psi(new_half_at_v, k - 1);
                        for (&(w, aa), &e) in &dec.kappa {
                            dec2.add_kappa(w, aa, e);
                        }
                        out.insert(&g_bub, dec2, -(c * cj));
                    }
                }
            }
        }
    }
    out
}

/// Splits flag `f` at vertex `v` off onto a new rational bubble carrying the
/// new marking. Returns (graph, flag map for old flags, the new half at v).
fn bubble_off(
    graph: &StableGraph,
    v: VertexId,
    f: Flag,
    m: u32,
) -> (StableGraph, BTreeMap<Flag, Flag>, Flag) {
    let mut g = graph.clone();
    let u = g.n_vertices();
    g.genus.push(0);
    let mut moved: BTreeMap<Flag, Flag> = BTreeMap::new();
    for fl in graph.all_flags() {
        moved.insert(fl, fl);
    }
    match f {
        Flag::Leg(mk) => {
            for leg in g.legs.iter_mut() {
                if leg.0 == mk {
                    leg.1 = u;
                }
            }
        }
        Flag::Half(e, s) => {
            if s == 0 {
                g.edges[e].0 = u;
            } else {
                g.edges[e].1 = u;
            }
        }
    }
    g.legs.push((m, u));
    g.legs.sort();
    let new_edge = g.edges.len();
    g.edges.push((v, u));
    let _ = &moved;
    (g, moved, Flag::Half(new_edge, 0))
}

/// Pushforward along the map forgetting the marking `m` (integration along
/// the fiber; degree drops by one).
pub fn pushforward_forget(a: &TautClass, m: u32) -> TautClass {
    assert!(a.space.marks.contains(&m), "marking not present");
    let mut marks = a.space.marks.clone();
    marks.remove(&m);
    let space = Space::with_marks(a.space.genus, marks);
    assert!(
        space.is_stable() && space.dim() >= 0,
        "pushforward target is unstable"
    );
    let mut out = TautClass::zero(&space);
    for (t, c) in &a.terms {
        let v = t.graph.leg_vertex(m).expect("leg missing");
        let g_v = t.graph.genus[v];
        let val = t.graph.valence(v);
        if g_v == 0 && val == 3 {
            // the vertex collapses; any decoration on it kills the term
            if t.dec.degree_at(&t.graph, v) > 0 {
                continue;
            }
            push_collapse(&mut out, t, c, v, m);
            continue;
        }
        // stable vertex: expand kappa factors and integrate psi_m out
        let a0 = *t.dec.psi.get(&Flag::Leg(m)).unwrap_or(&0);
        let kappas_at: Vec<(u32, u32)> = t
            .dec
            .kappa
            .iter()
            .filter(|&(&(w, _), _)| w == v)
            .map(|(&(_, aa), &e)| (aa, e))
            .collect();
        let mut jvecs: Vec<(Rat, Vec<(u32, u32)>, u32)> = vec![(rat_i64(1), Vec::new(), 0)];
        for &(aa, mm) in &kappas_at {
            let mut next = Vec::new();
            for j in 0..=mm {
                let cj = binomial(mm, j);
                for (c0, red, psim) in &jvecs {
                    let mut red2 = red.clone();
                    red2.push((aa, mm - j));
                    next.push((c0 * &cj, red2, psim + aa * j));
                }
            }
            jvecs = next;
        }
        let mut g_red = t.graph.clone();
        g_red.legs.retain(|&(mk, _)| mk != m);
        for (cj, reduced, psim) in &jvecs {
            let total = a0 + psim;
            let mut dec = t.dec.clone();
            dec.psi.remove(&Flag::Leg(m));
            dec.kappa.retain(|&(w, _), _| w != v);
            for &(aa, e) in reduced {
                dec.add_kappa(v, aa, e);
            }
            if total >= 1 {
                if total == 1 {
                    // kappa_0 is the scalar 2g - 2 + (valence - 1)
                    let k0 = 2 * g_v as i64 - 2 + (val as i64 - 1);
                    out.insert(&g_red, dec, c * cj * rat_i64(k0));
                } else {
                    dec.add_kappa(v, total - 1, 1);
                    out.insert(&g_red, dec, c * cj);
                }
            } else {
                // string reduction over the remaining decorated flags at v
                for f in t.graph.vertex_flags(v) {
                    if f == Flag::Leg(m) {
                        continue;
                    }
                    let k = *dec.psi.get(&f).unwrap_or(&0);
                    if k == 0 {
                        continue;
                    }
                    let mut dec2 = dec.clone();
                    if k == 1 {
                        dec2.psi.remove(&f);
                    } else {
                        dec2.psi.insert(f, k - 1);
                    }
                    out.insert(&g_red, dec2, c * cj);
                }
            }
        }
    }
    out
}

/// Collapse of an unstable rational vertex after forgetting `m`: the two
/// remaining flags are identified.
fn push_collapse(out: &mut TautClass, t: &Term, c: &Rat, v: VertexId, m: u32) {
    let flags: Vec<Flag> = t
        .graph
        .vertex_flags(v)
        .into_iter()
        .filter(|&f| f != Flag::Leg(m))
        .collect();
    assert_eq!(flags.len(), 2);
    let shift = |x: usize| if x > v { x - 1 } else { x };
    let genus: Vec<u32> = t
        .graph
        .genus
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != v)
        .map(|(_, &g)| g)
        .collect();
    match (flags[0], flags[1]) {
        (Flag::Leg(l), Flag::Half(e, s)) | (Flag::Half(e, s), Flag::Leg(l)) => {
            // the leg moves onto the partner flag's position
            let partner = t.graph.other_half(Flag::Half(e, s));
            let w = t.graph.flag_vertex(partner);
            let mut legs: Vec<(u32, VertexId)> = t
                .graph
                .legs
                .iter()
                .filter(|&&(mk, _)| mk != m)
                .map(|&(mk, x)| if mk == l { (mk, shift(w)) } else { (mk, shift(x)) })
                .collect();
            legs.sort();
            let mut flag_map: BTreeMap<Flag, Flag> = BTreeMap::new();
            let mut edges = Vec::new();
            for (i, &(x, y)) in t.graph.edges.iter().enumerate() {
                if i == e {
                    continue;
                }
                let k = edges.len();
                edges.push((shift(x), shift(y)));
                flag_map.insert(Flag::Half(i, 0), Flag::Half(k, 0));
                flag_map.insert(Flag::Half(i, 1), Flag::Half(k, 1));
            }
            // the partner's psi becomes psi at the moved leg
            flag_map.insert(partner, Flag::Leg(l));
            for fl in t.graph.legs.iter().map(|&(mk, _)| Flag::Leg(mk)) {
                flag_map.entry(fl).or_insert(fl);
            }
            let g = StableGraph {
                genus,
                legs,
                edges,
            };
            let mut dec = Decoration::default();
            for (&f, &e2) in &t.dec.psi {
                dec.add_psi(flag_map[&f], e2);
            }
            for (&(w2, aa), &e2) in &t.dec.kappa {
                dec.add_kappa(shift(w2), aa, e2);
            }
            out.insert(&g, dec, c.clone());
        }
        (Flag::Half(e1, s1), Flag::Half(e2, s2)) => {
            assert_ne!(e1, e2, "isolated vertex cannot be forgotten");
            let p1 = t.graph.other_half(Flag::Half(e1, s1));
            let p2 = t.graph.other_half(Flag::Half(e2, s2));
            let (w1, w2) = (t.graph.flag_vertex(p1), t.graph.flag_vertex(p2));
            let legs: Vec<(u32, VertexId)> = t
                .graph
                .legs
                .iter()
                .filter(|&&(mk, _)| mk != m)
                .map(|&(mk, x)| (mk, shift(x)))
                .collect();
            let mut flag_map: BTreeMap<Flag, Flag> = BTreeMap::new();
            for &(mk, _) in &t.graph.legs {
                flag_map.insert(Flag::Leg(mk), Flag::Leg(mk));
            }
            let mut edges = Vec::new();
            for (i, &(x, y)) in t.graph.edges.iter().enumerate() {
                if i == e1 || i == e2 {
                    continue;
                }
                let k = edges.len();
                edges.push((shift(x), shift(y)));
                flag_map.insert(Flag::Half(i, 0), Flag::Half(k, 0));
                flag_map.insert(Flag::Half(i, 1), Flag::Half(k, 1));
            }
            // the merged edge joins the two partners
            let k = edges.len();
            edges.push((shift(w1), shift(w2)));
            flag_map.insert(p1, Flag::Half(k, 0));
            flag_map.insert(p2, Flag::Half(k, 1));
            let g = StableGraph {
                genus,
                legs,
                edges,
            };
            let mut dec = Decoration::default();
            for (&f, &e2) in &t.dec.psi {
                dec.add_psi(flag_map[&f], e2);
            }
            for (&(w0, aa), &e2) in &t.dec.kappa {
                dec.add_kappa(shift(w0), aa, e2);
            }
            out.insert(&g, dec, c.clone());
        }
        _ => panic!("two legs left on a collapsing vertex"),
    }
}

/// Pushforward along the i-th section: pullback then multiply by the
/// boundary divisor where the two points collide.
pub fn section_pushforward(a: &TautClass, i: u32, new_mark: u32) -> TautClass {
    assert!(a.space.marks.contains(&i), "section index out of range");
    let lifted = pullback_add(a, new_mark);
    let d = boundary_divisor_split(
        &lifted.space,
        0,
        &[i, new_mark].into_iter().collect::<BTreeSet<u32>>(),
    );
    multiply(&lifted, &d)
}

/// The one-edge boundary stratum with a genus-`side_genus` vertex carrying
/// `side_marks`, as a class with coefficient one.
pub fn boundary_divisor_split(space: &Space, side_genus: u32, side_marks: &BTreeSet<u32>) -> TautClass {
    let other: BTreeSet<u32> = space.marks.difference(side_marks).copied().collect();
    let mut legs: Vec<(u32, VertexId)> = side_marks.iter().map(|&m| (m, 0)).collect();
    legs.extend(other.iter().map(|&m| (m, 1)));
    legs.sort();
    let g = StableGraph {
        genus: vec![side_genus, space.genus - side_genus],
        legs,
        edges: vec![(0, 1)],
    };
    glue_pushforward(space, &g, Decoration::default())
}

// ---------------------------------------------------------------------------
// Standard classes.

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum StandardClass {
    Psi(u32),
    Omega(u32),
    Lambda,
    Delta1,
    DeltaIrr,
    DeltaTotal,
    DeltaNrt,
    Kappa(u32),
}

static STD_CACHE: OnceLock<Mutex<HashMap<(StandardClass, Space), TautClass>>> = OnceLock::new();

pub fn standard_class(space: &Space, which: StandardClass) -> TautClass {
    let cache = STD_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    {
        let guard = cache.lock().unwrap();
        if let Some(c) = guard.get(&(which.clone(), space.clone())) {
            return c.clone();
        }
    }
    let out = build_standard_class(space, &which);
    cache
        .lock()
        .unwrap()
        .insert((which, space.clone()), out.clone());
    out
}

fn build_standard_class(space: &Space, which: &StandardClass) -> TautClass {
    match which {
        StandardClass::Psi(i) => {
            assert!(space.marks.contains(i));
            let mut dec = Decoration::default();
            dec.add_psi(Flag::Leg(*i), 1);
            glue_pushforward(
                space,
                &StableGraph::smooth(space.genus, &space.marks),
                dec,
            )
        }
        StandardClass::Kappa(a) => {
            assert!(*a >= 1);
            let mut dec = Decoration::default();
            dec.add_kappa(0, *a, 1);
            glue_pushforward(
                space,
                &StableGraph::smooth(space.genus, &space.marks),
                dec,
            )
        }
        StandardClass::Omega(i) => {
            // psi at i pulled back from the one-point space
            assert!(space.marks.contains(i));
            let base = Space::with_marks(space.genus, [*i].into_iter().collect());
            let mut cls = standard_class(&base, StandardClass::Psi(*i));
            for &m in &space.marks {
                if m != *i {
                    cls = pullback_add(&cls, m);
                }
            }
            cls
        }
        StandardClass::Lambda => match space.genus {
            0 => TautClass::zero(space),
            1 => {
                // psi = lambda on the one-point space of genus one
                let m0 = *space.marks.iter().next().expect("genus-1 lambda needs a mark");
                standard_class(space, StandardClass::Omega(m0))
            }
            2 => {
                // lambda = delta_irr/10 + delta_1/5 on genus two
                let irr = standard_class(space, StandardClass::DeltaIrr);
                let d1 = standard_class(space, StandardClass::Delta1);
                irr.scale(&crate::rat::rat(1, 10))
                    .add(&d1.scale(&crate::rat::rat(1, 5)))
            }
            g => panic!("lambda expansion unsupported in genus {}", g),
        },
        StandardClass::Delta1 => {
            assert_eq!(space.genus, 2);
            sum_one_edge(space, |g| {
                g.h1() == 0 && g.genus == vec![1, 1]
            })
        }
        StandardClass::DeltaIrr => {
            assert!(space.genus == 1 || space.genus == 2);
            sum_one_edge(space, |g| g.h1() == 1)
        }
        StandardClass::DeltaTotal => sum_one_edge(space, |_| true),
        StandardClass::DeltaNrt => sum_one_edge(space, |g| {
            g.h1() == 0 && g.genus.iter().all(|&x| x >= 1)
        }),
    }
}

/// Sum of 1/|Aut| xi_*(1) over the one-edge graphs picked by `sel`.
fn sum_one_edge(space: &Space, sel: impl Fn(&StableGraph) -> bool) -> TautClass {
    let mut out = TautClass::zero(space);
    for g in enumerate_stable_graphs(space.genus, &space.marks, GraphFilter::All) {
        if g.edges.len() != 1 || !sel(&g) {
            continue;
        }
        let aut = canonical_cached(&g).aut_count;
        out.insert(
            &g,
            Decoration::default(),
            rat_i64(1) / rat_i64(aut as i64),
        );
    }
    out
}

// ---------------------------------------------------------------------------
// Serialization: class files.

pub fn class_to_string(c: &TautClass) -> String {
    let mut out = format!("C g={} n={}\n", c.space.genus, c.space.n());
    for (t, coeff) in &c.terms {
        let aut = canonical_cached(&t.graph).aut_count;
        let slots = t.graph.flag_slots();
        let psi = t
            .dec
            .psi
            .iter()
            .map(|(&f, &e)| format!("{}.{}:{}", t.graph.flag_vertex(f), slots[&f], e))
            .collect::<Vec<_>>()
            .join(",");
        let kappa = t
            .dec
            .kappa
            .iter()
            .map(|(&(v, a), &e)| format!("{}:{}:{}", v, a, e))
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&format!(
            "{} | {} | psi={} | kappa={}\n",
            rat_to_string(coeff),
            t.graph.record(aut),
            psi,
            kappa
        ));
    }
    out
}

pub fn class_from_string(s: &str) -> Result<TautClass, String> {
    let mut lines = s.lines();
    let header = lines.next().ok_or("empty class file")?;
    let mut genus = None;
    let mut n = None;
    for tok in header.split_whitespace() {
        if tok == "C" {
            continue;
        }
        let (k, v) = tok.split_once('=').ok_or("bad header")?;
        match k {
            "g" => genus = Some(v.parse::<u32>().map_err(|_| "bad genus")?),
            "n" => n = Some(v.parse::<u32>().map_err(|_| "bad n")?),
            _ => {}
        }
    }
    let space = Space::new(genus.ok_or("missing g")?, n.ok_or("missing n")?);
    let mut out = TautClass::zero(&space);
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(" | ").collect();
        if parts.len() != 4 {
            return Err(format!("bad term line: {}", line));
        }
        let coeff = rat_from_str(parts[0].trim()).ok_or("bad coefficient")?;
        let (graph, _) = StableGraph::parse_record(parts[1])?;
        let mut dec = Decoration::default();
        let psi_str = parts[2].trim_start_matches("psi=");
        if !psi_str.is_empty() {
            for item in psi_str.split(',') {
                let (fl, e) = item.rsplit_once(':').ok_or("bad psi")?;
                let (v, slot) = fl.split_once('.').ok_or("bad flag")?;
                let v: usize = v.parse().map_err(|_| "bad flag vertex")?;
                let slot: usize = slot.parse().map_err(|_| "bad slot")?;
                let f = graph.flag_at_slot(v, slot).ok_or("slot out of range")?;
                dec.add_psi(f, e.parse().map_err(|_| "bad exponent")?);
            }
        }
        let kappa_str = parts[3].trim_start_matches("kappa=");
        if !kappa_str.is_empty() {
            for item in kappa_str.split(',') {
                let fields: Vec<&str> = item.split(':').collect();
                if fields.len() != 3 {
                    return Err("bad kappa".into());
                }
                dec.add_kappa(
                    fields[0].parse().map_err(|_| "bad kappa vertex")?,
                    fields[1].parse().map_err(|_| "bad kappa index")?,
                    fields[2].parse().map_err(|_| "bad kappa exponent")?,
                );
            }
        }
        out.insert(&graph, dec, coeff);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat;

    #[test]
    fn identity_and_grading() {
        let sp = Space::new(0, 4);
        let one = TautClass::one(&sp);
        let psi1 = standard_class(&sp, StandardClass::Psi(1));
        assert_eq!(multiply(&one, &psi1), psi1);
        assert!(psi1.is_pure_degree(1));
        let p2 = multiply(&psi1, &psi1);
        // degree 2 exceeds dim of (0,4): zero
        assert!(p2.is_zero());
    }

    #[test]
    fn point_strata_products_vanish() {
        let sp = Space::new(0, 4);
        let d12 = boundary_divisor_split(&sp, 0, &[1, 2].into_iter().collect());
        let d13 = boundary_divisor_split(&sp, 0, &[1, 3].into_iter().collect());
        assert!(multiply(&d12, &d13).is_zero());
    }

    #[test]
    fn self_intersection_excess() {
        // On (0,5) the boundary divisor {1,2}|{3,4,5} squares to the excess
        // class -psi at the movable node shadow.
        let sp = Space::new(0, 5);
        let d = boundary_divisor_split(&sp, 0, &[1, 2].into_iter().collect());
        let sq = multiply(&d, &d);
        assert_eq!(sq.terms.len(), 1);
        let (t, c) = sq.terms.iter().next().unwrap();
        assert_eq!(*c, rat_i64(-1));
        assert_eq!(t.degree(), 2);
        assert_eq!(t.dec.psi.values().sum::<u32>(), 1);
    }

    #[test]
    fn transversal_chain() {
        let sp = Space::new(0, 5);
        let d12 = boundary_divisor_split(&sp, 0, &[1, 2].into_iter().collect());
        let d123 = boundary_divisor_split(&sp, 0, &[1, 2, 3].into_iter().collect());
        let p = multiply(&d12, &d123);
        assert_eq!(p.terms.len(), 1);
        let (t, c) = p.terms.iter().next().unwrap();
        assert_eq!(*c, rat_i64(1));
        assert_eq!(t.graph.n_vertices(), 3);
        assert!(t.dec.psi.is_empty());
    }

    #[test]
    fn pullback_of_psi() {
        // pi_2^*(psi_1) on (1,2) = psi_1 - D_{0,{1,2}}
        let sp1 = Space::with_marks(1, [1].into_iter().collect());
        let psi = standard_class(&sp1, StandardClass::Psi(1));
        let pulled = pullback_add(&psi, 2);
        let sp2 = Space::new(1, 2);
        let expect = standard_class(&sp2, StandardClass::Psi(1)).sub(&boundary_divisor_split(
            &sp2,
            0,
            &[1, 2].into_iter().collect(),
        ));
        assert_eq!(pulled, expect);
        // pi^*(1) = 1
        let one = TautClass::one(&sp1);
        assert_eq!(pullback_add(&one, 2), TautClass::one(&sp2));
    }

    #[test]
    fn pushforward_basics() {
        let sp2 = Space::new(1, 2);
        // pi_*(psi_2^2) = kappa_1 on (1,1)
        let psi2 = standard_class(&sp2, StandardClass::Psi(2));
        let sq = multiply(&psi2, &psi2);
        let down = pushforward_forget(&sq, 2);
        let sp1 = Space::new(1, 1);
        assert_eq!(down, standard_class(&sp1, StandardClass::Kappa(1)));
        // pi_*(1) = 0
        assert!(pushforward_forget(&TautClass::one(&sp2), 2).is_zero());
        // pi_*(D_{0,{1,2}}) = 1
        let d = boundary_divisor_split(&sp2, 0, &[1, 2].into_iter().collect());
        assert_eq!(pushforward_forget(&d, 2), TautClass::one(&sp1));
    }

    #[test]
    fn pullback_then_push_is_zero() {
        let sp = Space::new(1, 1);
        for cls in [
            standard_class(&sp, StandardClass::Psi(1)),
            TautClass::one(&sp),
        ] {
            let up = pullback_add(&cls, 2);
            let down = pushforward_forget(&up, 2);
            assert!(down.is_zero(), "pi_* pi^* must vanish");
        }
    }

    #[test]
    fn omega_examples() {
        let sp = Space::new(2, 1);
        assert_eq!(
            standard_class(&sp, StandardClass::Omega(1)),
            standard_class(&sp, StandardClass::Psi(1))
        );
        let sp2 = Space::new(2, 2);
        let om = standard_class(&sp2, StandardClass::Omega(1));
        let expect = standard_class(&sp2, StandardClass::Psi(1)).sub(&boundary_divisor_split(
            &sp2,
            0,
            &[1, 2].into_iter().collect(),
        ));
        assert_eq!(om, expect);
    }

    #[test]
    fn lambda_cases() {
        let sp0 = Space::new(0, 5);
        assert!(standard_class(&sp0, StandardClass::Lambda).is_zero());
        let sp2 = Space::new(2, 0);
        let lam = standard_class(&sp2, StandardClass::Lambda);
        // one tenth of the irreducible part plus one fifth of the separating part
        let irr = standard_class(&sp2, StandardClass::DeltaIrr);
        let d1 = standard_class(&sp2, StandardClass::Delta1);
        assert_eq!(
            lam,
            irr.scale(&rat(1, 10)).add(&d1.scale(&rat(1, 5)))
        );
        assert_eq!(irr.terms.len(), 1);
        assert_eq!(irr.terms.values().next().unwrap(), &rat(1, 2));
    }

    #[test]
    fn class_serialization_round_trip() {
        let sp = Space::new(2, 1);
        let lam = standard_class(&sp, StandardClass::Lambda);
        let psi = standard_class(&sp, StandardClass::Psi(1));
        let cls = lam.scale(&rat(-3, 7)).add(&psi);
        let s = class_to_string(&cls);
        let back = class_from_string(&s).unwrap();
        assert_eq!(back, cls);
        assert_eq!(class_to_string(&back), s);
    }
}
