//! Constructors for the boundary-formula classes attached to the loci of
//! marked Weierstrass points on genus-2 curves: the exponential of a divisor
//! class as a graph sum, its restriction-to-compact-type variants, the
//! correction class of the recursion, and the recursion itself.
//!
//! All formulas expand, per graph, into a polynomial in a formal variable t
//! whose coefficients are pure tensors of classes on the vertex moduli; the
//! tensors are grafted back into the ambient space at the end.

use crate::algebra::{
    flag_label, graft, multiply, pullback_add, pushforward_forget, section_pushforward,
    standard_class, Decoration, Space, StandardClass, Term, TautClass,
};
use crate::graphs::{
    enumerate_stable_graphs, EdgeClass, Flag, GraphFilter, StableGraph, VertexId, FREE_BASE,
};
use crate::par::map_collect;
use crate::rat::{binomial, factorial, rat, rat_i64, Rat};
use num_traits::Zero;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::{Mutex, OnceLock};

// ---------------------------------------------------------------------------
// Per-graph expansion machinery.

/// A t-polynomial of pure tensors of vertex classes over a fixed graph.
struct GraphExpansion<'a> {
    graph: &'a StableGraph,
    tmax: usize,
    degmax: i64,
    /// terms[j] = tensors at t^j, each (coefficient, one class per vertex)
    terms: Vec<Vec<(Rat, Vec<TautClass>)>>,
}

impl<'a> GraphExpansion<'a> {
    fn new(graph: &'a StableGraph, tmax: usize, degmax: i64) -> Self {
        let nv = graph.n_vertices();
        let ones: Vec<TautClass> = (0..nv)
            .map(|v| TautClass::one(&Space::vertex_space(graph, v)))
            .collect();
        let mut terms = vec![Vec::new(); tmax + 1];
        terms[0].push((rat_i64(1), ones));
        GraphExpansion {
            graph,
            tmax,
            degmax,
            terms,
        }
    }

    fn tensor_degree_min(&self, tensor: &[TautClass]) -> i64 {
        self.graph.edges.len() as i64
            + tensor
                .iter()
                .map(|c| c.terms.keys().map(|t| t.degree()).min().unwrap_or(0))
                .sum::<i64>()
    }

    /// Multiplies every tensor by a t-polynomial supported at one vertex.
    fn mul_vertex_tpoly(&mut self, v: VertexId, poly: &[TautClass]) {
        let mut next = vec![Vec::new(); self.tmax + 1];
        for (j0, tensors) in self.terms.iter().enumerate() {
            for (c, tensor) in tensors {
                for (j1, p) in poly.iter().enumerate() {
                    if j0 + j1 > self.tmax || p.is_zero() {
                        continue;
                    }
                    let mut t2 = tensor.clone();
                    t2[v] = multiply(&t2[v], p);
                    if t2[v].is_zero() || self.tensor_degree_min(&t2) > self.degmax {
                        continue;
                    }
                    next[j0 + j1].push((c.clone(), t2));
                }
            }
        }
        self.terms = next;
    }

    fn mul_vertex(&mut self, v: VertexId, cls: &TautClass) {
        self.mul_vertex_tpoly(v, std::slice::from_ref(cls));
    }

    /// Multiplies by a two-site t-polynomial: poly[j] is a list of
    /// (coefficient, class at v, class at w).
    fn mul_two_site_tpoly(
        &mut self,
        v: VertexId,
        w: VertexId,
        poly: &[Vec<(Rat, TautClass, TautClass)>],
    ) {
        let mut next = vec![Vec::new(); self.tmax + 1];
        for (j0, tensors) in self.terms.iter().enumerate() {
            for (c, tensor) in tensors {
                for (j1, opts) in poly.iter().enumerate() {
                    if j0 + j1 > self.tmax {
                        continue;
                    }
                    for (cc, pv, pw) in opts {
                        let mut t2 = tensor.clone();
                        if v == w {
                            t2[v] = multiply(&multiply(&t2[v], pv), pw);
                        } else {
                            t2[v] = multiply(&t2[v], pv);
                            t2[w] = multiply(&t2[w], pw);
                        }
                        if t2.iter().any(|x| x.is_zero())
                            || self.tensor_degree_min(&t2) > self.degmax
                        {
                            continue;
                        }
                        next[j0 + j1].push((c * cc, t2));
                    }
                }
            }
        }
        self.terms = next;
    }

    /// Grafts all tensors into the ambient space, weighting t^j by
    /// `weights[j]`.
    fn finish(&self, space: &Space, weights: &[Rat]) -> TautClass {
        let mut out = TautClass::zero(space);
        for (j, tensors) in self.terms.iter().enumerate() {
            let w = weights.get(j).cloned().unwrap_or_else(Rat::zero);
            if w.is_zero() {
                continue;
            }
            for (c, tensor) in tensors {
                let g = graft(space, self.graph, tensor);
                out = out.add(&g.scale(&(c * &w)));
            }
        }
        out
    }
}

/// psi of a flag as a class on its vertex moduli.
fn flag_psi(graph: &StableGraph, vspaces: &[Space], f: Flag) -> TautClass {
    let v = graph.flag_vertex(f);
    standard_class(&vspaces[v], StandardClass::Psi(flag_label(graph, f)))
}

fn psi_power(graph: &StableGraph, vspaces: &[Space], f: Flag, k: u32) -> TautClass {
    let v = graph.flag_vertex(f);
    let mut dec = Decoration::default();
    dec.add_psi(Flag::Leg(flag_label(graph, f)), k);
    let mut out = TautClass::zero(&vspaces[v]);
    out.insert(
        &StableGraph::smooth(graph.genus[v], &vspaces[v].marks),
        dec,
        rat_i64(1),
    );
    out
}

static EXP_LAMBDA_CACHE: OnceLock<Mutex<HashMap<(Space, Rat, usize), Vec<TautClass>>>> =
    OnceLock::new();

/// e^{s * lambda} on a vertex moduli as a t-polynomial (t-degree = power).
fn exp_lambda_tpoly(vspace: &Space, s: &Rat, tmax: usize) -> Vec<TautClass> {
    let cache = EXP_LAMBDA_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (vspace.clone(), s.clone(), tmax);
    {
        let guard = cache.lock().unwrap();
        if let Some(v) = guard.get(&key) {
            return v.clone();
        }
    }
    let lambda = standard_class(vspace, StandardClass::Lambda);
    let mut out = Vec::with_capacity(tmax + 1);
    let mut power = TautClass::one(vspace);
    let mut coeff = rat_i64(1);
    for j in 0..=tmax {
        if j > 0 {
            power = multiply(&power, &lambda);
            if power.is_zero() {
                break;
            }
            coeff = coeff * s.clone() / rat_i64(j as i64);
        }
        out.push(power.scale(&coeff));
    }
    cache.lock().unwrap().insert(key, out.clone());
    out
}

/// e^{s * lambda} with no formal variable, truncated by dimension.
fn exp_lambda_flat(vspace: &Space, s: &Rat) -> TautClass {
    let tp = exp_lambda_tpoly(vspace, s, vspace.dim().max(0) as usize);
    let mut out = TautClass::zero(vspace);
    for c in tp {
        out = out.add(&c);
    }
    out
}

// ---------------------------------------------------------------------------
// Omega classes at their sites.

/// Where the omega class of a flag lives once restricted to the graph: the
/// site vertex, the site flag, and the flags of the site vertex that survive
/// when every other marking is forgotten.
pub fn omega_site(graph: &StableGraph, f: Flag) -> (VertexId, Flag, BTreeSet<Flag>) {
    let core = graph.core_vertices();
    let v0 = graph.flag_vertex(f);
    let (vstar, fstar) = if core.contains(&v0) {
        (v0, f)
    } else {
        let attach = graph.attaching_flag(v0, &core);
        let partner = graph.other_half(attach);
        (graph.flag_vertex(partner), partner)
    };
    let mut retained: BTreeSet<Flag> = BTreeSet::new();
    retained.insert(fstar);
    for h in graph.vertex_flags(vstar) {
        if h == fstar {
            continue;
        }
        if let Flag::Half(e, _) = h {
            if !graph.edge_disconnects(e) {
                retained.insert(h);
                continue;
            }
            // far side genus
            let far = graph.flag_vertex(graph.other_half(h));
            let side = side_vertices(graph, far, e);
            let far_genus: u32 = side.iter().map(|&x| graph.genus[x]).sum::<u32>()
                + cycle_rank(graph, &side, e);
            if far_genus > 0 {
                retained.insert(h);
            }
        }
    }
    (vstar, fstar, retained)
}

fn side_vertices(graph: &StableGraph, start: VertexId, skip: usize) -> HashSet<VertexId> {
    let mut seen = HashSet::new();
    seen.insert(start);
    let mut stack = vec![start];
    while let Some(v) = stack.pop() {
        for (i, &(a, b)) in graph.edges.iter().enumerate() {
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

fn cycle_rank(graph: &StableGraph, verts: &HashSet<VertexId>, skip: usize) -> u32 {
    let e = graph
        .edges
        .iter()
        .enumerate()
        .filter(|&(i, &(a, b))| i != skip && verts.contains(&a) && verts.contains(&b))
        .count();
    (e as i64 + 1 - verts.len() as i64).max(0) as u32
}

static OMEGA_CACHE: OnceLock<Mutex<HashMap<(StableGraph, Flag), (VertexId, TautClass)>>> =
    OnceLock::new();

/// The omega class of a flag restricted to the graph, as a class on the site
/// vertex moduli: psi at the site flag pulled back from the retained flags.
pub fn omega_class_on_vertex(graph: &StableGraph, f: Flag) -> (VertexId, TautClass) {
    let cache = OMEGA_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (graph.clone(), f);
    {
        let guard = cache.lock().unwrap();
        if let Some(v) = guard.get(&key) {
            return v.clone();
        }
    }
    let (vstar, fstar, retained) = omega_site(graph, f);
    let base_marks: BTreeSet<u32> = retained.iter().map(|&x| flag_label(graph, x)).collect();
    let base = Space::with_marks(graph.genus[vstar], base_marks.clone());
    let mut cls = standard_class(&base, StandardClass::Psi(flag_label(graph, fstar)));
    let full: BTreeSet<u32> = graph
        .vertex_flags(vstar)
        .iter()
        .map(|&x| flag_label(graph, x))
        .collect();
    for &m in full.difference(&base_marks) {
        cls = pullback_add(&cls, m);
    }
    cache.lock().unwrap().insert(key, (vstar, cls.clone()));
    (vstar, cls)
}

/// Powers of (1 + s*omega) and of omega itself at a site, cached per call
/// site by the caller.
fn omega_powers(cls: &TautClass, up_to: usize) -> Vec<TautClass> {
    let mut out = Vec::with_capacity(up_to + 1);
    out.push(TautClass::one(&cls.space));
    for k in 1..=up_to {
        let next = multiply(&out[k - 1], cls);
        out.push(next);
    }
    out
}

// ---------------------------------------------------------------------------
// The exponential of a divisor class as a graph sum.

/// Graph-sum expansion of exp(sum a_i psi_i + c lambda - b delta), truncated
/// at `max_degree`.
pub fn pixton_exponential(
    genus: u32,
    n: u32,
    a: &BTreeMap<u32, Rat>,
    c: &Rat,
    b: &Rat,
    max_degree: i64,
) -> TautClass {
    let space = Space::new(genus, n);
    let degmax = max_degree.min(space.dim());
    let graphs = enumerate_stable_graphs(genus, &space.marks, GraphFilter::All);
    let parts = map_collect(graphs, |g| pixton_graph_part(&space, &g, a, c, b, degmax));
    let mut out = TautClass::zero(&space);
    for p in parts {
        out = out.add(&p);
    }
    out
}

fn pixton_graph_part(
    space: &Space,
    g: &StableGraph,
    a: &BTreeMap<u32, Rat>,
    c: &Rat,
    b: &Rat,
    degmax: i64,
) -> TautClass {
    if (g.edges.len() as i64) > degmax {
        return TautClass::zero(space);
    }
    let aut = crate::graphs::canonical_cached(g).aut_count;
    let vspaces: Vec<Space> = (0..g.n_vertices())
        .map(|v| Space::vertex_space(g, v))
        .collect();
    let mut exp = GraphExpansion::new(g, 0, degmax);
    // leg factors e^{a_i psi_i}
    for &(m, v) in &g.legs {
        let ai = a.get(&m).cloned().unwrap_or_else(Rat::zero);
        if ai.is_zero() {
            continue;
        }
        let psi = flag_psi(g, &vspaces, Flag::Leg(m));
        let mut cls = TautClass::zero(&vspaces[v]);
        let mut power = TautClass::one(&vspaces[v]);
        let mut coef = rat_i64(1);
        let mut k = 0u32;
        loop {
            cls = cls.add(&power.scale(&coef));
            k += 1;
            if k as i64 > vspaces[v].dim().max(0) {
                break;
            }
            power = multiply(&power, &psi);
            if power.is_zero() {
                break;
            }
            coef = coef * ai.clone() / rat_i64(k as i64);
        }
        exp.mul_vertex(v, &cls);
    }
    // vertex factors e^{c lambda}
    for v in 0..g.n_vertices() {
        let f = exp_lambda_flat(&vspaces[v], c);
        exp.mul_vertex(v, &f);
    }
    // edge factors (1 - e^{b(psi+psi')}) / (psi+psi')
    for (e, _) in g.edges.iter().enumerate() {
        let (h0, h1) = g.edge_flags(e);
        let (v0, v1) = (g.flag_vertex(h0), g.flag_vertex(h1));
        let mut opts: Vec<(Rat, TautClass, TautClass)> = Vec::new();
        let kmax = degmax.max(0) as u32;
        let mut bpow = b.clone();
        for k in 0..=kmax {
            // coefficient of (psi+psi')^k is -b^{k+1}/(k+1)!
            let coef = -bpow.clone() / factorial(k + 1);
            for s in 0..=k {
                let c0 = binomial(k, s) * coef.clone();
                opts.push((
                    c0,
                    psi_power(g, &vspaces, h0, s),
                    psi_power(g, &vspaces, h1, k - s),
                ));
            }
            bpow *= b.clone();
        }
        exp.mul_two_site_tpoly(v0, v1, &[opts]);
    }
    let total = exp.finish(space, &[rat_i64(1)]);
    total.scale(&(rat_i64(1) / rat_i64(aut as i64)))
}

// ---------------------------------------------------------------------------
// The formula in compact type, its variants, and the extended family.

static HYP_CACHE: OnceLock<Mutex<HashMap<(&'static str, u32), TautClass>>> = OnceLock::new();

fn cached(kind: &'static str, n: u32, build: impl FnOnce() -> TautClass) -> TautClass {
    let cache = HYP_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    {
        let guard = cache.lock().unwrap();
        if let Some(c) = guard.get(&(kind, n)) {
            return c.clone();
        }
    }
    let out = build();
    cache.lock().unwrap().insert((kind, n), out.clone());
    out
}

/// Contribution of one graph to the compact-type/extended formula: the
/// degree-n part of sum_j j! [ prod (1+3 omega_i) prod_v e^{-t lambda}
/// prod_{E1} (1-e^{t(psi+psi')})/(psi+psi') prod_{E2} 1/(psi - (1+3 omega)) ]
/// with the h^1 sign and 1/Aut.
pub fn formula_graph_part(space: &Space, g: &StableGraph, n: u32) -> TautClass {
    let degmax = n as i64;
    if (g.edges.len() as i64) > degmax {
        return TautClass::zero(space);
    }
    let classes = g.classify_edges().expect("genus 2");
    let aut = crate::graphs::canonical_cached(g).aut_count;
    let vspaces: Vec<Space> = (0..g.n_vertices())
        .map(|v| Space::vertex_space(g, v))
        .collect();
    let tmax = n as usize;
    let mut exp = GraphExpansion::new(g, tmax, degmax);
    // leg factors at their omega sites
    for &(m, _) in &g.legs {
        let (vstar, om) = omega_class_on_vertex(g, Flag::Leg(m));
        let cls = TautClass::one(&vspaces[vstar]).add(&om.scale(&rat_i64(3)));
        exp.mul_vertex(vstar, &cls);
    }
    // vertex factors e^{-t lambda}
    for v in 0..g.n_vertices() {
        let poly = exp_lambda_tpoly(&vspaces[v], &rat_i64(-1), tmax);
        exp.mul_vertex_tpoly(v, &poly);
    }
    // edge factors
    for (e, class) in classes.iter().enumerate() {
        match class {
            EdgeClass::GenusOnePair => {
                let (h0, h1) = g.edge_flags(e);
                let (v0, v1) = (g.flag_vertex(h0), g.flag_vertex(h1));
                // t^j coefficient: -(psi+psi')^{j-1}/j!
                let mut poly: Vec<Vec<(Rat, TautClass, TautClass)>> = vec![Vec::new()];
                for j in 1..=tmax {
                    let mut opts = Vec::new();
                    let coef = -rat_i64(1) / factorial(j as u32);
                    for s in 0..j as u32 {
                        let c0 = binomial(j as u32 - 1, s) * coef.clone();
                        opts.push((
                            c0,
                            psi_power(g, &vspaces, h0, s),
                            psi_power(g, &vspaces, h1, j as u32 - 1 - s),
                        ));
                    }
                    poly.push(opts);
                }
                exp.mul_two_site_tpoly(v0, v1, &poly);
            }
            EdgeClass::RationalTail { toward_g2, outward } => {
                // 1/(psi_h - (1+3 omega_{h'})) expanded as
                // -sum_k psi_h^k (1+3 omega)^{-(k+1)}
                let h = *toward_g2;
                let hv = g.flag_vertex(h);
                let (site, om) = omega_class_on_vertex(g, *outward);
                let kmax = vspaces[hv].dim().max(0) as u32;
                let mmax = vspaces[site].dim().max(0) as usize;
                let ompow = omega_powers(&om, mmax);
                let mut opts: Vec<(Rat, TautClass, TautClass)> = Vec::new();
                for k in 0..=kmax {
                    for m2 in 0..=mmax {
                        // (1+3x)^{-(k+1)} = sum_m (-3)^m C(k+m, m) x^m
                        let mut c0 = -binomial(k + m2 as u32, m2 as u32)
                            * crate::rat::rat_i64(3).pow(m2 as i32);
                        if m2 % 2 == 1 {
                            c0 = -c0;
                        }
                        opts.push((
                            c0,
                            psi_power(g, &vspaces, h, k),
                            ompow[m2].clone(),
                        ));
                    }
                }
                exp.mul_two_site_tpoly(hv, site, &[opts]);
            }
            EdgeClass::NonDisconnecting => {}
        }
    }
    let weights: Vec<Rat> = (0..=tmax).map(|j| factorial(j as u32)).collect();
    let total = exp.finish(space, &weights);
    let sign = if g.h1() % 2 == 1 {
        rat_i64(-1)
    } else {
        rat_i64(1)
    };
    total
        .degree_part(n as i64)
        .scale(&(sign / rat_i64(aut as i64)))
}

fn weierstrass_sum(n: u32, filter: GraphFilter) -> TautClass {
    let space = Space::new(2, n);
    let graphs = enumerate_stable_graphs(2, &space.marks, filter);
    let parts = map_collect(graphs, |g| formula_graph_part(&space, &g, n));
    let mut out = TautClass::zero(&space);
    for p in parts {
        out = out.add(&p);
    }
    out
}

/// The compact-type class of the locus of n marked Weierstrass points, as
/// the degree-n part of the graph sum over compact-type graphs.
pub fn hyp_ct_formula(n: u32) -> TautClass {
    assert!((1..=7).contains(&n), "supported for 1 <= n <= 7");
    cached("ct", n, || weierstrass_sum(n, GraphFilter::CompactType))
}

/// The same class summed over the extended graph family with the h^1 sign;
/// beyond n = 4 this is experimental.
pub fn hyp_tilde_formula(n: u32, experimental: bool) -> TautClass {
    assert!(n >= 1);
    if n > 4 {
        assert!(experimental && n <= 6, "n = 5, 6 only behind the experimental flag");
    }
    cached("tilde", n, || weierstrass_sum(n, GraphFilter::Extended))
}

/// The rational-tails variant: graphs with a genus-2 vertex, decorated with
/// the tail factors only, times powers of (-lambda - delta_1).
pub fn hyp_rt_formula(n: u32) -> TautClass {
    assert!((1..=6).contains(&n));
    cached("rt", n, || {
        let space = Space::new(2, n);
        let lam = standard_class(&space, StandardClass::Lambda);
        let d1 = standard_class(&space, StandardClass::Delta1);
        let ld = lam.add(&d1).scale(&rat_i64(-1));
        let mut ld_pows = vec![TautClass::one(&space)];
        for j in 1..=n as usize {
            let nxt = multiply(&ld_pows[j - 1], &ld);
            ld_pows.push(nxt);
        }
        let graphs = enumerate_stable_graphs(2, &space.marks, GraphFilter::RationalTails);
        let parts = map_collect(graphs, |g| {
            if (g.edges.len() as i64) > n as i64 {
                return TautClass::zero(&space);
            }
            let aut = g.canonicalize().aut_count;
            let vspaces: Vec<Space> = (0..g.n_vertices())
                .map(|v| Space::vertex_space(&g, v))
                .collect();
            let classes = g.classify_edges().expect("genus 2");
            let mut exp = GraphExpansion::new(&g, 0, n as i64);
            for &(m, _) in &g.legs {
                let (vstar, om) = omega_class_on_vertex(&g, Flag::Leg(m));
                let cls = TautClass::one(&vspaces[vstar]).add(&om.scale(&rat_i64(3)));
                exp.mul_vertex(vstar, &cls);
            }
            for (e, class) in classes.iter().enumerate() {
                let EdgeClass::RationalTail { toward_g2, outward } = class else {
                    panic!("rational-tails graph has a non-tail edge");
                };
                let _ = e;
                let h = *toward_g2;
                let hv = g.flag_vertex(h);
                let (site, om) = omega_class_on_vertex(&g, *outward);
                let kmax = vspaces[hv].dim().max(0) as u32;
                let mmax = vspaces[site].dim().max(0) as usize;
                let ompow = omega_powers(&om, mmax);
                let mut opts: Vec<(Rat, TautClass, TautClass)> = Vec::new();
                for k in 0..=kmax {
                    for m2 in 0..=mmax {
                        let mut c0 = -binomial(k + m2 as u32, m2 as u32)
                            * crate::rat::rat_i64(3).pow(m2 as i32);
                        if m2 % 2 == 1 {
                            c0 = -c0;
                        }
                        opts.push((c0, psi_power(&g, &vspaces, h, k), ompow[m2].clone()));
                    }
                }
                exp.mul_two_site_tpoly(hv, site, &[opts]);
            }
            let base = exp.finish(&space, &[rat_i64(1)]);
            let mut acc = TautClass::zero(&space);
            let jmax = (n as usize).saturating_sub(g.edges.len());
            for (_j, p) in ld_pows.iter().enumerate().take(jmax + 1) {
                acc = acc.add(&multiply(&base, p));
            }
            acc.degree_part(n as i64)
                .scale(&(rat_i64(1) / rat_i64(aut as i64)))
        });
        let mut out = TautClass::zero(&space);
        for p in parts {
            out = out.add(&p);
        }
        out
    })
}

/// Powers of a pulled-back single-point divisor class, assembled as the
/// degree-n part of a graph sum over graphs with no rational tails.
pub fn prod_formula(genus: u32, n: u32, a: i64, c: i64, b: i64) -> TautClass {
    assert!(genus == 1 || genus == 2);
    let space = Space::new(genus, n);
    let graphs = enumerate_stable_graphs(genus, &space.marks, GraphFilter::NoRationalTails);
    let tmax = n as usize;
    let parts = map_collect(graphs, |g| {
        if (g.edges.len() as i64) > n as i64 {
            return TautClass::zero(&space);
        }
        let aut = g.canonicalize().aut_count;
        let vspaces: Vec<Space> = (0..g.n_vertices())
            .map(|v| Space::vertex_space(&g, v))
            .collect();
        let mut exp = GraphExpansion::new(&g, tmax, n as i64);
        for &(m, _) in &g.legs {
            let (vstar, om) = omega_class_on_vertex(&g, Flag::Leg(m));
            let cls = TautClass::one(&vspaces[vstar]).add(&om.scale(&rat_i64(a)));
            exp.mul_vertex(vstar, &cls);
        }
        for v in 0..g.n_vertices() {
            let poly = exp_lambda_tpoly(&vspaces[v], &rat_i64(c), tmax);
            exp.mul_vertex_tpoly(v, &poly);
        }
        for (e, _) in g.edges.iter().enumerate() {
            let (h0, h1) = g.edge_flags(e);
            let (v0, v1) = (g.flag_vertex(h0), g.flag_vertex(h1));
            let mut poly: Vec<Vec<(Rat, TautClass, TautClass)>> = vec![Vec::new()];
            let mut bj = rat_i64(b);
            for j in 1..=tmax {
                let mut opts = Vec::new();
                let coef = -bj.clone() / factorial(j as u32);
                for s in 0..j as u32 {
                    let c0 = binomial(j as u32 - 1, s) * coef.clone();
                    opts.push((
                        c0,
                        psi_power(&g, &vspaces, h0, s),
                        psi_power(&g, &vspaces, h1, j as u32 - 1 - s),
                    ));
                }
                poly.push(opts);
                bj *= rat_i64(b);
            }
            exp.mul_two_site_tpoly(v0, v1, &poly);
        }
        let weights: Vec<Rat> = (0..=tmax).map(|j| factorial(j as u32)).collect();
        exp.finish(&space, &weights)
            .degree_part(n as i64)
            .scale(&(rat_i64(1) / rat_i64(aut as i64)))
    });
    let mut out = TautClass::zero(&space);
    for p in parts {
        out = out.add(&p);
    }
    out
}

// ---------------------------------------------------------------------------
// The correction class of the recursion.

/// The pullback of the Weierstrass-locus class indexed by a marking subset:
/// the recursion class on |I| points, relabelled onto I and pulled back to
/// the full marking set.
fn hyp_pulled_back(space: &Space, subset: &BTreeSet<u32>, ct: bool) -> TautClass {
    let k = subset.len() as u32;
    let base = if k == 0 {
        TautClass::one(&Space::new(2, 0))
    } else if ct {
        hyp_ct_formula(k)
    } else {
        hyp_recursive(k)
    };
    let map: BTreeMap<u32, u32> = (1..=k).zip(subset.iter().copied()).collect();
    let mut cls = base.relabel(&map);
    for &m in space.marks.difference(subset) {
        cls = pullback_add(&cls, m);
    }
    cls
}

/// (1/Aut) xi_*(1) for a graph built from explicit data.
fn stratum(space: &Space, graph: &StableGraph) -> TautClass {
    let aut = crate::graphs::canonical_cached(graph).aut_count;
    let mut out = TautClass::zero(space);
    out.insert(graph, Decoration::default(), rat_i64(1) / rat_i64(aut as i64));
    out
}

/// Sum of (1/Aut) xi_*(dec) over the distinct assignments of `marks` to the
/// free slots of a partially labelled, possibly decorated template.
fn stratum_expanded(
    space: &Space,
    template: &StableGraph,
    dec: &Decoration,
    marks: &[u32],
) -> TautClass {
    let free: Vec<u32> = template
        .legs
        .iter()
        .map(|&(m, _)| m)
        .filter(|&m| m >= FREE_BASE)
        .collect();
    assert_eq!(free.len(), marks.len(), "marking count mismatch");
    let mut seen: BTreeSet<Term> = BTreeSet::new();
    let mut out = TautClass::zero(space);
    let mut perms = vec![marks.to_vec()];
    // all permutations of the marks over the free slots
    fn heap(perm: &mut Vec<u32>, k: usize, acc: &mut Vec<Vec<u32>>) {
        if k <= 1 {
            acc.push(perm.clone());
            return;
        }
        for i in 0..k {
            heap(perm, k - 1, acc);
            if k % 2 == 0 {
                perm.swap(i, k - 1);
            } else {
                perm.swap(0, k - 1);
            }
        }
    }
    let mut acc = Vec::new();
    if !marks.is_empty() {
        let mut p = marks.to_vec();
        heap(&mut p, marks.len(), &mut acc);
        perms = acc;
    }
    for p in perms {
        let map: BTreeMap<u32, u32> = free.iter().copied().zip(p).collect();
        let g = template.relabel_legs(&map);
        let term = Term::canonical(&g, dec);
        if !seen.insert(term) {
            continue;
        }
        let aut = crate::graphs::canonical_cached(&g).aut_count;
        out.insert(&g, dec.clone(), rat_i64(1) / rat_i64(aut as i64));
    }
    out
}

/// The five building blocks of the correction class: an elliptic vertex
/// joined to a cycle of rational vertices, the last of which carries the
/// markings `with_n` together with the final marking.
fn cycle_template(elliptic_free: usize, rational_legs: &[Vec<u32>]) -> StableGraph {
    // vertex 0: elliptic; vertices 1.. are the rational cycle in order; the
    // cycle closes back to the elliptic vertex. For a single rational vertex
    // the two edges form a double edge.
    let k = rational_legs.len();
    let mut genus = vec![1u32];
    genus.extend(std::iter::repeat(0).take(k));
    let mut legs: Vec<(u32, usize)> = Vec::new();
    for i in 0..elliptic_free {
        legs.push((FREE_BASE + i as u32, 0));
    }
    for (j, ls) in rational_legs.iter().enumerate() {
        for &m in ls {
            legs.push((m, j + 1));
        }
    }
    let mut edges = Vec::new();
    edges.push((0, 1));
    for j in 1..k {
        edges.push((j, j + 1));
    }
    edges.push((0, k));
    legs.sort();
    StableGraph {
        genus,
        legs,
        edges,
    }
}

/// The correction class appearing in the recursion: the sum of the excess
/// components of the intersection defining the locus with one more marked
/// point.
pub fn phigamma(n: u32) -> TautClass {
    assert!((2..=6).contains(&n), "supported for 2 <= n <= 6");
    cached("phigamma", n, || {
        let space = Space::new(2, n);
        let all: BTreeSet<u32> = space.marks.clone();
        let mut out = TautClass::zero(&space);
        let idx: Vec<u32> = (1..n).collect();
        // ordered tuples of distinct indices
        fn tuples(idx: &[u32], r: usize) -> Vec<Vec<u32>> {
            if r == 0 {
                return vec![Vec::new()];
            }
            let mut out = Vec::new();
            for &i in idx {
                let rest: Vec<u32> = idx.iter().copied().filter(|&j| j != i).collect();
                for mut t in tuples(&rest, r - 1) {
                    t.insert(0, i);
                    out.push(t);
                }
            }
            out
        }
        let mut add_block = |coef: Rat, tuple: &[u32], rational_legs: Vec<Vec<u32>>| {
            let used: BTreeSet<u32> = tuple.iter().copied().chain([n]).collect();
            let comp: BTreeSet<u32> = all.difference(&used).copied().collect();
            let template = cycle_template(comp.len(), &rational_legs);
            let comp_v: Vec<u32> = comp.iter().copied().collect();
            let expanded =
                stratum_expanded(&space, &template, &Decoration::default(), &comp_v);
            assert_eq!(
                expanded.terms.len(),
                1,
                "markings must distribute uniquely over the elliptic legs"
            );
            let factor = hyp_pulled_back(&space, &comp, false);
            out = out.add(&multiply(&factor, &expanded).scale(&coef));
        };
        // one rational vertex: coefficient 1
        for t in tuples(&idx, 1) {
            add_block(rat_i64(1), &t, vec![vec![t[0], n]]);
        }
        // triangle: -1/2
        for t in tuples(&idx, 2) {
            let (i, j) = (t[0], t[1]);
            add_block(rat(-1, 2), &t, vec![vec![j], vec![i, n]]);
        }
        // square: +1/2, markings j and k flanking the pair
        for t in tuples(&idx, 3) {
            let (i, j, k) = (t[0], t[1], t[2]);
            add_block(rat(1, 2), &t, vec![vec![j], vec![i, n], vec![k]]);
        }
        // pentagons: +1/4 (first) and -3/4 (second)
        for t in tuples(&idx, 4) {
            let (i, j, k, l) = (t[0], t[1], t[2], t[3]);
            add_block(rat(1, 4), &t, vec![vec![l], vec![k], vec![j], vec![i, n]]);
            add_block(rat(-3, 4), &t, vec![vec![k], vec![j], vec![i, n], vec![l]]);
        }
        // hexagons: +3/4 and -1/4
        for t in tuples(&idx, 5) {
            let (i, j, k, l, m) = (t[0], t[1], t[2], t[3], t[4]);
            add_block(
                rat(3, 4),
                &t,
                vec![vec![k], vec![j], vec![i, n], vec![m], vec![l]],
            );
            add_block(
                rat(-1, 4),
                &t,
                vec![vec![m], vec![l], vec![k], vec![j], vec![i, n]],
            );
        }
        out.degree_part(n as i64)
    })
}

// ---------------------------------------------------------------------------
// The recursion.

/// The class on one marked point: 3 psi - lambda - delta_1.
pub fn hyp_one() -> TautClass {
    let sp = Space::new(2, 1);
    standard_class(&sp, StandardClass::Psi(1))
        .scale(&rat_i64(3))
        .sub(&standard_class(&sp, StandardClass::Lambda))
        .sub(&standard_class(&sp, StandardClass::Delta1))
}

/// The pulled-back one-point class 3 omega_n - lambda - delta_1 on (2, n).
fn pullback_one_point_class(space: &Space, m: u32) -> TautClass {
    standard_class(space, StandardClass::Omega(m))
        .scale(&rat_i64(3))
        .sub(&standard_class(space, StandardClass::Lambda))
        .sub(&standard_class(space, StandardClass::Delta1))
}

/// The full-space class by the recursion: intersect the pullbacks, remove
/// the diagonal components, remove the correction class.
pub fn hyp_recursive(n: u32) -> TautClass {
    assert!((1..=6).contains(&n));
    cached("rec", n, || {
        if n == 1 {
            return hyp_one();
        }
        let prev = hyp_recursive(n - 1);
        let space = Space::new(2, n);
        let lifted = pullback_add(&prev, n);
        let mut out = multiply(&lifted, &pullback_one_point_class(&space, n));
        for i in 1..n {
            out = out.sub(&section_pushforward(&prev, i, n));
        }
        out.sub(&phigamma(n))
    })
}

/// The part of the recursion class supported outside compact type, by its
/// own recursion.
pub fn nct_recursive(n: u32) -> TautClass {
    assert!((2..=6).contains(&n));
    cached("nct_rec", n, || {
        if n == 2 {
            return phigamma(2).scale(&rat_i64(-1));
        }
        let prev = nct_recursive(n - 1);
        let space = Space::new(2, n);
        let lifted = pullback_add(&prev, n);
        let mut out = multiply(&lifted, &pullback_one_point_class(&space, n));
        for i in 1..n {
            out = out.sub(&section_pushforward(&prev, i, n));
        }
        out.sub(&phigamma(n))
    })
}

// ---------------------------------------------------------------------------
// Closed forms for the non-compact-type parts.

/// Helpers naming the recurring strata shapes. Vertex 0 is always the
/// elliptic vertex; the banana means a doubled edge.
fn banana(elliptic_legs: &[u32], rational_legs: &[u32], free_rational: usize, free_elliptic: usize) -> StableGraph {
    let mut legs: Vec<(u32, usize)> = Vec::new();
    for &m in elliptic_legs {
        legs.push((m, 0));
    }
    for &m in rational_legs {
        legs.push((m, 1));
    }
    for i in 0..free_elliptic {
        legs.push((FREE_BASE + 100 + i as u32, 0));
    }
    for i in 0..free_rational {
        legs.push((FREE_BASE + i as u32, 1));
    }
    legs.sort();
    StableGraph {
        genus: vec![1, 0],
        legs,
        edges: vec![(0, 1), (0, 1)],
    }
}

/// Banana with a chain of rational vertices hanging from the rational hub:
/// genus [1, 0, 0, ..]; vertex 1 doubly joined to 0, then a path 1-2-3-..
fn banana_chain(free_per_vertex: &[usize], fixed: &[(u32, usize)]) -> StableGraph {
    let k = free_per_vertex.len();
    let mut genus = vec![1u32];
    genus.extend(std::iter::repeat(0).take(k));
    let mut legs: Vec<(u32, usize)> = Vec::new();
    let mut next_free = FREE_BASE;
    for (j, &cnt) in free_per_vertex.iter().enumerate() {
        for _ in 0..cnt {
            legs.push((next_free, j + 1));
            next_free += 1;
        }
    }
    for &(m, v) in fixed {
        legs.push((m, v));
    }
    let mut edges = vec![(0, 1), (0, 1)];
    for j in 1..k {
        edges.push((j, j + 1));
    }
    legs.sort();
    StableGraph {
        genus,
        legs,
        edges,
    }
}

/// The closed expression for the non-compact-type part, transcribed from the
/// display for each n.
pub fn nct_closed(n: u32) -> TautClass {
    assert!((2..=5).contains(&n));
    cached("nct_closed", n, || match n {
        2 => {
            let space = Space::new(2, 2);
            stratum(&space, &banana(&[], &[1, 2], 0, 0)).scale(&rat_i64(-1))
        }
        3 => nct3_closed(),
        4 => nct4_closed(),
        5 => nct5_closed(),
        _ => unreachable!(),
    })
}

fn lam_d1(space: &Space) -> TautClass {
    standard_class(space, StandardClass::Lambda)
        .add(&standard_class(space, StandardClass::Delta1))
}

fn nct3_closed() -> TautClass {
    let space = Space::new(2, 3);
    let ld = lam_d1(&space);
    let mut out = TautClass::zero(&space);
    // - sum_i [H_{2,{i}}] . (banana: elliptic leg i, two free rational legs)
    for i in 1..=3u32 {
        let others: Vec<u32> = (1..=3).filter(|&j| j != i).collect();
        let g = banana(&[i], &others, 0, 0);
        let factor = hyp_pulled_back(&space, &[i].into_iter().collect(), false);
        out = out.sub(&multiply(&factor, &stratum(&space, &g)));
    }
    // + (lambda + delta_1) . (banana with three free rational legs)
    let g_all = banana(&[], &[1, 2, 3], 0, 0);
    out = out.add(&multiply(&ld, &stratum(&space, &g_all)));
    // + banana-chain with all three legs on the outer vertex
    let g1 = banana_chain(&[0, 3], &[]);
    out = out.add(&stratum_expanded(
        &space,
        &g1,
        &Decoration::default(),
        &[1, 2, 3],
    ));
    // + banana-chain with one leg on the hub, two outside
    let g2 = banana_chain(&[1, 2], &[]);
    out = out.add(&stratum_expanded(
        &space,
        &g2,
        &Decoration::default(),
        &[1, 2, 3],
    ));
    out
}

fn nct4_closed() -> TautClass {
    let space = Space::new(2, 4);
    let ld = lam_d1(&space);
    let ld2 = multiply(&ld, &ld);
    let mut out = TautClass::zero(&space);
    // - sum_{i<j} [H^{ct}_{2,{i,j}}] . (banana: legs i,j elliptic; others rational)
    for i in 1..=4u32 {
        for j in (i + 1)..=4 {
            let others: Vec<u32> = (1..=4).filter(|&m| m != i && m != j).collect();
            let g = banana(&[i, j], &others, 0, 0);
            let factor = hyp_pulled_back(&space, &[i, j].into_iter().collect(), true);
            out = out.sub(&multiply(&factor, &stratum(&space, &g)));
        }
    }
    // + sum_i [H_{2,{i}}] . ( (l+d) banana(i; 3 free) + two banana-chains )
    for i in 1..=4u32 {
        let others: Vec<u32> = (1..=4).filter(|&m| m != i).collect();
        let factor = hyp_pulled_back(&space, &[i].into_iter().collect(), false);
        let b = banana(&[i], &others, 0, 0);
        let mut acc = multiply(&ld, &stratum(&space, &b));
        let c1 = banana_chain(&[1, 2], &[(i, 0)]);
        acc = acc.add(&stratum_expanded(&space, &c1, &Decoration::default(), &others));
        let c2 = banana_chain(&[0, 3], &[(i, 0)]);
        acc = acc.add(&stratum_expanded(&space, &c2, &Decoration::default(), &others));
        out = out.add(&multiply(&factor, &acc));
    }
    // - (l+d)^2 . banana(4 free rational)
    out = out.sub(&multiply(&ld2, &stratum(&space, &banana(&[], &[1, 2, 3, 4], 0, 0))));
    // - (l+d) . ( triangle + three banana-chains )
    {
        let mut acc = TautClass::zero(&space);
        // triangle: elliptic joined to two rational vertices with two legs each
        let tri = StableGraph {
            genus: vec![1, 0, 0],
            legs: vec![
                (FREE_BASE, 1),
                (FREE_BASE + 1, 1),
                (FREE_BASE + 2, 2),
                (FREE_BASE + 3, 2),
            ],
            edges: vec![(0, 1), (0, 2), (1, 2)],
        };
        acc = acc.add(&stratum_expanded(&space, &tri, &Decoration::default(), &[1, 2, 3, 4]));
        for shape in [vec![2usize, 2], vec![1, 3], vec![0, 4]] {
            let c = banana_chain(&shape, &[]);
            acc = acc.add(&stratum_expanded(&space, &c, &Decoration::default(), &[1, 2, 3, 4]));
        }
        out = out.sub(&multiply(&ld, &acc));
    }
    // - two long chains + the double banana
    for shape in [vec![1usize, 1, 2], vec![0, 2, 2]] {
        let c = banana_chain(&shape, &[]);
        out = out.sub(&stratum_expanded(&space, &c, &Decoration::default(), &[1, 2, 3, 4]));
    }
    {
        // rational - elliptic-free double banana: center joined doubly to
        // two rational vertices with two legs each
        let db = StableGraph {
            genus: vec![0, 0, 0],
            legs: vec![
                (FREE_BASE, 0),
                (FREE_BASE + 1, 0),
                (FREE_BASE + 2, 2),
                (FREE_BASE + 3, 2),
            ],
            edges: vec![(0, 1), (0, 1), (1, 2), (1, 2)],
        };
        out = out.add(&stratum_expanded(&space, &db, &Decoration::default(), &[1, 2, 3, 4]));
    }
    out
}

fn nct5_closed() -> TautClass {
    let space = Space::new(2, 5);
    let ld = lam_d1(&space);
    let ld2 = multiply(&ld, &ld);
    let ld3 = multiply(&ld2, &ld);
    let all: Vec<u32> = (1..=5).collect();
    let mut out = TautClass::zero(&space);
    // - sum_{i<j} [H^{ct}_{{i,j}^c}] . banana(i,j rational; 3 free elliptic)
    for i in 1..=5u32 {
        for j in (i + 1)..=5 {
            let comp: BTreeSet<u32> = all.iter().copied().filter(|&m| m != i && m != j).collect();
            let g = banana(&[], &[i, j], 0, 3);
            let comp_v: Vec<u32> = comp.iter().copied().collect();
            let factor = hyp_pulled_back(&space, &comp, true);
            out = out.sub(&multiply(
                &factor,
                &stratum_expanded(&space, &g, &Decoration::default(), &comp_v),
            ));
        }
    }
    // + sum_{i<j} [H^{ct}_{{i,j}}] . ( (l+d) banana(i,j elliptic; 3 free)
    //   + chain(1 hub leg, 2 outer) + chain(0 hub, 3 outer) )
    for i in 1..=5u32 {
        for j in (i + 1)..=5 {
            let others: Vec<u32> = all.iter().copied().filter(|&m| m != i && m != j).collect();
            let factor = hyp_pulled_back(&space, &[i, j].into_iter().collect(), true);
            let b = banana(&[i, j], &[], others.len(), 0);
            let mut acc = multiply(&ld, &stratum_expanded(&space, &b, &Decoration::default(), &others));
            let c1 = banana_chain(&[1, 2], &[(i, 0), (j, 0)]);
            acc = acc.add(&stratum_expanded(&space, &c1, &Decoration::default(), &others));
            let c2 = banana_chain(&[0, 3], &[(i, 0), (j, 0)]);
            acc = acc.add(&stratum_expanded(&space, &c2, &Decoration::default(), &others));
            out = out.add(&multiply(&factor, &acc));
        }
    }
    // - sum_i [H^{ct}_{{i}}] . ( (l+d)^2 banana(i; 4 free)
    //   + (l+d)( triangle(i) + chain(2,2) + chain(1,3) + chain(0,4) )
    //   + chain(1,1,2) + chain(0,2,2) - double-banana(center i) )
    for i in 1..=5u32 {
        let others: Vec<u32> = all.iter().copied().filter(|&m| m != i).collect();
        let factor = hyp_pulled_back(&space, &[i].into_iter().collect(), true);
        let b = banana(&[i], &[], 4, 0);
        let mut acc = multiply(&ld2, &stratum_expanded(&space, &b, &Decoration::default(), &others));
        {
            let mut mid = TautClass::zero(&space);
            let tri = StableGraph {
                genus: vec![1, 0, 0],
                legs: vec![
                    (i, 0),
                    (FREE_BASE, 1),
                    (FREE_BASE + 1, 1),
                    (FREE_BASE + 2, 2),
                    (FREE_BASE + 3, 2),
                ],
                edges: vec![(0, 1), (0, 2), (1, 2)],
            };
            mid = mid.add(&stratum_expanded(&space, &tri, &Decoration::default(), &others));
            for shape in [vec![2usize, 2], vec![1, 3], vec![0, 4]] {
                let c = banana_chain(&shape, &[(i, 0)]);
                mid = mid.add(&stratum_expanded(&space, &c, &Decoration::default(), &others));
            }
            acc = acc.add(&multiply(&ld, &mid));
        }
        for shape in [vec![1usize, 1, 2], vec![0, 2, 2]] {
            let c = banana_chain(&shape, &[(i, 0)]);
            acc = acc.add(&stratum_expanded(&space, &c, &Decoration::default(), &others));
        }
        {
            let db = StableGraph {
                genus: vec![0, 0, 0],
                legs: vec![
                    (FREE_BASE, 0),
                    (FREE_BASE + 1, 0),
                    (i, 1),
                    (FREE_BASE + 2, 2),
                    (FREE_BASE + 3, 2),
                ],
                edges: vec![(0, 1), (0, 1), (1, 2), (1, 2)],
            };
            acc = acc.sub(&stratum_expanded(&space, &db, &Decoration::default(), &others));
        }
        out = out.sub(&multiply(&factor, &acc));
    }
    // + (l+d)^3 banana(5 free)
    out = out.add(&multiply(
        &ld3,
        &stratum_expanded(&space, &banana(&[], &[], 5, 0), &Decoration::default(), &all),
    ));
    // + (l+d)^2 ( triangle(3,2) + chain(3,2) + chain(2,3) + chain(1,4) + chain(0,5) )
    {
        let mut mid = TautClass::zero(&space);
        let tri = StableGraph {
            genus: vec![1, 0, 0],
            legs: vec![
                (FREE_BASE, 1),
                (FREE_BASE + 1, 1),
                (FREE_BASE + 2, 1),
                (FREE_BASE + 3, 2),
                (FREE_BASE + 4, 2),
            ],
            edges: vec![(0, 1), (0, 2), (1, 2)],
        };
        mid = mid.add(&stratum_expanded(&space, &tri, &Decoration::default(), &all));
        for shape in [vec![3usize, 2], vec![2, 3], vec![1, 4], vec![0, 5]] {
            let c = banana_chain(&shape, &[]);
            mid = mid.add(&stratum_expanded(&space, &c, &Decoration::default(), &all));
        }
        out = out.add(&multiply(&ld2, &mid));
    }
    // + (l+d) ( eleven graphs, the square entering with a minus )
    {
        let mut mid = TautClass::zero(&space);
        // triangle with a pendant three-leg vertex on the bare corner
        let t1 = StableGraph {
            genus: vec![1, 0, 0, 0],
            legs: vec![
                (FREE_BASE, 2),
                (FREE_BASE + 1, 2),
                (FREE_BASE + 2, 2),
                (FREE_BASE + 3, 3),
                (FREE_BASE + 4, 3),
            ],
            edges: vec![(0, 1), (0, 3), (1, 2), (1, 3)],
        };
        mid = mid.add(&stratum_expanded(&space, &t1, &Decoration::default(), &all));
        // triangle with one corner leg and a pendant two-leg vertex
        let t2 = StableGraph {
            genus: vec![1, 0, 0, 0],
            legs: vec![
                (FREE_BASE, 1),
                (FREE_BASE + 1, 2),
                (FREE_BASE + 2, 2),
                (FREE_BASE + 3, 3),
                (FREE_BASE + 4, 3),
            ],
            edges: vec![(0, 1), (0, 3), (1, 2), (1, 3)],
        };
        mid = mid.add(&stratum_expanded(&space, &t2, &Decoration::default(), &all));
        // banana hub with one leg and branches (free,5) and (free,free)
        let s1 = StableGraph {
            genus: vec![1, 0, 0, 0],
            legs: vec![
                (FREE_BASE, 1),
                (FREE_BASE + 1, 2),
                (5, 2),
                (FREE_BASE + 2, 3),
                (FREE_BASE + 3, 3),
            ],
            edges: vec![(0, 1), (0, 1), (1, 2), (1, 3)],
        };
        mid = mid.add(&stratum_expanded(&space, &s1, &Decoration::default(), &[1, 2, 3, 4]));
        // bare banana hub with branches (free,5) and three free legs
        let s2 = StableGraph {
            genus: vec![1, 0, 0, 0],
            legs: vec![
                (FREE_BASE, 2),
                (5, 2),
                (FREE_BASE + 1, 3),
                (FREE_BASE + 2, 3),
                (FREE_BASE + 3, 3),
            ],
            edges: vec![(0, 1), (0, 1), (1, 2), (1, 3)],
        };
        mid = mid.add(&stratum_expanded(&space, &s2, &Decoration::default(), &[1, 2, 3, 4]));
        // minus the square through the elliptic vertex
        let sq = StableGraph {
            genus: vec![1, 0, 0, 0],
            legs: vec![
                (FREE_BASE, 1),
                (FREE_BASE + 1, 1),
                (FREE_BASE + 2, 2),
                (FREE_BASE + 3, 3),
                (5, 3),
            ],
            edges: vec![(0, 1), (1, 2), (2, 3), (0, 3)],
        };
        mid = mid.sub(&stratum_expanded(&space, &sq, &Decoration::default(), &[1, 2, 3, 4]));
        // six banana chains
        for (shape, fixed) in [
            (vec![1usize, 2, 2], Vec::new()),
            (vec![0, 3, 2], Vec::new()),
            (vec![1, 1, 2], vec![(5u32, 3usize)]),
            (vec![0, 2, 2], vec![(5, 3)]),
            (vec![2, 1, 1], vec![(5, 3)]),
            (vec![1, 1, 2], vec![(5, 1)]),
        ] {
            let c = banana_chain(&shape, &fixed);
            let frees: Vec<u32> = if fixed.is_empty() {
                all.clone()
            } else {
                vec![1, 2, 3, 4]
            };
            mid = mid.add(&stratum_expanded(&space, &c, &Decoration::default(), &frees));
        }
        out = out.add(&multiply(&ld, &mid));
    }
    // the remaining single strata with coefficients -1/4, +3/4, psi terms,
    // and the minus pair of squares
    {
        // pentagon with 5 adjacent to the elliptic vertex
        let p1 = cycle_template(0, &[vec![FREE_BASE], vec![FREE_BASE + 1], vec![FREE_BASE + 2], vec![FREE_BASE + 3, 5]]);
        out = out.sub(&stratum_expanded(&space, &p1, &Decoration::default(), &[1, 2, 3, 4]).scale(&rat(1, 4)));
        // pentagon with 5 in the middle position
        let p2 = cycle_template(0, &[vec![FREE_BASE], vec![FREE_BASE + 1], vec![FREE_BASE + 2, 5], vec![FREE_BASE + 3]]);
        out = out.add(&stratum_expanded(&space, &p2, &Decoration::default(), &[1, 2, 3, 4]).scale(&rat(3, 4)));
        // triangle with pendant, psi on the half toward the far corner
        let q1 = StableGraph {
            genus: vec![1, 0, 0, 0],
            legs: vec![
                (5, 1),
                (FREE_BASE, 2),
                (FREE_BASE + 1, 2),
                (FREE_BASE + 2, 3),
                (FREE_BASE + 3, 3),
            ],
            edges: vec![(0, 1), (0, 3), (1, 2), (1, 3)],
        };
        let mut dq1 = Decoration::default();
        dq1.add_psi(Flag::Half(3, 1), 1);
        out = out.add(&stratum_expanded(&space, &q1, &dq1, &[1, 2, 3, 4]));
        // triangle with pendant, psi on the elliptic edge half
        let q2 = StableGraph {
            genus: vec![1, 0, 0, 0],
            legs: vec![
                (FREE_BASE, 1),
                (FREE_BASE + 1, 2),
                (FREE_BASE + 2, 2),
                (FREE_BASE + 3, 3),
                (5, 3),
            ],
            edges: vec![(0, 1), (0, 3), (1, 2), (1, 3)],
        };
        let mut dq2 = Decoration::default();
        dq2.add_psi(Flag::Half(0, 1), 1);
        out = out.add(&stratum_expanded(&space, &q2, &dq2, &[1, 2, 3, 4]));
        // square through the elliptic vertex with a pendant two-leg vertex
        let sq1 = StableGraph {
            genus: vec![1, 0, 0, 0, 0],
            legs: vec![
                (FREE_BASE, 1),
                (5, 2),
                (FREE_BASE + 1, 4),
                (FREE_BASE + 2, 4),
                (FREE_BASE + 3, 3),
            ],
            edges: vec![(0, 1), (1, 2), (2, 3), (3, 0), (2, 4)],
        };
        out = out.sub(&stratum_expanded(&space, &sq1, &Decoration::default(), &[1, 2, 3, 4]));
        let sq2 = StableGraph {
            genus: vec![1, 0, 0, 0, 0],
            legs: vec![
                (FREE_BASE, 1),
                (FREE_BASE + 1, 2),
                (5, 2),
                (FREE_BASE + 2, 4),
                (FREE_BASE + 3, 4),
            ],
            edges: vec![(0, 1), (1, 2), (2, 3), (3, 0), (3, 4)],
        };
        out = out.sub(&stratum_expanded(&space, &sq2, &Decoration::default(), &[1, 2, 3, 4]));
    }
    // the last two lines: five banana-tree strata
    out = out.add(&nct5_tail());
    out
}

/// The final group of strata in the closed form on five points (the part
/// checked to pair to zero with the two lambda-decorated boundary classes).
pub fn nct5_tail() -> TautClass {
    let space = Space::new(2, 5);
    let mut out = TautClass::zero(&space);
    // hub with branches: c-(free,5), c-(free)-(free,free)
    let g_a = StableGraph {
        genus: vec![1, 0, 0, 0, 0],
        legs: vec![
            (FREE_BASE, 2),
            (5, 2),
            (FREE_BASE + 1, 3),
            (FREE_BASE + 2, 4),
            (FREE_BASE + 3, 4),
        ],
        edges: vec![(0, 1), (0, 1), (1, 2), (1, 3), (3, 4)],
    };
    // hub(free) - mid - {(free,5), (free,free)}
    let g_b = StableGraph {
        genus: vec![1, 0, 0, 0, 0],
        legs: vec![
            (FREE_BASE, 1),
            (FREE_BASE + 1, 3),
            (5, 3),
            (FREE_BASE + 2, 4),
            (FREE_BASE + 3, 4),
        ],
        edges: vec![(0, 1), (0, 1), (1, 2), (2, 3), (2, 4)],
    };
    // hub - mid(free) - {(free,5), (free,free)}
    let g_c = StableGraph {
        genus: vec![1, 0, 0, 0, 0],
        legs: vec![
            (FREE_BASE, 2),
            (FREE_BASE + 1, 3),
            (5, 3),
            (FREE_BASE + 2, 4),
            (FREE_BASE + 3, 4),
        ],
        edges: vec![(0, 1), (0, 1), (1, 2), (2, 3), (2, 4)],
    };
    // chains: hub(free) - (free) - (free) - (free,5)
    let g_d = banana_chain(&[1, 1, 1, 1], &[(5, 4)]);
    // hub - (free,free) - (free) - (free,5)
    let g_e = banana_chain(&[0, 2, 1, 1], &[(5, 4)]);
    for g in [g_a, g_b, g_c, g_d, g_e] {
        out = out.add(&stratum_expanded(&space, &g, &Decoration::default(), &[1, 2, 3, 4]));
    }
    out
}

/// The two lambda-decorated boundary classes of the closing spot check.
pub fn spot_check_classes() -> (TautClass, TautClass) {
    let space = Space::new(2, 5);
    let lam = standard_class(&space, StandardClass::Lambda);
    let t1 = banana(&[4, 5], &[1, 2, 3], 0, 0);
    let t2 = banana(&[3, 4], &[1, 2, 5], 0, 0);
    (
        multiply(&lam, &stratum(&space, &t1)),
        multiply(&lam, &stratum(&space, &t2)),
    )
}

/// Forgets the last marking and relabels n -> n-1, the pushforward used in
/// the recursion checks.
pub fn push_and_relabel(cls: &TautClass, forget: u32, relabel_from: u32) -> TautClass {
    let down = pushforward_forget(cls, forget);
    if relabel_from == forget {
        return down;
    }
    let map: BTreeMap<u32, u32> = [(relabel_from, forget)].into_iter().collect();
    down.relabel(&map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrals::{complementary_generators, pair_with_term};
    use crate::algebra::standard_class;
    use crate::algebra::StandardClass;

    #[test]
    fn one_point_class_matches_formula() {
        // the compact-type formula at one point recovers 3 psi - lambda - delta_1
        let f = hyp_ct_formula(1);
        assert_eq!(f, hyp_one());
        assert_eq!(f, hyp_rt_formula(1));
        assert_eq!(f, hyp_tilde_formula(1, false));
        assert_eq!(f, hyp_recursive(1));
    }

    #[test]
    fn phigamma_two_points() {
        // a single doubled-edge stratum with coefficient one half of the
        // pushforward (the stratum class)
        let p = phigamma(2);
        assert_eq!(p.terms.len(), 1);
        let (t, c) = p.terms.iter().next().unwrap();
        assert_eq!(t.graph.h1(), 1);
        assert_eq!(t.graph.n_vertices(), 2);
        assert_eq!(c, &rat(1, 2));
        assert!(t.dec.psi.is_empty());
        for n in [3u32, 4] {
            assert!(phigamma(n).is_pure_degree(n as i64));
        }
    }

    #[test]
    fn tilde_matches_ct_plus_nct2() {
        let lhs = hyp_tilde_formula(2, false).sub(&hyp_ct_formula(2));
        let rhs = nct_closed(2);
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn omega_on_banana_hub() {
        // on the doubled-edge graph the omega class of a hub leg is psi
        // pulled back keeping the two half-edges
        let g = banana(&[], &[1, 2], 0, 0);
        let (v, cls) = omega_class_on_vertex(&g, Flag::Leg(1));
        assert_eq!(v, 1);
        // the stabilized hub is a rigid three-pointed component, so this
        // omega class vanishes
        assert!(cls.is_zero());
        // for an elliptic leg the site keeps both doubled-edge halves
        let g2 = banana(&[1], &[2], 0, 0);
        let (vstar, _fstar, retained) = omega_site(&g2, Flag::Leg(1));
        assert_eq!(vstar, 0);
        assert_eq!(retained.len(), 3);
        let (_, cls2) = omega_class_on_vertex(&g2, Flag::Leg(1));
        assert!(!cls2.is_zero());
    }

    #[test]
    fn product_of_pullbacks() {
        // degree-1 part on one point: a psi - lambda - delta with no
        // rational-tail divisors
        let sp = Space::new(2, 1);
        let f = prod_formula(2, 1, 3, -1, 1);
        let expect = standard_class(&sp, StandardClass::Psi(1))
            .scale(&rat_i64(3))
            .sub(&standard_class(&sp, StandardClass::Lambda))
            .sub(&standard_class(&sp, StandardClass::DeltaNrt));
        assert_eq!(f, expect);
        // two points: pairing against compact-type generators matches the
        // honest product of the two pullbacks
        let sp2 = Space::new(2, 2);
        let f1 = pullback_one_point_class(&sp2, 1);
        let f2 = pullback_one_point_class(&sp2, 2);
        let direct = multiply(&f1, &f2);
        let graphsum = prod_formula(2, 2, 3, -1, 1);
        let diff = direct.sub(&graphsum);
        let gens = crate::integrals::complementary_generators_filtered(
            &sp2,
            sp2.dim() - 2,
            crate::graphs::GraphFilter::CompactType,
        );
        for t in gens {
            assert!(
                pair_with_term(&diff, &t).is_zero(),
                "compact-type pairing mismatch on {:?}",
                t
            );
        }
    }

    #[test]
    fn recursive_two_points_pushforward() {
        // forgetting one point multiplies the one-point class by five
        let h2 = hyp_recursive(2);
        let down = pushforward_forget(&h2, 2);
        let expect = hyp_recursive(1).scale(&rat_i64(5));
        let diff = down.sub(&expect);
        let sp = Space::new(2, 1);
        for t in complementary_generators(&sp, sp.dim() - 1) {
            assert!(
                pair_with_term(&diff, &t).is_zero(),
                "pushforward mismatch against {:?}",
                t
            );
        }
    }
}
