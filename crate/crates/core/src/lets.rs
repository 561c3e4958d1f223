//! Leafless elementary trapping sets (LETSs): representation, exhaustive
//! enumeration, canonical structure ids and layer profiles.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code_model::{LayerPermutation, TannerGraph};
use crate::error::{Error, Result};

/// A check node of degree two inside the set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MisCheck {
    pub cn: usize,
    pub vns: [usize; 2],
}

/// A check node of degree one inside the set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UnsatCheck {
    pub cn: usize,
    pub vn: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Lets {
    pub vns: Vec<usize>,
    pub misatisfied: Vec<MisCheck>,
    pub unsatisfied: Vec<UnsatCheck>,
}

impl Lets {
    /// Builds the induced subgraph of `vns` and checks the LETS conditions.
    pub fn from_vns(g: &TannerGraph, vns: &[usize]) -> Result<Self> {
        let mut vns = vns.to_vec();
        vns.sort_unstable();
        vns.dedup();
        if vns.is_empty() {
            return Err(Error::NotLets("empty set".into()));
        }
        let mut touched: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &v in &vns {
            if v >= g.n() {
                return Err(Error::NotLets(format!("VN {} out of range", v + 1)));
            }
            for &c in g.vn_cns(v) {
                touched.entry(c).or_default().push(v);
            }
        }
        let mut misatisfied = Vec::new();
        let mut unsatisfied = Vec::new();
        for (cn, list) in touched {
            match list.as_slice() {
                [v] => unsatisfied.push(UnsatCheck { cn, vn: *v }),
                [a, b] => misatisfied.push(MisCheck { cn, vns: [*a, *b] }),
                _ => {
                    return Err(Error::NotLets(format!(
                        "CN {} has {} neighbours in the set",
                        cn + 1,
                        list.len()
                    )))
                }
            }
        }
        let lets = Self { vns, misatisfied, unsatisfied };
        for &v in &lets.vns {
            if lets.mis_degree(v) < 2 {
                return Err(Error::NotLets(format!("VN {} is a leaf", v + 1)));
            }
        }
        Ok(lets)
    }

    pub fn a(&self) -> usize {
        self.vns.len()
    }
    pub fn b(&self) -> usize {
        self.unsatisfied.len()
    }
    pub fn class(&self) -> (usize, usize) {
        (self.a(), self.b())
    }
    /// Number of state variables: two per missatisfied CN.
    pub fn num_states(&self) -> usize {
        2 * self.misatisfied.len()
    }

    pub fn local_index(&self, v: usize) -> Option<usize> {
        self.vns.binary_search(&v).ok()
    }

    pub fn mis_degree(&self, v: usize) -> usize {
        self.misatisfied.iter().filter(|m| m.vns.contains(&v)).count()
    }

    pub fn is_connected(&self) -> bool {
        let a = self.a();
        let mut parent: Vec<usize> = (0..a).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        for m in &self.misatisfied {
            let (i, j) = (self.local_index(m.vns[0]).unwrap(), self.local_index(m.vns[1]).unwrap());
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            parent[ri] = rj;
        }
        let r0 = find(&mut parent, 0);
        (0..a).all(|i| find(&mut parent, i) == r0)
    }

    /// Every VN has exactly two missatisfied CNs and the set is connected.
    pub fn is_simple_cycle(&self) -> bool {
        self.vns.iter().all(|&v| self.mis_degree(v) == 2) && self.is_connected()
    }

    /// Image under the cyclic shift of every VN by `s` within its circulant.
    pub fn shifted(&self, g: &TannerGraph, s: usize) -> Self {
        let vns: Vec<usize> = self.vns.iter().map(|&v| g.shift_vn(v, s)).collect();
        Self::from_vns(g, &vns).expect("QC shift maps a LETS to a LETS")
    }

    /// Canonical structure id: minimal adjacency signature over relabelings.
    pub fn structure_id(&self) -> String {
        let a = self.a();
        let mut adj = vec![vec![false; a]; a];
        for m in &self.misatisfied {
            let (i, j) = (self.local_index(m.vns[0]).unwrap(), self.local_index(m.vns[1]).unwrap());
            adj[i][j] = true;
            adj[j][i] = true;
        }
        let labels: Vec<usize> = self
            .vns
            .iter()
            .map(|&v| self.unsatisfied.iter().filter(|u| u.vn == v).count())
            .collect();
        let (order, bits) = canonical_order(&adj, &labels);
        let lab: Vec<String> = order.iter().map(|&i| labels[i].to_string()).collect();
        let mut hex = String::new();
        for chunk in bits.chunks(4) {
            let nib = chunk.iter().enumerate().fold(0u8, |acc, (k, &b)| acc | (u8::from(b) << (3 - k)));
            hex.push(char::from_digit(nib as u32, 16).unwrap());
        }
        format!("{}-{}:{}:{}", self.a(), self.b(), lab.join(""), hex)
    }
}

/// Colour refinement followed by exhaustive search within colour classes.
/// Returns the chosen vertex order and the upper-triangle adjacency bits.
fn canonical_order(adj: &[Vec<bool>], labels: &[usize]) -> (Vec<usize>, Vec<bool>) {
    let n = adj.len();
    let mut colour: Vec<usize> = (0..n)
        .map(|i| labels[i] * 64 + adj[i].iter().filter(|&&x| x).count())
        .collect();
    loop {
        let mut sig: Vec<(usize, Vec<usize>, usize)> = (0..n)
            .map(|i| {
                let mut nb: Vec<usize> = (0..n).filter(|&j| adj[i][j]).map(|j| colour[j]).collect();
                nb.sort_unstable();
                (colour[i], nb, i)
            })
            .collect();
        sig.sort();
        let mut next = vec![0; n];
        let mut rank = 0;
        for k in 0..n {
            if k > 0 && (sig[k].0 != sig[k - 1].0 || sig[k].1 != sig[k - 1].1) {
                rank += 1;
            }
            next[sig[k].2] = rank;
        }
        let classes = |c: &[usize]| c.iter().collect::<HashSet<_>>().len();
        let done = classes(&next) == classes(&colour);
        colour = next;
        if done {
            break;
        }
    }
    let mut best: Option<(Vec<bool>, Vec<usize>)> = None;
    let mut cur = Vec::with_capacity(n);
    let mut used = vec![false; n];
    let mut sorted_colours = colour.clone();
    sorted_colours.sort_unstable();
    fn bits_of(adj: &[Vec<bool>], order: &[usize]) -> Vec<bool> {
        let mut bits = Vec::new();
        for i in 0..order.len() {
            for j in i + 1..order.len() {
                bits.push(adj[order[i]][order[j]]);
            }
        }
        bits
    }
    fn rec(
        adj: &[Vec<bool>],
        colour: &[usize],
        sorted_colours: &[usize],
        cur: &mut Vec<usize>,
        used: &mut [bool],
        best: &mut Option<(Vec<bool>, Vec<usize>)>,
    ) {
        let n = adj.len();
        if cur.len() == n {
            let bits = bits_of(adj, cur);
            if best.as_ref().is_none_or(|(b, _)| bits < *b) {
                *best = Some((bits, cur.clone()));
            }
            return;
        }
        let want = sorted_colours[cur.len()];
        for v in 0..n {
            if !used[v] && colour[v] == want {
                used[v] = true;
                cur.push(v);
                rec(adj, colour, sorted_colours, cur, used, best);
                cur.pop();
                used[v] = false;
            }
        }
    }
    rec(adj, &colour, &sorted_colours, &mut cur, &mut used, &mut best);
    let (bits, order) = best.unwrap_or_default();
    (order, bits)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnumerationConfig {
    pub a_max: usize,
    pub b_max: usize,
    /// Maximum number of candidate VN sets visited before giving up.
    pub state_budget: u64,
    /// Restrict search roots to one VN per circulant and expand orbits.
    pub use_symmetry: bool,
}

impl EnumerationConfig {
    pub fn new(a_max: usize, b_max: usize) -> Self {
        Self { a_max, b_max, state_budget: 100_000_000, use_symmetry: true }
    }
}

struct Search<'a> {
    g: &'a TannerGraph,
    a_max: usize,
    b_max: usize,
    d_max: usize,
    budget: u64,
    counter: &'a AtomicU64,
    deg: Vec<u8>,
    marked: Vec<bool>,
    touched: Vec<usize>,
    set: Vec<usize>,
    n_marked: usize,
    found: Vec<Vec<usize>>,
    local_steps: u64,
}

impl Search<'_> {
    fn tick(&mut self) -> Result<()> {
        self.local_steps += 1;
        if self.local_steps == 4096 {
            let total = self.counter.fetch_add(self.local_steps, Ordering::Relaxed) + self.local_steps;
            self.local_steps = 0;
            if total > self.budget {
                return Err(Error::BudgetExceeded(self.budget));
            }
        }
        Ok(())
    }

    fn add(&mut self, v: usize) {
        self.set.push(v);
        for &c in self.g.vn_cns(v) {
            if self.deg[c] == 0 {
                self.touched.push(c);
            }
            self.deg[c] += 1;
        }
    }

    fn remove(&mut self, v: usize) {
        self.set.pop();
        for &c in self.g.vn_cns(v) {
            self.deg[c] -= 1;
        }
        self.touched.retain(|&c| self.deg[c] > 0);
    }

    fn can_add(&self, w: usize) -> bool {
        !self.set.contains(&w)
            && self.g.vn_cns(w).iter().all(|&c| self.deg[c] == 0 || (self.deg[c] == 1 && !self.marked[c]))
    }

    /// Closure search: pick the lowest open CN and either declare it
    /// unsatisfied or add one of its neighbours.
    fn run(&mut self) -> Result<()> {
        let mut open = 0usize;
        let mut first_open = usize::MAX;
        for &c in &self.touched {
            if self.deg[c] == 1 && !self.marked[c] {
                open += 1;
                first_open = first_open.min(c);
            }
        }
        let room = self.a_max - self.set.len();
        if open == 0 {
            if self.set.len() >= 2 && self.is_leafless() {
                let mut s = self.set.clone();
                s.sort_unstable();
                self.found.push(s);
            }
            return Ok(());
        }
        if open > (self.b_max - self.n_marked) + room * self.d_max {
            return Ok(());
        }
        let c = first_open;
        if self.n_marked < self.b_max {
            let v = *self.g.cn_vns(c).iter().find(|&&v| self.set.contains(&v)).unwrap();
            let unsat_at_v = self.g.vn_cns(v).iter().filter(|&&c2| self.marked[c2]).count();
            if self.g.vn_degree(v) - unsat_at_v > 2 {
                self.marked[c] = true;
                self.n_marked += 1;
                self.run()?;
                self.n_marked -= 1;
                self.marked[c] = false;
            }
        }
        if room > 0 {
            for &w in self.g.cn_vns(c) {
                if self.can_add(w) {
                    self.tick()?;
                    self.add(w);
                    self.run()?;
                    self.remove(w);
                }
            }
        }
        Ok(())
    }

    fn is_leafless(&self) -> bool {
        self.set.iter().all(|&v| self.g.vn_cns(v).iter().filter(|&&c| self.deg[c] == 2).count() >= 2)
    }
}

/// A set of LETSs with lookup by VN support.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Catalog {
    pub entries: Vec<Lets>,
    /// Candidate VN sets visited by the enumerator (0 when loaded from a file).
    #[serde(skip)]
    pub search_states: u64,
    #[serde(skip)]
    index: HashMap<Vec<usize>, usize>,
}

impl Catalog {
    pub fn new(mut entries: Vec<Lets>) -> Self {
        entries.sort_by(|x, y| (x.a(), x.b(), &x.vns).cmp(&(y.a(), y.b(), &y.vns)));
        let index = entries.iter().enumerate().map(|(i, l)| (l.vns.clone(), i)).collect();
        Self { entries, index, search_states: 0 }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn class_counts(&self) -> BTreeMap<(usize, usize), usize> {
        let mut m = BTreeMap::new();
        for l in &self.entries {
            *m.entry(l.class()).or_insert(0) += 1;
        }
        m
    }

    pub fn of_class(&self, a: usize, b: usize) -> Vec<&Lets> {
        self.entries.iter().filter(|l| l.class() == (a, b)).collect()
    }

    /// Index of the LETS whose VN set equals `support` (sorted).
    pub fn find(&self, support: &[usize]) -> Option<usize> {
        if self.index.len() != self.entries.len() {
            return self.entries.iter().position(|l| l.vns == support);
        }
        self.index.get(support).copied()
    }

    /// One LETS per line, 1-based VN indices.
    pub fn to_ts_list(&self) -> String {
        let mut s = String::new();
        for l in &self.entries {
            let v: Vec<String> = l.vns.iter().map(|x| (x + 1).to_string()).collect();
            s.push_str(&v.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn from_ts_list(g: &TannerGraph, text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let vns = line
                .split_whitespace()
                .map(|t| match t.parse::<usize>() {
                    Ok(x) if x >= 1 => Ok(x - 1),
                    _ => Err(Error::CodeFormat { line: i + 1, msg: format!("bad VN index '{t}'") }),
                })
                .collect::<Result<Vec<_>>>()?;
            entries.push(Lets::from_vns(g, &vns)?);
        }
        Ok(Self::new(entries))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.entries)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(Self::new(serde_json::from_str(text)?))
    }
}

/// Exhaustive search for connected LETSs with `a <= a_max` and `b <= b_max`.
pub fn enumerate_lets(g: &TannerGraph, cfg: &EnumerationConfig) -> Result<Catalog> {
    if cfg.a_max < 2 {
        return Ok(Catalog::default());
    }
    let symmetric = cfg.use_symmetry && g.is_quasi_cyclic();
    let roots: Vec<usize> = if symmetric {
        (0..g.num_vn_types()).map(|t| t * g.lift()).collect()
    } else {
        (0..g.n()).collect()
    };
    let d_max = (0..g.n()).map(|v| g.vn_degree(v)).max().unwrap_or(0);
    let counter = AtomicU64::new(0);
    let per_root: Vec<Vec<Vec<usize>>> = roots
        .par_iter()
        .map(|&root| {
            let mut s = Search {
                g,
                a_max: cfg.a_max,
                b_max: cfg.b_max,
                d_max,
                budget: cfg.state_budget,
                counter: &counter,
                deg: vec![0; g.m()],
                marked: vec![false; g.m()],
                touched: Vec::new(),
                set: Vec::new(),
                n_marked: 0,
                found: Vec::new(),
                local_steps: 0,
            };
            s.add(root);
            s.run()?;
            counter.fetch_add(s.local_steps, Ordering::Relaxed);
            Ok(s.found)
        })
        .collect::<Result<_>>()?;
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut entries = Vec::new();
    for set in per_root.into_iter().flatten() {
        let shifts = if symmetric { g.lift() } else { 1 };
        for s in 0..shifts {
            let mut img: Vec<usize> = set.iter().map(|&v| g.shift_vn(v, s)).collect();
            img.sort_unstable();
            if seen.insert(img.clone()) {
                entries.push(Lets::from_vns(g, &img)?);
            }
        }
    }
    let mut cat = Catalog::new(entries);
    cat.search_states = counter.load(Ordering::Relaxed);
    Ok(cat)
}

/// Layer-profile entry of one CN of the set.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProfileEntry {
    Mis { cn_type: usize, layer: usize, external_types: Vec<usize> },
    Unsat { cn_type: usize, layer: usize, vn_type: usize },
}

/// TS layer profile: the sorted multiset of per-CN entries.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Tslp(pub Vec<ProfileEntry>);

pub fn compute_tslp(g: &TannerGraph, lets: &Lets, perm: &LayerPermutation) -> Tslp {
    let mut entries = Vec::new();
    for m in &lets.misatisfied {
        let mut external_types: Vec<usize> = g
            .cn_vns(m.cn)
            .iter()
            .filter(|v| !m.vns.contains(v))
            .map(|&v| g.vn_type(v))
            .collect();
        external_types.sort_unstable();
        entries.push(ProfileEntry::Mis {
            cn_type: g.cn_type(m.cn),
            layer: g.cn_layer(m.cn, perm),
            external_types,
        });
    }
    for u in &lets.unsatisfied {
        entries.push(ProfileEntry::Unsat {
            cn_type: g.cn_type(u.cn),
            layer: g.cn_layer(u.cn, perm),
            vn_type: g.vn_type(u.vn),
        });
    }
    entries.sort();
    Tslp(entries)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TslpGroup {
    pub structure_id: String,
    pub tslp: Tslp,
    /// Indices into the input slice.
    pub members: Vec<usize>,
}

/// Groups LETSs by (structure id, TSLP). Structure ids are computed once
/// per QC orbit.
pub fn group_by_tslp(g: &TannerGraph, sets: &[&Lets], perm: &LayerPermutation) -> Vec<TslpGroup> {
    group_by_tslp_with(g, sets, &structure_ids(g, sets), perm)
}

/// Structure id of every set, computed once per QC orbit.
pub fn structure_ids(g: &TannerGraph, sets: &[&Lets]) -> Vec<String> {
    let mut sid_cache: HashMap<Vec<usize>, String> = HashMap::new();
    sets.iter()
        .map(|l| sid_cache.entry(orbit_key(g, l)).or_insert_with(|| l.structure_id()).clone())
        .collect()
}

/// [`group_by_tslp`] with precomputed structure ids.
pub fn group_by_tslp_with(g: &TannerGraph, sets: &[&Lets], ids: &[String], perm: &LayerPermutation) -> Vec<TslpGroup> {
    let mut groups: BTreeMap<(String, Tslp), Vec<usize>> = BTreeMap::new();
    for (i, l) in sets.iter().enumerate() {
        groups.entry((ids[i].clone(), compute_tslp(g, l, perm))).or_default().push(i);
    }
    groups
        .into_iter()
        .map(|((structure_id, tslp), members)| TslpGroup { structure_id, tslp, members })
        .collect()
}

/// Lexicographically smallest VN list among the cyclic shifts.
pub fn orbit_key(g: &TannerGraph, l: &Lets) -> Vec<usize> {
    if !g.is_quasi_cyclic() {
        return l.vns.clone();
    }
    (0..g.lift())
        .map(|s| {
            let mut v: Vec<usize> = l.vns.iter().map(|&v| g.shift_vn(v, s)).collect();
            v.sort_unstable();
            v
        })
        .min()
        .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes;
    use proptest::prelude::*;

    fn tanner() -> TannerGraph {
        TannerGraph::from_exponents(&codes::tanner_155())
    }

    /// Independent oracle: checks every 5-subset of the 2-neighbourhood of
    /// VN 0 by brute force.
    #[test]
    fn tanner_five_three_matches_brute_force_around_root() {
        let g = tanner();
        let cat = enumerate_lets(&g, &EnumerationConfig::new(5, 3)).unwrap();
        let mut ball: Vec<usize> = Vec::new();
        for &c in g.vn_cns(0) {
            for &v in g.cn_vns(c) {
                for &c2 in g.vn_cns(v) {
                    ball.extend_from_slice(g.cn_vns(c2));
                }
            }
        }
        ball.sort_unstable();
        ball.dedup();
        ball.retain(|&v| v != 0);
        let mut brute = 0;
        let k = 4;
        let idx: Vec<usize> = (0..ball.len()).collect();
        let mut comb: Vec<usize> = (0..k).collect();
        loop {
            let mut set = vec![0];
            set.extend(comb.iter().map(|&i| ball[idx[i]]));
            if let Ok(l) = Lets::from_vns(&g, &set) {
                if l.class() == (5, 3) && l.is_connected() {
                    brute += 1;
                }
            }
            let mut i = k;
            while i > 0 && comb[i - 1] == ball.len() - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            comb[i - 1] += 1;
            for j in i..k {
                comb[j] = comb[j - 1] + 1;
            }
        }
        let found = cat.of_class(5, 3).iter().filter(|l| l.vns.contains(&0)).count();
        assert!(brute > 0);
        assert_eq!(found, brute);
    }

    #[test]
    fn from_vns_rejects_leaves_and_non_elementary() {
        let g = tanner();
        assert!(matches!(Lets::from_vns(&g, &[0]), Err(Error::NotLets(_))));
        let c = g.vn_cns(0)[0];
        let trio: Vec<usize> = g.cn_vns(c)[..3].to_vec();
        assert!(Lets::from_vns(&g, &trio).is_err());
    }

    #[test]
    fn structure_id_is_label_invariant() {
        let g = tanner();
        let cat = enumerate_lets(&g, &EnumerationConfig::new(5, 3)).unwrap();
        let ids: HashSet<String> = cat.of_class(5, 3).iter().map(|l| l.structure_id()).collect();
        assert_eq!(ids.len(), 1);
        let l = cat.of_class(5, 3)[0];
        assert_eq!(l.shifted(&g, 7).structure_id(), l.structure_id());
    }

    #[test]
    fn ts_list_and_json_round_trip() {
        let g = tanner();
        let cat = enumerate_lets(&g, &EnumerationConfig::new(5, 3)).unwrap();
        let back = Catalog::from_ts_list(&g, &cat.to_ts_list()).unwrap();
        assert_eq!(back.entries, cat.entries);
        let back = Catalog::from_json(&cat.to_json().unwrap()).unwrap();
        assert_eq!(back.entries, cat.entries);
        assert_eq!(back.find(&cat.entries[3].vns), Some(3));
    }

    #[test]
    fn budget_is_enforced() {
        let g = tanner();
        let cfg = EnumerationConfig { state_budget: 10, ..EnumerationConfig::new(6, 4) };
        assert!(matches!(enumerate_lets(&g, &cfg), Err(Error::BudgetExceeded(10))));
    }

    #[test]
    fn symmetry_reduction_matches_full_search() {
        let g = tanner();
        let full = enumerate_lets(&g, &EnumerationConfig { use_symmetry: false, ..EnumerationConfig::new(5, 3) }).unwrap();
        let sym = enumerate_lets(&g, &EnumerationConfig::new(5, 3)).unwrap();
        assert_eq!(full.entries, sym.entries);
    }

    #[test]
    fn tslp_of_type_pair_check() {
        // A type-1 CN joining VNs of types 1 and 3 has externals {2,4,5}, and
        // the type-1 VN then carries its unsatisfied CN in row block 2.
        let g = tanner();
        let cat = enumerate_lets(&g, &EnumerationConfig::new(5, 3)).unwrap();
        let perm = LayerPermutation::identity(3);
        let hit = cat.of_class(5, 3).into_iter().find_map(|l| {
            let m = l.misatisfied.iter().find(|m| {
                let mut t = [g.vn_type(m.vns[0]), g.vn_type(m.vns[1])];
                t.sort_unstable();
                g.cn_type(m.cn) == 0 && t == [0, 2]
            })?;
            let v4 = *m.vns.iter().find(|&&v| g.vn_type(v) == 0)?;
            let u = l.unsatisfied.iter().find(|u| u.vn == v4)?;
            Some((l.clone(), *u))
        });
        let (l, u) = hit.expect("a matching (5,3) set exists");
        let tslp = compute_tslp(&g, &l, &perm);
        assert!(tslp.0.contains(&ProfileEntry::Mis { cn_type: 0, layer: 0, external_types: vec![1, 3, 4] }));
        assert_eq!(g.cn_type(u.cn), 1);
        assert!(tslp.0.contains(&ProfileEntry::Unsat { cn_type: 1, layer: 1, vn_type: 0 }));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn enumerated_sets_satisfy_definition(idx in 0usize..10_000) {
            let g = tanner();
            let cat = enumerate_lets(&g, &EnumerationConfig::new(6, 4)).unwrap();
            let l = &cat.entries[idx % cat.len()];
            let re = Lets::from_vns(&g, &l.vns).unwrap();
            prop_assert_eq!(&re, l);
            prop_assert!(l.is_connected());
            prop_assert_eq!(l.num_states(), l.vns.iter().map(|&v| g.vn_degree(v)).sum::<usize>() - l.b());
            prop_assert!(cat.find(&l.shifted(&g, idx % 31).vns).is_some());
        }
    }
}
