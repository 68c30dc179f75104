//! The block poset: a finite partial order whose downsets are chains,
//! together with block sizes and the index sets derived from it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Non-degeneracy class requested for a poset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize, Default)]
pub enum Kind {
    /// Every maximal block has size at least two.
    #[serde(rename = "KL-A")]
    #[default]
    A,
    /// No restriction on maximal blocks.
    #[serde(rename = "KL-B")]
    B,
}

#[derive(Clone, Debug, Error, PartialEq, Eq, Serialize)]
#[serde(tag = "error")]
pub enum PosetError {
    #[error("the element list is empty")]
    Empty,
    #[error("element `{0}` is listed twice")]
    DuplicateElement(String),
    #[error("element `{0}` has size zero")]
    ZeroSize(String),
    #[error("no size given for element `{0}`")]
    MissingSize(String),
    #[error("cover {index} references unknown element `{name}`")]
    UnknownElement { index: usize, name: String },
    #[error("cover {index} relates `{name}` to itself")]
    SelfCover { index: usize, name: String },
    #[error("the cover relation has a cycle through `{0}`")]
    CycleDetected(String),
    #[error("elements `{a}` and `{b}` are both below `{at}` but incomparable")]
    DownsetNotChain { at: String, a: String, b: String },
    #[error("maximal element `{0}` has size 1 (KL-A needs at least 2)")]
    MaximalBlockTooSmall(String),
    #[error("`{above}` lies in the subset but `{below}` below it does not")]
    NotOpenSubset { above: String, below: String },
    #[error("unknown element `{0}` in subset")]
    UnknownSubsetElement(String),
}

/// A validated block poset.
///
/// Elements are stored in a canonical order: a topological sort of the
/// cover relation with ties broken lexicographically by name.  All
/// enumeration downstream follows this order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Poset {
    names: Vec<String>,
    sizes: Vec<usize>,
    // le[a][b] <=> a ⪯ b
    le: Vec<Vec<bool>>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    offset: Vec<usize>,
    kind: Kind,
}

impl Poset {
    /// Validates the data and builds the poset, collecting every violation.
    pub fn new(
        elements: &[String],
        sizes: &BTreeMap<String, usize>,
        covers: &[(String, String)],
        kind: Kind,
    ) -> Result<Poset, Vec<PosetError>> {
        let mut errs = Vec::new();
        if elements.is_empty() {
            return Err(vec![PosetError::Empty]);
        }
        let mut seen = BTreeSet::new();
        for e in elements {
            if !seen.insert(e.clone()) {
                errs.push(PosetError::DuplicateElement(e.clone()));
            }
            match sizes.get(e) {
                None => errs.push(PosetError::MissingSize(e.clone())),
                Some(0) => errs.push(PosetError::ZeroSize(e.clone())),
                _ => {}
            }
        }
        for (i, (b, a)) in covers.iter().enumerate() {
            for x in [b, a] {
                if !seen.contains(x) {
                    errs.push(PosetError::UnknownElement { index: i, name: x.clone() });
                }
            }
            if a == b {
                errs.push(PosetError::SelfCover { index: i, name: a.clone() });
            }
        }
        if !errs.is_empty() {
            return Err(errs);
        }
        let sized: Vec<(String, usize)> =
            seen.iter().map(|e| (e.clone(), sizes[e])).collect();
        let edges: Vec<(&str, &str)> =
            covers.iter().map(|(b, a)| (b.as_str(), a.as_str())).collect();
        Self::from_parts(&sized, &edges, kind)
    }

    /// Builds a poset from `(name, size)` pairs and `(below, above)` edges,
    /// assuming names are unique and edges reference them.
    pub(crate) fn from_parts(
        sized: &[(String, usize)],
        edges: &[(&str, &str)],
        kind: Kind,
    ) -> Result<Poset, Vec<PosetError>> {
        let k = sized.len();
        let mut by_name: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, (name, _)) in sized.iter().enumerate() {
            by_name.insert(name.as_str(), i);
        }
        let mut succ = vec![BTreeSet::new(); k];
        let mut indeg = vec![0usize; k];
        for &(b, a) in edges {
            let (bi, ai) = (by_name[b], by_name[a]);
            if succ[bi].insert(ai) {
                indeg[ai] += 1;
            }
        }
        // Kahn's algorithm, always taking the lexicographically smallest name.
        let mut ready: BTreeSet<(&str, usize)> = (0..k)
            .filter(|&i| indeg[i] == 0)
            .map(|i| (sized[i].0.as_str(), i))
            .collect();
        let mut order = Vec::with_capacity(k);
        while let Some(&first) = ready.iter().next() {
            ready.remove(&first);
            let i = first.1;
            order.push(i);
            for &j in &succ[i] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.insert((sized[j].0.as_str(), j));
                }
            }
        }
        if order.len() < k {
            let stuck = (0..k).find(|&i| indeg[i] > 0).unwrap();
            return Err(vec![PosetError::CycleDetected(sized[stuck].0.clone())]);
        }
        let mut pos = vec![0; k];
        for (p, &i) in order.iter().enumerate() {
            pos[i] = p;
        }
        let names: Vec<String> = order.iter().map(|&i| sized[i].0.clone()).collect();
        let sizes: Vec<usize> = order.iter().map(|&i| sized[i].1).collect();
        let mut le = vec![vec![false; k]; k];
        for (i, row) in le.iter_mut().enumerate() {
            row[i] = true;
        }
        for (i, s) in succ.iter().enumerate() {
            for &j in s {
                le[pos[i]][pos[j]] = true;
            }
        }
        // Transitive closure; canonical order is topological so one sweep
        // from the top down is enough.
        for b in (0..k).rev() {
            for c in b + 1..k {
                if le[b][c] {
                    for d in c + 1..k {
                        if le[c][d] {
                            le[b][d] = true;
                        }
                    }
                }
            }
        }
        let mut errs = Vec::new();
        let mut parent = vec![None; k];
        for a in 0..k {
            let below: Vec<usize> = (0..a).filter(|&b| le[b][a]).collect();
            let mut chain = true;
            'outer: for (x, &b) in below.iter().enumerate() {
                for &c in &below[x + 1..] {
                    if !le[b][c] && !le[c][b] {
                        errs.push(PosetError::DownsetNotChain {
                            at: names[a].clone(),
                            a: names[b].clone(),
                            b: names[c].clone(),
                        });
                        chain = false;
                        break 'outer;
                    }
                }
            }
            if chain {
                parent[a] = below.last().copied();
            }
        }
        let mut children = vec![Vec::new(); k];
        for a in 0..k {
            if let Some(p) = parent[a] {
                children[p].push(a);
            }
        }
        if kind == Kind::A {
            for a in 0..k {
                let maximal = (0..k).all(|b| b == a || !le[a][b]);
                if maximal && sizes[a] < 2 {
                    errs.push(PosetError::MaximalBlockTooSmall(names[a].clone()));
                }
            }
        }
        if !errs.is_empty() {
            return Err(errs);
        }
        let mut offset = Vec::with_capacity(k);
        let mut acc = 0;
        for &s in &sizes {
            offset.push(acc);
            acc += s;
        }
        Ok(Poset { names, sizes, le, parent, children, offset, kind })
    }

    /// Number of blocks.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Total dimension n = Σ|α|.
    pub fn dim(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    /// Whether every maximal block has size at least two.
    pub fn is_kl_a(&self) -> bool {
        (0..self.len()).all(|a| !self.is_maximal(a) || self.sizes[a] >= 2)
    }

    pub fn name(&self, a: usize) -> &str {
        &self.names[a]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn size(&self, a: usize) -> usize {
        self.sizes[a]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Position of the first index of block `a` in 0..n.
    pub fn offset(&self, a: usize) -> usize {
        self.offset[a]
    }

    /// `a ⪯ b`.
    pub fn le(&self, a: usize, b: usize) -> bool {
        self.le[a][b]
    }

    /// `a ≺ b`.
    pub fn lt(&self, a: usize, b: usize) -> bool {
        a != b && self.le[a][b]
    }

    /// The largest element strictly below `a`.
    pub fn parent(&self, a: usize) -> Option<usize> {
        self.parent[a]
    }

    /// Elements whose parent is `a`.
    pub fn children(&self, a: usize) -> &[usize] {
        &self.children[a]
    }

    pub fn is_minimal(&self, a: usize) -> bool {
        self.parent[a].is_none()
    }

    pub fn is_maximal(&self, a: usize) -> bool {
        self.children[a].is_empty()
    }

    /// Elements strictly below `a`, from the bottom of the chain up.
    pub fn strict_downset(&self, a: usize) -> Vec<usize> {
        let mut v = Vec::new();
        let mut cur = self.parent[a];
        while let Some(p) = cur {
            v.push(p);
            cur = self.parent[p];
        }
        v.reverse();
        v
    }

    /// Elements strictly above `a`, in canonical order.
    pub fn strict_upset(&self, a: usize) -> Vec<usize> {
        (0..self.len()).filter(|&b| self.lt(a, b)).collect()
    }

    /// The minimal element below `a` (possibly `a` itself).
    pub fn root(&self, a: usize) -> usize {
        let mut r = a;
        while let Some(p) = self.parent[r] {
            r = p;
        }
        r
    }

    /// The child of `b` lying on the chain down from `a`, for `b ≺ a`.
    pub fn child_towards(&self, b: usize, a: usize) -> usize {
        debug_assert!(self.lt(b, a));
        let mut cur = a;
        while self.parent[cur] != Some(b) {
            cur = self.parent[cur].expect("b below a");
        }
        cur
    }

    /// Cover pairs `(below, above)` in canonical order.
    pub fn covers(&self) -> Vec<(usize, usize)> {
        (0..self.len()).filter_map(|a| self.parent[a].map(|p| (p, a))).collect()
    }

    /// The index set 𝒥: all `(α, ν)` with `0 ≤ ν ≤ |α|`, block by block.
    pub fn index_j(&self) -> Vec<(usize, usize)> {
        let mut v = Vec::with_capacity(self.dim() + self.len());
        for a in 0..self.len() {
            for nu in 0..=self.sizes[a] {
                v.push((a, nu));
            }
        }
        v
    }

    /// Position of `(a, nu)` in [`Poset::index_j`].
    pub fn j_position(&self, a: usize, nu: usize) -> usize {
        self.offset[a] + a + nu
    }

    /// All sections ι in lexicographic order (first block varies slowest).
    pub fn sections(&self) -> Vec<Section> {
        let k = self.len();
        let mut out = Vec::new();
        let mut cur = vec![0usize; k];
        loop {
            out.push(Section(cur.clone()));
            let mut i = k;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if cur[i] < self.sizes[i] {
                    cur[i] += 1;
                    for c in cur.iter_mut().skip(i + 1) {
                        *c = 0;
                    }
                    break;
                }
            }
        }
    }

    /// Number of sections, Π(|α|+1).
    pub fn section_count(&self) -> usize {
        self.sizes.iter().map(|s| s + 1).product()
    }

    /// Connected components, each given by its minimal element and members.
    pub fn components(&self) -> Vec<Component> {
        let mut comps: Vec<Component> = Vec::new();
        for a in 0..self.len() {
            let r = self.root(a);
            match comps.iter_mut().find(|c| c.minimal == self.names[r]) {
                Some(c) => c.members.push(self.names[a].clone()),
                None => comps.push(Component {
                    minimal: self.names[r].clone(),
                    members: vec![self.names[a].clone()],
                }),
            }
        }
        comps
    }

    /// The induced sub-poset on the named elements (which may be empty).
    pub fn induced(&self, members: &[usize]) -> Poset {
        let set: BTreeSet<usize> = members.iter().copied().collect();
        let sized: Vec<(String, usize)> =
            set.iter().map(|&a| (self.names[a].clone(), self.sizes[a])).collect();
        // Covers of the induced order: a ≺ b both inside, nothing inside between.
        let mut edges = Vec::new();
        for &a in &set {
            for &b in &set {
                if self.lt(a, b) && !set.iter().any(|&c| self.lt(a, c) && self.lt(c, b)) {
                    edges.push((self.names[a].as_str(), self.names[b].as_str()));
                }
            }
        }
        if set.is_empty() {
            return Poset {
                names: vec![],
                sizes: vec![],
                le: vec![],
                parent: vec![],
                children: vec![],
                offset: vec![],
                kind: Kind::B,
            };
        }
        Poset::from_parts(&sized, &edges, Kind::B).expect("induced order of a valid poset")
    }

    /// Splits into an open (downward closed) part and its complement.
    pub fn split(&self, subset: &[String]) -> Result<Split, PosetError> {
        let mut inside = vec![false; self.len()];
        for s in subset {
            let a = self
                .index_of(s)
                .ok_or_else(|| PosetError::UnknownSubsetElement(s.clone()))?;
            inside[a] = true;
        }
        for b in 0..self.len() {
            if !inside[b] {
                continue;
            }
            for g in 0..self.len() {
                if self.lt(g, b) && !inside[g] {
                    return Err(PosetError::NotOpenSubset {
                        above: self.names[b].clone(),
                        below: self.names[g].clone(),
                    });
                }
            }
        }
        let a1: Vec<usize> = (0..self.len()).filter(|&a| inside[a]).collect();
        let a2: Vec<usize> = (0..self.len()).filter(|&a| !inside[a]).collect();
        let bridges = self
            .covers()
            .into_iter()
            .filter(|&(b, a)| inside[b] && !inside[a])
            .map(|(b, a)| (self.names[b].clone(), self.names[a].clone()))
            .collect();
        let open = self.induced(&a1);
        let rest = self.induced(&a2);
        let open_components = open.components();
        let rest_components = rest.components();
        Ok(Split { open, rest, open_components, rest_components, bridges, kind: self.kind })
    }

    /// Cover pairs by name, in canonical order.
    pub fn cover_names(&self) -> Vec<(String, String)> {
        self.covers()
            .into_iter()
            .map(|(b, a)| (self.names[b].clone(), self.names[a].clone()))
            .collect()
    }
}

impl fmt::Display for Poset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = (0..self.len())
            .map(|a| format!("{}:{}", self.names[a], self.sizes[a]))
            .collect();
        write!(f, "{{{}}}", parts.join(", "))?;
        for (b, a) in self.covers() {
            write!(f, " {}<{}", self.names[b], self.names[a])?;
        }
        Ok(())
    }
}

/// A choice of one excluded index per block.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Section(pub Vec<usize>);

impl Section {
    /// 𝒥(ι) as positions into [`Poset::index_j`].
    pub fn cone(&self, poset: &Poset) -> Vec<usize> {
        poset
            .index_j()
            .iter()
            .enumerate()
            .filter(|(_, &(a, nu))| self.0[a] != nu)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn degree(&self) -> usize {
        self.0.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Component {
    pub minimal: String,
    pub members: Vec<String>,
}

/// Result of [`Poset::split`].
#[derive(Clone, Debug)]
pub struct Split {
    pub open: Poset,
    pub rest: Poset,
    pub open_components: Vec<Component>,
    pub rest_components: Vec<Component>,
    /// Covers running from the open part into the rest.
    pub bridges: Vec<(String, String)>,
    kind: Kind,
}

impl Split {
    /// Rebuilds the original poset from both halves and the bridging covers.
    pub fn remerge(&self) -> Result<Poset, Vec<PosetError>> {
        let mut sizes = BTreeMap::new();
        let mut elements = Vec::new();
        for p in [&self.open, &self.rest] {
            for a in 0..p.len() {
                elements.push(p.name(a).to_string());
                sizes.insert(p.name(a).to_string(), p.size(a));
            }
        }
        let mut covers = self.open.cover_names();
        covers.extend(self.rest.cover_names());
        covers.extend(self.bridges.iter().cloned());
        Poset::new(&elements, &sizes, &covers, self.kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(spec: &[(&str, usize)], covers: &[(&str, &str)], kind: Kind) -> Result<Poset, Vec<PosetError>> {
        let elements: Vec<String> = spec.iter().map(|(n, _)| n.to_string()).collect();
        let sizes = spec.iter().map(|(n, s)| (n.to_string(), *s)).collect();
        let covers: Vec<(String, String)> =
            covers.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        Poset::new(&elements, &sizes, &covers, kind)
    }

    #[test]
    fn single_block() {
        let p = build(&[("a", 2)], &[], Kind::A).unwrap();
        assert_eq!(p.dim(), 2);
        assert!(p.is_kl_a());
        assert_eq!(p.sections().len(), 3);
    }

    #[test]
    fn diamond_rejected() {
        let e = build(&[("b", 1), ("g", 1), ("a", 2)], &[("b", "a"), ("g", "a")], Kind::B).unwrap_err();
        assert!(matches!(e[0], PosetError::DownsetNotChain { .. }));
    }

    #[test]
    fn kl_a_flag() {
        assert!(build(&[("b", 1), ("a", 1)], &[("b", "a")], Kind::B).is_ok());
        let e = build(&[("b", 1), ("a", 1)], &[("b", "a")], Kind::A).unwrap_err();
        assert_eq!(e, vec![PosetError::MaximalBlockTooSmall("a".into())]);
    }

    #[test]
    fn cycle_detected() {
        let e = build(&[("x", 1), ("y", 1)], &[("x", "y"), ("y", "x")], Kind::B).unwrap_err();
        assert!(matches!(e[0], PosetError::CycleDetected(_)));
    }

    #[test]
    fn unknown_cover_reported() {
        let e = build(&[("x", 1)], &[("x", "q")], Kind::B).unwrap_err();
        assert_eq!(e, vec![PosetError::UnknownElement { index: 0, name: "q".into() }]);
    }

    #[test]
    fn canonical_order_is_topological() {
        let p = build(&[("z", 1), ("a", 2)], &[("z", "a")], Kind::A).unwrap();
        assert_eq!(p.names(), &["z".to_string(), "a".to_string()]);
        assert_eq!(p.parent(1), Some(0));
        assert_eq!(p.offset(1), 1);
    }

    #[test]
    fn section_counts() {
        let p = build(&[("b", 1), ("a", 2)], &[("b", "a")], Kind::A).unwrap();
        let s = p.sections();
        assert_eq!(s.len(), 6);
        assert_eq!(s[0], Section(vec![0, 0]));
        assert_eq!(s[1], Section(vec![0, 1]));
        assert_eq!(build(&[("a", 1)], &[], Kind::B).unwrap().sections().len(), 2);
        for sec in &s {
            assert_eq!(sec.cone(&p).len(), p.dim());
        }
    }

    #[test]
    fn transitive_parent() {
        let p = build(&[("a", 1), ("b", 1), ("c", 2)], &[("a", "b"), ("b", "c")], Kind::A).unwrap();
        let c = p.index_of("c").unwrap();
        assert_eq!(p.parent(c), p.index_of("b"));
        assert_eq!(p.strict_downset(c).len(), 2);
        assert_eq!(p.root(c), p.index_of("a").unwrap());
        assert_eq!(p.child_towards(0, c), 1);
    }

    #[test]
    fn split_cases() {
        let p = build(&[("b", 1), ("a", 2)], &[("b", "a")], Kind::A).unwrap();
        let s = p.split(&["b".into()]).unwrap();
        assert_eq!(s.rest.len(), 1);
        assert!(s.rest.is_minimal(0));
        assert_eq!(
            p.split(&["a".into()]).unwrap_err(),
            PosetError::NotOpenSubset { above: "a".into(), below: "b".into() }
        );
        let t = build(&[("b", 1), ("a1", 2), ("a2", 2)], &[("b", "a1"), ("b", "a2")], Kind::A).unwrap();
        let s = t.split(&["b".into()]).unwrap();
        assert_eq!(s.rest_components.len(), 2);
        assert_eq!(s.remerge().unwrap(), t);
    }
}
