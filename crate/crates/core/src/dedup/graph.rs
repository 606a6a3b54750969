use std::collections::BTreeMap;

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
    }
}

/// Connected components of the graph whose edges are `pairs`. Singletons
/// never appear. Members are sorted, and components are ordered by their
/// smallest member.
pub fn build_clusters<'a, I>(pairs: I) -> Vec<Vec<String>>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
    let mut edges = Vec::new();
    for (a, b) in pairs {
        let n = ids.len();
        let ia = *ids.entry(a).or_insert(n);
        let n = ids.len();
        let ib = *ids.entry(b).or_insert(n);
        edges.push((ia, ib));
    }
    let mut uf = UnionFind::new(ids.len());
    for (a, b) in edges {
        uf.union(a, b);
    }
    let mut components: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    // BTreeMap iteration is sorted by id, so members arrive in order
    for (id, idx) in &ids {
        let root = uf.find(*idx);
        components.entry(root).or_default().push((*id).to_owned());
    }
    let mut clusters: Vec<Vec<String>> = components.into_values().filter(|c| c.len() > 1).collect();
    clusters.sort();
    clusters
}
