//! BIRCH: a single-pass clustering-feature (CF) tree condenses the rows into
//! leaf subclusters, which are then merged with Ward linkage down to `k`
//! clusters. Rows are finally assigned to the nearest merged centroid.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::{nearest_all, sq_dist, ClusterMethod, ClusterModel};
use crate::error::{Error, Result};

const MAX_REBUILDS: usize = 5;
const THRESHOLD_SAMPLE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BirchParams {
    pub k: usize,
    pub branching: usize,
    /// Subcluster radius bound; `None` picks half the mean nearest-neighbor
    /// distance over an evenly spaced sample of at most 100 rows.
    pub threshold: Option<f64>,
}

impl Default for BirchParams {
    fn default() -> Self {
        BirchParams {
            k: 2,
            branching: 50,
            threshold: None,
        }
    }
}

/// Clustering feature: count, linear sum and sum of squared norms.
#[derive(Debug, Clone)]
struct Cf {
    n: f64,
    ls: Array1<f64>,
    ss: f64,
}

impl Cf {
    fn point(x: ArrayView1<'_, f64>) -> Self {
        Cf {
            n: 1.0,
            ls: x.to_owned(),
            ss: x.dot(&x),
        }
    }

    fn centroid(&self) -> Array1<f64> {
        &self.ls / self.n
    }

    fn add(&mut self, other: &Cf) {
        self.n += other.n;
        self.ls += &other.ls;
        self.ss += other.ss;
    }

    fn merged_radius(&self, other: &Cf) -> f64 {
        let n = self.n + other.n;
        let ls = &self.ls + &other.ls;
        let ss = self.ss + other.ss;
        (ss / n - ls.dot(&ls) / (n * n)).max(0.0).sqrt()
    }
}

#[derive(Debug)]
enum Node {
    Leaf(Vec<Cf>),
    Inner(Vec<(Cf, usize)>),
}

struct CfTree {
    nodes: Vec<Node>,
    root: usize,
    branching: usize,
    threshold: f64,
}

fn closest<'a>(cfs: impl Iterator<Item = &'a Cf>, x: &Array1<f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, cf) in cfs.enumerate() {
        let d = sq_dist(cf.centroid().view(), x.view());
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

/// Splits `items` around the two entries with the farthest-apart centroids.
fn split_entries<T>(items: Vec<T>, cf: impl Fn(&T) -> &Cf) -> (Vec<T>, Vec<T>) {
    let cents: Vec<Array1<f64>> = items.iter().map(|t| cf(t).centroid()).collect();
    let mut seeds = (0, 1, -1.0);
    for i in 0..cents.len() {
        for j in i + 1..cents.len() {
            let d = sq_dist(cents[i].view(), cents[j].view());
            if d > seeds.2 {
                seeds = (i, j, d);
            }
        }
    }
    let (a, b, _) = seeds;
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (i, item) in items.into_iter().enumerate() {
        let to_left = if i == a {
            true
        } else if i == b {
            false
        } else {
            sq_dist(cents[i].view(), cents[a].view()) <= sq_dist(cents[i].view(), cents[b].view())
        };
        if to_left {
            left.push(item);
        } else {
            right.push(item);
        }
    }
    (left, right)
}

fn summarize<'a>(cfs: impl Iterator<Item = &'a Cf>) -> Cf {
    let mut it = cfs;
    let mut acc = it.next().expect("node is non-empty").clone();
    for cf in it {
        acc.add(cf);
    }
    acc
}

impl CfTree {
    fn new(branching: usize, threshold: f64) -> Self {
        CfTree {
            nodes: vec![Node::Leaf(Vec::new())],
            root: 0,
            branching,
            threshold,
        }
    }

    fn insert(&mut self, x: ArrayView1<'_, f64>) {
        let point = Cf::point(x);
        if let Some((left_cf, right_cf, right)) = self.insert_at(self.root, &point) {
            let old_root = self.root;
            self.nodes
                .push(Node::Inner(vec![(left_cf, old_root), (right_cf, right)]));
            self.root = self.nodes.len() - 1;
        }
    }

    /// Inserts into the subtree at `idx`. On overflow the node keeps one half
    /// and a new sibling gets the other; returns both summaries and the
    /// sibling's index.
    fn insert_at(&mut self, idx: usize, point: &Cf) -> Option<(Cf, Cf, usize)> {
        let x = point.centroid();
        let descend = match &mut self.nodes[idx] {
            Node::Leaf(entries) => {
                if entries.is_empty() {
                    entries.push(point.clone());
                } else {
                    let c = closest(entries.iter(), &x);
                    if entries[c].merged_radius(point) <= self.threshold {
                        entries[c].add(point);
                    } else {
                        entries.push(point.clone());
                    }
                }
                None
            }
            Node::Inner(entries) => {
                let c = closest(entries.iter().map(|(cf, _)| cf), &x);
                entries[c].0.add(point);
                Some((c, entries[c].1))
            }
        };
        if let Some((c, child)) = descend {
            if let Some((left_cf, right_cf, right)) = self.insert_at(child, point) {
                let Node::Inner(entries) = &mut self.nodes[idx] else {
                    unreachable!()
                };
                entries[c].0 = left_cf;
                entries.insert(c + 1, (right_cf, right));
            }
        }
        let overflow = match &self.nodes[idx] {
            Node::Leaf(entries) => entries.len() > self.branching,
            Node::Inner(entries) => entries.len() > self.branching,
        };
        if !overflow {
            return None;
        }

        let node = std::mem::replace(&mut self.nodes[idx], Node::Leaf(Vec::new()));
        let (left, right, left_cf, right_cf) = match node {
            Node::Leaf(entries) => {
                let (l, r) = split_entries(entries, |cf| cf);
                let (lc, rc) = (summarize(l.iter()), summarize(r.iter()));
                (Node::Leaf(l), Node::Leaf(r), lc, rc)
            }
            Node::Inner(entries) => {
                let (l, r) = split_entries(entries, |(cf, _)| cf);
                let (lc, rc) = (
                    summarize(l.iter().map(|(cf, _)| cf)),
                    summarize(r.iter().map(|(cf, _)| cf)),
                );
                (Node::Inner(l), Node::Inner(r), lc, rc)
            }
        };
        self.nodes[idx] = left;
        self.nodes.push(right);
        Some((left_cf, right_cf, self.nodes.len() - 1))
    }

    /// Leaf subclusters in depth-first order.
    fn leaves(&self) -> Vec<Cf> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(idx) = stack.pop() {
            match &self.nodes[idx] {
                Node::Leaf(entries) => out.extend(entries.iter().cloned()),
                Node::Inner(entries) => stack.extend(entries.iter().rev().map(|(_, c)| *c)),
            }
        }
        out
    }
}

fn auto_threshold(data: ArrayView2<'_, f64>) -> f64 {
    let n = data.nrows();
    let take = n.min(THRESHOLD_SAMPLE);
    if take < 2 {
        return 0.0;
    }
    let rows: Vec<usize> = (0..take).map(|i| i * n / take).collect();
    let sample = data.select(Axis(0), &rows);
    let total: f64 = (0..take)
        .map(|i| {
            (0..take)
                .filter(|&j| j != i)
                .map(|j| sq_dist(sample.row(i), sample.row(j)))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .sum();
    0.5 * total / take as f64
}

/// Ward agglomeration of weighted centroids down to `k` groups. Returns the
/// merged centroids ordered by the smallest original subcluster index they
/// contain.
fn ward_merge(subclusters: &[Cf], k: usize) -> Array2<f64> {
    struct Group {
        n: f64,
        centroid: Array1<f64>,
        first: usize,
    }
    let mut groups: Vec<Option<Group>> = subclusters
        .iter()
        .enumerate()
        .map(|(i, cf)| {
            Some(Group {
                n: cf.n,
                centroid: cf.centroid(),
                first: i,
            })
        })
        .collect();
    let m = groups.len();
    let cost = |a: &Group, b: &Group| {
        a.n * b.n / (a.n + b.n) * sq_dist(a.centroid.view(), b.centroid.view())
    };
    let mut d = vec![f64::INFINITY; m * m];
    for i in 0..m {
        for j in i + 1..m {
            d[i * m + j] = cost(groups[i].as_ref().unwrap(), groups[j].as_ref().unwrap());
        }
    }
    let mut alive = m;
    while alive > k {
        let mut best = (0, 0, f64::INFINITY);
        for i in 0..m {
            if groups[i].is_none() {
                continue;
            }
            for j in i + 1..m {
                if groups[j].is_some() && d[i * m + j] < best.2 {
                    best = (i, j, d[i * m + j]);
                }
            }
        }
        let (i, j, _) = best;
        let b = groups[j].take().unwrap();
        let a = groups[i].as_mut().unwrap();
        let n = a.n + b.n;
        a.centroid = (&a.centroid * a.n + &b.centroid * b.n) / n;
        a.n = n;
        a.first = a.first.min(b.first);
        alive -= 1;
        let a = groups[i].as_ref().unwrap();
        for o in 0..m {
            if o == i {
                continue;
            }
            if let Some(g) = groups[o].as_ref() {
                let (lo, hi) = if o < i { (o, i) } else { (i, o) };
                d[lo * m + hi] = cost(a, g);
            }
        }
    }
    let mut kept: Vec<Group> = groups.into_iter().flatten().collect();
    kept.sort_by_key(|g| g.first);
    let dim = kept[0].centroid.len();
    let mut out = Array2::zeros((kept.len(), dim));
    for (r, g) in kept.iter().enumerate() {
        out.row_mut(r).assign(&g.centroid);
    }
    out
}

pub fn birch_fit(data: ArrayView2<'_, f64>, params: BirchParams) -> Result<ClusterModel> {
    let n = data.nrows();
    if params.k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    if params.k > n {
        return Err(Error::KTooLarge { k: params.k, rows: n });
    }
    if params.branching < 2 {
        return Err(Error::InvalidInput("branching factor must be at least 2".into()));
    }
    let mut threshold = match params.threshold {
        Some(t) if t >= 0.0 => t,
        Some(t) => return Err(Error::InvalidInput(format!("negative threshold {t}"))),
        None => auto_threshold(data),
    };

    let mut attempt = 0;
    let leaves = loop {
        let mut tree = CfTree::new(params.branching, threshold);
        for row in data.rows() {
            tree.insert(row);
        }
        let leaves = tree.leaves();
        if leaves.len() >= params.k {
            break leaves;
        }
        if attempt == MAX_REBUILDS {
            return Err(Error::Infeasible(format!(
                "only {} leaf subclusters after {MAX_REBUILDS} threshold halvings, need k = {}",
                leaves.len(),
                params.k
            )));
        }
        attempt += 1;
        threshold /= 2.0;
    };

    let centroids = ward_merge(&leaves, params.k);
    let model = ClusterModel::from_centroids(ClusterMethod::Birch, centroids, data, 0);
    debug_assert_eq!(model.assignments, nearest_all(&model.centroids, data));
    Ok(model)
}
