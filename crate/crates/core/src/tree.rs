//! Decision trees grown by maximizing the significance of detection.
//!
//! Two split criteria are supported:
//!
//! * [`Criterion::LiMa`] scores a split by the larger of the two signed side
//!   significances. A low-significance side can be discarded (it becomes a
//!   negative leaf) or refined further down.
//! * [`Criterion::Noisy`] scores a split by the sum of the squared side
//!   significances, which rewards balanced partitions.
//!
//! Rows with `x[j] <= theta` go left.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_for, Rng, Stream};
use crate::significance::{midpoint, CountPair, SignificanceConfig};
use crate::table::{EventTable, Region};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    LiMa,
    Noisy,
}

impl Criterion {
    /// Criterion-consistent value of an unsplit node. For the one-sided
    /// criterion a node without excess is worth 0: a split has to reveal an
    /// excess on some side to be kept.
    fn node_value(self, sigma: f64) -> f64 {
        match self {
            Criterion::LiMa => sigma.max(0.0),
            Criterion::Noisy => sigma * sigma,
        }
    }

    pub fn split_score(self, left_sigma: f64, right_sigma: f64) -> f64 {
        match self {
            Criterion::LiMa => left_sigma.max(right_sigma),
            Criterion::Noisy => left_sigma * left_sigma + right_sigma * right_sigma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    pub feature: usize,
    pub theta: f64,
    pub score: f64,
    pub left_sigma: f64,
    pub right_sigma: f64,
}

/// Best split of `rows` over the features in `feature_subset`.
///
/// Every midpoint between consecutive distinct values of each feature is a
/// candidate. Ties go to the lowest feature index, then the smallest
/// threshold. Returns `None` when no feature takes two distinct values.
/// Unlabeled rows contribute to neither side's counts.
pub fn best_split(
    table: &EventTable,
    rows: &[usize],
    cfg: &SignificanceConfig,
    criterion: Criterion,
    feature_subset: &[usize],
) -> Option<SplitCandidate> {
    let total = table.counts(rows);
    let mut features = feature_subset.to_vec();
    features.sort_unstable();
    features.dedup();

    let mut column: Vec<(f64, u8)> = Vec::with_capacity(rows.len());
    let mut best = None;
    for &j in &features {
        column.clear();
        column.extend(rows.iter().map(|&i| (table.value(i, j), region_tag(table.region(i)))));
        column.sort_by(|a, b| a.0.total_cmp(&b.0));
        scan_sorted(&column, j, total, cfg, criterion, &mut best);
    }
    best
}

const TAG_ON: u8 = 1;
const TAG_OFF: u8 = 2;

fn region_tag(region: Region) -> u8 {
    match region {
        Region::On => TAG_ON,
        Region::Off(_) => TAG_OFF,
        Region::Unlabeled => 0,
    }
}

/// Region composition of the rows sharing one feature value.
#[derive(Clone, Copy)]
struct Group {
    end: usize,
    on: f64,
    off: f64,
}

impl Group {
    fn read(column: &[(f64, u8)], start: usize) -> Self {
        let value = column[start].0;
        let mut g = Group {
            end: start,
            on: 0.0,
            off: 0.0,
        };
        while g.end < column.len() && column[g.end].0 == value {
            match column[g.end].1 {
                TAG_ON => g.on += 1.0,
                TAG_OFF => g.off += 1.0,
                _ => {}
            }
            g.end += 1;
        }
        g
    }

    /// Both groups hold rows of one and the same region type.
    fn same_pure_tag(self, next: Group) -> bool {
        (self.off == 0.0 && next.off == 0.0 && self.on > 0.0 && next.on > 0.0)
            || (self.on == 0.0 && next.on == 0.0 && self.off > 0.0 && next.off > 0.0)
    }
}

/// Sweeps one feature column sorted by value, updating `best` with every
/// strictly better midpoint split.
///
/// While consecutive value groups add rows of a single region type, the
/// side counts move along a line on which both criteria are strictly
/// quasi-convex (one side's significance falls while the other's rises, and
/// the squared statistic is strictly convex off pure nodes). Candidates
/// strictly inside such a run can never win, so only run ends are scored.
fn scan_sorted(
    column: &[(f64, u8)],
    feature: usize,
    total: CountPair,
    cfg: &SignificanceConfig,
    criterion: Criterion,
    best: &mut Option<SplitCandidate>,
) {
    if column.is_empty() {
        return;
    }
    let mut left = CountPair::ZERO;
    let mut group = Group::read(column, 0);
    let mut first = true;
    while group.end < column.len() {
        left.n_on += group.on;
        left.n_off += group.off;
        let next = Group::read(column, group.end);
        let last = next.end == column.len();
        let interior = !first && !last && group.same_pure_tag(next);
        first = false;
        if !interior {
            let right = CountPair {
                n_on: total.n_on - left.n_on,
                n_off: total.n_off - left.n_off,
            };
            let left_sigma = cfg.sigma(left);
            let right_sigma = cfg.sigma(right);
            let score = criterion.split_score(left_sigma, right_sigma);
            if best.as_ref().is_none_or(|b| score > b.score) {
                *best = Some(SplitCandidate {
                    feature,
                    theta: midpoint(column[group.end - 1].0, column[group.end].0),
                    score,
                    left_sigma,
                    right_sigma,
                });
            }
        }
        group = next;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Node {
    Split {
        feature: usize,
        theta: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        label: bool,
        counts: CountPair,
        sigma: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: usize,
    /// Number of features drawn afresh at every split; all when `None`.
    pub feature_subsample: Option<usize>,
}

impl TreeParams {
    pub fn new(criterion: Criterion, max_depth: usize) -> Self {
        TreeParams {
            criterion,
            max_depth,
            feature_subsample: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigTree {
    /// Arena in pre-order; node 0 is the root.
    nodes: Vec<Node>,
    n_features: usize,
    params: TreeParams,
    seed: u64,
}

/// Grows a tree over a fixed training sample. Every feature is sorted once;
/// a node owns the same index range `lo..hi` in each per-feature ordering,
/// and splitting partitions those ranges stably.
/// Rows of a table sorted by each feature, shared by the trees of a forest.
#[derive(Debug, Clone)]
pub struct FeatureOrder {
    rows: Vec<Vec<u32>>,
}

impl FeatureOrder {
    pub fn new(table: &EventTable) -> Self {
        let rows = (0..table.n_features())
            .map(|j| {
                let mut idx: Vec<u32> = (0..table.n_rows() as u32).collect();
                idx.sort_unstable_by(|&a, &b| {
                    table
                        .value(a as usize, j)
                        .total_cmp(&table.value(b as usize, j))
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect();
        FeatureOrder { rows }
    }
}

struct Grower<'a> {
    cfg: &'a SignificanceConfig,
    params: TreeParams,
    rng: Rng,
    nodes: Vec<Node>,
    n: usize,
    d: usize,
    /// Feature-major values of the sample: `values[j * n + p]`.
    values: Vec<f64>,
    tags: Vec<u8>,
    /// Feature-major orderings of sample positions.
    order: Vec<u32>,
    goes_left: Vec<bool>,
    scratch: Vec<u32>,
    column: Vec<(f64, u8)>,
}

impl<'a> Grower<'a> {
    fn new(
        table: &EventTable,
        rows: &[usize],
        presorted: Option<&FeatureOrder>,
        cfg: &'a SignificanceConfig,
        params: TreeParams,
        seed: u64,
    ) -> Self {
        let (n, d) = (rows.len(), table.n_features());
        let mut values = Vec::with_capacity(n * d);
        for j in 0..d {
            values.extend(rows.iter().map(|&i| table.value(i, j)));
        }
        let mut order = Vec::with_capacity(n * d);
        match presorted {
            Some(sorted) => {
                // sample positions grouped by table row, ascending within a row
                let mut start = vec![0u32; table.n_rows() + 1];
                for &i in rows {
                    start[i + 1] += 1;
                }
                for i in 0..table.n_rows() {
                    start[i + 1] += start[i];
                }
                let mut fill = start.clone();
                let mut positions = vec![0u32; n];
                for (p, &i) in rows.iter().enumerate() {
                    positions[fill[i] as usize] = p as u32;
                    fill[i] += 1;
                }
                for j in 0..d {
                    for &i in &sorted.rows[j] {
                        order.extend_from_slice(&positions[start[i as usize] as usize..start[i as usize + 1] as usize]);
                    }
                }
            }
            None => {
                for j in 0..d {
                    let col = &values[j * n..(j + 1) * n];
                    let mut idx: Vec<u32> = (0..n as u32).collect();
                    idx.sort_unstable_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                    order.extend(idx);
                }
            }
        }
        Grower {
            cfg,
            params,
            rng: rng_for(seed, Stream::Tree, 0),
            nodes: Vec::new(),
            n,
            d,
            values,
            tags: rows.iter().map(|&i| region_tag(table.region(i))).collect(),
            order,
            goes_left: vec![false; n],
            scratch: Vec::with_capacity(n),
            column: Vec::with_capacity(n),
        }
    }

    fn segment(&self, j: usize, lo: usize, hi: usize) -> &[u32] {
        &self.order[j * self.n + lo..j * self.n + hi]
    }

    fn counts(&self, lo: usize, hi: usize) -> CountPair {
        let mut c = CountPair::ZERO;
        for &p in self.segment(0, lo, hi) {
            match self.tags[p as usize] {
                TAG_ON => c.n_on += 1.0,
                TAG_OFF => c.n_off += 1.0,
                _ => {}
            }
        }
        c
    }

    fn best_split(&mut self, lo: usize, hi: usize, features: &[usize], total: CountPair) -> Option<SplitCandidate> {
        let mut features = features.to_vec();
        features.sort_unstable();
        features.dedup();
        let mut best = None;
        let mut column = std::mem::take(&mut self.column);
        for &j in &features {
            column.clear();
            let vals = &self.values[j * self.n..(j + 1) * self.n];
            column.extend(
                self.segment(j, lo, hi)
                    .iter()
                    .map(|&p| (vals[p as usize], self.tags[p as usize])),
            );
            scan_sorted(&column, j, total, self.cfg, self.params.criterion, &mut best);
        }
        self.column = column;
        best
    }

    fn grow(&mut self, lo: usize, hi: usize, depth: usize) -> usize {
        let counts = self.counts(lo, hi);
        let sigma = self.cfg.sigma(counts);
        let idx = self.nodes.len();
        self.nodes.push(Node::Leaf {
            label: sigma > 0.0,
            counts,
            sigma,
        });
        // a pure node cannot improve under either criterion
        if depth >= self.params.max_depth || hi - lo < 2 || counts.n_on == 0.0 || counts.n_off == 0.0 {
            return idx;
        }

        let features: Vec<usize> = match self.params.feature_subsample {
            Some(m) if m < self.d => sample(&mut self.rng, self.d, m.max(1)).into_vec(),
            _ => (0..self.d).collect(),
        };
        let Some(split) = self.best_split(lo, hi, &features, counts) else {
            return idx;
        };
        // written so that a NaN score also makes a leaf
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(split.score > self.params.criterion.node_value(sigma)) {
            return idx;
        }

        let f = split.feature;
        let mut n_left = 0;
        for k in lo..hi {
            let p = self.order[f * self.n + k] as usize;
            let left = self.values[f * self.n + p] <= split.theta;
            self.goes_left[p] = left;
            n_left += usize::from(left);
        }
        for j in 0..self.d {
            let seg = &mut self.order[j * self.n + lo..j * self.n + hi];
            self.scratch.clear();
            let mut w = 0;
            for r in 0..seg.len() {
                let p = seg[r];
                if self.goes_left[p as usize] {
                    seg[w] = p;
                    w += 1;
                } else {
                    self.scratch.push(p);
                }
            }
            seg[w..].copy_from_slice(&self.scratch);
        }

        let mid = lo + n_left;
        let left = self.grow(lo, mid, depth + 1);
        let right = self.grow(mid, hi, depth + 1);
        self.nodes[idx] = Node::Split {
            feature: f,
            theta: split.theta,
            left,
            right,
        };
        idx
    }
}

impl SigTree {
    /// Grows a tree on every labeled row of `table`.
    pub fn fit(table: &EventTable, cfg: &SignificanceConfig, params: TreeParams, seed: u64) -> Result<Self> {
        Self::fit_rows(table, &table.labeled_rows(), cfg, params, seed)
    }

    /// Grows a tree on the given rows; duplicates count repeatedly and
    /// unlabeled rows are ignored.
    pub fn fit_rows(
        table: &EventTable,
        rows: &[usize],
        cfg: &SignificanceConfig,
        params: TreeParams,
        seed: u64,
    ) -> Result<Self> {
        Self::grow_rows(table, rows, None, cfg, params, seed)
    }

    /// As [`SigTree::fit_rows`], reusing feature orderings of the whole table.
    pub fn fit_rows_presorted(
        table: &EventTable,
        rows: &[usize],
        order: &FeatureOrder,
        cfg: &SignificanceConfig,
        params: TreeParams,
        seed: u64,
    ) -> Result<Self> {
        if order.rows.len() != table.n_features() || order.rows.first().is_some_and(|r| r.len() != table.n_rows()) {
            return Err(Error::invalid("feature order does not match the table"));
        }
        Self::grow_rows(table, rows, Some(order), cfg, params, seed)
    }

    fn grow_rows(
        table: &EventTable,
        rows: &[usize],
        order: Option<&FeatureOrder>,
        cfg: &SignificanceConfig,
        params: TreeParams,
        seed: u64,
    ) -> Result<Self> {
        let rows: Vec<usize> = rows.iter().copied().filter(|&i| table.region(i).is_labeled()).collect();
        if rows.is_empty() {
            return Err(Error::invalid("cannot grow a tree without labeled rows"));
        }
        let mut grower = Grower::new(table, &rows, order, cfg, params, seed);
        grower.grow(0, rows.len(), 0);
        Ok(SigTree {
            nodes: grower.nodes,
            n_features: table.n_features(),
            params,
            seed,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn params(&self) -> TreeParams {
        self.params
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn depth(&self) -> usize {
        fn depth_of(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + depth_of(nodes, *left).max(depth_of(nodes, *right)),
            }
        }
        depth_of(&self.nodes, 0)
    }

    /// Index of the leaf a feature vector is routed to.
    pub fn leaf_of(&self, features: &[f64]) -> Result<usize> {
        if features.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: features.len(),
            });
        }
        Ok(self.leaf_unchecked(features))
    }

    #[inline]
    fn leaf_unchecked(&self, features: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    theta,
                    left,
                    right,
                } => i = if features[*feature] <= *theta { *left } else { *right },
            }
        }
    }

    pub fn predict(&self, features: &[f64]) -> Result<bool> {
        let leaf = self.leaf_of(features)?;
        Ok(self.leaf_label(leaf))
    }

    #[inline]
    pub(crate) fn predict_unchecked(&self, features: &[f64]) -> bool {
        self.leaf_label(self.leaf_unchecked(features))
    }

    fn leaf_label(&self, i: usize) -> bool {
        match &self.nodes[i] {
            Node::Leaf { label, .. } => *label,
            Node::Split { .. } => unreachable!("routing ends at a leaf"),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(Error::invalid("tree has no nodes"));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::Split {
                feature,
                theta,
                left,
                right,
            } = node
            {
                if *feature >= self.n_features
                    || !theta.is_finite()
                    || *left <= i
                    || *right <= i
                    || *left >= n
                    || *right >= n
                {
                    return Err(Error::invalid(format!("malformed split node {i}")));
                }
            }
        }
        Ok(())
    }
}
