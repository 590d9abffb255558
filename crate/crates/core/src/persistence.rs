//! Persistent homology of the superlevel-set filtration `{x : u(x) >= t}` of a
//! 2D field, in dimensions 0 and 1.
//!
//! The filtration is vertex based: a pixel enters at its own value, edges
//! between 4-neighbors and 2x2 squares enter at the minimum of their
//! vertices. Pixels are swept in the total order (value descending, linear
//! index ascending).
//!
//! * Dimension 0 is a union-find sweep with the elder rule: when two
//!   components meet, the one born later in the sweep dies.
//! * Dimension 1 uses planar duality. A hole of the superlevel set is a
//!   bounded 8-connected component of the complement `{u < t}`. Sweeping the
//!   pixels in reverse order with 8-connectivity and a virtual exterior node
//!   (attached to every border pixel) turns each hole into a sublevel
//!   component: it is born at an interior minimum (the hole's death) and dies
//!   when it reaches the exterior or an older background component through a
//!   saddle pixel (the hole's birth).
//!
//! Pairs with zero persistence are dropped.

use std::fmt::Write as _;

use crate::grid::{PixelIndex, ScalarField};

/// One bar of the diagram. For finite pairs `birth > death`, the birth pixel
/// carries the birth value and the death pixel the death value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PersistencePair {
    pub dim: usize,
    pub birth: f64,
    /// `-inf` for essential pairs.
    pub death: f64,
    pub birth_pixel: PixelIndex,
    pub death_pixel: Option<PixelIndex>,
    pub essential: bool,
}

impl PersistencePair {
    /// `birth - death`; infinite for essential pairs.
    pub fn persistence(&self) -> f64 {
        if self.essential {
            f64::INFINITY
        } else {
            self.birth - self.death
        }
    }

    /// Alive at threshold `t` under the superlevel convention `b >= t > d`.
    pub fn alive_at(&self, t: f64) -> bool {
        self.birth >= t && (self.essential || t > self.death)
    }
}

/// Pairs sorted by dimension, then persistence descending, then birth value
/// descending, then birth pixel linear index ascending. Essential pairs have
/// infinite persistence and therefore lead their dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct PersistenceDiagram {
    width: usize,
    height: usize,
    pairs: Vec<PersistencePair>,
}

impl PersistenceDiagram {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pairs(&self) -> &[PersistencePair] {
        &self.pairs
    }

    /// Pairs of dimension `k`, in diagram order.
    pub fn dim(&self, k: usize) -> impl Iterator<Item = &PersistencePair> + '_ {
        self.pairs.iter().filter(move |p| p.dim == k)
    }

    /// `|I_k|`: number of non-essential pairs in dimension `k`.
    pub fn finite_count(&self, k: usize) -> usize {
        self.dim(k).filter(|p| !p.essential).count()
    }

    /// CSV with header
    /// `dim,birth,death,birth_row,birth_col,death_row,death_col,essential`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for p in &self.pairs {
            write_pair_row(&mut out, p);
            out.push('\n');
        }
        out
    }
}

pub const CSV_HEADER: &str = "dim,birth,death,birth_row,birth_col,death_row,death_col,essential";

/// Writes one pair as CSV fields (no trailing newline).
pub(crate) fn write_pair_row(out: &mut String, p: &PersistencePair) {
    let death = if p.essential {
        "-inf".to_string()
    } else {
        format!("{}", p.death)
    };
    let (dr, dc) = match p.death_pixel {
        Some(z) => (z.row.to_string(), z.col.to_string()),
        None => (String::new(), String::new()),
    };
    let _ = write!(
        out,
        "{},{},{},{},{},{},{},{}",
        p.dim, p.birth, death, p.birth_pixel.row, p.birth_pixel.col, dr, dc, p.essential
    );
}

/// Number of dimension-`k` pairs alive at `t` (`b >= t > d`, essential pairs
/// whenever `b >= t`). This is the Betti number of `{u >= t}`.
pub fn betti_at_threshold(diagram: &PersistenceDiagram, t: f64, k: usize) -> usize {
    diagram.dim(k).filter(|p| p.alive_at(t)).count()
}

/// Split of the finite dimension-`k` pairs around a target Betti number.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CriticalSplit {
    /// Finite pairs among the first `beta` in diagram order: kept alive.
    pub encouraged: Vec<PersistencePair>,
    /// All remaining finite pairs: driven to zero persistence.
    pub penalized: Vec<PersistencePair>,
}

/// Ranks dimension-`k` pairs in diagram order and keeps the first `beta`.
///
/// Essential pairs take part in the ranking (they come first, with infinite
/// persistence) so that a target of `beta_0 = 1` keeps exactly the global
/// component, but they never appear in either output list: their death pixel
/// does not exist.
pub fn critical_sets(diagram: &PersistenceDiagram, k: usize, beta: usize) -> CriticalSplit {
    let mut split = CriticalSplit::default();
    for (rank, pair) in diagram.dim(k).enumerate() {
        if pair.essential {
            continue;
        }
        if rank < beta {
            split.encouraged.push(*pair);
        } else {
            split.penalized.push(*pair);
        }
    }
    split
}

/// Sweep order: value descending, linear index ascending.
pub(crate) fn sweep_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_unstable_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

pub fn compute_superlevel_persistence(field: &ScalarField) -> PersistenceDiagram {
    let (w, h) = field.shape();
    let values = field.values();
    let order = sweep_order(values);

    let mut pairs = zero_dim_pairs(values, w, h, &order);
    pairs.extend(one_dim_pairs(values, w, h, &order));
    pairs.sort_by(|a, b| {
        a.dim
            .cmp(&b.dim)
            .then(b.persistence().total_cmp(&a.persistence()))
            .then(b.birth.total_cmp(&a.birth))
            .then(a.birth_pixel.linear(w).cmp(&b.birth_pixel.linear(w)))
    });
    PersistenceDiagram {
        width: w,
        height: h,
        pairs,
    }
}

fn zero_dim_pairs(values: &[f64], w: usize, h: usize, order: &[usize]) -> Vec<PersistencePair> {
    let n = values.len();
    let mut rank = vec![0usize; n];
    for (pos, &p) in order.iter().enumerate() {
        rank[p] = pos;
    }
    let mut sets = DisjointSet::new(n);
    // birth pixel of the oldest member, indexed by root
    let mut elder: Vec<usize> = (0..n).collect();
    let mut present = vec![false; n];
    let mut pairs = Vec::new();
    let mut neighbors = Vec::with_capacity(4);

    for &p in order {
        present[p] = true;
        four_neighbors(p, w, h, &mut neighbors);
        for &q in &neighbors {
            if !present[q] {
                continue;
            }
            let (rp, rq) = (sets.find(p), sets.find(q));
            if rp == rq {
                continue;
            }
            let (old, young) = if rank[elder[rp]] < rank[elder[rq]] {
                (rp, rq)
            } else {
                (rq, rp)
            };
            let born = elder[young];
            let (b, d) = (values[born], values[p]);
            if b > d {
                // lower endpoint of the merging edge; ties go to the smaller index
                let z = if values[p] < values[q] { p } else { p.min(q) };
                pairs.push(PersistencePair {
                    dim: 0,
                    birth: b,
                    death: d,
                    birth_pixel: PixelIndex::from_linear(born, w),
                    death_pixel: Some(PixelIndex::from_linear(z, w)),
                    essential: false,
                });
            }
            let keep = elder[old];
            let root = sets.union(rp, rq);
            elder[root] = keep;
        }
    }

    let root = sets.find(order[0]);
    let top = elder[root];
    pairs.push(PersistencePair {
        dim: 0,
        birth: values[top],
        death: f64::NEG_INFINITY,
        birth_pixel: PixelIndex::from_linear(top, w),
        death_pixel: None,
        essential: true,
    });
    pairs
}

fn one_dim_pairs(values: &[f64], w: usize, h: usize, order: &[usize]) -> Vec<PersistencePair> {
    let n = values.len();
    let exterior = n;
    // Reverse sweep; smaller rank means older. The exterior is older than
    // every pixel.
    let mut rank = vec![0usize; n + 1];
    for (pos, &p) in order.iter().rev().enumerate() {
        rank[p] = pos + 1;
    }
    rank[exterior] = 0;
    let mut sets = DisjointSet::new(n + 1);
    let mut elder: Vec<usize> = (0..=n).collect();
    let mut present = vec![false; n + 1];
    present[exterior] = true;
    let mut pairs = Vec::new();
    let mut neighbors = Vec::with_capacity(9);

    for &p in order.iter().rev() {
        present[p] = true;
        eight_neighbors(p, w, h, &mut neighbors);
        let (row, col) = (p / w, p % w);
        if row == 0 || col == 0 || row == h - 1 || col == w - 1 {
            neighbors.push(exterior);
        }
        for &q in &neighbors {
            if !present[q] {
                continue;
            }
            let (rp, rq) = (sets.find(p), sets.find(q));
            if rp == rq {
                continue;
            }
            let (old, young) = if rank[elder[rp]] < rank[elder[rq]] {
                (rp, rq)
            } else {
                (rq, rp)
            };
            let minimum = elder[young];
            let (b, d) = (values[p], values[minimum]);
            if b > d {
                pairs.push(PersistencePair {
                    dim: 1,
                    birth: b,
                    death: d,
                    birth_pixel: PixelIndex::from_linear(p, w),
                    death_pixel: Some(PixelIndex::from_linear(minimum, w)),
                    essential: false,
                });
            }
            let keep = elder[old];
            let root = sets.union(rp, rq);
            elder[root] = keep;
        }
    }
    pairs
}

fn four_neighbors(p: usize, w: usize, h: usize, out: &mut Vec<usize>) {
    out.clear();
    let (row, col) = (p / w, p % w);
    if row > 0 {
        out.push(p - w);
    }
    if col > 0 {
        out.push(p - 1);
    }
    if col + 1 < w {
        out.push(p + 1);
    }
    if row + 1 < h {
        out.push(p + w);
    }
}

fn eight_neighbors(p: usize, w: usize, h: usize, out: &mut Vec<usize>) {
    out.clear();
    let (row, col) = (p / w, p % w);
    for r in row.saturating_sub(1)..=(row + 1).min(h - 1) {
        for c in col.saturating_sub(1)..=(col + 1).min(w - 1) {
            if r != row || c != col {
                out.push(r * w + c);
            }
        }
    }
}

/// Union by rank with path compression.
#[derive(Clone, Debug)]
struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut node: usize) -> usize {
        let mut root = node;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[node] != root {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }

    /// Links two roots and returns the new root.
    fn union(&mut self, a: usize, b: usize) -> usize {
        let (mut a, mut b) = (a, b);
        if self.rank[a] < self.rank[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        if self.rank[a] == self.rank[b] {
            self.rank[a] = self.rank[a].saturating_add(1);
        }
        a
    }
}
