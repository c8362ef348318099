//! Static 3-d tree for nearest-neighbour queries.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geometry::Velocity;

const LEAF: usize = 16;

struct Node {
    start: u32,
    end: u32,
    dim: u8,
    split: f64,
    left: u32,
    right: u32,
}

const NONE: u32 = u32::MAX;

pub struct KdTree<'a> {
    points: &'a [Velocity],
    order: Vec<u32>,
    nodes: Vec<Node>,
}

#[derive(Clone, Copy, PartialEq)]
struct Cand(f64, u32);
impl Eq for Cand {}
impl PartialOrd for Cand {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Cand {
    fn cmp(&self, o: &Self) -> Ordering {
        self.0.total_cmp(&o.0).then(self.1.cmp(&o.1))
    }
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [Velocity]) -> Self {
        assert!(points.len() < NONE as usize);
        let mut t = KdTree {
            points,
            order: (0..points.len() as u32).collect(),
            nodes: Vec::with_capacity(2 * points.len() / LEAF + 1),
        };
        if !points.is_empty() {
            t.build(0, points.len());
        }
        t
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            start: start as u32,
            end: end as u32,
            dim: 0,
            split: 0.0,
            left: NONE,
            right: NONE,
        });
        if end - start <= LEAF {
            return id;
        }
        let pts = self.points;
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &k in &self.order[start..end] {
            let p = pts[k as usize].to_array();
            for d in 0..3 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let dim = (0..3).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b]))).unwrap();
        let mid = (start + end) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a as usize].component(dim).total_cmp(&pts[b as usize].component(dim))
        });
        let split = pts[self.order[mid] as usize].component(dim);
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        let n = &mut self.nodes[id as usize];
        n.dim = dim as u8;
        n.split = split;
        n.left = left;
        n.right = right;
        id
    }

    /// The `k` nearest points to `q` as `(squared distance, index)`, closest
    /// first, skipping index `exclude`. Ties are broken by index.
    pub fn nearest(&self, q: Velocity, k: usize, exclude: Option<usize>) -> Vec<(f64, usize)> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 && !self.nodes.is_empty() {
            let ex = exclude.map_or(NONE, |e| e as u32);
            self.search(0, q.to_array(), k, ex, &mut heap);
        }
        let mut out: Vec<(f64, usize)> = heap.into_iter().map(|c| (c.0, c.1 as usize)).collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out
    }

    fn search(&self, id: u32, q: [f64; 3], k: usize, ex: u32, heap: &mut BinaryHeap<Cand>) {
        let n = &self.nodes[id as usize];
        if n.left == NONE {
            for &i in &self.order[n.start as usize..n.end as usize] {
                if i == ex {
                    continue;
                }
                let p = self.points[i as usize];
                let d = (p.x - q[0]).powi(2) + (p.y - q[1]).powi(2) + (p.z - q[2]).powi(2);
                let c = Cand(d, i);
                if heap.len() < k {
                    heap.push(c);
                } else if c < *heap.peek().unwrap() {
                    heap.pop();
                    heap.push(c);
                }
            }
            return;
        }
        let diff = q[n.dim as usize] - n.split;
        let (near, far) = if diff < 0.0 { (n.left, n.right) } else { (n.right, n.left) };
        self.search(near, q, k, ex, heap);
        if heap.len() < k || diff * diff <= heap.peek().unwrap().0 {
            self.search(far, q, k, ex, heap);
        }
    }
}
