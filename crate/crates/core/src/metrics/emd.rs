use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::raster::{pool_area, DensityMap, Grid};

/// Longest side EMD grids are pooled down to by default.
pub const EMD_MAX_SIDE: usize = 32;

/// Earth mover's distance between two maps, in cells of the pooled grid.
///
/// Both maps are pooled by area to at most `max_side` cells along the longer
/// side (aspect preserved), renormalized to unit mass, and compared by an exact
/// transportation solve with Euclidean ground distance.
pub fn emd(p: &DensityMap, q: &DensityMap, max_side: usize) -> Result<f64> {
    p.grid().ensure_same_shape(q.grid())?;
    if max_side == 0 {
        return Err(Error::InvalidArgument("max_side must be at least 1".into()));
    }
    let (w, h) = p.grid().shape();
    let (ow, oh) = pooled_shape(w, h, max_side);
    let a = unit_mass(&pool_area(p.grid(), ow, oh))?;
    let b = unit_mass(&pool_area(q.grid(), ow, oh))?;
    transport_cost(&a, &b)
}

fn pooled_shape(w: usize, h: usize, max_side: usize) -> (usize, usize) {
    let long = w.max(h);
    if long <= max_side {
        return (w, h);
    }
    let scale = max_side as f64 / long as f64;
    let fit = |n: usize| ((n as f64 * scale).round() as usize).clamp(1, max_side);
    (fit(w), fit(h))
}

fn unit_mass(g: &Grid) -> Result<Grid> {
    let total = g.sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateMap("zero mass"));
    }
    Ok(g.map(|v| v / total))
}

/// Optimal transport cost between two equal-shape, unit-mass grids.
pub(crate) fn transport_cost(a: &Grid, b: &Grid) -> Result<f64> {
    a.ensure_same_shape(b)?;
    let w = a.width();
    // mass both maps share at a cell stays put; the rest must move
    let mut supply = Vec::new();
    let mut demand = Vec::new();
    for (i, (x, y)) in a.data().iter().zip(b.data()).enumerate() {
        let common = x.min(*y);
        let (sx, dy) = (x - common, y - common);
        let pos = ((i % w) as f64, (i / w) as f64);
        if sx > 0.0 {
            supply.push((pos, sx));
        }
        if dy > 0.0 {
            demand.push((pos, dy));
        }
    }
    let total_s: f64 = supply.iter().map(|s| s.1).sum();
    let total_d: f64 = demand.iter().map(|d| d.1).sum();
    if total_s <= 1e-15 || total_d <= 1e-15 {
        return Ok(0.0);
    }
    // balance residual rounding so the problem is exactly feasible
    let fix = total_s / total_d;
    let s: Vec<f64> = supply.iter().map(|v| v.1).collect();
    let d: Vec<f64> = demand.iter().map(|v| v.1 * fix).collect();
    let cost: Vec<f64> = supply
        .iter()
        .flat_map(|((x0, y0), _)| {
            demand
                .iter()
                .map(move |((x1, y1), _)| ((x0 - x1).powi(2) + (y0 - y1).powi(2)).sqrt())
        })
        .collect();
    Transport::new(s, d, cost).solve()
}

/// Transportation problem solved by the primal network simplex on a spanning
/// tree of `m + n - 1` basic arcs.
struct Transport {
    m: usize,
    n: usize,
    cost: Vec<f64>,
    /// Basic arcs as (source, sink, flow).
    basis: Vec<(usize, usize, f64)>,
}

const PRICE_TOL: f64 = 1e-12;

impl Transport {
    fn new(supply: Vec<f64>, demand: Vec<f64>, cost: Vec<f64>) -> Self {
        let (m, n) = (supply.len(), demand.len());
        let basis = initial_basis(&supply, &demand, &cost);
        Transport { m, n, cost, basis }
    }

    fn solve(mut self) -> Result<f64> {
        let (m, n) = (self.m, self.n);
        let arcs = m * n;
        let block = ((arcs as f64).sqrt().ceil() as usize).max(16).min(arcs);
        let max_iter = 50 * arcs + 1000;
        let mut cursor = 0;
        let mut tree = Tree::new(m + n);
        for _ in 0..max_iter {
            tree.rebuild(&self.basis, &self.cost, n);
            // block pricing: most negative reduced cost within the first
            // block that has one, scanning cyclically from the cursor
            let mut entering = None;
            let mut scanned = 0;
            while scanned < arcs && entering.is_none() {
                let mut best = -PRICE_TOL;
                let end = (scanned + block).min(arcs);
                for k in scanned..end {
                    let arc = (cursor + k) % arcs;
                    let (i, j) = (arc / n, arc % n);
                    let rc = self.cost[arc] - tree.potential[i] - tree.potential[m + j];
                    if rc < best {
                        best = rc;
                        entering = Some((i, j));
                    }
                }
                scanned = end;
            }
            let Some((i, j)) = entering else {
                return Ok(self.basis.iter().map(|&(i, j, f)| f * self.cost[i * n + j]).sum());
            };
            cursor = (cursor + scanned) % arcs;
            self.pivot(&tree, i, j);
        }
        Err(Error::Numerical("transport solver did not converge".into()))
    }

    /// Adds arc (i, j) to the tree, pushes flow around the cycle it closes and
    /// drops the first arc whose flow reaches zero.
    fn pivot(&mut self, tree: &Tree, i: usize, j: usize) {
        let m = self.m;
        // tree path from sink node m + j to source node i; arcs alternate -, +, -, ...
        let mut up_from_sink = Vec::new();
        let mut up_from_source = Vec::new();
        let (mut a, mut b) = (m + j, i);
        while tree.depth[a] > tree.depth[b] {
            up_from_sink.push(tree.parent_arc[a]);
            a = tree.parent[a];
        }
        while tree.depth[b] > tree.depth[a] {
            up_from_source.push(tree.parent_arc[b]);
            b = tree.parent[b];
        }
        while a != b {
            up_from_sink.push(tree.parent_arc[a]);
            a = tree.parent[a];
            up_from_source.push(tree.parent_arc[b]);
            b = tree.parent[b];
        }
        let path: Vec<usize> = up_from_sink
            .into_iter()
            .chain(up_from_source.into_iter().rev())
            .collect();

        let mut theta = f64::INFINITY;
        let mut leaving = path[0];
        for (k, &arc) in path.iter().enumerate() {
            if k % 2 == 0 && self.basis[arc].2 < theta {
                theta = self.basis[arc].2;
                leaving = arc;
            }
        }
        for (k, &arc) in path.iter().enumerate() {
            if k % 2 == 0 {
                self.basis[arc].2 -= theta;
            } else {
                self.basis[arc].2 += theta;
            }
        }
        self.basis[leaving] = (i, j, theta);
    }
}

/// Greedy cheapest-arc start: every allocation retires one row or column, and
/// the last retires both, leaving exactly `m + n - 1` arcs that form a tree.
fn initial_basis(supply: &[f64], demand: &[f64], cost: &[f64]) -> Vec<(usize, usize, f64)> {
    let (m, n) = (supply.len(), demand.len());
    let mut order: Vec<usize> = (0..m * n).collect();
    order.sort_by(|&x, &y| cost[x].total_cmp(&cost[y]).then(x.cmp(&y)));
    let mut s = supply.to_vec();
    let mut d = demand.to_vec();
    let mut row_open = vec![true; m];
    let mut col_open = vec![true; n];
    let (mut rows_left, mut cols_left) = (m, n);
    let mut basis = Vec::with_capacity(m + n - 1);
    for arc in order {
        let (i, j) = (arc / n, arc % n);
        if !row_open[i] || !col_open[j] {
            continue;
        }
        let flow = s[i].min(d[j]).max(0.0);
        basis.push((i, j, flow));
        s[i] -= flow;
        d[j] -= flow;
        if rows_left == 1 && cols_left == 1 {
            break;
        }
        if (s[i] <= d[j] && rows_left > 1) || cols_left == 1 {
            row_open[i] = false;
            rows_left -= 1;
        } else {
            col_open[j] = false;
            cols_left -= 1;
        }
    }
    basis
}

/// Rooted view of the basis: parents, depths and dual potentials.
struct Tree {
    parent: Vec<usize>,
    parent_arc: Vec<usize>,
    depth: Vec<usize>,
    potential: Vec<f64>,
    adjacency: Vec<Vec<(usize, usize)>>,
    queue: VecDeque<usize>,
}

impl Tree {
    fn new(nodes: usize) -> Self {
        Tree {
            parent: vec![0; nodes],
            parent_arc: vec![0; nodes],
            depth: vec![0; nodes],
            potential: vec![0.0; nodes],
            adjacency: vec![Vec::new(); nodes],
            queue: VecDeque::new(),
        }
    }

    /// Source `i` is node `i`, sink `j` is node `m + j`; potentials satisfy
    /// `u_i + v_j = c_ij` on every basic arc with `u_0 = 0`.
    fn rebuild(&mut self, basis: &[(usize, usize, f64)], cost: &[f64], n: usize) {
        let m = self.parent.len() - n;
        self.adjacency.iter_mut().for_each(Vec::clear);
        for (k, &(i, j, _)) in basis.iter().enumerate() {
            self.adjacency[i].push((m + j, k));
            self.adjacency[m + j].push((i, k));
        }
        let mut seen = vec![false; m + n];
        seen[0] = true;
        self.depth[0] = 0;
        self.potential[0] = 0.0;
        self.queue.clear();
        self.queue.push_back(0);
        while let Some(u) = self.queue.pop_front() {
            for idx in 0..self.adjacency[u].len() {
                let (v, k) = self.adjacency[u][idx];
                if seen[v] {
                    continue;
                }
                seen[v] = true;
                self.parent[v] = u;
                self.parent_arc[v] = k;
                self.depth[v] = self.depth[u] + 1;
                let (i, j, _) = basis[k];
                let c = cost[i * n + j];
                self.potential[v] = c - self.potential[u];
                self.queue.push_back(v);
            }
        }
    }
}
