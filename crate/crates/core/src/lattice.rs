//! Periodic square lattice with spins on edges.
//!
//! Vertex `(r, c)` has id `r * n + c`. The horizontal edge leaving it to the
//! right is `h(r, c) = 2 (r n + c)`, the vertical edge leaving it downward is
//! `v(r, c) = 2 (r n + c) + 1`. Row and column indices wrap modulo `m` and `n`.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

pub const DEFAULT_MAX_SPINS: usize = 24;

/// Hard ceiling on spin count: masks are stored in a `u64`.
pub const ABSOLUTE_MAX_SPINS: usize = 62;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// `w1`: the X-string on all horizontal edges of column 0.
    Vertical,
    /// `w2`: the X-string on all vertical edges of row 0.
    Horizontal,
}

/// An ordered set of distinct edge indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Region {
    edges: Vec<usize>,
    mask: u64,
}

impl Region {
    pub fn new(edges: impl IntoIterator<Item = usize>, num_spins: usize) -> Result<Self> {
        let mut mask = 0u64;
        let mut out = Vec::new();
        for e in edges {
            if e >= num_spins {
                return Err(Error::InvalidRegion(format!("edge {e} outside [0, {num_spins})")));
            }
            if mask >> e & 1 == 1 {
                return Err(Error::InvalidRegion(format!("edge {e} listed twice")));
            }
            mask |= 1 << e;
            out.push(e);
        }
        out.sort_unstable();
        Ok(Region { edges: out, mask })
    }

    pub(crate) fn from_mask(mask: u64) -> Self {
        let edges = (0..64).filter(|&e| mask >> e & 1 == 1).collect();
        Region { edges, mask }
    }

    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, edge: usize) -> bool {
        edge < 64 && self.mask >> edge & 1 == 1
    }

    pub fn union(&self, other: &Region) -> Region {
        Region::from_mask(self.mask | other.mask)
    }

    pub fn is_disjoint(&self, other: &Region) -> bool {
        self.mask & other.mask == 0
    }

    pub fn complement(&self, num_spins: usize) -> Region {
        Region::from_mask(!self.mask & full_mask(num_spins))
    }
}

pub(crate) fn full_mask(num_spins: usize) -> u64 {
    if num_spins >= 64 {
        u64::MAX
    } else {
        (1u64 << num_spins) - 1
    }
}

/// The four sides used in the Levin–Wen combination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevinWenRegions {
    pub a: Region,
    pub b: Region,
    pub c: Region,
    pub d: Region,
}

impl LevinWenRegions {
    pub fn abcd(&self) -> Region {
        self.a.union(&self.b).union(&self.c).union(&self.d)
    }
    pub fn abc(&self) -> Region {
        self.a.union(&self.b).union(&self.c)
    }
    pub fn acd(&self) -> Region {
        self.a.union(&self.c).union(&self.d)
    }
    pub fn ac(&self) -> Region {
        self.a.union(&self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgeLattice {
    m: usize,
    n: usize,
}

impl EdgeLattice {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        Self::with_max_spins(m, n, DEFAULT_MAX_SPINS)
    }

    pub fn with_max_spins(m: usize, n: usize, max_spins: usize) -> Result<Self> {
        if m < 2 || n < 2 {
            return Err(Error::DimensionTooSmall { m, n });
        }
        let limit = max_spins.min(ABSOLUTE_MAX_SPINS);
        let requested = m.saturating_mul(n).saturating_mul(2);
        if requested > limit {
            return Err(Error::SizeLimit { what: "lattice", requested, limit });
        }
        Ok(EdgeLattice { m, n })
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn num_spins(&self) -> usize {
        2 * self.m * self.n
    }

    pub fn num_vertices(&self) -> usize {
        self.m * self.n
    }

    fn wrap(&self, r: isize, c: isize) -> (usize, usize) {
        (
            r.rem_euclid(self.m as isize) as usize,
            c.rem_euclid(self.n as isize) as usize,
        )
    }

    pub fn vertex(&self, r: isize, c: isize) -> usize {
        let (r, c) = self.wrap(r, c);
        r * self.n + c
    }

    pub fn horizontal(&self, r: isize, c: isize) -> usize {
        2 * self.vertex(r, c)
    }

    pub fn vertical(&self, r: isize, c: isize) -> usize {
        2 * self.vertex(r, c) + 1
    }

    /// The two vertex ids joined by `edge`.
    pub fn endpoints(&self, edge: usize) -> (usize, usize) {
        let v = edge / 2;
        let (r, c) = ((v / self.n) as isize, (v % self.n) as isize);
        if edge % 2 == 0 {
            (v, self.vertex(r, c + 1))
        } else {
            (v, self.vertex(r + 1, c))
        }
    }

    fn region_unchecked(&self, edges: impl IntoIterator<Item = usize>) -> Region {
        Region::new(edges, self.num_spins()).expect("lattice-generated region")
    }

    pub fn region(&self, edges: impl IntoIterator<Item = usize>) -> Result<Region> {
        Region::new(edges, self.num_spins())
    }

    pub fn star_edges(&self, r: isize, c: isize) -> Region {
        self.region_unchecked([
            self.horizontal(r, c),
            self.horizontal(r, c - 1),
            self.vertical(r, c),
            self.vertical(r - 1, c),
        ])
    }

    pub fn plaquette_edges(&self, r: isize, c: isize) -> Region {
        self.region_unchecked([
            self.horizontal(r, c),
            self.horizontal(r + 1, c),
            self.vertical(r, c),
            self.vertical(r, c + 1),
        ])
    }

    /// Star supports in vertex-id order.
    pub fn stars(&self) -> Vec<Region> {
        self.cells().map(|(r, c)| self.star_edges(r, c)).collect()
    }

    /// Plaquette supports, plaquette `(r, c)` at index `r n + c`.
    pub fn plaquettes(&self) -> Vec<Region> {
        self.cells().map(|(r, c)| self.plaquette_edges(r, c)).collect()
    }

    fn cells(&self) -> impl Iterator<Item = (isize, isize)> + '_ {
        (0..self.m).flat_map(move |r| (0..self.n).map(move |c| (r as isize, c as isize)))
    }

    pub fn loop_edges(&self, direction: Direction) -> Region {
        match direction {
            Direction::Vertical => self.region_unchecked((0..self.m as isize).map(|r| self.horizontal(r, 0))),
            Direction::Horizontal => self.region_unchecked((0..self.n as isize).map(|c| self.vertical(0, c))),
        }
    }

    /// Unordered pairs of distinct edges sharing at least one vertex, each
    /// listed once with the smaller index first, sorted.
    pub fn neighbor_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = BTreeSet::new();
        for star in self.stars() {
            let e = star.edges();
            for i in 0..e.len() {
                for j in i + 1..e.len() {
                    pairs.insert((e[i], e[j]));
                }
            }
        }
        pairs.into_iter().collect()
    }

    /// Four 2-edge regions on the 2x2 plaquette block anchored at vertex
    /// (0, 0): A is the top side, D the left side, and C, B the horizontal and
    /// vertical midlines of the block.
    pub fn levin_wen_regions(&self) -> Result<LevinWenRegions> {
        let regions = LevinWenRegions {
            a: self.region_unchecked([self.horizontal(0, 0), self.horizontal(0, 1)]),
            b: self.region_unchecked([self.vertical(0, 1), self.vertical(1, 1)]),
            c: self.region_unchecked([self.horizontal(1, 0), self.horizontal(1, 1)]),
            d: self.region_unchecked([self.vertical(0, 0), self.vertical(1, 0)]),
        };
        let all = [&regions.a, &regions.b, &regions.c, &regions.d];
        for (i, x) in all.iter().enumerate() {
            for y in &all[i + 1..] {
                if !x.is_disjoint(y) {
                    return Err(Error::Geometry("Levin-Wen sides overlap".into()));
                }
            }
        }
        Ok(regions)
    }

    /// Edges of the `(m-1) x (n-1)` block of plaquettes anchored at (0, 0).
    pub fn bulk_region(&self) -> Region {
        let mut mask = 0u64;
        for r in 0..self.m as isize - 1 {
            for c in 0..self.n as isize - 1 {
                mask |= self.plaquette_edges(r, c).mask();
            }
        }
        Region::from_mask(mask)
    }

    /// Shifts an edge by `(dr, dc)` lattice steps.
    pub fn translate_edge(&self, edge: usize, dr: isize, dc: isize) -> usize {
        let v = edge / 2;
        let (r, c) = ((v / self.n) as isize, (v % self.n) as isize);
        2 * self.vertex(r + dr, c + dc) + edge % 2
    }

    /// Number of stars acting on both `region` and its complement.
    pub fn boundary_stars(&self, region: &Region) -> usize {
        self.stars()
            .iter()
            .filter(|s| s.mask() & region.mask() != 0 && s.mask() & !region.mask() != 0)
            .count()
    }

    /// Number of stars whose whole support lies in `region`.
    pub fn interior_stars(&self, region: &Region) -> usize {
        self.stars()
            .iter()
            .filter(|s| s.mask() & !region.mask() == 0)
            .count()
    }

    /// Connected components of the graph formed by the edges in `mask`,
    /// counting only vertices touched by those edges.
    pub fn edge_components(&self, mask: u64) -> usize {
        let mut parent: Vec<usize> = (0..self.num_vertices()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut touched = vec![false; self.num_vertices()];
        for e in (0..self.num_spins()).filter(|&e| mask >> e & 1 == 1) {
            let (a, b) = self.endpoints(e);
            touched[a] = true;
            touched[b] = true;
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
        let mut roots = BTreeSet::new();
        for v in 0..self.num_vertices() {
            if touched[v] {
                roots.insert(find(&mut parent, v));
            }
        }
        roots.len()
    }

    /// True when every cycle of the edge graph of `mask` crosses both loop
    /// supports an even number of times, i.e. contains no incontractible loop.
    pub fn has_trivial_cycles(&self, mask: u64) -> bool {
        let w1 = self.loop_edges(Direction::Vertical).mask();
        let w2 = self.loop_edges(Direction::Horizontal).mask();
        let nv = self.num_vertices();
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nv];
        for e in (0..self.num_spins()).filter(|&e| mask >> e & 1 == 1) {
            let (a, b) = self.endpoints(e);
            adj[a].push((b, e));
            adj[b].push((a, e));
        }
        let mut potential: Vec<Option<(bool, bool)>> = vec![None; nv];
        for start in 0..nv {
            if potential[start].is_some() || adj[start].is_empty() {
                continue;
            }
            potential[start] = Some((false, false));
            let mut stack = vec![start];
            while let Some(u) = stack.pop() {
                let (pu1, pu2) = potential[u].unwrap();
                for &(w, e) in &adj[u] {
                    let p = (pu1 ^ (w1 >> e & 1 == 1), pu2 ^ (w2 >> e & 1 == 1));
                    match potential[w] {
                        Some(q) if q != p => return false,
                        Some(_) => {}
                        None => {
                            potential[w] = Some(p);
                            stack.push(w);
                        }
                    }
                }
            }
        }
        true
    }

    /// A region is treated as contractible when its edge graph is connected
    /// and free of incontractible loops, and the complement's edge graph is
    /// connected.
    pub fn is_contractible(&self, region: &Region) -> bool {
        let full = full_mask(self.num_spins());
        let inside = region.mask() & full;
        if inside == 0 || inside == full {
            return false;
        }
        self.edge_components(inside) == 1
            && self.has_trivial_cycles(inside)
            && self.edge_components(full & !inside) == 1
    }
}
