//! Vine arrays.
//!
//! Arrays follow the upper-triangular convention: row `l` of column `j`
//! names the variable joined to the diagonal variable of column `j` in tree
//! `l + 1`, conditionally on the entries above it. Rows and columns are not
//! reversed as in some other toolkits. Internally the diagonal is relabeled
//! to positions `0..d`, with `order[p]` giving the original variable at
//! position `p`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VineArray {
    d: usize,
    trunc: usize,
    /// original (0-based) variable at each diagonal position
    order: Vec<usize>,
    /// position of each original variable
    pos: Vec<usize>,
    /// a[l][j] for l < j, in positions; a[j][j] = j
    a: Vec<Vec<usize>>,
}

/// An edge of the vine, in original 0-based variable labels.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    /// conditioned pair, smaller label first
    pub pair: (usize, usize),
    /// sorted conditioning set
    pub cond: Vec<usize>,
}

/// The M and I arrays used by the conditional-CDF recursion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workspace {
    /// m[k][j] = max(a[0..=k][j])
    pub m: Vec<Vec<usize>>,
    /// i[k][j] = true when column j must also produce the complementary
    /// conditional at level k for a later column
    pub i: Vec<Vec<bool>>,
}

#[derive(Serialize, Deserialize)]
struct ArrayRepr {
    dim: usize,
    truncation: usize,
    /// row-major, 1-based variable labels, zeros below the diagonal
    array: Vec<usize>,
}

impl Serialize for VineArray {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let raw = self.to_raw();
        ArrayRepr { dim: self.d, truncation: self.trunc, array: raw.into_iter().flatten().collect() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for VineArray {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let r = ArrayRepr::deserialize(de)?;
        if r.array.len() != r.dim * r.dim {
            return Err(serde::de::Error::custom(format!("array has {} entries, expected {}", r.array.len(), r.dim * r.dim)));
        }
        let rows: Vec<Vec<usize>> = r.array.chunks(r.dim).map(|c| c.to_vec()).collect();
        VineArray::validate(&rows, r.truncation).map_err(serde::de::Error::custom)
    }
}

fn structure_err(msg: String) -> Error {
    Error::Structure(msg)
}

pub(crate) struct UnionFind(Vec<usize>);

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    pub(crate) fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra] = rb;
        true
    }
}

impl VineArray {
    /// Validate a raw array of 1-based labels (entries below the diagonal are
    /// ignored) and relabel it so that the diagonal reads 0..d.
    pub fn validate(raw: &[Vec<usize>], trunc: usize) -> Result<Self> {
        let d = raw.len();
        if d < 2 {
            return Err(structure_err(format!("dimension must be at least 2, got {d}")));
        }
        if raw.iter().any(|r| r.len() != d) {
            return Err(structure_err("array is not square".into()));
        }
        if trunc < 1 || trunc > d - 1 {
            return Err(structure_err(format!("truncation level {trunc} outside [1, {}]", d - 1)));
        }
        let mut pos = vec![usize::MAX; d];
        let mut order = Vec::with_capacity(d);
        for (j, row) in raw.iter().enumerate() {
            let lab = row[j];
            if lab < 1 || lab > d {
                return Err(structure_err(format!("diagonal entry {lab} in column {} out of range", j + 1)));
            }
            if pos[lab - 1] != usize::MAX {
                return Err(structure_err(format!("diagonal label {lab} repeated in column {}", j + 1)));
            }
            pos[lab - 1] = j;
            order.push(lab - 1);
        }
        let mut a = vec![vec![0usize; d]; d];
        for j in 0..d {
            a[j][j] = j;
            let mut seen = vec![false; d];
            for l in 0..j {
                let lab = raw[l][j];
                if lab < 1 || lab > d {
                    return Err(structure_err(format!("entry {lab} at row {}, column {} out of range", l + 1, j + 1)));
                }
                let p = pos[lab - 1];
                if p >= j {
                    return Err(structure_err(format!(
                        "entry {lab} at row {}, column {} is not an earlier diagonal variable",
                        l + 1,
                        j + 1
                    )));
                }
                if seen[p] {
                    return Err(structure_err(format!("duplicate entry {lab} in column {}", j + 1)));
                }
                seen[p] = true;
                a[l][j] = p;
            }
        }
        let v = VineArray { d, trunc, order, pos, a };
        v.check_trees()?;
        Ok(v)
    }

    /// Proximity and tree checks on the relabeled array.
    fn check_trees(&self) -> Result<()> {
        let d = self.d;
        let mut uf = UnionFind::new(d);
        for j in 1..d {
            if !uf.union(j, self.a[0][j]) {
                return Err(structure_err(format!("tree 1 has a cycle at column {}", j + 1)));
            }
        }
        for l in 1..d - 1 {
            // nodes of tree l+1 are the level-(l-1) edges, identified by column
            let mut uf = UnionFind::new(d);
            for j in (l + 1)..d {
                let mut target: Vec<usize> = (0..=l).map(|k| self.a[k][j]).collect();
                target.sort_unstable();
                let k = *target.last().unwrap();
                let ok = k >= l && {
                    let mut set: Vec<usize> = (0..l).map(|r| self.a[r][k]).collect();
                    set.push(k);
                    set.sort_unstable();
                    set == target
                };
                if !ok {
                    return Err(structure_err(format!(
                        "proximity condition fails at row {}, column {}",
                        l + 1,
                        j + 1
                    )));
                }
                if !uf.union(j, k) {
                    return Err(structure_err(format!("tree {} has a cycle at column {}", l + 1, j + 1)));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn truncation(&self) -> usize {
        self.trunc
    }

    pub fn with_truncation(&self, trunc: usize) -> Result<Self> {
        if trunc < 1 || trunc > self.d - 1 {
            return Err(structure_err(format!("truncation level {trunc} outside [1, {}]", self.d - 1)));
        }
        Ok(VineArray { trunc, ..self.clone() })
    }

    /// Original variable at each diagonal position.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Diagonal position of an original variable.
    pub fn position(&self, var: usize) -> usize {
        self.pos[var]
    }

    /// Relabeled entry: the position paired with position `j` at level `l`.
    pub fn entry(&self, l: usize, j: usize) -> usize {
        self.a[l][j]
    }

    /// Original variable paired with the diagonal variable of column `j` at level `l`.
    pub fn partner(&self, l: usize, j: usize) -> usize {
        self.order[self.a[l][j]]
    }

    /// Raw array of 1-based original labels, zeros below the diagonal.
    pub fn to_raw(&self) -> Vec<Vec<usize>> {
        let d = self.d;
        let mut raw = vec![vec![0usize; d]; d];
        for j in 0..d {
            for l in 0..=j {
                raw[l][j] = self.order[self.a[l][j]] + 1;
            }
        }
        raw
    }

    /// Edge at level `l` of column `j` (l < j), in original labels.
    pub fn edge(&self, l: usize, j: usize) -> Edge {
        let (x, y) = (self.order[self.a[l][j]], self.order[j]);
        let mut cond: Vec<usize> = (0..l).map(|k| self.order[self.a[k][j]]).collect();
        cond.sort_unstable();
        Edge { pair: (x.min(y), x.max(y)), cond }
    }

    /// Edge sets per level, sorted.
    pub fn edge_sets(&self) -> Vec<Vec<Edge>> {
        (0..self.d - 1)
            .map(|l| {
                let mut e: Vec<Edge> = ((l + 1)..self.d).map(|j| self.edge(l, j)).collect();
                e.sort();
                e
            })
            .collect()
    }

    /// Build an array from a column specification in original labels:
    /// `columns[p] = (diagonal variable, partners by level)` with
    /// `partners.len() == p`.
    pub fn from_columns(columns: &[(usize, Vec<usize>)], trunc: usize) -> Result<Self> {
        let d = columns.len();
        let mut raw = vec![vec![0usize; d]; d];
        for (j, (diag, partners)) in columns.iter().enumerate() {
            if partners.len() != j {
                return Err(structure_err(format!("column {} needs {} partners, got {}", j + 1, j, partners.len())));
            }
            raw[j][j] = diag + 1;
            for (l, &p) in partners.iter().enumerate() {
                raw[l][j] = p + 1;
            }
        }
        Self::validate(&raw, trunc)
    }

    /// A canonical array for the vine: repeatedly peel off the leaf variable
    /// (conditioned in exactly one edge per level and never conditioning)
    /// with the largest label and place it in the last free column.
    pub fn canonical(&self) -> Self {
        Self::from_edge_sets(self.edge_sets(), self.trunc, None).expect("peeling a valid vine yields a valid array")
    }

    /// The same vine re-expressed with `var` in the last diagonal slot.
    /// Fails when `var` is not a leaf in every tree.
    pub fn with_last(&self, var: usize) -> Result<Self> {
        if var >= self.d {
            return Err(structure_err(format!("variable {var} out of range")));
        }
        if self.order[self.d - 1] == var {
            return Ok(self.clone());
        }
        Self::from_edge_sets(self.edge_sets(), self.trunc, Some(var))
    }

    /// Build an array from the edges of every tree (original labels, `d - 1`
    /// levels with `d - 1 - l` edges each). Leaves are peeled by largest
    /// label, except that `last` is peeled first when given.
    pub fn from_edge_sets(mut levels: Vec<Vec<Edge>>, trunc: usize, last: Option<usize>) -> Result<Self> {
        let d = levels.len() + 1;
        if levels.iter().enumerate().any(|(l, e)| e.len() != d - 1 - l) {
            return Err(structure_err("edge sets do not have d - 1 - l edges at level l".into()));
        }
        let mut expected = levels.clone();
        for (e, lev) in expected.iter_mut().zip(0..) {
            for edge in e.iter_mut() {
                if edge.pair.0 > edge.pair.1 {
                    edge.pair = (edge.pair.1, edge.pair.0);
                }
                edge.cond.sort_unstable();
                if edge.cond.len() != lev {
                    return Err(structure_err(format!("edge at level {} has conditioning set of size {}", lev + 1, edge.cond.len())));
                }
            }
            e.sort();
        }
        let mut remaining: Vec<usize> = (0..d).collect();
        let mut cols: Vec<(usize, Vec<usize>)> = Vec::with_capacity(d);
        let mut prefer = last;
        while remaining.len() > 1 {
            let nlev = remaining.len() - 1;
            let is_leaf = |v: usize| {
                (0..nlev).all(|l| {
                    let hits = levels[l].iter().filter(|e| e.pair.0 == v || e.pair.1 == v).count();
                    hits == 1 && levels[l].iter().all(|e| !e.cond.contains(&v))
                })
            };
            let chosen = match prefer.take() {
                Some(v) if is_leaf(v) => v,
                Some(v) => {
                    return Err(Error::UnsupportedStructure(format!(
                        "variable {} is not a leaf of every tree",
                        v + 1
                    )))
                }
                None => remaining
                    .iter()
                    .rev()
                    .copied()
                    .find(|&v| is_leaf(v))
                    .ok_or_else(|| structure_err("edge sets do not form a regular vine".into()))?,
            };
            let mut partners = Vec::with_capacity(nlev);
            for level in levels.iter_mut().take(nlev) {
                let idx = level.iter().position(|e| e.pair.0 == chosen || e.pair.1 == chosen).unwrap();
                let e = level.remove(idx);
                partners.push(if e.pair.0 == chosen { e.pair.1 } else { e.pair.0 });
            }
            cols.push((chosen, partners));
            remaining.retain(|&x| x != chosen);
        }
        cols.push((remaining[0], vec![]));
        cols.reverse();
        let v = Self::from_columns(&cols, trunc)?;
        // peeling only checks leaves; the array must reproduce the input edges
        if v.edge_sets() != expected {
            return Err(structure_err("edge sets do not form a regular vine".into()));
        }
        Ok(v)
    }

    /// M and I arrays on relabeled positions.
    pub fn workspace(&self) -> Workspace {
        let d = self.d;
        let m = max_array(d, |l, j| self.a[l][j]);
        let mut i = vec![vec![false; d]; d];
        for l in 0..d.saturating_sub(2) {
            for j in (l + 2)..d {
                let mm = m[l + 1][j];
                if self.a[l + 1][j] < mm {
                    i[l][mm] = true;
                }
            }
        }
        Workspace { m, i }
    }

    /// The D-vine with the given path order (original labels).
    pub fn dvine(path: &[usize], trunc: usize) -> Result<Self> {
        let cols: Vec<(usize, Vec<usize>)> = path
            .iter()
            .enumerate()
            .map(|(j, &v)| (v, (0..j).map(|l| path[j - 1 - l]).collect()))
            .collect();
        Self::from_columns(&cols, trunc)
    }
}

fn max_array(d: usize, a: impl Fn(usize, usize) -> usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0usize; d]; d];
    for j in 0..d {
        let mut cur = 0;
        for l in 0..j {
            cur = if l == 0 { a(0, j) } else { cur.max(a(l, j)) };
            m[l][j] = cur;
        }
        m[j][j] = j;
    }
    m
}

/// M array computed directly on raw labels, without relabeling.
pub fn workspace_raw(raw: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let d = raw.len();
    let mut m = max_array(d, |l, j| raw[l][j]);
    for j in 0..d {
        m[j][j] = raw[j][j];
    }
    m
}
