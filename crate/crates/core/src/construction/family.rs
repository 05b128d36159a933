//! Finite function families `[0,1]^d -> R^d` on dyadic lattices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointSet;
use crate::large_sumset::cube_offsets;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "kebab-case")]
pub enum MapSpec {
    /// `x -> (matrix x + offset) 2^{-exponent}`.
    Affine {
        matrix: Vec<Vec<i64>>,
        offset: Vec<i64>,
        exponent: u32,
    },
    /// Values on `2^{-input_exponent} Z^d`, outputs on `2^{-output_exponent} Z^d`.
    Tabulated {
        input_exponent: u32,
        output_exponent: u32,
        table: Vec<(Vec<i64>, Vec<i64>)>,
    },
}

impl MapSpec {
    /// `x -> r x` with `r = num / 2^exponent` on every axis.
    pub fn scaling(d: usize, num: i64, exponent: u32) -> Self {
        let matrix = (0..d).map(|i| (0..d).map(|j| if i == j { num } else { 0 }).collect()).collect();
        MapSpec::Affine {
            matrix,
            offset: vec![0; d],
            exponent,
        }
    }

    pub fn identity(d: usize) -> Self {
        Self::scaling(d, 1, 0)
    }

    /// Exponent of `f(x)` for `x` on `2^{-w} Z^d`.
    pub fn image_exponent(&self, w: u32) -> u32 {
        match self {
            MapSpec::Affine { exponent, .. } => w + exponent,
            MapSpec::Tabulated { output_exponent, .. } => *output_exponent,
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        match self {
            MapSpec::Affine { matrix, offset, .. } => {
                if matrix.len() != d || matrix.iter().any(|r| r.len() != d) || offset.len() != d {
                    return Err(Error::Malformed(format!("affine map is not {d}x{d}")));
                }
            }
            MapSpec::Tabulated { table, .. } => {
                if table.is_empty() || table.iter().any(|(x, y)| x.len() != d || y.len() != d) {
                    return Err(Error::Malformed("tabulated map has bad entries".into()));
                }
                if table.windows(2).any(|w| w[0].0 >= w[1].0) {
                    return Err(Error::Malformed("table must be sorted by input, without repeats".into()));
                }
            }
        }
        Ok(())
    }

    /// `f(x)` for `x` on `2^{-w} Z^d`, at `image_exponent(w)`.
    pub fn apply(&self, x: &[i64], w: u32) -> Result<Vec<i64>> {
        match self {
            MapSpec::Affine { matrix, offset, .. } => Ok(matrix
                .iter()
                .zip(offset)
                .map(|(row, o)| row.iter().zip(x).map(|(m, xi)| m * xi).sum::<i64>() + (o << w))
                .collect()),
            MapSpec::Tabulated {
                input_exponent, table, ..
            } => {
                let key: Vec<i64> = if *input_exponent >= w {
                    x.iter().map(|&v| v << (input_exponent - w)).collect()
                } else {
                    let sh = w - input_exponent;
                    if x.iter().any(|&v| v & ((1 << sh) - 1) != 0) {
                        return Err(Error::Domain(format!("{x:?} is off the table grid")));
                    }
                    x.iter().map(|&v| v >> sh).collect()
                };
                table
                    .binary_search_by(|(k, _)| k.as_slice().cmp(&key))
                    .map(|i| table[i].1.clone())
                    .map_err(|_| Error::Domain(format!("{x:?} at exponent {w} is not tabulated")))
            }
        }
    }
}

/// `M(delta) = constant * delta^{-exponent}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringBound {
    pub constant: f64,
    pub exponent: f64,
}

impl CoveringBound {
    pub fn eval(&self, delta: f64) -> f64 {
        self.constant * delta.powf(-self.exponent)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionFamily {
    pub d: usize,
    pub members: Vec<MapSpec>,
    /// Bi-Lipschitz constant `C = 2^{lipschitz_log2}`.
    pub lipschitz_log2: u32,
    pub covering_bound: CoveringBound,
}

/// Outcome of the sampled bi-Lipschitz check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiLipschitzReport {
    pub pairs: usize,
    /// `|f(x) - f(y)| > |x - y|`
    pub expanding: usize,
    /// `C |f(x) - f(y)| < |x - y|`
    pub collapsing: usize,
}

impl BiLipschitzReport {
    pub fn holds(&self) -> bool {
        self.expanding == 0 && self.collapsing == 0
    }
}

fn sup_dist(x: &[i64], y: &[i64]) -> i64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).max().unwrap_or(0)
}

impl FunctionFamily {
    pub fn new(d: usize, members: Vec<MapSpec>, lipschitz_log2: u32, covering_bound: CoveringBound) -> Result<Self> {
        let f = Self {
            d,
            members,
            lipschitz_log2,
            covering_bound,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.members.is_empty() {
            return Err(Error::EmptySet("function family"));
        }
        self.members.iter().try_for_each(|m| m.validate(self.d))
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn image_exponent(&self, w: u32) -> u32 {
        self.members.iter().map(|m| m.image_exponent(w)).max().unwrap_or(w)
    }

    /// `f(x)` at exponent `out`, which must be at least the member's own.
    pub fn apply_at(&self, i: usize, x: &[i64], w: u32, out: u32) -> Result<Vec<i64>> {
        let m = &self.members[i];
        let own = m.image_exponent(w);
        if own > out {
            return Err(Error::Domain(format!("image exponent {own} exceeds {out}")));
        }
        Ok(m.apply(x, w)?.into_iter().map(|v| v << (out - own)).collect())
    }

    /// `f_i(A)` at exponent `out`.
    pub fn image(&self, i: usize, a: &PointSet, out: u32) -> Result<PointSet> {
        let pts = a.iter().map(|x| self.apply_at(i, x, a.exponent(), out)).collect::<Result<Vec<_>>>()?;
        PointSet::new(self.d, out, pts)
    }

    /// Grid on which members are compared: the vertices of `[0,1]^d` when
    /// every member is affine, else the union of the table domains.
    fn comparison_grid(&self) -> (u32, Vec<Vec<i64>>) {
        let tables: Vec<_> = self
            .members
            .iter()
            .filter_map(|m| match m {
                MapSpec::Tabulated {
                    input_exponent, table, ..
                } => Some((*input_exponent, table)),
                _ => None,
            })
            .collect();
        if tables.is_empty() {
            return (0, cube_offsets(self.d, &[0, 1]));
        }
        let w = tables.iter().map(|(e, _)| *e).max().unwrap();
        let mut pts: Vec<Vec<i64>> = tables
            .iter()
            .flat_map(|(e, t)| t.iter().map(move |(x, _)| x.iter().map(|v| v << (w - e)).collect()))
            .collect();
        pts.sort();
        pts.dedup();
        (w, pts)
    }

    /// `sup |f_i - f_j|` over `[0,1]^d` as `units * 2^{-exponent}`. Exact for
    /// affine pairs (the maximum of a convex function sits at a vertex);
    /// over the table domain otherwise.
    pub fn sup_distance_units(&self, i: usize, j: usize) -> Result<(u32, i64)> {
        let (w, grid) = self.comparison_grid();
        let out = self.image_exponent(w);
        let mut best = 0;
        for x in &grid {
            let fx = self.apply_at(i, x, w, out);
            let gx = self.apply_at(j, x, w, out);
            match (fx, gx) {
                (Ok(a), Ok(b)) => best = best.max(sup_dist(&a, &b)),
                // a point outside one table is not part of the common domain
                (Err(Error::Domain(_)), _) | (_, Err(Error::Domain(_))) => {}
                (Err(e), _) | (_, Err(e)) => return Err(e),
            }
        }
        Ok((out, best))
    }

    pub fn sup_distance(&self, i: usize, j: usize) -> Result<f64> {
        let (w, u) = self.sup_distance_units(i, j)?;
        Ok(u as f64 * (-(w as f64)).exp2())
    }

    /// Checks `C^{-1}|x-y| <= |f(x)-f(y)| <= |x-y|` on all pairs of the grid
    /// `2^{-g} {0..2^g}^d` (affine members) or of the table domain.
    pub fn check_bilipschitz(&self, g: u32) -> Result<BiLipschitzReport> {
        let mut report = BiLipschitzReport {
            pairs: 0,
            expanding: 0,
            collapsing: 0,
        };
        for (i, m) in self.members.iter().enumerate() {
            let (w, pts): (u32, Vec<Vec<i64>>) = match m {
                MapSpec::Affine { .. } => (g, cube_offsets(self.d, &(0..=(1i64 << g)).collect::<Vec<_>>())),
                MapSpec::Tabulated {
                    input_exponent, table, ..
                } => (*input_exponent, table.iter().map(|(x, _)| x.clone()).collect()),
            };
            let out = m.image_exponent(w).max(w);
            let imgs = pts.iter().map(|x| self.apply_at(i, x, w, out)).collect::<Result<Vec<_>>>()?;
            let sh = out - w;
            for a in 0..pts.len() {
                for b in a + 1..pts.len() {
                    let dx = sup_dist(&pts[a], &pts[b]) << sh;
                    let df = sup_dist(&imgs[a], &imgs[b]);
                    report.pairs += 1;
                    if df > dx {
                        report.expanding += 1;
                    }
                    if (df << self.lipschitz_log2) < dx {
                        report.collapsing += 1;
                    }
                }
            }
        }
        Ok(report)
    }
}

/// Greedy sup-norm cover of the family by balls of radius `delta` centred at
/// members; the centre indices. Their number bounds `|F|_delta` from above.
pub fn family_cover_centres(f: &FunctionFamily, delta: f64) -> Result<Vec<usize>> {
    let mut centres: Vec<usize> = Vec::new();
    for i in 0..f.len() {
        let mut covered = false;
        for &c in &centres {
            if f.sup_distance(c, i)? <= delta {
                covered = true;
                break;
            }
        }
        if !covered {
            centres.push(i);
        }
    }
    Ok(centres)
}

pub fn family_covering_number(f: &FunctionFamily, delta: f64) -> Result<usize> {
    Ok(family_cover_centres(f, delta)?.len())
}
