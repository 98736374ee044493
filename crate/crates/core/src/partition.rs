//! Data-independent rectangular partitions of a box domain.
//!
//! Partitions are built before any sample is seen: the constructors take
//! only geometry (domain bounds, cells per axis), never data. Sample
//! assignment is a separate, deterministic step with half-open membership
//! on interior boundaries and a closed last cell per axis, so every domain
//! point belongs to exactly one cell.
//!
//! Classification bounds use a *paired* partition: an input-space partition
//! duplicated at the two label values, where a cell's diameter is that of
//! its input projection (the label coordinate spans a single point).

use crate::error::{CoreError, Result};

/// An axis-aligned box `[lower_1, upper_1] x ... x [lower_d, upper_d]`.
///
/// Degenerate axes (`lower == upper`) are allowed so point domains can be
/// expressed; the grid builders require positive extent.
#[derive(Debug, Clone, PartialEq)]
pub struct Rect {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Rect {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(CoreError::InvalidDomain(
                "bounds must be nonempty and of equal length".into(),
            ));
        }
        for (lo, hi) in lower.iter().zip(&upper) {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(CoreError::InvalidDomain(format!(
                    "need finite lower <= upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// 1-D interval.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Euclidean diagonal.
    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt()
    }

    /// Cartesian product with another box.
    pub fn product(&self, other: &Rect) -> Rect {
        let mut lower = self.lower.clone();
        lower.extend_from_slice(&other.lower);
        let mut upper = self.upper.clone();
        upper.extend_from_slice(&other.upper);
        Rect { lower, upper }
    }

    /// Closed-box membership (used for domain checks, not cell assignment).
    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| lo <= x && x <= hi)
    }

    /// Clip a point into the box, coordinate-wise.
    pub fn clip(&self, point: &mut [f64]) {
        for (x, (lo, hi)) in point.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *x = x.clamp(*lo, *hi);
        }
    }
}

/// Label half of a paired classification partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelSlice {
    Minus,
    Plus,
}

impl LabelSlice {
    pub fn value(self) -> f64 {
        match self {
            LabelSlice::Minus => -1.0,
            LabelSlice::Plus => 1.0,
        }
    }
}

/// One cell of a partition.
///
/// `closed_upper[i]` marks the axes on which the cell includes its upper
/// face (the last cell along an axis); all other upper faces are open.
#[derive(Debug, Clone)]
pub struct Cell {
    rect: Rect,
    closed_upper: Vec<bool>,
    diameter: f64,
    input_diameter: f64,
    pub label_slice: Option<LabelSlice>,
    pub count: usize,
    pub local_lip: Option<f64>,
    pub local_smooth_norm: Option<f64>,
}

impl Cell {
    fn new(rect: Rect, closed_upper: Vec<bool>, input_dim: usize) -> Self {
        let diameter = rect.diameter();
        let input_diameter = rect.lower[..input_dim]
            .iter()
            .zip(&rect.upper[..input_dim])
            .map(|(lo, hi)| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt();
        Cell {
            rect,
            closed_upper,
            diameter,
            input_diameter,
            label_slice: None,
            count: 0,
            local_lip: None,
            local_smooth_norm: None,
        }
    }

    pub fn rect(&self) -> &Rect {
        &self.rect
    }

    /// Euclidean diameter of the cell. For paired cells this is the input
    /// projection's diameter: the label coordinate spans a single value.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Diameter of the projection onto the input coordinates.
    pub fn input_projection_diameter(&self) -> f64 {
        self.input_diameter
    }

    /// Half-open membership against the cell's own geometry.
    fn holds(&self, point: &[f64]) -> bool {
        for i in 0..self.rect.dim() {
            let x = point[i];
            let lo = self.rect.lower[i];
            let hi = self.rect.upper[i];
            let inside = if self.closed_upper[i] {
                lo <= x && x <= hi
            } else {
                lo <= x && x < hi
            };
            if !inside {
                return false;
            }
        }
        true
    }

    /// Do the two cells share a `(d-1)`-dimensional face?
    fn shares_face(&self, other: &Cell) -> bool {
        if self.label_slice != other.label_slice {
            return false;
        }
        let d = self.rect.dim();
        let mut touching_axes = 0usize;
        for i in 0..d {
            let (alo, ahi) = (self.rect.lower[i], self.rect.upper[i]);
            let (blo, bhi) = (other.rect.lower[i], other.rect.upper[i]);
            if ahi == blo || bhi == alo {
                touching_axes += 1;
            } else if alo.max(blo) >= ahi.min(bhi) {
                // No overlap and not touching on this axis.
                return false;
            }
        }
        touching_axes == 1
    }
}

/// Per-axis edge grid for O(log) assignment on product partitions.
#[derive(Debug, Clone)]
struct GridIndex {
    edges: Vec<Vec<f64>>,
}

impl GridIndex {
    /// Cell index along each axis for a point, honoring the half-open rule.
    fn locate(&self, point: &[f64]) -> Option<Vec<usize>> {
        let mut idx = Vec::with_capacity(point.len());
        for (x, edges) in point.iter().zip(&self.edges) {
            let m = edges.len() - 1;
            if *x < edges[0] || *x > edges[m] {
                return None;
            }
            let k = if *x == edges[m] {
                m - 1
            } else {
                // Largest k with edges[k] <= x.
                match edges.partition_point(|e| e <= x) {
                    0 => return None,
                    p => p - 1,
                }
            };
            idx.push(k);
        }
        Some(idx)
    }
}

/// A partition of a box domain into half-open rectangular cells.
#[derive(Debug, Clone)]
pub struct Partition {
    domain: Rect,
    input_dim: usize,
    cells: Vec<Cell>,
    paired: bool,
    grid: Option<GridIndex>,
}

fn axis_edges(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    let mut edges = Vec::with_capacity(m + 1);
    for k in 0..=m {
        edges.push(lo + (hi - lo) * k as f64 / m as f64);
    }
    edges[m] = hi;
    edges
}

impl Partition {
    /// Uniform grid with `cells_per_dim[i]` cells along axis `i`.
    ///
    /// Interior boundaries are half-open `[a, b)`; the last cell per axis is
    /// closed. The first `input_dim` coordinates count as the input
    /// projection for diameter purposes (defaults to all of them via
    /// [`Partition::grid`]).
    pub fn grid_with_input_dim(
        domain: Rect,
        cells_per_dim: &[usize],
        input_dim: usize,
    ) -> Result<Self> {
        if cells_per_dim.len() != domain.dim() {
            return Err(CoreError::InvalidPartition(format!(
                "cells_per_dim has length {} for a {}-dimensional domain",
                cells_per_dim.len(),
                domain.dim()
            )));
        }
        if cells_per_dim.iter().any(|&m| m == 0) {
            return Err(CoreError::InvalidPartition(
                "zero cells along an axis".into(),
            ));
        }
        if input_dim > domain.dim() {
            return Err(CoreError::InvalidPartition(
                "input_dim exceeds domain dimension".into(),
            ));
        }
        for i in 0..domain.dim() {
            if domain.lower[i] >= domain.upper[i] {
                return Err(CoreError::InvalidDomain(format!(
                    "grid axis {i} has no extent"
                )));
            }
        }
        let edges: Vec<Vec<f64>> = domain
            .lower
            .iter()
            .zip(&domain.upper)
            .zip(cells_per_dim)
            .map(|((lo, hi), &m)| axis_edges(*lo, *hi, m))
            .collect();

        let total: usize = cells_per_dim.iter().product();
        let mut cells = Vec::with_capacity(total);
        let mut idx = vec![0usize; domain.dim()];
        for _ in 0..total {
            let mut lo = Vec::with_capacity(domain.dim());
            let mut hi = Vec::with_capacity(domain.dim());
            let mut closed = Vec::with_capacity(domain.dim());
            for (ax, &k) in idx.iter().enumerate() {
                lo.push(edges[ax][k]);
                hi.push(edges[ax][k + 1]);
                closed.push(k + 1 == cells_per_dim[ax]);
            }
            cells.push(Cell::new(Rect { lower: lo, upper: hi }, closed, input_dim));
            // Row-major increment, last axis fastest.
            for ax in (0..domain.dim()).rev() {
                idx[ax] += 1;
                if idx[ax] < cells_per_dim[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Ok(Partition {
            domain,
            input_dim,
            cells,
            paired: false,
            grid: Some(GridIndex { edges }),
        })
    }

    /// Uniform grid where every coordinate is an input coordinate.
    pub fn grid(domain: Rect, cells_per_dim: &[usize]) -> Result<Self> {
        let d = domain.dim();
        Self::grid_with_input_dim(domain, cells_per_dim, d)
    }

    /// The global partition: one closed cell spanning the whole domain.
    /// Degenerate (point) domains are allowed here.
    pub fn single_cell(domain: Rect, input_dim: usize) -> Result<Self> {
        if input_dim > domain.dim() {
            return Err(CoreError::InvalidPartition(
                "input_dim exceeds domain dimension".into(),
            ));
        }
        let cell = Cell::new(domain.clone(), vec![true; domain.dim()], input_dim);
        Ok(Partition {
            domain,
            input_dim,
            cells: vec![cell],
            paired: false,
            grid: None,
        })
    }

    /// Duplicate an input-space partition at the two labels `-1` and `+1`.
    ///
    /// The result has `2k` cells, stored pairwise: `cells[2i]` is the minus
    /// slice and `cells[2i + 1]` the plus slice of input cell `i`. Cell
    /// diameters equal the input cell diameters.
    pub fn paired(input: &Partition) -> Result<Self> {
        if input.paired {
            return Err(CoreError::InvalidPartition(
                "partition is already paired".into(),
            ));
        }
        if input.input_dim != input.domain.dim() {
            return Err(CoreError::InvalidPartition(
                "paired partitions take an input-space partition".into(),
            ));
        }
        let mut cells = Vec::with_capacity(2 * input.cells.len());
        for cell in &input.cells {
            for slice in [LabelSlice::Minus, LabelSlice::Plus] {
                let mut c = Cell::new(
                    cell.rect.clone(),
                    cell.closed_upper.clone(),
                    input.input_dim,
                );
                c.label_slice = Some(slice);
                c.local_lip = cell.local_lip;
                c.local_smooth_norm = cell.local_smooth_norm;
                cells.push(c);
            }
        }
        Ok(Partition {
            domain: input.domain.clone(),
            input_dim: input.input_dim,
            cells,
            paired: true,
            grid: input.grid.clone(),
        })
    }

    /// The strip-plus-column partition of `[0,1]^2` used by the one-neuron
    /// divergence construction: `D - 1` full-height strips and a final
    /// column split into `D` squares, with `D` the exact integer ceiling of
    /// `N^{3/5}`.
    pub fn prop10(n: u64) -> Result<Self> {
        if n < 2 {
            return Err(CoreError::InvalidPartition(
                "construction needs N >= 2".into(),
            ));
        }
        let d = ceil_n_pow_3_5(n);
        let dn = d as usize;
        let domain = Rect::new(vec![0.0, 0.0], vec![1.0, 1.0])?;
        let x_edges = axis_edges(0.0, 1.0, dn);
        let y_edges = axis_edges(0.0, 1.0, dn);
        let mut cells = Vec::with_capacity(2 * dn - 1);
        for k in 0..dn - 1 {
            cells.push(Cell::new(
                Rect {
                    lower: vec![x_edges[k], 0.0],
                    upper: vec![x_edges[k + 1], 1.0],
                },
                vec![false, true],
                1,
            ));
        }
        for k in 0..dn {
            cells.push(Cell::new(
                Rect {
                    lower: vec![x_edges[dn - 1], y_edges[k]],
                    upper: vec![x_edges[dn], y_edges[k + 1]],
                },
                vec![true, k + 1 == dn],
                1,
            ));
        }
        Ok(Partition {
            domain,
            input_dim: 1,
            cells,
            paired: false,
            grid: None,
        })
    }

    pub fn domain(&self) -> &Rect {
        &self.domain
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn is_paired(&self) -> bool {
        self.paired
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cells_mut(&mut self) -> &mut [Cell] {
        &mut self.cells
    }

    pub fn max_diameter(&self) -> f64 {
        self.cells.iter().map(Cell::diameter).fold(0.0, f64::max)
    }

    pub fn total_count(&self) -> usize {
        self.cells.iter().map(|c| c.count).sum()
    }

    /// Index of the unique cell containing `point`.
    ///
    /// For paired partitions the point carries its label as the last
    /// coordinate, which must be exactly `-1` or `+1`.
    pub fn locate(&self, point: &[f64]) -> Option<usize> {
        if self.paired {
            let (x, y) = point.split_at(point.len() - 1);
            if x.len() != self.input_dim {
                return None;
            }
            let slice = if y[0] == -1.0 {
                LabelSlice::Minus
            } else if y[0] == 1.0 {
                LabelSlice::Plus
            } else {
                return None;
            };
            let base = match &self.grid {
                Some(grid) => flat_index(&grid.locate(x)?, &grid.edges),
                None => self
                    .cells
                    .iter()
                    .step_by(2)
                    .position(|c| c.holds(x))?,
            };
            return Some(2 * base + if slice == LabelSlice::Plus { 1 } else { 0 });
        }
        if point.len() != self.domain.dim() {
            return None;
        }
        match &self.grid {
            Some(grid) => Some(flat_index(&grid.locate(point)?, &grid.edges)),
            None => self.cells.iter().position(|c| c.holds(point)),
        }
    }

    /// Fill per-cell sample counts. Every sample must land in exactly one
    /// cell; the offending index is reported otherwise.
    pub fn assign_counts(&self, samples: &[Vec<f64>]) -> Result<Partition> {
        let mut out = self.clone();
        for cell in &mut out.cells {
            cell.count = 0;
        }
        for (index, point) in samples.iter().enumerate() {
            match out.locate(point) {
                Some(i) => out.cells[i].count += 1,
                None => {
                    return Err(CoreError::SampleOutOfDomain {
                        index,
                        point: point.clone(),
                    })
                }
            }
        }
        Ok(out)
    }

    /// Indices of every cell whose input projection contains `x` under the
    /// half-open rule. For partitions over a product space this is the
    /// column of cells above the input point; for paired partitions it is
    /// the pair at both labels.
    pub fn cells_containing_input(&self, x: &[f64]) -> Vec<usize> {
        if x.len() != self.input_dim {
            return Vec::new();
        }
        (0..self.cells.len())
            .filter(|&i| {
                let cell = &self.cells[i];
                (0..self.input_dim).all(|ax| {
                    let lo = cell.rect.lower[ax];
                    let hi = cell.rect.upper[ax];
                    if cell.closed_upper[ax] {
                        lo <= x[ax] && x[ax] <= hi
                    } else {
                        lo <= x[ax] && x[ax] < hi
                    }
                })
            })
            .collect()
    }

    /// Indices of cells sharing a face with cell `i`.
    pub fn face_neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.cells.len())
            .filter(|&j| j != i && self.cells[i].shares_face(&self.cells[j]))
            .collect()
    }
}

fn flat_index(idx: &[usize], edges: &[Vec<f64>]) -> usize {
    let mut flat = 0usize;
    for (k, e) in idx.iter().zip(edges) {
        flat = flat * (e.len() - 1) + k;
    }
    flat
}

/// Exact integer ceiling of `n^{3/5}`: the least `d` with `d^5 >= n^3`.
///
/// Floating-point `powf` misranks exact powers (e.g. `1024^{0.6}` evaluates
/// just above 64), so this stays in integer arithmetic throughout.
pub fn ceil_n_pow_3_5(n: u64) -> u64 {
    let target = (n as u128).pow(3);
    let mut d = (n as f64).powf(0.6).floor().max(1.0) as u64;
    while d > 1 && ((d - 1) as u128).pow(5) >= target {
        d -= 1;
    }
    while (d as u128).pow(5) < target {
        d += 1;
    }
    d
}
