//! Structured rectangular meshes over the unit square and the L-shaped domain.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// The two experiment domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DomainSpec {
    /// `[0,1]^2`
    UnitSquare,
    /// `(-1,1)^2` minus `[0,1) x (-1,0]`
    LShape,
}

impl DomainSpec {
    pub fn area(self) -> f64 {
        match self {
            DomainSpec::UnitSquare => 1.0,
            DomainSpec::LShape => 3.0,
        }
    }

    /// Lower-left corner of the bounding box.
    fn origin(self) -> (f64, f64) {
        match self {
            DomainSpec::UnitSquare => (0.0, 0.0),
            DomainSpec::LShape => (-1.0, -1.0),
        }
    }

    /// Number of candidate cells per side of the bounding box for `n` cells per unit length.
    fn cells_per_side(self, n: usize) -> usize {
        match self {
            DomainSpec::UnitSquare => n,
            DomainSpec::LShape => 2 * n,
        }
    }

    /// Whether candidate cell `(ci, cj)` (grid units) belongs to the domain.
    fn keeps_cell(self, n: usize, ci: usize, cj: usize) -> bool {
        match self {
            DomainSpec::UnitSquare => true,
            // grid index n corresponds to coordinate 0
            DomainSpec::LShape => !(ci >= n && cj < n),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DomainSpec::UnitSquare => "square",
            DomainSpec::LShape => "lshape",
        }
    }
}

impl std::str::FromStr for DomainSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "square" | "unitsquare" | "unit_square" => Ok(DomainSpec::UnitSquare),
            "lshape" | "l-shape" | "l_shape" => Ok(DomainSpec::LShape),
            other => Err(Error::InvalidArgument(format!("unknown domain `{other}`"))),
        }
    }
}

/// Uniform mesh of axis-aligned squares of side `1/N`.
///
/// Nodes and cells are enumerated lexicographically by `(y, x)`. Cells list
/// their corners counterclockwise starting at the lower-left one.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh<T> {
    pub domain: DomainSpec,
    pub subdivisions: usize,
    pub nodes: Vec<[T; 2]>,
    pub cells: Vec<[usize; 4]>,
    pub boundary_nodes: Vec<usize>,
    is_boundary: Vec<bool>,
    /// Integer grid position of each node.
    node_grid: Vec<(usize, usize)>,
    /// Integer grid position of each cell's lower-left corner.
    cell_grid: Vec<(usize, usize)>,
    /// Dense lookup from grid position to node index.
    node_lookup: Vec<Option<usize>>,
    /// Dense lookup from grid position to cell index.
    cell_lookup: Vec<Option<usize>>,
    grid_cells: usize,
}

impl<T: Real> Mesh<T> {
    /// Builds the mesh with `n` cells per unit length.
    pub fn build(domain: DomainSpec, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "mesh needs at least 2 subdivisions, got {n}"
            )));
        }
        let g = domain.cells_per_side(n);
        let (ox, oy) = domain.origin();
        let side = T::one() / T::from_usize_lossy(n);

        let mut cell_lookup = vec![None; g * g];
        let mut cell_grid = Vec::new();
        for cj in 0..g {
            for ci in 0..g {
                if domain.keeps_cell(n, ci, cj) {
                    cell_lookup[cj * g + ci] = Some(cell_grid.len());
                    cell_grid.push((ci, cj));
                }
            }
        }

        let has_cell = |ci: isize, cj: isize| -> bool {
            ci >= 0
                && cj >= 0
                && (ci as usize) < g
                && (cj as usize) < g
                && cell_lookup[cj as usize * g + ci as usize].is_some()
        };

        let gp = g + 1;
        let mut node_lookup = vec![None; gp * gp];
        let mut nodes = Vec::new();
        let mut node_grid = Vec::new();
        let mut is_boundary = Vec::new();
        for j in 0..gp {
            for i in 0..gp {
                let (ii, jj) = (i as isize, j as isize);
                let incident = [
                    has_cell(ii - 1, jj - 1),
                    has_cell(ii, jj - 1),
                    has_cell(ii - 1, jj),
                    has_cell(ii, jj),
                ];
                let count = incident.iter().filter(|&&b| b).count();
                if count == 0 {
                    continue;
                }
                node_lookup[j * gp + i] = Some(nodes.len());
                let x = T::lit(ox) + T::from_usize_lossy(i) * side;
                let y = T::lit(oy) + T::from_usize_lossy(j) * side;
                nodes.push([x, y]);
                node_grid.push((i, j));
                is_boundary.push(count < 4);
            }
        }

        let cells = cell_grid
            .iter()
            .map(|&(ci, cj)| {
                let at = |i: usize, j: usize| node_lookup[j * gp + i].expect("cell corner exists");
                [at(ci, cj), at(ci + 1, cj), at(ci + 1, cj + 1), at(ci, cj + 1)]
            })
            .collect();

        let boundary_nodes = is_boundary
            .iter()
            .enumerate()
            .filter_map(|(k, &b)| b.then_some(k))
            .collect();

        Ok(Mesh {
            domain,
            subdivisions: n,
            nodes,
            cells,
            boundary_nodes,
            is_boundary,
            node_grid,
            cell_grid,
            node_lookup,
            cell_lookup,
            grid_cells: g,
        })
    }

    /// Cell side length `1/N`.
    pub fn cell_side(&self) -> T {
        T::one() / T::from_usize_lossy(self.subdivisions)
    }

    /// Mesh size as reported in tables: the cell diagonal `sqrt(2)/N`.
    pub fn h(&self) -> T {
        T::SQRT_2() * self.cell_side()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.is_boundary[node]
    }

    /// Integer grid position of a node.
    pub fn node_grid(&self, node: usize) -> (usize, usize) {
        self.node_grid[node]
    }

    /// Integer grid position of a cell's lower-left corner.
    pub fn cell_grid(&self, cell: usize) -> (usize, usize) {
        self.cell_grid[cell]
    }

    /// Candidate cells per side of the bounding box.
    pub fn grid_cells(&self) -> usize {
        self.grid_cells
    }

    pub fn node_at(&self, i: usize, j: usize) -> Option<usize> {
        let gp = self.grid_cells + 1;
        (i < gp && j < gp).then(|| self.node_lookup[j * gp + i]).flatten()
    }

    pub fn cell_at(&self, ci: usize, cj: usize) -> Option<usize> {
        let g = self.grid_cells;
        (ci < g && cj < g).then(|| self.cell_lookup[cj * g + ci]).flatten()
    }

    /// Lower-left corner coordinates of a cell.
    pub fn cell_origin(&self, cell: usize) -> [T; 2] {
        self.nodes[self.cells[cell][0]]
    }

    /// Finds a cell containing `(x, y)` and the local coordinates in `[0,1]^2`.
    pub fn locate(&self, x: T, y: T) -> Option<(usize, T, T)> {
        let (ox, oy) = self.domain.origin();
        let n = T::from_usize_lossy(self.subdivisions);
        let gx = (x - T::lit(ox)) * n;
        let gy = (y - T::lit(oy)) * n;
        let g = self.grid_cells as isize;
        let base_i = gx.floor().to_isize()?;
        let base_j = gy.floor().to_isize()?;
        // points on cell edges may belong to a neighbour when the natural cell is absent
        for (di, dj) in [(0, 0), (-1, 0), (0, -1), (-1, -1)] {
            let ci = (base_i + di).clamp(0, g - 1);
            let cj = (base_j + dj).clamp(0, g - 1);
            if let Some(cell) = self.cell_at(ci as usize, cj as usize) {
                let xi = gx - T::from_isize(ci).unwrap();
                let eta = gy - T::from_isize(cj).unwrap();
                let tol = T::lit(1e-12) * T::from_isize(g).unwrap();
                if xi >= -tol && xi <= T::one() + tol && eta >= -tol && eta <= T::one() + tol {
                    return Some((cell, xi, eta));
                }
            }
        }
        None
    }

    /// Plain-text listing: one node per line (`index x y is_boundary`), then cells.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# nodes {}", self.nodes.len());
        for (k, p) in self.nodes.iter().enumerate() {
            let _ = writeln!(out, "{k} {} {} {}", p[0], p[1], u8::from(self.is_boundary[k]));
        }
        let _ = writeln!(out, "# cells {}", self.cells.len());
        for (k, c) in self.cells.iter().enumerate() {
            let _ = writeln!(out, "{k} {} {} {} {}", c[0], c[1], c[2], c[3]);
        }
        out
    }

    pub fn write_dump(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.dump().as_bytes())?;
        Ok(())
    }
}

/// Parent/child relation between two nested meshes of the same domain.
#[derive(Debug, Clone)]
pub struct NestingMap<T> {
    pub coarse: Mesh<T>,
    pub fine: Mesh<T>,
    pub ratio: usize,
    pub cell_children: Vec<Vec<usize>>,
}

impl<T: Real> NestingMap<T> {
    pub fn build(coarse: &Mesh<T>, fine: &Mesh<T>) -> Result<Self> {
        if coarse.domain != fine.domain {
            return Err(Error::Nesting(format!(
                "domains differ ({:?} vs {:?})",
                coarse.domain, fine.domain
            )));
        }
        let (nc, nf) = (coarse.subdivisions, fine.subdivisions);
        if nf < nc || nf % nc != 0 {
            return Err(Error::Nesting(format!("{nf} is not a multiple of {nc}")));
        }
        let r = nf / nc;
        let cell_children = coarse
            .cell_grid
            .iter()
            .map(|&(ci, cj)| {
                let mut kids = Vec::with_capacity(r * r);
                for b in 0..r {
                    for a in 0..r {
                        match fine.cell_at(ci * r + a, cj * r + b) {
                            Some(c) => kids.push(c),
                            None => {
                                return Err(Error::Nesting(format!(
                                    "fine cell under coarse cell ({ci},{cj}) missing"
                                )))
                            }
                        }
                    }
                }
                Ok(kids)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NestingMap {
            coarse: coarse.clone(),
            fine: fine.clone(),
            ratio: r,
            cell_children,
        })
    }

    /// Coarse cell containing a fine cell.
    pub fn parent_of(&self, fine_cell: usize) -> usize {
        let (ci, cj) = self.fine.cell_grid(fine_cell);
        self.coarse
            .cell_at(ci / self.ratio, cj / self.ratio)
            .expect("nesting verified at construction")
    }
}
