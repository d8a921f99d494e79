//! Structured triangulations of axis-aligned rectangles.
//!
//! Every benchmark domain in this crate is a rectangle, possibly identified
//! (glued) along one coordinate axis to model angular periodicity.  The mesh
//! is the classic criss-cross-free pattern: an `nx` by `ny` grid of cells,
//! each split into two triangles along the diagonal from the lower-left to
//! the upper-right corner.  Connectivity is built on the *unwrapped* integer
//! grid and then folded, so periodic identification is exact by construction
//! rather than by floating-point coordinate matching.
//!
//! Triangles are consistently counter-clockwise, and each triangle stores its
//! own corner coordinates (`tri_coords`).  For triangles that cross a
//! periodic seam those coordinates are the unwrapped ones, so element
//! geometry (Jacobians, areas, diameters) never sees the identification.

use std::collections::HashMap;

use thiserror::Error;

/// Axis-aligned rectangle `(x_min, x_max) x (y_min, y_max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    /// Validating constructor; rejects empty or non-finite extents.
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Rect, MeshError> {
        let all_finite =
            x_min.is_finite() && x_max.is_finite() && y_min.is_finite() && y_max.is_finite();
        if !all_finite || x_min >= x_max || y_min >= y_max {
            return Err(MeshError::DegenerateRect {
                x_min,
                x_max,
                y_min,
                y_max,
            });
        }
        Ok(Rect {
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// Coordinate axis of the parameter rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// One of the four sides of the rectangle.
///
/// `Left`/`Right` are `x = x_min` / `x = x_max`; `Bottom`/`Top` are
/// `y = y_min` / `y = y_max`.  Sides along a periodic axis do not exist as
/// boundary (the mesh is glued there).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];
}

/// Undirected mesh edge.
#[derive(Debug, Clone, Copy)]
pub struct Edge {
    /// Global ids of the two endpoint vertices.
    pub vertices: [usize; 2],
    /// Canonical integer grid positions of the endpoints (unwrapped except
    /// when the whole edge lies on the far periodic row/column).
    pub grid: [[usize; 2]; 2],
    /// Geometric midpoint (the quadratic edge dof sits here).
    pub midpoint: [f64; 2],
    /// Euclidean length.
    pub length: f64,
}

/// Structured triangulation of a rectangle, optionally periodic in one axis.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub rect: Rect,
    pub nx: usize,
    pub ny: usize,
    pub periodic: Option<Axis>,
    /// Vertex coordinates, indexed by global vertex id.
    pub vertices: Vec<[f64; 2]>,
    /// Canonical integer grid position of each vertex.
    pub vertex_grid: Vec<[usize; 2]>,
    /// Global vertex ids of each triangle's corners, counter-clockwise.
    pub triangles: Vec<[usize; 3]>,
    /// Unwrapped corner coordinates of each triangle (same corner order).
    pub tri_coords: Vec<[[f64; 2]; 3]>,
    /// Global edge id of each triangle's local edges; local edge `k` joins
    /// corners `k` and `(k + 1) % 3`.
    pub tri_edges: Vec<[usize; 3]>,
    /// Unique undirected edges.
    pub edges: Vec<Edge>,
    /// Boundary edges with their side tag, ascending in edge id.
    pub boundary: Vec<(usize, Side)>,
    /// Largest triangle diameter.
    pub h: f64,
}

/// Mesh construction failures.
#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("degenerate rectangle ({x_min}, {x_max}) x ({y_min}, {y_max})")]
    DegenerateRect {
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    },
    #[error("subdivision counts must be positive, got nx = {nx}, ny = {ny}")]
    NoSubdivisions { nx: usize, ny: usize },
    #[error("periodic axis needs at least 2 subdivisions, got {count}")]
    PeriodicTooCoarse { count: usize },
}

/// Builds the structured triangulation of `rect` with `nx` by `ny` cells,
/// each split into two counter-clockwise triangles, optionally identifying
/// the two sides orthogonal to `periodic`.
pub fn build_rect_mesh(
    rect: Rect,
    nx: usize,
    ny: usize,
    periodic: Option<Axis>,
) -> Result<Mesh, MeshError> {
    if nx == 0 || ny == 0 {
        return Err(MeshError::NoSubdivisions { nx, ny });
    }
    match periodic {
        Some(Axis::X) if nx < 2 => return Err(MeshError::PeriodicTooCoarse { count: nx }),
        Some(Axis::Y) if ny < 2 => return Err(MeshError::PeriodicTooCoarse { count: ny }),
        _ => {}
    }

    let dx = rect.width() / nx as f64;
    let dy = rect.height() / ny as f64;
    let coord = |i: usize, j: usize| [rect.x_min + i as f64 * dx, rect.y_min + j as f64 * dy];

    // Fold a single unwrapped grid node onto its canonical representative.
    // Only the far row/column of the periodic axis is folded.
    let canonical_node = |i: usize, j: usize| -> [usize; 2] {
        match periodic {
            Some(Axis::X) => [if i == nx { 0 } else { i }, j],
            Some(Axis::Y) => [i, if j == ny { 0 } else { j }],
            None => [i, j],
        }
    };

    // Vertex ids enumerate the canonical grid row-major.
    let n_cols = if periodic == Some(Axis::X) { nx } else { nx + 1 };
    let n_rows = if periodic == Some(Axis::Y) { ny } else { ny + 1 };
    let vertex_id = |i: usize, j: usize| -> usize {
        let [ci, cj] = canonical_node(i, j);
        cj * n_cols + ci
    };

    let mut vertices = Vec::with_capacity(n_cols * n_rows);
    let mut vertex_grid = Vec::with_capacity(n_cols * n_rows);
    for j in 0..n_rows {
        for i in 0..n_cols {
            vertices.push(coord(i, j));
            vertex_grid.push([i, j]);
        }
    }

    // Canonical key for an edge between unwrapped nodes a and b.  A whole
    // edge lying on the far periodic row/column is the same geometric edge as
    // its image on the near side, so fold it; edges merely touching the far
    // side are genuine distinct edges and keep their unwrapped key.
    let edge_key = |a: [usize; 2], b: [usize; 2]| -> ([usize; 2], [usize; 2]) {
        let (mut a, mut b) = (a, b);
        match periodic {
            Some(Axis::X) if a[0] == nx && b[0] == nx => {
                a[0] = 0;
                b[0] = 0;
            }
            Some(Axis::Y) if a[1] == ny && b[1] == ny => {
                a[1] = 0;
                b[1] = 0;
            }
            _ => {}
        }
        if (a[1], a[0]) <= (b[1], b[0]) {
            (a, b)
        } else {
            (b, a)
        }
    };

    let mut edge_ids: HashMap<([usize; 2], [usize; 2]), usize> = HashMap::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    let mut tri_coords = Vec::with_capacity(2 * nx * ny);
    let mut tri_edges = Vec::with_capacity(2 * nx * ny);

    let mut intern_edge = |a: [usize; 2], b: [usize; 2]| -> usize {
        let key = edge_key(a, b);
        if let Some(&id) = edge_ids.get(&key) {
            return id;
        }
        let id = edges.len();
        let (ka, kb) = key;
        let pa = coord(ka[0], ka[1]);
        let pb = coord(kb[0], kb[1]);
        edges.push(Edge {
            vertices: [vertex_id(ka[0], ka[1]), vertex_id(kb[0], kb[1])],
            grid: [ka, kb],
            midpoint: [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])],
            length: ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt(),
        });
        edge_ids.insert(key, id);
        id
    };

    for cj in 0..ny {
        for ci in 0..nx {
            let c00 = [ci, cj];
            let c10 = [ci + 1, cj];
            let c11 = [ci + 1, cj + 1];
            let c01 = [ci, cj + 1];
            for corners in [[c00, c10, c11], [c00, c11, c01]] {
                triangles.push([
                    vertex_id(corners[0][0], corners[0][1]),
                    vertex_id(corners[1][0], corners[1][1]),
                    vertex_id(corners[2][0], corners[2][1]),
                ]);
                tri_coords.push([
                    coord(corners[0][0], corners[0][1]),
                    coord(corners[1][0], corners[1][1]),
                    coord(corners[2][0], corners[2][1]),
                ]);
                tri_edges.push([
                    intern_edge(corners[0], corners[1]),
                    intern_edge(corners[1], corners[2]),
                    intern_edge(corners[2], corners[0]),
                ]);
            }
        }
    }

    // Boundary classification from canonical grid keys.  Sides along the
    // periodic axis are glued and intentionally never tagged.
    let mut boundary = Vec::new();
    for (id, edge) in edges.iter().enumerate() {
        let [a, b] = edge.grid;
        let side = if periodic != Some(Axis::X) && a[0] == 0 && b[0] == 0 {
            Some(Side::Left)
        } else if periodic != Some(Axis::X) && a[0] == nx && b[0] == nx {
            Some(Side::Right)
        } else if periodic != Some(Axis::Y) && a[1] == 0 && b[1] == 0 {
            Some(Side::Bottom)
        } else if periodic != Some(Axis::Y) && a[1] == ny && b[1] == ny {
            Some(Side::Top)
        } else {
            None
        };
        if let Some(side) = side {
            boundary.push((id, side));
        }
    }

    let h = tri_coords
        .iter()
        .map(|c| triangle_diameter(c))
        .fold(0.0f64, f64::max);

    Ok(Mesh {
        rect,
        nx,
        ny,
        periodic,
        vertices,
        vertex_grid,
        triangles,
        tri_coords,
        tri_edges,
        edges,
        boundary,
        h,
    })
}

fn triangle_diameter(c: &[[f64; 2]; 3]) -> f64 {
    let mut d: f64 = 0.0;
    for k in 0..3 {
        let a = c[k];
        let b = c[(k + 1) % 3];
        d = d.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
    }
    d
}

/// Edge ids lying on any of the requested sides, ascending.
pub fn boundary_edges(mesh: &Mesh, sides: &[Side]) -> Vec<usize> {
    mesh.boundary
        .iter()
        .filter(|(_, s)| sides.contains(s))
        .map(|&(id, _)| id)
        .collect()
}

impl Mesh {
    /// Signed doubled area of triangle `t`; positive for the counter-clockwise
    /// orientation this builder produces.
    pub fn triangle_det(&self, t: usize) -> f64 {
        let [a, b, c] = self.tri_coords[t];
        (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        0.5 * self.triangle_det(t).abs()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Plain-text dump of the entity tables for debugging.
    pub fn debug_dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "mesh {}x{} periodic={:?} V={} E={} T={} h={:.6}",
            self.nx,
            self.ny,
            self.periodic,
            self.n_vertices(),
            self.n_edges(),
            self.n_triangles(),
            self.h
        );
        for (i, (v, g)) in self.vertices.iter().zip(&self.vertex_grid).enumerate() {
            let _ = writeln!(out, "v {i}: ({:.6}, {:.6}) grid ({}, {})", v[0], v[1], g[0], g[1]);
        }
        for (t, (tri, edges)) in self.triangles.iter().zip(&self.tri_edges).enumerate() {
            let _ = writeln!(
                out,
                "t {t}: v ({}, {}, {}) e ({}, {}, {})",
                tri[0], tri[1], tri[2], edges[0], edges[1], edges[2]
            );
        }
        for (id, e) in self.edges.iter().enumerate() {
            let tag = self
                .boundary
                .iter()
                .find(|(b, _)| *b == id)
                .map(|(_, s)| format!(" {s:?}"))
                .unwrap_or_default();
            let _ = writeln!(out, "e {id}: v ({}, {}){tag}", e.vertices[0], e.vertices[1]);
        }
        out
    }
}
