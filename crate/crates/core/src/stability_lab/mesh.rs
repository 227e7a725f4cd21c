use serde::{Deserialize, Serialize};

use crate::coeff_space::{Grid, PiecewiseFn};
use crate::error::{Error, Result};

use super::sparse::CsrMatrix;

/// Uniform P1 mesh of the unit interval (segments) or unit square (each
/// square split along its `(i, j) → (i+1, j+1)` diagonal). Boundary nodes
/// carry homogeneous Dirichlet data and are left out of the interior numbering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    dim: usize,
    n: usize,
    nodes: Vec<[f64; 2]>,
    /// Vertex ids and the mesh cell (segment or square) each element belongs to.
    elements: Vec<(Vec<usize>, usize)>,
    interior: Vec<Option<usize>>,
    n_interior: usize,
}

impl Mesh {
    /// `n` subdivisions per axis, `h = 1/n`.
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(
                "mesh needs at least 2 subdivisions per axis".into(),
            ));
        }
        let h = 1.0 / n as f64;
        match dim {
            1 => {
                let nodes = (0..=n).map(|j| [j as f64 * h, 0.0]).collect();
                let elements = (0..n).map(|k| (vec![k, k + 1], k)).collect();
                let interior = (0..=n)
                    .map(|j| (j > 0 && j < n).then(|| j - 1))
                    .collect();
                Ok(Self {
                    dim,
                    n,
                    nodes,
                    elements,
                    interior,
                    n_interior: n - 1,
                })
            }
            2 => {
                let id = |i: usize, j: usize| j * (n + 1) + i;
                let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
                let mut interior = Vec::with_capacity((n + 1) * (n + 1));
                for j in 0..=n {
                    for i in 0..=n {
                        nodes.push([i as f64 * h, j as f64 * h]);
                        let inside = i > 0 && i < n && j > 0 && j < n;
                        interior.push(inside.then(|| (j - 1) * (n - 1) + (i - 1)));
                    }
                }
                let mut elements = Vec::with_capacity(2 * n * n);
                for j in 0..n {
                    for i in 0..n {
                        let cell = j * n + i;
                        elements.push((vec![id(i, j), id(i + 1, j), id(i + 1, j + 1)], cell));
                        elements.push((vec![id(i, j), id(i + 1, j + 1), id(i, j + 1)], cell));
                    }
                }
                Ok(Self {
                    dim,
                    n,
                    nodes,
                    elements,
                    interior,
                    n_interior: (n - 1) * (n - 1),
                })
            }
            _ => Err(Error::InvalidInput(format!("unsupported dimension {dim}"))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn subdivisions(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    /// Coordinates of interior nodes in interior numbering.
    pub fn interior_points(&self) -> Vec<[f64; 2]> {
        let mut out = vec![[0.0; 2]; self.n_interior];
        for (node, slot) in self.interior.iter().enumerate() {
            if let Some(k) = slot {
                out[*k] = self.nodes[node];
            }
        }
        out
    }

    /// Signed area (length in 1D) of every element.
    pub fn element_measures(&self) -> Vec<f64> {
        self.elements
            .iter()
            .map(|(v, _)| match self.dim {
                1 => self.nodes[v[1]][0] - self.nodes[v[0]][0],
                _ => {
                    let [a, b, c] = [self.nodes[v[0]], self.nodes[v[1]], self.nodes[v[2]]];
                    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
                }
            })
            .collect()
    }

    /// Value of `σ` on each mesh cell; `σ`'s grid must have the mesh dimension
    /// and a resolution dividing the subdivision count.
    pub fn cell_values(&self, sigma: &PiecewiseFn) -> Result<Vec<f64>> {
        let grid = sigma.grid();
        let m = grid.resolution();
        let dim_ok = matches!(
            (grid, self.dim),
            (Grid::Line(_), 1) | (Grid::Square(_), 2)
        );
        if !dim_ok {
            return Err(Error::AlignmentError(format!(
                "{}D coefficient on a {}D mesh",
                grid.dim(),
                self.dim
            )));
        }
        if self.n % m != 0 {
            return Err(Error::AlignmentError(format!(
                "{m} coefficient cells per axis do not divide {} mesh subdivisions",
                self.n
            )));
        }
        let r = self.n / m;
        let v = sigma.values();
        Ok(match self.dim {
            1 => (0..self.n).map(|k| v[k / r]).collect(),
            _ => (0..self.n * self.n)
                .map(|c| {
                    let (i, j) = (c % self.n, c / self.n);
                    v[(j / r) * m + i / r]
                })
                .collect(),
        })
    }

    /// Interior stiffness of `−div(c ∇·)` for per-cell values `c`, exact for
    /// piecewise-constant `c`.
    pub fn stiffness(&self, cell_values: &[f64]) -> CsrMatrix {
        let mut triplets = Vec::with_capacity(self.elements.len() * 9);
        for ((verts, cell), measure) in self.elements.iter().zip(self.element_measures()) {
            let c = cell_values[*cell];
            let grads = self.gradients(verts, measure);
            for (a, &va) in verts.iter().enumerate() {
                let Some(ia) = self.interior[va] else { continue };
                for (b, &vb) in verts.iter().enumerate() {
                    let Some(ib) = self.interior[vb] else { continue };
                    let g = grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1];
                    triplets.push((ia, ib, c * measure * g));
                }
            }
        }
        CsrMatrix::from_triplets(self.n_interior, triplets)
    }

    /// `σ ≡ 1` stiffness.
    pub fn riesz(&self) -> CsrMatrix {
        self.stiffness(&vec![1.0; self.cell_count()])
    }

    fn cell_count(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Row sums of the consistent mass matrix at interior nodes.
    pub fn lumped_mass(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_interior];
        let share = (self.dim + 1) as f64;
        for ((verts, _), measure) in self.elements.iter().zip(self.element_measures()) {
            for &v in verts {
                if let Some(i) = self.interior[v] {
                    out[i] += measure / share;
                }
            }
        }
        out
    }

    fn gradients(&self, verts: &[usize], measure: f64) -> Vec<[f64; 2]> {
        match self.dim {
            1 => vec![[-1.0 / measure, 0.0], [1.0 / measure, 0.0]],
            _ => {
                let p: Vec<[f64; 2]> = verts.iter().map(|&v| self.nodes[v]).collect();
                (0..3)
                    .map(|k| {
                        let (b, c) = (p[(k + 1) % 3], p[(k + 2) % 3]);
                        [(b[1] - c[1]) / (2.0 * measure), (c[0] - b[0]) / (2.0 * measure)]
                    })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_measures() {
        let m = Mesh::new(2, 4).unwrap();
        assert_eq!(m.n_interior(), 9);
        assert_eq!(m.element_count(), 32);
        let total: f64 = m.element_measures().iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert!(m.element_measures().iter().all(|&a| a > 0.0));
        let m1 = Mesh::new(1, 4).unwrap();
        assert_eq!(m1.n_interior(), 3);
        assert!(Mesh::new(3, 4).is_err());
        assert!(Mesh::new(1, 1).is_err());
    }

    #[test]
    fn riesz_stencils() {
        let m1 = Mesh::new(1, 4).unwrap();
        let k = m1.riesz();
        assert_eq!(k.get(1, 1), 8.0);
        assert_eq!(k.get(1, 0), -4.0);
        // five-point stencil on the bisected square mesh
        let m2 = Mesh::new(2, 4).unwrap();
        let k = m2.riesz();
        assert!((k.get(4, 4) - 4.0).abs() < 1e-14);
        assert!((k.get(4, 3) + 1.0).abs() < 1e-14);
        assert!((k.get(4, 1) + 1.0).abs() < 1e-14);
        assert!(k.get(4, 0).abs() < 1e-14);
        assert!(k.is_symmetric());
    }

    #[test]
    fn lumped_mass_values() {
        let m1 = Mesh::new(1, 8).unwrap();
        assert!(m1.lumped_mass().iter().all(|&v| (v - 0.125).abs() < 1e-15));
        let m2 = Mesh::new(2, 8).unwrap();
        assert!(m2.lumped_mass().iter().all(|&v| (v - 1.0 / 64.0).abs() < 1e-15));
    }
}
