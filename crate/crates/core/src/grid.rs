//! Uniform phase-space grid over `[0, 1] x [-v_max, v_max]^2`.

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceGrid {
    pub nx: usize,
    pub nv: usize,
    pub v_max: f64,
    pub dx: f64,
    pub dv: f64,
    pub x_nodes: Vec<f64>,
    /// Nodes of one velocity axis; the velocity grid is its tensor square.
    pub v_axis: Vec<f64>,
}

impl PhaseSpaceGrid {
    pub fn new(nx: usize, nv: usize, v_max: f64) -> Self {
        let dx = 1.0 / nx as f64;
        let dv = 2.0 * v_max / nv as f64;
        let x_nodes = (0..=nx).map(|i| i as f64 * dx).collect::<Vec<_>>();
        let v_axis = (0..=nv).map(|j| -v_max + j as f64 * dv).collect::<Vec<_>>();
        Self {
            nx,
            nv,
            v_max,
            dx,
            dv,
            x_nodes,
            v_axis,
        }
    }

    /// The time step is tied to the mesh: `dt = dx`.
    #[inline]
    pub fn dt(&self) -> f64 {
        self.dx
    }

    #[inline]
    pub fn nvp(&self) -> usize {
        self.nv + 1
    }

    /// Number of nodes in one velocity plane.
    #[inline]
    pub fn plane(&self) -> usize {
        self.nvp() * self.nvp()
    }

    pub fn len(&self) -> usize {
        (self.nx + 1) * self.plane()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.nvp() + j) * self.nvp() + k
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_nodes[i]
    }

    #[inline]
    pub fn v(&self, j: usize) -> f64 {
        self.v_axis[j]
    }

    /// All `(nv+1)^2` velocity nodes in `(v1, v2)` row-major order.
    pub fn v_nodes(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.plane());
        for &a in &self.v_axis {
            for &b in &self.v_axis {
                out.push((a, b));
            }
        }
        out
    }

    /// Trapezoid weight of velocity node `j` along one axis.
    #[inline]
    pub fn v_weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.nv {
            0.5 * self.dv
        } else {
            self.dv
        }
    }

    #[inline]
    pub fn x_weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.nx {
            0.5 * self.dx
        } else {
            self.dx
        }
    }
}
