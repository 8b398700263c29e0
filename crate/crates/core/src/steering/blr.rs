use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Bayesian linear regression over a fixed feature vector, one head per
/// output dimension.
///
/// Prior `w ~ N(0, I/alpha)`, noise precision `beta`. All heads see the
/// same inputs, so they share the precision matrix
/// `Lambda = alpha I + beta sum phi phi^T`; each keeps its own
/// `b = beta sum phi y`. The posterior mean is `Lambda^{-1} b`.
///
/// A lower Cholesky factor of `Lambda` is kept up to date with O(m^2)
/// rank-one updates. `Lambda` itself is also stored so the factor can be
/// checked against a fresh solve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlrPosterior {
    alpha: f64,
    beta: f64,
    dim: usize,
    /// Row-major symmetric `dim x dim`.
    precision: Vec<f64>,
    /// Row-major lower-triangular Cholesky factor of `precision`.
    factor: Vec<f64>,
    b: Vec<Vec<f64>>,
    observations: usize,
}

impl BlrPosterior {
    pub fn new(dim: usize, outputs: usize, alpha: f64, beta: f64) -> Self {
        assert!(alpha > 0.0 && beta > 0.0 && dim > 0 && outputs > 0);
        let mut precision = vec![0.0; dim * dim];
        let mut factor = vec![0.0; dim * dim];
        for i in 0..dim {
            precision[i * dim + i] = alpha;
            factor[i * dim + i] = alpha.sqrt();
        }
        Self {
            alpha,
            beta,
            dim,
            precision,
            factor,
            b: vec![vec![0.0; dim]; outputs],
            observations: 0,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outputs(&self) -> usize {
        self.b.len()
    }

    pub fn observations(&self) -> usize {
        self.observations
    }

    pub fn precision_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.precision)
    }

    pub fn mean_term(&self, output: usize) -> &[f64] {
        &self.b[output]
    }

    /// Rank-one update with one observation `(phi, targets)`.
    pub fn update(&mut self, phi: &[f64], targets: &[f64]) {
        assert_eq!(phi.len(), self.dim, "feature dimension");
        assert_eq!(targets.len(), self.outputs(), "target dimension");
        let n = self.dim;
        let beta = self.beta;
        for i in 0..n {
            let bi = beta * phi[i];
            let row = &mut self.precision[i * n..(i + 1) * n];
            for (p, pj) in row.iter_mut().zip(phi) {
                *p += bi * pj;
            }
        }
        for (b, y) in self.b.iter_mut().zip(targets) {
            for (bi, p) in b.iter_mut().zip(phi) {
                *bi += beta * p * y;
            }
        }
        let mut x: Vec<f64> = phi.iter().map(|p| beta.sqrt() * p).collect();
        cholesky_rank_one_update(&mut self.factor, n, &mut x);
        self.observations += 1;
    }

    /// Solves `L z = v` with the maintained factor.
    fn forward_solve(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut z = vec![0.0; n];
        for i in 0..n {
            let row = &self.factor[i * n..i * n + i];
            let s: f64 = row.iter().zip(&z[..i]).map(|(l, zj)| l * zj).sum();
            z[i] = (v[i] - s) / self.factor[i * n + i];
        }
        z
    }

    /// Solves `L^T w = z`.
    fn backward_solve(&self, z: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut w = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = z[i];
            for j in i + 1..n {
                s -= self.factor[j * n + i] * w[j];
            }
            w[i] = s / self.factor[i * n + i];
        }
        w
    }

    /// Posterior predictive mean per output and the shared predictive
    /// variance `1/beta + phi^T Lambda^{-1} phi`.
    pub fn predictive(&self, phi: &[f64]) -> (Vec<f64>, f64) {
        assert_eq!(phi.len(), self.dim, "feature dimension");
        let z = self.forward_solve(phi);
        let variance = 1.0 / self.beta + z.iter().map(|v| v * v).sum::<f64>();
        let means = self
            .b
            .iter()
            .map(|b| {
                if self.observations == 0 {
                    0.0
                } else {
                    let c = self.forward_solve(b);
                    c.iter().zip(&z).map(|(ci, zi)| ci * zi).sum()
                }
            })
            .collect();
        (means, variance)
    }

    /// Posterior mean weights per output from the maintained factor.
    pub fn weights(&self) -> Vec<Vec<f64>> {
        self.b
            .iter()
            .map(|b| self.backward_solve(&self.forward_solve(b)))
            .collect()
    }

    /// Posterior mean weights from a fresh Cholesky solve of `Lambda`.
    pub fn reference_weights(&self) -> Vec<Vec<f64>> {
        let chol = self
            .precision_matrix()
            .cholesky()
            .expect("precision is positive definite");
        self.b
            .iter()
            .map(|b| chol.solve(&DVector::from_column_slice(b)).as_slice().to_vec())
            .collect()
    }
}

/// Updates the row-major lower factor `l` of `A` in place so that it
/// factors `A + x x^T`. Consumes `x`.
fn cholesky_rank_one_update(l: &mut [f64], n: usize, x: &mut [f64]) {
    for k in 0..n {
        let lkk = l[k * n + k];
        let r = lkk.hypot(x[k]);
        let c = r / lkk;
        let s = x[k] / lkk;
        l[k * n + k] = r;
        if s == 0.0 {
            continue;
        }
        for i in k + 1..n {
            let lik = (l[i * n + k] + s * x[i]) / c;
            x[i] = c * x[i] - s * lik;
            l[i * n + k] = lik;
        }
    }
}
