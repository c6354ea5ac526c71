//! Loss functions the line search can drive.

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::net::{self, NetworkSpec};

/// A sum-of-samples loss over a population of `n_samples` training items.
///
/// Batches hold positions in `0..n_samples`.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    fn n_samples(&self) -> usize;

    fn loss(&self, x: &[f64], batch: &[usize]) -> Result<f64>;

    fn loss_grad(&self, x: &[f64], batch: &[usize]) -> Result<(f64, Vec<f64>)>;

    /// Train and test error, when the objective has a notion of them.
    fn errors(&self, _x: &[f64]) -> Option<(f64, f64)> {
        None
    }
}

/// A network on the training split of a dataset.
#[derive(Debug, Clone)]
pub struct NetObjective<'a> {
    spec: &'a NetworkSpec,
    data: &'a Dataset,
}

impl<'a> NetObjective<'a> {
    pub fn new(spec: &'a NetworkSpec, data: &'a Dataset) -> Result<Self> {
        spec.check_dataset(data)?;
        Ok(Self { spec, data })
    }

    pub fn spec(&self) -> &NetworkSpec {
        self.spec
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    fn rows(&self, batch: &[usize]) -> Vec<usize> {
        batch.iter().map(|&p| self.data.train_row(p)).collect()
    }
}

impl Objective for NetObjective<'_> {
    fn dim(&self) -> usize {
        self.spec.n_params()
    }

    fn n_samples(&self) -> usize {
        self.data.n_train()
    }

    fn loss(&self, x: &[f64], batch: &[usize]) -> Result<f64> {
        net::batch_loss(self.spec, x, self.data, &self.rows(batch))
    }

    fn loss_grad(&self, x: &[f64], batch: &[usize]) -> Result<(f64, Vec<f64>)> {
        net::batch_grad(self.spec, x, self.data, &self.rows(batch)).map(|(l, g)| (l, g.into_inner()))
    }

    fn errors(&self, x: &[f64]) -> Option<(f64, f64)> {
        Some((
            net::classification_error(self.spec, x, self.data, Split::Train),
            net::classification_error(self.spec, x, self.data, Split::Test),
        ))
    }
}

/// `½ xᵀAx − bᵀx` with symmetric `A`; the batch is ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Quadratic {
    /// `a` is row-major `n × n` and must be symmetric.
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let n = b.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        if a.len() != n * n {
            return Err(Error::DimensionMismatch(format!("{} matrix entries for dimension {n}", a.len())));
        }
        for i in 0..n {
            for j in 0..i {
                if a[i * n + j] != a[j * n + i] {
                    return Err(Error::DimensionMismatch("matrix is not symmetric".into()));
                }
            }
        }
        Ok(Self { n, a, b })
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        self.a
            .chunks_exact(self.n)
            .zip(&self.b)
            .map(|(row, bi)| row.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() - bi)
            .collect()
    }

    fn value(&self, x: &[f64], g: &[f64]) -> f64 {
        // ½ xᵀAx − bᵀx = ½ xᵀ(Ax − b) − ½ bᵀx
        let half: f64 = x.iter().zip(g).map(|(p, q)| p * q).sum();
        let bx: f64 = x.iter().zip(&self.b).map(|(p, q)| p * q).sum();
        0.5 * half - 0.5 * bx
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch(format!("point of length {} for dimension {}", x.len(), self.n)));
        }
        Ok(())
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.n
    }

    fn n_samples(&self) -> usize {
        1
    }

    fn loss(&self, x: &[f64], _batch: &[usize]) -> Result<f64> {
        self.loss_grad(x, _batch).map(|(l, _)| l)
    }

    fn loss_grad(&self, x: &[f64], _batch: &[usize]) -> Result<(f64, Vec<f64>)> {
        self.check(x)?;
        let g = self.grad(x);
        let f = self.value(x, &g);
        if !f.is_finite() {
            return Err(Error::NonFinite("loss"));
        }
        Ok((f, g))
    }
}
