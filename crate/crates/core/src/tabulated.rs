use crate::error::{Error, Result};

/// Number of nodes of the default output table.
pub const DEFAULT_TABLE_NODES: usize = 1025;

/// A function of age sampled on `[0, a†]`, interpolated by piecewise-cubic
/// Hermite polynomials with finite-difference slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedFn {
    nodes: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl TabulatedFn {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return Err(Error::Validation(format!(
                "table needs at least 2 nodes and matching values ({} nodes, {} values)",
                nodes.len(),
                values.len()
            )));
        }
        if nodes[0] != 0.0 {
            return Err(Error::Validation(format!("table starts at {} instead of 0", nodes[0])));
        }
        if let Some(w) = nodes.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::Validation(format!(
                "table nodes not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        let slopes = slopes(&nodes, &values);
        Ok(TabulatedFn { nodes, values, slopes })
    }

    /// Samples `f` on `n` uniform nodes of `[0, a_dagger]`.
    pub fn uniform<F: FnMut(f64) -> f64>(a_dagger: f64, n: usize, mut f: F) -> Self {
        let n = n.max(2);
        let nodes: Vec<f64> = (0..n)
            .map(|i| if i == n - 1 { a_dagger } else { a_dagger * i as f64 / (n - 1) as f64 })
            .collect();
        let values = nodes.iter().map(|&a| f(a)).collect();
        TabulatedFn::new(nodes, values).expect("uniform nodes are valid")
    }

    pub fn zeros(a_dagger: f64, n: usize) -> Self {
        Self::uniform(a_dagger, n, |_| 0.0)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn a_dagger(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn eval(&self, a: f64) -> f64 {
        let n = self.nodes.len();
        let i = match self.nodes.binary_search_by(|x| x.total_cmp(&a)) {
            Ok(i) => return self.values[i],
            Err(0) => 0,
            Err(i) if i >= n => n - 2,
            Err(i) => i - 1,
        };
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let h = x1 - x0;
        let t = (a - x0) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.values[i] + h10 * h * self.slopes[i] + h01 * self.values[i + 1] + h11 * h * self.slopes[i + 1]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Three-point slopes, one-sided at the ends.
fn slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 2 {
        let d = (y[1] - y[0]) / (x[1] - x[0]);
        return vec![d, d];
    }
    let mut s = vec![0.0; n];
    for i in 1..n - 1 {
        let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
        let (d0, d1) = ((y[i] - y[i - 1]) / h0, (y[i + 1] - y[i]) / h1);
        s[i] = (h1 * d0 + h0 * d1) / (h0 + h1);
    }
    let (h0, h1) = (x[1] - x[0], x[2] - x[1]);
    let (d0, d1) = ((y[1] - y[0]) / h0, (y[2] - y[1]) / h1);
    s[0] = d0 - h0 * (d1 - d0) / (h0 + h1);
    let (h0, h1) = (x[n - 2] - x[n - 3], x[n - 1] - x[n - 2]);
    let (d0, d1) = ((y[n - 2] - y[n - 3]) / h0, (y[n - 1] - y[n - 2]) / h1);
    s[n - 1] = d1 + h1 * (d1 - d0) / (h0 + h1);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_smooth_functions() {
        let f = TabulatedFn::uniform(std::f64::consts::FRAC_PI_2, DEFAULT_TABLE_NODES, f64::cos);
        for i in 0..997 {
            let a = 1.5707 * i as f64 / 996.0;
            assert!((f.eval(a) - a.cos()).abs() < 1e-9);
        }
        assert_eq!(f.eval(0.0), 1.0);
        let cubic = TabulatedFn::uniform(1.0, 11, |a| a * a * a);
        assert!((cubic.eval(0.55) - 0.55f64.powi(3)).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_nodes() {
        assert!(TabulatedFn::new(vec![0.0, 1.0, 1.0], vec![0.0; 3]).is_err());
        assert!(TabulatedFn::new(vec![0.1, 1.0], vec![0.0; 2]).is_err());
        assert!(TabulatedFn::new(vec![0.0], vec![0.0]).is_err());
    }
}
