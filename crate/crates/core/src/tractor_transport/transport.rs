use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{LeafContext, TractorJet};
use crate::error::{Error, Result};

/// RK4 settings. The step count per segment is fixed by the segment length,
/// so results depend smoothly on the leaf parameter.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TransportConfig {
    pub steps_per_unit: f64,
    pub min_steps: usize,
    /// When set, each segment is also integrated with half the step and the
    /// Richardson estimate `|X_h − X_{h/2}| / 15` must stay below this.
    pub richardson_tol: Option<f64>,
    /// Overrides the length-based step count for every segment.
    pub fixed_steps: Option<usize>,
}

impl Default for TransportConfig {
    fn default() -> Self {
        TransportConfig {
            steps_per_unit: 256.0,
            min_steps: 8,
            richardson_tol: None,
            fixed_steps: None,
        }
    }
}

impl TransportConfig {
    pub fn steps_for(&self, a: &[Complex64], b: &[Complex64]) -> usize {
        if let Some(k) = self.fixed_steps {
            return k.max(1);
        }
        let len = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        ((self.steps_per_unit * len).ceil() as usize).max(self.min_steps)
    }
}

/// Piecewise-linear path through leaf coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub vertices: Vec<Vec<Complex64>>,
}

impl Path {
    pub fn segment(a: &[Complex64], b: &[Complex64]) -> Self {
        Path {
            vertices: vec![a.to_vec(), b.to_vec()],
        }
    }

    pub fn polyline(vertices: Vec<Vec<Complex64>>) -> Self {
        Path { vertices }
    }

    pub fn closed(mut vertices: Vec<Vec<Complex64>>) -> Self {
        if let Some(first) = vertices.first().cloned() {
            vertices.push(first);
        }
        Path { vertices }
    }
}

fn rk4_segment(
    leaf: &LeafContext,
    a: &[Complex64],
    b: &[Complex64],
    steps: usize,
    x0: &DMatrix<Complex64>,
) -> Result<DMatrix<Complex64>> {
    let d: Vec<Complex64> = b.iter().zip(a).map(|(p, q)| p - q).collect();
    // dX/dt = −Σ_i d_i A_i(a + t d) X
    let gen = |t: f64| -> Result<DMatrix<Complex64>> {
        let p: Vec<Complex64> = a.iter().zip(&d).map(|(q, v)| q + v * t).collect();
        let mats = leaf.connection_matrices(&p)?;
        let m = x0.nrows();
        let mut g = DMatrix::zeros(m, m);
        for (ai, di) in mats.iter().zip(&d) {
            g -= ai * *di;
        }
        Ok(g)
    };
    let h = 1.0 / steps as f64;
    let hc = Complex64::new(h, 0.0);
    let mut x = x0.clone();
    let mut g0 = gen(0.0)?;
    for s in 0..steps {
        let t = s as f64 * h;
        let gm = gen(t + 0.5 * h)?;
        let g1 = gen(t + h)?;
        let k1 = &g0 * &x;
        let k2 = &gm * (&x + &k1 * (hc * 0.5));
        let k3 = &gm * (&x + &k2 * (hc * 0.5));
        let k4 = &g1 * (&x + &k3 * hc);
        x += (k1 + (k2 + k3) * Complex64::new(2.0, 0.0) + k4) * (hc / 6.0);
        g0 = g1;
    }
    Ok(x)
}

fn transport_from(leaf: &LeafContext, path: &Path, config: &TransportConfig, x0: DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let mut x = x0;
    for w in path.vertices.windows(2) {
        let steps = config.steps_for(&w[0], &w[1]);
        let coarse = rk4_segment(leaf, &w[0], &w[1], steps, &x)?;
        if let Some(tol) = config.richardson_tol {
            let fine = rk4_segment(leaf, &w[0], &w[1], 2 * steps, &x)?;
            let estimate = (&coarse - &fine).iter().map(|v| v.norm()).fold(0.0, f64::max) / 15.0;
            if estimate > tol {
                return Err(Error::Step {
                    estimate,
                    tolerance: tol,
                });
            }
            x = fine;
        } else {
            x = coarse;
        }
    }
    Ok(x)
}

/// Parallel transport of the identity along `path`.
pub fn transport_matrix(leaf: &LeafContext, path: &Path, config: &TransportConfig) -> Result<DMatrix<Complex64>> {
    let m = leaf.n() + 1;
    transport_from(leaf, path, config, DMatrix::identity(m, m))
}

/// Parallel transport of a single jet along `path`.
pub fn transport(leaf: &LeafContext, path: &Path, jet: &TractorJet, config: &TransportConfig) -> Result<TractorJet> {
    let v = jet.to_vector();
    let x0 = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
    let x = transport_from(leaf, path, config, x0)?;
    Ok(TractorJet::from_vector(&x.column(0).into_owned()))
}
