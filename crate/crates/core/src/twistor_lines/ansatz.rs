use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::twistor_space::{Chart, TwistorSpace};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Truncated Taylor series of a line in the plus chart:
/// `x̃(λ) = Σ a_k λ^k` and `s(λ) = Σ b_k λ^k`.
///
/// Gauge: `(b_0)_0 = 0` and `Im (b_1)_0 = 0`. The free data
/// `(a_0, (b_0)_{1..n})` are the M-chart coordinates of the line.
#[derive(Debug, Clone, PartialEq)]
pub struct LineAnsatz {
    pub base_coeffs: Vec<DVector<Complex64>>,
    pub fiber_coeffs: Vec<DVector<Complex64>>,
}

fn horner(coeffs: &[DVector<Complex64>], lambda: Complex64) -> DVector<Complex64> {
    let mut acc = DVector::zeros(coeffs[0].len());
    for c in coeffs.iter().rev() {
        acc = acc * lambda + c;
    }
    acc
}

fn horner_derivative(coeffs: &[DVector<Complex64>], lambda: Complex64) -> DVector<Complex64> {
    let mut acc = DVector::zeros(coeffs[0].len());
    for (k, c) in coeffs.iter().enumerate().skip(1).rev() {
        acc = acc * lambda + c * Complex64::new(k as f64, 0.0);
    }
    acc
}

impl LineAnsatz {
    pub fn new(base_coeffs: Vec<DVector<Complex64>>, fiber_coeffs: Vec<DVector<Complex64>>) -> Result<Self> {
        if base_coeffs.is_empty() || fiber_coeffs.len() < 2 {
            return Err(Error::InvalidInput("ansatz needs base degree ≥ 0 and fiber degree ≥ 1".into()));
        }
        let n = base_coeffs[0].len();
        for a in &base_coeffs {
            if a.len() != n {
                return Err(Error::Dimension { expected: n, got: a.len() });
            }
        }
        for b in &fiber_coeffs {
            if b.len() != n + 1 {
                return Err(Error::Dimension {
                    expected: n + 1,
                    got: b.len(),
                });
            }
        }
        let finite = base_coeffs
            .iter()
            .chain(&fiber_coeffs)
            .all(|v| v.iter().all(|c| c.re.is_finite() && c.im.is_finite()));
        if !finite {
            return Err(Error::InvalidInput("non-finite ansatz coefficient".into()));
        }
        Ok(LineAnsatz {
            base_coeffs,
            fiber_coeffs,
        })
    }

    pub fn zeros(n: usize, base_degree: usize, fiber_degree: usize) -> Self {
        LineAnsatz {
            base_coeffs: vec![DVector::zeros(n); base_degree + 1],
            fiber_coeffs: vec![DVector::zeros(n + 1); fiber_degree + 1],
        }
    }

    pub fn n(&self) -> usize {
        self.base_coeffs[0].len()
    }

    pub fn base_degree(&self) -> usize {
        self.base_coeffs.len() - 1
    }

    pub fn fiber_degree(&self) -> usize {
        self.fiber_coeffs.len() - 1
    }

    pub fn base_at(&self, lambda: Complex64) -> DVector<Complex64> {
        horner(&self.base_coeffs, lambda)
    }

    pub fn fiber_at(&self, lambda: Complex64) -> DVector<Complex64> {
        horner(&self.fiber_coeffs, lambda)
    }

    pub fn base_derivative_at(&self, lambda: Complex64) -> DVector<Complex64> {
        horner_derivative(&self.base_coeffs, lambda)
    }

    pub fn fiber_derivative_at(&self, lambda: Complex64) -> DVector<Complex64> {
        horner_derivative(&self.fiber_coeffs, lambda)
    }

    /// Line of `x ∈ S`: `x̃ ≡ x̄`, `s = λ·E⁺_x̄(x)` up to a phase of `λ` making
    /// `(b_1)_0` real and positive.
    pub fn canonical(space: &TwistorSpace, x: &[Complex64]) -> Result<Self> {
        let n = space.n();
        if x.len() != n {
            return Err(Error::Dimension { expected: n, got: x.len() });
        }
        let xb: Vec<Complex64> = x.iter().map(|v| v.conj()).collect();
        let e = space.eval_row(Chart::Plus, &xb, x)?;
        if e[0].norm() < 1e-12 {
            return Err(Error::ZeroSection);
        }
        let phase = e[0].conj() / e[0].norm();
        Ok(LineAnsatz {
            base_coeffs: vec![DVector::from_vec(xb)],
            fiber_coeffs: vec![DVector::zeros(n + 1), e * phase],
        })
    }

    /// Real lines of the flat model with M-coordinates `(a0, c)`:
    /// `x̃ = a0 − c̄λ`, `s = (λ, c + ā0·λ)`.
    pub fn flat_line(a0: &[Complex64], c: &[Complex64]) -> Self {
        let n = a0.len();
        let mut b0 = DVector::zeros(n + 1);
        let mut b1 = DVector::zeros(n + 1);
        b1[0] = Complex64::new(1.0, 0.0);
        for i in 0..n {
            b0[i + 1] = c[i];
            b1[i + 1] = a0[i].conj();
        }
        LineAnsatz {
            base_coeffs: vec![
                DVector::from_column_slice(a0),
                DVector::from_iterator(n, c.iter().map(|v| -v.conj())),
            ],
            fiber_coeffs: vec![b0, b1],
        }
    }

    /// Zero-padded copy with at least the given degrees.
    pub fn with_degrees(&self, base_degree: usize, fiber_degree: usize) -> Self {
        let n = self.n();
        let mut out = self.clone();
        while out.base_coeffs.len() <= base_degree {
            out.base_coeffs.push(DVector::zeros(n));
        }
        while out.fiber_coeffs.len() <= fiber_degree {
            out.fiber_coeffs.push(DVector::zeros(n + 1));
        }
        out
    }

    /// Image under the circle action `e^{it}`, reparametrized by
    /// `λ ↦ e^{-it}λ` so that the gauge pins still hold.
    pub fn rotate(&self, t: f64) -> Self {
        let e = |k: f64| Complex64::from_polar(1.0, k * t);
        LineAnsatz {
            base_coeffs: self
                .base_coeffs
                .iter()
                .enumerate()
                .map(|(k, a)| a * e(-(k as f64)))
                .collect(),
            fiber_coeffs: self
                .fiber_coeffs
                .iter()
                .enumerate()
                .map(|(k, b)| b * e(1.0 - k as f64))
                .collect(),
        }
    }

    /// `[Re a0_i, Im a0_i]_i ++ [Re b0_a, Im b0_a]_{a≥1}`.
    pub fn m_coords(&self) -> DVector<f64> {
        let n = self.n();
        let mut m = DVector::zeros(4 * n);
        for i in 0..n {
            m[2 * i] = self.base_coeffs[0][i].re;
            m[2 * i + 1] = self.base_coeffs[0][i].im;
            m[2 * n + 2 * i] = self.fiber_coeffs[0][i + 1].re;
            m[2 * n + 2 * i + 1] = self.fiber_coeffs[0][i + 1].im;
        }
        m
    }

    pub fn set_m_coords(&mut self, m: &DVector<f64>) {
        let n = self.n();
        for i in 0..n {
            self.base_coeffs[0][i] = Complex64::new(m[2 * i], m[2 * i + 1]);
            self.fiber_coeffs[0][i + 1] = Complex64::new(m[2 * n + 2 * i], m[2 * n + 2 * i + 1]);
        }
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.n(), self.base_degree(), self.fiber_degree())
    }

    pub fn to_real(&self) -> DVector<f64> {
        let lay = self.layout();
        let mut v = DVector::zeros(lay.len());
        for (k, a) in self.base_coeffs.iter().enumerate() {
            for i in 0..lay.n {
                v[lay.base(k, i)] = a[i].re;
                v[lay.base(k, i) + 1] = a[i].im;
            }
        }
        for (k, b) in self.fiber_coeffs.iter().enumerate() {
            for a in 0..=lay.n {
                v[lay.fiber(k, a)] = b[a].re;
                v[lay.fiber(k, a) + 1] = b[a].im;
            }
        }
        v
    }

    pub fn from_real(lay: &Layout, v: &DVector<f64>) -> Self {
        let mut out = LineAnsatz::zeros(lay.n, lay.base_degree, lay.fiber_degree);
        for k in 0..=lay.base_degree {
            for i in 0..lay.n {
                out.base_coeffs[k][i] = Complex64::new(v[lay.base(k, i)], v[lay.base(k, i) + 1]);
            }
        }
        for k in 0..=lay.fiber_degree {
            for a in 0..=lay.n {
                out.fiber_coeffs[k][a] = Complex64::new(v[lay.fiber(k, a)], v[lay.fiber(k, a) + 1]);
            }
        }
        out
    }

    /// Largest violation of the gauge pins.
    pub fn gauge_residual(&self) -> f64 {
        self.fiber_coeffs[0][0].norm().max(self.fiber_coeffs[1][0].im.abs())
    }

    /// Max coefficient distance; missing coefficients count as zero.
    pub fn distance(&self, other: &LineAnsatz) -> f64 {
        fn part(a: &[DVector<Complex64>], b: &[DVector<Complex64>]) -> f64 {
            let m = a.len().max(b.len());
            let mut worst: f64 = 0.0;
            for k in 0..m {
                let len = a.get(k).or(b.get(k)).map(|v| v.len()).unwrap_or(0);
                for i in 0..len {
                    let x = a.get(k).map(|v| v[i]).unwrap_or(ZERO);
                    let y = b.get(k).map(|v| v[i]).unwrap_or(ZERO);
                    worst = worst.max((x - y).norm());
                }
            }
            worst
        }
        part(&self.base_coeffs, &other.base_coeffs).max(part(&self.fiber_coeffs, &other.fiber_coeffs))
    }
}

/// Real parameter layout: each complex coefficient occupies `(re, im)`,
/// base coefficients first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n: usize,
    pub base_degree: usize,
    pub fiber_degree: usize,
}

impl Layout {
    pub fn new(n: usize, base_degree: usize, fiber_degree: usize) -> Self {
        Layout {
            n,
            base_degree,
            fiber_degree,
        }
    }

    pub fn len(&self) -> usize {
        2 * self.n * (self.base_degree + 1) + 2 * (self.n + 1) * (self.fiber_degree + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn base(&self, k: usize, i: usize) -> usize {
        2 * (k * self.n + i)
    }

    pub fn fiber(&self, k: usize, a: usize) -> usize {
        2 * self.n * (self.base_degree + 1) + 2 * (k * (self.n + 1) + a)
    }

    pub fn gauge(&self) -> [usize; 3] {
        [self.fiber(0, 0), self.fiber(0, 0) + 1, self.fiber(1, 0) + 1]
    }

    /// Parameter indices of the M-coordinates, in `m_coords` order.
    pub fn target(&self) -> Vec<usize> {
        let n = self.n;
        let mut t: Vec<usize> = (0..2 * n).map(|r| self.base(0, 0) + r).collect();
        t.extend((0..2 * n).map(|r| self.fiber(0, 1) + r));
        t
    }

    /// Indices moved by the solver.
    pub fn free(&self) -> Vec<usize> {
        let pinned: Vec<usize> = self.gauge().iter().copied().chain(self.target()).collect();
        (0..self.len()).filter(|p| !pinned.contains(p)).collect()
    }

    /// Everything but the gauge pins; target indices come first.
    pub fn non_gauge(&self) -> Vec<usize> {
        let mut v = self.target();
        v.extend(self.free());
        v
    }
}
