use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default cap on the total degree produced by multiplication.
pub const DEFAULT_DEGREE_CAP: u32 = 16;

/// Index of a formal variable: `Z(i)` is `z_{i+1}`, `Zb(i)` is `zb_{i+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    Z(usize),
    Zb(usize),
}

impl Var {
    /// Slot of the variable in an exponent vector of length `2 * num_vars`.
    pub fn slot(self, num_vars: usize) -> usize {
        match self {
            Var::Z(i) => i,
            Var::Zb(i) => num_vars + i,
        }
    }
}

/// Multivariate polynomial with complex coefficients in paired variables
/// `z_1..z_n, zb_1..zb_n`.
///
/// Terms are kept in a `BTreeMap` keyed by exponent vectors, so each
/// monomial appears once and iteration order is canonical. Exact zero
/// coefficients are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyField {
    num_vars: usize,
    terms: BTreeMap<Vec<u32>, Complex64>,
}

impl PolyField {
    pub fn zero(num_vars: usize) -> Self {
        PolyField {
            num_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(num_vars: usize, c: Complex64) -> Self {
        let mut p = Self::zero(num_vars);
        p.insert(vec![0; 2 * num_vars], c);
        p
    }

    pub fn one(num_vars: usize) -> Self {
        Self::constant(num_vars, Complex64::new(1.0, 0.0))
    }

    pub fn var(num_vars: usize, v: Var) -> Self {
        let mut e = vec![0; 2 * num_vars];
        e[v.slot(num_vars)] = 1;
        let mut p = Self::zero(num_vars);
        p.insert(e, Complex64::new(1.0, 0.0));
        p
    }

    pub fn z(num_vars: usize, i: usize) -> Self {
        Self::var(num_vars, Var::Z(i))
    }

    pub fn zb(num_vars: usize, i: usize) -> Self {
        Self::var(num_vars, Var::Zb(i))
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs, merging
    /// duplicates and dropping zeros.
    pub fn from_terms<I>(num_vars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, Complex64)>,
    {
        let mut p = Self::zero(num_vars);
        for (e, c) in terms {
            if e.len() != 2 * num_vars {
                return Err(Error::Dimension {
                    expected: 2 * num_vars,
                    got: e.len(),
                });
            }
            p.insert(e, c);
        }
        Ok(p)
    }

    fn insert(&mut self, e: Vec<u32>, c: Complex64) {
        if c == Complex64::new(0.0, 0.0) {
            return;
        }
        match self.terms.get_mut(&e) {
            Some(v) => {
                *v += c;
                if *v == Complex64::new(0.0, 0.0) {
                    self.terms.remove(&e);
                }
            }
            None => {
                self.terms.insert(e, c);
            }
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Complex64)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Returns the constant value if the polynomial has no variable terms.
    pub fn as_constant(&self) -> Option<Complex64> {
        match self.terms.len() {
            0 => Some(Complex64::new(0.0, 0.0)),
            1 => {
                let (e, c) = self.terms.iter().next().unwrap();
                e.iter().all(|&k| k == 0).then_some(*c)
            }
            _ => None,
        }
    }

    pub fn is_one(&self) -> bool {
        self.as_constant() == Some(Complex64::new(1.0, 0.0))
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    /// Highest exponent of each variable slot.
    pub fn max_exponents(&self) -> Vec<u32> {
        let mut m = vec![0; 2 * self.num_vars];
        for e in self.terms.keys() {
            for (a, &b) in m.iter_mut().zip(e) {
                *a = (*a).max(b);
            }
        }
        m
    }

    /// Total degree in the `zb` variables.
    pub fn zb_degree(&self) -> u32 {
        let n = self.num_vars;
        self.terms
            .keys()
            .map(|e| e[n..].iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    /// Total degree in the `z` variables.
    pub fn z_degree(&self) -> u32 {
        let n = self.num_vars;
        self.terms
            .keys()
            .map(|e| e[..n].iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    fn check_vars(&self, other: &Self) {
        assert_eq!(
            self.num_vars, other.num_vars,
            "polynomials over different variable sets"
        );
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_vars(other);
        let mut p = self.clone();
        for (e, c) in &other.terms {
            p.insert(e.clone(), *c);
        }
        p
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.check_vars(other);
        let mut p = self.clone();
        for (e, c) in &other.terms {
            p.insert(e.clone(), -*c);
        }
        p
    }

    pub fn neg(&self) -> Self {
        self.scale(Complex64::new(-1.0, 0.0))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut p = Self::zero(self.num_vars);
        for (e, c) in &self.terms {
            p.insert(e.clone(), c * s);
        }
        p
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        self.mul_with_cap(other, DEFAULT_DEGREE_CAP)
    }

    pub fn mul_with_cap(&self, other: &Self, cap: u32) -> Result<Self> {
        self.check_vars(other);
        let degree = self.total_degree() + other.total_degree();
        if !self.is_zero() && !other.is_zero() && degree > cap {
            return Err(Error::DegreeOverflow { degree, cap });
        }
        let mut p = Self::zero(self.num_vars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                p.insert(e, c1 * c2);
            }
        }
        Ok(p)
    }

    pub fn pow(&self, k: u32) -> Result<Self> {
        let mut acc = Self::one(self.num_vars);
        for _ in 0..k {
            acc = acc.checked_mul(self)?;
        }
        Ok(acc)
    }

    /// Formal partial derivative with respect to one variable.
    pub fn partial(&self, v: Var) -> Self {
        let slot = v.slot(self.num_vars);
        let mut p = Self::zero(self.num_vars);
        for (e, c) in &self.terms {
            let k = e[slot];
            if k == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[slot] = k - 1;
            p.insert(e2, c * f64::from(k));
        }
        p
    }

    /// Swaps `z_i <-> zb_i` and conjugates every coefficient.
    pub fn formal_conjugate(&self) -> Self {
        let n = self.num_vars;
        let mut p = Self::zero(n);
        for (e, c) in &self.terms {
            let mut e2 = Vec::with_capacity(2 * n);
            e2.extend_from_slice(&e[n..]);
            e2.extend_from_slice(&e[..n]);
            p.insert(e2, c.conj());
        }
        p
    }

    /// Substitutes fixed values for either the `z` block (`zb_block = false`)
    /// or the `zb` block (`zb_block = true`). The result only involves the
    /// remaining block.
    pub fn substitute_block(&self, zb_block: bool, values: &[Complex64]) -> Self {
        let n = self.num_vars;
        assert_eq!(values.len(), n);
        let range = if zb_block { n..2 * n } else { 0..n };
        let mut p = Self::zero(n);
        for (e, c) in &self.terms {
            let mut factor = *c;
            let mut e2 = e.clone();
            for (idx, slot) in range.clone().enumerate() {
                let k = e[slot];
                if k > 0 {
                    factor *= values[idx].powu(k);
                }
                e2[slot] = 0;
            }
            p.insert(e2, factor);
        }
        p
    }

    /// Naive evaluation: z and zb are treated as independent.
    pub fn eval(&self, z: &[Complex64], zb: &[Complex64]) -> Complex64 {
        let pw = Powers::new(z, zb, &self.max_exponents());
        self.eval_powers(&pw)
    }

    pub fn eval_powers(&self, pw: &Powers) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (e, c) in &self.terms {
            let mut t = *c;
            for (slot, &k) in e.iter().enumerate() {
                if k > 0 {
                    t *= pw.get(slot, k);
                }
            }
            acc += t;
        }
        acc
    }

    /// Value, gradient and (optionally) Hessian over all `2n` slots.
    pub fn eval_jet(&self, pw: &Powers, order: u8) -> Jet {
        let m = 2 * self.num_vars;
        let mut jet = Jet::zero(m, order);
        for (e, c) in &self.terms {
            let mut t = *c;
            for (slot, &k) in e.iter().enumerate() {
                if k > 0 {
                    t *= pw.get(slot, k);
                }
            }
            jet.value += t;
            if order == 0 {
                continue;
            }
            for a in 0..m {
                let ka = e[a];
                if ka == 0 {
                    continue;
                }
                let mut ta = *c * f64::from(ka);
                for (slot, &k) in e.iter().enumerate() {
                    let k = if slot == a { k - 1 } else { k };
                    if k > 0 {
                        ta *= pw.get(slot, k);
                    }
                }
                jet.grad[a] += ta;
                if order < 2 {
                    continue;
                }
                for b in a..m {
                    let kb = if b == a { e[b] - 1 } else { e[b] };
                    if kb == 0 {
                        continue;
                    }
                    let mut tab = *c * f64::from(ka) * f64::from(kb);
                    for (slot, &k) in e.iter().enumerate() {
                        let mut k = k;
                        if slot == a {
                            k -= 1;
                        }
                        if slot == b {
                            k -= 1;
                        }
                        if k > 0 {
                            tab *= pw.get(slot, k);
                        }
                    }
                    jet.hess[a * m + b] += tab;
                    if a != b {
                        jet.hess[b * m + a] += tab;
                    }
                }
            }
        }
        jet
    }
}

/// Precomputed powers of the `2n` coordinates of one evaluation point.
#[derive(Debug, Clone)]
pub struct Powers {
    coords: Vec<Complex64>,
    table: Vec<Vec<Complex64>>,
}

impl Powers {
    pub fn new(z: &[Complex64], zb: &[Complex64], max_exp: &[u32]) -> Self {
        let coords: Vec<Complex64> = z.iter().chain(zb).copied().collect();
        let table = coords
            .iter()
            .enumerate()
            .map(|(slot, &x)| {
                let top = max_exp.get(slot).copied().unwrap_or(0) as usize;
                let mut row = Vec::with_capacity(top + 1);
                let mut acc = Complex64::new(1.0, 0.0);
                row.push(acc);
                for _ in 0..top {
                    acc *= x;
                    row.push(acc);
                }
                row
            })
            .collect();
        Powers { coords, table }
    }

    #[inline]
    fn get(&self, slot: usize, k: u32) -> Complex64 {
        let row = &self.table[slot];
        match row.get(k as usize) {
            Some(v) => *v,
            None => self.coords[slot].powu(k),
        }
    }
}

/// Value with first and second derivatives over the `2n` variable slots.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: Complex64,
    pub grad: Vec<Complex64>,
    /// Row-major `2n x 2n`; empty when order < 2.
    pub hess: Vec<Complex64>,
}

impl Jet {
    pub fn zero(m: usize, order: u8) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Jet {
            value: zero,
            grad: if order >= 1 { vec![zero; m] } else { vec![] },
            hess: if order >= 2 { vec![zero; m * m] } else { vec![] },
        }
    }

    pub fn hess_at(&self, a: usize, b: usize) -> Complex64 {
        let m = self.grad.len();
        self.hess[a * m + b]
    }
}
