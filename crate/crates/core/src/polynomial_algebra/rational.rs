use num_complex::Complex64;

use super::poly::{Jet, PolyField, Powers, Var};
use crate::error::{Error, Result};

/// Default pole tolerance on `|denominator|`.
pub const POLE_TOL: f64 = 1e-9;

/// Which factor foliation a leaf belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum LeafKind {
    /// Leaves `S x {b}`: `zb` is frozen, `z` runs along the leaf.
    Holomorphic,
    /// Leaves `{a} x S̄`: `z` is frozen, `zb` runs along the leaf.
    AntiHolomorphic,
}

/// Ratio of two [`PolyField`]s. A constant denominator is folded into the
/// numerator, so the denominator is either `1` or non-constant.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalField {
    num: PolyField,
    den: PolyField,
}

impl From<PolyField> for RationalField {
    fn from(p: PolyField) -> Self {
        let n = p.num_vars();
        RationalField {
            num: p,
            den: PolyField::one(n),
        }
    }
}

impl RationalField {
    pub fn new(num: PolyField, den: PolyField) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::InvalidInput("zero denominator".into()));
        }
        if num.num_vars() != den.num_vars() {
            return Err(Error::Dimension {
                expected: num.num_vars(),
                got: den.num_vars(),
            });
        }
        Ok(Self::normalized(num, den))
    }

    fn normalized(num: PolyField, den: PolyField) -> Self {
        if num.is_zero() {
            let n = num.num_vars();
            return RationalField {
                num,
                den: PolyField::one(n),
            };
        }
        match den.as_constant() {
            Some(c) if c != Complex64::new(1.0, 0.0) => {
                let n = den.num_vars();
                RationalField {
                    num: num.scale(1.0 / c),
                    den: PolyField::one(n),
                }
            }
            _ => RationalField { num, den },
        }
    }

    pub fn zero(num_vars: usize) -> Self {
        PolyField::zero(num_vars).into()
    }

    pub fn constant(num_vars: usize, c: Complex64) -> Self {
        PolyField::constant(num_vars, c).into()
    }

    pub fn num_vars(&self) -> usize {
        self.num.num_vars()
    }

    pub fn numerator(&self) -> &PolyField {
        &self.num
    }

    pub fn denominator(&self) -> &PolyField {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_one()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.den == other.den {
            return Ok(Self::normalized(self.num.add(&other.num), self.den.clone()));
        }
        if other.den.is_one() {
            let num = self.num.add(&other.num.checked_mul(&self.den)?);
            return Ok(Self::normalized(num, self.den.clone()));
        }
        if self.den.is_one() {
            let num = other.num.add(&self.num.checked_mul(&other.den)?);
            return Ok(Self::normalized(num, other.den.clone()));
        }
        let num = self
            .num
            .checked_mul(&other.den)?
            .add(&other.num.checked_mul(&self.den)?);
        Ok(Self::normalized(num, self.den.checked_mul(&other.den)?))
    }

    pub fn neg(&self) -> Self {
        RationalField {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::normalized(self.num.scale(s), self.den.clone())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        let num = self.num.checked_mul(&other.num)?;
        let den = if self.den.is_one() {
            other.den.clone()
        } else if other.den.is_one() {
            self.den.clone()
        } else {
            self.den.checked_mul(&other.den)?
        };
        Ok(Self::normalized(num, den))
    }

    /// Quotient-rule derivative.
    pub fn partial(&self, v: Var) -> Result<Self> {
        if self.den.is_one() {
            return Ok(self.num.partial(v).into());
        }
        let num = self
            .num
            .partial(v)
            .checked_mul(&self.den)?
            .sub(&self.num.checked_mul(&self.den.partial(v))?);
        Ok(Self::normalized(num, self.den.checked_mul(&self.den)?))
    }

    pub fn formal_conjugate(&self) -> Self {
        RationalField {
            num: self.num.formal_conjugate(),
            den: self.den.formal_conjugate(),
        }
    }

    /// Freezes the transverse block of variables at `param`.
    ///
    /// For a holomorphic leaf `zb := param` and the result depends on `z`
    /// only; for an antiholomorphic leaf `z := param`.
    pub fn restrict_to_leaf(&self, kind: LeafKind, param: &[Complex64]) -> Result<Self> {
        if param.len() != self.num_vars() {
            return Err(Error::Dimension {
                expected: self.num_vars(),
                got: param.len(),
            });
        }
        let zb_block = kind == LeafKind::Holomorphic;
        let den = self.den.substitute_block(zb_block, param);
        if den.is_zero() {
            return Err(Error::Pole {
                magnitude: 0.0,
                tolerance: POLE_TOL,
            });
        }
        Ok(Self::normalized(
            self.num.substitute_block(zb_block, param),
            den,
        ))
    }

    pub fn eval(&self, z: &[Complex64], zb: &[Complex64]) -> Result<Complex64> {
        self.eval_with_tol(z, zb, POLE_TOL)
    }

    pub fn eval_with_tol(&self, z: &[Complex64], zb: &[Complex64], tol: f64) -> Result<Complex64> {
        let n = self.num_vars();
        if z.len() != n || zb.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: z.len().min(zb.len()),
            });
        }
        let d = self.den.eval(z, zb);
        if d.norm() < tol {
            return Err(Error::Pole {
                magnitude: d.norm(),
                tolerance: tol,
            });
        }
        Ok(self.num.eval(z, zb) / d)
    }

    /// Evaluation at the real point `zb = conj(z)`.
    pub fn diagonal_eval(&self, z: &[Complex64]) -> Result<Complex64> {
        let zb: Vec<Complex64> = z.iter().map(|c| c.conj()).collect();
        self.eval(z, &zb)
    }

    pub fn max_exponents(&self) -> Vec<u32> {
        let a = self.num.max_exponents();
        let b = self.den.max_exponents();
        a.iter().zip(&b).map(|(x, y)| *x.max(y)).collect()
    }

    /// Value and derivatives from shared precomputed powers.
    pub fn eval_jet(&self, pw: &Powers, order: u8) -> Result<Jet> {
        let nj = self.num.eval_jet(pw, order);
        if self.den.is_one() {
            return Ok(nj);
        }
        let dj = self.den.eval_jet(pw, order);
        if dj.value.norm() < POLE_TOL {
            return Err(Error::Pole {
                magnitude: dj.value.norm(),
                tolerance: POLE_TOL,
            });
        }
        let inv = 1.0 / dj.value;
        let f = nj.value * inv;
        let m = nj.grad.len();
        let mut out = Jet::zero(m, order);
        out.value = f;
        if order >= 1 {
            for a in 0..m {
                out.grad[a] = (nj.grad[a] - f * dj.grad[a]) * inv;
            }
        }
        if order >= 2 {
            for a in 0..m {
                for b in 0..m {
                    out.hess[a * m + b] = (nj.hess[a * m + b]
                        - out.grad[a] * dj.grad[b]
                        - out.grad[b] * dj.grad[a]
                        - f * dj.hess[a * m + b])
                        * inv;
                }
            }
        }
        Ok(out)
    }
}

/// Maximum exponent table covering a family of fields.
pub fn max_exponents_of<'a, I>(fields: I, slots: usize) -> Vec<u32>
where
    I: IntoIterator<Item = &'a RationalField>,
{
    let mut m = vec![0u32; slots];
    for f in fields {
        for (a, b) in m.iter_mut().zip(f.max_exponents()) {
            *a = (*a).max(b);
        }
    }
    m
}
