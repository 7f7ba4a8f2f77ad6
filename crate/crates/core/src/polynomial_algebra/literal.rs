//! Text form of polynomials and rational functions.
//!
//! A polynomial is a sum of terms such as `(-1.0+0.5i) z1^2 zb2`; a
//! rational function is `P / Q`. Coefficients are printed with the shortest
//! round-trip float representation, so canonical forms survive a
//! print/parse cycle bit for bit.

use num_complex::Complex64;

use super::poly::PolyField;
use super::rational::RationalField;
use crate::error::{Error, Result};

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_coeff(c: &Complex64) -> String {
    let im = fmt_f64(c.im);
    let sep = if im.starts_with('-') { "" } else { "+" };
    format!("({}{}{}i)", fmt_f64(c.re), sep, im)
}

pub fn format_poly(p: &PolyField) -> String {
    if p.is_zero() {
        return "0".to_string();
    }
    let n = p.num_vars();
    let mut out = Vec::with_capacity(p.num_terms());
    for (e, c) in p.terms() {
        let mut t = fmt_coeff(c);
        for (slot, &k) in e.iter().enumerate() {
            if k == 0 {
                continue;
            }
            let name = if slot < n {
                format!("z{}", slot + 1)
            } else {
                format!("zb{}", slot - n + 1)
            };
            t.push(' ');
            t.push_str(&name);
            if k > 1 {
                t.push_str(&format!("^{k}"));
            }
        }
        out.push(t);
    }
    out.join(" + ")
}

pub fn format_rational(f: &RationalField) -> String {
    if f.is_polynomial() {
        format_poly(f.numerator())
    } else {
        format!("{} / {}", format_poly(f.numerator()), format_poly(f.denominator()))
    }
}

struct Scanner<'a> {
    src: &'a [u8],
    pos: usize,
    offset: usize,
}

impl<'a> Scanner<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: 1,
            column: self.offset + self.pos + 1,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, ch: u8) -> bool {
        if self.peek() == Some(ch) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        while i < s.len() && (s[i].is_ascii_digit() || s[i] == b'.') {
            i += 1;
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
                j += 1;
            }
            if j < s.len() && s[j].is_ascii_digit() {
                i = j;
                while i < s.len() && s[i].is_ascii_digit() {
                    i += 1;
                }
            }
        }
        if i == start {
            return Err(self.err("expected a number"));
        }
        let text = std::str::from_utf8(&s[start..i]).unwrap();
        self.pos = i;
        text.parse::<f64>()
            .map_err(|_| self.err(format!("invalid number '{text}'")))
    }

    fn signed_number(&mut self) -> Result<f64> {
        let neg = if self.eat(b'-') {
            true
        } else {
            self.eat(b'+');
            false
        };
        let x = self.number()?;
        Ok(if neg { -x } else { x })
    }

    /// Complex literal between parentheses: `a`, `bi`, `a+bi`, `a-bi`, `i`.
    fn paren_complex(&mut self) -> Result<Complex64> {
        let first_neg = if self.eat(b'-') {
            true
        } else {
            self.eat(b'+');
            false
        };
        if self.eat(b'i') {
            let im = if first_neg { -1.0 } else { 1.0 };
            return self.close(Complex64::new(0.0, im));
        }
        let a = self.number()?;
        let a = if first_neg { -a } else { a };
        if self.eat(b'i') {
            return self.close(Complex64::new(0.0, a));
        }
        match self.peek() {
            Some(b'+') | Some(b'-') => {
                let b = self.signed_number()?;
                if !self.eat(b'i') {
                    return Err(self.err("expected 'i' after imaginary part"));
                }
                self.close(Complex64::new(a, b))
            }
            _ => self.close(Complex64::new(a, 0.0)),
        }
    }

    fn close(&mut self, c: Complex64) -> Result<Complex64> {
        if self.eat(b')') {
            Ok(c)
        } else {
            Err(self.err("expected ')'"))
        }
    }

    fn uint(&mut self) -> Result<u32> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected an integer"));
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| self.err("integer out of range"))
    }

    fn term(&mut self, n: usize, sign: f64) -> Result<(Vec<u32>, Complex64)> {
        let mut coeff = Complex64::new(sign, 0.0);
        let mut exps = vec![0u32; 2 * n];
        let mut factors = 0;
        loop {
            match self.peek() {
                Some(b'(') => {
                    self.pos += 1;
                    coeff *= self.paren_complex()?;
                }
                Some(c) if c.is_ascii_digit() || c == b'.' => {
                    let x = self.number()?;
                    if self.src.get(self.pos) == Some(&b'i') {
                        self.pos += 1;
                        coeff *= Complex64::new(0.0, x);
                    } else {
                        coeff *= x;
                    }
                }
                Some(b'i') => {
                    self.pos += 1;
                    coeff *= Complex64::new(0.0, 1.0);
                }
                Some(b'z') => {
                    self.pos += 1;
                    let bar = self.src.get(self.pos) == Some(&b'b');
                    if bar {
                        self.pos += 1;
                    }
                    let idx = self.uint()? as usize;
                    if idx == 0 || idx > n {
                        return Err(self.err(format!("variable index {idx} out of range 1..={n}")));
                    }
                    let k = if self.eat(b'^') { self.uint()? } else { 1 };
                    let slot = if bar { n + idx - 1 } else { idx - 1 };
                    exps[slot] += k;
                }
                Some(b'*') => {
                    self.pos += 1;
                    continue;
                }
                _ => break,
            }
            factors += 1;
        }
        if factors == 0 {
            return Err(self.err("expected a term"));
        }
        Ok((exps, coeff))
    }

    fn poly(&mut self, n: usize) -> Result<PolyField> {
        let mut terms = Vec::new();
        let mut sign = if self.eat(b'-') {
            -1.0
        } else {
            self.eat(b'+');
            1.0
        };
        loop {
            terms.push(self.term(n, sign)?);
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    sign = 1.0;
                }
                Some(b'-') => {
                    self.pos += 1;
                    sign = -1.0;
                }
                _ => break,
            }
        }
        PolyField::from_terms(n, terms)
    }
}

pub fn parse_poly(src: &str, n: usize) -> Result<PolyField> {
    parse_poly_at(src, n, 0)
}

fn parse_poly_at(src: &str, n: usize, offset: usize) -> Result<PolyField> {
    let mut sc = Scanner {
        src: src.as_bytes(),
        pos: 0,
        offset,
    };
    let p = sc.poly(n)?;
    if sc.peek().is_some() {
        return Err(sc.err("unexpected trailing input"));
    }
    Ok(p)
}

/// Parses `P` or `P / Q`.
pub fn parse_rational(src: &str, n: usize) -> Result<RationalField> {
    let mut depth = 0i32;
    let mut split = None;
    for (i, ch) in src.bytes().enumerate() {
        match ch {
            b'(' => depth += 1,
            b')' => depth -= 1,
            b'/' if depth == 0 => {
                if split.is_some() {
                    return Err(Error::Parse {
                        line: 1,
                        column: i + 1,
                        message: "more than one '/'".into(),
                    });
                }
                split = Some(i);
            }
            _ => {}
        }
    }
    match split {
        None => Ok(parse_poly_at(src, n, 0)?.into()),
        Some(i) => {
            let num = parse_poly_at(&src[..i], n, 0)?;
            let den = parse_poly_at(&src[i + 1..], n, i + 1)?;
            RationalField::new(num, den).map_err(|e| Error::Parse {
                line: 1,
                column: i + 1,
                message: e.to_string(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_term_syntax() {
        let p = parse_poly("(-1.0+0.5i) z1^2 zb2", 2).unwrap();
        let (e, c) = p.terms().next().unwrap();
        assert_eq!(e, &vec![2, 0, 0, 1]);
        assert_eq!(*c, Complex64::new(-1.0, 0.5));
    }

    #[test]
    fn whitespace_variations() {
        let a = parse_poly("(1+2i)z1 zb1+ 3 z2^2-i zb2", 2).unwrap();
        let b = parse_poly("  ( 1 + 2i ) z1*zb1 +3z2^2 - (0+1i) zb2 ", 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rational_round_trip() {
        let f = parse_rational("(0.1+0.2i) zb1 / 1 + z1 zb1 + z2 zb2", 2).unwrap();
        let s = format_rational(&f);
        assert_eq!(parse_rational(&s, 2).unwrap(), f);
        assert_eq!(format_rational(&parse_rational(&s, 2).unwrap()), s);
    }

    #[test]
    fn errors_carry_column() {
        match parse_poly("z1 + z3", 2) {
            Err(Error::Parse { column, .. }) => assert_eq!(column, 8),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_rational("z1 / 0", 2).is_err());
    }

    #[test]
    fn zero_literal() {
        assert!(parse_poly("0", 2).unwrap().is_zero());
        assert_eq!(format_poly(&PolyField::zero(2)), "0");
    }
}
