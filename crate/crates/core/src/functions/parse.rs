//! Recursive-descent parser for function expressions.
//!
//! Grammar (whitespace ignored):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*')? unary)*        juxtaposition multiplies: "2z", "3exp(z)"
//! unary  := '-' unary | '+' unary | power
//! power  := atom ('^' integer)?
//! atom   := number | 'z' | 'i' | 'exp' '(' expr ')' | '(' expr ')'
//! ```
//!
//! Numbers accept decimal and exponent notation (`2.5e-3`). Positions in
//! error messages are zero-based byte offsets.

use super::expr::EntireFunction;
use crate::error::{Error, Result};
use num_complex::Complex64;

/// Parse an expression string into an entire function.
pub fn parse_function(src: &str) -> Result<EntireFunction> {
    let mut p = Parser { src: src.as_bytes(), pos: 0 };
    let f = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.err(format!("unexpected `{}`", p.src[p.pos] as char)));
    }
    Ok(f)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse { position: self.pos, message: message.into() }
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

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            match self.peek() {
                Some(x) => Err(self.err(format!("expected `{}`, found `{}`", c as char, x as char))),
                None => Err(self.err(format!("expected `{}`, found end of input", c as char))),
            }
        }
    }

    fn expr(&mut self) -> Result<EntireFunction> {
        let mut acc = self.term()?;
        loop {
            if self.eat(b'+') {
                acc = acc.add(&self.term()?);
            } else if self.eat(b'-') {
                acc = acc.sub(&self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn starts_factor(&mut self) -> bool {
        matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == b'.' || c == b'(' || c.is_ascii_alphabetic())
    }

    fn term(&mut self) -> Result<EntireFunction> {
        let mut acc = self.unary()?;
        loop {
            if self.eat(b'*') {
                acc = acc.mul(&self.unary()?);
            } else if self.starts_factor() {
                acc = acc.mul(&self.power()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<EntireFunction> {
        if self.eat(b'-') {
            Ok(self.unary()?.scale(Complex64::new(-1.0, 0.0)))
        } else if self.eat(b'+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<EntireFunction> {
        let base = self.atom()?;
        if self.eat(b'^') {
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.err("exponent must be a nonnegative integer"));
            }
            let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
            let n: u32 = text.parse().map_err(|_| Error::Parse { position: start, message: "exponent too large".into() })?;
            if n > 64 {
                return Err(Error::Parse { position: start, message: "exponent too large (max 64)".into() });
            }
            return Ok(base.powi(n));
        }
        Ok(base)
    }

    fn number(&mut self) -> Result<f64> {
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
                while j < s.len() && s[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        self.pos = i;
        let text = std::str::from_utf8(&s[start..i]).expect("ascii");
        text.parse::<f64>()
            .map_err(|_| Error::Parse { position: start, message: format!("malformed number `{text}`") })
    }

    fn atom(&mut self) -> Result<EntireFunction> {
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(c) if c.is_ascii_digit() || c == b'.' => Ok(EntireFunction::real(self.number()?)),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let ident = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                match ident {
                    "z" => Ok(EntireFunction::z()),
                    "i" => Ok(EntireFunction::constant(Complex64::new(0.0, 1.0))),
                    "exp" => {
                        self.expect(b'(')?;
                        let arg = self.expr()?;
                        self.expect(b')')?;
                        Ok(arg.exp())
                    }
                    _ => Err(Error::Parse { position: start, message: format!("unknown identifier `{ident}`") }),
                }
            }
            Some(c) => Err(self.err(format!("unexpected `{}`", c as char))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(src: &str, z: Complex64) -> Complex64 {
        parse_function(src).unwrap().eval_native(z)
    }

    #[test]
    fn arithmetic_and_precedence() {
        let z = Complex64::new(0.7, -0.2);
        assert!((at("z^3 - 1", z) - (z * z * z - 1.0)).norm() < 1e-14);
        assert!((at("-z^2", z) + z * z).norm() < 1e-14);
        assert!((at("2z", z) - 2.0 * z).norm() < 1e-14);
        assert!((at("3exp(2*z)", z) - 3.0 * (2.0 * z).exp()).norm() < 1e-13);
        assert!((at("exp(z) + exp(-z)", z) - (z.exp() + (-z).exp())).norm() < 1e-13);
        assert!((at("(1+i)*z", z) - Complex64::new(1.0, 1.0) * z).norm() < 1e-14);
        assert!((at("2.5e-1 z", z) - 0.25 * z).norm() < 1e-14);
    }

    #[test]
    fn nested_exp() {
        let f = parse_function("exp(exp(z))").unwrap();
        assert!((f.log_abs(Complex64::new(3.0, 0.0)).unwrap() - 3f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn errors_carry_positions() {
        match parse_function("exp(") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 4),
            other => panic!("{other:?}"),
        }
        match parse_function("z + sin(z)") {
            Err(Error::Parse { position, message }) => {
                assert_eq!(position, 4);
                assert!(message.contains("sin"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_function("z^x"), Err(Error::Parse { position: 2, .. })));
        assert!(matches!(parse_function("(z"), Err(Error::Parse { .. })));
        assert!(matches!(parse_function("z )"), Err(Error::Parse { position: 2, .. })));
    }
}
