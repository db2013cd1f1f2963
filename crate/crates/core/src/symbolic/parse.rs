//! Recursive-descent parser for right-hand-side strings in system files.
//!
//! Grammar (whitespace insensitive):
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' integer)?
//! atom    := number | ident | ident '(' sum ')' | '(' sum ')'
//! ```
//!
//! `^` binds tighter than unary minus, so `-x^2` is `-(x^2)`.

use std::collections::BTreeMap;

use super::expr::{Expr, Node};
use super::SymbolicError;

/// Parses `text` over the given state and parameter names. `t` is time.
pub fn parse_expr(
    text: &str,
    state_names: &[String],
    param_names: &[String],
) -> Result<Expr, SymbolicError> {
    parse_expr_with_constants(text, state_names, param_names, &BTreeMap::new())
}

/// Like [`parse_expr`], additionally substituting named constants as literals.
pub fn parse_expr_with_constants(
    text: &str,
    state_names: &[String],
    param_names: &[String],
    constants: &BTreeMap<String, f64>,
) -> Result<Expr, SymbolicError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        state_names,
        param_names,
        constants,
    };
    let e = p.sum()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    state_names: &'a [String],
    param_names: &'a [String],
    constants: &'a BTreeMap<String, f64>,
}

impl Parser<'_> {
    fn syntax(&self, message: &str) -> SymbolicError {
        SymbolicError::Syntax {
            position: self.pos,
            message: message.to_string(),
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

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<Expr, SymbolicError> {
        let mut lhs = self.product()?;
        loop {
            if self.eat(b'+') {
                let rhs = self.product()?;
                lhs = Expr::new(Node::Add(lhs, rhs));
            } else if self.eat(b'-') {
                let rhs = self.product()?;
                lhs = Expr::new(Node::Sub(lhs, rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn product(&mut self) -> Result<Expr, SymbolicError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                let rhs = self.unary()?;
                lhs = Expr::new(Node::Mul(lhs, rhs));
            } else if self.eat(b'/') {
                let rhs = self.unary()?;
                lhs = Expr::new(Node::Div(lhs, rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, SymbolicError> {
        if self.eat(b'-') {
            let inner = self.unary()?;
            return Ok(Expr::new(Node::Neg(inner)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, SymbolicError> {
        let base = self.atom()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        self.skip_ws();
        let start = self.pos;
        let literal = self.number_literal();
        let exponent_text = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
        if literal.is_none() {
            self.pos = start;
            return Err(SymbolicError::NonIntegerExponent {
                position: start,
                exponent: "<non-literal>".to_string(),
            });
        }
        let value = literal.unwrap_or_default();
        if value < 0.0 || value.fract() != 0.0 || value > u32::MAX as f64 {
            return Err(SymbolicError::NonIntegerExponent {
                position: start,
                exponent: exponent_text,
            });
        }
        Ok(Expr::new(Node::Pow(base, value as u32)))
    }

    fn number_literal(&mut self) -> Option<f64> {
        let start = self.pos;
        let bytes = self.src;
        let mut end = start;
        while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
            end += 1;
        }
        if end == start {
            return None;
        }
        if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
            let mut k = end + 1;
            if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                k += 1;
            }
            let digits = k;
            while k < bytes.len() && bytes[k].is_ascii_digit() {
                k += 1;
            }
            if k > digits {
                end = k;
            }
        }
        let text = std::str::from_utf8(&bytes[start..end]).ok()?;
        let v = text.parse::<f64>().ok()?;
        self.pos = end;
        Some(v)
    }

    fn atom(&mut self) -> Result<Expr, SymbolicError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.sum()?;
                if !self.eat(b')') {
                    return Err(self.syntax("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => match self.number_literal() {
                Some(v) => Ok(Expr::constant(v)),
                None => Err(self.syntax("malformed number")),
            },
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let ident = std::str::from_utf8(&self.src[start..self.pos])
                    .unwrap_or_default()
                    .to_string();
                if self.peek() == Some(b'(') {
                    return self.call(&ident, start);
                }
                self.identifier(&ident, start)
            }
            Some(_) => Err(self.syntax("unexpected character")),
        }
    }

    fn call(&mut self, name: &str, start: usize) -> Result<Expr, SymbolicError> {
        let wrap: fn(Expr) -> Node = match name {
            "sin" => Node::Sin,
            "cos" => Node::Cos,
            "exp" => Node::Exp,
            "sqrt" => Node::Sqrt,
            _ => {
                return Err(SymbolicError::UnknownIdentifier {
                    position: start,
                    name: name.to_string(),
                })
            }
        };
        self.pos += 1; // '('
        let arg = self.sum()?;
        if !self.eat(b')') {
            return Err(self.syntax("expected ')' after function argument"));
        }
        Ok(Expr::new(wrap(arg)))
    }

    fn identifier(&self, name: &str, start: usize) -> Result<Expr, SymbolicError> {
        if let Some(i) = self.state_names.iter().position(|s| s == name) {
            return Ok(Expr::state(i));
        }
        if let Some(i) = self.param_names.iter().position(|s| s == name) {
            return Ok(Expr::param(i));
        }
        if let Some(v) = self.constants.get(name) {
            return Ok(Expr::constant(*v));
        }
        if name == "t" {
            return Ok(Expr::time());
        }
        Err(SymbolicError::UnknownIdentifier {
            position: start,
            name: name.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn duffing_second_component() {
        let e = parse_expr("x - x^3 - delta*y", &names(&["x", "y"]), &names(&["delta"])).unwrap();
        let x = Expr::state(0);
        let y = Expr::state(1);
        let delta = Expr::param(0);
        let expected = Expr::new(Node::Sub(
            Expr::new(Node::Sub(x.clone(), Expr::new(Node::Pow(x, 3)))),
            Expr::new(Node::Mul(delta, y)),
        ));
        assert_eq!(e, expected);
    }

    #[test]
    fn constant_literal() {
        let e = parse_expr("0", &[], &[]).unwrap();
        assert_eq!(e, Expr::constant(0.0));
    }

    #[test]
    fn michaelis_menten_source_term() {
        let mut constants = BTreeMap::new();
        constants.insert("Km".to_string(), 0.5);
        constants.insert("delta".to_string(), 0.1);
        let e = parse_expr_with_constants(
            "V1/(Km + 1) - delta*x1",
            &names(&["x1"]),
            &names(&["V1"]),
            &constants,
        )
        .unwrap();
        let v = e.eval(&[0.3], &[0.9], 0.0).unwrap();
        assert!((v - 0.57).abs() < 1e-15, "{v}");
    }

    #[test]
    fn functions_time_and_precedence() {
        let e = parse_expr("-x^2 + sin(t)*2e-1", &names(&["x"]), &[]).unwrap();
        let v = e.eval(&[3.0], &[], 0.5).unwrap();
        assert!((v - (-9.0 + 0.5f64.sin() * 0.2)).abs() < 1e-15);
    }

    #[test]
    fn unknown_identifier_reports_position() {
        let err = parse_expr("x + zeta", &names(&["x"]), &[]).unwrap_err();
        match err {
            SymbolicError::UnknownIdentifier { position, name } => {
                assert_eq!(position, 4);
                assert_eq!(name, "zeta");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_expr("tanh(x)", &names(&["x"]), &[]),
            Err(SymbolicError::UnknownIdentifier { .. })
        ));
    }

    #[test]
    fn non_integer_exponent_rejected() {
        assert!(matches!(
            parse_expr("x^1.5", &names(&["x"]), &[]),
            Err(SymbolicError::NonIntegerExponent { .. })
        ));
        assert!(matches!(
            parse_expr("x^y", &names(&["x", "y"]), &[]),
            Err(SymbolicError::NonIntegerExponent { .. })
        ));
    }

    #[test]
    fn syntax_errors() {
        for bad in ["x +", "(x", "x )", "3 $ 4", ""] {
            assert!(
                matches!(parse_expr(bad, &names(&["x"]), &[]), Err(SymbolicError::Syntax { .. })),
                "{bad}"
            );
        }
    }
}
