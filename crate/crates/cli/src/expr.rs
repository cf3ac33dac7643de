//! Arithmetic on numbers and named scales: `-2J+wc/2`, `400Tc`, `0.3Fcr`.
//! A number directly followed by a name or a parenthesis multiplies it.

use std::collections::BTreeMap;

pub struct Scope {
    names: BTreeMap<&'static str, f64>,
}

impl Scope {
    pub fn new() -> Self {
        let mut names = BTreeMap::new();
        names.insert("pi", std::f64::consts::PI);
        Scope { names }
    }

    pub fn with(mut self, name: &'static str, value: f64) -> Self {
        if value.is_finite() {
            self.names.insert(name, value);
        }
        self
    }

    pub fn eval(&self, text: &str) -> Result<f64, String> {
        let mut p = Parser { s: text.as_bytes(), i: 0, scope: self };
        let v = p.expr()?;
        p.skip_ws();
        if p.i != p.s.len() {
            return Err(format!("unexpected {:?} in {text:?}", &text[p.i..]));
        }
        if !v.is_finite() {
            return Err(format!("{text:?} is not finite"));
        }
        Ok(v)
    }
}

struct Parser<'a> {
    s: &'a [u8],
    i: usize,
    scope: &'a Scope,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.i).copied()
    }

    fn expr(&mut self) -> Result<f64, String> {
        let mut v = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.i += 1;
            let t = self.term()?;
            v = if c == b'+' { v + t } else { v - t };
        }
        Ok(v)
    }

    fn term(&mut self) -> Result<f64, String> {
        let mut v = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.i += 1;
            let t = self.unary()?;
            v = if c == b'*' { v * t } else { v / t };
        }
        Ok(v)
    }

    fn unary(&mut self) -> Result<f64, String> {
        match self.peek() {
            Some(b'-') => {
                self.i += 1;
                Ok(-self.unary()?)
            }
            Some(b'+') => {
                self.i += 1;
                self.unary()
            }
            _ => self.factor(),
        }
    }

    fn factor(&mut self) -> Result<f64, String> {
        match self.peek() {
            Some(b'(') => {
                self.i += 1;
                let v = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err("missing ')'".into());
                }
                self.i += 1;
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let n = self.number()?;
                // implicit product: 2J, 400Tc, 2(…)
                match self.s.get(self.i) {
                    Some(c) if c.is_ascii_alphabetic() || *c == b'(' => Ok(n * self.factor()?),
                    _ => Ok(n),
                }
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.i;
                while self.i < self.s.len() && (self.s[self.i].is_ascii_alphanumeric() || self.s[self.i] == b'_') {
                    self.i += 1;
                }
                let name = std::str::from_utf8(&self.s[start..self.i]).unwrap();
                self.scope
                    .names
                    .get(name)
                    .copied()
                    .ok_or_else(|| format!("unknown name {name:?} (known: {})", self.known()))
            }
            Some(c) => Err(format!("unexpected {:?}", c as char)),
            None => Err("unexpected end of expression".into()),
        }
    }

    fn number(&mut self) -> Result<f64, String> {
        let start = self.i;
        while self.i < self.s.len() && (self.s[self.i].is_ascii_digit() || self.s[self.i] == b'.') {
            self.i += 1;
        }
        // exponent, but not the start of a name such as "e" alone
        if self.i + 1 < self.s.len() && matches!(self.s[self.i], b'e' | b'E') {
            let mut j = self.i + 1;
            if matches!(self.s[j], b'+' | b'-') {
                j += 1;
            }
            if j < self.s.len() && self.s[j].is_ascii_digit() {
                while j < self.s.len() && self.s[j].is_ascii_digit() {
                    j += 1;
                }
                self.i = j;
            }
        }
        let t = std::str::from_utf8(&self.s[start..self.i]).unwrap();
        t.parse::<f64>().map_err(|_| format!("bad number {t:?}"))
    }

    fn known(&self) -> String {
        self.scope.names.keys().copied().collect::<Vec<_>>().join(", ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scope() -> Scope {
        let wc = std::f64::consts::TAU * 0.1;
        Scope::new().with("J", 1.0).with("wc", wc).with("Tc", std::f64::consts::TAU / wc)
    }

    #[test]
    fn caption_energy() {
        let v = scope().eval("-2J+wc/2").unwrap();
        assert!((v - (-2.0 + 0.1 * std::f64::consts::PI)).abs() < 1e-15);
    }

    #[test]
    fn time_units() {
        assert!((scope().eval("400Tc").unwrap() - 4000.0).abs() < 1e-9);
        assert!((scope().eval("Tc/50").unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn plain_numbers_and_exponents() {
        assert_eq!(scope().eval("1e-8").unwrap(), 1e-8);
        assert_eq!(scope().eval("2*(3-1)").unwrap(), 4.0);
        assert_eq!(scope().eval("2(3-1)").unwrap(), 4.0);
        assert_eq!(scope().eval(" -0.5 ").unwrap(), -0.5);
    }

    #[test]
    fn errors() {
        assert!(scope().eval("2K").is_err());
        assert!(scope().eval("(1").is_err());
        assert!(scope().eval("1+").is_err());
        assert!(scope().eval("1/0").is_err());
    }
}
