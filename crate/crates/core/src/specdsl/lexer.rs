use num::BigInt;

use super::error::ParseError;
use crate::value::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    /// `x<digits>`.
    Site(usize),
    /// Unsigned decimal digits.
    Num(String),
    Word(String),
    Sym(char),
    DotDot,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Site(i) => format!("x{i}"),
            Tok::Num(n) => n.clone(),
            Tok::Word(w) => w.clone(),
            Tok::Sym(c) => c.to_string(),
            Tok::DotDot => "..".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub(crate) struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
    peeked: Option<Token>,
}

const SYMBOLS: &str = "=&|!(){},;/";

impl Lexer {
    /// Lexer over `text`, reporting positions from `line:col`.
    pub(crate) fn new(text: &str, line: usize, col: usize) -> Self {
        Lexer {
            chars: text.chars().collect(),
            pos: 0,
            line,
            col,
            peeked: None,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = *self.chars.get(self.pos)?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn at(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    pub(crate) fn peek(&mut self) -> Result<&Token, ParseError> {
        if self.peeked.is_none() {
            let t = self.scan()?;
            self.peeked = Some(t);
        }
        Ok(self.peeked.as_ref().expect("peeked"))
    }

    pub(crate) fn next(&mut self) -> Result<Token, ParseError> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.scan(),
        }
    }

    fn scan(&mut self) -> Result<Token, ParseError> {
        while self.at(0).is_some_and(char::is_whitespace) {
            self.bump();
        }
        let (line, col) = (self.line, self.col);
        let token = |tok| Token { tok, line, col };
        let Some(c) = self.at(0) else {
            return Ok(token(Tok::Eof));
        };
        if c == '.' {
            if self.at(1) == Some('.') {
                self.bump();
                self.bump();
                return Ok(token(Tok::DotDot));
            }
            return Err(ParseError::new(line, col, "unexpected '.'"));
        }
        if c.is_ascii_digit() {
            let mut digits = String::new();
            while let Some(d) = self.at(0).filter(char::is_ascii_digit) {
                digits.push(d);
                self.bump();
            }
            if self.at(0) == Some('.') && self.at(1).is_some_and(|d| d.is_ascii_digit()) {
                return Err(ParseError::new(
                    line,
                    col,
                    "decimal literals are not allowed; write an exact fraction p/q",
                ));
            }
            return Ok(token(Tok::Num(digits)));
        }
        if c == 'x' && self.at(1).is_some_and(|d| d.is_ascii_digit()) {
            self.bump();
            let mut digits = String::new();
            while let Some(d) = self.at(0).filter(char::is_ascii_digit) {
                digits.push(d);
                self.bump();
            }
            if self.at(0).is_some_and(is_word_char) {
                return Err(ParseError::new(line, col, "malformed site name"));
            }
            let index = digits
                .parse()
                .map_err(|_| ParseError::new(line, col, format!("site index x{digits} is too large")))?;
            return Ok(token(Tok::Site(index)));
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut word = String::new();
            while let Some(d) = self.at(0).filter(|&d| is_word_char(d)) {
                word.push(d);
                self.bump();
            }
            return Ok(token(Tok::Word(word)));
        }
        if SYMBOLS.contains(c) {
            self.bump();
            return Ok(token(Tok::Sym(c)));
        }
        Err(ParseError::new(line, col, format!("unexpected character '{c}'")))
    }

    pub(crate) fn error_at(&mut self, message: &str, expected: &[&str]) -> ParseError {
        match self.peek() {
            Ok(t) => {
                let found = t.tok.describe();
                ParseError::new(t.line, t.col, format!("{message}, found '{found}'")).expecting(expected)
            }
            Err(e) => e,
        }
    }

    pub(crate) fn expect_sym(&mut self, c: char) -> Result<Token, ParseError> {
        if self.peek()?.tok == Tok::Sym(c) {
            return self.next();
        }
        Err(self.error_at("unexpected token", &[&c.to_string()]))
    }

    pub(crate) fn eat_sym(&mut self, c: char) -> Result<bool, ParseError> {
        if self.peek()?.tok == Tok::Sym(c) {
            self.next()?;
            return Ok(true);
        }
        Ok(false)
    }

    pub(crate) fn expect_eof(&mut self, expected: &[&str]) -> Result<(), ParseError> {
        if self.peek()?.tok == Tok::Eof {
            return Ok(());
        }
        let mut all: Vec<&str> = expected.to_vec();
        all.push("end of input");
        Err(self.error_at("unexpected trailing input", &all))
    }

    pub(crate) fn number(&mut self) -> Result<u64, ParseError> {
        let t = self.next()?;
        match &t.tok {
            Tok::Num(d) => d
                .parse()
                .map_err(|_| ParseError::new(t.line, t.col, format!("number {d} is too large"))),
            other => Err(ParseError::new(
                t.line,
                t.col,
                format!("expected a number, found '{}'", other.describe()),
            )
            .expecting(&["number"])),
        }
    }

    /// `p` or `p/q` with unsigned digits.
    pub(crate) fn rational(&mut self) -> Result<Rational, ParseError> {
        let t = self.next()?;
        let Tok::Num(num) = &t.tok else {
            return Err(ParseError::new(
                t.line,
                t.col,
                format!("expected a rational, found '{}'", t.tok.describe()),
            )
            .expecting(&["rational"]));
        };
        let numer: BigInt = num.parse().expect("digits");
        if !self.eat_sym('/')? {
            return Ok(Rational::from_integer(numer));
        }
        let d = self.next()?;
        let Tok::Num(den) = &d.tok else {
            return Err(ParseError::new(
                d.line,
                d.col,
                format!("expected a denominator, found '{}'", d.tok.describe()),
            )
            .expecting(&["number"]));
        };
        let denom: BigInt = den.parse().expect("digits");
        if denom == BigInt::from(0) {
            return Err(ParseError::new(d.line, d.col, "zero denominator"));
        }
        Ok(Rational::new(numer, denom))
    }
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        let mut l = Lexer::new(s, 1, 1);
        let mut out = Vec::new();
        loop {
            let t = l.next().unwrap();
            if t.tok == Tok::Eof {
                return out;
            }
            out.push(t.tok);
        }
    }

    #[test]
    fn sites_words_and_ranges() {
        assert_eq!(
            toks("x12 in {0..3}"),
            vec![
                Tok::Site(12),
                Tok::Word("in".into()),
                Tok::Sym('{'),
                Tok::Num("0".into()),
                Tok::DotDot,
                Tok::Num("3".into()),
                Tok::Sym('}'),
            ]
        );
        assert_eq!(toks("root-slices"), vec![Tok::Word("root-slices".into())]);
    }

    #[test]
    fn decimals_are_rejected_with_position() {
        let mut l = Lexer::new("1/2 0.5", 4, 9);
        l.rational().unwrap();
        let e = l.rational().unwrap_err();
        assert_eq!((e.line, e.column), (4, 13));
    }
}
