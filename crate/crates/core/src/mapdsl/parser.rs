//! Lexer and recursive-descent parser for `.tmap` sources.

use super::expr::Expr;
use super::map::{CmpOp, Comparison, Domain, Piece, PieceRegion, PiecewiseMap};
use super::MapError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Int(i64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Colon,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Ge,
    Gt,
    Le,
    Lt,
    AndAnd,
    Arrow,
    Eof,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, MapError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let push = |out: &mut Vec<Spanned>, tok| {
            out.push(Spanned {
                tok,
                line: tl,
                col: tc,
            })
        };
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            let start = i;
            let mut is_float = false;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                is_float = true;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    is_float = true;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let tok = if is_float {
                Tok::Num(text.parse().map_err(|_| syntax(tl, tc, "bad number"))?)
            } else {
                match text.parse::<i64>() {
                    Ok(v) => Tok::Int(v),
                    Err(_) => Tok::Num(text.parse().map_err(|_| syntax(tl, tc, "bad number"))?),
                }
            };
            push(&mut out, tok);
            col += i - start;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            push(&mut out, Tok::Ident(chars[start..i].iter().collect()));
            col += i - start;
            continue;
        }
        let next = chars.get(i + 1).copied();
        let (tok, width) = match (c, next) {
            ('>', Some('=')) => (Tok::Ge, 2),
            ('<', Some('=')) => (Tok::Le, 2),
            ('&', Some('&')) => (Tok::AndAnd, 2),
            ('-', Some('>')) => (Tok::Arrow, 2),
            ('>', _) => (Tok::Gt, 1),
            ('<', _) => (Tok::Lt, 1),
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            ('[', _) => (Tok::LBracket, 1),
            (']', _) => (Tok::RBracket, 1),
            ('{', _) => (Tok::LBrace, 1),
            ('}', _) => (Tok::RBrace, 1),
            (',', _) => (Tok::Comma, 1),
            (';', _) => (Tok::Semi, 1),
            (':', _) => (Tok::Colon, 1),
            ('+', _) => (Tok::Plus, 1),
            ('-', _) => (Tok::Minus, 1),
            ('*', _) => (Tok::Star, 1),
            ('/', _) => (Tok::Slash, 1),
            ('^', _) => (Tok::Caret, 1),
            _ => return Err(syntax(tl, tc, &format!("unexpected character '{c}'"))),
        };
        push(&mut out, tok);
        i += width;
        col += width;
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

fn syntax(line: usize, col: usize, msg: &str) -> MapError {
    MapError::Syntax {
        line,
        col,
        msg: msg.to_string(),
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    /// Declared domain dimension; `None` while parsing a bare expression
    /// without a bound.
    arity: Option<usize>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        let s = &self.toks[self.pos];
        (s.line, s.col)
    }

    fn err(&self, msg: &str) -> MapError {
        let (l, c) = self.here();
        syntax(l, c, msg)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), MapError> {
        if self.eat(&t) {
            Ok(())
        } else {
            Err(self.err(&format!("expected {what}")))
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), MapError> {
        match self.peek() {
            Tok::Ident(s) if s == kw => {
                self.bump();
                Ok(())
            }
            _ => Err(self.err(&format!("expected '{kw}'"))),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn space_dim(&mut self) -> Result<usize, MapError> {
        match self.bump() {
            Tok::Ident(s) if s.len() > 1 && s.starts_with('R') => s[1..]
                .parse::<usize>()
                .ok()
                .filter(|d| *d > 0)
                .ok_or_else(|| self.err("expected space like R2")),
            _ => Err(self.err("expected space like R2")),
        }
    }

    fn signed_number(&mut self) -> Result<f64, MapError> {
        let neg = self.eat(&Tok::Minus);
        if !neg {
            self.eat(&Tok::Plus);
        }
        let v = match self.bump() {
            Tok::Num(v) => v,
            Tok::Int(v) => v as f64,
            _ => return Err(self.err("expected number")),
        };
        Ok(if neg { -v } else { v })
    }

    fn number_tuple(&mut self) -> Result<Vec<f64>, MapError> {
        self.expect(Tok::LParen, "'('")?;
        let mut v = vec![self.signed_number()?];
        while self.eat(&Tok::Comma) {
            v.push(self.signed_number()?);
        }
        self.expect(Tok::RParen, "')'")?;
        Ok(v)
    }

    fn map(&mut self) -> Result<PiecewiseMap, MapError> {
        self.keyword("map")?;
        let m = self.space_dim()?;
        self.expect(Tok::Arrow, "'->'")?;
        let n = self.space_dim()?;
        self.arity = Some(m);
        self.expect(Tok::LBrace, "'{'")?;

        let mut domain = None;
        let mut excluded = Vec::new();
        let mut locus = Vec::new();
        let mut pieces = Vec::new();
        loop {
            if self.eat(&Tok::RBrace) {
                break;
            }
            if self.at_keyword("domain") {
                self.bump();
                if domain.is_some() {
                    return Err(self.err("domain declared twice"));
                }
                domain = Some(self.domain(m)?);
            } else if self.at_keyword("exclude") {
                self.bump();
                let p = self.number_tuple()?;
                if p.len() != m {
                    return Err(MapError::Dimension(format!(
                        "excluded point has {} coordinates, expected {m}",
                        p.len()
                    )));
                }
                excluded.push(p);
            } else if self.at_keyword("locus") {
                self.bump();
                locus.push(self.expr()?);
            } else if self.at_keyword("piece") {
                self.bump();
                pieces.push(self.piece(n)?);
            } else {
                return Err(self.err("expected 'domain', 'exclude', 'locus', 'piece' or '}'"));
            }
            if !self.eat(&Tok::Semi) && self.peek() != &Tok::RBrace {
                return Err(self.err("expected ';' or '}'"));
            }
        }
        if self.peek() != &Tok::Eof {
            return Err(self.err("trailing input after map"));
        }
        if pieces.is_empty() {
            return Err(self.err("map has no pieces"));
        }
        let domain = domain.unwrap_or_else(|| Domain::Box {
            lo: vec![-1.0; m],
            hi: vec![1.0; m],
        });
        PiecewiseMap::new(m, n, pieces, domain, excluded, locus)
    }

    fn interval(&mut self) -> Result<(f64, f64), MapError> {
        self.expect(Tok::LBracket, "'['")?;
        let lo = self.signed_number()?;
        self.expect(Tok::Comma, "','")?;
        let hi = self.signed_number()?;
        self.expect(Tok::RBracket, "']'")?;
        if lo >= hi {
            return Err(self.err("empty interval"));
        }
        Ok((lo, hi))
    }

    fn domain(&mut self, m: usize) -> Result<Domain, MapError> {
        if self.at_keyword("box") {
            self.bump();
            let mut ivs = vec![self.interval()?];
            while self.at_keyword("x") {
                self.bump();
                ivs.push(self.interval()?);
            }
            if ivs.len() == 1 {
                ivs = vec![ivs[0]; m];
            }
            if ivs.len() != m {
                return Err(MapError::Dimension(format!(
                    "box has {} intervals, expected {m}",
                    ivs.len()
                )));
            }
            Ok(Domain::Box {
                lo: ivs.iter().map(|iv| iv.0).collect(),
                hi: ivs.iter().map(|iv| iv.1).collect(),
            })
        } else if self.at_keyword("ball") {
            self.bump();
            self.keyword("center")?;
            let center = self.number_tuple()?;
            if center.len() != m {
                return Err(MapError::Dimension(format!(
                    "ball center has {} coordinates, expected {m}",
                    center.len()
                )));
            }
            self.keyword("radius")?;
            let radius = self.signed_number()?;
            let inner = if self.at_keyword("inner") {
                self.bump();
                self.signed_number()?
            } else {
                0.0
            };
            if !(radius > 0.0 && inner >= 0.0 && inner < radius) {
                return Err(self.err("ball needs 0 <= inner < radius"));
            }
            Ok(Domain::Ball {
                center,
                radius,
                inner,
            })
        } else {
            Err(self.err("expected 'box' or 'ball'"))
        }
    }

    fn piece(&mut self, n: usize) -> Result<Piece, MapError> {
        let region = self.guard()?;
        self.expect(Tok::Colon, "':'")?;
        self.expect(Tok::LParen, "'('")?;
        let mut comps = vec![self.expr()?];
        while self.eat(&Tok::Comma) {
            comps.push(self.expr()?);
        }
        self.expect(Tok::RParen, "')'")?;
        if comps.len() != n {
            return Err(MapError::Dimension(format!(
                "piece has {} components, expected {n}",
                comps.len()
            )));
        }
        Ok(Piece {
            region,
            components: comps,
        })
    }

    fn guard(&mut self) -> Result<PieceRegion, MapError> {
        if self.at_keyword("true") {
            self.bump();
            return Ok(PieceRegion::default());
        }
        let mut guards = vec![self.comparison()?];
        while self.eat(&Tok::AndAnd) {
            guards.push(self.comparison()?);
        }
        Ok(PieceRegion { guards })
    }

    fn comparison(&mut self) -> Result<Comparison, MapError> {
        let lhs = self.expr()?;
        let op = match self.bump() {
            Tok::Ge => CmpOp::Ge,
            Tok::Gt => CmpOp::Gt,
            Tok::Le => CmpOp::Le,
            Tok::Lt => CmpOp::Lt,
            _ => return Err(self.err("expected comparison operator")),
        };
        let rhs = self.expr()?;
        Ok(Comparison { lhs, op, rhs })
    }

    fn expr(&mut self) -> Result<Expr, MapError> {
        let mut acc = self.term()?;
        loop {
            if self.eat(&Tok::Plus) {
                acc = Expr::Add(Box::new(acc), Box::new(self.term()?));
            } else if self.eat(&Tok::Minus) {
                acc = Expr::Sub(Box::new(acc), Box::new(self.term()?));
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, MapError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat(&Tok::Star) {
                acc = Expr::Mul(Box::new(acc), Box::new(self.unary()?));
            } else if self.eat(&Tok::Slash) {
                acc = Expr::Div(Box::new(acc), Box::new(self.unary()?));
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, MapError> {
        if self.eat(&Tok::Minus) {
            return Ok(match self.unary()? {
                Expr::Const(c) => Expr::Const(-c),
                e => Expr::Neg(Box::new(e)),
            });
        }
        if self.eat(&Tok::Plus) {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, MapError> {
        let base = self.atom()?;
        if !self.eat(&Tok::Caret) {
            return Ok(base);
        }
        let (line, col) = self.here();
        match self.bump() {
            Tok::Int(k) => {
                let k = i32::try_from(k).map_err(|_| syntax(line, col, "exponent too large"))?;
                Ok(Expr::Pow(Box::new(base), k))
            }
            Tok::LParen => {
                let neg = self.eat(&Tok::Minus);
                let p = match self.bump() {
                    Tok::Int(p) => p,
                    _ => return Err(syntax(line, col, "exponent must be an integer or (p/q)")),
                };
                let q = if self.eat(&Tok::Slash) {
                    match self.bump() {
                        Tok::Int(q) if q > 0 => q,
                        _ => return Err(syntax(line, col, "bad exponent denominator")),
                    }
                } else {
                    1
                };
                self.expect(Tok::RParen, "')'")?;
                let p = if neg { -p } else { p };
                Expr::rational_power(base, p, q).ok_or(MapError::EvenRoot { line, col })
            }
            _ => Err(syntax(line, col, "exponent must be an integer or (p/q)")),
        }
    }

    fn atom(&mut self) -> Result<Expr, MapError> {
        let (line, col) = self.here();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::Int(v) => Ok(Expr::Const(v as f64)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) if name == "abs" => {
                self.expect(Tok::LParen, "'(' after abs")?;
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(Expr::Abs(Box::new(e)))
            }
            Tok::Ident(name) => {
                let idx = variable_index(&name)
                    .ok_or_else(|| syntax(line, col, &format!("unknown identifier '{name}'")))?;
                if let Some(m) = self.arity {
                    if idx >= m {
                        return Err(MapError::Dimension(format!(
                            "variable '{name}' at line {line}, column {col} exceeds domain dimension {m}"
                        )));
                    }
                }
                Ok(Expr::Var(idx))
            }
            _ => Err(syntax(line, col, "expected expression")),
        }
    }
}

fn variable_index(name: &str) -> Option<usize> {
    match name {
        "x" => return Some(0),
        "y" => return Some(1),
        "z" => return Some(2),
        _ => {}
    }
    let digits = name.strip_prefix('x')?;
    let i: usize = digits.parse().ok()?;
    (i >= 1 && !digits.starts_with('0')).then(|| i - 1)
}

pub fn parse_map(src: &str) -> Result<PiecewiseMap, MapError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
        arity: None,
    };
    p.map()
}

/// Parses a single expression. When `arity` is given, variables beyond it
/// are a dimension error.
pub fn parse_expr(src: &str, arity: Option<usize>) -> Result<Expr, MapError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
        arity,
    };
    let e = p.expr()?;
    if p.peek() != &Tok::Eof {
        return Err(p.err("trailing input after expression"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_unary_minus() {
        let e = parse_expr("-x1^2 + 3*x2", None).unwrap();
        assert_eq!(e.eval(&[2.0, 1.0]).unwrap(), -1.0);
        let e = parse_expr("2^3^1", None);
        assert!(e.is_err());
        let e = parse_expr("x1 - x2 - 1", None).unwrap();
        assert_eq!(e.eval(&[5.0, 1.0]).unwrap(), 3.0);
        let e = parse_expr("8/2/2", None).unwrap();
        assert_eq!(e.eval(&[]).unwrap(), 2.0);
    }

    #[test]
    fn rational_exponents() {
        let e = parse_expr("x^(2/3)", None).unwrap();
        assert!((e.eval(&[-8.0]).unwrap() - 4.0).abs() < 1e-12);
        let e = parse_expr("y^(-1/3)", None).unwrap();
        assert!((e.eval(&[0.0, -27.0]).unwrap() + 1.0 / 3.0).abs() < 1e-12);
        match parse_expr("x^(1/2)", None) {
            Err(MapError::EvenRoot { line: 1, col: 3 }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_map("map R2->R2 {\n  piece true: (x1 +, x2)\n}").unwrap_err();
        match err {
            MapError::Syntax { line, col, .. } => assert_eq!((line, col), (2, 20)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_map("map R2->R2 { piece true: (x3, x1) }"),
            Err(MapError::Dimension(_))
        ));
        assert!(matches!(
            parse_map("map R2->R2 { piece true: (x1) }"),
            Err(MapError::Dimension(_))
        ));
        assert!(matches!(
            parse_map("map R2->R2 { }"),
            Err(MapError::Syntax { .. })
        ));
    }

    #[test]
    fn comments_and_domains() {
        let src = "# annulus\nmap R2->R2 {\n domain ball center (0, 0) radius 1 inner 0.1;\n exclude (0,0);\n locus x1; # axis\n piece true: (x, y)\n}";
        let f = parse_map(src).unwrap();
        assert_eq!(f.excluded.len(), 1);
        assert_eq!(f.locus.len(), 1);
        assert!(matches!(f.domain, Domain::Ball { inner, .. } if inner == 0.1));
        let f = parse_map(
            "map R3->R1 { domain box [0,1] x [-2,2] x [1e-3, 2.5]; piece true: (x1*x2*x3) }",
        )
        .unwrap();
        match &f.domain {
            Domain::Box { lo, hi } => {
                assert_eq!(lo, &vec![0.0, -2.0, 1e-3]);
                assert_eq!(hi, &vec![1.0, 2.0, 2.5]);
            }
            _ => panic!(),
        }
    }
}
