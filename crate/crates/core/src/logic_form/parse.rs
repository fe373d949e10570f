use std::collections::HashSet;

use super::{
    canonical, IndicatorDecl, IndicatorOperand, IndicatorProperty, LineDecl, LogicForm,
    LogicFormError, PointDecl, RelationDecl, RelationKind, ShapeDecl, ShapeKind, ShapeRef, Term,
    ValidationWarning,
};

const MAX_DEPTH: usize = 16;
const MAX_FRACTION_DIGITS: usize = 6;

/// Parses logic-form source text into a validated [`LogicForm`].
pub fn parse(text: &str) -> Result<LogicForm, LogicFormError> {
    parse_with_warnings(text).map(|(lf, _)| lf)
}

/// Like [`parse`], also returning the validator's warnings.
pub fn parse_with_warnings(
    text: &str,
) -> Result<(LogicForm, Vec<ValidationWarning>), LogicFormError> {
    let decls = Parser::new(text).declarations()?;
    let lf = Interpreter::build(&decls)?;
    let warnings = canonical::validate(&lf)?;
    Ok((lf, warnings))
}

#[derive(Debug, Clone, Copy)]
struct Pos {
    line: usize,
    column: usize,
}

#[derive(Debug, Clone)]
enum Node {
    Call {
        name: String,
        args: Vec<Node>,
        pos: Pos,
    },
    Ident {
        name: String,
        pos: Pos,
    },
    Number {
        value: f64,
        pos: Pos,
    },
}

impl Node {
    fn pos(&self) -> Pos {
        match self {
            Node::Call { pos, .. } | Node::Ident { pos, .. } | Node::Number { pos, .. } => *pos,
        }
    }

    fn describe(&self) -> String {
        match self {
            Node::Call { name, .. } => format!("`{name}(...)`"),
            Node::Ident { name, .. } => format!("`{name}`"),
            Node::Number { value, .. } => format!("number {value}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    LParen,
    RParen,
    Comma,
    Newline,
    Eof,
}

fn describe_tok(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Number(v) => format!("number {v}"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Newline => "end of line".into(),
        Tok::Eof => "end of input".into(),
    }
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            chars: text.chars().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn syntax(&self, pos: Pos, expected: &str, found: String) -> LogicFormError {
        LogicFormError::Syntax {
            line: pos.line,
            column: pos.column,
            expected: expected.into(),
            found,
        }
    }

    fn next_token(&mut self) -> Result<(Tok, Pos), LogicFormError> {
        loop {
            match self.chars.peek() {
                Some('#') => {
                    while matches!(self.chars.peek(), Some(c) if *c != '\n') {
                        self.bump();
                    }
                }
                Some(c) if *c != '\n' && c.is_whitespace() => {
                    self.bump();
                }
                _ => break,
            }
        }
        let pos = Pos {
            line: self.line,
            column: self.column,
        };
        let Some(&c) = self.chars.peek() else {
            return Ok((Tok::Eof, pos));
        };
        match c {
            '\n' => {
                self.bump();
                Ok((Tok::Newline, pos))
            }
            '(' => {
                self.bump();
                Ok((Tok::LParen, pos))
            }
            ')' => {
                self.bump();
                Ok((Tok::RParen, pos))
            }
            ',' => {
                self.bump();
                Ok((Tok::Comma, pos))
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                Ok((Tok::Ident(s), pos))
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' => self.number(pos),
            other => Err(self.syntax(pos, "a token", format!("`{}`", other.escape_default()))),
        }
    }

    fn number(&mut self, pos: Pos) -> Result<(Tok, Pos), LogicFormError> {
        let mut s = String::new();
        if let Some(&sign @ ('-' | '+')) = self.chars.peek() {
            s.push(sign);
            self.bump();
        }
        let mut int_digits = 0;
        while let Some(&c) = self.chars.peek() {
            if c.is_ascii_digit() {
                s.push(c);
                self.bump();
                int_digits += 1;
            } else {
                break;
            }
        }
        if int_digits == 0 {
            let found = self
                .chars
                .peek()
                .map_or("end of input".into(), |c| format!("`{c}`"));
            return Err(self.syntax(pos, "a digit", found));
        }
        if self.chars.peek() == Some(&'.') {
            s.push('.');
            self.bump();
            let mut frac = 0;
            while let Some(&c) = self.chars.peek() {
                if c.is_ascii_digit() {
                    s.push(c);
                    self.bump();
                    frac += 1;
                } else {
                    break;
                }
            }
            if frac == 0 || frac > MAX_FRACTION_DIGITS {
                return Err(self.syntax(
                    pos,
                    "a decimal with 1 to 6 fractional digits",
                    format!("`{s}`"),
                ));
            }
        }
        if int_digits > 9 {
            return Err(self.syntax(
                pos,
                "a number of at most 9 integer digits",
                format!("`{s}`"),
            ));
        }
        let value: f64 = s
            .parse()
            .map_err(|_| self.syntax(pos, "a decimal number", format!("`{s}`")))?;
        // Normalise "-0" so it prints and compares like 0.
        Ok((Tok::Number(value + 0.0), pos))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: Option<(Tok, Pos)>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lexer: Lexer::new(text),
            peeked: None,
        }
    }

    fn peek(&mut self) -> Result<&(Tok, Pos), LogicFormError> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lexer.next_token()?);
        }
        Ok(self.peeked.as_ref().expect("peeked token"))
    }

    fn next(&mut self) -> Result<(Tok, Pos), LogicFormError> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.lexer.next_token(),
        }
    }

    // Inside parentheses newlines are plain whitespace.
    fn next_skipping_newlines(&mut self) -> Result<(Tok, Pos), LogicFormError> {
        loop {
            let t = self.next()?;
            if t.0 != Tok::Newline {
                return Ok(t);
            }
        }
    }

    fn peek_skipping_newlines(&mut self) -> Result<&(Tok, Pos), LogicFormError> {
        while self.peek()?.0 == Tok::Newline {
            self.next()?;
        }
        self.peek()
    }

    fn error(pos: Pos, expected: &str, found: &Tok) -> LogicFormError {
        LogicFormError::Syntax {
            line: pos.line,
            column: pos.column,
            expected: expected.into(),
            found: describe_tok(found),
        }
    }

    fn declarations(&mut self) -> Result<Vec<Node>, LogicFormError> {
        let mut out = Vec::new();
        loop {
            let (tok, pos) = self.next()?;
            match tok {
                Tok::Eof => return Ok(out),
                Tok::Newline => continue,
                Tok::Ident(name) => {
                    let (open, open_pos) = self.next()?;
                    if open != Tok::LParen {
                        return Err(Self::error(open_pos, "`(`", &open));
                    }
                    let args = self.arguments(1)?;
                    out.push(Node::Call { name, args, pos });
                    let (end, end_pos) = self.next()?;
                    if !matches!(end, Tok::Newline | Tok::Eof) {
                        return Err(Self::error(end_pos, "end of line", &end));
                    }
                    if end == Tok::Eof {
                        return Ok(out);
                    }
                }
                other => return Err(Self::error(pos, "a declaration", &other)),
            }
        }
    }

    /// Parses `arg, arg, ... )` after an opening parenthesis.
    fn arguments(&mut self, depth: usize) -> Result<Vec<Node>, LogicFormError> {
        let mut args = Vec::new();
        if self.peek_skipping_newlines()?.0 == Tok::RParen {
            self.next()?;
            return Ok(args);
        }
        loop {
            args.push(self.argument(depth)?);
            let (tok, pos) = self.next_skipping_newlines()?;
            match tok {
                Tok::Comma => continue,
                Tok::RParen => return Ok(args),
                other => return Err(Self::error(pos, "`,` or `)`", &other)),
            }
        }
    }

    fn argument(&mut self, depth: usize) -> Result<Node, LogicFormError> {
        let (tok, pos) = self.next_skipping_newlines()?;
        match tok {
            Tok::Number(value) => Ok(Node::Number { value, pos }),
            Tok::Ident(name) => {
                if self.peek()?.0 == Tok::LParen {
                    if depth >= MAX_DEPTH {
                        return Err(Self::error(
                            pos,
                            "at most 16 levels of nesting",
                            &Tok::LParen,
                        ));
                    }
                    self.next()?;
                    let args = self.arguments(depth + 1)?;
                    Ok(Node::Call { name, args, pos })
                } else {
                    Ok(Node::Ident { name, pos })
                }
            }
            other => Err(Self::error(pos, "an argument", &other)),
        }
    }
}

fn valid_point_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit())
}

/// Splits a concatenated name such as `ab` or `a1b1` into `n` declared names.
/// Returns `Ok(None)` when no split exists and an error when several do.
fn split_names(
    token: &str,
    n: usize,
    known: &dyn Fn(&str) -> bool,
) -> Result<Option<Vec<String>>, String> {
    fn go(
        rest: &str,
        n: usize,
        known: &dyn Fn(&str) -> bool,
        acc: &mut Vec<String>,
        found: &mut Vec<Vec<String>>,
    ) {
        if found.len() > 1 {
            return;
        }
        if n == 0 {
            if rest.is_empty() {
                found.push(acc.clone());
            }
            return;
        }
        for end in 1..=rest.len() {
            if !rest.is_char_boundary(end) {
                continue;
            }
            let head = &rest[..end];
            if known(head) {
                acc.push(head.to_string());
                go(&rest[end..], n - 1, known, acc, found);
                acc.pop();
            }
        }
    }
    let mut found = Vec::new();
    go(token, n, known, &mut Vec::new(), &mut found);
    match found.len() {
        0 => Ok(None),
        1 => Ok(found.pop()),
        _ => Err(format!(
            "`{token}` can be split into point names in more than one way"
        )),
    }
}

/// Chunks a token by the letter-then-digits naming convention (`a1b` → a1, b).
fn conventional_chunks(token: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for c in token.chars() {
        if c.is_ascii_digit() {
            if let Some(last) = out.last_mut() {
                last.push(c);
                continue;
            }
        }
        out.push(c.to_string());
    }
    out
}

struct Interpreter {
    lf: LogicForm,
    names: HashSet<String>,
}

impl Interpreter {
    fn build(decls: &[Node]) -> Result<LogicForm, LogicFormError> {
        let mut it = Interpreter {
            lf: LogicForm::default(),
            names: HashSet::new(),
        };
        // Points first so later declarations may reference points declared below them.
        for d in decls {
            if let Node::Call { name, args, pos } = d {
                if name == "Point" {
                    it.point(args, *pos)?;
                }
            }
        }
        let mut pending_indicators = Vec::new();
        for d in decls {
            let Node::Call { name, args, pos } = d else {
                unreachable!("declarations are calls")
            };
            match name.as_str() {
                "Point" => {}
                "Line" => {
                    let line = it.line_operand(args, *pos, "Line")?;
                    it.lf.lines.push(line);
                }
                "Shape" => {
                    let [inner] = args.as_slice() else {
                        return Err(arity(pos.line, "Shape", "1", args.len()));
                    };
                    let shape = it.shape(inner)?;
                    it.lf.shapes.push(shape);
                }
                "Indicator" => pending_indicators.push((args, *pos)),
                "Relation" => {
                    let [inner] = args.as_slice() else {
                        return Err(arity(pos.line, "Relation", "1", args.len()));
                    };
                    let rel = it.relation(inner)?;
                    it.lf.relations.push(rel);
                }
                other => {
                    if RelationKind::from_name(other).is_some() {
                        let rel = it.relation(d)?;
                        it.lf.relations.push(rel);
                    } else if ShapeKind::from_name(other).is_some() {
                        let shape = it.shape(d)?;
                        it.lf.shapes.push(shape);
                    } else {
                        return Err(LogicFormError::Syntax {
                            line: pos.line,
                            column: pos.column,
                            expected: "a declaration keyword".into(),
                            found: format!("`{other}`"),
                        });
                    }
                }
            }
        }
        for (args, pos) in pending_indicators {
            let ind = it.indicator(args, pos)?;
            it.lf.indicators.push(ind);
        }
        Ok(it.lf)
    }

    fn point(&mut self, args: &[Node], pos: Pos) -> Result<(), LogicFormError> {
        let [name, x, y] = args else {
            return Err(arity(pos.line, "Point", "3", args.len()));
        };
        let Node::Ident { name, pos: npos } = name else {
            return Err(expected(name, "a point name"));
        };
        let name = name.to_ascii_lowercase();
        if !valid_point_name(&name) {
            return Err(invalid(npos.line, format!("invalid point name `{name}`")));
        }
        let x = number(x, "an x coordinate")?;
        let y = number(y, "a y coordinate")?;
        self.names.insert(name.clone());
        self.lf.points.push(PointDecl { name, x, y });
        Ok(())
    }

    fn require_point(&self, name: &str, pos: Pos) -> Result<String, LogicFormError> {
        let name = name.to_ascii_lowercase();
        if self.names.contains(&name) {
            Ok(name)
        } else {
            Err(LogicFormError::Reference {
                line: pos.line,
                name,
            })
        }
    }

    fn ident<'n>(&self, node: &'n Node, what: &str) -> Result<(&'n str, Pos), LogicFormError> {
        match node {
            Node::Ident { name, pos } => Ok((name, *pos)),
            other => Err(expected(other, what)),
        }
    }

    /// `Line(ab)`, `Line(a, b)`; shared by line declarations and line terms.
    fn line_operand(
        &self,
        args: &[Node],
        pos: Pos,
        kind: &str,
    ) -> Result<LineDecl, LogicFormError> {
        let known = |s: &str| self.names.contains(s);
        self.pair_operand(args, pos, kind, &known)
    }

    fn pair_operand(
        &self,
        args: &[Node],
        pos: Pos,
        kind: &str,
        known: &dyn Fn(&str) -> bool,
    ) -> Result<LineDecl, LogicFormError> {
        let (a, b) = match args {
            [single] => {
                let (tok, tpos) = self.ident(single, "a pair of point names")?;
                let tok = tok.to_ascii_lowercase();
                match split_names(&tok, 2, known) {
                    Ok(Some(mut parts)) => {
                        let b = parts.pop().expect("two parts");
                        (parts.pop().expect("two parts"), b)
                    }
                    Ok(None) => {
                        let chunks = conventional_chunks(&tok);
                        if chunks.len() < 2 {
                            return Err(arity(tpos.line, kind, "2", 1));
                        }
                        let missing = chunks.into_iter().find(|c| !known(c)).unwrap_or(tok);
                        return Err(LogicFormError::Reference {
                            line: tpos.line,
                            name: missing,
                        });
                    }
                    Err(msg) => return Err(invalid(tpos.line, msg)),
                }
            }
            [a, b] => {
                let (a, apos) = self.ident(a, "a point name")?;
                let (b, bpos) = self.ident(b, "a point name")?;
                let a = a.to_ascii_lowercase();
                let b = b.to_ascii_lowercase();
                if !known(&a) {
                    return Err(LogicFormError::Reference {
                        line: apos.line,
                        name: a,
                    });
                }
                if !known(&b) {
                    return Err(LogicFormError::Reference {
                        line: bpos.line,
                        name: b,
                    });
                }
                (a, b)
            }
            _ => return Err(arity(pos.line, kind, "2", args.len())),
        };
        Ok(LineDecl { a, b })
    }

    fn shape(&self, node: &Node) -> Result<ShapeDecl, LogicFormError> {
        let Node::Call { name, args, pos } = node else {
            return Err(expected(node, "a shape such as `Triangle(a, b, c)`"));
        };
        let Some(kind) = ShapeKind::from_name(name) else {
            return Err(LogicFormError::Syntax {
                line: pos.line,
                column: pos.column,
                expected: "a shape kind".into(),
                found: format!("`{name}`"),
            });
        };
        if kind == ShapeKind::Circle {
            let (center, radius) = self.circle_args(args, *pos)?;
            return Ok(ShapeDecl {
                kind,
                vertices: vec![center],
                radius,
            });
        }
        let vertices = self.vertex_list(args, kind, *pos)?;
        Ok(ShapeDecl {
            kind,
            vertices,
            radius: None,
        })
    }

    fn vertex_list(
        &self,
        args: &[Node],
        kind: ShapeKind,
        pos: Pos,
    ) -> Result<Vec<String>, LogicFormError> {
        if args.len() != kind.arity() {
            return Err(arity(
                pos.line,
                kind.name(),
                &kind.arity().to_string(),
                args.len(),
            ));
        }
        args.iter()
            .map(|a| {
                let (n, p) = self.ident(a, "a point name")?;
                self.require_point(n, p)
            })
            .collect()
    }

    fn circle_args(
        &self,
        args: &[Node],
        pos: Pos,
    ) -> Result<(String, Option<f64>), LogicFormError> {
        let (center, radius) = match args {
            [c] => (c, None),
            [c, r] => (c, Some(r)),
            _ => return Err(arity(pos.line, "Circle", "1 or 2", args.len())),
        };
        let (cname, cpos) = self.ident(center, "a centre point name")?;
        let center = self.require_point(cname, cpos)?;
        let radius = match radius {
            None => None,
            Some(node) if is_radius_placeholder(node) => None,
            Some(Node::Number { value, pos }) => {
                if value.is_nan() || *value <= 0.0 {
                    return Err(invalid(pos.line, "circle radius must be positive".into()));
                }
                Some(*value)
            }
            Some(other) => return Err(expected(other, "a radius (number or `radius`)")),
        };
        Ok((center, radius))
    }

    fn indicator(&self, args: &[Node], pos: Pos) -> Result<IndicatorDecl, LogicFormError> {
        let [shape_node, prop_node] = args else {
            return Err(arity(pos.line, "Indicator", "2", args.len()));
        };
        let shape = self.shape(shape_node)?;
        if shape.kind == ShapeKind::Circle {
            return Err(invalid(
                pos.line,
                "indicators apply to polygons, not circles".into(),
            ));
        }
        let shape = ShapeRef {
            kind: shape.kind,
            vertices: shape.vertices,
        };
        if !self
            .lf
            .shapes
            .iter()
            .any(|s| s.kind == shape.kind && s.vertices == shape.vertices)
        {
            return Err(LogicFormError::Reference {
                line: pos.line,
                name: format!("{}({})", shape.kind, shape.vertices.join(", ")),
            });
        }
        let Node::Call {
            name,
            args: ops,
            pos: ppos,
        } = prop_node
        else {
            return Err(expected(prop_node, "a property such as `Parallel(ab, cd)`"));
        };
        let Some(property) = IndicatorProperty::from_name(name) else {
            return Err(LogicFormError::Syntax {
                line: ppos.line,
                column: ppos.column,
                expected: "Parallel, Perpendicular, Equals or RightAngle".into(),
                found: format!("`{name}`"),
            });
        };
        let in_shape = |s: &str| shape.vertices.iter().any(|v| v == s);
        let operands = match property {
            IndicatorProperty::RightAngle => {
                let [op] = ops.as_slice() else {
                    return Err(arity(ppos.line, "RightAngle", "1", ops.len()));
                };
                let vertex = match op {
                    Node::Ident { name, pos } => {
                        let v = name.to_ascii_lowercase();
                        if !in_shape(&v) {
                            return Err(invalid(
                                pos.line,
                                format!("`{v}` is not a vertex of the shape"),
                            ));
                        }
                        v
                    }
                    Node::Call { name, args, pos } if name == "Angle" => {
                        let t = self.angle_term(args, *pos)?;
                        let Term::Angle { vertex, .. } = t else {
                            unreachable!()
                        };
                        if !in_shape(&vertex) {
                            return Err(invalid(
                                pos.line,
                                format!("`{vertex}` is not a vertex of the shape"),
                            ));
                        }
                        vertex
                    }
                    other => return Err(expected(other, "a vertex name")),
                };
                vec![IndicatorOperand::Vertex { name: vertex }]
            }
            _ => {
                let min = 2;
                let exact = property != IndicatorProperty::Equals;
                if ops.len() < min || (exact && ops.len() != 2) {
                    let want = if exact { "2" } else { "at least 2" };
                    return Err(arity(ppos.line, property.name(), want, ops.len()));
                }
                let mut out = Vec::with_capacity(ops.len());
                for op in ops {
                    let side = match op {
                        Node::Call { name, args, pos } if name == "Line" => {
                            self.pair_operand(args, *pos, "Line", &in_shape)
                        }
                        other @ Node::Ident { pos, .. } => {
                            self.pair_operand(std::slice::from_ref(other), *pos, "side", &in_shape)
                        }
                        other => Err(expected(other, "a side such as `ab`")),
                    };
                    let side = side.map_err(|e| match e {
                        LogicFormError::Reference { line, name } => invalid(
                            line,
                            format!("side uses `{name}`, which is not a vertex of the shape"),
                        ),
                        e => e,
                    })?;
                    if side.a == side.b {
                        return Err(invalid(
                            op.pos().line,
                            "a side needs two distinct vertices".into(),
                        ));
                    }
                    out.push(IndicatorOperand::Side {
                        a: side.a,
                        b: side.b,
                    });
                }
                out
            }
        };
        Ok(IndicatorDecl {
            shape,
            property,
            operands,
        })
    }

    fn relation(&self, node: &Node) -> Result<RelationDecl, LogicFormError> {
        let Node::Call { name, args, pos } = node else {
            return Err(expected(
                node,
                "a relation such as `PointLiesOnLine(p, Line(a, b))`",
            ));
        };
        let Some(kind) = RelationKind::from_name(name) else {
            return Err(LogicFormError::Syntax {
                line: pos.line,
                column: pos.column,
                expected: "a relation kind".into(),
                found: format!("`{name}`"),
            });
        };
        let arguments = args
            .iter()
            .map(|a| self.term(a))
            .collect::<Result<Vec<_>, _>>()?;
        check_signature(kind, &arguments, pos.line)?;
        Ok(RelationDecl { kind, arguments })
    }

    fn angle_term(&self, args: &[Node], pos: Pos) -> Result<Term, LogicFormError> {
        let names: Vec<String> = match args {
            [single] => {
                let (tok, tpos) = self.ident(single, "three point names")?;
                let tok = tok.to_ascii_lowercase();
                let known = |s: &str| self.names.contains(s);
                match split_names(&tok, 3, &known) {
                    Ok(Some(parts)) => parts,
                    Ok(None) => {
                        let missing = conventional_chunks(&tok)
                            .into_iter()
                            .find(|c| !known(c))
                            .unwrap_or(tok);
                        return Err(LogicFormError::Reference {
                            line: tpos.line,
                            name: missing,
                        });
                    }
                    Err(msg) => return Err(invalid(tpos.line, msg)),
                }
            }
            [_, _, _] => args
                .iter()
                .map(|a| {
                    let (n, p) = self.ident(a, "a point name")?;
                    self.require_point(n, p)
                })
                .collect::<Result<_, _>>()?,
            _ => return Err(arity(pos.line, "Angle", "3", args.len())),
        };
        let [a, vertex, c] = <[String; 3]>::try_from(names).expect("three names");
        Ok(Term::Angle { a, vertex, c })
    }

    /// A bare identifier: a point, else a concatenated line `ab`, else an
    /// angle `abc`.
    fn bare_term(&self, name: &str, pos: Pos) -> Result<Term, LogicFormError> {
        let name = name.to_ascii_lowercase();
        if self.names.contains(&name) {
            return Ok(Term::Point { name });
        }
        let known = |s: &str| self.names.contains(s);
        for n in [2, 3] {
            match split_names(&name, n, &known) {
                Ok(Some(mut parts)) => {
                    return Ok(if n == 2 {
                        let b = parts.pop().expect("two parts");
                        Term::Line {
                            a: parts.pop().expect("two parts"),
                            b,
                        }
                    } else {
                        let c = parts.pop().expect("three parts");
                        let vertex = parts.pop().expect("three parts");
                        Term::Angle {
                            a: parts.pop().expect("three parts"),
                            vertex,
                            c,
                        }
                    })
                }
                Ok(None) => {}
                Err(msg) => return Err(invalid(pos.line, msg)),
            }
        }
        let missing = conventional_chunks(&name)
            .into_iter()
            .find(|c| !known(c))
            .unwrap_or(name);
        Err(LogicFormError::Reference {
            line: pos.line,
            name: missing,
        })
    }

    fn term(&self, node: &Node) -> Result<Term, LogicFormError> {
        match node {
            Node::Number { value, .. } => Ok(Term::Number { value: *value }),
            Node::Ident { name, pos } => self.bare_term(name, *pos),
            Node::Call { name, args, pos } => match name.as_str() {
                "Line" => {
                    let l = self.line_operand(args, *pos, "Line")?;
                    Ok(Term::Line { a: l.a, b: l.b })
                }
                "Circle" => {
                    let (center, radius) = self.circle_args(args, *pos)?;
                    Ok(Term::Circle { center, radius })
                }
                "Angle" => self.angle_term(args, *pos),
                "LengthOf" | "MeasureOf" => match args.as_slice() {
                    [inner] => self.term(inner),
                    _ => Err(arity(pos.line, name, "1", args.len())),
                },
                other => match ShapeKind::from_name(other) {
                    Some(kind) if kind.is_polygon() => {
                        let vertices = self.vertex_list(args, kind, *pos)?;
                        Ok(Term::Shape { kind, vertices })
                    }
                    _ => Err(LogicFormError::Syntax {
                        line: pos.line,
                        column: pos.column,
                        expected: "a term (point, Line, Circle, Angle, shape or number)".into(),
                        found: format!("`{other}`"),
                    }),
                },
            },
        }
    }
}

fn is_radius_placeholder(node: &Node) -> bool {
    matches!(node, Node::Ident { name, .. } if name.eq_ignore_ascii_case("radius"))
}

/// Checks argument count and term types against a relation's signature.
pub(super) fn check_signature(
    kind: RelationKind,
    args: &[Term],
    line: usize,
) -> Result<(), LogicFormError> {
    use RelationKind::*;
    let is = |t: &Term, names: &[&str]| names.contains(&t.type_name());
    let (want, ok): (&str, bool) = match kind {
        PointLiesOnLine => ("2", args.len() == 2),
        PointLiesOnCircle | Perpendicular | Parallel | Incircle | Tangent | AngleBisector
        | Equals => ("2", args.len() == 2),
        IntersectAt => ("3", args.len() == 3),
        ConcyclicPoints => ("at least 3", args.len() >= 3),
    };
    if !ok {
        return Err(arity(line, kind.name(), want, args.len()));
    }
    let types_ok = match kind {
        PointLiesOnLine => is(&args[0], &["point"]) && is(&args[1], &["line"]),
        PointLiesOnCircle => is(&args[0], &["point"]) && is(&args[1], &["circle"]),
        Perpendicular | Parallel => args.iter().all(|a| is(a, &["line"])),
        Incircle => is(&args[0], &["circle"]) && is(&args[1], &["shape"]),
        Tangent => is(&args[0], &["line", "circle"]) && is(&args[1], &["circle"]),
        AngleBisector => is(&args[0], &["line"]) && is(&args[1], &["angle"]),
        IntersectAt => {
            is(&args[0], &["line"]) && is(&args[1], &["line"]) && is(&args[2], &["point"])
        }
        ConcyclicPoints => args.iter().all(|a| is(a, &["point"])),
        Equals => {
            args.iter().all(|a| is(a, &["line", "angle", "number"]))
                && !args.iter().all(|a| is(a, &["number"]))
        }
    };
    if !types_ok {
        let found: Vec<_> = args.iter().map(Term::type_name).collect();
        return Err(invalid(
            line,
            format!(
                "{} does not accept arguments ({})",
                kind.name(),
                found.join(", ")
            ),
        ));
    }
    Ok(())
}

fn number(node: &Node, what: &str) -> Result<f64, LogicFormError> {
    match node {
        Node::Number { value, .. } => Ok(*value),
        other => Err(expected(other, what)),
    }
}

fn expected(node: &Node, what: &str) -> LogicFormError {
    let pos = node.pos();
    LogicFormError::Syntax {
        line: pos.line,
        column: pos.column,
        expected: what.into(),
        found: node.describe(),
    }
}

fn arity(line: usize, kind: &str, expected: &str, found: usize) -> LogicFormError {
    LogicFormError::Arity {
        line,
        kind: kind.into(),
        expected: expected.into(),
        found,
    }
}

fn invalid(line: usize, message: String) -> LogicFormError {
    LogicFormError::Invalid { line, message }
}
