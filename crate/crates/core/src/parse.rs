//! Text format for network descriptions and queries.
//!
//! A network file is a sequence of `node` blocks and `link` statements, one
//! statement per `.`, with `#` line comments:
//!
//! ```text
//! node 1 {
//!   fact P(a,b).
//!   rule H(x) :- B1(x,y), B2(y).
//!   clause P(a) | Q(a).
//!   denial :- P(x), Q(x).
//!   inconsistent.
//! }
//! link 1:B1(x,y) & 2:B2(x) => 3:H(x) | 3:K(x).
//! ```
//!
//! In rule, link, and query arguments a token starting with a lowercase
//! letter is a variable; constants are quoted strings or tokens starting
//! with an uppercase letter or digit. Fact and clause arguments are always
//! ground, so bare tokens there are constants regardless of case. Link heads
//! joined by `|` are disjunctive, by `&` conjunctive; a head variable that
//! never occurs in the link body is existential. Links are numbered `r1`,
//! `r2`, ... in file order.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::model::{
    Atom, BodyConjunct, Constant, CoordinationRule, GroundAtom, GroundTerm, LocalTheory, NodeId,
    P2PSystem, Query, RuleHead, RuleId, Term, Variable,
};

/// A parse failure with its input position.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, col: usize, message: impl Into<String>) -> Self {
        ParseError { line, col, message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TokenKind {
    Word,
    Quoted,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Dot,
    Colon,
    Pipe,
    Amp,
    Implies,
    Turnstile,
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    text: String,
    line: usize,
    col: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

fn lex(input: &str) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = input.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (tline, tcol) = (line, col);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next().expect("peeked");
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            c
        };
        match c {
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    bump(&mut chars);
                }
            }
            c if c.is_whitespace() => {
                bump(&mut chars);
            }
            '"' => {
                bump(&mut chars);
                let mut text = String::new();
                loop {
                    match chars.peek() {
                        Some('"') => {
                            bump(&mut chars);
                            break;
                        }
                        Some('\n') | None => {
                            return Err(ParseError::new(tline, tcol, "unterminated string"));
                        }
                        Some(_) => text.push(bump(&mut chars)),
                    }
                }
                if text.is_empty() {
                    return Err(ParseError::new(tline, tcol, "empty constant name"));
                }
                tokens.push(Token { kind: TokenKind::Quoted, text, line: tline, col: tcol });
            }
            '{' | '}' | '(' | ')' | ',' | '.' | '|' | '&' | '∨' | '∧' => {
                bump(&mut chars);
                let kind = match c {
                    '{' => TokenKind::LBrace,
                    '}' => TokenKind::RBrace,
                    '(' => TokenKind::LParen,
                    ')' => TokenKind::RParen,
                    ',' => TokenKind::Comma,
                    '.' => TokenKind::Dot,
                    '|' | '∨' => TokenKind::Pipe,
                    _ => TokenKind::Amp,
                };
                tokens.push(Token { kind, text: c.to_string(), line: tline, col: tcol });
            }
            ':' => {
                bump(&mut chars);
                if chars.peek() == Some(&'-') {
                    bump(&mut chars);
                    tokens.push(Token {
                        kind: TokenKind::Turnstile,
                        text: ":-".into(),
                        line: tline,
                        col: tcol,
                    });
                } else {
                    tokens.push(Token { kind: TokenKind::Colon, text: ":".into(), line: tline, col: tcol });
                }
            }
            '=' => {
                bump(&mut chars);
                if chars.peek() == Some(&'>') {
                    bump(&mut chars);
                    tokens.push(Token {
                        kind: TokenKind::Implies,
                        text: "=>".into(),
                        line: tline,
                        col: tcol,
                    });
                } else {
                    return Err(ParseError::new(tline, tcol, "expected '=>'"));
                }
            }
            '⇒' => {
                bump(&mut chars);
                tokens.push(Token { kind: TokenKind::Implies, text: "=>".into(), line: tline, col: tcol });
            }
            c if is_word_char(c) => {
                let mut text = String::new();
                while let Some(&c) = chars.peek() {
                    if !is_word_char(c) {
                        break;
                    }
                    text.push(bump(&mut chars));
                }
                tokens.push(Token { kind: TokenKind::Word, text, line: tline, col: tcol });
            }
            other => {
                return Err(ParseError::new(tline, tcol, format!("unexpected character '{}'", other)));
            }
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    /// First-use arity per (node, predicate), with the position of first use.
    arities: BTreeMap<(NodeId, String), (usize, usize, usize)>,
}

impl Parser {
    fn new(tokens: Vec<Token>) -> Self {
        Parser { tokens, pos: 0, arities: BTreeMap::new() }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        match self.peek() {
            Some(t) => ParseError::new(t.line, t.col, message),
            None => {
                let (line, col) = self
                    .tokens
                    .last()
                    .map(|t| (t.line, t.col + t.text.len()))
                    .unwrap_or((1, 1));
                ParseError::new(line, col, message)
            }
        }
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> Result<Token, ParseError> {
        match self.peek() {
            Some(t) if t.kind == kind => Ok(self.next().expect("peeked")),
            _ => Err(self.error_here(format!("expected {}", what))),
        }
    }

    fn eat(&mut self, kind: TokenKind) -> bool {
        if self.peek().map(|t| t.kind) == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn word(&mut self, what: &str) -> Result<Token, ParseError> {
        self.expect(TokenKind::Word, what)
    }

    fn keyword(&self) -> Option<&str> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Word => Some(t.text.as_str()),
            _ => None,
        }
    }

    fn record_arity(
        &mut self,
        node: &NodeId,
        predicate: &str,
        arity: usize,
        line: usize,
        col: usize,
    ) -> Result<(), ParseError> {
        match self.arities.entry((node.clone(), predicate.to_string())) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert((arity, line, col));
                Ok(())
            }
            std::collections::btree_map::Entry::Occupied(e) => {
                let (declared, fline, fcol) = *e.get();
                if declared != arity {
                    Err(ParseError::new(
                        line,
                        col,
                        format!(
                            "arity mismatch: {}:{} has arity {} (first used with arity {} at {}:{})",
                            node, predicate, arity, declared, fline, fcol
                        ),
                    ))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Parses `Pred(term, ...)`. `ground` controls whether bare lowercase
    /// tokens are constants (facts, clauses) or variables (rules, links,
    /// queries).
    fn atom(&mut self, node: &NodeId, ground: bool) -> Result<Atom, ParseError> {
        let name = self.word("a predicate name")?;
        if name.text.chars().next().is_some_and(|c| c.is_lowercase()) {
            return Err(ParseError::new(
                name.line,
                name.col,
                format!("predicate names start with an uppercase letter or digit, got '{}'", name.text),
            ));
        }
        self.expect(TokenKind::LParen, "'('")?;
        let mut args = Vec::new();
        if !self.eat(TokenKind::RParen) {
            loop {
                let t = match self.peek() {
                    Some(t) if t.kind == TokenKind::Word || t.kind == TokenKind::Quoted => {
                        self.next().expect("peeked")
                    }
                    _ => return Err(self.error_here("expected a term")),
                };
                let term = match t.kind {
                    TokenKind::Quoted => Term::Const(Constant::new(t.text)),
                    _ => {
                        let lower = t.text.chars().next().is_some_and(|c| c.is_lowercase());
                        if lower && !ground {
                            Term::Var(Variable::new(t.text))
                        } else {
                            Term::Const(Constant::new(t.text))
                        }
                    }
                };
                args.push(term);
                if self.eat(TokenKind::Comma) {
                    continue;
                }
                self.expect(TokenKind::RParen, "',' or ')'")?;
                break;
            }
        }
        self.record_arity(node, &name.text, args.len(), name.line, name.col)?;
        Ok(Atom::new(node.clone(), name.text, args))
    }

    fn ground_atom(&mut self, node: &NodeId) -> Result<GroundAtom, ParseError> {
        let (line, col) = self.peek().map(|t| (t.line, t.col)).unwrap_or((1, 1));
        let atom = self.atom(node, true)?;
        let args: Vec<GroundTerm> = atom
            .args
            .iter()
            .map(|t| match t {
                Term::Const(c) => Ok(GroundTerm::Const(c.clone())),
                Term::Var(_) => Err(ParseError::new(line, col, "expected a ground atom")),
            })
            .collect::<Result<_, _>>()?;
        Ok(GroundAtom::new(atom.node, atom.predicate, args))
    }

    fn atom_list(&mut self, node: &NodeId) -> Result<Vec<Atom>, ParseError> {
        let mut atoms = vec![self.atom(node, false)?];
        while self.eat(TokenKind::Comma) || self.eat(TokenKind::Amp) {
            atoms.push(self.atom(node, false)?);
        }
        Ok(atoms)
    }

    fn node_block(&mut self, system: &mut P2PSystem) -> Result<(), ParseError> {
        let id = match self.peek() {
            Some(t) if t.kind == TokenKind::Word || t.kind == TokenKind::Quoted => {
                self.next().expect("peeked")
            }
            _ => return Err(self.error_here("expected a node id")),
        };
        let node = NodeId::new(id.text.clone());
        if system.nodes.contains_key(&node) {
            return Err(ParseError::new(id.line, id.col, format!("duplicate node block for {}", node)));
        }
        self.expect(TokenKind::LBrace, "'{'")?;
        let mut theory = LocalTheory::empty(node.clone());
        loop {
            if self.eat(TokenKind::RBrace) {
                break;
            }
            match self.keyword() {
                Some("fact") => {
                    self.next();
                    let atom = self.ground_atom(&node)?;
                    theory.insert_fact(atom);
                    self.expect(TokenKind::Dot, "'.'")?;
                }
                Some("rule") => {
                    self.next();
                    let head = self.atom(&node, false)?;
                    self.expect(TokenKind::Turnstile, "':-'")?;
                    let body = self.atom_list(&node)?;
                    let rule = crate::model::DefiniteRule::new(head, body);
                    if !rule.is_range_restricted() {
                        return Err(self.error_here(format!(
                            "rule {} is not range-restricted: a head variable is missing from the body",
                            rule
                        )));
                    }
                    theory.rules.push(rule);
                    self.expect(TokenKind::Dot, "'.'")?;
                }
                Some("clause") => {
                    self.next();
                    let mut atoms = vec![self.ground_atom(&node)?];
                    while self.eat(TokenKind::Pipe) {
                        atoms.push(self.ground_atom(&node)?);
                    }
                    if atoms.len() < 2 {
                        return Err(self.error_here("a clause needs at least two alternatives"));
                    }
                    theory.add_disjunction(atoms);
                    self.expect(TokenKind::Dot, "'.'")?;
                }
                Some("denial") => {
                    self.next();
                    self.expect(TokenKind::Turnstile, "':-'")?;
                    let body = self.atom_list(&node)?;
                    theory.denials.push(crate::model::Denial { body });
                    self.expect(TokenKind::Dot, "'.'")?;
                }
                Some("inconsistent") => {
                    self.next();
                    theory.falsum = true;
                    self.expect(TokenKind::Dot, "'.'")?;
                }
                _ => {
                    return Err(self.error_here(
                        "expected 'fact', 'rule', 'clause', 'denial', 'inconsistent', or '}'",
                    ))
                }
            }
        }
        system.nodes.insert(node, theory);
        Ok(())
    }

    /// Parses `<id>:Pred(args)`, returning the node id token as well.
    fn prefixed_atom(&mut self) -> Result<(Token, Atom), ParseError> {
        let id = match self.peek() {
            Some(t) if t.kind == TokenKind::Word || t.kind == TokenKind::Quoted => {
                self.next().expect("peeked")
            }
            _ => return Err(self.error_here("expected a node id")),
        };
        self.expect(TokenKind::Colon, "':'")?;
        let node = NodeId::new(id.text.clone());
        let atom = self.atom(&node, false)?;
        Ok((id, atom))
    }

    fn link(&mut self, system: &mut P2PSystem, index: usize) -> Result<(), ParseError> {
        let mut sources: Vec<(NodeId, Vec<Atom>)> = Vec::new();
        let mut positions: Vec<(usize, usize)> = Vec::new();
        loop {
            let (id, atom) = self.prefixed_atom()?;
            let node = NodeId::new(id.text.clone());
            positions.push((id.line, id.col));
            match sources.iter_mut().find(|(n, _)| *n == node) {
                Some((_, atoms)) => atoms.push(atom),
                None => sources.push((node, vec![atom])),
            }
            if self.eat(TokenKind::Amp) {
                continue;
            }
            self.expect(TokenKind::Implies, "'&' or '=>'")?;
            break;
        }

        let (head_id, first_head) = self.prefixed_atom()?;
        let mut head_atoms = vec![first_head];
        let mut disjunctive = None;
        loop {
            let sep = if self.eat(TokenKind::Pipe) {
                true
            } else if self.eat(TokenKind::Amp) {
                false
            } else {
                self.expect(TokenKind::Dot, "'|', '&', or '.'")?;
                break;
            };
            match disjunctive {
                None => disjunctive = Some(sep),
                Some(d) if d != sep => {
                    return Err(self.error_here("a link head cannot mix '|' and '&'"));
                }
                Some(_) => {}
            }
            let (id, atom) = self.prefixed_atom()?;
            if id.text != head_id.text {
                return Err(ParseError::new(
                    id.line,
                    id.col,
                    format!("head atoms target different nodes ({} and {})", head_id.text, id.text),
                ));
            }
            head_atoms.push(atom);
        }

        let target = NodeId::new(head_id.text.clone());
        for ((source, _), (line, col)) in sources.iter().zip(&positions) {
            if *source == target {
                return Err(ParseError::new(
                    *line,
                    *col,
                    format!("source and target indices must be pairwise distinct ({} repeats)", source),
                ));
            }
        }

        let head = if disjunctive == Some(true) {
            RuleHead::Disjunctive(head_atoms)
        } else {
            RuleHead::Conjunctive(head_atoms)
        };
        let rule = CoordinationRule {
            id: RuleId::new(format!("r{}", index)),
            body: sources
                .into_iter()
                .map(|(source, atoms)| BodyConjunct { source, atoms })
                .collect(),
            target,
            head,
        };
        if let RuleHead::Disjunctive(_) = rule.head {
            if !rule.existential_head_vars().is_empty() {
                return Err(ParseError::new(
                    head_id.line,
                    head_id.col,
                    "a disjunctive head may only use variables from the link body",
                ));
            }
        }
        system.rules.push(rule);
        Ok(())
    }
}

/// Parses a network description. Beyond syntax this checks arity
/// consistency, that links reference declared nodes, and that link indices
/// are pairwise distinct, all with input positions.
pub fn parse_network(input: &str) -> Result<P2PSystem, ParseError> {
    let tokens = lex(input)?;
    let mut parser = Parser::new(tokens);
    let mut system = P2PSystem::default();
    let mut link_positions: Vec<(usize, usize)> = Vec::new();
    let mut link_index = 0usize;
    while let Some(keyword) = parser.keyword() {
        match keyword {
            "node" => {
                parser.next();
                parser.node_block(&mut system)?;
            }
            "link" => {
                let t = parser.next().expect("peeked");
                link_index += 1;
                link_positions.push((t.line, t.col));
                parser.link(&mut system, link_index)?;
            }
            other => {
                return Err(parser.error_here(format!("expected 'node' or 'link', got '{}'", other)));
            }
        }
    }
    if let Some(t) = parser.peek() {
        return Err(ParseError::new(t.line, t.col, "expected 'node' or 'link'"));
    }
    for (rule, (line, col)) in system.rules.iter().zip(&link_positions) {
        for conjunct in &rule.body {
            if !system.nodes.contains_key(&conjunct.source) {
                return Err(ParseError::new(*line, *col, format!("unknown node {}", conjunct.source)));
            }
        }
        if !system.nodes.contains_key(&rule.target) {
            return Err(ParseError::new(*line, *col, format!("unknown node {}", rule.target)));
        }
    }
    Ok(system)
}

fn bare_ok(name: &str, ground: bool) -> bool {
    let mut chars = name.chars();
    let Some(first) = chars.next() else { return false };
    if !name.chars().all(is_word_char) {
        return false;
    }
    if ground {
        // In ground positions any bare word reads back as a constant.
        first.is_alphanumeric() || first == '_'
    } else {
        first.is_uppercase() || first.is_ascii_digit()
    }
}

fn write_term(out: &mut String, term: &Term, ground: bool) {
    match term {
        Term::Var(v) => out.push_str(v.as_str()),
        Term::Const(c) => {
            if bare_ok(c.as_str(), ground) {
                out.push_str(c.as_str());
            } else {
                let _ = write!(out, "\"{}\"", c.as_str());
            }
        }
    }
}

fn write_ground_term(out: &mut String, term: &GroundTerm) {
    match term {
        GroundTerm::Const(c) => {
            if bare_ok(c.as_str(), true) {
                out.push_str(c.as_str());
            } else {
                let _ = write!(out, "\"{}\"", c.as_str());
            }
        }
        // Nulls have no surface syntax; keep them readable if they leak into
        // a serialized derived theory.
        GroundTerm::Null(n) => {
            let _ = write!(out, "\"~{}\"", n.as_str());
        }
    }
}

fn write_atom(out: &mut String, atom: &Atom, ground: bool, prefix: bool) {
    if prefix {
        let _ = write!(out, "{}:", atom.node);
    }
    out.push_str(&atom.predicate);
    out.push('(');
    for (i, term) in atom.args.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_term(out, term, ground);
    }
    out.push(')');
}

fn write_ground_atom(out: &mut String, atom: &GroundAtom) {
    out.push_str(&atom.predicate);
    out.push('(');
    for (i, term) in atom.args.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_ground_term(out, term);
    }
    out.push(')');
}

/// Renders a system back into the text format. Reparsing yields an equal
/// system (link ids are regenerated in order).
pub fn serialize_network(system: &P2PSystem) -> String {
    let mut out = String::new();
    for (id, theory) in &system.nodes {
        let _ = writeln!(out, "node {} {{", id);
        for fact in &theory.facts {
            out.push_str("  fact ");
            write_ground_atom(&mut out, fact);
            out.push_str(".\n");
        }
        for rule in &theory.rules {
            out.push_str("  rule ");
            write_atom(&mut out, &rule.head, false, false);
            out.push_str(" :- ");
            for (i, atom) in rule.body.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_atom(&mut out, atom, false, false);
            }
            out.push_str(".\n");
        }
        for clause in &theory.clauses {
            out.push_str("  clause ");
            for (i, atom) in clause.atoms().iter().enumerate() {
                if i > 0 {
                    out.push_str(" | ");
                }
                write_ground_atom(&mut out, atom);
            }
            out.push_str(".\n");
        }
        for denial in &theory.denials {
            out.push_str("  denial :- ");
            for (i, atom) in denial.body.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_atom(&mut out, atom, false, false);
            }
            out.push_str(".\n");
        }
        if theory.falsum {
            out.push_str("  inconsistent.\n");
        }
        out.push_str("}\n");
    }
    for rule in &system.rules {
        out.push_str("link ");
        let mut first = true;
        for conjunct in &rule.body {
            for atom in &conjunct.atoms {
                if !first {
                    out.push_str(" & ");
                }
                first = false;
                write_atom(&mut out, atom, false, true);
            }
        }
        out.push_str(" => ");
        let sep = match rule.head {
            RuleHead::Conjunctive(_) => " & ",
            RuleHead::Disjunctive(_) => " | ",
        };
        for (i, atom) in rule.head.atoms().iter().enumerate() {
            if i > 0 {
                out.push_str(sep);
            }
            write_atom(&mut out, atom, false, true);
        }
        out.push_str(".\n");
    }
    out
}

/// Parses a query of the form `<node>: P(x) & Q(x,y) | R(x)`. The answer
/// variables are those occurring in every disjunct, in order of first
/// occurrence; a variable local to one disjunct is existential there.
pub fn parse_query(input: &str) -> Result<Query, ParseError> {
    let tokens = lex(input)?;
    let mut parser = Parser::new(tokens);
    let id = match parser.peek() {
        Some(t) if t.kind == TokenKind::Word || t.kind == TokenKind::Quoted => {
            parser.next().expect("peeked")
        }
        _ => return Err(parser.error_here("expected a node id")),
    };
    parser.expect(TokenKind::Colon, "':'")?;
    let node = NodeId::new(id.text);
    let mut disjuncts = vec![parser.atom_list(&node)?];
    while parser.eat(TokenKind::Pipe) {
        disjuncts.push(parser.atom_list(&node)?);
    }
    parser.eat(TokenKind::Dot);
    if let Some(t) = parser.peek() {
        return Err(ParseError::new(t.line, t.col, "unexpected trailing input"));
    }

    let mut answer_vars: Vec<Variable> = Vec::new();
    for atom in &disjuncts[0] {
        for v in atom.variables() {
            if !answer_vars.contains(v) {
                answer_vars.push(v.clone());
            }
        }
    }
    for disjunct in &disjuncts[1..] {
        let vars: std::collections::BTreeSet<&Variable> =
            disjunct.iter().flat_map(|a| a.variables()).collect();
        answer_vars.retain(|v| vars.contains(v));
    }
    Ok(Query { node, answer_vars, disjuncts })
}
