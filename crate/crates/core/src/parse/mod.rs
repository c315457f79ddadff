//! Readers and writers for the `.pdtmc` model format and `.pctl` requirement
//! files. See `docs/formats.md` for the grammar.

mod lexer;
mod model;
mod props;

pub use lexer::Pos;
pub use model::{parse_model, write_model};
pub use props::{parse_properties, parse_property, write_properties};

use lexer::{Tok, Token};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("{pos}: syntax error: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("{pos}: duplicate state '{name}'")]
    DuplicateState { pos: Pos, name: String },
    #[error("{pos}: unknown parameter '{name}'")]
    UnknownParameter { pos: Pos, name: String },
    #[error("{pos}: unknown state '{name}'")]
    UnknownState { pos: Pos, name: String },
    #[error("{pos}: {message}")]
    Invalid { pos: Pos, message: String },
    #[error("state '{state}': {detail}")]
    RowIncomplete { state: String, detail: String },
    #[error("{pos}: requirement '{id}' has no comparator and threshold")]
    UnboundComparator { pos: Pos, id: String },
}

impl ParseError {
    pub fn pos(&self) -> Option<Pos> {
        match self {
            ParseError::Syntax { pos, .. }
            | ParseError::DuplicateState { pos, .. }
            | ParseError::UnknownParameter { pos, .. }
            | ParseError::UnknownState { pos, .. }
            | ParseError::Invalid { pos, .. }
            | ParseError::UnboundComparator { pos, .. } => Some(*pos),
            ParseError::RowIncomplete { .. } => None,
        }
    }
}

pub(crate) fn syntax(pos: Pos, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        pos,
        message: message.into(),
    }
}

/// Line/column of a byte offset.
pub(crate) fn pos_at(src: &str, offset: usize) -> Pos {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    Pos {
        line,
        col: before[line_start..].chars().count() + 1,
    }
}

pub(crate) struct Cursor<'a> {
    src: &'a str,
    toks: Vec<Token>,
    at: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(src: &'a str) -> Result<Self, ParseError> {
        let toks = lexer::tokenize(src).map_err(|e| syntax(e.pos, e.message))?;
        Ok(Self { src, toks, at: 0 })
    }

    pub(crate) fn src(&self) -> &'a str {
        self.src
    }

    pub(crate) fn at_end(&self) -> bool {
        self.at >= self.toks.len()
    }

    pub(crate) fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.tok)
    }

    pub(crate) fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.at + k).map(|t| &t.tok)
    }

    pub(crate) fn pos(&self) -> Pos {
        match self.toks.get(self.at) {
            Some(t) => t.pos,
            None => pos_at(self.src, self.src.len()),
        }
    }

    pub(crate) fn offset(&self) -> usize {
        self.toks.get(self.at).map_or(self.src.len(), |t| t.start)
    }

    pub(crate) fn prev_end(&self) -> usize {
        self.at
            .checked_sub(1)
            .and_then(|i| self.toks.get(i))
            .map_or(0, |t| t.end)
    }

    pub(crate) fn bump(&mut self) -> Option<&Token> {
        let t = self.toks.get(self.at);
        if t.is_some() {
            self.at += 1;
        }
        t
    }

    fn describe(&self) -> String {
        match self.peek() {
            Some(t) => t.to_string(),
            None => "end of input".to_string(),
        }
    }

    pub(crate) fn unexpected(&self, wanted: &str) -> ParseError {
        syntax(
            self.pos(),
            format!("expected {wanted}, found {}", self.describe()),
        )
    }

    pub(crate) fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Tok::Punct(q)) if *q == p)
    }

    pub(crate) fn is_ident(&self, word: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(w)) if w == word)
    }

    pub(crate) fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    pub(crate) fn expect_punct(&mut self, p: &str) -> Result<(), ParseError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("'{p}'")))
        }
    }

    pub(crate) fn expect_keyword(&mut self, word: &str) -> Result<(), ParseError> {
        if self.is_ident(word) {
            self.at += 1;
            Ok(())
        } else {
            Err(self.unexpected(&format!("'{word}'")))
        }
    }

    pub(crate) fn expect_ident(&mut self) -> Result<(String, Pos), ParseError> {
        let pos = self.pos();
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.at += 1;
                Ok((s, pos))
            }
            _ => Err(self.unexpected("an identifier")),
        }
    }

    pub(crate) fn expect_string(&mut self) -> Result<(String, Pos), ParseError> {
        let pos = self.pos();
        match self.peek() {
            Some(Tok::Str(s)) => {
                let s = s.clone();
                self.at += 1;
                Ok((s, pos))
            }
            _ => Err(self.unexpected("a quoted string")),
        }
    }

    /// A possibly signed decimal literal.
    pub(crate) fn expect_number(&mut self) -> Result<(f64, Pos), ParseError> {
        let pos = self.pos();
        let neg = self.eat_punct("-");
        match self.peek() {
            Some(Tok::Number(s)) => {
                let v: f64 = s
                    .parse()
                    .map_err(|_| syntax(pos, format!("malformed number '{s}'")))?;
                self.at += 1;
                Ok((if neg { -v } else { v }, pos))
            }
            _ => Err(self.unexpected("a number")),
        }
    }

    pub(crate) fn expect_int(&mut self) -> Result<(u32, Pos), ParseError> {
        let pos = self.pos();
        match self.peek() {
            Some(Tok::Number(s)) => {
                let v: u32 = s.parse().map_err(|_| {
                    syntax(pos, format!("expected a non-negative integer, found {s}"))
                })?;
                self.at += 1;
                Ok((v, pos))
            }
            _ => Err(self.unexpected("an integer")),
        }
    }

    /// Skips tokens up to (not including) the next `;` at bracket depth
    /// zero, returning the covered source text and its starting offset.
    pub(crate) fn take_until_semicolon(&mut self) -> Result<(&'a str, usize), ParseError> {
        let start = self.offset();
        let mut depth = 0i32;
        loop {
            match self.peek() {
                None => return Err(self.unexpected("';'")),
                Some(Tok::Punct(";")) if depth == 0 => break,
                Some(Tok::Punct("(")) => depth += 1,
                Some(Tok::Punct(")")) => depth -= 1,
                _ => {}
            }
            self.at += 1;
        }
        let end = self.prev_end().max(start);
        Ok((&self.src[start..end], start))
    }
}
