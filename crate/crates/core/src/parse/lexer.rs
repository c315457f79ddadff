use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Str(String),
    Number(String),
    Punct(&'static str),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "'{s}'"),
            Tok::Str(s) => write!(f, "\"{s}\""),
            Tok::Number(s) => write!(f, "{s}"),
            Tok::Punct(p) => write!(f, "'{p}'"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
    /// Byte range in the source.
    pub start: usize,
    pub end: usize,
}

const PUNCT: &[&str] = &[
    "=?", "->", "<=", ">=", "[", "]", "{", "}", "(", ")", ";", ":", ",", "=", "<", ">", "!", "&",
    "|", "+", "-", "*", "/", "^",
];

#[derive(Debug, Clone, PartialEq)]
pub struct LexError {
    pub pos: Pos,
    pub message: String,
}

/// Splits UTF-8 source into tokens; `#` starts a comment running to the end
/// of the line.
pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let mut out = Vec::new();
    let mut line = 1;
    let mut line_start = 0;
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < src.len() {
        let c = src[i..].chars().next().unwrap();
        let pos = Pos {
            line,
            col: src[line_start..i].chars().count() + 1,
        };
        if c == '\n' {
            line += 1;
            i += 1;
            line_start = i;
            continue;
        }
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        if c == '#' {
            while i < src.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let tok = if c == '"' {
            i += 1;
            let body_start = i;
            while i < src.len() && bytes[i] != b'"' && bytes[i] != b'\n' {
                i += 1;
            }
            if i >= src.len() || bytes[i] != b'"' {
                return Err(LexError {
                    pos,
                    message: "unterminated string".into(),
                });
            }
            let body = src[body_start..i].to_string();
            i += 1;
            Tok::Str(body)
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < src.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            Tok::Ident(src[start..i].to_string())
        } else if c.is_ascii_digit()
            || (c == '.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit))
        {
            while i < src.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < src.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < src.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < src.len() && bytes[j].is_ascii_digit() {
                    while j < src.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            Tok::Number(src[start..i].to_string())
        } else if let Some(p) = PUNCT.iter().find(|p| src[i..].starts_with(**p)) {
            i += p.len();
            Tok::Punct(p)
        } else {
            return Err(LexError {
                pos,
                message: format!("unexpected character '{c}'"),
            });
        };
        out.push(Token {
            tok,
            pos,
            start,
            end: i,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_and_positions() {
        let toks = tokenize("s0 -> s1 : alpha*p1; # comment\n  R{\"time\"}=? 0.95 1e-3").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.tok.clone()).collect();
        assert_eq!(
            kinds,
            vec![
                Tok::Ident("s0".into()),
                Tok::Punct("->"),
                Tok::Ident("s1".into()),
                Tok::Punct(":"),
                Tok::Ident("alpha".into()),
                Tok::Punct("*"),
                Tok::Ident("p1".into()),
                Tok::Punct(";"),
                Tok::Ident("R".into()),
                Tok::Punct("{"),
                Tok::Str("time".into()),
                Tok::Punct("}"),
                Tok::Punct("=?"),
                Tok::Number("0.95".into()),
                Tok::Number("1e-3".into()),
            ]
        );
        assert_eq!(toks[8].pos, Pos { line: 2, col: 3 });
    }

    #[test]
    fn unterminated_string() {
        let err = tokenize("state s {\"done}\n").unwrap_err();
        assert_eq!(err.pos, Pos { line: 1, col: 10 });
    }
}
