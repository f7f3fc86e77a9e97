//! Line-oriented tokenizer shared by every knowledge-base file format.
//!
//! All KB files use `#` comments, blank lines are ignored and tokens are
//! separated by whitespace. The punctuation characters `{`, `}`, `,` and `=`
//! always form tokens of their own, so `{normal,decreased}` and
//! `{ normal , decreased }` tokenize identically.

use std::fmt;

/// An error tied to a position in a KB text file. Lines and columns are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl LineError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            column,
            message: message.into(),
        }
    }

    pub fn at(token: &Token<'_>, message: impl Into<String>) -> Self {
        Self::new(token.line, token.column, message)
    }
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "line {}, column {}: {}",
            self.line, self.column, self.message
        )
    }
}

impl std::error::Error for LineError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub text: &'a str,
    pub line: usize,
    pub column: usize,
}

/// One non-empty, comment-stripped line.
#[derive(Debug, Clone)]
pub struct Line<'a> {
    pub number: usize,
    pub tokens: Vec<Token<'a>>,
}

impl<'a> Line<'a> {
    /// Column just past the last token, used for "unexpected end of line".
    pub fn end_column(&self) -> usize {
        self.tokens
            .last()
            .map(|t| t.column + t.text.chars().count())
            .unwrap_or(1)
    }

    pub fn eol_error(&self, message: impl Into<String>) -> LineError {
        LineError::new(self.number, self.end_column(), message)
    }
}

fn is_punct(c: char) -> bool {
    matches!(c, '{' | '}' | ',' | '=')
}

pub fn tokenize_line(raw: &str, number: usize) -> Vec<Token<'_>> {
    let content = match raw.find('#') {
        Some(pos) => &raw[..pos],
        None => raw,
    };
    let mut tokens = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    let mut column = 0;
    for (byte, c) in content.char_indices() {
        column += 1;
        if c.is_whitespace() || is_punct(c) {
            if let Some((b, col)) = start.take() {
                tokens.push(Token {
                    text: &content[b..byte],
                    line: number,
                    column: col,
                });
            }
            if is_punct(c) {
                tokens.push(Token {
                    text: &content[byte..byte + c.len_utf8()],
                    line: number,
                    column,
                });
            }
        } else if start.is_none() {
            start = Some((byte, column));
        }
    }
    if let Some((b, col)) = start {
        tokens.push(Token {
            text: &content[b..],
            line: number,
            column: col,
        });
    }
    tokens
}

/// Iterates the non-empty lines of a KB file.
pub fn lines(text: &str) -> impl Iterator<Item = Line<'_>> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let tokens = tokenize_line(raw, i + 1);
        (!tokens.is_empty()).then_some(Line {
            number: i + 1,
            tokens,
        })
    })
}

/// Identifiers are lowercase ASCII letters, digits and underscores, starting
/// with a letter.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}
