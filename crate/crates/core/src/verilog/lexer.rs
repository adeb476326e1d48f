//! Tokenizer for the supported Verilog subset. Comments and whitespace are
//! kept as trivia so the printer and the transformations can reproduce the
//! original bytes.

use super::ast::Span;
use super::ParseError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    EscapedIdent,
    SystemIdent,
    Number,
    Str,
    Directive,
    Punct,
    Eof,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TriviaKind {
    LineComment,
    BlockComment,
}

#[derive(Clone, Debug)]
pub struct Trivia {
    pub kind: TriviaKind,
    pub span: Span,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
    /// Comments between the previous token and this one.
    pub comments: Vec<Trivia>,
}

const PUNCT3: &[&str] = &["<<<", ">>>", "===", "!==", "~&", "~|", "~^", "^~"];
const PUNCT2: &[&str] = &[
    "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "**", "+:", "-:", "(*", "*)",
];
const PUNCT1: &str = "()[]{};:,.#@=+-*/%&|^~!?<>'";

pub fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut pos = 0usize;
    let mut tokens = Vec::new();
    let mut pending: Vec<Trivia> = Vec::new();
    while pos < bytes.len() {
        let c = bytes[pos];
        if c.is_ascii_whitespace() {
            pos += 1;
            continue;
        }
        if c == b'/' && bytes.get(pos + 1) == Some(&b'/') {
            let start = pos;
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            let mut end = pos;
            if end > start && bytes[end - 1] == b'\r' {
                end -= 1;
            }
            pending.push(Trivia {
                kind: TriviaKind::LineComment,
                span: Span::new(start, end),
            });
            continue;
        }
        if c == b'/' && bytes.get(pos + 1) == Some(&b'*') {
            let start = pos;
            match src[pos + 2..].find("*/") {
                Some(off) => pos = pos + 2 + off + 2,
                None => return Err(ParseError::at(src, start, "unterminated block comment", &["*/"])),
            }
            pending.push(Trivia {
                kind: TriviaKind::BlockComment,
                span: Span::new(start, pos),
            });
            continue;
        }
        let start = pos;
        let kind = if c.is_ascii_alphabetic() || c == b'_' {
            pos += 1;
            while pos < bytes.len() && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_' || bytes[pos] == b'$') {
                pos += 1;
            }
            TokenKind::Ident
        } else if c == b'\\' {
            pos += 1;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos == start + 1 {
                return Err(ParseError::at(src, start, "empty escaped identifier", &["identifier"]));
            }
            TokenKind::EscapedIdent
        } else if c == b'$' {
            pos += 1;
            while pos < bytes.len() && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_' || bytes[pos] == b'$') {
                pos += 1;
            }
            TokenKind::SystemIdent
        } else if c == b'`' {
            pos += 1;
            while pos < bytes.len() && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_') {
                pos += 1;
            }
            TokenKind::Directive
        } else if c == b'"' {
            pos += 1;
            while pos < bytes.len() && bytes[pos] != b'"' {
                if bytes[pos] == b'\\' {
                    pos += 1;
                }
                if bytes.get(pos) == Some(&b'\n') {
                    return Err(ParseError::at(src, start, "unterminated string", &["\""]));
                }
                pos += 1;
            }
            if pos >= bytes.len() {
                return Err(ParseError::at(src, start, "unterminated string", &["\""]));
            }
            pos += 1;
            TokenKind::Str
        } else if c.is_ascii_digit() || (c == b'\'' && is_base_start(bytes, pos + 1)) {
            pos = lex_number(src, pos)?;
            TokenKind::Number
        } else {
            let rest = &src[pos..];
            if let Some(p) = PUNCT3.iter().find(|p| rest.starts_with(**p)) {
                pos += p.len();
            } else if let Some(p) = PUNCT2.iter().find(|p| rest.starts_with(**p)) {
                pos += p.len();
            } else if PUNCT1.as_bytes().contains(&c) {
                pos += 1;
            } else {
                let ch = rest.chars().next().unwrap_or('?');
                return Err(ParseError::at(src, start, &format!("unexpected character `{ch}`"), &["token"]));
            }
            TokenKind::Punct
        };
        tokens.push(Token {
            kind,
            span: Span::new(start, pos),
            comments: std::mem::take(&mut pending),
        });
    }
    tokens.push(Token {
        kind: TokenKind::Eof,
        span: Span::new(src.len(), src.len()),
        comments: pending,
    });
    Ok(tokens)
}

fn is_base_start(bytes: &[u8], pos: usize) -> bool {
    let mut p = pos;
    if matches!(bytes.get(p), Some(b's' | b'S')) {
        p += 1;
    }
    matches!(bytes.get(p), Some(b'b' | b'B' | b'o' | b'O' | b'd' | b'D' | b'h' | b'H'))
}

fn lex_number(src: &str, mut pos: usize) -> Result<usize, ParseError> {
    let bytes = src.as_bytes();
    let start = pos;
    while pos < bytes.len() && (bytes[pos].is_ascii_digit() || bytes[pos] == b'_') {
        pos += 1;
    }
    // Optional whitespace between size and base is legal Verilog; we only accept
    // the contiguous spelling plus whitespace after the base letter.
    if pos < bytes.len() && bytes[pos] == b'\'' && is_base_start(bytes, pos + 1) {
        pos += 1;
        if matches!(bytes[pos], b's' | b'S') {
            pos += 1;
        }
        pos += 1;
        while pos < bytes.len() && (bytes[pos] == b' ' || bytes[pos] == b'\t') {
            pos += 1;
        }
        let digits_start = pos;
        while pos < bytes.len() && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_' || bytes[pos] == b'?') {
            pos += 1;
        }
        if pos == digits_start {
            return Err(ParseError::at(src, start, "based literal without digits", &["digits"]));
        }
    } else if pos < bytes.len() && bytes[pos] == b'.' && bytes.get(pos + 1).is_some_and(u8::is_ascii_digit) {
        return Err(ParseError::at(src, start, "real literals are not supported", &["integer literal"]));
    }
    Ok(pos)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(src: &str) -> Vec<String> {
        lex(src)
            .unwrap()
            .iter()
            .filter(|t| t.kind != TokenKind::Eof)
            .map(|t| src[t.span.start..t.span.end].to_string())
            .collect()
    }

    #[test]
    fn numbers_are_single_tokens() {
        assert_eq!(texts("a = 8'hA5 + 'b1_0 + 12;"), vec!["a", "=", "8'hA5", "+", "'b1_0", "+", "12", ";"]);
    }

    #[test]
    fn comments_become_trivia() {
        let toks = lex("// hi\nwire a; /* b */ reg c;").unwrap();
        assert_eq!(toks[0].comments.len(), 1);
        assert_eq!(toks[3].comments.len(), 1);
        assert_eq!(toks[3].comments[0].kind, TriviaKind::BlockComment);
    }

    #[test]
    fn escaped_identifier() {
        assert_eq!(texts("\\q_reg[1]  (x)"), vec!["\\q_reg[1]", "(", "x", ")"]);
    }

    #[test]
    fn multi_char_operators() {
        assert_eq!(texts("a <= b !== c >>> 2"), vec!["a", "<=", "b", "!==", "c", ">>>", "2"]);
    }

    #[test]
    fn unterminated_comment_reports_position() {
        let err = lex("wire a;\n/* oops").unwrap_err();
        assert_eq!((err.line, err.col), (2, 1));
    }
}
