//! Verilog frontend: lexer, parser, printer and per-module symbol resolution
//! for the synthesizable subset accepted by the toolchain.
//!
//! Parsing keeps the original text attached to the [`Ast`]; [`print`] returns
//! it verbatim so an unmodified parse round-trips byte for byte. Trees built
//! without source text go through the canonical printer instead.

pub mod ast;
pub mod consteval;
pub mod lexer;
pub mod number;
pub mod parser;
pub mod path;
pub mod printer;
pub mod symbols;

pub use ast::*;
pub use number::{Base, NumberLiteral};
pub use parser::{is_keyword, parse_expr};
pub use printer::{print_expr, print_module, print_stmt};
pub use symbols::{resolve, Signal, SignalKind, SymbolTable};

use std::fmt;
use std::path::Path;

/// Source text plus a display name used in diagnostics.
#[derive(Clone, Debug)]
pub struct SourceText {
    pub content: String,
    pub origin: String,
}

impl SourceText {
    pub fn new(content: impl Into<String>, origin: impl Into<String>) -> SourceText {
        SourceText {
            content: content.into(),
            origin: origin.into(),
        }
    }

    pub fn from_file(path: &Path) -> std::io::Result<SourceText> {
        let content = std::fs::read_to_string(path)?;
        Ok(SourceText::new(content, path.display().to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub origin: String,
    pub offset: usize,
    /// 1-based.
    pub line: usize,
    /// 1-based, in characters.
    pub col: usize,
    pub message: String,
    pub expected: Vec<String>,
}

impl ParseError {
    pub fn at(src: &str, offset: usize, message: &str, expected: &[&str]) -> ParseError {
        let offset = offset.min(src.len());
        let before = &src[..offset];
        let line = before.matches('\n').count() + 1;
        let line_start = before.rfind('\n').map(|i| i + 1).unwrap_or(0);
        let col = src[line_start..offset].chars().count() + 1;
        ParseError {
            origin: String::new(),
            offset,
            line,
            col,
            message: message.to_string(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.origin.is_empty() {
            write!(f, "{}:", self.origin)?;
        }
        write!(f, "{}:{}: {}", self.line, self.col, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(" or "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

pub fn parse(source: &SourceText) -> Result<Ast, ParseError> {
    parser::parse(source).map_err(|mut e| {
        e.origin = source.origin.clone();
        e
    })
}

/// Convenience wrapper for in-memory text.
pub fn parse_str(text: &str) -> Result<Ast, ParseError> {
    parse(&SourceText::new(text, "<input>"))
}

/// Original text when the tree came from [`parse`], canonical text otherwise.
pub fn print(ast: &Ast) -> String {
    match &ast.source {
        Some(src) => src.to_string(),
        None => printer::print_ast(ast),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn print_returns_source_verbatim() {
        let text = "// top\nmodule m (input  a ,output b);\n  assign b=a; // keep\nendmodule\n";
        let ast = parse_str(text).unwrap();
        assert_eq!(print(&ast), text);
    }

    #[test]
    fn canonical_print_reparses_equal() {
        let text = "module m(input [3:0] a, output reg [3:0] q, input clk);\n\
                    always @(posedge clk) begin if (a[0]) q <= a + 4'd1; else q <= {a[1:0], 2'b00}; end\nendmodule\n";
        let ast = parse_str(text).unwrap();
        let mut bare = ast.clone();
        bare.source = None;
        let canon = print(&bare);
        assert_eq!(parse_str(&canon).unwrap(), ast);
    }

    #[test]
    fn error_display_has_location() {
        let mut e = ParseError::at("ab\ncd", 4, "boom", &["x"]);
        e.origin = "f.v".into();
        assert_eq!(e.to_string(), "f.v:2:2: boom (expected x)");
    }
}
