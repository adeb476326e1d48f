use super::ast::*;
use super::lexer::{lex, Token, TokenKind};
use super::number::NumberLiteral;
use super::{ParseError, SourceText};
use std::sync::Arc;

const KEYWORDS: &[&str] = &[
    "module", "endmodule", "input", "output", "inout", "wire", "reg", "signed", "parameter", "localparam",
    "assign", "always", "begin", "end", "if", "else", "case", "casez", "casex", "endcase", "default", "posedge",
    "negedge", "or", "and", "not", "integer", "genvar", "generate", "endgenerate", "for", "while", "repeat",
    "forever", "initial", "function", "endfunction", "task", "endtask", "interface", "endinterface", "tri",
    "supply0", "supply1", "wand", "wor", "real", "time", "event", "fork", "join", "deassign", "force", "release",
    "specify", "endspecify", "primitive", "endprimitive", "table", "endtable", "defparam", "logic", "always_ff",
    "always_comb", "always_latch",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

pub fn parse(source: &SourceText) -> Result<Ast, ParseError> {
    let tokens = lex(&source.content)?;
    let mut p = Parser {
        src: &source.content,
        tokens,
        pos: 0,
    };
    let mut modules = Vec::new();
    while !p.at_eof() {
        if p.peek_kind() == TokenKind::Directive {
            return Err(p.error("preprocessor directives are not supported", &["module"]));
        }
        if p.is_kw("module") {
            modules.push(p.parse_module()?);
        } else {
            return Err(p.error("expected a module declaration", &["module"]));
        }
    }
    let trailing_comments = p.comments_of(p.pos);
    Ok(Ast {
        modules,
        trailing_comments,
        source: Some(Arc::from(source.content.as_str())),
        origin: source.origin.clone(),
    })
}

/// Parse a standalone expression (used by tests and by rule helpers).
pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let tokens = lex(text)?;
    let mut p = Parser {
        src: text,
        tokens,
        pos: 0,
    };
    let e = p.parse_expr()?;
    if !p.at_eof() {
        return Err(p.error("trailing input after expression", &["end of input"]));
    }
    Ok(e)
}

struct Parser<'s> {
    src: &'s str,
    tokens: Vec<Token>,
    pos: usize,
}

impl<'s> Parser<'s> {
    fn tok(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn peek_kind(&self) -> TokenKind {
        self.tok().kind
    }

    fn text_at(&self, idx: usize) -> &'s str {
        let t = &self.tokens[idx.min(self.tokens.len() - 1)];
        &self.src[t.span.start..t.span.end]
    }

    fn text(&self) -> &'s str {
        self.text_at(self.pos)
    }

    fn at_eof(&self) -> bool {
        self.peek_kind() == TokenKind::Eof
    }

    fn span(&self) -> Span {
        self.tok().span
    }

    fn prev_end(&self) -> usize {
        if self.pos == 0 {
            0
        } else {
            self.tokens[self.pos - 1].span.end
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        self.peek_kind() == TokenKind::Ident && self.text() == kw
    }

    fn is_punct(&self, p: &str) -> bool {
        self.peek_kind() == TokenKind::Punct && self.text() == p
    }

    fn bump(&mut self) -> Span {
        let s = self.span();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        s
    }

    fn error(&self, msg: &str, expected: &[&str]) -> ParseError {
        let found = if self.at_eof() {
            "end of input".to_string()
        } else {
            format!("`{}`", self.text())
        };
        ParseError::at(self.src, self.span().start, &format!("{msg}, found {found}"), expected)
    }

    fn expect_punct(&mut self, p: &str) -> Result<Span, ParseError> {
        if self.is_punct(p) {
            Ok(self.bump())
        } else {
            Err(self.error(&format!("expected `{p}`"), &[p]))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<Span, ParseError> {
        if self.is_kw(kw) {
            Ok(self.bump())
        } else {
            Err(self.error(&format!("expected `{kw}`"), &[kw]))
        }
    }

    fn comments_of(&self, idx: usize) -> Vec<Comment> {
        self.tokens[idx.min(self.tokens.len() - 1)]
            .comments
            .iter()
            .map(|t| Comment {
                text: self.src[t.span.start..t.span.end].to_string(),
                span: t.span,
            })
            .collect()
    }

    fn ident(&mut self) -> Result<Ident, ParseError> {
        match self.peek_kind() {
            TokenKind::Ident if !is_keyword(self.text()) => {
                let name = self.text().to_string();
                let span = self.bump();
                Ok(Ident { name, span })
            }
            TokenKind::EscapedIdent => {
                let name = self.text().to_string();
                let span = self.bump();
                Ok(Ident { name, span })
            }
            _ => Err(self.error("expected an identifier", &["identifier"])),
        }
    }

    fn parse_module(&mut self) -> Result<Module, ParseError> {
        let comments = self.comments_of(self.pos);
        let start = self.expect_kw("module")?;
        let name = self.ident()?;
        let mut params = Vec::new();
        if self.is_punct("#") {
            self.bump();
            self.expect_punct("(")?;
            if !self.is_punct(")") {
                loop {
                    params.push(self.parse_header_param()?);
                    if self.is_punct(",") {
                        self.bump();
                    } else {
                        break;
                    }
                }
            }
            self.expect_punct(")")?;
        }
        let mut ports = Vec::new();
        let mut port_list_span = Span::SYNTHETIC;
        if self.is_punct("(") {
            let open = self.bump();
            if !self.is_punct(")") {
                let mut current: Option<(Direction, Option<NetKind>, bool, Option<Range>)> = None;
                loop {
                    let pstart = self.span();
                    let dir = if self.is_kw("input") {
                        Some(Direction::Input)
                    } else if self.is_kw("output") {
                        Some(Direction::Output)
                    } else if self.is_kw("inout") {
                        Some(Direction::Inout)
                    } else {
                        None
                    };
                    let explicit = dir.is_some();
                    if let Some(dir) = dir {
                        self.bump();
                        let net = if self.is_kw("wire") {
                            self.bump();
                            Some(NetKind::Wire)
                        } else if self.is_kw("reg") {
                            self.bump();
                            Some(NetKind::Reg)
                        } else {
                            None
                        };
                        let signed = if self.is_kw("signed") {
                            self.bump();
                            true
                        } else {
                            false
                        };
                        let range = if self.is_punct("[") { Some(self.parse_range()?) } else { None };
                        current = Some((dir, net, signed, range));
                    }
                    let Some((dir, net, signed, range)) = current.clone() else {
                        return Err(self.error(
                            "non-ANSI port lists are not supported",
                            &["input", "output", "inout"],
                        ));
                    };
                    let name = self.ident()?;
                    if self.is_punct("[") {
                        return Err(self.error("unpacked port arrays are not supported", &[",", ")"]));
                    }
                    ports.push(Port {
                        dir,
                        net,
                        signed,
                        range,
                        span: pstart.join(name.span),
                        name,
                        explicit,
                    });
                    if self.is_punct(",") {
                        self.bump();
                    } else {
                        break;
                    }
                }
            }
            let close = self.expect_punct(")")?;
            port_list_span = open.join(close);
        }
        self.expect_punct(";")?;
        let mut items = Vec::new();
        while !self.is_kw("endmodule") {
            if self.at_eof() {
                return Err(self.error("unexpected end of input inside module", &["endmodule"]));
            }
            items.push(self.parse_item()?);
        }
        let end_comments = self.comments_of(self.pos);
        let end = self.bump();
        Ok(Module {
            name,
            comments,
            params,
            ports,
            items,
            end_comments,
            span: start.join(end),
            port_list_span,
        })
    }

    fn parse_header_param(&mut self) -> Result<HeaderParam, ParseError> {
        let start = self.span();
        let keyword = if self.is_kw("parameter") {
            self.bump();
            true
        } else if self.is_kw("localparam") {
            return Err(self.error("localparam is not allowed in a parameter port list", &["parameter"]));
        } else {
            false
        };
        if self.is_kw("integer") || self.is_kw("signed") {
            return Err(self.error("typed parameters are not supported", &["identifier", "["]));
        }
        let range = if self.is_punct("[") { Some(self.parse_range()?) } else { None };
        let name = self.ident()?;
        self.expect_punct("=")?;
        let value = self.parse_expr()?;
        Ok(HeaderParam {
            keyword,
            range,
            span: start.join(value.span),
            name,
            value,
        })
    }

    fn parse_range(&mut self) -> Result<Range, ParseError> {
        let open = self.expect_punct("[")?;
        let msb = self.parse_expr()?;
        self.expect_punct(":")?;
        let lsb = self.parse_expr()?;
        let close = self.expect_punct("]")?;
        Ok(Range {
            msb,
            lsb,
            span: open.join(close),
        })
    }

    fn parse_item(&mut self) -> Result<Item, ParseError> {
        let comments = self.comments_of(self.pos);
        let start = self.span();
        if self.peek_kind() == TokenKind::Directive {
            return Err(self.error("preprocessor directives are not supported", &["module item"]));
        }
        if self.peek_kind() != TokenKind::Ident && self.peek_kind() != TokenKind::EscapedIdent {
            return Err(self.error("expected a module item", &["wire", "reg", "assign", "always", "localparam"]));
        }
        let kind = match self.text() {
            "wire" | "reg" => ItemKind::Net(self.parse_net_decl()?),
            "parameter" | "localparam" => {
                let local = self.text() == "localparam";
                self.bump();
                if self.is_kw("integer") || self.is_kw("signed") {
                    return Err(self.error("typed parameters are not supported", &["identifier", "["]));
                }
                let range = if self.is_punct("[") { Some(self.parse_range()?) } else { None };
                let mut assigns = Vec::new();
                loop {
                    let name = self.ident()?;
                    self.expect_punct("=")?;
                    let value = self.parse_expr()?;
                    assigns.push(ParamAssign { name, value });
                    if self.is_punct(",") {
                        self.bump();
                    } else {
                        break;
                    }
                }
                self.expect_punct(";")?;
                ItemKind::Param(ParamDecl { local, range, assigns })
            }
            "assign" => {
                self.bump();
                let mut list = Vec::new();
                loop {
                    let lhs = self.parse_lvalue()?;
                    self.expect_punct("=")?;
                    let rhs = self.parse_expr()?;
                    list.push(ContAssign {
                        span: lhs.span.join(rhs.span),
                        lhs,
                        rhs,
                    });
                    if self.is_punct(",") {
                        self.bump();
                    } else {
                        break;
                    }
                }
                self.expect_punct(";")?;
                ItemKind::Assign(list)
            }
            "always" => {
                self.bump();
                if !self.is_punct("@") {
                    return Err(self.error("always blocks need an event control", &["@"]));
                }
                let sens = self.parse_event_control()?;
                let body = self.parse_stmt()?;
                ItemKind::Always(Always { sens, body })
            }
            "input" | "output" | "inout" => {
                return Err(self.error("port declarations in the module body are not supported", &["ANSI port list"]))
            }
            "generate" | "genvar" | "interface" => {
                return Err(self.error("generate constructs are not supported", &["module item"]))
            }
            "initial" | "integer" | "function" | "task" | "real" | "time" | "specify" | "defparam" | "tri"
            | "supply0" | "supply1" | "always_ff" | "always_comb" | "logic" => {
                return Err(self.error("construct outside the supported subset", &["wire", "reg", "assign", "always"]))
            }
            t if is_keyword(t) => {
                return Err(self.error("unexpected keyword", &["wire", "reg", "assign", "always", "localparam"]))
            }
            _ => ItemKind::Instance(self.parse_instance()?),
        };
        Ok(Item {
            kind,
            comments,
            span: Span::new(start.start, self.prev_end()),
        })
    }

    fn parse_net_decl(&mut self) -> Result<NetDecl, ParseError> {
        let kind = if self.text() == "wire" { NetKind::Wire } else { NetKind::Reg };
        let kind_span = self.bump();
        let signed = if self.is_kw("signed") {
            self.bump();
            true
        } else {
            false
        };
        let range = if self.is_punct("[") { Some(self.parse_range()?) } else { None };
        let mut names = Vec::new();
        loop {
            let name = self.ident()?;
            if self.is_punct("[") {
                return Err(self.error("memories (unpacked arrays) are not supported", &[";", ",", "="]));
            }
            let init = if self.is_punct("=") {
                self.bump();
                Some(self.parse_expr()?)
            } else {
                None
            };
            names.push(DeclName { name, init });
            if self.is_punct(",") {
                self.bump();
            } else {
                break;
            }
        }
        self.expect_punct(";")?;
        Ok(NetDecl {
            kind,
            signed,
            range,
            names,
            kind_span,
        })
    }

    fn parse_instance(&mut self) -> Result<Instance, ParseError> {
        let module = self.ident()?;
        let mut params = Vec::new();
        if self.is_punct("#") {
            self.bump();
            self.expect_punct("(")?;
            params = self.parse_connections()?;
            self.expect_punct(")")?;
        }
        let mut instances = Vec::new();
        loop {
            let name = self.ident()?;
            self.expect_punct("(")?;
            let connections = self.parse_connections()?;
            let close = self.expect_punct(")")?;
            instances.push(InstanceName {
                span: name.span.join(close),
                name,
                connections,
            });
            if self.is_punct(",") {
                self.bump();
            } else {
                break;
            }
        }
        self.expect_punct(";")?;
        Ok(Instance {
            module,
            params,
            instances,
        })
    }

    fn parse_connections(&mut self) -> Result<Vec<Connection>, ParseError> {
        let mut out = Vec::new();
        if self.is_punct(")") {
            return Ok(out);
        }
        loop {
            if self.is_punct(".") {
                self.bump();
                let port = self.ident()?;
                self.expect_punct("(")?;
                let expr = if self.is_punct(")") { None } else { Some(self.parse_expr()?) };
                self.expect_punct(")")?;
                out.push(Connection::Named { port, expr });
            } else {
                out.push(Connection::Positional(self.parse_expr()?));
            }
            if self.is_punct(",") {
                self.bump();
            } else {
                break;
            }
        }
        Ok(out)
    }

    fn parse_event_control(&mut self) -> Result<EventControl, ParseError> {
        let at = self.expect_punct("@")?;
        if self.is_punct("*") {
            let s = self.bump();
            return Ok(EventControl::Star {
                parens: false,
                span: at.join(s),
            });
        }
        if self.is_punct("(*") {
            // The lexer reads `(*` as an attribute opener; here it is `@(*)`.
            self.bump();
            let close = self.expect_punct(")")?;
            return Ok(EventControl::Star {
                parens: true,
                span: at.join(close),
            });
        }
        self.expect_punct("(")?;
        if self.is_punct("*") {
            self.bump();
            let close = self.expect_punct(")")?;
            return Ok(EventControl::Star {
                parens: true,
                span: at.join(close),
            });
        }
        let mut items = Vec::new();
        let mut separators = Vec::new();
        let mut separator_spans = Vec::new();
        loop {
            let edge = if self.is_kw("posedge") {
                self.bump();
                Some(Edge::Posedge)
            } else if self.is_kw("negedge") {
                self.bump();
                Some(Edge::Negedge)
            } else {
                None
            };
            let signal = self.parse_primary()?;
            items.push(SensItem { edge, signal });
            if self.is_kw("or") {
                separator_spans.push(self.bump());
                separators.push(SensSep::Or);
            } else if self.is_punct(",") {
                separator_spans.push(self.bump());
                separators.push(SensSep::Comma);
            } else {
                break;
            }
        }
        let close = self.expect_punct(")")?;
        Ok(EventControl::List {
            items,
            separators,
            separator_spans,
            span: at.join(close),
        })
    }

    fn parse_stmt(&mut self) -> Result<Stmt, ParseError> {
        let comments = self.comments_of(self.pos);
        let start = self.span();
        if self.is_punct(";") {
            self.bump();
            return Ok(Stmt {
                kind: StmtKind::Null,
                comments,
                span: start,
            });
        }
        if self.is_punct("#") {
            return Err(self.error("delay controls are not supported", &["statement"]));
        }
        if self.is_punct("{") {
            return self.parse_proc_assign(comments, start);
        }
        if self.peek_kind() == TokenKind::SystemIdent {
            return Err(self.error("system tasks are not supported", &["statement"]));
        }
        if self.peek_kind() != TokenKind::Ident && self.peek_kind() != TokenKind::EscapedIdent {
            return Err(self.error("expected a statement", &["begin", "if", "case", "identifier"]));
        }
        let kind = match self.text() {
            "begin" => {
                self.bump();
                let label = if self.is_punct(":") {
                    self.bump();
                    Some(self.ident()?)
                } else {
                    None
                };
                let mut decls = Vec::new();
                while self.is_kw("reg") || self.is_kw("wire") {
                    if label.is_none() {
                        return Err(self.error("declarations require a named block", &["statement"]));
                    }
                    let dcomments = self.comments_of(self.pos);
                    let dstart = self.span();
                    let d = self.parse_net_decl()?;
                    decls.push(Item {
                        kind: ItemKind::Net(d),
                        comments: dcomments,
                        span: Span::new(dstart.start, self.prev_end()),
                    });
                }
                let mut stmts = Vec::new();
                while !self.is_kw("end") {
                    if self.at_eof() {
                        return Err(self.error("unexpected end of input inside block", &["end"]));
                    }
                    stmts.push(self.parse_stmt()?);
                }
                let end_comments = self.comments_of(self.pos);
                let end_span = self.bump();
                if self.is_punct(":") {
                    return Err(self.error("end labels are not supported", &["statement"]));
                }
                StmtKind::Block(Block {
                    label,
                    decls,
                    stmts,
                    end_comments,
                    end_span,
                })
            }
            "if" => {
                self.bump();
                self.expect_punct("(")?;
                let cond = self.parse_expr()?;
                self.expect_punct(")")?;
                let then_branch = Box::new(self.parse_stmt()?);
                let else_branch = if self.is_kw("else") {
                    self.bump();
                    Some(Box::new(self.parse_stmt()?))
                } else {
                    None
                };
                StmtKind::If {
                    cond,
                    then_branch,
                    else_branch,
                }
            }
            "case" | "casez" | "casex" => {
                let kind = match self.text() {
                    "case" => CaseKind::Case,
                    "casez" => CaseKind::Casez,
                    _ => CaseKind::Casex,
                };
                self.bump();
                self.expect_punct("(")?;
                let subject = self.parse_expr()?;
                self.expect_punct(")")?;
                let mut items = Vec::new();
                while !self.is_kw("endcase") {
                    if self.at_eof() {
                        return Err(self.error("unexpected end of input inside case", &["endcase"]));
                    }
                    let icomments = self.comments_of(self.pos);
                    let istart = self.span();
                    let mut labels = Vec::new();
                    if self.is_kw("default") {
                        self.bump();
                        if self.is_punct(":") {
                            self.bump();
                        }
                    } else {
                        loop {
                            labels.push(self.parse_expr()?);
                            if self.is_punct(",") {
                                self.bump();
                            } else {
                                break;
                            }
                        }
                        self.expect_punct(":")?;
                    }
                    let body = self.parse_stmt()?;
                    items.push(CaseItem {
                        labels,
                        span: istart.join(body.span),
                        body,
                        comments: icomments,
                    });
                }
                let end_comments = self.comments_of(self.pos);
                let end_span = self.bump();
                StmtKind::Case(CaseStmt {
                    kind,
                    subject,
                    items,
                    end_comments,
                    end_span,
                })
            }
            "for" | "while" | "repeat" | "forever" | "fork" | "wait" | "disable" | "force" | "release" => {
                return Err(self.error("loop and process-control statements are not supported", &["statement"]))
            }
            t if is_keyword(t) => return Err(self.error("unexpected keyword", &["statement"])),
            _ => return self.parse_proc_assign(comments, start),
        };
        Ok(Stmt {
            kind,
            comments,
            span: Span::new(start.start, self.prev_end()),
        })
    }

    fn parse_proc_assign(&mut self, comments: Vec<Comment>, start: Span) -> Result<Stmt, ParseError> {
        let lhs = self.parse_lvalue()?;
        let blocking = if self.is_punct("=") {
            true
        } else if self.is_punct("<=") {
            false
        } else {
            return Err(self.error("expected an assignment operator", &["=", "<="]));
        };
        self.bump();
        if self.is_punct("#") {
            return Err(self.error("intra-assignment delays are not supported", &["expression"]));
        }
        let rhs = self.parse_expr()?;
        self.expect_punct(";")?;
        Ok(Stmt {
            kind: StmtKind::Assign(ProcAssign { lhs, rhs, blocking }),
            comments,
            span: Span::new(start.start, self.prev_end()),
        })
    }

    fn parse_lvalue(&mut self) -> Result<Expr, ParseError> {
        if self.is_punct("{") {
            let open = self.bump();
            let mut parts = Vec::new();
            loop {
                parts.push(self.parse_lvalue()?);
                if self.is_punct(",") {
                    self.bump();
                } else {
                    break;
                }
            }
            let close = self.expect_punct("}")?;
            return Ok(Expr::new(ExprKind::Concat(parts), open.join(close)));
        }
        let id = self.ident()?;
        let base = Expr::new(ExprKind::Ident(id.name), id.span);
        self.parse_select(base)
    }

    fn parse_select(&mut self, base: Expr) -> Result<Expr, ParseError> {
        if !self.is_punct("[") {
            return Ok(base);
        }
        self.bump();
        let first = self.parse_expr()?;
        let expr = if self.is_punct(":") {
            self.bump();
            let lsb = self.parse_expr()?;
            let close = self.expect_punct("]")?;
            Expr::new(
                ExprKind::PartSelect {
                    base: Box::new(base.clone()),
                    msb: Box::new(first),
                    lsb: Box::new(lsb),
                },
                base.span.join(close),
            )
        } else if self.is_punct("+:") || self.is_punct("-:") {
            return Err(self.error("indexed part-selects are not supported", &[":", "]"]));
        } else {
            let close = self.expect_punct("]")?;
            Expr::new(
                ExprKind::Index {
                    base: Box::new(base.clone()),
                    index: Box::new(first),
                },
                base.span.join(close),
            )
        };
        if self.is_punct("[") {
            return Err(self.error("multi-dimensional selects are not supported", &["operator"]));
        }
        Ok(expr)
    }

    pub fn parse_expr(&mut self) -> Result<Expr, ParseError> {
        let cond = self.parse_binary(0)?;
        if self.is_punct("?") {
            self.bump();
            let then_expr = self.parse_expr()?;
            self.expect_punct(":")?;
            let else_expr = self.parse_expr()?;
            let span = cond.span.join(else_expr.span);
            return Ok(Expr::new(
                ExprKind::Ternary {
                    cond: Box::new(cond),
                    then_expr: Box::new(then_expr),
                    else_expr: Box::new(else_expr),
                },
                span,
            ));
        }
        Ok(cond)
    }

    fn peek_binop(&self) -> Option<BinaryOp> {
        if self.peek_kind() != TokenKind::Punct {
            return None;
        }
        Some(match self.text() {
            "**" => BinaryOp::Pow,
            "*" => BinaryOp::Mul,
            "/" => BinaryOp::Div,
            "%" => BinaryOp::Mod,
            "+" => BinaryOp::Add,
            "-" => BinaryOp::Sub,
            "<<" => BinaryOp::Shl,
            ">>" => BinaryOp::Shr,
            "<<<" => BinaryOp::AShl,
            ">>>" => BinaryOp::AShr,
            "<" => BinaryOp::Lt,
            "<=" => BinaryOp::Le,
            ">" => BinaryOp::Gt,
            ">=" => BinaryOp::Ge,
            "==" => BinaryOp::Eq,
            "!=" => BinaryOp::Ne,
            "===" => BinaryOp::CaseEq,
            "!==" => BinaryOp::CaseNe,
            "&" => BinaryOp::BitAnd,
            "^" => BinaryOp::BitXor,
            "~^" | "^~" => BinaryOp::BitXnor,
            "|" => BinaryOp::BitOr,
            "&&" => BinaryOp::LogAnd,
            "||" => BinaryOp::LogOr,
            _ => return None,
        })
    }

    fn parse_binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_unary()?;
        while let Some(op) = self.peek_binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            let op_span = self.bump();
            // `**` is right-associative, everything else left.
            let next = if op == BinaryOp::Pow { prec } else { prec + 1 };
            let rhs = self.parse_binary(next)?;
            let span = lhs.span.join(rhs.span);
            lhs = Expr::new(
                ExprKind::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                    op_span,
                },
                span,
            );
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek_kind() == TokenKind::Punct {
            let op = match self.text() {
                "+" => Some(UnaryOp::Plus),
                "-" => Some(UnaryOp::Minus),
                "!" => Some(UnaryOp::LogicalNot),
                "~" => Some(UnaryOp::BitNot),
                "&" => Some(UnaryOp::RedAnd),
                "~&" => Some(UnaryOp::RedNand),
                "|" => Some(UnaryOp::RedOr),
                "~|" => Some(UnaryOp::RedNor),
                "^" => Some(UnaryOp::RedXor),
                "~^" | "^~" => Some(UnaryOp::RedXnor),
                _ => None,
            };
            if let Some(op) = op {
                let start = self.bump();
                let operand = self.parse_unary()?;
                let span = start.join(operand.span);
                return Ok(Expr::new(
                    ExprKind::Unary {
                        op,
                        operand: Box::new(operand),
                    },
                    span,
                ));
            }
        }
        self.parse_primary()
    }

    fn parse_primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek_kind() {
            TokenKind::Number => {
                let text = self.text();
                let span = self.span();
                let lit = NumberLiteral::parse(text)
                    .map_err(|e| ParseError::at(self.src, span.start, &e.0, &["number"]))?;
                self.bump();
                Ok(Expr::new(ExprKind::Number(lit), span))
            }
            TokenKind::Ident | TokenKind::EscapedIdent => {
                let id = self.ident()?;
                if self.is_punct("(") {
                    return Err(self.error("function calls are not supported", &["operator"]));
                }
                let base = Expr::new(ExprKind::Ident(id.name), id.span);
                self.parse_select(base)
            }
            TokenKind::SystemIdent => Err(self.error("system functions are not supported", &["expression"])),
            TokenKind::Str => Err(self.error("string literals are not supported", &["expression"])),
            TokenKind::Punct if self.is_punct("(") => {
                let open = self.bump();
                let inner = self.parse_expr()?;
                let close = self.expect_punct(")")?;
                Ok(Expr::new(ExprKind::Paren(Box::new(inner)), open.join(close)))
            }
            TokenKind::Punct if self.is_punct("{") => {
                let open = self.bump();
                let first = self.parse_expr()?;
                if self.is_punct("{") {
                    self.bump();
                    let mut parts = Vec::new();
                    loop {
                        parts.push(self.parse_expr()?);
                        if self.is_punct(",") {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    self.expect_punct("}")?;
                    let close = self.expect_punct("}")?;
                    return Ok(Expr::new(
                        ExprKind::Replicate {
                            count: Box::new(first),
                            parts,
                        },
                        open.join(close),
                    ));
                }
                let mut parts = vec![first];
                while self.is_punct(",") {
                    self.bump();
                    parts.push(self.parse_expr()?);
                }
                let close = self.expect_punct("}")?;
                Ok(Expr::new(ExprKind::Concat(parts), open.join(close)))
            }
            _ => Err(self.error("expected an expression", &["identifier", "number", "(", "{"])),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verilog::number::Base;

    fn parse_str(s: &str) -> Result<Ast, ParseError> {
        parse(&SourceText::new(s, "test.v"))
    }

    #[test]
    fn minimal_module() {
        let ast = parse_str("module m(input a, output b); assign b = ~a; endmodule").unwrap();
        assert_eq!(ast.modules.len(), 1);
        let m = &ast.modules[0];
        assert_eq!(m.ports.len(), 2);
        assert_eq!(m.items.len(), 1);
        assert!(matches!(&m.items[0].kind, ItemKind::Assign(list) if list.len() == 1));
    }

    #[test]
    fn sensitivity_with_or() {
        let ast = parse_str(
            "module m(input clk1, input clk2, output reg q); always @(posedge clk1 or negedge clk2) q <= 1'b1; endmodule",
        )
        .unwrap();
        let ItemKind::Always(a) = &ast.modules[0].items[0].kind else {
            panic!("expected always")
        };
        let EventControl::List { items, separators, .. } = &a.sens else {
            panic!("expected list")
        };
        assert_eq!(items.len(), 2);
        assert_eq!(items[0].edge, Some(Edge::Posedge));
        assert_eq!(items[0].signal.as_ident(), Some("clk1"));
        assert_eq!(items[1].edge, Some(Edge::Negedge));
        assert_eq!(items[1].signal.as_ident(), Some("clk2"));
        assert_eq!(separators, &vec![SensSep::Or]);
        assert_eq!(a.sens.separator_style(), SeparatorStyle::OrKeyword);
    }

    #[test]
    fn localparam_literals() {
        let ast = parse_str("module m(input a); localparam RUN = 2'b10, STOP = 2'b11; endmodule").unwrap();
        let ItemKind::Param(p) = &ast.modules[0].items[0].kind else {
            panic!("expected param")
        };
        assert!(p.local);
        assert_eq!(p.assigns.len(), 2);
        let run = p.assigns[0].value.as_number().unwrap();
        assert_eq!((run.width, run.base, run.value_u128()), (Some(2), Some(Base::Binary), Some(2)));
        let stop = p.assigns[1].value.as_number().unwrap();
        assert_eq!((stop.width, stop.base, stop.value_u128()), (Some(2), Some(Base::Binary), Some(3)));
    }

    #[test]
    fn precedence_and_ternary() {
        let e = parse_expr("a | b & c ? d : e + f * g").unwrap();
        let ExprKind::Ternary { cond, else_expr, .. } = &e.kind else {
            panic!("ternary")
        };
        assert!(matches!(cond.kind, ExprKind::Binary { op: BinaryOp::BitOr, .. }));
        assert!(matches!(else_expr.kind, ExprKind::Binary { op: BinaryOp::Add, .. }));
    }

    #[test]
    fn comments_attach_to_following_item() {
        let ast = parse_str("module m(input a);\n// the wire\nwire w;\nendmodule").unwrap();
        assert_eq!(ast.modules[0].items[0].comments[0].text, "// the wire");
    }

    #[test]
    fn rejects_generate_with_position() {
        let err = parse_str("module m(input a);\n  generate\n  endgenerate\nendmodule").unwrap_err();
        assert_eq!((err.line, err.col), (2, 3));
        assert!(err.message.contains("generate"));
    }

    #[test]
    fn rejects_preprocessor() {
        assert!(parse_str("`define W 8\nmodule m(input a); endmodule").is_err());
    }

    #[test]
    fn rejects_non_ansi_ports() {
        let err = parse_str("module m(a, b); input a; output b; endmodule").unwrap_err();
        assert!(err.expected.iter().any(|e| e == "input"));
    }

    #[test]
    fn instance_with_params() {
        let ast = parse_str(
            "module top(input a, output y); sub #(.W(4)) u0 (.x(a), .y(y)); endmodule",
        )
        .unwrap();
        let ItemKind::Instance(inst) = &ast.modules[0].items[0].kind else {
            panic!("instance")
        };
        assert_eq!(inst.module.name, "sub");
        assert_eq!(inst.params.len(), 1);
        assert_eq!(inst.instances[0].connections.len(), 2);
    }

    #[test]
    fn star_sensitivity_forms() {
        for src in ["always @* y = a;", "always @(*) y = a;", "always @( * ) y = a;"] {
            let text = format!("module m(input a, output reg y); {src} endmodule");
            let ast = parse_str(&text).unwrap();
            let ItemKind::Always(a) = &ast.modules[0].items[0].kind else {
                panic!("always")
            };
            assert!(matches!(a.sens, EventControl::Star { .. }), "{src}");
        }
    }
}
