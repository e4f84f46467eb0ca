//! Recursive-descent parser producing [`SourceUnit`]s with source spans.

use super::ast::*;
use super::lexer::{tokenize, Token, TokenKind};
use super::span::Span;
use super::SyntaxError;

const UNITS: &[&str] = &[
    "wei", "gwei", "szabo", "finney", "ether", "seconds", "minutes", "hours", "days", "weeks", "years",
];

const STATEMENT_KEYWORDS: &[&str] = &[
    "if", "while", "for", "do", "return", "break", "continue", "throw", "emit", "assembly", "else",
    "new", "delete", "true", "false", "this", "msg", "tx", "block", "now",
];

const DATA_LOCATIONS: &[&str] = &["memory", "storage", "calldata"];

pub fn is_elementary_type(s: &str) -> bool {
    if matches!(s, "address" | "bool" | "string" | "bytes" | "byte" | "var" | "fixed" | "ufixed") {
        return true;
    }
    for prefix in ["uint", "int", "bytes"] {
        if let Some(rest) = s.strip_prefix(prefix) {
            if !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()) {
                return true;
            }
            if rest.is_empty() {
                return true;
            }
        }
    }
    false
}

/// Parse one source file. Statement-level constructs the grammar cannot classify become
/// [`StmtKind::Opaque`] statements and are listed in `diagnostics`; anything else that
/// fails to parse is a [`SyntaxError`].
pub fn parse_source(text: &str, path: &str) -> Result<SourceUnit, SyntaxError> {
    let tokens: Vec<Token> = tokenize(text, path)?
        .into_iter()
        .filter(|t| t.kind != TokenKind::Comment)
        .collect();
    let mut p = Parser { toks: tokens, pos: 0, path: path.to_string(), src: text, diagnostics: Vec::new() };
    let mut unit = p.source_unit()?;
    resolve(&mut unit);
    Ok(unit)
}

fn resolve(unit: &mut SourceUnit) {
    let declared: Vec<String> =
        unit.contracts.iter().flat_map(|c| c.modifiers.iter().map(|m| m.name.clone())).collect();
    for c in &mut unit.contracts {
        let cname = c.name.clone();
        for f in &mut c.functions {
            if f.kind == FunctionKind::Function && f.name == cname {
                f.kind = FunctionKind::Constructor;
                f.name.clear();
            }
            for m in &mut f.modifiers {
                m.resolved = declared.contains(&m.name);
            }
        }
    }
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    path: String,
    src: &'a str,
    diagnostics: Vec<Diagnostic>,
}

type PResult<T> = Result<T, SyntaxError>;

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, n: usize) -> &Token {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i]
    }

    fn at(&self, text: &str) -> bool {
        self.peek().is(text)
    }

    fn at_eof(&self) -> bool {
        self.peek().kind == TokenKind::Eof
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, text: &str) -> bool {
        if self.at(text) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn error(&self, message: &str, expected: &[&str]) -> SyntaxError {
        let t = self.peek();
        let found = if t.kind == TokenKind::Eof { "end of file".to_string() } else { format!("'{}'", t.text) };
        SyntaxError::new(
            &self.path,
            t.span.line,
            t.span.column,
            &format!("{}, found {}", message, found),
            expected.iter().map(|s| s.to_string()).collect(),
        )
    }

    fn expect(&mut self, text: &str) -> PResult<Token> {
        if self.at(text) {
            Ok(self.bump())
        } else {
            Err(self.error(&format!("expected '{}'", text), &[text]))
        }
    }

    fn ident(&mut self) -> PResult<Token> {
        if self.peek().kind == TokenKind::Ident {
            Ok(self.bump())
        } else {
            Err(self.error("expected identifier", &["identifier"]))
        }
    }

    fn diag(&mut self, span: Span, message: String) {
        self.diagnostics.push(Diagnostic { path: self.path.clone(), span, message });
    }

    /// Skip a balanced token run up to and including the next `;` or closing `}` of a `{}` group.
    fn skip_item(&mut self) -> PResult<Span> {
        let start = self.peek().span;
        let mut depth = 0i32;
        loop {
            if self.at_eof() {
                return Err(self.error("unexpected end of file", &[";", "}"]));
            }
            let t = self.bump();
            match t.text.as_str() {
                "(" | "[" | "{" if t.kind == TokenKind::Punct => depth += 1,
                ")" | "]" | "}" if t.kind == TokenKind::Punct => {
                    depth -= 1;
                    if depth == 0 && t.text == "}" {
                        return Ok(start.join(t.span));
                    }
                }
                ";" if depth == 0 => return Ok(start.join(t.span)),
                _ => {}
            }
        }
    }

    fn source_unit(&mut self) -> PResult<SourceUnit> {
        let mut pragma = None;
        let mut contracts = Vec::new();
        while !self.at_eof() {
            if self.at("pragma") {
                let start = self.bump().span;
                while !self.at(";") && !self.at_eof() {
                    self.bump();
                }
                let end = self.expect(";")?.span;
                let text = self.src[start.start..end.end].to_string();
                if pragma.is_none() {
                    pragma = Some(text);
                }
            } else if self.at("import") {
                self.skip_item()?;
            } else if self.at("contract") || self.at("interface") || self.at("library") || self.at("abstract") {
                contracts.push(self.contract()?);
            } else if self.at("struct") || self.at("enum") || self.at("function") || self.at("using") {
                let span = self.skip_item()?;
                self.diag(span, "file-level declaration ignored".into());
            } else {
                return Err(self.error("expected contract, interface, library, pragma or import", &[
                    "contract", "interface", "library", "pragma", "import",
                ]));
            }
        }
        Ok(SourceUnit { path: self.path.clone(), pragma, contracts, diagnostics: std::mem::take(&mut self.diagnostics) })
    }

    fn contract(&mut self) -> PResult<ContractDef> {
        self.eat("abstract");
        let kw = self.bump();
        let kind = match kw.text.as_str() {
            "interface" => ContractKind::Interface,
            "library" => ContractKind::Library,
            _ => ContractKind::Contract,
        };
        let name = self.ident()?.text;
        let mut bases = Vec::new();
        if self.eat("is") {
            loop {
                let mut base = self.ident()?.text;
                while self.eat(".") {
                    base.push('.');
                    base.push_str(&self.ident()?.text);
                }
                if self.at("(") {
                    self.call_args()?;
                }
                bases.push(base);
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect("{")?;
        let mut c = ContractDef {
            kind,
            name,
            bases,
            state_vars: Vec::new(),
            functions: Vec::new(),
            modifiers: Vec::new(),
            structs: Vec::new(),
            enums: Vec::new(),
            events: Vec::new(),
            span: kw.span,
        };
        while !self.at("}") {
            if self.at_eof() {
                return Err(self.error("unexpected end of file in contract body", &["}"]));
            }
            self.contract_item(&mut c)?;
        }
        let end = self.bump().span;
        c.span = kw.span.join(end);
        Ok(c)
    }

    fn contract_item(&mut self, c: &mut ContractDef) -> PResult<()> {
        let t = self.peek().clone();
        match t.text.as_str() {
            "function" | "constructor" | "fallback" | "receive" if t.kind == TokenKind::Ident => {
                let f = self.function()?;
                c.functions.push(f);
            }
            "modifier" => {
                let m = self.modifier_def()?;
                c.modifiers.push(m);
            }
            "event" => {
                self.bump();
                let name = self.ident()?.text;
                self.skip_item()?;
                c.events.push(name);
            }
            "struct" => {
                self.bump();
                let name = self.ident()?.text;
                self.expect("{")?;
                let mut fields = Vec::new();
                while !self.eat("}") {
                    let ty = self.type_name()?;
                    let n = self.ident()?;
                    self.expect(";")?;
                    fields.push(Param { span: ty.span.join(n.span), ty, name: Some(n.text) });
                }
                c.structs.push(StructDef { name, fields, span: t.span.join(self.prev_span()) });
            }
            "enum" => {
                self.bump();
                let name = self.ident()?.text;
                self.expect("{")?;
                let mut values = Vec::new();
                while !self.at("}") {
                    values.push(self.ident()?.text);
                    if !self.eat(",") {
                        break;
                    }
                }
                self.expect("}")?;
                c.enums.push(EnumDef { name, values, span: t.span.join(self.prev_span()) });
            }
            "using" => {
                self.skip_item()?;
            }
            "error" => {
                let span = self.skip_item()?;
                self.diag(span, "error declaration ignored".into());
            }
            _ => {
                let v = self.state_var()?;
                c.state_vars.push(v);
            }
        }
        Ok(())
    }

    fn state_var(&mut self) -> PResult<StateVarDecl> {
        let ty = self.type_name()?;
        let mut visibility = Visibility::Default;
        let mut constant = false;
        loop {
            let t = self.peek().text.clone();
            match t.as_str() {
                "public" => visibility = Visibility::Public,
                "private" => visibility = Visibility::Private,
                "internal" => visibility = Visibility::Internal,
                "external" => visibility = Visibility::External,
                "constant" | "immutable" => constant = true,
                "override" => {}
                _ => break,
            }
            self.bump();
        }
        let name = self.ident()?.text;
        let init = if self.eat("=") { Some(self.expr()?) } else { None };
        let end = self.expect(";")?.span;
        Ok(StateVarDecl { span: ty.span.join(end), ty, name, visibility, constant, init })
    }

    fn param_list(&mut self) -> PResult<Vec<Param>> {
        self.expect("(")?;
        let mut params = Vec::new();
        while !self.at(")") {
            let ty = self.type_name()?;
            let mut span = ty.span;
            while DATA_LOCATIONS.iter().any(|l| self.at(l)) || self.at("indexed") || self.at("payable") {
                self.bump();
            }
            let name = if self.peek().kind == TokenKind::Ident {
                let n = self.bump();
                span = span.join(n.span);
                Some(n.text)
            } else {
                None
            };
            params.push(Param { ty, name, span });
            if !self.eat(",") {
                break;
            }
        }
        self.expect(")")?;
        Ok(params)
    }

    fn function(&mut self) -> PResult<FunctionDef> {
        let kw = self.bump();
        let (kind, name) = match kw.text.as_str() {
            "constructor" => (FunctionKind::Constructor, String::new()),
            "fallback" => (FunctionKind::Fallback, String::new()),
            "receive" => (FunctionKind::Receive, String::new()),
            _ => {
                if self.peek().kind == TokenKind::Ident {
                    (FunctionKind::Function, self.bump().text)
                } else {
                    (FunctionKind::Fallback, String::new())
                }
            }
        };
        let params = self.param_list()?;
        let mut returns = Vec::new();
        let mut visibility = Visibility::Default;
        let mut mutability = Mutability::NonPayable;
        let mut modifiers = Vec::new();
        loop {
            let t = self.peek().clone();
            if t.kind != TokenKind::Ident {
                break;
            }
            match t.text.as_str() {
                "public" => visibility = Visibility::Public,
                "external" => visibility = Visibility::External,
                "internal" => visibility = Visibility::Internal,
                "private" => visibility = Visibility::Private,
                "pure" => mutability = Mutability::Pure,
                "view" => mutability = Mutability::View,
                "constant" => mutability = Mutability::Constant,
                "payable" => mutability = Mutability::Payable,
                "virtual" => {}
                "override" => {
                    self.bump();
                    if self.at("(") {
                        self.skip_parens()?;
                    }
                    continue;
                }
                "returns" => {
                    self.bump();
                    returns = self.param_list()?;
                    continue;
                }
                _ => {
                    self.bump();
                    let mut name = t.text.clone();
                    while self.eat(".") {
                        name.push('.');
                        name.push_str(&self.ident()?.text);
                    }
                    let args = if self.at("(") { self.call_args()? } else { Vec::new() };
                    modifiers.push(ModifierInvocation {
                        name,
                        args,
                        resolved: false,
                        span: t.span.join(self.prev_span()),
                    });
                    continue;
                }
            }
            self.bump();
        }
        let body = if self.eat(";") { None } else { Some(self.block()?) };
        Ok(FunctionDef {
            kind,
            name,
            params,
            returns,
            visibility,
            mutability,
            modifiers,
            body,
            span: kw.span.join(self.prev_span()),
        })
    }

    fn skip_parens(&mut self) -> PResult<()> {
        self.expect("(")?;
        let mut depth = 1;
        while depth > 0 {
            if self.at_eof() {
                return Err(self.error("unbalanced parentheses", &[")"]));
            }
            let t = self.bump();
            if t.is("(") {
                depth += 1;
            } else if t.is(")") {
                depth -= 1;
            }
        }
        Ok(())
    }

    fn modifier_def(&mut self) -> PResult<ModifierDef> {
        let kw = self.bump();
        let name = self.ident()?.text;
        let params = if self.at("(") { self.param_list()? } else { Vec::new() };
        while self.at("virtual") || self.at("override") {
            self.bump();
        }
        let body = self.block()?;
        Ok(ModifierDef { name, params, span: kw.span.join(body.span), body })
    }

    fn type_name(&mut self) -> PResult<TypeName> {
        let start = self.peek().span;
        let mut text = if self.at("mapping") {
            self.bump();
            self.expect("(")?;
            let k = self.type_name()?;
            self.expect("=>")?;
            let v = self.type_name()?;
            self.expect(")")?;
            format!("mapping({}=>{})", k.text, v.text)
        } else if self.at("function") {
            return Err(self.error("function types are not supported", &["type name"]));
        } else {
            let mut s = self.ident()?.text;
            if s == "address" && self.at("payable") {
                self.bump();
            }
            while self.at(".") && self.peek_at(1).kind == TokenKind::Ident {
                self.bump();
                s.push('.');
                s.push_str(&self.bump().text);
            }
            s
        };
        while self.at("[") {
            self.bump();
            text.push('[');
            if !self.at("]") {
                let e = self.expr()?;
                text.push_str(e.span.slice(self.src));
            }
            self.expect("]")?;
            text.push(']');
        }
        Ok(TypeName { text, span: start.join(self.prev_span()) })
    }

    fn block(&mut self) -> PResult<Block> {
        let open = self.expect("{")?.span;
        let mut stmts = Vec::new();
        while !self.at("}") {
            if self.at_eof() {
                return Err(self.error("unexpected end of file in block", &["}"]));
            }
            stmts.push(self.statement_recovering()?);
        }
        let close = self.bump().span;
        Ok(Block { stmts, span: open.join(close) })
    }

    /// Parse a statement; on failure fall back to an opaque statement spanning up to the
    /// next top-level `;` when the tokens in between are balanced.
    fn statement_recovering(&mut self) -> PResult<Stmt> {
        let start = self.pos;
        match self.statement() {
            Ok(s) => Ok(s),
            Err(err) => {
                self.pos = start;
                let mut depth = 0i32;
                loop {
                    let t = self.peek().clone();
                    if t.kind == TokenKind::Eof {
                        return Err(err);
                    }
                    if t.kind == TokenKind::Punct {
                        match t.text.as_str() {
                            "(" | "[" | "{" => depth += 1,
                            ")" | "]" | "}" => {
                                if depth == 0 {
                                    return Err(err);
                                }
                                depth -= 1;
                            }
                            ";" if depth == 0 => break,
                            _ => {}
                        }
                    }
                    self.bump();
                }
                let end = self.bump().span;
                let span = self.toks[start].span.join(end);
                self.diag(span, format!("unrecognized statement kept opaque ({})", err.message));
                Ok(Stmt { kind: StmtKind::Opaque(span.slice(self.src).to_string()), span })
            }
        }
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let start = self.peek().span;
        let t = self.peek().clone();
        let kind = if t.is("{") {
            StmtKind::Block(self.block()?)
        } else if t.kind == TokenKind::Ident {
            match t.text.as_str() {
                "if" => {
                    self.bump();
                    self.expect("(")?;
                    let cond = self.expr()?;
                    self.expect(")")?;
                    let then = Box::new(self.statement()?);
                    let els = if self.eat("else") { Some(Box::new(self.statement()?)) } else { None };
                    StmtKind::If { cond, then, els }
                }
                "while" => {
                    self.bump();
                    self.expect("(")?;
                    let cond = self.expr()?;
                    self.expect(")")?;
                    StmtKind::While { cond, body: Box::new(self.statement()?) }
                }
                "do" => {
                    self.bump();
                    let body = Box::new(self.statement()?);
                    self.expect("while")?;
                    self.expect("(")?;
                    let cond = self.expr()?;
                    self.expect(")")?;
                    self.expect(";")?;
                    StmtKind::DoWhile { body, cond }
                }
                "for" => {
                    self.bump();
                    self.expect("(")?;
                    let init = if self.eat(";") { None } else { Some(Box::new(self.simple_statement()?)) };
                    let cond = if self.at(";") { None } else { Some(self.expr()?) };
                    self.expect(";")?;
                    let update = if self.at(")") { None } else { Some(self.expr()?) };
                    self.expect(")")?;
                    StmtKind::For { init, cond, update, body: Box::new(self.statement()?) }
                }
                "return" => {
                    self.bump();
                    let e = if self.at(";") { None } else { Some(self.expr()?) };
                    self.expect(";")?;
                    StmtKind::Return(e)
                }
                "break" | "continue" | "throw" => {
                    self.bump();
                    self.expect(";")?;
                    match t.text.as_str() {
                        "break" => StmtKind::Break,
                        "continue" => StmtKind::Continue,
                        _ => StmtKind::Throw,
                    }
                }
                "emit" => {
                    self.bump();
                    let e = self.expr()?;
                    self.expect(";")?;
                    StmtKind::Emit(e)
                }
                "_" if self.peek_at(1).is(";") => {
                    self.bump();
                    self.bump();
                    StmtKind::Placeholder
                }
                "unchecked" if self.peek_at(1).is("{") => {
                    self.bump();
                    StmtKind::Block(self.block()?)
                }
                "assembly" => {
                    self.bump();
                    while !self.at("{") && !self.at_eof() {
                        self.bump();
                    }
                    let span = self.skip_item()?;
                    let span = start.join(span);
                    self.diag(span, "inline assembly kept opaque".into());
                    StmtKind::Opaque(span.slice(self.src).to_string())
                }
                _ => return self.simple_statement(),
            }
        } else {
            return self.simple_statement();
        };
        Ok(Stmt { kind, span: start.join(self.prev_span()) })
    }

    /// Variable declaration or expression statement, including the trailing `;`.
    fn simple_statement(&mut self) -> PResult<Stmt> {
        let start = self.peek().span;
        if let Some(vars) = self.try_var_decl_head() {
            let init = if self.eat("=") { Some(self.expr()?) } else { None };
            self.expect(";")?;
            return Ok(Stmt { kind: StmtKind::VarDecl { vars, init }, span: start.join(self.prev_span()) });
        }
        let e = self.expr()?;
        self.expect(";")?;
        let span = start.join(self.prev_span());
        let kind = match e.kind {
            ExprKind::Call { callee, args } => match &callee.kind {
                ExprKind::Ident(n) if n == "require" => StmtKind::Require { args },
                ExprKind::Ident(n) if n == "assert" && args.len() == 1 => {
                    StmtKind::Assert { cond: args.into_iter().next().unwrap() }
                }
                ExprKind::Ident(n) if n == "revert" => StmtKind::Revert { args },
                _ => StmtKind::Expr(Expr { kind: ExprKind::Call { callee, args }, span: e.span }),
            },
            kind => StmtKind::Expr(Expr { kind, span: e.span }),
        };
        Ok(Stmt { kind, span })
    }

    /// Speculatively parse `Type [location] name` or `(Type a, , Type b)` / `var (a, b)`.
    /// Restores the position and returns `None` when the tokens do not form a declaration.
    fn try_var_decl_head(&mut self) -> Option<Vec<Option<LocalVar>>> {
        let save = self.pos;
        let diag_len = self.diagnostics.len();
        let result = self.var_decl_head();
        match result {
            Some(v) => Some(v),
            None => {
                self.pos = save;
                self.diagnostics.truncate(diag_len);
                None
            }
        }
    }

    fn var_decl_head(&mut self) -> Option<Vec<Option<LocalVar>>> {
        if self.at("var") && self.peek_at(1).is("(") {
            self.bump();
            self.bump();
            let mut vars = Vec::new();
            loop {
                if self.at(",") || self.at(")") {
                    vars.push(None);
                } else {
                    let n = self.ident().ok()?;
                    let ty = TypeName { text: "var".into(), span: n.span };
                    vars.push(Some(LocalVar { ty, name: n.text, span: n.span }));
                }
                if !self.eat(",") {
                    break;
                }
            }
            self.eat(")").then_some(())?;
            return self.at("=").then_some(vars);
        }
        if self.at("(") {
            self.bump();
            let mut vars = Vec::new();
            loop {
                if self.at(",") || self.at(")") {
                    vars.push(None);
                } else {
                    vars.push(Some(self.single_var()?));
                }
                if !self.eat(",") {
                    break;
                }
            }
            self.eat(")").then_some(())?;
            let any = vars.iter().any(|v| v.is_some());
            return (any && self.at("=")).then_some(vars);
        }
        let v = self.single_var()?;
        (self.at("=") || self.at(";")).then_some(vec![Some(v)])
    }

    fn single_var(&mut self) -> Option<LocalVar> {
        let first = self.peek();
        if first.kind != TokenKind::Ident || STATEMENT_KEYWORDS.contains(&first.text.as_str()) {
            return None;
        }
        let ty = self.type_name().ok()?;
        while DATA_LOCATIONS.iter().any(|l| self.at(l)) {
            self.bump();
        }
        let n = self.peek().clone();
        if n.kind != TokenKind::Ident || STATEMENT_KEYWORDS.contains(&n.text.as_str()) {
            return None;
        }
        self.bump();
        Some(LocalVar { span: ty.span.join(n.span), ty, name: n.text })
    }

    fn call_args(&mut self) -> PResult<Vec<Expr>> {
        self.expect("(")?;
        let mut args = Vec::new();
        if self.at("{") {
            // named arguments: f({a: 1, b: 2})
            self.bump();
            while !self.at("}") {
                self.ident()?;
                self.expect(":")?;
                args.push(self.expr()?);
                if !self.eat(",") {
                    break;
                }
            }
            self.expect("}")?;
        } else {
            while !self.at(")") {
                args.push(self.expr()?);
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect(")")?;
        Ok(args)
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        let lhs = self.conditional()?;
        const ASSIGN_OPS: &[&str] =
            &["=", "+=", "-=", "*=", "/=", "%=", "|=", "&=", "^=", "<<=", ">>=", ">>>="];
        let t = self.peek().clone();
        if t.kind == TokenKind::Punct && ASSIGN_OPS.contains(&t.text.as_str()) {
            self.bump();
            let rhs = self.expr()?;
            let span = lhs.span.join(rhs.span);
            return Ok(Expr { kind: ExprKind::Assign { op: t.text, lhs: Box::new(lhs), rhs: Box::new(rhs) }, span });
        }
        Ok(lhs)
    }

    fn conditional(&mut self) -> PResult<Expr> {
        let cond = self.binary(0)?;
        if self.eat("?") {
            let then = self.expr()?;
            self.expect(":")?;
            let els = self.expr()?;
            let span = cond.span.join(els.span);
            return Ok(Expr {
                kind: ExprKind::Conditional { cond: Box::new(cond), then: Box::new(then), els: Box::new(els) },
                span,
            });
        }
        Ok(cond)
    }

    fn binary(&mut self, level: usize) -> PResult<Expr> {
        const LEVELS: &[&[&str]] = &[
            &["||"],
            &["&&"],
            &["==", "!="],
            &["<", ">", "<=", ">="],
            &["|"],
            &["^"],
            &["&"],
            &["<<", ">>", ">>>"],
            &["+", "-"],
            &["*", "/", "%"],
            &["**"],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        loop {
            let t = self.peek().clone();
            if t.kind == TokenKind::Punct && LEVELS[level].contains(&t.text.as_str()) {
                self.bump();
                let rhs = self.binary(level + 1)?;
                let span = lhs.span.join(rhs.span);
                lhs = Expr { kind: ExprKind::Binary { op: t.text, lhs: Box::new(lhs), rhs: Box::new(rhs) }, span };
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        let t = self.peek().clone();
        let is_op = (t.kind == TokenKind::Punct && ["!", "~", "-", "+", "++", "--"].contains(&t.text.as_str()))
            || t.is("delete");
        if is_op {
            self.bump();
            let operand = self.unary()?;
            let span = t.span.join(operand.span);
            return Ok(Expr { kind: ExprKind::Unary { op: t.text, prefix: true, operand: Box::new(operand) }, span });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            if self.at(".") {
                self.bump();
                let m = self.ident()?;
                let span = e.span.join(m.span);
                e = classify(Expr { kind: ExprKind::Member { base: Box::new(e), member: m.text }, span });
            } else if self.at("[") {
                self.bump();
                let index = if self.at("]") { None } else { Some(Box::new(self.expr()?)) };
                let end = self.expect("]")?.span;
                let span = e.span.join(end);
                e = Expr { kind: ExprKind::Index { base: Box::new(e), index }, span };
            } else if self.at("(") {
                let args = self.call_args()?;
                let span = e.span.join(self.prev_span());
                e = classify(Expr { kind: ExprKind::Call { callee: Box::new(e), args }, span });
            } else if self.at("{") && matches!(e.kind, ExprKind::Member { .. }) && self.peek_at(2).is(":") {
                // call options: target.call{value: v, gas: g}(args)
                self.bump();
                let mut value = None;
                while !self.at("}") {
                    let key = self.ident()?.text;
                    self.expect(":")?;
                    let v = self.expr()?;
                    if key == "value" {
                        value = Some(v);
                    }
                    if !self.eat(",") {
                        break;
                    }
                }
                self.expect("}")?;
                let args = self.call_args()?;
                let span = e.span.join(self.prev_span());
                e = match value {
                    Some(v) => Expr { kind: ExprKind::ValueCall { callee: Box::new(e), value: Box::new(v), args }, span },
                    None => classify(Expr { kind: ExprKind::Call { callee: Box::new(e), args }, span }),
                };
            } else if self.at("++") || self.at("--") {
                let t = self.bump();
                let span = e.span.join(t.span);
                e = Expr { kind: ExprKind::Unary { op: t.text, prefix: false, operand: Box::new(e) }, span };
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let t = self.peek().clone();
        match t.kind {
            TokenKind::Number => {
                self.bump();
                let mut span = t.span;
                let is_address = {
                    let s = t.text.to_ascii_lowercase();
                    s.starts_with("0x") && s.len() == 42
                };
                if UNITS.contains(&self.peek().text.as_str()) && self.peek().kind == TokenKind::Ident {
                    span = span.join(self.bump().span);
                }
                let kind = if is_address { LitKind::Address } else { LitKind::Number };
                Ok(Expr { kind: ExprKind::Literal(kind, span.slice(self.src).to_string()), span })
            }
            TokenKind::Str => {
                self.bump();
                Ok(Expr { kind: ExprKind::Literal(LitKind::Str, t.text), span: t.span })
            }
            TokenKind::HexStr => {
                self.bump();
                Ok(Expr { kind: ExprKind::Literal(LitKind::HexStr, t.text), span: t.span })
            }
            TokenKind::Ident => {
                self.bump();
                let kind = match t.text.as_str() {
                    "true" | "false" => ExprKind::Literal(LitKind::Bool, t.text.clone()),
                    "new" => {
                        let ty = self.type_name()?;
                        let span = t.span.join(ty.span);
                        return Ok(Expr { kind: ExprKind::New(ty), span });
                    }
                    "payable" if self.at("(") => ExprKind::ElementaryType("address".into()),
                    s if is_elementary_type(s) && s != "var" => {
                        let mut text = t.text.clone();
                        let mut span = t.span;
                        if s == "address" && self.at("payable") {
                            span = span.join(self.bump().span);
                        }
                        while self.at("[") && self.peek_at(1).is("]") {
                            self.bump();
                            span = span.join(self.bump().span);
                            text.push_str("[]");
                        }
                        return Ok(Expr { kind: ExprKind::ElementaryType(text), span });
                    }
                    _ => ExprKind::Ident(t.text.clone()),
                };
                Ok(Expr { kind, span: t.span })
            }
            TokenKind::Punct if t.text == "(" => {
                self.bump();
                let mut elems = Vec::new();
                loop {
                    if self.at(",") || self.at(")") {
                        elems.push(None);
                    } else {
                        elems.push(Some(self.expr()?));
                    }
                    if !self.eat(",") {
                        break;
                    }
                }
                let end = self.expect(")")?.span;
                if elems.len() == 1 {
                    if let Some(Some(_)) = elems.first() {
                        let mut inner = elems.pop().unwrap().unwrap();
                        inner.span = t.span.join(end);
                        return Ok(inner);
                    }
                }
                Ok(Expr { kind: ExprKind::Tuple(elems), span: t.span.join(end) })
            }
            TokenKind::Punct if t.text == "[" => {
                self.bump();
                let mut elems = Vec::new();
                while !self.at("]") {
                    elems.push(Some(self.expr()?));
                    if !self.eat(",") {
                        break;
                    }
                }
                let end = self.expect("]")?.span;
                Ok(Expr { kind: ExprKind::Tuple(elems), span: t.span.join(end) })
            }
            _ => Err(self.error("expected expression", &["identifier", "literal", "("])),
        }
    }
}

fn strip_gas(e: Expr) -> Expr {
    // `x.gas(g)` used as a call target means `x`
    if let ExprKind::Call { callee, args } = &e.kind {
        if let ExprKind::Member { base, member } = &callee.kind {
            if member == "gas" && args.len() == 1 {
                return (**base).clone();
            }
        }
    }
    e
}

/// Recognize built-in members and call shapes that the analyses treat specially.
fn classify(e: Expr) -> Expr {
    let span = e.span;
    match e.kind {
        ExprKind::Member { base, member } => match (&base.kind, member.as_str()) {
            (ExprKind::Ident(b), "sender") if b == "msg" => Expr { kind: ExprKind::MsgSender, span },
            (ExprKind::Ident(b), "origin") if b == "tx" => Expr { kind: ExprKind::TxOrigin, span },
            _ => Expr { kind: ExprKind::Member { base, member }, span },
        },
        ExprKind::Call { callee, args } => {
            let callee = strip_gas(*callee);
            // callee.value(v)(args), possibly with .gas(g) on either side of .value
            if let ExprKind::Call { callee: inner, args: vargs } = &callee.kind {
                if let ExprKind::Member { base, member } = &inner.kind {
                    if member == "value" && vargs.len() == 1 {
                        return Expr {
                            kind: ExprKind::ValueCall {
                                callee: Box::new(strip_gas((**base).clone())),
                                value: Box::new(vargs[0].clone()),
                                args,
                            },
                            span,
                        };
                    }
                }
            }
            match &callee.kind {
                ExprKind::Member { base, member } => {
                    let target = base.clone();
                    match member.as_str() {
                        "transfer" if args.len() == 1 => {
                            let value = Box::new(args.into_iter().next().unwrap());
                            Expr { kind: ExprKind::Transfer { target, value }, span }
                        }
                        "send" if args.len() == 1 => {
                            Expr { kind: ExprKind::LowLevelCall { kind: LowLevelKind::Send, target, args }, span }
                        }
                        "call" | "callcode" | "delegatecall" => {
                            let kind = match member.as_str() {
                                "call" => LowLevelKind::Call,
                                "callcode" => LowLevelKind::Callcode,
                                _ => LowLevelKind::Delegatecall,
                            };
                            Expr { kind: ExprKind::LowLevelCall { kind, target, args }, span }
                        }
                        _ => Expr { kind: ExprKind::Call { callee: Box::new(callee), args }, span },
                    }
                }
                ExprKind::Ident(n) if (n == "selfdestruct" || n == "suicide") && args.len() == 1 => {
                    Expr { kind: ExprKind::Selfdestruct(Box::new(args.into_iter().next().unwrap())), span }
                }
                _ => Expr { kind: ExprKind::Call { callee: Box::new(callee), args }, span },
            }
        }
        kind => Expr { kind, span },
    }
}
