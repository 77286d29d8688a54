//! Grammar-based parsing of Java snippets into preorder node-kind sequences.
//!
//! A hand-rolled lexer and recursive-descent parser cover the declaration,
//! statement, and expression forms that tactic snippets actually use
//! (classes, interfaces, enums, fields, methods, control flow, calls,
//! generics, lambdas, casts). The parse builds a lightweight tree whose
//! preorder node-kind names become the sequence compared by edit distance.
//!
//! Parsing never fails outright: input that contains binary garbage, is
//! brace-unbalanced, or falls outside the grammar degrades to a sequence of
//! token-kind names with `degraded` set, so ranking still has something to
//! compare. Sequences are capped at [`MAX_SEQUENCE_NODES`] kinds (tail
//! truncated, `truncated` set) to bound the quadratic edit-distance cost.

/// Upper bound on emitted node kinds per sequence.
pub const MAX_SEQUENCE_NODES: usize = 2000;

/// Parser recursion bound; deeper nesting degrades rather than overflowing.
const MAX_DEPTH: usize = 200;

/// Preorder node-kind names for one snippet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AstSequence {
    node_kinds: Vec<String>,
    source_id: String,
    degraded: bool,
    truncated: bool,
}

impl AstSequence {
    pub fn node_kinds(&self) -> &[String] {
        &self.node_kinds
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    /// True when the grammar parse was abandoned and the sequence holds
    /// token kinds instead of node kinds.
    pub fn degraded(&self) -> bool {
        self.degraded
    }

    /// True when the sequence was cut at [`MAX_SEQUENCE_NODES`].
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn len(&self) -> usize {
        self.node_kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_kinds.is_empty()
    }

    #[cfg(test)]
    pub(crate) fn from_kinds(source_id: &str, kinds: &[&str]) -> AstSequence {
        AstSequence {
            node_kinds: kinds.iter().map(|k| (*k).to_owned()).collect(),
            source_id: source_id.to_owned(),
            degraded: false,
            truncated: false,
        }
    }
}

/// Parse a snippet into its preorder node-kind sequence, degrading to token
/// kinds instead of failing.
pub fn parse_ast_sequence(source_id: &str, code: &str) -> AstSequence {
    let tokens = lex(code);
    let looks_binary = code
        .chars()
        .any(|c| (c.is_control() && !matches!(c, '\n' | '\r' | '\t')) || c == '\u{FFFD}');
    let parsed = if looks_binary || !brackets_balanced(&tokens) {
        None
    } else {
        Parser::new(&tokens).compilation_unit().ok()
    };
    let (mut kinds, degraded) = match parsed {
        Some(root) => (flatten(&root), false),
        None => (token_kinds(&tokens), true),
    };
    let truncated = kinds.len() > MAX_SEQUENCE_NODES;
    kinds.truncate(MAX_SEQUENCE_NODES);
    AstSequence {
        node_kinds: kinds,
        source_id: source_id.to_owned(),
        degraded,
        truncated,
    }
}

// --- Lexer ---------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Ident(String),
    Keyword(&'static str),
    Number,
    Str,
    Ch,
    Sym(char),
}

/// Sorted for binary search. Classic reserved words plus the literal words
/// and `var`; contextual keywords (record, yield, sealed) stay identifiers.
const KEYWORDS: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "false", "final", "finally",
    "float", "for", "goto", "if", "implements", "import", "instanceof", "int", "interface",
    "long", "native", "new", "null", "package", "private", "protected", "public", "return",
    "short", "static", "strictfp", "super", "switch", "synchronized", "this", "throw", "throws",
    "transient", "true", "try", "var", "void", "volatile", "while",
];

const PRIMITIVE_TYPES: &[&str] = &[
    "boolean", "byte", "char", "double", "float", "int", "long", "short", "var", "void",
];

const MODIFIERS: &[&str] = &[
    "abstract", "default", "final", "native", "private", "protected", "public", "static",
    "strictfp", "synchronized", "transient", "volatile",
];

/// Total: any input lexes; unterminated literals and comments run to EOF,
/// unknown characters become symbol tokens. Every operator is emitted as
/// single-character symbols (the parser merges adjacent ones contextually),
/// which sidesteps the classic `>>`-in-generics ambiguity.
fn lex(code: &str) -> Vec<Token> {
    let chars: Vec<char> = code.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            i += 2;
            while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                i += 1;
            }
            i = (i + 2).min(chars.len());
        } else if c == '"' || c == '\'' {
            i += 1;
            while i < chars.len() && chars[i] != c {
                i += if chars[i] == '\\' { 2 } else { 1 };
            }
            i = (i + 1).min(chars.len());
            tokens.push(if c == '"' { Token::Str } else { Token::Ch });
        } else if c.is_ascii_digit() {
            i = lex_number(&chars, i);
            tokens.push(Token::Number);
        } else if c.is_alphabetic() || c == '_' || c == '$' {
            let start = i;
            while i < chars.len()
                && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$')
            {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            match KEYWORDS.binary_search(&word.as_str()) {
                Ok(k) => tokens.push(Token::Keyword(KEYWORDS[k])),
                Err(_) => tokens.push(Token::Ident(word)),
            }
        } else {
            tokens.push(Token::Sym(c));
            i += 1;
        }
    }
    tokens
}

fn lex_number(chars: &[char], start: usize) -> usize {
    let mut i = start;
    let is_digit = |c: &char, hex: bool| {
        c.is_ascii_digit() || *c == '_' || (hex && c.is_ascii_hexdigit())
    };
    let hex = chars[i] == '0' && matches!(chars.get(i + 1), Some('x' | 'X' | 'b' | 'B'));
    if hex {
        i += 2;
    }
    while chars.get(i).is_some_and(|c| is_digit(c, hex)) {
        i += 1;
    }
    if !hex {
        if chars.get(i) == Some(&'.') && chars.get(i + 1).is_some_and(char::is_ascii_digit) {
            i += 1;
            while chars.get(i).is_some_and(|c| is_digit(c, false)) {
                i += 1;
            }
        }
        if matches!(chars.get(i), Some('e' | 'E'))
            && (chars.get(i + 1).is_some_and(char::is_ascii_digit)
                || (matches!(chars.get(i + 1), Some('+' | '-'))
                    && chars.get(i + 2).is_some_and(char::is_ascii_digit)))
        {
            i += if matches!(chars.get(i + 1), Some('+' | '-')) { 2 } else { 1 };
            while chars.get(i).is_some_and(char::is_ascii_digit) {
                i += 1;
            }
        }
    }
    if matches!(chars.get(i), Some('l' | 'L' | 'f' | 'F' | 'd' | 'D')) {
        i += 1;
    }
    i
}

fn brackets_balanced(tokens: &[Token]) -> bool {
    let mut stack = Vec::new();
    for token in tokens {
        if let Token::Sym(c) = token {
            match c {
                '{' | '(' | '[' => stack.push(*c),
                '}' => {
                    if stack.pop() != Some('{') {
                        return false;
                    }
                }
                ')' => {
                    if stack.pop() != Some('(') {
                        return false;
                    }
                }
                ']' => {
                    if stack.pop() != Some('[') {
                        return false;
                    }
                }
                _ => {}
            }
        }
    }
    stack.is_empty()
}

fn token_kinds(tokens: &[Token]) -> Vec<String> {
    tokens
        .iter()
        .map(|token| match token {
            Token::Ident(_) => "tok_identifier".to_owned(),
            Token::Keyword(k) => format!("kw_{k}"),
            Token::Number => "tok_number".to_owned(),
            Token::Str => "tok_string".to_owned(),
            Token::Ch => "tok_char".to_owned(),
            Token::Sym(c) => format!("sym_{c}"),
        })
        .collect()
}

// --- Tree ----------------------------------------------------------------

struct Node {
    kind: &'static str,
    children: Vec<Node>,
}

impl Node {
    fn new(kind: &'static str) -> Node {
        Node {
            kind,
            children: Vec::new(),
        }
    }

    fn with(kind: &'static str, children: Vec<Node>) -> Node {
        Node { kind, children }
    }
}

fn flatten(root: &Node) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        out.push(node.kind.to_owned());
        stack.extend(node.children.iter().rev());
    }
    out
}

// --- Parser --------------------------------------------------------------

/// Unit error: the only consumer decision is "degrade".
struct Fail;

type PResult = Result<Node, Fail>;

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
}

impl<'t> Parser<'t> {
    fn new(tokens: &'t [Token]) -> Parser<'t> {
        Parser { tokens, pos: 0 }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, offset: usize) -> Option<&Token> {
        self.tokens.get(self.pos + offset)
    }

    fn bump(&mut self) {
        self.pos += 1;
    }

    fn at_sym(&self, c: char) -> bool {
        self.peek() == Some(&Token::Sym(c))
    }

    fn at_syms(&self, cs: &[char]) -> bool {
        cs.iter()
            .enumerate()
            .all(|(k, &c)| self.peek_at(k) == Some(&Token::Sym(c)))
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Token::Keyword(k)) if *k == kw)
    }

    fn eat_sym(&mut self, c: char) -> Result<(), Fail> {
        if self.at_sym(c) {
            self.bump();
            Ok(())
        } else {
            Err(Fail)
        }
    }

    fn eat_kw(&mut self, kw: &str) -> Result<(), Fail> {
        if self.at_kw(kw) {
            self.bump();
            Ok(())
        } else {
            Err(Fail)
        }
    }

    fn eat_ident(&mut self) -> Result<(), Fail> {
        if matches!(self.peek(), Some(Token::Ident(_))) {
            self.bump();
            Ok(())
        } else {
            Err(Fail)
        }
    }

    fn guard(depth: usize) -> Result<usize, Fail> {
        if depth >= MAX_DEPTH {
            Err(Fail)
        } else {
            Ok(depth + 1)
        }
    }

    // -- Declarations --

    fn compilation_unit(&mut self) -> PResult {
        let mut unit = Node::new("compilation_unit");
        // Leading annotations may precede a package declaration.
        let mut pending = self.annotations_and_modifiers(0)?;
        if self.at_kw("package") {
            self.bump();
            self.qualified_name()?;
            self.eat_sym(';')?;
            let mut pkg = Node::new("package_declaration");
            pkg.children.append(&mut pending);
            unit.children.push(pkg);
        }
        while self.at_kw("import") {
            self.bump();
            let _ = self.eat_kw("static");
            self.qualified_name()?;
            if self.at_syms(&['.', '*']) {
                self.bump();
                self.bump();
            }
            self.eat_sym(';')?;
            unit.children.push(Node::new("import_declaration"));
        }
        while self.peek().is_some() {
            if self.at_sym(';') {
                self.bump();
                continue;
            }
            pending.append(&mut self.annotations_and_modifiers(0)?);
            let mut decl = self.type_declaration(0)?;
            // Prepend any annotations/modifiers gathered before the keyword.
            pending.append(&mut decl.children);
            decl.children = std::mem::take(&mut pending);
            unit.children.push(decl);
        }
        Ok(unit)
    }

    fn qualified_name(&mut self) -> Result<(), Fail> {
        self.eat_ident()?;
        while self.at_sym('.') && matches!(self.peek_at(1), Some(Token::Ident(_))) {
            self.bump();
            self.bump();
        }
        Ok(())
    }

    fn annotations_and_modifiers(&mut self, depth: usize) -> Result<Vec<Node>, Fail> {
        let mut nodes = Vec::new();
        loop {
            if self.at_sym('@') && matches!(self.peek_at(1), Some(Token::Ident(_))) {
                // `@interface` declarations are out of the subset, but `@Name`
                // with optional arguments is consumed wholesale.
                self.bump();
                self.qualified_name()?;
                if self.at_sym('(') {
                    self.skip_balanced('(', ')')?;
                }
                nodes.push(Node::new("annotation"));
            } else if matches!(self.peek(), Some(Token::Keyword(k)) if MODIFIERS.contains(k)) {
                // `static { … }` is an initializer block, not a modifier.
                if self.at_kw("static") && self.peek_at(1) == Some(&Token::Sym('{')) {
                    break;
                }
                // `default` inside switch bodies is a label, not a modifier,
                // but members are never parsed there.
                self.bump();
                nodes.push(Node::new("modifier"));
            } else {
                break;
            }
            let _ = depth;
        }
        Ok(nodes)
    }

    fn type_declaration(&mut self, depth: usize) -> PResult {
        let depth = Self::guard(depth)?;
        if self.at_kw("class") {
            self.class_like("class_declaration", depth)
        } else if self.at_kw("interface") {
            self.class_like("interface_declaration", depth)
        } else if self.at_kw("enum") {
            self.enum_declaration(depth)
        } else {
            Err(Fail)
        }
    }

    /// Classes and interfaces share a shape: name, optional type parameters,
    /// optional extends/implements types, then a body.
    fn class_like(&mut self, kind: &'static str, depth: usize) -> PResult {
        self.bump();
        let mut node = Node::new(kind);
        self.eat_ident()?;
        if self.at_sym('<') {
            self.skip_balanced('<', '>')?;
        }
        if self.at_kw("extends") {
            self.bump();
            node.children.push(self.parse_type()?);
            while self.at_sym(',') {
                self.bump();
                node.children.push(self.parse_type()?);
            }
        }
        if self.at_kw("implements") {
            self.bump();
            node.children.push(self.parse_type()?);
            while self.at_sym(',') {
                self.bump();
                node.children.push(self.parse_type()?);
            }
        }
        node.children.push(self.class_body(depth)?);
        Ok(node)
    }

    fn enum_declaration(&mut self, depth: usize) -> PResult {
        self.bump();
        let mut node = Node::new("enum_declaration");
        self.eat_ident()?;
        if self.at_kw("implements") {
            self.bump();
            node.children.push(self.parse_type()?);
            while self.at_sym(',') {
                self.bump();
                node.children.push(self.parse_type()?);
            }
        }
        self.eat_sym('{')?;
        while matches!(self.peek(), Some(Token::Ident(_))) || self.at_sym('@') {
            let mut annotations = self.annotations_and_modifiers(depth)?;
            let mut constant = Node::new("enum_constant");
            constant.children.append(&mut annotations);
            self.eat_ident()?;
            if self.at_sym('(') {
                constant.children.push(self.argument_list(depth)?);
            }
            if self.at_sym('{') {
                constant.children.push(self.class_body(depth)?);
            }
            node.children.push(constant);
            if self.at_sym(',') {
                self.bump();
            } else {
                break;
            }
        }
        if self.at_sym(';') {
            self.bump();
            while !self.at_sym('}') {
                node.children.push(self.member(depth)?);
            }
        }
        self.eat_sym('}')?;
        Ok(node)
    }

    fn class_body(&mut self, depth: usize) -> PResult {
        let depth = Self::guard(depth)?;
        self.eat_sym('{')?;
        let mut body = Node::new("class_body");
        while !self.at_sym('}') {
            if self.peek().is_none() {
                return Err(Fail);
            }
            if self.at_sym(';') {
                self.bump();
                continue;
            }
            body.children.push(self.member(depth)?);
        }
        self.bump();
        Ok(body)
    }

    fn member(&mut self, depth: usize) -> PResult {
        let depth = Self::guard(depth)?;
        let mut prefix = self.annotations_and_modifiers(depth)?;
        if self.at_kw("class") || self.at_kw("interface") || self.at_kw("enum") {
            let mut decl = self.type_declaration(depth)?;
            prefix.append(&mut decl.children);
            decl.children = prefix;
            return Ok(decl);
        }
        if self.at_sym('{') || (self.at_kw("static") && self.peek_at(1) == Some(&Token::Sym('{')))
        {
            let _ = self.eat_kw("static");
            let mut node = Node::with("initializer_block", prefix);
            node.children.push(self.block(depth)?);
            return Ok(node);
        }
        // Generic method type parameters precede the return type.
        if self.at_sym('<') {
            self.skip_balanced('<', '>')?;
        }
        // Constructor: a bare identifier immediately followed by '('.
        if matches!(self.peek(), Some(Token::Ident(_))) && self.peek_at(1) == Some(&Token::Sym('('))
        {
            self.bump();
            let mut node = Node::with("constructor_declaration", prefix);
            node.children.push(self.parameter_list(depth)?);
            if let Some(throws) = self.throws_clause()? {
                node.children.push(throws);
            }
            node.children.push(self.block(depth)?);
            return Ok(node);
        }
        let ty = self.parse_type()?;
        self.eat_ident()?;
        if self.at_sym('(') {
            let mut node = Node::with("method_declaration", prefix);
            node.children.push(ty);
            node.children.push(self.parameter_list(depth)?);
            if let Some(throws) = self.throws_clause()? {
                node.children.push(throws);
            }
            if self.at_sym(';') {
                self.bump();
            } else {
                node.children.push(self.block(depth)?);
            }
            Ok(node)
        } else {
            let mut node = Node::with("field_declaration", prefix);
            node.children.push(ty);
            self.variable_declarators(&mut node, depth)?;
            self.eat_sym(';')?;
            Ok(node)
        }
    }

    /// One or more declarators; the leading identifier of the first is
    /// already consumed by the caller.
    fn variable_declarators(&mut self, parent: &mut Node, depth: usize) -> Result<(), Fail> {
        loop {
            while self.at_syms(&['[', ']']) {
                self.bump();
                self.bump();
            }
            let mut declarator = Node::new("variable_declarator");
            if self.at_sym('=') && self.peek_at(1) != Some(&Token::Sym('=')) {
                self.bump();
                declarator.children.push(self.initializer(depth)?);
            }
            parent.children.push(declarator);
            if self.at_sym(',') {
                self.bump();
                self.eat_ident()?;
            } else {
                return Ok(());
            }
        }
    }

    fn initializer(&mut self, depth: usize) -> PResult {
        if self.at_sym('{') {
            self.array_initializer(depth)
        } else {
            self.expression(depth)
        }
    }

    fn array_initializer(&mut self, depth: usize) -> PResult {
        let depth = Self::guard(depth)?;
        self.eat_sym('{')?;
        let mut node = Node::new("array_initializer");
        while !self.at_sym('}') {
            node.children.push(self.initializer(depth)?);
            if self.at_sym(',') {
                self.bump();
            } else {
                break;
            }
        }
        self.eat_sym('}')?;
        Ok(node)
    }

    fn parameter_list(&mut self, depth: usize) -> PResult {
        self.eat_sym('(')?;
        let mut node = Node::new("parameter_list");
        while !self.at_sym(')') {
            let mut prefix = self.annotations_and_modifiers(depth)?;
            let mut parameter = Node::new("parameter");
            parameter.children.append(&mut prefix);
            parameter.children.push(self.parse_type()?);
            if self.at_syms(&['.', '.', '.']) {
                self.bump();
                self.bump();
                self.bump();
            }
            self.eat_ident()?;
            while self.at_syms(&['[', ']']) {
                self.bump();
                self.bump();
            }
            node.children.push(parameter);
            if self.at_sym(',') {
                self.bump();
            } else {
                break;
            }
        }
        self.eat_sym(')')?;
        Ok(node)
    }

    fn throws_clause(&mut self) -> Result<Option<Node>, Fail> {
        if !self.at_kw("throws") {
            return Ok(None);
        }
        self.bump();
        let mut node = Node::new("throws_clause");
        node.children.push(self.parse_type()?);
        while self.at_sym(',') {
            self.bump();
            node.children.push(self.parse_type()?);
        }
        Ok(Some(node))
    }

    /// A type reference: primitive keyword or qualified name, with any
    /// generic arguments and array dimensions consumed. Emitted as a single
    /// `type` leaf — the structural comparison does not need the spelling.
    fn parse_type(&mut self) -> PResult {
        match self.peek() {
            Some(Token::Keyword(k)) if PRIMITIVE_TYPES.contains(k) => self.bump(),
            Some(Token::Ident(_)) => self.qualified_name()?,
            _ => return Err(Fail),
        }
        if self.at_sym('<') {
            self.skip_balanced('<', '>')?;
            // Qualified generic types: Map.Entry<K, V>.Inner …
            while self.at_sym('.') && matches!(self.peek_at(1), Some(Token::Ident(_))) {
                self.bump();
                self.bump();
                if self.at_sym('<') {
                    self.skip_balanced('<', '>')?;
                }
            }
        }
        while self.at_syms(&['[', ']']) {
            self.bump();
            self.bump();
        }
        Ok(Node::new("type"))
    }

    fn skip_balanced(&mut self, open: char, close: char) -> Result<(), Fail> {
        self.eat_sym(open)?;
        let mut level = 1;
        while level > 0 {
            match self.peek() {
                None => return Err(Fail),
                Some(Token::Sym(c)) if *c == open => level += 1,
                Some(Token::Sym(c)) if *c == close => level -= 1,
                _ => {}
            }
            self.bump();
        }
        Ok(())
    }

    // -- Statements --

    fn block(&mut self, depth: usize) -> PResult {
        let depth = Self::guard(depth)?;
        self.eat_sym('{')?;
        let mut node = Node::new("block");
        while !self.at_sym('}') {
            if self.peek().is_none() {
                return Err(Fail);
            }
            node.children.push(self.statement(depth)?);
        }
        self.bump();
        Ok(node)
    }

    fn statement(&mut self, depth: usize) -> PResult {
        let depth = Self::guard(depth)?;
        match self.peek() {
            None => Err(Fail),
            Some(Token::Sym('{')) => self.block(depth),
            Some(Token::Sym(';')) => {
                self.bump();
                Ok(Node::new("empty_statement"))
            }
            Some(Token::Keyword("if")) => {
                self.bump();
                self.eat_sym('(')?;
                let condition = self.expression(depth)?;
                self.eat_sym(')')?;
                let mut node = Node::with("if_statement", vec![condition]);
                node.children.push(self.statement(depth)?);
                if self.at_kw("else") {
                    self.bump();
                    node.children.push(self.statement(depth)?);
                }
                Ok(node)
            }
            Some(Token::Keyword("while")) => {
                self.bump();
                self.eat_sym('(')?;
                let condition = self.expression(depth)?;
                self.eat_sym(')')?;
                let body = self.statement(depth)?;
                Ok(Node::with("while_statement", vec![condition, body]))
            }
            Some(Token::Keyword("do")) => {
                self.bump();
                let body = self.statement(depth)?;
                self.eat_kw("while")?;
                self.eat_sym('(')?;
                let condition = self.expression(depth)?;
                self.eat_sym(')')?;
                self.eat_sym(';')?;
                Ok(Node::with("do_statement", vec![body, condition]))
            }
            Some(Token::Keyword("for")) => self.for_statement(depth),
            Some(Token::Keyword("try")) => self.try_statement(depth),
            Some(Token::Keyword("switch")) => self.switch_statement(depth),
            Some(Token::Keyword("return")) => {
                self.bump();
                let mut node = Node::new("return_statement");
                if !self.at_sym(';') {
                    node.children.push(self.expression(depth)?);
                }
                self.eat_sym(';')?;
                Ok(node)
            }
            Some(Token::Keyword("throw")) => {
                self.bump();
                let value = self.expression(depth)?;
                self.eat_sym(';')?;
                Ok(Node::with("throw_statement", vec![value]))
            }
            Some(Token::Keyword("break")) => {
                self.bump();
                let _ = self.eat_ident();
                self.eat_sym(';')?;
                Ok(Node::new("break_statement"))
            }
            Some(Token::Keyword("continue")) => {
                self.bump();
                let _ = self.eat_ident();
                self.eat_sym(';')?;
                Ok(Node::new("continue_statement"))
            }
            Some(Token::Keyword("synchronized")) => {
                self.bump();
                self.eat_sym('(')?;
                let monitor = self.expression(depth)?;
                self.eat_sym(')')?;
                let body = self.block(depth)?;
                Ok(Node::with("synchronized_statement", vec![monitor, body]))
            }
            Some(Token::Keyword("assert")) => {
                self.bump();
                let mut node = Node::with("assert_statement", vec![self.expression(depth)?]);
                if self.at_sym(':') {
                    self.bump();
                    node.children.push(self.expression(depth)?);
                }
                self.eat_sym(';')?;
                Ok(node)
            }
            Some(Token::Keyword("class")) => self.type_declaration(depth),
            _ => {
                // Local variable declaration or expression statement;
                // backtrack to disambiguate.
                let checkpoint = self.pos;
                if let Ok(node) = self.local_variable_declaration(depth) {
                    return Ok(node);
                }
                self.pos = checkpoint;
                let expression = self.expression(depth)?;
                self.eat_sym(';')?;
                Ok(Node::with("expression_statement", vec![expression]))
            }
        }
    }

    fn local_variable_declaration(&mut self, depth: usize) -> PResult {
        let mut node = Node::new("local_variable_declaration");
        let mut prefix = self.annotations_and_modifiers(depth)?;
        node.children.append(&mut prefix);
        node.children.push(self.parse_type()?);
        self.eat_ident()?;
        self.variable_declarators(&mut node, depth)?;
        self.eat_sym(';')?;
        Ok(node)
    }

    fn for_statement(&mut self, depth: usize) -> PResult {
        self.bump();
        self.eat_sym('(')?;
        let mut node = Node::new("for_statement");

        // Enhanced form: `for (Type item : iterable)`.
        let checkpoint = self.pos;
        let enhanced = (|p: &mut Self| -> PResult {
            let mut decl = Node::new("local_variable_declaration");
            let mut prefix = p.annotations_and_modifiers(depth)?;
            decl.children.append(&mut prefix);
            decl.children.push(p.parse_type()?);
            p.eat_ident()?;
            decl.children.push(Node::new("variable_declarator"));
            p.eat_sym(':')?;
            Ok(decl)
        })(self);
        match enhanced {
            Ok(decl) => {
                node.children.push(decl);
                node.children.push(self.expression(depth)?);
                self.eat_sym(')')?;
            }
            Err(Fail) => {
                self.pos = checkpoint;
                // Classic three-clause form.
                if !self.at_sym(';') {
                    let init_checkpoint = self.pos;
                    match self.local_variable_declaration(depth) {
                        Ok(init) => node.children.push(init),
                        Err(Fail) => {
                            self.pos = init_checkpoint;
                            loop {
                                node.children.push(self.expression(depth)?);
                                if self.at_sym(',') {
                                    self.bump();
                                } else {
                                    break;
                                }
                            }
                            self.eat_sym(';')?;
                        }
                    }
                } else {
                    self.bump();
                }
                if !self.at_sym(';') {
                    node.children.push(self.expression(depth)?);
                }
                self.eat_sym(';')?;
                while !self.at_sym(')') {
                    node.children.push(self.expression(depth)?);
                    if self.at_sym(',') {
                        self.bump();
                    }
                }
                self.bump();
            }
        }
        node.children.push(self.statement(depth)?);
        Ok(node)
    }

    fn try_statement(&mut self, depth: usize) -> PResult {
        self.bump();
        let mut node = Node::new("try_statement");
        if self.at_sym('(') {
            self.bump();
            while !self.at_sym(')') {
                let checkpoint = self.pos;
                let resource = (|p: &mut Self| -> PResult {
                    let ty = p.parse_type()?;
                    p.eat_ident()?;
                    p.eat_sym('=')?;
                    let value = p.expression(depth)?;
                    Ok(Node::with(
                        "local_variable_declaration",
                        vec![ty, Node::with("variable_declarator", vec![value])],
                    ))
                })(self);
                match resource {
                    Ok(resource) => node.children.push(resource),
                    Err(Fail) => {
                        self.pos = checkpoint;
                        node.children.push(self.expression(depth)?);
                    }
                }
                if self.at_sym(';') {
                    self.bump();
                }
            }
            self.bump();
        }
        node.children.push(self.block(depth)?);
        let mut clauses = 0;
        while self.at_kw("catch") {
            self.bump();
            self.eat_sym('(')?;
            let mut clause = Node::new("catch_clause");
            let mut prefix = self.annotations_and_modifiers(depth)?;
            clause.children.append(&mut prefix);
            clause.children.push(self.parse_type()?);
            while self.at_sym('|') {
                self.bump();
                clause.children.push(self.parse_type()?);
            }
            self.eat_ident()?;
            self.eat_sym(')')?;
            clause.children.push(self.block(depth)?);
            node.children.push(clause);
            clauses += 1;
        }
        if self.at_kw("finally") {
            self.bump();
            let body = self.block(depth)?;
            node.children.push(Node::with("finally_clause", vec![body]));
            clauses += 1;
        }
        // A bare try block is only legal with resources.
        if clauses == 0 && node.children.len() < 2 {
            return Err(Fail);
        }
        Ok(node)
    }

    fn switch_statement(&mut self, depth: usize) -> PResult {
        self.bump();
        self.eat_sym('(')?;
        let selector = self.expression(depth)?;
        self.eat_sym(')')?;
        self.eat_sym('{')?;
        let mut node = Node::with("switch_statement", vec![selector]);
        while !self.at_sym('}') {
            if self.at_kw("case") {
                self.bump();
                let mut case = Node::new("switch_case");
                case.children.push(self.expression(depth)?);
                while self.at_sym(',') {
                    self.bump();
                    case.children.push(self.expression(depth)?);
                }
                self.eat_sym(':')?;
                node.children.push(case);
            } else if self.at_kw("default") {
                self.bump();
                self.eat_sym(':')?;
                node.children.push(Node::new("switch_case"));
            } else {
                node.children.push(self.statement(depth)?);
            }
        }
        self.bump();
        Ok(node)
    }

    // -- Expressions --

    fn expression(&mut self, depth: usize) -> PResult {
        let depth = Self::guard(depth)?;
        let left = self.ternary(depth)?;
        if let Some(width) = self.assignment_op_width() {
            for _ in 0..width {
                self.bump();
            }
            let right = self.expression(depth)?;
            return Ok(Node::with("assignment", vec![left, right]));
        }
        Ok(left)
    }

    /// Width in tokens of an assignment operator at the cursor, if any:
    /// `=`, `+=`-style compounds, or the shift compounds.
    fn assignment_op_width(&self) -> Option<usize> {
        let sym = |k: usize| match self.peek_at(k) {
            Some(Token::Sym(c)) => Some(*c),
            _ => None,
        };
        match (sym(0), sym(1), sym(2), sym(3)) {
            (Some('='), Some('='), _, _) => None,
            (Some('='), _, _, _) => Some(1),
            (Some(c), Some('='), Some('='), _) if "+-*/%&|^".contains(c) => None,
            (Some(c), Some('='), _, _) if "+-*/%&|^".contains(c) => Some(2),
            (Some('<'), Some('<'), Some('='), _) => Some(3),
            (Some('>'), Some('>'), Some('>'), Some('=')) => Some(4),
            (Some('>'), Some('>'), Some('='), _) => Some(3),
            _ => None,
        }
    }

    fn ternary(&mut self, depth: usize) -> PResult {
        let condition = self.binary(0, depth)?;
        if self.at_sym('?') {
            self.bump();
            let if_true = self.expression(depth)?;
            self.eat_sym(':')?;
            let if_false = self.ternary(depth)?;
            return Ok(Node::with(
                "conditional_expression",
                vec![condition, if_true, if_false],
            ));
        }
        Ok(condition)
    }

    /// Precedence-climbing binary expressions. Operators are recognized as
    /// runs of adjacent single-character symbol tokens.
    fn binary(&mut self, level: usize, depth: usize) -> PResult {
        if level >= BINARY_LEVELS.len() {
            return self.unary(depth);
        }
        let mut left = self.binary(level + 1, depth)?;
        loop {
            // instanceof sits at the relational level.
            if BINARY_LEVELS[level].contains(&"instanceof") && self.at_kw("instanceof") {
                self.bump();
                let ty = self.parse_type()?;
                left = Node::with("instanceof_expression", vec![left, ty]);
                continue;
            }
            let Some(width) = self.binary_op_width(level) else {
                return Ok(left);
            };
            for _ in 0..width {
                self.bump();
            }
            let right = self.binary(level + 1, depth)?;
            left = Node::with("binary_expression", vec![left, right]);
        }
    }

    fn binary_op_width(&self, level: usize) -> Option<usize> {
        let sym = |k: usize| match self.peek_at(k) {
            Some(Token::Sym(c)) => Some(*c),
            _ => None,
        };
        let (s0, s1, s2, s3) = (sym(0), sym(1), sym(2), sym(3));
        for op in BINARY_LEVELS[level] {
            let chars: Vec<char> = op.chars().collect();
            let matches = match chars.len() {
                1 => s0 == Some(chars[0]),
                2 => s0 == Some(chars[0]) && s1 == Some(chars[1]),
                3 => s0 == Some(chars[0]) && s1 == Some(chars[1]) && s2 == Some(chars[2]),
                _ => false,
            };
            if !matches {
                continue;
            }
            // Reject when the run extends into a longer operator: `a |= b` is
            // not `a | (= b)`, `a << b` is not `a < (< b)`, `a >>> b` is not
            // `a >> (> b)`, and `a == b` is not an assignment.
            let next = match chars.len() {
                1 => s1,
                2 => s2,
                _ => s3,
            };
            let extends = match *op {
                "|" => next == Some('|') || next == Some('='),
                "&" => next == Some('&') || next == Some('='),
                "^" | "*" | "/" | "%" | "+" | "-" => next == Some('='),
                "<" => next == Some('<') || next == Some('='),
                ">" => next == Some('>') || next == Some('='),
                "<<" | ">>>" => next == Some('='),
                ">>" => next == Some('>') || next == Some('='),
                _ => false,
            };
            if !extends {
                return Some(chars.len());
            }
        }
        None
    }

    fn unary(&mut self, depth: usize) -> PResult {
        let depth = Self::guard(depth)?;
        if self.at_syms(&['+', '+']) || self.at_syms(&['-', '-']) {
            self.bump();
            self.bump();
            let operand = self.unary(depth)?;
            return Ok(Node::with("unary_expression", vec![operand]));
        }
        if self.at_sym('!') || self.at_sym('~') || self.at_sym('+') || self.at_sym('-') {
            self.bump();
            let operand = self.unary(depth)?;
            return Ok(Node::with("unary_expression", vec![operand]));
        }
        // Cast: '(' Type ')' followed by something a cast can apply to.
        if self.at_sym('(') {
            let checkpoint = self.pos;
            if let Ok(node) = self.try_cast(depth) {
                return Ok(node);
            }
            self.pos = checkpoint;
        }
        self.postfix(depth)
    }

    fn try_cast(&mut self, depth: usize) -> PResult {
        self.bump();
        let primitive =
            matches!(self.peek(), Some(Token::Keyword(k)) if PRIMITIVE_TYPES.contains(k));
        let ty = self.parse_type()?;
        self.eat_sym(')')?;
        // `(name) - x` is subtraction, not a cast; numeric sign operators
        // are unambiguous only after a primitive type.
        let operand_ok = match self.peek() {
            Some(Token::Ident(_) | Token::Number | Token::Str | Token::Ch) => true,
            Some(Token::Keyword(k)) => matches!(*k, "new" | "this" | "super" | "true" | "false" | "null"),
            Some(Token::Sym('(')) => true,
            Some(Token::Sym('!' | '~')) => true,
            Some(Token::Sym('+' | '-')) => primitive,
            _ => false,
        };
        if !operand_ok {
            return Err(Fail);
        }
        let operand = self.unary(depth)?;
        Ok(Node::with("cast_expression", vec![ty, operand]))
    }

    fn postfix(&mut self, depth: usize) -> PResult {
        let mut node = self.primary(depth)?;
        loop {
            if self.at_sym('.') {
                // `Foo.class` and `foo.this` end a chain; `foo.new` is out of
                // the subset and fails the parse.
                if matches!(self.peek_at(1), Some(Token::Keyword("class" | "this"))) {
                    self.bump();
                    self.bump();
                    node = Node::with("field_access", vec![node]);
                    continue;
                }
                if !matches!(self.peek_at(1), Some(Token::Ident(_))) {
                    return Err(Fail);
                }
                self.bump();
                self.bump();
                if self.at_sym('(') {
                    let args = self.argument_list(depth)?;
                    node = Node::with("method_invocation", vec![node, args]);
                } else {
                    node = Node::with("field_access", vec![node]);
                }
            } else if self.at_sym('[') {
                self.bump();
                let index = self.expression(depth)?;
                self.eat_sym(']')?;
                node = Node::with("array_access", vec![node, index]);
            } else if self.at_syms(&['+', '+']) || self.at_syms(&['-', '-']) {
                self.bump();
                self.bump();
                node = Node::with("unary_expression", vec![node]);
            } else if self.at_syms(&[':', ':']) {
                self.bump();
                self.bump();
                if self.eat_ident().is_err() {
                    self.eat_kw("new")?;
                }
                node = Node::with("method_reference", vec![node]);
            } else {
                return Ok(node);
            }
        }
    }

    fn primary(&mut self, depth: usize) -> PResult {
        let depth = Self::guard(depth)?;
        match self.peek() {
            Some(Token::Number) => {
                self.bump();
                Ok(Node::new("number_literal"))
            }
            Some(Token::Str) => {
                self.bump();
                Ok(Node::new("string_literal"))
            }
            Some(Token::Ch) => {
                self.bump();
                Ok(Node::new("char_literal"))
            }
            Some(Token::Keyword("true" | "false")) => {
                self.bump();
                Ok(Node::new("boolean_literal"))
            }
            Some(Token::Keyword("null")) => {
                self.bump();
                Ok(Node::new("null_literal"))
            }
            Some(Token::Keyword("this")) => {
                self.bump();
                let node = Node::new("this_expression");
                if self.at_sym('(') {
                    let args = self.argument_list(depth)?;
                    return Ok(Node::with("method_invocation", vec![node, args]));
                }
                Ok(node)
            }
            Some(Token::Keyword("super")) => {
                self.bump();
                let node = Node::new("super_expression");
                if self.at_sym('(') {
                    let args = self.argument_list(depth)?;
                    return Ok(Node::with("method_invocation", vec![node, args]));
                }
                Ok(node)
            }
            Some(Token::Keyword("new")) => self.creation(depth),
            Some(Token::Ident(_)) => {
                // Single-parameter lambda: `x -> body`.
                if self.peek_at(1) == Some(&Token::Sym('-'))
                    && self.peek_at(2) == Some(&Token::Sym('>'))
                {
                    self.bump();
                    self.bump();
                    self.bump();
                    let body = self.lambda_body(depth)?;
                    return Ok(Node::with("lambda_expression", vec![body]));
                }
                self.bump();
                if self.at_sym('(') {
                    let args = self.argument_list(depth)?;
                    return Ok(Node::with("method_invocation", vec![args]));
                }
                Ok(Node::new("identifier"))
            }
            Some(Token::Sym('(')) => {
                // Parenthesized lambda parameters: scan to the matching ')'
                // and look for '->'.
                if let Some(after) = self.matching_paren_end() {
                    if self.tokens.get(after) == Some(&Token::Sym('-'))
                        && self.tokens.get(after + 1) == Some(&Token::Sym('>'))
                    {
                        self.pos = after + 2;
                        let body = self.lambda_body(depth)?;
                        return Ok(Node::with("lambda_expression", vec![body]));
                    }
                }
                self.bump();
                let inner = self.expression(depth)?;
                self.eat_sym(')')?;
                Ok(Node::with("parenthesized_expression", vec![inner]))
            }
            Some(Token::Sym('{')) => self.array_initializer(depth),
            _ => Err(Fail),
        }
    }

    /// Token index just past the ')' matching the '(' at the cursor.
    fn matching_paren_end(&self) -> Option<usize> {
        let mut level = 0;
        for (offset, token) in self.tokens[self.pos..].iter().enumerate() {
            match token {
                Token::Sym('(') => level += 1,
                Token::Sym(')') => {
                    level -= 1;
                    if level == 0 {
                        return Some(self.pos + offset + 1);
                    }
                }
                _ => {}
            }
        }
        None
    }

    fn lambda_body(&mut self, depth: usize) -> PResult {
        if self.at_sym('{') {
            self.block(depth)
        } else {
            self.expression(depth)
        }
    }

    fn creation(&mut self, depth: usize) -> PResult {
        self.bump();
        let ty = self.parse_type()?;
        if self.at_sym('[') {
            let mut node = Node::with("array_creation", vec![ty]);
            while self.at_sym('[') {
                self.bump();
                if !self.at_sym(']') {
                    node.children.push(self.expression(depth)?);
                }
                self.eat_sym(']')?;
            }
            if self.at_sym('{') {
                node.children.push(self.array_initializer(depth)?);
            }
            return Ok(node);
        }
        // `new int[] { … }`: empty dimensions were consumed as part of the
        // type, leaving the initializer.
        if self.at_sym('{') {
            let initializer = self.array_initializer(depth)?;
            return Ok(Node::with("array_creation", vec![ty, initializer]));
        }
        let args = self.argument_list(depth)?;
        let mut node = Node::with("object_creation", vec![ty, args]);
        if self.at_sym('{') {
            // Anonymous class body.
            node.children.push(self.class_body(depth)?);
        }
        Ok(node)
    }

    fn argument_list(&mut self, depth: usize) -> PResult {
        self.eat_sym('(')?;
        let mut node = Node::new("argument_list");
        while !self.at_sym(')') {
            node.children.push(self.expression(depth)?);
            if self.at_sym(',') {
                self.bump();
            } else {
                break;
            }
        }
        self.eat_sym(')')?;
        Ok(node)
    }
}

const BINARY_LEVELS: &[&[&str]] = &[
    &["||"],
    &["&&"],
    &["|"],
    &["^"],
    &["&"],
    &["==", "!="],
    &["<=", ">=", "<", ">", "instanceof"],
    &["<<", ">>>", ">>"],
    &["+", "-"],
    &["*", "/", "%"],
];
