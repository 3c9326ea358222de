use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Quoted(String),
    Var(String),
    Wildcard,
    Str(String),
    Num(f64),
    /// `.name` in a plan body.
    Internal(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Semi,
    Colon,
    ColonDash,
    Arrow,
    Amp,
    Plus,
    Minus,
    Bang,
    Question,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Quoted(s) => format!("quoted atom '{s}'"),
            Tok::Var(s) => format!("variable `{s}`"),
            Tok::Wildcard => "`_`".into(),
            Tok::Str(_) => "string".into(),
            Tok::Num(_) => "number".into(),
            Tok::Internal(s) => format!("internal action `.{s}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Colon => "`:`".into(),
            Tok::ColonDash => "`:-`".into(),
            Tok::Arrow => "`<-`".into(),
            Tok::Amp => "`&`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Bang => "`!`".into(),
            Tok::Question => "`?`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
    out: Vec<Spanned>,
    body_start: bool,
}

/// `body_start` lexes the input as if it followed `<-`, so a leading
/// `.name` is an internal action.
pub(crate) fn tokenize(source: &str, body_start: bool) -> Result<Vec<Spanned>, ParseError> {
    let mut lx = Lexer {
        chars: source.chars().peekable(),
        line: 1,
        column: 1,
        out: Vec::new(),
        body_start,
    };
    lx.run()?;
    Ok(lx.out)
}

fn ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

impl Lexer<'_> {
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

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next()
    }

    fn push(&mut self, tok: Tok, line: usize, column: usize) {
        self.out.push(Spanned { tok, line, column });
    }

    fn err(&self, line: usize, column: usize, expected: &str, found: String) -> ParseError {
        ParseError::Syntax {
            line,
            column,
            expected: vec![expected.to_string()],
            found,
        }
    }

    fn word(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if ident_char(c) {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        s
    }

    fn body_position(&self) -> bool {
        match self.out.last() {
            None => self.body_start,
            Some(s) => matches!(s.tok, Tok::Arrow | Tok::Semi),
        }
    }

    fn run(&mut self) -> Result<(), ParseError> {
        loop {
            let (line, column) = (self.line, self.column);
            let Some(c) = self.peek() else {
                self.push(Tok::Eof, line, column);
                return Ok(());
            };
            match c {
                c if c.is_whitespace() => {
                    self.bump();
                }
                '/' if self.peek2() == Some('/') => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                'a'..='z' => {
                    let w = self.word();
                    self.push(Tok::Ident(w), line, column);
                }
                'A'..='Z' => {
                    let w = self.word();
                    self.push(Tok::Var(w), line, column);
                }
                '_' => {
                    let w = self.word();
                    if w == "_" {
                        self.push(Tok::Wildcard, line, column);
                    } else if w[1..].starts_with(|c: char| c.is_ascii_alphabetic()) {
                        self.push(Tok::Var(w), line, column);
                    } else {
                        return Err(self.err(line, column, "variable or `_`", format!("`{w}`")));
                    }
                }
                '0'..='9' => self.number(line, column)?,
                '"' => {
                    self.bump();
                    let s = self.quoted('"', line, column)?;
                    self.push(Tok::Str(s), line, column);
                }
                '\'' => {
                    self.bump();
                    let s = self.quoted('\'', line, column)?;
                    if s.is_empty() {
                        return Err(self.err(line, column, "non-empty quoted atom", "''".into()));
                    }
                    self.push(Tok::Quoted(s), line, column);
                }
                '.' => {
                    self.bump();
                    if self.body_position() && matches!(self.peek(), Some('a'..='z')) {
                        let w = self.word();
                        self.push(Tok::Internal(w), line, column);
                    } else {
                        self.push(Tok::Dot, line, column);
                    }
                }
                ':' => {
                    self.bump();
                    if self.peek() == Some('-') {
                        self.bump();
                        self.push(Tok::ColonDash, line, column);
                    } else {
                        self.push(Tok::Colon, line, column);
                    }
                }
                '<' => {
                    self.bump();
                    if self.peek() == Some('-') {
                        self.bump();
                        self.push(Tok::Arrow, line, column);
                    } else {
                        return Err(self.err(line, column, "`<-`", "`<`".into()));
                    }
                }
                '←' => {
                    self.bump();
                    self.push(Tok::Arrow, line, column);
                }
                '&' | '∧' => {
                    self.bump();
                    self.push(Tok::Amp, line, column);
                }
                '(' | ')' | ',' | ';' | '+' | '-' | '!' | '?' => {
                    self.bump();
                    let tok = match c {
                        '(' => Tok::LParen,
                        ')' => Tok::RParen,
                        ',' => Tok::Comma,
                        ';' => Tok::Semi,
                        '+' => Tok::Plus,
                        '-' => Tok::Minus,
                        '!' => Tok::Bang,
                        _ => Tok::Question,
                    };
                    self.push(tok, line, column);
                }
                other => {
                    return Err(self.err(line, column, "token", format!("character {other:?}")));
                }
            }
        }
    }

    fn number(&mut self, line: usize, column: usize) -> Result<(), ParseError> {
        let mut s = self.digits();
        if self.peek() == Some('.') && matches!(self.peek2(), Some('0'..='9')) {
            self.bump();
            s.push('.');
            s.push_str(&self.digits());
        }
        let value: f64 = s
            .parse()
            .map_err(|_| self.err(line, column, "number", format!("`{s}`")))?;
        if !value.is_finite() {
            return Err(self.err(line, column, "finite number", format!("`{s}`")));
        }
        self.push(Tok::Num(value), line, column);
        Ok(())
    }

    fn digits(&mut self) -> String {
        let mut s = String::new();
        while let Some(c @ '0'..='9') = self.peek() {
            s.push(c);
            self.bump();
        }
        s
    }

    fn quoted(&mut self, delim: char, line: usize, column: usize) -> Result<String, ParseError> {
        let mut s = String::new();
        loop {
            match self.bump() {
                None => {
                    return Err(self.err(line, column, "closing quote", "end of input".into()));
                }
                Some(c) if c == delim => return Ok(s),
                Some('\\') => match self.bump() {
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    Some('r') => s.push('\r'),
                    Some(c @ ('\\' | '"' | '\'')) => s.push(c),
                    Some(c) => {
                        return Err(self.err(self.line, self.column, "escape sequence", format!("`\\{c}`")));
                    }
                    None => {
                        return Err(self.err(line, column, "closing quote", "end of input".into()));
                    }
                },
                Some(c) => s.push(c),
            }
        }
    }
}
