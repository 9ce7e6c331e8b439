// SPDX-License-Identifier: Apache-2.0

//! Untyped Liberty syntax tree: nested groups with simple and complex attributes.

use super::LibertyError;

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub kind: String,
    pub args: Vec<String>,
    pub attrs: Vec<Attr>,
    pub groups: Vec<Group>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Attr {
    /// `name : value ;`
    Simple { name: String, value: String, line: usize },
    /// `name ( v1, v2, ... ) ;`
    Complex { name: String, values: Vec<String>, line: usize },
}

impl Attr {
    pub fn name(&self) -> &str {
        match self {
            Attr::Simple { name, .. } | Attr::Complex { name, .. } => name,
        }
    }
}

impl Group {
    pub fn simple(&self, name: &str) -> Option<&str> {
        self.attrs.iter().find_map(|a| match a {
            Attr::Simple { name: n, value, .. } if n == name => Some(value.as_str()),
            _ => None,
        })
    }

    pub fn complex(&self, name: &str) -> Option<&[String]> {
        self.attrs.iter().find_map(|a| match a {
            Attr::Complex { name: n, values, .. } if n == name => Some(values.as_slice()),
            _ => None,
        })
    }

    pub fn subgroups<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a Group> + 'a {
        self.groups.iter().filter(move |g| g.kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Colon,
    Semi,
    Comma,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Word(w) => format!("'{w}'"),
        Tok::Str(s) => format!("\"{s}\""),
        Tok::LBrace => "'{'".into(),
        Tok::RBrace => "'}'".into(),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::Colon => "':'".into(),
        Tok::Semi => "';'".into(),
        Tok::Comma => "','".into(),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, LibertyError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut line = 1;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '\n' => {
                line += 1;
                i += 1;
            }
            c if c.is_whitespace() => i += 1,
            '\\' => {
                // line continuation
                i += 1;
            }
            '/' if chars.get(i + 1) == Some(&'*') => {
                let start_line = line;
                i += 2;
                loop {
                    match chars.get(i) {
                        None => {
                            return Err(LibertyError::Syntax {
                                line: start_line,
                                expected: "end of comment '*/'".into(),
                            })
                        }
                        Some('*') if chars.get(i + 1) == Some(&'/') => {
                            i += 2;
                            break;
                        }
                        Some('\n') => {
                            line += 1;
                            i += 1;
                        }
                        Some(_) => i += 1,
                    }
                }
            }
            '/' if chars.get(i + 1) == Some(&'/') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '"' => {
                let start_line = line;
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err(LibertyError::Syntax { line: start_line, expected: "closing '\"'".into() }),
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some('\\') => {
                            // backslash-newline inside strings is a continuation
                            match chars.get(i + 1) {
                                Some('\n') => {
                                    line += 1;
                                    i += 2;
                                }
                                Some('\r') if chars.get(i + 2) == Some(&'\n') => {
                                    line += 1;
                                    i += 3;
                                }
                                Some(&n) => {
                                    s.push(n);
                                    i += 2;
                                }
                                None => i += 1,
                            }
                        }
                        Some('\n') => {
                            line += 1;
                            s.push('\n');
                            i += 1;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                out.push((Tok::Str(s), start_line));
            }
            '{' | '}' | '(' | ')' | ':' | ';' | ',' => {
                let t = match c {
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ':' => Tok::Colon,
                    ';' => Tok::Semi,
                    _ => Tok::Comma,
                };
                out.push((t, line));
                i += 1;
            }
            _ => {
                let start = i;
                while i < chars.len() {
                    let c = chars[i];
                    if c.is_whitespace() || "{}():;,\"\\".contains(c) {
                        break;
                    }
                    if c == '/' && matches!(chars.get(i + 1), Some('*') | Some('/')) {
                        break;
                    }
                    i += 1;
                }
                out.push((Tok::Word(chars[start..i].iter().collect()), line));
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn line(&self) -> usize {
        self.toks.get(self.pos).or_else(|| self.toks.last()).map_or(1, |(_, l)| *l)
    }

    fn err(&self, expected: &str) -> LibertyError {
        let found = self.peek().map_or("end of input".to_string(), describe);
        LibertyError::Syntax { line: self.line(), expected: format!("{expected}, found {found}") }
    }

    fn expect(&mut self, t: Tok) -> Result<(), LibertyError> {
        if self.peek() == Some(&t) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&describe(&t)))
        }
    }

    fn word(&mut self) -> Result<String, LibertyError> {
        match self.peek().cloned() {
            Some(Tok::Word(w)) => {
                self.pos += 1;
                Ok(w)
            }
            _ => Err(self.err("identifier")),
        }
    }

    fn skip_semi(&mut self) {
        if self.peek() == Some(&Tok::Semi) {
            self.pos += 1;
        }
    }

    fn args(&mut self) -> Result<Vec<String>, LibertyError> {
        self.expect(Tok::LParen)?;
        let mut out = Vec::new();
        loop {
            match self.peek().cloned() {
                Some(Tok::RParen) => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some(Tok::Comma) => self.pos += 1,
                Some(Tok::Word(w)) => {
                    // consecutive bare words inside parens form one value, e.g. `(1, ff)`
                    self.pos += 1;
                    let mut v = w;
                    while let Some(Tok::Word(next)) = self.peek().cloned() {
                        self.pos += 1;
                        v.push(' ');
                        v.push_str(&next);
                    }
                    out.push(v);
                }
                Some(Tok::Str(s)) => {
                    self.pos += 1;
                    out.push(s);
                }
                _ => return Err(self.err("value, ',' or ')'")),
            }
        }
    }

    fn body(&mut self, group: &mut Group) -> Result<(), LibertyError> {
        loop {
            match self.peek() {
                Some(Tok::RBrace) => {
                    self.pos += 1;
                    return Ok(());
                }
                Some(Tok::Semi) => self.pos += 1,
                None => return Err(self.err("'}'")),
                _ => self.statement(group)?,
            }
        }
    }

    fn statement(&mut self, parent: &mut Group) -> Result<(), LibertyError> {
        let line = self.line();
        let name = self.word()?;
        match self.peek() {
            Some(Tok::Colon) => {
                self.pos += 1;
                let mut parts = Vec::new();
                loop {
                    // a missing ';' is tolerated at end of line
                    if !parts.is_empty() && self.line() > line && self.peek() != Some(&Tok::Semi) {
                        break;
                    }
                    match self.peek().cloned() {
                        Some(Tok::Word(w)) => {
                            self.pos += 1;
                            parts.push(w);
                        }
                        Some(Tok::Str(s)) => {
                            self.pos += 1;
                            parts.push(s);
                        }
                        Some(Tok::Semi) => {
                            self.pos += 1;
                            break;
                        }
                        Some(Tok::RBrace) if !parts.is_empty() => break,
                        _ => return Err(self.err("attribute value or ';'")),
                    }
                }
                if parts.is_empty() {
                    return Err(LibertyError::Syntax { line, expected: format!("value for attribute '{name}'") });
                }
                parent.attrs.push(Attr::Simple { name, value: parts.join(" "), line });
            }
            Some(Tok::LParen) => {
                let args = self.args()?;
                if self.peek() == Some(&Tok::LBrace) {
                    self.pos += 1;
                    let mut g = Group { kind: name, args, attrs: vec![], groups: vec![], line };
                    self.body(&mut g)?;
                    parent.groups.push(g);
                } else {
                    self.skip_semi();
                    parent.attrs.push(Attr::Complex { name, values: args, line });
                }
            }
            _ => return Err(self.err("':' or '('")),
        }
        Ok(())
    }
}

/// Parses Liberty text into its top-level groups (normally a single `library`).
pub fn parse_groups(text: &str) -> Result<Vec<Group>, LibertyError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let mut root = Group { kind: String::new(), args: vec![], attrs: vec![], groups: vec![], line: 0 };
    while p.peek().is_some() {
        if p.peek() == Some(&Tok::Semi) {
            p.pos += 1;
            continue;
        }
        let line = p.line();
        let kind = p.word()?;
        let args = p.args()?;
        p.expect(Tok::LBrace)?;
        let mut g = Group { kind, args, attrs: vec![], groups: vec![], line };
        p.body(&mut g)?;
        root.groups.push(g);
    }
    Ok(root.groups)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_groups_and_attrs() {
        let text = r#"
            /* header */
            library (demo) {
              time_unit : "1ps" ;
              capacitive_load_unit (1, ff);
              cell (INVx1) {
                area : 0.1;  // trailing comment
                pin (Y) { direction : output; function : "(!A)"; }
              }
            }
        "#;
        let groups = parse_groups(text).unwrap();
        assert_eq!(groups.len(), 1);
        let lib = &groups[0];
        assert_eq!(lib.kind, "library");
        assert_eq!(lib.args, vec!["demo"]);
        assert_eq!(lib.simple("time_unit"), Some("1ps"));
        assert_eq!(lib.complex("capacitive_load_unit").unwrap(), &["1", "ff"]);
        let cell = lib.subgroups("cell").next().unwrap();
        assert_eq!(cell.line, 6);
        let pin = cell.subgroups("pin").next().unwrap();
        assert_eq!(pin.simple("function"), Some("(!A)"));
    }

    #[test]
    fn continuation_in_values() {
        let text = "library(x) { t(a) { values(\"1, 2\", \\\n \"3, 4\"); } }";
        let groups = parse_groups(text).unwrap();
        let t = &groups[0].groups[0];
        assert_eq!(t.complex("values").unwrap(), &["1, 2", "3, 4"]);
    }

    #[test]
    fn syntax_error_reports_line() {
        let text = "library(x) {\n cell(A) {\n area : ;\n }\n}";
        match parse_groups(text) {
            Err(LibertyError::Syntax { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_groups("library(x) { cell(A) {"), Err(LibertyError::Syntax { .. })));
        assert!(matches!(parse_groups("library(x) { \"oops\" }"), Err(LibertyError::Syntax { .. })));
    }
}
