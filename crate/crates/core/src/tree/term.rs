//! Term syntax for trees: `a(b,@id="1","text")`.

use std::fmt;

use super::{Label, ModelError, Tree};

pub(crate) fn write_quoted(f: &mut impl fmt::Write, s: &str) -> fmt::Result {
    f.write_char('"')?;
    for ch in s.chars() {
        match ch {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            c => f.write_char(c)?,
        }
    }
    f.write_char('"')
}

/// Double-quoted form of a data value, with backslash escapes.
pub fn term_quote(s: &str) -> String {
    let mut out = String::new();
    write_quoted(&mut out, s).expect("writing to a String cannot fail");
    out
}

pub(crate) fn parse_tree(text: &str) -> Result<Tree, ModelError> {
    let mut p = Lexer { src: text, pos: 0 };
    p.skip_ws();
    let tree = p.element()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(tree)
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn error(&self, message: &str) -> ModelError {
        ModelError::Syntax {
            pos: self.pos,
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn name(&mut self) -> Result<&'a str, ModelError> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = scan_name(rest);
        if len == 0 {
            return Err(self.error("expected a name"));
        }
        self.pos += len;
        Ok(&rest[..len])
    }

    fn string(&mut self) -> Result<String, ModelError> {
        self.skip_ws();
        if self.peek() != Some('"') {
            return Err(self.error("expected a quoted string"));
        }
        let start = self.pos;
        self.pos += 1;
        let mut out = String::new();
        loop {
            let Some(c) = self.peek() else {
                self.pos = start;
                return Err(self.error("unterminated string"));
            };
            self.pos += c.len_utf8();
            match c {
                '"' => return Ok(out),
                '\\' => {
                    let Some(e) = self.peek() else {
                        return Err(self.error("dangling escape"));
                    };
                    self.pos += e.len_utf8();
                    out.push(match e {
                        'n' => '\n',
                        't' => '\t',
                        other => other,
                    });
                }
                c => out.push(c),
            }
        }
    }

    fn element(&mut self) -> Result<Tree, ModelError> {
        let name = self.name()?.to_string();
        let mut children = Vec::new();
        if self.eat('(') {
            loop {
                children.push(self.child()?);
                if self.eat(',') {
                    continue;
                }
                if self.eat(')') {
                    break;
                }
                return Err(self.error("expected `,` or `)`"));
            }
        }
        Tree::element(name, children)
    }

    fn child(&mut self) -> Result<Tree, ModelError> {
        self.skip_ws();
        match self.peek() {
            Some('@') => {
                self.pos += 1;
                let name = self.name()?.to_string();
                if !self.eat('=') {
                    return Err(self.error("expected `=` after attribute name"));
                }
                let value = self.string()?;
                Ok(Tree::leaf(Label::Attribute { name, value }))
            }
            Some('"') => Ok(Tree::leaf(Label::Text(self.string()?))),
            _ => self.element(),
        }
    }
}

/// Length in bytes of the longest `[A-Za-z_][A-Za-z0-9_]*` prefix.
pub(crate) fn scan_name(s: &str) -> usize {
    let mut len = 0;
    for (i, c) in s.char_indices() {
        let ok = c == '_' || c.is_ascii_alphabetic() || (i > 0 && c.is_ascii_digit());
        if !ok {
            break;
        }
        len = i + 1;
    }
    len
}
