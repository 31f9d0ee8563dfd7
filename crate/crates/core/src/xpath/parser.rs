//! Recursive-descent parser for abbreviated downward XPath.
//!
//! ```text
//! path   := ("/" | "//")? step (("/" | "//") step)*
//! step   := (AXIS "::" test | "@" test | test) ("[" filter "]")*
//! test   := NAME | "*" | "text()"
//! filter := atom ("and" atom)*
//! atom   := "(" filter ")" | "true()" | "@" NAME "=" value | path
//! value  := STRING | "$" NAME
//! ```

use super::ast::{AttrValue, Axis, FilterExpr, NodeTest, PathExpr, Step};
use super::XPathError;
use crate::tree::scan_name;

pub fn parse_path(text: &str) -> Result<PathExpr, XPathError> {
    let mut p = Parser { src: text, pos: 0 };
    p.skip_ws();
    if p.at_end() {
        return Err(XPathError::Empty);
    }
    let path = p.path()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(path)
}

pub fn parse_filter(text: &str) -> Result<FilterExpr, XPathError> {
    let mut p = Parser { src: text, pos: 0 };
    let q = p.filter()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(q)
}

pub(crate) fn parse_node_test(text: &str) -> Result<NodeTest, XPathError> {
    let mut p = Parser { src: text, pos: 0 };
    let (test, _) = p.test(Axis::Child)?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(test)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, message: impl Into<String>) -> XPathError {
        XPathError::Syntax {
            pos: self.pos,
            message: message.into(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn looking_at(&mut self, token: &str) -> bool {
        self.skip_ws();
        self.rest().starts_with(token)
    }

    fn eat(&mut self, token: &str) -> bool {
        if self.looking_at(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<(), XPathError> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{token}`")))
        }
    }

    fn name(&mut self) -> Result<&'a str, XPathError> {
        self.skip_ws();
        let len = scan_name(self.rest());
        if len == 0 {
            return Err(self.error("expected a name"));
        }
        let name = &self.rest()[..len];
        self.pos += len;
        Ok(name)
    }

    /// Peeks a NAME followed by `token`, without consuming input.
    fn name_followed_by(&mut self, token: &str) -> Option<&'a str> {
        self.skip_ws();
        let len = scan_name(self.rest());
        if len == 0 {
            return None;
        }
        let after = self.rest()[len..].trim_start();
        after.starts_with(token).then(|| &self.rest()[..len])
    }

    fn path(&mut self) -> Result<PathExpr, XPathError> {
        let mut steps = Vec::new();
        let mut descendant = if self.eat("//") {
            true
        } else {
            self.eat("/");
            false
        };
        loop {
            steps.push(self.step(descendant)?);
            if self.eat("//") {
                descendant = true;
            } else if self.eat("/") {
                descendant = false;
            } else {
                break;
            }
        }
        Ok(PathExpr::from_steps(&steps).expect("at least one step"))
    }

    fn step(&mut self, descendant: bool) -> Result<Step, XPathError> {
        self.skip_ws();
        let start = self.pos;
        let axis = if self.eat("@") {
            Some(Axis::Attribute)
        } else if let Some(name) = self.name_followed_by("::") {
            let axis = match name {
                "self" => Axis::SelfAxis,
                "child" => Axis::Child,
                "descendant" => Axis::Descendant,
                "attribute" => Axis::Attribute,
                other => {
                    return Err(XPathError::UnknownAxis {
                        pos: start,
                        name: other.to_string(),
                    })
                }
            };
            self.pos += name.len();
            self.expect("::")?;
            Some(axis)
        } else {
            None
        };
        if descendant && axis.is_some() {
            self.pos = start;
            return Err(self.error("`//` must be followed by a plain node test"));
        }
        let axis = axis.unwrap_or(if descendant { Axis::Descendant } else { Axis::Child });
        let (test, _) = self.test(axis)?;
        let mut step = Step::new(axis, test);
        while self.eat("[") {
            step.filters.push(self.filter()?);
            self.expect("]")?;
        }
        Ok(step)
    }

    fn test(&mut self, axis: Axis) -> Result<(NodeTest, usize), XPathError> {
        self.skip_ws();
        let start = self.pos;
        if self.eat("*") {
            return Ok((NodeTest::Wildcard, start));
        }
        if self.name_followed_by("(").is_some_and(|n| n == "text") {
            self.pos += "text".len();
            self.expect("(")?;
            self.expect(")")?;
            return Ok((NodeTest::Text, start));
        }
        let name = self.name()?.to_string();
        let test = match axis {
            Axis::Attribute => NodeTest::AttributeName(name),
            _ => NodeTest::ElementName(name),
        };
        Ok((test, start))
    }

    fn filter(&mut self) -> Result<FilterExpr, XPathError> {
        let mut parts = vec![self.atom()?];
        loop {
            self.skip_ws();
            let len = scan_name(self.rest());
            if &self.rest()[..len] != "and" {
                break;
            }
            self.pos += len;
            parts.push(self.atom()?);
        }
        let flat: Vec<FilterExpr> = parts
            .into_iter()
            .flat_map(|q| q.conjuncts().into_iter().cloned().collect::<Vec<_>>())
            .collect();
        Ok(FilterExpr::conjoin(flat).expect("nonempty"))
    }

    fn atom(&mut self) -> Result<FilterExpr, XPathError> {
        self.skip_ws();
        if self.at_end() {
            return Err(self.error("expected a filter"));
        }
        if self.eat("(") {
            let q = self.filter()?;
            self.expect(")")?;
            return Ok(q);
        }
        if self.name_followed_by("(").is_some_and(|n| n == "true") {
            self.pos += "true".len();
            self.expect("(")?;
            self.expect(")")?;
            return Ok(FilterExpr::True);
        }
        if self.looking_at("@") {
            let save = self.pos;
            self.pos += 1;
            if let Some(name) = self.name_followed_by("=") {
                self.pos += name.len();
                self.expect("=")?;
                let value = self.value()?;
                return Ok(FilterExpr::AttrEq {
                    name: name.to_string(),
                    value,
                });
            }
            self.pos = save;
        }
        Ok(FilterExpr::Exists(self.path()?))
    }

    fn value(&mut self) -> Result<AttrValue, XPathError> {
        self.skip_ws();
        if self.eat("$") {
            return Ok(AttrValue::Param(self.name()?.to_string()));
        }
        if !self.rest().starts_with('"') {
            return Err(self.error("expected a quoted string or `$name`"));
        }
        let start = self.pos;
        self.pos += 1;
        let mut out = String::new();
        let mut chars = self.rest().char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '"' => {
                    self.pos += i + 1;
                    return Ok(AttrValue::Literal(out));
                }
                '\\' => match chars.next() {
                    Some((_, 'n')) => out.push('\n'),
                    Some((_, 't')) => out.push('\t'),
                    Some((_, e)) => out.push(e),
                    None => break,
                },
                c => out.push(c),
            }
        }
        self.pos = start;
        Err(self.error("unterminated string"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn child(n: &str) -> PathExpr {
        PathExpr::child(n)
    }

    #[test]
    fn expands_abbreviations() {
        let p = parse_path("/a//b[*/@d]").unwrap();
        let filter = FilterExpr::Exists(
            PathExpr::step(Axis::Child, NodeTest::Wildcard).then(PathExpr::step(
                Axis::Attribute,
                NodeTest::AttributeName("d".into()),
            )),
        );
        let expected = PathExpr::Seq(
            Box::new(child("a")),
            Box::new(PathExpr::Filtered(
                Box::new(PathExpr::descendant("b")),
                Box::new(filter),
            )),
        );
        assert_eq!(p, expected);
        assert_eq!(parse_path("/a").unwrap(), child("a"));
        assert_eq!(parse_path("a").unwrap(), child("a"));
        assert_eq!(
            parse_path("a[b and c]").unwrap(),
            PathExpr::Filtered(
                Box::new(child("a")),
                Box::new(FilterExpr::And(
                    Box::new(FilterExpr::Exists(child("b"))),
                    Box::new(FilterExpr::Exists(child("c")))
                ))
            )
        );
    }

    #[test]
    fn explicit_axes_and_tests() {
        assert_eq!(
            parse_path("child::a/descendant::*/self::b").unwrap().to_string(),
            "/a//*/self::b"
        );
        assert_eq!(
            parse_path("attribute::id").unwrap(),
            PathExpr::step(Axis::Attribute, NodeTest::AttributeName("id".into()))
        );
        assert_eq!(parse_path("//text()").unwrap().to_string(), "//text()");
        assert_eq!(
            parse_path(r#"//patient[@wardNo=$wn and treatment]"#).unwrap().to_string(),
            "//patient[@wardNo=$wn and treatment]"
        );
        assert_eq!(
            parse_path(r#"a[(b and c) and @x="q\"r"]"#).unwrap().to_string(),
            r#"/a[b and c and @x="q\"r"]"#
        );
        assert_eq!(parse_path("a[true()]").unwrap().to_string(), "/a[true()]");
        assert_eq!(parse_path("a[//b][/c]").unwrap().to_string(), "/a[//b][c]");
    }

    #[test]
    fn reports_errors() {
        assert_eq!(parse_path(""), Err(XPathError::Empty));
        assert_eq!(parse_path("  "), Err(XPathError::Empty));
        assert!(matches!(parse_path("/a["), Err(XPathError::Syntax { pos: 3, .. })));
        assert!(matches!(
            parse_path("/a/parent::b"),
            Err(XPathError::UnknownAxis { pos: 3, .. })
        ));
        assert!(matches!(parse_path("/a/"), Err(XPathError::Syntax { pos: 3, .. })));
        assert!(matches!(parse_path("a b"), Err(XPathError::Syntax { pos: 2, .. })));
        assert!(parse_path("//child::a").is_err());
        assert!(parse_path(r#"a[@x="open]"#).is_err());
    }

    #[test]
    fn node_tests() {
        assert_eq!(parse_node_test("*").unwrap(), NodeTest::Wildcard);
        assert_eq!(parse_node_test("text()").unwrap(), NodeTest::Text);
        assert_eq!(parse_node_test(" b ").unwrap(), NodeTest::element("b"));
        assert!(parse_node_test("b c").is_err());
    }
}
