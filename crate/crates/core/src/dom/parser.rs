use super::{DomTree, Element, NodeId, NodeKind, TreeBuilder};

pub(super) const VOID_TAGS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source",
    "track", "wbr",
];

/// Start tags that implicitly close an open `<p>`.
const CLOSES_P: &[&str] = &[
    "address", "article", "aside", "blockquote", "details", "div", "dl", "fieldset", "figcaption",
    "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr", "main", "menu",
    "nav", "ol", "p", "pre", "section", "table", "ul",
];

const HEADINGS: &[&str] = &["h1", "h2", "h3", "h4", "h5", "h6"];

/// Parses HTML leniently. Never fails: unknown constructs degrade to text,
/// unmatched end tags are dropped and open elements are closed at EOF.
pub fn parse_html(html: &str) -> DomTree {
    let mut p = Parser {
        src: html,
        pos: 0,
        builder: TreeBuilder::new(),
        stack: vec![(0, String::new())],
    };
    p.run();
    p.builder.finish()
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    builder: TreeBuilder,
    /// Open elements as (node id, tag); entry 0 is the document root.
    stack: Vec<(NodeId, String)>,
}

impl<'a> Parser<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn current(&self) -> NodeId {
        self.stack.last().expect("root never popped").0
    }

    fn run(&mut self) {
        while self.pos < self.src.len() {
            let rest = self.rest();
            let Some(lt) = rest.find('<') else {
                self.text(rest);
                self.pos = self.src.len();
                break;
            };
            if lt > 0 {
                self.text(&rest[..lt]);
                self.pos += lt;
            }
            self.markup();
        }
    }

    fn text(&mut self, raw: &str) {
        let decoded = html_escape::decode_html_entities(raw);
        let parent = self.current();
        self.builder.push_text(parent, &decoded);
    }

    /// Handles the construct starting at a '<'.
    fn markup(&mut self) {
        let rest = self.rest();
        let bytes = rest.as_bytes();
        if let Some(body) = rest.strip_prefix("<!--") {
            let (content, consumed) = match body.find("-->") {
                Some(end) => (&body[..end], 4 + end + 3),
                None => (body, rest.len()),
            };
            let parent = self.current();
            self.builder.push(parent, NodeKind::Comment(content.to_string()));
            self.pos += consumed;
        } else if let Some(body) = rest.strip_prefix("<![CDATA[") {
            let (content, consumed) = match body.find("]]>") {
                Some(end) => (&body[..end], 9 + end + 3),
                None => (body, rest.len()),
            };
            let parent = self.current();
            self.builder.push_text(parent, content);
            self.pos += consumed;
        } else if rest.starts_with("<!") || rest.starts_with("<?") {
            self.pos += rest.find('>').map_or(rest.len(), |i| i + 1);
        } else if bytes.len() > 2 && bytes[1] == b'/' && bytes[2].is_ascii_alphabetic() {
            self.end_tag();
        } else if bytes.len() > 1 && bytes[1].is_ascii_alphabetic() {
            self.start_tag();
        } else {
            self.text("<");
            self.pos += 1;
        }
    }

    fn end_tag(&mut self) {
        let rest = self.rest();
        let name_end = rest[2..]
            .find(|c: char| c.is_ascii_whitespace() || c == '>' || c == '/')
            .map_or(rest.len(), |i| i + 2);
        let tag = rest[2..name_end].to_ascii_lowercase();
        self.pos += rest[name_end..].find('>').map_or(rest.len(), |i| name_end + i + 1);
        if let Some(idx) = self.stack.iter().rposition(|(_, t)| *t == tag) {
            if idx > 0 {
                self.stack.truncate(idx);
            }
        }
    }

    fn start_tag(&mut self) {
        let rest = self.rest();
        let mut cur = Cursor { s: rest, i: 1 };
        let tag = cur
            .take_while(|c| !c.is_ascii_whitespace() && c != '>' && c != '/')
            .to_ascii_lowercase();
        let mut attrs: Vec<(String, String)> = Vec::new();
        let mut self_closing = false;
        loop {
            cur.skip_ws();
            match cur.peek() {
                None => break,
                Some('>') => {
                    cur.i += 1;
                    break;
                }
                Some('/') => {
                    cur.i += 1;
                    cur.skip_ws();
                    if cur.peek() == Some('>') {
                        self_closing = true;
                        cur.i += 1;
                        break;
                    }
                }
                Some(_) => {
                    let name = cur
                        .take_while(|c| !c.is_ascii_whitespace() && c != '>' && c != '/' && c != '=')
                        .to_ascii_lowercase();
                    if name.is_empty() {
                        // a lone '=' or similar junk
                        cur.i += 1;
                        continue;
                    }
                    cur.skip_ws();
                    let mut value = String::new();
                    if cur.peek() == Some('=') {
                        cur.i += 1;
                        cur.skip_ws();
                        let raw = match cur.peek() {
                            Some(q @ ('"' | '\'')) => {
                                cur.i += 1;
                                let v = cur.take_while(|c| c != q);
                                cur.i = (cur.i + 1).min(cur.s.len());
                                v
                            }
                            _ => cur.take_while(|c| !c.is_ascii_whitespace() && c != '>'),
                        };
                        value = html_escape::decode_html_entities(raw).into_owned();
                    }
                    if !attrs.iter().any(|(k, _)| *k == name) {
                        attrs.push((name, value));
                    }
                }
            }
        }
        self.pos += cur.i;

        self.implied_end_tags(&tag);
        let parent = self.current();
        let void = VOID_TAGS.contains(&tag.as_str());
        let raw_text = matches!(tag.as_str(), "script" | "style" | "title" | "textarea");
        let id = self.builder.push(parent, NodeKind::Element(Element { tag: tag.clone(), attrs }));
        if void || self_closing {
            return;
        }
        if raw_text {
            self.raw_text_content(id, &tag);
            return;
        }
        self.stack.push((id, tag));
    }

    /// Consumes everything up to the matching end tag as one text child.
    /// `title` and `textarea` get entity decoding; `script` and `style` do not.
    fn raw_text_content(&mut self, id: NodeId, tag: &str) {
        let rest = self.rest();
        let close = format!("</{tag}");
        let end = find_ascii_ci(rest, &close).unwrap_or(rest.len());
        let content = &rest[..end];
        if matches!(tag, "title" | "textarea") {
            let decoded = html_escape::decode_html_entities(content);
            self.builder.push_text(id, &decoded);
        } else {
            self.builder.push_text(id, content);
        }
        self.pos += end;
        let after = self.rest();
        self.pos += after.find('>').map_or(after.len(), |i| i + 1);
    }

    /// Closes elements that a new `tag` start tag implicitly terminates.
    fn implied_end_tags(&mut self, tag: &str) {
        if CLOSES_P.contains(&tag) {
            self.close_within("p", &["table", "td", "th", "caption", "button", "li", "dd", "dt"]);
        }
        if HEADINGS.contains(&tag) {
            if let Some((_, top)) = self.stack.last() {
                if HEADINGS.contains(&top.as_str()) {
                    self.stack.pop();
                }
            }
        }
        match tag {
            "li" => self.close_within("li", &["ul", "ol", "menu"]),
            "dt" | "dd" => {
                self.close_within("dt", &["dl"]);
                self.close_within("dd", &["dl"]);
            }
            "tr" => self.close_within("tr", &["table", "thead", "tbody", "tfoot"]),
            "td" | "th" => {
                self.close_within("td", &["tr", "table"]);
                self.close_within("th", &["tr", "table"]);
            }
            "thead" | "tbody" | "tfoot" => {
                for t in ["thead", "tbody", "tfoot"] {
                    self.close_within(t, &["table"]);
                }
            }
            "option" => self.close_within("option", &["select", "datalist"]),
            _ => {}
        }
    }

    /// Pops up to and including the nearest open `tag`, unless a boundary
    /// element is met first.
    fn close_within(&mut self, tag: &str, boundaries: &[&str]) {
        for idx in (1..self.stack.len()).rev() {
            let open = self.stack[idx].1.as_str();
            if open == tag {
                self.stack.truncate(idx);
                return;
            }
            if boundaries.contains(&open) {
                return;
            }
        }
    }
}

struct Cursor<'a> {
    s: &'a str,
    i: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.s[self.i..].chars().next()
    }

    fn skip_ws(&mut self) {
        self.take_while(|c| c.is_whitespace());
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> &'a str {
        let start = self.i;
        let len = self.s[start..]
            .char_indices()
            .find(|&(_, c)| !pred(c))
            .map_or(self.s.len() - start, |(i, _)| i);
        self.i += len;
        &self.s[start..start + len]
    }
}

fn find_ascii_ci(haystack: &str, needle: &str) -> Option<usize> {
    let h = haystack.as_bytes();
    let n = needle.as_bytes();
    if n.len() > h.len() {
        return None;
    }
    (0..=h.len() - n.len()).find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}
