//! Lenient HTML parser producing a DOM with byte offsets into the source.
//!
//! The tree builder follows the common HTML5 error-recovery rules that matter
//! for table extraction: void elements, raw-text elements (`script`, `style`,
//! `title`, `textarea`), implied end tags for paragraphs, list items and table
//! parts, and end tags that are ignored when no matching element is open in
//! scope. It never fails.
//!
//! Every node carries `[start, end)` byte offsets. For elements `start` is the
//! `<` of the open tag and `end` is one past the `>` of the close tag, or the
//! start of the token that implicitly closed it.

use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    /// Synthetic document root spanning the whole source.
    Root,
    Element {
        tag: String,
        attrs: Vec<(String, String)>,
    },
    Text(String),
    Comment(String),
    Doctype(String),
}

#[derive(Debug, Clone)]
pub struct Node {
    pub kind: NodeKind,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub start: usize,
    pub end: usize,
}

impl Node {
    pub fn tag(&self) -> Option<&str> {
        match &self.kind {
            NodeKind::Element { tag, .. } => Some(tag),
            _ => None,
        }
    }

    pub fn is_element(&self, name: &str) -> bool {
        self.tag() == Some(name)
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        match &self.kind {
            NodeKind::Element { attrs, .. } => attrs
                .iter()
                .find(|(k, _)| k == name)
                .map(|(_, v)| v.as_str()),
            _ => None,
        }
    }

    pub fn span_len(&self) -> usize {
        self.end - self.start
    }
}

#[derive(Debug, Clone)]
pub struct DomTree {
    nodes: Vec<Node>,
    source_len: usize,
}

const VOID_ELEMENTS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source",
    "track", "wbr",
];

const RAW_TEXT_ELEMENTS: &[&str] = &["script", "style", "title", "textarea", "xmp"];

/// Start tags that close an open `<p>`.
const CLOSES_P: &[&str] = &[
    "address",
    "article",
    "aside",
    "blockquote",
    "div",
    "dl",
    "fieldset",
    "figure",
    "footer",
    "form",
    "h1",
    "h2",
    "h3",
    "h4",
    "h5",
    "h6",
    "header",
    "hr",
    "main",
    "nav",
    "ol",
    "p",
    "pre",
    "section",
    "table",
    "ul",
];

const HEADINGS: &[&str] = &["h1", "h2", "h3", "h4", "h5", "h6"];

/// Elements that bound the search for a matching end tag.
const SCOPE_BOUNDARIES: &[&str] = &["table", "td", "th", "caption", "html", "template"];

pub fn is_void(tag: &str) -> bool {
    VOID_ELEMENTS.contains(&tag)
}

impl DomTree {
    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() == 1 && self.nodes[0].children.is_empty()
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }

    /// All node ids in document (pre-)order.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        self.collect_preorder(self.root(), &mut out);
        out
    }

    fn collect_preorder(&self, id: NodeId, out: &mut Vec<NodeId>) {
        let mut stack = vec![id];
        while let Some(cur) = stack.pop() {
            out.push(cur);
            for &child in self.node(cur).children.iter().rev() {
                stack.push(child);
            }
        }
    }

    /// Descendants of `id` (excluding `id`) in document order.
    pub fn descendants(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        self.collect_preorder(id, &mut out);
        out.remove(0);
        out
    }

    pub fn elements_by_tag(&self, tag: &str) -> Vec<NodeId> {
        self.preorder()
            .into_iter()
            .filter(|&id| self.node(id).is_element(tag))
            .collect()
    }

    pub fn ancestors(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut cur = self.node(id).parent;
        while let Some(p) = cur {
            out.push(p);
            cur = self.node(p).parent;
        }
        out
    }

    pub fn is_ancestor(&self, ancestor: NodeId, id: NodeId) -> bool {
        self.ancestors(id).contains(&ancestor)
    }

    /// Lowest common ancestor; a node is its own ancestor here.
    pub fn lowest_common_ancestor(&self, a: NodeId, b: NodeId) -> NodeId {
        let mut chain_a = vec![a];
        chain_a.extend(self.ancestors(a));
        let mut cur = Some(b);
        while let Some(id) = cur {
            if chain_a.contains(&id) {
                return id;
            }
            cur = self.node(id).parent;
        }
        self.root()
    }

    /// Visible text beneath `id`: text nodes concatenated, skipping script,
    /// style, comments and head-only content. Not whitespace-normalized.
    pub fn text_content(&self, id: NodeId) -> String {
        let mut out = String::new();
        self.push_text(id, &mut out, &|_| false);
        out
    }

    /// Like [`text_content`](Self::text_content) but does not descend into
    /// elements for which `skip` returns true.
    pub fn text_content_skipping(&self, id: NodeId, skip: &dyn Fn(&Node) -> bool) -> String {
        let mut out = String::new();
        self.push_text(id, &mut out, skip);
        out
    }

    fn push_text(&self, id: NodeId, out: &mut String, skip: &dyn Fn(&Node) -> bool) {
        let node = self.node(id);
        match &node.kind {
            NodeKind::Text(t) => out.push_str(t),
            NodeKind::Element { tag, .. } => {
                if matches!(tag.as_str(), "script" | "style" | "template") || skip(node) {
                    return;
                }
                if tag == "br" {
                    out.push(' ');
                }
                for &c in &node.children {
                    self.push_text(c, out, skip);
                }
                // Block boundaries separate words.
                if !is_inline(tag) {
                    out.push(' ');
                }
            }
            NodeKind::Root => {
                for &c in &node.children {
                    self.push_text(c, out, skip);
                }
            }
            NodeKind::Comment(_) | NodeKind::Doctype(_) => {}
        }
    }

    /// Re-serializes the tree as HTML with every element explicitly closed.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for &c in &self.node(self.root()).children {
            self.serialize_node(c, &mut out);
        }
        out
    }

    fn serialize_node(&self, id: NodeId, out: &mut String) {
        let node = self.node(id);
        match &node.kind {
            NodeKind::Root => {}
            NodeKind::Text(t) => {
                let raw_parent = node
                    .parent
                    .and_then(|p| self.node(p).tag())
                    .map_or(false, |t| matches!(t, "script" | "style" | "xmp"));
                if raw_parent {
                    out.push_str(t);
                } else {
                    escape_into(t, out, false);
                }
            }
            NodeKind::Comment(c) => {
                let _ = write!(out, "<!--{c}-->");
            }
            NodeKind::Doctype(d) => {
                let _ = write!(out, "<!{d}>");
            }
            NodeKind::Element { tag, attrs } => {
                out.push('<');
                out.push_str(tag);
                for (k, v) in attrs {
                    out.push(' ');
                    out.push_str(k);
                    out.push_str("=\"");
                    escape_into(v, out, true);
                    out.push('"');
                }
                out.push('>');
                if is_void(tag) {
                    return;
                }
                for &c in &node.children {
                    self.serialize_node(c, out);
                }
                let _ = write!(out, "</{tag}>");
            }
        }
    }
}

fn is_inline(tag: &str) -> bool {
    matches!(
        tag,
        "a" | "abbr"
            | "b"
            | "bdi"
            | "bdo"
            | "cite"
            | "code"
            | "data"
            | "dfn"
            | "em"
            | "font"
            | "i"
            | "kbd"
            | "mark"
            | "q"
            | "s"
            | "samp"
            | "small"
            | "span"
            | "strong"
            | "sub"
            | "sup"
            | "time"
            | "u"
            | "var"
            | "nobr"
    )
}

fn escape_into(text: &str, out: &mut String, attr: bool) {
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' if attr => out.push_str("&quot;"),
            '\u{a0}' => out.push_str("&nbsp;"),
            c => out.push(c),
        }
    }
}

/// Decodes the common named entities and all numeric character references.
pub fn decode_entities(text: &str) -> String {
    if !text.contains('&') {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        rest = &rest[pos..];
        match decode_one(rest) {
            Some((ch, used)) => {
                out.push(ch);
                rest = &rest[used..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn decode_one(s: &str) -> Option<(char, usize)> {
    let end = s[1..].find(|c: char| !(c.is_ascii_alphanumeric() || c == '#'))? + 1;
    if end > 12 || !s[end..].starts_with(';') {
        return None;
    }
    let name = &s[1..end];
    let ch = if let Some(num) = name.strip_prefix('#') {
        let code = if let Some(hex) = num.strip_prefix('x').or_else(|| num.strip_prefix('X')) {
            u32::from_str_radix(hex, 16).ok()?
        } else {
            num.parse::<u32>().ok()?
        };
        char::from_u32(code).unwrap_or('\u{fffd}')
    } else {
        match name {
            "amp" => '&',
            "lt" => '<',
            "gt" => '>',
            "quot" => '"',
            "apos" => '\'',
            "nbsp" => '\u{a0}',
            "ndash" => '\u{2013}',
            "mdash" => '\u{2014}',
            "copy" => '\u{a9}',
            "reg" => '\u{ae}',
            "deg" => '\u{b0}',
            "middot" => '\u{b7}',
            "hellip" => '\u{2026}',
            "lsquo" => '\u{2018}',
            "rsquo" => '\u{2019}',
            "ldquo" => '\u{201c}',
            "rdquo" => '\u{201d}',
            "euro" => '\u{20ac}',
            "pound" => '\u{a3}',
            "times" => '\u{d7}',
            _ => return None,
        }
    };
    Some((ch, end + 1))
}

enum Token {
    Text {
        start: usize,
        end: usize,
    },
    Comment {
        start: usize,
        end: usize,
        body: String,
    },
    Doctype {
        start: usize,
        end: usize,
        body: String,
    },
    StartTag {
        start: usize,
        end: usize,
        name: String,
        attrs: Vec<(String, String)>,
        self_closing: bool,
    },
    EndTag {
        start: usize,
        end: usize,
        name: String,
    },
}

struct Tokenizer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    /// Pending raw-text element name; the next token is its raw content.
    raw_until: Option<String>,
}

impl<'a> Tokenizer<'a> {
    fn new(src: &'a str) -> Self {
        Tokenizer {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            raw_until: None,
        }
    }

    fn find_ci(&self, from: usize, needle: &str) -> Option<usize> {
        let hay = &self.bytes[from..];
        let n = needle.as_bytes();
        if hay.len() < n.len() {
            return None;
        }
        (0..=hay.len() - n.len())
            .find(|&i| hay[i..i + n.len()].eq_ignore_ascii_case(n))
            .map(|i| i + from)
    }

    fn next_token(&mut self) -> Option<Token> {
        if self.pos >= self.bytes.len() {
            return None;
        }
        if let Some(tag) = self.raw_until.take() {
            let start = self.pos;
            let close = format!("</{tag}");
            let end = self.find_ci(start, &close).unwrap_or(self.bytes.len());
            if end > start {
                self.pos = end;
                return Some(Token::Text { start, end });
            }
        }
        let start = self.pos;
        if self.bytes[start] == b'<' {
            if let Some(tok) = self.markup(start) {
                return Some(tok);
            }
        }
        // Text runs to the next '<' that begins markup.
        let mut end = start + 1;
        while end < self.bytes.len() {
            if self.bytes[end] == b'<' && self.looks_like_markup(end) {
                break;
            }
            end += 1;
        }
        while !self.src.is_char_boundary(end) {
            end += 1;
        }
        self.pos = end;
        Some(Token::Text { start, end })
    }

    fn looks_like_markup(&self, at: usize) -> bool {
        match self.bytes.get(at + 1) {
            Some(b'!') | Some(b'?') => true,
            Some(b'/') => self
                .bytes
                .get(at + 2)
                .map_or(false, |c| c.is_ascii_alphabetic()),
            Some(c) => c.is_ascii_alphabetic(),
            None => false,
        }
    }

    fn markup(&mut self, start: usize) -> Option<Token> {
        let b = self.bytes;
        if !self.looks_like_markup(start) {
            return None;
        }
        if self.src[start..].starts_with("<!--") {
            let body_start = start + 4;
            let (body_end, end) = match self.src[body_start..].find("-->") {
                Some(i) => (body_start + i, body_start + i + 3),
                None => (b.len(), b.len()),
            };
            self.pos = end;
            return Some(Token::Comment {
                start,
                end,
                body: self.src[body_start..body_end].to_string(),
            });
        }
        if b[start + 1] == b'!' || b[start + 1] == b'?' {
            let end = self.src[start..]
                .find('>')
                .map_or(b.len(), |i| start + i + 1);
            self.pos = end;
            let inner_end = if end > start + 2 && b[end - 1] == b'>' {
                end - 1
            } else {
                end
            };
            let body = self.src[start + 2..inner_end.max(start + 2)].to_string();
            if b[start + 1] == b'!' && body.len() >= 7 && body[..7].eq_ignore_ascii_case("doctype")
            {
                return Some(Token::Doctype { start, end, body });
            }
            return Some(Token::Comment { start, end, body });
        }
        if b[start + 1] == b'/' {
            let name_start = start + 2;
            let mut i = name_start;
            while i < b.len() && !b[i].is_ascii_whitespace() && b[i] != b'>' && b[i] != b'/' {
                i += 1;
            }
            let name = self.src[name_start..i].to_ascii_lowercase();
            let end = self.src[i..].find('>').map_or(b.len(), |j| i + j + 1);
            self.pos = end;
            return Some(Token::EndTag { start, end, name });
        }
        // Start tag.
        let mut i = start + 1;
        while i < b.len() && !b[i].is_ascii_whitespace() && b[i] != b'>' && b[i] != b'/' {
            i += 1;
        }
        let name = self.src[start + 1..i].to_ascii_lowercase();
        let mut attrs: Vec<(String, String)> = Vec::new();
        let mut self_closing = false;
        loop {
            while i < b.len() && b[i].is_ascii_whitespace() {
                i += 1;
            }
            if i >= b.len() {
                break;
            }
            if b[i] == b'>' {
                i += 1;
                break;
            }
            if b[i] == b'/' {
                i += 1;
                if i < b.len() && b[i] == b'>' {
                    self_closing = true;
                    i += 1;
                    break;
                }
                continue;
            }
            let an_start = i;
            while i < b.len()
                && !b[i].is_ascii_whitespace()
                && b[i] != b'>'
                && b[i] != b'='
                && !(b[i] == b'/' && b.get(i + 1) == Some(&b'>'))
            {
                i += 1;
            }
            if i == an_start {
                // Lone '=' or similar junk.
                i += 1;
                continue;
            }
            let aname = self.src[an_start..i].to_ascii_lowercase();
            while i < b.len() && b[i].is_ascii_whitespace() {
                i += 1;
            }
            let mut value = String::new();
            if i < b.len() && b[i] == b'=' {
                i += 1;
                while i < b.len() && b[i].is_ascii_whitespace() {
                    i += 1;
                }
                if i < b.len() && (b[i] == b'"' || b[i] == b'\'') {
                    let q = b[i];
                    let vs = i + 1;
                    let ve = b[vs..]
                        .iter()
                        .position(|&c| c == q)
                        .map_or(b.len(), |p| vs + p);
                    value = decode_entities(&self.src[vs..ve]);
                    i = (ve + 1).min(b.len());
                } else {
                    let vs = i;
                    while i < b.len() && !b[i].is_ascii_whitespace() && b[i] != b'>' {
                        i += 1;
                    }
                    value = decode_entities(&self.src[vs..i]);
                }
            }
            if !attrs.iter().any(|(k, _)| *k == aname) {
                attrs.push((aname, value));
            }
        }
        self.pos = i;
        if RAW_TEXT_ELEMENTS.contains(&name.as_str()) && !self_closing {
            self.raw_until = Some(name.clone());
        }
        Some(Token::StartTag {
            start,
            end: i,
            name,
            attrs,
            self_closing,
        })
    }
}

struct Builder {
    nodes: Vec<Node>,
    /// Open element stack; index 0 is the root.
    open: Vec<NodeId>,
}

impl Builder {
    fn current(&self) -> NodeId {
        *self.open.last().expect("root is always open")
    }

    fn tag_of(&self, id: NodeId) -> &str {
        self.nodes[id.0].tag().unwrap_or("")
    }

    fn append(&mut self, kind: NodeKind, start: usize, end: usize) -> NodeId {
        let parent = self.current();
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            kind,
            parent: Some(parent),
            children: Vec::new(),
            start,
            end,
        });
        self.nodes[parent.0].children.push(id);
        id
    }

    /// Pops elements down to and including the element at stack index `idx`,
    /// closing each at `at`, except the last which closes at `last_end`.
    fn pop_to(&mut self, idx: usize, at: usize, last_end: usize) {
        while self.open.len() > idx + 1 {
            let id = self.open.pop().unwrap();
            self.nodes[id.0].end = at;
        }
        let id = self.open.pop().unwrap();
        self.nodes[id.0].end = last_end;
    }

    /// Finds the topmost open element named in `targets`, without crossing any
    /// element named in `stop`.
    fn find_open(&self, targets: &[&str], stop: &[&str]) -> Option<usize> {
        for idx in (1..self.open.len()).rev() {
            let tag = self.tag_of(self.open[idx]);
            if targets.contains(&tag) {
                return Some(idx);
            }
            if stop.contains(&tag) {
                return None;
            }
        }
        None
    }

    /// Closes the outermost open element named in `targets` that lies above
    /// the nearest `stop` element, together with everything opened after it.
    fn implicitly_close(&mut self, targets: &[&str], stop: &[&str], at: usize) {
        let mut found = None;
        for idx in (1..self.open.len()).rev() {
            let tag = self.tag_of(self.open[idx]);
            if stop.contains(&tag) {
                break;
            }
            if targets.contains(&tag) {
                found = Some(idx);
            }
        }
        if let Some(idx) = found {
            self.pop_to(idx, at, at);
        }
    }

    fn start_tag(&mut self, name: &str, at: usize) {
        if CLOSES_P.contains(&name) {
            self.implicitly_close(&["p"], &["table", "td", "th", "caption", "button"], at);
        }
        match name {
            "li" => self.implicitly_close(&["li"], &["ul", "ol", "table", "td", "th"], at),
            "dt" | "dd" => self.implicitly_close(&["dt", "dd"], &["dl", "table", "td", "th"], at),
            "option" => self.implicitly_close(&["option"], &["select", "datalist"], at),
            "tr" => self.implicitly_close(
                &["tr", "td", "th"],
                &["table", "thead", "tbody", "tfoot"],
                at,
            ),
            "td" | "th" => self.implicitly_close(&["td", "th"], &["tr", "table"], at),
            "thead" | "tbody" | "tfoot" => self.implicitly_close(
                &["thead", "tbody", "tfoot", "tr", "td", "th", "caption"],
                &["table"],
                at,
            ),
            "caption" | "colgroup" => {
                self.implicitly_close(&["caption", "colgroup"], &["table"], at)
            }
            _ => {}
        }
        if HEADINGS.contains(&name) {
            let cur = self.current();
            if HEADINGS.contains(&self.tag_of(cur)) {
                let idx = self.open.len() - 1;
                self.pop_to(idx, at, at);
            }
        }
    }

    fn end_tag(&mut self, name: &str, start: usize, end: usize) {
        let targets: Vec<&str> = if HEADINGS.contains(&name) {
            HEADINGS.to_vec()
        } else {
            vec![name]
        };
        let stop: &[&str] = if SCOPE_BOUNDARIES.contains(&name) {
            match name {
                "td" | "th" | "caption" => &["table"],
                _ => &["html"],
            }
        } else if matches!(name, "tr" | "thead" | "tbody" | "tfoot") {
            &["table"]
        } else {
            SCOPE_BOUNDARIES
        };
        if let Some(idx) = self.find_open(&targets, stop) {
            self.pop_to(idx, start, end);
        }
    }
}

/// Parses `source` leniently. Never fails; empty input yields a bare root.
pub fn parse_html(source: &str) -> DomTree {
    let mut b = Builder {
        nodes: vec![Node {
            kind: NodeKind::Root,
            parent: None,
            children: Vec::new(),
            start: 0,
            end: source.len(),
        }],
        open: vec![NodeId(0)],
    };
    let mut tok = Tokenizer::new(source);
    while let Some(token) = tok.next_token() {
        match token {
            Token::Text { start, end } => {
                let cur = b.current();
                let raw = matches!(b.tag_of(cur), "script" | "style" | "xmp");
                let text = if raw {
                    source[start..end].to_string()
                } else {
                    decode_entities(&source[start..end])
                };
                b.append(NodeKind::Text(text), start, end);
            }
            Token::Comment { start, end, body } => {
                b.append(NodeKind::Comment(body), start, end);
            }
            Token::Doctype { start, end, body } => {
                b.append(NodeKind::Doctype(body), start, end);
            }
            Token::StartTag {
                start,
                end,
                name,
                attrs,
                self_closing,
            } => {
                b.start_tag(&name, start);
                let void =
                    is_void(&name) || (self_closing && !RAW_TEXT_ELEMENTS.contains(&name.as_str()));
                let id = b.append(NodeKind::Element { tag: name, attrs }, start, end);
                if !void {
                    b.open.push(id);
                }
            }
            Token::EndTag { start, end, name } => b.end_tag(&name, start, end),
        }
    }
    let len = source.len();
    while b.open.len() > 1 {
        let id = b.open.pop().unwrap();
        b.nodes[id.0].end = len;
    }
    DomTree {
        nodes: b.nodes,
        source_len: len,
    }
}
