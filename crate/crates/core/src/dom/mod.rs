//! A small forgiving HTML DOM.
//!
//! Trees are stored as a flat arena in preorder: `nodes()[i].id == i`, the
//! synthetic document root is node 0, and every subtree occupies a
//! contiguous id range. Trees are immutable once built; structural edits go
//! through [`DomTree::rebuild`], which renumbers the result.

mod parser;
mod serialize;

pub use parser::parse_html;

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    /// Synthetic root; exactly one per tree, at id 0.
    Document,
    Element(Element),
    Text(String),
    Comment(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    /// Lowercase tag name.
    pub tag: String,
    /// Attributes in source order; names lowercase, values entity-decoded.
    pub attrs: Vec<(String, String)>,
}

impl Element {
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    /// Whitespace-separated `class` tokens, lowercased.
    pub fn class_tokens(&self) -> impl Iterator<Item = String> + '_ {
        self.attr("class")
            .unwrap_or("")
            .split_whitespace()
            .map(str::to_lowercase)
    }

    pub fn has_class(&self, token: &str) -> bool {
        self.class_tokens().any(|c| c == token)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// Id of the last node in this node's subtree (equal to `id` for leaves).
    pub subtree_end: NodeId,
    pub kind: NodeKind,
}

impl DomNode {
    pub fn element(&self) -> Option<&Element> {
        match &self.kind {
            NodeKind::Element(e) => Some(e),
            _ => None,
        }
    }

    pub fn tag(&self) -> Option<&str> {
        self.element().map(|e| e.tag.as_str())
    }

    pub fn is_element(&self) -> bool {
        matches!(self.kind, NodeKind::Element(_))
    }
}

/// What [`DomTree::rebuild`] does with a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edit {
    Keep,
    /// Drop the node and its whole subtree.
    Remove,
    /// Drop the node but splice its children into its parent.
    Unwrap,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomTree {
    nodes: Vec<DomNode>,
}

/// Tags whose text never reaches extracted content.
pub(crate) fn is_raw_text_tag(tag: &str) -> bool {
    matches!(tag, "script" | "style")
}

impl DomTree {
    pub fn root(&self) -> &DomNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: NodeId) -> &DomNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[DomNode] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Element nodes in preorder.
    pub fn elements(&self) -> impl Iterator<Item = (&DomNode, &Element)> {
        self.nodes
            .iter()
            .filter_map(|n| n.element().map(|e| (n, e)))
    }

    pub fn element_count(&self) -> usize {
        self.elements().count()
    }

    /// Ids of `id`'s subtree, `id` included, in preorder.
    pub fn subtree(&self, id: NodeId) -> std::ops::RangeInclusive<NodeId> {
        id..=self.nodes[id].subtree_end
    }

    pub fn is_ancestor(&self, ancestor: NodeId, of: NodeId) -> bool {
        ancestor < of && of <= self.nodes[ancestor].subtree_end
    }

    pub fn ancestors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::successors(self.nodes[id].parent, move |&p| self.nodes[p].parent)
    }

    /// Depth of a node; the root has depth 0.
    pub fn depth(&self, id: NodeId) -> usize {
        self.ancestors(id).count()
    }

    /// The next sibling that is an element, skipping text and comments.
    pub fn next_element_sibling(&self, id: NodeId) -> Option<NodeId> {
        let parent = self.nodes[id].parent?;
        let siblings = &self.nodes[parent].children;
        let pos = siblings.iter().position(|&c| c == id)?;
        siblings[pos + 1..]
            .iter()
            .copied()
            .find(|&c| self.nodes[c].is_element())
    }

    /// First element with the given tag, in preorder.
    pub fn find_tag(&self, tag: &str) -> Option<&DomNode> {
        self.nodes.iter().find(|n| n.tag() == Some(tag))
    }

    /// Descendant text of `id` with whitespace runs collapsed to one space
    /// and trimmed. Script, style and comment contents are excluded.
    pub fn text_content(&self, id: NodeId) -> String {
        let mut raw = String::new();
        self.collect_text(id, &mut raw);
        collapse_whitespace(&raw)
    }

    fn collect_text(&self, id: NodeId, out: &mut String) {
        let node = &self.nodes[id];
        match &node.kind {
            NodeKind::Text(t) => out.push_str(t),
            NodeKind::Comment(_) => {}
            NodeKind::Element(e) if is_raw_text_tag(&e.tag) => {}
            NodeKind::Element(_) | NodeKind::Document => {
                for &c in &node.children {
                    self.collect_text(c, out);
                }
            }
        }
    }

    /// Builds a new tree applying `edit` to every node. Decisions are made
    /// on this tree's ids; the root is always kept.
    pub fn rebuild(&self, mut edit: impl FnMut(NodeId) -> Edit) -> DomTree {
        let mut builder = TreeBuilder::new();
        let decisions: Vec<Edit> = (0..self.nodes.len())
            .map(|id| if id == 0 { Edit::Keep } else { edit(id) })
            .collect();
        self.copy_children(0, 0, &decisions, &mut builder);
        builder.finish()
    }

    fn copy_children(&self, src: NodeId, dst: NodeId, decisions: &[Edit], b: &mut TreeBuilder) {
        for &c in &self.nodes[src].children {
            match decisions[c] {
                Edit::Remove => {}
                Edit::Unwrap => self.copy_children(c, dst, decisions, b),
                Edit::Keep => match &self.nodes[c].kind {
                    // merging keeps the result identical to a reparse of its HTML
                    NodeKind::Text(t) => b.push_text(dst, t),
                    kind => {
                        let new_id = b.push(dst, kind.clone());
                        self.copy_children(c, new_id, decisions, b);
                    }
                },
            }
        }
    }

    /// Serializes back to HTML text.
    pub fn to_html(&self) -> String {
        serialize::to_html(self)
    }
}

/// Collapses every whitespace run to a single space and trims both ends.
pub fn collapse_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Appends nodes in preorder and fixes up parent links and subtree ranges.
///
/// Callers must only ever append to a node on the current open path (the
/// most recently pushed node or one of its ancestors); that keeps creation
/// order equal to preorder.
pub(crate) struct TreeBuilder {
    nodes: Vec<DomNode>,
}

impl TreeBuilder {
    pub(crate) fn new() -> Self {
        TreeBuilder {
            nodes: vec![DomNode {
                id: 0,
                parent: None,
                children: Vec::new(),
                subtree_end: 0,
                kind: NodeKind::Document,
            }],
        }
    }

    pub(crate) fn push(&mut self, parent: NodeId, kind: NodeKind) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(DomNode {
            id,
            parent: Some(parent),
            children: Vec::new(),
            subtree_end: id,
            kind,
        });
        self.nodes[parent].children.push(id);
        id
    }

    /// Appends text, merging into an immediately preceding text sibling.
    pub(crate) fn push_text(&mut self, parent: NodeId, text: &str) {
        if text.is_empty() {
            return;
        }
        if let Some(&last) = self.nodes[parent].children.last() {
            if last == self.nodes.len() - 1 {
                if let NodeKind::Text(t) = &mut self.nodes[last].kind {
                    t.push_str(text);
                    return;
                }
            }
        }
        self.push(parent, NodeKind::Text(text.to_string()));
    }

    pub(crate) fn finish(mut self) -> DomTree {
        for id in (1..self.nodes.len()).rev() {
            let end = self.nodes[id].subtree_end;
            let parent = self.nodes[id].parent.expect("non-root has a parent");
            if self.nodes[parent].subtree_end < end {
                self.nodes[parent].subtree_end = end;
            }
        }
        DomTree { nodes: self.nodes }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(tree: &DomTree) -> Vec<&str> {
        tree.elements().map(|(_, e)| e.tag.as_str()).collect()
    }

    #[test]
    fn minimal_paragraph() {
        let tree = parse_html("<p>hi</p>");
        assert_eq!(tree.node_count(), 3);
        assert_eq!(tree.node(1).tag(), Some("p"));
        assert_eq!(tree.node(2).kind, NodeKind::Text("hi".into()));
        assert_eq!(tree.node(2).parent, Some(1));
    }

    #[test]
    fn empty_input_is_root_only() {
        let tree = parse_html("");
        assert_eq!(tree.node_count(), 1);
        assert_eq!(tree.root().kind, NodeKind::Document);
    }

    #[test]
    fn unclosed_paragraphs_become_siblings() {
        let tree = parse_html("<p>a<p>b");
        let root = tree.root();
        assert_eq!(root.children.len(), 2);
        for &c in &root.children {
            assert_eq!(tree.node(c).tag(), Some("p"));
        }
        assert_eq!(tree.text_content(root.children[1]), "b");
    }

    #[test]
    fn void_elements_take_no_children() {
        let tree = parse_html("<p>a<br>b<img src=x>c</p>");
        let p = tree.node(1);
        assert_eq!(p.children.len(), 5);
        for (n, _) in tree.elements().filter(|(_, e)| e.tag != "p") {
            assert!(n.children.is_empty());
        }
    }

    #[test]
    fn comments_and_script_preserved() {
        let tree = parse_html("<div><!-- note --><script>if (a < b) x=1</script>ok</div>");
        assert_eq!(tree.node(2).kind, NodeKind::Comment(" note ".into()));
        let script = tree.node(3);
        assert_eq!(script.tag(), Some("script"));
        assert_eq!(script.children.len(), 1);
        assert_eq!(tree.node(4).kind, NodeKind::Text("if (a < b) x=1".into()));
        assert_eq!(tree.text_content(0), "ok");
    }

    #[test]
    fn text_content_collapses_whitespace() {
        let tree = parse_html("<p>a <b>b</b>\n c</p>");
        assert_eq!(tree.text_content(1), "a b c");
        let tree = parse_html("hi");
        assert_eq!(tree.text_content(1), "hi");
    }

    #[test]
    fn tags_and_attrs_lowercased_entities_decoded() {
        let tree = parse_html("<DIV CLASS=\"Toc\" Title='a &amp; b'>x &mdash; y&#33;</DIV>");
        let (_, div) = tree.elements().next().unwrap();
        assert_eq!(div.tag, "div");
        assert_eq!(div.attr("class"), Some("Toc"));
        assert_eq!(div.attr("title"), Some("a & b"));
        assert_eq!(tree.text_content(0), "x \u{2014} y!");
    }

    #[test]
    fn list_items_and_table_cells_autoclose() {
        let tree = parse_html("<ul><li>a<li>b</ul><table><tr><td>1<td>2<tr><td>3</table>");
        assert_eq!(tags(&tree), ["ul", "li", "li", "table", "tr", "td", "td", "tr", "td"]);
        let table = tree.find_tag("table").unwrap();
        assert_eq!(table.children.len(), 2);
    }

    #[test]
    fn stray_end_tags_are_ignored() {
        let tree = parse_html("</div><p>a</span>b</p>");
        assert_eq!(tags(&tree), ["p"]);
        assert_eq!(tree.text_content(0), "ab");
    }

    #[test]
    fn self_closing_syntax() {
        let tree = parse_html("<div><p/></div>");
        assert_eq!(tags(&tree), ["div", "p"]);
        assert!(tree.node(2).children.is_empty());
    }

    #[test]
    fn literal_angle_bracket_is_text() {
        let tree = parse_html("<p>1 < 2 and 3 <= 4</p>");
        assert_eq!(tree.text_content(0), "1 < 2 and 3 <= 4");
    }

    #[test]
    fn doctype_and_processing_instructions_skipped() {
        let tree = parse_html("<?xml version='1.0'?><!DOCTYPE html><html lang=en><body><p>x</p></body></html>");
        assert_eq!(tags(&tree), ["html", "body", "p"]);
    }

    #[test]
    fn subtree_ranges_are_contiguous() {
        let tree = parse_html("<div><p>a<b>b</b></p><p>c</p></div><hr>");
        let div = tree.node(1);
        assert_eq!(div.subtree_end, 7);
        assert!(tree.is_ancestor(1, 5));
        assert!(!tree.is_ancestor(1, 8));
        assert_eq!(tree.depth(4), 3);
    }

    #[test]
    fn rebuild_remove_and_unwrap() {
        let tree = parse_html("<div><span>a</span><em>b</em>c</div>");
        let span = tree.elements().find(|(_, e)| e.tag == "span").unwrap().0.id;
        let em = tree.elements().find(|(_, e)| e.tag == "em").unwrap().0.id;
        let out = tree.rebuild(|id| {
            if id == span {
                Edit::Remove
            } else if id == em {
                Edit::Unwrap
            } else {
                Edit::Keep
            }
        });
        assert_eq!(tags(&out), ["div"]);
        assert_eq!(out.text_content(0), "bc");
        for (i, n) in out.nodes().iter().enumerate() {
            assert_eq!(n.id, i);
        }
    }

    #[test]
    fn serialization_round_trip() {
        let src = "<html><body><p class='a b'>x &amp; &lt;y&gt;</p><!--c--><br><script>a<b</script></body></html>";
        let tree = parse_html(src);
        let again = parse_html(&tree.to_html());
        assert_eq!(tree, again);
    }
}
