use super::parser::VOID_TAGS;
use super::{is_raw_text_tag, DomTree, NodeId, NodeKind};

pub(super) fn to_html(tree: &DomTree) -> String {
    let mut out = String::new();
    for &c in &tree.root().children {
        write_node(tree, c, false, &mut out);
    }
    out
}

fn write_node(tree: &DomTree, id: NodeId, raw: bool, out: &mut String) {
    let node = tree.node(id);
    match &node.kind {
        NodeKind::Document => {}
        NodeKind::Text(t) if raw => out.push_str(t),
        NodeKind::Text(t) => out.push_str(&html_escape::encode_text(t)),
        NodeKind::Comment(c) => {
            out.push_str("<!--");
            out.push_str(c);
            out.push_str("-->");
        }
        NodeKind::Element(e) => {
            out.push('<');
            out.push_str(&e.tag);
            for (k, v) in &e.attrs {
                out.push(' ');
                out.push_str(k);
                out.push_str("=\"");
                out.push_str(&html_escape::encode_double_quoted_attribute(v));
                out.push('"');
            }
            out.push('>');
            if VOID_TAGS.contains(&e.tag.as_str()) {
                return;
            }
            let raw_child = is_raw_text_tag(&e.tag);
            for &c in &node.children {
                write_node(tree, c, raw_child, out);
            }
            out.push_str("</");
            out.push_str(&e.tag);
            out.push('>');
        }
    }
}
