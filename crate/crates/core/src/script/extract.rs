use crate::dom::{DomTree, NodeId};

/// A chapter before segmentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlainChapter {
    pub index: usize,
    pub heading: String,
    pub paragraphs: Vec<String>,
}

const BLOCK_TAGS: &[&str] = &[
    "address", "article", "aside", "blockquote", "dd", "div", "dl", "dt", "figure", "footer", "h1", "h2", "h3", "h4",
    "h5", "h6", "header", "hr", "li", "main", "nav", "ol", "p", "pre", "section", "table", "ul",
];

fn is_block(tag: &str) -> bool {
    BLOCK_TAGS.contains(&tag)
}

fn is_heading(tag: &str) -> bool {
    matches!(tag, "h1" | "h2" | "h3")
}

/// Tags whose text is read as one paragraph, provided (except `p`) they
/// contain no other block element.
fn is_paragraph_candidate(tag: &str) -> bool {
    matches!(tag, "p" | "blockquote" | "li" | "div" | "dd" | "dt" | "pre" | "h4" | "h5" | "h6")
}

fn has_block_descendant(tree: &DomTree, id: NodeId) -> bool {
    tree.subtree(id)
        .skip(1)
        .any(|d| tree.node(d).tag().is_some_and(is_block))
}

/// Splits a normalized tree into chapters at every h1 to h3. Text before
/// the first heading forms a chapter with an empty heading. Chapters with
/// no paragraphs are dropped and the rest numbered from 1.
pub fn extract_chapters(tree: &DomTree) -> Vec<PlainChapter> {
    let mut chapters: Vec<PlainChapter> = vec![PlainChapter {
        index: 0,
        heading: String::new(),
        paragraphs: Vec::new(),
    }];
    let mut id = 1;
    while id < tree.node_count() {
        let node = tree.node(id);
        let Some(tag) = node.tag() else {
            id += 1;
            continue;
        };
        if is_heading(tag) {
            chapters.push(PlainChapter {
                index: 0,
                heading: tree.text_content(id),
                paragraphs: Vec::new(),
            });
            id = node.subtree_end + 1;
        } else if crate::dom::is_raw_text_tag(tag) || tag == "head" {
            id = node.subtree_end + 1;
        } else if is_paragraph_candidate(tag) && (tag == "p" || !has_block_descendant(tree, id)) {
            let text = tree.text_content(id);
            if !text.is_empty() {
                chapters.last_mut().expect("always one").paragraphs.push(text);
            }
            id = node.subtree_end + 1;
        } else {
            id += 1;
        }
    }
    chapters.retain(|c| !c.paragraphs.is_empty());
    for (i, c) in chapters.iter_mut().enumerate() {
        c.index = i + 1;
    }
    chapters
}
