use std::sync::LazyLock;

use regex::Regex;

use crate::dom::{DomTree, NodeId, NodeKind};

static START_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\*\*\* ?START OF (THE|THIS) PROJECT GUTENBERG EBOOK.*").unwrap());
static END_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\*\*\* ?END OF (THE|THIS) PROJECT GUTENBERG EBOOK.*").unwrap());

/// Where the licence markers were found, as ids in the input tree.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MarkerCut {
    /// Block holding the start marker; it and everything before it goes.
    pub start: Option<NodeId>,
    /// Block holding the end marker; it and everything after it goes.
    pub end: Option<NodeId>,
}

impl MarkerCut {
    /// Per-node removal flags. Ancestors of a cut point survive.
    pub fn removed(&self, tree: &DomTree) -> Vec<bool> {
        let n = tree.node_count();
        let mut removed = vec![false; n];
        if let Some(s) = self.start {
            let last = tree.node(s).subtree_end;
            for (id, flag) in removed.iter_mut().enumerate().take(last + 1).skip(1) {
                if !tree.is_ancestor(id, s) {
                    *flag = true;
                }
            }
        }
        if let Some(e) = self.end {
            removed[e..].iter_mut().for_each(|f| *f = true);
        }
        removed
    }
}

fn has_text(tree: &DomTree, ids: impl Iterator<Item = NodeId>) -> bool {
    ids.into_iter().any(|id| {
        matches!(&tree.node(id).kind, NodeKind::Text(t) if !t.trim().is_empty())
            && !tree
                .ancestors(id)
                .any(|a| tree.node(a).tag().is_some_and(crate::dom::is_raw_text_tag))
    })
}

fn is_container_limit(tree: &DomTree, id: NodeId) -> bool {
    id == 0 || matches!(tree.node(id).tag(), Some("body" | "html"))
}

/// Climbs from the marker text while the parent holds no other visible text
/// on the side that must survive.
fn top_level_block(tree: &DomTree, marker: NodeId, keep_after: bool) -> NodeId {
    let mut cur = marker;
    while let Some(p) = tree.node(cur).parent {
        if is_container_limit(tree, p) {
            break;
        }
        let range = tree.subtree(p);
        let survivors_present = if keep_after {
            has_text(tree, tree.node(cur).subtree_end + 1..=*range.end())
        } else {
            has_text(tree, p + 1..cur)
        };
        if survivors_present {
            break;
        }
        cur = p;
    }
    cur
}

fn find_marker(tree: &DomTree, re: &Regex, from: NodeId) -> Option<NodeId> {
    (from..tree.node_count()).find(|&id| matches!(&tree.node(id).kind, NodeKind::Text(t) if re.is_match(t)))
}

/// Locates the start and end licence markers. An end marker only counts if
/// it lies after the start block.
pub fn find_marker_cut(tree: &DomTree) -> MarkerCut {
    let start = find_marker(tree, &START_MARKER, 0).map(|m| top_level_block(tree, m, true));
    let search_from = start.map_or(0, |s| tree.node(s).subtree_end + 1);
    let end = find_marker(tree, &END_MARKER, search_from).map(|m| top_level_block(tree, m, false));
    MarkerCut { start, end }
}

/// Removes the licence preamble and trailer. Trees without markers are
/// returned unchanged.
pub fn strip_boilerplate(tree: &DomTree) -> DomTree {
    let cut = find_marker_cut(tree);
    if cut == MarkerCut::default() {
        return tree.clone();
    }
    let removed = cut.removed(tree);
    tree.rebuild(|id| {
        if removed[id] {
            crate::dom::Edit::Remove
        } else {
            crate::dom::Edit::Keep
        }
    })
}
