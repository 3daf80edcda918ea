//! Deletion-only normalization driven by rule sets.

mod boilerplate;
mod rules;

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

pub use boilerplate::{find_marker_cut, strip_boilerplate, MarkerCut};
pub use rules::{Action, Rule, RuleSet, Selector, RULESET_FORMAT};

use crate::dom::{is_raw_text_tag, DomTree, Edit, NodeId, NodeKind};

pub const MAX_RULE_PASSES: usize = 10;

#[derive(Debug, Error)]
pub enum NormalizeError {
    #[error("rule set line {line}: {message}")]
    RuleSetSyntax { line: usize, message: String },
    #[error("rules still removed nodes after {0} passes")]
    RulePassLimitExceeded(usize),
    #[error("cannot read rule set {path}: {message}")]
    Io { path: String, message: String },
}

impl RuleSet {
    pub fn load(path: &Path) -> Result<RuleSet, NormalizeError> {
        let src = std::fs::read_to_string(path).map_err(|e| NormalizeError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        RuleSet::parse(&src)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RuleCount {
    pub rule: String,
    /// Nodes the rule acted on (matched roots, not their descendants).
    pub nodes_removed: usize,
    /// Non-whitespace visible characters that went with them.
    pub nonspace_chars_removed: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BoilerplateReport {
    pub start_marker_found: bool,
    pub end_marker_found: bool,
    pub nodes_removed: usize,
    pub nonspace_chars_removed: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RemovalReport {
    pub book_id: String,
    pub boilerplate: BoilerplateReport,
    /// One entry per rule, in rule order.
    pub rules: Vec<RuleCount>,
    pub characters_removed: usize,
    pub characters_kept: usize,
    /// Rule passes run, including the final pass that removed nothing.
    pub passes: usize,
}

impl RemovalReport {
    pub fn count(&self, rule: &str) -> Option<usize> {
        self.rules.iter().find(|r| r.rule == rule).map(|r| r.nodes_removed)
    }

    pub fn total_rule_nodes(&self) -> usize {
        self.rules.iter().map(|r| r.nodes_removed).sum()
    }
}

#[derive(Debug, Clone)]
pub struct NormalizedBook {
    pub book_id: String,
    pub ruleset_id: String,
    pub tree: DomTree,
    pub report: RemovalReport,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RulesetChoice {
    Ruleset(String),
    Excluded,
}

pub fn classify_ruleset(cluster_id: usize, keep_list: &BTreeMap<usize, String>) -> RulesetChoice {
    match keep_list.get(&cluster_id) {
        Some(id) => RulesetChoice::Ruleset(id.clone()),
        None => RulesetChoice::Excluded,
    }
}

/// Non-whitespace characters of each visible text node, zero elsewhere.
fn visible_nonspace(tree: &DomTree) -> Vec<usize> {
    let mut hidden = vec![false; tree.node_count()];
    let mut out = vec![0; tree.node_count()];
    for node in tree.nodes() {
        let parent_hidden = node.parent.is_some_and(|p| hidden[p]);
        hidden[node.id] = parent_hidden || node.tag().is_some_and(is_raw_text_tag);
        if let NodeKind::Text(t) = &node.kind {
            if !hidden[node.id] {
                out[node.id] = t.chars().filter(|c| !c.is_whitespace()).count();
            }
        }
    }
    out
}

/// Number of characters in a tree's extracted text.
pub fn text_char_count(tree: &DomTree) -> usize {
    tree.text_content(0).chars().count()
}

struct Applied {
    tree: DomTree,
    acted_on: usize,
    nonspace_removed: usize,
}

/// Removes the subtrees of every node flagged in `remove` (children of a
/// flagged node need not be flagged) and unwraps every node in `unwrap`.
fn apply_edits(tree: &DomTree, remove: &[bool], unwrap: &[bool], acted_on: usize) -> Applied {
    let weights = visible_nonspace(tree);
    let mut gone = vec![false; tree.node_count()];
    for id in 1..tree.node_count() {
        let parent_gone = tree.node(id).parent.is_some_and(|p| gone[p]);
        gone[id] = parent_gone || remove[id];
    }
    let nonspace_removed = (0..tree.node_count()).filter(|&id| gone[id]).map(|id| weights[id]).sum();
    let tree = tree.rebuild(|id| {
        if remove[id] {
            Edit::Remove
        } else if unwrap[id] {
            Edit::Unwrap
        } else {
            Edit::Keep
        }
    });
    Applied {
        tree,
        acted_on,
        nonspace_removed,
    }
}

fn apply_rule(tree: &DomTree, rule: &Rule) -> Option<Applied> {
    let hits = rule.hits(tree);
    if hits.is_empty() {
        return None;
    }
    let n = tree.node_count();
    let mut remove = vec![false; n];
    let mut unwrap = vec![false; n];
    let acted_on = match rule.action {
        Action::RemoveSubtree => {
            let mut roots = 0;
            let mut covered_until: Option<NodeId> = None;
            for &h in &hits {
                if covered_until.is_some_and(|end| h <= end) {
                    continue;
                }
                remove[h] = true;
                roots += 1;
                covered_until = Some(tree.node(h).subtree_end);
            }
            roots
        }
        Action::Unwrap => {
            for &h in &hits {
                unwrap[h] = true;
            }
            hits.len()
        }
        Action::RemoveBeforeInclusive => {
            let h = *hits.last().expect("non-empty");
            let end = tree.node(h).subtree_end;
            for (id, flag) in remove.iter_mut().enumerate().take(end + 1).skip(1) {
                *flag = !tree.is_ancestor(id, h);
            }
            1
        }
        Action::RemoveAfterInclusive => {
            let h = hits[0];
            remove[h..].iter_mut().for_each(|f| *f = true);
            1
        }
    };
    Some(apply_edits(tree, &remove, &unwrap, acted_on))
}

/// One pass of every rule in order. Returns the nodes acted on per rule.
fn rule_pass(tree: DomTree, ruleset: &RuleSet, counts: &mut [RuleCount]) -> (DomTree, usize) {
    let mut tree = tree;
    let mut total = 0;
    for (rule, count) in ruleset.rules.iter().zip(counts.iter_mut()) {
        if let Some(applied) = apply_rule(&tree, rule) {
            count.nodes_removed += applied.acted_on;
            count.nonspace_chars_removed += applied.nonspace_removed;
            total += applied.acted_on;
            tree = applied.tree;
        }
    }
    (tree, total)
}

/// Strips licence boilerplate, then runs rule passes until one removes
/// nothing.
pub fn apply_rules(book_id: &str, tree: &DomTree, ruleset: &RuleSet) -> Result<NormalizedBook, NormalizeError> {
    let original_chars = text_char_count(tree);

    let cut = find_marker_cut(tree);
    let mut boilerplate = BoilerplateReport {
        start_marker_found: cut.start.is_some(),
        end_marker_found: cut.end.is_some(),
        ..Default::default()
    };
    let mut current = if cut == MarkerCut::default() {
        tree.clone()
    } else {
        let removed = cut.removed(tree);
        let roots = (1..tree.node_count())
            .filter(|&id| removed[id] && !tree.node(id).parent.is_some_and(|p| removed[p]))
            .count();
        let applied = apply_edits(tree, &removed, &vec![false; tree.node_count()], roots);
        boilerplate.nodes_removed = applied.acted_on;
        boilerplate.nonspace_chars_removed = applied.nonspace_removed;
        applied.tree
    };

    let mut counts: Vec<RuleCount> = ruleset
        .rules
        .iter()
        .map(|r| RuleCount {
            rule: r.name.clone(),
            ..Default::default()
        })
        .collect();
    let mut passes = 0;
    loop {
        if passes == MAX_RULE_PASSES {
            return Err(NormalizeError::RulePassLimitExceeded(MAX_RULE_PASSES));
        }
        passes += 1;
        let (next, removed) = rule_pass(current, ruleset, &mut counts);
        current = next;
        if removed == 0 {
            break;
        }
    }

    let kept = text_char_count(&current);
    Ok(NormalizedBook {
        book_id: book_id.to_string(),
        ruleset_id: ruleset.ruleset_id.clone(),
        report: RemovalReport {
            book_id: book_id.to_string(),
            boilerplate,
            rules: counts,
            characters_removed: original_chars.saturating_sub(kept),
            characters_kept: kept,
            passes,
        },
        tree: current,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dom::parse_html;

    fn std(html: &str) -> NormalizedBook {
        apply_rules("b", &parse_html(html), &RuleSet::std_v1()).unwrap()
    }

    #[test]
    fn pagenum_example() {
        let out = std("<span class='pagenum'>[12]</span><p>Hello.</p>");
        assert_eq!(out.tree.text_content(0), "Hello.");
        assert_eq!(out.report.count("pagenum"), Some(1));
        assert_eq!(out.report.total_rule_nodes(), 1);
        assert_eq!(out.report.characters_kept + out.report.characters_removed, "[12]Hello.".len());
    }

    #[test]
    fn no_matches_reports_zero() {
        let html = "<h2>Chapter I</h2><p>It was a dark night.</p>";
        let out = std(html);
        assert_eq!(out.report.total_rule_nodes(), 0);
        assert_eq!(out.report.characters_removed, 0);
        assert_eq!(out.report.characters_kept, text_char_count(&parse_html(html)));
        assert_eq!(out.report.passes, 1);
        assert!(!out.report.boilerplate.start_marker_found);
    }

    #[test]
    fn toc_heading_and_list_removed() {
        let out = std("<h2>CONTENTS</h2><ul><li><a href='#c1'>I</a></li></ul><h2>Chapter I</h2><p>Text…</p>");
        assert_eq!(out.tree.text_content(0), "Chapter IText…");
        assert_eq!(out.report.count("toc"), Some(2));
        assert!(out.tree.find_tag("ul").is_none());
    }

    #[test]
    fn each_junk_category() {
        let html = "<body><p>Keep one.<a href='#footnote3'>[3]</a></p>\
            <div class='footnote'><p>3. A note.</p></div>\
            <p class='transnote'>odd spelling kept</p>\
            <div><p>Transcriber’s Note: typos fixed.</p></div>\
            <table><tr><td>cell</td></tr></table>\
            <div class='figcenter'><img src='a.png' alt='x'><p>[Illustration: a horse]</p></div>\
            <p>[Illustration]</p><p>Keep <span>p. 7</span>two.</p></body>";
        let out = std(html);
        assert_eq!(out.tree.text_content(0), "Keep one.Keep two.");
        for rule in ["footnote", "transcriber-note", "table", "illustration", "pagenum"] {
            assert!(out.report.count(rule).unwrap() > 0, "{rule}");
        }
    }

    #[test]
    fn fixpoint_and_conservation() {
        let html = "<div class='toc'><p>x</p></div><h3>Contents</h3><table><tr><td>1</td></tr></table><p>A <span class='page'>9</span> b</p>";
        let once = std(html);
        let again = apply_rules("b", &once.tree, &RuleSet::std_v1()).unwrap();
        assert_eq!(again.report.total_rule_nodes(), 0);
        assert_eq!(again.tree, once.tree);
        let total = text_char_count(&parse_html(html));
        assert_eq!(once.report.characters_kept + once.report.characters_removed, total);
    }

    #[test]
    fn cut_actions_and_unwrap() {
        let src = "format = \"ruleset v1\"\nid = \"t\"\n\
            [[rule]]\nname = \"front\"\naction = \"remove_before_inclusive\"\n[[rule.match]]\nclasses = [\"start\"]\n\
            [[rule]]\nname = \"back\"\naction = \"remove_after_inclusive\"\n[[rule.match]]\nclasses = [\"end\"]\n\
            [[rule]]\nname = \"fonts\"\naction = \"unwrap\"\n[[rule.match]]\ntags = [\"font\"]\n";
        let rs = RuleSet::parse(src).unwrap();
        let tree = parse_html("<div><p>a</p><p class='start'>s</p></div><p><font>b</font>c</p><p class='end'>e</p><p>z</p>");
        let out = apply_rules("b", &tree, &rs).unwrap();
        assert_eq!(out.tree.text_content(0), "bc");
        assert!(out.tree.find_tag("font").is_none());
        assert_eq!(out.report.count("fonts"), Some(1));
        assert_eq!(out.tree.to_html(), "<div></div><p>bc</p>");
    }

    #[test]
    fn pass_limit_is_enforced() {
        // each pass unwraps only the innermost <b>, one level at a time
        let src = "format = \"ruleset v1\"\nid = \"t\"\n[[rule]]\nname = \"peel\"\naction = \"unwrap\"\n\
            [[rule.match]]\ntags = [\"b\"]\ninnermost = true\n";
        let rs = RuleSet::parse(src).unwrap();
        let deep = format!("{}x{}", "<b>".repeat(12), "</b>".repeat(12));
        assert!(matches!(
            apply_rules("b", &parse_html(&deep), &rs),
            Err(NormalizeError::RulePassLimitExceeded(10))
        ));
        let shallow = format!("{}x{}", "<b>".repeat(9), "</b>".repeat(9));
        let ok = apply_rules("b", &parse_html(&shallow), &rs).unwrap();
        assert_eq!(ok.report.passes, 10);
    }

    #[test]
    fn keep_list_lookup() {
        let table: BTreeMap<usize, String> = [(2, "std-v1".to_string())].into();
        assert_eq!(classify_ruleset(2, &table), RulesetChoice::Ruleset("std-v1".into()));
        assert_eq!(classify_ruleset(7, &table), RulesetChoice::Excluded);
        assert_eq!(classify_ruleset(0, &BTreeMap::new()), RulesetChoice::Excluded);
    }
}
