//! Rule sets: data-driven selectors plus an action, loaded from TOML.

use std::collections::{BTreeMap, BTreeSet};

use regex::Regex;
use serde::Deserialize;
use toml::Spanned;

use super::NormalizeError;
use crate::dom::{DomTree, NodeId, NodeKind};

pub const RULESET_FORMAT: &str = "ruleset v1";
const STD_V1: &str = include_str!("../../data/std-v1.ruleset.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    RemoveSubtree,
    /// Remove the last hit and everything before it in document order.
    RemoveBeforeInclusive,
    /// Remove the first hit and everything after it in document order.
    RemoveAfterInclusive,
    Unwrap,
}

/// A conjunction of predicates. Empty lists and absent patterns are
/// "don't care"; a selector with a `comment` pattern only matches comments.
#[derive(Debug, Clone, Default)]
pub struct Selector {
    pub tags: BTreeSet<String>,
    pub classes: BTreeSet<String>,
    pub id: Option<Regex>,
    pub attrs: Vec<(String, Regex)>,
    pub text: Option<Regex>,
    pub comment: Option<Regex>,
    /// Drop hits that have a hitting descendant.
    pub innermost: bool,
    /// Also take the next element sibling of a hit when its tag is listed.
    pub with_next_sibling: BTreeSet<String>,
}

impl Selector {
    fn matches(&self, tree: &DomTree, id: NodeId) -> bool {
        let node = tree.node(id);
        if let Some(pattern) = &self.comment {
            return matches!(&node.kind, NodeKind::Comment(c) if pattern.is_match(c.trim()));
        }
        let Some(el) = node.element() else {
            return false;
        };
        if !self.tags.is_empty() && !self.tags.contains(&el.tag) {
            return false;
        }
        if !self.classes.is_empty() && !el.class_tokens().any(|c| self.classes.contains(&c)) {
            return false;
        }
        if let Some(re) = &self.id {
            if !el.attr("id").is_some_and(|v| re.is_match(v)) {
                return false;
            }
        }
        for (name, re) in &self.attrs {
            if !el.attr(name).is_some_and(|v| re.is_match(v)) {
                return false;
            }
        }
        if let Some(re) = &self.text {
            if !re.is_match(&tree.text_content(id)) {
                return false;
            }
        }
        true
    }

    /// Every node this selector hits, in preorder.
    pub fn hits(&self, tree: &DomTree) -> Vec<NodeId> {
        let n = tree.node_count();
        let matched: Vec<bool> = (0..n).map(|id| id != 0 && self.matches(tree, id)).collect();
        let mut hits: Vec<NodeId> = if self.innermost {
            // a hit is innermost when no later id inside its subtree is a hit
            let mut next_hit = vec![usize::MAX; n + 1];
            for id in (0..n).rev() {
                next_hit[id] = if matched[id] { id } else { next_hit[id + 1] };
            }
            (0..n)
                .filter(|&id| matched[id] && next_hit[id + 1] > tree.node(id).subtree_end)
                .collect()
        } else {
            (0..n).filter(|&id| matched[id]).collect()
        };
        if !self.with_next_sibling.is_empty() {
            let extra: Vec<NodeId> = hits
                .iter()
                .filter_map(|&id| tree.next_element_sibling(id))
                .filter(|&s| {
                    tree.node(s)
                        .tag()
                        .is_some_and(|t| self.with_next_sibling.contains(t))
                })
                .collect();
            hits.extend(extra);
            hits.sort_unstable();
            hits.dedup();
        }
        hits
    }
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub name: String,
    pub selectors: Vec<Selector>,
    pub action: Action,
}

impl Rule {
    /// Union of all selector hits, in preorder.
    pub fn hits(&self, tree: &DomTree) -> Vec<NodeId> {
        let mut all: BTreeSet<NodeId> = BTreeSet::new();
        for s in &self.selectors {
            all.extend(s.hits(tree));
        }
        all.into_iter().collect()
    }
}

#[derive(Debug, Clone)]
pub struct RuleSet {
    pub ruleset_id: String,
    pub rules: Vec<Rule>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleSetFile {
    format: Spanned<String>,
    id: Spanned<String>,
    #[serde(default, rename = "rule")]
    rules: Vec<Spanned<RuleFile>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    name: Spanned<String>,
    action: Action,
    #[serde(default, rename = "match")]
    selectors: Vec<Spanned<SelectorFile>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SelectorFile {
    #[serde(default)]
    tags: Vec<String>,
    #[serde(default)]
    classes: Vec<String>,
    id: Option<Spanned<String>>,
    #[serde(default)]
    attrs: BTreeMap<String, Spanned<String>>,
    text: Option<Spanned<String>>,
    comment: Option<Spanned<String>>,
    #[serde(default)]
    innermost: bool,
    #[serde(default)]
    with_next_sibling: Vec<String>,
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

impl RuleSet {
    /// The built-in `std-v1` rule set.
    pub fn std_v1() -> RuleSet {
        RuleSet::parse(STD_V1).expect("bundled std-v1 rule set is valid")
    }

    pub fn parse(src: &str) -> Result<RuleSet, NormalizeError> {
        let file: RuleSetFile = toml::from_str(src).map_err(|e| NormalizeError::RuleSetSyntax {
            line: e.span().map_or(0, |s| line_of(src, s.start)),
            message: e.message().to_string(),
        })?;
        let err = |offset: usize, message: String| NormalizeError::RuleSetSyntax {
            line: line_of(src, offset),
            message,
        };
        if file.format.get_ref() != RULESET_FORMAT {
            return Err(err(
                file.format.span().start,
                format!("unsupported format {:?}, expected {RULESET_FORMAT:?}", file.format.get_ref()),
            ));
        }
        if file.id.get_ref().trim().is_empty() {
            return Err(err(file.id.span().start, "ruleset id must not be empty".into()));
        }
        let regex = |s: &Spanned<String>| -> Result<Regex, NormalizeError> {
            Regex::new(s.get_ref()).map_err(|e| err(s.span().start, format!("bad pattern: {e}")))
        };
        let mut names = BTreeSet::new();
        let mut rules = Vec::with_capacity(file.rules.len());
        for spanned in &file.rules {
            let rule = spanned.get_ref();
            let name = rule.name.get_ref().clone();
            if !names.insert(name.clone()) {
                return Err(err(rule.name.span().start, format!("duplicate rule name {name:?}")));
            }
            if rule.selectors.is_empty() {
                return Err(err(spanned.span().start, format!("rule {name:?} has no [[rule.match]] selector")));
            }
            let mut selectors = Vec::new();
            for sel in &rule.selectors {
                let s = sel.get_ref();
                let has_element_predicate = !s.tags.is_empty()
                    || !s.classes.is_empty()
                    || s.id.is_some()
                    || !s.attrs.is_empty()
                    || s.text.is_some();
                if s.comment.is_some() && has_element_predicate {
                    return Err(err(sel.span().start, "comment selectors cannot combine element predicates".into()));
                }
                if s.comment.is_none() && !has_element_predicate {
                    return Err(err(sel.span().start, "empty selector would match every element".into()));
                }
                selectors.push(Selector {
                    tags: s.tags.iter().map(|t| t.to_lowercase()).collect(),
                    classes: s.classes.iter().map(|c| c.to_lowercase()).collect(),
                    id: s.id.as_ref().map(regex).transpose()?,
                    attrs: s
                        .attrs
                        .iter()
                        .map(|(k, v)| Ok((k.to_lowercase(), regex(v)?)))
                        .collect::<Result<_, NormalizeError>>()?,
                    text: s.text.as_ref().map(regex).transpose()?,
                    comment: s.comment.as_ref().map(regex).transpose()?,
                    innermost: s.innermost,
                    with_next_sibling: s.with_next_sibling.iter().map(|t| t.to_lowercase()).collect(),
                });
            }
            rules.push(Rule {
                name,
                selectors,
                action: rule.action,
            });
        }
        Ok(RuleSet {
            ruleset_id: file.id.into_inner(),
            rules,
        })
    }
}
