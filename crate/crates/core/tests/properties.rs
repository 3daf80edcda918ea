use audiobook_core::cluster::{kmeans_fit, project_2d, ClusterModel, DEFAULT_TOL};
use audiobook_core::dom::{collapse_whitespace, parse_html, DomTree, NodeKind};
use audiobook_core::features::{build_vocabulary, dom_path_tokens, handcrafted_features, tfidf};
use audiobook_core::normalize::{apply_rules, text_char_count, RuleSet};
use audiobook_core::orchestrator::{BookStatus, Manifest, ManifestEntry};
use audiobook_core::script::{
    annotate_chapter, assign_voices, reconstruct, segment_dialogue, Emotion, SegmentKind, DEFAULT_QUOTE_PAIRS,
    NARRATOR,
};
use audiobook_core::synthesis::{
    concat_clips, encode_wav, parse_wav, speech_samples, AudioClip, SUPPORTED_SAMPLE_RATES,
};
use proptest::prelude::*;

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(vec![
        "the", "Alice", "said", "Bob", "asked", "cried", "quiet", "Mr.", "Darcy", "river", "and", "it", "&amp;",
        "light", "she", "Oh!", "yes,", "no.", "wait?",
    ])
    .prop_map(str::to_string)
}

fn text() -> impl Strategy<Value = String> {
    prop::collection::vec(word(), 1..8).prop_map(|w| w.join(" "))
}

/// One block of book-like HTML, drawn from content and junk shapes.
fn block() -> impl Strategy<Value = String> {
    (0..14usize, text(), text(), 1..300u32).prop_map(|(kind, a, b, n)| match kind {
        0 => format!("<p>{a}</p>"),
        1 => format!("<p>{a} <span class=\"pagenum\">[{n}]</span> {b}</p>"),
        2 => format!("<div class=\"transnote\"><p>Transcriber's Note: {a}</p></div>"),
        3 => format!("<h2>{a}</h2>"),
        4 => format!("<table><tr><td>{a}</td><td>{b}</td></tr></table>"),
        5 => format!("<div class=\"figcenter\"><img src=\"i{n}.png\" alt=\"x\"><p class=\"caption\">{a}</p></div>"),
        6 => format!("<p>{a}<a href=\"#fnote{n}\" class=\"fnanchor\">[{n}]</a> {b}</p>"),
        7 => format!("<div class=\"footnote\"><p>{a}</p></div>"),
        8 => "<script>var x = \"<p>\";</script>".to_string(),
        9 => format!("<blockquote>\u{201C}{a},\u{201D} said Bob. \u{201C}{b}\u{201D}</blockquote>"),
        10 => format!("<div><div><p>{a}</p>\n\t<p>{b}</p></div></div>"),
        11 => format!("<h2>Contents</h2><ul><li><a href=\"#c{n}\">{a}</a></li></ul>"),
        12 => format!("<pre>{a}\n   {b}</pre>"),
        _ => format!("<p>\"{a}\" {b}</p>"),
    })
}

fn book() -> impl Strategy<Value = String> {
    (any::<bool>(), any::<bool>(), prop::collection::vec(block(), 0..12)).prop_map(|(start, end, blocks)| {
        let mut html = String::from("<html><head><title>T by A</title></head><body>");
        if start {
            html += "<p>*** START OF THE PROJECT GUTENBERG EBOOK TEST ***</p>";
        }
        html += &blocks.concat();
        if end {
            html += "<p>*** END OF THE PROJECT GUTENBERG EBOOK TEST ***</p><p>licence</p>";
        }
        html + "</body></html>"
    })
}

fn is_subsequence(small: &str, big: &str) -> bool {
    let mut it = big.chars();
    small.chars().all(|c| it.any(|d| d == c))
}

fn check_tree_shape(tree: &DomTree) -> Result<(), TestCaseError> {
    for (i, node) in tree.nodes().iter().enumerate() {
        prop_assert_eq!(node.id, i);
        match &node.kind {
            NodeKind::Text(_) | NodeKind::Comment(_) => prop_assert!(node.children.is_empty()),
            NodeKind::Element(e) => {
                prop_assert_eq!(e.tag.to_lowercase(), e.tag.clone());
                for (k, _) in &e.attrs {
                    prop_assert_eq!(k.to_lowercase(), k.clone());
                }
            }
            NodeKind::Document => prop_assert_eq!(i, 0),
        }
        for &c in &node.children {
            prop_assert_eq!(tree.node(c).parent, Some(i));
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dom_invariants(html in book()) {
        let tree = parse_html(&html);
        check_tree_shape(&tree)?;
        prop_assert_eq!(&parse_html(&html), &tree);
        let text = tree.text_content(0);
        prop_assert!(!text.contains("  ") && !text.contains(['\t', '\n']));
        prop_assert!(dom_path_tokens(&tree).len() >= tree.element_count());
        let again = parse_html(&tree.to_html());
        prop_assert_eq!(handcrafted_features(&again), handcrafted_features(&tree));
        prop_assert_eq!(again.to_html(), tree.to_html());
    }

    #[test]
    fn normalization_conserves_and_settles(html in book()) {
        let tree = parse_html(&html);
        let std = RuleSet::std_v1();
        let out = apply_rules("b", &tree, &std).unwrap();
        let r = &out.report;
        prop_assert_eq!(r.characters_removed + r.characters_kept, text_char_count(&tree));
        prop_assert_eq!(r.characters_kept, text_char_count(&out.tree));
        prop_assert!(is_subsequence(&out.tree.text_content(0), &tree.text_content(0)));
        let again = apply_rules("b", &out.tree, &std).unwrap();
        prop_assert_eq!(again.report.total_rule_nodes(), 0);
        prop_assert_eq!(again.report.boilerplate.nodes_removed, 0);
        prop_assert_eq!(again.tree.to_html(), out.tree.to_html());
    }

    #[test]
    fn segments_rebuild_their_paragraph(
        parts in prop::collection::vec(
            prop_oneof![
                text(),
                Just("\u{201C}".to_string()),
                Just("\u{201D}".to_string()),
                Just("\"".to_string()),
                Just(" ".to_string()),
            ],
            1..12,
        )
    ) {
        let p = collapse_whitespace(&parts.concat());
        prop_assume!(!p.is_empty());
        let segs = segment_dialogue(&p, &DEFAULT_QUOTE_PAIRS);
        prop_assert!(!segs.is_empty());
        prop_assert_eq!(reconstruct(&segs), p.clone());
        let opens = segs.iter().filter(|s| s.is_dialogue() && s.quote_open.is_some()).count();
        let closes = segs.iter().filter(|s| s.is_dialogue() && s.quote_close.is_some()).count();
        prop_assert!(opens >= closes && opens - closes <= 1);
        for s in &segs {
            prop_assert!(!s.text.is_empty() && s.text.trim() == s.text);
            if s.kind == SegmentKind::Narration {
                prop_assert!(s.speaker == NARRATOR && s.emotion == Emotion::Neutral);
            } else {
                prop_assert!(s.quote_open.is_some());
            }
        }
    }

    #[test]
    fn every_speaker_gets_a_voice(paras in prop::collection::vec(
        (text(), prop::sample::select(vec!["said Alice.", "Bob asked.", "he said.", "", "cried Mr. Darcy,"])),
        1..10,
    )) {
        let texts: Vec<String> = paras.iter().map(|(t, tail)| format!("\u{201C}{t}\u{201D} {tail}").trim().to_string()).collect();
        let annotated = annotate_chapter(&texts, &DEFAULT_QUOTE_PAIRS);
        let speakers = annotated.iter().flat_map(|p| &p.segments).map(|s| s.speaker.as_str());
        let pool: Vec<String> = vec!["v1".into(), "v2".into(), "v3".into()];
        let cast = assign_voices(speakers.clone(), &pool, "narr").unwrap();
        prop_assert!(cast.contains_key(NARRATOR));
        for s in speakers {
            prop_assert!(cast.contains_key(s));
        }
    }

    #[test]
    fn vocabulary_ignores_book_order(
        docs in prop::collection::vec(prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e"]), 1..20), 1..8),
        min_df in 1..4usize,
        max_terms in 1..6usize,
        rot in 0..8usize,
    ) {
        let mut turned = docs.clone();
        let len = turned.len();
        turned.rotate_left(rot % len);
        let v1 = build_vocabulary(&docs, min_df, max_terms).unwrap();
        let v2 = build_vocabulary(&turned, min_df, max_terms).unwrap();
        prop_assert_eq!(&v1, &v2);
        prop_assert!(v1.terms.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(v1.doc_freq.iter().all(|&d| d >= 1 && d <= docs.len()));
        for d in &docs {
            let w = tfidf(d, &v1);
            let norm = w.values().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(w.is_empty() || (norm - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn lloyd_never_increases_inertia(
        pts in prop::collection::vec(prop::collection::vec(-50.0..50.0f64, 2), 1..14),
        k in 1..5usize,
        seed in any::<u64>(),
    ) {
        let k = k.min(pts.len());
        let fit = kmeans_fit(&pts, k, seed, 100, DEFAULT_TOL).unwrap();
        let mut h = fit.model.inertia_history.clone();
        h.push(fit.model.inertia);
        prop_assert!(h.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{:?}", h);
        prop_assert!(fit.model.centroids.iter().all(|c| c.len() == 2));
        assert_nearest(&fit.model, &pts, &fit.labels)?;
        match project_2d(&pts) {
            Ok(proj) => {
                prop_assert_eq!(proj.len(), pts.len());
                prop_assert!(proj.iter().all(|p| p[0].is_finite() && p[1].is_finite()));
            }
            Err(_) => prop_assert_eq!(pts.len(), 1),
        }
    }

    #[test]
    fn audio_scales_and_assembles(
        chars in 0..2000usize,
        rate in 0.5..1.5f64,
        sr in prop::sample::select(SUPPORTED_SAMPLE_RATES.to_vec()),
        sizes in prop::collection::vec(0..500usize, 0..6),
        gap in 0..1000u64,
    ) {
        let slow = speech_samples(chars, rate, sr) as i64;
        let fast = speech_samples(chars, 2.0 * rate, sr) as i64;
        prop_assert!((2 * fast - slow).abs() <= 2, "{} vs {}", slow, fast);

        let clips: Vec<AudioClip> = sizes
            .iter()
            .map(|&n| AudioClip { samples: vec![7; n], sample_rate_hz: sr, source_segment_id: String::new() })
            .collect();
        let gaps = vec![gap; sizes.len().saturating_sub(1)];
        let (out, _) = concat_clips(&clips, &gaps, sr).unwrap();
        let silence = (gap as f64 * sr as f64 / 1000.0).round() as usize;
        prop_assert_eq!(out.len(), sizes.iter().sum::<usize>() + gaps.len() * silence);

        let wav = encode_wav(&out, sr);
        let back = parse_wav(&wav).unwrap();
        prop_assert_eq!(back.format.sample_rate, sr);
        prop_assert_eq!(back.samples().unwrap(), out);
    }

    #[test]
    fn manifests_round_trip(
        books in prop::collection::btree_map("[a-z0-9_-]{1,12}", (0..3u8, any::<u32>(), "[ -~]{0,20}"), 0..10),
    ) {
        let mut m = Manifest::new("abc123");
        m.header.complete = true;
        for (id, (status, ms, title)) in &books {
            let mut e = ManifestEntry::new(id);
            e.status = [BookStatus::Done, BookStatus::Excluded, BookStatus::Failed][*status as usize];
            e.audio_duration_ms = *ms as u64;
            e.title = title.clone();
            e.cluster_id = Some(*ms as usize % 4);
            e.outputs = vec![format!("{id}/ch001.wav")];
            m.entries.push(e);
        }
        m.timestamps.mode = "run".into();
        let back = Manifest::parse(&m.serialize()).unwrap();
        prop_assert_eq!(back, m);
    }
}

fn assert_nearest(model: &ClusterModel, pts: &[Vec<f64>], labels: &[usize]) -> Result<(), TestCaseError> {
    for (p, &l) in pts.iter().zip(labels) {
        let d = |c: &Vec<f64>| c.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let own = d(&model.centroids[l]);
        prop_assert!(model.centroids.iter().all(|c| own <= d(c) + 1e-12));
    }
    Ok(())
}
