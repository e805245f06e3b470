//! The bundled tales analyzed from the committed cassette.

use std::path::PathBuf;
use std::sync::OnceLock;

use storyremix_core::analysis::{AnnotationFlag, ClassifierKind};
use storyremix_core::arc::ValenceLexicon;
use storyremix_core::corpus;
use storyremix_core::gateway::{Cassette, Gateway, GatewayError};
use storyremix_core::model::{Dimension, TurningPoint};
use storyremix_core::pipeline;
use storyremix_core::search::{self, BlockQuery, Brush, SearchError};
use storyremix_core::store::{AnalysisState, Store};
use storyremix_core::text::normalize_ws;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn gateway() -> Gateway {
    Gateway::replay(Cassette::open(fixtures().join("cassette.jsonl")).unwrap())
}

fn analyzed() -> &'static Store {
    static STORE: OnceLock<Store> = OnceLock::new();
    STORE.get_or_init(|| {
        let mut store = Store::new();
        for e in corpus::read_corpus_input(&fixtures().join("manifest.json")).unwrap() {
            store.ingest(&e.title, &e.body).unwrap();
        }
        let summary = pipeline::analyze_store(
            &mut store,
            &gateway(),
            ClassifierKind::PromptDefault,
            &ValenceLexicon::bundled(),
            &[],
        );
        assert_eq!(summary.processed, ["st-0001", "st-0002", "st-0003"]);
        store
    })
}

#[test]
fn matches_golden_snapshot() {
    let golden = std::fs::read_to_string(fixtures().join("golden/store.json")).unwrap();
    assert_eq!(analyzed().snapshot(), golden);
    assert!(analyzed().integrity_violations().is_empty());
}

#[test]
fn blocks_tile_the_stories_in_order() {
    let store = analyzed();
    assert_eq!(store.blocks.len(), 20);
    for story in store.stories.values() {
        let blocks = store.blocks_of(&story.id);
        for pair in blocks.windows(2) {
            assert!(pair[0].char_span.1 <= pair[1].char_span.0);
        }
        let paragraphs: Vec<String> = story
            .body
            .split("\n\n")
            .map(normalize_ws)
            .filter(|p| !p.is_empty())
            .collect();
        let texts: Vec<String> = blocks.iter().map(|b| normalize_ws(&b.text)).collect();
        assert_eq!(texts, paragraphs, "{}", story.title);
        assert_eq!(store.analysis[&story.id].state, AnalysisState::Done);
    }
}

#[test]
fn corrupted_segment_is_repaired_and_logged() {
    let warnings = &analyzed().analysis["st-0003"].warnings;
    assert!(
        warnings.iter().any(|w| w.starts_with("block 4: repaired")),
        "{warnings:?}"
    );
}

#[test]
fn annotation_flags_are_recorded() {
    let store = analyzed();
    let invented = &store.annotations["st-0002-b05-s02"];
    assert!(invented.is_ungrounded() && invented.cues.is_empty());
    let partial = &store.annotations["st-0001-b03-s02"];
    assert!(partial.verified);
    assert_eq!(partial.dropped_cues, ["a secret door behind the hearth"]);
    let truncated = &store.annotations["st-0001-b07-s01"];
    assert_eq!(truncated.dimensions.len(), 2);
    assert!(truncated
        .flags
        .contains(&AnnotationFlag::CategoriesTruncated { returned: 3 }));
    // Unknown category: dropped from the store, kept in the log.
    assert!(!store.annotations.contains_key("st-0001-b04-s02"));
    assert!(store.analysis["st-0001"]
        .warnings
        .iter()
        .any(|w| w.contains("st-0001-b04-s02")));
    for ann in store.annotations.values() {
        assert!((1..=2).contains(&ann.dimensions.len()), "{}", ann.id);
    }
}

#[test]
fn arcs_cover_every_block() {
    let store = analyzed();
    for (id, arc) in &store.arcs {
        assert_eq!(arc.points.len(), store.blocks_of(id).len());
        for p in &arc.points {
            assert_eq!(p.signed_valence, 2.0 * p.raw_valence - 1.0);
        }
    }
    assert_eq!(store.protagonists["st-0003"], "the miller's daughter");
}

#[test]
fn lexical_search_ranks_suspense_toward_withholding() {
    let query = BlockQuery {
        q: Some("suspense".into()),
        ..Default::default()
    };
    let cards = search::filter_blocks(analyzed(), &query, None).unwrap();
    assert!(!cards.is_empty());
    let first = &cards[0];
    assert!(
        first.strategies.iter().any(|s| s.name == "Withholding Information"),
        "top card {} has {:?}",
        first.block_id,
        first.strategies.iter().map(|s| &s.name).collect::<Vec<_>>()
    );
    let scores: Vec<f64> = cards.iter().map(|c| c.score.unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn filters_are_conjunctive() {
    let store = analyzed();
    let climax = BlockQuery {
        turning_point: Some("Climax".into()),
        ..Default::default()
    };
    let cards = search::filter_blocks(store, &climax, None).unwrap();
    let expected: Vec<&String> = store
        .turning_points
        .values()
        .filter(|l| l.types.contains(&TurningPoint::Climax))
        .map(|l| &l.block_id)
        .collect();
    assert!(!expected.is_empty());
    assert_eq!(cards.iter().map(|c| &c.block_id).collect::<Vec<_>>(), expected);

    let both = BlockQuery {
        dimension: Some("INFORMATION".into()),
        ..climax
    };
    let narrowed = search::filter_blocks(store, &both, None).unwrap();
    assert!(narrowed.len() <= cards.len());
    for c in &narrowed {
        assert!(c.turning_points.contains(&TurningPoint::Climax));
        assert!(c
            .strategies
            .iter()
            .any(|s| s.dimensions.contains(&Dimension::Information)));
    }
}

#[test]
fn unknown_filters_and_missing_embeddings_are_errors() {
    let bad = BlockQuery {
        dimension: Some("VIBES".into()),
        ..Default::default()
    };
    assert!(matches!(
        search::filter_blocks(analyzed(), &bad, None),
        Err(SearchError::UnknownFilter {
            filter: "dimension",
            ..
        })
    ));
    let semantic = BlockQuery {
        q_semantic: Some("a hidden truth".into()),
        ..Default::default()
    };
    assert!(matches!(
        search::filter_blocks(analyzed(), &semantic, None),
        Err(SearchError::Gateway(GatewayError::NoProvider))
    ));
}

#[test]
fn brush_equals_linear_scan() {
    let store = analyzed();
    let all = search::all_cards(store);
    let rects = [
        Brush {
            x0: 0.0,
            x1: 1.0,
            y0: -1.0,
            y1: 1.0,
        },
        Brush {
            x0: 0.0,
            x1: 0.5,
            y0: 0.0,
            y1: 1.0,
        },
        Brush {
            x0: 0.25,
            x1: 0.75,
            y0: -1.0,
            y1: 0.0,
        },
        Brush {
            x0: 1.0,
            x1: 1.0,
            y0: -1.0,
            y1: 1.0,
        },
        Brush {
            x0: 0.4,
            x1: 0.4,
            y0: 0.3,
            y1: 0.3,
        },
    ];
    for rect in rects {
        let got: Vec<String> = search::brush(store, rect)
            .unwrap()
            .into_iter()
            .map(|c| c.block_id)
            .collect();
        let scan: Vec<String> = all
            .iter()
            .filter(|c| {
                let (x, y) = (c.x.unwrap(), c.y.unwrap());
                rect.x0 <= x && x <= rect.x1 && rect.y0 <= y && y <= rect.y1
            })
            .map(|c| c.block_id.clone())
            .collect();
        assert_eq!(got, scan, "{rect:?}");
    }
    assert_eq!(search::brush(store, rects[0]).unwrap().len(), 20);
    let inverted = Brush {
        x0: 0.8,
        x1: 0.2,
        y0: -1.0,
        y1: 1.0,
    };
    assert!(matches!(
        search::brush(store, inverted),
        Err(SearchError::InvalidRange(_))
    ));
}

#[test]
fn replay_miss_is_reported() {
    let mut store = Store::new();
    store.ingest("Unrecorded", "A tale nobody has recorded yet.").unwrap();
    let summary = pipeline::analyze_store(
        &mut store,
        &gateway(),
        ClassifierKind::PromptDefault,
        &ValenceLexicon::bundled(),
        &[],
    );
    assert_eq!(summary.failed, ["st-0001"]);
    let err = store.analysis["st-0001"].error.clone().unwrap();
    assert_eq!((err.stage.as_str(), err.code.as_str()), ("segment", "FixtureMiss"));
}
