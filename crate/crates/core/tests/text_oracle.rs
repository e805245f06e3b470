//! Edit-distance alignment and cue location against exhaustive search.

use proptest::prelude::*;
use storyremix_core::analysis::locate_cue;
use storyremix_core::text::{approximate_find, levenshtein, normalize_ci, slice_chars};

/// Levenshtein by unmemoized recursion over every edit script.
fn exhaustive_levenshtein(a: &[char], b: &[char]) -> usize {
    match (a, b) {
        ([], _) => b.len(),
        (_, []) => a.len(),
        ([x, ra @ ..], [y, rb @ ..]) => {
            let keep = exhaustive_levenshtein(ra, rb) + usize::from(x != y);
            let del = exhaustive_levenshtein(ra, b) + 1;
            let ins = exhaustive_levenshtein(a, rb) + 1;
            keep.min(del).min(ins)
        }
    }
}

fn small_text() -> impl Strategy<Value = Vec<char>> {
    prop::collection::vec(prop::sample::select(vec!['a', 'b', 'c', ' ']), 0..=6)
}

proptest! {
    #[test]
    fn levenshtein_matches_exhaustive(a in small_text(), b in small_text()) {
        prop_assert_eq!(levenshtein(&a, &b), exhaustive_levenshtein(&a, &b));
    }

    #[test]
    fn approximate_find_is_best_substring(
        hay in prop::collection::vec(prop::sample::select(vec!['a', 'b', 'c']), 1..=8),
        pattern in prop::collection::vec(prop::sample::select(vec!['a', 'b', 'c']), 1..=4),
        from in 0usize..3,
    ) {
        let found = approximate_find(&hay, &pattern, from);
        if from >= hay.len() {
            prop_assert!(found.is_none());
        } else {
            let m = found.unwrap();
            // Minimum over every non-empty substring starting at or after `from`.
            let best = (from..hay.len())
                .flat_map(|s| (s + 1..=hay.len()).map(move |e| (s, e)))
                .map(|(s, e)| levenshtein(&pattern, &hay[s..e]))
                .min()
                .unwrap();
            prop_assert_eq!(m.distance, best);
            prop_assert!(m.start >= from && m.start < m.end && m.end <= hay.len());
            prop_assert_eq!(levenshtein(&pattern, &hay[m.start..m.end]), m.distance);
        }
    }

    #[test]
    fn located_cues_slice_back(
        words in prop::collection::vec("[a-zA-Zé]{1,6}", 3..10),
        seps in prop::collection::vec(prop::sample::select(vec![" ", "  ", "\n", " \t"]), 10),
        start in 0usize..3,
        len in 1usize..4,
    ) {
        let text: String = words.iter().zip(seps.iter().cycle()).map(|(w, s)| format!("{w}{s}")).collect();
        let end = (start + len).min(words.len());
        let cue = words[start..end].join(" ").to_uppercase();
        let (s, e) = locate_cue(&text, &cue).expect("cue taken from the text");
        prop_assert_eq!(normalize_ci(slice_chars(&text, s, e)), normalize_ci(&cue));
    }
}

#[test]
fn offsets_are_char_indices() {
    let text = "Çà et là, the glass slipper glittered.";
    let (s, e) = locate_cue(text, "glass  SLIPPER").unwrap();
    assert_eq!((s, e), (14, 27));
    assert_eq!(slice_chars(text, s, e), "glass slipper");
}

#[test]
fn missing_cue_is_not_located() {
    assert_eq!(locate_cue("The wolf waited.", "a secret door"), None);
    assert_eq!(locate_cue("The wolf waited.", "   "), None);
}
