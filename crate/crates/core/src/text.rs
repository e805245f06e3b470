//! Whitespace normalization with offset tracking, verbatim search and
//! approximate substring alignment.
//!
//! All offsets in this crate are Unicode scalar (`char`) indices, never byte
//! offsets, so spans survive a round trip through JSON consumers that do not
//! share Rust's UTF-8 slicing rules.

/// A whitespace-collapsed view of a text that remembers where every
/// normalized character came from.
#[derive(Debug, Clone)]
pub struct Normalized {
    pub chars: Vec<char>,
    /// `origin[k]` is the char index in the source of normalized char `k`.
    /// A collapsed whitespace run maps to its first whitespace char.
    pub origin: Vec<usize>,
}

impl Normalized {
    /// Collapses every whitespace run into one space and trims both ends.
    /// With `fold_case`, each char is lowercased (first scalar of its
    /// lowercase mapping, which keeps the mapping one-to-one).
    pub fn new(source: &str, fold_case: bool) -> Self {
        let mut chars = Vec::with_capacity(source.len());
        let mut origin = Vec::with_capacity(source.len());
        let mut pending_space: Option<usize> = None;
        for (idx, ch) in source.chars().enumerate() {
            if ch.is_whitespace() {
                if !chars.is_empty() && pending_space.is_none() {
                    pending_space = Some(idx);
                }
                continue;
            }
            if let Some(at) = pending_space.take() {
                chars.push(' ');
                origin.push(at);
            }
            chars.push(if fold_case { fold(ch) } else { ch });
            origin.push(idx);
        }
        Normalized { chars, origin }
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    /// Maps a non-empty normalized range back to a `[start, end)` char span of
    /// the source text.
    pub fn source_span(&self, start: usize, end: usize) -> (usize, usize) {
        debug_assert!(start < end && end <= self.chars.len());
        (self.origin[start], self.origin[end - 1] + 1)
    }

    /// Index of the normalized char at or after source char `source_idx`.
    pub fn position_at_or_after(&self, source_idx: usize) -> usize {
        self.origin.partition_point(|&o| o < source_idx)
    }

    pub fn as_string(&self) -> String {
        self.chars.iter().collect()
    }
}

fn fold(ch: char) -> char {
    ch.to_lowercase().next().unwrap_or(ch)
}

/// Whitespace-normalized copy of `s`.
pub fn normalize_ws(s: &str) -> String {
    Normalized::new(s, false).as_string()
}

/// Whitespace-normalized, lowercased copy of `s`.
pub fn normalize_ci(s: &str) -> String {
    Normalized::new(s, true).as_string()
}

pub fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Slice `s` by char indices. Out-of-range bounds are clamped.
pub fn slice_chars(s: &str, start: usize, end: usize) -> &str {
    let mut indices = s.char_indices().map(|(b, _)| b).chain(std::iter::once(s.len()));
    let begin = indices.by_ref().nth(start).unwrap_or(s.len());
    let stop = if end > start {
        indices.nth(end - start - 1).unwrap_or(s.len())
    } else {
        begin
    };
    &s[begin..stop]
}

/// First exact occurrence of `needle` in `hay` starting at or after `from`.
pub fn find_exact(hay: &[char], needle: &[char], from: usize) -> Option<usize> {
    if needle.is_empty() || from >= hay.len() || needle.len() > hay.len() - from {
        return None;
    }
    hay[from..]
        .windows(needle.len())
        .position(|w| w == needle)
        .map(|p| p + from)
}

/// Best approximate occurrence of a pattern inside a text.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxMatch {
    pub start: usize,
    pub end: usize,
    pub distance: usize,
}

impl ApproxMatch {
    /// Edit distance divided by the longer of the two aligned lengths.
    pub fn normalized_distance(&self, pattern_len: usize) -> f64 {
        let denom = pattern_len.max(self.end - self.start).max(1);
        self.distance as f64 / denom as f64
    }
}

/// Semi-global edit-distance alignment: the pattern must be consumed
/// completely, the text may be entered and left anywhere at or after `from`.
///
/// Returns the lowest-cost alignment; ties go to the earliest end position.
pub fn approximate_find(hay: &[char], pattern: &[char], from: usize) -> Option<ApproxMatch> {
    let m = pattern.len();
    if m == 0 || from >= hay.len() {
        return None;
    }
    // cost[i] / start[i]: best alignment of pattern[..i] ending at the current
    // text column, and the text index where that alignment began.
    let mut cost: Vec<usize> = (0..=m).collect();
    let mut start: Vec<usize> = vec![from; m + 1];
    let mut best: Option<ApproxMatch> = None;
    let mut next_cost = vec![0usize; m + 1];
    let mut next_start = vec![0usize; m + 1];

    for (j, &tc) in hay.iter().enumerate().skip(from) {
        next_cost[0] = 0;
        next_start[0] = j + 1;
        for i in 1..=m {
            let sub = cost[i - 1] + usize::from(pattern[i - 1] != tc);
            let skip_text = cost[i] + 1;
            let skip_pattern = next_cost[i - 1] + 1;
            let (c, s) = if sub <= skip_text && sub <= skip_pattern {
                (sub, start[i - 1])
            } else if skip_pattern <= skip_text {
                (skip_pattern, next_start[i - 1])
            } else {
                (skip_text, start[i])
            };
            next_cost[i] = c;
            next_start[i] = s;
        }
        std::mem::swap(&mut cost, &mut next_cost);
        std::mem::swap(&mut start, &mut next_start);
        let candidate = ApproxMatch {
            start: start[m],
            end: j + 1,
            distance: cost[m],
        };
        if candidate.start < candidate.end && best.is_none_or(|b| candidate.distance < b.distance) {
            best = Some(candidate);
        }
        if best.is_some_and(|b| b.distance == 0) {
            break;
        }
    }
    best
}

/// Plain Levenshtein distance over chars.
pub fn levenshtein(a: &[char], b: &[char]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(ca != cb)).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn collapses_and_maps_whitespace() {
        let n = Normalized::new("  Hello \n\t World  ", false);
        assert_eq!(n.as_string(), "Hello World");
        assert_eq!(n.origin[0], 2);
        assert_eq!(n.origin[5], 7);
        assert_eq!(n.source_span(6, 11), (11, 16));
    }

    #[test]
    fn case_folding_keeps_mapping() {
        let n = Normalized::new("The Precious\n  SUNSTONE", true);
        assert_eq!(n.as_string(), "the precious sunstone");
        assert_eq!(n.len(), n.origin.len());
    }

    #[test]
    fn slices_by_char_index() {
        let s = "héllo wörld";
        assert_eq!(slice_chars(s, 1, 5), "éllo");
        assert_eq!(slice_chars(s, 6, 11), "wörld");
        assert_eq!(slice_chars(s, 6, 99), "wörld");
        assert_eq!(slice_chars(s, 3, 3), "");
    }

    #[test]
    fn exact_search_respects_from() {
        let hay = chars("ab ab ab");
        assert_eq!(find_exact(&hay, &chars("ab"), 0), Some(0));
        assert_eq!(find_exact(&hay, &chars("ab"), 1), Some(3));
        assert_eq!(find_exact(&hay, &chars("ab"), 7), None);
    }

    #[test]
    fn approximate_finds_single_substitution() {
        let hay = chars("once upon a time there lived a king");
        let m = approximate_find(&hay, &chars("there livid a"), 0).unwrap();
        assert_eq!(m.distance, 1);
        assert_eq!(hay[m.start..m.end].iter().collect::<String>(), "there lived a");
    }

    #[test]
    fn levenshtein_basics() {
        assert_eq!(levenshtein(&chars("kitten"), &chars("sitting")), 3);
        assert_eq!(levenshtein(&chars(""), &chars("abc")), 3);
        assert_eq!(levenshtein(&chars("same"), &chars("same")), 0);
    }

    /// Oracle: fixed-start Wagner-Fischer from every start position.
    fn brute_best(hay: &[char], pat: &[char]) -> usize {
        let mut best = usize::MAX;
        for s in 0..hay.len() {
            for e in s + 1..=hay.len() {
                best = best.min(levenshtein(pat, &hay[s..e]));
            }
        }
        best
    }

    proptest::proptest! {
        #[test]
        fn approximate_distance_matches_brute_force(
            hay in "[abc ]{1,14}",
            pat in "[abc]{1,6}",
        ) {
            let h = chars(&hay);
            let p = chars(&pat);
            let m = approximate_find(&h, &p, 0).unwrap();
            proptest::prop_assert_eq!(m.distance, brute_best(&h, &p));
            proptest::prop_assert_eq!(levenshtein(&p, &h[m.start..m.end]), m.distance);
        }

        #[test]
        fn normalized_span_round_trips(s in "[a-z \n\t]{0,40}") {
            let n = Normalized::new(&s, false);
            if !n.is_empty() {
                let (a, b) = n.source_span(0, n.len());
                proptest::prop_assert_eq!(normalize_ws(slice_chars(&s, a, b)), n.as_string());
            }
        }
    }
}
