//! Open-end dynamic time warping over signed valence sequences.
//!
//! `D[i][j] = |a_i - b_j| + min(D[i-1][j], D[i][j-1], D[i-1][j-1])` with a
//! shared start (`D[0][0] = 0`, other boundary cells unreachable). The
//! open-end distance is `min_j D[m][j]`: the query must be consumed in full
//! but may stop anywhere in the reference.

use super::ArcError;

fn check(seq: &[f64]) -> Result<(), ArcError> {
    if seq.is_empty() {
        return Err(ArcError::EmptySequence);
    }
    if let Some(&v) = seq.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
        return Err(ArcError::ValueOutOfRange(v));
    }
    Ok(())
}

/// Last row of the cumulative cost table, `D[m][1..=n]`.
fn last_row(query: &[f64], reference: &[f64]) -> Result<Vec<f64>, ArcError> {
    check(query)?;
    check(reference)?;
    let n = reference.len();
    // Any real path costs at most 2 per step over at most m + n steps.
    let unreachable = 2.0 * (query.len() + n) as f64 + 1.0;

    let mut prev = vec![unreachable; n + 1];
    prev[0] = 0.0;
    let mut cur = vec![unreachable; n + 1];
    for &a in query {
        cur[0] = unreachable;
        for j in 1..=n {
            let best = prev[j].min(cur[j - 1]).min(prev[j - 1]);
            cur[j] = (a - reference[j - 1]).abs() + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev.split_off(1))
}

/// Open-end DTW distance `D*` of `query` against `reference`.
pub fn dtw_open_end(query: &[f64], reference: &[f64]) -> Result<f64, ArcError> {
    Ok(last_row(query, reference)?.into_iter().fold(f64::INFINITY, f64::min))
}

/// Classic DTW distance `D[m][n]` (both ends anchored).
pub fn dtw_full(query: &[f64], reference: &[f64]) -> Result<f64, ArcError> {
    Ok(*last_row(query, reference)?.last().expect("reference is non-empty"))
}

/// Similarity in `[0, 1]` from the open-end distance, normalized by the
/// largest cost any alignment of these lengths could accumulate per step.
pub fn arc_similarity(query: &[f64], reference: &[f64]) -> Result<f64, ArcError> {
    let d = dtw_open_end(query, reference)?;
    Ok(similarity_from_distance(d, query.len(), reference.len()))
}

pub fn similarity_from_distance(distance: f64, m: usize, n: usize) -> f64 {
    (1.0 - distance / (2.0 * m.max(n) as f64)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_sequences_cost_nothing() {
        let a = [0.1, -0.3, 0.8];
        assert_eq!(dtw_open_end(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn single_cell() {
        assert_eq!(dtw_open_end(&[1.0], &[-1.0]).unwrap(), 2.0);
        assert_eq!(arc_similarity(&[1.0], &[-1.0]).unwrap(), 0.0);
    }

    #[test]
    fn open_end_stops_early() {
        assert_eq!(dtw_open_end(&[0.5], &[0.5, -1.0]).unwrap(), 0.0);
        assert_eq!(dtw_full(&[0.5], &[0.5, -1.0]).unwrap(), 1.5);
    }

    #[test]
    fn zero_distance_is_full_similarity() {
        let a = [0.0, 0.2, 0.4, 0.2, -0.6];
        assert_eq!(arc_similarity(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(dtw_open_end(&[], &[0.0]), Err(ArcError::EmptySequence));
        assert_eq!(dtw_open_end(&[0.0], &[]), Err(ArcError::EmptySequence));
        assert_eq!(arc_similarity(&[1.5], &[0.0]), Err(ArcError::ValueOutOfRange(1.5)));
        assert!(dtw_open_end(&[f64::NAN], &[0.0]).is_err());
    }
}
