use crate::frames::FrameInventory;

/// Character-level edit distance.
pub fn levenshtein(a: &str, b: &str) -> usize {
    strsim::levenshtein(a, b)
}

/// Maps a predicate to an inventory lemma.
///
/// A provided lemma or the lowercased surface form is used as-is when the
/// inventory knows it. Otherwise the inventory lemma closest to the lowercased
/// surface form by edit distance is chosen, ties going to the lexicographically
/// smallest lemma. Returns `None` only for an empty inventory.
pub fn resolve_lemma(inv: &FrameInventory, predicate_word: &str, provided: Option<&str>) -> Option<String> {
    let surface = predicate_word.to_lowercase();
    let direct = provided
        .into_iter()
        .chain(std::iter::once(surface.as_str()))
        .find(|l| inv.contains_lemma(l));
    if let Some(lemma) = direct {
        return Some(lemma.to_string());
    }
    // `lemmas()` iterates in sorted order, so the first minimum is the smallest.
    let mut best: Option<(usize, &str)> = None;
    for lemma in inv.lemmas() {
        let d = levenshtein(&surface, lemma);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, lemma));
        }
    }
    best.map(|(_, l)| l.to_string())
}
