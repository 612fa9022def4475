use std::collections::HashMap;

use crate::encoding::default_tokenizer;

/// Stand-in match count for an n-gram order with no matches.
pub const BLEU_EPSILON: f64 = 0.1;

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// Clipped n-gram matches and the candidate's n-gram total.
pub fn modified_precision(candidate: &[String], reference: &[String], n: usize) -> (usize, usize) {
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let matches = cand
        .iter()
        .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
        .sum();
    (matches, candidate.len().saturating_sub(n - 1))
}

fn combine(matches: [usize; 4], totals: [usize; 4], cand_len: usize, ref_len: usize) -> f64 {
    if cand_len == 0 {
        return 0.0;
    }
    let log_p: f64 = (0..4)
        .map(|i| {
            let m = if matches[i] == 0 { BLEU_EPSILON } else { matches[i] as f64 };
            (m / totals[i].max(1) as f64).ln()
        })
        .sum::<f64>()
        / 4.0;
    let bp = (1.0 - ref_len as f64 / cand_len as f64).exp().min(1.0);
    bp * log_p.exp()
}

/// Sentence-level BLEU-4 with a brevity penalty and ε-smoothing of empty orders.
pub fn bleu4(candidate: &[String], reference: &[String]) -> f64 {
    let mut m = [0; 4];
    let mut t = [0; 4];
    for n in 1..=4 {
        (m[n - 1], t[n - 1]) = modified_precision(candidate, reference, n);
    }
    combine(m, t, candidate.len(), reference.len())
}

/// BLEU-4 of two raw texts under the default word tokenizer.
pub fn bleu4_text(candidate: &str, reference: &str) -> f64 {
    let tok = default_tokenizer();
    bleu4(&tok.tokens(candidate), &tok.tokens(reference))
}

/// Corpus-level BLEU-4: counts and lengths pooled before combining.
pub fn corpus_bleu4(pairs: &[(Vec<String>, Vec<String>)]) -> f64 {
    let mut m = [0; 4];
    let mut t = [0; 4];
    let (mut c, mut r) = (0, 0);
    for (cand, reference) in pairs {
        for n in 1..=4 {
            let (a, b) = modified_precision(cand, reference, n);
            m[n - 1] += a;
            t[n - 1] += b;
        }
        c += cand.len();
        r += reference.len();
    }
    combine(m, t, c, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn identity_is_one() {
        let r = toks("the cat is on the mat");
        assert!((bleu4(&r, &r) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clipped_unigram_precision() {
        let (m, t) = modified_precision(&toks("the the the the the the the"), &toks("the cat is on the mat"), 1);
        assert_eq!((m, t), (2, 7));
    }

    #[test]
    fn short_candidate_is_penalised() {
        let r = toks("the cat is on the mat today");
        let c = toks("the cat is on the");
        let (m, t) = modified_precision(&c, &r, 4);
        assert_eq!((m, t), (2, 2));
        let bp = (1.0f64 - 7.0 / 5.0).exp();
        assert!(bp < 1.0);
        assert!((bleu4(&c, &r) - bp).abs() < 1e-12);
    }

    #[test]
    fn empty_candidate_scores_zero() {
        assert_eq!(bleu4(&[], &toks("a b c d")), 0.0);
    }

    #[test]
    fn corpus_of_identical_pairs_is_one() {
        let p = vec![(toks("a b c d e"), toks("a b c d e")), (toks("x y z w"), toks("x y z w"))];
        assert!((corpus_bleu4(&p) - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn bleu_is_bounded(c in proptest::collection::vec(0u8..6, 0..12), r in proptest::collection::vec(0u8..6, 1..12)) {
            let f = |v: &[u8]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
            let s = bleu4(&f(&c), &f(&r));
            prop_assert!((0.0..=1.0 + 1e-12).contains(&s));
            if c.len() >= 4 && (s - 1.0).abs() < 1e-12 {
                prop_assert_eq!(&c, &r);
            }
        }
    }
}
