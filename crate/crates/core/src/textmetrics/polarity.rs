use super::Lexicons;
use crate::encoding::default_tokenizer;

/// Tokens that flip the sign of a lexicon hit shortly after them. `t` covers
/// contractions such as "don't", which the tokenizer splits as `don ' t`.
pub const NEGATORS: [&str; 9] = ["not", "no", "never", "t", "nor", "neither", "without", "hardly", "cannot"];

/// How many preceding tokens are searched for a negator.
pub const NEGATION_WINDOW: usize = 2;

/// Mean lexicon weight of the matched tokens, 0 with no matches.
pub fn polarity(text: &str, lex: &Lexicons) -> f64 {
    let tokens = default_tokenizer().tokens(text);
    let (mut sum, mut hits) = (0.0, 0usize);
    for (i, tok) in tokens.iter().enumerate() {
        let Some(w) = lex.weight(tok) else { continue };
        let negated = tokens[i.saturating_sub(NEGATION_WINDOW)..i]
            .iter()
            .any(|t| NEGATORS.contains(&t.as_str()));
        sum += if negated { -w } else { w };
        hits += 1;
    }
    if hits == 0 {
        0.0
    } else {
        sum / hits as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lex() -> Lexicons {
        Lexicons::parse("a", "great,1\nbad,-1").unwrap()
    }

    #[test]
    fn no_hits_is_neutral() {
        assert_eq!(polarity("the kettle arrived", &lex()), 0.0);
    }

    #[test]
    fn mean_of_hits() {
        assert!((polarity("great great bad", &lex()) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn negation_window() {
        assert_eq!(polarity("not great", &lex()), -1.0);
        assert_eq!(polarity("not very great", &lex()), -1.0);
        assert_eq!(polarity("not really very great", &lex()), 1.0);
        assert_eq!(polarity("I don't like it, bad", &lex()), -1.0);
        assert_eq!(polarity("it isn't bad", &lex()), 1.0);
    }

    proptest! {
        #[test]
        fn bounded(text in "[a-z ,.']{0,80}") {
            let p = polarity(&text, &Lexicons::bundled());
            prop_assert!((-1.0..=1.0).contains(&p));
        }
    }
}
