use proptest::prelude::*;
use shortspam::textnorm::{looks_like_entity, normalize, normalize_masked, Lexicon};

fn lexicon() -> &'static Lexicon {
    static LEX: std::sync::OnceLock<Lexicon> = std::sync::OnceLock::new();
    LEX.get_or_init(Lexicon::bundled)
}

fn keys() -> Vec<String> {
    lexicon().iter().map(|(k, _)| k.to_string()).collect()
}

fn token() -> impl Strategy<Value = String> {
    let keys = keys();
    prop_oneof![
        4 => (proptest::sample::select(keys), any::<bool>(), "[.,!?\"(]{0,2}", "[.,!?\")]{0,2}").prop_map(
            |(k, upper, pre, post)| format!("{pre}{}{post}", if upper { k.to_uppercase() } else { k })
        ),
        3 => "[a-zA-Z]{1,8}",
        1 => "[a-z0-9]{1,6}\\.(com|tk|example\\.com)",
        1 => "[0-9]{7,11}",
        1 => "https?://[a-z]{2,6}\\.[a-z]{2,3}/[a-z0-9]{0,4}",
        1 => "[!?.€$]{1,3}",
    ]
}

fn text() -> impl Strategy<Value = String> {
    proptest::collection::vec((token(), prop_oneof![Just(" "), Just("  "), Just("\t"), Just("\n")]), 0..25)
        .prop_map(|parts| parts.into_iter().map(|(t, sep)| format!("{t}{sep}")).collect())
}

// Token-wise lookup done independently of the normalizer.
fn expected_substitutions(text: &str, lex: &Lexicon) -> usize {
    text.split_whitespace()
        .filter(|t| !looks_like_entity(t))
        .filter(|t| {
            let core = t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase();
            !core.is_empty() && lex.get(&core).is_some()
        })
        .count()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn idempotent(t in text()) {
        let once = normalize(&t, lexicon());
        let twice = normalize(&once.normalized, lexicon());
        prop_assert!(twice.substitutions.is_empty(), "{:?}", twice.substitutions);
        prop_assert_eq!(&twice.normalized, &once.normalized);
    }

    #[test]
    fn substitutions_match_token_lookup(t in text()) {
        let n = normalize(&t, lexicon());
        prop_assert_eq!(n.substitutions.len(), expected_substitutions(&t, lexicon()));
    }

    #[test]
    fn word_count_unchanged(t in text()) {
        let n = normalize(&t, lexicon());
        prop_assert_eq!(n.normalized.split_whitespace().count(), t.split_whitespace().count());
    }

    #[test]
    fn replay_reproduces_output(t in text()) {
        let n = normalize(&t, lexicon());
        prop_assert_eq!(n.replay(), n.normalized);
    }

    #[test]
    fn masked_tokens_are_verbatim(t in text()) {
        let all = vec![(0, t.chars().count())];
        let n = normalize_masked(&t, lexicon(), &all);
        prop_assert!(n.substitutions.is_empty());
        prop_assert_eq!(n.normalized, t.split_whitespace().collect::<Vec<_>>().join(" "));
    }
}

#[test]
fn only_the_non_url_token_is_rewritten() {
    let lex = Lexicon::parse("2nite\ttonight\n", "t").unwrap();
    let n = normalize("visit 2nite.example.com 2nite", &lex);
    assert_eq!(n.normalized, "visit 2nite.example.com tonight");
    assert_eq!(n.substitutions.len(), 1);
    assert_eq!(n.substitutions[0].span, (24, 29));
}

#[test]
fn bundled_contractions() {
    let n = normalize("c u 2nite", lexicon());
    assert_eq!(n.normalized, "see you tonight");
    assert_eq!(n.substitutions.len(), 3);
}
