use proptest::prelude::*;
use shortspam::entity::{parse_domain, position_code, EntityExtractor, EntityKind, PositionCode};
use shortspam::tld::TldTables;

fn extractor() -> &'static EntityExtractor {
    static EX: std::sync::OnceLock<EntityExtractor> = std::sync::OnceLock::new();
    EX.get_or_init(EntityExtractor::bundled)
}

fn piece() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-zA-Z]{1,9}",
        "[0-9]{1,4}",
        "[0-9OolIS8B]{3,12}",
        "[a-z0-9-]{1,8}\\.[a-z]{2,4}",
        "(www\\.)?[a-z]{2,8}\\.(com|tk|pw|co\\.uk|xyz|info)(/[a-z0-9]{1,5})?",
        "https?://[a-z0-9.]{1,12}",
        "\\(?[0-9]{3}\\)?[ .-][0-9]{3}[ .-][0-9]{4}",
        "[a-z]{2,6}@[a-z]{2,6}\\.(com|net)",
        "[$€£][0-9]{1,4}",
        "[.,!?:/]",
    ]
}

fn message() -> impl Strategy<Value = String> {
    proptest::collection::vec((piece(), prop_oneof![Just(" "), Just(""), Just(". "), Just("\n")]), 0..16)
        .prop_map(|v| v.into_iter().map(|(p, s)| p + s).collect())
}

// Schemeless dotted tokens whose last label is guaranteed not to be a valid TLD.
// Candidates with an explicit scheme are taken at face value.
fn invalid_dotted() -> impl Strategy<Value = (String, String)> {
    let tables = TldTables::bundled();
    ("[a-z0-9]{1,10}", proptest::collection::vec("[a-z]{1,6}", 0..2), "[a-z]{2,7}", any::<bool>(), "[a-z]{0,4}")
        .prop_filter("tld must be invalid", move |(_, _, tld, _, _)| !tables.is_valid_tld(tld))
        .prop_map(|(label, mid, tld, www, path)| {
            let mut host = label;
            for m in mid {
                host = format!("{host}.{m}");
            }
            host = format!("{host}.{tld}");
            if www {
                host = format!("www.{host}");
            }
            let tok = if path.is_empty() { host } else { format!("{host}/{path}") };
            (tok, tld)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn extraction_is_deterministic(t in message()) {
        prop_assert_eq!(extractor().extract(&t), extractor().extract(&t));
        let fresh = EntityExtractor::bundled();
        prop_assert_eq!(fresh.extract(&t), extractor().extract(&t));
    }

    #[test]
    fn phone_canonicals_are_digit_strings(t in message()) {
        for e in extractor().extract(&t).of_kind(EntityKind::Phone) {
            prop_assert!(e.canonical.chars().all(|c| c.is_ascii_digit()), "{:?}", e);
            prop_assert!(e.canonical.len() >= 7, "{:?}", e);
        }
    }

    #[test]
    fn spans_lie_inside_the_text(t in message()) {
        let n = t.chars().count();
        for e in extractor().extract(&t).entities() {
            prop_assert!(e.span.0 < e.span.1 && e.span.1 <= n);
            let raw: String = t.chars().skip(e.span.0).take(e.span.1 - e.span.0).collect();
            prop_assert_eq!(&raw, &e.raw);
        }
    }

    #[test]
    fn every_schemeless_url_has_a_valid_tld(t in message()) {
        let tables = extractor().tables();
        for e in extractor().extract(&t).of_kind(EntityKind::Url) {
            let d = parse_domain(&e.canonical).unwrap();
            if d.is_ip || e.canonical.contains("://") {
                continue;
            }
            let last = d.host.rsplit('.').next().unwrap();
            prop_assert!(tables.is_valid_tld(last), "{:?} in {:?}", e, t);
        }
    }

    #[test]
    fn invalid_tld_never_yields_a_url((tok, tld) in invalid_dotted(), before in "[a-zA-Z ]{0,12}", after in "[a-zA-Z ]{0,12}") {
        let text = format!("{before} {tok} {after}");
        let urls: Vec<_> = extractor().extract(&text).of_kind(EntityKind::Url).cloned().collect();
        prop_assert!(
            urls.iter().all(|u| !u.canonical.contains(&format!(".{tld}"))),
            "{:?} from {:?}", urls, text
        );
    }

    #[test]
    fn position_code_total_and_monotone(len in 1usize..400, a in 0usize..400, w in 1usize..50, shift in 1usize..100) {
        let start = a % len;
        let end = (start + w).min(len);
        let code = position_code((start, end), len).unwrap();
        prop_assert_ne!(code, PositionCode::Absent);
        if end + shift <= len {
            let moved = position_code((start + shift, end + shift), len).unwrap();
            prop_assert!(moved.value() >= code.value(), "{:?} -> {:?}", code, moved);
        }
    }

    #[test]
    fn position_code_rejects_invalid_spans(len in 0usize..100, start in 0usize..120, w in 0usize..30) {
        let end = start + w;
        let r = position_code((start, end), len);
        prop_assert_eq!(r.is_ok(), start < end && end <= len);
    }
}

#[test]
fn thirds() {
    assert_eq!(position_code((0, 10), 100).unwrap(), PositionCode::Begin);
    assert_eq!(position_code((90, 100), 100).unwrap(), PositionCode::End);
    assert_eq!(position_code((40, 60), 100).unwrap(), PositionCode::Middle);
}

#[test]
fn table_messages() {
    let ex = extractor();
    let s = ex.extract("Ive had a lot of fun tonight.tk");
    assert_eq!(s.count(EntityKind::Url), 0);
    assert_eq!(s.of_kind(EntityKind::Timex).map(|e| e.canonical.as_str()).collect::<Vec<_>>(), ["tonight"]);
    let s = ex.extract("Hi, I want to meet you tonight, spamdomain.com.Support me");
    assert_eq!(s.of_kind(EntityKind::Url).map(|e| e.canonical.as_str()).collect::<Vec<_>>(), ["spamdomain.com"]);
    let s = ex.extract("callus now555O5O5O5O");
    assert_eq!(s.of_kind(EntityKind::Phone).map(|e| e.canonical.as_str()).collect::<Vec<_>>(), ["5550505050"]);
}

#[test]
fn suffix_aware_domain_split() {
    let d = parse_domain("http://a.b.example.co.uk/x").unwrap();
    assert_eq!((d.host.as_str(), d.registrable_domain.as_str(), d.tld.as_str()), ("a.b.example.co.uk", "example.co.uk", "co.uk"));
    let d = parse_domain("spamdomain.com").unwrap();
    assert_eq!((d.host.as_str(), d.registrable_domain.as_str(), d.tld.as_str()), ("spamdomain.com", "spamdomain.com", "com"));
    assert!(extractor().tables().is_shortener("bit.ly"));
}
