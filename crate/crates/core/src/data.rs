//! Bundled data files and the line-list format they share.
//!
//! Every list is UTF-8, one entry per line, `#` comments and blank lines
//! ignored. The same parsers load user-supplied replacements from disk.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::Result;

pub const LEXICON: &str = include_str!("../data/lexicon.tsv");
pub const CLUSTERS: &str = include_str!("../data/clusters.txt");
pub const COMMON_WORDS: &str = include_str!("../data/common_words.txt");
pub const PUBLIC_SUFFIXES: &str = include_str!("../data/public_suffix_icann.dat");

pub const TLD_BAD: &str = include_str!("../data/tld/bad.txt");
pub const TLD_SUSPICIOUS: &str = include_str!("../data/tld/suspicious.txt");
pub const TLD_NORMAL: &str = include_str!("../data/tld/normal.txt");
pub const TLD_IANA: &str = include_str!("../data/tld/iana.txt");
pub const SHORTENERS: &str = include_str!("../data/tld/shorteners.txt");

pub const TIMEX: &str = include_str!("../data/keywords/timex.txt");
pub const CURRENCY: &str = include_str!("../data/keywords/currency.txt");
pub const GREETINGS: &str = include_str!("../data/keywords/greetings.txt");
pub const OPT_OUT: &str = include_str!("../data/keywords/optout.txt");
pub const FORWARD: &str = include_str!("../data/keywords/forward.txt");
pub const FREE_PHONE_PREFIXES: &str = include_str!("../data/keywords/free_phone_prefixes.txt");
pub const FREE_MAIL: &str = include_str!("../data/keywords/free_mail.txt");
pub const US_NETWORKS: &str = include_str!("../data/keywords/us_networks.txt");
pub const STOPWORDS: &str = include_str!("../data/keywords/stopwords.txt");

/// Non-comment, non-blank lines, trimmed.
pub fn lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

pub fn lowercase_set(text: &str) -> BTreeSet<String> {
    lines(text).map(str::to_lowercase).collect()
}

/// Reads `path` if given, otherwise returns the bundled text.
pub fn read_or_bundled(path: Option<&Path>, bundled: &'static str) -> Result<std::borrow::Cow<'static, str>> {
    match path {
        Some(p) => Ok(crate::error::read_to_string(p)?.into()),
        None => Ok(bundled.into()),
    }
}

/// Value of a `# key: value` metadata comment, if present.
pub fn header_value<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines()
        .take_while(|l| l.trim().is_empty() || l.trim_start().starts_with('#'))
        .filter_map(|l| l.trim_start().strip_prefix('#'))
        .filter_map(|l| l.trim().strip_prefix(key))
        .filter_map(|rest| rest.trim_start().strip_prefix(':'))
        .map(str::trim)
        .next()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_value_reads_version() {
        assert_eq!(header_value("# version: 7\nx\n", "version"), Some("7"));
        assert_eq!(header_value("x\n# version: 7\n", "version"), None);
    }

    #[test]
    fn bundled_lists_are_nonempty() {
        for text in [TLD_BAD, TLD_SUSPICIOUS, TLD_NORMAL, TLD_IANA, SHORTENERS, TIMEX, CURRENCY, COMMON_WORDS] {
            assert!(lines(text).count() > 3);
        }
    }
}
