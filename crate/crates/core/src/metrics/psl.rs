//! Registrable-domain (eSLD) lookup against a vendored public suffix list.

use std::collections::HashSet;
use std::sync::OnceLock;

use crate::ingest::DomainLabel;

const LIST: &str = include_str!("../../data/public_suffix_list.dat");

pub struct SuffixList {
    rules: HashSet<String>,
    /// `*.x` rules, stored as `x`.
    wildcards: HashSet<String>,
    /// `!x` rules, stored as `x`.
    exceptions: HashSet<String>,
}

fn to_ascii(name: &str) -> String {
    idna::domain_to_ascii(name).unwrap_or_else(|_| name.to_ascii_lowercase())
}

impl SuffixList {
    pub fn parse(text: &str) -> Self {
        let mut list = SuffixList {
            rules: HashSet::new(),
            wildcards: HashSet::new(),
            exceptions: HashSet::new(),
        };
        for line in text.lines() {
            let rule = line.split_whitespace().next().unwrap_or("");
            if rule.is_empty() || rule.starts_with("//") {
                continue;
            }
            if let Some(r) = rule.strip_prefix('!') {
                list.exceptions.insert(to_ascii(r));
            } else if let Some(r) = rule.strip_prefix("*.") {
                list.wildcards.insert(to_ascii(r));
            } else {
                list.rules.insert(to_ascii(rule));
            }
        }
        list
    }

    /// The bundled snapshot.
    pub fn bundled() -> &'static SuffixList {
        static LIST_CELL: OnceLock<SuffixList> = OnceLock::new();
        LIST_CELL.get_or_init(|| SuffixList::parse(LIST))
    }

    /// Number of labels of the public suffix of `labels` (at least 1, per the
    /// implicit `*` rule).
    fn suffix_labels(&self, labels: &[&str]) -> usize {
        let n = labels.len();
        for i in 0..n {
            if self.exceptions.contains(&labels[i..].join(".")) {
                return n - i - 1;
            }
        }
        let mut best = 1;
        for i in 0..n {
            let len = n - i;
            if len <= best {
                break;
            }
            if self.rules.contains(&labels[i..].join("."))
                || (i + 1 < n && self.wildcards.contains(&labels[i + 1..].join(".")))
            {
                best = len;
            }
        }
        best
    }

    /// Registrable domain of `host`, or `None` when `host` is itself a public
    /// suffix.
    pub fn registrable_domain(&self, host: &str) -> Option<String> {
        let host = to_ascii(host.trim_end_matches('.'));
        let labels: Vec<&str> = host.split('.').collect();
        if labels.iter().any(|l| l.is_empty()) {
            return None;
        }
        let ps = self.suffix_labels(&labels);
        (labels.len() > ps).then(|| labels[labels.len() - ps - 1..].join("."))
    }
}

/// The effective second-level domain of a hostname label; absent for IP
/// labels and for hostnames that are public suffixes.
pub fn esld_of(domain: &DomainLabel) -> Option<String> {
    SuffixList::bundled().registrable_domain(domain.hostname()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct reading of the matching algorithm: scan every rule, keep the
    /// matching ones, prefer exceptions, then the rule with most labels.
    fn oracle(text: &str, host: &str) -> Option<String> {
        let labels: Vec<&str> = host.split('.').collect();
        let matches = |rule: &str| {
            let r: Vec<&str> = rule.split('.').collect();
            r.len() <= labels.len()
                && r.iter()
                    .rev()
                    .zip(labels.iter().rev())
                    .all(|(a, b)| *a == "*" || a == b)
        };
        let mut exception: Option<usize> = None;
        let mut longest = 1;
        for line in text.lines() {
            let rule = line.split_whitespace().next().unwrap_or("");
            if rule.is_empty() || rule.starts_with("//") {
                continue;
            }
            let (exc, body) = match rule.strip_prefix('!') {
                Some(b) => (true, b),
                None => (false, rule),
            };
            let body: Vec<String> = body
                .split('.')
                .map(|l| if l == "*" { l.to_string() } else { to_ascii(l) })
                .collect();
            if matches(&body.join(".")) {
                if exc {
                    exception = Some(body.len() - 1);
                } else {
                    longest = longest.max(body.len());
                }
            }
        }
        let ps = exception.unwrap_or(longest);
        (labels.len() > ps).then(|| labels[labels.len() - ps - 1..].join("."))
    }

    #[test]
    fn matches_linear_scan_oracle() {
        let list = SuffixList::bundled();
        for host in [
            "a.b.example.co.uk",
            "x.example.com",
            "co.uk",
            "example.invalidtld",
            "www.ck",
            "a.www.ck",
            "foo.bar.ck",
            "city.kawasaki.jp",
            "a.b.kawasaki.jp",
            "scribe.logs.roku.com",
            "s3.amazonaws.com",
        ] {
            assert_eq!(list.registrable_domain(host), oracle(LIST, host), "{host}");
        }
    }

    #[test]
    fn frozen_examples() {
        let list = SuffixList::bundled();
        assert_eq!(list.registrable_domain("a.b.example.co.uk").as_deref(), Some("example.co.uk"));
        assert_eq!(list.registrable_domain("x.example.com").as_deref(), Some("example.com"));
        assert_eq!(list.registrable_domain("co.uk"), None);
        assert_eq!(list.registrable_domain("com"), None);
        assert_eq!(list.registrable_domain("www.ck").as_deref(), Some("www.ck"));
        assert_eq!(list.registrable_domain("foo.bar.ck").as_deref(), Some("foo.bar.ck"));
    }

    #[test]
    fn labels() {
        assert_eq!(esld_of(&DomainLabel::sni("x.example.com").unwrap()).as_deref(), Some("example.com"));
        assert_eq!(esld_of(&DomainLabel::ip("203.0.113.7".parse().unwrap())), None);
    }
}
