use crate::finding::{DataSource, Evidence, Finding, RuleId, Severity};
use crate::rules::InvocationRules;

/// One invocation-name requirement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InvocationRule {
    Missing,
    /// R1: one-word names.
    OneWord,
    /// R2: two words, one an article or preposition.
    ArticleOrPreposition,
    /// R3: launch phrase, connecting word or wake word.
    ForbiddenWord,
    /// R4: characters other than lower-case letters, spaces, possessive apostrophes.
    Characters,
    /// W1: a common, non-distinctive name. Advisory.
    NotDistinctive,
}

impl InvocationRule {
    pub fn tag(self) -> &'static str {
        match self {
            InvocationRule::Missing => "missing",
            InvocationRule::OneWord => "R1",
            InvocationRule::ArticleOrPreposition => "R2",
            InvocationRule::ForbiddenWord => "R3",
            InvocationRule::Characters => "R4",
            InvocationRule::NotDistinctive => "W1",
        }
    }

    fn describe(self) -> &'static str {
        match self {
            InvocationRule::Missing => "invocation name is missing",
            InvocationRule::OneWord => "one-word invocation names are not allowed",
            InvocationRule::ArticleOrPreposition => {
                "two-word invocation names may not include an article or preposition"
            }
            InvocationRule::ForbiddenWord => {
                "invocation name contains a launch phrase, connecting word or wake word"
            }
            InvocationRule::Characters => {
                "invocation name may contain only lower-case letters, spaces and possessive apostrophes"
            }
            InvocationRule::NotDistinctive => "invocation name is common and not distinctive",
        }
    }
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

fn bad_characters(name: &str) -> bool {
    let chars: Vec<char> = name.chars().collect();
    chars.iter().enumerate().any(|(i, &c)| {
        if c.is_ascii_lowercase() || c == ' ' {
            return false;
        }
        if is_apostrophe(c) {
            let prev = i.checked_sub(1).map(|p| chars[p]);
            let next = chars.get(i + 1).copied();
            let after_next = chars.get(i + 2).copied();
            let word_end = |c: Option<char>| c.is_none_or(|c| c == ' ');
            // "ryan's note" or "users' list"
            let possessive_s = prev.is_some_and(|p| p.is_ascii_lowercase()) && next == Some('s') && word_end(after_next);
            let plural_possessive = prev == Some('s') && word_end(next);
            return !(possessive_s || plural_possessive);
        }
        true
    })
}

fn bare_word(token: &str) -> String {
    let lower = token.to_lowercase().replace('\u{2019}', "'");
    lower
        .strip_suffix("'s")
        .or_else(|| lower.strip_suffix('\''))
        .unwrap_or(&lower)
        .to_string()
}

/// Checks an invocation name against each requirement independently. The
/// distinctiveness rule is only evaluated when `advisories` is set.
pub fn check_invocation_name(name: &str, rules: &InvocationRules, advisories: bool) -> Vec<Finding> {
    let mut violated = Vec::new();
    let tokens: Vec<&str> = name.split_whitespace().collect();
    if tokens.is_empty() {
        violated.push(InvocationRule::Missing);
    } else {
        let lower: Vec<String> = tokens.iter().map(|t| bare_word(t)).collect();
        let listed = |list: &[String], w: &str| list.iter().any(|x| x == w);

        if tokens.len() == 1 && !rules.brand_whitelist.iter().any(|b| b.eq_ignore_ascii_case(name.trim())) {
            violated.push(InvocationRule::OneWord);
        }
        if tokens.len() == 2 && lower.iter().any(|w| listed(&rules.two_word_forbidden, w)) {
            violated.push(InvocationRule::ArticleOrPreposition);
        }
        if lower.iter().any(|w| {
            listed(&rules.launch_phrases, w) || listed(&rules.connecting_words, w) || listed(&rules.wake_words, w)
        }) {
            violated.push(InvocationRule::ForbiddenWord);
        }
        if bad_characters(name) {
            violated.push(InvocationRule::Characters);
        }
        let normalized = lower.join(" ");
        if advisories && rules.common_names.iter().any(|c| c.eq_ignore_ascii_case(&normalized)) {
            violated.push(InvocationRule::NotDistinctive);
        }
    }

    violated
        .into_iter()
        .map(|rule| {
            let finding = Finding::new(
                RuleId::InvocationName,
                DataSource::InvocationName,
                format!("{}: \"{name}\"", rule.describe()),
                Evidence::element("invocationName", name),
            )
            .with_sub_rule(rule.tag());
            if rule == InvocationRule::NotDistinctive {
                finding.with_severity(Severity::Advisory)
            } else {
                finding
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::RuleSet;

    fn tags(name: &str, adv: bool) -> Vec<String> {
        let rules = RuleSet::default();
        let mut t: Vec<String> = check_invocation_name(name, &rules.invocation, adv)
            .into_iter()
            .filter_map(|f| f.sub_rule)
            .collect();
        t.sort();
        t
    }

    #[test]
    fn representative_names() {
        assert_eq!(tags("jokes", false), ["R1"]);
        assert_eq!(tags("the template", false), ["R2"]);
        assert_eq!(tags("play radio", false), ["R3"]);
        assert_eq!(tags("Ryan's note", false), ["R4"]);
        assert_eq!(tags("AlTranslate", false), ["R1", "R4"]);
        assert_eq!(tags("to jeff", false), ["R2", "R3"]);
        assert_eq!(tags("video app", false), ["R3"]);
        assert_eq!(tags("cake walk", false), Vec::<String>::new());
    }

    #[test]
    fn possessive_apostrophes_allowed() {
        assert!(tags("ryan's note", false).is_empty());
        assert!(tags("the users' list", false).is_empty());
        assert_eq!(tags("rock'n roll", false), ["R4"]);
        assert_eq!(tags("route 66 facts", false), ["R4"]);
    }

    #[test]
    fn whole_token_matching() {
        assert!(tags("application helper", false).is_empty());
        assert_eq!(tags("my funny skill", false), ["R3"]);
    }

    #[test]
    fn distinctiveness_is_advisory_and_opt_in() {
        assert!(tags("hello world", false).is_empty());
        assert_eq!(tags("hello world", true), ["W1"]);
        let rules = RuleSet::default();
        let f = check_invocation_name("hello world", &rules.invocation, true);
        assert_eq!(f[0].severity, Severity::Advisory);
    }

    #[test]
    fn empty_name() {
        assert_eq!(tags("  ", false), ["missing"]);
    }

    #[test]
    fn brand_whitelist_suppresses_one_word() {
        let mut rules = RuleSet::default();
        rules.invocation.brand_whitelist = vec!["beeper".into()];
        assert!(check_invocation_name("beeper", &rules.invocation, false).is_empty());
    }
}
