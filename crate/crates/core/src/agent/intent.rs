use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scheduler::Objective;

const DEFAULT_RULES: &str = include_str!("default_rules.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    /// `"<position>:<keyword>"`, position counted from 1 in table order.
    pub id: String,
    /// Lowercased.
    pub keyword: String,
    pub objective: Objective,
}

/// Ordered keyword table; the first matching rule wins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleTable {
    rules: Vec<Rule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Intent {
    pub objective: Objective,
    pub raw_query: String,
    pub matched_rule: String,
}

impl Default for RuleTable {
    fn default() -> Self {
        Self::parse(DEFAULT_RULES).expect("shipped rule table parses")
    }
}

impl RuleTable {
    /// The table text shipped with the crate.
    pub fn default_text() -> &'static str {
        DEFAULT_RULES
    }

    /// Parses `keyword -> objective` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rules = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (keyword, objective) = line.split_once("->").ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected `keyword -> objective`, got {line:?}"),
            })?;
            let keyword = keyword.trim().to_lowercase();
            if keyword.is_empty() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "empty keyword".into(),
                });
            }
            let objective: Objective =
                objective.trim().parse().map_err(|e: Error| Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            rules.push(Rule {
                id: format!("{}:{keyword}", rules.len() + 1),
                keyword,
                objective,
            });
        }
        if rules.is_empty() {
            return Err(Error::Parse {
                line: 0,
                message: "rule table has no rules".into(),
            });
        }
        Ok(Self { rules })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// Maps a free-text request onto an objective.
    pub fn parse_intent(&self, query: &str) -> Result<Intent> {
        let lowered = query.to_lowercase();
        if lowered.trim().is_empty() {
            return Err(Error::Argument("empty query".into()));
        }
        self.rules
            .iter()
            .find(|r| lowered.contains(&r.keyword))
            .map(|r| Intent {
                objective: r.objective,
                raw_query: query.to_string(),
                matched_rule: r.id.clone(),
            })
            .ok_or_else(|| Error::UnrecognizedIntent {
                query: query.to_string(),
                available: Objective::ALL.to_vec(),
            })
    }
}

/// [`RuleTable::parse_intent`] against the shipped table.
pub fn parse_intent(query: &str) -> Result<Intent> {
    RuleTable::default().parse_intent(query)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_phrases() {
        let video = parse_intent("Higher speed for video streaming").unwrap();
        assert_eq!(video.objective, Objective::MaxRate);
        assert_eq!(video.matched_rule, "2:speed");

        let sensors = parse_intent("Save power for sensors").unwrap();
        assert_eq!(sensors.objective, Objective::MinPower);

        let ee = parse_intent("please maximize energy efficiency").unwrap();
        assert_eq!(ee.objective, Objective::MaxEe);
    }

    #[test]
    fn unrecognized_lists_objectives() {
        match parse_intent("hello") {
            Err(Error::UnrecognizedIntent { query, available }) => {
                assert_eq!(query, "hello");
                assert_eq!(available.len(), 3);
            }
            other => panic!("{other:?}"),
        }
        let msg = parse_intent("hello").unwrap_err().to_string();
        assert!(msg.contains("max-rate") && msg.contains("min-power") && msg.contains("max-ee"));
    }

    #[test]
    fn first_match_wins() {
        let i = parse_intent("fast but save power").unwrap();
        assert_eq!(i.objective, Objective::MaxRate);
    }

    #[test]
    fn case_insensitive() {
        assert_eq!(
            parse_intent("GO GREEN").unwrap().objective,
            Objective::MaxEe
        );
    }

    #[test]
    fn custom_table_order() {
        let table =
            RuleTable::parse("green -> max-ee\n# c\nfast -> max-rate # trailing\n").unwrap();
        assert_eq!(table.rules().len(), 2);
        assert_eq!(
            table.parse_intent("fast and green").unwrap().objective,
            Objective::MaxEe
        );
    }

    #[test]
    fn bad_tables() {
        assert!(matches!(
            RuleTable::parse("fast max-rate"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            RuleTable::parse("\nfast -> quickest"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(RuleTable::parse("# only comments").is_err());
    }

    #[test]
    fn empty_query_rejected() {
        assert!(matches!(parse_intent("   "), Err(Error::Argument(_))));
    }
}
