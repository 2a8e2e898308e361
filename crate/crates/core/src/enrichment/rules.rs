//! Organization classification: registry names to normalized "doing
//! business as" labels, access modality and category.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::RegistryRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Fixed,
    Mobile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    ConsumerIsp,
    University,
    Fortune100,
    Other,
}

impl Modality {
    pub fn as_str(&self) -> &'static str {
        match self {
            Modality::Fixed => "fixed",
            Modality::Mobile => "mobile",
        }
    }
}

impl Category {
    pub fn as_str(&self) -> &'static str {
        match self {
            Category::ConsumerIsp => "consumer_isp",
            Category::University => "university",
            Category::Fortune100 => "fortune100",
            Category::Other => "other",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fixed" => Ok(Modality::Fixed),
            "mobile" => Ok(Modality::Mobile),
            other => Err(Error::Data(format!("unknown modality {other:?}"))),
        }
    }
}

impl FromStr for Category {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "consumer_isp" | "isp" => Ok(Category::ConsumerIsp),
            "university" => Ok(Category::University),
            "fortune100" | "f100" => Ok(Category::Fortune100),
            "other" => Ok(Category::Other),
            other => Err(Error::Data(format!("unknown category {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OrgClass {
    pub dba_name: String,
    pub modality: Modality,
    pub category: Category,
}

/// A pattern is a case-insensitive substring, or a whole-string glob when it
/// contains `*` or `?`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub pattern: String,
    pub dba: String,
    pub modality: Modality,
    pub category: Category,
}

impl Rule {
    pub fn new(pattern: &str, dba: &str, modality: Modality, category: Category) -> Self {
        Rule {
            pattern: pattern.to_string(),
            dba: dba.to_string(),
            modality,
            category,
        }
    }

    pub fn matches(&self, org_name: &str) -> bool {
        let name = org_name.to_lowercase();
        let pat = self.pattern.to_lowercase();
        if pat.contains(['*', '?']) {
            glob_match(pat.as_bytes(), name.as_bytes())
        } else {
            name.contains(&pat)
        }
    }
}

fn glob_match(pat: &[u8], text: &[u8]) -> bool {
    let (mut p, mut t) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while t < text.len() {
        if p < pat.len() && (pat[p] == b'?' || pat[p] == text[t]) {
            p += 1;
            t += 1;
        } else if p < pat.len() && pat[p] == b'*' {
            star = Some((p, t));
            p += 1;
        } else if let Some((sp, st)) = star {
            p = sp + 1;
            t = st + 1;
            star = Some((sp, st + 1));
        } else {
            return false;
        }
    }
    pat[p..].iter().all(|&c| c == b'*')
}

/// Ordered rule list; the first match wins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleTable {
    pub rules: Vec<Rule>,
}

impl Default for RuleTable {
    fn default() -> Self {
        use Category::*;
        use Modality::*;
        let isp = |p: &str, d: &str, m: Modality| Rule::new(p, d, m, ConsumerIsp);
        let uni = |p: &str| Rule::new(p, p, Fixed, University);
        let f100 = |p: &str| Rule::new(p, p, Fixed, Fortune100);
        let mut rules = vec![
            // mobile arms first so the carrier-wide rules below do not catch them
            isp("*AT&T*Mobility*", "AT&T Mobile", Mobile),
            isp("*AT&T*Wireless*", "AT&T Mobile", Mobile),
            isp("Cellco Partnership", "Verizon Mobile", Mobile),
            isp("*Verizon*Wireless*", "Verizon Mobile", Mobile),
            isp("*Verizon*Mobility*", "Verizon Mobile", Mobile),
            isp("T-Mobile", "T-Mobile", Mobile),
            isp("Sprint", "Sprint", Mobile),
            isp("Comcast", "Comcast", Fixed),
            isp("Charter Communications", "Charter", Fixed),
            isp("Spectrum", "Charter", Fixed),
            isp("Cablevision", "Cablevision", Fixed),
            isp("Optimum", "Cablevision", Fixed),
            isp("RCN *", "RCN", Fixed),
            isp("WideOpenWest", "WOW!", Fixed),
            isp("WOW *", "WOW!", Fixed),
            isp("AT&T", "AT&T", Fixed),
            isp("Verizon", "Verizon", Fixed),
        ];
        rules.extend(
            [
                "University of Chicago",
                "Northwestern University",
                "University of Illinois",
                "Loyola University Chicago",
                "DePaul University",
                "New York University",
                "Columbia University",
                "City University of New York",
                "Rutgers",
                "Temple University",
                "University of Pennsylvania",
                "Drexel University",
            ]
            .map(uni),
        );
        rules.extend(
            [
                "JPMorgan Chase",
                "Bank of America",
                "Citigroup",
                "Goldman Sachs",
                "Morgan Stanley",
                "Walgreen",
                "Boeing",
                "Johnson & Johnson",
                "Prudential Financial",
                "MetLife",
                "Pfizer",
                "Abbott Laboratories",
                "Allstate",
                "State Farm",
                "United Airlines",
                "Archer Daniels Midland",
            ]
            .map(f100),
        );
        RuleTable { rules }
    }
}

impl RuleTable {
    /// Reads `pattern,dba,modality,category` rows, preserving order.
    pub fn from_reader<R: Read>(input: R, source_name: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let headers = reader.headers().map_err(|e| Error::Header {
            source_name: source_name.into(),
            detail: e.to_string(),
        })?;
        if headers.iter().collect::<Vec<_>>() != ["pattern", "dba", "modality", "category"] {
            return Err(Error::Header {
                source_name: source_name.into(),
                detail: "expected columns pattern,dba,modality,category".into(),
            });
        }
        let mut rules = Vec::new();
        for row in reader.records() {
            let row = row?;
            rules.push(Rule {
                pattern: row[0].to_string(),
                dba: row[1].to_string(),
                modality: row[2].parse()?,
                category: row[3].parse()?,
            });
        }
        Ok(RuleTable { rules })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, &path.display().to_string())
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["pattern", "dba", "modality", "category"])?;
        for r in &self.rules {
            w.write_record([r.pattern.as_str(), &r.dba, r.modality.as_str(), r.category.as_str()])?;
        }
        w.flush().map_err(|e| Error::io("<rule writer>", e))?;
        Ok(())
    }
}

const CORPORATE_SUFFIXES: &[&str] = &[
    "llc", "inc", "corp", "corporation", "co", "company", "ltd", "lp", "llp", "plc",
];

/// Strips punctuation and trailing corporate suffixes from a registry name.
pub fn normalize_org_name(name: &str) -> String {
    let cleaned: String = name
        .chars()
        .map(|c| if c == ',' || c == '.' { ' ' } else { c })
        .collect();
    let mut words: Vec<&str> = cleaned.split_whitespace().collect();
    while words.len() > 1
        && CORPORATE_SUFFIXES.contains(&words[words.len() - 1].to_ascii_lowercase().as_str())
    {
        words.pop();
    }
    words.join(" ")
}

/// Classifies a registry record. Unmatched names keep their normalized
/// registry name, fall into `other`, and are mobile only when the name
/// carries "Mobility" or "Wireless".
pub fn classify_org(record: &RegistryRecord, rules: &RuleTable) -> OrgClass {
    if let Some(rule) = rules.rules.iter().find(|r| r.matches(&record.org_name)) {
        return OrgClass {
            dba_name: rule.dba.clone(),
            modality: rule.modality,
            category: rule.category,
        };
    }
    let lower = record.org_name.to_lowercase();
    let modality = if lower.contains("mobility") || lower.contains("wireless") {
        Modality::Mobile
    } else {
        Modality::Fixed
    };
    OrgClass {
        dba_name: normalize_org_name(&record.org_name),
        modality,
        category: Category::Other,
    }
}
