//! The `Document`: the unit of work flowing through every web-pipeline
//! stage, from raw archive record to final corpus entry.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// Pipeline position of a document. Transitions are monotone: a document
/// only ever moves forward through this order.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingested,
    Stage1Extracted,
    Stage1Kept,
    Deduped,
    Stage2Extracted,
    Stage2Kept,
    Decontaminated,
    Final,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingested,
        Stage::Stage1Extracted,
        Stage::Stage1Kept,
        Stage::Deduped,
        Stage::Stage2Extracted,
        Stage::Stage2Kept,
        Stage::Decontaminated,
        Stage::Final,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Ingested => "ingested",
            Stage::Stage1Extracted => "stage1_extracted",
            Stage::Stage1Kept => "stage1_kept",
            Stage::Deduped => "deduped",
            Stage::Stage2Extracted => "stage2_extracted",
            Stage::Stage2Kept => "stage2_kept",
            Stage::Decontaminated => "decontaminated",
            Stage::Final => "final",
        }
    }
}

/// Serialize the 128-bit document id as a fixed-width hex string: JSON
/// numbers cannot carry 128 bits faithfully, and hex ids grep well.
pub mod u128_hex {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u128, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:032x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u128, D::Error> {
        let s = String::deserialize(d)?;
        u128::from_str_radix(&s, 16).map_err(serde::de::Error::custom)
    }
}

/// Same hex encoding for lists of document ids.
pub mod u128_hex_vec {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u128], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| format!("{x:032x}")))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u128>, D::Error> {
        let strings = Vec::<String>::deserialize(d)?;
        strings
            .into_iter()
            .map(|s| u128::from_str_radix(&s, 16).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// One web document and its accumulated pipeline state. Serialized as JSON
/// Lines with `null` for absent optionals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Document {
    /// Content-derived 128-bit identifier; stable across reruns.
    #[serde(with = "u128_hex")]
    pub doc_id: u128,
    pub url: String,
    /// Crawl snapshot this record came from (`YYYY-WW`).
    pub snapshot_id: String,
    /// HTML after math optimization; present from ingestion onward.
    pub html_optimized: Option<String>,
    /// Extracted main-content text; present from Stage1Extracted onward.
    pub text: Option<String>,
    /// English-probability from language ID; present from Stage1Kept onward.
    pub lang_score: Option<f64>,
    /// Math-classifier probability.
    pub math_score: Option<f64>,
    /// Educational-quality score (0..=5) when an LLM scorer has run.
    pub edu_score: Option<u8>,
    pub stage: Stage,
    /// Free-form processing flags ("too_short", "oversize_html", ...).
    pub flags: BTreeSet<String>,
}

impl Document {
    pub fn new(doc_id: u128, url: impl Into<String>, snapshot_id: impl Into<String>) -> Self {
        Document {
            doc_id,
            url: url.into(),
            snapshot_id: snapshot_id.into(),
            html_optimized: None,
            text: None,
            lang_score: None,
            math_score: None,
            edu_score: None,
            stage: Stage::Ingested,
            flags: BTreeSet::new(),
        }
    }

    /// Move forward to `stage` if not already there or past it. Stages never
    /// regress, which is what makes stage reruns idempotent.
    pub fn advance(&mut self, stage: Stage) {
        if stage > self.stage {
            self.stage = stage;
        }
    }

    pub fn flag(&mut self, name: &str) {
        self.flags.insert(name.to_string());
    }

    pub fn has_flag(&self, name: &str) -> bool {
        self.flags.contains(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_order_is_monotone() {
        for pair in Stage::ALL.windows(2) {
            assert!(pair[0] < pair[1]);
        }
    }

    #[test]
    fn advance_never_regresses() {
        let mut doc = Document::new(42, "https://example.org/a", "2024-46");
        doc.advance(Stage::Stage1Kept);
        assert_eq!(doc.stage, Stage::Stage1Kept);
        doc.advance(Stage::Ingested);
        assert_eq!(doc.stage, Stage::Stage1Kept, "advance must not move backward");
        doc.advance(Stage::Stage1Kept);
        assert_eq!(doc.stage, Stage::Stage1Kept);
    }

    #[test]
    fn serializes_with_hex_id_and_null_optionals() {
        let doc = Document::new(0xdead_beef, "https://example.org", "2024-46");
        let json = serde_json::to_value(&doc).unwrap();
        assert_eq!(json["doc_id"], "000000000000000000000000deadbeef");
        assert!(json["text"].is_null());
        assert!(json["edu_score"].is_null());
        assert_eq!(json["stage"], "ingested");

        let back: Document = serde_json::from_value(json).unwrap();
        assert_eq!(back.doc_id, 0xdead_beef);
        assert_eq!(back.stage, Stage::Ingested);
    }
}
