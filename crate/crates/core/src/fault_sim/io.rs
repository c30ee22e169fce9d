// SPDX-License-Identifier: Apache-2.0

//! Stimulus JSON files and campaign CSV tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CampaignResult, SimError, Stimulus};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StimulusFile {
    inputs: Vec<String>,
    vectors: Vec<String>,
    #[serde(default)]
    initial_state: BTreeMap<String, u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    observe: Option<Vec<String>>,
}

fn parse_bits(s: &str) -> Result<Vec<bool>, SimError> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(SimError::BadBit(other)),
        })
        .collect()
}

impl Stimulus {
    /// Read the JSON stimulus format:
    /// `{"inputs": [..], "vectors": ["0110", ..], "initial_state": {"q": 1}, "observe": [..]}`.
    pub fn from_json(text: &str) -> Result<Stimulus, SimError> {
        let file: StimulusFile = serde_json::from_str(text)?;
        let vectors = file
            .vectors
            .iter()
            .map(|v| parse_bits(v))
            .collect::<Result<_, _>>()?;
        let initial_state = file
            .initial_state
            .into_iter()
            .map(|(name, bit)| match bit {
                0 => Ok((name, false)),
                1 => Ok((name, true)),
                _ => Err(SimError::BadBit(char::from_digit(u32::from(bit % 10), 10).unwrap_or('?'))),
            })
            .collect::<Result<_, _>>()?;
        Ok(Stimulus {
            inputs: file.inputs,
            vectors,
            initial_state,
            observe: file.observe,
        })
    }

    pub fn to_json(&self) -> String {
        let file = StimulusFile {
            inputs: self.inputs.clone(),
            vectors: self
                .vectors
                .iter()
                .map(|v| v.iter().map(|&b| if b { '1' } else { '0' }).collect())
                .collect(),
            initial_state: self
                .initial_state
                .iter()
                .map(|(k, &v)| (k.clone(), u8::from(v)))
                .collect(),
            observe: self.observe.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("stimulus serializes");
        s.push('\n');
        s
    }
}

/// One data row of a campaign CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignRow {
    pub ff_name: String,
    pub failure_count: u64,
    pub cycles: u64,
    pub fit: f64,
    pub ffr: f64,
}

/// `ff_name,failure_count,cycles,fit,ffr`, one row per flip-flop, then a
/// `TOTAL` row carrying the summed failures and the aggregate rate.
pub fn write_campaign_csv(c: &CampaignResult) -> String {
    let mut out = String::from("ff_name,failure_count,cycles,fit,ffr\n");
    for r in &c.per_ff {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.name, r.failure_count, r.injection_count, r.fit, r.ffr
        ));
    }
    let total: u64 = c.per_ff.iter().map(|r| r.failure_count).sum();
    out.push_str(&format!("TOTAL,{total},{},,{}\n", c.cycles, c.aggregate));
    out
}

/// Parse the per-flip-flop rows of a campaign CSV (the `TOTAL` row is skipped).
pub fn read_campaign_csv(text: &str) -> Result<Vec<CampaignRow>, SimError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| SimError::Csv(e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != ["ff_name", "failure_count", "cycles", "fit", "ffr"] {
        return Err(SimError::Csv(format!("unexpected header {:?}", header)));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| SimError::Csv(e.to_string()))?;
        if &rec[0] == "TOTAL" {
            continue;
        }
        let bad = |field: &str| SimError::Csv(format!("row {}: bad {field}", i + 2));
        rows.push(CampaignRow {
            ff_name: rec[0].to_string(),
            failure_count: rec[1].parse().map_err(|_| bad("failure_count"))?,
            cycles: rec[2].parse().map_err(|_| bad("cycles"))?,
            fit: rec[3].parse().map_err(|_| bad("fit"))?,
            ffr: rec[4].parse().map_err(|_| bad("ffr"))?,
        });
    }
    Ok(rows)
}
