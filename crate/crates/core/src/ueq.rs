//! UEQ-S scoring: pragmatic (items 1-4), hedonic (items 5-8) and overall
//! scale scores with sample standard deviations.

use std::fmt;
use std::io::Read;

use serde::Serialize;
use thiserror::Error;

pub const ITEM_COUNT: usize = 8;
pub const ITEM_MIN: i8 = -3;
pub const ITEM_MAX: i8 = 3;
/// Offset applied by `--recode` to raw 1..7 answers.
pub const RECODE_OFFSET: i8 = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UeqError {
    #[error("at least 2 responses are needed, got {0}")]
    InsufficientData(usize),
    #[error("participant {participant}: item {item} = {value} is outside {min}..={max}")]
    ItemRange {
        participant: String,
        item: usize,
        value: i64,
        min: i8,
        max: i8,
    },
    #[error("participant {participant}: expected 8 items, got {got}")]
    ItemCount { participant: String, got: usize },
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UeqResponse {
    pub participant_id: String,
    pub items: [i8; ITEM_COUNT],
}

impl UeqResponse {
    pub fn new(participant_id: impl Into<String>, items: &[i64]) -> Result<Self, UeqError> {
        let participant = participant_id.into();
        if items.len() != ITEM_COUNT {
            return Err(UeqError::ItemCount {
                participant,
                got: items.len(),
            });
        }
        let mut out = [0i8; ITEM_COUNT];
        for (i, &v) in items.iter().enumerate() {
            if v < i64::from(ITEM_MIN) || v > i64::from(ITEM_MAX) {
                return Err(UeqError::ItemRange {
                    participant,
                    item: i + 1,
                    value: v,
                    min: ITEM_MIN,
                    max: ITEM_MAX,
                });
            }
            out[i] = v as i8;
        }
        Ok(Self {
            participant_id: participant,
            items: out,
        })
    }

    pub fn pragmatic(&self) -> f64 {
        self.items[..4].iter().map(|&v| f64::from(v)).sum::<f64>() / 4.0
    }

    pub fn hedonic(&self) -> f64 {
        self.items[4..].iter().map(|&v| f64::from(v)).sum::<f64>() / 4.0
    }

    pub fn overall(&self) -> f64 {
        (self.pragmatic() + self.hedonic()) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaleScore {
    pub mean: f64,
    /// Sample standard deviation (n - 1).
    pub sd: f64,
}

impl ScaleScore {
    fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        Self {
            mean,
            sd: (ss / (n - 1.0)).sqrt(),
        }
    }
}

impl fmt::Display for ScaleScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.1} ± {:.1}", self.mean, self.sd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UeqScales {
    pub pragmatic: ScaleScore,
    pub hedonic: ScaleScore,
    /// The mean is (pragmatic + hedonic) / 2 exactly; the SD is taken over
    /// per-participant overall scores.
    pub overall: ScaleScore,
    pub participants: usize,
}

pub fn score(responses: &[UeqResponse]) -> Result<UeqScales, UeqError> {
    if responses.len() < 2 {
        return Err(UeqError::InsufficientData(responses.len()));
    }
    let pragmatic = ScaleScore::from_values(
        &responses
            .iter()
            .map(UeqResponse::pragmatic)
            .collect::<Vec<_>>(),
    );
    let hedonic = ScaleScore::from_values(
        &responses
            .iter()
            .map(UeqResponse::hedonic)
            .collect::<Vec<_>>(),
    );
    let overall_sd = ScaleScore::from_values(
        &responses
            .iter()
            .map(UeqResponse::overall)
            .collect::<Vec<_>>(),
    )
    .sd;
    Ok(UeqScales {
        pragmatic,
        hedonic,
        overall: ScaleScore {
            mean: (pragmatic.mean + hedonic.mean) / 2.0,
            sd: overall_sd,
        },
        participants: responses.len(),
    })
}

/// Mean and SD of each item across participants.
pub fn item_scores(responses: &[UeqResponse]) -> Result<[ScaleScore; ITEM_COUNT], UeqError> {
    if responses.len() < 2 {
        return Err(UeqError::InsufficientData(responses.len()));
    }
    Ok(std::array::from_fn(|i| {
        ScaleScore::from_values(
            &responses
                .iter()
                .map(|r| f64::from(r.items[i]))
                .collect::<Vec<_>>(),
        )
    }))
}

/// Reads `participant,i1,...,i8` rows. With `recode`, answers are on the raw
/// 1..7 scale and are shifted down by 4.
pub fn read_csv(reader: impl Read, recode: bool) -> Result<Vec<UeqResponse>, UeqError> {
    let csv_err = |e: csv::Error| UeqError::Csv(e.to_string());
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let expected: Vec<String> = std::iter::once("participant".to_string())
        .chain((1..=ITEM_COUNT).map(|i| format!("i{i}")))
        .collect();
    if headers.iter().collect::<Vec<_>>() != expected.iter().map(String::as_str).collect::<Vec<_>>()
    {
        return Err(UeqError::Csv(format!(
            "header must be {}, got {}",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let participant = record.get(0).unwrap_or_default().to_string();
        let mut items = Vec::with_capacity(ITEM_COUNT);
        for (i, field) in record.iter().skip(1).enumerate() {
            let v: i64 = field.parse().map_err(|_| {
                UeqError::Csv(format!(
                    "participant {participant}: item {} is not an integer: {field:?}",
                    i + 1
                ))
            })?;
            if recode {
                if !(1..=7).contains(&v) {
                    return Err(UeqError::ItemRange {
                        participant,
                        item: i + 1,
                        value: v,
                        min: 1,
                        max: 7,
                    });
                }
                items.push(v - i64::from(RECODE_OFFSET));
            } else {
                items.push(v);
            }
        }
        out.push(UeqResponse::new(participant, &items)?);
    }
    Ok(out)
}

/// Scale table, one decimal, in the usual three-column layout.
pub fn render_table(scales: &UeqScales) -> String {
    let cells = [
        scales.pragmatic.to_string(),
        scales.hedonic.to_string(),
        scales.overall.to_string(),
    ];
    let heads = ["Pragmatic Quality", "Hedonic Quality", "Overall"];
    let widths: Vec<usize> = heads
        .iter()
        .zip(&cells)
        .map(|(h, c)| h.chars().count().max(c.chars().count()))
        .collect();
    let rule: String = widths
        .iter()
        .map(|w| format!("+{}", "-".repeat(w + 2)))
        .collect::<String>()
        + "+";
    let row = |vals: [&str; 3]| {
        vals.iter()
            .zip(&widths)
            .map(|(v, w)| {
                let pad = w - v.chars().count();
                let left = pad / 2;
                format!("| {}{}{} ", " ".repeat(left), v, " ".repeat(pad - left))
            })
            .collect::<String>()
            + "|"
    };
    format!(
        "{rule}\n{}\n{rule}\n{}\n{rule}\nn = {}\n",
        row(heads),
        row([&cells[0], &cells[1], &cells[2]]),
        scales.participants
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn resp(id: &str, items: [i64; 8]) -> UeqResponse {
        UeqResponse::new(id, &items).unwrap()
    }

    #[test]
    fn all_zero() {
        let s = score(&[resp("a", [0; 8]), resp("b", [0; 8])]).unwrap();
        for scale in [s.pragmatic, s.hedonic, s.overall] {
            assert_eq!(scale, ScaleScore { mean: 0.0, sd: 0.0 });
        }
    }

    #[test]
    fn split_scales() {
        let items = [3, 3, 3, 3, -3, -3, -3, -3];
        let s = score(&[resp("a", items), resp("b", items)]).unwrap();
        assert_eq!(s.pragmatic.mean, 3.0);
        assert_eq!(s.hedonic.mean, -3.0);
        assert_eq!(s.overall.mean, 0.0);
    }

    #[test]
    fn errors() {
        assert_eq!(
            score(&[resp("a", [0; 8])]),
            Err(UeqError::InsufficientData(1))
        );
        assert!(matches!(
            UeqResponse::new("x", &[0, 0, 4, 0, 0, 0, 0, 0]),
            Err(UeqError::ItemRange {
                item: 3,
                value: 4,
                ..
            })
        ));
        assert!(matches!(
            UeqResponse::new("x", &[0; 7]),
            Err(UeqError::ItemCount { got: 7, .. })
        ));
    }

    #[test]
    fn sample_sd() {
        // Pragmatic scores 1 and 3: mean 2, sample SD sqrt(2).
        let s = score(&[
            resp("a", [1, 1, 1, 1, 0, 0, 0, 0]),
            resp("b", [3, 3, 3, 3, 0, 0, 0, 0]),
        ])
        .unwrap();
        assert_eq!(s.pragmatic.mean, 2.0);
        assert!((s.pragmatic.sd - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn csv_and_recode() {
        let text = "participant,i1,i2,i3,i4,i5,i6,i7,i8\np1,7,7,7,7,1,1,1,1\np2,4,4,4,4,4,4,4,4\n";
        let r = read_csv(text.as_bytes(), true).unwrap();
        assert_eq!(r[0].items, [3, 3, 3, 3, -3, -3, -3, -3]);
        assert_eq!(r[1].items, [0; 8]);
        assert!(read_csv(text.as_bytes(), false).is_err());
        assert!(read_csv("participant,a\n".as_bytes(), false).is_err());
        let bad = "participant,i1,i2,i3,i4,i5,i6,i7,i8\np1,0,0,0,0,0,0,0,0,9\n";
        assert!(read_csv(bad.as_bytes(), false).is_err());
    }

    #[test]
    fn table_layout() {
        let s = score(&[resp("a", [3; 8]), resp("b", [1; 8])]).unwrap();
        let t = render_table(&s);
        assert!(
            t.contains("| Pragmatic Quality | Hedonic Quality |  Overall  |"),
            "{t}"
        );
        assert!(t.contains("2.0 ± 1.4"), "{t}");
    }

    fn responses() -> impl Strategy<Value = Vec<UeqResponse>> {
        prop::collection::vec(prop::array::uniform8(-3i64..=3), 2..30).prop_map(|rows| {
            rows.iter()
                .enumerate()
                .map(|(i, r)| UeqResponse::new(format!("p{i}"), r).unwrap())
                .collect()
        })
    }

    proptest! {
        #[test]
        fn overall_is_mean_of_scales(rs in responses()) {
            let s = score(&rs).unwrap();
            prop_assert_eq!(s.overall.mean, (s.pragmatic.mean + s.hedonic.mean) / 2.0);
            let direct = rs.iter().flat_map(|r| r.items).map(f64::from).sum::<f64>() / (8.0 * rs.len() as f64);
            prop_assert!((s.overall.mean - direct).abs() < 1e-12);
        }

        #[test]
        fn permutation_invariant(rs in responses(), seed in any::<u64>()) {
            let mut shuffled = rs.clone();
            let n = shuffled.len();
            let mut k = seed;
            for i in (1..n).rev() {
                k = k.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (k >> 33) as usize % (i + 1));
            }
            let a = score(&rs).unwrap();
            let b = score(&shuffled).unwrap();
            prop_assert!((a.pragmatic.mean - b.pragmatic.mean).abs() < 1e-12);
            prop_assert!((a.hedonic.sd - b.hedonic.sd).abs() < 1e-12);
            prop_assert!((a.overall.sd - b.overall.sd).abs() < 1e-12);
        }

        #[test]
        fn constant_shift_moves_means(rs in prop::collection::vec(prop::array::uniform8(-3i64..=1), 2..20), k in 0i64..=2) {
            let build = |d: i64| -> Vec<UeqResponse> {
                rs.iter().enumerate().map(|(i, r)| {
                    let shifted: Vec<i64> = r.iter().map(|v| v + d).collect();
                    UeqResponse::new(format!("p{i}"), &shifted).unwrap()
                }).collect()
            };
            let a = score(&build(0)).unwrap();
            let b = score(&build(k)).unwrap();
            prop_assert!((b.pragmatic.mean - a.pragmatic.mean - k as f64).abs() < 1e-12);
            prop_assert!((b.hedonic.mean - a.hedonic.mean - k as f64).abs() < 1e-12);
            prop_assert!((b.overall.sd - a.overall.sd).abs() < 1e-12);
        }
    }
}
