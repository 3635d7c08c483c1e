use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::{Error, Result};

/// The five binary weather events, in table column order: frontal
/// passage, northeasterly wind surge, southwest flow, heavy rain, and
/// a tropical cyclone in the northwest Pacific.
pub const EVENTS: [&str; 5] = ["FT", "NE", "SWF", "HR", "NWPTC"];

/// Per-date binary flags for the five events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTable {
    dates: Vec<String>,
    flags: Vec<[bool; 5]>,
}

/// Count and relative frequency of one event over the table's dates.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStats {
    pub event: String,
    pub count: usize,
    /// `None` for an empty table.
    pub frequency: Option<f64>,
}

impl LabelTable {
    pub fn new(dates: Vec<String>, flags: Vec<[bool; 5]>) -> Result<Self> {
        if dates.len() != flags.len() {
            return Err(Error::InvalidInput(format!(
                "{} dates but {} flag rows",
                dates.len(),
                flags.len()
            )));
        }
        for (i, d) in dates.iter().enumerate() {
            if dates[..i].contains(d) {
                return Err(Error::Format(format!("duplicate date {d}")));
            }
        }
        Ok(LabelTable { dates, flags })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    /// All flags for one event as a column, in date order.
    pub fn event_column(&self, event: &str) -> Result<Vec<bool>> {
        let idx = EVENTS
            .iter()
            .position(|e| *e == event)
            .ok_or_else(|| Error::InvalidInput(format!("unknown event {event:?}")))?;
        Ok(self.flags.iter().map(|f| f[idx]).collect())
    }

    pub fn flags(&self, row: usize) -> [bool; 5] {
        self.flags[row]
    }
}

/// Parses the label CSV (`date,FT,NE,SWF,HR,NWPTC`, flags 0/1). Errors
/// carry the 1-based line number.
pub fn load_labels(path: &Path) -> Result<LabelTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{}: empty file", path.display())))?
        .1;
    let expect = format!("date,{}", EVENTS.join(","));
    if header.trim_end() != expect {
        return Err(Error::Format(format!(
            "line 1: header {header:?}, expected {expect:?}"
        )));
    }
    let mut dates = Vec::new();
    let mut flags = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Format(format!(
                "line {lineno}: {} fields, expected 6",
                fields.len()
            )));
        }
        let date = fields[0].trim().to_string();
        if dates.contains(&date) {
            return Err(Error::Format(format!("line {lineno}: duplicate date {date}")));
        }
        let mut row = [false; 5];
        for (k, field) in fields[1..].iter().enumerate() {
            row[k] = match field.trim() {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Format(format!(
                        "line {lineno}: flag {other:?} for {} is not 0/1",
                        EVENTS[k]
                    )))
                }
            };
        }
        dates.push(date);
        flags.push(row);
    }
    LabelTable::new(dates, flags)
}

pub fn save_labels(table: &LabelTable, path: &Path) -> Result<()> {
    let mut out = format!("date,{}\n", EVENTS.join(","));
    for (date, flags) in table.dates.iter().zip(&table.flags) {
        let row: Vec<&str> = flags.iter().map(|&f| if f { "1" } else { "0" }).collect();
        let _ = writeln!(out, "{date},{}", row.join(","));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Per-event counts and frequencies (count over number of dates).
pub fn label_stats(table: &LabelTable) -> Vec<EventStats> {
    let n = table.len();
    EVENTS
        .iter()
        .enumerate()
        .map(|(k, event)| {
            let count = table.flags.iter().filter(|f| f[k]).count();
            EventStats {
                event: event.to_string(),
                count,
                frequency: (n > 0).then(|| count as f64 / n as f64),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_csv(content: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.csv");
        fs::write(&path, content).unwrap();
        (dir, path)
    }

    #[test]
    fn round_trip_preserves_the_table() {
        let table = LabelTable::new(
            vec!["2013-01-01".into(), "2013-01-02".into()],
            vec![[true, false, false, true, false], [false, true, true, false, true]],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.csv");
        save_labels(&table, &path).unwrap();
        assert_eq!(load_labels(&path).unwrap(), table);
    }

    #[test]
    fn header_and_flags_are_validated_with_line_numbers() {
        let (_d, path) = write_csv("date,FT,NE\n2013-01-01,0,1\n");
        assert!(matches!(load_labels(&path).unwrap_err(), Error::Format(ref m) if m.contains("line 1")));

        let (_d, path) = write_csv("date,FT,NE,SWF,HR,NWPTC\n2013-01-01,0,1,0,1\n");
        assert!(matches!(load_labels(&path).unwrap_err(), Error::Format(ref m) if m.contains("line 2")));

        let (_d, path) = write_csv("date,FT,NE,SWF,HR,NWPTC\n2013-01-01,0,1,0,1,2\n");
        let err = load_labels(&path).unwrap_err();
        assert!(matches!(err, Error::Format(ref m) if m.contains("line 2") && m.contains("NWPTC")));

        let (_d, path) =
            write_csv("date,FT,NE,SWF,HR,NWPTC\n2013-01-01,0,1,0,1,1\n2013-01-01,1,0,0,0,0\n");
        let err = load_labels(&path).unwrap_err();
        assert!(matches!(err, Error::Format(ref m) if m.contains("line 3") && m.contains("duplicate")));
    }

    #[test]
    fn frequencies_match_the_reference_rounding() {
        // 244 positive days of 1461 prints as 0.17, 702 of 1461 as 0.48.
        let n = 1461;
        let dates: Vec<String> = (0..n).map(|i| format!("d{i:04}")).collect();
        let flags: Vec<[bool; 5]> = (0..n)
            .map(|i| [i < 244, false, false, false, i < 702])
            .collect();
        let table = LabelTable::new(dates, flags).unwrap();
        let stats = label_stats(&table);
        assert_eq!(stats[0].count, 244);
        assert_eq!(format!("{:.2}", stats[0].frequency.unwrap()), "0.17");
        assert_eq!(stats[4].count, 702);
        assert_eq!(format!("{:.2}", stats[4].frequency.unwrap()), "0.48");
        // Exactness of the ratio itself.
        assert_eq!(stats[0].frequency.unwrap(), 244.0 / 1461.0);
    }

    #[test]
    fn empty_table_has_na_frequencies() {
        let table = LabelTable::new(vec![], vec![]).unwrap();
        for s in label_stats(&table) {
            assert_eq!(s.count, 0);
            assert!(s.frequency.is_none());
        }
    }

    #[test]
    fn unknown_event_column_is_rejected() {
        let table = LabelTable::new(vec!["2013-01-01".into()], vec![[false; 5]]).unwrap();
        assert!(table.event_column("XX").is_err());
        assert_eq!(table.event_column("SWF").unwrap(), vec![false]);
    }
}
