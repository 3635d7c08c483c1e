use crate::{Error, Result};

/// Joint counts of a binary forecast against binary observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ContingencyTable {
    /// Event forecast and observed.
    pub hits: u64,
    /// Event forecast but not observed.
    pub false_alarms: u64,
    /// Event observed but not forecast.
    pub misses: u64,
    /// Event neither forecast nor observed.
    pub correct_negatives: u64,
}

impl ContingencyTable {
    pub fn total(&self) -> u64 {
        self.hits + self.false_alarms + self.misses + self.correct_negatives
    }

    /// Cell-wise sum, used to pool folds.
    pub fn add(&self, other: &ContingencyTable) -> ContingencyTable {
        ContingencyTable {
            hits: self.hits + other.hits,
            false_alarms: self.false_alarms + other.false_alarms,
            misses: self.misses + other.misses,
            correct_negatives: self.correct_negatives + other.correct_negatives,
        }
    }
}

/// Counts forecast/observation pairs into a contingency table.
pub fn tabulate(forecast: &[bool], observed: &[bool]) -> Result<ContingencyTable> {
    if forecast.len() != observed.len() {
        return Err(Error::InvalidInput(format!(
            "{} forecasts against {} observations",
            forecast.len(),
            observed.len()
        )));
    }
    let mut t = ContingencyTable::default();
    for (&f, &o) in forecast.iter().zip(observed) {
        match (f, o) {
            (true, true) => t.hits += 1,
            (true, false) => t.false_alarms += 1,
            (false, true) => t.misses += 1,
            (false, false) => t.correct_negatives += 1,
        }
    }
    Ok(t)
}

/// Categorical scores; `None` marks an undefined ratio (zero denominator).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    /// Probability of detection, `hits / (hits + misses)`.
    pub pod: Option<f64>,
    /// False alarm ratio, `false_alarms / (hits + false_alarms)`.
    pub far: Option<f64>,
    /// Success ratio, `1 - far`.
    pub sr: Option<f64>,
    /// Frequency bias, `(hits + false_alarms) / (hits + misses)`.
    pub bias: Option<f64>,
    /// Critical success index (threat score),
    /// `hits / (hits + false_alarms + misses)`.
    pub csi: Option<f64>,
}

pub fn scores(t: &ContingencyTable) -> Scores {
    let a = t.hits as f64;
    let b = t.false_alarms as f64;
    let c = t.misses as f64;
    let ratio = |num: f64, den: f64| if den > 0.0 { Some(num / den) } else { None };
    let far = ratio(b, a + b);
    Scores {
        pod: ratio(a, a + c),
        far,
        sr: far.map(|f| 1.0 - f),
        bias: ratio(a + b, a + c),
        csi: ratio(a, a + b + c),
    }
}

/// Differences `after - before` per metric, with improvement flags.
///
/// Rising detection, success ratio, and threat score are improvements;
/// a falling false alarm ratio is an improvement. Frequency bias has no
/// improvement direction. Flags are `None` when either side is undefined
/// or the delta is exactly zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoresDelta {
    pub pod: Option<f64>,
    pub far: Option<f64>,
    pub sr: Option<f64>,
    pub bias: Option<f64>,
    pub csi: Option<f64>,
    pub pod_improved: Option<bool>,
    pub far_improved: Option<bool>,
    pub sr_improved: Option<bool>,
    pub csi_improved: Option<bool>,
}

pub fn delta_scores(after: &Scores, before: &Scores) -> ScoresDelta {
    let diff = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(a), Some(b)) => Some(a - b),
        _ => None,
    };
    let rose = |d: Option<f64>| d.and_then(|v| if v == 0.0 { None } else { Some(v > 0.0) });
    let fell = |d: Option<f64>| d.and_then(|v| if v == 0.0 { None } else { Some(v < 0.0) });
    let pod = diff(after.pod, before.pod);
    let far = diff(after.far, before.far);
    let sr = diff(after.sr, before.sr);
    let csi = diff(after.csi, before.csi);
    ScoresDelta {
        pod,
        far,
        sr,
        bias: diff(after.bias, before.bias),
        csi,
        pod_improved: rose(pod),
        far_improved: fell(far),
        sr_improved: rose(sr),
        csi_improved: rose(csi),
    }
}

/// Formats an optional metric for CSV and SVG labels: `NA` or six decimals.
pub(crate) fn fmt_metric(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None => "NA".to_string(),
    }
}

/// Renders scores as CSV with header `method,event,pod,far,sr,bias,csi`.
/// Undefined metrics appear as the literal `NA`.
pub fn scores_csv(rows: &[(String, String, Scores)]) -> String {
    let mut out = String::from("method,event,pod,far,sr,bias,csi\n");
    for (method, event, s) in rows {
        out.push_str(&format!(
            "{method},{event},{},{},{},{},{}\n",
            fmt_metric(s.pod),
            fmt_metric(s.far),
            fmt_metric(s.sr),
            fmt_metric(s.bias),
            fmt_metric(s.csi),
        ));
    }
    out
}

// ───────────────────────────── Tests ─────────────────────────────
