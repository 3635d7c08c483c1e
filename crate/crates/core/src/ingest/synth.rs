use chrono::{Days, NaiveDate};

use crate::numerics::SeededRng;
use crate::{Error, Result};

use super::grid::GridFrame;
use super::labels::LabelTable;

/// Event probabilities: the reference counts over 1461 days.
const P_FT: f64 = 244.0 / 1461.0;
const P_NE: f64 = 471.0 / 1461.0;
const P_SWF: f64 = 406.0 / 1461.0;
const P_HR: f64 = 520.0 / 1461.0;
const P_NWPTC: f64 = 702.0 / 1461.0;

const NOISE_AMPLITUDE: f64 = 0.03;
const NOISE_SALT: u64 = 0x4E4F_4953_4500_0000;

/// One additive brightness structure in unit coordinates (x east,
/// y south, both in [0,1]). Parameters are drawn independently of the
/// raster resolution, so a seed fixes the scene at every grid size.
enum Structure {
    /// Linear band through (px, py) at angle `theta`, Gaussian profile
    /// of width `w`.
    Band { px: f64, py: f64, theta: f64, w: f64, a: f64 },
    /// Broad ramp peaking at the northeast (true) or southwest corner.
    Ramp { northeast: bool, a: f64 },
    /// Compact bright blob (used for both cyclone cores and rain cells).
    Blob { cx: f64, cy: f64, r: f64, a: f64 },
}

impl Structure {
    fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            Structure::Band { px, py, theta, w, a } => {
                let d = (x - px) * theta.sin() - (y - py) * theta.cos();
                a * (-(d / w) * (d / w)).exp()
            }
            Structure::Ramp { northeast, a } => {
                let s = if northeast { x * (1.0 - y) } else { (1.0 - x) * y };
                a * s.powf(1.5)
            }
            Structure::Blob { cx, cy, r, a } => {
                let d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                a * (-d2 / (2.0 * r * r)).exp()
            }
        }
    }
}

fn uniform(rng: &mut SeededRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.next_f64()
}

/// Draws one day's labels and structures. Consumes a fixed stream per
/// day (its own derived generator), so days are independent and the
/// scene does not depend on the raster resolution.
fn day_scene(day_rng: &mut SeededRng) -> ([bool; 5], Vec<Structure>) {
    let labels = [
        day_rng.next_f64() < P_FT,
        day_rng.next_f64() < P_NE,
        day_rng.next_f64() < P_SWF,
        day_rng.next_f64() < P_HR,
        day_rng.next_f64() < P_NWPTC,
    ];
    let mut structures = Vec::new();
    if labels[0] {
        structures.push(Structure::Band {
            px: uniform(day_rng, 0.25, 0.75),
            py: uniform(day_rng, 0.25, 0.75),
            theta: uniform(day_rng, 0.35, 1.22),
            w: uniform(day_rng, 0.04, 0.07),
            a: uniform(day_rng, 0.40, 0.60),
        });
    }
    if labels[1] {
        structures.push(Structure::Ramp { northeast: true, a: uniform(day_rng, 0.30, 0.45) });
    }
    if labels[2] {
        structures.push(Structure::Ramp { northeast: false, a: uniform(day_rng, 0.30, 0.45) });
    }
    if labels[3] {
        let cells = 8 + day_rng.next_below(7) as usize;
        for _ in 0..cells {
            structures.push(Structure::Blob {
                cx: uniform(day_rng, 0.05, 0.95),
                cy: uniform(day_rng, 0.05, 0.95),
                r: uniform(day_rng, 0.02, 0.035),
                a: uniform(day_rng, 0.35, 0.55),
            });
        }
    }
    if labels[4] {
        structures.push(Structure::Blob {
            cx: uniform(day_rng, 0.2, 0.8),
            cy: uniform(day_rng, 0.2, 0.8),
            r: uniform(day_rng, 0.05, 0.09),
            a: uniform(day_rng, 0.60, 0.80),
        });
    }
    (labels, structures)
}

/// Generates one frame per day from 2013-01-01 with labeled synthetic
/// structures over a smooth background, plus per-pixel noise. Values are
/// already in [0, 1] (frames carry `scaled = true`). Deterministic:
/// the same arguments reproduce the dataset bitwise.
pub fn generate_synthetic(
    n_days: usize,
    resolution: usize,
    seed: u64,
) -> Result<(Vec<GridFrame>, LabelTable)> {
    if n_days < 20 {
        return Err(Error::InvalidInput(format!(
            "need at least 20 days, got {n_days}"
        )));
    }
    if ![64, 128, 256, 512].contains(&resolution) {
        return Err(Error::InvalidInput(format!(
            "unsupported resolution {resolution} (use 64, 128, 256 or 512)"
        )));
    }
    let start = NaiveDate::from_ymd_opt(2013, 1, 1).expect("fixed epoch");
    let mut frames = Vec::with_capacity(n_days);
    let mut dates = Vec::with_capacity(n_days);
    let mut flags = Vec::with_capacity(n_days);

    for day in 0..n_days {
        let date = start + Days::new(day as u64);
        let mut day_rng = SeededRng::derived(seed, day as u64);
        let (labels, structures) = day_scene(&mut day_rng);
        let mut noise_rng = SeededRng::derived(seed, NOISE_SALT + day as u64);

        let h = resolution;
        let w = resolution;
        let mut values = Vec::with_capacity(h * w);
        for r in 0..h {
            let y = (r as f64 + 0.5) / h as f64;
            for c in 0..w {
                let x = (c as f64 + 0.5) / w as f64;
                let mut v = 0.12 + 0.10 * y;
                for s in &structures {
                    v += s.eval(x, y);
                }
                v += NOISE_AMPLITUDE * noise_rng.next_f64();
                values.push(v.clamp(0.0, 1.0) as f32);
            }
        }

        let mut frame = GridFrame::new(
            format!("{}T00:00:00Z", date.format("%Y-%m-%d")),
            (0.0, 60.0),
            (100.0, 160.0),
            h,
            w,
            values,
        )?;
        frame.scaled = true;
        frames.push(frame);
        dates.push(date.format("%Y-%m-%d").to_string());
        flags.push(labels);
    }

    Ok((frames, LabelTable::new(dates, flags)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::labels::{label_stats, EVENTS};
    use crate::ingest::preprocess::bilinear_resize;

    #[test]
    fn same_seed_reproduces_the_dataset_bitwise() {
        let (fa, la) = generate_synthetic(25, 64, 77).unwrap();
        let (fb, lb) = generate_synthetic(25, 64, 77).unwrap();
        assert_eq!(la, lb);
        for (a, b) in fa.iter().zip(&fb) {
            assert_eq!(a, b);
        }
        let (fc, _) = generate_synthetic(25, 64, 78).unwrap();
        assert_ne!(fa[0].values, fc[0].values);
    }

    #[test]
    fn values_stay_in_the_unit_interval_and_frames_are_flagged_scaled() {
        let (frames, _) = generate_synthetic(30, 64, 5).unwrap();
        for f in &frames {
            assert!(f.scaled);
            assert!(f.min_value() >= 0.0);
            assert!(f.max_value() <= 1.0);
        }
    }

    #[test]
    fn label_frequencies_approach_the_reference_rates() {
        let (_, labels) = generate_synthetic(600, 64, 2013).unwrap();
        let stats = label_stats(&labels);
        let targets = [P_FT, P_NE, P_SWF, P_HR, P_NWPTC];
        for (s, t) in stats.iter().zip(targets) {
            let f = s.frequency.unwrap();
            assert!(
                (f - t).abs() < 0.05,
                "{}: frequency {f:.3} vs target {t:.3}",
                s.event
            );
        }
    }

    #[test]
    fn preconditions_are_enforced() {
        assert!(generate_synthetic(19, 64, 1).is_err());
        assert!(generate_synthetic(30, 100, 1).is_err());
    }

    #[test]
    fn scenes_agree_across_resolutions() {
        let (f64s, l64) = generate_synthetic(20, 64, 99).unwrap();
        let (f128s, l128) = generate_synthetic(20, 128, 99).unwrap();
        assert_eq!(l64, l128);
        for (a, b) in f64s.iter().zip(&f128s) {
            assert_eq!(a.timestamp, b.timestamp);
            // The same continuous scene sampled at both grids: means
            // agree to within discretization and noise averaging.
            let mean = |f: &GridFrame| {
                f.values.iter().map(|&v| v as f64).sum::<f64>() / f.values.len() as f64
            };
            assert!((mean(a) - mean(b)).abs() < 0.01);
            // Downsampling the fine frame approximates the coarse one.
            let down = bilinear_resize(b, 64, 64).unwrap();
            let mad = a
                .values
                .iter()
                .zip(&down.values)
                .map(|(x, y)| (x - y).abs() as f64)
                .sum::<f64>()
                / a.values.len() as f64;
            assert!(mad < 0.05, "mean abs difference {mad}");
        }
    }

    #[test]
    fn cyclone_days_are_visibly_brighter_than_quiet_days() {
        let (frames, labels) = generate_synthetic(200, 64, 31).unwrap();
        let nwptc = labels.event_column("NWPTC").unwrap();
        let mut quiet_max = Vec::new();
        let mut cyclone_max = Vec::new();
        for (i, f) in frames.iter().enumerate() {
            let any_event = EVENTS.iter().any(|e| labels.event_column(e).unwrap()[i]);
            if nwptc[i] {
                cyclone_max.push(f.max_value());
            } else if !any_event {
                quiet_max.push(f.max_value());
            }
        }
        assert!(!quiet_max.is_empty() && !cyclone_max.is_empty());
        assert!(quiet_max.iter().all(|&m| m < 0.4));
        assert!(cyclone_max.iter().all(|&m| m > 0.5));
    }
}
