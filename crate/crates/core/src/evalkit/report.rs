use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evalkit::{bleu, meteor_surrogate, METEOR_LABEL};

/// One metric across seeds: per-seed values, mean, sample std, ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub per_seed: Vec<f64>,
    pub mean: f64,
    /// Sample (n-1) standard deviation; absent for a single run.
    pub std: Option<f64>,
    pub ensemble: Option<f64>,
}

impl MetricSummary {
    pub fn new(per_seed: Vec<f64>, ensemble: Option<f64>) -> Result<Self> {
        if per_seed.is_empty() {
            return Err(Error::InvalidArgument("need at least one run".into()));
        }
        let n = per_seed.len() as f64;
        let mean = per_seed.iter().sum::<f64>() / n;
        let std = (per_seed.len() >= 2)
            .then(|| (per_seed.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt());
        Ok(MetricSummary { per_seed, mean, std, ensemble })
    }

    /// `μ ± σ / Ens` with one decimal, values multiplied by `scale`.
    pub fn render(&self, scale: f64) -> String {
        let mut s = format!("{:.1}", self.mean * scale);
        if let Some(sd) = self.std {
            let _ = write!(s, " ± {:.1}", sd * scale);
        }
        if let Some(e) = self.ensemble {
            let _ = write!(s, " / {:.1}", e * scale);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemReport {
    pub name: String,
    pub bleu: MetricSummary,
    /// On the 0-1 scale; rendered ×100.
    pub meteor: MetricSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub system_a: String,
    pub system_b: String,
    pub metric: String,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct EvalReport {
    pub meteor_label: &'static str,
    pub systems: Vec<SystemReport>,
    pub comparisons: Vec<Comparison>,
}

/// Scores every seed's output and the optional ensemble output of one system.
pub fn aggregate_runs<S: AsRef<str>>(
    name: &str,
    per_seed_hyps: &[Vec<Vec<S>>],
    ensemble_hyps: Option<&[Vec<S>]>,
    refs: &[Vec<S>],
) -> Result<SystemReport> {
    let bleus = per_seed_hyps.iter().map(|h| bleu(h, refs)).collect::<Result<Vec<_>>>()?;
    let meteors = per_seed_hyps.iter().map(|h| meteor_surrogate(h, refs)).collect::<Result<Vec<_>>>()?;
    let (eb, em) = match ensemble_hyps {
        Some(h) => (Some(bleu(h, refs)?), Some(meteor_surrogate(h, refs)?)),
        None => (None, None),
    };
    Ok(SystemReport {
        name: name.to_string(),
        bleu: MetricSummary::new(bleus, eb)?,
        meteor: MetricSummary::new(meteors, em)?,
    })
}

impl EvalReport {
    pub fn new(systems: Vec<SystemReport>) -> Self {
        EvalReport { meteor_label: METEOR_LABEL, systems, comparisons: Vec::new() }
    }

    /// Text table in the `μ ± σ / Ensemble` layout.
    pub fn render(&self) -> String {
        let w = self.systems.iter().map(|s| s.name.len()).max().unwrap_or(6).max(6);
        let mut out = format!("{:<w$}  {:<22}  {}\n", "system", "BLEU", METEOR_LABEL);
        for s in &self.systems {
            let _ = writeln!(out, "{:<w$}  {:<22}  {}", s.name, s.bleu.render(1.0), s.meteor.render(100.0));
        }
        if !self.comparisons.is_empty() {
            out.push('\n');
            for c in &self.comparisons {
                let _ = writeln!(out, "{} vs {} ({}): p = {:.4}", c.system_a, c.system_b, c.metric, c.p_value);
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_sample_std() {
        let m = MetricSummary::new(vec![1.0, 2.0, 3.0], Some(2.5)).unwrap();
        assert_eq!((m.mean, m.std), (2.0, Some(1.0)));
        assert_eq!(m.render(1.0), "2.0 ± 1.0 / 2.5");
        let one = MetricSummary::new(vec![0.4567], None).unwrap();
        assert_eq!((one.std, one.render(100.0)), (None, "45.7".to_string()));
        let same = MetricSummary::new(vec![7.0; 5], None).unwrap();
        assert_eq!(same.std, Some(0.0));
        assert!(MetricSummary::new(vec![], None).is_err());
    }

    #[test]
    fn report_renders_rounded_and_json_keeps_precision() {
        let refs: Vec<Vec<String>> = vec!["a b c d e".split(' ').map(String::from).collect()];
        let runs = vec![refs.clone(), vec![vec!["a".to_string(), "b".into(), "c".into(), "d".into()]]];
        let sys = aggregate_runs("trg-mul", &runs, Some(&refs), &refs).unwrap();
        assert_eq!(sys.bleu.per_seed[0], 100.0);
        let r = EvalReport::new(vec![sys]);
        let table = r.render();
        assert!(table.contains(METEOR_LABEL));
        assert!(table.lines().nth(1).unwrap().contains(" / 100.0"), "{table}");
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        let b = json["systems"][0]["bleu"]["per_seed"][1].as_f64().unwrap();
        assert_eq!(b, r.systems[0].bleu.per_seed[1]);
        assert!(format!("{b}").len() > 6);
    }
}
