//! Shot-noise simulation: each plan entry becomes a binomial count of `+1`
//! outcomes with `p(+1) = (1 + ⟨·⟩)/2`, reported as the empirical mean.

use std::io::{Read, Write};

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::crosstalk::{effective_frequency, ChainParams, ExperimentConfig, QubitRole};
use crate::error::{Error, Result};
use crate::fisher::MeasurementPlan;
use crate::scalar::{lit, to_f64, Real};
use crate::signal::{expectation, Quadrature, RamseyModel};
use crate::stream::rng_for;

/// Slack tolerated on `|⟨·⟩| ≤ 1` before a model is declared unphysical.
const PHYSICAL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry<T> {
    pub time: T,
    pub quadrature: Quadrature,
    pub shots: u64,
    pub mean: T,
}

impl<T: Real> SampleEntry<T> {
    /// Number of `+1` outcomes implied by the mean, if it is consistent.
    pub fn plus_count(&self) -> Option<u64> {
        let n = self.shots as f64;
        let k = (to_f64(self.mean) * n + n) / 2.0;
        let r = k.round();
        ((k - r).abs() < 1e-6 * n.max(1.0) && (0.0..=n).contains(&r)).then_some(r as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet<T> {
    pub entries: Vec<SampleEntry<T>>,
    pub seed: u64,
    pub model_descriptor: String,
}

#[derive(Debug, Deserialize, Serialize)]
struct CsvRow {
    time: f64,
    quadrature: Quadrature,
    shots: u64,
    mean: f64,
}

impl<T: Real> SampleSet<T> {
    /// Checks that every mean corresponds to a whole number of `±1` outcomes.
    pub fn validate(&self) -> Result<()> {
        for (i, e) in self.entries.iter().enumerate() {
            if e.shots == 0 {
                return Err(Error::domain(format!("entry {i} has zero shots")));
            }
            if !(e.time >= T::zero()) || !e.time.is_finite() {
                return Err(Error::domain(format!("entry {i} has an invalid time")));
            }
            if e.plus_count().is_none() {
                return Err(Error::domain(format!(
                    "entry {i}: mean {} is not a mean of {} ±1 outcomes",
                    e.mean, e.shots
                )));
            }
        }
        Ok(())
    }

    pub fn total_shots(&self) -> u64 {
        self.entries.iter().map(|e| e.shots).sum()
    }

    pub fn has_quadrature(&self, q: Quadrature) -> bool {
        self.entries.iter().any(|e| e.quadrature == q)
    }

    pub fn to_json_writer<W: Write>(&self, w: W) -> Result<()>
    where
        T: Serialize,
    {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn from_json_reader<R: Read>(r: R) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        let s: SampleSet<T> = serde_json::from_reader(r)?;
        s.validate()?;
        Ok(s)
    }

    /// CSV with `# seed:` and `# model:` comment lines ahead of the
    /// `time,quadrature,shots,mean` header.
    pub fn to_csv_writer<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# seed: {}", self.seed)?;
        writeln!(w, "# model: {}", self.model_descriptor)?;
        let mut out = csv::Writer::from_writer(w);
        for e in &self.entries {
            out.serialize(CsvRow {
                time: to_f64(e.time),
                quadrature: e.quadrature,
                shots: e.shots,
                mean: to_f64(e.mean),
            })?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn from_csv_reader<R: Read>(mut r: R) -> Result<Self> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        let mut seed = 0u64;
        let mut model_descriptor = String::new();
        for (i, line) in text.lines().enumerate() {
            let Some(rest) = line.trim_start().strip_prefix('#') else {
                continue;
            };
            let rest = rest.trim();
            if let Some(v) = rest.strip_prefix("seed:") {
                seed = v.trim().parse().map_err(|e| Error::Parse {
                    location: format!("line {}", i + 1),
                    message: format!("bad seed: {e}"),
                })?;
            } else if let Some(v) = rest.strip_prefix("model:") {
                model_descriptor = v.trim().to_string();
            }
        }
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut entries = Vec::new();
        for rec in rdr.deserialize::<CsvRow>() {
            let row = rec.map_err(|e| {
                let location = e
                    .position()
                    .map(|p| format!("line {}", p.line()))
                    .unwrap_or_else(|| "unknown line".into());
                Error::Parse {
                    location,
                    message: e.to_string(),
                }
            })?;
            entries.push(SampleEntry {
                time: lit(row.time),
                quadrature: row.quadrature,
                shots: row.shots,
                mean: lit(row.mean),
            });
        }
        let s = SampleSet {
            entries,
            seed,
            model_descriptor,
        };
        s.validate()?;
        Ok(s)
    }
}

/// Samples `plan` for `model`, keying entry `i` by `(seed, 0, 0, i)`.
pub fn sample<T: Real>(model: &RamseyModel<T>, plan: &MeasurementPlan<T>, seed: u64) -> Result<SampleSet<T>> {
    sample_keyed(model, plan, seed, 0, 0)
}

/// Samples `plan` with entry streams keyed by `(seed, experiment, qubit, entry)`.
pub fn sample_keyed<T: Real>(
    model: &RamseyModel<T>,
    plan: &MeasurementPlan<T>,
    seed: u64,
    experiment: u64,
    qubit: u64,
) -> Result<SampleSet<T>> {
    plan.validate()?;
    model.validate()?;
    let mut entries = Vec::with_capacity(plan.entries.len());
    for (i, e) in plan.entries.iter().enumerate() {
        let mu = to_f64(expectation(model, e.quadrature, e.time)?);
        if !(mu.abs() <= 1.0 + PHYSICAL_SLACK) {
            return Err(Error::UnphysicalModel {
                value: mu,
                time: to_f64(e.time),
            });
        }
        let p = ((1.0 + mu) / 2.0).clamp(0.0, 1.0);
        let mut rng = rng_for(&[seed, experiment, qubit, i as u64]);
        let k = Binomial::new(e.shots, p)
            .map_err(|err| Error::domain(format!("binomial parameters: {err}")))?
            .sample(&mut rng);
        let n = e.shots as f64;
        entries.push(SampleEntry {
            time: e.time,
            quadrature: e.quadrature,
            shots: e.shots,
            mean: lit((2.0 * k as f64 - n) / n),
        });
    }
    Ok(SampleSet {
        entries,
        seed,
        model_descriptor: model.describe(),
    })
}

/// Exact expectations in place of sampled means, for noiseless checks.
pub fn noiseless<T: Real>(model: &RamseyModel<T>, plan: &MeasurementPlan<T>) -> Result<SampleSet<T>> {
    plan.validate()?;
    let entries = plan
        .entries
        .iter()
        .map(|e| {
            Ok(SampleEntry {
                time: e.time,
                quadrature: e.quadrature,
                shots: e.shots,
                mean: expectation(model, e.quadrature, e.time)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleSet {
        entries,
        seed: 0,
        model_descriptor: format!("noiseless {}", model.describe()),
    })
}

/// Samples every Ramsey-role qubit of a chain experiment at its effective
/// frequency. Spectators yield no samples; the result is indexed by qubit.
pub fn sample_multi<T: Real>(
    experiment: &ExperimentConfig,
    experiment_id: u64,
    chain: &ChainParams<T>,
    plan: &MeasurementPlan<T>,
    seed: u64,
) -> Result<Vec<Option<SampleSet<T>>>> {
    sample_multi_with(experiment, experiment_id, chain, |_| Ok(plan.clone()), seed)
}

/// As [`sample_multi`], with a per-qubit plan.
pub fn sample_multi_with<T: Real, F>(
    experiment: &ExperimentConfig,
    experiment_id: u64,
    chain: &ChainParams<T>,
    mut plan_for: F,
    seed: u64,
) -> Result<Vec<Option<SampleSet<T>>>>
where
    F: FnMut(usize) -> Result<MeasurementPlan<T>>,
{
    chain.validate()?;
    experiment.validate_chain(chain.n_qubits())?;
    let mut out = Vec::with_capacity(chain.n_qubits());
    for (i, role) in experiment.roles.iter().enumerate() {
        if *role != QubitRole::Ramsey {
            out.push(None);
            continue;
        }
        let omega = effective_frequency(chain, &experiment.roles, i)?;
        let model = RamseyModel::two_param(omega, chain.gammas[i]);
        let plan = plan_for(i)?;
        out.push(Some(sample_keyed(&model, &plan, seed, experiment_id, i as u64)?));
    }
    Ok(out)
}
