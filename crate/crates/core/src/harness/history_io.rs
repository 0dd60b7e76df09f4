use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::gmm::{GaussianComponent, WeightedGmm};
use crate::meta::{KcVector, StudentMeta, TrainingTrajectory, TrajectorySnapshot};

#[derive(Serialize, Deserialize)]
struct SnapshotLine {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: Vec<Vec<Vec<f64>>>,
    lp_utilities: Vec<f64>,
    mean_reward: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    log_likelihood: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    aic: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct TrajectoryLine {
    student_meta: StudentMeta,
    kc_pre: KcVector,
    kc_post: KcVector,
    j_s: f64,
    snapshots: Vec<SnapshotLine>,
}

impl From<&TrainingTrajectory> for TrajectoryLine {
    fn from(t: &TrainingTrajectory) -> Self {
        let snapshots = t
            .snapshots
            .iter()
            .map(|s| {
                let c = &s.gmm.components;
                SnapshotLine {
                    weights: c.iter().map(|c| c.weight).collect(),
                    means: c.iter().map(|c| c.mean.clone()).collect(),
                    covariances: c.iter().map(|c| c.covariance.clone()).collect(),
                    lp_utilities: c.iter().map(|c| c.lp_utility).collect(),
                    mean_reward: s.mean_reward,
                    log_likelihood: Some(s.gmm.fit_log_likelihood),
                    aic: Some(s.gmm.aic),
                }
            })
            .collect();
        Self {
            student_meta: t.student_meta,
            kc_pre: t.kc_pre.clone(),
            kc_post: t.kc_post.clone(),
            j_s: t.score,
            snapshots,
        }
    }
}

impl TrajectoryLine {
    fn into_trajectory(self) -> Result<TrainingTrajectory, String> {
        let snapshots = self
            .snapshots
            .into_iter()
            .map(|s| {
                let k = s.weights.len();
                if s.means.len() != k || s.covariances.len() != k || s.lp_utilities.len() != k {
                    return Err(format!("snapshot arrays disagree on component count {k}"));
                }
                let components = s
                    .weights
                    .into_iter()
                    .zip(s.means)
                    .zip(s.covariances)
                    .zip(s.lp_utilities)
                    .map(
                        |(((weight, mean), covariance), lp_utility)| GaussianComponent {
                            mean,
                            covariance,
                            weight,
                            lp_utility,
                        },
                    )
                    .collect();
                Ok(TrajectorySnapshot {
                    gmm: WeightedGmm {
                        components,
                        fit_log_likelihood: s.log_likelihood.unwrap_or(f64::NAN),
                        aic: s.aic.unwrap_or(f64::NAN),
                    },
                    mean_reward: s.mean_reward,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TrainingTrajectory {
            snapshots,
            kc_pre: self.kc_pre,
            kc_post: self.kc_post,
            score: self.j_s,
            student_meta: self.student_meta,
        })
    }
}

/// Writes one JSON object per trajectory per line.
pub fn write_history<W: Write>(
    mut out: W,
    history: &[TrainingTrajectory],
) -> Result<(), HarnessError> {
    for t in history {
        serde_json::to_writer(&mut out, &TrajectoryLine::from(t)).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_history<R: Read>(input: R) -> Result<Vec<TrainingTrajectory>, HarnessError> {
    let mut history = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| HarnessError::Malformed {
            line: i + 1,
            message,
        };
        let parsed: TrajectoryLine =
            serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        history.push(parsed.into_trajectory().map_err(malformed)?);
    }
    Ok(history)
}

pub fn save_history(path: &Path, history: &[TrainingTrajectory]) -> Result<(), HarnessError> {
    write_history(BufWriter::new(File::create(path)?), history)
}

pub fn load_history(path: &Path) -> Result<Vec<TrainingTrajectory>, HarnessError> {
    read_history(File::open(path)?)
}
