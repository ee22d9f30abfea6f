//! Observation schedules, noisy measurement of trajectories, and
//! signal-space summary features.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Strictly increasing observation times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    times: Vec<f64>,
}

impl Schedule {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::invalid("schedule is empty"));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("schedule contains non-finite times"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("schedule times must be strictly increasing"));
        }
        Ok(Schedule { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Times `t_start + k * isi` for `k = 1, 2, ...` up to `t_end`.
pub fn regular_schedule(isi: f64, t_start: f64, t_end: f64) -> Result<Schedule> {
    if !(isi > 0.0 && isi.is_finite()) {
        return Err(Error::invalid(format!("inter-sample interval must be > 0, got {isi}")));
    }
    let span = t_end - t_start;
    // tolerate representation error so that e.g. 50 / 0.5 yields 100 points
    let n = ((span / isi) * (1.0 + 1e-12) + 1e-9).floor() as usize;
    if n == 0 {
        return Err(Error::invalid(format!(
            "window [{t_start}, {t_end}] is shorter than one interval of {isi}"
        )));
    }
    Schedule::new((1..=n).map(|k| t_start + isi * k as f64).collect())
}

/// `n` sorted uniform draws on `[t_start, t_end]`.
pub fn random_schedule(n: usize, t_start: f64, t_end: f64, seed: u64) -> Result<Schedule> {
    if n == 0 {
        return Err(Error::invalid("random schedule needs n >= 1"));
    }
    if !(t_end > t_start) {
        return Err(Error::invalid(format!("empty window [{t_start}, {t_end}]")));
    }
    let mut rng = rng_from_seed(seed);
    let mut times: Vec<f64> = (0..n).map(|_| rng.random_range(t_start..t_end)).collect();
    times.sort_by(f64::total_cmp);
    // duplicate draws have probability ~0 but would break monotonicity
    times.dedup();
    Schedule::new(times)
}

/// An observed series `y_i = x(t_i) + eps_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub schedule: Schedule,
    pub values: Vec<f64>,
    /// Standard deviation of the observation noise used to generate the series.
    pub sigma: f64,
}

impl TimeSeries {
    pub fn new(schedule: Schedule, values: Vec<f64>, sigma: f64) -> Result<Self> {
        if schedule.len() != values.len() {
            return Err(Error::invalid(format!(
                "{} times but {} values",
                schedule.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("time series contains non-finite values"));
        }
        if !(sigma >= 0.0) {
            return Err(Error::invalid(format!("sigma must be >= 0, got {sigma}")));
        }
        Ok(TimeSeries { schedule, values, sigma })
    }

    pub fn times(&self) -> &[f64] {
        self.schedule.times()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "y"])?;
        for (t, y) in self.times().iter().zip(&self.values) {
            w.write_record([t.to_string(), y.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Read a `t,y` file; `sigma` is not part of the file and comes from the manifest.
    pub fn read_csv(path: &Path, sigma: f64) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "y"] {
            return Err(Error::Format {
                path: path.into(),
                reason: format!("expected header `t,y`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for rec in r.deserialize::<(f64, f64)>() {
            let (t, y) = rec?;
            times.push(t);
            values.push(y);
        }
        TimeSeries::new(Schedule::new(times)?, values, sigma)
    }
}

/// Observe `traj` at the schedule's times with i.i.d. `N(0, sigma^2)` noise.
pub fn sample_observations(traj: &Trajectory, sched: &Schedule, sigma: f64, seed: u64) -> Result<TimeSeries> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be >= 0, got {sigma}")));
    }
    let mut rng = rng_from_seed(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut values = Vec::with_capacity(sched.len());
    for &t in sched.times() {
        let x = traj.value_at(t).ok_or_else(|| {
            Error::invalid(format!(
                "observation time {t} outside trajectory span [{}, {}]",
                traj.t0,
                traj.t_end()
            ))
        })?;
        let eps: f64 = noise.sample(&mut rng);
        values.push(x + sigma * eps);
    }
    TimeSeries::new(sched.clone(), values, sigma)
}

/// Mean and population standard deviation of the observed values.
pub fn signal_features(ts: &TimeSeries) -> (f64, f64) {
    let n = ts.values.len() as f64;
    let mu = ts.values.iter().sum::<f64>() / n;
    let var = ts.values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
    (mu, var.sqrt())
}
