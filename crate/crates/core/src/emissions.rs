//! NOx emission workbench: trip ingestion, the tolerance-window predictor, per-kilometre
//! aggregation over drive cycles, and robust-cleanness falsification of cycle variations.

use std::io::Read;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::falsify::{
    falsify, FalsificationOutcome, FalsifierConfig, FalsifyError, ProfileProposal,
    RestrictedInputSpace,
};
use crate::logic::{Formula, Projection, Term};
use crate::traces::{Distance, Trace, Value};

/// The New European Driving Cycle, 1180 one-second speed samples in km/h.
pub const NEDC: &str = include_str!("../data/nedc.txt");

#[derive(Debug, Error)]
pub enum EmissionsError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("row {row}: negative speed {speed}")]
    NegativeSpeed { row: usize, speed: f64 },
    #[error("no samples")]
    Empty,
    #[error("no training sample within tolerance at step(s) {0:?}")]
    NoData(Vec<usize>),
    #[error("cycle covers zero distance")]
    UndefinedRate,
    #[error("cycle leaves the κi tube around the standard cycle")]
    Restriction,
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

/// One 1 Hz sample: speed in km/h, acceleration in m/s², NOx in mg.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub speed: f64,
    pub accel: f64,
    pub nox: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripRecording {
    pub samples: Vec<Sample>,
}

/// `a[t] = (v[t] - v[t-1]) / 3.6`, `a[0] = 0`.
pub fn accelerations(speeds: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(speeds.len());
    for (t, v) in speeds.iter().enumerate() {
        out.push(if t == 0 {
            0.0
        } else {
            (v - speeds[t - 1]) / 3.6
        });
    }
    out
}

impl TripRecording {
    /// Reads `t_s,speed_kmh,accel_ms2,nox_mg`; the acceleration column is optional.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, EmissionsError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header_err = |message: String| EmissionsError::Parse { row: 1, message };
        let headers = rdr
            .headers()
            .map_err(|e| header_err(e.to_string()))?
            .clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let speed_col = col("speed_kmh").ok_or_else(|| header_err("missing speed_kmh".into()))?;
        let nox_col = col("nox_mg").ok_or_else(|| header_err("missing nox_mg".into()))?;
        let accel_col = col("accel_ms2");

        let mut speeds = Vec::new();
        let mut accels = Vec::new();
        let mut nox = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let row = k + 2;
            let rec = rec.map_err(|e| EmissionsError::Parse {
                row,
                message: e.to_string(),
            })?;
            let num = |c: usize| -> Result<f64, EmissionsError> {
                let s = rec.get(c).unwrap_or("");
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| EmissionsError::Parse {
                        row,
                        message: format!("bad number {s:?}"),
                    })
            };
            let v = num(speed_col)?;
            if v < 0.0 {
                return Err(EmissionsError::NegativeSpeed { row, speed: v });
            }
            speeds.push(v);
            nox.push(num(nox_col)?);
            if let Some(c) = accel_col {
                accels.push(num(c)?);
            }
        }
        if speeds.is_empty() {
            return Err(EmissionsError::Empty);
        }
        if accel_col.is_none() {
            accels = accelerations(&speeds);
        }
        let samples = speeds
            .iter()
            .zip(&accels)
            .zip(&nox)
            .map(|((&speed, &accel), &nox)| Sample { speed, accel, nox })
            .collect();
        Ok(TripRecording { samples })
    }

    pub fn load(path: &Path) -> Result<Self, EmissionsError> {
        let file = std::fs::File::open(path).map_err(|source| EmissionsError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        TripRecording::read_csv(file)
    }

    /// Loads every `*.csv` in a directory, in file-name order.
    pub fn load_dir(dir: &Path) -> Result<Vec<Self>, EmissionsError> {
        let io = |source| EmissionsError::Io {
            path: dir.to_path_buf(),
            source,
        };
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        paths.sort();
        paths.iter().map(|p| TripRecording::load(p)).collect()
    }
}

/// Parses a cycle file: one speed in km/h per line, blank lines ignored.
pub fn parse_cycle(text: &str) -> Result<Vec<f64>, EmissionsError> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| EmissionsError::Parse {
            row: k + 1,
            message: format!("bad speed {line:?}"),
        })?;
        if !v.is_finite() {
            return Err(EmissionsError::Parse {
                row: k + 1,
                message: "speed must be finite".into(),
            });
        }
        if v < 0.0 {
            return Err(EmissionsError::NegativeSpeed {
                row: k + 1,
                speed: v,
            });
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(EmissionsError::Empty);
    }
    Ok(out)
}

pub fn load_cycle(path: &Path) -> Result<Vec<f64>, EmissionsError> {
    let text = std::fs::read_to_string(path).map_err(|source| EmissionsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_cycle(&text)
}

pub fn nedc() -> Vec<f64> {
    parse_cycle(NEDC).expect("bundled cycle parses")
}

/// 300 s synthetic cycle: 30 s ramp to 50 km/h, cruise, 30 s ramp down.
pub fn synthetic_cycle() -> Vec<f64> {
    (0..300)
        .map(|t| {
            let up = t as f64 * 50.0 / 30.0;
            let down = (299 - t) as f64 * 50.0 / 30.0;
            up.min(down).min(50.0)
        })
        .collect()
}

/// Mean NOx over all recorded samples within the speed and acceleration tolerances.
#[derive(Debug, Clone)]
pub struct NoxPredictor {
    /// Sorted by speed for range lookup.
    data: Vec<Sample>,
    tolerance_v: f64,
    tolerance_a: f64,
}

impl NoxPredictor {
    pub fn new(
        samples: Vec<Sample>,
        tolerance_v: f64,
        tolerance_a: f64,
    ) -> Result<Self, EmissionsError> {
        if !(tolerance_v >= 0.0 && tolerance_a >= 0.0) {
            return Err(EmissionsError::Parameter(
                "tolerances must be non-negative".into(),
            ));
        }
        let mut data = samples;
        data.sort_by(|x, y| x.speed.total_cmp(&y.speed));
        Ok(NoxPredictor {
            data,
            tolerance_v,
            tolerance_a,
        })
    }

    /// Pools all trips with the default tolerances of 2 km/h and 2 m/s².
    pub fn from_trips(trips: &[TripRecording]) -> Self {
        let samples = trips
            .iter()
            .flat_map(|t| t.samples.iter().copied())
            .collect();
        NoxPredictor::new(samples, 2.0, 2.0).expect("default tolerances are valid")
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Predicted NOx in mg for one second at speed `v` and acceleration `a`. Both window
    /// boundaries are inclusive.
    pub fn predict(&self, v: f64, a: f64) -> Option<f64> {
        let lo = self
            .data
            .partition_point(|s| s.speed < v - self.tolerance_v);
        let mut sum = 0.0;
        let mut n = 0usize;
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in &self.data[lo..] {
            if s.speed > v + self.tolerance_v {
                break;
            }
            if (s.accel - a).abs() <= self.tolerance_a && (s.speed - v).abs() <= self.tolerance_v {
                sum += s.nox;
                n += 1;
                min = min.min(s.nox);
                max = max.max(s.nox);
            }
        }
        (n > 0).then(|| (sum / n as f64).clamp(min, max))
    }

    pub fn scaled(&self, c: f64) -> NoxPredictor {
        NoxPredictor {
            data: self
                .data
                .iter()
                .map(|s| Sample {
                    nox: s.nox * c,
                    ..*s
                })
                .collect(),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleEmissions {
    pub total_mg: f64,
    pub distance_km: f64,
    pub mg_per_km: f64,
}

/// Sum of per-second predictions over the integrated distance.
pub fn cycle_emissions(p: &NoxPredictor, cycle: &[f64]) -> Result<CycleEmissions, EmissionsError> {
    if cycle.is_empty() {
        return Err(EmissionsError::Empty);
    }
    let accel = accelerations(cycle);
    let mut total = 0.0;
    let mut gaps = Vec::new();
    for (t, (&v, &a)) in cycle.iter().zip(&accel).enumerate() {
        match p.predict(v, a) {
            Some(n) => total += n,
            None => gaps.push(t),
        }
    }
    if !gaps.is_empty() {
        return Err(EmissionsError::NoData(gaps));
    }
    let distance: f64 = cycle.iter().map(|v| v / 3600.0).sum();
    if distance <= 0.0 {
        return Err(EmissionsError::UndefinedRate);
    }
    Ok(CycleEmissions {
        total_mg: total,
        distance_km: distance,
        mg_per_km: total / distance,
    })
}

/// Standard cycle, its measured emission rate and the contract thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionContext {
    pub standard_cycle: Vec<f64>,
    pub std_output: f64,
    pub kappa_in: f64,
    pub kappa_out: f64,
}

impl EmissionContext {
    pub fn new(
        standard_cycle: Vec<f64>,
        std_output: f64,
        kappa_in: f64,
        kappa_out: f64,
    ) -> Result<Self, EmissionsError> {
        if standard_cycle.is_empty() {
            return Err(EmissionsError::Empty);
        }
        if !(kappa_in > 0.0 && kappa_out > 0.0) {
            return Err(EmissionsError::Parameter(
                "kappa_in and kappa_out must be positive".into(),
            ));
        }
        Ok(EmissionContext {
            standard_cycle,
            std_output,
            kappa_in,
            kappa_out,
        })
    }

    /// Measures the standard output by running the predictor on the standard cycle.
    pub fn measured(
        p: &NoxPredictor,
        standard_cycle: Vec<f64>,
        kappa_in: f64,
        kappa_out: f64,
    ) -> Result<Self, EmissionsError> {
        let o = cycle_emissions(p, &standard_cycle)?.mg_per_km;
        EmissionContext::new(standard_cycle, o, kappa_in, kappa_out)
    }

    pub fn space(&self) -> RestrictedInputSpace {
        RestrictedInputSpace::new(vec![self.standard_cycle.clone()], self.kappa_in)
            .expect("context validated the cycle")
    }

    /// `cycle · o` as a mixed-IO trace: the speeds as inputs, then the emission rate.
    pub fn io_trace(cycle: &[f64], output: f64) -> Trace {
        let mut values: Vec<Value> = cycle.iter().map(|&v| Value::In(v)).collect();
        values.push(Value::Out(output));
        Trace::new(values).expect("finite speeds and output")
    }

    /// `□(dOut(out std, out w) − κo ≤ 0)` over the pair `(w, std)`.
    pub fn formula(&self) -> Formula {
        Formula::globally(Formula::le0(Term::sub(
            Term::dist(Distance::MixedOut, Projection::Output, 1, 0),
            Term::Const(self.kappa_out),
        )))
    }
}

/// Robustness `κo − |o_std − o(cycle)|` of a cycle inside the restricted input space.
pub fn nedc_robustness(
    ctx: &EmissionContext,
    p: &NoxPredictor,
    cycle: &[f64],
) -> Result<f64, EmissionsError> {
    if !ctx.space().contains(cycle) {
        return Err(EmissionsError::Restriction);
    }
    let o = cycle_emissions(p, cycle)?.mg_per_km;
    robustness_of_output(ctx, cycle, o)
}

fn robustness_of_output(
    ctx: &EmissionContext,
    cycle: &[f64],
    o: f64,
) -> Result<f64, EmissionsError> {
    let w = EmissionContext::io_trace(cycle, o);
    let std = EmissionContext::io_trace(&ctx.standard_cycle, ctx.std_output);
    let r = ctx
        .formula()
        .evaluate(&[&w, &std], 0)
        .map_err(|e| EmissionsError::Parameter(e.to_string()))?;
    Ok(r.robustness)
}

#[derive(Debug, Clone)]
pub struct EmissionsRun {
    pub outcome: FalsificationOutcome<Vec<f64>>,
    /// Candidates handed to the robustness function.
    pub probes: usize,
    /// Candidates that failed the membership check (expected 0).
    pub membership_violations: usize,
    /// Candidates without predictor coverage, scored `+∞`.
    pub no_data: usize,
}

impl EmissionsRun {
    /// `t_s,std_speed,candidate_speed` for the minimising candidate.
    pub fn plot_csv(&self, standard: &[f64]) -> String {
        plot_csv(standard, &self.outcome.argmin)
    }
}

pub fn plot_csv(standard: &[f64], candidate: &[f64]) -> String {
    let mut out = String::from("t_s,std_speed,candidate_speed\n");
    for (t, (s, c)) in standard.iter().zip(candidate).enumerate() {
        out.push_str(&format!("{t},{s},{c}\n"));
    }
    out
}

/// Searches the κi tube around the standard cycle for a variation whose predicted
/// emission rate leaves the κo band. Uncovered candidates count as `+∞`.
pub fn falsify_emissions(
    ctx: &EmissionContext,
    p: &NoxPredictor,
    cfg: &FalsifierConfig,
    window: usize,
    step_bound: f64,
) -> Result<EmissionsRun, FalsifyError<Vec<f64>, EmissionsError>> {
    let space = ctx.space();
    let mut proposals = ProfileProposal {
        space: space.clone(),
        window,
        step_bound,
    };
    let mut probes = 0;
    let mut membership_violations = 0;
    let mut no_data = 0;
    let outcome = falsify(
        |cycle: &Vec<f64>| {
            probes += 1;
            if !space.contains(cycle) {
                membership_violations += 1;
                return Err(EmissionsError::Restriction);
            }
            match cycle_emissions(p, cycle) {
                Ok(e) => robustness_of_output(ctx, cycle, e.mg_per_km),
                Err(EmissionsError::NoData(_)) => {
                    no_data += 1;
                    Ok(f64::INFINITY)
                }
                Err(e) => Err(e),
            }
        },
        ctx.standard_cycle.clone(),
        &mut proposals,
        cfg,
    )?;
    Ok(EmissionsRun {
        outcome,
        probes,
        membership_violations,
        no_data,
    })
}

/// Training grid used by the synthetic scenario: speeds 0..=140 km/h, accelerations
/// −10..=10 m/s² in steps of 0.5, NOx `0.02·v` mg/s plus `band_extra` inside `band`.
pub fn synthetic_predictor(band: Option<(f64, f64)>, band_extra: f64) -> NoxPredictor {
    let mut samples = Vec::new();
    for v in 0..=140 {
        let v = v as f64;
        for k in -20..=20 {
            let a = k as f64 * 0.5;
            let planted = band.is_some_and(|(lo, hi)| v >= lo && v <= hi);
            let nox = 0.02 * v + if planted { band_extra } else { 0.0 };
            samples.push(Sample {
                speed: v,
                accel: a,
                nox,
            });
        }
    }
    NoxPredictor::new(samples, 2.0, 2.0).expect("default tolerances")
}
