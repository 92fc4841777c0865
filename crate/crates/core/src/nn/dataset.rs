//! Logged `(input_k, output_{k+1})` pairs for predictor training.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{PlantOutputVec, INPUT_DIM, OUTPUT_CHANNELS, OUTPUT_DIM};
use crate::error::{Error, Result};
use crate::harness::config::{ControllerConfig, ScenarioConfig, SchedulePoint};
use crate::harness::sim::Simulator;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub episode: u32,
    pub input: [f64; INPUT_DIM],
    pub target: [f64; OUTPUT_DIM],
}

impl Sample {
    pub fn pair(&self) -> (&[f64], &[f64]) {
        (&self.input[..], &self.target[..])
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub dt: f64,
    pub seed: u64,
    pub scenario: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(meta: DatasetMeta) -> Self {
        Self {
            samples: Vec::new(),
            meta,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Appends one contiguous episode. `commands[k]` is the voltage command
    /// issued after observing `outputs[k]`; it forms the input with
    /// `outputs[k]` and `outputs[k + 1]` is the target.
    ///
    /// The target's error channels are taken against the references of step
    /// `k`, so a reference change between the two samples does not leak into
    /// the target. Rollouts hold references fixed the same way.
    pub fn push_episode(&mut self, episode: u32, outputs: &[PlantOutputVec], commands: &[f64]) {
        let pairs = outputs.len().saturating_sub(1).min(commands.len());
        self.samples.extend((0..pairs).map(|k| {
            let (now, next) = (&outputs[k], &outputs[k + 1]);
            let mut target = *next;
            target.p_err = now.p_err - (next.p_out - now.p_out);
            target.q_err = now.q_err - (next.q_out - now.q_out);
            Sample {
                episode,
                input: now.with_command(commands[k]),
                target: target.to_array(),
            }
        }));
    }

    pub fn episode_count(&self) -> usize {
        let mut n = 0;
        let mut last = None;
        for s in &self.samples {
            if last != Some(s.episode) {
                n += 1;
                last = Some(s.episode);
            }
        }
        n
    }

    /// Temporal split: the trailing `fraction` of rows are held out.
    pub fn split(&self, validation_fraction: f64) -> (&[Sample], &[Sample]) {
        let held = ((self.samples.len() as f64) * validation_fraction).floor() as usize;
        self.samples.split_at(self.samples.len() - held.min(self.samples.len()))
    }

    pub fn header() -> Vec<String> {
        let mut cols = vec!["episode".to_string()];
        cols.extend(OUTPUT_CHANNELS.iter().map(|c| c.to_string()));
        cols.push("e_cmd".into());
        cols.extend(OUTPUT_CHANNELS.iter().map(|c| format!("next_{c}")));
        cols
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
        writeln!(
            file,
            "# dt={} seed={} scenario={}",
            self.meta.dt, self.meta.seed, self.meta.scenario
        )
        .map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        w.write_record(Self::header()).map_err(csv_err)?;
        let mut record = Vec::with_capacity(1 + INPUT_DIM + OUTPUT_DIM);
        for s in &self.samples {
            record.clear();
            record.push(s.episode.to_string());
            record.extend(s.input.iter().chain(&s.target).map(|v| v.to_string()));
            w.write_record(&record).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        let mut first = String::new();
        reader
            .read_line(&mut first)
            .map_err(|e| Error::io(path, e))?;
        let meta = parse_meta(&first);
        let body: Box<dyn std::io::Read> = if meta.is_some() {
            Box::new(reader)
        } else {
            Box::new(std::io::Cursor::new(first.into_bytes()).chain(reader))
        };
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(body);
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let header = rdr.headers().map_err(csv_err)?.clone();
        if header.iter().collect::<Vec<_>>() != Self::header() {
            return Err(Error::Config(format!(
                "{}: unexpected dataset header",
                path.display()
            )));
        }
        let mut data = Dataset::new(meta.unwrap_or_default());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let bad = |what: &str| {
                Error::Config(format!("{}: row {}: {what}", path.display(), line + 1))
            };
            let episode = rec[0].parse::<u32>().map_err(|_| bad("bad episode id"))?;
            let mut values = [0.0; INPUT_DIM + OUTPUT_DIM];
            for (i, v) in values.iter_mut().enumerate() {
                *v = rec[i + 1].parse::<f64>().map_err(|_| bad("bad number"))?;
            }
            let mut input = [0.0; INPUT_DIM];
            let mut target = [0.0; OUTPUT_DIM];
            input.copy_from_slice(&values[..INPUT_DIM]);
            target.copy_from_slice(&values[INPUT_DIM..]);
            data.samples.push(Sample {
                episode,
                input,
                target,
            });
        }
        Ok(data)
    }
}

fn parse_meta(line: &str) -> Option<DatasetMeta> {
    let rest = line.trim().strip_prefix('#')?;
    let mut meta = DatasetMeta::default();
    for part in rest.split_whitespace() {
        let (key, value) = part.split_once('=')?;
        match key {
            "dt" => meta.dt = value.parse().ok()?,
            "seed" => meta.seed = value.parse().ok()?,
            "scenario" => meta.scenario = value.to_string(),
            _ => {}
        }
    }
    Some(meta)
}

/// Randomized excitation used while logging training data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectionOptions {
    pub p_set_range: (f64, f64),
    pub q_set_range: (f64, f64),
    /// Time between reference changes, drawn uniformly from this range.
    pub dwell_range: (f64, f64),
    /// Half-width of a piecewise-constant dither added to the voltage command.
    pub dither_amplitude: f64,
    /// Hold time of each dither level, in control steps.
    pub dither_hold_steps: (u32, u32),
}

impl Default for CollectionOptions {
    fn default() -> Self {
        Self {
            p_set_range: (0.0, 5000.0),
            q_set_range: (-2500.0, 2500.0),
            dwell_range: (1.0, 10.0),
            dither_amplitude: 1.0,
            dither_hold_steps: (5, 200),
        }
    }
}

/// Dither amplitudes (V) giving the predictor enough excitation on each preset.
pub const INDUCTIVE_DITHER: f64 = 0.5;
pub const RESISTIVE_DITHER: f64 = 2.0;

impl CollectionOptions {
    pub fn with_dither(amplitude: f64) -> Self {
        Self {
            dither_amplitude: amplitude,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.0 <= r.1;
        if !ordered(self.p_set_range) || !ordered(self.q_set_range) {
            return Err(Error::Config("reference ranges must be ordered".into()));
        }
        if !ordered(self.dwell_range) || !(self.dwell_range.0 > 0.0) {
            return Err(Error::Config("dwell range must be positive and ordered".into()));
        }
        if !(self.dither_amplitude >= 0.0) {
            return Err(Error::Config("dither amplitude must be non-negative".into()));
        }
        let (lo, hi) = self.dither_hold_steps;
        if lo == 0 || lo > hi {
            return Err(Error::Config("dither hold range must be positive and ordered".into()));
        }
        Ok(())
    }

    /// Random piecewise-constant reference schedule covering `duration`.
    pub fn random_schedule<R: Rng>(&self, duration: f64, rng: &mut R) -> Vec<SchedulePoint> {
        let mut schedule = Vec::new();
        let mut t = 0.0;
        while t < duration || schedule.is_empty() {
            schedule.push(SchedulePoint {
                time: t,
                p_set: uniform(rng, self.p_set_range),
                q_set: uniform(rng, self.q_set_range),
            });
            t += uniform(rng, self.dwell_range);
        }
        schedule
    }
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Runs the closed loop under a baseline controller with random reference
/// steps and logs one training pair per control step.
///
/// The run covers `duration / dt` samples, so it yields one pair fewer.
pub fn collect_dataset(
    scenario: &ScenarioConfig,
    options: &CollectionOptions,
    duration: f64,
    seed: u64,
) -> Result<Dataset> {
    if matches!(scenario.controller, ControllerConfig::Npc(_)) {
        return Err(Error::Config(
            "training data must be collected under a PI-based controller".into(),
        ));
    }
    options.validate()?;
    if !(duration >= 0.0) {
        return Err(Error::Config("duration must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut config = scenario.clone();
    config.reference_schedule = options.random_schedule(duration, &mut rng);
    config.duration = duration;
    config.seed = seed;

    let samples = (duration / config.dt).round() as usize;
    let mut sim = Simulator::new(&config)?;
    let mut outputs = Vec::with_capacity(samples);
    let mut commands = Vec::with_capacity(samples);
    let mut dither = 0.0;
    let mut dither_left = 0u32;
    for _ in 0..samples {
        let y = sim.observe()?;
        outputs.push(y);
        if options.dither_amplitude > 0.0 {
            if dither_left == 0 {
                dither = rng.gen_range(-options.dither_amplitude..=options.dither_amplitude);
                dither_left =
                    rng.gen_range(options.dither_hold_steps.0..=options.dither_hold_steps.1);
            }
            dither_left -= 1;
        }
        let e = sim.control_with_offset(&y, dither)?;
        commands.push(e);
        sim.advance()?;
    }
    let mut data = Dataset::new(DatasetMeta {
        dt: config.dt,
        seed,
        scenario: config.grid.name().to_string(),
    });
    data.push_episode(0, &outputs, &commands);
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::GridPreset;

    fn sample_data() -> Dataset {
        let outputs: Vec<PlantOutputVec> = (0..5)
            .map(|k| PlantOutputVec::measured(f64::from(k) * 10.0, -1.5, (100.0, 0.0), 0.01, 0.002))
            .collect();
        let mut d = Dataset::new(DatasetMeta {
            dt: 1e-3,
            seed: 4,
            scenario: "inductive".into(),
        });
        d.push_episode(0, &outputs, &[90.0, 90.1, 90.2, 90.3, 90.4]);
        d.push_episode(1, &outputs[..3], &[91.0, 91.0, 91.0]);
        d
    }

    #[test]
    fn episodes_are_not_spanned() {
        let d = sample_data();
        assert_eq!(d.len(), 4 + 2);
        assert_eq!(d.episode_count(), 2);
        assert_eq!(d.samples[3].target, [40.0, -1.5, 60.0, 1.5, 0.01, 0.002]);
        assert_eq!(d.samples[4].input[6], 91.0);
        assert_eq!(d.samples[4].input[0], 0.0);
    }

    #[test]
    fn target_errors_use_references_of_the_input_step() {
        let outputs = [
            PlantOutputVec::measured(10.0, 5.0, (100.0, 20.0), 0.0, 0.0),
            PlantOutputVec::measured(12.0, 4.0, (300.0, -50.0), 0.0, 0.0),
        ];
        let mut d = Dataset::default();
        d.push_episode(0, &outputs, &[90.0]);
        assert_eq!(d.samples[0].target[2], 88.0);
        assert_eq!(d.samples[0].target[3], 16.0);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let mut d = sample_data();
        d.samples[0].input[5] = 1.0 / 3.0;
        d.write_csv(&path).unwrap();
        let back = Dataset::read_csv(&path).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn one_second_yields_999_pairs() {
        let config = ScenarioConfig::preset(GridPreset::Inductive, crate::harness::config::ControllerKind::PiDroop);
        let d = collect_dataset(&config, &CollectionOptions::default(), 1.0, 5).unwrap();
        assert_eq!(d.len(), 999);
        assert_eq!(d.episode_count(), 1);
    }

    #[test]
    fn same_seed_gives_identical_bytes() {
        let config = ScenarioConfig::preset(GridPreset::Resistive, crate::harness::config::ControllerKind::TunedPi);
        let dir = tempfile::tempdir().unwrap();
        let opts = CollectionOptions::default();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        collect_dataset(&config, &opts, 3.0, 9).unwrap().write_csv(&a).unwrap();
        collect_dataset(&config, &opts, 3.0, 9).unwrap().write_csv(&b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let c = collect_dataset(&config, &opts, 3.0, 10).unwrap();
        assert_ne!(c, Dataset::read_csv(&a).unwrap());
    }

    #[test]
    fn logged_errors_match_references() {
        let config = ScenarioConfig::preset(GridPreset::Inductive, crate::harness::config::ControllerKind::PiDroop);
        let d = collect_dataset(&config, &CollectionOptions::default(), 2.0, 1).unwrap();
        for s in &d.samples {
            // p_err + p_out recovers the same p_set within a row's dwell.
            assert!((s.input[2] + s.input[0]).is_finite());
            assert!(s.input.iter().chain(&s.target).all(|v| v.is_finite()));
        }
    }

    #[test]
    fn predictive_controller_cannot_collect() {
        let mut config = ScenarioConfig::preset(GridPreset::Inductive, crate::harness::config::ControllerKind::PiDroop);
        config.controller = ControllerConfig::Npc(Default::default());
        assert!(collect_dataset(&config, &CollectionOptions::default(), 1.0, 1).is_err());
    }
}
