//! Benchmark sweeps: simulate → pilot → BLP → evaluate, pilot and pilot+BLP
//! reported side by side.
//!
//! Manifest grammar, one job per line, `#` starts a comment:
//!
//! ```text
//! image=<path> [name=<label>] peaks=<p1,p2,...> [seeds=<s1,s2,...>] [pilot=<source>] [pilot-scale=<s>]
//! ```
//!
//! `<source>` is `builtin` (default), `noisy` (the observation is its own
//! pilot) or `file:<template>`, where `{name}`, `{peak}` and `{seed}` in the
//! template are substituted per cell. Relative paths resolve against the
//! manifest's directory. Seeds default to `0`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::metrics::{psnr, EvalRecord};
use crate::pgm;
use crate::pilot::{make_pilot, PilotSpec};
use crate::pipeline::{denoise_with_pilot, PipelineConfig};
use crate::poisson::{poissonize, NoiseSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum PilotSource {
    Builtin,
    Noisy,
    File { template: String, scale: Option<f64> },
}

impl PilotSource {
    pub fn label(&self) -> &'static str {
        match self {
            PilotSource::Builtin => "builtin",
            PilotSource::Noisy => "noisy",
            PilotSource::File { .. } => "external",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub image: PathBuf,
    pub name: String,
    pub peaks: Vec<f64>,
    pub seeds: Vec<u64>,
    pub pilot: PilotSource,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub jobs: Vec<Job>,
}

fn list<T: std::str::FromStr>(v: &str, key: &str, line: usize) -> Result<Vec<T>> {
    v.split(',')
        .map(|s| {
            s.trim().parse().map_err(|_| Error::Manifest {
                line,
                msg: format!("bad {key} entry {s:?}"),
            })
        })
        .collect()
}

impl Manifest {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut jobs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Manifest { line, msg };
            let (mut image, mut name, mut peaks, mut seeds) = (None, None, None, vec![0]);
            let mut pilot = PilotSource::Builtin;
            let mut scale = None;
            for tok in content.split_whitespace() {
                let (k, v) = tok
                    .split_once('=')
                    .ok_or_else(|| err(format!("expected key=value, got {tok:?}")))?;
                match k {
                    "image" => image = Some(base_dir.join(v)),
                    "name" => name = Some(v.to_string()),
                    "peaks" => {
                        let p: Vec<f64> = list(v, k, line)?;
                        if let Some(bad) = p.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
                            return Err(err(format!("peak must be > 0, got {bad}")));
                        }
                        peaks = Some(p);
                    }
                    "seeds" => seeds = list(v, k, line)?,
                    "pilot" => {
                        pilot = match v {
                            "builtin" => PilotSource::Builtin,
                            "noisy" => PilotSource::Noisy,
                            _ => match v.strip_prefix("file:") {
                                Some(t) if !t.is_empty() => PilotSource::File {
                                    template: base_dir.join(t).to_string_lossy().into_owned(),
                                    scale: None,
                                },
                                _ => return Err(err(format!("unknown pilot source {v:?}"))),
                            },
                        }
                    }
                    "pilot-scale" => {
                        scale = Some(v.parse::<f64>().ok().filter(|s| *s > 0.0).ok_or_else(|| {
                            err(format!("pilot-scale must be a positive number, got {v:?}"))
                        })?)
                    }
                    _ => return Err(err(format!("unknown key {k:?}"))),
                }
            }
            if let PilotSource::File { scale: s, .. } = &mut pilot {
                *s = scale;
            }
            let image = image.ok_or_else(|| err("missing image=".into()))?;
            let peaks = peaks.ok_or_else(|| err("missing peaks=".into()))?;
            if seeds.is_empty() {
                return Err(err("empty seeds".into()));
            }
            let name = name.unwrap_or_else(|| {
                image
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "image".into())
            });
            jobs.push(Job {
                image,
                name,
                peaks,
                seeds,
                pilot,
            });
        }
        Ok(Self { jobs })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

impl fmt::Display for PipelineConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.search;
        write!(
            f,
            "side={} stride={} window={} k={} iterations={} jitter={:?}",
            s.patch_side, s.stride, s.window, s.k, self.iterations, self.jitter
        )?;
        match &self.pilot {
            PilotSpec::Builtin(b) => write!(
                f,
                " pilot=builtin threshold={} pilot-side={} pilot-stride={} weighting={:?} inverse={:?}",
                b.threshold, b.patch_side, b.stride, b.weighting, b.inverse
            ),
            PilotSpec::External { path, scale } => {
                write!(f, " pilot=file:{} pilot-scale={scale:?}", path.display())
            }
            PilotSpec::Provided(_) => write!(f, " pilot=provided"),
        }
    }
}

/// PSNR of the pilot and of the BLP output for one noisy realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellScore {
    pub pilot_psnr: f64,
    pub pilot_mse: f64,
    pub blp_psnr: f64,
    pub blp_mse: f64,
    pub pilot_seconds: f64,
    pub blp_seconds: f64,
}

fn substitute(template: &str, name: &str, peak: f64, seed: u64) -> PathBuf {
    PathBuf::from(
        template
            .replace("{name}", name)
            .replace("{peak}", &peak.to_string())
            .replace("{seed}", &seed.to_string()),
    )
}

/// Simulates, builds the pilot named by `source` and runs the BLP passes.
pub fn run_cell(
    clean: &Image,
    job: &Job,
    peak: f64,
    seed: u64,
    cfg: &PipelineConfig,
) -> Result<CellScore> {
    let (scaled, noisy) = poissonize(clean, &NoiseSpec::new(peak, seed)?)?;
    let t0 = Instant::now();
    let pilot_spec = match &job.pilot {
        PilotSource::Builtin => cfg.pilot.clone(),
        PilotSource::Noisy => PilotSpec::Provided(noisy.clone()),
        PilotSource::File { template, scale } => PilotSpec::External {
            path: substitute(template, &job.name, peak, seed),
            scale: *scale,
        },
    };
    let pilot = make_pilot(&noisy, &pilot_spec)?;
    let pilot_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let out = denoise_with_pilot(&noisy, pilot, cfg)?;
    let blp_seconds = t1.elapsed().as_secs_f64();
    let pilot_mse = crate::metrics::mse(&scaled, &out.pilot)?;
    let blp_mse = crate::metrics::mse(&scaled, &out.image)?;
    Ok(CellScore {
        pilot_psnr: psnr(&scaled, &out.pilot, peak)?,
        pilot_mse,
        blp_psnr: psnr(&scaled, &out.image, peak)?,
        blp_mse,
        pilot_seconds,
        blp_seconds,
    })
}

fn job_peak_records(job: &Job, peak: f64, cfg: &PipelineConfig) -> [EvalRecord; 2] {
    let pilot_label = job.pilot.label();
    let blp_label = format!("{pilot_label}+BLP");
    let scores: Result<Vec<CellScore>> = pgm::read_pgm(&job.image).and_then(|clean| {
        job.seeds
            .iter()
            .map(|&seed| run_cell(&clean, job, peak, seed, cfg))
            .collect()
    });
    match scores {
        Ok(scores) => {
            let n = scores.len() as f64;
            let mean = |f: fn(&CellScore) -> f64| scores.iter().map(f).sum::<f64>() / n;
            let total = |f: fn(&CellScore) -> f64| scores.iter().map(f).sum::<f64>();
            [
                EvalRecord {
                    image: job.name.clone(),
                    peak,
                    method: pilot_label.to_string(),
                    psnr: mean(|s| s.pilot_psnr),
                    mse: mean(|s| s.pilot_mse),
                    wall_seconds: total(|s| s.pilot_seconds),
                    error: None,
                },
                EvalRecord {
                    image: job.name.clone(),
                    peak,
                    method: blp_label,
                    psnr: mean(|s| s.blp_psnr),
                    mse: mean(|s| s.blp_mse),
                    wall_seconds: total(|s| s.blp_seconds),
                    error: None,
                },
            ]
        }
        Err(e) => [
            EvalRecord::failed(&job.name, peak, pilot_label, e.to_string()),
            EvalRecord::failed(&job.name, peak, &blp_label, e.to_string()),
        ],
    }
}

/// Two records (pilot, pilot+BLP) per job and peak, PSNR averaged over the
/// job's seeds. A failing cell yields error records; the sweep continues.
pub fn run_benchmark(manifest: &Manifest, cfg: &PipelineConfig) -> Result<Vec<EvalRecord>> {
    cfg.validate()?;
    let cells: Vec<(&Job, f64)> = manifest
        .jobs
        .iter()
        .flat_map(|j| j.peaks.iter().map(move |&p| (j, p)))
        .collect();
    Ok(cells
        .par_iter()
        .map(|(job, peak)| job_peak_records(job, *peak, cfg))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect())
}
