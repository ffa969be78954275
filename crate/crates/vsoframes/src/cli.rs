//! Run configuration: the flat, versioned key=value file written next to
//! every fit for provenance. Round-trips losslessly.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fit::ResamplePolicy;
use crate::hyper::{HyperPrior, HyperSchedule};
use crate::model::{ModelConfig, ModelVariant, NonePolicy};

pub const RUN_CONFIG_VERSION: u32 = 1;

/// Everything that determines a fit run, minus the corpus bytes themselves.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub schedule: HyperSchedule,
    pub resample: ResamplePolicy,
    pub iters: u64,
    pub workers: usize,
    pub log_joint_every: u64,
    pub vocab_cutoff: usize,
    pub input: String,
    pub vocab: String,
    pub labels: String,
    pub label_mask: String,
    pub checkpoint: String,
    pub trace: String,
}

impl RunConfig {
    pub fn render(&self) -> String {
        let m = &self.model;
        let s = &self.schedule;
        let policy = match m.none_policy {
            None => "default",
            Some(NonePolicy::Placeholder) => "placeholder",
            Some(NonePolicy::Skip) => "skip",
        };
        let prior = match s.prior {
            HyperPrior::UniformLog => "uniform_log",
            HyperPrior::UniformLinear => "uniform_linear",
        };
        format!(
            "config_version = {RUN_CONFIG_VERSION}\n\
             model = {}\n\
             frames = {}\n\
             classes = {}\n\
             alpha = {}\n\
             beta = {}\n\
             gamma1 = {}\n\
             gamma2 = {}\n\
             gamma3 = {}\n\
             none_policy = {policy}\n\
             seed = {}\n\
             iters = {}\n\
             workers = {}\n\
             log_joint_every = {}\n\
             hyper_burnin = {}\n\
             hyper_interval = {}\n\
             slice_iters = {}\n\
             slice_width = {}\n\
             slice_max_stepouts = {}\n\
             slice_domain_lo = {}\n\
             slice_domain_hi = {}\n\
             hyper_prior = {prior}\n\
             resample_alpha = {}\n\
             resample_beta = {}\n\
             resample_gamma = {}\n\
             vocab_cutoff = {}\n\
             input = {}\n\
             vocab = {}\n\
             labels = {}\n\
             label_mask = {}\n\
             checkpoint = {}\n\
             trace = {}\n",
            m.variant.code(),
            m.frames,
            m.classes,
            m.alpha,
            m.beta,
            m.gamma[0],
            m.gamma[1],
            m.gamma[2],
            m.seed,
            self.iters,
            self.workers,
            self.log_joint_every,
            s.burnin,
            s.interval,
            s.slice_iters,
            s.step_width,
            s.max_stepouts,
            s.log_domain.0,
            s.log_domain.1,
            self.resample.alpha,
            self.resample.beta,
            self.resample.gamma,
            self.vocab_cutoff,
            self.input,
            self.vocab,
            self.labels,
            self.label_mask,
            self.checkpoint,
            self.trace,
        )
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }

    pub fn parse(text: &str, origin: &Path) -> Result<RunConfig> {
        let mut kv: BTreeMap<&str, &str> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, i + 1, "expected key = value"))?;
            kv.insert(k.trim(), v.trim());
        }
        let get = |key: &str| -> Result<&str> {
            kv.get(key)
                .copied()
                .ok_or_else(|| Error::Config(format!("run config is missing {key}")))
        };
        let parse_u64 = |key: &str| -> Result<u64> {
            get(key)?
                .parse()
                .map_err(|_| Error::Config(format!("bad integer for {key}")))
        };
        let parse_f64 = |key: &str| -> Result<f64> {
            get(key)?
                .parse()
                .map_err(|_| Error::Config(format!("bad number for {key}")))
        };
        let parse_bool = |key: &str| -> Result<bool> {
            match get(key)? {
                "true" => Ok(true),
                "false" => Ok(false),
                other => Err(Error::Config(format!("bad boolean {other:?} for {key}"))),
            }
        };
        let version = parse_u64("config_version")?;
        if version != RUN_CONFIG_VERSION as u64 {
            return Err(Error::Config(format!(
                "run config version {version} unsupported"
            )));
        }
        let mut model = ModelConfig::new(
            ModelVariant::from_code(parse_u64("model")? as u8)?,
            parse_u64("frames")? as usize,
        );
        model.classes = parse_u64("classes")? as usize;
        model.alpha = parse_f64("alpha")?;
        model.beta = parse_f64("beta")?;
        model.gamma = [
            parse_f64("gamma1")?,
            parse_f64("gamma2")?,
            parse_f64("gamma3")?,
        ];
        model.none_policy = match get("none_policy")? {
            "default" => None,
            "placeholder" => Some(NonePolicy::Placeholder),
            "skip" => Some(NonePolicy::Skip),
            other => return Err(Error::Config(format!("bad none_policy {other:?}"))),
        };
        model.seed = parse_u64("seed")?;
        let schedule = HyperSchedule {
            burnin: parse_u64("hyper_burnin")?,
            interval: parse_u64("hyper_interval")?,
            slice_iters: parse_u64("slice_iters")? as u32,
            step_width: parse_f64("slice_width")?,
            max_stepouts: parse_u64("slice_max_stepouts")? as u32,
            log_domain: (parse_f64("slice_domain_lo")?, parse_f64("slice_domain_hi")?),
            prior: match get("hyper_prior")? {
                "uniform_log" => HyperPrior::UniformLog,
                "uniform_linear" => HyperPrior::UniformLinear,
                other => return Err(Error::Config(format!("bad hyper_prior {other:?}"))),
            },
        };
        Ok(RunConfig {
            model,
            schedule,
            resample: ResamplePolicy {
                alpha: parse_bool("resample_alpha")?,
                beta: parse_bool("resample_beta")?,
                gamma: parse_bool("resample_gamma")?,
            },
            iters: parse_u64("iters")?,
            workers: parse_u64("workers")? as usize,
            log_joint_every: parse_u64("log_joint_every")?,
            vocab_cutoff: parse_u64("vocab_cutoff")? as usize,
            input: get("input")?.to_string(),
            vocab: get("vocab")?.to_string(),
            labels: get("labels")?.to_string(),
            label_mask: get("label_mask")?.to_string(),
            checkpoint: get("checkpoint")?.to_string(),
            trace: get("trace")?.to_string(),
        })
    }

    pub fn read(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text, path)
    }
}
