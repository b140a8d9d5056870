//! TOML experiment configuration.

use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::channel::{ChannelParams, FadingKind};
use crate::engine::{Policy, SimConfig, SocialGraphSpec, Sweep, MAX_CHANNELS};
use crate::error::{Error, Result};
use crate::learn::{AlphaSchedule, LearnerConfig};
use crate::recommend::{FusionOptions, FusionRule};
use crate::topology::{parse_edgelist, Selection};

/// Edge list shipped with the crate, addressable as `builtin:sample`.
pub const SAMPLE_EDGELIST: &str = include_str!("../../data/sample_social.edges");

const PRESETS: [(&str, &str); 4] = [
    ("paper-fig7", include_str!("../../presets/paper-fig7.toml")),
    ("paper-fig8", include_str!("../../presets/paper-fig8.toml")),
    ("paper-fig9", include_str!("../../presets/paper-fig9.toml")),
    ("paper-beta", include_str!("../../presets/paper-beta.toml")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// A parsed experiment: the base scenario, the policies to compare and an
/// optional single-axis sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub id: String,
    pub base: SimConfig,
    pub policies: Vec<Policy>,
    pub sweep: Option<Sweep>,
    /// First 16 hex digits of the SHA-256 of the source text.
    pub config_hash: String,
}

const SECTIONS: [(&str, &[&str]); 5] = [
    ("channels", &["count", "lambda", "mu", "fading"]),
    (
        "users",
        &[
            "count",
            "area_side",
            "contention_probs",
            "throughput_means",
            "per_user_means",
            "positions",
        ],
    ),
    ("topology", &["delta", "social", "p_link", "edgelist_path", "selection"]),
    (
        "policy",
        &[
            "policies",
            "beta",
            "alpha",
            "alpha_constant",
            "initial_value",
            "normalize_payoffs",
            "p_rec",
            "fusion",
            "include_own_report",
            "max_rounds",
        ],
    ),
    (
        "run",
        &[
            "experiment_id",
            "horizon_slots",
            "replications",
            "seed",
            "warmup_fraction",
            "residual_slots",
            "sweep",
        ],
    ),
];

struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
}

impl<'a> Section<'a> {
    fn path(&self, key: &str) -> String {
        format!("{}.{key}", self.name)
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.table.and_then(|t| t.get(key))
    }

    fn required(&self, key: &str) -> Result<&'a Value> {
        self.get(key)
            .ok_or_else(|| Error::config(self.path(key), "missing required key"))
    }

    fn float_of(&self, key: &str, v: &Value) -> Result<f64> {
        match v {
            Value::Float(f) => Ok(*f),
            Value::Integer(i) => Ok(*i as f64),
            other => Err(Error::config(
                self.path(key),
                format!("expected a number, found {}", other.type_str()),
            )),
        }
    }

    fn float(&self, key: &str, default: f64) -> Result<f64> {
        self.get(key).map_or(Ok(default), |v| self.float_of(key, v))
    }

    fn req_float(&self, key: &str) -> Result<f64> {
        self.float_of(key, self.required(key)?)
    }

    fn uint_of(&self, key: &str, v: &Value) -> Result<u64> {
        match v {
            Value::Integer(i) if *i >= 0 => Ok(*i as u64),
            Value::Integer(i) => Err(Error::config(self.path(key), format!("{i} must be >= 0"))),
            other => Err(Error::config(
                self.path(key),
                format!("expected an integer, found {}", other.type_str()),
            )),
        }
    }

    fn uint(&self, key: &str, default: u64) -> Result<u64> {
        self.get(key).map_or(Ok(default), |v| self.uint_of(key, v))
    }

    fn req_uint(&self, key: &str) -> Result<u64> {
        self.uint_of(key, self.required(key)?)
    }

    fn boolean(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(other) => Err(Error::config(
                self.path(key),
                format!("expected a boolean, found {}", other.type_str()),
            )),
        }
    }

    fn string(&self, key: &str) -> Result<Option<&'a str>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(other) => Err(Error::config(
                self.path(key),
                format!("expected a string, found {}", other.type_str()),
            )),
        }
    }

    fn floats_of(&self, key: &str, v: &Value) -> Result<Vec<f64>> {
        match v {
            Value::Array(items) => items.iter().map(|x| self.float_of(key, x)).collect(),
            other => Err(Error::config(
                self.path(key),
                format!("expected an array of numbers, found {}", other.type_str()),
            )),
        }
    }

    fn floats(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(key).map(|v| self.floats_of(key, v)).transpose()
    }

    /// A number applied to every channel, or one number per channel.
    fn per_channel(&self, key: &str, count: usize) -> Result<Vec<f64>> {
        let v = self.required(key)?;
        let values = match v {
            Value::Array(_) => self.floats_of(key, v)?,
            _ => vec![self.float_of(key, v)?; count],
        };
        if values.len() != count {
            return Err(Error::config(
                self.path(key),
                format!("{} values for {count} channels", values.len()),
            ));
        }
        Ok(values)
    }
}

fn choice<T: Copy>(key: String, value: &str, options: &[(&str, T)]) -> Result<T> {
    options
        .iter()
        .find(|(n, _)| *n == value)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            Error::config(key, format!("unknown value {value:?}; expected one of {}", names.join(", ")))
        })
}

pub fn config_hash(source: &str) -> String {
    hex::encode(&Sha256::digest(source.as_bytes())[..8])
}

/// Parses and validates a configuration document. Relative edge-list paths
/// are resolved against `base_dir`.
pub fn parse_config(source: &str, base_dir: Option<&Path>) -> Result<ExperimentSpec> {
    let doc: Table = source
        .parse()
        .map_err(|e: toml::de::Error| Error::config("<document>", e.message().to_string()))?;
    for (key, value) in &doc {
        let Some((_, allowed)) = SECTIONS.iter().find(|(s, _)| s == key) else {
            let names: Vec<&str> = SECTIONS.iter().map(|(s, _)| *s).collect();
            return Err(Error::config(
                key.clone(),
                format!("unknown key; expected one of the sections {}", names.join(", ")),
            ));
        };
        let Value::Table(t) = value else {
            return Err(Error::config(key.clone(), "expected a section"));
        };
        for k in t.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::config(format!("{key}.{k}"), "unknown key"));
            }
        }
    }
    let section = |name: &'static str| Section {
        name,
        table: doc.get(name).and_then(Value::as_table),
    };
    let (ch, us, topo, pol, run) = (
        section("channels"),
        section("users"),
        section("topology"),
        section("policy"),
        section("run"),
    );

    let n_channels = ch.req_uint("count")?;
    if n_channels == 0 || n_channels > MAX_CHANNELS as u64 {
        return Err(Error::config(
            ch.path("count"),
            format!("{n_channels} outside 1..={MAX_CHANNELS}"),
        ));
    }
    let n_channels = n_channels as usize;
    let lambdas = ch.per_channel("lambda", n_channels)?;
    let mus = ch.per_channel("mu", n_channels)?;
    let channels = lambdas
        .iter()
        .zip(&mus)
        .enumerate()
        .map(|(m, (&l, &u))| {
            ChannelParams::new(l, u).map_err(|e| match e {
                Error::Config { key, reason } => Error::config(format!("channels.{key}[{m}]"), reason),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fading = match ch.string("fading")? {
        None => FadingKind::Exponential,
        Some(s) => choice(
            ch.path("fading"),
            s,
            &[("exponential", FadingKind::Exponential), ("constant", FadingKind::Constant)],
        )?,
    };

    let mut config = SimConfig::reference(Policy::Strong);
    config.n_channels = n_channels;
    config.channels = channels;
    config.fading = fading;
    config.n_users = us.req_uint("count")? as usize;
    config.area_side = us.float("area_side", config.area_side)?;
    if let Some(v) = us.floats("contention_probs")? {
        config.contention_set = v;
    }
    if let Some(v) = us.floats("throughput_means")? {
        config.means_set = v;
    }
    config.per_user_means = us.boolean("per_user_means", false)?;
    if let Some(v) = us.get("positions") {
        let pairs = match v {
            Value::Array(items) => items
                .iter()
                .map(|p| {
                    let xy = us.floats_of("positions", p)?;
                    match xy.as_slice() {
                        [x, y] => Ok((*x, *y)),
                        _ => Err(Error::config(us.path("positions"), "each position is [x, y]")),
                    }
                })
                .collect::<Result<Vec<_>>>()?,
            other => {
                return Err(Error::config(
                    us.path("positions"),
                    format!("expected an array, found {}", other.type_str()),
                ))
            }
        };
        config.positions = Some(pairs);
    }

    config.delta = topo.req_float("delta")?;
    let social = topo.string("social")?.unwrap_or("er");
    config.social = match choice(topo.path("social"), social, &[("er", true), ("edgelist", false)])? {
        true => SocialGraphSpec::ErdosRenyi {
            p_link: topo.req_float("p_link")?,
        },
        false => {
            let path = topo
                .string("edgelist_path")?
                .ok_or_else(|| Error::config(topo.path("edgelist_path"), "missing required key"))?;
            let text = if path == "builtin:sample" {
                SAMPLE_EDGELIST.to_string()
            } else {
                let full = base_dir.map_or_else(|| Path::new(path).to_path_buf(), |d| d.join(path));
                std::fs::read_to_string(&full).map_err(|e| Error::io(full.display().to_string(), e))?
            };
            let trace = parse_edgelist(&text).map_err(|e| {
                Error::config(topo.path("edgelist_path"), format!("{path}: {e}"))
            })?;
            let selection = match topo.string("selection")? {
                None => Selection::RandomN,
                Some(s) => choice(
                    topo.path("selection"),
                    s,
                    &[("first-n", Selection::FirstN), ("random-n", Selection::RandomN)],
                )?,
            };
            SocialGraphSpec::Trace {
                trace: Arc::new(trace),
                selection,
            }
        }
    };

    let policies = match pol.required("policies")? {
        Value::Array(items) => items
            .iter()
            .map(|v| match v {
                Value::String(s) => Policy::parse(s).ok_or_else(|| {
                    Error::config(
                        pol.path("policies"),
                        format!("unknown policy {s:?}; expected strong, weak, static-rec or belief"),
                    )
                }),
                other => Err(Error::config(
                    pol.path("policies"),
                    format!("expected policy names, found {}", other.type_str()),
                )),
            })
            .collect::<Result<Vec<_>>>()?,
        other => {
            return Err(Error::config(
                pol.path("policies"),
                format!("expected an array, found {}", other.type_str()),
            ))
        }
    };
    if policies.is_empty() {
        return Err(Error::config(pol.path("policies"), "at least one policy is required"));
    }
    let alpha = match pol.string("alpha")?.unwrap_or("per-cell-harmonic") {
        "constant" => AlphaSchedule::Constant(pol.req_float("alpha_constant")?),
        other => choice(
            pol.path("alpha"),
            other,
            &[
                ("per-cell-harmonic", AlphaSchedule::PerCellHarmonic),
                ("global-harmonic", AlphaSchedule::GlobalHarmonic),
            ],
        )?,
    };
    let defaults = LearnerConfig::default();
    config.learner = LearnerConfig {
        beta: pol.float("beta", defaults.beta)?,
        alpha,
        initial_value: pol.float("initial_value", defaults.initial_value)?,
        normalize_payoffs: pol.boolean("normalize_payoffs", defaults.normalize_payoffs)?,
    };
    config.p_rec = pol.float("p_rec", config.p_rec)?;
    let fusion_defaults = FusionOptions::default();
    config.fusion = FusionOptions {
        rule: match pol.string("fusion")? {
            None => fusion_defaults.rule,
            Some(s) => choice(
                pol.path("fusion"),
                s,
                &[("or", FusionRule::Or), ("majority", FusionRule::Majority)],
            )?,
        },
        include_own_report: pol.boolean("include_own_report", fusion_defaults.include_own_report)?,
    };
    config.max_rounds = pol.uint("max_rounds", config.max_rounds as u64)? as usize;

    config.horizon_slots = run.req_uint("horizon_slots")? as usize;
    config.replications = run.req_uint("replications")? as usize;
    config.seed = run.req_uint("seed")?;
    config.warmup_fraction = run.float("warmup_fraction", config.warmup_fraction)?;
    config.residual_slots = run.uint("residual_slots", 0)? as usize;
    config.policy = policies[0];
    let id = run.string("experiment_id")?.unwrap_or("custom").to_string();

    let sweep = match run.get("sweep") {
        None => None,
        Some(Value::Table(t)) => {
            let pairs = t
                .iter()
                .map(|(k, v)| Ok((k.clone(), run.floats_of(&format!("sweep.{k}"), v)?)))
                .collect::<Result<Vec<_>>>()?;
            Sweep::from_pairs(pairs)?
        }
        Some(other) => {
            return Err(Error::config(
                run.path("sweep"),
                format!("expected a table, found {}", other.type_str()),
            ))
        }
    };
    config.validate()?;
    if let Some(s) = &sweep {
        for &v in &s.values {
            s.axis.apply(&config, v)?;
        }
    }
    Ok(ExperimentSpec {
        id,
        base: config,
        policies,
        sweep,
        config_hash: config_hash(source),
    })
}
