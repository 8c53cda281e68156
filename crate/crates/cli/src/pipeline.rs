use std::path::Path;
use std::str::FromStr;

use seqrpf::rpf::GibbsFamily;
use serde::Serialize;

use crate::cache::{cache_key, Cache};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::report::{emit_report, ensure_dir, write_file, Summary};
use crate::stages::{self, family_len, StageOutput};

/// Pipeline stages in dependency order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Pairing,
    SCheck,
    Rpf,
    Cones,
    Spectral,
    Simulate,
}

impl Stage {
    pub const ALL: [Stage; 6] =
        [Stage::Pairing, Stage::SCheck, Stage::Rpf, Stage::Cones, Stage::Spectral, Stage::Simulate];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Pairing => stages::PAIRING,
            Stage::SCheck => stages::S_CHECK,
            Stage::Rpf => stages::RPF,
            Stage::Cones => stages::CONES,
            Stage::Spectral => stages::SPECTRAL,
            Stage::Simulate => stages::SIMULATE,
        }
    }

    fn needs_gibbs(self) -> bool {
        self >= Stage::Rpf
    }
}

impl FromStr for Stage {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let norm = s.replace('-', "_");
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == norm)
            .ok_or_else(|| CliError::Usage(format!("unknown stage {s:?}")))
    }
}

/// The configuration sections a stage reads; their hash keys its cache entry.
fn stage_inputs(cfg: &RunConfig, stage: Stage) -> CliResult<serde_json::Value> {
    let base = serde_json::json!({ "system": cfg.system, "seed": cfg.seed });
    let extra = match stage {
        Stage::Pairing => serde_json::json!({ "pairing": cfg.pairing }),
        Stage::SCheck => serde_json::json!({}),
        _ => {
            let section = match stage {
                Stage::Rpf => serde_json::to_value(cfg.rpf),
                Stage::Cones => serde_json::to_value(&cfg.cones),
                Stage::Spectral => serde_json::to_value(&cfg.spectral),
                _ => serde_json::to_value(&cfg.sim),
            }
            .expect("config serialises");
            serde_json::json!({
                "grid": cfg.grid,
                "tolerances": cfg.tolerances,
                "family_len": family_len(cfg)?,
                "direction": cfg.direction(),
                "section": section,
            })
        }
    };
    Ok(serde_json::json!({ "base": base, "extra": extra }))
}

/// Hash of the configuration without its output directory, so identical
/// runs into different directories report the same value.
pub fn config_hash(cfg: &RunConfig) -> String {
    let mut c = cfg.clone();
    c.output = Default::default();
    cache_key("config", &c)
}

#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub summary: Summary,
    /// Stages whose results were computed in this run.
    pub computed: Vec<Stage>,
    /// Stages served from the cache.
    pub cached: Vec<Stage>,
    /// 0 pass, 2 check failure, 3 numeric failure.
    pub exit_code: i32,
}

pub fn write_stage_files(out: &Path, stage: &StageOutput) -> CliResult<()> {
    ensure_dir(out)?;
    for (name, text) in &stage.files {
        write_file(out, name, text)?;
    }
    Ok(())
}

fn compute(cfg: &RunConfig, stage: Stage, gibbs: &mut Option<GibbsFamily>, cache: &Cache) -> CliResult<StageOutput> {
    if stage.needs_gibbs() && gibbs.is_none() {
        *gibbs = Some(stages::gibbs(cfg, cache)?);
    }
    let g = gibbs.as_ref();
    match stage {
        Stage::Pairing => stages::pairing(cfg),
        Stage::SCheck => stages::s_check(cfg),
        Stage::Rpf => stages::rpf(cfg, g.unwrap()),
        Stage::Cones => stages::cones(cfg, g.unwrap()),
        Stage::Spectral => stages::spectral(cfg, g.unwrap(), cache),
        Stage::Simulate => stages::limit_tests(cfg, g.unwrap()),
    }
}

/// Run `stages` (in dependency order, duplicates ignored) and write their
/// artifacts plus `summary.json`/`checks.csv` to `cfg.output.dir`.
///
/// The first stage with a failed check or a numeric error halts the run;
/// its report is the last one in the summary. An empty stage list only
/// validates the configuration. Invalid configurations are `Err`.
pub fn run_pipeline(cfg: &RunConfig, stages: &[Stage], force: bool) -> CliResult<PipelineOutcome> {
    cfg.validate()?;
    let mut order = stages.to_vec();
    order.sort();
    order.dedup();
    let out = cfg.output.dir.as_path();
    ensure_dir(out)?;
    let cache = Cache::new(out, force);
    let mut gibbs = None;
    let mut reports = Vec::new();
    let (mut computed, mut cached) = (Vec::new(), Vec::new());
    let mut exit_code = 0;

    for stage in order {
        let key = cache_key(stage.name(), &stage_inputs(cfg, stage)?);
        let result = match cache.load::<StageOutput>(&key) {
            Some(o) => {
                cached.push(stage);
                Ok(o)
            }
            None => {
                computed.push(stage);
                compute(cfg, stage, &mut gibbs, &cache).and_then(|o| cache.store(&key, &o).map(|_| o))
            }
        };
        match result {
            Ok(o) => {
                write_stage_files(out, &o)?;
                let passed = o.report.passed();
                reports.push(o.report);
                if !passed {
                    exit_code = 2;
                    break;
                }
            }
            Err(CliError::Numeric { stage: s, source }) => {
                let mut r = crate::report::StageReport::new(&s);
                r.error = Some(source.to_string());
                reports.push(r);
                exit_code = 3;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let summary = Summary::new(config_hash(cfg), reports);
    emit_report(out, &summary)?;
    Ok(PipelineOutcome { summary, computed, cached, exit_code })
}
