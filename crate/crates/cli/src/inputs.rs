//! Parsing of command-line inputs: pole regions, systems, ranges, and
//! method names.
//!
//! Regions accept three spellings: the shorthands `disk:R` and
//! `interval:A:B`, inline JSON (anything starting with `{`), or a path to a
//! JSON file. Systems accept the built-in tags `benchmark`,
//! `benchmark:SEED`, and `diffusion`, or a path to a JSON file holding
//! either a partial-fraction transfer function or a state-space model.

use std::fs;

use clap::ValueEnum;
use obf_ident::benchmarks::{
    benchmark_tf, benchmark_tf_nominal, build_diffusion_system, DiffusionConfig,
};
use obf_ident::error::{Error, Result};
use obf_ident::lti::{pf_to_ss, ss_to_pf, PartialFractionTF, StateSpaceModel};
use obf_ident::PoleRegion;

/// Basis-pole selection strategies exposed on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    /// Coordinate ascent on the pairwise hyperbolic spread.
    Tsuji,
    /// The annulus-equispaced starting configuration, unoptimized.
    TsujiInit,
    /// Multi-start Nelder-Mead on the boundary worst case.
    Minimax,
    /// Independent uniform draws from the region.
    Random,
}

impl MethodArg {
    pub const ALL: [MethodArg; 4] = [
        MethodArg::Tsuji,
        MethodArg::TsujiInit,
        MethodArg::Minimax,
        MethodArg::Random,
    ];

    /// Name used in CSV cells and spec hashes.
    pub fn label(self) -> &'static str {
        match self {
            MethodArg::Tsuji => "tsuji",
            MethodArg::TsujiInit => "tsuji-init",
            MethodArg::Minimax => "minimax",
            MethodArg::Random => "random",
        }
    }
}

/// Parses a region argument in any of its accepted spellings.
pub fn parse_region(text: &str) -> Result<PoleRegion> {
    let trimmed = text.trim();
    if trimmed.starts_with('{') {
        return serde_json::from_str(trimmed)
            .map_err(|e| Error::Domain(format!("region JSON does not parse: {e}")));
    }
    if let Some(rest) = trimmed.strip_prefix("disk:") {
        let rho: f64 = rest
            .parse()
            .map_err(|_| Error::Domain(format!("disk radius {rest:?} is not a number")))?;
        return PoleRegion::disk(rho);
    }
    if let Some(rest) = trimmed.strip_prefix("interval:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 2 {
            return Err(Error::Domain(format!(
                "interval shorthand needs the form interval:A:B, got {trimmed:?}"
            )));
        }
        let a: f64 = parts[0]
            .parse()
            .map_err(|_| Error::Domain(format!("interval endpoint {:?} is not a number", parts[0])))?;
        let b: f64 = parts[1]
            .parse()
            .map_err(|_| Error::Domain(format!("interval endpoint {:?} is not a number", parts[1])))?;
        return PoleRegion::interval(a, b);
    }
    let raw = fs::read_to_string(trimmed)
        .map_err(|e| Error::Domain(format!("cannot read region file {trimmed:?}: {e}")))?;
    serde_json::from_str(&raw)
        .map_err(|e| Error::Domain(format!("region file {trimmed:?} does not parse: {e}")))
}

/// A system loaded from a tag or file, in whichever form it came in.
pub enum SystemSource {
    Tf(PartialFractionTF),
    Ss(StateSpaceModel),
}

impl SystemSource {
    pub fn to_tf(&self) -> Result<PartialFractionTF> {
        match self {
            SystemSource::Tf(tf) => Ok(tf.clone()),
            SystemSource::Ss(ss) => ss_to_pf(ss),
        }
    }

    pub fn to_ss(&self) -> Result<StateSpaceModel> {
        match self {
            SystemSource::Tf(tf) => pf_to_ss(tf),
            SystemSource::Ss(ss) => Ok(ss.clone()),
        }
    }
}

/// Resolves a system argument: a built-in tag or a JSON file.
pub fn load_system(tag: &str) -> Result<SystemSource> {
    let trimmed = tag.trim();
    if trimmed == "benchmark" {
        return benchmark_tf_nominal().map(SystemSource::Tf);
    }
    if let Some(rest) = trimmed.strip_prefix("benchmark:") {
        let seed: u64 = rest
            .parse()
            .map_err(|_| Error::Domain(format!("benchmark seed {rest:?} is not an integer")))?;
        return benchmark_tf(seed).map(SystemSource::Tf);
    }
    if trimmed == "diffusion" {
        return build_diffusion_system(&DiffusionConfig::default()).map(SystemSource::Ss);
    }
    let raw = fs::read_to_string(trimmed)
        .map_err(|e| Error::Domain(format!("cannot read system file {trimmed:?}: {e}")))?;
    if let Ok(tf) = serde_json::from_str::<PartialFractionTF>(&raw) {
        tf.validate()?;
        return Ok(SystemSource::Tf(tf));
    }
    match serde_json::from_str::<StateSpaceModel>(&raw) {
        Ok(ss) => {
            ss.validate()?;
            Ok(SystemSource::Ss(ss))
        }
        Err(e) => Err(Error::Domain(format!(
            "system file {trimmed:?} is neither a partial-fraction nor a state-space model: {e}"
        ))),
    }
}

/// Loads a diffusion configuration file, or the built-in default.
pub fn load_diffusion_config(path: Option<&str>) -> Result<DiffusionConfig> {
    let cfg = match path {
        None => DiffusionConfig::default(),
        Some(p) => {
            let raw = fs::read_to_string(p)
                .map_err(|e| Error::Domain(format!("cannot read config file {p:?}: {e}")))?;
            serde_json::from_str(&raw)
                .map_err(|e| Error::Domain(format!("config file {p:?} does not parse: {e}")))?
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Parses an inclusive `LO:HI` range of orders.
pub fn parse_range(text: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = text.trim().split(':').collect();
    if parts.len() != 2 {
        return Err(Error::Domain(format!(
            "range needs the form LO:HI, got {text:?}"
        )));
    }
    let lo: usize = parts[0]
        .parse()
        .map_err(|_| Error::Domain(format!("range bound {:?} is not an integer", parts[0])))?;
    let hi: usize = parts[1]
        .parse()
        .map_err(|_| Error::Domain(format!("range bound {:?} is not an integer", parts[1])))?;
    if lo == 0 || hi < lo {
        return Err(Error::Domain(format!(
            "range {text:?} must satisfy 1 <= LO <= HI"
        )));
    }
    Ok((lo, hi))
}

/// Resolves a single order or an order range into the list of orders to run.
pub fn resolve_orders(q: Option<usize>, q_range: Option<&str>) -> Result<Vec<usize>> {
    match (q, q_range) {
        (Some(_), Some(_)) => Err(Error::Arity(
            "give either --q or --q-range, not both".into(),
        )),
        (Some(q), None) => {
            if q == 0 {
                return Err(Error::Arity("need at least one basis pole".into()));
            }
            Ok(vec![q])
        }
        (None, Some(range)) => {
            let (lo, hi) = parse_range(range)?;
            Ok((lo..=hi).collect())
        }
        (None, None) => Err(Error::Arity("need --q or --q-range".into())),
    }
}
