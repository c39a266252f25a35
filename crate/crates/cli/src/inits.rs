//! The `--inits` argument of `census`: a JSON file holding a list of init
//! descriptors, or shorthand terms joined by `+`:
//!
//! * `theorem1:m=10` every deletion mask for the given `m`
//! * `random:n=5,count=10[,seed=S]` random configurations with seeds `S..S+count`
//! * `named:t1,t2,t3` named configurations
//! * `orbit:f5,count=5[,seed=S]` randomly moved and relabeled copies

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use riesz_torus::census::InitDescriptor;
use riesz_torus::factory::{all_masks, NamedConfig};

pub fn parse(spec: &str, default_seed: u64) -> Result<Vec<InitDescriptor>> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {spec}"))?;
        return serde_json::from_str(&text).with_context(|| format!("parsing init list {spec}"));
    }
    let mut out = Vec::new();
    for term in spec.split('+') {
        out.extend(parse_term(term.trim(), default_seed)?);
    }
    if out.is_empty() {
        bail!("no inits in {spec:?}");
    }
    Ok(out)
}

fn parse_term(term: &str, default_seed: u64) -> Result<Vec<InitDescriptor>> {
    let (kind, rest) = term.split_once(':').ok_or_else(|| anyhow!("init term {term:?} needs a kind: prefix"))?;
    let mut names = Vec::new();
    let mut params = BTreeMap::new();
    for item in rest.split(',').filter(|s| !s.is_empty()) {
        match item.split_once('=') {
            Some((k, v)) => {
                let v: u64 = v.parse().with_context(|| format!("bad value in {item:?}"))?;
                params.insert(k.to_string(), v);
            }
            None => names.push(item.to_string()),
        }
    }
    let get = |k: &str| params.get(k).copied().ok_or_else(|| anyhow!("init term {term:?} needs {k}="));
    let seed = params.get("seed").copied().unwrap_or(default_seed);
    let named = |n: &str| NamedConfig::from_name(n).ok_or_else(|| anyhow!("unknown configuration {n:?}"));
    Ok(match kind {
        "theorem1" => {
            let m = get("m")? as usize;
            all_masks(m)?
                .into_iter()
                .map(|mask| InitDescriptor::Theorem1 { m, mask })
                .collect()
        }
        "random" => {
            let n = get("n")? as usize;
            (0..get("count")?)
                .map(|k| InitDescriptor::Random { n, seed: seed + k })
                .collect()
        }
        "named" => names
            .iter()
            .map(|n| Ok(InitDescriptor::Named { config: named(n)? }))
            .collect::<Result<_>>()?,
        "orbit" => {
            let [base] = names.as_slice() else {
                bail!("orbit needs exactly one configuration name");
            };
            let base = InitDescriptor::Named { config: named(base)? };
            (0..get("count")?)
                .map(|k| InitDescriptor::Transformed {
                    base: Box::new(base.clone()),
                    seed: seed + k,
                })
                .collect()
        }
        _ => bail!("unknown init kind {kind:?}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shorthand_terms() {
        assert_eq!(parse("theorem1:m=10", 0).unwrap().len(), 70);
        let v = parse("named:t1,t2+random:n=4,count=2,seed=7", 0).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(v[3], InitDescriptor::Random { n: 4, seed: 8 });
        assert_eq!(parse("orbit:f5,count=5", 3).unwrap().len(), 5);
        assert!(parse("random:n=4", 0).is_err());
        assert!(parse("bogus:x", 0).is_err());
    }
}
