//! Flag values that name files or generators.

use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use num_rational::Rational64;

use radiosync::adversary::TopologySpec;
use radiosync::config::{Tick, WakeSpec};
use radiosync::fractional::parse_offset;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WakeArg {
    Uniform,
    Random,
    Clustered,
    Explicit(PathBuf),
}

impl FromStr for WakeArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(WakeArg::Uniform),
            "random" => Ok(WakeArg::Random),
            "clustered" => Ok(WakeArg::Clustered),
            _ => match s.strip_prefix("explicit:") {
                Some(path) if !path.is_empty() => Ok(WakeArg::Explicit(path.into())),
                _ => Err(format!(
                    "expected uniform, random, clustered or explicit:FILE, got {s:?}"
                )),
            },
        }
    }
}

impl WakeArg {
    /// Generator for the integer engine; explicit files are read here.
    pub fn spec(&self) -> Result<WakeSpec> {
        Ok(match self {
            WakeArg::Uniform => WakeSpec::Uniform,
            WakeArg::Random => WakeSpec::Random,
            WakeArg::Clustered => WakeSpec::Clustered,
            WakeArg::Explicit(path) => WakeSpec::Explicit(
                lines(path)?
                    .into_iter()
                    .map(|(no, l)| {
                        l.parse::<Tick>()
                            .with_context(|| format!("{}:{no}: bad wake tick {l:?}", path.display()))
                    })
                    .collect::<Result<_>>()?,
            ),
        })
    }

    /// Rational offsets of an explicit file.
    pub fn rational_file(&self) -> Result<Option<Vec<Rational64>>> {
        let WakeArg::Explicit(path) = self else {
            return Ok(None);
        };
        lines(path)?
            .into_iter()
            .map(|(no, l)| parse_offset(&l).with_context(|| format!("{}:{no}", path.display())))
            .collect::<Result<_>>()
            .map(Some)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TopologyArg {
    Complete,
    TwoClique,
    UnitDiskTwoClique,
    LConnected(usize),
    UnitDisk(PathBuf),
    Edges(PathBuf),
}

impl FromStr for TopologyArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "complete" => return Ok(TopologyArg::Complete),
            "two-clique" => return Ok(TopologyArg::TwoClique),
            "unit-disk-two-clique" => return Ok(TopologyArg::UnitDiskTwoClique),
            _ => {}
        }
        let (kind, value) = s.split_once(':').unwrap_or((s, ""));
        match (kind, value) {
            ("l-connected", l) => l
                .parse()
                .map(TopologyArg::LConnected)
                .map_err(|_| format!("l-connected needs an integer, got {l:?}")),
            ("unit-disk", path) if !path.is_empty() => Ok(TopologyArg::UnitDisk(path.into())),
            ("edges", path) if !path.is_empty() => Ok(TopologyArg::Edges(path.into())),
            _ => Err(format!(
                "expected complete, two-clique, unit-disk-two-clique, l-connected:L, unit-disk:FILE or edges:FILE, got {s:?}"
            )),
        }
    }
}

impl TopologyArg {
    pub fn spec(&self) -> Result<TopologySpec> {
        Ok(match self {
            TopologyArg::Complete => TopologySpec::Complete,
            TopologyArg::TwoClique => TopologySpec::TwoClique,
            TopologyArg::UnitDiskTwoClique => TopologySpec::UnitDiskTwoClique,
            TopologyArg::LConnected(ell) => TopologySpec::LConnected { ell: *ell },
            TopologyArg::UnitDisk(path) => unit_disk(path)?,
            TopologyArg::Edges(path) => TopologySpec::Edges {
                edges: lines(path)?
                    .into_iter()
                    .map(|(no, l)| pair(&l).with_context(|| format!("{}:{no}: expected `u v`", path.display())))
                    .collect::<Result<_>>()?,
            },
        })
    }
}

/// `radius R` on the first line, then one `x y` integer position per line.
fn unit_disk(path: &PathBuf) -> Result<TopologySpec> {
    let mut rows = lines(path)?.into_iter();
    let Some((no, head)) = rows.next() else {
        bail!("{}: empty unit-disk file", path.display());
    };
    let radius = match head.split_whitespace().collect::<Vec<_>>()[..] {
        ["radius", r] => r
            .parse()
            .with_context(|| format!("{}:{no}: bad radius", path.display()))?,
        _ => bail!("{}:{no}: expected `radius R`", path.display()),
    };
    let positions = rows
        .map(|(no, l)| pair(&l).with_context(|| format!("{}:{no}: expected `x y`", path.display())))
        .collect::<Result<_>>()?;
    Ok(TopologySpec::UnitDisk { positions, radius })
}

fn pair<T: FromStr>(line: &str) -> Result<(T, T)> {
    match line.split_whitespace().collect::<Vec<_>>()[..] {
        [a, b] => match (a.parse(), b.parse()) {
            (Ok(a), Ok(b)) => Ok((a, b)),
            _ => bail!("not two integers"),
        },
        _ => bail!("need exactly two fields"),
    }
}

/// Non-empty lines with `#` comments removed, numbered from 1.
fn lines(path: &PathBuf) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim().to_string()))
        .filter(|(_, l)| !l.is_empty())
        .collect())
}
