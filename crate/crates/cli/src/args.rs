use std::net::SocketAddr;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tofcorr::io::ViewKind;
use tofcorr::{RectRegion, Relation, TagObservation};

/// Tag-based flare correction for Time-of-Flight depth images.
///
/// Exit codes: 0 success, 1 file error, 2 invalid arguments or input,
/// 3 correction refused by the plausibility gate, 4 tags carry no usable
/// distortion (already consistent or degenerate geometry).
#[derive(Debug, Parser)]
#[command(name = "tofcorr", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a JSON scene into a perturbed capture and its ground truth.
    Simulate(SimulateArgs),
    /// Estimate the perturbing vector from one or two tags and subtract it.
    Correct(CorrectArgs),
    /// Write the mask of pixels closer or farther than a threshold.
    Segment(SegmentArgs),
    /// Print region means and tag distances in millimeters.
    Stats(StatsArgs),
    /// Depth RMSE and maximum error between two captures.
    Diff(DiffArgs),
    /// Write a distance or amplitude view as a 16-bit graymap.
    Export(ExportArgs),
    /// Run the local HTTP session service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CaptureKind {
    Vector,
    Polar,
    Raw,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth polar image.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Overrides the scene's noise seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "vector")]
    pub kind: CaptureKind,
}

/// One tag zone: `row,col,rows,cols`, optionally prefixed `W:` or `B:`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Zone {
    pub white: Option<bool>,
    pub rect: RectRegion,
}

impl FromStr for Zone {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (white, rest) = match s.split_once(':') {
            Some((p, rest)) if p.eq_ignore_ascii_case("w") => (Some(true), rest),
            Some((p, rest)) if p.eq_ignore_ascii_case("b") => (Some(false), rest),
            Some((p, _)) => return Err(format!("unknown zone prefix '{p}', expected W or B")),
            None => (None, s),
        };
        let rect = rest
            .parse()
            .map_err(|e: tofcorr::CorrectionError| e.to_string())?;
        Ok(Zone { white, rect })
    }
}

/// White and black zones in either order; unprefixed zones are taken as white then black.
pub fn tag_from_zones(zones: &[Zone], label: String) -> Result<TagObservation, String> {
    let [a, b] = zones else {
        return Err(format!("{label}: expected a white and a black rectangle"));
    };
    let (white, black) = match (a.white, b.white) {
        (Some(false), _) | (_, Some(true)) => (b, a),
        _ => (a, b),
    };
    if white.white == Some(false) || black.white == Some(true) {
        return Err(format!("{label}: both rectangles marked the same color"));
    }
    TagObservation::new(white.rect, black.rect, label).map_err(|e| e.to_string())
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() && x > 0.0 => Ok(x),
        _ => Err(format!("'{s}' is not a positive number")),
    }
}

#[derive(Debug, Args)]
pub struct CorrectArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Tag as white and black rectangles; repeat once for a second tag.
    #[arg(long, num_args = 2, value_names = ["WHITE", "BLACK"], required = true)]
    pub tag: Vec<Zone>,
    /// Second tag at a different distance, for two-tag correction.
    #[arg(long, num_args = 2, value_names = ["WHITE", "BLACK"])]
    pub tag2: Option<Vec<Zone>>,
    /// Largest allowed |correction| relative to the mean amplitude.
    #[arg(long, default_value = "0.5", value_parser = positive)]
    pub ratio: f64,
    /// Apply even when the plausibility gate refuses.
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    /// Correct only pixels on one side of this distance.
    #[arg(long)]
    pub segment_mm: Option<f64>,
    #[arg(long, default_value = "closer-than", requires = "segment_mm")]
    pub relation: Relation,
}

impl CorrectArgs {
    pub fn tags(&self) -> Result<Vec<TagObservation>, String> {
        let groups: Vec<&[Zone]> = self.tag.chunks(2).chain(self.tag2.as_deref()).collect();
        if groups.len() > 2 {
            return Err(format!("at most two tags, got {}", groups.len()));
        }
        groups
            .iter()
            .enumerate()
            .map(|(i, z)| tag_from_zones(z, tofcorr_service::default_tag_label(i)))
            .collect()
    }
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub threshold_mm: f64,
    #[arg(long, default_value = "closer-than")]
    pub relation: Relation,
    /// Mask graymap: 65535 inside the segment, 0 elsewhere.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub region: Vec<RectRegion>,
    #[arg(long, num_args = 2, value_names = ["WHITE", "BLACK"])]
    pub tag: Vec<Zone>,
    /// Print the unrounded values as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct DiffArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value = "distance")]
    pub kind: ViewKind,
    /// Value mapped to black (mm for distance).
    #[arg(long, allow_negative_numbers = true)]
    pub min: Option<f64>,
    /// Value mapped to white (mm for distance).
    #[arg(long, allow_negative_numbers = true)]
    pub max: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = tofcorr_service::DEFAULT_BIND)]
    pub bind: SocketAddr,
    /// Idle seconds before a session is dropped.
    #[arg(long, default_value_t = tofcorr_service::DEFAULT_TTL.as_secs())]
    pub ttl: u64,
}
