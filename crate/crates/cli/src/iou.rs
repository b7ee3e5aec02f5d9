use clap::{ArgGroup, Args};
use rwiou_core::geometry::{mc_iou_oracle, rotated_iou_exact, rwiou};
use rwiou_core::{Alpha, Box3D};

use crate::{emit, parse_alpha, CliResult};

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("mode").args(["exact", "rwiou", "mc"])))]
pub struct IouArgs {
    /// First box: x,y,z,l,w,h,theta
    #[arg(value_parser = parse_box, allow_hyphen_values = true)]
    pub box1: Box3D,
    /// Second box: x,y,z,l,w,h,theta
    #[arg(value_parser = parse_box, allow_hyphen_values = true)]
    pub box2: Box3D,
    /// Rotation weight strength in [0, 1]
    #[arg(long, default_value = "0.5", value_parser = parse_alpha)]
    pub alpha: Alpha,
    /// Exact rotated 3D IoU
    #[arg(long)]
    pub exact: bool,
    /// Rotation-weighted IoU (default)
    #[arg(long)]
    pub rwiou: bool,
    /// Monte-Carlo estimate of the rotated IoU
    #[arg(long)]
    pub mc: bool,
    /// Sample count for --mc
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    /// Seed for --mc
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Parses `x,y,z,l,w,h,theta`, naming the offending field on error.
pub fn parse_box(s: &str) -> Result<Box3D, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != Box3D::FIELDS.len() {
        return Err(format!(
            "expected 7 comma-separated values x,y,z,l,w,h,theta, got {}",
            parts.len()
        ));
    }
    let mut v = [0.0; 7];
    for ((slot, part), field) in v.iter_mut().zip(&parts).zip(Box3D::FIELDS) {
        *slot = part
            .parse()
            .map_err(|_| format!("field `{field}`: `{part}` is not a number"))?;
    }
    Box3D::from_array(v).map_err(|e| e.to_string())
}

pub fn run(a: &IouArgs) -> CliResult {
    let value = if a.exact {
        rotated_iou_exact(&a.box1, &a.box2).value()
    } else if a.mc {
        mc_iou_oracle(&a.box1, &a.box2, a.samples, a.seed)?.iou
    } else {
        rwiou(&a.box1, &a.box2, a.alpha).value()
    };
    emit(&format!("{value:.6}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_names_bad_fields() {
        let b = parse_box("1, -2, 0.5, 4, 2, 1.5, 0.3").unwrap();
        assert_eq!(b.to_array(), [1.0, -2.0, 0.5, 4.0, 2.0, 1.5, 0.3]);
        assert!(parse_box("1,2,3").unwrap_err().contains("got 3"));
        assert!(parse_box("0,0,0,1,abc,1,0").unwrap_err().contains("`w`"));
        assert!(parse_box("0,0,0,1,1,-1,0").unwrap_err().contains("`h`"));
        assert!(parse_box("0,0,0,1,1,1,inf").unwrap_err().contains("`theta`"));
    }
}
