use crate::geometry::{forward_kinematics, Pose, Skeleton};
use crate::{Error, Result};
use std::fmt::Write;
use std::path::Path;

/// Orthographic projection plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum View {
    /// x to the right, y up.
    #[default]
    Front,
    /// z to the right, y up.
    Side,
}

const SIZE: f64 = 400.0;
const SCALE: f64 = 180.0;
const PALETTE: [&str; 8] = [
    "#d1495b", "#edae49", "#00798c", "#30638e", "#66a182", "#8d96a3", "#6a4c93", "#1982c4",
];

/// Stick figure: one line per bone, one dot per joint, colored by part.
/// Coordinates are printed with fixed precision, so equal poses give equal bytes.
pub fn render_pose_svg_string(pose: &Pose, skeleton: &Skeleton, view: View) -> Result<String> {
    pose.validate(skeleton)?;
    let positions = forward_kinematics(pose, skeleton)?;
    let project = |p: [f64; 3]| -> (f64, f64) {
        let h = match view {
            View::Front => p[0],
            View::Side => p[2],
        };
        (SIZE / 2.0 + SCALE * h, SIZE / 2.0 - SCALE * p[1])
    };
    let mut svg = String::new();
    let w = |s: &mut String, line: std::fmt::Arguments| s.write_fmt(line).expect("string write");
    w(
        &mut svg,
        format_args!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n"
        ),
    );
    w(&mut svg, format_args!("<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n"));
    for j in 0..skeleton.joint_count() {
        if let Some(parent) = skeleton.parent(j) {
            let (x1, y1) = project(positions[parent]);
            let (x2, y2) = project(positions[j]);
            let color = PALETTE[skeleton.part_of_joint(j) % PALETTE.len()];
            w(
                &mut svg,
                format_args!(
                    "<line class=\"bone\" x1=\"{x1:.3}\" y1=\"{y1:.3}\" x2=\"{x2:.3}\" y2=\"{y2:.3}\" stroke=\"{color}\" stroke-width=\"4\" stroke-linecap=\"round\"/>\n"
                ),
            );
        }
    }
    for (j, p) in positions.iter().enumerate() {
        let (x, y) = project(*p);
        let name = &skeleton.joint_names()[j];
        w(
            &mut svg,
            format_args!("<circle class=\"joint\" cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"3\" fill=\"#222222\"><title>{name}</title></circle>\n"),
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn render_pose_svg(pose: &Pose, skeleton: &Skeleton, path: &Path) -> Result<()> {
    let svg = render_pose_svg_string(pose, skeleton, View::Front)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
