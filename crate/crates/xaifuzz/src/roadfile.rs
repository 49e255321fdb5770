//! Plain-text road files and simulation trace CSVs.
//!
//! ```text
//! road 1
//! width 8
//! provenance road_seed=42 index=3
//! point 103.25 9
//! point 101.5 28.9
//! ...
//! ```

use std::fmt::Write as _;

use xaifuzz_core::geom::Vec2;
use xaifuzz_core::road::{Road, RoadError, SimTrace};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RoadFileError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error(transparent)]
    Road(#[from] RoadError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadFile {
    pub road: Road,
    /// Free text recording where the road came from.
    pub provenance: String,
}

pub fn encode(road: &Road, provenance: &str) -> String {
    let mut s = format!("road 1\nwidth {}\n", road.width());
    if !provenance.is_empty() {
        writeln!(s, "provenance {provenance}").unwrap();
    }
    for p in road.control_points() {
        writeln!(s, "point {} {}", p.x, p.y).unwrap();
    }
    s
}

pub fn decode(text: &str) -> Result<RoadFile, RoadFileError> {
    let mut width = None;
    let mut provenance = String::new();
    let mut points = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let bad = |reason: &str| RoadFileError::Syntax {
            line,
            reason: reason.into(),
        };
        let num = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad("bad number"));
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (key, rest) = t.split_once(' ').unwrap_or((t, ""));
        match key {
            "road" if rest == "1" && line == 1 => {}
            _ if line == 1 => return Err(bad("expected `road 1`")),
            "width" => width = Some(num(rest)?),
            "provenance" => provenance = rest.to_string(),
            "point" => {
                let f: Vec<&str> = rest.split_whitespace().collect();
                if f.len() != 2 {
                    return Err(bad("point needs x and y"));
                }
                points.push(Vec2::new(num(f[0])?, num(f[1])?));
            }
            _ => return Err(bad("unknown key")),
        }
    }
    let width = width.ok_or(RoadFileError::Syntax {
        line: 0,
        reason: "missing width".into(),
    })?;
    Ok(RoadFile {
        road: Road::new(points, width)?,
        provenance,
    })
}

pub const TRACE_HEADER: &str = "step,x,y,heading,steering,cte,section,oob";

/// One row per step; `oob` marks the step on which the vehicle left the road.
pub fn trace_csv(trace: &SimTrace) -> String {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    let last = trace.steps.len().saturating_sub(1);
    for (i, st) in trace.steps.iter().enumerate() {
        writeln!(
            s,
            "{i},{},{},{},{},{},{},{}",
            st.pose.position.x,
            st.pose.position.y,
            st.pose.heading,
            st.steering,
            st.cte,
            st.section,
            (trace.oob && i == last) as u8
        )
        .unwrap();
    }
    s
}
