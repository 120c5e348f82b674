//! Per-episode trajectory CSV: one row per physics substep.

use std::io::{Read, Write};

use airgap_core::agents::TrajectoryRow;
use airgap_core::dynamics::TerminalEvent;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CsvRow {
    t: f64,
    x: f64,
    y: f64,
    yaw: f64,
    vx: f64,
    vy: f64,
    action_id: i64,
    power_w: f64,
    energy_j: f64,
    event: String,
}

fn event_name(e: Option<TerminalEvent>) -> &'static str {
    match e {
        None => "",
        Some(TerminalEvent::Collision) => "collision",
        Some(TerminalEvent::GoalReached) => "goal_reached",
        Some(TerminalEvent::StepBudgetExhausted) => "step_budget_exhausted",
        Some(TerminalEvent::BatteryExhausted) => "battery_exhausted",
    }
}

fn parse_event(s: &str) -> Result<Option<TerminalEvent>, CliError> {
    Ok(match s {
        "" => None,
        "collision" => Some(TerminalEvent::Collision),
        "goal_reached" => Some(TerminalEvent::GoalReached),
        "step_budget_exhausted" => Some(TerminalEvent::StepBudgetExhausted),
        "battery_exhausted" => Some(TerminalEvent::BatteryExhausted),
        other => return Err(CliError::Other(format!("unknown trajectory event {other:?}"))),
    })
}

pub fn write_csv<W: Write>(w: W, rows: &[TrajectoryRow]) -> Result<(), CliError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(CsvRow {
            t: r.t,
            x: r.x,
            y: r.y,
            yaw: r.yaw,
            vx: r.vx,
            vy: r.vy,
            action_id: r.action_id,
            power_w: r.power_w,
            energy_j: r.energy_j,
            event: event_name(r.event).to_string(),
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<TrajectoryRow>, CliError> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize::<CsvRow>()
        .map(|row| {
            let r = row?;
            Ok(TrajectoryRow {
                t: r.t,
                x: r.x,
                y: r.y,
                yaw: r.yaw,
                vx: r.vx,
                vy: r.vy,
                action_id: r.action_id,
                power_w: r.power_w,
                energy_j: r.energy_j,
                event: parse_event(&r.event)?,
            })
        })
        .collect()
}

/// Sum of straight segments between consecutive logged positions.
pub fn path_length(rows: &[TrajectoryRow]) -> f64 {
    rows.windows(2)
        .map(|w| ((w[1].x - w[0].x).powi(2) + (w[1].y - w[0].y).powi(2)).sqrt())
        .sum()
}
