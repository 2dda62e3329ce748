//! V-COCO style per-action AP, scenarios 1 and 2.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{average_precision, match_images, mean, EvalConfig, Protocol};
use crate::assignment::GtInstance;
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::inference::HoiDetection;

/// Handling of ground truths without an object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// The detection must report the all-zero empty box.
    One,
    /// The object box is not checked.
    Two,
}

impl Scenario {
    pub fn number(self) -> u8 {
        match self {
            Scenario::One => 1,
            Scenario::Two => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionAp {
    pub action_class: usize,
    pub n_positives: usize,
    pub ap: f64,
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub actions: Vec<ActionAp>,
    /// Mean over non-excluded actions with at least one positive.
    pub map: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VcocoReport {
    pub scenario_1: ScenarioReport,
    pub scenario_2: ScenarioReport,
}

impl ScenarioReport {
    /// Tab-separated `setting split class ap` lines, mAP first.
    pub fn to_text(&self) -> String {
        let setting = format!("scenario_{}", self.scenario.number());
        let mut s = String::new();
        let m = self.map.map_or("n/a".to_owned(), |v| format!("{v:.6}"));
        let _ = writeln!(s, "{setting}\tall\tmAP\t{m}");
        for a in &self.actions {
            let split = if a.excluded { "excluded" } else { "all" };
            let _ = writeln!(s, "{setting}\t{split}\t{}\t{:.6}", a.action_class, a.ap);
        }
        s
    }
}

/// Per-action APs under one scenario; the object class is not checked.
pub fn eval_vcoco_scenario(
    dets: &[Vec<HoiDetection>],
    gts: &[Vec<GtInstance>],
    n_act: usize,
    cfg: &EvalConfig,
    scenario: Scenario,
    exec: ExecMode,
) -> Result<ScenarioReport> {
    let mut n_pos = vec![0usize; n_act];
    for g in gts.iter().flatten() {
        if g.actions.len() != n_act {
            return Err(Error::shape(format!("{n_act} actions"), g.actions.len()));
        }
        for (a, &on) in g.actions.iter().enumerate() {
            n_pos[a] += on as usize;
        }
    }
    let matched = match_images(dets, gts, cfg, Protocol::Vcoco(scenario), exec)?;
    let mut scored: Vec<Vec<(f64, bool)>> = vec![Vec::new(); n_act];
    for m in &matched {
        for (d, hit) in m.dets.iter().zip(&m.matches) {
            if let Some(s) = scored.get_mut(d.action_class) {
                s.push((d.score, hit.is_some()));
            }
        }
    }
    let actions: Vec<ActionAp> = (0..n_act)
        .map(|a| ActionAp {
            action_class: a,
            n_positives: n_pos[a],
            ap: average_precision(&scored[a], n_pos[a]),
            excluded: cfg.excluded_actions.contains(&a),
        })
        .collect();
    let map = mean(
        actions
            .iter()
            .filter(|a| !a.excluded && a.n_positives > 0)
            .map(|a| a.ap),
    );
    Ok(ScenarioReport { scenario, actions, map })
}

/// Both scenarios.
pub fn eval_vcoco(
    dets: &[Vec<HoiDetection>],
    gts: &[Vec<GtInstance>],
    n_act: usize,
    cfg: &EvalConfig,
    exec: ExecMode,
) -> Result<VcocoReport> {
    Ok(VcocoReport {
        scenario_1: eval_vcoco_scenario(dets, gts, n_act, cfg, Scenario::One, exec)?,
        scenario_2: eval_vcoco_scenario(dets, gts, n_act, cfg, Scenario::Two, exec)?,
    })
}
