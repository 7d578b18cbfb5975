//! The objective task battery: four utterances, each checked by a pure
//! predicate over the state before, the state after, and the response.

use std::fmt::Write as _;
use std::sync::Arc;

use dawzy_core::engine::{Engine, EngineError, MediaItem, ProjectStateDoc, SourceKind};
use dawzy_core::planner::{OutcomeKind, GLOSSARY};
use dawzy_core::units::UnitRegistry;
use serde::Serialize;

use crate::gateway::{ChatResponse, Gateway, Planner};
use crate::host::Host;
use crate::mcp::Tools;

const DOUBLE_DB: f64 = 6.020599913279624;
const VOLUME_TOLERANCE_DB: f64 = 0.01;
const ATTACK_TOLERANCE_MS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskId {
    FxMulti,
    GuiNav,
    Workflow,
    Education,
}

impl TaskId {
    pub const ALL: [TaskId; 4] = [TaskId::FxMulti, TaskId::GuiNav, TaskId::Workflow, TaskId::Education];

    pub fn name(self) -> &'static str {
        match self {
            TaskId::FxMulti => "fx_multi",
            TaskId::GuiNav => "gui_nav",
            TaskId::Workflow => "workflow",
            TaskId::Education => "education",
        }
    }

    pub fn utterance(self) -> &'static str {
        match self {
            TaskId::FxMulti => "Double the first track's volume, increase the decay, and set the attack to 10 ms",
            TaskId::GuiNav => "Open the FX browser for the first track",
            TaskId::Workflow => "Duplicate the first track, pitch it up one octave, and blend it in at 20%",
            TaskId::Education => "What does attack time do in the second track's compressor?",
        }
    }
}

/// The session every task starts from: "Lead" at 0 dB with a compressor
/// (attack slider at 0.5) and a 4 s MIDI item, and "Bass" with a compressor.
pub fn seed_session(registry: UnitRegistry) -> Result<Engine, EngineError> {
    let mut e = Engine::with_registry(registry.clone());
    e.transact("seed", |e| {
        e.add_track("Lead", None)?;
        e.add_track("Bass", None)?;
        let comp = e.add_fx(0, "ReaComp")?;
        e.set_fx_param_normalized(0, comp, 2, 0.5)?;
        e.add_fx(1, "ReaComp")?;
        e.import_item(0, MediaItem::new(SourceKind::Midi, "midi-lead", 4.0))?;
        Ok::<_, EngineError>(())
    })?;
    let mut doc = e.state_summary();
    doc.revision = 0;
    Engine::from_doc(&doc, registry)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub task: TaskId,
    pub trial: usize,
    pub passed: bool,
    pub detail: String,
    pub kind: Option<OutcomeKind>,
    pub revision_before: u64,
    pub revision_after: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskSummary {
    pub task: TaskId,
    pub passed: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub planner: String,
    pub trials_per_task: usize,
    pub passed: usize,
    pub total: usize,
    pub tasks: Vec<TaskSummary>,
    pub results: Vec<TrialResult>,
}

impl EvalReport {
    pub fn all_passed(&self) -> bool {
        self.passed == self.total
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "planner: {}  trials per task: {}", self.planner, self.trials_per_task);
        let _ = writeln!(out, "{:<10} {:>6} {:>6}  failures", "task", "passed", "trials");
        for t in &self.tasks {
            let failures: Vec<String> = self
                .results
                .iter()
                .filter(|r| r.task == t.task && !r.passed)
                .map(|r| format!("#{}: {}", r.trial, r.detail))
                .collect();
            let _ = writeln!(out, "{:<10} {:>6} {:>6}  {}", t.task.name(), t.passed, t.trials, failures.join("; "));
        }
        let _ = writeln!(out, "total {}/{}", self.passed, self.total);
        out
    }
}

/// Runs every task `trials` times, each on a freshly seeded session.
pub fn run_eval(make_planner: &dyn Fn() -> Box<dyn Planner>, trials: usize, registry: &UnitRegistry) -> EvalReport {
    let mut results = Vec::new();
    let mut planner_name = String::new();
    for task in TaskId::ALL {
        for trial in 1..=trials {
            let planner = make_planner();
            planner_name = planner.name().to_owned();
            results.push(run_trial(task, trial, planner, registry));
        }
    }
    let tasks = TaskId::ALL
        .iter()
        .map(|&task| TaskSummary {
            task,
            passed: results.iter().filter(|r| r.task == task && r.passed).count(),
            trials,
        })
        .collect();
    EvalReport {
        planner: planner_name,
        trials_per_task: trials,
        passed: results.iter().filter(|r| r.passed).count(),
        total: results.len(),
        tasks,
        results,
    }
}

fn run_trial(task: TaskId, trial: usize, planner: Box<dyn Planner>, registry: &UnitRegistry) -> TrialResult {
    let fail = |detail: String| TrialResult {
        task,
        trial,
        passed: false,
        detail,
        kind: None,
        revision_before: 0,
        revision_after: 0,
    };
    let engine = match seed_session(registry.clone()) {
        Ok(e) => e,
        Err(e) => return fail(format!("seeding failed: {e}")),
    };
    let host = Host::new(engine);
    let pre = host.state();
    if pre.revision != 0 {
        return fail(format!("trial started at revision {}", pre.revision));
    }
    let tools = Arc::new(Tools::new(Arc::clone(&host)));
    let gateway = Gateway::new(tools, Arc::clone(&host), planner);
    let response = match gateway.handle_text(&format!("eval-{}-{trial}", task.name()), task.utterance()) {
        Ok(r) => r,
        Err(e) => return fail(e.to_string()),
    };
    let post = host.state();
    let verdict = check(task, &pre, &post, &response);
    TrialResult {
        task,
        trial,
        passed: verdict.is_ok(),
        detail: verdict.err().unwrap_or_default(),
        kind: Some(response.kind),
        revision_before: pre.revision,
        revision_after: post.revision,
    }
}

fn ensure(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

fn param<'a>(doc: &'a ProjectStateDoc, track: usize, name: &str) -> Result<&'a dawzy_core::engine::ParamDoc, String> {
    doc.tracks
        .get(track)
        .and_then(|t| t.fx.first())
        .and_then(|fx| fx.params.iter().find(|p| p.name == name))
        .ok_or_else(|| format!("track {track} has no {name} parameter"))
}

/// The pass/fail predicate of one task.
pub fn check(task: TaskId, pre: &ProjectStateDoc, post: &ProjectStateDoc, r: &ChatResponse) -> Result<(), String> {
    if let Some(e) = &r.error {
        return Err(format!("{}: {}", e.code, e.message));
    }
    match task {
        TaskId::FxMulti => {
            let (v0, v1) = (pre.tracks[0].volume_db, post.tracks.first().map_or(f64::NAN, |t| t.volume_db));
            ensure((v1 - (v0 + DOUBLE_DB)).abs() <= VOLUME_TOLERANCE_DB, || format!("volume {v0} -> {v1} dB"))?;
            let (d0, d1) = (param(pre, 0, "Release")?.normalized, param(post, 0, "Release")?.normalized);
            ensure(d1 > d0, || format!("decay {d0} -> {d1} did not increase"))?;
            let attack = param(post, 0, "Attack")?.human;
            ensure((attack - 10.0).abs() <= ATTACK_TOLERANCE_MS, || format!("attack is {attack} ms"))
        }
        TaskId::GuiNav => {
            ensure(post.revision == pre.revision, || format!("revision moved to {}", post.revision))?;
            ensure(r.ui_hints.len() == 1, || format!("{} ui hints", r.ui_hints.len()))?;
            let h = &r.ui_hints[0];
            ensure(h.hint == "open_fx_browser" && h.track == 0, || format!("hint {} on track {}", h.hint, h.track))
        }
        TaskId::Workflow => {
            ensure(post.tracks.len() == pre.tracks.len() + 1, || format!("{} tracks", post.tracks.len()))?;
            let (src, copy) = (&pre.tracks[0], &post.tracks[1]);
            let (p0, p1) = (
                src.items.first().map_or(f64::NAN, |i| i.pitch_shift_semitones),
                copy.items.first().map_or(f64::NAN, |i| i.pitch_shift_semitones),
            );
            ensure(p1 == p0 + 12.0, || format!("copy pitch {p1} st, source {p0} st"))?;
            let want = src.volume_db + 20.0 * 0.2f64.log10();
            ensure((copy.volume_db - want).abs() <= VOLUME_TOLERANCE_DB, || {
                format!("copy volume {} dB, wanted {want}", copy.volume_db)
            })
        }
        TaskId::Education => {
            ensure(post.revision == pre.revision, || format!("revision moved to {}", post.revision))?;
            ensure(r.kind == OutcomeKind::Answer, || format!("outcome was {:?}", r.kind))?;
            let definition = GLOSSARY.iter().find(|(k, _)| *k == "attack").map_or("", |(_, d)| *d);
            ensure(r.explanation.contains(definition), || "answer lacks the attack definition".to_owned())
        }
    }
}
