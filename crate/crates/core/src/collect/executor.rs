use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::{Direction, Env, EnvState, Observation, StructuredAction};
use crate::sitegen::{VIEWPORT_H, VIEWPORT_W};
use crate::taskfactory::{step_action, Task};

/// What an executor sees before choosing an action.
pub struct StepContext<'a, 'b> {
    pub env: &'a Env<'b>,
    pub state: &'a EnvState,
    pub observation: &'a Observation,
    pub task: &'a Task,
    pub history: &'a [StructuredAction],
    /// Per-episode stream; executors must draw all randomness from it.
    pub rng: &'a mut ChaCha8Rng,
}

/// Maps (observation, task, history) to the next action.
pub trait Executor: Send + Sync {
    fn name(&self) -> String;
    fn act(&self, ctx: &mut StepContext<'_, '_>) -> StructuredAction;
}

/// Follows the gold path, clicking displayed element centers.
#[derive(Debug, Clone, Copy, Default)]
pub struct Oracle;

impl Executor for Oracle {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn act(&self, ctx: &mut StepContext<'_, '_>) -> StructuredAction {
        ctx.task
            .gold_path
            .get(ctx.history.len())
            .and_then(|step| step_action(ctx.env, ctx.state, step))
            .unwrap_or_else(StructuredAction::wait)
    }
}

/// Oracle whose action is replaced, with probability `p`, by a random
/// non-terminal action.
#[derive(Debug, Clone, Copy)]
pub struct Noisy {
    pub p: f64,
}

impl Noisy {
    pub fn new(p: f64) -> Self {
        Noisy { p: p.clamp(0.0, 1.0) }
    }
}

pub fn random_action(rng: &mut ChaCha8Rng) -> StructuredAction {
    let dir = if rng.gen_bool(0.5) {
        Direction::Up
    } else {
        Direction::Down
    };
    let point = |rng: &mut ChaCha8Rng| {
        (
            f64::from(rng.gen_range(0..VIEWPORT_W)),
            f64::from(rng.gen_range(0..VIEWPORT_H)),
        )
    };
    match rng.gen_range(0..7) {
        0 => {
            let (x, y) = point(rng);
            StructuredAction::click(x, y)
        }
        1 => {
            let (x, y) = point(rng);
            StructuredAction::double_click(x, y)
        }
        2 => StructuredAction::type_text("lorem"),
        3 => StructuredAction::scroll(dir),
        4 => StructuredAction::keypress("ENTER"),
        5 => {
            let (a, b) = (point(rng), point(rng));
            StructuredAction::drag(a, b)
        }
        _ => StructuredAction::wait(),
    }
}

impl Executor for Noisy {
    fn name(&self) -> String {
        format!("noisy({})", self.p)
    }

    fn act(&self, ctx: &mut StepContext<'_, '_>) -> StructuredAction {
        // draw both numbers every step so the stream does not depend on p
        let roll: f64 = ctx.rng.gen();
        let noise = random_action(ctx.rng);
        if roll < self.p {
            noise
        } else {
            Oracle.act(ctx)
        }
    }
}

/// Emits `get_final_answer` with a fixed text on the first step.
#[derive(Debug, Clone, Default)]
pub struct ConstantAnswer(pub String);

impl Executor for ConstantAnswer {
    fn name(&self) -> String {
        format!("answer({:?})", self.0)
    }

    fn act(&self, _ctx: &mut StepContext<'_, '_>) -> StructuredAction {
        StructuredAction::answer(&self.0)
    }
}

/// Replays a fixed action list, then waits.
#[derive(Debug, Clone, Default)]
pub struct Scripted(pub Vec<StructuredAction>);

impl Executor for Scripted {
    fn name(&self) -> String {
        "scripted".into()
    }

    fn act(&self, ctx: &mut StepContext<'_, '_>) -> StructuredAction {
        self.0
            .get(ctx.history.len())
            .cloned()
            .unwrap_or_else(StructuredAction::wait)
    }
}
