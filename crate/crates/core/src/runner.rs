//! In-process episode loop and the standard word-learning run.

use serde::Serialize;

use crate::agents::{Agent, Associator, AssociatorParams};
use crate::drives::{DriveState, Substance};
use crate::error::Result;
use crate::observation::{Event, ObservationFrame};
use crate::session::{Session, SessionConfig};

/// Counts kept while an episode runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunSummary {
    pub steps: u64,
    pub water_deliveries: u64,
    pub milk_deliveries: u64,
    pub narrations: u64,
    pub cries: u64,
    pub utterances: u64,
    pub words_serviced: u64,
    pub stage: u8,
    pub drives: DriveState,
}

impl RunSummary {
    pub fn deliveries(&self) -> u64 {
        self.water_deliveries + self.milk_deliveries
    }

    fn count(&mut self, obs: &ObservationFrame) {
        for e in &obs.events {
            match e {
                Event::Delivery { substance: Substance::Water } => self.water_deliveries += 1,
                Event::Delivery { substance: Substance::Milk } => self.milk_deliveries += 1,
                Event::NarrationStarted { .. } => self.narrations += 1,
                Event::WordService { .. } => self.words_serviced += 1,
                _ => {}
            }
        }
        self.stage = obs.stage;
        self.drives = obs.intero;
    }

    /// One `key value` pair per line, stable for scripts.
    pub fn lines(&self) -> String {
        format!(
            "steps {}\nstage {}\ndeliveries_water {}\ndeliveries_milk {}\nnarrations {}\ncries {}\nutterances {}\nwords_serviced {}\nthirst {:.6}\nhunger {:.6}\n",
            self.steps,
            self.stage,
            self.water_deliveries,
            self.milk_deliveries,
            self.narrations,
            self.cries,
            self.utterances,
            self.words_serviced,
            self.drives.thirst,
            self.drives.hunger,
        )
    }
}

/// Steps `agent` until `max_steps` or until `stop` says so.
pub fn run_episode<A: Agent + ?Sized>(
    session: &mut Session,
    agent: &mut A,
    max_steps: u64,
    mut stop: impl FnMut(&Session, &RunSummary) -> bool,
) -> Result<RunSummary> {
    let mut summary = RunSummary::default();
    let mut obs = session.observation().clone();
    summary.count(&obs);
    while summary.steps < max_steps && !stop(session, &summary) {
        let action = agent.act(&obs);
        if action.is_cry() {
            summary.cries += 1;
        } else if matches!(action.vocal, crate::observation::Vocal::Speech { .. }) {
            summary.utterances += 1;
        }
        obs = session.step(&action)?;
        summary.steps += 1;
        summary.count(&obs);
    }
    session.finish()?;
    Ok(summary)
}

/// Raises an associator under the given curriculum: from reset until the
/// last stage begins or `max_exposures` deliveries have happened.
pub fn train_associator(config: SessionConfig, max_exposures: u64) -> Result<(Associator, RunSummary)> {
    let mut session = Session::new(config)?;
    let mut agent = Associator::new(AssociatorParams::default(), session.config().codec.clone());
    let last = session.schedule().masks().len() as u8 - 1;
    let summary = run_episode(&mut session, &mut agent, u64::MAX, |s, sum| {
        s.stage().index >= last || sum.deliveries() >= max_exposures
    })?;
    Ok((agent, summary))
}
