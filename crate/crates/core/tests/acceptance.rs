//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::io::{BufReader, Write};
use std::process::ExitCode;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use cradle::agents::{Agent, RandomGaze, ReflexAgent};
use cradle::caregiver::Mode;
use cradle::curriculum::{stage_masks, ActionChannel};
use cradle::drives::Substance;
use cradle::observation::{reward_like_keys, ActionCommand, Event, ObservationFrame};
use cradle::probes::{preferential_looking, service_word_latency, ProbeSettings};
use cradle::rng::SessionRng;
use cradle::runner::{run_episode, train_associator};
use cradle::sdr::{apply_noise, noise_sweep, overlap, CodecParams, SdrCodebook, SdrFrame};
use cradle::session::protocol::{handle_line, ServerMessage};
use cradle::session::{config_schema, replay, Environment, Recorder, Session, SessionConfig};
use cradle::world::ID_CAREGIVER;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

// ---------------------------------------------------------------- C1

/// Probability that one frame hit by exactly `2` distinct flips still
/// decodes to its own symbol, by enumerating every pair of positions.
/// Ties go to the alphabetically first symbol, as in the decoder.
fn exhaustive_two_flip_accuracy(cb: &SdrCodebook, min_overlap: usize) -> f64 {
    let dim = cb.dimension();
    let entries: Vec<&SdrFrame> = cb.entries().map(|(_, f)| f).collect();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); dim];
    for (s, f) in entries.iter().enumerate() {
        for &b in f.active() {
            members[b as usize].push(s);
        }
    }
    let mut correct = 0u64;
    let mut total = 0u64;
    for (s, f) in entries.iter().enumerate() {
        let base: Vec<i64> = entries.iter().map(|t| overlap(f, t) as i64).collect();
        let mut score = base.clone();
        for i in 0..dim {
            for j in i + 1..dim {
                score.copy_from_slice(&base);
                for p in [i, j] {
                    let d = if f.contains(p as u32) { -1 } else { 1 };
                    for &t in &members[p] {
                        score[t] += d;
                    }
                }
                let own = score[s];
                let wins = own >= min_overlap as i64
                    && score[..s].iter().all(|&x| x < own)
                    && score[s + 1..].iter().all(|&x| x <= own);
                correct += wins as u64;
                total += 1;
            }
        }
    }
    correct as f64 / total as f64
}

fn c1_codec() -> Check {
    const FLIPS: usize = 2;
    const TRIALS: usize = 1000;
    let params = CodecParams::default();
    ensure!(params.dimension == 512 && params.cardinality == 10, "codec constants {params:?}");
    let cb = params.codebook(0).map_err(|e| e.to_string())?;
    for (ch, _) in cb.entries() {
        let text = ch.to_string();
        let s = params.encode(&cb, &text).map_err(|e| e.to_string())?;
        ensure!(cb.decode_stream(&s, params.min_overlap).text() == text, "{ch} does not round-trip");
    }
    let s = params.encode(&cb, "WATER").map_err(|e| e.to_string())?;
    let d = cb.decode_stream(&s, params.min_overlap);
    ensure!(d.words() == ["WATER"], "WATER decodes as {:?}", d.words());

    // Each flip lands on an active bit with probability k/dim.
    let expected_overlap = params.cardinality as f64 - FLIPS as f64 * params.cardinality as f64 / params.dimension as f64;
    ensure!(expected_overlap == 9.9609375, "overlap oracle {expected_overlap}");

    let p = exhaustive_two_flip_accuracy(&cb, params.min_overlap);
    // A symbol survives when at least two of its three frames decode.
    let fps = params.frames_per_symbol as i32;
    let need = fps / 2 + 1;
    let reference: f64 = (need..=fps)
        .map(|k| binom(fps as u64, k as u64) * p.powi(k) * (1.0 - p).powi(fps - k))
        .sum();
    ensure!(reference >= 0.99, "oracle reference {reference}");

    let rows = noise_sweep(&cb, &params, [FLIPS], TRIALS, 0).map_err(|e| e.to_string())?;
    let row = &rows[0];
    ensure!(row.trials == 26 * TRIALS, "trial count {}", row.trials);
    let acc = row.accuracy();
    ensure!(acc >= 0.99, "accuracy {acc} at {FLIPS} flips");
    let sd = (reference * (1.0 - reference) / row.trials as f64).sqrt();
    ensure!((acc - reference).abs() <= 4.0 * sd + 1e-12, "accuracy {acc} far from oracle {reference}");
    // Lost bits per frame are close to Binomial(flips, k/dim).
    let q = params.cardinality as f64 / params.dimension as f64;
    let frames = (row.trials * params.frames_per_symbol) as f64;
    let overlap_sd = (FLIPS as f64 * q * (1.0 - q) / frames).sqrt();
    ensure!(
        (row.mean_overlap - expected_overlap).abs() <= 5.0 * overlap_sd,
        "mean overlap {} vs oracle {expected_overlap}",
        row.mean_overlap
    );

    // The empirical noise model matches the oracle's assumption directly.
    let mut rng = SessionRng::seed_from_u64(1);
    let (_, f) = cb.entries().next().unwrap();
    let n = apply_noise(f, FLIPS, params.dimension, &mut rng);
    ensure!(f.active().iter().filter(|b| !n.contains(**b)).count() <= FLIPS, "flip model");

    Ok(format!(
        "accuracy {acc:.5} (oracle {reference:.5}, frame {p:.6}), mean overlap {:.4} (oracle {expected_overlap})",
        row.mean_overlap
    ))
}

fn binom(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

// ---------------------------------------------------------------- C2

#[derive(Clone, Default)]
struct Buf(Arc<Mutex<Vec<u8>>>);

impl Write for Buf {
    fn write(&mut self, b: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(b);
        Ok(b.len())
    }
    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

fn record_episode(seed: u64, steps: u64) -> cradle::Result<Vec<u8>> {
    let buf = Buf::default();
    let mut s = Session::with_recorder(SessionConfig::with_seed(seed), Some(Recorder::new(buf.clone())))?;
    run_episode(&mut s, &mut ReflexAgent::default(), steps, |_, _| false)?;
    drop(s);
    let bytes = buf.0.lock().unwrap().clone();
    Ok(bytes)
}

fn c2_determinism() -> Check {
    let mut total = 0;
    for seed in [0, 1, 2] {
        let a = record_episode(seed, 10_000).map_err(|e| e.to_string())?;
        let b = record_episode(seed, 10_000).map_err(|e| e.to_string())?;
        ensure!(a == b, "seed {seed}: logs differ");
        let report = replay(BufReader::new(a.as_slice())).map_err(|e| e.to_string())?;
        ensure!(report.entries == 10_001, "seed {seed}: {} entries", report.entries);
        ensure!(report.verified(), "seed {seed}: {:?}", report.divergence);
        total += a.len();
    }
    Ok(format!("3 x 10000 steps, {} MB logged, zero divergences", total / 1_000_000))
}

// ---------------------------------------------------------------- C3

fn c3_water_loop() -> Check {
    let mut s = Session::new(SessionConfig::default()).map_err(|e| e.to_string())?;
    let cry_threshold = s.config().drives.cry_threshold;
    let mut agent = ReflexAgent::default();
    let mut obs = s.observation().clone();
    let mut crossing = None;
    let mut first_cry = None;
    let mut distance = 0.0;
    let mut delivery = None;
    let mut narration = None;
    let mut feeding = Vec::new();
    let mut prev = obs.intero.thirst;
    while s.t() < 1000 && (delivery.is_none() || narration.is_none() || !feeding_over(&s, &feeding)) {
        if crossing.is_none() && obs.intero.thirst >= cry_threshold && prev < cry_threshold {
            crossing = Some(obs.t);
        }
        prev = obs.intero.thirst;
        let act = agent.act(&obs);
        if act.is_cry() && first_cry.is_none() {
            first_cry = Some(obs.t);
            let w = s.world();
            distance = w.entity(ID_CAREGIVER).unwrap().pos.distance(w.agent_pos());
        }
        obs = s.step(&act).map_err(|e| e.to_string())?;
        for e in &obs.events {
            match e {
                Event::Delivery { substance } if delivery.is_none() => {
                    ensure!(*substance == Substance::Water, "first delivery is {substance:?}");
                    delivery = Some(obs.t);
                }
                Event::NarrationStarted { word } if narration.is_none() && word == "WATER" => {
                    narration = Some(obs.t);
                }
                _ => {}
            }
        }
        if matches!(s.caregiver().mode, Mode::Feeding { .. }) {
            feeding.push(obs.intero.thirst);
        }
    }
    let crossing = crossing.ok_or("thirst never crossed the threshold")?;
    ensure!(crossing.abs_diff(600) <= 1, "crossing at {crossing}");
    let cry = first_cry.ok_or("no cry")?;
    ensure!(cry == crossing, "cry at {cry}, crossing at {crossing}");
    let delivery = delivery.ok_or("no delivery")?;
    let bound = (distance / 0.1).ceil() as u64 + 10;
    ensure!(delivery - cry <= bound, "delivery {} steps after cry, bound {bound}", delivery - cry);
    ensure!(feeding.len() >= 2, "feeding lasted {} steps", feeding.len());
    ensure!(feeding.windows(2).all(|w| w[1] < w[0]), "thirst rose during feeding");
    let narration = narration.ok_or("no WATER narration")?;
    ensure!(narration >= delivery && narration - delivery <= 5, "narration at {narration}, delivery at {delivery}");
    Ok(format!(
        "crossing/cry t={cry}, delivery +{} (bound {bound}), narration +{}, {} feeding steps",
        delivery - cry,
        narration - delivery,
        feeding.len()
    ))
}

fn feeding_over(s: &Session, feeding: &[f64]) -> bool {
    !feeding.is_empty() && !matches!(s.caregiver().mode, Mode::Feeding { .. })
}

// ---------------------------------------------------------------- C4

fn c4_wada() -> Check {
    const MAX_EXPOSURES: u64 = 50;
    let mut passed = 0;
    let mut notes = Vec::new();
    for seed in 0..10u64 {
        let (mut agent, summary) =
            train_associator(SessionConfig::with_seed(seed), MAX_EXPOSURES).map_err(|e| e.to_string())?;
        ensure!(summary.deliveries() <= MAX_EXPOSURES, "seed {seed}: {} exposures", summary.deliveries());
        let settings = ProbeSettings {
            seed,
            thirst: 0.65,
            ..Default::default()
        };
        let out = service_word_latency(&mut agent, "WATER", None, seed, &settings).map_err(|e| e.to_string())?;
        let ok = out.latency.is_some() && !out.cried && out.serviced.iter().any(|w| w == "WATER");
        passed += ok as u32;
        notes.push(format!("{seed}:{}", if ok { "ok" } else { "miss" }));
    }
    ensure!(passed >= 8, "{passed}/10 seeds serviced by speech [{}]", notes.join(" "));
    Ok(format!("{passed}/10 seeds served water on speech without crying"))
}

// ---------------------------------------------------------------- C5

/// One event of every kind. The match makes a new variant a compile error
/// here until it is added.
fn every_event() -> Vec<Event> {
    let all = vec![
        Event::StageChanged { stage: 1 },
        Event::CaregiverMode {
            from: "idle".into(),
            to: "approach".into(),
        },
        Event::Delivery {
            substance: Substance::Water,
        },
        Event::NarrationStarted { word: "WATER".into() },
        Event::WordService {
            word: "WATER".into(),
            overlap: 9.0,
        },
        Event::WordHeard {
            word: "BALL".into(),
            overlap: 8.5,
        },
        Event::IntroStarted { object: "BALL".into() },
        Event::FeedingEnded { timeout: false },
        Event::ActionGated {
            channels: vec!["speech".into()],
        },
        Event::ActionClamped,
        Event::SpeechDropped,
        Event::StaleCommand { entity: 9 },
    ];
    for e in &all {
        match e {
            Event::StageChanged { .. }
            | Event::CaregiverMode { .. }
            | Event::Delivery { .. }
            | Event::NarrationStarted { .. }
            | Event::WordService { .. }
            | Event::WordHeard { .. }
            | Event::IntroStarted { .. }
            | Event::FeedingEnded { .. }
            | Event::ActionGated { .. }
            | Event::ActionClamped
            | Event::SpeechDropped
            | Event::StaleCommand { .. } => {}
        }
    }
    all
}

fn c5_no_reward() -> Check {
    let mut frame = ObservationFrame::blank(0);
    frame.events = every_event();
    let v = serde_json::to_value(&frame).map_err(|e| e.to_string())?;
    let bad = reward_like_keys(&v);
    ensure!(bad.is_empty(), "observation fields {bad:?}");
    let msg = serde_json::from_str(&ServerMessage::Obs { observation: frame }.to_line()).map_err(|e| e.to_string())?;
    let bad = reward_like_keys(&msg);
    ensure!(bad.is_empty(), "obs message fields {bad:?}");

    let schema: serde_json::Value = serde_json::from_str(&config_schema()).map_err(|e| e.to_string())?;
    let bad = reward_like_keys(&schema["properties"]);
    ensure!(bad.is_empty(), "config fields {bad:?}");

    // A live session over the wire, long enough to see every stage.
    let mut env = Environment::default();
    let mut lines = 0;
    let reset = r#"{"type":"reset","config":{"seed":3,"schedule":{"durations":[50,500,500,500,1000]}}}"#;
    let mut replies = handle_line(&mut env, reset).messages;
    let cry = serde_json::to_string(&ActionCommand::cry(1.0)).unwrap();
    let act = format!("{{\"type\":\"act\",\"action\":{cry}}}");
    for _ in 0..2600 {
        replies.extend(handle_line(&mut env, &act).messages);
    }
    for m in replies {
        let v: serde_json::Value = serde_json::from_str(&m.to_line()).map_err(|e| e.to_string())?;
        ensure!(v["type"] == "obs", "unexpected reply {v}");
        let bad = reward_like_keys(&v);
        ensure!(bad.is_empty(), "obs message at t={} has {bad:?}", v["observation"]["t"]);
        lines += 1;
    }
    ensure!(env.session().map(|s| s.stage().index) == Some(4), "live run ended before the last stage");
    Ok(format!("{} event kinds, {lines} live obs messages, config schema clean", every_event().len()))
}

// ---------------------------------------------------------------- C6

fn c6_curriculum() -> Check {
    let masks = stage_masks();
    for (i, w) in masks.windows(2).enumerate() {
        let (a, b) = (&w[0], &w[1]);
        ensure!(a.entity_kinds_present.is_subset(&b.entity_kinds_present), "entity kinds shrink at {i}->{}", i + 1);
        ensure!(a.actions_enabled.is_subset(&b.actions_enabled), "actions shrink at {i}->{}", i + 1);
        ensure!(a.vision <= b.vision, "vision degrades at {i}->{}", i + 1);
        ensure!(a.audio_extra_flips >= b.audio_extra_flips, "audio noise grows at {i}->{}", i + 1);
    }
    let first = &masks[0];
    let last = &masks[masks.len() - 1];
    ensure!(
        first.actions_enabled.len() < last.actions_enabled.len() && last.enabled(ActionChannel::Speech),
        "table never opens speech"
    );
    Ok(format!("{} consecutive stage pairs", masks.len() - 1))
}

// ---------------------------------------------------------------- C7

fn c7_probe() -> Check {
    let settings = ProbeSettings::default();
    let mut random = |seed| Box::new(RandomGaze::new(seed)) as Box<dyn Agent>;
    let base = preferential_looking(&mut random, "WATER", "WATER", "BALL", &settings).map_err(|e| e.to_string())?;
    let r = base.aggregate.ok_or("no random-gaze trials")?;
    ensure!(base.trials.len() == 50, "{} trials", base.trials.len());
    ensure!((r - 0.5).abs() <= 0.1, "random gaze scores {r}");

    let (trained, summary) =
        train_associator(SessionConfig::with_seed(settings.seed), 50).map_err(|e| e.to_string())?;
    ensure!(summary.deliveries() <= 50, "{} exposures", summary.deliveries());
    let mut assoc = |_| Box::new(trained.clone()) as Box<dyn Agent>;
    let rep = preferential_looking(&mut assoc, "WATER", "WATER", "BALL", &settings).map_err(|e| e.to_string())?;
    let a = rep.aggregate.ok_or("no associator trials")?;
    ensure!(a > r, "associator {a} not above random {r}");
    Ok(format!("random gaze {r:.4}, associator {a:.4}"))
}

// ----------------------------------------------------------------

fn main() -> ExitCode {
    let checks: [(&str, fn() -> Check, Duration); 7] = [
        ("C1 codec fidelity", c1_codec, Duration::from_secs(10)),
        ("C2 determinism and replay", c2_determinism, Duration::from_secs(30)),
        ("C3 canonical water loop", c3_water_loop, Duration::MAX),
        ("C4 spoken request loop", c4_wada, Duration::from_secs(120)),
        ("C5 no reward in observations", c5_no_reward, Duration::MAX),
        ("C6 curriculum monotonicity", c6_curriculum, Duration::MAX),
        ("C7 probe sanity", c7_probe, Duration::MAX),
    ];
    let mut failed = 0;
    for (name, check, limit) in checks {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let result = match result {
            Ok(_) if took > limit => Err(format!("took {took:.1?}, limit {limit:?}")),
            r => r,
        };
        match result {
            Ok(detail) => println!("PASS {name}: {detail} [{took:.2?}]"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why} [{took:.2?}]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
