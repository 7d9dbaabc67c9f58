use rand::Rng;

use super::config::{ExecutionConfig, Time};
use crate::types::PartyId;

/// Delivery time for a message sent at `send_time`.
///
/// After GST the delay is drawn from `(0, δ]`. Before GST it is drawn from
/// `(0, gst − send_time + δ]`, so a message may be held until just after
/// GST. A scripted link delay replaces the draw; after GST it is capped at δ.
pub fn delay_model<R: Rng>(
    sender: PartyId,
    receiver: PartyId,
    send_time: Time,
    rng: &mut R,
    config: &ExecutionConfig,
) -> Time {
    let delta = config.timing.delta;
    let post_gst = send_time >= config.gst;
    let scripted = config.link_delays.iter().find(|l| l.from == sender && l.to == receiver).map(|l| l.delay.max(1));
    let delay = match (scripted, post_gst) {
        (Some(d), true) => d.min(delta),
        (Some(d), false) => d,
        (None, true) => rng.gen_range(1..=delta),
        (None, false) => rng.gen_range(1..=config.gst - send_time + delta),
    };
    send_time + delay
}
