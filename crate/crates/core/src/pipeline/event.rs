use serde::{Deserialize, Serialize};

use super::{Document, ResolutionRecord};

/// Outcome of event geolocation for one document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "record", rename_all = "snake_case")]
pub enum EventLocation {
    /// Index into the record list.
    Located(usize),
    /// No resolved toponym to choose from.
    NoLocation,
    /// The locator cannot run on this document (e.g. no trigger).
    NotApplicable,
}

/// Chooses which resolved toponym an event happened at. A question-answering
/// model can be mounted behind this trait.
pub trait EventLocator: Send + Sync {
    fn locate(&self, doc: &Document, records: &[ResolutionRecord]) -> EventLocation;
}

/// Picks the resolved toponym whose span midpoint is nearest the event
/// trigger's midpoint, earlier span on ties.
#[derive(Debug, Clone, Copy, Default)]
pub struct ProximityLocator;

impl EventLocator for ProximityLocator {
    fn locate(&self, doc: &Document, records: &[ResolutionRecord]) -> EventLocation {
        let Some(trigger) = doc.event_trigger else {
            return EventLocation::NotApplicable;
        };
        let target = trigger.midpoint2();
        records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.predicted.is_some())
            .min_by_key(|(_, r)| (r.span.midpoint2().abs_diff(target), r.span.start))
            .map_or(EventLocation::NoLocation, |(i, _)| EventLocation::Located(i))
    }
}

pub fn locate_event(doc: &Document, records: &[ResolutionRecord], locator: &dyn EventLocator) -> EventLocation {
    locator.locate(doc, records)
}
