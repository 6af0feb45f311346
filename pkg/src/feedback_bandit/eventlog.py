"""Line-delimited feedback logs: parsing, canonical writing, replay input.

One JSON object per line, UTF-8:

    {"t": 3, "kind": "own_post", "topic": 1, "labels": {"0": 1, "2": 0}}
    {"t": 3, "kind": "external", "topic": 0, "labels": {"1": 1}}

Timestamps must be nondecreasing down the file. An "external" record carries
exactly one follower label. Follower ids are dense integers serialized as
JSON object keys.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

OWN_POST = "own_post"
EXTERNAL = "external"


class EventLogError(ValueError):
    """Malformed or mis-ordered event-log content, with a line number."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


@dataclass(frozen=True)
class Event:
    t: int
    kind: str
    topic: int
    labels: dict[int, int]


@dataclass(frozen=True)
class FeedbackLog:
    """Time-ordered events for one user; dimensions inferred when omitted."""

    events: tuple[Event, ...]
    n_topics: int = None
    n_followers: int = None

    def __post_init__(self):
        events = tuple(self.events)
        object.__setattr__(self, "events", events)
        max_topic = max((e.topic for e in events), default=-1)
        max_follower = max((v for e in events for v in e.labels), default=-1)
        if self.n_topics is None:
            object.__setattr__(self, "n_topics", max_topic + 1)
        elif self.n_topics <= max_topic:
            raise ValueError("n_topics smaller than a recorded topic id")
        if self.n_followers is None:
            object.__setattr__(self, "n_followers", max_follower + 1)
        elif self.n_followers <= max_follower:
            raise ValueError("n_followers smaller than a recorded follower id")

    @property
    def own_posts(self) -> list[Event]:
        return [e for e in self.events if e.kind == OWN_POST]


def _parse_line(line_no: int, raw: str) -> Event:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise EventLogError(line_no, f"invalid JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise EventLogError(line_no, "record must be a JSON object")
    for key in ("t", "kind", "topic", "labels"):
        if key not in obj:
            raise EventLogError(line_no, f"missing field {key!r}")
    t, kind, topic, labels = obj["t"], obj["kind"], obj["topic"], obj["labels"]
    if not isinstance(t, int) or t < 0:
        raise EventLogError(line_no, "t must be a nonnegative integer")
    if kind not in (OWN_POST, EXTERNAL):
        raise EventLogError(line_no, f"kind must be {OWN_POST!r} or {EXTERNAL!r}")
    if not isinstance(topic, int) or topic < 0:
        raise EventLogError(line_no, "topic must be a nonnegative integer")
    if not isinstance(labels, dict):
        raise EventLogError(line_no, "labels must be an object")
    parsed = {}
    for key, value in labels.items():
        try:
            follower = int(key)
        except ValueError:
            raise EventLogError(line_no, f"follower id {key!r} is not an integer") from None
        if follower < 0:
            raise EventLogError(line_no, "follower ids must be nonnegative")
        if value not in (0, 1):
            raise EventLogError(line_no, f"label for follower {key} must be 0 or 1")
        parsed[follower] = int(value)
    if kind == EXTERNAL and len(parsed) != 1:
        raise EventLogError(line_no, "external records carry exactly one follower label")
    return Event(t, kind, topic, parsed)


def parse_event_log(path, n_topics: int | None = None, n_followers: int | None = None) -> FeedbackLog:
    """Parse a JSONL feedback log, enforcing schema and time order."""
    events = []
    last_t = -1
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            event = _parse_line(line_no, raw)
            if event.t < last_t:
                raise EventLogError(
                    line_no, f"timestamps must be nondecreasing (t={event.t} after t={last_t})"
                )
            last_t = event.t
            events.append(event)
    return FeedbackLog(tuple(events), n_topics, n_followers)


def event_to_json(event: Event) -> str:
    labels = {str(v): event.labels[v] for v in sorted(event.labels)}
    return json.dumps(
        {"t": event.t, "kind": event.kind, "topic": event.topic, "labels": labels}
    )


def write_event_log(log: FeedbackLog, path) -> None:
    """Write canonical JSONL; parse followed by write is byte-stable."""
    with open(path, "w", encoding="utf-8") as fh:
        for event in log.events:
            fh.write(event_to_json(event) + "\n")


def from_trajectory(trajectory, n_topics: int | None = None) -> FeedbackLog:
    """Convert a simulated trajectory into a feedback log.

    Step t's own post and its external exposures share timestamp t; the
    own-post record comes first.
    """
    topics = trajectory.topics
    own = trajectory.own_feedback
    n_followers = own.shape[1] if own.ndim == 2 else 0
    if n_topics is None:
        n_topics = int(topics.max()) + 1 if topics.size else 0
    events = []
    ext_by_step: dict[int, list[int]] = {}
    for idx, t in enumerate(trajectory.external_step.tolist()):
        ext_by_step.setdefault(t, []).append(idx)
    for t in range(trajectory.horizon):
        labels = {v: int(own[t, v]) for v in range(n_followers)}
        events.append(Event(int(t), OWN_POST, int(topics[t]), labels))
        for idx in ext_by_step.get(t, ()):
            events.append(
                Event(
                    int(t),
                    EXTERNAL,
                    int(trajectory.external_topic[idx]),
                    {int(trajectory.external_follower[idx]): int(trajectory.external_label[idx])},
                )
            )
    return FeedbackLog(tuple(events), n_topics, n_followers)
