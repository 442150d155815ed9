"""Microneedle cartridge reload cycle as an explicit finite state machine.

The seven physical reload steps collapse to five machine events::

    ApproachStation       step 1 (approach)   NeedsReload  -> AtStation
    Align                 step 1 (align)      AtStation    -> AtStation | Empty
    Advance               step 2              AtStation    -> Advancing
    MagneticEjectAndSeat  steps 3-6           Advancing    -> Transferring
    Retract               step 7              Transferring -> Retracting

after which the cycle completes (Retracting -> Ready), seating the new
array and drawing it from the cartridge count. ``Consume`` spends the
seated array on a leaf; ``Fault`` is reachable from every live state.
"""

import json
from dataclasses import dataclass, replace

from .errors import ProtocolViolation

READY = "Ready"
NEEDS_RELOAD = "NeedsReload"
AT_STATION = "AtStation"
ADVANCING = "Advancing"
TRANSFERRING = "Transferring"
RETRACTING = "Retracting"
EMPTY = "Empty"
FAULT = "Fault"
STATES = (READY, NEEDS_RELOAD, AT_STATION, ADVANCING, TRANSFERRING, RETRACTING, EMPTY, FAULT)

RELOAD_EVENTS = ("ApproachStation", "Align", "Advance", "MagneticEjectAndSeat", "Retract")
EVENTS = ("Consume", *RELOAD_EVENTS, "Complete", "Fault")
TERMINAL = (EMPTY, FAULT)


@dataclass(frozen=True)
class ReloadState:
    state: str = NEEDS_RELOAD
    arrays_remaining: int = 10
    capacity: int = 10
    loaded: bool = False  # fresh array seated in the end-effector
    spent_seated: bool = False  # used array still held by the end-effector
    aligned: bool = False

    def __post_init__(self):
        if self.state not in STATES:
            raise ValueError(f"unknown state {self.state!r}")
        if not 0 <= self.arrays_remaining <= self.capacity:
            raise ValueError("arrays_remaining must be within [0, capacity]")

    @classmethod
    def full(cls, capacity=10):
        """Fresh cartridge, nothing seated yet."""
        return cls(NEEDS_RELOAD, capacity, capacity)

    @property
    def seated_count(self):
        return int(self.loaded) + int(self.spent_seated)


@dataclass(frozen=True)
class TransferOutcome:
    new_seated: bool
    old_ejected: bool

    @property
    def seated_count(self):
        return int(self.new_seated)


def magnetic_transfer_check(old_seated, new_advanced):
    """Advancing a fresh array repels the spent one out and pulls itself in."""
    if not new_advanced:
        return TransferOutcome(new_seated=False, old_ejected=False)
    return TransferOutcome(new_seated=True, old_ejected=bool(old_seated))


def _require(s, state, event):
    if s.state != state:
        raise ProtocolViolation(f"{event} not allowed in state {s.state}")


def step(s, event):
    """Apply one event; raises ``ProtocolViolation`` if it is not enabled."""
    if event == "Fault":
        if s.state in TERMINAL:
            raise ProtocolViolation(f"Fault not allowed in state {s.state}")
        return replace(s, state=FAULT)
    if event == "Consume":
        _require(s, READY, event)
        if not s.loaded:
            raise ProtocolViolation("Consume with no array loaded")
        return replace(s, state=NEEDS_RELOAD, loaded=False, spent_seated=True)
    if event == "ApproachStation":
        _require(s, NEEDS_RELOAD, event)
        return replace(s, state=AT_STATION, aligned=False)
    if event == "Align":
        _require(s, AT_STATION, event)
        if s.aligned:
            raise ProtocolViolation("Align issued twice")
        if s.arrays_remaining == 0:
            return replace(s, state=EMPTY, aligned=True)
        return replace(s, aligned=True)
    if event == "Advance":
        _require(s, AT_STATION, event)
        if not s.aligned:
            raise ProtocolViolation("Advance before Align")
        return replace(s, state=ADVANCING)
    if event == "MagneticEjectAndSeat":
        _require(s, ADVANCING, event)
        out = magnetic_transfer_check(s.spent_seated, new_advanced=True)
        return replace(s, state=TRANSFERRING, spent_seated=s.spent_seated and not out.old_ejected)
    if event == "Retract":
        _require(s, TRANSFERRING, event)
        return replace(s, state=RETRACTING, loaded=True)
    if event == "Complete":
        _require(s, RETRACTING, event)
        return replace(s, state=READY, arrays_remaining=s.arrays_remaining - 1, aligned=False)
    raise ProtocolViolation(f"unknown event {event!r}")


def _record(t, event, before, after):
    return {
        "t": t,
        "event": event,
        "state_from": before.state,
        "state_to": after.state,
        "arrays_remaining": after.arrays_remaining,
    }


def consume_array(s):
    return step(s, "Consume")


def run_reload_cycle(s, t0=0):
    """Drive a full reload from ``NeedsReload``.

    Returns ``(state, events)``; ``events`` has one record per protocol event
    with ``t`` a logical step counter starting at ``t0``. An empty cartridge
    stops the cycle at ``Align``.
    """
    _require(s, NEEDS_RELOAD, "reload")
    events = []
    for k, event in enumerate(RELOAD_EVENTS):
        nxt = step(s, event)
        events.append(_record(t0 + k, event, s, nxt))
        s = nxt
        if s.state == EMPTY:
            return s, events
    return step(s, "Complete"), events


def write_event_log(path, events):
    with open(path, "w", encoding="utf-8") as fh:
        for e in events:
            fh.write(json.dumps(e, sort_keys=True) + "\n")


def reachable_graph(initial):
    """Exhaustive forward search: ``(states, edges)`` with edges
    ``(src, event, dst)`` over every enabled transition."""
    seen = {initial}
    frontier = [initial]
    edges = []
    while frontier:
        s = frontier.pop()
        for event in EVENTS:
            try:
                nxt = step(s, event)
            except ProtocolViolation:
                continue
            edges.append((s, event, nxt))
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return seen, edges
