"""Exception hierarchy shared by every stage of the pipeline.

Each class carries a stable ``exit_code`` so the CLI can map failures to
process exit statuses without a lookup table scattered across modules.
"""


class LeafGraspError(Exception):
    exit_code = 1
    kind = "error"

    def to_record(self):
        return {"kind": self.kind, "exit_code": self.exit_code, "message": str(self)}


class InputError(LeafGraspError, ValueError):
    """Malformed, missing or inconsistent input data."""

    exit_code = 2
    kind = "input_error"


class DegeneratePatchError(LeafGraspError, ValueError):
    """Point set too small or rank deficient for a plane fit."""

    exit_code = 2
    kind = "degenerate_patch"


class NoViableLeafError(LeafGraspError):
    exit_code = 3
    kind = "no_viable_leaf"


class NoGraspablePointError(LeafGraspError):
    exit_code = 4
    kind = "no_graspable_point"


class WorkspaceError(LeafGraspError):
    """A target lies outside the gantry travel on ``axis``."""

    exit_code = 5
    kind = "workspace_error"

    def __init__(self, axis, value, bounds):
        self.axis = axis
        self.value = float(value)
        self.bounds = (float(bounds[0]), float(bounds[1]))
        super().__init__(
            f"{axis} = {self.value:.4f} outside travel "
            f"[{self.bounds[0]:.4f}, {self.bounds[1]:.4f}]"
        )

    def to_record(self):
        rec = super().to_record()
        rec.update(axis=self.axis, value=self.value, bounds=list(self.bounds))
        return rec


class PlanningError(LeafGraspError):
    """No collision-free path found (or endpoints invalid)."""

    exit_code = 6
    kind = "planning_failure"


class ProtocolViolation(LeafGraspError):
    """Reload state machine event issued in the wrong state."""

    exit_code = 7
    kind = "protocol_violation"
