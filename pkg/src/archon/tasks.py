from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class PlanTask:
    """A unit of work handed to one session.

    ``scope`` entries are file paths or directory prefixes ending in ``/``.
    ``materials`` are (title, text) pairs placed verbatim in the session's
    opening context; nothing else from earlier sessions is.
    """

    id: str
    targets: tuple[str, ...] = ()
    scope: tuple[str, ...] = ()
    guidance: str = ""
    constraints: str = ""
    budget: int = 4096
    parallel_group: str = ""
    materials: tuple[tuple[str, str], ...] = ()

    def match_keys(self) -> set[str]:
        return {self.id, *self.targets, *self.scope}

    def to_json(self) -> dict:
        d = asdict(self)
        d["materials"] = [t for t, _ in self.materials]
        return d
