from __future__ import annotations

from dataclasses import asdict, dataclass

ERROR, WARNING, INFO = "error", "warning", "info"
SEVERITIES = (ERROR, WARNING, INFO)

PARSE = "parse"
PROOF_FAILURE = "proof_failure"
PLACEHOLDER = "placeholder"
UNKNOWN_REFERENCE = "unknown_reference"
TIMEOUT = "timeout"
BACKEND_FAILURE = "backend_failure"
OTHER = "other"  # plain warnings/notes from an external tool
KINDS = (PARSE, PROOF_FAILURE, PLACEHOLDER, UNKNOWN_REFERENCE, TIMEOUT, BACKEND_FAILURE, OTHER)


@dataclass(frozen=True, order=True)
class Diagnostic:
    file: str
    span: tuple[int, int, int, int]
    severity: str
    kind: str
    message: str

    def to_dict(self) -> dict:
        d = asdict(self)
        d["span"] = list(self.span)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Diagnostic":
        return cls(d["file"], tuple(d["span"]), d["severity"], d["kind"], d["message"])

    def render(self) -> str:
        l, c, el, ec = self.span
        return f"{self.severity} {self.file}:{l}:{c}-{el}:{ec} {self.message}"


def sort_diagnostics(diags) -> list[Diagnostic]:
    return sorted(set(diags))
