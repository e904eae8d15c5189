"""Regenerate the scripted-provider run bundled with the toy-anderson template.

The scaffold session writes the files kept under ``templates/toy-anderson/scaffold``;
one plan session dispatches all five targets; one worker closes them with
``refl``; the polish session leaves the code as is.

    python3 scripts/build_toy_script.py
"""

from __future__ import annotations

import json
from pathlib import Path

TEMPLATE = Path(__file__).resolve().parents[1] / "src" / "archon" / "templates" / "toy-anderson"
FILES = ("Basic", "Jensen", "Main")
TARGETS = {
    "src/Anderson/Basic.mck": ("two_add_three", "mul_comm_small"),
    "src/Anderson/Jensen.mck": ("six_eq", "six_sum"),
    "src/Anderson/Main.mck": ("main",),
}


def call(tool: str, **args) -> dict:
    return {"tool": tool, "args": args}


def build() -> dict:
    scaffold = [call("read_reference", name="informal_proof.md")]
    for name in FILES:
        text = (TEMPLATE / "scaffold" / "Anderson" / f"{name}.mck").read_text(encoding="utf-8")
        scaffold.append(call("edit_file", path=f"src/Anderson/{name}.mck", content=text))
    scaffold += [call("run_check"),
                 call("write_summary", summary="Scaffolded three modules with five placeholder proofs.")]

    ids = [f"{p}::{n}" for p, names in TARGETS.items() for n in names]
    plan = [call("read_ledger"),
            call("write_summary", summary="All five targets are ground identities in one import chain.",
                 tasks=[{"targets": ids, "guidance": "Evaluate both sides; close each with refl."}])]

    worker = [call("search_library", query="six + two = 8", k=3),
              call("ask_informal", question="Why does six + two = 8 hold?")]
    for path, names in TARGETS.items():
        text = (TEMPLATE / "scaffold" / Path(path).relative_to("src")).read_text(encoding="utf-8")
        for line in text.splitlines():
            if line.startswith("theorem ") and line.split()[1] in names:
                worker.append(call("edit_file", path=path, old=line, new=line.replace(":= sorry", ":= refl")))
    worker += [call("run_check"),
               call("record_route", obligation="src/Anderson/Main.mck::main",
                    text="Unfold six to two * three and evaluate: 6 + 2 = 8."),
               call("write_summary", summary="Closed all five targets by evaluation.")]

    polish = [call("run_check"), call("write_summary", summary="Nothing worth extracting; left as is.")]
    return {
        "sessions": [
            {"role": "worker", "key": "scaffold", "turns": scaffold},
            {"role": "plan", "turns": plan},
            {"role": "worker", "key": "src/Anderson/Main.mck::main", "turns": worker},
            {"role": "worker", "key": "polish", "turns": polish},
        ],
        "informal": [{"match": "six + two", "response": "six is 2 * 3 = 6, and 6 + 2 = 8."}],
    }


def main() -> None:
    out = TEMPLATE / ".archon" / "script.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(build(), indent=2) + "\n", encoding="utf-8")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
