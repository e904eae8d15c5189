"""Skill files: markdown with a fenced metadata header.

::

    ---
    name: close-arithmetic
    trigger: the goal is a ground arithmetic identity
    roles: [worker]
    ---
    body text...

Global skills ship with the package; per-project skills live in
``.archon/skills/`` and shadow global ones of the same name.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

GLOBAL, PER_PROJECT = "global", "per-project"
PROJECT_SKILLS_DIR = ".archon/skills"


class SkillFormatError(ValueError):
    pass


@dataclass(frozen=True)
class SkillDoc:
    name: str
    trigger_description: str
    body: str
    scope: str = GLOBAL
    roles: tuple[str, ...] = ()

    def applies_to(self, role: str) -> bool:
        return not self.roles or role in self.roles


def parse_skill(text: str, scope: str = GLOBAL) -> SkillDoc:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "---":
        raise SkillFormatError("skill file must start with a '---' metadata fence")
    try:
        end = next(i for i in range(1, len(lines)) if lines[i].strip() == "---")
    except StopIteration:
        raise SkillFormatError("unterminated metadata fence") from None
    meta = yaml.safe_load("\n".join(lines[1:end])) or {}
    if not isinstance(meta, dict) or "name" not in meta or "trigger" not in meta:
        raise SkillFormatError("metadata needs 'name' and 'trigger'")
    roles = meta.get("roles") or ()
    if isinstance(roles, str):
        roles = (roles,)
    return SkillDoc(str(meta["name"]), str(meta["trigger"]), "\n".join(lines[end + 1:]).strip(),
                    scope, tuple(roles))


def _load_dir(files, scope: str) -> dict[str, SkillDoc]:
    out = {}
    for f in sorted(files, key=lambda p: p.name):
        if f.name.endswith(".md"):
            skill = parse_skill(f.read_text(encoding="utf-8"), scope)
            out[skill.name] = skill
    return out


def global_skills() -> dict[str, SkillDoc]:
    pkg = resources.files("archon") / "skills"
    return _load_dir(list(pkg.iterdir()), GLOBAL)


def load_skills(root=None) -> dict[str, SkillDoc]:
    skills = global_skills()
    if root is not None:
        d = Path(root) / PROJECT_SKILLS_DIR
        if d.is_dir():
            skills.update(_load_dir(list(d.iterdir()), PER_PROJECT))
    return dict(sorted(skills.items()))


def skills_for(skills: dict[str, SkillDoc], role: str) -> list[SkillDoc]:
    return [s for s in skills.values() if s.applies_to(role)]
