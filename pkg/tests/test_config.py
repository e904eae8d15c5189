import pytest

from archon.config import DEFAULT_TOML, Config, ConfigError, load_config, parse_config, with_overrides


def test_default_toml_equals_dataclass_defaults():
    assert parse_config(DEFAULT_TOML) == Config()


def test_empty_file_means_defaults():
    assert parse_config("") == Config()


@pytest.mark.parametrize("text,needle", [
    ("colour = 1", "unknown key"),
    ("[budgets]\nworker_token = 3", "unknown key"),
    ("[budgets]\nworker_tokens = 'many'", "number"),
    ("[budgets]\nworker_tokens = 1.5", "integer"),
    ("[run]\nreplay = 1", "true or false"),
    ("[policy]\nlexicon = [1]", "list of strings"),
    ("[backend]\nkind = 'coq'", "backend.kind"),
    ("[budgets]\niteration_cap = 0", "positive"),
    ("schema_version = 2", "schema_version"),
    ("[run", "invalid TOML"),
])
def test_bad_configs_are_rejected(text, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_config(text)


def test_integer_timeout_becomes_float():
    assert parse_config("[backend]\ntimeout = 5").backend.timeout == 5.0


def test_gate_policy_translation():
    cfg = parse_config("[policy]\nlexicon = ['sorry']\nallowed_axioms = ['A']\n")
    policy = cfg.policy.gate_policy()
    assert policy.lexicon == frozenset({"sorry"}) and policy.allowed_axioms == frozenset({"A"})
    assert Config().policy.gate_policy().lexicon is None


def test_load_config_requires_file(tmp_path):
    with pytest.raises(ConfigError, match="archon init"):
        load_config(tmp_path)


def test_with_overrides_is_non_destructive():
    base = Config()
    new = with_overrides(base, run={"replay": True}, budgets={"iteration_cap": 3})
    assert new.run.replay and new.budgets.iteration_cap == 3
    assert not base.run.replay and base.budgets.iteration_cap == 50
