import pytest

from sg3edit.configfile import DEFAULTS, load_config


def test_defaults_without_file():
    cfg = load_config(None)
    assert cfg["restyle_iters"] == 3
    assert cfg["pti_steps"] == 8000
    assert cfg["normalize_smoothing"] is False


def test_parse_flat_file(tmp_path):
    path = tmp_path / "svc.cfg"
    path.write_text(
        """
        # service settings
        generator_checkpoint = /tmp/gen.sg3t
        restyle_iters = 5
        normalize_smoothing = true   # fidelity flag
        pti_lr = 0.002
        custom_key = hello
        """
    )
    cfg = load_config(path)
    assert cfg["generator_checkpoint"] == "/tmp/gen.sg3t"
    assert cfg["restyle_iters"] == 5
    assert cfg["normalize_smoothing"] is True
    assert cfg["pti_lr"] == 0.002
    assert cfg["custom_key"] == "hello"


def test_bad_boolean_rejected(tmp_path):
    path = tmp_path / "svc.cfg"
    path.write_text("normalize_smoothing = maybe\n")
    with pytest.raises(ValueError):
        load_config(path)


def test_missing_equals_rejected(tmp_path):
    path = tmp_path / "svc.cfg"
    path.write_text("just a line\n")
    with pytest.raises(ValueError):
        load_config(path)


def test_defaults_not_mutated(tmp_path):
    path = tmp_path / "svc.cfg"
    path.write_text("restyle_iters = 9\n")
    load_config(path)
    assert DEFAULTS["restyle_iters"] == 3
