import struct

import numpy as np
import pytest

from magnetotherm import CheckpointError, ConfigError, cfl_dt, make_laws, step
from magnetotherm.checkpoint import MAGIC, load_checkpoint, read_header, save_checkpoint
from magnetotherm.config import DEFAULTS, SimConfig, config_hash, from_dict, load_config
from magnetotherm.initial import random_state

from helpers import box, shell


class TestConfig:
    def test_defaults_validate(self):
        cfg = from_dict()
        assert cfg.seed == 0 and cfg.grid().dims == (16, 16, 16)

    @pytest.mark.parametrize("override", [
        {"gird": {}},
        {"time": {"nsteps": 10}},
        {"thresholds": {"energy_drift": 1.0}},
        {"grid": {"dims": 8, "radius": 1.0}},
        {"laws": {"viscosity": 2.0}},
    ])
    def test_unknown_keys_rejected(self, override):
        with pytest.raises(ConfigError):
            from_dict(override)

    @pytest.mark.parametrize("override", [
        {"grid": {"dims": [2, 8, 8]}},
        {"grid": {"kind": "torus"}},
        {"laws": {"preset": "steel"}},
        {"initial": {"preset": "vortex"}},
        {"initial": {"theta0": -1.0}},
        {"initial": {"m0": [0, 0, 0]}},
        {"time": {"safety": 1.5}},
        {"time": {"policy": "fixed", "dt": 0.0}},
        {"time": {"n_steps": 0}},
        {"scheme": {"llg_update": "euler"}},
        {"tolerances": {"projection_tol": 0.0}},
        {"seed": -3},
    ])
    def test_invalid_values_rejected(self, override):
        with pytest.raises(ConfigError):
            from_dict(override)

    def test_switching_grid_kind_replaces_the_table(self):
        cfg = from_dict({"grid": {"kind": "shell_masked", "n": 12, "inner_radius": 0.5, "outer_radius": 1.0}})
        assert cfg.grid().domain_kind == "shell_masked"

    def test_hash_is_stable_and_value_sensitive(self):
        a = from_dict({"seed": 3})
        assert a.hash() == from_dict({"seed": 3}).hash() == config_hash(a.data)
        assert a.hash() != from_dict({"seed": 4}).hash()
        assert a.hash() != from_dict({"seed": 3, "time": {"safety": 0.3}}).hash()
        assert len(a.hash()) == 16

    def test_toml_loading(self, tmp_path):
        p = tmp_path / "run.toml"
        p.write_text('seed = 7\n[grid]\ndims = [8, 8, 8]\n[time]\nn_steps = 12\n[laws]\npreset = "unit"\n')
        cfg = load_config(p)
        assert cfg.seed == 7 and cfg["time"]["n_steps"] == 12 and cfg.grid().dims == (8, 8, 8)
        assert cfg["time"]["safety"] == DEFAULTS["time"]["safety"]

    def test_toml_errors(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.toml")
        p = tmp_path / "bad.toml"
        p.write_text("seed = [\n")
        with pytest.raises(ConfigError):
            load_config(p)

    def test_overrides_are_validated(self):
        with pytest.raises(ConfigError):
            from_dict().with_overrides({"time": {"bogus": 1}})
        assert isinstance(from_dict().with_overrides({"seed": 2}), SimConfig)


def advanced_state(n_steps, seed=4):
    laws = make_laws({"preset": "default"})
    st = random_state(box(8), 0.05, rng=seed)
    dt = cfl_dt(st, laws)
    for _ in range(n_steps):
        st = step(st, laws, dt)
    return st, laws, dt


class TestCheckpoint:
    def test_round_trip_is_bit_exact(self, tmp_path):
        st, _, _ = advanced_state(3)
        p = tmp_path / "s.ckpt"
        save_checkpoint(st, p, "abc")
        back = load_checkpoint(p, "abc")
        assert back.step == st.step and back.time == st.time
        for a, b in zip(st.arrays(), back.arrays()):
            assert a.tobytes() == b.tobytes()
        assert read_header(p)[0]["config_hash"] == "abc"

    def test_shell_grid_round_trip(self, tmp_path, rng):
        from magnetotherm import zero_state
        st = zero_state(shell(10))
        st.theta = rng.uniform(0.5, 2.0, st.grid.dims)
        save_checkpoint(st, tmp_path / "s.ckpt")
        back = load_checkpoint(tmp_path / "s.ckpt")
        assert np.array_equal(back.grid.cell_mask, st.grid.cell_mask)
        assert np.array_equal(back.theta, st.theta)

    def test_truncated_payload(self, tmp_path):
        st, _, _ = advanced_state(0)
        p = tmp_path / "s.ckpt"
        save_checkpoint(st, p)
        p.write_bytes(p.read_bytes()[:-8])
        with pytest.raises(CheckpointError, match="payload size mismatch"):
            load_checkpoint(p)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "s.ckpt"
        p.write_bytes(b"NOTACKPT" + b"\0" * 32)
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(p)

    def test_version_mismatch(self, tmp_path):
        st, _, _ = advanced_state(0)
        p = tmp_path / "s.ckpt"
        save_checkpoint(st, p)
        raw = p.read_bytes()
        (n,) = struct.unpack("<I", raw[8:12])
        header = raw[12:12 + n].replace(b'"version": 1', b'"version": 2')
        p.write_bytes(MAGIC + raw[8:12] + header + raw[12 + n:])
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(p)

    def test_config_hash_mismatch_only_warns(self, tmp_path):
        st, _, _ = advanced_state(0)
        p = tmp_path / "s.ckpt"
        save_checkpoint(st, p, "old")
        with pytest.warns(UserWarning, match="config hash"):
            back = load_checkpoint(p, "new")
        assert np.array_equal(back.theta, st.theta)

    def test_resume_is_bit_identical(self, tmp_path):
        straight, laws, dt = advanced_state(10)
        half, _, _ = advanced_state(5)
        p = tmp_path / "half.ckpt"
        save_checkpoint(half, p)
        st = load_checkpoint(p)
        for _ in range(5):
            st = step(st, laws, dt)
        assert st.step == straight.step
        for a, b in zip(st.arrays(), straight.arrays()):
            assert a.tobytes() == b.tobytes()
