import json
import math

import numpy as np
import pytest

from pilotfree.errors import ConfigurationError
from pilotfree.grid import import_patterns
from pilotfree.harness import cli
from pilotfree.harness.config import SimConfig, parse_config, sir_to_alpha
from pilotfree.harness.results import CSV_HEADER, read_csv, to_csv_text, write_csv
from pilotfree.harness.sim import Row, run_point, sweep

INF = float("inf")


def tiny(**kw):
    base = dict(n_rb=4, seeds=2, frames_per_seed=2, n_bsg=2, delay_spread=30e-9, speed=1.0)
    base.update(kw)
    return SimConfig(**base).validate()


MINIMAL_TOML = """
[grid]
n_rb = 4

[channel]
speed_kmh = 3.6

[sweep]
axis = "snr_db"
points = [5, 10]

[run]
seeds = 2
frames_per_seed = 1
"""


class TestConfig:
    def test_parse(self):
        cfg = parse_config(MINIMAL_TOML, "m.toml")
        assert cfg.n_rb == 4 and cfg.speed == pytest.approx(1.0)
        assert cfg.sweep_points == (5.0, 10.0)

    def test_unknown_key_anchored(self):
        text = MINIMAL_TOML.replace("n_rb = 4", "n_rb = 4\nbogus = 1")
        with pytest.raises(ConfigurationError, match=r"m\.toml:4: unknown key grid\.bogus"):
            parse_config(text, "m.toml")

    def test_bad_type_anchored(self):
        text = MINIMAL_TOML.replace("seeds = 2", 'seeds = "two"')
        with pytest.raises(ConfigurationError, match=r"m\.toml:13: run\.seeds"):
            parse_config(text, "m.toml")

    def test_malformed_toml(self):
        with pytest.raises(ConfigurationError, match=r"m\.toml:3"):
            parse_config("[grid]\nn_rb = 4\nn_rb = = 5\n", "m.toml")

    def test_unknown_section(self):
        with pytest.raises(ConfigurationError, match="unknown section"):
            parse_config("[extra]\na = 1\n", "m.toml")

    def test_collects_all_violations(self):
        with pytest.raises(ConfigurationError) as exc:
            SimConfig(layers=3, mode="weird", seeds=0).validate()
        msg = str(exc.value)
        assert "layers=3" in msg and "mode" in msg and "seeds" in msg

    def test_subgrid_sweep_values(self):
        SimConfig(n_rb=50, sweep_axis="n_bsg", sweep_points=(1, 2, 5, 10, 25, 50)).validate()
        with pytest.raises(ConfigurationError, match="does not divide"):
            SimConfig(n_rb=50, sweep_axis="n_bsg", sweep_points=(4,)).validate()

    def test_sir_needs_interference_mode(self):
        with pytest.raises(ConfigurationError):
            SimConfig(layers=2, sweep_axis="sir_db", sweep_points=(0.0,)).validate()

    def test_hash(self):
        a = SimConfig()
        assert a.config_hash() == a.replace(workers=4, output="x.csv").config_hash()
        assert a.config_hash() != a.replace(master_seed=2).config_hash()

    def test_sir_alpha(self):
        assert sir_to_alpha(0.0) == pytest.approx(0.5)
        assert sir_to_alpha(40.0) == pytest.approx(1 - 1e-4, abs=1e-8)
        cfg = SimConfig(layers=2, mode="interference", sweep_axis="sir_db",
                        sweep_points=(0.0,), snr_db=10.0).validate()
        pt = cfg.points()[0]
        assert pt.alpha == pytest.approx((0.5, 0.5))
        assert pt.noise_var == pytest.approx(0.05)

    def test_noiseless_point(self):
        pt = SimConfig(sweep_points=(INF,)).validate().points()[0]
        assert pt.noise_var == 0.0


class TestCsv:
    def test_header_only(self, tmp_path):
        path = write_csv([], tmp_path / "empty.csv")
        assert path.read_text() == ",".join(CSV_HEADER) + "\n"

    def test_sorting_and_format(self):
        rows = [
            Row("snr_db", 10.0, "pilot", 0, 3, 7),
            Row("snr_db", 5.0, "pchan", 0, 1, 3),
            Row("snr_db", 5.0, "cca", 1, 2, 3, mean_rho=0.123456789, seconds=1.5),
        ]
        lines = to_csv_text(rows).splitlines()
        assert lines[1] == "snr_db,5,cca,1,0.666667,2,3,0.123457,0,1.5"
        assert lines[2].startswith("snr_db,5,pchan,0,0.333333,1,3,,0,")
        assert lines[3].startswith("snr_db,10,pilot")

    def test_round_trip(self, tmp_path):
        rows = [Row("pattern", "time", "cca", 0, 0, 10, mean_rho=float("nan"))]
        back = read_csv(write_csv(rows, tmp_path / "r.csv"))
        assert back[0]["point"] == "time" and back[0]["mean_rho"] == "nan"


class TestSimulation:
    def test_noiseless_flat_single_layer_all_zero(self):
        cfg = tiny(delay_spread=0.0, speed=0.0, snr_db=INF, sweep_points=(INF,))
        for row in run_point(cfg):
            assert row.err_count == 0

    def test_denominators(self):
        cfg = tiny(layers=2, n_r=2, sweep_points=(10.0,))
        res = sweep(cfg)
        n_re = 48 * 14
        nbar, S = 16, 2
        for layer in (0, 1):
            assert res.get(10.0, "cca", layer).re_count == 4 * (n_re - nbar * S - S)
            assert res.get(10.0, "pilot", layer).re_count == 4 * 48 * 12
            assert res.get(10.0, "pchan", layer).re_count == 4 * 48 * 12
        for row in res.rows:
            assert 0 <= row.err_count <= row.re_count

    def test_deterministic_bytes(self, tmp_path):
        cfg = tiny(sweep_points=(0.0, 10.0))
        a = write_csv(sweep(cfg).rows, tmp_path / "a.csv").read_bytes()
        b = write_csv(sweep(cfg).rows, tmp_path / "b.csv").read_bytes()
        c = write_csv(sweep(cfg, workers=2).rows, tmp_path / "c.csv").read_bytes()
        assert a == b == c

    def test_seed_changes_results(self):
        cfg = tiny(sweep_points=(0.0,))
        a = sweep(cfg).rows
        b = sweep(cfg.replace(master_seed=99)).rows
        assert [r.err_count for r in a] != [r.err_count for r in b]

    def test_receiver_subset_leaves_others_unchanged(self):
        cfg = tiny(sweep_points=(0.0, 5.0))
        full = {(r.point, r.receiver): r.err_count for r in sweep(cfg).rows}
        only_pilot = sweep(cfg.replace(receivers=("pilot",))).rows
        only_cca = sweep(cfg.replace(receivers=("cca",))).rows
        for r in only_pilot + only_cca:
            assert full[(r.point, r.receiver)] == r.err_count

    def test_high_sir_approaches_single_layer(self):
        common = dict(n_rb=4, seeds=4, frames_per_seed=2, snr_db=0.0, receivers=("cca", "pchan"))
        single = sweep(SimConfig(**common, sweep_points=(0.0,)).validate())
        inter = sweep(SimConfig(**common, layers=2, mode="interference", power_norm="unit-total",
                                sweep_axis="sir_db", sweep_points=(40.0,)).validate())
        for rx in ("cca", "pchan"):
            a = single.get(0.0, rx).ser
            b = inter.get(40.0, rx).ser
            assert abs(a - b) <= 0.1 * a + 1e-3

    def test_timing_column(self):
        rows = sweep(tiny(timing=True)).rows
        assert all(r.seconds is not None and r.seconds >= 0 for r in rows)
        assert all(r.seconds is None for r in sweep(tiny()).rows)

    def test_meta(self):
        res = sweep(tiny(layers=2, n_r=2))
        meta = res.meta
        assert meta["seeds"] == [0, 1]
        assert "destination" in meta["ser_convention"]
        assert meta["overhead"]["cca@15"]["repeat_only"] == pytest.approx(32 / (48 * 14))
        assert meta["overhead"]["pilot"] == pytest.approx(2 / 14)

    def test_genie_phase_reference(self):
        cfg = tiny(phase_ref="genie", snr_db=INF, sweep_points=(INF,), delay_spread=0.0, speed=0.0,
                   receivers=("cca",))
        assert run_point(cfg)[0].err_count == 0


class TestCli:
    @pytest.fixture
    def cfg_path(self, tmp_path):
        p = tmp_path / "run.toml"
        p.write_text(MINIMAL_TOML + '\n[output]\npath = "' + str(tmp_path / "out.csv") + '"\n')
        return p

    def test_simulate(self, cfg_path, tmp_path, capsys):
        assert cli.main(["simulate", "--config", str(cfg_path)]) == 0
        rows = read_csv(tmp_path / "out.csv")
        assert {r["receiver"] for r in rows} == {"cca", "pilot", "pchan"}
        meta = json.loads((tmp_path / "out.csv.meta.json").read_text())
        assert meta["master_seed"] == 1
        assert "wrote 6 rows" in capsys.readouterr().out

    def test_simulate_overrides(self, cfg_path, tmp_path):
        out = tmp_path / "o2.csv"
        args = ["simulate", "--config", str(cfg_path), "--out", str(out), "--seed", "7", "--workers", "2"]
        assert cli.main(args) == 0
        assert json.loads((tmp_path / "o2.csv.meta.json").read_text())["master_seed"] == 7

    def test_bad_seed(self, cfg_path, capsys):
        assert cli.main(["simulate", "--config", str(cfg_path), "--seed", "-1"]) == 2

    def test_malformed_config(self, tmp_path, capsys):
        p = tmp_path / "bad.toml"
        p.write_text("[grid]\nn_rb = 4\n[run]\nseeds = -3\nframes = 1\n")
        assert cli.main(["simulate", "--config", str(p)]) == 2
        err = capsys.readouterr().err
        assert f"{p}:5: unknown key run.frames" in err

    def test_missing_config(self, tmp_path):
        assert cli.main(["simulate", "--config", str(tmp_path / "none.toml")]) == 2

    def test_unwritable_output(self, cfg_path, tmp_path):
        out = tmp_path / "missing_dir" / "x.csv"
        assert cli.main(["simulate", "--config", str(cfg_path), "--out", str(out)]) == 3

    def test_pattern_export(self, cfg_path, tmp_path, capsys):
        out = tmp_path / "pat.txt"
        assert cli.main(["pattern", "--config", str(cfg_path), "--export", str(out)]) == 0
        (p,) = import_patterns(out.read_text())
        assert p.source.shape == (2, 16)
        assert "view length 16" in capsys.readouterr().out

    @pytest.mark.parametrize("ds, speed, expect", [
        ("30e-9", "60", "frequency"),
        ("300e-9", "1", "time"),
    ])
    def test_coherence(self, capsys, ds, speed, expect):
        rc = cli.main(["coherence", "--scs", "30e3", "--ds", ds, "--speed-kmh", speed, "--carrier", "4e9"])
        out = capsys.readouterr().out
        assert rc == 0
        assert f"recommended pattern: {expect}" in out

    def test_coherence_bandwidth(self, capsys):
        cli.main(["coherence", "--scs", "30e3", "--ds", "30e-9", "--speed", "16.7", "--carrier", "4e9"])
        out = capsys.readouterr().out
        bc = float(out.split("coherence bandwidth:")[1].split("MHz")[0])
        assert math.isclose(bc, 6.667, abs_tol=1e-3)

    def test_coherence_static(self, capsys):
        cli.main(["coherence", "--scs", "30e3", "--ds", "30e-9", "--speed", "0", "--carrier", "4e9"])
        assert "coherence time: inf (unbounded symbols)" in capsys.readouterr().out

    def test_coherence_negative(self, capsys):
        assert cli.main(["coherence", "--scs", "30e3", "--ds", "-1", "--speed", "1", "--carrier", "4e9"]) == 2


def test_sweep_point_values_are_canonical():
    cfg = tiny(sweep_axis="pattern", sweep_points=("time", "frequency"))
    rows = sweep(cfg).rows
    assert {r.point for r in rows} == {"time", "frequency"}
    assert np.all([r.sweep_axis == "pattern" for r in rows])
