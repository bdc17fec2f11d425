import logging

import numpy as np
import pytest

from pyhwnas import pyhwnas
from pyhwnas.cli.cli_parser import main
from pyhwnas.cli.config import RunConfig, load_config, parse_config
from pyhwnas.core.autodiff import Tensor
from pyhwnas.core.childnet import sample_childnet
from pyhwnas.core.models import LossKnobs, ModelRecord, Theta
from pyhwnas.core.reader import load_childnet, load_table, read_records, save_theta, write_records
from pyhwnas.utils.constants import CHILDNET_FILE, ENER_LOOKUP, LAT_LOOKUP, PARETO_CSV, SEARCH_LOG
from pyhwnas.utils.exceptions import ConfigError, HwnasIOError


MICRO_CONFIG = """\
# two-layer search on 4x4 synthetic images
arch.layers=4:4:1,4:4:1
arch.input_size=4
arch.num_classes=2
data.samples=64
search.epochs=2
search.warmup_epochs=1
search.batch_size=32
child.epochs=1
"""



class TestRunConfig:
    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="line 2: unknown config key 'search.epoch'"):
            parse_config("# comment\nsearch.epoch=3\n")

    def test_missing_section(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config("epochs=3")

    def test_bad_value(self):
        with pytest.raises(ConfigError, match="bad value for 'knobs.alpha'"):
            parse_config("knobs.alpha=lots")

    def test_defaults(self):
        config = parse_config("")
        assert config == RunConfig()
        assert config.arch().preset == "desk"
        assert config.search_config().epochs == 20

    def test_values_reach_the_search_config(self):
        config = parse_config("knobs.alpha=0.2\nsearch.epochs=5\nsearch.theta_lr=0.02\nrun.seed=7 # inline\n")
        search = config.search_config()
        assert (search.epochs, search.seed, search.theta_optimizer.lr) == (5, 7, 0.02)
        assert search.knobs == LossKnobs(alpha=0.2)

    def test_grid_falls_back_to_knobs(self):
        assert parse_config("knobs.gamma=0.3").grid() == [LossKnobs(gamma=0.3)]
        grid = parse_config("sweep.alphas=0,0.5\nsweep.deltas=0.5,1").grid()
        assert grid == [LossKnobs(0.0, 1.0, 0.0, 0.5), LossKnobs(0.0, 1.0, 0.0, 1.0),
                        LossKnobs(0.5, 1.0, 0.0, 0.5), LossKnobs(0.5, 1.0, 0.0, 1.0)]

    def test_explicit_layers(self):
        arch = parse_config(MICRO_CONFIG).arch()
        assert (arch.preset, arch.num_layers, arch.input_hw) == ("explicit", 2, (4, 4))

    def test_missing_file(self, tmp_path):
        with pytest.raises(HwnasIOError):
            load_config(tmp_path / "absent.cfg")



class TestMain:
    def test_help(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["--help"])
        assert info.value.code == 0
        assert "profile" in capsys.readouterr().out

    def test_profile_writes_desk_tables(self, tmp_path):
        assert main(["profile", "--out", str(tmp_path), "-q"]) == 0
        for name in (LAT_LOOKUP, ENER_LOOKUP):
            lines = (tmp_path / name).read_text().splitlines()
            assert len(lines) == 7
            assert load_table(tmp_path / name).shape == (6, 9)

    def test_profile_is_reproducible(self, tmp_path):
        main(["profile", "--out", str(tmp_path / "a"), "-q"])
        main(["profile", "--out", str(tmp_path / "b"), "-q"])
        for name in (LAT_LOOKUP, ENER_LOOKUP):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_theta_with_wrong_layer_count(self, tmp_path):
        theta = Theta(Tensor(np.zeros((2, 9)), requires_grad=True))
        path = save_theta(theta, tmp_path / "theta_epoch_0.txt")
        assert main(["sample", str(path), "--out", str(tmp_path), "-q"]) == 1

    def test_pareto_keeps_the_summary_rows(self, tmp_path):
        rows = [(0.924, 7.1, 18.24), (0.911, 4.83, 9.28), (0.877, 2.88, 4.79), (0.85, 3.0, 5.0)]
        records = [ModelRecord(model_id=i, knobs=LossKnobs(), accuracy=a, latency=l, energy=e)
                   for i, (a, l, e) in enumerate(rows)]
        csv_path = write_records(records, tmp_path / "sweep.csv")
        assert main(["pareto", str(csv_path), "--out", str(tmp_path), "-q"]) == 0
        assert [r.model_id for r in read_records(tmp_path / PARETO_CSV)] == [0, 1, 2]

    def test_pareto_limits(self, tmp_path):
        rows = [(0.924, 7.1, 18.24), (0.911, 4.83, 9.28), (0.877, 2.88, 4.79)]
        records = [ModelRecord(model_id=i, knobs=LossKnobs(), accuracy=a, latency=l, energy=e)
                   for i, (a, l, e) in enumerate(rows)]
        csv_path = write_records(records, tmp_path / "sweep.csv")
        assert main(["pareto", str(csv_path), "--out", str(tmp_path), "--max-latency", "5", "-q"]) == 0
        assert [r.model_id for r in read_records(tmp_path / PARETO_CSV)] == [1, 2]

    def test_output_under_a_file(self, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("")
        assert main(["profile", "--out", str(blocker / "out"), "-q"]) == 2

    def test_missing_config(self, tmp_path):
        assert main(["profile", "--config", str(tmp_path / "absent.cfg"), "-q"]) == 2

    def test_bad_config_key(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("search.epoch=3\n")
        assert main(["profile", "--config", str(cfg), "-q"]) == 1

    def test_missing_table_path(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(f"tables.latency={tmp_path / 'absent.txt'}\n")
        assert main(["profile", "--config", str(cfg), "--out", str(tmp_path), "-q"]) == 2

    def test_oracle(self, tmp_path):
        assert main(["oracle", "--out", str(tmp_path), "--seed", "3", "-q"]) == 0

    def test_search_sample_train(self, tmp_path):
        cfg = tmp_path / "micro.cfg"
        cfg.write_text(MICRO_CONFIG)
        out = tmp_path / "run"
        base = ["--config", str(cfg), "--out", str(out), "-q"]

        assert main(["search", *base]) == 0
        assert (out / "theta_epoch_1.txt").is_file()
        assert (out / SEARCH_LOG).is_file()
        assert (out / LAT_LOOKUP).is_file()

        assert main(["sample", *base]) == 0
        child = load_childnet(out / CHILDNET_FILE, parse_config(MICRO_CONFIG).arch())
        assert len(child.choices) == 2

        assert main(["train-child", *base]) == 0



class TestEngine:
    def test_sample_follows_the_most_recent_search(self, tmp_path):
        out = tmp_path / "run"
        longer = MICRO_CONFIG.replace("search.epochs=2", "search.epochs=4") + f"run.out={out}\n"
        with pyhwnas(parse_config(longer), verbose=False) as run:
            run.search()
            assert run.latest_theta() == out / "theta_epoch_3.txt"

        with pyhwnas(parse_config(MICRO_CONFIG + f"run.out={out}\n"), verbose=False) as run:
            theta, _ = run.search()
            assert run.latest_theta() == out / "theta_epoch_1.txt"
            child, _ = run.sample()
        assert not (out / "theta_epoch_3.txt").exists()
        assert child == sample_childnet(theta, parse_config(MICRO_CONFIG).arch())

    def test_quiet_engine_silences_package_loggers(self):
        pyhwnas(verbose=False)
        assert logging.getLogger("pyhwnas.core.trainer").level == logging.WARNING
        pyhwnas(verbose=True)
        assert logging.getLogger("pyhwnas.core.trainer").level == logging.INFO
