import math
from dataclasses import replace

import numpy as np
import pytest

from ssumkit.config import PROJECT_ROOT
from ssumkit.core import RngStream
from ssumkit.errors import ConfigError
from ssumkit.experiments.config_loader import load_config
from ssumkit.experiments.runner import method_stream, run_and_emit, run_experiment
from ssumkit.models.experiment import (
    DictionaryParams,
    ExperimentConfig,
    Method,
    ProblemKind,
    SGParams,
)
from ssumkit.services.export import config_hash, read_results
from ssumkit.services.wmmse import (
    random_precoders,
    sample_channels,
    stochastic_wmmse,
    sum_rate,
)

WMMSE_BASELINES = (Method.ONE_SAMPLE_WMMSE, Method.MEAN_WMMSE, Method.SG_BEAMFORMING)


def sg_config(tmp_path, methods=(Method.SG_DIMINISHING, Method.SSUM_SG), **kwargs):
    settings = dict(
        name="sg-test",
        problem=ProblemKind.SG,
        methods=tuple(methods),
        r_max=40,
        seed=11,
        n_mc=50,
        eval_every=10,
        output_dir=tmp_path,
        sg=SGParams(dim=4),
    )
    settings.update(kwargs)
    return ExperimentConfig(**settings)


class TestSGExperiments:
    def test_schedule_rows(self, tmp_path):
        methods = (Method.SG_DIMINISHING, Method.SSUM_SG, Method.L1_SSUM_SG)
        table = run_experiment(sg_config(tmp_path, methods), write=False)
        assert len(table) == 12
        assert table.methods == [m.value for m in methods]
        for method in methods:
            rows = table.for_method(method.value)
            assert [row.iteration for row in rows] == [10, 20, 30, 40]
            assert all(math.isfinite(row.value) and row.stderr >= 0 for row in rows)

    def test_same_seed_same_rows(self, tmp_path):
        a = run_experiment(sg_config(tmp_path), write=False)
        b = run_experiment(sg_config(tmp_path), write=False)
        assert a.rows == b.rows

    def test_method_streams_are_independent(self, tmp_path):
        alone = run_experiment(sg_config(tmp_path, (Method.SSUM_SG,)), write=False)
        both = run_experiment(
            sg_config(tmp_path, (Method.L1_SSUM_SG, Method.SSUM_SG)), write=False
        )
        assert alone.for_method("ssum_sg") == both.for_method("ssum_sg")

    def test_zero_eval_every(self, tmp_path):
        config = sg_config(tmp_path, eval_every=0)
        table, paths = run_and_emit(config)
        assert len(table) == 0
        assert len(paths) == 1
        assert paths[0].read_text() == (
            f"config_sha256 {config_hash(config)}\n"
            "config_sha256_excludes output_dir,threads,write_xlsx\n"
            "files 0\n"
        )

    def test_constant_step_needs_the_flag(self, tmp_path):
        config = sg_config(tmp_path, (Method.SG_CONSTANT,))
        with pytest.raises(ConfigError):
            run_experiment(config, write=False)
        allowed = sg_config(
            tmp_path,
            (Method.SG_CONSTANT,),
            sg=SGParams(dim=4, allow_constant_step=True, constant_step=0.01),
        )
        assert len(run_experiment(allowed, write=False)) == 4

    def test_needs_evaluation_samples(self, tmp_path):
        with pytest.raises(ConfigError):
            run_experiment(sg_config(tmp_path, n_mc=0), write=False)
        with pytest.raises(ConfigError):
            run_experiment(sg_config(tmp_path, methods=()), write=False)

    def test_writes_results(self, tmp_path):
        config = sg_config(tmp_path, write_xlsx=True)
        table = run_experiment(config)
        assert (tmp_path / "results.xlsx").exists()
        assert read_results(tmp_path / "results.csv").rows == table.rows


class TestDictionaryExperiments:
    def test_planted_source(self, tmp_path):
        config = ExperimentConfig(
            name="dict-test",
            problem=ProblemKind.DICTIONARY,
            methods=(Method.DICTIONARY_PROX, Method.DICTIONARY_CLASSIC),
            r_max=20,
            seed=4,
            n_mc=10,
            eval_every=10,
            output_dir=tmp_path,
            dictionary=DictionaryParams(n=4, k=5, sparsity=2),
        )
        table = run_experiment(config, write=False)
        assert len(table) == 4
        assert all(row.value > 0 for row in table.rows)

    def test_corpus_file(self, tmp_path, gen):
        corpus = tmp_path / "signals.csv"
        np.savetxt(corpus, gen.standard_normal((6, 3)), delimiter=",", fmt="%.17g")
        config = ExperimentConfig(
            name="corpus-test",
            problem=ProblemKind.DICTIONARY,
            methods=(Method.DICTIONARY_PROX,),
            r_max=15,
            seed=4,
            eval_every=5,
            output_dir=tmp_path,
            dictionary=DictionaryParams(k=4, sparsity=2, corpus=str(corpus)),
        )
        table = run_experiment(config, write=False)
        assert [row.iteration for row in table.rows] == [5, 10, 15]
        assert all(row.value > 0 for row in table.rows)


class TestWMMSEExperiments:
    def test_every_method_is_scored(self, tmp_path, small_network):
        methods = (
            Method.STOCHASTIC_WMMSE,
            Method.ONE_SAMPLE_WMMSE,
            Method.MEAN_WMMSE,
            Method.SG_BEAMFORMING,
        )
        config = ExperimentConfig(
            name="wmmse-test",
            problem=ProblemKind.WMMSE,
            methods=methods,
            r_max=6,
            seed=2,
            n_mc=5,
            eval_every=3,
            output_dir=tmp_path,
            network=small_network,
        )
        table = run_experiment(config, write=False)
        assert len(table) == 8
        assert all(row.value > 0 for row in table.rows)

    def test_point_mass_scores_the_iterates(
        self, tmp_path, point_mass_network, point_mass_model
    ):
        config = ExperimentConfig(
            name="point-mass",
            problem=ProblemKind.WMMSE,
            methods=(Method.STOCHASTIC_WMMSE,),
            r_max=10,
            seed=5,
            n_mc=4,
            eval_every=5,
            output_dir=tmp_path,
            network=point_mass_network,
        )
        table = run_experiment(config, channel_model=point_mass_model, write=False)

        root = RngStream(5)
        V0 = random_precoders(point_mass_network, root.child(0).child(1).generator())
        trace = stochastic_wmmse(
            point_mass_network,
            point_mass_model,
            V0,
            10,
            rng=method_stream(root, Method.STOCHASTIC_WMMSE),
            keep_iterates=True,
        )
        H = sample_channels(point_mass_model, RngStream(0).generator())
        noise = point_mass_network.noise
        for row in table.rows:
            expected = sum_rate(trace.iterates[row.iteration - 1], H, noise)
            assert row.value == pytest.approx(expected, rel=1e-9)
            assert row.stderr == pytest.approx(0.0, abs=1e-9)

    def test_needs_a_network(self, tmp_path):
        config = ExperimentConfig(
            name="no-network",
            problem=ProblemKind.WMMSE,
            methods=(Method.MEAN_WMMSE,),
            r_max=2,
            seed=0,
            output_dir=tmp_path,
        )
        with pytest.raises(ConfigError):
            run_experiment(config, write=False)

    @pytest.mark.slow
    def test_desk_ordering_over_ten_seeds(self, tmp_path):
        desk = load_config(PROJECT_ROOT / "configs" / "desk.toml")
        stochastic, baselines = [], {m: [] for m in WMMSE_BASELINES}
        for seed in range(1, 11):
            config = replace(desk, seed=seed, output_dir=tmp_path)
            table = run_experiment(config, write=False)
            stochastic.append(table.final(Method.STOCHASTIC_WMMSE.value).value)
            for method, scores in baselines.items():
                scores.append(table.final(method.value).value)

        def wins(method):
            return sum(s > b for s, b in zip(stochastic, baselines[method]))

        assert wins(Method.SG_BEAMFORMING) >= 9
        assert wins(Method.MEAN_WMMSE) >= 7
        assert np.mean(stochastic) > np.mean(baselines[Method.MEAN_WMMSE])
