import numpy as np
import numpy.testing as npt
import pytest

from sklearn_cvae.cli import BENCH_DEFAULTS
from sklearn_cvae.evaluate import evaluate
from sklearn_cvae.exceptions import EmptyDatasetError
from sklearn_cvae.synth import (SynthSpec, benchmark, generate, make_split,
                                oracle_recall)
from sklearn_cvae.trainer import METHODS, TrainConfig, init_params


def test_spec_validation():
    with pytest.raises(ValueError):
        SynthSpec(n_clusters=0)
    with pytest.raises(ValueError):
        SynthSpec(n_items=3, n_clusters=4)
    with pytest.raises(ValueError):
        SynthSpec(density=1.0)
    with pytest.raises(ValueError):
        SynthSpec(noise=0.5)
    assert SynthSpec().replace(seed=3).seed == 3


def test_round_robin_clusters():
    data = generate(SynthSpec(n_users=10, n_items=7, n_dims=5, n_clusters=3))
    npt.assert_array_equal(data.user_clusters, np.arange(10) % 3)
    npt.assert_array_equal(data.item_clusters, [0, 1, 2, 0, 1, 2, 0])
    npt.assert_array_equal(data.dim_clusters, [0, 1, 2, 0, 1])
    assert data.Y.shape == (10, 7)
    assert data.X.shape == (7, 5)


def test_noise_free_data_is_block_structured():
    data = generate(SynthSpec(noise=0.0, seed=1))
    Y, X = data.Y.toarray(), data.X.toarray()
    off_y = data.user_clusters[:, None] != data.item_clusters[None, :]
    off_x = data.item_clusters[:, None] != data.dim_clusters[None, :]
    assert not Y[off_y].any()
    assert not X[off_x].any()
    assert Y.any(axis=1).all()


def test_rating_count_concentrates():
    spec = SynthSpec(noise=0.0)
    in_cluster = spec.n_users * (spec.n_items // spec.n_clusters)
    mean = in_cluster * spec.density
    sd = np.sqrt(in_cluster * spec.density * (1 - spec.density))
    counts = [generate(spec.replace(seed=s)).Y.nnz for s in range(5)]
    assert abs(np.mean(counts) - mean) <= 3 * sd / np.sqrt(len(counts))


def test_generate_is_seeded():
    a, b = generate(SynthSpec(seed=4)), generate(SynthSpec(seed=4))
    c = generate(SynthSpec(seed=5))
    assert (a.Y != b.Y).nnz == 0
    assert (a.X != b.X).nnz == 0
    assert (a.Y != c.Y).nnz > 0


def test_degenerate_spec_fails():
    spec = SynthSpec(n_users=20, n_items=4, n_dims=4, n_clusters=4,
                     density=0.01, noise=0.0)
    with pytest.raises(EmptyDatasetError):
        generate(spec)


def test_oracle_recall():
    data = generate(SynthSpec(noise=0.0, seed=2))
    split = make_split(data, seed=2)
    per_cluster = data.Y.shape[1] // 4
    assert oracle_recall(data, split, per_cluster) == 1.0
    at_10 = oracle_recall(data, split, 10)
    assert 0.0 < at_10 < 1.0
    assert oracle_recall(data, split, 5) < at_10


def test_make_split_sparsifies_training():
    data = generate(SynthSpec(seed=3))
    split = make_split(data, seed=3, train_per_user=3)
    assert np.diff(split.train.indptr).max() <= 3
    full = make_split(data, seed=3)
    assert (split.test != full.test).nnz == 0
    assert (split.train.multiply(full.train) != split.train).nnz == 0


def test_untrained_model_is_near_random():
    data = generate(SynthSpec(seed=0))
    split = make_split(data, seed=0)
    params = init_params(data.Y.shape[1], TrainConfig(
        latent_dim=10, encoder_widths=(20,), decoder_widths=(20,)))
    rec = evaluate(params, split, [10])['rec', 10]
    assert abs(rec - 10 / data.Y.shape[1]) < 0.1


def test_benchmark_rows():
    spec = SynthSpec(n_users=40, n_items=60, n_dims=30, n_clusters=2,
                     density=0.5)
    config = TrainConfig(latent_dim=2, encoder_widths=(4,),
                         decoder_widths=(4,), epochs_pretrain=2,
                         epochs_refine=2, batch_size=20)
    configs = {'cvae': config, 'rvae': config}
    rows = benchmark(spec, configs, seeds=[0, 1], train_per_user=None)
    assert [row['seed'] for row in rows] == [0, 1]
    for row in rows:
        assert set(row) == {'seed', 'oracle', 'cvae', 'rvae'}
        assert 0.0 <= row['cvae'] <= 1.0
    assert benchmark(spec, configs, seeds=[0, 1],
                     train_per_user=None) == rows


def _mean_recalls(spec, configs, seeds):
    rows = benchmark(spec, configs, seeds=seeds, train_per_user=3,
                     cutoff=10)
    return {key: np.mean([row[key] for row in rows])
            for key in ('oracle',) + tuple(configs)}


@pytest.mark.slow
def test_cvae_leads_on_sparse_ratings():
    configs = {method: TrainConfig.for_method(method, **BENCH_DEFAULTS)
               for method in METHODS}
    mean = _mean_recalls(SynthSpec(), configs, seeds=range(5))
    assert mean['cvae'] - mean['rvae'] >= 0.05
    assert mean['cvae'] >= mean['fvae']
    assert mean['cvae'] <= mean['oracle'] + 0.02


@pytest.mark.slow
def test_cvae_near_oracle_without_noise():
    config = TrainConfig.for_method(
        'cvae', **{**BENCH_DEFAULTS, 'epochs_pretrain': 400})
    mean = _mean_recalls(SynthSpec(noise=0.0), {'cvae': config},
                         seeds=range(3))
    assert mean['cvae'] >= 0.9 * mean['oracle']
