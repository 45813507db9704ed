import numpy as np
import numpy.testing as npt
import pytest
import scipy.sparse as sp
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from sklearn_cvae import CVAE, FVAE, RVAE, cvae
from sklearn_cvae.data import binarize, split_per_user
from sklearn_cvae.exceptions import ShapeError
from sklearn_cvae.trainer import TrainConfig, fit_method
from sklearn_cvae.vae import latent_means

SMALL = dict(latent_dim=3, encoder_widths=(8,), decoder_widths=(8,),
             epochs_pretrain=3, epochs_refine=3, batch_size=10,
             random_state=0)

rng = np.random.RandomState(0)
Y = (rng.uniform(size=(30, 20)) < 0.4).astype(float)
X = (rng.uniform(size=(20, 25)) < 0.3).astype(float)


def test_default_parameters():
    assert CVAE().get_params()['alpha'] == 2.0
    assert CVAE().get_params()['beta_refine'] == 2.0
    assert FVAE().get_params()['alpha'] == 6.0
    assert RVAE().get_params()['encoder_widths'] == (200,)
    assert RVAE().get_params()['epochs_pretrain'] == 0


def test_clone_keeps_parameters():
    est = CVAE(alpha=4.0, **SMALL)
    copy = clone(est)
    assert copy.get_params() == est.get_params()
    assert not hasattr(copy, 'params_')


def test_cvae_fit_predict():
    est = CVAE(**SMALL).fit(Y, X)
    assert est.n_items_ == 20
    assert set(est.runs_) == {'pretrain', 'refine'}
    scores = est.predict_scores(Y[:5])
    assert scores.shape == (5, 20)
    assert est.transform(Y).shape == (30, 3)
    assert est.feature_embedding_.shape == (25, 3)
    assert est.sample(4).shape == (4, 20)


def test_estimator_matches_trainer():
    est = CVAE(**SMALL).fit(sp.csr_matrix(Y), X)
    config = TrainConfig(latent_dim=3, encoder_widths=(8,),
                         decoder_widths=(8,), alpha=2.0, beta_pretrain=0.1,
                         beta_refine=2.0, epochs_pretrain=3,
                         epochs_refine=3, batch_size=10, seed=0)
    params, _ = fit_method('cvae', binarize(X), binarize(Y), config)
    assert est.params_ == params


def test_fit_is_deterministic():
    a = CVAE(**SMALL).fit(Y, X)
    b = CVAE(**SMALL).fit(Y, X)
    npt.assert_array_equal(a.predict_scores(Y), b.predict_scores(Y))


def test_recommend_excludes_training_items():
    est = RVAE(**SMALL).fit(Y)
    for row, items in zip(Y, est.recommend(Y, n_items=5)):
        assert len(items) == min(5, int((row == 0).sum()))
        assert not row[items].any()


def test_baselines():
    fvae = FVAE(**SMALL).fit(Y, X)
    assert set(fvae.runs_) == {'pretrain'}
    assert fvae.predict_scores(Y).shape == (30, 20)
    assert set(FVAE(**SMALL).fit(None, X).runs_) == {'pretrain'}

    rvae = RVAE(**SMALL).fit(Y, X)
    assert set(rvae.runs_) == {'refine'}
    assert not hasattr(rvae, 'feature_embedding_')


def test_fit_errors():
    with pytest.raises(ValueError):
        CVAE(**SMALL).fit(Y)
    with pytest.raises(ValueError):
        FVAE(**SMALL).fit(Y)
    with pytest.raises(ShapeError):
        FVAE(**SMALL).fit(Y, X[:10])
    with pytest.raises(ValueError):
        CVAE(**SMALL).fit(-Y, X)
    with pytest.raises(ValueError):
        CVAE(alpha=0.5, **SMALL).fit(Y, X)


def test_not_fitted_and_shape():
    with pytest.raises(NotFittedError):
        CVAE().predict_scores(Y)
    est = RVAE(**SMALL).fit(Y)
    with pytest.raises(ShapeError):
        est.predict_scores(Y[:, :10])


def test_score_on_split():
    Yl = (np.random.RandomState(1).uniform(size=(40, 30)) < 0.5)
    split = split_per_user(binarize(Yl), random_state=0)
    est = RVAE(**SMALL).fit(split.train)
    value = est.score(split, n_items=10)
    assert 0.0 <= value <= 1.0


def test_feature_embedding_is_batched(monkeypatch):
    monkeypatch.setattr(cvae, 'EMBEDDING_BATCH', 7)
    est = CVAE(**SMALL).fit(Y, X)
    npt.assert_allclose(est.feature_embedding_,
                        latent_means(est.params_, X.T), rtol=1e-12,
                        atol=1e-12)


def test_random_state_resolution():
    assert CVAE(**SMALL).fit(Y, X).seed_ == 0

    params = {**SMALL, 'random_state': None}
    seeds = {RVAE(**params).fit(Y).seed_ for _ in range(3)}
    assert all(isinstance(s, int) and s >= 0 for s in seeds)
    assert len(seeds) > 1

    params['random_state'] = np.random.RandomState(3)
    a = RVAE(**params).fit(Y)
    params['random_state'] = np.random.RandomState(3)
    b = RVAE(**params).fit(Y)
    assert a.seed_ == b.seed_
    assert a.params_ == b.params_
