import numpy as np
import pytest

from sklearn_cvae.cli import RunConfig, main
from sklearn_cvae.data import load_sbm
from sklearn_cvae.exceptions import ConfigError
from sklearn_cvae.vae import load_checkpoint

TINY_MODEL = ['latent_dim=2', 'encoder_widths=4', 'decoder_widths=4',
              'epochs_pretrain=2', 'epochs_refine=2', 'batch_size=20']
TINY_SYNTH = ['source=synth', 'synth_users=40', 'synth_items=40',
              'synth_dims=20', 'synth_clusters=2', 'synth_density=0.5']


def _sets(pairs):
    args = []
    for pair in pairs:
        args += ['--set', pair]
    return args


@pytest.fixture
def toy_files(tmp_path):
    ratings = tmp_path / 'ratings.tsv'
    ratings.write_text("# toy\nu1\ti1\nu1\ti2\nu2\ti2\nu2\ti3\nu3\ti4\n"
                       "u3\ti1\nu1\ti1\n", encoding='utf-8')
    reviews = tmp_path / 'reviews.tsv'
    reviews.write_text("i1\tgreat fun game\ni2\tfun puzzle\n"
                       "i3\tgreat puzzle\ni4\tthe game\n", encoding='utf-8')
    stopwords = tmp_path / 'stop.txt'
    stopwords.write_text("the\n", encoding='utf-8')
    config = tmp_path / 'toy.cfg'
    config.write_text("# toy run\nratings = {}\nreviews = {}\n"
                      "stopwords = {}\nmin_df = 1\n".format(
                          ratings, reviews, stopwords), encoding='utf-8')
    return config


@pytest.fixture
def synth_workdir(tmp_path):
    workdir = tmp_path / 'synth'
    assert main(['ingest', '--workdir', str(workdir)] +
                _sets(TINY_SYNTH)) == 0
    return workdir


def test_run_config_rejects_unknown_keys(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.load(overrides=['learning_rat=0.1'])
    path = tmp_path / 'bad.cfg'
    path.write_text("alpha = 2\nbogus = 1\n")
    with pytest.raises(ConfigError):
        RunConfig.load(str(path))
    with pytest.raises(ConfigError):
        RunConfig.load(overrides=['alpha=high'])
    with pytest.raises(ConfigError):
        RunConfig.load(overrides=['method=slim'])
    with pytest.raises(ConfigError):
        RunConfig.load(overrides=['alpha'])


def test_run_config_empty_values(caplog):
    assert RunConfig.load(overrides=['alpha='])['alpha'] is None
    for key in ('seed', 'cutoffs', 'min_df', 'detail'):
        with pytest.raises(ConfigError, match='needs a value'):
            RunConfig.load(overrides=[key + '='])
    assert main(['gradcheck', '--set', 'cutoffs=']) == 1
    assert 'cutoffs needs a value' in caplog.text


def test_run_config_resolves_method_defaults():
    config = RunConfig.load(overrides=['method=rvae', 'alpha=3',
                                       'encoder_widths=50,20'])
    train = config.train_config()
    assert train.alpha == 3.0
    assert train.encoder_widths == (50, 20)
    assert train.decoder_widths == (200,)
    assert train.beta_refine == 0.1
    assert config['cutoffs'] == (5, 10, 15, 20)


def test_ingest_toy_files(toy_files, tmp_path, capsys):
    workdir = tmp_path / 'run'
    assert main(['ingest', '--config', str(toy_files),
                 '--workdir', str(workdir)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[-2] == 'users\titems\tratings\tdimensions\tfeatures'
    assert out[-1] == '3\t4\t6\t4\t8'
    assert load_sbm(str(workdir / 'Y.sbm1')).nnz == 6
    assert (workdir / 'vocabulary.txt').read_text().split() == [
        'fun', 'game', 'great', 'puzzle']
    assert (workdir / 'config.resolved').exists()

    before = {p.name: p.read_bytes() for p in workdir.iterdir()}
    assert main(['ingest', '--config', str(toy_files),
                 '--workdir', str(workdir)]) == 0
    after = {p.name: p.read_bytes() for p in workdir.iterdir()}
    assert before == after


def test_ingest_missing_file(tmp_path):
    assert main(['ingest', '--workdir', str(tmp_path),
                 '--set', 'ratings=' + str(tmp_path / 'nope.tsv')]) == 1
    assert main(['ingest', '--workdir', str(tmp_path)]) == 1


def test_train_logs_per_method(synth_workdir):
    args = ['train', '--workdir', str(synth_workdir)] + _sets(TINY_MODEL)
    assert main(args + ['--set', 'method=fvae']) == 0
    assert (synth_workdir / 'pretrain.log').exists()
    assert not (synth_workdir / 'refine.log').exists()

    assert main(args + ['--set', 'method=rvae']) == 0
    assert (synth_workdir / 'refine.log').exists()
    assert not (synth_workdir / 'pretrain.log').exists()

    params, manifest = load_checkpoint(str(synth_workdir / 'model.cvae1'))
    assert manifest['method'] == 'rvae'
    assert manifest['alpha'] == '4.0'
    assert params.n_items == 40


def test_train_and_eval_are_reproducible(synth_workdir, tmp_path):
    outputs = []
    for name in ('a', 'b'):
        workdir = tmp_path / name
        workdir.mkdir()
        for cache in ('Y.sbm1', 'X.sbm1'):
            (workdir / cache).write_bytes((synth_workdir / cache)
                                          .read_bytes())
        common = ['--workdir', str(workdir)] + _sets(TINY_MODEL)
        assert main(['train'] + common) == 0
        assert main(['eval'] + common) == 0
        outputs.append(((workdir / 'model.cvae1').read_bytes(),
                        (workdir / 'report.tsv').read_bytes()))
    assert outputs[0] == outputs[1]

    report = outputs[0][1].decode().splitlines()
    assert report[0] == 'method\tmetric\tN\tvalue'
    assert len(report) == 1 + 12
    assert all(0.0 <= float(line.split('\t')[3]) <= 1.0
               for line in report[1:])


def test_eval_sweep_and_detail(synth_workdir):
    common = ['--workdir', str(synth_workdir)] + _sets(TINY_MODEL)
    assert main(['train'] + common + ['--set', 'method=rvae']) == 0
    assert main(['eval'] + common + _sets(['sweep_max=5', 'detail=true',
                                           'cutoffs=10'])) == 0
    curve = (synth_workdir / 'curve.tsv').read_text().splitlines()
    assert len(curve) == 1 + 3 * 5
    assert curve[1].startswith('rvae\trec\t1\t')
    detail = (synth_workdir / 'detail.tsv').read_text().splitlines()
    assert detail[0] == 'user\tN\tpre\trec\tap'
    assert len((synth_workdir / 'report.tsv').read_text().splitlines()) == 4


def test_eval_without_checkpoint(synth_workdir):
    assert main(['eval', '--workdir', str(synth_workdir)]) == 1


def test_gradcheck(capsys):
    assert main(['gradcheck']) == 0
    out = capsys.readouterr().out
    assert 'bernoulli\tmax_relative_error' in out
    assert 'gaussian\tmax_relative_error' in out
    assert 'gradcheck\tpass' in out

    assert main(['gradcheck', '--set', 'corrupt_gradient=yes',
                 '--set', 'gradcheck_configs=2']) == 1
    assert 'gradcheck\tFAIL' in capsys.readouterr().out


def test_bench_synth(tmp_path):
    args = ['bench-synth', '--workdir', str(tmp_path)] + _sets(
        TINY_MODEL + TINY_SYNTH[1:] + ['bench_seeds=2', 'train_per_user=3'])
    assert main(args) == 0
    lines = (tmp_path / 'bench.tsv').read_text().splitlines()
    assert lines[0] == 'method\tmean_rec@10\tmin_rec@10\tmax_rec@10'
    assert [line.split('\t')[0] for line in lines[1:]] == [
        'cvae', 'fvae', 'rvae', 'oracle']
    for line in lines[1:]:
        mean, low, high = (float(v) for v in line.split('\t')[1:])
        assert low <= mean <= high


def test_select(synth_workdir):
    args = ['select', '--workdir', str(synth_workdir)] + _sets(
        TINY_MODEL + ['method=rvae', 'alpha_grid=1,2', 'beta_grid=0.5'])
    assert main(args) == 0
    rows = (synth_workdir / 'select.tsv').read_text().splitlines()
    assert len(rows) == 3
    selected = RunConfig.load(str(synth_workdir / 'config.selected'))
    assert selected['alpha'] in (1.0, 2.0)
    assert selected['beta_refine'] == 0.5
    assert np.isfinite(float(rows[1].split('\t')[2]))
