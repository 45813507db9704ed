"""Command-line entry point ``cvae``.

Every command reads a flat ``key = value`` configuration file (``--config``)
with ``--set key=value`` overrides and writes its outputs and its resolved
configuration into the work directory::

    cvae ingest --config games.cfg
    cvae train --config games.cfg --set method=rvae
    cvae eval --config games.cfg --set sweep_max=1000
    cvae gradcheck
    cvae bench-synth --set bench_seeds=5
    cvae select --config games.cfg --set alpha_grid=1,2,4

All randomness derives from the single ``seed`` key.
"""
# License: BSD 3 clause
import argparse
import logging
import os
import sys

import numpy as np

from . import __version__
from .data import (binarize, build_vocabulary, dataset_stats, load_sbm,
                   parse_ratings, parse_reviews, read_stopwords, save_sbm,
                   split_per_user, vectorize_items)
from .evaluate import (evaluate, recall_curve, select_parameters,
                       write_detail, write_report)
from .exceptions import ConfigError
from .synth import SynthSpec, benchmark, generate
from .trainer import METHODS, TrainConfig, fit_method, write_epoch_log
from .utils import derive_rng
from .vae import (ModelConfig, VaeParams, check_elbo_gradient,
                  load_checkpoint, save_checkpoint)

logger = logging.getLogger(__name__)

CHECKPOINT = 'model.cvae1'
RESOLVED = 'config.resolved'


def _parse_bool(value):
    lowered = value.strip().lower()
    if lowered in ('1', 'true', 'yes', 'on'):
        return True
    if lowered in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError("not a boolean: {!r}".format(value))


def _int_list(value):
    return tuple(int(v) for v in value.split(',') if v.strip())


def _float_list(value):
    return tuple(float(v) for v in value.split(',') if v.strip())


def _format(value):
    if isinstance(value, tuple):
        return ','.join(repr(v) if isinstance(v, float) else str(v)
                        for v in value)
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ''
    return str(value)


# key -> (parser, default); None means "method default" for model keys.
SCHEMA = {
    'ratings': (str, None),
    'reviews': (str, None),
    'stopwords': (str, None),
    'workdir': (str, 'cvae-run'),
    'source': (str, 'files'),
    'min_df': (int, 5),
    'method': (str, 'cvae'),
    'seed': (int, 0),
    'latent_dim': (int, None),
    'encoder_widths': (_int_list, None),
    'decoder_widths': (_int_list, None),
    'alpha': (float, None),
    'beta_pretrain': (float, None),
    'beta_refine': (float, None),
    'n_mc_samples': (int, None),
    'epochs_pretrain': (int, None),
    'epochs_refine': (int, None),
    'batch_size': (int, None),
    'learning_rate': (float, None),
    'optimizer': (str, None),
    'cutoffs': (_int_list, (5, 10, 15, 20)),
    'sweep_max': (int, 0),
    'detail': (_parse_bool, False),
    'checkpoint': (str, None),
    'synth_users': (int, 300),
    'synth_items': (int, 200),
    'synth_dims': (int, 400),
    'synth_clusters': (int, 4),
    'synth_density': (float, 0.3),
    'synth_feature_density': (float, 0.2),
    'synth_noise': (float, 0.05),
    'bench_seeds': (int, 5),
    'bench_cutoff': (int, 10),
    'bench_assert_order': (_parse_bool, False),
    'train_per_user': (int, 3),
    'n_jobs': (int, 1),
    'gradcheck_configs': (int, 20),
    'gradcheck_tol': (float, 1e-5),
    'corrupt_gradient': (_parse_bool, False),
    'alpha_grid': (_float_list, (1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0,
                                 9.0, 10.0)),
    'beta_grid': (_float_list, None),
}

MODEL_KEYS = tuple(k for k in TrainConfig.field_names() if k != 'seed')

# Desk-scale networks for the synthetic benchmark. Every method gets the
# same short rating phase; only cvae enters it from pretrained networks.
BENCH_DEFAULTS = dict(latent_dim=20, encoder_widths=(100,),
                      decoder_widths=(100,), epochs_pretrain=300,
                      epochs_refine=30, learning_rate=3e-3)

BETA_GRIDS = {
    'cvae': (0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0),
    'fvae': tuple(round(0.1 * i, 1) for i in range(11)),
    'rvae': tuple(round(0.1 * i, 1) for i in range(11)),
}


class RunConfig:
    """Flat run configuration with typed, known keys."""

    def __init__(self, values=None):
        self.values = {key: default for key, (_, default) in SCHEMA.items()}
        for key, value in (values or {}).items():
            self.set(key, value)

    def set(self, key, raw):
        if key not in SCHEMA:
            raise ConfigError("Unknown configuration key {!r}".format(key))
        parser = SCHEMA[key][0]
        if isinstance(raw, str):
            if not raw.strip():
                if SCHEMA[key][1] is not None:
                    raise ConfigError("{} needs a value".format(key))
                self.values[key] = None
                return
            try:
                raw = parser(raw.strip())
            except ValueError as exc:
                raise ConfigError("Bad value for {}: {}".format(key, exc)) \
                    from None
        self.values[key] = raw

    def __getitem__(self, key):
        return self.values[key]

    @classmethod
    def load(cls, path=None, overrides=()):
        """Read ``path`` (optional) then apply ``key=value`` overrides."""
        config = cls()
        if path is not None:
            with open(path, encoding='utf-8') as f:
                for lineno, line in enumerate(f, start=1):
                    line = line.split('#', 1)[0].strip()
                    if not line:
                        continue
                    key, sep, value = line.partition('=')
                    if not sep:
                        raise ConfigError("{}:{}: expected 'key = value'"
                                          .format(path, lineno))
                    config.set(key.strip(), value)
        for item in overrides:
            key, sep, value = item.partition('=')
            if not sep:
                raise ConfigError("Override {!r} is not key=value"
                                  .format(item))
            config.set(key.strip(), value)
        if config['method'] not in METHODS:
            raise ConfigError("method must be one of {}".format(METHODS))
        return config

    def train_config(self, defaults=None):
        """:class:`TrainConfig` of ``method`` with explicit keys applied."""
        overrides = dict(defaults or {})
        overrides.update({k: self.values[k] for k in MODEL_KEYS
                          if self.values[k] is not None})
        return TrainConfig.for_method(self['method'], seed=self['seed'],
                                      **overrides)

    def synth_spec(self):
        return SynthSpec(n_users=self['synth_users'],
                         n_items=self['synth_items'],
                         n_dims=self['synth_dims'],
                         n_clusters=self['synth_clusters'],
                         density=self['synth_density'],
                         feature_density=self['synth_feature_density'],
                         noise=self['synth_noise'], seed=self['seed'])

    def write(self, path, train_config=None):
        """Write every key, with model keys resolved when known."""
        values = dict(self.values)
        if train_config is not None:
            for key in MODEL_KEYS:
                values[key] = getattr(train_config, key)
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            for key in SCHEMA:
                f.write('{} = {}\n'.format(key, _format(values[key])))


def _workdir(config):
    os.makedirs(config['workdir'], exist_ok=True)
    return config['workdir']


def _path(config, name):
    return os.path.join(config['workdir'], name)


def _load_dataset(config):
    Y = load_sbm(_path(config, 'Y.sbm1'))
    x_path = _path(config, 'X.sbm1')
    X = load_sbm(x_path) if os.path.exists(x_path) else None
    split = split_per_user(Y, derive_rng(config['seed'], 'split'))
    return X, split


def cmd_ingest(config):
    """Parse ratings and reviews (or draw a synthetic set) into SBM1 caches."""
    workdir = _workdir(config)
    if config['source'] == 'synth':
        data = generate(config.synth_spec())
        Y, X = data.Y, data.X
        user_ids = [str(u) for u in range(Y.shape[0])]
        item_ids = [str(i) for i in range(Y.shape[1])]
        terms = ['f{}'.format(j) for j in range(X.shape[1])]
    elif config['source'] == 'files':
        if not config['ratings']:
            raise ConfigError("'ratings' is required for source = files")
        parsed = parse_ratings(config['ratings'])
        user_ids, item_ids = parsed.user_ids, parsed.item_ids
        Y = binarize(parsed.pairs, shape=(len(user_ids), len(item_ids)))
        X, terms = None, []
        if config['reviews']:
            stopwords = read_stopwords(config['stopwords']) \
                if config['stopwords'] else ()
            corpus = parse_reviews(config['reviews'], item_ids)
            vocab = build_vocabulary(corpus, stopwords, config['min_df'])
            X = vectorize_items(corpus, vocab, item_ids)
            terms = vocab.terms
    else:
        raise ConfigError("source must be 'files' or 'synth'")

    save_sbm(os.path.join(workdir, 'Y.sbm1'), Y)
    if X is not None:
        save_sbm(os.path.join(workdir, 'X.sbm1'), X)
    for name, ids in (('users.txt', user_ids), ('items.txt', item_ids),
                      ('vocabulary.txt', terms)):
        with open(os.path.join(workdir, name), 'w', encoding='utf-8',
                  newline='\n') as f:
            f.writelines('{}\n'.format(token) for token in ids)

    stats = dataset_stats(Y, X)
    header = '\t'.join(stats)
    row = '\t'.join(str(v) for v in stats.values())
    with open(os.path.join(workdir, 'stats.tsv'), 'w', encoding='utf-8',
              newline='\n') as f:
        f.write(header + '\n' + row + '\n')
    print(header)
    print(row)
    config.write(os.path.join(workdir, RESOLVED))
    return stats


def cmd_train(config):
    """Train ``method`` on the cached data; write checkpoint and logs."""
    workdir = _workdir(config)
    X, split = _load_dataset(config)
    train_config = config.train_config()
    params, runs = fit_method(config['method'], X, split.train, train_config)

    manifest = {'method': config['method']}
    for key in ('alpha', 'beta_pretrain', 'beta_refine', 'epochs_pretrain',
                'epochs_refine', 'batch_size', 'learning_rate', 'optimizer',
                'n_mc_samples', 'seed'):
        manifest[key] = _format(getattr(train_config, key))
    checkpoint = config['checkpoint'] or os.path.join(workdir, CHECKPOINT)
    save_checkpoint(checkpoint, params, manifest)

    written = set()
    for run in runs:
        name = '{}.log'.format(run.phase)
        write_epoch_log(os.path.join(workdir, name), run)
        written.add(name)
    for name in {'pretrain.log', 'refine.log'} - written:
        # stale log of an earlier run with another method
        stale = os.path.join(workdir, name)
        if os.path.exists(stale):
            os.remove(stale)
    config.write(os.path.join(workdir, RESOLVED), train_config)
    logger.info("Wrote %s", checkpoint)
    return params, runs


def cmd_eval(config, checkpoint=None):
    """Evaluate a checkpoint on the test positives; write ``report.tsv``."""
    workdir = _workdir(config)
    checkpoint = checkpoint or config['checkpoint'] or \
        os.path.join(workdir, CHECKPOINT)
    params, manifest = load_checkpoint(checkpoint)
    _, split = _load_dataset(config)
    method = manifest.get('method', config['method'])

    report = evaluate(params, split, config['cutoffs'], method=method,
                      detail=config['detail'])
    write_report(os.path.join(workdir, 'report.tsv'), report)
    if config['detail']:
        write_detail(os.path.join(workdir, 'detail.tsv'), report)
    if config['sweep_max'] > 0:
        curve = recall_curve(params, split, config['sweep_max'],
                             method=method)
        write_report(os.path.join(workdir, 'curve.tsv'), curve)
    config.write(os.path.join(workdir, RESOLVED))
    for method_, metric, n, value in report.rows():
        print('{}\t{}\t{}\t{:.4f}'.format(method_, metric, n, value))
    return report


def _gradcheck_case(config, index):
    rng = derive_rng(config['seed'], 'gradcheck', index)
    n_items = int(rng.integers(2, 13))
    k = int(rng.integers(1, 5))
    widths = tuple(int(w) for w in rng.integers(1, 9, size=rng.integers(0, 2)))
    model = ModelConfig(latent_dim=k, encoder_widths=widths,
                        decoder_widths=widths,
                        alpha=float(rng.choice([1.0, 3.0])),
                        beta=float(rng.choice([0.0, 0.5, 2.0])),
                        n_mc_samples=int(rng.integers(1, 3)))
    params = VaeParams.initialize(n_items, model, rng)
    for b in params.inference.biases + params.generation.biases:
        b += rng.normal(scale=0.1, size=b.shape)
    batch = (rng.uniform(size=(3, n_items)) < 0.4).astype(np.float64)
    eps = rng.standard_normal((model.n_mc_samples, 3, k))
    return params, batch, model, eps


def cmd_gradcheck(config):
    """Compare analytic ELBO gradients with central differences.

    Both likelihood heads are checked on every random configuration.
    Returns True when the largest relative error stays within tolerance.
    """
    worst = {'bernoulli': 0.0, 'gaussian': 0.0}
    for index in range(config['gradcheck_configs']):
        params, batch, model, eps = _gradcheck_case(config, index)
        for head in worst:
            err = check_elbo_gradient(params, batch, head, model, eps,
                                      corrupt=config['corrupt_gradient'])
            logger.debug("case %d %s: relative error %.3e", index, head, err)
            worst[head] = max(worst[head], err)

    passed = all(err <= config['gradcheck_tol'] for err in worst.values())
    for head, err in worst.items():
        print('{}\tmax_relative_error\t{:.3e}'.format(head, err))
    print('gradcheck\t{}'.format('pass' if passed else 'FAIL'))
    return passed


def cmd_bench_synth(config):
    """cVAE vs fVAE vs rVAE test Rec@N over several synthetic draws."""
    workdir = _workdir(config)
    spec = config.synth_spec()
    explicit = {k: config[k] for k in MODEL_KEYS if config[k] is not None}
    configs = {method: TrainConfig.for_method(
        method, seed=config['seed'], **{**BENCH_DEFAULTS, **explicit})
        for method in METHODS}
    seeds = range(config['seed'], config['seed'] + config['bench_seeds'])
    rows = benchmark(spec, configs, seeds,
                     train_per_user=config['train_per_user'] or None,
                     cutoff=config['bench_cutoff'], n_jobs=config['n_jobs'])

    cutoff = config['bench_cutoff']
    summary = {}
    with open(os.path.join(workdir, 'bench.tsv'), 'w', encoding='utf-8',
              newline='\n') as f:
        f.write('method\tmean_rec@{0}\tmin_rec@{0}\tmax_rec@{0}\n'
                .format(cutoff))
        for method in METHODS + ('oracle',):
            values = np.array([row[method] for row in rows])
            summary[method] = values.mean()
            line = '{}\t{:.4f}\t{:.4f}\t{:.4f}'.format(
                method, values.mean(), values.min(), values.max())
            f.write(line + '\n')
            print(line)
    config.write(os.path.join(workdir, RESOLVED))

    if config['bench_assert_order']:
        ordered = (summary['cvae'] - summary['rvae'] >= 0.05 and
                   summary['cvae'] >= summary['fvae'])
        if not ordered:
            logger.error("Expected cvae > rvae by 0.05 and cvae >= fvae")
        return summary, ordered
    return summary, True


def cmd_select(config):
    """Validation grid over alpha and beta for ``method``."""
    workdir = _workdir(config)
    X, split = _load_dataset(config)
    method = config['method']
    best, table = select_parameters(
        method, config.train_config(), X, split, config['alpha_grid'],
        config['beta_grid'] or BETA_GRIDS[method])
    with open(os.path.join(workdir, 'select.tsv'), 'w', encoding='utf-8',
              newline='\n') as f:
        f.write('alpha\tbeta\tvalid_rec@10\n')
        for alpha, beta, rec in table:
            f.write('{!r}\t{!r}\t{!r}\n'.format(alpha, beta, float(rec)))
    config.write(os.path.join(workdir, 'config.selected'), best)
    print('best\talpha={}\tbeta_pretrain={}\tbeta_refine={}'.format(
        best.alpha, best.beta_pretrain, best.beta_refine))
    return best, table


def build_parser():
    parser = argparse.ArgumentParser(
        prog='cvae', description="Collective variational autoencoder for "
                                 "top-N recommendation with side information.")
    parser.add_argument('--version', action='version', version=__version__)
    sub = parser.add_subparsers(dest='command', required=True)
    for name, help_text in (
            ('ingest', "parse ratings and reviews into matrix caches"),
            ('train', "train cvae / fvae / rvae and write a checkpoint"),
            ('eval', "evaluate a checkpoint on the test positives"),
            ('gradcheck', "check ELBO gradients by finite differences"),
            ('bench-synth', "compare the methods on synthetic data"),
            ('select', "grid search of alpha and beta on validation")):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument('--config', help="flat key = value file")
        cmd.add_argument('--set', dest='overrides', action='append',
                         default=[], metavar='KEY=VALUE',
                         help="override a configuration key")
        cmd.add_argument('--workdir', help="output directory")
        cmd.add_argument('--verbose', '-v', action='store_true',
                         help="log every epoch")
        if name == 'eval':
            cmd.add_argument('--checkpoint', help="checkpoint to evaluate")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s %(name)s %(levelname)s: %(message)s')
    try:
        overrides = list(args.overrides)
        if args.workdir:
            overrides.append('workdir=' + args.workdir)
        config = RunConfig.load(args.config, overrides)

        if args.command == 'ingest':
            cmd_ingest(config)
        elif args.command == 'train':
            cmd_train(config)
        elif args.command == 'eval':
            cmd_eval(config, args.checkpoint)
        elif args.command == 'gradcheck':
            return 0 if cmd_gradcheck(config) else 1
        elif args.command == 'bench-synth':
            return 0 if cmd_bench_synth(config)[1] else 1
        elif args.command == 'select':
            cmd_select(config)
    except (ValueError, OSError) as exc:
        logger.error("%s failed: %s", args.command, exc)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
