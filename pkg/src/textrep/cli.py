"""Command line pipeline driver.

Every stage of the experiment is a subcommand sharing one TOML config file:
preprocess, train-w2v, train-lda, lda-sweep, train-twe, train-vae, encode,
evaluate, and pipeline (which runs the full chain).  Stages communicate
through files in the output directory, tracked in a manifest of content
hashes so a stage can verify that its prerequisites exist and are the bytes
the earlier stage produced.

Exit codes: 0 success, 1 internal error, 2 input error, 3 missing or stale
prerequisite artifact.  All stages are deterministic for a fixed config and
seed: rerunning any stage rewrites byte-identical artifacts.
"""

import argparse
import csv
import os
import shutil
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

import numpy as np

from . import corpus as corpus_mod
from .classify import (
    KnnClassifier,
    LinearSvm,
    RandomForest,
    accuracy_scorer,
    evaluate_representation,
    write_report_csv,
)
from .cnnvae import CnnVae, documents_to_matrices
from .errors import ConfigError, MissingArtifactError, StaleArtifactError, TextRepError
from .io import (
    dump_json,
    load_json,
    load_matrix,
    load_stopwords,
    load_tagged_corpus,
    save_embeddings_text,
    save_matrix,
    save_tagged_corpus,
    save_vocabulary,
    sha256_file,
)
from .lda import GibbsLda, select_topic_count
from .twe import TopicalWordEmbedding, encode_document_matrix
from .word2vec import Word2Vec

SPLITS = ("train", "test", "validation")

DEFAULTS = {
    "corpus": "",
    "stopwords": "",
    "output_dir": "out",
    "seed": 0,
    "embedding_mode": "word2vec",
    "preprocess": {
        "max_vocab": 10000,
        "pad_len": 100,
        "fractions": [50 / 65, 10 / 65, 5 / 65],
    },
    "word2vec": {
        "dim": 128,
        "window": 5,
        "negatives": 5,
        "epochs": 5,
        "learning_rate": 0.025,
        "model": "cbow",
    },
    "lda": {
        "n_topics": 20,
        "alpha": 0.0,
        "beta": 0.01,
        "sweeps": 500,
        "burn_in": 100,
    },
    "lda_sweep": {
        "k_values": [2, 3, 4, 5],
        "heldout_fraction": 0.01,
        "sweeps": 100,
    },
    "twe": {
        "window": 5,
        "negatives": 5,
        "epochs": 5,
        "learning_rate": 0.025,
        "warm_start": True,
    },
    "vae": {
        "kernel_widths": [3, 4, 5],
        "filters_per_width": 42,
        "latent_dim": 128,
        "hidden_dim": 256,
        "learning_rate": 0.001,
        "epochs": 30,
        "dropout_keep": 0.5,
        "batch_size": 32,
    },
    "evaluate": {
        "runs": 5,
        "test_fraction": 0.25,
        "knn": {"k": 5},
        "rf": {"n_trees": 50},
        "svm": {"epochs": 20, "regularization": 0.001},
    },
}


# -- configuration --------------------------------------------------------


def _deep_merge(base, override):
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def _parse_set(item):
    if "=" not in item:
        raise ConfigError(f"--set expects key=value, got {item!r}")
    key, raw = item.split("=", 1)
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    node = value
    for part in reversed(key.split(".")):
        node = {part: node}
    return node


def load_config(path, overrides=()):
    """Merge defaults, the TOML file, --set overrides and the environment.

    Relative paths in the file resolve against the config file's directory.
    The TEXTREP_OUTPUT_DIR environment variable overrides output_dir.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        user = tomllib.load(fh)
    cfg = _deep_merge(DEFAULTS, user)
    for item in overrides:
        cfg = _deep_merge(cfg, _parse_set(item))
    base = path.resolve().parent
    for key in ("corpus", "stopwords", "output_dir"):
        if cfg[key] and not Path(cfg[key]).is_absolute():
            cfg[key] = str(base / cfg[key])
    env_out = os.environ.get("TEXTREP_OUTPUT_DIR")
    if env_out:
        cfg["output_dir"] = env_out
    return cfg


# -- artifact manifest ----------------------------------------------------


class Workspace:
    """Output directory with a manifest mapping stages to hashed files."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.root = Path(cfg["output_dir"])
        self.root.mkdir(parents=True, exist_ok=True)
        self.manifest_path = self.root / "manifest.json"

    def path(self, name):
        return self.root / name

    def _manifest(self):
        if self.manifest_path.is_file():
            return load_json(self.manifest_path)
        return {"stages": {}}

    def record(self, stage, filenames):
        manifest = self._manifest()
        manifest["stages"][stage] = {
            name: sha256_file(self.path(name)) for name in sorted(filenames)
        }
        dump_json(manifest, self.manifest_path)

    def require(self, stage, needed_by):
        """Verify a prerequisite stage's files exist and match their hashes."""
        stage_files = self._manifest()["stages"].get(stage)
        if stage_files is None:
            raise MissingArtifactError(
                f"{needed_by} requires the {stage} stage; run it first"
            )
        for name, digest in stage_files.items():
            target = self.path(name)
            if not target.is_file():
                raise MissingArtifactError(f"{needed_by}: missing artifact {target}")
            if sha256_file(target) != digest:
                raise StaleArtifactError(
                    f"{needed_by}: artifact {target} does not match its manifest hash; "
                    f"rerun the {stage} stage"
                )


# -- helpers shared by stages ---------------------------------------------


def _load_vocab(ws):
    from .io import load_vocabulary

    return load_vocabulary(ws.path("vocab.txt"))


def _load_split(ws, split):
    X = load_matrix(ws.path(f"encoded.{split}.bin"))
    y = load_matrix(ws.path(f"labels.{split}.bin"))
    return X, y


def _word_matrices(ws, splits):
    vectors = load_matrix(ws.path("w2v.input.bin"))
    return [documents_to_matrices(_load_split(ws, s)[0], vectors) for s in splits]


def _twe_matrices(ws, splits, pad_len):
    from .twe import TopicalEmbeddings

    emb = TopicalEmbeddings(
        word_vectors=load_matrix(ws.path("twe.words.bin")),
        topic_vectors=load_matrix(ws.path("twe.topics.bin")),
        output_vectors=load_matrix(ws.path("twe.output.bin")),
    )
    out = []
    for split in splits:
        tagged = load_tagged_corpus(ws.path(f"lda.tags.{split}.txt"))
        out.append(
            np.stack([encode_document_matrix(doc, emb, pad_len) for doc in tagged]).astype(
                np.float32
            )
        )
    return out


# -- stages ---------------------------------------------------------------


def cmd_preprocess(cfg):
    ws = Workspace(cfg)
    corpus_path = Path(cfg["corpus"])
    if not corpus_path.is_file():
        raise ConfigError(f"corpus file not found: {corpus_path}")
    docs = [
        corpus_mod.LabeledDocument(label=label, tokens=tokens)
        for label, tokens in corpus_mod.load_labeled_corpus(corpus_path)
    ]
    stopwords = load_stopwords(cfg["stopwords"]) if cfg["stopwords"] else frozenset()
    pre = cfg["preprocess"]
    vocab = corpus_mod.build_vocabulary(
        [d.tokens for d in docs], max_vocab=pre["max_vocab"], stopwords=stopwords
    )
    split = corpus_mod.split_corpus(docs, fractions=pre["fractions"], seed=cfg["seed"])
    label_ids, classes = corpus_mod.encode_labels([d.label for d in docs])
    class_index = {c: i for i, c in enumerate(classes)}

    written = ["vocab.txt", "classes.json"]
    save_vocabulary(ws.path("vocab.txt"), vocab)
    dump_json({"classes": classes, "pad_len": pre["pad_len"]}, ws.path("classes.json"))
    for name in SPLITS:
        part = getattr(split, name)
        X = corpus_mod.encode_corpus([d.tokens for d in part], vocab, pre["pad_len"])
        y = np.asarray([class_index[d.label] for d in part], dtype=np.int32)
        save_matrix(ws.path(f"encoded.{name}.bin"), X)
        save_matrix(ws.path(f"labels.{name}.bin"), y)
        written += [
            f"encoded.{name}.bin",
            f"encoded.{name}.bin.json",
            f"labels.{name}.bin",
            f"labels.{name}.bin.json",
        ]
    ws.record("preprocess", written)
    print(f"preprocess: vocabulary {vocab.size} entries, "
          f"splits {[len(getattr(split, s)) for s in SPLITS]}")
    return 0


def cmd_train_w2v(cfg):
    ws = Workspace(cfg)
    ws.require("preprocess", "train-w2v")
    vocab = _load_vocab(ws)
    X, _ = _load_split(ws, "train")
    est = Word2Vec(
        **{k: v for k, v in cfg["word2vec"].items()},
        vocab_size=vocab.size,
        random_state=cfg["seed"],
    ).fit(X)
    save_matrix(ws.path("w2v.input.bin"), est.embeddings_.input_vectors)
    save_matrix(ws.path("w2v.output.bin"), est.embeddings_.output_vectors)
    save_embeddings_text(ws.path("w2v.vectors.txt"), vocab.tokens, est.embeddings_.input_vectors)
    ws.record(
        "w2v",
        ["w2v.input.bin", "w2v.input.bin.json", "w2v.output.bin", "w2v.output.bin.json",
         "w2v.vectors.txt"],
    )
    print(f"train-w2v: {vocab.size} x {cfg['word2vec']['dim']} vectors, "
          f"final epoch loss {est.epoch_losses_[-1]:.2f}" if est.epoch_losses_ else "train-w2v: done")
    return 0


def cmd_train_lda(cfg):
    ws = Workspace(cfg)
    ws.require("preprocess", "train-lda")
    vocab = _load_vocab(ws)
    lda_cfg = cfg["lda"]
    est = GibbsLda(
        n_topics=lda_cfg["n_topics"],
        alpha=lda_cfg["alpha"] or None,
        beta=lda_cfg["beta"],
        sweeps=lda_cfg["sweeps"],
        burn_in=lda_cfg["burn_in"],
        vocab_size=vocab.size,
        random_state=cfg["seed"],
    )
    X, _ = _load_split(ws, "train")
    est.fit(X)
    save_matrix(ws.path("lda.phi.bin"), est.phi_)
    save_matrix(ws.path("lda.theta.bin"), est.theta_)
    written = ["lda.phi.bin", "lda.phi.bin.json", "lda.theta.bin", "lda.theta.bin.json"]
    tags = est.tag_corpus(mode="sample")
    save_tagged_corpus(
        ws.path("lda.tags.train.txt"), [d[:, 0] for d in tags], [d[:, 1] for d in tags]
    )
    written.append("lda.tags.train.txt")
    for split in ("test", "validation"):
        Xs, _ = _load_split(ws, split)
        tags = est.tag_corpus(Xs, mode="argmax")
        save_tagged_corpus(
            ws.path(f"lda.tags.{split}.txt"), [d[:, 0] for d in tags], [d[:, 1] for d in tags]
        )
        written.append(f"lda.tags.{split}.txt")
    ws.record("lda", written)
    print(f"train-lda: {lda_cfg['n_topics']} topics, {est.sweeps_done_} sweeps, "
          f"train perplexity {est.perplexity():.2f}")
    return 0


def cmd_lda_sweep(cfg):
    ws = Workspace(cfg)
    ws.require("preprocess", "lda-sweep")
    vocab = _load_vocab(ws)
    X, labels = _load_split(ws, "train")
    sweep_cfg = cfg["lda_sweep"]
    ev = cfg["evaluate"]
    # accuracy curve rates theta rows as features for the same SVM evaluate uses
    svm = LinearSvm(
        epochs=ev["svm"]["epochs"],
        regularization=ev["svm"]["regularization"],
        random_state=cfg["seed"],
    )
    selected, curve = select_topic_count(
        X,
        sweep_cfg["k_values"],
        heldout_fraction=sweep_cfg["heldout_fraction"],
        random_state=cfg["seed"],
        scorer=accuracy_scorer(svm, test_fraction=ev["test_fraction"], seed=cfg["seed"]),
        labels=labels,
        sweeps=sweep_cfg["sweeps"],
        burn_in=min(cfg["lda"]["burn_in"], sweep_cfg["sweeps"]),
        beta=cfg["lda"]["beta"],
        vocab_size=vocab.size,
    )
    with open(ws.path("lda_sweep.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["k", "perplexity", "accuracy"])
        for k, ppl, acc in curve:
            writer.writerow([k, f"{ppl:.6f}", f"{acc:.6f}"])
    dump_json({"selected_k": selected}, ws.path("lda_sweep.json"))
    ws.record("lda_sweep", ["lda_sweep.csv", "lda_sweep.json"])
    print(f"lda-sweep: perplexity minimized at k={selected}")
    return 0


def cmd_train_twe(cfg):
    ws = Workspace(cfg)
    ws.require("lda", "train-twe")
    ws.require("w2v", "train-twe")
    vocab = _load_vocab(ws)
    tagged = load_tagged_corpus(ws.path("lda.tags.train.txt"))
    twe_cfg = dict(cfg["twe"])
    warm = twe_cfg.pop("warm_start")
    est = TopicalWordEmbedding(
        dim=cfg["word2vec"]["dim"],
        n_topics=cfg["lda"]["n_topics"],
        vocab_size=vocab.size,
        init_word_vectors=load_matrix(ws.path("w2v.input.bin")) if warm else None,
        random_state=cfg["seed"],
        **twe_cfg,
    ).fit(tagged)
    emb = est.embeddings_
    save_matrix(ws.path("twe.words.bin"), emb.word_vectors)
    save_matrix(ws.path("twe.topics.bin"), emb.topic_vectors)
    save_matrix(ws.path("twe.output.bin"), emb.output_vectors)
    save_embeddings_text(ws.path("twe.words.txt"), vocab.tokens, emb.word_vectors)
    topic_names = [f"topic{k}" for k in range(emb.n_topics)]
    save_embeddings_text(ws.path("twe.topics.txt"), topic_names, emb.topic_vectors)
    ws.record(
        "twe",
        ["twe.words.bin", "twe.words.bin.json", "twe.topics.bin", "twe.topics.bin.json",
         "twe.output.bin", "twe.output.bin.json", "twe.words.txt", "twe.topics.txt"],
    )
    print(f"train-twe: {emb.word_vectors.shape[0]} words + {emb.n_topics} topics at dim {emb.dim}")
    return 0


def _vae_stage_name(embedding, variant):
    return f"vae.{embedding}.{variant}"


def cmd_train_vae(cfg, variant=None, embedding=None):
    ws = Workspace(cfg)
    variant = variant or "vae"
    embedding = embedding or cfg["embedding_mode"]
    if embedding not in ("word2vec", "twe"):
        raise ConfigError(f"embedding mode must be 'word2vec' or 'twe', got {embedding!r}")
    ws.require("preprocess", "train-vae")
    pad_len = cfg["preprocess"]["pad_len"]
    dim = cfg["word2vec"]["dim"]
    if embedding == "word2vec":
        ws.require("w2v", "train-vae")
        train_m, val_m = _word_matrices(ws, ("train", "validation"))
        input_cols = dim
    else:
        ws.require("twe", "train-vae")
        ws.require("lda", "train-vae")
        train_m, val_m = _twe_matrices(ws, ("train", "validation"), pad_len)
        input_cols = 2 * dim
    est = CnnVae(
        variant=variant,
        input_rows=pad_len,
        input_cols=input_cols,
        kernel_widths=tuple(cfg["vae"]["kernel_widths"]),
        filters_per_width=cfg["vae"]["filters_per_width"],
        latent_dim=cfg["vae"]["latent_dim"],
        hidden_dim=cfg["vae"]["hidden_dim"],
        learning_rate=cfg["vae"]["learning_rate"],
        epochs=cfg["vae"]["epochs"],
        dropout_keep=cfg["vae"]["dropout_keep"],
        batch_size=cfg["vae"]["batch_size"],
        random_state=cfg["seed"],
    ).fit(train_m, validation=val_m)
    stage = _vae_stage_name(embedding, variant)
    est.save(ws.path(f"model.{stage}.json"))
    est.write_training_log(ws.path(f"model.{stage}.log.csv"))
    ws.record(stage, [f"model.{stage}.json", f"model.{stage}.json.blob", f"model.{stage}.log.csv"])
    last = est.log_[-1] if est.log_ else {"total": float("nan")}
    print(f"train-vae: {stage}, {cfg['vae']['epochs']} epochs, final loss {last['total']:.4f}")
    return 0


REPRESENTATIONS = ("w2v-avg", "cnn-ae", "cnn-vae", "twe-cnn-vae")


def cmd_encode(cfg):
    ws = Workspace(cfg)
    ws.require("preprocess", "encode")
    ws.require("w2v", "encode")
    for stage in ("vae.word2vec.ae", "vae.word2vec.vae", "vae.twe.vae"):
        ws.require(stage, "encode")
    pad_len = cfg["preprocess"]["pad_len"]
    labels = np.concatenate([_load_split(ws, s)[1] for s in SPLITS])
    save_matrix(ws.path("labels.all.bin"), labels.astype(np.int32))
    written = ["labels.all.bin", "labels.all.bin.json"]

    vectors = load_matrix(ws.path("w2v.input.bin"))
    avg = []
    for split in SPLITS:
        X, _ = _load_split(ws, split)
        mask = (X != corpus_mod.PAD_ID)[:, :, None]
        summed = (vectors[X] * mask).sum(axis=1)
        counts = np.maximum(mask.sum(axis=1), 1)
        avg.append(summed / counts)
    save_matrix(ws.path("rep.w2v-avg.bin"), np.concatenate(avg).astype(np.float64))

    word_m = _word_matrices(ws, SPLITS)
    twe_m = _twe_matrices(ws, SPLITS, pad_len)
    for rep, stage, parts in (
        ("cnn-ae", "vae.word2vec.ae", word_m),
        ("cnn-vae", "vae.word2vec.vae", word_m),
        ("twe-cnn-vae", "vae.twe.vae", twe_m),
    ):
        model = CnnVae.load(ws.path(f"model.{stage}.json"))
        encoded = np.concatenate([model.transform(m) for m in parts])
        save_matrix(ws.path(f"rep.{rep}.bin"), encoded.astype(np.float64))
    for rep in REPRESENTATIONS:
        written += [f"rep.{rep}.bin", f"rep.{rep}.bin.json"]
    ws.record("encode", written)
    print(f"encode: {labels.size} documents x {len(REPRESENTATIONS)} representations")
    return 0


def _classifiers(cfg):
    ev = cfg["evaluate"]
    return [
        ("knn", KnnClassifier(k=ev["knn"]["k"])),
        ("rf", RandomForest(n_trees=ev["rf"]["n_trees"], random_state=cfg["seed"])),
        ("svm", LinearSvm(
            epochs=ev["svm"]["epochs"],
            regularization=ev["svm"]["regularization"],
            random_state=cfg["seed"],
        )),
    ]


def cmd_evaluate(cfg):
    ws = Workspace(cfg)
    ws.require("encode", "evaluate")
    ev = cfg["evaluate"]
    labels = load_matrix(ws.path("labels.all.bin")).astype(np.int64)
    vectors = {rep: load_matrix(ws.path(f"rep.{rep}.bin")) for rep in REPRESENTATIONS}
    # grid 1 compares the three base representations; grid 2 compares the
    # embedding fed to the variational encoder
    cells = [(rep, rep) for rep in ("w2v-avg", "cnn-ae", "cnn-vae")]
    cells += [("word2vec+cnn-vae", "cnn-vae"), ("twe+cnn-vae", "twe-cnn-vae")]
    reports = []
    for rep_name, rep_key in cells:
        for clf_name, clf in _classifiers(cfg):
            reports.append(
                evaluate_representation(
                    vectors[rep_key],
                    labels,
                    clf,
                    runs=ev["runs"],
                    test_fraction=ev["test_fraction"],
                    seed=cfg["seed"],
                    representation_name=rep_name,
                    classifier_name=clf_name,
                )
            )
    write_report_csv(reports, ws.path("report.csv"))
    dump_json({"reports": reports}, ws.path("report.json"))
    ws.record("evaluate", ["report.csv", "report.json"])
    for r in reports:
        acc = r["metrics"]["accuracy"]
        print(f"evaluate: {r['representation']:>18} x {r['classifier']:<4} "
              f"accuracy {acc['mean']:.4f} +/- {acc['stddev']:.4f}")
    return 0


def cmd_pipeline(cfg):
    cmd_preprocess(cfg)
    cmd_train_w2v(cfg)
    cmd_train_lda(cfg)
    cmd_lda_sweep(cfg)
    cmd_train_twe(cfg)
    cmd_train_vae(cfg, variant="vae", embedding="word2vec")
    cmd_train_vae(cfg, variant="ae", embedding="word2vec")
    cmd_train_vae(cfg, variant="vae", embedding="twe")
    cmd_encode(cfg)
    cmd_evaluate(cfg)
    return 0


# -- entry point ----------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="textrep",
        description="Text representation pipeline: embeddings, topics, CNN-VAE, evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (
        "preprocess", "train-w2v", "train-lda", "lda-sweep", "train-twe",
        "train-vae", "encode", "evaluate", "pipeline",
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the TOML config file")
        p.add_argument(
            "--set", action="append", default=[], metavar="KEY=VALUE",
            help="override a config value, e.g. --set lda.n_topics=30",
        )
        if name == "train-vae":
            p.add_argument("--variant", choices=("vae", "ae"), default=None)
            p.add_argument("--embedding", choices=("word2vec", "twe"), default=None)
    return parser


COMMANDS = {
    "preprocess": cmd_preprocess,
    "train-w2v": cmd_train_w2v,
    "train-lda": cmd_train_lda,
    "lda-sweep": cmd_lda_sweep,
    "train-twe": cmd_train_twe,
    "encode": cmd_encode,
    "evaluate": cmd_evaluate,
    "pipeline": cmd_pipeline,
}

EXIT_CODES = {"input": 2, "dependency": 3, "internal": 1}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        if args.command == "train-vae":
            return cmd_train_vae(cfg, variant=args.variant, embedding=args.embedding)
        return COMMANDS[args.command](cfg)
    except TextRepError as err:
        print(f"error ({err.category}): {err}", file=sys.stderr)
        return EXIT_CODES.get(err.category, 1)
    except Exception as err:  # noqa: BLE001 - map anything unexpected to exit 1
        print(f"error (internal): {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
