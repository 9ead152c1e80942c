"""Stage orchestration: run configuration, stage functions, manifest records.

Every stage reads its inputs from the output directory (or from configured
source files), calls the pure compute modules, and writes schema-versioned
artifacts back. All filesystem traffic for the pipeline happens here and in
the serialization helpers; the compute modules stay path-free.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, fields, replace
from itertools import combinations
from pathlib import Path

import numpy as np

from . import __version__
from . import artifacts as art
from . import classify as clf
from . import ontology
from . import pls as plsmod
from . import sentiment as senti
from . import stats as st
from . import textprep
from .aggregate import cbg_sentiment, poi_sentiment, sector_name
from .ingest import (
    CBG_FACTOR_COLUMNS,
    PointOfInterest,
    Review,
    assign_cbg,
    load_cbg_factors,
    load_cbg_polygons,
    load_poi_catalog,
    load_reviews,
)
from .rng import derive_seed
from .textprep import Sentence


class ConfigError(ValueError):
    """Invalid run configuration; reported before any stage executes."""


class StageError(RuntimeError):
    """A stage failed mid-run; the manifest records which one and why."""


# ---------------------------------------------------------------------------
# Run configuration


@dataclass
class RunConfig:
    out: str = "out"
    seed: int = 0
    poi_catalog: str | None = None
    reviews_dir: str | None = None
    cbg_factors: str | None = None
    cbg_polygons: str | None = None
    lexicon: str | None = None
    labels: str | None = None
    external_scores: str | None = None
    external_predictions: str | None = None
    classifier: str = "nb"
    grid: str | None = None
    hyperparameters: dict = field(default_factory=dict)
    cv_folds: int = 5
    poi_min_reviews: int = 10
    cbg_min_reviews: int = 10
    sentiment_mode: str = "label"
    lsva_top_k: int = 30
    pls_max_components: int | None = None
    pls_folds: int = 10
    geojson: bool = True


_PATH_KEYS = (
    "poi_catalog",
    "reviews_dir",
    "cbg_factors",
    "cbg_polygons",
    "lexicon",
    "labels",
    "external_scores",
    "external_predictions",
    "grid",
)
# key -> (minimum, maximum or None)
_INT_RANGES = {
    "seed": (0, None),
    "cv_folds": (2, None),
    "poi_min_reviews": (0, None),
    "cbg_min_reviews": (0, None),
    "lsva_top_k": (1, None),
    "pls_max_components": (1, None),
    "pls_folds": (2, None),
}
_SENTIMENT_MODES = ("label", "expected")


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def build_config(data: dict, base_dir=None, overrides: dict | None = None) -> RunConfig:
    """Validate a raw config mapping into a RunConfig.

    Input paths are resolved relative to ``base_dir`` (the config file's
    directory); the output directory stays relative to the working directory.
    ``overrides`` wins over file values (None entries are ignored).
    """
    problems: list[str] = []
    known = [f.name for f in fields(RunConfig)]
    unknown = sorted(set(data) - set(known))
    if unknown:
        problems.append(f"unknown key(s): {', '.join(unknown)}")
    merged = {k: v for k, v in data.items() if k in known}
    if overrides:
        merged.update({k: v for k, v in overrides.items() if v is not None})

    clean: dict = {}
    for key in _PATH_KEYS + ("out",):
        if key in merged and merged[key] is not None:
            value = merged[key]
            if not isinstance(value, str) or not value:
                problems.append(f"{key} must be a non-empty string")
            else:
                clean[key] = value
    for key, (lo, hi) in _INT_RANGES.items():
        if key in merged and merged[key] is not None:
            value = merged[key]
            if not _is_int(value) or value < lo or (hi is not None and value > hi):
                bound = f">= {lo}" if hi is None else f"in {lo}..{hi}"
                problems.append(f"{key} must be an integer {bound}")
            else:
                clean[key] = value
    if "classifier" in merged:
        value = merged["classifier"]
        choices = tuple(clf.KINDS) + ("external",)
        if value not in choices:
            problems.append(f"classifier must be one of {', '.join(choices)}")
        else:
            clean["classifier"] = value
    if "sentiment_mode" in merged:
        value = merged["sentiment_mode"]
        if value not in _SENTIMENT_MODES:
            problems.append(f"sentiment_mode must be one of {', '.join(_SENTIMENT_MODES)}")
        else:
            clean["sentiment_mode"] = value
    if "geojson" in merged:
        value = merged["geojson"]
        if not isinstance(value, bool):
            problems.append("geojson must be a boolean")
        else:
            clean["geojson"] = value
    if "hyperparameters" in merged and merged["hyperparameters"] is not None:
        value = merged["hyperparameters"]
        if not isinstance(value, dict) or not all(isinstance(k, str) for k in value):
            problems.append("hyperparameters must be an object with string keys")
        elif any(isinstance(v, (dict, list)) for v in value.values()):
            problems.append("hyperparameter values must be scalars")
        else:
            clean["hyperparameters"] = dict(value)
    if clean.get("grid") and clean.get("hyperparameters"):
        problems.append("grid and hyperparameters are mutually exclusive; pick one")

    if problems:
        raise ConfigError("config invalid: " + "; ".join(problems))
    cfg = RunConfig(**clean)
    if base_dir is not None:
        base = Path(base_dir)
        for key in _PATH_KEYS:
            value = getattr(cfg, key)
            if value and not Path(value).is_absolute():
                setattr(cfg, key, str(base / value))
    return cfg


def load_run_config(path, overrides: dict | None = None) -> RunConfig:
    """Read a JSON config file; relative input paths resolve beside it."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return build_config(data, base_dir=path.parent, overrides=overrides)


def config_snapshot(cfg: RunConfig) -> dict:
    return asdict(cfg)


def validate_inputs(cfg: RunConfig, stages) -> None:
    """Check per-stage config requirements and that given paths exist."""
    problems: list[str] = []
    need = set(stages)
    if "ingest" in need:
        if not cfg.poi_catalog:
            problems.append("poi_catalog is required by the ingest stage")
        if not cfg.reviews_dir:
            problems.append("reviews_dir is required by the ingest stage")
    if "train" in need:
        if cfg.classifier == "external":
            problems.append("train does not apply when classifier is 'external'")
        elif not cfg.labels:
            problems.append("labels is required to train a classifier")
    if "classify" in need and cfg.classifier == "external" and not cfg.external_predictions:
        problems.append("external_predictions is required when classifier is 'external'")
    if "pls" in need and not cfg.cbg_factors:
        problems.append("cbg_factors is required by the pls stage")

    for key in _PATH_KEYS:
        value = getattr(cfg, key)
        if not value:
            continue
        p = Path(value)
        if key == "reviews_dir":
            if not p.is_dir():
                problems.append(f"{key}: {value} is not a directory")
        elif not p.is_file():
            problems.append(f"{key}: {value} does not exist")
    if cfg.grid and not problems:
        try:
            clf.parse_grid_file(cfg.grid)
        except ValueError as exc:
            problems.append(f"grid: {exc}")
    if problems:
        raise ConfigError("; ".join(problems))


# ---------------------------------------------------------------------------
# Shared helpers


def _outdir(cfg: RunConfig) -> Path:
    path = Path(cfg.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


_WARNING_CAP = 40


def _report_warnings(*reports) -> list[str]:
    messages: list[str] = []
    for rep in reports:
        for issue in rep.issues:
            messages.append(f"{issue.source}:{issue.row}:{issue.column}: {issue.message}")
        for skip in rep.skipped_reviews:
            detail = ", ".join(f"{k}={v}" for k, v in sorted(skip.items()) if k != "reason")
            messages.append(f"skipped ({skip.get('reason', 'unknown')}): {detail}")
    if len(messages) > _WARNING_CAP:
        messages = messages[:_WARNING_CAP] + [f"... {len(messages) - _WARNING_CAP} more"]
    return messages


def _entry(rows_in: dict, rows_out: dict, drops: dict, outputs: list, info: dict | None = None, warnings: list | None = None) -> dict:
    for key, n_out in rows_out.items():
        dropped = sum(drops.get(key, {}).values())
        if rows_in.get(key, 0) - dropped != n_out:
            raise AssertionError(f"row accounting broken for {key}: {rows_in.get(key)} - {dropped} != {n_out}")
    return {
        "rows_in": rows_in,
        "rows_out": rows_out,
        "drops": drops,
        "outputs": sorted(outputs),
        "info": info or {},
        "warnings": warnings or [],
    }


def _load_lexicon(cfg: RunConfig):
    path = cfg.lexicon or ontology.bundled_lexicon_path()
    return ontology.load_lexicon(path)


def reviews_from_artifact(out: Path) -> list[Review]:
    rows = art.read_artifact(out / "reviews.csv", "reviews")
    return [
        Review(
            review_id=r["review_id"],
            poi_id=r["poi_id"],
            author=r["author"],
            rating=int(r["rating"]),
            likes=int(r["likes"]),
            text=r["text"],
        )
        for r in rows
    ]


def _pois_from_artifact(out: Path) -> list[PointOfInterest]:
    rows = art.read_artifact(out / "pois.csv", "pois")
    return [
        PointOfInterest(
            poi_id=r["poi_id"],
            name=r["name"],
            latitude=float(r["latitude"]),
            longitude=float(r["longitude"]),
            naics_code=r["naics_code"],
            cbg_id=r["cbg_id"] or None,
        )
        for r in rows
    ]


# ---------------------------------------------------------------------------
# Stages


def stage_ingest(cfg: RunConfig) -> dict:
    out = _outdir(cfg)
    pois, poi_report = load_poi_catalog(cfg.poi_catalog)
    reviews, review_report = load_reviews(cfg.reviews_dir, known_poi_ids={p.poi_id for p in pois})
    row_issues = [i for i in review_report.issues if isinstance(i.row, int)]
    file_issues = [i for i in review_report.issues if not isinstance(i.row, int)]

    if cfg.cbg_polygons:
        polygons = load_cbg_polygons(cfg.cbg_polygons)
        pois = [replace(p, cbg_id=assign_cbg(p, polygons)) for p in pois]
    unassigned = sum(1 for p in pois if not p.cbg_id)

    # repr() keeps coordinates lossless for downstream geometry
    poi_rows = [[p.poi_id, p.name, repr(p.latitude), repr(p.longitude), p.naics_code, p.cbg_id or ""] for p in pois]
    art.write_artifact(out / "pois.csv", "pois", ["poi_id", "name", "latitude", "longitude", "naics_code", "cbg_id"], poi_rows)
    review_rows = [[r.review_id, r.poi_id, r.author, r.rating, r.likes, r.text] for r in reviews]
    art.write_artifact(out / "reviews.csv", "reviews", ["review_id", "poi_id", "author", "rating", "likes", "text"], review_rows)

    skipped = len(review_report.skipped_reviews)
    return _entry(
        rows_in={"pois": len(pois) + len(poi_report.issues), "reviews": len(reviews) + len(row_issues) + skipped},
        rows_out={"pois": len(pois), "reviews": len(reviews)},
        drops={
            "pois": {"validation": len(poi_report.issues)},
            "reviews": {"validation": len(row_issues), "unknown_poi": skipped},
        },
        outputs=["pois.csv", "reviews.csv"],
        info={"pois_without_cbg": unassigned, "malformed_review_files": len(file_issues)},
        warnings=_report_warnings(poi_report, review_report),
    )


def stage_filter(cfg: RunConfig) -> dict:
    out = _outdir(cfg)
    reviews = reviews_from_artifact(out)
    lexicon = _load_lexicon(cfg)
    flagged = ontology.filter_reviews(reviews, lexicon)

    flagged_rows = []
    sentence_rows = []
    n_density = 0
    for review, matches in flagged:
        terms = "|".join(sorted({m.entry for m in matches}))
        flagged_rows.append([review.review_id, review.poi_id, terms])
        sentences = textprep.segment_sentences(review.text, review.review_id)
        for sent in ontology.mark_density_sentences(sentences, lexicon):
            n_density += int(sent.density_related)
            sentence_rows.append([sent.review_id, sent.index, "true" if sent.density_related else "false", sent.text])
    art.write_artifact(out / "flagged.csv", "flagged", ["review_id", "poi_id", "matched_terms"], flagged_rows)
    art.write_artifact(out / "sentences.csv", "sentences", ["review_id", "sentence_index", "density_related", "text"], sentence_rows)

    return _entry(
        rows_in={"reviews": len(reviews)},
        rows_out={"reviews": len(flagged)},
        drops={"reviews": {"no_lexicon_match": len(reviews) - len(flagged)}},
        outputs=["flagged.csv", "sentences.csv"],
        info={"lexicon_terms": len(lexicon.entries), "sentences": len(sentence_rows), "density_sentences": n_density},
    )


def _training_grid(cfg: RunConfig) -> dict | None:
    if cfg.grid:
        return clf.parse_grid_file(cfg.grid)
    if cfg.hyperparameters:
        return {k: [v] for k, v in cfg.hyperparameters.items()}
    return None


def stage_train(cfg: RunConfig) -> dict:
    out = _outdir(cfg)
    flagged = art.read_artifact(out / "flagged.csv", "flagged")
    texts = {r.review_id: r.text for r in reviews_from_artifact(out)}
    labels_map, label_report = clf.load_labels(cfg.labels)

    train_ids = [row["review_id"] for row in flagged if row["review_id"] in labels_map]
    if not train_ids:
        raise ValueError("no flagged review has a training label")
    y = [labels_map[rid] for rid in train_ids]
    dtm = textprep.build_doc_term_matrix([texts[rid] for rid in train_ids], doc_ids=train_ids)
    tfidf = textprep.tfidf_transform(dtm)

    search = clf.grid_search(cfg.classifier, tfidf.weights, y, _training_grid(cfg), k=cfg.cv_folds, seed=derive_seed(cfg.seed, "train"))
    clf.write_cv_report(search, out / "cv_report.csv")
    final_spec = replace(search.best_spec, seed=derive_seed(cfg.seed, "model"))
    model = clf.train(final_spec, tfidf.weights, y)
    clf.save_model(model, out / "model.json")
    art.write_json(
        out / "vectorizer.json",
        {
            "vocabulary": dtm.vocabulary,
            "df": [int(v) for v in textprep.doc_frequencies(dtm)],
            "n_docs": len(train_ids),
            "normalized": tfidf.normalized,
        },
    )

    return _entry(
        rows_in={"reviews": len(flagged)},
        rows_out={"reviews": len(train_ids)},
        drops={"reviews": {"unlabeled": len(flagged) - len(train_ids)}},
        outputs=["model.json", "vectorizer.json", "cv_report.csv"],
        info={
            "classifier": cfg.classifier,
            "best_hyperparameters": dict(search.best_spec.hyperparameters),
            "best_mean_cv_accuracy": round(search.best_mean_accuracy, 6),
            "grid_cells": len(search.cells),
            "failed_grid_cells": len(search.errors),
            "vocabulary_size": len(dtm.vocabulary),
        },
        warnings=_report_warnings(label_report),
    )


def stage_classify(cfg: RunConfig) -> dict:
    out = _outdir(cfg)
    flagged = art.read_artifact(out / "flagged.csv", "flagged")
    ids = [row["review_id"] for row in flagged]
    warnings: list[str] = []
    drops: dict = {"reviews": {}}

    rows: list[list] = []
    if cfg.classifier == "external":
        probs, report = clf.load_external_predictions(cfg.external_predictions, known_ids=set(ids))
        warnings = _report_warnings(report)
        labels = clf.labels_from_probs(probs)
        missing = sum(1 for rid in ids if rid not in probs)
        for rid in ids:
            if rid in probs:
                rows.append([rid, art.fmt(probs[rid]), "true" if labels[rid] else "false"])
        drops["reviews"]["missing_prediction"] = missing
        source = "external"
    else:
        model = clf.load_model(out / "model.json")
        vec = art.read_json(out / "vectorizer.json")
        texts = {r.review_id: r.text for r in reviews_from_artifact(out)}
        x = textprep.tfidf_from_stats(
            [texts[rid] for rid in ids], vec["vocabulary"], np.asarray(vec["df"]), vec["n_docs"], vec["normalized"]
        )
        labels, scores = clf.predict(model, x)
        if model.kind == "svm":
            from scipy.special import expit

            # squashed margin, not a calibrated probability; label is authoritative
            scores = expit(scores)
        for rid, prob, label in zip(ids, scores, labels):
            rows.append([rid, art.fmt(float(prob)), "true" if bool(label) else "false"])
        source = model.kind
    art.write_artifact(out / "predictions.csv", "predictions", ["review_id", "prob_true", "label"], rows)

    n_true = sum(1 for r in rows if r[2] == "true")
    return _entry(
        rows_in={"reviews": len(ids)},
        rows_out={"reviews": len(rows)},
        drops=drops,
        outputs=["predictions.csv"],
        info={"source": source, "labeled_true": n_true, "labeled_false": len(rows) - n_true},
        warnings=warnings,
    )


def stage_sentiment(cfg: RunConfig) -> dict:
    out = _outdir(cfg)
    predictions = art.read_artifact(out / "predictions.csv", "predictions")
    true_ids = {r["review_id"] for r in predictions if r["label"] == "true"}
    flagged = art.read_artifact(out / "flagged.csv", "flagged")
    poi_of = {r["review_id"]: r["poi_id"] for r in flagged}
    sentences = [
        Sentence(
            review_id=r["review_id"],
            index=int(r["sentence_index"]),
            text=r["text"],
            density_related=r["density_related"] == "true",
        )
        for r in art.read_artifact(out / "sentences.csv", "sentences")
        if r["review_id"] in true_ids
    ]

    external = None
    warnings: list[str] = []
    if cfg.external_scores:
        known = {(s.review_id, s.index) for s in sentences if s.density_related}
        external, report = senti.load_external_scores(cfg.external_scores, known_keys=known)
        warnings = _report_warnings(report)
    triples, fallbacks = senti.score_sentences(sentences, external)

    score_rows = []
    for s in sentences:
        if s.density_related:
            t = triples[(s.review_id, s.index)]
            score_rows.append(
                [s.review_id, s.index, art.fmt(t.p_negative, 8), art.fmt(t.p_neutral, 8), art.fmt(t.p_positive, 8)]
            )
    art.write_artifact(out / "sentence_scores.csv", "sentence_scores", list(senti.SCORE_COLUMNS), score_rows)

    by_review: dict[str, list[Sentence]] = {}
    for s in sentences:
        by_review.setdefault(s.review_id, []).append(s)
    rows = []
    no_density = 0
    for rid in (r["review_id"] for r in flagged):
        if rid not in by_review:
            continue
        group = by_review[rid]
        value = senti.review_sentiment(group, triples, cfg.sentiment_mode)
        if value is None:
            no_density += 1
            continue
        n_density = sum(1 for s in group if s.density_related)
        rows.append([rid, poi_of[rid], n_density, art.fmt(value)])
    art.write_artifact(
        out / "review_sentiment.csv", "review_sentiment", ["review_id", "poi_id", "n_density_sentences", "sentiment"], rows
    )

    return _entry(
        rows_in={"reviews": len(by_review)},
        rows_out={"reviews": len(rows)},
        drops={"reviews": {"no_density_sentences": no_density}},
        outputs=["sentence_scores.csv", "review_sentiment.csv"],
        info={"mode": cfg.sentiment_mode, "density_sentences_scored": len(score_rows), "external_fallbacks": fallbacks},
        warnings=warnings,
    )


def stage_aggregate(cfg: RunConfig) -> dict:
    out = _outdir(cfg)
    rs_rows = art.read_artifact(out / "review_sentiment.csv", "review_sentiment")
    pois = _pois_from_artifact(out)

    review_values: dict[str, list[float]] = {}
    for r in rs_rows:
        review_values.setdefault(r["poi_id"], []).append(float(r["sentiment"]))
    retained, dropped_pois = poi_sentiment(pois, review_values, cfg.poi_min_reviews)

    poi_cbg = {p.poi_id: p.cbg_id for p in pois if p.cbg_id}
    mapped = [row for row in retained if row.poi_id in poi_cbg]
    cbgs_seen = len({poi_cbg[row.poi_id] for row in mapped})
    cbg_rows, dropped_cbgs = cbg_sentiment(mapped, poi_cbg, cfg.cbg_min_reviews)

    art.write_artifact(
        out / "poi_sentiment.csv",
        "poi_sentiment",
        ["poi_id", "lat", "lon", "naics", "n", "mean"],
        [
            [p.poi_id, art.fmt(p.latitude), art.fmt(p.longitude), p.naics_code, p.n_density_reviews, art.fmt(p.mean_sentiment)]
            for p in retained
        ],
    )
    art.write_artifact(
        out / "cbg_sentiment.csv",
        "cbg_sentiment",
        ["cbg_id", "total_reviews", "weighted_mean"],
        [[c.cbg_id, c.total_reviews, art.fmt(c.weighted_mean)] for c in cbg_rows],
    )
    outputs = ["poi_sentiment.csv", "cbg_sentiment.csv"]
    if cfg.geojson:
        features = [
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [p.longitude, p.latitude]},
                "properties": {
                    "poi_id": p.poi_id,
                    "naics": p.naics_code,
                    "n": p.n_density_reviews,
                    "mean": p.mean_sentiment,
                },
            }
            for p in retained
        ]
        art.write_json(out / "poi_sentiment.geojson", {"type": "FeatureCollection", "features": features})
        outputs.append("poi_sentiment.geojson")

    return _entry(
        rows_in={"pois": len(review_values), "cbgs": cbgs_seen},
        rows_out={"pois": len(retained), "cbgs": len(cbg_rows)},
        drops={
            "pois": {"below_review_threshold": dropped_pois},
            "cbgs": {"at_or_below_review_threshold": dropped_cbgs},
        },
        outputs=outputs,
        info={
            "pois_without_cbg": len(retained) - len(mapped),
            "poi_min_reviews": cfg.poi_min_reviews,
            "cbg_min_reviews": cfg.cbg_min_reviews,
            "cbg_threshold_basis": "density_reviews",
        },
    )


def stage_lsva(cfg: RunConfig) -> dict:
    out = _outdir(cfg)
    rs_rows = art.read_artifact(out / "review_sentiment.csv", "review_sentiment")
    if not rs_rows:
        raise ValueError("review_sentiment.csv has no rows; nothing to rank")
    texts = {r.review_id: r.text for r in reviews_from_artifact(out)}
    naics_of = {r["poi_id"]: r["naics_code"] for r in art.read_artifact(out / "pois.csv", "pois")}
    stoplist = ontology.bundled_stopwords()

    def label_of(value: float) -> senti.SentimentLabel:
        if value > 0:
            return senti.SentimentLabel.POSITIVE
        if value < 0:
            return senti.SentimentLabel.NEGATIVE
        return senti.SentimentLabel.NEUTRAL

    corpus = [
        (texts[r["review_id"]], label_of(float(r["sentiment"])), sector_name(naics_of.get(r["poi_id"], "")))
        for r in rs_rows
    ]
    rows = []
    categories = ["all"] + sorted({sector for _, _, sector in corpus})
    for category in categories:
        subset = corpus if category == "all" else [c for c in corpus if c[2] == category]
        points = st.lsva([c[0] for c in subset], [c[1] for c in subset], top_k=cfg.lsva_top_k, stoplist=stoplist)
        rows.extend(
            [p.word, art.fmt(p.salience), art.fmt(p.valence), p.n_total, p.n_positive, p.n_negative, category]
            for p in points
        )
    art.write_artifact(
        out / "lsva.csv",
        "lsva",
        ["word", "salience", "valence", "n_total", "n_positive", "n_negative", "naics_category"],
        rows,
    )

    return _entry(
        rows_in={"reviews": len(rs_rows)},
        rows_out={"reviews": len(rs_rows)},
        drops={},
        outputs=["lsva.csv"],
        info={"categories": len(categories), "rows": len(rows), "top_k": cfg.lsva_top_k},
    )


def stage_stats(cfg: RunConfig) -> dict:
    out = _outdir(cfg)
    poi_rows = art.read_artifact(out / "poi_sentiment.csv", "poi_sentiment")
    by_sector: dict[str, list[float]] = {}
    for r in poi_rows:
        by_sector.setdefault(sector_name(r["naics"]), []).append(float(r["mean"]))
    eligible = sorted(name for name, values in by_sector.items() if len(values) >= 2)

    rows = []
    for name_a, name_b in combinations(eligible, 2):
        result = st.mann_whitney_u(by_sector[name_a], by_sector[name_b])
        rows.append([name_a, name_b, art.fmt(result.statistic, 1), art.fmt(result.p_value), result.method])
    art.write_artifact(out / "tests.csv", "tests", ["group_a", "group_b", "u_statistic", "p_value", "method"], rows)

    return _entry(
        rows_in={"pairs": len(rows)},
        rows_out={"pairs": len(rows)},
        drops={},
        outputs=["tests.csv"],
        info={"sectors_compared": len(eligible), "sectors_too_small": len(by_sector) - len(eligible)},
    )


def stage_pls(cfg: RunConfig) -> dict:
    out = _outdir(cfg)
    cbg_rows = art.read_artifact(out / "cbg_sentiment.csv", "cbg_sentiment")
    records, factor_report = load_cbg_factors(cfg.cbg_factors)
    by_id = {rec.cbg_id: rec for rec in records}

    joined = [(r["cbg_id"], by_id[r["cbg_id"]], float(r["weighted_mean"])) for r in cbg_rows if r["cbg_id"] in by_id]
    missing = len(cbg_rows) - len(joined)
    if len(joined) < cfg.pls_folds:
        raise ValueError(f"{len(joined)} CBGs with factor rows, need at least pls_folds={cfg.pls_folds}")
    x = np.array([[rec.factors[c] for c in CBG_FACTOR_COLUMNS] for _, rec, _ in joined])
    y = np.array([value for _, _, value in joined])

    max_ncomp = cfg.pls_max_components or min(10, x.shape[1])
    seed = derive_seed(cfg.seed, "pls")
    selection = plsmod.select_components(x, y, max_ncomp, folds=cfg.pls_folds, seed=seed)
    fit = plsmod.fit_standardized(x, y, selection.n_components)
    fit_stats = plsmod.goodness_of_fit(fit, x, y, folds=cfg.pls_folds, seed=seed)
    table = plsmod.jackknife_pvalues(
        x, y, selection.n_components, folds=cfg.pls_folds, seed=seed, columns=list(CBG_FACTOR_COLUMNS)
    )

    art.write_artifact(
        out / "pls_coefficients.csv",
        "pls_coefficients",
        ["predictor", "coefficient", "std_err", "p_value", "ci_lower_2_5", "ci_upper_97_5", "significance", "degenerate"],
        [
            [
                row.name,
                art.fmt(row.coefficient),
                art.fmt(row.std_err),
                art.fmt(row.p_value),
                art.fmt(row.ci_lower),
                art.fmt(row.ci_upper),
                plsmod.significance_stars(row.p_value),
                "true" if row.degenerate else "false",
            ]
            for row in table.rows
        ],
    )
    fit_rows = [
        ["n_components", selection.n_components],
        ["folds", cfg.pls_folds],
        ["r2_full", art.fmt(fit_stats.r2_full)],
        ["r2_cv", art.fmt(fit_stats.r2_cv)],
        ["rmse_full", art.fmt(fit_stats.rmse_full)],
        ["rmse_cv", art.fmt(fit_stats.rmse_cv)],
    ]
    fit_rows += [
        [f"variance_explained_x_pct_comp_{i + 1}", art.fmt(v)] for i, v in enumerate(fit.variance_explained_x)
    ]
    art.write_artifact(out / "pls_fitstats.csv", "pls_fitstats", ["metric", "value"], fit_rows)
    art.write_artifact(
        out / "rmsep_curve.csv",
        "rmsep_curve",
        ["n_components", "rmsep"],
        [[i + 1, art.fmt(v)] for i, v in enumerate(selection.rmsep)],
    )

    return _entry(
        rows_in={"cbgs": len(cbg_rows)},
        rows_out={"cbgs": len(joined)},
        drops={"cbgs": {"missing_factors": missing}},
        outputs=["pls_coefficients.csv", "pls_fitstats.csv", "rmsep_curve.csv"],
        info={
            "n_components": selection.n_components,
            "r2_full": round(fit_stats.r2_full, 6),
            "r2_cv": round(fit_stats.r2_cv, 6),
            "significant_predictors": sum(1 for row in table.rows if row.p_value <= 0.05),
        },
        warnings=_report_warnings(factor_report),
    )


def stage_report(cfg: RunConfig) -> dict:
    from . import report

    out = _outdir(cfg)
    rendered, skipped = report.render_figures(out)
    bundle = sorted(p.name for p in out.glob("*.csv")) + sorted(p.name for p in out.glob("*.json"))
    if (out / "poi_sentiment.geojson").exists():
        bundle.append("poi_sentiment.geojson")

    return _entry(
        rows_in={"figures": len(rendered) + len(skipped)},
        rows_out={"figures": len(rendered)},
        drops={"figures": {"missing_inputs": len(skipped)}},
        outputs=[str(Path("figures") / name) for name in rendered],
        info={"bundle": bundle, "skipped_figures": sorted(skipped)},
    )


# ---------------------------------------------------------------------------
# Drivers

STAGES = {
    "ingest": stage_ingest,
    "filter": stage_filter,
    "train": stage_train,
    "classify": stage_classify,
    "sentiment": stage_sentiment,
    "aggregate": stage_aggregate,
    "lsva": stage_lsva,
    "stats": stage_stats,
    "pls": stage_pls,
    "report": stage_report,
}

RUN_ORDER = ("ingest", "filter", "train", "classify", "sentiment", "aggregate", "lsva", "stats", "pls", "report")


def plan_run(cfg: RunConfig) -> list[str]:
    return [name for name in RUN_ORDER if not (name == "train" and cfg.classifier == "external")]


def execute(cfg: RunConfig, stages) -> dict:
    """Run the named stages in order, recording each in the manifest.

    A failing stage is recorded with its error, the manifest is saved, and a
    StageError is raised; earlier outputs stay on disk.
    """
    stages = list(stages)
    unknown = [name for name in stages if name not in STAGES]
    if unknown:
        raise ConfigError(f"unknown stage(s): {', '.join(unknown)}")
    validate_inputs(cfg, stages)
    out = _outdir(cfg)
    manifest = art.load_manifest(out, __version__, cfg.seed, config_snapshot(cfg))
    manifest["timings_file"] = art.TIMINGS_NAME
    for name in stages:
        started = time.perf_counter()
        try:
            entry = STAGES[name](cfg)
        except Exception as exc:
            art.record_stage(manifest, name, {"status": "failed", "error": f"{type(exc).__name__}: {exc}"})
            art.save_manifest(out, manifest)
            art.update_timings(out, name, time.perf_counter() - started)
            raise StageError(f"stage {name} failed: {exc}") from exc
        entry["status"] = "ok"
        art.record_stage(manifest, name, entry)
        art.save_manifest(out, manifest)
        art.update_timings(out, name, time.perf_counter() - started)
    return manifest


def run_pipeline(cfg: RunConfig) -> dict:
    """Full pipeline per the configured classifier; returns the manifest."""
    return execute(cfg, plan_run(cfg))
