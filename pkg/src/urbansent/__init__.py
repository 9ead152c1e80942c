"""Urban-density sentiment analytics from point-of-interest review corpora.

The package is organized as a pipeline of pure compute modules plus a CLI
that owns all file I/O:

    ingest     parse POI catalogs, review files, CBG factor tables, polygons
    ontology   urban-density lexicon, term matching, review filtering, curation
    textprep   sentence segmentation, tokenization, TF-IDF
    classify   five classical text classifiers, cross-validation, grid search
    sentiment  sentence sentiment triples, labeling, review-level scores
    aggregate  POI- and CBG-level sentiment rollups, NAICS histograms
    stats      land-use mix entropy, salience-valence analysis, rank tests
    pls        SIMPLS partial least squares with jack-knife p-values
    cli        stage orchestration, run manifest, report bundle
"""

__version__ = "0.1.0"
