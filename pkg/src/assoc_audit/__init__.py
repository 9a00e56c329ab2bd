"""Group-association bias audits for embedding spaces and model outputs."""

from .brightness import (
    BrightnessSeries,
    CropRect,
    RasterImage,
    group_series_aggregate,
    load_image,
    mean_crop_brightness,
    percent_change_to_peak,
    series_from_manifest,
)
from .bundle import EmbeddingBundle, EmbeddingRecord, filter_by_group, load_bundle, save_bundle
from .charts import render_series_svg
from .errors import AuditError, DataError, DegenerateStatisticError
from .ranking import (
    CorrelationReport,
    RankingConfig,
    RankingTable,
    balanced_subsample,
    correlate_external,
    ranking_survey,
    top_k_counts,
)
from .records import (
    ExternalStatTable,
    ResponseRecord,
    StimulusSet,
    default_stimulus_set,
    load_external_table,
    load_responses,
    load_stimulus_set,
)
from .stats import (
    DOWNSAMPLE_EQUALIZE,
    POOLED_STD,
    UNION_STD,
    EffectSizeResult,
    association_score,
    association_scores,
    cosine,
    eat,
    interpret_effect_size,
    mean_diff_permutation_p,
    ols_r2,
    pearson,
    permutation_p,
    pooled_std,
    sc_eat,
    welch_t,
)
from .tally import (
    Lexicon,
    TallyResult,
    answer_distribution,
    default_lexicon,
    load_lexicon,
    mention_rate,
    yes_rate,
)

__version__ = "0.1.0"
