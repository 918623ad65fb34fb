"""Commentator: a self-hostable annotation platform for code-mixed text.

Supports CSV corpus upload, machine pre-annotation, parallel multi-user
annotation of token-level language identification (LID), token-level POS
tagging and sentence-level matrix language identification (MLI), plus
post-annotation agreement (Cohen's kappa) and code-mixing (CMI) analytics
with filtered CSV export.
"""

__version__ = "0.1.0"

from commentator.domain import (  # noqa: F401
    DEFAULT_MLI_TAGS,
    LID_TAGS,
    LID_TAGSET,
    POS_TAGS,
    POS_TAGSET,
    TASK_LID,
    TASK_MLI,
    TASK_POS,
    TASKS,
    MatrixAnnotation,
    Sentence,
    TagSet,
    Token,
    TokenAnnotation,
    cycle_tag,
    mli_tagset,
    tokenize,
    validate_annotation,
)
