"""Method-level bug-fix untangling: mining, gold sets, LLM verdicts, metrics."""

from ._core import (
    UntangleError,
    __version__,
    classification_metrics,
    cliffs_delta,
    code_metrics,
    cohens_kappa,
    denoise,
    embed,
    evaluate,
    gold_set,
    gradient_check,
    mine,
    parse_verdict,
    rank_sum_test,
    render_prompt,
    run_cli,
)

VARIANTS = ("diff-only", "diff-message", "fewshot", "cot", "fewshot-cot")
