"""Stratified survey design: strata, optimum allocation, sampling.

Tables are plain dicts mapping column names to lists, with None for
missing cells.
"""

from ._core import (
    StratDesignError,
    add_influence_column,
    allocate_wave,
    estimator_variance,
    extract_sampled_ids,
    format_csv,
    merge_strata,
    optimum_allocation,
    parse_csv,
    read_csv,
    run_cli,
    sample_strata,
    split_strata,
    stratum_counts,
    summarize_strata,
    wright_allocation,
)

__all__ = [
    "StratDesignError",
    "add_influence_column",
    "allocate_wave",
    "estimator_variance",
    "extract_sampled_ids",
    "format_csv",
    "main",
    "merge_strata",
    "optimum_allocation",
    "parse_csv",
    "read_csv",
    "run_cli",
    "sample_strata",
    "split_strata",
    "stratum_counts",
    "summarize_strata",
    "wright_allocation",
]


def main(argv=None):
    """Console entry point mirroring the stratdesign binary."""
    import sys

    code, out, err = run_cli(list(sys.argv[1:] if argv is None else argv))
    sys.stdout.write(out)
    sys.stderr.write(err)
    return code
