"""External reference results used for side-by-side reporting only.

These numbers are printed next to a run's measured hits@1 for context;
nothing in the test suite asserts against them.
"""

# best published full-data configuration on the Chinese question set
REFERENCE_WEBQSP_ZH = 74.37

# zero-shot per-language references (all-languages finetuning row) and
# their average
REFERENCE_QALD_M = {
    "fa": 48.50,
    "de": 55.10,
    "ro": 52.03,
    "it": 54.27,
    "ru": 44.44,
    "fr": 53.44,
    "nl": 52.89,
    "es": 53.47,
    "hi": 46.95,
    "pt": 41.52,
    "pt_BR": 60.61,
}
REFERENCE_QALD_M_AVG = 51.20


def format_reference_report(measured: dict[str, float]) -> str:
    """Render measured hits@1 beside the reference values.

    `measured` maps row labels to hits@1 fractions in [0, 1]; labels are
    matched case-insensitively against known reference rows, unknown
    labels print without a reference column.
    """
    lines = [f"{'row':<14} {'measured':>9}  {'reference':>9}"]
    refs = {"webqsp-zh": REFERENCE_WEBQSP_ZH, "qald-m-avg": REFERENCE_QALD_M_AVG}
    refs.update({k.lower(): v for k, v in REFERENCE_QALD_M.items()})
    for label, value in measured.items():
        reference = refs.get(label.lower())
        ref_text = f"{reference:9.2f}" if reference is not None else "        -"
        lines.append(f"{label:<14} {100.0 * value:9.2f}  {ref_text}")
    return "\n".join(lines)
