from .metrics import EditScores, distinct_n, edit_metrics, lcs_length, rouge_l, set_f1, set_iou
from .report import (
    MetricReport,
    SystemOutput,
    ViolationRates,
    evaluate_pairs,
    format_report,
    report_json,
    violation_rates,
)
from .trees import (
    ActionTree,
    TreeNode,
    build_action_tree,
    extract_verbs,
    load_verb_lexicon,
    nted,
    tree_edit_distance,
)
