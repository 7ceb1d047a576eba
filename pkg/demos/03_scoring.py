"""Score predicted sub-query lists against references.

Covers the sentence metrics (BLEU-4, ROUGE-L, METEOR on character tokens),
the split-accuracy and exact-match family, and median aggregation across
runs. Run with:  python3 demos/03_scoring.py
"""

from querysplit import (
    bleu4,
    evaluate,
    make_instance,
    median_report,
    meteor_lite,
    rouge_l,
)

print("== sentence-level surface metrics ==")
pred = "查下下周三杭州是什么天气"
ref = "查一下下周三杭州是什么天气"
print(f"pred: {pred}")
print(f"ref:  {ref}")
print(f"BLEU-4:  {bleu4(pred, ref):.4f}")
print(f"ROUGE-L: {rouge_l(pred, ref):.4f}")
print(f"METEOR:  {meteor_lite(pred, ref):.4f}")

print("\n== instance-level evaluation ==")
instances = [
    # perfect split and completion
    make_instance(
        ["查天气", "下周三的航班"], ["查天气", "下周三的航班"], [False, True]
    ),
    # wrong second completion
    make_instance(
        ["查天气", "航班"], ["查天气", "下周三的航班"], [False, True]
    ),
    # split into too few pieces
    make_instance(["查天气下周三的航班"], ["查天气", "下周三的航班"], [False, True]),
]
report = evaluate(instances)
print(report.table_row(label="demo run"))
print(f"SACC counts splits only: {report.sacc:.3f}")
print(f"EM over complete/rewritten/all: "
      f"{report.em_complete:.3f} / {report.em_rewritten:.3f} / {report.em_average:.3f}")

print("\n== median over repeated runs ==")
runs = [report, evaluate(instances[:2]), evaluate(instances[1:])]
print(median_report(runs).table_row(label="median of 3"))
