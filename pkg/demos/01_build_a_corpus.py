"""Build a synthetic multi-intent corpus from single-intent sub-queries.

Each instance is assembled by sampling connectives from the built-in
junction tables, generating ten candidates, and keeping the one a character
n-gram model finds most fluent. Run with:  python3 demos/01_build_a_corpus.py
"""

import random
import tempfile
from pathlib import Path

from querysplit import (
    builtin_table,
    instance_from_trace,
    load,
    save,
    stats,
    synthesize,
    table_for_query_count,
    train_char_lm,
)

SOURCE_GROUPS = [
    ["去北京的高铁票价多少", "明天天气怎么样", "订一间酒店"],
    ["查一下去上海的航班", "附近有什么好吃的餐厅"],
    ["推荐一部动作电影", "附近的电影院在哪", "帮我买两张票"],
    ["放一首周杰伦的歌", "声音调大一点", "定个八点的闹钟", "明天路况怎么样"],
]

print("== the sampling table ==")
table = builtin_table(4)
for junction in range(4):
    support = [(f or "(none)", table.probability(junction, f)) for f in table.support(junction)]
    head = ", ".join(f"{f}:{p:.4f}" for f, p in support[:4])
    print(f"junction {junction}: {head}, ... ({len(support)} choices)")

print("\n== scoring model ==")
lm = train_char_lm([q for group in SOURCE_GROUPS for q in group], n=3, smoothing=1.0)
print(f"order-3 character model, vocabulary of {len(lm.vocabulary)} symbols")

print("\n== one instance in detail ==")
rng = random.Random(7)
trace = synthesize(SOURCE_GROUPS[0], table_for_query_count(3), lm.perplexity, rng)
for index, (candidate, ppl) in enumerate(trace.pool):
    marker = " <== kept" if index == trace.chosen_index else ""
    print(f"  candidate {index}: ppl={ppl:7.2f}  {candidate}{marker}")
print(f"fillers: {trace.fillers}")
print(f"gold segments: {trace.segments()}")

print("\n== a small corpus ==")
instances = []
for index, group in enumerate(SOURCE_GROUPS):
    trace = synthesize(group, table_for_query_count(len(group)), lm.perplexity, rng)
    instances.append(instance_from_trace(trace, f"demo-{index:03d}"))

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "corpus.jsonl"
    save(instances, path)
    reloaded = load(path)
    print(f"saved and reloaded {len(reloaded)} instances; round-trip ok: {reloaded == instances}")

report = stats(instances)
print(f"mean sub-query count: {report.mean_subquery_count:.2f}")
print(f"mean aggregated length: {report.mean_aggregated_chars:.1f} characters")
