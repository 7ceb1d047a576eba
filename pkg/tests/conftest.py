import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from querysplit import (
    synthesize,
    table_for_query_count,
    train_char_lm,
)
from querysplit.dataio import instance_from_trace
from querysplit.textkit import default_lexicon

# Characters that never collide with any filler string, so rule splitting can
# recover synthetic instances exactly.
_FILLER_CHARS = set("".join(default_lexicon().texts()))
SAFE_CHARS = [
    c
    for c in "去北京的高铁票价多少天气怎么样订间酒店查询餐厅附近电影推荐音乐新闻路线医院学校火车飞机明早晚"
    if c not in _FILLER_CHARS and not c.isspace()
]
assert len(SAFE_CHARS) >= 30


def random_subqueries(rng: random.Random, count=None, min_len=3, max_len=9):
    count = count or rng.randint(2, 4)
    return [
        "".join(rng.choice(SAFE_CHARS) for _ in range(rng.randint(min_len, max_len)))
        for _ in range(count)
    ]


@pytest.fixture(scope="session")
def scorer_lm():
    rng = random.Random(99)
    corpus = ["".join(rng.choice(SAFE_CHARS) for _ in range(20)) for _ in range(50)]
    return train_char_lm(corpus, n=3, smoothing=1.0)


def synthesize_clean(rng, scorer, count=None):
    """One synthetic instance whose fillers are all non-empty and whose
    sub-queries contain no filler substrings (exact round-trip territory)."""
    queries = random_subqueries(rng, count)
    table = table_for_query_count(len(queries)).without_none()
    return synthesize(queries, table, scorer, rng)


def make_fixture_instances(n, seed, scorer, rewrite_every=3):
    """Synthetic instances; every ``rewrite_every``-th follow-up is rewritten
    by prefixing a marker entity, so both EM subsets are populated."""
    rng = random.Random(seed)
    instances = []
    for index in range(n):
        trace = synthesize_clean(rng, scorer)

        def completion(raws, index=index):
            completed = [raws[0]]
            for j, raw in enumerate(raws[1:], start=1):
                if (index + j) % rewrite_every == 0:
                    completed.append("北京" + raw)
                else:
                    completed.append(raw)
            return completed

        instances.append(
            instance_from_trace(trace, f"fix-{seed}-{index:05d}", completion=completion)
        )
    return instances
