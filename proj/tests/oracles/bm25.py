"""Okapi BM25 table for the 20-document fixture (k1=1.2, b=0.75,
idf = ln(1 + (N - df + 0.5) / (df + 0.5)), lowercased word terms, query
terms deduplicated, ties by id)."""
import json
import math
import pathlib
import re

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"
K1, B = 1.2, 0.75

spec = json.loads((FIXTURES / "bm25_corpus.json").read_text())
docs = spec["docs"]


def terms(text):
    return [t.lower() for t in re.findall(r"\w+", text)]


doc_terms = [terms(d["text"]) for d in docs]
N = len(docs)
avgdl = sum(len(t) for t in doc_terms) / N
df = {}
for ts in doc_terms:
    for t in set(ts):
        df[t] = df.get(t, 0) + 1

results = {}
for q in spec["queries"]:
    qterms = set(terms(q))
    rows = []
    for d, ts in zip(docs, doc_terms):
        score = 0.0
        for t in qterms:
            f = ts.count(t)
            if f == 0:
                continue
            idf = math.log(1 + (N - df[t] + 0.5) / (df[t] + 0.5))
            score += idf * f * (K1 + 1) / (f + K1 * (1 - B + B * len(ts) / avgdl))
        rows.append((d["id"], score))
    rows.sort(key=lambda r: (-r[1], r[0]))
    results[q] = [[i, s] for i, s in rows[: spec["K"]]]

(FIXTURES / "expected_bm25.json").write_text(json.dumps(results, indent=2) + "\n")
print(json.dumps({q: r[:3] for q, r in results.items()}, indent=1))
