"""Reference values for the toy corpus, computed independently of the C++ code.

TF-IDF uses scikit-learn; BM25 and the Dirichlet LM are written out directly
from their textbook definitions. Output: tests/fixtures/toy_oracle.json.
"""
import json
import math
import pathlib
import re

from sklearn.feature_extraction.text import TfidfVectorizer

root = pathlib.Path(__file__).resolve().parents[2]
toy = json.loads((root / "tests/fixtures/toy_corpus.json").read_text())
stop = set((root / "data/stopwords_en.txt").read_text().split())


def tokens(text):
    return re.findall(r"[a-z0-9]+", text.lower())


def content(text):
    return [t for t in tokens(text) if t not in stop]


docs = toy["documents"]
queries = toy["queries"]

# sklearn removes stop words before forming n-grams, as the library does.
vec = TfidfVectorizer(tokenizer=content, preprocessor=None, lowercase=False, token_pattern=None,
                      ngram_range=(1, 2), sublinear_tf=True, smooth_idf=True, norm="l2")
doc_matrix = vec.fit_transform(docs)
query_matrix = vec.transform(queries)
vocab = vec.get_feature_names_out()


def rows(m):
    out = []
    for i in range(m.shape[0]):
        r = m.getrow(i)
        out.append({vocab[j]: float(v) for j, v in zip(r.indices, r.data)})
    return out


cosine = (query_matrix @ doc_matrix.T).toarray().tolist()

filtered = [content(d) for d in docs]
n = len(filtered)
avgdl = sum(len(d) for d in filtered) / n
df = {}
for d in filtered:
    for t in set(d):
        df[t] = df.get(t, 0) + 1
ctf = {}
for d in filtered:
    for t in d:
        ctf[t] = ctf.get(t, 0) + 1
clen = sum(ctf.values())


def bm25(q, d, k1, b):
    s = 0.0
    for t in set(content(q)):
        f = filtered[d].count(t)
        if f == 0:
            continue
        idf = math.log(1 + (n - df[t] + 0.5) / (df[t] + 0.5))
        s += idf * f * (k1 + 1) / (f + k1 * (1 - b + b * len(filtered[d]) / avgdl))
    return s


def lm(q, d, mu):
    s = 0.0
    for t in content(q):
        if t not in ctf:
            continue
        s += math.log((filtered[d].count(t) + mu * ctf[t] / clen) / (len(filtered[d]) + mu))
    return s


out = {
    "idf": {t: float(v) for t, v in zip(vocab, vec.idf_)},
    "doc_vectors": rows(doc_matrix),
    "query_vectors": rows(query_matrix),
    "tfidf_cosine": cosine,
    "bm25": {f"{k1},{b}": [[bm25(q, d, k1, b) for d in range(n)] for q in queries]
             for k1, b in [(1.2, 0.75), (2.0, 0.3)]},
    "lm": {str(mu): [[lm(q, d, mu) for d in range(n)] for q in queries] for mu in [10.0, 1000.0]},
}
(root / "tests/fixtures/toy_oracle.json").write_text(json.dumps(out, indent=1, sort_keys=True) + "\n")
