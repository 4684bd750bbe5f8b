#!/usr/bin/env python3
"""Feature-table oracle for the unigram keyword scorer.

Written against plain regex tokenization so it shares no code path with the
C++ extractor. Prints one row per candidate term: term, TF, casing, position,
frequency, relatedness, sentence spread, term score and keyword score, sorted
by keyword score ascending. The values are frozen into tests/unit/test_text.cpp.
"""
import math
import re
import statistics
import sys
from pathlib import Path

FIXTURE = (
    "Radio-controlled planes are popular with hobbyists. "
    "A Futaba radio transmitter sends signals to the plane, and servos move the control surfaces. "
    "Many FPV pilots build foam planes before flying faster FPV models."
)


def load_stopwords():
    path = Path(__file__).resolve().parents[2] / "data" / "stopwords_en.txt"
    return {l.strip() for l in path.read_text().splitlines() if l.strip() and not l.startswith("#")}


def table(text):
    stop = load_stopwords()
    sentences = [s for s in re.split(r"(?<=[.!?])\s+", text.strip()) if s]
    tf, upper, acro, sent_ids = {}, {}, {}, {}
    left, right = {}, {}
    for sid, sent in enumerate(sentences):
        sent = sent.rstrip(".!?")
        first = True
        for chunk in re.split(r"[,;:()\"]", sent):
            words = re.findall(r"[A-Za-z0-9]+(?:'[A-Za-z]+)?", chunk)
            prev = None
            for w in words:
                t = w.lower()
                tf[t] = tf.get(t, 0) + 1
                sent_ids.setdefault(t, set()).add(sid)
                if len(w) > 1 and w.isupper():
                    acro[t] = acro.get(t, 0) + 1
                elif w[0].isupper() and not first:
                    upper[t] = upper.get(t, 0) + 1
                first = False
                if prev is not None:
                    left.setdefault(t, []).append(prev)
                    right.setdefault(prev, []).append(t)
                prev = t

    def candidate(t):
        return t not in stop and len(t) >= 3 and not any(c.isdigit() for c in t)

    cands = sorted(t for t in tf if candidate(t))
    ctf = [tf[t] for t in cands]
    mean, std = statistics.mean(ctf), statistics.pstdev(ctf)
    max_tf = max(tf.values())
    rows = []
    for t in cands:
        l, r = left.get(t, []), right.get(t, [])
        dl = len(set(l)) / len(l) if l else 0.0
        dr = len(set(r)) / len(r) if r else 0.0
        rel = 1.0 + (dl + dr) * tf[t] / max_tf
        case = max(upper.get(t, 0), acro.get(t, 0)) / (1.0 + math.log(tf[t]))
        pos = math.log(math.log(3.0 + statistics.median(sorted(sent_ids[t]))))
        freq = tf[t] / (mean + std)
        spread = len(sent_ids[t]) / len(sentences)
        s = (rel * pos) / (case + freq / rel + spread / rel)
        kw = s / (tf[t] * (1.0 + s))
        rows.append((kw, t, tf[t], case, pos, freq, rel, spread, s))
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows


if __name__ == "__main__":
    text = sys.argv[1] if len(sys.argv) > 1 else FIXTURE
    for kw, t, tfv, case, pos, freq, rel, spread, s in table(text):
        print(f'{{"{t}", {tfv}, {case:.17g}, {pos:.17g}, {freq:.17g}, {rel:.17g}, {spread:.17g}, {s:.17g}, {kw:.17g}}},')
