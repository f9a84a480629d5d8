#!/usr/bin/env python3
# Copyright 2026 The htec Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Regenerates data/lexicon.tsv and data/phonemes.txt.

Inputs are the CMU pronouncing dictionary (cmudict.dict from the `cmudict`
wheel) and the English frequency list shipped in the `wordfreq` wheel
(small_en.msgpack.gz). The output lexicon holds the most frequent words plus
every word used by data/templates.txt and data/confusions.tsv, ordered by
frequency rank, with pronunciations mapped onto a 44-symbol inventory.

    python3 scripts/build_lexicon.py --cmudict cmudict.dict \
        --freq small_en.msgpack.gz --size 10000
"""

import argparse
import gzip
import re
from pathlib import Path

import msgpack

CONSONANTS = ["P", "B", "T", "D", "K", "G", "F", "V", "TH", "DH", "S", "Z",
              "SH", "ZH", "HH", "CH", "JH", "M", "N", "NG", "L", "R", "W", "Y"]
VOWELS = ["AA", "AE", "AH", "AO", "AW", "AY", "EH", "ER", "EY", "IH", "IY",
          "OW", "OY", "UH", "UW"]
# Unstressed variants that CMUdict only marks through stress digits.
REDUCED = ["AX", "AXR", "IX", "UX", "EL"]
INVENTORY = CONSONANTS + VOWELS + REDUCED
assert len(INVENTORY) == 44

WORD_RE = re.compile(r"^[a-z][a-z']*$")


DATA_HEADER = (
    "# Copyright 2026 The htec Authors.\n"
    "#\n"
    "# Licensed under the Apache License, Version 2.0 (the \"License\");\n"
    "# you may not use this file except in compliance with the License.\n"
    "# You may obtain a copy of the License at\n"
    "#\n"
    "#     http://www.apache.org/licenses/LICENSE-2.0\n"
    "#\n"
    "# Unless required by applicable law or agreed to in writing, software\n"
    "# distributed under the License is distributed on an \"AS IS\" BASIS,\n"
    "# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.\n"
    "# See the License for the specific language governing permissions and\n"
    "# limitations under the License.\n"
    "#\n")


def map_pronunciation(phones):
    out = []
    i = 0
    while i < len(phones):
        p = phones[i]
        base = p.rstrip("012")
        stress = p[len(base):]
        nxt = phones[i + 1].rstrip("012") if i + 1 < len(phones) else None
        after = phones[i + 2].rstrip("012") if i + 2 < len(phones) else None
        if base == "AH" and stress == "0" and nxt == "L" and (
                after is None or after in CONSONANTS):
            out.append("EL")
            i += 2
            continue
        if stress == "0" and base in ("AH", "ER", "IH", "UW"):
            out.append({"AH": "AX", "ER": "AXR", "IH": "IX", "UW": "UX"}[base])
        else:
            out.append(base)
        i += 1
    return out


def read_cmudict(path):
    entries = {}
    for line in Path(path).read_text(encoding="latin-1").splitlines():
        line = line.split("#")[0].strip()
        if not line:
            continue
        word, *phones = line.split()
        if "(" in word:  # alternate pronunciations; keep the first
            continue
        entries[word.lower()] = phones
    return entries


def read_wordfreq(path):
    buckets = msgpack.unpackb(gzip.open(path).read(), raw=False)
    ranked = []
    for bucket in buckets[1:]:
        ranked.extend(sorted(bucket))
    return ranked


def required_words(data_dir):
    words = set()
    for line in (data_dir / "templates.txt").read_text().splitlines():
        if not line or line.startswith("#"):
            continue
        if line.startswith("@"):
            line = line.split("=", 1)[1]
        for tok in re.split(r"[\s|]+", re.sub(r"\{[a-z_]+\}", " ", line)):
            if WORD_RE.match(tok):
                words.add(tok)
    for line in (data_dir / "confusions.tsv").read_text().splitlines():
        if not line or line.startswith("#"):
            continue
        for tok in line.split("\t")[1:]:
            if WORD_RE.match(tok):
                words.add(tok)
    return words


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cmudict", required=True)
    ap.add_argument("--freq", required=True)
    ap.add_argument("--size", type=int, default=10000)
    ap.add_argument("--data-dir", default=str(Path(__file__).resolve().parent.parent / "data"))
    args = ap.parse_args()

    data_dir = Path(args.data_dir)
    cmu = read_cmudict(args.cmudict)
    ranked = [w for w in read_wordfreq(args.freq) if WORD_RE.match(w) and w in cmu]
    rank = {w: i for i, w in enumerate(ranked)}

    needed = {w for w in required_words(data_dir) if w in cmu}
    chosen = list(needed)
    for w in ranked:
        if len(chosen) >= args.size:
            break
        if w not in needed:
            chosen.append(w)
    chosen.sort(key=lambda w: (rank.get(w, len(rank)), w))

    (data_dir / "phonemes.txt").write_text(
        DATA_HEADER + "# 44 phoneme symbols in id order; id 0 is reserved for the pad symbol\n"
        + "\n".join(INVENTORY) + "\n")
    with open(data_dir / "lexicon.tsv", "w") as f:
        f.write(DATA_HEADER)
        for w in chosen:
            f.write(w + "\t" + " ".join(map_pronunciation(cmu[w])) + "\n")
    missing = sorted(required_words(data_dir) - set(cmu))
    print(f"wrote {len(chosen)} entries; {len(missing)} grammar words left to rules: {' '.join(missing)}")


if __name__ == "__main__":
    main()
