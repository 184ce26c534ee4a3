#!/usr/bin/env python3
# Copyright 2026 The frameind Authors
# SPDX-License-Identifier: Apache-2.0
"""Writes the expected prompt bytes for every template variant.

Independent of the C++ renderer: plain string formatting over the
published templates. Re-run only when the fixtures below change.
"""
import json
import pathlib

HERE = pathlib.Path(__file__).resolve().parent / "prompts"

TEMPLATES = {
    "en-framenet": 'The FrameNet frame evoked by "{verb}" in "{sentence}" is',
    "en-plain": 'The frame evoked by "{verb}" in "{sentence}" is',
    "ja-framenet": '"{sentence}" 内の "{verb}" が喚起するFrameNetフレームは',
}

EN = {
    "target": ("en-t", "He lost the gold medal by just .02 points.", "lost", "lose", None),
    "demos": [
        ("en-d1", "He lost his gold medal at the restaurant.", "lost", "lose", "Losing"),
        ("en-d2", "She won the final by two points.", "won", "win", "Finish_competition"),
        ("en-d3", "The team beat its rivals in the semifinal.", "beat", "beat", "Beat_opponent"),
    ],
}
JA = {
    "target": ("ja-t", "彼はわずか0.02ポイント差で金メダルを逃した。", "逃した", "逃す", None),
    "demos": [
        ("ja-d1", "彼はレストランで金メダルをなくした。", "なくした", "なくす", "Losing"),
        ("ja-d2", "彼女は決勝で二点差で勝った。", "勝った", "勝つ", "Finish_competition"),
        ("ja-d3", "チームは準決勝でライバルを破った。", "破った", "破る", "Beat_opponent"),
    ],
}


def instance(row, language):
    iid, sentence, verb, lemma, frame = row
    begin = sentence.index(verb)  # code points
    return {
        "id": iid,
        "lemma": lemma,
        "sentence": sentence,
        "target_begin": begin,
        "target_end": begin + len(verb),
        "gold_frame": frame,
        "language": language,
    }


def render(variant, row):
    return TEMPLATES[variant].format(verb=row[2], sentence=row[1])


def main():
    cases = []
    for variant in TEMPLATES:
        fixture = JA if variant.startswith("ja") else EN
        language = variant[:2]
        for shots in (0, 3):
            demos = fixture["demos"][:shots]
            text = "".join(render(variant, d) + " " + d[4] + "\n" for d in demos)
            text += render(variant, fixture["target"])
            name = f"{variant}-{shots}shot.txt"
            (HERE / name).write_bytes(text.encode("utf-8"))
            cases.append({
                "file": name,
                "language": language,
                "framenet_token": variant.endswith("framenet"),
                "target": instance(fixture["target"], language),
                "demos": [instance(d, language) for d in demos],
            })
    (HERE / "cases.json").write_text(
        json.dumps(cases, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
