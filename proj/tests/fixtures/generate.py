#!/usr/bin/env python3
"""Regenerates the scripted-mock and evaluation fixtures under tests/fixtures.

Outputs are committed; rerun after editing data/tcfd_data.json.
"""

import json
import pathlib
import random

ROOT = pathlib.Path(__file__).resolve().parent
DATA = ROOT.parent.parent / "data" / "tcfd_data.json"

PUBLISHED_SCORES = {
    "f1_zero": [0] * 11,
    "f2_jpm_2021": [60, 60, 70, 60, 70, 50, 90, 70, 50, 75, 20],
    "f3_shell": [20, 40, 40, 60, 40, 40, 70, 60, 50, 70, 60],
    "f4_ubs": [60, 60, 85, 90, 80, 60, 90, 85, 40, 70, 50],
}


def conformity_key(rec):
    # Only the conformity prompt has the requirements block right after the element.
    return f"<CRITICAL_ELEMENT>: {rec}\n\nThese are the <REQUIREMENTS>"


def write_json(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n")


def scripts(questions):
    for name, scores in PUBLISHED_SCORES.items():
        rules = []
        for q, s in zip(questions, scores):
            reply = {"ANALYSIS": f"Scripted assessment for question {q['index']}.", "SCORE": s}
            rules.append({"contains": conformity_key(q["recommendation"]), "response": json.dumps(reply)})
        write_json(ROOT / "scripts" / f"{name}.json", {"rules": rules})

    q5 = questions[4]
    write_json(ROOT / "scripts" / "q5_malformed.json",
               {"rules": [{"contains": conformity_key(q5["recommendation"]),
                           "response": "I cannot rate this disclosure."}]})


SENTENCES = [
    "The board reviews climate-related risks at each quarterly meeting",
    "Management assigned a chief sustainability officer to coordinate climate work",
    "Physical risks include flooding of coastal facilities and extreme heat",
    "Transition risks include carbon pricing and shifting customer preferences",
    "Scenario analysis covered a 1.5 degree pathway and a 3 degree pathway",
    "Climate risk is integrated into the enterprise risk management framework",
    "Scope 1 and Scope 2 emissions fell by twelve percent compared with 2019",
    "The company targets net zero operational emissions by 2040",
    "Underwriting guidelines restrict new coverage for thermal coal mining",
    "Renewable electricity supplied sixty percent of office consumption",
    "Catastrophe models were updated to reflect recent wildfire losses",
    "Executive remuneration includes an emissions reduction component",
    "The audit committee oversees the assurance of sustainability metrics",
    "Investment portfolios are screened against a climate transition scorecard",
    "Water stress was assessed for all data centres in the operating region",
    "Suppliers are asked to disclose emissions through an annual survey",
]

FABRICATIONS = [
    "and the company has already eliminated all Scope 3 emissions",
    "which regulators certified as fully compliant last year",
    "while doubling renewable investment to five billion dollars",
    "as confirmed by an independent climate court ruling",
]


def corpus(name, n, content_plan, source_plan, seed):
    """content_plan: both-supported, both-hallucinated, A-supported/B-hallucinated,
    A-hallucinated/B-supported counts and how many disputes resolve to supported.
    source_plan: honest among final-supported, and source disputes among agreed."""
    rng = random.Random(seed)
    agree_s, agree_h, a_s_b_h, a_h_b_s, disputes_to_s = content_plan
    honest, source_disputes = source_plan
    assert agree_s + agree_h + a_s_b_h + a_h_b_s == n

    rows = []  # (final_content, A_content, B_content)
    rows += [("supported", "supported", "supported")] * agree_s
    rows += [("hallucinated", "hallucinated", "hallucinated")] * agree_h
    disputed = [("?", "supported", "hallucinated")] * a_s_b_h + [("?", "hallucinated", "supported")] * a_h_b_s
    resolved = []
    for i, (_, a, b) in enumerate(disputed):
        resolved.append(("supported" if i < disputes_to_s else "hallucinated", a, b))
    rows += resolved

    supported_idx = [i for i, r in enumerate(rows) if r[0] == "supported"]
    honest_set = set(supported_idx[:honest])
    agreed_supported = [i for i in range(agree_s)]
    source_dispute_set = set(agreed_supported[:source_disputes])

    order = list(range(n))
    rng.shuffle(order)

    answers, annotations = [], []
    for pos, i in enumerate(order):
        final_c, a_c, b_c = rows[i]
        final_s = "not_applicable" if final_c == "hallucinated" else ("honest" if i in honest_set else "hallucinated")
        aid = f"{name}-{pos + 1:03d}"

        picks = rng.sample(range(len(SENTENCES)), 3)
        context = [{"source": 10 * pos + k, "page": 1 + (10 * pos + k) // 4, "text": SENTENCES[p] + "."}
                   for k, p in enumerate(picks)]
        text = SENTENCES[picks[0]] + "."
        if final_c == "hallucinated":
            text = SENTENCES[picks[0]] + " " + rng.choice(FABRICATIONS) + "."
        cited = [context[0]["source"]] if final_s != "hallucinated" else [context[2]["source"] + 10000]
        answers.append({"answer_id": aid, "answer": text, "sources": cited, "context": context})

        def label(c, s):
            return s if c == "supported" else "not_applicable"

        a_s = label(a_c, final_s if final_c == "supported" else "honest")
        b_s = label(b_c, final_s if final_c == "supported" else "honest")
        if i in source_dispute_set:
            a_s, b_s = "honest", "hallucinated"
        annotations.append({"answer_id": aid, "annotator_id": "ann-a", "content_label": a_c, "source_label": a_s})
        annotations.append({"answer_id": aid, "annotator_id": "ann-b", "content_label": b_c, "source_label": b_s})
        if (a_c, a_s) != (b_c, b_s):
            annotations.append({"answer_id": aid, "annotator_id": "ann-c", "content_label": final_c,
                                "source_label": final_s, "adjudicator": True})

    out = ROOT / "eval"
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{name}_answers.jsonl").write_text("".join(json.dumps(a) + "\n" for a in answers))
    (out / f"{name}_annotations.jsonl").write_text("".join(json.dumps(a) + "\n" for a in annotations))


def main():
    questions = json.loads(DATA.read_text())["questions"]
    scripts(questions)
    # 92 supported / 69 honest; primaries agree on 96 of 110 content labels.
    corpus("chatgpt", 110, (84, 12, 8, 6, 8), (69, 3), seed=7)
    # 76 supported / 55 honest; weaker agreement.
    corpus("gpt4", 110, (64, 13, 17, 16, 12), (55, 2), seed=11)


if __name__ == "__main__":
    main()
