"""Score synthetic prediction files and render the full metric suite.

Three mock responders answer every instance: one replays the planted gold,
one marks everything abnormal, one answers with a code fence (a parse
error).  Their score records flow into the aggregate report tables.

Run:  python demos/05_score_predictions.py
"""

import json

from abduce import render_formula
from abduce.generator import GenParams, generate_batch
from abduce.scoring import (
    aggregate_report,
    parse_prediction_line,
    render_table,
    score_batch,
)

records = []
for tid in ("T1", "T2"):
    params = GenParams(scenario="full", theory_id=tid, global_seed=99)
    records.extend(generate_batch(params, 3, dataset_path="demo.jsonl"))
instances = {r.id: r for r in records}

predictions = []
for rec in records:
    gold_line = json.dumps({"formula": render_formula(rec.gold.formula), "description": "gold replay"})
    top_line = json.dumps({"formula": "(or (P x) (not (P x)))", "description": "everything abnormal"})
    for model, line in (("replay", gold_line), ("mark-all", top_line), ("fenced", f"```{gold_line}```")):
        predictions.append(parse_prediction_line(line, instance_id=rec.id, model_id=model))

scores = score_batch(predictions, instances)
for rec in scores[:6]:
    print(f"{rec.instance_id} {rec.model_id:8s} class={rec.failure_class:15s} "
          f"cost={rec.train_cost} gap={rec.train_gap} delta={rec.delta_gap}")

report = aggregate_report(scores)
print()
print(render_table("train_summary", report["train_summary"]))
print(render_table("holdout_conditional", report["holdout_conditional"]))
print(render_table("failure_modes", report["failure_modes"]))
print(render_table("beats_gold", report["beats_gold"]))
