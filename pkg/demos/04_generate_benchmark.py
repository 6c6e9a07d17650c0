"""Generate a hardened mini-benchmark, audit it, and render a prompt.

The generator plants a gold rule, accepts only nontrivial worlds where the
gold is near-optimal, and keeps adding adversarial worlds until no shortcut
competitor matches the gold's performance; accepted instances then pass a
cheater screen and a from-scratch audit, and holdout worlds are attached
with deterministic hash seeding.

Run:  python demos/04_generate_benchmark.py
"""

import tempfile
from pathlib import Path

from abduce import render_formula
from abduce.dataset import load_dataset, save_dataset, save_generation_log
from abduce.generator import GenParams, audit_instance, generate_batch
from abduce.prompts import render_prompt

out_dir = Path(tempfile.mkdtemp(prefix="abduce-demo-"))
dataset_path = out_dir / "mini.jsonl"

params = GenParams(scenario="partial", theory_id="T2", global_seed=2024)
records = generate_batch(params, 3, dataset_path=str(dataset_path))
save_dataset(records, str(dataset_path), [params], global_seed=2024)
save_generation_log(records, str(dataset_path) + ".log.jsonl")

for rec in records:
    print(f"{rec.id}: {len(rec.train_worlds)} train worlds, "
          f"{len(rec.holdout_worlds)} holdouts, gold {render_formula(rec.gold.formula)}")
    print(f"   per-world opt {rec.train_opt_costs} | gold cost {rec.train_gold_costs}"
          f" | cheater margin {rec.provenance['cheater_margin']}")
    rounds = rec.provenance["elimination_log"]
    print(f"   competitor elimination: {[len(r['survivors']) for r in rounds]} survivors per round")
    violations = audit_instance(rec, params)
    print(f"   audit: {'clean' if not violations else violations}")

# Round-trip through the on-disk format is byte-stable.
reloaded = load_dataset(str(dataset_path))
print(f"\nreloaded {len(reloaded)} instances from {dataset_path}")

bundle = render_prompt(records[0])
head = "\n".join(bundle.user_prompt.splitlines()[:6])
print(f"\nprompt head for {records[0].id}:\n{head}\n...")
print(f"(system prompt: {bundle.system_prompt.splitlines()[0]!r})")
