"""Execute experiment plans and write their artifacts.

Layout of an output directory::

    plan.json                      canonical runs and plan hash
    comparison.csv                 one row per variant, seed-averaged
    summary.json                   same numbers as JSON
    <variant>/seed_<seed>/
        loss.csv                   step,loss
        rank.csv                   epoch,rank_inflated,rank_delta
        summary.json               final_loss, auc, run hash
        timing.txt                 wall-clock seconds (not reproducible)
        delta_w.lrma               learned weight update snapshot
        adapter/                   w0.lrma, b.lrma, a.lrma, adapter.json

Everything except ``timing.txt`` is byte-identical across reruns.
"""

import statistics
from dataclasses import dataclass
from pathlib import Path

from .adapters import AdapterVariant, delta_w, init_adapter
from .io import dump_json, save_adapter, save_matrix, write_rows_csv
from .trainer import auc_reduction, loss_auc, make_task, train


@dataclass
class RunResult:
    config: object
    task: object
    initial_state: object
    state: object
    log: object

    @property
    def auc(self):
        return loss_auc(self.log)

    @property
    def final_loss(self):
        return self.log.final_loss


def run_single(config, track_rank=True):
    """Train one configuration; returns a :class:`RunResult`."""
    task_seed, _, order_seed = config.derived_seeds()
    task = make_task(config.task, task_seed)
    state = init_adapter(task.w0, config.adapter)
    trained, log = train(
        state,
        task,
        config.optimizer,
        config.schedule,
        epochs=config.epochs,
        batch=config.batch,
        seed=order_seed,
        track_rank=track_rank,
    )
    return RunResult(config=config, task=task, initial_state=state, state=trained, log=log)


def run_dir(output_dir, config):
    return Path(output_dir) / config.adapter.variant.value / f"seed_{config.seed}"


def write_run(directory, result):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    log = result.log
    write_rows_csv(directory / "loss.csv", ("step", "loss"), log.loss_rows())
    write_rows_csv(
        directory / "rank.csv", ("epoch", "rank_inflated", "rank_delta"), log.rank_rows()
    )
    dump_json(directory / "summary.json", {
        "variant": result.config.adapter.variant.value,
        "seed": result.config.seed,
        "run_hash": result.config.run_hash(),
        "final_loss": log.final_loss,
        "auc": result.auc,
        "steps": len(log.step_losses),
    })
    (directory / "timing.txt").write_text(f"wall_seconds={log.wall_seconds:.6f}\n")
    save_matrix(directory / "delta_w.lrma", delta_w(result.state))
    save_adapter(directory / "adapter", result.state)


def summarize(results):
    """Seed-averaged final loss and AUC per variant, with AUC reduction
    relative to ``lora`` when it is part of the sweep."""
    by_variant = {}
    for res in results:
        by_variant.setdefault(res.config.adapter.variant.value, []).append(res)
    rows = {}
    for variant, group in by_variant.items():
        rows[variant] = {
            "n_seeds": len(group),
            "final_loss_mean": statistics.fmean(r.final_loss for r in group),
            "auc_mean": statistics.fmean(r.auc for r in group),
        }
    ref = rows.get(AdapterVariant.LORA.value)
    for variant, row in rows.items():
        row["auc_reduction_vs_lora_pct"] = (
            auc_reduction(row["auc_mean"], ref["auc_mean"]) if ref else None
        )
    return rows


def write_summary(output_dir, plan, rows):
    output_dir = Path(output_dir)
    header = ("variant", "n_seeds", "final_loss_mean", "auc_mean", "auc_reduction_vs_lora_pct")
    write_rows_csv(
        output_dir / "comparison.csv",
        header,
        [(v, *(row[h] if row[h] is not None else "" for h in header[1:])) for v, row in rows.items()],
    )
    dump_json(output_dir / "summary.json", {
        "name": plan.name,
        "plan_hash": plan.plan_hash(),
        "variants": rows,
    })


def run_plan(plan, output_dir=None, log=None):
    """Run every configuration of ``plan`` sequentially and write results."""
    output_dir = Path(output_dir or plan.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    dump_json(output_dir / "plan.json", {
        "name": plan.name,
        "plan_hash": plan.plan_hash(),
        "runs": [{"run_hash": c.run_hash(), **c.canonical()} for c in plan.runs],
    })
    results = []
    for config in plan.runs:
        result = run_single(config)
        write_run(run_dir(output_dir, config), result)
        if log is not None:
            log(f"{config.adapter.variant.value} seed={config.seed}: "
                f"final_loss={result.final_loss:.6g} auc={result.auc:.6g}")
        results.append(result)
    rows = summarize(results)
    write_summary(output_dir, plan, rows)
    return results, rows
