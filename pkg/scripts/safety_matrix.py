"""Sweep authorities x malicious count x behavior x seed and tabulate agreement."""

import click

from newschain.network_sim import Behavior, run_simulation, standard_config

BEHAVIORS = (Behavior.TAMPER, Behavior.FORGE_SIG, Behavior.EQUIVOCATE, Behavior.OUT_OF_TURN, Behavior.WITHHOLD)


def malicious(n: int, m: int) -> list[int]:
    """Odd node indices first (spreading adversaries across slots), then even ones."""
    return (list(range(1, n, 2)) + list(range(0, n, 2)))[:m]


@click.command()
@click.option("--authorities", "sizes", default="4,5,7", show_default=True)
@click.option("--seeds", default=5, show_default=True)
@click.option("--rounds", default=30, show_default=True)
@click.option("--drop", default=0.0, show_default=True, help="Per-message drop probability.")
@click.option("--include-minority-honest", is_flag=True, help="Also run configs where honest nodes are not a majority.")
def main(sizes, seeds, rounds, drop, include_minority_honest):
    failures = 0
    for n in (int(s) for s in sizes.split(",")):
        counts = range(1, n) if include_minority_honest else sorted({1, max(1, n // 2 - 1)})
        for m in counts:
            for behavior in BEHAVIORS:
                ok = 0
                for seed in range(seeds):
                    behaviors = {i: behavior for i in malicious(n, m)}
                    cfg = standard_config(n, behaviors, num_rounds=rounds, rng_seed=seed, drop_probability=drop)
                    rep = run_simulation(cfg)
                    ok += rep.agreement and rep.tampered_records_on_canonical == 0
                failures += seeds - ok if 2 * m < n else 0
                click.echo(f"n={n} malicious={m} {behavior.value:11s} safe {ok}/{seeds}")
    click.echo(f"honest-majority failures: {failures}")
    raise SystemExit(1 if failures else 0)


if __name__ == "__main__":
    main()
