"""Run the illustration preset and print each outlet's reputation trajectory."""

import json

import click

from newschain.network_sim import run_simulation, scenario_illustration


@click.command()
@click.option("--report", type=click.Path(dir_okay=False), help="Also write the full JSON report here.")
def main(report):
    rep = run_simulation(scenario_illustration())
    for name, points in rep.reputation.items():
        trail = "  ".join(f"h{p['height']}:{p['reputation']}/{p['status']}" for p in points)
        click.echo(f"{name:14s} {trail}")
    for e in rep.events:
        if e["type"] == "epoch" and (e["promotions"] or e["revocations"]):
            click.echo(f"epoch at height {e['height']}: promoted {e['promotions']} revoked {e['revocations']}")
    click.echo(f"agreement={rep.agreement} tampered={rep.tampered_records_on_canonical} pot={json.dumps([p['on_chain'] for p in rep.pot])}")
    if report:
        with open(report, "w") as fh:
            fh.write(rep.to_json())


if __name__ == "__main__":
    main()
