"""Measure mean mining attempts against the expected 2^k for k leading zero bits."""

import random

import click

from newschain.consensus import pow_mine


@click.command()
@click.option("--bits", default="4,6,8,10", show_default=True)
@click.option("--trials", default=50, show_default=True)
@click.option("--seed", default=0, show_default=True)
def main(bits, trials, seed):
    rng = random.Random(seed)
    for k in (int(b) for b in bits.split(",")):
        target = 2 ** (256 - k)
        attempts = [pow_mine(rng.randbytes(32), [rng.randbytes(32) for _ in range(3)], target) + 1 for _ in range(trials)]
        mean = sum(attempts) / trials
        click.echo(f"k={k:2d} expected {2**k:6d} mean {mean:9.1f} ratio {mean / 2**k:.2f} max {max(attempts)}")


if __name__ == "__main__":
    main()
