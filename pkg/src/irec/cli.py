"""Command-line interface: compress/decompress plus the study harness.

Exit codes: 0 success, 1 usage, 2 I/O, 3 format or corrupt stream,
4 model mismatch, 5 validation failure.
"""

from __future__ import annotations

import json
import sys

import click

from . import pipeline, synthetic
from .codec import RecConfig
from .errors import (
    ConfigError,
    CorruptStreamError,
    FormatError,
    IrecError,
    ModelMismatchError,
    UsageError,
)
from .model import load_model, read_pgm, write_pgm

EXIT_USAGE = 1
EXIT_IO = 2
EXIT_FORMAT = 3
EXIT_MODEL = 4
EXIT_VALIDATE = 5


@click.group()
def cli():
    """Relative-entropy-coding image codec."""


def _stats_line(result, extra=None):
    record = {
        "bpp": result.bpp,
        "kl_nats": sum(result.kl_per_block),
        "bits": 8 * len(result.data),
        "psnr": result.psnr,
        "seconds": result.seconds,
    }
    if extra:
        record.update(extra)
    click.echo(json.dumps(record))


@cli.command("compress")
@click.option("--mode", type=click.Choice(["lossy", "lossless"]), default="lossless")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--omega", type=float, default=3.0, show_default=True)
@click.option("--epsilon", type=float, default=None,
              help="Oversampling rate; defaults to 0.2 lossless, 0.0 lossy.")
@click.option("--beams", type=int, default=None,
              help="Beam count; defaults to 20 lossless, 10 lossy.")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def cmd_compress(mode, model_path, seed, omega, epsilon, beams, in_path, out_path):
    """Compress a PGM image to an IREC container."""
    if epsilon is None:
        epsilon = 0.2 if mode == "lossless" else 0.0
    if beams is None:
        beams = 20 if mode == "lossless" else 10
    model = load_model(model_path)
    img = read_pgm(in_path)
    cfg = RecConfig(omega=omega, epsilon=epsilon, beams=beams)
    if mode == "lossless":
        result = pipeline.compress_lossless(img, model, cfg, seed)
    else:
        result = pipeline.compress_lossy(img, model, cfg, seed)
    with open(out_path, "wb") as fh:
        fh.write(result.data)
    _stats_line(result, {"mode": mode})


@cli.command("decompress")
@click.option("--mode", type=click.Choice(["lossy", "lossless"]), default="lossless")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def cmd_decompress(mode, model_path, in_path, out_path):
    """Decompress an IREC container back to a PGM image."""
    model = load_model(model_path)
    with open(in_path, "rb") as fh:
        data = fh.read()
    if mode == "lossless":
        img = pipeline.decompress_lossless(data, model)
    else:
        img = pipeline.decompress_lossy(data, model)
    write_pgm(img, out_path)


@cli.command("bias-study")
@click.option("--beams", "beam_list", default="1,5,20", show_default=True,
              help="Comma-separated beam counts.")
@click.option("--kl", "kl_target", type=float, default=30.0, show_default=True)
@click.option("--dims", type=int, default=16, show_default=True)
@click.option("--trials", type=int, default=200, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", default="-", show_default=True)
def cmd_bias_study(beam_list, kl_target, dims, trials, seed, out_path):
    """Mean final log-importance-weight per beam count, as CSV."""
    beams = [int(b) for b in beam_list.split(",")]
    rows = synthetic.bias_study(beams, kl_target, dims, trials, seed)
    lines = ["beams,mean_log_ratio,stderr,kl_nats"]
    lines += [
        f"{r.beams},{r.mean_log_ratio:.6f},{r.stderr:.6f},{r.kl:.6f}" for r in rows
    ]
    _write_csv(out_path, lines)


@cli.command("sweep")
@click.option("--omega-grid", default="3,4,5", show_default=True)
@click.option("--epsilon-grid", default="0.2", show_default=True)
@click.option("--beam-grid", default="1,5,20", show_default=True)
@click.option("--trials", type=int, default=50, show_default=True)
@click.option("--kl", "kl_target", type=float, default=30.0, show_default=True)
@click.option("--dims", type=int, default=16, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", default="-", show_default=True)
def cmd_sweep(omega_grid, epsilon_grid, beam_grid, trials, kl_target, dims, seed, out_path):
    """Hyperparameter grid: codelength overhead and wall time, as CSV."""
    cells = synthetic.sweep(
        [float(x) for x in omega_grid.split(",")],
        [float(x) for x in epsilon_grid.split(",")],
        [int(x) for x in beam_grid.split(",")],
        trials=trials,
        kl_target=kl_target,
        dims=dims,
        seed=seed,
    )
    lines = ["omega,epsilon,beams,overhead_ratio,seconds,failures"]
    lines += [
        f"{c.omega},{c.epsilon},{c.beams},{c.overhead_ratio:.6f},"
        f"{c.seconds:.3f},{c.failures}"
        for c in cells
    ]
    _write_csv(out_path, lines)


@cli.command("validate")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--csv", "csv_path", default=None,
              help="Where to write the per-step KL histogram CSV.")
def cmd_validate(seed, csv_path):
    """Run the oracle suite; nonzero exit on any failed check."""
    results = synthetic.run_validation(seed=seed, csv_path=csv_path)
    failed = False
    for r in results:
        status = "ok" if r.passed else "FAIL"
        click.echo(f"{status:4s} {r.name}: {r.detail}")
        failed = failed or not r.passed
    if failed:
        raise ValidationFailure()


class ValidationFailure(IrecError):
    pass


def _write_csv(out_path, lines):
    text = "\n".join(lines) + "\n"
    if out_path == "-":
        click.echo(text, nl=False)
    else:
        with open(out_path, "w") as fh:
            fh.write(text)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except (click.UsageError, UsageError, ConfigError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        return EXIT_USAGE
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        return EXIT_IO
    except (FormatError, CorruptStreamError) as exc:
        click.echo(f"format error: {exc}", err=True)
        return EXIT_FORMAT
    except ModelMismatchError as exc:
        click.echo(f"model mismatch: {exc}", err=True)
        return EXIT_MODEL
    except ValidationFailure:
        return EXIT_VALIDATE
    return 0


if __name__ == "__main__":
    sys.exit(main())
