"""Command-line runner: every subcommand is a thin client of the service.

Default transport is in-process ASGI (no socket); pass --server to target a
running deployment instead.  Config JSON errors are reported with the line
of the offending key when a --config file is given.
"""

from __future__ import annotations

import asyncio
import json
import os
import sys
from pathlib import Path

import click
import httpx

from .service import create_app

_OUTPUT_ENV = "SCORELAB_OUTPUT_DIR"


def _request(server: str | None, method: str, path: str, payload: dict | None = None) -> httpx.Response:
    if server:
        return httpx.request(method, server.rstrip("/") + path, json=payload, timeout=None)

    async def _go() -> httpx.Response:
        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(transport=transport, base_url="http://scorelab") as client:
            return await client.request(method, path, json=payload)

    return asyncio.run(_go())


def _line_of_key(text: str, key: str) -> int | None:
    for i, line in enumerate(text.split("\n"), start=1):
        if f'"{key}"' in line:
            return i
    return None


def _fail(resp: httpx.Response, config_path: str | None = None, config_text: str = "") -> None:
    if resp.status_code == 422:
        for err in resp.json().get("detail", []):
            loc = [str(p) for p in err.get("loc", []) if p != "body"]
            key = loc[-1] if loc else "?"
            line = _line_of_key(config_text, key) if config_path else None
            where = f"{config_path}:{line}: " if line else ""
            click.echo(f"error: {where}field '{'.'.join(loc)}': {err.get('msg')}", err=True)
    else:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        click.echo(f"error: {detail}", err=True)
    sys.exit(1)


def _run_config(server: str | None, payload: dict, config_path: str | None = None, config_text: str = "") -> None:
    resp = _request(server, "POST", "/run", payload)
    if resp.status_code != 200:
        _fail(resp, config_path, config_text)
    manifest = resp.json()
    click.echo(json.dumps(manifest, indent=2, sort_keys=True))


def _merge_config(config: str | None, overrides: dict) -> tuple[dict, str | None, str]:
    payload: dict = {}
    text = ""
    if config:
        text = Path(config).read_text(encoding="utf-8")
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            click.echo(f"error: {config}:{exc.lineno}: {exc.msg}", err=True)
            sys.exit(1)
    payload.update({k: v for k, v in overrides.items() if v is not None})
    return payload, config, text


def _common(f):
    f = click.option("--server", default=None, help="service URL (default: in-process)")(f)
    f = click.option("--config", default=None, type=click.Path(exists=True), help="config JSON file")(f)
    f = click.option("--output-dir", default=None, help=f"artifact dir (or ${_OUTPUT_ENV})")(f)
    f = click.option("--seed", default=None, type=int)(f)
    return f


def _resolve_output(output_dir: str | None, experiment: str) -> str:
    base = output_dir or os.environ.get(_OUTPUT_ENV)
    return base if base else str(Path("runs") / experiment)


def _spec_options(f):
    f = click.option("--kind", default=None, type=click.Choice(["hypercube", "product-circle"]))(f)
    f = click.option("--d", default=None, type=int)(f)
    f = click.option("--r", "R", default=None, type=float)(f)
    f = click.option("--gamma", default=None, type=float)(f)
    return f


def _profile_options(f):
    f = click.option("--regime", default=None, type=click.Choice(["lp", "psi1"]))(f)
    f = click.option("--p", default=None, type=float)(f)
    f = click.option("--eps-err", default=None, type=float)(f)
    f = click.option("--rho", default=None, type=float)(f)
    f = click.option("--q-budget", default=None, type=int)(f)
    return f


@click.group()
def main() -> None:
    """Hard-instance experiments for smoothed score oracles."""


def _experiment_command(name: str, extra_options=()):
    def decorate(f):
        for opt in reversed(extra_options):
            f = opt(f)
        f = _profile_options(f)
        f = _spec_options(f)
        f = _common(f)
        return main.command(name)(f)

    return decorate


def _dispatch(experiment: str, server, config, output_dir, seed, **overrides):
    overrides = {k: v for k, v in overrides.items() if v is not None}
    overrides["seed"] = seed
    payload, path, text = _merge_config(config, overrides)
    payload["experiment"] = experiment
    payload.setdefault("output_dir", _resolve_output(output_dir, experiment))
    if output_dir:
        payload["output_dir"] = output_dir
    _run_config(server, payload, path, text)


@_experiment_command(
    "sweep",
    extra_options=(
        click.option("--trials", default=None, type=int),
        click.option("--points", default=None, type=int),
    ),
)
def sweep(server, config, output_dir, seed, **kw):
    """Shell-proxy signal curve over the ln-tau grid for one dimension."""
    _dispatch("sweep", server, config, output_dir, seed, **kw)


@_experiment_command(
    "fig1",
    extra_options=(
        click.option("--d-list", "d_list", multiple=True, type=int),
        click.option("--trials", default=None, type=int),
        click.option("--points", default=None, type=int),
    ),
)
def fig1(server, config, output_dir, seed, d_list, **kw):
    """Curves + width-scaling CSVs across a dimension ladder."""
    kw["d_list"] = list(d_list) if d_list else None
    _dispatch("fig1", server, config, output_dir, seed, **kw)


@_experiment_command(
    "windows",
    extra_options=(
        click.option("--tau-min", default=None, type=float),
        click.option("--tau-max", default=None, type=float),
        click.option("--tau-points", default=None, type=int),
        click.option("--samples", default=None, type=int),
        click.option("--c-constants", "c_constants", multiple=True, type=float),
    ),
)
def windows(server, config, output_dir, seed, c_constants, **kw):
    """Rate windows [kappa-, kappa+] on a tau grid."""
    kw["c_constants"] = list(c_constants) if c_constants else None
    _dispatch("windows", server, config, output_dir, seed, **kw)


@_experiment_command(
    "audit",
    extra_options=(
        click.option("--n", default=None, type=int),
        click.option("--samples", default=None, type=int),
        click.option("--tau-min", default=None, type=float),
        click.option("--tau-max", default=None, type=float),
        click.option("--tau-points", default=None, type=int),
    ),
)
def audit(server, config, output_dir, seed, **kw):
    """Oracle accuracy-envelope audit on a tau grid."""
    _dispatch("audit", server, config, output_dir, seed, **kw)


@_experiment_command(
    "coupling",
    extra_options=(
        click.option("--runs", default=None, type=int),
        click.option("--n-min", default=None, type=int),
        click.option("--n-max", default=None, type=int),
        click.option("--sigma-min", default=None, type=float),
        click.option("--sigma-max", default=None, type=float),
        click.option("--step-scale", default=None, type=float),
        click.option("--sampler", default=None, type=click.Choice(["reverse-sde-euler", "prob-flow-euler"])),
        click.option("--samples", default=None, type=int),
    ),
)
def coupling(server, config, output_dir, seed, **kw):
    """Null/planted coupled runs over packing-drawn rates."""
    _dispatch("coupling", server, config, output_dir, seed, **kw)


@_experiment_command(
    "separation",
    extra_options=(
        click.option("--n", default=None, type=int),
        click.option("--samples", default=None, type=int),
        click.option("--books", default=None, type=int),
        click.option("--n-min", default=None, type=int),
        click.option("--n-max", default=None, type=int),
    ),
)
def separation(server, config, output_dir, seed, **kw):
    """Base-noise acceptance-set mass coverage and fresh-codebook overlap."""
    _dispatch("separation", server, config, output_dir, seed, **kw)


@_experiment_command(
    "infochecks",
    extra_options=(
        click.option("--n", default=None, type=int),
        click.option("--samples", default=None, type=int),
        click.option("--tau-min", default=None, type=float),
        click.option("--tau-max", default=None, type=float),
        click.option("--tau-points", default=None, type=int),
    ),
)
def infochecks(server, config, output_dir, seed, **kw):
    """Information-rate, Fisher-gap, concentration, and de Bruijn estimates."""
    _dispatch("infochecks", server, config, output_dir, seed, **kw)


@main.command("schema-check")
@click.argument("file", type=click.Path(exists=True))
@click.option("--server", default=None)
def schema_check(file, server):
    """Validate a produced CSV against the documented schemas."""
    content = Path(file).read_text(encoding="utf-8")
    resp = _request(server, "POST", "/schema-check", {"content": content})
    if resp.status_code != 200:
        _fail(resp)
    body = resp.json()
    click.echo(f"{file}: schema '{body['schema']}', {body['rows']} rows")


@main.command("replay")
@click.argument("transcript", type=click.Path(exists=True))
@click.option("--server", default=None)
@click.option("--kind", default="hypercube", type=click.Choice(["hypercube", "product-circle"]))
@click.option("--d", required=True, type=int)
@click.option("--r", "R", default=1.0, type=float)
@click.option("--gamma", default=0.25, type=float)
@click.option("--regime", default="lp", type=click.Choice(["lp", "psi1"]))
@click.option("--eps-err", default=0.5, type=float)
@click.option("--n", default=None, type=int, help="planted codebook size (omit for null)")
@click.option("--seed", default=0, type=int)
@click.option("--out", default=None, type=click.Path(), help="write the new transcript JSON here")
def replay(transcript, server, kind, d, R, gamma, regime, eps_err, n, seed, out):
    """Re-drive a dumped query sequence against a fresh session."""
    queries = json.loads(Path(transcript).read_text(encoding="utf-8"))["entries"]

    async def _go() -> dict:
        if server:
            client = httpx.AsyncClient(base_url=server.rstrip("/"), timeout=None)
        else:
            # one client for the whole sequence so the session survives it
            client = httpx.AsyncClient(
                transport=httpx.ASGITransport(app=create_app()), base_url="http://scorelab"
            )
        async with client:
            resp = await client.post("/sessions", json={
                "kind": kind, "d": d, "R": R, "gamma": gamma,
                "regime": regime, "eps_err": eps_err, "n": n, "seed": seed,
            })
            if resp.status_code != 200:
                _fail(resp)
            sid = resp.json()["session_id"]
            for entry in queries:
                r2 = await client.post(
                    f"/sessions/{sid}/queries", json={"sigma": entry["sigma"], "x": entry["x"]}
                )
                if r2.status_code != 200:
                    _fail(r2)
            r3 = await client.get(f"/sessions/{sid}/transcript")
            if r3.status_code != 200:
                _fail(r3)
            await client.delete(f"/sessions/{sid}")
            return r3.json()

    result = asyncio.run(_go())
    text = json.dumps(result, indent=2)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
        click.echo(f"wrote {out}")
    else:
        click.echo(text)


@main.command("serve")
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(host, port):
    """Run the service with uvicorn."""
    import uvicorn

    uvicorn.run("scorelab.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
