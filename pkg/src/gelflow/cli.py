"""``gelflow`` command-line entry point."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

from . import verify
from .config import load_config
from .errors import ConfigError, InvalidParameterError, MeshError, SolverError
from .mesh import mesh_stats, read_mesh
from .scheme import SimulationSetup, run
from .vtk import write_snapshot

EXIT_CONFIG, EXIT_MESH, EXIT_SOLVER, EXIT_IO = 1, 2, 3, 4

log = logging.getLogger("gelflow")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gelflow", description="Gel swelling finite element solver.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a simulation from a JSON config")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides the config)")
    r.add_argument("--stride", type=int, help="write every K-th snapshot (overrides the config)")
    c = sub.add_parser("convergence", help="manufactured-solution rate study")
    c.add_argument("config")
    c.add_argument("--out", help="output directory (overrides the config)")
    m = sub.add_parser("mesh-info", help="validate a mesh file and print statistics")
    m.add_argument("mesh")
    return p


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out or cfg.output)
    stride = args.stride or cfg.stride
    if stride < 1:
        raise ConfigError("must be >= 1", "stride")
    mesh = cfg.build_mesh()
    setup = SimulationSetup(mesh=mesh, material=cfg.material, u0=cfg.build_initial(), load=cfg.build_load(),
                            dt=cfg.dt, T=cfg.T, algorithm=cfg.algorithm, theta_threshold=cfg.theta_threshold,
                            hooks=cfg.build_hooks())
    out.mkdir(parents=True, exist_ok=True)

    def snapshot(state):
        if state.n % stride == 0:
            (out / f"snap_{state.n}.vtk").write_text(write_snapshot(state, mesh, cfg.magnification))

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = run(setup, observer=snapshot, keep_states=False)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    (out / "diagnostics.csv").write_text(result.diagnostics.to_csv())
    c = result.conserved
    print(f"steps: {result.grid.n_steps}  h: {result.disc.h:.4g}  dofs: {result.disc.nu + result.disc.np}")
    print(f"C_q = {c.C_q:.6e}  C_u = {c.C_u:.6e}  C_ptilde = {c.C_ptilde:.6e}  C_p = {c.C_p:.6e}")
    print(f"output written to {out}")
    return 0


def cmd_convergence(args) -> int:
    cfg = load_config(args.config)
    if cfg.domain["type"] != "rect":
        raise ConfigError("convergence studies need a rect domain", "domain.type")
    out = Path(args.out or cfg.output)
    cc = cfg.convergence
    table = verify.convergence_study(levels=cc.levels, coupling=cc.coupling, base_mesh=cfg.build_mesh(),
                                     dt0=cc.dt0, T=cc.T, material=cfg.material, algorithm=cc.algorithm)
    by = "dt" if cc.coupling == "fixed_mesh" else "h"
    text = table.to_csv(by=by)
    out.mkdir(parents=True, exist_ok=True)
    (out / "rates.csv").write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_mesh_info(args) -> int:
    m = read_mesh(Path(args.mesh).read_text())
    print(json.dumps(mesh_stats(m), indent=2))
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    handler = {"run": cmd_run, "convergence": cmd_convergence, "mesh-info": cmd_mesh_info}[args.command]
    try:
        return handler(args)
    except (ConfigError, InvalidParameterError) as exc:
        code, kind, err = EXIT_CONFIG, "config error", exc
    except MeshError as exc:
        code, kind, err = EXIT_MESH, "mesh error", exc
    except SolverError as exc:
        code, kind, err = EXIT_SOLVER, "solver error", exc
    except OSError as exc:
        code, kind, err = EXIT_IO, "I/O error", exc
    print(f"gelflow: {kind}: {err}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
