#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Parse exported cell diagrams with pydot's graph grammar."""
import pathlib
import re
import subprocess
import sys
import tempfile

try:
    import pydot
except ImportError:
    print("pydot not available")
    sys.exit(77)

aca = sys.argv[1]
label = re.compile(r'^"?[A-Za-z0-9_]+ p=\d\.\d{6} c=\d+/\d+"?$')

with tempfile.TemporaryDirectory() as tmp:
    run = pathlib.Path(tmp) / "run"
    small = ["-q", "--dataset.samples", "120", "--search.epochs", "1", "--search.init_channels", "4"]
    subprocess.run([aca, "search", *small, "-o", str(run)], check=True)
    subprocess.run([aca, "derive", *small, "--checkpoint", str(run / "supernet.acas"), "-o", str(run)], check=True)
    subprocess.run([aca, "export-dot", "--genotype", str(run / "genotype.txt"),
                    "--allocation", str(run / "allocation.txt"), "--out", str(run / "dot")], check=True)
    for cell in ("normal", "reduce"):
        graphs = pydot.graph_from_dot_file(str(run / "dot" / f"{cell}.dot"))
        if not graphs or len(graphs) != 1:
            sys.exit(f"{cell}.dot: expected one digraph, parsed {graphs!r}")
        g = graphs[0]
        if g.get_type() != "digraph":
            sys.exit(f"{cell}.dot: graph type {g.get_type()}")
        labelled = [e for e in g.get_edges() if e.get_label() and "p=" in e.get_label()]
        if len(labelled) != 8:
            sys.exit(f"{cell}.dot: {len(labelled)} operation edges, expected 8")
        for e in labelled:
            if not label.match(e.get_label()):
                sys.exit(f"{cell}.dot: malformed label {e.get_label()}")
        print(f"{cell}.dot: digraph with {len(labelled)} operation edges")
