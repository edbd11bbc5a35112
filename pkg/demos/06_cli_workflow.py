"""The command-line workflow end to end, in a scratch directory.

Equivalent shell session:

    pffloc simulate --dir run --seed 4 --set simulation.steps=40
    pffloc build-field --dir run
    pffloc localize --dir run --method pff --set filter.sigma_o_sq=100
    pffloc evaluate run/out/estimate_pff.txt run/ground_truth.txt
    pffloc compare --dir run --methods pff,mmo,ekf
"""

import tempfile

from pffloc.cli import main

with tempfile.TemporaryDirectory() as run:
    common = ["--dir", run, "--set", "simulation.steps=40", "--set", "filter.sigma_o_sq=100",
              "--set", "optimizer.delta_conv=1e-4"]
    for argv in (["simulate", "--seed", "4", *common],
                 ["build-field", *common],
                 ["localize", "--method", "pff", *common],
                 ["evaluate", f"{run}/out/estimate_pff.txt", f"{run}/ground_truth.txt"],
                 ["compare", "--methods", "pff,mmo,ekf", *common]):
        print(f"$ pffloc {' '.join(a.replace(run, 'run') for a in argv)}")
        code = main(argv)
        print(f"[exit {code}]\n")
