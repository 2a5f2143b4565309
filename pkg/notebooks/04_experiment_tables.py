# %% [markdown]
# # Experiment sweeps
#
# The harness behind `python -m aparareal` can also be driven from Python.
# Sweep 1 varies the slice length with 16 slices (maturity 16 dT); the
# comparison sweep pits synchronous against asynchronous runs for growing
# slice counts. Wall-clock columns depend on the machine.

# %%
import sys

from aparareal.bench import emit_csv, parse_spec, run_table1, run_table3

spec = parse_spec(["--table", "1", "--mode", "sync"])
report = run_table1(spec, sweep=(0.1, 0.2, 0.5, 1.0))
emit_csv(report, sys.stdout)

# %%
spec = parse_spec(["--table", "3", "--reps", "2"])
emit_csv(run_table3(spec), sys.stdout)
