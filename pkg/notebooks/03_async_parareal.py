# %% [markdown]
# # Asynchronous parareal
#
# Every slice gets its own thread that keeps recomputing its right
# interface from whatever left interface is currently published, without
# waiting for the others. Afterwards we replay hand-made and random
# schedules deterministically.

# %%
from aparareal.asynchronous import async_solve
from aparareal.schedule import dumps, random_schedule, simulate_schedule, synchronous_schedule
from aparareal.sync import make_config, parareal_solve, sequential_reference

for N in (16, 32, 64):
    cfg = make_config(spot=25, strike=30, delta_T=0.1, n_slices=N, m=150)
    sync = parareal_solve(cfg)
    res, stats = async_solve(cfg)
    print(f"N={N:2d}  sync {sync.iterations:2d} iters  async min/max/mean "
          f"{stats.min}/{stats.max}/{stats.mean:.1f}  price {res.price:.6f}")

# %% [markdown]
# ## Schedule replay
#
# A schedule lists, per event, the active slices and the versions of the
# left interface they read. The synchronous schedule reproduces the
# synchronous iteration exactly.

# %%
cfg = make_config(spot=25, strike=30, delta_T=0.1, n_slices=4, m=32)
sync = parareal_solve(cfg)
print(simulate_schedule(cfg, synchronous_schedule(4, sync.iterations)).price == sync.price)

sched = random_schedule(4, 12, max_delay=2, seed=1)
print(dumps(sched))
res = simulate_schedule(cfg, sched)
_, ref = sequential_reference(cfg)
print(f"converged={res.converged}  price {res.price:.8f}  serial {ref:.8f}")
