"""Drive the surrogate propulsion plant and look at its behavior.

Shows the square-root feed-pressure coupling (delivered thrust settles
below the commanded level), the asymmetric rise/fall valve dynamics,
and the exact propellant bookkeeping. Writes the simulated step-stair
trajectory to demos/output/.
"""

from pathlib import Path

import numpy as np

from throttleid import CommandTrace, PlantConfig, module_mass, simulate
from throttleid.plant import steady_state_thrust

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

cfg = PlantConfig()
print(f"plant: 4 engines rated {cfg.e_max:.0f} N, throttle floor {cfg.e_min:.0f} N, "
      f"regulated feed {cfg.p_reg/1e6:.2f} MPa, dt {cfg.dt*1e3:.0f} ms")

# one engine commanded 600 N: the delivered steady thrust sags with feed droop
ss = steady_state_thrust([600.0, 0, 0, 0], cfg)[0]
print(f"\ncommand 600 N on one engine -> steady delivered {ss:.1f} N "
      f"(feed droop pulls sqrt(p/p_reg) below 1)")
ss4 = steady_state_thrust([600.0] * 4, cfg)[0]
print(f"same command on all four     -> {ss4:.1f} N each (shared feed droops harder)")

# asymmetric response: rise at tau={cfg.tau_rise}s, fall at tau={cfg.tau_fall}s
n = int(10.0 / cfg.dt)
cmd = np.zeros((2 * n, 4))
cmd[:n] = 700.0
status = np.zeros((2 * n, 4))
status[:n] = 1.0
traj = simulate(CommandTrace(dt=cfg.dt, commands=cmd, status=status), cfg)
th = traj.thrusts[:, 0]
peak = th.max()
t = traj.t
rise = t[np.argmax(th >= 0.9 * peak)] - t[np.argmax(th >= 0.1 * peak)]
fall_seg, t_seg = th[n:], t[n:]
fall = t_seg[np.argmax(fall_seg <= 0.1 * peak)] - t_seg[np.argmax(fall_seg <= 0.9 * peak)]
print(f"\n10-90% rise time {rise*1e3:.0f} ms vs 90-10% fall time {fall*1e3:.0f} ms "
      f"(closing is slower: tau {cfg.tau_fall}s vs {cfg.tau_rise}s)")

# stair up and down, all engines; mass bookkeeping closes exactly
stair_cmd = np.repeat([400.0, 600.0, 800.0, 600.0, 400.0], n // 2)[:, None] * np.ones((1, 4))
stair = CommandTrace(dt=cfg.dt, commands=stair_cmd, status=np.ones_like(stair_cmd))
traj = simulate(stair, cfg)
mm = module_mass(traj, cfg)
print(f"\n25 s stair 400/600/800 N x4: ejected {traj.m_fuel[-1]+traj.m_ox[-1]:.2f} kg, "
      f"module mass {mm[0]:.0f} -> {mm[-1]:.2f} kg")
closure = np.max(np.abs(mm + traj.m_fuel + traj.m_ox - cfg.m_module0))
print(f"conservation residual: {closure:.2e} kg")

path = OUT / "stair_trajectory.csv"
traj.to_csv(path)
print(f"\nwrote {path}")
