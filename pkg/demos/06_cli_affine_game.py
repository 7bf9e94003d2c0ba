"""Command-line pipeline on an affine game described by an INI file.

Runs ``solve``, ``nash`` and ``verify`` on ``swap_game.ini`` and prints the
reports.  The same steps from a shell::

    nashgame solve  --config demos/swap_game.ini
    nashgame nash   --config demos/swap_game.ini
    nashgame verify --config demos/swap_game.ini --map demos/out/swap/nashmap.txt
"""

from pathlib import Path

from nashgame.cli import main

here = Path(__file__).parent
cfg = str(here / "swap_game.ini")
out = here / "out" / "swap"

for argv in (["solve", "--config", cfg],
             ["nash", "--config", cfg],
             ["verify", "--config", cfg, "--map", str(out / "nashmap.txt")]):
    print(f"$ nashgame {' '.join(argv)}")
    code = main(argv)
    print(f"exit code {code}\n")
