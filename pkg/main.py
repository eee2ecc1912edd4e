"""Run the `routing-lab` command line from a source checkout: `python main.py gen-graphs ...`."""
from scripts.routing_lab import main

if __name__ == "__main__":
    raise SystemExit(main())
