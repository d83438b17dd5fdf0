"""Run every bundled case study and print its checks.

Run from the package root:  python3 demos/case_studies.py
"""

from machinegames.cases import run_case

for name in ("roshambo", "primality", "frpd", "revelation", "universal"):
    bundle = run_case(name)
    print(f"{name}: {'PASS' if bundle.passed else 'FAIL'}")
    for r in bundle.results:
        print(f"   {r.name:<24} {'ok' if r.passed else 'FAILED'}  {r.description}")
