"""Regenerate the JSON run specs in ``specs/`` from the canned scenarios."""

from pathlib import Path

from blockfree.analysis import case_study_scenario, head_on_scenario, ring_scenario
from blockfree.runspec import OutputOptions, dump_run_spec

here = Path(__file__).parent / "specs"
here.mkdir(exist_ok=True)
for name, sc in {
    "head_on": head_on_scenario(seed=1),
    "case_study": case_study_scenario(seed=0),
    "case_study_biased": case_study_scenario(seed=0, bias1=10.0).with_(name="case_study_biased"),
    "ring8": ring_scenario(8, seed=0),
}.items():
    (here / f"{name}.json").write_text(dump_run_spec(sc, OutputOptions(out_dir="out")) + "\n")
    print("wrote", here / f"{name}.json")
