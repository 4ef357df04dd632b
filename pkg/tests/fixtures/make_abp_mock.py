"""Regenerate abp_mock.json by running the pipeline against the rule-based responder."""
import sys
import tempfile
from pathlib import Path

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE))

from abp_responder import ROOT, AbpResponder  # noqa: E402

from devsworld.genpipe import RecordingClient, generate  # noqa: E402

if __name__ == "__main__":
    recorder = RecordingClient(AbpResponder())
    with tempfile.TemporaryDirectory() as out:
        generate((HERE / "abp_spec.md").read_text(), (HERE / "abp_contract.md").read_text(), recorder, out,
                 root_name=ROOT, workers=1)
    recorder.save(HERE / "abp_mock.json")
    print(f"{sum(len(v) for v in recorder.responses.values())} replies recorded")
