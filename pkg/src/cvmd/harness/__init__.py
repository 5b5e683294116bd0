"""Drivers for the three simulation cases and the invariant suite."""
from .case1 import Case1Result, run_case1
from .case2 import Case2Result, run_case2
from .case3 import Case3Result, envelope_coverage, run_case3
from .checks import CheckResult, run_check

__all__ = ["Case1Result", "Case2Result", "Case3Result", "CheckResult", "envelope_coverage",
           "run_case1", "run_case2", "run_case3", "run_check"]
