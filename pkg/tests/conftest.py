import os
import sys

from hypothesis import settings

# the modules are flat files at the repository root
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

settings.register_profile("default", max_examples=50, deadline=None)
settings.register_profile("fast", max_examples=5, deadline=None)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))
