import sys
from pathlib import Path

# test-local helpers (rule_oracle, frame builders) live next to the tests
sys.path.insert(0, str(Path(__file__).parent))
