import os
import sys

# flat top-level modules, importable from tests/ without installation
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
