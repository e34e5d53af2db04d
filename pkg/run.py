"""
Launcher for the CTPP command line.
Run this file with a command, e.g. ``python run.py train --config run.yaml``.
"""

import sys

from ctpp.core.config import get_settings
from ctpp.main import main

if __name__ == "__main__":
    settings = get_settings()
    print(f"🤖 {settings.app_name} v{settings.app_version}")
    print(f"📁 Default output directory: {settings.output_dir}")
    print("=" * 50)
    sys.exit(main())
