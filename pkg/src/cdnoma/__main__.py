import sys
from cdnoma.harness.cli import main

sys.exit(main())
